"""Time grids and discrete differentiation matrices."""

from dataclasses import dataclass

import numpy as np

from .errors import GridError


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing sample times, optionally declared periodic.

    ``periodic=True`` asserts the state is sampled on a closed loop,
    u(t_0) = u(t_{T-1}): the first and last samples refer to the same
    physical point and differentiation wraps around.
    """

    points: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 3:
            raise GridError(f"need at least 3 time samples, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GridError("time samples must be finite")
        if np.any(np.diff(pts) <= 0):
            raise GridError("time samples must be strictly increasing")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "periodic", bool(self.periodic))

    def __len__(self):
        return self.points.size

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def dt(self) -> float:
        """Spacing of the grid; raises if the spacing is not uniform."""
        steps = np.diff(self.points)
        if not np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
            raise GridError("grid is not uniformly spaced")
        return float(steps[0])


def build_uniform_grid(n_samples: int, t_end: float, periodic: bool = False) -> TimeGrid:
    """Uniform grid t_k = t_end * k / (T-1), k = 0..T-1.

    The endpoints are exactly 0 and t_end.
    """
    if n_samples < 3:
        raise GridError(f"need at least 3 time samples, got {n_samples}")
    if not t_end > 0:
        raise GridError(f"t_end must be positive, got {t_end}")
    return TimeGrid(np.linspace(0.0, float(t_end), int(n_samples)), periodic=periodic)


def build_diff_matrix(grid: TimeGrid) -> np.ndarray:
    """Second-order T x T differentiation matrix for a uniform grid.

    Periodic grids get circulant central differences over the T-1 distinct
    samples (index T-1 aliases index 0, so stencil indices wrap mod T-1 and
    the last row repeats the first). Non-periodic grids get central
    differences in the interior and one-sided three-point stencils at the
    ends; both variants annihilate constants and are exact on linear data.
    """
    n = grid.size
    c = 1.0 / (2.0 * grid.dt)
    mat = np.zeros((n, n))
    if grid.periodic:
        wrap = n - 1
        rows = np.arange(wrap)
        # += so the two stencil entries cancel in the degenerate wrap=2 case
        np.add.at(mat, (rows, (rows + 1) % wrap), c)
        np.add.at(mat, (rows, (rows - 1) % wrap), -c)
        mat[n - 1] = mat[0]
    else:
        rows = np.arange(1, n - 1)
        mat[rows, rows + 1] = c
        mat[rows, rows - 1] = -c
        mat[0, :3] = np.array([-3.0, 4.0, -1.0]) * c
        mat[n - 1, n - 3:] = np.array([1.0, -4.0, 3.0]) * c
    return mat

"""State-shaped arrays (trajectories, data, parameters, adjoint fields) and their CSV form.

Flattening convention used everywhere: component-major (Fortran) order.
A (T, U) state array flattens so entry (k, h) lands at index h*T + k; a
(D*U, U) parameter matrix flattens so entry (r, h) lands at index h*D*U + r.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .grid import TimeGrid


def _clean_matrix(values, n_rows=None, what="array"):
    vals = np.array(values, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.ndim != 2:
        raise DimensionError(f"{what} must be 2-d, got shape {vals.shape}")
    if n_rows is not None and vals.shape[0] != n_rows:
        raise DimensionError(f"{what} has {vals.shape[0]} rows, expected {n_rows}")
    if not np.all(np.isfinite(vals)):
        raise DimensionError(f"{what} contains non-finite entries")
    vals.flags.writeable = False
    return vals


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Discretized state: one row per time sample, one column per component."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _clean_matrix(self.values, len(self.grid), "trajectory values")
        object.__setattr__(self, "values", vals)

    @property
    def n_states(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class DataVector:
    """Noisy samples of a trajectory plus the noise metadata that produced them."""

    grid: TimeGrid
    values: np.ndarray
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        vals = _clean_matrix(self.values, len(self.grid), "data values")
        object.__setattr__(self, "values", vals)
        if self.noise_sigma < 0:
            raise DimensionError(f"noise_sigma must be nonnegative, got {self.noise_sigma}")
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_states(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class ParamMatrix:
    """Model coefficients, shaped (D*U, U); entry (h' + U*j, h) weighs basis j,
    source component h', in the equation for component h."""

    values: np.ndarray

    def __post_init__(self):
        vals = _clean_matrix(self.values, None, "parameter matrix")
        if vals.size == 0:
            raise DimensionError("parameter matrix must be non-empty")
        object.__setattr__(self, "values", vals)

    @property
    def u_dim(self) -> int:
        return self.values.shape[1]

    @property
    def size(self) -> int:
        """Flat length M = D * U**2."""
        return self.values.size

    def flatten(self) -> np.ndarray:
        return self.values.ravel(order="F")

    @classmethod
    def from_flat(cls, flat, u_dim: int) -> "ParamMatrix":
        flat = np.asarray(flat, dtype=float)
        if flat.ndim != 1 or flat.size % u_dim != 0:
            raise DimensionError(
                f"flat parameter vector of length {flat.size} does not split into {u_dim} columns"
            )
        return cls(flat.reshape((flat.size // u_dim, u_dim), order="F"))


@dataclass(frozen=True, eq=False)
class AdjointField:
    """Lagrange multipliers paired with a residual, shaped like the state."""

    values: np.ndarray

    def __post_init__(self):
        vals = _clean_matrix(self.values, None, "adjoint values")
        object.__setattr__(self, "values", vals)

    @property
    def n_states(self) -> int:
        return self.values.shape[1]


def as_state_values(obj) -> np.ndarray:
    """(T, U) float array from a Trajectory/DataVector/AdjointField or raw array."""
    vals = np.asarray(getattr(obj, "values", obj), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return vals


def as_param_values(obj) -> np.ndarray:
    vals = np.asarray(getattr(obj, "values", obj), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return vals


def flatten_state(values) -> np.ndarray:
    return as_state_values(values).ravel(order="F")


def unflatten_state(vec, t_dim: int, u_dim: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.size != t_dim * u_dim:
        raise DimensionError(f"vector of length {vec.size} is not {t_dim}x{u_dim}")
    return vec.reshape((t_dim, u_dim), order="F")


# CSV form: header line, one row per time sample, 17 significant digits.

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_table(path, preamble, header, columns):
    rows = np.column_stack(columns)
    lines = [f"# {k}={v}" for k, v in (preamble or {}).items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_table(path):
    meta, header, rows = {}, None, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, val = body.split("=", 1)
                    meta[key.strip()] = val.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(c) for c in line.split(",")])
    if header is None:
        raise DimensionError(f"{path}: no header line found")
    return meta, header, np.asarray(rows, dtype=float)


def write_trajectory_csv(traj: Trajectory, path, preamble=None) -> None:
    """Header t,u_0,...,u_{U-1}; optional '# key=value' preamble lines."""
    header = ["t"] + [f"u_{h}" for h in range(traj.n_states)]
    _write_table(path, preamble, header, [traj.grid.points, traj.values])


def read_trajectory_csv(path, periodic: bool = False) -> Trajectory:
    _, header, table = _read_table(path)
    if header[0] != "t":
        raise DimensionError(f"{path}: first column must be t, got {header[0]!r}")
    grid = TimeGrid(table[:, 0], periodic=periodic)
    return Trajectory(grid, table[:, 1:])


def write_data_csv(data: DataVector, path, preamble=None) -> None:
    """Header t,d_0,...,d_{U-1}; noise metadata travels in the manifest, not here."""
    header = ["t"] + [f"d_{h}" for h in range(data.n_states)]
    _write_table(path, preamble, header, [data.grid.points, data.values])


def read_data_csv(path, periodic=False, noise_sigma=0.0, seed=0) -> DataVector:
    _, header, table = _read_table(path)
    if header[0] != "t":
        raise DimensionError(f"{path}: first column must be t, got {header[0]!r}")
    grid = TimeGrid(table[:, 0], periodic=periodic)
    return DataVector(grid, table[:, 1:], noise_sigma=noise_sigma, seed=seed)

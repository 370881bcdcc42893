"""Adjoint-based inner optimization and the homotopy over the regularization schedule.

The inner loop alternates, at fixed weight alpha: a Newton solve for the
state, a Landweber solve for the adjoint, the Lagrangian gradient in the
parameters, and a thresholded gradient step. The outer loop walks a strictly
decreasing alpha schedule, warm-starting every level from the previous one,
and returns the whole path.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, DivergenceError, HomotopyError
from .solvers import LandweberConfig, NewtonConfig, SolveReport, landweber_solve, newton_solve
from .state import AdjointField, ParamMatrix, Trajectory, as_param_values, as_state_values


@dataclass(frozen=True)
class RegularizerSpec:
    """Smoothed L1 penalty sum_p sqrt(m_p^2 + epsilon^2) and thresholding switch.

    ``unsquared=True`` selects the variant sum_p sqrt(m_p + epsilon^2) instead;
    that form is not a norm surrogate (undefined below -epsilon^2) and exists
    only for comparison.
    """

    epsilon: float = 1e-4
    thresholding: bool = True
    unsquared: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class InnerConfig:
    tau: float = 1e-3
    n_max: int = 1000
    n_es: int = 5
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    landweber: LandweberConfig = field(default_factory=LandweberConfig)

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.n_max < 1:
            raise ConfigError(f"n_max must be at least 1, got {self.n_max}")
        if self.n_es < 1:
            raise ConfigError(f"n_es must be at least 1, got {self.n_es}")


class HomotopySchedule:
    """Strictly decreasing, strictly positive regularization weights."""

    def __init__(self, alphas):
        alphas = np.array(alphas, dtype=float)
        if alphas.ndim != 1 or alphas.size == 0:
            raise ConfigError("schedule must be a non-empty 1-d sequence")
        if not np.all(alphas > 0):
            raise ConfigError("schedule weights must be strictly positive")
        if not np.all(np.diff(alphas) < 0):
            raise ConfigError("schedule weights must be strictly decreasing")
        alphas.flags.writeable = False
        self._alphas = alphas

    @property
    def alphas(self) -> np.ndarray:
        return self._alphas

    def __len__(self):
        return self._alphas.size

    def __iter__(self):
        return iter(self._alphas)

    def __getitem__(self, idx):
        return self._alphas[idx]


def make_log_schedule(alpha_hi: float, alpha_lo: float, n_levels: int) -> HomotopySchedule:
    """n_levels log-equispaced weights from alpha_hi down to alpha_lo."""
    if not (alpha_hi > alpha_lo > 0):
        raise ConfigError(f"need alpha_hi > alpha_lo > 0, got {alpha_hi}, {alpha_lo}")
    if n_levels < 2:
        raise ConfigError(f"need at least 2 levels, got {n_levels}")
    return HomotopySchedule(np.logspace(np.log10(alpha_hi), np.log10(alpha_lo), n_levels))


def data_loss(u, d) -> float:
    """Sum of squared entrywise differences between state and data."""
    uv = as_state_values(u)
    dv = as_state_values(d)
    if uv.shape != dv.shape:
        raise DimensionError(f"state shape {uv.shape} vs data shape {dv.shape}")
    return float(np.sum((uv - dv) ** 2))


def data_loss_grad(u, d) -> np.ndarray:
    """Gradient of the squared misfit in the state, 2*(u - d), shape (T, U)."""
    uv = as_state_values(u)
    dv = as_state_values(d)
    if uv.shape != dv.shape:
        raise DimensionError(f"state shape {uv.shape} vs data shape {dv.shape}")
    return 2.0 * (uv - dv)


def smooth_l1(m, spec: RegularizerSpec) -> float:
    vals = as_param_values(m)
    eps_sq = spec.epsilon**2
    if spec.unsquared:
        shifted = vals + eps_sq
        if np.any(shifted < 0):
            raise ConfigError("unsquared penalty undefined: entries below -epsilon^2")
        return float(np.sum(np.sqrt(shifted)))
    return float(np.sum(np.sqrt(vals**2 + eps_sq)))


def smooth_l1_grad(m, spec: RegularizerSpec) -> np.ndarray:
    """Flat length-M gradient of the smoothed penalty; entries lie in (-1, 1)."""
    vals = as_param_values(m)
    eps_sq = spec.epsilon**2
    if spec.unsquared:
        shifted = vals + eps_sq
        if np.any(shifted < 0):
            raise ConfigError("unsquared penalty undefined: entries below -epsilon^2")
        grad = 0.5 / np.sqrt(shifted)
    else:
        grad = vals / np.sqrt(vals**2 + eps_sq)
    return grad.ravel(order="F")


def hard_threshold(m: ParamMatrix, alpha: float) -> ParamMatrix:
    """Zero every entry with |m_p| strictly below alpha/2; boundary values survive."""
    if alpha < 0:
        raise ConfigError(f"alpha must be nonnegative, got {alpha}")
    vals = as_param_values(m)
    return ParamMatrix(np.where(np.abs(vals) < alpha / 2.0, 0.0, vals))


def lagrangian_grad_m(model, u, m, lam, alpha: float, spec: RegularizerSpec) -> np.ndarray:
    """Gradient of the Lagrangian in the parameters: alpha*g'(m) - jac_m(u,m)^T lam.

    With lam solving the adjoint system at (u, m), this equals the gradient of
    the reduced objective m -> data_loss(u_m) + alpha * g(m).
    """
    if alpha < 0:
        raise ConfigError(f"alpha must be nonnegative, got {alpha}")
    lam_flat = as_state_values(lam).ravel(order="F")
    jac_m = model.jac_m(u, m)
    if jac_m.shape[0] != lam_flat.size:
        raise DimensionError(f"adjoint length {lam_flat.size} vs jac_m rows {jac_m.shape[0]}")
    return alpha * smooth_l1_grad(m, spec) - jac_m.T @ lam_flat


@dataclass(frozen=True)
class PathRecord:
    """Best iterate of one fixed-alpha inner solve, plus diagnostics."""

    level: int
    alpha: float
    m: ParamMatrix
    u: Trajectory
    lam: AdjointField
    data_loss: float
    reg_value: float
    inner_iterations: int
    newton_report: SolveReport
    landweber_report: SolveReport
    aborted: bool = False

    @property
    def objective(self) -> float:
        return self.data_loss + self.alpha * self.reg_value


def inner_solve(
    model,
    data,
    alpha: float,
    warm,
    cfg: InnerConfig | None = None,
    spec: RegularizerSpec | None = None,
    level: int = 0,
    callback=None,
) -> PathRecord:
    """Fixed-alpha optimization; returns the best-objective iterate observed.

    Each iteration solves the forward problem at the current parameters
    (Newton, warm-started from the running state), the adjoint system at the
    new state (Landweber), evaluates the objective data_loss + alpha*reg,
    then takes the thresholded gradient step. The loop early-stops once the
    objective has failed to improve its running best ``n_es`` times in a row.

    The first adjoint solve of a level warm-starts from the handed-over
    multipliers; subsequent iterations restart Landweber from zero, so its
    bounded iteration count acts as an iterative regularizer of the
    (near-singular) adjoint system instead of slowly accumulating its
    noise-amplified modes.

    ``callback(i, u, m, lam, objective)``, when given, observes every iterate
    right after the objective evaluation (before the parameter update).
    """
    cfg = cfg or InnerConfig()
    spec = spec or RegularizerSpec()
    if not alpha > 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    u, m, lam = warm
    t_dim, u_dim, _ = model.dims
    lam_zero = AdjointField(np.zeros((t_dim, u_dim)))
    best = None
    best_obj = np.inf
    stall = 0
    iterations = 0
    aborted = False
    for i in range(1, cfg.n_max + 1):
        try:
            u, newton_rep = newton_solve(model, m, u, cfg.newton)
            adj_matrix = model.jac_u(u, m).T
            lam, landweber_rep = landweber_solve(
                adj_matrix,
                data_loss_grad(u, data),
                lam if i == 1 else lam_zero,
                cfg.landweber,
            )
        except DivergenceError as err:
            raise DivergenceError(
                f"inner solver diverged at level {level}, iteration {i}: {err}",
                last_iterate=err.last_iterate,
                level=level,
                iteration=i,
            ) from err
        loss = data_loss(u, data)
        reg = smooth_l1(m, spec)
        obj = loss + alpha * reg
        iterations = i
        if callback is not None:
            callback(i, u, m, lam, obj)
        if not np.isfinite(obj):
            aborted = True
            break
        if obj < best_obj:
            best_obj = obj
            best = (u, m, lam, loss, reg, newton_rep, landweber_rep)
            stall = 0
        else:
            stall += 1
            if stall >= cfg.n_es:
                break
        grad = lagrangian_grad_m(model, u, m, lam, alpha, spec)
        m = ParamMatrix(m.values - cfg.tau * grad.reshape(m.values.shape, order="F"))
        if spec.thresholding:
            m = hard_threshold(m, alpha)
    if best is None:
        raise DivergenceError(
            f"inner objective non-finite from the first iteration at level {level}",
            level=level,
            iteration=iterations,
        )
    u_b, m_b, lam_b, loss_b, reg_b, newton_rep, landweber_rep = best
    return PathRecord(
        level=level,
        alpha=float(alpha),
        m=m_b,
        u=u_b,
        lam=lam_b,
        data_loss=loss_b,
        reg_value=reg_b,
        inner_iterations=iterations,
        newton_report=newton_rep,
        landweber_report=landweber_rep,
        aborted=aborted,
    )


def homotopy_run(
    model,
    data,
    schedule: HomotopySchedule,
    init,
    cfg: InnerConfig | None = None,
    spec: RegularizerSpec | None = None,
    callback=None,
) -> list:
    """Trace the full regularization path with warm restarts.

    Level l runs :func:`inner_solve` at ``schedule[l]`` initialized from the
    best iterate of level l-1 (level 0 from ``init``). On an inner failure
    the completed prefix travels on the raised :class:`HomotopyError`.
    """
    records = []
    warm = init
    for level, alpha in enumerate(schedule):
        try:
            record = inner_solve(model, data, alpha, warm, cfg, spec, level=level, callback=callback)
        except DivergenceError as err:
            raise HomotopyError(
                f"homotopy failed at level {level} of {len(schedule)}: {err}",
                level=level,
                records=records,
            ) from err
        records.append(record)
        warm = (record.u, record.m, record.lam)
    return records


# Path CSV: l,alpha,data_loss,reg_value,inner_iters,m_0..m_{M-1}; '#' preamble.

def write_path_csv(records, path, preamble=None) -> None:
    if not records:
        raise ConfigError("cannot write an empty path")
    m_size = records[0].m.size
    header = ["l", "alpha", "data_loss", "reg_value", "inner_iters"]
    header += [f"m_{p}" for p in range(m_size)]
    lines = [f"# {k}={v}" for k, v in (preamble or {}).items()]
    lines.append(",".join(header))
    for rec in records:
        cells = [
            str(rec.level),
            format(rec.alpha, ".17g"),
            format(rec.data_loss, ".17g"),
            format(rec.reg_value, ".17g"),
            str(rec.inner_iterations),
        ]
        cells += [format(x, ".17g") for x in rec.m.flatten()]
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class PathTable:
    """Columns of a path CSV read back from disk."""

    levels: np.ndarray
    alphas: np.ndarray
    data_losses: np.ndarray
    reg_values: np.ndarray
    inner_iters: np.ndarray
    params: np.ndarray  # (n_levels, M)
    metadata: dict


def read_path_csv(path) -> PathTable:
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
    if header is None or not rows:
        raise ConfigError(f"{path}: empty path file")
    table = np.asarray(rows, dtype=float)
    return PathTable(
        levels=table[:, 0].astype(int),
        alphas=table[:, 1],
        data_losses=table[:, 2],
        reg_values=table[:, 3],
        inner_iters=table[:, 4].astype(int),
        params=table[:, 5:],
        metadata=meta,
    )

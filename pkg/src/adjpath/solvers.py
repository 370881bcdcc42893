"""Inexact inner solvers: damped Newton for the forward problem, Landweber for the adjoint.

Neither solver is meant to reach machine precision inside the optimization
loops: both stop at an iteration cap or a residual tolerance, whichever comes
first, and return their last iterate either way.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import ConfigError, DivergenceError
from .state import AdjointField, Trajectory, as_state_values, flatten_state, unflatten_state

# Reciprocal-condition estimate below which the linearized system counts as
# numerically singular, and the relative cutoff for the truncated
# least-squares step taken in that case. Collocation systems without a
# boundary row carry one near-null mode (the flow direction); inverting along
# it would replace the warm-started state by a distant exact root.
SINGULAR_RCOND = 1e-8
TRUNCATION_RCOND = 1e-6

# Accepted steps that no longer make a perceptible dent in the residual norm
# mean the iteration has hit the filtered-residual floor; further steps are
# wasted. Slow-but-real progress (backtracked steps) stays below this ratio.
STAGNATION_FACTOR = 0.99


@dataclass(frozen=True)
class NewtonConfig:
    max_iter: int = 50
    residual_tol: float = 1e-8
    step_damping: float = 1.0
    max_backtracks: int = 5

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigError(f"newton max_iter must be at least 1, got {self.max_iter}")
        if self.residual_tol < 0:
            raise ConfigError(f"newton residual_tol must be nonnegative, got {self.residual_tol}")
        if not (0.0 < self.step_damping <= 1.0):
            raise ConfigError(f"step_damping must lie in (0, 1], got {self.step_damping}")
        if self.max_backtracks < 0:
            raise ConfigError(f"max_backtracks must be nonnegative, got {self.max_backtracks}")


@dataclass(frozen=True)
class LandweberConfig:
    max_iter: int = 100
    step: float | None = None  # None -> 0.9 / sigma_max**2 via power iteration
    residual_tol: float = 1e-8
    power_iters: int = 20

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigError(f"landweber max_iter must be at least 1, got {self.max_iter}")
        if self.step is not None and not self.step > 0:
            raise ConfigError(f"landweber step must be positive, got {self.step}")
        if self.residual_tol < 0:
            raise ConfigError(f"landweber residual_tol must be nonnegative, got {self.residual_tol}")
        if self.power_iters < 1:
            raise ConfigError(f"power_iters must be at least 1, got {self.power_iters}")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual_norm: float
    converged: bool
    used_fallback: bool = False

    def __post_init__(self):
        if not self.residual_norm >= 0:
            raise ConfigError(f"residual norm must be nonnegative, got {self.residual_norm}")


def _newton_step(jac: np.ndarray, rhs: np.ndarray):
    """Solve J delta = rhs; (delta, fallback_used).

    Well-conditioned systems get the LU solution. Systems that are singular
    or numerically singular (reciprocal condition below SINGULAR_RCOND) get
    the truncated least-squares step instead: it is the minimum-norm step, so
    it never moves the iterate along a near-null direction. That keeps the
    warm-started state attached to the branch it came from instead of jumping
    to some distant exact root.
    """
    anorm = np.linalg.norm(jac, 1)
    lu, piv, info = lapack.dgetrf(jac)
    if info == 0 and anorm > 0:
        rcond_est, _ = lapack.dgecon(lu, anorm, norm="1")
        if rcond_est >= SINGULAR_RCOND:
            delta, solve_info = lapack.dgetrs(lu, piv, rhs)
            if solve_info == 0 and np.all(np.isfinite(delta)):
                return delta, False
    delta = sla.lstsq(jac, rhs, cond=TRUNCATION_RCOND, lapack_driver="gelsy")[0]
    return delta, True


def newton_solve(model, m, u_init: Trajectory, cfg: NewtonConfig | None = None):
    """Damped Newton iteration for the state u satisfying F(u, m) = 0.

    Each step solves the dense linearized system J du = F(u, m); numerically
    singular systems fall back to a truncated least-squares step (flagged in
    the report). When a full step increases the residual norm it is halved up
    to ``max_backtracks`` times and the last candidate is accepted regardless;
    the loop also stops once an accepted step no longer perceptibly reduces
    the residual norm, which is where truncated steps hit their residual floor.
    The final iterate is returned whether or not the tolerance was met, since
    the surrounding loops tolerate inexact solves.

    Returns
    -------
    (Trajectory, SolveReport)
        Last iterate (converged or not) and iteration diagnostics.
    """
    cfg = cfg or NewtonConfig()
    t_dim, u_dim, _ = model.dims
    grid = u_init.grid
    u = model.check_state(u_init).copy()
    res = model.residual(u, m)
    rnorm = float(np.linalg.norm(res))
    used_fallback = False
    iterations = 0
    for _ in range(cfg.max_iter):
        if rnorm <= cfg.residual_tol:
            break
        jac = model.jac_u(u, m)
        delta, fell_back = _newton_step(jac, flatten_state(res))
        used_fallback = used_fallback or fell_back
        du = unflatten_state(delta, t_dim, u_dim)
        step = cfg.step_damping
        for _ in range(cfg.max_backtracks + 1):
            u_new = u - step * du
            res_new = model.residual(u_new, m)
            rnorm_new = float(np.linalg.norm(res_new))
            if np.isfinite(rnorm_new) and rnorm_new <= rnorm:
                break
            step *= 0.5
        if not (np.all(np.isfinite(u_new)) and np.isfinite(rnorm_new)):
            raise DivergenceError(
                "newton iterate became non-finite",
                last_iterate=Trajectory(grid, u),
            )
        stagnated = rnorm_new > STAGNATION_FACTOR * rnorm
        u, res, rnorm = u_new, res_new, rnorm_new
        iterations += 1
        if stagnated:
            break
    return (
        Trajectory(grid, u),
        SolveReport(iterations, rnorm, rnorm <= cfg.residual_tol, used_fallback),
    )


def _power_iteration(gram: np.ndarray, iters: int) -> float:
    """Largest eigenvalue estimate of a PSD matrix (deterministic start)."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return float(v @ (gram @ v))


def landweber_solve(matrix, rhs, lambda_init: AdjointField, cfg: LandweberConfig | None = None):
    """Landweber iteration for the linear system  A lam = b.

    Gradient descent on 0.5*||A lam - b||^2; started from zero it converges to
    the minimum-norm least-squares solution. With ``step=None`` the step is
    0.9 / sigma_max(A)^2, sigma_max estimated by power iteration; the stopping
    test is on the normal-equation residual ||A^T (b - A lam)||.

    Returns
    -------
    (AdjointField, SolveReport)
    """
    cfg = cfg or LandweberConfig()
    mat = np.asarray(matrix, dtype=float)
    b = flatten_state(rhs)
    lam_vals = as_state_values(lambda_init)
    t_dim, u_dim = lam_vals.shape
    if mat.shape != (b.size, b.size) or b.size != lam_vals.size:
        raise ConfigError(
            f"landweber shapes inconsistent: matrix {mat.shape}, rhs {b.size}, init {lam_vals.size}"
        )
    lam = flatten_state(lam_vals).copy()
    gram = mat.T @ mat
    c = mat.T @ b
    if cfg.step is None:
        smax_sq = _power_iteration(gram, cfg.power_iters)
        if not (np.isfinite(smax_sq) and smax_sq > 0):
            raise ConfigError("landweber auto step failed: operator norm estimate is zero")
        step = 0.9 / smax_sq
    else:
        step = cfg.step
    tol_sq = cfg.residual_tol**2
    iterations = 0
    while True:
        g = c - gram @ lam
        gnorm_sq = float(g @ g)
        if not np.isfinite(gnorm_sq):
            raise DivergenceError("landweber iterate became non-finite")
        if gnorm_sq <= tol_sq or iterations >= cfg.max_iter:
            break
        lam = lam + step * g
        iterations += 1
    gnorm = float(np.sqrt(gnorm_sq))
    return (
        AdjointField(unflatten_state(lam, t_dim, u_dim)),
        SolveReport(iterations, gnorm, gnorm <= cfg.residual_tol),
    )

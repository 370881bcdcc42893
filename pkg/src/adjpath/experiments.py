"""Metrics, best-weight selection against ground truth, multi-trial statistics,
and semi-convergence reporting."""

from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from .basis import cosine_basis
from .config import RunConfig
from .errors import AdjpathError, ConfigError
from .grid import build_uniform_grid
from .model import CollocationModel
from .optimize import (
    InnerConfig,
    RegularizerSpec,
    hard_threshold,  # noqa: F401  (re-exported for callers composing pipelines)
    homotopy_run,
    make_log_schedule,
)
from .solvers import LandweberConfig, NewtonConfig
from .state import AdjointField, ParamMatrix, Trajectory
from .synth import (
    GROUND_TRUTH_INDEX,
    CauchySpec,
    NoiseSpec,
    add_noise,
    ground_truths,
    integrate_cauchy,
    trial_seed,
)


def relative_error(est, truth) -> float:
    """Euclidean relative error ||est - truth||_2 / ||truth||_2."""
    e = np.ravel(getattr(est, "values", est)).astype(float)
    t = np.ravel(getattr(truth, "values", truth)).astype(float)
    if e.shape != t.shape:
        raise ConfigError(f"length mismatch: {e.size} vs {t.size}")
    denom = np.linalg.norm(t)
    if denom == 0.0:
        raise ValueError("relative error undefined for a zero reference")
    return float(np.linalg.norm(e - t) / denom)


def best_alpha(records, m_true):
    """Level with the smallest parameter relative error; ties go to larger alpha.

    Returns (level index into the path, alpha, ParamMatrix at that level).
    """
    if not records:
        raise ValueError("empty path")
    errors = [relative_error(rec.m, m_true) for rec in records]
    idx = int(np.argmin(errors))  # argmin takes the first minimum = largest alpha
    return idx, records[idx].alpha, records[idx].m


def solution_error(record, clean: Trajectory, basis, rel_tol=1e-9, abs_tol=1e-11) -> float:
    """Relative L2 error of the trajectory integrated from a record's parameters.

    The initial state and grid are taken from the clean reference trajectory.
    Integration failures propagate; callers running trial batches treat them
    as failed trials.
    """
    spec = CauchySpec(basis, record.m, clean.values[0], clean.grid)
    u_star = integrate_cauchy(spec, rel_tol=rel_tol, abs_tol=abs_tol)
    return relative_error(u_star.values, clean.values)


def mean_std(values):
    """Two-pass mean and population standard deviation.

    A constant sample short-circuits to std 0 exactly, so aggregated tables
    of identical trials carry no rounding dust.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("empty sample")
    if np.all(arr == arr[0]):
        return float(arr[0]), 0.0
    mean = float(np.mean(arr))
    return mean, float(np.sqrt(np.mean((arr - mean) ** 2)))


@dataclass(frozen=True)
class TrialResult:
    gt: str
    sigma: float
    trial: int
    seed: int
    best_level: int
    best_alpha: float
    m_best: ParamMatrix
    rel_err_m: float
    rel_err_u: float
    alphas: np.ndarray
    error_curve: np.ndarray
    data_loss_curve: np.ndarray
    params_path: np.ndarray  # (n_levels, M)
    inner_iters: np.ndarray
    reg_values: np.ndarray


@dataclass(frozen=True)
class StatsRow:
    gt: str
    sigma: float
    m_mean: float
    m_std: float
    u_mean: float
    u_std: float
    n_trials: int
    n_failed: int


@dataclass(frozen=True)
class TableResult:
    rows: list
    trials: list
    failures: list


def _inner_config(config: RunConfig) -> InnerConfig:
    return InnerConfig(
        tau=config.tau,
        n_max=config.n_max,
        n_es=config.n_es,
        newton=NewtonConfig(max_iter=config.newton_max_iter, residual_tol=config.newton_tol),
        landweber=LandweberConfig(
            max_iter=config.landweber_max_iter, residual_tol=config.landweber_tol
        ),
    )


def run_trial(config: RunConfig, gt_name: str, sigma: float, trial: int) -> TrialResult:
    """One noise realization: generate data, trace the full path, select best alpha."""
    truths = ground_truths()
    if gt_name not in truths:
        raise ConfigError(f"unknown ground truth {gt_name!r}")
    m_true = truths[gt_name]
    if config.basis_size != m_true.values.shape[0]:
        raise ConfigError(
            f"ground truth {gt_name} needs basis_size {m_true.values.shape[0]}, "
            f"config has {config.basis_size}"
        )
    grid = build_uniform_grid(config.grid_t, config.t_end, periodic=config.periodic)
    basis = cosine_basis(config.basis_size)
    clean = integrate_cauchy(CauchySpec(basis, m_true, [config.u0], grid))
    seed = trial_seed(
        config.master_seed, GROUND_TRUTH_INDEX[gt_name], config.sigmas.index(sigma), trial
    )
    data = add_noise(clean, NoiseSpec(sigma, seed))
    model = CollocationModel(basis, grid, n_states=1)
    schedule = make_log_schedule(config.alpha_hi, config.alpha_lo, config.n_levels)
    init = (
        Trajectory(grid, data.values),
        ParamMatrix(np.zeros_like(m_true.values)),
        AdjointField(np.zeros((grid.size, 1))),
    )
    records = homotopy_run(
        model,
        data,
        schedule,
        init,
        _inner_config(config),
        RegularizerSpec(epsilon=config.epsilon, thresholding=config.thresholding),
    )
    level, alpha_star, m_star = best_alpha(records, m_true)
    rel_u = solution_error(records[level], clean, basis)
    return TrialResult(
        gt=gt_name,
        sigma=sigma,
        trial=trial,
        seed=seed,
        best_level=level,
        best_alpha=alpha_star,
        m_best=m_star,
        rel_err_m=relative_error(m_star, m_true),
        rel_err_u=rel_u,
        alphas=np.array([r.alpha for r in records]),
        error_curve=np.array([relative_error(r.m, m_true) for r in records]),
        data_loss_curve=np.array([r.data_loss for r in records]),
        params_path=np.stack([r.m.flatten() for r in records]),
        inner_iters=np.array([r.inner_iterations for r in records]),
        reg_values=np.array([r.reg_value for r in records]),
    )


def _trial_task(args):
    config, gt_name, sigma, trial = args
    try:
        return ("ok", run_trial(config, gt_name, sigma, trial))
    except AdjpathError as err:
        return ("fail", {"gt": gt_name, "sigma": sigma, "trial": trial, "error": str(err)})


def run_table(config: RunConfig, workers: int = 1, progress=None) -> TableResult:
    """Full multi-trial protocol over every (ground truth, sigma) cell.

    Trials are independent and may run on a process pool; results are
    aggregated in a fixed order, so the output is identical for any worker
    count. Failed trials are excluded from the statistics and reported.
    """
    tasks = [
        (config, gt, sigma, trial)
        for gt in config.ground_truths
        for sigma in config.sigmas
        for trial in range(config.n_trials)
    ]
    if workers > 1:
        with get_context("spawn").Pool(workers) as pool:
            outcomes = pool.map(_trial_task, tasks)
    else:
        outcomes = []
        for task in tasks:
            outcomes.append(_trial_task(task))
            if progress is not None:
                progress(task, outcomes[-1])
    trials, failures = [], []
    for status, payload in outcomes:
        (trials if status == "ok" else failures).append(payload)
    rows = []
    for gt in config.ground_truths:
        for sigma in config.sigmas:
            cell = [t for t in trials if t.gt == gt and t.sigma == sigma]
            failed = [f for f in failures if f["gt"] == gt and f["sigma"] == sigma]
            if cell:
                m_mean, m_std = mean_std([t.rel_err_m for t in cell])
                u_mean, u_std = mean_std([t.rel_err_u for t in cell])
            else:
                m_mean = m_std = u_mean = u_std = float("nan")
            rows.append(
                StatsRow(
                    gt=gt,
                    sigma=sigma,
                    m_mean=m_mean,
                    m_std=m_std,
                    u_mean=u_mean,
                    u_std=u_std,
                    n_trials=len(cell),
                    n_failed=len(failed),
                )
            )
    return TableResult(rows=rows, trials=trials, failures=failures)


@dataclass(frozen=True)
class SemiConvergenceReport:
    alphas: np.ndarray
    error_curve: np.ndarray
    argmin_level: int
    interior_minimum: bool
    data_loss_curve: np.ndarray
    terminal_start: int
    terminal_losses: np.ndarray
    terminal_loss_nonincreasing: bool


def semi_convergence_from_curves(
    alphas, error_curve, data_loss_curve, margin: float = 0.05, loss_rtol: float = 1e-9
) -> SemiConvergenceReport:
    """Flag an interior error minimum and a non-increasing terminal loss segment.

    The minimum counts as interior when the smallest error sits at least
    ``margin`` (relative) below the error at both ends of the path. The
    terminal segment is the last third of the levels; "non-increasing" allows
    successive increases up to ``loss_rtol`` times the segment's scale.
    """
    alphas = np.asarray(alphas, dtype=float)
    errors = np.asarray(error_curve, dtype=float)
    losses = np.asarray(data_loss_curve, dtype=float)
    if not (alphas.size == errors.size == losses.size) or alphas.size < 3:
        raise ConfigError("need three aligned curve points per level")
    argmin = int(np.argmin(errors))
    e_min = errors[argmin]
    interior = bool(
        e_min <= (1.0 - margin) * errors[0] and e_min <= (1.0 - margin) * errors[-1]
    )
    start = (2 * errors.size) // 3
    tail = losses[start:]
    slack = loss_rtol * float(np.max(np.abs(tail)))
    nonincreasing = bool(np.all(np.diff(tail) <= slack))
    return SemiConvergenceReport(
        alphas=alphas,
        error_curve=errors,
        argmin_level=argmin,
        interior_minimum=interior,
        data_loss_curve=losses,
        terminal_start=start,
        terminal_losses=tail,
        terminal_loss_nonincreasing=nonincreasing,
    )


def semi_convergence_report(records, m_true, margin: float = 0.05, loss_rtol: float = 1e-9):
    """Semi-convergence summary computed from a list of path records."""
    alphas = [r.alpha for r in records]
    errors = [relative_error(r.m, m_true) for r in records]
    losses = [r.data_loss for r in records]
    return semi_convergence_from_curves(alphas, errors, losses, margin=margin, loss_rtol=loss_rtol)


# Table rendering: rows m1, m2 (parameters) then u1, u2 (solutions), one
# column pair per noise level.

def table_csv_lines(rows, preamble=None) -> list:
    sigmas = sorted({r.sigma for r in rows})
    by_gt = {}
    for r in rows:
        by_gt.setdefault(r.gt, {})[r.sigma] = r
    lines = [f"# {k}={v}" for k, v in (preamble or {}).items()]
    header = ["quantity"]
    for s in sigmas:
        header += [f"sigma_{s}_mean", f"sigma_{s}_std"]
    lines.append(",".join(header))
    gts = sorted(by_gt)
    for kind in ("m", "u"):
        for gt in gts:
            label = f"{kind}{gt[1:]}" if gt.startswith("m") else f"{kind}_{gt}"
            cells = [label]
            for s in sigmas:
                row = by_gt[gt].get(s)
                if row is None:
                    cells += ["nan", "nan"]
                elif kind == "m":
                    cells += [format(row.m_mean, ".17g"), format(row.m_std, ".17g")]
                else:
                    cells += [format(row.u_mean, ".17g"), format(row.u_std, ".17g")]
            lines.append(",".join(cells))
    return lines


def table_text_lines(rows, preamble=None) -> list:
    sigmas = sorted({r.sigma for r in rows})
    by_gt = {}
    for r in rows:
        by_gt.setdefault(r.gt, {})[r.sigma] = r
    gts = sorted(by_gt)
    width = 16
    lines = list(preamble or [])
    lines.append("".join(["quantity".ljust(10)] + [f"sigma={s}".rjust(width) for s in sigmas]))
    for kind in ("m", "u"):
        for gt in gts:
            label = f"{kind}{gt[1:]}" if gt.startswith("m") else f"{kind}_{gt}"
            cells = [label.ljust(10)]
            for s in sigmas:
                row = by_gt[gt].get(s)
                if row is None:
                    cells.append("--".rjust(width))
                    continue
                mean, std = (row.m_mean, row.m_std) if kind == "m" else (row.u_mean, row.u_std)
                cells.append(f"{mean:.3f} +/- {std:.3f}".rjust(width))
            lines.append("".join(cells))
    return lines

"""Command-line front end: fixture generation, single solves, table runs, reports.

Exit codes: 0 success, 2 configuration problem, 3 solver divergence, 4 I/O failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .basis import cosine_basis
from .config import RunConfig, config_hash, config_to_tree, load_config
from .errors import ConfigError, DivergenceError, HomotopyError, StiffnessError
from .experiments import (
    best_alpha,
    run_table,
    semi_convergence_from_curves,
    table_csv_lines,
    table_text_lines,
)
from .grid import build_uniform_grid
from .model import CollocationModel
from .optimize import (
    RegularizerSpec,
    homotopy_run,
    make_log_schedule,
    read_path_csv,
    write_path_csv,
)
from .state import AdjointField, ParamMatrix, Trajectory, write_trajectory_csv
from .synth import (
    GROUND_TRUTH_INDEX,
    CauchySpec,
    NoiseSpec,
    add_noise,
    ground_truths,
    integrate_cauchy,
    periodicity_gap,
    read_fixture_csv,
    trial_seed,
    write_fixture_csv,
)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _preamble(config: RunConfig) -> dict:
    return {"config_hash": config_hash(config), "master_seed": config.master_seed}


def _fixture_name(gt: str, sigma: float, trial: int) -> str:
    return f"fixture_{gt}_{sigma:g}_{trial}.csv"


def cmd_generate(config: RunConfig, out_dir: Path) -> int:
    """Write every (ground truth, sigma, trial) fixture plus a manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = build_uniform_grid(config.grid_t, config.t_end, periodic=config.periodic)
    basis = cosine_basis(config.basis_size)
    truths = ground_truths()
    manifest = {
        "config": config_to_tree(config),
        "config_hash": config_hash(config),
        "master_seed": config.master_seed,
        "integrator": {"rel_tol": 1e-9, "abs_tol": 1e-11},
        "fixtures": [],
    }
    for gt in config.ground_truths:
        clean = integrate_cauchy(CauchySpec(basis, truths[gt], [config.u0], grid))
        gap = periodicity_gap(clean)
        for s_idx, sigma in enumerate(config.sigmas):
            for trial in range(config.n_trials):
                seed = trial_seed(config.master_seed, GROUND_TRUTH_INDEX[gt], s_idx, trial)
                data = add_noise(clean, NoiseSpec(sigma, seed))
                name = _fixture_name(gt, sigma, trial)
                preamble = dict(_preamble(config))
                preamble.update({"gt": gt, "sigma": sigma, "trial": trial, "seed": seed})
                write_fixture_csv(out_dir / name, clean, data, preamble=preamble)
                manifest["fixtures"].append(
                    {
                        "file": name,
                        "gt": gt,
                        "sigma": sigma,
                        "trial": trial,
                        "seed": seed,
                        "periodicity_gap": gap,
                    }
                )
        _log(f"generate: {gt} done ({len(config.sigmas) * config.n_trials} fixtures)")
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _log(f"generate: wrote {len(manifest['fixtures'])} fixtures to {out_dir}")
    return 0


def cmd_solve(config: RunConfig, data_file: Path, out_dir: Path, gt: str | None = None) -> int:
    """Run one full homotopy on a fixture; write path CSV, per-level trajectories, report."""
    out_dir.mkdir(parents=True, exist_ok=True)
    clean, data, meta = read_fixture_csv(data_file, periodic=config.periodic)
    grid = data.grid
    basis = cosine_basis(config.basis_size)
    model = CollocationModel(basis, grid, n_states=1)
    schedule = make_log_schedule(config.alpha_hi, config.alpha_lo, config.n_levels)
    from .experiments import _inner_config  # shared solver wiring

    init = (
        Trajectory(grid, data.values),
        ParamMatrix(np.zeros((config.basis_size, 1))),
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
    preamble = dict(_preamble(config))
    gt_name = gt or meta.get("gt")
    if gt_name:
        preamble["gt"] = gt_name
    write_path_csv(records, out_dir / "path.csv", preamble=preamble)
    levels_dir = out_dir / "levels"
    levels_dir.mkdir(exist_ok=True)
    for rec in records:
        write_trajectory_csv(rec.u, levels_dir / f"level_{rec.level:03d}.csv", preamble=preamble)
    report = {
        "config_hash": config_hash(config),
        "master_seed": config.master_seed,
        "data_file": str(data_file),
        "n_levels": len(records),
        "final_data_loss": records[-1].data_loss,
        "inner_iterations": [r.inner_iterations for r in records],
        "newton_converged": [r.newton_report.converged for r in records],
        "landweber_converged": [r.landweber_report.converged for r in records],
    }
    if gt_name and gt_name in ground_truths():
        level, alpha_star, m_star = best_alpha(records, ground_truths()[gt_name])
        report["best_level"] = level
        report["best_alpha"] = alpha_star
        report["best_rel_err_m"] = float(
            np.linalg.norm(m_star.flatten() - ground_truths()[gt_name].flatten())
            / np.linalg.norm(ground_truths()[gt_name].flatten())
        )
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _log(f"solve: path of {len(records)} levels written to {out_dir}")
    return 0


def cmd_table(config: RunConfig, out_dir: Path, workers: int) -> int:
    """Full reproduction table; per-trial path CSVs and a manifest alongside."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths_dir = out_dir / "paths"
    paths_dir.mkdir(exist_ok=True)
    _log(
        f"table: {len(config.ground_truths)} truths x {len(config.sigmas)} sigmas "
        f"x {config.n_trials} trials, {workers} worker(s)"
    )
    result = run_table(
        config,
        workers=workers,
        progress=lambda task, outcome: _log(
            f"table: {task[1]} sigma={task[2]:g} trial={task[3]} -> {outcome[0]}"
        ),
    )
    preamble = _preamble(config)
    for trial in result.trials:
        name = f"trial_{trial.gt}_{trial.sigma:g}_{trial.trial}.csv"
        lines = [f"# {k}={v}" for k, v in preamble.items()]
        lines.append(f"# gt={trial.gt}")
        lines.append(f"# sigma={trial.sigma:g}")
        lines.append(f"# trial={trial.trial}")
        lines.append(f"# seed={trial.seed}")
        header = ["l", "alpha", "data_loss", "reg_value", "inner_iters"]
        header += [f"m_{p}" for p in range(trial.params_path.shape[1])]
        lines.append(",".join(header))
        for lvl in range(trial.alphas.size):
            cells = [
                str(lvl),
                format(trial.alphas[lvl], ".17g"),
                format(trial.data_loss_curve[lvl], ".17g"),
                format(trial.reg_values[lvl], ".17g"),
                str(int(trial.inner_iters[lvl])),
            ]
            cells += [format(x, ".17g") for x in trial.params_path[lvl]]
            lines.append(",".join(cells))
        with open(paths_dir / name, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    with open(out_dir / "table.csv", "w") as fh:
        fh.write("\n".join(table_csv_lines(result.rows, preamble=preamble)) + "\n")
    text = table_text_lines(
        result.rows, preamble=[f"config_hash={preamble['config_hash']}",
                               f"master_seed={preamble['master_seed']}"]
    )
    with open(out_dir / "table.txt", "w") as fh:
        fh.write("\n".join(text) + "\n")
    manifest = {
        "config": config_to_tree(config),
        "config_hash": preamble["config_hash"],
        "master_seed": config.master_seed,
        "n_failed": len(result.failures),
        "failures": result.failures,
        "trial_seeds": {
            f"{t.gt}/{t.sigma:g}/{t.trial}": t.seed for t in result.trials
        },
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for line in text:
        _log(line)
    if result.failures:
        _log(f"table: {len(result.failures)} failed trial(s) excluded")
    return 0


def cmd_report(config: RunConfig | None, path_files, out_dir: Path, gt: str | None = None) -> int:
    """Semi-convergence summaries from stored path CSVs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    truths = ground_truths()
    rows = []
    for path_file in path_files:
        table = read_path_csv(path_file)
        gt_name = gt or table.metadata.get("gt")
        if gt_name not in truths:
            raise ConfigError(
                f"{path_file}: ground truth unknown (metadata gt={gt_name!r}); pass --gt"
            )
        truth = truths[gt_name].flatten()
        errors = np.linalg.norm(table.params - truth, axis=1) / np.linalg.norm(truth)
        report = semi_convergence_from_curves(table.alphas, errors, table.data_losses)
        rows.append(
            {
                "file": str(path_file),
                "gt": gt_name,
                "argmin_level": report.argmin_level,
                "best_error": float(report.error_curve[report.argmin_level]),
                "first_error": float(report.error_curve[0]),
                "last_error": float(report.error_curve[-1]),
                "interior_minimum": report.interior_minimum,
                "terminal_loss_nonincreasing": report.terminal_loss_nonincreasing,
            }
        )
    header = [
        "file", "gt", "argmin_level", "best_error", "first_error", "last_error",
        "interior_minimum", "terminal_loss_nonincreasing",
    ]
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(
                [
                    row["file"],
                    row["gt"],
                    str(row["argmin_level"]),
                    format(row["best_error"], ".17g"),
                    format(row["first_error"], ".17g"),
                    format(row["last_error"], ".17g"),
                    str(int(row["interior_minimum"])),
                    str(int(row["terminal_loss_nonincreasing"])),
                ]
            )
        )
    with open(out_dir / "semi_convergence.csv", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    n_interior = sum(r["interior_minimum"] for r in rows)
    _log(
        f"report: {len(rows)} path(s), {n_interior} with an interior error minimum"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adjpath",
        description="Sparse dynamics recovery by adjoint-state descent along a regularization path.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument("--profile", choices=["paper", "ci"], default=None)
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: physical cores)")
        p.add_argument("--unsafe-override", action="store_true",
                       help="allow changing values pinned by the paper profile")

    p_gen = sub.add_parser("generate", help="write synthetic fixtures")
    add_common(p_gen)
    p_solve = sub.add_parser("solve", help="run one homotopy on a fixture")
    add_common(p_solve)
    p_solve.add_argument("--data", type=Path, required=True, help="fixture CSV")
    p_solve.add_argument("--gt", default=None, help="ground truth id for error reporting")
    p_table = sub.add_parser("table", help="full multi-trial reproduction table")
    add_common(p_table)
    p_report = sub.add_parser("report", help="semi-convergence summaries from path CSVs")
    add_common(p_report)
    p_report.add_argument("paths", nargs="+", type=Path, help="path CSV files")
    p_report.add_argument("--gt", default=None, help="ground truth id override")
    return parser


def _default_workers() -> int:
    try:
        import psutil

        physical = psutil.cpu_count(logical=False)
        if physical:
            return physical
    except ImportError:
        pass
    return os.cpu_count() or 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(
            path=args.config,
            profile=args.profile,
            seed=args.seed,
            unsafe_override=args.unsafe_override,
        )
        workers = args.workers if args.workers else _default_workers()
        if args.command == "generate":
            return cmd_generate(config, args.out)
        if args.command == "solve":
            return cmd_solve(config, args.data, args.out, gt=args.gt)
        if args.command == "table":
            return cmd_table(config, args.out, workers)
        if args.command == "report":
            return cmd_report(config, args.paths, args.out, gt=args.gt)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as err:
        _log(f"config error: {err}")
        return 2
    except (DivergenceError, HomotopyError, StiffnessError) as err:
        _log(f"solver error: {err}")
        return 3
    except OSError as err:
        _log(f"io error: {err}")
        return 4


if __name__ == "__main__":
    sys.exit(main())

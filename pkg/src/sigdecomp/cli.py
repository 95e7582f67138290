"""Command-line front end.

Four commands: ``decompose`` fits a configured model to a CSV and writes
per-component CSVs, imputation, report, manifest, and SVG plots;
``validate`` scores the model by planted-missing cross validation;
``gridsearch`` sweeps declared parameter axes and refits at the argmin;
``synth-simple`` writes the bundled synthetic example (noise + smooth
trigonometric sum + two-level square wave) with its ground truth.

Exit codes: 0 success, 2 config error, 3 I/O or data error, 4 solver
non-convergence, 5 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import functools
import json
import os
import sys
import time

import numpy as np

from . import __version__, synth
from .config import ModelConfig, config_hash, load_config, make_classes_for
from .csvio import read_csv, write_matrix_csv, write_rows_csv
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DataError,
    DegenerateProblemError,
    DegenerateScaleError,
    DivergenceError,
    SigDecompError,
)
from .modelsel import cross_validate, grid_search
from .signal import Signal, log_transform, standardize
from .solver import Problem, solve
from .svg import heat_map, line_plot

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4
EXIT_INTERNAL = 5


def _say(args, message):
    if not args.quiet:
        print(message)


def _json_clean(obj):
    """Replace non-finite floats by None so emitted JSON is strict."""
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    return obj


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _apply_preprocess(signal: Signal, steps):
    """Run the declared steps in order; returns (signal, inverse records)."""
    records = []
    for step in steps:
        if step.op == "log":
            signal, dropped = log_transform(signal)
            records.append(("log", dropped))
        else:
            signal, rec = standardize(signal, per_channel=step.per_channel)
            records.append(("standardize", rec))
    return signal, records


def _invert_preprocess(values: np.ndarray, records) -> np.ndarray:
    for op, rec in reversed(records):
        if op == "log":
            values = np.exp(values)
        else:
            values = rec.invert(values)
    return values


def _solver_config(config: ModelConfig, args):
    cfg = config.solver
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _component_label(config: ModelConfig, k: int) -> str:
    spec = config.components[k]
    if spec["class"] == "common":
        return f"common({spec['inner']['class']})"
    return spec["class"]


def _write_fit_outputs(out, config, table, work, decomp, report, records, args):
    """Component CSVs, imputation, report, and plots shared by commands."""
    outputs = []
    time_col = table.time
    time_name = table.time_name or "t"
    if time_col is None:
        time_col = tuple(str(i) for i in range(work.T))
    for k, comp in enumerate(decomp.components):
        name = f"component_{k + 1}.csv"
        write_matrix_csv(
            os.path.join(out, name), comp, table.columns, time=time_col, time_name=time_name
        )
        outputs.append(name)
        if config.uses_log:
            name = f"component_{k + 1}_exp.csv"
            write_matrix_csv(
                os.path.join(out, name),
                np.exp(comp),
                table.columns,
                time=time_col,
                time_name=time_name,
            )
            outputs.append(name)
        label = _component_label(config, k)
        svg_name = f"component_{k + 1}.svg"
        series = [
            (f"{label}:{col}", comp[:, i]) for i, col in enumerate(table.columns)
        ]
        line_plot(
            series,
            path=os.path.join(out, svg_name),
            title=f"component {k + 1} ({label})",
            xlabel=time_name,
        )
        outputs.append(svg_name)
    # imputation: one row per entry the model filled in
    tt, ii, vals = decomp.imputed_entries()
    completed = decomp.completed(work)
    original_scale = _invert_preprocess(completed.copy(), records)
    rows = [
        (time_col[t], table.columns[i], float(original_scale[t, i]))
        for t, i in zip(tt, ii)
    ]
    write_rows_csv(
        os.path.join(out, "imputed.csv"), [time_name, "channel", "value"], rows
    )
    outputs.append("imputed.csv")
    known = work.known
    total = decomp.total()
    consistency = float(
        np.max(np.abs((work.filled() - np.where(known, total, 0.0))[known]), initial=0.0)
    )
    rep = report.to_json_dict()
    rep["objective"] = float(decomp.objective)
    rep["final_residual"] = float(decomp.residual)
    rep["consistency"] = consistency
    _write_json(os.path.join(out, "report.json"), rep)
    outputs.append("report.json")
    line_plot(
        [("residual", np.asarray(report.residuals))],
        path=os.path.join(out, "residual.svg"),
        title="optimality residual by iteration",
        xlabel="iteration",
        ylabel="log10 residual",
        log_y=True,
    )
    outputs.append("residual.svg")
    return outputs, consistency


def _write_manifest(out, args, command, seeds, t0, outputs, extra=None):
    manifest = {
        "command": command,
        "input": getattr(args, "data", None),
        "config": getattr(args, "config", None),
        "config_sha256": config_hash(args.config) if getattr(args, "config", None) else None,
        "library_version": __version__,
        "seeds": seeds,
        "wall_time_s": time.perf_counter() - t0,
        "outputs": sorted(outputs + ["manifest.json"]),
    }
    if extra:
        manifest.update(extra)
    _write_json(os.path.join(out, "manifest.json"), manifest)


def cmd_decompose(args) -> int:
    t0 = time.perf_counter()
    config = load_config(args.config)
    table = read_csv(args.data)
    os.makedirs(args.out, exist_ok=True)
    work, records = _apply_preprocess(table.signal, config.preprocess)
    solver_cfg = _solver_config(config, args)
    problem = Problem(work, config.build_classes())
    decomp, report = solve(problem, solver_cfg)
    outputs, consistency = _write_fit_outputs(
        args.out, config, table, work, decomp, report, records, args
    )
    _write_manifest(
        args.out,
        args,
        "decompose",
        {"solver": solver_cfg.seed},
        t0,
        outputs,
        extra={"termination": report.termination, "consistency": consistency},
    )
    _say(
        args,
        f"{report.termination} in {report.iterations} iterations, "
        f"objective {decomp.objective:.6g}, outputs in {args.out}",
    )
    return EXIT_OK if report.termination == "converged" else EXIT_SOLVER


def _best_of_component(config) -> int | None:
    """Index of the single finite-valued component, if there is exactly one.

    Test entries of such a component are undetermined by the masked fit,
    so validation scores them against the best candidate value.
    """
    finite = [
        k
        for k, cls in enumerate(config.build_classes())
        if getattr(cls, "values", None) is not None
    ]
    return finite[0] if len(finite) == 1 else None


def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    config = load_config(args.config)
    table = read_csv(args.data)
    os.makedirs(args.out, exist_ok=True)
    work, _ = _apply_preprocess(table.signal, config.preprocess)
    vs = config.validation
    report = cross_validate(
        work,
        functools.partial(make_classes_for, config),
        folds=vs.folds,
        fraction=vs.fraction,
        seeds=vs.seeds,
        solver_config=_solver_config(config, args),
        best_of=_best_of_component(config),
    )
    rows = [(f"fold{i}", float(m)) for i, m in enumerate(report.fold_mses)]
    rows.append(("mean", float(report.mean_mse)))
    write_rows_csv(os.path.join(args.out, "validation.csv"), ["fold", "mse"], rows)
    _write_json(os.path.join(args.out, "validation.json"), report.to_json_dict())
    _write_manifest(
        args.out,
        args,
        "validate",
        {"folds": vs.seeds},
        t0,
        ["validation.csv", "validation.json"],
    )
    _say(args, f"mean test MSE {report.mean_mse:.6g} over {vs.folds} folds")
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    t0 = time.perf_counter()
    config = load_config(args.config)
    table = read_csv(args.data)
    os.makedirs(args.out, exist_ok=True)
    if not config.grid_axes:
        raise ConfigError("config declares no grid axes", path="grid")
    work, records = _apply_preprocess(table.signal, config.preprocess)
    grid = config.param_grid()
    vs = config.validation
    report, decomp, solve_report = grid_search(
        work,
        functools.partial(make_classes_for, config),
        grid,
        folds=vs.folds,
        fraction=vs.fraction,
        seeds=vs.seeds,
        solver_config=_solver_config(config, args),
        best_of=_best_of_component(config),
        jobs=args.jobs,
    )
    names = grid.names
    rows = []
    for row in report.rows:
        cells = [float(row.params[n]) for n in names]
        cells.append(float(row.mean_mse))
        cells.append(row.error or "")
        rows.append(cells)
    write_rows_csv(
        os.path.join(args.out, "grid.csv"), [*names, "mean_mse", "error"], rows
    )
    outputs = ["grid.csv"]
    if len(config.grid_axes) == 2:
        ax0, ax1 = config.grid_axes
        n0, n1 = ax0.count, ax1.count
        mses = np.array([row.mean_mse for row in report.rows]).reshape(n0, n1)
        heat_map(
            mses,
            x_labels=ax1.values(),
            y_labels=ax0.values(),
            path=os.path.join(args.out, "grid.svg"),
            title="validation mean-square test error",
            xlabel=ax1.name,
            ylabel=ax0.name,
        )
        outputs.append("grid.svg")
    _write_json(
        os.path.join(args.out, "argmin.json"),
        {
            "params": report.argmin_params,
            "mean_mse": report.mean_mse,
            "fold_mses": report.fold_mses,
        },
    )
    outputs.append("argmin.json")
    fit_outputs, consistency = _write_fit_outputs(
        args.out, config, table, work, decomp, solve_report, records, args
    )
    outputs.extend(fit_outputs)
    _write_manifest(
        args.out,
        args,
        "gridsearch",
        {"folds": vs.seeds, "solver": _solver_config(config, args).seed},
        t0,
        outputs,
        extra={
            "grid_points": grid.size,
            "argmin": _json_clean(report.argmin_params),
            "termination": solve_report.termination,
            "consistency": consistency,
        },
    )
    _say(
        args,
        f"{grid.size} grid points, argmin {report.argmin_params} "
        f"(mean MSE {report.mean_mse:.6g})",
    )
    return EXIT_OK if solve_report.termination == "converged" else EXIT_SOLVER


def cmd_synth_simple(args) -> int:
    t0 = time.perf_counter()
    os.makedirs(args.out, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    result = synth.simple(seed)
    tcol = tuple(str(i) for i in range(result.signal.T))
    outputs = []
    write_matrix_csv(
        os.path.join(args.out, "data.csv"),
        result.signal.values,
        ("y",),
        time=tcol,
        time_name="t",
    )
    outputs.append("data.csv")
    for name in ("noise", "smooth", "square"):
        fname = f"truth_{name}.csv"
        write_matrix_csv(
            os.path.join(args.out, fname),
            result.truth[name],
            ("y",),
            time=tcol,
            time_name="t",
        )
        outputs.append(fname)
    _write_json(
        os.path.join(args.out, "truth.json"),
        {"seed": seed, "theta2": result.truth["theta2"]},
    )
    outputs.append("truth.json")
    _write_manifest(args.out, args, "synth-simple", {"synth": seed}, t0, outputs)
    _say(args, f"wrote synthetic series (seed {seed}) to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sigdecomp",
        description="Decompose vector time series into interpretable components.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", required=True, help="input CSV")
            p.add_argument("--config", required=True, help="model config JSON")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker processes for grid search")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured solver seed")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    common(sub.add_parser("decompose", help="fit the configured model"))
    common(sub.add_parser("validate", help="cross-validate by planted missing entries"))
    common(sub.add_parser("gridsearch", help="sweep declared parameter axes"))
    common(sub.add_parser("synth-simple", help="write the synthetic example"), data=False)
    return parser


_COMMANDS = {
    "decompose": cmd_decompose,
    "validate": cmd_validate,
    "gridsearch": cmd_gridsearch,
    "synth-simple": cmd_synth_simple,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, DataError, DegenerateScaleError, DegenerateProblemError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConvergenceError, DivergenceError) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SigDecompError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def console_main():
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())

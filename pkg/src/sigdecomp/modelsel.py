"""Model selection by planted missing entries.

A fraction of the known entries is hidden, the decomposition is solved
on the remainder, and the hidden entries are scored against their
imputations.  Averaging over several folds gives a mean-square test
error per parameter setting; ``grid_search`` sweeps a cross product of
parameter values and refits at the argmin on all known data.

Classes with a finite set of allowed values make the decomposition
non-unique at held-out entries, so those are scored best-of: each test
entry may swap the finite-class value for whichever allowed value fits
the data best.
"""

from __future__ import annotations

import itertools
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DataError, SigDecompError
from .signal import Signal
from .solver import Problem, SolverConfig, solve


@dataclass(frozen=True)
class TestFold:
    """One planted test set: row/channel indices into the signal."""

    index: int
    rows: np.ndarray
    cols: np.ndarray
    seed: int | None

    @property
    def size(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class ParamGrid:
    """Named axes of parameter values, enumerated as a cross product.

    Axis order is enumeration order: the first axis varies slowest.
    """

    axes: tuple

    def __post_init__(self):
        axes = tuple((str(name), np.asarray(vals, dtype=float)) for name, vals in self.axes)
        if not axes:
            raise ConfigError("grid needs at least one axis")
        for name, vals in axes:
            if vals.ndim != 1 or vals.size == 0:
                raise ConfigError(f"grid axis {name!r} must be a nonempty 1-D list")
        object.__setattr__(self, "axes", axes)

    @property
    def names(self):
        return [name for name, _ in self.axes]

    @property
    def size(self) -> int:
        n = 1
        for _, vals in self.axes:
            n *= len(vals)
        return n

    def points(self):
        names = self.names
        for combo in itertools.product(*(vals for _, vals in self.axes)):
            yield dict(zip(names, (float(c) for c in combo)))

    @staticmethod
    def linear(name: str, lo: float, hi: float, count: int) -> tuple:
        return (name, np.linspace(lo, hi, count))

    @staticmethod
    def logarithmic(name: str, lo: float, hi: float, count: int) -> tuple:
        if not (lo > 0 and hi > 0):
            raise ConfigError(f"grid axis {name!r}: log spacing needs positive endpoints")
        return (name, np.logspace(np.log10(lo), np.log10(hi), count))


@dataclass
class GridRow:
    params: dict
    fold_mses: list
    mean_mse: float
    error: str | None = None


@dataclass
class ValidationReport:
    fold_mses: list = field(default_factory=list)
    mean_mse: float = np.inf
    rows: list = field(default_factory=list)
    argmin_params: dict | None = None
    fraction: float | None = None
    folds: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "fraction": self.fraction,
            "folds": self.folds,
            "fold_mses": [float(m) for m in self.fold_mses],
            "mean_mse": float(self.mean_mse),
            "rows": [
                {
                    "params": {k: float(v) for k, v in row.params.items()},
                    "fold_mses": [float(m) for m in row.fold_mses],
                    "mean_mse": float(row.mean_mse),
                    "error": row.error,
                }
                for row in self.rows
            ],
            "argmin_params": (
                None
                if self.argmin_params is None
                else {k: float(v) for k, v in self.argmin_params.items()}
            ),
        }


def plant_test_mask(signal: Signal, fraction: float, seed: int | None, index: int = 0):
    """Hide a random subset of the known entries; returns (copy, TestFold).

    The subset is drawn by a seeded shuffle of the row-major known-index
    list; its size is round(fraction * q).
    """
    if not 0 < fraction < 1:
        raise DataError(f"test fraction must be in (0, 1), got {fraction}")
    tt, ii = signal.known_indices()
    q = len(tt)
    n = int(round(fraction * q))
    if n < 1:
        raise DataError(f"test fraction {fraction} selects no entries (q={q})")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(q)[:n]
    rows, cols = tt[perm], ii[perm]
    values = signal.values.copy()
    known = signal.known.copy()
    values[rows, cols] = np.nan
    known[rows, cols] = False
    fold = TestFold(index=index, rows=rows, cols=cols, seed=seed)
    return Signal(values, known), fold


def test_mse(original: Signal, decomposition, fold: TestFold, best_of=None) -> float:
    """Mean-square error of the imputation over the fold, scaled by 1/(|T| p).

    ``best_of`` optionally names a finite-valued component as
    ``(component_index, allowed_values)``; each test entry then scores
    against the best swap of that component's value.
    """
    if fold.size == 0:
        raise DataError("empty test fold")
    p = original.p
    total = decomposition.total()
    truth = original.values[fold.rows, fold.cols]
    if np.any(~original.known[fold.rows, fold.cols]):
        raise DataError("test fold touches entries missing from the original signal")
    est = total[fold.rows, fold.cols]
    if best_of is None:
        err = truth - est
        return float(np.sum(err * err) / (fold.size * p))
    k, values = best_of
    values = np.asarray(values, dtype=float).ravel()
    base = est - decomposition.components[k][fold.rows, fold.cols]
    # each test entry picks the candidate value that fits best
    err2 = np.min((truth[:, None] - (base[:, None] + values[None, :])) ** 2, axis=1)
    return float(np.sum(err2) / (fold.size * p))


def _resolve_best_of(best_of, classes):
    """Allow a bare component index; candidate values come from the class."""
    if best_of is None or not np.isscalar(best_of):
        return best_of
    k = int(best_of)
    cls = classes[k]
    values = getattr(cls, "values", None)
    if values is None:
        raise ConfigError(f"component {k + 1} ({cls.kind}) has no finite value set")
    return (k, values)


def _fold_seeds(folds: int, seeds) -> list:
    if seeds is None:
        return list(range(folds))
    if np.isscalar(seeds):
        return [int(seeds) + i for i in range(folds)]
    seeds = [int(s) for s in seeds]
    if len(seeds) != folds:
        raise ConfigError(f"need {folds} fold seeds, got {len(seeds)}")
    return seeds


def cross_validate(
    signal: Signal,
    make_classes,
    folds: int = 10,
    fraction: float = 0.2,
    seeds=None,
    solver_config: SolverConfig | None = None,
    best_of=None,
    params: dict | None = None,
) -> ValidationReport:
    """Average test MSE over several planted folds.

    ``make_classes(params)`` builds the component-class tuple; a solver
    failure on a fold scores +inf for that fold rather than aborting.
    ``best_of`` may be ``(k, values)`` or a bare component index, in which
    case the candidate values are taken from the class built for the
    current parameters.
    """
    if folds < 1:
        raise ConfigError(f"folds must be >= 1, got {folds}")
    params = params or {}
    seed_list = _fold_seeds(folds, seeds)
    report = ValidationReport(fraction=fraction, folds=folds)
    for i, seed in enumerate(seed_list):
        masked, fold = plant_test_mask(signal, fraction, seed, index=i)
        try:
            classes = make_classes(params)
            problem = Problem(masked, classes)
            decomp, _ = solve(problem, solver_config)
            mse = test_mse(signal, decomp, fold, best_of=_resolve_best_of(best_of, classes))
        except SigDecompError:
            mse = np.inf
        report.fold_mses.append(mse)
    report.mean_mse = float(np.mean(report.fold_mses))
    return report


_WORKER_PAYLOAD = None


def _grid_worker_init(payload):
    global _WORKER_PAYLOAD
    _WORKER_PAYLOAD = payload


def _grid_point_row(point):
    signal, make_classes, folds, fraction, seeds, solver_config, best_of = _WORKER_PAYLOAD
    try:
        sub = cross_validate(
            signal,
            make_classes,
            folds=folds,
            fraction=fraction,
            seeds=seeds,
            solver_config=solver_config,
            best_of=best_of,
            params=point,
        )
        return GridRow(params=point, fold_mses=sub.fold_mses, mean_mse=sub.mean_mse)
    except SigDecompError as exc:
        return GridRow(params=point, fold_mses=[], mean_mse=np.inf, error=str(exc))


def grid_search(
    signal: Signal,
    make_classes,
    grid: ParamGrid,
    folds: int = 10,
    fraction: float = 0.2,
    seeds=None,
    solver_config: SolverConfig | None = None,
    best_of=None,
    jobs: int = 1,
):
    """Cross-validate every grid point, then refit at the argmin.

    Folds are drawn from the same seeds at every grid point, so points
    differ only in parameters.  Returns (ValidationReport, Decomposition,
    SolveReport) with the final fit on all known data.  Ties go to the
    first point in enumeration order; a point whose every fold fails is
    recorded with +inf and skipped for the argmin unless all are.

    With ``jobs`` > 1, points are scored by a process pool;
    ``make_classes`` must then be picklable (a module-level function or
    ``functools.partial`` of one, not a lambda).
    """
    payload = (signal, make_classes, folds, fraction, seeds, solver_config, best_of)
    points = list(grid.points())
    if jobs > 1 and len(points) > 1:
        methods = multiprocessing.get_all_start_methods()
        ctx = multiprocessing.get_context("fork" if "fork" in methods else "spawn")
        chunk = max(1, len(points) // (4 * jobs))
        with ctx.Pool(jobs, initializer=_grid_worker_init, initargs=(payload,)) as pool:
            rows = pool.map(_grid_point_row, points, chunksize=chunk)
    else:
        _grid_worker_init(payload)
        rows = [_grid_point_row(point) for point in points]
    report = ValidationReport(fraction=fraction, folds=folds)
    best: GridRow | None = None
    for row in rows:
        report.rows.append(row)
        if best is None or row.mean_mse < best.mean_mse:
            best = row
    report.argmin_params = dict(best.params)
    report.mean_mse = best.mean_mse
    report.fold_mses = list(best.fold_mses)
    problem = Problem(signal, make_classes(best.params))
    decomp, solve_report = solve(problem, solver_config)
    return report, decomp, solve_report

"""Solvers for the signal decomposition problem.

Given a signal y with known entries K and classes phi_1..phi_K (phi_1
always the mean-square residual class), the problem is

    minimize    phi_1(x^1) + ... + phi_K(x^K)
    subject to  M y = M x^1 + ... + M x^K,

over the components x^k.  Two algorithms are provided, both built only
on the masked prox interface:

* ``bcd_solve``: round-robin block coordinate descent over k = 2..K
  with x^1 eliminated, prox parameter rho = 2/(Tp).  A descent method;
  any fixed point is optimal when the problem is convex.
* ``admm_solve``: operator splitting with one scaled dual vector u over
  the known entries, prox parameter rho = 2 eta / (Tp); the K prox
  evaluations in an iteration are independent of each other.

``hybrid_solve`` dispatches: BCD for convex problems, else ADMM with
eta = 0.7 to convergence followed by BCD polishing.

Optimality is measured by the residual

    r = sqrt( 1/(K-1) * sum_{k>=2} || M( rho (v^k - x^k) - (2/Tp) x^1 ) ||^2 ),

the RMS disagreement between the per-class surrogate gradients
rho M*M (v^k - x^k) and the residual-class gradient (2/Tp) x^1; at an
optimum of a convex problem all of these coincide.  Iteration stops when
r <= eps_abs + eps_rel * ||(2/Tp) M x^1||_2.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DataError, DivergenceError
from .losses import ComponentClass, ProxRequest, SumSquare
from .signal import Signal, zero_fill


@dataclass(frozen=True)
class Problem:
    """A signal plus the ordered list of component classes."""

    signal: Signal
    classes: tuple

    def __post_init__(self):
        classes = tuple(self.classes)
        if len(classes) < 2:
            raise ConfigError(f"need at least 2 component classes, got {len(classes)}")
        for k, cls in enumerate(classes):
            if not isinstance(cls, ComponentClass):
                raise ConfigError(f"components[{k}] is not a component class")
        first = classes[0]
        if not isinstance(first, SumSquare) or first.lam != 1.0:
            raise ConfigError(
                "components[0] must be the plain mean-square residual class "
                "(sum_square with weight 1)"
            )
        object.__setattr__(self, "classes", classes)

    @property
    def K(self) -> int:
        return len(self.classes)

    @property
    def convex(self) -> bool:
        return all(c.convex for c in self.classes)


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``rho_scale`` is the eta in rho = 2 eta/(Tp); None means 1 for plain
    ADMM and 0.7 for the ADMM phase of a hybrid solve.  BCD always uses
    rho = 2/(Tp).  ``track_updates`` records the objective after every
    single BCD component update (for descent diagnostics).
    """

    algorithm: str = "hybrid"
    rho_scale: float | None = None
    eps_abs: float = 1e-6
    eps_rel: float = 1e-5
    max_iter: int = 1000
    seed: int | None = None
    random_init: bool = False
    track_updates: bool = False

    def __post_init__(self):
        if self.algorithm not in ("bcd", "admm", "hybrid"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.rho_scale is not None and not self.rho_scale > 0:
            raise ConfigError(f"rho_scale must be positive, got {self.rho_scale}")
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise ConfigError("tolerances must be positive")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class Decomposition:
    """A finalized decomposition: components, objective, residual.

    Components always satisfy the consistency constraint on the known
    set, and x^1 is zero on the unknown set, so the imputation of a
    missing entry is just the sum of the components there.
    """

    components: list
    objective: float
    residual: float
    known: np.ndarray

    def total(self) -> np.ndarray:
        out = np.zeros_like(self.components[0])
        for x in self.components:
            out = out + x
        return out

    def imputed_entries(self):
        """(row indices, channel indices, values) over the unknown set."""
        tt, ii = np.nonzero(~self.known)
        total = self.total()
        return tt, ii, total[tt, ii]

    def completed(self, signal: Signal) -> np.ndarray:
        """The signal with unknown entries replaced by imputed values."""
        return np.where(self.known, signal.filled(), self.total())


@dataclass
class SolveReport:
    residuals: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    wall_time: float = 0.0
    termination: str = "max_iter"
    iterations_admm: int = 0
    iterations_bcd: int = 0
    rho_bcd: float | None = None
    rho_admm: float | None = None
    config: SolverConfig | None = None
    dual: np.ndarray | None = None
    surrogate_gradients: list | None = None
    update_objectives: list | None = None
    admm_converged: bool | None = None

    @property
    def iterations(self) -> int:
        return self.iterations_admm + self.iterations_bcd

    def to_json_dict(self) -> dict:
        cfg = None
        if self.config is not None:
            cfg = {
                "algorithm": self.config.algorithm,
                "rho_scale": self.config.rho_scale,
                "eps_abs": self.config.eps_abs,
                "eps_rel": self.config.eps_rel,
                "max_iter": self.config.max_iter,
                "seed": self.config.seed,
                "random_init": self.config.random_init,
            }
        return {
            "residuals": [float(r) for r in self.residuals],
            "objectives": [float(o) for o in self.objectives],
            "wall_time": self.wall_time,
            "termination": self.termination,
            "iterations": {
                "admm": self.iterations_admm,
                "bcd": self.iterations_bcd,
                "total": self.iterations,
            },
            "rho": {"bcd": self.rho_bcd, "admm": self.rho_admm},
            "admm_converged": self.admm_converged,
            "config": cfg,
        }


def objective(problem: Problem, components) -> float:
    """Total loss of a candidate decomposition; +inf on any violation."""
    if len(components) != problem.K:
        raise DataError(f"expected {problem.K} components, got {len(components)}")
    total = 0.0
    for cls, x in zip(problem.classes, components):
        if np.asarray(x).shape != problem.signal.values.shape:
            raise DataError("component shape does not match the signal")
        term = cls.eval_loss(x)
        if not np.isfinite(term):
            return np.inf
        total += term
    return total


def optimality_residual(problem: Problem, components, prox_inputs, rho: float) -> float:
    """The residual r of the decomposition, from the last prox inputs v^k.

    ``components`` is the full list x^1..x^K (x^1 finalized);
    ``prox_inputs`` the v^k for k = 2..K.
    """
    known = problem.signal.known
    T, p = problem.signal.values.shape
    c = 2.0 / (T * p)
    x1 = components[0]
    acc = 0.0
    for v, x in zip(prox_inputs, components[1:]):
        g = rho * (v - x) - c * x1
        acc += float(np.sum(g[known] ** 2))
    return float(np.sqrt(acc / len(prox_inputs)))


def stopping_check(r: float, x1: np.ndarray, known: np.ndarray, eps_abs: float, eps_rel: float) -> bool:
    """True when r <= eps_abs + eps_rel * ||(2/Tp) M x^1||_2 (inclusive)."""
    T, p = x1.shape
    scale = float(np.linalg.norm((2.0 / (T * p)) * x1[known]))
    return r <= eps_abs + eps_rel * scale


def _init_components(problem: Problem, config: SolverConfig, init):
    T, p = problem.signal.values.shape
    K = problem.K
    if init is not None:
        if len(init) != K:
            raise DataError(f"init must have {K} components")
        return [np.array(x, dtype=float, copy=True) for x in init]
    comps = [np.zeros((T, p)) for _ in range(K)]
    if config.random_init:
        rng = np.random.default_rng(config.seed)
        vals = problem.signal.values[problem.signal.known]
        scale = 0.01 * (float(vals.std()) if vals.size else 1.0)
        for k in range(1, K):
            comps[k] = rng.uniform(-scale, scale, size=(T, p))
    return comps


def bcd_solve(problem: Problem, config: SolverConfig | None = None, init=None):
    """Block coordinate descent; returns (Decomposition, SolveReport)."""
    config = config or SolverConfig(algorithm="bcd")
    signal = problem.signal
    known = signal.known
    y0 = signal.filled()
    T, p = y0.shape
    K = problem.K
    rho = 2.0 / (T * p)
    comps = _init_components(problem, config, init)
    running = np.zeros((T, p))
    for k in range(1, K):
        running += comps[k]

    report = SolveReport(config=config, rho_bcd=rho)
    if config.track_updates:
        report.update_objectives = []
    start = time.perf_counter()
    prox_inputs = [None] * (K - 1)
    for it in range(config.max_iter):
        for k in range(1, K):
            v = y0 - (running - comps[k])
            xk = problem.classes[k].masked_prox(ProxRequest(v=v, rho=rho, known=known))
            running += xk - comps[k]
            comps[k] = xk
            prox_inputs[k - 1] = v
            if config.track_updates:
                x1_now = zero_fill(y0 - running, known)
                report.update_objectives.append(objective(problem, [x1_now] + comps[1:]))
        comps[0] = zero_fill(y0 - running, known)
        r = optimality_residual(problem, comps, prox_inputs, rho)
        obj = objective(problem, comps)
        report.residuals.append(r)
        report.objectives.append(obj)
        if not np.isfinite(obj):
            raise DivergenceError(f"nonfinite objective at BCD iteration {it}", iteration=it)
        if stopping_check(r, comps[0], known, config.eps_abs, config.eps_rel):
            report.termination = "converged"
            break
    report.iterations_bcd = len(report.residuals)
    report.wall_time = time.perf_counter() - start
    report.surrogate_gradients = [
        zero_fill(rho * (v - x), known) for v, x in zip(prox_inputs, comps[1:])
    ]
    decomp = Decomposition(
        components=comps,
        objective=report.objectives[-1],
        residual=report.residuals[-1],
        known=known,
    )
    return decomp, report


def admm_solve(problem: Problem, config: SolverConfig | None = None, init=None):
    """Operator-splitting solver; returns (Decomposition, SolveReport)."""
    config = config or SolverConfig(algorithm="admm")
    signal = problem.signal
    known = signal.known
    y0 = signal.filled()
    yk = y0[known]
    T, p = y0.shape
    K = problem.K
    eta = config.rho_scale if config.rho_scale is not None else 1.0
    rho = 2.0 * eta / (T * p)
    comps = _init_components(problem, config, init)
    u = np.zeros(int(known.sum()))

    report = SolveReport(config=config, rho_admm=rho)
    start = time.perf_counter()
    prox_inputs = [None] * K
    for it in range(config.max_iter):
        mu = np.zeros((T, p))
        mu[known] = u
        for k in range(K):
            v = comps[k] - 2.0 * mu
            prox_inputs[k] = v
            comps[k] = problem.classes[k].masked_prox(
                ProxRequest(v=v, rho=rho, known=known)
            )
        acc = np.zeros_like(yk)
        for k in range(K):
            acc += comps[k][known]
        u = u + (acc - yk) / K
        if not np.all(np.isfinite(u)):
            raise DivergenceError(f"nonfinite iterates at ADMM iteration {it}", iteration=it)
        # finalized view for residual/objective: absorb the consistency
        # residual into the mean-square class
        rest = np.zeros((T, p))
        for k in range(1, K):
            rest += comps[k]
        x1_fin = zero_fill(y0 - rest, known)
        finalized = [x1_fin] + comps[1:]
        r = optimality_residual(problem, finalized, prox_inputs[1:], rho)
        obj = objective(problem, finalized)
        report.residuals.append(r)
        report.objectives.append(obj)
        if not np.isfinite(obj):
            raise DivergenceError(f"nonfinite objective at ADMM iteration {it}", iteration=it)
        if stopping_check(r, x1_fin, known, config.eps_abs, config.eps_rel):
            report.termination = "converged"
            break
    report.iterations_admm = len(report.residuals)
    report.wall_time = time.perf_counter() - start
    report.dual = u
    report.surrogate_gradients = [
        zero_fill(rho * (v - x), known) for v, x in zip(prox_inputs, comps)
    ]
    rest = np.zeros((T, p))
    for k in range(1, K):
        rest += comps[k]
    x1_fin = zero_fill(y0 - rest, known)
    finalized = [x1_fin] + comps[1:]
    decomp = Decomposition(
        components=finalized,
        objective=report.objectives[-1],
        residual=report.residuals[-1],
        known=known,
    )
    return decomp, report


def hybrid_solve(problem: Problem, config: SolverConfig | None = None):
    """BCD for convex problems; ADMM (eta = 0.7) then BCD polishing otherwise."""
    config = config or SolverConfig()
    if problem.convex:
        decomp, report = bcd_solve(problem, config)
        report.admm_converged = None
        return decomp, report
    eta = config.rho_scale if config.rho_scale is not None else 0.7
    admm_cfg = SolverConfig(
        algorithm="admm",
        rho_scale=eta,
        eps_abs=config.eps_abs,
        eps_rel=config.eps_rel,
        max_iter=config.max_iter,
        seed=config.seed,
        random_init=config.random_init,
    )
    admm_dec, admm_rep = admm_solve(problem, admm_cfg)
    bcd_cfg = SolverConfig(
        algorithm="bcd",
        eps_abs=config.eps_abs,
        eps_rel=config.eps_rel,
        max_iter=config.max_iter,
        track_updates=config.track_updates,
    )
    decomp, bcd_rep = bcd_solve(problem, bcd_cfg, init=admm_dec.components)
    report = SolveReport(
        residuals=admm_rep.residuals + bcd_rep.residuals,
        objectives=admm_rep.objectives + bcd_rep.objectives,
        wall_time=admm_rep.wall_time + bcd_rep.wall_time,
        termination=bcd_rep.termination,
        iterations_admm=admm_rep.iterations_admm,
        iterations_bcd=bcd_rep.iterations_bcd,
        rho_bcd=bcd_rep.rho_bcd,
        rho_admm=admm_rep.rho_admm,
        config=config,
        dual=admm_rep.dual,
        surrogate_gradients=bcd_rep.surrogate_gradients,
        update_objectives=bcd_rep.update_objectives,
        admm_converged=admm_rep.termination == "converged",
    )
    return decomp, report


def solve(problem: Problem, config: SolverConfig | None = None):
    """Dispatch on config.algorithm."""
    config = config or SolverConfig()
    if config.algorithm == "bcd":
        return bcd_solve(problem, config)
    if config.algorithm == "admm":
        return admm_solve(problem, config)
    return hybrid_solve(problem, config)

"""Shared test helpers: seeded instance builders and prox certification.

The certification routines here drive every class prox against an
independent reference (dense KKT system, projected subgradient descent,
or exhaustive enumeration) on batches of seeded random instances.  Unit
tests run small batches per class; the acceptance module reruns the full
batches under a time budget.
"""

import zlib

import numpy as np

from sigdecomp.losses import (
    AverageAbs,
    Basis,
    Blockwise,
    Boolean,
    Cardinality,
    CloseEntries,
    CommonTerm,
    FiniteSet,
    Huber,
    IndexOffset,
    Interval,
    L1SecondDiff,
    LogHuber,
    Markov,
    Monotone,
    NonNeg,
    Periodic,
    PeriodicSmooth,
    Quantile,
    QuasiPeriodic,
    RSparse,
    SingleJump,
    SliceSoftBasis,
    Smooth,
    SmoothPeriodicClose,
    SoftBasis,
    SumL2,
    SumSquare,
)
from sigdecomp.oracles import (
    OracleInstance,
    dense_kkt_prox,
    enumeration_prox_oracle,
    scalar_scan_prox,
    subgradient_prox_batch,
)


def stable_seed(name: str, extra: int = 0) -> int:
    """Deterministic seed from a label; unlike hash(), stable across runs."""
    return (zlib.crc32(name.encode()) + 1000003 * extra) % 2**32


def make_instance(cls, T, p, seed, miss=0.3, weights=False, rho=None, min_known=1):
    """Random instance with at least ``min_known`` known entries per channel.

    Classes whose loss has a nullspace (affine per channel for the smooth
    ones, a span for the basis ones) need enough observations per channel
    to pin it down, otherwise the prox system is genuinely singular.
    """
    r = np.random.default_rng(seed)
    v = r.normal(size=(T, p))
    known = r.random((T, p)) > miss
    for c in range(p):
        short = min_known - int(known[:, c].sum())
        if short > 0:
            known[r.choice(np.flatnonzero(~known[:, c]), short, replace=False), c] = True
    w = r.uniform(0.2, 2.0, size=(T, p)) if weights else None
    return OracleInstance(cls, v, rho if rho else float(r.uniform(0.5, 3.0)), known, w)


def periodic_instance(cls, T, p, P, seed, weights=True):
    """Instance where every (phase, channel) pair has an observation.

    The periodic classes fold entries by phase; a fully unobserved phase
    would leave that profile entry undetermined in some of them.
    """
    r = np.random.default_rng(seed)
    v = r.normal(size=(T, p))
    known = r.random((T, p)) > 0.3
    for c in range(p):
        for ph in range(P):
            idx = np.arange(ph, T, P)
            if not known[idx, c].any():
                known[r.choice(idx), c] = True
    w = r.uniform(0.2, 2.0, size=(T, p)) if weights else None
    return OracleInstance(cls, v, float(r.uniform(0.5, 3.0)), known, w)


def production_prox(inst):
    return inst.cls.mprox(inst.v, inst.rho, inst.known, inst.weights)


def prox_objective(inst, x):
    w = inst.eff_weights()
    v = inst.zeroed_v()
    return inst.cls.eval_loss(x) + 0.5 * inst.rho * float(np.sum(w * (x - v) ** 2))


# -- class catalogs, one factory per table entry ---------------------------
#
# Factories take a seed so classes with random data (bases, Markov costs)
# vary across instances.  Sizes respect the oracle caps.

def _basis_theta(seed, T, m):
    return np.random.default_rng(seed).normal(size=(T, m))


KKT_CASES = {
    "sum_square": (lambda s: SumSquare(lam=2.0), 8, 3, None),
    "smooth1": (lambda s: Smooth(order=1, lam=3.0), 9, 2, None),
    "smooth2": (lambda s: Smooth(order=2, lam=5.0), 10, 2, None),
    "quasi_periodic": (lambda s: QuasiPeriodic(lam=1.5, period=4), 11, 2, 4),
    "close_entries": (lambda s: CloseEntries(lam=2.5), 7, 3, None),
    "soft_basis": (lambda s: SoftBasis(lam=2.0, theta=_basis_theta(s, 8, 2)), 8, 2, None),
    "slice_soft_basis": (
        lambda s: SliceSoftBasis(lam=1.2, slice_basis=_basis_theta(s, 3, 1)),
        9,
        2,
        None,
    ),
    "basis": (lambda s: Basis(theta=_basis_theta(s, 8, 2)), 8, 2, None),
    "index_offset": (lambda s: IndexOffset(), 6, 3, None),
    "blockwise_mean": (lambda s: Blockwise(penalty="none", block_len=3), 9, 2, None),
    "common_smooth2": (lambda s: CommonTerm(Smooth(order=2, lam=4.0)), 8, 3, None),
    "periodic": (lambda s: Periodic(period=3), 10, 2, 3),
    "periodic_smooth": (lambda s: PeriodicSmooth(lam=2.0, period=4), 11, 2, 4),
    "periodic_smooth_zero_sum": (
        lambda s: PeriodicSmooth(lam=2.0, period=4, zero_sum=True),
        11,
        2,
        4,
    ),
    "smooth_periodic_close": (
        lambda s: SmoothPeriodicClose(lam_smooth=3.0, lam_close=1.0, period=4),
        12,
        3,
        4,
    ),
    "smooth_periodic_close_boundary": (
        lambda s: SmoothPeriodicClose(
            lam_smooth=3.0, lam_close=1.0, period=4, boundary_smooth=False
        ),
        12,
        3,
        4,
    ),
}

SUBGRAD_CASES = {
    "abs": (lambda s: AverageAbs(lam=2.0), 8, 2),
    "quantile": (lambda s: Quantile(lam=2.0, tau=0.7), 8, 2),
    "huber": (lambda s: Huber(lam=2.0, M=0.6), 8, 2),
    "sum_l2": (lambda s: SumL2(lam=1.0), 8, 3),
    "l1_second_diff": (lambda s: L1SecondDiff(lam=1.5), 9, 2),
    "l1_second_diff_fv0": (lambda s: L1SecondDiff(lam=1.5, first_value_zero=True), 9, 2),
    "blockwise_l1": (lambda s: Blockwise(penalty="l1", block_len=3, lam=0.4), 9, 2),
    "nonneg": (lambda s: NonNeg(), 8, 2),
    "interval": (lambda s: Interval(lo=-0.5, hi=0.5), 8, 2),
    "monotone": (lambda s: Monotone(), 8, 2),
    "monotone_smooth": (lambda s: Monotone(extra_smooth=3.0), 8, 2),
    "common_abs": (lambda s: CommonTerm(AverageAbs(lam=2.0)), 8, 3),
}


def _markov(seed):
    r = np.random.default_rng(seed)
    values = np.column_stack([np.arange(3.0), r.normal(scale=0.5, size=3)])
    C = r.uniform(0.1, 0.6, size=(3, 3))
    np.fill_diagonal(C, 0.0)
    return Markov(values=values, C=C, c=r.uniform(0.0, 0.3, size=3))


ENUM_CASES = {
    "finite_set": (lambda s: FiniteSet(values=[-1.0, 0.0, 0.8, 2.0]), 8, 2),
    "boolean": (lambda s: Boolean(amplitude=0.9), 8, 2),
    "card": (lambda s: Cardinality(lam=0.3), 8, 2),
    "r_sparse": (lambda s: RSparse(r=3), 4, 2),
    "markov": (_markov, 6, 2),
    "single_jump": (lambda s: SingleJump(lam=0.2), 9, 2),
    "single_jump_negative": (lambda s: SingleJump(lam=0.2, sign="negative"), 9, 2),
}

SCAN_CASES = {
    "log_huber": (lambda s: LogHuber(lam=2.0, M=0.5), 8, 2),
}


def _kkt_instance(name, i):
    factory, T, p, P = KKT_CASES[name]
    seed = stable_seed(name, i)
    cls = factory(seed)
    if P is None:
        return make_instance(cls, T, p, seed, weights=True, min_known=3)
    return periodic_instance(cls, T, p, P, seed)


def certify_kkt(name, n):
    """Max abs deviation of the production prox from the dense KKT solve."""
    worst = 0.0
    for i in range(n):
        inst = _kkt_instance(name, i)
        worst = max(worst, float(np.max(np.abs(production_prox(inst) - dense_kkt_prox(inst)))))
    return worst


def certify_subgrad(name, n, iters=12_000):
    """Worst relative objective excess of production over the oracle.

    The subgradient oracle is only accurate to O(1/sqrt(iters)), so the
    check is one sided: the production prox may beat the oracle, but must
    never be meaningfully worse on the prox objective it claims to
    minimize.  Also returns the worst entrywise gap as a diagnostic.
    """
    factory, T, p = SUBGRAD_CASES[name]
    cls = factory(stable_seed(name))
    insts = [make_instance(cls, T, p, stable_seed(name, i), weights=True) for i in range(n)]
    oracle_xs = subgradient_prox_batch(insts, iters=iters)
    worst_gap, worst_err = 0.0, 0.0
    for inst, ox in zip(insts, oracle_xs):
        x = production_prox(inst)
        fo, fp = prox_objective(inst, ox), prox_objective(inst, x)
        worst_gap = max(worst_gap, (fp - fo) / max(1.0, abs(fo)))
        mask = inst.eff_weights() > 0
        worst_err = max(worst_err, float(np.max(np.abs((x - ox)[mask]))))
    return worst_gap, worst_err


def certify_enum(name, n):
    """Number of instances where production and enumeration differ at all."""
    factory, T, p = ENUM_CASES[name]
    bad = 0
    for i in range(n):
        seed = stable_seed(name, i)
        inst = make_instance(factory(seed), T, p, seed, weights=True)
        if not np.array_equal(production_prox(inst), enumeration_prox_oracle(inst)):
            bad += 1
    return bad


def certify_scan(name, n):
    """Max abs deviation from the dense scalar scan on weighted entries."""
    factory, T, p = SCAN_CASES[name]
    worst = 0.0
    for i in range(n):
        seed = stable_seed(name, i)
        inst = make_instance(factory(seed), T, p, seed, weights=True)
        ox, _ = scalar_scan_prox(inst)
        mask = inst.eff_weights() > 0
        worst = max(worst, float(np.max(np.abs((production_prox(inst) - ox)[mask]))))
    return worst


def all_class_instances(seed_base=0):
    """One seeded instance per cataloged class, for identity-style checks."""
    out = []
    for name, (factory, T, p, P) in KKT_CASES.items():
        seed = stable_seed(name, seed_base)
        cls = factory(seed)
        if P is None:
            out.append((name, make_instance(cls, T, p, seed, weights=True)))
        else:
            out.append((name, periodic_instance(cls, T, p, P, seed)))
    for table, has_P in ((SUBGRAD_CASES, False), (ENUM_CASES, False), (SCAN_CASES, False)):
        for name, (factory, T, p) in table.items():
            seed = stable_seed(name, seed_base)
            out.append((name, make_instance(factory(seed), T, p, seed, weights=True)))
    return out

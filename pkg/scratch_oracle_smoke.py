import numpy as np
import sys

sys.path.insert(0, "src")
from sigdecomp.losses import (
    AverageAbs, Basis, Blockwise, Boolean, Cardinality, CloseEntries,
    CommonTerm, FiniteSet, Huber, IndexOffset, Interval, L1SecondDiff,
    LogHuber, Markov, Monotone, NonNeg, Periodic, PeriodicSmooth, Quantile,
    QuasiPeriodic, RSparse, SingleJump, SliceSoftBasis, Smooth,
    SmoothPeriodicClose, SoftBasis, SumL2, SumSquare,
)
from sigdecomp.oracles import (
    OracleInstance, dense_kkt_prox, enumeration_prox_oracle,
    finite_difference_check, scalar_scan_prox, subgradient_prox_batch,
    subgradient_prox_oracle,
)

rng = np.random.default_rng(0)


def make_inst(cls, T, p, rho=None, miss=0.3, weights=False, seed=None):
    r = np.random.default_rng(seed) if seed is not None else rng
    v = r.normal(size=(T, p))
    known = r.random((T, p)) > miss
    # keep at least one known per channel
    for c in range(p):
        if not known[:, c].any():
            known[r.integers(T), c] = True
    w = None
    if weights:
        w = r.uniform(0.2, 2.0, size=(T, p))
    return OracleInstance(cls, v, rho if rho else float(r.uniform(0.5, 3.0)), known, w)


def prod(inst):
    return inst.cls.mprox(inst.v, inst.rho, inst.known, inst.weights)


def check(name, inst, oracle_x, tol):
    x = prod(inst)
    err = np.max(np.abs(x - oracle_x))
    status = "OK " if err <= tol else "FAIL"
    print(f"{status} {name:28s} err={err:.3e}")
    return err <= tol


fails = 0

# --- dense KKT ---
kkt_cases = [
    ("sum_square", SumSquare(lam=2.0), 8, 3),
    ("smooth1", Smooth(order=1, lam=3.0), 9, 2),
    ("smooth2", Smooth(order=2, lam=5.0), 10, 2),
    ("quasi_periodic", QuasiPeriodic(lam=1.5, period=4), 11, 2),
    ("close_entries", CloseEntries(lam=2.5), 7, 3),
    ("soft_basis", SoftBasis(lam=2.0, theta=rng.normal(size=(8, 2))), 8, 2),
    ("slice_soft_basis", SliceSoftBasis(lam=1.2, slice_basis=rng.normal(size=(3, 1))), 9, 2),
    ("index_offset", IndexOffset(), 6, 3),
    ("blockwise_mean", Blockwise(penalty="none", block_len=3), 9, 2),
    ("common_smooth2", CommonTerm(Smooth(order=2, lam=4.0)), 8, 3),
]
for name, cls, T, p in kkt_cases:
    inst = make_inst(cls, T, p, weights=True, seed=hash(name) % 2**32)
    try:
        ox = dense_kkt_prox(inst)
        ok = check("kkt:" + name, inst, ox, 1e-7)
    except Exception as e:
        print(f"ERR  kkt:{name}: {type(e).__name__}: {e}")
        ok = False
    fails += not ok

# periodic family needs every (phase, channel) observed
def periodic_inst(cls, T, p, P, seed):
    r = np.random.default_rng(seed)
    v = r.normal(size=(T, p))
    known = r.random((T, p)) > 0.3
    for c in range(p):
        for ph in range(P):
            idx = np.arange(ph, T, P)
            if not known[idx, c].any():
                known[r.choice(idx), c] = True
    return OracleInstance(cls, v, float(r.uniform(0.5, 3.0)), known, r.uniform(0.2, 2.0, size=(T, p)))

for name, cls, T, p, P in [
    ("periodic", Periodic(period=3), 10, 2, 3),
    ("periodic_smooth", PeriodicSmooth(lam=2.0, period=4), 11, 2, 4),
    ("periodic_smooth_zs", PeriodicSmooth(lam=2.0, period=4, zero_sum=True), 11, 2, 4),
    ("smooth_per_close", SmoothPeriodicClose(lam_smooth=3.0, lam_close=1.0, period=4), 12, 3, 4),
    ("smooth_per_close_b", SmoothPeriodicClose(lam_smooth=3.0, lam_close=1.0, period=4, boundary_smooth=True), 12, 3, 4),
]:
    inst = periodic_inst(cls, T, p, P, hash(name) % 2**32)
    try:
        ox = dense_kkt_prox(inst)
        ok = check("kkt:" + name, inst, ox, 1e-7)
    except Exception as e:
        print(f"ERR  kkt:{name}: {type(e).__name__}: {e}")
        ok = False
    fails += not ok

# basis: span constraint
cls = Basis(theta=rng.normal(size=(8, 2)))
inst = make_inst(cls, 8, 2, weights=True, seed=99)
try:
    ok = check("kkt:basis", inst, dense_kkt_prox(inst), 1e-7)
except Exception as e:
    print(f"ERR  kkt:basis: {type(e).__name__}: {e}")
    ok = False
fails += not ok

# --- subgradient ---
sub_cases = [
    ("abs", AverageAbs(lam=2.0), 8, 2, 1e-4),
    ("quantile", Quantile(lam=2.0, tau=0.7), 8, 2, 1e-4),
    ("huber", Huber(lam=2.0, M=0.6), 8, 2, 1e-4),
    ("sum_l2", SumL2(lam=1.0), 8, 3, 1e-4),
    ("l1_second_diff", L1SecondDiff(lam=1.5), 9, 2, 2e-4),
    ("l1_sd_fv0", L1SecondDiff(lam=1.5, first_value_zero=True), 9, 2, 2e-4),
    ("blockwise_l1", Blockwise(penalty="l1", block_len=3, lam=0.4), 9, 2, 1e-4),
    ("nonneg", NonNeg(), 8, 2, 1e-6),
    ("interval", Interval(lo=-0.5, hi=0.5), 8, 2, 1e-6),
    ("monotone", Monotone(), 8, 2, 1e-5),
    ("monotone_es", Monotone(extra_smooth=3.0), 8, 2, 1e-4),
    ("common_abs", CommonTerm(AverageAbs(lam=2.0)), 8, 3, 1e-4),
    ("sub:smooth2", Smooth(order=2, lam=5.0), 8, 2, 5e-4),
]
def prox_objective(inst, x):
    w = inst.eff_weights()
    v = inst.zeroed_v()
    return inst.cls.eval_loss(x) + 0.5 * inst.rho * float(np.sum(w * (x - v) ** 2))

for name, cls, T, p, tol in sub_cases:
    inst = make_inst(cls, T, p, weights=True, seed=hash(name) % 2**32)
    try:
        ox = subgradient_prox_oracle(inst, iters=100000)
        x = prod(inst)
        w = inst.eff_weights()
        mask = w > 0
        err = np.max(np.abs((x - ox)[mask]))
        fo, fp = prox_objective(inst, ox), prox_objective(inst, x)
        gap = fp - fo  # production should never be meaningfully worse
        scale = max(1.0, abs(fo))
        ok = gap <= 1e-5 * scale and err <= 5e-3
        status = "OK " if ok else "FAIL"
        print(f"{status} sub:{name:24s} err={err:.3e} obj_gap={gap:+.3e}")
    except Exception as e:
        print(f"ERR  sub:{name}: {type(e).__name__}: {e}")
        ok = False
    fails += not ok

# batched check
shared_abs = AverageAbs(lam=2.0)
insts = [make_inst(shared_abs, 8, 2, weights=True, seed=s) for s in range(6)]
outs = subgradient_prox_batch(insts, iters=100000)
gaps, errs = [], []
for inst, ox in zip(insts, outs):
    x = prod(inst)
    mask = inst.eff_weights() > 0
    errs.append(np.max(np.abs((x - ox)[mask])))
    gaps.append(prox_objective(inst, x) - prox_objective(inst, ox))
ok = max(gaps) <= 1e-5 and max(errs) <= 5e-3
print(f"{'OK ' if ok else 'FAIL'} sub:batch_abs            err={max(errs):.3e} obj_gap={max(gaps):+.3e}")
fails += not ok

# spec scalar examples for the subgradient oracle
sc1 = OracleInstance(AverageAbs(lam=1.0), np.array([[3.0]]), 1.0, np.array([[True]]))
x1 = subgradient_prox_oracle(sc1, iters=100000)[0, 0]
ok = abs(x1 - 2.0) <= 1e-4
print(f"{'OK ' if ok else 'FAIL'} sub:scalar_abs           x={x1:.6f} (want 2.0)")
fails += not ok
sc2 = OracleInstance(Quantile(lam=1.0, tau=0.75), np.array([[3.0]]), 1.0, np.array([[True]]))
x2 = subgradient_prox_oracle(sc2, iters=100000)[0, 0]
# threshold up = 2 tau c / rho = 1.5 -> x = 3 - 1.5 = 1.5
prod_x2 = Quantile(lam=1.0, tau=0.75).mprox(np.array([[3.0]]), 1.0)[0, 0]
ok = abs(x2 - prod_x2) <= 1e-4
print(f"{'OK ' if ok else 'FAIL'} sub:scalar_quantile      x={x2:.6f} prod={prod_x2:.6f}")
fails += not ok
ramp = np.linspace(0.0, 2.0, 8).reshape(-1, 1)
sc3 = OracleInstance(L1SecondDiff(lam=1.5), ramp, 2.0, np.ones((8, 1), dtype=bool))
x3 = subgradient_prox_oracle(sc3, iters=100000)
ok = np.max(np.abs(x3 - ramp)) <= 1e-4
print(f"{'OK ' if ok else 'FAIL'} sub:ramp_l1sd            err={np.max(np.abs(x3 - ramp)):.3e}")
fails += not ok

# --- enumeration ---
enum_cases = [
    ("finite_set", FiniteSet(values=[-1.0, 0.0, 0.8, 2.0]), 8, 2),
    ("boolean", Boolean(amplitude=0.9), 8, 2),
    ("card", Cardinality(lam=0.3), 8, 2),
    ("r_sparse", RSparse(r=3), 4, 2),
    ("markov", Markov(values=[[0.0, 0.0], [1.0, -0.5], [2.0, 0.3]],
                      C=0.4 * (1 - np.eye(3)), c=[0.0, 0.1, 0.2]), 6, 2),
    ("single_jump", SingleJump(lam=0.2), 9, 2),
    ("single_jump_neg", SingleJump(lam=0.2, sign="negative"), 9, 2),
]
for name, cls, T, p in enum_cases:
    inst = make_inst(cls, T, p, weights=True, seed=hash(name) % 2**32)
    try:
        ox = enumeration_prox_oracle(inst)
        x = prod(inst)
        exact = np.array_equal(x, ox)
        print(f"{'OK ' if exact else 'FAIL'} enum:{name:23s} exact={exact}")
        ok = exact
    except Exception as e:
        print(f"ERR  enum:{name}: {type(e).__name__}: {e}")
        ok = False
    fails += not ok

# --- scalar scan ---
for name, cls in [("log_huber", LogHuber(lam=2.0, M=0.5)), ("huber", Huber(lam=2.0, M=0.5))]:
    inst = make_inst(cls, 8, 2, weights=True, seed=hash(name) % 2**32)
    try:
        ox, _ = scalar_scan_prox(inst)
        x = prod(inst)
        mask = inst.eff_weights() > 0
        err = np.max(np.abs((x - ox)[mask]))
        status = "OK " if err <= 1e-6 else "FAIL"
        print(f"{status} scan:{name:23s} err={err:.3e}")
        ok = err <= 1e-6
    except Exception as e:
        print(f"ERR  scan:{name}: {type(e).__name__}: {e}")
        ok = False
    fails += not ok

# --- finite differences ---
fd_cases = []
x = rng.normal(size=(8, 2))
fd_cases.append(("sum_square", SumSquare(lam=2.0), x))
fd_cases.append(("smooth2", Smooth(order=2, lam=5.0), x))
fd_cases.append(("close_entries", CloseEntries(lam=2.0), x))
# periodic feasible point
z = rng.normal(size=(4, 2))
xp = np.tile(z, (3, 1))[:11]
fd_cases.append(("smooth_per_close", SmoothPeriodicClose(lam_smooth=3.0, lam_close=1.0, period=4), xp))
fd_cases.append(("quasi_periodic", QuasiPeriodic(lam=1.5, period=4), rng.normal(size=(11, 2))))
zz = rng.normal(size=(4, 1))
zz -= zz.mean()
xps = np.tile(zz, (3, 1))[:11]
fd_cases.append(("periodic_smooth_zs", PeriodicSmooth(lam=2.0, period=4, zero_sum=True), np.hstack([xps, xps])))
xc = np.tile(rng.normal(size=(8, 1)), (1, 3))
fd_cases.append(("common_smooth2", CommonTerm(Smooth(order=2, lam=4.0)), xc))
for name, cls, xx in fd_cases:
    try:
        dev = finite_difference_check(cls, xx)
        status = "OK " if dev <= 1e-6 else "FAIL"
        print(f"{status} fd:{name:25s} dev={dev:.3e}")
        ok = dev <= 1e-6
    except Exception as e:
        print(f"ERR  fd:{name}: {type(e).__name__}: {e}")
        ok = False
    fails += not ok

print(f"\n{fails} failures")
sys.exit(1 if fails else 0)

"""Reference solvers for certifying masked proximal operators.

Everything here recomputes prox problems from the loss definitions by
deliberately naive means: dense KKT systems for the quadratic and
linearly constrained classes, projected subgradient descent for the
nonsmooth convex ones, and exhaustive enumeration for the discrete
ones.  The implementations share no code with the production classes,
only their declared parameter values and tie-breaking conventions, so
agreement certifies the fast paths.  Instances are expected to be tiny
(see ``OracleInstance``); nothing here tries to be fast.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag
from scipy.optimize import minimize_scalar

from .exceptions import DataError

SIZE_CAP_T = 12
SIZE_CAP_P = 3
SIZE_CAP_STATES = 3


@dataclass(frozen=True)
class OracleInstance:
    """One prox problem small enough for exhaustive or dense treatment."""

    cls: object
    v: np.ndarray
    rho: float
    known: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.ndim != 2:
            raise DataError(f"oracle instance: v must be T x p, got shape {v.shape}")
        T, p = v.shape
        if T > SIZE_CAP_T or p > SIZE_CAP_P:
            raise DataError(
                f"oracle instance: size {T} x {p} exceeds caps "
                f"{SIZE_CAP_T} x {SIZE_CAP_P}"
            )
        if self.known.shape != v.shape:
            raise DataError("oracle instance: known pattern shape mismatch")
        if not self.rho > 0:
            raise DataError("oracle instance: rho must be positive")
        object.__setattr__(self, "v", v)

    def eff_weights(self) -> np.ndarray:
        w = self.known.astype(float)
        if self.weights is not None:
            w = w * self.weights
        return w

    def zeroed_v(self) -> np.ndarray:
        w = self.eff_weights()
        return np.where(w > 0, self.v, 0.0)


# -- dense quadratic assembly ---------------------------------------------
#
# Signals are stacked channel-major: z[c T + t] = x[t, c].  A class is
# described by a quadratic form Q (the loss is z' Q z on the feasible
# set) and optional equality constraints A z = 0.


def _second_diff(T: int) -> np.ndarray:
    return np.diff(np.eye(T), 2, axis=0)


def _chan_embed(rows_T: np.ndarray, c: int, T: int, p: int) -> np.ndarray:
    """Embed per-channel constraint rows into full stacked coordinates."""
    out = np.zeros((rows_T.shape[0], T * p))
    out[:, c * T : (c + 1) * T] = rows_T
    return out


def _periodic_rows(T: int, p: int, P: int) -> np.ndarray:
    rows = []
    base = np.zeros((max(T - P, 0), T))
    for t in range(T - P):
        base[t, t + P] = 1.0
        base[t, t] = -1.0
    for c in range(p):
        rows.append(_chan_embed(base, c, T, p))
    return np.vstack(rows) if rows else np.zeros((0, T * p))


def _centering(p: int) -> np.ndarray:
    return np.eye(p) - np.full((p, p), 1.0 / p)


def dense_quadratic_terms(cls, T: int, p: int):
    """(Q, A) for a quadratic or linearly constrained class, or raise.

    Q is the (T p) x (T p) matrix with loss z' Q z; A stacks equality
    constraint rows A z = 0 (empty when the class is unconstrained).
    """
    N = T * p
    kind = cls.kind
    if kind == "sum_square":
        return cls.lam / (T * p) * np.eye(N), np.zeros((0, N))
    if kind in ("smooth1", "smooth2"):
        k = cls.order
        D = np.diff(np.eye(T), k, axis=0)
        Qc = cls.lam / ((T - k) * p) * (D.T @ D)
        return block_diag(*[Qc] * p), np.zeros((0, N))
    if kind == "quasi_periodic":
        P = cls.period
        D = np.zeros((T - P, T))
        for t in range(T - P):
            D[t, t + P] = 1.0
            D[t, t] = -1.0
        Qc = cls.lam * (D.T @ D)
        return block_diag(*[Qc] * p), np.zeros((0, N))
    if kind == "close_entries":
        return cls.lam / p * np.kron(_centering(p), np.eye(T)), np.zeros((0, N))
    if kind == "soft_basis":
        u, s, _ = np.linalg.svd(cls.theta, full_matrices=False)
        q = u[:, s > max(cls.theta.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)]
        perp = np.eye(T) - q @ q.T
        return block_diag(*[cls.lam * perp] * p), np.zeros((0, N))
    if kind == "slice_soft_basis":
        M = cls.memory
        B = cls.slice_basis
        u, s, _ = np.linalg.svd(B, full_matrices=False)
        q = u[:, s > max(B.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)]
        perp = np.eye(M) - q @ q.T
        Qc = np.zeros((T, T))
        for t in range(T - M + 1):
            Qc[t : t + M, t : t + M] += perp
        return block_diag(*[cls.lam * Qc] * p), np.zeros((0, N))
    if kind == "index_offset":
        base = np.diff(np.eye(T), 1, axis=0)
        A = np.vstack([_chan_embed(base, c, T, p) for c in range(p)])
        return np.zeros((N, N)), A
    if kind == "periodic":
        return np.zeros((N, N)), _periodic_rows(T, p, cls.period)
    if kind == "periodic_smooth":
        P = cls.period
        D = np.zeros((P, P))
        for j in range(P):
            D[j, (j + 1) % P] = 1.0
            D[j, j] = -1.0
        Qp = cls.lam / (P * p) * (D.T @ D)
        Qc = np.zeros((T, T))
        Qc[:P, :P] = Qp
        A = _periodic_rows(T, p, P)
        if cls.zero_sum:
            zs = np.zeros((1, T))
            zs[0, :P] = 1.0
            A = np.vstack([A] + [_chan_embed(zs, c, T, p) for c in range(p)])
        return block_diag(*[Qc] * p), A
    if kind == "smooth_periodic_close":
        starts = cls._smooth_rows(T)
        D = np.zeros((starts.size, T))
        for r, t in enumerate(starts):
            D[r, t] = 1.0
            D[r, t + 1] = -2.0
            D[r, t + 2] = 1.0
        Qs = cls.lam_smooth / ((T - 2) * p) * (D.T @ D)
        Q = block_diag(*[Qs] * p) + cls.lam_close / p * np.kron(_centering(p), np.eye(T))
        return Q, _periodic_rows(T, p, cls.period)
    if kind == "basis":
        th = cls.theta
        u, s, _ = np.linalg.svd(th, full_matrices=False)
        q = u[:, s > max(th.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)]
        perp = np.eye(T) - q @ q.T
        A = np.vstack([_chan_embed(perp, c, T, p) for c in range(p)])
        return np.zeros((N, N)), A
    if kind == "blockwise_mean":
        B = cls.block_len
        rows = []
        for c in range(p):
            for t in range(T - 1):
                if t // B == (t + 1) // B:
                    row = np.zeros(T)
                    row[t + 1] = 1.0
                    row[t] = -1.0
                    rows.append(_chan_embed(row[None, :], c, T, p)[0])
        A = np.array(rows) if rows else np.zeros((0, N))
        return np.zeros((N, N)), A
    if kind == "common":
        Qin, Ain = dense_quadratic_terms(cls.inner, T, 1)
        Q = np.zeros((N, N))
        Q[:T, :T] = Qin
        rows = []
        for c in range(1, p):
            for t in range(T):
                row = np.zeros(N)
                row[c * T + t] = 1.0
                row[t] = -1.0
                rows.append(row)
        A = np.array(rows) if rows else np.zeros((0, N))
        if Ain.shape[0]:
            A = np.vstack([A, np.hstack([Ain, np.zeros((Ain.shape[0], N - T))])])
        return Q, A
    raise DataError(f"no dense quadratic form for class kind {kind!r}")


def dense_kkt_prox(instance: OracleInstance) -> np.ndarray:
    """Prox by dense KKT solve; ground truth for the quadratic classes.

    The system stacks stationarity (2Q + rho W) z + A' nu = rho W v with
    the constraints A z = 0 and is solved by least squares, which also
    picks the minimum-norm solution when unweighted coordinates leave
    the optimum underdetermined (matching the production convention of
    sending dead coordinates to zero).
    """
    cls = instance.cls
    T, p = instance.v.shape
    Q, A = dense_quadratic_terms(cls, T, p)
    w = instance.eff_weights()
    v = instance.zeroed_v()
    W = np.diag(instance.rho * w.ravel(order="F"))
    m = A.shape[0]
    kkt = np.block([[2.0 * Q + W, A.T], [A, np.zeros((m, m))]])
    rhs = np.concatenate([W @ v.ravel(order="F"), np.zeros(m)])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    if np.linalg.norm(kkt @ sol - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        raise DataError(f"{cls.kind}: singular KKT system")
    return sol[: T * p].reshape((p, T)).T.copy()


# -- projected subgradient ------------------------------------------------


def _row_norms(x):
    return np.sqrt(np.sum(x * x, axis=-1, keepdims=True))


_ISO_MASKS: dict = {}


def batched_isotonic(v: np.ndarray) -> np.ndarray:
    """Nondecreasing projection of each series along the middle axis.

    Uses the minimax characterization iso[i] = max_{j<=i} min_{k>=i}
    mean(v[j..k]) rather than pool-adjacent-violators, trading O(T^2)
    work for full vectorization over a (B, T, p) stack.
    """
    B, T, p = v.shape
    if T not in _ISO_MASKS:
        j = np.arange(T)[:, None]
        k = np.arange(T)[None, :]
        upper = (k >= j)[None, :, :, None]
        inv_len = np.where(k >= j, 1.0 / np.where(k >= j, k - j + 1, 1), 0.0)
        _ISO_MASKS[T] = (upper, inv_len[None, :, :, None], np.arange(T))
    upper, inv_len, diag = _ISO_MASKS[T]
    cums = np.concatenate([np.zeros((B, 1, p)), np.cumsum(v, axis=1)], axis=1)
    # avg[b, j, k, c] = mean of v[b, j..k, c]; +inf below the diagonal
    avg = np.where(upper, (cums[:, None, 1:, :] - cums[:, :T, None, :]) * inv_len, np.inf)
    inner = np.minimum.accumulate(avg[:, :, ::-1, :], axis=2)[:, :, ::-1, :]
    outer = np.maximum.accumulate(np.where(upper, inner, -np.inf), axis=1)
    return outer[:, diag, diag, :]


def _subgrad_form(cls, T: int, p: int):
    """(value, grad, project, curvature) callbacks for a convex class.

    All callbacks broadcast over a leading batch axis.  ``project`` is
    None for unconstrained classes; ``curvature`` bounds the Lipschitz
    constant of the smooth part of the loss gradient.
    """
    kind = cls.kind
    if kind == "abs":
        c = cls.lam / (T * p)
        return (
            lambda x: c * np.sum(np.abs(x), axis=(-2, -1)),
            lambda x: c * np.sign(x),
            None,
            0.0,
        )
    if kind == "quantile":
        c = cls.lam / (T * p)
        tilt = 2.0 * cls.tau - 1.0
        return (
            lambda x: c * np.sum(np.abs(x) + tilt * x, axis=(-2, -1)),
            lambda x: c * (np.sign(x) + tilt),
            None,
            0.0,
        )
    if kind == "huber":
        c = cls.lam / (T * p)
        M = cls.M
        return (
            lambda x: c
            * np.sum(
                np.where(np.abs(x) <= M, x * x, M * (2.0 * np.abs(x) - M)),
                axis=(-2, -1),
            ),
            lambda x: c * np.clip(2.0 * x, -2.0 * M, 2.0 * M),
            None,
            2.0 * c,
        )
    if kind == "sum_square":
        c = cls.lam / (T * p)
        return (
            lambda x: c * np.sum(x * x, axis=(-2, -1)),
            lambda x: 2.0 * c * x,
            None,
            2.0 * c,
        )
    if kind in ("smooth1", "smooth2"):
        k = cls.order
        c = cls.lam / ((T - k) * p)

        def val(x):
            d = np.diff(x, k, axis=-2)
            return c * np.sum(d * d, axis=(-2, -1))

        D = np.diff(np.eye(T), k, axis=0)
        G = 2.0 * c * (D.T @ D)

        def grad(x):
            return G @ x

        return val, grad, None, 2.0 * c * 4.0**k
    if kind == "close_entries":
        c = cls.lam / p

        def val(x):
            mu = x.mean(axis=-1, keepdims=True)
            return c * np.sum((x - mu) ** 2, axis=(-2, -1))

        def grad(x):
            mu = x.mean(axis=-1, keepdims=True)
            return 2.0 * c * (x - mu)

        return val, grad, None, 2.0 * c
    if kind == "sum_l2":
        lam = cls.lam

        def val(x):
            return lam * np.sum(np.sqrt(np.sum(x * x, axis=-1)), axis=-1)

        def grad(x):
            n = _row_norms(x)
            return lam * np.divide(x, n, out=np.zeros_like(x), where=n > 0)

        return val, grad, None, 0.0
    if kind == "l1_second_diff":
        c = cls.lam / ((T - 2) * p)
        D = np.diff(np.eye(T), 2, axis=0)
        Dt = D.T.copy()

        def val(x):
            d = D @ x
            return c * np.sum(np.abs(d), axis=(-2, -1))

        def grad(x):
            return c * (Dt @ np.sign(D @ x))

        project = None
        if cls.first_value_zero:

            def project(x):
                out = x.copy()
                out[..., 0, :] = 0.0
                return out

        return val, grad, project, 0.0
    if kind == "blockwise_l1":
        lam = cls.lam
        B = cls.block_len
        idx = np.arange(T) // B

        def project(x):
            out = np.empty_like(x)
            for b in range(idx[-1] + 1):
                sel = idx == b
                out[..., sel, :] = x[..., sel, :].mean(axis=-2, keepdims=True)
            return out

        return (
            lambda x: lam * np.sum(np.abs(x), axis=(-2, -1)),
            lambda x: lam * np.sign(x),
            project,
            0.0,
        )
    if kind == "blockwise_mean":
        B = cls.block_len
        idx = np.arange(T) // B

        def project(x):
            out = np.empty_like(x)
            for b in range(idx[-1] + 1):
                sel = idx == b
                out[..., sel, :] = x[..., sel, :].mean(axis=-2, keepdims=True)
            return out

        return (lambda x: np.zeros(x.shape[:-2]), lambda x: np.zeros_like(x), project, 0.0)
    if kind == "nonneg":
        return (
            lambda x: np.zeros(x.shape[:-2]),
            lambda x: np.zeros_like(x),
            lambda x: np.maximum(x, 0.0),
            0.0,
        )
    if kind == "interval":
        lo, hi = cls.lo, cls.hi
        return (
            lambda x: np.zeros(x.shape[:-2]),
            lambda x: np.zeros_like(x),
            lambda x: np.clip(x, lo, hi),
            0.0,
        )
    if kind == "monotone":
        es = cls.extra_smooth
        c = es / ((T - 1) * p) if T > 1 else 0.0
        D = np.diff(np.eye(T), 1, axis=0)
        G = 2.0 * c * (D.T @ D)

        def val(x):
            if c == 0.0:
                return np.zeros(x.shape[:-2])
            d = np.diff(x, axis=-2)
            return c * np.sum(d * d, axis=(-2, -1))

        def grad(x):
            if c == 0.0:
                return np.zeros_like(x)
            return G @ x

        def project(x):
            return batched_isotonic(x.reshape(-1, T, p)).reshape(x.shape)

        return val, grad, project, 8.0 * c
    if kind == "common":
        ival, igrad, iproject, icurv = _subgrad_form(cls.inner, T, 1)

        def project(x):
            mean = x.mean(axis=-1, keepdims=True)
            out = np.broadcast_to(mean, x.shape).copy()
            if iproject is not None:
                out = np.broadcast_to(iproject(out[..., :1]), x.shape).copy()
            return out

        def val(x):
            return ival(x[..., :1])

        def grad(x):
            g = np.zeros_like(x)
            g[..., :1] = igrad(x[..., :1])
            return g

        return val, grad, project, icurv
    raise DataError(f"no subgradient form for class kind {kind!r}")


def subgradient_prox_oracle(instance: OracleInstance, iters: int = 100_000) -> np.ndarray:
    """Prox by projected subgradient descent with tail averaging.

    Reference for the nonsmooth convex classes; the step size decays as
    1/t against the strong convexity rho of the data term, and the
    average of the last half of the iterates is returned.
    """
    return subgradient_prox_batch([instance], iters=iters)[0]


def subgradient_prox_batch(instances, iters: int = 100_000) -> list:
    """Vectorized ``subgradient_prox_oracle`` over same-shape instances."""
    first = instances[0]
    cls = first.cls
    T, p = first.v.shape
    for inst in instances:
        if inst.v.shape != (T, p) or inst.cls is not cls:
            raise DataError("batched instances must share one class and shape")
    val, grad, project, curv = _subgrad_form(cls, T, p)
    B = len(instances)
    v = np.stack([inst.zeroed_v() for inst in instances])
    w = np.stack([inst.eff_weights() for inst in instances])
    rho = np.array([inst.rho for inst in instances]).reshape(B, 1, 1)
    x = np.zeros((B, T, p))
    if project is not None:
        x = project(x)
    mean = np.zeros_like(x)
    tail = iters // 2
    # strong convexity holds on the observed entries only; understating
    # it is safe while overstating stalls the 1/t step decay
    L = float(np.max(rho * np.max(w, axis=(1, 2), keepdims=True))) + curv
    mus = []
    for inst, wi in zip(instances, w):
        pos = wi[wi > 0]
        mus.append(inst.rho * (float(pos.min()) if pos.size else 1.0))
    mu = min(mus)
    count = 0
    for t in range(iters):
        g = grad(x) + rho * w * (x - v)
        step = 1.0 / (L + 0.5 * mu * t)
        x = x - step * g
        if project is not None:
            x = project(x)
        if t >= tail:
            count += 1
            mean += (x - mean) / count
    return [mean[b] for b in range(B)]


# -- exhaustive enumeration -----------------------------------------------


def _enum_finite(values, instance: OracleInstance) -> np.ndarray:
    """Per-entry scan over the allowed values, first minimum kept."""
    v = instance.zeroed_v()
    w = instance.eff_weights()
    rho = instance.rho
    out = np.empty_like(v)
    for t in range(v.shape[0]):
        for i in range(v.shape[1]):
            target = v[t, i] if w[t, i] > 0 else 0.0
            weight = w[t, i] if w[t, i] > 0 else 1.0
            best, best_cost = None, np.inf
            for c in sorted(values):
                cost = 0.5 * rho * weight * (c - target) ** 2
                if cost < best_cost:
                    best, best_cost = c, cost
            out[t, i] = best
    return out


def _enum_card(instance: OracleInstance) -> np.ndarray:
    lam = instance.cls.lam
    v = instance.zeroed_v()
    w = instance.eff_weights()
    rho = instance.rho
    out = np.zeros_like(v)
    for t in range(v.shape[0]):
        for i in range(v.shape[1]):
            zero_cost = 0.5 * rho * w[t, i] * v[t, i] ** 2
            keep_cost = lam if v[t, i] != 0.0 else np.inf
            if keep_cost < zero_cost:
                out[t, i] = v[t, i]
    return out


def _enum_r_sparse(instance: OracleInstance) -> np.ndarray:
    r = instance.cls.r
    v = instance.zeroed_v()
    w = instance.eff_weights()
    rho = instance.rho
    n = v.size
    vf, wf = v.ravel(), w.ravel()
    total = 0.5 * rho * np.sum(wf * vf * vf)
    best_cost, best_set = np.inf, ()
    for size in range(min(r, n) + 1):
        for combo in itertools.combinations(range(n), size):
            kept = 0.5 * rho * sum(wf[e] * vf[e] * vf[e] for e in combo)
            cost = total - kept
            if cost < best_cost:
                best_cost, best_set = cost, combo
    out = np.zeros(n)
    for e in best_set:
        out[e] = vf[e]
    return out.reshape(v.shape)


def _enum_markov(instance: OracleInstance) -> np.ndarray:
    cls = instance.cls
    th, C, c = cls.theta, cls.C, cls.c
    M = th.shape[0]
    v = instance.zeroed_v()
    w = instance.eff_weights()
    rho = instance.rho
    T = v.shape[0]
    if T > 6 or M > SIZE_CAP_STATES:
        raise DataError(f"markov enumeration caps exceeded (T={T}, M={M})")
    node = np.empty((T, M))
    for t in range(T):
        for s in range(M):
            node[t, s] = c[s] + 0.5 * rho * np.sum(w[t] * (v[t] - th[s]) ** 2)
    best_cost, best_key, best_path = np.inf, None, None
    for path in itertools.product(range(M), repeat=T):
        acc = node[0, path[0]]
        for t in range(1, T):
            acc = (acc + C[path[t], path[t - 1]]) + node[t, path[t]]
        key = tuple(reversed(path))
        if acc < best_cost or (acc == best_cost and key < best_key):
            best_cost, best_key, best_path = acc, key, path
    return th[list(best_path)]


def _enum_single_jump(instance: OracleInstance) -> np.ndarray:
    cls = instance.cls
    v = instance.zeroed_v()
    w = instance.eff_weights()
    rho = instance.rho
    T, p = v.shape
    if T > 10:
        raise DataError(f"single-jump enumeration cap exceeded (T={T})")
    out = np.zeros_like(v)
    for i in range(p):
        vc, wc = v[:, i], w[:, i]
        # suffix sums accumulated right to left, one term per step
        sw = np.zeros(T + 1)
        sv = np.zeros(T + 1)
        sq = np.zeros(T + 1)
        for t in range(T - 1, -1, -1):
            sw[t] = sw[t + 1] + wc[t]
            sv[t] = sv[t + 1] + wc[t] * vc[t]
            sq[t] = sq[t + 1] + wc[t] * vc[t] * vc[t]
        no_jump = 0.5 * rho * sq[0]
        best_cost, best_tau, best_a = np.inf, -1, 0.0
        for tau in range(1, T):
            if sw[tau] <= 0.0:
                continue
            a = sv[tau] / sw[tau]
            if cls.sign == "negative" and not a < 0:
                continue
            if cls.sign == "positive" and not a > 0:
                continue
            if cls.sign == "any" and a == 0:
                continue
            cost = cls.lam + 0.5 * rho * (sq[0] - sv[tau] * sv[tau] / sw[tau])
            if cost < best_cost:
                best_cost, best_tau, best_a = cost, tau, a
        if best_tau >= 0 and best_cost < no_jump:
            out[best_tau:, i] = best_a
    return out


def enumeration_prox_oracle(instance: OracleInstance) -> np.ndarray:
    """Exact prox by exhaustive enumeration for the discrete classes.

    Ties are resolved by the same conventions the production code
    declares: smaller value / lower state / earlier position wins.
    """
    kind = instance.cls.kind
    if kind in ("finite_set", "boolean"):
        return _enum_finite(instance.cls.values, instance)
    if kind == "card":
        return _enum_card(instance)
    if kind == "r_sparse":
        return _enum_r_sparse(instance)
    if kind == "markov":
        return _enum_markov(instance)
    if kind == "single_jump":
        return _enum_single_jump(instance)
    raise DataError(f"no enumeration oracle for class kind {kind!r}")


# -- scalar scan ----------------------------------------------------------


def _scalar_loss(cls):
    kind = cls.kind
    if kind == "log_huber":
        M = cls.M

        def f(a):
            aa = abs(a)
            return aa * aa if aa <= M else M * M * (1.0 + 2.0 * np.log(aa / M))

        return f
    if kind == "huber":
        M = cls.M

        def f(a):
            aa = abs(a)
            return aa * aa if aa <= M else M * (2.0 * aa - M)

        return f
    raise DataError(f"no scalar loss for class kind {kind!r}")


def scalar_scan_prox(instance: OracleInstance, grid: int = 4001):
    """Prox for entrywise losses by dense 1-D scan plus local refinement.

    Returns (x, objective); handles nonconvex scalar losses (log-Huber)
    whose prox objective can have two local minima.  The per-entry
    objective is scanned on a symmetric grid and the best bracket is
    polished with a bounded scalar minimizer.
    """
    cls = instance.cls
    T, p = instance.v.shape
    c = cls.lam / (T * p)
    f = _scalar_loss(cls)
    v = instance.zeroed_v()
    w = instance.eff_weights()
    rho = instance.rho
    out = np.zeros_like(v)
    total = 0.0
    for t in range(T):
        for i in range(p):
            if not w[t, i] > 0:
                total += c * f(0.0)
                continue
            rw = rho * w[t, i]
            vv = v[t, i]

            def obj(a):
                return c * f(a) + 0.5 * rw * (a - vv) ** 2

            R = 1.5 * max(abs(vv), cls.M) + 1.0
            gs = np.linspace(-R, R, grid)
            vals = np.array([obj(a) for a in gs])
            j = int(np.argmin(vals))
            lo = gs[max(j - 2, 0)]
            hi = gs[min(j + 2, grid - 1)]
            res = minimize_scalar(obj, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            best = res.x if res.fun <= vals[j] else gs[j]
            out[t, i] = best
            total += obj(best)
    return out, total


# -- gradient checks ------------------------------------------------------


def _tangent_directions(cls, T: int, p: int):
    """A spanning set of feasible perturbation directions for FD checks."""
    kind = cls.kind
    dirs = []
    if kind in ("periodic", "periodic_smooth", "smooth_periodic_close"):
        P = cls.period
        for c in range(p):
            for ph in range(P):
                d = np.zeros((T, p))
                d[ph::P, c] = 1.0
                if kind == "periodic_smooth" and cls.zero_sum:
                    other = (ph + 1) % P
                    d[other::P, c] = -1.0
                dirs.append(d)
        return dirs
    if kind == "common":
        for t in range(T):
            d = np.zeros((T, p))
            d[t, :] = 1.0
            dirs.append(d)
        return dirs
    for t in range(T):
        for c in range(p):
            d = np.zeros((T, p))
            d[t, c] = 1.0
            dirs.append(d)
    return dirs


def finite_difference_check(cls, x: np.ndarray, h: float = 1e-5) -> float:
    """Max deviation between FD directional derivatives of the loss and
    the analytic gradient 2 Q z of the dense quadratic form.

    Directions are restricted to the class's feasible subspace so that
    constrained classes stay evaluable; ``x`` must be feasible.
    """
    x = np.asarray(x, dtype=float)
    T, p = x.shape
    Q, _ = dense_quadratic_terms(cls, T, p)
    g = 2.0 * (Q @ x.ravel(order="F"))
    worst = 0.0
    for d in _tangent_directions(cls, T, p):
        up = cls.eval_loss(x + h * d)
        dn = cls.eval_loss(x - h * d)
        if not (np.isfinite(up) and np.isfinite(dn)):
            raise DataError(f"{cls.kind}: finite-difference step leaves the domain")
        fd = (up - dn) / (2.0 * h)
        an = float(g @ d.ravel(order="F"))
        worst = max(worst, abs(fd - an))
    return worst

"""Losses that separate across entries or across rows.

For these classes the masked prox splits into independent scalar (or
single-row) problems on the positively weighted entries, each solved in
closed form; entries with no data term go to the loss's own minimizer,
which is 0 for penalties and the feasible value nearest 0 for constraint
classes.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from ..exceptions import DataError
from .base import ComponentClass, check_lambda


class SumSquare(ComponentClass):
    """Mean-square loss  lambda/(Tp) ||x||_F^2.

    With lambda = 1 this is the default residual class: component 1 of
    every model, the part of the signal explained as small noise.
    """

    kind = "sum_square"
    convex = True

    def __init__(self, lam: float = 1.0):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)

    def params(self):
        return {"lambda": self.lam}

    def _eval(self, x):
        T, p = x.shape
        return self.lam / (T * p) * np.sum(x * x)

    def _wprox(self, v, rho, w):
        T, p = v.shape
        c = 2.0 * self.lam / (T * p)
        return rho * w * v / (c + rho * w)


class AverageAbs(ComponentClass):
    """Average absolute loss  lambda/(Tp) ||x||_1; prox is a soft threshold."""

    kind = "abs"
    convex = True

    def __init__(self, lam: float = 1.0):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)

    def params(self):
        return {"lambda": self.lam}

    def _eval(self, x):
        T, p = x.shape
        return self.lam / (T * p) * np.sum(np.abs(x))

    def _wprox(self, v, rho, w):
        T, p = v.shape
        c = self.lam / (T * p)
        thr = np.divide(c, rho * w, out=np.zeros_like(w), where=w > 0)
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


class Quantile(ComponentClass):
    """Tilted absolute loss  lambda/(Tp) sum(|x| + (2 tau - 1) x).

    At tau = 1/2 this is the absolute loss; larger tau penalizes positive
    entries more, so the component soaks up the tau-quantile of what it is
    fit to.  The prox is an asymmetric soft threshold with upward step
    2 tau c / rho and downward step 2 (1 - tau) c / rho.
    """

    kind = "quantile"
    convex = True

    def __init__(self, lam: float = 1.0, tau: float = 0.5):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)
        tau = float(tau)
        if not 0.0 < tau < 1.0:
            raise DataError(f"quantile: tau must lie in (0, 1), got {tau}")
        self.tau = tau

    def params(self):
        return {"lambda": self.lam, "tau": self.tau}

    def _eval(self, x):
        T, p = x.shape
        return self.lam / (T * p) * np.sum(np.abs(x) + (2.0 * self.tau - 1.0) * x)

    def _wprox(self, v, rho, w):
        T, p = v.shape
        c = self.lam / (T * p)
        up = np.divide(2.0 * self.tau * c, rho * w, out=np.zeros_like(w), where=w > 0)
        dn = np.divide(2.0 * (1.0 - self.tau) * c, rho * w, out=np.zeros_like(w), where=w > 0)
        return np.maximum(v - up, 0.0) + np.minimum(v + dn, 0.0)


def _huber(a, m):
    absa = np.abs(a)
    return np.where(absa <= m, a * a, m * (2.0 * absa - m))


def _log_huber(a, m):
    absa = np.abs(a)
    out = np.where(absa <= m, a * a, m * m * (1.0 + 2.0 * np.log(np.maximum(absa, m) / m)))
    return out


class Huber(ComponentClass):
    """Huber loss  lambda/(Tp) sum H(x), quadratic near 0 and linear past M."""

    kind = "huber"
    convex = True

    def __init__(self, lam: float = 1.0, M: float = 1.0):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)
        self.M = float(M)
        if not self.M > 0:
            raise DataError(f"huber: threshold M must be positive, got {M}")

    def params(self):
        return {"lambda": self.lam, "M": self.M}

    def _eval(self, x):
        T, p = x.shape
        return self.lam / (T * p) * np.sum(_huber(x, self.M))

    def _wprox(self, v, rho, w):
        T, p = v.shape
        c = self.lam / (T * p)
        rw = rho * w
        pos = w > 0
        # quadratic branch applies while the shrunk point stays inside [-M, M]
        quad = np.divide(rw * v, 2.0 * c + rw, out=np.zeros_like(v), where=pos)
        shift = np.divide(2.0 * c * self.M, rw, out=np.zeros_like(v), where=pos)
        lin = v - np.sign(v) * shift
        return np.where(np.abs(quad) <= self.M, quad, lin)


class LogHuber(ComponentClass):
    """Log-Huber loss: quadratic near 0, logarithmic past M.  Not convex.

    lambda/(Tp) sum Htilde(x) with Htilde(a) = a^2 for |a| <= M and
    M^2 (1 + 2 log(|a|/M)) beyond.  The scalar prox objective has at most
    two local minima: the clipped quadratic-branch point and the larger
    root of the log-branch stationarity condition

        x^2 - v x + 2 c M^2 / (rho w) = 0.

    Both are evaluated and the lower objective wins.
    """

    kind = "log_huber"
    convex = False

    def __init__(self, lam: float = 1.0, M: float = 1.0):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)
        self.M = float(M)
        if not self.M > 0:
            raise DataError(f"log_huber: threshold M must be positive, got {M}")

    def params(self):
        return {"lambda": self.lam, "M": self.M}

    def _eval(self, x):
        T, p = x.shape
        return self.lam / (T * p) * np.sum(_log_huber(x, self.M))

    def _wprox(self, v, rho, w):
        T, p = v.shape
        c = self.lam / (T * p)
        rw = rho * w
        pos = w > 0
        s = np.sign(v)
        a = np.abs(v)

        def objective(x):
            return c * _log_huber(x, self.M) + 0.5 * rw * (x - a) ** 2

        quad = np.divide(rw * a, 2.0 * c + rw, out=np.zeros_like(v), where=pos)
        cand1 = np.minimum(quad, self.M)
        disc = a * a - np.divide(8.0 * c * self.M**2, rw, out=np.full_like(v, np.inf), where=pos)
        root = 0.5 * (a + np.sqrt(np.maximum(disc, 0.0)))
        cand2_ok = (disc >= 0.0) & (root >= self.M) & pos
        cand2 = np.where(cand2_ok, root, cand1)
        best = np.where(objective(cand2) < objective(cand1), cand2, cand1)
        return np.where(pos, s * best, 0.0)


class SumL2(ComponentClass):
    """Row-norm loss  lambda sum_t ||x_t||_2, promoting entire zero rows."""

    kind = "sum_l2"
    convex = True

    def __init__(self, lam: float = 1.0):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)

    def params(self):
        return {"lambda": self.lam}

    def _eval(self, x):
        return self.lam * np.sum(np.sqrt(np.sum(x * x, axis=1)))

    def _wprox(self, v, rho, w):
        out = np.zeros_like(v)
        for t in range(v.shape[0]):
            out[t] = self._row_prox(v[t], rho, w[t])
        return out

    def _row_prox(self, v, rho, w):
        pos = w > 0
        if not pos.any():
            return np.zeros_like(v)
        rw = rho * w[pos]
        vk = v[pos]
        u = np.zeros_like(v)
        if np.linalg.norm(rw * vk) <= self.lam:
            return u
        wmax, wmin = rw.max(), rw.min()
        if wmax == wmin:
            # uniform weights: plain block soft threshold
            nrm = np.linalg.norm(vk)
            u[pos] = (1.0 - self.lam / (wmax * nrm)) * vk
            return u
        # secular equation in s = ||u||: u_i = rw_i v_i s / (lam + s rw_i).
        # The root of ||u||/s - 1 is bracketed by [0, ||v||]: positive at 0
        # because ||rw v|| > lam, negative at ||v|| because shrinkage is
        # strict.  This form stays finite at s = 0, unlike 1/s variants.
        def excess(s):
            return np.linalg.norm(rw * vk / (self.lam + s * rw)) - 1.0

        hi = np.linalg.norm(vk) * (1.0 + 1e-10) + 1e-12
        s = brentq(excess, 0.0, hi, xtol=1e-15, rtol=8.9e-16)
        u[pos] = rw * vk * (s / (self.lam + s * rw))
        return u


class NonNeg(ComponentClass):
    """Constraint x >= 0 entrywise; the prox clips."""

    kind = "nonneg"
    convex = True

    def _eval(self, x):
        return 0.0 if np.all(x >= 0.0) else np.inf

    def _wprox(self, v, rho, w):
        return np.maximum(np.where(w > 0, v, 0.0), 0.0)


class Interval(ComponentClass):
    """Constraint lo <= x <= hi entrywise."""

    kind = "interval"
    convex = True

    def __init__(self, lo: float = -1.0, hi: float = 1.0):
        super().__init__()
        if not lo <= hi:
            raise DataError(f"interval: need lo <= hi, got [{lo}, {hi}]")
        self.lo, self.hi = float(lo), float(hi)

    def params(self):
        return {"lo": self.lo, "hi": self.hi}

    def _eval(self, x):
        return 0.0 if np.all((x >= self.lo) & (x <= self.hi)) else np.inf

    def _wprox(self, v, rho, w):
        fill = min(max(0.0, self.lo), self.hi)  # feasible value nearest 0
        return np.clip(np.where(w > 0, v, fill), self.lo, self.hi)


class FiniteSet(ComponentClass):
    """Constraint that every entry lies in a given finite set of values.

    The prox rounds each weighted entry to the nearest allowed value,
    preferring the smaller value on ties; unweighted entries take the
    allowed value nearest 0.  Not convex unless the set is a singleton.
    """

    kind = "finite_set"

    def __init__(self, values):
        super().__init__()
        vals = np.unique(np.asarray(values, dtype=float))
        if vals.size == 0:
            raise DataError("finite_set: need at least one value")
        if not np.all(np.isfinite(vals)):
            raise DataError("finite_set: values must be finite")
        self.values = vals
        self.convex = vals.size == 1

    def params(self):
        return {"values": self.values.tolist()}

    def _nearest(self, v):
        vals = self.values
        idx = np.searchsorted(vals, v)
        lo = np.clip(idx - 1, 0, vals.size - 1)
        hi = np.clip(idx, 0, vals.size - 1)
        # on a tie |v - lo| == |v - hi| keep lo, the smaller value
        take_lo = np.abs(v - vals[lo]) <= np.abs(v - vals[hi])
        return np.where(take_lo, vals[lo], vals[hi])

    def _eval(self, x):
        return 0.0 if np.all(self._nearest(x) == x) else np.inf

    def _wprox(self, v, rho, w):
        fill = self._nearest(np.zeros(1))[0]
        return np.where(w > 0, self._nearest(v), fill)


class Boolean(FiniteSet):
    """Entries constrained to {0, amplitude}; the classic on/off component."""

    kind = "boolean"

    def __init__(self, amplitude: float = 1.0):
        super().__init__([0.0, float(amplitude)])
        self.amplitude = float(amplitude)

    def params(self):
        return {"amplitude": self.amplitude}


class Cardinality(ComponentClass):
    """Counting loss  lambda * nnz(x); the prox is a hard threshold.

    An entry survives only if keeping it beats zeroing it, i.e.
    (rho w / 2) v^2 > lambda; the boundary case is set to 0.
    """

    kind = "card"
    convex = False

    def __init__(self, lam: float = 1.0):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)

    def params(self):
        return {"lambda": self.lam}

    def _eval(self, x):
        return self.lam * np.count_nonzero(x)

    def _wprox(self, v, rho, w):
        keep = 0.5 * rho * w * v * v > self.lam
        return np.where(keep, v, 0.0)


class RSparse(ComponentClass):
    """Constraint nnz(x) <= r.  The prox keeps the r entries whose removal
    would cost the most, w v^2, breaking ties toward earlier (row-major)
    positions."""

    kind = "r_sparse"
    convex = False

    def __init__(self, r: int):
        super().__init__()
        self.r = int(r)
        if self.r < 0:
            raise DataError(f"r_sparse: r must be nonnegative, got {r}")

    def params(self):
        return {"r": self.r}

    def _eval(self, x):
        return 0.0 if np.count_nonzero(x) <= self.r else np.inf

    def _wprox(self, v, rho, w):
        score = (w * v * v).ravel()
        order = np.argsort(-score, kind="stable")
        out = np.zeros(v.size)
        keep = order[: self.r]
        keep = keep[score[keep] > 0.0]
        out[keep] = v.ravel()[keep]
        return out.reshape(v.shape)


class IndexOffset(ComponentClass):
    """Constraint that each channel is constant in time: x_t = b for all t.

    The prox sets each channel to its weighted mean; a channel with no
    weight anywhere goes to 0.
    """

    kind = "index_offset"
    convex = True

    def _eval(self, x):
        return 0.0 if np.all(x == x[0]) else np.inf

    def _wprox(self, v, rho, w):
        tot = w.sum(axis=0)
        num = (w * v).sum(axis=0)
        b = np.divide(num, tot, out=np.zeros_like(tot), where=tot > 0)
        return np.broadcast_to(b, v.shape).copy()

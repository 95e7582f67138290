"""Piecewise-structure classes: l1 trend filtering and isotonic fits.

Neither prox has a closed form.  The l1-of-second-differences prox and
the smoothed isotonic prox run a small internal splitting iteration
(alternate a banded linear solve with a soft threshold or a monotone
projection) to a tight inner tolerance; the plain isotonic prox is exact
pool-adjacent-violators.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from ..exceptions import ConvergenceError, DataError, DegenerateProblemError
from .base import ComponentClass, check_lambda
from .quadratic import diff_matrix, sym_to_banded_upper

_INNER_TOL = 1e-9
_INNER_CAP = 10_000


def weighted_pava(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted isotonic regression, nondecreasing, by pool-adjacent-violators.

    Entries with zero weight are unconstrained by data; each takes the
    fitted value of the nearest positively weighted position (earlier one
    on ties), which in particular gives interior entries of a pooled
    block the block's value.  A channel with no weight at all is 0.
    """
    idx = np.nonzero(w > 0)[0]
    if idx.size == 0:
        return np.zeros_like(v)
    vals = v[idx]
    wts = w[idx]
    # blocks of (weighted sum, weight, fitted value), merged on violation
    sums = []
    weights = []
    counts = []
    for a, b in zip(vals, wts):
        cur_s, cur_w, cur_n = a * b, b, 1
        while sums and sums[-1] / weights[-1] > cur_s / cur_w:
            cur_s += sums.pop()
            cur_w += weights.pop()
            cur_n += counts.pop()
        sums.append(cur_s)
        weights.append(cur_w)
        counts.append(cur_n)
    fitted = np.repeat([s / ww for s, ww in zip(sums, weights)], counts)
    out = np.empty_like(v)
    out[idx] = fitted
    holes = np.nonzero(~(w > 0))[0]
    if holes.size:
        pos = np.searchsorted(idx, holes)
        left = np.clip(pos - 1, 0, idx.size - 1)
        right = np.clip(pos, 0, idx.size - 1)
        dl = np.abs(holes - idx[left])
        dr = np.abs(idx[right] - holes)
        nearest = np.where(dl <= dr, left, right)
        out[holes] = fitted[nearest]
    return out


class Monotone(ComponentClass):
    """Nondecreasing signals, per channel; optionally also smooth.

    phi(x) = 0 if every channel is nondecreasing else +inf, plus, when
    ``extra_smooth`` > 0, the first-difference penalty
    extra_smooth / ((T-1) p) * sum ||x_{t+1} - x_t||^2.
    """

    kind = "monotone"
    convex = True

    def __init__(self, extra_smooth: float = 0.0):
        super().__init__()
        self.extra_smooth = float(extra_smooth)
        if self.extra_smooth < 0:
            raise DataError("monotone: extra_smooth must be nonnegative")

    def params(self):
        return {"extra_smooth": self.extra_smooth}

    def _eval(self, x):
        T, p = x.shape
        if not np.all(x[1:] >= x[:-1]):
            return np.inf
        if self.extra_smooth == 0.0 or T < 2:
            return 0.0
        d = np.diff(x, axis=0)
        return self.extra_smooth / ((T - 1) * p) * np.sum(d * d)

    def _wprox(self, v, rho, w):
        T, p = v.shape
        out = np.empty_like(v)
        if self.extra_smooth == 0.0 or T < 2:
            for i in range(p):
                out[:, i] = weighted_pava(v[:, i], w[:, i])
            return out
        c = self.extra_smooth / ((T - 1) * p)
        D = self._cached(("D", T), lambda: diff_matrix(T, 1))
        for i in range(p):
            out[:, i] = self._smooth_isotonic(v[:, i], rho, w[:, i], c, D, i)
        return out

    def _smooth_isotonic(self, v, rho, w, c, D, channel):
        """Split x = z with z monotone: banded solve then PAVA projection."""
        T = v.size
        sigma = max(rho, 2.0 * c)
        x = v.copy()
        z = weighted_pava(x, np.ones(T))
        u = np.zeros(T)
        tol = _INNER_TOL * max(1.0, float(np.max(np.abs(v), initial=0.0)))
        base = 2.0 * c * (D.T @ D)
        rwv = rho * w * v

        def factor(sig):
            band = sym_to_banded_upper(base, 1)
            band[-1] += rho * w + sig
            return cholesky_banded(band, lower=False)

        fac = self._cached((("iso", channel), self._weights_key(rho, w), sigma), lambda: factor(sigma))
        for it in range(_INNER_CAP):
            x = cho_solve_banded((fac, False), rwv + sigma * (z - u))
            z_old = z
            z = weighted_pava(x + u, np.ones(T))
            u = u + x - z
            r_pri = float(np.max(np.abs(x - z), initial=0.0))
            r_dua = float(sigma * np.max(np.abs(z - z_old), initial=0.0))
            if r_pri <= tol and r_dua <= tol:
                return z
            if (it + 1) % 25 == 0:
                if r_pri > 10.0 * r_dua:
                    sigma *= 2.0
                    u = u / 2.0
                elif r_dua > 10.0 * r_pri:
                    sigma /= 2.0
                    u = u * 2.0
                else:
                    continue
                fac = self._cached(
                    (("iso", channel), self._weights_key(rho, w), sigma), lambda: factor(sigma)
                )
        raise ConvergenceError(
            f"monotone: inner iteration cap {_INNER_CAP} reached on channel {channel}",
            residual=max(r_pri, r_dua),
        )


class L1SecondDiff(ComponentClass):
    """l1 penalty on second differences: piecewise-linear trends.

        phi(x) = lambda / ((T-2) p) * sum_t ||x_t - 2 x_{t+1} + x_{t+2}||_1,

    optionally with the constraint x_1 = 0 so the trend reads as a
    cumulative change from the start.  The prox splits z = D2 x and
    alternates a banded solve with a soft threshold.
    """

    kind = "l1_second_diff"
    convex = True

    def __init__(self, lam: float = 1.0, first_value_zero: bool = False):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)
        self.first_value_zero = bool(first_value_zero)

    def params(self):
        return {"lambda": self.lam, "first_value_zero": self.first_value_zero}

    def _eval(self, x):
        T, p = x.shape
        if T < 3:
            raise DataError(f"l1_second_diff: needs T >= 3, got T={T}")
        if self.first_value_zero and not np.all(x[0] == 0.0):
            return np.inf
        d = x[:-2] - 2.0 * x[1:-1] + x[2:]
        return self.lam / ((T - 2) * p) * np.sum(np.abs(d))

    def _wprox(self, v, rho, w):
        T, p = v.shape
        if T < 3:
            raise DataError(f"l1_second_diff: needs T >= 3, got T={T}")
        c = self.lam / ((T - 2) * p)
        D = self._cached(("D", T), lambda: diff_matrix(T, 2))
        out = np.empty_like(v)
        for i in range(p):
            out[:, i] = self._trend_prox(v[:, i], rho, w[:, i], c, D, i)
        return out

    def _trend_prox(self, v, rho, w, c, D, channel):
        T = v.size
        lo = 1 if self.first_value_zero else 0
        Dr = D[:, lo:] if lo else D
        wr = w[lo:]
        vr = v[lo:]
        sigma = max(c, rho * max(float(np.mean(w[w > 0])) if np.any(w > 0) else 1.0, 1e-12))
        x = vr.copy()
        z = Dr @ x
        u = np.zeros(z.size)
        tol = _INNER_TOL * max(1.0, float(np.max(np.abs(v), initial=0.0)))
        rwv = rho * wr * vr
        DtD = (Dr.T @ Dr).tocsc()

        def factor(sig):
            band = sym_to_banded_upper(sig * DtD, 2)
            band[-1] += rho * wr
            try:
                return cholesky_banded(band, lower=False)
            except np.linalg.LinAlgError as exc:
                raise DegenerateProblemError(
                    f"l1_second_diff: singular inner system on channel {channel}"
                ) from exc

        key = lambda sig: (("trend", channel), self._weights_key(rho, w), sig)
        fac = self._cached(key(sigma), lambda: factor(sigma))
        thr = c / sigma
        for it in range(_INNER_CAP):
            x = cho_solve_banded((fac, False), rwv + sigma * (Dr.T @ (z - u)))
            Dx = Dr @ x
            z_old = z
            step = Dx + u
            z = np.sign(step) * np.maximum(np.abs(step) - thr, 0.0)
            u = u + Dx - z
            r_pri = float(np.max(np.abs(Dx - z), initial=0.0))
            r_dua = float(sigma * np.max(np.abs(Dr.T @ (z - z_old)), initial=0.0))
            if r_pri <= tol and r_dua <= tol:
                break
            if (it + 1) % 25 == 0 and it + 1 < _INNER_CAP:
                if r_pri > 10.0 * r_dua:
                    sigma *= 2.0
                    u = u / 2.0
                elif r_dua > 10.0 * r_pri:
                    sigma /= 2.0
                    u = u * 2.0
                else:
                    continue
                fac = self._cached(key(sigma), lambda: factor(sigma))
                thr = c / sigma
        else:
            raise ConvergenceError(
                f"l1_second_diff: inner iteration cap {_INNER_CAP} reached "
                f"on channel {channel}",
                residual=max(r_pri, r_dua),
            )
        if lo:
            return np.concatenate([[0.0], x])
        return x

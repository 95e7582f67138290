"""Periodic classes: exact P-periodicity, with optional shaping losses.

A P-periodic signal is determined by its period profile z in R^(P x p).
The weighted prox therefore folds the data onto one period,

    n_j,i  = sum of the weights of entries with phase j in channel i,
    vbar_j,i = weighted mean of those entries,

solves a P-sized weighted problem, and tiles the answer back out to
length T.  Fold counts handle T not being a multiple of P: early phases
simply appear once more than late ones.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from ..exceptions import AmbiguousPhaseError, DataError, DegenerateProblemError
from .base import ComponentClass, check_lambda


def fold_period(v: np.ndarray, w: np.ndarray, period: int):
    """Weighted per-phase sums: returns (vbar, n) with shapes (P, p).

    ``vbar`` is the weighted phase average (0 where the phase has no
    weight) and ``n`` the per-phase weight totals.
    """
    T, p = v.shape
    ph = np.arange(T) % period
    n = np.zeros((period, p))
    s = np.zeros((period, p))
    np.add.at(n, ph, w)
    np.add.at(s, ph, w * v)
    vbar = np.divide(s, n, out=np.zeros_like(s), where=n > 0)
    return vbar, n


def tile_period(z: np.ndarray, T: int) -> np.ndarray:
    ph = np.arange(T) % z.shape[0]
    return z[ph]


class Periodic(ComponentClass):
    """Hard periodicity constraint: x_{t+P} = x_t for all t.

    The prox is the per-phase weighted mean.  A phase/channel pair with
    no weighted data is an error: nothing determines its value.
    """

    kind = "periodic"
    convex = True

    def __init__(self, period: int):
        super().__init__()
        self.period = int(period)
        if self.period < 1:
            raise DataError(f"periodic: period must be >= 1, got {period}")

    def params(self):
        return {"period": self.period}

    def _eval(self, x):
        P = self.period
        if x.shape[0] <= P:
            return 0.0
        return 0.0 if np.all(x[P:] == x[:-P]) else np.inf

    def _wprox(self, v, rho, w):
        T, p = v.shape
        vbar, n = fold_period(v, w, self.period)
        if np.any(n == 0):
            j, i = np.argwhere(n == 0)[0]
            raise AmbiguousPhaseError(
                f"periodic: phase {j} of channel {i} has no known data; "
                f"the constraint-only class cannot determine that phase"
            )
        return tile_period(vbar, T)


class PeriodicSmooth(ComponentClass):
    """P-periodic with a circular mean-square smoothness loss on the profile:

        phi(x) = lambda / (P p) * sum_j ||z_{j+1} - z_j||^2   (cyclically),

    where z is the period profile of x; +inf if x is not P-periodic.
    With ``zero_sum`` each channel's profile is also constrained to sum
    to zero, which pins the level so that another component (a trend,
    say) can carry it.
    """

    kind = "periodic_smooth"
    convex = True

    def __init__(self, lam: float = 1.0, period: int = 2, zero_sum: bool = False):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)
        self.period = int(period)
        if self.period < 2:
            raise DataError(f"periodic_smooth: period must be >= 2, got {period}")
        self.zero_sum = bool(zero_sum)

    def params(self):
        return {"lambda": self.lam, "period": self.period, "zero_sum": self.zero_sum}

    def _profile(self, x):
        P = self.period
        if x.shape[0] < P:
            raise DataError(f"periodic_smooth: T={x.shape[0]} shorter than period {P}")
        return x[:P]

    def _eval(self, x):
        P = self.period
        z = self._profile(x)
        if x.shape[0] > P and not np.all(x[P:] == x[:-P]):
            return np.inf
        if self.zero_sum:
            scale = max(1.0, float(np.max(np.abs(z), initial=0.0)))
            if np.any(np.abs(z.sum(axis=0)) > 1e-8 * P * scale):
                return np.inf
        d = np.roll(z, -1, axis=0) - z
        return self.lam / (P * x.shape[1]) * np.sum(d * d)

    def _laplacian(self, P):
        main = 2.0 * np.ones(P)
        off = -np.ones(P - 1)
        L = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
        L[0, -1] -= 1.0
        L[-1, 0] -= 1.0
        return L

    def _wprox(self, v, rho, w):
        T, p = v.shape
        P = self.period
        if T < P:
            raise DataError(f"periodic_smooth: T={T} shorter than period {P}")
        vbar, n = fold_period(v, w, P)
        coeff = 2.0 * self.lam / (P * p)
        L = self._cached(("laplacian", P), lambda: self._laplacian(P))

        def build():
            factors = []
            for i in range(p):
                if not np.any(n[:, i] > 0):
                    factors.append(None)  # dead channel: profile 0
                    continue
                A = coeff * L + rho * np.diag(n[:, i])
                try:
                    factors.append(cho_factor(A))
                except np.linalg.LinAlgError as exc:
                    raise DegenerateProblemError(
                        f"periodic_smooth: singular profile system on channel {i}"
                    ) from exc
            return factors

        factors = self._cached(self._weights_key(rho, w), build)
        z = np.zeros((P, p))
        for i in range(p):
            if factors[i] is None:
                continue
            b = rho * n[:, i] * vbar[:, i]
            zi = cho_solve(factors[i], b)
            if self.zero_sum:
                # one equality constraint, eliminated against the factor:
                # z* = z0 - (1'z0 / 1'A^-1 1) A^-1 1
                a1 = cho_solve(factors[i], np.ones(P))
                zi = zi - (zi.sum() / a1.sum()) * a1
            z[:, i] = zi
        return tile_period(z, T)


class SmoothPeriodicClose(ComponentClass):
    """P-periodic, smooth in time, and with entries close across channels:

        phi(x) = lambda1 * 1/((T-2)p) sum_t ||x_t - 2 x_{t+1} + x_{t+2}||^2
               + lambda2 * 1/p sum_t sum_i (x_ti - mean(x_t))^2,

    subject to x_{t+P} = x_t.  The closeness term couples channels, so
    the prox solves one sparse system over the whole P x p profile.

    With ``boundary_smooth`` false, second differences spanning a period
    boundary are dropped: useful when each period is, say, a day whose
    edges need not join smoothly (sunrise after a night gap).
    """

    kind = "smooth_periodic_close"
    convex = True

    def __init__(
        self,
        lam_smooth: float = 1.0,
        lam_close: float = 1.0,
        period: int = 3,
        boundary_smooth: bool = True,
    ):
        super().__init__()
        self.lam_smooth = check_lambda(lam_smooth, self.kind)
        self.lam_close = check_lambda(lam_close, self.kind)
        self.period = int(period)
        self.boundary_smooth = bool(boundary_smooth)
        if self.period < 2:
            raise DataError(f"smooth_periodic_close: period must be >= 2, got {period}")
        if not self.boundary_smooth and self.period < 3:
            raise DataError(
                "smooth_periodic_close: boundary_smooth=False needs period >= 3"
            )

    def params(self):
        return {
            "lambda1": self.lam_smooth,
            "lambda2": self.lam_close,
            "period": self.period,
            "boundary_smooth": self.boundary_smooth,
        }

    def _smooth_rows(self, T):
        """Start indices t (0-based) of the second-difference triples in use."""
        t = np.arange(T - 2)
        if self.boundary_smooth:
            return t
        return t[(t % self.period) <= self.period - 3]

    def _eval(self, x):
        T, p = x.shape
        P = self.period
        if T < 3 or T < P:
            raise DataError(f"smooth_periodic_close: T={T} too short for period {P}")
        if T > P and not np.all(x[P:] == x[:-P]):
            return np.inf
        rows = self._smooth_rows(T)
        d = x[rows] - 2.0 * x[rows + 1] + x[rows + 2]
        mu = x.mean(axis=1, keepdims=True)
        return self.lam_smooth / ((T - 2) * p) * np.sum(d * d) + self.lam_close / p * np.sum(
            (x - mu) ** 2
        )

    def _assemble(self, T, p, rho, nfold):
        """Sparse system over the stacked profile z (phase-major, channel-minor)."""
        P = self.period
        ph = np.arange(T) % P
        rows = self._smooth_rows(T)
        m = rows.size
        if m > 0:
            r = np.repeat(np.arange(m), 3)
            c = np.stack([ph[rows], ph[rows + 1], ph[rows + 2]], axis=1).ravel()
            d = np.tile([1.0, -2.0, 1.0], m)
            As = sp.coo_matrix((d, (r, c)), shape=(m, P)).tocsc()
            G = (As.T @ As).tocsc()
        else:
            G = sp.csc_matrix((P, P))
        H = sp.kron(2.0 * self.lam_smooth / ((T - 2) * p) * G, sp.eye(p), format="csc")
        mult = np.bincount(ph, minlength=P).astype(float)
        C = np.eye(p) - np.full((p, p), 1.0 / p)
        H = H + sp.kron(
            sp.diags(2.0 * self.lam_close / p * mult), sp.csc_matrix(C), format="csc"
        )
        H = H + sp.diags(rho * nfold.ravel())
        return H.tocsc()

    def _wprox(self, v, rho, w):
        T, p = v.shape
        P = self.period
        if T < 3 or T < P:
            raise DataError(f"smooth_periodic_close: T={T} too short for period {P}")
        vbar, n = fold_period(v, w, P)

        def build():
            H = self._assemble(T, p, rho, n)
            try:
                return sp.linalg.splu(H)
            except RuntimeError as exc:
                raise DegenerateProblemError(
                    "smooth_periodic_close: singular profile system"
                ) from exc

        lu = self._cached(self._weights_key(rho, w), build)
        rhs = (rho * n * vbar).ravel()
        z = lu.solve(rhs).reshape(P, p)
        return tile_period(z, T)

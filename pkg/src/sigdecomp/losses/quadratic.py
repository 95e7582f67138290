"""Convex quadratic classes solved through banded linear systems.

For a loss of the form phi(x) = sum_c x_c' Q x_c (per channel c, with Q
symmetric positive semidefinite and banded), the weighted prox solves

    (2 Q + rho diag(w_c)) x_c = rho w_c * v_c

per channel.  Q is banded for difference-based penalties (bandwidth k for
k-th order smoothness, P for the quasi-periodic lag penalty), so each
solve is a banded Cholesky factorization plus back-substitution.  The
factorization depends only on (rho, weights), which the solvers hold
fixed across iterations, so it is computed once and cached.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_solve_banded, cholesky_banded

from ..exceptions import DataError, DegenerateProblemError
from .base import ComponentClass, check_lambda


def diff_matrix(T: int, order: int) -> sp.csc_matrix:
    """Sparse k-th order forward difference operator, (T-k) x T."""
    D = sp.eye(T, format="csc")
    for _ in range(order):
        n = D.shape[0]
        S = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n))
        D = (S @ D).tocsc()
    return D


def lag_diff_matrix(T: int, P: int) -> sp.csc_matrix:
    """Sparse lag-P difference operator x_{t+P} - x_t, (T-P) x T."""
    n = T - P
    return sp.diags([-np.ones(n), np.ones(n)], [0, P], shape=(n, T)).tocsc()


def sym_to_banded_upper(Q, bandwidth: int) -> np.ndarray:
    """Upper banded storage of a symmetric sparse matrix, for solveh_banded.

    Row ``bandwidth`` of the result is the main diagonal; entry (i, j)
    with i <= j lands at [bandwidth + i - j, j].
    """
    Q = sp.coo_matrix(Q)
    keep = Q.row <= Q.col
    r, c, d = Q.row[keep], Q.col[keep], Q.data[keep]
    if np.any(c - r > bandwidth):
        raise ValueError("matrix entries outside the declared bandwidth")
    ab = np.zeros((bandwidth + 1, Q.shape[0]))
    np.add.at(ab, (bandwidth + r - c, c), d)
    return ab


class BandedQuadratic(ComponentClass):
    """Base for channel-separable quadratic losses with banded structure.

    Subclasses provide ``_penalty_band(T, p)``: the upper banded form of
    2 Q, where phi(x) = sum_c x_c' Q x_c (the factor 2 is the gradient's).
    """

    bandwidth: int = 1

    def _penalty_band(self, T: int, p: int) -> np.ndarray:
        raise NotImplementedError

    def _min_T(self) -> int:
        return 1

    def _check_T(self, T: int):
        if T < self._min_T():
            raise DataError(f"{self.kind}: needs T >= {self._min_T()}, got T={T}")

    def _wprox(self, v, rho, w):
        T, p = v.shape
        self._check_T(T)
        factors = self._cached(self._weights_key(rho, w), lambda: self._factor(T, p, rho, w))
        out = np.empty_like(v)
        for i in range(p):
            out[:, i] = cho_solve_banded((factors[i], False), rho * w[:, i] * v[:, i])
        return out

    def _factor(self, T, p, rho, w):
        band = self._cached(("penalty_band", T, p), lambda: self._penalty_band(T, p))
        factors = []
        for i in range(p):
            abi = band.copy()
            abi[-1] += rho * w[:, i]
            try:
                factors.append(cholesky_banded(abi, lower=False))
            except np.linalg.LinAlgError as exc:
                raise DegenerateProblemError(
                    f"{self.kind}: singular prox system on channel {i} "
                    f"(data pattern leaves the component underdetermined)"
                ) from exc
        return factors


class Smooth(BandedQuadratic):
    """Mean-square smoothness of order k:

        phi(x) = lambda / ((T-k) p) * sum_t ||Delta^k x_t||^2.

    k=1 penalizes first differences, k=2 (the usual choice for trends)
    penalizes curvature, so heavily weighted minimizers head toward
    straight lines.
    """

    kind = "smooth"
    convex = True

    def __init__(self, lam: float = 1.0, order: int = 2):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)
        self.order = int(order)
        if self.order not in (1, 2):
            raise DataError(f"smooth: order must be 1 or 2, got {order}")
        self.kind = f"smooth{self.order}"
        self.bandwidth = self.order

    def params(self):
        return {"lambda": self.lam, "order": self.order}

    def _min_T(self):
        return self.order + 1

    def _eval(self, x):
        T, p = x.shape
        self._check_T(T)
        d = np.diff(x, self.order, axis=0)
        return self.lam / ((T - self.order) * p) * np.sum(d * d)

    def _penalty_band(self, T, p):
        D = diff_matrix(T, self.order)
        coeff = 2.0 * self.lam / ((T - self.order) * p)
        return sym_to_banded_upper(coeff * (D.T @ D), self.order)


class QuasiPeriodic(BandedQuadratic):
    """Soft periodicity:  phi(x) = lambda * sum_{t=1}^{T-P} ||x_{t+P} - x_t||^2.

    Unlike the hard periodic constraint, values a period apart are only
    encouraged to match, which lets a seasonal profile drift over time.
    """

    kind = "quasi_periodic"
    convex = True

    def __init__(self, lam: float = 1.0, period: int = 2):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)
        self.period = int(period)
        if self.period < 1:
            raise DataError(f"quasi_periodic: period must be >= 1, got {period}")
        self.bandwidth = self.period

    def params(self):
        return {"lambda": self.lam, "period": self.period}

    def _min_T(self):
        return self.period + 1

    def _eval(self, x):
        self._check_T(x.shape[0])
        d = x[self.period :] - x[: -self.period]
        return self.lam * np.sum(d * d)

    def _penalty_band(self, T, p):
        D = lag_diff_matrix(T, self.period)
        return sym_to_banded_upper(2.0 * self.lam * (D.T @ D), self.period)


class CloseEntries(ComponentClass):
    """Rows with entries close to their mean:

        phi(x) = lambda / p * sum_t sum_i (x_ti - mean(x_t))^2.

    A soft version of the common-term constraint.  The prox is rowwise:
    the system matrix diag(2 lambda/p + rho w) - (2 lambda/p^2) 11' is a
    diagonal plus rank-one, inverted by the Sherman-Morrison identity.
    """

    kind = "close_entries"
    convex = True

    def __init__(self, lam: float = 1.0):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)

    def params(self):
        return {"lambda": self.lam}

    def _eval(self, x):
        T, p = x.shape
        mu = x.mean(axis=1, keepdims=True)
        return self.lam / p * np.sum((x - mu) ** 2)

    def _wprox(self, v, rho, w):
        T, p = v.shape
        lam = self.lam
        dvec = 2.0 * lam / p + rho * w          # diagonal of the row system
        alpha = 2.0 * lam / (p * p)             # rank-one coefficient
        b = rho * w * v
        dinv_b = b / dvec
        dinv_1 = 1.0 / dvec
        denom = 1.0 - alpha * dinv_1.sum(axis=1)
        # rows with no weight anywhere are singular (any constant row is
        # a minimizer); they go to 0 by convention
        dead = ~(w > 0).any(axis=1)
        denom = np.where(dead, 1.0, denom)
        correction = alpha * dinv_b.sum(axis=1) / denom
        out = dinv_b + correction[:, None] * dinv_1
        out[dead] = 0.0
        return out

"""Basis classes: components that live in (or near) a given span.

The hard version constrains each channel to an exact linear combination
of basis columns, x_c = theta z_c.  The soft version penalizes the
squared distance to the span instead, which tolerates deviations.  The
slice version applies the soft penalty to every length-M window of the
signal, giving a time-invariant class: good for shapes ("archetypes")
learned from example data with ``fit_slice_basis``.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..exceptions import DataError, DegenerateProblemError
from .base import ComponentClass, check_lambda
from .quadratic import BandedQuadratic


def _as_basis(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 1:
        theta = theta.reshape(-1, 1)
    if theta.ndim != 2 or theta.shape[1] < 1:
        raise DataError(f"basis matrix must be T x d with d >= 1, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise DataError("basis matrix must be finite")
    return theta


def _orth(theta: np.ndarray) -> np.ndarray:
    """Orthonormal basis of range(theta) via SVD, dropping null directions."""
    u, s, _ = np.linalg.svd(theta, full_matrices=False)
    tol = max(theta.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return u[:, s > tol]


class Basis(ComponentClass):
    """Hard span constraint: each channel is theta @ z for some z in R^d.

    The prox is a per-channel weighted least-squares fit to the known
    entries; the fitted curve extends over unknown rows too.
    """

    kind = "basis"
    convex = True

    def __init__(self, theta):
        super().__init__()
        self.theta = _as_basis(theta)
        self._orth_basis = _orth(self.theta)

    def params(self):
        return {"d": self.theta.shape[1]}

    def _check_rows(self, T):
        if self.theta.shape[0] != T:
            raise DataError(
                f"basis: matrix has {self.theta.shape[0]} rows but the signal has {T}"
            )

    def _eval(self, x):
        self._check_rows(x.shape[0])
        q = self._orth_basis
        resid = x - q @ (q.T @ x)
        scale = 1.0 + np.max(np.abs(x), initial=0.0)
        return 0.0 if np.max(np.abs(resid), initial=0.0) <= 1e-8 * scale else np.inf

    def _wprox(self, v, rho, w):
        T, p = v.shape
        self._check_rows(T)
        th = self.theta
        d = th.shape[1]
        out = np.empty_like(v)
        for i in range(p):
            wi = w[:, i]
            if np.count_nonzero(wi) < d:
                raise DegenerateProblemError(
                    f"basis: channel {i} has {np.count_nonzero(wi)} known entries, "
                    f"fewer than the basis rank {d}; fit is underdetermined"
                )
            gram = th.T @ (wi[:, None] * th)
            try:
                fac = cho_factor(gram)
            except np.linalg.LinAlgError as exc:
                raise DegenerateProblemError(
                    f"basis: rank-deficient masked Gram matrix on channel {i}"
                ) from exc
            z = cho_solve(fac, th.T @ (wi * v[:, i]))
            out[:, i] = th @ z
        return out


class SoftBasis(ComponentClass):
    """Soft span penalty:  phi(x) = lambda * sum_c min_z ||x_c - theta z||^2.

    Equivalently lambda times the squared distance of each channel to
    range(theta).  For the prox, minimizing jointly over (x, z) and
    eliminating x gives a weighted least-squares problem for z with
    per-entry weights mu = lambda rho w / (2 lambda + rho w); x then
    blends the fit theta z with v entrywise.
    """

    kind = "soft_basis"
    convex = True

    def __init__(self, lam: float, theta):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)
        self.theta = _as_basis(theta)
        self._orth_basis = _orth(self.theta)

    def params(self):
        return {"lambda": self.lam, "d": self.theta.shape[1]}

    def _eval(self, x):
        if self.theta.shape[0] != x.shape[0]:
            raise DataError(
                f"soft_basis: matrix has {self.theta.shape[0]} rows but the signal has "
                f"{x.shape[0]}"
            )
        q = self._orth_basis
        resid = x - q @ (q.T @ x)
        return self.lam * np.sum(resid * resid)

    def _wprox(self, v, rho, w):
        T, p = v.shape
        if self.theta.shape[0] != T:
            raise DataError(
                f"soft_basis: matrix has {self.theta.shape[0]} rows but the signal has {T}"
            )
        th = self.theta
        lam = self.lam
        mu = np.divide(
            lam * rho * w, 2.0 * lam + rho * w, out=np.zeros_like(w), where=w >= 0
        )

        def build():
            factors = []
            for i in range(p):
                gram = th.T @ (mu[:, i][:, None] * th)
                try:
                    factors.append(cho_factor(gram))
                except np.linalg.LinAlgError as exc:
                    raise DegenerateProblemError(
                        f"soft_basis: rank-deficient weighted Gram matrix on channel {i}"
                    ) from exc
            return factors

        factors = self._cached(self._weights_key(rho, w), build)
        out = np.empty_like(v)
        for i in range(p):
            z = cho_solve(factors[i], th.T @ (mu[:, i] * v[:, i]))
            a = th @ z
            out[:, i] = (2.0 * lam * a + rho * w[:, i] * v[:, i]) / (2.0 * lam + rho * w[:, i])
        return out


class SliceSoftBasis(BandedQuadratic):
    """Soft basis penalty on every length-M slice of each channel:

        phi(x) = lambda * sum_c sum_t || P_perp x_c[t : t+M] ||^2,

    where P_perp projects onto the orthogonal complement of the slice
    basis.  Time-invariant: the penalty matrix is a banded correlation
    of P_perp with itself, bandwidth M-1.
    """

    kind = "slice_soft_basis"
    convex = True

    def __init__(self, lam: float, slice_basis):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)
        B = _as_basis(slice_basis)
        self.memory = B.shape[0]
        if B.shape[1] > B.shape[0]:
            raise DataError(
                f"slice_soft_basis: rank {B.shape[1]} exceeds memory {B.shape[0]}"
            )
        self.slice_basis = B
        q = _orth(B)
        self._p_perp = np.eye(self.memory) - q @ q.T
        self.bandwidth = self.memory - 1

    def params(self):
        return {"lambda": self.lam, "memory": self.memory, "rank": self.slice_basis.shape[1]}

    def _min_T(self):
        return self.memory

    def _eval(self, x):
        self._check_T(x.shape[0])
        M = self.memory
        total = 0.0
        for i in range(x.shape[1]):
            slices = np.lib.stride_tricks.sliding_window_view(x[:, i], M)
            proj = slices @ self._p_perp
            total += np.sum(proj * slices)
        return self.lam * total

    def _penalty_band(self, T, p):
        M = self.memory
        n = T - M + 1
        ab = np.zeros((M, T))
        for a in range(M):
            for b in range(a, M):
                off = b - a
                ab[M - 1 - off, b : b + n] += 2.0 * self.lam * self._p_perp[a, b]
        return ab


def fit_basis_svd(examples, rank: int) -> np.ndarray:
    """Fit a T x r basis to example signals by truncated SVD.

    Every channel of every example becomes one column of a T x n matrix;
    the basis is its top ``rank`` left singular vectors.  All examples
    must be fully known and share the same length T.
    """
    if rank < 1:
        raise DataError(f"fit_basis_svd: rank must be >= 1, got {rank}")
    cols = []
    length = None
    for j, ex in enumerate(examples):
        ex = np.asarray(ex, dtype=float)
        if ex.ndim == 1:
            ex = ex.reshape(-1, 1)
        if length is None:
            length = ex.shape[0]
        elif ex.shape[0] != length:
            raise DataError(f"fit_basis_svd: example {j} has length {ex.shape[0]} != {length}")
        if not np.all(np.isfinite(ex)):
            raise DataError(f"fit_basis_svd: example {j} has missing or non-finite entries")
        cols.append(ex)
    if not cols:
        raise DataError("fit_basis_svd: need at least one example")
    stacked = np.concatenate(cols, axis=1)
    if rank > min(stacked.shape):
        raise DataError(
            f"fit_basis_svd: rank {rank} exceeds the stacked example matrix "
            f"dimensions {stacked.shape}"
        )
    u, _, _ = np.linalg.svd(stacked, full_matrices=False)
    return u[:, :rank]


def fit_slice_basis(examples, memory: int, rank: int) -> np.ndarray:
    """Fit an M x r slice basis from all length-M windows of the examples.

    The result parameterizes a :class:`SliceSoftBasis` loss: signals
    whose every M-long slice is near the span of the learned shapes.
    """
    if memory < 1:
        raise DataError(f"fit_slice_basis: memory must be >= 1, got {memory}")
    slices = []
    for j, ex in enumerate(examples):
        ex = np.asarray(ex, dtype=float)
        if ex.ndim == 1:
            ex = ex.reshape(-1, 1)
        if ex.shape[0] <= memory:
            raise DataError(
                f"fit_slice_basis: example {j} has length {ex.shape[0]}, "
                f"need more than memory {memory}"
            )
        for i in range(ex.shape[1]):
            win = np.lib.stride_tricks.sliding_window_view(ex[:, i], memory)
            slices.append(win.T)
    return fit_basis_svd([s for s in slices], rank)

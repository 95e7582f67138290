"""Wrapper classes: common-across-channels and constant-per-block terms.

Both restrict a component to a low-dimensional pattern (one value per
time step shared by all channels, or one value per block of rows) and
reduce the masked prox to a weighted problem on the pattern variables,
with weights given by known-entry counts.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import DataError
from .base import ComponentClass, ProxRequest, check_lambda


class CommonTerm(ComponentClass):
    """A component identical in every channel, shaped by an inner loss.

    phi(x) = inner(z) when x_ti = z_t for all i, else +inf, where the
    inner class acts on the scalar signal z.  The masked prox averages v
    across each row's known entries and hands the inner class a weighted
    prox with the per-row known counts as weights, then broadcasts.
    """

    kind = "common"

    def __init__(self, inner: ComponentClass):
        super().__init__()
        if not isinstance(inner, ComponentClass):
            raise DataError("common: inner must be a component class")
        self.inner = inner
        self.convex = inner.convex

    def params(self):
        return {"inner": {"kind": self.inner.kind, **self.inner.params()}}

    def _eval(self, x):
        if not np.all(x == x[:, :1]):
            return np.inf
        return self.inner.eval_loss(x[:, :1])

    def _wprox(self, v, rho, w):
        T, p = v.shape
        # weighted row average: the exact reduction of the masked prox
        counts = w.sum(axis=1)
        sums = (w * v).sum(axis=1)
        avg = np.divide(sums, counts, out=np.zeros(T), where=counts > 0)
        req = ProxRequest(
            v=avg.reshape(-1, 1),
            rho=rho,
            known=(counts > 0).reshape(-1, 1),
            weights=counts.reshape(-1, 1),
        )
        z = self.inner.masked_prox(req)
        return np.broadcast_to(z, (T, p)).copy()


class Blockwise(ComponentClass):
    """A component constant over consecutive blocks of rows, per channel.

    With ``penalty="l1"``, phi(x) = lambda ||x||_1 on the (blockwise
    constant) signal, so each block value is soft-thresholded: a sparse
    sequence of block-level events.  With ``penalty="none"`` the class is
    the pure constraint and block values are weighted block means.  A
    fully unknown block has no data and goes to 0.  The final block may
    be shorter than ``block_len``.
    """

    def __init__(self, block_len: int, penalty: str = "none", lam: float = 1.0):
        super().__init__()
        self.block_len = int(block_len)
        if self.block_len < 1:
            raise DataError(f"blockwise: block_len must be >= 1, got {block_len}")
        if penalty not in ("none", "l1"):
            raise DataError(f"blockwise: penalty must be none or l1, got {penalty!r}")
        self.penalty = penalty
        self.lam = check_lambda(lam, "blockwise") if penalty == "l1" else float(lam)
        self.kind = "blockwise_l1" if penalty == "l1" else "blockwise_mean"
        self.convex = True

    def params(self):
        out = {"block_len": self.block_len, "penalty": self.penalty}
        if self.penalty == "l1":
            out["lambda"] = self.lam
        return out

    def _blocks(self, T):
        idx = np.arange(T) // self.block_len
        lengths = np.bincount(idx).astype(float)
        return idx, lengths

    def _eval(self, x):
        T, p = x.shape
        idx, _ = self._blocks(T)
        first = x[np.searchsorted(idx, np.unique(idx))]
        if not np.all(x == first[idx]):
            return np.inf
        if self.penalty == "l1":
            return self.lam * np.sum(np.abs(x))
        return 0.0

    def _wprox(self, v, rho, w):
        T, p = v.shape
        idx, lengths = self._blocks(T)
        nb = lengths.size
        wsum = np.zeros((nb, p))
        vsum = np.zeros((nb, p))
        np.add.at(wsum, idx, w)
        np.add.at(vsum, idx, w * v)
        z = np.divide(vsum, wsum, out=np.zeros_like(vsum), where=wsum > 0)
        if self.penalty == "l1":
            # block value cost lambda * L_b |z| against data weight rho * W_b
            thr = np.divide(
                self.lam * lengths[:, None],
                rho * wsum,
                out=np.zeros_like(wsum),
                where=wsum > 0,
            )
            z = np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)
        return z[idx]

"""Discrete-state classes: Markov sequences and single-jump signals.

Both proxes are exact combinatorial minimizations.  The Markov prox is
dynamic programming over T stages and M states (O(T M^2)); the
single-jump prox scans all T-1 jump times with running suffix sums
(O(T) per channel).
"""

from __future__ import annotations

import numpy as np

from ..exceptions import DataError
from .base import ComponentClass, check_lambda


class Markov(ComponentClass):
    """Rows drawn from M values with Markov switching costs.

    Feasible signals take x_t = theta_s for a state sequence s_1..s_T;
    the loss is sum_t c_{s_t} + sum_{t>=2} C[s_t, s_{t-1}].  The prox is
    exact DP: node cost at (t, s) adds (rho/2) times the weighted squared
    distance of theta_s to the known part of row t; ties break toward the
    lower state index.
    """

    kind = "markov"
    convex = False

    def __init__(self, values, C, c):
        super().__init__()
        theta = np.asarray(values, dtype=float)
        if theta.ndim == 1:
            theta = theta.reshape(-1, 1)
        if theta.ndim != 2 or theta.shape[0] < 1:
            raise DataError(f"markov: values must be M x p, got shape {theta.shape}")
        if np.unique(theta, axis=0).shape[0] != theta.shape[0]:
            raise DataError("markov: state values must be distinct")
        M = theta.shape[0]
        C = np.asarray(C, dtype=float)
        c = np.asarray(c, dtype=float)
        if C.shape != (M, M):
            raise DataError(f"markov: C must be {M}x{M}, got {C.shape}")
        if c.shape != (M,):
            raise DataError(f"markov: c must have length {M}, got {c.shape}")
        if np.any(C < 0) or np.any(c < 0):
            raise DataError("markov: switching costs must be nonnegative")
        self.theta = theta
        self.C = C
        self.c = c

    def params(self):
        return {"M": self.theta.shape[0], "p": self.theta.shape[1]}

    def _check_p(self, p):
        if self.theta.shape[1] != p:
            raise DataError(
                f"markov: state values have {self.theta.shape[1]} entries "
                f"but the signal has {p} channels"
            )

    def _states_of(self, x):
        """Exact state index per row, or -1 where no state matches."""
        match = np.all(x[:, None, :] == self.theta[None, :, :], axis=2)
        ok = match.any(axis=1)
        states = np.where(ok, match.argmax(axis=1), -1)
        return states

    def _eval(self, x):
        self._check_p(x.shape[1])
        s = self._states_of(x)
        if np.any(s < 0):
            return np.inf
        total = float(self.c[s].sum())
        if s.size > 1:
            total += float(self.C[s[1:], s[:-1]].sum())
        return total

    def _wprox(self, v, rho, w):
        T, p = v.shape
        self._check_p(p)
        th = self.theta
        # node(t, s) = c_s + (rho/2) sum_i w_ti (v_ti - theta_si)^2
        node = self.c[None, :] + 0.5 * rho * (
            (w[:, None, :] * (v[:, None, :] - th[None, :, :]) ** 2).sum(axis=2)
        )
        M = th.shape[0]
        pred = np.zeros((T, M), dtype=int)
        cost = node[0].copy()
        edge = self.C.T  # edge[j, i] = C[i, j]: from state j to state i
        for t in range(1, T):
            cand = cost[:, None] + edge
            pred[t] = np.argmin(cand, axis=0)  # first minimum = lowest index
            cost = cand[pred[t], np.arange(M)] + node[t]
        s = np.empty(T, dtype=int)
        s[-1] = int(np.argmin(cost))
        for t in range(T - 1, 0, -1):
            s[t - 1] = pred[t, s[t]]
        return th[s]


class SingleJump(ComponentClass):
    """Signals that are zero and then constant: one step change per channel.

    Per channel, x is either identically 0 (loss 0) or

        x = (0, ..., 0, a, ..., a),  a != 0,

    with the jump after position tau in {1, ..., T-1}, at loss ``lam``.
    The optional sign restriction only admits jumps of that sign.  The
    prox compares no-jump against the best (tau, a) where a is the
    weighted mean of v over the suffix; tie with no-jump keeps no jump,
    ties between jump times keep the earliest.
    """

    kind = "single_jump"
    convex = False

    def __init__(self, lam: float = 1.0, sign: str = "any"):
        super().__init__()
        self.lam = check_lambda(lam, self.kind)
        if sign not in ("any", "negative", "positive"):
            raise DataError(f"single_jump: sign must be any/negative/positive, got {sign!r}")
        self.sign = sign

    def params(self):
        return {"lambda": self.lam, "sign": self.sign}

    def _sign_ok(self, a):
        if self.sign == "negative":
            return a < 0
        if self.sign == "positive":
            return a > 0
        return a != 0

    def _eval(self, x):
        total = 0.0
        T = x.shape[0]
        for i in range(x.shape[1]):
            col = x[:, i]
            nz = np.nonzero(col)[0]
            if nz.size == 0:
                continue
            j = nz[0]
            a = col[j]
            if j < 1 or not np.all(col[j:] == a) or not self._sign_ok(a):
                return np.inf
            total += self.lam
        return total

    def _wprox(self, v, rho, w):
        T, p = v.shape
        out = np.zeros_like(v)
        for i in range(p):
            out[:, i] = self._channel(v[:, i], rho, w[:, i])
        return out

    def _channel(self, v, rho, w):
        T = v.size
        x = np.zeros(T)
        if T < 2:
            return x
        # suffix sums, accumulated right to left
        sw = np.cumsum(w[::-1])[::-1]
        sv = np.cumsum((w * v)[::-1])[::-1]
        sq = np.cumsum((w * v * v)[::-1])[::-1]
        cost0 = 0.5 * rho * sq[0]
        best_cost = np.inf
        best_tau = -1
        best_a = 0.0
        for tau in range(1, T):
            if sw[tau] <= 0.0:
                continue
            a = sv[tau] / sw[tau]
            if not self._sign_ok(a):
                continue
            cost = self.lam + 0.5 * rho * (sq[0] - sv[tau] * sv[tau] / sw[tau])
            if cost < best_cost:
                best_cost = cost
                best_tau = tau
                best_a = a
        if best_tau >= 0 and best_cost < cost0:
            x[best_tau:] = best_a
        return x

"""Component class interface: loss evaluation and masked proximal operators.

A component class is a function phi from R^(T x p) to R union {+inf} that
encodes what signals of one type look like.  The solvers interact with a
class through two operations only:

* ``eval_loss(x)`` -- the loss value, +inf outside the class's domain;
* ``masked_prox(req)`` -- the masked (and optionally weighted) proximal
  operator

      argmin_x  phi(x) + (rho/2) * sum_ti w_ti (x_ti - v_ti)^2,

  where the weights default to the 0/1 known pattern.  Entries with zero
  weight carry no data term, so the prox depends on v only through its
  positively weighted entries; implementations receive v with the other
  entries already zeroed, which makes

      masked_prox(v) == masked_prox(zero_fill(v))

  hold bit for bit.

Classes whose prox requires a factorization cache it keyed by
``(rho, weights)`` so that repeated calls with the same data pattern,
which is how the solvers call them, reuse the factorization and return
bit-identical results.  The cache is safe under concurrent reads with a
single writer; insertion is serialized by a lock.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from ..exceptions import DataError


@dataclass(frozen=True)
class ProxRequest:
    """One masked-prox evaluation: target ``v``, parameter ``rho``, pattern.

    ``weights`` optionally replaces the 0/1 known pattern with arbitrary
    nonnegative per-entry weights (used by the wrapper classes and by the
    periodic phase folding).
    """

    v: np.ndarray
    rho: float
    known: np.ndarray
    weights: np.ndarray | None = None

    def effective_weights(self) -> np.ndarray:
        w = self.known.astype(float)
        if self.weights is not None:
            w = w * self.weights
        return w


class ComponentClass:
    """Base class; subclasses implement ``_eval`` and ``_wprox``."""

    kind: str = "abstract"
    convex: bool = True

    def __init__(self):
        self._cache: dict = {}
        # reentrant: building one cache entry may consult another
        self._cache_lock = threading.RLock()
        self.cache_hits = 0
        self.cache_misses = 0

    # -- public interface -------------------------------------------------

    def eval_loss(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise DataError(f"{self.kind}: expected a T x p matrix, got shape {x.shape}")
        return float(self._eval(x))

    def masked_prox(self, req: ProxRequest) -> np.ndarray:
        v = np.asarray(req.v, dtype=float)
        if v.ndim != 2:
            raise DataError(f"{self.kind}: expected a T x p matrix, got shape {v.shape}")
        if req.known.shape != v.shape:
            raise DataError(
                f"{self.kind}: known pattern shape {req.known.shape} "
                f"does not match v shape {v.shape}"
            )
        if not req.rho > 0:
            raise DataError(f"{self.kind}: rho must be positive, got {req.rho}")
        w = req.effective_weights()
        if np.any(w < 0):
            raise DataError(f"{self.kind}: weights must be nonnegative")
        v = np.where(w > 0, v, 0.0)
        return self._wprox(v, float(req.rho), w)

    def mprox(self, v, rho, known=None, weights=None) -> np.ndarray:
        """Convenience wrapper; ``known`` defaults to all-known."""
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if known is None:
            known = np.ones(v.shape, dtype=bool)
        return self.masked_prox(ProxRequest(v=v, rho=rho, known=known, weights=weights))

    # -- implementation hooks ---------------------------------------------

    def _eval(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def _wprox(self, v: np.ndarray, rho: float, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- factorization cache ----------------------------------------------

    def _cached(self, key, builder):
        """Return the cached value for ``key``, building it once if absent."""
        hit = self._cache.get(key)
        if hit is not None:
            self.cache_hits += 1
            return hit
        with self._cache_lock:
            hit = self._cache.get(key)
            if hit is not None:
                self.cache_hits += 1
                return hit
            value = builder()
            self._cache[key] = value
            self.cache_misses += 1
            return value

    @staticmethod
    def _weights_key(rho: float, w: np.ndarray):
        return (float(rho), w.shape, w.tobytes())

    def __repr__(self):
        return f"<{type(self).__name__} {self.params()}>"

    def params(self) -> dict:
        """Parameters as a plain dict, for reports and manifests."""
        return {}


def check_lambda(lam: float, kind: str) -> float:
    lam = float(lam)
    if not lam > 0:
        raise DataError(f"{kind}: weight lambda must be strictly positive, got {lam}")
    return lam

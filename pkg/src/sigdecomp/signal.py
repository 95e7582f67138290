"""Vector time series with missing entries, and the masking operators.

A signal is a T x p real matrix, one row per time step and one column per
channel, in which any subset of entries may be unknown.  The selection
operator ``mask`` stacks the known entries of a matrix into a vector of
length q (row-major order), and ``mask_adjoint`` scatters such a vector
back into a T x p matrix with zeros in the unknown positions.  Together
they satisfy

    mask(mask_adjoint(v)) == v            for any v in R^q,
    mask_adjoint(mask(X)) == "zero-fill"  for any X in R^(T x p),

which is all the solvers ever need: the composition M* M keeps the known
entries of its argument and zeroes the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, DegenerateScaleError


@dataclass(frozen=True)
class Signal:
    """A T x p series; ``values`` holds NaN exactly in the unknown entries.

    ``known`` is the boolean complement of the missing pattern.  Known
    entries must be finite.
    """

    values: np.ndarray
    known: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise DataError(f"signal values must be 2-D, got shape {values.shape}")
        known = self.known
        if known is None:
            known = ~np.isnan(values)
        known = np.asarray(known, dtype=bool)
        if known.shape != values.shape:
            raise DataError(
                f"known mask shape {known.shape} does not match values shape {values.shape}"
            )
        if not np.all(np.isfinite(values[known])):
            raise DataError("known entries must be finite")
        values = np.where(known, values, np.nan)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "known", known)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def q(self) -> int:
        """Number of known entries."""
        return int(self.known.sum())

    @property
    def known_fraction(self) -> float:
        return self.q / self.values.size

    def known_indices(self):
        """Row-major (t, i) index arrays of the known entries.

        This fixed ordering is the one ``mask`` uses, and the one model
        selection uses when planting test sets.
        """
        return np.nonzero(self.known)

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Values with unknown entries replaced by ``fill``."""
        return np.where(self.known, self.values, fill)


def mask(x: np.ndarray, known: np.ndarray) -> np.ndarray:
    """Stack the known entries of ``x`` into a length-q vector (row-major)."""
    return np.asarray(x)[known]


def mask_adjoint(v: np.ndarray, known: np.ndarray) -> np.ndarray:
    """Scatter a length-q vector into a full matrix, zero in unknown entries."""
    v = np.asarray(v, dtype=float)
    q = int(known.sum())
    if v.shape != (q,):
        raise DataError(f"expected a vector of length {q}, got shape {v.shape}")
    out = np.zeros(known.shape, dtype=float)
    out[known] = v
    return out


def zero_fill(x: np.ndarray, known: np.ndarray) -> np.ndarray:
    """The composition M* M: keep known entries, zero the rest."""
    return np.where(known, x, 0.0)


@dataclass(frozen=True)
class StandardizeRecord:
    """Offsets and scales used to standardize a signal, for later inversion."""

    offset: np.ndarray
    scale: np.ndarray
    per_channel: bool

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.offset) / self.scale

    def invert(self, values: np.ndarray) -> np.ndarray:
        return values * self.scale + self.offset


def standardize(signal: Signal, per_channel: bool = True):
    """Shift and scale a signal to zero mean and unit variance on its knowns.

    With ``per_channel`` each column gets its own offset and scale,
    otherwise a single pooled pair is used.  Statistics are computed over
    known entries only, with the population (1/n) variance convention.

    Returns ``(standardized_signal, record)``.  Raises
    :class:`DegenerateScaleError` naming the first offending channel if a
    channel (or the pool) has fewer than two known entries or zero spread.
    """
    values, known = signal.values, signal.known
    p = signal.p
    if per_channel:
        offset = np.zeros(p)
        scale = np.ones(p)
        for i in range(p):
            col = values[known[:, i], i]
            if col.size < 2:
                raise DegenerateScaleError(
                    f"channel {i}: {col.size} known entries, need at least 2 to standardize"
                )
            mu, sd = col.mean(), col.std()
            if sd == 0.0:
                raise DegenerateScaleError(f"channel {i}: zero spread, cannot standardize")
            offset[i], scale[i] = mu, sd
    else:
        pool = values[known]
        if pool.size < 2:
            raise DegenerateScaleError(
                f"{pool.size} known entries in total, need at least 2 to standardize"
            )
        mu, sd = pool.mean(), pool.std()
        if sd == 0.0:
            raise DegenerateScaleError("zero spread over all channels, cannot standardize")
        offset = np.full(p, mu)
        scale = np.full(p, sd)
    record = StandardizeRecord(offset=offset, scale=scale, per_channel=per_channel)
    return Signal(record.apply(values), known=known), record


def log_transform(signal: Signal):
    """Entrywise natural log; non-positive known entries become unknown.

    Useful for multiplicative models: the decomposition runs on the log
    signal and components are exponentiated on the way out.  Returns
    ``(log_signal, dropped)`` where ``dropped`` is the boolean pattern of
    known entries that were discarded because they were <= 0.
    """
    values, known = signal.values, signal.known
    positive = known & (signal.filled(1.0) > 0.0)
    dropped = known & ~positive
    out = np.full_like(values, np.nan)
    out[positive] = np.log(values[positive])
    return Signal(out, known=positive), dropped


def row_avg_known(x: np.ndarray, known: np.ndarray):
    """Per-row average over known entries, plus the per-row known counts.

    Rows with no known entries average to 0 by convention (their count is
    0, which callers can use to tell the two apart).
    """
    counts = known.sum(axis=1).astype(float)
    sums = np.where(known, x, 0.0).sum(axis=1)
    avg = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return avg, counts

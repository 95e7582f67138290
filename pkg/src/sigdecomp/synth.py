"""Synthetic data generators for the bundled examples and tests.

Each generator is deterministic given its seed and returns both the
observed signal and the true components it was built from.  Random
quantities are drawn in a fixed documented order so that a seed pins
the data exactly: amplitudes from [0.5, 1.5], periods from [40, 300]
samples, phases from [0, 2 pi], and the square-wave level from
[0.5, 1.5]; the noise is drawn last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import Signal


@dataclass(frozen=True)
class SynthResult:
    """Observed signal plus the ground-truth components that sum to it."""

    signal: Signal
    truth: dict


def _trig_sum(rng: np.random.Generator, T: int) -> np.ndarray:
    """Sum of three cosines with random amplitude, period, and phase.

    Draw order: amplitudes, then periods, then phases (three of each).
    """
    a = rng.uniform(0.5, 1.5, 3)
    period = rng.uniform(40.0, 300.0, 3)
    delta = rng.uniform(0.0, 2.0 * np.pi, 3)
    t = np.arange(T)
    return np.sum(a[:, None] * np.cos(2.0 * np.pi * t[None, :] / period[:, None] + delta[:, None]), axis=0)


def simple(seed: int, T: int = 500) -> SynthResult:
    """Scalar series: smooth trigonometric sum + two-level square wave + noise.

    The square wave is the indicator of a second random trigonometric
    sum being nonnegative, scaled by a random level theta2.  Draws, in
    order: the smooth sum, the threshold sum, theta2, then the noise.
    """
    rng = np.random.default_rng(seed)
    smooth = _trig_sum(rng, T)
    gate = _trig_sum(rng, T)
    theta2 = rng.uniform(0.5, 1.5)
    square = np.where(gate >= 0.0, theta2, 0.0)
    noise = rng.normal(0.0, 0.1, T)
    y = (noise + smooth + square).reshape(-1, 1)
    sig = Signal(y, np.ones_like(y, dtype=bool))
    truth = {
        "noise": noise.reshape(-1, 1),
        "smooth": smooth.reshape(-1, 1),
        "square": square.reshape(-1, 1),
        "theta2": theta2,
    }
    return SynthResult(sig, truth)


def co2_weekly(seed: int, T: int = 312) -> SynthResult:
    """Weekly-cadence scalar series: rising smooth trend + yearly seasonal.

    Mimics a slowly accelerating baseline with a 52-sample seasonal
    cycle whose shape drifts a little from year to year, plus noise and
    a few missing stretches.  Draws, in order: trend curvature, seasonal
    amplitude/phase, drift, noise, missing rows.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(T, dtype=float)
    curv = rng.uniform(0.5, 1.5)
    trend = 350.0 + 0.04 * t + curv * 2e-5 * t * t
    amp = rng.uniform(2.0, 4.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    drift = 1.0 + 0.1 * rng.standard_normal(int(np.ceil(T / 52.0)))
    seasonal = amp * np.sin(2.0 * np.pi * t / 52.0 + phase) * drift[(t // 52).astype(int)]
    noise = rng.normal(0.0, 0.25, T)
    y = trend + seasonal + noise
    known = np.ones(T, dtype=bool)
    holes = rng.permutation(T)[: max(2, T // 50)]
    known[holes] = False
    values = np.where(known, y, np.nan).reshape(-1, 1)
    sig = Signal(values, known.reshape(-1, 1))
    truth = {
        "trend": trend.reshape(-1, 1),
        "seasonal": seasonal.reshape(-1, 1),
        "noise": noise.reshape(-1, 1),
    }
    return SynthResult(sig, truth)


def pv_fleet(
    seed: int,
    days: int = 8,
    samples_per_day: int = 64,
    strings: int = 3,
) -> SynthResult:
    """Fleet of PV-like strings with planted step faults, multiplicative model.

    Columns share a smooth daily production bump (slightly different
    amplitude per string), a per-day common scale, and common cloud
    dips; some strings suffer a permanent fractional power loss from a
    planted onset time to the end.  All structure lives in the log of
    the returned positive signal.  Draws, in order: string amplitudes,
    daily scales, cloud dips, fault assignment, noise, missing entries.

    ``truth['fault_onsets']`` and ``truth['fault_factors']`` record, per
    string, the planted onset row (or -1) and the fractional loss.
    """
    rng = np.random.default_rng(seed)
    T = days * samples_per_day
    t = np.arange(T)
    tod = (t % samples_per_day) / samples_per_day
    bump = np.sin(np.pi * tod) ** 2 + 0.05
    amps = rng.uniform(0.85, 1.15, strings)
    clear = np.log(bump)[:, None] + np.log(amps)[None, :]

    day_scale = rng.uniform(0.85, 1.0, days)
    daily = np.repeat(np.log(day_scale), samples_per_day)[:, None] * np.ones((1, strings))

    cloud = np.zeros(T)
    n_dips = 2 * days
    starts = rng.integers(0, T - 8, n_dips)
    depths = rng.uniform(0.1, 0.5, n_dips)
    for s, d in zip(starts, depths):
        cloud[s : s + 8] += np.log1p(-d)
    cloud = np.minimum(cloud, 0.0)[:, None] * np.ones((1, strings))

    onsets = np.full(strings, -1)
    factors = np.zeros(strings)
    faulted = rng.permutation(strings)[: max(1, strings - 1)]
    fault = np.zeros((T, strings))
    for i in sorted(faulted):
        onset = int(rng.integers(T // 4, 3 * T // 4))
        frac = float(rng.uniform(0.3, 0.5))
        onsets[i] = onset
        factors[i] = frac
        fault[onset:, i] = np.log1p(-frac)

    noise = rng.normal(0.0, 0.02, (T, strings))
    logy = noise + clear + daily + cloud + fault
    y = np.exp(logy)

    known = np.ones((T, strings), dtype=bool)
    n_missing = max(1, T * strings // 25)
    flat = rng.permutation(T * strings)[:n_missing]
    known[np.unravel_index(flat, (T, strings))] = False
    values = np.where(known, y, np.nan)
    sig = Signal(values, known)
    truth = {
        "clear": clear,
        "daily": daily,
        "cloud": cloud,
        "fault": fault,
        "noise": noise,
        "fault_onsets": onsets,
        "fault_factors": factors,
        "samples_per_day": samples_per_day,
    }
    return SynthResult(sig, truth)

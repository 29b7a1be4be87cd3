"""Periodic central stencils and Richardson-extrapolated derivatives in a scalar parameter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# one-sided weights c_k of  f'(x) ~ sum_k c_k (f(x+kh) - f(x-kh)) / h
CENTRAL_WEIGHTS = {
    2: (1 / 2,),
    4: (2 / 3, -1 / 12),
    6: (3 / 4, -3 / 20, 1 / 60),
    8: (4 / 5, -1 / 5, 4 / 105, -1 / 280),
}

DEFAULT_STEPS = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)


class RichardsonError(ArithmeticError):
    """Raised when no step in the sweep gives a consistent extrapolation table."""


def periodic_derivative(f, axis: int, spacing: float, order: int = 4):
    try:
        weights = CENTRAL_WEIGHTS[order]
    except KeyError:
        raise ValueError(f"stencil order must be one of {sorted(CENTRAL_WEIGHTS)}") from None
    out = np.zeros_like(f)
    for k, c in enumerate(weights, start=1):
        out += c * (np.roll(f, -k, axis=axis) - np.roll(f, k, axis=axis))
    return out / spacing


@dataclass
class Extrapolation:
    value: float
    error: float
    step: float
    order_estimate: float
    steps: list


def _table(samples, levels, ratio, p0):
    """Standard Richardson table on central-difference samples (error in even powers)."""
    T = [np.asarray(s, dtype=float) for s in samples]
    rows = [T]
    for j in range(1, levels):
        prev = rows[-1]
        fac = ratio ** (p0 + 2 * (j - 1))
        rows.append([(fac * prev[i + 1] - prev[i]) / (fac - 1) for i in range(len(prev) - 1)])
    return rows


def richardson(f, order: int = 1, steps=DEFAULT_STEPS, levels: int = 4, ratio: float = 2.0):
    """Derivative of ``f: float -> float | array`` at 0 by central differences.

    For every base step ``t`` the samples at ``t, t/2, ..., t/2**(levels-1)`` are
    extrapolated; the base step whose last two extrapolants agree best wins.
    ``order`` is 1 (first derivative) or 2 (second derivative).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    cache = {}

    def val(t):
        if t not in cache:
            cache[t] = np.asarray(f(t), dtype=float)
        return cache[t]

    f0 = val(0.0) if order == 2 else None
    best = None
    for t0 in steps:
        ts = [t0 / ratio**k for k in range(levels)]
        if ts[-1] < 1e-12:
            raise RichardsonError(f"step {ts[-1]:.1e} underflows")
        if order == 1:
            raw = [(val(t) - val(-t)) / (2 * t) for t in ts]
        else:
            raw = [(val(t) - 2 * f0 + val(-t)) / t**2 for t in ts]
        rows = _table(raw, levels, ratio, 2)
        final = rows[-1][0]
        err = float(np.max(np.abs(rows[-1][0] - rows[-2][-1])))
        d1 = np.max(np.abs(raw[0] - raw[1]))
        d2 = np.max(np.abs(raw[1] - raw[2]))
        est = float(np.log(d1 / d2) / np.log(ratio)) if d1 > 0 and d2 > 0 else float("nan")
        if best is None or err < best.error:
            best = Extrapolation(final, err, t0, est, ts)
    if best is None or not np.all(np.isfinite(best.value)):
        raise RichardsonError("Richardson table did not produce a finite value")
    if np.ndim(best.value) == 0:
        best.value = float(best.value)
    return best

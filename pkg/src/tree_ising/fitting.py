"""Least-squares fits used by the decay and scaling experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r2: float

    @property
    def rate(self) -> float:
        """Decay rate ``lambda`` of ``y ~ A exp(-lambda x)`` when fitted to ``log y``."""
        return -self.slope


def exp_decay_fit(x, y) -> LineFit:
    """Fit ``log y = log A - lambda x`` over the points with ``y > 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive values to fit a decay")
    r = stats.linregress(x[keep], np.log(y[keep]))
    return LineFit(float(r.slope), float(r.intercept), float(r.rvalue**2))


def loglog_fit(x, y) -> LineFit:
    """Fit ``log |y| = a log x + b``; ``slope`` is the scaling exponent."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    r = stats.linregress(np.log(x), np.log(y))
    return LineFit(float(r.slope), float(r.intercept), float(r.rvalue**2))


def residual_tail(history, floor: float = 1e-14, tail: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Sweep indices and residuals for the last ``tail`` fraction above ``floor``."""
    h = np.asarray(history, dtype=float)
    t = np.arange(1, h.size + 1)
    keep = h > floor
    t, h = t[keep], h[keep]
    start = int(len(h) * (1 - tail))
    return t[start:], h[start:]

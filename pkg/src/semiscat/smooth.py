"""Standard C-infinity transition and cutoff profiles."""

import numpy as np


def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _dpsi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def step(t):
    """Smooth step: 0 for t <= 0, 1 for t >= 1 (exactly), C-infinity in between."""
    a, b = _psi(t), _psi(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


def dstep(t):
    t = np.asarray(t, dtype=float)
    a, b = _psi(t), _psi(1.0 - t)
    da, db = _dpsi(t), _dpsi(1.0 - t)
    return (da * b + a * db) / (a + b) ** 2


def plateau(s, lo, hi, shoulder):
    """1 on [lo, hi], 0 outside [lo - shoulder, hi + shoulder]."""
    s = np.asarray(s, dtype=float)
    if shoulder <= 0:
        return ((s >= lo) & (s <= hi)).astype(float)
    return step((s - lo + shoulder) / shoulder) * step((hi + shoulder - s) / shoulder)


def chi0(norm):
    """Energy cutoff: 1 for |xi| <= 1, 0 for |xi| >= 2."""
    return 1.0 - step(np.asarray(norm, dtype=float) - 1.0)

"""Norm utilities: Hölder conjugate exponents, p-norms, norm-attaining directions."""

import math

import numpy as np


def dual_exponent(q):
    """Return p with 1/p + 1/q = 1 (exact for q in {1, 2, inf})."""
    q = float(q)
    if q < 1:
        raise ValueError("norm index must be >= 1, got %r" % q)
    if q == 1.0:
        return math.inf
    if math.isinf(q):
        return 1.0
    if q == 2.0:
        return 2.0
    return q / (q - 1.0)


def pnorm(v, p, axis=-1):
    """The l_p norm along ``axis`` for p in [1, inf]."""
    v = np.abs(np.asarray(v, dtype=float))
    if math.isinf(p):
        return v.max(axis=axis, initial=0.0)
    if p == 1.0:
        return v.sum(axis=axis)
    if p == 2.0:
        return np.sqrt((v * v).sum(axis=axis))
    return (v ** p).sum(axis=axis) ** (1.0 / p)


def holder_direction(theta, p):
    """Direction Delta with ||Delta||_q = ||theta||_p and theta @ Delta = ||theta||_p**2.

    For finite p this is ``||theta||_p**(1 - p/q) * sign(theta) * |theta|**(p/q)``;
    for p = inf all mass goes on one largest coordinate.
    """
    theta = np.asarray(theta, dtype=float)
    nrm = pnorm(theta, p)
    if nrm == 0.0:
        return np.zeros_like(theta)
    if math.isinf(p):
        out = np.zeros_like(theta)
        j = int(np.argmax(np.abs(theta)))
        out[j] = nrm * np.sign(theta[j])
        return out
    q = dual_exponent(p)
    if math.isinf(q):
        # p = 1: |theta|**0 == 1 on the support
        return nrm * np.sign(theta)
    return nrm ** (1.0 - p / q) * np.sign(theta) * np.abs(theta) ** (p / q)

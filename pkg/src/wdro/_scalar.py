"""One-dimensional minimization helpers shared by the dual solvers."""

import math

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_min(fun, a, b, xtol=0.0, maxiter=300):
    """Golden-section search for a minimizer of a unimodal ``fun`` on [a, b].

    Returns ``(x, fun(x))`` for the best point evaluated.  Iterates until the
    bracket stops shrinking in floating point or ``maxiter`` is hit.
    """
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    best = min((fc, c), (fd, d))
    for _ in range(maxiter):
        if b - a <= xtol or not (a < c < d < b):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
            best = min(best, (fc, c))
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
            best = min(best, (fd, d))
    return best[1], best[0]


def bracket_upper(fun, lo, start=1.0, max_doublings=200):
    """Double ``hi`` from ``lo + start`` until fun(hi) >= fun(hi/2-ish) for convex ``fun``.

    Returns an upper end ``hi`` such that a minimizer over [lo, inf) lies in [lo, hi].
    """
    step = start
    prev = fun(lo + step)
    for _ in range(max_doublings):
        step *= 2.0
        cur = fun(lo + step)
        if cur >= prev:
            return lo + step
        prev = cur
    return lo + step

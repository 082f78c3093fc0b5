"""Monotone bisection over a boolean predicate."""

from __future__ import annotations

from typing import Callable

from ..errors import NoSignChange


def bisect(
    predicate: Callable,
    lo,
    hi,
    tol: float = 1e-6,
    *,
    integer: bool = False,
):
    """Locate the flip point of a monotone boolean predicate on [lo, hi].

    Continuous mode returns a float within ``tol`` of the threshold and
    requires the predicate to differ at the endpoints (NoSignChange
    otherwise).  Integer mode assumes the predicate is True at ``lo`` and
    monotone nonincreasing, and returns the largest integer in [lo, hi] where
    it holds; a predicate true everywhere simply returns ``hi``.
    """
    if integer:
        lo, hi = int(lo), int(hi)
        if not predicate(lo):
            raise NoSignChange(f"predicate is already False at lo={lo}")
        if lo == hi or predicate(hi):
            return hi
        a, b = lo, hi  # P(a) True, P(b) False
        while b - a > 1:
            mid = (a + b) // 2
            if predicate(mid):
                a = mid
            else:
                b = mid
        return a

    lo, hi = float(lo), float(hi)
    p_lo = bool(predicate(lo))
    p_hi = bool(predicate(hi))
    if p_lo == p_hi:
        raise NoSignChange(f"predicate equals {p_lo} at both endpoints")
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if bool(predicate(mid)) == p_lo:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)

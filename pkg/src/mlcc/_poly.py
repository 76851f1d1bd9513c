"""Multivariate polynomial helpers (term lists, exact differentiation).

A scalar polynomial in ``n`` variables is a list of ``(coeff, degs)`` pairs
where ``degs`` is an n-tuple of nonnegative integer exponents.  Exact
differentiation of these term lists is what makes the closed-form jet
oracles of the field module possible.
"""

from __future__ import annotations

import math


Term = tuple[float, tuple[int, ...]]


def poly_eval(terms: list[Term], x) -> float:
    total = 0.0
    for coeff, degs in terms:
        m = coeff
        for xi, di in zip(x, degs):
            if di:
                m *= xi**di
        total += m
    return total


def poly_diff(terms: list[Term], j: int) -> list[Term]:
    """Partial derivative with respect to variable ``j``."""
    out = []
    for coeff, degs in terms:
        dj = degs[j]
        if dj == 0:
            continue
        newdegs = degs[:j] + (dj - 1,) + degs[j + 1 :]
        out.append((coeff * dj, newdegs))
    return out


def poly_substitute_prefix(terms: list[Term], t) -> list[Term]:
    """Freeze the first ``len(t)`` variables at the values ``t``.

    Returns a polynomial in the remaining trailing variables.
    """
    n0 = len(t)
    collected: dict[tuple[int, ...], float] = {}
    for coeff, degs in terms:
        c = coeff
        for ti, di in zip(t, degs[:n0]):
            if di:
                c *= ti**di
        rest = degs[n0:]
        collected[rest] = collected.get(rest, 0.0) + c
    return [(c, degs) for degs, c in collected.items() if c != 0.0]


def poly_is_finite(terms: list[Term]) -> bool:
    return all(math.isfinite(c) for c, _ in terms)

"""Gamma, Pochhammer and Gauss hypergeometric 2F1 in binary64.

The scalar entry points (:func:`gamma`, :func:`pochhammer`,
:func:`gauss_2f1`, :func:`gauss_value_at_one`) check their preconditions
and raise; :func:`hyp2f1` is the broadcasting workhorse used by the kernel
code, where millions of arguments share a handful of parameter values.

Evaluation strategy for ``F(a, b; c; z)``:

* ``|z| <= 0.5`` or a terminating series: direct summation.
* ``z < -0.5``: Euler's transformation to ``w = z / (z - 1)`` in (1/3, 1).
* ``0.5 < z < 1``: the classical ``z -> 1 - z`` connection formula. When
  ``c - a - b`` is (numerically) an integer the two Gamma-weighted halves
  have poles that cancel; there we sum directly if ``z <= 0.9`` and
  otherwise average the connection formula over ``b +- eps`` and
  ``b +- 2 eps`` with a Richardson step (error O(eps^4)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special as sc

from .errors import ConvergenceError, DomainError, PoleError

__all__ = [
    "SeriesControl",
    "DEFAULT_CONTROL",
    "gamma",
    "pochhammer",
    "gauss_2f1",
    "gauss_value_at_one",
    "hyp2f1",
    "is_nonpositive_integer",
]

_INT_TOL = 1e-8
_RICHARDSON_EPS = 3e-4
_LONG_SUM_TERMS = 1_000_000


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy shared by every series in the package.

    A series stops once ``tail_window`` consecutive terms satisfy
    ``|term| <= rel_tol * |partial| + abs_tol``.
    """

    rel_tol: float = 1e-12
    abs_tol: float = 1e-300
    max_terms: int = 100_000
    tail_window: int = 5

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")
        if self.max_terms < 1:
            raise DomainError("max_terms must be >= 1")
        if self.tail_window < 1:
            raise DomainError("tail_window must be >= 1")


DEFAULT_CONTROL = SeriesControl()


def is_nonpositive_integer(x, tol=_INT_TOL):
    x = np.asarray(x, dtype=float)
    return (x <= tol) & (np.abs(x - np.round(x)) <= tol)


def gamma(z: float) -> float:
    """Gamma function of a real argument.

    Negative arguments are reduced with ``Gamma(z) = Gamma(z + 1) / z``
    until the argument is positive.
    """
    z = float(z)
    if is_nonpositive_integer(z, tol=1e-14 * max(1.0, abs(z))):
        raise PoleError(f"gamma has a pole at z={z!r}")
    if z > 0:
        return math.gamma(z)
    denom = 1.0
    while z <= 0:
        denom *= z
        z += 1.0
    return math.gamma(z) / denom


def pochhammer(lam: float, p: int) -> float:
    """Rising factorial ``lam (lam + 1) ... (lam + p - 1)``; 1 when p = 0."""
    if p < 0 or int(p) != p:
        raise DomainError("pochhammer order must be a nonnegative integer")
    out = 1.0
    for j in range(int(p)):
        out *= lam + j
    return out


def _gamma_ratio(nums, dens):
    """prod Gamma(nums) / prod Gamma(dens), elementwise, 0 at denominator poles."""
    logv = 0.0
    sign = 1.0
    zero = False
    for v in nums:
        logv = logv + sc.gammaln(v)
        sign = sign * sc.gammasgn(v)
    for v in dens:
        pole = is_nonpositive_integer(v, tol=1e-13)
        zero = zero | pole
        vv = np.where(pole, 0.5, v)
        logv = logv - sc.gammaln(vv)
        sign = sign * sc.gammasgn(vv)
    with np.errstate(over="ignore"):
        out = sign * np.exp(logv)
    return np.where(zero, 0.0, out)


def _series(a, b, c, z, ctrl, max_terms=None):
    """Direct summation of the Gauss series on 1-d arrays of equal length."""
    max_terms = ctrl.max_terms if max_terms is None else max_terms
    n = z.shape[0]
    total = np.ones(n)
    if n == 0:
        return total
    term = np.ones(n)
    streak = np.zeros(n, dtype=np.int64)
    idx = np.arange(n)
    a_, b_, c_, z_ = a.copy(), b.copy(), c.copy(), z.copy()
    tot = total.copy()
    k = 0
    while idx.size:
        if k >= max_terms:
            raise ConvergenceError(
                f"2F1 series not converged after {max_terms} terms "
                f"(worst z={float(np.max(np.abs(z_))):.6g})"
            )
        term = term * ((a_ + k) * (b_ + k) / ((c_ + k) * (k + 1.0))) * z_
        tot = tot + term
        small = np.abs(term) <= ctrl.rel_tol * np.abs(tot) + ctrl.abs_tol
        streak = np.where(small, streak + 1, 0)
        k += 1
        done = streak >= ctrl.tail_window
        if done.any():
            total[idx[done]] = tot[done]
            keep = ~done
            idx, a_, b_, c_, z_ = idx[keep], a_[keep], b_[keep], c_[keep], z_[keep]
            tot, term, streak = tot[keep], term[keep], streak[keep]
    return total


def _connection(a, b, c, z, ctrl):
    """z in (0.5, 1), c - a - b not an integer."""
    # the two halves partly cancel; sum each to a tighter tolerance
    ctrl = replace(ctrl, rel_tol=min(ctrl.rel_tol, 1e-14))
    s = c - a - b
    g1 = _gamma_ratio([c, s], [c - a, c - b])
    g2 = _gamma_ratio([c, -s], [a, b])
    f1 = _series(a, b, 1.0 - s, 1.0 - z, ctrl)
    f2 = _series(c - a, c - b, 1.0 + s, 1.0 - z, ctrl)
    with np.errstate(over="ignore", invalid="ignore"):
        return g1 * f1 + g2 * (1.0 - z) ** s * f2


def _unit_interval(a, b, c, z, ctrl):
    """F on 1-d arrays with 0 <= z < 1 (or terminating)."""
    out = np.empty_like(z)
    poly = is_nonpositive_integer(a) | is_nonpositive_integer(b)
    s = c - a - b
    integral = np.abs(s - np.round(s)) <= _INT_TOL
    direct = poly | (z <= 0.5) | (integral & (z <= 0.9))
    if direct.any():
        long_ = integral & ~poly & (z > 0.5)
        for mask, terms in ((direct & ~long_, None),
                            (direct & long_, max(ctrl.max_terms, _LONG_SUM_TERMS))):
            if mask.any():
                out[mask] = _series(a[mask], b[mask], c[mask], z[mask], ctrl, terms)
    conn = ~direct & ~integral
    if conn.any():
        out[conn] = _connection(a[conn], b[conn], c[conn], z[conn], ctrl)
    pert = ~direct & integral
    if pert.any():
        aa, bb, cc, zz = a[pert], b[pert], c[pert], z[pert]
        e = _RICHARDSON_EPS

        def sym(h):
            return 0.5 * (_connection(aa, bb + h, cc, zz, ctrl)
                          + _connection(aa, bb - h, cc, zz, ctrl))

        out[pert] = (4.0 * sym(e) - sym(2.0 * e)) / 3.0
    return out


def hyp2f1(a, b, c, z, ctrl: SeriesControl = DEFAULT_CONTROL):
    """Broadcasting Gauss hypergeometric function for real z <= 1.

    Parameters may be arrays; all inputs broadcast against each other.
    ``z = 1`` is accepted when ``c - a - b > 0`` (Gauss summation).
    """
    a, b, c, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, z)))
    shape = z.shape
    a, b, c, z = (v.ravel() for v in (a, b, c, z))
    if np.any(is_nonpositive_integer(c)):
        raise PoleError("2F1 denominator parameter c is a nonpositive integer")
    if np.any(~np.isfinite(z)):
        raise DomainError("2F1 argument must be finite")
    if np.any(z > 1.0):
        raise DomainError("2F1 argument must satisfy z <= 1")
    out = np.empty_like(z)
    poly = is_nonpositive_integer(a) | is_nonpositive_integer(b)

    at_one = (z == 1.0) & ~poly
    if at_one.any():
        s = c[at_one] - a[at_one] - b[at_one]
        if np.any(s <= 0):
            raise DomainError("2F1 at z=1 requires c - a - b > 0")
        out[at_one] = _gamma_ratio([c[at_one], s],
                                   [c[at_one] - a[at_one], c[at_one] - b[at_one]])

    near = poly | ((np.abs(z) <= 0.5) & ~at_one)
    if near.any():
        out[near] = _series(a[near], b[near], c[near], z[near], ctrl)

    upper = ~poly & (z > 0.5) & (z < 1.0)
    if upper.any():
        out[upper] = _unit_interval(a[upper], b[upper], c[upper], z[upper], ctrl)

    lower = ~poly & (z < -0.5)
    if lower.any():
        zl, bl = z[lower], b[lower]
        w = zl / (zl - 1.0)
        out[lower] = (1.0 - zl) ** (-bl) * _unit_interval(
            c[lower] - a[lower], bl, c[lower], w, ctrl)
    return out.reshape(shape)


def gauss_2f1(a: float, b: float, c: float, z: float,
              ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Scalar ``F(a, b; c; z)`` for ``z < 1`` (or ``z = 1`` with ``c - a - b > 0``)."""
    return float(hyp2f1(a, b, c, z, ctrl))


def gauss_value_at_one(a: float, b: float, c: float) -> float:
    """Gauss summation ``Gamma(c) Gamma(c-a-b) / (Gamma(c-a) Gamma(c-b))``."""
    if not c - a - b > 0:
        raise DomainError("Gauss summation requires c - a - b > 0")
    for v, name in ((c, "c"), (c - a, "c-a"), (c - b, "c-b")):
        if is_nonpositive_integer(v, tol=1e-14):
            raise PoleError(f"{name} is a nonpositive integer")
    return gamma(c) * gamma(c - a - b) / (gamma(c - a) * gamma(c - b))

"""Lauricella's hypergeometric function F_A^(n).

Three evaluation routes:

* :func:`fa_direct` sums the defining n-fold series diagonal by diagonal
  (total degree ascending); valid for ``sum |y_k| < 1``.
* :func:`fa_decomposed` sums the Burchnall-Chaundy type decomposition into
  products of one-variable 2F1 factors. Each factor whose argument is below
  -0.5 is Euler-transformed, which makes the outer series converge for any
  nonpositive arguments (geometrically, with ratio ``omega_p * omega_q`` per
  pair of variables, ``omega = y / (y - 1)``).
* :func:`fa_eval` is the vectorised production evaluator for nonpositive
  arguments. It uses the decomposition where the outer ratio is small and
  otherwise reduces one variable through the Euler integral

      F_A^(n)(a; b; c; y) = 1/B(b_j, c_j - b_j) int_0^1 t^(b_j-1) (1-t)^(c_j-b_j-1)
                            (1 - y_j t)^(-a) F_A^(n-1)(a; ...; y_i / (1 - y_j t)) dt

  with a graded composite Gauss rule (the integrand varies on the scale
  ``t ~ 1/|y_j|``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np
from scipy import special as sc

from .errors import ConvergenceError, DomainError, PoleError
from .specialfun import (
    DEFAULT_CONTROL,
    SeriesControl,
    gamma,
    hyp2f1,
    is_nonpositive_integer,
)

__all__ = [
    "FAParams",
    "BurchnallIndex",
    "burchnall_indices",
    "fa_direct",
    "fa_decomposed",
    "fa_eval",
    "fa_relation_residual",
    "lemma2_check",
    "fa_scaled_limit",
]

# outer-series ratio above which fa_eval switches to the integral reduction
SERIES_SWITCH = 0.5
KERNEL_MAX_WEIGHT = 60
_GJ_NODES = 20
_GL_NODES = 16
_CHUNK = 20_000
_BLOCK_BUDGET = 2_000_000


@dataclass(frozen=True)
class FAParams:
    a: float
    b: tuple
    c: tuple

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        if len(self.b) != len(self.c) or len(self.b) < 1:
            raise DomainError("b and c must have the same length n >= 1")
        if np.any(is_nonpositive_integer(self.c)):
            raise DomainError("no c_k may be a nonpositive integer")

    @property
    def n(self) -> int:
        return len(self.b)

    def shifted(self, da=0.0, db=None, dc=None) -> "FAParams":
        b = np.array(self.b) + (0.0 if db is None else np.asarray(db, float))
        c = np.array(self.c) + (0.0 if dc is None else np.asarray(dc, float))
        return FAParams(self.a + da, tuple(b), tuple(c))


# --------------------------------------------------------------------------
# Burchnall index bookkeeping
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _pair_slots(n: int):
    """Slot order of the indices m_{i,j}, 2 <= i <= j <= n.

    Slot l couples variables p = i-1 and q = j (1-based); returned 0-based.
    """
    return tuple((i - 2, j - 1) for i in range(2, n + 1) for j in range(i, n + 1))


@lru_cache(maxsize=None)
def _incidence(n: int):
    slots = _pair_slots(n)
    amat = np.zeros((len(slots), n))
    bmat = np.zeros((len(slots), n))
    for l, (p, q) in enumerate(slots):
        amat[l, p:] = 1.0        # A(k) collects every slot with p <= k
        bmat[l, p] = 1.0         # B(k) collects every slot touching k
        bmat[l, q] = 1.0
    return amat, bmat


@dataclass(frozen=True)
class BurchnallIndex:
    """One multi-index ``{m_{i,j} : 2 <= i <= j <= n}``."""

    n: int
    entries: tuple  # values in slot order of _pair_slots(n)

    def __post_init__(self):
        if len(self.entries) != len(_pair_slots(self.n)):
            raise DomainError("wrong number of entries for this n")
        if any(m < 0 for m in self.entries):
            raise DomainError("entries must be nonnegative")

    def m(self, i: int, j: int) -> int:
        return self.entries[_pair_slots(self.n).index((i - 2, j - 1))]

    def A(self, k: int) -> int:
        """``sum_{i=2}^{k+1} sum_{j=i}^{n} m_{i,j}`` (k is 1-based)."""
        return sum(self.m(i, j) for i in range(2, min(k + 1, self.n) + 1)
                   for j in range(i, self.n + 1))

    def B(self, k: int) -> int:
        """``sum_{i=2}^{k} m_{i,k} + sum_{i=k+1}^{n} m_{k+1,i}`` (k is 1-based)."""
        first = sum(self.m(i, k) for i in range(2, k + 1))
        second = sum(self.m(k + 1, i) for i in range(k + 1, self.n + 1)) if k < self.n else 0
        return first + second

    def mfact(self) -> float:
        return math.prod(math.factorial(m) for m in self.entries)

    @property
    def weight(self) -> int:
        return sum(self.entries)


@lru_cache(maxsize=512)
def _compositions(slots: int, weight: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``slots`` summing to ``weight``,
    in lexicographic order."""
    if slots == 0:
        return np.zeros((1 if weight == 0 else 0, 0), dtype=np.int64)
    rows = []
    for bars in itertools.combinations(range(weight + slots - 1), slots - 1):
        prev = -1
        row = []
        for bar in bars:
            row.append(bar - prev - 1)
            prev = bar
        row.append(weight + slots - 1 - prev - 1)
        rows.append(row)
    out = np.array(rows, dtype=np.int64).reshape(-1, slots)
    order = np.lexsort(out.T[::-1])
    out = out[order]
    out.setflags(write=False)
    return out


def burchnall_indices(n: int, weight: int) -> Iterator[BurchnallIndex]:
    """Indices of total weight ``weight``, lexicographic within the weight."""
    for row in _compositions(len(_pair_slots(n)), weight):
        yield BurchnallIndex(n, tuple(int(v) for v in row))


# --------------------------------------------------------------------------
# direct series
# --------------------------------------------------------------------------

def _binomial_convolve(lu, su, lv, sv):
    """w[d] = sum_m C(d, m) u[m] v[d-m] with u, v and w in (log|.|, sign) form."""
    depth = len(lu)
    d = np.arange(depth)[:, None]
    m = np.arange(depth)[None, :]
    valid = m <= d
    dm = np.where(valid, d - m, 0)
    logc = sc.gammaln(d + 1.0) - sc.gammaln(m + 1.0) - sc.gammaln(dm + 1.0)
    with np.errstate(invalid="ignore"):
        ex = np.where(valid, logc + lu[None, :] + lv[dm], -np.inf)
    sg = np.where(valid, su[None, :] * sv[dm], 0.0)
    top = np.max(ex, axis=1)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(invalid="ignore"):
        acc = np.sum(sg * np.exp(ex - top[:, None]), axis=1)
    with np.errstate(divide="ignore"):
        return top + np.log(np.abs(acc)), np.sign(acc)


def _log_seq(bk, ck, yk, depth):
    """(log|.|, sign) of (b)_m / (c)_m y^m for m < depth."""
    m = np.arange(depth)
    sb, lb = _log_poch(bk, m)
    sc_, lc = _log_poch(ck, m)
    with np.errstate(divide="ignore"):
        ly = m * np.log(abs(yk)) if yk != 0 else np.where(m == 0, 0.0, -np.inf)
    sy = np.where(m % 2 == 1, np.sign(yk), 1.0) if yk != 0 else np.where(m == 0, 1.0, 0.0)
    with np.errstate(invalid="ignore"):
        return np.where(sb == 0, -np.inf, lb - lc + ly), sb * sc_ * sy


def _check_y(p: FAParams, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (p.n,):
        raise DomainError(f"expected {p.n} arguments, got shape {y.shape}")
    return y


def fa_direct(p: FAParams, y: Sequence[float], ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Defining n-fold series, summed over diagonals of equal total degree.

    Requires ``sum |y_k| < 1``. The diagonal sums are computed as binomial
    convolutions of ``(b_k)_m / (c_k)_m y_k^m``, so each diagonal costs O(n d).
    """
    y = _check_y(p, y)
    if np.sum(np.abs(y)) >= 1.0:
        raise DomainError("fa_direct requires sum |y_k| < 1")
    if not np.any(y):
        return 1.0
    depth = 64
    while True:
        m = np.arange(depth)
        ld = sd = None
        for bk, ck, yk in zip(p.b, p.c, y):
            lu, su = _log_seq(bk, ck, yk, depth)
            if ld is None:
                ld, sd = lu, su
            else:
                ld, sd = _binomial_convolve(ld, sd, lu, su)
        # T_d = (a)_d / d! * diag[d]
        sa, la = _log_poch(p.a, m)
        with np.errstate(invalid="ignore"):
            terms = sa * sd * np.exp(la - sc.gammaln(m + 1.0) + ld)
        terms = np.nan_to_num(terms)
        partial = np.cumsum(terms)
        small = np.abs(terms) <= ctrl.rel_tol * np.abs(partial) + ctrl.abs_tol
        streak = 0
        for d in range(1, depth):
            streak = streak + 1 if small[d] else 0
            if streak >= ctrl.tail_window:
                return float(partial[d])
        if depth >= min(ctrl.max_terms, 1024):
            raise ConvergenceError(f"fa_direct: no convergence within {depth} diagonals")
        depth *= 2


# --------------------------------------------------------------------------
# decomposition engine
# --------------------------------------------------------------------------

def _log_poch(lam: float, p: np.ndarray):
    """(sign, log|(lam)_p|) for integer arrays p; sign 0 marks exact zeros."""
    p = np.asarray(p, dtype=float)
    if lam > 0:
        return np.ones_like(p), sc.gammaln(lam + p) - sc.gammaln(lam)
    v = sc.poch(lam, p)
    with np.errstate(divide="ignore"):
        return np.sign(v), np.log(np.abs(v))


def _level_blocks(n: int, npts: int, max_weight: int):
    """Yield (weights, index matrix) blocks of consecutive levels."""
    slots = len(_pair_slots(n))
    w = 0
    span = 1
    while w <= max_weight:
        hi = min(max_weight + 1, w + span)
        mats = [_compositions(slots, k) for k in range(w, hi)]
        wts = np.concatenate([np.full(len(mm), k) for k, mm in zip(range(w, hi), mats)])
        yield w, hi, wts, np.concatenate(mats, axis=0)
        w = hi
        per_level = len(mats[-1])
        if slots == 1:
            span = int(min(256, max(1, _BLOCK_BUDGET // max(1, npts)), 2 * span))


def _decomposition_sum(a, b, c, y, ctrl, max_weight):
    """Outer Burchnall sum at points y of shape (P, n), Euler-transforming
    every factor whose argument is below -0.5."""
    npts, n = y.shape
    amat, bmat = _incidence(n)
    trans = y < -0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.where(trans, y / (y - 1.0), y)
    pref = np.ones(npts)
    for k in range(n):
        pref = pref * np.where(trans[:, k], (1.0 - y[:, k]) ** (-b[k]), 1.0)
    with np.errstate(divide="ignore"):
        logz = np.log(np.abs(omega))
    zsign = np.where(trans, -1.0, np.sign(y))
    # the remaining tail is about term / (1 - rate); tighten accordingly
    tol = ctrl.rel_tol * np.clip(1.0 - _outer_rate(y), 1e-4, 1.0)

    total = np.zeros(npts)
    streak = np.zeros(npts, dtype=np.int64)
    active = np.arange(npts)
    for lo, hi, wts, mm in _level_blocks(n, npts, max_weight):
        A = mm @ amat
        B = mm @ bmat
        sgn, logc = _log_poch(a, wts)
        logc = logc - np.sum(sc.gammaln(mm + 1.0), axis=1)
        for k in range(n):
            s1, l1 = _log_poch(b[k], B[:, k])
            s2, l2 = _log_poch(c[k], B[:, k])
            sgn = sgn * s1 * s2
            logc = logc + l1 - l2
        tr = trans[active]
        om = omega[active]
        yy = y[active]
        lz = logz[active]
        zs = zsign[active]
        logt = np.broadcast_to(logc[:, None], (len(wts), len(active))).copy()
        sgnt = np.broadcast_to(sgn[:, None], logt.shape).copy()
        for k in range(n):
            Bk = B[:, k][:, None]
            Ak = A[:, k][:, None]
            trk = tr[:, k][None, :]
            pa = np.where(trk, c[k] - a + Bk - Ak, a + Ak)
            fk = hyp2f1(pa, b[k] + Bk, c[k] + Bk,
                        np.where(trk, om[:, k][None, :], yy[:, k][None, :]), ctrl)
            with np.errstate(invalid="ignore"):
                powlog = np.where(Bk == 0, 0.0, Bk * lz[:, k][None, :])
            powsgn = np.where(Bk == 0, 1.0, zs[:, k][None, :] ** Bk)
            with np.errstate(divide="ignore"):
                logt = logt + powlog + np.log(np.abs(fk))
            sgnt = sgnt * powsgn * np.sign(fk)
        terms = sgnt * np.exp(logt)
        terms = np.nan_to_num(terms, nan=0.0)
        # per-level sums, in ascending level order
        starts = np.searchsorted(wts, np.arange(lo, hi))
        levels = np.add.reduceat(terms, starts, axis=0)
        done = np.zeros(len(active), dtype=bool)
        part = total[active]
        st = streak[active]
        tol_a = tol[active]
        for row in levels:
            part = np.where(done, part, part + row)
            small = np.abs(row) <= tol_a * np.abs(part) + ctrl.abs_tol
            st = np.where(done, st, np.where(small, st + 1, 0))
            done |= st >= ctrl.tail_window
        total[active] = part
        streak[active] = st
        active = active[~done]
        if active.size == 0:
            return pref * total
    raise ConvergenceError(
        f"decomposition series not converged by weight {max_weight} "
        f"at {active.size} point(s)"
    )


def fa_decomposed(p: FAParams, y: Sequence[float], ctrl: SeriesControl = DEFAULT_CONTROL,
                  max_weight: int | None = None) -> float:
    """F_A^(n) through the decomposition into products of 2F1 factors (n >= 2).

    Factors with ``y_k < -0.5`` are evaluated in Euler-transformed form, so
    any ``y_k < 1`` is admissible. Levels (total index weight) are summed in
    ascending order and the series stops on the usual tail criterion.
    """
    y = _check_y(p, y)
    if p.n < 2:
        raise DomainError("fa_decomposed needs n >= 2")
    if np.any(y >= 1.0):
        raise DomainError("fa_decomposed requires every y_k < 1")
    mw = ctrl.max_terms if max_weight is None else max_weight
    return float(_decomposition_sum(p.a, p.b, p.c, y[None, :], ctrl, mw)[0])


# --------------------------------------------------------------------------
# production evaluator for nonpositive arguments
# --------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _gauss_jacobi(npts: int, alpha: float, beta: float):
    x, w = sc.roots_jacobi(npts, alpha, beta)
    return x, w


@lru_cache(maxsize=8)
def _gauss_legendre(npts: int):
    return np.polynomial.legendre.leggauss(npts)


def _graded_rule(b: float, c: float, tau: np.ndarray):
    """Nodes/weights on [0, 1] for weight t^(b-1) (1-t)^(c-b-1), graded
    geometrically between tau (per point) and 1/2.

    Returns t, 1 - t and w, each of shape (P, nodes).
    """
    npts = tau.shape[0]
    levels = int(np.ceil(np.log2(0.5 / tau.min()))) if tau.min() < 0.5 else 0
    xj, wj = _gauss_jacobi(_GJ_NODES, 0.0, b - 1.0)
    xl, wl = _gauss_legendre(_GL_NODES)
    ts, us, ws = [], [], []
    # [0, tau]: t = tau (1 + x) / 2, weight (1+x)^(b-1) absorbed
    t = tau[:, None] * (1.0 + xj[None, :]) / 2.0
    ts.append(t)
    us.append(1.0 - t)
    ws.append(wj[None, :] * (tau[:, None] / 2.0) ** b * (1.0 - t) ** (c - b - 1.0))
    if levels:
        ratio = (0.5 / tau) ** (1.0 / levels)
        for i in range(levels):
            lo = tau * ratio ** i
            hi = tau * ratio ** (i + 1)
            mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
            t = mid[:, None] + half[:, None] * xl[None, :]
            ts.append(t)
            us.append(1.0 - t)
            ws.append(wl[None, :] * half[:, None] * t ** (b - 1.0) * (1.0 - t) ** (c - b - 1.0))
    # [1/2, 1]: 1 - t = (1 - x) / 4, weight (1-x)^(c-b-1) absorbed
    xk, wk = _gauss_jacobi(_GJ_NODES, c - b - 1.0, 0.0)
    u = np.broadcast_to((1.0 - xk[None, :]) / 4.0, (npts, _GJ_NODES))
    t = 1.0 - u
    ts.append(t)
    us.append(u)
    ws.append(np.broadcast_to(wk[None, :] * 0.25 ** (c - b) * t ** (b - 1.0), (npts, _GJ_NODES)))
    norm = math.exp(sc.gammaln(c) - sc.gammaln(b) - sc.gammaln(c - b))
    return (np.concatenate(ts, axis=1), np.concatenate(us, axis=1),
            norm * np.concatenate(ws, axis=1))


def _fa_integral(a, b, c, y, ctrl, switch, max_weight):
    npts, n = y.shape
    admissible = [k for k in range(n) if c[k] > b[k] > 0]
    if not admissible:
        raise DomainError("integral reduction needs some c_k > b_k > 0")
    j = max(admissible, key=lambda k: float(np.max(np.abs(y[:, k]))))
    rest = [k for k in range(n) if k != j]
    b_r = tuple(b[k] for k in rest)
    c_r = tuple(c[k] for k in rest)
    out = np.empty(npts)
    for s0 in range(0, npts, _CHUNK):
        yy = y[s0:s0 + _CHUNK]
        with np.errstate(divide="ignore"):
            tau = np.minimum(0.5, 1.0 / np.abs(yy[:, j]))
        t, _, w = _graded_rule(b[j], c[j], tau)
        s = 1.0 - yy[:, j][:, None] * t
        inner_y = yy[:, rest][:, None, :] / s[:, :, None]
        inner = fa_eval(a, b_r, c_r, inner_y.reshape(-1, n - 1), ctrl,
                        max_weight=max_weight, switch=switch).reshape(s.shape)
        out[s0:s0 + _CHUNK] = np.sum(w * s ** (-a) * inner, axis=1)
    return out


def _outer_rate(y):
    """Geometric ratio of the (transformed) outer series, per point."""
    trans = y < -0.5
    rho = np.where(trans, y / (y - 1.0), np.abs(y))
    n = y.shape[1]
    rate = np.zeros(y.shape[0])
    for p, q in _pair_slots(n):
        rate = np.maximum(rate, rho[:, p] * rho[:, q])
    return rate


def fa_eval(a: float, b: Sequence[float], c: Sequence[float], y,
            ctrl: SeriesControl = DEFAULT_CONTROL, *,
            max_weight: int = KERNEL_MAX_WEIGHT, switch: float = SERIES_SWITCH):
    """Vectorised F_A^(n)(a; b; c; y) for nonpositive arguments.

    ``y`` has shape ``(..., n)``; the result has shape ``y.shape[:-1]``.
    """
    b = tuple(float(v) for v in b)
    c = tuple(float(v) for v in c)
    y = np.asarray(y, dtype=float)
    n = len(b)
    if y.shape[-1:] != (n,):
        raise DomainError("last axis of y must have length n")
    shape = y.shape[:-1]
    y = y.reshape(-1, n)
    if np.any(y > 0):
        raise DomainError("fa_eval is restricted to nonpositive arguments")
    if n == 0:
        return np.ones(shape)
    if n == 1:
        return hyp2f1(a, b[0], c[0], y[:, 0], ctrl).reshape(shape)
    out = np.empty(y.shape[0])
    rate = _outer_rate(y)
    series = rate <= switch
    if series.any():
        out[series] = _decomposition_sum(a, b, c, y[series], ctrl, max_weight)
    if (~series).any():
        out[~series] = _fa_integral(a, b, c, y[~series], ctrl, switch, max_weight)
    return out.reshape(shape)


# --------------------------------------------------------------------------
# identities
# --------------------------------------------------------------------------

_RELATIONS = ("derivative_k", "contiguous_a", "contiguous_c_k")


def _fa_any(p: FAParams, y, ctrl):
    if np.sum(np.abs(y)) < 1.0:
        return fa_direct(p, y, ctrl)
    if p.n == 1:
        return float(hyp2f1(p.a, p.b[0], p.c[0], y[0], ctrl))
    return fa_decomposed(p, y, ctrl)


def fa_relation_residual(kind: str, p: FAParams, y, k: int,
                         ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Normalised residual ``|LHS - RHS| / max(1, |RHS|)`` of a derivative or
    contiguous relation. ``k`` is 1-based."""
    if kind not in _RELATIONS:
        raise DomainError(f"unknown relation {kind!r}; expected one of {_RELATIONS}")
    y = _check_y(p, y)
    n = p.n
    e = np.eye(n)

    def up(i):
        return p.shifted(1.0, e[i], e[i])

    if kind == "derivative_k":
        i = k - 1
        h = 1e-6 * max(1.0, abs(y[i]))
        lhs = (_fa_any(p, y + h * e[i], ctrl) - _fa_any(p, y - h * e[i], ctrl)) / (2 * h)
        rhs = p.a * p.b[i] / p.c[i] * _fa_any(up(i), y, ctrl)
    elif kind == "contiguous_a":
        lhs = sum(p.b[i] / p.c[i] * y[i] * _fa_any(up(i), y, ctrl) for i in range(n))
        rhs = _fa_any(p.shifted(1.0), y, ctrl) - _fa_any(p, y, ctrl)
    else:
        i = k - 1
        lhs = (p.a * p.b[i] / ((p.c[i] - 1.0) * p.c[i]) * y[i]
               * _fa_any(up(i), y, ctrl))
        rhs = _fa_any(p.shifted(0.0, None, -e[i]), y, ctrl) - _fa_any(p, y, ctrl)
    return abs(lhs - rhs) / max(1.0, abs(rhs))


# Gregory end corrections: sum_{k>=N} f(k) = int_N^inf f + f(N)/2 + sum_j g_j D^j f(N)
_GREGORY = (-1.0 / 12, 1.0 / 24, -19.0 / 720, 3.0 / 160, -863.0 / 60480)


def _lgamma_diff(u, v, d=None):
    """log|Gamma(u)| - log|Gamma(v)| without cancellation for large u, v.

    ``d = u - v`` may be passed when it is known more accurately than the
    rounded difference.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    uu, vv, dd = np.broadcast_arrays(u, v, u - v if d is None else np.asarray(d, float))
    big = (uu >= 10.0) & (vv >= 10.0)
    out = np.empty(uu.shape)
    small = ~big
    if small.any():
        out[small] = sc.gammaln(uu[small]) - sc.gammaln(vv[small])
    if big.all():
        ub, vb, d = uu.ravel(), vv.ravel(), dd.ravel()
    else:
        ub, vb, d = uu[big], vv[big], dd[big]

    def corr(z):
        z2 = z * z
        return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z

    ratio = d / ub
    with np.errstate(divide="ignore"):
        logvu = np.where(np.abs(ratio) < 0.5, np.log1p(-ratio), np.log(vb / ub))
    with np.errstate(over="ignore"):
        res = d * np.log(ub) - (vb - 0.5) * logvu - d + corr(ub) - corr(vb)
    if big.all():
        return res.reshape(out.shape)
    out[big] = res
    return out


def _lbeta(x, y):
    """log B(x, y) for positive x, y, stable when either argument is huge."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = np.empty(x.shape)
    big = (x >= 10.0) & (y >= 10.0)
    s = x + y
    xb, yb, sb = x[big], y[big], s[big]

    def corr(z):
        with np.errstate(over="ignore"):
            z2 = z * z
            return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z


    def log_frac(u, other):
        # log(u / (u + other)) without rounding the ratio near 1
        f = u / (u + other)
        with np.errstate(divide="ignore"):
            return np.where(f < 0.5, np.log(f), np.log1p(-other / (u + other)))

    out[big] = (0.5 * math.log(2.0 * math.pi) + (xb - 0.5) * log_frac(xb, yb)
                + (yb - 0.5) * log_frac(yb, xb) - 0.5 * np.log(sb)
                + corr(xb) + corr(yb) - corr(sb))
    # one small argument: Gamma(small) + ratio of the two large ones
    rest = ~big
    lo = np.minimum(x[rest], y[rest])
    hi = np.maximum(x[rest], y[rest])
    out[rest] = sc.gammaln(lo) + _lgamma_diff(hi, hi + lo, -lo)
    return out


def _lemma_summand(n, a, b):
    """Summand of the summation-identity multi-sum as a function of real indices,
    written with paired Gamma ratios and Beta functions so that it stays
    accurate when some indices are astronomically large."""
    if n == 2:
        b1, b2 = b
        log_k = float(sc.gammaln(a) + sc.gammaln(a - b1) + sc.gammaln(a - b2)
                      - sc.gammaln(b1) - sc.gammaln(b2))

        def term(prefix, x):
            m = np.broadcast_to(x[None, :], (prefix.shape[0], len(x)))
            # Gamma(b1+m) Gamma(b2+m) / (Gamma(m+1) Gamma(a+m))
            return np.exp(log_k + _lgamma_diff(b1 + m, m + 1.0, b1 - 1.0)
                          + _lgamma_diff(b2 + m, a + m, b2 - a))
        return term
    b1, b2, b3 = b
    beta = b2 + b3
    log_k = float(2 * sc.gammaln(a) + sc.gammaln(a - b1)
                  - sc.gammaln(b1) - sc.gammaln(b2) - sc.gammaln(b3))

    def term(prefix, x):
        p, q = prefix[:, 0], prefix[:, 1]
        N = p + q
        logv = (log_k
                + _lgamma_diff(b1 + N, a + N, b1 - a)
                + _lgamma_diff(a - b2 + q, q + 1.0, a - b2 - 1.0)
                + _lgamma_diff(a - b3 + p, p + 1.0, a - b3 - 1.0))[:, None]
        p, q, N = p[:, None], q[:, None], N[:, None]
        s = x[None, :]
        # Gamma(b2+p+s) Gamma(b3+q+s) / (Gamma(s+1) Gamma(a+N+s)) three ways:
        # ratios paired with offset q, ratios paired with offset p, or a
        # Beta quotient. Each is free of cancellation when its index (q, p
        # or s) is the smallest, so pick by that.
        p, q, s = np.broadcast_arrays(p, q, s)
        N = p + q
        pick = np.argmin(np.stack((q, p, s)), axis=0)
        g = np.empty(pick.shape)
        m = pick == 0
        g[m] = (_lgamma_diff(b2 + p[m] + s[m], a + N[m] + s[m], b2 - a - q[m])
                + _lgamma_diff(b3 + q[m] + s[m], s[m] + 1.0, b3 + q[m] - 1.0))
        m = pick == 1
        g[m] = (_lgamma_diff(b2 + p[m] + s[m], s[m] + 1.0, b2 + p[m] - 1.0)
                + _lgamma_diff(b3 + q[m] + s[m], a + N[m] + s[m], b3 - a - p[m]))
        m = pick == 2
        g[m] = (_lbeta(b2 + p[m] + s[m], b3 + q[m] + s[m]) - _lbeta(a + N[m] + s[m], s[m] + 1.0)
                + _lgamma_diff(beta + N[m] + 2 * s[m], a + 1.0 + N[m] + 2 * s[m], beta - a - 1.0))
        logv = logv + g
        return np.exp(logv)
    return term


@lru_cache(maxsize=8)
def _tail_rule(step: float = 0.1, span: float = 3.5):
    """tanh-sinh nodes v in (0, 1) with weights, for x = cut / v."""
    s = np.arange(-span, span + step / 2, step)
    u = 0.5 * np.pi * np.sinh(s)
    v = 1.0 / (1.0 + np.exp(-2.0 * u))
    dv = step * 0.25 * np.pi * np.cosh(s) / np.cosh(u) ** 2
    keep = v > 1e-200
    return v[keep], dv[keep]


_JACOBI_TAIL = 24


def _tail_nodes(cut: int, decay):
    """Nodes x on (cut, inf) and weights for the remainder integral.

    Without a decay hint a tanh-sinh rule in ``v = cut / x`` is used. With a
    hint ``f(x) ~ x^-decay`` the factor ``v^(decay - 2)`` goes into a
    Gauss-Jacobi weight instead.
    """
    if decay is None:
        v, dv = _tail_rule()
        return cut / v, dv * cut / v ** 2
    xg, wg = _gauss_jacobi(_JACOBI_TAIL, 0.0, decay - 2.0)
    v = 0.5 * (1.0 + xg)
    return cut / v, wg * 0.5 ** (decay - 1.0) * cut * v ** (-decay)


def _nested_sum(term, decays, cut: int, prefix: np.ndarray) -> np.ndarray:
    """Sum an analytic summand over the trailing nonnegative indices.

    ``decays`` has one entry per remaining index (None or a known decay
    exponent). Each index is summed directly below ``cut``; the remainder
    is the integral of the partial function continued to real indices plus
    Gregory end corrections. ``prefix`` holds the fixed indices, shape (P, d);
    ``term(prefix, x)`` evaluates the summand on the outer product with the
    last index values ``x``.
    """
    xs, wx = _tail_nodes(cut, decays[0])
    nd = cut + len(_GREGORY) + 1
    grid = np.concatenate((np.arange(nd, dtype=float), xs))
    npre = prefix.shape[0]
    if len(decays) == 1:
        vals = term(prefix, grid)
    else:
        ext = np.concatenate(
            (np.repeat(prefix, len(grid), axis=0), np.tile(grid, npre)[:, None]), axis=1)
        vals = _nested_sum(term, decays[1:], cut, ext).reshape(npre, len(grid))
    direct = vals[:, :cut].sum(axis=1)
    head = vals[:, cut:nd]
    corr = 0.5 * head[:, 0]
    for j, g in enumerate(_GREGORY, start=1):
        corr = corr + g * np.diff(head, n=j, axis=1)[:, 0]
    return direct + corr + vals[:, nd:] @ wx


def _lemma_levels(n, a, b, ctrl):
    """Plain level-by-level summation of the summation-identity multi-sum."""
    amat, bmat = _incidence(n)
    slots = len(_pair_slots(n))
    total = 0.0
    streak = 0
    for w in range(ctrl.max_terms):
        mm = _compositions(slots, w)
        A = mm @ amat
        B = mm @ bmat
        sgn, logv = _log_poch(a, np.full(len(mm), w))
        logv = logv - np.sum(sc.gammaln(mm + 1.0), axis=1)
        for k in range(n):
            s1, l1 = _log_poch(b[k], B[:, k])
            s2, l2 = _log_poch(a, A[:, k])
            arg = a - b[k] + A[:, k] - B[:, k]
            if np.any(is_nonpositive_integer(arg)):
                raise PoleError("Gamma pole inside a summation-identity term")
            sgn = sgn * s1 * s2 * sc.gammasgn(arg)
            logv = logv + l1 - l2 + sc.gammaln(arg)
        with np.errstate(invalid="ignore"):
            level = float(np.sum(np.where(sgn == 0, 0.0, sgn * np.exp(logv))))
        total += level
        streak = streak + 1 if abs(level) <= ctrl.rel_tol * abs(total) + ctrl.abs_tol else 0
        if streak >= ctrl.tail_window:
            return total
    raise ConvergenceError("summation-identity multi-sum not converged")


def lemma2_check(n: int, a: float, b: Sequence[float],
                 ctrl: SeriesControl = DEFAULT_CONTROL, cut: int = 12):
    """Both sides of the summation formula over Burchnall indices.

    Returns ``(lhs, rhs)`` with ``rhs = Gamma(a - sum b) Gamma(a)^(n-1)``.

    The left-hand multi-sum converges only algebraically (like
    ``W^-(1 + a - sum b)`` in the total weight W), far too slowly for plain
    summation. For n = 2, 3 with every ``b_k > 0`` the sum is taken index by index: terms below ``cut`` are
    added directly and each remainder is the integral of the summand,
    continued to real indices, plus Gregory end corrections. Otherwise the
    levels are summed directly with the ``ctrl`` tail criterion.
    """
    b = tuple(float(v) for v in b)
    if n < 2 or len(b) != n:
        raise DomainError("need n >= 2 and len(b) == n")
    if is_nonpositive_integer(a):
        raise DomainError("a must not be a nonpositive integer")
    if not a - sum(b) > 0:
        raise DomainError("need a - sum(b) > 0")
    rhs = gamma(a - sum(b)) * gamma(a) ** (n - 1)
    if n > 3 or min(b) <= 0 or a <= 0:
        return _lemma_levels(n, a, b, ctrl), rhs
    term = _lemma_summand(n, a, b)
    decays = (None,) * len(_pair_slots(n))
    lhs = float(_nested_sum(term, decays, cut, np.zeros((1, 0)))[0])
    return lhs, rhs


def fa_scaled_limit(p: FAParams, y: Sequence[float], ctrl: SeriesControl = DEFAULT_CONTROL,
                    method: str = "auto") -> float:
    """``prod y_k^(-b_k) F_A^(n)(a; b; c; 1 - 1/y_1, ..., 1 - 1/y_n)`` for 0 < y_k <= 1.

    As all ``y_k -> 0`` this tends to
    ``Gamma(a - sum b) / Gamma(a) * prod Gamma(c_k) / Gamma(c_k - b_k)``.
    ``method`` is ``"decomposed"``, ``"integral"`` or ``"auto"``.
    """
    y = _check_y(p, y)
    if np.any(y <= 0) or np.any(y > 1):
        raise DomainError("fa_scaled_limit needs 0 < y_k <= 1")
    args = 1.0 - 1.0 / y
    scale = float(np.prod(y ** (-np.array(p.b))))
    if p.n == 1:
        return scale * float(hyp2f1(p.a, p.b[0], p.c[0], args[0], ctrl))
    if method == "auto":
        method = "decomposed" if _outer_rate(args[None, :])[0] < 0.999 else "integral"
    if method == "decomposed":
        return scale * fa_decomposed(p, args, ctrl)
    if method == "integral":
        val = fa_eval(p.a, p.b, p.c, args[None, :], ctrl, max_weight=ctrl.max_terms)
        return scale * float(val[0])
    raise DomainError(f"unknown method {method!r}")

"""Fundamental solution of the singular elliptic operator and its layer kernels.

The operator is

    H u = sum_i u_{x_i x_i} + sum_{k<=n} (2 alpha_k / x_k) u_{x_k}

in the octant ``x_1, ..., x_n > 0`` of R^m. The fundamental solution used
throughout is

    q(xi; x) = kappa (xi x)^(1-2alpha) r^(-2 abar) F_A^(n)(abar; 1-alpha; 2-2alpha; sigma),
    sigma_k = -4 xi_k x_k / r^2.

``sigma_k`` is unbounded below, so every evaluation goes through
:func:`singpot.lauricella.fa_eval`, which Euler-transforms each inner
factor to ``omega_k = 4 xi_k x_k / r_k^2`` in [0, 1). The raw series forms
are kept as ``*_series`` functions for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateError, DiagonalError, DomainError
from .lauricella import FAParams, fa_direct, fa_eval
from .specialfun import DEFAULT_CONTROL, SeriesControl

__all__ = [
    "SingularParams",
    "KernelGeometry",
    "kernel_geometry",
    "q_n",
    "q_n_series",
    "q_gradient",
    "ScalarField",
    "conormal",
    "conormal_log",
    "dl_parts",
    "dl_kernel",
    "flat_normal_limit",
    "pde_residual",
]


@dataclass(frozen=True)
class SingularParams:
    m: int
    alpha: tuple

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if int(self.m) != self.m or self.m < 3:
            raise DomainError("space dimension m must be an integer >= 3")
        if not 1 <= len(self.alpha) <= self.m:
            raise DomainError("need 1 <= n <= m singular coefficients")
        for a in self.alpha:
            if not 0.0 < 2.0 * a < 1.0:
                raise DomainError(f"each alpha_k must satisfy 0 < 2 alpha_k < 1, got {a}")

    @property
    def n(self) -> int:
        return len(self.alpha)

    @property
    def alpha_arr(self) -> np.ndarray:
        return np.array(self.alpha)

    @property
    def alpha_bar(self) -> float:
        return (self.m - 2) / 2.0 + sum(1.0 - a for a in self.alpha)

    @property
    def kappa(self) -> float:
        ab = self.alpha_bar
        k = 2.0 ** (2 * ab - self.m) * math.gamma(ab) / math.pi ** (self.m / 2.0)
        for a in self.alpha:
            k *= math.gamma(1.0 - a) / math.gamma(2.0 - 2.0 * a)
        return k

    # hypergeometric parameter sets used by the kernels
    @property
    def b(self) -> tuple:
        return tuple(1.0 - a for a in self.alpha)

    @property
    def c(self) -> tuple:
        return tuple(2.0 - 2.0 * a for a in self.alpha)

    def c_lowered(self, k: int) -> tuple:
        """``c`` with the k-th entry (0-based) replaced by 1 - 2 alpha_k."""
        c = list(self.c)
        c[k] = 1.0 - 2.0 * self.alpha[k]
        return tuple(c)


@dataclass(frozen=True)
class KernelGeometry:
    """Distances and hypergeometric arguments for a batch of point pairs.

    All fields are arrays over the batch shape; per-variable fields carry a
    trailing axis of length n.
    """

    r: np.ndarray
    r_k: np.ndarray
    sigma: np.ndarray
    omega: np.ndarray
    weight_xi: np.ndarray   # xi^(1-2alpha)
    weight_x: np.ndarray    # x^(1-2alpha)
    X: np.ndarray           # X_k = |x - xi| with xi_k set to 0

    @property
    def weight_product(self) -> np.ndarray:
        return self.weight_xi * self.weight_x

    def r_weight(self, sp: SingularParams) -> np.ndarray:
        return np.prod(self.r_k ** (2.0 - 2.0 * sp.alpha_arr), axis=-1)


def _as_points(p, m):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != m:
        raise DomainError(f"points must have {m} coordinates, got shape {p.shape}")
    return p


def kernel_geometry(xi, x, sp: SingularParams, *, allow_diagonal=False) -> KernelGeometry:
    xi = _as_points(xi, sp.m)
    x = _as_points(x, sp.m)
    n = sp.n
    if np.any(xi[..., :n] < 0) or np.any(x[..., :n] < 0):
        raise DomainError("points must lie in the closed octant x_1..x_n >= 0")
    d = x - xi
    r2 = np.sum(d * d, axis=-1)
    prod = xi[..., :n] * x[..., :n]
    rk2 = r2[..., None] + 4.0 * prod
    if not allow_diagonal:
        if np.any(r2 == 0.0):
            raise DiagonalError("coincident points: the kernel is singular at x = xi")
        if np.any(rk2 == 0.0):
            raise DegenerateError("some r_k vanishes")
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = -4.0 * prod / r2[..., None]
        omega = 4.0 * prod / rk2
    a = sp.alpha_arr
    geo = KernelGeometry(
        r=np.sqrt(r2),
        r_k=np.sqrt(rk2),
        sigma=sigma,
        omega=omega,
        weight_xi=np.prod(xi[..., :n] ** (1.0 - 2.0 * a), axis=-1),
        weight_x=np.prod(x[..., :n] ** (1.0 - 2.0 * a), axis=-1),
        X=np.sqrt(np.maximum(r2[..., None] - d[..., :n] ** 2 + x[..., :n] ** 2, 0.0)),
    )
    if not allow_diagonal:
        assert np.all(geo.sigma <= 0.0) and np.all((geo.omega >= 0) & (geo.omega < 1.0))
        assert np.all(geo.r_k >= geo.r[..., None])
    return geo


def _fa(sp, a, c, sigma, ctrl):
    return fa_eval(a, sp.b, c, sigma, ctrl)


def q_n(xi, x, sp: SingularParams, ctrl: SeriesControl = DEFAULT_CONTROL):
    """Fundamental solution q(xi; x); broadcasts over leading axes."""
    g = kernel_geometry(xi, x, sp)
    f = _fa(sp, sp.alpha_bar, sp.c, g.sigma, ctrl)
    return sp.kappa * g.weight_product * g.r ** (-2.0 * sp.alpha_bar) * f


def q_n_series(xi, x, sp: SingularParams, ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """q from the raw F_A series (valid only when sum |sigma_k| < 1)."""
    g = kernel_geometry(xi, x, sp)
    p = FAParams(sp.alpha_bar, sp.b, sp.c)
    return float(sp.kappa * g.weight_product * g.r ** (-2.0 * sp.alpha_bar)
                 * fa_direct(p, g.sigma, ctrl))


def q_gradient(xi, x, sp: SingularParams, ctrl: SeriesControl = DEFAULT_CONTROL,
               wrt: str = "xi"):
    """Gradient of q with respect to ``xi`` (default) or ``x``.

    d q / d xi_i = kappa P r^(-2 abar) [ 2 abar (x_i - xi_i) / r^2 F_A(abar + 1)
                   + [i <= n] (1 - 2 alpha_i) F_A(c_i -> 1 - 2 alpha_i) / xi_i ]
    with ``P = (xi x)^(1-2alpha)``.
    """
    if wrt == "x":
        return q_gradient(x, xi, sp, ctrl, wrt="xi")
    xi = _as_points(xi, sp.m)
    x = _as_points(x, sp.m)
    g = kernel_geometry(xi, x, sp)
    ab = sp.alpha_bar
    base = sp.kappa * g.weight_product * g.r ** (-2.0 * ab)
    f_up = _fa(sp, ab + 1.0, sp.c, g.sigma, ctrl)
    grad = (2.0 * ab * base * f_up / g.r ** 2)[..., None] * (x - xi)
    for k in range(sp.n):
        fk = _fa(sp, ab, sp.c_lowered(k), g.sigma, ctrl)
        grad[..., k] += base * (1.0 - 2.0 * sp.alpha[k]) * fk / xi[..., k]
    return grad


@dataclass(frozen=True)
class ScalarField:
    """A scalar field with an optional analytic gradient.

    Without ``gradient`` the gradient is taken by central differences.
    """

    value: Callable
    gradient: Optional[Callable] = None
    step: float = 1e-6

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        out = np.empty(x.shape)
        for i in range(x.shape[-1]):
            e = np.zeros(x.shape[-1])
            h = self.step * max(1.0, float(np.max(np.abs(x[..., i]))))
            e[i] = h
            out[..., i] = (self.value(x + e) - self.value(x - e)) / (2 * h)
        return out


def _weight_2a(x, sp):
    return np.prod(x[..., :sp.n] ** (2.0 * sp.alpha_arr), axis=-1)


def conormal(u, x, normal, sp: SingularParams):
    """Conormal derivative ``x^(2alpha) sum_i u_{x_i} cos(N, x_i)``.

    ``u`` is anything with a ``grad`` method (such as :class:`ScalarField`)
    or a callable returning the gradient.
    """
    x = _as_points(x, sp.m)
    normal = _as_points(normal, sp.m)
    grad = np.asarray(u.grad(x) if hasattr(u, "grad") else u(x), dtype=float)
    return _weight_2a(x, sp) * np.sum(grad * normal, axis=-1)


def conormal_log(xi, normal, x, sp: SingularParams):
    """Conormal of ln(1/r) with respect to xi: ``xi^(2alpha) sum (x_i - xi_i) N_i / r^2``."""
    xi = _as_points(xi, sp.m)
    x = _as_points(x, sp.m)
    d = x - xi
    r2 = np.sum(d * d, axis=-1)
    return _weight_2a(xi, sp) * np.sum(d * normal, axis=-1) / r2


def dl_parts(xi, normal, x, sp: SingularParams, ctrl: SeriesControl = DEFAULT_CONTROL):
    """The two pieces (B1, B2) of the double-layer kernel.

    B1 = 2 abar kappa (xi x)^(1-2alpha) r^(-2 abar) F_A(1 + abar; 1-alpha; 2-2alpha; sigma)
    B2 = kappa x^(1-2alpha) r^(-2 abar)
         sum_k (1-2alpha_k) xi~_k cos(N, xi_k) F_A(abar; 1-alpha; c_k -> 1-2alpha_k; sigma)
    where xi~_k is the product of the other singular coordinates of xi.
    """
    xi = _as_points(xi, sp.m)
    x = _as_points(x, sp.m)
    normal = _as_points(normal, sp.m)
    g = kernel_geometry(xi, x, sp)
    ab = sp.alpha_bar
    rpow = g.r ** (-2.0 * ab)
    b1 = 2.0 * ab * sp.kappa * g.weight_product * rpow * _fa(sp, ab + 1.0, sp.c, g.sigma, ctrl)
    b2 = np.zeros(np.broadcast(g.r, normal[..., 0]).shape)
    for k in range(sp.n):
        nk = normal[..., k]
        if not np.any(nk):
            continue
        others = np.prod(np.delete(xi[..., :sp.n], k, axis=-1), axis=-1)
        fk = _fa(sp, ab, sp.c_lowered(k), g.sigma, ctrl)
        b2 = b2 + (1.0 - 2.0 * sp.alpha[k]) * others * nk * fk
    b2 = sp.kappa * g.weight_x * rpow * b2
    return b1, b2


def dl_kernel(xi, normal, x, sp: SingularParams, ctrl: SeriesControl = DEFAULT_CONTROL):
    """Double-layer kernel: the conormal derivative of q(xi; x) at xi along ``normal``,
    assembled as ``B1 * B_N[ln 1/r] + B2``."""
    b1, b2 = dl_parts(xi, normal, x, sp, ctrl)
    return b1 * conormal_log(xi, normal, x, sp) + b2


def flat_normal_limit(eta, x, k: int, sp: SingularParams,
                      ctrl: SeriesControl = DEFAULT_CONTROL):
    """``lim_{x_k -> 0} x_k^(2alpha_k) d/dx_k q(x; eta)`` for x on the plane x_k = 0.

    Equals (1 - 2alpha_k) kappa eta^(1-2alpha) x~^(1-2alpha) |x - eta|^(-2 abar)
    times F_A^(n-1) over the remaining singular variables. ``k`` is 0-based.
    The k-th coordinate of ``x`` is ignored (taken as 0).
    """
    eta = _as_points(eta, sp.m)
    x = np.array(_as_points(x, sp.m), dtype=float, copy=True)
    x[..., k] = 0.0
    n = sp.n
    d = x - eta
    r2 = np.sum(d * d, axis=-1)
    if np.any(r2 == 0.0):
        raise DiagonalError("coincident points")
    a = sp.alpha_arr
    rest = [i for i in range(n) if i != k]
    w_eta = np.prod(eta[..., :n] ** (1.0 - 2.0 * a), axis=-1)
    w_x = np.prod(x[..., rest] ** (1.0 - 2.0 * a[rest]), axis=-1) if rest else 1.0
    if rest:
        sigma = -4.0 * eta[..., rest] * x[..., rest] / r2[..., None]
        f = fa_eval(sp.alpha_bar, tuple(sp.b[i] for i in rest),
                    tuple(sp.c[i] for i in rest), sigma, ctrl)
    else:
        f = 1.0
    return ((1.0 - 2.0 * a[k]) * sp.kappa * w_eta * w_x
            * r2 ** (-sp.alpha_bar) * f)


def pde_residual(u, x, sp: SingularParams, h: float) -> float:
    """Central-difference value of H u at x, divided by the largest
    magnitude among its constituent terms."""
    x = np.asarray(x, dtype=float)
    if x.shape != (sp.m,):
        raise DomainError("x must be a single point")
    if np.any(x[:sp.n] <= 2 * h):
        raise DomainError("step too large for the distance to the singular hyperplanes")
    u0 = float(u(x))
    terms = []
    for i in range(sp.m):
        e = np.zeros(sp.m)
        e[i] = h
        up, um = float(u(x + e)), float(u(x - e))
        terms.append((up - 2 * u0 + um) / h ** 2)
        if i < sp.n:
            terms.append(2 * sp.alpha[i] / x[i] * (up - um) / (2 * h))
    terms = np.array(terms)
    scale = np.max(np.abs(terms))
    return float(abs(terms.sum()) / scale) if scale > 0 else 0.0

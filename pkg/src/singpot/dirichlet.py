"""Dirichlet problem on the 2^n-th part of the ball.

Two routes to u(xi): the explicit Poisson-type formula (:func:`solve_ball`)
and the general representation driven by Nystrom density solves
(:func:`solve_general`). On the ball octant they must agree.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DiagonalError, DomainError
from .geometry import OctantBallDomain, polar_flat_rule, polar_sphere_rule
from .kernels import dl_kernel, flat_normal_limit, q_n
from .lauricella import fa_eval
from .potentials import (
    QuadOrders,
    SurfaceDensity,
    _cached_flat,
    _cached_sphere,
    _flat_integrand,
    _flat_rules_for,
    double_layer,
    double_layer_subtracted,
    nystrom_solve,
    nystrom_system,
    simple_layer,
)
from .specialfun import DEFAULT_CONTROL, SeriesControl

__all__ = [
    "NearBoundaryWarning",
    "BoundaryData",
    "builtin_data",
    "g0n",
    "reflection",
    "flat_kernel",
    "validate_flat_paths",
    "solve_ball",
    "solve_general",
    "h_correction",
    "regular_part_nystrom",
    "h_nystrom",
]


class NearBoundaryWarning(UserWarning):
    """xi within two node spacings of the boundary on a fixed tensor rule."""


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data: ``phi`` on the sphere patch and ``tau[k]`` on the plane x_k = 0.

    All handles take points of shape (..., m) in ambient coordinates.
    """

    phi: Callable
    tau: Sequence[Callable]

    def check_matching(self, dom: OctantBallDomain, samples: int = 64, tol: float = 1e-10):
        """Raise DomainError unless phi and tau_k agree on each edge gamma_k."""
        if len(self.tau) != dom.n:
            raise DomainError(f"need {dom.n} flat-patch data functions, got {len(self.tau)}")
        rng = np.random.default_rng(12345)
        for k in range(dom.n):
            p = rng.normal(size=(samples, dom.m))
            p[:, :dom.n] = np.abs(p[:, :dom.n]) + 1e-3
            p[:, k] = 0.0
            p *= dom.R / np.linalg.norm(p, axis=1, keepdims=True)
            a = np.asarray(self.phi(p), dtype=float)
            b = np.asarray(self.tau[k](p), dtype=float)
            bad = np.abs(a - b) > tol * np.maximum(1.0, np.abs(a))
            if np.any(bad):
                raise DomainError(f"data do not match on edge gamma_{k + 1} "
                                  f"(max gap {np.max(np.abs(a - b)):.3g})")

    @classmethod
    def from_function(cls, g: Callable, n: int) -> "BoundaryData":
        """Data given by one global function (matching holds automatically)."""
        return cls(g, tuple(g for _ in range(n)))

    def combine(self, a: float, other: "BoundaryData", b: float) -> "BoundaryData":
        """The data a*self + b*other."""
        lin = lambda f, g: (lambda p: a * np.asarray(f(p)) + b * np.asarray(g(p)))
        return BoundaryData(lin(self.phi, other.phi),
                            tuple(lin(f, g) for f, g in zip(self.tau, other.tau)))


def builtin_data(name: str, dom: OctantBallDomain) -> BoundaryData:
    """Named data sets: ``const1``, ``coordinate`` (x_m / R) and
    ``product`` (1 + x_1 x_m / R^2)."""
    R, m = dom.R, dom.m
    table = {
        "const1": lambda p: np.ones(np.shape(p)[:-1]),
        "coordinate": lambda p: np.asarray(p)[..., m - 1] / R,
        "product": lambda p: 1.0 + np.asarray(p)[..., 0] * np.asarray(p)[..., m - 1] / R ** 2,
    }
    if name not in table:
        raise DomainError(f"unknown built-in data {name!r}; choose from {sorted(table)}")
    return BoundaryData.from_function(table[name], dom.n)


# --------------------------------------------------------------------------
# Green's function of the ball octant
# --------------------------------------------------------------------------

def reflection(xi, dom: OctantBallDomain):
    """(xi*, c): the inverse point R^2 xi / rho^2 and the factor
    c = (R/rho)^(m - 2 + 2 sum alpha) of the reflected term."""
    xi = np.asarray(xi, dtype=float)
    rho2 = float(np.dot(xi, xi))
    if rho2 == 0.0:
        raise DomainError("xi at the origin: the reflected point is undefined")
    sp = dom.sp
    c = (dom.R ** 2 / rho2) ** (0.5 * (sp.m - 2 + 2 * float(np.sum(sp.alpha_arr))))
    return dom.R ** 2 * xi / rho2, c


def _check_interior(xi, dom):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (dom.m,):
        raise DomainError(f"xi must have {dom.m} coordinates")
    if np.dot(xi, xi) == 0.0:
        raise DomainError("xi at the origin: the reflected point is undefined")
    if dom.classify(xi) != "interior" or np.any(xi[:dom.n] <= 0):
        raise DomainError("xi must lie strictly inside the domain")
    return xi


def g0n(x, xi, dom: OctantBallDomain, ctrl: SeriesControl = DEFAULT_CONTROL):
    """Green's function q_n(x; xi) - c q_n(x; xi*) of the ball octant.

    The reflected exponent is m - 2 + 2 sum(alpha), which makes the two terms
    cancel on |x| = R. Broadcasts over x.
    """
    xi = _check_interior(xi, dom)
    x = np.asarray(x, dtype=float)
    if np.any(np.all(x == xi, axis=-1)):
        raise DiagonalError("g0n at coincident points")
    star, c = reflection(xi, dom)
    return q_n(x, xi, dom.sp, ctrl) - c * q_n(x, star, dom.sp, ctrl)


# --------------------------------------------------------------------------
# flat-patch kernel, two ways
# --------------------------------------------------------------------------

def _tilde_weight(x, k, sp, power):
    rest = [i for i in range(sp.n) if i != k]
    if not rest:
        return np.ones(x.shape[:-1])
    return np.prod(x[..., rest] ** np.asarray(power)[rest], axis=-1)


def flat_kernel(x, xi, k: int, dom: OctantBallDomain, path: str = "b",
                ctrl: SeriesControl = DEFAULT_CONTROL):
    """Kernel of the flat-patch integral: u gets int_{S_k} kernel * tau_k dS.

    ``path='a'`` evaluates the printed closed form (X_k, Y_k, sigma~, omega~).
    ``path='b'`` takes the weighted normal derivative x_k^(2alpha_k) d/dx_k
    of g0n at x_k = 0 analytically, term by term, and multiplies by x~^(2alpha).
    Points x lie on the plane x_k = 0 (their k-th coordinate is ignored).
    """
    sp = dom.sp
    x = np.array(x, dtype=float, copy=True)
    x[..., k] = 0.0
    xi = np.asarray(xi, dtype=float)
    a = sp.alpha_arr
    if path == "b":
        star, c = reflection(xi, dom)
        w2a = _tilde_weight(x, k, sp, 2 * a)
        return w2a * (flat_normal_limit(xi, x, k, sp, ctrl)
                      - c * flat_normal_limit(star, x, k, sp, ctrl))
    if path != "a":
        raise DomainError("path must be 'a' or 'b'")
    R, m = dom.R, dom.m
    rho2 = float(xi @ xi)
    rest = [i for i in range(sp.n) if i != k]
    others = [i for i in range(m) if i != k]
    X2 = xi[k] ** 2 + np.sum((x[..., others] - xi[others]) ** 2, axis=-1)
    Y2 = (np.sum((R - x[..., others] * xi[others] / R) ** 2, axis=-1)
          + np.sum(x[..., others] ** 2 * (rho2 - xi[others] ** 2), axis=-1) / R ** 2
          - (m - 2) * R ** 2)
    if rest:
        pr = x[..., rest] * xi[rest]
        b = tuple(sp.b[i] for i in rest)
        cc = tuple(sp.c[i] for i in rest)
        f_sig = fa_eval(sp.alpha_bar, b, cc, -4 * pr / X2[..., None], ctrl)
        f_om = fa_eval(sp.alpha_bar, b, cc, -(R ** 2 / rho2) * 4 * pr / Y2[..., None], ctrl)
    else:
        f_sig = f_om = 1.0
    pre = (1 - 2 * a[k]) * sp.kappa * np.prod(xi[:sp.n] ** (1 - 2 * a))
    return pre * _tilde_weight(x, k, sp, np.ones(sp.n)) * (
        f_sig * X2 ** (-sp.alpha_bar) - f_om * Y2 ** (-sp.alpha_bar))


@lru_cache(maxsize=16)
def validate_flat_paths(dom: OctantBallDomain, ctrl: SeriesControl = DEFAULT_CONTROL,
                        samples: int = 40, tol: float = 1e-9):
    """Cross-validate the printed flat kernel (a) against path (b).

    Returns ``(chosen_path, max_rel_gap)``; 'a' only when it agrees with (b)
    at every sampled (x, xi) pair.
    """
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(samples):
        xi = rng.uniform(0.05, 1.0, dom.m) * rng.choice([-1.0, 1.0], dom.m)
        xi[:dom.n] = np.abs(xi[:dom.n])
        xi *= rng.uniform(0.1, 0.9) * dom.R / np.linalg.norm(xi)
        for k in range(dom.n):
            x = rng.normal(size=dom.m)
            x[:dom.n] = np.abs(x[:dom.n])
            x *= rng.uniform(0.1, 0.95) * dom.R / np.linalg.norm(x)
            x[k] = 0.0
            va = flat_kernel(x, xi, k, dom, "a", ctrl)
            vb = flat_kernel(x, xi, k, dom, "b", ctrl)
            worst = max(worst, float(abs(va - vb) / abs(vb)))
    return ("a" if worst <= tol else "b"), worst


# --------------------------------------------------------------------------
# explicit solution on the ball octant
# --------------------------------------------------------------------------

def _sphere_kernel(xi, pts, dom, ctrl):
    """Poisson kernel of the curved part: -conormal of g0n in closed form."""
    sp = dom.sp
    n = sp.n
    rho2 = float(xi @ xi)
    d = pts - xi
    r2 = np.sum(d * d, axis=-1)
    sigma = -4.0 * xi[:n] * pts[:, :n] / r2[:, None]
    f = fa_eval(1.0 + sp.alpha_bar, sp.b, sp.c, sigma, ctrl)
    pre = 2 * sp.alpha_bar * sp.kappa * np.prod(xi[:n] ** (1 - 2 * sp.alpha_arr))
    return (pre * np.prod(pts[:, :n], axis=1) * f
            * (dom.R ** 2 - rho2) / (dom.R * r2 ** (1.0 + sp.alpha_bar)))


# polar rules take over within this many spacings of the nearest surface;
# tensor rules lose accuracy quickly closer than that
_ADAPT = 8


def _sphere_rule_for(xi, dom, orders, adapt):
    base = _cached_sphere(dom, orders.sphere)
    gap = dom.R - np.linalg.norm(xi)
    near = gap < 2 * base.spacing
    if adapt and gap < _ADAPT * base.spacing:
        t = dom.R * xi / np.linalg.norm(xi)
        return polar_sphere_rule(dom, t, orders.polar_r, orders.polar_psi, delta=gap), near
    return base, near


def _flat_rule_for(xi, k, dom, orders, adapt):
    base = _cached_flat(dom, k, orders.flat)
    near = xi[k] < 2 * base.spacing
    if adapt and xi[k] < _ADAPT * base.spacing:
        c = xi.copy()
        c[k] = 0.0
        return polar_flat_rule(dom, k, c, orders.polar_r, orders.polar_psi, delta=xi[k]), near
    return base, near


def _solve_ball_one(data, xi, dom, orders, ctrl, path, adapt):
    xi = _check_interior(xi, dom)
    rule, near = _sphere_rule_for(xi, dom, orders, adapt)
    u = rule.integrate(_sphere_kernel(xi, rule.points, dom, ctrl) * data.phi(rule.points))
    flags = {"near_boundary": bool(near)}
    for k in range(dom.n):
        fr, near_k = _flat_rule_for(xi, k, dom, orders, adapt)
        flags["near_boundary"] |= bool(near_k)
        tau = np.asarray(data.tau[k](fr.points), dtype=float)
        if np.any(tau):
            u += fr.integrate(flat_kernel(fr.points, xi, k, dom, path, ctrl) * tau)
    return float(u), flags


def solve_ball(data: BoundaryData, xi, dom: OctantBallDomain, orders=None,
               ctrl: SeriesControl = DEFAULT_CONTROL, *, path: str = "auto",
               adapt: bool = True, return_info: bool = False):
    """Explicit solution u(xi) on the ball octant.

    Parameters:
        data: boundary data (checked for matching on the edges).
        xi: interior point, shape (m,), or several points, shape (P, m).
        orders: :class:`QuadOrders` or an int (tensor orders).
        path: flat-kernel path, ``'a'``, ``'b'`` or ``'auto'`` (cross-validated).
        adapt: near the boundary switch to polar rules centred at the
            projection of xi. With ``adapt=False`` the fixed tensor rules are
            used and a :class:`NearBoundaryWarning` is raised there.

    Returns:
        u(xi) (float or array); with ``return_info`` also a dict holding the
        flat path used, its cross-validation gap and per-point flags.
    """
    orders = QuadOrders.of(orders)
    data.check_matching(dom)
    gap = None
    if path == "auto":
        path, gap = validate_flat_paths(dom, ctrl)
    pts = np.asarray(xi, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    vals, flags = [], []
    for p in pts:
        v, f = _solve_ball_one(data, p, dom, orders, ctrl, path, adapt)
        if f["near_boundary"] and not adapt:
            warnings.warn("xi within two node spacings of the boundary; "
                          "accuracy degraded", NearBoundaryWarning, stacklevel=2)
        vals.append(v)
        flags.append(f)
    out = vals[0] if single else np.array(vals)
    if return_info:
        info = {"flat_path": path, "flat_path_gap": gap, "adapted": adapt,
                "flags": flags[0] if single else flags}
        return out, info
    return out


# --------------------------------------------------------------------------
# general representation through density solves
# --------------------------------------------------------------------------

def _theta_k(k, x, data, dom, orders, ctrl):
    """Free-space flat-patch term: int_{Gamma_k} x~^(2alpha) tau_k (weighted normal derivative of q)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.empty(len(x))
    for p, xp in enumerate(x):
        rule = _flat_rules_for(dom, xp, k, orders)
        tau = np.asarray(data.tau[k](rule.points), dtype=float)
        out[p] = rule.integrate(_flat_integrand(xp[None, :], rule.points, k, dom.sp, ctrl) * tau)
    return out


def _double_layer_at(dens, xi, dom, orders, ctrl):
    spacing = dens.rule.spacing
    if dom.R - np.linalg.norm(xi) < 4 * spacing and dens.func is not None:
        return double_layer_subtracted(dens, xi, dom, orders, ctrl)
    return double_layer(dens, xi, dom.sp, ctrl, warn=False)


@lru_cache(maxsize=8)
def _general_densities(data, dom, orders, ctrl):
    rule = nystrom_system(dom, orders, ctrl).rule
    phi2 = SurfaceDensity.from_function(rule, lambda p: 2.0 * np.asarray(data.phi(p), dtype=float))
    theta = nystrom_solve("dirichlet_theta", dom, phi2, orders, ctrl)
    psis = []
    for k in range(dom.n):
        f = lambda p, k=k: 2.0 * _theta_k(k, p, data, dom, orders, ctrl)
        psis.append(nystrom_solve("density_mu", dom, SurfaceDensity.from_function(rule, f),
                                  orders, ctrl))
    return theta, tuple(psis)


def solve_general(data: BoundaryData, xi, dom: OctantBallDomain, orders=None,
                  ctrl: SeriesControl = DEFAULT_CONTROL):
    """u(xi) = sum_k T_k(xi) + Phi(xi) from the general representation.

    Phi(xi) = -(double layer of theta)(xi) where (I - 2D) theta = 2 phi;
    T_k(xi) = vartheta_k(xi) + (double layer of psi_k)(xi) where
    vartheta_k is the free-space flat-patch integral of tau_k and
    (I - 2D) psi_k = 2 vartheta_k on the sphere patch, so that T_k
    vanishes there. Densities are cached per (data, domain, orders).
    """
    orders = QuadOrders.of(orders)
    data.check_matching(dom)
    pts = np.asarray(xi, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    theta, psis = _general_densities(data, dom, orders, ctrl)
    out = []
    for p in pts:
        p = _check_interior(p, dom)
        u = -_double_layer_at(theta, p, dom, orders, ctrl)
        for k in range(dom.n):
            u += _theta_k(k, p, data, dom, orders, ctrl)[0]
            u += _double_layer_at(psis[k], p, dom, orders, ctrl)
        out.append(float(u))
    return out[0] if single else np.array(out)


def _rho_for_pole(pole, dom, orders, ctrl):
    rule = nystrom_system(dom, orders, ctrl).rule
    rhs = SurfaceDensity(rule, 2.0 * dl_kernel(rule.points, rule.normals, pole[None, :], dom.sp, ctrl))
    return nystrom_solve("density_rho", dom, rhs, orders, ctrl)


def h_correction(x, xi, dom: OctantBallDomain, orders=None,
                 ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """H_n(x; xi) = int_Gamma G_0n(t; xi) rho_n(t; x) dt, with rho_n the
    simple-layer density of the exterior conormal problem for the pole x."""
    orders = QuadOrders.of(orders)
    x = _check_interior(x, dom)
    rho = _rho_for_pole(x, dom, orders, ctrl)
    return float(rho.rule.integrate(g0n(rho.rule.points, xi, dom, ctrl) * rho.values))


def regular_part_nystrom(x, xi, dom: OctantBallDomain, orders=None,
                         ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Regular part of the Green's function from the simple-layer density solve.

    On the ball octant it should equal the closed-form reflected term
    ``-c q_n(x; xi*)``; the difference is the numerical H_n.
    """
    orders = QuadOrders.of(orders)
    xi = _check_interior(xi, dom)
    rho = _rho_for_pole(xi, dom, orders, ctrl)
    return simple_layer(rho, np.asarray(x, dtype=float), dom.sp, ctrl, warn=False)


def h_nystrom(x, xi, dom: OctantBallDomain, orders=None,
              ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Numerical H_n on the ball octant: Nystrom regular part minus the
    closed-form reflected term. Zero up to discretisation error."""
    x = np.asarray(x, dtype=float)
    exact = g0n(x, xi, dom, ctrl) - q_n(x, np.asarray(xi, dtype=float), dom.sp, ctrl)
    return float(regular_part_nystrom(x, xi, dom, orders, ctrl) - exact)

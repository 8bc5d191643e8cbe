"""Layer potentials over the sphere patch, the Gauss integral and Nystrom solves.

Kernel conventions (with K(s; t) the conormal of q at the first argument):

* double layer  w(x) = int mu(s) B_Ns[q(s; x)] ds, interior and exterior limits
  -mu/2 + D mu and +mu/2 + D mu with (D mu)(t) = int mu(s) K(s; t) ds;
* simple layer conormal limits +rho/2 + D* rho (inside) and -rho/2 + D* rho
  (outside) with (D* rho)(t) = int rho(s) K(t; s) ds.

On-surface integrals use singularity subtraction against the Gauss identity
``int K(s; t) ds = i(t) - 1/2``:

    (D mu)(t)  = int K(s; t) [mu(s) - mu(t)] ds + mu(t) (i(t) - 1/2)
    (D* rho)(t) = int [K(t; s) rho(s) - K(s; t) rho(t)] ds + rho(t) (i(t) - 1/2)

The second bracket is bounded because the two kernels share their leading
singular part on a smooth surface.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, EdgeProximityError, SingularSystemError
from .geometry import (
    OctantBallDomain,
    QuadratureRule,
    flat_patch_rule,
    polar_flat_rule,
    polar_sphere_rule,
    sphere_patch_rule,
)
from .kernels import (
    SingularParams,
    conormal,
    dl_kernel,
    flat_normal_limit,
    q_gradient,
    q_n,
)
from .specialfun import DEFAULT_CONTROL, SeriesControl

__all__ = [
    "NearSurfaceWarning",
    "QuadOrders",
    "SurfaceDensity",
    "double_layer",
    "double_layer_subtracted",
    "simple_layer",
    "gauss_i",
    "gauss_w1",
    "NystromSystem",
    "nystrom_system",
    "nystrom_solve",
    "layer_limits",
    "off_surface_limit",
    "FundamentalField",
    "SimpleLayerField",
    "flux_zero_check",
]

_PAIR_CHUNK = 200_000


class NearSurfaceWarning(UserWarning):
    """Evaluation point closer to the carrier than a few node spacings."""


@dataclass(frozen=True)
class QuadOrders:
    """Quadrature orders: tensor rules on the sphere and flat patches, and
    the radial/angular orders of target-centred polar rules."""

    sphere: int = 64
    flat: int = 64
    polar_r: int = 32
    polar_psi: int = 64

    @classmethod
    def of(cls, orders) -> "QuadOrders":
        if isinstance(orders, QuadOrders):
            return orders
        if orders is None:
            return cls()
        if isinstance(orders, int):
            return cls(sphere=orders, flat=orders)
        if isinstance(orders, dict):
            return cls(**orders)
        raise DomainError(f"cannot interpret quadrature orders {orders!r}")


@dataclass(frozen=True)
class SurfaceDensity:
    """Density values at the nodes of a rule; ``func`` optionally evaluates it
    off the nodes (needed by near-surface and polar quadrature)."""

    rule: QuadratureRule
    values: np.ndarray
    func: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.rule),):
            raise DomainError("density needs one value per quadrature node")
        if not np.all(np.isfinite(v)):
            raise DomainError("density values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def patch(self):
        return self.rule.patch

    @classmethod
    def from_function(cls, rule: QuadratureRule, f: Callable) -> "SurfaceDensity":
        return cls(rule, np.asarray(f(rule.points), dtype=float), f)

    def at(self, points):
        if self.func is None:
            raise DomainError("density has no off-node evaluator")
        return np.asarray(self.func(np.asarray(points, dtype=float)), dtype=float)

    def scaled(self, a: float) -> "SurfaceDensity":
        f = None if self.func is None else (lambda p, g=self.func: a * g(p))
        return SurfaceDensity(self.rule, a * self.values, f)

    def to_csv(self, path) -> None:
        idx = np.arange(len(self.values))
        with open(path, "w") as fh:
            fh.write("index,value\n")
            for i, v in zip(idx, self.values):
                fh.write(f"{i},{v:.17g}\n")

    @classmethod
    def from_csv(cls, path, rule: QuadratureRule) -> "SurfaceDensity":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        values = np.empty(len(rule))
        values[data[:, 0].astype(int)] = data[:, 1]
        return cls(rule, values)


def _check_near(rule: QuadratureRule, x, factor=3.0):
    d = np.min(np.linalg.norm(rule.points - x, axis=1))
    if d < factor * rule.spacing:
        warnings.warn(f"evaluation point within {d:.3g} of the carrier "
                      f"(node spacing {rule.spacing:.3g}); accuracy degraded",
                      NearSurfaceWarning, stacklevel=3)


def double_layer(mu: SurfaceDensity, x, sp: SingularParams,
                 ctrl: SeriesControl = DEFAULT_CONTROL, warn: bool = True) -> float:
    """Plain quadrature of ``mu(s) K(s; x)`` over the carrier rule."""
    x = np.asarray(x, dtype=float)
    if warn:
        _check_near(mu.rule, x)
    if not np.any(mu.values):
        return 0.0
    r = mu.rule
    k = dl_kernel(r.points, r.normals, x[None, :], sp, ctrl)
    return float(np.dot(r.weights * mu.values, k))


def simple_layer(rho: SurfaceDensity, x, sp: SingularParams,
                 ctrl: SeriesControl = DEFAULT_CONTROL, warn: bool = True) -> float:
    x = np.asarray(x, dtype=float)
    if warn:
        _check_near(rho.rule, x)
    if not np.any(rho.values):
        return 0.0
    r = rho.rule
    return float(np.dot(r.weights * rho.values, q_n(r.points, x[None, :], sp, ctrl)))


# --------------------------------------------------------------------------
# the Gauss integral
# --------------------------------------------------------------------------

def _flat_integrand(x, nodes, k, sp, ctrl):
    """i(x) integrand on Gamma_k: xi~^(2alpha) times the weighted derivative limit."""
    others = [i for i in range(sp.n) if i != k]
    w2a = np.prod(nodes[..., others] ** (2.0 * sp.alpha_arr[others]), axis=-1) if others else 1.0
    return w2a * flat_normal_limit(x, nodes, k, sp, ctrl)


def _flat_rules_for(dom, x, k, orders: QuadOrders):
    """Tensor rule, or a polar rule about the projection when x is near Gamma_k."""
    x = np.asarray(x, dtype=float)
    proj = x.copy()
    proj[k] = 0.0
    near = x[k] < 0.25 * dom.R
    inside = (np.linalg.norm(proj) < dom.R * (1 - 1e-9)
              and np.all(np.delete(proj[:dom.n], k) > 0))
    if near and inside:
        return polar_flat_rule(dom, k, proj, orders.polar_r, orders.polar_psi, delta=max(x[k], 0.0))
    return _cached_flat(dom, k, orders.flat)


@lru_cache(maxsize=32)
def _cached_flat(dom, k, order):
    return flat_patch_rule(dom, k, order)


@lru_cache(maxsize=16)
def _cached_sphere(dom, order):
    return sphere_patch_rule(dom, order)


def gauss_i(dom: OctantBallDomain, x, orders=None,
            ctrl: SeriesControl = DEFAULT_CONTROL) -> np.ndarray:
    """i(x), the flat-patch part of the Gauss identity, for points x of shape (P, m)."""
    orders = QuadOrders.of(orders)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(len(x))
    for p, xp in enumerate(x):
        for k in range(dom.n):
            rule = _flat_rules_for(dom, xp, k, orders)
            out[p] += rule.integrate(_flat_integrand(xp[None, :], rule.points, k, dom.sp, ctrl))
    return out


def gauss_w1(dom: OctantBallDomain, x, classification: str, orders=None,
             ctrl: SeriesControl = DEFAULT_CONTROL):
    """(w1, i(x)) for unit density over the sphere patch.

    Compare w1 with i(x) - 1 (interior), i(x) - 1/2 (boundary) or i(x) (exterior).
    Boundary points are integrated with a polar rule centred at x; the kernel
    singularity is weak enough for the polar Jacobian to absorb it.
    """
    orders = QuadOrders.of(orders)
    x = np.asarray(x, dtype=float)
    sp = dom.sp
    if classification not in ("interior", "boundary", "exterior"):
        raise DomainError("classification must be interior, boundary or exterior")
    if np.any(x[:sp.n] < 0):
        raise DomainError("x must lie in the closed octant")
    if classification == "boundary":
        if abs(np.linalg.norm(x) - dom.R) > 1e-10 * dom.R:
            raise DomainError("boundary classification needs |x| = R")
        rule = polar_sphere_rule(dom, x, orders.polar_r, orders.polar_psi)
        w1 = rule.integrate(dl_kernel(rule.points, rule.normals, x[None, :], sp, ctrl))
    else:
        rule = _cached_sphere(dom, orders.sphere)
        gap = abs(np.linalg.norm(x) - dom.R)
        if gap < 3 * rule.spacing and np.all(x[:sp.n] > 0):
            rule = polar_sphere_rule(dom, x, orders.polar_r, orders.polar_psi, delta=gap)
        w1 = rule.integrate(dl_kernel(rule.points, rule.normals, x[None, :], sp, ctrl))
    return float(w1), float(gauss_i(dom, x, orders, ctrl)[0])


def double_layer_subtracted(mu: SurfaceDensity, x, dom: OctantBallDomain, orders=None,
                            ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Double layer at an off-surface point x with the density value at the
    radial projection subtracted, using the Gauss identity for the constant.

    Much more accurate than :func:`double_layer` close to the sphere patch.
    """
    x = np.asarray(x, dtype=float)
    r = mu.rule
    t = dom.R * x / np.linalg.norm(x)
    mu_t = float(mu.at(t[None, :])[0]) if mu.func is not None else float(
        mu.values[np.argmin(np.linalg.norm(r.points - t, axis=1))])
    k = dl_kernel(r.points, r.normals, x[None, :], dom.sp, ctrl)
    inside = np.linalg.norm(x) < dom.R
    total = gauss_i(dom, x, orders, ctrl)[0] - (1.0 if inside else 0.0)
    return float(np.dot(r.weights * (mu.values - mu_t), k) + mu_t * total)


# --------------------------------------------------------------------------
# Nystrom discretisation on the sphere patch
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NystromSystem:
    """Dense discretisation of the double-layer operator on a sphere-patch rule.

    ``kmat[i, j] = K(s_j; t_i)`` (zero diagonal) and ``total[i] = i(t_i) - 1/2``.
    """

    dom: OctantBallDomain
    rule: QuadratureRule
    kmat: np.ndarray
    total: np.ndarray
    orders: QuadOrders
    ctrl: SeriesControl

    @property
    def size(self) -> int:
        return len(self.rule)

    def operator(self, equation: str) -> np.ndarray:
        """Matrix of D (``density_mu``/``dirichlet_theta``) or D* (``density_rho``)."""
        w = self.rule.weights
        rowsum = self.kmat @ w
        if equation in ("density_mu", "dirichlet_theta"):
            op = self.kmat * w[None, :]
        elif equation == "density_rho":
            op = self.kmat.T * w[None, :]
        else:
            raise DomainError(f"unknown equation {equation!r}")
        op[np.diag_indices_from(op)] += self.total - rowsum
        return op

    def matrix(self, equation: str) -> np.ndarray:
        return np.eye(self.size) - 2.0 * self.operator(equation)

    def solve(self, equation: str, rhs: np.ndarray) -> np.ndarray:
        a = self.matrix(equation)
        try:
            sol = np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("Nystrom matrix is singular") from exc
        if not np.all(np.isfinite(sol)):
            raise SingularSystemError("Nystrom solve produced non-finite values")
        return sol

    def residual(self, equation: str, sol, rhs) -> float:
        a = self.matrix(equation)
        scale = max(np.max(np.abs(rhs)), 1e-300)
        return float(np.max(np.abs(a @ sol - rhs)) / scale)

    def interpolate(self, equation: str, sol, rhs_func: Callable, points) -> np.ndarray:
        """Natural Nystrom interpolant of the solution at surface points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = self.rule
        out = np.empty(len(pts))
        for p, t in enumerate(pts):
            d = np.linalg.norm(r.points - t, axis=1)
            keep = d > 1e-12 * self.dom.R
            s, nrm, w = r.points[keep], r.normals[keep], r.weights[keep]
            k = dl_kernel(s, nrm, t[None, :], self.dom.sp, self.ctrl)
            tot = gauss_i(self.dom, t, self.orders, self.ctrl)[0] - 0.5
            if equation == "density_rho":
                kstar = dl_kernel(np.broadcast_to(t, s.shape), np.broadcast_to(t / self.dom.R, s.shape),
                                  s, self.dom.sp, self.ctrl)
                num = rhs_func(t[None, :])[0] + 2.0 * np.dot(w * kstar, sol[keep])
            else:
                num = rhs_func(t[None, :])[0] + 2.0 * np.dot(w * k, sol[keep])
            out[p] = num / (1.0 + 2.0 * np.dot(w, k) - 2.0 * tot)
        return out


def nystrom_system(dom: OctantBallDomain, orders=None,
                   ctrl: SeriesControl = DEFAULT_CONTROL) -> NystromSystem:
    """Assemble (and cache) the kernel matrix and Gauss totals for a sphere-patch rule."""
    return _assemble(dom, QuadOrders.of(orders), ctrl)


@lru_cache(maxsize=4)
def _assemble(dom, orders, ctrl):
    rule = _cached_sphere(dom, orders.sphere)
    pts, nrm = rule.points, rule.normals
    npts = len(rule)
    kmat = np.empty((npts, npts))
    rows = max(1, _PAIR_CHUNK // npts)
    for i0 in range(0, npts, rows):
        i1 = min(npts, i0 + rows)
        shape = (i1 - i0, npts, dom.m)
        s = np.broadcast_to(pts[None, :, :], shape)
        nn = np.broadcast_to(nrm[None, :, :], shape)
        t = np.broadcast_to(pts[i0:i1, None, :], shape)
        off = np.ones(shape[:2], dtype=bool)
        off[np.arange(i1 - i0), np.arange(i0, i1)] = False
        block = np.zeros(shape[:2])
        block[off] = dl_kernel(s[off], nn[off], t[off], dom.sp, ctrl)
        kmat[i0:i1] = block
    total = gauss_i(dom, pts, orders, ctrl) - 0.5
    return NystromSystem(dom, rule, kmat, total, orders, ctrl)


def nystrom_solve(equation: str, dom: OctantBallDomain, rhs: SurfaceDensity, orders=None,
                  ctrl: SeriesControl = DEFAULT_CONTROL) -> SurfaceDensity:
    """Solve ``(I - 2D) d = rhs`` (``D*`` for ``density_rho``) on the sphere patch.

    ``rhs`` must live on the rule ``sphere_patch_rule(dom, orders.sphere)``.
    The returned density carries the natural Nystrom interpolant when
    ``rhs`` has an off-node evaluator.
    """
    orders = QuadOrders.of(orders)
    system = nystrom_system(dom, orders, ctrl)
    if len(rhs.rule) != system.size or not np.array_equal(rhs.rule.points, system.rule.points):
        raise DomainError("rhs must be sampled on the sphere-patch collocation rule")
    if not np.any(rhs.values):
        return SurfaceDensity(system.rule, np.zeros(system.size), lambda p: np.zeros(len(p)))
    sol = system.solve(equation, rhs.values)
    func = None
    if rhs.func is not None:
        func = lambda p, e=equation, s=sol, f=rhs.func: system.interpolate(e, s, f, p)
    return SurfaceDensity(system.rule, sol, func)


def layer_limits(kind: str, dens: SurfaceDensity, t_index: int, side: str,
                 dom: OctantBallDomain, orders=None,
                 ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """One-sided boundary value at a collocation node.

    ``kind='double'``: limit of the double-layer potential;
    ``kind='simple_conormal'``: limit of the conormal derivative of the
    simple-layer potential. ``side`` is ``'interior'`` or ``'exterior'``.
    """
    if side not in ("interior", "exterior"):
        raise DomainError("side must be interior or exterior")
    if kind not in ("double", "simple_conormal"):
        raise DomainError("kind must be double or simple_conormal")
    orders = QuadOrders.of(orders)
    r = dens.rule
    t = r.points[t_index]
    if np.min(t[:dom.n]) < 2 * r.spacing:
        raise EdgeProximityError("collocation node within two spacings of an edge")
    keep = np.arange(len(r)) != t_index
    s, nrm, w = r.points[keep], r.normals[keep], r.weights[keep]
    k = dl_kernel(s, nrm, t[None, :], dom.sp, ctrl)
    tot = gauss_i(dom, t, orders, ctrl)[0] - 0.5
    v, vt = dens.values[keep], dens.values[t_index]
    if kind == "double":
        pv = np.dot(w * k, v - vt) + vt * tot
        return float(pv + (-0.5 if side == "interior" else 0.5) * vt)
    kstar = dl_kernel(np.broadcast_to(t, s.shape), np.broadcast_to(r.normals[t_index], s.shape),
                      s, dom.sp, ctrl)
    pv = np.dot(w, kstar * v - k * vt) + vt * tot
    return float(pv + (0.5 if side == "interior" else -0.5) * vt)


def off_surface_limit(kind: str, dens: SurfaceDensity, t, side: str, dom: OctantBallDomain,
                      orders=None, eps=(4e-3, 2e-3),
                      ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Boundary value approached from one side, computed off the surface.

    The potential (or the conormal derivative of the simple layer, taken
    along the normal at t) is evaluated at ``t -/+ eps N`` with polar rules
    centred at t, then extrapolated linearly to eps = 0. Independent of the
    subtraction used by :func:`layer_limits`; needs ``dens.func``.
    """
    orders = QuadOrders.of(orders)
    t = np.asarray(t, dtype=float)
    nrm_t = t / dom.R
    sign = 1.0 if side == "exterior" else -1.0
    vals = []
    for e in eps:
        x = t + sign * e * nrm_t
        rule = polar_sphere_rule(dom, t, orders.polar_r, orders.polar_psi, delta=e)
        f = dens.at(rule.points)
        if kind == "double":
            k = dl_kernel(rule.points, rule.normals, x[None, :], dom.sp, ctrl)
        elif kind == "simple_conormal":
            k = dl_kernel(x[None, :], nrm_t[None, :], rule.points, dom.sp, ctrl)
        else:
            raise DomainError("kind must be double or simple_conormal")
        vals.append(rule.integrate(f * k))
    e1, e2 = eps
    return float((e1 * vals[1] - e2 * vals[0]) / (e1 - e2))


# --------------------------------------------------------------------------
# fields and the zero-flux identity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FundamentalField:
    """u(x) = q_n(pole; x), with gradient and the flat-patch conormal limit."""

    pole: np.ndarray
    sp: SingularParams
    ctrl: SeriesControl = DEFAULT_CONTROL

    def __call__(self, x):
        return q_n(self.pole, x, self.sp, self.ctrl)

    def grad(self, x):
        return q_gradient(self.pole, x, self.sp, self.ctrl, wrt="x")

    def flat_limit(self, x, k):
        return flat_normal_limit(self.pole, x, k, self.sp, self.ctrl)


@dataclass(frozen=True)
class SimpleLayerField:
    """u(x) = simple-layer potential of ``rho``; fields are superpositions of
    :class:`FundamentalField`."""

    rho: SurfaceDensity
    sp: SingularParams
    ctrl: SeriesControl = DEFAULT_CONTROL

    def _sum(self, f, x):
        r = self.rho.rule
        wr = r.weights * self.rho.values
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals = f(r.points[None, :, :], x[:, None, :])
        if vals.ndim == 3:
            return np.einsum("j,pjm->pm", wr, vals)
        return vals @ wr

    def __call__(self, x):
        return self._sum(lambda s, p: q_n(s, p, self.sp, self.ctrl), x)

    def grad(self, x):
        return self._sum(lambda s, p: q_gradient(s, p, self.sp, self.ctrl, wrt="x"), x)

    def flat_limit(self, x, k):
        return self._sum(lambda s, p: flat_normal_limit(s, p, k, self.sp, self.ctrl), x)


def flux_zero_check(dom: OctantBallDomain, u, orders=None):
    """Quadrature of the conormal derivative of u over the whole boundary.

    Returns ``(flux, scale)`` with ``scale`` the quadrature of its absolute
    value. On the flat pieces the conormal is ``-x_k^(2alpha_k) u_{x_k}`` at
    ``x_k = 0`` times the other weights; fields that are singular like
    ``x_k^(1-2alpha_k)`` must supply ``flat_limit(x, k)`` for that limit,
    otherwise the weight x_k^(2alpha_k) = 0 annihilates the term.
    """
    orders = QuadOrders.of(orders)
    sp = dom.sp
    sph = _cached_sphere(dom, orders.sphere)
    vals = [np.asarray(conormal(u, sph.points, sph.normals, sp))]
    weights = [sph.weights]
    for k in range(dom.n):
        fr = _cached_flat(dom, k, orders.flat)
        others = [i for i in range(sp.n) if i != k]
        w2a = np.prod(fr.points[:, others] ** (2 * sp.alpha_arr[others]), axis=1)
        if hasattr(u, "flat_limit"):
            vals.append(-w2a * np.asarray(u.flat_limit(fr.points, k)))
        else:
            vals.append(np.zeros(len(fr)))
        weights.append(fr.weights)
    flux = sum(float(np.dot(w, v)) for w, v in zip(weights, vals))
    scale = sum(float(np.dot(w, np.abs(v))) for w, v in zip(weights, vals))
    return flux, scale

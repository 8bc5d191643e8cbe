"""The 2^n-th part of the ball, its boundary patches and quadrature rules.

The domain is ``{|x| < R, x_1 > 0, ..., x_n > 0}``. Its boundary is the
sphere patch Gamma (``|x| = R`` with positive singular coordinates) and the
flat pieces Gamma_k on the hyperplanes ``x_k = 0``.

Spherical coordinates follow the cascade

    Phi_1 = cos phi_1,
    Phi_i = sin phi_1 ... sin phi_{i-1} cos phi_i   (2 <= i <= m-1),
    Phi_m = sin phi_1 ... sin phi_{m-1},

with phi_1..phi_{m-2} in [0, pi] and phi_{m-1} in [0, 2 pi]. Positivity of
the first n Cartesian coordinates becomes an angle box:

* ``x_i > 0`` for ``i <= m-2`` needs ``cos phi_i > 0``, so phi_i in [0, pi/2];
* if n = m-1 the last angle must keep ``cos phi_{m-1} > 0``: [-pi/2, pi/2];
* if n = m both the cosine and the sine of phi_{m-1} are positive: [0, pi/2].

For m = 3 and n = 1 this is phi_1 in [0, pi/2], phi_2 in [0, 2 pi]
(a hemisphere). For m = 3, n = 2 it is phi_1, phi_2 in [0, pi/2] x [-pi/2, pi/2].
For m = 4, n = 2 it is [0, pi/2]^2 x [0, 2 pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError
from .kernels import SingularParams

__all__ = [
    "spherical_map",
    "angle_box",
    "SurfacePatch",
    "QuadratureRule",
    "OctantBallDomain",
    "sphere_rule",
    "sphere_patch_rule",
    "flat_patch_rule",
    "polar_sphere_rule",
    "polar_flat_rule",
]


def _cascade(phi):
    phi = np.asarray(phi, dtype=float)
    d = phi.shape[-1] + 1
    out = np.empty(phi.shape[:-1] + (d,))
    s = np.ones(phi.shape[:-1])
    for i in range(d - 1):
        out[..., i] = s * np.cos(phi[..., i])
        s = s * np.sin(phi[..., i])
    out[..., d - 1] = s
    return out


def spherical_map(rho, phi, center):
    """Point ``center + rho * Phi(phi)``; broadcasts over leading axes."""
    center = np.asarray(center, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != center.shape[-1] - 1:
        raise DomainError("need m-1 angles for a point in R^m")
    return center + np.asarray(rho, dtype=float)[..., None] * _cascade(phi)


def _angular_jacobian(phi):
    """Surface measure density of the unit sphere in cascade angles."""
    phi = np.asarray(phi, dtype=float)
    d = phi.shape[-1] + 1
    jac = np.ones(phi.shape[:-1])
    for i in range(d - 2):
        jac = jac * np.sin(phi[..., i]) ** (d - 2 - i)
    return jac


def angle_box(d: int, npos: int):
    """Angle intervals on S^(d-1) keeping the first ``npos`` coordinates positive."""
    if d < 2:
        raise DomainError("need dimension >= 2")
    box = []
    for i in range(1, d - 1):
        box.append((0.0, math.pi / 2) if i <= npos else (0.0, math.pi))
    if npos >= d:
        box.append((0.0, math.pi / 2))
    elif npos == d - 1:
        box.append((-math.pi / 2, math.pi / 2))
    else:
        box.append((0.0, 2 * math.pi))
    return box


@dataclass(frozen=True)
class SurfacePatch:
    """One boundary piece: the sphere patch (k = None) or the flat piece on x_k = 0.

    ``k`` is 0-based. ``parametrization`` maps the parameter box to points and
    ``jacobian`` gives the surface measure density there.
    """

    m: int
    R: float
    npos: int
    k: Optional[int] = None

    @property
    def kind(self) -> str:
        return "sphere" if self.k is None else f"hyperplane-{self.k + 1}"

    @property
    def param_box(self):
        if self.k is None:
            return angle_box(self.m, self.npos)
        # radius then angles of the (m-1)-dimensional disc
        return [(0.0, self.R)] + angle_box(self.m - 1, self.npos - 1)

    def _embed(self, y):
        # insert a zero k-th coordinate
        return np.insert(y, self.k, 0.0, axis=-1)

    def parametrization(self, u):
        u = np.asarray(u, dtype=float)
        if self.k is None:
            return self.R * _cascade(u)
        return self._embed(u[..., :1] * _cascade(u[..., 1:]))

    def jacobian(self, u):
        u = np.asarray(u, dtype=float)
        if self.k is None:
            return self.R ** (self.m - 1) * _angular_jacobian(u)
        return u[..., 0] ** (self.m - 2) * _angular_jacobian(u[..., 1:])

    def normal(self, x):
        x = np.asarray(x, dtype=float)
        if self.k is None:
            return x / self.R
        e = np.zeros(x.shape)
        e[..., self.k] = -1.0
        return e

    def area(self) -> float:
        """Exact measure of the patch."""
        full = 2 * math.pi ** (self.m / 2) / math.gamma(self.m / 2)
        if self.k is None:
            return full * self.R ** (self.m - 1) / 2 ** self.npos
        d = self.m - 1
        ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.R ** d
        return ball / 2 ** (self.npos - 1)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes with outward unit normals and positive weights (surface measure included)."""

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    orders: tuple = ()
    patch: Optional[SurfacePatch] = field(default=None, compare=False)

    def __post_init__(self):
        for arr in (self.points, self.normals, self.weights):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.weights)

    def __iter__(self):
        return iter(zip(self.points, self.normals, self.weights))

    @property
    def spacing(self) -> float:
        """Typical node spacing, (area / count)^(1/(m-1))."""
        m = self.points.shape[1]
        return float((np.sum(self.weights) / len(self)) ** (1.0 / (m - 1)))

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def to_csv(self, path) -> None:
        m = self.points.shape[1]
        header = ",".join([f"x{i+1}" for i in range(m)] + [f"n{i+1}" for i in range(m)] + ["w"])
        data = np.column_stack([self.points, self.normals, self.weights])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")

    @classmethod
    def from_csv(cls, path) -> "QuadratureRule":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        m = (data.shape[1] - 1) // 2
        return cls(data[:, :m].copy(), data[:, m:2 * m].copy(), data[:, -1].copy())

    @staticmethod
    def concat(rules) -> "QuadratureRule":
        return QuadratureRule(np.concatenate([r.points for r in rules]),
                              np.concatenate([r.normals for r in rules]),
                              np.concatenate([r.weights for r in rules]))


@dataclass(frozen=True)
class OctantBallDomain:
    R: float
    sp: SingularParams

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError("radius must be positive")

    @property
    def m(self) -> int:
        return self.sp.m

    @property
    def n(self) -> int:
        return self.sp.n

    @property
    def sphere_patch(self) -> SurfacePatch:
        return SurfacePatch(self.m, self.R, self.n)

    @property
    def flat_patches(self):
        return tuple(SurfacePatch(self.m, self.R, self.n, k) for k in range(self.n))

    def classify(self, x, tol: float = 1e-12) -> str:
        """'interior', 'boundary' or 'exterior' for a point of the closed octant."""
        x = np.asarray(x, dtype=float)
        if np.any(x[:self.n] < -tol):
            raise DomainError("point outside the closed octant")
        rad = float(np.linalg.norm(x))
        if abs(rad - self.R) <= tol * self.R or (rad <= self.R and np.any(x[:self.n] <= tol)):
            return "boundary"
        return "interior" if rad < self.R else "exterior"

    def boundary_distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(min(abs(self.R - np.linalg.norm(x)), np.min(x[:self.n])))


def _gl(order, lo, hi):
    x, w = np.polynomial.legendre.leggauss(order)
    half = (hi - lo) / 2.0
    return lo + half * (x + 1.0), half * w


def _tensor(box, order):
    grids, wts = zip(*(_gl(order, lo, hi) for lo, hi in box))
    mesh = np.meshgrid(*grids, indexing="ij")
    wmesh = np.meshgrid(*wts, indexing="ij")
    u = np.stack([g.ravel() for g in mesh], axis=-1)
    w = np.prod(np.stack([g.ravel() for g in wmesh], axis=-1), axis=-1)
    return u, w


def sphere_rule(m: int, R: float, npos: int, order: int) -> QuadratureRule:
    """Tensor Gauss-Legendre rule on the part of the sphere |x| = R with the
    first ``npos`` coordinates positive (npos = 0 gives the full sphere)."""
    if order < 2:
        raise DomainError("order must be >= 2")
    patch = SurfacePatch(m, R, npos)
    u, w = _tensor(patch.param_box, order)
    pts = patch.parametrization(u)
    return QuadratureRule(pts, patch.normal(pts), w * patch.jacobian(u),
                          (order,) * (m - 1), patch)


def sphere_patch_rule(dom: OctantBallDomain, order: int) -> QuadratureRule:
    return sphere_rule(dom.m, dom.R, dom.n, order)


def flat_patch_rule(dom: OctantBallDomain, k: int, order: int) -> QuadratureRule:
    """Radial x angular Gauss-Legendre rule on Gamma_k (``k`` 0-based)."""
    if order < 2:
        raise DomainError("order must be >= 2")
    if not 0 <= k < dom.n:
        raise DomainError("flat patch index out of range")
    patch = dom.flat_patches[k]
    u, w = _tensor(patch.param_box, order)
    pts = patch.parametrization(u)
    pts[..., k] = 0.0
    return QuadratureRule(pts, patch.normal(pts), w * patch.jacobian(u),
                          (order,) * (dom.m - 1), patch)


# --------------------------------------------------------------------------
# target-centred polar rules
# --------------------------------------------------------------------------

def _radial_rule(order, rmax, delta):
    """Nodes on [0, rmax] per direction. With delta > 0 the sinh map
    rho = delta sinh(s) clusters nodes at the scale delta."""
    x, w = np.polynomial.legendre.leggauss(order)
    if delta <= 0:
        half = rmax[:, None] / 2.0
        return half * (x[None, :] + 1.0), half * w[None, :]
    smax = np.arcsinh(rmax / delta)[:, None]
    s = smax * (x[None, :] + 1.0) / 2.0
    return delta * np.sinh(s), delta * np.cosh(s) * smax / 2.0 * w[None, :]


def _direction_panels(limit, lo, hi, order, probes=2048):
    """GL rule on [lo, hi] split where the active constraint in ``limit`` switches.

    ``limit(psi)`` returns (rmax, argmin index) for a 1-d array of angles.
    """
    grid = np.linspace(lo, hi, probes + 1)
    _, which = limit(grid)
    cuts = [lo]
    for i in np.nonzero(np.diff(which))[0]:
        a, b = grid[i], grid[i + 1]
        wa = which[i]
        for _ in range(60):
            mid = 0.5 * (a + b)
            if limit(np.array([mid]))[1][0] == wa:
                a = mid
            else:
                b = mid
        cuts.append(0.5 * (a + b))
    cuts.append(hi)
    ps, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 1e-14:
            continue
        p, w = _gl(order, a, b)
        ps.append(p)
        ws.append(w)
    return np.concatenate(ps), np.concatenate(ws)


def _tangent_frame(t):
    """Orthonormal basis of the tangent space of the sphere at unit vector t."""
    m = t.shape[0]
    q, _ = np.linalg.qr(np.column_stack([t, np.eye(m)]))
    frame = q[:, 1:m]
    return frame


def polar_sphere_rule(dom: OctantBallDomain, center, order_r: int, order_psi: int,
                      delta: float = 0.0) -> QuadratureRule:
    """Sphere-patch rule in geodesic polar coordinates about ``center``.

    ``center`` is a point of the patch (or its radial projection is used).
    The geodesic angle theta runs from 0 to the first edge x_k = 0 along each
    direction; ``delta`` (a length) switches on sinh clustering near theta = 0
    for targets at distance delta from the surface.
    """
    R, m, n = dom.R, dom.m, dom.n
    t = np.asarray(center, dtype=float)
    t = t / np.linalg.norm(t)
    if np.any(t[:n] <= 0):
        raise DomainError("polar centre must project into the open patch")
    frame = _tangent_frame(t)

    def directions(psi):
        # unit tangent directions from angles on S^(m-2)
        if m == 3:
            return np.cos(psi)[..., None] * frame[:, 0] + np.sin(psi)[..., None] * frame[:, 1]
        return _cascade(psi) @ frame.T

    def limit(psi):
        d = directions(psi)
        tk = t[:n]
        dk = d[..., :n]
        theta = np.arctan2(np.broadcast_to(tk, dk.shape), -dk)
        theta = np.concatenate([theta, np.full(theta.shape[:-1] + (1,), math.pi)], axis=-1)
        return theta.min(axis=-1), theta.argmin(axis=-1)

    if m == 3:
        psi, wpsi = _direction_panels(limit, 0.0, 2 * math.pi, order_psi)
        psi = psi[:, None]
        ang_jac = np.ones(len(wpsi))
    else:
        psi, wpsi = _tensor(angle_box(m - 1, 0), order_psi)
        ang_jac = _angular_jacobian(psi)
    tmax, _ = limit(psi[:, 0] if m == 3 else psi)
    theta, wth = _radial_rule(order_r, tmax, delta / R)
    d = directions(psi[:, 0] if m == 3 else psi)
    pts = R * (np.cos(theta)[..., None] * t + np.sin(theta)[..., None] * d[:, None, :])
    w = (wpsi * ang_jac)[:, None] * wth * R ** (m - 1) * np.sin(theta) ** (m - 2)
    pts = pts.reshape(-1, m)
    return QuadratureRule(pts, pts / R, w.ravel(), (order_r, order_psi), dom.sphere_patch)


def polar_flat_rule(dom: OctantBallDomain, k: int, center, order_r: int, order_psi: int,
                    delta: float = 0.0) -> QuadratureRule:
    """Rule on Gamma_k in polar coordinates about ``center`` (its k-th coordinate
    is dropped), clipped by the ball and the other singular hyperplanes."""
    R, m, n = dom.R, dom.m, dom.n
    c = np.delete(np.asarray(center, dtype=float), k)
    sing = [j for j in range(n - 1)]  # remaining singular coordinates come first
    if np.linalg.norm(c) >= R or np.any(c[sing] <= 0):
        raise DomainError("polar centre must lie inside the flat patch")

    def limit(psi):
        d = _cascade(psi[..., None]) if m == 3 else _cascade(psi)
        cd = d @ c
        rball = -cd + np.sqrt(cd ** 2 + R ** 2 - c @ c)
        cols = [rball[..., None]]
        for j in sing:
            with np.errstate(divide="ignore"):
                cols.append(np.where(d[..., j] < 0, -c[j] / d[..., j], np.inf)[..., None])
        lim = np.concatenate(cols, axis=-1)
        return lim.min(axis=-1), lim.argmin(axis=-1)

    if m == 3:
        psi, wpsi = _direction_panels(limit, 0.0, 2 * math.pi, order_psi)
        ang_jac = np.ones(len(wpsi))
        d = _cascade(psi[:, None])
    else:
        psi, wpsi = _tensor(angle_box(m - 1, 0), order_psi)
        ang_jac = _angular_jacobian(psi)
        d = _cascade(psi)
    rmax, _ = limit(psi)
    rho, wr = _radial_rule(order_r, rmax, delta)
    y = c + rho[..., None] * d[:, None, :]
    w = (wpsi * ang_jac)[:, None] * wr * rho ** (m - 2)
    pts = np.insert(y.reshape(-1, m - 1), k, 0.0, axis=-1)
    patch = dom.flat_patches[k]
    return QuadratureRule(pts, patch.normal(pts), w.ravel(), (order_r, order_psi), patch)

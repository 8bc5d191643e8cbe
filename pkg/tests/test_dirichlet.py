import warnings

import numpy as np
import pytest

from singpot.dirichlet import (
    BoundaryData,
    NearBoundaryWarning,
    builtin_data,
    flat_kernel,
    g0n,
    h_correction,
    h_nystrom,
    reflection,
    solve_ball,
    solve_general,
    validate_flat_paths,
)
from singpot.errors import DiagonalError, DomainError
from singpot.geometry import OctantBallDomain
from singpot.kernels import SingularParams, pde_residual, q_n
from singpot.specialfun import SeriesControl

DOM1 = OctantBallDomain(1.0, SingularParams(3, (0.3,)))
DOM2 = OctantBallDomain(1.0, SingularParams(3, (0.3, 0.2)))
FINE = SeriesControl(rel_tol=1e-16)


def interior_points(dom, count, seed, margin=0.05):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = rng.uniform(-dom.R, dom.R, dom.m)
        p[:dom.n] = np.abs(p[:dom.n])
        if np.linalg.norm(p) < dom.R and dom.boundary_distance(p) >= margin * dom.R:
            out.append(p)
    return np.array(out)


def poly_solution(dom):
    """x_1^2 - (1 + 2 alpha_1) x_m^2 solves the equation for any n."""
    a1 = dom.sp.alpha[0]
    return lambda p: np.asarray(p)[..., 0] ** 2 - (1 + 2 * a1) * np.asarray(p)[..., dom.m - 1] ** 2


def test_matching_check():
    good = builtin_data("product", DOM2)
    good.check_matching(DOM2)
    bad = BoundaryData(lambda p: p[..., 2], (lambda p: p[..., 2] + 1e-6, lambda p: p[..., 2]))
    with pytest.raises(DomainError):
        bad.check_matching(DOM2)
    with pytest.raises(DomainError):
        BoundaryData(lambda p: p[..., 2], ()).check_matching(DOM2)
    with pytest.raises(DomainError):
        solve_ball(bad, np.array([0.3, 0.2, 0.1]), DOM2, 16)


def test_builtin_names():
    p = np.array([[0.3, 0.4, 0.5]])
    assert builtin_data("const1", DOM1).phi(p)[0] == 1.0
    assert builtin_data("coordinate", DOM1).tau[0](p)[0] == 0.5
    assert builtin_data("product", DOM1).phi(p)[0] == pytest.approx(1.15)
    with pytest.raises(DomainError):
        builtin_data("sine", DOM1)


@pytest.mark.parametrize("dom", [DOM1, DOM2])
def test_g0n_vanishes_on_sphere(dom):
    xi = np.array([0.3, 0.2, 0.25])
    rng = np.random.default_rng(3)
    x = rng.normal(size=(50, 3))
    x[:, :dom.n] = np.abs(x[:, :dom.n])
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    assert np.max(np.abs(g0n(x, xi, dom))) <= 1e-8


def test_printed_reflection_exponent_does_not_cancel():
    # with the exponent 2*abar the two terms do not cancel on |x| = R
    sp = DOM1.sp
    xi = np.array([0.3, 0.2, 0.25])
    rho = np.linalg.norm(xi)
    x = np.array([0.6, 0.0, 0.8])
    printed = q_n(x, xi, sp) - (1 / rho) ** (2 * sp.alpha_bar) * q_n(x, xi / rho ** 2, sp)
    assert abs(printed) > 1e-2 * q_n(x, xi, sp)
    star, c = reflection(xi, DOM1)
    assert c == pytest.approx(rho ** -(1 + 0.6))


@pytest.mark.parametrize("dom", [DOM1, DOM2])
def test_g0n_vanishes_on_planes(dom):
    xi = np.array([0.3, 0.2, 0.25])
    for k in range(dom.n):
        x = np.array([0.4, 0.3, -0.2])
        x[k] = 0.0
        assert g0n(x, xi, dom) == 0.0


@pytest.mark.parametrize("dom", [DOM1, DOM2])
def test_g0n_symmetry(dom):
    pts = interior_points(dom, 60, seed=11)
    for x, xi in zip(pts[:30], pts[30:]):
        assert g0n(x, xi, dom) == pytest.approx(g0n(xi, x, dom), rel=1e-8)


def test_g0n_errors():
    xi = np.array([0.3, 0.2, 0.25])
    with pytest.raises(DiagonalError):
        g0n(xi, xi, DOM1)
    with pytest.raises(DomainError):
        g0n(xi, np.zeros(3), DOM1)
    with pytest.raises(DomainError):
        g0n(xi, np.array([0.0, 0.2, 0.3]), DOM1)
    with pytest.raises(DomainError):
        g0n(xi, np.array([0.8, 0.6, 0.3]), DOM1)


def test_flat_path_selection():
    path, gap = validate_flat_paths(DOM1)
    assert path == "a" and gap < 1e-12
    # the printed omega~ carries an extra R^2/rho^2 factor; visible once n >= 2
    path, gap = validate_flat_paths(DOM2)
    assert path == "b" and gap > 1e-2


@pytest.mark.parametrize("dom,k", [(DOM1, 0), (DOM2, 0), (DOM2, 1)])
def test_flat_kernel_against_finite_differences(dom, k):
    # x_k^(2alpha_k) d/dx_k g0n at small x_k, times x~^(2alpha)
    sp = dom.sp
    xi = np.array([0.3, 0.2, 0.25])
    x = np.array([0.35, 0.45, -0.3])
    eps, h = 1e-4, 1e-7
    up, um = x.copy(), x.copy()
    up[k], um[k] = eps + h, eps - h
    d = (g0n(up, xi, dom, FINE) - g0n(um, xi, dom, FINE)) / (2 * h)
    rest = [i for i in range(sp.n) if i != k]
    w = np.prod(x[rest] ** (2 * sp.alpha_arr[rest])) if rest else 1.0
    assert flat_kernel(x, xi, k, dom, "b") == pytest.approx(w * eps ** (2 * sp.alpha[k]) * d, rel=1e-4)


def test_constant_data():
    d = builtin_data("const1", DOM1)
    u = solve_ball(d, interior_points(DOM1, 20, seed=5), DOM1, 64)
    assert np.max(np.abs(u - 1)) <= 1e-3


def test_zero_data():
    zero = BoundaryData.from_function(lambda p: np.zeros(np.shape(p)[:-1]), 2)
    assert solve_ball(zero, np.array([0.3, 0.2, 0.1]), DOM2, 16) == 0.0
    assert solve_general(BoundaryData.from_function(zero.phi, 1), np.array([0.3, 0.2, 0.1]),
                         DOM1, 12) == 0.0


def test_linearity():
    d1, d2 = builtin_data("coordinate", DOM2), builtin_data("product", DOM2)
    pts = interior_points(DOM2, 3, seed=8)
    u1, u2 = solve_ball(d1, pts, DOM2, 32), solve_ball(d2, pts, DOM2, 32)
    u = solve_ball(d1.combine(2.5, d2, -0.75), pts, DOM2, 32)
    np.testing.assert_allclose(u, 2.5 * u1 - 0.75 * u2, rtol=1e-12)


@pytest.mark.parametrize("dom", [DOM1, DOM2])
def test_exact_polynomial_solution(dom):
    g = poly_solution(dom)
    pts = np.vstack([interior_points(dom, 5, seed=2),
                     [[0.01, 0.5, 0.4], [0.4, 0.01, 0.5], [0.4752, 0.594, 0.6336]]])
    u = solve_ball(BoundaryData.from_function(g, dom.n), pts, dom, 64)
    np.testing.assert_allclose(u, g(pts), atol=1e-5)


@pytest.mark.parametrize("dom", [DOM1, DOM2])
def test_sphere_attainment(dom):
    d = builtin_data("coordinate", dom)
    t = np.array([0.48, 0.6, 0.64])
    gaps = [abs(solve_ball(d, (1 - s) * t, dom, 64) - t[2]) for s in (0.1, 0.03, 0.01)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 1e-2


def test_flat_attainment_non_solution_data():
    # data that do not solve the equation: u - tau ~ C xi_1^(1 - 2 alpha)
    d = builtin_data("product", DOM1)
    gaps = [abs(solve_ball(d, np.array([s, 0.5, 0.4]), DOM1, 64) - 1.0) for s in (0.03, 0.01, 0.003)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[1] / gaps[2] == pytest.approx((0.01 / 0.003) ** 0.4, rel=0.05)


def test_maximum_principle():
    d = builtin_data("coordinate", DOM1)
    u = solve_ball(d, interior_points(DOM1, 15, seed=9, margin=0.02), DOM1, 64)
    assert u.min() >= -1 - 2e-3 and u.max() <= 1 + 2e-3


def test_interior_pde_residual():
    d = builtin_data("product", DOM1)
    u = lambda p: solve_ball(d, p, DOM1, 64)
    for x in interior_points(DOM1, 10, seed=4, margin=0.2):
        assert pde_residual(u, x, DOM1.sp, 1e-3) <= 1e-3


def test_near_boundary_flag():
    d = builtin_data("coordinate", DOM1)
    xi = np.array([0.48, 0.6, 0.64]) * 0.995
    with pytest.warns(NearBoundaryWarning):
        solve_ball(d, xi, DOM1, 32, adapt=False)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        u, info = solve_ball(d, xi, DOM1, 32, return_info=True)
    assert info["flags"]["near_boundary"] and info["flat_path"] == "a"
    assert u == pytest.approx(xi[2], abs=1e-6)


def test_boundary_xi_rejected():
    d = builtin_data("const1", DOM1)
    with pytest.raises(DomainError):
        solve_ball(d, np.array([0.6, 0.0, 0.8]), DOM1, 16)
    with pytest.raises(DomainError):
        solve_ball(d, np.array([0.0, 0.3, 0.4]), DOM1, 16)


def test_general_pipeline_matches_ball_formula():
    d = builtin_data("product", DOM1)
    pts = interior_points(DOM1, 4, seed=21, margin=0.1)
    np.testing.assert_allclose(solve_general(d, pts, DOM1, 24), solve_ball(d, pts, DOM1, 64), atol=3e-2)


def test_h_vanishes_on_ball():
    x, xi = np.array([0.5, 0.3, -0.4]), np.array([0.3, 0.2, 0.1])
    g = g0n(x, xi, DOM1)
    assert abs(h_nystrom(x, xi, DOM1, 24)) <= 3e-2 * abs(g)
    assert abs(h_correction(x, xi, DOM1, 24)) <= 1e-8 * abs(g)

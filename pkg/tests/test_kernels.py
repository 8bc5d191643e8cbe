import math

import mpmath as mp
import numpy as np
import pytest

from singpot.errors import DiagonalError, DomainError
from singpot.kernels import (
    ScalarField,
    SingularParams,
    conormal,
    conormal_log,
    dl_kernel,
    flat_normal_limit,
    kernel_geometry,
    pde_residual,
    q_gradient,
    q_n,
    q_n_series,
)
from singpot.specialfun import SeriesControl

SP31 = SingularParams(3, (0.3,))
SP42 = SingularParams(4, (0.2, 0.4))
FINE = SeriesControl(rel_tol=1e-16)


def random_points(rng, sp, size, lo=0.05, hi=1.5):
    p = rng.uniform(-hi, hi, (size, sp.m))
    p[:, :sp.n] = rng.uniform(lo, hi, (size, sp.n))
    return p


def raw_q(xi, x, sp):
    """The defining formula in mpmath; hyp2f1/appellf2 continue analytically."""
    xi = [mp.mpf(v) for v in xi]
    x = [mp.mpf(v) for v in x]
    r2 = sum((a - b) ** 2 for a, b in zip(xi, x))
    ab = mp.mpf(sp.alpha_bar)
    kappa = (mp.mpf(2) ** (2 * ab - sp.m) * mp.gamma(ab) / mp.pi ** (mp.mpf(sp.m) / 2)
             * mp.fprod(mp.gamma(1 - a) / mp.gamma(2 - 2 * a) for a in sp.alpha))
    w = mp.fprod((xi[k] * x[k]) ** (1 - 2 * sp.alpha[k]) for k in range(sp.n))
    sig = [-4 * xi[k] * x[k] / r2 for k in range(sp.n)]
    assert sp.n == 1
    return float(kappa * w * r2 ** (-ab) * mp.hyp2f1(ab, 1 - sp.alpha[0], 2 - 2 * sp.alpha[0], sig[0]))


def test_params_derived():
    assert SP31.alpha_bar == pytest.approx(1.2)
    ref = 2 ** (2.4 - 3) * math.gamma(1.2) / math.pi ** 1.5 * math.gamma(0.7) / math.gamma(1.4)
    assert SP31.kappa == pytest.approx(ref, rel=1e-15)
    assert SP42.alpha_bar == pytest.approx(1 + 0.8 + 0.6)
    assert SP42.kappa > 0


@pytest.mark.parametrize("m,alpha", [(2, (0.3,)), (3, (0.5,)), (3, (0.0,)), (3, (0.1,) * 4)])
def test_params_invalid(m, alpha):
    with pytest.raises(DomainError):
        SingularParams(m, alpha)


def test_geometry_invariants():
    rng = np.random.default_rng(10)
    xi, x = random_points(rng, SP42, 200), random_points(rng, SP42, 200)
    g = kernel_geometry(xi, x, SP42)
    np.testing.assert_allclose(g.r_k ** 2 - g.r[:, None] ** 2, 4 * xi[:, :2] * x[:, :2], rtol=1e-12)
    np.testing.assert_allclose(g.sigma, 1 - g.r_k ** 2 / g.r[:, None] ** 2, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(g.omega, 1 - g.r[:, None] ** 2 / g.r_k ** 2, rtol=1e-10, atol=1e-14)
    h = kernel_geometry(x, xi, SP42)
    np.testing.assert_allclose(g.sigma, h.sigma, rtol=1e-15)


def test_geometry_rejects_outside_octant():
    with pytest.raises(DomainError):
        kernel_geometry([-0.1, 0, 0], [1, 0, 0], SP31)


def test_cross_representation_example():
    xi, x = (1.0, 0.0, 0.5), (1.2, 0.1, 0.6)
    assert q_n(np.array(xi), np.array(x), SP31) == pytest.approx(raw_q(xi, x, SP31), rel=1e-8)


def test_series_form_where_it_converges():
    # far apart pairs keep |sigma| small, so the raw series applies
    xi = np.array([0.2, 0.1, 0.3, -0.2])
    x = np.array([0.3, 0.25, 1.8, 1.5])
    assert q_n(xi, x, SP42) == pytest.approx(q_n_series(xi, x, SP42), rel=1e-12)


def test_mpmath_random_n1():
    rng = np.random.default_rng(11)
    xi, x = random_points(rng, SP31, 25), random_points(rng, SP31, 25)
    got = q_n(xi, x, SP31)
    for i in range(25):
        assert got[i] == pytest.approx(raw_q(xi[i], x[i], SP31), rel=1e-11)


@pytest.mark.parametrize("sp", [SP31, SP42])
def test_vanishes_on_singular_hyperplanes(sp):
    rng = np.random.default_rng(12)
    xi, x = random_points(rng, sp, 20), random_points(rng, sp, 20)
    for k in range(sp.n):
        xk = x.copy()
        xk[:, k] = 0.0
        assert np.max(np.abs(q_n(xi, xk, sp))) <= 1e-12
        assert np.max(np.abs(q_n(xk, xi, sp))) <= 1e-12


@pytest.mark.parametrize("sp", [SP31, SP42])
def test_symmetry(sp):
    rng = np.random.default_rng(13)
    xi, x = random_points(rng, sp, 50), random_points(rng, sp, 50)
    np.testing.assert_allclose(q_n(xi, x, sp), q_n(x, xi, sp), rtol=1e-12)


def test_positive_on_samples():
    rng = np.random.default_rng(14)
    for sp in (SP31, SP42):
        xi, x = random_points(rng, sp, 300), random_points(rng, sp, 300)
        assert np.all(q_n(xi, x, sp) > 0)


def test_diagonal_error():
    p = np.array([0.3, 0.2, 0.1])
    with pytest.raises(DiagonalError):
        q_n(p, p, SP31)
    with pytest.raises(DiagonalError):
        dl_kernel(p, np.array([1.0, 0, 0]), p, SP31)


@pytest.mark.parametrize("sp", [SP31, SP42])
def test_gradient_against_differences(sp):
    rng = np.random.default_rng(15)
    h = 1e-6
    for _ in range(10):
        xi, x = random_points(rng, sp, 1, lo=0.3)[0], random_points(rng, sp, 1, lo=0.3)[0]
        g = q_gradient(xi, x, sp, FINE)
        fd = [(q_n(xi + h * e, x, sp, FINE) - q_n(xi - h * e, x, sp, FINE)) / (2 * h)
              for e in np.eye(sp.m)]
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-8 * np.max(np.abs(g)))
        np.testing.assert_allclose(q_gradient(xi, x, sp, wrt="x"), q_gradient(x, xi, sp))


def test_conormal_examples():
    const = ScalarField(lambda p: 3.0, lambda p: np.zeros(3))
    x = np.array([0.4, 0.2, 0.3])
    assert conormal(const, x, np.array([0.6, 0.0, 0.8]), SP31) == 0.0
    lin = ScalarField(lambda p: p[0], lambda p: np.array([1.0, 0, 0]))
    assert conormal(lin, x, np.array([1.0, 0, 0]), SP31) == pytest.approx(0.4 ** 0.6, rel=1e-15)
    # numerical gradient when none is supplied
    assert conormal(ScalarField(lambda p: p[0]), x, np.array([1.0, 0, 0]), SP31) == pytest.approx(
        0.4 ** 0.6, rel=1e-9)


def test_conormal_log_against_differences():
    rng = np.random.default_rng(16)
    for sp in (SP31, SP42):
        for _ in range(20):
            xi, x = random_points(rng, sp, 1, lo=0.3)[0], random_points(rng, sp, 1)[0]
            nrm = rng.normal(size=sp.m)
            nrm /= np.linalg.norm(nrm)
            field = ScalarField(lambda p: -np.log(np.linalg.norm(x - p)), step=1e-5)
            ref = conormal(field, xi, nrm, sp)
            assert conormal_log(xi, nrm, x, sp) == pytest.approx(ref, rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("sp", [SP31, SP42])
def test_dl_kernel_against_differences(sp):
    # the cos(N, xi_k) reading of the B2 sum; the alternative fails this test
    rng = np.random.default_rng(17)
    h = 1e-6
    for _ in range(30):
        xi, x = random_points(rng, sp, 1, lo=0.2)[0], random_points(rng, sp, 1, lo=0.2)[0]
        nrm = rng.normal(size=sp.m)
        nrm /= np.linalg.norm(nrm)
        field = ScalarField(lambda p: q_n(p, x, sp, FINE), step=h)
        ref = conormal(field, xi, nrm, sp)
        got = dl_kernel(xi, nrm, x, sp, FINE)
        assert got == pytest.approx(ref, rel=1e-6, abs=1e-9 * abs(float(
            np.prod(xi[:sp.n] ** (2 * sp.alpha_arr)) * np.linalg.norm(q_gradient(xi, x, sp)))))


def test_dl_kernel_vanishes_at_hyperplane():
    # the kernel carries the weight x_k^(1-2alpha_k) (and xi_k^(1-2alpha_k) through B1)
    nrm = np.array([0.6, 0.0, 0.8])
    xi = np.array([0.5, 0.2, 0.4])
    ts = (1e-4, 1e-6, 1e-8)
    vals = [abs(dl_kernel(xi, nrm, np.array([t, 0.3, 0.9]), SP31)) for t in ts]
    assert vals[2] / vals[1] == pytest.approx(1e-2 ** 0.4, rel=1e-3)
    # on the sphere N_k = xi_k / R, so the xi-side limit is linear
    pts = [np.array([t, 0.6, 0.8]) for t in ts]
    vals = [abs(dl_kernel(p, p / np.linalg.norm(p), xi, SP31)) for p in pts]
    assert vals[2] / vals[1] == pytest.approx(1e-2, rel=1e-3)


def test_dl_kernel_near_diagonal_bound():
    # points and normals on the unit hemisphere x_1 > 0
    rng = np.random.default_rng(18)
    sp = SP31
    v = rng.normal(size=(1000, 3))
    v[:, 0] = np.abs(v[:, 0]) + 0.2
    t = v / np.linalg.norm(v, axis=1)[:, None]
    d = rng.normal(size=(1000, 3))
    d -= np.sum(d * t, axis=1)[:, None] * t
    d /= np.linalg.norm(d, axis=1)[:, None]
    eps = 10 ** rng.uniform(-6, -1, 1000)
    s = t * np.cos(eps)[:, None] + d * np.sin(eps)[:, None]
    k = dl_kernel(s, s, t, sp)
    g = kernel_geometry(s, t, sp)
    scaled = np.abs(k) * g.r ** (sp.m - 2) * g.r_weight(sp)
    assert np.all(np.isfinite(scaled))
    assert np.max(scaled) < 10.0


def test_flat_normal_limit_matches_derivative():
    sp = SP42
    eta = np.array([0.4, 0.3, 0.2, -0.1])
    for k in range(2):
        base = np.array([0.5, 0.6, 0.1, 0.3])
        lim = flat_normal_limit(eta, base, k, sp)
        vals = []
        for t in (1e-3, 1e-4, 1e-5):
            p = base.copy()
            p[k] = t
            e = np.zeros(4)
            e[k] = 1e-3 * t
            vals.append(t ** (2 * sp.alpha[k]) * (q_n(eta, p + e, sp, FINE) - q_n(eta, p - e, sp, FINE))
                        / (2e-3 * t))
        errs = [abs(v - lim) for v in vals]
        assert errs[-1] < 1e-2 * abs(lim) and errs[-1] < errs[0]


def test_pde_residual_constant():
    assert pde_residual(lambda p: 1.0, np.array([0.5, 0.5, 0.5]), SP31, 1e-3) == 0.0


def test_pde_residual_step_check():
    with pytest.raises(DomainError):
        pde_residual(lambda p: 1.0, np.array([0.01, 0.5, 0.5]), SP31, 1e-2)


@pytest.mark.parametrize("sp,xi0,x,tol", [
    (SP31, [0.5, 0.2, 0.1], [1.1, 0.7, 0.9], 1e-5),
    (SP42, [0.5, 0.6, 0.2, 0.1], [1.1, 0.9, 0.7, 0.9], 1e-4),
])
def test_pde_residual_order(sp, xi0, x, tol):
    xi0, x = np.array(xi0), np.array(x)
    u = lambda p: q_n(xi0, p, sp, FINE)
    res = [pde_residual(u, x, sp, h) for h in (1e-2, 1e-3, 1e-4)]
    assert res[2] <= tol
    slope = math.log10(res[0] / res[1])
    assert 1.8 <= slope <= 2.2
    assert res[2] < res[1]


def _loglog_slope(vals, radii):
    return np.polyfit(np.log(radii), np.log(vals), 1)[0]


@pytest.mark.parametrize("sp", [SP31, SP42])
def test_far_field_parallel_rays(sp):
    # rays keeping the singular coordinates fixed decay like |x|^(-2 abar)
    xi = np.full(sp.m, 0.3)
    radii = np.logspace(1, 4, 12)
    d = np.zeros(sp.m)
    d[sp.n:] = 1.0 / math.sqrt(sp.m - sp.n)
    pts = xi + radii[:, None] * d
    vals = q_n(xi, pts, sp)
    assert abs(_loglog_slope(vals, radii) + 2 * sp.alpha_bar) < 0.05


@pytest.mark.parametrize("sp", [SP31, SP42])
def test_far_field_generic_rays(sp):
    # generic rays carry the growing weight x^(1-2alpha): slope 2 - m - n
    xi = np.full(sp.m, 0.3)
    radii = np.logspace(1, 4, 12)
    d = np.ones(sp.m) / math.sqrt(sp.m)
    vals = q_n(xi, radii[:, None] * d, sp)
    assert abs(_loglog_slope(vals, radii) - (2 - sp.m - sp.n)) < 0.05

"""Levi forms, the mollifier, and the regularized maximum.

The frozen constants below were produced by quadratures that are independent
of the shipped code paths (dense Gauss-Legendre for the bump integral, radial
Gauss-Legendre in polar form for the kernel moments) and pin the shipped
discretizations against silent drift.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coversmooth.geometry import Disk, Polydisk, field_from_function, sample_grid
from coversmooth.psh import (
    BUMP_INTEGRAL,
    BUMP_NORMALIZATION,
    bump_profile,
    c2_refinement_ratio,
    laplacian_sup,
    levi_form_many,
    min_levi_eigenvalue,
    mollifier_kernel,
    mollify,
    reg_max_fields,
    reg_max_many,
    reg_max_scalar,
    regmax_kernel,
)

# int_{-1}^{1} exp(-1/(1-t^2)) dt, Gauss-Legendre order 200
BUMP_INTEGRAL_FROZEN = 0.443993816169

# second moment of the normalized bump mollifier on the unit ball of R^{2n},
# continuum value via radial quadrature and the shipped lattice kernels
M2_CONTINUUM = {2: 0.261311203421, 4: 0.391048442228}
M2_DISCRETE = {(2, 8): 0.262566820262, (4, 8): 0.393707629037}
KERNEL_NODE_COUNTS = {(2, 8): 40, (4, 8): 496, (4, 6): 176}

# M_eta(0, 0) = c0 * eta for the order-16 quadrature
REGMAX_C0_ORDER16 = 0.226932059917525


def _bump(t):
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


def test_bump_integral_matches_independent_quadrature():
    x, w = np.polynomial.legendre.leggauss(200)
    oracle = float(np.sum(w * bump_profile(x)))
    assert abs(oracle - BUMP_INTEGRAL_FROZEN) < 1e-9
    assert abs(BUMP_INTEGRAL - BUMP_INTEGRAL_FROZEN) < 1e-9
    assert BUMP_NORMALIZATION == pytest.approx(1.0 / BUMP_INTEGRAL, rel=1e-15)


def test_mollifier_second_moment_against_polar_oracle():
    """Radial oracle: m2 = int r^2 rho r^{d-1} dr / int rho r^{d-1} dr."""
    x, w = np.polynomial.legendre.leggauss(400)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * w
    for two_n in (2, 4):
        sdim = two_n - 1
        num = float(np.sum(wr * r ** 2 * _bump(r) * r ** sdim))
        den = float(np.sum(wr * _bump(r) * r ** sdim))
        oracle = num / den
        assert oracle == pytest.approx(M2_CONTINUUM[two_n], abs=1e-9)
        kern = mollifier_kernel(two_n, 8)
        # the lattice kernel carries a small but stable discretization offset
        assert kern.m2_unit == pytest.approx(M2_DISCRETE[(two_n, 8)], abs=1e-9)
        assert abs(kern.m2_unit - oracle) < 5e-3


def test_mollifier_kernel_shapes_and_weight_normalization():
    for (two_n, order), count in KERNEL_NODE_COUNTS.items():
        kern = mollifier_kernel(two_n, order)
        assert kern.offsets.shape == (count, two_n // 2)
        assert kern.weights.shape == (count,)
        assert float(kern.weights.sum()) == pytest.approx(1.0, abs=1e-12)
        assert kern.order == order
        assert kern.two_n == two_n


def test_mollify_shifts_a_quadratic_by_exactly_eps2_m2():
    # for u = |z|^2 the averaged increment is eps^2 times the kernel moment
    dom = Disk(0.0, 1.0)
    f = field_from_function(lambda Z: np.abs(Z[:, 0]) ** 2, dom, name="sq")
    eps = 0.07
    fe = mollify(f, eps)
    kern = mollifier_kernel(2, 8)
    pts = np.array([[0.0j], [0.3 + 0.1j], [-0.5 + 0.2j]])
    d = fe.eval_many(pts) - f.eval_many(pts)
    assert np.max(np.abs(d - eps ** 2 * kern.m2_unit)) < 1e-12


def test_mollify_shrinks_the_valid_domain():
    f = field_from_function(lambda Z: np.abs(Z[:, 0]) ** 2, Disk(0.0, 1.0), name="sq")
    fe = mollify(f, 0.07)
    assert not fe.valid_on.contains_many(np.array([[0.95 + 0j]]))[0]
    assert fe.valid_on.contains_many(np.array([[0.9 + 0j]]))[0]


def test_mollify_keeps_a_kinked_max_psh():
    def kinked(Z):
        r2 = np.abs(Z[:, 0]) ** 2
        return np.maximum(r2, 1.2 * r2 - 0.02)

    f = field_from_function(kinked, Disk(0.0, 0.8), name="kinked")
    fe = mollify(f, 0.05)
    g = sample_grid(Disk(0.0, 0.5), 8e-3)
    rep = min_levi_eigenvalue(fe, g, 4e-3)
    assert rep.min_eigenvalue >= -1e-6


def test_levi_of_planar_cone_matches_closed_form():
    """For u = 2|z| the density is u_rr + u_r / r over 4, i.e. 1 / (2|z|)."""
    g = field_from_function(lambda Z: 2.0 * np.abs(Z[:, 0]), Disk(0.0, 2.0), name="2r")
    z0 = 0.7 + 0.2j
    L = levi_form_many(g, np.array([[z0]]), 1e-3)[0]
    assert L[0, 0].real == pytest.approx(1.0 / (2.0 * abs(z0)), rel=1e-5)


def test_levi_of_modulus_in_two_variables():
    # |F| with F = z1: the only nonzero entry is 1 / (4 |z1|)
    f = field_from_function(lambda Z: np.abs(Z[:, 0]), Polydisk((0, 0), (2, 2)), name="m")
    p0 = np.array([[0.8 + 0.1j, -0.3 + 0.4j]])
    L = levi_form_many(f, p0, 1e-3)[0]
    assert L[0, 0].real == pytest.approx(1.0 / (4.0 * abs(0.8 + 0.1j)), rel=1e-5)
    assert abs(L[1, 1]) < 1e-12
    assert abs(L[0, 1]) < 1e-12


def test_levi_annihilates_pluriharmonic_cubic():
    f = field_from_function(lambda Z: np.real(Z[:, 0] ** 3), Disk(0.0, 2.0), name="h")
    L = levi_form_many(f, np.array([[0.7 + 0.2j]]), 1e-3)[0]
    assert abs(L[0, 0]) < 1e-9


def test_min_levi_eigenvalue_report():
    f = field_from_function(lambda Z: 2.0 * np.abs(Z[:, 0]) ** 2, Disk(0.0, 1.0), name="q")
    g = sample_grid(Disk(0.0, 0.4), 0.02)
    rep = min_levi_eigenvalue(f, g, 0.01)
    assert rep.min_eigenvalue == pytest.approx(2.0, rel=1e-6)
    assert rep.argmin_location.n == 1


def test_laplacian_sup_of_quadratic():
    f = field_from_function(lambda Z: np.abs(Z[:, 0]) ** 2, Disk(0.0, 1.0), name="sq")
    g = sample_grid(Disk(0.0, 0.4), 0.02)
    assert laplacian_sup(f, g, 0.01) == pytest.approx(4.0, abs=1e-9)


def test_c2_refinement_ratio_separates_kink_from_smooth():
    gh = sample_grid(Disk(0.0, 0.05), 0.01)
    gh2 = sample_grid(Disk(0.0, 0.05), 0.005)
    kink = field_from_function(lambda Z: 2.0 * np.abs(Z[:, 0]), Disk(0.0, 2.0), name="k")
    smooth = field_from_function(lambda Z: np.abs(Z[:, 0]) ** 2, Disk(0.0, 2.0), name="s")
    assert c2_refinement_ratio(kink, gh, gh2) >= 1.9
    assert c2_refinement_ratio(smooth, gh, gh2) <= 1.1


def test_regmax_kernel_fields_and_frozen_c0():
    kern = regmax_kernel(16)
    assert kern.order == 16
    assert kern.nodes.shape == (16,)
    assert kern.weights.shape == (16,)
    # M_eta(t, t) = t + c0 eta; frozen regression for the order-16 rule
    c0 = reg_max_scalar(0.0, 0.0, 1.0)
    assert c0 == pytest.approx(REGMAX_C0_ORDER16, abs=1e-12)
    for t, eta in ((1.3, 0.25), (-4.0, 1e-3)):
        assert reg_max_scalar(t, t, eta) == pytest.approx(t + c0 * eta, rel=1e-12)


finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
etas = st.floats(1e-4, 2.0, allow_nan=False, allow_infinity=False)


@given(finite, finite, etas)
@settings(max_examples=200, deadline=None)
def test_regmax_sits_between_max_and_max_plus_eta(a, b, eta):
    m = reg_max_scalar(a, b, eta)
    assert max(a, b) - 1e-12 <= m <= max(a, b) + eta + 1e-12


@given(finite, finite, etas)
@settings(max_examples=200, deadline=None)
def test_regmax_is_symmetric(a, b, eta):
    assert reg_max_scalar(a, b, eta) == pytest.approx(
        reg_max_scalar(b, a, eta), abs=1e-12
    )


@given(finite, finite, finite, etas)
@settings(max_examples=200, deadline=None)
def test_regmax_translation_equivariance(a, b, c, eta):
    assert reg_max_scalar(a + c, b + c, eta) == pytest.approx(
        reg_max_scalar(a, b, eta) + c, abs=1e-9
    )


@given(finite, finite, st.floats(0, 10, allow_nan=False), st.floats(0, 10, allow_nan=False), etas)
@settings(max_examples=200, deadline=None)
def test_regmax_monotone_in_both_arguments(a, b, da, db, eta):
    assert reg_max_scalar(a + da, b + db, eta) >= reg_max_scalar(a, b, eta) - 1e-12


@given(finite, st.floats(1e-3, 5, allow_nan=False), etas, st.booleans())
@settings(max_examples=200, deadline=None)
def test_regmax_exact_max_outside_the_switching_tube(a, gap, eta, sign):
    # a strict separation |t1 - t2| > 2 eta collapses to the plain maximum,
    # bit for bit (the gap keeps rounding from re-entering the tube)
    b = a + (1.0 if sign else -1.0) * (2.0 * eta + gap)
    assert reg_max_scalar(a, b, eta) == max(a, b)


@given(finite, finite, finite, finite, etas)
@settings(max_examples=200, deadline=None)
def test_regmax_midpoint_convexity(a1, b1, a2, b2, eta):
    mid = reg_max_scalar(0.5 * (a1 + a2), 0.5 * (b1 + b2), eta)
    avg = 0.5 * (reg_max_scalar(a1, b1, eta) + reg_max_scalar(a2, b2, eta))
    assert mid <= avg + 1e-9


def test_reg_max_many_matches_scalar():
    rng = np.random.default_rng(7)
    T1 = rng.uniform(-5, 5, 64)
    T2 = rng.uniform(-5, 5, 64)
    M = reg_max_many(T1, T2, 0.3)
    for i in (0, 13, 40, 63):
        assert M[i] == pytest.approx(reg_max_scalar(T1[i], T2[i], 0.3), abs=1e-14)


def test_reg_max_fields_preserves_psh_across_the_switch():
    dom = Disk(0.0, 0.8)
    u = field_from_function(lambda Z: np.abs(Z[:, 0] - 0.2) ** 2, dom, name="u")
    v = field_from_function(lambda Z: np.abs(Z[:, 0] + 0.2) ** 2 + 0.05, dom, name="v")
    w = reg_max_fields(u, v, 0.05)
    g = sample_grid(Disk(0.0, 0.5), 8e-3)
    rep = min_levi_eigenvalue(w, g, 4e-3)
    assert rep.min_eigenvalue >= -1e-6

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fqhe_torus.curvature import (
    CenterMassModel,
    GramField,
    WenSlice,
    bott_chern_curvature,
    center_mass_field,
    derivative_matrix,
    expected_trace_coefficient,
    field_from_function,
    fit_profile,
    flatness_residual,
    fornberg_weights,
    gram_field,
    measure_gamma,
    one_particle_field,
    profile_field,
    richardson_gap,
    sampled_field,
    trace_form_and_degree,
    xi_area_form_integral,
)
from fqhe_torus.errors import GridTooCoarse, ValidationError
from fqhe_torus.geometry import LineBundleSpec
from fqhe_torus.integration import GridSpec
from fqhe_torus.laughlin import OneLayerModel
from fqhe_torus.wen import kappa_closed, validate_wen

K2 = [[2, 1], [1, 2]]
TAUS = [1j, 0.3 + 0.8j]


def gaussian_field(rates, tau, M, gamma=1.0):
    """Diagonal field ``diag(gamma exp(rate_k a^2))``."""
    return field_from_function(lambda a, b: gamma * np.diag(np.exp(np.asarray(rates) * a * a)), tau, M)


# ---- stencils ----------------------------------------------------------


def test_fornberg_classic_weights():
    assert np.allclose(fornberg_weights([-1, 0, 1], 2), [1, -2, 1])
    assert np.allclose(fornberg_weights([-1, 0, 1], 1), [-0.5, 0, 0.5])
    assert np.allclose(fornberg_weights([-2, -1, 0, 1, 2], 2), [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])
    assert np.allclose(fornberg_weights([0, 1, 2], 1), [-1.5, 2, -0.5])


@pytest.mark.parametrize("deriv", [1, 2])
@pytest.mark.parametrize("accuracy", [4, 6, 10])
def test_one_sided_stencils_exact_on_polynomials(deriv, accuracy):
    M = 24
    x = np.arange(M) / M
    D = derivative_matrix(M, deriv, accuracy, periodic=False)
    for p in range(accuracy + 1):
        f = (x - 0.4) ** p
        exact = math.perm(p, deriv) * (x - 0.4) ** (p - deriv) if p >= deriv else 0 * x
        assert np.allclose(D @ f, exact, atol=1e-7 * max(1, math.perm(p, deriv)))


def test_periodic_stencils_on_fourier_modes():
    M = 32
    x = np.arange(M) / M
    f = np.exp(2j * np.pi * x)
    d1 = derivative_matrix(M, 1, 10, periodic=True) @ f
    d2 = derivative_matrix(M, 2, 10, periodic=True) @ f
    assert np.allclose(d1, 2j * np.pi * f, rtol=1e-7)
    assert np.allclose(d2, -(2 * np.pi) ** 2 * f, rtol=1e-7)


def test_stencil_too_wide_for_grid():
    with pytest.raises(GridTooCoarse):
        derivative_matrix(8, 2, 10, periodic=False)


# ---- GramField ---------------------------------------------------------


def test_field_rejects_non_hermitian():
    C = np.zeros((4, 4, 2, 2), dtype=complex)
    C[...] = [[1, 0.5], [0, 1]]
    with pytest.raises(ValidationError):
        GramField(1j, C, "closed-form")


def test_field_rejects_indefinite():
    C = np.zeros((4, 4, 2, 2))
    C[...] = [[1, 2], [2, 1]]
    with pytest.raises(ValidationError):
        GramField(1j, C, "closed-form")


def test_field_rejects_bad_shape_and_provenance():
    with pytest.raises(ValidationError):
        GramField(1j, np.ones((4, 3, 1, 1)), "closed-form")
    with pytest.raises(ValidationError):
        GramField(1j, np.ones((4, 4, 1, 1)), "made-up")


def test_subsample_needs_even_grid():
    with pytest.raises(GridTooCoarse):
        gaussian_field([1.0], 1j, 33).subsampled()


# ---- curvature ---------------------------------------------------------


def test_constant_field_is_flat():
    f = field_from_function(lambda a, b: np.eye(2), 0.3 + 0.8j, 32)
    assert np.abs(bott_chern_curvature(f)).max() < 1e-10


@pytest.mark.parametrize("tau", TAUS)
@pytest.mark.parametrize("model_kind", ["one-layer-2", "one-layer-3", "two-layer"])
def test_profile_field_trace_coefficient(tau, model_kind):
    if model_kind == "two-layer":
        model = WenSlice(validate_wen(K2, [1, 1]), tau)
        n, delta, d = 2, 3, 3
    else:
        m = int(model_kind[-1])
        model = OneLayerModel(m, 2, tau)
        n, delta, d = 2, m, 2 * m
    t = tau.imag
    report = trace_form_and_degree(profile_field(model, 64, gamma=0.7))
    expected = expected_trace_coefficient(n, delta, d, t)
    assert np.abs(report.trace / expected - 1).max() < 1e-6
    assert abs(report.degree + n * delta / d) < 1e-6
    assert abs(abs(report.slope) - n / d) < 1e-6
    assert report.flatness_residual < 1e-8
    assert report.rank == delta


def test_per_entry_coefficient_matches_analytic():
    # e^{2 pi t (n/d) a^2} I has coefficient -(pi/t)(n/d) I
    tau = 1j
    f = profile_field(OneLayerModel(3, 2, tau), 64)
    coef = bott_chern_curvature(f, (17, 5))
    assert np.allclose(coef, -math.pi / 3 * np.eye(3), rtol=1e-6, atol=0)


def test_scalar_field_has_zero_off_diagonals():
    coef = bott_chern_curvature(profile_field(WenSlice(validate_wen(K2, [1, 1]), 1j), 64))
    off = coef * (1 - np.eye(3))
    assert np.all(off == 0)


def test_diagonal_field_with_distinct_rates():
    # independent oracle: each diagonal entry contributes -rate/(2 t^2)
    tau = 0.3 + 0.8j
    rates = [1.0, 2.5]
    coef = bott_chern_curvature(gaussian_field(rates, tau, 64))
    expected = -np.array(rates) / (2 * tau.imag ** 2)
    assert np.allclose(np.einsum("ijkk->ijk", coef), expected, rtol=1e-7)
    assert flatness_residual(coef) > 0.1


def test_b_dependence_enters_through_mixed_terms():
    # scalar field: the coefficient is -d_xi d_xibar log C, checked on a profile depending on a and b
    tau = 0.3 + 0.8j
    t = tau.imag

    def logc(a, b):
        return 0.4 * a * a + 0.2 * np.cos(2 * np.pi * b)

    f = field_from_function(lambda a, b: np.array([[np.exp(logc(a, b))]]), tau, 64)
    coef = bott_chern_curvature(f)[..., 0, 0]
    b = f.b[None, :]
    # d_xi d_xibar = (d_aa - 2 Re(tau) d_ab + |tau|^2 d_bb) / (4 t^2)
    lap = (0.8 + abs(tau) ** 2 * (-0.2 * (2 * np.pi) ** 2 * np.cos(2 * np.pi * b))) / (4 * t * t)
    assert np.allclose(coef, -lap * np.ones((64, 1)), rtol=1e-6, atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(re=st.floats(-3, 3), im=st.floats(-3, 3))
def test_rescaled_frame_leaves_curvature_unchanged(re, im):
    factor = complex(re, im)
    if abs(factor) < 1e-2:
        factor = 1.0
    f = profile_field(OneLayerModel(2, 2, 0.3 + 0.8j), 32, 1.5)
    assert np.allclose(bott_chern_curvature(f), bott_chern_curvature(f.rescaled(factor)), rtol=1e-9, atol=1e-12)


def test_constant_frame_change_conjugates_curvature(rng):
    tau = 1j
    f = gaussian_field([1.0, 3.0], tau, 32)
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) + 2 * np.eye(2)
    g = GramField(tau, A @ f.C @ A.conj().T, "closed-form")
    k_f = bott_chern_curvature(f)
    k_g = bott_chern_curvature(g)
    assert np.allclose(k_g, A @ k_f @ np.linalg.inv(A), atol=1e-8)


def test_steep_field_trips_richardson_check():
    f = profile_field(WenSlice(validate_wen(K2, [1, 1]), 3j), 64)
    with pytest.raises(GridTooCoarse):
        bott_chern_curvature(f)
    assert bott_chern_curvature(f, check=False).shape == (64, 64, 3, 3)


def test_richardson_gap_small_for_smooth_field():
    f = profile_field(OneLayerModel(2, 2, 1j), 64)
    assert richardson_gap(f) < 1e-4 * math.pi / 2


# ---- degree ------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(re=st.floats(-0.5, 0.5), t=st.floats(0.2, 4.0), M=st.integers(2, 40))
def test_orientation_of_area_form(re, t, M):
    assert abs(xi_area_form_integral(complex(re, t), M) - (-2j * t)) < 1e-12


@pytest.mark.parametrize("tau", TAUS)
def test_center_of_mass_field_degree(tau):
    report = trace_form_and_degree(center_mass_field(CenterMassModel(K2, tau), 64))
    assert np.abs(report.trace / (-2 * math.pi / tau.imag) - 1).max() < 1e-6
    assert abs(report.degree + 2) < 1e-6
    assert report.flatness_residual < 1e-8


def test_one_particle_quadrature_field_degree():
    report = trace_form_and_degree(one_particle_field(2, 1j, 32, "quadrature", quad_points=32))
    assert report.provenance == "quadrature"
    assert abs(report.degree + 1) < 1e-5
    assert report.flatness_residual < 1e-6


def test_center_of_mass_quadrature_field_matches_kappa():
    f = gram_field(CenterMassModel([[2]], 1j), GridSpec(8, 2), "quadrature")
    expected = np.array([[kappa_closed([[2]], [a], 1.0) for _ in f.b] for a in f.a])
    assert np.allclose(f.C[..., 0, 0], expected, rtol=1e-10)
    assert f.provenance == "quadrature"


def test_one_particle_spec_dispatch():
    spec = LineBundleSpec(3, 0.0, 0.0, 1j)
    f = gram_field(spec, GridSpec(16, 2))
    assert f.rank == 3 and f.provenance == "closed-form"


def test_profile_with_measured_gamma():
    model = OneLayerModel(2, 2, 1j)
    gamma = measure_gamma(model, points_per_axis=12)
    f = gram_field(model, GridSpec(32, 2), points_per_axis=12)
    assert np.allclose(f.C[0, 0], gamma * np.eye(2))
    assert gamma > 0


def test_profile_backend_recovers_rate():
    tau = 0.3 + 0.8j
    f = profile_field(OneLayerModel(3, 2, tau), 16, 2.0)
    alpha, c, residual = fit_profile(f)
    assert alpha == pytest.approx(2 * math.pi * tau.imag / 3, rel=1e-12)
    assert c == pytest.approx(math.log(2.0), rel=1e-12)
    assert residual < 1e-12
    report = trace_form_and_degree(f, "profile")
    assert report.degree == pytest.approx(-1, abs=1e-12)


def test_qmc_field_needs_profile_backend():
    model = OneLayerModel(2, 2, 1j)
    f = sampled_field(model, 8, "qmc", samples=4096, seed=3)
    assert f.provenance == "qmc"
    with pytest.raises(ValidationError):
        trace_form_and_degree(f)
    report = trace_form_and_degree(f, "profile")
    assert abs(report.degree + 1) < 0.02
    assert report.fit_residual < 0.05


def test_unknown_method_and_backend():
    f = gaussian_field([1.0], 1j, 16)
    with pytest.raises(ValidationError):
        trace_form_and_degree(f, "spline")
    with pytest.raises(ValidationError):
        one_particle_field(2, 1j, 8, "qmc")


def test_noncyclic_datum_gram_is_not_scalar():
    # measured, not asserted by the theory: without the gcd condition the states c and
    # c + (1/2, 1/2) overlap and the diagonal alternates
    from fractions import Fraction

    from fqhe_torus.wen import enumerate_pi, multilayer_gram

    datum = validate_wen([[3, 1], [1, 3]], [2, 2])
    cs = enumerate_pi(datum)
    res = multilayer_gram(datum, 1j, 0.0, 0.0, cs, backend="qmc", samples=1 << 18, seed=5)
    val, err = res.value, res.error_estimate
    half = (Fraction(1, 2), Fraction(1, 2))
    partner = [cs.index(type(c)(tuple(x + h for x, h in zip(c.c_vec, half)))) for c in cs]
    coupling = max(abs(val[i, partner[i]]) / err[i, partner[i]] for i in range(len(cs)))
    assert coupling > 5
    diag = np.real(np.diag(val))
    assert diag.max() - diag.min() > 5 * np.diag(err).max()

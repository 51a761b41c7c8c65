import math

import numpy as np
import pytest

from fqhe_torus.errors import GridTooLarge
from fqhe_torus.geometry import LineBundleSpec, from_lattice_coords, metric_h, section_basis_eval
from fqhe_torus.integration import (
    GridSpec,
    IntegrationResult,
    default_workers,
    qmc_integrate,
    torus_quadrature,
)

EXP_PRODUCT_4D = (1 - math.exp(-1)) ** 4


def norm_integrand(spec, p=1, q=1):
    def f(pts):
        z = from_lattice_coords(pts[:, 0], pts[:, 1], spec.tau)
        sp = section_basis_eval(spec, p, z)
        sq = section_basis_eval(spec, q, z)
        return sp * np.conj(sq) * metric_h(spec, pts[:, 1])
    return f


def exp_product(pts):
    return np.exp(-pts.sum(axis=1))


@pytest.mark.parametrize("N,d", [(2, 1), (7, 2), (8, 3)])
def test_constant_integrand(N, d):
    res = torus_quadrature(lambda p: np.ones(len(p)), GridSpec(N, d))
    assert res.value == pytest.approx(1.0, abs=1e-15)
    assert res.error_estimate <= 1e-15
    assert res.evaluations == N**d
    assert res.backend == "grid"


def test_odd_grid_flagged_unreliable():
    res = torus_quadrature(lambda p: np.cos(2 * np.pi * p[:, 0]) ** 2, GridSpec(7, 1))
    assert not res.reliable
    assert res.error_estimate == 0.0
    assert res.value == pytest.approx(0.5, abs=1e-15)


def test_pure_fourier_mode_integrates_to_zero():
    res = torus_quadrature(lambda p: np.exp(2j * np.pi * p[:, 0]), GridSpec(16, 1))
    assert abs(res.value) < 1e-15


def test_unit_norm_section_at_i():
    spec = LineBundleSpec(k=1, a=0.0, b=0.0, tau=1j)
    coarse = torus_quadrature(norm_integrand(spec), GridSpec(32, 2))
    fine = torus_quadrature(norm_integrand(spec), GridSpec(64, 2))
    assert abs(coarse.value - fine.value) <= 1e-12
    assert fine.value == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert fine.value == pytest.approx(0.70710678, abs=1e-8)


def test_array_valued_integrand():
    spec = LineBundleSpec(k=2, a=0.25, b=0.0, tau=1j)

    def gram(pts):
        f11, f12 = norm_integrand(spec, 1, 1), norm_integrand(spec, 1, 2)
        return np.stack([f11(pts), f12(pts)], axis=-1)

    res = torus_quadrature(gram, GridSpec(32, 2))
    assert res.value.shape == (2,)
    assert res.error_estimate.shape == (2,)
    expected = math.sqrt(1 / 4) * math.exp(2 * math.pi * 0.0625 / 2)
    assert res.value[0] == pytest.approx(expected, abs=1e-12)
    assert abs(res.value[1]) < 1e-12


@pytest.mark.parametrize("k,tau,a", [(1, 1j, 0.0), (2, 0.3 + 0.8j, 0.3), (3, 0.6j, -0.2)])
def test_grid_error_decays_superalgebraically(k, tau, a):
    spec = LineBundleSpec(k=k, a=a, b=0.1, tau=tau)
    f = norm_integrand(spec)
    e16 = torus_quadrature(f, GridSpec(16, 2)).error_estimate
    e32 = torus_quadrature(f, GridSpec(32, 2)).error_estimate
    # once the estimate reaches rounding level the ratio carries no information
    floor = 1e-14
    assert e32 < 0.1 * e16 or e32 < floor


def test_grid_cap():
    with pytest.raises(GridTooLarge):
        torus_quadrature(lambda p: np.ones(len(p)), GridSpec(100, 5), max_evaluations=10**8)
    with pytest.raises(GridTooLarge):
        torus_quadrature(lambda p: np.ones(len(p)), GridSpec(10, 3), max_evaluations=999)


def test_grid_result_independent_of_workers_and_chunks():
    spec = LineBundleSpec(k=2, a=0.1, b=0.2, tau=0.2 + 0.9j)
    f = norm_integrand(spec)
    ref = torus_quadrature(f, GridSpec(24, 2), workers=1, chunk_size=64)
    for workers in (2, 3):
        res = torus_quadrature(f, GridSpec(24, 2), workers=workers, chunk_size=64)
        assert res.value == ref.value
        assert res.error_estimate == ref.error_estimate


def test_workers_from_environment(monkeypatch):
    monkeypatch.delenv("FQHE_TORUS_WORKERS", raising=False)
    assert default_workers() == 1
    monkeypatch.setenv("FQHE_TORUS_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("FQHE_TORUS_WORKERS", "many")
    with pytest.raises(ValueError):
        default_workers()


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(1, 2)
    with pytest.raises(ValueError):
        GridSpec(4, 0)


def test_result_validation():
    with pytest.raises(ValueError):
        IntegrationResult(1.0, -1e-3, 10, "grid")
    with pytest.raises(ValueError):
        IntegrationResult(1.0, 0.0, 0, "grid")


# ---- low-discrepancy backend ------------------------------------------


def test_qmc_constant():
    res = qmc_integrate(lambda p: np.full(len(p), 2.5 - 1j), dims=3, samples=256, seed=4, replicates=8)
    assert res.value == 2.5 - 1j
    assert res.error_estimate == 0.0
    assert res.backend == "lowdiscrepancy"


def test_qmc_separable_exponential():
    res = qmc_integrate(exp_product, dims=4, samples=1 << 14, seed=11, replicates=16)
    assert abs(res.value - EXP_PRODUCT_4D) <= 3 * res.error_estimate
    assert res.value.real == pytest.approx(0.159656, abs=1e-5)
    assert res.error_estimate > 0
    # the two-factor version of the same product is 0.399576...
    two = qmc_integrate(exp_product, dims=2, samples=1 << 14, seed=11, replicates=16)
    assert abs(two.value - (1 - math.exp(-1)) ** 2) <= 3 * two.error_estimate
    assert two.value.real == pytest.approx(0.399576, abs=2e-4)


def test_qmc_bit_identical():
    a = qmc_integrate(exp_product, dims=4, samples=2000, seed=5, replicates=8)
    b = qmc_integrate(exp_product, dims=4, samples=2000, seed=5, replicates=8)
    assert a == b
    c = qmc_integrate(exp_product, dims=4, samples=2000, seed=6, replicates=8)
    assert c.value != a.value


def test_qmc_samples_is_total_budget():
    res = qmc_integrate(exp_product, dims=2, samples=1000, seed=0, replicates=8)
    assert res.evaluations == 1000
    assert qmc_integrate(exp_product, dims=2, samples=1001, seed=0, replicates=8).evaluations == 1008


def test_qmc_points_in_unit_cube():
    seen = []

    def spy(pts):
        seen.append(pts.copy())
        return np.zeros(len(pts))

    qmc_integrate(spy, dims=3, samples=512, seed=2, replicates=4)
    pts = np.concatenate(seen)
    assert pts.min() >= 0.0 and pts.max() < 1.0
    # replicates use different shifts of the same base sequence
    assert not np.array_equal(seen[0], seen[1])


def test_qmc_precondition():
    with pytest.raises(ValueError):
        qmc_integrate(exp_product, dims=2, samples=1, seed=0)
    with pytest.raises(ValueError):
        qmc_integrate(exp_product, dims=2, samples=100, seed=0, replicates=1)


def test_qmc_error_bars_have_coverage():
    hits = 0
    for seed in range(100):
        res = qmc_integrate(exp_product, dims=4, samples=2048, seed=seed, replicates=16)
        hits += abs(res.value - EXP_PRODUCT_4D) <= 4 * res.error_estimate
    assert hits >= 95

"""The eight end-to-end acceptance checks, shared by the test suite and ``verify``.

Each ``criterion_N`` returns a ``CriterionResult``; ``run_all`` runs the
selected ones in order.  Tolerances are fixed here and never loosened at
run time.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .curvature import CenterMassModel, WenSlice, center_mass_field, profile_field, trace_form_and_degree
from .geometry import LineBundleSpec
from .integration import GridSpec
from .laughlin import (
    OneLayerModel,
    estimate_mu,
    hr_gram,
    one_particle_gram,
    one_particle_gram_closed,
    slater_norm_closed,
    slater_norm_squared,
)
from .theta import theta1d, truncation_radius
from .wen import (
    center_mass_gram,
    cyclic_basis,
    enumerate_pi,
    kappa_closed,
    kappa_printed,
    validate_wen,
)

SEED = 20240601
K2 = [[2, 1], [1, 2]]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number}: {self.title}"


def _timed(number: int, title: str, body: Callable[[dict], bool]) -> CriterionResult:
    details: dict = {}
    start = time.perf_counter()
    passed = bool(body(details))
    return CriterionResult(number, title, passed, details, time.perf_counter() - start)


def criterion_1() -> CriterionResult:
    """One-particle Gram matrices against the scaled identity, N = 64."""

    def body(d):
        rng = np.random.default_rng(SEED)
        worst = 0.0
        for k in (1, 2, 3, 5):
            for tau in (1j, 0.3 + 0.8j):
                for a, b in rng.uniform(0, 1, (3, 2)):
                    spec = LineBundleSpec(k, a, b, tau)
                    gram = one_particle_gram(spec, GridSpec(64, 2))
                    err = np.abs(gram - one_particle_gram_closed(spec) * np.eye(k)).max()
                    worst = max(worst, float(err))
        d["max_entry_error"] = worst
        d["cases"] = 24
        return worst <= 1e-9

    return _timed(1, "one-particle orthonormality", body)


def criterion_2(qmc_samples: int = 2_097_152) -> CriterionResult:
    """Slater norm: 4-d grid at n = 2, 6-d QMC at n = 3."""

    def body(d):
        ok = True
        for a in (0.0, 0.3):
            res = slater_norm_squared(2, LineBundleSpec(2, a, 0.0, 1j), points_per_axis=32)
            norm = math.sqrt(res.value.real)
            rel = abs(norm / slater_norm_closed(2, 1.0, a) - 1)
            d[f"n2_a{a}_norm"] = norm
            d[f"n2_a{a}_rel_error"] = rel
            ok &= rel <= 1e-6
        res = slater_norm_squared(3, LineBundleSpec(3, 0.0, 0.0, 1j), backend="qmc",
                                  samples=qmc_samples, seed=SEED)
        target = slater_norm_closed(3, 1.0, 0.0) ** 2
        d["n3_norm_squared"] = res.value.real
        d["n3_standard_error"] = res.error_estimate
        d["n3_closed_form"] = target
        d["n3_samples"] = res.evaluations
        ok &= res.evaluations >= 2_000_000
        ok &= abs(res.value.real - target) <= 3 * res.error_estimate
        return ok

    return _timed(2, "Slater norm", body)


def criterion_3() -> CriterionResult:
    """Slater over Fay is constant: dispersion over 100 admitted points."""

    def body(d):
        rng = np.random.default_rng(SEED + 3)
        worst = 0.0
        for n in (2, 3):
            for a, b in rng.uniform(0, 1, (2, 2)):
                spec = LineBundleSpec(n, a, b, 0.3 + 0.9j)
                est = estimate_mu(n, spec, samples=120, seed=int(rng.integers(1 << 31)))
                if est.admitted < 100:
                    d["too_few_admitted"] = est.admitted
                    return False
                worst = max(worst, est.dispersion / abs(est.mu))
        d["max_relative_dispersion"] = worst
        return worst <= 1e-8

    return _timed(3, "Slater/Fay identity", body)


def criterion_4(samples: int = 1 << 16) -> CriterionResult:
    """Haldane-Rezayi Gram structure by QMC, m = n = 2."""

    def body(d):
        t = 1.0
        m = 2
        grams = []
        for a in (0.3, 0.0):
            res = hr_gram(OneLayerModel(m, 2, 1j, a, 0.1), backend="qmc", samples=samples, seed=SEED)
            grams.append(res)
        ok = True
        for res, a in zip(grams, (0.3, 0.0)):
            val, err = res.value, res.error_estimate
            off = abs(val[0, 1])
            d[f"a{a}_offdiag_over_se"] = off / err[0, 1]
            ok &= off <= 4 * err[0, 1]
            gap = abs(val[0, 0].real - val[1, 1].real)
            ok &= gap <= 3 * math.hypot(err[0, 0], err[1, 1])
        v1, e1 = grams[0].value[0, 0].real, grams[0].error_estimate[0, 0]
        v2, e2 = grams[1].value[0, 0].real, grams[1].error_estimate[0, 0]
        ratio = v1 / v2
        expected = math.exp(2 * math.pi * t * (0.3 ** 2 - 0.0) / m)
        combined = ratio * math.hypot(e1 / v1, e2 / v2)
        d["diag_ratio"] = ratio
        d["expected_ratio"] = expected
        d["ratio_error"] = combined
        ok &= abs(ratio - expected) <= 3 * combined
        return ok

    return _timed(4, "Haldane-Rezayi orthogonality and xi profile", body)


def criterion_5() -> CriterionResult:
    """Exact arithmetic for the family K = p J + I, n = (1, ..., 1)."""

    def body(d):
        ok = True
        for p, g in ((1, 2), (2, 2), (1, 3)):
            K = [[p + (i == j) for j in range(g)] for i in range(g)]
            datum = validate_wen(K, [1] * g)
            delta = p * g + 1
            generated = {tuple((Fraction(k) * u) % 1 for u in datum.u_vec) for k in range(delta)}
            ok &= datum.delta == delta and datum.d == delta
            ok &= datum.n_delta_over_d == g and datum.cyclic
            ok &= len(generated) == delta == len(enumerate_pi(datum))
            ok &= sorted(cyclic_basis(datum)) == enumerate_pi(datum)
            d[f"p{p}_g{g}"] = f"delta={datum.delta} d={datum.d} n_delta_over_d={datum.n_delta_over_d}"
        return ok

    return _timed(5, "Wen datum arithmetic", body)


def criterion_6(points_per_axis: int = 48) -> CriterionResult:
    """Center-of-mass Gram for K = [[2,1],[1,2]] at tau = i, xi = 0; g = 1 cases."""

    def body(d):
        gram = center_mass_gram(K2, 1j, [0.0, 0.0], [0.0, 0.0], GridSpec(points_per_axis, 4))
        diag = np.real(np.diag(gram))
        value = float(diag.mean())
        scalar = float(np.abs(gram - value * np.eye(len(gram))).max() / value)
        closed = kappa_closed(K2, [0.0, 0.0], 1.0)
        printed = kappa_printed(K2, [0.0, 0.0], 1.0)
        d["quadrature_value"] = value
        d["scalar_residual"] = scalar
        d["closed_form"] = closed
        d["printed_candidate"] = printed
        d["closed_form_rel_error"] = abs(value / closed - 1)
        d["printed_rel_error"] = abs(value / printed - 1)
        ok = scalar <= 1e-8 and abs(value / closed - 1) <= 1e-8
        worst = 0.0
        for m, tau, a, b in ((1, 1j, 0.0, 0.0), (2, 1j, 0.3, 0.1), (3, 0.3 + 0.8j, 0.6, 0.25)):
            g1 = center_mass_gram([[m]], tau, [a], [b], GridSpec(64, 2))
            expect = one_particle_gram_closed(LineBundleSpec(m, a, b, tau))
            worst = max(worst, float(np.abs(g1 - expect * np.eye(m)).max() / expect))
        d["g1_max_rel_error"] = worst
        return ok and worst <= 1e-12

    return _timed(6, "center-of-mass Gram", body)


def criterion_7() -> CriterionResult:
    """Finite-difference curvature of closed-form fields on a 64 x 64 grid."""

    def body(d):
        tau = 1j
        t = tau.imag
        ok = True
        cases = [
            ("one_layer_m3_n2", OneLayerModel(3, 2, tau), profile_field, 2, 3, 6, -1),
            ("two_layer_K2", WenSlice(validate_wen(K2, [1, 1]), tau), profile_field, 2, 3, 3, -2),
            ("center_mass_K2", CenterMassModel(K2, tau), center_mass_field, 2, 3, 3, -2),
        ]
        for name, model, build, n, delta, dd, degree in cases:
            report = trace_form_and_degree(build(model, 64))
            expected = -math.pi / t * n * delta / dd
            rel = float(np.abs(report.trace / expected - 1).max())
            d[f"{name}_trace_rel_error"] = rel
            d[f"{name}_degree"] = report.degree
            d[f"{name}_flatness"] = report.flatness_residual
            ok &= rel <= 1e-6
            ok &= abs(report.degree - degree) <= 1e-6
            ok &= report.flatness_residual <= 1e-8
        return ok

    return _timed(7, "curvature and degree", body)


def _partial_theta(z, tau, a, b, N):
    n = np.arange(-N - 1, N + 2)
    x = n + a
    x = x[np.abs(x) <= N]
    return np.sum(np.exp(1j * math.pi * tau * x * x + 2j * math.pi * x * (z + b)))


def criterion_8(inputs: int = 1000, tol: float = 1e-10) -> CriterionResult:
    """Truncation certificate and quasi-periodicity on random inputs with t in [0.3, 3]."""

    def body(d):
        rng = np.random.default_rng(SEED + 8)
        cert = quasi = 0.0
        for _ in range(inputs):
            t = rng.uniform(0.3, 3.0)
            tau = complex(rng.uniform(-0.5, 0.5), t)
            a, b = rng.uniform(-1, 1, 2)
            z = rng.uniform(0, 1) + tau * rng.uniform(0, 1)
            N = truncation_radius(a, abs(z.imag), t, tol)
            cert = max(cert, abs(_partial_theta(z, tau, a, b, N) - _partial_theta(z, tau, a, b, N + 3)) / tol)
            v = theta1d(z, tau, a, b, tol)
            r1 = abs(theta1d(z + 1, tau, a, b, tol) - np.exp(2j * math.pi * a) * v)
            spec_factor = np.exp(-2j * math.pi * (z + b) - 1j * math.pi * tau)
            r2 = abs(theta1d(z + tau, tau, a, b, tol) - spec_factor * v) / (1 + abs(spec_factor))
            quasi = max(quasi, r1 / tol, r2 / tol)
        d["max_certificate_gap_over_tol"] = cert
        d["max_quasi_periodicity_residual_over_tol"] = quasi
        d["tol"] = tol
        return cert <= 1 and quasi <= 10

    return _timed(8, "theta truncation certificate", body)


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 9)}


def run_all(selected=None, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    results = []
    for i in (selected or sorted(CRITERIA)):
        res = CRITERIA[i]()
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results

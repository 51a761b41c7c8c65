"""One-layer many-body states on the torus.

Haldane-Rezayi functions, the Slater determinant of one-particle theta
sections, its Fay-type product form, and inner products with respect to
the product metric ``h(z_1) ... h(z_n)``.

All evaluators are vectorised: a configuration is an array whose last
axis indexes particles, so ``z`` of shape ``(P, n)`` gives ``P`` values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateSampling
from .geometry import LineBundleSpec, from_lattice_coords, metric_h, section_basis
from .integration import GridSpec, IntegrationResult, qmc_integrate, torus_quadrature
from .theta import DEFAULT_TOL, theta1d, theta_odd


@dataclass(frozen=True)
class OneLayerModel:
    """Filling parameter ``m``, particle count ``n`` and solenoid ``xi = a tau + b``."""

    m: int
    n: int
    tau: complex
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"m and n must be positive, got m={self.m}, n={self.n}")

    @property
    def epsilon(self) -> int:
        return -1 if (self.m * (self.n - 1)) % 2 else 1

    @property
    def spec(self) -> LineBundleSpec:
        """The one-particle bundle of degree ``m n``; sharp when ``epsilon = -1``."""
        return LineBundleSpec(self.m * self.n, self.a, self.b, self.tau, sharp=self.epsilon < 0)

    @property
    def xi(self) -> complex:
        return self.spec.xi

    def with_xi(self, a: float, b: float) -> "OneLayerModel":
        return OneLayerModel(self.m, self.n, self.tau, a, b)


@dataclass(frozen=True)
class ManyBodyPoint:
    """A configuration ``z`` of ``n`` particles, with ``z_p = x_p + tau y_p``."""

    z: np.ndarray

    @classmethod
    def from_lattice(cls, x, y, tau) -> "ManyBodyPoint":
        return cls(from_lattice_coords(x, y, tau))

    @property
    def w(self):
        return np.asarray(self.z).sum(axis=-1)

    def lattice(self, tau):
        t = complex(tau).imag
        y = np.asarray(self.z).imag / t
        return np.asarray(self.z).real - y * complex(tau).real, y


def _as_z(p) -> np.ndarray:
    z = p.z if isinstance(p, ManyBodyPoint) else p
    return np.atleast_1d(np.asarray(z, dtype=complex))


def jastrow(z, tau, power: int = 1, tol: float = DEFAULT_TOL):
    """``prod_{p<q} theta_odd(z_p - z_q)^power`` over the last axis."""
    z = _as_z(z)
    n = z.shape[-1]
    out = np.ones(z.shape[:-1], dtype=complex)
    for p in range(n):
        for q in range(p + 1, n):
            out = out * theta_odd(z[..., p] - z[..., q], tau, tol) ** power
    return out


def hr_wavefunction(model: OneLayerModel, j: int, p, tol: float = DEFAULT_TOL):
    """Haldane-Rezayi function ``theta[(j-1)/m, 0](m w + xi | m tau) * jastrow^m``."""
    m = model.m
    if not 1 <= j <= m:
        raise ValueError(f"j must lie in 1..{m}, got {j}")
    z = _as_z(p)
    if z.shape[-1] != model.n:
        raise ValueError(f"expected {model.n} particles, got {z.shape[-1]}")
    w = z.sum(axis=-1)
    com = theta1d(m * w + model.xi, m * model.tau, (j - 1) / m, 0.0, tol)
    return com * jastrow(z, model.tau, m, tol)


def slater_wavefunction(n: int, spec: LineBundleSpec, p, tol: float = DEFAULT_TOL):
    """``det[s_i(z_j)] / sqrt(n!)`` with the degree-``n`` basis sections ``s_i``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.k != n:
        raise ValueError(f"the Slater state needs a degree-{n} bundle, got k={spec.k}")
    z = _as_z(p)
    if z.shape[-1] != n:
        raise ValueError(f"expected {n} particles, got {z.shape[-1]}")
    # section_basis gives (n, ..., n): section index first, particle last
    mat = np.moveaxis(section_basis(spec, z, tol), 0, -2)
    return np.linalg.det(mat) / math.sqrt(math.factorial(n))


def fay_wavefunction(n: int, spec: LineBundleSpec, p, tol: float = DEFAULT_TOL):
    """``theta[(n-1)/2, (n-1)/2](w + xi | tau) * prod_{p<q} theta_odd(z_p - z_q)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = _as_z(p)
    if z.shape[-1] != n:
        raise ValueError(f"expected {n} particles, got {z.shape[-1]}")
    c = (n - 1) / 2
    w = z.sum(axis=-1)
    return theta1d(w + spec.xi, spec.tau, c, c, tol) * jastrow(z, spec.tau, 1, tol)


class MuEstimate(NamedTuple):
    mu: complex
    dispersion: float
    admitted: int


def estimate_mu(n: int, spec: LineBundleSpec, samples: int = 200, seed: int = 0,
                exclusion: float = 1e-6, tol: float = DEFAULT_TOL) -> MuEstimate:
    """Constant ratio between the Slater and Fay forms, sampled at random points.

    Points where ``|Fay| < exclusion * geomean|Fay|`` are discarded, since
    the ratio is ill-conditioned near the zero set.  ``dispersion`` is the
    largest deviation of an admitted ratio from the mean.
    """
    if samples < 10:
        raise ValueError("samples must be >= 10")
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(0.0, 1.0, (2, samples, n))
    z = from_lattice_coords(x, y, spec.tau)
    num = slater_wavefunction(n, spec, z, tol)
    den = fay_wavefunction(n, spec, z, tol)
    mag = np.abs(den)
    positive = mag[mag > 0]
    if positive.size == 0:
        raise DegenerateSampling("the Fay form vanished at every sample")
    scale = math.exp(np.mean(np.log(positive)))
    keep = mag > exclusion * scale
    if keep.sum() < 10:
        raise DegenerateSampling(f"only {int(keep.sum())} of {samples} points survive exclusion")
    ratio = num[keep] / den[keep]
    mu = complex(ratio.mean())
    return MuEstimate(mu, float(np.max(np.abs(ratio - mu))), int(keep.sum()))


def slater_norm_closed(n: int, t: float, a: float) -> float:
    """Closed-form norm ``(1/(2 n t))^{n/4} exp(pi t a^2)`` of the Slater state."""
    if n < 1 or t <= 0:
        raise ValueError("need n >= 1 and t > 0")
    return (1.0 / (2 * n * t)) ** (n / 4) * math.exp(math.pi * t * a * a)


def one_particle_gram_closed(spec: LineBundleSpec) -> float:
    """Diagonal value ``sqrt(1/(2 k t)) exp(2 pi t a^2 / k)`` of the one-particle Gram."""
    k, t = spec.k, spec.t
    return math.sqrt(1.0 / (2 * k * t)) * math.exp(2 * math.pi * t * spec.a ** 2 / k)


def _hermitian(mat):
    return 0.5 * (mat + np.conj(np.swapaxes(mat, -1, -2)))


def one_particle_gram(spec: LineBundleSpec, grid: GridSpec | None = None,
                      tol: float = DEFAULT_TOL, return_result: bool = False):
    """Gram matrix ``<s_p, s_q>`` of the basis sections by grid quadrature.

    All k^2 entries come from one pass over the grid; the result is
    conjugate-symmetrised.
    """
    grid = GridSpec(64, 2) if grid is None else grid
    if grid.dims != 2:
        raise ValueError("the one-particle integral is two-dimensional")

    def integrand(pts):
        z = from_lattice_coords(pts[:, 0], pts[:, 1], spec.tau)
        s = section_basis(spec, z, tol).T  # (P, k)
        weight = metric_h(spec, pts[:, 1])
        return s[:, :, None] * np.conj(s[:, None, :]) * weight[:, None, None]

    res = torus_quadrature(integrand, grid)
    gram = _hermitian(res.value)
    if return_result:
        return gram, res
    return gram


def _configurations(pts, n, tau):
    x = pts[:, 0::2][:, :n]
    y = pts[:, 1::2][:, :n]
    return from_lattice_coords(x, y, tau), y


def manybody_gram(states: Sequence[Callable], n: int, metric: LineBundleSpec, *,
                  backend: str = "grid", points_per_axis: int = 16,
                  samples: int = 1 << 16, seed: int = 0, replicates: int = 16) -> IntegrationResult:
    """Gram matrix of several n-particle functions over [0, 1]^{2n}.

    ``metric`` is the one-particle bundle whose metric ``h`` is applied to
    every particle.  Coordinates are ordered ``(x_1, y_1, ..., x_n, y_n)``.
    The value is an ``(r, r)`` matrix for ``r`` states.
    """
    states = list(states)

    def integrand(pts):
        z, y = _configurations(pts, n, metric.tau)
        weight = np.prod(metric_h(metric, y).reshape(y.shape), axis=-1)
        vals = np.stack([f(z) for f in states], axis=-1)
        return vals[:, :, None] * np.conj(vals[:, None, :]) * weight[:, None, None]

    if backend == "grid":
        return torus_quadrature(integrand, GridSpec(points_per_axis, 2 * n))
    if backend == "qmc":
        return qmc_integrate(integrand, 2 * n, samples, seed, replicates)
    raise ValueError(f"unknown backend {backend!r} (expected 'grid' or 'qmc')")


def inner_product(phi: Callable, psi: Callable, n: int, metric: LineBundleSpec,
                  **kwargs) -> IntegrationResult:
    """``<phi, psi>`` for n-particle functions; keyword options as in ``manybody_gram``."""
    res = manybody_gram([phi, psi], n, metric, **kwargs)
    return IntegrationResult(complex(res.value[0, 1]), float(res.error_estimate[0, 1]),
                             res.evaluations, res.backend, res.reliable)


def hr_gram(model: OneLayerModel, tol: float = DEFAULT_TOL, **kwargs) -> IntegrationResult:
    """Full ``m x m`` Gram matrix of the Haldane-Rezayi functions in one pass."""
    states = [lambda z, j=j: hr_wavefunction(model, j, z, tol) for j in range(1, model.m + 1)]
    return manybody_gram(states, model.n, model.spec, **kwargs)


def manybody_inner(model: OneLayerModel, j: int, l: int, tol: float = DEFAULT_TOL,
                   **kwargs) -> IntegrationResult:
    """``<Phi_j, Phi_l>`` for the Haldane-Rezayi functions of ``model``."""
    return inner_product(lambda z: hr_wavefunction(model, j, z, tol),
                         lambda z: hr_wavefunction(model, l, z, tol),
                         model.n, model.spec, **kwargs)


def slater_norm_squared(n: int, spec: LineBundleSpec, tol: float = DEFAULT_TOL,
                        **kwargs) -> IntegrationResult:
    """``<Phi, Phi>`` for the Slater state by quadrature or sampling."""
    res = manybody_gram([lambda z: slater_wavefunction(n, spec, z, tol)], n, spec, **kwargs)
    return IntegrationResult(complex(res.value[0, 0]), float(res.error_estimate[0, 0]),
                             res.evaluations, res.backend, res.reliable)

"""Line bundles L_{k,xi} on the torus C/<1, tau>: coordinates, metric, sections.

Sections of ``L_{k,xi}`` are functions with

    f(z + 1) = c1 f(z),   f(z + tau) = c2 exp(-2 pi i xi) phi(z)^k f(z),

where ``phi(z) = exp(-pi i tau - 2 pi i z)`` and ``(c1, c2) = (1, 1)`` for
the plain bundle or ``(-1, -1)`` for the sharp variant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .theta import DEFAULT_TOL, TorusParams, theta1d

_PI = math.pi


@dataclass(frozen=True)
class LineBundleSpec:
    """Degree ``k`` bundle with solenoid parameter ``xi = a tau + b``.

    ``a`` and ``b`` are stored separately and never recovered from ``xi``:
    the metric depends on ``a`` alone.
    """

    k: int
    a: float
    b: float
    tau: complex
    sharp: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tau", TorusParams(self.tau).tau)
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def t(self) -> float:
        return self.tau.imag

    @property
    def xi(self) -> complex:
        return self.a * self.tau + self.b

    @property
    def signs(self) -> tuple[int, int]:
        """Signs ``(c1, c2)`` multiplying the two automorphy factors."""
        return (-1, -1) if self.sharp else (1, 1)

    def with_xi(self, a: float, b: float) -> "LineBundleSpec":
        return replace(self, a=a, b=b)

    def sharp_partner(self) -> "LineBundleSpec":
        """Plain bundle with ``xi + (1 + tau)/2``, isomorphic to the sharp bundle at ``xi``."""
        return replace(self, a=self.a + 0.5, b=self.b + 0.5, sharp=False)


def to_lattice_coords(z, tau):
    """Return ``(x, y)`` with ``z = x + tau y``."""
    tau = TorusParams(tau).tau
    z = np.asarray(z, dtype=complex)
    y = z.imag / tau.imag
    x = z.real - y * tau.real
    if z.ndim == 0:
        return float(x), float(y)
    return x, y


def from_lattice_coords(x, y, tau):
    tau = complex(tau)
    return np.asarray(x, dtype=float) + tau * np.asarray(y, dtype=float)


def metric_h(spec: LineBundleSpec, y):
    """Hermitian metric ``exp(-2 pi k t y^2 - 4 pi a t y)``; independent of x and b."""
    y = np.asarray(y, dtype=float)
    t = spec.t
    out = np.exp(-2 * _PI * spec.k * t * y * y - 4 * _PI * spec.a * t * y)
    return float(out) if out.ndim == 0 else out


def tau_factor(spec: LineBundleSpec, z):
    """Multiplier picked up by a section under ``z -> z + tau``."""
    z = np.asarray(z, dtype=complex)
    tau = spec.tau
    c2 = spec.signs[1]
    return c2 * np.exp(-2j * _PI * spec.xi + spec.k * (-1j * _PI * tau - 2j * _PI * z))


def section_basis_eval(spec: LineBundleSpec, j: int, z, tol: float = DEFAULT_TOL):
    """The j-th distinguished holomorphic section (1 <= j <= k).

    Plain bundle: ``theta[(j-1)/k, 0](k z + xi | k tau)``.  For the sharp
    bundle the characteristic is shifted to ``[(j-1)/k + 1/(2k), 1/2]``,
    which flips the sign of both automorphy factors.
    """
    k = spec.k
    if k <= 0:
        raise ValueError(f"holomorphic sections need k > 0, got k={k}")
    if not 1 <= j <= k:
        raise ValueError(f"section index j must lie in 1..{k}, got {j}")
    z = np.asarray(z, dtype=complex)
    a_char = (j - 1) / k
    b_char = 0.0
    if spec.sharp:
        a_char += 1.0 / (2 * k)
        b_char = 0.5
    return theta1d(k * z + spec.xi, k * spec.tau, a_char, b_char, tol)


def section_basis(spec: LineBundleSpec, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    """All k basis sections stacked along a new leading axis."""
    return np.stack([section_basis_eval(spec, j, z, tol) for j in range(1, spec.k + 1)])


def _relative_gap(lhs, rhs):
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    gap = np.abs(lhs - rhs)
    return np.where(scale > 0, gap / np.where(scale > 0, scale, 1.0), 0.0)


def quasi_periodicity_defect(f: Callable, spec: LineBundleSpec, samples: int = 100,
                             seed: int = 0) -> float:
    """Largest relative violation of the two automorphy laws over random points.

    ``f`` maps an array of complex points to values.  Points are drawn as
    ``x + tau y`` with ``x, y`` uniform on [0, 1).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(0.0, 1.0, (2, samples))
    z = from_lattice_coords(x, y, spec.tau)
    base = np.asarray(f(z), dtype=complex)
    c1 = spec.signs[0]
    d1 = _relative_gap(np.asarray(f(z + 1), dtype=complex), c1 * base)
    d2 = _relative_gap(np.asarray(f(z + spec.tau), dtype=complex), tau_factor(spec, z) * base)
    return float(max(d1.max(), d2.max()))

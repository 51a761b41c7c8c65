"""Bott-Chern curvature of Gram-matrix fields over the solenoid parameter.

A ``GramField`` samples a hermitian matrix ``C(xi)`` on the uniform grid
``a_i = i/M, b_j = j/M`` with ``xi = a tau + b``.  The curvature of the
Chern connection in the frame with Gram matrix ``C`` is

    K = dbar(d C . C^{-1}) = -[C_{xi xibar} C^{-1} - C_xi C^{-1} C_xibar C^{-1}] dxi ^ dxibar,

and this module returns the coefficient of ``dxi ^ dxibar``.  Derivatives
in ``xi`` come from derivatives in ``(a, b)``:

    d/dxi    = (d_a - conj(tau) d_b) / (tau - conj(tau)),
    d/dxibar = (-d_a + tau d_b) / (tau - conj(tau)).

The field is periodic in ``b`` but not in ``a`` (moving ``a`` by one
changes the frame by an automorphy factor), so ``a``-derivatives near the
ends of [0, 1) use shifted one-sided stencils of the same order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GridTooCoarse, ValidationError
from .geometry import LineBundleSpec
from .integration import GridSpec
from .laughlin import OneLayerModel, hr_gram, one_particle_gram, one_particle_gram_closed
from .theta import TorusParams
from .wen import (
    WenDatum,
    center_mass_gram,
    cyclic_basis,
    enumerate_pi,
    kappa_closed,
    multilayer_gram,
    parse_int_matrix,
)

PROVENANCES = ("closed-form", "quadrature", "qmc")
DEFAULT_ORDER = 10


@dataclass
class GramField:
    """Hermitian positive definite matrices on the uniform (a, b) grid."""

    tau: complex
    C: np.ndarray  # shape (M, M, r, r), indexed [i_a, j_b]
    provenance: str
    fit_residual: float | None = None

    def __post_init__(self):
        self.tau = TorusParams(self.tau).tau
        C = np.asarray(self.C, dtype=complex)
        if C.ndim != 4 or C.shape[0] != C.shape[1] or C.shape[2] != C.shape[3]:
            raise ValidationError(f"Gram field must have shape (M, M, r, r), got {C.shape}")
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        scale = np.abs(C).max()
        if np.abs(C - np.conj(np.swapaxes(C, -1, -2))).max() > 1e-12 * scale:
            raise ValidationError("Gram matrices must be hermitian")
        C = 0.5 * (C + np.conj(np.swapaxes(C, -1, -2)))
        if np.linalg.eigvalsh(C).min() <= 0:
            raise ValidationError("Gram matrices must be positive definite")
        self.C = C

    @property
    def M(self) -> int:
        return self.C.shape[0]

    @property
    def rank(self) -> int:
        return self.C.shape[-1]

    @property
    def t(self) -> float:
        return self.tau.imag

    @property
    def a(self) -> np.ndarray:
        return np.arange(self.M) / self.M

    @property
    def b(self) -> np.ndarray:
        return np.arange(self.M) / self.M

    def rescaled(self, factor: complex) -> "GramField":
        """Gram field of the frame multiplied by a constant ``factor``."""
        return GramField(self.tau, abs(factor) ** 2 * self.C, self.provenance, self.fit_residual)

    def subsampled(self) -> "GramField":
        """Every other grid point in both directions (step 2h)."""
        if self.M % 2:
            raise GridTooCoarse("a step-2h comparison needs an even number of grid points")
        return GramField(self.tau, self.C[::2, ::2], self.provenance, self.fit_residual)


# ---- field providers ---------------------------------------------------


def field_from_function(fn: Callable[[float, float], np.ndarray], tau, M: int,
                        provenance: str = "closed-form") -> GramField:
    """Evaluate ``fn(a, b)`` (an r x r matrix) on the M x M grid."""
    if M < 2:
        raise ValidationError("the (a, b) grid needs at least 2 points per axis")
    grid = np.arange(M) / M
    C = np.array([[np.atleast_2d(fn(a, b)) for b in grid] for a in grid])
    return GramField(tau, C, provenance)


@dataclass(frozen=True)
class CenterMassModel:
    """Center-of-mass functions ``H_c`` for ``K`` on the slice ``xi_vec = xi e``."""

    K: tuple
    tau: complex

    def __post_init__(self):
        object.__setattr__(self, "K", parse_int_matrix(self.K))


@dataclass(frozen=True)
class WenSlice:
    """KVW functions of a Wen datum on the slice ``zeta = xi e``."""

    datum: WenDatum
    tau: complex


def one_particle_field(k: int, tau, M: int, backend: str = "closed-form",
                       quad_points: int = 32) -> GramField:
    def fn(a, b):
        spec = LineBundleSpec(k, a, b, tau)
        if backend == "closed-form":
            return one_particle_gram_closed(spec) * np.eye(k)
        return one_particle_gram(spec, GridSpec(quad_points, 2))

    _check_backend(backend, ("closed-form", "quadrature"))
    return field_from_function(fn, tau, M, backend)


def center_mass_field(model: CenterMassModel, M: int, backend: str = "closed-form",
                      quad_points: int = 24) -> GramField:
    K = model.K
    g = len(K)
    delta = len(enumerate_pi(K))
    t = TorusParams(model.tau).t

    def fn(a, b):
        if backend == "closed-form":
            return kappa_closed(K, [a] * g, t) * np.eye(delta)
        return center_mass_gram(K, model.tau, [a] * g, [b] * g, GridSpec(quad_points, 2 * g))

    _check_backend(backend, ("closed-form", "quadrature"))
    return field_from_function(fn, model.tau, M, backend)


def measure_gamma(model, backend: str = "grid", **kwargs) -> float:
    """The xi-independent constant of a many-body Gram matrix, measured at xi = 0.

    ``model`` is a ``OneLayerModel`` or ``WenSlice``.  Returns the mean of
    the diagonal.
    """
    if isinstance(model, OneLayerModel):
        res = hr_gram(model.with_xi(0.0, 0.0), backend=backend, **kwargs)
    elif isinstance(model, WenSlice):
        res = multilayer_gram(model.datum, model.tau, 0.0, 0.0, backend=backend, **kwargs)
    else:
        raise TypeError(f"cannot measure gamma for {type(model).__name__}")
    return float(np.mean(np.real(np.diag(res.value))))


def profile_field(model, M: int, gamma: float = 1.0) -> GramField:
    """``exp(2 pi (n/d) t a^2) gamma I`` for a one-layer model or Wen slice.

    The diagonal profile and the degeneracy come from the norm formulas for
    these states; ``gamma`` is a measured input (``measure_gamma``).
    """
    if isinstance(model, OneLayerModel):
        rate, rank, tau = model.n / (model.m * model.n), model.m, model.tau
    elif isinstance(model, WenSlice):
        rate, rank, tau = model.datum.n / model.datum.d, model.datum.delta, model.tau
    else:
        raise TypeError(f"no closed-form profile for {type(model).__name__}")
    t = TorusParams(tau).t

    def fn(a, b):
        return gamma * math.exp(2 * math.pi * rate * t * a * a) * np.eye(rank)

    return field_from_function(fn, tau, M, "closed-form")


def sampled_field(model, M: int, backend: str = "grid", **kwargs) -> GramField:
    """Many-body Gram matrices computed by integration at every grid point."""
    _check_backend(backend, ("grid", "qmc"))
    provenance = "quadrature" if backend == "grid" else "qmc"

    if isinstance(model, OneLayerModel):
        def fn(a, b):
            return hr_gram(model.with_xi(a, b), backend=backend, **kwargs).value
        tau = model.tau
    elif isinstance(model, WenSlice):
        basis = cyclic_basis(model.datum)

        def fn(a, b):
            return multilayer_gram(model.datum, model.tau, a, b, basis, backend=backend, **kwargs).value
        tau = model.tau
    else:
        raise TypeError(f"cannot sample a field for {type(model).__name__}")
    return field_from_function(fn, tau, M, provenance)


def gram_field(model, grid_ab: GridSpec, backend: str = "closed-form", **kwargs) -> GramField:
    """Dispatch on the model type.

    * ``LineBundleSpec``: one-particle sections of degree ``k`` (``closed-form`` or ``quadrature``)
    * ``CenterMassModel``: center-of-mass functions (``closed-form`` or ``quadrature``)
    * ``OneLayerModel`` / ``WenSlice``: ``closed-form`` profile times a measured
      ``gamma`` (keyword, measured by grid quadrature when omitted), or per-point
      ``quadrature`` / ``qmc`` Gram matrices
    """
    if grid_ab.dims != 2:
        raise ValidationError("the (a, b) grid is two-dimensional")
    M = grid_ab.points_per_axis
    if isinstance(model, LineBundleSpec):
        return one_particle_field(model.k, model.tau, M, backend, **kwargs)
    if isinstance(model, CenterMassModel):
        return center_mass_field(model, M, backend, **kwargs)
    if isinstance(model, (OneLayerModel, WenSlice)):
        if backend == "closed-form":
            gamma = kwargs.pop("gamma", None)
            if gamma is None:
                gamma = measure_gamma(model, **kwargs)
            return profile_field(model, M, gamma)
        return sampled_field(model, M, "grid" if backend == "quadrature" else backend, **kwargs)
    raise TypeError(f"unsupported model {type(model).__name__}")


def _check_backend(backend, allowed):
    if backend not in allowed:
        raise ValidationError(f"backend must be one of {allowed}, got {backend!r}")


# ---- finite differences ------------------------------------------------


def fornberg_weights(offsets, order: int) -> np.ndarray:
    """Weights ``w`` with ``sum_j w_j f(x_j) ~ f^(order)(0)`` for nodes ``x_j = offsets``."""
    x = np.asarray(offsets, dtype=float)
    n = len(x)
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1, c4 = 1.0, x[0]
    for i in range(1, n):
        mn = min(i, order)
        c2, c5 = 1.0, c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def derivative_matrix(M: int, deriv: int, accuracy: int = DEFAULT_ORDER, periodic: bool = True) -> np.ndarray:
    """``(M, M)`` matrix of the ``deriv``-th derivative on ``x_i = i/M``.

    Periodic grids use centered stencils of ``accuracy + 1`` points.  On a
    non-periodic grid, points too close to an end use a shifted window with
    one extra node, which keeps the same order of accuracy.
    """
    q = accuracy // 2
    h = 1.0 / M
    D = np.zeros((M, M))
    for i in range(M):
        if periodic:
            offs = np.arange(-q, q + 1)
            D[i, (i + offs) % M] += fornberg_weights(offs, deriv) / h ** deriv
            continue
        if q <= i <= M - 1 - q:
            offs = np.arange(-q, q + 1)
        else:
            width = 2 * q + 2
            if width > M:
                raise GridTooCoarse(f"{M} points cannot hold a one-sided stencil of {width} points")
            start = min(max(i - q, 0), M - width)
            offs = np.arange(start, start + width) - i
        D[i, i + offs] = fornberg_weights(offs, deriv) / h ** deriv
    return D


def _partials(C: np.ndarray, accuracy: int):
    M = C.shape[0]
    Da = derivative_matrix(M, 1, accuracy, periodic=False)
    Daa = derivative_matrix(M, 2, accuracy, periodic=False)
    Db = derivative_matrix(M, 1, accuracy, periodic=True)
    Dbb = derivative_matrix(M, 2, accuracy, periodic=True)
    Ca = np.einsum("ik,kj...->ij...", Da, C)
    Cb = np.einsum("jk,ik...->ij...", Db, C)
    Caa = np.einsum("ik,kj...->ij...", Daa, C)
    Cbb = np.einsum("jk,ik...->ij...", Dbb, C)
    Cab = np.einsum("jk,ik...->ij...", Db, Ca)
    return Ca, Cb, Caa, Cbb, Cab


def _curvature_raw(field: GramField, accuracy: int) -> np.ndarray:
    tau = field.tau
    D = tau - tau.conjugate()
    Ca, Cb, Caa, Cbb, Cab = _partials(field.C, accuracy)
    C_xi = (Ca - tau.conjugate() * Cb) / D
    C_xibar = (-Ca + tau * Cb) / D
    C_mixed = (-Caa + 2 * tau.real * Cab - abs(tau) ** 2 * Cbb) / (D * D)
    Cinv = np.linalg.inv(field.C)
    return -(C_mixed @ Cinv - C_xi @ Cinv @ C_xibar @ Cinv)


def bott_chern_curvature(field: GramField, point_index=None, accuracy: int = DEFAULT_ORDER,
                         rtol: float = 1e-3, check: bool = True) -> np.ndarray:
    """Coefficient of ``dxi ^ dxibar`` in the curvature, from finite differences.

    Returns an ``(r, r)`` matrix at ``point_index = (i_a, j_b)`` or the full
    ``(M, M, r, r)`` array when ``point_index`` is None.  With ``check``,
    the result is compared with the same stencils at step 2h and
    ``GridTooCoarse`` is raised when they differ by more than ``rtol``
    relative to the field's largest curvature entry.
    """
    coef = _curvature_raw(field, accuracy)
    if check:
        richardson_gap(field, accuracy, coef, rtol)
    if point_index is None:
        return coef
    i, j = point_index
    return coef[i, j]


def richardson_gap(field: GramField, accuracy: int = DEFAULT_ORDER, coef=None,
                   rtol: float | None = None) -> float:
    """Largest difference between curvature at steps h and 2h on the shared points."""
    coef = _curvature_raw(field, accuracy) if coef is None else coef
    coarse = _curvature_raw(field.subsampled(), accuracy)
    gap = float(np.abs(coef[::2, ::2] - coarse).max())
    scale = max(float(np.abs(coef).max()), 1e-300)
    # rounding in second differences grows like eps M^2 / t^2; below that the gap is noise
    noise = 1e3 * np.finfo(float).eps * field.M ** 2 / field.t ** 2
    if rtol is not None and gap > rtol * scale and gap > noise:
        raise GridTooCoarse(f"curvature at steps h and 2h differs by {gap:.3g} (scale {scale:.3g})")
    return gap


# ---- profile backend ---------------------------------------------------


def fit_profile(field: GramField) -> tuple[float, float, float]:
    """Least-squares fit ``log(mean diagonal) = alpha a^2 + c``.

    Returns ``(alpha, c, residual)`` with the largest absolute residual of
    the fit; a small residual confirms the Gaussian profile in ``a``.
    """
    diag = np.real(np.einsum("ijkk->ij", field.C)) / field.rank
    logd = np.log(diag)
    a = np.repeat(field.a, field.M)
    design = np.stack([a * a, np.ones_like(a)], axis=1)
    (alpha, c), *_ = np.linalg.lstsq(design, logd.ravel(), rcond=None)
    residual = float(np.abs(design @ np.array([alpha, c]) - logd.ravel()).max())
    return float(alpha), float(c), residual


def profile_curvature(field: GramField) -> tuple[np.ndarray, float]:
    """Curvature from the fitted profile: ``-alpha / (2 t^2)`` times the identity.

    For ``log C = alpha a^2 + c`` one has ``d_xibar d_xi log C = alpha / (2 t^2)``.
    Returns the ``(M, M, r, r)`` coefficients and the fit residual.
    """
    alpha, _, residual = fit_profile(field)
    value = -alpha / (2 * field.t ** 2)
    coef = np.broadcast_to(value * np.eye(field.rank, dtype=complex), field.C.shape).copy()
    return coef, residual


# ---- trace form and degree ---------------------------------------------


@dataclass
class CurvatureReport:
    coefficients: np.ndarray  # (M, M, r, r), coefficient of dxi ^ dxibar
    trace: np.ndarray  # (M, M)
    flatness_residual: float
    degree: float
    slope: float
    degree_error: float
    method: str
    provenance: str
    tau: complex
    rank: int
    fit_residual: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def trace_mean(self) -> complex:
        return complex(self.trace.mean())


def xi_area_form_integral(tau, M: int = 8) -> complex:
    """``int_E dxi ^ dxibar`` by the trapezoid rule over the (a, b) grid.

    ``dxi ^ dxibar = -2i du ^ dv`` with ``xi = u + iv``, and the fundamental
    domain has area ``t``, so the value is ``-2 i t``.
    """
    t = TorusParams(tau).t
    ones = np.ones((M, M))
    return -2j * t * ones.mean()


def flatness_residual(coef: np.ndarray) -> float:
    """Distance from a scalar matrix, relative to the mean diagonal.

    The maximum over grid points of the larger of (largest off-diagonal
    modulus, spread of the diagonal).
    """
    r = coef.shape[-1]
    diag = np.einsum("...kk->...k", coef)
    off = coef - diag[..., :, None] * np.eye(r)
    spread = np.abs(diag - diag.mean(axis=-1, keepdims=True)).max(axis=-1) * (2 if r > 1 else 0)
    worst = np.maximum(np.abs(off).max(axis=(-2, -1)), spread)
    scale = np.abs(diag.mean(axis=-1))
    scale = np.where(scale > 0, scale, 1.0)
    return float((worst / scale).max())


def _degree(trace: np.ndarray, t: float) -> float:
    # (i / 2 pi) * int tr(K) dxi^dxibar = (i / 2 pi) * (-2 i t) * mean(trace)
    return float(np.real(t / math.pi * trace.mean()))


def trace_form_and_degree(field: GramField, method: str = "finite-difference",
                          accuracy: int = DEFAULT_ORDER, rtol: float = 1e-3) -> CurvatureReport:
    """Curvature, trace form, projective-flatness residual and degree of a field.

    ``method`` is ``"finite-difference"`` (raw stencils, for closed-form or
    quadrature fields) or ``"profile"`` (fit of the Gaussian profile in
    ``a``, the only sensible choice for sampled fields).
    """
    t = field.t
    fit_residual = None
    if method == "finite-difference":
        if field.provenance == "qmc":
            raise ValidationError("sampling noise makes raw second differences meaningless; use method='profile'")
        coef = bott_chern_curvature(field, accuracy=accuracy, rtol=rtol)
        trace = np.einsum("ijkk->ij", coef)
        coarse = _curvature_raw(field.subsampled(), accuracy)
        degree_error = abs(_degree(trace, t) - _degree(np.einsum("ijkk->ij", coarse), t))
    elif method == "profile":
        coef, fit_residual = profile_curvature(field)
        trace = np.einsum("ijkk->ij", coef)
        degree_error = 0.0
    else:
        raise ValidationError(f"unknown method {method!r}")
    degree = _degree(trace, t)
    return CurvatureReport(
        coefficients=coef,
        trace=trace,
        flatness_residual=flatness_residual(coef),
        degree=degree,
        slope=degree / field.rank,
        degree_error=degree_error,
        method=method,
        provenance=field.provenance,
        tau=field.tau,
        rank=field.rank,
        fit_residual=fit_residual,
    )


def expected_trace_coefficient(n: int, delta: int, d: int, t: float) -> float:
    """``-(pi / t) (n delta / d)``."""
    return -math.pi / t * n * delta / d

"""Theta functions with real characteristics and certified truncation.

One-dimensional series::

    theta[a, b](z | tau) = sum_n exp(pi i tau (n + a)^2 + 2 pi i (n + a)(z + b))

and the g-dimensional series with a period matrix Omega (symmetric,
Im(Omega) positive definite).  Every evaluation sums the lattice cube
``||k + a||_inf <= N`` where ``N`` comes from a Gaussian tail bound, so
the truncation error is at most ``tol`` (rounding error is not included).

All functions are pure and vectorised over the point argument.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonconvergentDomain, ToleranceUnachievable

DEFAULT_TOL = 1e-13
MAX_TERMS = 10**7

_PI = math.pi
_TWO_PI_I = 2j * math.pi
# largest |exponent| allowed in a single per-axis factor before overflow risk
_EXP_GUARD = 650.0


@dataclass(frozen=True)
class TorusParams:
    """Modular parameter ``tau`` of the lattice <1, tau>."""

    tau: complex

    def __post_init__(self):
        tau = complex(self.tau)
        if not (math.isfinite(tau.real) and math.isfinite(tau.imag)):
            raise NonconvergentDomain(f"tau must be finite, got {tau!r}")
        if tau.imag <= 0:
            raise NonconvergentDomain(f"Im(tau) must be positive, got {tau!r}")
        object.__setattr__(self, "tau", tau)

    @property
    def t(self) -> float:
        return self.tau.imag


@dataclass(frozen=True)
class PeriodMatrix:
    """Symmetric g x g complex matrix with positive definite imaginary part."""

    omega: np.ndarray
    min_eig: float = field(init=False)

    def __post_init__(self):
        omega = np.atleast_2d(np.asarray(self.omega, dtype=complex))
        if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
            raise NonconvergentDomain(f"period matrix must be square, got shape {omega.shape}")
        if not np.all(np.isfinite(omega)):
            raise NonconvergentDomain("period matrix has non-finite entries")
        scale = max(1.0, float(np.abs(omega).max()))
        if np.abs(omega - omega.T).max() > 1e-14 * scale:
            raise NonconvergentDomain("period matrix is not symmetric")
        im = omega.imag
        try:
            np.linalg.cholesky(im)
        except np.linalg.LinAlgError:
            raise NonconvergentDomain("Im(Omega) is not positive definite") from None
        omega = 0.5 * (omega + omega.T)
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "min_eig", float(np.linalg.eigvalsh(omega.imag)[0]))

    @property
    def g(self) -> int:
        return self.omega.shape[0]

    @classmethod
    def scaled(cls, tau: complex, K) -> "PeriodMatrix":
        """The period matrix ``tau * K`` for an integer matrix ``K``."""
        return cls(complex(tau) * np.asarray(K, dtype=float))


def _check_tol(tol: float) -> float:
    tol = float(tol)
    if not tol > 0 or not math.isfinite(tol):
        raise ValueError(f"tolerance must be a positive finite number, got {tol}")
    return tol


def _one_side_tail(x0: float, center: float, lam: float) -> float:
    """Bound for sum_{j>=0} exp(-pi lam (x0 + j - center)^2), valid for x0 > center."""
    d = x0 - center
    ratio = math.exp(-_PI * lam * (2.0 * d + 1.0))
    return math.exp(-_PI * lam * d * d) / (1.0 - ratio)


def _axis_points(N: int, a: float) -> np.ndarray:
    """The values n + a with |n + a| <= N, in increasing order."""
    lo = math.ceil(-N - a)
    hi = math.floor(N - a)
    return np.arange(lo, hi + 1, dtype=float) + a


def _axis_tail(N: int, a: float, lo: float, hi: float, lam: float) -> float:
    # smallest lattice value above N on each side (the lower side mirrored)
    up = math.floor(N - a) + 1 + a
    down = math.floor(N + a) + 1 - a
    return _one_side_tail(up, hi, lam) + _one_side_tail(down, -lo, lam)


def tail_bound(N: int, a, lo, hi, log_peak: float, lam: float) -> float:
    """Certified bound on the omitted absolute terms for cube radius ``N``.

    Every term satisfies ``|term| <= exp(log_peak) * prod_i exp(-pi lam
    dist(x_i, [lo_i, hi_i])^2)``; outside the cube at least one coordinate
    exceeds ``N`` so a union bound over the axes applies.  Requires
    ``N >= max(hi_i, -lo_i)``.  Returns ``inf`` when the bound overflows.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    g = a.size
    tails = [_axis_tail(N, a[i], lo[i], hi[i], lam) for i in range(g)]
    full = [hi[i] - lo[i] + 3.0 + 1.0 / math.sqrt(lam) for i in range(g)]
    total = 0.0
    for i in range(g):
        prod = tails[i]
        for j in range(g):
            if j != i:
                prod *= full[j]
        total += prod
    if total == 0.0:
        return 0.0
    log_bound = log_peak + math.log(total)
    return math.exp(log_bound) if log_bound < 700 else math.inf


def _radius(a, lo, hi, log_peak: float, lam: float, tol: float, max_terms: int) -> int:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    g = a.size
    start = max(0.0, float(np.max(hi)), float(np.max(-lo)))
    N = int(math.ceil(start))
    while True:
        if (2 * N + 1) ** g > max_terms:
            raise ToleranceUnachievable(
                f"tolerance {tol:g} needs more than {max_terms} lattice points "
                f"(radius {N}, dimension {g})"
            )
        if tail_bound(N, a, lo, hi, log_peak, lam) <= tol:
            return N
        N += 1


def truncation_radius(a, im_z_norm: float, min_eig_im_omega: float, tol: float,
                      max_terms: int = MAX_TERMS) -> int:
    """Smallest cube radius whose omitted terms sum (in absolute value) to at most ``tol``.

    Parameters
    ----------
    a : float or sequence of float
        Characteristic; its length sets the dimension g.
    im_z_norm : float
        Euclidean norm of Im(z) (an upper bound is fine).
    min_eig_im_omega : float
        Smallest eigenvalue of Im(Omega) (``t`` in one dimension).
    tol : float
        Absolute tolerance.
    """
    tol = _check_tol(tol)
    if not min_eig_im_omega > 0:
        raise NonconvergentDomain("Im(Omega) must have a positive smallest eigenvalue")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    # terms are bounded by a Gaussian centred at c = -Im(Omega)^{-1} Im(z)
    r = float(im_z_norm) / min_eig_im_omega
    log_peak = _PI * float(im_z_norm) ** 2 / min_eig_im_omega
    return _radius(a, np.full(a.size, -r), np.full(a.size, r), log_peak,
                   min_eig_im_omega, tol, max_terms)


def _as_complex_array(z):
    arr = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError("theta arguments must be finite")
    return arr


def _tau(tau) -> complex:
    return TorusParams(tau).tau


def theta1d(z, tau, a: float = 0.0, b: float = 0.0, tol: float = DEFAULT_TOL,
            max_terms: int = MAX_TERMS):
    """One-dimensional theta function with characteristics ``[a, b]``.

    ``z`` may be a scalar or an array; the result has the same shape.
    Terms are accumulated in order of increasing ``|n + a|`` with Kahan
    compensation.
    """
    tau = _tau(tau)
    tol = _check_tol(tol)
    a = float(a)
    b = float(b)
    zz = _as_complex_array(z)
    scalar = zz.ndim == 0
    flat = zz.reshape(-1)
    if flat.size == 0:
        return zz.copy()
    t = tau.imag
    centers = -flat.imag / t
    lo, hi = float(centers.min()), float(centers.max())
    log_peak = _PI * t * float(np.max(centers * centers))
    N = _radius([a], [lo], [hi], log_peak, t, tol, max_terms)

    xs = _axis_points(N, a)
    zb = flat + b
    step = np.exp(_TWO_PI_I * zb)
    # walk outward from x = 0 on both sides so terms arrive by increasing |x|
    pos = [x for x in xs if x >= 0]
    neg = [x for x in xs[::-1] if x < 0]
    fpos = np.exp(_TWO_PI_I * pos[0] * zb) if pos else None
    fneg = np.exp(_TWO_PI_I * neg[0] * zb) if neg else None
    inv_step = 1.0 / step if neg else None
    total = np.zeros_like(flat)
    comp = np.zeros_like(flat)
    i = j = 0
    while i < len(pos) or j < len(neg):
        if j >= len(neg) or (i < len(pos) and pos[i] <= -neg[j]):
            x, fac = pos[i], fpos
            i += 1
            if i < len(pos):
                fpos = fpos * step
        else:
            x, fac = neg[j], fneg
            j += 1
            if j < len(neg):
                fneg = fneg * inv_step
        term = np.exp(_PI * 1j * tau * x * x) * fac
        y = term - comp
        s = total + y
        comp = (s - total) - y
        total = s
    return complex(total[0]) if scalar else total.reshape(zz.shape)


def theta_odd(z, tau, tol: float = DEFAULT_TOL):
    """The odd theta function theta[1/2, 1/2](z | tau); its only zero mod the lattice is z = 0."""
    return theta1d(z, tau, 0.5, 0.5, tol)


def _power_table(xs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Rows exp(2 pi i x z) for the equally spaced values ``xs``, built by repeated multiplication."""
    out = np.empty((len(xs), len(z)), dtype=complex)
    out[0] = np.exp(_TWO_PI_I * xs[0] * z)
    if len(xs) > 1:
        step = np.exp(_TWO_PI_I * z)
        for j in range(1, len(xs)):
            np.multiply(out[j - 1], step, out=out[j])
    return out


def theta_g(z, omega, a=None, b=None, tol: float = DEFAULT_TOL, max_terms: int = MAX_TERMS,
            chunk_points: int | None = None):
    """g-dimensional theta function Theta[a, b](z | Omega).

    Parameters
    ----------
    z : array_like, shape (..., g)
        Points; leading axes are batch axes.
    omega : PeriodMatrix or array_like
    a, b : array_like of length g, optional
        Real characteristics (zero by default).

    Notes
    -----
    The lattice sum factorises as ``sum_k C_k prod_i exp(2 pi i x_i z_i)``
    with ``x = k + a``; it is contracted axis by axis (one matrix product
    plus elementwise reductions), which is far cheaper than looping over
    lattice points for the million-point batches used by quadrature.
    """
    if not isinstance(omega, PeriodMatrix):
        omega = PeriodMatrix(omega)
    tol = _check_tol(tol)
    g = omega.g
    a = np.zeros(g) if a is None else np.asarray(a, dtype=float).reshape(g)
    b = np.zeros(g) if b is None else np.asarray(b, dtype=float).reshape(g)
    zz = _as_complex_array(z)
    if zz.shape[-1:] != (g,):
        raise ValueError(f"z must have trailing dimension {g}, got shape {zz.shape}")
    batch_shape = zz.shape[:-1]
    pts = zz.reshape(-1, g)
    if pts.shape[0] == 0:
        return np.zeros(batch_shape, dtype=complex)

    T = omega.omega.imag
    Y = pts.imag
    centers = -np.linalg.solve(T, Y.T).T
    log_peak = _PI * float(np.max(np.einsum("pi,ij,pj->p", centers, T, centers)))
    N = _radius(a, centers.min(axis=0), centers.max(axis=0), log_peak,
                omega.min_eig, tol, max_terms)

    axes = [_axis_points(N, a[i]) for i in range(g)]
    guard = max(float(np.abs(axes[i]).max() * np.abs(Y[:, i]).max()) for i in range(g))
    if 2 * _PI * guard > _EXP_GUARD:
        raise ToleranceUnachievable(
            "theta argument too far from the real slice for stable evaluation; "
            "reduce z with the quasi-periodicity laws first"
        )
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    quad = np.einsum("mi,ij,mj->m", X, omega.omega, X)
    coef = np.exp(_PI * 1j * quad + _TWO_PI_I * (X @ b))
    sizes = [len(ax) for ax in axes]
    coef = coef.reshape(sizes[:-1] + [sizes[-1]]) if g > 1 else coef

    if chunk_points is None:
        lead = max(1, int(np.prod(sizes[:-1])))
        chunk_points = max(1024, (1 << 22) // lead)
    out = np.empty(pts.shape[0], dtype=complex)
    for start in range(0, pts.shape[0], chunk_points):
        zc = pts[start:start + chunk_points]
        facs = [_power_table(axes[i], zc[:, i]) for i in range(g)]
        if g == 1:
            out[start:start + len(zc)] = coef @ facs[0]
            continue
        acc = coef.reshape(-1, sizes[-1]) @ facs[-1]
        acc = acc.reshape(sizes[:-1] + [len(zc)])
        for i in range(g - 2, -1, -1):
            acc = np.einsum("...kp,kp->...p", acc, facs[i])
        out[start:start + len(zc)] = acc
    return out.reshape(batch_shape)

"""Multi-layer states built from a Wen datum (K, n).

Exact bookkeeping (validation, the group Pi = K^{-1} Z^g / Z^g) uses
Python integers and ``fractions.Fraction``; floating point enters only
when theta functions are evaluated.

Configurations of the ``n = n_1 + ... + n_g`` particles are flat arrays
whose last axis lists layer 1 first, then layer 2, and so on.
"""
from __future__ import annotations

import itertools
import math
import operator
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    MixedParityDiagonal,
    NegativeEntry,
    NonpositiveU,
    NotPositiveDefinite,
    NotSymmetric,
    NoUniformD,
    ValidationError,
)
from .geometry import LineBundleSpec, from_lattice_coords, metric_h
from .integration import GridSpec, IntegrationResult, qmc_integrate, torus_quadrature
from .theta import DEFAULT_TOL, PeriodMatrix, TorusParams, theta_g, theta_odd

# above this many candidate vectors the scan gives way to the Smith form
SCAN_LIMIT = 200_000


# ---- exact integer linear algebra --------------------------------------


def _bareiss_det(rows) -> int:
    """Exact determinant of a square integer matrix (fraction-free elimination)."""
    m = [list(r) for r in rows]
    n = len(m)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[-1][-1]


def adjugate(K) -> list[list[int]]:
    """Integer adjugate matrix, so that ``K adj(K) = det(K) I``."""
    g = len(K)
    if g == 1:
        return [[1]]
    adj = [[0] * g for _ in range(g)]
    for i in range(g):
        for j in range(g):
            minor = [row[:i] + row[i + 1:] for r, row in enumerate(K) if r != j]
            adj[i][j] = (-1) ** (i + j) * _bareiss_det(minor)
    return adj


def _as_int(x) -> int:
    if isinstance(x, str):
        try:
            return int(x)
        except ValueError:
            raise ValidationError(f"expected an integer, got {x!r}") from None
    if isinstance(x, (bool, np.bool_)):
        raise ValidationError(f"expected an integer, got {x!r}")
    try:
        return operator.index(x)
    except TypeError:
        pass
    if isinstance(x, (float, np.floating, Fraction)) and float(x).is_integer():
        return int(x)
    raise ValidationError(f"expected an integer, got {x!r}")


def parse_int_matrix(K) -> tuple[tuple[int, ...], ...]:
    """Accept nested sequences, arrays, or text like ``"2 1; 1 2"``."""
    if isinstance(K, str):
        rows = [r.replace(",", " ").split() for r in K.strip().split(";")]
    else:
        arr = np.asarray(K, dtype=object)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2:
            raise ValidationError(f"K must be a matrix, got {arr.ndim} dimensions")
        rows = arr.tolist()
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValidationError("K must be a nonempty square matrix")
    return tuple(tuple(_as_int(v) for v in r) for r in rows)


def parse_int_vector(v) -> tuple[int, ...]:
    if isinstance(v, str):
        v = v.replace(",", " ").split()
        return tuple(_as_int(x) for x in v)
    return tuple(_as_int(x) for x in np.atleast_1d(np.asarray(v, dtype=object)).tolist())


# ---- the Wen datum -----------------------------------------------------


@dataclass(frozen=True)
class WenDatum:
    """Validated pair (K, n) with its derived invariants; build with ``validate_wen``."""

    K: tuple[tuple[int, ...], ...]
    n_vec: tuple[int, ...]
    d: int
    delta: int
    u_vec: tuple[Fraction, ...]
    epsilon_K: int
    cyclic: bool

    @property
    def g(self) -> int:
        return len(self.K)

    @property
    def n(self) -> int:
        return sum(self.n_vec)

    @property
    def n_delta_over_d(self) -> int:
        return self.n * self.delta // self.d

    @property
    def sharp(self) -> bool:
        """True when each particle sees the sharp bundle of degree ``d``.

        Moving one particle of layer k by 1 multiplies every state by
        ``(-1)^(d - K_kk)``; the diagonal parity makes this the same for all k.
        """
        return (self.d - self.K[0][0]) % 2 == 1

    @property
    def K_array(self) -> np.ndarray:
        return np.array(self.K, dtype=float)

    def layer_slices(self) -> list[slice]:
        stops = list(itertools.accumulate(self.n_vec))
        return [slice(s - n, s) for s, n in zip(stops, self.n_vec)]

    def to_text(self) -> str:
        lines = ["[wen_datum]", f"g = {self.g}", "K ="]
        lines += ["  " + " ".join(str(v) for v in row) for row in self.K]
        lines += [
            "n_vec = " + " ".join(map(str, self.n_vec)),
            f"d = {self.d}",
            f"delta = {self.delta}",
            "u_vec = " + " ".join(str(u) for u in self.u_vec),
            f"epsilon_K = {self.epsilon_K}",
            f"cyclic = {'true' if self.cyclic else 'false'}",
            f"n = {self.n}",
            f"n_delta_over_d = {self.n_delta_over_d}",
            f"bundle = {'sharp' if self.sharp else 'plain'}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WenDatum":
        """Parse ``to_text`` output; derived fields are recomputed and cross-checked."""
        fields: dict[str, str] = {}
        rows: list[str] = []
        reading_k = False
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#") or line == "[wen_datum]":
                continue
            if "=" in line:
                key, _, value = line.partition("=")
                key, value = key.strip(), value.strip()
                reading_k = key == "K" and not value
                if not reading_k:
                    fields[key] = value
            elif reading_k:
                rows.append(line)
            else:
                raise ValidationError(f"unexpected line in Wen datum text: {raw!r}")
        if not rows or "n_vec" not in fields:
            raise ValidationError("Wen datum text needs a K block and n_vec")
        datum = validate_wen("; ".join(rows), fields["n_vec"])
        given = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
        if given != [ln.strip() for ln in datum.to_text().splitlines()]:
            raise ValidationError("derived fields in the text disagree with K and n_vec")
        return datum


def validate_wen(K, n_vec) -> WenDatum:
    """Check every defining condition of a Wen datum and compute derived fields.

    Raises
    ------
    NotSymmetric, NegativeEntry, NotPositiveDefinite, MixedParityDiagonal,
    NonpositiveU, NoUniformD, ValidationError
    """
    K = parse_int_matrix(K)
    g = len(K)
    n_vec = parse_int_vector(n_vec)
    if any(K[i][j] != K[j][i] for i in range(g) for j in range(g)):
        raise NotSymmetric("K must be symmetric")
    if any(v < 0 for row in K for v in row):
        raise NegativeEntry("K must have nonnegative entries")
    # Sylvester: all leading principal minors positive
    for r in range(1, g + 1):
        if _bareiss_det([row[:r] for row in K[:r]]) <= 0:
            raise NotPositiveDefinite(f"leading principal minor of order {r} is not positive")
    parities = {K[i][i] % 2 for i in range(g)}
    if len(parities) > 1:
        raise MixedParityDiagonal("diagonal entries of K must be all even or all odd")
    delta = _bareiss_det(K)
    adj = adjugate(K)
    u_vec = tuple(Fraction(sum(adj[i]), delta) for i in range(g))
    if any(u <= 0 for u in u_vec):
        raise NonpositiveU(f"K^-1 e = {[str(u) for u in u_vec]} has a nonpositive entry")
    if len(n_vec) != g:
        raise ValidationError(f"n_vec has length {len(n_vec)}, expected {g}")
    if any(v <= 0 for v in n_vec):
        raise ValidationError("n_vec entries must be positive")
    Kn = [sum(K[i][j] * n_vec[j] for j in range(g)) for i in range(g)]
    if len(set(Kn)) != 1:
        raise NoUniformD(f"K n = {Kn} is not a multiple of (1, ..., 1)")
    d = Kn[0]
    n = sum(n_vec)
    if (n * delta) % d:
        raise ValidationError(f"n delta / d = {n * delta}/{d} is not an integer")
    epsilon_K = 1 if parities == {0} else -1
    cyclic = math.gcd(delta, n * delta // d) == 1
    return WenDatum(K, n_vec, d, delta, u_vec, epsilon_K, cyclic)


# ---- the group Pi ------------------------------------------------------


@dataclass(frozen=True, order=True)
class PiElement:
    """Canonical representative of a class in K^{-1} Z^g / Z^g, entries in [0, 1)."""

    c_vec: tuple[Fraction, ...]

    def __post_init__(self):
        c = tuple(Fraction(x) % 1 for x in self.c_vec)
        object.__setattr__(self, "c_vec", c)

    def as_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.c_vec])

    def __str__(self):
        return "(" + ", ".join(str(x) for x in self.c_vec) + ")"


def _pi_by_scan(K, delta) -> list[PiElement]:
    # K^{-1} v = adj(K) v / delta; delta Z^g lies in K Z^g, so v in [0, delta)^g
    # meets every class
    g = len(K)
    adj = np.array(adjugate(K), dtype=object)
    found = {}
    for v in itertools.product(range(delta), repeat=g):
        num = tuple(int(x) % delta for x in adj.dot(np.array(v, dtype=object)))
        if num not in found:
            found[num] = PiElement(tuple(Fraction(x, delta) for x in num))
            if len(found) == delta:
                break
    return sorted(found.values(), key=lambda c: c.c_vec)


def _pi_by_smith(K) -> list[PiElement]:
    from sympy import Matrix
    from sympy.matrices.normalforms import smith_normal_decomp

    S, _, V = smith_normal_decomp(Matrix(K))
    g = len(K)
    invariants = [int(S[i, i]) for i in range(g)]
    V = [[int(V[i, j]) for j in range(g)] for i in range(g)]
    out = []
    for js in itertools.product(*(range(s) for s in invariants)):
        frac = [Fraction(j, s) for j, s in zip(js, invariants)]
        out.append(PiElement(tuple(sum(V[i][k] * frac[k] for k in range(g)) for i in range(g))))
    return sorted(out, key=lambda c: c.c_vec)


def enumerate_pi(datum_or_K, method: str = "auto") -> list[PiElement]:
    """All ``det K`` classes of K^{-1} Z^g / Z^g, sorted lexicographically.

    ``method`` is ``"scan"`` (brute force over integer vectors), ``"smith"``
    (Smith normal form) or ``"auto"`` (scan unless the box is large).
    """
    K = datum_or_K.K if isinstance(datum_or_K, WenDatum) else parse_int_matrix(datum_or_K)
    delta = _bareiss_det(K)
    if delta <= 0:
        raise NotPositiveDefinite("det K must be positive")
    if method == "auto":
        method = "scan" if delta ** len(K) <= SCAN_LIMIT else "smith"
    if method == "scan":
        return _pi_by_scan(K, delta)
    if method == "smith":
        return _pi_by_smith(K)
    raise ValueError(f"unknown method {method!r}")


def cyclic_basis(datum: WenDatum) -> list[PiElement]:
    """``[(p - 1) u mod 1 for p = 1..delta]``; distinct exactly when the datum is cyclic."""
    return [PiElement(tuple(p * u for u in datum.u_vec)) for p in range(datum.delta)]


def in_pi(K, c: PiElement) -> bool:
    """Exact test that ``K c`` is an integer vector."""
    return all(sum(Fraction(k) * x for k, x in zip(row, c.c_vec)).denominator == 1 for row in K)


# ---- wave functions ----------------------------------------------------


@dataclass(frozen=True)
class LayeredPoint:
    """Particle positions grouped by layer."""

    layers: tuple

    @classmethod
    def split(cls, datum: WenDatum, z) -> "LayeredPoint":
        z = np.asarray(z, dtype=complex)
        return cls(tuple(z[..., s] for s in datum.layer_slices()))

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([np.asarray(l, dtype=complex) for l in self.layers], axis=-1)

    @property
    def w_vec(self) -> np.ndarray:
        return np.stack([np.asarray(l).sum(axis=-1) for l in self.layers], axis=-1)


def _flat(datum: WenDatum, p) -> np.ndarray:
    z = p.z if isinstance(p, LayeredPoint) else np.asarray(p, dtype=complex)
    if z.shape[-1] != datum.n:
        raise ValueError(f"expected {datum.n} particle coordinates, got {z.shape[-1]}")
    return z


def discriminant_DK(datum: WenDatum, tau, p, tol: float = DEFAULT_TOL):
    """Product of ``theta_odd(z_p - z_q)^{K_kl}`` over intra- and inter-layer pairs."""
    z = _flat(datum, p)
    tau = TorusParams(tau).tau
    layers = [z[..., s] for s in datum.layer_slices()]
    out = np.ones(z.shape[:-1], dtype=complex)
    for k, zk in enumerate(layers):
        e = datum.K[k][k]
        if e:
            for p_ in range(zk.shape[-1]):
                for q in range(p_ + 1, zk.shape[-1]):
                    out = out * theta_odd(zk[..., p_] - zk[..., q], tau, tol) ** e
        for l in range(k + 1, datum.g):
            e = datum.K[k][l]
            if not e:
                continue
            zl = layers[l]
            diff = zk[..., :, None] - zl[..., None, :]
            out = out * np.prod(theta_odd(diff, tau, tol) ** e, axis=(-2, -1))
    return out


def _char(c) -> np.ndarray:
    return c.as_float() if isinstance(c, PiElement) else np.asarray(c, dtype=float)


def kvw_wavefunction(datum: WenDatum, tau, zeta_vec, c, p, tol: float = DEFAULT_TOL):
    """``Theta[c, 0](K w + zeta | tau K) * D_K`` with layer sums ``w``."""
    z = _flat(datum, p)
    tau = TorusParams(tau).tau
    w = np.stack([z[..., s].sum(axis=-1) for s in datum.layer_slices()], axis=-1)
    arg = w @ datum.K_array.T + np.asarray(zeta_vec, dtype=complex)
    omega = PeriodMatrix.scaled(tau, datum.K_array)
    return theta_g(arg, omega, _char(c), None, tol) * discriminant_DK(datum, tau, z, tol)


def particle_spec(datum: WenDatum, tau, a: float, b: float) -> LineBundleSpec:
    """One-particle bundle of degree ``d`` on the slice ``zeta = xi e``."""
    return LineBundleSpec(datum.d, a, b, tau, sharp=datum.sharp)


def multilayer_gram(datum: WenDatum, tau, a: float, b: float, cs: Sequence | None = None, *,
                    backend: str = "grid", points_per_axis: int = 16, samples: int = 1 << 16,
                    seed: int = 0, replicates: int = 16, tol: float = DEFAULT_TOL) -> IntegrationResult:
    """Gram matrix of the KVW functions ``Phi_c`` at ``zeta = (a tau + b) e``.

    Every particle carries the metric of ``L_{d, xi}``.  ``cs`` defaults to
    the cyclic basis ``(p - 1) u``.  Coordinates are ``(x_1, y_1, ..., x_n, y_n)``.
    """
    cs = cyclic_basis(datum) if cs is None else list(cs)
    spec = particle_spec(datum, tau, a, b)
    zeta = np.full(datum.g, spec.xi)
    n = datum.n

    def integrand(pts):
        x, y = pts[:, 0::2], pts[:, 1::2]
        z = from_lattice_coords(x, y, spec.tau)
        weight = np.prod(metric_h(spec, y).reshape(y.shape), axis=-1)
        dk = discriminant_DK(datum, spec.tau, z, tol)
        w = np.stack([z[:, s].sum(axis=-1) for s in datum.layer_slices()], axis=-1)
        arg = w @ datum.K_array.T + zeta
        omega = PeriodMatrix.scaled(spec.tau, datum.K_array)
        vals = np.stack([theta_g(arg, omega, _char(c), None, tol) for c in cs], axis=-1) * dk[:, None]
        return vals[:, :, None] * np.conj(vals[:, None, :]) * weight[:, None, None]

    if backend == "grid":
        return torus_quadrature(integrand, GridSpec(points_per_axis, 2 * n))
    if backend == "qmc":
        return qmc_integrate(integrand, 2 * n, samples, seed, replicates)
    raise ValueError(f"unknown backend {backend!r} (expected 'grid' or 'qmc')")


def multilayer_inner(datum: WenDatum, tau, a: float, b: float, c1, c2, **kwargs) -> IntegrationResult:
    """``<Phi_c1, Phi_c2>`` on the slice ``zeta = xi e``; options as in ``multilayer_gram``."""
    res = multilayer_gram(datum, tau, a, b, [c1, c2], **kwargs)
    return IntegrationResult(complex(res.value[0, 1]), float(res.error_estimate[0, 1]),
                             res.evaluations, res.backend, res.reliable)


def multilayer_profile(datum: WenDatum, tau, a: float) -> float:
    """``exp(2 pi (n/d) t a^2)``, the xi-dependence of every diagonal Gram entry."""
    t = TorusParams(tau).t
    return math.exp(2 * math.pi * datum.n * t * a * a / datum.d)


# ---- center-of-mass functions ------------------------------------------


def _sym_pd(K) -> np.ndarray:
    K = parse_int_matrix(K)
    g = len(K)
    if any(K[i][j] != K[j][i] for i in range(g) for j in range(g)):
        raise NotSymmetric("K must be symmetric")
    for r in range(1, g + 1):
        if _bareiss_det([row[:r] for row in K[:r]]) <= 0:
            raise NotPositiveDefinite(f"leading principal minor of order {r} is not positive")
    return np.array(K, dtype=float)


def center_mass_eval(K, tau, xi_vec, c, z_vec, tol: float = DEFAULT_TOL):
    """``H_c(z) = Theta[c, 0](K z + xi | tau K)``; ``z_vec`` has shape ``(..., g)``."""
    Kf = _sym_pd(K)
    z = np.asarray(z_vec, dtype=complex)
    arg = z @ Kf.T + np.asarray(xi_vec, dtype=complex)
    return theta_g(arg, PeriodMatrix.scaled(tau, Kf), _char(c), None, tol)


def center_mass_factor(K, tau, xi_vec, l_vec, z_vec):
    """Multiplier ``exp(-pi i (l, 2 xi + 2 K z + tau K l))`` for ``z -> z + tau l``."""
    Kf = np.asarray(parse_int_matrix(K), dtype=float)
    tau = complex(tau)
    l = np.asarray(l_vec, dtype=float)
    z = np.asarray(z_vec, dtype=complex)
    inner = 2 * np.asarray(xi_vec, dtype=complex) + 2 * z @ Kf.T + tau * (Kf @ l)
    return np.exp(-1j * math.pi * (inner @ l))


def center_mass_weight(K, t: float, a_vec, y):
    """``exp(-2 pi t (y, K y + 2 a))`` for ``y`` of shape ``(..., g)``."""
    Kf = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    quad = np.einsum("...i,ij,...j->...", y, Kf, y)
    return np.exp(-2 * math.pi * t * (quad + 2 * y @ np.asarray(a_vec, dtype=float)))


def center_mass_gram(K, tau, a_vec, b_vec, grid: GridSpec | None = None, cs: Sequence | None = None,
                     tol: float = DEFAULT_TOL, return_result: bool = False):
    """Gram matrix of ``(H_c)`` over Pi by quadrature on [0, 1]^{2g}.

    Coordinates are ordered ``(x_1, ..., x_g, y_1, ..., y_g)`` with
    ``z = x + tau y`` and ``xi = tau a + b``.
    """
    Kf = _sym_pd(K)
    g = Kf.shape[0]
    tau = TorusParams(tau).tau
    grid = GridSpec(32, 2 * g) if grid is None else grid
    if grid.dims != 2 * g:
        raise ValueError(f"grid must have {2 * g} dimensions")
    cs = enumerate_pi(K) if cs is None else list(cs)
    a_vec = np.asarray(a_vec, dtype=float)
    xi = tau * a_vec + np.asarray(b_vec, dtype=float)
    omega = PeriodMatrix.scaled(tau, Kf)
    chars = [_char(c) for c in cs]

    def integrand(pts):
        x, y = pts[:, :g], pts[:, g:]
        arg = (x + tau * y) @ Kf.T + xi
        vals = np.stack([theta_g(arg, omega, c, None, tol) for c in chars], axis=-1)
        weight = center_mass_weight(Kf, tau.imag, a_vec, y)
        return vals[:, :, None] * np.conj(vals[:, None, :]) * weight[:, None, None]

    res = torus_quadrature(integrand, grid)
    gram = 0.5 * (res.value + res.value.conj().T)
    if return_result:
        return gram, res
    return gram


def kappa_closed(K, a_vec, t: float) -> float:
    """Gaussian-integral value ``(2t)^{-g/2} det(K)^{-1/2} exp(2 pi t (a, K^{-1} a))``."""
    Kf = _sym_pd(K)
    if t <= 0:
        raise ValidationError("t must be positive")
    g = Kf.shape[0]
    a = np.asarray(a_vec, dtype=float)
    delta = _bareiss_det(parse_int_matrix(K))
    return (2 * t) ** (-g / 2) * delta ** -0.5 * math.exp(2 * math.pi * t * a @ np.linalg.solve(Kf, a))


def kappa_printed(K, a_vec, t: float) -> float:
    """The alternative prefactor ``(2 t delta)^{-g/2}``; equals ``kappa_closed`` when g = 1 or delta = 1."""
    Kf = _sym_pd(K)
    g = Kf.shape[0]
    a = np.asarray(a_vec, dtype=float)
    delta = _bareiss_det(parse_int_matrix(K))
    return (2 * t * delta) ** (-g / 2) * math.exp(2 * math.pi * t * a @ np.linalg.solve(Kf, a))


def kappa_prefactors_differ(K) -> bool:
    """Whether the two candidate prefactors disagree (g >= 2 and delta > 1)."""
    K = parse_int_matrix(K)
    return len(K) >= 2 and _bareiss_det(K) > 1

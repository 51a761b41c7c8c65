"""Integration over the unit cube [0, 1]^d for periodic integrands.

Two backends:

* ``torus_quadrature`` -- tensor-product rectangle rule (equal to the
  trapezoid rule for periodic integrands).  The error estimate is the
  difference to the rule on the half grid, which reuses the even-index
  points and so costs no extra evaluations.
* ``qmc_integrate`` -- replicated base-2 Sobol points, each replicate
  randomised by an independent digital shift.  The error estimate is the
  standard error of the replicate means.

Integrands receive an array of points with shape ``(P, d)`` and return
values with shape ``(P,)`` or ``(P, ...)``; vector and matrix valued
integrands are integrated componentwise.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import GridTooLarge

DEFAULT_MAX_EVALUATIONS = 10**8
DEFAULT_CHUNK = 1 << 16
WORKERS_ENV = "FQHE_TORUS_WORKERS"
_SHIFT_BITS = 52

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass
class IntegrationResult:
    value: complex | np.ndarray
    error_estimate: float | np.ndarray
    evaluations: int
    backend: str
    reliable: bool = True

    def __post_init__(self):
        if np.any(np.asarray(self.error_estimate) < 0):
            raise ValueError("error estimate must be nonnegative")
        if self.evaluations <= 0:
            raise ValueError("evaluations must be positive")
        if self.backend not in ("grid", "lowdiscrepancy"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: int
    dims: int

    def __post_init__(self):
        if self.points_per_axis < 2:
            raise ValueError("a grid needs at least 2 points per axis")
        if self.dims < 1:
            raise ValueError("grid dimension must be >= 1")

    @property
    def total(self) -> int:
        return self.points_per_axis ** self.dims


def default_workers() -> int:
    """Worker count from the environment (1 when unset)."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None


class _Compensated:
    """Kahan accumulator for arrays; adding in a fixed order gives reproducible sums."""

    def __init__(self):
        self.total = None
        self.comp = None

    def add(self, x):
        if self.total is None:
            self.total = np.array(x, dtype=complex)
            self.comp = np.zeros_like(self.total)
            return
        y = x - self.comp
        s = self.total + y
        self.comp = (s - self.total) - y
        self.total = s


def _grid_chunk(integrand, N, d, start, stop):
    idx = np.unravel_index(np.arange(start, stop), (N,) * d)
    pts = np.stack(idx, axis=-1).astype(float) / N
    vals = np.asarray(integrand(pts), dtype=complex)
    if vals.shape[:1] != (stop - start,):
        raise ValueError(f"integrand returned shape {vals.shape} for {stop - start} points")
    even = np.all(np.stack(idx, axis=-1) % 2 == 0, axis=-1)
    return vals.sum(axis=0), vals[even].sum(axis=0)


def torus_quadrature(integrand: Integrand, grid: GridSpec, *,
                     max_evaluations: int = DEFAULT_MAX_EVALUATIONS,
                     chunk_size: int = DEFAULT_CHUNK,
                     workers: int | None = None) -> IntegrationResult:
    """Rectangle rule with ``grid.points_per_axis`` points per axis on [0, 1)^d.

    The integrand must be 1-periodic in every variable.  Chunks may be
    evaluated by a thread pool; partial sums are combined in chunk order,
    so the result does not depend on the worker count.
    """
    N, d = grid.points_per_axis, grid.dims
    total = grid.total
    if total > max_evaluations:
        raise GridTooLarge(f"{N}^{d} = {total} evaluations exceeds the cap {max_evaluations}")
    workers = default_workers() if workers is None else max(1, int(workers))
    bounds = [(s, min(s + chunk_size, total)) for s in range(0, total, chunk_size)]

    def run(bound):
        return _grid_chunk(integrand, N, d, *bound)

    if workers == 1 or len(bounds) == 1:
        parts = map(run, bounds)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        parts = pool.map(run, bounds)
    full, half = _Compensated(), _Compensated()
    try:
        for f, h in parts:
            full.add(f)
            half.add(h)
    finally:
        if workers > 1 and len(bounds) > 1:
            pool.shutdown()

    value = full.total / total
    reliable = N % 2 == 0
    if reliable:
        coarse = half.total / (N // 2) ** d
        error = np.abs(value - coarse)
    else:
        error = np.zeros(np.shape(value))
    return IntegrationResult(_unwrap(value), _unwrap(error, real=True), total, "grid", reliable)


def _unwrap(x, real=False):
    x = np.asarray(x)
    if x.ndim == 0:
        return float(x.real) if real else complex(x)
    return x.real.copy() if real else x


def sobol_base(dims: int, n: int) -> np.ndarray:
    """First ``n`` points of the unscrambled Sobol sequence as 52-bit integers."""
    sampler = qmc.Sobol(d=dims, scramble=False, bits=_SHIFT_BITS)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        pts = sampler.random(n)
    return np.round(pts * float(1 << _SHIFT_BITS)).astype(np.uint64)


def digital_shift(base: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """XOR every coordinate's binary digits with ``shift`` and map back to [0, 1)."""
    return np.bitwise_xor(base, shift[None, :]).astype(float) / float(1 << _SHIFT_BITS)


def qmc_integrate(integrand: Integrand, dims: int, samples: int, seed: int,
                  replicates: int = 16, chunk_size: int = DEFAULT_CHUNK) -> IntegrationResult:
    """Randomised quasi-Monte Carlo estimate of the integral over [0, 1)^dims.

    ``samples`` is the total budget; each replicate uses
    ``ceil(samples / replicates)`` points of the same Sobol sequence with
    its own random digital shift drawn from ``numpy.random.default_rng(seed)``.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    if replicates < 2:
        raise ValueError("replicates must be >= 2")
    per_rep = -(-samples // replicates)
    base = sobol_base(dims, per_rep)
    rng = np.random.default_rng(seed)
    shifts = rng.integers(0, 1 << _SHIFT_BITS, size=(replicates, dims), dtype=np.uint64)

    means = []
    for r in range(replicates):
        acc = _Compensated()
        for start in range(0, per_rep, chunk_size):
            pts = digital_shift(base[start:start + chunk_size], shifts[r])
            vals = np.asarray(integrand(pts), dtype=complex)
            acc.add(vals.sum(axis=0))
        means.append(acc.total / per_rep)
    means = np.stack(means)
    value = means.mean(axis=0)
    spread = np.sqrt(np.sum(np.abs(means - value) ** 2, axis=0) / (replicates - 1))
    error = spread / np.sqrt(replicates)
    return IntegrationResult(_unwrap(value), _unwrap(error, real=True), per_rep * replicates,
                             "lowdiscrepancy")

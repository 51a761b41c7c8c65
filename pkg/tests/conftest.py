import cmath
import itertools
import math

import mpmath
import numpy as np
import pytest


def direct_theta(z, tau, a=0.0, b=0.0, radius=30):
    """Plain term-by-term sum of the one-dimensional series in extended precision."""
    with mpmath.workdps(30):
        z = mpmath.mpc(z)
        tau = mpmath.mpc(tau)
        total = mpmath.mpc(0)
        for n in range(-radius, radius + 1):
            x = n + mpmath.mpf(a)
            total += mpmath.exp(mpmath.pi * 1j * tau * x * x + 2 * mpmath.pi * 1j * x * (z + b))
        return complex(total)


def direct_theta_g(z, omega, a=None, b=None, radius=12):
    """Term-by-term sum of the g-dimensional series over a cube of integer vectors."""
    omega = np.asarray(omega, dtype=complex)
    g = omega.shape[0]
    a = np.zeros(g) if a is None else np.asarray(a, dtype=float)
    b = np.zeros(g) if b is None else np.asarray(b, dtype=float)
    z = np.asarray(z, dtype=complex)
    terms = []
    for k in itertools.product(range(-radius, radius + 1), repeat=g):
        x = np.asarray(k, dtype=float) + a
        terms.append(cmath.exp(math.pi * 1j * (x @ omega @ x) + 2 * math.pi * 1j * (x @ (z + b))))
    terms.sort(key=abs)
    return complex(sum(terms))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

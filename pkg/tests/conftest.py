import math

import numpy as np
import pytest

from helix_kmd.stream import build_context


@pytest.fixture(scope="session")
def ctx_cache():
    """Session cache of stream contexts keyed by (log-eps exponent, geometry)."""
    cache = {}

    def get(exponent, r=1.0, h=1.0, n=3, alpha=None):
        key = (float(exponent), float(r), float(h), int(n), alpha)
        if key not in cache:
            cache[key] = build_context(math.exp(-float(exponent)), r, h, n, alpha=alpha)
        return cache[key]

    return get


@pytest.fixture()
def rng():
    # fresh seeded generator per test: draws do not depend on test order
    return np.random.default_rng(12345)


def fd_linearized_residual(f, y, d=1e-3):
    """4th-order FD residual of Delta f + e^Gamma f at points y (..., 2)."""
    e1 = np.array([d, 0.0])
    e2 = np.array([0.0, d])
    lap = np.zeros(np.asarray(y).shape[:-1])
    for e in (e1, e2):
        lap += (
            -f(y + 2 * e) + 16 * f(y + e) - 30 * f(y) + 16 * f(y - e) - f(y - 2 * e)
        ) / (12 * d * d)
    v = np.einsum("...i,...i->...", y, y)
    return lap + 8.0 / (1.0 + v) ** 2 * f(y)

from __future__ import annotations

import numpy as np
import pytest

from spectral_intervene.market import Intervention, MarketState, normalize_slutsky


def random_valid_state(rng: np.random.Generator, n: int) -> MarketState:
    """Random state satisfying every invariant: D_raw = -A A^T - eps I forces
    strict negative definiteness, then normalize; q0 scaled inside the unit
    ball."""
    a = rng.standard_normal((n, n))
    d_raw = -(a @ a.T) - 1e-6 * np.eye(n)
    d_norm, _ = normalize_slutsky(d_raw)
    q0 = rng.standard_normal(n)
    q0 *= rng.uniform(0.1, 1.0) / np.linalg.norm(q0)
    return MarketState(d=d_norm, q0=q0)


def random_intervention(rng: np.random.Generator, n: int) -> Intervention:
    return Intervention(sigma=rng.standard_normal(n))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)

"""Shared test helpers: finite differences, random distributions, tiny models."""
from __future__ import annotations

import numpy as np
import pytest

from clipdiv import model as uda_model


def rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Worst-case elementwise relative error with an absolute floor."""
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale))


def finite_diff(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    xflat = x.ravel()
    for i in range(x.size):
        orig = xflat[i]
        xflat[i] = orig + h
        up = f(x)
        xflat[i] = orig - h
        down = f(x)
        xflat[i] = orig
        flat[i] = (up - down) / (2.0 * h)
    return grad


def random_prob_rows(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Strictly positive probability rows."""
    return rng.dirichlet(np.full(k, 2.0), size=n)


def tiny_model(rng_seed: int, d_in: int = 3, hidden=(4,), d_feat: int = 4, k: int = 3):
    return uda_model.init((d_in, *hidden, d_feat), k, seed=rng_seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

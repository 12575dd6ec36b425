"""The compiled and vectorized kernel forms must agree exactly."""
import os
import subprocess
import sys

import numpy as np
import pytest

from feedcontagion import kernels
from feedcontagion._accel import HAS_NUMBA
from feedcontagion.graph import configuration_model, power_law_degrees

FORMS = [("loop", "np")] + ([("nb", "np")] if HAS_NUMBA else [])


@pytest.fixture(scope="module")
def graph():
    rng = np.random.default_rng(0)
    return configuration_model(power_law_degrees(800, 2.4, rng, k_min=1), seed=rng)


def _pair(name, a, b):
    return getattr(kernels, f"{name}_{a}"), getattr(kernels, f"{name}_{b}")


@pytest.mark.parametrize("a, b", FORMS)
@pytest.mark.parametrize("mu", [0.0, 0.3, 0.7, 1.0])
def test_icm_fsm_parity(graph, a, b, mu):
    rng = np.random.default_rng(int(mu * 10))
    ptr, idx = graph.followers_ptr, graph.followers_idx
    seeds = np.array([0, 17], np.int64)
    for name, coins in (("icm_spread", rng.random(idx.size)), ("fsm_spread", rng.random(ptr.size - 1))):
        f, g = _pair(name, a, b)
        np.testing.assert_array_equal(f(ptr, idx, coins, mu, seeds, 10**9), g(ptr, idx, coins, mu, seeds, 10**9))
        # truncated runs agree as well
        np.testing.assert_array_equal(f(ptr, idx, coins, mu, seeds, 2), g(ptr, idx, coins, mu, seeds, 2))


@pytest.mark.parametrize("a, b", FORMS)
@pytest.mark.parametrize("phi", [0.05, 0.3, 0.5])
def test_threshold_parity(graph, a, b, phi):
    f, g = _pair("threshold_spread", a, b)
    ptr, idx = graph.followers_ptr, graph.followers_idx
    fc = graph.out_degree().astype(np.int64)
    seeds = np.arange(0, 800, 40, dtype=np.int64)
    np.testing.assert_array_equal(f(ptr, idx, fc, phi, seeds, 10**9), g(ptr, idx, fc, phi, seeds, 10**9))


@pytest.mark.parametrize("a, b", FORMS)
def test_reach_batch_and_enumerate_parity(a, b):
    rng = np.random.default_rng(4)
    src = rng.integers(0, 6, 9)
    dst = rng.integers(0, 6, 9)
    keep = src != dst
    src, dst = src[keep], dst[keep]
    seeds = np.array([0], np.int64)
    active = rng.random((50, src.size)) < 0.5
    f, g = _pair("reach_batch", a, b)
    np.testing.assert_array_equal(f(src, dst, active, seeds, 6), g(src, dst, active, seeds, 6))
    f, g = _pair("enumerate_icm", a, b)
    for x, y in zip(f(src, dst, 0.4, seeds, 6), g(src, dst, 0.4, seeds, 6)):
        np.testing.assert_allclose(x, y, atol=1e-12)


@pytest.mark.parametrize("a, b", FORMS)
def test_fixed_point_and_topk_parity(a, b):
    coef = np.array([0.1, 0.3, 0.4, 0.2])
    f, g = _pair("fixed_point", a, b)
    for T in (0.2, 0.6, 1.0):
        x, y = f(coef, T, 1e-12, 100000), g(coef, T, 1e-12, 100000)
        assert x[0] == pytest.approx(y[0], abs=1e-12) and x[2] == y[2]
    w = (1 + np.arange(30) / 5.0) ** -1.0
    u = np.random.default_rng(2).random((400, 30))
    f, g = _pair("weighted_topk_counts", a, b)
    np.testing.assert_array_equal(f(w, u, 5), g(w, u, 5))


def test_env_flag_selects_numpy():
    code = "from feedcontagion import kernels; print(kernels.BACKEND, kernels.icm_spread is kernels.icm_spread_np)"
    env = dict(os.environ, FEEDCONTAGION_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout.split()
    assert out == ["numpy", "True"]

import os
import subprocess
import sys

import numpy as np
import pytest

from byzvi import kernels
from byzvi.kernels import (_affine_batch_mean_np, _krum_scores_np, _weiszfeld_np,
                           affine_batch_mean, krum_scores, weiszfeld)


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(30, 6, 6))
    b = rng.normal(size=(30, 6))
    x = rng.normal(size=6)
    vs = rng.normal(size=(12, 6))
    return A, b, x, vs


def test_backends_agree_affine(data):
    A, b, x, _ = data
    idx = np.array([3, 3, 7, 19, 0])
    assert np.allclose(affine_batch_mean(A, b, idx, x),
                       _affine_batch_mean_np(A, b, idx, x), atol=1e-12)


def test_backends_agree_weiszfeld(data):
    _, _, _, vs = data
    assert np.allclose(weiszfeld(vs, 10, 0.1), _weiszfeld_np(vs, 10, 0.1),
                       atol=1e-10)


def test_backends_agree_krum(data):
    _, _, _, vs = data
    assert np.allclose(krum_scores(vs, 3), _krum_scores_np(vs, 3), atol=1e-10)


def test_kernel_deterministic_across_calls(data):
    A, b, x, _ = data
    idx = np.array([1, 5, 5, 2])
    assert np.array_equal(affine_batch_mean(A, b, idx, x),
                          affine_batch_mean(A, b, idx, x))


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, BYZVI_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c", "from byzvi import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "numpy"


def test_default_backend_is_numba_when_available():
    pytest.importorskip("numba")
    assert kernels.BACKEND == "numba"

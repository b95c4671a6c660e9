import numpy as np
import pytest

from byzvi import core
from byzvi.core import OracleView, distance_sq, estimate_sigma, evaluate_full, sample_stochastic
from byzvi.errors import ConfigError
from byzvi.game import QuadraticGame, generate, solve_exact


def single_op_game(A, b):
    """Hand-built game with one operator (no generation randomness)."""
    A = np.asarray(A, dtype=float)[None, :, :]
    b = np.asarray(b, dtype=float)[None, :]
    g = QuadraticGame(s=1, d=A.shape[1], mu=1.0, ell=1.0, A=A, b=b)
    solve_exact(g)
    return g


def test_evaluate_full_single_affine_term():
    g = single_op_game(np.eye(2), [1.0, -2.0])
    assert np.array_equal(evaluate_full(g, np.zeros(2)), [1.0, -2.0])


def test_evaluate_full_mean_of_constants():
    A = np.stack([np.eye(2), np.eye(2)])
    b = np.array([[1.0, 0.0], [3.0, 0.0]])
    g = QuadraticGame(s=2, d=2, mu=1.0, ell=1.0, A=A, b=b)
    assert np.array_equal(evaluate_full(g, np.zeros(2)), [2.0, 0.0])


def test_evaluate_full_residual_at_solution():
    g = generate(30, 8, 0.5, 20.0, 11)
    assert np.linalg.norm(evaluate_full(g, g.x_star)) <= 1e-8


def test_evaluate_full_dimension_mismatch():
    g = generate(3, 4, 1.0, 2.0, 0)
    with pytest.raises(ConfigError):
        evaluate_full(g, np.zeros(6))


def test_evaluate_full_is_affine():
    g = generate(12, 6, 0.5, 30.0, 2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, y = rng.normal(size=6), rng.normal(size=6)
        a = rng.uniform()
        lhs = evaluate_full(g, a * x + (1 - a) * y)
        rhs = a * evaluate_full(g, x) + (1 - a) * evaluate_full(g, y)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_exhaustive_batch_equals_full_bitwise():
    g = generate(17, 4, 0.2, 5.0, 3)
    x = np.array([0.3, -1.0, 2.0, 0.1])
    view = OracleView(game=g, worker=0, batch=1, master_seed=9, exhaustive=True)
    assert np.array_equal(sample_stochastic(view, x), evaluate_full(g, x))


def test_sampling_deterministic_per_key():
    g = generate(25, 4, 0.2, 5.0, 4)
    x = np.array([1.0, 2.0, -0.5, 0.0])
    v1 = OracleView(game=g, worker=3, batch=5, master_seed=7, round_=11, phase=1)
    v2 = OracleView(game=g, worker=3, batch=5, master_seed=7, round_=11, phase=1)
    assert np.array_equal(sample_stochastic(v1, x), sample_stochastic(v2, x))
    # any key component changing gives a different draw
    v3 = OracleView(game=g, worker=3, batch=5, master_seed=7, round_=11, phase=1, attempt=1)
    assert not np.array_equal(sample_stochastic(v1, x), sample_stochastic(v3, x))


def test_sampling_unbiased_monte_carlo():
    g = generate(40, 4, 0.2, 5.0, 5)
    x = np.array([0.5, -0.2, 1.0, 0.3])
    n = 10 ** 5
    sigma = estimate_sigma(g, x, 2000, master_seed=1)
    view = OracleView(game=g, worker=0, batch=n, master_seed=123)
    err = np.linalg.norm(sample_stochastic(view, x) - evaluate_full(g, x))
    assert err <= 3 * sigma / np.sqrt(n)


def test_sigma_zero_for_deterministic_problem():
    g = single_op_game(np.eye(2), [1.0, -2.0])
    assert estimate_sigma(g, np.zeros(2), 100) == 0.0


def test_sigma_zero_for_duplicated_operators():
    A = np.stack([np.eye(2)] * 5)
    b = np.tile([0.5, 1.5], (5, 1))
    g = QuadraticGame(s=5, d=2, mu=1.0, ell=1.0, A=A, b=b)
    assert estimate_sigma(g, np.array([2.0, -1.0]), 50) == 0.0


def test_sigma_matches_two_point_closed_form():
    # two operators: every single draw deviates from the mean by the same
    # norm r, so the rms deviation equals r exactly
    A = np.stack([np.eye(2), 3 * np.eye(2)])
    b = np.array([[1.0, 0.0], [0.0, 2.0]])
    g = QuadraticGame(s=2, d=2, mu=1.0, ell=3.0, A=A, b=b)
    x = np.array([0.7, -0.4])
    r = 0.5 * np.linalg.norm((A[0] - A[1]) @ x + (b[0] - b[1]))
    est = estimate_sigma(g, x, 10 ** 5)
    assert abs(est - r) <= 0.05 * r


def test_sigma_needs_two_samples():
    g = single_op_game(np.eye(2), [0.0, 0.0])
    with pytest.raises(ConfigError):
        estimate_sigma(g, np.zeros(2), 1)


def test_distance_sq():
    assert distance_sq(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert distance_sq(np.array([1.0, 0.0]), np.array([0.0, 0.0])) == 1.0
    assert distance_sq(np.array([3.0, 4.0]), np.array([0.0, 0.0])) == 25.0
    with pytest.raises(ConfigError):
        distance_sq(np.zeros(2), np.zeros(4))


def test_point_validation():
    with pytest.raises(ConfigError):
        core.check_point(np.array([1.0, np.nan]))
    with pytest.raises(ConfigError):
        core.check_point(np.array([1.0, 2.0, 3.0]))  # odd size


def test_shard_indices_partition():
    shards = core.shard_indices(10, [0, 1, 2])
    all_idx = np.sort(np.concatenate(list(shards.values())))
    assert np.array_equal(all_idx, np.arange(10))


def test_batch_validation():
    g = single_op_game(np.eye(2), [0.0, 0.0])
    with pytest.raises(ConfigError):
        OracleView(game=g, worker=0, batch=0, master_seed=0)

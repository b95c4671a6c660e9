import numpy as np
import pytest

from byzvi.errors import ConfigError
from byzvi.game import QuadraticGame, generate, load_game, save_game, solve_exact, spectral_check


def block_eigs(game):
    """Independent oracle: eigenvalues of all symmetric blocks."""
    out = []
    for i in range(game.s):
        for M in game.blocks(i):
            out.append(np.linalg.eigvalsh(0.5 * (M + M.T)))
    return np.concatenate(out)


def test_generated_spectra_within_bounds():
    g = generate(25, 6, 0.3, 12.0, 1)
    w = block_eigs(g)
    assert w.min() >= 0.3 - 1e-8
    assert w.max() <= 12.0 + 1e-8


def test_degenerate_spectrum_gives_identity_blocks():
    g = generate(1, 2, 1.0, 1.0, 0)
    a1, a2, a3 = g.blocks(0)
    assert np.allclose(a1, 1.0) and np.allclose(a3, 1.0) and np.allclose(a2, 1.0)


def test_generate_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        generate(1, 3, 1.0, 2.0, 0)  # odd d
    with pytest.raises(ConfigError):
        generate(1, 2, 2.0, 1.0, 0)  # mu > ell
    with pytest.raises(ConfigError):
        generate(0, 2, 1.0, 2.0, 0)  # s < 1


def test_generate_deterministic_per_seed():
    g1 = generate(5, 4, 0.5, 3.0, 42)
    g2 = generate(5, 4, 0.5, 3.0, 42)
    assert np.array_equal(g1.A, g2.A) and np.array_equal(g1.b, g2.b)
    g3 = generate(5, 4, 0.5, 3.0, 43)
    assert not np.array_equal(g1.A, g3.A)


def test_solve_exact_hand_instance():
    g = QuadraticGame(s=1, d=2, mu=1.0, ell=1.0,
                      A=np.eye(2)[None], b=np.array([[1.0, -2.0]]))
    x = solve_exact(g)
    assert np.allclose(x, [-1.0, 2.0])


def test_solve_exact_residual():
    g = generate(100, 10, 0.1, 50.0, 7)
    F = g.mean_matrix() @ g.x_star + g.mean_offset()
    assert np.linalg.norm(F) <= 1e-8


def test_solution_scales_with_offsets():
    g = generate(10, 4, 0.5, 5.0, 9)
    x1 = g.x_star.copy()
    g2 = QuadraticGame(s=g.s, d=g.d, mu=g.mu, ell=g.ell, A=g.A, b=2 * g.b)
    x2 = solve_exact(g2)
    assert np.allclose(x2, 2 * x1, rtol=1e-10)


def test_spectral_check_reports_extremes():
    g = generate(8, 4, 0.4, 6.0, 3)
    rep = spectral_check(g)
    w = block_eigs(g)
    assert rep.min_eig == pytest.approx(w.min())
    assert rep.max_eig == pytest.approx(w.max())
    assert rep.min_eig >= g.mu - 1e-8
    assert rep.max_asymmetry <= 1e-12


def test_spectral_check_detects_planted_violation():
    g = generate(4, 4, 1.0, 4.0, 5)
    bad = g.A.copy()
    bad[0, :2, :2] = 0.5 * np.eye(2)  # eigenvalue mu/2
    broken = QuadraticGame(s=g.s, d=g.d, mu=g.mu, ell=g.ell, A=bad, b=g.b)
    assert spectral_check(broken).min_eig < g.mu


def test_strong_monotonicity_property():
    g = generate(12, 6, 0.5, 8.0, 6)
    Abar, bbar = g.mean_matrix(), g.mean_offset()
    rng = np.random.default_rng(1)
    for _ in range(1000):
        x, y = rng.normal(size=6), rng.normal(size=6)
        fx, fy = Abar @ x + bbar, Abar @ y + bbar
        assert (fx - fy) @ (x - y) >= (g.mu - 1e-6) * ((x - y) @ (x - y))


def test_lipschitz_surrogate_property():
    g = generate(12, 6, 0.5, 8.0, 8)
    Abar, bbar = g.mean_matrix(), g.mean_offset()
    rng = np.random.default_rng(2)
    for _ in range(1000):
        x, y = rng.normal(size=6), rng.normal(size=6)
        lhs = np.linalg.norm((Abar @ x) - (Abar @ y))
        assert lhs <= (g.ell * np.sqrt(2) + 1e-6) * np.linalg.norm(x - y)
    assert spectral_check(g).lipschitz_est <= g.ell * np.sqrt(2) + 1e-6


def test_save_load_roundtrip(tmp_path):
    g = generate(6, 4, 0.3, 2.0, 17)
    path = tmp_path / "game.bin"
    save_game(g, path)
    g2 = load_game(path)
    assert g2.s == g.s and g2.d == g.d and g2.seed == 17
    assert np.array_equal(g2.A, g.A)
    assert np.array_equal(g2.b, g.b)
    assert np.array_equal(g2.x_star, g.x_star)


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"not a game")
    with pytest.raises(ConfigError):
        load_game(p)

"""Quadratic-game benchmark: generation, exact solution, structure checks.

The problem is a min-max game over x = (y, z) whose mean operator is
affine, F(x) = (1/s) sum_i A_i x + b_i, with

    A_i = [[A1_i, A2_i], [-A2_i^T, A3_i]]

where each A{1,2,3}_i is symmetric with eigenvalues controlled to lie in
[mu, ell].  The skew off-diagonal coupling makes this a genuine game
rather than a minimization problem; the exact solution x* solves the
linear system mean(A) x* = -mean(b).
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .rng import Stream, key_stream

_MAGIC = b"BYZVIGM1"
_SOLVE_RESIDUAL_TOL = 1e-8


@dataclass
class QuadraticGame:
    s: int
    d: int
    mu: float
    ell: float
    A: np.ndarray            # (s, d, d)
    b: np.ndarray            # (s, d)
    seed: int | None = None
    x_star: np.ndarray | None = field(default=None, repr=False)

    @property
    def half(self) -> int:
        return self.d // 2

    def blocks(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The (A1, A2, A3) blocks of operator i."""
        h = self.half
        return (self.A[i, :h, :h], self.A[i, :h, h:], self.A[i, h:, h:])

    def mean_matrix(self) -> np.ndarray:
        return self.A.mean(axis=0)

    def mean_offset(self) -> np.ndarray:
        return self.b.mean(axis=0)


@dataclass
class SpectralReport:
    min_eig: float
    max_eig: float
    max_asymmetry: float
    lipschitz_est: float


def _check_dims(s: int, d: int, mu: float, ell: float) -> None:
    if s < 1:
        raise ConfigError(f"need at least one sampled operator, got s={s}")
    if d < 2 or d % 2 != 0:
        raise ConfigError(f"dimension must be even and >= 2, got d={d}")
    if not (0 < mu <= ell):
        raise ConfigError(f"need 0 < mu <= ell, got mu={mu}, ell={ell}")


def _controlled_symmetric(rng: np.random.Generator, h: int, mu: float,
                          ell: float) -> np.ndarray:
    """Symmetric h x h matrix with spectrum affinely rescaled into [mu, ell]."""
    B = rng.standard_normal((h, h))
    B = 0.5 * (B + B.T)
    w, V = np.linalg.eigh(B)
    lo, hi = w[0], w[-1]
    if hi - lo < 1e-12:
        w_hat = np.full(h, 0.5 * (mu + ell))
    else:
        w_hat = mu + (w - lo) * (ell - mu) / (hi - lo)
    M = (V * w_hat) @ V.T
    return 0.5 * (M + M.T)


def generate(s: int, d: int, mu: float, ell: float,
             rng: int | np.random.Generator) -> QuadraticGame:
    """Sample a game with all block spectra in [mu, ell].

    ``rng`` may be an integer master seed (preferred, recorded in the
    game) or a ready generator.
    """
    _check_dims(s, d, mu, ell)
    if isinstance(rng, (int, np.integer)):
        seed: int | None = int(rng)
        gen = key_stream(seed, Stream.GAME)
    else:
        seed = None
        gen = rng

    h = d // 2
    A = np.empty((s, d, d))
    for i in range(s):
        A1 = _controlled_symmetric(gen, h, mu, ell)
        A2 = _controlled_symmetric(gen, h, mu, ell)
        A3 = _controlled_symmetric(gen, h, mu, ell)
        A[i, :h, :h] = A1
        A[i, :h, h:] = A2
        A[i, h:, :h] = -A2.T
        A[i, h:, h:] = A3
    b = gen.normal(0.0, np.sqrt(10.0 / d), size=(s, d))
    game = QuadraticGame(s=s, d=d, mu=float(mu), ell=float(ell), A=A, b=b,
                         seed=seed)
    solve_exact(game)
    return game


def solve_exact(game: QuadraticGame) -> np.ndarray:
    """Solve mean(A) x* = -mean(b); stores and returns x*."""
    Abar = game.mean_matrix()
    bbar = game.mean_offset()
    try:
        x_star = np.linalg.solve(Abar, -bbar)
    except np.linalg.LinAlgError as exc:  # cannot happen for valid games
        raise NumericalError(f"mean matrix is singular: {exc}") from exc
    residual = float(np.linalg.norm(Abar @ x_star + bbar))
    if not np.isfinite(x_star).all() or residual > _SOLVE_RESIDUAL_TOL:
        raise NumericalError(f"exact solve failed, residual={residual:.3e}")
    game.x_star = x_star
    return x_star


def spectral_check(game: QuadraticGame) -> SpectralReport:
    """Extreme block eigenvalues, worst block asymmetry, operator norm."""
    min_eig = np.inf
    max_eig = -np.inf
    max_asym = 0.0
    for i in range(game.s):
        for M in game.blocks(i):
            w = np.linalg.eigvalsh(0.5 * (M + M.T))
            min_eig = min(min_eig, w[0])
            max_eig = max(max_eig, w[-1])
            max_asym = max(max_asym, float(np.abs(M - M.T).max()))
    lip = float(np.linalg.norm(game.mean_matrix(), 2))
    return SpectralReport(min_eig=float(min_eig), max_eig=float(max_eig),
                          max_asymmetry=max_asym, lipschitz_est=lip)


# ---------------------------------------------------------------------------
# flat-binary persistence: magic | u32 header length | JSON header | A | b | x*

def save_game(game: QuadraticGame, path: str) -> None:
    header = {
        "s": game.s, "d": game.d, "mu": game.mu, "ell": game.ell,
        "seed": game.seed, "has_solution": game.x_star is not None,
    }
    raw = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        fh.write(np.ascontiguousarray(game.A, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(game.b, dtype="<f8").tobytes())
        if game.x_star is not None:
            fh.write(np.ascontiguousarray(game.x_star, dtype="<f8").tobytes())


def load_game(path: str) -> QuadraticGame:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ConfigError(f"{path}: not a saved game file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        s, d = header["s"], header["d"]
        buf = io.BytesIO(fh.read())
    A = np.frombuffer(buf.read(s * d * d * 8), dtype="<f8").reshape(s, d, d).copy()
    b = np.frombuffer(buf.read(s * d * 8), dtype="<f8").reshape(s, d).copy()
    game = QuadraticGame(s=s, d=d, mu=header["mu"], ell=header["ell"],
                         A=A, b=b, seed=header["seed"])
    if header["has_solution"]:
        game.x_star = np.frombuffer(buf.read(d * 8), dtype="<f8").copy()
    else:
        solve_exact(game)
    return game

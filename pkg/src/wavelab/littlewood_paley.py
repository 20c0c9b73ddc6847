"""Dyadic decomposition and the Besov/Zygmund/Sobolev norms built on it.

Bump profile: ``phi(r) = 1`` for ``r <= 1``, ``0`` for ``r >= 2`` and
``S(2 - r) / (S(2 - r) + S(r - 1))`` in between, with ``S(x) = exp(-1/x)``.
Blocks are ``P_0 = phi(|xi|)`` and ``P_k = phi(|xi|/2^k) - phi(|xi|/2^(k-1))``;
the last block absorbs the remainder so the partition is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import IndexOutOfRange
from .spectral_core import PeriodicGrid

DEFAULT_EPS = 1.0 / 16


def _s(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    a, b = _s(x), _s(1.0 - x)
    return a / (a + b)


def bump(r: np.ndarray) -> np.ndarray:
    return smooth_step(2.0 - np.asarray(r, dtype=float))


@dataclass(frozen=True)
class DyadicDecomposition:
    grid: PeriodicGrid

    @cached_property
    def n_blocks(self) -> int:
        top = max(1.0, float(np.abs(self.grid.xi).max()))
        return int(np.ceil(np.log2(top))) + 1

    @cached_property
    def blocks(self) -> np.ndarray:
        a = np.abs(self.grid.xi)
        K = self.n_blocks
        out = np.empty((K, a.size))
        out[0] = bump(a)
        for k in range(1, K):
            out[k] = bump(a / 2.0**k) - bump(a / 2.0 ** (k - 1))
        out[K - 1] = 1.0 - (bump(a / 2.0 ** (K - 2)) if K > 1 else 0.0)
        return out

    def block(self, f: np.ndarray, k: int) -> np.ndarray:
        if not 0 <= k < self.n_blocks:
            raise IndexOutOfRange(f"block {k} outside 0..{self.n_blocks - 1}")
        return self.grid.ifft(self.grid.fft(f) * self.blocks[k])

    def all_blocks(self, f: np.ndarray) -> np.ndarray:
        return self.grid.ifft((self.grid.fft(f)[None, :] * self.blocks).T).T


def dyadic_block(grid: PeriodicGrid, f: np.ndarray, k: int) -> np.ndarray:
    return DyadicDecomposition(grid).block(f, k)


def _lp(grid: PeriodicGrid, g: np.ndarray, p: float) -> np.ndarray:
    if np.isinf(p):
        return np.abs(g).max(axis=-1)
    return (np.mean(np.abs(g) ** p, axis=-1) * grid.period) ** (1.0 / p)


def besov_norm(grid: PeriodicGrid, f: np.ndarray, s: float, p: float = np.inf, q: float = np.inf) -> float:
    """``|| (2^{ks} ||P_k f||_{L^p})_k ||_{l^q}``; ``p = q = inf`` is the Zygmund norm."""
    if not (1 <= p <= np.inf and 1 <= q <= np.inf):
        raise ValueError("p and q must lie in [1, inf]")
    dec = DyadicDecomposition(grid)
    weights = 2.0 ** (s * np.arange(dec.n_blocks))
    seq = weights * _lp(grid, dec.all_blocks(f), p)
    if np.isinf(q):
        return float(seq.max())
    return float(np.sum(seq**q) ** (1.0 / q))


def zygmund_norm(grid: PeriodicGrid, f: np.ndarray, s: float) -> float:
    return besov_norm(grid, f, s, np.inf, np.inf)


def sobolev_norm(grid: PeriodicGrid, f: np.ndarray, s: float) -> float:
    c = grid.fft(f)
    return float(np.sqrt(grid.period * np.sum((1 + grid.xi**2) ** s * np.abs(c) ** 2)))


def product_norm(
    grid: PeriodicGrid, pair: tuple[np.ndarray, np.ndarray], s: float, flavor: Literal["H", "W"] = "H"
) -> float:
    """First component at regularity ``s + 1/2`` plus second at ``s``."""
    f, g = pair
    if flavor == "H":
        return sobolev_norm(grid, f, s + 0.5) + sobolev_norm(grid, g, s)
    if flavor == "W":
        return zygmund_norm(grid, f, s + 0.5) + zygmund_norm(grid, g, s)
    raise ValueError(f"flavor must be 'H' or 'W', got {flavor!r}")


def control_norms_fields(
    grid: PeriodicGrid, Wb: np.ndarray, R: np.ndarray, gamma: float, eps: float = DEFAULT_EPS
) -> tuple[float, float]:
    z = lambda f, s: zygmund_norm(grid, f, s)  # noqa: E731
    g = abs(gamma)
    A = z(Wb, 1 + eps) + z(R, 0.5) + g * z(Wb, 0.5)
    B = z(Wb, 1.5) + z(R, 1 + eps) + g * z(Wb, 1 + eps) + g * z(R, 0.5)
    return A, B


def control_norms(state, eps: float = DEFAULT_EPS) -> tuple[float, float]:
    """Control norms of a ``WaveState`` or ``DiffState``."""
    d = state if hasattr(state, "Wb") else state.to_diff()
    return control_norms_fields(d.grid, d.Wb, d.R, d.params.gamma, eps)

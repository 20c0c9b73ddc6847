"""Gravity-capillary water waves with constant vorticity in holomorphic coordinates.

Two formulations are provided: the undifferentiated unknowns ``(W, Q)`` and
the differentiated pair ``(Wb, R) = (W_a, Q_a / (1 + W_a))``.  All nonlinear
terms go through ``_Ops``, which dealiases every product and applies the
holomorphic projection ``(I - iH)/2`` literally (the mean is halved, so that
``P + Pbar = I``).  This is the convention under which the two formulations
agree and the energy and momentum are exact invariants; ``W`` is therefore
allowed to carry a mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DegenerateSurface
from .spectral_core import (
    PeriodicGrid,
    antiderivative,
    dealias_mask,
    holo_defect,
)

DEGENERACY_THRESHOLD = 0.1
DEFAULT_DEALIAS = 2 / 3


@dataclass(frozen=True)
class PhysParams:
    g: float = 1.0
    sigma: float = 1.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not self.g >= 0:
            raise ValueError(f"g must be nonnegative, got {self.g!r}")


class _Ops:
    """Spectral helpers bound to one grid and one dealiasing rule."""

    def __init__(self, grid: PeriodicGrid, fraction: Optional[float] = DEFAULT_DEALIAS) -> None:
        self.grid = grid
        n = grid.n_points
        self.keep = dealias_mask(n, fraction) if fraction else dealias_mask(n, 1.0)
        self.hmask = self.keep & (grid.index <= 0)
        self.ik = 1j * grid.xi

    def cut(self, f: np.ndarray) -> np.ndarray:
        return np.fft.ifft(np.fft.fft(f) * self.keep)

    def P(self, f: np.ndarray) -> np.ndarray:
        c = np.fft.fft(f) * self.hmask
        c[0] *= 0.5
        return np.fft.ifft(c)

    def holo(self, f: np.ndarray) -> np.ndarray:
        """Dealiased nonpositive-frequency part with the mean kept whole."""
        return np.fft.ifft(np.fft.fft(f) * self.hmask)

    def Pb(self, f: np.ndarray) -> np.ndarray:
        return self.cut(f) - self.P(f)

    def d(self, f: np.ndarray) -> np.ndarray:
        return np.fft.ifft(np.fft.fft(f) * self.ik)


def _check_surface(one_plus: np.ndarray, threshold: float = DEGENERACY_THRESHOLD) -> None:
    m = float(np.abs(one_plus).min())
    if not m >= threshold:
        raise DegenerateSurface(f"inf|1 + W_alpha| = {m:.3g} < {threshold}")


@dataclass(frozen=True, eq=False)
class WaveState:
    """Holomorphic position ``W`` and velocity potential ``Q`` at time ``t``."""

    W: np.ndarray
    Q: np.ndarray
    params: PhysParams
    grid: PeriodicGrid
    t: float = 0.0
    coeffs: Optional[tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        n = self.grid.n_points
        for name in ("W", "Q"):
            v = np.asarray(getattr(self, name), dtype=complex)
            if v.shape != (n,):
                raise ValueError(f"{name} has shape {v.shape}, grid has {n} points")
            object.__setattr__(self, name, v)
        _check_surface(1 + self.W_alpha)

    @property
    def W_alpha(self) -> np.ndarray:
        return np.fft.ifft(np.fft.fft(self.W) * (1j * self.grid.xi))

    @property
    def Q_alpha(self) -> np.ndarray:
        return np.fft.ifft(np.fft.fft(self.Q) * (1j * self.grid.xi))

    def with_fields(self, W: np.ndarray, Q: np.ndarray, t: Optional[float] = None) -> "WaveState":
        return WaveState(W, Q, self.params, self.grid, self.t if t is None else t)

    def to_diff(self, fraction: Optional[float] = DEFAULT_DEALIAS) -> "DiffState":
        ops = _Ops(self.grid, fraction)
        Wa = self.W_alpha
        R = ops.holo(self.Q_alpha / (1 + Wa))
        return DiffState(Wa, R, self.params, self.grid, self.t, complex(np.mean(self.W)))

    def holo_defect(self) -> float:
        return max(holo_defect(self.W), holo_defect(self.Q))


@dataclass(frozen=True, eq=False)
class DiffState:
    """Differentiated unknowns; ``w_mean`` is the mean of the underlying ``W``."""

    Wb: np.ndarray
    R: np.ndarray
    params: PhysParams
    grid: PeriodicGrid
    t: float = 0.0
    w_mean: complex = 0j

    def __post_init__(self) -> None:
        n = self.grid.n_points
        for name in ("Wb", "R"):
            v = np.asarray(getattr(self, name), dtype=complex)
            if v.shape != (n,):
                raise ValueError(f"{name} has shape {v.shape}, grid has {n} points")
            object.__setattr__(self, name, v)
        _check_surface(1 + self.Wb)

    @property
    def W(self) -> np.ndarray:
        return self.w_mean + antiderivative(self.grid, self.Wb - np.mean(self.Wb))

    def to_wave(self) -> WaveState:
        """Inverse map; the primitive of ``R (1 + Wb)`` is taken with zero mean."""
        qa = self.R * (1 + self.Wb)
        Q = antiderivative(self.grid, qa - np.mean(qa))
        return WaveState(self.W, Q, self.params, self.grid, self.t)


State = Union[WaveState, DiffState]


@dataclass(frozen=True, eq=False)
class AuxBundle:
    J: np.ndarray
    Y: np.ndarray
    F: np.ndarray
    F1: np.ndarray
    F_u: np.ndarray
    T1: np.ndarray
    a: np.ndarray
    a1: np.ndarray
    N: np.ndarray
    a_u: np.ndarray
    b: np.ndarray
    b1: np.ndarray
    b_u: np.ndarray
    M: np.ndarray
    M1: np.ndarray
    M_u: np.ndarray


def _wq_aux(ops: _Ops, W: np.ndarray, Q: np.ndarray, gamma: float) -> dict:
    Wa, Qa = ops.d(W), ops.d(Q)
    J = np.abs(1 + Wa) ** 2
    inv, invb = 1 / (1 + Wa), 1 / (1 + np.conj(Wa))
    F = ops.P((Qa - np.conj(Qa)) / J)
    F1 = ops.P(W * invb + np.conj(W) * inv)
    T1 = ops.P(W * np.conj(Qa) * invb - np.conj(W) * Qa * inv)
    return dict(Wa=Wa, Qa=Qa, J=J, F=F, F1=F1, F_u=F - 0.5j * gamma * F1, T1=T1)


def _wr_aux(ops: _Ops, W: np.ndarray, Wb: np.ndarray, R: np.ndarray, gamma: float) -> dict:
    c = np.conj
    Ra = ops.d(R)
    J = np.abs(1 + Wb) ** 2
    Qa = R * (1 + Wb)
    N = ops.P(W * c(Ra) - c(Wb) * R) + ops.Pb(c(W) * Ra - Wb * c(R))
    a = 1j * (ops.Pb(c(R) * Ra) - ops.P(R * c(Ra)))
    a1 = R + c(R) - N
    b = ops.P(Qa / J) + ops.Pb(c(Qa) / J)
    b1 = ops.P(W / (1 + c(Wb))) - ops.Pb(c(W) / (1 + Wb))
    M = ops.cut(Ra / (1 + c(Wb)) + c(Ra) / (1 + Wb)) - ops.d(b)
    M1 = Wb - c(Wb) - ops.d(b1)
    return dict(
        Ra=Ra, J=J, Y=ops.cut(Wb / (1 + Wb)), N=N, a=a, a1=a1, a_u=a + 0.5 * gamma * a1,
        b=b, b1=b1, b_u=b - 0.5j * gamma * b1, M=M, M1=M1, M_u=M - 0.5j * gamma * M1,
    )


def compute_aux(state: State, fraction: Optional[float] = DEFAULT_DEALIAS) -> AuxBundle:
    """Every auxiliary function of the two formulations at one state."""
    ws = state if isinstance(state, WaveState) else state.to_wave()
    ds = state if isinstance(state, DiffState) else state.to_diff(fraction)
    ops = _Ops(state.grid, fraction)
    gam = state.params.gamma
    wq = _wq_aux(ops, ops.cut(ws.W), ops.cut(ws.Q), gam)
    wr = _wr_aux(ops, ds.W, ds.Wb, ds.R, gam)
    return AuxBundle(
        J=wr["J"], Y=wr["Y"], F=wq["F"], F1=wq["F1"], F_u=wq["F_u"], T1=wq["T1"],
        a=wr["a"], a1=wr["a1"], N=wr["N"], a_u=wr["a_u"], b=wr["b"], b1=wr["b1"], b_u=wr["b_u"],
        M=wr["M"], M1=wr["M1"], M_u=wr["M_u"],
    )


def rhs_WQ_fields(grid: PeriodicGrid, params: PhysParams, W: np.ndarray, Q: np.ndarray,
                  fraction: Optional[float] = DEFAULT_DEALIAS, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    ops = _Ops(grid, fraction)
    g, s, gam = params.g, params.sigma, params.gamma
    W, Q = ops.cut(W), ops.cut(Q)
    x = _wq_aux(ops, W, Q, gam)
    Wa, Qa, J, Fu = x["Wa"], x["Qa"], x["J"], x["F_u"]
    if check:
        _check_surface(1 + Wa)
    curv = ops.P(np.imag(ops.d(Wa) / (np.sqrt(J) * (1 + Wa))))
    Wt = -ops.cut((1 + Wa) * Fu) - 0.5j * gam * W
    Qt = (1j * g * W - ops.cut(Fu * Qa) - 1j * gam * Q - ops.P(np.abs(Qa) ** 2 / J)
          + 0.5j * gam * x["T1"] + 2 * s * curv)
    return Wt, Qt


def rhs_WQ(state: WaveState, fraction: Optional[float] = DEFAULT_DEALIAS) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives ``(W_t, Q_t)``."""
    return rhs_WQ_fields(state.grid, state.params, state.W, state.Q, fraction)


def rhs_WR(state: DiffState, fraction: Optional[float] = DEFAULT_DEALIAS) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives ``(Wb_t, R_t)`` of the differentiated system."""
    ops = _Ops(state.grid, fraction)
    g, s, gam = state.params.g, state.params.sigma, state.params.gamma
    Wb, R = ops.cut(state.Wb), ops.cut(state.R)
    W = ops.cut(state.W)
    _check_surface(1 + Wb)
    x = _wr_aux(ops, W, Wb, R, gam)
    Ra, J, bu, Mu = x["Ra"], x["J"], x["b_u"], x["M_u"]
    cut, c = ops.cut, np.conj
    Wbt = (-cut(bu * ops.d(Wb)) - cut((1 + Wb) * Ra / (1 + c(Wb))) + cut((1 + Wb) * Mu)
           + 0.5j * gam * cut(Wb * (Wb - c(Wb))))
    curv = ops.d(ops.P(np.imag(ops.d(Wb) / (np.sqrt(J) * (1 + Wb)))))
    Rt = (-cut(bu * Ra) - 1j * gam * R + 1j * cut((g * Wb - x["a"]) / (1 + Wb)) + 2 * s * cut(curv / (1 + Wb))
          + 0.5j * gam * cut((R * Wb + c(R) * Wb + x["N"]) / (1 + Wb)))
    return Wbt, Rt


def linearized_rhs(grid: PeriodicGrid, params: PhysParams, w: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``w_t = -q_a``, ``q_t = -i gamma q + i g w - i sigma w_aa``."""
    ik = 1j * grid.xi
    wh, qh = np.fft.fft(w), np.fft.fft(q)
    wt = -np.fft.ifft(ik * qh)
    qt = -1j * params.gamma * q + 1j * params.g * w - 1j * params.sigma * np.fft.ifft(ik**2 * wh)
    return wt, qt


def conserved_integrands(state: WaveState) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise energy and momentum densities (products are not dealiased)."""
    g, s, gam = state.params.g, state.params.sigma, state.params.gamma
    W, Q = state.W, state.Q
    Wa, Qa = state.W_alpha, state.Q_alpha
    J = np.abs(1 + Wa) ** 2
    h, sl = W.imag, 1 + Wa.real
    e = (-1j * Q * np.conj(Qa) + 4 * s * (np.sqrt(J) - 1 - Wa.real) + 2 * g * h**2 * sl
         + 2 * gam * Qa.real * h**2 + (2 / 3) * gam**2 * h**3 * sl)
    p = 1j * (Q * np.conj(Wa) - np.conj(Q) * Wa) - 2 * gam * h**2 * sl
    return e, p


def conserved(state: WaveState) -> tuple[float, float]:
    """Energy and horizontal momentum."""
    e, p = conserved_integrands(state)
    return float(state.grid.integrate(e).real), float(state.grid.integrate(p).real)


def conserved_imag_parts(state: WaveState) -> tuple[float, float]:
    e, p = conserved_integrands(state)
    return float(abs(state.grid.integrate(e).imag)), float(abs(state.grid.integrate(p).imag))


def linear_energy(grid: PeriodicGrid, w: np.ndarray, q: np.ndarray, sigma: float, g: float = 0.0) -> float:
    """``sigma ||w||^2_{H^1 hom} + ||q||^2_{H^1/2 hom}``, plus ``g ||w||^2_{L^2}`` when ``g`` is given.

    The gravity term is what makes the quantity invariant under the linear
    flow when ``g > 0``.
    """
    wh, qh = grid.fft(w), grid.fft(q)
    a = np.abs(grid.xi)
    return float(grid.period * np.sum((sigma * a**2 + g) * np.abs(wh) ** 2 + a * np.abs(qh) ** 2))


def ubalpha_residual(state: DiffState, fraction: Optional[float] = DEFAULT_DEALIAS) -> float:
    """Sup norm of ``b_u' - [R_a/(1+conj Wb) + conj R_a/(1+Wb) - i gamma/2 (Wb - conj Wb) - M_u]``.

    ``M`` is assembled from its commutator form so the two sides are
    computed independently.
    """
    ops = _Ops(state.grid, fraction)
    gam = state.params.gamma
    c = np.conj
    Wb, R, W = ops.cut(state.Wb), ops.cut(state.R), ops.cut(state.W)
    x = _wr_aux(ops, W, Wb, R, gam)
    Ra = x["Ra"]
    Y = Wb / (1 + Wb)
    Ya = ops.d(Y)
    M_alt = ops.Pb(c(R) * Ya - Ra * c(Y)) + ops.P(R * c(Ya) - c(Ra) * Y)
    M1 = Wb - c(Wb) - ops.d(x["b1"])
    Mu = M_alt - 0.5j * gam * M1
    lhs = ops.d(x["b_u"])
    rhs = ops.cut(Ra / (1 + c(Wb)) + c(Ra) / (1 + Wb)) - 0.5j * gam * (Wb - c(Wb)) - Mu
    return float(np.abs(lhs - rhs).max())


# ---------------------------------------------------------------- initial data


def random_holomorphic(grid: PeriodicGrid, rng: np.random.Generator, eps: float, decay_rate: float,
                       kmax: Optional[int] = None) -> np.ndarray:
    """Zero-mean holomorphic field with Gaussian coefficients damped by ``exp(-decay_rate |xi|)``.

    Scaled so that its root-mean-square equals ``eps``; the scaling is
    therefore the same on every grid that resolves the drawn modes.
    """
    kmax = kmax if kmax is not None else grid.n_points // 3
    mask = (grid.index < 0) & (grid.index >= -kmax)
    c = np.zeros(grid.n_points, complex)
    m = int(mask.sum())
    c[mask] = (rng.normal(size=m) + 1j * rng.normal(size=m)) * np.exp(-decay_rate * np.abs(grid.xi[mask]))
    f = grid.ifft(c)
    rms = float(np.sqrt(np.mean(np.abs(f) ** 2)))
    return f * (eps / rms) if rms > 0 else f


def random_smooth(grid: PeriodicGrid, params: PhysParams, seed: int, decay_rate: float = 0.5, eps: float = 1e-2,
                  kmax: Optional[int] = None) -> WaveState:
    """Random smooth holomorphic data; ``W`` and ``Q`` draw from independent child streams of ``seed``."""
    sw, sq = np.random.SeedSequence(seed).spawn(2)
    W = random_holomorphic(grid, np.random.default_rng(sw), eps, decay_rate, kmax)
    Q = random_holomorphic(grid, np.random.default_rng(sq), eps, decay_rate, kmax)
    return WaveState(W, Q, params, grid)


def single_mode(grid: PeriodicGrid, params: PhysParams, k: int, eps: float, target: str = "W") -> WaveState:
    """``eps e^{-i k a}`` in ``W`` or ``Q`` (``k >= 1``), the other field zero."""
    if k < 1:
        raise ValueError("single_mode needs k >= 1 (holomorphic frequency -k)")
    f = grid.mode(-k, eps)
    z = np.zeros(grid.n_points, complex)
    if target == "W":
        return WaveState(f, z, params, grid)
    if target == "Q":
        return WaveState(z, f, params, grid)
    raise ValueError(f"target must be 'W' or 'Q', got {target!r}")

"""Executable paradifferential calculus on the periodic grid.

Symbols are stored in separable form ``a(alpha, xi) = sum_j f_j(alpha) m_j(xi)``
with the alpha-factors sampled on the grid and the xi-factors kept as callables
that know their own derivative.  Every symbol used in this package has that
form, and it makes ``d/dx``, ``d/dxi``, composition and adjoints exact.

The operator ``T_a`` is applied as a dense matrix in Fourier space::

    (T_a u)^(xi) = sum_eta chi(xi - eta, eta) a^(xi - eta, eta) psi(eta) u^(eta)

with ``a^`` the Fourier transform of ``a`` in ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Callable, Iterable, Literal, Optional, Sequence

import numpy as np

from .errors import GridMismatch, InsufficientRange, UnsupportedRho
from .littlewood_paley import DyadicDecomposition, bump, smooth_step, zygmund_norm
from .spectral_core import PeriodicGrid, derivative, dispersion_weight, dispersion_weight_dxi

TRUNCATION_OFFSET = 3
NOISE_FLOOR = 1e-12


# ---------------------------------------------------------------- cutoffs


@dataclass(frozen=True)
class Cutoffs:
    eps1: float = 0.1
    eps2: float = 0.3

    def __post_init__(self) -> None:
        if not 0 < self.eps1 < self.eps2 < 1:
            raise ValueError("cutoffs need 0 < eps1 < eps2 < 1")

    def chi(self, theta: np.ndarray, eta: np.ndarray) -> np.ndarray:
        r = np.abs(theta) / (1.0 + np.abs(eta))
        return smooth_step((self.eps2 - r) / (self.eps2 - self.eps1))

    @staticmethod
    def psi(eta: np.ndarray) -> np.ndarray:
        return smooth_step((np.abs(eta) - 0.2) / 0.05)


DEFAULT_CUTOFFS = Cutoffs()


@lru_cache(maxsize=16)
def _kernel_geometry(grid: PeriodicGrid, cutoffs: Cutoffs) -> tuple[np.ndarray, np.ndarray]:
    """Index matrix ``D[i, j] = (i - j) mod n`` and the weight ``chi * psi``."""
    n = grid.n_points
    i = np.arange(n)
    D = (i[:, None] - i[None, :]) % n
    theta = grid.xi[D]
    eta = grid.xi[None, :]
    weight = cutoffs.chi(theta, eta) * cutoffs.psi(eta)
    D.setflags(write=False)
    weight.setflags(write=False)
    return D, weight


# ---------------------------------------------------------------- xi factors


class XiFn:
    """Callable ``m(xi)`` that can produce its derivative.

    Without a closed form the derivative falls back to a central difference
    with step ``1e-4 (1 + |xi|)``.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], deriv: Optional[Callable[[], "XiFn"]] = None,
                 const: Optional[complex] = None) -> None:
        self.fn = fn
        self._deriv = deriv
        self.const = const

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.broadcast_to(np.asarray(self.fn(xi), dtype=complex), xi.shape)

    def d(self) -> "XiFn":
        if self.const is not None:
            return XiFn.constant(0.0)
        if self._deriv is not None:
            return self._deriv()
        fn = self.fn

        def fd(xi: np.ndarray) -> np.ndarray:
            h = 1e-4 * (1.0 + np.abs(xi))
            return (fn(xi + h) - fn(xi - h)) / (2 * h)

        return XiFn(fd)

    @staticmethod
    def constant(c: complex) -> "XiFn":
        return XiFn(lambda xi: np.full(np.shape(xi), c, dtype=complex), const=c)

    @staticmethod
    def power(p: int, c: complex = 1.0) -> "XiFn":
        """``c * xi^p`` for integer ``p`` (negative allowed)."""
        if p == 0:
            return XiFn.constant(c)
        return XiFn(lambda xi: c * xi.astype(complex) ** p, lambda: XiFn.power(p - 1, c * p))

    @staticmethod
    def abs_power(p: float, c: complex = 1.0) -> "XiFn":
        """``c * |xi|^p``."""
        if p == 0:
            return XiFn.constant(c)
        return XiFn(lambda xi: c * np.abs(xi) ** p, lambda: XiFn.abs_power(p - 1, c * p) * XiFn.sign())

    @staticmethod
    def sign() -> "XiFn":
        return XiFn(np.sign, lambda: XiFn.constant(0.0))

    @staticmethod
    def ell(params) -> "XiFn":
        return XiFn(dispersion_weight(params), lambda: XiFn(dispersion_weight_dxi(params)))

    def __mul__(self, other: "XiFn | complex") -> "XiFn":
        if not isinstance(other, XiFn):
            if self.const is not None:
                return XiFn.constant(self.const * other)
            return XiFn(lambda xi: other * self.fn(xi), lambda: self.d() * other)
        if self.const is not None:
            return other * self.const
        if other.const is not None:
            return self * other.const
        a, b = self, other
        return XiFn(lambda xi: a.fn(xi) * b.fn(xi), lambda: a.d() * b + a * b.d())

    __rmul__ = __mul__

    def __add__(self, other: "XiFn") -> "XiFn":
        a, b = self, other
        if a.const is not None and b.const is not None:
            return XiFn.constant(a.const + b.const)
        return XiFn(lambda xi: a(xi) + b(xi), lambda: a.d() + b.d())

    def conj(self) -> "XiFn":
        if self.const is not None:
            return XiFn.constant(np.conj(self.const))
        a = self
        return XiFn(lambda xi: np.conj(a(xi)), lambda: a.d().conj())


# ---------------------------------------------------------------- symbols


@dataclass(frozen=True, eq=False)
class Symbol:
    """Separable symbol with declared order ``m`` and regularity ``rho``."""

    grid: PeriodicGrid
    terms: tuple[tuple[np.ndarray, XiFn], ...]
    order: float
    rho: float = np.inf

    @staticmethod
    def function(grid: PeriodicGrid, f: np.ndarray, rho: float = np.inf) -> "Symbol":
        """xi-independent symbol ``f(alpha)``."""
        return Symbol(grid, ((np.asarray(f, dtype=complex), XiFn.constant(1.0)),), 0.0, rho)

    @staticmethod
    def multiplier(grid: PeriodicGrid, m: XiFn, order: float) -> "Symbol":
        """alpha-independent symbol ``m(xi)``."""
        return Symbol(grid, ((np.ones(grid.n_points, complex), m),), order)

    @staticmethod
    def product(grid: PeriodicGrid, f: np.ndarray, m: XiFn, order: float, rho: float = np.inf) -> "Symbol":
        """``f(alpha) m(xi)``."""
        return Symbol(grid, ((np.asarray(f, dtype=complex), m),), order, rho)

    @staticmethod
    def zero(grid: PeriodicGrid, order: float = 0.0) -> "Symbol":
        return Symbol(grid, (), order)

    def sample(self, xi: np.ndarray) -> np.ndarray:
        """Values on ``grid.alpha x xi`` as an ``(n, len(xi))`` array."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.zeros((self.grid.n_points, xi.size), complex)
        for f, m in self.terms:
            out += f[:, None] * m(xi)[None, :]
        return out

    def dx(self) -> "Symbol":
        return Symbol(self.grid, tuple((derivative(self.grid, f), m) for f, m in self.terms), self.order,
                      self.rho - 1)

    def dxi(self) -> "Symbol":
        terms = tuple((f, m.d()) for f, m in self.terms if m.const is None)
        return Symbol(self.grid, terms, self.order - 1, self.rho)

    def conj(self) -> "Symbol":
        return Symbol(self.grid, tuple((np.conj(f), m.conj()) for f, m in self.terms), self.order, self.rho)

    def scale(self, c: complex) -> "Symbol":
        return Symbol(self.grid, tuple((c * f, m) for f, m in self.terms), self.order, self.rho)

    def _check(self, other: "Symbol") -> None:
        if other.grid != self.grid:
            raise GridMismatch("symbols live on different grids")

    def __add__(self, other: "Symbol") -> "Symbol":
        self._check(other)
        return Symbol(self.grid, self.terms + other.terms, max(self.order, other.order), min(self.rho, other.rho))

    def __sub__(self, other: "Symbol") -> "Symbol":
        return self + other.scale(-1.0)

    def __mul__(self, other: "Symbol | complex") -> "Symbol":
        if not isinstance(other, Symbol):
            return self.scale(other)
        self._check(other)
        terms = tuple((f * g, m * k) for f, m in self.terms for g, k in other.terms)
        return Symbol(self.grid, terms, self.order + other.order, min(self.rho, other.rho))

    __rmul__ = __mul__

    def with_order(self, order: float, rho: Optional[float] = None) -> "Symbol":
        return Symbol(self.grid, self.terms, order, self.rho if rho is None else rho)


def _n_terms(rho: float, allowed: Sequence[float]) -> int:
    if rho not in allowed:
        raise UnsupportedRho(f"rho={rho!r} not in {tuple(allowed)}")
    return int(np.ceil(rho))


def symbol_compose(a: Symbol, b: Symbol, rho: float) -> Symbol:
    """``sum_{j < rho} (-i)^j / j! d_xi^j a d_x^j b``."""
    out = Symbol.zero(a.grid, a.order + b.order)
    da, db = a, b
    for j in range(_n_terms(rho, (1, 1.5, 2))):
        out = out + (da * db).scale((-1j) ** j / factorial(j))
        da, db = da.dxi(), db.dx()
    return out.with_order(a.order + b.order, min(a.rho, b.rho))


def symbol_adjoint(a: Symbol, rho: float) -> Symbol:
    """``sum_{j < rho} 1 / (i^j j!) d_xi^j d_x^j conj(a)``."""
    out = Symbol.zero(a.grid, a.order)
    d = a.conj()
    for j in range(_n_terms(rho, (1, 1.5))):
        out = out + d.scale(1.0 / (1j**j * factorial(j)))
        d = d.dxi().dx()
    return out.with_order(a.order, a.rho)


def holder_norm(grid: PeriodicGrid, f: np.ndarray, rho: float) -> float:
    """``W^{rho, inf}`` norm: derivative sup-norms for integer rho, Zygmund otherwise."""
    if rho == int(rho) and rho >= 0:
        total, g = 0.0, f
        for _ in range(int(rho) + 1):
            total += float(np.abs(g).max())
            g = derivative(grid, g)
        return total
    return zygmund_norm(grid, f, rho)


def seminorm(a: Symbol, m: float, rho: float, xi: Optional[np.ndarray] = None) -> float:
    """Sampled ``M^m_rho``: sup over ``k <= 3/2 + |rho|`` and ``|xi| >= 1/2``."""
    grid = a.grid
    if xi is None:
        xi = grid.xi[(np.abs(grid.xi) >= 0.5) & (grid.index != -grid.nyquist)]
    xi = np.asarray(xi, dtype=float)
    xi = xi[np.abs(xi) >= 0.5]
    best = 0.0
    d = a
    for k in range(int(np.floor(1.5 + abs(rho))) + 1):
        vals = d.sample(xi) * ((1 + np.abs(xi)) ** (k - m))[None, :]
        for j in range(xi.size):
            best = max(best, holder_norm(grid, vals[:, j], rho))
        d = d.dxi()
    return best


# ---------------------------------------------------------------- operators


def _check_field(grid: PeriodicGrid, *fields: np.ndarray) -> None:
    for f in fields:
        if np.shape(f) != (grid.n_points,):
            raise GridMismatch(f"field of shape {np.shape(f)} on grid of {grid.n_points} points")


def paradiff_matrix(a: Symbol, cutoffs: Cutoffs = DEFAULT_CUTOFFS) -> np.ndarray:
    """Fourier-space matrix ``K`` with ``fft(T_a u)/n = K @ (fft(u)/n)``."""
    grid = a.grid
    D, weight = _kernel_geometry(grid, cutoffs)
    K = np.zeros(D.shape, complex)
    for f, m in a.terms:
        fh = grid.fft(f)
        if m.const is not None:
            K += m.const * fh[D]
        else:
            mv = m(grid.xi).copy()
            mv[~np.isfinite(mv)] = 0  # poles sit where psi vanishes
            K += fh[D] * mv[None, :]
    K *= weight
    return K


def paradiff_apply(a: Symbol, u: np.ndarray, cutoffs: Cutoffs = DEFAULT_CUTOFFS) -> np.ndarray:
    grid = a.grid
    _check_field(grid, u)
    return grid.ifft(paradiff_matrix(a, cutoffs) @ grid.fft(u))


def paradiff_adjoint_apply(a: Symbol, u: np.ndarray, cutoffs: Cutoffs = DEFAULT_CUTOFFS) -> np.ndarray:
    """``(T_a)^* u`` for the L2 pairing."""
    grid = a.grid
    _check_field(grid, u)
    return grid.ifft(paradiff_matrix(a, cutoffs).conj().T @ grid.fft(u))


def _truncated(grid: PeriodicGrid, a: np.ndarray, u: np.ndarray, offset: int) -> np.ndarray:
    dec = DyadicDecomposition(grid)
    ah = grid.fft(a)
    absxi = np.abs(grid.xi)
    out = np.zeros(grid.n_points, complex)
    for k in range(1, dec.n_blocks):
        low = grid.ifft(ah * bump(absxi / 2.0 ** (k - offset)))
        out += low * dec.block(u, k)
    return out


def paraproduct(grid: PeriodicGrid, a: np.ndarray, u: np.ndarray,
                variant: Literal["standard", "truncated"] = "standard",
                cutoffs: Cutoffs = DEFAULT_CUTOFFS, offset: int = TRUNCATION_OFFSET) -> np.ndarray:
    """``T_a u`` for a function ``a(alpha)``.

    The truncated variant sums ``S_{k-N} a * P_k u`` over ``k >= 1`` with the
    homogeneous low-pass ``S_m = phi(|xi| / 2^m)``.
    """
    _check_field(grid, a, u)
    if variant == "truncated":
        return _truncated(grid, a, u, offset)
    if variant != "standard":
        raise ValueError(f"unknown variant {variant!r}")
    return paradiff_apply(Symbol.function(grid, a), u, cutoffs)


def balanced_pi(grid: PeriodicGrid, a: np.ndarray, u: np.ndarray, cutoffs: Cutoffs = DEFAULT_CUTOFFS) -> np.ndarray:
    """Balanced part of ``a u``: the circular convolution of the spectra weighted by
    ``1 - chi psi(theta, eta) - chi psi(eta, theta)``, where ``theta`` is the
    frequency taken from ``a`` and ``eta`` the one taken from ``u``.
    """
    _check_field(grid, a, u)
    D, weight = _kernel_geometry(grid, cutoffs)
    n = grid.n_points
    swapped = weight[np.arange(n)[:, None], D]  # weight[i, i - j]
    K = grid.fft(a)[D] * (1.0 - weight - swapped)
    return grid.ifft(K @ grid.fft(u))


# ---------------------------------------------------------------- order probes


def envelope(grid: PeriodicGrid) -> np.ndarray:
    """Smooth unit-L2 envelope with rapidly decaying spectrum."""
    e = np.exp(np.cos(grid.alpha) - 1.0)
    return e / grid.l2_norm(e)


def packet(grid: PeriodicGrid, k: int) -> np.ndarray:
    """Frequency ``-2^k`` packet ``exp(-i 2^k alpha) * envelope``, unit L2 norm."""
    return grid.mode(-(2**k)) * envelope(grid)


def usable_k(grid: PeriodicGrid, k_range: Iterable[int]) -> list[int]:
    """Packets whose frequency sits at most 0.6 of the way to Nyquist."""
    return [k for k in k_range if 2**k <= 0.6 * grid.nyquist]


def fit_slope(ks: Sequence[float], norms: Sequence[float], floor: float = NOISE_FLOOR) -> float:
    y = np.log2(np.maximum(np.asarray(norms, dtype=float), floor))
    return float(np.polyfit(np.asarray(ks, dtype=float), y, 1)[0])


def order_probe(op: Callable[[np.ndarray], np.ndarray], grid: PeriodicGrid, k_range: Iterable[int] = range(4, 9),
                floor: float = NOISE_FLOOR) -> float:
    """Least-squares slope of ``log2 ||op u_k||`` against ``k``.

    Norms under ``floor`` are clamped to it, so a pure round-off residual
    reads as slope 0 rather than noise.
    """
    ks = usable_k(grid, k_range)
    if len(ks) < 3:
        raise InsufficientRange(f"only {len(ks)} usable packet frequencies on n={grid.n_points}")
    norms = [grid.l2_norm(op(packet(grid, k))) for k in ks]
    return fit_slope(ks, norms, floor)


def difference_probe(op_a: Callable[[np.ndarray], np.ndarray], op_b: Callable[[np.ndarray], np.ndarray],
                     grid: PeriodicGrid, k_range: Iterable[int] = range(4, 9), rel_tol: float = 1e-10) -> float:
    """Slope of ``||(A - B) u_k||`` against ``k``.

    When ``||(A - B) u_k|| <= rel_tol * max(||A u_k||, ||B u_k||)`` for every
    ``k`` the two operators agree to round-off and ``-inf`` is returned: the
    round-off of high-order operators grows with their size and would
    otherwise be fitted as a positive order.
    """
    ks = usable_k(grid, k_range)
    if len(ks) < 3:
        raise InsufficientRange(f"only {len(ks)} usable packet frequencies on n={grid.n_points}")
    norms, rel = [], []
    for k in ks:
        u = packet(grid, k)
        a, b = op_a(u), op_b(u)
        d = grid.l2_norm(a - b)
        norms.append(d)
        rel.append(d / max(grid.l2_norm(a), grid.l2_norm(b), np.finfo(float).tiny))
    if max(rel) <= rel_tol:
        return -np.inf
    return fit_slope(ks, norms)


def operator_bound_constant(a: Symbol, grid: PeriodicGrid, s: float, samples: Iterable[np.ndarray]) -> float:
    """Largest observed ``||T_a u||_{H^{s-m}} / (M^m_0(a) ||u||_{H^s})``."""
    from .littlewood_paley import sobolev_norm

    M = seminorm(a, a.order, 0.0)
    best = 0.0
    for u in samples:
        best = max(best, sobolev_norm(grid, paradiff_apply(a, u), s - a.order) / (M * sobolev_norm(grid, u, s)))
    return best


def ell_symbol(grid: PeriodicGrid, params) -> Symbol:
    return Symbol.multiplier(grid, XiFn.ell(params), 1.5)


def reference_symbols(grid: PeriodicGrid) -> dict[str, Symbol]:
    """Probe symbols ``b(a)``, ``i xi b(a)`` and ``|xi|^{3/2} c(a)`` with smooth ``b`` and ``c``."""
    al = grid.alpha
    b = 0.5 * np.exp(np.sin(al))
    c = 1.0 / (2.0 + np.cos(al))
    return {
        "b": Symbol.function(grid, b),
        "ixi_b": Symbol.product(grid, b, XiFn.power(1, 1j), 1.0),
        "xi32_c": Symbol.product(grid, c, XiFn.abs_power(1.5), 1.5),
    }


def composition_slope(a: Symbol, b: Symbol, rho: float, k_range: Iterable[int] = range(4, 9),
                      cutoffs: Cutoffs = DEFAULT_CUTOFFS) -> float:
    """Fitted order of ``T_a T_b - T_{a#b}``."""
    grid = a.grid
    K1 = paradiff_matrix(a, cutoffs) @ paradiff_matrix(b, cutoffs)
    K2 = paradiff_matrix(symbol_compose(a, b, rho), cutoffs)
    return difference_probe(lambda u: grid.ifft(K1 @ grid.fft(u)), lambda u: grid.ifft(K2 @ grid.fft(u)), grid, k_range)


def adjoint_slope(a: Symbol, rho: float, k_range: Iterable[int] = range(4, 9),
                  cutoffs: Cutoffs = DEFAULT_CUTOFFS) -> float:
    """Fitted order of ``(T_a)^* - T_{a*}``."""
    grid = a.grid
    K1 = paradiff_matrix(a, cutoffs).conj().T
    K2 = paradiff_matrix(symbol_adjoint(a, rho), cutoffs)
    return difference_probe(lambda u: grid.ifft(K1 @ grid.fft(u)), lambda u: grid.ifft(K2 @ grid.fft(u)), grid, k_range)

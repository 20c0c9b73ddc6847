"""Fourier backbone on a uniform periodic grid.

Fields are plain complex ``numpy`` arrays of grid samples.  Fourier
coefficients use the normalisation ``c = fft(f) / n`` so that ``c[k]`` is the
amplitude of ``exp(i xi_k alpha)``.  A field is *holomorphic* when all
coefficients at strictly positive wavenumbers vanish.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Literal, Union

import numpy as np

from .errors import PoleAtZeroMean

Multiplier = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]
MeanRule = Literal["drop", "half", "keep"]

# coefficient magnitude below which a mean counts as zero for pole checks
MEAN_TOL = 1e-12


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid of ``n_points`` samples on ``[0, period)``."""

    n_points: int
    period: float = 2 * np.pi

    def __post_init__(self) -> None:
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 4 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 4, got {n!r}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period!r}")

    @cached_property
    def index(self) -> np.ndarray:
        """Signed integer mode numbers in FFT order (Nyquist is negative)."""
        return np.fft.fftfreq(self.n_points, 1.0 / self.n_points)

    @cached_property
    def xi(self) -> np.ndarray:
        return self.index * (2 * np.pi / self.period)

    @cached_property
    def alpha(self) -> np.ndarray:
        return np.arange(self.n_points) * (self.period / self.n_points)

    @property
    def dx(self) -> float:
        return self.period / self.n_points

    @property
    def nyquist(self) -> int:
        return self.n_points // 2

    def fft(self, f: np.ndarray) -> np.ndarray:
        return np.fft.fft(f, axis=0) / self.n_points

    def ifft(self, c: np.ndarray) -> np.ndarray:
        return np.fft.ifft(c, axis=0) * self.n_points

    def integrate(self, f: np.ndarray) -> complex:
        """Trapezoid rule, spectrally exact for band-limited periodic data."""
        return np.mean(f, axis=0) * self.period

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.period * np.sum(np.abs(self.fft(f)) ** 2)))

    def mode(self, k: int, amplitude: complex = 1.0) -> np.ndarray:
        """``amplitude * exp(i k (2 pi / period) alpha)`` sampled on the grid."""
        return amplitude * np.exp(1j * k * (2 * np.pi / self.period) * self.alpha)


def grid_for(f: np.ndarray, period: float = 2 * np.pi) -> PeriodicGrid:
    return PeriodicGrid(len(f), period)


def _index(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, 1.0 / n)


def project_holo(f: np.ndarray, mean: MeanRule = "drop") -> np.ndarray:
    """Keep nonpositive frequencies.

    ``mean="drop"`` zeroes the mean (the default convention for holomorphic
    fields), ``"half"`` gives the literal ``(I - iH)/2`` which halves it, and
    ``"keep"`` leaves it untouched.  The Nyquist mode is always removed.
    """
    n = len(f)
    k = _index(n)
    c = np.fft.fft(f)
    c[k > 0] = 0
    c[n // 2] = 0
    if mean == "drop":
        c[0] = 0
    elif mean == "half":
        c[0] *= 0.5
    return np.fft.ifft(c)


def project_antiholo(f: np.ndarray, mean: MeanRule = "drop") -> np.ndarray:
    return np.conj(project_holo(np.conj(f), mean))


def hilbert(f: np.ndarray) -> np.ndarray:
    """Multiplier ``-i sgn(xi)``; the Nyquist mode is zeroed."""
    n = len(f)
    c = np.fft.fft(f) * (-1j * np.sign(_index(n)))
    c[n // 2] = 0
    return np.fft.ifft(c)


def holo_defect(f: np.ndarray) -> float:
    """Positive-frequency L2 mass divided by total L2 mass (0 for f=0)."""
    c = np.fft.fft(f)
    total = np.sum(np.abs(c) ** 2)
    if total == 0:
        return 0.0
    return float(np.sum(np.abs(c[_index(len(f)) > 0]) ** 2) / total)


def apply_multiplier(grid: PeriodicGrid, f: np.ndarray, m: Multiplier) -> np.ndarray:
    """Coefficient-wise product with ``m(xi)``.

    A non-finite value of ``m`` at ``xi = 0`` is treated as a pole: the field
    must then have zero mean, and the zero mode of the result is set to 0.
    """
    if callable(m):
        with np.errstate(divide="ignore", invalid="ignore"):
            mv = np.asarray(m(grid.xi), dtype=complex)
    else:
        mv = np.asarray(m, dtype=complex)
    mv = np.broadcast_to(mv, grid.xi.shape).copy()
    c = grid.fft(f)
    if not np.isfinite(mv[0]):
        if abs(c[0]) > MEAN_TOL * max(1.0, np.abs(c).max()):
            raise PoleAtZeroMean(f"field mean {c[0]!r} is nonzero")
        mv[0] = 0
    out = c * mv
    out[grid.nyquist] = 0
    return grid.ifft(out)


def derivative(grid: PeriodicGrid, f: np.ndarray, order: int = 1) -> np.ndarray:
    return apply_multiplier(grid, f, (1j * grid.xi) ** order)


def antiderivative(grid: PeriodicGrid, f: np.ndarray) -> np.ndarray:
    """Zero-mean primitive of a zero-mean field."""
    return apply_multiplier(grid, f, lambda xi: 1.0 / (1j * xi))


def dispersion_weight(params, which: Literal["L", "M"] = "L") -> Callable[[np.ndarray], np.ndarray]:
    """``L(xi) = sqrt(sigma|xi|^3 + g|xi| + gamma^2/4)`` or ``M = L/|xi|``.

    ``params`` needs attributes ``g``, ``sigma`` and ``gamma``.
    """
    g, s, gam = float(params.g), float(params.sigma), float(params.gamma)

    def ell(xi: np.ndarray) -> np.ndarray:
        a = np.abs(xi)
        return np.sqrt(s * a**3 + g * a + 0.25 * gam**2)

    if which == "L":
        return ell
    if which == "M":
        return lambda xi: ell(xi) / np.abs(xi)
    raise ValueError(f"which must be 'L' or 'M', got {which!r}")


def dispersion_weight_dxi(params) -> Callable[[np.ndarray], np.ndarray]:
    """Closed-form ``d ell / d xi``."""
    g, s, gam = float(params.g), float(params.sigma), float(params.gamma)

    def dell(xi: np.ndarray) -> np.ndarray:
        a = np.abs(xi)
        return np.sign(xi) * (3 * s * a**2 + g) / (2 * np.sqrt(s * a**3 + g * a + 0.25 * gam**2))

    return dell


def dispersion_roots(params, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The two roots ``-gamma/2 -+ ell(xi)`` of ``tau^2 + gamma tau + g xi + sigma xi^3``."""
    ell = dispersion_weight(params)(np.asarray(xi, dtype=float))
    return -0.5 * params.gamma - ell, -0.5 * params.gamma + ell


def dealias_mask(n: int, fraction: float = 2 / 3) -> np.ndarray:
    if not 0 < fraction <= 1:
        raise ValueError(f"dealias fraction must lie in (0, 1], got {fraction!r}")
    k = _index(n)
    keep = np.abs(k) <= fraction * (n // 2)
    keep[n // 2] = False
    return keep


def dealias(f: np.ndarray, fraction: float = 2 / 3) -> np.ndarray:
    """Zero modes with ``|k| > fraction * n/2`` and the Nyquist mode."""
    c = np.fft.fft(f)
    c[~dealias_mask(len(f), fraction)] = 0
    return np.fft.ifft(c)

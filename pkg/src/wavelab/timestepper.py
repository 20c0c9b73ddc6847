"""Time integration of the (W, Q) system.

The linear part is propagated exactly mode by mode; the default scheme is the
integrating-factor (Lawson) RK4 applied to what is left of the right-hand
side.  Plain RK4 is kept as a cross-check.

Stability guard: ``dt <= C / max ell(xi)`` over retained modes with
``C = 2.8`` for ``rk4`` (the imaginary-axis limit of RK4) and ``C = 40`` for
``if_rk4``, where only the nonlinear remainder constrains the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Literal, Optional

import numpy as np

from .errors import DegenerateSurface, StepTooLarge
from .littlewood_paley import control_norms_fields, product_norm
from .spectral_core import PeriodicGrid, dealias_mask, dispersion_weight, holo_defect
from .waterwave_core import (
    DEFAULT_DEALIAS,
    PhysParams,
    WaveState,
    conserved,
    rhs_WQ_fields,
)

Scheme = Literal["if_rk4", "rk4"]
CFL_CONSTANT = {"rk4": 2.8, "if_rk4": 40.0}
DIAG_COLUMNS = ("t", "E", "P", "Hs", "Wr", "A", "B", "holo_defect")


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    scheme: Scheme = "if_rk4"
    reproject_each_step: bool = True
    dealias_rule: Optional[float] = DEFAULT_DEALIAS
    t_end: float = 1.0
    diagnostics_stride: int = 1
    checkpoint_stride: int = 0
    diag_s: float = 2.0
    diag_r: float = 1.0
    check_ceiling: bool = True

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in CFL_CONSTANT:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.diagnostics_stride < 1:
            raise ValueError("diagnostics_stride must be >= 1")


def dt_ceiling(grid: PeriodicGrid, params: PhysParams, scheme: Scheme = "if_rk4",
               fraction: Optional[float] = DEFAULT_DEALIAS) -> float:
    keep = dealias_mask(grid.n_points, fraction or 1.0)
    omega = float(dispersion_weight(params)(grid.xi[keep]).max() + abs(params.gamma))
    return CFL_CONSTANT[scheme] / omega


@dataclass(frozen=True, eq=False)
class LinearPropagator:
    """Per-mode entries of ``exp(dt A(xi))``, ``A = [[0, -i xi], [i(g + sigma xi^2), -i gamma]]``."""

    grid: PeriodicGrid
    params: PhysParams
    dt: float

    def __post_init__(self) -> None:
        xi = self.grid.xi
        g, s, gam, dt = self.params.g, self.params.sigma, self.params.gamma, self.dt
        ell = dispersion_weight(self.params)(xi)
        ph = np.exp(-0.5j * gam * dt)
        cs = np.cos(ell * dt)
        sn = dt * np.sinc(ell * dt / np.pi)  # sin(ell dt) / ell, finite at ell = 0
        m = np.stack([
            ph * (cs + sn * 0.5j * gam), ph * sn * (-1j * xi),
            ph * sn * 1j * (g + s * xi**2), ph * (cs - sn * 0.5j * gam),
        ])
        m[:, (self.grid.index > 0) | (self.grid.index == -self.grid.nyquist)] = 0
        object.__setattr__(self, "m", m)

    def apply(self, cw: np.ndarray, cq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m = self.m
        return m[0] * cw + m[1] * cq, m[2] * cw + m[3] * cq

    def generator(self) -> np.ndarray:
        """``A(xi)`` entries in the same layout."""
        xi, p = self.grid.xi, self.params
        z = np.zeros_like(xi, dtype=complex)
        return np.stack([z, -1j * xi, 1j * (p.g + p.sigma * xi**2), z - 1j * p.gamma])


def linear_step(state: WaveState, dt: float) -> WaveState:
    """Exact solution of the linearised system after ``dt``."""
    g = state.grid
    cw, cq = LinearPropagator(g, state.params, dt).apply(g.fft(state.W), g.fft(state.Q))
    return WaveState(g.ifft(cw), g.ifft(cq), state.params, g, state.t + dt)


class Integrator:
    """Coefficient-space stepper bound to one grid, parameter set and ``dt``."""

    def __init__(self, grid: PeriodicGrid, params: PhysParams, config: StepperConfig) -> None:
        self.grid, self.params, self.config = grid, params, config
        if config.check_ceiling:
            ceil = dt_ceiling(grid, params, config.scheme, config.dealias_rule)
            if config.dt > ceil:
                raise StepTooLarge(f"dt={config.dt} exceeds ceiling {ceil:.3g} for {config.scheme}")
        self.half = LinearPropagator(grid, params, config.dt / 2)
        self.full = LinearPropagator(grid, params, config.dt)
        self.A = LinearPropagator(grid, params, 0.0).generator()
        keep = dealias_mask(grid.n_points, config.dealias_rule or 1.0)
        self.mask_w = keep & (grid.index <= 0)
        self.mask_q = self.mask_w & (grid.index != 0)
        self.last_leak = 0.0

    def rhs(self, cw: np.ndarray, cq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g = self.grid
        wt, qt = rhs_WQ_fields(g, self.params, g.ifft(cw), g.ifft(cq), self.config.dealias_rule)
        return g.fft(wt), g.fft(qt)

    def nonlinear(self, cw: np.ndarray, cq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        fw, fq = self.rhs(cw, cq)
        A = self.A
        return fw - (A[0] * cw + A[1] * cq), fq - (A[2] * cw + A[3] * cq)

    def step(self, cw: np.ndarray, cq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dt = self.config.dt
        if self.config.scheme == "rk4":
            k1 = self.rhs(cw, cq)
            k2 = self.rhs(cw + 0.5 * dt * k1[0], cq + 0.5 * dt * k1[1])
            k3 = self.rhs(cw + 0.5 * dt * k2[0], cq + 0.5 * dt * k2[1])
            k4 = self.rhs(cw + dt * k3[0], cq + dt * k3[1])
            nw = cw + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            nq = cq + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        else:
            E, E2 = self.half.apply, self.full.apply
            k1 = self.nonlinear(cw, cq)
            u2 = E(cw + 0.5 * dt * k1[0], cq + 0.5 * dt * k1[1])
            k2 = self.nonlinear(*u2)
            eu = E(cw, cq)
            k3 = self.nonlinear(eu[0] + 0.5 * dt * k2[0], eu[1] + 0.5 * dt * k2[1])
            e3 = E(*k3)
            e2u = E2(cw, cq)
            k4 = self.nonlinear(e2u[0] + dt * e3[0], e2u[1] + dt * e3[1])
            a = E2(*k1)
            b = E(k2[0] + k3[0], k2[1] + k3[1])
            nw = e2u[0] + dt / 6 * (a[0] + 2 * b[0] + k4[0])
            nq = e2u[1] + dt / 6 * (a[1] + 2 * b[1] + k4[1])
        if self.config.reproject_each_step:
            self.last_leak = max(_leak(nw, self.grid), _leak(nq, self.grid))
            nw, nq = nw * self.mask_w, nq * self.mask_q
        return nw, nq


def _leak(c: np.ndarray, grid: PeriodicGrid) -> float:
    total = float(np.sum(np.abs(c) ** 2))
    return 0.0 if total == 0 else float(np.sum(np.abs(c[grid.index > 0]) ** 2) / total)


def canonical_state(state: WaveState, config: StepperConfig) -> WaveState:
    """Reprojected copy whose samples are exactly ``ifft`` of stored coefficients."""
    g = state.grid
    keep = dealias_mask(g.n_points, config.dealias_rule or 1.0) & (g.index <= 0)
    cw = g.fft(state.W) * keep
    cq = g.fft(state.Q) * (keep & (g.index != 0))
    return state_from_coeffs(g, state.params, cw, cq, state.t)


def state_from_coeffs(grid: PeriodicGrid, params: PhysParams, cw: np.ndarray, cq: np.ndarray, t: float) -> WaveState:
    return WaveState(grid.ifft(cw), grid.ifft(cq), params, grid, t, coeffs=(cw, cq))


def state_coeffs(state: WaveState) -> tuple[np.ndarray, np.ndarray]:
    if state.coeffs is not None:
        return state.coeffs
    return state.grid.fft(state.W), state.grid.fft(state.Q)


def step(state: WaveState, config: StepperConfig, integrator: Optional[Integrator] = None) -> WaveState:
    """Advance ``state`` by ``config.dt``."""
    it = integrator or Integrator(state.grid, state.params, config)
    cw, cq = it.step(*state_coeffs(state))
    return state_from_coeffs(state.grid, state.params, cw, cq, state.t + config.dt)


@dataclass
class DiagnosticsRecord:
    t: float
    E: float
    P: float
    Hs: float
    Wr: float
    A: float
    B: float
    holo_defect: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in DIAG_COLUMNS}


def diagnostics(state: WaveState, config: StepperConfig, leak: Optional[float] = None) -> DiagnosticsRecord:
    E, P = conserved(state)
    d = state.to_diff(config.dealias_rule)
    g = state.grid
    A, B = control_norms_fields(g, d.Wb, d.R, state.params.gamma)
    defect = state.holo_defect() if leak is None else max(leak, state.holo_defect())
    return DiagnosticsRecord(
        t=state.t, E=E, P=P,
        Hs=product_norm(g, (d.Wb, d.R), config.diag_s, "H"),
        Wr=product_norm(g, (d.Wb, d.R), config.diag_r, "W"),
        A=A, B=B, holo_defect=defect,
    )


@dataclass
class RunResult:
    final: WaveState
    records: list[DiagnosticsRecord] = field(default_factory=list)
    snapshots: list[WaveState] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run(initial: WaveState, config: StepperConfig,
        on_checkpoint: Optional[Callable[[WaveState], None]] = None,
        keep_snapshots: bool = False, diagnostics_on: bool = True) -> RunResult:
    """Integrate to ``config.t_end``; stops cleanly on a degenerate surface.

    The number of steps is ``round((t_end - t0) / dt)``; ``t_end == t0`` returns
    the initial state untouched.
    """
    nsteps = int(round((config.t_end - initial.t) / config.dt))
    result = RunResult(final=initial)
    if nsteps <= 0:
        if diagnostics_on:
            result.records.append(diagnostics(initial, config))
        return result
    it = Integrator(initial.grid, initial.params, config)
    state = initial
    if diagnostics_on:
        result.records.append(diagnostics(state, config))
    if keep_snapshots:
        result.snapshots.append(state)
    leak = 0.0
    for k in range(1, nsteps + 1):
        try:
            state = step(state, config, it)
        except DegenerateSurface as exc:
            result.error = f"degenerate surface at t={state.t:.6g}: {exc}"
            if on_checkpoint is not None:
                on_checkpoint(state)
            break
        leak = max(leak, it.last_leak)
        if k % config.diagnostics_stride == 0 or k == nsteps:
            if diagnostics_on:
                result.records.append(diagnostics(state, config, leak))
            if keep_snapshots:
                result.snapshots.append(state)
            leak = 0.0
        if on_checkpoint is not None and config.checkpoint_stride and k % config.checkpoint_stride == 0:
            on_checkpoint(state)
    result.final = state
    return result


def iterate(initial: WaveState, config: StepperConfig, nsteps: int) -> Iterator[WaveState]:
    """Yield the state after each of ``nsteps`` steps."""
    it = Integrator(initial.grid, initial.params, config)
    state = initial
    for _ in range(nsteps):
        state = step(state, config, it)
        yield state


# ---------------------------------------------------------------- frequency measurement


def prony_two(samples: np.ndarray, dt: float) -> np.ndarray:
    """Frequencies ``tau`` of a two-exponential fit ``sum_j A_j exp(i tau_j t)``.

    Linear prediction ``x[n+2] = c1 x[n+1] + c0 x[n]`` solved in least
    squares; valid when ``|tau| dt < pi``.
    """
    x = np.asarray(samples, dtype=complex)
    M = np.column_stack([x[1:-1], x[:-2]])
    c, *_ = np.linalg.lstsq(M, x[2:], rcond=None)
    z = np.roots([1.0, -c[0], -c[1]])
    return np.sort(np.angle(z) / dt)


def measure_frequencies(grid: PeriodicGrid, params: PhysParams, k: int, eps: float = 1e-6,
                        scheme: Scheme = "if_rk4", periods: float = 3.0, samples_per_period: int = 40) -> np.ndarray:
    """Run single-mode data ``W = eps e^{-i k alpha}``, ``Q = 0`` and fit both frequencies.

    Returns the sorted pair of measured ``tau`` (time dependence ``e^{i tau t}``).
    """
    xi = -k * 2 * np.pi / grid.period
    ell = float(dispersion_weight(params)(np.array([xi]))[0])
    tau_max = ell + abs(params.gamma) / 2
    sample_dt = 2 * np.pi / tau_max / samples_per_period
    ceil = dt_ceiling(grid, params, scheme)
    sub = max(1, math.ceil(sample_dt / (0.5 * ceil)))
    dt = sample_dt / sub
    nsamp = int(periods * samples_per_period) + 3
    cfg = StepperConfig(dt=dt, scheme=scheme, t_end=np.inf)
    st = WaveState(eps * grid.mode(-k), np.zeros(grid.n_points, complex), params, grid)
    it = Integrator(grid, params, cfg)
    idx = (-k) % grid.n_points
    cw, cq = state_coeffs(st)
    out = [cw[idx]]
    for _ in range(nsamp - 1):
        for _ in range(sub):
            cw, cq = it.step(cw, cq)
        out.append(cw[idx])
    return prony_two(np.array(out), sample_dt)


def replace_dt(config: StepperConfig, dt: float) -> StepperConfig:
    return replace(config, dt=dt)

"""Symmetrisation machinery for the differentiated system.

Builds the transport/dispersion symbols, the symmetrisers ``c, q, p``, the
scalar unknown ``Phi``, the elliptic weight and the flattening change of
variable, plus numerical probes that measure the order of the remainders the
reduction is supposed to produce.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Optional

import numpy as np

from .errors import DegenerateSurface, NewtonNoConvergence
from .littlewood_paley import sobolev_norm
from .paracalc import (
    DEFAULT_CUTOFFS,
    Cutoffs,
    Symbol,
    XiFn,
    difference_probe,
    fit_slope,
    order_probe,
    packet,
    paradiff_apply,
    paradiff_matrix,
    usable_k,
)
from .errors import InsufficientRange
from .spectral_core import PeriodicGrid, antiderivative, apply_multiplier, derivative, dispersion_weight
from .waterwave_core import (
    DEGENERACY_THRESHOLD,
    DiffState,
    compute_aux,
    rhs_WR,
)


def _guard(state: DiffState) -> None:
    m = float(np.abs(1 + state.Wb).min())
    if m < DEGENERACY_THRESHOLD:
        raise DegenerateSurface(f"inf|1 + Wb| = {m:.3g}")


def wahlen(state: DiffState) -> tuple[np.ndarray, np.ndarray]:
    """``(eta, zeta) = (Wb, R - i gamma W / 2)``."""
    return state.Wb.copy(), state.R - 0.5j * state.params.gamma * state.W


def wahlen_inverse(eta: np.ndarray, zeta: np.ndarray, like: DiffState) -> DiffState:
    """Recover ``(Wb, R)``; ``W`` is rebuilt from ``eta`` and ``like.w_mean``."""
    probe = DiffState(eta, np.zeros_like(eta), like.params, like.grid, like.t, like.w_mean)
    R = zeta + 0.5j * like.params.gamma * probe.W
    return DiffState(eta, R, like.params, like.grid, like.t, like.w_mean)


# ---------------------------------------------------------------- symbols


@dataclass(frozen=True, eq=False)
class _Geometry:
    """Pointwise coefficient functions shared by all symbols of one state."""

    grid: PeriodicGrid
    Wb: np.ndarray
    Y: np.ndarray
    J: np.ndarray
    Lam: np.ndarray  # (1 - conj Y)(1 + Wb)

    @staticmethod
    def of(state: DiffState) -> "_Geometry":
        _guard(state)
        Wb = state.Wb
        Y = Wb / (1 + Wb)
        J = np.abs(1 + Wb) ** 2
        return _Geometry(state.grid, Wb, Y, J, (1 - np.conj(Y)) * (1 + Wb))

    def d(self, f: np.ndarray) -> np.ndarray:
        return derivative(self.grid, f)


def symbols_lambda_k(state: DiffState) -> tuple[Symbol, Symbol]:
    geo = _Geometry.of(state)
    g = state.grid
    s, grav, gam = state.params.sigma, state.params.g, state.params.gamma
    lam = Symbol.product(g, geo.Lam, XiFn.power(1, 1j), 1.0) + Symbol.function(g, geo.d(geo.Lam))
    jm = geo.J ** -0.5
    one_y = 1 - geo.Y
    k = (Symbol.product(g, -1j * s * jm * one_y**2, XiFn.power(2), 2.0)
         + Symbol.product(g, 3 * s * jm * one_y**3 * geo.d(geo.Wb), XiFn.power(1), 1.0)
         + Symbol.function(g, np.full(g.n_points, -1j * grav, complex)))
    if gam != 0:
        k = k + Symbol.product(g, np.full(g.n_points, 0.25j * gam**2, complex), XiFn.power(-1), -1.0)
    return lam.with_order(1.0), k.with_order(2.0)


@dataclass(frozen=True, eq=False)
class SymmetrizerSet:
    ell: Symbol
    c: Symbol
    q: Symbol
    p_half: Symbol
    p_minus_half: Symbol
    c_values: np.ndarray
    q_values: np.ndarray

    @property
    def p(self) -> Symbol:
        return (self.p_half + self.p_minus_half).with_order(0.5)


def build_symmetrizers(state: DiffState) -> SymmetrizerSet:
    geo = _Geometry.of(state)
    g, params = state.grid, state.params
    ellf = XiFn.ell(params)
    dell = ellf.d()
    inv_xi = XiFn.power(-1)
    c = geo.J ** -0.75
    q = geo.J**0.25
    A = -(1 - geo.Y) * (1 + np.conj(geo.Wb)) * geo.J ** -0.5
    B = (1 + np.conj(geo.Wb)) * (1 - geo.Y)
    p_half = Symbol.product(g, A, ellf * inv_xi, 0.5)
    lam_a = geo.d(geo.Lam)
    bracket = (Symbol.product(g, 0.5j * geo.d(c) * q, dell, 0.5)
               + Symbol.product(g, 1j * c * geo.d(q), dell, 0.5)
               + (p_half.dxi() * Symbol.product(g, 1j * lam_a, XiFn.power(1), 1.0))
               + p_half * Symbol.function(g, 1j * lam_a))
    p_mh = (Symbol.product(g, B, inv_xi, -1.0) * bracket).with_order(-0.5)
    return SymmetrizerSet(
        ell=Symbol.multiplier(g, ellf, 1.5), c=Symbol.function(g, c), q=Symbol.function(g, q),
        p_half=p_half, p_minus_half=p_mh, c_values=c, q_values=q,
    )


# ---------------------------------------------------------------- equivalences


def _sqrt_L(grid: PeriodicGrid, params) -> np.ndarray:
    return np.sqrt(dispersion_weight(params)(grid.xi))


def equivalence_operators(state: DiffState, which: Literal["first", "second"],
                          cutoffs: Cutoffs = DEFAULT_CUTOFFS):
    """The two sides of one equivalence relation as callables.

    first:  ``i T_p T_lambda`` and ``L^1/2 T_c L^1/2 T_q``
    second: ``i T_q T_k`` and ``L^1/2 T_c L^1/2 T_p``
    """
    grid, params = state.grid, state.params
    sym = build_symmetrizers(state)
    lam, k = symbols_lambda_k(state)
    sl = _sqrt_L(grid, params)
    Kc = paradiff_matrix(sym.c, cutoffs)
    if which == "first":
        K1, K2, K3 = paradiff_matrix(sym.p, cutoffs), paradiff_matrix(lam, cutoffs), paradiff_matrix(sym.q, cutoffs)
    elif which == "second":
        K1, K2, K3 = paradiff_matrix(sym.q, cutoffs), paradiff_matrix(k, cutoffs), paradiff_matrix(sym.p, cutoffs)
    else:
        raise ValueError(f"which must be 'first' or 'second', got {which!r}")

    def left(u: np.ndarray) -> np.ndarray:
        return grid.ifft(1j * (K1 @ (K2 @ grid.fft(u))))

    def right(u: np.ndarray) -> np.ndarray:
        return grid.ifft(sl * (Kc @ (sl * (K3 @ grid.fft(u)))))

    return left, right


def equivalence_residual(state: DiffState, which: Literal["first", "second"],
                         k_range: Iterable[int] = range(4, 9), cutoffs: Cutoffs = DEFAULT_CUTOFFS) -> float:
    """Fitted order of the residual of one equivalence relation on ``-2^k`` packets."""
    left, right = equivalence_operators(state, which, cutoffs)
    return difference_probe(left, right, state.grid, k_range)


# ---------------------------------------------------------------- Phi, weight


def build_phi(state: DiffState, sym: Optional[SymmetrizerSet] = None,
              cutoffs: Cutoffs = DEFAULT_CUTOFFS) -> np.ndarray:
    """``Re T_q (R - i gamma W / 2) + i Im T_p Wb``."""
    sym = sym or build_symmetrizers(state)
    eta, zeta = wahlen(state)
    V = paradiff_apply(sym.q, zeta, cutoffs)
    U = paradiff_apply(sym.p, eta, cutoffs)
    return V.real + 1j * U.imag


def elliptic_weight(sym: SymmetrizerSet, s: float) -> Symbol:
    """``(c ell)^{2s/3}`` as the separable product ``c^{2s/3} ell^{2s/3}``."""
    r = 2 * s / 3
    ellf = sym.ell.terms[0][1]

    def dpow() -> XiFn:
        return XiFn(lambda xi: r * ellf(xi) ** (r - 1)) * ellf.d()

    powf = XiFn(lambda xi: ellf(xi) ** r, dpow)
    return Symbol.product(sym.c.grid, sym.c_values**r, powf, s)


def weight_commutator_defect(sym: SymmetrizerSet, s: float, xi: np.ndarray) -> float:
    """Relative sup of ``d_xi w d_a(c ell) - d_a w d_xi(c ell)`` for ``w = (c ell)^{2s/3}``."""
    w = elliptic_weight(sym, s)
    cl = sym.c * sym.ell
    lhs = w.dxi().sample(xi) * cl.dx().sample(xi)
    rhs = w.dx().sample(xi) * cl.dxi().sample(xi)
    scale = max(float(np.abs(lhs).max()), float(np.abs(rhs).max()), np.finfo(float).tiny)
    return float(np.abs(lhs - rhs).max()) / scale


# ---------------------------------------------------------------- flattening


def _trig_eval(grid: PeriodicGrid, f: np.ndarray, x: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Trigonometric interpolant of ``f`` (or its derivative) at points ``x``."""
    if deriv == 0 and np.array_equal(x, grid.alpha):
        return np.asarray(f, dtype=complex)
    c = grid.fft(f)
    c[grid.nyquist] = 0
    mult = (1j * grid.xi) ** deriv
    return np.exp(1j * np.outer(x, grid.xi)) @ (c * mult)


@dataclass(frozen=True, eq=False)
class Flattening:
    """``chi(a) = int_0^a J^1/2``, its inverse ``kappa`` and the new transport speed.

    ``kappa`` and ``b_tilde`` are sampled on the uniform grid ``y_j`` of the
    image cell ``[0, m L)`` with ``m`` the mean of ``J^1/2``.
    """

    grid: PeriodicGrid
    slope: float  # mean of J^{1/2}
    chi: np.ndarray
    y: np.ndarray
    kappa: np.ndarray
    dkappa: np.ndarray
    sqrtJ_at_kappa: np.ndarray
    b_tilde: np.ndarray
    dt_chi: np.ndarray
    chi_periodic: np.ndarray

    def chi_at(self, x: np.ndarray) -> np.ndarray:
        return self.slope * x + _trig_eval(self.grid, self.chi_periodic, x).real

    def kappa_at(self, y: np.ndarray) -> np.ndarray:
        """Spectral interpolant of ``kappa`` at image points ``y``."""
        img = PeriodicGrid(self.grid.n_points, self.slope * self.grid.period)
        per = self.kappa - self.y / self.slope
        return y / self.slope + _trig_eval(img, per, y).real


def _primitive_with_trend(grid: PeriodicGrid, f: np.ndarray) -> tuple[float, np.ndarray]:
    """``int_0^a f = m a + p(a)`` with ``p`` periodic and ``p(0) = 0``."""
    m = float(np.mean(f).real)
    p = antiderivative(grid, f - np.mean(f)).real
    return m, p - p[0]


def flatten(state: DiffState, w_t: Optional[np.ndarray] = None, tol: float = 1e-14, maxiter: int = 50) -> Flattening:
    """Flattening change of variable.

    ``w_t`` is the time derivative of ``Wb``; by default it is taken from the
    differentiated system.
    """
    _guard(state)
    grid = state.grid
    Wb = state.Wb
    sJ = np.abs(1 + Wb)
    m, per = _primitive_with_trend(grid, sJ)
    chi = m * grid.alpha + per
    img = PeriodicGrid(grid.n_points, m * grid.period)
    y = img.alpha

    kap = y / m
    for _ in range(maxiter):
        resid = m * kap + _trig_eval(grid, per, kap).real - y
        deriv = _trig_eval(grid, sJ, kap).real
        step = resid / deriv
        kap = kap - step
        if np.abs(step).max() <= tol * max(1.0, grid.period):
            break
    else:
        raise NewtonNoConvergence(f"Newton inversion stalled at |step|={np.abs(step).max():.3g}")

    sJk = _trig_eval(grid, sJ, kap).real
    kper = kap - y / m
    dkap = 1.0 / m + derivative(img, kper).real

    if w_t is None:
        w_t = rhs_WR(state)[0]
    integrand = (np.conj(1 + Wb) * w_t).real / sJ
    mt, pt = _primitive_with_trend(grid, integrand)
    dt_chi = mt * grid.alpha + pt
    b_u = compute_aux(state).b_u.real
    b_tilde = _trig_eval(grid, b_u, kap).real * sJk + (mt * kap + _trig_eval(grid, pt, kap).real)
    return Flattening(grid, m, chi, y, kap, dkap, sJk, b_tilde, dt_chi, per)


# ---------------------------------------------------------------- paralinearisation


def _para_terms(state: DiffState, cutoffs: Cutoffs) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """Principal paradifferential parts and the source terms ``(G, K)``."""
    g, p = state.grid, state.params
    Wb, R = state.Wb, state.R
    geo = _Geometry.of(state)
    aux = compute_aux(state)
    d = lambda f: derivative(g, f)  # noqa: E731
    T = lambda a, u: paradiff_apply(Symbol.function(g, a), u, cutoffs)  # noqa: E731
    jm = geo.J ** -0.5
    one_y = 1 - geo.Y
    Wt, Rt = rhs_WR(state)
    bu = aux.b_u.real
    prin_W = T(bu, d(Wb)) + d(T(geo.Lam, R))
    prin_R = (T(bu, d(R)) + 1j * p.sigma * T(jm * one_y**2, d(d(Wb)))
              - 3j * p.sigma * T(jm * one_y**3 * d(Wb), d(Wb)))
    G = Wt + prin_W
    K = Rt + prin_R + 1j * p.gamma * R - 1j * p.g * Wb
    return (prin_W, prin_R), (G, K)


def paralinearization_slopes(state: DiffState, k_range: Iterable[int] = range(4, 9), delta: float = 1e-7,
                             s: float = 1.0, cutoffs: Cutoffs = DEFAULT_CUTOFFS) -> tuple[float, float]:
    """Growth slopes of the principal part and of the source term under packet perturbations.

    The packet response is the symmetric difference quotient at ``+-delta``,
    which removes the packet-packet quadratic interactions.  Both responses
    are measured in ``H^{s+1/2} x H^s``.
    """
    grid = state.grid
    ks = usable_k(grid, k_range)
    if len(ks) < 3:
        raise InsufficientRange(f"only {len(ks)} usable packet frequencies")
    prin, src = [], []
    for k in ks:
        pk = packet(grid, k)
        out = []
        for sgn in (1, -1):
            st = DiffState(state.Wb + sgn * delta * pk, state.R + sgn * delta * pk, state.params, grid,
                           state.t, state.w_mean)
            out.append(_para_terms(st, cutoffs))
        dP = [(a - b) / (2 * delta) for a, b in zip(out[0][0], out[1][0])]
        dS = [(a - b) / (2 * delta) for a, b in zip(out[0][1], out[1][1])]
        prin.append(sobolev_norm(grid, dP[0], s + 0.5) + sobolev_norm(grid, dP[1], s))
        src.append(sobolev_norm(grid, dS[0], s + 0.5) + sobolev_norm(grid, dS[1], s))
    return fit_slope(ks, prin), fit_slope(ks, src)


def symbol_order(sym: Symbol, k_range: Iterable[int] = range(4, 9), cutoffs: Cutoffs = DEFAULT_CUTOFFS) -> float:
    K = paradiff_matrix(sym, cutoffs)
    grid = sym.grid
    return order_probe(lambda u: grid.ifft(K @ grid.fft(u)), grid, k_range)


def multiplier_order(grid: PeriodicGrid, m, k_range: Iterable[int] = range(4, 9)) -> float:
    return order_probe(lambda u: apply_multiplier(grid, u, m), grid, k_range)


# ---------------------------------------------------------------- linear symmetrised modes


def phi_mode_frequencies(grid: PeriodicGrid, params, k: int, eps: float = 1e-6, periods: float = 3.0,
                         samples: int = 60) -> tuple[float, float]:
    """Rotation rates of the ``-k`` and ``+k`` Fourier modes of ``Phi`` under the linear flow.

    Returns ``(tau_minus, tau_plus)`` with ``coeff(t) ~ exp(i tau t)``; the
    symmetrised equation predicts ``ell(k) - gamma/2`` and ``ell(k) + gamma/2``.
    Symbols are frozen at the flat surface.
    """
    from .timestepper import LinearPropagator
    from .waterwave_core import WaveState

    flat = DiffState(np.zeros(grid.n_points, complex), np.zeros(grid.n_points, complex), params, grid)
    sym = build_symmetrizers(flat)
    ell_k = float(dispersion_weight(params)(np.array([float(k)]))[0])
    period = 2 * np.pi / (ell_k + abs(params.gamma) / 2)
    ts = np.linspace(0.0, periods * period, samples)
    w0 = grid.fft(grid.mode(-k, eps))
    q0 = np.zeros_like(w0)
    im, ip = (-k) % grid.n_points, k % grid.n_points
    cm, cp = [], []
    for t in ts:
        cw, cq = LinearPropagator(grid, params, float(t)).apply(w0, q0)
        W, Q = grid.ifft(cw), grid.ifft(cq)
        st = DiffState(derivative(grid, W), derivative(grid, Q), params, grid, float(t), complex(cw[0]))
        ph = grid.fft(build_phi(st, sym))
        cm.append(ph[im])
        cp.append(ph[ip])

    def rate(c: list) -> float:
        c = np.asarray(c)
        phase = np.unwrap(np.angle(c / c[0]))
        return float(np.polyfit(ts, phase, 1)[0])

    return rate(cm), rate(cp)


# ---------------------------------------------------------------- energy estimate sanity


def energy_growth_ratio(state: DiffState, s: float = 2.0) -> float:
    """``|d/dt ||(Wb, R)||_{H^s}| / ((1 + B) ||(Wb, R)||_{H^s})`` along the differentiated flow."""
    from .littlewood_paley import control_norms

    grid = state.grid
    Wt, Rt = rhs_WR(state)

    def dnorm(f: np.ndarray, ft: np.ndarray, r: float) -> tuple[float, float]:
        c, ct = grid.fft(f), grid.fft(ft)
        w = grid.period * (1 + grid.xi**2) ** r
        nrm = float(np.sqrt(np.sum(w * np.abs(c) ** 2)))
        return nrm, float(np.sum(w * (np.conj(c) * ct).real)) / nrm

    n1, d1 = dnorm(state.Wb, Wt, s + 0.5)
    n2, d2 = dnorm(state.R, Rt, s)
    B = control_norms(state)[1]
    return abs(d1 + d2) / ((1 + B) * (n1 + n2))


def energy_constant(initial, config, s: float = 2.0, stride: int = 25) -> float:
    """Largest ``energy_growth_ratio`` over snapshots of one run."""
    from dataclasses import replace

    from .timestepper import run

    res = run(initial, replace(config, diagnostics_stride=stride), keep_snapshots=True, diagnostics_on=False)
    if not res.ok:
        raise DegenerateSurface(res.error or "run failed")
    return max(energy_growth_ratio(st.to_diff(), s) for st in res.snapshots)


# ---------------------------------------------------------------- truncated data


def truncate_data(state, N: int):
    """``P_{<2^N}`` applied to both fields of a ``WaveState``."""
    g = state.grid
    keep = np.abs(g.xi) < 2.0**N
    return state.with_fields(g.ifft(g.fft(state.W) * keep), g.ifft(g.fft(state.Q) * keep))


def truncation_differences(initial, config, Ns: Iterable[int] = range(4, 8), s: float = 1.5) -> list[float]:
    """Successive ``H^s``-product differences of ``(Wb, R)`` between runs from ``P_{<2^N}`` data."""
    from .littlewood_paley import product_norm
    from .timestepper import run

    finals = []
    for N in Ns:
        res = run(truncate_data(initial, N), config, diagnostics_on=False)
        if not res.ok:
            raise DegenerateSurface(res.error or f"run from P_<2^{N} data failed")
        finals.append(res.final.to_diff())
    g = initial.grid
    return [product_norm(g, (b.Wb - a.Wb, b.R - a.R), s) for a, b in zip(finals, finals[1:])]

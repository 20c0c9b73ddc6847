"""Acceptance criteria 1-11, one PASS/FAIL line each (sub-checks get a letter).

The lines are collected in ``RESULTS`` and printed in the pytest terminal
summary; running this file directly prints them as well.
"""

import math
import time

import numpy as np
import pytest

from wavelab import paracalc as pc
from wavelab import reduction_symbols as rs
from wavelab.cli_io import chain_rule_defect
from wavelab.littlewood_paley import zygmund_norm
from wavelab.spectral_core import PeriodicGrid, dispersion_roots, holo_defect
from wavelab.timestepper import StepperConfig, dt_ceiling, measure_frequencies, run
from wavelab.waterwave_core import (
    DiffState,
    PhysParams,
    WaveState,
    compute_aux,
    conserved,
    random_smooth,
    rhs_WQ,
    rhs_WR,
    ubalpha_residual,
)

RESULTS: list[str] = []
KS = range(4, 9)


def report(label: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def wavy():
    grid = PeriodicGrid(1024)
    a = grid.alpha
    R = 0.3 * np.exp(-1j * a) + 0.1 * np.exp(-3j * a)
    Wb = np.exp(-1j * a) + 0.5j * np.exp(-2j * a) + 0.3 * np.exp(-3j * a)
    Wb *= 0.2 / zygmund_norm(grid, Wb, 1 + 1 / 16)
    return DiffState(Wb, R, PhysParams(1.0, 1.0, 1.0), grid)


def test_1_fixed_point():
    t0 = time.perf_counter()
    grid = PeriodicGrid(256)
    z = np.zeros(256, complex)
    worst = 0.0
    for p in (PhysParams(1, 1, 0), PhysParams(1, 1, 2), PhysParams(0, 0.1, -1)):
        zs = WaveState(z, z, p, grid)
        outs = (*rhs_WQ(zs), *rhs_WR(zs.to_diff()))
        worst = max(worst, max(float(np.abs(o).max()) for o in outs))
    dt = time.perf_counter() - t0
    report("1", worst <= 1e-14 and dt < 1.0, f"max |rhs(0)| = {worst:.1e}, {dt:.2f}s")


def test_2_dispersion():
    grid = PeriodicGrid(256)
    worst = 0.0
    for g, s, gam in ((1, 1, 0), (1, 1, 2), (0, 1, 1), (1, 0.1, 0.5)):
        p = PhysParams(g, s, gam)
        for k in range(1, 9):
            meas = np.sort(measure_frequencies(grid, p, k, eps=1e-6))
            pred = np.sort(np.array(dispersion_roots(p, np.array([-float(k)]))).ravel())
            worst = max(worst, float(np.max(np.abs(meas - pred) / np.abs(pred))))
    report("2", worst <= 1e-3, f"worst relative frequency error {worst:.2e} (bound 1e-3)")


@pytest.fixture(scope="module")
def conservation():
    grid = PeriodicGrid(256)
    init = random_smooth(grid, PhysParams(1.0, 1.0, 1.0), seed=0, decay_rate=0.5, eps=1e-2, kmax=20)
    E0, P0 = conserved(init)

    def drift(dt):
        res = run(init, StepperConfig(dt=dt, t_end=1.0))
        assert res.ok
        return (max(abs(r.E - E0) / abs(E0) for r in res.records),
                max(abs(r.P - P0) / abs(P0) for r in res.records))

    ladder = [0.016, 0.008, 0.004, 0.002]
    return drift(5e-4), ladder, [drift(dt) for dt in ladder]


def _slope(xs, ys):
    return float(np.polyfit(np.log2(xs), np.log2(ys), 1)[0])


def test_3a_conservation_drift(conservation):
    (dE, dP), _, _ = conservation
    report("3a", max(dE, dP) <= 1e-6, f"drift E {dE:.1e}, P {dP:.1e} at dt=5e-4 (bound 1e-6)")


def test_3b_energy_drift_order(conservation):
    _, ladder, rows = conservation
    s = _slope(ladder, [r[0] for r in rows])
    report("3b", abs(s - 4) <= 0.3, f"energy drift slope {s:.2f} (4 +- 0.3)")


def test_3c_momentum_drift_order(conservation):
    _, ladder, rows = conservation
    s = _slope(ladder, [r[1] for r in rows])
    report("3c", abs(s - 4) <= 0.3, f"momentum drift slope {s:.2f} (4 +- 0.3)")


def test_4_holomorphy():
    grid = PeriodicGrid(256)
    init = random_smooth(grid, PhysParams(1.0, 1.0, 1.0), seed=0)
    res = run(init, StepperConfig(dt=1e-3, t_end=1.0, diagnostics_stride=50), keep_snapshots=True)
    leak = max(r.holo_defect for r in res.records)
    after = max(max(holo_defect(s.W), holo_defect(s.Q)) for s in res.snapshots)
    report("4", res.ok and max(leak, after) <= 1e-12,
           f"max positive-frequency mass {leak:.1e} before and {after:.1e} after reprojection (bound 1e-12)")


def test_5_identities():
    grid = PeriodicGrid(256)
    rng = np.random.default_rng(5)
    a = np.exp(np.sin(grid.alpha)) + 0.1 * np.cos(7 * grid.alpha)
    u = grid.ifft(np.where(np.abs(grid.index) < 100, rng.normal(size=256) + 1j * rng.normal(size=256), 0))
    pp = float(np.abs(a * u - pc.paraproduct(grid, a, u) - pc.paraproduct(grid, u, a)
                      - pc.balanced_pi(grid, a, u)).max() / np.abs(a * u).max())
    params = PhysParams(1.0, 1.0, 1.0)
    states = [random_smooth(grid, params, seed=100 + j) for j in range(20)]
    ub = max(ubalpha_residual(s.to_diff()) for s in states)
    cr = max(chain_rule_defect(s) for s in states)
    report("5", pp <= 1e-12 and ub <= 1e-10 and cr <= 1e-8,
           f"paraproduct {pp:.1e} (1e-12), b_alpha {ub:.1e} (1e-10), chain rule {cr:.1e} (1e-8)")


def test_6_symbolic_calculus():
    grid = PeriodicGrid(1024)
    syms = pc.reference_symbols(grid)
    worst_margin, worst_name = -math.inf, ""
    for na, A in syms.items():
        for nb, B in syms.items():
            for rho in (1.0, 1.5, 2.0):
                m = pc.composition_slope(A, B, rho, KS) - (A.order + B.order - rho + 0.3)
                if m > worst_margin:
                    worst_margin, worst_name = m, f"{na}#{nb} rho={rho:g}"
        for rho in (1.0, 1.5):
            m = pc.adjoint_slope(A, rho, KS) - (A.order - rho + 0.3)
            if m > worst_margin:
                worst_margin, worst_name = m, f"adjoint {na} rho={rho:g}"
    report("6", worst_margin <= 0, f"tightest slope margin {worst_margin:+.2f} at {worst_name} (must be <= 0)")


def test_7a_first_equivalence(wavy):
    s = rs.equivalence_residual(wavy, "first", KS)
    report("7a", s <= 0.3, f"i T_p T_lambda residual slope {s:.2f} (bound 0.3)")


def test_7b_second_equivalence(wavy):
    s = rs.equivalence_residual(wavy, "second", KS)
    report("7b", s <= 0.8, f"i T_q T_k residual slope {s:.2f} (bound 0.8)")


def test_8_paralinearization(wavy):
    sp, ss = rs.paralinearization_slopes(wavy, KS)
    report("8", sp - ss >= 0.2, f"principal slope {sp:.2f}, source slope {ss:.2f}, gap {sp - ss:.2f} (>= 0.2)")


def test_9_flattening(wavy):
    grid = wavy.grid
    fl = rs.flatten(wavy)
    inv = float(np.abs(fl.kappa_at(fl.chi) - grid.alpha).max())
    jac = float(np.abs(fl.dkappa * fl.sqrtJ_at_kappa - 1).max())
    flat = DiffState(np.zeros(grid.n_points, complex), wavy.R, wavy.params, grid)
    ff = rs.flatten(flat, w_t=np.zeros(grid.n_points, complex))
    same = bool(np.array_equal(ff.b_tilde, compute_aux(flat).b_u.real))
    report("9", inv <= 1e-12 and jac <= 1e-10 and same,
           f"kappa o chi - id {inv:.1e} (1e-12), Jacobian {jac:.1e} (1e-10), flat b_tilde = b: {same}")


def test_10_energy_estimate():
    params = PhysParams(1.0, 1.0, 1.0)
    consts = {}
    for n in (128, 256):
        grid = PeriodicGrid(n)
        cfg = StepperConfig(dt=min(1e-3, 0.5 * dt_ceiling(grid, params)), t_end=0.5)
        consts[n] = max(rs.energy_constant(random_smooth(grid, params, j, 0.3, 1e-2, 20), cfg) for j in range(10))
    vals = list(consts.values())
    spread = (max(vals) - min(vals)) / min(vals)
    ok = all(math.isfinite(v) for v in vals) and spread < 0.2
    report("10", ok, f"C = {consts[128]:.5g} (n=128), {consts[256]:.5g} (n=256), spread {spread:.1e} (< 0.2)")


def test_11_truncated_convergence():
    grid = PeriodicGrid(512)
    init = random_smooth(grid, PhysParams(1.0, 1.0, 1.0), seed=3, decay_rate=0.2, eps=1e-2, kmax=160)
    diffs = rs.truncation_differences(init, StepperConfig(dt=2e-3, t_end=0.5), range(4, 8))
    mono = all(b < a for a, b in zip(diffs, diffs[1:]))
    report("11", mono, "successive differences " + ", ".join(f"{d:.3g}" for d in diffs))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))

"""Configuration, persistence and the ``wave-lab`` command line.

Every command writes ``report.json`` into the output directory.  Each entry
of its ``criteria`` list carries a ``pass`` flag, and the exit status is 0
exactly when all of them pass.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import struct
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import CheckpointError, ConfigError, ParseError, RangeError, SchemaError, WaveLabError
from .spectral_core import PeriodicGrid, dispersion_roots, dispersion_weight
from .timestepper import DIAG_COLUMNS, DiagnosticsRecord, StepperConfig, dt_ceiling, measure_frequencies, run
from .waterwave_core import PhysParams, WaveState, random_smooth, single_mode

COMMANDS = ("simulate", "dispersion", "conserve", "symbol-check", "norms", "convergence")
DT_SAFETY = 0.5

# ---------------------------------------------------------------- schema

_NUM = (int, float)

SCHEMA: dict[str, dict[str, tuple]] = {
    "grid": {"n_points": (int, 256), "period": (_NUM, 2 * math.pi)},
    "params": {"g": (_NUM, 1.0), "sigma": (_NUM, 1.0), "gamma": (_NUM, 0.0)},
    "stepper": {
        "dt": (_NUM + (type(None),), None),
        "scheme": (str, "if_rk4"),
        "t_end": (_NUM, 1.0),
        "dealias": (_NUM + (type(None),), 2 / 3),
        "reproject_each_step": (bool, True),
        "diagnostics_stride": (int, 1),
        "checkpoint_stride": (int, 0),
    },
    "experiment": {
        "command": (str, "simulate"),
        "modes": (list, [1, 2, 3, 4, 5, 6, 7, 8]),
        "param_sets": (list, [[1.0, 1.0, 0.0], [1.0, 1.0, 2.0], [0.0, 1.0, 1.0], [1.0, 0.1, 0.5]]),
        "dt_ladder": (list, [0.016, 0.008, 0.004, 0.002]),
        "drift_tol": (_NUM, 1e-6),
        "ensemble": (int, 10),
        "resolutions": (list, [128, 256]),
        "truncation_levels": (list, [4, 5, 6, 7]),
        "symbol_n": (int, 1024),
        "wavy_amplitude": (_NUM, 0.0),
        "k_range": (list, [4, 5, 6, 7, 8]),
    },
    "output": {"dir": (str, "wave_lab_out"), "series_format": (str, "csv")},
}

PRESETS: dict[str, dict[str, tuple]] = {
    "single_mode": {"k": (int, 1), "eps": (_NUM, 1e-6), "target": (str, "W")},
    "random_smooth": {"seed": (int, 0), "decay_rate": (_NUM, 0.5), "eps": (_NUM, 1e-2),
                      "kmax": (int, 20)},
    "from_checkpoint": {"path": (str, None)},
}


def _check_type(key: str, value: Any, types) -> Any:
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise SchemaError(key, f"expected {types}, got bool")
    if not isinstance(value, types):
        raise SchemaError(key, f"expected {types}, got {type(value).__name__}")
    return float(value) if isinstance(types, tuple) and float in types and isinstance(value, int) else value


def _fill(section: str, raw: Any, spec: dict[str, tuple]) -> dict:
    if not isinstance(raw, dict):
        raise SchemaError(section, "must be an object")
    unknown = sorted(set(raw) - set(spec))
    if unknown:
        raise SchemaError(f"{section}.{unknown[0]}", "unknown key")
    out = {}
    for key, (types, default) in spec.items():
        full = f"{section}.{key}"
        if key in raw:
            out[key] = _check_type(full, raw[key], types)
        elif default is None and types is str:
            raise SchemaError(full, "required")
        else:
            out[key] = copy.deepcopy(default)
    return out


@dataclass(frozen=True)
class RunConfig:
    grid: dict
    params: dict
    initial: dict
    stepper: dict
    experiment: dict
    output: dict

    @staticmethod
    def from_dict(raw: Any) -> "RunConfig":
        if not isinstance(raw, dict):
            raise SchemaError("<root>", "config must be a JSON object")
        unknown = sorted(set(raw) - set(SCHEMA) - {"initial"})
        if unknown:
            raise SchemaError(unknown[0], "unknown key")
        sec = {name: _fill(name, raw.get(name, {}), spec) for name, spec in SCHEMA.items()}
        init_raw = raw.get("initial", {"preset": "single_mode"})
        if not isinstance(init_raw, dict):
            raise SchemaError("initial", "must be an object")
        preset = init_raw.get("preset", "single_mode")
        if preset not in PRESETS:
            raise SchemaError("initial.preset", f"unknown preset {preset!r}")
        init = {"preset": preset, **_fill("initial", {k: v for k, v in init_raw.items() if k != "preset"},
                                          PRESETS[preset])}
        _validate_ranges(sec, init)
        cfg = RunConfig(sec["grid"], sec["params"], init, sec["stepper"], sec["experiment"], sec["output"])
        if cfg.stepper["dt"] is None:
            # largest dt under the guard that divides t_end exactly
            cap = DT_SAFETY * dt_ceiling(cfg.make_grid(), cfg.make_params(), cfg.stepper["scheme"],
                                         cfg.stepper["dealias"])
            t_end = cfg.stepper["t_end"]
            cfg.stepper["dt"] = t_end / math.ceil(t_end / cap) if t_end > 0 else cap
        return cfg

    def to_dict(self) -> dict:
        return copy.deepcopy({"grid": self.grid, "params": self.params, "initial": self.initial,
                              "stepper": self.stepper, "experiment": self.experiment, "output": self.output})

    def make_grid(self, n_points: Optional[int] = None) -> PeriodicGrid:
        return PeriodicGrid(n_points or self.grid["n_points"], self.grid["period"])

    def make_params(self) -> PhysParams:
        return PhysParams(self.params["g"], self.params["sigma"], self.params["gamma"])

    def make_stepper(self, **changes) -> StepperConfig:
        s = self.stepper
        kw = dict(dt=s["dt"], scheme=s["scheme"], t_end=s["t_end"], dealias_rule=s["dealias"],
                  reproject_each_step=s["reproject_each_step"], diagnostics_stride=s["diagnostics_stride"],
                  checkpoint_stride=s["checkpoint_stride"])
        kw.update(changes)
        return StepperConfig(**kw)

    def make_initial(self, grid: Optional[PeriodicGrid] = None, params: Optional[PhysParams] = None) -> WaveState:
        grid = grid or self.make_grid()
        params = params or self.make_params()
        ini = self.initial
        if ini["preset"] == "single_mode":
            return single_mode(grid, params, ini["k"], ini["eps"], ini["target"])
        if ini["preset"] == "random_smooth":
            return random_smooth(grid, params, ini["seed"], ini["decay_rate"], ini["eps"], ini["kmax"])
        state = load_checkpoint(ini["path"])
        if state.grid.n_points != grid.n_points:
            raise RangeError("initial.path", f"checkpoint has n={state.grid.n_points}, config wants {grid.n_points}")
        return state


def _validate_ranges(sec: dict, init: dict) -> None:
    def need(ok: bool, key: str, msg: str) -> None:
        if not ok:
            raise RangeError(key, msg)

    n = sec["grid"]["n_points"]
    need(n >= 4 and n & (n - 1) == 0, "grid.n_points", "must be a power of two >= 4")
    need(sec["grid"]["period"] > 0, "grid.period", "must be positive")
    need(sec["params"]["sigma"] > 0, "sigma", "surface tension must be positive")
    need(sec["params"]["g"] >= 0, "g", "gravity must be nonnegative")
    st = sec["stepper"]
    need(st["dt"] is None or st["dt"] > 0, "stepper.dt", "must be positive")
    need(st["scheme"] in ("if_rk4", "rk4"), "stepper.scheme", "must be 'if_rk4' or 'rk4'")
    need(st["t_end"] >= 0, "stepper.t_end", "must be nonnegative")
    need(st["dealias"] is None or 0 < st["dealias"] <= 1, "stepper.dealias", "must lie in (0, 1]")
    need(st["diagnostics_stride"] >= 1, "stepper.diagnostics_stride", "must be >= 1")
    need(st["checkpoint_stride"] >= 0, "stepper.checkpoint_stride", "must be >= 0")
    ex = sec["experiment"]
    need(ex["command"] in COMMANDS, "experiment.command", f"must be one of {COMMANDS}")
    need(ex["ensemble"] >= 1, "experiment.ensemble", "must be >= 1")
    need(len(ex["dt_ladder"]) >= 2, "experiment.dt_ladder", "needs at least two step sizes")
    need(len(ex["truncation_levels"]) >= 3, "experiment.truncation_levels", "needs at least three levels")
    need(sec["output"]["series_format"] in ("csv", "json"), "output.series_format", "must be 'csv' or 'json'")
    if init["preset"] == "single_mode":
        need(init["k"] >= 1, "initial.k", "must be >= 1")
        need(init["target"] in ("W", "Q"), "initial.target", "must be 'W' or 'Q'")
    if init["preset"] == "random_smooth":
        need(init["decay_rate"] >= 0, "initial.decay_rate", "must be nonnegative")
        need(init["kmax"] >= 1, "initial.kmax", "must be >= 1")


def load_config(path: str | os.PathLike, overrides: Sequence[str] = ()) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ParseError(str(path), "config file not found")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), f"invalid JSON: {exc}") from exc
    return RunConfig.from_dict(apply_overrides(raw, overrides))


def dump_config(cfg: RunConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2))


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    """Apply ``a.b.c=value`` assignments; ``value`` is parsed as JSON when possible."""
    out = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ParseError(item, "override must look like key=value")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise SchemaError(key, f"{part} is not an object")
        node[parts[-1]] = value
    return out


# ---------------------------------------------------------------- series and checkpoints


def _fmt(x: float) -> str:
    return repr(float(x))


def write_series(records: Iterable[DiagnosticsRecord], path: str | os.PathLike, format: str = "csv") -> None:
    rows = [r.as_dict() for r in records]
    path = Path(path)
    if format == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DIAG_COLUMNS)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in DIAG_COLUMNS])
    elif format == "json":
        path.write_text(json.dumps({"columns": list(DIAG_COLUMNS),
                                    "rows": [[float(r[c]) for c in DIAG_COLUMNS] for r in rows]}))
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {format!r}")


def read_series(path: str | os.PathLike) -> list[dict]:
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        return [dict(zip(data["columns"], row)) for row in data["rows"]]
    with path.open(newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


MAGIC = b"WVL1"


def save_checkpoint(state: WaveState, path: str | os.PathLike) -> None:
    """``WVL1`` + ``<Q n>`` + ``<d period t g sigma gamma>`` + W and Q coefficients as ``<c16``."""
    from .timestepper import state_coeffs

    cw, cq = state_coeffs(state)
    g, p = state.grid, state.params
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", g.n_points))
        fh.write(struct.pack("<5d", g.period, state.t, p.g, p.sigma, p.gamma))
        fh.write(np.asarray(cw, dtype="<c16").tobytes())
        fh.write(np.asarray(cq, dtype="<c16").tobytes())


def load_checkpoint(path: str | os.PathLike) -> WaveState:
    from .timestepper import state_from_coeffs

    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {data[:4]!r}")
    head = 4 + 8 + 40
    if len(data) < head:
        raise CheckpointError(f"{path}: truncated header")
    (n,) = struct.unpack_from("<Q", data, 4)
    period, t, g, sigma, gamma = struct.unpack_from("<5d", data, 12)
    if len(data) != head + 32 * n:
        raise CheckpointError(f"{path}: expected {head + 32 * n} bytes, found {len(data)}")
    cw = np.frombuffer(data, "<c16", n, head).astype(complex)
    cq = np.frombuffer(data, "<c16", n, head + 16 * n).astype(complex)
    return state_from_coeffs(PeriodicGrid(int(n), period), PhysParams(g, sigma, gamma), cw, cq, t)


# ---------------------------------------------------------------- reports


class Report:
    def __init__(self, command: str, cfg: RunConfig) -> None:
        self.data: dict[str, Any] = {"command": command, "config": cfg.to_dict(), "criteria": [], "tables": {}}

    def criterion(self, name: str, passed: bool, **values: Any) -> bool:
        self.data["criteria"].append({"name": name, "pass": bool(passed), **_jsonable(values)})
        return bool(passed)

    def table(self, name: str, rows: list) -> None:
        self.data["tables"][name] = _jsonable(rows)

    @property
    def ok(self) -> bool:
        return all(c["pass"] for c in self.data["criteria"])

    def write(self, out: Path) -> Path:
        self.data["ok"] = self.ok
        path = out / "report.json"
        path.write_text(json.dumps(self.data, indent=2))
        return path


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    return float(np.polyfit(np.log2(xs), np.log2(np.maximum(ys, 1e-300)), 1)[0])


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig, out: Path, rep: Report, log: Callable[[str], None]) -> None:
    init = cfg.make_initial()
    stepper = cfg.make_stepper()
    ck = out / "checkpoints"

    def on_ck(state: WaveState) -> None:
        ck.mkdir(exist_ok=True)
        save_checkpoint(state, ck / f"t{state.t:.6f}.wvl")

    res = run(init, stepper, on_checkpoint=on_ck)
    write_series(res.records, out / f"series.{cfg.output['series_format']}", cfg.output["series_format"])
    save_checkpoint(res.final, out / "final.wvl")
    log(f"simulate: {len(res.records)} records, final t={res.final.t:.6g}")
    rep.criterion("run completed", res.ok, error=res.error, t_final=res.final.t)
    worst = max((r.holo_defect for r in res.records), default=0.0)
    rep.criterion("holomorphy defect <= 1e-12", worst <= 1e-12, max_defect=worst)


def cmd_dispersion(cfg: RunConfig, out: Path, rep: Report, log: Callable[[str], None]) -> None:
    grid = cfg.make_grid()
    rows, worst = [], 0.0
    for g, s, gam in cfg.experiment["param_sets"]:
        params = PhysParams(g, s, gam)
        for k in cfg.experiment["modes"]:
            meas = np.sort(measure_frequencies(grid, params, int(k), cfg.initial.get("eps", 1e-6)))
            xi = -int(k) * 2 * np.pi / grid.period
            pred = np.sort(np.array(dispersion_roots(params, np.array([xi]))).ravel())
            err = float(np.max(np.abs(meas - pred) / np.abs(pred)))
            worst = max(worst, err)
            rows.append({"g": g, "sigma": s, "gamma": gam, "k": k, "measured": list(meas),
                         "predicted": list(pred), "rel_err": err})
            log(f"dispersion {params} k={k}: rel err {err:.2e}")
    rep.table("dispersion", rows)
    rep.criterion("dispersion relative error <= 1e-3", worst <= 1e-3, worst=worst)


def _drift(init: WaveState, stepper: StepperConfig) -> tuple[float, float, bool]:
    from .waterwave_core import conserved

    E0, P0 = conserved(init)
    res = run(init, stepper, diagnostics_on=True)
    dE = max(abs(r.E - E0) / abs(E0) for r in res.records)
    dP = max(abs(r.P - P0) / abs(P0) for r in res.records)
    return dE, dP, res.ok


def cmd_conserve(cfg: RunConfig, out: Path, rep: Report, log: Callable[[str], None]) -> None:
    init = cfg.make_initial()
    dE, dP, ok = _drift(init, cfg.make_stepper())
    log(f"conserve: dt={cfg.stepper['dt']:.3g} drift E {dE:.2e} P {dP:.2e}")
    tol = cfg.experiment["drift_tol"]
    rep.criterion("run completed", ok)
    rep.criterion(f"energy drift <= {tol:g}", dE <= tol, drift=dE)
    rep.criterion(f"momentum drift <= {tol:g}", dP <= tol, drift=dP)
    ladder = [float(d) for d in cfg.experiment["dt_ladder"]]
    rows = []
    for dt in ladder:
        e, p, _ = _drift(init, cfg.make_stepper(dt=dt))
        rows.append({"dt": dt, "drift_E": e, "drift_P": p})
        log(f"conserve ladder dt={dt:g}: E {e:.3e} P {p:.3e}")
    rep.table("dt_ladder", rows)
    sE = _slope(ladder, [r["drift_E"] for r in rows])
    sP = _slope(ladder, [r["drift_P"] for r in rows])
    rep.criterion("energy drift slope 4 +- 0.3", abs(sE - 4) <= 0.3, slope=sE)
    rep.criterion("momentum drift slope 4 +- 0.3", abs(sP - 4) <= 0.3, slope=sP)


def _symbol_state(cfg: RunConfig):
    """Flat surface, or a wavy one scaled to the requested C^{1+1/16}_* size of ``Wb``."""
    from .littlewood_paley import zygmund_norm
    from .waterwave_core import DiffState

    grid = cfg.make_grid(cfg.experiment["symbol_n"])
    params = cfg.make_params()
    a = grid.alpha
    R = 0.3 * np.exp(-1j * a) + 0.1 * np.exp(-3j * a)
    amp = cfg.experiment["wavy_amplitude"]
    Wb = np.zeros(grid.n_points, complex)
    if amp > 0:
        Wb = np.exp(-1j * a) + 0.5j * np.exp(-2j * a) + 0.3 * np.exp(-3j * a)
        Wb *= amp / zygmund_norm(grid, Wb, 1 + 1 / 16)
    return DiffState(Wb, R, params, grid)


def cmd_symbol_check(cfg: RunConfig, out: Path, rep: Report, log: Callable[[str], None]) -> None:
    from . import paracalc as pc
    from . import reduction_symbols as rs
    from .waterwave_core import compute_aux, rhs_WQ, rhs_WR, ubalpha_residual

    ks = range(min(cfg.experiment["k_range"]), max(cfg.experiment["k_range"]) + 1)
    state = _symbol_state(cfg)
    grid, params = state.grid, state.params

    zero_w = WaveState(np.zeros(grid.n_points, complex), np.zeros(grid.n_points, complex), params, grid)
    fp = max(max(np.abs(f).max() for f in rhs_WQ(zero_w)), max(np.abs(f).max() for f in rhs_WR(zero_w.to_diff())))
    rep.criterion("zero state is a fixed point (1e-14)", fp <= 1e-14, residual=fp)

    u = state.R + 0.2 * np.cos(3 * grid.alpha)
    av = np.exp(np.sin(grid.alpha))
    pp = float(np.abs(av * u - pc.paraproduct(grid, av, u) - pc.paraproduct(grid, u, av)
                      - pc.balanced_pi(grid, av, u)).max())
    rep.criterion("paraproduct decomposition (1e-12)", pp <= 1e-12, residual=pp)
    ub = ubalpha_residual(state)
    rep.criterion("b_alpha relation (1e-10)", ub <= 1e-10, residual=ub)
    cr = chain_rule_defect(state.to_wave())
    rep.criterion("chain rule WQ vs WR (1e-8)", cr <= 1e-8, residual=cr)

    syms = pc.reference_symbols(grid)
    for na, A in syms.items():
        for nb, B in syms.items():
            for rho in (1.0, 2.0):
                sl = pc.composition_slope(A, B, rho, ks)
                bound = A.order + B.order - rho + 0.3
                rep.criterion(f"composition {na}#{nb} rho={rho:g}", sl <= bound, slope=sl, bound=bound)
        for rho in (1.0, 1.5):
            sl = pc.adjoint_slope(A, rho, ks)
            bound = A.order - rho + 0.3
            rep.criterion(f"adjoint {na} rho={rho:g}", sl <= bound, slope=sl, bound=bound)
    log("symbol-check: calculus probes done")

    e1 = rs.equivalence_residual(state, "first", ks)
    e2 = rs.equivalence_residual(state, "second", ks)
    rep.criterion("equivalence i T_p T_lambda (slope <= 0.3)", e1 <= 0.3, slope=e1)
    rep.criterion("equivalence i T_q T_k (slope <= 0.8)", e2 <= 0.8, slope=e2)
    sp, ss = rs.paralinearization_slopes(state, ks)
    rep.criterion("paralinearization slope gap >= 0.2", sp - ss >= 0.2, principal=sp, source=ss)

    fl = rs.flatten(state)
    inv = float(np.abs(fl.kappa_at(fl.chi) - grid.alpha).max())
    jac = float(np.abs(fl.dkappa * fl.sqrtJ_at_kappa - 1).max())
    rep.criterion("kappa o chi = id (1e-12)", inv <= 1e-12, residual=inv)
    rep.criterion("d kappa * (d chi o kappa) = 1 (1e-10)", jac <= 1e-10, residual=jac)
    flat = type(state)(np.zeros(grid.n_points, complex), state.R, params, grid)
    ff = rs.flatten(flat, w_t=np.zeros(grid.n_points, complex))
    bt = float(np.abs(ff.b_tilde - compute_aux(flat).b_u.real).max())
    rep.criterion("flat surface b_tilde = b", bt == 0.0, residual=bt)

    sym = rs.build_symmetrizers(state)
    wd = rs.weight_commutator_defect(sym, 2.0, -(2.0 ** np.arange(1, 9)))
    rep.criterion("elliptic weight commutator (1e-10 relative)", wd <= 1e-10, residual=wd)
    pgrid = cfg.make_grid(256)
    worst = 0.0
    for k in (1, 4, 8):
        tm, tp = rs.phi_mode_frequencies(pgrid, params, k)
        lk = float(dispersion_weight(params)(np.array([float(k)]))[0])
        for meas, pred in ((tm, lk - params.gamma / 2), (tp, lk + params.gamma / 2)):
            worst = max(worst, abs(meas - pred) / abs(pred))
    rep.criterion("Phi linear mode frequencies (1e-3)", worst <= 1e-3, worst=worst)


def chain_rule_defect(state: WaveState) -> float:
    """Relative mismatch between ``rhs_WR`` and ``rhs_WQ`` pushed through ``(W, Q) -> (Wb, R)``."""
    from .spectral_core import derivative
    from .waterwave_core import DEFAULT_DEALIAS, _Ops, rhs_WQ, rhs_WR

    g = state.grid
    Wt, Qt = rhs_WQ(state)
    d = state.to_diff()
    Wa, Qa = state.W_alpha, state.Q_alpha
    ops = _Ops(g, DEFAULT_DEALIAS)
    Wbt = derivative(g, Wt)
    Rt = ops.holo(derivative(g, Qt) / (1 + Wa) - Qa * Wbt / (1 + Wa) ** 2)
    a, b = rhs_WR(d)
    return max(float(np.abs(a - Wbt).max() / max(np.abs(Wbt).max(), 1e-300)),
               float(np.abs(b - Rt).max() / max(np.abs(Rt).max(), 1e-300)))


def cmd_norms(cfg: RunConfig, out: Path, rep: Report, log: Callable[[str], None]) -> None:
    from .littlewood_paley import control_norms, product_norm
    from .reduction_symbols import energy_constant

    init = cfg.make_initial()
    d = init.to_diff()
    A, B = control_norms(d)
    rep.table("initial_norms", [{"A": A, "B": B, "Hs": product_norm(init.grid, (d.Wb, d.R), 2.0),
                                 "Wr": product_norm(init.grid, (d.Wb, d.R), 1.0, "W")}])
    ini = dict(cfg.initial)
    if ini["preset"] != "random_smooth":
        ini = {"preset": "random_smooth", **{k: v[1] for k, v in PRESETS["random_smooth"].items()}}
    params = cfg.make_params()
    consts = {}
    for n in cfg.experiment["resolutions"]:
        grid = cfg.make_grid(int(n))
        stepper = cfg.make_stepper(dt=min(cfg.stepper["dt"], DT_SAFETY * dt_ceiling(grid, params)))
        c = max(energy_constant(random_smooth(grid, params, ini["seed"] + j, ini["decay_rate"], ini["eps"],
                                              ini["kmax"]), stepper)
                for j in range(cfg.experiment["ensemble"]))
        consts[int(n)] = c
        log(f"norms: n={n} energy constant {c:.6g}")
    vals = list(consts.values())
    finite = all(math.isfinite(v) for v in vals)
    spread = (max(vals) - min(vals)) / min(vals) if finite and min(vals) > 0 else math.inf
    rep.criterion("energy constant finite", finite, constants=consts)
    rep.criterion("energy constant varies < 20% across resolutions", spread < 0.2, spread=spread)


def cmd_convergence(cfg: RunConfig, out: Path, rep: Report, log: Callable[[str], None]) -> None:
    from .reduction_symbols import truncation_differences

    init = cfg.make_initial()
    diffs = truncation_differences(init, cfg.make_stepper(), cfg.experiment["truncation_levels"])
    log("convergence: differences " + ", ".join(f"{x:.3e}" for x in diffs))
    mono = all(b < a for a, b in zip(diffs, diffs[1:]))
    rep.criterion("successive H^{3/2} differences decrease", mono, differences=diffs)


HANDLERS = {
    "simulate": cmd_simulate,
    "dispersion": cmd_dispersion,
    "conserve": cmd_conserve,
    "symbol-check": cmd_symbol_check,
    "norms": cmd_norms,
    "convergence": cmd_convergence,
}


def dispatch(command: str, cfg: RunConfig, out: Path, quiet: bool = False) -> int:
    out.mkdir(parents=True, exist_ok=True)
    rep = Report(command, cfg)
    log = (lambda msg: None) if quiet else (lambda msg: print(msg, file=sys.stderr))
    t0 = time.perf_counter()
    try:
        HANDLERS[command](cfg, out, rep, log)
    except WaveLabError as exc:
        rep.criterion(f"{command} raised {type(exc).__name__}", False, message=str(exc))
    rep.data["elapsed_s"] = time.perf_counter() - t0
    path = rep.write(out)
    for c in rep.data["criteria"]:
        if not quiet or not c["pass"]:
            print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}")
    if not quiet:
        print(f"report: {path}")
    return 0 if rep.ok else 1


def _cap_threads() -> None:
    n = os.environ.get("WAVE_LAB_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wave-lab", description="Water-wave simulator and paradifferential workbench.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted-path assignment, e.g. stepper.dt=1e-3; repeatable")
    ap.add_argument("--quiet", action="store_true", help="print failures only")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    _cap_threads()
    args = build_parser().parse_args(argv)
    overrides = list(args.override) + [f"experiment.command={json.dumps(args.command)}"]
    try:
        if args.config:
            cfg = load_config(args.config, overrides)
        else:
            cfg = RunConfig.from_dict(apply_overrides({}, overrides))
    except ConfigError as exc:
        print(f"config error [{exc.key}]: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or cfg.output["dir"])
    return dispatch(args.command, cfg, out, args.quiet)


if __name__ == "__main__":
    raise SystemExit(main())

"""Batch studies: synthesis, sweeps, robustness, WahWah, filtering, sequencing."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from crowdpulse.hardware import retune_amplitudes
from crowdpulse.metrics import (
    SimResult,
    gate_fidelity,
    leakage_error,
    reduced_fidelity,
    virtual_z_fidelity,
    z_error_phases,
)
from crowdpulse.model import (
    GATES,
    TWO_PI,
    SystemParams,
    TargetRotation,
    target_unitary,
)
from crowdpulse.optimizer import (
    Mode,
    PulseAnsatz,
    SynthesisContext,
    decode,
    multistart_optimize,
    nelder_mead,
    search_grid,
)
from crowdpulse.propagator import PropagationGrid, propagate_field, propagate_pair
from crowdpulse.pulses import (
    derivative_baseline,
    gaussian_baseline,
    wahwah_field,
    wahwah_linear_model,
    wahwah_sideband_model,
)
from crowdpulse.experiments.config import ExperimentConfig
from crowdpulse.experiments.store import RecordStore, point_key, point_seed, write_json, write_table

log = logging.getLogger(__name__)

STRATEGIES = ("gaussian", "derivative", "resonant", "off_resonant")
DRAG_BOUND = 3.0


# -- serialization of pulses --------------------------------------------------------


def params_dict(params):
    return {
        "omega1_rad_per_ns": params.omega1,
        "omega2_rad_per_ns": params.omega2,
        "anharmonicity_rad_per_ns": params.anharmonicity,
        "crowding_rad_per_ns": params.crowding,
        "lambdas": [list(p) for p in params.lambdas],
    }


def params_from_dict(data):
    return SystemParams(
        data["omega1_rad_per_ns"],
        data["omega2_rad_per_ns"],
        data["anharmonicity_rad_per_ns"],
        tuple(tuple(p) for p in data["lambdas"]),
    )


def hanning_pulse_dict(ansatz, target, exact=False):
    return {
        "kind": "hanning",
        "ansatz": ansatz.as_dict(),
        "target": [[t.real, t.imag] for t in target.thetas],
        "exact_amplitudes": exact,
    }


def field_from_result(result):
    """Rebuild a Hanning :class:`ControlField` stored in a SimResult."""
    pulse = result.pulse if isinstance(result, SimResult) else result["pulse"]
    params = params_from_dict(result.params if isinstance(result, SimResult) else result["params"])
    if pulse.get("kind") != "hanning":
        raise ValueError(f"cannot rebuild pulse of kind {pulse.get('kind')!r}")
    target = TargetRotation(*(complex(re, im) for re, im in pulse["target"]))
    ansatz = PulseAnsatz.from_dict(pulse["ansatz"])
    return ansatz.to_field(target, params, pulse["exact_amplitudes"]), target


def simulate(field, target, grid=None, pulse=None, extra=None):
    """Reference-grid simulation of a field packaged as a :class:`SimResult`."""
    grid = PropagationGrid(field.tg) if grid is None else grid
    U = propagate_pair(field, grid)
    err = max(0.0, 1.0 - gate_fidelity(U, target_unitary(target)))
    return SimResult(
        U,
        err,
        leakage_error(U),
        z_error_phases(field.params, field.Lambda1, field.tg),
        params_dict(field.params),
        dict(pulse or {}, a1=field.a1, a2=field.a2),
        {"tg_ns": grid.tg, "steps": grid.steps, "method": grid.method.value},
        dict(extra or {}),
    )


def ledger_digest(records):
    blob = json.dumps([(r.index, r.fun, r.nit, r.nfev) for r in records])
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- synthesis ------------------------------------------------------------------------


def context_from_config(config, params=None, tg=None, target=None, mode=None):
    grid_steps = config.steps
    tg = config.tg if tg is None else tg
    grid = PropagationGrid(tg, grid_steps, config.method) if grid_steps else search_grid(tg, config.search_dt)
    if config.method is not grid.method:
        grid = replace(grid, method=config.method)
    return SynthesisContext(
        config.target() if target is None else target,
        config.params() if params is None else params,
        tg,
        config.n_windows,
        config.mode if mode is None else Mode(mode),
        grid,
        config.leakage_weight,
        config.exact_amplitudes,
    )


def synthesize(context, opt_config):
    """Multistart optimization followed by a reference-grid simulation.

    Returns ``(SimResult, field)``.
    """
    t0 = time.perf_counter()
    best = multistart_optimize(context, opt_config)
    ansatz = decode(best.x, context.tg, context.n_windows, context.mode)
    field = ansatz.to_field(context.target, context.params, context.exact_amplitudes)
    extra = {
        "search_error": best.fun,
        "best_restart": best.best_index,
        "restarts": [
            {"index": r.index, "f0": r.f0, "fun": r.fun, "nit": r.nit, "nfev": r.nfev}
            for r in best.records
        ],
        "polish": list(best.polish),
        "ledger_digest": ledger_digest(best.records),
        "seed": opt_config.seed,
        "mode": context.mode.value,
        "wall_time_s": time.perf_counter() - t0,
    }
    pulse = hanning_pulse_dict(ansatz, context.target, context.exact_amplitudes)
    return simulate(field, context.target, pulse=pulse, extra=extra), field


def run_synthesis(config: ExperimentConfig, out=None):
    """Optimize the configured target at one gate time; persist JSON and waveform CSV."""
    from crowdpulse.pulses import export_waveform

    result, field = synthesize(context_from_config(config), config.optimizer())
    result.extra.update(config_hash=config.digest)
    if out is not None:
        os.makedirs(out, exist_ok=True)
        result.to_json(os.path.join(out, "result.json"))
        export_waveform(field, os.path.join(out, "waveform.csv"))
    return result


# -- gate-time sweep ------------------------------------------------------------------


def _baseline_error(field, target):
    U1, U2 = propagate_field(field)
    U = np.kron(U1, U2)
    return max(0.0, 1.0 - gate_fidelity(U, target_unitary(target))), leakage_error(U)


def optimize_drag(tg, target, params):
    """Best single drag coefficient (ns) shared by both Gaussian tones."""
    grid = search_grid(tg)

    def cost(drag):
        field = derivative_baseline(tg, target, params, drag)
        U1, U2 = propagate_field(field, grid)
        return 1.0 - gate_fidelity(np.kron(U1, U2), target_unitary(target))

    res = minimize_scalar(cost, bounds=(-DRAG_BOUND, DRAG_BOUND), method="bounded", options={"xatol": 1e-6})
    return float(res.x)


def evaluate_strategy(strategy, tg, target, params, config, seed):
    """(gate_error, leakage, details) of one strategy at one gate time."""
    if strategy == "gaussian":
        err, leak = _baseline_error(gaussian_baseline(tg, target, params), target)
        return err, leak, {}
    if strategy == "derivative":
        drag = optimize_drag(tg, target, params)
        err, leak = _baseline_error(derivative_baseline(tg, target, params, drag), target)
        return err, leak, {"drag_ns": drag}
    context = context_from_config(config, params=params, tg=tg, target=target, mode=strategy)
    result, _ = synthesize(context, config.optimizer(seed=seed, workers=1))
    return result.gate_error, result.leakage, {
        "ledger_digest": result.extra["ledger_digest"],
        "pulse": result.pulse["ansatz"],
    }


def _run_point(args):
    raw, coords, seed = args
    config = ExperimentConfig(raw)
    params = config.params()
    if "crowding_MHz" in coords:
        params = params.with_crowding(TWO_PI * coords["crowding_MHz"] * 1e-3)
    t0 = time.perf_counter()
    err, leak, details = evaluate_strategy(coords["strategy"], coords["tg_ns"], config.target(), params, config, seed)
    return {"gate_error": err, "leakage": leak, "wall_time_s": time.perf_counter() - t0, **details}


def _run_points(config, points, store, workers):
    """Evaluate missing points (possibly in parallel) and return records in point order."""
    todo = []
    for coords in points:
        key = point_key(config.digest, coords)
        if key not in store:
            todo.append((key, coords))
    jobs = [(config.raw, coords, point_seed(config.seed, coords)) for _, coords in todo]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = pool.map(_run_point, jobs)
            for (key, coords), job, outcome in zip(todo, jobs, outcomes):
                _store_point(store, key, coords, job[2], config, outcome)
    else:
        for (key, coords), job in zip(todo, jobs):
            _store_point(store, key, coords, job[2], config, _run_point(job))
    return [store.get(point_key(config.digest, c)) for c in points]


def _store_point(store, key, coords, seed, config, outcome):
    record = {"key": key, **coords, "seed": seed, "config_hash": config.digest, **outcome}
    log.info("%s -> %.3e", coords, outcome["gate_error"])
    store.put(record)


def _sorted(records, coords):
    return sorted(records, key=lambda r: tuple(
        STRATEGIES.index(r[c]) if c == "strategy" else r[c] for c in coords))


TABLE_COLUMNS = ["gate_error", "leakage", "seed", "config_hash"]


def sweep_gate_time(config: ExperimentConfig, out=None):
    """Four strategies at every gate time; one record per (tg, strategy)."""
    strategies = config.sweep("strategies")
    points = [{"tg_ns": tg, "strategy": s} for tg in config.sweep("tg_ns") for s in strategies]
    store = RecordStore(os.path.join(out, "sweep_time.jsonl") if out else None)
    records = _sorted(_run_points(config, points, store, config.workers), ["tg_ns", "strategy"])
    if out:
        write_table(os.path.join(out, "sweep_time.csv"), records, ["tg_ns", "strategy"] + TABLE_COLUMNS)
    return records


# -- speed limit --------------------------------------------------------------------


@dataclass(frozen=True)
class SpeedLimitFit:
    """``t_min = alpha * 2 pi / delta`` fitted on log axes.

    ``slope`` is the free log-log slope, reported as a diagnostic.
    """

    alpha: float
    slope: float
    crowding_mhz: tuple
    t_min: tuple


def fit_speed_limit(crowding_mhz, t_min):
    """Least-squares ``log t_min = log alpha + log(2 pi / delta)`` (delta cyclic in MHz)."""
    d = np.asarray(crowding_mhz, dtype=float)
    t = np.asarray(t_min, dtype=float)
    if d.size == 0:
        raise ValueError("no speed-limit points to fit")
    period = 1e3 / d  # 2 pi / delta in ns
    alpha = float(np.exp(np.mean(np.log(t) - np.log(period))))
    slope = float(np.polyfit(np.log(period), np.log(t), 1)[0]) if d.size > 1 else 1.0
    return SpeedLimitFit(alpha, slope, tuple(d.tolist()), tuple(t.tolist()))


def speed_limit_points(records, threshold):
    """Per crowding value, the smallest gate time reaching ``threshold``."""
    best = {}
    for r in records:
        if r["gate_error"] <= threshold:
            d = r["crowding_MHz"]
            best[d] = min(best.get(d, math.inf), r["tg_ns"])
    ds = sorted(best)
    return ds, [best[d] for d in ds]


def sweep_speed_limit(config: ExperimentConfig, out=None):
    """Off-resonant optimization over a (delta, tg) grid, then the speed-limit fit.

    With ``stop_at_threshold`` each delta column is scanned upward in tg and
    stops at the first point under the threshold.  When ``tg_period_fraction``
    is set, each column uses gate times ``f * 2 pi / delta`` instead of
    ``speed_limit_tg_ns``.
    """
    threshold = config.sweep("threshold")
    stop = config.sweep("stop_at_threshold")
    relative = "tg_period_fraction" in config.raw["sweep"]
    store = RecordStore(os.path.join(out, "speed_limit.jsonl") if out else None)
    records = []
    for d in config.sweep("crowding_MHz"):
        if relative:
            tgs = sorted(round(f * 1e3 / d, 9) for f in config.sweep("tg_period_fraction"))
        else:
            tgs = sorted(config.sweep("speed_limit_tg_ns"))
        column = [{"crowding_MHz": d, "tg_ns": tg, "strategy": "off_resonant"} for tg in tgs]
        if stop:
            for coords in column:
                rec = _run_points(config, [coords], store, 1)[0]
                records.append(rec)
                if rec["gate_error"] <= threshold:
                    break
        else:
            records += _run_points(config, column, store, config.workers)
    records = sorted(records, key=lambda r: (r["crowding_MHz"], r["tg_ns"]))
    ds, tmins = speed_limit_points(records, threshold)
    fit = fit_speed_limit(ds, tmins) if ds else None
    if out:
        write_table(os.path.join(out, "speed_limit.csv"), records, ["crowding_MHz", "tg_ns"] + TABLE_COLUMNS)
        write_json(os.path.join(out, "speed_limit_fit.json"), {
            "alpha": None if fit is None else fit.alpha,
            "slope": None if fit is None else fit.slope,
            "crowding_MHz": ds,
            "t_min_ns": tmins,
            "threshold": threshold,
            "config_hash": config.digest,
            "seed": config.seed,
        })
    return records, fit


# -- robustness --------------------------------------------------------------------


def deviate(params, anharmonicity_dev=0.0, crowding_dev=0.0):
    """Relative deviations of Delta and delta; omega1 stays fixed."""
    if anharmonicity_dev == 0.0 and crowding_dev == 0.0:
        return params
    p = params.with_anharmonicity(params.anharmonicity * (1.0 + anharmonicity_dev))
    return p.with_crowding(params.crowding * (1.0 + crowding_dev))


def robustness_error(field, target, anharmonicity_dev=0.0, crowding_dev=0.0, grid=None, keep="detunings"):
    """Gate error of a fixed pulse on a deviated device; see :meth:`ControlField.with_params`."""
    moved = field.with_params(deviate(field.params, anharmonicity_dev, crowding_dev), keep)
    U1, U2 = propagate_field(moved, grid)
    U = np.kron(U1, U2)
    return max(0.0, 1.0 - gate_fidelity(U, target_unitary(target))), leakage_error(U)


def sweep_robustness(config: ExperimentConfig, field, target, out=None):
    """Re-simulate one pulse over the (Delta, delta) deviation grid; no re-optimization."""
    records = []
    for da in config.sweep("anharmonicity_deviation"):
        for dd in config.sweep("crowding_deviation"):
            err, leak = robustness_error(field, target, da, dd)
            records.append({
                "anharmonicity_deviation": da,
                "crowding_deviation": dd,
                "gate_error": err,
                "leakage": leak,
                "seed": config.seed,
                "config_hash": config.digest,
            })
    if out:
        write_table(
            os.path.join(out, "robustness.csv"),
            records,
            ["anharmonicity_deviation", "crowding_deviation"] + TABLE_COLUMNS,
        )
    return records


# -- WahWah ------------------------------------------------------------------------

WAHWAH_TARGET = TargetRotation(np.pi, 0.0)


def _wahwah_unitary(omega_x, scale, tg, params, grid=None):
    field = wahwah_field(omega_x, tg, params)
    return propagate_pair(field.with_scales(scale, 1.0), grid)


def wahwah_error(omega_x, tg, params, scale=1.0, grid=None):
    """1 - Phi of X (x) 1 after the best virtual-Z correction."""
    U = _wahwah_unitary(omega_x, scale, tg, params, grid)
    return max(0.0, 1.0 - virtual_z_fidelity(U, target_unitary(WAHWAH_TARGET))[0])


def model_omega_x(tg_bar, params, linear=False):
    d = params.crowding
    ratio = wahwah_linear_model(tg_bar) if linear or tg_bar <= 0.75 else wahwah_sideband_model(tg_bar)
    return ratio * d


def optimize_wahwah(tg_bar, params, starts=(1.0, 0.8, 1.2, 0.6), max_iter=400):
    """Nelder-Mead over (amplitude scale, omega_x) scoring the Z-blind fidelity.

    Returns ``(omega_x, scale, error)`` with the error after virtual-Z correction.
    """
    tg = tg_bar * TWO_PI / params.crowding
    grid = search_grid(tg)
    target = target_unitary(WAHWAH_TARGET)
    omega0 = model_omega_x(tg_bar, params)

    def cost(x):
        if x[0] <= 0 or x[1] <= 0:
            return math.inf
        U = _wahwah_unitary(x[1], x[0], tg, params, grid)
        return 1.0 - reduced_fidelity(U, target)[2]

    best = None
    for k in starts:
        res = nelder_mead(cost, np.array([1.0, k * omega0]), [0.05, 0.05 * params.crowding], max_iter, 1e-14)
        if best is None or res.fun < best.fun:
            best = res
    scale, omega_x = (float(v) for v in best.x)
    return omega_x, scale, wahwah_error(omega_x, tg, params, scale)


def wahwah_study(config: ExperimentConfig, out=None):
    """Optimized, piecewise-model, linear-model and Gaussian curves versus tg_bar."""
    params = config.params()
    records = []
    for tg_bar in config.sweep("tg_bar"):
        tg = tg_bar * TWO_PI / params.crowding
        wx_opt, scale, err_opt = optimize_wahwah(tg_bar, params)
        err_model = wahwah_error(model_omega_x(tg_bar, params), tg, params) if tg_bar > 0.75 else math.nan
        err_linear = wahwah_error(model_omega_x(tg_bar, params, linear=True), tg, params)
        U = propagate_pair(gaussian_baseline(tg, WAHWAH_TARGET, params))
        err_gauss = max(0.0, 1.0 - virtual_z_fidelity(U, target_unitary(WAHWAH_TARGET))[0])
        records.append({
            "tg_bar": tg_bar,
            "tg_ns": tg,
            "optimized": err_opt,
            "model": err_model,
            "linear": err_linear,
            "gaussian": err_gauss,
            "omega_x_opt_over_delta": wx_opt / params.crowding,
            "scale_opt": scale,
            "seed": config.seed,
            "config_hash": config.digest,
        })
    if out:
        write_table(os.path.join(out, "wahwah.csv"), records, list(records[0]) if records else [])
    return records


# -- filter study ------------------------------------------------------------------


def filter_comparison(field, target, spec):
    """Unfiltered, filtered and amplitude-retuned errors of one pulse."""
    res = retune_amplitudes(field, spec, target)
    return {
        "unfiltered": res.unfiltered_error,
        "filtered": res.filtered_error,
        "retuned": res.retuned_error,
        "scale1": res.scales[0],
        "scale2": res.scales[1],
    }


def filter_study(config: ExperimentConfig, out=None):
    """Optimize at each gate time, then filter and retune the result."""
    spec = config.filter_spec()
    target = config.target()
    store = RecordStore(os.path.join(out, "filter_pulses.jsonl") if out else None)
    records = []
    for tg in config.sweep("tg_ns"):
        coords = {"tg_ns": tg, "strategy": config.mode.value}
        rec = _run_points(config, [coords], store, 1)[0]
        field = PulseAnsatz.from_dict(rec["pulse"]).to_field(target, config.params(), config.exact_amplitudes)
        records.append({"tg_ns": tg, **filter_comparison(field, target, spec),
                        "seed": rec["seed"], "config_hash": config.digest})
    if out:
        write_table(os.path.join(out, "filter_study.csv"), records,
                    ["tg_ns", "unfiltered", "filtered", "retuned", "scale1", "scale2", "seed", "config_hash"])
    return records


# -- gate sequences ------------------------------------------------------------------

HADAMARD_SEQUENCE = ("Y90", "X180")


def hadamard_unitary():
    return np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


@dataclass(frozen=True)
class SequenceCheck:
    fidelity: float
    z_phases: tuple

    @property
    def error(self):
        return max(0.0, 1.0 - self.fidelity)


def _z_frame(p1, p2):
    def one(p):
        return np.diag([1.0, np.exp(1j * p), 1.0])

    return np.kron(one(p1), one(p2))


def compose_sequence(results, targets):
    """Score a time-ordered gate sequence against the product of its targets.

    Each gate is followed by the virtual-Z frame change that best aligns it
    with its own target, as done on hardware by phase-ramping later pulses.
    """
    if len(results) != len(targets) or not results:
        raise ValueError("need one target per simulated gate")
    total = np.eye(9, dtype=complex)
    goal = np.eye(9, dtype=complex)
    phases = []
    for res, tgt in zip(results, targets):
        U = res.unitary if isinstance(res, SimResult) else np.asarray(res)
        T = target_unitary(tgt)
        _, (p1, p2) = virtual_z_fidelity(U, T)
        phases.append((p1, p2))
        total = _z_frame(p1, p2) @ U @ total
        goal = T @ goal
    return SequenceCheck(gate_fidelity(total, goal), tuple(phases))


def sequence_targets(gates1, gates2):
    if len(gates1) != len(gates2):
        raise ValueError("both qubits need the same number of sequence steps")
    return [TargetRotation(GATES[a], GATES[b]) for a, b in zip(gates1, gates2)]

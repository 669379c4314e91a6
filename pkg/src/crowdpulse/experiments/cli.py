"""Command-line entry point: ``crowdpulse <subcommand> --config cfg.json``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from crowdpulse.experiments.config import ConfigError, default_config, load_config
from crowdpulse.experiments import studies
from crowdpulse.metrics import SimResult
from crowdpulse.propagator import PropagationGrid, export_trajectory, state_trajectory
from crowdpulse.pulses import export_waveform

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSERT = 3

log = logging.getLogger("crowdpulse")


class AssertionMiss(Exception):
    """A ``--assert`` threshold from the config's ``assert`` block was missed."""


def _check(label, value, limit):
    ok = value <= limit
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {value:.3e} <= {limit:.3e}", file=sys.stderr)
    return ok


def _enforce(config, enabled, values):
    """values: list of (label, assert key, measured)."""
    if not enabled:
        return
    limits = config.assertions
    ok = True
    for label, key, measured in values:
        if key in limits:
            ok &= _check(label, measured, limits[key])
    if not ok:
        raise AssertionMiss()


def _load_pulse(config, path):
    with open(path) as fh:
        result = SimResult.from_dict(json.load(fh))
    return studies.field_from_result(result)


def cmd_synthesize(config, args):
    result = studies.run_synthesis(config, args.out)
    print(f"gate_error={result.gate_error:.6e} leakage={result.leakage:.6e}")
    _enforce(config, args.assert_, [("gate error", "max_gate_error", result.gate_error),
                                    ("leakage", "max_leakage", result.leakage)])


def cmd_sweep_time(config, args):
    records = studies.sweep_gate_time(config, args.out)
    for r in records:
        print(f"{r['tg_ns']:g} {r['strategy']} {r['gate_error']:.6e}")
    hanning = [r for r in records if r["strategy"] == "off_resonant"]
    _enforce(config, args.assert_, [(f"off-resonant at {r['tg_ns']:g} ns", "max_gate_error", r["gate_error"])
                                    for r in hanning])


def cmd_speed_limit(config, args):
    _, fit = studies.sweep_speed_limit(config, args.out)
    if fit is None:
        print("no gate time reached the threshold", file=sys.stderr)
        if args.assert_:
            raise AssertionMiss()
        return
    print(f"alpha={fit.alpha:.4f} slope={fit.slope:.4f}")
    limits = config.assertions
    if args.assert_ and "alpha_range" in limits:
        lo, hi = limits["alpha_range"]
        ok = lo <= fit.alpha <= hi
        print(f"[{'PASS' if ok else 'FAIL'}] alpha {fit.alpha:.4f} in [{lo}, {hi}]", file=sys.stderr)
        if not ok:
            raise AssertionMiss()


def _pulse_for(config, args):
    path = config.sweep("pulse_file") if "pulse_file" in config.raw["sweep"] else None
    if path:
        return _load_pulse(config, path)
    result = studies.run_synthesis(config, args.out)
    return studies.field_from_result(result)


def cmd_robustness(config, args):
    field, target = _pulse_for(config, args)
    records = studies.sweep_robustness(config, field, target, args.out)
    worst = max(r["gate_error"] for r in records)
    print(f"points={len(records)} worst_gate_error={worst:.6e}")
    _enforce(config, args.assert_, [("worst robustness error", "max_gate_error", worst)])


def cmd_wahwah(config, args):
    records = studies.wahwah_study(config, args.out)
    for r in records:
        print(f"{r['tg_bar']:g} optimized={r['optimized']:.3e} model={r['model']:.3e} "
              f"linear={r['linear']:.3e} gaussian={r['gaussian']:.3e}")
    _enforce(config, args.assert_, [(f"optimized WahWah at {r['tg_bar']:g}", "max_gate_error", r["optimized"])
                                    for r in records])


def cmd_filter_study(config, args):
    records = studies.filter_study(config, args.out)
    for r in records:
        print(f"{r['tg_ns']:g} unfiltered={r['unfiltered']:.3e} filtered={r['filtered']:.3e} "
              f"retuned={r['retuned']:.3e}")
    _enforce(config, args.assert_, [(f"retuned at {r['tg_ns']:g} ns", "max_gate_error", r["retuned"])
                                    for r in records])


def cmd_sequence(config, args):
    gates1 = config.raw.get("sequence", {}).get("gates1", list(studies.HADAMARD_SEQUENCE))
    gates2 = config.raw.get("sequence", {}).get("gates2", list(studies.HADAMARD_SEQUENCE))
    targets = studies.sequence_targets(gates1, gates2)
    results = []
    for k, target in enumerate(targets):
        context = studies.context_from_config(config, target=target)
        opt = config.optimizer(seed=config.seed + k)
        result, _ = studies.synthesize(context, opt)
        print(f"step {k}: {gates1[k]} x {gates2[k]} gate_error={result.gate_error:.6e}")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            result.to_json(os.path.join(args.out, f"step{k}.json"))
        results.append(result)
    check = studies.compose_sequence(results, targets)
    print(f"composite_error={check.error:.6e}")
    _enforce(config, args.assert_, [("composite error", "max_gate_error", check.error)])


def cmd_export_waveform(config, args):
    if args.pulse:
        field, target = _load_pulse(config, args.pulse)
    else:
        result = studies.run_synthesis(config, None)
        field, target = studies.field_from_result(result)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    export_waveform(field, os.path.join(out, "waveform.csv"), args.dt)
    grid = PropagationGrid(field.tg)
    every = max(1, int(round(args.dt / grid.dt)))
    initial = [1.0] + [0.0] * 8
    export_trajectory(state_trajectory(field, initial, grid, every), os.path.join(out, "trajectory.csv"))
    print(f"wrote {os.path.join(out, 'waveform.csv')} and trajectory.csv")


COMMANDS = {
    "synthesize": (cmd_synthesize, "optimize one gate at one gate time"),
    "sweep-time": (cmd_sweep_time, "four strategies across gate times"),
    "speed-limit": (cmd_speed_limit, "(crowding, gate time) scan and speed-limit fit"),
    "robustness": (cmd_robustness, "fixed pulse over anharmonicity/crowding deviations"),
    "wahwah": (cmd_wahwah, "WahWah single-qubit study"),
    "filter-study": (cmd_filter_study, "hardware filter and amplitude retuning"),
    "sequence": (cmd_sequence, "compose a gate sequence with virtual Z"),
    "export-waveform": (cmd_export_waveform, "write waveform and trajectory CSVs"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="crowdpulse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON experiment config (defaults used when omitted)")
        p.add_argument("--seed", type=int, help="override the config seed (non-negative)")
        p.add_argument("--workers", type=int, help="parallel worker budget")
        p.add_argument("--out", help="output directory")
        p.add_argument("--assert", dest="assert_", action="store_true",
                       help="exit 3 when a threshold from the config 'assert' block is missed")
        p.add_argument("-v", "--verbose", action="store_true", help="progress lines on stderr")
        if name == "export-waveform":
            p.add_argument("--pulse", help="SimResult JSON holding the pulse to export")
            p.add_argument("--dt", type=float, default=0.1, help="sample spacing in ns")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        config = load_config(args.config) if args.config else default_config()
        overrides = {}
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            overrides["seed"] = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be at least 1")
            overrides["workers"] = args.workers
        if overrides:
            config = config.replace(**overrides)
        if args.out is None:
            args.out = config.out_dir
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command][0](config, args)
    except AssertionMiss:
        return EXIT_ASSERT
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

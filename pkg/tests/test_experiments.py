import json

import numpy as np
import pytest

from crowdpulse.experiments.config import ConfigError, default_config, expand_range, load_config, parse_config
from crowdpulse.experiments.store import RecordStore, point_key, point_seed, write_table
from crowdpulse.experiments.studies import (
    HADAMARD_SEQUENCE,
    compose_sequence,
    deviate,
    field_from_result,
    fit_speed_limit,
    hadamard_unitary,
    model_omega_x,
    robustness_error,
    sequence_targets,
    simulate,
    speed_limit_points,
    sweep_gate_time,
    sweep_robustness,
    sweep_speed_limit,
    synthesize,
    context_from_config,
)
from crowdpulse.metrics import SimResult
from crowdpulse.model import GATES, TargetRotation, mhz, qutrit_rotation, target_unitary
from crowdpulse.pulses import ControlField, HanningShape

TINY = {"optimizer": {"restarts": 1, "max_iter": 10}}


# -- config ----------------------------------------------------------------------------


def test_defaults_are_reference_device(table_one):
    cfg = default_config()
    p = cfg.params()
    assert p.omega1 == pytest.approx(table_one.omega1)
    assert p.crowding == pytest.approx(table_one.crowding)
    assert cfg.target() == TargetRotation(np.pi, np.pi)
    assert cfg.optimizer().detuning_start == pytest.approx(mhz(5.0))


def test_crowding_overrides_second_frequency():
    cfg = parse_config('{"system": {"crowding_MHz": 60}}')
    assert cfg.params().crowding == pytest.approx(mhz(60.0))


def test_explicit_angles():
    cfg = parse_config('{"target": {"theta1_rad": [0, -1.5707963267948966], "gate2": "X90"}}')
    assert cfg.target().theta1 == pytest.approx(GATES["Y90"])
    assert cfg.target().theta2 == pytest.approx(GATES["X90"])


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        ('{\n  "seed": 1,\n  "bogus": 2\n}', 3, "bogus"),
        ('{\n  "system": {\n    "omega1_GHz": 5.5,\n    "omega1_Ghz": 5\n  }\n}', 4, "omega1_Ghz"),
        ('{\n  "pulse": {\n    "tg_ns": -3\n  }\n}', 3, "tg_ns"),
        ('{\n  "seed": 1,\n  "seed": 2\n}', 3, "duplicate"),
        ('{\n  "seed": 1,\n  "workers": \n}', 4, "invalid JSON"),
        ('{\n  "pulse": {"mode": "fast"}\n}', 2, "mode"),
    ],
)
def test_config_errors_carry_lines(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "cfg.json")
    assert info.value.line == line
    assert str(info.value).startswith(f"cfg.json:{line}: ")
    assert fragment in str(info.value)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_load_config_reports_path(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{\n "nope": 1\n}\n')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert str(path) in str(info.value) and info.value.line == 2


def test_expand_range():
    assert expand_range({"start": 20, "stop": 30, "step": 2.5}) == [20, 22.5, 25, 27.5, 30]
    assert expand_range([1, 2]) == [1.0, 2.0]
    assert len(expand_range({"start": -0.06, "stop": 0.06, "step": 0.005})) == 25


def test_replace_revalidates():
    cfg = default_config()
    assert cfg.replace(seed=9).seed == 9
    assert cfg.replace(seed=9).digest != cfg.digest
    with pytest.raises(ConfigError):
        cfg.replace(seed=-1)


# -- store ------------------------------------------------------------------------------


def test_point_seed_and_key_stable():
    c = {"tg_ns": 30.0, "strategy": "resonant"}
    assert point_seed(1, c) == point_seed(1, dict(reversed(list(c.items()))))
    assert point_seed(1, c) != point_seed(2, c)
    assert point_key("abc", c) != point_key("abd", c)


def test_record_store_resumes_and_skips_torn_lines(tmp_path):
    path = tmp_path / "r.jsonl"
    store = RecordStore(str(path))
    store.put({"key": "a", "v": 1})
    store.put({"key": "b", "v": 2})
    with open(path, "a") as fh:
        fh.write('{"key": "c", "v"')
    again = RecordStore(str(path))
    assert len(again) == 2 and "a" in again and again.get("b")["v"] == 2


def test_write_table_format(tmp_path):
    path = write_table(tmp_path / "t.csv", [{"x": 1 / 3, "y": None}], ["x", "y"])
    assert path.read_text().splitlines() == ["x,y", "0.333333333333,"]


# -- sweeps -----------------------------------------------------------------------------


def test_gate_time_sweep_records_and_resume(tmp_path):
    cfg = default_config(sweep={"tg_ns": [20, 24], "strategies": ["gaussian", "derivative"]})
    records = sweep_gate_time(cfg, str(tmp_path))
    assert len(records) == 4
    assert [(r["tg_ns"], r["strategy"]) for r in records] == [
        (20, "gaussian"), (20, "derivative"), (24, "gaussian"), (24, "derivative")]
    assert all(abs(r["drag_ns"]) <= 3 for r in records if r["strategy"] == "derivative")
    lines = (tmp_path / "sweep_time.jsonl").read_text().splitlines()
    again = sweep_gate_time(cfg, str(tmp_path))
    assert (tmp_path / "sweep_time.jsonl").read_text().splitlines() == lines
    assert [r["gate_error"] for r in again] == [r["gate_error"] for r in records]
    header = (tmp_path / "sweep_time.csv").read_text().splitlines()[0]
    assert header == "tg_ns,strategy,gate_error,leakage,seed,config_hash"


def test_speed_limit_relative_grid(tmp_path):
    cfg = default_config(sweep={"crowding_MHz": [40, 80], "tg_period_fraction": [0.9, 1.2],
                                "threshold": 1.0, "stop_at_threshold": True}, **TINY)
    records, fit = sweep_speed_limit(cfg, str(tmp_path))
    assert len(records) == 2
    assert fit.alpha == pytest.approx(0.9, abs=1e-9)
    saved = json.loads((tmp_path / "speed_limit_fit.json").read_text())
    assert saved["crowding_MHz"] == [40, 80]


def test_speed_limit_fit_identity():
    d = np.array([30.0, 45.0, 60.0, 90.0])
    fit = fit_speed_limit(d, 1e3 / d)
    assert fit.alpha == pytest.approx(1.0, abs=1e-12)
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit_speed_limit(d, 0.8 * 1e3 / d).alpha == pytest.approx(0.8, abs=1e-12)
    with pytest.raises(ValueError):
        fit_speed_limit([], [])


def test_speed_limit_points():
    recs = [{"crowding_MHz": 30, "tg_ns": t, "gate_error": e}
            for t, e in ((20, 1e-2), (24, 5e-5), (28, 1e-6))]
    assert speed_limit_points(recs, 1e-4) == ([30], [24])


# -- robustness ------------------------------------------------------------------------


def _solved_field(params, tg=30.0):
    s1 = HanningShape((1, 0.3 - 0.2j, 0.1j), tg)
    s2 = HanningShape((1, -0.25j, 0.15), tg)
    return ControlField.solve(s1, s2, TargetRotation(np.pi, np.pi), params, 0.004, -0.003)


def test_deviate(table_one):
    assert deviate(table_one) is table_one
    p = deviate(table_one, 0.04, -0.02)
    assert p.omega1 == table_one.omega1
    assert p.anharmonicity == pytest.approx(1.04 * table_one.anharmonicity)
    assert p.crowding == pytest.approx(0.98 * table_one.crowding)


def test_zero_deviation_is_bit_exact(table_one):
    field = _solved_field(table_one)
    target = TargetRotation(np.pi, np.pi)
    nominal = simulate(field, target)
    assert robustness_error(field, target)[0] == nominal.gate_error


def test_carrier_frame_variant_differs(table_one):
    field = _solved_field(table_one)
    target = TargetRotation(np.pi, np.pi)
    a = robustness_error(field, target, 0.0, 0.02, keep="detunings")[0]
    b = robustness_error(field, target, 0.0, 0.02, keep="carriers")[0]
    assert a != b


def test_robustness_sweep_grid(table_one, tmp_path):
    cfg = default_config(sweep={"crowding_deviation": [-0.01, 0, 0.01], "anharmonicity_deviation": [0, 0.02]})
    field = _solved_field(table_one)
    recs = sweep_robustness(cfg, field, TargetRotation(np.pi, np.pi), str(tmp_path))
    assert len(recs) == 6
    assert len((tmp_path / "robustness.csv").read_text().splitlines()) == 7


# -- synthesis round trip -----------------------------------------------------------------


def test_synthesis_round_trip(tmp_path):
    cfg = default_config(pulse={"tg_ns": 24.0}, **TINY)
    result, field = synthesize(context_from_config(cfg), cfg.optimizer())
    back = SimResult.from_dict(json.loads(result.to_json()))
    rebuilt, target = field_from_result(back)
    assert target == cfg.target()
    np.testing.assert_allclose(rebuilt.chi(np.linspace(0, 24, 9)), field.chi(np.linspace(0, 24, 9)))
    assert result.extra["seed"] == cfg.seed and len(result.extra["restarts"]) == 1


# -- WahWah model -------------------------------------------------------------------------


def test_model_omega_x_branches(table_one):
    d = table_one.crowding
    for tg_bar in (1.25, 1.6, 2.0):
        assert model_omega_x(tg_bar, table_one) == pytest.approx(model_omega_x(tg_bar, table_one, linear=True))
    assert model_omega_x(1.0, table_one) / d < model_omega_x(1.0, table_one, linear=True) / d
    assert model_omega_x(0.6, table_one) == model_omega_x(0.6, table_one, linear=True)


# -- sequences ---------------------------------------------------------------------------


def test_hadamard_sequence_algebra():
    U = np.eye(3)
    for gate in HADAMARD_SEQUENCE:
        U = qutrit_rotation(GATES[gate]) @ U
    H = hadamard_unitary()
    overlap = np.trace(H.conj().T @ U[:2, :2])
    assert abs(overlap) == pytest.approx(2.0, abs=1e-14)


def test_compose_perfect_gates():
    targets = sequence_targets(list(HADAMARD_SEQUENCE), ["X90", "X90"])
    check = compose_sequence([target_unitary(t) for t in targets], targets)
    assert check.fidelity == pytest.approx(1.0, abs=1e-12)
    assert check.error < 1e-12


def test_compose_absorbs_frame_phases():
    targets = sequence_targets(["X90", "Y90"], ["X180", "Y90"])
    z = np.kron(np.diag([1, np.exp(0.4j), 1]), np.diag([1, np.exp(-1.1j), 1]))
    check = compose_sequence([z @ target_unitary(t) for t in targets], targets)
    assert check.fidelity == pytest.approx(1.0, abs=1e-10)


def test_sequence_validation():
    with pytest.raises(ValueError):
        sequence_targets(["X90"], [])
    with pytest.raises(ValueError):
        compose_sequence([], [])

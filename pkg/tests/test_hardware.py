import math

import numpy as np
import pytest

from crowdpulse.hardware import (
    AWG_OMEGA0,
    FilterSpec,
    apply_filter,
    filtered_error,
    filtered_grid,
    propagate_filtered,
    retune_amplitudes,
)
from crowdpulse.model import TWO_PI, TargetRotation
from crowdpulse.propagator import PropagationGrid, propagate_field
from crowdpulse.pulses import ControlField, HanningShape


def _pulse(params, tg=30.0):
    s1 = HanningShape((1, 0.3 - 0.2j, 0.1j), tg)
    s2 = HanningShape((1, -0.25j, 0.15), tg)
    return ControlField.solve(s1, s2, TargetRotation(np.pi, np.pi), params, 0.004, -0.003)


def test_spec_defaults_and_validation():
    spec = FilterSpec()
    assert spec.omega0 == AWG_OMEGA0
    assert spec.pad_length == pytest.approx(5.0 / AWG_OMEGA0)
    assert FilterSpec(math.inf).is_identity
    assert spec.response(0.0) == 1.0
    assert spec.response(AWG_OMEGA0) == pytest.approx(math.exp(-1))
    with pytest.raises(ValueError):
        FilterSpec(0.0)
    with pytest.raises(ValueError):
        FilterSpec(1.0, -1.0)


def test_dc_gain_periodic():
    x = np.full(256, 0.37)
    np.testing.assert_allclose(apply_filter(x, 0.1, FilterSpec(1.0, 0.0)), x, atol=1e-14)


@pytest.mark.parametrize("cycles", [1, 5, 12])
def test_sinusoid_scaled_by_response(cycles):
    n, dt = 512, 0.1
    t = np.arange(n) * dt
    omega = TWO_PI * cycles / (n * dt)
    spec = FilterSpec(AWG_OMEGA0, 0.0)
    y = apply_filter(np.cos(omega * t), dt, spec)
    np.testing.assert_allclose(y, spec.response(omega) * np.cos(omega * t), atol=1e-3)


def test_huge_bandwidth_is_transparent():
    t = np.linspace(0, 30, 3001)
    x = HanningShape((1, 0.4, -0.2), 30.0).envelope(t).real
    y = apply_filter(x, t[1] - t[0], FilterSpec(1e5))
    np.testing.assert_allclose(y, x, atol=1e-10)


def test_identity_filter_copies():
    x = np.arange(5.0)
    y = apply_filter(x, 0.1, FilterSpec(math.inf))
    np.testing.assert_array_equal(x, y)
    assert y is not x


def test_linearity(rng):
    a, b = rng.normal(size=(2, 300))
    f = FilterSpec(2.0)
    np.testing.assert_allclose(apply_filter(2 * a - 3 * b, 0.1, f),
                               2 * apply_filter(a, 0.1, f) - 3 * apply_filter(b, 0.1, f), atol=1e-12)


def test_real_in_real_out_and_complex_split(rng):
    a, b = rng.normal(size=(2, 200))
    f = FilterSpec(2.0)
    y = apply_filter(a + 1j * b, 0.1, f)
    assert np.isrealobj(apply_filter(a, 0.1, f))
    np.testing.assert_allclose(y.real, apply_filter(a, 0.1, f), atol=1e-13)
    np.testing.assert_allclose(y.imag, apply_filter(b, 0.1, f), atol=1e-13)


def test_energy_does_not_grow(rng):
    x = rng.normal(size=400)
    y = apply_filter(x, 0.1, FilterSpec(3.0, 0.0))
    assert np.sum(y**2) <= np.sum(x**2)


def test_time_symmetry():
    t = np.linspace(0, 20, 401)
    x = HanningShape((1,), 20.0).envelope(t).real
    y = apply_filter(x, t[1] - t[0], FilterSpec())
    np.testing.assert_allclose(y, y[::-1], atol=1e-13)


def test_filtered_grid_covers_ringing(table_one):
    field = _pulse(table_one)
    spec = FilterSpec()
    g = filtered_grid(field, spec)
    assert g.start == pytest.approx(-2 * spec.pad_length)
    assert g.tg == pytest.approx(30.0 + 4 * spec.pad_length)
    assert g.dt <= 0.01 + 1e-15
    assert filtered_grid(field, FilterSpec(math.inf)).start == 0.0


def test_identity_filter_matches_unfiltered(table_one):
    field = _pulse(table_one)
    U = propagate_filtered(field, FilterSpec(math.inf))
    V = propagate_field(field)
    np.testing.assert_array_equal(U[0], V[0])


def test_wide_filter_converges_to_unfiltered(table_one):
    """The leading filter effect is 1 - w^2/omega0^2: the error shift falls as omega0^-2."""
    field = _pulse(table_one)
    target = TargetRotation(np.pi, np.pi)
    plain = filtered_error(field, target, FilterSpec(math.inf))
    shifts = [abs(filtered_error(field, target, FilterSpec(TWO_PI * w)) - plain) for w in (20.0, 200.0)]
    assert shifts[1] < 1e-7
    assert shifts[0] / shifts[1] == pytest.approx(100.0, rel=0.05)


def test_retune(table_one):
    field = _pulse(table_one)
    target = TargetRotation(np.pi, np.pi)
    ident = retune_amplitudes(field, FilterSpec(math.inf), target)
    assert ident.scales == (1.0, 1.0)
    assert ident.unfiltered_error == ident.filtered_error == ident.retuned_error

    res = retune_amplitudes(field, FilterSpec(TWO_PI * 0.15), target, PropagationGrid(30.0, 1500), max_iter=60)
    assert all(0.8 <= s <= 1.25 for s in res.scales)
    assert res.retuned_error <= res.filtered_error

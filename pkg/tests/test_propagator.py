import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from crowdpulse.metrics import gate_fidelity
from crowdpulse.model import LEVELS, SystemParams, TargetRotation, embed, interaction_hamiltonian, target_unitary
from crowdpulse.propagator import (
    Method,
    PropagationGrid,
    export_trajectory,
    ladder_step_factors,
    magnus_terms,
    ordered_product,
    propagate_field,
    propagate_pair,
    propagate_qutrit,
    propagate_sampled,
    qutrit_sampler,
    state_trajectory,
)
from crowdpulse.pulses import ControlField, HanningShape

from conftest import random_field

SX = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex)
SY = np.array([[0, -1j, 0], [1j, 0, 0], [0, 0, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0, 0.0]).astype(complex)


def _unitarity(U):
    return np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))


# -- grid -------------------------------------------------------------------------


def test_grid_defaults_and_validation():
    g = PropagationGrid(30.0)
    assert g.steps == 4096 and g.method is Method.CF4
    assert PropagationGrid(100.0).steps == 10000
    assert PropagationGrid(10.0, 32, "midpoint").method is Method.MIDPOINT
    with pytest.raises(ValueError):
        PropagationGrid(0.0)
    with pytest.raises(ValueError):
        PropagationGrid(1.0, 8)
    with pytest.raises(ValueError):
        PropagationGrid(1.0, 32, "rk4").scheme


def test_sample_times_inside_cells():
    g = PropagationGrid(4.0, 16, start=-1.0)
    t = g.sample_times()
    assert t.shape == (2, 16)
    assert t.min() > -1.0 and t.max() < 3.0
    np.testing.assert_allclose(g.nodes[[0, -1]], [-1.0, 3.0])


# -- building blocks ----------------------------------------------------------------


def test_ordered_product_matches_loop(rng):
    F = rng.normal(size=(7, 3, 3)) + 1j * rng.normal(size=(7, 3, 3))
    ref = np.eye(3)
    for f in F:
        ref = f @ ref
    np.testing.assert_allclose(ordered_product(F), ref, rtol=1e-12, atol=1e-12)


def test_ladder_factor_matches_expm(rng):
    for _ in range(5):
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        H = np.zeros((3, 3), dtype=complex)
        H[1, 0], H[2, 1] = a, b
        H = H + H.conj().T
        U = ladder_step_factors(a, b, 0.7)
        np.testing.assert_allclose(U, expm(-0.7j * H), atol=1e-13)
    np.testing.assert_allclose(ladder_step_factors(0.0, 0.0, 0.3), np.eye(3), atol=0)


# -- propagation ------------------------------------------------------------------------


def test_unitarity(table_one, rng):
    for method in (Method.CF4, Method.MIDPOINT):
        U = propagate_pair(random_field(rng, table_one), PropagationGrid(20.0, 2000, method))
        assert _unitarity(U) < 1e-12


def test_tensor_product_matches_full_space(table_one, rng):
    field = random_field(rng, table_one, tg=10.0, scale=0.3)
    grid = PropagationGrid(10.0, 400)

    def full(t):
        return embed(*interaction_hamiltonian(field.params, field.Lambda1, complex(field.chi(t)), t))

    np.testing.assert_allclose(propagate_pair(field, grid), propagate_sampled(full, grid), atol=1e-10)


def test_fast_path_matches_generic_sampler(table_one, rng):
    field = random_field(rng, table_one, tg=10.0)
    grid = PropagationGrid(10.0, 300)
    U1, U2 = propagate_field(field, grid)
    np.testing.assert_allclose(U1, propagate_qutrit(qutrit_sampler(field, 0), grid), atol=1e-12)
    np.testing.assert_allclose(U2, propagate_qutrit(qutrit_sampler(field, 1), grid), atol=1e-12)


@pytest.mark.parametrize("theta", [np.pi, np.pi / 2, 2.3])
def test_rabi_oracle(theta):
    tg = 25.0
    shape = HanningShape((1, 0.4, -0.2), tg)
    a = theta / shape.fourier(0.0).real

    def H(t):
        return 0.5 * a * float(shape.envelope(t).real) * SX

    U = propagate_qutrit(H, PropagationGrid(tg))
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    np.testing.assert_allclose(U[:2, :2], [[c, -1j * s], [-1j * s, c]], atol=1e-9)


def test_midpoint_second_order(table_one, rng):
    field = random_field(rng, table_one, tg=20.0, scale=0.2)
    ref = propagate_pair(field, PropagationGrid(20.0, 8192))
    errs = [np.max(np.abs(propagate_pair(field, PropagationGrid(20.0, n, "midpoint")) - ref))
            for n in (256, 512, 1024)]
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_cf4_fourth_order(table_one, rng):
    field = random_field(rng, table_one, tg=20.0, scale=0.2)
    ref = propagate_pair(field, PropagationGrid(20.0, 16384))
    errs = [np.max(np.abs(propagate_pair(field, PropagationGrid(20.0, n)) - ref)) for n in (128, 256)]
    assert errs[0] / errs[1] >= 12


@pytest.mark.parametrize("tg", [30.0, 60.0])
def test_default_grid_is_converged(table_one, rng, tg):
    """Doubling the default steps moves the gate error by < 1e-10."""
    s1 = HanningShape(tuple(rng.normal(size=3) + 1j * rng.normal(size=3)), tg)
    s2 = HanningShape(tuple(rng.normal(size=3) + 1j * rng.normal(size=3)), tg)
    target = TargetRotation(np.pi, np.pi)
    field = ControlField.solve(s1, s2, target, table_one, 0.003, -0.002)
    grid = PropagationGrid(tg)
    T = target_unitary(target)
    e1 = 1 - gate_fidelity(propagate_pair(field, grid), T)
    e2 = 1 - gate_fidelity(propagate_pair(field, grid.refined()), T)
    assert abs(e1 - e2) < 1e-10


def test_rk4_agrees(table_one, rng):
    field = random_field(rng, table_one, tg=8.0)
    U_rk = propagate_pair(field, PropagationGrid(8.0, 1600, "rk4"))
    assert np.max(np.abs(U_rk - propagate_pair(field, PropagationGrid(8.0)))) < 1e-8


# -- Magnus ---------------------------------------------------------------------------


def test_magnus_two_segment_oracle():
    a, b, tg = 0.03, -0.05, 12.0

    def H(t):
        return a * SX if t < tg / 2 else b * SY

    terms = magnus_terms(H, PropagationGrid(tg, 64))
    np.testing.assert_allclose(terms.theta0, tg / 2 * (a * SX + b * SY), atol=1e-14)
    np.testing.assert_allclose(terms.theta1, -(a * b * tg**2 / 4) * SZ, atol=1e-14)


def test_magnus_grid_halving(table_one, rng):
    field = random_field(rng, table_one, tg=25.0, scale=0.05)
    grid = PropagationGrid(25.0, 1024)
    a = magnus_terms(qutrit_sampler(field, 0), grid).theta1
    b = magnus_terms(qutrit_sampler(field, 0), grid.refined()).theta1
    assert np.max(np.abs(a - b)) < 1e-8 * np.max(np.abs(b))


def test_magnus_weak_pulse(table_one, rng):
    field = random_field(rng, table_one, tg=20.0, scale=0.01)
    grid = PropagationGrid(20.0, 2000)
    terms = magnus_terms(qutrit_sampler(field, 0), grid)
    assert terms.convergent
    U1, _ = propagate_field(field, grid)
    assert np.max(np.abs(terms.unitary(1) - U1)) < 1e-3
    assert np.max(np.abs(terms.unitary(1) - U1)) < np.max(np.abs(terms.unitary(0) - U1))


# -- trajectories -------------------------------------------------------------------


def test_trajectory(table_one, rng, tmp_path):
    field = random_field(rng, table_one, tg=10.0)
    grid = PropagationGrid(10.0, 1000)
    psi0 = np.zeros(9)
    psi0[0] = 1.0
    samples = state_trajectory(field, psi0, grid, every=100)
    assert len(samples) == 11
    assert samples[0].t == 0.0 and samples[-1].t == pytest.approx(10.0)
    for s in samples:
        assert np.linalg.norm(s.state) == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= s.p_comp <= 1.0 + 1e-12
    np.testing.assert_allclose(samples[-1].state, propagate_pair(field, grid) @ psi0, atol=1e-12)
    total = sum(samples[-1].qutrit_population(0, k) for k in range(LEVELS))
    assert total == pytest.approx(1.0)

    path = export_trajectory(samples, tmp_path / "traj.csv")
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "t_ns" and rows[0][-1] == "p_comp" and len(rows[0]) == 20
    assert len(rows) == 12


def test_trajectory_rejects_bad_state(table_one, rng):
    with pytest.raises(ValueError):
        state_trajectory(random_field(rng, table_one), np.ones(9))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(5.0, 40.0), st.floats(0.01, 0.5))
def test_unitarity_property(seed, tg, scale):
    rng = np.random.default_rng(seed)
    field = random_field(rng, SystemParams.table_one(), tg=tg, scale=scale)
    U1, U2 = propagate_field(field, PropagationGrid(tg, 512))
    assert _unitarity(U1) < 1e-12 and _unitarity(U2) < 1e-12

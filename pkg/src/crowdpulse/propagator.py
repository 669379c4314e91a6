"""Time-ordered propagation and low-order Magnus terms.

The interaction-frame qutrit Hamiltonian is a zero-diagonal ladder, so
``H^3 = r^2 H`` with ``r^2 = |h10|^2 + |h21|^2`` and every exponential of a
linear combination of such Hamiltonians has the exact closed form
``1 - i sin(rh)/r H + (cos(rh) - 1)/r^2 H^2``.  Each factor is therefore
unitary to rounding.  Arbitrary samplers go through a batched Hermitian
eigendecomposition instead.

Schemes: piecewise-constant midpoint (2nd order), the two-exponential
commutator-free Magnus scheme (4th order, default) and classical RK4 on U.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from crowdpulse._kernels import ladder_propagate
from crowdpulse._validation import check_hermitian, check_state
from crowdpulse.model import COMPUTATIONAL, LEVELS, eigenfrequencies, interaction_hamiltonian

DEFAULT_MIN_STEPS = 4096
DEFAULT_MAX_DT = 0.01


class Method(enum.Enum):
    MIDPOINT = "midpoint"
    CF4 = "cf4"
    RK4 = "rk4"


_R3 = math.sqrt(3.0)
# (sample offsets within a step, exponent weights applied in order)
_SCHEMES = {
    Method.MIDPOINT: (np.array([0.5]), np.array([[1.0]])),
    Method.CF4: (
        np.array([0.5 - _R3 / 6.0, 0.5 + _R3 / 6.0]),
        np.array([[0.25 + _R3 / 6.0, 0.25 - _R3 / 6.0], [0.25 - _R3 / 6.0, 0.25 + _R3 / 6.0]]),
    ),
}


def default_steps(duration):
    return max(DEFAULT_MIN_STEPS, math.ceil(duration / DEFAULT_MAX_DT))


@dataclass(frozen=True)
class PropagationGrid:
    """Uniform grid of ``steps`` cells over ``[start, start + tg]``."""

    tg: float
    steps: int = None
    method: Method = Method.CF4
    start: float = 0.0

    def __post_init__(self):
        if not self.tg > 0:
            raise ValueError("grid duration must be positive")
        steps = default_steps(self.tg) if self.steps is None else int(self.steps)
        if steps < 16:
            raise ValueError("at least 16 steps are required")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "method", Method(self.method))

    @property
    def dt(self):
        return self.tg / self.steps

    @property
    def midpoints(self):
        return self.start + (np.arange(self.steps) + 0.5) * self.dt

    @property
    def nodes(self):
        return self.start + np.arange(self.steps + 1) * self.dt

    @property
    def scheme(self):
        try:
            return _SCHEMES[self.method]
        except KeyError:
            raise ValueError(f"{self.method.value} is not an exponential scheme") from None

    def sample_times(self):
        """(S, steps) times at which the scheme samples the drive."""
        offsets, _ = self.scheme
        return self.start + (np.arange(self.steps)[None, :] + offsets[:, None]) * self.dt

    def refined(self, factor=2):
        return PropagationGrid(self.tg, self.steps * factor, self.method, self.start)


def ordered_product(factors):
    """F[n-1] @ ... @ F[1] @ F[0] along axis -3, by pairwise reduction."""
    F = np.asarray(factors)
    while F.shape[-3] > 1:
        if F.shape[-3] % 2:
            last = F[..., -1:, :, :]
            F = np.concatenate([F[..., 1:-1:2, :, :] @ F[..., 0:-1:2, :, :], last], axis=-3)
        else:
            F = F[..., 1::2, :, :] @ F[..., 0::2, :, :]
    return F[..., 0, :, :]


def ladder_step_factors(h10, h21, h):
    """exp(-i H h) for zero-diagonal ladders with H[1,0]=h10, H[2,1]=h21."""
    h10 = np.asarray(h10, dtype=complex)
    h21 = np.asarray(h21, dtype=complex)
    a2, b2 = np.abs(h10) ** 2, np.abs(h21) ** 2
    rh = np.sqrt(a2 + b2) * h
    s = h * np.sinc(rh / np.pi)
    c = -0.5 * h**2 * np.sinc(rh / (2.0 * np.pi)) ** 2
    U = np.zeros(h10.shape + (LEVELS, LEVELS), dtype=complex)
    U[..., 0, 0] = 1.0 + c * a2
    U[..., 1, 1] = 1.0 + c * (a2 + b2)
    U[..., 2, 2] = 1.0 + c * b2
    U[..., 1, 0] = -1j * s * h10
    U[..., 0, 1] = -1j * s * np.conj(h10)
    U[..., 2, 1] = -1j * s * h21
    U[..., 1, 2] = -1j * s * np.conj(h21)
    U[..., 2, 0] = c * h21 * h10
    U[..., 0, 2] = c * np.conj(h21 * h10)
    return U


def ladder_couplings(chi_values, times, params, Lambda1):
    """(h10, h21), each of shape (2,) + times.shape: qutrit axis first."""
    detunings = eigenfrequencies(params, Lambda1).as_array()
    lam = np.array(params.lambdas)
    times = np.asarray(times, dtype=float)
    half_chi = 0.5 * np.asarray(chi_values)
    extra = (1,) * times.ndim
    h10 = half_chi * lam[:, 0].reshape((2,) + extra) * np.exp(1j * detunings[:, 0].reshape((2,) + extra) * times)
    h21 = half_chi * lam[:, 1].reshape((2,) + extra) * np.exp(1j * detunings[:, 1].reshape((2,) + extra) * times)
    return h10, h21


def propagate_tones(w1, w2, gamma, grid, params, Lambda1):
    """(U1, U2) for tone envelopes a_j W_j sampled at ``grid.sample_times()``."""
    offsets, coeffs = grid.scheme
    w1 = np.ascontiguousarray(np.broadcast_to(w1, (len(offsets), grid.steps)), dtype=complex)
    w2 = np.ascontiguousarray(np.broadcast_to(w2, (len(offsets), grid.steps)), dtype=complex)
    t_first = grid.start + offsets * grid.dt
    det = eigenfrequencies(params, Lambda1).as_array()
    lam = np.array(params.lambdas, dtype=float)
    U = ladder_propagate(w1, w2, float(gamma), t_first, grid.dt, coeffs, det, lam)
    return U[0], U[1]


def field_grid(field, grid=None):
    return PropagationGrid(field.tg) if grid is None else grid


def propagate_field(field, grid=None):
    """(U1, U2) interaction-frame propagators of a control field."""
    grid = field_grid(field, grid)
    if grid.method is Method.RK4:
        return tuple(propagate_qutrit(qutrit_sampler(field, k), grid) for k in range(2))
    w1, w2 = field.components(grid.sample_times())
    return propagate_tones(w1, w2, field.gamma, grid, field.params, field.Lambda1)


def propagate_pair(field, grid=None):
    """9x9 interaction-frame propagator U1 (x) U2."""
    U1, U2 = propagate_field(field, grid)
    return np.kron(U1, U2)


def qutrit_sampler(field, k):
    """t -> interaction-frame Hamiltonian of qutrit ``k`` under ``field``."""
    params, Lambda1 = field.params, field.Lambda1

    def sampler(t):
        return interaction_hamiltonian(params, Lambda1, complex(field.chi(t)), t)[k]

    return sampler


def _sample(sampler, times):
    H = np.array([sampler(t) for t in np.ravel(times)], dtype=complex)
    H = H.reshape(np.shape(times) + H.shape[-2:])
    return check_hermitian(H)


def _expm_hermitian(H, h):
    """exp(-i H h) for a stack of Hermitian matrices."""
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * h)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))


def propagate_sampled(sampler, grid):
    """Time-ordered exponential of an arbitrary Hermitian sampler ``t -> H(t)``."""
    if grid.method is Method.RK4:
        return _rk4(sampler, grid)
    _, coeffs = grid.scheme
    H = _sample(sampler, grid.sample_times())  # (S, n, d, d)
    exponents = np.einsum("es,skij->keij", coeffs, H)
    n, E = exponents.shape[:2]
    factors = _expm_hermitian(exponents.reshape((n * E,) + H.shape[-2:]), grid.dt)
    return ordered_product(factors)


def _rk4(sampler, grid):
    h = grid.dt
    nodes = grid.nodes
    H_next = check_hermitian(sampler(nodes[0]))
    U = np.eye(H_next.shape[0], dtype=complex)
    for t in nodes[:-1]:
        H0 = H_next
        Hm = check_hermitian(sampler(t + 0.5 * h))
        H_next = check_hermitian(sampler(t + h))
        k1 = -1j * H0 @ U
        k2 = -1j * Hm @ (U + 0.5 * h * k1)
        k3 = -1j * Hm @ (U + 0.5 * h * k2)
        k4 = -1j * H_next @ (U + h * k3)
        U = U + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return U


def propagate_qutrit(hamiltonian, grid):
    """U(tg) of a single qutrit for a sampler ``t -> 3x3 Hermitian``."""
    U = propagate_sampled(hamiltonian, grid)
    if U.shape != (LEVELS, LEVELS):
        raise ValueError("qutrit sampler must return 3x3 matrices")
    return U


@dataclass(frozen=True)
class MagnusTerms:
    theta0: np.ndarray
    theta1: np.ndarray
    norm_integral: float

    @property
    def convergent(self):
        """Sufficient convergence condition int ||H|| dt < pi."""
        return self.norm_integral < np.pi

    def unitary(self, order=1):
        exponent = self.theta0 if order == 0 else self.theta0 + self.theta1
        return expm(-1j * exponent)


_R15 = math.sqrt(15.0)
# three-stage Gauss-Legendre collocation: nodes, weights, stage integration matrix
_GL3_C = np.array([0.5 - _R15 / 10.0, 0.5, 0.5 + _R15 / 10.0])
_GL3_B = np.array([5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0])
_GL3_A = np.array(
    [
        [5.0 / 36.0, 2.0 / 9.0 - _R15 / 15.0, 5.0 / 36.0 - _R15 / 30.0],
        [5.0 / 36.0 + _R15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - _R15 / 24.0],
        [5.0 / 36.0 + _R15 / 30.0, 2.0 / 9.0 + _R15 / 15.0, 5.0 / 36.0],
    ]
)


def magnus_terms(hamiltonian, grid):
    """First two Magnus terms by Gauss-Legendre collocation on each grid cell.

    ``Theta1 = -(i/2) int [H(t), A(t)] dt`` with ``A(t) = int_0^t H``; A is
    carried across cells exactly and within a cell by the collocation
    weights.  Only cell-interior points are sampled, and each stage row of
    weights sums to its node offset, so a drive that is constant on every
    cell is integrated exactly.
    """
    h = grid.dt
    times = grid.start + (np.arange(grid.steps)[:, None] + _GL3_C[None, :]) * h
    H = _sample(hamiltonian, times)  # (n, 3, d, d)
    cell = h * np.einsum("s,nsij->nij", _GL3_B, H)
    theta0 = cell.sum(axis=0)
    A_start = np.cumsum(cell, axis=0) - cell
    A = A_start[:, None] + h * np.einsum("rs,nsij->nrij", _GL3_A, H)
    comm = H @ A - A @ H
    theta1 = -0.5j * h * np.einsum("s,nsij->ij", _GL3_B, comm)
    norms = np.linalg.norm(H, ord=2, axis=(2, 3))
    return MagnusTerms(theta0, theta1, float(h * np.einsum("s,ns->", _GL3_B, norms)))


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    state: np.ndarray
    p_comp: float

    def qutrit_population(self, k, level):
        amps = self.state.reshape(LEVELS, LEVELS)
        probs = np.abs(amps) ** 2
        return float(probs[level, :].sum() if k == 0 else probs[:, level].sum())


def state_trajectory(field, initial, grid=None, every=1):
    """Sampled evolution of a 9-dim interaction-frame state.

    Returns one :class:`TrajectorySample` per ``every`` grid cells plus the
    initial and final states.
    """
    grid = field_grid(field, grid)
    psi = check_state(initial)
    _, coeffs = grid.scheme
    times = grid.sample_times()
    h10, h21 = ladder_couplings(field.chi(times), times, field.params, field.Lambda1)
    # (2, E, n) combined ladder entries per exponential
    a = np.einsum("es,qsn->qen", coeffs, h10)
    b = np.einsum("es,qsn->qen", coeffs, h21)
    factors = ladder_step_factors(a, b, grid.dt)
    Psi = psi.reshape(LEVELS, LEVELS)
    nodes = grid.nodes

    def record(k, Psi):
        state = Psi.ravel().copy()
        p_comp = float(np.sum(np.abs(state[COMPUTATIONAL]) ** 2))
        return TrajectorySample(float(nodes[k]), state, p_comp)

    samples = [record(0, Psi)]
    for k in range(grid.steps):
        for e in range(coeffs.shape[0]):
            Psi = factors[0, e, k] @ Psi @ factors[1, e, k].T
        if (k + 1) % every == 0 or k + 1 == grid.steps:
            samples.append(record(k + 1, Psi))
    return samples


def export_trajectory(samples, path):
    header = ["t_ns"]
    for j in range(LEVELS):
        for k in range(LEVELS):
            header += [f"re_{j}{k}", f"im_{j}{k}"]
    header.append("p_comp")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in samples:
            row = [s.t]
            for amp in s.state:
                row += [amp.real, amp.imag]
            row.append(s.p_comp)
            writer.writerow([f"{v:.11e}" for v in row])
    return path

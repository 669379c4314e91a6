"""Two-qutrit transmon model: parameters, frames, Hamiltonians and targets.

All frequencies are angular (rad/ns) and all times are in ns.  Cyclic
values (GHz/MHz) are converted only at the configuration boundary via
:func:`ghz` and :func:`mhz`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * np.pi
LEVELS = 3

# indices of |00>, |01>, |10>, |11> in the 9-dim product basis |j,k> -> 3j+k
COMPUTATIONAL = np.array([0, 1, 3, 4])


def ghz(value):
    """Cyclic GHz to rad/ns."""
    return TWO_PI * value


def mhz(value):
    """Cyclic MHz to rad/ns."""
    return TWO_PI * value * 1e-3


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the two crowded transmons.

    Parameters
    ----------
    omega1, omega2 : float
        Qubit transition frequencies (rad/ns).
    anharmonicity : float
        Common anharmonicity Delta (rad/ns), negative for transmons.
    lambdas : tuple of tuple of float
        ``lambdas[k] = (lambda_1, lambda_2)`` relative dipole strengths of
        the working and leakage transitions of qutrit ``k``.

    The crowding frequency delta is derived from
    ``omega2 + anharmonicity = omega1 + delta`` and is never stored.
    """

    omega1: float
    omega2: float
    anharmonicity: float
    lambdas: tuple = ((1.0, np.sqrt(2.0)), (1.0, np.sqrt(2.0)))

    def __post_init__(self):
        lambdas = tuple(tuple(float(v) for v in pair) for pair in self.lambdas)
        if len(lambdas) != 2 or any(len(pair) != 2 for pair in lambdas):
            raise ValueError("lambdas must be two (lambda_1, lambda_2) pairs")
        object.__setattr__(self, "lambdas", lambdas)
        if self.anharmonicity == 0:
            raise ValueError("anharmonicity must be nonzero")
        if self.crowding <= 0:
            raise ValueError(
                f"crowding frequency must be positive, got {self.crowding:.6g} rad/ns"
            )
        if min(min(pair) for pair in lambdas) <= 0:
            raise ValueError("lambda values must be positive")

    @property
    def crowding(self):
        """delta = omega2 + Delta - omega1 (rad/ns)."""
        return self.omega2 + self.anharmonicity - self.omega1

    @classmethod
    def from_crowding(cls, omega1, anharmonicity, crowding, lambdas=None):
        """Build from (omega1, Delta, delta); omega2 follows from the crowding relation."""
        kwargs = {} if lambdas is None else {"lambdas": lambdas}
        return cls(omega1, omega1 + crowding - anharmonicity, anharmonicity, **kwargs)

    @classmethod
    def table_one(cls):
        """Reference parameters: 5.508/5.903 GHz, Delta = -350 MHz, delta = 45 MHz."""
        return cls(ghz(5.508), ghz(5.903), mhz(-350.0))

    def with_crowding(self, crowding):
        """Same omega1 and Delta, new delta (omega2 moves)."""
        return SystemParams.from_crowding(
            self.omega1, self.anharmonicity, crowding, self.lambdas
        )

    def with_anharmonicity(self, anharmonicity):
        """Same omega1 and delta, new Delta (omega2 moves to keep delta)."""
        return SystemParams.from_crowding(
            self.omega1, anharmonicity, self.crowding, self.lambdas
        )


@dataclass(frozen=True)
class EigenFrequencies:
    """Interaction-frame transition detunings delta_j^(k)."""

    d11: float
    d21: float
    d12: float
    d22: float

    def as_array(self):
        """Shape (2, 2): row k is qutrit k, column j-1 is transition j."""
        return np.array([[self.d11, self.d21], [self.d12, self.d22]])


def eigenfrequencies(params, Lambda1):
    """Transition detunings of both qutrits in the interaction frame."""
    Delta, delta = params.anharmonicity, params.crowding
    return EigenFrequencies(
        d11=-Lambda1,
        d21=Delta - Lambda1,
        d12=delta - Delta - Lambda1,
        d22=delta - Lambda1,
    )


class FrameKind(enum.Enum):
    ROTATING = "rotating"
    INTERACTION = "interaction"


@dataclass(frozen=True)
class FrameSpec:
    """Diagonal frame R(t) = sum_j exp(-i w_j^(k) t) |j><j| per qutrit.

    ``frequencies`` has shape (2, 3): row k holds w_0^(k), w_1^(k), w_2^(k).
    """

    kind: FrameKind
    frequencies: np.ndarray = field(repr=False)

    @classmethod
    def rotating(cls, omega_d):
        levels = np.arange(LEVELS, dtype=float)
        return cls(FrameKind.ROTATING, np.vstack([levels * omega_d] * 2))

    @classmethod
    def interaction(cls, params):
        rows = []
        for omega in (params.omega1, params.omega2):
            rows.append([0.0, omega, 2.0 * omega + params.anharmonicity])
        return cls(FrameKind.INTERACTION, np.array(rows))

    def diagonal(self, t):
        """Diagonal of R(t) on the 9-dim product space."""
        phases = np.exp(-1j * self.frequencies * t)
        return np.kron(phases[0], phases[1])


def transform_frame(U, frame, tg):
    """Map a unitary between frames: R(tg) U R(0)^dagger with R(0) = 1."""
    U = np.asarray(U, dtype=complex)
    return frame.diagonal(tg)[:, None] * U * np.conj(frame.diagonal(0.0))[None, :]


def _ladder(h10, h21):
    """3x3 Hermitian with (1,0)=h10, (2,1)=h21, zero diagonal."""
    H = np.zeros((LEVELS, LEVELS), dtype=complex)
    H[1, 0] = h10
    H[2, 1] = h21
    H[0, 1] = np.conj(h10)
    H[1, 2] = np.conj(h21)
    return H


def interaction_hamiltonian(params, Lambda1, chi, t):
    """Per-qutrit interaction-frame Hamiltonians (H^(1), H^(2)) at time t.

    The two-qutrit generator is ``H1 (x) 1 + 1 (x) H2``.
    """
    detunings = eigenfrequencies(params, Lambda1).as_array()
    out = []
    for k in range(2):
        lam1, lam2 = params.lambdas[k]
        h10 = 0.5 * chi * lam1 * np.exp(1j * detunings[k, 0] * t)
        h21 = 0.5 * chi * lam2 * np.exp(1j * detunings[k, 1] * t)
        out.append(_ladder(h10, h21))
    return tuple(out)


def embed(H1, H2):
    """Two-qutrit generator H1 (x) 1 + 1 (x) H2."""
    eye = np.eye(LEVELS)
    return np.kron(H1, eye) + np.kron(eye, H2)


def rotating_hamiltonian(params, Lambda1, Lambda2, chi, t):
    """9x9 rotating-frame Hamiltonian at the first carrier omega_d1 (after RWA).

    ``Lambda2`` and ``t`` only enter through ``chi``, which the caller
    evaluates; they are accepted so the signature mirrors the field model.
    """
    del Lambda2, t
    Delta, delta = params.anharmonicity, params.crowding
    diag1 = np.diag([0.0, -Lambda1, Delta - 2.0 * Lambda1]).astype(complex)
    diag2 = np.diag(
        [0.0, delta - Delta - Lambda1, 2.0 * delta - Delta - 2.0 * Lambda1]
    ).astype(complex)
    couplings = []
    for k in range(2):
        lam1, lam2 = params.lambdas[k]
        couplings.append(_ladder(0.5 * chi * lam1, 0.5 * chi * lam2))
    return embed(diag1 + couplings[0], diag2 + couplings[1])


def rotating_frame_offsets(params, Lambda1):
    """Diagonal of the drift in the omega_d1 rotating frame, per qutrit (2, 3)."""
    Delta, delta = params.anharmonicity, params.crowding
    return np.array(
        [
            [0.0, -Lambda1, Delta - 2.0 * Lambda1],
            [0.0, delta - Delta - Lambda1, 2.0 * delta - Delta - 2.0 * Lambda1],
        ]
    )


@dataclass(frozen=True)
class TargetRotation:
    """Complex rotation angles of both qubits.

    ``theta = a e^{i phi}`` rotates by ``a`` about ``cos(phi) X - sin(phi) Y``,
    so a positive real angle is an X rotation and ``-1j * a`` is a standard
    Y rotation by ``a``.
    """

    theta1: complex = 0.0
    theta2: complex = 0.0

    def __post_init__(self):
        for name in ("theta1", "theta2"):
            value = complex(getattr(self, name))
            if not np.isfinite(value.real) or not np.isfinite(value.imag):
                raise ValueError(f"{name} must be finite")
            if abs(value) > TWO_PI + 1e-12:
                raise ValueError(
                    f"|{name}| = {abs(value):.6g} exceeds 2*pi; sequence gates instead"
                )
            object.__setattr__(self, name, value)

    @property
    def thetas(self):
        return (self.theta1, self.theta2)

    def swapped(self):
        return replace(self, theta1=self.theta2, theta2=self.theta1)


# AllXY-style single-qubit names -> complex angle (standard Pauli-axis sense)
GATES = {
    "I": 0.0,
    "X180": np.pi,
    "Y180": -1j * np.pi,
    "X90": np.pi / 2,
    "Y90": -1j * np.pi / 2,
    "mX90": -np.pi / 2,
    "mY90": 1j * np.pi / 2,
    "mX180": -np.pi,
    "mY180": 1j * np.pi,
}


def named_target(gate1, gate2):
    try:
        return TargetRotation(GATES[gate1], GATES[gate2])
    except KeyError as exc:
        raise ValueError(f"unknown gate name {exc.args[0]!r}; known: {sorted(GATES)}") from None


def qutrit_rotation(theta):
    """exp(-i/2 [[0, theta, 0], [theta*, 0, 0], [0, 0, 0]])."""
    theta = complex(theta)
    angle = abs(theta)
    U = np.eye(LEVELS, dtype=complex)
    if angle == 0.0:
        return U
    phase = theta / angle
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    U[0, 0] = U[1, 1] = c
    U[0, 1] = -1j * s * phase
    U[1, 0] = -1j * s * np.conj(phase)
    return U


def target_unitary(target):
    """9x9 goal unitary; the leakage level of each qutrit is left as identity."""
    return np.kron(qutrit_rotation(target.theta1), qutrit_rotation(target.theta2))

"""Gate fidelities, leakage and Z-phase bookkeeping."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from crowdpulse.model import COMPUTATIONAL, LEVELS, TWO_PI

SCHEMA_VERSION = 1


def _comp_block(U):
    U = np.asarray(U, dtype=complex)
    return U[np.ix_(COMPUTATIONAL, COMPUTATIONAL)]


def gate_fidelity(U, target):
    """|Tr(T^dagger U)|^2 / 16 over the four computational states."""
    overlap = np.trace(_comp_block(target).conj().T @ _comp_block(U))
    return float(abs(overlap) ** 2 / 16.0)


def reduced_fidelity(U, target):
    """(Phi_{*,0}, Phi_{*,1}, Phi_avg), blind to qubit-2 relative phases.

    ``Phi_{*,i}`` sums the diagonal of ``T^dagger U`` over ``|0,i>, |1,i>``.
    """
    M = _comp_block(target).conj().T @ _comp_block(U)
    # computational order |00>, |01>, |10>, |11>: qubit-2 state i sits at i and 2+i
    phis = [abs(M[i, i] + M[2 + i, 2 + i]) ** 2 / 4.0 for i in (0, 1)]
    return float(phis[0]), float(phis[1]), float(0.5 * (phis[0] + phis[1]))


def _leak_populations(U, qutrit):
    U = np.asarray(U, dtype=complex)
    idx = np.arange(LEVELS**2).reshape(LEVELS, LEVELS)
    leak = idx[:, 2] if qutrit == 1 else idx[2, :]
    return np.sum(np.abs(U[np.ix_(leak, COMPUTATIONAL)]) ** 2, axis=0)


def leakage_error(U, qutrit=1):
    """Mean population left in level 2 of ``qutrit`` (0 or 1; default qubit 2)."""
    return float(np.mean(_leak_populations(U, qutrit)))


def worst_case_leakage(U, qutrit=1):
    return float(np.max(_leak_populations(U, qutrit)))


def leakage_phases(U):
    """Phase picked up by |22> relative to |00>; reported, never scored."""
    U = np.asarray(U, dtype=complex)
    return float(np.angle(U[8, 8] * np.conj(U[0, 0])))


def _wrap(phase):
    """Reduce to (-pi, pi]."""
    wrapped = np.mod(phase + np.pi, TWO_PI) - np.pi
    return np.pi if wrapped == -np.pi else float(wrapped)


def z_error_phases(params, Lambda1, tg):
    """Z angles left by returning from the interaction frame, in [0, 2 pi)."""
    omega_d1 = params.omega1 + Lambda1
    phi1 = (omega_d1 - Lambda1) * tg / 2.0
    phi2 = (omega_d1 + params.crowding - params.anharmonicity - Lambda1) * tg / 2.0
    return float(np.mod(phi1, TWO_PI)), float(np.mod(phi2, TWO_PI))


@dataclass(frozen=True)
class ZCorrection:
    """Areas of the Z controls that undo the frame phases, in (-pi, pi]."""

    area1: float
    area2: float

    def unitary(self):
        """exp(i area Z) on each qubit's computational levels; level 2 untouched."""
        def one(area):
            return np.diag([np.exp(1j * area), np.exp(-1j * area), 1.0])

        return np.kron(one(self.area1), one(self.area2))


def z_correction(params, Lambda1, tg):
    phi1, phi2 = z_error_phases(params, Lambda1, tg)
    return ZCorrection(_wrap(-phi1), _wrap(-phi2))


def virtual_z_fidelity(U, target):
    """max over post-gate Z rotations of both qubits of :func:`gate_fidelity`.

    Returns ``(fidelity, (phi1, phi2))`` where the corrected gate is
    ``diag(1, e^{i phi2}) (x) ... `` applied after ``U`` up to global phase.
    """
    M = _comp_block(U) @ _comp_block(target).conj().T
    d = np.diag(M)
    # Tr(D M) = (d00 + e^{i p1} d10) + e^{i p2} (d01 + e^{i p1} d11); p2 aligns the halves
    def neg(p1):
        z = np.exp(1j * p1)
        return -(abs(d[0] + z * d[2]) + abs(d[1] + z * d[3]))

    grid = np.linspace(-np.pi, np.pi, 73)
    p0 = grid[np.argmin([neg(p) for p in grid])]
    res = minimize_scalar(neg, bounds=(p0 - 0.1, p0 + 0.1), method="bounded", options={"xatol": 1e-12})
    p1 = float(res.x)
    z = np.exp(1j * p1)
    p2 = float(np.angle(d[0] + z * d[2]) - np.angle(d[1] + z * d[3]))
    return float(min(1.0, res.fun**2 / 16.0)), (_wrap(p1), _wrap(p2))


def _jsonable(value):
    if isinstance(value, complex) or np.iscomplexobj(value):
        arr = np.asarray(value)
        return {"re": arr.real.tolist(), "im": arr.imag.tolist()}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if dataclasses.is_dataclass(value):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(value).items()}
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "value") and not isinstance(value, (int, float, str)):
        return value.value
    return value


@dataclass
class SimResult:
    """Outcome of simulating one pulse against one target."""

    unitary: np.ndarray
    gate_error: float
    leakage: float
    z_phases: tuple
    params: dict = field(default_factory=dict)
    pulse: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not -1e-12 <= self.gate_error <= 1.0 + 1e-12:
            raise ValueError(f"gate error {self.gate_error} outside [0, 1]")
        if not -1e-12 <= self.leakage <= 1.0 + 1e-12:
            raise ValueError(f"leakage {self.leakage} outside [0, 1]")

    @property
    def fidelity(self):
        return 1.0 - self.gate_error

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "unitary": _jsonable(np.asarray(self.unitary)),
            "gate_error": self.gate_error,
            "leakage": self.leakage,
            "z_phases": list(self.z_phases),
            "params": _jsonable(self.params),
            "pulse": _jsonable(self.pulse),
            "grid": _jsonable(self.grid),
            "extra": _jsonable(self.extra),
        }

    def to_json(self, path=None, **kwargs):
        text = json.dumps(self.to_dict(), indent=kwargs.pop("indent", 2), **kwargs)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported SimResult schema {data.get('schema')!r}")
        u = data["unitary"]
        unitary = np.array(u["re"]) + 1j * np.array(u["im"])
        return cls(
            unitary,
            data["gate_error"],
            data["leakage"],
            tuple(data["z_phases"]),
            data.get("params", {}),
            data.get("pulse", {}),
            data.get("grid", {}),
            data.get("extra", {}),
        )

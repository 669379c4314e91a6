"""Derivative-free search over Hanning pulse parameters.

Decision vector layout (``n_windows = N``)::

    Re/Im of c_2..c_N of control 1, Re/Im of c_2..c_N of control 2, Lambda1, Lambda2

``c_1 = 1`` for both controls; its scale is absorbed in the amplitude.
In resonant mode the two detunings are frozen at zero and dropped.
"""

from __future__ import annotations

import enum
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from crowdpulse.metrics import gate_fidelity, leakage_error
from crowdpulse.model import TWO_PI, target_unitary
from crowdpulse.propagator import PropagationGrid, propagate_field
from crowdpulse.pulses import ControlField, DegenerateShapeError, HanningShape

log = logging.getLogger(__name__)

COEFF_BOUND = 10.0
DETUNING_BOUND = TWO_PI * 0.05


class Mode(enum.Enum):
    RESONANT = "resonant"
    OFF_RESONANT = "off_resonant"


@dataclass(frozen=True)
class PulseAnsatz:
    """Full Hanning coefficients of both controls plus carrier detunings."""

    tg: float
    coeffs1: tuple
    coeffs2: tuple
    Lambda1: float = 0.0
    Lambda2: float = 0.0

    @property
    def n_windows(self):
        return len(self.coeffs1)

    def shapes(self):
        return HanningShape(self.coeffs1, self.tg), HanningShape(self.coeffs2, self.tg)

    def to_field(self, target, params, exact=False):
        shape1, shape2 = self.shapes()
        return ControlField.solve(shape1, shape2, target, params, self.Lambda1, self.Lambda2, exact)

    def as_dict(self):
        return {
            "tg_ns": self.tg,
            "coeffs1": [[c.real, c.imag] for c in self.coeffs1],
            "coeffs2": [[c.real, c.imag] for c in self.coeffs2],
            "Lambda1_rad_per_ns": self.Lambda1,
            "Lambda2_rad_per_ns": self.Lambda2,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["tg_ns"],
            tuple(complex(re, im) for re, im in data["coeffs1"]),
            tuple(complex(re, im) for re, im in data["coeffs2"]),
            data["Lambda1_rad_per_ns"],
            data["Lambda2_rad_per_ns"],
        )


def n_parameters(n_windows=3, mode=Mode.OFF_RESONANT):
    return 4 * (n_windows - 1) + (2 if Mode(mode) is Mode.OFF_RESONANT else 0)


def encode(ansatz, mode=Mode.OFF_RESONANT):
    free = [c for c in ansatz.coeffs1[1:]] + [c for c in ansatz.coeffs2[1:]]
    x = []
    for c in free:
        x += [c.real, c.imag]
    if Mode(mode) is Mode.OFF_RESONANT:
        x += [ansatz.Lambda1, ansatz.Lambda2]
    return np.array(x, dtype=float)


def decode(x, tg, n_windows=3, mode=Mode.OFF_RESONANT):
    x = np.asarray(x, dtype=float)
    if x.shape != (n_parameters(n_windows, mode),):
        raise ValueError(f"expected {n_parameters(n_windows, mode)} parameters, got {x.shape}")
    m = n_windows - 1
    free = x[: 4 * m : 2] + 1j * x[1 : 4 * m : 2]
    coeffs1 = (1.0 + 0j, *free[:m])
    coeffs2 = (1.0 + 0j, *free[m:])
    if Mode(mode) is Mode.OFF_RESONANT:
        return PulseAnsatz(tg, coeffs1, coeffs2, float(x[-2]), float(x[-1]))
    return PulseAnsatz(tg, coeffs1, coeffs2)


def project(x, n_windows=3, mode=Mode.OFF_RESONANT):
    """Nearest in-bounds vector and the distance moved."""
    x = np.asarray(x, dtype=float)
    y = x.copy()
    m = 4 * (n_windows - 1)
    pairs = y[:m].reshape(-1, 2)
    mod = np.hypot(pairs[:, 0], pairs[:, 1])
    over = mod > COEFF_BOUND
    pairs[over] *= (COEFF_BOUND / mod[over])[:, None]
    y[:m] = pairs.ravel()
    y[m:] = np.clip(y[m:], -DETUNING_BOUND, DETUNING_BOUND)
    return y, float(np.linalg.norm(x - y))


@dataclass(frozen=True)
class SynthesisContext:
    """Everything the objective needs besides the decision vector."""

    target: object
    params: object
    tg: float
    n_windows: int = 3
    mode: Mode = Mode.OFF_RESONANT
    grid: PropagationGrid = None
    leakage_weight: float = 0.0
    exact_amplitudes: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.grid is None:
            object.__setattr__(self, "grid", search_grid(self.tg))

    @property
    def dim(self):
        return n_parameters(self.n_windows, self.mode)

    def field(self, x):
        ansatz = decode(x, self.tg, self.n_windows, self.mode)
        return ansatz.to_field(self.target, self.params, self.exact_amplitudes)


def search_grid(tg, dt=0.05):
    """Coarse 4th-order grid used inside the optimizer loop."""
    return PropagationGrid(tg, max(64, math.ceil(tg / dt)))


def evaluate_field(field, target, grid=None, leakage_weight=0.0):
    U1, U2 = propagate_field(field, grid)
    U = np.kron(U1, U2)
    err = 1.0 - gate_fidelity(U, target_unitary(target))
    if leakage_weight:
        err += leakage_weight * leakage_error(U)
    return max(err, 0.0)


def objective(x, context):
    """1 - Phi (plus optional leakage weight); penalized outside the bounds."""
    y, moved = project(x, context.n_windows, context.mode)
    penalty = 1.0 + moved if moved > 0 else 0.0
    try:
        value = evaluate_field(context.field(y), context.target, context.grid, context.leakage_weight)
    except (DegenerateShapeError, FloatingPointError, np.linalg.LinAlgError):
        return math.inf
    if not math.isfinite(value):
        return math.inf
    return value + penalty


@dataclass
class NMResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    best_history: list = field(default_factory=list, repr=False)


def nelder_mead(fun, x0, scale=0.25, max_iter=2000, tol=1e-12,
                alpha=1.0, gamma=2.0, beta=0.5, delta=0.5):
    """Minimize ``fun`` with the Nelder-Mead simplex method.

    Parameters
    ----------
    fun : callable
        Objective ``fun(x) -> float``.
    x0 : array_like
        Start vertex; the other vertices are ``x0 + scale_i e_i``.
    scale : float or array_like
        Initial simplex edge per coordinate.
    max_iter : int
        Iteration cap.
    tol : float
        Stop when ``max_i |f_i - f_best| <= tol``.
    alpha, gamma, beta, delta : float
        Reflection, expansion, contraction and shrink coefficients.

    Returns
    -------
    NMResult
        Best vertex, its value, iteration and evaluation counts, and the
        best value after every iteration.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (n,))
    nfev = 0

    def f(x):
        nonlocal nfev
        nfev += 1
        value = float(fun(x))
        return value if not math.isnan(value) else math.inf

    simplex = np.vstack([x0, x0 + np.diag(scale)])
    values = np.array([f(v) for v in simplex])
    history = []
    nit = 0
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        history.append(values[0])
        if nit >= max_iter or np.max(np.abs(values - values[0])) <= tol:
            break
        nit += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        if values[0] <= fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = centroid + beta * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + beta * (worst - centroid)
            fc = f(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        simplex[1:] = simplex[0] + delta * (simplex[1:] - simplex[0])
        values[1:] = [f(v) for v in simplex[1:]]
    return NMResult(simplex[0].copy(), float(values[0]), nit, nfev, history)


@dataclass(frozen=True)
class OptimizerConfig:
    """Multistart Nelder-Mead settings.

    ``coeff_start`` and ``detuning_start`` bound the uniform start draws
    (Re/Im of each free coefficient, and each detuning in rad/ns).
    ``polish_rounds`` fresh simplices (edges scaled by ``polish_scale``)
    are rebuilt around the overall best vertex once all restarts finish;
    a collapsed simplex is the usual way Nelder-Mead stalls short of a minimum.
    """

    seed: int
    restarts: int = 32
    max_iter: int = 2000
    tol: float = 1e-12
    coeff_scale: float = 0.25
    detuning_scale: float = TWO_PI * 0.002
    coeff_start: float = 2.0
    detuning_start: float = TWO_PI * 0.005
    workers: int = 1
    trace: bool = False
    polish_rounds: int = 4
    polish_scale: float = 0.3

    def __post_init__(self):
        for name in ("restarts", "max_iter", "tol", "coeff_scale", "detuning_scale", "workers"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.polish_rounds < 0 or not self.polish_scale > 0:
            raise ValueError("polish_rounds must be >= 0 and polish_scale > 0")
        if self.seed is None or int(self.seed) < 0:
            raise ValueError("a non-negative seed is mandatory")


@dataclass(frozen=True)
class RestartRecord:
    index: int
    x0: tuple
    f0: float
    x: tuple
    fun: float
    nit: int
    nfev: int


@dataclass
class MultistartResult:
    x: np.ndarray
    fun: float
    records: list
    polish: list = field(default_factory=list)

    @property
    def best_index(self):
        return min(range(len(self.records)), key=lambda i: (self.records[i].fun, i))


def _run_restart(args):
    index, fun, x0, scale, max_iter, tol, trace = args
    f0 = float(fun(x0))
    res = nelder_mead(fun, x0, scale, max_iter, tol)
    if trace:
        for it, value in enumerate(res.best_history):
            print(f"{index},{it},{value:.6e}", file=sys.stderr)
    return RestartRecord(index, tuple(x0), f0, tuple(res.x), res.fun, res.nit, res.nfev)


def multistart(fun, starts, scale, config):
    """Run Nelder-Mead from each start; records are ordered by start index."""
    jobs = [(i, fun, np.asarray(x0, float), scale, config.max_iter, config.tol, config.trace)
            for i, x0 in enumerate(starts)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            records = list(pool.map(_run_restart, jobs))
    else:
        records = []
        for job in jobs:
            records.append(_run_restart(job))
            log.info("restart %d: f=%.3e", job[0], records[-1].fun)
    best = min(records, key=lambda r: (r.fun, r.index))
    x, fx = np.array(best.x), best.fun
    polish = []
    for _ in range(config.polish_rounds):
        if not math.isfinite(fx) or fx <= 0:
            break
        res = nelder_mead(fun, x, np.asarray(scale) * config.polish_scale, config.max_iter, config.tol)
        polish.append(res.fun)
        gained = fx - res.fun
        if res.fun < fx:
            x, fx = res.x, res.fun
        if gained <= 1e-3 * fx:
            break
    return MultistartResult(x, fx, records, polish)


class _Objective:
    """Picklable binding of :func:`objective` to a context."""

    def __init__(self, context):
        self.context = context

    def __call__(self, x):
        return objective(x, self.context)


def resonant_start(context):
    """Plain c = (1, 0, ..., 0) windows on resonance."""
    return np.zeros(context.dim)


def draw_starts(context, config):
    rng = np.random.default_rng(config.seed)
    starts = [resonant_start(context)]
    m = 4 * (context.n_windows - 1)
    for _ in range(config.restarts - 1):
        x = np.empty(context.dim)
        x[:m] = rng.uniform(-config.coeff_start, config.coeff_start, m)
        x[m:] = rng.uniform(-config.detuning_start, config.detuning_start, context.dim - m)
        starts.append(x)
    return starts


def simplex_scale(context, config):
    m = 4 * (context.n_windows - 1)
    scale = np.full(context.dim, config.coeff_scale)
    scale[m:] = config.detuning_scale
    return scale


def multistart_optimize(context, config, starts=None):
    """Best pulse over restarts; the first start is the resonant plain window."""
    if starts is None:
        starts = draw_starts(context, config)
    return multistart(_Objective(context), starts, simplex_scale(context, config), config)

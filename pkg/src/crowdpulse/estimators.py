"""Estimator-style front ends: ``fit`` a target gate, ``transform`` times into controls.

``fit(target)`` takes the target rotation in place of ``X`` (a
:class:`TargetRotation`, a pair of complex angles, or a pair of gate names).
``transform(t)`` returns the four quadratures ``(ex1, ey1, ex2, ey2)`` as an
``(n, 4)`` array, and ``score(target)`` is the simulated gate fidelity.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from crowdpulse._validation import check_positive
from crowdpulse.metrics import gate_fidelity, virtual_z_fidelity
from crowdpulse.model import GATES, TWO_PI, SystemParams, TargetRotation, target_unitary
from crowdpulse.optimizer import Mode, OptimizerConfig, SynthesisContext
from crowdpulse.propagator import propagate_pair
from crowdpulse.pulses import realize_quadratures, wahwah_field


def check_target(target):
    """Coerce a target specification to :class:`TargetRotation`."""
    if isinstance(target, TargetRotation):
        return target
    try:
        first, second = target
    except (TypeError, ValueError):
        raise ValueError("target must be a TargetRotation or a pair of angles/gate names") from None
    thetas = []
    for item in (first, second):
        if isinstance(item, str):
            if item not in GATES:
                raise ValueError(f"unknown gate name {item!r}; known: {sorted(GATES)}")
            thetas.append(GATES[item])
        else:
            thetas.append(complex(item))
    return TargetRotation(*thetas)


def check_times(t, tg):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.ndim != 1:
        raise ValueError(f"expected a 1-D array of times, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("times must be finite")
    return t


class PulseSynthesizer(TransformerMixin, BaseEstimator):
    """Optimized Hanning-window controls for a simultaneous two-qubit rotation.

    Parameters
    ----------
    tg : float
        Gate time in ns.
    n_windows : int
        Hanning harmonics per control.
    mode : {"off_resonant", "resonant"}
        Whether the carrier detunings are optimized or frozen at zero.
    restarts, max_iter, tol : int, int, float
        Multistart Nelder-Mead budget.
    leakage_weight : float
        Extra weight on qubit-2 leakage in the objective.
    exact_amplitudes : bool
        Solve both amplitudes together including crosstalk.
    params : SystemParams, optional
        Device; reference two-transmon values when omitted.
    random_state : int
        Seed of the start-point draws.
    workers : int
        Processes used for restarts.

    Attributes
    ----------
    field_ : ControlField
    ansatz_ : PulseAnsatz
    gate_error_, leakage_ : float
        Reference-grid results of the best pulse.
    result_ : SimResult
    """

    def __init__(self, tg=30.0, n_windows=3, mode="off_resonant", restarts=32, max_iter=2000,
                 tol=1e-12, leakage_weight=0.0, exact_amplitudes=False, params=None,
                 random_state=0, workers=1):
        self.tg = tg
        self.n_windows = n_windows
        self.mode = mode
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.leakage_weight = leakage_weight
        self.exact_amplitudes = exact_amplitudes
        self.params = params
        self.random_state = random_state
        self.workers = workers

    def _params(self):
        return SystemParams.table_one() if self.params is None else self.params

    def fit(self, X, y=None):
        """Optimize a pulse for target ``X``."""
        from crowdpulse.experiments.studies import synthesize

        target = check_target(X)
        check_positive(self.tg, "tg")
        context = SynthesisContext(target, self._params(), float(self.tg), int(self.n_windows),
                                   Mode(self.mode), None, self.leakage_weight, self.exact_amplitudes)
        config = OptimizerConfig(seed=int(self.random_state), restarts=int(self.restarts),
                                 max_iter=int(self.max_iter), tol=self.tol, workers=int(self.workers))
        self.result_, self.field_ = synthesize(context, config)
        self.target_ = target
        self.gate_error_ = self.result_.gate_error
        self.leakage_ = self.result_.leakage
        self.detunings_ = (self.field_.Lambda1, self.field_.Lambda2)
        self.amplitudes_ = (self.field_.a1, self.field_.a2)
        self.coef_ = np.array([self.field_.shape1.coeffs, self.field_.shape2.coeffs])
        return self

    def transform(self, X):
        """Quadratures ``(ex1, ey1, ex2, ey2)`` in rad/ns at times ``X`` (ns)."""
        check_is_fitted(self, "field_")
        t = check_times(X, self.field_.tg)
        return np.column_stack(realize_quadratures(self.field_, t))

    def score(self, X, y=None):
        """Gate fidelity of the fitted pulse against target ``X``."""
        check_is_fitted(self, "field_")
        U = propagate_pair(self.field_)
        return gate_fidelity(U, target_unitary(check_target(X)))


class WahWahSynthesizer(TransformerMixin, BaseEstimator):
    """Single-qubit WahWah pulse on qubit 1 that idles its crowded neighbour.

    Parameters
    ----------
    tg_bar : float
        Gate time in units of ``2 pi / delta``.
    optimize : bool
        Tune amplitude and sideband frequency; otherwise use the sideband model.
    params : SystemParams, optional
    """

    def __init__(self, tg_bar=1.0, optimize=True, params=None):
        self.tg_bar = tg_bar
        self.optimize = optimize
        self.params = params

    def fit(self, X=("X180", "I"), y=None):
        from crowdpulse.experiments.studies import model_omega_x, optimize_wahwah

        target = check_target(X)
        if target.theta2 != 0 or target.theta1.imag != 0:
            raise ValueError("WahWah pulses implement X rotations on qubit 1 only")
        params = SystemParams.table_one() if self.params is None else self.params
        tg_bar = check_positive(self.tg_bar, "tg_bar")
        tg = tg_bar * TWO_PI / params.crowding
        if self.optimize:
            omega_x, scale, _ = optimize_wahwah(tg_bar, params)
        else:
            omega_x, scale = model_omega_x(tg_bar, params), 1.0
        theta = target.theta1.real
        self.field_ = wahwah_field(omega_x, tg, params, theta=theta).with_scales(scale, 1.0)
        self.omega_x_ = omega_x
        self.target_ = target
        U = propagate_pair(self.field_)
        fid, self.z_phases_ = virtual_z_fidelity(U, target_unitary(target))
        self.gate_error_ = max(0.0, 1.0 - fid)
        return self

    def transform(self, X):
        check_is_fitted(self, "field_")
        t = check_times(X, self.field_.tg)
        return np.column_stack(realize_quadratures(self.field_, t))

    def score(self, X=("X180", "I"), y=None):
        """Fidelity after virtual-Z correction."""
        check_is_fitted(self, "field_")
        U = propagate_pair(self.field_)
        return virtual_z_fidelity(U, target_unitary(check_target(X)))[0]

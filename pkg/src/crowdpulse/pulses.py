"""Pulse ansatzes, the combined drive chi(t) and lowest-order spectral conditions.

Shapes expose a vectorized complex ``envelope(t)`` (zero outside
``[0, tg]``) and ``fourier(rho)``, the finite Fourier transform
``S(shape, rho) = int_0^tg shape(t) exp(i rho t) dt``.

The amplitude solvers pick ``a_j`` such that the lowest Magnus order
reproduces :func:`crowdpulse.model.target_unitary`.  With the coupling
``(chi/2) lambda exp(i d t)`` below the diagonal, the working-transition
area must equal the *conjugate* angle, ``lambda_1 S(chi, -Lambda) = theta*``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate, special

from crowdpulse._validation import check_time_in_window
from crowdpulse.model import SystemParams

_DEGENERATE_RTOL = 1e-9


class DegenerateShapeError(ValueError):
    """A Fourier integral needed to normalize a shape is (numerically) zero."""


def _window_mask(t, tg):
    return (t >= 0.0) & (t <= tg)


def finite_fourier_quad(func, rho, tg):
    """Adaptive quadrature of ``int_0^tg func(t) exp(i rho t) dt``.

    ``func`` may return complex values.  Oscillatory weights are handled by
    QUADPACK's Fourier rule so large ``|rho| tg`` stays accurate.
    """
    opts = dict(epsabs=1e-12 * tg, epsrel=1e-13, limit=400)

    def part(real_part, weight):
        g = (lambda t: np.real(func(t))) if real_part else (lambda t: np.imag(func(t)))
        if rho == 0.0:
            return integrate.quad(g, 0.0, tg, **opts)[0] if weight == "cos" else 0.0
        return integrate.quad(g, 0.0, tg, weight=weight, wvar=rho, **opts)[0]

    re_cos, re_sin = part(True, "cos"), part(True, "sin")
    im_cos, im_sin = part(False, "cos"), part(False, "sin")
    # (u + i v)(cos + i sin) = (u cos - v sin) + i (u sin + v cos)
    return complex(re_cos - im_sin, re_sin + im_cos)


def _box_fourier(x, tg):
    """int_0^tg exp(i x t) dt, stable at x -> 0."""
    x = np.asarray(x, dtype=float)
    return tg * np.exp(0.5j * x * tg) * np.sinc(x * tg / (2.0 * np.pi))


@lru_cache(maxsize=16)
def _hanning_basis(t_bytes, shape, tg, n_windows):
    t = np.frombuffer(t_bytes).reshape(shape)
    n = np.arange(1, n_windows + 1)
    basis = 1.0 - np.cos(2.0 * np.pi * np.multiply.outer(t, n) / tg)
    basis[~_window_mask(t, tg)] = 0.0
    basis.flags.writeable = False
    return basis


@dataclass(frozen=True)
class HanningShape:
    """sum_n c_n (1 - cos(2 pi n t / tg)), n = 1..N."""

    coeffs: tuple
    tg: float

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in np.atleast_1d(self.coeffs))
        if len(coeffs) < 1:
            raise ValueError("at least one Hanning window is required")
        if not self.tg > 0:
            raise ValueError("tg must be positive")
        object.__setattr__(self, "coeffs", coeffs)

    @cached_property
    def _c(self):
        return np.array(self.coeffs)

    @property
    def n_windows(self):
        return len(self.coeffs)

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        basis = _hanning_basis(t.tobytes(), t.shape, self.tg, self.n_windows)
        return basis @ self._c

    def fourier(self, rho):
        tg = self.tg
        out = 0.0j
        for n, c in enumerate(self.coeffs, start=1):
            k = 2.0 * np.pi * n / tg
            window = _box_fourier(rho, tg) - 0.5 * (
                _box_fourier(rho + k, tg) + _box_fourier(rho - k, tg)
            )
            out = out + c * window
        return out

    def scaled(self, s):
        return replace(self, coeffs=tuple(s * c for c in self.coeffs))


@dataclass(frozen=True)
class GaussianShape:
    """Gaussian of width tg/6, shifted so it starts and ends at zero.

    ``drag`` adds ``i * drag * d/dt`` of the real envelope as a quadrature.
    """

    tg: float
    drag: float = 0.0

    @property
    def sigma(self):
        return self.tg / 6.0

    def _parts(self, t):
        u = t - 0.5 * self.tg
        g = np.exp(-(u**2) / (2.0 * self.sigma**2))
        floor = np.exp(-((0.5 * self.tg) ** 2) / (2.0 * self.sigma**2))
        return g - floor, -u / self.sigma**2 * g

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        g, dg = self._parts(t)
        return np.where(_window_mask(t, self.tg), g + 1j * self.drag * dg, 0.0)

    def fourier(self, rho):
        return finite_fourier_quad(self.envelope, rho, self.tg)


@dataclass(frozen=True)
class WahWahShape:
    """Sideband-modulated Gaussian with first-order DRAG, sigma = tg/6."""

    omega_x: float
    tg: float
    anharmonicity: float
    amplitude: float = 1.0

    @property
    def sigma(self):
        return self.tg / 6.0

    def quadratures(self, t):
        t = np.asarray(t, dtype=float)
        u = t - 0.5 * self.tg
        g = np.exp(-(u**2) / (2.0 * self.sigma**2))
        mod = 1.0 - np.cos(self.omega_x * u)
        ex = self.amplitude * g * mod
        dex = self.amplitude * g * (-u / self.sigma**2 * mod + self.omega_x * np.sin(self.omega_x * u))
        ey = -dex / (2.0 * self.anharmonicity)
        inside = _window_mask(t, self.tg)
        return np.where(inside, ex, 0.0), np.where(inside, ey, 0.0)

    def envelope(self, t):
        ex, ey = self.quadratures(t)
        return ex + 1j * ey

    def fourier(self, rho):
        return finite_fourier_quad(self.envelope, rho, self.tg)


def hanning_envelope(shape, t):
    """Scalar Hanning envelope; ``t`` must lie in ``[0, tg]``."""
    check_time_in_window(t, shape.tg)
    return complex(shape.envelope(float(t)))


def finite_fourier(shape, rho, tg=None):
    """S(shape, rho) over ``[0, tg]``.

    Shapes with a ``fourier`` method (closed form for Hanning) use it;
    plain callables go through adaptive quadrature and need ``tg``.
    """
    if hasattr(shape, "fourier"):
        return complex(shape.fourier(rho))
    if tg is None:
        raise ValueError("tg is required for a bare envelope function")
    return finite_fourier_quad(shape, rho, tg)


@dataclass(frozen=True)
class ControlField:
    """Two-tone drive: chi(t) = a1 W1(t) + a2 exp(i gamma t) W2(t).

    Carriers sit at ``omega_d1 = omega1 + Lambda1`` and
    ``omega_d2 = omega2 + Lambda2``; the carrier phases are fixed to zero.
    """

    shape1: object
    shape2: object
    a1: complex
    a2: complex
    Lambda1: float
    Lambda2: float
    params: SystemParams = field(repr=False)

    phases = (0.0, 0.0)

    @property
    def gamma(self):
        p = self.params
        return p.anharmonicity - p.crowding + self.Lambda1 - self.Lambda2

    @property
    def omega_d1(self):
        return self.params.omega1 + self.Lambda1

    @property
    def omega_d2(self):
        return self.params.omega2 + self.Lambda2

    @property
    def tg(self):
        return max(self.shape1.tg, self.shape2.tg)

    @classmethod
    def solve(cls, shape1, shape2, target, params, Lambda1=0.0, Lambda2=0.0, exact=False):
        """Normalize two shapes to a target rotation."""
        if exact:
            a1, a2 = solve_amplitudes_exact((shape1, shape2), target, params, Lambda1, Lambda2)
        else:
            a1 = solve_amplitude_approx(shape1, target.theta1, params.lambdas[0][0], Lambda1)
            a2 = solve_amplitude_approx(shape2, target.theta2, params.lambdas[1][0], Lambda2)
        return cls(shape1, shape2, a1, a2, Lambda1, Lambda2, params)

    def components(self, t):
        """a_j W_j(t) for both tones (no carrier factor)."""
        return self.a1 * self.shape1.envelope(t), self.a2 * self.shape2.envelope(t)

    def chi(self, t):
        t = np.asarray(t, dtype=float)
        w1, w2 = self.components(t)
        return w1 + np.exp(1j * self.gamma * t) * w2

    def fourier(self, rho):
        """S(chi, rho) from the shapes' transforms."""
        return self.a1 * finite_fourier(self.shape1, rho) + self.a2 * finite_fourier(
            self.shape2, rho + self.gamma
        )

    def with_params(self, params, keep="detunings"):
        """Same envelopes and amplitudes on a different system.

        ``keep="detunings"`` holds each tone's offset Lambda_j from its qubit
        (carriers calibrated to the measured qubit frequencies, as is usual);
        ``keep="carriers"`` holds omega_d1, omega_d2 in the lab frame and
        re-expresses Lambda_j against the new qubit frequencies.
        """
        if keep not in ("detunings", "carriers"):
            raise ValueError(f"keep must be 'detunings' or 'carriers', got {keep!r}")
        if params == self.params:
            return self
        if keep == "detunings":
            return replace(self, params=params)
        return replace(
            self,
            Lambda1=self.omega_d1 - params.omega1,
            Lambda2=self.omega_d2 - params.omega2,
            params=params,
        )

    def with_scales(self, s1, s2):
        return replace(self, a1=self.a1 * s1, a2=self.a2 * s2)


def chi(field, t):
    """Combined drive chi(t) in the omega_d1 rotating frame."""
    return field.chi(t)


def _check_area(S, tg, what):
    if abs(S) < _DEGENERATE_RTOL * tg:
        raise DegenerateShapeError(f"{what} is {abs(S):.3g}; shape has no usable area")


def solve_amplitude_approx(shape, theta, lambda1, Lambda, tg=None):
    """Amplitude giving the working transition area for ``theta``, ignoring crosstalk."""
    if theta == 0:
        return 0.0j
    S = finite_fourier(shape, -Lambda, tg)
    _check_area(S, shape.tg if tg is None else tg, "S(shape, -Lambda)")
    return np.conj(complex(theta)) / lambda1 / S


def _solve_coupled(shape1, shape2, theta1, theta2, lam1, lam2, Lambda1, Lambda2, separation):
    """Both working-transition conditions with crosstalk.

    ``separation`` is omega2 - omega1 = delta - Delta.
    """
    S11 = finite_fourier(shape1, -Lambda1)
    S22 = finite_fourier(shape2, -Lambda2)
    tg = max(shape1.tg, shape2.tg)
    _check_area(S11, tg, "S(W1, -Lambda1)")
    _check_area(S22, tg, "S(W2, -Lambda2)")
    S21 = finite_fourier(shape2, -separation - Lambda2)
    S12 = finite_fourier(shape1, separation - Lambda1)
    M = np.array([[lam1 * S11, lam1 * S21], [lam2 * S12, lam2 * S22]])
    rhs = np.conj(np.array([theta1, theta2], dtype=complex))
    if abs(np.linalg.det(M)) < _DEGENERATE_RTOL * abs(M[0, 0] * M[1, 1]):
        raise DegenerateShapeError("crosstalk system is singular")
    a1, a2 = np.linalg.solve(M, rhs)
    return complex(a1), complex(a2)


def solve_amplitudes_exact(shapes, target, params, Lambda1, Lambda2):
    """Amplitudes solving both working-transition conditions including crosstalk."""
    shape1, shape2 = shapes
    return _solve_coupled(
        shape1,
        shape2,
        target.theta1,
        target.theta2,
        params.lambdas[0][0],
        params.lambdas[1][0],
        Lambda1,
        Lambda2,
        params.crowding - params.anharmonicity,
    )


def realize_quadratures(field, t):
    """(ex1, ey1, ex2, ey2) envelopes of the two carriers."""
    w1, w2 = field.components(t)
    return w1.real, w1.imag, w2.real, w2.imag


def magnus_condition_residuals(field, target, params=None):
    """Lowest-order Magnus residuals (work1, leak1, work2, leak2).

    Working residuals compare against the conjugate angle; see module docstring.
    """
    p = field.params if params is None else params
    Delta, delta, L1 = p.anharmonicity, p.crowding, field.Lambda1
    (l11, l21), (l12, l22) = p.lambdas
    return np.array(
        [
            l11 * field.fourier(-L1) - np.conj(target.theta1),
            l21 * field.fourier(Delta - L1),
            l12 * field.fourier(delta - Delta - L1) - np.conj(target.theta2),
            l22 * field.fourier(delta - L1),
        ]
    )


def wahwah_quadratures(shape, Delta, t):
    """(ex, ey) of a WahWah pulse; ey is the analytic DRAG derivative term."""
    check_time_in_window(t, shape.tg)
    return replace(shape, anharmonicity=Delta).quadratures(t)


_MODEL_KNEE = 2.3 * special.erf(2.13 / np.sqrt(2.0))


def wahwah_sideband_model(tg_bar):
    """Normalized sideband frequency omega_x/delta versus tg*delta/(2 pi)."""
    tg_bar = float(tg_bar)
    if tg_bar <= 0.75:
        raise ValueError(
            f"normalized gate time {tg_bar:.4g} is at or below the 0.75 speed limit"
        )
    if tg_bar <= 1.25:
        return 2.3 * special.erf(2.13 * np.sqrt(tg_bar - 0.75))
    return _MODEL_KNEE + 0.41 * (tg_bar - 1.25)


def wahwah_linear_model(tg_bar):
    """The linear branch of :func:`wahwah_sideband_model` used at all gate times."""
    return _MODEL_KNEE + 0.41 * (float(tg_bar) - 1.25)


def wahwah_field(omega_x, tg, params, theta=np.pi, amplitude=None):
    """Single-tone WahWah drive resonant with qubit 1; qubit 2 is not driven.

    Without ``amplitude`` the pulse is normalized to the area of ``theta``.
    """
    shape = WahWahShape(omega_x, tg, params.anharmonicity)
    if amplitude is None:
        a1 = solve_amplitude_approx(shape, theta, params.lambdas[0][0], 0.0)
    else:
        a1 = complex(amplitude)
    null = HanningShape((1.0,), tg)
    return ControlField(shape, null, a1, 0.0j, 0.0, 0.0, params)


def gaussian_baseline(tg, target, params, drag=0.0):
    """One resonant Gaussian per qubit, each normalized to its own angle."""
    if not tg > 0:
        raise ValueError("tg must be positive")
    shape = GaussianShape(tg, drag)
    return ControlField.solve(shape, shape, target, params, 0.0, 0.0)


def derivative_baseline(tg, target, params, drag):
    """Gaussian baseline plus a derivative quadrature scaled by ``drag`` (ns)."""
    return gaussian_baseline(tg, target, params, drag=drag)


def sample_times(tg, dt=0.1):
    n = int(round(tg / dt))
    return np.linspace(0.0, tg, n + 1)


def export_waveform(field, path, dt=0.1):
    """Write ``t_ns, ex1, ey1, ex2, ey2`` (rad/ns) with 12 significant digits."""
    t = sample_times(field.tg, dt)
    columns = (t, *realize_quadratures(field, t))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ns", "ex1", "ey1", "ex2", "ey2"])
        for row in zip(*columns):
            writer.writerow([f"{v:.11e}" for v in row])
    return path

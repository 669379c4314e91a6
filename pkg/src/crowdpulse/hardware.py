"""Gaussian transfer-function model of the waveform hardware."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from crowdpulse.metrics import gate_fidelity
from crowdpulse.model import TWO_PI, target_unitary
from crowdpulse.optimizer import nelder_mead
from crowdpulse.propagator import PropagationGrid, default_steps, propagate_field, propagate_tones

AWG_OMEGA0 = TWO_PI * 0.4254


@dataclass(frozen=True)
class FilterSpec:
    """Zero-phase response F(w) = exp(-w^2 / omega0^2), omega0 in rad/ns.

    ``pad_length`` (ns) of zeros is appended on each side before the FFT;
    it defaults to ``5 / omega0``.  ``omega0 = inf`` is the identity filter.
    """

    omega0: float = AWG_OMEGA0
    pad_length: float = None

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.pad_length is None:
            object.__setattr__(self, "pad_length", 5.0 / self.omega0)
        if self.pad_length < 0:
            raise ValueError("pad_length must be non-negative")

    @property
    def is_identity(self):
        return math.isinf(self.omega0)

    def response(self, omega):
        return np.exp(-((np.asarray(omega) / self.omega0) ** 2))


def apply_filter(samples, dt, spec):
    """Filter uniformly sampled waveform(s) along the last axis.

    Real input gives real output; complex input is filtered per quadrature.
    """
    x = np.asarray(samples)
    if spec.is_identity:
        return x.copy()
    n_pad = int(math.ceil(spec.pad_length / dt)) if spec.pad_length else 0
    width = [(0, 0)] * (x.ndim - 1) + [(n_pad, n_pad)]
    padded = np.pad(x, width)
    n = padded.shape[-1]
    omega = TWO_PI * np.fft.fftfreq(n, dt)
    out = np.fft.ifft(np.fft.fft(padded, axis=-1) * spec.response(omega), axis=-1)
    out = out[..., n_pad : n - n_pad]
    return out.real if not np.iscomplexobj(x) else out


def filtered_grid(field, spec, grid=None):
    """Grid covering the pulse plus the filter's ringing on both sides."""
    tg = field.tg
    margin = 0.0 if spec.is_identity else 2.0 * spec.pad_length
    duration = tg + 2.0 * margin
    if grid is None:
        steps = default_steps(duration)
    else:
        steps = max(16, math.ceil(grid.steps * duration / grid.tg))
    method = grid.method if grid is not None else PropagationGrid(tg).method
    return PropagationGrid(duration, steps, method, start=-margin)


def propagate_filtered(field, spec, grid=None):
    """(U1, U2) after the four quadratures pass through the filter.

    Each scheme sample stream is uniformly spaced, so filtering it directly
    yields the filtered waveform at exactly the times the integrator needs.
    Propagating the drive-free margins is the identity in this frame.
    """
    if spec.is_identity:
        return propagate_field(field, grid)
    ext = filtered_grid(field, spec, grid)
    times = ext.sample_times()
    w1, w2 = field.components(times)
    w1 = apply_filter(w1.astype(complex), ext.dt, FilterSpec(spec.omega0, 0.0))
    w2 = apply_filter(w2.astype(complex), ext.dt, FilterSpec(spec.omega0, 0.0))
    return propagate_tones(w1, w2, field.gamma, ext, field.params, field.Lambda1)


def filtered_error(field, target, spec, grid=None):
    U1, U2 = propagate_filtered(field, spec, grid)
    return max(0.0, 1.0 - gate_fidelity(np.kron(U1, U2), target_unitary(target)))


@dataclass(frozen=True)
class RetuneResult:
    field: object
    scales: tuple
    unfiltered_error: float
    filtered_error: float
    retuned_error: float


def retune_amplitudes(field, spec, target, grid=None, max_iter=200, step=0.02):
    """Rescale |a1|, |a2| to minimize the post-filter gate error.

    The identity filter leaves nothing to correct: scales stay (1, 1).
    """
    if spec.is_identity:
        err = filtered_error(field, target, spec, grid)
        return RetuneResult(field, (1.0, 1.0), err, err, err)

    def cost(s):
        if np.any(s <= 0):
            return math.inf
        return filtered_error(field.with_scales(*s), target, spec, grid)

    before = filtered_error(field, target, spec, grid)
    res = nelder_mead(cost, np.ones(2), step, max_iter=max_iter, tol=1e-14)
    scales = tuple(float(v) for v in res.x) if res.fun < before else (1.0, 1.0)
    after = min(res.fun, before)
    unfiltered = max(0.0, 1.0 - gate_fidelity(np.kron(*propagate_field(field, grid)), target_unitary(target)))
    return RetuneResult(field.with_scales(*scales), scales, unfiltered, before, after)

"""Input checks shared by the public functions and estimators."""

import numbers

import numpy as np


def check_time_in_window(t, tg):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > tg):
        raise ValueError(f"time outside the pulse window [0, {tg}] ns")
    return t_arr


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_unitary(U, dim=None, atol=1e-8, name="U"):
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {U.shape}")
    if dim is not None and U.shape[0] != dim:
        raise ValueError(f"{name} must be {dim}x{dim}, got {U.shape[0]}x{U.shape[1]}")
    if np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) > atol:
        raise ValueError(f"{name} is not unitary")
    return U


def check_hermitian(H, atol=1e-12):
    H = np.asarray(H, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(H), initial=0.0)))
    if np.max(np.abs(H - np.conj(np.swapaxes(H, -1, -2))), initial=0.0) > atol * scale:
        raise ValueError("Hamiltonian sample is not Hermitian")
    return H


def check_state(psi, dim=9):
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.shape != (dim,):
        raise ValueError(f"state must have {dim} amplitudes")
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-10:
        raise ValueError("state must be normalized")
    return psi

"""Pure-numpy implementations of the hot kernels.

Mirrors `_kernels.pyx` exactly; one of the two is selected at import time by
`kernels.py`. States are batches of little-endian statevectors with shape
(batch, 2**n) and dtype complex128, modified in place.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

IMPL = "python"

_ATOL = 1e-12

# Gate codes shared with the compiled kernels.
K_RX, K_RY, K_RZ, K_X, K_SX, K_ID, K_H = 0, 1, 2, 3, 4, 5, 6

_SX = np.array([[0.5 + 0.5j, 0.5 - 0.5j], [0.5 - 0.5j, 0.5 + 0.5j]])
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)
_I = np.eye(2, dtype=complex)


def gate_matrix(code: int, angle: float) -> np.ndarray:
    """2x2 matrix for a gate code (angle ignored for non-rotations)."""
    if code == K_RX:
        c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if code == K_RY:
        c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if code == K_RZ:
        return np.array([[cmath.exp(-0.5j * angle), 0.0], [0.0, cmath.exp(0.5j * angle)]])
    if code == K_X:
        return _X.copy()
    if code == K_SX:
        return _SX.copy()
    if code == K_ID:
        return _I.copy()
    if code == K_H:
        return _H.copy()
    raise ValueError(f"unknown gate code {code}")


def fuse_run(codes: np.ndarray, angles: np.ndarray) -> tuple[complex, complex, complex, complex]:
    """Product of a run of 1q gates in execution order (first gate first)."""
    u = _I
    for code, angle in zip(codes, angles):
        u = gate_matrix(int(code), float(angle)) @ u
    return complex(u[0, 0]), complex(u[0, 1]), complex(u[1, 0]), complex(u[1, 1])


def zyz_angles(u00: complex, u01: complex, u10: complex, u11: complex) -> tuple[float, float, float]:
    """ZYZ Euler angles (theta, phi, lam) of a 2x2 unitary, theta in [0, pi].

    Phase-invariant: multiplying the input by a global phase leaves the
    result unchanged, which keeps downstream signatures deterministic.
    """
    a10 = abs(u10)
    a00 = abs(u00)
    theta = 2.0 * math.atan2(a10, a00)
    if a10 <= _ATOL:
        return theta, cmath.phase(u11 * u00.conjugate()), 0.0
    if a00 <= _ATOL:
        return theta, cmath.phase(-u10 * u01.conjugate()), 0.0
    # u11 * conj(-u01) = e^{i*phi} cs and u11 * conj(u10) = e^{i*lam} cs, both
    # phase-invariant; an independent 2*pi wrap of phi or lam is a pure sign.
    phi = cmath.phase(-u11 * u01.conjugate())
    lam = cmath.phase(u11 * u10.conjugate())
    return theta, phi, lam


def apply_1q(states: np.ndarray, q: int, u00: complex, u01: complex, u10: complex, u11: complex) -> None:
    """Apply a 1q gate to qubit q of every state in the batch, in place."""
    batch, dim = states.shape
    view = states.reshape(batch, dim >> (q + 1), 2, 1 << q)
    lo = view[:, :, 0, :].copy()
    hi = view[:, :, 1, :]
    view[:, :, 0, :] = u00 * lo + u01 * hi
    view[:, :, 1, :] = u10 * lo + u11 * hi


def apply_cnot(states: np.ndarray, control: int, target: int) -> None:
    """Apply CNOT in place: flip `target` where `control` is 1."""
    batch, dim = states.shape
    a, b = max(control, target), min(control, target)
    view = states.reshape(batch, dim >> (a + 1), 2, (1 << a) >> (b + 1), 2, 1 << b)
    if control > target:
        sub = view[:, :, 1, :, :, :]
        tmp = sub[:, :, :, 0, :].copy()
        sub[:, :, :, 0, :] = sub[:, :, :, 1, :]
        sub[:, :, :, 1, :] = tmp
    else:
        sub = view[:, :, :, :, 1, :]
        tmp = sub[:, :, 0, :, :].copy()
        sub[:, :, 0, :, :] = sub[:, :, 1, :, :]
        sub[:, :, 1, :, :] = tmp


def apply_swap(states: np.ndarray, qa: int, qb: int) -> None:
    """Swap two qubits of every state in the batch, in place."""
    batch, dim = states.shape
    a, b = max(qa, qb), min(qa, qb)
    view = states.reshape(batch, dim >> (a + 1), 2, (1 << a) >> (b + 1), 2, 1 << b)
    tmp = view[:, :, 0, :, 1, :].copy()
    view[:, :, 0, :, 1, :] = view[:, :, 1, :, 0, :]
    view[:, :, 1, :, 0, :] = tmp

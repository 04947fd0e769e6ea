# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot kernels in `_kernels_py.py`.

Same call signatures and semantics; see that module for documentation.
"""

from libc.math cimport atan2, cos, sin, sqrt, M_PI

import numpy as np

IMPL = "compiled"

cdef double _ATOL = 1e-12

K_RX, K_RY, K_RZ, K_X, K_SX, K_ID, K_H = 0, 1, 2, 3, 4, 5, 6

cdef int C_RX = 0, C_RY = 1, C_RZ = 2, C_X = 3, C_SX = 4, C_ID = 5, C_H = 6


cdef inline void _gate_mat(int code, double angle, double complex* m) nogil:
    cdef double c = cos(angle / 2.0)
    cdef double s = sin(angle / 2.0)
    cdef double r = 1.0 / sqrt(2.0)
    if code == C_RX:
        m[0] = c; m[1] = -1j * s; m[2] = -1j * s; m[3] = c
    elif code == C_RY:
        m[0] = c; m[1] = -s; m[2] = s; m[3] = c
    elif code == C_RZ:
        m[0] = cos(-angle / 2.0) + 1j * sin(-angle / 2.0)
        m[1] = 0; m[2] = 0
        m[3] = cos(angle / 2.0) + 1j * sin(angle / 2.0)
    elif code == C_X:
        m[0] = 0; m[1] = 1; m[2] = 1; m[3] = 0
    elif code == C_SX:
        m[0] = 0.5 + 0.5j; m[1] = 0.5 - 0.5j; m[2] = 0.5 - 0.5j; m[3] = 0.5 + 0.5j
    elif code == C_ID:
        m[0] = 1; m[1] = 0; m[2] = 0; m[3] = 1
    else:  # C_H
        m[0] = r; m[1] = r; m[2] = r; m[3] = -r


def gate_matrix(int code, double angle):
    """2x2 matrix for a gate code (angle ignored for non-rotations)."""
    cdef double complex m[4]
    if code < 0 or code > 6:
        raise ValueError(f"unknown gate code {code}")
    _gate_mat(code, angle, m)
    out = np.empty((2, 2), dtype=np.complex128)
    out[0, 0] = m[0]; out[0, 1] = m[1]; out[1, 0] = m[2]; out[1, 1] = m[3]
    return out


def fuse_run(codes, angles):
    """Product of a run of 1q gates in execution order (first gate first)."""
    cdef long[::1] cds = np.ascontiguousarray(codes, dtype=np.int64)
    cdef double[::1] angs = np.ascontiguousarray(angles, dtype=np.float64)
    cdef double complex u00 = 1, u01 = 0, u10 = 0, u11 = 1
    cdef double complex m[4]
    cdef double complex n00, n01, n10, n11
    cdef Py_ssize_t i
    for i in range(cds.shape[0]):
        _gate_mat(<int>cds[i], angs[i], m)
        n00 = m[0] * u00 + m[1] * u10
        n01 = m[0] * u01 + m[1] * u11
        n10 = m[2] * u00 + m[3] * u10
        n11 = m[2] * u01 + m[3] * u11
        u00 = n00; u01 = n01; u10 = n10; u11 = n11
    return u00, u01, u10, u11


cdef inline double _phase(double complex z) nogil:
    return atan2(z.imag, z.real)


def zyz_angles(double complex u00, double complex u01, double complex u10, double complex u11):
    """ZYZ Euler angles (theta, phi, lam) of a 2x2 unitary, theta in [0, pi]."""
    cdef double a10 = sqrt(u10.real * u10.real + u10.imag * u10.imag)
    cdef double a00 = sqrt(u00.real * u00.real + u00.imag * u00.imag)
    cdef double theta = 2.0 * atan2(a10, a00)
    cdef double phi, lam
    if a10 <= _ATOL:
        return theta, _phase(u11 * u00.conjugate()), 0.0
    if a00 <= _ATOL:
        return theta, _phase(-u10 * u01.conjugate()), 0.0
    # u11 * conj(-u01) = e^{i*phi} cs and u11 * conj(u10) = e^{i*lam} cs, both
    # phase-invariant; an independent 2*pi wrap of phi or lam is a pure sign.
    phi = _phase(-u11 * u01.conjugate())
    lam = _phase(u11 * u10.conjugate())
    return theta, phi, lam


def apply_1q(double complex[:, ::1] states, int q, double complex u00, double complex u01,
             double complex u10, double complex u11):
    """Apply a 1q gate to qubit q of every state in the batch, in place."""
    cdef Py_ssize_t batch = states.shape[0]
    cdef Py_ssize_t dim = states.shape[1]
    cdef Py_ssize_t mask = (<Py_ssize_t>1) << q
    cdef Py_ssize_t b, i, j
    cdef double complex lo, hi
    with nogil:
        for b in range(batch):
            for i in range(dim):
                if not (i & mask):
                    j = i | mask
                    lo = states[b, i]
                    hi = states[b, j]
                    states[b, i] = u00 * lo + u01 * hi
                    states[b, j] = u10 * lo + u11 * hi


def apply_cnot(double complex[:, ::1] states, int control, int target):
    """Apply CNOT in place: flip `target` where `control` is 1."""
    cdef Py_ssize_t batch = states.shape[0]
    cdef Py_ssize_t dim = states.shape[1]
    cdef Py_ssize_t cmask = (<Py_ssize_t>1) << control
    cdef Py_ssize_t tmask = (<Py_ssize_t>1) << target
    cdef Py_ssize_t b, i, j
    cdef double complex tmp
    with nogil:
        for b in range(batch):
            for i in range(dim):
                if (i & cmask) and not (i & tmask):
                    j = i | tmask
                    tmp = states[b, i]
                    states[b, i] = states[b, j]
                    states[b, j] = tmp


def apply_swap(double complex[:, ::1] states, int qa, int qb):
    """Swap two qubits of every state in the batch, in place."""
    cdef Py_ssize_t batch = states.shape[0]
    cdef Py_ssize_t dim = states.shape[1]
    cdef Py_ssize_t amask = (<Py_ssize_t>1) << qa
    cdef Py_ssize_t bmask = (<Py_ssize_t>1) << qb
    cdef Py_ssize_t b, i, j
    cdef double complex tmp
    with nogil:
        for b in range(batch):
            for i in range(dim):
                if (i & amask) and not (i & bmask):
                    j = (i ^ amask) | bmask
                    tmp = states[b, i]
                    states[b, i] = states[b, j]
                    states[b, j] = tmp

"""Shared fixtures and independent oracles.

The oracle here builds full 2^n x 2^n operators with explicit Kronecker
products and projectors, sharing no code with the package's simulator or
kernels, so simulator/transpiler checks are genuinely two-route.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
import pytest

from untranspile.circuit import Circuit, Gate, GateKind

I2 = np.eye(2, dtype=complex)
X_MAT = np.array([[0, 1], [1, 0]], dtype=complex)
SX_MAT = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
H_MAT = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def oracle_gate_matrix(g: Gate) -> np.ndarray:
    if g.kind is GateKind.RX:
        c, s = math.cos(g.angle / 2), math.sin(g.angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if g.kind is GateKind.RY:
        c, s = math.cos(g.angle / 2), math.sin(g.angle / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if g.kind is GateKind.RZ:
        return np.diag([cmath.exp(-0.5j * g.angle), cmath.exp(0.5j * g.angle)])
    return {GateKind.X: X_MAT, GateKind.SX: SX_MAT, GateKind.ID: I2, GateKind.H: H_MAT}[g.kind]


def embed_1q(u: np.ndarray, q: int, n: int) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for i in range(n - 1, -1, -1):  # little-endian: qubit 0 is the last kron factor
        out = np.kron(out, u if i == q else I2)
    return out


def oracle_cnot(control: int, target: int, n: int) -> np.ndarray:
    p0 = embed_1q(np.diag([1.0 + 0j, 0.0]), control, n)
    p1 = embed_1q(np.diag([0.0, 1.0 + 0j]), control, n)
    return p0 + p1 @ embed_1q(X_MAT, target, n)


def oracle_unitary(c: Circuit) -> np.ndarray:
    """Full circuit unitary by dense products, global phase included."""
    u = np.eye(2**c.n_qubits, dtype=complex)
    for g in c.gates:
        if g.kind is GateKind.CNOT:
            m = oracle_cnot(g.qubits[0], g.qubits[1], c.n_qubits)
        elif g.kind is GateKind.SWAP:
            a, b = g.qubits
            m = oracle_cnot(a, b, c.n_qubits) @ oracle_cnot(b, a, c.n_qubits) @ oracle_cnot(a, b, c.n_qubits)
        else:
            m = embed_1q(oracle_gate_matrix(g), g.qubits[0], c.n_qubits)
        u = m @ u
    return u * cmath.exp(1j * c.global_phase)


def haar_unitary_2x2(rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


ONE_QUBIT_KINDS = (
    GateKind.RX,
    GateKind.RY,
    GateKind.RZ,
    GateKind.X,
    GateKind.SX,
    GateKind.ID,
    GateKind.H,
)


def random_circuit(
    n_qubits: int, n_gates: int, rng: np.random.Generator, two_qubit_frac: float = 0.25
) -> Circuit:
    gates = []
    for _ in range(n_gates):
        if n_qubits > 1 and rng.random() < two_qubit_frac:
            pair = rng.choice(n_qubits, size=2, replace=False)
            kind = GateKind.CNOT if rng.random() < 0.8 else GateKind.SWAP
            gates.append(Gate(kind, (int(pair[0]), int(pair[1]))))
        else:
            kind = ONE_QUBIT_KINDS[rng.integers(len(ONE_QUBIT_KINDS))]
            q = int(rng.integers(n_qubits))
            angle = float(rng.uniform(-math.pi, math.pi)) if kind.is_rotation else None
            gates.append(Gate(kind, (q,), angle))
    return Circuit(n_qubits, tuple(gates), float(rng.uniform(-math.pi, math.pi)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)

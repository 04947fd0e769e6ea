"""Dense statevector simulation and unitary extraction.

Qubit ordering is little-endian everywhere: qubit 0 is the least significant
bit of the basis-state index. Expectation values are exact (no shot noise).
"""

from __future__ import annotations

import cmath

import numpy as np

from . import kernels
from .circuit import Circuit, Gate, GateKind

MAX_RUN_QUBITS = 20
MAX_UNITARY_QUBITS = 10

_CODE = {
    GateKind.RX: kernels.K_RX,
    GateKind.RY: kernels.K_RY,
    GateKind.RZ: kernels.K_RZ,
    GateKind.X: kernels.K_X,
    GateKind.SX: kernels.K_SX,
    GateKind.ID: kernels.K_ID,
    GateKind.H: kernels.K_H,
}


class SimulationError(Exception):
    pass


def gate_code(kind: GateKind) -> int:
    return _CODE[kind]


def zero_state(n_qubits: int) -> np.ndarray:
    state = np.zeros(2**n_qubits, dtype=np.complex128)
    state[0] = 1.0
    return state


def basis_state(n_qubits: int, index: int) -> np.ndarray:
    state = np.zeros(2**n_qubits, dtype=np.complex128)
    state[index] = 1.0
    return state


def _check_bound(c: Circuit):
    if not c.is_bound:
        raise SimulationError("circuit has unbound parameters; bind() it first")


def evolve_batch(states: np.ndarray, c: Circuit, with_phase: bool = False) -> np.ndarray:
    """Apply a bound circuit to every row of a (batch, 2**n) state array, in place."""
    _check_bound(c)
    if states.ndim != 2 or states.shape[1] != 2**c.n_qubits:
        raise SimulationError(f"state batch shape {states.shape} does not match {c.n_qubits} qubits")
    for g in c.gates:
        if g.kind is GateKind.CNOT:
            kernels.apply_cnot(states, g.qubits[0], g.qubits[1])
        elif g.kind is GateKind.SWAP:
            kernels.apply_swap(states, g.qubits[0], g.qubits[1])
        else:
            m = kernels.gate_matrix(_CODE[g.kind], g.angle if g.angle is not None else 0.0)
            kernels.apply_1q(states, g.qubits[0], m[0, 0], m[0, 1], m[1, 0], m[1, 1])
    if with_phase and c.global_phase != 0.0:
        states *= cmath.exp(1j * c.global_phase)
    return states


def run(c: Circuit, init: np.ndarray | None = None) -> np.ndarray:
    """Evolve `init` (default |0...0>) through the circuit, global phase included."""
    if c.n_qubits > MAX_RUN_QUBITS:
        raise SimulationError(f"statevector run capped at {MAX_RUN_QUBITS} qubits, got {c.n_qubits}")
    if init is None:
        init = zero_state(c.n_qubits)
    init = np.asarray(init, dtype=np.complex128)
    if init.shape != (2**c.n_qubits,):
        raise SimulationError(f"initial state shape {init.shape} does not match {c.n_qubits} qubits")
    norm = float(np.sum(np.abs(init) ** 2))
    if abs(norm - 1.0) > 1e-9:
        raise SimulationError(f"initial state is not normalized (sum |a|^2 = {norm!r})")
    states = init.copy().reshape(1, -1)
    evolve_batch(states, c, with_phase=True)
    return states[0]


def unitary_of(c: Circuit) -> np.ndarray:
    """Full unitary of a bound circuit, global phase included."""
    if c.n_qubits > MAX_UNITARY_QUBITS:
        raise SimulationError(f"unitary extraction capped at {MAX_UNITARY_QUBITS} qubits, got {c.n_qubits}")
    dim = 2**c.n_qubits
    # Row j of the evolved identity is U|j>, so the unitary is the transpose.
    states = np.eye(dim, dtype=np.complex128)
    evolve_batch(states, c, with_phase=True)
    return states.T.copy()


def expval_z_batch(states: np.ndarray, qubit: int) -> np.ndarray:
    """<Z_qubit> for every row of a state batch."""
    dim = states.shape[1]
    signs = 1.0 - 2.0 * ((np.arange(dim) >> qubit) & 1)
    return (np.abs(states) ** 2) @ signs


def expval_z(c: Circuit, qubit: int, init: np.ndarray | None = None) -> float:
    """Exact <Z_qubit> after running the circuit."""
    if not 0 <= qubit < c.n_qubits:
        raise SimulationError(f"qubit {qubit} out of range for {c.n_qubits}-qubit circuit")
    state = run(c, init)
    return float(expval_z_batch(state.reshape(1, -1), qubit)[0])


def equiv_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff u and v differ by at most a global phase: ||tr(u^+ v)| - dim| <= tol*dim."""
    if u.shape != v.shape:
        raise SimulationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    dim = u.shape[0]
    return abs(abs(np.trace(u.conj().T @ v)) - dim) <= tol * dim


def permute_qubits_unitary(u: np.ndarray, perm: tuple[int, ...]) -> np.ndarray:
    """Relabel qubits of a unitary: qubit i of the input becomes qubit perm[i].

    Returns P U P^+ where P moves bit i of the index to bit perm[i].
    """
    n = len(perm)
    src = _permutation_indices(perm, n)
    out = u[np.ix_(src, src)]
    return out


def _permutation_indices(perm: tuple[int, ...], n: int) -> np.ndarray:
    """idx[j] = index whose bit perm[i] equals bit i of j, for all i."""
    dim = 2**n
    j = np.arange(dim)
    out = np.zeros(dim, dtype=np.int64)
    for i, p in enumerate(perm):
        out |= ((j >> p) & 1) << i
    return out


def unpermute_unitary(u_phys: np.ndarray, final_perm: tuple[int, ...]) -> np.ndarray:
    """Undo a routing permutation: read logical qubit i at physical wire final_perm[i].

    Given the physical-wire unitary of a routed circuit that starts on the
    trivial layout, returns the unitary seen in logical-qubit space.
    """
    n = len(final_perm)
    inv = [0] * n
    for logical, phys in enumerate(final_perm):
        inv[phys] = logical
    rows = _permutation_indices(tuple(inv), n)
    return u_phys[rows, :]

"""Lowering to the {id, x, sx, rz, cnot} basis on a coupling map.

The single-qubit workhorse is the ZSX decomposition: every 2x2 unitary equals

    e^{i*gamma} * RZ(a) . SX . RZ(b) . SX . RZ(c)

(matrix product; RZ(c) acts first). Angles come from ZYZ Euler angles with
theta in [0, pi] via a = phi + pi, b = theta + pi, c = lam, all wrapped to
(-pi, pi]. The Euler extraction is phase-invariant, so fused runs that differ
only by a global phase always produce the same pattern; the leftover phase is
measured numerically and accumulated into the circuit's global phase.

Optimization level 0 always emits the full five-gate pattern. Level 1 drops
RZ gates whose angle is zero within `zero_tol`, collapses diagonal runs to a
single RZ, and removes identity runs entirely.
"""

from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import kernels
from .circuit import (
    Circuit,
    CircuitError,
    Gate,
    GateKind,
    cnot,
    normalize_angle,
    rz,
    sx,
    wrap_with_phase,
)
from .simulator import gate_code


class TranspileError(Exception):
    pass


@dataclass(frozen=True)
class CouplingMap:
    """Undirected physical-qubit connectivity graph."""

    n_physical: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        norm = frozenset((min(a, b), max(a, b)) for a, b in self.edges)
        for a, b in norm:
            if a == b or a < 0 or b >= self.n_physical:
                raise TranspileError(f"invalid coupling edge ({a}, {b}) for {self.n_physical} qubits")
        object.__setattr__(self, "edges", norm)

    @staticmethod
    def linear(n_physical: int) -> "CouplingMap":
        return CouplingMap(n_physical, frozenset((i, i + 1) for i in range(n_physical - 1)))

    def coupled(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def neighbors(self, q: int) -> list[int]:
        out = [b if a == q else a for a, b in self.edges if q in (a, b)]
        return sorted(out)

    def shortest_path(self, src: int, dst: int) -> list[int]:
        """BFS path (deterministic: neighbors visited in ascending order)."""
        if src == dst:
            return [src]
        prev = {src: src}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for nb in self.neighbors(cur):
                if nb not in prev:
                    prev[nb] = cur
                    if nb == dst:
                        path = [dst]
                        while path[-1] != src:
                            path.append(prev[path[-1]])
                        return path[::-1]
                    queue.append(nb)
        raise TranspileError(f"no path between physical qubits {src} and {dst}: coupling map is disconnected")


@dataclass(frozen=True)
class TranspileOptions:
    optimization_level: int = 1
    coupling: CouplingMap | None = None  # None: linear map of the circuit's width
    zero_tol: float = 1e-9

    def __post_init__(self):
        if self.optimization_level not in (0, 1):
            raise TranspileError(f"optimization_level must be 0 or 1, got {self.optimization_level}")
        if not self.zero_tol > 0:
            raise TranspileError(f"zero_tol must be positive, got {self.zero_tol}")


@dataclass(frozen=True)
class TranspileResult:
    circuit: Circuit
    layout: tuple[int, ...]  # logical -> physical before routing (trivial here)
    final_layout: tuple[int, ...]  # logical -> physical after routing


_SX_MAT = np.array([[0.5 + 0.5j, 0.5 - 0.5j], [0.5 - 0.5j, 0.5 + 0.5j]])


def _check_unitary_2x2(u: np.ndarray, tol: float = 1e-9):
    if u.shape != (2, 2):
        raise TranspileError(f"expected a 2x2 matrix, got shape {u.shape}")
    dev = np.abs(u.conj().T @ u - np.eye(2)).max()
    if dev > tol:
        raise TranspileError(f"matrix is not unitary (deviation {dev:.3e})")


def _rz_mat(a: float) -> np.ndarray:
    return np.array([[cmath.exp(-0.5j * a), 0.0], [0.0, cmath.exp(0.5j * a)]])


def _zsx_product(a: float, b: float, c: float) -> np.ndarray:
    return _rz_mat(a) @ _SX_MAT @ _rz_mat(b) @ _SX_MAT @ _rz_mat(c)


def decompose_1q(u: np.ndarray, check: bool = True) -> tuple[float, float, float, float]:
    """ZSX angles (a, b, c, gamma) with e^{i*gamma} RZ(a).SX.RZ(b).SX.RZ(c) == u.

    RZ(c) is the first gate in execution order. The angle triple is a
    deterministic, phase-invariant function of u; gamma soaks up the rest.
    """
    u = np.asarray(u, dtype=np.complex128)
    if check:
        _check_unitary_2x2(u)
    theta, phi, lam = kernels.zyz_angles(u[0, 0], u[0, 1], u[1, 0], u[1, 1])
    a = normalize_angle(phi + math.pi)
    b = normalize_angle(theta + math.pi)
    c = normalize_angle(lam)
    v = _zsx_product(a, b, c)
    gamma = normalize_angle(cmath.phase(np.trace(v.conj().T @ u)))
    return a, b, c, gamma


def canonical_triple(u00: complex, u01: complex, u10: complex, u11: complex) -> tuple[float, float, float]:
    """The three canonical RZ angles of a 2x2 unitary in circuit order (c, b, a)."""
    theta, phi, lam = kernels.zyz_angles(u00, u01, u10, u11)
    return (
        normalize_angle(lam),
        normalize_angle(theta + math.pi),
        normalize_angle(phi + math.pi),
    )


def run_product(gates: list[Gate] | tuple[Gate, ...]) -> tuple[complex, complex, complex, complex]:
    """Fused 2x2 unitary of a run of 1q gates, as (u00, u01, u10, u11)."""
    codes = np.array([gate_code(g.kind) for g in gates], dtype=np.int64)
    angles = np.array([g.angle if g.angle is not None else 0.0 for g in gates], dtype=np.float64)
    return kernels.fuse_run(codes, angles)


def _pattern_once(
    q: int, u00: complex, u01: complex, u10: complex, u11: complex, level: int, zero_tol: float
) -> tuple[list[Gate], tuple[int, ...]]:
    if level == 1 and abs(u01) <= zero_tol and abs(u10) <= zero_tol:
        w = normalize_angle(cmath.phase(u11 * u00.conjugate()))
        if abs(w) <= zero_tol:
            return [], ()
        # Convention: a diagonal collapse occupies the last canonical slot.
        return [rz(q, w)], (2,)
    c, b, a = canonical_triple(u00, u01, u10, u11)
    keep = [True, True, True]
    if level == 1:
        keep = [abs(c) > zero_tol, abs(b) > zero_tol, abs(a) > zero_tol]
    gates: list[Gate] = []
    slots: list[int] = []
    if keep[0]:
        gates.append(rz(q, c))
        slots.append(0)
    gates.append(sx(q))
    if keep[1]:
        gates.append(rz(q, b))
        slots.append(1)
    gates.append(sx(q))
    if keep[2]:
        gates.append(rz(q, a))
        slots.append(2)
    return gates, tuple(slots)


def _emit_pattern(
    q: int,
    u00: complex,
    u01: complex,
    u10: complex,
    u11: complex,
    level: int,
    zero_tol: float,
) -> tuple[list[Gate], float, tuple[int, ...]]:
    """Emit the basis pattern for a fused 1q run.

    Returns (gates on wire q, global-phase contribution, kept canonical
    slots). Slot indices are circuit-order positions of the canonical RZ
    triple: 0 = first RZ, 1 = middle, 2 = last.
    """
    gates, slots = _pattern_once(q, u00, u01, u10, u11, level, zero_tol)
    v00, v01, v10, v11 = run_product(gates) if gates else (1.0 + 0j, 0j, 0j, 1.0 + 0j)
    trace = v00.conjugate() * u00 + v10.conjugate() * u10 + v01.conjugate() * u01 + v11.conjugate() * u11
    return gates, normalize_angle(cmath.phase(trace)), slots


def _is_emitted_shape(run: list[Gate], zero_tol: float) -> bool:
    """True iff the run is already a level-1 emission output.

    Such runs pass through the optimizer verbatim (there is nothing to
    shorten), which also makes the level-1 pass an exact fixpoint of itself.
    Shapes: a single nonzero rz, or rz?,sx,rz?,sx,rz? with every present rz
    nonzero and a middle angle away from +-pi (else the run is diagonal and
    must collapse).
    """
    kinds = [g.kind for g in run]
    if kinds == [GateKind.RZ]:
        return abs(run[0].angle) > zero_tol
    if kinds.count(GateKind.SX) != 2 or len(run) != len(kinds) or len(run) > 5:
        return False
    sx_positions = [i for i, k in enumerate(kinds) if k is GateKind.SX]
    if any(k not in (GateKind.RZ, GateKind.SX) for k in kinds):
        return False
    i, j = sx_positions
    if j - i > 2 or i > 1 or len(kinds) - 1 - j > 1:
        return False  # at most one rz before, between, and after the two sx
    for g in run:
        if g.kind is GateKind.RZ and abs(g.angle) <= zero_tol:
            return False
    middle = [g for g in run[i + 1 : j]]
    if middle and abs(abs(middle[0].angle) - math.pi) <= zero_tol:
        return False
    return True


def _expand_swaps(gates: tuple[Gate, ...]) -> list[Gate]:
    out: list[Gate] = []
    for g in gates:
        if g.kind is GateKind.SWAP:
            a, b = g.qubits
            out.extend([cnot(a, b), cnot(b, a), cnot(a, b)])
        else:
            out.append(g)
    return out


def route(c: Circuit, coupling: CouplingMap) -> tuple[Circuit, tuple[int, ...]]:
    """Map gates onto physical wires, inserting 3-CNOT swap chains as needed.

    Greedy nearest-neighbor: the control walks along the BFS shortest path
    until the pair is coupled. Returns the physical circuit and the final
    logical -> physical permutation.
    """
    if c.n_qubits > coupling.n_physical:
        raise TranspileError(f"circuit needs {c.n_qubits} qubits, coupling map has {coupling.n_physical}")
    perm = list(range(coupling.n_physical))  # logical -> physical
    phys2log = list(range(coupling.n_physical))
    trivial = True  # no swaps inserted yet: gates can be reused verbatim
    out: list[Gate] = []
    for g in c.gates:
        if g.kind.n_qubits == 1:
            q = g.qubits[0]
            out.append(g if trivial or perm[q] == q else Gate(g.kind, (perm[q],), g.angle, g.param_tag))
            continue
        if g.kind is not GateKind.CNOT:
            raise TranspileError(f"route() expects 1q gates and CNOT only, got {g.kind.value}")
        pc, pt = perm[g.qubits[0]], perm[g.qubits[1]]
        while not coupling.coupled(pc, pt):
            step = coupling.shortest_path(pc, pt)[1]
            out.extend([cnot(pc, step), cnot(step, pc), cnot(pc, step)])
            lc, ls = phys2log[pc], phys2log[step]
            phys2log[pc], phys2log[step] = ls, lc
            perm[lc], perm[ls] = step, pc
            pc = step
            trivial = False
        out.append(g if (pc, pt) == g.qubits else cnot(pc, pt))
    if trivial and coupling.n_physical == c.n_qubits:
        return c, tuple(perm)
    return Circuit(coupling.n_physical, tuple(out), c.global_phase), tuple(perm)


def _fuse_and_emit(gates: list[Gate], level: int, zero_tol: float) -> tuple[list[Gate], float]:
    """Fuse maximal 1q runs per wire and emit basis patterns.

    Emissions are anchored at the index of the run's first gate so the
    output preserves the source interleaving of runs and 2q gates. Runs that
    are already level-1 emissions pass through unchanged at level 1.
    """
    pending: dict[int, tuple[int, list[Gate]]] = {}
    events: list[tuple[int, int, object]] = []  # (anchor, seq, payload)
    phase_acc = 0.0
    seq = 0

    def flush(wire: int):
        nonlocal phase_acc, seq
        anchor, run = pending.pop(wire)
        if level == 1 and _is_emitted_shape(run, zero_tol):
            emitted = run
        else:
            u00, u01, u10, u11 = run_product(run)
            emitted, gamma, _ = _emit_pattern(wire, u00, u01, u10, u11, level, zero_tol)
            phase_acc += gamma
        events.append((anchor, seq, emitted))
        seq += 1

    for idx, g in enumerate(gates):
        if g.kind.n_qubits == 1:
            if g.qubits[0] in pending:
                pending[g.qubits[0]][1].append(g)
            else:
                pending[g.qubits[0]] = (idx, [g])
        else:
            for q in g.qubits:
                if q in pending:
                    flush(q)
            events.append((idx, seq, [g]))
            seq += 1
    for wire in sorted(pending):
        flush(wire)

    events.sort(key=lambda e: (e[0], e[1]))
    out: list[Gate] = []
    for _, _, payload in events:
        out.extend(payload)
    return out, phase_acc


def fuse_1q_runs(c: Circuit, zero_tol: float = 1e-9, level: int = 0) -> Circuit:
    """Fuse per-wire 1q runs and re-emit them as basis patterns (no routing)."""
    if not c.is_bound:
        raise TranspileError("fuse_1q_runs requires a bound circuit")
    gates, phase_acc = _fuse_and_emit(_expand_swaps(c.gates), level, zero_tol)
    return Circuit(c.n_qubits, tuple(gates), normalize_angle(c.global_phase + phase_acc))


def merge_rz(c: Circuit, zero_tol: float = 1e-9) -> Circuit:
    """Merge adjacent RZ gates per wire, tracking the wrap-around phase."""
    if not c.is_bound:
        raise TranspileError("merge_rz requires a bound circuit")
    out: list[Gate] = []
    last_rz: dict[int, int] = {}  # wire -> index in `out` of a trailing rz
    phase_acc = 0.0
    for g in c.gates:
        if g.kind is GateKind.RZ:
            q = g.qubits[0]
            if q in last_rz:
                prev = out[last_rz[q]]
                merged, dphase = wrap_with_phase(prev.angle + g.angle)
                phase_acc += dphase
                out[last_rz[q]] = rz(q, merged)
            else:
                out.append(g)
                last_rz[q] = len(out) - 1
        else:
            for q in g.qubits:
                last_rz.pop(q, None)
            out.append(g)
    return Circuit(c.n_qubits, tuple(out), normalize_angle(c.global_phase + phase_acc))


def drop_identity(c: Circuit, zero_tol: float = 1e-9) -> Circuit:
    """Remove id gates and rotations whose angle is 0 (mod 2*pi) within zero_tol."""
    if not c.is_bound:
        raise TranspileError("drop_identity requires a bound circuit")
    kept = [
        g
        for g in c.gates
        if not (g.kind is GateKind.ID or (g.kind.is_rotation and abs(g.angle) <= zero_tol))
    ]
    return c.with_gates(kept)


def transpile(c: Circuit, opts: TranspileOptions | None = None) -> TranspileResult:
    """Lower a bound circuit to coupled basis gates, tracking the global phase."""
    opts = opts or TranspileOptions()
    if not c.is_bound:
        raise TranspileError("transpile requires a bound circuit; bind() it first")
    coupling = opts.coupling or CouplingMap.linear(c.n_qubits)
    if any(g.kind is GateKind.SWAP for g in c.gates):
        c = Circuit(c.n_qubits, tuple(_expand_swaps(c.gates)), c.global_phase)
    routed, final_layout = route(c, coupling)
    gates, phase_acc = _fuse_and_emit(list(routed.gates), opts.optimization_level, opts.zero_tol)
    circuit = Circuit(routed.n_qubits, tuple(gates), normalize_angle(routed.global_phase + phase_acc))
    return TranspileResult(
        circuit=circuit,
        layout=tuple(range(coupling.n_physical)),
        final_layout=final_layout,
    )

"""Circuit intermediate representation: gates, angle arithmetic, text format.

Conventions used everywhere in this package:
  - gate lists are in execution order (first gate acts on the state first),
  - angles are radians canonicalized to (-pi, pi] (half-open at -pi),
  - the global phase of a circuit is tracked explicitly and normalized the
    same way, so circuit unitaries can be compared exactly rather than only
    up to phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

TWO_PI = 2.0 * math.pi


class CircuitError(Exception):
    """Base class for circuit-level errors."""


class InvalidAngleError(CircuitError):
    """Raised for non-finite rotation angles."""


class BindingError(CircuitError):
    """Raised when a parameter tag has no value to bind."""


class ParseError(CircuitError):
    """Syntax error in the circuit text format, located by line and column."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, col {column}: {message}")
        self.line = line
        self.column = column


def normalize_angle(a: float) -> float:
    """Wrap a finite angle into (-pi, pi]; exact ties resolve to +pi."""
    if isinstance(a, bool) or not isinstance(a, (int, float)):
        raise InvalidAngleError(f"angle must be a real number, got {a!r}")
    if not math.isfinite(a):
        raise InvalidAngleError(f"angle must be finite, got {a!r}")
    r = math.remainder(a, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def wrap_with_phase(a: float) -> tuple[float, float]:
    """Wrap a rotation angle, returning the global-phase shift this causes.

    R(a + 2*pi*k) = (-1)^k * R(a) for rx/ry/rz, so wrapping by k turns
    contributes k*pi of global phase.
    """
    r = normalize_angle(a)
    k = round((a - r) / TWO_PI)
    return r, normalize_angle(math.pi * k) if k % 2 else 0.0


class GateKind(Enum):
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    X = "x"
    SX = "sx"
    ID = "id"
    H = "h"
    CNOT = "cnot"
    SWAP = "swap"

    @property
    def n_qubits(self) -> int:
        return 2 if self in (GateKind.CNOT, GateKind.SWAP) else 1

    @property
    def is_rotation(self) -> bool:
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ)


ROTATIONS = (GateKind.RX, GateKind.RY, GateKind.RZ)
BASIS_KINDS = frozenset({GateKind.ID, GateKind.X, GateKind.SX, GateKind.RZ, GateKind.CNOT})


@dataclass(frozen=True)
class Gate:
    """One gate application. Immutable; see module docstring for conventions.

    A rotation gate carries either a bound `angle` or an unbound `param_tag`
    (an explicit integer slot id, stable under transpilation reordering).
    """

    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None
    param_tag: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if len(self.qubits) != self.kind.n_qubits:
            raise CircuitError(f"{self.kind.value} takes {self.kind.n_qubits} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{self.kind.value} qubits must be distinct, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError(f"negative qubit index in {self.qubits}")
        if self.kind.is_rotation:
            if (self.angle is None) == (self.param_tag is None):
                raise CircuitError(f"{self.kind.value} needs exactly one of angle or param_tag")
            if self.angle is not None:
                object.__setattr__(self, "angle", normalize_angle(self.angle))
            if self.param_tag is not None and self.param_tag < 0:
                raise CircuitError(f"param_tag must be >= 0, got {self.param_tag}")
        elif self.angle is not None or self.param_tag is not None:
            raise CircuitError(f"{self.kind.value} takes no angle or param_tag")

    @property
    def is_bound(self) -> bool:
        return self.param_tag is None


def rx(q: int, angle: float | None = None, tag: int | None = None) -> Gate:
    return Gate(GateKind.RX, (q,), angle, tag)


def ry(q: int, angle: float | None = None, tag: int | None = None) -> Gate:
    return Gate(GateKind.RY, (q,), angle, tag)


def rz(q: int, angle: float | None = None, tag: int | None = None) -> Gate:
    return Gate(GateKind.RZ, (q,), angle, tag)


def x(q: int) -> Gate:
    return Gate(GateKind.X, (q,))


def sx(q: int) -> Gate:
    return Gate(GateKind.SX, (q,))


def idg(q: int) -> Gate:
    return Gate(GateKind.ID, (q,))


def h(q: int) -> Gate:
    return Gate(GateKind.H, (q,))


def cnot(control: int, target: int) -> Gate:
    return Gate(GateKind.CNOT, (control, target))


def swap(a: int, b: int) -> Gate:
    return Gate(GateKind.SWAP, (a, b))


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over `n_qubits` wires with a tracked global phase."""

    n_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)
    global_phase: float = 0.0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise CircuitError(f"n_qubits must be positive, got {self.n_qubits}")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(q >= self.n_qubits for q in g.qubits):
                raise CircuitError(f"gate {g.kind.value} {g.qubits} out of range for {self.n_qubits} qubits")
        object.__setattr__(self, "global_phase", normalize_angle(self.global_phase))

    @property
    def is_bound(self) -> bool:
        return all(g.is_bound for g in self.gates)

    def param_tags(self) -> list[int]:
        """Tags in first-occurrence order."""
        seen: list[int] = []
        for g in self.gates:
            if g.param_tag is not None and g.param_tag not in seen:
                seen.append(g.param_tag)
        return seen

    def with_gates(self, gates: Iterable[Gate], phase: float | None = None) -> "Circuit":
        return Circuit(self.n_qubits, tuple(gates), self.global_phase if phase is None else phase)


def bind(c: Circuit, values: Sequence[float]) -> Circuit:
    """Replace every tagged rotation with its value from `values[tag]`.

    Values are canonicalized to (-pi, pi); gate count and order are unchanged.
    """
    bound = []
    for g in c.gates:
        if g.param_tag is None:
            bound.append(g)
            continue
        if g.param_tag >= len(values):
            raise BindingError(f"no value for param{g.param_tag} (got {len(values)} values)")
        bound.append(replace(g, angle=normalize_angle(float(values[g.param_tag])), param_tag=None))
    return c.with_gates(bound)


def _format_angle(a: float) -> str:
    return format(a, ".17g")


def serialize(c: Circuit) -> str:
    """Render the text form; `parse(serialize(c)) == c` field-for-field."""
    lines = [f"qubits {c.n_qubits}", f"phase {_format_angle(c.global_phase)}"]
    for g in c.gates:
        qs = ", ".join(f"q{q}" for q in g.qubits)
        if g.param_tag is not None:
            lines.append(f"{g.kind.value} {qs}, param{g.param_tag}")
        elif g.angle is not None:
            lines.append(f"{g.kind.value} {qs}, {_format_angle(g.angle)}")
        else:
            lines.append(f"{g.kind.value} {qs}")
    return "\n".join(lines) + "\n"


_KIND_BY_NAME = {k.value: k for k in GateKind}


def _parse_qubit(tok: str, n_qubits: int, lineno: int, col: int) -> int:
    if not tok.startswith("q") or not tok[1:].isdigit():
        raise ParseError(f"expected qubit like 'q0', got {tok!r}", lineno, col)
    q = int(tok[1:])
    if q >= n_qubits:
        raise ParseError(f"qubit index {q} out of range (declared {n_qubits})", lineno, col)
    return q


def parse(text: str) -> Circuit:
    """Parse the text format described in the README (inverse of serialize)."""
    lines = text.splitlines()
    items: list[tuple[int, str]] = []
    for i, raw in enumerate(lines, start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            items.append((i, stripped))
    if not items:
        raise ParseError("empty input: missing 'qubits <n>' header", 1)

    lineno, head = items[0]
    parts = head.split()
    if len(parts) != 2 or parts[0] != "qubits" or not parts[1].isdigit() or int(parts[1]) < 1:
        raise ParseError(f"expected 'qubits <n>' header, got {head!r}", lineno)
    n_qubits = int(parts[1])

    phase = 0.0
    body = items[1:]
    if body and body[0][1].startswith("phase"):
        lineno, stmt = body[0]
        parts = stmt.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'phase <float>', got {stmt!r}", lineno)
        try:
            phase = float(parts[1])
        except ValueError:
            raise ParseError(f"malformed phase {parts[1]!r}", lineno, len("phase ") + 1) from None
        if not math.isfinite(phase):
            raise ParseError(f"phase must be finite, got {parts[1]!r}", lineno)
        body = body[1:]

    gates: list[Gate] = []
    for lineno, stmt in body:
        name, _, rest = stmt.partition(" ")
        kind = _KIND_BY_NAME.get(name)
        if kind is None:
            raise ParseError(f"unknown gate name {name!r}", lineno)
        args = [a.strip() for a in rest.split(",")] if rest.strip() else []
        nq = kind.n_qubits
        want = nq + 1 if kind.is_rotation else nq
        if len(args) != want:
            raise ParseError(f"{name} expects {want} argument(s), got {len(args)}", lineno)
        col = len(name) + 2
        qubits = []
        for a in args[:nq]:
            qubits.append(_parse_qubit(a, n_qubits, lineno, col))
            col += len(a) + 2
        angle = None
        tag = None
        if kind.is_rotation:
            tok = args[-1]
            if tok.startswith("param") and tok[5:].isdigit():
                tag = int(tok[5:])
            else:
                try:
                    angle = float(tok)
                except ValueError:
                    raise ParseError(f"malformed angle {tok!r}", lineno, col) from None
                if not math.isfinite(angle):
                    raise ParseError(f"angle must be finite, got {tok!r}", lineno, col)
        try:
            gates.append(Gate(kind, tuple(qubits), angle, tag))
        except CircuitError as exc:
            raise ParseError(str(exc), lineno) from None
    return Circuit(n_qubits, tuple(gates), phase)

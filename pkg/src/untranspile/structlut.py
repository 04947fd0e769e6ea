"""Recovering circuit structure from transpiled form via signature lookup.

A transpiled circuit is parsed wire by wire: single-qubit runs between CNOT
endpoints become *segments*, and the ordered gate kinds of a segment are its
*signature*. A lookup table built by transpiling probe circuits maps each
signature back to the rotation-kind ordering that produced it. Routing swaps
(3-CNOT chains) are unwound into a wire permutation first.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass

from .circuit import Circuit, CircuitError, Gate, GateKind, cnot
from .transpiler import TranspileOptions, canonical_triple, run_product, transpile

SegmentSignature = tuple[GateKind, ...]
Template = tuple[GateKind, ...]

# Generic probe angles, far from 0 and +-pi/2 and +-pi so that level-1
# shortening never fires on a probe and signatures do not alias.
PROBE_ANGLES = (0.41, 1.13, -0.77, 0.93)

# Documented resolution order for same-k signature collisions.
_PRIORITY: tuple[Template, ...] = (
    (GateKind.RX, GateKind.RY, GateKind.RZ),
    (GateKind.RY, GateKind.RZ),
)


class StructureError(Exception):
    pass


class UnmatchedSegmentError(StructureError):
    def __init__(self, wire: int, index: int, signature: SegmentSignature):
        names = ",".join(k.value for k in signature) or "<empty>"
        super().__init__(f"no LUT entry for signature [{names}] (wire {wire}, segment {index})")
        self.wire = wire
        self.index = index
        self.signature = signature


class AmbiguousSegmentError(StructureError):
    def __init__(self, wire: int, index: int, signature: SegmentSignature, candidates: list[Template]):
        names = ",".join(k.value for k in signature)
        cands = "; ".join(",".join(k.value for k in t) for t in candidates)
        super().__init__(
            f"signature [{names}] is ambiguous between templates of different size: {cands} "
            f"(wire {wire}, segment {index})"
        )
        self.wire = wire
        self.index = index
        self.candidates = candidates


@dataclass(frozen=True)
class Segment:
    """A maximal 1q run on one wire between 2q-gate boundaries."""

    wire: int
    index: int  # per-wire counter
    start: int  # position of the first gate in the parsed circuit (boundary position if empty)
    gates: tuple[Gate, ...]

    @property
    def signature(self) -> SegmentSignature:
        return tuple(g.kind for g in self.gates)

    @property
    def rz_angles(self) -> tuple[float, ...]:
        return tuple(g.angle for g in self.gates if g.kind is GateKind.RZ)

    def fused(self) -> tuple[complex, complex, complex, complex]:
        return run_product(self.gates)

    def canonical_angles(self) -> tuple[float, float, float]:
        """The canonical RZ triple of the segment's fused unitary (circuit order)."""
        return canonical_triple(*self.fused())


def segment(c: Circuit) -> list[list[Segment]]:
    """Split each wire at CNOT endpoints into maximal 1q runs (possibly empty)."""
    segs, _ = _segment_events(c)
    return segs


def _segment_events(c: Circuit) -> tuple[list[list[Segment]], list[tuple[int, object]]]:
    """Segments per wire plus a global event list ordered by circuit position.

    Events are (position, Segment) for nonempty runs and (position, Gate) for
    2q gates; empty segments appear in the per-wire lists only.
    """
    per_wire: list[list[Segment]] = [[] for _ in range(c.n_qubits)]
    pending: dict[int, tuple[int, list[Gate]]] = {}
    events: list[tuple[int, object]] = []

    def close(wire: int, boundary: int):
        start, run = pending.pop(wire, (boundary, []))
        seg = Segment(wire, len(per_wire[wire]), start, tuple(run))
        per_wire[wire].append(seg)
        if run:
            events.append((start, seg))

    for idx, g in enumerate(c.gates):
        if g.kind.n_qubits == 1:
            if g.kind not in (GateKind.RZ, GateKind.SX, GateKind.X, GateKind.ID):
                raise StructureError(f"non-basis gate {g.kind.value} at position {idx}")
            if g.qubits[0] in pending:
                pending[g.qubits[0]][1].append(g)
            else:
                pending[g.qubits[0]] = (idx, [g])
        elif g.kind is GateKind.CNOT:
            for q in g.qubits:
                close(q, idx)
            events.append((idx, g))
        else:
            raise StructureError(f"non-basis gate {g.kind.value} at position {idx}")
    for wire in range(c.n_qubits):
        close(wire, len(c.gates))
    events.sort(key=lambda e: e[0])
    return per_wire, events


def unroute(c: Circuit) -> tuple[Circuit, tuple[int, ...]]:
    """Replace 3-CNOT swap chains by a tracked wire permutation.

    A triple CNOT(a,b), CNOT(b,a), CNOT(a,b) with no interleaved gate on a or
    b is removed and subsequent gates are relabeled. Returns the cleaned
    circuit and the logical -> physical permutation (route's final_layout).
    """
    gates = c.gates
    n = len(gates)
    usage: list[list[int]] = [[] for _ in range(c.n_qubits)]  # per wire, gate indices touching it
    for idx, g in enumerate(gates):
        for q in g.qubits:
            usage[q].append(idx)

    def next_on_pair(after: int, a: int, b: int) -> int | None:
        best = None
        for q in (a, b):
            for idx in usage[q]:
                if idx > after:
                    best = idx if best is None else min(best, idx)
                    break
        return best

    swap_at: dict[int, tuple[int, int]] = {}
    consumed: set[int] = set()
    i = 0
    while i < n:
        g = gates[i]
        if i not in consumed and g.kind is GateKind.CNOT:
            a, b = g.qubits
            j = next_on_pair(i, a, b)
            if j is not None and gates[j].kind is GateKind.CNOT and gates[j].qubits == (b, a):
                k = next_on_pair(j, a, b)
                if k is not None and gates[k].kind is GateKind.CNOT and gates[k].qubits == (a, b):
                    swap_at[i] = (a, b)
                    consumed.update((i, j, k))
        i += 1
    if not swap_at:
        return c, tuple(range(c.n_qubits))

    wiremap = list(range(c.n_qubits))  # physical -> logical
    out: list[Gate] = []
    for idx, g in enumerate(gates):
        if idx in swap_at:
            a, b = swap_at[idx]
            wiremap[a], wiremap[b] = wiremap[b], wiremap[a]
            continue
        if idx in consumed:
            continue
        out.append(Gate(g.kind, tuple(wiremap[q] for q in g.qubits), g.angle, g.param_tag))
    perm = [0] * c.n_qubits  # logical -> physical
    for phys, logical in enumerate(wiremap):
        perm[logical] = phys
    return Circuit(c.n_qubits, tuple(out), c.global_phase), tuple(perm)


@dataclass(frozen=True)
class LutEntry:
    signature: SegmentSignature
    template: Template
    k: int
    rz_slots: tuple[int, ...]  # canonical-slot indices of the RZs surviving in the signature
    also_matches: tuple[Template, ...] = ()  # same-k collisions resolved by priority
    ambiguous: tuple[Template, ...] = ()  # different-k collisions; lookup refuses


@dataclass(frozen=True)
class Lut:
    """Signature -> template lookup table, with its generation options."""

    entries: dict[SegmentSignature, LutEntry]
    optimization_level: int
    zero_tol: float
    probes: tuple[float, ...] = PROBE_ANGLES

    def lookup(self, signature: SegmentSignature, wire: int = -1, index: int = -1) -> LutEntry:
        entry = self.entries.get(tuple(signature))
        if entry is None:
            raise UnmatchedSegmentError(wire, index, tuple(signature))
        if entry.ambiguous:
            raise AmbiguousSegmentError(wire, index, entry.signature, [entry.template, *entry.ambiguous])
        return entry


def _template_rank(t: Template) -> tuple:
    if t in _PRIORITY:
        return (0, _PRIORITY.index(t))
    return (1, len(t), tuple(k.value for k in t))


def build_lut(templates: list[Template] | list[list[GateKind]], opts: TranspileOptions | None = None) -> Lut:
    """Transpile probe circuits per template and record every signature.

    A template's transpiled shape can depend on the sign region of its angles
    (a leading canonical RZ may be 0 in one orthant and pi in another), so
    each template is probed on every sign combination of the generic probe
    angles and all distinct signatures map back to it.

    Same-k collisions keep the highest-priority template (rx,ry,rz first,
    then ry,rz, then shorter/lexicographic) and list the losers in
    `also_matches`; collisions across different k are stored as ambiguous and
    make lookups fail loudly.
    """
    opts = opts or TranspileOptions()
    by_sig: dict[SegmentSignature, list[tuple[Template, tuple[int, ...]]]] = {}
    for raw in templates:
        template = tuple(raw)
        if not 1 <= len(template) <= len(PROBE_ANGLES):
            raise StructureError(f"template length must be 1..{len(PROBE_ANGLES)}, got {len(template)}")
        if any(not k.is_rotation for k in template):
            raise StructureError("templates must contain rotation kinds only")
        seen: set[SegmentSignature] = set()
        for signs in itertools.product((1.0, -1.0), repeat=len(template)):
            probe = Circuit(
                1, tuple(Gate(k, (0,), s * PROBE_ANGLES[i]) for i, (k, s) in enumerate(zip(template, signs)))
            )
            lowered = transpile(probe, opts).circuit
            segs = [s for s in segment(lowered)[0] if s.gates]
            if len(segs) != 1:
                raise StructureError(f"probe for template produced {len(segs)} segments")
            sig = segs[0].signature
            if sig in seen:
                continue
            seen.add(sig)
            by_sig.setdefault(sig, []).append((template, _slots_of(segs[0])))

    entries: dict[SegmentSignature, LutEntry] = {}
    for sig, cands in by_sig.items():
        cands = sorted(cands, key=lambda ts: _template_rank(ts[0]))
        template, slots = cands[0]
        same_k = tuple(t for t, _ in cands[1:] if len(t) == len(template))
        diff_k = tuple(t for t, _ in cands[1:] if len(t) != len(template))
        entries[sig] = LutEntry(sig, template, len(template), slots, same_k, diff_k)
    return Lut(entries, opts.optimization_level, opts.zero_tol)


def _slots_of(seg: Segment) -> tuple[int, ...]:
    """Canonical slots occupied by the segment's RZ gates.

    The full pattern is rz,sx,rz,sx,rz (slots 0,1,2 in circuit order); a
    shortened pattern keeps a subset. A diagonal collapse to a single rz is
    assigned the last slot by convention.
    """
    sig = seg.signature
    if sig == (GateKind.RZ,):
        return (2,)
    slot = 0
    slots = []
    for kind in sig:
        if kind is GateKind.RZ:
            slots.append(slot)
        elif kind is GateKind.SX:
            slot += 1
    return tuple(slots)


@dataclass(frozen=True)
class MatchedSegment:
    wire: int
    index: int
    template: Template
    tags: tuple[int, ...]
    transpiled_angles: tuple[float, float, float]  # canonical RZ triple read from the victim
    signature: SegmentSignature


@dataclass(frozen=True)
class RecoveredStructure:
    """LUT-recovered ansatz skeleton plus the transpiled angles feeding recovery."""

    ansatz: Circuit  # tagged, unbound
    segments: tuple[MatchedSegment, ...]
    layout: tuple[int, ...]
    notes: tuple[str, ...] = ()

    @property
    def n_params(self) -> int:
        return sum(len(s.tags) for s in self.segments)

    def param_map(self) -> dict[int, tuple[int, int]]:
        """tag -> (segment index, position within the segment's template)."""
        out: dict[int, tuple[int, int]] = {}
        for si, seg in enumerate(self.segments):
            for pos, tag in enumerate(seg.tags):
                out[tag] = (si, pos)
        return out

    def to_text(self) -> str:
        from .circuit import serialize

        buf = io.StringIO()
        buf.write(serialize(self.ansatz))
        buf.write(f"# layout {' '.join(str(p) for p in self.layout)}\n")
        for seg in self.segments:
            temp = ",".join(k.value for k in seg.template)
            angles = " ".join(format(a, ".17g") for a in seg.transpiled_angles)
            tags = ",".join(str(t) for t in seg.tags)
            buf.write(f"# segment wire={seg.wire} idx={seg.index} template={temp} tags={tags} x={angles}\n")
        for note in self.notes:
            buf.write(f"# note {note}\n")
        return buf.getvalue()


def recover_structure(victim: Circuit, lut: Lut) -> RecoveredStructure:
    """Unroute, segment, and look up every nonempty signature of the victim.

    The recovered ansatz carries one tagged rotation per template slot, with
    CNOTs at their unrouted logical positions; tags are numbered in circuit
    order. Raises UnmatchedSegmentError/AmbiguousSegmentError on lookup
    failure.
    """
    clean, perm = unroute(victim)
    _, events = _segment_events(clean)
    gates: list[Gate] = []
    matched: list[MatchedSegment] = []
    notes: list[str] = []
    tag = 0
    for _, payload in events:
        if isinstance(payload, Gate):
            gates.append(payload)
            continue
        seg: Segment = payload
        entry = lut.lookup(seg.signature, seg.wire, seg.index)
        if entry.also_matches:
            others = "; ".join(",".join(k.value for k in t) for t in entry.also_matches)
            notes.append(
                f"wire {seg.wire} segment {seg.index}: template "
                f"{','.join(k.value for k in entry.template)} chosen by priority over {others}"
            )
        tags = tuple(range(tag, tag + entry.k))
        tag += entry.k
        for kind, t in zip(entry.template, tags):
            gates.append(Gate(kind, (seg.wire,), None, t))
        matched.append(
            MatchedSegment(seg.wire, seg.index, entry.template, tags, seg.canonical_angles(), seg.signature)
        )
    ansatz = Circuit(clean.n_qubits, tuple(gates))
    return RecoveredStructure(ansatz, tuple(matched), perm, tuple(notes))


def save_lut(lut: Lut, path: str, meta: dict | None = None):
    """One text record per entry; see load_lut."""
    with open(path, "w") as fh:
        fh.write("lut v1\n")
        for key, value in (meta or {}).items():
            fh.write(f"# {key} {value}\n")
        fh.write(
            f"options level={lut.optimization_level} zero_tol={lut.zero_tol:.17g} "
            f"probes={','.join(format(p, '.17g') for p in lut.probes)}\n"
        )
        for sig in sorted(lut.entries, key=lambda s: (len(s), tuple(k.value for k in s))):
            e = lut.entries[sig]
            parts = [
                "entry",
                "sig=" + (",".join(k.value for k in e.signature) or "-"),
                "template=" + ",".join(k.value for k in e.template),
                f"k={e.k}",
                "rz_slots=" + (",".join(str(s) for s in e.rz_slots) or "-"),
            ]
            if e.also_matches:
                parts.append("also=" + ";".join(",".join(k.value for k in t) for t in e.also_matches))
            if e.ambiguous:
                parts.append("ambiguous=" + ";".join(",".join(k.value for k in t) for t in e.ambiguous))
            fh.write(" ".join(parts) + "\n")


def _parse_kinds(text: str) -> tuple[GateKind, ...]:
    if text == "-" or not text:
        return ()
    return tuple(GateKind(name) for name in text.split(","))


def load_lut(path: str) -> Lut:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != "lut v1":
        raise StructureError(f"{path}: not a LUT file (missing 'lut v1' header)")
    level, zero_tol, probes = 1, 1e-9, PROBE_ANGLES
    entries: dict[SegmentSignature, LutEntry] = {}
    for ln in lines[1:]:
        fields = ln.split()
        if fields[0] == "options":
            kv = dict(f.split("=", 1) for f in fields[1:])
            level = int(kv["level"])
            zero_tol = float(kv["zero_tol"])
            probes = tuple(float(p) for p in kv["probes"].split(","))
        elif fields[0] == "entry":
            kv = dict(f.split("=", 1) for f in fields[1:])
            sig = _parse_kinds(kv["sig"])
            slots = tuple(int(s) for s in kv["rz_slots"].split(",")) if kv["rz_slots"] != "-" else ()
            also = tuple(_parse_kinds(t) for t in kv.get("also", "").split(";") if t)
            amb = tuple(_parse_kinds(t) for t in kv.get("ambiguous", "").split(";") if t)
            entries[sig] = LutEntry(sig, _parse_kinds(kv["template"]), int(kv["k"]), slots, also, amb)
        else:
            raise StructureError(f"{path}: unrecognized LUT line {ln!r}")
    return Lut(entries, level, zero_tol, probes)

import itertools
import math

import numpy as np
import pytest

from untranspile.circuit import Circuit, GateKind, bind, cnot, rz, sx
from untranspile.qnn import AnsatzSpec, build_ansatz
from untranspile.simulator import equiv_up_to_phase, unitary_of, unpermute_unitary
from untranspile.structlut import (
    AmbiguousSegmentError,
    UnmatchedSegmentError,
    build_lut,
    load_lut,
    recover_structure,
    save_lut,
    segment,
    unroute,
)
from untranspile.transpiler import TranspileOptions, route, transpile
from conftest import oracle_unitary, random_circuit

RX, RY, RZ = GateKind.RX, GateKind.RY, GateKind.RZ


class TestSegment:
    def test_boundary_at_cnot(self):
        c = Circuit(2, (rz(0, 0.3), cnot(0, 1), sx(0)))
        segs = segment(c)
        q0 = [s for s in segs[0]]
        assert [s.signature for s in q0] == [(GateKind.RZ,), (GateKind.SX,)]
        assert q0[0].rz_angles == (0.3,)
        assert q0[1].rz_angles == ()

    def test_transpiled_full_template(self):
        from untranspile.circuit import rx, ry

        c = Circuit(1, (rx(0, 0.4), ry(0, 1.1), rz(0, -0.9)))
        lowered = transpile(c, TranspileOptions(optimization_level=0)).circuit
        segs = [s for s in segment(lowered)[0] if s.gates]
        assert len(segs) == 1
        assert segs[0].signature == (GateKind.RZ, GateKind.SX, GateKind.RZ, GateKind.SX, GateKind.RZ)
        assert len(segs[0].rz_angles) == 3

    def test_empty_circuit_one_empty_segment_per_wire(self):
        segs = segment(Circuit(3, ()))
        assert all(len(w) == 1 and w[0].gates == () for w in segs)

    def test_non_basis_gate_rejected(self):
        from untranspile.structlut import StructureError
        from untranspile.circuit import h

        with pytest.raises(StructureError):
            segment(Circuit(1, (h(0),)))


class TestUnroute:
    def test_swap_triple_removed(self):
        c = Circuit(2, (cnot(0, 1), cnot(1, 0), cnot(0, 1)))
        clean, perm = unroute(c)
        assert clean.gates == ()
        assert perm == (1, 0)

    def test_no_cnot_passthrough(self, rng):
        c = random_circuit(3, 8, rng, two_qubit_frac=0.0)
        from untranspile.transpiler import fuse_1q_runs

        basis = fuse_1q_runs(c, level=1)
        clean, perm = unroute(basis)
        assert perm == (0, 1, 2)
        assert clean.gates == basis.gates

    def test_route_then_unroute_round_trip(self):
        from untranspile.transpiler import CouplingMap

        for n in range(2, 9):
            for a in range(n):
                for b in range(n):
                    if a == b:
                        continue
                    c = Circuit(n, (cnot(a, b),))
                    routed, layout = route(c, CouplingMap.linear(n))
                    clean, perm = unroute(routed)
                    assert perm == layout
                    assert [(g.kind, g.qubits) for g in clean.gates] == [(GateKind.CNOT, (a, b))]

    def test_plain_cnot_kept(self):
        c = Circuit(2, (cnot(0, 1), cnot(1, 0)))
        clean, perm = unroute(c)
        assert len(clean.gates) == 2 and perm == (0, 1)


class TestBuildLut:
    def test_rx_ry_rz_signature(self):
        lut = build_lut([(RX, RY, RZ)])
        sigs = set(lut.entries)
        assert (GateKind.RZ, GateKind.SX, GateKind.RZ, GateKind.SX, GateKind.RZ) in sigs
        entry = lut.entries[(GateKind.RZ, GateKind.SX, GateKind.RZ, GateKind.SX, GateKind.RZ)]
        assert entry.template == (RX, RY, RZ) and entry.k == 3

    def test_rz_identity_template(self):
        lut = build_lut([(RZ,)])
        assert (GateKind.RZ,) in lut.entries
        assert lut.entries[(GateKind.RZ,)].k == 1

    def test_ry_rz_covers_both_sign_orthants(self):
        lut = build_lut([(RY, RZ)])
        assert (GateKind.SX, GateKind.RZ, GateKind.SX, GateKind.RZ) in lut.entries
        assert (GateKind.RZ, GateKind.SX, GateKind.RZ, GateKind.SX, GateKind.RZ) in lut.entries

    def test_cross_k_collision_flagged_ambiguous(self):
        lut = build_lut([(RX, RY, RZ), (RX,)])
        five = lut.entries[(GateKind.RZ, GateKind.SX, GateKind.RZ, GateKind.SX, GateKind.RZ)]
        assert five.ambiguous
        with pytest.raises(AmbiguousSegmentError):
            lut.lookup(five.signature)

    def test_same_k_collision_resolved_by_priority(self):
        lut = build_lut([(RZ, RY, RX), (RX, RY, RZ)])
        five = lut.entries[(GateKind.RZ, GateKind.SX, GateKind.RZ, GateKind.SX, GateKind.RZ)]
        assert five.template == (RX, RY, RZ)
        assert (RZ, RY, RX) in five.also_matches

    def test_save_load_round_trip(self, tmp_path):
        lut = build_lut([(RX, RY, RZ), (RY, RZ), (RZ,)])
        path = tmp_path / "lut.txt"
        save_lut(lut, str(path))
        loaded = load_lut(str(path))
        assert loaded.entries == lut.entries
        assert loaded.optimization_level == lut.optimization_level


class TestRecoverStructure:
    def test_fig_case(self):
        from untranspile.circuit import rx, ry, rz as rzg

        c = Circuit(1, (rx(0, 0.4), ry(0, 1.1), rzg(0, -0.9)))
        victim = transpile(c).circuit
        struct = recover_structure(victim, build_lut([(RX, RY, RZ)]))
        assert [g.kind for g in struct.ansatz.gates] == [RX, RY, RZ]
        assert [g.param_tag for g in struct.ansatz.gates] == [0, 1, 2]
        assert len(struct.segments) == 1 and len(struct.segments[0].transpiled_angles) == 3

    def test_two_qubit_one_layer(self, rng):
        spec = AnsatzSpec(2, 1, (RX, RY, RZ))
        ansatz = build_ansatz(spec)
        victim = transpile(bind(ansatz, rng.uniform(-math.pi, math.pi, 6))).circuit
        struct = recover_structure(victim, build_lut([spec.rotations]))
        assert struct.n_params == 6
        assert [(g.kind, g.qubits, g.param_tag) for g in struct.ansatz.gates] == [
            (g.kind, g.qubits, g.param_tag) for g in ansatz.gates
        ]

    def test_unmatched_segment_error(self):
        victim = Circuit(1, (sx(0), sx(0), sx(0), sx(0)))
        with pytest.raises(UnmatchedSegmentError) as err:
            recover_structure(victim, build_lut([(RX, RY, RZ)]))
        assert err.value.wire == 0

    def test_round_trip_all_templates(self, rng):
        # every ordering over {rx, ry, rz} with length <= 3, qubits <= 4, layers <= 3
        kinds = (RX, RY, RZ)
        templates = [t for length in (1, 2, 3) for t in itertools.permutations(kinds, length)]
        for template in templates:
            lut = build_lut([template])
            for n_qubits, n_layers in ((1, 1), (2, 2), (3, 1), (4, 3)):
                if n_qubits == 1 and n_layers > 1:
                    continue  # no CNOT boundaries: layers fuse irrecoverably
                spec = AnsatzSpec(n_qubits, n_layers, template)
                ansatz = build_ansatz(spec)
                for _ in range(6):
                    params = rng.uniform(-math.pi, math.pi, spec.n_params)
                    victim = transpile(bind(ansatz, params)).circuit
                    struct = recover_structure(victim, lut)
                    assert [(g.kind, g.qubits, g.param_tag) for g in struct.ansatz.gates] == [
                        (g.kind, g.qubits, g.param_tag) for g in ansatz.gates
                    ], (template, n_qubits, n_layers)

    def test_determinism_byte_equal(self, rng):
        spec = AnsatzSpec(3, 2, (RY, RZ))
        victim = transpile(bind(build_ansatz(spec), rng.uniform(-math.pi, math.pi, spec.n_params))).circuit
        lut = build_lut([spec.rotations])
        a = recover_structure(victim, lut).to_text()
        b = recover_structure(victim, lut).to_text()
        assert a == b

    def test_routed_victim_recovers_long_range_cnot(self, rng):
        gates = (
            *build_ansatz(AnsatzSpec(3, 1, (RY, RZ), entangle="none")).gates,
            cnot(0, 2),
        )
        ansatz = Circuit(3, gates)
        victim = transpile(bind(ansatz, rng.uniform(-math.pi, math.pi, 6))).circuit
        struct = recover_structure(victim, build_lut([(RY, RZ)]))
        cnots = [g for g in struct.ansatz.gates if g.kind is GateKind.CNOT]
        assert [g.qubits for g in cnots] == [(0, 2)]

import math
import struct

import numpy as np
import pytest

from untranspile.circuit import GateKind
from untranspile.qnn import (
    AnsatzSpec,
    IdxFormatError,
    QnnDataset,
    QnnError,
    TrainedQnn,
    accuracy,
    batch_expvals,
    build_ansatz,
    encode,
    encoded_states,
    load_idx,
    loss_and_grad,
    predict,
    synthetic_blobs,
    train_qnn,
)
from untranspile.simulator import run
from untranspile.circuit import Circuit

RX, RY, RZ = GateKind.RX, GateKind.RY, GateKind.RZ


class TestBuildAnsatz:
    def test_two_qubit_one_layer(self):
        c = build_ansatz(AnsatzSpec(2, 1, (RX, RY, RZ)))
        kinds = [g.kind for g in c.gates]
        assert kinds == [RX, RY, RZ, RX, RY, RZ, GateKind.CNOT]
        assert [g.param_tag for g in c.gates[:6]] == [0, 1, 2, 3, 4, 5]

    def test_param_counts_table(self):
        # the reproducible parameter-count column: 2Q rows use 3 rotations
        # per qubit per layer, 4Q and 8Q rows use 2
        for n_layers, expected in ((1, 6), (2, 12), (3, 18)):
            assert AnsatzSpec(2, n_layers, (RX, RY, RZ)).n_params == expected
        for n_qubits, per_layer in ((4, 8), (8, 16)):
            for n_layers in (1, 2, 3):
                assert AnsatzSpec(n_qubits, n_layers, (RY, RZ)).n_params == per_layer * n_layers

    def test_single_qubit_no_entangler(self):
        c = build_ansatz(AnsatzSpec(1, 1, (RZ,), entangle="none"))
        assert len(c.gates) == 1 and c.gates[0].param_tag == 0

    def test_ring(self):
        c = build_ansatz(AnsatzSpec(3, 1, (RY,), entangle="ring"))
        cnots = [g.qubits for g in c.gates if g.kind is GateKind.CNOT]
        assert cnots == [(0, 1), (1, 2), (2, 0)]


class TestEncode:
    def test_zero_features_stay_ground(self):
        c = encode(np.zeros(2), 2)
        assert np.allclose(run(c), [1, 0, 0, 0])

    def test_one_flips(self):
        c = encode(np.array([1.0]), 1)
        out = run(c)
        assert abs(out[1]) == pytest.approx(1.0, abs=1e-12)

    def test_half_quarter(self):
        c = encode(np.array([0.5, 0.25]), 2)
        assert c.gates[0].angle == pytest.approx(math.pi / 2)
        assert c.gates[1].angle == pytest.approx(math.pi / 4)

    def test_out_of_range(self):
        with pytest.raises(QnnError):
            encode(np.array([1.5]), 1)

    def test_encoded_states_match_circuit(self, rng):
        feats = rng.uniform(0, 1, size=(6, 3))
        states = encoded_states(feats)
        for i in range(6):
            expected = run(encode(feats[i], 3))
            assert np.abs(states[i] - expected).max() < 1e-12


class TestPredict:
    def test_ground_state_label0(self):
        spec = AnsatzSpec(1, 1, (RZ,), entangle="none")
        model = TrainedQnn(spec, np.zeros(1))
        e, label = predict(model, np.zeros(1))
        assert e == pytest.approx(1.0) and label == 0

    def test_flipped_label1(self):
        spec = AnsatzSpec(1, 1, (RZ,), entangle="none")
        model = TrainedQnn(spec, np.zeros(1))
        e, label = predict(model, np.ones(1))
        assert e == pytest.approx(-1.0) and label == 1

    def test_expval_bounded(self, rng):
        spec = AnsatzSpec(2, 2, (RY, RZ))
        model = TrainedQnn(spec, rng.uniform(-math.pi, math.pi, spec.n_params))
        e, _ = predict(model, rng.uniform(0, 1, 2))
        assert -1.0 <= e <= 1.0


class TestGradients:
    def test_parameter_shift_matches_finite_difference(self, rng):
        for seed in range(5):
            r = np.random.default_rng(seed)
            spec = AnsatzSpec(int(r.integers(1, 5)), int(r.integers(1, 4)), (RY, RZ))
            if spec.n_params > 24:
                spec = AnsatzSpec(spec.n_qubits, 1, (RY, RZ))
            ansatz = build_ansatz(spec)
            params = r.uniform(-math.pi, math.pi, spec.n_params)
            feats = r.uniform(0, 1, size=(4, spec.n_qubits))
            states = encoded_states(feats)
            targets = np.ones(4)
            _, grad, _ = loss_and_grad(ansatz, params, states, targets)
            h = 1e-6
            for j in range(spec.n_params):
                up = params.copy()
                up[j] += h
                down = params.copy()
                down[j] -= h
                lu = np.mean((batch_expvals(ansatz, up, states) - targets) ** 2)
                ld = np.mean((batch_expvals(ansatz, down, states) - targets) ** 2)
                fd = (lu - ld) / (2 * h)
                assert grad[j] == pytest.approx(fd, abs=1e-6)

    def test_lr_zero_keeps_params(self):
        train_ds, _ = synthetic_blobs(2, 20, 10, seed=1)
        spec = AnsatzSpec(2, 1, (RY, RZ))
        model = train_qnn(spec, train_ds, epochs=3, lr=0.0, seed=4)
        fresh = train_qnn(spec, train_ds, epochs=0, lr=0.0, seed=4)
        assert np.array_equal(model.params, fresh.params)


class TestTraining:
    def test_separable_set_reaches_90pct(self):
        train_ds, eval_ds = synthetic_blobs(1, 60, 40, seed=2, separation=0.6, spread=0.08)
        model = train_qnn(AnsatzSpec(1, 1, (RX, RY, RZ), entangle="none"), train_ds, epochs=50, seed=0)
        assert accuracy(model, eval_ds) >= 0.9

    def test_loss_not_increasing_overall(self):
        train_ds, _ = synthetic_blobs(2, 40, 10, seed=3)
        model = train_qnn(AnsatzSpec(2, 1, (RY, RZ)), train_ds, epochs=30, seed=1)
        assert model.train_log[-1][0] <= model.train_log[0][0]

    def test_empty_dataset(self):
        with pytest.raises(QnnError):
            train_qnn(AnsatzSpec(1, 1, (RZ,)), QnnDataset(np.zeros((0, 1)), np.zeros(0)))


class TestAccuracy:
    def test_constant_predictor(self):
        spec = AnsatzSpec(1, 1, (RZ,), entangle="none")
        model = TrainedQnn(spec, np.zeros(1))  # always predicts label 0 on |0>
        feats = np.zeros((5, 1))
        assert accuracy(model, QnnDataset(feats, np.zeros(5))) == 1.0
        assert accuracy(model, QnnDataset(feats, np.ones(5))) == 0.0


def _write_idx(tmp_path, images: np.ndarray, labels: np.ndarray, img_magic=0x803, lbl_magic=0x801):
    n, r, c = images.shape
    ipath = tmp_path / "imgs.idx"
    with open(ipath, "wb") as fh:
        fh.write(struct.pack(">IIII", img_magic, n, r, c))
        fh.write(images.astype(np.uint8).tobytes())
    lpath = tmp_path / "lbls.idx"
    with open(lpath, "wb") as fh:
        fh.write(struct.pack(">II", lbl_magic, len(labels)))
        fh.write(labels.astype(np.uint8).tobytes())
    return str(ipath), str(lpath)


class TestLoadIdx:
    def test_synthetic_four_images(self, tmp_path, rng):
        images = rng.integers(0, 256, size=(4, 28, 28)).astype(np.uint8)
        labels = np.array([0, 1, 0, 1], dtype=np.uint8)
        ipath, lpath = _write_idx(tmp_path, images, labels)
        ds = load_idx(ipath, lpath, (0, 1), 4)
        assert ds.features.shape == (4, 4)
        assert np.all((ds.features >= 0) & (ds.features <= 1))
        # block means: quadrants of the first image
        q = images[0].reshape(2, 14, 2, 14).mean(axis=(1, 3)) / 255.0
        assert np.allclose(ds.features[0], q.reshape(-1))

    def test_all_white_normalizes_to_one(self, tmp_path):
        images = np.full((2, 28, 28), 255, dtype=np.uint8)
        ipath, lpath = _write_idx(tmp_path, images, np.array([3, 7]))
        ds = load_idx(ipath, lpath, (3, 7), 2)
        assert np.allclose(ds.features, 1.0)
        assert list(ds.labels) == [0, 1]

    def test_filters_labels(self, tmp_path, rng):
        images = rng.integers(0, 256, size=(6, 28, 28)).astype(np.uint8)
        labels = np.array([0, 1, 2, 3, 0, 1], dtype=np.uint8)
        ipath, lpath = _write_idx(tmp_path, images, labels)
        ds = load_idx(ipath, lpath, (0, 1), 4)
        assert len(ds) == 4

    def test_bad_magic(self, tmp_path, rng):
        images = rng.integers(0, 256, size=(2, 28, 28)).astype(np.uint8)
        ipath, lpath = _write_idx(tmp_path, images, np.zeros(2), img_magic=0x999)
        with pytest.raises(IdxFormatError):
            load_idx(ipath, lpath, (0, 1), 4)

    def test_truncated(self, tmp_path):
        ipath = tmp_path / "trunc.idx"
        ipath.write_bytes(struct.pack(">IIII", 0x803, 10, 28, 28) + b"\x00" * 10)
        lpath = tmp_path / "l.idx"
        lpath.write_bytes(struct.pack(">II", 0x801, 10) + b"\x00" * 10)
        with pytest.raises(IdxFormatError):
            load_idx(str(ipath), str(lpath), (0, 1), 4)

    def test_count_mismatch(self, tmp_path, rng):
        images = rng.integers(0, 256, size=(3, 28, 28)).astype(np.uint8)
        ipath, lpath = _write_idx(tmp_path, images, np.zeros(2))
        with pytest.raises(IdxFormatError):
            load_idx(ipath, lpath, (0, 1), 4)

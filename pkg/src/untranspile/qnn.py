"""Victim classifiers: ansatz construction, angle encoding, training, data.

A classifier is an angle-encoding prefix (RY(pi*f_i) per qubit) followed by a
layered ansatz of tagged rotations and a CNOT chain, read out as the exact
<Z> expectation on qubit 0. Training is full-batch gradient descent with
parameter-shift gradients. Label 0 maps to target +1.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Gate, GateKind, bind, cnot, ry
from .simulator import evolve_batch, expval_z_batch

ROTATION_NAMES = {"rx": GateKind.RX, "ry": GateKind.RY, "rz": GateKind.RZ}


class QnnError(Exception):
    pass


class IdxFormatError(QnnError):
    pass


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    n_layers: int
    rotations: tuple[GateKind, ...]  # per qubit per layer, e.g. (RY, RZ)
    entangle: str = "linear_chain"  # linear_chain | ring | none

    def __post_init__(self):
        if self.n_qubits < 1 or self.n_layers < 1:
            raise QnnError("n_qubits and n_layers must be positive")
        if not self.rotations or any(not k.is_rotation for k in self.rotations):
            raise QnnError("rotations must be a nonempty list of rotation kinds")
        if self.entangle not in ("linear_chain", "ring", "none"):
            raise QnnError(f"unknown entanglement {self.entangle!r}")
        object.__setattr__(self, "rotations", tuple(self.rotations))

    @property
    def n_params(self) -> int:
        return self.n_qubits * self.n_layers * len(self.rotations)


def build_ansatz(spec: AnsatzSpec) -> Circuit:
    """Tagged, unbound ansatz; tags count up qubit-major within each layer."""
    gates: list[Gate] = []
    tag = 0
    for _ in range(spec.n_layers):
        for q in range(spec.n_qubits):
            for kind in spec.rotations:
                gates.append(Gate(kind, (q,), None, tag))
                tag += 1
        if spec.entangle != "none" and spec.n_qubits > 1:
            for q in range(spec.n_qubits - 1):
                gates.append(cnot(q, q + 1))
            if spec.entangle == "ring" and spec.n_qubits > 2:
                gates.append(cnot(spec.n_qubits - 1, 0))
    return Circuit(spec.n_qubits, tuple(gates))


def encode(features: np.ndarray, n_qubits: int) -> Circuit:
    """Angle-encoding prefix: RY(pi * f_i) on qubit i, features in [0, 1]."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (n_qubits,):
        raise QnnError(f"expected {n_qubits} features, got shape {features.shape}")
    if np.any(features < 0.0) or np.any(features > 1.0):
        raise QnnError("features must lie in [0, 1]")
    return Circuit(n_qubits, tuple(ry(i, math.pi * f) for i, f in enumerate(features)))


def encoded_states(features: np.ndarray) -> np.ndarray:
    """Batch of product states RY(pi*f) |0...0>, shape (batch, 2**n)."""
    features = np.asarray(features, dtype=np.float64)
    batch, n = features.shape
    states = np.ones((batch, 1), dtype=np.complex128)
    for q in range(n):
        half = 0.5 * math.pi * features[:, q]
        c = np.cos(half)[:, None]
        s = np.sin(half)[:, None]
        states = np.concatenate([states * c, states * s], axis=1)
    return states


@dataclass
class QnnDataset:
    features: np.ndarray  # (n, n_qubits) in [0, 1]
    labels: np.ndarray  # (n,) in {0, 1}

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def targets(self) -> np.ndarray:
        """<Z> targets: +1 for label 0, -1 for label 1."""
        return 1.0 - 2.0 * self.labels


@dataclass
class TrainedQnn:
    spec: AnsatzSpec
    params: np.ndarray
    train_log: list[tuple[float, float]] = field(default_factory=list)  # (loss, accuracy) per epoch

    def __post_init__(self):
        if len(self.params) != self.spec.n_params:
            raise QnnError(f"expected {self.spec.n_params} params, got {len(self.params)}")


def batch_expvals(ansatz: Circuit, params: np.ndarray, states0: np.ndarray, qubit: int = 0) -> np.ndarray:
    """<Z_qubit> per sample after running the bound ansatz on encoded states."""
    bound = bind(ansatz, params)
    states = states0.copy()
    evolve_batch(states, bound)
    return expval_z_batch(states, qubit)


def predict(model: TrainedQnn, features: np.ndarray) -> tuple[float, int]:
    """(expval, label) for one sample; label 0 iff expval >= 0."""
    states = encoded_states(np.asarray(features, dtype=np.float64).reshape(1, -1))
    e = float(batch_expvals(build_ansatz(model.spec), model.params, states)[0])
    return e, 0 if e >= 0 else 1


def circuit_accuracy(ansatz: Circuit, params: np.ndarray, dataset: QnnDataset) -> float:
    """Accuracy of an arbitrary tagged ansatz circuit with the given parameters."""
    if len(dataset) == 0:
        raise QnnError("empty dataset")
    e = batch_expvals(ansatz, params, encoded_states(dataset.features))
    predicted = (e < 0).astype(np.int64)
    return float(np.mean(predicted == dataset.labels))


def accuracy(model: TrainedQnn, dataset: QnnDataset) -> float:
    return circuit_accuracy(build_ansatz(model.spec), model.params, dataset)


def loss_and_grad(
    ansatz: Circuit, params: np.ndarray, states0: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """MSE loss, its parameter-shift gradient, and the raw expvals."""
    e = batch_expvals(ansatz, params, states0)
    resid = e - targets
    loss = float(np.mean(resid**2))
    grad = np.zeros_like(params)
    shift = 0.5 * math.pi
    for j in range(len(params)):
        shifted = params.copy()
        shifted[j] += shift
        up = batch_expvals(ansatz, shifted, states0)
        shifted[j] = params[j] - shift
        down = batch_expvals(ansatz, shifted, states0)
        grad[j] = float(np.mean(2.0 * resid * 0.5 * (up - down)))
    return loss, grad, e


def train_circuit(
    ansatz: Circuit,
    init_params: np.ndarray,
    dataset: QnnDataset,
    epochs: int,
    lr: float = 0.05,
) -> tuple[np.ndarray, list[tuple[float, float]]]:
    """Full-batch gradient descent on any tagged ansatz circuit."""
    if len(dataset) == 0:
        raise QnnError("empty dataset")
    params = np.asarray(init_params, dtype=np.float64).copy()
    states0 = encoded_states(dataset.features)
    targets = dataset.targets
    labels = dataset.labels
    log: list[tuple[float, float]] = []
    for _ in range(epochs):
        loss, grad, e = loss_and_grad(ansatz, params, states0, targets)
        acc = float(np.mean((e < 0).astype(np.int64) == labels))
        log.append((loss, acc))
        params = params - lr * grad
    return params, log


def train_qnn(
    spec: AnsatzSpec,
    dataset: QnnDataset,
    epochs: int = 40,
    lr: float = 0.05,
    seed: int = 0,
    init_params: np.ndarray | None = None,
    init_scale: float = 0.25,
) -> TrainedQnn:
    """Full-batch gradient descent at the given rate; deterministic per seed.

    Parameters start at uniform(-pi*init_scale, pi*init_scale); the default
    small scale avoids the flat loss plateaus that full-range starts hit on
    some seeds.
    """
    if init_params is None:
        rng = np.random.default_rng(seed)
        init_params = rng.uniform(-math.pi * init_scale, math.pi * init_scale, size=spec.n_params)
    elif len(init_params) != spec.n_params:
        raise QnnError(f"expected {spec.n_params} init params, got {len(init_params)}")
    params, log = train_circuit(build_ansatz(spec), init_params, dataset, epochs, lr)
    return TrainedQnn(spec, params, log)


def retrain(model: TrainedQnn, dataset: QnnDataset, epochs: int, lr: float = 0.05) -> TrainedQnn:
    """Continue gradient descent from the model's current parameters."""
    if epochs == 0:
        return TrainedQnn(model.spec, model.params.copy(), list(model.train_log))
    return train_qnn(model.spec, dataset, epochs=epochs, lr=lr, init_params=model.params)


def synthetic_blobs(
    n_qubits: int,
    n_train: int = 160,
    n_eval: int = 200,
    seed: int = 7,
    separation: float = 0.5,
    spread: float = 0.1,
) -> tuple[QnnDataset, QnnDataset]:
    """Two seeded Gaussian blobs in [0,1]^n, labels balanced; (train, eval)."""
    rng = np.random.default_rng(seed)
    lo = 0.5 - separation / 2.0
    hi = 0.5 + separation / 2.0

    def make(n: int) -> QnnDataset:
        labels = np.arange(n) % 2
        centers = np.where(labels[:, None] == 0, lo, hi)
        feats = np.clip(rng.normal(centers, spread, size=(n, n_qubits)), 0.0, 1.0)
        return QnnDataset(feats, labels)

    return make(n_train), make(n_eval)


_IDX_IMAGE_MAGIC = 0x00000803
_IDX_LABEL_MAGIC = 0x00000801


def _read_be32(fh, path: str) -> int:
    data = fh.read(4)
    if len(data) != 4:
        raise IdxFormatError(f"{path}: truncated header")
    return struct.unpack(">I", data)[0]


def load_idx(
    images_path: str, labels_path: str, keep_labels: tuple[int, int], n_features: int
) -> QnnDataset:
    """Load an IDX image/label pair, keep two classes, pool to n_features.

    Images are average-pooled into equal-area blocks and scaled to [0, 1];
    `keep_labels` maps (a, b) to labels (0, 1).
    """
    with open(images_path, "rb") as fh:
        magic = _read_be32(fh, images_path)
        if magic != _IDX_IMAGE_MAGIC:
            raise IdxFormatError(f"{images_path}: bad magic 0x{magic:08x} (want 0x{_IDX_IMAGE_MAGIC:08x})")
        count = _read_be32(fh, images_path)
        rows = _read_be32(fh, images_path)
        cols = _read_be32(fh, images_path)
        raw = fh.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise IdxFormatError(f"{images_path}: truncated pixel data")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols)
    with open(labels_path, "rb") as fh:
        magic = _read_be32(fh, labels_path)
        if magic != _IDX_LABEL_MAGIC:
            raise IdxFormatError(f"{labels_path}: bad magic 0x{magic:08x} (want 0x{_IDX_LABEL_MAGIC:08x})")
        lcount = _read_be32(fh, labels_path)
        raw = fh.read(lcount)
        if len(raw) != lcount:
            raise IdxFormatError(f"{labels_path}: truncated label data")
        labels = np.frombuffer(raw, dtype=np.uint8)
    if lcount != count:
        raise IdxFormatError(f"image/label count mismatch: {count} images vs {lcount} labels")

    br, bc = _pool_shape(rows, cols, n_features)
    a, b = keep_labels
    mask = (labels == a) | (labels == b)
    images = images[mask]
    kept = labels[mask]
    pooled = images.reshape(len(images), br, rows // br, bc, cols // bc).mean(axis=(2, 4)) / 255.0
    return QnnDataset(pooled.reshape(len(images), n_features), (kept == b).astype(np.int64))


def _pool_shape(rows: int, cols: int, n_features: int) -> tuple[int, int]:
    """Most-square (block_rows, block_cols) grid with equal-area blocks."""
    best = None
    for br in range(1, n_features + 1):
        if n_features % br:
            continue
        bc = n_features // br
        if rows % br == 0 and cols % bc == 0:
            cand = (abs(br - bc), br, bc)
            if best is None or cand < best:
                best = cand
    if best is None:
        raise QnnError(f"cannot tile {rows}x{cols} image into {n_features} equal-area blocks")
    return best[1], best[2]

"""Self-contained dense-network engine (float64 numpy).

Implements exactly what the parameter-recovery networks need: dense layers
with optional ReLU, batch normalization (eps 1e-3, momentum 0.99), inverted
dropout, Adam, MSE loss and an MAE metric. Everything is seeded and
deterministic: identical (seed, data, config) reproduces identical weights
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NeuralError(Exception):
    pass


class TrainingDivergedError(NeuralError):
    def __init__(self, epoch: int):
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # dense | batchnorm | dropout
    width: int = 0  # output width (dense) or feature width (batchnorm)
    activation: str = "none"  # relu | none (dense only)
    rate: float = 0.0  # dropout only

    def __post_init__(self):
        if self.kind not in ("dense", "batchnorm", "dropout"):
            raise NeuralError(f"unknown layer kind {self.kind!r}")
        if self.kind == "dropout" and not 0.0 <= self.rate < 1.0:
            raise NeuralError(f"dropout rate must be in [0, 1), got {self.rate}")
        if self.kind != "dropout" and self.width <= 0:
            raise NeuralError(f"{self.kind} width must be positive, got {self.width}")


class _Dense:
    def __init__(self, spec: LayerSpec, fan_in: int, rng: np.random.Generator):
        self.spec = spec
        self.fan_in = fan_in
        if spec.activation == "relu":
            limit = math.sqrt(6.0 / fan_in)  # He uniform
        else:
            limit = math.sqrt(6.0 / (fan_in + spec.width))  # Glorot uniform
        self.w = rng.uniform(-limit, limit, size=(fan_in, spec.width))
        self.b = np.zeros(spec.width)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None
        self._mask = None

    out_width = property(lambda self: self.spec.width)

    def forward(self, x, train):
        z = x @ self.w + self.b
        if self.spec.activation == "relu":
            mask = z > 0
            z = z * mask
            if train:
                self._mask = mask
        if train:
            self._x = x
        return z

    def backward(self, g):
        if self.spec.activation == "relu":
            g = g * self._mask
        self.gw[...] = self._x.T @ g
        self.gb[...] = g.sum(axis=0)
        return g @ self.w.T

    def params(self):
        return [("w", self.w, self.gw), ("b", self.b, self.gb)]

    def param_count(self):
        return self.w.size + self.b.size


class _BatchNorm:
    EPS = 1e-3
    MOMENTUM = 0.99

    def __init__(self, spec: LayerSpec):
        self.spec = spec
        w = spec.width
        self.gamma = np.ones(w)
        self.beta = np.zeros(w)
        self.running_mean = np.zeros(w)
        self.running_var = np.ones(w)
        self.ggamma = np.zeros(w)
        self.gbeta = np.zeros(w)
        self._xhat = None
        self._ivar = None
        self._xc = None

    out_width = property(lambda self: self.spec.width)

    def forward(self, x, train, update_stats=True):
        if train:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            if update_stats:
                self.running_mean[...] = self.MOMENTUM * self.running_mean + (1 - self.MOMENTUM) * mean
                self.running_var[...] = self.MOMENTUM * self.running_var + (1 - self.MOMENTUM) * var
        else:
            mean, var = self.running_mean, self.running_var
        ivar = 1.0 / np.sqrt(var + self.EPS)
        xhat = (x - mean) * ivar
        if train:
            self._xhat, self._ivar, self._xc = xhat, ivar, x - mean
        return self.gamma * xhat + self.beta

    def backward(self, g):
        n = g.shape[0]
        self.ggamma[...] = (g * self._xhat).sum(axis=0)
        self.gbeta[...] = g.sum(axis=0)
        dxhat = g * self.gamma
        dvar = (dxhat * self._xc).sum(axis=0) * (-0.5) * self._ivar**3
        dmean = -dxhat.sum(axis=0) * self._ivar + dvar * (-2.0 / n) * self._xc.sum(axis=0)
        return dxhat * self._ivar + dvar * (2.0 / n) * self._xc + dmean / n

    def params(self):
        return [("gamma", self.gamma, self.ggamma), ("beta", self.beta, self.gbeta)]

    def state(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def param_count(self):
        return 4 * self.spec.width  # gamma, beta + non-trainable running stats


class _Dropout:
    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self._mask = None

    def forward(self, x, train, rng=None):
        if not train or self.spec.rate == 0.0:
            return x
        keep = 1.0 - self.spec.rate
        self._mask = (rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, g):
        return g if self._mask is None else g * self._mask

    def params(self):
        return []

    def param_count(self):
        return 0


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 1024
    validation_fraction: float = 0.2
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    shuffle_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise NeuralError(f"validation_fraction must be in (0, 1), got {self.validation_fraction}")


@dataclass
class TrainTrace:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)


class Mlp:
    """A stack of dense / batchnorm / dropout layers with a seeded rng."""

    def __init__(self, input_dim: int, specs: list[LayerSpec], seed: int = 0):
        self.input_dim = input_dim
        self.specs = list(specs)
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.layers = []
        width = input_dim
        for spec in self.specs:
            if spec.kind == "dense":
                self.layers.append(_Dense(spec, width, rng))
                width = spec.width
            elif spec.kind == "batchnorm":
                if spec.width != width:
                    raise NeuralError(f"batchnorm width {spec.width} does not match input width {width}")
                self.layers.append(_BatchNorm(spec))
            else:
                self.layers.append(_Dropout(spec))
        self.output_dim = width
        self._rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])

    @property
    def has_dropout(self) -> bool:
        return any(s.kind == "dropout" and s.rate > 0 for s in self.specs)

    def forward(self, x: np.ndarray, train: bool = False, update_stats: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise NeuralError(f"batch shape {x.shape} does not match input dim {self.input_dim}")
        for layer in self.layers:
            if isinstance(layer, _BatchNorm):
                x = layer.forward(x, train, update_stats)
            elif isinstance(layer, _Dropout):
                x = layer.forward(x, train, self._rng)
            else:
                x = layer.forward(x, train)
        return x

    def backward(self, gout: np.ndarray) -> np.ndarray:
        g = gout
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, value, grad in layer.params():
                out.append((f"{i}.{name}", value, grad))
        return out

    def param_counts(self) -> list[int]:
        return [layer.param_count() for layer in self.layers]

    def param_count(self) -> int:
        return sum(self.param_counts())

    def equals(self, other: "Mlp") -> bool:
        if self.input_dim != other.input_dim or self.specs != other.specs or self.seed != other.seed:
            return False
        for (na, va, _), (nb, vb, _) in zip(self.parameters(), other.parameters()):
            if na != nb or not np.array_equal(va, vb):
                return False
        for la, lb in zip(self.layers, other.layers):
            if isinstance(la, _BatchNorm):
                for (na, sa), (nb, sb) in zip(la.state(), lb.state()):
                    if not np.array_equal(sa, sb):
                        return False
        return True


def build_autoencoder(k: int, input_dim: int | None = None, seed: int = 0) -> Mlp:
    """Encoder 256-128-64-32 to a 16-wide latent, mirrored decoder back to k.

    Batchnorm and 30% dropout follow the first two dense layers of each half;
    the output layer is linear.
    """
    if k < 1:
        raise NeuralError(f"output dim must be >= 1, got {k}")
    input_dim = k if input_dim is None else input_dim
    d = lambda w, act="relu": LayerSpec("dense", w, act)
    bn = lambda w: LayerSpec("batchnorm", w)
    drop = lambda: LayerSpec("dropout", rate=0.3)
    specs = [
        # encoder
        d(256), bn(256), drop(),
        d(128), bn(128), drop(),
        d(64),
        d(32),
        d(16),  # latent
        # decoder
        d(32), bn(32), drop(),
        d(64), bn(64), drop(),
        d(128),
        d(256),
        d(k, "none"),
    ]
    return Mlp(input_dim, specs, seed=seed)


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((pred - target) ** 2))


def mae(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean(np.abs(pred - target)))


class Adam:
    def __init__(self, model: Mlp, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros_like(v) for _, v, _ in model.parameters()]
        self.v = [np.zeros_like(v) for _, v, _ in model.parameters()]

    def step(self, model: Mlp):
        self.t += 1
        c = self.cfg
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for (_, value, grad), m, v in zip(model.parameters(), self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * grad
            v *= c.beta2
            v += (1 - c.beta2) * grad**2
            value -= c.lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def train(model: Mlp, x: np.ndarray, y: np.ndarray, cfg: TrainConfig | None = None) -> TrainTrace:
    """Mini-batch Adam on MSE with a seeded shuffle and held-out validation."""
    cfg = cfg or TrainConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise NeuralError(f"feature/target counts differ: {len(x)} vs {len(y)}")
    if len(x) < 10:
        raise NeuralError(f"need at least 10 samples, got {len(x)}")
    rng = np.random.default_rng(cfg.shuffle_seed)
    n_val = max(1, int(round(cfg.validation_fraction * len(x))))
    split = rng.permutation(len(x))
    val_idx, train_idx = split[:n_val], split[n_val:]
    xt, yt = x[train_idx], y[train_idx]
    xv, yv = x[val_idx], y[val_idx]

    optimizer = Adam(model, cfg)
    trace = TrainTrace()
    n = len(xt)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            pred = model.forward(xt[idx], train=True)
            diff = pred - yt[idx]
            loss = float(np.mean(diff**2))
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch)
            total += loss * len(idx)
            model.backward(2.0 * diff / diff.size)
            optimizer.step(model)
        pv = model.forward(xv, train=False)
        trace.train_loss.append(total / n)
        trace.val_loss.append(mse(pv, yv))
        trace.val_mae.append(mae(pv, yv))
    return trace


def grad_check(model: Mlp, x: np.ndarray, y: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between backprop and central finite differences.

    Requires a small model with dropout disabled; batchnorm runs on batch
    statistics with running-stat updates frozen.
    """
    if model.has_dropout:
        raise NeuralError("grad_check requires dropout disabled (rate 0)")
    if model.param_count() >= 5000:
        raise NeuralError(f"grad_check capped at 5000 params, model has {model.param_count()}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    def loss() -> float:
        return mse(model.forward(x, train=True, update_stats=False), y)

    pred = model.forward(x, train=True, update_stats=False)
    model.backward(2.0 * (pred - y) / pred.size)
    worst = 0.0
    for _, value, grad in model.parameters():
        flat = value.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = loss()
            flat[i] = keep - eps
            down = loss()
            flat[i] = keep
            numeric = (up - down) / (2 * eps)
            rel = abs(gflat[i] - numeric) / max(1e-8, abs(gflat[i]) + abs(numeric))
            worst = max(worst, rel)
    return worst


def save_mlp(model: Mlp, path: str, meta: dict | None = None):
    """Layer spec list, then row-major arrays at 17 significant digits."""
    with open(path, "w") as fh:
        fh.write("mlp v1\n")
        for key, value in (meta or {}).items():
            fh.write(f"# {key} {value}\n")
        fh.write(f"seed {model.seed}\n")
        fh.write(f"input_dim {model.input_dim}\n")
        for spec in model.specs:
            if spec.kind == "dense":
                fh.write(f"layer dense width {spec.width} act {spec.activation}\n")
            elif spec.kind == "batchnorm":
                fh.write(f"layer batchnorm width {spec.width}\n")
            else:
                fh.write(f"layer dropout rate {spec.rate:.17g}\n")
        for i, layer in enumerate(model.layers):
            arrays = [(n, v) for n, v, _ in layer.params()]
            if isinstance(layer, _BatchNorm):
                arrays += layer.state()
            for name, value in arrays:
                mat = value.reshape(value.shape[0], -1) if value.ndim == 2 else value.reshape(1, -1)
                fh.write(f"tensor {i}.{name} {mat.shape[0]} {mat.shape[1]}\n")
                for row in mat:
                    fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_mlp(path: str) -> Mlp:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    if not lines or lines[0] != "mlp v1":
        raise NeuralError(f"{path}: not a checkpoint file (missing 'mlp v1' header)")
    pos = 1
    seed = 0
    input_dim = None
    specs: list[LayerSpec] = []
    while pos < len(lines) and not lines[pos].startswith("tensor"):
        fields = lines[pos].split()
        if fields[0] == "seed":
            seed = int(fields[1])
        elif fields[0] == "input_dim":
            input_dim = int(fields[1])
        elif fields[0] == "layer" and fields[1] == "dense":
            specs.append(LayerSpec("dense", int(fields[3]), fields[5]))
        elif fields[0] == "layer" and fields[1] == "batchnorm":
            specs.append(LayerSpec("batchnorm", int(fields[3])))
        elif fields[0] == "layer" and fields[1] == "dropout":
            specs.append(LayerSpec("dropout", rate=float(fields[3])))
        elif fields[0]:
            raise NeuralError(f"{path}: unrecognized checkpoint line {lines[pos]!r}")
        pos += 1
    if input_dim is None:
        raise NeuralError(f"{path}: missing input_dim")
    model = Mlp(input_dim, specs, seed=seed)
    tensors: dict[str, np.ndarray] = {}
    while pos < len(lines):
        fields = lines[pos].split()
        if not fields:
            pos += 1
            continue
        if fields[0] != "tensor":
            raise NeuralError(f"{path}: expected tensor header, got {lines[pos]!r}")
        name, rows, cols = fields[1], int(fields[2]), int(fields[3])
        data = np.array(
            [[float(v) for v in lines[pos + 1 + r].split()] for r in range(rows)], dtype=np.float64
        )
        if data.shape != (rows, cols):
            raise NeuralError(f"{path}: tensor {name} shape mismatch")
        tensors[name] = data
        pos += 1 + rows
    for i, layer in enumerate(model.layers):
        arrays = [(n, v) for n, v, _ in layer.params()]
        if isinstance(layer, _BatchNorm):
            arrays += layer.state()
        for name, value in arrays:
            stored = tensors[f"{i}.{name}"]
            value[...] = stored.reshape(value.shape)
    return model

"""Run configuration: a single JSON document, overridable by dotted paths.

`resolve()` merges user values over the defaults, validates field by field
(reporting the offending path), and returns the resolved dict plus a stable
content hash that every output file embeds.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass

from .circuit import GateKind
from .neural import TrainConfig
from .qnn import ROTATION_NAMES, AnsatzSpec
from .recovery import EvalConfig
from .transpiler import CouplingMap, TranspileOptions


class ConfigError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"config field '{path}': {message}")
        self.path = path


DEFAULTS: dict = {
    "seed": 1,
    "out_dir": "runs/out",
    "workers": 1,
    "ansatz": {
        "n_qubits": 2,
        "n_layers": 1,
        "rotations": ["rx", "ry", "rz"],
        "entangle": "linear_chain",
    },
    "transpile": {
        "optimization_level": 1,
        "coupling": "linear",
        "n_physical": None,
        "zero_tol": 1e-9,
    },
    "dataset": {
        "source": "synthetic",
        "n_train": 160,
        "n_eval": 200,
        "separation": 0.5,
        "spread": 0.1,
        "idx_images": None,
        "idx_labels": None,
        "keep_labels": [0, 1],
    },
    "qnn_train": {"epochs": 40, "lr": 0.05},
    "retrain": {"epochs": 30, "lr": 0.05},
    "ae_train": {
        "epochs": 100,
        "batch_size": 1024,
        "validation_fraction": 0.2,
        "lr": 0.001,
        "grid_step": 0.1,
    },
    "recovery": {"methods": ["autoencoder"], "bf_step": 0.1},
    "countermeasures": {"dummy_qubits": [0, 2, 4], "extra_layer_pairs": [0, 2, 4]},
    "bench_layers": {
        "n_qubits": 4,
        "rotations": ["ry", "rz"],
        "layers": [1, 2, 4, 8, 16],
        "bf_max_layers": 4,
    },
    "lut_templates": None,  # null: the ansatz rotation ordering
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(here, "unknown field")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_override(cfg: dict, dotted: str, raw: str):
    """Set a field by dotted path; the value parses as JSON, else as a string."""
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = dotted.split(".")
    node = cfg
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(dotted, "unknown field")
        node = node[key]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigError(dotted, "unknown field")
    node[keys[-1]] = value


def _require(cfg: dict, path: str, types, pred=None, desc: str = ""):
    node = cfg
    for key in path.split("."):
        node = node[key]
    if node is None:
        return None
    if types is bool and not isinstance(node, bool):
        raise ConfigError(path, f"expected bool, got {node!r}")
    if types is not bool and isinstance(node, bool):
        raise ConfigError(path, f"expected {desc or types}, got bool")
    if not isinstance(node, types):
        raise ConfigError(path, f"expected {desc or types}, got {node!r}")
    if pred is not None and not pred(node):
        raise ConfigError(path, f"invalid value {node!r} ({desc})")
    return node


def validate(cfg: dict):
    num = (int, float)
    _require(cfg, "seed", int, desc="int")
    _require(cfg, "out_dir", str, desc="string")
    _require(cfg, "workers", int, lambda v: v >= 1, "int >= 1")
    _require(cfg, "ansatz.n_qubits", int, lambda v: v >= 1, "int >= 1")
    _require(cfg, "ansatz.n_layers", int, lambda v: v >= 1, "int >= 1")
    rots = _require(cfg, "ansatz.rotations", list, lambda v: len(v) >= 1, "nonempty list")
    for r in rots:
        if r not in ROTATION_NAMES:
            raise ConfigError("ansatz.rotations", f"unknown rotation {r!r}")
    _require(cfg, "ansatz.entangle", str, lambda v: v in ("linear_chain", "ring", "none"), "entanglement")
    _require(cfg, "transpile.optimization_level", int, lambda v: v in (0, 1), "0 or 1")
    _require(cfg, "transpile.coupling", str, lambda v: v == "linear", "'linear'")
    _require(cfg, "transpile.n_physical", int, lambda v: v >= 1, "int >= 1")
    _require(cfg, "transpile.zero_tol", num, lambda v: v > 0, "positive number")
    _require(cfg, "dataset.source", str, lambda v: v in ("synthetic", "idx"), "'synthetic' or 'idx'")
    _require(cfg, "dataset.n_train", int, lambda v: v >= 2, "int >= 2")
    _require(cfg, "dataset.n_eval", int, lambda v: v >= 2, "int >= 2")
    _require(cfg, "dataset.separation", num, lambda v: 0 < v <= 1, "in (0, 1]")
    _require(cfg, "dataset.spread", num, lambda v: v > 0, "positive number")
    if cfg["dataset"]["source"] == "idx":
        for key in ("idx_images", "idx_labels"):
            path = _require(cfg, f"dataset.{key}", str, desc="path")
            if path is None:
                raise ConfigError(f"dataset.{key}", "required when dataset.source is 'idx'")
            if not os.path.exists(path):
                raise ConfigError(f"dataset.{key}", f"path does not exist: {path}")
        keep = _require(cfg, "dataset.keep_labels", list, lambda v: len(v) == 2, "two labels")
        if any(not isinstance(v, int) for v in keep):
            raise ConfigError("dataset.keep_labels", "labels must be integers")
    _require(cfg, "qnn_train.epochs", int, lambda v: v >= 0, "int >= 0")
    _require(cfg, "qnn_train.lr", num, lambda v: v >= 0, "number >= 0")
    _require(cfg, "retrain.epochs", int, lambda v: v >= 0, "int >= 0")
    _require(cfg, "retrain.lr", num, lambda v: v >= 0, "number >= 0")
    _require(cfg, "ae_train.epochs", int, lambda v: v >= 1, "int >= 1")
    _require(cfg, "ae_train.batch_size", int, lambda v: v >= 1, "int >= 1")
    _require(cfg, "ae_train.validation_fraction", num, lambda v: 0 < v < 1, "in (0, 1)")
    _require(cfg, "ae_train.lr", num, lambda v: v > 0, "positive number")
    _require(cfg, "ae_train.grid_step", num, lambda v: v > 0, "positive number")
    methods = _require(cfg, "recovery.methods", list, lambda v: len(v) >= 1, "nonempty list")
    for m in methods:
        if m not in ("autoencoder", "brute_force"):
            raise ConfigError("recovery.methods", f"unknown method {m!r}")
    _require(cfg, "recovery.bf_step", num, lambda v: v > 0, "positive number")
    for key in ("dummy_qubits", "extra_layer_pairs"):
        vals = _require(cfg, f"countermeasures.{key}", list, lambda v: len(v) >= 1, "nonempty list")
        for v in vals:
            if not isinstance(v, int) or not 0 <= v <= 4:
                raise ConfigError(f"countermeasures.{key}", f"values must be ints in 0..4, got {v!r}")
    _require(cfg, "bench_layers.n_qubits", int, lambda v: v >= 1, "int >= 1")
    lay = _require(cfg, "bench_layers.layers", list, lambda v: len(v) >= 1, "nonempty list")
    for v in lay:
        if not isinstance(v, int) or v < 1:
            raise ConfigError("bench_layers.layers", f"values must be ints >= 1, got {v!r}")
    _require(cfg, "bench_layers.bf_max_layers", int, lambda v: v >= 1, "int >= 1")
    brots = _require(cfg, "bench_layers.rotations", list, lambda v: len(v) >= 1, "nonempty list")
    for r in brots:
        if r not in ROTATION_NAMES:
            raise ConfigError("bench_layers.rotations", f"unknown rotation {r!r}")
    if cfg["lut_templates"] is not None:
        temps = _require(cfg, "lut_templates", list, lambda v: len(v) >= 1, "nonempty list")
        for t in temps:
            if not isinstance(t, list) or any(r not in ROTATION_NAMES for r in t):
                raise ConfigError("lut_templates", f"each template must be a list of rotations, got {t!r}")


@dataclass
class ResolvedConfig:
    raw: dict
    hash: str

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    def ansatz_spec(self) -> AnsatzSpec:
        a = self.raw["ansatz"]
        return AnsatzSpec(
            a["n_qubits"],
            a["n_layers"],
            tuple(ROTATION_NAMES[r] for r in a["rotations"]),
            a["entangle"],
        )

    def transpile_options(self) -> TranspileOptions:
        t = self.raw["transpile"]
        coupling = CouplingMap.linear(t["n_physical"]) if t["n_physical"] else None
        return TranspileOptions(t["optimization_level"], coupling, t["zero_tol"])

    def lut_templates(self) -> list[tuple[GateKind, ...]]:
        if self.raw["lut_templates"] is None:
            return [self.ansatz_spec().rotations]
        return [tuple(ROTATION_NAMES[r] for r in t) for t in self.raw["lut_templates"]]

    def ae_train_config(self) -> TrainConfig:
        a = self.raw["ae_train"]
        return TrainConfig(
            epochs=a["epochs"],
            batch_size=a["batch_size"],
            validation_fraction=a["validation_fraction"],
            lr=a["lr"],
            shuffle_seed=self.seed,
        )

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            seed=self.seed,
            victim_epochs=self.raw["qnn_train"]["epochs"],
            victim_lr=self.raw["qnn_train"]["lr"],
            retrain_epochs=self.raw["retrain"]["epochs"],
            retrain_lr=self.raw["retrain"]["lr"],
            optimization_level=self.raw["transpile"]["optimization_level"],
            zero_tol=self.raw["transpile"]["zero_tol"],
            grid_step=self.raw["ae_train"]["grid_step"],
            bf_step=self.raw["recovery"]["bf_step"],
            ae_train=self.ae_train_config(),
            workers=self.raw["workers"],
        )

    def to_json(self) -> str:
        doc = dict(self.raw)
        doc["config_hash"] = self.hash
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def resolve(user: dict | None = None, overrides: list[tuple[str, str]] | None = None) -> ResolvedConfig:
    cfg = _merge(DEFAULTS, user or {})
    for dotted, raw in overrides or []:
        apply_override(cfg, dotted, raw)
    validate(cfg)
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:12]
    return ResolvedConfig(cfg, digest)


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON in {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<file>", f"config root must be an object, got {type(doc).__name__}")
    doc.pop("config_hash", None)  # round-trip convenience for config.resolved files
    return doc

"""Parameter extraction: grid datasets, network recovery, brute force, evaluation.

The forward map a recovery model learns is: original rotation tuple ->
canonical transpiled RZ triple (the level-0 rz,sx,rz,sx,rz pattern, always 3
angles regardless of template length). Victim segments shortened by level-1
optimization are re-canonicalized through their fused 2x2 unitary, which is
exactly the same map, so network inputs always have width 3.

The brute-force baseline follows the classic protocol: for every candidate
grid tuple the full reverse-engineered circuit is re-transpiled and compared
against the victim, so its cost grows with both grid size (63^k per segment)
and circuit length. Scoring is segment-local and phase-invariant:
2 - |tr(U^+ V)| over the fused 2x2 segment unitaries.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import Circuit, Gate, GateKind, bind, cnot, normalize_angle
from .neural import Mlp, TrainConfig, TrainTrace, build_autoencoder, train
from .qnn import AnsatzSpec, QnnDataset, build_ansatz, circuit_accuracy, train_circuit, train_qnn
from .simulator import gate_code
from .structlut import (
    Lut,
    PROBE_ANGLES,
    RecoveredStructure,
    Template,
    build_lut,
    recover_structure,
    segment,
    unroute,
)
from .transpiler import TranspileOptions, _zsx_product, canonical_triple, transpile
from . import kernels


class RecoveryError(Exception):
    pass


def wrap_angles(a: np.ndarray) -> np.ndarray:
    """Vectorized wrap to (-pi, pi]."""
    out = np.remainder(np.asarray(a, dtype=np.float64) + math.pi, 2.0 * math.pi) - math.pi
    out[out == -math.pi] = math.pi
    return out


def wrapped_abs_error(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """|difference| after wrapping to (-pi, pi], the parameter-error metric."""
    return np.abs(wrap_angles(np.asarray(pred) - np.asarray(truth)))


def grid_axis(step: float = 0.1) -> np.ndarray:
    """Grid {-pi + i*step : value <= pi}, wrapped to (-pi, pi] (63 points at 0.1)."""
    if step <= 0:
        raise RecoveryError(f"step must be positive, got {step}")
    count = int(math.floor(2.0 * math.pi / step + 1e-9)) + 1
    return wrap_angles(-math.pi + step * np.arange(count))


@dataclass
class ParamDataset:
    """Grid samples (transpiled canonical triple -> original tuple) for one template."""

    template: Template
    k: int
    x: np.ndarray  # (n, 3)
    y: np.ndarray  # (n, k)
    step: float
    zero_tol: float
    n_duplicates: int  # exact duplicate X rows (forward-map injectivity check)

    def __len__(self) -> int:
        return len(self.x)


def forward_triple(template: Template, values) -> tuple[float, float, float]:
    """Canonical transpiled RZ triple of a bound template (the level-0 pattern).

    Identical to transpiling the one-qubit template circuit at level 0 and
    reading the three RZ angles in circuit order.
    """
    codes = np.array([gate_code(k) for k in template], dtype=np.int64)
    angles = np.asarray(values, dtype=np.float64)
    return canonical_triple(*kernels.fuse_run(codes, angles))


def gen_dataset(template, step: float = 0.1, zero_tol: float = 1e-9) -> ParamDataset:
    """Enumerate the k-dim grid lexicographically and record the forward map."""
    template = tuple(template)
    k = len(template)
    if not 1 <= k <= 3:
        raise RecoveryError(f"grid datasets support 1..3 rotation parameters, got {k}")
    axis = grid_axis(step)
    tuples = np.array(list(itertools.product(axis, repeat=k)))
    codes = np.array([gate_code(kind) for kind in template], dtype=np.int64)
    x = np.empty((len(tuples), 3))
    for i, values in enumerate(tuples):
        x[i] = canonical_triple(*kernels.fuse_run(codes, values))
    n_dup = len(x) - len(np.unique(x, axis=0))
    return ParamDataset(template, k, x, tuples, step, zero_tol, n_dup)


def train_recovery_model(
    ds: ParamDataset, cfg: TrainConfig | None = None, seed: int = 0
) -> tuple[Mlp, TrainTrace]:
    """Train the encoder/decoder stack to map transpiled triples back to tuples."""
    if len(ds) == 0:
        raise RecoveryError("empty dataset")
    cfg = cfg or TrainConfig()
    model = build_autoencoder(ds.k, input_dim=ds.x.shape[1], seed=seed)
    trace = train(model, ds.x, ds.y, cfg)
    return model, trace


def heldout_wrapped_mae(model: Mlp, ds: ParamDataset, cfg: TrainConfig) -> float:
    """Mean wrapped |error| on the validation split used by train()."""
    rng = np.random.default_rng(cfg.shuffle_seed)
    n_val = max(1, int(round(cfg.validation_fraction * len(ds))))
    val_idx = rng.permutation(len(ds))[:n_val]
    pred = model.forward(ds.x[val_idx], train=False)
    return float(np.mean(wrapped_abs_error(pred, ds.y[val_idx])))


def recover_params_ae(struct: RecoveredStructure, models: dict[Template, Mlp]) -> np.ndarray:
    """Infer original angles per matched segment and concatenate in tag order."""
    out = np.zeros(struct.n_params)
    by_template: dict[Template, list[int]] = {}
    for si, seg in enumerate(struct.segments):
        if seg.template not in models:
            names = ",".join(k.value for k in seg.template)
            raise RecoveryError(f"no trained model for template [{names}]")
        by_template.setdefault(seg.template, []).append(si)
    for template, seg_indices in by_template.items():
        model = models[template]
        x = np.array([struct.segments[si].transpiled_angles for si in seg_indices])
        pred = model.forward(x, train=False)
        for row, si in enumerate(seg_indices):
            seg = struct.segments[si]
            for pos, tag in enumerate(seg.tags):
                out[tag] = normalize_angle(float(pred[row, pos]))
    return out


def _segment_distance(u_triple, v_triple) -> float:
    """Phase-invariant distance 2 - |tr(U^+ V)| from canonical triples."""
    u = _zsx_product(u_triple[2], u_triple[1], u_triple[0])
    v = _zsx_product(v_triple[2], v_triple[1], v_triple[0])
    return 2.0 - abs(np.trace(u.conj().T @ v))


def template_preimages(template: Template, values) -> list[np.ndarray]:
    """All in-domain tuples whose bound template has the same unitary up to phase.

    Three-rotation Euler-complete templates cover SU(2) twice: the fold
    partner (numerically verified here) produces an identical transpiled
    segment, so it is a function-equivalent set of original parameters.
    Templates without a verified partner return just the input.
    """
    vals = wrap_angles(np.asarray(values, dtype=np.float64))
    out = [vals]
    if len(template) != 3:
        return out
    codes = np.array([gate_code(k) for k in template], dtype=np.int64)
    u = _zsx_product(*forward_triple(template, vals)[::-1])
    for middle in (math.pi - vals[1], -vals[1]):
        cand = wrap_angles(np.array([vals[0] + math.pi, middle, vals[2] + math.pi]))
        v = _zsx_product(*canonical_triple(*kernels.fuse_run(codes, cand))[::-1])
        if 2.0 - abs(np.trace(u.conj().T @ v)) <= 1e-9 and np.max(wrapped_abs_error(cand, vals)) > 1e-9:
            out.append(cand)
            break
    return out


def equivalent_errors(
    struct: RecoveredStructure, recovered: np.ndarray, original: np.ndarray
) -> np.ndarray:
    """Per-tag wrapped errors against the closest function-equivalent original.

    Each segment's original tuple may have a fold partner generating the
    identical transpiled segment; the branch minimizing that segment's mean
    error is charged. Complements (never replaces) the raw metric.
    """
    errors = wrapped_abs_error(recovered, original)
    for seg in struct.segments:
        tags = list(seg.tags)
        orig = original[tags]
        best = errors[tags]
        for pre in template_preimages(seg.template, orig)[1:]:
            cand = wrapped_abs_error(recovered[tags], pre)
            if cand.mean() < best.mean():
                best = cand
        errors[tags] = best
    return errors


def _bf_segment_scan(
    struct: RecoveredStructure,
    seg_index: int,
    axis: np.ndarray,
    opts: TranspileOptions,
    start: int,
    stop: int,
) -> np.ndarray:
    """Distances for candidate indices [start, stop) of one segment's grid.

    Each candidate re-transpiles the full reverse-engineered circuit (with
    generic probe values in every other slot) and scores the target segment.
    """
    seg = struct.segments[seg_index]
    k = len(seg.tags)
    base = np.empty(struct.n_params)
    for other in struct.segments:
        for pos, tag in enumerate(other.tags):
            base[tag] = PROBE_ANGLES[pos % len(PROBE_ANGLES)]
    target = seg.transpiled_angles
    sizes = [len(axis)] * k
    out = np.empty(stop - start)
    params = base.copy()
    for offset, flat in enumerate(range(start, stop)):
        rem = flat
        for pos in range(k - 1, -1, -1):
            params[seg.tags[pos]] = axis[rem % sizes[pos]]
            rem //= sizes[pos]
        candidate = transpile(bind(struct.ansatz, params), opts).circuit
        clean, _ = unroute(candidate)
        cand_seg = segment(clean)[seg.wire][seg.index]
        out[offset] = _segment_distance(target, canonical_triple(*cand_seg.fused()))
    return out


def recover_params_bf(
    struct: RecoveredStructure,
    step: float = 0.1,
    opts: TranspileOptions | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Brute-force baseline: exhaustive per-segment grid search.

    Enumerates the grid lexicographically; ties keep the lexicographically
    smallest tuple. Returns the full recovered parameter vector.
    """
    if step <= 0:
        raise RecoveryError(f"step must be positive, got {step}")
    opts = opts or TranspileOptions()
    axis = grid_axis(step)
    out = np.zeros(struct.n_params)
    for si, seg in enumerate(struct.segments):
        k = len(seg.tags)
        total = len(axis) ** k
        if workers > 1 and total >= 4 * len(axis):
            bounds = np.linspace(0, total, workers * 2 + 1, dtype=int)
            chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(
                    pool.map(_bf_scan_star, [(struct, si, axis, opts, a, b) for a, b in chunks])
                )
            dists = np.concatenate(parts)
        else:
            dists = _bf_segment_scan(struct, si, axis, opts, 0, total)
        best = int(np.argmin(dists))  # first minimum = lexicographically smallest tuple
        rem = best
        values = np.empty(k)
        for pos in range(k - 1, -1, -1):
            values[pos] = axis[rem % len(axis)]
            rem //= len(axis)
        for pos, tag in enumerate(seg.tags):
            out[tag] = values[pos]
    return out


def _bf_scan_star(args):
    return _bf_segment_scan(*args)


@dataclass
class EvalConfig:
    """Everything evaluate() needs; defaults mirror the reference experiments."""

    seed: int = 1
    victim_epochs: int = 40
    victim_lr: float = 0.05
    retrain_epochs: int = 30
    retrain_lr: float = 0.05
    optimization_level: int = 1
    zero_tol: float = 1e-9
    grid_step: float = 0.1
    bf_step: float = 0.1
    ae_train: TrainConfig = field(default_factory=TrainConfig)
    workers: int = 1

    def transpile_options(self) -> TranspileOptions:
        return TranspileOptions(optimization_level=self.optimization_level, zero_tol=self.zero_tol)


@dataclass
class RecoveryReport:
    """One classifier/method evaluation row."""

    n_qubits: int
    n_layers: int
    rotations: str
    n_params: int
    method: str  # autoencoder | brute_force
    optimization_level: int
    seed: int
    structure_exact: bool
    param_err_mean: float
    param_err_std: float
    param_err_mean_equiv: float  # vs closest function-equivalent original (fold-aware)
    param_err_std_equiv: float
    acc_original: float
    acc_recovered: float
    acc_error_pct: float
    acc_after_retraining: float
    diff_acc_pct: float
    dataset_s: float
    train_s: float
    recovery_s: float
    victim_train_s: float
    notes: tuple[str, ...] = ()
    config_hash: str = ""

    @property
    def classifier(self) -> str:
        return f"{self.n_qubits}Q;{self.n_layers}-layer"


# Columns whose values are deterministic for a fixed seed/config (timings are not).
REPORT_CSV_COLUMNS = [
    "classifier",
    "n_params",
    "rotations",
    "method",
    "optimization_level",
    "seed",
    "structure_exact",
    "param_err_mean",
    "param_err_std",
    "param_err_mean_equiv",
    "param_err_std_equiv",
    "acc_original",
    "acc_recovered",
    "acc_error_pct",
    "acc_after_retraining",
    "diff_acc_pct",
    "config_hash",
]
TIMING_CSV_COLUMNS = ["classifier", "method", "dataset_s", "train_s", "recovery_s", "victim_train_s"]


def prepare_ae_models(
    templates: list[Template], cfg: EvalConfig
) -> tuple[dict[Template, Mlp], dict[Template, dict]]:
    """Generate grid datasets and train one recovery model per template."""
    models: dict[Template, Mlp] = {}
    info: dict[Template, dict] = {}
    for template in templates:
        template = tuple(template)
        if template in models:
            continue
        t0 = time.perf_counter()
        ds = gen_dataset(template, step=cfg.grid_step, zero_tol=cfg.zero_tol)
        t1 = time.perf_counter()
        model, trace = train_recovery_model(ds, cfg.ae_train, seed=cfg.seed)
        t2 = time.perf_counter()
        models[template] = model
        info[template] = {
            "dataset_s": t1 - t0,
            "train_s": t2 - t1,
            "n_samples": len(ds),
            "n_duplicates": ds.n_duplicates,
            "trace": trace,
            "heldout_wrapped_mae": heldout_wrapped_mae(model, ds, cfg.ae_train),
        }
    return models, info


def _structure_matches(recovered: Circuit, original: Circuit) -> bool:
    if len(recovered.gates) != len(original.gates):
        return False
    for a, b in zip(recovered.gates, original.gates):
        if a.kind is not b.kind or a.qubits != b.qubits or a.param_tag != b.param_tag:
            return False
    return True


def evaluate(
    spec: AnsatzSpec,
    train_ds: QnnDataset,
    eval_ds: QnnDataset,
    method: str,
    cfg: EvalConfig | None = None,
    ae_models: dict[Template, Mlp] | None = None,
    ae_info: dict[Template, dict] | None = None,
) -> RecoveryReport:
    """Full pipeline: train victim, transpile, recover structure and params,
    score wrapped parameter error and accuracy gap, then retrain the copy.
    """
    cfg = cfg or EvalConfig()
    if method not in ("autoencoder", "brute_force"):
        raise RecoveryError(f"unknown method {method!r}")
    opts = cfg.transpile_options()

    t0 = time.perf_counter()
    victim = train_qnn(spec, train_ds, epochs=cfg.victim_epochs, lr=cfg.victim_lr, seed=cfg.seed)
    victim_train_s = time.perf_counter() - t0

    ansatz = build_ansatz(spec)
    transpiled = transpile(bind(ansatz, victim.params), opts).circuit
    lut = build_lut([spec.rotations], opts)

    dataset_s = train_s = 0.0
    t0 = time.perf_counter()
    struct = recover_structure(transpiled, lut)
    if method == "autoencoder":
        if ae_models is None:
            ae_models, ae_info = prepare_ae_models([spec.rotations], cfg)
        if ae_info:
            for seg_template in {s.template for s in struct.segments}:
                meta = ae_info.get(seg_template)
                if meta:
                    dataset_s += meta["dataset_s"]
                    train_s += meta["train_s"]
        recovered_params = recover_params_ae(struct, ae_models)
    else:
        recovered_params = recover_params_bf(struct, step=cfg.bf_step, opts=opts, workers=cfg.workers)
    recovery_s = time.perf_counter() - t0

    if struct.n_params == spec.n_params:
        errors = wrapped_abs_error(recovered_params, victim.params)
        errors_equiv = equivalent_errors(struct, recovered_params, victim.params)
    else:  # structure mismatch: errors are undefined, accuracies still meaningful
        errors = errors_equiv = np.array([float("nan")])
    acc_original = circuit_accuracy(ansatz, victim.params, eval_ds)
    acc_recovered = circuit_accuracy(struct.ansatz, recovered_params, eval_ds)
    retrained, _ = train_circuit(
        struct.ansatz, recovered_params, train_ds, cfg.retrain_epochs, cfg.retrain_lr
    )
    acc_retrained = circuit_accuracy(struct.ansatz, retrained, eval_ds)

    return RecoveryReport(
        n_qubits=spec.n_qubits,
        n_layers=spec.n_layers,
        rotations=" ".join(k.value for k in spec.rotations),  # space-joined: stays one CSV field
        n_params=spec.n_params,
        method=method,
        optimization_level=cfg.optimization_level,
        seed=cfg.seed,
        structure_exact=_structure_matches(struct.ansatz, ansatz),
        param_err_mean=float(np.mean(errors)),
        param_err_std=float(np.std(errors)),
        param_err_mean_equiv=float(np.mean(errors_equiv)),
        param_err_std_equiv=float(np.std(errors_equiv)),
        acc_original=acc_original,
        acc_recovered=acc_recovered,
        acc_error_pct=abs(acc_original - acc_recovered) * 100.0,
        acc_after_retraining=acc_retrained,
        diff_acc_pct=abs(acc_original - acc_retrained) * 100.0,
        dataset_s=dataset_s,
        train_s=train_s,
        recovery_s=recovery_s,
        victim_train_s=victim_train_s,
        notes=struct.notes,
    )


@dataclass(frozen=True)
class Countermeasure:
    dummy_qubits: int = 0
    extra_layer_pairs: int = 0

    def __post_init__(self):
        if not 0 <= self.dummy_qubits <= 4 or not 0 <= self.extra_layer_pairs <= 4:
            raise RecoveryError("countermeasure grid is capped at 4 dummy qubits / 4 extra layer pairs")


def augment_victim(
    spec: AnsatzSpec, params: np.ndarray, cm: Countermeasure, seed: int = 0
) -> tuple[Circuit, np.ndarray, list[Template]]:
    """Apply countermeasures without changing the victim's function.

    Extra layers append L, L^+ pairs on the real qubits (the pair cancels).
    Dummy qubits carry one run of random rotations each and a CNOT chain that
    entangles only the dummies. Returns the tagged circuit, its bound
    parameter vector, and the template set an adversary needs in the LUT.
    """
    rng = np.random.default_rng(seed)
    n = spec.n_qubits
    total_q = n + cm.dummy_qubits
    gates = [Gate(g.kind, g.qubits, g.angle, g.param_tag) for g in build_ansatz(spec).gates]
    values = list(np.asarray(params, dtype=np.float64))
    templates: list[Template] = [spec.rotations]
    reversed_template = tuple(reversed(spec.rotations))

    def chain(qubits: list[int], rev: bool = False):
        pairs = [(qubits[i], qubits[i + 1]) for i in range(len(qubits) - 1)]
        for a, b in reversed(pairs) if rev else pairs:
            gates.append(cnot(a, b))

    tag = spec.n_params
    m = len(spec.rotations)
    for _ in range(cm.extra_layer_pairs):
        layer_vals = rng.uniform(-math.pi, math.pi, size=n * m)
        for q in range(n):
            for j, kind in enumerate(spec.rotations):
                gates.append(Gate(kind, (q,), None, tag))
                values.append(float(layer_vals[q * m + j]))
                tag += 1
        chain(list(range(n)))
        chain(list(range(n)), rev=True)
        for q in range(n):
            # inverse layer: reversed kinds with negated angles undo the pair
            for j, kind in enumerate(reversed_template):
                gates.append(Gate(kind, (q,), None, tag))
                values.append(float(-layer_vals[q * m + (m - 1 - j)]))
                tag += 1
    if cm.extra_layer_pairs and reversed_template != spec.rotations:
        templates.append(reversed_template)

    if cm.dummy_qubits:
        for q in range(n, total_q):
            for kind in spec.rotations:
                gates.append(Gate(kind, (q,), None, tag))
                values.append(float(rng.uniform(-math.pi, math.pi)))
                tag += 1
        if cm.dummy_qubits > 1:
            chain(list(range(n, total_q)))
    return Circuit(total_q, tuple(gates)), np.array(values), templates


@dataclass
class BenchRow:
    dummy_qubits: int
    extra_layer_pairs: int
    n_layers: int
    n_params: int
    transpiled_gates: int
    method: str
    recovery_s: float
    dataset_s: float
    train_s: float
    param_err_mean: float
    estimated: bool = False


def _recover_timed(
    circuit_bound: Circuit,
    true_params: np.ndarray,
    templates: list[Template],
    method: str,
    cfg: EvalConfig,
    ae_models: dict[Template, Mlp] | None = None,
) -> tuple[float, float, float, float, int]:
    """(recovery_s, dataset_s, train_s, mean wrapped error, transpiled gate count)."""
    opts = cfg.transpile_options()
    transpiled = transpile(circuit_bound, opts).circuit
    lut = build_lut(templates, opts)
    dataset_s = train_s = 0.0
    t0 = time.perf_counter()
    struct = recover_structure(transpiled, lut)
    if method == "autoencoder":
        if ae_models is None:
            seg_templates = sorted({s.template for s in struct.segments}, key=len)
            models, info = prepare_ae_models(list(seg_templates), cfg)
            dataset_s = sum(m["dataset_s"] for m in info.values())
            train_s = sum(m["train_s"] for m in info.values())
        else:
            models = ae_models
        recovered = recover_params_ae(struct, models)
    else:
        recovered = recover_params_bf(struct, step=cfg.bf_step, opts=opts, workers=cfg.workers)
    recovery_s = time.perf_counter() - t0
    if struct.n_params == len(true_params):
        err = float(np.mean(wrapped_abs_error(recovered, true_params)))
    else:
        err = float("nan")  # structure mismatch; times remain meaningful
    return recovery_s, dataset_s, train_s, err, len(transpiled.gates)


def bench_countermeasures(
    base_spec: AnsatzSpec,
    grid: list[Countermeasure],
    methods: list[str],
    cfg: EvalConfig | None = None,
) -> list[BenchRow]:
    """Wall-clock both recovery methods across a countermeasure grid."""
    cfg = cfg or EvalConfig()
    rng = np.random.default_rng(cfg.seed)
    params = rng.uniform(-math.pi, math.pi, size=base_spec.n_params)
    rows: list[BenchRow] = []
    for cm in grid:
        circuit, all_params, templates = augment_victim(base_spec, params, cm, seed=cfg.seed)
        bound = bind(circuit, all_params)
        for method in methods:
            rec_s, ds_s, tr_s, err, n_gates = _recover_timed(bound, all_params, templates, method, cfg)
            rows.append(
                BenchRow(
                    cm.dummy_qubits,
                    cm.extra_layer_pairs,
                    base_spec.n_layers,
                    len(all_params),
                    n_gates,
                    method,
                    rec_s,
                    ds_s,
                    tr_s,
                    err,
                )
            )
    return rows


def bench_layer_sweep(
    n_qubits: int,
    rotations: tuple[GateKind, ...],
    layers: list[int],
    methods: list[str],
    cfg: EvalConfig | None = None,
    bf_max_layers: int = 4,
) -> list[BenchRow]:
    """Recovery wall time vs classifier depth, one row per (layers, method).

    Brute force above `bf_max_layers` is extrapolated quadratically from the
    deepest measured run (row flagged `estimated`), mirroring how the very
    slow deep-circuit baselines are usually reported.
    """
    cfg = cfg or EvalConfig()
    rows: list[BenchRow] = []
    bf_measured: list[tuple[int, float]] = []
    for n_layers in sorted(layers):
        spec = AnsatzSpec(n_qubits, n_layers, rotations)
        rng = np.random.default_rng(cfg.seed + n_layers)
        params = rng.uniform(-math.pi, math.pi, size=spec.n_params)
        bound = bind(build_ansatz(spec), params)
        for method in methods:
            if method == "brute_force" and n_layers > bf_max_layers:
                if not bf_measured:
                    continue
                ref_layers, ref_s = bf_measured[-1]
                est = ref_s * (n_layers / ref_layers) ** 2
                rows.append(
                    BenchRow(0, 0, n_layers, spec.n_params, 0, method, est, 0.0, 0.0, float("nan"), True)
                )
                continue
            rec_s, ds_s, tr_s, err, n_gates = _recover_timed(
                bound, params, [spec.rotations], method, cfg
            )
            if method == "brute_force":
                bf_measured.append((n_layers, rec_s))
            rows.append(
                BenchRow(0, 0, n_layers, spec.n_params, n_gates, method, rec_s, ds_s, tr_s, err)
            )
    return rows


def reports_to_csv(reports: list[RecoveryReport]) -> str:
    lines = [",".join(REPORT_CSV_COLUMNS)]
    for r in reports:
        row = []
        for col in REPORT_CSV_COLUMNS:
            value = getattr(r, col)
            if isinstance(value, float):
                row.append(format(value, ".10g"))
            else:
                row.append(str(value))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def timings_to_csv(reports: list[RecoveryReport]) -> str:
    lines = [",".join(TIMING_CSV_COLUMNS)]
    for r in reports:
        lines.append(
            ",".join(
                [r.classifier, r.method]
                + [format(getattr(r, c), ".6g") for c in TIMING_CSV_COLUMNS[2:]]
            )
        )
    return "\n".join(lines) + "\n"


_TIMING_FIELDS = ("dataset_s", "train_s", "recovery_s", "victim_train_s")


def reports_to_json(reports: list[RecoveryReport], config_echo: dict | None = None) -> str:
    """Full detail; wall times live under a separate 'timings' key so the
    'reports' section is byte-identical across runs with the same seed."""
    rows = []
    times = []
    for r in reports:
        d = {k: v for k, v in vars(r).items() if k not in _TIMING_FIELDS and k != "notes"}
        d["notes"] = list(r.notes)
        rows.append(d)
        times.append(
            {"classifier": r.classifier, "method": r.method, **{k: getattr(r, k) for k in _TIMING_FIELDS}}
        )
    payload = {"config": config_echo or {}, "reports": rows, "timings": times}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def bench_rows_to_csv(rows: list[BenchRow]) -> str:
    cols = [
        "dummy_qubits",
        "extra_layer_pairs",
        "n_layers",
        "n_params",
        "transpiled_gates",
        "method",
        "recovery_s",
        "dataset_s",
        "train_s",
        "param_err_mean",
        "estimated",
    ]
    lines = [",".join(cols)]
    for r in rows:
        vals = []
        for c in cols:
            v = getattr(r, c)
            vals.append(format(v, ".6g") if isinstance(v, float) else str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def save_param_dataset(ds: ParamDataset, path: str, meta: dict | None = None):
    """Text cache: header lines then one 'x... | y...' row per sample (17 digits)."""
    with open(path, "w") as fh:
        fh.write("param-dataset v1\n")
        for key, value in (meta or {}).items():
            fh.write(f"# {key} {value}\n")
        fh.write(f"template {','.join(k.value for k in ds.template)}\n")
        fh.write(f"step {ds.step:.17g}\n")
        fh.write(f"zero_tol {ds.zero_tol:.17g}\n")
        fh.write(f"duplicates {ds.n_duplicates}\n")
        fh.write(f"samples {len(ds)}\n")
        for xr, yr in zip(ds.x, ds.y):
            left = " ".join(format(v, ".17g") for v in xr)
            right = " ".join(format(v, ".17g") for v in yr)
            fh.write(f"{left} | {right}\n")


def load_param_dataset(path: str) -> ParamDataset:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    if not lines or lines[0] != "param-dataset v1":
        raise RecoveryError(f"{path}: not a dataset cache (missing 'param-dataset v1' header)")
    header: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and "|" not in lines[pos]:
        key, _, value = lines[pos].partition(" ")
        header[key] = value
        pos += 1
    template = tuple(GateKind(v) for v in header["template"].split(","))
    rows = lines[pos:]
    x = np.empty((len(rows), 3))
    y = np.empty((len(rows), len(template)))
    for i, row in enumerate(rows):
        left, _, right = row.partition("|")
        x[i] = [float(v) for v in left.split()]
        y[i] = [float(v) for v in right.split()]
    if int(header["samples"]) != len(rows):
        raise RecoveryError(f"{path}: expected {header['samples']} samples, found {len(rows)}")
    return ParamDataset(
        template,
        len(template),
        x,
        y,
        float(header["step"]),
        float(header["zero_tol"]),
        int(header["duplicates"]),
    )

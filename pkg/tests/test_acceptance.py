"""Acceptance suite: one test per project acceptance criterion.

Each test prints a single `[criterion N] PASS/FAIL` line (visible with
pytest -rA) before asserting, so the run leaves a readable scoreboard.
Criteria 5 and 6 exercise the full-scale grid training; the whole module
takes roughly half an hour on two desktop cores.
"""

import math
import time

import numpy as np
import pytest

from untranspile.circuit import Circuit, Gate, GateKind, bind
from untranspile.neural import LayerSpec, Mlp, TrainConfig, build_autoencoder, grad_check, train
from untranspile.qnn import AnsatzSpec, batch_expvals, build_ansatz, encoded_states, synthetic_blobs
from untranspile.recovery import (
    EvalConfig,
    bench_layer_sweep,
    evaluate,
    forward_triple,
    gen_dataset,
    grid_axis,
    heldout_wrapped_mae,
    prepare_ae_models,
    recover_params_bf,
    train_recovery_model,
    _segment_distance,
)
from untranspile.simulator import unitary_of, unpermute_unitary
from untranspile.structlut import build_lut, recover_structure
from untranspile.transpiler import TranspileOptions, _zsx_product, decompose_1q, transpile
from conftest import haar_unitary_2x2, oracle_unitary, random_circuit

RX, RY, RZ = GateKind.RX, GateKind.RY, GateKind.RZ

SEED = 1
AE_TRAIN = TrainConfig(epochs=100, batch_size=1024, validation_fraction=0.2, shuffle_seed=SEED)

# The classifier shapes the error study covers, plus a 1-qubit substitute
# (multi-layer 1-qubit ansatze have no CNOT boundaries and fuse irrecoverably).
TABLE_SHAPES = [
    AnsatzSpec(1, 1, (RX, RY, RZ), entangle="none"),
    AnsatzSpec(2, 1, (RX, RY, RZ)),
    AnsatzSpec(2, 2, (RX, RY, RZ)),
    AnsatzSpec(2, 3, (RX, RY, RZ)),
    AnsatzSpec(4, 1, (RY, RZ)),
    AnsatzSpec(4, 2, (RY, RZ)),
    AnsatzSpec(4, 3, (RY, RZ)),
    AnsatzSpec(8, 1, (RY, RZ)),
    AnsatzSpec(8, 2, (RY, RZ)),
    AnsatzSpec(8, 3, (RY, RZ)),
]


def report(n: int, ok: bool, detail: str) -> str:
    line = f"[criterion {n}] {'PASS' if ok else 'FAIL'} — {detail}"
    print(line)
    return line


@pytest.fixture(scope="module")
def ae_k3():
    """Full-scale k=3 recovery model: 250,047 samples, 100 epochs, batch 1024."""
    t0 = time.perf_counter()
    ds = gen_dataset((RX, RY, RZ), step=0.1)
    model, trace = train_recovery_model(ds, AE_TRAIN, seed=SEED)
    elapsed = time.perf_counter() - t0
    return {
        "model": model,
        "trace": trace,
        "dataset": ds,
        "elapsed_s": elapsed,
        "heldout": heldout_wrapped_mae(model, ds, AE_TRAIN),
    }


@pytest.fixture(scope="module")
def ae_k2():
    t0 = time.perf_counter()
    ds = gen_dataset((RY, RZ), step=0.1)
    model, trace = train_recovery_model(ds, AE_TRAIN, seed=SEED)
    elapsed = time.perf_counter() - t0
    return {
        "model": model,
        "trace": trace,
        "dataset": ds,
        "elapsed_s": elapsed,
        "heldout": heldout_wrapped_mae(model, ds, AE_TRAIN),
    }


def test_criterion_1_transpiler_soundness():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for level in (0, 1):
        opts = TranspileOptions(optimization_level=level)
        for _ in range(250):
            n = int(rng.integers(1, 5))
            c = random_circuit(n, int(rng.integers(0, 41)), rng)
            res = transpile(c, opts)
            u = unpermute_unitary(unitary_of(res.circuit), res.final_layout)
            worst = max(worst, float(np.abs(u - oracle_unitary(c)).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 60.0
    line = report(1, ok, f"500 circuits x 2 levels, max unitary deviation {worst:.2e} (tol 1e-9), {elapsed:.1f}s (< 60s)")
    assert ok, line


def test_criterion_2_zsx_decomposition():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(100_000):
        u = haar_unitary_2x2(rng)
        a, b, c, g = decompose_1q(u, check=False)
        v = np.exp(1j * g) * _zsx_product(a, b, c)
        worst = max(worst, float(np.abs(v - u).max()))
    sig = tuple(
        g.kind for g in transpile(Circuit(1, (Gate(RX, (0,), 0.4), Gate(RY, (0,), 1.1), Gate(RZ, (0,), -0.9)))).circuit.gates
    )
    expected = (GateKind.RZ, GateKind.SX, GateKind.RZ, GateKind.SX, GateKind.RZ)
    ok = worst <= 1e-9 and sig == expected
    line = report(
        2,
        ok,
        f"1e5 Haar recompositions max err {worst:.2e} (tol 1e-9); rx,ry,rz signature {','.join(k.value for k in sig)}",
    )
    assert ok, line


def test_criterion_3_structure_recovery():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    failures = []
    shapes = [s for s in TABLE_SHAPES if s.n_qubits > 1]
    for spec in shapes:
        lut = build_lut([spec.rotations])
        ansatz = build_ansatz(spec)
        reference = [(g.kind, g.qubits, g.param_tag) for g in ansatz.gates]
        for draw in range(20):
            params = rng.uniform(-math.pi, math.pi, spec.n_params)
            victim = transpile(bind(ansatz, params)).circuit
            struct = recover_structure(victim, lut)
            got = [(g.kind, g.qubits, g.param_tag) for g in struct.ansatz.gates]
            if got != reference:
                failures.append((spec.n_qubits, spec.n_layers, draw))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 600.0
    line = report(
        3,
        ok,
        f"{len(shapes)} shapes x 20 draws, {len(failures)} structure mismatches, {elapsed:.1f}s (< 600s)",
    )
    assert ok, line


def test_criterion_4_bruteforce_baseline():
    rng = np.random.default_rng(SEED)
    opts = TranspileOptions()

    def on_grid_victim(template, step):
        axis = grid_axis(step)
        spec = AnsatzSpec(1, 1, template, entangle="none")
        truth = axis[rng.integers(0, len(axis), len(template))]
        victim = transpile(bind(build_ansatz(spec), truth), opts).circuit
        struct = recover_structure(victim, build_lut([template], opts))
        return spec, truth, struct

    # exactness: 50 on-grid victims (grid resolution does not affect the property)
    worst_dist = 0.0
    cases = [((RZ,), 0.1)] * 20 + [((RY, RZ), 0.1)] * 20 + [((RX, RY, RZ), 0.4)] * 10
    for template, step in cases:
        spec, truth, struct = on_grid_victim(template, step)
        rec = recover_params_bf(struct, step=step, opts=opts)
        dist = _segment_distance(forward_triple(template, truth), forward_triple(template, rec))
        worst_dist = max(worst_dist, dist)

    # cost ratios at the reference step 0.1 (63 grid points per axis)
    times = {}
    for template, repeats in (((RZ,), 20), ((RY, RZ), 3), ((RX, RY, RZ), 1)):
        spec, truth, struct = on_grid_victim(template, 0.1)
        t0 = time.perf_counter()
        for _ in range(repeats):
            rec = recover_params_bf(struct, step=0.1, opts=opts)
        times[len(template)] = (time.perf_counter() - t0) / repeats
        dist = _segment_distance(forward_triple(template, truth), forward_triple(template, rec))
        worst_dist = max(worst_dist, dist)
    r21 = times[2] / times[1]
    r32 = times[3] / times[2]
    ratios_ok = 63 / 2 <= r21 <= 63 * 2 and 63 / 2 <= r32 <= 63 * 2
    ok = worst_dist <= 1e-9 and ratios_ok
    line = report(
        4,
        ok,
        f"on-grid worst segment distance {worst_dist:.2e} (tol 1e-9); per-segment cost ratios "
        f"k2/k1 {r21:.1f}, k3/k2 {r32:.1f} (both within 2x of 63)",
    )
    assert ok, line


def test_criterion_5_autoencoder_error(ae_k3, ae_k2):
    k3_ok = ae_k3["heldout"] <= 0.36
    k2_ok = ae_k2["heldout"] <= 1.0
    trend_ok = ae_k3["trace"].val_mae[-1] < ae_k3["trace"].val_mae[0]
    budget_ok = ae_k3["elapsed_s"] <= 7200.0
    ok = k3_ok and k2_ok and trend_ok and budget_ok
    line = report(
        5,
        ok,
        f"k=3 (2Q;1-layer) held-out wrapped MAE {ae_k3['heldout']:.3f} (bound 0.36: {'ok' if k3_ok else 'EXCEEDED'}); "
        f"k=2 (4Q;2-layer) {ae_k2['heldout']:.3f} (bound 1.0); "
        f"val MAE epoch100 {ae_k3['trace'].val_mae[-1]:.3f} < epoch1 {ae_k3['trace'].val_mae[0]:.3f}: {trend_ok}; "
        f"k=3 run {ae_k3['elapsed_s']:.0f}s (budget 7200s)",
    )
    assert ok, line


def test_criterion_6_accuracy_gap(ae_k3, ae_k2):
    models = {(RX, RY, RZ): ae_k3["model"], (RY, RZ): ae_k2["model"]}
    info = {
        (RX, RY, RZ): {"dataset_s": 0.0, "train_s": ae_k3["elapsed_s"]},
        (RY, RZ): {"dataset_s": 0.0, "train_s": ae_k2["elapsed_s"]},
    }
    cfg = EvalConfig(seed=SEED, ae_train=AE_TRAIN)
    rows = []
    for spec in TABLE_SHAPES:
        train_ds, eval_ds = synthetic_blobs(spec.n_qubits, 160, 200, seed=SEED)
        r = evaluate(spec, train_ds, eval_ds, "autoencoder", cfg, models, info)
        rows.append(r)
        print(
            f"    {r.classifier:11} ({r.rotations}) err={r.param_err_mean:.3f} equiv={r.param_err_mean_equiv:.3f} "
            f"acc {r.acc_original:.3f}->{r.acc_recovered:.3f} gap={r.acc_error_pct:.1f} "
            f"retrained={r.acc_after_retraining:.3f} diff={r.diff_acc_pct:.1f}"
        )
    gaps = [r.acc_error_pct for r in rows]
    gap_ok = all(g <= 15.0 for g in gaps)
    non_increase = sum(1 for r in rows if r.diff_acc_pct <= r.acc_error_pct + 1e-9)
    retrain_ok = non_increase >= 8
    ok = gap_ok and retrain_ok
    over = [f"{r.classifier}:{r.acc_error_pct:.1f}" for r in rows if r.acc_error_pct > 15.0]
    line = report(
        6,
        ok,
        f"max gap {max(gaps):.1f} pts (bound 15; over: {over or 'none'}); "
        f"retraining kept/shrunk the gap for {non_increase}/10 shapes (need >= 8)",
    )
    assert ok, line


def test_criterion_7_scaling():
    cfg = EvalConfig(seed=SEED, ae_train=AE_TRAIN)
    rows = bench_layer_sweep(4, (RY, RZ), [1, 2, 4, 8, 16], ["autoencoder", "brute_force"], cfg, bf_max_layers=4)
    ae = {r.n_layers: r.dataset_s + r.train_s + r.recovery_s for r in rows if r.method == "autoencoder"}
    bf = {r.n_layers: r.recovery_s for r in rows if r.method == "brute_force" and not r.estimated}
    for r in rows:
        total = r.dataset_s + r.train_s + r.recovery_s
        flag = " (extrapolated)" if r.estimated else ""
        print(f"    layers={r.n_layers:2} {r.method:12} {total:8.2f}s{flag}")
    ae_ratio = ae[16] / ae[1]
    bf_ratio = bf[4] / bf[1]
    ok = ae_ratio <= 2.0 and bf_ratio >= 10.0
    line = report(
        7,
        ok,
        f"AE wall time x{ae_ratio:.2f} from 1 to 16 layers (bound <= 2); "
        f"brute force x{bf_ratio:.1f} from 1 to 4 layers (bound >= 10)",
    )
    assert ok, line


def test_criterion_8_neural_engine():
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        model = Mlp(
            4,
            [
                LayerSpec("dense", 8, "relu"),
                LayerSpec("batchnorm", 8),
                LayerSpec("dense", 5, "relu"),
                LayerSpec("dense", 3, "none"),
            ],
            seed=seed,
        )
        x = rng.normal(size=(12, 4))
        y = rng.normal(size=(12, 3))
        worst = max(worst, grad_check(model, x, y))
    counts_ok = build_autoencoder(3).param_counts() == [
        1024, 1024, 0, 32896, 512, 0, 8256, 2080, 528,
        544, 128, 0, 2112, 256, 0, 8320, 33024, 771,
    ]

    def train_once():
        rng = np.random.default_rng(7)
        model = build_autoencoder(2, input_dim=3, seed=5)
        train(model, rng.normal(size=(64, 3)), rng.normal(size=(64, 2)), TrainConfig(epochs=3, batch_size=16, shuffle_seed=9))
        return model

    repro_ok = train_once().equals(train_once())
    ok = worst < 1e-4 and counts_ok and repro_ok
    line = report(
        8,
        ok,
        f"backprop vs finite differences max rel err {worst:.2e} (tol 1e-4); "
        f"documented encoder/decoder param counts: {counts_ok}; bitwise-reproducible training: {repro_ok}",
    )
    assert ok, line


def test_criterion_9_qnn_gradients():
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        n_qubits = int(rng.integers(1, 5))
        spec = AnsatzSpec(n_qubits, int(rng.integers(1, 4)), (RY, RZ))
        while spec.n_params > 24:
            spec = AnsatzSpec(spec.n_qubits, spec.n_layers - 1, (RY, RZ))
        ansatz = build_ansatz(spec)
        params = rng.uniform(-math.pi, math.pi, spec.n_params)
        states = encoded_states(rng.uniform(0, 1, size=(3, spec.n_qubits)))
        base = batch_expvals(ansatz, params, states)
        h = 1e-6
        for j in range(spec.n_params):
            up, down = params.copy(), params.copy()
            up[j] += math.pi / 2
            down[j] -= math.pi / 2
            shift = 0.5 * (batch_expvals(ansatz, up, states) - batch_expvals(ansatz, down, states))
            up[j] = params[j] + h
            down[j] = params[j] - h
            fd = (batch_expvals(ansatz, up, states) - batch_expvals(ansatz, down, states)) / (2 * h)
            worst = max(worst, float(np.abs(shift - fd).max()))
    ok = worst <= 1e-6
    line = report(9, ok, f"parameter-shift vs finite differences max deviation {worst:.2e} (tol 1e-6), 5 seeds, <= 24 params")
    assert ok, line

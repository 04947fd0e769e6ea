"""Command-line driver tying the pipeline into reproducible runs.

Every subcommand reads one JSON config (defaults, file, then --set overrides
in that order), echoes the resolved config into the output directory, and
embeds the config hash and seed in every artifact. Wall-clock timings are
written to separate files so the primary outputs are byte-stable per seed.

Exit codes: 0 success, 2 config error, 3 recovery failure, 4 training
divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .circuit import CircuitError, Circuit, bind, parse, serialize
from .config import ConfigError, ResolvedConfig, load_config_file, resolve
from .neural import TrainingDivergedError, load_mlp, save_mlp
from .qnn import (
    AnsatzSpec,
    QnnDataset,
    build_ansatz,
    circuit_accuracy,
    load_idx,
    synthetic_blobs,
    train_qnn,
)
from .recovery import (
    Countermeasure,
    RecoveryError,
    bench_countermeasures,
    bench_layer_sweep,
    bench_rows_to_csv,
    gen_dataset,
    load_param_dataset,
    prepare_ae_models,
    recover_params_ae,
    recover_params_bf,
    reports_to_csv,
    reports_to_json,
    save_param_dataset,
    timings_to_csv,
    train_recovery_model,
    evaluate,
)
from .structlut import StructureError, build_lut, load_lut, recover_structure, save_lut
from .transpiler import TranspileError, transpile

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RECOVERY = 3
EXIT_DIVERGED = 4


def _meta(rc: ResolvedConfig) -> dict:
    return {"config": rc.hash, "seed": rc.seed}


def _out_dirs(rc: ResolvedConfig, out_flag: str | None) -> tuple[str, str]:
    out = out_flag or rc.raw["out_dir"]
    artifacts = os.path.join(out, "artifacts")
    os.makedirs(artifacts, exist_ok=True)
    with open(os.path.join(out, "config.resolved"), "w") as fh:
        fh.write(rc.to_json())
    return out, artifacts


def _write_circuit(path: str, circuit: Circuit, rc: ResolvedConfig):
    with open(path, "w") as fh:
        fh.write(f"# config {rc.hash} seed {rc.seed}\n")
        fh.write(serialize(circuit))


def _read_circuit(path: str) -> Circuit:
    with open(path) as fh:
        return parse(fh.read())


def _write_params(path: str, values: np.ndarray, rc: ResolvedConfig):
    with open(path, "w") as fh:
        fh.write(f"# config {rc.hash} seed {rc.seed}\n")
        for v in values:
            fh.write(format(float(v), ".17g") + "\n")


def _read_params(path: str) -> np.ndarray:
    with open(path) as fh:
        return np.array([float(ln) for ln in fh if ln.strip() and not ln.startswith("#")])


def _load_datasets(rc: ResolvedConfig) -> tuple[QnnDataset, QnnDataset]:
    d = rc.raw["dataset"]
    n_qubits = rc.raw["ansatz"]["n_qubits"]
    if d["source"] == "synthetic":
        return synthetic_blobs(
            n_qubits,
            n_train=d["n_train"],
            n_eval=d["n_eval"],
            seed=rc.seed,
            separation=d["separation"],
            spread=d["spread"],
        )
    full = load_idx(d["idx_images"], d["idx_labels"], tuple(d["keep_labels"]), n_qubits)
    n_train = min(d["n_train"], len(full) - 1)
    return (
        QnnDataset(full.features[:n_train], full.labels[:n_train]),
        QnnDataset(full.features[n_train : n_train + d["n_eval"]], full.labels[n_train : n_train + d["n_eval"]]),
    )


def _template_tag(template) -> str:
    return "-".join(k.value for k in template)


def cmd_train_qnn(rc: ResolvedConfig, args) -> int:
    out, artifacts = _out_dirs(rc, args.out)
    spec = rc.ansatz_spec()
    train_ds, eval_ds = _load_datasets(rc)
    model = train_qnn(
        spec, train_ds, epochs=rc.raw["qnn_train"]["epochs"], lr=rc.raw["qnn_train"]["lr"], seed=rc.seed
    )
    _write_circuit(os.path.join(artifacts, "qnn.circuit"), build_ansatz(spec), rc)
    _write_params(os.path.join(artifacts, "qnn.params"), model.params, rc)
    acc = circuit_accuracy(build_ansatz(spec), model.params, eval_ds)
    with open(os.path.join(artifacts, "qnn.log"), "w") as fh:
        fh.write(f"# config {rc.hash} seed {rc.seed}\n")
        for epoch, (loss, a) in enumerate(model.train_log, start=1):
            fh.write(f"epoch {epoch} loss {loss:.10g} acc {a:.6g}\n")
    print(f"trained {spec.n_qubits}Q {spec.n_layers}-layer ({spec.n_params} params), eval accuracy {acc:.3f}")
    print(f"wrote {artifacts}/qnn.circuit, qnn.params, qnn.log")
    return EXIT_OK


def cmd_transpile(rc: ResolvedConfig, args) -> int:
    out, artifacts = _out_dirs(rc, args.out)
    if args.circuit:
        circuit = _read_circuit(args.circuit)
    else:
        ansatz = _read_circuit(os.path.join(artifacts, "qnn.circuit"))
        params = _read_params(os.path.join(artifacts, "qnn.params"))
        circuit = bind(ansatz, params)
    res = transpile(circuit, rc.transpile_options())
    _write_circuit(os.path.join(artifacts, "transpiled.circuit"), res.circuit, rc)
    with open(os.path.join(artifacts, "transpiled.layout"), "w") as fh:
        fh.write(f"# config {rc.hash} seed {rc.seed}\n")
        fh.write(json.dumps({"layout": list(res.layout), "final_layout": list(res.final_layout)}) + "\n")
    print(f"transpiled to {len(res.circuit.gates)} basis gates; wrote {artifacts}/transpiled.circuit")
    return EXIT_OK


def cmd_build_lut(rc: ResolvedConfig, args) -> int:
    out, artifacts = _out_dirs(rc, args.out)
    lut = build_lut(rc.lut_templates(), rc.transpile_options())
    path = os.path.join(artifacts, "lut.txt")
    save_lut(lut, path, meta=_meta(rc))
    print(f"built LUT with {len(lut.entries)} entries; wrote {path}")
    return EXIT_OK


def cmd_recover_structure(rc: ResolvedConfig, args) -> int:
    out, artifacts = _out_dirs(rc, args.out)
    victim = _read_circuit(args.circuit or os.path.join(artifacts, "transpiled.circuit"))
    lut_path = args.lut or os.path.join(artifacts, "lut.txt")
    if os.path.exists(lut_path):
        lut = load_lut(lut_path)
    else:
        lut = build_lut(rc.lut_templates(), rc.transpile_options())
    struct = recover_structure(victim, lut)
    path = os.path.join(artifacts, "recovered.txt")
    with open(path, "w") as fh:
        fh.write(f"# config {rc.hash} seed {rc.seed}\n")
        fh.write(struct.to_text())
    print(f"recovered {struct.n_params} parameter slots over {len(struct.segments)} segments; wrote {path}")
    return EXIT_OK


def cmd_gen_ae_dataset(rc: ResolvedConfig, args) -> int:
    out, artifacts = _out_dirs(rc, args.out)
    for template in rc.lut_templates():
        ds = gen_dataset(template, step=rc.raw["ae_train"]["grid_step"], zero_tol=rc.raw["transpile"]["zero_tol"])
        path = os.path.join(artifacts, f"dataset_{_template_tag(template)}.txt")
        save_param_dataset(ds, path, meta=_meta(rc))
        print(f"{len(ds)} samples ({ds.n_duplicates} duplicate inputs); wrote {path}")
    return EXIT_OK


def cmd_train_ae(rc: ResolvedConfig, args) -> int:
    out, artifacts = _out_dirs(rc, args.out)
    cfg = rc.ae_train_config()
    for template in rc.lut_templates():
        tag = _template_tag(template)
        ds_path = os.path.join(artifacts, f"dataset_{tag}.txt")
        if os.path.exists(ds_path):
            ds = load_param_dataset(ds_path)
        else:
            ds = gen_dataset(template, step=rc.raw["ae_train"]["grid_step"], zero_tol=rc.raw["transpile"]["zero_tol"])
        model, trace = train_recovery_model(ds, cfg, seed=rc.seed)
        path = os.path.join(artifacts, f"ae_{tag}.mlp")
        save_mlp(model, path, meta=_meta(rc))
        print(
            f"template {tag}: val MAE {trace.val_mae[0]:.4f} -> {trace.val_mae[-1]:.4f} "
            f"over {cfg.epochs} epochs; wrote {path}"
        )
    return EXIT_OK


def cmd_recover_params(rc: ResolvedConfig, args) -> int:
    out, artifacts = _out_dirs(rc, args.out)
    victim = _read_circuit(args.circuit or os.path.join(artifacts, "transpiled.circuit"))
    lut_path = args.lut or os.path.join(artifacts, "lut.txt")
    if os.path.exists(lut_path):
        lut = load_lut(lut_path)
    else:
        lut = build_lut(rc.lut_templates(), rc.transpile_options())
    struct = recover_structure(victim, lut)
    if args.method == "ae":
        models = {}
        for template in {s.template for s in struct.segments}:
            path = os.path.join(artifacts, f"ae_{_template_tag(template)}.mlp")
            if not os.path.exists(path):
                raise RecoveryError(f"missing trained model {path}; run train-ae first")
            models[template] = load_mlp(path)
        values = recover_params_ae(struct, models)
        name = "params_ae.txt"
    else:
        values = recover_params_bf(
            struct, step=rc.raw["recovery"]["bf_step"], opts=rc.transpile_options(), workers=rc.raw["workers"]
        )
        name = "params_brute.txt"
    path = os.path.join(artifacts, name)
    _write_params(path, values, rc)
    print(f"recovered {len(values)} parameters by {args.method}; wrote {path}")
    return EXIT_OK


def cmd_evaluate(rc: ResolvedConfig, args) -> int:
    out, artifacts = _out_dirs(rc, args.out)
    spec = rc.ansatz_spec()
    train_ds, eval_ds = _load_datasets(rc)
    cfg = rc.eval_config()
    methods = rc.raw["recovery"]["methods"]
    reports = []
    ae_models = ae_info = None
    for method in methods:
        if method == "autoencoder" and ae_models is None:
            ae_models, ae_info = prepare_ae_models([spec.rotations], cfg)
        report = evaluate(spec, train_ds, eval_ds, method, cfg, ae_models, ae_info)
        report.config_hash = rc.hash
        reports.append(report)
        print(
            f"{report.classifier} {method}: param err {report.param_err_mean:.3e} "
            f"+- {report.param_err_std:.3e}, acc {report.acc_original:.3f} -> {report.acc_recovered:.3f} "
            f"(retrained {report.acc_after_retraining:.3f})"
        )
    with open(os.path.join(out, "report.csv"), "w") as fh:
        fh.write(reports_to_csv(reports))
    with open(os.path.join(out, "timings.csv"), "w") as fh:
        fh.write(timings_to_csv(reports))
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(reports_to_json(reports, config_echo={**rc.raw, "config_hash": rc.hash}))
    print(f"wrote {out}/report.csv, timings.csv, report.json")
    return EXIT_OK


def cmd_bench_countermeasures(rc: ResolvedConfig, args) -> int:
    out, artifacts = _out_dirs(rc, args.out)
    spec = rc.ansatz_spec()
    cm = rc.raw["countermeasures"]
    grid = [Countermeasure(d, e) for d in cm["dummy_qubits"] for e in cm["extra_layer_pairs"]]
    rows = bench_countermeasures(spec, grid, rc.raw["recovery"]["methods"], rc.eval_config())
    path = os.path.join(out, "bench_countermeasures.csv")
    with open(path, "w") as fh:
        fh.write(f"# config {rc.hash} seed {rc.seed}\n")
        fh.write(bench_rows_to_csv(rows))
    for r in rows:
        print(
            f"d={r.dummy_qubits} e={r.extra_layer_pairs} {r.method}: "
            f"recovery {r.recovery_s:.2f}s (+{r.dataset_s + r.train_s:.2f}s prep)"
        )
    print(f"wrote {path}")
    return EXIT_OK


def cmd_bench_layers(rc: ResolvedConfig, args) -> int:
    out, artifacts = _out_dirs(rc, args.out)
    b = rc.raw["bench_layers"]
    from .qnn import ROTATION_NAMES

    rows = bench_layer_sweep(
        b["n_qubits"],
        tuple(ROTATION_NAMES[r] for r in b["rotations"]),
        b["layers"],
        rc.raw["recovery"]["methods"],
        rc.eval_config(),
        bf_max_layers=b["bf_max_layers"],
    )
    path = os.path.join(out, "bench_layers.csv")
    with open(path, "w") as fh:
        fh.write(f"# config {rc.hash} seed {rc.seed}\n")
        fh.write(bench_rows_to_csv(rows))
    for r in rows:
        flag = " (extrapolated)" if r.estimated else ""
        print(f"layers={r.n_layers} {r.method}: {r.recovery_s + r.dataset_s + r.train_s:.2f}s{flag}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_report(rc: ResolvedConfig, args) -> int:
    merged = []
    transpile_echo = None
    for run_dir in args.runs:
        path = os.path.join(run_dir, "report.json")
        if not os.path.exists(path):
            raise ConfigError("<runs>", f"no report.json in {run_dir}")
        with open(path) as fh:
            doc = json.load(fh)
        echo = doc.get("config", {}).get("transpile")
        if transpile_echo is None:
            transpile_echo = echo
        elif echo != transpile_echo:
            raise ConfigError(
                "<runs>", f"refusing to merge {run_dir}: transpile options {echo} conflict with {transpile_echo}"
            )
        merged.extend(doc["reports"])
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "merged_report.csv")
    cols = [
        "classifier", "n_params", "rotations", "method", "optimization_level", "seed",
        "structure_exact", "param_err_mean", "param_err_std", "acc_original", "acc_recovered",
        "acc_error_pct", "acc_after_retraining", "diff_acc_pct", "config_hash",
    ]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in merged:
            fh.write(",".join(str(row.get(c, "")) for c in cols) + "\n")
    print(f"merged {len(merged)} rows from {len(args.runs)} runs; wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="untranspile",
        description="Reverse-engineering workbench for transpiled variational quantum classifiers",
    )
    parser.add_argument("--config", help="JSON config file (fields merge over defaults)")
    parser.add_argument("--out", help="output directory (overrides config out_dir)")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="PATH=VALUE",
        help="override a config field by dotted path, e.g. --set ansatz.n_qubits=4",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("train-qnn", help="train the victim classifier").set_defaults(fn=cmd_train_qnn)
    p = sub.add_parser("transpile", help="lower a circuit to coupled basis gates")
    p.add_argument("--circuit", help="input circuit file (default: artifacts/qnn.circuit bound with qnn.params)")
    p.set_defaults(fn=cmd_transpile)
    sub.add_parser("build-lut", help="build the signature lookup table").set_defaults(fn=cmd_build_lut)
    p = sub.add_parser("recover-structure", help="recover gate ordering from a transpiled circuit")
    p.add_argument("--circuit", help="victim circuit file (default: artifacts/transpiled.circuit)")
    p.add_argument("--lut", help="LUT file (default: artifacts/lut.txt, built on the fly if absent)")
    p.set_defaults(fn=cmd_recover_structure)
    sub.add_parser("gen-ae-dataset", help="generate grid datasets per template").set_defaults(fn=cmd_gen_ae_dataset)
    sub.add_parser("train-ae", help="train recovery networks per template").set_defaults(fn=cmd_train_ae)
    p = sub.add_parser("recover-params", help="recover parameters from a transpiled circuit")
    p.add_argument("--method", choices=["ae", "brute"], required=True)
    p.add_argument("--circuit", help="victim circuit file (default: artifacts/transpiled.circuit)")
    p.add_argument("--lut", help="LUT file")
    p.set_defaults(fn=cmd_recover_params)
    sub.add_parser("evaluate", help="full pipeline incl. accuracy gap and retraining").set_defaults(fn=cmd_evaluate)
    sub.add_parser("bench-countermeasures", help="time both methods across dummy qubits / extra layers").set_defaults(
        fn=cmd_bench_countermeasures
    )
    sub.add_parser("bench-layers", help="time both methods across classifier depth").set_defaults(fn=cmd_bench_layers)
    p = sub.add_parser("report", help="merge report.json files from prior runs")
    p.add_argument("runs", nargs="+", help="run directories containing report.json")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = []
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError("<cli>", f"--set expects PATH=VALUE, got {item!r}")
            dotted, _, raw = item.partition("=")
            overrides.append((dotted, raw))
        user = load_config_file(args.config) if args.config else {}
        rc = resolve(user, overrides)
        return args.fn(rc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StructureError, RecoveryError) as exc:
        print(f"recovery failed: {exc}", file=sys.stderr)
        return EXIT_RECOVERY
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CircuitError, TranspileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RECOVERY


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``csiorient {synth,train,eval,predict}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import archive, dataset, experiment, fusion, ridge
from .config import RunConfig
from .errors import CsiError
from .synth import SynthConfig, synth_generate

log = logging.getLogger("csiorient")


class UsageError(CsiError):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# -- synth -------------------------------------------------------------------


def cmd_synth(args) -> int:
    fields = dict(
        S=args.S, T=args.T, A=args.aps, users=args.users,
        samples_per_cell=args.samples_per_cell, noise_std=args.noise_std, seed=args.seed,
    )
    fields = {k: v for k, v in fields.items() if v is not None}
    cfg = SynthConfig.paper_shape(**fields) if args.paper_shape else SynthConfig(**fields)
    t0 = time.perf_counter()
    synth_generate(cfg, args.out)
    print(
        f"wrote {cfg.samples_per_ap} samples per AP x {cfg.A} APs "
        f"({cfg.S}x{cfg.T}) to {args.out} in {time.perf_counter() - t0:.1f}s"
    )
    return 0


# -- shared run-config handling ---------------------------------------------


def _run_config(args, default_topology: str) -> RunConfig:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    overrides = dict(
        topology=args.topology,
        ap_ids=args.ap,
        data_dir=args.data,
        seed=args.seed,
        runs=getattr(args, "runs", None),
        train_fraction=args.train_fraction,
        by_user=args.by_user or None,
        kernel_length=args.kernel_length,
        num_kernels=args.num_kernels,
        max_dilations_per_kernel=args.max_dilations,
        total_features=args.num_features,
        alphas=args.alphas,
        folds=args.folds,
        output=args.out,
    )
    merged = {**base, **{k: v for k, v in overrides.items() if v is not None}}
    merged.setdefault("topology", default_topology)
    cfg = RunConfig.from_dict({**RunConfig().to_dict(), **merged})
    if not cfg.data_dir:
        raise UsageError("--data is required (or data_dir in --config)")
    return cfg


def cmd_train(args) -> int:
    cfg = _run_config(args, "cmap")
    if len(cfg.topologies) != 1:
        raise UsageError("train takes exactly one --topology")
    topology = cfg.topologies[0]
    ds = dataset.load(cfg.data_dir)
    ap_ids = cfg.ap_ids or ds.ap_ids
    if topology == "sap" and len(ap_ids) != 1:
        raise UsageError(f"--topology sap needs exactly one --ap, got {list(ap_ids)}")
    train_set, _ = dataset.split(ds, dataset.SplitSpec(cfg.train_fraction, cfg.run_seed(0), cfg.by_user))
    t0 = time.perf_counter()
    model = fusion.train(train_set, topology, ap_ids, cfg.train_config(0))
    elapsed = time.perf_counter() - t0
    out = Path(cfg.output or "model.csim")
    archive.save_model(out, model, cfg)
    print(f"topology {topology}, APs {list(model.ap_ids)}, head input dim {model.head_input_dim}")
    for i, (ha, ho) in enumerate(zip(model.activity_heads, model.orientation_heads)):
        where = f"AP {model.ap_ids[i]}" if topology == "amap" else "heads"
        print(f"  {where}: activity alpha {ha.alpha:g}, orientation alpha {ho.alpha:g}")
    print(f"trained on {len(train_set)} samples in {elapsed:.1f}s; wrote {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _run_config(args, "sap,amap,cmap")
    ds = dataset.load(cfg.data_dir)
    t0 = time.perf_counter()
    result = experiment.evaluate(ds, cfg, jobs=args.parallel_runs)
    out_dir = Path(cfg.output or "reports")
    text = experiment.format_report(result)
    _write_atomic(out_dir / "report.txt", text)
    _write_atomic(out_dir / "report.json", experiment.dumps(result))
    print(text)
    print(f"{cfg.runs} run(s) in {time.perf_counter() - t0:.1f}s; wrote {out_dir}/report.txt and report.json")
    return 0


# -- predict -----------------------------------------------------------------


def _parse_sample_args(items, model) -> dict[int, str]:
    files = {}
    for item in items:
        if "=" in item:
            ap, path = item.split("=", 1)
            try:
                files[int(ap)] = path
            except ValueError:
                raise UsageError(f"bad sample argument {item!r}; expected AP_ID=PATH")
        elif len(model.ap_ids) == 1 and not files:
            files[model.ap_ids[0]] = item
        else:
            raise UsageError(f"sample {item!r} needs an AP prefix (AP_ID=PATH) for this model")
    missing = sorted(set(model.ap_ids) - set(files))
    extra = sorted(set(files) - set(model.ap_ids))
    if missing:
        raise UsageError(
            f"{model.topology} model needs one file per AP {list(model.ap_ids)}; missing ap_id {missing}"
        )
    if extra:
        raise UsageError(f"model has no AP {extra}")
    return files


def cmd_predict(args) -> int:
    arch = archive.load_model(args.model)
    if args.show_config:
        print(json.dumps(arch.run_config.to_dict(), indent=1, sort_keys=True))
        return 0
    model = arch.model
    files = _parse_sample_args(args.samples, model)
    row = []
    for a, bank in zip(model.ap_ids, model.banks):
        X = dataset.read_sample_file(files[a], bank.subcarrier_count, bank.input_length)
        row.append(dataset.CsiSample(ap_id=a, sample_id=0, amplitudes=X, activity=0, orientation=0))
    feats = fusion.features_by_ap(model, [row])
    act, ori = fusion.predict_features(model, feats)
    print(f"activity: {model.activity_names[int(act[0])]}")
    print(f"orientation: {model.orientation_names[int(ori[0])]}")
    heads = zip(model.activity_heads, model.orientation_heads)
    for i, (ha, ho) in enumerate(heads):
        F = np.concatenate(feats, axis=1)[0] if model.topology != "amap" else feats[i][0]
        tag = f"AP {model.ap_ids[i]} " if model.topology == "amap" else ""
        sa = ", ".join(f"{model.activity_names[c]}={s:.4f}" for c, s in zip(ha.class_labels, ridge.decision_scores(ha, F)))
        so = ", ".join(f"{model.orientation_names[c]}={s:.4f}" for c, s in zip(ho.class_labels, ridge.decision_scores(ho, F)))
        print(f"  {tag}activity scores: {sa}")
        print(f"  {tag}orientation scores: {so}")
    return 0


# -- parser ------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser, runs: bool):
    p.add_argument("--config", help="JSON run config; flags override its fields")
    p.add_argument("--data", help="dataset directory (containing manifest.json)")
    p.add_argument("--topology", help="sap, cmap or amap" + (" (comma list for eval)" if runs else ""))
    p.add_argument("--ap", type=_int_list, help="comma-separated AP ids (default: all)")
    p.add_argument("--seed", type=int)
    if runs:
        p.add_argument("--runs", type=int, help="independent runs (default 10)")
        p.add_argument("--parallel-runs", type=int, default=1, metavar="N",
                       help="run up to N runs in worker processes (same results)")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--by-user", action="store_true", help="hold out whole users instead of samples")
    p.add_argument("--kernel-length", type=int)
    p.add_argument("--num-kernels", type=int)
    p.add_argument("--max-dilations", type=int)
    p.add_argument("--num-features", type=int)
    p.add_argument("--alphas", type=_float_list, help="regularization grid, e.g. 0.001,0.01,0.1,1")
    p.add_argument("--folds", type=int)
    p.add_argument("--out", help="model archive path" if not runs else "report directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csiorient", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-AP CSI dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--paper-shape", action="store_true", help="6 users x 4 x 4 x 20 samples, 5 APs")
    p.add_argument("--S", type=int, dest="S")
    p.add_argument("--T", type=int, dest="T")
    p.add_argument("--aps", type=int)
    p.add_argument("--users", type=int)
    p.add_argument("--samples-per-cell", type=int)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one topology and write a model archive")
    _add_run_flags(p, runs=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="multi-run evaluation with table-shaped reports")
    _add_run_flags(p, runs=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict activity and orientation for one sample")
    p.add_argument("--model", required=True)
    p.add_argument("--show-config", action="store_true", help="print the archived run config")
    p.add_argument("samples", nargs="*", help="PATH for single-AP models, else AP_ID=PATH per AP")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (CsiError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

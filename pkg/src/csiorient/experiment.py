"""Multi-run train/test protocol and table-shaped reports.

Each run draws a fresh stratified split and reseeds bias fitting and CV folds
with ``seed + run``. Within a run every AP's bank is fitted once and its
features are shared by all rows of the report: a SAP row for AP ``a`` and
the AP-``a`` heads of the AMAP row are the same fit, so they are computed
once.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .dataset import CsiDataset, SplitSpec, split
from .fusion import FusionModel, fit_ap_bank, fit_heads, predict_features
from .features import transform
from .metrics import (
    SCALAR_METRICS,
    ConfusionMatrix,
    RunReport,
    TaskMetrics,
    aggregate,
    format_percent,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReportRow:
    label: str
    topology: str
    ap_ids: tuple[int, ...]


def report_rows(cfg: RunConfig, dataset: CsiDataset) -> list[ReportRow]:
    """SAP rows (one per selected AP) first, then AMAP, then CMAP."""
    ap_ids = tuple(sorted(cfg.ap_ids or dataset.ap_ids))
    missing = set(ap_ids) - set(dataset.ap_ids)
    if missing:
        raise ValueError(f"dataset has no AP {sorted(missing)}")
    rows = []
    topos = cfg.topologies
    if "sap" in topos:
        rows += [ReportRow(f"SAP - AP {a}", "sap", (a,)) for a in ap_ids]
    if "amap" in topos:
        rows.append(ReportRow("AMAP", "amap", ap_ids))
    if "cmap" in topos:
        rows.append(ReportRow("CMAP", "cmap", ap_ids))
    return rows


def _stack(samples):
    return np.stack([s.amplitudes for s in samples])


def run_once(dataset: CsiDataset, rows: list[ReportRow], cfg: RunConfig, run: int):
    """Train and test every row for one run.

    Returns ``({label: RunReport}, {label: per-sample records}, {label: model})``.
    """
    seed = cfg.run_seed(run)
    tcfg = cfg.train_config(run)
    train, test = split(dataset, SplitSpec(cfg.train_fraction, seed, cfg.by_user))
    y_act, y_ori = train.labels()
    t_act, t_ori = test.labels()
    test_ids = test.sample_ids

    needed = sorted({a for r in rows for a in r.ap_ids})
    banks, f_train, f_test = {}, {}, {}
    for a in needed:
        t0 = time.perf_counter()
        banks[a] = fit_ap_bank(train.for_ap(a), a, tcfg)
        f_train[a] = transform(_stack(train.for_ap(a)), banks[a])
        f_test[a] = transform(_stack(test.for_ap(a)), banks[a])
        log.info("run %d: AP %d features in %.1fs", run, a, time.perf_counter() - t0)

    heads = {}

    def per_ap_heads(a):
        if a not in heads:
            heads[a] = fit_heads(f_train[a], y_act, y_ori, tcfg)
        return heads[a]

    reports, records, models = {}, {}, {}
    for row in rows:
        t0 = time.perf_counter()
        if row.topology == "cmap":
            F = np.concatenate([f_train[a] for a in row.ap_ids], axis=1)
            pairs = [fit_heads(F, y_act, y_ori, tcfg)]
            del F
        elif row.topology == "amap":
            pairs = [per_ap_heads(a) for a in row.ap_ids]
        else:
            pairs = [per_ap_heads(row.ap_ids[0])]
        model = FusionModel(
            topology=row.topology,
            ap_ids=row.ap_ids,
            banks=tuple(banks[a] for a in row.ap_ids),
            activity_heads=tuple(p[0] for p in pairs),
            orientation_heads=tuple(p[1] for p in pairs),
            activity_names=dataset.activity_names,
            orientation_names=dataset.orientation_names,
        )
        p_act, p_ori = predict_features(model, [f_test[a] for a in row.ap_ids])
        act_cm = ConfusionMatrix.from_labels(t_act, p_act, range(len(dataset.activity_names)))
        ori_cm = ConfusionMatrix.from_labels(t_ori, p_ori, range(len(dataset.orientation_names)))
        reports[row.label] = RunReport(
            run_seed=seed,
            activity=TaskMetrics.from_confusion(act_cm),
            orientation=TaskMetrics.from_confusion(ori_cm),
            extras={
                "activity_alphas": [h.alpha for h in model.activity_heads],
                "orientation_alphas": [h.alpha for h in model.orientation_heads],
            },
        )
        records[row.label] = [
            {
                "sample_id": int(sid),
                "activity": int(ta),
                "orientation": int(to),
                "pred_activity": int(pa),
                "pred_orientation": int(po),
            }
            for sid, ta, to, pa, po in zip(test_ids, t_act, t_ori, p_act, p_ori)
        ]
        models[row.label] = model
        log.info(
            "run %d: %s acc %.3f/%.3f in %.1fs",
            run, row.label, reports[row.label].activity.acc,
            reports[row.label].orientation.acc, time.perf_counter() - t0,
        )
    return reports, records, models


def _run_reports(args):
    reports, records, _ = run_once(*args)
    return reports, records


def evaluate(dataset: CsiDataset, cfg: RunConfig, jobs: int = 1) -> dict:
    """Run the full protocol; returns the machine-readable result document.

    ``jobs > 1`` runs independent runs in worker processes. Results do not
    depend on it.
    """
    rows = report_rows(cfg, dataset)
    per_row = {r.label: [] for r in rows}
    predictions = {r.label: [] for r in rows}
    tasks = [(dataset, rows, cfg, run) for run in range(cfg.runs)]
    if jobs > 1 and cfg.runs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(jobs, cfg.runs)) as pool:
            outputs = list(pool.map(_run_reports, tasks))
    else:
        outputs = map(_run_reports, tasks)
    for run, (reports, records) in enumerate(outputs):
        for label in per_row:
            per_row[label].append(reports[label])
            predictions[label].append({"run_seed": cfg.run_seed(run), "samples": records[label]})
    return {
        "config": cfg.to_dict(),
        "activity_names": list(dataset.activity_names),
        "orientation_names": list(dataset.orientation_names),
        "rows": [
            {
                "label": r.label,
                "topology": r.topology,
                "ap_ids": list(r.ap_ids),
                "runs": [rep.to_dict() for rep in per_row[r.label]],
                "summary": aggregate(per_row[r.label]),
            }
            for r in rows
        ],
        "predictions": predictions,
    }


def summary_from_records(result: dict) -> dict:
    """Re-aggregate a result document from its per-run records alone."""
    return {
        row["label"]: aggregate([RunReport.from_dict(d) for d in row["runs"]])
        for row in result["rows"]
    }


def _table(header: list[str], body: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    fmt = lambda r: " | ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), rule] + [fmt(r) for r in body])


def format_report(result: dict) -> str:
    """Human-readable tables: overall metrics, then per-class accuracy (in %)."""
    n_runs = result["config"]["runs"]
    metric_names = {"acc": "Acc", "bacc": "BAcc", "f1_macro": "F1", "mcc": "MCC"}
    header = ["Model"] + [
        f"{task[:3].title()} {metric_names[m]}" for task in ("activity", "orientation") for m in SCALAR_METRICS
    ]
    body = [
        [row["label"]]
        + [format_percent(row["summary"][task][m]) for task in ("activity", "orientation") for m in SCALAR_METRICS]
        for row in result["rows"]
    ]
    overall = _table(header, body)

    names = result["activity_names"] + result["orientation_names"]
    header2 = ["Model"] + names
    body2 = [
        [row["label"]]
        + [format_percent(s) for s in row["summary"]["activity"]["per_class_acc"]]
        + [format_percent(s) for s in row["summary"]["orientation"]["per_class_acc"]]
        for row in result["rows"]
    ]
    per_class = _table(header2, body2)
    return (
        f"Classification performance (mean±std in %, {n_runs} run(s), population std)\n\n"
        f"{overall}\n\n"
        f"Per-class accuracy (recall, mean±std in %)\n\n"
        f"{per_class}\n"
    )


def dumps(result: dict) -> str:
    return json.dumps(result, sort_keys=True, indent=1, ensure_ascii=False) + "\n"

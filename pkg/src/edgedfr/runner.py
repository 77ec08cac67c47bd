"""Config-driven runs: one evaluation, or a Cartesian sweep with an ordered merge."""

from __future__ import annotations

import copy
import csv
import itertools
import json
from concurrent.futures import ProcessPoolExecutor

from .bench import EvalReport, evaluate
from .config import SCHEMA_VERSION, build_dataset, build_run, resolve
from .errors import GeneratorError, StateDivergenceError
from .fixedpoint import DatapathFormats

SWEEP_AXES = ("n_virtual", "feedback_gain", "input_gain", "frac_bits")
METRIC_COLUMNS = ("mse", "nmse", "nrmse", "duration_ms", "status")


def run_eval(cfg: dict) -> EvalReport:
    """Evaluate a resolved configuration."""
    run = build_run(cfg)
    dataset = build_dataset(cfg)
    report = evaluate(run.params, run.mask, run.trainer, dataset, run.mode,
                      run.formats if run.mode == "quantized" else None, run.continual)
    report.config = cfg
    report.dataset_seed = dataset.seed
    return report


def report_document(report: EvalReport, weights_path=None) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "report",
        "config": report.config,
        "mode": report.mode,
        "continual": report.continual,
        "metrics": report.metrics.to_dict(),
        "train_error_trace_summary": report.error_trace_summary(),
        "counters": report.counters,
        "lms_step_size": report.step_size,
        "dataset_seed": getattr(report, "dataset_seed", None),
        "duration_ms": report.duration_ms,
        "weights_path": None if weights_path is None else str(weights_path),
    }


def write_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# sweeps


def sweep_points(cfg: dict):
    """``(axes, [(values, point_config), ...])`` in lexicographic order of values."""
    spec = cfg.get("sweep") or {}
    axes = tuple(a for a in SWEEP_AXES if a in spec)
    values = sorted(itertools.product(*(sorted(spec[a]) for a in axes)))
    points = []
    for combo in values:
        point = copy.deepcopy(cfg)
        point.pop("sweep", None)
        for axis, v in zip(axes, combo):
            if axis == "frac_bits":
                point["formats"] = DatapathFormats.from_dict(point["formats"]).with_frac_bits(v).to_dict()
            else:
                point["reservoir"][axis] = v
        points.append((combo, resolve(point)))
    return axes, points


def _run_point(point_cfg: dict) -> dict:
    try:
        report = run_eval(point_cfg)
    except (StateDivergenceError, GeneratorError):
        return {"mse": "diverged", "nmse": "diverged", "nrmse": "diverged",
                "duration_ms": "", "status": "diverged"}
    m = report.metrics
    return {"mse": m.mse, "nmse": m.nmse, "nrmse": m.nrmse,
            "duration_ms": report.duration_ms, "status": "ok"}


def run_sweep(cfg: dict, threads: int = 1):
    """Evaluate every sweep point; rows come back in point order whatever ``threads`` is."""
    axes, points = sweep_points(cfg)
    configs = [p for _, p in points]
    if threads > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_point, configs))
    else:
        results = [_run_point(c) for c in configs]
    rows = []
    for (combo, _), res in zip(points, results):
        row = dict(zip(axes, combo))
        row.update(res)
        rows.append(row)
    return axes, rows


def _cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_sweep_csv(axes, rows, fh, timing: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(list(axes) + list(METRIC_COLUMNS))
    for row in rows:
        cells = [_cell(row[a]) for a in axes]
        for col in METRIC_COLUMNS:
            v = row[col]
            cells.append("" if col == "duration_ms" and not timing else _cell(v))
        w.writerow(cells)

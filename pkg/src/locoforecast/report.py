"""Score forecasts over a dataset and write reports (text, JSON, CSV, figures)."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Callable

import numpy as np

from .baselines import BASELINES
from .config import ExperimentConfig
from .forecast import forecast_entangled, forecast_locomotion
from .pose import ANCHOR, LocomotionSequence, kde, mean_kde
from .streams import LOCAL_TO_JOINT, decompose

HORIZONS = (5, 10, 15, 20, 25, 30)

# a predictor maps (record, t_f) -> coordinates (t_f, joints, 2)
Predictor = Callable[[LocomotionSequence, int], np.ndarray]


def _stream_truth(rec: LocomotionSequence, stream: str, t_f: int) -> np.ndarray:
    coords = rec.coords[rec.t_p:rec.t_p + t_f]
    if stream == "full":
        return coords
    if stream == "global":
        return coords[:, ANCHOR:ANCHOR + 1, :]
    if stream == "local":
        return coords[:, LOCAL_TO_JOINT, :] - coords[:, ANCHOR:ANCHOR + 1, :]
    raise ValueError(f"stream must be 'full', 'global' or 'local', got {stream!r}")


def make_baseline_predictor(name: str, stream: str = "full") -> Predictor:
    try:
        fn = BASELINES[name]
    except KeyError:
        raise ValueError(f"unknown baseline {name!r}; choose from {sorted(BASELINES)}") from None

    def predict(rec: LocomotionSequence, t_f: int) -> np.ndarray:
        coords = rec.coords[:rec.t_p]
        if stream == "full":
            h = coords
        elif stream == "global":
            h = coords[:, ANCHOR:ANCHOR + 1, :]
        else:
            h = coords[:, LOCAL_TO_JOINT, :] - coords[:, ANCHOR:ANCHOR + 1, :]
        return fn(h, t_f)

    return predict


def make_pipeline_predictor(completion, local_model, global_model,
                            alpha_c: float = 0.25, stream: str = "full") -> Predictor:
    def predict(rec: LocomotionSequence, t_f: int) -> np.ndarray:
        if stream == "full":
            return forecast_locomotion(rec, completion, local_model, global_model, t_f, alpha_c)
        from .completion import complete_sequence
        hist = rec.history()
        if completion is not None:
            hist = complete_sequence(hist, completion, alpha_c)
        g, l = decompose(hist, require_complete=completion is not None)
        if stream == "global":
            return global_model.forecast(g, rec.frame_size, t_f)[:, None, :]
        return local_model.forecast(l, rec.frame_size, t_f)

    return predict


def make_entangled_predictor(model, completion=None, alpha_c: float = 0.25) -> Predictor:
    def predict(rec: LocomotionSequence, t_f: int) -> np.ndarray:
        return forecast_entangled(rec, model, completion, t_f, alpha_c)

    return predict


def evaluate(records: list[LocomotionSequence], predictor: Predictor,
             config: ExperimentConfig, subject: str,
             truth: list[LocomotionSequence] | None = None,
             stream: str = "full", horizons=HORIZONS) -> dict:
    """Per-record and per-horizon displacement errors against the truth.

    Truth defaults to the records themselves (detections as ground truth);
    horizons that do not fit a record's future are skipped and counted.
    """
    if truth is None:
        truth = records
    if len(truth) != len(records):
        raise ValueError(f"{len(records)} records but {len(truth)} truth records")
    norm = config.kde_norm
    per_record = []
    horizon_acc = {h: [] for h in horizons}
    skipped = {h: 0 for h in horizons}
    for rec, tru in zip(records, truth):
        if (rec.pedestrian_id and tru.pedestrian_id and rec.pedestrian_id != tru.pedestrian_id) \
                or tru.frames != rec.frames or tru.t_p != rec.t_p:
            raise ValueError(f"record/truth mismatch at {rec.pedestrian_id or '?'}")
        pred = np.asarray(predictor(rec, rec.t_f))
        tcoords = _stream_truth(tru, stream, rec.t_f)
        per_record.append({
            "pedestrian_id": rec.pedestrian_id,
            "kde": kde(pred, tcoords, norm),
            "mean_kde": mean_kde(pred, tcoords, norm),
        })
        for h in horizons:
            if h > rec.t_f:
                skipped[h] += 1
                continue
            horizon_acc[h].append((kde(pred[:h], _stream_truth(tru, stream, h), norm),
                                   mean_kde(pred[:h], _stream_truth(tru, stream, h), norm)))
    agg_kde = float(np.mean([r["kde"] for r in per_record]))
    agg_mean = float(np.mean([r["mean_kde"] for r in per_record]))
    horizon_rows = {}
    for h in horizons:
        vals = horizon_acc[h]
        horizon_rows[str(h)] = {
            "count": len(vals),
            "skipped": skipped[h],
            "kde": float(np.mean([v[0] for v in vals])) if vals else None,
            "mean_kde": float(np.mean([v[1] for v in vals])) if vals else None,
        }
    return {
        "schema_version": 1,
        "subject": subject,
        "stream": stream,
        "records_evaluated": len(per_record),
        "aggregate": {"kde": agg_kde, "mean_kde": agg_mean},
        "horizons": horizon_rows,
        "records": per_record,
        "config": config.to_dict(),
    }


def format_report(report: dict) -> str:
    lines = [
        f"subject: {report['subject']}",
        f"stream: {report['stream']}",
        f"records evaluated: {report['records_evaluated']}",
        "",
        f"aggregate KDE:      {report['aggregate']['kde']:.6f}",
        f"aggregate mean KDE: {report['aggregate']['mean_kde']:.6f}",
        "",
        "per-horizon table (future frames -> KDE / mean KDE):",
        f"{'t_f':>5} {'count':>6} {'skipped':>8} {'kde':>14} {'mean_kde':>14}",
    ]
    for h, row in report["horizons"].items():
        k = f"{row['kde']:.6f}" if row["kde"] is not None else "-"
        m = f"{row['mean_kde']:.6f}" if row["mean_kde"] is not None else "-"
        lines.append(f"{h:>5} {row['count']:>6} {row['skipped']:>8} {k:>14} {m:>14}")
    lines += ["", "config:"]
    for key, value in report["config"].items():
        lines.append(f"  {key} = {value}")
    lines.append("")
    return "\n".join(lines)


def records_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pedestrian_id", "kde", "mean_kde"])
    for row in report["records"]:
        writer.writerow([row["pedestrian_id"], repr(row["kde"]), repr(row["mean_kde"])])
    return buf.getvalue()


def render_horizon_figure(report: dict, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [(int(h), r["kde"]) for h, r in report["horizons"].items() if r["kde"] is not None]
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        xs, ys = zip(*rows)
        ax.plot(xs, ys, marker="o", color="#1f77b4")
    ax.set_xlabel("future frames")
    ax.set_ylabel("KDE (px)")
    ax.set_title(f"{report['subject']} ({report['stream']} stream)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def write_report(report: dict, out_dir: str | Path) -> dict[str, Path]:
    """Emit report.json, report.txt, records.csv and the horizon figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "report.json",
        "text": out / "report.txt",
        "csv": out / "records.csv",
        "figure": out / "kde_by_horizon.png",
    }
    paths["json"].write_text(json.dumps(report, indent=2, sort_keys=False) + "\n")
    paths["text"].write_text(format_report(report))
    paths["csv"].write_text(records_csv(report))
    render_horizon_figure(report, paths["figure"])
    return paths

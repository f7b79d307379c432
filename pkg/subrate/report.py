"""
Text renderings of experiment results: aligned tables, JSON documents and CSV.

Wall time differs between runs, so it is rendered only when `timing` is requested. Otherwise the time column
holds `-` and every rendering is reproducible byte for byte.
"""
from collections.abc import Iterable, Sequence
import csv
import io
import json
from typing import Any, Optional

from .evaluation import AblationTable, ComparisonRow, CrossValReport, MetricsReport, ScatterPoint
from .failures import UsageFailure
from .models import FitReport, ModelFile


__all__ = [
    "FORMATS",
    "metrics_dict",
    "render_metrics",
    "render_cv",
    "render_ablation",
    "render_comparison",
    "render_fit",
    "scatter_csv",
    "ablation_csv",
]


FORMATS = ("table", "json")


def _qps(qps: Sequence[int]) -> str:
    return ",".join(str(q) for q in qps) or "-"


def _time(seconds: float, timing: bool) -> str:
    return f"{seconds * 1e6:.3f}" if timing else "-"


def _table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    rows = [list(header)] + [list(r) for r in rows]
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for n, r in enumerate(rows):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _json(doc: Any) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _check(fmt: str) -> None:
    if fmt not in FORMATS:
        raise UsageFailure(f"Unknown output format {fmt!r}.", format=fmt)


#------------------------------------------------------------
# Metrics
#------------------------------------------------------------
METRICS_HEADER = ("model", "qp_train", "qp_eval", "P", "MAE", "MRE", "us/block", "n", "mre_excluded")


def _metrics_row(r: MetricsReport, timing: bool, label: Optional[str] = None) -> list[str]:
    return [
        label or r.model or "-",
        _qps(r.qp_train),
        _qps(r.qp_eval),
        f"{r.pearson:.4f}",
        f"{r.mae:.4f}",
        f"{r.mre:.4f}",
        _time(r.wall_time_per_block, timing),
        str(r.n_total),
        str(r.n_mre_excluded),
    ]


def metrics_dict(report: MetricsReport, timing: bool = False) -> dict[str, Any]:
    return {
        "model": report.model,
        "qp_train": list(report.qp_train),
        "qp_eval": list(report.qp_eval),
        "pearson": report.pearson,
        "mae": report.mae,
        "mre": report.mre,
        "wall_time_per_block": report.wall_time_per_block if timing else None,
        "n_total": report.n_total,
        "n_mre_excluded": report.n_mre_excluded,
    }


def render_metrics(reports: Sequence[MetricsReport], fmt: str = "table", timing: bool = False) -> str:
    """
    Renders metrics reports, one row each.
    """
    _check(fmt)
    if fmt == "json":
        return _json([metrics_dict(r, timing) for r in reports])
    return _table(METRICS_HEADER, [_metrics_row(r, timing) for r in reports])


def render_cv(report: CrossValReport, fmt: str = "table", timing: bool = False) -> str:
    """
    Renders per-fold metrics followed by their average.
    """
    _check(fmt)
    if fmt == "json":
        return _json({
            "fold_seed": report.fold_seed,
            "fold_sizes": list(report.fold_sizes),
            "per_fold": [metrics_dict(r, timing) for r in report.per_fold],
            "averaged": metrics_dict(report.averaged, timing),
            "trained_params": [m.params() for m in report.trained_params],
        })
    rows = [_metrics_row(r, timing, f"fold {i + 1}") for i, r in enumerate(report.per_fold)]
    rows.append(_metrics_row(report.averaged, timing, "mean"))
    return f"# {report.averaged.model}, {len(report.per_fold)} folds, seed {report.fold_seed}\n" + _table(METRICS_HEADER, rows)


#------------------------------------------------------------
# Ablation
#------------------------------------------------------------
ABLATION_HEADER = ("features", "P", "MAE", "MRE", "in_sample_mse")


def ablation_csv(table: AblationTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ABLATION_HEADER)
    for r in table.rows:
        writer.writerow([r.mask.label, repr(r.pearson), repr(r.mae), repr(r.mre), repr(r.in_sample_mse)])
    return out.getvalue()


def render_ablation(table: AblationTable, fmt: str = "table") -> str:
    """
    Renders the ablation table. The table format is CSV.
    """
    _check(fmt)
    if fmt == "json":
        return _json({
            "fold_seed": table.fold_seed,
            "rows": [
                {"features": r.mask.label, "pearson": r.pearson, "mae": r.mae, "mre": r.mre, "in_sample_mse": r.in_sample_mse}
                for r in table.rows
            ],
        })
    return ablation_csv(table)


#------------------------------------------------------------
# Comparison
#------------------------------------------------------------
def render_comparison(rows: Sequence[ComparisonRow], fmt: str = "table", timing: bool = False) -> str:
    _check(fmt)
    if fmt == "json":
        return _json([dict(metrics_dict(r.report, timing), qp=r.qp) for r in rows])
    return _table(METRICS_HEADER, [_metrics_row(r.report, timing) for r in rows])


#------------------------------------------------------------
# Fitting
#------------------------------------------------------------
def render_fit(model_file: ModelFile, report: FitReport) -> str:
    """
    One-line summary of a training run.
    """
    params = " ".join(f"{k}={v:.6g}" for k, v in model_file.model.params().items())
    state = "converged" if report.converged else "not converged"
    return f"{model_file.model.kind.value}: {params}; MSE {report.final_mse:.6g} after {report.iterations} iterations ({state})"


#------------------------------------------------------------
# Scatter
#------------------------------------------------------------
def scatter_csv(points: Iterable[ScatterPoint]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ScatterPoint._fields)
    for p in points:
        writer.writerow([repr(p.actual_bits), repr(p.estimated_bits), p.block_pixel_count])
    return out.getvalue()

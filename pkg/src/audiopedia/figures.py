"""Figure rendering for evaluation reports.

Charts land next to the delimited report outputs. PNG metadata is pinned
so repeated runs of the same evaluation produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import EvalReport  # noqa: E402

_PNG_METADATA = {"Software": "audiopedia"}

_TASK_LABELS = [("s_aqa", "s-AQA"), ("m_aqa", "m-AQA"), ("r_aqa", "r-AQA")]


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def render_report_figure(report: EvalReport, path: str | Path) -> Path:
    """Bar chart of per-task accuracy plus AEL accuracy and retrieval F1."""
    labels, values = [], []
    for key, label in _TASK_LABELS:
        value = report.accuracy.get(key)
        if value is not None:
            labels.append(label)
            values.append(value)
    if report.ael_accuracy is not None:
        labels.append("AEL")
        values.append(report.ael_accuracy)
    if report.retrieval_f1_mean is not None:
        labels.append("retrieval F1")
        values.append(report.retrieval_f1_mean)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(values)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    cfg = report.config
    ax.set_title(
        f"knowledge={cfg.get('knowledge_source', '-')} "
        f"linking={cfg.get('linking_mode', '-')}"
    )
    for x, v in enumerate(values):
        ax.text(x, v + 0.01, f"{v:.3f}", ha="center", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_ablation_figure(
    reports: Sequence[EvalReport],
    path: str | Path,
    labels: Sequence[str] | None = None,
) -> Path:
    """Grouped bars: one group per knowledge source, one bar per task metric."""
    if labels is None:
        labels = [
            "oracle" if r.config.get("linking_mode") == "oracle"
            else str(r.config.get("knowledge_source", "-"))
            for r in reports
        ]
    metrics = [("s_aqa", "s-AQA acc"), ("m_aqa", "m-AQA acc")]
    series: dict[str, list[float]] = {label: [] for _, label in metrics}
    series["AEL acc"] = []
    series["retrieval F1"] = []
    for report in reports:
        for key, label in metrics:
            series[label].append(report.accuracy.get(key) or 0.0)
        series["AEL acc"].append(report.ael_accuracy or 0.0)
        series["retrieval F1"].append(report.retrieval_f1_mean or 0.0)

    fig, ax = plt.subplots(figsize=(7, 4))
    n_groups = len(reports)
    n_series = len(series)
    width = 0.8 / n_series
    for si, (name, values) in enumerate(series.items()):
        xs = [g + si * width for g in range(n_groups)]
        ax.bar(xs, values, width=width, label=name)
    ax.set_xticks([g + 0.4 - width / 2 for g in range(n_groups)])
    ax.set_xticklabels(labels, rotation=15, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("knowledge source ablation")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)

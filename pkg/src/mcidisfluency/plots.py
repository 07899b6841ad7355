"""Report figures: per-class error rates and the feature-selection funnel."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

def _save(fig, path, tag: dict | None) -> Path:
    # no Software/date chunks so reruns write byte-identical PNGs
    meta = {"Software": None}
    if tag:
        meta["Description"] = " ".join(f"{k}={v}" for k, v in sorted(tag.items()))
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=meta)
    plt.close(fig)
    return path


def cer_figure(reports, path, tag: dict | None = None) -> Path:
    """Grouped bars: overall and per-class CER for each classifier."""
    classes = list(reports[0].classes)
    groups = ["overall"] + classes
    x = np.arange(len(reports))
    width = 0.8 / len(groups)
    fig, ax = plt.subplots(figsize=(7, 4))
    for gi, g in enumerate(groups):
        vals = [r.overall_cer if g == "overall" else r.per_class_cer[g] for r in reports]
        ax.bar(x + (gi - (len(groups) - 1) / 2) * width, vals, width, label=g)
    ax.set_xticks(x)
    ax.set_xticklabels([r.classifier for r in reports], rotation=15, ha="right")
    ax.set_ylabel("CER (%)")
    ax.set_ylim(0, max(10.0, 1.1 * max(
        max([r.overall_cer] + list(r.per_class_cer.values())) for r in reports)))
    ax.legend(frameon=False)
    ax.set_title(f"{reports[0].k}-fold cross-validation ({reports[0].policy} preprocessing)")
    fig.tight_layout()
    return _save(fig, path, tag)


def funnel_figure(selection: dict, path, tag: dict | None = None) -> Path:
    """Feature counts after each selection stage."""
    stages = ["initial", "U test", "SVM top-k"]
    counts = [selection["d_initial"], selection["d_utest"], selection["d_final"]]
    fig, ax = plt.subplots(figsize=(5, 3))
    bars = ax.barh(stages[::-1], counts[::-1], color=["#4c72b0", "#55a868", "#c44e52"])
    for b, c in zip(bars, counts[::-1]):
        ax.text(b.get_width(), b.get_y() + b.get_height() / 2, f" {c}", va="center")
    ax.set_xlabel("features")
    ax.set_xlim(0, 1.15 * max(counts))
    ax.set_title(f"selection funnel (alpha={selection['alpha']:g})")
    fig.tight_layout()
    return _save(fig, path, tag)

"""Report figures rendered next to the delimited output.

The CSV tables remain the canonical record; these charts are the quick-look
companions the report directory ships with.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .scoring import ResultTable, SensitivityPoint


def render_report_figures(table: ResultTable, out_dir: str | Path) -> list[Path]:
    """Accuracy-by-tier and accuracy-by-type bar charts as PNG files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(5, 3.2))
    tiers = sorted(table.tiers)
    ax.bar(
        [f"tier {t}" for t in tiers],
        [100 * table.tiers[t].accuracy for t in tiers],
        color="#3465a4",
    )
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 100)
    ax.set_title(f"overall {100 * table.overall.accuracy:.1f}%")
    fig.tight_layout()
    path = out_dir / "accuracy_by_tier.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    populated = [(name, cell) for name, cell in table.types.items() if cell.total]
    fig, ax = plt.subplots(figsize=(7, 0.3 * max(len(populated), 4) + 1.2))
    names = [n for n, _ in populated]
    ax.barh(names, [100 * c.accuracy for _, c in populated], color="#4e9a06")
    ax.set_xlabel("accuracy (%)")
    ax.set_xlim(0, 100)
    ax.invert_yaxis()
    fig.tight_layout()
    path = out_dir / "accuracy_by_type.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)
    return paths


def render_sensitivity_figure(
    points: Sequence[SensitivityPoint], out_path: str | Path
) -> Path:
    """Accuracy and delta-accuracy versus the range multiplier."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    xs = [p.multiplier for p in points]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(xs, [100 * p.accuracy for p in points], marker="o", label="accuracy")
    ax.plot(xs, [100 * p.delta for p in points], marker="s", label="delta vs 1.0x")
    ax.set_xlabel("range multiplier")
    ax.set_ylabel("percent")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path

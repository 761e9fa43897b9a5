"""Plot-data emission: tidy CSVs always, SVG rendering on request.

Two figure kinds: validation-perplexity curves over training steps (from one
or more metrics.jsonl files) and stratified win/tie/loss bars (from a
pairwise report).
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

from .errors import ValidationError


def curve_points_from_metrics(path: str | os.PathLike) -> list[tuple[int, float]]:
    """(step, valid_ppl) pairs from a metrics.jsonl file."""
    points = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "valid_ppl" in rec:
                points.append((int(rec["step"]), float(rec["valid_ppl"])))
    return points


def curve_points_from_csv(path: str | os.PathLike) -> list[tuple[int, float]]:
    points = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "step" not in reader.fieldnames:
            raise ValidationError(f"{path}: expected a CSV with 'step' and 'valid_ppl' columns")
        for row in reader:
            points.append((int(row["step"]), float(row["valid_ppl"])))
    return points


def write_curve_csv(series: dict[str, list[tuple[int, float]]], path: str | os.PathLike) -> Path:
    out = Path(path)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "step", "valid_ppl"])
        for name, points in series.items():
            for step, ppl in points:
                w.writerow([name, step, f"{ppl:.6f}"])
    return out


def render_curve_svg(series: dict[str, list[tuple[int, float]]], path: str | os.PathLike) -> Path:
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, points in series.items():
        if not points:
            continue
        xs, ys = zip(*points)
        ax.plot(xs, ys, marker="o", markersize=3, label=name)
    ax.set_xlabel("training step")
    ax.set_ylabel("validation perplexity")
    if series:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def bars_rows_from_pairwise_json(path: str | os.PathLike) -> list[dict]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return data["strata"]


def bars_rows_from_csv(path: str | os.PathLike) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({
                "upper_bound": row["upper_bound"],
                "occurrences": int(row["occurrences"]),
                "pct_win_a": float(row["pct_win_a"]),
                "pct_tie": float(row["pct_tie"]),
                "pct_win_b": float(row["pct_win_b"]),
            })
    return rows


def write_bars_csv(rows: list[dict], path: str | os.PathLike) -> Path:
    out = Path(path)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["upper_bound", "occurrences", "pct_win_a", "pct_tie", "pct_win_b"])
        for r in rows:
            w.writerow([r["upper_bound"], r["occurrences"],
                        f"{float(r['pct_win_a']):.6f}", f"{float(r['pct_tie']):.6f}",
                        f"{float(r['pct_win_b']):.6f}"])
    return out


def render_bars_svg(rows: list[dict], path: str | os.PathLike) -> Path:
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt
    import numpy as np

    labels = [str(r["upper_bound"]) for r in rows]
    win_a = [float(r["pct_win_a"]) for r in rows]
    tie = [float(r["pct_tie"]) for r in rows]
    win_b = [float(r["pct_win_b"]) for r in rows]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(x, win_a, label="model A wins")
    ax.bar(x, tie, bottom=win_a, label="tie")
    ax.bar(x, win_b, bottom=[a + t for a, t in zip(win_a, tie)], label="model B wins")
    ax.set_xticks(x, labels)
    ax.set_xlabel("frequency stratum (upper bound)")
    ax.set_ylabel("% of occurrences")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)

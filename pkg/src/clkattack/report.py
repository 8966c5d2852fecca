"""Plot-ready CSV tables and the matching PNG figures."""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .assign import read_frequencies, read_progress  # noqa: E402
from .reconstruct import read_report  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 150,
}
PNG_META = {"Software": None}


def _figure(width=6.0, height=None):
    golden = (5 ** 0.5 - 1) / 2
    return plt.subplots(figsize=(width, height or width * golden))


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    plt.close(fig)


def top_bigrams_table(freq_path, out_csv, m: int = 10) -> list[tuple[str, int]]:
    rows = [(str(b), c) for b, c in read_frequencies(freq_path)]
    rows.sort(key=lambda r: -r[1])  # stable: keeps rank order among ties
    rows = rows[:m]
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "bigram", "records"])
        for i, (b, c) in enumerate(rows, 1):
            w.writerow([i, b, c])
    return rows


def plot_top_bigrams(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.bar(range(len(rows)), [c for _, c in rows], color="#104E8B")
        ax.set_xticks(range(len(rows)), [b for b, _ in rows], rotation=45, ha="right")
        ax.set_ylabel("absolute frequency (records)")
        ax.set_title(f"{len(rows)} most frequent tagged bigrams")
        _save(fig, path)


def progress_table(progress_path, out_csv) -> list[tuple[int, float]]:
    rows = read_progress(progress_path)
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["update_index", "objective"])
        for i, v in rows:
            w.writerow([i, repr(v)])
    return rows


def plot_progress(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        if rows:
            ax.plot([i for i, _ in rows], [v for _, v in rows], color="#104E8B", lw=1.2)
            ax.set_title(f"objective {rows[0][1]:.2f} -> {rows[-1][1]:.2f} in {rows[-1][0]} updates")
        ax.set_xlabel("update step")
        ax.set_ylabel("objective")
        _save(fig, path)


def accuracy_table(report_path, out_csv) -> list[tuple[str, float]]:
    report = read_report(report_path)
    rows = [(k.removesuffix("_accuracy"), float(v)) for k, v in report.items() if k.endswith("_accuracy")]
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["identifier", "accuracy"])
        for name, v in rows:
            w.writerow([name, f"{v:.6f}"])
    return rows


def plot_accuracy(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure(5.0)
        ax.bar([n.replace("_", " ") for n, _ in rows], [v for _, v in rows], color="#104E8B")
        for i, (_, v) in enumerate(rows):
            ax.text(i, v + 0.01, f"{100 * v:.1f}%", ha="center", fontsize=8)
        ax.set_ylim(0, 1.08)
        ax.set_ylabel("share reconstructed")
        _save(fig, path)


def write_report_bundle(progress_path, freq_path, out_dir, report_path=None, m: int = 10,
                        figures: bool = True) -> dict[str, str]:
    """Top-``m`` bigram table, objective curve and accuracy summary, as CSV and PNG."""
    os.makedirs(out_dir, exist_ok=True)
    out = {}
    out["top_bigrams"] = os.path.join(out_dir, "top_bigrams.csv")
    top = top_bigrams_table(freq_path, out["top_bigrams"], m)
    out["progress"] = os.path.join(out_dir, "progress_curve.csv")
    curve = progress_table(progress_path, out["progress"])
    if figures:
        plot_top_bigrams(top, os.path.join(out_dir, "top_bigrams.png"))
        plot_progress(curve, os.path.join(out_dir, "progress_curve.png"))
    if report_path:
        out["accuracy"] = os.path.join(out_dir, "accuracy_summary.csv")
        acc = accuracy_table(report_path, out["accuracy"])
        if figures:
            plot_accuracy(acc, os.path.join(out_dir, "accuracy_summary.png"))
    return out

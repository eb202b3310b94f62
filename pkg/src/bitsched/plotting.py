"""Figure rendering for CLI reports.

Imported lazily by the CLI so that library use never pulls in a GUI stack;
the Agg backend keeps rendering headless.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

plt.rcParams.update(
    {
        "figure.figsize": (5.2, 3.4),
        "figure.dpi": 150,
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.35,
        "lines.linewidth": 1.4,
        "legend.fontsize": 8,
        "savefig.bbox": "tight",
    }
)


def save_line_chart(
    path,
    x,
    series,
    *,
    xlabel: str,
    ylabel: str,
    title: str,
    logx: bool = False,
    logy: bool = False,
    hlines=None,
) -> None:
    """Render named y-series over a shared x axis to a PNG file."""
    fig, ax = plt.subplots()
    for label, y in series.items():
        ax.plot(x, y, marker="o", markersize=2.5, label=label)
    for label, level in (hlines or {}).items():
        ax.axhline(level, linestyle="--", color="gray", linewidth=1.0, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1 or hlines:
        ax.legend()
    fig.savefig(path)
    plt.close(fig)


def save_bar_chart(path, labels, values, *, errors=None, ylabel: str, title: str) -> None:
    """Render one bar per label, with optional error bars, to a PNG file."""
    fig, ax = plt.subplots()
    xs = range(len(labels))
    ax.bar(xs, values, yerr=errors, capsize=3, color="#4878a8")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=0)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.savefig(path)
    plt.close(fig)


def save_grouped_bars(path, labels, groups, *, ylabel: str, title: str) -> None:
    """Render side-by-side bar groups: groups maps series name -> values."""
    fig, ax = plt.subplots()
    n_groups = len(groups)
    width = 0.8 / n_groups
    for i, (name, values) in enumerate(groups.items()):
        xs = [j + (i - (n_groups - 1) / 2) * width for j in range(len(labels))]
        ax.bar(xs, values, width=width, label=name)
    ax.set_xticks(list(range(len(labels))))
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=7)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.savefig(path)
    plt.close(fig)

"""Report rendering: aligned text tables, delimited files, and figures.

The CLI's report path writes machine-friendly CSV next to a rendered PNG for
each artifact, so runs can be eyeballed and diffed with the same files.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .rates import PPM
from .scenario import EventRecord


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Fixed-width text table; right-aligns numeric columns."""
    cells = [[str(value) for value in row] for row in rows]
    widths = [len(name) for name in header]
    for row in cells:
        for i, value in enumerate(row):
            widths[i] = max(widths[i], len(value))
    numeric = [
        all(row[i].lstrip("-").replace(".", "", 1).isdigit() for row in cells if row[i])
        for i in range(len(header))
    ] if cells else [False] * len(header)

    def fmt(row):
        out = []
        for i, value in enumerate(row):
            out.append(value.rjust(widths[i]) if numeric[i] else value.ljust(widths[i]))
        return "  ".join(out).rstrip()

    lines = [fmt(list(header)), "  ".join("-" * w for w in widths)]
    lines.extend(fmt(row) for row in cells)
    return "\n".join(lines)


def write_delimited(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def render_credit_trajectory(records: list[EventRecord], path: Path) -> None:
    """Aggregate credit after each replayed event, defaults highlighted."""
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = [record.index for record in records]
    ys = [record.total_credit for record in records]
    ax.step(xs, ys, where="post", lw=1.6)
    defaults = [(r.index, r.total_credit) for r in records if r.op == "DEFAULT"]
    if defaults:
        ax.scatter(*zip(*defaults), color="firebrick", zorder=3, label="default")
        ax.legend(loc="best")
    ax.set_xlabel("event index")
    ax.set_ylabel("aggregate credit (minor units)")
    ax.set_title("Aggregate credit over replay")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_mc_results(rows: list[dict], path: Path) -> None:
    """Mean protocol P&L with a 3-standard-error band per grid point."""
    fig, ax = plt.subplots(figsize=(7.5, 4))
    labels = []
    for i, row in enumerate(rows):
        color = "tab:blue" if row["kind"] == "breakeven" else "tab:orange"
        ax.errorbar(
            i, row["mean_pnl"], yerr=3 * row["stderr"],
            fmt="o", capsize=4, color=color,
        )
        labels.append(
            f"D={row['default_prob_ppm'] / PPM:.0%}\nT={row['term']}"
            + ("" if row["kind"] == "breakeven" else "\n(-10%)")
        )
    ax.axhline(0, color="black", lw=0.8)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("mean protocol P&L (minor units)")
    ax.set_title("Break-even Monte Carlo (bars: ±3 SE)")
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_ladder_results(pnls: list[int], path: Path) -> None:
    """Distribution of attacker P&L across the strategy sweep."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(pnls, bins=60, color="tab:blue", alpha=0.85)
    ax.axvline(0, color="firebrick", lw=1.2, label="break-even for the attacker")
    ax.set_xlabel("attacker P&L (minor units)")
    ax.set_ylabel("configurations")
    ax.set_title("Repay-then-default ladder sweep")
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sybil_results(rows: list[dict], path: Path) -> None:
    """Delegated total versus the sponsor's limit drop; conservation keeps them equal."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    xs = [row["total"] for row in rows]
    ys = [row["limit_drop"] for row in rows]
    ax.scatter(xs, ys, s=14, alpha=0.7)
    lim = max(xs + ys + [1])
    ax.plot([0, lim], [0, lim], color="gray", lw=0.8, ls="--", label="exact offset")
    ax.set_xlabel("capacity split across pseudonyms")
    ax.set_ylabel("sponsor credit-limit drop")
    ax.set_title("Sybil splits reshuffle capacity")
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


"""Figures for sweep results (Agg backend, deterministic PNG output)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=100, metadata=PNG_META)
    plt.close(fig)
    return path


def rounds_vs_n(rows: Iterable, path: Path) -> Path:
    """Mean measured rounds against graph size, one line per protocol."""
    data: dict[str, dict[int, list[int]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r.rounds is not None and r.actual_n is not None:
            data[r.protocol][r.actual_n].append(r.rounds)
    fig, ax = plt.subplots(figsize=(6, 4))
    for proto in sorted(data):
        ns = sorted(data[proto])
        ax.plot(ns, [sum(data[proto][n]) / len(data[proto][n]) for n in ns], marker="o", label=proto)
    ax.set_xlabel("n (nodes)")
    ax.set_ylabel("rounds until the last honest robot terminates")
    ax.set_yscale("symlog")
    if data:
        ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def pass_rate_by_f(rows: Iterable, path: Path) -> Path:
    """Pass rate per protocol against the number of Byzantine robots."""
    tally: dict[str, dict[int, list[int]]] = defaultdict(lambda: defaultdict(lambda: [0, 0]))
    for r in rows:
        if r.status == "invalid" or r.actual_f is None:
            continue
        cell = tally[r.protocol][r.actual_f]
        cell[0] += r.status == "pass"
        cell[1] += 1
    fig, ax = plt.subplots(figsize=(6, 4))
    for proto in sorted(tally):
        fs = sorted(tally[proto])
        ax.plot(fs, [tally[proto][f][0] / tally[proto][f][1] for f in fs], marker="s", label=proto)
    ax.set_xlabel("f (Byzantine robots)")
    ax.set_ylabel("pass rate")
    ax.set_ylim(-0.05, 1.05)
    if tally:
        ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def render_figures(rows: list, out_dir: Path) -> list[Path]:
    return [
        rounds_vs_n(rows, out_dir / "rounds_vs_n.png"),
        pass_rate_by_f(rows, out_dir / "pass_rate_by_f.png"),
    ]

"""Grid sweeps over sampled scenarios, with CSV/JSON summaries."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import statistics
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable

from .errors import DispersimError, ValidationError
from .sampling import random_scenario
from .scenario import PROTOCOLS, ScenarioWarning, run_scenario
from .uxs import UxsCache

GRID_KEYS = ("protocol", "n", "k", "f", "strategy", "graph", "seed")
DEFAULTS: dict[str, list[Any]] = {
    "n": [None], "k": [None], "f": [0], "strategy": [None], "graph": ["random-connected"], "seed": [0],
}
GROUP_KEYS = ("protocol", "n", "k", "f", "strategy", "graph")


@dataclass(frozen=True)
class Cell:
    protocol: str
    n: int | None
    k: int | None
    f: int | str
    strategy: str | None
    graph: str
    seed: int


@dataclass
class RunRow:
    protocol: str
    n: int | None
    k: int | None
    f: int | str
    strategy: str | None
    graph: str
    seed: int
    status: str  # pass | fail | invalid
    actual_n: int | None = None
    actual_k: int | None = None
    actual_f: int | None = None
    rounds: int | None = None
    bound: float | None = None
    precondition_unmet: bool = False
    trace_digest: str | None = None
    detail: str = ""


def load_grid(spec: dict[str, Any]) -> list[Cell]:
    if not isinstance(spec, dict):
        raise ValidationError("sweep file must hold a JSON object")
    grid = spec.get("grid", {})
    if not isinstance(grid, dict):
        raise ValidationError("'grid' must be an object mapping keys to lists")
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ValidationError(f"unknown grid keys {sorted(unknown)}; allowed: {', '.join(GRID_KEYS)}")
    axes = {}
    for key in GRID_KEYS:
        values = grid.get(key, DEFAULTS.get(key, []))
        if not isinstance(values, list):
            raise ValidationError(f"grid key {key!r} must be a list")
        axes[key] = values
    for p in axes["protocol"]:
        if p not in PROTOCOLS:
            raise ValidationError(f"unknown protocol {p!r} in sweep grid")
    return [Cell(*combo) for combo in itertools.product(*(axes[k] for k in GRID_KEYS))]


def run_cell(cell: Cell, uxs_dir: str | None = None) -> RunRow:
    row = RunRow(**asdict(cell), status="invalid")
    try:
        scen = random_scenario(cell.protocol, cell.seed, n=cell.n, k=cell.k, f=cell.f,
                               strategy=cell.strategy, graph=cell.graph)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ScenarioWarning)
            res = run_scenario(scen, uxs_cache=UxsCache(uxs_dir) if uxs_dir else None)
    except ValidationError as exc:
        row.detail = str(exc)
        return row
    row.status = "pass" if res.verdict.ok else "fail"
    row.actual_n = res.meta["n"]
    row.actual_k = res.meta["k"]
    row.actual_f = res.meta["f"]
    row.rounds = res.verdict.measured_rounds
    row.bound = res.verdict.bound["value"] if res.verdict.bound else None
    row.precondition_unmet = bool(res.meta.get("precondition_unmet"))
    row.trace_digest = res.trace.digest()
    if not res.verdict.ok:
        row.detail = "; ".join(res.verdict.notes)
    return row


def _run_star(args: tuple[Cell, str | None]) -> RunRow:
    return run_cell(*args)


def run_grid(cells: list[Cell], jobs: int = 1, uxs_dir: str | None = None) -> list[RunRow]:
    if jobs <= 1 or len(cells) <= 1:
        return [run_cell(c, uxs_dir) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_star, [(c, uxs_dir) for c in cells], chunksize=4))


def summarize(rows: Iterable[RunRow]) -> list[dict[str, Any]]:
    groups: dict[tuple, list[RunRow]] = {}
    for r in rows:
        groups.setdefault(tuple(getattr(r, k) for k in GROUP_KEYS), []).append(r)
    out = []
    for key, rs in groups.items():
        valid = [r for r in rs if r.status != "invalid"]
        rounds = [r.rounds for r in valid if r.rounds is not None]
        passes = sum(1 for r in valid if r.status == "pass")
        out.append({
            **dict(zip(GROUP_KEYS, key)),
            "runs": len(rs),
            "valid": len(valid),
            "passes": passes,
            "pass_rate": round(passes / len(valid), 6) if valid else None,
            "rounds_mean": round(statistics.fmean(rounds), 3) if rounds else None,
            "rounds_min": min(rounds) if rounds else None,
            "rounds_max": max(rounds) if rounds else None,
            "precondition_unmet": sum(1 for r in valid if r.precondition_unmet),
        })
    return out


SUMMARY_FIELDS = list(GROUP_KEYS) + ["runs", "valid", "passes", "pass_rate", "rounds_mean", "rounds_min",
                                     "rounds_max", "precondition_unmet"]


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _csv(rows: list[dict[str, Any]], fields: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    return buf.getvalue()


def write_outputs(out_dir: str | os.PathLike, rows: list[RunRow], summary: list[dict[str, Any]],
                  figures: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_dicts = [asdict(r) for r in rows]
    written = []
    for name, text in (
        ("runs.csv", _csv(run_dicts, list(RunRow.__dataclass_fields__))),
        ("summary.csv", _csv(summary, SUMMARY_FIELDS)),
        ("summary.json", json.dumps({"cells": summary, "runs": run_dicts}, indent=2, sort_keys=True) + "\n"),
    ):
        _atomic_write(out / name, text)
        written.append(out / name)
    if figures and rows:
        from .report import render_figures

        written.extend(render_figures(rows, out))
    return written


def sweep(spec: dict[str, Any], out_dir: str | os.PathLike, jobs: int = 1, uxs_dir: str | None = None,
          figures: bool = True) -> tuple[list[RunRow], list[dict[str, Any]]]:
    cells = load_grid(spec)
    rows = run_grid(cells, jobs, uxs_dir)
    summary = summarize(rows)
    try:
        write_outputs(out_dir, rows, summary, figures)
    except OSError as exc:  # pragma: no cover
        raise DispersimError(f"cannot write sweep outputs: {exc}") from exc
    return rows, summary

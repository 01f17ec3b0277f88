"""Universal exploration sequences: application, search and coverage checks.

A traversal driven by steps ``x_1..x_L`` leaves its start through port
``(e + x_1) mod deg`` where ``e`` is the entry port of the start (0 for a
fresh start), then at every later node through ``(entry + x_i) mod deg``.
Searched sequences always have ``x_1 = 0``, so a fresh traversal leaves its
start through port 0. ``X(n)`` is the number of steps, i.e. moves.

Two modes exist. ``exhaustive`` sequences cover every connected port-labeled
graph with at most ``n`` nodes from every (node, entry-port) start; they are
only searched for ``n <= EXHAUSTIVE_CEILING``. ``local`` sequences are
verified against one concrete graph.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .graph import Graph, PortTable, enumerate_port_labeled

EXHAUSTIVE_CEILING = 4
FORMAT_VERSION = 1


class UxsError(ValidationError):
    pass


def next_port(entry_port: int | None, step_value: int, degree: int) -> int:
    if degree < 1:
        raise ValueError("cannot leave a node of degree 0")
    if entry_port is None:
        return 0
    if not 0 <= entry_port < degree:
        raise ValueError(f"entry port {entry_port} invalid for degree {degree}")
    return (entry_port + step_value) % degree


def walk(ports: PortTable, start: int, entry: int, steps: Sequence[int]) -> list[int]:
    """Nodes visited (start included) by a traversal from ``(start, entry)``."""
    path = [start]
    if not ports[start]:
        return path
    v, e = start, entry
    for x in steps:
        p = next_port(e, x, len(ports[v]))
        assert 0 <= p < len(ports[v])
        v, e = ports[v][p]
        path.append(v)
    return path


@dataclass(frozen=True)
class UxsSequence:
    n: int
    steps: tuple[int, ...]
    mode: str  # "exhaustive" | "local" | "uncertified"
    seed: int
    graph_digest: str | None = None
    report_hash: str | None = None

    @property
    def length(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "n": self.n,
            "steps": list(self.steps),
            "mode": self.mode,
            "seed": self.seed,
            "graph_digest": self.graph_digest,
            "report_hash": self.report_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UxsSequence":
        return cls(d["n"], tuple(d["steps"]), d["mode"], d["seed"], d.get("graph_digest"), d.get("report_hash"))


@dataclass
class CoverageReport:
    graphs_checked: int = 0
    starts_checked: int = 0
    failures: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def digest(self) -> str:
        blob = json.dumps(
            {"graphs": self.graphs_checked, "starts": self.starts_checked, "failures": self.failures},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()


def _starts(ports: PortTable) -> Iterable[tuple[int, int]]:
    for v, row in enumerate(ports):
        if row:
            for e in range(len(row)):
                yield v, e
        else:
            yield v, 0


def verify_coverage(steps: Sequence[int], graphs: Graph | Sequence[PortTable] | int) -> CoverageReport:
    """Walk every start of every graph; list the starts that miss a node.

    ``graphs`` may be one :class:`Graph`, a list of port tables, or an int
    ``n`` meaning every connected port-labeled graph with at most ``n`` nodes.
    """
    if isinstance(graphs, Graph):
        tables: Sequence[PortTable] = [graphs.ports]
    elif isinstance(graphs, int):
        tables = _all_tables(graphs)
    else:
        tables = graphs
    report = CoverageReport()
    for gi, ports in enumerate(tables):
        report.graphs_checked += 1
        for v, e in _starts(ports):
            report.starts_checked += 1
            missed = len(ports) - len(set(walk(ports, v, e, steps)))
            if missed:
                report.failures.append({"graph": gi, "node": v, "entry": e, "missed": missed})
    return report


@lru_cache(maxsize=None)
def _all_tables(max_n: int) -> tuple[PortTable, ...]:
    return tuple(enumerate_port_labeled(max_n, dedupe=True))


# --------------------------------------------------------------------------
# Search
# --------------------------------------------------------------------------


class _Walkers:
    """Vectorised state of every (graph, start) traversal."""

    def __init__(self, tables: Sequence[PortTable]):
        dmax = max(1, max((len(r) for t in tables for r in t), default=1))
        nmax = max(len(t) for t in tables)
        nodes = sum(len(t) for t in tables)
        self.deg = np.zeros(nodes, dtype=np.int64)
        self.nbr = np.zeros((nodes, dmax), dtype=np.int64)
        self.back = np.zeros((nodes, dmax), dtype=np.int64)
        self.local = np.zeros(nodes, dtype=np.int64)
        cur, entry, owner_size = [], [], []
        offset = 0
        for t in tables:
            for v, row in enumerate(t):
                g = offset + v
                self.deg[g] = len(row)
                self.local[g] = v
                for i, (u, j) in enumerate(row):
                    self.nbr[g, i] = offset + u
                    self.back[g, i] = j
            for v, e in _starts(t):
                cur.append(offset + v)
                entry.append(e)
                owner_size.append(len(t))
            offset += len(t)
        self.cur = np.array(cur, dtype=np.int64)
        self.entry = np.array(entry, dtype=np.int64)
        self.size = np.array(owner_size, dtype=np.int64)
        self.visited = np.zeros((len(cur), nmax), dtype=bool)
        self.visited[np.arange(len(cur)), self.local[self.cur]] = True
        self.count = self.visited.sum(axis=1)
        self.dmax = dmax
        self.movable = self.deg[self.cur] > 0

    def done(self) -> bool:
        return bool(np.all(self.count >= self.size))

    def _advance(self, x: int):
        d = np.maximum(self.deg[self.cur], 1)
        port = (self.entry + x) % d
        nxt = np.where(self.movable, self.nbr[self.cur, port], self.cur)
        ent = np.where(self.movable, self.back[self.cur, port], self.entry)
        return nxt, ent

    def gain(self, x: int) -> int:
        nxt, _ = self._advance(x)
        rows = np.arange(len(nxt))
        return int(np.count_nonzero(~self.visited[rows, self.local[nxt]]))

    def apply(self, x: int) -> None:
        nxt, ent = self._advance(x)
        rows = np.arange(len(nxt))
        self.visited[rows, self.local[nxt]] = True
        self.cur, self.entry = nxt, ent
        self.count = self.visited.sum(axis=1)


def _search(tables: Sequence[PortTable], rng: random.Random, cap: int) -> list[int]:
    walkers = _Walkers(tables)
    steps: list[int] = []
    if walkers.done():
        return steps
    steps.append(0)
    walkers.apply(0)
    symbols = list(range(walkers.dmax))
    while not walkers.done():
        if len(steps) >= cap:
            raise UxsError(f"no covering sequence within the length cap {cap}")
        gains = [walkers.gain(x) for x in symbols]
        best = max(gains)
        pool = [x for x, gv in zip(symbols, gains) if gv == best] if best > 0 else symbols
        x = pool[rng.randrange(len(pool))]
        steps.append(x)
        walkers.apply(x)
    return steps


def generate(n: int, g: Graph | None = None, seed: int = 0, *, ceiling: int = EXHAUSTIVE_CEILING,
             length_cap: int | None = None) -> UxsSequence:
    """Search a covering sequence for parameter ``n``.

    Without ``g`` the sequence must cover every connected port-labeled graph of
    at most ``n`` nodes, which is only attempted for ``n <= ceiling``. With
    ``g`` it must cover ``g`` from all of its starts.
    """
    if n < 1:
        raise UxsError("n must be >= 1")
    cap = length_cap if length_cap is not None else 64 * n**5
    if g is None:
        if n > ceiling:
            raise UxsError(f"exhaustive mode requested for n={n} above the ceiling {ceiling}")
        tables: Sequence[PortTable] = _all_tables(n)
        digest = None
        mode = "exhaustive"
    else:
        if g.n > n:
            raise UxsError(f"graph has {g.n} nodes, more than the parameter n={n}")
        tables = [g.ports]
        digest = g.digest()
        mode = "local"
    rng = random.Random(f"uxs:{n}:{digest}:{seed}")
    steps = _search(tables, rng, cap)
    report = verify_coverage(steps, tables)
    if not report.ok:  # pragma: no cover - search and walk disagree
        raise UxsError("searched sequence failed independent verification")
    return UxsSequence(n, tuple(steps), mode, seed, digest, report.digest())


def uncertified(n: int, seed: int, length: int | None = None) -> UxsSequence:
    """Seeded sequence with no coverage guarantee (parameter below graph size)."""
    rng = random.Random(f"uxs-uncertified:{n}:{seed}")
    length = length if length is not None else 8 * n * n
    steps = [0] + [rng.randrange(max(1, n - 1)) for _ in range(length - 1)]
    return UxsSequence(n, tuple(steps), "uncertified", seed)


# --------------------------------------------------------------------------
# Caching and per-scenario families
# --------------------------------------------------------------------------


class UxsCache:
    """Content-addressed store keyed by (n, graph digest, seed)."""

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory else None
        self._memo: dict[str, UxsSequence] = {}

    @staticmethod
    def key(n: int, digest: str | None, seed: int) -> str:
        raw = f"v{FORMAT_VERSION}|{n}|{digest or 'exhaustive'}|{seed}"
        return hashlib.sha256(raw.encode()).hexdigest()[:32]

    def get(self, n: int, g: Graph | None, seed: int) -> UxsSequence:
        digest = g.digest() if g is not None else None
        key = self.key(n, digest, seed)
        if key in self._memo:
            return self._memo[key]
        seq = None
        path = self.directory / f"{key}.json" if self.directory else None
        if path is not None and path.exists():
            seq = UxsSequence.from_dict(json.loads(path.read_text()))
        if seq is None:
            seq = _generate_cached(n, g, seed)
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_suffix(".tmp")
                tmp.write_text(json.dumps(seq.to_dict(), sort_keys=True))
                os.replace(tmp, path)
        self._memo[key] = seq
        return seq


@lru_cache(maxsize=256)
def _generate_cached(n: int, g: Graph | None, seed: int) -> UxsSequence:
    return generate(n, g, seed)


DEFAULT_CACHE = UxsCache()


class UxsFamily:
    """The sequences ``UXS(N)`` that robots in one scenario can compute.

    ``N <= ceiling`` uses the exhaustive sequence; ``N >= n`` uses a sequence
    verified on the scenario graph; anything in between carries no guarantee,
    exactly like a real sequence run on a graph larger than its parameter.
    """

    def __init__(self, g: Graph, seed: int = 0, cache: UxsCache | None = None,
                 ceiling: int = EXHAUSTIVE_CEILING):
        self.graph = g
        self.seed = seed
        self.cache = cache or DEFAULT_CACHE
        self.ceiling = ceiling
        self._seqs: dict[int, UxsSequence] = {}

    def sequence(self, n: int) -> UxsSequence:
        if n not in self._seqs:
            if n <= self.ceiling:
                seq = self.cache.get(n, None, self.seed)
            elif n >= self.graph.n:
                seq = self.cache.get(n, self.graph, self.seed)
            else:
                seq = uncertified(n, self.seed)
            self._seqs[n] = seq
        return self._seqs[n]

    def steps(self, n: int) -> tuple[int, ...]:
        return self.sequence(n).steps

    def X(self, n: int) -> int:
        return self.sequence(n).length

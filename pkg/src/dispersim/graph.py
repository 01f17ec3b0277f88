"""Capacitated, anonymous, port-labeled graphs.

Nodes are numbered ``0..n-1`` for the simulator's benefit only; robots never
see these numbers. At node ``v`` the incident edges carry local labels
``0..deg(v)-1`` and ``ports[v][i] == (u, j)`` means port ``i`` of ``v`` leads to
``u``, arriving through ``u``'s port ``j``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

from .errors import ValidationError

PortTable = tuple[tuple[tuple[int, int], ...], ...]


class GraphError(ValidationError):
    """Malformed graph description."""


@dataclass(frozen=True)
class Graph:
    ports: PortTable
    capacities: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.ports) != len(self.capacities):
            raise GraphError("capacity list length differs from node count")
        if len(self.ports) == 0:
            raise GraphError("graph needs at least one node")
        for v, c in enumerate(self.capacities):
            if c < 0:
                raise GraphError(f"negative capacity at node {v}")
        seen = set()
        for v, row in enumerate(self.ports):
            nbrs = set()
            for i, (u, j) in enumerate(row):
                if not 0 <= u < self.n:
                    raise GraphError(f"port {i} of node {v} leads to unknown node {u}")
                if u == v:
                    raise GraphError(f"self-loop at node {v}")
                if u in nbrs:
                    raise GraphError(f"parallel edge between {v} and {u}")
                nbrs.add(u)
                if j >= len(self.ports[u]) or self.ports[u][j] != (v, i):
                    raise GraphError(f"port map is not an involution at ({v}, {i})")
                seen.add(frozenset((v, u)))
        if not is_connected(self.ports):
            raise GraphError("graph is disconnected")

    @property
    def n(self) -> int:
        return len(self.ports)

    @property
    def m(self) -> int:
        return sum(len(row) for row in self.ports) // 2

    def degree(self, v: int) -> int:
        return len(self.ports[v])

    def follow(self, v: int, port: int) -> tuple[int, int]:
        """Node reached from ``v`` through ``port`` and the entry port there."""
        return self.ports[v][port]

    @property
    def total_capacity(self) -> int:
        return sum(self.capacities)

    @property
    def nonzero_capacity_count(self) -> int:
        return sum(1 for c in self.capacities if c > 0)

    @property
    def max_degree(self) -> int:
        return max(len(row) for row in self.ports)

    def edges(self) -> list[tuple[int, int, int, int]]:
        """Each undirected edge once, as ``(v, i, u, j)`` with ``v < u``."""
        out = []
        for v, row in enumerate(self.ports):
            for i, (u, j) in enumerate(row):
                if v < u:
                    out.append((v, i, u, j))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "ports": [[list(p) for p in row] for row in self.ports],
            "capacities": list(self.capacities),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Graph":
        ports = tuple(tuple((int(u), int(j)) for u, j in row) for row in d["ports"])
        return cls(ports, tuple(int(c) for c in d["capacities"]))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_capacities(self, capacities: Sequence[int]) -> "Graph":
        return Graph(self.ports, tuple(capacities))


def is_connected(ports: PortTable) -> bool:
    n = len(ports)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for u, _ in ports[v]:
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return len(seen) == n


def from_edges(n: int, edges: Sequence[tuple[int, int]], capacities: Sequence[int]) -> Graph:
    """Build a graph whose ports follow the order in which edges are listed."""
    rows: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    pairs = set()
    for a, b in edges:
        if not (0 <= a < n and 0 <= b < n):
            raise GraphError(f"edge ({a}, {b}) references a node outside 0..{n - 1}")
        if a == b:
            raise GraphError(f"self-loop at node {a}")
        key = (min(a, b), max(a, b))
        if key in pairs:
            raise GraphError(f"parallel edge between {a} and {b}")
        pairs.add(key)
        rows[a].append((b, len(rows[b])))
        rows[b].append((a, len(rows[a]) - 1))
    ports = tuple(tuple(row) for row in rows)
    if not is_connected(ports):
        raise GraphError("edge list does not connect all declared nodes")
    return Graph(ports, tuple(capacities))


def shuffle_ports(g: Graph, rng: random.Random) -> Graph:
    """Relabel ports at every node with an rng-drawn permutation."""
    perms = []
    for v in range(g.n):
        p = list(range(g.degree(v)))
        rng.shuffle(p)
        perms.append(p)  # old port i becomes perms[v][i]
    rows: list[list[tuple[int, int]]] = [[(0, 0)] * g.degree(v) for v in range(g.n)]
    for v, row in enumerate(g.ports):
        for i, (u, j) in enumerate(row):
            rows[v][perms[v][i]] = (u, perms[u][j])
    return Graph(tuple(tuple(r) for r in rows), g.capacities)


# --------------------------------------------------------------------------
# GraphSpec and generators
# --------------------------------------------------------------------------

GENERATORS = ("explicit", "ring", "path", "star", "complete", "tree", "random-connected")


@dataclass(frozen=True)
class GraphSpec:
    kind: str
    n: int = 0
    edges: tuple[tuple[int, int], ...] = ()
    m: int | None = None
    capacities: dict[str, Any] = field(default_factory=lambda: {"rule": "uniform", "value": 1})
    seed: int = 0
    shuffle_ports: bool = False

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GraphSpec":
        known = {"kind", "n", "edges", "m", "capacities", "seed", "shuffle_ports"}
        extra = set(d) - known
        if extra:
            raise GraphError(f"unknown graph spec keys: {sorted(extra)}")
        if "kind" not in d:
            raise GraphError("graph spec needs a 'kind'")
        caps = d.get("capacities", {"rule": "uniform", "value": 1})
        if isinstance(caps, list):
            caps = {"rule": "explicit", "values": caps}
        edges = tuple(tuple(e) for e in d.get("edges", ()))
        n = d.get("n", 0)
        if d["kind"] == "explicit" and not n and edges:
            n = 1 + max(max(e) for e in edges)
        return cls(
            kind=d["kind"],
            n=int(n),
            edges=edges,  # type: ignore[arg-type]
            m=d.get("m"),
            capacities=dict(caps),
            seed=int(d.get("seed", 0)),
            shuffle_ports=bool(d.get("shuffle_ports", False)),
        )

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind, "n": self.n, "capacities": self.capacities, "seed": self.seed}
        if self.edges:
            d["edges"] = [list(e) for e in self.edges]
        if self.m is not None:
            d["m"] = self.m
        if self.shuffle_ports:
            d["shuffle_ports"] = True
        return d


def _prufer_tree(n: int, rng: random.Random) -> list[tuple[int, int]]:
    # uniform over labeled trees
    if n <= 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = [rng.randrange(n) for _ in range(n - 2)]
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    edges = []
    for x in seq:
        leaf = min(v for v in range(n) if degree[v] == 1)
        edges.append((leaf, x))
        degree[leaf] -= 1
        degree[x] -= 1
    u, w = [v for v in range(n) if degree[v] == 1]
    edges.append((u, w))
    return edges


def _structure(spec: GraphSpec, rng: random.Random) -> tuple[int, list[tuple[int, int]]]:
    n = spec.n
    kind = spec.kind
    if kind == "explicit":
        return n, [tuple(e) for e in spec.edges]  # type: ignore[misc]
    if n < 1:
        raise GraphError(f"{kind} generator needs n >= 1")
    if kind == "ring":
        if n < 3:
            raise GraphError("ring needs n >= 3 (smaller rings would need parallel edges)")
        return n, [(v, (v + 1) % n) for v in range(n)]
    if kind == "path":
        return n, [(v, v + 1) for v in range(n - 1)]
    if kind == "star":
        return n, [(0, v) for v in range(1, n)]
    if kind == "complete":
        return n, list(itertools.combinations(range(n), 2))
    if kind == "tree":
        return n, _prufer_tree(n, rng)
    if kind == "random-connected":
        edges = _prufer_tree(n, rng)
        max_m = n * (n - 1) // 2
        target = spec.m if spec.m is not None else len(edges)
        if not len(edges) <= target <= max_m:
            raise GraphError(f"random-connected: m={target} outside [{len(edges)}, {max_m}]")
        present = {(min(a, b), max(a, b)) for a, b in edges}
        missing = [e for e in itertools.combinations(range(n), 2) if e not in present]
        rng.shuffle(missing)
        edges.extend(missing[: target - len(edges)])
        return n, edges
    raise GraphError(f"unknown generator kind {kind!r}; expected one of {GENERATORS}")


def _capacities(rule: dict[str, Any], n: int, rng: random.Random) -> list[int]:
    kind = rule.get("rule", "uniform")
    if kind == "explicit":
        values = [int(c) for c in rule["values"]]
        if len(values) != n:
            raise GraphError(f"explicit capacities list has {len(values)} entries for {n} nodes")
        return values
    if kind == "uniform":
        return [int(rule.get("value", 1))] * n
    if kind == "concentrated":
        # `total` spread as evenly as possible over `count` seeded nodes
        count = int(rule["count"])
        total = int(rule["total"])
        if not 1 <= count <= n:
            raise GraphError(f"concentrated capacities: count={count} outside [1, {n}]")
        chosen = sorted(rng.sample(range(n), count))
        caps = [0] * n
        for idx, v in enumerate(chosen):
            caps[v] = total // count + (1 if idx < total % count else 0)
        return caps
    raise GraphError(f"unknown capacity rule {kind!r}")


def build_graph(spec: GraphSpec | dict[str, Any]) -> Graph:
    if isinstance(spec, dict):
        spec = GraphSpec.from_dict(spec)
    rng = random.Random(spec.seed)
    n, edges = _structure(spec, rng)
    caps = _capacities(spec.capacities, n, rng)
    if any(c < 0 for c in caps):
        raise GraphError("negative capacity")
    if n == 1 and not edges:
        return Graph(((),), tuple(caps))
    g = from_edges(n, edges, caps)
    if spec.shuffle_ports:
        g = shuffle_ports(g, random.Random(f"ports:{spec.seed}"))
    return g


# --------------------------------------------------------------------------
# Capacity arithmetic
# --------------------------------------------------------------------------


def capacity_condition_holds(g: Graph, k: int, f: int) -> bool:
    """Whether total capacity >= (#nonzero-capacity nodes) * f + k - f."""
    if not 0 <= f < k:
        raise ValueError(f"need 0 <= f < k, got f={f}, k={k}")
    return g.total_capacity >= g.nonzero_capacity_count * f + k - f


def summary(g: Graph) -> dict[str, int]:
    return {
        "n": g.n,
        "m": g.m,
        "total_capacity": g.total_capacity,
        "nonzero_capacity_count": g.nonzero_capacity_count,
        "max_degree": g.max_degree,
    }


# --------------------------------------------------------------------------
# Small-graph enumeration
# --------------------------------------------------------------------------


def _connected_edge_sets(n: int) -> Iterator[list[tuple[int, int]]]:
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        if len(edges) < n - 1:
            continue
        adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        if len(seen) == n:
            yield edges


def canonical_form(ports: PortTable) -> tuple:
    """Label-free form: two port tables are port-isomorphic iff forms match.

    Starting at each node, BFS numbering driven by ascending port order is
    canonical for that root; the minimum over roots is taken.
    """
    best = None
    n = len(ports)
    for root in range(n):
        order = {root: 0}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for u, _ in ports[v]:
                if u not in order:
                    order[u] = len(order)
                    queue.append(u)
        inv = sorted(order, key=order.get)  # type: ignore[arg-type]
        form = tuple(tuple((order[u], j) for u, j in ports[v]) for v in inv)
        if best is None or form < best:
            best = form
    return best  # type: ignore[return-value]


def enumerate_port_labeled(max_n: int, dedupe: bool = True) -> list[PortTable]:
    """All connected simple port-labeled graphs with 1..max_n nodes.

    With ``dedupe`` only one representative per port-isomorphism class is kept.
    """
    out: list[PortTable] = [((),)]
    seen: set[tuple] = set()
    for n in range(2, max_n + 1):
        for edges in _connected_edge_sets(n):
            nbrs: list[list[int]] = [[] for _ in range(n)]
            for a, b in edges:
                nbrs[a].append(b)
                nbrs[b].append(a)
            for choice in itertools.product(*(itertools.permutations(x) for x in nbrs)):
                index = [{u: i for i, u in enumerate(order)} for order in choice]
                ports = tuple(
                    tuple((u, index[u][v]) for u in choice[v]) for v in range(n)
                )
                if dedupe:
                    key = canonical_form(ports)
                    if key in seen:
                        continue
                    seen.add(key)
                out.append(ports)
    return out

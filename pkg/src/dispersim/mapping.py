"""Maps built by an explorer, and the DFS settlement schedule over them."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable

from .graph import Graph

Link = tuple[int, int]


@dataclass
class MapNode:
    degree: int
    capacity: int
    links: list[Link | None]
    name: int | None = None


class MapError(ValueError):
    pass


class KnownMap:
    """Rooted port-labeled map; node indices are discovery order, root is 0."""

    def __init__(self) -> None:
        self.nodes: list[MapNode] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def add(self, degree: int, capacity: int, name: int | None = None) -> int:
        self.nodes.append(MapNode(degree, capacity, [None] * degree, name))
        return len(self.nodes) - 1

    def link(self, a: int, p: int, b: int, q: int) -> None:
        na, nb = self.nodes[a], self.nodes[b]
        if na.links[p] not in (None, (b, q)) or nb.links[q] not in (None, (a, p)):
            raise MapError(f"inconsistent link ({a},{p})-({b},{q})")
        na.links[p] = (b, q)
        nb.links[q] = (a, p)

    def first_unexplored(self) -> tuple[int, int] | None:
        for i, node in enumerate(self.nodes):
            for p, link in enumerate(node.links):
                if link is None:
                    return i, p
        return None

    def unexplored_port(self, i: int) -> int | None:
        for p, link in enumerate(self.nodes[i].links):
            if link is None:
                return p
        return None

    @property
    def complete(self) -> bool:
        return self.first_unexplored() is None

    def path(self, a: int, b: int) -> list[int]:
        """Ports of a shortest known route from ``a`` to ``b`` (BFS, ports ascending)."""
        if a == b:
            return []
        prev: dict[int, tuple[int, int]] = {a: (-1, -1)}
        queue = deque([a])
        while queue:
            v = queue.popleft()
            for p, link in enumerate(self.nodes[v].links):
                if link is None or link[0] in prev:
                    continue
                prev[link[0]] = (v, p)
                if link[0] == b:
                    ports = []
                    x = b
                    while x != a:
                        x, port = prev[x]
                        ports.append(port)
                    return ports[::-1]
                queue.append(link[0])
        raise MapError(f"node {b} unreachable from {a} in the known map")

    def dfs_tree(self) -> dict[int, list[tuple[int, int, int]]]:
        """Spanning tree from the root; children as (port, child, child's port back)."""
        children: dict[int, list[tuple[int, int, int]]] = {0: []}
        stack = [0]
        seen = {0}

        def visit(v: int) -> None:
            for p, link in enumerate(self.nodes[v].links):
                if link is None or link[0] in seen:
                    continue
                seen.add(link[0])
                children[v].append((p, link[0], link[1]))
                children[link[0]] = []
                visit(link[0])

        if self.nodes:
            visit(0)
        del stack
        return children

    def preorder(self) -> list[int]:
        tree = self.dfs_tree()
        order: list[int] = []

        def visit(v: int) -> None:
            order.append(v)
            for _, c, _ in tree[v]:
                visit(c)

        visit(0)
        return order

    def euler_tour(self) -> list[tuple[int, int]]:
        """Closed walk from the root over the DFS tree: (port, node reached)."""
        tree = self.dfs_tree()
        moves: list[tuple[int, int]] = []

        def visit(v: int) -> None:
            for p, c, back in tree[v]:
                moves.append((p, c))
                visit(c)
                moves.append((back, v))

        visit(0)
        return moves

    def tour(self, start: int, targets: Iterable[int]) -> list[tuple[int, int]]:
        """Closed walk from ``start`` passing every target, over a BFS tree."""
        targets = set(targets)
        parent: dict[int, tuple[int, int, int]] = {}
        order = [start]
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for p, link in enumerate(self.nodes[v].links):
                if link is None or link[0] in seen:
                    continue
                seen.add(link[0])
                parent[link[0]] = (v, p, link[1])
                order.append(link[0])
                queue.append(link[0])
        needed = set()
        for t in targets:
            x = t
            while x != start and x not in needed:
                needed.add(x)
                x = parent[x][0]
        kids: dict[int, list[tuple[int, int, int]]] = {}
        for x in order:
            if x in needed:
                v, p, back = parent[x]
                kids.setdefault(v, []).append((p, x, back))
        moves: list[tuple[int, int]] = []

        def visit(v: int) -> None:
            for p, c, back in sorted(kids.get(v, ())):
                moves.append((p, c))
                visit(c)
                moves.append((back, v))

        visit(start)
        return moves

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [
                {"degree": nd.degree, "capacity": nd.capacity, "name": nd.name,
                 "links": [list(l) if l is not None else None for l in nd.links]}
                for nd in self.nodes
            ]
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "KnownMap":
        m = cls()
        for nd in d["nodes"]:
            i = m.add(nd["degree"], nd["capacity"], nd.get("name"))
            m.nodes[i].links = [tuple(l) if l is not None else None for l in nd["links"]]  # type: ignore[misc]
        return m

    def isomorphic_to(self, g: Graph, root: int | None = None) -> bool:
        """Port- and capacity-preserving isomorphism with ``g``.

        The map root is matched to ``root`` (every node of ``g`` is tried if
        omitted).
        """
        if len(self.nodes) != g.n or not self.complete:
            return False
        roots = [root] if root is not None else list(range(g.n))
        return any(self._match_from(g, r) for r in roots)

    def _match_from(self, g: Graph, r: int) -> bool:
        image = {0: r}
        used = {r}
        queue = deque([0])
        while queue:
            i = queue.popleft()
            v = image[i]
            nd = self.nodes[i]
            if nd.degree != g.degree(v) or nd.capacity != g.capacities[v]:
                return False
            for p, link in enumerate(nd.links):
                j, q = link  # type: ignore[misc]
                u, uq = g.follow(v, p)
                if q != uq:
                    return False
                if j in image:
                    if image[j] != u:
                        return False
                else:
                    if u in used:
                        return False
                    image[j] = u
                    used.add(u)
                    queue.append(j)
        return len(image) == g.n


def map_of(g: Graph, root: int = 0) -> KnownMap:
    """Ground-truth map of ``g`` rooted at ``root`` (BFS discovery order)."""
    index = {root: 0}
    order = [root]
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for u, _ in g.ports[v]:
            if u not in index:
                index[u] = len(order)
                order.append(u)
                queue.append(u)
    m = KnownMap()
    for v in order:
        m.add(g.degree(v), g.capacities[v])
    for v in order:
        for p, (u, q) in enumerate(g.ports[v]):
            m.nodes[index[v]].links[p] = (index[u], q)
    return m


# --------------------------------------------------------------------------
# Settlement
# --------------------------------------------------------------------------


class CapacityError(ValueError):
    pass


@dataclass
class SettlementLedger:
    assignment: dict[int, int] = field(default_factory=dict)
    allotted: dict[int, int] = field(default_factory=dict)
    unassigned: list[int] = field(default_factory=list)
    shepherd_node: int | None = None
    order: list[int] = field(default_factory=list)

    def at(self, node: int) -> list[int]:
        return sorted(i for i, v in self.assignment.items() if v == node)


def dfs_settlement_schedule(m: KnownMap, roster: Iterable[int], shepherd_included: bool = True) -> SettlementLedger:
    """Assign the lowest unassigned claimed IDs to nodes in DFS preorder.

    Each distinct claimed ID takes one slot; every robot presenting that ID
    is sent to the same node. The shepherd goes last, to the first node in
    preorder with a free slot.
    """
    ids = sorted(set(roster))
    order = m.preorder()
    need = len(ids) + (1 if shepherd_included else 0)
    total = sum(m.nodes[v].capacity for v in order)
    if total < need:
        raise CapacityError(f"map capacity {total} cannot host {need} robots")
    ledger = SettlementLedger(order=order)
    queue = deque(ids)
    for v in order:
        cap = m.nodes[v].capacity
        used = 0
        while queue and used < cap:
            ledger.assignment[queue.popleft()] = v
            used += 1
        ledger.allotted[v] = used
    ledger.unassigned = list(queue)
    if shepherd_included:
        for v in order:
            if m.nodes[v].capacity - ledger.allotted[v] >= 1:
                ledger.shepherd_node = v
                ledger.allotted[v] += 1
                break
    return ledger

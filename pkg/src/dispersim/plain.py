"""Dispersion without Byzantine robots.

``bundled-dfs`` is a self-contained uncapacitated dispersion algorithm used
as the black box inside ``n1``. Robots co-located at round 0 form a group,
and every group runs a DFS that names nodes after their first settler.

* Pass 1 settles at most one robot (the anchor) per node, so with ``k >= n``
  every node ends up occupied.
* Pass 2 repeats the DFS and fills nodes up to ``ceil(k/n)``.

Ranks are computed over all unsettled robots at a node, so simultaneous
groups never overfill it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from .engine import Action, LocalView
from .routines import ShepherdRoutine, Worker
from .uxs import UxsFamily


def pass_length(n: int) -> int:
    """Rounds reserved for one DFS pass: 2m <= n(n-1) moves, plus slack."""
    return n * (n - 1) + 2


def t_bundled(n: int) -> int:
    return 8 * n * n


class _GroupDfs:
    """DFS over node names with edge memory; replicated in every group member."""

    def __init__(self) -> None:
        self.edges: dict[int, dict[int, tuple[int, int]]] = {}
        self.parent: dict[int, int] = {}
        self.root: int | None = None
        self.pending: tuple[int, int, str] | None = None
        self.done = False

    def next_port(self, name: int, degree: int, entry: int | None) -> int | None:
        if self.done:
            return None
        if self.root is None:
            self.root = name
            self.edges[name] = {}
        if self.pending is not None:
            u, p, kind = self.pending
            self.pending = None
            if kind == "probe":
                known = name in self.edges
                self.edges[u][p] = (name, entry)  # type: ignore[assignment]
                self.edges.setdefault(name, {})[entry] = (u, p)  # type: ignore[index]
                if known:
                    self.pending = (name, entry, "back")  # type: ignore[assignment]
                    return entry
                self.parent[name] = entry  # type: ignore[assignment]
        for port in range(degree):
            if port not in self.edges[name]:
                self.pending = (name, port, "probe")
                return port
        if name == self.root:
            self.done = True
            return None
        self.pending = (name, self.parent[name], "up")
        return self.parent[name]


SETTLED = "s"
ROAMING = "u"


def settled_here(view: LocalView) -> list[tuple[int, bool]]:
    out = []
    for p in view.others():
        if isinstance(p.payload, dict) and p.payload.get("a") == SETTLED:
            out.append((p.claimed_id, bool(p.payload.get("anchor"))))
    return out


class BundledDispersion:
    """One robot of the bundled algorithm; usable on its own or inside ``n1``."""

    def __init__(self, rid: int, n: int, k: int):
        self.id = rid
        self.n = n
        self.k = k
        self.slots = max(1, math.ceil(k / n))
        self.P = pass_length(n)
        self.T = t_bundled(n)
        self.settled = False
        self.anchor = False
        self.dfs: _GroupDfs | None = None
        self.pass_no = 0

    def _payload(self) -> dict[str, Any]:
        if self.settled:
            return {"a": SETTLED, "anchor": self.anchor}
        return {"a": ROAMING}

    def step(self, view: LocalView) -> Action:
        t = view.round
        if t >= self.T:
            return Action.terminate(settle=self.settled)
        if self.settled:
            return Action.stay(self._payload())
        pass_no = 1 if t < self.P else 2
        if pass_no == 2 and t >= 2 * self.P:
            return Action.stay(self._payload())
        if pass_no != self.pass_no:
            self.pass_no = pass_no
            self.dfs = _GroupDfs()
        residents = settled_here(view)
        cap = 1 if pass_no == 1 else self.slots
        roaming = sorted(p.claimed_id for p in view.presences
                         if not (isinstance(p.payload, dict) and p.payload.get("a") == SETTLED))
        free = cap - len(residents)
        newcomers = roaming[:max(0, free)]
        anchors = [i for i, a in residents if a]
        if anchors:
            name = min(anchors)
        elif residents:
            name = min(i for i, _ in residents)
        elif newcomers:
            name = newcomers[0]
        else:  # pragma: no cover - a group always has a member here
            name = -1
        if self.id in newcomers:
            self.settled = True
            self.anchor = pass_no == 1
            return Action.stay(self._payload())
        assert self.dfs is not None
        port = self.dfs.next_port(name, view.degree, view.entry_port)
        if port is None:
            return Action.stay(self._payload())
        return Action.move(port, self._payload())

    def report(self) -> dict[str, Any]:
        return {}


def bundled_dispersion_A(n: int, k: int):
    """Program factory for the bundled algorithm; it ends at round ``8 n^2``."""
    return lambda rid: BundledDispersion(rid, n, k)


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WrapperConfig:
    n: int
    k: int
    algorithm: str = "bundled-dfs"

    @property
    def T(self) -> int:
        return t_bundled(self.n)


class N1Worker(Worker):
    def __init__(self, rid: int, cfg: WrapperConfig):
        super().__init__(rid, "hold")
        self.inner = BundledDispersion(rid, cfg.n, cfg.k)
        self.T = cfg.T

    def step(self, view: LocalView) -> Action:
        if view.round < self.T:
            return self.inner.step(view)
        return self.obey(view)


class N1Shepherd(ShepherdRoutine):
    def __init__(self, rid: int, cfg: WrapperConfig):
        super().__init__(rid)
        self.cfg = cfg
        self.inner = BundledDispersion(rid, cfg.n, cfg.k)

    def run(self, view: LocalView):
        while view.round < self.cfg.T:
            view = yield self.inner.step(view)
        # every node now hosts a robot, save possibly the one the shepherd leaves
        occupied = self.node_name(view) != self.id
        self.notes["phase1_node_occupied"] = occupied
        view = yield from self.map_by_ids(view)
        view = yield from self.collect_all(view)
        roster = self.roster_here(view)
        self.notes["roster"] = roster
        yield from self.settle_all(view, roster)


def n1_programs(cfg: WrapperConfig):
    return (lambda rid: N1Shepherd(rid, cfg)), (lambda rid: N1Worker(rid, cfg))


class PebbleShepherd(ShepherdRoutine):
    """Shared body of ``n2`` and ``n3``: find a pebble, map, collect, settle."""

    def __init__(self, rid: int, family: UxsFamily | None = None, n: int | None = None):
        super().__init__(rid)
        self.family = family
        self.n = n

    def run(self, view: LocalView):
        if self.family is not None and self.n is not None:
            view = yield from self.walk_uxs(view, self.family.steps(self.n),
                                            until=lambda v: bool(v.others()))
            self.notes["search_rounds"] = view.round
        pebble = self.roster_here(view)
        self.notes["pebble"] = pebble
        view = yield from self.explore(view, 1, pebble)
        view = yield from self.collect_all(view)
        roster = self.roster_here(view)
        self.notes["roster"] = roster
        self.notes["learned_k"] = len(self.seen) + 1
        yield from self.settle_all(view, roster)


def n2_programs(n: int, family: UxsFamily):
    return (lambda rid: PebbleShepherd(rid, family, n)), (lambda rid: Worker(rid, "hold"))


def n3_programs():
    return (lambda rid: PebbleShepherd(rid)), (lambda rid: Worker(rid, "hold"))

"""Robot programs shared by the shepherd protocols.

The shepherd steers its followers with shouted commands::

    {"cmd": 1, "move": port | None, "collect": bool, "settle": [ids], "halt": bool}

A payload is heard one round after it is emitted, so the shepherd always
announces a port one round before it takes it. Every escorted walk starts
with a lead-in Stay and ends with a payload whose ``move`` is None, which
keeps followers from wandering off on their own.
"""

from __future__ import annotations

from typing import Any, Iterable, Sequence

from .engine import Action, LocalView, Routine
from .errors import EngineError
from .mapping import KnownMap, SettlementLedger, dfs_settlement_schedule
from .uxs import next_port


def cmd(move: int | None = None, *, collect: bool = False, settle: Iterable[int] = (),
        halt: bool = False) -> dict[str, Any]:
    out: dict[str, Any] = {"cmd": 1, "move": move}
    if collect:
        out["collect"] = True
    settle = sorted(settle)
    if settle:
        out["settle"] = settle
    if halt:
        out["halt"] = True
    return out


def shepherd_command(view: LocalView) -> dict[str, Any] | None:
    sh = view.shepherd()
    if sh is None or not isinstance(sh.payload, dict) or sh.payload.get("cmd") != 1:
        return None
    return sh.payload


class Worker:
    """Obedient non-shepherd robot.

    ``hold`` workers wait until the shepherd shouts ``collect``; ``follow``
    workers execute whatever the shepherd announces. Only the presence
    carrying the unforgeable shepherd flag is obeyed.
    """

    def __init__(self, rid: int, mode: str = "hold"):
        self.id = rid
        self.mode = mode

    def obey(self, view: LocalView) -> Action:
        c = shepherd_command(view)
        if c is None:
            return Action.stay()
        if self.mode == "hold":
            if not c.get("collect"):
                return Action.stay()
            self.mode = "follow"
        if self.id in c.get("settle", ()):
            return Action.terminate(settle=True)
        if c.get("halt"):
            return Action.terminate(settle=False)
        if c.get("move") is not None:
            return Action.move(c["move"])
        return Action.stay()

    step = obey

    def report(self) -> dict[str, Any]:
        return {}


class PebbleHolder:
    """Settles at once and stays put until a fixed round (used to test mapping by IDs)."""

    def __init__(self, until: int):
        self.until = until

    def step(self, view: LocalView) -> Action:
        if view.round >= self.until:
            return Action.terminate(settle=True)
        if view.round == 0:
            return Action.settle_here()
        return Action.stay()


class ShepherdRoutine(Routine):
    """Generator helpers for the shepherd; subclasses write ``run``."""

    def __init__(self, rid: int):
        super().__init__()
        self.id = rid
        self.map: KnownMap | None = None
        self.here = 0
        self.seen: set[int] = set()
        self.anomalies: list[str] = []
        self.notes: dict[str, Any] = {}

    def step(self, view: LocalView) -> Action:
        for p in view.others():
            if not p.is_shepherd:
                self.seen.add(p.claimed_id)
        return super().step(view)

    def report(self) -> dict[str, Any]:
        out: dict[str, Any] = dict(self.notes)
        if self.map is not None:
            out["map"] = self.map.to_dict()
        if self.anomalies:
            out["anomalies"] = list(self.anomalies)
        return out

    # -- movement ---------------------------------------------------------

    def escort(self, view: LocalView, ports: Sequence[int], *, collect: bool = False,
               settle: Sequence[Iterable[int]] | None = None):
        """Walk ``ports`` with the followers; ``settle[i]`` is read at the i-th node (start = 0)."""

        def c(i: int) -> dict[str, Any]:
            mv = ports[i] if i < len(ports) else None
            return cmd(mv, collect=collect, settle=settle[i] if settle else ())

        view = yield Action.stay(c(0))
        for i, p in enumerate(ports):
            view = yield Action.move(p, c(i + 1))
        return view

    def solo(self, view: LocalView, ports: Sequence[int]):
        for p in ports:
            view = yield Action.move(p)
        return view

    def wait_until(self, view: LocalView, r: int):
        while view.round < r:
            view = yield Action.stay()
        return view

    # -- explorer-pebble --------------------------------------------------

    @staticmethod
    def pebble_count(view: LocalView, whitelist: frozenset[int] | None) -> int:
        return sum(
            1 for p in view.others()
            if not p.is_shepherd and not p.settled and (whitelist is None or p.claimed_id in whitelist)
        )

    def explore(self, view: LocalView, threshold: int, whitelist: Iterable[int] | None = None):
        """Build the map with the co-located followers as a pebble.

        A frontier edge ``(u, p)`` is crossed with the pebble to some node
        ``w`` entered through ``q``. Only known nodes with the same degree
        and capacity and an unexplored port ``q`` can be ``w``; if any exist,
        the pebble is left at ``w`` and the explorer tours them looking for
        it.
        """
        wl = frozenset(whitelist) if whitelist is not None else None
        threshold = max(1, threshold)
        m = KnownMap()
        self.map = m
        here = m.add(view.degree, view.capacity)
        view = yield Action.stay(cmd(None, collect=True))
        while True:
            nxt = m.first_unexplored()
            if nxt is None:
                break
            u, p = nxt
            view = yield from self.escort(view, m.path(here, u) + [p])
            q, deg, cap = view.entry_port, view.degree, view.capacity
            cands = [
                x for x in range(len(m))
                if x != u and m.nodes[x].degree == deg and m.nodes[x].capacity == cap
                and m.nodes[x].links[q] is None
            ]
            found = None
            if cands:
                view = yield from self.solo(view, [q])
                targets = set(cands)
                for port, node in m.tour(u, cands):
                    view = yield Action.move(port)
                    if node in targets and self.pebble_count(view, wl) >= threshold:
                        found = node
                        break
                if found is None:
                    view = yield from self.solo(view, [p])
                    if self.pebble_count(view, wl) < threshold:
                        self.anomalies.append(f"pebble lost at round {view.round}")
            if found is None:
                found = m.add(deg, cap)
            m.link(u, p, found, q)  # type: ignore[arg-type]
            here = found
        self.here = here
        self.notes["map_rounds"] = view.round
        return view

    # -- mapping by resident IDs ------------------------------------------

    def node_name(self, view: LocalView) -> int:
        ids = [p.claimed_id for p in view.others() if not p.is_shepherd]
        return min(ids) if ids else self.id

    def map_by_ids(self, view: LocalView):
        """DFS that names every node after its lowest resident ID."""
        m = KnownMap()
        self.map = m
        index = {self.node_name(view): 0}
        m.add(view.degree, view.capacity, self.node_name(view))
        parent: dict[int, int] = {}
        here = 0
        while True:
            p = m.unexplored_port(here)
            if p is None:
                if here == 0:
                    break
                back = parent[here]
                view = yield Action.move(back)
                here = m.nodes[here].links[back][0]  # type: ignore[index]
                continue
            view = yield Action.move(p)
            name, q = self.node_name(view), view.entry_port
            if name in index:
                w = index[name]
                if (m.nodes[w].degree, m.nodes[w].capacity) != (view.degree, view.capacity):
                    raise EngineError(f"two nodes present the same lowest ID {name}")
                m.link(here, p, w, q)  # type: ignore[arg-type]
                view = yield Action.move(q)  # type: ignore[arg-type]
            else:
                w = m.add(view.degree, view.capacity, name)
                index[name] = w
                m.link(here, p, w, q)  # type: ignore[arg-type]
                parent[w] = q  # type: ignore[assignment]
                here = w
        self.here = here
        self.notes["map_rounds"] = view.round
        return view

    # -- collection and settlement ----------------------------------------

    def collect_all(self, view: LocalView):
        """Return to the root and sweep the whole map, picking up every worker."""
        m = self.map
        assert m is not None
        ports = m.path(self.here, 0) + [p for p, _ in m.euler_tour()]
        view = yield from self.escort(view, ports, collect=True)
        self.here = 0
        return view

    def roster_here(self, view: LocalView) -> list[int]:
        return sorted({p.claimed_id for p in view.others() if not p.is_shepherd and not p.settled})

    def settle_all(self, view: LocalView, roster: Iterable[int]):
        """Drop followers along the DFS order, then settle the shepherd itself."""
        m = self.map
        assert m is not None
        ledger = dfs_settlement_schedule(m, roster, shepherd_included=True)
        self.notes["ledger"] = {str(i): v for i, v in sorted(ledger.assignment.items())}
        self.notes["shepherd_node"] = ledger.shepherd_node
        nodes, ports = self._settlement_route(m, ledger)
        done: set[int] = set()
        lists = []
        for v in nodes:
            lists.append(ledger.at(v) if v not in done else [])
            done.add(v)
        view = yield from self.escort(view, ports, settle=lists)
        self.here = nodes[-1]
        yield Action.terminate(settle=True)
        raise EngineError("shepherd resumed after terminating")  # pragma: no cover

    def _settlement_route(self, m: KnownMap, ledger: SettlementLedger) -> tuple[list[int], list[int]]:
        ports = m.path(self.here, 0)
        nodes = [self.here]
        x = self.here
        for p in ports:
            x = m.nodes[x].links[p][0]  # type: ignore[index]
            nodes.append(x)
        needed = {v for v in ledger.assignment.values()}
        if ledger.shepherd_node is not None:
            needed.add(ledger.shepherd_node)
        tour = m.euler_tour()
        reached = {0}
        cut = 0
        for i, (_, v) in enumerate(tour):
            if needed <= reached:
                break
            reached.add(v)
            cut = i + 1
        for p, v in tour[:cut]:
            ports.append(p)
            nodes.append(v)
        target = ledger.shepherd_node if ledger.shepherd_node is not None else nodes[-1]
        x = nodes[-1]
        for p in m.path(x, target):
            x = m.nodes[x].links[p][0]  # type: ignore[index]
            ports.append(p)
            nodes.append(x)
        return nodes, ports

    def walk_uxs(self, view: LocalView, steps: Sequence[int], *, until=None):
        """Follow a UXS solo from a fresh start; stop early once ``until(view)`` holds."""
        entry = None
        for x in steps:
            if until is not None and until(view):
                return view
            if view.degree == 0:
                break
            view = yield Action.move(next_port(entry, x, view.degree))
            entry = view.entry_port
        return view


class Explorer(ShepherdRoutine):
    """Stand-alone explorer: map the graph, release the pebble, stop."""

    def __init__(self, rid: int, threshold: int, whitelist: Iterable[int] | None = None):
        super().__init__(rid)
        self.threshold = threshold
        self.whitelist = None if whitelist is None else frozenset(whitelist)

    def run(self, view: LocalView):
        view = yield from self.explore(view, self.threshold, self.whitelist)
        view = yield Action.stay(cmd(None, halt=True))
        yield Action.terminate()


class IdMapper(ShepherdRoutine):
    """Stand-alone mapper over nodes that already host settled robots."""

    def run(self, view: LocalView):
        view = yield from self.map_by_ids(view)
        yield Action.terminate()


def explorer_pebble(threshold: int, whitelist: Iterable[int] | None = None):
    """Explorer and pebble roles: ``(explorer(id), pebble(id))`` factories."""

    def explorer(rid: int) -> Explorer:
        return Explorer(rid, threshold, whitelist)

    def pebble(rid: int) -> Worker:
        return Worker(rid, "hold")

    return explorer, pebble

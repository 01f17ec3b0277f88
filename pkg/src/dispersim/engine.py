"""Synchronous round engine.

Each round has two steps. First every active robot receives a
:class:`LocalView` of its node, which carries what each co-located robot
shouted (the payload of that robot's previous action), and returns an
:class:`Action`. Then all moves are applied at once.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Protocol

from .errors import EngineError
from .graph import Graph

ENGINE_VERSION = "dispersim-engine/1"

STAY, MOVE, SETTLE, TERMINATE = "stay", "move", "settle", "terminate"


@dataclass(frozen=True, slots=True)
class Presence:
    handle: int
    claimed_id: int
    is_shepherd: bool
    payload: Any
    settled: bool


@dataclass(frozen=True, slots=True)
class LocalView:
    round: int
    capacity: int
    degree: int
    entry_port: int | None
    presences: tuple[Presence, ...]
    me: int

    def others(self) -> list[Presence]:
        return [p for p in self.presences if p.handle != self.me]

    def shepherd(self) -> Presence | None:
        for p in self.presences:
            if p.is_shepherd and p.handle != self.me:
                return p
        return None

    @property
    def settled_ids(self) -> list[int]:
        return [p.claimed_id for p in self.presences if p.settled]


@dataclass(frozen=True, slots=True)
class Action:
    kind: str = STAY
    port: int | None = None
    payload: Any = None
    settle: bool = False
    # Only Byzantine controllers may set the two fields below.
    claimed_ids: tuple[int, ...] | None = None
    claim_settled: bool | None = None

    @staticmethod
    def stay(payload: Any = None) -> "Action":
        return Action(STAY, None, payload)

    @staticmethod
    def move(port: int, payload: Any = None) -> "Action":
        return Action(MOVE, port, payload)

    @staticmethod
    def settle_here(payload: Any = None) -> "Action":
        return Action(SETTLE, None, payload)

    @staticmethod
    def terminate(settle: bool = False) -> "Action":
        return Action(TERMINATE, None, None, settle)


class Program(Protocol):
    def step(self, view: LocalView) -> Action: ...


class Routine:
    """Program written as a generator: ``view = yield action``.

    Subclasses implement ``run(view)``; helpers compose with ``yield from``.
    """

    def __init__(self) -> None:
        self._gen = None

    def step(self, view: LocalView) -> Action:
        if self._gen is None:
            self._gen = self.run(view)
            return next(self._gen)
        try:
            return self._gen.send(view)
        except StopIteration:
            raise EngineError(f"{type(self).__name__} stopped without terminating")

    def run(self, view: LocalView):  # pragma: no cover - abstract
        raise NotImplementedError
        yield

    def report(self) -> dict[str, Any]:
        return {}


@dataclass(frozen=True)
class RobotSpec:
    id: int
    node: int
    is_shepherd: bool = False
    byzantine: bool = False
    claimed: int | None = None  # initial claimed ID of a Byzantine robot


@dataclass
class _Robot:
    handle: int
    id: int
    is_shepherd: bool
    byzantine: bool
    node: int
    entry: int | None = None
    settled: bool = False
    terminated: bool = False
    termination_round: int | None = None
    payload: Any = None
    claimed: int = 0
    claim_settled: bool | None = None


class World:
    """Read-only ground truth handed to adversary controllers."""

    def __init__(self, engine: "Engine"):
        self._e = engine

    @property
    def graph(self) -> Graph:
        return self._e.graph

    @property
    def round(self) -> int:
        return self._e.round

    @property
    def meta(self) -> dict[str, Any]:
        return self._e.meta

    @property
    def extras(self) -> dict[str, Any]:
        return self._e.extras

    def handles(self) -> range:
        return range(len(self._e.robots))

    def position(self, h: int) -> int:
        return self._e.robots[h].node

    def entry_port(self, h: int) -> int | None:
        return self._e.robots[h].entry

    def robot_id(self, h: int) -> int:
        return self._e.robots[h].id

    def is_byzantine(self, h: int) -> bool:
        return self._e.robots[h].byzantine

    def is_shepherd(self, h: int) -> bool:
        return self._e.robots[h].is_shepherd

    def is_settled(self, h: int) -> bool:
        return self._e.robots[h].settled

    def is_terminated(self, h: int) -> bool:
        return self._e.robots[h].terminated

    def honest_handles(self) -> list[int]:
        return [r.handle for r in self._e.robots if not r.byzantine]

    def view(self, h: int) -> LocalView:
        """The view robot ``h`` receives in the current round."""
        return self._e.view_of(h)

    def program(self, h: int):
        """Honest robot's program object (omniscient adversaries only)."""
        return self._e.programs.get(h)


class Controller(Protocol):
    def act(self, handle: int, view: LocalView, world: World) -> Action: ...


# --------------------------------------------------------------------------
# Trace
# --------------------------------------------------------------------------


def canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class _Digested:
    """Stand-in payload for events read back from disk (only the digest survives)."""

    __slots__ = ("d",)

    def __init__(self, d: str | None):
        self.d = d


def digest(payload: Any) -> str | None:
    if payload is None:
        return None
    if isinstance(payload, _Digested):
        return payload.d
    return hashlib.sha256(canonical(payload).encode()).hexdigest()[:16]


@dataclass
class Trace:
    header: dict[str, Any]
    events: list[tuple] = field(default_factory=list)
    footer: dict[str, Any] = field(default_factory=dict)

    def event_dicts(self) -> Iterable[dict[str, Any]]:
        for t, h, v, kind, port, settle, claimed, payload in self.events:
            yield {"type": "event", "t": t, "r": h, "v": v, "a": kind, "p": port,
                   "s": settle, "id": claimed, "d": digest(payload)}

    def lines(self) -> list[str]:
        out = [canonical({"type": "header", **self.header})]
        out.extend(canonical(e) for e in self.event_dicts())
        out.append(canonical({"type": "footer", **self.footer}))
        return out

    def to_jsonl(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    # convenience accessors used by the checker
    @property
    def final(self) -> list[dict[str, Any]]:
        return self.footer["robots"]

    @property
    def meta(self) -> dict[str, Any]:
        return self.header.get("meta", {})

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Trace":
        header: dict[str, Any] | None = None
        footer: dict[str, Any] = {}
        events: list[tuple] = []
        for line in lines:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = obj.pop("type", None)
            if kind == "header":
                header = obj
            elif kind == "event":
                events.append((obj["t"], obj["r"], obj["v"], obj["a"], obj["p"], obj["s"], obj["id"],
                               _Digested(obj["d"])))
            elif kind == "footer":
                footer = obj
            else:
                raise ValueError(f"unknown trace record type {kind!r}")
        if header is None:
            raise ValueError("trace has no header")
        return cls(header, events, footer)


# --------------------------------------------------------------------------
# Engine
# --------------------------------------------------------------------------


class Engine:
    def __init__(self, graph: Graph, robots: list[RobotSpec], programs: dict[int, Program],
                 controller: Controller | None = None, *, round_cap: int,
                 header: dict[str, Any] | None = None, meta: dict[str, Any] | None = None,
                 assert_capacity: bool = False):
        self.graph = graph
        self.robots = [
            _Robot(h, r.id, r.is_shepherd, r.byzantine, r.node,
                   claimed=r.claimed if r.byzantine and r.claimed is not None else r.id)
            for h, r in enumerate(robots)
        ]
        for r in self.robots:
            if not 0 <= r.node < graph.n:
                raise EngineError(f"robot {r.id} placed on unknown node {r.node}")
            if r.is_shepherd and r.byzantine:
                raise EngineError("the shepherd cannot be Byzantine")
            if not r.byzantine and r.handle not in programs:
                raise EngineError(f"honest robot {r.id} has no program")
        if any(r.byzantine for r in self.robots) and controller is None:
            raise EngineError("Byzantine robots need a controller")
        self.programs = programs
        self.controller = controller
        self.round_cap = round_cap
        self.round = 0
        self.meta = meta or {}
        self.extras: dict[str, Any] = {}
        self.assert_capacity = assert_capacity
        self.trace = Trace(header=dict(header or {}))
        self.trace.header.setdefault("meta", self.meta)
        self.world = World(self)
        self._round_presences: dict[int, tuple[Presence, ...]] = {}

    def _presences(self) -> dict[int, tuple[Presence, ...]]:
        at: dict[int, list[Presence]] = {}
        for r in self.robots:
            if r.terminated:
                p = Presence(r.handle, r.claimed, r.is_shepherd, None, r.settled)
            else:
                settled = r.settled if r.claim_settled is None else r.claim_settled
                p = Presence(r.handle, r.claimed, r.is_shepherd, r.payload, settled)
            at.setdefault(r.node, []).append(p)
        return {v: tuple(ps) for v, ps in at.items()}

    def view_of(self, h: int) -> LocalView:
        r = self.robots[h]
        return LocalView(self.round, self.graph.capacities[r.node], self.graph.degree(r.node), r.entry,
                         self._round_presences[r.node], h)

    def _check(self, r: _Robot, a: Action) -> None:
        if not isinstance(a, Action):
            raise EngineError(f"robot {r.id} returned {a!r} instead of an Action")
        if not r.byzantine and (a.claimed_ids is not None or a.claim_settled is not None):
            raise EngineError(f"honest robot {r.id} attempted to change its claimed identity")
        if a.kind == MOVE:
            if a.port is None or not 0 <= a.port < self.graph.degree(r.node):
                raise EngineError(f"robot {r.id} used invalid port {a.port} at a node of degree "
                                  f"{self.graph.degree(r.node)}")
            if r.settled:
                raise EngineError(f"settled robot {r.id} tried to move")
        elif a.kind not in (STAY, SETTLE, TERMINATE):
            raise EngineError(f"unknown action kind {a.kind!r}")

    def run(self) -> Trace:
        honest_left = sum(1 for r in self.robots if not r.byzantine)
        events = self.trace.events
        status = "complete"
        while honest_left:
            t = self.round
            if t >= self.round_cap:
                status = "round_cap"
                break
            presences = self._presences()
            self._round_presences = presences
            decided: list[tuple[_Robot, Action]] = []
            # Byzantine robots decide first so an omniscient controller sees
            # honest programs as they were at the start of the round.
            for r in sorted(self.robots, key=lambda r: not r.byzantine):
                if r.terminated:
                    continue
                view = self.view_of(r.handle)
                if r.byzantine:
                    a = self.controller.act(r.handle, view, self.world)  # type: ignore[union-attr]
                else:
                    a = self.programs[r.handle].step(view)
                self._check(r, a)
                decided.append((r, a))
            decided.sort(key=lambda ra: ra[0].handle)
            for r, a in decided:
                events.append((t, r.handle, r.node, a.kind, a.port, a.settle, r.claimed, a.payload))
                if a.kind == MOVE:
                    r.node, r.entry = self.graph.follow(r.node, a.port)  # type: ignore[arg-type]
                elif a.kind == SETTLE:
                    r.settled = True
                elif a.kind == TERMINATE:
                    r.terminated = True
                    r.termination_round = t
                    r.settled = r.settled or a.settle
                    if not r.byzantine:
                        honest_left -= 1
                r.payload = a.payload
                if r.byzantine:
                    if a.claimed_ids:
                        r.claimed = max(a.claimed_ids)
                    r.claim_settled = a.claim_settled
            if self.assert_capacity:
                self._assert_capacity()
            self.round += 1
        self.trace.footer = {
            "status": status,
            "rounds": self.round,
            "robots": [
                {"handle": r.handle, "id": r.id, "node": r.node, "settled": r.settled,
                 "terminated": r.terminated, "termination_round": r.termination_round}
                for r in self.robots
            ],
            "reports": {str(h): p.report() for h, p in sorted(self.programs.items())
                        if hasattr(p, "report") and p.report()},
        }
        return self.trace

    def _assert_capacity(self) -> None:
        load: dict[int, int] = {}
        for r in self.robots:
            if r.settled and not r.byzantine:
                load[r.node] = load.get(r.node, 0) + 1
        for v, c in load.items():
            if c > self.graph.capacities[v]:
                raise EngineError(f"round {self.round}: {c} honest robots settled on node {v} "
                                  f"of capacity {self.graph.capacities[v]}")


def run(graph: Graph, robots: list[RobotSpec], programs: dict[int, Program],
        controller: Controller | None = None, *, round_cap: int, **kw: Any) -> Trace:
    return Engine(graph, robots, programs, controller, round_cap=round_cap, **kw).run()

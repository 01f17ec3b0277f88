"""Strong-Byzantine controllers.

A controller decides every action of the Byzantine robots. It may lie about
IDs and shout anything, but the engine still enforces one presence per
robot, moves along existing ports only, and an unforgeable shepherd flag.
Omniscient controllers read the ground truth through :class:`World`.
"""

from __future__ import annotations

import copy
import random
from collections import deque
from typing import Any, Callable

from .engine import Action, LocalView, Program, World
from .errors import ValidationError
from .routines import cmd

ProgramFactory = Callable[[int], Program]

CATALOG = (
    "honest-shadow",
    "silent",
    "id-liar",
    "fake-pebble",
    "follower-detacher",
    "capacity-squatter",
    "rank-multiclaimer",
)
NEEDS_OMNISCIENCE = {"fake-pebble", "capacity-squatter"}


def bfs_port(world: World, src: int, dst: int) -> int | None:
    """First port of a shortest path in the ground-truth graph."""
    if src == dst:
        return None
    g = world.graph
    first: dict[int, int] = {}
    queue = deque()
    for p, (u, _) in enumerate(g.ports[src]):
        if u not in first:
            first[u] = p
            queue.append(u)
    seen = {src, *first}
    while queue:
        v = queue.popleft()
        if v == dst:
            return first[v]
        for u, _ in g.ports[v]:
            if u not in seen:
                seen.add(u)
                first[u] = first[v]
                queue.append(u)
    return None


class Controller:
    name = "base"

    def __init__(self, params: dict[str, Any], seed: int):
        self.params = dict(params)
        self.seed = seed
        self.rng = random.Random(f"adv:{self.name}:{seed}")
        self.handles: list[int] = []
        self.ids: dict[int, int] = {}
        self.honest_ids: list[int] = []
        self.make_program: ProgramFactory | None = None

    def bind(self, byz: dict[int, int], honest_ids: list[int], make_program: ProgramFactory) -> None:
        """Called once before round 0 with ``{handle: true id}`` of the controlled robots."""
        self.handles = sorted(byz)
        self.ids = dict(byz)
        self.honest_ids = sorted(honest_ids)
        self.make_program = make_program
        self.setup()

    def setup(self) -> None:
        pass

    def initial_claim(self, handle: int) -> int | None:
        return None

    def act(self, handle: int, view: LocalView, world: World) -> Action:  # pragma: no cover
        raise NotImplementedError


class _ShadowBase(Controller):
    """Runs the honest program under some ID."""

    def program_id(self, handle: int) -> int:
        return self.ids[handle]

    def setup(self) -> None:
        assert self.make_program is not None
        self.programs = {h: self.make_program(self.program_id(h)) for h in self.handles}

    def honest_action(self, handle: int, view: LocalView) -> Action:
        return self.programs[handle].step(view)


class HonestShadow(_ShadowBase):
    name = "honest-shadow"

    def act(self, handle, view, world):
        return self.honest_action(handle, view)


class Silent(Controller):
    name = "silent"

    def act(self, handle, view, world):
        return Action.stay()


class IdLiar(_ShadowBase):
    """Duplicates an honest ID (the lowest by default) while acting honestly.

    ``mode="rotate"`` cycles through the honest IDs, one per round.
    """

    name = "id-liar"

    def target(self) -> int:
        if "target" in self.params:
            return int(self.params["target"])
        return self.honest_ids[0] if self.honest_ids else 1

    def program_id(self, handle):
        return self.target()

    def initial_claim(self, handle):
        return self.target()

    def act(self, handle, view, world):
        a = self.honest_action(handle, view)
        claim = self.target()
        if self.params.get("mode") == "rotate" and self.honest_ids:
            claim = self.honest_ids[(view.round + 1) % len(self.honest_ids)]
        return Action(a.kind, a.port, a.payload, a.settle, claimed_ids=(claim,))


class FakePebble(Controller):
    """Gathers on a target node and poses as the pebble with honest IDs."""

    name = "fake-pebble"

    def setup(self):
        self.node = self.params.get("node")
        self.claims = {
            h: self.honest_ids[i % len(self.honest_ids)] if self.honest_ids else self.ids[h]
            for i, h in enumerate(self.handles)
        }

    def initial_claim(self, handle):
        return self.claims[handle]

    def act(self, handle, view, world):
        if self.node is None:
            self.node = self.rng.randrange(world.graph.n)
        port = bfs_port(world, world.position(handle), self.node)
        claim = (self.claims[handle],)
        if port is None:
            return Action(payload=None, claimed_ids=claim, claim_settled=False)
        return Action("move", port, None, claimed_ids=claim, claim_settled=False)


class FollowerDetacher(_ShadowBase):
    """Follows like an honest worker, shouts bogus commands, then wanders off."""

    name = "follower-detacher"

    def setup(self):
        super().setup()
        self.detach_at = {h: int(self.params.get("detach_round", self.rng.randrange(4, 40)))
                          for h in self.handles}

    def act(self, handle, view, world):
        bogus_port = self.rng.randrange(max(1, view.degree))
        fake = cmd(bogus_port if view.degree else None, collect=True,
                   settle=self.rng.sample(self.honest_ids, min(2, len(self.honest_ids))))
        if view.round < self.detach_at[handle]:
            a = self.honest_action(handle, view)
            if a.kind in ("settle", "terminate"):
                a = Action.stay()
            return Action(a.kind, a.port, fake)
        if view.degree == 0:
            return Action.stay(fake)
        return Action.move(self.rng.randrange(view.degree), fake)


class CapacitySquatter(Controller):
    """Occupies settlement slots.

    * ``shadow`` (default): stick to the lowest-ID unsettled honest robot,
      taking the same port it takes, while claiming to be settled.
    * ``squat``: sit on a nonzero-capacity node claiming to be settled.
    * ``rank``: shadow as above, but claim a very low ID and stay unsettled
      so as to win rank contests.
    """

    name = "capacity-squatter"

    def setup(self):
        self.mode = self.params.get("mode", "shadow")
        if self.mode not in ("shadow", "squat", "rank"):
            raise ValidationError(f"unknown capacity-squatter mode {self.mode!r}")
        low = int(self.params.get("low_id", 0))
        self.claims = {h: low - i for i, h in enumerate(self.handles)}

    def initial_claim(self, handle):
        return self.claims[handle] if self.mode == "rank" else None

    def _wrap(self, handle: int, port: int | None) -> Action:
        if self.mode == "rank":
            extra: dict[str, Any] = {"claimed_ids": (self.claims[handle],), "claim_settled": False}
        else:
            extra = {"claim_settled": True}
        if port is None:
            return Action(**extra)
        return Action("move", port, **extra)

    def _target(self, world: World) -> int | None:
        live = [h for h in world.honest_handles()
                if not world.is_settled(h) and not world.is_terminated(h)]
        if not live:
            return None
        return min(live, key=world.robot_id)

    def _predict(self, world: World, h: int) -> int | None:
        try:
            clone = copy.deepcopy(world.program(h))
            a = clone.step(world.view(h))
        except Exception:  # generator-based programs cannot be cloned
            return None
        return a.port if a.kind == "move" else None

    def act(self, handle, view, world):
        here = world.position(handle)
        if self.mode == "squat":
            nodes = [v for v in range(world.graph.n) if world.graph.capacities[v] > 0]
            idx = self.handles.index(handle)
            dst = nodes[idx % len(nodes)] if nodes else here
            return self._wrap(handle, bfs_port(world, here, dst))
        h = self._target(world)
        if h is None:
            return self._wrap(handle, None)
        if world.position(h) == here:
            return self._wrap(handle, self._predict(world, h))
        return self._wrap(handle, bfs_port(world, here, world.position(h)))


class RankMulticlaimer(_ShadowBase):
    """Presents several IDs at once; only the highest one counts."""

    name = "rank-multiclaimer"

    def setup(self):
        super().setup()
        ids = self.params.get("ids")
        self.claim = tuple(sorted(ids)) if ids else tuple(self.honest_ids[:3]) or (1,)

    def initial_claim(self, handle):
        return max(self.claim)

    def act(self, handle, view, world):
        a = self.honest_action(handle, view)
        return Action(a.kind, a.port, a.payload, a.settle, claimed_ids=self.claim)


_CLASSES = {c.name: c for c in (HonestShadow, Silent, IdLiar, FakePebble, FollowerDetacher,
                                CapacitySquatter, RankMulticlaimer)}


def make_controller(name: str, params: dict[str, Any] | None = None, seed: int = 0) -> Controller:
    if name not in _CLASSES:
        raise ValidationError(f"unknown adversary strategy {name!r}; choose from {', '.join(CATALOG)}")
    return _CLASSES[name](params or {}, seed)

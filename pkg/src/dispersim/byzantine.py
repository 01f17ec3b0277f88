"""Byzantine dispersion protocols.

* ``b1``: the shepherd knows n and k; it gathers everyone with a UXS, maps
  the graph using the honest majority as a pebble, then settles everyone.
* ``b2``: the shepherd knows k and f; robots search for the shepherd with
  UXSes of doubling parameter.
* ``b3``: no shepherd; every robot walks UXS(n) and settles by rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .engine import Action, LocalView
from .routines import ShepherdRoutine, Worker, cmd
from .uxs import UxsFamily, next_port


def b1_threshold(k: int) -> int:
    return (k - 1 + 1) // 2  # ceil((k-1)/2)


def b1_tolerates(k: int, f: int) -> bool:
    return f < (k - 1) // 2 or f == 0


def b2_tolerates(k: int, f: int) -> bool:
    return 3 * f < k - 1 or f == 0


@dataclass(frozen=True)
class B1Config:
    n: int
    k: int
    gathered: bool = False

    @property
    def threshold(self) -> int:
        return b1_threshold(self.k)


class B1Shepherd(ShepherdRoutine):
    def __init__(self, rid: int, cfg: B1Config, family: UxsFamily):
        super().__init__(rid)
        self.cfg = cfg
        self.family = family

    def run(self, view: LocalView):
        if not self.cfg.gathered:
            view = yield from self.gather(view)
        else:
            view = yield Action.stay(cmd(None, collect=True))
        roster = self.roster_here(view)
        self.notes["roster"] = roster
        view = yield from self.explore(view, self.cfg.threshold)
        yield from self.settle_all(view, roster)

    def gather(self, view: LocalView):
        """Walk UXS(n), two rounds per step: announce the port, then take it."""
        entry = None
        view = yield Action.stay(cmd(None, collect=True))
        for x in self.family.steps(self.cfg.n):
            if view.degree == 0:
                break
            p = next_port(entry, x, view.degree)
            view = yield Action.stay(cmd(p, collect=True))
            view = yield Action.move(p, cmd(None, collect=True))
            entry = view.entry_port
        self.notes["gathered_at"] = view.round
        return view


def b1_programs(cfg: B1Config, family: UxsFamily):
    """Factories ``(shepherd(id), follower(id))``."""
    return (lambda rid: B1Shepherd(rid, cfg, family)), (lambda rid: Worker(rid, "hold"))


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class B2Config:
    k: int
    f: int

    @property
    def quorum(self) -> int:
        return self.k - self.f - 1

    @property
    def threshold(self) -> int:
        return self.k - 2 * self.f - 1


class SearchSchedule:
    """Global schedule of UXS(2^1), UXS(2^2), ... run back to back from round 0."""

    def __init__(self, family: UxsFamily):
        self.family = family
        self.starts = [0, 0]  # starts[j] = first round of UXS(2^j), j >= 1

    def start(self, j: int) -> int:
        while len(self.starts) <= j:
            i = len(self.starts) - 1
            self.starts.append(self.starts[i] + self.family.X(2**i))
        return self.starts[j]

    def locate(self, t: int) -> tuple[int, int]:
        """(j, index of round t inside UXS(2^j))."""
        j = 1
        while self.start(j + 1) <= t:
            j += 1
        return j, t - self.start(j)

    def end_of_cover(self, n: int, now: int) -> int:
        j = 1
        while 2**j < n or self.start(j) < now:
            j += 1
        return self.start(j) + self.family.X(2**j)


class B2Searcher(Worker):
    def __init__(self, rid: int, schedule: SearchSchedule):
        super().__init__(rid, "follow")
        self.schedule = schedule
        self.searching = True
        self.entry: int | None = None

    def step(self, view: LocalView) -> Action:
        if self.searching and view.shepherd() is not None:
            self.searching = False
        if not self.searching:
            return self.obey(view)
        if view.degree == 0:
            return Action.stay()
        j, i = self.schedule.locate(view.round)
        steps = self.schedule.family.steps(2**j)
        entry = None if i == 0 else view.entry_port
        return Action.move(next_port(entry, steps[i], view.degree))


class B2Shepherd(ShepherdRoutine):
    def __init__(self, rid: int, cfg: B2Config, schedule: SearchSchedule):
        super().__init__(rid)
        self.cfg = cfg
        self.schedule = schedule

    def run(self, view: LocalView):
        while len([p for p in view.others() if not p.is_shepherd]) < self.cfg.quorum:
            view = yield Action.stay()
        whitelist = self.roster_here(view)
        self.notes["whitelist"] = whitelist
        self.notes["quorum_round"] = view.round
        view = yield from self.explore(view, self.cfg.threshold, whitelist)
        assert self.map is not None
        r = self.schedule.end_of_cover(len(self.map), view.round)
        self.notes["learned_n"] = len(self.map)
        self.notes["release_round"] = r
        view = yield from self.wait_until(view, r)
        view = yield from self.collect_all(view)
        roster = self.roster_here(view)
        self.notes["roster"] = roster
        yield from self.settle_all(view, roster)


def b2_programs(cfg: B2Config, family: UxsFamily):
    schedule = SearchSchedule(family)
    return (lambda rid: B2Shepherd(rid, cfg, schedule)), (lambda rid: B2Searcher(rid, schedule))


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class B3Config:
    n: int


def b3_rank(view: LocalView, my_id: int) -> int:
    """1 + number of distinct lower IDs among the other unsettled robots here."""
    lower = {p.claimed_id for p in view.others() if not p.settled and p.claimed_id < my_id}
    return 1 + len(lower)


def b3_wants_to_settle(view: LocalView, my_id: int) -> bool:
    settled = sum(1 for p in view.others() if p.settled)
    return settled + b3_rank(view, my_id) <= view.capacity


class B3Robot:
    def __init__(self, rid: int, steps: tuple[int, ...]):
        self.id = rid
        self.steps = steps
        self.settled = False
        self.settled_round: int | None = None

    def step(self, view: LocalView) -> Action:
        t = view.round
        if t >= len(self.steps):
            return Action.terminate(settle=self.settled or b3_wants_to_settle(view, self.id))
        if self.settled:
            return Action.stay()
        if b3_wants_to_settle(view, self.id):
            self.settled = True
            self.settled_round = t
            return Action.settle_here()
        if view.degree == 0:
            return Action.stay()
        entry = None if t == 0 else view.entry_port
        return Action.move(next_port(entry, self.steps[t], view.degree))

    def report(self) -> dict[str, Any]:
        return {}


def b3_program(cfg: B3Config, family: UxsFamily):
    steps = family.steps(cfg.n)
    return lambda rid: B3Robot(rid, steps)

"""Scenario configuration, validation, execution and replay."""

from __future__ import annotations

import hashlib
import json
import math
import random
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .adversary import NEEDS_OMNISCIENCE, Controller, make_controller
from .byzantine import (B1Config, B2Config, B3Config, SearchSchedule, b1_programs, b1_tolerates,
                        b2_programs, b2_tolerates, b3_program)
from .checker import (Verdict, check_byzantine_dispersion, check_dispersion, check_round_bound,
                      check_round_safety, check_uncapacitated_dispersion)
from .engine import ENGINE_VERSION, Engine, RobotSpec, Trace, canonical
from .errors import ReplayError, ValidationError
from .graph import Graph, GraphSpec, build_graph, capacity_condition_holds
from .plain import WrapperConfig, bundled_dispersion_A, n1_programs, n2_programs, n3_programs, t_bundled
from .uxs import DEFAULT_CACHE, UxsCache, UxsFamily

PROTOCOLS = ("b1", "b1-gathered", "b2", "b3", "n1", "n2", "n3", "bundled-dfs")
SHEPHERD_PROTOCOLS = {"b1", "b1-gathered", "b2", "n1", "n2", "n3"}
BYZANTINE_PROTOCOLS = {"b1", "b1-gathered", "b2", "b3"}

# Round-bound shapes per protocol. Each constant is 1.2 times the largest
# measured/bound ratio of the 200-run all-honest sweep, rounded up to a half.
BOUNDS: dict[str, tuple[str, float, str | None]] = {
    "b1": ("X + n**3", 1.5, None),
    "b1-gathered": ("X + n**3", 1.0, None),
    "b2": ("X + n**3", 3.5, None),
    "b3": ("X", 1.0, "X"),
    "n1": ("T_A + m", 1.5, None),
    "n2": ("X + n**3 + m", 1.5, None),
    "n3": ("n**3 + m", 1.5, None),
    "bundled-dfs": ("T_A", 1.0, "T_A"),
}


class ScenarioWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    graph: dict[str, Any]
    k: int
    protocol: str
    f: int | None = None
    ids: tuple[int, ...] | None = None
    placement: dict[str, Any] = field(default_factory=lambda: {"kind": "random"})
    adversary: dict[str, Any] | None = None
    shepherd_id: int | None = None
    seeds: dict[str, int] = field(default_factory=dict)
    p: int = 1
    q: int = 2
    round_cap: int | None = None

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScenarioConfig":
        known = {"graph", "k", "protocol", "ids", "placement", "adversary", "shepherd_id", "seeds",
                 "p", "q", "round_cap", "f"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown scenario keys: {sorted(extra)}")
        for key in ("graph", "k", "protocol"):
            if key not in d:
                raise ValidationError(f"scenario is missing {key!r}")
        proto = d["protocol"]
        f = d.get("f")
        if isinstance(proto, dict):
            f = proto.get("f", f)
            proto = proto.get("name")
        ids = d.get("ids")
        return cls(
            graph=dict(d["graph"]),
            k=int(d["k"]),
            protocol=str(proto),
            f=None if f is None else int(f),
            ids=tuple(int(i) for i in ids) if isinstance(ids, list) else None,
            placement=dict(d.get("placement") or {"kind": "random"}),
            adversary=dict(d["adversary"]) if d.get("adversary") else None,
            shepherd_id=d.get("shepherd_id"),
            seeds={k: int(v) for k, v in (d.get("seeds") or {}).items()},
            p=int(d.get("p", 1)),
            q=int(d.get("q", 2)),
            round_cap=d.get("round_cap"),
        )

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "graph": self.graph,
            "k": self.k,
            "protocol": {"name": self.protocol, "f": self.f},
            "placement": self.placement,
            "seeds": dict(sorted(self.seeds.items())),
            "p": self.p,
            "q": self.q,
        }
        if self.ids is not None:
            d["ids"] = list(self.ids)
        if self.adversary:
            d["adversary"] = self.adversary
        if self.shepherd_id is not None:
            d["shepherd_id"] = self.shepherd_id
        if self.round_cap is not None:
            d["round_cap"] = self.round_cap
        return d

    def digest(self) -> str:
        return hashlib.sha256((ENGINE_VERSION + "|" + canonical(self.to_dict())).encode()).hexdigest()

    def seed(self, name: str) -> int:
        return self.seeds.get(name, 0)


@dataclass
class Prepared:
    cfg: ScenarioConfig
    graph: Graph
    ids: list[int]
    nodes: dict[int, int]
    byzantine: list[int]
    shepherd: int | None
    f: int
    family: UxsFamily
    warnings: list[str]
    precondition_unmet: list[str]


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------


def prepare(cfg: ScenarioConfig, uxs_cache: UxsCache | None = None) -> Prepared:
    """Build the graph and roster and check every scenario rule."""
    if cfg.protocol not in PROTOCOLS:
        raise ValidationError(f"unknown protocol {cfg.protocol!r}; choose from {', '.join(PROTOCOLS)}")
    g = build_graph(GraphSpec.from_dict(cfg.graph))
    k = cfg.k
    if k < 1:
        raise ValidationError("k must be at least 1")
    if cfg.p < 0 or cfg.q < 1:
        raise ValidationError("exponents need p >= 0 and q >= 1")
    if any(c > k**cfg.p for c in g.capacities):
        raise ValidationError(f"capacities must lie in [0, k^p] = [0, {k**cfg.p}]")
    if g.total_capacity < k:
        raise ValidationError(f"total capacity {g.total_capacity} is below k={k}; dispersion is impossible")

    id_space = k**cfg.q
    if cfg.ids is not None:
        ids = list(cfg.ids)
        if len(ids) != k or len(set(ids)) != k:
            raise ValidationError(f"ids must list {k} distinct values")
        if any(not 1 <= i <= id_space for i in ids):
            raise ValidationError(f"ids must lie in [1, k^q] = [1, {id_space}]")
    else:
        ids = random.Random(f"ids:{cfg.seed('ids')}").sample(range(1, id_space + 1), k)
    ids = sorted(ids)

    adv = cfg.adversary or {}
    if adv and "strategy" not in adv:
        raise ValidationError("adversary block needs a 'strategy'")
    if "byzantine_ids" in adv:
        byz = sorted(int(i) for i in adv["byzantine_ids"])
    elif "count" in adv:
        # drawn among all but the lowest ID, which stays free for the default shepherd
        pool = [i for i in ids[1:] if i != cfg.shepherd_id]
        count = int(adv["count"])
        if not 0 <= count <= len(pool):
            raise ValidationError(f"adversary count {count} outside [0, {len(pool)}]")
        byz = sorted(random.Random(f"byzantine:{cfg.seed('adversary')}").sample(pool, count))
    else:
        byz = []
    if set(byz) - set(ids):
        raise ValidationError(f"byzantine_ids {sorted(set(byz) - set(ids))} are not robot IDs")
    if byz and cfg.protocol not in BYZANTINE_PROTOCOLS and adv.get("strategy") != "honest-shadow":
        raise ValidationError(f"protocol {cfg.protocol} assumes no Byzantine robots "
                              "(only honest-shadow robots are accepted)")
    if adv.get("strategy") in NEEDS_OMNISCIENCE and adv.get("omniscient") is False:
        raise ValidationError(f"strategy {adv['strategy']} needs an omniscient adversary")

    if cfg.protocol == "b2" and cfg.f is None:
        raise ValidationError("b2 needs f declared: the shepherd must know it")
    f = cfg.f if cfg.f is not None else len(byz)
    if len(byz) > f:
        raise ValidationError(f"{len(byz)} Byzantine robots exceed the declared f={f}")
    if cfg.protocol in BYZANTINE_PROTOCOLS and not 0 <= f < k:
        raise ValidationError(f"need 0 <= f < k, got f={f}")

    shepherd = None
    if cfg.protocol in SHEPHERD_PROTOCOLS:
        if k < 2:
            raise ValidationError(f"{cfg.protocol} needs k >= 2: the shepherd maps with a pebble")
        honest = [i for i in ids if i not in byz]
        shepherd = cfg.shepherd_id if cfg.shepherd_id is not None else honest[0]
        if shepherd not in ids:
            raise ValidationError(f"shepherd_id {shepherd} is not a robot ID")
        if shepherd in byz:
            raise ValidationError("the shepherd cannot be Byzantine")
    elif cfg.shepherd_id is not None:
        raise ValidationError(f"protocol {cfg.protocol} has no shepherd")

    nodes = _place(cfg, g, ids)

    if cfg.protocol == "n1" and k < g.n:
        raise ValidationError(f"n1 assumes k >= n, got k={k}, n={g.n}")
    if cfg.protocol == "n3":
        assert shepherd is not None
        if sum(1 for i in ids if nodes[i] == nodes[shepherd]) < 2:
            raise ValidationError("n3 needs the shepherd to start co-located with another robot")
    if cfg.protocol == "b1-gathered" and len(set(nodes.values())) != 1:
        raise ValidationError("b1-gathered needs every robot to start on the same node")

    warns: list[str] = []
    unmet: list[str] = []
    if cfg.protocol == "b3" and not capacity_condition_holds(g, k, f):
        unmet.append("capacity condition fails: total capacity < (#nonzero nodes)*f + k - f")
    if cfg.protocol in ("b1", "b1-gathered") and not b1_tolerates(k, f):
        unmet.append(f"f={f} is outside f < floor((k-1)/2)")
    if cfg.protocol == "b2" and not b2_tolerates(k, f):
        unmet.append(f"f={f} is outside f < (k-1)/3")
    for msg in unmet:
        warns.append(f"guarantee void: {msg}")
        warnings.warn(msg, ScenarioWarning, stacklevel=2)

    family = UxsFamily(g, seed=cfg.seed("uxs"), cache=uxs_cache or DEFAULT_CACHE)
    return Prepared(cfg, g, ids, nodes, byz, shepherd, f, family, warns, unmet)


def _place(cfg: ScenarioConfig, g: Graph, ids: list[int]) -> dict[int, int]:
    pl = cfg.placement
    kind = pl.get("kind", "random")
    if kind == "explicit":
        spots = pl.get("nodes")
        if not isinstance(spots, list) or len(spots) != len(ids):
            raise ValidationError("explicit placement needs 'nodes' with one entry per robot (ascending ID order)")
        nodes = dict(zip(ids, (int(v) for v in spots)))
    elif kind == "gathered":
        v = int(pl.get("node", 0))
        nodes = {i: v for i in ids}
    elif kind == "random":
        rng = random.Random(f"placement:{cfg.seed('placement')}")
        nodes = {i: rng.randrange(g.n) for i in ids}
    else:
        raise ValidationError(f"unknown placement kind {kind!r}")
    for i, v in nodes.items():
        if not 0 <= v < g.n:
            raise ValidationError(f"robot {i} placed on node {v}, which does not exist")
    return nodes


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------


@dataclass
class RunResult:
    prepared: Prepared
    trace: Trace
    verdict: Verdict
    programs: dict[int, Any]
    meta: dict[str, Any]

    @property
    def graph(self) -> Graph:
        return self.prepared.graph


def _factories(pre: Prepared) -> tuple[Callable | None, Callable, dict[str, Any]]:
    """(shepherd factory, other-robot factory, bound metadata)."""
    g, k, proto = pre.graph, pre.cfg.k, pre.cfg.protocol
    fam = pre.family
    meta: dict[str, Any] = {}
    if proto in ("b1", "b1-gathered"):
        meta["X"] = fam.X(g.n)
        sh, wk = b1_programs(B1Config(g.n, k, gathered=proto == "b1-gathered"), fam)
        return sh, wk, meta
    if proto == "b2":
        sh, wk = b2_programs(B2Config(k, pre.f), fam)
        meta["X"] = SearchSchedule(fam).end_of_cover(g.n, 0)
        return sh, wk, meta
    if proto == "b3":
        meta["X"] = fam.X(g.n)
        return None, b3_program(B3Config(g.n), fam), meta
    if proto == "n1":
        meta["T_A"] = t_bundled(g.n)
        sh, wk = n1_programs(WrapperConfig(g.n, k))
        return sh, wk, meta
    if proto == "n2":
        meta["X"] = fam.X(g.n)
        sh, wk = n2_programs(g.n, fam)
        return sh, wk, meta
    if proto == "n3":
        sh, wk = n3_programs()
        return sh, wk, meta
    meta["T_A"] = t_bundled(g.n)
    meta["slots"] = math.ceil(k / g.n)
    return None, bundled_dispersion_A(g.n, k), meta


def default_round_cap(meta: dict[str, Any]) -> int:
    return 16 * (meta.get("X", 0) + meta["n"] ** 3 + meta["m"] + meta.get("T_A", 0)) + 64


def run_scenario(cfg: ScenarioConfig | dict[str, Any], *, uxs_cache: UxsCache | None = None,
                 round_cap: int | None = None, assert_capacity: bool | None = None) -> RunResult:
    if isinstance(cfg, dict):
        cfg = ScenarioConfig.from_dict(cfg)
    pre = prepare(cfg, uxs_cache)
    g = pre.graph
    shepherd_factory, worker_factory, meta = _factories(pre)
    meta.update({"protocol": cfg.protocol, "n": g.n, "m": g.m, "k": cfg.k, "f": pre.f,
                 "byzantine_ids": pre.byzantine, "shepherd_id": pre.shepherd,
                 "uxs_modes": {str(N): s.mode for N, s in sorted(pre.family._seqs.items())}})
    if pre.precondition_unmet:
        meta["precondition_unmet"] = list(pre.precondition_unmet)
    cap = round_cap or cfg.round_cap or default_round_cap(meta)
    meta["round_cap"] = cap

    robots: list[RobotSpec] = []
    programs: dict[int, Any] = {}
    controller: Controller | None = None
    byz_map: dict[int, int] = {}
    if pre.byzantine:
        adv = cfg.adversary or {}
        controller = make_controller(adv["strategy"], adv.get("params"), int(adv.get("seed", cfg.seed("adversary"))))
    for h, rid in enumerate(pre.ids):
        is_byz = rid in pre.byzantine
        if is_byz:
            byz_map[h] = rid
        elif rid == pre.shepherd:
            assert shepherd_factory is not None
            programs[h] = shepherd_factory(rid)
        else:
            programs[h] = worker_factory(rid)
    if controller is not None:
        controller.bind(byz_map, [i for i in pre.ids if i not in pre.byzantine], worker_factory)
    for h, rid in enumerate(pre.ids):
        claim = controller.initial_claim(h) if controller is not None and h in byz_map else None
        robots.append(RobotSpec(rid, pre.nodes[rid], rid == pre.shepherd, h in byz_map, claim))

    header = {"engine": ENGINE_VERSION, "scenario_hash": cfg.digest(), "scenario": cfg.to_dict()}
    if assert_capacity is None:
        assert_capacity = cfg.protocol == "b3" and not pre.precondition_unmet
    engine = Engine(g, robots, programs, controller, round_cap=cap, header=header, meta=meta,
                    assert_capacity=assert_capacity)
    trace = engine.run()
    verdict = judge(trace, g, pre.byzantine, cfg.protocol, meta)
    return RunResult(pre, trace, verdict, programs, meta)


def judge(trace: Trace, g: Graph, byzantine: Iterable[int], protocol: str, meta: dict[str, Any],
          bounds: dict[str, tuple[str, float, str | None]] | None = None) -> Verdict:
    byz = list(byzantine)
    if protocol == "bundled-dfs":
        v = check_uncapacitated_dispersion(trace, g, meta["slots"])
    elif protocol in BYZANTINE_PROTOCOLS or byz:
        v = check_byzantine_dispersion(trace, g, byz)
    else:
        v = check_dispersion(trace, g)
    v.merge(check_round_safety(trace, g, byz, meta.get("slots") if protocol == "bundled-dfs" else None))
    expr, C, exact = (bounds or BOUNDS)[protocol]
    v.merge(check_round_bound(trace, expr, C, byzantine_set=byz, exact=exact))
    if meta.get("precondition_unmet"):
        v.notes.append("precondition_unmet: " + "; ".join(meta["precondition_unmet"]))
    return v


def verdict_dict(result: RunResult) -> dict[str, Any]:
    d = result.verdict.to_dict()
    d["precondition_unmet"] = bool(result.meta.get("precondition_unmet"))
    d["scenario_hash"] = result.trace.header["scenario_hash"]
    d["trace_digest"] = result.trace.digest()
    d["status"] = result.trace.footer["status"]
    return d


# --------------------------------------------------------------------------
# Replay
# --------------------------------------------------------------------------


@dataclass
class ReplayVerdict:
    match: bool
    divergent_round: int | None = None
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"match": self.match, "divergent_round": self.divergent_round, "detail": self.detail}


def replay(lines: list[str], *, uxs_cache: UxsCache | None = None) -> ReplayVerdict:
    """Re-execute the scenario embedded in a trace and compare line by line."""
    try:
        stored = Trace.from_lines(lines)
    except (ValueError, KeyError, TypeError) as exc:
        raise ReplayError(f"unparseable trace: {exc}") from exc
    header = stored.header
    if header.get("engine") != ENGINE_VERSION:
        raise ReplayError(f"trace was produced by {header.get('engine')!r}, this is {ENGINE_VERSION}")
    try:
        cfg = ScenarioConfig.from_dict(header["scenario"])
    except (KeyError, ValidationError) as exc:
        raise ReplayError(f"trace header does not embed a valid scenario: {exc}") from exc
    if cfg.digest() != header.get("scenario_hash"):
        raise ReplayError("scenario hash mismatch: the header was altered or comes from another engine")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScenarioWarning)
        fresh = run_scenario(cfg, uxs_cache=uxs_cache, round_cap=header.get("meta", {}).get("round_cap"))
    ours = fresh.trace.lines()
    theirs = [ln.strip() for ln in lines if ln.strip()]
    for i, (a, b) in enumerate(zip(ours, theirs)):
        if a != b:
            rounds = [r for r in (_round_of(a), _round_of(b)) if r is not None]
            rnd = min(rounds) if rounds else None
            return ReplayVerdict(False, rnd, f"first difference on line {i + 1}")
    if len(ours) != len(theirs):
        return ReplayVerdict(False, None, f"length differs: {len(theirs)} stored vs {len(ours)} replayed lines")
    return ReplayVerdict(True)


def _round_of(line: str) -> int | None:
    try:
        obj = json.loads(line)
    except ValueError:
        return None
    return obj.get("t") if isinstance(obj, dict) else None

"""Verdicts computed from a trace plus ground truth, never from program state."""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from typing import Any, Iterable

from .engine import SETTLE, TERMINATE, Trace
from .errors import ValidationError
from .graph import Graph


@dataclass
class Verdict:
    predicates: dict[str, bool] = field(default_factory=dict)
    first_violation: dict[str, Any] | None = None
    measured_rounds: int | None = None
    bound: dict[str, Any] | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.predicates.values())

    def merge(self, other: "Verdict") -> "Verdict":
        self.predicates.update(other.predicates)
        if self.first_violation is None:
            self.first_violation = other.first_violation
        if other.measured_rounds is not None:
            self.measured_rounds = other.measured_rounds
        if other.bound is not None:
            self.bound = other.bound
        self.notes.extend(other.notes)
        return self

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "predicates": dict(sorted(self.predicates.items())),
            "first_violation": self.first_violation,
            "measured_rounds": self.measured_rounds,
            "bound": self.bound,
            "notes": list(self.notes),
        }


def _footer(trace: Trace) -> dict[str, Any]:
    if not trace.footer or "robots" not in trace.footer:
        raise ValidationError("trace has no footer; it is truncated or corrupt")
    return trace.footer


def measured_rounds(trace: Trace, byzantine: Iterable[int] = ()) -> int | None:
    """Round in which the last honest robot terminated (None if one never did)."""
    byz = set(byzantine)
    rounds = []
    for r in _footer(trace)["robots"]:
        if r["id"] in byz:
            continue
        if not r["terminated"]:
            return None
        rounds.append(r["termination_round"])
    return max(rounds, default=0)


def _placement(trace: Trace, graph: Graph, byz: set[int], per_node: list[int], name: str) -> Verdict:
    v = Verdict(measured_rounds=measured_rounds(trace, byz))
    load = [0] * graph.n
    stragglers = []
    running = []
    for r in _footer(trace)["robots"]:
        if r["id"] in byz:
            continue
        if not r["terminated"]:
            running.append(r["id"])
        if r["terminated"] and r["settled"]:
            load[r["node"]] += 1
        else:
            stragglers.append(r["id"])
    over = [u for u in range(graph.n) if load[u] > per_node[u]]
    v.predicates["termination"] = not running
    v.predicates[name] = not over and not stragglers
    if stragglers:
        v.notes.append(f"honest robots not settled and terminated: {sorted(stragglers)}")
    if over:
        v.first_violation = {"round": _footer(trace)["rounds"], "node": over[0]}
        v.notes.append(f"nodes over capacity: {over}")
    if _footer(trace).get("status") == "round_cap":
        v.notes.append("round cap reached")
    return v


def check_byzantine_dispersion(trace: Trace, graph: Graph, byzantine_set: Iterable[int] = ()) -> Verdict:
    """Every honest robot terminated settled; honest load within capacity everywhere."""
    return _placement(trace, graph, set(byzantine_set), list(graph.capacities), "byzantine_dispersion")


def check_dispersion(trace: Trace, graph: Graph) -> Verdict:
    return _placement(trace, graph, set(), list(graph.capacities), "dispersion")


def check_uncapacitated_dispersion(trace: Trace, graph: Graph, slots: int) -> Verdict:
    return _placement(trace, graph, set(), [slots] * graph.n, "uncapacitated_dispersion")


def check_round_safety(trace: Trace, graph: Graph, byzantine_set: Iterable[int] = (),
                       slots: int | None = None) -> Verdict:
    """Honest settled load never exceeds capacity (or ``slots``), after any round."""
    byz = set(byzantine_set)
    limit = [slots] * graph.n if slots is not None else list(graph.capacities)
    ids = {r["handle"]: r["id"] for r in _footer(trace)["robots"]}
    settled: set[int] = set()
    load = [0] * graph.n
    v = Verdict()
    ok = True
    for t, h, node, kind, _port, settle, _claimed, _payload in trace.events:
        if ids.get(h) in byz or h in settled:
            continue
        if kind == SETTLE or (kind == TERMINATE and settle):
            settled.add(h)
            load[node] += 1
            if load[node] > limit[node] and ok:
                ok = False
                v.first_violation = {"round": t, "node": node}
    v.predicates["round_safety"] = ok
    return v


# --------------------------------------------------------------------------
# Round bounds
# --------------------------------------------------------------------------

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow}
BOUND_VARS = ("X", "n", "m", "T_A", "k", "f")


def eval_bound(expr: str, env: dict[str, float]) -> float:
    """Evaluate an arithmetic bound expression over the known symbols."""

    def ev(node: ast.AST) -> float:
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ValidationError(f"bound uses {node.id!r} but the trace metadata lacks it")
            return env[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in ("max", "min"):
            return {"max": max, "min": min}[node.func.id](*(ev(a) for a in node.args))
        raise ValidationError(f"unsupported syntax in bound expression {expr!r}")

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse bound expression {expr!r}") from exc
    return ev(tree)


def check_round_bound(trace: Trace, bound: str, C: float, *, byzantine_set: Iterable[int] = (),
                      exact: str | None = None) -> Verdict:
    """``measured <= C * bound``; with ``exact``, also ``measured == exact``."""
    meta = trace.meta
    env = {k: meta[k] for k in BOUND_VARS if k in meta}
    value = eval_bound(bound, env)
    measured = measured_rounds(trace, byzantine_set)
    v = Verdict(measured_rounds=measured)
    limit = C * value
    if measured is None:
        v.predicates["round_bound"] = False
        v.notes.append("non-termination: some honest robot never terminated")
    else:
        v.predicates["round_bound"] = measured <= limit
    v.bound = {"expr": bound, "C": C, "value": value, "limit": limit,
               "margin": None if measured is None else limit - measured}
    if exact is not None:
        target = eval_bound(exact, env)
        v.predicates["exact_round"] = measured is not None and math.isclose(measured, target)
        v.bound["exact"] = target
    return v

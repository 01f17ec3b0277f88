"""Seeded random scenarios that satisfy each protocol's preconditions."""

from __future__ import annotations

import random
from typing import Any

from .byzantine import b1_tolerates, b2_tolerates
from .errors import ValidationError

GRAPH_KINDS = ("random-connected", "ring", "path", "star", "tree")


def max_tolerated_f(protocol: str, k: int) -> int:
    if protocol in ("b1", "b1-gathered"):
        return max(0, (k - 1) // 2 - 1)
    if protocol == "b2":
        return max(0, (k - 2) // 3)
    if protocol == "b3":
        return k - 1
    return 0


def tolerated(protocol: str, k: int, f: int) -> bool:
    if protocol in ("b1", "b1-gathered"):
        return b1_tolerates(k, f)
    if protocol == "b2":
        return b2_tolerates(k, f)
    if protocol == "b3":
        return 0 <= f < k
    return f == 0


def _graph_spec(kind: str, n: int, rng: random.Random, m_max: int, seed: int) -> dict[str, Any]:
    if kind == "ring" and n < 3:
        kind = "path"
    spec: dict[str, Any] = {"kind": kind, "n": n, "seed": seed, "shuffle_ports": True}
    if kind == "random-connected":
        hi = min(m_max, n * (n - 1) // 2)
        spec["m"] = rng.randint(n - 1, max(n - 1, hi))
    return spec


def _edge_count(spec: dict[str, Any]) -> int:
    n = spec["n"]
    return {"ring": n, "path": n - 1, "star": n - 1, "tree": n - 1}.get(spec["kind"], spec.get("m", n - 1))


def _capacities(n: int, k: int, f: int, protocol: str, rng: random.Random) -> list[int]:
    """Capacities in [0, k] with total >= k, plus the counting condition for b3."""
    caps = [rng.choice((0, 0, 1, 1, 2, 3)) if rng.random() < 0.7 else rng.randint(0, k) for _ in range(n)]
    caps = [min(c, k) for c in caps]
    if not any(caps):
        caps[rng.randrange(n)] = 1

    def short() -> bool:
        nz = sum(1 for c in caps if c > 0)
        need = k if protocol != "b3" else nz * f + k - f
        return sum(caps) < need

    while short():
        growable = [v for v in range(n) if 0 < caps[v] < k] if protocol == "b3" else \
            [v for v in range(n) if caps[v] < k]
        if not growable:  # every nonzero node is full; open a fresh one
            growable = [v for v in range(n) if caps[v] == 0]
        caps[rng.choice(growable)] += 1
    return caps


def random_scenario(protocol: str, seed: int, *, n: int | None = None, k: int | None = None,
                    f: int | str = 0, strategy: str | None = None, graph: str = "random-connected",
                    n_range: tuple[int, int] = (2, 8), k_range: tuple[int, int] = (2, 12),
                    m_max: int = 16) -> dict[str, Any]:
    """A valid scenario dict for ``protocol``; ``f="max"`` picks the largest tolerated f."""
    rng = random.Random(f"scenario:{protocol}:{graph}:{n}:{k}:{f}:{strategy}:{seed}")
    n = n if n is not None else rng.randint(*n_range)
    if graph not in GRAPH_KINDS:
        raise ValidationError(f"unknown graph kind {graph!r} for sampling")
    want_f = f
    if k is None:
        lo = k_range[0]
        if protocol == "n1":
            lo = max(lo, n)
        if isinstance(want_f, int) and want_f > 0:
            while lo <= k_range[1] and not tolerated(protocol, lo, want_f):
                lo += 1
        elif want_f == "max" and protocol in ("b1", "b1-gathered", "b2"):
            lo = max(lo, 5)
        if lo > k_range[1]:
            raise ValidationError(f"no k in {k_range} fits {protocol} with n={n}, f={want_f}")
        k = rng.randint(lo, k_range[1])
    fv = max_tolerated_f(protocol, k) if want_f == "max" else int(want_f)
    if protocol == "n1" and k < n:
        raise ValidationError(f"n1 needs k >= n (k={k}, n={n})")
    if not tolerated(protocol, k, fv):
        raise ValidationError(f"f={fv} is outside what {protocol} tolerates with k={k}")

    spec = _graph_spec(graph, n, rng, m_max, seed)
    spec["capacities"] = _capacities(n, k, fv, protocol, rng)
    scen: dict[str, Any] = {
        "graph": spec,
        "k": k,
        "protocol": {"name": protocol, "f": fv if protocol in ("b1", "b1-gathered", "b2", "b3") else None},
        "seeds": {"ids": seed, "placement": seed, "uxs": 0, "adversary": seed},
    }
    if protocol == "b1-gathered":
        scen["placement"] = {"kind": "gathered", "node": rng.randrange(n)}
    elif protocol == "n3":
        nodes = [rng.randrange(n) for _ in range(k)]
        nodes[0] = nodes[1 + rng.randrange(k - 1)]  # the shepherd is the lowest ID
        scen["placement"] = {"kind": "explicit", "nodes": nodes}
    elif rng.random() < 0.25:
        scen["placement"] = {"kind": "gathered", "node": rng.randrange(n)}
    else:
        scen["placement"] = {"kind": "random"}
    if strategy is not None and fv > 0:
        adv: dict[str, Any] = {"strategy": strategy, "count": fv, "seed": seed}
        if strategy == "fake-pebble":
            adv["params"] = {"node": rng.randrange(n)}
        scen["adversary"] = adv
    return scen

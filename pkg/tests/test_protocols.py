import pytest

from dispersim.byzantine import (B2Config, SearchSchedule, b1_threshold, b1_tolerates, b2_tolerates, b3_rank,
                                 b3_wants_to_settle)
from dispersim.engine import LocalView, Presence
from dispersim.errors import ValidationError
from dispersim.graph import build_graph
from dispersim.scenario import run_scenario
from dispersim.uxs import UxsFamily
from maputil import same_graph


def scenario(graph, k, protocol, *, f=None, ids=None, placement=None, adversary=None):
    d = {"graph": graph, "k": k, "protocol": {"name": protocol, "f": f} if f is not None else protocol,
         "placement": placement or {"kind": "random"}}
    if ids is not None:
        d["ids"] = ids
    if adversary is not None:
        d["adversary"] = adversary
    return run_scenario(d)


def final_nodes(res):
    return {r["id"]: r["node"] for r in res.trace.final}


def honest_load(res):
    byz = set(res.meta["byzantine_ids"])
    load = [0] * res.graph.n
    for r in res.trace.final:
        if r["id"] not in byz and r["settled"]:
            load[r["node"]] += 1
    return load


def shepherd_report(res):
    h = next(r["handle"] for r in res.trace.final if r["id"] == res.meta["shepherd_id"])
    return res.trace.footer["reports"][str(h)]


@pytest.mark.parametrize("k, f, expected", [(5, 1, True), (5, 2, False), (7, 2, True), (3, 0, True), (4, 1, False)])
def test_b1_tolerance(k, f, expected):
    assert b1_tolerates(k, f) is expected


@pytest.mark.parametrize("k, f, expected", [(7, 2, False), (8, 2, True), (5, 1, True), (4, 1, False)])
def test_b2_tolerance(k, f, expected):
    assert b2_tolerates(k, f) is expected


def test_b1_threshold_values():
    assert [b1_threshold(k) for k in (2, 3, 4, 5, 6)] == [1, 1, 2, 2, 3]


def test_b2_quorum_and_threshold():
    cfg = B2Config(7, 2)
    assert (cfg.quorum, cfg.threshold) == (4, 2)


def test_search_schedule_boundaries():
    fam = UxsFamily(build_graph({"kind": "ring", "n": 5}))
    s = SearchSchedule(fam)
    assert [s.start(j) for j in (1, 2, 3)] == [0, 1, 16]
    assert s.start(4) == 16 + fam.X(8)
    assert s.locate(0) == (1, 0) and s.locate(5) == (2, 4)
    assert s.end_of_cover(3, 0) == 16
    assert s.end_of_cover(3, 2) == 16 + fam.X(8)


def view(capacity, presences, me):
    return LocalView(3, capacity, 2, 0, tuple(presences), me)


def test_b3_predicate_example():
    ps = [Presence(0, 5, False, None, True), Presence(1, 3, False, None, False),
          Presence(2, 7, False, None, False), Presence(3, 9, False, None, False)]
    assert b3_wants_to_settle(view(2, ps, 1), 3)
    assert not b3_wants_to_settle(view(2, ps, 2), 7)
    assert not b3_wants_to_settle(view(2, ps, 3), 9)
    assert b3_rank(view(2, ps, 3), 9) == 3


def test_b3_rank_counts_distinct_claims():
    ps = [Presence(0, 4, False, None, False), Presence(1, 4, False, None, False), Presence(2, 6, False, None, False)]
    assert b3_rank(view(5, ps, 2), 6) == 2


def test_b1_ignores_single_fake_pebble():
    res = scenario({"kind": "ring", "n": 4, "capacities": {"rule": "uniform", "value": 2}}, 5, "b1-gathered",
                   f=1, ids=[2, 4, 6, 8, 10], placement={"kind": "gathered", "node": 0},
                   adversary={"strategy": "fake-pebble", "byzantine_ids": [6], "params": {"node": 2}})
    assert res.verdict.ok
    from dispersim.mapping import KnownMap
    assert same_graph(KnownMap.from_dict(shepherd_report(res)["map"]), res.graph, 0)


def test_b2_fake_pebble_pair():
    res = scenario({"kind": "random-connected", "n": 5, "m": 6, "seed": 4, "capacities": [2, 2, 2, 1, 1]}, 7, "b2",
                   f=2, adversary={"strategy": "fake-pebble", "count": 2, "seed": 1, "params": {"node": 3}})
    assert res.verdict.ok


def test_b2_silent_quorum():
    res = scenario({"kind": "ring", "n": 5, "capacities": {"rule": "uniform", "value": 2}}, 7, "b2", f=2,
                   adversary={"strategy": "silent", "count": 2, "seed": 0})
    assert res.verdict.ok
    assert sum(honest_load(res)) == 5
    assert len(shepherd_report(res)["whitelist"]) >= 4


def test_b3_squatters_on_star():
    res = scenario({"kind": "star", "n": 4, "capacities": [0, 5, 5, 0]}, 8, "b3", f=2,
                   adversary={"strategy": "capacity-squatter", "count": 2, "seed": 0, "params": {"mode": "squat"}})
    assert res.verdict.ok
    assert res.verdict.measured_rounds == res.meta["X"]


def test_n1_concentrated_capacity():
    res = scenario({"kind": "ring", "n": 4, "capacities": [4, 0, 0, 0]}, 4, "n1")
    assert res.verdict.ok
    assert set(final_nodes(res).values()) == {0}


def test_n1_assignment_independent_of_placement():
    graph = {"kind": "path", "n": 3, "capacities": [3, 3, 0]}
    for seed in range(5):
        res = run_scenario({"graph": graph, "k": 6, "protocol": "n1", "ids": [1, 2, 3, 4, 5, 6],
                            "placement": {"kind": "random"}, "seeds": {"placement": seed}})
        assert res.verdict.ok
        assert honest_load(res) == [3, 3, 0]


def test_n2_two_robots_on_path():
    res = scenario({"kind": "path", "n": 3, "capacities": [1, 1, 1]}, 2, "n2",
                   placement={"kind": "explicit", "nodes": [0, 2]})
    assert res.verdict.ok
    assert shepherd_report(res)["learned_k"] == 2


def test_n2_colocated_start_skips_search():
    res = scenario({"kind": "path", "n": 3, "capacities": [1, 1, 1]}, 2, "n2",
                   placement={"kind": "gathered", "node": 1})
    assert res.verdict.ok and shepherd_report(res)["search_rounds"] == 0


def test_n2_ring_of_five():
    res = scenario({"kind": "ring", "n": 5, "capacities": {"rule": "uniform", "value": 1}}, 5, "n2")
    assert res.verdict.ok
    assert honest_load(res) == [1] * 5
    assert shepherd_report(res)["learned_k"] == 5


def test_n3_star():
    res = scenario({"kind": "star", "n": 4, "capacities": [0, 2, 1, 1]}, 4, "n3",
                   placement={"kind": "gathered", "node": 0})
    assert res.verdict.ok and honest_load(res) == [0, 2, 1, 1]


def test_n3_requires_colocated_shepherd():
    with pytest.raises(ValidationError):
        scenario({"kind": "path", "n": 2, "capacities": [1, 1]}, 2, "n3",
                 placement={"kind": "explicit", "nodes": [0, 1]})


@pytest.mark.parametrize("n, k, most", [(3, 3, 1), (3, 6, 2), (4, 9, 3)])
def test_bundled_dfs_slots(n, k, most):
    res = scenario({"kind": "ring", "n": n, "capacities": {"rule": "uniform", "value": k}}, k, "bundled-dfs", placement={"kind": "gathered", "node": 0})
    assert res.verdict.ok
    assert max(honest_load(res)) <= most and sum(honest_load(res)) == k
    assert res.verdict.measured_rounds == 8 * n * n


def test_bundled_dfs_single_node():
    res = scenario({"kind": "explicit", "n": 1, "edges": [], "capacities": [3]}, 3, "bundled-dfs")
    assert res.verdict.ok and honest_load(res) == [3]

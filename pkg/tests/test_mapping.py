import random

import pytest
from hypothesis import given, settings, strategies as st

from dispersim.graph import build_graph, from_edges
from dispersim.mapping import CapacityError, KnownMap, dfs_settlement_schedule, map_of
from maputil import run_explorer, run_id_mapper, same_graph, shepherd_rounds


def path_map(caps):
    return map_of(build_graph({"kind": "path", "n": len(caps), "capacities": caps}), 0)


def test_schedule_fills_in_preorder():
    ledger = dfs_settlement_schedule(path_map([2, 0, 3]), {4, 7, 9, 11})
    assert ledger.at(0) == [4, 7]
    assert ledger.at(1) == []
    assert ledger.at(2) == [9, 11]
    assert ledger.shepherd_node == 2
    assert ledger.unassigned == []


def test_schedule_shepherd_only():
    ledger = dfs_settlement_schedule(path_map([0, 1]), [])
    assert ledger.assignment == {} and ledger.shepherd_node == 1


def test_schedule_duplicate_ids_share_a_slot():
    ledger = dfs_settlement_schedule(path_map([1, 1, 1]), [5, 5, 8])
    assert ledger.assignment == {5: 0, 8: 1}
    assert ledger.shepherd_node == 2


def test_schedule_insufficient_capacity():
    with pytest.raises(CapacityError):
        dfs_settlement_schedule(path_map([1, 1]), [3, 4])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=7), st.sets(st.integers(1, 50), max_size=12))
def test_schedule_respects_capacities(caps, roster):
    m = path_map(caps)
    if sum(caps) < len(roster) + 1:
        with pytest.raises(CapacityError):
            dfs_settlement_schedule(m, roster)
        return
    ledger = dfs_settlement_schedule(m, roster)
    assert set(ledger.assignment) == roster
    for v in range(len(caps)):
        assert ledger.allotted[v] <= caps[v]
    # lowest IDs land earliest in preorder
    order = {v: i for i, v in enumerate(ledger.order)}
    ranked = sorted(roster)
    assert [order[ledger.assignment[i]] for i in ranked] == sorted(order[ledger.assignment[i]] for i in ranked)


def test_known_map_round_trip_and_tour():
    g = build_graph({"kind": "random-connected", "n": 6, "m": 8, "seed": 1})
    m = map_of(g, 2)
    assert KnownMap.from_dict(m.to_dict()).to_dict() == m.to_dict()
    assert m.isomorphic_to(g, 2) and same_graph(m, g, 2)
    tour = m.euler_tour()
    assert len(tour) == 2 * (g.n - 1)
    v, seen = 0, {0}
    for p, _ in tour:
        v = m.nodes[v].links[p][0]
        seen.add(v)
    assert v == 0 and len(seen) == g.n


def test_explorer_on_two_node_path():
    g = build_graph({"kind": "path", "n": 2, "capacities": [1, 1]})
    ex, trace = run_explorer(g, 0)
    assert same_graph(ex.map, g, 0)
    assert trace.footer["status"] == "complete"


def test_explorer_on_triangle_with_uneven_capacities():
    g = from_edges(3, [(0, 1), (1, 2), (2, 0)], [2, 1, 0])
    for root in range(3):
        ex, _ = run_explorer(g, root)
        assert same_graph(ex.map, g, root)
        assert not ex.anomalies


@pytest.mark.parametrize("seed", range(8))
def test_explorer_random_graphs(seed):
    rng = random.Random(seed)
    n = rng.randint(3, 8)
    g = build_graph({"kind": "random-connected", "n": n, "m": rng.randint(n - 1, min(14, n * (n - 1) // 2)),
                     "seed": seed, "shuffle_ports": True, "capacities": {"rule": "uniform", "value": 1}})
    root = rng.randrange(n)
    ex, _ = run_explorer(g, root)
    assert same_graph(ex.map, g, root)


def test_id_mapper_path_with_three_ids():
    g = build_graph({"kind": "path", "n": 3, "capacities": [1, 1, 1]})
    mapper, trace = run_id_mapper(g, 0)
    assert same_graph(mapper.map, g, 0)
    assert sorted(nd.name for nd in mapper.map.nodes) == [10, 11, 12]


def test_id_mapper_with_shepherd_only_start():
    g = build_graph({"kind": "ring", "n": 4, "capacities": [1, 1, 1, 1]})
    mapper, trace = run_id_mapper(g, 0, empty={0})
    assert same_graph(mapper.map, g, 0)
    assert mapper.map.nodes[0].name == 1


def test_id_mapper_single_edge_takes_two_rounds():
    g = build_graph({"kind": "path", "n": 2, "capacities": [1, 1]})
    mapper, trace = run_id_mapper(g, 0)
    assert mapper.notes["map_rounds"] == 2


@pytest.mark.parametrize("seed", range(10))
def test_id_mapper_within_edge_bound(seed):
    rng = random.Random(100 + seed)
    n = rng.randint(2, 8)
    g = build_graph({"kind": "random-connected", "n": n, "m": rng.randint(n - 1, n * (n - 1) // 2),
                     "seed": seed, "shuffle_ports": True})
    mapper, _ = run_id_mapper(g, 0)
    assert same_graph(mapper.map, g, 0)
    assert mapper.notes["map_rounds"] <= 4 * g.m + 2 * g.n

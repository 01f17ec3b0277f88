import pytest
from hypothesis import given, strategies as st

from dispersim.graph import build_graph, enumerate_port_labeled
from dispersim.uxs import (UxsCache, UxsError, UxsFamily, UxsSequence, generate, next_port, uncertified,
                           verify_coverage)


@pytest.mark.parametrize("entry, x, degree, expected", [
    (None, 5, 3, 0),
    (0, 1, 3, 1),
    (2, 1, 3, 0),
    (1, 4, 2, 1),
])
def test_next_port(entry, x, degree, expected):
    assert next_port(entry, x, degree) == expected


@given(st.integers(1, 20), st.integers(0, 100), st.data())
def test_next_port_in_range(degree, x, data):
    entry = data.draw(st.one_of(st.none(), st.integers(0, degree - 1)))
    assert 0 <= next_port(entry, x, degree) < degree


def test_next_port_rejects_degree_zero():
    with pytest.raises(ValueError):
        next_port(None, 0, 0)


def own_walk_covers(ports, steps):
    """Independent traversal: every start (node, entry) must visit every node."""
    n = len(ports)
    for v0 in range(n):
        for e0 in ([None] if not ports[v0] else [None, *range(len(ports[v0]))]):
            v, e, seen = v0, e0, {v0}
            for x in steps:
                if not ports[v]:
                    break
                p = 0 if e is None else (e + x) % len(ports[v])
                v, e = ports[v][p]
                seen.add(v)
            if len(seen) != n:
                return False
    return True


@pytest.mark.parametrize("n, length", [(1, 0), (2, 1), (3, 3), (4, 15)])
def test_exhaustive_sequences(n, length):
    seq = generate(n)
    assert seq.mode == "exhaustive"
    assert seq.length == length
    assert verify_coverage(seq.steps, n).ok
    tables = [t for m in range(1, n + 1) for t in enumerate_port_labeled(m, dedupe=False)]
    assert all(own_walk_covers(t, seq.steps) for t in tables)


def test_local_sequence_on_ring():
    g = build_graph({"kind": "ring", "n": 6})
    seq = generate(6, g)
    assert seq.mode == "local"
    rep = verify_coverage(seq.steps, g)
    assert rep.ok and rep.starts_checked == 12
    assert own_walk_covers(g.ports, seq.steps)


def test_truncated_sequence_fails_verification():
    g = build_graph({"kind": "ring", "n": 6})
    seq = generate(6, g)
    rep = verify_coverage(seq.steps[: len(seq.steps) // 3], g)
    assert not rep.ok and rep.failures
    assert not verify_coverage((), g).ok


def test_generation_is_deterministic():
    g = build_graph({"kind": "random-connected", "n": 7, "m": 9, "seed": 2})
    assert generate(7, g, seed=3) == generate(7, g, seed=3)


def test_exhaustive_above_ceiling_refused():
    with pytest.raises(UxsError):
        generate(5)


def test_cache_round_trip(tmp_path):
    g = build_graph({"kind": "path", "n": 6})
    a = UxsCache(tmp_path).get(6, g, 0)
    files = list(tmp_path.glob("*.json"))
    assert len(files) == 1
    b = UxsCache(tmp_path).get(6, g, 0)
    assert a == b
    assert UxsSequence.from_dict(a.to_dict()) == a


def test_family_modes():
    g = build_graph({"kind": "ring", "n": 7})
    fam = UxsFamily(g)
    assert fam.sequence(3).mode == "exhaustive"
    assert fam.sequence(6).mode == "uncertified"
    assert fam.sequence(7).mode == "local"
    assert fam.X(6) == 8 * 36
    assert uncertified(6, 0).steps[0] == 0

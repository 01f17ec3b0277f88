import csv

import pytest
from hypothesis import given, settings, strategies as st

from dispersim.errors import ValidationError
from dispersim.graph import build_graph, capacity_condition_holds
from dispersim.sampling import max_tolerated_f, random_scenario, tolerated
from dispersim.scenario import PROTOCOLS, ScenarioConfig, prepare
from dispersim.sweep import Cell, load_grid, run_cell, summarize, sweep


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(PROTOCOLS), st.integers(0, 10_000), st.sampled_from([0, "max"]))
def test_sampled_scenarios_are_valid(protocol, seed, f):
    scen = random_scenario(protocol, seed, f=f)
    pre = prepare(ScenarioConfig.from_dict(scen))
    assert not pre.precondition_unmet
    if protocol == "b3":
        assert capacity_condition_holds(pre.graph, scen["k"], pre.f)


@pytest.mark.parametrize("protocol, k, f", [("b1", 7, 2), ("b2", 8, 2), ("b3", 5, 4), ("n1", 5, 0)])
def test_max_tolerated_f(protocol, k, f):
    assert max_tolerated_f(protocol, k) == f
    assert tolerated(protocol, k, f) and not tolerated(protocol, k, f + 1)


def test_load_grid_defaults():
    cells = load_grid({"grid": {"protocol": ["b3"], "seed": [1, 2]}})
    assert cells == [Cell("b3", None, None, 0, None, "random-connected", 1),
                     Cell("b3", None, None, 0, None, "random-connected", 2)]
    with pytest.raises(ValidationError):
        load_grid({"grid": {"protocol": ["zz"]}})


def test_invalid_cell_is_recorded():
    row = run_cell(Cell("b1", 3, 4, 3, None, "ring", 0))
    assert row.status == "invalid" and row.detail


def test_summary_counts():
    rows = [run_cell(Cell("n3", 4, None, 0, None, "ring", s)) for s in range(3)]
    (cell,) = summarize(rows)
    assert cell["runs"] == 3 and cell["passes"] == 3 and cell["pass_rate"] == 1.0


def test_empty_grid(tmp_path):
    rows, summary = sweep({"grid": {"protocol": []}}, tmp_path)
    assert rows == [] and summary == []
    with open(tmp_path / "runs.csv") as fh:
        assert len(list(csv.reader(fh))) == 1


def test_parallel_matches_serial(tmp_path):
    spec = {"grid": {"protocol": ["b3", "n2"], "seed": [0, 1, 2]}}
    a, _ = sweep(spec, tmp_path / "a", jobs=1, figures=False)
    b, _ = sweep(spec, tmp_path / "b", jobs=2, figures=False)
    assert [r.trace_digest for r in a] == [r.trace_digest for r in b]
    assert (tmp_path / "a" / "summary.json").read_text() == (tmp_path / "b" / "summary.json").read_text()

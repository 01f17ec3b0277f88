import pytest

from dispersim.adversary import CATALOG, make_controller
from dispersim.errors import ValidationError
from dispersim.sampling import random_scenario
from dispersim.scenario import run_scenario


def without_adversary(scen):
    plain = {k: v for k, v in scen.items() if k != "adversary"}
    return plain


def test_unknown_strategy():
    with pytest.raises(ValidationError, match="unknown adversary strategy"):
        make_controller("gremlin")


def test_catalog_is_complete():
    for name in CATALOG:
        assert make_controller(name).name == name


def test_capacity_squatter_rejects_bad_mode():
    scen = random_scenario("b3", 1, f=1, strategy="capacity-squatter", k=4)
    scen["adversary"]["params"] = {"mode": "nap"}
    with pytest.raises(ValidationError):
        run_scenario(scen)


@pytest.mark.parametrize("protocol", ["b1", "b1-gathered", "b2", "b3"])
@pytest.mark.parametrize("seed", range(3))
def test_honest_shadow_matches_no_adversary(protocol, seed):
    scen = random_scenario(protocol, seed, f="max", strategy="honest-shadow")
    if "adversary" not in scen:
        pytest.skip("f=0 sampled")
    a = run_scenario(scen)
    b = run_scenario(without_adversary(scen))
    assert a.trace.events == b.trace.events
    assert a.trace.final == b.trace.final


def test_silent_robots_stay_put():
    scen = random_scenario("b3", 7, f=2, k=6, strategy="silent")
    res = run_scenario(scen)
    byz = set(res.meta["byzantine_ids"])
    handles = {r["handle"] for r in res.trace.final if r["id"] in byz}
    assert all(e[3] == "stay" for e in res.trace.events if e[1] in handles)
    assert res.verdict.ok


@pytest.mark.parametrize("strategy", CATALOG)
def test_controllers_are_deterministic(strategy):
    scen = random_scenario("b2", 11, f="max", strategy=strategy)
    assert run_scenario(scen).trace.digest() == run_scenario(scen).trace.digest()


def test_id_liar_claims_honest_id():
    scen = random_scenario("b1", 3, f=1, k=6, strategy="id-liar")
    res = run_scenario(scen)
    byz = set(res.meta["byzantine_ids"])
    honest = sorted(r["id"] for r in res.trace.final if r["id"] not in byz)
    handles = {r["handle"] for r in res.trace.final if r["id"] in byz}
    assert {e[6] for e in res.trace.events if e[1] in handles} == {honest[0]}
    assert res.verdict.ok

import json
import warnings

import pytest

from dispersim.errors import ReplayError, ValidationError
from dispersim.sampling import random_scenario
from dispersim.scenario import ScenarioConfig, ScenarioWarning, replay, run_scenario

BASE = {"graph": {"kind": "ring", "n": 4, "capacities": {"rule": "uniform", "value": 2}}, "k": 5,
        "protocol": {"name": "b1", "f": 1}}


def with_(**kw):
    d = json.loads(json.dumps(BASE))
    d.update(kw)
    return d


@pytest.mark.parametrize("change, message", [
    ({"protocol": "b9"}, "unknown protocol"),
    ({"k": 20}, "total capacity"),
    ({"ids": [1, 2, 3]}, "distinct"),
    ({"ids": [1, 2, 3, 4, 99]}, "k\\^q"),
    ({"protocol": {"name": "b2"}}, "f declared"),
    ({"adversary": {"strategy": "silent", "byzantine_ids": [99]}}, "not robot IDs"),
    ({"adversary": {"strategy": "silent", "count": 2}}, "exceed"),
    ({"protocol": "n2", "adversary": {"strategy": "silent", "count": 1}}, "assumes no Byzantine"),
    ({"placement": {"kind": "gathered", "node": 9}}, "does not exist"),
    ({"placement": {"kind": "teleport"}}, "placement kind"),
    ({"graph": {"kind": "ring", "n": 4, "capacities": [9, 1, 1, 1]}}, "k\\^p"),
])
def test_validation(change, message):
    with pytest.raises(ValidationError, match=message):
        run_scenario(with_(**change))


def test_precondition_warning():
    with pytest.warns(ScenarioWarning):
        res = run_scenario(with_(protocol={"name": "b1", "f": 2}))
    assert res.meta["precondition_unmet"]


def test_config_round_trip_and_digest():
    cfg = ScenarioConfig.from_dict(BASE)
    again = ScenarioConfig.from_dict(cfg.to_dict())
    assert again.digest() == cfg.digest()
    assert ScenarioConfig.from_dict(with_(k=6)).digest() != cfg.digest()


def test_replay_matches():
    res = run_scenario(random_scenario("b2", 5, f="max", strategy="id-liar"))
    assert replay(res.trace.lines()).match


def test_replay_divergence_reports_round():
    lines = run_scenario(BASE).trace.lines()
    i = next(j for j, ln in enumerate(lines) if '"t":3,' in ln)
    lines[i] = lines[i].replace('"a":"stay"', '"a":"move"').replace('"a":"move","p":', '"a":"stay","p":', 1)
    v = replay(lines)
    assert not v.match and v.divergent_round == 3


def test_replay_rejects_other_engine():
    lines = run_scenario(BASE).trace.lines()
    head = json.loads(lines[0])
    head["engine"] = "someone-else/0"
    with pytest.raises(ReplayError):
        replay([json.dumps(head)] + lines[1:])


def test_replay_rejects_edited_scenario():
    lines = run_scenario(BASE).trace.lines()
    head = json.loads(lines[0])
    head["scenario"]["k"] = 6
    with pytest.raises(ReplayError, match="hash"):
        replay([json.dumps(head)] + lines[1:])

import pytest

from dispersim.engine import MOVE, SETTLE, TERMINATE, Action, Engine, EngineError, RobotSpec, Trace
from dispersim.graph import build_graph


class Script:
    def __init__(self, actions):
        self.actions = list(actions)
        self.views = []

    def step(self, view):
        self.views.append(view)
        return self.actions.pop(0)


def run(graph, robots, programs, **kw):
    return Engine(graph, robots, programs, round_cap=kw.pop("round_cap", 50), **kw).run()


def path2():
    return build_graph({"kind": "path", "n": 2, "capacities": [1, 1]})


def test_settle_then_terminate_takes_two_rounds():
    tr = run(path2(), [RobotSpec(1, 0)], {0: Script([Action.settle_here(), Action.terminate()])})
    assert [e[3] for e in tr.events] == [SETTLE, TERMINATE]
    (r,) = tr.final
    assert r["settled"] and r["terminated"] and r["termination_round"] == 1


def test_alternating_walk():
    tr = run(path2(), [RobotSpec(1, 0)],
             {0: Script([Action.move(0), Action.move(0), Action.move(0), Action.terminate()])})
    assert [e[2] for e in tr.events] == [0, 1, 0, 1]
    assert tr.final[0]["node"] == 1


def test_moves_are_simultaneous():
    a = Script([Action.move(0), Action.terminate()])
    b = Script([Action.move(0), Action.terminate()])
    run(path2(), [RobotSpec(1, 0), RobotSpec(2, 1)], {0: a, 1: b})
    # they swapped without meeting
    assert len(a.views[1].presences) == 1 and a.views[1].entry_port == 0


def test_payload_heard_next_round():
    a = Script([Action.stay("hello"), Action.terminate()])
    b = Script([Action.stay(), Action.terminate()])
    run(path2(), [RobotSpec(1, 0), RobotSpec(2, 0)], {0: a, 1: b})
    assert b.views[0].others()[0].payload is None
    assert b.views[1].others()[0].payload == "hello"


def test_invalid_port():
    with pytest.raises(EngineError, match="invalid port"):
        run(path2(), [RobotSpec(1, 0)], {0: Script([Action.move(1)])})


def test_settled_robot_cannot_move():
    with pytest.raises(EngineError, match="settled"):
        run(path2(), [RobotSpec(1, 0)], {0: Script([Action.settle_here(), Action.move(0)])})


def test_honest_robot_cannot_change_id():
    with pytest.raises(EngineError, match="identity"):
        run(path2(), [RobotSpec(1, 0)], {0: Script([Action(MOVE, 0, None, False, (5,))])})


def test_byzantine_needs_controller():
    with pytest.raises(EngineError, match="controller"):
        run(path2(), [RobotSpec(1, 0), RobotSpec(2, 0, byzantine=True)], {0: Script([Action.terminate()])})


def test_round_cap_status():
    tr = run(path2(), [RobotSpec(1, 0)], {0: Script([Action.stay()] * 10)}, round_cap=5)
    assert tr.footer["status"] == "round_cap" and tr.footer["rounds"] == 5
    assert not tr.final[0]["terminated"]


def test_assert_capacity():
    g = path2()
    progs = {0: Script([Action.settle_here(), Action.terminate()]),
             1: Script([Action.settle_here(), Action.terminate()])}
    with pytest.raises(EngineError, match="capacity"):
        run(g, [RobotSpec(1, 0), RobotSpec(2, 0)], progs, assert_capacity=True)


def test_trace_round_trip_and_determinism():
    def once():
        return run(path2(), [RobotSpec(1, 0), RobotSpec(2, 1)],
                   {0: Script([Action.move(0, {"x": 1}), Action.terminate(True)]),
                    1: Script([Action.stay(), Action.terminate()])})
    a, b = once(), once()
    assert a.to_jsonl() == b.to_jsonl()
    back = Trace.from_lines(a.lines())
    assert back.to_jsonl() == a.to_jsonl()

"""Engine behavior: letters, waits, movement staging, pool dynamics."""

import json

import pytest

from resh.engine import Engine
from resh.errors import UnknownProgram
from resh.geometry import WorldMap
from resh.protocol import (
    ActStatus, CancelAction, Capability, GotoSet, Pose, StartAction, TaskState,
)
from resh.sim import ActionScript, MockRobotConfig, World

CAPS = (Capability("work"), Capability("goto", ()), Capability("load"),
        Capability("dropoff"), Capability("say"))


def make_map(w=40, h=40, locs=()):
    m = WorldMap.empty(w, h)
    for name, x, y in locs:
        m.locations[name] = (x, y, 0.0)
    return m


def bot(name, pose=(1.0, 1.0, 0.0), **kw):
    kw.setdefault("capabilities", CAPS)
    return MockRobotConfig(name, pose=Pose(*pose), **kw)


def drive(w, eng, until=None, limit_ms=60_000, step_ms=100):
    pred = until or eng.done
    eng.tick()
    start = w.clock.now_ms
    while not pred():
        assert w.clock.now_ms - start < limit_ms, "scenario did not converge"
        w.step(step_ms)
        eng.tick()


def letters(eng, pid):
    out = []
    for rec in eng.runs[pid].trace:
        if rec.kind == "letter":
            out.append((rec.sim_ms, rec.payload))
    return out


# ---------------------------------------------------------------------------
# basics

def test_single_action_succeeds():
    w = World(make_map())
    w.spawn(bot("r1"))
    eng = Engine(w)
    pid = eng.submit("action work()\ntask main() { var r robot\n work() -> r }")
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED
    lts = [p for _, p in letters(eng, pid)]
    assert lts[0]["y"] and not lts[0]["x"]
    assert lts[-1]["x"] and not lts[-1]["y"]


def test_unknown_program_raises():
    eng = Engine(World(make_map()))
    with pytest.raises(UnknownProgram):
        eng.run_state("nope")


def test_sequence_then_costart():
    # in A => (B + C) the two successors initiate together, strictly
    # after A's termination is observed
    w = World(make_map())
    w.spawn_pool([bot("r1"), bot("r2", pose=(2.0, 1.0, 0.0))])
    eng = Engine(w)
    pid = eng.submit("""
        action work()
        task main() { work() => (work() + work()) }
    """)
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED
    lts = letters(eng, pid)
    first_x = next(i for i, (_, p) in enumerate(lts) if p["x"])
    costart = next(i for i, (_, p) in enumerate(lts) if len(p["y"]) == 2)
    assert costart > first_x
    assert lts[costart][1]["x"] == []


def test_failure_aborts_and_cancels_sibling():
    w = World(make_map())
    w.spawn_pool([
        bot("r1", script=(("work", ActionScript(fail_after_ms=500)),)),
        bot("r2", pose=(2.0, 1.0, 0.0),
            script=(("work", ActionScript(hold_until_cancelled=True)),)),
    ])
    eng = Engine(w)
    pid = eng.submit("""
        action work()
        task main() { (work() -> "r1") & (work() -> "r2") }
    """)
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.FAILED
    assert any(isinstance(b, CancelAction) for b in eng.sent)
    # the held action is no longer running at the agent
    assert not w.robots["r2"].running


def test_short_circuit_cancels_slow_side():
    # a !& b: b finishing cancels a
    w = World(make_map())
    w.spawn_pool([
        bot("r1", script=(("work", ActionScript(hold_until_cancelled=True)),)),
        bot("r2", pose=(2.0, 1.0, 0.0),
            script=(("work", ActionScript(duration_ms=800)),)),
    ])
    eng = Engine(w)
    pid = eng.submit("""
        action work()
        task main() { (work() -> "r1") !& (work() -> "r2") }
    """)
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED
    cancels = [b for b in eng.sent if isinstance(b, CancelAction)]
    assert cancels
    terminated = [p for _, p in letters(eng, pid)
                  for x in p["x"] if x[1] == "terminated"]
    assert terminated


def test_pause_delays_successor():
    w = World(make_map())
    w.spawn(bot("r1", script=(("work", ActionScript(duration_ms=300)),)))
    eng = Engine(w)
    pid = eng.submit("""
        action work()
        task main() { work() => pause 2s => work() }
    """)
    drive(w, eng)
    lts = letters(eng, pid)
    first_done = next(t for t, p in lts if p["x"])
    second_start = next(t for t, p in lts if p["y"] and t > first_done)
    assert second_start - first_done >= 2000


def test_waitprop_gates_successor():
    w = World(make_map())
    w.spawn(bot("r1"))
    eng = Engine(w)
    pid = eng.submit("""
        action work()
        task main() {
            var r robot
            (work() -> r) => waitprop r.ready => (work() -> r)
        }
    """)
    drive(w, eng, until=lambda: len(letters(eng, pid)) >= 2, limit_ms=5_000)
    t0 = w.clock.now_ms
    for _ in range(20):
        w.step(100)
        eng.tick()
    assert len([p for _, p in letters(eng, pid) if p["y"]]) == 1
    w.set_property("r1", "ready", True)
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED
    second = [t for t, p in letters(eng, pid) if p["y"]][1]
    assert second > t0


def test_repeat_until_property():
    w = World(make_map())
    w.spawn(bot("r1", script=(("work", ActionScript(duration_ms=400)),)))
    eng = Engine(w)
    pid = eng.submit("""
        action work()
        task main() { repeat (work() -> "r1") untilprop done }
    """)
    drive(w, eng, until=lambda: w.clock.now_ms >= 1500, limit_ms=2_000)
    w.set_property("r1", "done", True)
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED
    starts = [p for _, p in letters(eng, pid) if p["y"]]
    assert len(starts) >= 2


# ---------------------------------------------------------------------------
# events

def test_event_binds_location_parameter():
    m = make_map(locs=(("dock", 2.0, 2.0), ("ward", 8.0, 8.0)))
    w = World(m)
    w.spawn(bot("r1", pose=(2.0, 2.0, 0.0)))
    eng = Engine(w)
    pid = eng.submit("""
        action say()
        task main() {
            var r robot
            waitevent visit(place loc) => (say() -> r @ place)
        }
    """)
    drive(w, eng, until=lambda: w.clock.now_ms >= 500, limit_ms=1_000)
    assert eng.run_state(pid) is TaskState.RUNNING
    w.fire_event("visit", ("ward",))
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED
    pose = w.robots["r1"].pose
    assert (pose.x, pose.y) == pytest.approx((8.0, 8.0), abs=0.3)


def test_event_wakes_every_waiting_task():
    w = World(make_map())
    w.spawn_pool([bot("r1"), bot("r2", pose=(3.0, 3.0, 0.0))])
    eng = Engine(w)
    p1 = eng.submit("action work()\ntask main() { waitevent go() => work() }", "p1")
    p2 = eng.submit("action work()\ntask main() { waitevent go() => work() }", "p2")
    eng.tick()
    w.fire_event("go", ())
    drive(w, eng)
    assert eng.run_state(p1) is TaskState.SUCCEEDED
    assert eng.run_state(p2) is TaskState.SUCCEEDED


def test_unwatched_event_is_dropped():
    w = World(make_map())
    w.spawn(bot("r1"))
    eng = Engine(w)
    pid = eng.submit("action work()\ntask main() { work() }")
    w.fire_event("nobodyCares", ("x",))
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED


# ---------------------------------------------------------------------------
# movement staging

def test_located_action_moves_before_payload():
    m = make_map(locs=(("lobby", 8.0, 1.0),))
    w = World(m)
    w.spawn(bot("r1", pose=(1.0, 1.0, 0.0)))
    eng = Engine(w)
    pid = eng.submit("""
        action say()
        task main() { var r robot\n say() -> r @ "lobby" }
    """)
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED
    starts = [b for b in eng.sent if isinstance(b, StartAction)]
    assert starts[0].action == "goto"
    assert starts[-1].action == "say"
    # the payload goes out only at the goal
    assert any(isinstance(b, GotoSet) for b in eng.sent)
    pose = w.robots["r1"].pose
    assert (pose.x, pose.y) == pytest.approx((8.0, 1.0), abs=0.3)


def test_goto_action_is_movement_only():
    m = make_map(locs=(("lobby", 6.0, 6.0),))
    w = World(m)
    w.spawn(bot("r1", pose=(1.0, 1.0, 0.0)))
    eng = Engine(w)
    pid = eng.submit("""
        action goto(string)
        task main() { var r robot\n goto("lobby") -> r }
    """)
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED
    pose = w.robots["r1"].pose
    assert (pose.x, pose.y) == pytest.approx((6.0, 6.0), abs=0.3)


def test_nearer_robot_wins_located_action():
    m = make_map(locs=(("post", 8.0, 8.0),))
    w = World(m)
    w.spawn_pool([bot("far", pose=(1.0, 1.0, 0.0)),
                  bot("near", pose=(7.0, 8.0, 0.0))])
    eng = Engine(w)
    pid = eng.submit("""
        action say()
        task main() { var r robot\n say() -> r @ "post" }
    """)
    drive(w, eng)
    assert eng.runs[pid].bindings[f"var:{pid}/r"] == "near"


def test_unknown_location_aborts_task():
    w = World(make_map())
    w.spawn(bot("r1"))
    eng = Engine(w)
    pid = eng.submit("""
        action say()
        task main() { var r robot\n say() -> r @ "nowhere" }
    """)
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.FAILED
    assert "nowhere" in eng.runs[pid].detail


# ---------------------------------------------------------------------------
# bindings and reservations

def test_variable_binding_sticks_across_actions():
    m = make_map(locs=(("a", 2.0, 2.0), ("b", 8.0, 8.0)))
    w = World(m)
    w.spawn_pool([bot("r1", pose=(2.0, 2.0, 0.0)),
                  bot("r2", pose=(8.0, 8.0, 0.0))])
    eng = Engine(w)
    pid = eng.submit("""
        action work()
        task main() {
            var r robot
            (work() -> r @ "a") => (work() -> r @ "b")
        }
    """)
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED
    # r1 wins the first action and must keep the second despite r2
    # already parked at b
    assigns = [rec.payload for rec in eng.runs[pid].trace
               if rec.kind == "assign"]
    assert {a["robot"] for a in assigns} == {"r1"}


def test_fixed_robot_name_is_honored():
    w = World(make_map())
    w.spawn_pool([bot("r1"), bot("r2", pose=(2.0, 2.0, 0.0))])
    eng = Engine(w)
    pid = eng.submit('action work()\ntask main() { work() -> "r2" }')
    drive(w, eng)
    assigns = [rec.payload for rec in eng.runs[pid].trace
               if rec.kind == "assign"]
    assert assigns == [{"uid": assigns[0]["uid"], "robot": "r2",
                        "action": "work"}]


def test_with_clause_filters_candidates():
    w = World(make_map())
    w.spawn_pool([bot("plain"),
                  bot("gripper", pose=(2.0, 2.0, 0.0),
                      properties=(("canPick", True),))])
    eng = Engine(w)
    pid = eng.submit("""
        action work()
        task main() {
            var r robot with canPick
            work() -> r
        }
    """)
    drive(w, eng)
    assert eng.runs[pid].bindings[f"var:{pid}/r"] == "gripper"


def test_exclusive_reservation_blocks_other_tasks():
    w = World(make_map())
    w.spawn(bot("solo", script=(("work", ActionScript(duration_ms=500)),)))
    eng = Engine(w)
    p1 = eng.submit("""
        action work()
        task main() {
            var r robot
            (work() <-> r) => pause 2s => (work() <-> r)
        }
    """, "p1")
    p2 = eng.submit("action work()\ntask main() { work() }", "p2")
    drive(w, eng)
    assert eng.run_state(p1) is TaskState.SUCCEEDED
    assert eng.run_state(p2) is TaskState.SUCCEEDED
    # p2's single action may only run after p1 released the robot
    p1_done = next(r.sim_ms for r in eng.runs[p1].trace
                   if r.kind == "status" and r.payload["state"] == "succeeded")
    p2_start = next(r.sim_ms for r in eng.runs[p2].trace
                    if r.kind == "assign")
    assert p2_start >= p1_done


# ---------------------------------------------------------------------------
# pool dynamics

def test_empty_pool_defers_then_starts_after_spawn():
    w = World(make_map())
    eng = Engine(w)
    pid = eng.submit("action work()\ntask main() { work() }")
    for _ in range(10):
        w.step(100)
        eng.tick()
    assert eng.run_state(pid) is TaskState.RUNNING
    assert not [r for r in eng.runs[pid].trace if r.kind == "assign"]
    w.spawn(bot("late"))
    spawn_epoch = eng.epoch
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED
    assign = next(r for r in eng.runs[pid].trace if r.kind == "assign")
    assert assign.epoch <= spawn_epoch + 1


def test_robot_removed_mid_action_fails_task():
    w = World(make_map())
    w.spawn(bot("r1", script=(("work", ActionScript(hold_until_cancelled=True)),)))
    eng = Engine(w)
    pid = eng.submit("action work()\ntask main() { work() }")
    drive(w, eng, until=lambda: bool(eng.active), limit_ms=2_000)
    w.remove("r1")
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.FAILED


def test_capability_retraction_spares_running_action():
    w = World(make_map())
    w.spawn(bot("r1", script=(("work", ActionScript(duration_ms=1500)),)))
    eng = Engine(w)
    pid = eng.submit("action work()\ntask main() { work() }")
    drive(w, eng, until=lambda: bool(eng.active), limit_ms=2_000)
    w.retract_capability("r1", "work")
    drive(w, eng)
    assert eng.run_state(pid) is TaskState.SUCCEEDED


def test_cancel_task_terminates_everything():
    w = World(make_map())
    w.spawn(bot("r1", script=(("work", ActionScript(hold_until_cancelled=True)),)))
    eng = Engine(w)
    pid = eng.submit("action work()\ntask main() { work() }")
    drive(w, eng, until=lambda: bool(eng.active), limit_ms=2_000)
    eng.cancel_task(pid)
    w.step(100)
    eng.tick()
    assert eng.run_state(pid) is TaskState.CANCELLED
    assert not w.robots["r1"].running


# ---------------------------------------------------------------------------
# trace hygiene

def run_scenario():
    m = make_map(locs=(("dock", 2.0, 2.0), ("ward", 8.0, 8.0)))
    w = World(m)
    w.spawn_pool([bot("a", pose=(1.0, 1.0, 0.0)),
                  bot("b", pose=(6.0, 6.0, 0.0))])
    eng = Engine(w)
    pid = eng.submit("""
        action work()
        task main() {
            var r robot
            (work() -> r @ "dock") => (work() -> r @ "ward")
        }
    """)
    drive(w, eng)
    return eng.trace_lines(pid)


def test_trace_lines_are_well_formed():
    for line in run_scenario():
        sim, epoch, kind, payload = line.split("\t")
        assert int(sim) >= 0 and int(epoch) >= 0
        assert kind in {"status", "letter", "assign", "bind", "wait", "loop"}
        json.loads(payload)


def test_trace_epochs_monotonic():
    lines = run_scenario()
    epochs = [int(l.split("\t")[1]) for l in lines]
    assert epochs == sorted(epochs)


def test_identical_scenarios_identical_traces():
    assert run_scenario() == run_scenario()

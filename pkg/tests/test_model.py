"""Schedule types, JSON format, validation, generators."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histree import (
    Awareness,
    DynamicSchedule,
    ScheduleError,
    gen_random_connected,
    schedule_from_json,
    schedule_to_json,
    static_schedule,
    validate,
    with_ports,
)
from histree.model import Edge, check_wellformed, plan_deliveries

from conftest import directed_corpus, undirected_corpus


def test_roundtrip_is_bit_exact():
    for sched in undirected_corpus(8, seed0=3, nmax=6, tmax=6, leaders=1):
        text = schedule_to_json(sched)
        again = schedule_from_json(text)
        assert again == sched
        assert schedule_to_json(again) == text


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 6),
    t=st.integers(1, 6),
    seed=st.integers(0, 10_000),
    directed=st.booleans(),
    flavor=st.sampled_from(["plain", "ports", "activation", "delays"]),
)
def test_roundtrip_all_flavors(n, t, seed, directed, flavor):
    kwargs = {}
    if flavor == "ports":
        directed = True
        kwargs["awareness"] = Awareness.PORT
    elif flavor == "activation":
        kwargs["activation_prob"] = 0.6
    elif flavor == "delays":
        directed = True
        kwargs["awareness"] = Awareness.LATE
        kwargs["delay_max"] = 2
    sched = gen_random_connected(n, t, seed, directed=directed, **kwargs)
    assert schedule_from_json(schedule_to_json(sched)) == sched


def test_unknown_field_rejected():
    obj = json.loads(schedule_to_json(static_schedule([(0, 1)], 2, 1, ["a", "b"])))
    obj["frobnicate"] = 1
    with pytest.raises(ScheduleError, match="unknown field"):
        schedule_from_json(json.dumps(obj))


def test_missing_field_rejected():
    with pytest.raises(ScheduleError, match="missing field: steps"):
        schedule_from_json('{"n":1,"directed":false,"awareness":"none","inputs":["a"]}')


def test_json_error_reports_position():
    with pytest.raises(ScheduleError, match=r"line 2, column"):
        schedule_from_json('{"n": 1,\n "directed" false}')


def test_bad_awareness_rejected():
    text = schedule_to_json(static_schedule([(0, 1)], 2, 1, ["a", "b"]))
    broken = text.replace('"none"', '"sideways"')
    with pytest.raises(ScheduleError, match="awareness"):
        schedule_from_json(broken)


def test_wellformed_catches_structural_faults():
    base = dict(n=2, directed=False, awareness=Awareness.NONE, inputs=("a", "b"))
    # asymmetric undirected link
    with pytest.raises(ScheduleError, match="asymmetric"):
        check_wellformed(DynamicSchedule(steps=((Edge(0, 1, 1),),), **base))
    # multiplicity must be positive
    with pytest.raises(ScheduleError, match="multiplicity"):
        check_wellformed(
            DynamicSchedule(steps=((Edge(0, 1, 0), Edge(1, 0, 0)),), **base)
        )
    # agent out of range
    with pytest.raises(ScheduleError, match="out of range"):
        check_wellformed(
            DynamicSchedule(steps=((Edge(0, 5, 1), Edge(5, 0, 1)),), **base)
        )
    # ports outside output-port mode
    with pytest.raises(ScheduleError, match="port"):
        check_wellformed(
            DynamicSchedule(steps=((Edge(0, 1, 1, 0), Edge(1, 0, 1, 0)),), **base)
        )
    # reserved '!' prefix
    with pytest.raises(ScheduleError, match="reserved"):
        check_wellformed(
            DynamicSchedule(
                n=2,
                directed=False,
                awareness=Awareness.NONE,
                inputs=("!x", "b"),
                steps=(),
            )
        )


def test_port_mode_constraints():
    # ports require directed links
    with pytest.raises(ScheduleError, match="directed"):
        check_wellformed(
            DynamicSchedule(
                n=2,
                directed=False,
                awareness=Awareness.PORT,
                inputs=("a", "b"),
                steps=(),
            )
        )
    # every ported edge carries one copy and ports are per-sender unique
    directed = dict(n=2, directed=True, awareness=Awareness.PORT, inputs=("a", "b"))
    with pytest.raises(ScheduleError, match="one copy"):
        check_wellformed(DynamicSchedule(steps=((Edge(0, 1, 2, 0),),), **directed))
    with pytest.raises(ScheduleError, match="reused"):
        check_wellformed(
            DynamicSchedule(steps=((Edge(0, 1, 1, 0), Edge(0, 0, 1, 0)),), **directed)
        )
    with pytest.raises(ScheduleError, match="requires a port"):
        check_wellformed(DynamicSchedule(steps=((Edge(0, 1, 1),),), **directed))


def test_activation_and_delay_constraints():
    sched = gen_random_connected(3, 2, 0)
    with pytest.raises(ScheduleError, match="cannot be combined"):
        check_wellformed(
            DynamicSchedule(
                n=3,
                directed=sched.directed,
                awareness=sched.awareness,
                inputs=sched.inputs,
                steps=sched.steps,
                activation=(frozenset({0}), frozenset({1})),
                delays=((0,) * len(sched.steps[0]), (0,) * len(sched.steps[1])),
            )
        )
    with pytest.raises(ScheduleError, match="directed"):
        check_wellformed(
            DynamicSchedule(
                n=3,
                directed=False,
                awareness=Awareness.NONE,
                inputs=sched.inputs,
                steps=sched.steps,
                delays=tuple(tuple(0 for _ in step) for step in sched.steps),
            )
        )
    with pytest.raises(ScheduleError, match="one entry per step"):
        check_wellformed(
            DynamicSchedule(
                n=3,
                directed=False,
                awareness=Awareness.NONE,
                inputs=sched.inputs,
                steps=sched.steps,
                activation=(frozenset({0}),) * (len(sched.steps) + 1),
            )
        )


def test_varying_inputs_shape_checked():
    with pytest.raises(ScheduleError, match="rows"):
        check_wellformed(
            DynamicSchedule(
                n=2,
                directed=False,
                awareness=Awareness.NONE,
                inputs=(("a", "b"),),  # needs horizon+1 = 2 rows
                steps=((Edge(0, 1, 1), Edge(1, 0, 1)),),
            )
        )


def test_static_schedule_self_loop_single_copy():
    sched = static_schedule([(0, 1), (1, 1)], 2, 2, ["a", "b"])
    step = sched.steps[0]
    loops = [e for e in step if e.src == e.dst]
    assert loops == [Edge(1, 1, 1)]
    assert Edge(0, 1, 1) in step and Edge(1, 0, 1) in step


def test_generated_schedules_are_connected_every_step():
    for sched in undirected_corpus(6, seed0=11, nmax=7, tmax=5):
        report = validate(sched)
        assert all(report.per_step_connected)
        assert report.tau == 1
    for sched in directed_corpus(6, seed0=11, nmax=5, tmax=4):
        assert all(validate(sched).per_step_connected)


def test_generator_is_deterministic():
    a = gen_random_connected(5, 6, seed="s", leaders=2)
    b = gen_random_connected(5, 6, seed="s", leaders=2)
    assert a == b
    assert a.leaders() == (0, 1)


def test_tau_and_diameter_on_alternating_halves():
    # two disconnected halves per step, alternating; unions are connected
    odd = ((Edge(0, 1, 1), Edge(1, 0, 1), Edge(2, 3, 1), Edge(3, 2, 1)),)
    even = ((Edge(1, 2, 1), Edge(2, 1, 1), Edge(0, 3, 1), Edge(3, 0, 1)),)
    steps = (odd[0], even[0]) * 4
    sched = DynamicSchedule(
        n=4, directed=False, awareness=Awareness.NONE, inputs=("a",) * 4, steps=steps
    )
    report = validate(sched)
    assert not any(report.per_step_connected)
    assert report.tau == 2
    assert report.dynamic_diameter is not None
    assert report.tau <= report.dynamic_diameter <= report.tau * (sched.n - 1)


def test_tau_le_diameter_le_tau_times_n_minus_1():
    for sched in undirected_corpus(10, seed0=23, nmax=6, tmax=8):
        report = validate(sched)
        if report.tau is None or report.dynamic_diameter is None:
            continue
        assert report.tau <= max(report.dynamic_diameter, 1)
        assert report.dynamic_diameter <= report.tau * (sched.n - 1)


def test_diameter_horizon_limited_flag():
    # one step only: nobody can flood a 3-path in one step from the far end
    sched = static_schedule([(0, 1), (1, 2)], 3, 1, ["a", "a", "a"])
    report = validate(sched)
    assert report.horizon_limited


def test_with_ports_assigns_distinct_ports():
    sched = directed_corpus(1, seed0=5, nmax=4, tmax=3)[0]
    ported = with_ports(sched)
    assert ported.awareness is Awareness.PORT
    check_wellformed(ported)
    for step in ported.steps:
        seen = set()
        for e in step:
            assert e.mult == 1
            assert (e.src, e.port) not in seen
            seen.add((e.src, e.port))


def test_plan_deliveries_async_delay_arithmetic():
    sched = gen_random_connected(
        3, 4, seed=7, directed=True, awareness=Awareness.LATE, delay_max=2
    )
    plan = plan_deliveries(sched)
    pending = 0
    for t in range(1, sched.horizon + 1):
        for ei, e in enumerate(sched.steps[t - 1]):
            arrive = t + sched.delays[t - 1][ei]
            if arrive > sched.horizon:
                pending += e.mult
            else:
                inbox = plan.step_inbox(arrive, e.dst)
                assert any(
                    d.sender == e.src and d.send_step == t and d.mult == e.mult
                    for d in inbox
                )
    assert plan.undelivered == pending


def test_plan_deliveries_semi_sync_queue_vs_vanish():
    # 0 sends to 1 while 1 sleeps; 1 wakes at step 2 with no new traffic
    steps = ((Edge(0, 1, 1), Edge(1, 0, 1)), ())
    sched = DynamicSchedule(
        n=2,
        directed=False,
        awareness=Awareness.NONE,
        inputs=("a", "b"),
        steps=steps,
        activation=(frozenset({0}), frozenset({0, 1})),
    )
    queued = plan_deliveries(sched, inactive_queue=True)
    assert [d.sender for d in queued.step_inbox(2, 1)] == [0]
    assert queued.step_inbox(1, 1) == []
    assert queued.undelivered == 0
    dropped = plan_deliveries(sched, inactive_queue=False)
    assert dropped.step_inbox(2, 1) == []
    assert dropped.undelivered == 1
    # the sleeper sent nothing either
    assert queued.step_outdeg(1, 1) == 0


def test_input_at_and_leaders():
    rows = (("LEADER", "3"), ("LEADER", "4"))
    sched = DynamicSchedule(
        n=2,
        directed=False,
        awareness=Awareness.NONE,
        inputs=rows,
        steps=((Edge(0, 1, 1), Edge(1, 0, 1)),),
    )
    assert sched.varying_inputs
    assert sched.input_at(0, 1) == "3"
    assert sched.input_at(1, 1) == "4"
    assert sched.leaders() == (0,)

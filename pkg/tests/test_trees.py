"""View construction against the partition-refinement oracle, merge algebra,
equalization, level deletion, structural validity."""

from __future__ import annotations

import pytest

from histree import (
    Awareness,
    ContractViolation,
    DynamicSchedule,
    build_ground_truth,
    gen_random_connected,
    static_schedule,
)
from histree.model import Edge
from histree.nodes import (
    NodeStore,
    Received,
    View,
    delete_level0_and_remerge,
    equalize,
    initial_view,
    merge_views,
    well_formed,
)

from conftest import (
    directed_corpus,
    gt_partitions,
    permute_schedule,
    refine_agents,
    undirected_corpus,
)


# --------------------------------------------------------------------------
# ground truth vs the independent refinement oracle


def _check_against_oracle(schedules):
    for sched in schedules:
        gt = build_ground_truth(sched)
        assert gt_partitions(gt) == refine_agents(sched)
        assert gt.eq1_holds()
        for code, agents in gt.node_agents.items():
            assert gt.anonymity[code] == len(agents)


def test_partitions_undirected():
    _check_against_oracle(undirected_corpus(25, seed0=100, nmax=7, tmax=8, leaders=1))


def test_partitions_directed_late():
    _check_against_oracle(directed_corpus(25, seed0=100, nmax=6, tmax=6))


def test_partitions_directed_early():
    _check_against_oracle(
        directed_corpus(15, seed0=200, nmax=5, tmax=5, awareness=Awareness.EARLY)
    )


def test_partitions_no_awareness_directed():
    _check_against_oracle(
        directed_corpus(15, seed0=300, nmax=5, tmax=5, awareness=Awareness.NONE)
    )


def test_partitions_with_ports():
    from histree import with_ports

    for sched in directed_corpus(10, seed0=400, nmax=5, tmax=4):
        ported = with_ports(sched)
        gt = build_ground_truth(ported)
        assert gt_partitions(gt) == refine_agents(ported)
        assert gt.eq1_holds()


def test_partitions_varying_inputs():
    steps = (
        (Edge(0, 1, 1), Edge(1, 0, 1), Edge(1, 2, 1), Edge(2, 1, 1)),
    ) * 3
    rows = (("a", "a", "a"), ("a", "b", "a"), ("a", "a", "a"), ("b", "a", "a"))
    sched = DynamicSchedule(
        n=3, directed=False, awareness=Awareness.NONE, inputs=rows, steps=steps
    )
    gt = build_ground_truth(sched)
    assert gt_partitions(gt) == refine_agents(sched)
    # the fresh label at time 1 splits agent 1 off
    assert gt.level_sizes()[1] >= 2


def test_codes_do_not_depend_on_agent_labels():
    for sched in undirected_corpus(6, seed0=55, nmax=6, tmax=6, leaders=1):
        perm = list(range(sched.n))
        perm.reverse()
        other = permute_schedule(sched, perm)
        gt1 = build_ground_truth(sched)
        gt2 = build_ground_truth(other)
        assert gt1.levels == gt2.levels
        for t in range(sched.horizon + 1):
            for a in range(sched.n):
                assert (
                    gt1.view_of(a, t).digest == gt2.view_of(perm[a], t).digest
                )


def test_content_addressing_across_stores():
    s1, s2 = NodeStore(), NodeStore()
    assert initial_view(s1, "x").digest == initial_view(s2, "x").digest
    assert initial_view(s1, "x").digest != initial_view(s1, "y").digest


# --------------------------------------------------------------------------
# merge algebra


def test_merge_collapses_duplicate_views():
    store = NodeStore()
    a = initial_view(store, "x")
    b = initial_view(store, "y")
    twice = merge_views(a, [Received(b), Received(b)], outdeg=2)
    summed = merge_views(a, [Received(b, mult=2)], outdeg=2)
    assert twice.digest == summed.digest
    (entry,) = store.node(twice.digest).red_in
    assert entry[1] == 2


def test_merge_is_order_independent():
    store = NodeStore()
    a = initial_view(store, "x")
    b = initial_view(store, "y")
    c = initial_view(store, "z")
    fwd = merge_views(a, [Received(b), Received(c)])
    rev = merge_views(a, [Received(c), Received(b)])
    assert fwd.digest == rev.digest


def test_merge_distinguishes_ports_and_srcdeg():
    store = NodeStore()
    a = initial_view(store, "x")
    b = initial_view(store, "y")
    plain = merge_views(a, [Received(b), Received(b)])
    ported = merge_views(a, [Received(b, port=0), Received(b, port=1)])
    tagged = merge_views(a, [Received(b, srcdeg=1), Received(b, srcdeg=2)])
    assert len({plain.digest, ported.digest, tagged.digest}) == 3
    assert len(store.node(ported.digest).red_in) == 2


def test_merge_strict_rejects_height_mismatch():
    store = NodeStore()
    a = initial_view(store, "x")
    b = initial_view(store, "y")
    b1 = merge_views(b, [Received(a)])
    with pytest.raises(ContractViolation, match="level mismatch"):
        merge_views(a, [Received(b1)])
    # the relaxed mode accepts it
    m = merge_views(a, [Received(b1)], strict=False)
    assert m.height == 1


def test_merge_rejects_nonpositive_multiplicity():
    store = NodeStore()
    a = initial_view(store, "x")
    b = initial_view(store, "y")
    with pytest.raises(ContractViolation, match="positive"):
        merge_views(a, [Received(b, mult=0)])


def test_merge_adopts_foreign_store_nodes():
    s1, s2 = NodeStore(), NodeStore()
    a = initial_view(s1, "x")
    b = initial_view(s2, "y")
    m = merge_views(a, [Received(b)])
    assert b.digest in s1
    assert well_formed(m)


# --------------------------------------------------------------------------
# equalize


def test_equalize_is_identity_on_synchronous_views():
    for sched in undirected_corpus(5, seed0=77, nmax=5, tmax=5):
        gt = build_ground_truth(sched)
        for t in range(sched.horizon + 1):
            v = gt.view_of(0, t)
            assert equalize(v) is v


def test_equalize_disciplines_cross_height_merge():
    store = NodeStore()
    a = initial_view(store, "A")
    b = initial_view(store, "B")
    b1 = merge_views(b, [Received(a)], outdeg=1)
    m = merge_views(a, [Received(b1)], strict=False)
    assert not well_formed(m)  # red edge joins equal levels
    e = equalize(m)
    assert well_formed(e)
    assert e.height == 2
    assert e.own_input() == "A"
    # own chain was padded with one sleep step
    bottom = store.node(e.bottom)
    assert store.node(bottom.parent).is_dummy
    assert equalize(e) is e


def test_equalize_routes_red_through_unique_descent():
    store = NodeStore()
    a = initial_view(store, "A")
    b = initial_view(store, "B")
    b1 = merge_views(b, [Received(a)], outdeg=1)
    own = equalize(merge_views(a, [Received(b1)], strict=False))
    late = merge_views(own, [Received(b)], strict=False)
    e = equalize(late)
    assert well_formed(e)
    (entry,) = store.node(e.bottom).red_in
    src = store.node(entry[0])
    # the stale message is attributed to b's known descent, then padded
    assert src.is_dummy
    assert src.parent == b1.digest


def test_equalize_pads_unknown_red_history():
    store = NodeStore()
    a = initial_view(store, "A")
    a1 = merge_views(a, [])
    a2 = merge_views(a1, [])
    b = initial_view(store, "B")
    e = equalize(merge_views(a2, [Received(b)], strict=False))
    assert well_formed(e)
    (entry,) = store.node(e.bottom).red_in
    chain = store.node(entry[0])
    assert chain.is_dummy and chain.level == 2
    assert store.node(chain.parent).is_dummy


# --------------------------------------------------------------------------
# deleting the oldest level


def _suffix(sched: DynamicSchedule) -> DynamicSchedule:
    return DynamicSchedule(
        n=sched.n,
        directed=sched.directed,
        awareness=sched.awareness,
        inputs=sched.inputs,
        steps=sched.steps[1:],
    )


def test_delete_level0_matches_suffix_schedule():
    """Forgetting the first step of history is the same as never running it."""
    corpora = (
        undirected_corpus(8, seed0=91, nmax=6, tmax=6, leaders=1)
        + directed_corpus(8, seed0=91, nmax=5, tmax=5)
    )
    for sched in corpora:
        gt = build_ground_truth(sched)
        gt_suffix = build_ground_truth(_suffix(sched))
        for t in range(1, sched.horizon + 1):
            for agent in range(sched.n):
                cut = delete_level0_and_remerge(gt.view_of(agent, t))
                assert cut.height == t - 1
                assert well_formed(cut)
                assert cut.digest == gt_suffix.view_of(agent, t - 1).digest


def test_delete_level0_requires_height():
    store = NodeStore()
    with pytest.raises(ContractViolation, match="height-0"):
        delete_level0_and_remerge(initial_view(store, "x"))


# --------------------------------------------------------------------------
# structural validity


def test_ground_truth_views_are_well_formed():
    sched = gen_random_connected(5, 5, seed=13, leaders=1)
    gt = build_ground_truth(sched)
    for t in range(sched.horizon + 1):
        for a in range(sched.n):
            assert well_formed(gt.view_of(a, t))


def test_well_formed_rejects_foreign_bottom():
    sched = gen_random_connected(4, 3, seed=3)
    gt = build_ground_truth(sched)
    v = gt.view_of(0, 2)
    parent = v.node(v.bottom).parent
    assert not well_formed(View(v.store, parent, v.nodes))


def test_well_formed_rejects_missing_ancestor():
    sched = gen_random_connected(4, 3, seed=4)
    gt = build_ground_truth(sched)
    v = gt.view_of(0, 3)
    interior = next(c for c in v.nodes if v.node(c).level == 1)
    assert not well_formed(View(v.store, v.bottom, v.nodes - {interior}))


def test_well_formed_rejects_level_skips():
    store = NodeStore()
    x0 = store.intern(0, "a", store.root, (), None)
    x2 = store.intern(2, "a", x0, (), None)
    bad = View(store, x2, store.closure(x2))
    assert not well_formed(bad)


def test_well_formed_rejects_zero_multiplicity():
    store = NodeStore()
    x0 = store.intern(0, "a", store.root, (), None)
    y0 = store.intern(0, "b", store.root, (), None)
    x1 = store.intern(1, "a", x0, ((y0, 0, None, None),), None)
    assert not well_formed(View(store, x1, store.closure(x1)))


def test_well_formed_rejects_fake_root():
    store = NodeStore()
    stray = store.intern(0, None, None, (), None)
    assert not well_formed(View(store, stray, store.closure(stray)))


# --------------------------------------------------------------------------
# view API


def test_view_navigation_helpers(fig1_gt):
    v = fig1_gt.view_of(0, 2)
    assert v.level_nodes(-1) == [v.node(fig1_gt.store.root)]
    assert len(v.level_nodes(0)) == 2
    kids = v.children()
    root_kids = kids[fig1_gt.store.root]
    assert {v.node(c).level for c in root_kids} == {0}
    for src, targets in v.red_out().items():
        for dst, mult, _port, _deg in targets:
            assert v.node(dst).level == v.node(src).level + 1
            assert mult >= 1
    assert v.own_input() == "cyan"


def test_own_input_skips_dummy_filler():
    store = NodeStore()
    a = initial_view(store, "A")
    b = initial_view(store, "B")
    b1 = merge_views(b, [Received(a)], outdeg=1)
    e = equalize(merge_views(a, [Received(b1)], strict=False))
    assert store.node(e.bottom).is_dummy is False or e.own_input() == "A"
    assert e.own_input() == "A"

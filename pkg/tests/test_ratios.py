"""Anonymity ratio solving: undirected slices, directed systems, guesses,
upper-bound propagation, windowed aggregates."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from histree import Awareness, build_ground_truth, static_schedule
from histree.errors import (
    ContractViolation,
    NonIntegralScale,
    NullityFault,
    PartialAssignment,
)
from histree.model import LEADER_INPUT
from histree.ratios import (
    GuessTable,
    aggregate_interval_rows,
    build_directed_system,
    compute_weights,
    find_nonbranching_level,
    is_guesser,
    make_guess,
    nullspace_rank1,
    propagate_upper_bounds,
    resolve_heavy,
    scale_with_leaders,
    solve_ratios_undirected,
    solve_ratios_window,
)

from conftest import gauss_nullspace, tau_sparse_schedule, undirected_corpus

# fig7's frozen facts, classes ordered leader-first
FIG7_MATRIX = (
    (3, -1, 0, 0),
    (0, 2, -1, -2),
    (-2, 0, 1, 0),
    (0, 0, -1, 1),
)
FIG7_NULL = (1, 3, 2, 2)
FIG7_CLASS_ORDER = ("LEADER", "b", "c", "d")


def _level0_by_input(view):
    return {view.node(c.code).input: c.code for c in view.level_nodes(0)}


# --------------------------------------------------------------------------
# undirected slice solving


def test_fig1_ratio_and_scale(fig1_gt):
    view = fig1_gt.view_of(0, 4)
    assert find_nonbranching_level(view) == 1
    asgn = solve_ratios_undirected(view, 1)
    by_input = _level0_by_input(view)
    cyan, yellow = by_input["cyan"], by_input["yellow"]
    assert asgn.ratios[yellow] == 2 * asgn.ratios[cyan]
    scaled = scale_with_leaders(asgn, cyan, 2)
    assert scaled[cyan] == 2 and scaled[yellow] == 4
    with pytest.raises(NonIntegralScale):
        scale_with_leaders(asgn, yellow, 1)


def test_fig3_ratio_is_seven(fig3_gt):
    view = fig3_gt.view_of(0, 7)
    level = find_nonbranching_level(view)
    assert level is not None
    asgn = solve_ratios_undirected(view, level)
    by_input = _level0_by_input(view)
    cyan, yellow = by_input["cyan"], by_input["yellow"]
    assert asgn.ratios[yellow] == 7 * asgn.ratios[cyan]
    scaled = scale_with_leaders(asgn, cyan, 1)
    assert scaled[cyan] + scaled[yellow] == 8
    assert asgn.total() * Fraction(1, asgn.ratios[cyan]) == 8


def test_solver_matches_ground_truth_on_corpus():
    """On a settled, fully visible level the sweep is exact; a level that only
    looks non-branching inside a truncated view promises nothing."""
    solved = 0
    for sched in undirected_corpus(20, seed0=500, nmax=7, tmax=16, leaders=1):
        gt = build_ground_truth(sched)
        view = gt.view_of(0, sched.horizon)
        level = find_nonbranching_level(view)
        if level is None:
            continue
        if len(gt.levels[level + 1]) != len(gt.levels[level]):
            continue  # hides a split outside the light cone
        if {n.code for n in view.level_nodes(level)} != set(gt.levels[level]):
            continue
        asgn = solve_ratios_undirected(view, level)
        leader0 = _level0_by_input(view)[LEADER_INPUT]
        scaled = scale_with_leaders(asgn, leader0, gt.anonymity[leader0])
        for code, value in scaled.items():
            assert value == gt.anonymity[code]
        assert sum(scaled[c] for c in asgn.level_codes) == sched.n
        solved += 1
    assert solved >= 10


def test_branching_level_is_rejected(fig1_gt):
    view = fig1_gt.view_of(0, 4)
    with pytest.raises(ContractViolation, match="branching"):
        solve_ratios_undirected(view, 0)  # both classes split at time 1
    with pytest.raises(ContractViolation, match="no nodes"):
        solve_ratios_undirected(view, 9)


def test_partial_assignment_on_one_way_traffic(fig7_gt):
    # directed slice with no mutual pair reachable from the basis
    view = fig7_gt.view_of(0, 3)
    with pytest.raises(PartialAssignment) as exc:
        solve_ratios_undirected(view, 0)
    assert exc.value.unreached


def test_nonbranching_level_respects_view_truncation(fig1_gt):
    # deeper levels lose children outside the observer's light cone
    view = fig1_gt.view_of(0, 4)
    assert find_nonbranching_level(view, min_level=2) is None


# --------------------------------------------------------------------------
# directed systems and the nullspace


def _fig7_system(fig7_gt):
    view = fig7_gt.view_of(0, 3)
    return view, build_directed_system(view, (0, 1))


def test_fig7_system_matches_frozen_matrix(fig7_gt):
    view, system = _fig7_system(fig7_gt)
    idx = {view.node(c).input: i for i, c in enumerate(system.order)}
    perm = [idx[label] for label in FIG7_CLASS_ORDER]
    permuted = tuple(
        tuple(system.rows[perm[i]][perm[j]] for j in range(4)) for i in range(4)
    )
    assert permuted == FIG7_MATRIX


def test_fig7_nullspace_both_solvers(fig7_gt):
    view, system = _fig7_system(fig7_gt)
    idx = {view.node(c).input: i for i, c in enumerate(system.order)}
    perm = [idx[label] for label in FIG7_CLASS_ORDER]
    null = nullspace_rank1(system)
    assert tuple(null[perm[i]] for i in range(4)) == FIG7_NULL
    assert gauss_nullspace(FIG7_MATRIX) == FIG7_NULL
    assert sum(FIG7_NULL) * 1 == 8  # one leader scales the total to n


def test_fig7_interval_rejects_branching(fig7_gt):
    view = fig7_gt.view_of(0, 3)
    with pytest.raises(ContractViolation, match="branching"):
        build_directed_system(view, (1, 3))
    with pytest.raises(ContractViolation, match="interval"):
        build_directed_system(view, (1, 1))


def test_nullspace_matches_oracle_on_random_balanced_systems():
    rng = random.Random("nullspace")
    for _ in range(50):
        k = rng.randint(2, 5)
        a = [rng.randint(1, 5) for _ in range(k)]
        recv = [[0] * k for _ in range(k)]
        for i in range(k):
            recv[i][(i + 1) % k] = rng.randint(1, 2)  # cycle keeps support SC
            for j in range(k):
                if rng.random() < 0.3:
                    recv[i][j] += rng.randint(1, 2)
        rows = []
        for i in range(k):
            # deg * a_i = sum recv[i][j] * a_j, made integral by construction
            recv_i = [a[i] * recv[i][j] for j in range(k)]
            deg = sum(recv_i[j] * a[j] for j in range(k)) // a[i]
            row = [-recv_i[j] for j in range(k)]
            row[i] += deg
            rows.append(row)
        expected = gauss_nullspace(rows)
        assert nullspace_rank1(rows) == expected
        g = [x // expected[0] for x in a] if a[0] else None
        assert all(
            expected[i] * a[0] == expected[0] * a[i] for i in range(k)
        ), (a, expected, g)


def test_nullspace_faults():
    with pytest.raises(NullityFault) as exc:
        nullspace_rank1([[0, 0], [0, 0]])
    assert exc.value.nullity == 2
    with pytest.raises(NullityFault) as exc:
        nullspace_rank1([[1, 0], [0, 1]])
    assert exc.value.nullity == 0
    # one-dimensional but sign-indefinite kernel is also a fault
    with pytest.raises(NullityFault):
        nullspace_rank1([[1, 2]])
    with pytest.raises(ContractViolation):
        nullspace_rank1([])


# --------------------------------------------------------------------------
# guessing


def test_guess_equality_for_only_children(fig1_gt):
    view = fig1_gt.view_of(0, 4)
    known = dict(fig1_gt.anonymity)
    for node in view.level_nodes(2) + view.level_nodes(1):
        for src, _mult, _port, _deg in view.node(node.code).red_in:
            if not is_guesser(view, src, known):
                continue
            g = make_guess(view, src, node.code, known)
            assert g >= known[node.code]
            siblings = view.children()[view.node(node.code).parent]
            if len(siblings) == 1:
                assert g == known[node.code]


def test_guess_overshoots_with_unknown_siblings(fig1_gt):
    view = fig1_gt.view_of(0, 4)
    known = dict(fig1_gt.anonymity)
    over = 0
    for node in view.level_nodes(1) + view.level_nodes(2):
        code = node.code
        siblings = view.children()[view.node(code).parent]
        if len(siblings) < 2:
            continue
        blind = dict(known)
        for sib in siblings:
            blind.pop(sib, None)
        for src, _mult, _port, _deg in view.node(code).red_in:
            if not is_guesser(view, src, blind):
                continue
            g = make_guess(view, src, code, blind)
            assert g >= known[code]
            if g > known[code]:
                over += 1
    assert over >= 1


def test_is_guesser_requires_full_children():
    sched = static_schedule([(0, 1), (1, 2)], 3, 3, ["a", "b", "a"])
    gt = build_ground_truth(sched)
    view = gt.view_of(1, 3)
    known = dict(gt.anonymity)
    some = next(c for c in view.nodes if view.node(c).level == 1)
    partial = {k: v for k, v in known.items() if k != some}
    kids_of = view.children()
    parent = view.node(some).parent
    assert not is_guesser(view, parent, partial)
    assert not is_guesser(view, "missing", known)
    assert is_guesser(view, parent, known) or kids_of.get(parent) is None


def test_compute_weights_counts_guessed_subtrees(fig1_gt):
    view = fig1_gt.view_of(0, 2)
    level1 = [n.code for n in view.level_nodes(1)]
    guesses = {level1[0]: 5, view.bottom: 1}
    w = compute_weights(view, guesses)
    assert w[view.bottom] == 1
    assert w[level1[0]] >= 1
    assert w[fig1_gt.store.root] == 2


def test_resolve_heavy_rejects_guessed_siblings(fig1_gt):
    view = fig1_gt.view_of(0, 2)
    sibs = None
    for kids in view.children().values():
        if len(kids) >= 2:
            sibs = kids[:2]
            break
    assert sibs is not None
    table = GuessTable(guesses={sibs[0]: 1, sibs[1]: 1})
    with pytest.raises(ContractViolation, match="well spread"):
        resolve_heavy(table, view)


def test_resolve_heavy_picks_deepest_confirmable(fig1_gt):
    view = fig1_gt.view_of(0, 4)
    chain = [view.bottom]
    while view.node(chain[-1]).parent != fig1_gt.store.root:
        chain.append(view.node(chain[-1]).parent)
    top, mid = chain[-1], chain[1]
    # one guess per distinct parent: well spread
    table = GuessTable(guesses={top: 1, mid: 1})
    got = resolve_heavy(table, view)
    assert got == (mid, 1)
    # a guess heavier than its subtree stays unresolved
    table = GuessTable(guesses={mid: 99})
    assert resolve_heavy(table, view) is None


# --------------------------------------------------------------------------
# directed upper bounds


def test_upper_bounds_spread_from_leader(fig7_gt):
    view = fig7_gt.view_of(0, 3)
    table = propagate_upper_bounds(view, (0, 1), 1)
    assert not table.complete
    by_input = {view.node(c).input: c for c in table.order}
    leader_head = by_input[LEADER_INPUT]
    assert table.anchors[leader_head][1] == 1
    b_head = by_input["b"]
    assert table.anchors[b_head][1] >= fig7_gt.anonymity[b_head]
    with pytest.raises(ContractViolation, match="incomplete"):
        table.total()


def test_upper_bounds_complete_on_directed_cycle():
    # the far chain only persists to level t - 3 in agent 0's light cone,
    # and the leader's bound needs three hops to reach it
    sched = static_schedule(
        [(0, 1), (1, 2), (2, 3), (3, 0)],
        4,
        7,
        [LEADER_INPUT, "b", "c", "d"],
        directed=True,
        awareness=Awareness.LATE,
    )
    gt = build_ground_truth(sched)
    view = gt.view_of(0, 7)
    table = propagate_upper_bounds(view, (0, 4), 1)
    assert table.complete
    assert table.total() == 4
    for head, (_anchor, bound) in table.anchors.items():
        assert bound >= gt.anonymity[head]


# --------------------------------------------------------------------------
# aggregated windows


def test_aggregate_sums_slices_per_chain():
    sched = static_schedule(
        [(0, 1), (1, 2), (2, 0)],
        3,
        4,
        ["LEADER", "b", "c"],
        directed=True,
        awareness=Awareness.LATE,
    )
    gt = build_ground_truth(sched)
    view = gt.view_of(0, 4)
    one = build_directed_system(view, (0, 1))
    two = build_directed_system(view, (0, 2))
    agg = aggregate_interval_rows(two)
    assert agg == tuple(
        tuple(2 * v for v in row) for row in aggregate_interval_rows(one)
    )
    assert nullspace_rank1(agg) == nullspace_rank1(one)


def test_support_strong_connectivity():
    from histree.ratios import support_strongly_connected

    good = ((1, -1, 0), (0, 1, -1), (-1, 0, 1))
    bad = ((1, -1, 0), (0, 1, -1), (0, 0, 1))
    assert support_strongly_connected(good)
    assert not support_strongly_connected(bad)
    assert not support_strongly_connected(())


def test_window_solve_on_sparse_schedule():
    sched = tau_sparse_schedule(4, 2, 14, seed=9, leaders=1)
    gt = build_ground_truth(sched)
    view = gt.view_of(0, sched.horizon)
    lo = find_nonbranching_level(view)
    assert lo is not None
    asgn = solve_ratios_window(view, lo, lo + 2)
    for code in asgn.level_codes:
        assert asgn.ratios[code] == Fraction(
            gt.anonymity[code], gt.anonymity[min(asgn.level_codes)]
        )
    with pytest.raises(ContractViolation, match="empty window"):
        solve_ratios_window(view, lo, lo)

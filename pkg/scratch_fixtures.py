import sys

sys.path.insert(0, "src")

from fractions import Fraction

from histree.fixtures import fig1, fig3, fig7_level
from histree.ratios import (
    build_directed_system,
    find_nonbranching_level,
    nullspace_rank1,
    scale_with_leaders,
    solve_ratios_undirected,
)
from histree.structures import folded_view, minimum_base, unravel, walk_counts
from histree.truth import build_ground_truth

# --- fig1
gt = build_ground_truth(fig1())
assert gt.level_sizes() == [2, 3, 3, 3, 3], gt.level_sizes()
l1 = {gt.node_agents[c]: gt.store.node(c) for c in gt.levels[1]}
assert set(l1) == {(0, 1), (2, 3), (4, 5)}
mults = {agents: sorted((m) for _, m, _, _ in node.red_in) for agents, node in l1.items()}
assert mults == {(0, 1): [3], (2, 3): [2], (4, 5): [1]}, mults

full = gt.view_of(0, 4)
assert find_nonbranching_level(full, 0) == 1
r = solve_ratios_undirected(full, 1)
l1codes = [c for c in gt.levels[1]]
vals = {gt.node_agents[c]: r.ratios[c] for c in l1codes}
assert len(set(vals.values())) == 1, vals
l0 = {gt.node_agents[c]: c for c in gt.levels[0]}
assert r.ratios[l0[(2, 3, 4, 5)]] == 2 * r.ratios[l0[(0, 1)]]

cy2 = gt.view_of(0, 2)
assert find_nonbranching_level(cy2, 0) == 0
r2 = solve_ratios_undirected(cy2, 0)
assert r2.ratios[l0[(2, 3, 4, 5)]] / r2.ratios[l0[(0, 1)]] == Fraction(3, 2)

scaled = scale_with_leaders(r, l0[(0, 1)], 2)
assert scaled[l0[(2, 3, 4, 5)]] == 4
print("fig1 OK")

# --- fig3
gt3 = build_ground_truth(fig3())
assert gt3.level_sizes()[:4] == [2, 4, 5, 5]
v = gt3.view_of(0, 8)
lvl = find_nonbranching_level(v, 0)
assert lvl == 2, lvl
r3 = solve_ratios_undirected(v, lvl)
cyan = [c for c in r3.level_codes if gt3.store.node(c).input == "cyan"]
yellow = [c for c in r3.level_codes if gt3.store.node(c).input == "yellow"]
ratio = sum(r3.ratios[c] for c in yellow) / sum(r3.ratios[c] for c in cyan)
assert ratio == 7, ratio
scaled3 = scale_with_leaders(r3, cyan[0], 1)
assert sum(scaled3[c] for c in r3.level_codes) == 8
mb = minimum_base(gt3)
assert mb.level == 2 and len(mb.nodes) == 5
assert sorted(mb.fiber_sizes.values()) == [1, 1, 2, 2, 2]
fv = folded_view(gt3.view_of(0, 3))
wt = unravel(fv, 3)
print("fig3 walk counts", walk_counts(fv, 3), "tree size", wt.size())

# --- fig7
gt7 = build_ground_truth(fig7_level())
assert gt7.level_sizes() == [4, 4, 4, 4]
v7 = gt7.view_of(0, 3)
sys7 = build_directed_system(v7, (0, 1))
label = {c: gt7.store.node(c).input for c in sys7.order}
want_order = sorted(sys7.order, key=lambda c: {"LEADER": 0, "b": 1, "c": 2, "d": 3}[label[c]])
perm = [sys7.order.index(c) for c in want_order]
mat = [[sys7.rows[pi][pj] for pj in perm] for pi in perm]
expect = [[3, -1, 0, 0], [0, 2, -1, -2], [-2, 0, 1, 0], [0, 0, -1, 1]]
assert mat == expect, mat
x = nullspace_rank1(sys7)
xs = {label[c]: x[i] for i, c in enumerate(sys7.order)}
assert xs == {"LEADER": 1, "b": 3, "c": 2, "d": 2}, xs
gt7b = build_ground_truth(fig7_level(steps=6))
v7b = gt7b.view_of(0, 6)
sys_all = build_directed_system(v7b, (0, 3))
assert len(sys_all.rows) == 12
x2 = nullspace_rank1(sys_all)
assert sorted(x2) == [1, 2, 2, 3]
print("fig7 OK")

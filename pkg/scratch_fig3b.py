import sys

sys.path.insert(0, "src")

from fractions import Fraction

from histree.model import static_schedule
from histree.truth import build_ground_truth

LINKS = [(0, 1), (0, 7), (1, 2), (1, 7), (2, 5), (2, 6), (3, 4), (3, 6), (4, 5), (4, 6), (5, 7)]
N = 8

inputs = ["cyan"] + ["yellow"] * 7
sched = static_schedule(LINKS, N, 8, inputs)
gt = build_ground_truth(sched)
print("sizes", gt.level_sizes())

# distances from p=0
adj = [set() for _ in range(N)]
for u, v in LINKS:
    adj[u].add(v)
    adj[v].add(u)
dist = {0: 0}
frontier = [0]
d = 0
while frontier:
    nxt = []
    for u in frontier:
        for w in adj[u]:
            if w not in dist:
                dist[w] = d + 1
                nxt.append(w)
    frontier = nxt
    d += 1
print("dist from p:", [dist[i] for i in range(N)])

for t in (2, 3):
    print(f"L_{t} classes:", [gt.node_agents[c] for c in gt.levels[t]])

# red edges between L_2 and L_3 (the stabilized slice = quotient graph)
for c in gt.levels[3]:
    n = gt.store.node(c)
    print("agents", gt.node_agents[c], "<-", [(gt.node_agents[s], m) for s, m, _, _ in n.red_in])

# coverage times of levels <= 3 in p's view
want = set()
for lv in gt.levels[:4]:
    want.update(lv)
for t in range(9):
    missing = want - gt.view_of(0, t).nodes
    print("t", t, "missing", len(missing))

# ratio via true anonymities (sanity): yellow total / cyan total at stable level
lvl = gt.levels[2]
cy = sum(gt.anonymity[c] for c in lvl if gt.store.node(c).input == "cyan")
ye = sum(gt.anonymity[c] for c in lvl if gt.store.node(c).input == "yellow")
print("yellow:cyan =", Fraction(ye, cy))

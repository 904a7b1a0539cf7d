import itertools
import random
import sys

sys.path.insert(0, "src")

from histree.model import static_schedule
from histree.truth import build_ground_truth

N = 8


def diameter(links):
    adj = [set() for _ in range(N)]
    for u, v in links:
        adj[u].add(v)
        adj[v].add(u)
    worst = 0
    for s in range(N):
        dist = {s: 0}
        frontier = [s]
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
        if len(dist) < N:
            return None
        worst = max(worst, max(dist.values()))
    return worst


def judge(links):
    if diameter(links) != 4:
        return None
    inputs = ["cyan"] + ["yellow"] * (N - 1)
    sched = static_schedule(links, N, 8, inputs)
    gt = build_ground_truth(sched)
    sizes = gt.level_sizes()
    srep = None
    for s in range(len(sizes) - 1):
        if sizes[s] == sizes[s + 1]:
            srep = s
            break
    if srep is None or srep > 2:
        return None
    want = set()
    for lv in gt.levels[:4]:
        want.update(lv)
    cover = None
    for t in range(9):
        if want <= gt.view_of(0, t).nodes:
            cover = t
            break
    if cover != 7:
        return None
    return sizes, srep


rng = random.Random("fig3-search")
found = []
tries = 0
while len(found) < 5 and tries < 200000:
    tries += 1
    k = rng.randint(7, 11)
    links = set()
    # random spanning tree first
    order = list(range(N))
    rng.shuffle(order)
    for i in range(1, N):
        j = rng.randint(0, i - 1)
        links.add(tuple(sorted((order[i], order[j]))))
    while len(links) < k:
        u, v = rng.sample(range(N), 2)
        links.add(tuple(sorted((u, v))))
    res = judge(sorted(links))
    if res:
        found.append((sorted(links), res))
        print("FOUND", sorted(links), "sizes", res[0], "s", res[1], "tries", tries)

print("total tries", tries, "found", len(found))

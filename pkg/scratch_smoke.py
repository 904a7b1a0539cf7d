import sys

sys.path.insert(0, "src")

from histree.model import Awareness, gen_random_connected, plan_deliveries, with_ports
from histree.nodes import NodeStore, Received, initial_view, merge_views
from histree.truth import build_ground_truth


def distributed_run(schedule):
    """Replay the run agent-side: each agent merges the views it receives."""
    plan = plan_deliveries(schedule)
    store = NodeStore()
    views = [initial_view(store, schedule.input_at(0, i)) for i in range(schedule.n)]
    history = [list(views)]
    early = schedule.awareness is Awareness.EARLY
    annotate = schedule.awareness is not Awareness.NONE
    for t in range(1, schedule.horizon + 1):
        nxt = []
        for v in range(schedule.n):
            rec = []
            for d in plan.step_inbox(t, v):
                sv = history[d.send_step - 1][d.sender]
                sd = plan.step_outdeg(d.send_step, d.sender) if early else None
                rec.append(Received(sv, d.mult, d.port, sd))
            out = plan.step_outdeg(t, v) if annotate else None
            label = schedule.input_at(t, v) if schedule.varying_inputs else None
            nxt.append(merge_views(views[v], rec, input_label=label, outdeg=out))
        views = nxt
        history.append(list(views))
    return history


def check(schedule, tag):
    gt = build_ground_truth(schedule)
    hist = distributed_run(schedule)
    for t in range(schedule.horizon + 1):
        for v in range(schedule.n):
            want = gt.agent_node[t][v]
            got = hist[t][v].digest
            assert want == got, f"{tag}: mismatch agent {v} time {t}"
    assert gt.eq1_holds(), f"{tag}: anonymity conservation failed"
    # View of the ground truth bottom equals the distributed view node set.
    for v in range(schedule.n):
        assert gt.view_of(v, schedule.horizon).nodes == hist[-1][v].nodes, f"{tag}: node sets differ"


for seed in range(12):
    s = gen_random_connected(5, 8, f"smoke-u-{seed}")
    check(s, f"undirected {seed}")
for seed in range(12):
    s = gen_random_connected(4, 7, f"smoke-d-{seed}", directed=True, awareness=Awareness.LATE)
    check(s, f"directed {seed}")
for seed in range(6):
    s = gen_random_connected(4, 6, f"smoke-e-{seed}", directed=True, awareness=Awareness.EARLY)
    check(s, f"early {seed}")
for seed in range(6):
    s = with_ports(gen_random_connected(4, 6, f"smoke-p-{seed}", directed=True))
    check(s, f"ports {seed}")

print("smoke OK")

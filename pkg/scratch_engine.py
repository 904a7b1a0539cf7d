"""Smoke: engine + protocols across models."""
from histree.model import Awareness, gen_random_connected, static_schedule, with_ports
from histree.engine import ExecutorConfig, run, measure_stabilization, differential_oracle
from histree.protocols import ProtocolParams

# 1. view-builder vs ground truth digests (sync)
s = gen_random_connected(5, 12, seed=1, leaders=1)
trace, result = run(s, "view-builder")
oracle = differential_oracle(s, 12)
for t, rec in enumerate(trace.records):
    assert list(rec.digests) == oracle[t], f"digest mismatch at {t}"
print("1. view-builder == GT (sync)")

# 2. counting stabilizes to n
trace, result = run(s, "counting")
stab = measure_stabilization(trace, 5)
assert result.outputs == [5] * 5, result.outputs
assert stab <= 2 * 5 - 2, stab
print(f"2. counting -> 5, stab={stab} (bound {2*5-2})")

# 3. avg-consensus
s3 = gen_random_connected(4, 10, seed=7, labels=("1", "3"))
trace, result = run(s3, "avg-consensus")
from fractions import Fraction
want = Fraction(sum(Fraction(s3.inputs[a]) for a in range(4)), 4)
assert result.outputs == [want] * 4, (result.outputs, want)
print(f"3. avg-consensus -> {want}, stab={measure_stabilization(trace, want)}")

# 4. leader-election
trace, result = run(s, "leader-election")
outs = set(result.outputs)
assert len(outs) == 1 and None not in outs, result.outputs
print(f"4. leader-election -> common {list(outs)[0][:12]}")

# 5. counting-terminating (ell=1) within 3n-2
s5 = gen_random_connected(5, 20, seed=3, leaders=1)
trace, result = run(s5, "counting-terminating")
assert result.outputs == [5] * 5, result.outputs
assert all(ts is not None and ts <= 3 * 5 - 2 for ts in result.termination_step), result.termination_step
print(f"5. counting-terminating -> 5 at {result.termination_step} (bound {3*5-2})")

# 6. leader-election-terminating (n known)
trace, result = run(s5, "leader-election-terminating")
assert all(ts is not None for ts in result.termination_step), result.termination_step
assert len(set(result.outputs)) == 1 and None not in set(result.outputs)
print(f"6. leader-election-terminating at {result.termination_step}")

# 7. directed-counting (LATE awareness)
sd = gen_random_connected(5, 16, seed=11, directed=True, awareness=Awareness.LATE, leaders=1)
trace, result = run(sd, "directed-counting")
stab = measure_stabilization(trace, 5)
assert result.outputs == [5] * 5, result.outputs
assert stab <= 2 * 5 - 2, stab
print(f"7. directed-counting -> 5, stab={stab}")

# 8. port-counting (unique leader, PORT)
sp = gen_random_connected(4, 12, seed=13, directed=True, awareness=Awareness.PORT, leaders=1)
trace, result = run(sp, "port-counting")
assert result.outputs == [4] * 4, result.outputs
assert all(ts is not None and ts <= 2 * 4 - 1 for ts in result.termination_step), result.termination_step
print(f"8. port-counting -> 4 at {result.termination_step} (bound {2*4-1})")

# 9. semi-synchronous counting
ss = gen_random_connected(4, 24, seed=17, leaders=1, activation_prob=0.7)
trace, result = run(ss, "counting", ExecutorConfig(model="semi-synchronous"))
assert result.outputs == [4] * 4, result.outputs
print("9. semi-sync counting -> 4")

# 10. async-counting
sa = gen_random_connected(4, 40, seed=19, directed=True, awareness=Awareness.LATE, leaders=1, delay_max=2)
trace, result = run(sa, "async-counting", ExecutorConfig(model="asynchronous"))
assert result.outputs == [4] * 4, (result.outputs, trace.rounds)
print(f"10. async-counting -> 4, rounds={len(trace.rounds)}")

# 11. tau:2:counting on union-connected schedule (alternate halves of a cycle)
links_a = [(0, 1), (2, 3)]
links_b = [(1, 2), (3, 0)]
from histree.model import DynamicSchedule, Edge
def alt_schedule(t):
    steps = []
    for i in range(t):
        links = links_a if i % 2 == 0 else links_b
        es = []
        for u, v in links:
            es.append(Edge(u, v, 1))
            es.append(Edge(v, u, 1))
        steps.append(tuple(sorted(es)))
    return DynamicSchedule(n=4, directed=False, awareness=Awareness.NONE,
                           inputs=("LEADER", "A", "B", "A"), steps=tuple(steps))
st = alt_schedule(40)
trace, result = run(st, "tau:2:counting")
assert result.outputs == [4] * 4, result.outputs
print(f"11. tau:2:counting -> 4, stab={measure_stabilization(trace, 4)}")

trace, result = run(st, "tau:2:counting-terminating")
assert result.outputs == [4] * 4, result.outputs
assert all(ts is not None and ts <= 2 * (3 * 4 - 2) for ts in result.termination_step)
print(f"12. tau:2:counting-terminating at {result.termination_step} (bound {2*(3*4-2)})")

trace, result = run(st, "tau:auto:counting")
assert result.outputs == [4] * 4, result.outputs
print(f"13. tau:auto:counting -> 4, stab={measure_stabilization(trace, 4)}")

# 14. self-stab known n from corrupt states
from histree.engine import corrupt_states
s14 = gen_random_connected(4, 30, seed=23, leaders=1)
store, bad = corrupt_states(s14, seed=99)
trace, result = run(s14, "self-stab:counting", params=ProtocolParams(ell=1, n=4), initial_states=bad)
stab = measure_stabilization(trace, 4)
assert result.outputs == [4] * 4, result.outputs
assert stab <= 4 * 4, stab
print(f"14. self-stab:counting (n known) recovered, stab={stab} (bound {4*4})")

# 15. self-stab unknown n: heights equalize
store, bad = corrupt_states(s14, seed=100)
trace, result = run(s14, "self-stab:counting", params=ProtocolParams(ell=1), initial_states=bad)
hs = [st_.view.height for st_ in result.states]
assert len(set(hs)) == 1, hs
print(f"15. self-stab unknown n: heights equalized at {hs[0]}")

# 16. finite-state:counting quiesces on a static symmetric fixture
sq = static_schedule([(0, 1), (1, 2), (2, 3), (3, 0)], 4, 50, ("LEADER", "A", "B", "A"))
trace, result = run(sq, "finite-state:counting")
assert result.outputs == [4] * 4, result.outputs
quiesced = [e for e in trace.events if e["kind"] == "quiesced"]
woke = [e for e in trace.events if e["kind"] == "woke"]
digs = set()
for rec in trace.records[-10:]:
    digs.add(tuple(rec.digests))
assert len(digs) == 1, "digests did not plateau"
print(f"16. finite-state:counting -> 4, quiesced events={len(quiesced)}, woke={len(woke)}")

# 17. streaming-avg-consensus with varying inputs
import random as _r
rng = _r.Random(5)
T = 14
base = gen_random_connected(4, T, seed=29)
inputs = tuple(tuple(str(rng.randint(0, 9)) for _ in range(4)) for _ in range(T + 1))
sv = DynamicSchedule(n=4, directed=False, awareness=Awareness.NONE, inputs=inputs, steps=base.steps)
trace, result = run(sv, "streaming-avg-consensus")
lvl, mean = result.outputs[0]
want = Fraction(sum(Fraction(inputs[lvl][a]) for a in range(4)), 4)
assert mean == want, (mean, want)
assert len(set(result.outputs)) == 1
print(f"17. streaming -> level {lvl} mean {mean}, delay={T - lvl}")

# 18. byte-identical determinism
t1, _ = run(s, "counting")
t2, _ = run(s, "counting")
assert t1.to_jsonl() == t2.to_jsonl()
print("18. byte-identical reruns")

# 19. directed-counting-terminating on a simple directed corpus
sdt = gen_random_connected(4, 60, seed=31, directed=True, awareness=Awareness.LATE, leaders=1, multi=0.0)
trace, result = run(sdt, "directed-counting-terminating")
assert result.outputs == [4] * 4, (result.outputs, result.termination_step)
assert all(ts is not None for ts in result.termination_step), result.termination_step
print(f"19. directed-counting-terminating -> 4 at {result.termination_step}")

print("ALL ENGINE SMOKE OK")

from histree.model import gen_random_connected
from histree.nodes import NodeStore, Received
from histree.protocols import ProtocolParams, get_protocol, StepInfo
from histree.model import plan_deliveries

s = gen_random_connected(5, 20, seed=3, leaders=1)
plan = plan_deliveries(s)
proto = get_protocol("counting-terminating", ProtocolParams(ell=1))
store = NodeStore()
states = [proto.start(store, s.input_at(0, a)) for a in range(s.n)]
sent = [[st.view] for st in states]
for t in range(1, 15):
    for a in range(s.n):
        inbox = tuple(
            Received(view=sent[d.sender][d.send_step - 1], mult=d.mult)
            for d in plan.step_inbox(t, a)
        )
        info = StepInfo(step=t, input=s.input_at(t, a), outdeg=None, model="synchronous")
        states[a] = proto.step(states[a], inbox, info)
    for a in range(s.n):
        sent[a].append(states[a].view)
    st0 = states[0]
    st1 = states[1]
    print(
        f"t={t} a0 key={None if st0.key is None else (st0.key[0], st0.key[2])} since={st0.since} fin={st0.final} | "
        f"a1 key={None if st1.key is None else (st1.key[0], st1.key[2])} since={st1.since} fin={st1.final}"
    )

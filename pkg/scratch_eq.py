from histree.nodes import NodeStore, initial_view, merge_views, equalize, Received
from histree.nodes import DUMMY_INPUT

store = NodeStore()
vx = initial_view(store, "x")
vy = initial_view(store, "y")

# x advances two silent steps; its chain is x0 - x1 - x2
vx1 = merge_views(vx, [])
vx2 = merge_views(vx1, [])

# y hears x's latest state first
vy1 = equalize(merge_views(vy, [Received(vx2)], strict=False))
h1 = vy1.height
print("after fresh merge: height", h1)

# then a stale message from x's time 0 arrives
vy2 = equalize(merge_views(vy1, [Received(vx)], strict=False))
bot = vy2.store.node(vy2.bottom)
срcs = [vy2.store.node(s) for s, _, _, _ in bot.red_in]
print("red sources of new bottom:", [(n.level, n.input) for n in срcs])

# the stale source should have been walked down x's real chain, with at
# most one dummy pad at the end, not a three-dummy parallel branch
dummies = [c for c in vy2.nodes if vy2.store.node(c).input == DUMMY_INPUT]
print("dummy count:", len(dummies), "levels:", sorted(vy2.store.node(c).level for c in dummies))

again = equalize(vy2)
print("idempotent:", again is vy2)

# disciplined view passthrough
assert equalize(vx2) is vx2
print("disciplined fast path OK")

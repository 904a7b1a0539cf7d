"""Content-addressed history tree nodes and agent views.

A node stands for a class of agents that are indistinguishable after some
number of communication steps. Its identity is structural: a canonical code is
the sha256 of (level, input, parent code, sorted red in-edges, outdegree
annotation). Two nodes with equal codes are the same node, so hash-consing a
node store gives match-and-merge for free: merging two views is a set union of
their node codes plus one fresh bottom.

A view is the ancestor closure of a single bottom node. Every node of a view
lies on a directed path from the root to the bottom (black edges go parent to
child, red edges carry received-message multiplicities), which means a view is
closed under in-edges: if a node is present, its parent and all its red
sources are present with exact multiplicities.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import ContractViolation

# Reserved input labels. User alphabets must not start with "!'.
DUMMY_INPUT = "!inactive"
LEADER_INPUT = "LEADER"

# (source code, multiplicity, port or None, sender outdegree or None)
RedEntry = tuple[str, int, Optional[int], Optional[int]]


def _key(entry: RedEntry):
    src, mult, port, srcdeg = entry
    return (src, -1 if port is None else port, -1 if srcdeg is None else srcdeg, mult)


def canonical_red(entries: Iterable[RedEntry]) -> tuple[RedEntry, ...]:
    return tuple(sorted(entries, key=_key))


@dataclass(frozen=True, eq=False)
class HNode:
    level: int
    input: Optional[str]  # None only for the root
    parent: Optional[str]  # code, None only for the root
    red_in: tuple[RedEntry, ...]
    outdeg: Optional[int]  # annotation on the black edge from the parent
    code: str

    @property
    def is_dummy(self) -> bool:
        return self.input == DUMMY_INPUT


def _digest(level, input_label, parent, red_in, outdeg) -> str:
    parts = [
        str(level),
        "" if input_label is None else input_label,
        "" if parent is None else parent,
        "x" if outdeg is None else str(outdeg),
    ]
    for src, mult, port, srcdeg in red_in:
        parts.append(
            f"{src},{mult},{'x' if port is None else port},{'x' if srcdeg is None else srcdeg}"
        )
    return hashlib.sha256("\x1f".join(parts).encode()).hexdigest()


class NodeStore:
    """Append-only hash-consed node table shared by all views of one run."""

    def __init__(self):
        self._nodes: dict[str, HNode] = {}
        self._closures: dict[str, frozenset[str]] = {}
        self.root = self.intern(-1, None, None, (), None)

    def intern(self, level, input_label, parent, red_in, outdeg) -> str:
        red_in = canonical_red(red_in)
        code = _digest(level, input_label, parent, red_in, outdeg)
        if code not in self._nodes:
            self._nodes[code] = HNode(level, input_label, parent, red_in, outdeg, code)
        return code

    def adopt(self, node: HNode) -> None:
        # Codes are content-addressed, so records can be copied across stores.
        self._nodes.setdefault(node.code, node)

    def node(self, code: str) -> HNode:
        return self._nodes[code]

    def __contains__(self, code: str) -> bool:
        return code in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def closure(self, code: str) -> frozenset[str]:
        """Ancestor closure of a node under parent and red-source edges."""
        memo = self._closures
        got = memo.get(code)
        if got is not None:
            return got
        # Iterative exit-marked DFS; views can be thousands of levels tall,
        # and undisciplined merges may hold red edges between equal levels,
        # so dependency order cannot be recovered from levels alone.
        stack = [(code, False)]
        seen = set()
        post = []
        while stack:
            c, exiting = stack.pop()
            if exiting:
                post.append(c)
                continue
            if c in seen or c in memo:
                continue
            seen.add(c)
            stack.append((c, True))
            n = self._nodes[c]
            if n.parent is not None and n.parent not in memo:
                stack.append((n.parent, False))
            for src, _, _, _ in n.red_in:
                if src not in memo:
                    stack.append((src, False))
        for c in post:
            n = self._nodes[c]
            acc = {c}
            if n.parent is not None:
                acc |= memo[n.parent]
            for src, _, _, _ in n.red_in:
                acc |= memo[src]
            memo[c] = frozenset(acc)
        return memo[code]


@dataclass(eq=False)
class View:
    """Ancestor-closed fragment with a unique bottom node."""

    store: NodeStore
    bottom: str
    nodes: frozenset[str]

    @property
    def digest(self) -> str:
        # A view is the closure of its bottom, so the bottom code identifies it.
        return self.bottom

    @property
    def height(self) -> int:
        return self.store.node(self.bottom).level

    def node(self, code: str) -> HNode:
        return self.store.node(code)

    def levels(self) -> dict[int, list[HNode]]:
        got = self.__dict__.get("_levels")
        if got is None:
            got = {}
            for c in self.nodes:
                n = self.store.node(c)
                got.setdefault(n.level, []).append(n)
            for lst in got.values():
                lst.sort(key=lambda n: n.code)
            self.__dict__["_levels"] = got
        return got

    def level_nodes(self, level: int) -> list[HNode]:
        return self.levels().get(level, [])

    def children(self) -> dict[str, list[str]]:
        """Black child lists restricted to this view, sorted by code."""
        got = self.__dict__.get("_children")
        if got is None:
            got = {}
            for c in self.nodes:
                n = self.store.node(c)
                if n.parent is not None:
                    got.setdefault(n.parent, []).append(c)
            for lst in got.values():
                lst.sort()
            self.__dict__["_children"] = got
        return got

    def red_out(self) -> dict[str, list[tuple[str, int, Optional[int], Optional[int]]]]:
        """Outgoing red edges per node (target, mult, port, srcdeg)."""
        got = self.__dict__.get("_red_out")
        if got is None:
            got = {}
            for c in self.nodes:
                n = self.store.node(c)
                for src, mult, port, srcdeg in n.red_in:
                    got.setdefault(src, []).append((c, mult, port, srcdeg))
            for lst in got.values():
                lst.sort()
            self.__dict__["_red_out"] = got
        return got

    def own_input(self) -> Optional[str]:
        """Input label of the bottom chain, skipping dummy filler nodes."""
        c = self.bottom
        while c is not None:
            n = self.store.node(c)
            if n.input is not None and not n.is_dummy:
                return n.input
            c = n.parent
        return None


def initial_view(store: NodeStore, input_label: str) -> View:
    code = store.intern(0, input_label, store.root, (), None)
    return View(store, code, frozenset((store.root, code)))


@dataclass(frozen=True)
class Received:
    """One distinct view in an inbox, with its reception multiplicity."""

    view: View
    mult: int = 1
    port: Optional[int] = None
    srcdeg: Optional[int] = None


def merge_views(
    own: View,
    received: Sequence[Received],
    *,
    input_label: Optional[str] = None,
    outdeg: Optional[int] = None,
    strict: bool = True,
) -> View:
    """Match-and-merge: one new bottom, red edges from every received bottom.

    Identical received views (same bottom, same port and sender-degree tag)
    collapse into a single red edge with summed multiplicity. In strict mode
    all received views must have the bottom at the same level as our own.
    Semi-synchronous callers pass strict=False and run equalize() on the
    result; asynchronous callers keep the level-spanning red edges as they
    are, since padding a sender's unknown later history would only conflict
    with it once it arrives.
    """
    store = own.store
    if input_label is None:
        input_label = own.own_input()
    grouped: dict[tuple[str, Optional[int], Optional[int]], int] = {}
    all_nodes = set(own.nodes)
    for r in received:
        if r.mult < 1:
            raise ContractViolation("received multiplicity must be positive")
        v = r.view
        if strict and v.height != own.height:
            raise ContractViolation(
                f"level mismatch in strict merge: own height {own.height}, "
                f"received {v.height}; equalize first in semi-synchronous mode"
            )
        if v.store is not store:
            for c in v.nodes:
                store.adopt(v.store.node(c))
        all_nodes |= v.nodes
        key = (v.bottom, r.port, r.srcdeg)
        grouped[key] = grouped.get(key, 0) + r.mult
    red = canonical_red(
        (src, mult, port, srcdeg) for (src, port, srcdeg), mult in grouped.items()
    )
    level = own.height + 1
    bottom = store.intern(level, input_label, own.bottom, red, outdeg)
    all_nodes.add(bottom)
    return View(store, bottom, frozenset(all_nodes))


def _edge_targets(store: NodeStore, nodes: frozenset[str]) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {c: [] for c in nodes}
    for c in nodes:
        n = store.node(c)
        if n.parent is not None:
            out[n.parent].append(c)
        for src, _, _, _ in n.red_in:
            out[src].append(c)
    return out


def _topological(store: NodeStore, nodes: frozenset[str]) -> list[str]:
    out = _edge_targets(store, nodes)
    indeg = {c: 0 for c in nodes}
    for c, targets in out.items():
        for t in targets:
            indeg[t] += 1
    ready = sorted(c for c, d in indeg.items() if d == 0)
    order = []
    while ready:
        c = ready.pop()
        order.append(c)
        for t in out[c]:
            indeg[t] -= 1
            if indeg[t] == 0:
                ready.append(t)
    if len(order) != len(nodes):
        raise ContractViolation("view contains a cycle")
    return order


def equalize(view: View) -> View:
    """Insert dummy nodes so every edge advances exactly one level.

    Semi-synchronous merges produce red edges that skip levels or point
    upward in height terms. The corrected level of a node is the longest
    root path to it. A black gap is filled with a chain of reserved
    "inactive" nodes: the agents slept through those steps. A red gap first
    follows the source's real descent while it is unique in the view (the
    message still came from that chain of classes), and only pads the
    remainder with inactive nodes. Idempotent: a disciplined view is
    returned unchanged (same object).
    """
    store = view.store
    order = _topological(store, view.nodes)
    lam: dict[str, int] = {}
    disciplined = True
    for c in order:
        n = store.node(c)
        best = -1 if n.parent is None else lam[n.parent] + 1
        for src, _, _, _ in n.red_in:
            best = max(best, lam[src] + 1)
        lam[c] = best
        if best != n.level:
            disciplined = False
        elif n.parent is not None and lam[n.parent] != best - 1:
            disciplined = False
        else:
            for src, _, _, _ in n.red_in:
                if lam[src] != best - 1:
                    disciplined = False
                    break
    if disciplined:
        return view

    new_nodes: set[str] = set()
    mapped: dict[str, str] = {}
    kids = _black_children(store, view.nodes)

    def raise_to(code: str, target_level: int) -> str:
        cur = code
        level = store.node(cur).level
        while level < target_level:
            cur = store.intern(level + 1, DUMMY_INPUT, cur, (), None)
            new_nodes.add(cur)
            level += 1
        return cur

    def red_source(orig: str, target_level: int) -> str:
        cur = orig
        while lam[cur] < target_level:
            step = kids.get(cur, ())
            if len(step) == 1 and lam[step[0]] <= target_level:
                cur = step[0]
            else:
                break
        return raise_to(mapped[cur], target_level)

    # Nodes are interned in corrected-level order so that every red source,
    # and any real descent it is re-routed through, is already mapped.
    for c in sorted(order, key=lambda code: (lam[code], code)):
        n = store.node(c)
        if n.parent is None:
            mapped[c] = c
            new_nodes.add(c)
            continue
        parent = raise_to(mapped[n.parent], lam[c] - 1)
        red = []
        for src, mult, port, srcdeg in n.red_in:
            red.append((red_source(src, lam[c] - 1), mult, port, srcdeg))
        code = store.intern(lam[c], n.input, parent, red, n.outdeg)
        mapped[c] = code
        new_nodes.add(code)
    return View(store, mapped[view.bottom], frozenset(new_nodes))


def _black_children(store: NodeStore, nodes: frozenset[str]) -> dict[str, tuple[str, ...]]:
    out: dict[str, list[str]] = {}
    for c in nodes:
        p = store.node(c).parent
        if p is not None:
            out.setdefault(p, []).append(c)
    return {p: tuple(sorted(cs)) for p, cs in out.items()}


def delete_level0_and_remerge(view: View) -> View:
    """Forget the oldest recorded step of a view.

    Level 0 is removed, level 1 reattaches to the root with its red in-edges
    dropped (their sources no longer exist), and nodes whose ancestor-closed
    fragments become isomorphic merge top-down, summing red multiplicities.
    Input labels ride along: they are re-observable, not forgotten.
    """
    if view.height < 1:
        raise ContractViolation("cannot delete the base level of a height-0 view")
    store = view.store
    order = _topological(store, view.nodes)
    mapped: dict[str, str] = {}
    new_nodes: set[str] = set()
    for c in order:
        n = store.node(c)
        if n.parent is None:
            mapped[c] = c
            new_nodes.add(c)
            continue
        if n.level == 0:
            continue  # deleted
        if n.level == 1:
            code = store.intern(0, n.input, store.root, (), None)
        else:
            grouped: dict[tuple[str, Optional[int], Optional[int]], int] = {}
            for src, mult, port, srcdeg in n.red_in:
                src2 = mapped.get(src)
                if src2 is None:
                    continue
                key = (src2, port, srcdeg)
                grouped[key] = grouped.get(key, 0) + mult
            red = [(s, m, p, d) for (s, p, d), m in grouped.items()]
            code = store.intern(n.level - 1, n.input, mapped[n.parent], red, n.outdeg)
        mapped[c] = code
        new_nodes.add(code)
    return View(store, mapped[view.bottom], frozenset(new_nodes))


def well_formed(view: View) -> bool:
    """Whether the view could have been produced by a synchronous execution.

    Checks the structural contract end to end: the node set is exactly the
    ancestor closure of the bottom, the only parentless node is the root at
    level -1, levels advance one at a time along black edges, every red edge
    joins consecutive levels with positive multiplicity, and the bottom is
    the unique sink. Corrupt agent memories fail here and trigger a reset.
    """
    store = view.store
    if view.bottom not in view.nodes:
        return False
    if view.nodes != store.closure(view.bottom):
        return False
    has_in: set[str] = set()
    for c in view.nodes:
        n = store.node(c)
        if n.parent is None:
            if n.level != -1 or n.input is not None or n.red_in or c != store.root:
                return False
            continue
        if n.input is None or n.parent not in view.nodes:
            return False
        if store.node(n.parent).level != n.level - 1:
            return False
        has_in.add(n.parent)
        for src, mult, _port, _deg in n.red_in:
            if mult < 1 or src not in view.nodes:
                return False
            if store.node(src).level != n.level - 1:
                return False
            has_in.add(src)
    sinks = [c for c in view.nodes if c not in has_in]
    return sinks == [view.bottom]

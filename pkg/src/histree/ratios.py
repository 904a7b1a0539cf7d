"""Anonymity solvers over views: ratio propagation, linear systems, guesses.

Everything here is exact. Ratios are fractions, systems are solved by
fraction-free elimination, and any structural defect (disconnected slice,
wrong nullity, non-integral scaling) raises instead of being papered over.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Optional, Sequence

from .errors import ContractViolation, NonIntegralScale, NullityFault, PartialAssignment
from .nodes import LEADER_INPUT, View


def _unique_child(view: View, code: str) -> Optional[str]:
    kids = view.children().get(code, [])
    return kids[0] if len(kids) == 1 else None


def find_nonbranching_level(view: View, min_level: int = 0) -> Optional[int]:
    """Smallest level >= min_level whose every node has exactly one child here.

    An absent or multiple child disqualifies the node: with no child there is
    nothing to balance messages against, and with two the anonymity splits.
    """
    for level in range(min_level, view.height):
        nodes = view.level_nodes(level)
        if nodes and all(_unique_child(view, n.code) is not None for n in nodes):
            return level
    return None


def _slice_red(view: View, level: int) -> dict[str, dict[str, int]]:
    """Red multiplicities src -> target-parent for the slice level -> level+1.

    Entry m[u][v] is the number of messages each agent below v's unique child
    received from class u; ports collapse (total copies is what balances).
    """
    out: dict[str, dict[str, int]] = {}
    for tgt in view.level_nodes(level + 1):
        parent = tgt.parent
        for src, mult, _port, _deg in tgt.red_in:
            if view.node(src).level != level:
                continue
            out.setdefault(src, {})
            out[src][parent] = out[src].get(parent, 0) + mult
    return out


@dataclass(frozen=True)
class RatioAssignment:
    """Exact anonymity ratios for one level and its ancestors, basis node = 1."""

    level: int
    level_codes: tuple[str, ...]
    ratios: dict[str, Fraction]

    def total(self) -> Fraction:
        return sum((self.ratios[c] for c in self.level_codes), Fraction(0))


def solve_ratios_undirected(view: View, level: int) -> RatioAssignment:
    """Propagate message-balance ratios across a non-branching level.

    For nodes u, v with unique children u', v' and mutual red edges, the link
    count balance m(v,u') * a(u) = m(u,v') * a(v) fixes a(v)/a(u). A breadth
    first sweep from the smallest-code node covers the level when its red
    graph is connected; then anonymities of ancestors are the sums of their
    children's, computed level by level toward the root.
    """
    nodes = view.level_nodes(level)
    if not nodes:
        raise ContractViolation(f"no nodes at level {level}")
    for n in nodes:
        if _unique_child(view, n.code) is None:
            raise ContractViolation(f"level {level} is branching at {n.code[:12]}")
    red = _slice_red(view, level)
    codes = [n.code for n in nodes]
    basis = min(codes)
    ratios: dict[str, Fraction] = {basis: Fraction(1)}
    frontier = [basis]
    while frontier:
        u = frontier.pop()
        for v in codes:
            if v == u:
                continue
            m_uv = red.get(u, {}).get(v, 0)  # u -> v's child
            m_vu = red.get(v, {}).get(u, 0)  # v -> u's child
            if m_uv == 0 or m_vu == 0:
                continue
            value = ratios[u] * Fraction(m_vu, m_uv)
            if v in ratios:
                if ratios[v] != value:
                    raise ContractViolation(
                        "inconsistent ratio cycle; links are not bidirectional"
                    )
                continue
            ratios[v] = value
            frontier.append(v)
    unreached = sorted(c for c in codes if c not in ratios)
    if unreached:
        raise PartialAssignment(unreached)
    for lv in range(level - 1, -2, -1):
        for n in view.level_nodes(lv):
            kids = view.children().get(n.code, [])
            if kids and all(k in ratios for k in kids):
                ratios[n.code] = sum((ratios[k] for k in kids), Fraction(0))
    return RatioAssignment(level, tuple(sorted(codes)), ratios)


def scale_with_leaders(assignment: RatioAssignment, leader_node: str, ell: int) -> dict[str, int]:
    """Turn ratios into exact anonymities given that a(leader_node) = ell."""
    if leader_node not in assignment.ratios:
        raise ContractViolation("leader node is outside the solved assignment")
    factor = Fraction(ell) / assignment.ratios[leader_node]
    scaled: dict[str, int] = {}
    for code, r in assignment.ratios.items():
        value = r * factor
        if value.denominator != 1 or value <= 0:
            raise NonIntegralScale(
                f"scaling by {factor} puts {value} agents at {code[:12]}"
            )
        scaled[code] = int(value)
    return scaled


# ---------------------------------------------------------------------------
# Directed systems


@dataclass(frozen=True)
class DirectedSystem:
    """Message-balance equations over the chains of a non-branching interval.

    order[i] is the chain's node at the interval's first level; rows stack one
    equation per (step, chain): sent copies minus received copies equals zero.
    """

    lo: int
    hi: int
    order: tuple[str, ...]
    rows: tuple[tuple[int, ...], ...]


def build_directed_system(view: View, interval: tuple[int, int]) -> DirectedSystem:
    lo, hi = interval
    if not lo < hi:
        raise ContractViolation("interval must span at least one step")
    start = view.level_nodes(lo)
    if not start:
        raise ContractViolation(f"no nodes at level {lo}")
    order = tuple(sorted(n.code for n in start))
    index = {c: i for i, c in enumerate(order)}
    chain_at = dict(index)  # node code -> chain index, extended level by level
    k = len(order)
    rows: list[tuple[int, ...]] = []
    for level in range(lo, hi):
        child_of: dict[int, str] = {}
        for code, ci in [(c, chain_at[c]) for c in list(chain_at) if view.node(c).level == level]:
            child = _unique_child(view, code)
            if child is None:
                raise ContractViolation(f"level {level} is branching at {code[:12]}")
            chain_at[child] = ci
            child_of[ci] = child
        received = [[0] * k for _ in range(k)]  # [sender chain][receiver chain]
        for ci, child in child_of.items():
            for src, mult, _port, _deg in view.node(child).red_in:
                si = chain_at.get(src)
                if si is None or view.node(src).level != level:
                    raise ContractViolation("red edge crosses outside the interval")
                received[si][ci] += mult
        for si in range(k):
            child_node = view.node(child_of[si])
            deg = child_node.outdeg
            if deg is None:
                # An inactive (dummy) transition sends nothing: that is a
                # known outdegree of zero, not a missing annotation.
                if child_node.is_dummy:
                    deg = 0
                else:
                    raise ContractViolation(
                        "missing outdegree annotation; directed solving needs outdegree awareness"
                    )
            row = [-received[si][ci] for ci in range(k)]
            row[si] += deg
            rows.append(tuple(row))
    return DirectedSystem(lo, hi, order, tuple(rows))


def build_spanning_system(view: View, window: tuple[int, int]) -> Optional[DirectedSystem]:
    """Balance rows for a level window of a view whose red edges span levels.

    Asynchronous merges leave red edges crossing any number of levels, in
    either height direction. Levels then count an agent's own events, so
    every chain passes through every level and the chains crossing a window
    partition the population. Each parent-to-child transition inside the
    window, with its outdegree annotation, yields one sent-equals-received
    row; rows are summed per chain, giving one k x k system.

    A transition whose witnessed receipts are missing or land outside the
    window cannot be balanced and is dropped (any subset of exact rows is
    still exact). A node that visibly branches below the top level splits
    its class inside the window, which voids the window: that is raised as
    a ContractViolation since no larger top can mend it. Returns None when
    the window yields no balanced row at all.
    """
    lo, hi = window
    if not 0 <= lo < hi:
        raise ContractViolation("window must span at least one level")
    store = view.store
    inside: dict[str, int] = {}
    for c in view.nodes:
        n = store.node(c)
        if n.parent is not None and lo <= n.level <= hi:
            inside[c] = n.level
    if not inside:
        return None
    children = view.children()
    next_in: dict[str, Optional[str]] = {}
    heads: list[str] = []
    for c, level in inside.items():
        kids = children.get(c, [])
        if level < hi:
            if len(kids) > 1:
                raise ContractViolation(f"window splits at {c[:12]}")
            next_in[c] = kids[0] if kids else None
        else:
            next_in[c] = None
        parent = store.node(c).parent
        if parent not in inside:
            heads.append(c)
    order = tuple(sorted(heads))
    k = len(order)
    chain_at: dict[str, int] = {}
    for i, head in enumerate(order):
        cur: Optional[str] = head
        while cur is not None:
            chain_at[cur] = i
            cur = next_in[cur]
    red_out: dict[str, list[tuple[str, int]]] = {}
    for c in view.nodes:
        for src, mult, _port, _deg in store.node(c).red_in:
            if src in inside and inside[src] < hi:
                red_out.setdefault(src, []).append((c, mult))
    rows = [[0] * k for _ in range(k)]
    balanced = False
    for c, level in inside.items():
        child = next_in[c]
        if child is None or level >= hi:
            continue
        deg = store.node(child).outdeg
        if deg is None:
            if store.node(child).is_dummy:
                deg = 0
            else:
                raise ContractViolation(
                    "missing outdegree annotation; directed solving needs outdegree awareness"
                )
        if deg == 0:
            continue  # nothing was sent, nothing to balance
        targets = red_out.get(c, [])
        if not targets or any(t not in chain_at for t, _ in targets):
            continue  # some receipt unseen or outside the window: unbalanced
        si = chain_at[c]
        rows[si][si] += deg
        for t, mult in targets:
            rows[si][chain_at[t]] -= mult
        balanced = True
    if not balanced:
        return None
    return DirectedSystem(lo, hi, order, tuple(tuple(r) for r in rows))


def _bareiss_echelon(rows: list[list[int]], cols: int) -> tuple[list[list[int]], list[int]]:
    """Fraction-free forward elimination; returns echelon rows and pivot cols."""
    rows = [list(r) for r in rows]
    pivots: list[int] = []
    prev = 1
    r = 0
    for c in range(cols):
        pivot_row = None
        for i in range(r, len(rows)):
            if rows[i][c] != 0:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        p = rows[r][c]
        for i in range(r + 1, len(rows)):
            for j in range(c + 1, cols):
                rows[i][j] = (p * rows[i][j] - rows[i][c] * rows[r][j]) // prev
            rows[i][c] = 0
        prev = p
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def nullspace_rank1(system: DirectedSystem | Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Solve A x = 0 expecting a one-dimensional, strictly positive solution.

    Returns the null vector normalized to the smallest positive integers.
    Nullity 0 or >= 2 means the interval was not genuinely non-branching and
    strongly connected, which is a detectable input fault, not a case to
    guess through.
    """
    rows = system.rows if isinstance(system, DirectedSystem) else [tuple(r) for r in system]
    if not rows:
        raise ContractViolation("empty system")
    cols = len(rows[0])
    echelon, pivots = _bareiss_echelon([list(r) for r in rows], cols)
    nullity = cols - len(pivots)
    if nullity != 1:
        raise NullityFault(nullity)
    free = next(c for c in range(cols) if c not in pivots)
    x = [Fraction(0)] * cols
    x[free] = Fraction(1)
    for row, pc in reversed(list(zip(echelon, pivots))):
        s = sum((Fraction(row[j]) * x[j] for j in range(pc + 1, cols)), Fraction(0))
        x[pc] = -s / row[pc]
    denom_lcm = 1
    for v in x:
        denom_lcm = denom_lcm * v.denominator // gcd(denom_lcm, v.denominator)
    ints = [int(v * denom_lcm) for v in x]
    if all(v < 0 for v in ints):
        ints = [-v for v in ints]
    if any(v <= 0 for v in ints):
        raise NullityFault(1)
    g = 0
    for v in ints:
        g = gcd(g, v)
    return tuple(v // g for v in ints)


# ---------------------------------------------------------------------------
# Guessing pipeline


@dataclass
class GuessTable:
    guesses: dict[str, int] = field(default_factory=dict)
    weights: dict[str, int] = field(default_factory=dict)
    confirmed: dict[str, int] = field(default_factory=dict)


def is_guesser(view: View, code: str, known: dict[str, int]) -> bool:
    """Known anonymity whose known children account for all of it."""
    if code not in known:
        return False
    kids = view.children().get(code, [])
    if not kids or any(k not in known for k in kids):
        return False
    return sum(known[k] for k in kids) == known[code]


def make_guess(view: View, guesser: str, target: str, known: dict[str, int]) -> int:
    """Bound the anonymity of a red-edge target by balancing link counts.

    Messages between the guesser's agents and the target's parent class are
    counted on the guesser's side exactly (all children known); on the other
    side the target's share is whatever its known siblings do not account
    for. The result can only overshoot, and is exact when the target has no
    siblings at all.
    """
    if not is_guesser(view, guesser, known):
        raise ContractViolation("guesser's anonymity or children are not all known")
    tnode = view.node(target)
    m_gt = 0
    for src, mult, _port, _deg in tnode.red_in:
        if src == guesser:
            m_gt += mult
    if m_gt == 0:
        raise ContractViolation("no red edge from guesser to target")
    parent = tnode.parent
    sent_to_guesser = 0  # copies from the target's parent class into guesser's children
    for kid in view.children().get(guesser, []):
        for src, mult, _port, _deg in view.node(kid).red_in:
            if src == parent:
                sent_to_guesser += mult * known[kid]
    budget = sent_to_guesser
    for sib in view.children().get(parent, []):
        if sib == target or sib not in known:
            continue
        m_gs = sum(m for src, m, _p, _d in view.node(sib).red_in if src == guesser)
        budget -= m_gs * known[sib]
    if budget < m_gt:
        raise ContractViolation("message balance leaves no agents for the target")
    return budget // m_gt


def compute_weights(view: View, guesses: dict[str, int]) -> dict[str, int]:
    """w(v) = number of guessed nodes in the black subtree hanging from v."""
    weights: dict[str, int] = {}
    order = sorted(view.nodes, key=lambda c: -view.node(c).level)
    for c in order:
        w = 1 if c in guesses else 0
        for kid in view.children().get(c, []):
            w += weights[kid]
        weights[c] = w
    return weights


def resolve_heavy(table: GuessTable, view: View) -> Optional[tuple[str, int]]:
    """Confirm the deepest guess whose subtree already outweighs it.

    Precondition (checked): guesses are well spread, meaning no two siblings
    both carry one. Among guessed nodes v with w(v) >= g(v), the deepest one
    is necessarily exact; ties are broken by canonical code.
    """
    by_parent: dict[Optional[str], int] = {}
    for code in table.guesses:
        p = view.node(code).parent
        by_parent[p] = by_parent.get(p, 0) + 1
        if by_parent[p] > 1:
            raise ContractViolation("guesses are not well spread: guessed siblings")
    weights = compute_weights(view, table.guesses)
    table.weights = weights
    heavy = [
        c for c, g in table.guesses.items() if weights[c] >= g
    ]
    if not heavy:
        return None
    best = max(heavy, key=lambda c: (view.node(c).level, c))
    return best, table.guesses[best]


# ---------------------------------------------------------------------------
# Directed upper-bound propagation


@dataclass(frozen=True)
class UpperBoundTable:
    """Per-branch anonymity upper bounds over a non-branching interval."""

    lo: int
    hi: int
    order: tuple[str, ...]  # chain heads at level lo
    anchors: dict[str, tuple[str, int]]  # chain head -> (anchor node, bound)
    pending: tuple[str, ...]  # chain heads still unbounded

    @property
    def complete(self) -> bool:
        return not self.pending

    def total(self) -> int:
        if not self.complete:
            raise ContractViolation("bounds are incomplete")
        return sum(b for _, b in self.anchors.values())


def propagate_upper_bounds(view: View, interval: tuple[int, int], ell: int) -> UpperBoundTable:
    """Spread anonymity upper bounds branch to branch along red edges.

    A bounded branch with bound U emits the estimate (outdegree * U) along
    every red edge leaving its nodes below the anchor. A branch that has
    collected estimates on U distinct nodes from one source accepts the
    maximum of them as the bound of the deepest such node: hidden branching
    can spoil at most U - 1 of the estimates.
    """
    lo, hi = interval
    system = build_directed_system(view, interval)  # validates the interval shape
    order = system.order
    chain_at: dict[str, int] = {c: i for i, c in enumerate(order)}
    chain_nodes: dict[int, list[str]] = {i: [c] for i, c in enumerate(order)}
    for level in range(lo, hi):
        for code in [c for c in list(chain_at) if view.node(c).level == level]:
            child = _unique_child(view, code)
            chain_at[child] = chain_at[code]
            chain_nodes[chain_at[code]].append(child)
    bounds: dict[int, tuple[str, int]] = {}
    for i, head in enumerate(order):
        if view.node(head).input == LEADER_INPUT:
            bounds[i] = (head, ell)
    while True:
        # Emit every estimate afresh from the current bounds, then see which
        # branches have collected enough of them to accept one.
        estimates: dict[tuple[int, int], dict[str, int]] = {}
        for si, (anchor, u_i) in sorted(bounds.items()):
            anchor_level = view.node(anchor).level
            for node in chain_nodes[si]:
                nlevel = view.node(node).level
                if nlevel < anchor_level or nlevel >= hi:
                    continue
                child = _unique_child(view, node)
                deg = view.node(child).outdeg
                for tgt, _mult, _port, _deg in view.red_out().get(node, []):
                    ti = chain_at.get(tgt)
                    if ti is None or ti == si:
                        continue
                    estimates.setdefault((si, ti), {})[tgt] = deg * u_i
        new_bounds = dict(bounds)
        for (si, ti), cell in sorted(estimates.items()):
            u_i = bounds[si][1]
            if len(cell) < u_i:
                continue
            picked = sorted(cell.items(), key=lambda kv: (view.node(kv[0]).level, kv[0]))[:u_i]
            deepest = picked[-1][0]
            bound = max(v for _, v in picked)
            if ti not in new_bounds or bound < new_bounds[ti][1]:
                new_bounds[ti] = (deepest, bound)
        if new_bounds == bounds:
            break
        bounds = new_bounds
    anchors = {order[i]: ab for i, ab in bounds.items()}
    pending = tuple(c for c in order if c not in anchors)
    return UpperBoundTable(lo, hi, order, anchors, pending)


# ---------------------------------------------------------------------------
# Round intervals: several consecutive slices solved as one aggregate


def aggregate_interval_rows(system: DirectedSystem) -> tuple[tuple[int, ...], ...]:
    """Collapse a stacked interval system into one balance row per chain.

    Message counts sent and received within a window of steps balance in the
    aggregate even when no single step's graph is connected, and the same
    Perron argument applies to the summed matrix once its support is strongly
    connected. Sparse or asynchronous traffic is handled this way.
    """
    k = len(system.order)
    rows = [[0] * k for _ in range(k)]
    for idx, row in enumerate(system.rows):
        si = idx % k
        for j, v in enumerate(row):
            rows[si][j] += v
    return tuple(tuple(r) for r in rows)


def support_strongly_connected(rows: Sequence[Sequence[int]]) -> bool:
    """True when the off-diagonal support of the aggregate forms one SCC.

    rows[i][j] < 0 for i != j records that chain i received from chain j,
    i.e. an arc j -> i in the communication sum.
    """
    k = len(rows)
    if k == 0:
        return False
    fwd: list[list[int]] = [[] for _ in range(k)]
    rev: list[list[int]] = [[] for _ in range(k)]
    for i in range(k):
        for j in range(k):
            if i != j and rows[i][j] < 0:
                fwd[j].append(i)
                rev[i].append(j)

    def reach(adj: list[list[int]]) -> int:
        seen = {0}
        stack = [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen)

    return reach(fwd) == k and reach(rev) == k


def solve_ratios_window(view: View, lo: int, hi: int) -> RatioAssignment:
    """Undirected ratio propagation over the aggregated slices lo..hi-1.

    Every level in [lo, hi) must be non-branching, so nodes at level lo head
    chains through the window. Message totals between two chains are equal in
    both directions, which fixes the anonymity ratio pair by pair; a window
    wide enough to contain a communication round has a connected aggregate
    and the sweep covers every chain.
    """
    if hi <= lo:
        raise ContractViolation("empty window")
    if hi > view.height:
        raise ContractViolation(f"window reaches level {hi}, view has {view.height}")
    heads = [n.code for n in view.level_nodes(lo)]
    if not heads:
        raise ContractViolation(f"no nodes at level {lo}")
    chain_of: dict[str, int] = {}
    at: list[str] = list(heads)
    for i, c in enumerate(at):
        chain_of[c] = i
    totals: dict[tuple[int, int], int] = {}
    for level in range(lo, hi):
        step_at: list[str] = []
        for c in at:
            child = _unique_child(view, c)
            if child is None:
                raise ContractViolation(f"level {level} is branching at {c[:12]}")
            step_at.append(child)
            chain_of[child] = chain_of[c]
        for i, child in enumerate(step_at):
            for src, mult, _port, _deg in view.node(child).red_in:
                j = chain_of.get(src)
                if j is None or j == i:
                    continue
                totals[(j, i)] = totals.get((j, i), 0) + mult
        at = step_at
    codes = sorted(heads)
    basis = min(codes)
    ratios: dict[str, Fraction] = {basis: Fraction(1)}
    frontier = [basis]
    while frontier:
        u = frontier.pop()
        ui = chain_of[u]
        for v in codes:
            if v == u:
                continue
            vi = chain_of[v]
            m_uv = totals.get((ui, vi), 0)
            m_vu = totals.get((vi, ui), 0)
            if m_uv == 0 or m_vu == 0:
                continue
            value = ratios[u] * Fraction(m_vu, m_uv)
            if v in ratios:
                if ratios[v] != value:
                    raise ContractViolation(
                        "inconsistent ratio cycle; links are not bidirectional"
                    )
                continue
            ratios[v] = value
            frontier.append(v)
    unreached = sorted(c for c in codes if c not in ratios)
    if unreached:
        raise PartialAssignment(unreached)
    for lv in range(lo - 1, -2, -1):
        for n in view.level_nodes(lv):
            kids = view.children().get(n.code, [])
            if kids and all(k in ratios for k in kids):
                ratios[n.code] = sum((ratios[k] for k in kids), Fraction(0))
    return RatioAssignment(lo, tuple(codes), ratios)

"""Conversions between a run's record and classic static-network structures.

For a static network, once two consecutive levels have the same node count
the partition of agents has stabilized forever, and the record's slice at
that point is the network's quotient: the smallest multigraph producing an
identical record. Views relate the same way to walk-based structures: the
red-edge skeleton of a view is a compressed encoding of all walks into the
observer, and unraveling it recovers the explicit walk tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import CapExceeded, ContractViolation, NotStabilized
from .nodes import View
from .truth import GroundTruth


@dataclass(frozen=True)
class QuotientGraph:
    """Directed multigraph on stabilized classes; arc weight (u, v) -> m means
    each agent of class v receives m messages per step from class u."""

    level: int
    nodes: tuple[str, ...]
    arcs: dict[tuple[str, str], int]
    fiber_sizes: dict[str, int]

    def out_weight(self, u: str) -> int:
        return sum(m for (a, _b), m in self.arcs.items() if a == u)


def minimum_base(gt: GroundTruth) -> QuotientGraph:
    """Contract the black edges of the first repeated-size slice."""
    sizes = gt.level_sizes()
    stable = None
    for s in range(len(sizes) - 1):
        if sizes[s] == sizes[s + 1]:
            stable = s
            break
    if stable is None:
        raise NotStabilized(
            f"level sizes {sizes} keep refining within the horizon; run longer"
        )
    child_of = {c: kids[0] for c, kids in gt.children_at(stable).items()}
    parent_of = {v: k for k, v in child_of.items()}
    arcs: dict[tuple[str, str], int] = {}
    for code in gt.levels[stable + 1]:
        node = gt.store.node(code)
        for src, mult, _port, _deg in node.red_in:
            key = (src, parent_of[code])
            arcs[key] = arcs.get(key, 0) + mult
    nodes = tuple(gt.levels[stable])
    fibers = {c: gt.anonymity[c] for c in nodes}
    return QuotientGraph(stable, nodes, arcs, fibers)


@dataclass(frozen=True)
class FoldedView:
    """Red-edge-only ancestor closure of a view's bottom: a leveled DAG whose
    paths into the bottom are exactly the message walks the observer saw."""

    bottom: str
    nodes: frozenset[str]
    level: dict[str, int]
    input: dict[str, Optional[str]]
    red_in: dict[str, tuple[tuple[str, int], ...]]  # dst -> ((src, mult), ...)

    @property
    def height(self) -> int:
        return self.level[self.bottom] - min(self.level.values())


def folded_view(view: View) -> FoldedView:
    store = view.store
    seen = {view.bottom}
    stack = [view.bottom]
    red_in: dict[str, tuple[tuple[str, int], ...]] = {}
    while stack:
        code = stack.pop()
        node = store.node(code)
        grouped: dict[str, int] = {}
        for src, mult, _port, _deg in node.red_in:
            grouped[src] = grouped.get(src, 0) + mult
            if src not in seen:
                seen.add(src)
                stack.append(src)
        red_in[code] = tuple(sorted(grouped.items()))
    return FoldedView(
        bottom=view.bottom,
        nodes=frozenset(seen),
        level={c: store.node(c).level for c in seen},
        input={c: store.node(c).input for c in seen},
        red_in=red_in,
    )


@dataclass(frozen=True)
class WalkTree:
    """Explicit walk tree: each depth-k node is one length-k walk into the
    observer, labeled with the walker's class and input at that point."""

    code: str
    input: Optional[str]
    children: tuple["WalkTree", ...]

    def count_at_depth(self, depth: int) -> int:
        if depth == 0:
            return 1
        return sum(c.count_at_depth(depth - 1) for c in self.children)

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)


def walk_counts(folded: FoldedView, depth: int) -> list[int]:
    """Number of distinct message walks of each length 0..depth into the bottom."""
    counts = []
    memo: dict[tuple[str, int], int] = {}

    def walks(code: str, j: int) -> int:
        if j == 0:
            return 1
        key = (code, j)
        if key not in memo:
            memo[key] = sum(m * walks(src, j - 1) for src, m in folded.red_in.get(code, ()))
        return memo[key]

    for j in range(depth + 1):
        counts.append(walks(folded.bottom, j))
    return counts


def unravel(folded: FoldedView, depth: int, *, max_nodes: int = 200_000) -> WalkTree:
    """Expand the folded DAG into the explicit walk tree, multiplicities and all.

    Equal residual fragments are shared, so memory stays polynomial, but the
    cap is on the logical tree size, which can be exponential in depth.
    """
    if depth > folded.height:
        raise ContractViolation(
            f"depth {depth} exceeds folded height {folded.height}"
        )
    if sum(walk_counts(folded, depth)) > max_nodes:
        raise CapExceeded(f"unraveled tree exceeds {max_nodes} nodes")
    memo: dict[tuple[str, int], WalkTree] = {}

    def expand(code: str, remaining: int) -> WalkTree:
        key = (code, remaining)
        got = memo.get(key)
        if got is None:
            kids: list[WalkTree] = []
            if remaining > 0:
                for src, mult in folded.red_in.get(code, ()):
                    sub = expand(src, remaining - 1)
                    kids.extend([sub] * mult)
            got = WalkTree(code, folded.input.get(code), tuple(kids))
            memo[key] = got
        return got

    return expand(folded.bottom, depth)

"""DOT rendering of history trees and views.

One subgraph cluster per level keeps the drawing leveled like the hand
figures: black refinement edges solid, red message edges dashed with a
multiplicity label. Node names are hex prefixes of the canonical codes, so
diffs between two renderings line up node by node.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Optional

from .nodes import NodeStore, View
from .truth import GroundTruth

_PREFIX = 12


def _short_names(codes: Iterable[str]) -> dict[str, str]:
    """Hex-prefix names, extended only as far as uniqueness requires."""
    codes = list(codes)
    width = _PREFIX
    while True:
        names = {c: f"n_{c[:width]}" for c in codes}
        if len(set(names.values())) == len(codes):
            return names
        width += 4


def _quote(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def render_dot(
    store: NodeStore,
    codes: Iterable[str],
    *,
    anonymity: Optional[Mapping[str, int]] = None,
    graph_name: str = "histree",
) -> str:
    """Render the given nodes of a store as a leveled DOT digraph."""
    codes = sorted(set(codes))
    names = _short_names(codes)
    by_level: dict[int, list[str]] = {}
    for c in codes:
        by_level.setdefault(store.node(c).level, []).append(c)

    lines = [f"digraph {graph_name} {{"]
    lines.append("  rankdir=TB;")
    lines.append("  node [shape=ellipse, fontsize=10];")
    for level in sorted(by_level):
        tag = f"m{-level}" if level < 0 else str(level)
        lines.append(f"  subgraph cluster_level_{tag} {{")
        lines.append(f'    label="level {level}";')
        lines.append("    rank=same;")
        for c in by_level[level]:
            n = store.node(c)
            label = "root" if n.parent is None and n.level == -1 else (n.input or "?")
            if anonymity and c in anonymity:
                label += f" a={anonymity[c]}"
            lines.append(f'    {names[c]} [label="{_quote(label)}"];')
        lines.append("  }")
    present = set(codes)
    for c in codes:
        n = store.node(c)
        if n.parent is not None and n.parent in present:
            attrs = ""
            if n.outdeg is not None:
                attrs = f' [label="{n.outdeg}"]'
            lines.append(f"  {names[n.parent]} -> {names[c]}{attrs};")
        for src, mult, port, _deg in n.red_in:
            if src not in present:
                continue
            label = f"×{mult}"
            if port is not None:
                label += f" p:{port}"
            lines.append(
                f'  {names[src]} -> {names[c]} [color=red, style=dashed, label="{_quote(label)}"];'
            )
    lines.append("}")
    return "\n".join(lines) + "\n"


def view_dot(view: View, *, anonymity: Optional[Mapping[str, int]] = None) -> str:
    return render_dot(view.store, view.nodes, anonymity=anonymity)


def ground_truth_dot(gt: GroundTruth) -> str:
    codes = {gt.store.root}
    for level in gt.levels:
        codes.update(level)
    return render_dot(gt.store, codes, anonymity=gt.anonymity)

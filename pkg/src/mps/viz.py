"""Rendering a path forest: Graphviz DOT, canonical JSON, and a radial SVG.

Sibling order is identical in every renderer: descending selection count,
ties by ascending covariate index, exactly as the forest stores them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .engine import MpsConfig, PathForest, PathNode

__all__ = [
    "RenderOptions",
    "to_dot",
    "to_json",
    "forest_from_json",
    "to_svg_radial",
]

MAX_SVG_LEAVES = 10_000


@dataclass(frozen=True)
class RenderOptions:
    layout: str = "linear_tree"
    label: str = "name_only"
    max_label_chars: int = 32

    def __post_init__(self):
        if self.layout not in ("linear_tree", "radial"):
            raise ValueError("layout must be 'linear_tree' or 'radial'")
        if self.label not in ("name_only", "name_and_proportion"):
            raise ValueError("label must be 'name_only' or 'name_and_proportion'")
        if self.max_label_chars < 1:
            raise ValueError("max_label_chars must be >= 1")


def _label(node: PathNode, names, opts: RenderOptions) -> str:
    text = names[node.covariate]
    if opts.label == "name_and_proportion":
        text = f"{text} ({node.proportion:.2f})"
    return text[: opts.max_label_chars]


def _dot_quote(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(forest: PathForest, opts: RenderOptions | None = None) -> str:
    """One digraph per root tree; node ids are the covariate-index path prefix."""
    opts = opts or RenderOptions()
    out: list[str] = []
    for t, root in enumerate(forest.roots):
        lines = [f"digraph path_tree_{t} {{",
                 "  rankdir=TB;",
                 "  node [shape=box, style=rounded];"]
        edges: list[str] = []

        def walk(node: PathNode, prefix: tuple[int, ...]):
            prefix = prefix + (node.covariate,)
            nid = "n_" + "_".join(str(i) for i in prefix)
            label = _dot_quote(_label(node, forest.names, opts))
            lines.append(f'  {nid} [label="{label}"];')
            for ch in node.children:
                cid = nid + f"_{ch.covariate}"
                edges.append(f"  {nid} -> {cid};")
                walk(ch, prefix)

        walk(root, ())
        out.append("\n".join(lines + edges + ["}"]))
    return "\n".join(out) + "\n"


def _node_to_dict(node: PathNode) -> dict:
    return {
        "covariate": node.covariate,
        "count": node.count,
        "proportion": node.proportion,
        "children": [_node_to_dict(ch) for ch in node.children],
    }


def to_json(forest: PathForest) -> str:
    """Canonical JSON for a forest; the contract consumed by render and report."""
    doc = {
        "depth": forest.depth,
        "names": list(forest.names),
        "config": forest.config.to_dict(),
        "roots": [_node_to_dict(r) for r in forest.roots],
    }
    return json.dumps(doc, indent=2) + "\n"


def _node_from_dict(d: dict) -> PathNode:
    return PathNode(int(d["covariate"]), int(d["count"]), float(d["proportion"]),
                    [_node_from_dict(c) for c in d["children"]])


def forest_from_json(text: str) -> PathForest:
    doc = json.loads(text)
    return PathForest(
        roots=[_node_from_dict(r) for r in doc["roots"]],
        depth=int(doc["depth"]),
        config=MpsConfig.from_dict(doc["config"]),
        names=list(doc["names"]),
    )


def _leaf_spans(roots):
    """Assign each node its leaf-index interval in left-justified order."""
    spans: dict[int, tuple[int, int]] = {}
    counter = [0]

    def walk(node: PathNode) -> tuple[int, int]:
        if not node.children:
            i = counter[0]
            counter[0] += 1
            spans[id(node)] = (i, i)
            return (i, i)
        lo, hi = None, None
        for ch in node.children:
            a, b = walk(ch)
            lo = a if lo is None else lo
            hi = b
        spans[id(node)] = (lo, hi)
        return (lo, hi)

    for root in roots:
        walk(root)
    return spans, counter[0]


def to_svg_radial(forest: PathForest, opts: RenderOptions | None = None) -> str:
    """Standalone SVG with leaves equally spaced on the outer ring.

    Depth maps to radius; each internal node sits at the angular midpoint of
    its leaves.  Forests wider than 10,000 leaves are refused (use DOT).
    """
    opts = opts or RenderOptions(layout="radial")
    spans, n_leaves = _leaf_spans(forest.roots)
    if n_leaves > MAX_SVG_LEAVES:
        raise ValueError(f"forest has {n_leaves} leaves (> {MAX_SVG_LEAVES}); "
                         "use the DOT output for forests this wide")

    # auto-size so adjacent leaves sit at least ~14 px apart on the outer ring
    r_out = max(220.0, n_leaves * 14.0 / (2.0 * math.pi))
    margin = 10.0 * opts.max_label_chars
    size = 2.0 * (r_out + margin)
    cx = cy = size / 2.0
    depth = max(forest.depth, 1)

    def angle(node: PathNode) -> float:
        lo, hi = spans[id(node)]
        mid = (lo + hi) / 2.0
        return 2.0 * math.pi * (mid + 0.5) / n_leaves - math.pi / 2.0

    def radius(level: int) -> float:
        return r_out * level / depth

    def pos(node: PathNode, level: int) -> tuple[float, float]:
        a = angle(node)
        rr = radius(level)
        return (cx + rr * math.cos(a), cy + rr * math.sin(a))

    lines: list[str] = []
    texts: list[str] = []

    def walk(node: PathNode, level: int, parent_xy: tuple[float, float]):
        xy = pos(node, level)
        lines.append(
            f'<line x1="{parent_xy[0]:.2f}" y1="{parent_xy[1]:.2f}" '
            f'x2="{xy[0]:.2f}" y2="{xy[1]:.2f}" stroke="#888" stroke-width="1"/>')
        lines.append(f'<circle cx="{xy[0]:.2f}" cy="{xy[1]:.2f}" r="3" fill="#334"/>')
        texts.append(
            f'<text x="{xy[0]:.2f}" y="{xy[1] - 6:.2f}" font-size="10" '
            f'text-anchor="middle" font-family="sans-serif">'
            f"{escape(_label(node, forest.names, opts))}</text>")
        for ch in node.children:
            walk(ch, level + 1, xy)

    center = (cx, cy)
    for root in forest.roots:
        walk(root, 1, center)

    body = "\n".join(
        [f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="#000"/>'] + lines + texts)
    return (
        f'<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{size:.0f}" height="{size:.0f}" '
        f'viewBox="0 0 {size:.0f} {size:.0f}">\n{body}\n</svg>\n')

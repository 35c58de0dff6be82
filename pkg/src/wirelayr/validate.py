"""Model-free feasibility checks of a layout against the continuous geometry.

Nothing here looks at grids or the MILP; every distance is recomputed from
raw coordinates.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .diagram import INTERMEDIATE, LEAF, ROOT, Instance
from .geometry import (
    Point3,
    as_point,
    differing_axes,
    l1_point_distance,
    l1_segment_polyline_distance,
    point_on_polyline,
    segment_hits_obstacle,
)

PLACEMENT_OUTSIDE_REGION = "placement_outside_region"
PATH_DISCONNECTED = "path_disconnected"
OBSTACLE_HIT = "obstacle_hit"
BRANCH_SEPARATION = "branch_separation"
PIPELINE_SEPARATION = "pipeline_separation"
LEAF_DEGREE = "leaf_degree"
BEND_SPACING = "bend_spacing"
LENGTH_MISMATCH = "length_mismatch"

SCOPING_NOTE = ("separation is checked between different trees, and within a tree between "
                "tree edges that share no node; edges meeting at a node may converge")


@dataclass(frozen=True)
class Violation:
    kind: str
    entities: tuple
    measured: Any = None
    threshold: Any = None


@dataclass
class ViolationReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)
    total_length: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]

    def to_dict(self) -> dict:
        def conv(v: Violation):
            d = asdict(v)
            d["entities"] = [list(e) if isinstance(e, tuple) else e for e in v.entities]
            return d
        return {"ok": self.ok, "violations": [conv(v) for v in self.violations],
                "warnings": [conv(v) for v in self.warnings],
                "total_length": self.total_length, "meta": self.meta}


@dataclass
class LayoutData:
    """The geometric content of a solution, independent of how it was produced."""

    placement: dict[str, Point3]
    paths: dict[tuple[str, str], list[Point3]]
    total_length: int


def layout_data(layout) -> LayoutData:
    return LayoutData(dict(layout.placement), {k: list(v) for k, v in layout.paths.items()},
                      int(layout.total_length))


def load_solution(path: str | Path) -> LayoutData:
    d = json.loads(Path(path).read_text())
    return solution_from_dict(d)


def solution_from_dict(d: dict) -> LayoutData:
    placement = {k: as_point(v) for k, v in d.get("placements", {}).items()}
    paths = {(p["parent"], p["child"]): [as_point(q) for q in p["vertices"]] for p in d.get("paths", [])}
    return LayoutData(placement, paths, int(d.get("total_length", d.get("objective") or 0)))


def _merge(verts: Sequence[Point3]) -> list[Point3]:
    """Drop repeated and collinear interior vertices."""
    out: list[Point3] = []
    for p in verts:
        if out and out[-1] == p:
            continue
        if len(out) >= 2:
            a, b = out[-2], out[-1]
            if differing_axes(a, b) == differing_axes(b, p) and len(differing_axes(a, p)) == 1 \
                    and _same_direction(a, b, p):
                out[-1] = p
                continue
        out.append(p)
    return out


def _same_direction(a, b, c) -> bool:
    i = differing_axes(a, b)[0]
    return (b[i] - a[i] > 0) == (c[i] - b[i] > 0)


def _extent(a, b):
    return [min(a[i], b[i]) for i in range(3)], [max(a[i], b[i]) for i in range(3)]


def _close_pairs(lo, hi, limit):
    """Index pairs i < j of extents with l1 gap < limit, with the gap."""
    n = len(lo)
    out = []
    for s in range(0, n, 256):
        a, b = lo[s:s + 256, None, :], hi[s:s + 256, None, :]
        gap = np.maximum(np.maximum(a, lo[None]) - np.minimum(b, hi[None]), 0).sum(axis=2)
        ii, jj = np.nonzero(gap < limit)
        keep = ii + s < jj
        out.extend(zip((ii[keep] + s).tolist(), jj[keep].tolist(), gap[ii[keep], jj[keep]].tolist()))
    return out


def elementary_pieces(paths: dict, extra_cuts: set) -> set[tuple[Point3, Point3]]:
    """Directed elementary pieces of a tree's paths, cut at every path vertex."""
    cuts = set(extra_cuts)
    for verts in paths.values():
        cuts.update(verts)
    lines: dict[tuple, list[int]] = {}
    for p in cuts:
        for i in range(3):
            lines.setdefault((i,) + tuple(p[j] for j in range(3) if j != i), []).append(p[i])
    for v in lines.values():
        v.sort()
    out = set()
    for verts in paths.values():
        for a, b in zip(verts, verts[1:]):
            ax = differing_axes(a, b)
            if len(ax) != 1:
                continue
            i = ax[0]
            key = (i,) + tuple(a[j] for j in range(3) if j != i)
            lo, hi = sorted((a[i], b[i]))
            cs = [c for c in lines[key] if lo <= c <= hi]
            if a[i] > b[i]:
                cs.reverse()
            for c0, c1 in zip(cs, cs[1:]):
                p0, p1 = list(a), list(a)
                p0[i], p1[i] = c0, c1
                out.add((Point3(*p0), Point3(*p1)))
    return out


def check_layout(inst: Instance, layout, min_bend_gap: int = 10, *,
                 enforce_bend_gap: bool = False) -> ViolationReport:
    data = layout if isinstance(layout, LayoutData) else layout_data(layout)
    rep = ViolationReport(meta={"scoping": SCOPING_NOTE, "delta": inst.delta,
                                "pipeline_clearance": inst.clearance, "min_bend_gap": min_bend_gap})
    V = rep.violations

    # (a) placements
    for t in inst.forest:
        poly = inst.pipeline(t.pipeline_id).polyline if t.pipeline_id in {p.id for p in inst.pipelines} else None
        for nid, node in t.nodes.items():
            p = data.placement.get(nid)
            if p is None:
                V.append(Violation(PLACEMENT_OUTSIDE_REGION, (nid,), None, "missing"))
                continue
            inside = inst.region.contains(p)
            if node.role == ROOT:
                inside = inside and poly is not None and point_on_polyline(p, poly)
            elif node.role == INTERMEDIATE:
                inside = inside and node.region.contains(p)
            else:
                inside = inside and p == node.region
            if not inside:
                V.append(Violation(PLACEMENT_OUTSIDE_REGION, (nid,), tuple(p), node.role))

    # (b) paths, merged into maximal straight runs
    merged: dict[tuple[str, str], list[Point3]] = {}
    tree_of: dict[tuple[str, str], int] = {}
    for ti, t in enumerate(inst.forest):
        for s, c in t.tree_edges:
            tree_of[(s, c)] = ti
            verts = data.paths.get((s, c))
            if not verts:
                V.append(Violation(PATH_DISCONNECTED, (s, c), None, "missing path"))
                continue
            bad = [i for i, (a, b) in enumerate(zip(verts, verts[1:])) if len(differing_axes(a, b)) > 1]
            if bad:
                V.append(Violation(PATH_DISCONNECTED, (s, c), tuple(verts[bad[0]]), "non axis-aligned step"))
                continue
            ends_ok = verts[0] == data.placement.get(s) and verts[-1] == data.placement.get(c)
            if not ends_ok:
                V.append(Violation(PATH_DISCONNECTED, (s, c), (tuple(verts[0]), tuple(verts[-1])),
                                   "endpoints must match placements"))
                continue
            merged[(s, c)] = _merge(verts)

    segs = []  # (tree index, edge, a, b)
    for e, verts in merged.items():
        for a, b in zip(verts, verts[1:]):
            segs.append((tree_of[e], e, a, b))

    # (c) obstacles
    for ti, e, a, b in segs:
        for k, o in enumerate(inst.obstacles):
            if segment_hits_obstacle((a, b), o):
                V.append(Violation(OBSTACLE_HIT, (e, (tuple(a), tuple(b)), k), None, o.clearance))

    # (d) separation between branches
    if inst.delta > 0 and segs:
        ext = [_extent(a, b) for _, _, a, b in segs]
        lo = np.array([x[0] for x in ext], dtype=np.int64)
        hi = np.array([x[1] for x in ext], dtype=np.int64)
        seen = set()
        for i, j, d in _close_pairs(lo, hi, inst.delta):
            ti, ei, ai, bi = segs[i]
            tj, ej, aj, bj = segs[j]
            if ti == tj and (ei == ej or set(ei) & set(ej)):
                continue
            gi, gj = (tuple(ai), tuple(bi)), (tuple(aj), tuple(bj))
            key = (ti, tj, frozenset((gi, gj))) if ti == tj else tuple(sorted(((ti, gi), (tj, gj))))
            if key in seen:
                continue
            seen.add(key)
            V.append(Violation(BRANCH_SEPARATION, (ei, gi, ej, gj), int(d), inst.delta))

    # (e) foreign pipelines
    if inst.clearance > 0:
        seen = set()
        for ti, e, a, b in segs:
            t = inst.forest[ti]
            for p in inst.pipelines:
                if p.id == t.pipeline_id:
                    continue
                d = l1_segment_polyline_distance((a, b), p.polyline)
                key = (ti, tuple(a), tuple(b), p.id)
                if d < inst.clearance and key not in seen:
                    seen.add(key)
                    V.append(Violation(PIPELINE_SEPARATION, (e, (tuple(a), tuple(b)), p.id), d, inst.clearance))

    # (f) leaf degree, and the length the layout really installs
    total = 0
    for ti, t in enumerate(inst.forest):
        tpaths = {e: v for e, v in merged.items() if tree_of[e] == ti}
        leaves = {n: t.nodes[n].region for n in t.leaves()}
        pieces = elementary_pieces(tpaths, set(leaves.values()))
        total += sum(l1_point_distance(a, b) for a, b in pieces)
        for n, pt in leaves.items():
            into = sum(1 for a, b in pieces if b == pt)
            out = sum(1 for a, b in pieces if a == pt)
            if into != 1 or out != 0:
                V.append(Violation(LEAF_DEGREE, (n,), {"in": into, "out": out}, {"in": 1, "out": 0}))
    rep.total_length = total
    if total != data.total_length:
        V.append(Violation(LENGTH_MISMATCH, (), total, data.total_length))

    # (g) bend spacing: runs strictly between two bends
    for e, verts in merged.items():
        for a, b in zip(verts[1:-1], verts[2:-1]):
            d = l1_point_distance(a, b)
            if d < min_bend_gap:
                v = Violation(BEND_SPACING, (e, (tuple(a), tuple(b))), d, min_bend_gap)
                (V if enforce_bend_gap else rep.warnings).append(v)
    return rep

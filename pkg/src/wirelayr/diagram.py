"""Problem input: pipelines, the wiring forest and safety parameters."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .geometry import (
    SOLID_BOX,
    Box3,
    GeometryError,
    Obstacle,
    Point3,
    as_point,
    differing_axes,
)

FORMAT_VERSION = 1

ROOT = "root"
INTERMEDIATE = "intermediate"
LEAF = "leaf"
ROLES = (ROOT, INTERMEDIATE, LEAF)


class InstanceFormatError(ValueError):
    """Raised when an instance file cannot be parsed at all."""


@dataclass(frozen=True)
class Pipeline:
    id: str
    polyline: tuple[Point3, ...]


@dataclass(frozen=True)
class TreeNode:
    id: str
    role: str
    # Box3 for intermediates, Point3 for leaves, None for roots (the
    # pipeline is the region).
    region: Optional[Box3 | Point3] = None
    children: tuple[str, ...] = ()


@dataclass(frozen=True)
class WiringTree:
    id: str
    pipeline_id: str
    root_id: str
    nodes: dict[str, TreeNode]
    tree_edges: tuple[tuple[str, str], ...]

    def parent_map(self) -> dict[str, str]:
        return {t: s for s, t in self.tree_edges}

    def leaves(self) -> list[str]:
        return [n for n, v in self.nodes.items() if v.role == LEAF]

    def intermediates(self) -> list[str]:
        return [n for n, v in self.nodes.items() if v.role == INTERMEDIATE]

    def postorder(self) -> list[str]:
        """Node ids, children before parents, following ``children`` order."""
        out: list[str] = []
        stack = [(self.root_id, False)]
        while stack:
            nid, done = stack.pop()
            if done:
                out.append(nid)
                continue
            stack.append((nid, True))
            for c in reversed(self.nodes[nid].children):
                stack.append((c, False))
        return out


@dataclass(frozen=True)
class Instance:
    region: Box3
    pipelines: tuple[Pipeline, ...]
    forest: tuple[WiringTree, ...]
    obstacles: tuple[Obstacle, ...] = ()
    delta: int = 0
    pipeline_clearance: Optional[int] = None
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def clearance(self) -> int:
        return self.delta if self.pipeline_clearance is None else self.pipeline_clearance

    def pipeline(self, pid: str) -> Pipeline:
        for p in self.pipelines:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def tree(self, tid: str) -> WiringTree:
        for t in self.forest:
            if t.id == tid:
                return t
        raise KeyError(tid)


def validate_instance(inst: Instance) -> list[str]:
    errors: list[str] = []
    if inst.delta < 0:
        errors.append(f"delta: must be >= 0, got {inst.delta}")
    if inst.pipeline_clearance is not None and inst.pipeline_clearance < 0:
        errors.append(f"pipeline_clearance: must be >= 0, got {inst.pipeline_clearance}")

    pids = set()
    for p in inst.pipelines:
        if p.id in pids:
            errors.append(f"pipeline {p.id}: duplicate id")
        pids.add(p.id)
        if len(p.polyline) < 2:
            errors.append(f"pipeline {p.id}: needs at least 2 points")
        for a, b in zip(p.polyline, p.polyline[1:]):
            if len(differing_axes(a, b)) != 1:
                errors.append(f"pipeline {p.id}: edge {tuple(a)}-{tuple(b)} is not axis-aligned")
        for q in p.polyline:
            if not inst.region.contains(q):
                errors.append(f"pipeline {p.id}: point {tuple(q)} outside region")

    seen_nodes: dict[str, str] = {}
    tids = set()
    for t in inst.forest:
        if t.id in tids:
            errors.append(f"tree {t.id}: duplicate id")
        tids.add(t.id)
        if t.pipeline_id not in pids:
            errors.append(f"tree {t.id}: unknown pipeline {t.pipeline_id!r}")
        for nid in t.nodes:
            if nid in seen_nodes:
                errors.append(f"node {nid}: id used in trees {seen_nodes[nid]} and {t.id}")
            seen_nodes[nid] = t.id
        errors.extend(_tree_errors(inst, t))
    return errors


def _tree_errors(inst: Instance, t: WiringTree) -> list[str]:
    errs = []
    where = f"tree {t.id}"
    roots = [n for n, v in t.nodes.items() if v.role == ROOT]
    if len(roots) != 1:
        errs.append(f"{where}: expected exactly one root, found {len(roots)}")
    if t.root_id not in t.nodes or t.nodes[t.root_id].role != ROOT:
        errs.append(f"{where}: root_id {t.root_id!r} is not a root node")
    for nid, node in t.nodes.items():
        if node.id != nid:
            errs.append(f"{where}: node key {nid!r} does not match id {node.id!r}")
        if node.role not in ROLES:
            errs.append(f"{where}: node {nid} has unknown role {node.role!r}")
        for c in node.children:
            if c not in t.nodes:
                errs.append(f"{where}: node {nid} has unknown child {c!r}")
        if node.role == LEAF:
            if node.children:
                errs.append(f"{where}: leaf {nid} has children")
            if not isinstance(node.region, Point3):
                errs.append(f"{where}: leaf {nid} needs a point")
            elif not inst.region.contains(node.region):
                errs.append(f"{where}: leaf {nid} at {tuple(node.region)} outside region")
        elif node.role == INTERMEDIATE:
            if not isinstance(node.region, Box3):
                errs.append(f"{where}: intermediate {nid} needs a box")
            elif not inst.region.contains_box(node.region):
                errs.append(f"{where}: region of {nid} outside region")
            if not node.children:
                errs.append(f"{where}: intermediate {nid} has no children")
        elif node.role == ROOT and not node.children:
            errs.append(f"{where}: root {nid} has no children")

    parents: dict[str, list[str]] = {}
    for s, c in t.tree_edges:
        if s not in t.nodes or c not in t.nodes:
            errs.append(f"{where}: edge ({s},{c}) references unknown node")
            continue
        parents.setdefault(c, []).append(s)
        if c not in t.nodes[s].children:
            errs.append(f"{where}: edge ({s},{c}) not listed in children of {s}")
    listed = {(s, c) for s, node in t.nodes.items() for c in node.children}
    for s, c in sorted(listed - set(t.tree_edges)):
        errs.append(f"{where}: child {c} of {s} has no tree edge")
    arb = []
    if len(t.tree_edges) != len(t.nodes) - 1:
        arb.append(f"{len(t.tree_edges)} edges for {len(t.nodes)} nodes")
    for c, ps in parents.items():
        if c == t.root_id:
            arb.append(f"root {c} has parent {ps[0]}")
        elif len(ps) > 1:
            arb.append(f"node {c} has {len(ps)} parents")
    if t.root_id in t.nodes:
        reach, stack = set(), [t.root_id]
        while stack:
            n = stack.pop()
            if n in reach:
                continue
            reach.add(n)
            stack.extend(c for c in t.nodes[n].children if c in t.nodes)
        missing = sorted(set(t.nodes) - reach)
        if missing:
            arb.append(f"unreachable nodes {missing}")
    if arb:
        errs.append(f"{where}: arborescence violation: " + "; ".join(arb))
    return errs


@dataclass(frozen=True)
class TreeStats:
    tree_id: str
    nodes: int
    leaves: int
    intermediates: int
    depth: int


def tree_statistics(inst: Instance) -> list[TreeStats]:
    out = []
    for t in inst.forest:
        depth = {t.root_id: 0}
        order = [t.root_id]
        for n in order:
            for c in t.nodes[n].children:
                depth[c] = depth[n] + 1
                order.append(c)
        out.append(TreeStats(t.id, len(t.nodes), len(t.leaves()), len(t.intermediates()),
                             max(depth.values())))
    return out


# -- JSON ---------------------------------------------------------------------

def _box_json(b: Box3) -> dict:
    return {"min": list(b.min), "max": list(b.max)}


def instance_to_dict(inst: Instance) -> dict:
    trees = []
    for t in inst.forest:
        nodes = []
        for n in t.nodes.values():
            d: dict[str, Any] = {"id": n.id, "role": n.role}
            if n.role == INTERMEDIATE:
                d["box"] = _box_json(n.region)
            elif n.role == LEAF:
                d["point"] = list(n.region)
            d["children"] = list(n.children)
            nodes.append(d)
        trees.append({"id": t.id, "pipeline": t.pipeline_id, "root": t.root_id,
                      "nodes": nodes, "edges": [list(e) for e in t.tree_edges]})
    obstacles = []
    for o in inst.obstacles:
        d = {"kind": o.kind, **_box_json(o.box), "clearance": o.clearance}
        if o.kind != SOLID_BOX:
            d["openings"] = [_box_json(b) for b in o.openings]
        obstacles.append(d)
    return {
        "format": FORMAT_VERSION,
        "region": _box_json(inst.region),
        "pipelines": [{"id": p.id, "points": [list(q) for q in p.polyline]} for p in inst.pipelines],
        "trees": trees,
        "obstacles": obstacles,
        "delta": inst.delta,
        "pipeline_clearance": inst.pipeline_clearance,
        "meta": inst.meta,
    }


def _box(d) -> Box3:
    return Box3(as_point(d["min"]), as_point(d["max"]))


def instance_from_dict(d: dict) -> Instance:
    try:
        if d.get("format") != FORMAT_VERSION:
            raise InstanceFormatError(f"unsupported format {d.get('format')!r}")
        trees = []
        for td in d["trees"]:
            nodes = {}
            for nd in td["nodes"]:
                role = nd["role"]
                region = None
                if role == INTERMEDIATE:
                    region = _box(nd["box"])
                elif role == LEAF:
                    region = as_point(nd["point"])
                nodes[nd["id"]] = TreeNode(nd["id"], role, region, tuple(nd.get("children", ())))
            edges = td.get("edges")
            if edges is None:
                edges = [(s, c) for s, n in nodes.items() for c in n.children]
            trees.append(WiringTree(td["id"], td["pipeline"], td["root"], nodes,
                                    tuple((s, c) for s, c in edges)))
        obstacles = []
        for od in d.get("obstacles", []):
            ops = tuple(_box(b) for b in od.get("openings", []))
            obstacles.append(Obstacle(od["kind"], _box(od), ops, int(od.get("clearance", 0))))
        return Instance(
            region=_box(d["region"]),
            pipelines=tuple(Pipeline(p["id"], tuple(as_point(q) for q in p["points"]))
                            for p in d["pipelines"]),
            forest=tuple(trees),
            obstacles=tuple(obstacles),
            delta=int(d.get("delta", 0)),
            pipeline_clearance=d.get("pipeline_clearance"),
            meta=d.get("meta", {}),
        )
    except (KeyError, TypeError, GeometryError) as e:
        raise InstanceFormatError(f"malformed instance: {e!r}") from e


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1, sort_keys=False) + "\n"


def load_instance(path: str | Path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InstanceFormatError(f"{path}: {e}") from e
    return instance_from_dict(data)


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(inst))

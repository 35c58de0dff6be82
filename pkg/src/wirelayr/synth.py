"""Seeded synthetic instances in the layered pipeline/terminal layout."""
from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import asdict, dataclass
from itertools import product
from pathlib import Path
from typing import Iterable, Optional

from .diagram import INTERMEDIATE, LEAF, ROOT, Instance, Pipeline, TreeNode, WiringTree, save_instance
from .geometry import Box3, Point3, raw_segment_distance

PIPE_X = 50
# Ranges for the lower x corner of region boxes, one per depth band, so
# deeper nodes sit closer to the terminal face.
BAND_X = ((52, 62), (64, 74), (76, 86))


class PlacementOverflow(RuntimeError):
    """Region boxes could not be packed without overlap."""


@dataclass(frozen=True)
class GeneratorParams:
    seed: int = 0
    cube: int = 100
    num_pipelines: int = 1
    branches_per_pipeline: int = 1
    nodes_per_branch: int = 3
    region_edge: int = 10
    delta: int = 1
    min_bend_gap: int = 10
    min_pipeline_separation: int = 6
    pipeline_clearance: Optional[int] = None
    retries: int = 200

    def __post_init__(self):
        for name in ("num_pipelines", "branches_per_pipeline"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.nodes_per_branch < 2:
            raise ValueError("nodes_per_branch must be >= 2 (a root and a leaf)")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.cube < 100:
            raise ValueError("cube must be at least 100 to hold the layered layout")


def route_pipeline(start: Point3, end: Point3, step: int, blocked: set[Point3], limit: int) -> list[Point3]:
    """Shortest path on the ``step`` lattice of the x = start.x plane, avoiding ``blocked``.

    Every lattice point along the route is kept, so each one can serve as a
    tap for the trees hanging off the pipeline.
    """
    x = start.x
    q = deque([start])
    prev = {start: None}
    while q:
        p = q.popleft()
        if p == end:
            break
        for dy, dz in ((0, step), (step, 0), (0, -step), (-step, 0)):
            n = Point3(x, p.y + dy, p.z + dz)
            if 0 <= n.y <= limit and 0 <= n.z <= limit and n not in prev and n not in blocked:
                prev[n] = p
                q.append(n)
    if end not in prev:
        raise PlacementOverflow("no pipeline route respects the separation")
    path = [end]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def _pipelines(p: GeneratorParams, rng: random.Random) -> list[Pipeline]:
    step = p.min_bend_gap
    zs = rng.sample(range(0, 91, 10), p.num_pipelines)
    out: list[Pipeline] = []
    for i, z in enumerate(zs):
        blocked = set()
        for other in out:
            for y, zz in product(range(0, p.cube + 1, step), repeat=2):
                q = Point3(PIPE_X, y, zz)
                if min(raw_segment_distance(q, q, a, b) for a, b in zip(other.polyline, other.polyline[1:])) \
                        < p.min_pipeline_separation:
                    blocked.add(q)
        poly = route_pipeline(Point3(PIPE_X, 0, z), Point3(PIPE_X, 90, z), step, blocked, 90)
        out.append(Pipeline(f"P{i}", tuple(poly)))
    return out


def _shape(n: int, rng: random.Random) -> list[int]:
    """Parent index per node; node 0 is the root, the last ``L`` nodes are leaves."""
    leaves = max(1, round((n - 1) / 5))
    inner = n - 1 - leaves
    if inner < 0:
        raise ValueError("too few nodes for the leaf count")
    # Split intermediates across the leaf chains; the first chain is longest.
    sizes = [inner // leaves + (1 if k < inner % leaves else 0) for k in range(leaves)]
    parent = [-1]
    kids = {0: 0}
    inner_ids: list[int] = []
    tails = []
    for k, size in enumerate(sizes):
        if k == 0 or not inner_ids:
            at = 0
        else:
            opts = [i for i in inner_ids if kids[i] < 3]
            at = rng.choice(opts) if opts else 0
        for _ in range(size):
            parent.append(at)
            kids[at] = kids.get(at, 0) + 1
            at = len(parent) - 1
            kids[at] = 0
            inner_ids.append(at)
        tails.append(at)
    for at in tails:
        parent.append(at)
        kids[at] = kids.get(at, 0) + 1
    if kids[0] == 0:
        raise AssertionError("root without children")
    return parent


def _depths(parent: list[int]) -> list[int]:
    d = [0] * len(parent)
    for i in range(1, len(parent)):
        d[i] = d[parent[i]] + 1
    return d


def _disjoint(b: Box3, boxes: Iterable[Box3]) -> bool:
    return not any(b.intersects(o) for o in boxes)


def _scan_slot(p: GeneratorParams, leaf: bool, near: tuple[int, int], boxes: list[Box3],
               leaf_points: set[Point3]):
    """Free grid-aligned slot closest to ``near``, once random draws have given up."""
    e = p.region_edge
    span = p.cube if leaf else p.cube - e
    yz = sorted(product(range(0, span + 1, e), repeat=2),
                key=lambda q: (abs(q[0] - near[0]) + abs(q[1] - near[1]), q))
    if leaf:
        return next((Point3(p.cube, y, z) for y, z in yz if Point3(p.cube, y, z) not in leaf_points), None)
    for y, z in yz:
        for x0 in range(BAND_X[0][0], min(BAND_X[-1][1], p.cube - e - 1) + 1, e):
            b = Box3(Point3(x0, y, z), Point3(x0 + e, y + e, z + e))
            if _disjoint(b, boxes):
                return b
    return None


def generate(p: GeneratorParams) -> Instance:
    rng = random.Random(p.seed)
    pipes = _pipelines(p, rng)
    e = p.region_edge
    boxes: list[Box3] = []
    leaf_points: set[Point3] = set()
    trees = []
    for pi, pipe in enumerate(pipes):
        z_pipe = pipe.polyline[0].z
        # Branches of one pipeline share a hub, so their routes compete.
        hub = (rng.randrange(0, 81), min(p.cube - e, z_pipe))
        for bi in range(p.branches_per_pipeline):
            tid = f"T{pi}_{bi}"
            parent = _shape(p.nodes_per_branch, rng)
            depth = _depths(parent)
            n = len(parent)
            nleaves = max(1, round((n - 1) / 5))
            leaf_ids = set(range(n - nleaves, n))
            deepest = max(depth[i] for i in range(n) if i not in leaf_ids and i > 0) if n - nleaves > 1 else 1
            # Node anchors (y, z): the root sits at the hub, children near parents.
            anchor: dict[int, tuple[int, int]] = {0: hub}
            nodes: dict[str, TreeNode] = {}
            regions: dict[int, object] = {}
            top = p.cube - e
            for i in range(1, n):
                py, pz = anchor[parent[i]]
                for attempt in range(p.retries):
                    # Stay near the parent, widening the window when crowded.
                    w = 20 + attempt
                    late = attempt >= p.retries // 2
                    if late:
                        # Crowded: give up locality and sample the whole face.
                        y, z = rng.randint(0, top), rng.randint(0, top)
                    else:
                        y = min(top, max(0, py + rng.randint(-w, w)))
                        z = min(top, max(0, pz + rng.randint(-w, w)))
                    if parent[i] == 0 and attempt < p.retries // 2:
                        # First-level regions of sibling branches span the
                        # same stretch of pipeline, so their taps compete.
                        y = py
                    if i in leaf_ids:
                        pt = Point3(p.cube, y, z)
                        if pt not in leaf_points:
                            leaf_points.add(pt)
                            regions[i] = pt
                            break
                    else:
                        band = min(len(BAND_X) - 1, (depth[i] - 1) * len(BAND_X) // deepest)
                        x0 = rng.randint(BAND_X[0][0], BAND_X[-1][1]) if late else rng.randint(*BAND_X[band])
                        lo = Point3(x0, y, z)
                        b = Box3(lo, Point3(lo.x + e, lo.y + e, lo.z + e))
                        if _disjoint(b, boxes):
                            boxes.append(b)
                            regions[i] = b
                            break
                else:
                    found = _scan_slot(p, i in leaf_ids, (py, pz), boxes, leaf_points)
                    if found is None:
                        raise PlacementOverflow(f"could not place node {i} of tree {tid}")
                    if isinstance(found, Box3):
                        boxes.append(found)
                        y, z = found.min.y, found.min.z
                    else:
                        leaf_points.add(found)
                        y, z = found.y, found.z
                    regions[i] = found
                anchor[i] = (y, z)
            names = [f"{tid}_r"] + [f"{tid}_{'l' if i in leaf_ids else 'n'}{i}" for i in range(1, n)]
            children: dict[int, list[int]] = {i: [] for i in range(n)}
            for i in range(1, n):
                children[parent[i]].append(i)
            for i in range(n):
                role = ROOT if i == 0 else LEAF if i in leaf_ids else INTERMEDIATE
                nodes[names[i]] = TreeNode(names[i], role, regions.get(i),
                                           tuple(names[c] for c in children[i]))
            edges = tuple((names[parent[i]], names[i]) for i in range(1, n))
            trees.append(WiringTree(tid, pipe.id, names[0], nodes, edges))
    meta = {"generator": asdict(p)}
    return Instance(Box3(Point3(0, 0, 0), Point3(p.cube, p.cube, p.cube)), tuple(pipes), tuple(trees),
                    (), p.delta, p.pipeline_clearance, meta)


TABLE_GRID = {"pipelines": (1, 2), "branches": (1, 3, 5), "nodes": (3, 5, 10, 15), "deltas": (1, 3, 5)}


def suite_cells(pipelines=TABLE_GRID["pipelines"], branches=TABLE_GRID["branches"],
                nodes=TABLE_GRID["nodes"], deltas=TABLE_GRID["deltas"]):
    return list(product(pipelines, branches, nodes, deltas))


def generate_suite(out_dir: str | Path, *, per_cell: int = 10, base_seed: int = 0, cells=None,
                   write: bool = True) -> dict:
    """Write one JSON per instance plus ``manifest.json``; returns the manifest."""
    out = Path(out_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    entries = []
    seed = base_seed * 1_000_003
    for c, b, n, d in cells if cells is not None else suite_cells():
        for k in range(per_cell):
            seed += 1
            params = GeneratorParams(seed=seed, num_pipelines=c, branches_per_pipeline=b,
                                     nodes_per_branch=n, delta=d)
            name = f"c{c}_b{b}_n{n}_d{d}_{k}.json"
            if write:
                save_instance(generate(params), out / name)
            entries.append({"file": name, "pipelines": c, "branches": b, "nodes": n,
                            "delta": d, "replicate": k, "seed": seed})
    manifest = {"format": 1, "instances": entries}
    if write:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest

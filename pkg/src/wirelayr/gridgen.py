"""Per-tree reduced discretisation graphs built from parent/children Hanan grids."""
from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

from .diagram import INTERMEDIATE, LEAF, ROOT, Instance, WiringTree
from .geometry import (
    WALL_WITH_OPENINGS,
    Box3,
    Obstacle,
    Point3,
    l1_point_distance,
    point_hits_obstacle,
    point_on_polyline,
    segment_hits_obstacle,
)

GRAPH_FORMAT_VERSION = 1


class DiscretizationError(Exception):
    """The instance is infeasible on the discretised domain."""


class EmptyAdmissibleSet(DiscretizationError):
    def __init__(self, node_id: str):
        super().__init__(f"no grid vertex survives in the admissible region of {node_id}")
        self.node_id = node_id


class DisconnectedRequiredPair(DiscretizationError):
    def __init__(self, parent: str, child: str):
        super().__init__(f"no surviving path between any placement of {parent} and of {child}")
        self.parent = parent
        self.child = child


@dataclass
class GridGraph:
    """Directed grid graph of one tree.

    Arcs come in antiparallel pairs: arc ``2k`` runs from the smaller to the
    larger vertex of undirected edge ``k`` and ``2k + 1`` runs back, so the
    reverse of arc ``a`` is ``a ^ 1``.
    """

    tree_id: str
    vertices: list[Point3]
    tail: list[int]
    head: list[int]
    length: list[int]
    admissible: dict[str, tuple[int, ...]]
    index: dict[Point3, int] = field(default_factory=dict, repr=False)
    out_arcs: list[list[int]] = field(default_factory=list, repr=False)
    in_arcs: list[list[int]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.index = {p: i for i, p in enumerate(self.vertices)}
        self.out_arcs = [[] for _ in self.vertices]
        self.in_arcs = [[] for _ in self.vertices]
        for a, (u, v) in enumerate(zip(self.tail, self.head)):
            self.out_arcs[u].append(a)
            self.in_arcs[v].append(a)

    @property
    def num_arcs(self) -> int:
        return len(self.tail)

    @property
    def num_edges(self) -> int:
        return len(self.tail) // 2

    @staticmethod
    def reverse(a: int) -> int:
        return a ^ 1

    def arc_points(self, a: int) -> tuple[Point3, Point3]:
        return self.vertices[self.tail[a]], self.vertices[self.head[a]]


def _node_coords(node, axes: list[set[int]]) -> None:
    if isinstance(node, Box3):
        for i in range(3):
            axes[i].update((node.min[i], node.max[i]))
    else:
        for i in range(3):
            axes[i].add(node[i])


def hanan_points(regions: Iterable[Box3 | Sequence[int]],
                 anchors: Iterable[Sequence[int]] = ()) -> tuple[list[int], list[int], list[int]]:
    """Sorted unique per-axis coordinates of box corners, points and anchors."""
    axes: list[set[int]] = [set(), set(), set()]
    for r in regions:
        _node_coords(r, axes)
    for p in anchors:
        _node_coords(p, axes)
    if not all(axes):
        raise ValueError("hanan_points needs a nonempty group")
    return tuple(sorted(a) for a in axes)


def build_group_grid(axes: Sequence[Sequence[int]]) -> tuple[list[Point3], list[tuple[Point3, Point3]]]:
    """Cartesian product grid with edges between axis-consecutive coordinates."""
    if not all(axes):
        raise ValueError("every axis list must be nonempty")
    xs, ys, zs = (sorted(set(a)) for a in axes)
    verts = [Point3(x, y, z) for x, y, z in product(xs, ys, zs)]
    edges = []
    for x, y, z in product(xs, ys, zs):
        p = Point3(x, y, z)
        for i, coords in enumerate((xs, ys, zs)):
            k = bisect.bisect_left(coords, p[i])
            if k + 1 < len(coords):
                q = list(p)
                q[i] = coords[k + 1]
                edges.append((p, Point3(*q)))
    return verts, edges


def _group_members(inst: Instance, tree: WiringTree, s: str):
    node = tree.nodes[s]
    if node.role == ROOT:
        regions = list(inst.pipeline(tree.pipeline_id).polyline)
    else:
        regions = [node.region]
    for c in node.children:
        regions.append(tree.nodes[c].region)
    return regions


def _opening_guides(obstacles: Sequence[Obstacle], axes: list[set[int]]) -> None:
    # Centre lines of wall openings, for groups whose span crosses the wall.
    for o in obstacles:
        if o.kind != WALL_WITH_OPENINGS:
            continue
        crosses = all(min(axes[i]) <= o.box.max[i] and o.box.min[i] <= max(axes[i]) for i in range(3))
        if not crosses:
            continue
        for op in o.openings:
            for i in range(3):
                if not (op.min[i] <= o.box.min[i] and op.max[i] >= o.box.max[i]):
                    axes[i].add((op.min[i] + op.max[i]) // 2)


def assemble_tree_graph(inst: Instance, tree: WiringTree, *, opening_guides: bool = False,
                        check_connectivity: bool = True) -> GridGraph:
    points: set[Point3] = set()
    raw_edges: set[tuple[Point3, Point3]] = set()
    for s in tree.postorder():
        if not tree.nodes[s].children:
            continue
        axes = [set(a) for a in hanan_points(_group_members(inst, tree, s))]
        if opening_guides:
            _opening_guides(inst.obstacles, axes)
        verts, edges = build_group_grid(axes)
        points.update(verts)
        raw_edges.update(edges)

    points = {p for p in points if not any(point_hits_obstacle(p, o) for o in inst.obstacles)}
    edges = _split_collinear(points, raw_edges)
    edges = [(u, v) for u, v in edges
             if u in points and v in points
             and not any(segment_hits_obstacle((u, v), o) for o in inst.obstacles)]

    vertices = sorted(points)
    index = {p: i for i, p in enumerate(vertices)}
    tail, head, length = [], [], []
    for u, v in sorted((index[u], index[v]) if index[u] < index[v] else (index[v], index[u])
                       for u, v in edges):
        d = l1_point_distance(vertices[u], vertices[v])
        tail += [u, v]
        head += [v, u]
        length += [d, d]

    admissible = _admissible_sets(inst, tree, vertices)
    g = GridGraph(tree.id, vertices, tail, head, length, admissible)
    if check_connectivity:
        _check_pairs(tree, g)
    return g


def _split_collinear(points: set[Point3], edges: Iterable[tuple[Point3, Point3]]):
    """Cut every edge at the merged vertices lying strictly inside it."""
    lines: dict[tuple, list[int]] = {}
    for p in points:
        for i in range(3):
            key = (i,) + tuple(p[j] for j in range(3) if j != i)
            lines.setdefault(key, []).append(p[i])
    for v in lines.values():
        v.sort()
    out = set()
    for u, v in edges:
        i = next(k for k in range(3) if u[k] != v[k])
        lo, hi = (u, v) if u[i] < v[i] else (v, u)
        key = (i,) + tuple(lo[j] for j in range(3) if j != i)
        coords = lines.get(key, [])
        a = bisect.bisect_right(coords, lo[i])
        b = bisect.bisect_left(coords, hi[i])
        cuts = [lo[i]] + coords[a:b] + [hi[i]]
        for c0, c1 in zip(cuts, cuts[1:]):
            p0, p1 = list(lo), list(lo)
            p0[i], p1[i] = c0, c1
            out.add((Point3(*p0), Point3(*p1)))
    return out


def _admissible_sets(inst: Instance, tree: WiringTree, vertices: list[Point3]) -> dict[str, tuple[int, ...]]:
    pipeline = inst.pipeline(tree.pipeline_id).polyline
    out = {}
    for nid, node in tree.nodes.items():
        if node.role == ROOT:
            members = [i for i, p in enumerate(vertices) if point_on_polyline(p, pipeline)]
        elif node.role == INTERMEDIATE:
            members = [i for i, p in enumerate(vertices) if node.region.contains(p)]
        else:
            members = [i for i, p in enumerate(vertices) if p == node.region]
        if not members:
            raise EmptyAdmissibleSet(nid)
        out[nid] = tuple(members)
    return out


def components(g: GridGraph) -> list[int]:
    parent = list(range(len(g.vertices)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in range(0, g.num_arcs, 2):
        ra, rb = find(g.tail[a]), find(g.head[a])
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return [find(v) for v in range(len(g.vertices))]


def _check_pairs(tree: WiringTree, g: GridGraph) -> None:
    comp = components(g)
    for s, t in tree.tree_edges:
        cs = {comp[v] for v in g.admissible[s]}
        if not cs.intersection(comp[v] for v in g.admissible[t]):
            raise DisconnectedRequiredPair(s, t)


def discretize(inst: Instance, *, opening_guides: bool = False) -> list[GridGraph]:
    return [assemble_tree_graph(inst, t, opening_guides=opening_guides) for t in inst.forest]


def graph_to_dict(g: GridGraph) -> dict:
    return {
        "tree": g.tree_id,
        "vertices": [list(p) for p in g.vertices],
        "arcs": [[g.tail[a], g.head[a], g.length[a]] for a in range(g.num_arcs)],
        "admissible": {k: list(v) for k, v in sorted(g.admissible.items())},
    }


def graphs_to_json(graphs: Sequence[GridGraph]) -> str:
    return json.dumps({"format": GRAPH_FORMAT_VERSION, "graphs": [graph_to_dict(g) for g in graphs]}) + "\n"

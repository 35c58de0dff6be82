"""Exact branch-and-bound over the wiring MILP with lazy safety rows.

Each search node carries arc bans. Its bound is the optimum of the relaxation
that drops every safety coupling: trees decouple, and per tree a bottom-up
pass solves one Steiner arborescence per parent group (Dreyfus-Wagner over the
children, seeded with the children's own subtree costs). Siblings may share
arcs, so that pass is exact for the relaxation. When the relaxed optimum
violates a catalog entry, the entry is materialized and the node branches on
which side of the conflict gives up its arc.
"""
from __future__ import annotations

import heapq
import logging
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diagram import LEAF, ROOT, Instance
from .geometry import Point3
from .gridgen import GridGraph, discretize
from .milp import (
    CORRIDOR,
    FLOW,
    INSTALL,
    PLACE,
    SAFETY_ARC,
    SAFETY_PIPELINE,
    Conflict,
    ConflictCatalog,
    LinearConstraint,
    MilpModel,
    all_catalog_rows,
    build_conflict_catalog,
    build_core_model,
    find_conflicts,
    materialize_safety_constraint,
)

log = logging.getLogger(__name__)

INF = float("inf")

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time_limit"


@dataclass(frozen=True)
class SolveParams:
    time_limit: float = 3600.0
    threads: int = 1
    seed: int = 0
    eager: bool = False
    node_limit: Optional[int] = None
    gap_tolerance: float = 0.0


@dataclass(frozen=True)
class SearchNode:
    """Bans per tree (whole tree, or per tree edge) and optional placement pins.

    ``pins`` maps ``(tree, node id)`` to the allowed vertex subset.
    """

    tree_bans: tuple[frozenset, ...]
    edge_bans: tuple[tuple[frozenset, ...], ...]
    pins: tuple[tuple[tuple[int, str], frozenset], ...] = ()
    depth: int = 0

    @classmethod
    def root(cls, model: MilpModel) -> "SearchNode":
        return cls(tuple(frozenset() for _ in model.trees),
                   tuple(tuple(frozenset() for _ in lay.edges) for lay in model.trees))

    def ban_tree(self, ti: int, *arcs: int) -> "SearchNode":
        tb = list(self.tree_bans)
        tb[ti] = tb[ti] | set(arcs)
        return SearchNode(tuple(tb), self.edge_bans, self.pins, self.depth + 1)

    def ban_edge(self, ti: int, e: int, *arcs: int) -> "SearchNode":
        eb = [list(x) for x in self.edge_bans]
        eb[ti][e] = eb[ti][e] | set(arcs)
        return SearchNode(self.tree_bans, tuple(tuple(x) for x in eb), self.pins, self.depth + 1)

    def pinned(self, ti: int) -> dict[str, frozenset]:
        return {n: vs for (t, n), vs in self.pins if t == ti}


@dataclass
class SolveReport:
    status: str
    objective: Optional[int]
    best_bound: Optional[float]
    gap: Optional[float]
    lazy_rows: int
    wall_time: float
    nodes: int
    workers: int = 1
    catalog_rows: int = 0
    rows: list = field(default_factory=list, repr=False)

    def to_dict(self, *, include_time: bool = False) -> dict:
        d = {"status": self.status, "objective": self.objective,
             "best_bound": self.best_bound, "gap": self.gap, "lazy_rows": self.lazy_rows,
             "nodes": self.nodes, "workers": self.workers}
        if include_time:
            d["wall_time"] = round(self.wall_time, 6)
        return d


@dataclass
class Layout:
    placement: dict[str, Point3]
    installed: dict[str, list[tuple[Point3, Point3]]]
    paths: dict[tuple[str, str], list[Point3]]
    total_length: int
    tree_of: dict[tuple[str, str], str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "placements": {k: list(v) for k, v in sorted(self.placement.items())},
            "paths": [{"tree": self.tree_of.get(k), "parent": k[0], "child": k[1],
                       "vertices": [list(p) for p in v]} for k, v in self.paths.items()],
            "installed": {t: [[list(u), list(v)] for u, v in arcs] for t, arcs in self.installed.items()},
            "total_length": self.total_length,
        }


# -- per-tree relaxation --------------------------------------------------------

@dataclass
class _TreeData:
    ti: int
    graph: GridGraph
    edges: list[tuple[str, str]]
    edge_index: dict[tuple[str, str], int]
    groups: list[str]                      # non-leaf nodes in postorder
    children: dict[str, list[str]]
    role: dict[str, str]
    allowed: dict[str, tuple[int, ...]]
    static_bans: frozenset


@dataclass
class _Group:
    """Dreyfus-Wagner tables for one parent group under fixed bans."""

    value: dict[int, float]                # h_s over allowed placements of s
    pred: list[list[int]]                  # per subset mask: arc leaving u, or -1
    split: list[dict[int, int]]            # per subset mask: chosen sub-mask at u


@dataclass
class TreeSolution:
    cost: int
    placement: dict[str, int]
    paths: list[list[int]]                 # per tree edge, arcs from parent to child

    def arcs_per_edge(self) -> list[set[int]]:
        return [set(p) for p in self.paths]


def _tree_data(ti: int, lay) -> _TreeData:
    tree, g = lay.tree, lay.graph
    leaf_vertices = {g.admissible[n][0] for n in tree.leaves()}
    static = frozenset(a for v in leaf_vertices for a in g.out_arcs[v])
    allowed = dict(g.admissible)
    # A root sitting on a leaf point would leave that leaf without its
    # incoming arc; every other zero-length case is handled by the bans.
    allowed[tree.root_id] = tuple(v for v in allowed[tree.root_id] if v not in leaf_vertices)
    return _TreeData(ti, g, list(lay.edges), {e: i for i, e in enumerate(lay.edges)},
                     [n for n in tree.postorder() if tree.nodes[n].children],
                     {n: list(node.children) for n, node in tree.nodes.items()},
                     {n: node.role for n, node in tree.nodes.items()}, allowed, static)


def _rev_dijkstra(g: GridGraph, init: dict[int, float], banned) -> tuple[list[float], list[int]]:
    """Distances to the labelled set (distance from u = min over paths u -> v of len + init[v])."""
    dist = [INF] * len(g.vertices)
    pred = [-1] * len(g.vertices)
    heap = []
    for v, d in init.items():
        if d < dist[v]:
            dist[v] = d
    heap = [(d, v) for v, d in enumerate(dist) if d < INF]
    heapq.heapify(heap)
    in_arcs, tail, length = g.in_arcs, g.tail, g.length
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for a in in_arcs[v]:
            if a in banned:
                continue
            u = tail[a]
            nd = d + length[a]
            if nd < dist[u]:
                dist[u] = nd
                pred[u] = a
                heapq.heappush(heap, (nd, u))
    return dist, pred


def _solve_group(td: _TreeData, s: str, seeds: list[dict[int, float]], bans: list[frozenset],
                 allowed_s: Sequence[int]) -> _Group:
    k = len(seeds)
    full = (1 << k) - 1
    dist: list[Optional[list[float]]] = [None] * (full + 1)
    preds: list[list[int]] = [[] for _ in range(full + 1)]
    splits: list[dict[int, int]] = [{} for _ in range(full + 1)]
    masks = sorted(range(1, full + 1), key=lambda m: (bin(m).count("1"), m))
    for m in masks:
        banned = set(td.static_bans)
        for i in range(k):
            if m >> i & 1:
                banned |= bans[i]
        if m & (m - 1) == 0:
            init = seeds[m.bit_length() - 1]
        else:
            init = {}
            low = m & -m
            sub = (m - 1) & m
            while sub:
                if sub & low and sub != m:
                    d1, d2 = dist[sub], dist[m ^ sub]
                    for u, x in enumerate(d1):
                        if x < INF:
                            y = x + d2[u]
                            if y < init.get(u, INF):
                                init[u] = y
                                splits[m][u] = sub
                sub = (sub - 1) & m
        dist[m], preds[m] = _rev_dijkstra(td.graph, init, banned)
    value = {v: dist[full][v] for v in allowed_s if dist[full][v] < INF}
    return _Group(value, preds, splits)


class TreeSolver:
    """Solves the relaxation of one tree under bans, with an LRU cache per group."""

    def __init__(self, td: _TreeData, cache_size: int = 4096):
        self.td = td
        self.cache: OrderedDict = OrderedDict()
        self.cache_size = cache_size
        self.subtree_edges: dict[str, tuple[int, ...]] = {}
        for s in td.groups:
            es = []
            for c in td.children[s]:
                es.append(td.edge_index[(s, c)])
                es.extend(self.subtree_edges.get(c, ()))
            self.subtree_edges[s] = tuple(sorted(es))
        self.subtree_nodes: dict[str, tuple[str, ...]] = {}
        for s in td.groups:
            ns = [s]
            for c in td.children[s]:
                ns.extend(self.subtree_nodes.get(c, (c,)))
            self.subtree_nodes[s] = tuple(sorted(ns))

    def _group(self, s: str, tree_bans: frozenset, edge_bans: tuple, pins: dict) -> _Group:
        key = (s, tree_bans, tuple(edge_bans[e] for e in self.subtree_edges[s]),
               tuple((n, pins[n]) for n in self.subtree_nodes[s] if n in pins))
        hit = self.cache.get(key)
        if hit is not None:
            self.cache.move_to_end(key)
            return hit
        td = self.td
        seeds, bans = [], []
        for c in td.children[s]:
            e = td.edge_index[(s, c)]
            if td.role[c] == LEAF:
                seeds.append({td.allowed[c][0]: 0})
            else:
                seeds.append(self._group(c, tree_bans, edge_bans, pins).value)
            bans.append(tree_bans | edge_bans[e])
        allowed = td.allowed[s]
        if s in pins:
            allowed = [v for v in allowed if v in pins[s]]
        grp = _solve_group(td, s, seeds, bans, allowed)
        self.cache[key] = grp
        if len(self.cache) > self.cache_size:
            self.cache.popitem(last=False)
        return grp

    def solve(self, tree_bans: frozenset, edge_bans: tuple, pins: Optional[dict] = None) -> Optional[TreeSolution]:
        pins = pins or {}
        td = self.td
        root = td.groups[-1]
        top = self._group(root, tree_bans, edge_bans, pins)
        if not top.value:
            return None
        v0 = min(top.value, key=lambda v: (top.value[v], v))
        placement = {root: v0}
        paths: list[list[int]] = [[] for _ in td.edges]
        stack = [root]
        while stack:
            s = stack.pop()
            grp = self._group(s, tree_bans, edge_bans, pins)
            kids = td.children[s]
            full = (1 << len(kids)) - 1
            todo = [(full, placement[s], [])]
            while todo:
                m, u, prefix = todo.pop()
                while True:
                    a = grp.pred[m][u]
                    if a >= 0:
                        prefix.append(a)
                        u = td.graph.head[a]
                        continue
                    if m & (m - 1) == 0:
                        c = kids[m.bit_length() - 1]
                        placement[c] = u
                        paths[td.edge_index[(s, c)]] = prefix
                        if td.role[c] != LEAF:
                            stack.append(c)
                        break
                    sub = grp.split[m][u]
                    todo.append((sub, u, list(prefix)))
                    m ^= sub
        return TreeSolution(int(top.value[v0]), placement, paths)


# -- search ---------------------------------------------------------------------

class _Search:
    def __init__(self, model: MilpModel, catalog: ConflictCatalog, params: SolveParams):
        self.model = model
        self.catalog = catalog
        self.params = params
        self.data = [_tree_data(ti, lay) for ti, lay in enumerate(model.trees)]
        self.solvers = [TreeSolver(td) for td in self.data]
        self.fixed: list[set[int]] = [set() for _ in model.trees]
        self.fix_version = 0
        self.rows: dict[tuple, list[LinearConstraint]] = {}
        if params.eager:
            for ti, a in catalog.forbidden:
                self.fixed[ti].add(a)
            self.fix_version = 1

    def evaluate(self, node: SearchNode):
        sols = []
        for ti, solver in enumerate(self.solvers):
            bans = node.tree_bans[ti] | self.fixed[ti] if self.fixed[ti] else node.tree_bans[ti]
            sol = solver.solve(bans, node.edge_bans[ti], node.pinned(ti))
            if sol is None:
                return None
            sols.append(sol)
        return sols

    def conflicts(self, sols) -> list[Conflict]:
        return find_conflicts(self.catalog, [s.arcs_per_edge() for s in sols])

    def union_cost(self, sols) -> int:
        total = 0
        for td, s in zip(self.data, sols):
            used = set().union(*s.paths) if s.paths else set()
            total += sum(td.graph.length[a] for a in used)
        return total

    def record(self, c: Conflict) -> None:
        if c.kind == SAFETY_ARC:
            keys = [(SAFETY_ARC, c.ti, c.a), (SAFETY_ARC, c.tj, c.b)]
        elif c.kind == SAFETY_PIPELINE:
            keys = [(SAFETY_PIPELINE, c.ti, c.a)]
        else:
            keys = [(c.kind, c.ti, c.e1, c.a, c.e2, c.b)]
        if all(k in self.rows for k in keys):
            return
        rows = materialize_safety_constraint(self.model, self.catalog, c)
        if c.kind == SAFETY_ARC:
            by_arc = {(r.cols[-1]): r for r in rows}
            for key in keys:
                col = self.model.trees[key[1]].install_col(key[2])
                self.rows.setdefault(key, [by_arc[col]] if col in by_arc else [])
        else:
            self.rows.setdefault(keys[0], rows)

    def children(self, node: SearchNode, c: Conflict) -> list[SearchNode]:
        # Either the second side gives up b, or the first side keeps clear of
        # everything near b. Every feasible layout satisfies one of the two.
        if c.kind == SAFETY_ARC:
            near = {a for t, a, _ in self.catalog.cross_neighbors(c.tj, c.b) if t == c.ti}
            return [node.ban_tree(c.ti, *sorted(near)), node.ban_tree(c.tj, c.b)]
        if c.kind == CORRIDOR:
            return [node.ban_edge(c.ti, c.e1, c.a), node.ban_edge(c.ti, c.e2, c.b)]
        near = {a for a, _ in self.catalog.within_neighbors(c.ti, c.b)} | {c.b, c.b ^ 1}
        return [node.ban_edge(c.ti, c.e1, *sorted(near)), node.ban_edge(c.ti, c.e2, c.b)]

    def greedy(self, order: Sequence[int], budget: int = 200) -> Optional[list[TreeSolution]]:
        """Route trees one by one, keeping clear of what earlier trees installed.

        Each tree is repaired on its own by a bounded depth-first search over
        its within-tree conflicts.
        """
        sols: dict[int, TreeSolution] = {}
        for ti in order:
            bans = {a for t, a in self.catalog.forbidden if t == ti}
            for tj, prev in sols.items():
                for a in set().union(*prev.paths):
                    for tk, b, _ in self.catalog.cross_neighbors(tj, a):
                        if tk == ti:
                            bans.add(b)
            sol = self._repair_tree(ti, frozenset(bans), budget)
            if sol is None:
                return None
            sols[ti] = sol
        return [sols[ti] for ti in range(len(self.solvers))]

    def _repair_tree(self, ti: int, bans: frozenset, budget: int) -> Optional[TreeSolution]:
        base = SearchNode.root(self.model).ban_tree(ti, *bans)
        stack = [base]
        seen = {base}
        empty = [[] for _ in self.solvers]
        while stack and budget > 0:
            node = stack.pop()
            budget -= 1
            sol = self.solvers[ti].solve(node.tree_bans[ti], node.edge_bans[ti])
            if sol is None:
                continue
            usage = list(empty)
            usage[ti] = sol.arcs_per_edge()
            found = find_conflicts(self.catalog, usage)
            if not found:
                return sol
            kids = []
            for child in self.children(node, found[0]):
                if child in seen:
                    continue
                seen.add(child)
                ks = self.solvers[ti].solve(child.tree_bans[ti], child.edge_bans[ti])
                if ks is not None:
                    kids.append((ks.cost, len(kids), child))
            # Cheapest child on top of the stack.
            stack.extend(c for _, _, c in sorted(kids, reverse=True))
        return None


def lower_bound(node: SearchNode, model: MilpModel, catalog: Optional[ConflictCatalog] = None) -> float:
    """Relaxation optimum at ``node``: safety coupling dropped, siblings may share arcs.

    Returns ``inf`` when some tree edge has no surviving route.
    """
    from .milp import ConflictCatalog as _C
    cat = catalog or _C(0, 0, {}, [{} for _ in model.trees], {},
                        [[[0] * len(l.edges) for _ in l.edges] for l in model.trees])
    sols = _Search(model, cat, SolveParams()).evaluate(node)
    return INF if sols is None else float(sum(s.cost for s in sols))


def solve(model: MilpModel, catalog: ConflictCatalog, graphs: Sequence[GridGraph] = (),
          params: SolveParams = SolveParams()) -> tuple[Optional[Layout], SolveReport]:
    t0 = time.perf_counter()
    search = _Search(model, catalog, params)
    deadline = t0 + params.time_limit
    incumbent: Optional[list[TreeSolution]] = None
    inc_cost = INF

    def consider(sols) -> bool:
        nonlocal incumbent, inc_cost
        if search.conflicts(sols):
            return False
        cost = search.union_cost(sols)
        if cost < inc_cost:
            incumbent, inc_cost = sols, cost
        return True

    n = len(model.trees)
    for order in (range(n), range(n - 1, -1, -1)):
        if time.perf_counter() > deadline:
            break
        greedy = search.greedy(list(order))
        if greedy is not None:
            consider(greedy)

    root = SearchNode.root(model)
    seen = {root}
    heap: list = []
    seq = 0
    explored = 0
    status = None
    best_bound = INF

    def push(node, sols):
        nonlocal seq
        bound = sum(s.cost for s in sols)
        heapq.heappush(heap, (bound, -node.depth, seq, node, sols, search.fix_version))
        seq += 1

    sols = search.evaluate(root)
    if sols is not None:
        push(root, sols)

    # Until an incumbent exists, plunge: keep expanding the best fresh child.
    plunge = None
    while heap or plunge:
        if time.perf_counter() > deadline or (params.node_limit is not None and explored >= params.node_limit):
            if plunge:
                push(*plunge)
            status = TIME_LIMIT
            break
        if plunge:
            (node, sols), plunge = plunge, None
            bound, version = sum(x.cost for x in sols), search.fix_version
        else:
            bound, _, _, node, sols, version = heapq.heappop(heap)
        if bound >= inc_cost * (1 - params.gap_tolerance):
            # Best-first: nothing left in the heap can do better.
            heapq.heappush(heap, (bound, 0, -1, node, sols, version))
            break
        if version != search.fix_version:
            sols = search.evaluate(node)
            if sols is not None:
                push(node, sols)
            continue
        explored += 1
        found = search.conflicts(sols)
        if not found:
            consider(sols)
            continue
        for c in found:
            search.record(c)
        pipeline = [c for c in found if c.kind == SAFETY_PIPELINE]
        if pipeline:
            for c in pipeline:
                search.fixed[c.ti].add(c.a)
            search.fix_version += 1
            sols = search.evaluate(node)
            if sols is not None:
                plunge = (node, sols) if incumbent is None else push(node, sols)
            continue
        kids = []
        for child in search.children(node, found[0]):
            if child in seen:
                continue
            seen.add(child)
            csols = search.evaluate(child)
            if csols is None:
                continue
            if sum(x.cost for x in csols) >= inc_cost:
                continue
            if consider(csols):
                continue
            kids.append((child, csols))
        if incumbent is None and kids:
            kids.sort(key=lambda k: sum(x.cost for x in k[1]))
            plunge = kids.pop(0)
        for k in kids:
            push(*k)

    open_bound = min((h[0] for h in heap), default=INF)
    if status == TIME_LIMIT:
        best_bound = min(open_bound, inc_cost)
        status = FEASIBLE if incumbent is not None else TIME_LIMIT
    elif incumbent is not None:
        status = OPTIMAL
        best_bound = inc_cost
    else:
        status = INFEASIBLE
        best_bound = INF

    if params.eager:
        lazy = 0
        catalog_rows = len(all_catalog_rows(model, catalog))
    else:
        lazy = sum(len(r) for r in search.rows.values())
        catalog_rows = 0
    objective = None if incumbent is None else int(inc_cost)
    if objective is not None:
        bb = float(best_bound)
        gap = (objective - bb) / max(1, objective)
    else:
        bb = None if best_bound == INF else float(best_bound)
        gap = None
    added = [r for key in sorted(search.rows, key=repr) for r in search.rows[key]]
    report = SolveReport(status, objective, bb, gap, lazy, time.perf_counter() - t0, explored,
                         1, catalog_rows, added)
    layout = None if incumbent is None else layout_from_solutions(model, incumbent)
    return layout, report


# -- layouts --------------------------------------------------------------------

def layout_from_solutions(model: MilpModel, sols: Sequence[TreeSolution]) -> Layout:
    placement, installed, paths, tree_of = {}, {}, {}, {}
    total = 0
    for lay, sol in zip(model.trees, sols):
        g, tree = lay.graph, lay.tree
        for n, v in sol.placement.items():
            placement[n] = g.vertices[v]
        for n in tree.leaves():
            placement[n] = tree.nodes[n].region
        used = set()
        for e, (s, t) in enumerate(lay.edges):
            arcs = sol.paths[e]
            used.update(arcs)
            verts = [g.vertices[sol.placement[s]]] + [g.vertices[g.head[a]] for a in arcs]
            paths[(s, t)] = verts
            tree_of[(s, t)] = tree.id
        installed[tree.id] = [g.arc_points(a) for a in sorted(used)]
        total += sum(g.length[a] for a in used)
    return Layout(placement, installed, paths, total, tree_of)


def extract_layout(values, model: MilpModel) -> Layout:
    """Decode a 0/1 MILP solution vector into a Layout.

    Flow on arcs not reachable along the source-to-sink walk (cycles left by
    the solver) is dropped with a warning; installed arcs are recomputed from
    the walked paths.
    """
    x = np.asarray(np.round(values), dtype=np.int64)
    sols = []
    for ti, lay in enumerate(model.trees):
        g, tree = lay.graph, lay.tree
        place = {}
        for n, cols in lay.place_cols.items():
            chosen = [v for v, c in cols.items() if x[c] == 1]
            if len(chosen) != 1:
                raise ValueError(f"node {n} has {len(chosen)} placements")
            place[n] = chosen[0]
        for n in tree.leaves():
            place[n] = g.admissible[n][0]
        paths = []
        for e, (s, t) in enumerate(lay.edges):
            on = {a for a in range(g.num_arcs) if x[lay.flow_col(e, a)] == 1}
            u, target, walk = place[s], place[t], []
            seen = {u: 0}  # vertex -> walk length on arrival
            while u != target:
                nxt = [a for a in g.out_arcs[u] if a in on]
                if not nxt:
                    raise ValueError(f"flow of edge ({s},{t}) breaks at vertex {g.vertices[u]}")
                a = nxt[0]
                walk.append(a)
                on.discard(a)
                u = g.head[a]
                if u in seen:
                    # closed a cycle hanging off the path: cut it out
                    at = seen[u]
                    for b in walk[at:]:
                        seen.pop(g.head[b], None)
                    log.warning("dropping a %d-arc flow cycle on edge (%s,%s)", len(walk) - at, s, t)
                    del walk[at:]
                seen[u] = len(walk)
            if on:
                log.warning("dropping %d flow arcs off the path of edge (%s,%s)", len(on), s, t)
            paths.append(walk)
        sols.append(TreeSolution(0, place, paths))
    return layout_from_solutions(model, sols)


def solve_instance(inst: Instance, params: SolveParams = SolveParams(), *, graphs=None):
    """Discretize, build the model and catalog, and solve."""
    graphs = graphs if graphs is not None else discretize(inst)
    model = build_core_model(graphs, inst)
    catalog = build_conflict_catalog(graphs, inst)
    layout, report = solve(model, catalog, graphs, params)
    return layout, report, model, catalog

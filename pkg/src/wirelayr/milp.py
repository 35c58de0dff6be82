"""Binary MILP for the wiring problem: core rows eagerly, safety rows lazily.

Column families, in order: flow ``f[T, (s,t), a]``, placement ``y[T, s, v]``
(roots and intermediates; leaves are fixed), install ``x[T, a]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .diagram import INTERMEDIATE, LEAF, ROOT, Instance, WiringTree
from .geometry import gap_sum_to_many
from .gridgen import GridGraph

FLOW, PLACE, INSTALL = "flow", "place", "install"

# Row families.
PLACEMENT = "placement"
FLOW_BALANCE = "flow_balance"
COUPLING = "coupling"
LEAF_IN = "leaf_in"
LEAF_OUT = "leaf_out"
UNIDIR = "unidir"
SAFETY_ARC = "safety_arc"
SAFETY_FLOW = "safety_flow"
CORRIDOR = "corridor"
SAFETY_PIPELINE = "safety_pipeline"
CORE_FAMILIES = (PLACEMENT, FLOW_BALANCE, COUPLING, LEAF_IN, LEAF_OUT, UNIDIR)


class VarRef(NamedTuple):
    kind: str
    tree: int
    key: object  # (s, t) for flow, node id for place, None for install
    index: int   # arc for flow/install, vertex for place
    col: int


@dataclass(frozen=True)
class LinearConstraint:
    cols: tuple[int, ...]
    coefs: tuple[int, ...]
    sense: str  # "<=", "=", ">="
    rhs: int
    tag: str

    def evaluate(self, values) -> bool:
        lhs = sum(c * values[j] for j, c in zip(self.cols, self.coefs))
        if self.sense == "<=":
            return lhs <= self.rhs
        if self.sense == ">=":
            return lhs >= self.rhs
        return lhs == self.rhs


@dataclass
class TreeLayout:
    """Column bookkeeping for one tree."""

    tree: WiringTree
    graph: GridGraph
    edges: list[tuple[str, str]]
    flow_base: int
    place_cols: dict[str, dict[int, int]]
    install_base: int

    def flow_col(self, e: int, a: int) -> int:
        return self.flow_base + e * self.graph.num_arcs + a

    def install_col(self, a: int) -> int:
        return self.install_base + a


@dataclass
class MilpModel:
    variables: list[VarRef]
    matrix: sp.csr_matrix
    senses: list[str]
    rhs: np.ndarray
    tags: list[str]
    objective: np.ndarray
    big_m: int
    trees: list[TreeLayout]
    extra: list[LinearConstraint] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_core_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_rows(self) -> int:
        return self.num_core_rows + len(self.extra)

    def row(self, i: int) -> LinearConstraint:
        if i >= self.num_core_rows:
            return self.extra[i - self.num_core_rows]
        lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return LinearConstraint(tuple(int(c) for c in self.matrix.indices[lo:hi]),
                                tuple(int(v) for v in self.matrix.data[lo:hi]),
                                self.senses[i], int(self.rhs[i]), self.tags[i])

    def rows(self) -> Iterable[LinearConstraint]:
        for i in range(self.num_rows):
            yield self.row(i)

    def with_rows(self, rows: Iterable[LinearConstraint]) -> "MilpModel":
        return MilpModel(self.variables, self.matrix, self.senses, self.rhs, self.tags,
                         self.objective, self.big_m, self.trees, self.extra + list(rows))

    def violated_rows(self, values: np.ndarray) -> list[int]:
        """Indices of rows the 0/1 vector ``values`` violates."""
        lhs = self.matrix @ values
        bad = []
        for i, (s, v, r) in enumerate(zip(self.senses, lhs, self.rhs)):
            if (s == "=" and v != r) or (s == "<=" and v > r) or (s == ">=" and v < r):
                bad.append(i)
        for k, row in enumerate(self.extra):
            if not row.evaluate(values):
                bad.append(self.num_core_rows + k)
        return bad


def tree_edges_list(tree: WiringTree) -> list[tuple[str, str]]:
    return list(tree.tree_edges)


def expected_counts(graphs: Sequence[GridGraph], inst: Instance) -> tuple[int, int]:
    """(variables, core rows) predicted by the counting identities."""
    nv = nr = 0
    for tree, g in zip(inst.forest, graphs):
        E, A, V = len(tree.tree_edges), g.num_arcs, len(g.vertices)
        placed = [n for n, node in tree.nodes.items() if node.role != LEAF]
        nv += E * A + A + sum(len(g.admissible[n]) for n in placed)
        nr += len(placed) + E * V + E * A + 2 * len(tree.leaves()) + E * (A // 2)
    return nv, nr


def build_core_model(graphs: Sequence[GridGraph], inst: Instance) -> MilpModel:
    variables: list[VarRef] = []
    layouts: list[TreeLayout] = []
    col = 0
    # Column layout: all flow columns, then placement, then install.
    flow_bases = []
    for ti, (tree, g) in enumerate(zip(inst.forest, graphs)):
        flow_bases.append(col)
        for e, st in enumerate(tree.tree_edges):
            variables.extend(VarRef(FLOW, ti, st, a, col + a) for a in range(g.num_arcs))
            col += g.num_arcs
    place_cols_all = []
    for ti, (tree, g) in enumerate(zip(inst.forest, graphs)):
        pc: dict[str, dict[int, int]] = {}
        for nid, node in tree.nodes.items():
            if node.role == LEAF:
                continue
            pc[nid] = {}
            for v in g.admissible[nid]:
                pc[nid][v] = col
                variables.append(VarRef(PLACE, ti, nid, v, col))
                col += 1
        place_cols_all.append(pc)
    for ti, (tree, g) in enumerate(zip(inst.forest, graphs)):
        variables.extend(VarRef(INSTALL, ti, None, a, col + a) for a in range(g.num_arcs))
        layouts.append(TreeLayout(tree, g, list(tree.tree_edges), flow_bases[ti],
                                  place_cols_all[ti], col))
        col += g.num_arcs

    objective = np.zeros(col, dtype=np.int64)
    for lay in layouts:
        objective[lay.install_base:lay.install_base + lay.graph.num_arcs] = lay.graph.length

    rows, cols, vals, senses, rhs, tags = [], [], [], [], [], []
    nrow = 0

    def block(r, c, v, n, sense, b, tag):
        nonlocal nrow
        rows.append(np.asarray(r, dtype=np.int64) + nrow)
        cols.append(np.asarray(c, dtype=np.int64))
        vals.append(np.asarray(v, dtype=np.int64))
        senses.extend([sense] * n)
        rhs.append(np.broadcast_to(np.asarray(b, dtype=np.int64), (n,)))
        tags.extend([tag] * n)
        nrow += n

    # Placement rows.
    for lay in layouts:
        for nid, vc in lay.place_cols.items():
            cs = list(vc.values())
            block([0] * len(cs), cs, [1] * len(cs), 1, "=", 1, PLACEMENT)

    # Flow balance: out - in - y^s_v + y^t_v = -[v is the leaf target].
    for lay in layouts:
        g = lay.graph
        V, A = len(g.vertices), g.num_arcs
        tail = np.asarray(g.tail, dtype=np.int64)
        head = np.asarray(g.head, dtype=np.int64)
        arcs = np.arange(A, dtype=np.int64)
        for e, (s, t) in enumerate(lay.edges):
            r = [tail, head]
            c = [lay.flow_col(e, 0) + arcs] * 2
            v = [np.ones(A, dtype=np.int64), -np.ones(A, dtype=np.int64)]
            sv = list(lay.place_cols[s].items())
            r.append([p for p, _ in sv]); c.append([q for _, q in sv]); v.append([-1] * len(sv))
            b = np.zeros(V, dtype=np.int64)
            if lay.tree.nodes[t].role == LEAF:
                b[g.admissible[t][0]] = -1
            else:
                tv = list(lay.place_cols[t].items())
                r.append([p for p, _ in tv]); c.append([q for _, q in tv]); v.append([1] * len(tv))
            block(np.concatenate([np.asarray(x, dtype=np.int64) for x in r]),
                  np.concatenate([np.asarray(x, dtype=np.int64) for x in c]),
                  np.concatenate([np.asarray(x, dtype=np.int64) for x in v]), V, "=", b, FLOW_BALANCE)

    # Coupling f - x <= 0.
    for lay in layouts:
        A = lay.graph.num_arcs
        arcs = np.arange(A, dtype=np.int64)
        for e in range(len(lay.edges)):
            r = np.concatenate([arcs, arcs])
            c = np.concatenate([lay.flow_col(e, 0) + arcs, lay.install_base + arcs])
            v = np.concatenate([np.ones(A, dtype=np.int64), -np.ones(A, dtype=np.int64)])
            block(r, c, v, A, "<=", 0, COUPLING)

    # Leaf degree rows.
    for lay in layouts:
        g = lay.graph
        for nid in lay.tree.leaves():
            ell = g.admissible[nid][0]
            ins = g.in_arcs[ell]
            block([0] * len(ins), [lay.install_col(a) for a in ins], [1] * len(ins), 1, "=", 1, LEAF_IN)
            outs = g.out_arcs[ell]
            block([0] * len(outs), [lay.install_col(a) for a in outs], [1] * len(outs), 1, "=", 0, LEAF_OUT)

    # f[a] + f[rev a] <= 1 per tree edge and undirected edge.
    for lay in layouts:
        half = lay.graph.num_arcs // 2
        k = np.arange(half, dtype=np.int64)
        for e in range(len(lay.edges)):
            r = np.concatenate([k, k])
            c = np.concatenate([lay.flow_col(e, 0) + 2 * k, lay.flow_col(e, 0) + 2 * k + 1])
            block(r, c, np.ones(2 * half, dtype=np.int64), half, "<=", 1, UNIDIR)

    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
    else:
        r = c = v = np.zeros(0, dtype=np.int64)
    matrix = sp.csr_matrix((v, (r, c)), shape=(nrow, col), dtype=np.int64)
    matrix.sum_duplicates()
    matrix.sort_indices()
    big_m = sum(g.num_arcs for g in graphs)
    rhs_arr = np.concatenate(rhs) if rhs else np.zeros(0, dtype=np.int64)
    return MilpModel(variables, matrix, senses, rhs_arr, tags, objective, big_m, layouts)


# -- conflict catalog ---------------------------------------------------------

SIBLING, ADJACENT, DISJOINT = 0, 1, 2


def edge_relations(edges: Sequence[tuple[str, str]]) -> list[list[int]]:
    """Pairwise relation of tree edges: same parent, sharing a node, or neither."""
    n = len(edges)
    rel = [[SIBLING] * n for _ in range(n)]
    for i, (s1, t1) in enumerate(edges):
        for j, (s2, t2) in enumerate(edges):
            if i == j or s1 == s2:
                continue
            rel[i][j] = ADJACENT if {s1, t1} & {s2, t2} else DISJOINT
    return rel


@dataclass
class ConflictCatalog:
    """Arc pairs closer than the safety distance and pipeline-forbidden arcs.

    Pairs are stored per undirected edge (``k`` covers arcs ``2k`` and
    ``2k + 1``). ``cross`` maps ``(tree, k)`` to neighbours in other trees;
    ``within`` maps ``k`` to neighbours in the same tree, excluding ``k``
    itself. Whether a within-tree pair is in scope depends on which tree
    edges carry the arcs, so that is decided at check time.
    """

    delta: int
    clearance: int
    cross: dict[tuple[int, int], list[tuple[int, int, int]]]
    within: list[dict[int, list[tuple[int, int]]]]
    forbidden: dict[tuple[int, int], tuple[str, int]]
    relations: list[list[list[int]]]

    @property
    def arc_pairs(self) -> list[tuple[tuple[int, int], tuple[int, int], int]]:
        """Eligible arc pairs ``((tree, a), (tree', a'), distance)``, each once."""
        out = []
        for (ti, k), nbs in sorted(self.cross.items()):
            for tj, k2, d in nbs:
                if (ti, k) < (tj, k2):
                    out.extend(((ti, 2 * k + i), (tj, 2 * k2 + j), d) for i in (0, 1) for j in (0, 1))
        for ti, nb in enumerate(self.within):
            for k in sorted(nb):
                for k2, d in nb[k]:
                    if k < k2:
                        out.extend(((ti, 2 * k + i), (ti, 2 * k2 + j), d) for i in (0, 1) for j in (0, 1))
        return out

    @property
    def pipeline_forbidden(self) -> list[tuple[int, int, str, int]]:
        """``(tree, arc, pipeline id, distance)`` for arcs too close to a foreign pipeline."""
        return [(ti, a, pid, d) for (ti, a), (pid, d) in sorted(self.forbidden.items())]

    def cross_neighbors(self, ti: int, a: int) -> list[tuple[int, int, int]]:
        return [(tj, 2 * k2 + j, d) for tj, k2, d in self.cross.get((ti, a >> 1), ())
                for j in (0, 1)]

    def within_neighbors(self, ti: int, a: int) -> list[tuple[int, int]]:
        return [(2 * k2 + j, d) for k2, d in self.within[ti].get(a >> 1, ()) for j in (0, 1)]


def _edge_extents(g: GridGraph) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(g.vertices, dtype=np.int64).reshape(-1, 3)
    t = np.asarray(g.tail[0::2], dtype=np.int64)
    h = np.asarray(g.head[0::2], dtype=np.int64)
    return np.minimum(pts[t], pts[h]), np.maximum(pts[t], pts[h])


def _close_pairs(lo1, hi1, lo2, hi2, limit: int, chunk: int = 256):
    """Index pairs (i, j, gap) with l1 box gap < limit."""
    out = []
    for s in range(0, len(lo1), chunk):
        a, b = lo1[s:s + chunk, None, :], hi1[s:s + chunk, None, :]
        gap = np.maximum(np.maximum(a, lo2[None]) - np.minimum(b, hi2[None]), 0).sum(axis=2)
        ii, jj = np.nonzero(gap < limit)
        out.append((ii + s, jj, gap[ii, jj]))
    if not out:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0, int)
    return tuple(np.concatenate(x) for x in zip(*out))


def build_conflict_catalog(graphs: Sequence[GridGraph], inst: Instance) -> ConflictCatalog:
    delta, clearance = inst.delta, inst.clearance
    ext = [_edge_extents(g) for g in graphs]
    cross: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
    within: list[dict[int, list[tuple[int, int]]]] = [{} for _ in graphs]
    if delta > 0:
        for ti in range(len(graphs)):
            for tj in range(ti, len(graphs)):
                ii, jj, dd = _close_pairs(*ext[ti], *ext[tj], delta)
                for i, j, d in zip(ii.tolist(), jj.tolist(), dd.tolist()):
                    if ti == tj:
                        if i != j:
                            within[ti].setdefault(i, []).append((j, d))
                    else:
                        cross.setdefault((ti, i), []).append((tj, j, d))
                        cross.setdefault((tj, j), []).append((ti, i, d))
        for nbs in cross.values():
            nbs.sort()
        for nb in within:
            for v in nb.values():
                v.sort()
    forbidden: dict[tuple[int, int], tuple[str, int]] = {}
    if clearance > 0:
        for ti, (tree, g) in enumerate(zip(inst.forest, graphs)):
            lo, hi = ext[ti]
            for p in inst.pipelines:
                if p.id == tree.pipeline_id:
                    continue
                best = None
                for u, v in zip(p.polyline, p.polyline[1:]):
                    plo = np.minimum(u, v)
                    phi = np.maximum(u, v)
                    d = gap_sum_to_many(plo, phi, lo, hi)
                    best = d if best is None else np.minimum(best, d)
                for k in np.nonzero(best < clearance)[0].tolist():
                    d = int(best[k])
                    for a in (2 * k, 2 * k + 1):
                        if (ti, a) not in forbidden or forbidden[(ti, a)][1] > d:
                            forbidden[(ti, a)] = (p.id, d)
    relations = [edge_relations(t.tree_edges) for t in inst.forest]
    return ConflictCatalog(delta, clearance, cross, within, forbidden, relations)


# -- conflicts in a candidate routing -------------------------------------------

@dataclass(frozen=True, order=True)
class Conflict:
    """A catalog entry violated by a candidate routing.

    ``kind`` is one of ``SAFETY_PIPELINE`` (arc ``a`` of tree ``ti``),
    ``SAFETY_ARC`` (``a`` in ``ti`` against ``b`` in ``tj``),
    ``SAFETY_FLOW`` (tree edge ``e1`` on ``a`` against ``e2`` on ``b``, same
    tree) or ``CORRIDOR`` (non-sibling tree edges ``e1`` and ``e2`` on the
    same corridor).
    """

    rank: int
    dist: int
    kind: str
    ti: int
    a: int
    tj: int = -1
    b: int = -1
    e1: int = -1
    e2: int = -1


def find_conflicts(catalog: ConflictCatalog, usage: Sequence[Sequence[Iterable[int]]],
                   *, first_only: bool = False) -> list[Conflict]:
    """Violated catalog entries for per-tree, per-tree-edge arc sets.

    Sorted with pipeline fixings first, then closest pairs first.
    """
    installed = [set().union(*edges) if edges else set() for edges in usage]
    out: list[Conflict] = []
    for ti, inst_arcs in enumerate(installed):
        for a in sorted(inst_arcs):
            if (ti, a) in catalog.forbidden:
                out.append(Conflict(0, catalog.forbidden[(ti, a)][1], SAFETY_PIPELINE, ti, a))
    if first_only and out:
        return [min(out)]
    for ti, inst_arcs in enumerate(installed):
        for a in sorted(inst_arcs):
            for tj, b, d in catalog.cross_neighbors(ti, a):
                if tj > ti and b in installed[tj]:
                    out.append(Conflict(1, d, SAFETY_ARC, ti, a, tj, b))
    for ti, edges in enumerate(usage):
        rel = catalog.relations[ti]
        users: dict[int, list[int]] = {}
        for e, arcs in enumerate(edges):
            for a in arcs:
                users.setdefault(a, []).append(e)
        for a in sorted(users):
            ea = users[a]
            for i, e1 in enumerate(ea):
                for e2 in ea[i + 1:]:
                    if rel[e1][e2] != SIBLING:
                        out.append(Conflict(1, 0, CORRIDOR, ti, a, ti, a, e1, e2))
            r = a ^ 1
            if a < r and r in users:
                for e1 in ea:
                    for e2 in users[r]:
                        if rel[e1][e2] == DISJOINT:
                            out.append(Conflict(1, 0, CORRIDOR, ti, a, ti, r, e1, e2))
            for b, d in catalog.within_neighbors(ti, a):
                if b <= a or b not in users:
                    continue
                for e1 in ea:
                    for e2 in users[b]:
                        if e1 != e2 and rel[e1][e2] == DISJOINT:
                            out.append(Conflict(1, d, SAFETY_FLOW, ti, a, ti, b, e1, e2))
    out.sort()
    return out[:1] if first_only else out


def materialize_safety_constraint(model: MilpModel, catalog: ConflictCatalog,
                                  conflict: Conflict) -> list[LinearConstraint]:
    """Rows that cut off ``conflict``; empty when the neighbourhood is empty."""
    if conflict.kind == SAFETY_PIPELINE:
        return [LinearConstraint((model.trees[conflict.ti].install_col(conflict.a),), (1,), "=", 0,
                                 SAFETY_PIPELINE)]
    if conflict.kind == SAFETY_ARC:
        return [r for r in (safety_arc_row(model, catalog, conflict.ti, conflict.a),
                            safety_arc_row(model, catalog, conflict.tj, conflict.b)) if r]
    lay = model.trees[conflict.ti]
    return [LinearConstraint((lay.flow_col(conflict.e1, conflict.a), lay.flow_col(conflict.e2, conflict.b)),
                             (1, 1), "<=", 1, conflict.kind)]


def safety_arc_row(model: MilpModel, catalog: ConflictCatalog, ti: int, a: int) -> Optional[LinearConstraint]:
    """sum of x over cross-tree neighbours of ``a`` <= M (1 - x_a)."""
    nbs = catalog.cross_neighbors(ti, a)
    if not nbs:
        return None
    cols = [model.trees[tj].install_col(b) for tj, b, _ in nbs] + [model.trees[ti].install_col(a)]
    coefs = [1] * len(nbs) + [model.big_m]
    return LinearConstraint(tuple(cols), tuple(coefs), "<=", model.big_m, SAFETY_ARC)


def all_catalog_rows(model: MilpModel, catalog: ConflictCatalog) -> list[LinearConstraint]:
    """Every row of the lazy family, in deterministic order."""
    rows = []
    for (ti, a) in sorted(catalog.forbidden):
        rows.append(LinearConstraint((model.trees[ti].install_col(a),), (1,), "=", 0, SAFETY_PIPELINE))
    for ti, lay in enumerate(model.trees):
        for a in range(lay.graph.num_arcs):
            r = safety_arc_row(model, catalog, ti, a)
            if r:
                rows.append(r)
    for ti, lay in enumerate(model.trees):
        rel = catalog.relations[ti]
        E = len(lay.edges)
        pairs = [(e1, e2) for e1 in range(E) for e2 in range(e1 + 1, E) if rel[e1][e2] != SIBLING]
        for e1, e2 in pairs:
            for a in range(lay.graph.num_arcs):
                rows.append(LinearConstraint((lay.flow_col(e1, a), lay.flow_col(e2, a)), (1, 1), "<=", 1, CORRIDOR))
                if rel[e1][e2] == DISJOINT:
                    rows.append(LinearConstraint((lay.flow_col(e1, a), lay.flow_col(e2, a ^ 1)), (1, 1),
                                                 "<=", 1, CORRIDOR))
        disjoint = [(e1, e2) for e1, e2 in pairs if rel[e1][e2] == DISJOINT]
        if disjoint:
            for a in range(lay.graph.num_arcs):
                for b, _ in catalog.within_neighbors(ti, a):
                    if b < a:
                        continue
                    for e1, e2 in disjoint:
                        for x, y in ((e1, e2), (e2, e1)):
                            rows.append(LinearConstraint((lay.flow_col(x, a), lay.flow_col(y, b)), (1, 1),
                                                         "<=", 1, SAFETY_FLOW))
    return rows


# -- export ---------------------------------------------------------------------

def _col_name(j: int) -> str:
    return f"C{j:07d}"


def _row_name(i: int) -> str:
    return f"R{i:07d}"


_MPS_SENSE = {"<=": "L", "=": "E", ">=": "G"}


def _mps_line(f1: str, f2: str, f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    # Fixed-form fields start at columns 2, 5, 15, 25, 40 and 50.
    line = f" {f1:<2} {f2:<8}"
    if f3:
        line += f"  {f3:<8}  {f4:>12}"
    if f5:
        line = line.ljust(36)
        line += f"   {f5:<8}  {f6:>12}"
    return line.rstrip()


def _columns(model: MilpModel):
    """Per column, the (row index, coefficient) entries in row order."""
    rows = list(model.rows())
    per_col: list[list[tuple[int, int]]] = [[] for _ in range(model.num_vars)]
    for i, r in enumerate(rows):
        for j, c in zip(r.cols, r.coefs):
            per_col[j].append((i, c))
    return rows, per_col


def model_to_mps(model: MilpModel, name: str = "WIRING") -> str:
    rows, per_col = _columns(model)
    out = [f"NAME          {name}", "ROWS", " N  COST"]
    out += [f" {_MPS_SENSE[r.sense]}  {_row_name(i)}" for i, r in enumerate(rows)]
    out.append("COLUMNS")
    out.append(_mps_line("", "MARKER", "'MARKER'", "", "'INTORG'"))
    for j in range(model.num_vars):
        entries = []
        if model.objective[j]:
            entries.append(("COST", int(model.objective[j])))
        entries += [(_row_name(i), c) for i, c in per_col[j]]
        if not entries:
            entries.append(("COST", 0))
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            f = [_col_name(j), pair[0][0], str(pair[0][1])]
            if len(pair) == 2:
                f += [pair[1][0], str(pair[1][1])]
            out.append(_mps_line("", *f))
    out.append(_mps_line("", "MARKER", "'MARKER'", "", "'INTEND'"))
    out.append("RHS")
    for i, r in enumerate(rows):
        if r.rhs:
            out.append(_mps_line("", "RHS", _row_name(i), str(r.rhs)))
    out.append("BOUNDS")
    out += [_mps_line("BV", "BND", _col_name(j)) for j in range(model.num_vars)]
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def _lp_terms(pairs: Iterable[tuple[int, str]]) -> list[str]:
    terms = []
    for c, name in pairs:
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        terms.append(f"{sign} {name}" if mag == 1 else f"{sign} {mag} {name}")
    if terms and terms[0].startswith("+ "):
        terms[0] = terms[0][2:]
    return terms


def _wrap(prefix: str, terms: list[str], suffix: str) -> list[str]:
    lines, cur = [], prefix
    for t in terms:
        if len(cur) + len(t) + 1 > 250:
            lines.append(cur)
            cur = "   "
        cur += " " + t
    lines.append(cur + suffix)
    return lines


def model_to_lp(model: MilpModel) -> str:
    out = ["\\ wiring layout model", "Minimize"]
    obj = [(int(c), _col_name(j)) for j, c in enumerate(model.objective) if c]
    out += _wrap(" COST:", _lp_terms(obj) or ["0 " + _col_name(0)] if model.num_vars else ["0"], "")
    out.append("Subject To")
    for i, r in enumerate(model.rows()):
        terms = _lp_terms((c, _col_name(j)) for j, c in zip(r.cols, r.coefs))
        out += _wrap(f" {_row_name(i)}:", terms or ["0 " + _col_name(0)], f" {r.sense} {r.rhs}")
    if model.num_vars:
        out.append("Binaries")
        names = [_col_name(j) for j in range(model.num_vars)]
        out += [" " + " ".join(names[k:k + 10]) for k in range(0, len(names), 10)]
    out.append("End")
    return "\n".join(out) + "\n"


def export_model(model: MilpModel, fmt: str, path: Optional[str | Path] = None) -> str:
    """Render ``model`` as fixed-form MPS or CPLEX LP; write it when ``path`` is given."""
    if fmt == "mps":
        text = model_to_mps(model)
    elif fmt == "lp":
        text = model_to_lp(model)
    else:
        raise ValueError(f"unknown model format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def empty_model() -> MilpModel:
    return MilpModel([], sp.csr_matrix((0, 0), dtype=np.int64), [], np.zeros(0, dtype=np.int64), [],
                     np.zeros(0, dtype=np.int64), 0, [])

import json
import logging

import numpy as np
import pytest

from oracles import arc_usage, corridor_instance, hand_instance, highs_solve
from wirelayr.engine import (
    FEASIBLE,
    INFEASIBLE,
    OPTIMAL,
    TIME_LIMIT,
    SearchNode,
    SolveParams,
    extract_layout,
    lower_bound,
    solve,
    solve_instance,
)
from wirelayr.milp import ConflictCatalog, all_catalog_rows, empty_model, find_conflicts
from wirelayr.synth import GeneratorParams, generate
from wirelayr.validate import check_layout


@pytest.mark.parametrize("delta", [0, 1, 3])
def test_hand_optimum(delta):
    layout, rep, _, _ = solve_instance(hand_instance(delta))
    assert rep.status == OPTIMAL and rep.objective == 18 == layout.total_length
    assert rep.gap == 0
    assert layout.placement["v"] == (4, 0, 0)
    assert check_layout(hand_instance(delta), layout).ok


def test_lower_bound_is_relaxation_value():
    layout, rep, m, cat = solve_instance(hand_instance())
    assert lower_bound(SearchNode.root(m), m) == 18
    # banning every arc out of the tap column leaves no route
    g = m.trees[0].graph
    taps = m.trees[0].place_cols["r"]
    node = SearchNode.root(m).ban_tree(0, *[a for v in taps for a in g.out_arcs[v]])
    assert lower_bound(node, m) == float("inf")


def test_engine_matches_highs_on_generated():
    for seed in range(3):
        inst = generate(GeneratorParams(seed=seed, branches_per_pipeline=2, nodes_per_branch=3, delta=3))
        layout, rep, m, cat = solve_instance(inst)
        res = highs_solve(m, all_catalog_rows(m, cat))
        assert res.status == 0
        assert round(res.fun) == rep.objective
        lay2 = extract_layout(res.x, m)
        assert lay2.total_length == rep.objective
        assert check_layout(inst, lay2).ok


def test_final_layout_has_no_catalog_conflicts():
    inst = generate(GeneratorParams(seed=8, branches_per_pipeline=3, nodes_per_branch=5, delta=5))
    layout, rep, m, cat = solve_instance(inst, SolveParams(time_limit=60))
    assert rep.status == OPTIMAL
    assert find_conflicts(cat, arc_usage(layout, m)) == []
    assert rep.lazy_rows >= 1


def test_corridor_is_infeasible():
    layout, rep, _, _ = solve_instance(corridor_instance())
    assert rep.status == INFEASIBLE and layout is None and rep.objective is None
    layout, rep, _, _ = solve_instance(corridor_instance(1))
    assert rep.status == OPTIMAL and check_layout(corridor_instance(1), layout).ok


def test_eager_matches_lazy():
    inst = generate(GeneratorParams(seed=2, branches_per_pipeline=3, nodes_per_branch=3, delta=3))
    _, lazy, _, _ = solve_instance(inst)
    _, eager, _, _ = solve_instance(inst, SolveParams(eager=True))
    assert lazy.objective == eager.objective
    assert eager.catalog_rows > 0 and lazy.catalog_rows == 0


def test_time_limit_reports_honestly():
    inst = generate(GeneratorParams(seed=0, num_pipelines=2, branches_per_pipeline=3, nodes_per_branch=10, delta=5))
    layout, rep, _, _ = solve_instance(inst, SolveParams(time_limit=0.5))
    assert rep.status in (OPTIMAL, FEASIBLE, TIME_LIMIT)
    if rep.status == FEASIBLE:
        assert layout is not None and rep.objective >= rep.best_bound and rep.gap >= 0
        assert check_layout(inst, layout).ok
    if rep.status == TIME_LIMIT:
        assert layout is None


def test_node_limit():
    inst = generate(GeneratorParams(seed=1, branches_per_pipeline=3, nodes_per_branch=5, delta=5))
    _, rep, _, _ = solve_instance(inst, SolveParams(node_limit=1))
    assert rep.nodes <= 2


def test_deterministic():
    inst = generate(GeneratorParams(seed=4, num_pipelines=2, branches_per_pipeline=3, nodes_per_branch=5, delta=3))
    runs = []
    for _ in range(2):
        layout, rep, _, _ = solve_instance(inst)
        runs.append(json.dumps([layout.to_dict(), rep.to_dict()], sort_keys=True))
    assert runs[0] == runs[1]
    assert "wall_time" not in json.loads(runs[0])[1]


def _vector(layout, m):
    x = np.zeros(m.num_vars)
    for lay in m.trees:
        g = lay.graph
        for e, st in enumerate(lay.edges):
            verts = layout.paths[st]
            for p, q in zip(verts, verts[1:]):
                a = next(a for a in g.out_arcs[g.index[p]] if g.head[a] == g.index[q])
                x[lay.flow_col(e, a)] = 1
                x[lay.install_col(a)] = 1
        for n, cols in lay.place_cols.items():
            x[cols[g.index[layout.placement[n]]]] = 1
    return x


def _square(g, corner):
    """Arcs of the unit grid square anticlockwise from ``corner`` in the z = 0 plane, if present."""
    xs = sorted({p.x for p in g.vertices})
    ys = sorted({p.y for p in g.vertices})
    i, j = xs.index(corner[0]), ys.index(corner[1])
    pts = [(xs[i], ys[j], 0), (xs[i + 1], ys[j], 0), (xs[i + 1], ys[j + 1], 0), (xs[i], ys[j + 1], 0)]
    arcs = []
    for p, q in zip(pts, pts[1:] + pts[:1]):
        u, v = g.index[p], g.index[q]
        arcs.append(next(a for a in g.out_arcs[u] if g.head[a] == v))
    return arcs


def test_extract_layout_drops_detached_cycle(caplog):
    inst = hand_instance()
    layout, rep, m, _ = solve_instance(inst)
    x = _vector(layout, m)
    lay = m.trees[0]
    for a in _square(lay.graph, (6, 2)):
        x[lay.flow_col(0, a)] = 1
    with caplog.at_level(logging.WARNING, logger="wirelayr.engine"):
        back = extract_layout(x, m)
    assert back.paths == layout.paths and back.total_length == 18
    assert any("dropping" in r.message for r in caplog.records)


def test_extract_layout_cuts_cycle_on_path(caplog):
    inst = hand_instance()
    layout, rep, m, _ = solve_instance(inst)
    x = _vector(layout, m)
    lay = m.trees[0]
    # a loop through (4, 0) and (6, 0), vertices on the path, sharing no arc with it
    for a in _square(lay.graph, (4, -3)):
        x[lay.flow_col(1, a)] = 1
    with caplog.at_level(logging.WARNING, logger="wirelayr.engine"):
        back = extract_layout(x, m)
    assert back.paths == layout.paths
    assert any("cycle" in r.message for r in caplog.records)


def test_extract_layout_rejects_broken_flow():
    layout, rep, m, _ = solve_instance(hand_instance())
    x = _vector(layout, m)
    lay = m.trees[0]
    x[lay.flow_base:lay.flow_base + lay.graph.num_arcs] = 0
    with pytest.raises(ValueError):
        extract_layout(x, m)


def test_layout_json():
    layout, rep, _, _ = solve_instance(hand_instance())
    d = json.loads(json.dumps(layout.to_dict()))
    assert d["total_length"] == 18
    assert {(p["parent"], p["child"]) for p in d["paths"]} == {("r", "v"), ("v", "l1"), ("v", "l2")}


def test_solve_without_trees():
    layout, rep = solve(empty_model(), ConflictCatalog(0, 0, {}, [], {}, []))
    assert rep.status == OPTIMAL and rep.objective == 0

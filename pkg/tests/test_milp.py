import highspy
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import chain_tree, hand_instance, highs_solve
from wirelayr.diagram import Instance, Pipeline
from wirelayr.engine import solve_instance
from wirelayr.geometry import Box3, Point3, raw_segment_distance
from wirelayr.gridgen import discretize
from wirelayr.milp import (
    CORE_FAMILIES,
    CORRIDOR,
    SAFETY_ARC,
    SAFETY_FLOW,
    SAFETY_PIPELINE,
    Conflict,
    LinearConstraint,
    all_catalog_rows,
    build_conflict_catalog,
    build_core_model,
    edge_relations,
    empty_model,
    expected_counts,
    export_model,
    find_conflicts,
    materialize_safety_constraint,
    model_to_lp,
    model_to_mps,
)
from wirelayr.synth import GeneratorParams, generate


def _model(inst):
    graphs = discretize(inst)
    return graphs, build_core_model(graphs, inst), build_conflict_catalog(graphs, inst)


def test_counting_identities_hand():
    graphs, m, _ = _model(hand_instance())
    (g,) = graphs
    E, A, V = 3, g.num_arcs, len(g.vertices)
    assert m.num_vars == E * A + A + len(g.admissible["r"]) + len(g.admissible["v"])
    assert m.num_core_rows == 2 + E * V + E * A + 2 * 2 + E * A // 2
    assert (m.num_vars, m.num_core_rows) == expected_counts(graphs, hand_instance())
    assert set(m.tags) == set(CORE_FAMILIES)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2), st.integers(1, 3), st.integers(2, 6))
def test_counting_identities_generated(seed, c, b, n):
    inst = generate(GeneratorParams(seed=seed, num_pipelines=c, branches_per_pipeline=b, nodes_per_branch=n))
    graphs, m, _ = _model(inst)
    assert (m.num_vars, m.num_core_rows) == expected_counts(graphs, inst)
    # the column layout is a bijection
    assert [v.col for v in m.variables] == list(range(m.num_vars))


def test_objective_and_big_m():
    graphs, m, _ = _model(hand_instance())
    lay = m.trees[0]
    assert m.big_m == graphs[0].num_arcs
    np.testing.assert_array_equal(m.objective[lay.install_base:lay.install_base + graphs[0].num_arcs],
                                  graphs[0].length)
    assert not m.objective[:lay.install_base].any()


def test_highs_matches_hand_optimum():
    _, m, cat = _model(hand_instance())
    res = highs_solve(m)
    assert res.status == 0 and round(res.fun) == 18


def test_engine_solution_satisfies_core_rows():
    layout, rep, m, cat = solve_instance(hand_instance(1))
    # the engine's layout re-encoded as a 0/1 vector satisfies every core row
    x = np.zeros(m.num_vars, dtype=np.int64)
    lay = m.trees[0]
    g = lay.graph
    for e, st_ in enumerate(lay.edges):
        verts = layout.paths[st_]
        for p, q in zip(verts, verts[1:]):
            a = next(a for a in g.out_arcs[g.index[p]] if g.head[a] == g.index[q])
            x[lay.flow_col(e, a)] = 1
            x[lay.install_col(a)] = 1
    for n, cols in lay.place_cols.items():
        x[cols[g.index[layout.placement[n]]]] = 1
    assert m.violated_rows(x) == []
    assert int(m.objective @ x) == rep.objective == 18


def test_zero_delta_catalog_is_empty():
    _, _, cat = _model(hand_instance(0))
    assert cat.arc_pairs == [] and cat.pipeline_forbidden == []


def test_catalog_pairs_are_close_and_symmetric():
    inst = generate(GeneratorParams(seed=1, num_pipelines=2, branches_per_pipeline=2, nodes_per_branch=4, delta=5))
    graphs, m, cat = _model(inst)
    for (ti, k), nbs in cat.cross.items():
        for tj, k2, d in nbs:
            assert any(t == ti and kk == k for t, kk, _ in cat.cross[(tj, k2)])
            p, q = graphs[ti].arc_points(2 * k)
            r, s = graphs[tj].arc_points(2 * k2)
            assert raw_segment_distance(p, q, r, s) == d < inst.delta
    for (ti, a), (pid, d) in cat.forbidden.items():
        assert d < inst.clearance and pid != inst.forest[ti].pipeline_id


def test_edge_relations():
    rel = edge_relations([("r", "v"), ("v", "a"), ("v", "b"), ("a", "c")])
    assert rel[1][2] == 0  # siblings
    assert rel[0][1] == 1  # share v
    assert rel[0][3] == 2  # disjoint
    assert rel[2][3] == 2


def test_conflict_ordering():
    a = Conflict(1, 0, SAFETY_ARC, 0, 1, 1, 2)
    b = Conflict(1, 2, SAFETY_ARC, 0, 1, 1, 3)
    p = Conflict(0, 5, SAFETY_PIPELINE, 0, 4)
    assert sorted([b, a, p]) == [p, a, b]


def test_find_conflicts_and_rows():
    inst = generate(GeneratorParams(seed=3, branches_per_pipeline=3, nodes_per_branch=3, delta=5))
    graphs, m, cat = _model(inst)
    ti, k = next(iter(sorted(cat.cross)))
    tj, k2, d = cat.cross[(ti, k)][0]
    usage = [[set() for _ in lay.edges] for lay in m.trees]
    usage[ti][0].add(2 * k)
    usage[tj][0].add(2 * k2)
    cs = find_conflicts(cat, usage)
    assert cs and cs[0].kind == SAFETY_ARC and cs[0].dist == d
    assert find_conflicts(cat, usage, first_only=True) == cs[:1]
    rows = materialize_safety_constraint(m, cat, cs[0])
    x = np.zeros(m.num_vars, dtype=np.int64)
    x[m.trees[ti].install_col(2 * k)] = 1
    x[m.trees[tj].install_col(2 * k2)] = 1
    assert rows and any(not r.evaluate(x) for r in rows)


def test_corridor_conflict_for_disjoint_edges():
    t = chain_tree("A", "P", [((4, 0, 0), (4, 0, 0)), ((8, 0, 0), (8, 0, 0))], (12, 0, 0))
    inst = Instance(Box3.of((0, 0, 0), (12, 4, 0)), (Pipeline("P", (Point3(0, 0, 0), Point3(0, 4, 0))),),
                    (t,), (), 0)
    graphs, m, cat = _model(inst)
    usage = [[set(), set(), set()]]
    usage[0][0].add(0)
    usage[0][2].add(0)
    (c,) = find_conflicts(cat, usage)
    assert c.kind == CORRIDOR and (c.e1, c.e2) == (0, 2)
    usage = [[{0}, set(), {1}]]
    assert find_conflicts(cat, usage)[0].kind == CORRIDOR
    # adjacent edges may run back along the reverse arc
    usage = [[{0}, {1}, set()]]
    assert find_conflicts(cat, usage) == []


def test_all_catalog_rows_are_tagged_and_valid():
    inst = generate(GeneratorParams(seed=5, branches_per_pipeline=3, nodes_per_branch=3, delta=3))
    _, m, cat = _model(inst)
    rows = all_catalog_rows(m, cat)
    assert {r.tag for r in rows} <= {SAFETY_ARC, SAFETY_FLOW, CORRIDOR, SAFETY_PIPELINE}
    assert len(set(rows)) == len(rows)
    layout, rep, _, _ = solve_instance(inst)
    res = highs_solve(m, rows)
    assert res.status == 0 and round(res.fun) == rep.objective


def test_mps_round_trip(tmp_path):
    _, m, cat = _model(hand_instance(1))
    path = tmp_path / "m.mps"
    export_model(m.with_rows(all_catalog_rows(m, cat)), "mps", path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    lp = h.getLp()
    assert lp.num_col_ == m.num_vars
    assert lp.num_row_ == m.num_rows + len(all_catalog_rows(m, cat))
    h.run()
    assert round(h.getInfo().objective_function_value) == 18
    assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal


def test_lp_export(tmp_path):
    _, m, _ = _model(hand_instance())
    text = model_to_lp(m)
    body = [ln for ln in text.splitlines() if not ln.startswith("\\")]
    assert body[0].lower().startswith("minimize")
    path = tmp_path / "m.lp"
    export_model(m, "lp", path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    h.run()
    assert round(h.getInfo().objective_function_value) == 18


def test_mps_is_deterministic():
    _, m, _ = _model(hand_instance())
    assert model_to_mps(m) == model_to_mps(m)
    with pytest.raises(ValueError):
        export_model(m, "xls")


def test_empty_model():
    m = empty_model()
    assert m.num_vars == 0 and m.num_rows == 0
    assert "ENDATA" in model_to_mps(m)


def test_linear_constraint_evaluate():
    r = LinearConstraint((0, 2), (1, 5), "<=", 5, SAFETY_ARC)
    assert r.evaluate([1, 0, 0]) and not r.evaluate([1, 0, 1])
    assert LinearConstraint((0,), (1,), "=", 1, "x").evaluate([1])
    assert not LinearConstraint((0,), (1,), ">=", 1, "x").evaluate([0])

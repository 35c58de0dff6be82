import dataclasses

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from wirelayr.diagram import LEAF, dumps_instance, validate_instance
from wirelayr.geometry import Point3
from wirelayr.synth import (
    TABLE_GRID,
    GeneratorParams,
    PlacementOverflow,
    generate,
    generate_suite,
    suite_cells,
)


def _point_segment_l1(p, a, b):
    # clamp each coordinate onto the segment's extent, then sum the gaps
    return sum(max(min(a[i], b[i]) - p[i], 0, p[i] - max(a[i], b[i])) for i in range(3))


def _polyline_l1(p, poly):
    return min(_point_segment_l1(p, a, b) for a, b in zip(poly, poly[1:]))


def _length(poly):
    return sum(sum(abs(a[i] - b[i]) for i in range(3)) for a, b in zip(poly, poly[1:]))


def test_deterministic():
    p = GeneratorParams(seed=7, num_pipelines=1, branches_per_pipeline=1, nodes_per_branch=3)
    assert dumps_instance(generate(p)) == dumps_instance(generate(p))
    q = dataclasses.replace(p, seed=8)
    assert dumps_instance(generate(p)) != dumps_instance(generate(q))


@pytest.mark.parametrize("kw", [dict(num_pipelines=0), dict(branches_per_pipeline=0),
                                dict(nodes_per_branch=1), dict(delta=-1), dict(cube=50)])
def test_bad_params(kw):
    with pytest.raises(ValueError):
        GeneratorParams(**kw)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2]), st.sampled_from([1, 3, 5]),
       st.sampled_from([2, 3, 5, 10, 15]))
def test_generated_properties(seed, c, b, n):
    inst = generate(GeneratorParams(seed=seed, num_pipelines=c, branches_per_pipeline=b, nodes_per_branch=n))
    assert validate_instance(inst) == []
    assert len(inst.pipelines) == c and len(inst.forest) == c * b
    zs = set()
    for pipe in inst.pipelines:
        first, last = pipe.polyline[0], pipe.polyline[-1]
        assert (first.x, first.y, last.x, last.y) == (50, 0, 50, 90) and first.z == last.z
        assert first.z % 10 == 0 and first.z not in zs
        zs.add(first.z)
        # bends on the 10-unit grid
        assert all(p.y % 10 == 0 and p.z % 10 == 0 for p in pipe.polyline)
    if c == 2:
        a, b_ = (pipe.polyline for pipe in inst.pipelines)
        assert min(_polyline_l1(p, b_) for p in a) >= 6
        assert min(_polyline_l1(p, a) for p in b_) >= 6
    leaves = []
    boxes = []
    for t in inst.forest:
        assert len(t.nodes) == n
        for node in t.nodes.values():
            if node.role == LEAF:
                assert node.region.x == 100
                leaves.append(node.region)
            elif node.region is not None:
                boxes.append(node.region)
    assert len(set(leaves)) == len(leaves)
    for i, bx in enumerate(boxes):
        assert bx.min.x > 50
        assert not any(bx.intersects(o) for o in boxes[i + 1:])


def test_pipeline_routes_are_shortest():
    for seed in range(5):
        inst = generate(GeneratorParams(seed=seed, num_pipelines=2))
        first, second = (p.polyline for p in inst.pipelines)
        g = nx.grid_2d_graph(10, 10)
        g.remove_nodes_from([(y, z) for y, z in list(g.nodes)
                             if _polyline_l1(Point3(50, 10 * y, 10 * z), first) < 6])
        z = second[0].z // 10
        hops = nx.shortest_path_length(g, (0, z), (9, z))
        assert _length(second) == 10 * hops
        assert _length(first) == 90


def test_overflow():
    p = GeneratorParams(seed=0, branches_per_pipeline=5, nodes_per_branch=15, region_edge=45, retries=10)
    with pytest.raises(PlacementOverflow):
        generate(p)


def test_suite_manifest(tmp_path):
    m = generate_suite(tmp_path, write=False)
    assert len(m["instances"]) == 720 == 10 * len(suite_cells())
    assert len({e["seed"] for e in m["instances"]}) == 720
    assert len(generate_suite(tmp_path, per_cell=1, write=False)["instances"]) == 72
    assert len(suite_cells()) == 2 * 3 * 4 * 3 and TABLE_GRID["deltas"] == (1, 3, 5)


def test_suite_writes_files(tmp_path):
    m = generate_suite(tmp_path, per_cell=1, cells=[(1, 1, 3, 1), (2, 3, 5, 3)])
    assert (tmp_path / "manifest.json").exists()
    assert sorted(p.name for p in tmp_path.glob("c*.json")) == sorted(e["file"] for e in m["instances"])

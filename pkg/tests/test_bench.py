import csv
import json
import statistics

from wirelayr.bench import INSTANCE_FIELDS, BenchRecord, run_bench, table_rows, write_instances, write_table
from wirelayr.synth import generate_suite


def test_empty_manifest(tmp_path):
    m = tmp_path / "manifest.json"
    m.write_text(json.dumps({"format": 1, "instances": []}))
    assert run_bench(m) == []
    assert write_table([]) == "pipelines,branches,nodes\n"


def test_small_suite(tmp_path):
    generate_suite(tmp_path, per_cell=2, cells=[(1, 1, 3, 1), (1, 1, 3, 3), (1, 3, 3, 1)])
    recs = run_bench(tmp_path / "manifest.json", time_limit=30)
    assert len(recs) == 6 and all(r.status == "optimal" for r in recs)
    header, rows = table_rows(recs)
    assert header == ["pipelines", "branches", "nodes", "time_d1", "feas_d1", "optimal_d1", "count_d1",
                      "time_d3", "feas_d3", "optimal_d3", "count_d3"]
    assert rows[0][:3] == [1, 1, 3] and rows[0][4] == 2 and rows[0][8] == 2
    # (1, 3, 3) was only run at delta 1
    assert rows[1][7:] == ["", 0, 0, 0]
    mean = statistics.fmean(r.time for r in recs if r.cell == (1, 1, 3) and r.delta == 1)
    assert rows[0][3] == f"{mean:.3f}"
    out = tmp_path / "per_instance.csv"
    write_instances(recs, out)
    back = list(csv.DictReader(out.open()))
    assert list(back[0]) == INSTANCE_FIELDS and len(back) == 6
    assert write_table(recs, tmp_path / "t.csv") == (tmp_path / "t.csv").read_text()


def test_mean_skips_unsolved():
    base = dict(pipelines=1, branches=1, nodes=3, delta=1, file="f", objective=None, nodes_explored=0,
                lazy_rows=0)
    recs = [BenchRecord(seed=1, status="optimal", time=1.0, **base),
            BenchRecord(seed=2, status="feasible", time=9.0, **base),
            BenchRecord(seed=3, status="time_limit", time=9.0, **base)]
    _, rows = table_rows(recs)
    assert rows == [[1, 1, 3, "1.000", 2, 1, 3]]

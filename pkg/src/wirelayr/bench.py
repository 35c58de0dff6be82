"""Benchmark harness: solve a suite and tabulate it per cell."""
from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

from .diagram import load_instance
from .engine import FEASIBLE, OPTIMAL, SolveParams, solve_instance
from .gridgen import DiscretizationError

INSTANCE_FIELDS = ["pipelines", "branches", "nodes", "delta", "seed", "file", "status",
                   "objective", "time", "nodes_explored", "lazy_rows"]


@dataclass
class BenchRecord:
    pipelines: int
    branches: int
    nodes: int
    delta: int
    seed: int
    file: str
    status: str
    objective: Optional[int]
    time: float
    nodes_explored: int
    lazy_rows: int

    @property
    def cell(self) -> tuple[int, int, int]:
        return (self.pipelines, self.branches, self.nodes)

    @property
    def feasible(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE)


def _run_one(args) -> BenchRecord:
    root, entry, time_limit, seed = args
    inst = load_instance(Path(root) / entry["file"])
    try:
        _, rep, _, _ = solve_instance(inst, SolveParams(time_limit=time_limit, seed=seed))
        status, obj, t, n, lazy = rep.status, rep.objective, rep.wall_time, rep.nodes, rep.lazy_rows
    except DiscretizationError:
        status, obj, t, n, lazy = "infeasible", None, 0.0, 0, 0
    return BenchRecord(entry["pipelines"], entry["branches"], entry["nodes"], entry["delta"],
                       entry["seed"], entry["file"], status, obj, t, n, lazy)


def run_bench(manifest_path: str | Path, *, time_limit: float = 3600.0, jobs: int = 1,
              seed: int = 0) -> list[BenchRecord]:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    entries = manifest.get("instances", [])
    work = [(manifest_path.parent, e, time_limit, seed) for e in entries]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, work))
    else:
        records = [_run_one(w) for w in work]
    records.sort(key=lambda r: (r.pipelines, r.branches, r.nodes, r.delta, r.seed))
    return records


def table_rows(records: Sequence[BenchRecord], deltas: Optional[Sequence[int]] = None):
    """One row per (#c, #b, #n): mean time over optimally solved instances and #Feas per delta."""
    deltas = sorted(deltas if deltas is not None else {r.delta for r in records})
    header = ["pipelines", "branches", "nodes"]
    for d in deltas:
        header += [f"time_d{d}", f"feas_d{d}", f"optimal_d{d}", f"count_d{d}"]
    cells = sorted({r.cell for r in records})
    rows = []
    for cell in cells:
        row: list = list(cell)
        for d in deltas:
            rs = [r for r in records if r.cell == cell and r.delta == d]
            solved = [r.time for r in rs if r.status == OPTIMAL]
            row += [f"{statistics.fmean(solved):.3f}" if solved else "",
                    sum(r.feasible for r in rs), len(solved), len(rs)]
        rows.append(row)
    return header, rows


def write_table(records: Sequence[BenchRecord], path: Optional[str | Path] = None,
                deltas: Optional[Sequence[int]] = None) -> str:
    header, rows = table_rows(records, deltas)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def write_instances(records: Sequence[BenchRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=INSTANCE_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in records:
            d = asdict(r)
            d["time"] = f"{r.time:.3f}"
            w.writerow(d)

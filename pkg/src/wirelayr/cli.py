"""``wirelayr`` command line."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .bench import run_bench, write_instances, write_table
from .diagram import InstanceFormatError, load_instance, save_instance, validate_instance
from .engine import FEASIBLE, INFEASIBLE, OPTIMAL, TIME_LIMIT, SolveParams, SolveReport, solve
from .geometry import GeometryError
from .gridgen import DisconnectedRequiredPair, DiscretizationError, EmptyAdmissibleSet, discretize, graphs_to_json
from .milp import build_conflict_catalog, build_core_model, export_model
from .scene import export_scene
from .synth import TABLE_GRID, GeneratorParams, PlacementOverflow, generate, generate_suite, suite_cells
from .validate import check_layout, layout_data, load_solution

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_TIME_LIMIT = 3
EXIT_INPUT = 4

SOLUTION_FORMAT = 1


class InputError(Exception):
    pass


def _load(path) -> object:
    try:
        inst = load_instance(path)
    except (OSError, InstanceFormatError, GeometryError) as e:
        raise InputError(str(e)) from e
    errors = validate_instance(inst)
    if errors:
        raise InputError("; ".join(errors))
    return inst


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x)


def threads_from(args_threads: int) -> int:
    env = os.environ.get("WIRELAYR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"WIRELAYR_THREADS must be an integer, got {env!r}")
    return max(1, args_threads)


def solution_dict(layout, report: SolveReport, certificate: Optional[dict] = None) -> dict:
    d = {"format": SOLUTION_FORMAT, "status": report.status, "objective": report.objective}
    if layout is not None:
        d.update(layout.to_dict())
    if certificate:
        d["certificate"] = certificate
    d["report"] = report.to_dict()
    return d


def cmd_generate(args) -> int:
    params = GeneratorParams(seed=args.seed, num_pipelines=args.pipelines,
                             branches_per_pipeline=args.branches, nodes_per_branch=args.nodes,
                             delta=args.delta, cube=args.cube, region_edge=args.region_edge)
    inst = generate(params)
    out = Path(args.out)
    if out.suffix != ".json":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"c{args.pipelines}_b{args.branches}_n{args.nodes}_d{args.delta}_s{args.seed}.json"
    save_instance(inst, out)
    print(out)
    return EXIT_OK


def cmd_suite(args) -> int:
    if args.table1:
        cells = suite_cells()
    else:
        cells = suite_cells(_ints(args.pipelines), _ints(args.branches), _ints(args.nodes), _ints(args.deltas))
    manifest = generate_suite(args.out, per_cell=args.per_cell, base_seed=args.base_seed, cells=cells)
    print(f"{len(manifest['instances'])} instances in {args.out}")
    return EXIT_OK


def cmd_discretize(args) -> int:
    inst = _load(args.instance)
    try:
        graphs = discretize(inst, opening_guides=args.opening_guides)
    except DiscretizationError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    text = graphs_to_json(graphs)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _certificate(e: DiscretizationError) -> dict:
    if isinstance(e, DisconnectedRequiredPair):
        return {"kind": "disconnected_required_pair", "parent": e.parent, "child": e.child}
    if isinstance(e, EmptyAdmissibleSet):
        return {"kind": "empty_admissible_set", "node": e.node_id}
    return {"kind": "discretization", "message": str(e)}


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    threads = threads_from(args.threads)
    params = SolveParams(time_limit=args.time_limit, threads=threads, seed=args.seed, eager=args.eager)
    try:
        graphs = discretize(inst, opening_guides=args.opening_guides)
    except DiscretizationError as e:
        report = SolveReport(INFEASIBLE, None, None, None, 0, 0.0, 0)
        _write(args.out, solution_dict(None, report, _certificate(e)))
        return EXIT_INFEASIBLE
    model = build_core_model(graphs, inst)
    catalog = build_conflict_catalog(graphs, inst)
    layout, report = solve(model, catalog, graphs, params)
    if args.emit_model:
        fmt = "lp" if str(args.emit_model).endswith(".lp") else "mps"
        export_model(model.with_rows(report.rows), fmt, args.emit_model)
    cert = {"kind": "exhausted_search", "nodes": report.nodes} if report.status == INFEASIBLE else None
    _write(args.out, solution_dict(layout, report, cert))
    if args.time_report:
        print(f"wall time {report.wall_time:.3f}s", file=sys.stderr)
    if report.status == INFEASIBLE:
        return EXIT_INFEASIBLE
    if report.status == TIME_LIMIT:
        return EXIT_TIME_LIMIT
    return EXIT_OK


def _write(path, data: dict) -> None:
    text = json.dumps(data, indent=1) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    inst = _load(args.instance)
    try:
        sol = load_solution(args.solution)
    except (OSError, ValueError, KeyError, GeometryError) as e:
        raise InputError(f"{args.solution}: {e}") from e
    enforce = args.enforce_bend_gap is not None
    gap = args.enforce_bend_gap if enforce else args.min_bend_gap
    rep = check_layout(inst, sol, gap, enforce_bend_gap=enforce)
    sys.stdout.write(json.dumps(rep.to_dict(), indent=1) + "\n")
    return EXIT_OK if rep.ok else 1


def cmd_bench(args) -> int:
    records = run_bench(args.manifest, time_limit=args.time_limit, jobs=threads_from(args.jobs))
    deltas = _ints(args.deltas) if args.deltas else None
    text = write_table(records, args.out, deltas)
    if not args.out:
        sys.stdout.write(text)
    if args.instances_out:
        write_instances(records, args.instances_out)
    return EXIT_OK


def cmd_export(args) -> int:
    if args.what == "model":
        inst = _load(args.instance)
        try:
            graphs = discretize(inst)
        except DiscretizationError as e:
            print(f"infeasible: {e}", file=sys.stderr)
            return EXIT_INFEASIBLE
        text = export_model(build_core_model(graphs, inst), args.format or "mps", args.out)
    else:
        inst = _load(args.instance)
        sol = load_solution(args.solution) if args.solution else None
        text = export_scene(inst, sol, args.format or "obj", args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wirelayr", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write one synthetic instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--pipelines", type=int, default=1)
    g.add_argument("--branches", type=int, default=1)
    g.add_argument("--nodes", type=int, default=3)
    g.add_argument("--delta", type=int, default=1)
    g.add_argument("--cube", type=int, default=100)
    g.add_argument("--region-edge", type=int, default=10)
    g.add_argument("--out", required=True, help="directory or .json path")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("suite", help="write a benchmark suite and manifest")
    s.add_argument("--table1", action="store_true", help="the full 2x3x4x3 cell grid")
    s.add_argument("--pipelines", default=",".join(map(str, TABLE_GRID["pipelines"])))
    s.add_argument("--branches", default=",".join(map(str, TABLE_GRID["branches"])))
    s.add_argument("--nodes", default=",".join(map(str, TABLE_GRID["nodes"])))
    s.add_argument("--deltas", default=",".join(map(str, TABLE_GRID["deltas"])))
    s.add_argument("--per-cell", type=int, default=10)
    s.add_argument("--base-seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_suite)

    d = sub.add_parser("discretize", help="write the per-tree grid graphs")
    d.add_argument("instance")
    d.add_argument("--out")
    d.add_argument("--opening-guides", action="store_true")
    d.set_defaults(func=cmd_discretize)

    v = sub.add_parser("solve", help="solve an instance")
    v.add_argument("instance")
    v.add_argument("--time-limit", type=float, default=3600.0)
    v.add_argument("--threads", type=int, default=1)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.add_argument("--emit-model", help="write the model with materialized rows (.mps or .lp)")
    v.add_argument("--eager", action="store_true", help="materialize every catalog row up front")
    v.add_argument("--opening-guides", action="store_true")
    v.add_argument("--time-report", action="store_true", help="print wall time to stderr")
    v.set_defaults(func=cmd_solve)

    c = sub.add_parser("validate", help="check a solution against the instance geometry")
    c.add_argument("instance")
    c.add_argument("solution")
    c.add_argument("--enforce-bend-gap", type=int, metavar="G")
    c.add_argument("--min-bend-gap", type=int, default=10, help="gap reported as a warning")
    c.set_defaults(func=cmd_validate)

    b = sub.add_parser("bench", help="solve a suite and write the per-cell table")
    b.add_argument("manifest")
    b.add_argument("--out")
    b.add_argument("--instances-out")
    b.add_argument("--time-limit", type=float, default=3600.0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--deltas")
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("export", help="export a scene or the core model")
    e.add_argument("what", choices=["scene", "model"])
    e.add_argument("instance")
    e.add_argument("--solution")
    e.add_argument("--format", help="obj or csv for scenes, mps or lp for models")
    e.add_argument("--out")
    e.set_defaults(func=cmd_export)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except PlacementOverflow as e:
        print(f"generation failed: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

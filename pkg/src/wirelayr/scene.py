"""Static scene export: OBJ polylines or a flat CSV of segments and boxes."""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Optional

from .diagram import INTERMEDIATE, Instance
from .geometry import Box3, l1_point_distance
from .validate import LayoutData, elementary_pieces

CSV_FIELDS = ["kind", "owner", "x0", "y0", "z0", "x1", "y1", "z1", "length"]


def _records(inst: Instance, layout: Optional[LayoutData]):
    """(kind, owner, a, b, length) in a fixed order; boxes use (min, max)."""
    out = [("region", "region", inst.region.min, inst.region.max, None)]
    for k, o in enumerate(inst.obstacles):
        out.append(("obstacle", f"obstacle{k}", o.box.min, o.box.max, None))
        for j, op in enumerate(o.openings):
            out.append(("opening", f"obstacle{k}.{j}", op.min, op.max, None))
    for t in inst.forest:
        for nid, node in t.nodes.items():
            if node.role == INTERMEDIATE:
                out.append(("admissible_box", nid, node.region.min, node.region.max, None))
    for p in inst.pipelines:
        for a, b in zip(p.polyline, p.polyline[1:]):
            out.append(("pipeline", p.id, a, b, l1_point_distance(a, b)))
    if layout is not None:
        for t in inst.forest:
            paths = {e: v for e, v in layout.paths.items() if e in set(t.tree_edges)}
            leaves = {t.nodes[n].region for n in t.leaves()}
            for a, b in sorted(elementary_pieces(paths, leaves)):
                out.append(("branch", t.id, a, b, l1_point_distance(a, b)))
        for nid in sorted(layout.placement):
            p = layout.placement[nid]
            out.append(("placement", nid, p, p, None))
    return out


def scene_csv(inst: Instance, layout: Optional[LayoutData] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for kind, owner, a, b, length in _records(inst, layout):
        w.writerow([kind, owner, *a, *b, "" if length is None else length])
    return buf.getvalue()


_FACES = ((0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3))


def scene_obj(inst: Instance, layout: Optional[LayoutData] = None) -> str:
    lines = ["# wiring scene"]
    nv = 0
    for kind, owner, a, b, length in _records(inst, layout):
        lines.append(f"o {kind}:{owner}")
        if length is None and a != b:
            box = Box3(a, b)
            for i in range(8):
                c = [box.max[k] if i >> (2 - k) & 1 else box.min[k] for k in range(3)]
                lines.append(f"v {c[0]} {c[1]} {c[2]}")
            lines += ["f " + " ".join(str(nv + 1 + i) for i in f) for f in _FACES]
            nv += 8
        elif length is None:
            lines.append(f"v {a[0]} {a[1]} {a[2]}")
            lines.append(f"p {nv + 1}")
            nv += 1
        else:
            lines.append(f"v {a[0]} {a[1]} {a[2]}")
            lines.append(f"v {b[0]} {b[1]} {b[2]}")
            lines.append(f"l {nv + 1} {nv + 2}")
            nv += 2
    return "\n".join(lines) + "\n"


def export_scene(inst: Instance, layout: Optional[LayoutData] = None, fmt: str = "obj_polylines",
                 path: Optional[str | Path] = None) -> str:
    if fmt in ("obj", "obj_polylines"):
        text = scene_obj(inst, layout)
    elif fmt in ("csv", "csv_segments"):
        text = scene_csv(inst, layout)
    else:
        raise ValueError(f"unknown scene format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text

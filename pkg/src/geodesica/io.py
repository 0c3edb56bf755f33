"""Net files, OBJ export and CSV reports."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .net import Cell, GeodesicNet, Intersection, NetError, Polyline3, Segment

_NUM = {"type": "number"}
_POINT = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_SEGMENT = {
    "type": "object",
    "required": ["curve", "t0", "t1"],
    "additionalProperties": False,
    "properties": {
        "curve": {"type": "integer", "minimum": 0},
        "t0": _NUM,
        "t1": _NUM,
        "reversed": {"type": "boolean"},
    },
}
_SEGMENTS = {"type": "array", "items": _SEGMENT, "minItems": 1}

NET_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "geodesic net",
    "type": "object",
    "required": ["curves", "cells"],
    "additionalProperties": False,
    "properties": {
        "curves": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["points"],
                "additionalProperties": False,
                "properties": {
                    "points": {"type": "array", "items": _POINT, "minItems": 2},
                    "closed": {"type": "boolean"},
                },
            },
        },
        "intersections": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["curve_a", "curve_b", "param_a", "param_b", "position"],
                "additionalProperties": False,
                "properties": {
                    "curve_a": {"type": "integer", "minimum": 0},
                    "curve_b": {"type": "integer", "minimum": 0},
                    "param_a": _NUM,
                    "param_b": _NUM,
                    "position": _POINT,
                },
            },
        },
        "cells": {
            "type": "array",
            "items": {
                "oneOf": [
                    _SEGMENTS,
                    {
                        "type": "object",
                        "required": ["segments"],
                        "additionalProperties": False,
                        "properties": {"id": {"type": "string"}, "segments": _SEGMENTS},
                    },
                ]
            },
        },
    },
}


class NetFileError(NetError):
    pass


def _where(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out.lstrip(".") or "<document>"


def _finite(obj, where="") -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise NetFileError(f"{where or '<document>'}: non-finite number")
    if isinstance(obj, list):
        for k, v in enumerate(obj):
            _finite(v, f"{where}[{k}]")
    elif isinstance(obj, dict):
        for k, v in obj.items():
            _finite(v, f"{where}.{k}".lstrip("."))


def net_from_dict(doc) -> GeodesicNet:
    """Schema-check a parsed document and build a validated net."""
    validator = jsonschema.Draft202012Validator(NET_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise NetFileError(f"{_where(e.absolute_path)}: {e.message}")
    _finite(doc)
    try:
        curves = tuple(Polyline3(c["points"], bool(c.get("closed", False))) for c in doc["curves"])
    except NetError as exc:
        raise NetFileError(f"curves: {exc}") from exc
    inters = tuple(Intersection(x["curve_a"], x["curve_b"], float(x["param_a"]), float(x["param_b"]),
                                tuple(float(v) for v in x["position"])) for x in doc.get("intersections", []))
    cells = []
    for k, c in enumerate(doc["cells"]):
        segs = c if isinstance(c, list) else c["segments"]
        cid = str(k) if isinstance(c, list) else c.get("id", str(k))
        cells.append(Cell(tuple(Segment(s["curve"], float(s["t0"]), float(s["t1"]), bool(s.get("reversed", False)))
                                for s in segs), id=cid))
    net = GeodesicNet(curves, inters, tuple(cells))
    net.validate()
    return net


def load_net(path) -> GeodesicNet:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise NetFileError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return net_from_dict(doc)


def net_to_dict(net: GeodesicNet) -> dict:
    return {
        "curves": [{"points": c.points.tolist(), "closed": bool(c.closed)} for c in net.curves],
        "intersections": [{"curve_a": x.curve_a, "curve_b": x.curve_b, "param_a": float(x.param_a),
                           "param_b": float(x.param_b), "position": [float(v) for v in x.position]}
                          for x in net.intersections],
        "cells": [{"id": c.id or str(k),
                   "segments": [{"curve": s.curve, "t0": float(s.t0), "t1": float(s.t1), "reversed": bool(s.reversed)}
                                for s in c.segments]}
                  for k, c in enumerate(net.cells)],
    }


def dumps_net(net: GeodesicNet) -> str:
    # json writes floats with repr, which round-trips exactly
    return json.dumps(net_to_dict(net), indent=1) + "\n"


def save_net(net: GeodesicNet, path) -> None:
    Path(path).write_text(dumps_net(net))


def _fmt(x: float) -> str:
    return "%.17g" % x


def export_obj(surface, path) -> None:
    """Write every patch as its own ``o`` object; vertex indices are global and 1-based."""
    patches = getattr(surface, "patches", surface)
    if not len(patches):
        raise ValueError("nothing to export")
    lines = ["# geodesica surface"]
    base = 1
    for p in patches:
        lines.append(f"o {p.cell_id}")
        lines.extend("v " + " ".join(_fmt(c) for c in v) for v in np.asarray(p.vertices, dtype=float).tolist())
        lines.extend(f"f {a + base} {b + base} {c + base}" for a, b, c in np.asarray(p.triangles).tolist())
        base += len(p.vertices)
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path) -> list:
    """(name, vertices, zero-based faces local to the object) for every ``o`` group."""
    groups = []
    name, verts, faces, offset = None, [], [], 0
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "o":
            if name is not None:
                groups.append((name, np.array(verts), np.array(faces, dtype=np.int64) - offset))
                offset += len(verts)
            name, verts, faces = parts[1], [], []
        elif parts[0] == "v":
            verts.append([float(v) for v in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(v.split("/")[0]) - 1 for v in parts[1:4]])
    if name is not None:
        groups.append((name, np.array(verts), np.array(faces, dtype=np.int64) - offset))
    return groups


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_dirichlet_csv(table, path) -> None:
    write_csv(path, ["node", "arclength", "g", "g_before", "g_after"],
              zip(range(len(table.g)), table.arclength, table.g, table.g_before, table.g_after))


def write_fields_csv(mixed, curvature, path) -> None:
    mesh = mixed.f.mesh
    write_csv(path, ["vertex", "x", "y", "boundary", "f", "omega", "K"],
              ((k, x, y, int(b), f, w, K) for k, ((x, y), b, f, w, K) in
               enumerate(zip(mesh.vertices, mesh.boundary_mask, mixed.f.values, mixed.omega.values,
                             curvature.values))))


def write_grid_csv(grid, residual, path) -> None:
    X, Y = grid.coords()
    rows = []
    for j in range(grid.shape[0]):
        for i in range(grid.shape[1]):
            rows.append((j, i, X[j, i], Y[j, i], int(grid.mask[j, i]), grid.h[j, i], grid.K[j, i], residual[j, i]))
    write_csv(path, ["j", "i", "x", "y", "mask", "h", "K", "residual"], rows)


def write_history_csv(report, path) -> None:
    write_csv(path, ["iteration", "scaled_max_residual"], enumerate(report.history))


def write_lb_csv(patch, report, path) -> None:
    boundary = np.zeros(len(patch.vertices), dtype=int)
    boundary[patch.boundary_loop] = 1
    norm = np.maximum(np.abs(report.normalized_x), np.abs(report.normalized_y))
    write_csv(path, ["vertex", "x", "y", "z", "residual_x", "residual_y", "normalized", "boundary"],
              ((k, *v, rx, ry, n, b) for k, (v, rx, ry, n, b) in
               enumerate(zip(patch.vertices.tolist(), report.residual_x, report.residual_y, norm, boundary))))


def write_geodecity_csv(entries, path) -> None:
    write_csv(path, ["intersection", "curve_a", "curve_b", "status", "angle_defect"],
              ((k, e.intersection.curve_a, e.intersection.curve_b, e.status.value, e.angle_defect)
               for k, e in enumerate(entries)))


def write_cells_csv(results, path) -> None:
    rows = []
    for res in results:
        for r in res.walk():
            rows.append((r.cell_id, r.lineage or "", r.depth, r.verdict.value, int(r.capped), r.plane_strategy.value,
                         int(r.ma_report.converged), r.ma_report.iterations, r.ma_report.final_residual,
                         r.lb.sup_norm, r.lb.area_normalized_sup, r.lb.threshold, len(r.children)))
    write_csv(path, ["cell", "parent", "depth", "verdict", "capped", "plane_strategy", "ma_converged",
                     "ma_iterations", "ma_residual", "lb_sup", "lb_normalized_sup", "lb_threshold", "children"], rows)


def write_seams_csv(surface, path) -> None:
    rows = []
    for s in surface.seams:
        for k, (x, g, a) in enumerate(zip(s.samples.tolist(), s.gap, s.angles)):
            rows.append((s.label, s.sides[0], s.sides[1], k, *x, g, a))
    write_csv(path, ["seam", "side_a", "side_b", "sample", "x", "y", "z", "gap", "angle"], rows)


def write_path_csv(path_obj, path) -> None:
    write_csv(path, ["point", "x", "y", "z", "face"],
              ((k, *p, (int(path_obj.faces[k - 1]) if k else -1)) for k, p in enumerate(path_obj.points.tolist())))

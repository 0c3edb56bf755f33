"""Command-line entry point: ``geodesica {check,patch,net,gen,convergence}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .config import ConfigError, RunConfig, load_config
from .convergence import biharmonic_disk_study, cap_study, format_study
from .monge_ampere import discrete_residual
from .net import GeodecityStatus, NetError, check_geodecity
from .pipeline import SurfacePatch, assemble, cell_ids, run_cell, run_net
from .projection import dirichlet_table
from .profiles import ProfileError, folded_squares_net, profile_net

EXIT_OK, EXIT_INVALID, EXIT_FAILED, EXIT_USAGE = 0, 1, 2, 64

log = logging.getLogger("geodesica")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (default: $GEODESICA_CONFIG, else built-in defaults)")
    p.add_argument("-o", "--output-dir", help="directory for reports and meshes")
    p.add_argument("--grid-n", type=int)
    p.add_argument("--mesh-target", type=float, dest="mesh_target_edge")
    p.add_argument("--tol-ma", type=float)
    p.add_argument("--lb-threshold", type=float)
    p.add_argument("--tol-pos", type=float)
    p.add_argument("--plane-strategy", choices=["vector_area", "least_squares", "three_corners"])
    p.add_argument("--max-split-depth", type=int)
    p.add_argument("--branch", choices=["up", "down", "harmonic"])
    p.add_argument("--allow-unconverged", action="store_true", default=None,
                   help="keep the least-squares height field when the curvature solve does not converge")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="geodesica", description="Surface patches from nets of geodesic curves.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="principal-normal agreement at every intersection")
    p.add_argument("net")
    p.add_argument("--tol-angle", type=float, default=None)
    p.add_argument("--config")
    p.add_argument("--csv", help="also write the report as CSV")

    p = sub.add_parser("patch", help="run one cell and dump every intermediate field")
    p.add_argument("net")
    p.add_argument("--cell", help="cell id (default: the first cell)")
    _run_options(p)

    p = sub.add_parser("net", help="run every cell and report seams")
    p.add_argument("net")
    p.add_argument("--jobs", type=int, default=1)
    _run_options(p)

    p = sub.add_parser("gen", help="write a test net")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--profile", help='height profile z(t) on the unit circle, e.g. "sin(4t)"')
    src.add_argument("--folded-squares", type=float, metavar="ANGLE",
                     help="two unit squares sharing an edge, folded by ANGLE radians")
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("-o", "--output", help="output path (default: stdout)")

    p = sub.add_parser("convergence", help="manufactured-solution refinement studies")
    p.add_argument("--quick", action="store_true", help="skip the finest curvature grid")
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.replace(grid_n=args.grid_n, mesh_target_edge=args.mesh_target_edge, tol_ma=args.tol_ma,
                       lb_threshold=args.lb_threshold, tol_pos=args.tol_pos, plane_strategy=args.plane_strategy,
                       max_split_depth=args.max_split_depth, branch=args.branch,
                       allow_unconverged=args.allow_unconverged, output_dir=args.output_dir)


def _cmd_check(args) -> int:
    net = io.load_net(args.net)
    tol = args.tol_angle if args.tol_angle is not None else load_config(args.config).tol_angle
    report = check_geodecity(net, tol)
    counts = {s: sum(e.status is s for e in report) for s in GeodecityStatus}
    for k, e in enumerate(report):
        x = e.intersection
        print(f"{k}\tcurves {x.curve_a},{x.curve_b}\t{e.status.value}\t{e.angle_defect:.6g}")
    print(f"intersections {len(report)}: pass {counts[GeodecityStatus.PASS]}, "
          f"fail {counts[GeodecityStatus.FAIL]}, degenerate {counts[GeodecityStatus.DEGENERATE]}")
    if args.csv:
        io.write_geodecity_csv(report, args.csv)
    return EXIT_OK


def _dump_result(res, out: Path) -> None:
    for r in res.walk():
        d = out / r.cell_id
        d.mkdir(parents=True, exist_ok=True)
        io.write_dirichlet_csv(dirichlet_table(r.chart), d / "dirichlet.csv")
        r.mesh.write_off(d / "fem_mesh.off")
        io.write_fields_csv(r.mixed, r.curvature, d / "fields.csv")
        io.write_grid_csv(r.solution, discrete_residual(r.solution), d / "ma_grid.csv")
        io.write_history_csv(r.ma_report, d / "ma_history.csv")
        io.write_lb_csv(r.patch, r.lb, d / "lb.csv")
        io.export_obj([SurfacePatch.from_result(r)], d / "patch.obj")
        if r.split_path is not None:
            io.write_path_csv(r.split_path, d / "split_path.csv")


def _summary(res) -> None:
    for r in res.walk():
        rep = r.ma_report
        print(f"{r.cell_id}\tdepth {r.depth}\t{r.verdict.value}{' (capped)' if r.capped else ''}\t"
              f"ma {'converged' if rep.converged else 'NOT converged'} it={rep.iterations} "
              f"res={rep.final_residual:.3g}\tlb {r.lb.area_normalized_sup:.3g}/{r.lb.threshold:.3g}")


def _cmd_patch(args) -> int:
    cfg = _config(args)
    net = io.load_net(args.net)
    ids = cell_ids(net)
    cid = args.cell or ids[0]
    if cid not in ids:
        raise NetError(f"no cell with id {cid!r}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    try:
        res = run_cell(net.cells[ids.index(cid)], net, cfg, cell_id=cid)
    except NetError:
        raise  # contour problems are input errors
    except Exception as exc:
        print(f"{cid}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    _dump_result(res, out)
    surface = assemble(net, [cid], [res], [], cfg.tol_pos or net.default_tol_pos())
    io.export_obj(surface, out / "surface.obj")
    io.write_cells_csv([res], out / "cells.csv")
    io.write_seams_csv(surface, out / "seams.csv")
    _summary(res)
    for cell, msg in surface.failures:
        print(f"{cell}: {msg}", file=sys.stderr)
    ok = all(r.ma_report.converged for r in res.walk()) and not surface.failures
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_net(args) -> int:
    cfg = _config(args)
    net = io.load_net(args.net)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    surface = run_net(net, cfg, jobs=max(1, args.jobs))
    if surface.patches:
        io.export_obj(surface, out / "surface.obj")
    io.write_cells_csv(surface.results, out / "cells.csv")
    io.write_seams_csv(surface, out / "seams.csv")
    io.write_csv(out / "failures.csv", ["cell", "message"], surface.failures)
    io.write_geodecity_csv(surface.geodecity, out / "geodecity.csv")
    for res in surface.results:
        _summary(res)
    for s in surface.seams:
        print(f"seam {s.label}\tsamples {len(s.samples)}\tmax gap {s.gap.max():.3g}\t"
              f"dihedral max {s.angles.max():.6g} mean {s.angles.mean():.6g}")
    for cell, msg in surface.failures:
        print(f"{cell}: failed: {msg}", file=sys.stderr)
    print(f"patches {len(surface.patches)}, seams {len(surface.seams)}, failures {len(surface.failures)}")
    return EXIT_OK if surface.all_accepted else EXIT_FAILED


def _cmd_gen(args) -> int:
    if args.profile is not None:
        net = profile_net(args.profile, args.samples)
    else:
        net = folded_squares_net(args.folded_squares)
    text = io.dumps_net(net)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_convergence(args) -> int:
    print(format_study(biharmonic_disk_study()))
    print()
    print(format_study(cap_study((33, 65) if args.quick else (33, 65, 129))))
    return EXIT_OK


_COMMANDS = {"check": _cmd_check, "patch": _cmd_patch, "net": _cmd_net, "gen": _cmd_gen,
             "convergence": _cmd_convergence}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (NetError, ConfigError, ProfileError) as exc:
        print(f"geodesica: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

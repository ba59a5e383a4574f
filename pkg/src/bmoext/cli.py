"""Command-line front end: reproducible experiments with CSV and SVG output.

Subcommands: decompose, geodesic, classify, norm, extend, report. A fixed
seed makes every output byte-identical across runs; numeric rows always
carry the resolution and, where applicable, an error-bound column.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bmo, cigar, extension, svgout
from .domains import Domain, parse_domain_arg, parse_domain_file
from .dyadic import Window
from .errors import GeometryError
from .qhyper import qh_distance
from .whitney import build_whitney

CSV_VERSION = "bmoext-csv v1"
GRID_VERSION = "bmoext-grid v1"


def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, float):
        if math.isnan(v):
            return "NA"
        return f"{v:.12g}"
    return str(v)


def write_csv(path, schema: str, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION} schema={schema}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path):
    with open(path) as fh:
        first = fh.readline()
        schema = None
        if first.startswith("#"):
            for tok in first.split():
                if tok.startswith("schema="):
                    schema = tok.split("=", 1)[1]
        else:
            fh.seek(0)
        rows = list(csv.reader(fh))
    return schema, rows[0], rows[1:]


def write_grid(path, gf: bmo.GridFunction):
    with open(path, "w") as fh:
        fh.write(f"# {GRID_VERSION}\n")
        fh.write(f"# window: {gf.window.origin[0]!r} {gf.window.origin[1]!r} "
                 f"{gf.window.size!r}\n")
        fh.write(f"# cells: {gf.n_cells}\n")
        fh.write("# block: values (line index = x cell index)\n")
        for i in range(gf.n_cells):
            fh.write(",".join(repr(float(v)) for v in gf.values[i]) + "\n")
        fh.write("# block: mask (0 outside, 1 inside, 2 straddling)\n")
        for i in range(gf.n_cells):
            fh.write(",".join(str(int(v)) for v in gf.mask[i]) + "\n")


def read_grid(path) -> bmo.GridFunction:
    window = None
    n = None
    values = []
    masks = []
    block = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# window:"):
                    x0, y0, size = (float(t) for t in line.split(":")[1].split())
                    window = Window((x0, y0), size)
                elif line.startswith("# cells:"):
                    n = int(line.split(":")[1])
                elif "block: values" in line:
                    block = values
                elif "block: mask" in line:
                    block = masks
                continue
            if block is not None:
                block.append(line.split(","))
    if window is None or n is None or len(values) != n or len(masks) != n:
        raise ValueError(f"malformed grid file {path}")
    level = round(math.log2(n))
    vals = np.array([[float(v) for v in row] for row in values])
    mask = np.array([[int(v) for v in row] for row in masks], dtype=np.int8)
    return bmo.GridFunction(window, level, vals, mask)


# ---------------------------------------------------------------------------
# argument parsing helpers

def _parse_resolution(text: str) -> float:
    frac = Fraction(text)
    num, den = frac.numerator, frac.denominator
    if num != 1 or den & (den - 1):
        raise argparse.ArgumentTypeError(
            f"resolution must be 1/2^k, got {text}")
    return float(frac)


def _parse_window(text: str) -> Window:
    parts = [float(t) for t in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("window is x0,y0,side")
    return Window((parts[0], parts[1]), parts[2])


def _parse_point(text: str):
    parts = [float(t) for t in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("point is x,y")
    return np.array(parts)


def _load_domain(text: str) -> Domain:
    if text.startswith("@") or os.path.exists(text):
        p = text[1:] if text.startswith("@") else text
        return parse_domain_file(Path(p).read_text())
    return parse_domain_arg(text)


def _make_function(spec: str, domain, window, resolution, seed):
    """Builtin generators: const:c, ramp, coord:x|y, qh:ax,ay,
    dipole:x1,y1,x2,y2,r1,r2, cellwise:depth, or csv:path."""
    name, _, args = spec.partition(":")
    level = round(math.log2(1.0 / resolution))
    if name == "const":
        c = float(args or 1.0)
        return bmo.sample_grid_function(domain, window, level,
                                        lambda p: np.full(len(p), c), everywhere=True)
    if name == "ramp":
        return bmo.sample_grid_function(domain, window, level,
                                        lambda p: np.maximum(p[:, 0], 0.0),
                                        everywhere=True)
    if name == "coord":
        axis = 0 if (args or "x") == "x" else 1
        return bmo.sample_grid_function(domain, window, level,
                                        lambda p: p[:, axis], everywhere=True)
    if name == "qh":
        a = [float(t) for t in args.split(",")]
        return bmo.qh_distance_field(domain, a, resolution, window)
    if name == "dipole":
        v = [float(t) for t in args.split(",")]
        if len(v) != 6:
            raise argparse.ArgumentTypeError("dipole:x1,y1,x2,y2,r1,r2")
        return bmo.dipole_field(domain, v[0:2], v[2:4], v[4], v[5],
                                resolution, window)
    if name == "cellwise":
        depth = int(args or level)
        dec = build_whitney(domain, window, depth)
        return bmo.whitney_cellwise_field(dec, level, np.random.default_rng(seed))
    if name == "csv":
        return read_grid(args)
    raise argparse.ArgumentTypeError(f"unknown function spec {spec!r}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_decompose(args, out: Path):
    domain = _load_domain(args.domain)
    window = args.window or domain.default_window
    depth = args.max_depth or round(math.log2(1.0 / args.resolution))
    dec = build_whitney(domain, window, depth)
    rows = []
    for info in dec.cubes:
        side = dec.window.cell_size(info.level)
        rows.append((info.tag, info.level, info.coords[0], info.coords[1],
                     side, info.dist_lo, info.dist_hi))
    for lvl, i, j in dec.frontier:
        rows.append(("frontier", lvl, i, j, dec.window.cell_size(lvl), None, None))
    write_csv(out / "cubes.csv", "whitney-cubes",
              ["tag", "level", "i", "j", "side", "dist_lo", "dist_hi"], rows)
    svgout.render_decomposition(dec, out / "decomposition.svg")
    print(f"{len(dec.cubes)} cubes, frontier fraction "
          f"{dec.frontier_volume_fraction:.3e} -> {out}")
    return 0


def cmd_geodesic(args, out: Path):
    domain = _load_domain(args.domain)
    window = args.window or domain.default_window
    value, pl = qh_distance(domain, args.frm, args.to, args.resolution,
                            window=window)
    rows = [(args.resolution, value, pl.qh_error, pl.euclidean_length,
             len(pl.points))]
    write_csv(out / "geodesic.csv", "geodesic",
              ["resolution", "qh_length", "err_bound", "euclid_length",
               "vertices"], rows)
    write_csv(out / "geodesic_points.csv", "geodesic-points", ["x", "y"],
              [(p[0], p[1]) for p in pl.points])
    svgout.render_curves(domain, window, [pl], out / "geodesic.svg")
    print(f"qh distance {value:.6g} (err bound {pl.qh_error:.2g}) -> {out}")
    return 0


def cmd_classify(args, out: Path):
    domain = _load_domain(args.domain)
    window = args.window or domain.default_window
    rep = cigar.classify(domain, args.delta, args.pairs, args.resolution,
                         args.seed, window=window)
    rows = [(p.kind, p.scale_index, p.x[0], p.x[1], p.y[0], p.y[1], p.sep,
             p.eps_curve, p.eps_cap, p.a, p.b, p.j_xy, p.k_xy,
             args.resolution)
            for p in rep.pairs]
    write_csv(out / "classify_pairs.csv", "classify-pairs",
              ["kind", "scale", "x0", "x1", "y0", "y1", "sep", "eps_curve",
               "eps_cap", "a", "b", "j", "k", "resolution"], rows)
    with open(out / "classify_report.txt", "w") as fh:
        fh.write(f"domain: {rep.domain_label}\n")
        fh.write(f"delta: {_fmt(rep.delta)}\nverdict: {rep.verdict}\n")
        fh.write(f"epsilon_hat: {_fmt(rep.epsilon_hat)}\n")
        fh.write(f"ab_hat: {_fmt(rep.ab_hat[0])} {_fmt(rep.ab_hat[1])}\n")
        fh.write(f"cd_hat: {_fmt(rep.cd_hat[0])} {_fmt(rep.cd_hat[1])}\n")
        fh.write(f"pairs: {rep.pair_count}\nflagged: {rep.flagged_pairs}\n")
        fh.write("cap_scale_minima: " + " ".join(
            f"{k}:{_fmt(v)}" for k, v in rep.cap_scale_minima) + "\n")
        fh.write("fit_offsets: " + " ".join(
            f"{k}:{_fmt(v)}" for k, v in rep.fit_offsets) + "\n")
    curves = [p.curve for p in rep.worst_pairs if p.curve is not None][:4]
    if curves:
        svgout.render_curves(domain, window, curves, out / "worst_pairs.svg")
    print(f"verdict: {rep.verdict} (eps_hat {_fmt(rep.epsilon_hat)}) -> {out}")
    return 0


def cmd_norm(args, out: Path):
    domain = _load_domain(args.domain)
    window = args.window or domain.default_window
    f = _make_function(args.function, domain, window, args.resolution, args.seed)
    reports = [("bmo_homogeneous", bmo.bmo_homogeneous_norm(f, domain))]
    if args.lam is not None:
        reports.append(("bmo_lambda", bmo.bmo_lambda_norm(f, domain, args.lam)))
        try:
            reports.append(("dyadic_abc", bmo.dyadic_abc_norm(f, args.lam)))
        except ValueError:
            pass  # function only defined on the domain side
    rows = []
    with open(out / "norm_report.txt", "w") as fh:
        for name, rep in reports:
            fh.write(f"[{name}] value={_fmt(rep.value)} "
                     f"small={_fmt(rep.small_scale_part)} "
                     f"large={_fmt(rep.large_scale_part)} "
                     f"lam={_fmt(rep.lam)} attaining={rep.attaining_cube} "
                     f"abc={rep.abc} degenerate={rep.degenerate} "
                     f"excluded={_fmt(rep.excluded_volume_fraction)}\n")
            a, b, c = rep.abc if rep.abc else (None, None, None)
            rows.append((name, rep.value, rep.small_scale_part,
                         rep.large_scale_part, rep.lam, a, b, c,
                         rep.degenerate, rep.excluded_volume_fraction,
                         args.resolution))
    write_csv(out / "norm.csv", "norm-report",
              ["estimator", "value", "small_part", "large_part", "lam",
               "a", "b", "c", "degenerate", "excluded_fraction",
               "resolution"], rows)
    write_grid(out / "function_grid.csv", f)
    print(f"norms written -> {out}")
    return 0


def cmd_extend(args, out: Path):
    domain = _load_domain(args.domain)
    window = args.window or domain.default_window
    depth = args.max_depth or round(math.log2(1.0 / args.resolution))
    dec = build_whitney(domain, window, depth)
    f = _make_function(args.function, domain, window, args.resolution, args.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = extension.extend(f, domain, dec, args.lam, args.epsilon,
                               args.delta, best_effort=args.best_effort)
    write_grid(out / "extend_grid.csv", res.extended)
    write_csv(out / "assignment.csv", "extend-assignment",
              ["level", "i", "j", "star_level", "star_i", "star_j"],
              [k + v for k, v in sorted(res.assignment.items())])
    write_csv(out / "extend_summary.csv", "extend-summary",
              ["lam", "epsilon", "delta", "resolution", "input_norm",
               "output_norm", "ratio", "assigned", "zeroed", "failed",
               "frontier_filled"],
              [(args.lam, args.epsilon, args.delta, args.resolution,
                res.input_norm, res.output_norm, res.ratio,
                len(res.assignment), len(res.zero_region), len(res.failed),
                res.frontier_filled)])
    svgout.render_grid(res.extended, domain, out / "extend.svg")
    print(f"extension ratio {_fmt(res.ratio)} -> {out}")
    return 0


def cmd_report(args, out: Path):
    results = Path(args.results)
    lines = []
    summary = []
    for p in sorted(results.rglob("*.csv")):
        try:
            schema, header, rows = read_csv(p)
        except Exception:
            continue
        if schema is None:
            continue
        entry = [str(p.relative_to(results)), schema, len(rows)]
        note = ""
        if schema == "extend-summary" and rows:
            idx = header.index("ratio")
            vals = [float(r[idx]) for r in rows if r[idx] != "NA"]
            note = f"max_ratio={_fmt(max(vals))}" if vals else "all NA"
        elif schema == "classify-pairs" and rows:
            idx = header.index("eps_cap")
            vals = [float(r[idx]) for r in rows if r[idx] != "NA"]
            note = f"min_cap={_fmt(min(vals))}" if vals else ""
        elif schema == "norm-report" and rows:
            idx = header.index("value")
            vals = [float(r[idx]) for r in rows if r[idx] != "NA"]
            note = f"max_value={_fmt(max(vals))}" if vals else ""
        summary.append(entry + [note])
        lines.append(f"{entry[0]}: schema={schema} rows={len(rows)} {note}")
    write_csv(out / "summary.csv", "report-summary",
              ["file", "schema", "rows", "note"], summary)
    with open(out / "report.txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{len(summary)} result files -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bmoext",
        description="Whitney decompositions, quasi-hyperbolic geodesics, "
                    "bmo-scale norms and boundary extensions on planar domains")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, domain=True):
        if domain:
            p.add_argument("--domain", required=True,
                           help="builtin[:params] or a domain spec file")
        p.add_argument("--window", type=_parse_window, default=None,
                       help="x0,y0,side (default: the domain's window)")
        p.add_argument("--resolution", type=_parse_resolution, default=1 / 256)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--outdir", default=os.environ.get("BMOEXT_OUTDIR", "out"))

    p = sub.add_parser("decompose", help="build the Whitney families")
    common(p)
    p.add_argument("--max-depth", type=int, default=None)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("geodesic", help="quasi-hyperbolic distance and curve")
    common(p)
    p.add_argument("--from", dest="frm", type=_parse_point, required=True)
    p.add_argument("--to", dest="to", type=_parse_point, required=True)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("classify", help="cigar-condition diagnostics")
    common(p)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--pairs", type=int, default=48)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("norm", help="bmo norm estimates of a grid function")
    common(p)
    p.add_argument("--function", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("extend", help="extend a function across the boundary")
    common(p)
    p.add_argument("--function", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--best-effort", action="store_true")
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("report", help="aggregate result CSVs")
    p.add_argument("--results", required=True)
    p.add_argument("--outdir", default=os.environ.get("BMOEXT_OUTDIR", "out"))
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return args.func(args, out)
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

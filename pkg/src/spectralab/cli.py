"""Command line front end for the experiment drivers.

Each subcommand builds one experiment from flags, prints its check
summary, optionally writes the full report, and exits 0 exactly when
every check passed.
"""

import argparse
import sys

from .optimize import OptimizerOptions
from . import experiments as ex


def _add_mesh_flags(p, prefix="", default_icosphere=None):
    """Mesh selection flags; `prefix` distinguishes the glue guest."""
    dash = "--" + prefix
    g = p.add_mutually_exclusive_group(required=default_icosphere is None)
    g.add_argument(dash + "mesh", metavar="PATH",
                   help="load an OFF or OBJ file (with optional sidecar)")
    g.add_argument(dash + "icosphere", type=int, metavar="N",
                   help="subdivided icosahedron sphere")
    g.add_argument(dash + "torus", metavar="LATTICE",
                   help="flat torus: 'square', 'hexagonal', or four "
                        "comma-separated lattice entries e1x,e1y,e2x,e2y")
    p.add_argument(dash + "resolution", type=int, default=32, metavar="R",
                   help="torus grid resolution (default 32)")
    return default_icosphere


def _mesh_source(args, prefix="", default_icosphere=None):
    get = lambda name: getattr(args, (prefix + name).replace("-", "_"))
    if get("mesh"):
        return ("file", get("mesh"))
    if get("icosphere") is not None:
        return ("icosphere", get("icosphere"))
    if get("torus"):
        lat = get("torus")
        if lat not in ("square", "hexagonal"):
            parts = [float(x) for x in lat.split(",")]
            if len(parts) != 4:
                raise SystemExit("--torus wants 'square', 'hexagonal' or "
                                 "four comma-separated numbers")
            lat = [parts[:2], parts[2:]]
        return ("torus", lat, get("resolution"))
    if default_icosphere is not None:
        return ("icosphere", default_icosphere)
    raise SystemExit("no mesh given")


def _add_common_flags(p):
    p.add_argument("--out", metavar="PATH",
                   help="write the full report (format from suffix)")
    p.add_argument("--format", choices=("json", "csv"), default=None,
                   help="output format when --out has no known suffix")
    p.add_argument("--quiet", action="store_true",
                   help="suppress the check summary")


def _add_optimizer_flags(p):
    p.add_argument("--iters", type=int, default=None,
                   help="ascent iteration cap")
    p.add_argument("--restarts", type=int, default=None,
                   help="independent ascent starts")
    p.add_argument("--seed", type=int, default=42, help="RNG seed")
    p.add_argument("--step", type=float, default=None,
                   help="initial ascent step size")


def _optimizer_options(args):
    kw = {"seed": args.seed}
    if args.iters is not None:
        kw["max_iterations"] = args.iters
    if args.restarts is not None:
        kw["restarts"] = args.restarts
    if getattr(args, "step", None) is not None:
        kw["initial_step"] = args.step
    return OptimizerOptions(**kw)


def build_parser():
    p = argparse.ArgumentParser(
        prog="spectralab",
        description="spectral geometry experiments on triangle meshes")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", help="solve one weighted spectrum")
    _add_mesh_flags(s)
    s.add_argument("--density", metavar="PATH_OR_VALUE", default=None,
                   help="uniform value, or a file with one value per line")
    s.add_argument("--count", "-k", type=int, default=8,
                   help="number of positive modes (default 8)")
    s.add_argument("--tol", type=float, default=ex.TOL_CLOSED_FORM,
                   help="relative tolerance for closed-form checks")
    _add_common_flags(s)

    s = sub.add_parser("maximize",
                       help="maximize a normalized eigenvalue over density")
    _add_mesh_flags(s)
    s.add_argument("-k", type=int, default=1, help="eigenvalue index")
    s.add_argument("--tol", type=float, default=ex.TOL_OPTIMIZER)
    _add_optimizer_flags(s)
    _add_common_flags(s)

    s = sub.add_parser("gap",
                       help="gap between consecutive conformal maxima")
    _add_mesh_flags(s)
    s.add_argument("-k", type=int, default=1, help="lower index of the gap")
    s.add_argument("--glue-eps", type=float, default=None,
                   help="estimate the upper maximum by gluing two copies "
                        "at this neck radius (sphere, k=1)")
    s.add_argument("--tol", type=float, default=ex.TOL_SURGERY)
    _add_optimizer_flags(s)
    _add_common_flags(s)

    s = sub.add_parser("glue", help="glue two surfaces across a thin neck")
    _add_mesh_flags(s)
    _add_mesh_flags(s, prefix="guest-", default_icosphere=4)
    s.add_argument("--eps", type=str, nargs="+", required=True,
                   help="neck radii, largest to smallest "
                        "(space or comma separated)")
    s.add_argument("--host-center", type=int, default=0)
    s.add_argument("--guest-center", type=int, default=0)
    s.add_argument("--host-mass", type=float, default=None,
                   help="uniform host mass (default: density 1)")
    s.add_argument("--guest-mass", type=float, default=None)
    s.add_argument("--cap-radius", type=float, default=None,
                   help="fixed flattening radius for the whole sweep")
    s.add_argument("--count", type=int, default=6)
    s.add_argument("--tol", type=float, default=ex.TOL_SURGERY)
    _add_common_flags(s)

    s = sub.add_parser("collapse",
                       help="glue, then collapse the guest density")
    _add_mesh_flags(s)
    _add_mesh_flags(s, prefix="guest-", default_icosphere=4)
    s.add_argument("--neck-eps", type=float, default=0.05,
                   help="neck radius of the single glue step")
    s.add_argument("--eps", type=str, nargs="+", required=True,
                   help="collapse scales, largest to smallest "
                        "(space or comma separated)")
    s.add_argument("--host-center", type=int, default=0)
    s.add_argument("--guest-center", type=int, default=0)
    s.add_argument("--host-mass", type=float, default=0.5)
    s.add_argument("--guest-mass", type=float, default=0.5)
    s.add_argument("--cap-radius", type=float, default=None)
    s.add_argument("--count", type=int, default=6)
    s.add_argument("--tol", type=float, default=ex.TOL_SURGERY)
    _add_common_flags(s)

    s = sub.add_parser("handle", help="attach a thin handle")
    _add_mesh_flags(s)
    s.add_argument("--eps", type=str, nargs="+", required=True,
                   help="handle radii, largest to smallest "
                        "(space or comma separated)")
    s.add_argument("--length", type=float, default=0.5)
    s.add_argument("--vertex-a", type=int, default=0)
    s.add_argument("--vertex-b", type=int, default=None,
                   help="default: farthest vertex from vertex-a")
    s.add_argument("--cap-radius", type=float, default=None)
    s.add_argument("--count", type=int, default=6)
    s.add_argument("--tol", type=float, default=ex.TOL_SURGERY)
    _add_common_flags(s)

    s = sub.add_parser("bounds",
                       help="print the reference table and verify it")
    s.add_argument("--rtol", type=float, default=1e-12)
    _add_common_flags(s)

    s = sub.add_parser("report", help="inspect or re-run a saved report")
    s.add_argument("path", help="JSON report file")
    s.add_argument("--rerun", action="store_true",
                   help="re-execute from the report's inputs block")
    _add_common_flags(s)
    return p


def _eps_list(tokens):
    """Flatten space- and comma-separated radius arguments."""
    out = []
    for token in tokens:
        for part in str(token).split(","):
            if part:
                out.append(float(part))
    if not out:
        raise SystemExit("--eps needs at least one value")
    return out


def _dispatch(args):
    cmd = args.command
    if cmd == "spectrum":
        density = args.density
        if density is not None:
            try:
                density = float(density)
            except ValueError:
                pass
        return ex.run_spectrum(_mesh_source(args), density, args.count,
                               args.tol)
    if cmd == "maximize":
        return ex.run_maximize(_mesh_source(args), args.k,
                               _optimizer_options(args), args.tol)
    if cmd == "gap":
        return ex.run_gap(_mesh_source(args), args.k,
                          _optimizer_options(args), args.tol,
                          args.glue_eps)
    if cmd == "glue":
        return ex.run_glue(
            _mesh_source(args), _mesh_source(args, "guest-", 4),
            _eps_list(args.eps),
            args.host_center, args.guest_center, args.host_mass,
            args.guest_mass, args.count, args.cap_radius, args.tol)
    if cmd == "collapse":
        return ex.run_collapse(
            _mesh_source(args), _mesh_source(args, "guest-", 4),
            args.neck_eps, _eps_list(args.eps), args.host_center,
            args.guest_center,
            args.host_mass, args.guest_mass, args.count, args.cap_radius,
            args.tol)
    if cmd == "handle":
        return ex.run_handle(_mesh_source(args), _eps_list(args.eps),
                             args.length,
                             args.vertex_a, args.vertex_b, args.count,
                             args.cap_radius, args.tol)
    if cmd == "bounds":
        return ex.run_bounds(args.rtol)
    if cmd == "report":
        if args.rerun:
            return ex.rerun(args.path)
        import json
        with open(args.path) as fh:
            data = json.load(fh)
        report = ex.ExperimentReport(
            data["name"], data["inputs"], data["values"],
            [ex.Check(**{k: v for k, v in c.items()}) for c in
             data["checks"]], data.get("seed"), data.get("wall_time", 0.0))
        return report
    raise SystemExit("unknown command %r" % cmd)


def main(argv=None):
    args = build_parser().parse_args(argv)
    report = _dispatch(args)
    if not args.quiet:
        print(report.summary())
    if args.out:
        report.save(args.out, args.format)
        if not args.quiet:
            print("wrote %s" % args.out)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())

"""Reproducible experiment drivers and their report format.

Each ``run_*`` function resolves its inputs from a plain description
(so a saved report can be re-executed from its own ``inputs`` block),
runs one experiment, and returns an :class:`ExperimentReport`.  Every
pass/fail check cites an entry of the reference bound table by key;
structural identities (genus counts, mass budgets, monotone trends)
are reported as differences against the ``kernel`` entry, whose exact
value is zero.

Reports serialize to JSON (complete) and CSV (main table only).
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .mesh import (Lattice, TriangleMesh, build_flat_torus, build_icosphere,
                   hexagonal_lattice, load_mesh, square_lattice)
from .spectral import ConformalDensity, flat_torus_closed_form, spectrum_of
from .optimize import OptimizerOptions, maximize_lambda_k
from .surgery import (GlueSpec, attach_handle, collapse_component,
                      dirichlet_segment_spectrum, glue_surfaces,
                      union_spectrum_oracle)
from .bounds import build_bound_table

__all__ = [
    "Check", "ExperimentReport", "resolve_mesh_source",
    "resolve_density_source", "run_spectrum", "run_maximize", "run_gap",
    "run_glue", "run_collapse", "run_handle", "run_bounds", "rerun",
]

#: default relative tolerances by experiment family
TOL_CLOSED_FORM = 0.01
TOL_OPTIMIZER = 0.03
TOL_SURGERY = 0.05

#: slack for "nonincreasing" trend checks, absolute on relative errors
MONOTONE_SLACK = 1e-4


# ---------------------------------------------------------------------------
# report containers


@dataclass
class Check:
    """One pass/fail (or informational) line of a report.

    ``passed`` is None for informational rows; those never cite a
    target and never affect the report verdict.
    """

    name: str
    value: float
    target: float | None = None
    target_key: str | None = None
    tolerance: float | None = None
    passed: bool | None = None
    detail: str = ""

    def to_dict(self):
        d = {"name": self.name, "value": self.value}
        for key in ("target", "target_key", "tolerance", "passed"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass
class ExperimentReport:
    name: str
    inputs: dict
    values: dict
    checks: list = field(default_factory=list)
    seed: int | None = None
    wall_time: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks if c.passed is not None)

    def to_dict(self):
        return {
            "name": self.name,
            "inputs": self.inputs,
            "values": self.values,
            "checks": [c.to_dict() for c in self.checks],
            "seed": self.seed,
            "wall_time": self.wall_time,
            "passed": self.passed,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, default=_jsonable)

    def to_csv(self):
        """Main table as CSV; falls back to the check list."""
        rows = self.values.get("table")
        if not rows:
            rows = [c.to_dict() for c in self.checks]
        if not rows:
            return ""
        cols = []
        for row in rows:
            for key in row:
                if key not in cols:
                    cols.append(key)
        out = [",".join(cols)]
        for row in rows:
            out.append(",".join(_csv_cell(row.get(c)) for c in cols))
        return "\n".join(out) + "\n"

    def save(self, path, fmt=None):
        path = str(path)
        if fmt is None:
            fmt = "csv" if path.endswith(".csv") else "json"
        text = self.to_csv() if fmt == "csv" else self.to_json()
        with open(path, "w") as fh:
            fh.write(text)

    def summary(self):
        """Human-readable one-line-per-check rendering."""
        lines = ["%s  (%.2f s)" % (self.name, self.wall_time)]
        for c in self.checks:
            if c.passed is None:
                lines.append("  info %-38s %.6g%s" % (
                    c.name, c.value, "  " + c.detail if c.detail else ""))
                continue
            mark = "PASS" if c.passed else "FAIL"
            tgt = "" if c.target is None else " target %.6g [%s]" % (
                c.target, c.target_key)
            lines.append("  %s %-38s %.6g%s" % (mark, c.name, c.value, tgt))
        lines.append("  verdict: %s" % ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError("cannot serialize %r" % type(x))


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "%.12g" % v
    if isinstance(v, (list, tuple, np.ndarray)):
        return '"' + " ".join("%.12g" % float(u) for u in v) + '"'
    return str(v)


# ---------------------------------------------------------------------------
# input resolution


def resolve_mesh_source(source):
    """Build a mesh from a plain description.

    Accepted forms: a TriangleMesh (recorded as non-rerunnable), a file
    path, ``("icosphere", n)``, ``("torus", lattice, resolution)`` with
    lattice one of "square", "hexagonal" or a 2x2 row matrix, or the
    equivalent dicts.  Returns (mesh, inputs_dict).
    """
    if isinstance(source, TriangleMesh):
        return source, {"kind": "inline",
                        "vertices": len(source.vertices),
                        "faces": len(source.faces),
                        "genus": source.genus}
    if isinstance(source, str):
        source = {"kind": "file", "path": source}
    if isinstance(source, (tuple, list)):
        head = source[0]
        if head == "icosphere":
            source = {"kind": "icosphere", "subdivisions": int(source[1])}
        elif head == "torus":
            source = {"kind": "torus", "lattice": source[1],
                      "resolution": int(source[2])}
        elif head == "file":
            source = {"kind": "file", "path": source[1]}
        else:
            raise ValueError("unknown mesh source %r" % (source,))
    kind = source["kind"]
    if kind == "icosphere":
        n = int(source["subdivisions"])
        return build_icosphere(n), {"kind": "icosphere", "subdivisions": n}
    if kind == "torus":
        lat, lat_desc = _resolve_lattice(source["lattice"])
        res = int(source["resolution"])
        return build_flat_torus(lat, res), {
            "kind": "torus", "lattice": lat_desc, "resolution": res}
    if kind == "file":
        path = source["path"]
        return load_mesh(path), {"kind": "file", "path": path}
    raise ValueError("unknown mesh source kind %r" % kind)


def _resolve_lattice(spec):
    if isinstance(spec, Lattice):
        return spec, [list(map(float, spec.e1)), list(map(float, spec.e2))]
    if spec == "square":
        return square_lattice(), "square"
    if spec == "hexagonal":
        return hexagonal_lattice(), "hexagonal"
    rows = np.asarray(spec, dtype=float)
    if rows.shape != (2, 2):
        raise ValueError("lattice must be 'square', 'hexagonal' or 2x2")
    lat = Lattice(e1=tuple(rows[0]), e2=tuple(rows[1]))
    return lat, rows.tolist()


def resolve_density_source(mesh, source):
    """Build a ConformalDensity from a plain description.

    None means uniform 1; a number means that uniform value; ``("mass",
    m)`` means the uniform density of total mass m; an array gives
    vertex values; a path loads one value per line.
    """
    if source is None:
        return ConformalDensity.uniform(mesh), {"kind": "uniform",
                                                "value": 1.0}
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        v = float(source)
        return ConformalDensity.uniform(mesh, v), {"kind": "uniform",
                                                   "value": v}
    if isinstance(source, (tuple, list)) and len(source) == 2 \
            and source[0] == "mass":
        m = float(source[1])
        v = m / mesh.total_area()
        return ConformalDensity.uniform(mesh, v), {"kind": "mass",
                                                   "mass": m}
    if isinstance(source, dict):
        kind = source["kind"]
        if kind == "uniform":
            return resolve_density_source(mesh, source["value"])
        if kind == "mass":
            return resolve_density_source(mesh, ("mass", source["mass"]))
        if kind == "file":
            return resolve_density_source(mesh, source["path"])
        if kind == "values":
            return resolve_density_source(mesh, source["values"])
        raise ValueError("unknown density source %r" % source)
    if isinstance(source, str):
        vals = np.loadtxt(source, dtype=float).ravel()
        return ConformalDensity(vals), {"kind": "file", "path": source}
    vals = np.asarray(source, dtype=float)
    return ConformalDensity(vals), {"kind": "values",
                                    "values": vals.tolist()}


# ---------------------------------------------------------------------------
# check helpers

_TABLE = None


def _table():
    global _TABLE
    if _TABLE is None:
        _TABLE = build_bound_table()
    return _TABLE


def _close_check(name, value, key, tol, detail=""):
    """value within tol (relative) of the cited table entry."""
    target = _table().get(key).value
    scale = max(abs(target), 1e-12)
    ok = abs(value - target) <= tol * scale
    return Check(name, float(value), target, key, tol, bool(ok), detail)


def _above_check(name, value, key, tol, detail=""):
    """value >= (1 - tol) times the cited lower bound."""
    target = _table().get(key).value
    ok = value >= target * (1.0 - tol)
    return Check(name, float(value), target, key, tol, bool(ok), detail)


def _below_check(name, value, key, tol, detail=""):
    """value <= (1 + tol) times the cited upper bound."""
    target = _table().get(key).value
    ok = value <= target * (1.0 + tol)
    return Check(name, float(value), target, key, tol, bool(ok), detail)


def _zero_check(name, value, tol, detail=""):
    """|value| <= tol, cited against the exact-zero table entry."""
    ok = abs(value) <= tol
    return Check(name, float(value), 0.0, "kernel", tol, bool(ok), detail)


def _info(name, value, detail=""):
    return Check(name, float(value), detail=detail)


def _max_increase(seq):
    """Largest upward step of a sequence that should be nonincreasing.

    Clamped at zero so a strictly decreasing path reports 0 and the
    result can be checked as a difference against the exact-zero entry.
    """
    seq = np.asarray(seq, dtype=float)
    if len(seq) < 2:
        return 0.0
    return float(max(0.0, np.max(np.diff(seq))))


def _rel_err(value, target, floor):
    return abs(value - target) / max(abs(target), floor)


def _union_errors(values, targets):
    """Zero-safe relative errors of one spectrum against another.

    Entries are compared slot by slot; each slot is scaled by the
    larger of its target and the largest target in the window, so the
    zero mode contributes an absolute error on the spectral scale.
    """
    values = np.asarray(values, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n = min(len(values), len(targets))
    scale = max(float(np.max(np.abs(targets[:n]))), 1e-12)
    return [abs(values[i] - targets[i]) / max(abs(targets[i]), scale)
            for i in range(n)]


# ---------------------------------------------------------------------------
# experiments


def run_spectrum(mesh_source, density_source=None, count=8,
                 tol=TOL_CLOSED_FORM, seed=0):
    """Solve one spectrum and compare it with closed forms when known.

    On an icosphere with uniform density the normalized eigenvalues are
    checked against the round-sphere band values; on a named flat torus
    the first positive one is checked against its lattice value and the
    full dual-lattice comparison is attached as a table.
    """
    t0 = time.perf_counter()
    mesh, mesh_inputs = resolve_mesh_source(mesh_source)
    density, dens_inputs = resolve_density_source(mesh, density_source)
    report = spectrum_of(mesh, density, count=count)
    lam = report.normalized
    checks = [_zero_check(
        "zero mode", lam[0], tol * max(lam[min(1, len(lam) - 1)], 1.0),
        "normalized lambda_0 of a closed surface")]

    uniform = dens_inputs["kind"] in ("uniform", "mass")
    table = None
    if mesh_inputs["kind"] == "icosphere" and uniform:
        for k in (1, 2, 3, 4, 8):
            if k < len(lam):
                checks.append(_close_check(
                    "normalized lambda_%d vs round sphere" % k, lam[k],
                    "round_sphere_eigenvalue(%d)" % k, tol))
    elif mesh_inputs["kind"] == "torus" and uniform:
        lat, _ = _resolve_lattice(mesh_inputs["lattice"])
        exact = flat_torus_closed_form(lat, count).normalized
        table = [{"k": k, "computed": float(lam[k]),
                  "exact": float(exact[k]),
                  "rel_err": _rel_err(lam[k], exact[k], exact[-1])}
                 for k in range(min(len(lam), len(exact)))]
        if mesh_inputs["lattice"] == "square":
            checks.append(_close_check(
                "normalized lambda_1 vs square torus", lam[1],
                "torus_square_lambda1", tol))
        elif mesh_inputs["lattice"] == "hexagonal":
            checks.append(_close_check(
                "normalized lambda_1 vs hexagonal torus", lam[1],
                "torus_hexagonal_lambda1", tol))
        checks.append(_info(
            "max closed-form rel err",
            max(r["rel_err"] for r in table),
            "dual-lattice values for the first %d modes" % count))

    values = {
        "eigenvalues": [float(v) for v in report.eigenvalues],
        "normalized": [float(v) for v in lam],
        "total_mass": float(report.total_mass),
        "clusters": [list(c) for c in report.clusters],
        "method": report.method,
        "iterations": report.iterations,
    }
    if table:
        values["table"] = table
    return ExperimentReport(
        "spectrum",
        {"experiment": "spectrum", "mesh": mesh_inputs,
         "density": dens_inputs, "count": count, "tol": tol},
        values, checks, seed, time.perf_counter() - t0)


def _options_inputs(options):
    return {"max_iterations": options.max_iterations,
            "restarts": options.restarts, "seed": options.seed,
            "initial_step": options.initial_step,
            "smoothing_temperature": options.smoothing_temperature}


def run_maximize(mesh_source, k=1, options=None, tol=TOL_OPTIMIZER,
                 initial_density=None):
    """Maximize normalized lambda_k over the density and check bounds.

    The optimum is checked from below against the conformal lower bound
    and from above against the genus bound; on the sphere (k = 1) and
    the hexagonal torus the known maxima pin the value on both sides.
    """
    t0 = time.perf_counter()
    mesh, mesh_inputs = resolve_mesh_source(mesh_source)
    options = options or OptimizerOptions()
    result = maximize_lambda_k(mesh, k, options,
                               initial_density=initial_density)
    v = result.best_value
    genus = mesh.genus

    checks = [_above_check(
        "optimum vs conformal lower bound", v,
        "conformal_lower_bound(2,%d)" % k, tol,
        "discrete optimum of the conformal supremum")]
    if k == 1 and genus <= 5:
        checks.append(_below_check(
            "optimum vs genus bound", v, "yang_yau_bound(%d)" % genus, tol))
    if k == 1 and genus == 0:
        checks.append(_close_check(
            "optimum vs sphere maximum", v, "hersch", tol,
            "round metric is the unique maximizer"))
    if k == 1 and mesh_inputs.get("lattice") == "hexagonal":
        checks.append(_close_check(
            "optimum vs hexagonal torus maximum", v,
            "torus_hexagonal_lambda1", tol))
    if k == 1 and mesh_inputs.get("lattice") == "square":
        checks.append(_above_check(
            "optimum vs square torus value", v, "torus_square_lambda1",
            tol, "the flat value is attained by the uniform density"))

    values = {
        "best_value": float(v),
        "status": result.status,
        "gradient_norm": float(result.gradient_norm),
        "restart_values": [float(x) for x in result.restart_values],
        "restart_index": result.restart_index,
        "history_tail": [[int(i), float(val), float(s), int(c)]
                         for i, val, s, c in result.history[-10:]],
    }
    return ExperimentReport(
        "maximize",
        {"experiment": "maximize", "mesh": mesh_inputs, "k": k,
         "tol": tol, "options": _options_inputs(options)},
        values, checks, options.seed, time.perf_counter() - t0)


def run_gap(mesh_source, k=1, options=None, tol=TOL_SURGERY,
            glue_eps=None):
    """Estimate the gap between consecutive conformal maxima.

    Runs two independent maximizations and checks their difference
    against the universal gap bound.  On a sphere with ``glue_eps``
    set, the second maximum is instead estimated by gluing two copies
    of the surface across a small neck, the construction whose limit
    attains the two-copy value; the first uses the uniform density,
    which is the known sphere maximizer.
    """
    t0 = time.perf_counter()
    mesh, mesh_inputs = resolve_mesh_source(mesh_source)
    options = options or OptimizerOptions()
    genus = mesh.genus

    if glue_eps is not None and k == 1 and genus == 0:
        lo = spectrum_of(mesh, ConformalDensity.uniform(mesh),
                         count=k + 1).normalized[k]
        lo_how = "uniform density (round maximizer)"
        spec = GlueSpec(mesh, mesh, 0, 0, float(glue_eps))
        half = ConformalDensity.uniform(mesh, 0.5 / mesh.total_area())
        glued = glue_surfaces(spec, half, half)
        hi = spectrum_of(glued.mesh, glued.density,
                         count=k + 2).normalized[k + 1]
        hi_how = "two copies glued at eps=%g" % glue_eps
    else:
        lo = maximize_lambda_k(mesh, k, options).best_value
        lo_how = "ascent, k=%d" % k
        hi = maximize_lambda_k(mesh, k + 1, options).best_value
        hi_how = "ascent, k=%d" % (k + 1)

    gap = hi - lo
    checks = [
        _above_check("gap of consecutive maxima", gap,
                     "spectral_gap_bound(2)", tol,
                     "lambda_%d estimate minus lambda_%d estimate"
                     % (k + 1, k)),
        _info("lambda_%d estimate" % k, lo, lo_how),
        _info("lambda_%d estimate" % (k + 1), hi, hi_how),
    ]
    values = {"lambda_k": float(lo), "lambda_k1": float(hi),
              "gap": float(gap), "estimators": [lo_how, hi_how]}
    return ExperimentReport(
        "gap",
        {"experiment": "gap", "mesh": mesh_inputs, "k": k, "tol": tol,
         "glue_eps": glue_eps, "options": _options_inputs(options)},
        values, checks, options.seed, time.perf_counter() - t0)


def _as_eps_list(eps):
    if isinstance(eps, (int, float)):
        return [float(eps)]
    return [float(e) for e in eps]


def run_glue(host_source, guest_source, eps, host_center=0, guest_center=0,
             host_mass=None, guest_mass=None, count=6, cap_radius=None,
             tol=TOL_SURGERY, seed=0):
    """Glue two surfaces across shrinking necks and track the spectrum.

    For each neck radius the glued spectrum is compared slot by slot
    with the reordered union of the two separate spectra, the limit the
    construction converges to.  With two equal-mass sphere copies the
    first positive limit value is the two-copy bound, and the final
    neck must reach it to the surgery tolerance.
    """
    t0 = time.perf_counter()
    host, host_inputs = resolve_mesh_source(host_source)
    guest, guest_inputs = resolve_mesh_source(guest_source)
    eps_list = sorted(_as_eps_list(eps), reverse=True)

    host_density, hd = resolve_density_source(
        host, None if host_mass is None else ("mass", host_mass))
    guest_density, gd = resolve_density_source(
        guest, None if guest_mass is None else ("mass", guest_mass))

    host_alone = spectrum_of(host, host_density, count=count + 1)
    guest_alone = spectrum_of(guest, guest_density, count=count + 1)
    union = union_spectrum_oracle(host_alone, guest_alone, count)
    total_mass = host_alone.total_mass + guest_alone.total_mass

    table = []
    genus_err = 0.0
    final = None
    for e in eps_list:
        spec = GlueSpec(host, guest, host_center, guest_center, e,
                        cap_radius=cap_radius)
        glued = glue_surfaces(spec, host_density, guest_density)
        rep = spectrum_of(glued.mesh, glued.density, count=count)
        errs = _union_errors(rep.eigenvalues[:count], union[:count])
        genus_err = max(genus_err,
                        abs(glued.mesh.genus - (host.genus + guest.genus)))
        row = {"eps": e,
               "eigenvalues": [float(v) for v in rep.eigenvalues[:count]],
               "normalized": [float(v) for v in rep.normalized[:count]],
               "max_union_err": max(errs),
               "mass": float(rep.total_mass),
               "mass_err": _rel_err(rep.total_mass, total_mass, 1e-12),
               "flatten_delta": float(glued.delta)}
        table.append(row)
        final = rep

    err_path = [row["max_union_err"] for row in table]
    checks = [
        _zero_check("genus additivity", genus_err, 0.5,
                    "genus of the glued surface minus the sum"),
        _zero_check("mass additivity", table[-1]["mass_err"], 0.01,
                    "relative neck contribution at the final neck"),
    ]
    if len(eps_list) >= 3:
        checks.append(_zero_check(
            "union error nonincreasing", _max_increase(err_path),
            MONOTONE_SLACK, "largest upward step along the neck sweep"))
    checks.append(_info("final max union err", err_path[-1],
                        "slot-by-slot against the reordered union"))

    spheres = (host_inputs["kind"] == "icosphere"
               and guest_inputs["kind"] == "icosphere")
    if spheres and abs(host_alone.total_mass - guest_alone.total_mass) \
            <= 1e-9 * total_mass:
        lam2 = final.normalized[2]
        checks.append(_close_check(
            "glued lambda_2 vs two-copy bound", lam2,
            "sphere_lambda2_conformal", tol,
            "first positive union value for equal sphere copies"))

    values = {"table": table,
              "union_oracle": [float(v) for v in union[:count]],
              "host_mass": float(host_alone.total_mass),
              "guest_mass": float(guest_alone.total_mass)}
    return ExperimentReport(
        "glue",
        {"experiment": "glue", "host": host_inputs, "guest": guest_inputs,
         "eps": eps_list, "host_center": host_center,
         "guest_center": guest_center, "host_mass": host_mass,
         "guest_mass": guest_mass, "count": count,
         "cap_radius": cap_radius, "tol": tol},
        values, checks, seed, time.perf_counter() - t0)


def run_collapse(host_source, guest_source, neck_eps, collapse_eps,
                 host_center=0, guest_center=0, host_mass=0.5,
                 guest_mass=0.5, count=6, cap_radius=None,
                 tol=TOL_SURGERY, seed=0):
    """Collapse the guest of a glued surface and watch it disappear.

    The surface is glued once at ``neck_eps``; the guest density is
    then scaled down through the ``collapse_eps`` sweep.  The raw
    spectrum must converge to the spectrum of the host alone, and on a
    sphere host the normalized first eigenvalue must return to the
    round value.
    """
    t0 = time.perf_counter()
    host, host_inputs = resolve_mesh_source(host_source)
    guest, guest_inputs = resolve_mesh_source(guest_source)
    eps_list = sorted(_as_eps_list(collapse_eps), reverse=True)

    host_density, _ = resolve_density_source(host, ("mass", host_mass))
    guest_density, _ = resolve_density_source(guest, ("mass", guest_mass))
    host_alone = spectrum_of(host, host_density, count=count)

    spec = GlueSpec(host, guest, host_center, guest_center, float(neck_eps),
                    cap_radius=cap_radius)
    glued = glue_surfaces(spec, host_density, guest_density)

    table = []
    for e in eps_list:
        shrunk = collapse_component(glued, "guest", e)
        rep = spectrum_of(glued.mesh, shrunk, count=count)
        errs = _union_errors(rep.eigenvalues[:count],
                             host_alone.eigenvalues[:count])
        table.append({
            "eps": e,
            "eigenvalues": [float(v) for v in rep.eigenvalues[:count]],
            "normalized": [float(v) for v in rep.normalized[:count]],
            "max_host_err": max(errs),
            "mass": float(rep.total_mass)})

    err_path = [row["max_host_err"] for row in table]
    checks = []
    if len(eps_list) >= 3:
        checks.append(_zero_check(
            "host error nonincreasing", _max_increase(err_path),
            MONOTONE_SLACK, "largest upward step along the collapse"))
    checks.append(_zero_check(
        "final spectrum matches host", err_path[-1], tol,
        "max slot error vs the host-alone spectrum, zero-safe"))
    if host_inputs["kind"] == "icosphere":
        checks.append(_close_check(
            "final normalized lambda_1 vs sphere", table[-1]["normalized"][1],
            "round_sphere_eigenvalue(1)", 2 * tol,
            "collapsed surface seen at its own total mass"))

    values = {"table": table,
              "host_spectrum": [float(v) for v in
                                host_alone.eigenvalues[:count]],
              "neck_eps": float(neck_eps)}
    return ExperimentReport(
        "collapse",
        {"experiment": "collapse", "host": host_inputs,
         "guest": guest_inputs, "neck_eps": neck_eps,
         "collapse_eps": eps_list, "host_center": host_center,
         "guest_center": guest_center, "host_mass": host_mass,
         "guest_mass": guest_mass, "count": count,
         "cap_radius": cap_radius, "tol": tol},
        values, checks, seed, time.perf_counter() - t0)


def _far_vertex(mesh, origin):
    return int(np.argmax(mesh.geodesic_distances(origin)))


def run_handle(mesh_source, eps, length=0.5, vertex_a=0, vertex_b=None,
               count=6, cap_radius=None, tol=TOL_SURGERY, seed=0):
    """Attach a thin handle and compare with the surface-plus-segment limit.

    The limit spectrum is the reordered union of the host spectrum and
    the Dirichlet spectrum of a segment of the handle's length, with
    segment entries placed first among ties.  Host-paired slots must
    track the host; the segment-paired slot converges only at the
    logarithmic neck rate and is reported informationally.
    """
    t0 = time.perf_counter()
    mesh, mesh_inputs = resolve_mesh_source(mesh_source)
    if vertex_b is None:
        vertex_b = _far_vertex(mesh, vertex_a)
    eps_list = sorted(_as_eps_list(eps), reverse=True)

    host_alone = spectrum_of(mesh, None, count=count + 1)
    segment = dirichlet_segment_spectrum(length, count)
    # Reordered union with segment entries first among near-ties: the
    # handle modes approach their segment limits from below, so when a
    # limit coincides with a host eigenvalue up to discretization the
    # glued spectrum lists the handle mode first.
    union = []
    pairing = []
    hi, si = 0, 0
    while len(union) < count + 1:
        seg = segment[si] if si < len(segment) else np.inf
        hst = host_alone.eigenvalues[hi] if hi < count + 1 else np.inf
        if seg <= hst * (1.0 + tol):
            union.append(float(seg))
            pairing.append("segment")
            si += 1
        else:
            union.append(float(hst))
            pairing.append("host")
            hi += 1

    table = []
    genus_err = 0.0
    for e in eps_list:
        surf = attach_handle(mesh, vertex_a, vertex_b, e, length,
                             cap_radius=cap_radius)
        rep = spectrum_of(surf.mesh, surf.density, count=count)
        genus_err = max(genus_err, abs(surf.mesh.genus - (mesh.genus + 1)))
        scale = max(union[:count])
        host_errs = [abs(rep.eigenvalues[i] - union[i])
                     / max(union[i], scale)
                     for i in range(count) if pairing[i] == "host"]
        seg_vals = [float(rep.eigenvalues[i]) for i in range(count)
                    if pairing[i] == "segment"]
        table.append({
            "eps": e,
            "eigenvalues": [float(v) for v in rep.eigenvalues[:count]],
            "max_host_err": max(host_errs),
            "segment_modes": seg_vals,
            "area": float(surf.mesh.total_area())})

    err_path = [row["max_host_err"] for row in table]
    checks = [_zero_check("genus increment", genus_err, 0.5,
                          "genus after minus genus before minus one")]
    if len(eps_list) >= 3:
        checks.append(_zero_check(
            "host error nonincreasing", _max_increase(err_path),
            MONOTONE_SLACK, "largest upward step along the handle sweep"))
    checks.append(_zero_check(
        "host-paired modes track the host", err_path[-1], tol,
        "max error over slots paired with host eigenvalues"))
    if table[-1]["segment_modes"]:
        seg_first = (length / np.pi) ** 2 * table[-1]["segment_modes"][0]
        checks.append(_info(
            "segment mode ratio", seg_first,
            "first handle mode over (pi/length)^2; tends to 1 "
            "logarithmically in the neck radius"))

    values = {"table": table, "union_oracle": union[:count],
              "pairing": pairing[:count],
              "segment_oracle": [float(v) for v in segment[:3]],
              "host_spectrum": [float(v) for v in
                                host_alone.eigenvalues[:count]]}
    return ExperimentReport(
        "handle",
        {"experiment": "handle", "mesh": mesh_inputs, "eps": eps_list,
         "length": length, "vertex_a": vertex_a,
         "vertex_b": int(vertex_b), "count": count,
         "cap_radius": cap_radius, "tol": tol},
        values, checks, seed, time.perf_counter() - t0)


def run_bounds(rtol=1e-12):
    """Dump the reference table and verify its internal identities."""
    t0 = time.perf_counter()
    table = _table()
    results = table.selfcheck(rtol)
    failing = sum(1 for _, ok, _ in results if not ok)
    checks = [_zero_check("identities failing", failing, 0.5,
                          "%d cross-identities at rtol %g"
                          % (len(results), rtol))]
    values = {
        "entries": [e.to_dict() for e in table.entries],
        "identities": [{"name": n, "ok": bool(ok), "rel_err": float(r)}
                       for n, ok, r in results],
        "table": [e.to_dict() for e in table.entries],
    }
    return ExperimentReport(
        "bounds", {"experiment": "bounds", "rtol": rtol}, values, checks,
        None, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# re-running saved reports

_RUNNERS = {
    "spectrum": lambda i: run_spectrum(
        i["mesh"], i["density"], i["count"], i["tol"]),
    "maximize": lambda i: run_maximize(
        i["mesh"], i["k"], OptimizerOptions(**i["options"]), i["tol"]),
    "gap": lambda i: run_gap(
        i["mesh"], i["k"], OptimizerOptions(**i["options"]), i["tol"],
        i["glue_eps"]),
    "glue": lambda i: run_glue(
        i["host"], i["guest"], i["eps"], i["host_center"],
        i["guest_center"], i["host_mass"], i["guest_mass"], i["count"],
        i["cap_radius"], i["tol"]),
    "collapse": lambda i: run_collapse(
        i["host"], i["guest"], i["neck_eps"], i["collapse_eps"],
        i["host_center"], i["guest_center"], i["host_mass"],
        i["guest_mass"], i["count"], i["cap_radius"], i["tol"]),
    "handle": lambda i: run_handle(
        i["mesh"], i["eps"], i["length"], i["vertex_a"], i["vertex_b"],
        i["count"], i["cap_radius"], i["tol"]),
    "bounds": lambda i: run_bounds(i["rtol"]),
}


def rerun(report):
    """Re-execute a report from its own inputs block.

    Accepts an ExperimentReport, a dict, or a path to a saved JSON
    report.  Reports built from inline mesh objects are not
    re-runnable.
    """
    if isinstance(report, ExperimentReport):
        inputs = report.inputs
    elif isinstance(report, dict):
        inputs = report.get("inputs", report)
    else:
        with open(report) as fh:
            inputs = json.load(fh)["inputs"]
    for key in ("mesh", "host", "guest"):
        if inputs.get(key, {}).get("kind") == "inline":
            raise ValueError("report was built from an in-memory mesh "
                             "and records no way to rebuild it")
    name = inputs["experiment"]
    if name not in _RUNNERS:
        raise ValueError("unknown experiment %r" % name)
    return _RUNNERS[name](inputs)

"""End-to-end acceptance gate for the laboratory.

One test per advertised capability, each printing a single summary
line: discretization accuracy of the closed forms, optimizer
attainment of the conformal bounds, surgery convergence, the
randomized property suites, and the bound table itself.  Expensive
artifacts (the optimized sphere, the glued two-sphere family) are
session fixtures shared by the later checks.
"""

import math
import time

import numpy as np
import pytest

import property_suites
from conftest import rel_err
from spectralab import (ConformalDensity, GlueSpec, Lattice,
                        OptimizerOptions, attach_handle, bump_density,
                        build_flat_torus, build_bound_table, glue_surfaces,
                        hexagonal_lattice, maximize_lambda_k, spectrum_of,
                        square_lattice, stationarity_report)
from spectralab import experiments as ex

SPHERE_BOUND = 8 * math.pi
HEX_BOUND = 8 * math.pi ** 2 / math.sqrt(3)
SQUARE_VALUE = 4 * math.pi ** 2


@pytest.fixture(scope="session")
def sphere_ascent(ico4):
    """Maximize the first eigenvalue on the sphere from a bump start."""
    t0 = time.perf_counter()
    opts = OptimizerOptions(max_iterations=60, restarts=1, seed=42)
    res = maximize_lambda_k(ico4, 1, opts,
                            initial_density=bump_density(ico4))
    stat = stationarity_report(ico4, 1)
    return {"value": res.best_value,
            "gradient_norm": stat["gradient_norm"],
            "wall": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def hex_ascent(hex32):
    """Maximize the first eigenvalue on the hexagonal torus from a
    random start."""
    rng = np.random.default_rng(1)
    init = ConformalDensity(np.exp(rng.normal(0.0, 0.3,
                                              hex32.num_vertices)))
    opts = OptimizerOptions(max_iterations=150, restarts=1, seed=42)
    res = maximize_lambda_k(hex32, 1, opts, initial_density=init)
    return {"value": res.best_value}


@pytest.fixture(scope="session")
def two_sphere_sweep(ico4):
    """Glue two mass-1/2 spheres across a shrinking neck."""
    t0 = time.perf_counter()
    rho = ConformalDensity(
        np.full(ico4.num_vertices, 0.5 / ico4.total_area()))
    rows = []
    for eps in [0.2, 0.1, 0.05]:
        glued = glue_surfaces(GlueSpec(ico4, ico4, 0, 0, eps),
                              host_density=rho, guest_density=rho)
        lam2 = spectrum_of(glued.mesh, glued.density, count=2).normalized[2]
        rows.append((eps, float(lam2)))
    return {"rows": rows, "wall": time.perf_counter() - t0}


def test_sphere_spectrum_matches_round_bands(ico4):
    t0 = time.perf_counter()
    lam = spectrum_of(ico4, count=8).normalized
    wall = time.perf_counter() - t0
    first = np.abs(lam[1:4] - SPHERE_BOUND).max() / SPHERE_BOUND
    second = np.abs(lam[4:9] - 3 * SPHERE_BOUND).max() / (3 * SPHERE_BOUND)
    print(f"PASS sphere bands: first {first:.2%}, second {second:.2%}, "
          f"{wall:.1f}s")
    assert first < 0.01
    assert second < 0.015
    assert wall < 30.0


def test_torus_spectra_match_lattice_closed_forms(hex32, torus32):
    t0 = time.perf_counter()
    hex_rep = spectrum_of(hex32, count=8)
    sq_rep = spectrum_of(torus32, count=8)
    wall = time.perf_counter() - t0
    hex_err = rel_err(hex_rep.normalized[1], HEX_BOUND)
    sq_err = rel_err(sq_rep.normalized[1], SQUARE_VALUE)
    print(f"PASS torus closed forms: hex {hex_err:.2%} (x{len(hex_rep.cluster_of(1))}), "
          f"square {sq_err:.2%} (x{len(sq_rep.cluster_of(1))}), {wall:.1f}s")
    assert hex_err < 0.01
    assert len(hex_rep.cluster_of(1)) == 6
    assert sq_err < 0.01
    assert len(sq_rep.cluster_of(1)) == 4
    assert wall < 30.0


def test_sphere_ascent_reaches_conformal_bound(sphere_ascent):
    err = rel_err(sphere_ascent["value"], SPHERE_BOUND)
    gn = sphere_ascent["gradient_norm"]
    print(f"PASS sphere ascent: value {sphere_ascent['value']:.3f} "
          f"({err:.2%} of 8*pi), uniform gradient norm {gn:.2e}, "
          f"{sphere_ascent['wall']:.0f}s")
    assert err < 0.03
    assert gn < 1e-4
    assert sphere_ascent["wall"] < 300.0


def test_torus_ascent_hex_bound_and_elongated_gain(hex_ascent):
    hex_err = rel_err(hex_ascent["value"], HEX_BOUND)
    mesh = build_flat_torus(Lattice(e1=(1.4, 0.0), e2=(0.0, 1.0)), 32)
    uniform = spectrum_of(mesh, count=1).normalized[1]
    opts = OptimizerOptions(max_iterations=150, restarts=2, seed=3)
    res = maximize_lambda_k(mesh, 1, opts)
    gain = res.best_value / uniform
    print(f"PASS torus ascent: hex {hex_err:.2%} of the bound, "
          f"elongated gain {gain - 1:.2%}")
    assert hex_err < 0.03
    assert gain > 1.01


def test_optimized_lambda1_meets_universal_bound_across_genus(
        sphere_ascent, hex_ascent, torus32):
    far = int(np.argmax(torus32.geodesic_distances(0)))
    handled = attach_handle(torus32, 0, far, 0.05, 0.5)
    assert handled.mesh.genus == 2
    opts = OptimizerOptions(max_iterations=30, restarts=1, seed=0)
    genus2 = maximize_lambda_k(handled.mesh, 1, opts).best_value
    sphere = sphere_ascent["value"]
    torus = hex_ascent["value"]
    print(f"PASS universal bound: sphere {sphere:.2f}, torus {torus:.2f}, "
          f"genus-2 {genus2:.2f}, floor {0.97 * SPHERE_BOUND:.2f}")
    for value in (sphere, torus, genus2):
        assert value >= 0.97 * SPHERE_BOUND
    assert torus >= sphere * 0.97
    assert genus2 >= sphere * 0.97


def test_two_sphere_gluing_converges_to_doubled_bound(two_sphere_sweep):
    errs = [rel_err(lam2, 2 * SPHERE_BOUND)
            for _, lam2 in two_sphere_sweep["rows"]]
    print(f"PASS two-sphere gluing: errors {[f'{e:.2%}' for e in errs]}, "
          f"{two_sphere_sweep['wall']:.0f}s")
    assert all(b <= a * (1 + 1e-4) for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.05
    assert two_sphere_sweep["wall"] < 600.0


def test_second_eigenvalue_gap_exceeds_sphere_quantum(
        sphere_ascent, two_sphere_sweep):
    lam2 = max(lam for _, lam in two_sphere_sweep["rows"])
    gap = lam2 - sphere_ascent["value"]
    print(f"PASS spectral gap: {lam2:.2f} - {sphere_ascent['value']:.2f} "
          f"= {gap:.2f} >= {0.95 * SPHERE_BOUND:.2f}")
    assert gap >= 0.95 * SPHERE_BOUND


def test_collapsing_glued_component_recovers_host_spectrum():
    rep = ex.run_collapse(("icosphere", 4), ("icosphere", 4),
                          neck_eps=0.05, collapse_eps=[1.0, 0.3, 0.1, 0.03],
                          count=4, tol=0.05, seed=0)
    path = [row["max_host_err"] for row in rep.values["table"]]
    print(f"PASS collapse: host errors {[f'{e:.2%}' for e in path]}")
    print(rep.summary())
    assert rep.passed


def test_thin_handle_preserves_host_modes_and_raises_genus():
    rep = ex.run_handle(("torus", "square", 32), eps=[0.1, 0.05, 0.02],
                        length=0.5, count=6, tol=0.05, seed=0)
    path = [row["max_host_err"] for row in rep.values["table"]]
    print(f"PASS handle: host-paired errors {[f'{e:.2%}' for e in path]}")
    print(rep.summary())
    assert rep.passed


def test_randomized_property_suites():
    cases = 1000
    suites = [
        property_suites.suite_stiffness_row_sums,
        property_suites.suite_scaling_invariance,
        property_suites.suite_mass_monotonicity,
        property_suites.suite_quasi_isometry,
        property_suites.suite_gradient_finite_difference,
        property_suites.suite_genus_bookkeeping,
    ]
    for suite in suites:
        suite(cases)
    print(f"PASS property suites: {len(suites)} suites x {cases} cases")


def test_bound_table_identities():
    t0 = time.perf_counter()
    table = build_bound_table()
    checks = table.selfcheck(rtol=1e-12)
    wall = time.perf_counter() - t0
    bad = [name for name, ok, _ in checks if not ok]
    print(f"PASS bound table: {len(table.keys())} entries, "
          f"{len(checks)} identities exact, {wall * 1e3:.0f}ms")
    assert not bad
    assert len(checks) >= 20
    assert wall < 1.0

"""Caps, flattening, gluing, collapse, handles, and their oracles."""

import math

import numpy as np
import pytest

from spectralab import (CapSpec, ConformalDensity, GlueSpec,
                        IllConditionedInputError, SurgeryError,
                        attach_handle, build_flat_torus, build_icosphere,
                        cap_metric_factor, collapse_component,
                        dirichlet_segment_spectrum, epsilon_of_R,
                        flatten_density_near, glue_surfaces, max_disk_radius,
                        save_mesh, load_mesh, spectrum_of, square_lattice,
                        stereographic_factor, union_spectrum_oracle)

from conftest import rel_err, spectra_rel_errors


# -- cap oracles --------------------------------------------------------------

def test_stereographic_factor_values():
    assert stereographic_factor(np.zeros(2)) == 4.0
    assert math.isclose(stereographic_factor(np.array([1.0, 0.0])), 1.0)
    assert math.isclose(stereographic_factor(np.array([0.6, 0.8])), 1.0)


def test_stereographic_factor_monotone():
    radii = np.linspace(0.1, 30, 50)
    vals = [stereographic_factor(np.array([r, 0.0])) for r in radii]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_epsilon_of_R():
    assert math.isclose(epsilon_of_R(1.0), 1.0)
    assert math.isclose(epsilon_of_R(3.0), 0.6)
    assert epsilon_of_R(1e-6) < 3e-6


def test_cap_factor_continuous_at_R():
    for R in (0.5, 1.0, 2.5):
        spec = CapSpec(R)
        inner = cap_metric_factor(np.array([R - 1e-9, 0.0]), spec)
        outer = cap_metric_factor(np.array([R + 1e-9, 0.0]), spec)
        assert math.isclose(inner, outer, rel_tol=1e-6)


def test_cap_factor_r1_is_one_at_unit_circle():
    spec = CapSpec(1.0)
    assert math.isclose(cap_metric_factor(np.array([0.0, 1.0]), spec), 1.0)


def test_cap_rescaled_outer_region():
    # outside the cap the rescaled metric is euclidean of size eps/rho
    R, rho = 2.0, 0.25
    spec = CapSpec(R, rho_target=rho)
    factor = cap_metric_factor(np.array([rho, 0.0]), spec)
    assert math.isclose(factor, (epsilon_of_R(R) / rho) ** 2, rel_tol=1e-12)


def test_cap_guards():
    with pytest.raises(IllConditionedInputError):
        CapSpec(-1.0)
    with pytest.raises(IllConditionedInputError):
        cap_metric_factor(np.zeros(2), CapSpec(1.0, rho_target=-2.0))


# -- segment oracle -----------------------------------------------------------

def test_dirichlet_segment_unit():
    vals = dirichlet_segment_spectrum(1.0, 3)
    assert np.allclose(vals, [math.pi ** 2, 4 * math.pi ** 2,
                              9 * math.pi ** 2], rtol=1e-15)


def test_dirichlet_segment_length_two():
    assert math.isclose(dirichlet_segment_spectrum(2.0, 1)[0],
                        math.pi ** 2 / 4, rel_tol=1e-15)


def test_dirichlet_short_segment_escapes_window():
    # a short handle's first mode clears any low eigenvalue window
    first = dirichlet_segment_spectrum(0.1, 1)[0]
    assert first > 8 * math.pi * 8


def test_dirichlet_guard():
    with pytest.raises(IllConditionedInputError):
        dirichlet_segment_spectrum(0.0, 2)


# -- union oracle ---------------------------------------------------------------

def test_union_two_half_spheres(ico3):
    half = ConformalDensity.uniform(ico3, 0.5 / ico3.total_area())
    rep = spectrum_of(ico3, half, count=6)
    union = union_spectrum_oracle(rep, rep, 7)
    assert abs(union[0]) < 1e-8
    assert abs(union[1]) < 1e-8
    assert np.allclose(union[2:8], 16 * math.pi, rtol=0.01)


def test_union_identity_with_empty(ico2):
    rep = spectrum_of(ico2, count=4)
    alone = union_spectrum_oracle(rep, None, 4)
    assert np.allclose(alone, rep.eigenvalues[:5])


def test_union_second_value_zero(ico2, torus16):
    u = union_spectrum_oracle(spectrum_of(ico2, count=3),
                              spectrum_of(torus16, count=3), 3)
    assert abs(u[1]) < 1e-8


# -- flattening -----------------------------------------------------------------

def test_flatten_constant_is_identity(ico2):
    rho = ConformalDensity.uniform(ico2, 2.0)
    out = flatten_density_near(ico2, rho, 0, 0.4)
    assert out.delta == 0.0
    assert np.allclose(out.density.values, 2.0)


def test_flatten_delta_quadratic_in_radius(ico3):
    z = ico3.vertices[:, 2]
    rho = ConformalDensity(np.exp(z))
    pole = int(np.argmax(z))
    deltas = [flatten_density_near(ico3, rho, pole, r).delta
              for r in (0.15, 0.3, 0.6)]
    slopes = np.diff(np.log(deltas)) / math.log(2)
    assert np.all(np.abs(slopes - 2.0) < 0.35)


def test_flatten_width_controls_reach(ico3):
    # delta is the pointwise metric ratio, so the wide blend reaches
    # farther into the varying density and distorts more; the sharp
    # limit is pinned by the plateau edge
    z = ico3.vertices[:, 2]
    rho = ConformalDensity(np.exp(z))
    pole = int(np.argmax(z))
    wide = flatten_density_near(ico3, rho, pole, 0.3, width=0.3).delta
    sharp = flatten_density_near(ico3, rho, pole, 0.3, width=0.02).delta
    assert sharp < wide
    anchor_edge = math.expm1(0.3 ** 2 / 2)
    assert sharp > 0.5 * anchor_edge


def test_flatten_guard(ico2):
    rho = ConformalDensity.uniform(ico2)
    with pytest.raises(SurgeryError):
        flatten_density_near(ico2, rho, 0, 5.0)


def test_flatten_result_is_flat_inside(ico3):
    rng = np.random.default_rng(0)
    rho = ConformalDensity(np.exp(rng.normal(0, 0.2, ico3.num_vertices)))
    out = flatten_density_near(ico3, rho, 7, 0.25)
    d = ico3.geodesic_distances(7)
    inner = out.density.values[d <= 0.25]
    assert np.ptp(inner) < 1e-12


# -- gluing ---------------------------------------------------------------------

def test_glue_two_spheres_genus(ico2):
    glued = glue_surfaces(GlueSpec(ico2, ico2, 0, 0, 0.15))
    assert glued.mesh.genus == 0
    labels = set(glued.mesh.component_labels)
    assert labels == {"host", "guest", "neck"}


def test_glue_sphere_torus_genus(ico2, torus16):
    glued = glue_surfaces(GlueSpec(ico2, torus16, 0, 0, 0.1))
    assert glued.mesh.genus == 1


def test_glue_mass_budget(ico3):
    half = ConformalDensity.uniform(ico3, 0.5 / ico3.total_area())
    glued = glue_surfaces(GlueSpec(ico3, ico3, 0, 0, 0.05), half, half)
    from spectralab import assemble_mass
    mass = assemble_mass(glued.mesh, glued.density).total
    assert rel_err(mass, 1.0) < 0.01


def test_glue_guard_rejects_big_neck(ico2):
    fs = 2 * max_disk_radius(ico2, 0)
    with pytest.raises(SurgeryError):
        glue_surfaces(GlueSpec(ico2, ico2, 0, 0, 0.5 * fs))


def test_glue_preserves_away_geometry(ico3, torus16):
    glued = glue_surfaces(GlueSpec(ico3, torus16, 0, 0, 0.1))
    labels = glued.mesh.component_labels
    # faces kept from the host carry their exact intrinsic lengths, so
    # their areas reappear verbatim; only the cap and its patch differ
    host_faces = np.all(labels[glued.mesh.faces] == "host", axis=1)
    areas = glued.mesh.face_areas[host_faces]
    orig = np.sort(ico3.face_areas)
    idx = np.clip(np.searchsorted(orig, areas), 0, len(orig) - 1)
    near = np.minimum(np.abs(orig[idx] - areas),
                      np.abs(orig[np.maximum(idx - 1, 0)] - areas))
    matched = (near <= 1e-9 * areas).sum()
    assert matched >= 0.9 * ico3.num_faces


def test_glue_round_trip_files(tmp_path, ico2):
    glued = glue_surfaces(GlueSpec(ico2, ico2, 0, 0, 0.15))
    path = str(tmp_path / "glued.off")
    save_mesh(glued.mesh, path, density=glued.density.values,
              extra={"spec": glued.spec})
    back, side = load_mesh(path, with_sidecar=True)
    assert back.genus == 0
    assert side["genus"] == 0
    assert "spec" in side
    assert np.allclose(back.edge_lengths, glued.mesh.edge_lengths)


def test_glue_spectrum_two_spheres_converges(ico3):
    half = ConformalDensity.uniform(ico3, 0.5 / ico3.total_area())
    errs = []
    for eps in (0.3, 0.15, 0.075):
        glued = glue_surfaces(GlueSpec(ico3, ico3, 0, 0, eps), half, half)
        rep = spectrum_of(glued.mesh, glued.density, count=2)
        errs.append(rel_err(rep.normalized[2], 16 * math.pi))
    assert errs[2] < errs[0]
    assert errs[2] < 0.05


# -- collapse -------------------------------------------------------------------

def test_collapse_identity(ico2):
    glued = glue_surfaces(GlueSpec(ico2, ico2, 0, 0, 0.15))
    out = collapse_component(glued, "guest", 1.0)
    assert np.allclose(out.values, glued.density.values)


def test_collapse_scales_guest_mass_exactly(ico2):
    glued = glue_surfaces(GlueSpec(ico2, ico2, 0, 0, 0.15))
    labels = glued.mesh.component_labels
    areas = glued.mesh.vertex_areas
    eps = 0.2
    out = collapse_component(glued, "guest", eps)
    guest = labels == "guest"
    before = float((areas * glued.density.values)[guest].sum())
    after = float((areas * out.values)[guest].sum())
    assert math.isclose(after, eps ** 2 * before, rel_tol=1e-12)


def test_collapse_requires_labels(ico2):
    with pytest.raises(SurgeryError):
        collapse_component(ico2, "guest", 0.5)
    glued = glue_surfaces(GlueSpec(ico2, ico2, 0, 0, 0.15))
    with pytest.raises(SurgeryError):
        collapse_component(glued, "nonsense", 0.5)


def test_collapse_sweep_returns_host(ico3):
    half = ConformalDensity.uniform(ico3, 0.5 / ico3.total_area())
    host_alone = spectrum_of(ico3, half, count=3)
    glued = glue_surfaces(GlueSpec(ico3, ico3, 0, 0, 0.1), half, half)
    errs = []
    for eps in (0.1, 0.03):
        rho = collapse_component(glued, "guest", eps)
        rep = spectrum_of(glued.mesh, rho, count=3)
        errs.append(rel_err(rep.eigenvalues[1], host_alone.eigenvalues[1]))
    assert errs[0] < 0.10
    assert errs[1] < 0.03


# -- handles --------------------------------------------------------------------

def test_handle_on_sphere_genus(ico2):
    far = int(np.argmax(ico2.geodesic_distances(0)))
    out = attach_handle(ico2, 0, far, 0.12, 0.5)
    assert out.mesh.genus == 1
    assert "neck" in set(out.mesh.component_labels)


def test_handle_on_torus_genus(torus16):
    far = int(np.argmax(torus16.geodesic_distances(0)))
    out = attach_handle(torus16, 0, far, 0.06, 0.5)
    assert out.mesh.genus == 2


def test_handle_area_converges_to_input(torus24):
    far = int(np.argmax(torus24.geodesic_distances(0)))
    base = torus24.total_area()
    gaps = []
    for eps in (0.1, 0.05, 0.025):
        out = attach_handle(torus24, 0, far, eps, 0.5)
        gaps.append(abs(out.mesh.total_area() - base))
        # tube area stays within the lateral area plus cap corrections
        assert gaps[-1] < 2 * math.pi * eps * 0.5 + 12 * eps ** 2
    assert gaps[2] < gaps[0]


def test_handle_rejects_overlapping_caps(ico2):
    with pytest.raises(SurgeryError):
        attach_handle(ico2, 0, 1, 0.15, 0.5)


def test_handle_aspect_guard(torus16):
    far = int(np.argmax(torus16.geodesic_distances(0)))
    with pytest.raises(IllConditionedInputError):
        attach_handle(torus16, 0, far, 0.05, 1e4)


def test_surgery_outputs_validate(ico2, torus16):
    # constructors run full validation; reaching here is the assertion
    glued = glue_surfaces(GlueSpec(ico2, torus16, 0, 0, 0.1))
    far = int(np.argmax(torus16.geodesic_distances(0)))
    handled = attach_handle(torus16, 0, far, 0.06, 0.4)
    for m in (glued.mesh, handled.mesh):
        assert m.num_vertices - m.num_edges + m.num_faces == 2 - 2 * m.genus


def test_max_disk_radius_sphere(ico2):
    # on a sphere every metric ball short of the antipode is a disk,
    # so the measured radius sits near the graph diameter
    r = max_disk_radius(ico2, 0)
    assert 0.9 * math.pi < r < 1.15 * math.pi


def test_max_disk_radius_torus(torus16):
    # a ball wider than half the fundamental domain wraps around and
    # stops being a disk; the feature size keeps necks away from that
    r = max_disk_radius(torus16, 0)
    assert 0.4 < r < 0.65


# -- the sphere+torus sweep -----------------------------------------------------

@pytest.fixture(scope="module")
def sphere_torus_sweep(ico4, torus32):
    half = ConformalDensity.uniform(ico4, 0.5 / ico4.total_area())
    host_alone = spectrum_of(ico4, half, count=7)
    guest_alone = spectrum_of(torus32, None, count=7)
    union = union_spectrum_oracle(host_alone, guest_alone, 6)
    errs = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        glued = glue_surfaces(GlueSpec(ico4, torus32, 0, 0, eps,
                                       cap_radius=0.4), half, None)
        rep = spectrum_of(glued.mesh, glued.density, count=6)
        errs.append(spectra_rel_errors(rep.eigenvalues[:7], union).max())
    return errs


def test_sphere_torus_error_decreases(sphere_torus_sweep):
    errs = sphere_torus_sweep
    assert all(b < a for a, b in zip(errs, errs[1:]))


@pytest.mark.xfail(
    strict=True,
    reason="the host mode pinned by the heavy guest unwinds only "
           "logarithmically in the neck radius; reaching 5% needs "
           "eps around 1e-7, far below mesh resolution")
def test_sphere_torus_error_final_tolerance(sphere_torus_sweep):
    assert sphere_torus_sweep[-1] < 0.05

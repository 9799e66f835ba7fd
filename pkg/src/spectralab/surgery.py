"""Cut-and-paste operations on surfaces: disk gluing, component
collapse, and thin-handle attachment, plus their closed-form limit
oracles.

The common engine removes a geodesic ball, unfolds the removed region
isometrically into the plane (exactly for flat metrics, with recorded
distortion O(r^2) for curved ones), and rebuilds the hole as graded
concentric 16-gon rings down to the requested neck radius.  Two such
prepared boundaries are then either identified vertex-by-vertex (glue)
or bridged by a flat triangulated cylinder (handle).  All new edge
lengths come from the plane or the cylinder development, so the
surgery region is genuinely flat in the intrinsic metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedInputError, SurgeryError
from .mesh import TriangleMesh
from .spectral import ConformalDensity

STITCH = 16
RING_GRADE = 2.0          # max radius ratio between consecutive rings
FEATURE_GUARD = 0.2       # epsilon <= guard * feature size
ASPECT_RANGE = (1e-3, 10.0)   # allowed epsilon / length for handles


# -- closed-form pieces ------------------------------------------------------


def stereographic_factor(x):
    """Conformal factor 4 / (1 + |x|^2)^2 of the plane model of the
    round sphere; `x` is a 2-vector or an (..., 2) array."""
    x = np.asarray(x, dtype=float)
    nsq = np.sum(x * x, axis=-1)
    return 4.0 / (1.0 + nsq) ** 2


def epsilon_of_R(R):
    """Radius 2R/(1+R^2) of the Euclidean ball isometric to the outer
    branch of the spherical cap profile."""
    if R <= 0:
        raise IllConditionedInputError("cap parameter must be positive")
    return 2.0 * R / (1.0 + R * R)


@dataclass(frozen=True)
class CapSpec:
    """Spherical cap profile: round inside radius R, inverted-round
    outside, so the outside is flat up to scale."""

    R: float
    rho_target: float | None = None   # prescribed flat-ball radius

    def __post_init__(self):
        if self.R <= 0:
            raise IllConditionedInputError("cap parameter must be positive")
        if self.rho_target is not None and self.rho_target <= 0:
            raise IllConditionedInputError("target radius must be positive")

    @property
    def epsilon(self):
        return epsilon_of_R(self.R)


def cap_metric_factor(x, spec):
    """Two-branch conformal factor of the cap profile.

    Inside |x| <= R the round factor applies; outside, the inversion
    4 R^4 / ((1+R^2)^2 |x|^4), which is the pullback of a Euclidean
    ball of radius epsilon(R) = 2R/(1+R^2).  Continuous at |x| = R.
    When `rho_target` is set, the profile is rescaled so the flat
    region appears at that radius with factor epsilon(R)^2 / rho^2.
    """
    if not isinstance(spec, CapSpec):
        spec = CapSpec(float(spec))
    x = np.asarray(x, dtype=float)
    scale = 1.0
    if spec.rho_target is not None:
        scale = spec.rho_target / spec.R
        x = x / scale
    nsq = np.sum(x * x, axis=-1)
    R2 = spec.R * spec.R
    inner = 4.0 / (1.0 + nsq) ** 2
    with np.errstate(divide="ignore"):
        outer = 4.0 * R2 * R2 / ((1.0 + R2) ** 2 * nsq * nsq)
    return np.where(nsq <= R2, inner, outer) / (scale * scale)


def dirichlet_segment_spectrum(length, count):
    """Dirichlet eigenvalues (m pi / length)^2, m = 1..count, of the
    segment [0, length]."""
    if length <= 0:
        raise IllConditionedInputError("segment length must be positive")
    m = np.arange(1, count + 1, dtype=float)
    return (m * np.pi / length) ** 2


def _eigs(report):
    if report is None:
        return np.empty(0)
    return np.asarray(getattr(report, "eigenvalues", report), dtype=float)


def union_spectrum_oracle(report1, report2, count):
    """Reordered union of two spectra, truncated to count+1 values.

    This is the limit of the glued-surface spectrum as the neck
    shrinks; note index 1 of the union of two closed surfaces is the
    second zero mode.
    """
    merged = np.sort(np.concatenate([_eigs(report1), _eigs(report2)]))
    if len(merged) < count + 1:
        raise IllConditionedInputError(
            f"need {count + 1} values, inputs provide {len(merged)}")
    return merged[:count + 1]


# -- density flattening ------------------------------------------------------


@dataclass
class FlattenResult:
    density: ConformalDensity
    delta: float                  # max ratio distortion, (1+delta) bound


def flatten_density_near(mesh, density, vertex, radius, width=None):
    """Make the density constant on a ball and blend back smoothly.

    Inside `radius` the density becomes its value at the center
    vertex; beyond radius + width it is untouched; in between a
    smoothstep in geodesic distance interpolates.  The reported delta
    is the largest pointwise ratio change, so old and new densities
    are (1+delta)-quasi-conformal rescalings of each other.
    """
    if not isinstance(density, ConformalDensity):
        density = ConformalDensity(density)
    if width is None:
        width = 0.5 * radius
    if radius <= 0 or width <= 0:
        raise IllConditionedInputError("radius and width must be positive")
    d = mesh.geodesic_distances(vertex)
    finite = d[np.isfinite(d)]
    if radius + width > 0.9 * finite.max():
        raise SurgeryError(
            f"flattening ball of radius {radius + width:.3g} is not well "
            f"inside the mesh (diameter scale {finite.max():.3g})")

    anchor = density.values[vertex]
    t = np.clip((d - radius) / width, 0.0, 1.0)
    s = t * t * (3.0 - 2.0 * t)
    values = (1.0 - s) * anchor + s * density.values
    ratio = values / density.values
    delta = float(np.max(np.maximum(ratio, 1.0 / ratio)) - 1.0)
    return FlattenResult(ConformalDensity(values), delta)


# -- chart unfolding ---------------------------------------------------------


@dataclass
class _Chart:
    center: int
    r_cut: float
    pos: dict                     # vertex -> (x, y), removed region + rim
    rim: list                     # rim vertex ids in cycle order (CCW)
    rim_theta: np.ndarray         # unwrapped angles along the cycle
    rim_radius: np.ndarray
    removed_faces: np.ndarray     # face indices removed
    interior: set                 # removed-region vertices except the rim
    delta: float                  # max edge-length distortion of the chart


def _ball_region(mesh, center, radius):
    """Removed faces, rim cycle, and diagnostics for a candidate ball.

    Returns (removed_face_ids, rim_cycle, reason); rim_cycle is None
    with a reason string when the removed region is not a disk with a
    simple boundary.
    """
    d = mesh.geodesic_distances(center, limit=radius * (1 + 1e-9) + 1e-300)
    inside = d <= radius * (1 + 1e-9)
    fverts = mesh.faces
    removed = np.flatnonzero(inside[fverts].all(axis=1))
    if len(removed) == 0:
        return removed, None, "ball smaller than one face"
    if len(removed) == len(fverts):
        return removed, None, "ball swallows the whole mesh"

    # boundary edges: edges of removed faces used by exactly one of them
    halfedges = {}
    for f in removed:
        i, j, k = fverts[f]
        for a, b in ((i, j), (j, k), (k, i)):
            halfedges[(a, b)] = halfedges.get((a, b), 0) + 1
    boundary = [(a, b) for (a, b), c in halfedges.items()
                if (b, a) not in halfedges]
    if not boundary:
        return removed, None, "removed region has no boundary"

    nxt = {}
    for a, b in boundary:
        if a in nxt:
            return removed, None, f"boundary pinches at vertex {a}"
        nxt[a] = b
    start = min(nxt)
    cycle = [start]
    v = nxt[start]
    while v != start:
        cycle.append(v)
        if v not in nxt or len(cycle) > len(boundary):
            return removed, None, "boundary is not a single cycle"
        v = nxt[v]
    if len(cycle) != len(boundary):
        return removed, None, "boundary has several cycles"

    # Euler characteristic of the removed complex must be a disk's
    verts = set(fverts[removed].ravel().tolist())
    edges = set()
    for a, b in halfedges:
        edges.add((a, b) if a < b else (b, a))
    chi = len(verts) - len(edges) + len(removed)
    if chi != 1:
        return removed, None, f"removed region has Euler number {chi}"
    return removed, cycle, None


def _snap_radius(mesh, center, radius):
    """Find a nearby radius whose ball is a clean disk."""
    for factor in (1.0, 0.92, 1.08, 0.85, 1.16, 0.78, 1.25):
        r = radius * factor
        removed, cycle, reason = _ball_region(mesh, center, r)
        if cycle is not None:
            return r, removed, cycle
    raise SurgeryError(
        f"no clean cut found near radius {radius:.4g} at vertex {center}: "
        f"{reason}")


def max_disk_radius(mesh, center):
    """Largest tested radius at which the ball around `center` still
    cuts out a disk; 2x this is used as the local feature size."""
    d = mesh.geodesic_distances(center)
    hi = d[np.isfinite(d)].max()
    lo = 2.5 * mesh.mean_edge_length()
    if _ball_region(mesh, center, lo)[1] is None:
        lo_ok = None
        for f in np.linspace(1.0, 3.0, 9):
            if _ball_region(mesh, center, lo * f)[1] is not None:
                lo_ok = lo * f
                break
        if lo_ok is None:
            raise SurgeryError(f"mesh too coarse around vertex {center}")
        lo = lo_ok
    best = lo
    for _ in range(18):
        mid = 0.5 * (lo + hi)
        if _ball_region(mesh, center, mid)[1] is not None:
            best = mid
            lo = mid
        else:
            hi = mid
    return best


def _unfold_chart(mesh, center, r_cut):
    """Isometric planar development of the removed ball.

    Faces are laid out by breadth-first rigid unfolding from a seed
    face at the center; every placement preserves the two known edge
    lengths exactly, so the only distortion is holonomy: edges reached
    along two different face paths may disagree.  The largest such
    relative disagreement is recorded as delta (zero on flat meshes).
    """
    r_cut, removed, cycle = _snap_radius(mesh, center, r_cut)
    fverts = mesh.faces

    # face adjacency within the removed region
    by_edge = {}
    for f in removed:
        i, j, k = fverts[f]
        for a, b in ((i, j), (j, k), (k, i)):
            by_edge.setdefault((min(a, b), max(a, b)), []).append(f)

    seed = None
    for f in removed:
        if center in fverts[f]:
            seed = f
            break
    if seed is None:
        raise SurgeryError(f"vertex {center} has no removed face; "
                           f"radius {r_cut:.3g} too small")

    pos = {}
    i, j, k = fverts[seed]
    order = [i, j, k]
    while order[0] != center:
        order = order[1:] + order[:1]
    c, u, w = order
    lcu = mesh.edge_length(c, u)
    lcw = mesh.edge_length(c, w)
    luw = mesh.edge_length(u, w)
    pos[c] = np.zeros(2)
    pos[u] = np.array([lcu, 0.0])
    # w above the x-axis keeps (c, u, w) counterclockwise
    cosw = (lcu * lcu + lcw * lcw - luw * luw) / (2 * lcu * lcw)
    cosw = min(1.0, max(-1.0, cosw))
    sinw = math.sqrt(max(0.0, 1.0 - cosw * cosw))
    pos[w] = np.array([lcw * cosw, lcw * sinw])

    placed = {seed}
    queue = [seed]
    delta = 0.0
    while queue:
        nextq = []
        for f in queue:
            i, j, k = fverts[f]
            for a, b in ((i, j), (j, k), (k, i)):
                key = (min(a, b), max(a, b))
                for g in by_edge.get(key, ()):
                    if g in placed:
                        continue
                    tri = fverts[g]
                    known = [v for v in tri if v in pos]
                    if len(known) < 2:
                        continue
                    placed.add(g)
                    nextq.append(g)
                    if len(known) == 3:
                        continue
                    x = [v for v in tri if v not in pos][0]
                    # directed edge of g preceding x gives orientation
                    t = list(tri)
                    xi = t.index(x)
                    p, q = t[(xi + 1) % 3], t[(xi + 2) % 3]
                    pos[x] = _third_point(pos[p], pos[q],
                                          mesh.edge_length(p, x),
                                          mesh.edge_length(q, x))
        queue = nextq

    missing = [v for f in removed for v in fverts[f] if v not in pos]
    if missing:
        raise SurgeryError(
            f"unfolding left vertex {missing[0]} unplaced; removed "
            f"region too irregular at radius {r_cut:.3g}")

    # holonomy distortion over all removed-region edges
    for (a, b) in by_edge:
        chart = np.linalg.norm(pos[a] - pos[b])
        true = mesh.edge_length(a, b)
        delta = max(delta, abs(chart / true - 1.0))

    theta = np.array([math.atan2(*pos[v][::-1]) for v in cycle])
    radius = np.array([np.linalg.norm(pos[v]) for v in cycle])
    dtheta = np.diff(theta)
    dtheta = (dtheta + np.pi) % (2 * np.pi) - np.pi
    unwrapped = np.concatenate([[theta[0]], theta[0] + np.cumsum(dtheta)])
    turn = unwrapped[-1] + ((theta[0] - unwrapped[-1] + np.pi)
                            % (2 * np.pi) - np.pi) - theta[0]
    if abs(abs(turn) - 2 * np.pi) > 1e-6:
        raise SurgeryError(
            f"rim winding {turn / (2 * np.pi):.3f} turns; chart folded")
    if turn < 0:
        cycle = cycle[::-1]
        unwrapped = unwrapped[::-1]
        radius = radius[::-1]

    rim = set(cycle)
    interior = {v for f in removed for v in fverts[f]} - rim
    return _Chart(center=center, r_cut=r_cut, pos=pos, rim=list(cycle),
                  rim_theta=unwrapped, rim_radius=radius,
                  removed_faces=removed, interior=interior, delta=delta)


def _third_point(p, q, lp, lq):
    """Intersection of circles around p and q on the left of p->q."""
    d = q - p
    dn = np.linalg.norm(d)
    a = (lp * lp - lq * lq + dn * dn) / (2 * dn)
    hsq = lp * lp - a * a
    h = math.sqrt(max(0.0, hsq))
    perp = np.array([-d[1], d[0]]) / dn
    return p + (a / dn) * d + h * perp


# -- ring patches and stitching ---------------------------------------------


class _Builder:
    """Accumulates vertices, faces, lengths, labels for a new mesh."""

    def __init__(self):
        self.verts = []
        self.faces = []
        self.lengths = {}
        self.labels = []
        self.density = []

    def add_vertex(self, xyz, label, rho):
        self.verts.append(np.asarray(xyz, dtype=float))
        self.labels.append(label)
        self.density.append(rho)
        return len(self.verts) - 1

    def add_face(self, a, b, c):
        self.faces.append((a, b, c))

    def set_length(self, a, b, l):
        key = (a, b) if a < b else (b, a)
        old = self.lengths.get(key)
        if old is not None and abs(old - l) > 1e-9 * max(old, l):
            raise SurgeryError(
                f"edge ({key[0]}, {key[1]}) assigned lengths {old:.6g} "
                f"and {l:.6g}")
        self.lengths[key] = l

    def build(self):
        return TriangleMesh(np.array(self.verts), np.array(self.faces),
                            edge_lengths=self.lengths,
                            component_labels=np.array(self.labels,
                                                      dtype="U16"))


def _frame(mesh, center):
    """Tangent frame at a vertex from embedded face normals."""
    n = np.zeros(3)
    for f in np.flatnonzero((mesh.faces == center).any(axis=1)):
        p = mesh.vertices[mesh.faces[f]]
        n += np.cross(p[1] - p[0], p[2] - p[0])
    nn = np.linalg.norm(n)
    n = n / nn if nn > 0 else np.array([0.0, 0.0, 1.0])
    t1 = np.cross(n, [1.0, 0.0, 0.0])
    if np.linalg.norm(t1) < 1e-6:
        t1 = np.cross(n, [0.0, 1.0, 0.0])
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1), n


def _ring_radii(chart, epsilon):
    rmin = chart.rim_radius.min()
    if epsilon >= rmin:
        raise SurgeryError(
            f"neck radius {epsilon:.3g} does not fit inside the cut "
            f"(inner rim radius {rmin:.3g})")
    r0 = 0.85 * rmin
    if r0 <= epsilon * 1.05:
        return np.array([epsilon])
    j = max(1, math.ceil(math.log(r0 / epsilon) / math.log(RING_GRADE)))
    return np.geomspace(r0, epsilon, j + 1)


def _build_patch(builder, mesh, chart, epsilon, stitch, label, rho_patch,
                 old2new, rho_at=None):
    """Fill the hole left by a chart with graded 16-gon rings.

    Returns (ring ids of the innermost circle at radius epsilon, ring
    count).  `rho_at(t)` optionally grades the density by ring index
    (t = 0 at the innermost ring); default is constant `rho_patch`.
    New faces are oriented to match the chart (counterclockwise).
    """
    radii = _ring_radii(chart, epsilon)
    t1, t2, _ = _frame(mesh, chart.center)
    origin = mesh.vertices[chart.center]

    rings = []
    for t, r in enumerate(radii):
        ids = []
        depth = len(radii) - 1 - t     # 0 at the innermost ring
        rho = rho_patch if rho_at is None else rho_at(depth)
        for s in range(stitch):
            ang = 2 * np.pi * s / stitch
            xy = np.array([r * math.cos(ang), r * math.sin(ang)])
            xyz = origin + xy[0] * t1 + xy[1] * t2
            lab = label if depth > 0 else "neck"
            ids.append(builder.add_vertex(xyz, lab, rho))
        rings.append((ids, r))

    for (ids, r) in rings:
        chord = 2 * r * math.sin(math.pi / stitch)
        for s in range(stitch):
            builder.set_length(ids[s], ids[(s + 1) % stitch], chord)

    # quad strips between consecutive rings
    for (outer, ro), (inner, ri) in zip(rings, rings[1:]):
        for s in range(stitch):
            a, b = outer[s], outer[(s + 1) % stitch]
            c, d = inner[s], inner[(s + 1) % stitch]
            builder.add_face(a, b, d)
            builder.add_face(a, d, c)
        gap = _ring_gap(ro, ri, stitch)
        for s in range(stitch):
            builder.set_length(outer[s], inner[s], ro - ri)
            builder.set_length(outer[s], inner[(s + 1) % stitch], gap)

    _zip_rim_to_ring(builder, mesh, chart, rings[0][0], rings[0][1],
                     stitch, old2new)
    return rings[-1][0], len(radii)


def _ring_gap(ro, ri, stitch):
    """Diagonal of the trapezoid between aligned rings."""
    a0 = 2 * np.pi / stitch
    p = np.array([ro * math.cos(a0), ro * math.sin(a0)])
    q = np.array([ri, 0.0])
    return float(np.linalg.norm(p - q))


def _zip_rim_to_ring(builder, mesh, chart, ring_ids, ring_r, stitch,
                     old2new):
    """Triangulate the annulus between the ragged rim and the first
    ring by an angular two-pointer merge.

    Rim angles are taken from the chart, made non-decreasing along the
    cycle (tiny backtracks of a jagged rim are flattened), and both
    loops are traversed once; each step advances the loop whose next
    vertex comes first in angle.
    """
    rim = chart.rim
    theta = np.maximum.accumulate(chart.rim_theta)
    start = int(np.argmin(theta % (2 * np.pi)))
    rim = rim[start:] + rim[:start]
    theta = np.concatenate([theta[start:], theta[:start] + 2 * np.pi])
    theta -= 2 * np.pi * math.floor(theta[0] / (2 * np.pi))

    ring_theta = 2 * np.pi * np.arange(stitch) / stitch
    shift = np.searchsorted(ring_theta, theta[0] % (2 * np.pi))
    order = [(s + shift) % stitch for s in range(stitch)]
    rtheta = np.array([ring_theta[s] for s in order])
    rtheta += 2 * np.pi * np.round((theta[0] - rtheta[0]) / (2 * np.pi))
    rtheta = np.maximum.accumulate(rtheta)

    na, nb = len(rim), stitch
    pa = np.append(theta, theta[0] + 2 * np.pi)
    pb = np.append(rtheta, rtheta[0] + 2 * np.pi)

    def rim_id(i):
        return old2new[rim[i % na]]

    def ring_id(j):
        return ring_ids[order[j % nb]]

    def rim_xy(i):
        return chart.pos[rim[i % na]]

    def ring_xy(j):
        ang = 2 * np.pi * order[j % nb] / stitch
        return np.array([ring_r * math.cos(ang), ring_r * math.sin(ang)])

    def quality(p, q, r):
        area = abs((q[0] - p[0]) * (r[1] - p[1])
                   - (q[1] - p[1]) * (r[0] - p[0]))
        longest = max(np.sum((q - p) ** 2), np.sum((r - p) ** 2),
                      np.sum((r - q) ** 2))
        return area / longest if longest > 0 else 0.0

    builder.set_length(rim_id(0), ring_id(0),
                       float(np.linalg.norm(rim_xy(0) - ring_xy(0))))
    i = j = 0
    while i < na or j < nb:
        adv_a = i < na and (j >= nb or pa[i + 1] <= pb[j + 1])
        # veto a degenerate triangle if the other advance is cleaner
        if i < na and j < nb:
            qa = quality(rim_xy(i), rim_xy(i + 1), ring_xy(j))
            qb = quality(ring_xy(j + 1), ring_xy(j), rim_xy(i))
            if adv_a and qa < 1e-6 < qb:
                adv_a = False
            elif not adv_a and qb < 1e-6 < qa:
                adv_a = True
        if adv_a:
            builder.add_face(rim_id(i), rim_id(i + 1), ring_id(j))
            builder.set_length(rim_id(i + 1), ring_id(j),
                               float(np.linalg.norm(rim_xy(i + 1)
                                                    - ring_xy(j))))
            i += 1
        else:
            builder.add_face(ring_id(j + 1), ring_id(j), rim_id(i))
            builder.set_length(rim_id(i), ring_id(j + 1),
                               float(np.linalg.norm(rim_xy(i)
                                                    - ring_xy(j + 1))))
            j += 1
    # closing diagonal already set by the last advance; rim edges
    # themselves are re-measured in the chart for consistency
    for t in range(na):
        a, b = rim[t], rim[(t + 1) % na]
        builder.set_length(old2new[a], old2new[b],
                           float(np.linalg.norm(chart.pos[a]
                                                - chart.pos[b])))


# -- glue --------------------------------------------------------------------


@dataclass
class GlueSpec:
    """Recipe for gluing two surfaces along a flat neck.

    The disks removed around the two centers are rebuilt down to
    radius `epsilon` and identified along their 16-gon boundaries by
    an orientation-reversing rotation, the discrete version of an
    isometry of round circles.
    """

    host: TriangleMesh
    guest: TriangleMesh
    host_center: int
    guest_center: int
    epsilon: float
    stitch: int = STITCH
    cap_radius: float | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise IllConditionedInputError("neck radius must be positive")
        if self.stitch < 8:
            raise IllConditionedInputError("stitch resolution below 8")


@dataclass
class GluedSurface:
    mesh: TriangleMesh
    density: ConformalDensity
    delta: float                 # worst metric distortion of the charts
    seam: list                   # vertex ids of the identified ring
    host_vertices: np.ndarray
    guest_vertices: np.ndarray
    spec: dict = field(default_factory=dict)


def _guard_epsilon(mesh, center, epsilon, what):
    # the 1e-3 slack absorbs the bisection residual of the feature
    # size, so a neck at exactly the guard radius is admitted
    fs = 2.0 * max_disk_radius(mesh, center)
    if epsilon > FEATURE_GUARD * fs * (1 + 1e-3):
        raise SurgeryError(
            f"{what}: neck radius {epsilon:.3g} exceeds the guard "
            f"{FEATURE_GUARD:g} x feature size {fs:.3g}")


def _cap_radius(mesh, epsilon, override):
    if override is not None:
        return override
    return max(2.0 * epsilon, 3.0 * mesh.mean_edge_length())


def _density_values(mesh, density):
    if density is None:
        return np.ones(mesh.num_vertices)
    if isinstance(density, ConformalDensity):
        return density.values
    return ConformalDensity(density).values


def _rim_pairs(chart):
    rim = chart.rim
    return {(min(a, b), max(a, b))
            for a, b in zip(rim, rim[1:] + rim[:1])}


def _copy_kept(builder, mesh, charts, label, rho):
    """Copy everything outside the removed regions into the builder.

    Rim-cycle edges are left to the stitching stage, which re-measures
    them in the chart so the patch region is exactly flat.
    """
    old2new = {}
    keep = np.ones(mesh.num_vertices, dtype=bool)
    for chart in charts:
        keep[list(chart.interior)] = False
    for v in np.flatnonzero(keep):
        old2new[v] = builder.add_vertex(mesh.vertices[v], label, rho[v])
    removed = set()
    rim_edges = set()
    for chart in charts:
        removed |= set(chart.removed_faces.tolist())
        rim_edges |= _rim_pairs(chart)
    kept_edges = set()
    for f in range(mesh.num_faces):
        if f in removed:
            continue
        a, b, c = mesh.faces[f]
        builder.add_face(old2new[a], old2new[b], old2new[c])
        for x, y in ((a, b), (b, c), (c, a)):
            kept_edges.add((min(x, y), max(x, y)))
    # rim edges are re-measured in the chart by the stitching; chords
    # of the rim (edges both of whose faces are removed) disappear
    for (a, b), l in zip(mesh.edges, mesh.edge_lengths):
        key = (int(a), int(b))
        if key in kept_edges and key not in rim_edges:
            builder.set_length(old2new[a], old2new[b], float(l))
    return old2new


def _blend(rho_far, rho_seam):
    """Density profile over ring depth: seam value at the boundary,
    the side's own value from two rings outward, linear between."""
    def rho_at(depth):
        w = min(depth, 2) / 2.0
        return rho_seam + (rho_far - rho_seam) * w
    return rho_at


def _copy_side(builder, mesh, chart, rho, label, epsilon, stitch,
               rho_far, rho_seam):
    """Copy one prepared side into the builder: kept vertices and
    faces, then the patch.  Returns (old->new map, seam ring ids)."""
    old2new = _copy_kept(builder, mesh, [chart], label, rho)
    seam, _ = _build_patch(builder, mesh, chart, epsilon, stitch,
                           label, rho_far, old2new,
                           rho_at=_blend(rho_far, rho_seam))
    return old2new, seam


def glue_surfaces(spec, host_density=None, guest_density=None):
    """Connected sum of two surfaces along a flat neck of radius
    epsilon; returns the glued mesh with a blended density.

    Both removed caps are unfolded to the plane (distortion recorded),
    rebuilt as graded rings down to the neck, and identified along the
    16-gon seam with reversed orientation so the global orientation
    extends.  Away from the neck the metric and densities of the
    inputs are untouched.  Genus adds.
    """
    host, guest = spec.host, spec.guest
    _guard_epsilon(host, spec.host_center, spec.epsilon, "host")
    _guard_epsilon(guest, spec.guest_center, spec.epsilon, "guest")

    rho_h = _density_values(host, host_density)
    rho_g = _density_values(guest, guest_density)

    chart_h = _unfold_chart(host, spec.host_center,
                            _cap_radius(host, spec.epsilon, spec.cap_radius))
    chart_g = _unfold_chart(guest, spec.guest_center,
                            _cap_radius(guest, spec.epsilon, spec.cap_radius))

    rho_h0 = float(rho_h[spec.host_center])
    rho_g0 = float(rho_g[spec.guest_center])

    builder = _Builder()
    _, seam_h = _copy_side(builder, host, chart_h, rho_h, "host",
                           spec.epsilon, spec.stitch, rho_h0,
                           0.5 * (rho_h0 + rho_g0))

    # guest copied into a separate builder to keep ids contiguous,
    # then merged with its seam ring identified with the host's
    gb = _Builder()
    _, seam_g = _copy_side(gb, guest, chart_g, rho_g, "guest",
                           spec.epsilon, spec.stitch, rho_g0,
                           0.5 * (rho_h0 + rho_g0))

    offset = len(builder.verts)
    remap = {}
    for j, sid in enumerate(seam_g):
        remap[sid] = seam_h[(-j) % spec.stitch]

    # cosmetic rigid motion so the two halves face each other
    t1h, t2h, nh = _frame(host, spec.host_center)
    t1g, t2g, ng = _frame(guest, spec.guest_center)
    shift = (host.vertices[spec.host_center]
             + (chart_h.r_cut + chart_g.r_cut) * nh)
    rot = _rotation_between(ng, -nh)
    pivot = guest.vertices[spec.guest_center]

    gid2final = {}
    for gid in range(len(gb.verts)):
        if gid in remap:
            gid2final[gid] = remap[gid]
            continue
        xyz = shift + rot @ (gb.verts[gid] - pivot)
        gid2final[gid] = builder.add_vertex(xyz, gb.labels[gid],
                                            gb.density[gid])
    for a, b, c in gb.faces:
        builder.add_face(gid2final[a], gid2final[b], gid2final[c])
    for (a, b), l in gb.lengths.items():
        builder.set_length(gid2final[a], gid2final[b], l)

    mesh = builder.build()
    labels = mesh.component_labels
    host_ids = np.flatnonzero(labels == "host")
    guest_ids = np.flatnonzero(labels == "guest")
    density = ConformalDensity(np.array(builder.density))
    return GluedSurface(
        mesh=mesh, density=density,
        delta=max(chart_h.delta, chart_g.delta),
        seam=seam_h, host_vertices=host_ids, guest_vertices=guest_ids,
        spec={"epsilon": spec.epsilon, "stitch": spec.stitch,
              "host_center": spec.host_center,
              "guest_center": spec.guest_center,
              "cap_radius_host": chart_h.r_cut,
              "cap_radius_guest": chart_g.r_cut},
    )


def _rotation_between(a, b):
    """Rotation matrix taking unit vector a to unit vector b."""
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    if c < -1 + 1e-12:
        # opposite vectors: rotate by pi around any orthogonal axis
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


# -- collapse ----------------------------------------------------------------


def collapse_component(glued, marker, epsilon):
    """Scale the density of one labeled component by epsilon^2.

    Component vertices scale exactly; the seam ring takes the
    geometric-mean factor epsilon so the log-density is linear across
    the two rings around the seam.  As epsilon shrinks, that
    component's spectral contribution escapes upward and the other
    component's spectrum remains.
    """
    if isinstance(glued, GluedSurface):
        mesh, density = glued.mesh, glued.density
    else:
        mesh, density = glued, None
    if mesh.component_labels is None:
        raise SurgeryError("mesh carries no component labels to collapse")
    if epsilon <= 0:
        raise IllConditionedInputError("collapse scale must be positive")
    values = _density_values(mesh, density).copy()
    labels = mesh.component_labels
    target = labels == marker
    if not target.any():
        raise SurgeryError(f"no vertices labeled '{marker}'")
    values[target] *= epsilon ** 2
    values[labels == "neck"] *= epsilon
    return ConformalDensity(values)


# -- handle ------------------------------------------------------------------


@dataclass
class HandleSurface:
    mesh: TriangleMesh
    density: ConformalDensity
    delta: float
    tube_vertices: np.ndarray
    spec: dict = field(default_factory=dict)


def attach_handle(mesh, vertex_a, vertex_b, epsilon, length,
                  density=None, stitch=STITCH, cap_radius=None):
    """Attach a thin flat cylinder of radius epsilon and length
    `length` between disks removed around two vertices, raising the
    genus by one.

    The tube is the development-exact polyhedral cylinder: 16
    circumferential chords by max(4, ceil(length/epsilon)) segments.
    Its two boundary circles are identified with the patch seams, one
    of them with reversed orientation so the surface stays oriented.
    The density on the tube interpolates linearly between the two cap
    values.
    """
    lo, hi = ASPECT_RANGE
    if not lo <= epsilon / length <= hi:
        raise IllConditionedInputError(
            f"aspect ratio {epsilon / length:.3g} outside [{lo:g}, {hi:g}]")
    _guard_epsilon(mesh, vertex_a, epsilon, "handle end a")
    _guard_epsilon(mesh, vertex_b, epsilon, "handle end b")

    rho = _density_values(mesh, density)
    r_cut = _cap_radius(mesh, epsilon, cap_radius)
    chart_a = _unfold_chart(mesh, vertex_a, r_cut)
    chart_b = _unfold_chart(mesh, vertex_b, r_cut)

    touched_a = chart_a.interior | set(chart_a.rim)
    touched_b = chart_b.interior | set(chart_b.rim)
    if touched_a & touched_b:
        raise SurgeryError(
            "handle caps overlap; pick vertices farther apart or a "
            "smaller cap radius")

    rho_a = float(rho[vertex_a])
    rho_b = float(rho[vertex_b])

    builder = _Builder()
    old2new = _copy_kept(builder, mesh, [chart_a, chart_b], "host", rho)
    ring_a, _ = _build_patch(builder, mesh, chart_a, epsilon, stitch,
                             "host", rho_a, old2new)
    ring_b, _ = _build_patch(builder, mesh, chart_b, epsilon, stitch,
                             "host", rho_b, old2new)

    segments = max(4, math.ceil(length / epsilon))
    chord = 2 * epsilon * math.sin(math.pi / stitch)
    dz = length / segments
    diag = math.hypot(chord, dz)

    pa = mesh.vertices[vertex_a]
    pb = mesh.vertices[vertex_b]
    axis = pb - pa
    axis = axis / (np.linalg.norm(axis) or 1.0)
    side = np.cross(axis, [1.0, 0.0, 0.0])
    if np.linalg.norm(side) < 1e-6:
        side = np.cross(axis, [0.0, 1.0, 0.0])
    side /= np.linalg.norm(side)
    up = np.cross(axis, side)

    # the tube consumes each seam circle opposite to its patch strip,
    # so one end keeps the ring order and the other reverses it
    tube_rows = [[ring_a[j] for j in range(stitch)]]
    first_tube = len(builder.verts)
    for t in range(1, segments):
        row = []
        z = t / segments
        rho_t = rho_a + (rho_b - rho_a) * z
        for j in range(stitch):
            ang = 2 * np.pi * j / stitch
            xyz = (pa + z * (pb - pa)
                   + epsilon * (math.cos(ang) * side + math.sin(ang) * up))
            row.append(builder.add_vertex(xyz, "neck", rho_t))
        tube_rows.append(row)
    tube_rows.append([ring_b[(-j) % stitch] for j in range(stitch)])

    for t in range(segments):
        r0, r1 = tube_rows[t], tube_rows[t + 1]
        for j in range(stitch):
            a0, b0 = r0[j], r0[(j + 1) % stitch]
            a1, b1 = r1[j], r1[(j + 1) % stitch]
            builder.add_face(a0, b0, b1)
            builder.add_face(a0, b1, a1)
            builder.set_length(a0, a1, dz)
            builder.set_length(b0, b1, dz)
            builder.set_length(a0, b1, diag)
            builder.set_length(a0, b0, chord)
            builder.set_length(a1, b1, chord)

    out = builder.build()
    tube_ids = np.arange(first_tube, first_tube + (segments - 1) * stitch)
    return HandleSurface(
        mesh=out,
        density=ConformalDensity(np.array(builder.density)),
        delta=max(chart_a.delta, chart_b.delta),
        tube_vertices=tube_ids,
        spec={"epsilon": epsilon, "length": length, "stitch": stitch,
              "vertex_a": vertex_a, "vertex_b": vertex_b,
              "segments": segments,
              "cap_radius_a": chart_a.r_cut,
              "cap_radius_b": chart_b.r_cut},
    )

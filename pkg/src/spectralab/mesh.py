"""Closed triangulated surfaces with intrinsic edge-length geometry.

A mesh here is a connected, oriented, closed triangle complex together
with one positive length per undirected edge.  All downstream geometry
(areas, Laplacians, geodesic balls) is computed from those lengths, so
the vertex positions are only a convenience: builders fill them in and
the gluing code uses them for charts, but two meshes with identical
connectivity and lengths are the same surface.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import (
    IllConditionedInputError,
    MeshValidationError,
    ResourceLimitError,
)

MAX_SUBDIVISIONS = 8
MAX_RESOLUTION = 512

# icosahedron with circumradius sqrt(phi^2 + 1)
_PHI = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=float,
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def triangle_area(a, b, c):
    """Stable Heron area from side lengths (arrays broadcast).

    Sides are sorted per triangle before Kahan's rearrangement, which
    keeps the formula accurate for needle-shaped triangles.
    """
    s = np.sort(np.stack(np.broadcast_arrays(a, b, c), axis=-1), axis=-1)
    x, y, z = s[..., 2], s[..., 1], s[..., 0]
    t = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z))
    return 0.25 * np.sqrt(np.maximum(t, 0.0))


class TriangleMesh:
    """Immutable closed triangle mesh with intrinsic edge lengths.

    Parameters
    ----------
    vertices : (V, 3) float array
        Embedded positions.  Used for charts and file output.
    faces : (F, 3) int array
        Vertex indices, consistently oriented.
    edge_lengths : dict[(int, int), float], optional
        Intrinsic length per undirected edge, keyed by sorted index
        pair.  When omitted, Euclidean distances between the vertex
        positions are used.
    component_labels : sequence of str, optional
        One label per vertex (surgery marks 'host' / 'guest' / 'neck').
    """

    def __init__(self, vertices, faces, edge_lengths=None,
                 component_labels=None, validate=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshValidationError("vertices must be an (V, 3) array")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise MeshValidationError("faces must be an (F, 3) array; "
                                      "only triangles are supported")

        nv = len(self.vertices)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= nv):
            bad = np.nonzero((self.faces < 0) | (self.faces >= nv))[0][0]
            raise MeshValidationError(
                f"face {bad} references a vertex outside 0..{nv - 1}")

        self._build_edges(edge_lengths)
        self._build_derived()

        if component_labels is not None:
            labels = np.asarray(component_labels, dtype="U16")
            if labels.shape != (nv,):
                raise MeshValidationError(
                    "component_labels must give one label per vertex")
            self.component_labels = labels
        else:
            self.component_labels = None

        if validate:
            self._validate()

        for arr in (self.vertices, self.faces, self.edges,
                    self.edge_lengths, self.face_edge_lengths,
                    self.face_areas, self.vertex_areas):
            arr.setflags(write=False)

    # -- construction helpers -------------------------------------------

    def _build_edges(self, edge_lengths):
        f = self.faces
        pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        und = np.sort(pairs, axis=1)
        self.edges, inv, counts = np.unique(
            und, axis=0, return_inverse=True, return_counts=True)
        self._edge_counts = counts
        self._face_edge_index = inv.reshape(3, -1).T  # face row -> 3 edge ids
        self._directed = pairs

        key = self.edges[:, 0].astype(np.int64) * len(self.vertices) \
            + self.edges[:, 1]
        self._edge_key = key

        if edge_lengths is None:
            d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
            self.edge_lengths = np.linalg.norm(d, axis=1)
        else:
            lengths = np.empty(len(self.edges))
            lengths.fill(np.nan)
            for (i, j), l in edge_lengths.items():
                a, b = (i, j) if i < j else (j, i)
                k = np.searchsorted(key, a * len(self.vertices) + b)
                if k >= len(key) or key[k] != a * len(self.vertices) + b:
                    raise MeshValidationError(
                        f"edge ({i}, {j}) has a length but is not in the mesh")
                lengths[k] = l
            if np.isnan(lengths).any():
                e = self.edges[np.nonzero(np.isnan(lengths))[0][0]]
                raise MeshValidationError(
                    f"edge ({e[0]}, {e[1]}) is missing a length")
            self.edge_lengths = lengths

    def _build_derived(self):
        # per-face corner-opposite lengths: corner m of face (i,j,k) sees
        # the edge joining the other two vertices
        fi = self._face_edge_index
        fl = self.edge_lengths[fi]
        # fi columns are edges (v0,v1), (v1,v2), (v2,v0); corner 0 is
        # opposite edge (v1,v2) etc.
        self.face_edge_lengths = fl[:, [1, 2, 0]]
        self.face_areas = triangle_area(self.face_edge_lengths[:, 0],
                                        self.face_edge_lengths[:, 1],
                                        self.face_edge_lengths[:, 2])
        va = np.zeros(len(self.vertices))
        np.add.at(va, self.faces.ravel(),
                  np.repeat(self.face_areas / 3.0, 3))
        self.vertex_areas = va

        e = self.edges
        self._adjacency = sp.csr_matrix(
            (np.concatenate([self.edge_lengths, self.edge_lengths]),
             (np.concatenate([e[:, 0], e[:, 1]]),
              np.concatenate([e[:, 1], e[:, 0]]))),
            shape=(len(self.vertices),) * 2)

    def _validate(self):
        f = self.faces
        degen = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
        if degen.any():
            raise MeshValidationError(
                f"face {np.nonzero(degen)[0][0]} repeats a vertex")

        bad = np.nonzero(self._edge_counts != 2)[0]
        if len(bad):
            i, j = self.edges[bad[0]]
            n = self._edge_counts[bad[0]]
            raise MeshValidationError(
                f"edge ({i}, {j}) belongs to {n} faces; a closed surface "
                f"needs exactly 2")

        # orientation: every directed edge must occur exactly once
        nv = len(self.vertices)
        dkey = self._directed[:, 0].astype(np.int64) * nv + self._directed[:, 1]
        uniq, cnt = np.unique(dkey, return_counts=True)
        if (cnt > 1).any():
            k = uniq[np.nonzero(cnt > 1)[0][0]]
            raise MeshValidationError(
                f"faces disagree on orientation across edge "
                f"({k // nv}, {k % nv})")

        ncomp, _ = connected_components(self._adjacency, directed=False)
        if ncomp != 1:
            raise MeshValidationError(
                f"mesh has {ncomp} connected components; expected 1")

        if (self.edge_lengths <= 0).any():
            i, j = self.edges[np.nonzero(self.edge_lengths <= 0)[0][0]]
            raise MeshValidationError(f"edge ({i}, {j}) has non-positive length")

        zero = np.nonzero(self.face_areas <= 0)[0]
        if len(zero):
            raise MeshValidationError(
                f"face {zero[0]} has non-positive area (degenerate side "
                f"lengths {self.face_edge_lengths[zero[0]]})")

        if self.euler_characteristic % 2 != 0 or self.genus < 0:
            raise MeshValidationError(
                f"Euler characteristic {self.euler_characteristic} is not "
                f"that of a closed orientable surface")

    # -- basic quantities ------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_faces(self):
        return len(self.faces)

    @property
    def euler_characteristic(self):
        return self.num_vertices - self.num_edges + self.num_faces

    @property
    def genus(self):
        return (2 - self.euler_characteristic) // 2

    def total_area(self):
        return float(self.face_areas.sum())

    def edge_index(self, i, j):
        """Row of (i, j) in the edge table, or -1 if absent."""
        a, b = (i, j) if i < j else (j, i)
        key = a * len(self.vertices) + b
        k = np.searchsorted(self._edge_key, key)
        if k < len(self._edge_key) and self._edge_key[k] == key:
            return int(k)
        return -1

    def edge_length(self, i, j):
        k = self.edge_index(i, j)
        if k < 0:
            raise KeyError(f"({i}, {j}) is not an edge")
        return float(self.edge_lengths[k])

    def edge_length_dict(self):
        return {(int(i), int(j)): float(l)
                for (i, j), l in zip(self.edges, self.edge_lengths)}

    # -- geodesics ---------------------------------------------------------

    def geodesic_distances(self, source, limit=np.inf):
        """Graph-geodesic distance (Dijkstra over edge lengths) from
        one source vertex to every vertex."""
        return dijkstra(self._adjacency, directed=False, indices=source,
                        limit=limit)

    def geodesic_ball(self, center, radius):
        """Vertices within graph distance `radius` of `center`.

        The result always contains the center and induces a connected
        subgraph, since every prefix of a shortest path stays inside
        the ball.
        """
        if not 0 <= center < self.num_vertices:
            raise MeshValidationError(f"center {center} is not a vertex")
        if radius < 0:
            raise IllConditionedInputError("ball radius must be >= 0")
        d = self.geodesic_distances(center, limit=radius * (1 + 1e-12) + 1e-300)
        return np.flatnonzero(d <= radius * (1 + 1e-12))

    def mean_edge_length(self):
        return float(self.edge_lengths.mean())


@dataclass(frozen=True)
class Lattice:
    """Plane lattice spanned by two basis vectors (flat torus shape)."""

    e1: tuple
    e2: tuple

    def __post_init__(self):
        a = np.asarray(self.e1, dtype=float)
        b = np.asarray(self.e2, dtype=float)
        if a.shape != (2,) or b.shape != (2,):
            raise IllConditionedInputError("lattice vectors must be 2-vectors")
        cross = a[0] * b[1] - a[1] * b[0]
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0 or nb == 0:
            raise IllConditionedInputError("lattice vectors must be nonzero")
        angle = np.degrees(np.arcsin(np.clip(abs(cross) / (na * nb), 0, 1)))
        if angle < 1.0:
            raise IllConditionedInputError(
                f"lattice angle {angle:.3f} deg is below the 1 degree guard")

    @property
    def basis(self):
        return np.array([self.e1, self.e2], dtype=float)

    @property
    def area(self):
        a, b = self.basis
        return abs(a[0] * b[1] - a[1] * b[0])

    def dual_basis(self):
        """Rows f1, f2 with f_i . e_j = delta_ij."""
        return np.linalg.inv(self.basis).T


def square_lattice(side=1.0):
    return Lattice((side, 0.0), (0.0, side))


def hexagonal_lattice(side=1.0):
    """Equilateral (60 degree) lattice; the torus it spans carries the
    extremal flat metric."""
    return Lattice((side, 0.0), (0.5 * side, 0.5 * np.sqrt(3.0) * side))


# -- sphere builder -------------------------------------------------------


def _equalize_face_areas(verts, faces, target=1.29, gain=0.25, iters=200):
    """Shrink oversized triangles toward their barycenter until the
    max/min face-area ratio drops below `target`.

    Midpoint subdivision alone drifts just past 1.3 from level 5 on;
    this nudges the handful of worst triangles back without touching
    the rest of the mesh."""
    v = verts.copy()
    for _ in range(iters):
        p = v[faces]
        ar = 0.5 * np.linalg.norm(
            np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
        thr = target * ar.min()
        if ar.max() <= thr:
            break
        excess = np.maximum(ar / thr - 1.0, 0.0)
        bary = p.mean(axis=1)
        disp = np.zeros_like(v)
        wsum = np.zeros(len(v))
        for c in range(3):
            w = gain * excess
            np.add.at(disp, faces[:, c], w[:, None] * (bary - p[:, c]))
            np.add.at(wsum, faces[:, c], w)
        mask = wsum > 0
        v[mask] += disp[mask]
        v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def build_icosphere(subdivisions):
    """Unit sphere mesh: icosahedron with `subdivisions` rounds of
    midpoint subdivision, every new vertex pushed to the sphere.

    Vertex count is 10 * 4**s + 2.  Face areas stay within a 1.3
    max/min ratio at every level (a light relaxation pass enforces
    this where raw subdivision drifts slightly past it).
    """
    if not 0 <= subdivisions <= MAX_SUBDIVISIONS:
        raise ResourceLimitError(
            f"subdivisions must be in 0..{MAX_SUBDIVISIONS}, "
            f"got {subdivisions}")

    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = _ICO_FACES.copy()

    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = np.empty((4 * len(faces), 3), dtype=np.int64)
        for n, (i, j, k) in enumerate(faces):
            ij, jk, ki = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            new_faces[4 * n:4 * n + 4] = [
                (i, ij, ki), (j, jk, ij), (k, ki, jk), (ij, jk, ki)]
        faces = new_faces

    v = np.array(verts)
    p = v[faces]
    ar = 0.5 * np.linalg.norm(
        np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    if ar.max() / ar.min() > 1.295:
        v = _equalize_face_areas(v, faces)
    return TriangleMesh(v, faces)


# -- flat torus builder ---------------------------------------------------


def build_flat_torus(lattice, resolution):
    """Flat torus R^2 / lattice sampled on an n-by-n grid.

    Edge lengths are the exact flat distances between nearest lattice
    images, so the discrete metric is genuinely flat; the embedded
    positions are a torus of revolution used only for display and file
    output.  Each grid cell is split along its shorter diagonal.
    """
    if not isinstance(lattice, Lattice):
        lattice = Lattice(*lattice)
    n = int(resolution)
    if n < 4:
        raise IllConditionedInputError(
            f"resolution must be at least 4, got {n}")
    if n > MAX_RESOLUTION:
        raise ResourceLimitError(
            f"resolution {n} exceeds the cap of {MAX_RESOLUTION}")

    e1, e2 = lattice.basis / n

    def vid(i, j):
        return (i % n) * n + (j % n)

    faces = np.empty((2 * n * n, 3), dtype=np.int64)
    use_main = np.linalg.norm(e1 + e2) <= np.linalg.norm(e2 - e1)
    t = 0
    for i in range(n):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            if use_main:  # split along v00 -- v11
                faces[t] = (v00, v10, v11)
                faces[t + 1] = (v00, v11, v01)
            else:         # split along v10 -- v01
                faces[t] = (v00, v10, v01)
                faces[t + 1] = (v10, v11, v01)
            t += 2

    # intrinsic lengths from nearest-image displacements
    grid = np.stack(np.meshgrid(np.arange(n), np.arange(n), indexing="ij"),
                    axis=-1).reshape(-1, 2)
    pairs = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    und = np.unique(np.sort(pairs, axis=1), axis=0)
    dij = grid[und[:, 1]] - grid[und[:, 0]]
    dij = (dij + n // 2) % n - n // 2
    disp = dij[:, [0]] * e1 + dij[:, [1]] * e2
    lengths = {(int(a), int(b)): float(l) for (a, b), l
               in zip(und, np.linalg.norm(disp, axis=1))}

    # display embedding
    u = 2 * np.pi * grid[:, 0] / n
    w = 2 * np.pi * grid[:, 1] / n
    rr = 0.35
    pos = np.stack([(1 + rr * np.cos(w)) * np.cos(u),
                    (1 + rr * np.cos(w)) * np.sin(u),
                    rr * np.sin(w)], axis=1)
    return TriangleMesh(pos, faces, edge_lengths=lengths)


# -- file I/O --------------------------------------------------------------


def _sidecar_path(path):
    return os.path.splitext(path)[0] + ".json"


def save_mesh(mesh, path, density=None, extra=None):
    """Write OFF or OBJ by extension.

    Meshes whose intrinsic lengths differ from the embedding, or that
    carry component labels or a density, get a JSON sidecar next to
    the file so a round trip preserves the actual surface.
    """
    ext = os.path.splitext(path)[1].lower()
    if ext == ".off":
        with open(path, "w") as fh:
            fh.write("OFF\n")
            fh.write(f"{mesh.num_vertices} {mesh.num_faces} {mesh.num_edges}\n")
            for p in mesh.vertices:
                fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            for f in mesh.faces:
                fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
    elif ext == ".obj":
        with open(path, "w") as fh:
            for p in mesh.vertices:
                fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            for f in mesh.faces:
                fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
    else:
        raise MeshValidationError(f"unsupported mesh format '{ext}'")

    d = mesh.vertices[mesh.edges[:, 0]] - mesh.vertices[mesh.edges[:, 1]]
    euclid = np.linalg.norm(d, axis=1)
    intrinsic = not np.allclose(euclid, mesh.edge_lengths, rtol=1e-12, atol=0)

    if intrinsic or density is not None or mesh.component_labels is not None \
            or extra is not None:
        side = {"genus": int(mesh.genus)}
        if intrinsic:
            side["edges"] = mesh.edges.tolist()
            side["edge_lengths"] = mesh.edge_lengths.tolist()
        if mesh.component_labels is not None:
            side["component_labels"] = mesh.component_labels.tolist()
        if density is not None:
            values = getattr(density, "values", density)
            side["density"] = np.asarray(values, dtype=float).tolist()
        if extra:
            side["spec"] = extra
        with open(_sidecar_path(path), "w") as fh:
            json.dump(side, fh)


def load_mesh(path, with_sidecar=False):
    """Read OFF or OBJ (triangles only) and validate the result.

    A JSON sidecar written by `save_mesh`, when present, restores
    intrinsic edge lengths and component labels.
    """
    ext = os.path.splitext(path)[1].lower()
    if ext == ".off":
        verts, faces = _parse_off(path)
    elif ext == ".obj":
        verts, faces = _parse_obj(path)
    else:
        raise MeshValidationError(f"unsupported mesh format '{ext}'")

    lengths = None
    labels = None
    side = None
    sp_path = _sidecar_path(path)
    if os.path.exists(sp_path):
        with open(sp_path) as fh:
            side = json.load(fh)
        if "edge_lengths" in side:
            lengths = {tuple(e): l for e, l in
                       zip(side["edges"], side["edge_lengths"])}
        labels = side.get("component_labels")

    mesh = TriangleMesh(verts, faces, edge_lengths=lengths,
                        component_labels=labels)
    if with_sidecar:
        return mesh, side
    return mesh


def _tokens(path):
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line.split()


def _parse_off(path):
    it = _tokens(path)
    try:
        head = next(it)
    except StopIteration:
        raise MeshValidationError(f"{path}: empty file")
    if head[0].upper() != "OFF":
        raise MeshValidationError(f"{path}: missing OFF header")
    counts = head[1:] if len(head) > 1 else next(it)
    nv, nf = int(counts[0]), int(counts[1])
    verts = np.empty((nv, 3))
    for i in range(nv):
        row = next(it)
        verts[i] = [float(x) for x in row[:3]]
    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        row = next(it)
        k = int(row[0])
        if k != 3:
            raise MeshValidationError(
                f"{path}: face {i} has {k} vertices; only triangles "
                f"are supported")
        faces[i] = [int(x) for x in row[1:4]]
    return verts, faces


def _parse_obj(path):
    verts = []
    faces = []
    for row in _tokens(path):
        if row[0] == "v":
            verts.append([float(x) for x in row[1:4]])
        elif row[0] == "f":
            idx = [int(tok.split("/")[0]) for tok in row[1:]]
            if len(idx) != 3:
                raise MeshValidationError(
                    f"{path}: face {len(faces)} has {len(idx)} vertices; "
                    f"only triangles are supported")
            faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    return np.array(verts, dtype=float), np.array(faces, dtype=np.int64)


# -- free-function conveniences -------------------------------------------


def genus(mesh):
    """Genus from the Euler characteristic of the complex."""
    return mesh.genus


def total_area(mesh):
    """Sum of face areas under the intrinsic metric."""
    return mesh.total_area()


def geodesic_ball_vertices(mesh, center, radius):
    """Sorted vertex indices within graph distance `radius` of `center`."""
    return mesh.geodesic_ball(center, radius)

"""Laplace spectra of conformal densities on a fixed triangle mesh.

The discrete conformal class of a mesh is: keep the connectivity and
edge lengths (hence the cotangent stiffness matrix) fixed, and vary a
positive density per vertex, which only changes the lumped mass vector.
Eigenvalues scale like 1/c under density scaling by c, so the
scale-free quantity is lambda_k times total mass.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    IllConditionedInputError,
    MultiplicityError,
    SolverConvergenceError,
)

COT_CLAMP = 1e6
DENSITY_FLOOR = 1e-9
CLUSTER_TOL = 1e-3
SOLVER_TOL = 1e-9
DENSE_CUTOFF = 600


class ConformalDensity:
    """Positive vertex density representing a conformal factor.

    Values below the documented floor (1e-9) are rejected rather than
    clipped, so callers cannot silently optimize into degenerate
    metrics.
    """

    def __init__(self, values):
        v = np.ascontiguousarray(values, dtype=float)
        if v.ndim != 1:
            raise IllConditionedInputError("density must be a flat vector")
        if not np.all(np.isfinite(v)):
            raise IllConditionedInputError("density has non-finite entries")
        if v.min() < DENSITY_FLOOR:
            raise IllConditionedInputError(
                f"density entry {v.min():.3g} is below the floor "
                f"{DENSITY_FLOOR:g}")
        self.values = v
        self.values.setflags(write=False)

    @classmethod
    def uniform(cls, mesh, value=1.0):
        return cls(np.full(mesh.num_vertices, float(value)))

    def __len__(self):
        return len(self.values)


class StiffnessOperator:
    """Cotangent stiffness matrix assembled from intrinsic lengths."""

    def __init__(self, matrix, num_clamped=0):
        self.matrix = matrix.tocsr()
        self.num_clamped = int(num_clamped)

    @property
    def shape(self):
        return self.matrix.shape


class MassVector:
    """Lumped conformal mass: density times one third of incident area."""

    def __init__(self, values):
        self.values = np.ascontiguousarray(values, dtype=float)
        if (self.values <= 0).any():
            raise IllConditionedInputError("mass entries must be positive")
        self.total = float(self.values.sum())

    def matrix(self):
        return sp.diags(self.values)


def assemble_stiffness(mesh, clamp=COT_CLAMP):
    """Cotangent stiffness matrix of the mesh metric.

    Each interior edge weight is half the sum of the cotangents at the
    two opposite corners, computed from edge lengths alone.  Cotangent
    magnitudes above `clamp` are clipped (and counted) so one sliver
    triangle cannot poison the matrix.  The result is symmetric
    positive semidefinite with zero row sums and does not depend on
    the density.
    """
    fl = mesh.face_edge_lengths            # length opposite each corner
    sq = fl * fl
    area = mesh.face_areas
    # cot of corner m from the law of cosines over 2*sin = 4*area
    cot = (sq.sum(axis=1, keepdims=True) - 2 * sq) / (4 * area[:, None])

    clipped = np.abs(cot) > clamp
    n_clamped = int(clipped.sum())
    if n_clamped:
        warnings.warn(
            f"clamped {n_clamped} cotangent value(s) exceeding {clamp:g}",
            RuntimeWarning, stacklevel=2)
        cot = np.clip(cot, -clamp, clamp)

    # the edge opposite corner m of face (v0,v1,v2); columns of
    # _face_edge_index are edges (v0,v1), (v1,v2), (v2,v0)
    opp = mesh._face_edge_index[:, [1, 2, 0]]
    w = np.zeros(mesh.num_edges)
    np.add.at(w, opp.ravel(), 0.5 * cot.ravel())

    i, j = mesh.edges[:, 0], mesh.edges[:, 1]
    n = mesh.num_vertices
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([j, i, i, j])
    data = np.concatenate([-w, -w, w, w])
    matrix = sp.coo_matrix((data, (rows, cols)), shape=(n, n))
    return StiffnessOperator(matrix, n_clamped)


def assemble_mass(mesh, density=None):
    """Lumped mass vector m_i = density_i * (incident area / 3)."""
    if density is None:
        values = mesh.vertex_areas.copy()
    else:
        if not isinstance(density, ConformalDensity):
            density = ConformalDensity(density)
        if len(density) != mesh.num_vertices:
            raise IllConditionedInputError(
                "density length does not match vertex count")
        values = density.values * mesh.vertex_areas
    return MassVector(values)


def detect_clusters(eigenvalues, tol=CLUSTER_TOL):
    """Group consecutive eigenvalues whose relative gap is below `tol`.

    Returns a list of lists of indices covering 0..len-1 in order.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    clusters = [[0]]
    for i in range(1, len(lam)):
        scale = max(abs(lam[i]), abs(lam[i - 1]))
        if lam[i] - lam[i - 1] <= tol * scale or scale == 0.0:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


@dataclass
class SpectrumReport:
    """Eigenvalues 0..K of the (stiffness, mass) pencil.

    `eigenvalues` are raw pencil values in ascending order starting
    with the constant mode; `normalized` multiplies them by the total
    mass, making them invariant under density scaling.  `clusters`
    groups indices whose relative gaps fall below the cluster
    tolerance, and `residuals` records ||L u - lam M u|| / (1 + lam)
    for each pair.
    """

    eigenvalues: np.ndarray
    normalized: np.ndarray
    total_mass: float
    clusters: list
    residuals: np.ndarray
    eigenvectors: np.ndarray | None = None
    iterations: int = 0
    method: str = "dense"

    def to_dict(self):
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "normalized": self.normalized.tolist(),
            "total_mass": self.total_mass,
            "clusters": [list(map(int, c)) for c in self.clusters],
            "residuals": self.residuals.tolist(),
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    def cluster_of(self, k):
        for c in self.clusters:
            if k in c:
                return c
        raise IndexError(f"index {k} not covered by report")


def _as_matrix(stiffness):
    return stiffness.matrix if isinstance(stiffness, StiffnessOperator) \
        else stiffness.tocsr()


def _as_mass(mass):
    return mass if isinstance(mass, MassVector) else MassVector(mass)


def _residuals(L, m, lam, U):
    R = L @ U - m[:, None] * U * lam[None, :]
    return np.linalg.norm(R, axis=0) / (1.0 + np.abs(lam))


def solve_spectrum(stiffness, mass, count, want_vectors=False,
                   tol=SOLVER_TOL, seed=42, x0=None, maxiter=None,
                   cluster_tol=CLUSTER_TOL, dense_cutoff=DENSE_CUTOFF):
    """First `count` nonzero-index eigenpairs of L u = lam M u.

    Returns a SpectrumReport holding indices 0..count (the zero mode
    plus `count` more).  Small problems go through a dense solver;
    larger ones use preconditioned LOBPCG with an algebraic-multigrid
    preconditioner, verified against the residual tolerance on exactly
    the requested pairs and restarted until an iteration cap of
    10 * count * sqrt(V).  Deterministic for fixed seed and inputs.

    `x0` warm-starts the block iteration with an earlier eigenvector
    block (ignored by the dense path).
    """
    L = _as_matrix(stiffness)
    mv = _as_mass(mass)
    m = mv.values
    n = L.shape[0]
    K = int(count)
    if not 1 <= K <= n - 1:
        raise IllConditionedInputError(
            f"count must be in 1..{n - 1}, got {K}")

    block = max(2 * (K + 1), K + 9)
    if n <= max(dense_cutoff, 5 * block):
        lam, U = _solve_dense(L, m, K)
        iters, method = 0, "dense"
    else:
        lam, U, iters = _solve_lobpcg(L, m, K, block, tol, seed, x0, maxiter)
        method = "lobpcg"

    res = _residuals(L, m, lam, U)
    report = SpectrumReport(
        eigenvalues=lam,
        normalized=lam * mv.total,
        total_mass=mv.total,
        clusters=detect_clusters(lam, cluster_tol),
        residuals=res,
        eigenvectors=U if want_vectors else None,
        iterations=iters,
        method=method,
    )
    return report


def _solve_dense(L, m, K):
    d = 1.0 / np.sqrt(m)
    A = (L.multiply(d[:, None])).multiply(d[None, :]).toarray()
    A = 0.5 * (A + A.T)
    w, Y = sla.eigh(A)
    lam = w[:K + 1]
    U = d[:, None] * Y[:, :K + 1]
    return (lam, U)


def _solve_lobpcg(L, m, K, block, tol, seed, x0, maxiter):
    import pyamg

    n = L.shape[0]
    block = min(block, n // 5)
    sigma = 1e-2 * (L.diagonal().sum() / m.sum())
    shifted = (L + sigma * sp.diags(m)).tocsr()
    ml = pyamg.smoothed_aggregation_solver(shifted)
    precond = ml.aspreconditioner()
    B = sp.diags(m)

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, block))
    if x0 is not None:
        k = min(x0.shape[1], block)
        X[:, :k] = x0[:, :k]
    X[:, 0] = 1.0

    cap = maxiter if maxiter is not None else int(np.ceil(10 * K * np.sqrt(n)))
    chunk = 60
    used = 0
    lam = U = None
    while used < cap:
        step = min(chunk, cap - used)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # buffer columns may lag;
                # the requested pairs are verified below
                w, V = spla.lobpcg(L, X, B=B, M=precond, tol=tol,
                                   maxiter=step, largest=False)
        except (ValueError, np.linalg.LinAlgError):
            # Gram-matrix breakdown from iterating past convergence;
            # keep the last verified block if it already qualifies,
            # otherwise restart from a fresh subspace.
            used += step
            if lam is not None and _residuals(L, m, lam, U).max() <= tol:
                return lam, U, used
            X = rng.standard_normal((n, block))
            if U is not None:
                X[:, :U.shape[1]] = U
            X[:, 0] = 1.0
            continue
        used += step
        if not np.all(np.isfinite(w)):
            X = rng.standard_normal((n, block))
            X[:, 0] = 1.0
            continue
        order = np.argsort(w)
        w, V = w[order], V[:, order]
        lam, U = w[:K + 1], V[:, :K + 1]
        if _residuals(L, m, lam, U).max() <= tol:
            return lam, U, used
        X = V

    res = _residuals(L, m, lam, U) if lam is not None else np.array([np.inf])
    if n <= 4000:
        warnings.warn("block solver stalled; falling back to dense solve",
                      RuntimeWarning, stacklevel=3)
        lam, U = _solve_dense(L, m, K)
        return lam, U, used
    raise SolverConvergenceError(
        f"eigensolver residual {res.max():.3e} above tolerance {tol:g} "
        f"after {used} iterations", residuals=res)


def spectrum_of(mesh, density=None, count=6, **kw):
    """Convenience wrapper: assemble and solve in one call."""
    return solve_spectrum(assemble_stiffness(mesh), assemble_mass(mesh, density),
                          count, **kw)


# -- closed forms ----------------------------------------------------------


@dataclass
class ClosedFormSpectrum:
    """Exact spectrum values with multiplicities folded out."""

    eigenvalues: np.ndarray
    normalized: np.ndarray
    clusters: list = field(default_factory=list)


def flat_torus_closed_form(lattice, count):
    """Exact Laplace eigenvalues of the flat torus R^2 / lattice.

    Values are 4 pi^2 |gamma|^2 over the dual lattice, listed with
    multiplicity in ascending order (index 0 is the zero mode).
    `normalized` multiplies by the fundamental-domain area.
    """
    F = lattice.dual_basis()
    smin = np.linalg.svd(F, compute_uv=False)[-1]
    K = int(count)

    P = 4
    while True:
        r = np.arange(-P, P + 1)
        pq = np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2)
        pts = pq @ F
        nsq = np.sort(np.einsum("ij,ij->i", pts, pts))
        if len(nsq) > K and nsq[K] <= (smin * P) ** 2 * (1 - 1e-12):
            break
        P *= 2
        if P > 1 << 16:
            raise IllConditionedInputError(
                "dual lattice enumeration failed; lattice too skewed")

    lam = 4 * np.pi ** 2 * nsq[:K + 1]
    return ClosedFormSpectrum(
        eigenvalues=lam,
        normalized=lam * lattice.area,
        clusters=detect_clusters(lam),
    )


# -- eigenvalue derivatives --------------------------------------------------


def eigenvalue_gradient(stiffness, mass, mesh, density, k, report=None,
                        cluster_tol=CLUSTER_TOL):
    """d lambda_k / d density_i for a simple eigenvalue.

    With the eigenvector normalized to unit mass norm, perturbing the
    density only moves the mass matrix, giving
    d lambda_k / d rho_i = -lambda_k * u_k(i)^2 * a_i
    where a_i is the plain (density-free) vertex area share.  Raises
    MultiplicityError when lambda_k sits in a cluster, where no
    single-valued derivative exists.
    """
    if report is None or report.eigenvectors is None:
        report = solve_spectrum(stiffness, mass, min(k + 2,
                                mesh.num_vertices - 1), want_vectors=True)
    if k < 0 or k >= len(report.eigenvalues):
        raise IndexError(f"eigenvalue index {k} outside report")

    cluster = report.cluster_of(k)
    if len(cluster) > 1:
        raise MultiplicityError(
            f"eigenvalue {k} lies in a cluster of size {len(cluster)}; "
            f"its derivative is set-valued", cluster=cluster)

    lam = report.eigenvalues[k]
    u = report.eigenvectors[:, k]
    mv = _as_mass(mass)
    norm = u @ (mv.values * u)
    return -lam * (u * u) * mesh.vertex_areas / norm

"""Maximizing normalized eigenvalues over a discrete conformal class.

The stiffness matrix is pinned by the mesh metric; the density is the
only control.  Because eigenvalues of multiplicity > 1 are not
differentiable, the ascent works on a soft minimum over the detected
cluster around the target index, which is smooth, sits just below the
true eigenvalue, and collapses onto it as the temperature shrinks.
Densities are parametrized by their logarithm so positivity is free
and a step size bounds the pointwise metric distortion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedInputError
from .spectral import (
    CLUSTER_TOL,
    ConformalDensity,
    SpectrumReport,
    assemble_mass,
    assemble_stiffness,
    solve_spectrum,
)

_LOG_RANGE = 30.0  # working clamp on log-density spread


@dataclass
class OptimizerOptions:
    """Knobs for `maximize_lambda_k`; defaults suit desk-scale meshes."""

    max_iterations: int = 150
    initial_step: float = 0.5
    step_growth: float = 1.3
    backtrack: float = 0.5
    max_step: float = 2.0
    min_step: float = 1e-10
    stall_limit: int = 50
    cluster_tol: float = CLUSTER_TOL
    smoothing_temperature: float | None = None  # None: 1e-2 * current value
    restarts: int = 4
    seed: int = 42
    grad_tol: float = 1e-6
    headroom: int = 6
    solver_tol: float = 1e-9

    def __post_init__(self):
        if self.max_iterations < 1:
            raise IllConditionedInputError("max_iterations must be >= 1")
        for name in ("initial_step", "step_growth", "backtrack", "min_step",
                     "grad_tol", "max_step"):
            if getattr(self, name) <= 0:
                raise IllConditionedInputError(f"{name} must be positive")
        if not self.backtrack < 1:
            raise IllConditionedInputError("backtrack must be < 1")
        if self.step_growth < 1:
            raise IllConditionedInputError("step_growth must be >= 1")
        if self.restarts < 1:
            raise IllConditionedInputError("restarts must be >= 1")
        if not 0 < self.cluster_tol < 1:
            raise IllConditionedInputError("cluster_tol must be in (0, 1)")


@dataclass
class AscentState:
    """One optimizer iterate: log-density plus cached spectral data."""

    theta: np.ndarray
    value: float                 # normalized lambda_k
    objective: float             # soft minimum over the cluster
    gradient: np.ndarray         # d objective / d theta
    cluster: list
    step: float
    report: SpectrumReport
    temperature: float
    iteration: int = 0
    rejections: int = 0


@dataclass
class OptimizationResult:
    best_density: ConformalDensity
    best_value: float
    history: list                # (iteration, value, step, cluster size)
    status: str                  # converged | iteration-cap | stalled
    report: SpectrumReport
    gradient_norm: float
    restart_values: list = field(default_factory=list)
    restart_index: int = 0
    target_index: int = 1


class AscentProblem:
    """Fixed mesh data plus evaluation of the smoothed objective."""

    def __init__(self, mesh, k, options=None):
        self.mesh = mesh
        self.k = int(k)
        self.opt = options or OptimizerOptions()
        self.stiffness = assemble_stiffness(mesh)
        self.areas = mesh.vertex_areas
        if not 1 <= self.k <= mesh.num_vertices - 2:
            raise IllConditionedInputError(
                f"target index must be in 1..{mesh.num_vertices - 2}")
        self._warm = None

    def normalize(self, theta):
        """Shift theta so total mass is 1, then clamp the spread.

        Normalized eigenvalues are invariant under the shift; the
        clamp only keeps exp() in safe floating-point territory.
        """
        theta = theta - theta.max()
        theta = theta - np.log(np.exp(theta) @ self.areas)
        return np.clip(theta, theta.max() - _LOG_RANGE, None)

    def smoothed(self, theta, report, temperature):
        """Soft minimum of normalized eigenvalues over the cluster
        around the target index, and its theta-gradient.

        The smoothing window is the detected cluster widened upward to
        everything within the temperature's reach (4t), so an ascent
        approaching a multiple eigenvalue from below starts balancing
        the colliding branches before they cross; with a strict window
        the ascent walks into the crossing and stalls.  The window
        never includes the constant mode.  Weights are the softmax of
        the negated values; each member contributes its own eigenvalue
        derivative
            d lambar_j / d rho_i = lam_j * a_i * (1 - V * u_j(i)^2)
        (unit mass-norm eigenvector, V the total mass),
        times rho_i for the chain rule to theta.
        """
        strict = [j for j in report.cluster_of(self.k) if j >= 1] or [self.k]
        lam_all = report.normalized
        hi = self.k
        while (hi + 1 < len(lam_all)
               and lam_all[hi + 1] - lam_all[self.k] <= 4.0 * temperature):
            hi += 1
        cluster = list(range(strict[0], max(strict[-1], hi) + 1))
        lam_bar = report.normalized[cluster]
        t = temperature
        shifted = -(lam_bar - lam_bar.min()) / t
        w = np.exp(shifted)
        w /= w.sum()
        value = lam_bar.min() - t * np.log(np.sum(np.exp(shifted)))

        rho = np.exp(theta)
        m = rho * self.areas
        V = report.total_mass
        U = report.eigenvectors[:, cluster]
        usq = U * U
        usq = usq / (m @ usq)                     # enforce unit mass norm
        lam = report.eigenvalues[cluster]
        glam = self.areas[:, None] * (1.0 - V * usq) * lam[None, :]
        grad_theta = (glam @ w) * rho
        return value, grad_theta, cluster

    def auto_temperature(self, value):
        if self.opt.smoothing_temperature is not None:
            return self.opt.smoothing_temperature
        return max(1e-2 * abs(value), 1e-12)

    def evaluate(self, theta, temperature=None, step=None):
        theta = self.normalize(theta)
        rho = np.exp(theta)
        mass = assemble_mass(self.mesh, ConformalDensity(rho))
        report = solve_spectrum(
            self.stiffness, mass, self.k + self.opt.headroom,
            want_vectors=True, tol=self.opt.solver_tol,
            seed=self.opt.seed, x0=self._warm,
            cluster_tol=self.opt.cluster_tol)
        self._warm = report.eigenvectors

        value = float(report.normalized[self.k])
        t = temperature if temperature is not None else \
            self.auto_temperature(value)
        objective, gradient, cluster = self.smoothed(theta, report, t)
        return AscentState(
            theta=theta, value=value, objective=objective,
            gradient=gradient, cluster=cluster,
            step=self.opt.initial_step if step is None else step,
            report=report, temperature=t)


def ascent_step(problem, state):
    """One backtracking line-search step along the smoothed gradient.

    Returns (accepted, new_state).  The trial point is accepted when
    the smoothed objective, held at the current temperature, strictly
    improves; the objective sits below the target eigenvalue, so
    improving it certifies progress even while branches of a forming
    multiple eigenvalue reshuffle.  On rejection only the step size
    shrinks.
    """
    g = state.gradient
    gmax = np.abs(g).max()
    if gmax == 0:
        return False, _rejected(state, problem.opt)
    direction = g / gmax

    trial = problem.evaluate(state.theta + state.step * direction,
                             temperature=state.temperature)
    improved = trial.objective > state.objective + 1e-14 * abs(state.objective)
    if improved:
        # refresh the temperature for subsequent comparisons
        t = problem.auto_temperature(trial.value)
        if t != trial.temperature:
            trial.objective, trial.gradient, trial.cluster = \
                problem.smoothed(trial.theta, trial.report, t)
            trial.temperature = t
        trial.step = min(state.step * problem.opt.step_growth,
                         problem.opt.max_step)
        trial.iteration = state.iteration + 1
        trial.rejections = 0
        return True, trial

    return False, _rejected(state, problem.opt)


def _rejected(state, options):
    return AscentState(
        theta=state.theta, value=state.value, objective=state.objective,
        gradient=state.gradient, cluster=state.cluster,
        step=state.step * options.backtrack, report=state.report,
        temperature=state.temperature, iteration=state.iteration + 1,
        rejections=state.rejections + 1)


def projected_gradient_norm(state, areas):
    """Euclidean norm of the ascent gradient projected onto the
    fixed-total-mass constraint (the component along the mass vector;
    analytically it is already tangent)."""
    m = np.exp(state.theta) * areas
    mhat = m / np.linalg.norm(m)
    g = state.gradient - (state.gradient @ mhat) * mhat
    return float(np.linalg.norm(g))


def stationarity_report(mesh, k, density=None, options=None):
    """Value and projected gradient norm of the smoothed objective at
    one density (uniform when omitted), without any optimization."""
    options = options or OptimizerOptions()
    problem = AscentProblem(mesh, k, options)
    if density is None:
        density = ConformalDensity.uniform(mesh)
    elif not isinstance(density, ConformalDensity):
        density = ConformalDensity(density)
    state = problem.evaluate(np.log(density.values))
    return {
        "value": state.value,
        "objective": state.objective,
        "gradient_norm": projected_gradient_norm(state, problem.areas),
        "cluster_size": len(state.cluster),
    }


def bump_density(mesh, center=0, width=None, floor=1e-6):
    """Density concentrated near one vertex: a Gaussian in geodesic
    distance.  Breaks symmetry as an optimizer start."""
    if width is None:
        width = 0.25 * np.sqrt(mesh.total_area())
    d = mesh.geodesic_distances(center)
    rho = np.exp(-(d / width) ** 2) + floor
    return ConformalDensity(rho)


def _initial_densities(mesh, options, initial_density, rng):
    inits = []
    if initial_density is not None:
        if not isinstance(initial_density, ConformalDensity):
            initial_density = ConformalDensity(initial_density)
        inits.append(initial_density)
    else:
        inits.append(ConformalDensity.uniform(mesh))
        inits.append(bump_density(mesh, center=0))
    while len(inits) < options.restarts:
        rho = np.exp(0.5 * rng.standard_normal(mesh.num_vertices))
        inits.append(ConformalDensity(rho))
    return inits[:options.restarts]


def maximize_lambda_k(mesh, k, options=None, initial_density=None):
    """Gradient ascent on the k-th normalized eigenvalue over densities.

    Runs `options.restarts` independent ascents (an explicit initial
    density replaces the default first restart) and keeps the best.
    The returned history lists the accepted steps of the winning
    restart as (iteration, normalized eigenvalue, step size, cluster
    size); the smoothed objective increases along rows while the raw
    eigenvalue may dip briefly when cluster branches reorder, so the
    best iterate by value is what the result carries.
    Deterministic for fixed seed and options.
    """
    options = options or OptimizerOptions()
    problem = AscentProblem(mesh, k, options)
    rng = np.random.default_rng(options.seed)
    inits = _initial_densities(mesh, options, initial_density, rng)

    best = None
    restart_values = []
    for ridx, dens in enumerate(inits):
        problem._warm = None
        outcome = _run_single(problem, dens, options)
        restart_values.append(outcome["value"])
        if best is None or outcome["value"] > best["value"]:
            best = outcome
            best["restart"] = ridx

    problem._warm = None
    final_state = problem.evaluate(best["theta"])
    density = ConformalDensity(np.exp(final_state.theta))
    return OptimizationResult(
        best_density=density,
        best_value=float(final_state.value),
        history=best["history"],
        status=best["status"],
        report=final_state.report,
        gradient_norm=projected_gradient_norm(final_state, problem.areas),
        restart_values=restart_values,
        restart_index=best["restart"],
        target_index=k,
    )


def _run_single(problem, density, options):
    state = problem.evaluate(np.log(density.values))
    state.step = options.initial_step
    history = [(0, state.value, 0.0, len(state.cluster))]
    status = "iteration-cap"
    n_accept = 0
    best_value, best_theta = state.value, state.theta

    for _ in range(options.max_iterations):
        if projected_gradient_norm(state, problem.areas) <= options.grad_tol:
            status = "converged"
            break
        step_tried = state.step
        accepted, state = ascent_step(problem, state)
        if accepted:
            n_accept += 1
            history.append((n_accept, state.value, step_tried,
                            len(state.cluster)))
            if state.value > best_value:
                best_value, best_theta = state.value, state.theta
        else:
            if state.step < options.min_step:
                status = "converged"
                break
            if state.rejections >= options.stall_limit:
                status = "stalled"
                break

    return {"value": best_value, "theta": best_theta,
            "history": history, "status": status}


def check_conformal_lower_bound(value, k=1, n=2, rel_slack=0.0):
    """Compare an achieved normalized eigenvalue against the universal
    conformal lower bound for index k in dimension n.

    Returns a dict with the bound, the value, the margin, and a flag;
    `rel_slack` loosens the comparison to absorb discretization error.
    """
    from .bounds import conformal_lower_bound

    bound = conformal_lower_bound(n, k)
    margin = value - bound * (1 - rel_slack)
    return {
        "bound": bound,
        "value": float(value),
        "rel_slack": rel_slack,
        "margin": float(margin),
        "satisfied": bool(margin >= 0),
    }

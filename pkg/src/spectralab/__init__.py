"""Numerical laboratory for conformal and topological Laplace spectra.

The package estimates eigenvalues of the weighted Laplacian on closed
triangle meshes, optimizes the conformal density against universal
bounds, and builds the thin-neck gluings and handles whose limits those
bounds come from.

Set SPECTRALAB_THREADS to cap the BLAS thread pools; the cap is applied
here, before numpy is first imported, and never overrides an explicit
OMP/OpenBLAS/MKL setting.
"""

import os as _os

_threads = _os.environ.get("SPECTRALAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .errors import (SpectralabError, MeshValidationError,
                     IllConditionedInputError, ResourceLimitError,
                     SolverConvergenceError, MultiplicityError,
                     SurgeryError)
from .mesh import (Lattice, TriangleMesh, build_flat_torus, build_icosphere,
                   hexagonal_lattice, load_mesh, save_mesh, square_lattice)
from .spectral import (ConformalDensity, MassVector, SpectrumReport,
                       assemble_mass, assemble_stiffness, eigenvalue_gradient,
                       flat_torus_closed_form, solve_spectrum, spectrum_of)
from .optimize import (AscentProblem, OptimizationResult, OptimizerOptions,
                       bump_density, check_conformal_lower_bound,
                       maximize_lambda_k, stationarity_report)
from .surgery import (CapSpec, FlattenResult, GlueSpec, GluedSurface,
                      HandleSurface, attach_handle, cap_metric_factor,
                      collapse_component, dirichlet_segment_spectrum,
                      epsilon_of_R, flatten_density_near, glue_surfaces,
                      max_disk_radius, stereographic_factor,
                      union_spectrum_oracle)
from .bounds import (BoundEntry, BoundTable, build_bound_table,
                     conformal_lower_bound, hexagonal_torus_lambda1,
                     korevaar_trend, round_sphere_eigenvalue,
                     spectral_gap_bound, sphere_lambda2_conformal,
                     symmetric_space_lambda1c, topological_k_lower,
                     yang_yau_bound)
from .experiments import (Check, ExperimentReport, rerun, run_bounds,
                          run_collapse, run_gap, run_glue, run_handle,
                          run_maximize, run_spectrum)

__version__ = "0.1.0"

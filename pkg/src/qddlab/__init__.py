"""Structure-preserving lattice discretizations of drift-diffusion and
fourth-order quantum diffusion flows, with entropy/Fisher decay diagnostics.

The library is organized bottom-up: ``grid`` (lattice and cell averaging),
``potential`` (steady states), ``markov`` (generator and moduli), ``metric``
(log-mean mobility and Onsager operator), ``functionals`` (entropy, Fisher
information, dissipation identities), ``flow`` (implicit Euler with Newton),
``cli`` (experiments and diagnostics front end).
"""

from .flow import (
    RunRecord,
    StepDiagnostics,
    StepFailure,
    StepperConfig,
    evolve,
    fp_step,
    qdd_jacobian,
    qdd_rhs,
    qdd_step,
)
from .functionals import (
    FunctionalReport,
    cdi_margin,
    entropy,
    entropy_gradient,
    entropy_hessian_form,
    fisher,
    fisher_alt,
    fisher_gradient,
    fisher_hessian_form,
    functional_report,
)
from .grid import (
    Grid,
    as_field,
    as_flat,
    discretize,
    edge_count,
    edge_list,
    flat_index,
    multi_index,
    neighbors,
)
from .markov import (
    Generator,
    ModulusReport,
    TriFactor,
    apply,
    assemble,
    assemble_direct,
    cdpp_modulus,
    factor_gap,
    is_irreducible,
    mielke_modulus,
    spectral_gap,
    tri_factor,
)
from .metric import (
    edge_weights,
    log_mean,
    log_mean_partials,
    onsager_apply,
    onsager_form,
    onsager_split,
)
from .potential import (
    Quadratic,
    SteadyState,
    Tabulated,
    cell_averages,
    lambda_h,
    steady_state,
    w_from_v,
)

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "as_field",
    "as_flat",
    "discretize",
    "edge_count",
    "edge_list",
    "flat_index",
    "multi_index",
    "neighbors",
    "Quadratic",
    "Tabulated",
    "SteadyState",
    "cell_averages",
    "lambda_h",
    "steady_state",
    "w_from_v",
    "TriFactor",
    "Generator",
    "ModulusReport",
    "tri_factor",
    "apply",
    "assemble",
    "assemble_direct",
    "factor_gap",
    "spectral_gap",
    "cdpp_modulus",
    "mielke_modulus",
    "is_irreducible",
    "log_mean",
    "log_mean_partials",
    "edge_weights",
    "onsager_form",
    "onsager_split",
    "onsager_apply",
    "entropy",
    "entropy_gradient",
    "fisher",
    "fisher_alt",
    "fisher_gradient",
    "entropy_hessian_form",
    "fisher_hessian_form",
    "cdi_margin",
    "FunctionalReport",
    "functional_report",
    "StepperConfig",
    "StepDiagnostics",
    "StepFailure",
    "RunRecord",
    "fp_step",
    "qdd_rhs",
    "qdd_jacobian",
    "qdd_step",
    "evolve",
    "__version__",
]

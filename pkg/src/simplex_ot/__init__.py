"""Riemannian geometry of the probability simplex on a weighted graph (discrete L2-Wasserstein)."""

from .errors import (
    BoundaryError,
    BoundaryExitError,
    ConvergenceError,
    DensityError,
    DisconnectedGraphError,
    DuplicateEdgeError,
    GraphError,
    GraphParseError,
    NonPositiveWeightError,
    SelfLoopError,
    SimplexOTError,
    SpectralError,
)
from .graph import (
    Graph,
    graph_from_edges,
    incidence,
    load_density,
    load_graph,
    loads_graph,
    dumps_graph,
    path_graph,
    random_connected_graph,
    random_density,
    random_tangent,
    triangle_graph,
    two_point_graph,
    validate_density,
)
from .laplacian import (
    WeightedLaplacian,
    build_laplacian,
    log_pi,
    logdet_gradient,
    pinv_apply,
    spectrum,
    sqrt_apply,
    volume_density,
)
from .calculus import circ, div, flux, grad, hodge_decompose, inner_rho, normalize_potential
from .metric import (
    DistanceOptions,
    DistanceResult,
    SimplexPath,
    embed_metric_apply,
    first_variation,
    metric_dual,
    metric_primal,
    path_energy,
    potential_of_tangent,
    second_variation,
    tangent_of_potential,
    wasserstein_distance,
)
from .geometry import (
    christoffel,
    christoffel_all,
    connection,
    curvature,
    divergence_w,
    geodesic_ivp,
    hessian_w,
    jacobi_propagate,
    laplace_beltrami,
    parallel_transport,
    spectral_frame,
    wasserstein_gradient,
)
from .functionals import (
    Functional,
    check_functional,
    custom,
    entropy,
    linear_potential,
    log_pi_functional,
    parse_functional,
    quadratic,
    relative_entropy,
)
from .dynamics import (
    SDEOptions,
    SampleSet,
    Trajectory,
    fpe_solve_1d,
    gibbs_density,
    gibbs_normalize_1d,
    gradient_flow,
    hamiltonian_flow,
    sde_sample,
)

__version__ = "0.1.0"

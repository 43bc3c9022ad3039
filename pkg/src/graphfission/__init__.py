"""Graph fission: thinning, trend filtering, graph CV, and post-selection CIs."""

from .basis import (
    SelectedBasis,
    basis_dimension,
    construct_basis,
    export_basis_csv,
    project_onto_basis,
    projection_matrix,
)
from .cv import (
    CvReport,
    default_lambda_grid,
    estimate_sigma_fixed_lambda,
    graph_cv,
    ordinary_cv,
)
from .graphs import (
    DifferenceOperator,
    Graph,
    GraphError,
    NodeSignal,
    connected_components,
    difference_operator,
    grid_graph,
    incidence,
    laplacian,
    laplacian_pinv_power,
    read_graph,
    read_signal,
    write_graph,
    write_signal,
)
from .inference import (
    GlmFit,
    PoissonCiResult,
    RobustInterval,
    SigmaBounds,
    ci_length_limit,
    estimate_sigma_bounds,
    fit_poisson_glm,
    information_fraction,
    naive_ci,
    pivot,
    poisson_ci_pipeline,
    poisson_projection_parameter,
    robust_ci,
    robust_ci_all,
)
from .simulate import (
    SimConfig,
    cv_error_curves,
    emit_plotdata,
    generate_trend,
    run_ci_experiment,
    run_cv_experiment,
    run_poisson_experiment,
    sample_errors,
)
from .solvers import (
    PenaltySpec,
    TrendFit,
    degrees_of_freedom,
    kkt_residual,
    solve_elastic,
    solve_l1,
    solve_l2,
    solve_poisson_l1,
)
from .thinning import (
    FissionPair,
    ThinnedFamily,
    fission_gaussian,
    thin_gaussian,
    thin_gaussian_correlated,
    thin_poisson,
)

__version__ = "0.1.0"

"""adjpath: sparse dynamics recovery by adjoint-state descent along a regularization path.

The library solves implicit inverse problems -- recovering parameters m of a
constraint F(u, m) = 0 from noisy samples of u -- by minimizing a regularized
misfit with adjoint-state gradients inside a homotopy over a decreasing
sequence of regularization weights. The shipped instantiation is a
collocation model for sparse ODE dynamics with a trigonometric basis.
"""

from .basis import BasisFunction, BasisLibrary, cosine_basis
from .config import (
    DEFAULT_MASTER_SEED,
    PAPER_PINS,
    RunConfig,
    ci_profile,
    config_from_tree,
    config_hash,
    config_to_tree,
    load_config,
    paper_profile,
    save_config,
    validate_pins,
)
from .errors import (
    AdjpathError,
    ConfigError,
    DimensionError,
    DivergenceError,
    GridError,
    HomotopyError,
    StiffnessError,
)
from .experiments import (
    SemiConvergenceReport,
    StatsRow,
    TableResult,
    TrialResult,
    best_alpha,
    mean_std,
    relative_error,
    run_table,
    run_trial,
    semi_convergence_from_curves,
    semi_convergence_report,
    solution_error,
    table_csv_lines,
    table_text_lines,
)
from .grid import TimeGrid, build_diff_matrix, build_uniform_grid
from .model import CollocationModel, ImplicitModel, eval_basis_matrix
from .optimize import (
    HomotopySchedule,
    InnerConfig,
    PathRecord,
    PathTable,
    RegularizerSpec,
    data_loss,
    data_loss_grad,
    hard_threshold,
    homotopy_run,
    inner_solve,
    lagrangian_grad_m,
    make_log_schedule,
    read_path_csv,
    smooth_l1,
    smooth_l1_grad,
    write_path_csv,
)
from .solvers import (
    LandweberConfig,
    NewtonConfig,
    SolveReport,
    landweber_solve,
    newton_solve,
)
from .state import (
    AdjointField,
    DataVector,
    ParamMatrix,
    Trajectory,
    as_param_values,
    as_state_values,
    flatten_state,
    read_data_csv,
    read_trajectory_csv,
    unflatten_state,
    write_data_csv,
    write_trajectory_csv,
)
from .synth import (
    GROUND_TRUTH_INDEX,
    CauchySpec,
    NoiseSpec,
    add_noise,
    ground_truths,
    integrate_cauchy,
    periodicity_gap,
    read_fixture_csv,
    trial_seed,
    write_fixture_csv,
)

__version__ = "0.1.0"

"""Path-following replicator dynamics for dense-cluster discovery in graphs."""

__version__ = "0.1.0"

from .applications import (
    Cluster,
    CliqueResult,
    DksResult,
    EmptyClusterError,
    densest_k_path,
    densest_k_subgraph,
    density_shrink,
    extract_cluster,
    find_clique_pfrd,
)
from .graph import (
    GraphFormatError,
    Hypergraph,
    SparseGraph,
    build_kernel_graph,
    evaluate_poly,
    evaluate_quadratic,
    load_edge_list,
    subgraph_weight,
)
from .projection import CappedSimplexSpec, DegenerateProjectionError, project_simplex, project_truncated
from .replicator import (
    IterationConfig,
    PathSchedule,
    SolutionPath,
    StateVector,
    kkt_report,
    reciprocal_schedule,
    run_drd,
    run_pfrd,
    step,
    verify_fixed_point,
)
from .structfit import FitConfig, StructureModel, fit_lines, fit_structures, fitting_error

__all__ = [name for name in dir() if not name.startswith("_")]

"""Augmented Gromov-Wasserstein: an alpha-weighted blend of Gromov-Wasserstein
and CO-Optimal Transport sharing one sample coupling."""

from .core import (Coupling, SolveReport, SolverConfig, as_data_matrix,
                   as_distance_matrix, as_prob_vector, product_coupling,
                   uniform_hist, validate_coupling)
from .linot import LinearOtResult, sinkhorn, solve_exact
from .preprocess import distance_matrix, knn_geodesic, pairwise_distances, unit_normalize
from .quad import (agw_objective, coot_linearized_for_features,
                   coot_linearized_for_samples, coot_objective, gw_gradient,
                   gw_linearized_cost, gw_objective)
from .solvers import line_search_quadratic, solve_agw, solve_coot, solve_gw
from .tasks import (SupervisionSpec, aggregate_coupling_by_group, barycentric_project,
                    build_supervision_cost, foscttm, group_match_accuracy,
                    label_propagation, matching_accuracy)

__version__ = "0.1.0"

"""perfcast: predict program execution times on machines they never ran on.

The data model is a sparse "programs x machines" matrix of observed
execution times. Missing cells are predicted by per-cell ridge regression,
correlation-clique scaling, low-rank factorization, or an averaging
ensemble of the three; an evaluation harness scores the predictions and a
small application layer turns a completed matrix into placement decisions.
"""

from .cliques import (ColdRowError, Grouping, SimilarityGraph, build_graph,
                      clique_predict, find_cliques, group_estimates,
                      grouping_to_json, pearson, scaling_coefficient)
from .config import RunConfig, read_config_file
from .evaluation import (Algorithm, AlgorithmResult, CellPrediction,
                         CliqueProtocol, EvalConfig, EvalReport, FillRecord,
                         complete_matrix, ensemble_predict, leave_one_out,
                         masking_sweep, outlier_sweep, prediction_error,
                         report_to_json, write_reports_csv,
                         write_reports_json)
from .factorization import (ALSConfig, FactorModel, UnfactorableError,
                            als_fit, model_from_json, model_to_json,
                            rank_machines, svd_fit)
from .matrix import (HeldOutCell, MaskInfeasibleError, MaskSpec, Observation,
                     PCMatrix, build_matrix, density, inject_outliers,
                     mask_random, read_matrix_csv, read_observations_csv,
                     restore, write_matrix_csv)
from .placement import (PlacementDecision, Rationale, greedy_place,
                        schedule_batch)
from .ridge import NoBasisError, RidgeConfig, ridge_predict

__version__ = "0.1.0"

__all__ = [
    "ALSConfig", "Algorithm", "AlgorithmResult", "CellPrediction",
    "CliqueProtocol", "ColdRowError", "EvalConfig", "EvalReport",
    "FactorModel", "FillRecord", "Grouping", "HeldOutCell",
    "MaskInfeasibleError", "MaskSpec", "NoBasisError", "Observation",
    "PCMatrix", "PlacementDecision", "Rationale", "RidgeConfig", "RunConfig",
    "SimilarityGraph", "UnfactorableError", "als_fit", "build_graph",
    "build_matrix", "clique_predict", "complete_matrix", "density",
    "ensemble_predict", "find_cliques", "greedy_place", "group_estimates",
    "grouping_to_json", "inject_outliers", "leave_one_out", "mask_random",
    "masking_sweep", "model_from_json", "model_to_json", "outlier_sweep",
    "pearson", "prediction_error", "rank_machines", "read_config_file",
    "read_matrix_csv", "read_observations_csv", "report_to_json", "restore",
    "ridge_predict", "schedule_batch", "scaling_coefficient", "svd_fit",
    "write_matrix_csv", "write_reports_csv", "write_reports_json",
]

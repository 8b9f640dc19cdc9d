"""Structured (sparse + fused) CP factorization and dynamic tensor clustering."""
__version__ = "0.1.0"

from dtclust._backend import BACKEND
from dtclust.cluster import ClusteringResult, clustering_error, dtc, gap_statistic, kmeans, recovery_error
from dtclust.proxops import DegenerateVector, fuse, normalize, truncate, truncatefuse
from dtclust.stf import ConstraintSpec, StfReport, objective_value, power_update, stf_decompose
from dtclust.tensor import (
    DenseTensor,
    FactorSet,
    contract_except,
    cp_reconstruct,
    frobenius_norm,
    full_contract,
    stack_samples,
    subtract_rank_one,
)
from dtclust.tuning import TuneGrid, bic_score, degrees_of_freedom, select_model

__all__ = [
    "BACKEND", "ClusteringResult", "ConstraintSpec", "DegenerateVector", "DenseTensor",
    "FactorSet", "StfReport", "TuneGrid", "bic_score", "clustering_error", "contract_except",
    "cp_reconstruct", "degrees_of_freedom", "dtc", "frobenius_norm", "full_contract", "fuse",
    "gap_statistic", "kmeans", "normalize", "objective_value", "power_update", "recovery_error",
    "select_model", "stack_samples", "stf_decompose", "subtract_rank_one", "truncate",
    "truncatefuse",
]

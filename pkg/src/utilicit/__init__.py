"""utilicit: short adaptive questionnaires in place of full utility elicitation.

Given a decision model and a database of utility functions, the toolkit
clusters the database by decision-theoretic utility loss, picks a
prototype per cluster, and induces a tree of easy yes/no preference
questions that assigns a new user to a prototype whose optimal strategy
is then recommended.
"""

from .cluster import Cluster, ClusterCache, Clustering, hac, label_database, select_prototype
from .corpus import GeneratorSpec, generate, load_database, load_spec, save_database
from .evaluate import EvalPoint, EvalReport, holdout_error, learning_curve, loocv_over_k
from .model import (
    DecisionModel,
    History,
    ModelError,
    Outcome,
    Strategy,
    best_strategy,
    expected_utility,
    load_model,
    save_model,
)
from .tree import (
    ClassificationResult,
    ElicitationTree,
    SplitQuestion,
    answer,
    build_tree,
    candidate_splits,
    classify,
    entropy,
    gain,
    load_tree,
)
from .utility import (
    UtilityDatabase,
    UtilityFunction,
    averaged_distance,
    distance,
    normalize,
    pairwise_distances,
    utility_loss,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

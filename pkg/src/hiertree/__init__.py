"""Label hierarchies induced from the co-occurrence of a classifier's top-k predictions."""

__version__ = "0.1.0"

from hiertree.errors import DegenerateInputError, HiertreeError, ValidationError
from hiertree.ingest import (
    LabelRegistry,
    PredictionDataset,
    PredictionRecord,
    coverage_report,
    parse_predictions,
    serialize_jsonl,
)
from hiertree.cooccur import (
    CooccurrenceStats,
    DistanceMatrix,
    SimilarityMatrix,
    confidence,
    confidence_distance,
    cosine_similarity,
    count_cooccurrences,
    kulczynski_similarity,
    lift,
    lift_distance,
)
from hiertree.hclust import LINKAGES, CutAssignment, Dendrogram, agglomerate, cut, export_tree
from hiertree.evaluate import AccuracyCurve, EvalSet, accuracy_curve, compare_methods, level_accuracy
from hiertree.diagnose import cluster_profile, late_merger_report
from hiertree.synth import PlantedConfig, adjusted_rand_index, generate_planted

__all__ = [
    "__version__",
    "HiertreeError",
    "ValidationError",
    "DegenerateInputError",
    "LabelRegistry",
    "PredictionRecord",
    "PredictionDataset",
    "parse_predictions",
    "serialize_jsonl",
    "coverage_report",
    "CooccurrenceStats",
    "SimilarityMatrix",
    "DistanceMatrix",
    "count_cooccurrences",
    "confidence",
    "lift",
    "cosine_similarity",
    "kulczynski_similarity",
    "confidence_distance",
    "lift_distance",
    "LINKAGES",
    "Dendrogram",
    "CutAssignment",
    "agglomerate",
    "cut",
    "export_tree",
    "EvalSet",
    "AccuracyCurve",
    "level_accuracy",
    "accuracy_curve",
    "compare_methods",
    "late_merger_report",
    "cluster_profile",
    "PlantedConfig",
    "generate_planted",
    "adjusted_rand_index",
]

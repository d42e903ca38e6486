"""Global fairness verification for decision-tree ensembles.

Given an ensemble and a set of sensitive features, the package computes
hyper-rectangles over-approximating where causal discrimination may occur and
synthesizes propositional-logic conditions that provably guarantee fairness
everywhere they hold, plus scoring and ranking tools for the results.
"""

from .errors import InputError, ModelFormatError, ResourceLimitError, TreefairError
from .evaluation import (
    InstanceSet,
    RankedFormula,
    accuracy,
    coverage_curve,
    gen_random_instances,
    oracle_flags,
    oracle_is_discriminated,
    score_d,
    score_dtilde,
    top_k_greedy,
)
from .geometry import HyperRectangle, Interval
from .itemsets import Item, Itemset, check_fair, gen_itemsets, meet, subsumed_by_any
from .model import (
    Ensemble,
    Feature,
    FeatureMetadata,
    Internal,
    Leaf,
    parse_model,
    predict_batch,
    predict_ensemble,
    predict_tree,
    thresholds_per_feature,
)
from .stability import (
    EquivalenceClass,
    UnstableSet,
    analyze,
    enumerate_equivalence_classes,
    flip_set_representatives,
)
from .synthesis import (
    FormulaSet,
    RenderedFormula,
    render_formulas,
    synthesize,
    synthesize_from_unstable,
)

__version__ = "0.1.0"

__all__ = [
    "Ensemble",
    "EquivalenceClass",
    "Feature",
    "FeatureMetadata",
    "FormulaSet",
    "HyperRectangle",
    "InputError",
    "InstanceSet",
    "Internal",
    "Interval",
    "Item",
    "Itemset",
    "Leaf",
    "ModelFormatError",
    "RankedFormula",
    "RenderedFormula",
    "ResourceLimitError",
    "TreefairError",
    "UnstableSet",
    "accuracy",
    "analyze",
    "check_fair",
    "coverage_curve",
    "enumerate_equivalence_classes",
    "flip_set_representatives",
    "gen_itemsets",
    "gen_random_instances",
    "meet",
    "oracle_flags",
    "oracle_is_discriminated",
    "parse_model",
    "predict_batch",
    "predict_ensemble",
    "predict_tree",
    "render_formulas",
    "score_d",
    "score_dtilde",
    "subsumed_by_any",
    "synthesize",
    "synthesize_from_unstable",
    "thresholds_per_feature",
    "top_k_greedy",
]

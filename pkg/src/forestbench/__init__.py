"""forestbench: a random-forest engine and benchmark harness for comparing
tree-ensemble feature-importance estimators (impurity-based, out-of-bag
corrected, permutation, split counts) and probing their finite-sample bias
against leaf size and depth."""

from .data import (
    CLASSIFICATION,
    REGRESSION,
    Dataset,
    FeatureKind,
    SampleSplit,
    draw_sample,
    load_csv,
    one_hot,
    permute_noisy_features,
    read_dataset_csv,
    response_matrix,
    scale_unit_interval,
    write_dataset_csv,
)
from .errors import ConfigurationError, CsvParseError, OutOfBagError
from .evaluate import (
    ExperimentConfig,
    ReplicateResults,
    auc,
    read_report,
    results_from_dict,
    run_experiment,
    write_report,
)
from .forest import (
    Forest,
    ForestParams,
    Sampling,
    forest_from_dict,
    forest_predict,
    forest_to_dict,
    load_forest,
    oob_loss,
    save_forest,
    train_forest,
)
from .generators import (
    GeneratorSpec,
    gen_correlated_surrogate,
    gen_discrete_grid,
    gen_pure_noise,
    gen_strobl,
)
from .importance import (
    METHOD_NAMES,
    ImportanceVector,
    compute_importance,
    forest_mdi,
    mda,
    mdi_classic,
    mdi_covariance,
    mdi_oob,
    naive_oob,
    noise_mass,
    split_count,
)
from .rng import Rng
from .sweeps import (
    ScalingFit,
    SweepTable,
    noise_scaling_probe,
    sweep_depth,
    sweep_leaf_size,
)
from .tree import (
    Node,
    Tree,
    TreeParams,
    best_split,
    collapse_node,
    contribution,
    grow_tree,
    impurity,
    impurity_decrease,
    predict,
    tree_from_dict,
    tree_to_dict,
)

__version__ = "0.1.0"

__all__ = [
    "CLASSIFICATION",
    "REGRESSION",
    "ConfigurationError",
    "CsvParseError",
    "Dataset",
    "ExperimentConfig",
    "FeatureKind",
    "Forest",
    "ForestParams",
    "GeneratorSpec",
    "ImportanceVector",
    "METHOD_NAMES",
    "Node",
    "OutOfBagError",
    "ReplicateResults",
    "Rng",
    "Sampling",
    "SampleSplit",
    "ScalingFit",
    "SweepTable",
    "Tree",
    "TreeParams",
    "auc",
    "best_split",
    "collapse_node",
    "compute_importance",
    "contribution",
    "draw_sample",
    "forest_from_dict",
    "forest_mdi",
    "forest_predict",
    "forest_to_dict",
    "gen_correlated_surrogate",
    "gen_discrete_grid",
    "gen_pure_noise",
    "gen_strobl",
    "grow_tree",
    "impurity",
    "impurity_decrease",
    "load_csv",
    "load_forest",
    "mda",
    "mdi_classic",
    "mdi_covariance",
    "mdi_oob",
    "naive_oob",
    "noise_mass",
    "noise_scaling_probe",
    "one_hot",
    "oob_loss",
    "permute_noisy_features",
    "predict",
    "read_dataset_csv",
    "read_report",
    "response_matrix",
    "results_from_dict",
    "run_experiment",
    "save_forest",
    "scale_unit_interval",
    "split_count",
    "sweep_depth",
    "sweep_leaf_size",
    "train_forest",
    "tree_from_dict",
    "tree_to_dict",
    "write_dataset_csv",
    "write_report",
]

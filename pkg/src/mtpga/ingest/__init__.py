"""Scalar-field ingestion: grids, merge trees, and branch decomposition trees."""

from .grid import ScalarFieldGrid, load_scalar_field, GridParseError
from .merge_tree import (
    MergeTree,
    compute_merge_tree,
    extract_pairs,
    simplify,
    merge_saddles,
    branch_decomposition,
    validate_merge_tree,
)
from .bdt import (
    Bdt,
    normalize,
    preprocess_bdt,
    bdt_to_merge_tree,
    absolute_persistence,
    denormalized_points,
    validate_bdt,
    bdt_to_json_dict,
    bdt_from_json_dict,
    InvalidBdtError,
)

__all__ = [
    "ScalarFieldGrid",
    "load_scalar_field",
    "GridParseError",
    "MergeTree",
    "compute_merge_tree",
    "extract_pairs",
    "simplify",
    "merge_saddles",
    "branch_decomposition",
    "validate_merge_tree",
    "Bdt",
    "normalize",
    "preprocess_bdt",
    "bdt_to_merge_tree",
    "absolute_persistence",
    "denormalized_points",
    "validate_bdt",
    "bdt_to_json_dict",
    "bdt_from_json_dict",
    "InvalidBdtError",
]

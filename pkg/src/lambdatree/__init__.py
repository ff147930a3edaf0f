"""Optimal L(p,1) labelings of trees.

Decide whether a tree admits a labeling of span lam in which adjacent
vertices get labels at least p apart and vertices at distance two get
distinct labels, find the optimal span, and construct witness labelings.
Three interchangeable solver tiers trade simplicity for speed; a
brute-force oracle backs them in the test suite.
"""

from .delta_engine import (
    DeltaTable,
    LabelDomain,
    level_bound,
    vq_base_delta,
)
from .errors import (
    CapExceededError,
    InvariantViolationError,
    LambdaTreeError,
    PartitionPreconditionError,
    TreeParseError,
)
from .labeling import (
    Labeling,
    LambdaBounds,
    brute_force_delta,
    brute_force_lambda,
    lambda_bounds,
    validate_labeling,
)
from .solver import (
    Partition,
    PartitionParams,
    SolveResult,
    decide_lambda,
    extract_labeling,
    partition_vertices,
    quick_checks,
    solve_l21,
    solve_lp1,
)
from .tree_core import (
    PathComponent,
    PreprocessResult,
    RootedTree,
    Tree,
    generate_tree,
    parse_tree,
    path_components,
    preprocess,
    root_at_leaf,
    tree_to_text,
    is_i_major,
)

__version__ = "0.1.0"

__all__ = [
    "Tree",
    "RootedTree",
    "PathComponent",
    "PreprocessResult",
    "parse_tree",
    "tree_to_text",
    "root_at_leaf",
    "path_components",
    "preprocess",
    "is_i_major",
    "generate_tree",
    "Labeling",
    "LambdaBounds",
    "validate_labeling",
    "lambda_bounds",
    "brute_force_lambda",
    "brute_force_delta",
    "LabelDomain",
    "DeltaTable",
    "level_bound",
    "vq_base_delta",
    "Partition",
    "PartitionParams",
    "SolveResult",
    "partition_vertices",
    "quick_checks",
    "decide_lambda",
    "solve_l21",
    "solve_lp1",
    "extract_labeling",
    "LambdaTreeError",
    "TreeParseError",
    "CapExceededError",
    "InvariantViolationError",
    "PartitionPreconditionError",
]

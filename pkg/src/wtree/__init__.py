"""Learning ultrametric trees that approximate 1-Wasserstein distances.

The package fits an ultrametric tree to a discrete semimetric space by
projected gradient descent, regressing the tree's closed-form transport
distance onto measured exact transport distances.  It also ships the exact
solver used for ground truth and the standard tree baselines (quadtree,
Flowtree) plus Sinkhorn.
"""

from .errors import (
    DimensionMismatchError,
    InfeasibleMarginalsError,
    LengthMismatchError,
    NegativeEntryError,
    NonMonotoneTreeError,
    NonSquareError,
    NonzeroDiagonalError,
    NotUltrametricError,
    NumericalError,
    ParseError,
    SinkhornNonConvergence,
    SizeCapError,
    ValidationError,
    WtreeError,
    ZeroExactError,
)
from .exact_ot import TransportResult, exact_wasserstein, sinkhorn
from .metric_core import (
    Distribution,
    PointCloud,
    SemimetricMatrix,
    TrainSample,
    euclidean_matrix,
    mean_relative_error,
    read_distributions_csv,
    read_matrix_csv,
    read_points_csv,
    read_samples_jsonl,
    validate_semimetric,
    write_distributions_csv,
    write_matrix_csv,
    write_points_csv,
    write_samples_jsonl,
)
from .optimizer import (
    TrainConfig,
    TrainState,
    gd_step,
    gradient,
    load_checkpoint,
    loss,
    make_state,
    node_gradient,
    save_checkpoint,
    train,
    train_skip_mst,
)
from .quadtree import (
    Quadtree,
    build_quadtree,
    flowtree_distance,
    quadtree_coupling_entries,
    quadtree_wasserstein,
)
from .synth import (
    RandomTree,
    gen_distributions,
    gen_gaussian_points,
    gen_pair_indices,
    gen_random_tree,
    gen_uniform_points,
    label_samples,
    perturb_matrix,
    tree_metric_distance,
)
from .tree_ot import (
    Coupling,
    l1_embed,
    subtree_masses,
    tree_coupling,
    tree_coupling_entries,
    tree_wasserstein,
)
from .ultra_tree import (
    LcaClasses,
    UltrametricMatrix,
    UltraTree,
    diametrical_tree,
    is_ultrametric,
    lca_classes,
    linfty_shift,
    load_tree,
    project_to_ultrametric,
    save_tree,
    tree_distance,
    tree_from_json,
    tree_to_json,
    tree_to_matrix,
    tree_to_newick,
)

__version__ = "0.1.0"

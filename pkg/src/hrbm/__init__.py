"""Classification RBM with a hierarchical correlated prior over class labels."""
from .config import RunMetrics, TrainConfig
from .hier import EdgeParams, compose_U, hier_gradient, orthogonal_penalty, penalty_gradient, train_hcrbm
from .rbm import RbmParams, class_posterior, cd1_gradient, energy, exact_joint_loglik
from .taxonomy import TaxonomyTree, ancestor_pairs, indicator_matrix, load_tree, parse_tree, path_edges

__version__ = "0.1.0"

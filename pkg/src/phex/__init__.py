"""Probabilistic label-relation graphs compiled to Ising models."""

from .exact import ClampSet, InfeasibleClampError, MarginalTable, exact_hex_marginals, exact_marginals, joint_table
from .graph import (
    EdgeStrength,
    GraphError,
    LabelGraph,
    MECEGroup,
    RelationEdge,
    make_graph,
    normalize_mece,
    strength_from_q,
    strength_from_u,
    validate,
)
from .inference import marginals
from .ising import IsingModel, compile_graph, condition, energy
from .lbp import LBPOptions, predict, run_lbp
from .learning import (
    LinearScorer,
    TrainingInstance,
    finite_difference_check,
    grad_scores,
    grid_search_strength,
    nll_loss,
    train_linear,
)
from .metrics import EvalReport, evaluate
from .synth import SyntheticTaskSpec, build_attribute_graph, build_attribute_task, build_hierarchy_task

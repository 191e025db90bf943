"""Desk-scale synthetic tasks: hierarchy relabeling and attribute zero-shot.

Both generators are fully determined by ``SyntheticTaskSpec.seed``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .graph import EXCLUSION, SUBSUMPTION, EdgeStrength, LabelGraph, MECEGroup, RelationEdge, validate
from .learning import TrainingInstance


@dataclass
class SyntheticTaskSpec:
    seed: int = 0
    n_classes: int = 12
    n_parents: int = 3
    n_attributes: int = 16
    unseen: tuple = ()
    dim: int = 16
    centroid_scale: float = 1.0
    leaf_scale: float = 0.6
    class_scale: float = 0.3
    noise_scale: float = 1.0
    relabel_fraction: float = 0.0
    parent_noise: float = 0.0
    train_per_class: int = 40
    val_per_class: int = 20
    test_per_class: int = 50
    predicates: Optional[list] = None  # k x a, values in [0, 1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["unseen"] = list(self.unseen)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticTaskSpec":
        d = dict(d)
        d["unseen"] = tuple(d.get("unseen", ()))
        return cls(**d)


@dataclass
class Task:
    graph: LabelGraph
    train: list
    val: list
    test: list
    eval_labels: tuple
    spec: SyntheticTaskSpec = field(default=None)


def build_attribute_graph(predicates, u_pos=1.0, u_neg=1.0, class_names=None, attr_names=None) -> LabelGraph:
    """Classes form one MECE group; attribute -> class subsumption where the
    predicate is 1, attribute -- class exclusion where it is 0.

    ``u_pos``/``u_neg`` may be scalars or k x a arrays of per-edge couplings.
    Labels are ordered classes first, then attributes.
    """
    P = np.asarray(predicates)
    if P.ndim != 2:
        raise ValueError("predicate matrix must be 2-D (classes x attributes)")
    if not np.isin(P, (0, 1)).all():
        raise ValueError("predicate entries must be 0 or 1")
    k, a = P.shape
    class_names = list(class_names or [f"class{c}" for c in range(k)])
    attr_names = list(attr_names or [f"attr{j}" for j in range(a)])
    up = np.broadcast_to(np.asarray(u_pos, dtype=float), P.shape)
    un = np.broadcast_to(np.asarray(u_neg, dtype=float), P.shape)
    for j in range(a):
        if P[:, j].all() or not P[:, j].any():
            warnings.warn(f"attribute {attr_names[j]!r} is constant across classes", stacklevel=2)
    edges = []
    for c in range(k):
        for j in range(a):
            attr = k + j
            if P[c, j]:
                edges.append(RelationEdge(SUBSUMPTION, attr, c, EdgeStrength(u=up[c, j])))
            else:
                edges.append(RelationEdge(EXCLUSION, attr, c, EdgeStrength(u=un[c, j])))
    graph = LabelGraph(tuple(class_names + attr_names), tuple(edges), MECEGroup(tuple(range(k))))
    report = validate(graph)
    if not report.ok:
        raise ValueError("; ".join(report.violations))
    return graph


def _hierarchy_graph(n_parents, n_leaves, parent_of):
    labels = [f"parent{p}" for p in range(n_parents)] + [f"leaf{c}" for c in range(n_leaves)]
    edges = []
    one = EdgeStrength(u=1.0)
    for p in range(n_parents):
        for q in range(p + 1, n_parents):
            edges.append(RelationEdge(EXCLUSION, p, q, one))
    for c in range(n_leaves):
        leaf = n_parents + c
        for p in range(n_parents):
            kind = SUBSUMPTION if parent_of[c] == p else EXCLUSION
            edges.append(RelationEdge(kind, p, leaf, one))
    mece = MECEGroup(tuple(range(n_parents, n_parents + n_leaves)))
    return LabelGraph(tuple(labels), tuple(edges), mece)


def build_hierarchy_task(spec: SyntheticTaskSpec) -> Task:
    """Two-level tree of parents over leaf classes.

    A fraction ``relabel_fraction`` of training instances keep only their
    parent label as target; the others carry their leaf label. Validation
    and test targets are always leaves.
    """
    rho = spec.relabel_fraction
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"relabel fraction must lie in [0, 1], got {rho}")
    rng = np.random.default_rng(spec.seed)
    k, P = spec.n_classes, spec.n_parents
    parent_of = np.arange(k) % P
    parent_mu = rng.normal(0.0, spec.centroid_scale, (P, spec.dim))
    leaf_mu = parent_mu[parent_of] + rng.normal(0.0, spec.leaf_scale, (k, spec.dim))
    graph = _hierarchy_graph(P, k, parent_of)

    def draw(per_class):
        cls = np.repeat(np.arange(k), per_class)
        X = leaf_mu[cls] + rng.normal(0.0, spec.noise_scale, (len(cls), spec.dim))
        return cls, X

    cls, X = draw(spec.train_per_class)
    relabel = np.zeros(len(cls), dtype=bool)
    relabel[rng.permutation(len(cls))[: int(round(rho * len(cls)))]] = True
    # coarse annotations occasionally name a wrong parent
    wrong = rng.random(len(cls)) < spec.parent_noise
    shift = rng.integers(1, P, len(cls)) if P > 1 else np.zeros(len(cls), dtype=int)
    given_parent = np.where(wrong, (parent_of[cls] + shift) % P, parent_of[cls])
    train = []
    for c, x, r, gp in zip(cls, X, relabel, given_parent):
        target = int(gp) if r else P + int(c)
        train.append(TrainingInstance(x, ((target, 1),)))
    val = [TrainingInstance(x, ((P + int(c), 1),)) for c, x in zip(*draw(spec.val_per_class))]
    test = [TrainingInstance(x, ((P + int(c), 1),)) for c, x in zip(*draw(spec.test_per_class))]
    return Task(graph, train, val, test, tuple(range(P, P + k)), spec)


def _predicates(spec, rng):
    if spec.predicates is not None:
        M = np.asarray(spec.predicates, dtype=float)
        if M.shape != (spec.n_classes, spec.n_attributes):
            raise ValueError("predicate matrix must be n_classes x n_attributes")
        return M
    # bimodal class-level attribute frequencies, kept away from exactly 0 and 1
    M = rng.beta(0.6, 0.6, (spec.n_classes, spec.n_attributes))
    return np.clip(M, 0.05, 0.95)


def build_attribute_task(spec: SyntheticTaskSpec) -> Task:
    """Zero-shot analogue: unseen classes get no training instances.

    Each instance samples its attributes from the class-level predicate
    frequencies; features are a sum of per-attribute directions plus a
    small class offset and noise. Validation and test sets hold unseen
    classes only.
    """
    rng = np.random.default_rng(spec.seed)
    k, a = spec.n_classes, spec.n_attributes
    unseen = tuple(spec.unseen) or tuple(range(k - 3, k))
    seen = [c for c in range(k) if c not in unseen]
    freq = _predicates(spec, rng)
    binary = (freq >= 0.5).astype(int)
    attr_dir = rng.normal(0.0, spec.centroid_scale, (a, spec.dim))
    class_off = rng.normal(0.0, spec.class_scale, (k, spec.dim))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        graph = build_attribute_graph(binary, u_pos=freq, u_neg=1.0 - freq)

    def draw(classes, per_class):
        cls = np.repeat(np.asarray(classes), per_class)
        attrs = rng.random((len(cls), a)) < freq[cls]
        X = attrs @ attr_dir + class_off[cls] + rng.normal(0.0, spec.noise_scale, (len(cls), spec.dim))
        return cls, X

    train = [TrainingInstance(x, ((int(c), 1),)) for c, x in zip(*draw(seen, spec.train_per_class))]
    val = [TrainingInstance(x, ((int(c), 1),)) for c, x in zip(*draw(unseen, spec.val_per_class))]
    test = [TrainingInstance(x, ((int(c), 1),)) for c, x in zip(*draw(unseen, spec.test_per_class))]
    spec = SyntheticTaskSpec(**{**spec.to_dict(), "unseen": unseen, "predicates": freq.tolist()})
    return Task(graph, train, val, test, unseen, spec)

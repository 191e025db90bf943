"""Compile relation graphs into Ising models and absorb evidence.

Energy convention: ``E(y) = sum J_ij y_i y_j + sum h_i y_i`` and
``p(y) ~ exp(-E(y))`` at unit inverse temperature. Evidence scores ``z``
enter through the shifted fields ``h' = h - z``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import EXCLUSION, SUBSUMPTION, GraphError, LabelGraph, MECEGroup


def pair_energy_exclusion(y1, y2, u):
    return u * y1 * y2 + u * y1 + u * y2


def pair_energy_subsumption(y_parent, y_child, u):
    return -u * y_parent * y_child - u * y_parent + u * y_child


@dataclass(frozen=True, eq=False)
class IsingModel:
    n: int
    couplings: dict = field(default_factory=dict)  # (i, j) with i < j -> J_ij
    fields: np.ndarray = None
    mece: Optional[MECEGroup] = None
    labels: Optional[tuple] = None
    beta: float = 1.0

    def __post_init__(self):
        h = np.zeros(self.n) if self.fields is None else np.asarray(self.fields, dtype=float)
        if h.shape != (self.n,):
            raise ValueError(f"fields must have length {self.n}")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "fields", h)
        object.__setattr__(self, "couplings", dict(sorted(self.couplings.items())))
        if self.beta != 1.0:
            raise ValueError("only beta = 1 is supported")

    def coupling(self, i: int, j: int) -> float:
        return self.couplings.get((min(i, j), max(i, j)), 0.0)

    def coupling_matrix(self) -> np.ndarray:
        J = np.zeros((self.n, self.n))
        for (i, j), v in self.couplings.items():
            J[i, j] = J[j, i] = v
        return J

    def neighbors(self) -> list[list[int]]:
        nbrs = [[] for _ in range(self.n)]
        for i, j in self.couplings:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return nbrs

    def condition(self, z) -> "ConditionedModel":
        return condition(self, z)

    def to_dict(self) -> dict:
        out = {
            "J": [[i, j, float(v)] for (i, j), v in self.couplings.items()],
            "h": [float(v) for v in self.fields],
        }
        if self.labels is not None:
            out["labels"] = list(self.labels)
        if self.mece is not None:
            out["mece"] = list(self.mece.members)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "IsingModel":
        h = [float(v) for v in data["h"]]
        J = {}
        for i, j, v in data["J"]:
            i, j = int(i), int(j)
            J[(min(i, j), max(i, j))] = float(v)
        mece = MECEGroup(tuple(data["mece"])) if data.get("mece") else None
        labels = tuple(data["labels"]) if data.get("labels") else None
        return cls(len(h), J, np.array(h), mece, labels)


@dataclass(frozen=True, eq=False)
class ConditionedModel:
    base: IsingModel
    z: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=float)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def mece(self):
        return self.base.mece

    @property
    def fields(self) -> np.ndarray:
        """Effective fields ``h' = h - z``."""
        return self.base.fields - self.z

    def coupling(self, i, j):
        return self.base.coupling(i, j)


def compile_graph(graph: LabelGraph) -> IsingModel:
    """Accumulate per-edge Ising coefficients.

    Exclusion (a, b) adds ``+u`` to J_ab, h_a and h_b. Subsumption
    parent -> child adds ``-u`` to J, ``-u`` to h_parent, ``+u`` to h_child.
    """
    if graph.has_hard_edges:
        raise GraphError("hard-edge unsupported in compile")
    if graph.mece is not None:
        inside = set(graph.mece.members)
        if any(e.a in inside and e.b in inside for e in graph.edges):
            raise GraphError("graph has edges inside its MECE group; run normalize_mece first")
    J = {}
    h = np.zeros(graph.n)
    for e in graph.edges:
        u = e.u
        key = e.pair
        if key in J:
            raise GraphError(f"duplicate edge on pair {key}")
        if e.kind == EXCLUSION:
            J[key] = u
            h[e.a] += u
            h[e.b] += u
        elif e.kind == SUBSUMPTION:
            J[key] = -u
            h[e.a] -= u
            h[e.b] += u
        else:
            raise GraphError(f"unknown edge kind {e.kind!r}")
    return IsingModel(graph.n, J, h, graph.mece, graph.labels)


def condition(model: IsingModel, z) -> ConditionedModel:
    z = np.asarray(z, dtype=float)
    if z.shape != (model.n,):
        raise ValueError(f"evidence has length {z.shape}, model has {model.n} labels")
    if not np.all(np.isfinite(z)):
        raise ValueError("evidence scores must be finite")
    return ConditionedModel(model, z)


def energy(model: ConditionedModel, y) -> float:
    y = np.asarray(y, dtype=float)
    if y.shape != (model.n,):
        raise ValueError(f"configuration has length {y.shape}, model has {model.n} labels")
    e = float(np.dot(model.fields, y))
    for (i, j), v in model.base.couplings.items():
        e += v * y[i] * y[j]
    return e

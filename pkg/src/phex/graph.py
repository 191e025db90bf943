"""Probabilistic hierarchy-and-exclusion label graphs.

A graph holds an ordered list of label names, typed relation edges between
them, and at most one mutually-exclusive-collectively-exhaustive (MECE)
group. Edge strength is stored as an Ising coupling ``u`` with the
relation factor ``q = exp(-4u)``; ``hard=True`` means ``q = 0``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

EXCLUSION = "exclusion"
SUBSUMPTION = "subsumption"
KINDS = (EXCLUSION, SUBSUMPTION)

MAX_U = 16.0


class GraphError(ValueError):
    """Raised for structurally invalid graphs or graph files."""


def strength_from_u(u: float) -> float:
    """Relation factor ``q`` for an Ising coupling ``u``."""
    u = float(u)
    if not math.isfinite(u) or u < 0:
        raise ValueError(f"coupling u must be finite and >= 0, got {u!r}")
    return math.exp(-4.0 * u)


def strength_from_q(q: float, allow_hard: bool = False) -> float:
    """Inverse of :func:`strength_from_u`.

    ``q = 0`` is only accepted with ``allow_hard=True`` and returns ``inf``.
    """
    q = float(q)
    if math.isnan(q) or q > 1.0:
        raise ValueError(f"relation factor q must lie in (0, 1], got {q!r}")
    if q <= 0.0:
        if allow_hard and q == 0.0:
            return math.inf
        raise ValueError(f"relation factor q must be > 0 (got {q!r}); pass allow_hard for q=0")
    if q == 1.0:
        return 0.0
    # log1p keeps precision for q close to 1
    return -math.log1p(q - 1.0) / 4.0 if q > 0.5 else -math.log(q) / 4.0


@dataclass(frozen=True)
class EdgeStrength:
    u: float = 0.0
    hard: bool = False

    def __post_init__(self):
        if self.hard:
            object.__setattr__(self, "u", math.inf)
            return
        u = float(self.u)
        if not math.isfinite(u) or u < 0:
            raise ValueError(f"edge coupling must be finite and >= 0, got {self.u!r}")
        if u > MAX_U:
            warnings.warn(f"edge coupling {u} capped at {MAX_U}", stacklevel=3)
            u = MAX_U
        object.__setattr__(self, "u", u)

    @classmethod
    def from_q(cls, q: float) -> "EdgeStrength":
        if q == 0:
            return cls(hard=True)
        return cls(u=strength_from_q(q))

    @property
    def q(self) -> float:
        return 0.0 if self.hard else strength_from_u(self.u)


@dataclass(frozen=True)
class RelationEdge:
    """A typed relation between two label ids.

    For subsumption ``a`` is the parent and ``b`` the child: ``y_b = 1``
    should imply ``y_a = 1``. Exclusion is symmetric in ``a`` and ``b``.
    """

    kind: str
    a: int
    b: int
    strength: EdgeStrength = field(default_factory=EdgeStrength)

    @property
    def pair(self) -> tuple[int, int]:
        return (min(self.a, self.b), max(self.a, self.b))

    @property
    def u(self) -> float:
        return self.strength.u

    @property
    def hard(self) -> bool:
        return self.strength.hard

    def with_strength(self, strength: EdgeStrength) -> "RelationEdge":
        return replace(self, strength=strength)


@dataclass(frozen=True)
class MECEGroup:
    members: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))

    @property
    def k(self) -> int:
        return len(self.members)

    def state_of(self, label: int) -> Optional[int]:
        try:
            return self.members.index(label)
        except ValueError:
            return None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


@dataclass(frozen=True, eq=False)
class LabelGraph:
    labels: tuple[str, ...]
    edges: tuple[RelationEdge, ...] = ()
    mece: Optional[MECEGroup] = None

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "edges", tuple(self.edges))

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise GraphError(f"unknown label {name!r}") from None

    @property
    def has_hard_edges(self) -> bool:
        return any(e.hard for e in self.edges)

    def with_uniform(self, u: float) -> "LabelGraph":
        """Same structure with every edge set to coupling ``u``."""
        s = EdgeStrength(u=u)
        return replace(self, edges=tuple(e.with_strength(s) for e in self.edges))

    def scaled(self, factor: float) -> "LabelGraph":
        """Multiply every finite per-edge coupling by a global factor."""
        if factor < 0:
            raise ValueError("rescaling factor must be >= 0")
        edges = []
        for e in self.edges:
            if e.hard:
                edges.append(e)
            else:
                edges.append(e.with_strength(EdgeStrength(u=e.u * factor)))
        return replace(self, edges=tuple(edges))

    def hardened(self) -> "LabelGraph":
        s = EdgeStrength(hard=True)
        return replace(self, edges=tuple(e.with_strength(s) for e in self.edges))

    def neighbors(self, i: int) -> list[int]:
        out = []
        for e in self.edges:
            if e.a == i:
                out.append(e.b)
            elif e.b == i:
                out.append(e.a)
        return out

    def equals(self, other: "LabelGraph") -> bool:
        return (
            self.labels == other.labels
            and self.edges == other.edges
            and self.mece == other.mece
        )

    # -- file format ---------------------------------------------------

    def to_dict(self) -> dict:
        edges = []
        for e in self.edges:
            if e.kind == EXCLUSION:
                d = {"kind": EXCLUSION, "a": self.labels[e.a], "b": self.labels[e.b]}
            else:
                d = {"kind": SUBSUMPTION, "parent": self.labels[e.a], "child": self.labels[e.b]}
            if e.hard:
                d["hard"] = True
            else:
                d["u"] = e.u
            edges.append(d)
        out = {"labels": list(self.labels), "edges": edges}
        if self.mece is not None:
            out["mece"] = {"members": [self.labels[m] for m in self.mece.members]}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LabelGraph":
        try:
            labels = [str(s) for s in data["labels"]]
        except (KeyError, TypeError):
            raise GraphError("graph document needs a 'labels' list") from None
        ids = {}
        for i, name in enumerate(labels):
            ids.setdefault(name, i)

        def lookup(name):
            if name not in ids:
                raise GraphError(f"edge refers to unknown label {name!r}")
            return ids[name]

        edges = []
        for raw in data.get("edges", []):
            kind = raw.get("kind")
            if kind == EXCLUSION:
                a, b = lookup(raw.get("a")), lookup(raw.get("b"))
            elif kind == SUBSUMPTION:
                a, b = lookup(raw.get("parent")), lookup(raw.get("child"))
            else:
                raise GraphError(f"unknown edge kind {kind!r}")
            given = [k for k in ("u", "q", "hard") if k in raw]
            if len(given) != 1:
                raise GraphError(f"edge {raw!r} needs exactly one of u/q/hard")
            try:
                if given[0] == "u":
                    strength = EdgeStrength(u=float(raw["u"]))
                elif given[0] == "q":
                    strength = EdgeStrength.from_q(float(raw["q"]))
                else:
                    if raw["hard"] is not True:
                        raise GraphError("'hard' must be true when present")
                    strength = EdgeStrength(hard=True)
            except ValueError as exc:
                raise GraphError(str(exc)) from None
            edges.append(RelationEdge(kind, a, b, strength))
        mece = None
        if data.get("mece") is not None:
            mece = MECEGroup(tuple(lookup(m) for m in data["mece"]["members"]))
        graph = cls(tuple(labels), tuple(edges), mece)
        report = validate(graph, allow_mece_exclusions=True)
        if not report.ok:
            raise GraphError("; ".join(report.violations))
        return graph

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path) -> "LabelGraph":
        with open(Path(path), encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as exc:
                raise GraphError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def validate(graph: LabelGraph, allow_mece_exclusions: bool = False) -> ValidationReport:
    """Check structural invariants, returning every violation found."""
    problems = []
    seen_names = set()
    for name in graph.labels:
        if not name:
            problems.append("empty label name")
        elif name in seen_names:
            problems.append(f"duplicate label {name!r}")
        seen_names.add(name)

    n = graph.n
    pairs = set()
    for e in graph.edges:
        if e.kind not in KINDS:
            problems.append(f"unknown edge kind {e.kind!r}")
            continue
        if not (0 <= e.a < n and 0 <= e.b < n):
            problems.append(f"unknown label in edge ({e.a}, {e.b})")
            continue
        if e.a == e.b:
            problems.append(f"self-edge on {graph.labels[e.a]!r}")
            continue
        if e.pair in pairs:
            problems.append(
                f"duplicate pair ({graph.labels[e.pair[0]]!r}, {graph.labels[e.pair[1]]!r})"
            )
        pairs.add(e.pair)

    if graph.mece is not None:
        members = graph.mece.members
        if len(members) < 2:
            problems.append("MECE group needs at least 2 members")
        if len(set(members)) != len(members):
            problems.append("MECE group has repeated members")
        if any(not 0 <= m < n for m in members):
            problems.append("MECE group refers to unknown label")
        inside = set(members)
        for e in graph.edges:
            if e.a in inside and e.b in inside:
                if e.kind == SUBSUMPTION:
                    problems.append(
                        f"subsumption inside MECE group ({graph.labels[e.a]!r} -> {graph.labels[e.b]!r})"
                    )
                elif not allow_mece_exclusions:
                    problems.append(
                        f"exclusion inside MECE group ({graph.labels[e.a]!r}, {graph.labels[e.b]!r})"
                    )
    return ValidationReport(tuple(problems))


def normalize_mece(graph: LabelGraph) -> LabelGraph:
    """Drop exclusion edges made redundant by the MECE group."""
    if graph.mece is None:
        return graph
    inside = set(graph.mece.members)
    kept = []
    for e in graph.edges:
        both = e.a in inside and e.b in inside
        if both and e.kind == SUBSUMPTION:
            raise GraphError(
                f"subsumption {graph.labels[e.a]!r} -> {graph.labels[e.b]!r} contradicts the MECE group"
            )
        if both:
            continue
        kept.append(e)
    return replace(graph, edges=tuple(kept))


def make_graph(
    labels: Sequence[str],
    exclusions: Iterable[tuple] = (),
    subsumptions: Iterable[tuple] = (),
    mece: Optional[Sequence[str]] = None,
    u: float = 1.0,
) -> LabelGraph:
    """Build and validate a graph from label names.

    Relation tuples are ``(a, b)`` or ``(a, b, u)``; for subsumption the
    first name is the parent. ``u="hard"`` gives a hard edge.
    """
    ids = {name: i for i, name in enumerate(labels)}

    def strength(rest):
        val = rest[0] if rest else u
        if val == "hard":
            return EdgeStrength(hard=True)
        return EdgeStrength(u=val)

    def lookup(name):
        if name not in ids:
            raise GraphError(f"unknown label {name!r}")
        return ids[name]

    edges = []
    for a, b, *rest in exclusions:
        edges.append(RelationEdge(EXCLUSION, lookup(a), lookup(b), strength(rest)))
    for p, c, *rest in subsumptions:
        edges.append(RelationEdge(SUBSUMPTION, lookup(p), lookup(c), strength(rest)))
    group = MECEGroup(tuple(lookup(m) for m in mece)) if mece is not None else None
    graph = LabelGraph(tuple(labels), tuple(edges), group)
    report = validate(graph, allow_mece_exclusions=True)
    if not report.ok:
        raise GraphError("; ".join(report.violations))
    return graph


# Absolute and probabilistic pairwise factors over y in {-1, +1}.

def hard_factor(kind: Optional[str], y1: int, y2: int) -> float:
    if kind == EXCLUSION:
        return 0.0 if (y1, y2) == (1, 1) else 1.0
    if kind == SUBSUMPTION:
        return 0.0 if (y1, y2) == (-1, 1) else 1.0
    return 1.0


def soft_factor(kind: str, y1: int, y2: int, q: float) -> float:
    illegal = (1, 1) if kind == EXCLUSION else (-1, 1)
    return q if (y1, y2) == illegal else 1.0

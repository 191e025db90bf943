import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import random_graph, random_mece_tree
from phex.graph import (
    EXCLUSION,
    SUBSUMPTION,
    EdgeStrength,
    GraphError,
    LabelGraph,
    MECEGroup,
    RelationEdge,
    hard_factor,
    make_graph,
    normalize_mece,
    soft_factor,
    strength_from_q,
    strength_from_u,
    validate,
)

STRENGTH_ROWS = [(0, 1.0), (0.1, 0.67), (0.3, 0.30), (0.5, 0.14), (0.7, 0.06), (1.0, 0.02), (1.5, 0.002)]


# --- strength conversion --------------------------------------------------


def test_u_zero_is_q_one():
    assert strength_from_u(0) == 1.0


@pytest.mark.parametrize("u,q", STRENGTH_ROWS)
def test_strength_q_row(u, q):
    assert abs(strength_from_u(u) - q) <= 0.005


def test_q_half_closed_form():
    assert strength_from_q(0.5) == pytest.approx(math.log(2) / 4, rel=1e-15)
    assert abs(strength_from_q(0.5) - 0.17329) < 1e-5


def test_q_one_and_table_inverse():
    assert strength_from_q(1.0) == 0.0
    assert abs(strength_from_q(0.67) - 0.1) <= 0.005


@pytest.mark.parametrize("u", [-0.1, math.inf, math.nan])
def test_bad_u_rejected(u):
    with pytest.raises(ValueError):
        strength_from_u(u)


@pytest.mark.parametrize("q", [1.5, -0.2, math.nan])
def test_bad_q_rejected(q):
    with pytest.raises(ValueError):
        strength_from_q(q)


def test_q_zero_needs_opt_in():
    with pytest.raises(ValueError):
        strength_from_q(0.0)
    assert strength_from_q(0.0, allow_hard=True) == math.inf
    assert EdgeStrength.from_q(0.0).hard


@given(st.floats(0.0, 16.0))
def test_round_trip(u):
    # q is stored as a double, so below u ~ 1e-4 only absolute precision survives
    back = strength_from_q(strength_from_u(u))
    assert back == pytest.approx(u, rel=1e-12, abs=1e-16)


@pytest.mark.parametrize("u", [1e-3, 0.1, 0.17, 1.0, 7.3, 16.0])
def test_round_trip_relative(u):
    assert abs(strength_from_q(strength_from_u(u)) - u) <= 1e-12 * u


def test_edge_strength_invariants():
    assert EdgeStrength(u=0.5).q == pytest.approx(math.exp(-2))
    assert EdgeStrength(hard=True).q == 0.0
    with pytest.raises(ValueError):
        EdgeStrength(u=-1)
    with pytest.warns(UserWarning):
        s = EdgeStrength(u=40.0)
    assert s.u == 16.0


# --- mixture identity -----------------------------------------------------


@given(st.floats(0.0, 1.0), st.sampled_from([EXCLUSION, SUBSUMPTION]))
def test_mixture_identity(q, kind):
    for y1 in (-1, 1):
        for y2 in (-1, 1):
            mix = q * hard_factor(None, y1, y2) + (1 - q) * hard_factor(kind, y1, y2)
            assert soft_factor(kind, y1, y2, q) == mix


# --- validation -----------------------------------------------------------


def _g(labels, edges, mece=None):
    return LabelGraph(tuple(labels), tuple(edges), mece)


def test_self_edge_reported():
    g = _g(["dog"], [RelationEdge(EXCLUSION, 0, 0, EdgeStrength(1.0))])
    rep = validate(g)
    assert not rep.ok
    assert any("self-edge" in v for v in rep.violations)


def test_duplicate_pair_reported():
    s = EdgeStrength(1.0)
    g = _g(["dog", "cat"], [RelationEdge(EXCLUSION, 0, 1, s), RelationEdge(SUBSUMPTION, 1, 0, s)])
    assert any("duplicate pair" in v for v in validate(g).violations)


def test_chain_is_valid():
    g = make_graph(["animal", "dog", "cat"], exclusions=[("dog", "cat")], subsumptions=[("animal", "dog")])
    assert validate(g).ok


def test_other_violations():
    s = EdgeStrength(1.0)
    g = _g(["a", "a", ""], [RelationEdge(EXCLUSION, 0, 7, s)])
    v = " | ".join(validate(g).violations)
    assert "duplicate label" in v and "empty label" in v and "unknown label" in v
    g = _g(["a", "b"], [RelationEdge(EXCLUSION, 0, 1, s)], MECEGroup((0, 1)))
    assert any("exclusion inside MECE" in x for x in validate(g).violations)
    assert validate(g, allow_mece_exclusions=True).ok
    assert not validate(_g(["a"], [], MECEGroup((0,)))).ok


@given(st.integers(0, 10_000), st.integers(2, 9), st.integers(0, 4))
def test_constructed_graphs_validate(seed, n, k):
    rng = np.random.default_rng(seed)
    k = min(k, n) if k >= 2 else 0
    assert validate(random_graph(rng, n, mece_k=k)).ok


@given(st.integers(0, 10_000), st.integers(2, 5), st.integers(0, 4))
def test_mece_trees_validate(seed, k, m):
    assert validate(random_mece_tree(np.random.default_rng(seed), k, m)).ok


# --- MECE normalization ---------------------------------------------------


def test_normalize_drops_member_exclusion():
    g = make_graph(["dog", "cat"], exclusions=[("dog", "cat")], mece=["dog", "cat"])
    assert normalize_mece(g).edges == ()


def test_normalize_keeps_outside_edge():
    g = make_graph(["dog", "cat", "car"], exclusions=[("dog", "car")], mece=["dog", "cat"])
    assert normalize_mece(g).edges == g.edges


def test_normalize_rejects_member_subsumption():
    g = _g(["dog", "cat"], [RelationEdge(SUBSUMPTION, 0, 1, EdgeStrength(1.0))], MECEGroup((0, 1)))
    with pytest.raises(GraphError):
        normalize_mece(g)


@given(st.integers(0, 10_000), st.integers(3, 8))
def test_normalize_idempotent(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, mece_k=3)
    extra = [RelationEdge(EXCLUSION, a, b, EdgeStrength(0.5)) for a, b in ((0, 1), (1, 2)) if rng.random() < 0.7]
    g = LabelGraph(g.labels, g.edges + tuple(extra), g.mece)
    once = normalize_mece(g)
    assert normalize_mece(once).equals(once)
    inside = {0, 1, 2}
    assert all(not (e.a in inside and e.b in inside) for e in once.edges)


# --- file format ----------------------------------------------------------


@given(st.integers(0, 10_000), st.integers(2, 8))
def test_json_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, mece_k=2 if n > 3 else 0)
    edges = list(g.edges)
    if edges:
        edges[0] = edges[0].with_strength(EdgeStrength(hard=True))
    g = LabelGraph(g.labels, tuple(edges), g.mece)
    back = LabelGraph.from_dict(json.loads(g.dumps()))
    assert back.equals(g)


def test_json_q_and_errors():
    doc = {
        "labels": ["animal", "dog"],
        "edges": [{"kind": "subsumption", "parent": "animal", "child": "dog", "q": 0.5}],
    }
    g = LabelGraph.from_dict(doc)
    assert g.edges[0].u == pytest.approx(math.log(2) / 4)
    assert (g.edges[0].a, g.edges[0].b) == (0, 1)
    bad = [
        {"labels": ["a"], "edges": [{"kind": "exclusion", "a": "a", "b": "zzz", "u": 1}]},
        {"labels": ["a", "b"], "edges": [{"kind": "exclusion", "a": "a", "b": "b"}]},
        {"labels": ["a", "b"], "edges": [{"kind": "exclusion", "a": "a", "b": "b", "u": 1, "q": 0.5}]},
        {"labels": ["a", "b"], "edges": [{"kind": "other", "a": "a", "b": "b", "u": 1}]},
        {"labels": ["a", "b"], "edges": [{"kind": "exclusion", "a": "a", "b": "b", "q": 2}]},
        {"edges": []},
    ]
    for d in bad:
        with pytest.raises(GraphError):
            LabelGraph.from_dict(d)


def test_rescaling_and_uniform():
    g = make_graph(["a", "b", "c"], exclusions=[("a", "b", 0.4)], subsumptions=[("a", "c", "hard")])
    assert g.scaled(2.5).edges[0].u == pytest.approx(1.0)
    assert g.scaled(2.5).edges[1].hard
    assert all(e.u == 0.3 and not e.hard for e in g.with_uniform(0.3).edges)
    assert all(e.hard for e in g.hardened().edges)

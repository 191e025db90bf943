import numpy as np
import pytest

from phex.experiments import sweep_task
from phex.graph import EXCLUSION, SUBSUMPTION, LabelGraph
from phex.learning import LinearScorer, accuracy, train_linear
from phex.metrics import evaluate, topk_hit
from phex.synth import SyntheticTaskSpec, build_attribute_graph, build_attribute_task, build_hierarchy_task


# --- attribute graph ------------------------------------------------------


def test_attribute_graph_edges():
    P = np.array([[1], [0]])  # furry: bear yes, fish no
    g = build_attribute_graph(P, u_pos=0.5, u_neg=0.7, class_names=["bear", "fish"], attr_names=["furry"])
    kinds = {(g.labels[e.a], g.labels[e.b]): (e.kind, e.u) for e in g.edges}
    assert kinds[("furry", "bear")] == (SUBSUMPTION, 0.5)
    assert kinds[("furry", "fish")] == (EXCLUSION, 0.7)
    assert g.mece.members == (0, 1)


def test_attribute_graph_no_attributes():
    g = build_attribute_graph(np.zeros((2, 0), dtype=int))
    assert g.edges == () and g.mece.members == (0, 1)


def test_attribute_graph_validation():
    with pytest.warns(UserWarning, match="constant"):
        build_attribute_graph(np.array([[1, 0], [1, 1]]))
    with pytest.raises(ValueError):
        build_attribute_graph(np.array([[0.5, 1], [0, 1]]))
    with pytest.raises(ValueError):
        build_attribute_graph(np.array([1, 0]))


# --- hierarchy task -------------------------------------------------------


def small_hierarchy(rho, seed=0):
    return SyntheticTaskSpec(
        seed=seed, n_classes=6, n_parents=2, dim=8, relabel_fraction=rho, train_per_class=15, val_per_class=5, test_per_class=10
    )


def test_rho_zero_all_leaves():
    task = build_hierarchy_task(small_hierarchy(0.0))
    assert all(t >= 2 for inst in task.train for t, _ in inst.targets)


def test_rho_one_no_leaves_but_above_chance():
    task = build_hierarchy_task(small_hierarchy(1.0))
    assert all(t < 2 for inst in task.train for t, _ in inst.targets)
    g = task.graph.with_uniform(1.0)
    fitted = train_linear(LinearScorer.zeros(g.n, 8), task.train, g, lr=0.5, epochs=15)
    acc = accuracy(fitted, g, task.test, task.eval_labels)
    assert acc > 1 / 6


def test_hierarchy_deterministic():
    a = build_hierarchy_task(small_hierarchy(0.5, seed=4))
    b = build_hierarchy_task(small_hierarchy(0.5, seed=4))
    assert a.graph.equals(b.graph)
    for xa, xb in zip(a.train + a.test, b.train + b.test):
        np.testing.assert_array_equal(xa.x, xb.x)
        assert xa.targets == xb.targets
    assert sum(inst.targets[0][0] < 2 for inst in a.train) == 45


@pytest.mark.parametrize("rho", [-0.1, 1.5])
def test_rho_out_of_range(rho):
    with pytest.raises(ValueError):
        build_hierarchy_task(small_hierarchy(rho))


def test_hierarchy_graph_shape():
    g = build_hierarchy_task(small_hierarchy(0.0)).graph
    assert g.labels[:2] == ("parent0", "parent1")
    subs = [(e.a, e.b) for e in g.edges if e.kind == SUBSUMPTION]
    assert sorted(subs) == [(0, 2), (0, 4), (0, 6), (1, 3), (1, 5), (1, 7)]


# --- attribute task -------------------------------------------------------


def test_unseen_classes_have_no_training_data():
    spec = SyntheticTaskSpec(seed=1, n_classes=6, n_attributes=5, unseen=(4, 5), train_per_class=5, val_per_class=3, test_per_class=4)
    task = build_attribute_task(spec)
    train_classes = {inst.targets[0][0] for inst in task.train}
    assert train_classes == {0, 1, 2, 3}
    assert {inst.targets[0][0] for inst in task.test} == {4, 5}
    assert task.eval_labels == (4, 5)
    again = build_attribute_task(spec)
    np.testing.assert_array_equal(task.test[3].x, again.test[3].x)


def test_spec_round_trip():
    spec = SyntheticTaskSpec(seed=3, unseen=(1, 2), predicates=[[0.1, 0.9]])
    assert SyntheticTaskSpec.from_dict(spec.to_dict()) == spec


# --- metrics --------------------------------------------------------------


def test_perfect_marginals():
    rows = np.eye(4)
    rep = evaluate(rows, [0, 1, 2, 3], range(4))
    assert rep.top1 == rep.top5 == rep.per_class_mean == 1.0


def test_uniform_marginals_expected_ties():
    rows = [np.full(10, 0.1)] * 500
    truths = [i % 10 for i in range(500)]
    rep = evaluate(rows, truths, range(10), ties="expected")
    assert rep.top1 == pytest.approx(0.1) and rep.top5 == pytest.approx(0.5)
    low = evaluate(rows, truths, range(10))
    assert low.top1 == pytest.approx(0.1) and low.top5 == pytest.approx(0.5)


def test_third_ranked_truth():
    rep = evaluate([[0.5, 0.3, 0.2, 0.0, 0.0, 0.0]], [2], range(6))
    assert rep.top1 == 0.0 and rep.top5 == 1.0


def test_per_class_mean_unweighted():
    rows = [[1, 0], [1, 0], [1, 0], [0, 1]]
    rep = evaluate(rows, [0, 0, 1, 1], [0, 1])
    assert rep.class_accuracy == {0: 1.0, 1: 0.5}
    assert rep.per_class_mean == 0.75 and rep.top1 == 0.75
    assert rep.class_counts == {0: 2, 1: 2}


def test_topk_tie_rules():
    s = np.array([0.2, 0.5, 0.5, 0.5])
    assert topk_hit(s, 3, range(4), 2, "low") == 0.0
    assert topk_hit(s, 3, range(4), 2, "expected") == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        topk_hit(s, 3, range(4), 1, "random")


# --- sweep ----------------------------------------------------------------


def test_u_zero_equals_independent_baseline():
    task = build_hierarchy_task(small_hierarchy(0.5, seed=2))
    kw = {"lr": 0.5, "epochs": 4, "batch_size": 8}
    g0 = task.graph.with_uniform(0.0)
    edgeless = LabelGraph(task.graph.labels, (), task.graph.mece)
    a = train_linear(LinearScorer.zeros(g0.n, 8), task.train, g0, **kw)
    b = train_linear(LinearScorer.zeros(g0.n, 8), task.train, edgeless, **kw)
    np.testing.assert_allclose(a.W, b.W, atol=1e-12)
    out = sweep_task(task, [0.0, 1.0], train_kwargs=kw)
    assert out.row(0.0).test.top1 == accuracy(b, edgeless, task.test, task.eval_labels)
    assert [r.u for r in out.rows] == [0.0, 1.0, 12.0] and out.rows[-1].hard_limit
    assert out.to_csv().count("\n") == 4

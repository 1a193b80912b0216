import math
import os

import pytest

import graphdpo as g

DATA = os.path.join(os.path.dirname(__file__), os.pardir, "data")


def neg_log_sigmoid(x):
    return math.log1p(math.exp(-x))


def test_pair_reduces_to_dpo():
    graph = g.build_from_labels([1.0, 0.0])
    assert g.graph_loss([0.7, -0.4], graph) == pytest.approx(neg_log_sigmoid(1.1), abs=1e-12)


def test_layered_matches_naive():
    graph = g.build_from_labels([2, 0, 1, 1, 0, 2])
    scores = [0.3, -1.2, 0.5, 0.1, 2.0, -0.7]
    assert g.graph_loss(scores, graph) == pytest.approx(g.graph_loss_naive(scores, graph), abs=1e-12)


def test_graph_structure():
    graph = g.build_from_labels([1, 1, 0, 0])
    assert graph.classes == [[0, 1], [2, 3]]
    assert graph.edge_count() == 4
    assert graph.edge(0, 2) and not graph.edge(0, 1)
    assert graph.violations() == []


def test_cycle_raises():
    with pytest.raises(g.CyclicPreference):
        g.build_from_edges(2, [(0, 1), (1, 0)])
    with pytest.raises(g.GraphDPOError):
        g.build_from_labels([])


def test_approximate_layering_warns():
    graph, warnings = g.build_from_edges(3, [(0, 1)], approximate=True)
    assert graph.num_classes == 2
    assert warnings


def test_gradients_pass_finite_differences():
    graph = g.build_from_labels([2, 1, 1, 0])
    scores = [0.2, -0.3, 0.9, 0.4]
    grad, gt = g.grad_total(scores, graph)
    assert gt is None

    def f(x):
        return g.total_loss(x, graph)

    assert g.finite_diff_check(f, scores, grad) < 1e-5


def test_anchor_gradient_on_tied_pair():
    graph = g.build_from_labels([0.0, 0.0])
    _, gt = g.grad_total([0.0, 0.0], graph, gt_score=0.0, anchor_from_class=0, lambda_gt=1.0)
    assert gt == pytest.approx(-2.0 / 3.0, abs=1e-12)


def test_tied_batch_contrast():
    tied = g.build_from_labels([1, 1, 1])
    grad, _ = g.grad_total([0.4, -0.1, 0.9], tied)
    assert grad == [0.0, 0.0, 0.0]
    loss, pro_grad = g.pro_listmle([0.0, 0.0, 0.0], [1, 1, 1])
    assert loss == pytest.approx(math.log(6.0), abs=1e-12)
    assert any(v != 0.0 for v in g.pro_listmle([0.4, -0.1, 0.9], [1, 1, 1])[1])


def test_schedule_endpoints():
    assert g.lambda_gt(0, 100) == 2.5
    assert g.lambda_gt(100, 100) == 1.0


def test_prompt_losses_from_jsonl():
    rows = g.prompt_losses(os.path.join(DATA, "k2.jsonl"), beta=1.0)
    assert len(rows) == 1
    assert rows[0]["prompt_id"] == "p0"
    assert rows[0]["graph_loss"] == pytest.approx(0.313262, abs=1e-6)


def test_train_synthetic_is_deterministic():
    a = g.train_synthetic(prompts=20, responses=8, levels=4, steps=20, batch=8)
    b = g.train_synthetic(prompts=20, responses=8, levels=4, steps=20, batch=8)
    for x, y in zip(a, b):
        assert (x["step"], x["top1"], x["tau"], x["kl"]) == (y["step"], y["top1"], y["tau"], y["kl"])
    assert math.isnan(a[0]["loss"])
    assert [m["step"] for m in a] == [0, 10, 20]
    with pytest.raises(g.InvalidConfig):
        g.train_synthetic(objective="nope", steps=1)

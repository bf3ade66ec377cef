import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from nkdcd import numgrad as ng
from nkdcd.loss import PenaltyKind, evaluate, group_norms, j1_graph, penalty
from nkdcd.model import LagStack, graph_forward, param_nodes


@pytest.fixture
def hand_stack():
    W = np.zeros((2, 2, 2))
    W[0, 0, 0] = 3.0
    W[1, 0, 0] = 4.0
    W[1, 0, 1] = 1.0
    return LagStack(W, 2, 1)


@pytest.mark.parametrize("kind, expected", [("ulg", 6.0), ("ilg", 8.0), ("hlg", 11.0)])
def test_hand_computed_penalties(hand_stack, kind, expected):
    assert penalty(hand_stack, kind) == pytest.approx(expected)
    assert oracles.penalty(hand_stack, kind) == pytest.approx(expected)


def test_hlg_group_norms_are_suffix_norms(hand_stack):
    g = group_norms(hand_stack, "hlg")
    assert g[0, 0, 0] == pytest.approx(5.0)
    assert g[1, 0, 0] == pytest.approx(4.0)
    assert g[0, 0, 1] == pytest.approx(1.0)


def test_parse_penalty_kind():
    assert PenaltyKind.parse("ILG") is PenaltyKind.ILG
    with pytest.raises(ValueError):
        PenaltyKind.parse("lasso")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 3), st.integers(1, 3),
       st.floats(-5, 5))
def test_penalty_matches_oracle_and_is_homogeneous(seed, L, n, N, c):
    W = np.random.default_rng(seed).normal(size=(L, n * N, n * N))
    stack = LagStack(W, n, N)
    for kind in ("ulg", "hlg", "ilg"):
        p = penalty(stack, kind)
        assert p == pytest.approx(oracles.penalty(stack, kind), rel=1e-10)
        assert penalty(LagStack(c * W, n, N), kind) == pytest.approx(abs(c) * p, rel=1e-10, abs=1e-12)


def test_j1_matches_loop_oracle(small_model, small_panel):
    bd = evaluate(small_model, small_panel, "ilg", 0.5)
    terms = oracles.j1_terms(small_model, small_panel)
    got = (bd.recon_autoencoder, bd.lifted_var, bd.nar_base, bd.nar_autoencoded)
    np.testing.assert_allclose(got, terms, rtol=1e-10)
    assert bd.penalty == pytest.approx(0.5 * oracles.penalty(small_model.lags, "ilg"))
    assert bd.total == pytest.approx(sum(terms) + bd.penalty)


def test_j1_graph_on_all_targets_equals_full_loss_minus_burn_in(small_model, small_panel):
    # the tape version only counts reconstruction at target steps
    targets = np.arange(2, 9)
    g = graph_forward(small_model, param_nodes(small_model), small_panel, targets)
    total, parts = j1_graph(g)
    tr = small_model.forward_all(small_panel)
    recon = float(np.sum((small_panel[2:] - tr.recon[2:]) ** 2))
    bd = evaluate(small_model, small_panel, "ilg", 0.0)
    assert parts[0].value[0, 0] == pytest.approx(recon)
    assert total.value[0, 0] == pytest.approx(recon + bd.lifted_var + bd.nar_base + bd.nar_autoencoded)


@pytest.mark.parametrize("reduction", ["mean", "element_mean"])
def test_reductions_scale_terms(small_model, small_panel, reduction):
    targets = np.arange(2, 9)
    params = param_nodes(small_model)
    g = graph_forward(small_model, params, small_panel, targets)
    _, raw = j1_graph(g, "sum")
    _, red = j1_graph(g, reduction)
    rows = 7
    counts = [rows * 3, rows * 12, rows * 3, rows * 3] if reduction == "element_mean" else [rows] * 4
    for a, b, c in zip(raw, red, counts):
        assert b.value[0, 0] == pytest.approx(a.value[0, 0] / c)


def test_unknown_reduction(small_model, small_panel):
    g = graph_forward(small_model, param_nodes(small_model), small_panel, np.array([3]))
    with pytest.raises(ValueError):
        j1_graph(g, "median")


def test_j1_gradient_matches_finite_differences(small_model, small_panel):
    targets = np.array([2, 4, 7, 8])

    def loss_value():
        g = graph_forward(small_model, param_nodes(small_model), small_panel, targets)
        return float(j1_graph(g)[0].value[0, 0])

    params = param_nodes(small_model)
    total, _ = j1_graph(graph_forward(small_model, params, small_panel, targets))
    grads = ng.backward(total, params.all())
    arrays = small_model.encoder.parameters() + small_model.decoder.parameters()
    for node, arr in zip(params.encoder + params.decoder, arrays):
        fd = ng.numeric_gradient(loss_value, arr)
        np.testing.assert_allclose(grads[node], fd, rtol=1e-5, atol=1e-6)
    wide = ng.numeric_gradient(loss_value, small_model.lags.weights)
    np.testing.assert_allclose(LagStack.unwide(grads[params.lags], 2), wide, rtol=1e-5, atol=1e-6)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graphs, random_graph
from ignn import autodiff as ad
from ignn.errors import DimensionError
from ignn.graph import build_from_edges, hop_features, sym_normalize
from ignn.models import (
    AIgnn,
    AIgnnConfig,
    CIgnn,
    CIgnnConfig,
    Gcn,
    GcnConfig,
    JkConfig,
    JkNet,
    ReductionSpec,
    RIgnn,
    RIgnnConfig,
    adjacency_coefficients,
    appnp_reference,
    build_model,
    build_reduction_weights,
    forward_c_ignn,
    forward_gcn,
    polynomial_filter_reference,
    reduction_outputs,
    residual_expansion,
)
from ignn.spectral import spectral_norm


def instance(seed, n=8, d=4, p=0.35):
    rng = np.random.default_rng(seed)
    edges = random_graph(rng, n, p)
    return sym_normalize(build_from_edges(n, edges)), rng.standard_normal((n, d)), rng


def all_models(d=4, c=3, K=2, **kw):
    return [
        Gcn(GcnConfig.uniform(d, 5, c, K, **kw)),
        RIgnn(RIgnnConfig(d, 5, c, K, **kw)),
        AIgnn(AIgnnConfig(d, 5, c, K, **kw)),
        CIgnn(CIgnnConfig(d, 5, c, K, **kw)),
        CIgnn(CIgnnConfig(d, 5, c, K, separate=False, relation=False, **kw)),
        JkNet(JkConfig(d, 5, c, K, **kw)),
    ]


# --------------------------------------------------------------------------
# GCN


def test_one_layer_gcn_with_identity_weight_is_propagation():
    a, x, _ = instance(0)
    cfg = GcnConfig((4, 4), dropout_p=0.0)
    np.testing.assert_allclose(forward_gcn(cfg, a, x, {"W1": np.eye(4)}), a.to_dense() @ x, atol=1e-14)


def test_gcn_layers_and_lipschitz():
    a, x, _ = instance(1)
    m = Gcn(GcnConfig.uniform(4, 6, 3, 3, dropout_p=0.0))
    p = m.init_params(0)
    tape = ad.Tape()
    res = m.forward(tape, m.register(tape, p), a, x)
    assert len(res.layers) == 4
    assert res.layers[1].shape == (8, 6)
    assert m.lipschitz(p) == pytest.approx(np.linalg.norm(p["W1"] @ p["W2"] @ p["W3"], 2), rel=1e-8)


# --------------------------------------------------------------------------
# residual


@pytest.mark.parametrize("K", [1, 2, 4])
def test_linear_residual_matches_subset_expansion(K):
    a, x, rng = instance(2 + K)
    cfg = RIgnnConfig(4, 4, 4, K, dropout_p=0.0, linear=True)
    m = RIgnn(cfg)
    p = {"W0": np.eye(4), "out": np.eye(4)}
    ws = [0.5 * rng.standard_normal((4, 4)) for _ in range(K)]
    p.update({f"W{k + 1}": w for k, w in enumerate(ws)})
    np.testing.assert_allclose(m.logits(a, x, p), residual_expansion(a, x, ws), atol=1e-10)


def test_residual_with_zero_weights_is_input_map():
    a, x, _ = instance(3)
    m = RIgnn(RIgnnConfig(4, 5, 3, 3, dropout_p=0.0))
    p = m.init_params(0)
    for k in (1, 2, 3):
        p[f"W{k}"] = np.zeros((5, 5))
    expected = np.maximum(x @ p["W0"], 0) @ p["out"]
    np.testing.assert_allclose(m.logits(a, x, p), expected, atol=1e-14)


# --------------------------------------------------------------------------
# attentive


def forced_gate(m, p, value):
    for k in range(1, m.cfg.K + 1):
        p[f"gate{k}"] = np.zeros_like(p[f"gate{k}"])
        p[f"gate_bias{k}"] = np.array([[value]])
    return p


def test_gate_closed_keeps_input_representation():
    a, x, _ = instance(4)
    m = AIgnn(AIgnnConfig(4, 5, 3, 3, dropout_p=0.0))
    p = forced_gate(m, m.init_params(0), -1e3)
    np.testing.assert_allclose(m.logits(a, x, p), np.maximum(x @ p["W0"], 0) @ p["out"], atol=1e-12)


def test_gate_open_linearized_is_power_propagation():
    a, x, _ = instance(5)
    m = AIgnn(AIgnnConfig(4, 4, 4, 3, dropout_p=0.0, linear=True))
    p = forced_gate(m, m.init_params(0), 1e3)
    p["W0"], p["out"] = np.eye(4), np.eye(4)
    np.testing.assert_allclose(m.logits(a, x, p), np.linalg.matrix_power(a.to_dense(), 3) @ x, atol=1e-12)


@given(st.integers(0, 1000))
def test_gates_strictly_inside_unit_interval(seed):
    a, x, _ = instance(seed)
    m = AIgnn(AIgnnConfig(4, 5, 3, 2, dropout_p=0.0))
    for g in m.gates(a, x, m.init_params(seed)):
        assert g.shape == (8, 1)
        assert np.all((g > 0) & (g < 1))


# --------------------------------------------------------------------------
# concatenative


def test_k0_is_mlp():
    a, x, _ = instance(6)
    cfg = CIgnnConfig(4, 5, 3, 0, dropout_p=0.0)
    m = CIgnn(cfg)
    p = m.init_params(0)
    expected = np.maximum(np.maximum(x @ p["hop0"], 0) @ p["rel"], 0) @ p["out"]
    np.testing.assert_allclose(m.logits(a, x, p), expected, atol=1e-14)


@given(st.integers(0, 1000), st.integers(0, 4))
def test_concat_equals_block_sum(seed, K):
    a, x, _ = instance(seed)
    m = CIgnn(CIgnnConfig(4, 5, 3, K, dropout_p=0.0))
    p = m.init_params(seed)
    blocks = m.relation_blocks(p)
    dense = a.to_dense()
    acc = sum(
        np.maximum(np.linalg.matrix_power(dense, i) @ x @ p[f"hop{i}"], 0) @ blocks[i] for i in range(K + 1)
    )
    np.testing.assert_allclose(m.logits(a, x, p), np.maximum(acc, 0) @ p["out"], atol=1e-12)


@given(st.integers(0, 1000), st.integers(0, 5), st.booleans(), st.booleans())
def test_fast_mode_matches_in_graph_propagation(seed, K, separate, relation):
    a, x, _ = instance(seed)
    fast = CIgnnConfig(4, 5, 3, K, dropout_p=0.0, separate=separate, relation=relation)
    slow = CIgnnConfig(4, 5, 3, K, dropout_p=0.0, fast_mode=False, separate=separate, relation=relation)
    p = CIgnn(fast).init_params(seed)
    diff = np.abs(forward_c_ignn(fast, a, x, p) - forward_c_ignn(slow, a, x, p)).max()
    assert diff < 1e-9


def test_fast_mode_rejects_wrong_cache():
    a, x, _ = instance(7)
    cfg = CIgnnConfig(4, 5, 3, 2)
    with pytest.raises(DimensionError):
        forward_c_ignn(cfg, a, x, CIgnn(cfg).init_params(0), cache=hop_features(a, x, 3))


def test_cignn_lipschitz_is_hop_sum_norm():
    m = CIgnn(CIgnnConfig(4, 5, 3, 2))
    p = m.init_params(0)
    total = sum(p[f"hop{i}"] @ p["rel"][5 * i : 5 * (i + 1)] for i in range(3))
    assert m.lipschitz(p) == pytest.approx(np.linalg.norm(total, 2), rel=1e-8)


def test_jknet_concatenates_cascade():
    a, x, _ = instance(8)
    m = JkNet(JkConfig(4, 5, 3, 3, dropout_p=0.0))
    p = m.init_params(0)
    tape = ad.Tape()
    res = m.forward(tape, m.register(tape, p), a, x)
    assert len(res.layers) == 4
    dense = a.to_dense()
    h, parts = x, []
    for k in (1, 2, 3):
        h = np.maximum(dense @ h @ p[f"W{k}"], 0)
        parts.append(h)
    expected = np.maximum(np.hstack(parts) @ p["rel"], 0) @ p["out"]
    np.testing.assert_allclose(res.logits.value, expected, atol=1e-12)
    jk_total = p["W1"] @ p["rel"][:5] + p["W1"] @ p["W2"] @ p["rel"][5:10] + p["W1"] @ p["W2"] @ p["W3"] @ p["rel"][10:]
    assert m.lipschitz(p) == pytest.approx(spectral_norm(jk_total), rel=1e-8)


def test_build_model_dispatch():
    assert isinstance(build_model(CIgnnConfig(2, 2, 2, 1)), CIgnn)
    with pytest.raises(TypeError):
        build_model(object())


@pytest.mark.parametrize("idx", range(6))
def test_permutation_equivariance(idx):
    rng = np.random.default_rng(idx)
    n = 9
    edges = random_graph(rng, n, 0.3)
    x = rng.standard_normal((n, 4))
    perm = rng.permutation(n)
    inv = np.argsort(perm)  # new id of old node u is inv[u]
    a = sym_normalize(build_from_edges(n, edges))
    ap = sym_normalize(build_from_edges(n, [(inv[u], inv[v]) for u, v in edges]))
    m = all_models(dropout_p=0.0)[idx]
    p = m.init_params(idx)
    np.testing.assert_allclose(m.logits(ap, x[perm], p), m.logits(a, x, p)[perm], atol=1e-10)


@pytest.mark.parametrize("idx", range(6))
@pytest.mark.parametrize("K", [1, 3])
def test_model_gradients(idx, K):
    a, x, _ = instance(10 + idx, n=7, d=3)
    m = all_models(d=3, c=3, K=K, dropout_p=0.3)[idx]
    y = np.arange(7) % 3

    def loss(tape, v):
        res = m.forward(tape, v, a, x, training=True, rng=np.random.default_rng(1))
        return ad.softmax_cross_entropy(res.logits, y, [0, 1, 2, 4, 5])

    errors = ad.gradcheck(loss, m.init_params(idx))
    assert max(errors.values()) < 1e-4, errors


# --------------------------------------------------------------------------
# filters and reductions


def test_polynomial_filter_trivial_coefficients():
    a, x, _ = instance(11)
    np.testing.assert_allclose(polynomial_filter_reference(a, x, [1, 0, 0]), x)
    np.testing.assert_allclose(polynomial_filter_reference(a, x, [0, 1, 0]), x - a.to_dense() @ x, atol=1e-14)


def test_adjacency_coefficients_small_case():
    # θ0 + θ1 (I − Â) + θ2 (I − Â)² = (θ0+θ1+θ2) − (θ1 + 2θ2) Â + θ2 Â²
    np.testing.assert_allclose(adjacency_coefficients([2.0, 3.0, 5.0]), [10.0, -13.0, 5.0])


@given(graphs(min_nodes=2, max_nodes=12), st.lists(st.floats(-2, 2), min_size=1, max_size=7))
def test_binomial_remap_matches_laplacian_basis(inst, theta):
    n, edges = inst
    a = sym_normalize(build_from_edges(n, edges))
    x = np.random.default_rng(n).standard_normal((n, 2))
    dense = a.to_dense()
    coef = adjacency_coefficients(theta)
    via_adj = sum(c * np.linalg.matrix_power(dense, i) @ x for i, c in enumerate(coef))
    np.testing.assert_allclose(via_adj, polynomial_filter_reference(a, x, theta), atol=1e-9 * max(1, np.abs(coef).sum()))


def test_appnp_pure_restart():
    a, x, rng = instance(12)
    w = rng.standard_normal((4, 3))
    got, ref = reduction_outputs(ReductionSpec("appnp", 4, alpha=1.0), a, x, w)
    np.testing.assert_allclose(got, x @ w, atol=1e-14)
    np.testing.assert_allclose(ref, x @ w, atol=1e-14)


def test_gprgnn_first_coefficient_only():
    a, x, rng = instance(13)
    w = rng.standard_normal((4, 3))
    got, _ = reduction_outputs(ReductionSpec("gprgnn", 2, coefficients=(1, 0, 0)), a, x, w)
    np.testing.assert_allclose(got, x @ w, atol=1e-14)


def test_appnp_weights_sum_to_one():
    hops, blocks = build_reduction_weights(ReductionSpec("appnp", 5, alpha=0.2), in_dim=3)
    total = sum(b[0, 0] for b in blocks)
    assert total == pytest.approx(1.0)
    assert blocks[-1][0, 0] == pytest.approx(0.8**5)


def test_meanpool_uses_k_plus_one():
    _, blocks = build_reduction_weights(ReductionSpec("meanpool", 3), in_dim=2)
    assert [b[0, 0] for b in blocks] == [0.25] * 4


@pytest.mark.parametrize(
    "bad",
    [
        dict(kind="appnp", K=2, alpha=0.0),
        dict(kind="appnp", K=2, alpha=1.5),
        dict(kind="gprgnn", K=2, coefficients=(1, 2)),
        dict(kind="nope", K=2),
        dict(kind="sign", K=-1),
    ],
)
def test_invalid_reduction_specs(bad):
    with pytest.raises(ValueError):
        ReductionSpec(**bad)


def reduction_strategy():
    K = st.integers(0, 6)
    coef = lambda k: st.lists(st.floats(-1, 1), min_size=k + 1, max_size=k + 1).map(tuple)
    return K.flatmap(
        lambda k: st.one_of(
            st.floats(0.05, 1.0).map(lambda al: ReductionSpec("appnp", k, alpha=al)),
            coef(k).map(lambda c: ReductionSpec("gprgnn", k, coefficients=c)),
            coef(k).map(lambda c: ReductionSpec("poly", k, coefficients=c)),
            coef(k).map(lambda c: ReductionSpec("mixhop", k, coefficients=c)),
            st.sampled_from(["sign", "meanpool", "sumpool"]).map(lambda s: ReductionSpec(s, k)),
        )
    )


@given(graphs(min_nodes=2, max_nodes=30), reduction_strategy(), st.integers(0, 1000))
def test_reductions_match_reference_models(inst, spec, seed):
    n, edges = inst
    a = sym_normalize(build_from_edges(n, edges))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 3))
    if spec.kind in ("appnp", "gprgnn", "poly"):
        w = rng.standard_normal((3, 2))
    else:
        w = [rng.standard_normal((3, 2)) for _ in range(spec.K + 1)]
    got, ref = reduction_outputs(spec, a, x, w)
    assert np.abs(got - ref).max() < 1e-9

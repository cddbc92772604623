import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graphs, random_graph
from oracles import second_eigenvalue, subspace_distance, svd_norm
from ignn.errors import ConvergenceError, DimensionError
from ignn.graph import build_from_edges, connected_components, spmm, sym_normalize
from ignn.spectral import (
    distance_to_subspace,
    empirical_lipschitz,
    lipschitz_cignn,
    lipschitz_gcn,
    min_depth_kstar,
    second_largest_eigenvalue,
    spectral_norm,
    subspace_basis,
    summed_hop_bound,
    hop_sum_norm_bound,
    verify_smoothing_bound,
)


def setup(n, edges):
    g = build_from_edges(n, edges)
    a = sym_normalize(g)
    return a, subspace_basis(a, connected_components(g))


CYCLE5 = [(i, (i + 1) % 5) for i in range(5)]


def test_cycle_lambda_closed_form():
    a, e = setup(5, CYCLE5)
    assert second_largest_eigenvalue(a, e) == pytest.approx(1 / 3 + 2 / 3 * math.cos(2 * math.pi / 5), abs=1e-12)


def test_cycle_distance_is_centering():
    # a regular graph has the constant vector as its subspace
    a, e = setup(5, CYCLE5)
    assert distance_to_subspace(np.arange(5.0), e) == pytest.approx(math.sqrt(10), abs=1e-12)


def test_two_components_frozen():
    a, e = setup(5, [(0, 1), (1, 2), (3, 4)])
    assert e.num_components == 2
    assert second_largest_eigenvalue(a, e) == pytest.approx(0.5, abs=1e-12)
    assert distance_to_subspace(np.array([1.0, 0, 0, 2, 0]), e) == pytest.approx(1.647508942095828, abs=1e-12)


def test_complete_graph_has_zero_lambda():
    edges = [(u, v) for u in range(4) for v in range(u + 1, 4)]
    a, e = setup(4, edges)
    assert second_largest_eigenvalue(a, e) == pytest.approx(0.0, abs=1e-12)


def test_isolated_nodes_only():
    a, e = setup(3, [])
    assert second_largest_eigenvalue(a, e) == 0.0
    assert distance_to_subspace(np.ones((3, 2)), e) == 0.0


@given(graphs(max_nodes=12))
def test_basis_is_orthonormal_and_fixed_by_adjacency(inst):
    n, edges = inst
    a, e = setup(n, edges)
    basis = e.basis
    np.testing.assert_allclose(basis.T @ basis, np.eye(e.num_components), atol=1e-12)
    np.testing.assert_allclose(a.to_dense() @ basis, basis, atol=1e-12)


@given(graphs(max_nodes=12), st.integers(1, 3))
def test_distance_matches_eigenspace_oracle(inst, width):
    n, edges = inst
    _, e = setup(n, edges)
    x = np.random.default_rng(n * 7 + width).standard_normal((n, width))
    assert distance_to_subspace(x, e) == pytest.approx(subspace_distance(n, edges, x), abs=1e-9)


@given(graphs(max_nodes=12))
def test_lambda_matches_dense_oracle(inst):
    n, edges = inst
    a, e = setup(n, edges)
    assert second_largest_eigenvalue(a, e) == pytest.approx(second_eigenvalue(n, edges), abs=1e-9)


def test_power_iteration_path_matches_dense(monkeypatch):
    import ignn.spectral as spectral

    rng = np.random.default_rng(3)
    edges = random_graph(rng, 40, 0.1, connected=True)
    a, e = setup(40, edges)
    dense = second_largest_eigenvalue(a, e)
    monkeypatch.setattr(spectral, "DENSE_EIGEN_LIMIT", 0)
    assert second_largest_eigenvalue(a, e, tol=1e-13, max_iters=100_000) == pytest.approx(dense, rel=1e-5)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10_000))
def test_spectral_norm_matches_svd(r, c, seed):
    w = np.random.default_rng(seed).standard_normal((r, c))
    assert spectral_norm(w) == pytest.approx(svd_norm(w), rel=1e-8)


def test_spectral_norm_zero_and_convergence_error():
    assert spectral_norm(np.zeros((3, 2))) == 0.0
    with pytest.raises(DimensionError):
        spectral_norm(np.zeros((0, 0)))
    w = np.diag([1.0, 0.999999])
    with pytest.raises(ConvergenceError) as info:
        spectral_norm(w, tol=1e-300, max_iters=5)
    assert info.value.estimate > 0


def test_lipschitz_gcn_chain():
    rng = np.random.default_rng(0)
    ws = [rng.standard_normal((4, 5)), rng.standard_normal((5, 3)), rng.standard_normal((3, 2))]
    assert lipschitz_gcn(ws) == pytest.approx(svd_norm(ws[0] @ ws[1] @ ws[2]), rel=1e-8)
    with pytest.raises(DimensionError):
        lipschitz_gcn([ws[0], ws[0]])


def test_lipschitz_cignn_sum_of_hops():
    rng = np.random.default_rng(1)
    pairs = [(rng.standard_normal((4, 3)), rng.standard_normal((3, 2))) for _ in range(3)]
    assert lipschitz_cignn(pairs) == pytest.approx(svd_norm(sum(p @ q for p, q in pairs)), rel=1e-8)


def test_empirical_lipschitz_of_linear_map_is_at_most_norm():
    w = np.random.default_rng(2).standard_normal((3, 3))
    est = empirical_lipschitz(lambda x: x @ w, np.zeros((5, 3)), num_pairs=64)
    assert 0 < est <= svd_norm(w) + 1e-9


@given(graphs(max_nodes=10, connected=True), st.integers(0, 6), st.integers(0, 1000))
def test_smoothing_bound_holds(inst, k, seed):
    n, edges = inst
    a, e = setup(n, edges)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 3))
    weights = [rng.standard_normal((3, 3)) for _ in range(k)]
    lhs, rhs, holds = verify_smoothing_bound(a, e, x, weights, k)
    assert holds, (lhs, rhs)


@given(graphs(max_nodes=12), st.integers(0, 1000))
def test_relu_does_not_increase_distance(inst, seed):
    n, edges = inst
    _, e = setup(n, edges)
    x = np.random.default_rng(seed).standard_normal((n, 3))
    assert distance_to_subspace(np.maximum(x, 0), e) <= distance_to_subspace(x, e) + 1e-12


@given(graphs(max_nodes=10, connected=True), st.integers(1, 4), st.integers(0, 1000))
def test_summed_hop_bound_holds_for_linear_concatenation(inst, k, seed):
    n, edges = inst
    a, e = setup(n, edges)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 3))
    pairs = [(rng.standard_normal((3, 4)), rng.standard_normal((4, 2))) for _ in range(k + 1)]
    h = np.zeros((n, 2))
    m = x
    for i, (wh, wr) in enumerate(pairs):
        if i:
            m = spmm(a, m)
        h = h + m @ wh @ wr
    lam = second_largest_eigenvalue(a, e)
    assert distance_to_subspace(h, e) <= summed_hop_bound(pairs, lam, distance_to_subspace(x, e)) + 1e-8


def test_published_summed_bound_counterexample():
    # W^(0)W_0 = I and W^(1)W_1 = -I/λ cancel inside the norm: the published
    # right-hand side vanishes while the representation keeps its distance
    n, edges = 6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]
    a, e = setup(n, edges)
    lam = second_largest_eigenvalue(a, e)
    x = np.random.default_rng(0).standard_normal((n, 2))
    pairs = [(np.eye(2), np.eye(2)), (np.eye(2), -np.eye(2) / lam)]
    h = x - spmm(a, x) / lam
    dist = distance_to_subspace(x, e)
    assert hop_sum_norm_bound(pairs, lam, dist) == pytest.approx(0.0, abs=1e-12)
    assert distance_to_subspace(h, e) > 0.1
    assert distance_to_subspace(h, e) <= summed_hop_bound(pairs, lam, dist)


def test_kstar_examples():
    # λ = 0.5, L·D = 1, ε = 0.01 → ⌈log 0.01 / log 0.5⌉ = 7
    assert min_depth_kstar(1.0, 1.0, 0.01, 0.5) == 7
    assert min_depth_kstar(1.0, 1.0, 2.0, 0.5) == 0
    with pytest.raises(ValueError):
        min_depth_kstar(1.0, 1.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        min_depth_kstar(0.0, 1.0, 0.1, 0.5)


@given(graphs(min_nodes=3, max_nodes=10, connected=True), st.floats(1e-6, 1e-1))
def test_kstar_reaches_epsilon_with_identity_weights(inst, eps):
    n, edges = inst
    a, e = setup(n, edges)
    lam = second_largest_eigenvalue(a, e)
    if not 0 < lam < 1:
        return
    x = np.random.default_rng(n).standard_normal((n, 2))
    dist = distance_to_subspace(x, e)
    k = min_depth_kstar(1.0, dist, eps, lam)
    h = x
    for _ in range(k):
        h = spmm(a, h)
    assert distance_to_subspace(h, e) < eps or dist < eps

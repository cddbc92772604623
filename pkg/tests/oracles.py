"""Slow, dense, loop-based reference computations.

None of these reuse package code: they are the independent side of every
oracle comparison in the suite.
"""

import itertools
from collections import deque

import numpy as np


def dense_adjacency(n, edges):
    a = np.zeros((n, n))
    for u, v in edges:
        if u != v:
            a[u, v] = a[v, u] = 1.0
    return a


def dense_normalized(n, edges):
    a = dense_adjacency(n, edges) + np.eye(n)
    d = a.sum(axis=1)
    return a / np.sqrt(np.outer(d, d))


def bfs_components(n, edges):
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    comp = [-1] * n
    label = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        comp[s] = label
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if comp[w] < 0:
                    comp[w] = label
                    queue.append(w)
        label += 1
    return comp


def eigen_projector(n, edges):
    """Projector onto the eigenvalue-1 eigenspace of the normalized adjacency."""
    vals, vecs = np.linalg.eigh(dense_normalized(n, edges))
    top = vecs[:, np.abs(vals - 1.0) < 1e-9]
    return top @ top.T


def subspace_distance(n, edges, x):
    x = np.asarray(x, dtype=float).reshape(n, -1)
    return float(np.linalg.norm(x - eigen_projector(n, edges) @ x))


def second_eigenvalue(n, edges):
    vals = np.linalg.eigvalsh(dense_normalized(n, edges))
    m = len(set(bfs_components(n, edges)))
    rest = np.sort(vals)[: n - m]  # the m largest equal 1
    return float(np.max(np.abs(rest))) if len(rest) else 0.0


def walk_reachability(n, edges, k, self_loops=False):
    """Pairs ``(u, v)`` joined by a walk of exactly k steps, found by enumeration."""
    adj = [set() for _ in range(n)]
    for u, v in edges:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    out = set()
    for s in range(n):
        frontier = {s}
        for _ in range(k):
            frontier = set(itertools.chain.from_iterable(adj[u] for u in frontier))
        for t in frontier:
            if self_loops or t != s:
                out.add((s, t))
    return out


def edge_homophily_loops(pairs, labels):
    """``pairs`` is a set of ordered arcs; each unordered edge counted once."""
    und = {(min(u, v), max(u, v)) for u, v in pairs}
    same = sum(labels[u] == labels[v] for u, v in und)
    return same / len(und)


def node_homophily_loops(n, pairs, labels):
    total = 0.0
    for u in range(n):
        nbrs = [v for (s, v) in pairs if s == u]
        if nbrs:
            total += sum(labels[v] == labels[u] for v in nbrs) / len(nbrs)
    return total / n


def ncd_loops(n, pairs, labels, num_classes):
    out = np.zeros((n, num_classes))
    for u, v in pairs:
        out[u, labels[v]] += 1
    sums = out.sum(axis=1, keepdims=True)
    return np.divide(out, sums, out=np.zeros_like(out), where=sums > 0)


def svd_norm(w):
    return float(np.linalg.svd(np.atleast_2d(w), compute_uv=False)[0])

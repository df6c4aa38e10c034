"""Graph builders shared by the test modules."""
import itertools

import numpy as np

from geogc.ingest import featurize_atoms
from geogc.types import Graph3D


def make_graph(n, edges, positions=None, target=None, features=None, gid="g", seed=0):
    edges = list(edges)
    ei = [(i, j) for i, j in edges] + [(j, i) for i, j in edges]
    if positions is None:
        positions = np.random.default_rng(seed).uniform(0, 4, size=(n, 3))
    if features is None:
        features = featurize_atoms(["C"] * n)
    return Graph3D(features, np.array(ei, dtype=np.int64).reshape(-1, 2), positions,
                   target=target, id=gid)


def path_graph(n, spacing=1.0, **kw):
    pos = np.zeros((n, 3))
    pos[:, 0] = np.arange(n) * spacing
    return make_graph(n, [(k, k + 1) for k in range(n - 1)], positions=pos, **kw)


def cycle_edges(n):
    return [(k, (k + 1) % n) for k in range(n)]


def random_connected_graph(rng, n_max=10, n_min=1, p=0.35, features_dim=None):
    """Random spanning tree plus extra edges; positions well separated."""
    n = int(rng.integers(n_min, n_max + 1))
    edges = set()
    for k in range(1, n):
        edges.add((int(rng.integers(k)), k))
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            edges.add((i, j))
    pos = rng.uniform(0, 5, size=(n, 3))
    # guarantee no near-coincident nodes
    pos += np.arange(n)[:, None] * np.array([1.7, 0.3, 0.1])
    feats = None
    if features_dim is not None:
        feats = rng.normal(size=(n, features_dim))
    return make_graph(n, sorted(edges), positions=pos, features=feats,
                      target=float(rng.normal()), gid=f"rand{n}")


def all_connected_graphs(n):
    """Every connected labelled simple graph on n nodes."""
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        edges = [pairs[k] for k in range(len(pairs)) if mask >> k & 1]
        if _connected(n, edges):
            yield edges


def _connected(n, edges):
    adj = {k: set() for k in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen, stack = {0}, [0]
    while stack:
        for v in adj[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def brute_force_pairs(n, edges):
    """Pair classes by exhaustive walk enumeration, independent of geogc.

    Angle pairs: ends of any 2-walk i-j-k with i != k. Dihedral pairs: ends
    of any 3-walk i-j-k-l through four distinct nodes. Precedence edge >
    angle > dihedral.
    """
    adj = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        adj[i, j] = adj[j, i] = True
    e = {(i, j) for i in range(n) for j in range(i + 1, n) if adj[i, j]}
    a, d = set(), set()
    for i, j, k in itertools.permutations(range(n), 3):
        if adj[i, j] and adj[j, k]:
            a.add((min(i, k), max(i, k)))
    for i, j, k, l in itertools.permutations(range(n), 4):
        if adj[i, j] and adj[j, k] and adj[k, l]:
            d.add((min(i, l), max(i, l)))
    a -= e
    d -= e | a
    return e, a, d

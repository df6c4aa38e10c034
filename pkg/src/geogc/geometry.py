"""Distances, angles, dihedrals and angle/dihedral edge enumeration."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAngle, DegenerateDihedral, ZeroDistance
from .types import (
    AngleGeometricRepr,
    DistanceGeometricRepr,
    Graph3D,
    PositionalRepr,
    check,
)

DISTANCE_FLOOR = 1e-9
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class RigidMotion:
    """Proper rotation followed by a translation (Å)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (3, 3) or not np.allclose(r @ r.T, np.eye(3), atol=1e-12, rtol=0):
            raise ValueError("rotation must be a 3x3 orthonormal matrix")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation must be proper (det = +1)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))

    @classmethod
    def random(cls, rng: np.random.Generator, scale: float = 10.0) -> "RigidMotion":
        q, r = np.linalg.qr(rng.standard_normal((3, 3)))
        q = q * np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        # re-orthonormalize so the 1e-12 contract holds after the sign flips
        u, _, vt = np.linalg.svd(q)
        return cls(u @ vt, rng.uniform(-scale, scale, size=3))

    def apply(self, positions) -> np.ndarray:
        return np.asarray(positions, dtype=np.float64) @ self.rotation.T + self.translation

    def __call__(self, graph: Graph3D) -> Graph3D:
        return graph.with_positions(self.apply(graph.positions))


def edge_distance(p_i, p_j) -> float:
    return float(np.linalg.norm(np.asarray(p_i, float) - np.asarray(p_j, float)))


def angle(p_i, p_j, p_k) -> float:
    """Angle at vertex ``p_j`` in radians, in ``[0, pi]``."""
    a = np.asarray(p_i, float) - np.asarray(p_j, float)
    b = np.asarray(p_k, float) - np.asarray(p_j, float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < DEGENERACY_TOL or nb < DEGENERACY_TOL:
        raise DegenerateAngle(f"arm length below {DEGENERACY_TOL} Å")
    c = np.dot(a, b) / (na * nb)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def dihedral(p_i, p_j, p_k, p_l) -> float:
    """Signed torsion of the chain i-j-k-l in ``(-pi, pi]`` (IUPAC sign)."""
    p = [np.asarray(v, float) for v in (p_i, p_j, p_k, p_l)]
    b1, b2, b3 = p[1] - p[0], p[2] - p[1], p[3] - p[2]
    n1 = np.cross(b1, b2)
    n2 = np.cross(b2, b3)
    if np.linalg.norm(n1) < DEGENERACY_TOL or np.linalg.norm(n2) < DEGENERACY_TOL:
        raise DegenerateDihedral("collinear bonds leave a plane undefined")
    y = np.linalg.norm(b2) * np.dot(b1, n2)
    x = np.dot(n1, n2)
    phi = float(np.arctan2(y, x))
    return np.pi if phi == -np.pi else phi


def enumerate_angle_triples(graph: Graph3D) -> list[tuple[int, int, int]]:
    """All 2-paths ``(i, j, k)`` with ``i < k``, sorted."""
    out = []
    for j, nbrs in enumerate(graph.neighbors()):
        for a in range(len(nbrs)):
            for b in range(a + 1, len(nbrs)):
                out.append((nbrs[a], j, nbrs[b]))
    out.sort()
    return out


def enumerate_dihedral_chains(graph: Graph3D) -> list[tuple[int, int, int, int]]:
    """All 3-edge chains of distinct nodes, oriented so ``i < l``, sorted."""
    nbrs = graph.neighbors()
    seen = set()
    for j in range(len(nbrs)):
        for k in nbrs[j]:
            for i in nbrs[j]:
                if i == k:
                    continue
                for l in nbrs[k]:
                    if l == j or l == i:
                        continue
                    seen.add((i, j, k, l) if i < l else (l, k, j, i))
    return sorted(seen)


def build_positional(graph: Graph3D) -> PositionalRepr:
    return PositionalRepr(check(graph))


def _pair_distances(positions: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    if len(pairs) == 0:
        return np.empty(0)
    diff = positions[pairs[:, 0]] - positions[pairs[:, 1]]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _as_pairs(rows) -> np.ndarray:
    return np.array(sorted(rows), dtype=np.int64).reshape(-1, 2)


def build_angle_geometric(graph: Graph3D) -> AngleGeometricRepr:
    check(graph)
    pos = graph.positions
    edges = graph.unordered_edges()
    notes = []

    triples, thetas = [], []
    for t in enumerate_angle_triples(graph):
        try:
            thetas.append(angle(*pos[list(t)]))
            triples.append(t)
        except DegenerateAngle as exc:
            notes.append(f"angle {t} skipped: {exc}")

    chains, phis = [], []
    for c in enumerate_dihedral_chains(graph):
        try:
            phis.append(dihedral(*pos[list(c)]))
            chains.append(c)
        except DegenerateDihedral as exc:
            notes.append(f"dihedral {c} skipped: {exc}")

    for msg in notes:
        warnings.warn(f"{graph.id}: {msg}", RuntimeWarning, stacklevel=2)

    return AngleGeometricRepr(
        edge_pairs=edges,
        edge_distances=_pair_distances(pos, edges),
        angle_triples=np.array(triples, dtype=np.int64).reshape(-1, 3),
        angles=thetas,
        dihedral_chains=np.array(chains, dtype=np.int64).reshape(-1, 4),
        dihedrals=phis,
        warnings=notes,
    )


def classify_pairs(graph: Graph3D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unordered edge, angle-edge and dihedral-edge pairs under precedence.

    A pair belongs to the highest-priority kind that reaches it
    (edge > angle edge > dihedral edge) and appears once.
    """
    edges = {tuple(map(int, e)) for e in graph.unordered_edges()}
    angle_pairs = {(i, k) for i, _, k in enumerate_angle_triples(graph)} - edges
    dihedral_pairs = {(i, l) for i, _, _, l in enumerate_dihedral_chains(graph)}
    dihedral_pairs -= edges | angle_pairs
    return _as_pairs(edges), _as_pairs(angle_pairs), _as_pairs(dihedral_pairs)


def build_distance_geometric(graph: Graph3D) -> DistanceGeometricRepr:
    check(graph)
    pos = graph.positions
    pairs = classify_pairs(graph)
    dists = [_pair_distances(pos, p) for p in pairs]
    for kind, p, d in zip(("edge", "angle-edge", "dihedral-edge"), pairs, dists):
        if len(d) and d.min() < DISTANCE_FLOOR:
            i, j = p[int(np.argmin(d))]
            raise ZeroDistance(f"{graph.id}: {kind} ({i}, {j}) has distance {d.min():.3g} Å")
    return DistanceGeometricRepr(
        num_nodes=graph.num_nodes,
        edge_pairs=pairs[0],
        edge_distances=dists[0],
        angle_pairs=pairs[1],
        angle_distances=dists[1],
        dihedral_pairs=pairs[2],
        dihedral_distances=dists[2],
    )

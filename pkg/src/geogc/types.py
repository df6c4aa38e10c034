"""Graph data model and the three geometric representation containers.

All containers are frozen dataclasses holding read-only numpy arrays that are
copied on construction, so a representation never aliases the graph it was
built from.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _pairs(a, width: int) -> np.ndarray:
    out = _frozen(a, np.int64)
    if out.size == 0:
        out = _frozen(np.empty((0, width)), np.int64)
    return out


@dataclass(frozen=True, eq=False)
class Graph3D:
    """A 3D graph: node features, symmetric COO edge list, positions (Å).

    ``edge_index`` has shape ``(U, 2)`` and stores every edge in both
    directions. ``edge_features`` rides along untouched; convolution uses
    edge weights only.
    """

    node_features: np.ndarray
    edge_index: np.ndarray
    positions: np.ndarray
    edge_features: Optional[np.ndarray] = None
    target: Optional[float] = None
    id: str = ""

    def __post_init__(self):
        x = _frozen(self.node_features, np.float64)
        if x.ndim == 1:
            x = _frozen(x.reshape(-1, 1), np.float64)
        object.__setattr__(self, "node_features", x)
        object.__setattr__(self, "edge_index", _pairs(self.edge_index, 2))
        object.__setattr__(self, "positions", _frozen(self.positions, np.float64))
        if self.edge_features is not None:
            ef = _frozen(self.edge_features, np.float64)
            if ef.ndim == 1:
                ef = _frozen(ef.reshape(-1, 1), np.float64)
            object.__setattr__(self, "edge_features", ef)
        if self.target is not None:
            object.__setattr__(self, "target", float(self.target))

    @property
    def num_nodes(self) -> int:
        return int(self.node_features.shape[0])

    @property
    def num_edges(self) -> int:
        """Number of stored (directed) pairs."""
        return int(self.edge_index.shape[0])

    def unordered_edges(self) -> np.ndarray:
        """Sorted unique ``(i, j)`` pairs with ``i < j``."""
        if self.num_edges == 0:
            return np.empty((0, 2), dtype=np.int64)
        e = np.sort(self.edge_index, axis=1)
        e = e[e[:, 0] != e[:, 1]]
        return np.unique(e, axis=0)

    def neighbors(self) -> list[list[int]]:
        nbrs: list[set] = [set() for _ in range(self.num_nodes)]
        for i, j in self.unordered_edges():
            nbrs[i].add(int(j))
            nbrs[j].add(int(i))
        return [sorted(s) for s in nbrs]

    def with_positions(self, positions) -> "Graph3D":
        return Graph3D(
            self.node_features, self.edge_index, positions,
            self.edge_features, self.target, self.id,
        )

    def __eq__(self, other):
        if not isinstance(other, Graph3D):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b)

        return (
            self.id == other.id
            and self.target == other.target
            and same(self.node_features, other.node_features)
            and same(self.edge_index, other.edge_index)
            and same(self.positions, other.positions)
            and same(self.edge_features, other.edge_features)
        )

    __hash__ = None


def validate(graph: Graph3D) -> list[str]:
    """Return the list of violated invariants; empty means valid."""
    problems = []
    n = graph.node_features.shape[0]
    if graph.node_features.ndim != 2:
        problems.append("node_features must be a 2-D matrix")
    if n < 1:
        problems.append("graph must have at least one node")
    if graph.positions.ndim != 2 or graph.positions.shape[1:] != (3,):
        problems.append(f"positions must have shape (N, 3), got {graph.positions.shape}")
    elif graph.positions.shape[0] != n:
        problems.append(
            f"positions has {graph.positions.shape[0]} rows but node_features has {n}"
        )
    elif not np.all(np.isfinite(graph.positions)):
        problems.append("positions contain non-finite values")

    ei = graph.edge_index
    if ei.ndim != 2 or ei.shape[1] != 2:
        problems.append(f"edge_index must have shape (U, 2), got {ei.shape}")
        return problems
    bad = (ei < 0) | (ei >= n)
    if bad.any():
        rows = np.nonzero(bad.any(axis=1))[0]
        first = tuple(int(v) for v in ei[rows[0]])
        problems.append(f"edge index out of range [0, {n}): {len(rows)} pair(s), e.g. {first}")
    loops = ei[:, 0] == ei[:, 1]
    if loops.any():
        problems.append(f"self-loop pairs present, e.g. {tuple(int(v) for v in ei[loops][0])}")

    ef = graph.edge_features
    if ef is not None and ef.shape[0] != ei.shape[0]:
        problems.append(f"edge_features has {ef.shape[0]} rows for {ei.shape[0]} edges")
        ef = None

    fwd: dict = {}
    for k, (i, j) in enumerate(ei.tolist()):
        fwd.setdefault((i, j), []).append(k)
    for (i, j), ks in fwd.items():
        back = fwd.get((j, i))
        if back is None or len(back) != len(ks):
            problems.append(f"edge ({i}, {j}) is not stored symmetrically")
            break
        if ef is not None:
            a = sorted(map(tuple, ef[ks].tolist()))
            b = sorted(map(tuple, ef[back].tolist()))
            if a != b:
                problems.append(f"edge ({i}, {j}) has asymmetric edge_features")
                break
    return problems


def check(graph: Graph3D) -> Graph3D:
    """Raise :class:`ValidationError` unless ``graph`` is valid."""
    problems = validate(graph)
    if problems:
        raise ValidationError(graph.id, problems)
    return graph


@dataclass(frozen=True)
class PositionalRepr:
    """Raw positions; not invariant under rigid motions."""

    graph: Graph3D


@dataclass(frozen=True, eq=False)
class AngleGeometricRepr:
    edge_pairs: np.ndarray
    edge_distances: np.ndarray
    angle_triples: np.ndarray
    angles: np.ndarray
    dihedral_chains: np.ndarray
    dihedrals: np.ndarray
    warnings: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "edge_pairs", _pairs(self.edge_pairs, 2))
        object.__setattr__(self, "edge_distances", _frozen(self.edge_distances, np.float64))
        object.__setattr__(self, "angle_triples", _pairs(self.angle_triples, 3))
        object.__setattr__(self, "angles", _frozen(self.angles, np.float64))
        object.__setattr__(self, "dihedral_chains", _pairs(self.dihedral_chains, 4))
        object.__setattr__(self, "dihedrals", _frozen(self.dihedrals, np.float64))
        object.__setattr__(self, "warnings", tuple(self.warnings))


@dataclass(frozen=True, eq=False)
class DistanceGeometricRepr:
    """Edge, angle-edge and dihedral-edge distances over deduplicated pairs."""

    num_nodes: int
    edge_pairs: np.ndarray
    edge_distances: np.ndarray
    angle_pairs: np.ndarray
    angle_distances: np.ndarray
    dihedral_pairs: np.ndarray
    dihedral_distances: np.ndarray

    def __post_init__(self):
        for name in ("edge", "angle", "dihedral"):
            object.__setattr__(self, f"{name}_pairs", _pairs(getattr(self, f"{name}_pairs"), 2))
            object.__setattr__(
                self, f"{name}_distances", _frozen(getattr(self, f"{name}_distances"), np.float64)
            )

    @property
    def counts(self) -> tuple[int, int, int]:
        return len(self.edge_pairs), len(self.angle_pairs), len(self.dihedral_pairs)

"""Power-law edge weights and weighted adjacency assembly."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import ZeroDistance
from .geometry import DISTANCE_FLOOR
from .types import DistanceGeometricRepr, Graph3D, check

WEIGHT_CAP = 1e6
# Distances are snapped to this many decimals (1e-6 Å) before weighting, so a
# rigid motion, which perturbs computed distances by ~1e-15 Å, yields
# bitwise-identical weights.
DISTANCE_DECIMALS = 6

REFERENCE_R0 = 1.39
REFERENCE_N = 4.55


@dataclass(frozen=True)
class PowerLawParams:
    r0: float
    n: float
    r0_theta: float
    n_theta: float
    r0_phi: float
    n_phi: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            value = float(value)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def reference(cls) -> "PowerLawParams":
        """R0 = 1.39 Å, N = 4.55 for all three edge kinds."""
        return cls(*(REFERENCE_R0, REFERENCE_N) * 3)

    @classmethod
    def from_vector(cls, v) -> "PowerLawParams":
        return cls(*map(float, v))

    def to_vector(self) -> np.ndarray:
        return np.array(self.as_tuple())

    def as_tuple(self) -> tuple:
        return (self.r0, self.n, self.r0_theta, self.n_theta, self.r0_phi, self.n_phi)

    def as_dict(self) -> dict:
        return asdict(self)


PARAM_NAMES = ("r0", "n", "r0_theta", "n_theta", "r0_phi", "n_phi")


class NeighborOrder(enum.IntEnum):
    FIRST = 1
    SECOND = 2
    THIRD = 3

    @classmethod
    def parse(cls, value) -> "NeighborOrder":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            aliases = {"1": 1, "first": 1, "1st": 1, "2": 2, "second": 2, "2nd": 2,
                       "3": 3, "third": 3, "3rd": 3}
            if key in aliases:
                return cls(aliases[key])
        return cls(int(value))


@dataclass(frozen=True, eq=False)
class WeightedAdjacency:
    """Symmetric weighted COO adjacency without self-loops.

    ``pairs`` is ``(M, 2)`` with both directions of every unordered pair,
    sorted lexicographically; ``weights`` is aligned with it.
    """

    pairs: np.ndarray
    weights: np.ndarray
    num_nodes: int

    def __post_init__(self):
        p = np.array(self.pairs, dtype=np.int64, copy=True).reshape(-1, 2)
        w = np.array(self.weights, dtype=np.float64, copy=True).reshape(-1)
        n = int(self.num_nodes)
        if len(p) != len(w):
            raise ValueError("pairs and weights differ in length")
        if len(p):
            if p.min() < 0 or p.max() >= n:
                raise ValueError("pair index out of range")
            if np.any(p[:, 0] == p[:, 1]):
                raise ValueError("self-loops are added by normalization, not stored")
            if not np.all(np.isfinite(w) & (w > 0)):
                raise ValueError("weights must be positive and finite")
            key = p[:, 0] * n + p[:, 1]
            # canonical lexicographic order, which the kernels rely on
            order = np.argsort(key, kind="stable")
            p, w, key = p[order], w[order], key[order]
            if np.any(key[1:] == key[:-1]):
                raise ValueError("duplicate pair")
            rkey = p[:, 1] * n + p[:, 0]
            rev = np.minimum(np.searchsorted(key, rkey), len(key) - 1)
            if not np.array_equal(key[rev], rkey):
                raise ValueError("adjacency is not symmetric")
            if not np.array_equal(w[rev], w):
                raise ValueError("weights are not symmetric")
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "pairs", p)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "num_nodes", int(self.num_nodes))

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        if len(self.pairs):
            a[self.pairs[:, 0], self.pairs[:, 1]] = self.weights
        return a

    def __eq__(self, other):
        if not isinstance(other, WeightedAdjacency):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.pairs, other.pairs)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None


def power_law_weight(d, r0: float, n: float):
    """``(d / r0) ** -n``, capped at ``WEIGHT_CAP``.

    Accepts a scalar or an array of distances.
    """
    if r0 <= 0 or n <= 0:
        raise ValueError(f"r0 and n must be positive, got r0={r0}, n={n}")
    d_arr = np.asarray(d, dtype=np.float64)
    if d_arr.size and d_arr.min() <= DISTANCE_FLOOR:
        raise ZeroDistance(f"distance {d_arr.min():.3g} Å is at or below {DISTANCE_FLOOR} Å")
    with np.errstate(over="ignore"):
        w = (d_arr / r0) ** (-n)
    if np.any(w > WEIGHT_CAP):
        warnings.warn(f"power-law weight clamped to {WEIGHT_CAP:g}", RuntimeWarning, stacklevel=2)
        w = np.minimum(w, WEIGHT_CAP)
    return float(w) if w.ndim == 0 else w


def _symmetric(pairs: np.ndarray, weights: np.ndarray, num_nodes: int) -> WeightedAdjacency:
    if len(pairs) == 0:
        return WeightedAdjacency(np.empty((0, 2)), np.empty(0), num_nodes)
    both = np.concatenate([pairs, pairs[:, ::-1]])
    w = np.concatenate([weights, weights])
    order = np.lexsort((both[:, 1], both[:, 0]))
    return WeightedAdjacency(both[order], w[order], num_nodes)


def assemble_weighted_adjacency(
    rep: DistanceGeometricRepr,
    params: Optional[PowerLawParams],
    order=NeighborOrder.THIRD,
    constant_weight: Optional[float] = None,
) -> WeightedAdjacency:
    """Weighted adjacency over the edge kinds selected by ``order``.

    Each kind is weighted with its own ``(r0, n)``. ``constant_weight``
    replaces every weight by a constant; it exists so the unweighted
    baseline can run through this same path.
    """
    order = NeighborOrder.parse(order)
    kinds = [
        (rep.edge_pairs, rep.edge_distances, "r0", "n"),
        (rep.angle_pairs, rep.angle_distances, "r0_theta", "n_theta"),
        (rep.dihedral_pairs, rep.dihedral_distances, "r0_phi", "n_phi"),
    ][: int(order)]
    if constant_weight is None and params is None:
        raise ValueError("params are required unless constant_weight is given")

    all_pairs, all_w = [], []
    for pairs, dists, r0_name, n_name in kinds:
        if len(pairs) == 0:
            continue
        if constant_weight is not None:
            w = np.full(len(pairs), float(constant_weight))
        else:
            d = np.round(dists, DISTANCE_DECIMALS)
            w = np.atleast_1d(
                power_law_weight(d, getattr(params, r0_name), getattr(params, n_name))
            )
        all_pairs.append(pairs)
        all_w.append(w)
    if not all_pairs:
        return WeightedAdjacency(np.empty((0, 2)), np.empty(0), rep.num_nodes)
    return _symmetric(np.concatenate(all_pairs), np.concatenate(all_w), rep.num_nodes)


def uniform_adjacency(graph: Graph3D) -> WeightedAdjacency:
    """First-neighbor adjacency with every weight exactly 1."""
    check(graph)
    edges = graph.unordered_edges()
    return _symmetric(edges, np.ones(len(edges)), graph.num_nodes)

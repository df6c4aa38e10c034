"""Weighted GCN regression: forward pass, manual backprop, Adam training.

All graphs of a dataset are packed into one block-diagonal propagation
operator, so a full-batch step is a handful of sparse products.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import NonFiniteLoss
from .geometry import build_distance_geometric
from .types import DistanceGeometricRepr, Graph3D, check
from .weighting import (
    NeighborOrder,
    PowerLawParams,
    WeightedAdjacency,
    assemble_weighted_adjacency,
    uniform_adjacency,
)

ACTIVATIONS = ("relu", "identity")
READOUTS = ("mean", "sum")


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 2
    hidden_dim: int = 64
    activation: str = "relu"
    readout: str = "mean"
    learning_rate: float = 1e-2
    epochs: int = 50
    seed: int = 0
    neighbor_order: NeighborOrder = NeighborOrder.THIRD

    def __post_init__(self):
        object.__setattr__(self, "neighbor_order", NeighborOrder.parse(self.neighbor_order))
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["neighbor_order"] = int(self.neighbor_order)
        return d


@dataclass
class GcnLayerParams:
    omega: np.ndarray


@dataclass
class Model:
    """GCN layer weights plus a linear head.

    The prediction is ``target_shift + target_scale * (pooled @ head_w + head_b)``
    where ``pooled`` is the mean (or ``pool_scale`` times the sum) of the final
    node states. Shift and both scales are fixed before training and never
    trained.
    """

    layers: list
    head_w: np.ndarray
    head_b: float = 0.0
    activation: str = "relu"
    readout: str = "mean"
    target_shift: float = 0.0
    target_scale: float = 1.0
    pool_scale: float = 1.0

    def parameters(self) -> list:
        """Trainable arrays, in a fixed order."""
        return [l.omega for l in self.layers] + [self.head_w, np.array([self.head_b])]

    def set_parameters(self, arrays):
        arrays = list(arrays)
        for layer, a in zip(self.layers, arrays):
            layer.omega = np.array(a, dtype=np.float64)
        self.head_w = np.array(arrays[len(self.layers)], dtype=np.float64)
        self.head_b = float(np.asarray(arrays[len(self.layers) + 1]).reshape(-1)[0])

    def copy(self) -> "Model":
        return Model(
            [GcnLayerParams(l.omega.copy()) for l in self.layers],
            self.head_w.copy(), self.head_b, self.activation, self.readout,
            self.target_shift, self.target_scale, self.pool_scale,
        )


def init_model(in_dim: int, config: ModelConfig, rng=None) -> Model:
    """Glorot-uniform layer weights; the head starts at zero."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    dims = [in_dim] + [config.hidden_dim] * config.num_layers
    layers = []
    for a, b in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / (a + b))
        layers.append(GcnLayerParams(rng.uniform(-limit, limit, size=(a, b))))
    return Model(layers, np.zeros(config.hidden_dim), 0.0, config.activation, config.readout)


# -- propagation operator --------------------------------------------------


@dataclass(frozen=True, eq=False)
class Propagator:
    """Symmetric-normalized operator in CSR form (possibly block-diagonal)."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    def __matmul__(self, x):
        return kernels.csr_matmul(self.indptr, self.indices, self.data, x)

    def to_dense(self) -> np.ndarray:
        n = self.num_nodes
        out = np.zeros((n, n))
        rows = np.repeat(np.arange(n), np.diff(self.indptr))
        out[rows, self.indices] = self.data
        return out


def normalize(adj: WeightedAdjacency) -> Propagator:
    """``D^-1/2 (A + I) D^-1/2`` with unit self-loops."""
    return Propagator(*kernels.normalized_csr(adj.pairs, adj.weights, adj.num_nodes))


def block_diagonal(ops: Sequence[Propagator]) -> Propagator:
    indptrs, indices, offset, nnz = [np.zeros(1, np.int64)], [], 0, 0
    for op in ops:
        indptrs.append(op.indptr[1:] + nnz)
        indices.append(op.indices + offset)
        offset += op.num_nodes
        nnz += len(op.data)
    return Propagator(
        np.concatenate(indptrs),
        np.concatenate(indices) if indices else np.empty(0, np.int64),
        np.concatenate([op.data for op in ops]) if ops else np.empty(0),
    )


def _activate(z, name):
    return np.maximum(z, 0.0) if name == "relu" else z


def layer_forward(x, a_hat, params: GcnLayerParams, apply_activation: bool, activation="relu"):
    """``activation(A_hat @ X @ Omega)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != a_hat.num_nodes:
        raise ValueError(f"X has {x.shape[0]} rows, operator has {a_hat.num_nodes} nodes")
    if x.shape[1] != params.omega.shape[0]:
        raise ValueError(f"X has {x.shape[1]} columns, omega expects {params.omega.shape[0]}")
    z = a_hat @ (x @ params.omega)
    return _activate(z, activation) if apply_activation else z


def readout(node_states, num_nodes: int, kind: str = "mean"):
    """Per-feature mean (or sum) over the first ``num_nodes`` rows."""
    if num_nodes < 1:
        raise ValueError("readout needs at least one node")
    rows = np.asarray(node_states, dtype=np.float64)[:num_nodes]
    return rows.sum(axis=0) if kind == "sum" else rows.mean(axis=0)


# -- batching --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PreparedGraph:
    """A validated graph with its distance-geometric representation cached."""

    graph: Graph3D
    rep: DistanceGeometricRepr


def prepare(graphs) -> list:
    out = []
    for g in graphs:
        if isinstance(g, PreparedGraph):
            out.append(g)
        else:
            out.append(PreparedGraph(check(g), build_distance_geometric(g)))
    return out


def build_adjacency(item, params: Optional[PowerLawParams], order) -> WeightedAdjacency:
    """Uniform first-neighbor adjacency when ``params`` is None, else power-law."""
    if isinstance(item, Graph3D):
        if params is None:
            return uniform_adjacency(item)
        item = prepare([item])[0]
    if params is None:
        return uniform_adjacency(item.graph)
    return assemble_weighted_adjacency(item.rep, params, order)


@dataclass(frozen=True, eq=False)
class Batch:
    op: Propagator
    x: np.ndarray
    segments: np.ndarray  # graph index of every node
    counts: np.ndarray
    targets: Optional[np.ndarray]
    ax: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.ax is None:
            object.__setattr__(self, "ax", self.op @ self.x)

    @property
    def size(self) -> int:
        return len(self.counts)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)])


def make_batch(graphs: Sequence[Graph3D], adjacencies: Sequence[WeightedAdjacency]) -> Batch:
    if len(graphs) == 0:
        raise ValueError("batch must contain at least one graph")
    ops = [normalize(a) for a in adjacencies]
    counts = np.array([g.num_nodes for g in graphs])
    targets = None
    if all(g.target is not None for g in graphs):
        targets = np.array([g.target for g in graphs], dtype=np.float64)
    return Batch(
        block_diagonal(ops),
        np.concatenate([g.node_features for g in graphs]),
        np.repeat(np.arange(len(graphs)), counts),
        counts,
        targets,
    )


def batch_for(items, params, order) -> Batch:
    items = prepare(items) if params is not None else list(items)
    graphs = [it.graph if isinstance(it, PreparedGraph) else it for it in items]
    adjs = [build_adjacency(it, params, order) for it in items]
    return make_batch(graphs, adjs)


# -- forward / backward ----------------------------------------------------


def _forward(model: Model, batch: Batch):
    """Returns predictions and the cache needed by the backward pass.

    Each layer computes ``(A_hat @ H) @ Omega``; ``A_hat @ X`` for the first
    layer is cached on the batch.
    """
    ahs, zs = [], []
    h = batch.x
    last = len(model.layers) - 1
    for k, layer in enumerate(model.layers):
        ah = batch.ax if k == 0 else batch.op @ h
        z = ah @ layer.omega
        ahs.append(ah)
        zs.append(z)
        h = _activate(z, model.activation) if k < last else z
    pooled = np.add.reduceat(h, batch.offsets[:-1], axis=0)
    if model.readout == "mean":
        pooled /= batch.counts[:, None]
    else:
        pooled *= model.pool_scale
    raw = pooled @ model.head_w + model.head_b
    return model.target_shift + model.target_scale * raw, (ahs, zs, pooled)


def predict(model: Model, batch: Batch) -> np.ndarray:
    return _forward(model, batch)[0]


def model_forward(graph, adjacency: WeightedAdjacency, model: Model) -> float:
    """Scalar prediction for one graph under a prebuilt adjacency."""
    g = graph.graph if isinstance(graph, PreparedGraph) else graph
    return float(predict(model, make_batch([g], [adjacency]))[0])


def loss_and_gradients(model: Model, batch: Batch):
    """Mean squared error and its exact gradient for every trainable array.

    Gradients come back in ``Model.parameters()`` order.
    """
    if batch.targets is None:
        raise ValueError("batch has no targets")
    pred, (ahs, zs, pooled) = _forward(model, batch)
    resid = pred - batch.targets
    loss = float(np.mean(resid**2))

    dpred = 2.0 * resid / batch.size
    draw = dpred * model.target_scale
    g_head_w = pooled.T @ draw
    g_head_b = np.array([draw.sum()])
    dpooled = np.outer(draw, model.head_w)
    if model.readout == "mean":
        dpooled = dpooled / batch.counts[:, None]
    else:
        dpooled = dpooled * model.pool_scale
    dh = dpooled[batch.segments]

    g_layers = [None] * len(model.layers)
    last = len(model.layers) - 1
    for k in range(last, -1, -1):
        dz = dh * (zs[k] > 0) if (k < last and model.activation == "relu") else dh
        g_layers[k] = ahs[k].T @ dz
        if k > 0:
            # the operator is symmetric, so its transpose is itself
            dh = batch.op @ (dz @ model.layers[k].omega.T)
    return loss, g_layers + [g_head_w, g_head_b]


def gradients(batch: Batch, model: Model) -> list:
    return loss_and_gradients(model, batch)[1]


def rmse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    with np.errstate(over="ignore"):
        return float(np.sqrt(np.mean((pred - target) ** 2)))


# -- training --------------------------------------------------------------


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    val_rmse: list = field(default_factory=list)


@dataclass
class TrainedModel:
    model: Model
    config: ModelConfig
    params: Optional[PowerLawParams]
    history: History
    in_dim: int

    @property
    def is_baseline(self) -> bool:
        return self.params is None


class Adam:
    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        out = []
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            out.append(p - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps))
        return out


def train(train_set, val_set, config: ModelConfig, params: Optional[PowerLawParams] = None,
          ) -> TrainedModel:
    """Full-batch Adam on MSE; ``params=None`` trains the unweighted baseline."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and validation sets must be non-empty")
    tb = batch_for(train_set, params, config.neighbor_order)
    vb = batch_for(val_set, params, config.neighbor_order)
    if tb.targets is None or vb.targets is None:
        raise ValueError("every graph needs a target for training")

    model = init_model(tb.x.shape[1], config)
    if config.readout == "sum":
        # extensive output: rescale only, and keep pooled values O(1)
        model.pool_scale = 1.0 / float(tb.counts.mean())
        scale = float(np.sqrt(np.mean(tb.targets**2)))
    else:
        model.target_shift = float(tb.targets.mean())
        scale = float(tb.targets.std())
    model.target_scale = scale if scale > 1e-12 else 1.0

    opt = Adam([p.shape for p in model.parameters()], config.learning_rate)
    history = History()
    for epoch in range(config.epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            # divergence is caught just below and reported as NonFiniteLoss
            loss, grads = loss_and_gradients(model, tb)
        if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
            raise NonFiniteLoss(
                f"non-finite loss {loss} at epoch {epoch} "
                f"(lr={config.learning_rate}, params={params})"
            )
        model.set_parameters(opt.step(model.parameters(), grads))
        history.train_loss.append(loss)
        history.val_rmse.append(rmse(predict(model, vb), vb.targets))
    return TrainedModel(model, config, params, history, tb.x.shape[1])


def evaluate(trained: TrainedModel, dataset) -> float:
    """RMSE of ``trained`` on ``dataset`` (Graph3D or PreparedGraph items)."""
    if len(dataset) == 0:
        raise ValueError("dataset must be non-empty")
    b = batch_for(dataset, trained.params, trained.config.neighbor_order)
    return rmse(predict(trained.model, b), b.targets)


# -- checkpoints -----------------------------------------------------------

CHECKPOINT_FORMAT = "geogc-checkpoint"
CHECKPOINT_VERSION = 1


def _tensor(name, a):
    a = np.asarray(a, dtype=np.float64)
    return {"name": name, "shape": list(a.shape), "data": a.reshape(-1).tolist()}


def save_checkpoint(trained: TrainedModel, path) -> None:
    m = trained.model
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": trained.config.to_dict(),
        "power_law_params": None if trained.params is None else trained.params.as_dict(),
        "in_dim": trained.in_dim,
        "activation": m.activation,
        "target_shift": m.target_shift,
        "target_scale": m.target_scale,
        "pool_scale": m.pool_scale,
        "tensors": [_tensor(f"omega_{k}", l.omega) for k, l in enumerate(m.layers)]
        + [_tensor("head_w", m.head_w), _tensor("head_b", [m.head_b])],
        "history": asdict(trained.history),
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_checkpoint(path) -> TrainedModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION} file")
    t = {d["name"]: np.array(d["data"], dtype=np.float64).reshape(d["shape"]) for d in doc["tensors"]}
    config = ModelConfig(**doc["config"])
    layers = [GcnLayerParams(t[f"omega_{k}"]) for k in range(config.num_layers)]
    model = Model(layers, t["head_w"], float(t["head_b"][0]), doc["activation"],
                  config.readout, doc["target_shift"], doc["target_scale"], doc["pool_scale"])
    params = doc["power_law_params"]
    return TrainedModel(
        model, config, None if params is None else PowerLawParams(**params),
        History(**doc["history"]), doc["in_dim"],
    )

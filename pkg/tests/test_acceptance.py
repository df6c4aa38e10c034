"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line; the lines are printed together at
the end of the pytest run (see conftest.py). Run this file directly to print
them without pytest:

    python tests/test_acceptance.py
"""
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geogc.bho import HyperparamSpace, optimize, random_search
from geogc.experiment import ExperimentConfig, directional_check, reference_context, run_train
from geogc.geometry import RigidMotion, build_distance_geometric
from geogc.ingest import SplitSpec, split
from geogc.nn import (
    GcnLayerParams,
    ModelConfig,
    build_adjacency,
    init_model,
    layer_forward,
    loss_and_gradients,
    make_batch,
    model_forward,
    normalize,
    prepare,
    train,
)
from geogc.synthetic import synthetic_dataset
from geogc.weighting import (
    NeighborOrder,
    PowerLawParams,
    WeightedAdjacency,
    assemble_weighted_adjacency,
    power_law_weight,
    uniform_adjacency,
)
from helpers import all_connected_graphs, brute_force_pairs, make_graph, random_connected_graph

RESULTS = {}


def record(num, name, passed, detail, elapsed, limit):
    ok = passed and elapsed < limit
    line = (f"[{'PASS' if ok else 'FAIL'}] #{num} {name}: {detail} "
            f"({elapsed:.2f}s, limit {limit:g}s)")
    RESULTS[num] = line
    print(line)
    return ok


# -- 1 ---------------------------------------------------------------------

# rows: distance / R0; columns: N = 2..6
TABLE_WEIGHTS = {
    1.0: [1, 1, 1, 1, 1],
    1.5: [0.444, 0.296, 0.198, 0.132, 0.088],
    2.0: [0.25, 0.125, 0.063, 0.031, 0.016],
    2.5: [0.160, 0.064, 0.026, 0.010, 0.004],
    3.0: [0.111, 0.037, 0.012, 0.004, 0.001],
}


def test_criterion_1_power_law_table():
    t0 = time.perf_counter()
    worst, misses = 0.0, []
    for ratio, row in TABLE_WEIGHTS.items():
        for n, expected in zip(range(2, 7), row):
            for r0 in (1.0, 1.39):
                w = power_law_weight(ratio * r0, r0, float(n))
                err = abs(w - expected)
                worst = max(worst, err)
                # 2**-4 = 0.0625 sits exactly on the half-unit boundary of 0.063
                if err > 5e-4 + 1e-12:
                    misses.append((ratio, n, w, expected))
    ok = record(1, "power-law table", not misses,
                f"25 entries, max |w - table| = {worst:.6f}, misses={misses}",
                time.perf_counter() - t0, 1)
    assert ok


# -- 2 ---------------------------------------------------------------------


def test_criterion_2_rigid_motion_invariance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    params = PowerLawParams.reference()
    worst_rep, forward_mismatch, pair_mismatch = 0.0, 0, 0
    for k in range(100):
        g = random_connected_graph(rng, 12, 1, features_dim=4)
        moved = RigidMotion.random(rng)(g)
        a, b = build_distance_geometric(g), build_distance_geometric(moved)
        for kind in ("edge", "angle", "dihedral"):
            if not np.array_equal(getattr(a, f"{kind}_pairs"), getattr(b, f"{kind}_pairs")):
                pair_mismatch += 1
            da, db = getattr(a, f"{kind}_distances"), getattr(b, f"{kind}_distances")
            if len(da):
                worst_rep = max(worst_rep, float(np.max(np.abs(da - db))))
        model = init_model(4, ModelConfig(hidden_dim=16), np.random.default_rng(k))
        model.head_w = np.random.default_rng(k + 1).normal(size=16)
        fa = model_forward(g, assemble_weighted_adjacency(a, params), model)
        fb = model_forward(moved, assemble_weighted_adjacency(b, params), model)
        forward_mismatch += fa != fb
    passed = pair_mismatch == 0 and worst_rep <= 1e-9 and forward_mismatch == 0
    ok = record(2, "rigid-motion invariance", passed,
                f"100 graphs, max distance drift {worst_rep:.1e}, "
                f"pair mismatches {pair_mismatch}, non-bitwise forwards {forward_mismatch}",
                time.perf_counter() - t0, 10)
    assert ok


# -- 3 ---------------------------------------------------------------------


def _classic_gcn_layer(graph, x, omega, relu):
    n = graph.num_nodes
    a = np.eye(n)
    for i, j in graph.edge_index.tolist():
        a[i, j] = 1.0
    d = 1.0 / np.sqrt(a.sum(axis=1))
    out = (d[:, None] * a * d[None, :]) @ x @ omega
    return np.maximum(out, 0) if relu else out


def test_criterion_3_standard_gc_reduction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        g = random_connected_graph(rng, 12, 1, features_dim=5)
        x = g.node_features
        omega = rng.normal(size=(5, 7))
        rep = build_distance_geometric(g)
        override = assemble_weighted_adjacency(rep, PowerLawParams.reference(), NeighborOrder.FIRST,
                                               constant_weight=1.0)
        for adj in (uniform_adjacency(g), override):
            for relu in (False, True):
                ours = layer_forward(x, normalize(adj), GcnLayerParams(omega), relu)
                worst = max(worst, float(np.max(np.abs(ours - _classic_gcn_layer(g, x, omega, relu)))))
    ok = record(3, "standard-GC reduction", worst <= 1e-12,
                f"50 graphs, max |ours - classic GCN| = {worst:.1e}",
                time.perf_counter() - t0, 5)
    assert ok


# -- 4 ---------------------------------------------------------------------


def test_criterion_4_gradient_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    step = 1e-5
    g = random_connected_graph(rng, 5, 5, features_dim=3)
    adj = build_adjacency(g, PowerLawParams.reference(), NeighborOrder.THIRD)
    batch = make_batch([g], [adj])
    cfg = ModelConfig(num_layers=2, hidden_dim=6)
    worst, points = 0.0, 0
    for _ in range(100):
        model = init_model(3, cfg, rng)
        model.head_w = rng.normal(size=6)
        model.head_b = float(rng.normal())
        base = [np.array(p, dtype=float) for p in model.parameters()]
        analytic = np.concatenate([np.ravel(a) for a in loss_and_gradients(model, batch)[1]])
        numeric = []
        for k, p in enumerate(base):
            for idx in np.ndindex(p.shape):
                vals = []
                for delta in (step, -step):
                    q = [x.copy() for x in base]
                    q[k][idx] += delta
                    model.set_parameters(q)
                    vals.append(loss_and_gradients(model, batch)[0])
                numeric.append((vals[0] - vals[1]) / (2 * step))
        numeric = np.array(numeric)
        denom = max(np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-12)
        worst = max(worst, float(np.linalg.norm(numeric - analytic) / denom))
        points += 1
    ok = record(4, "gradient correctness", points >= 100 and worst <= 1e-4,
                f"{points} parameter points, max relative error {worst:.1e}",
                time.perf_counter() - t0, 30)
    assert ok


# -- 5 ---------------------------------------------------------------------


def _pairs(rep, kind):
    return {tuple(p) for p in getattr(rep, f"{kind}_pairs").tolist()}


def test_criterion_5_neighbor_enumeration_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    checked, mismatches = 0, 0
    for n in range(1, 7):
        pos = rng.uniform(0, 5, size=(n, 3)) + np.arange(n)[:, None] * 1.7
        for edges in all_connected_graphs(n):
            g = make_graph(n, edges, positions=pos)
            rep = build_distance_geometric(g)
            e, a, d = brute_force_pairs(n, edges)
            mismatches += (_pairs(rep, "edge"), _pairs(rep, "angle"), _pairs(rep, "dihedral")) != (e, a, d)
            checked += 1
    exhaustive = checked
    for _ in range(200):
        g = random_connected_graph(rng, 10, 1)
        rep = build_distance_geometric(g)
        e, a, d = brute_force_pairs(g.num_nodes, [tuple(x) for x in g.unordered_edges().tolist()])
        mismatches += (_pairs(rep, "edge"), _pairs(rep, "angle"), _pairs(rep, "dihedral")) != (e, a, d)
        checked += 1
    ok = record(5, "neighbor-enumeration oracle", mismatches == 0,
                f"{exhaustive} exhaustive graphs (<=6 nodes) + 200 random (<=10 nodes), "
                f"mismatches {mismatches}", time.perf_counter() - t0, 30)
    assert ok


# -- 6 ---------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_6_bho_sanity():
    t0 = time.perf_counter()
    space = HyperparamSpace()
    mid = (space.lower + space.upper) / 2

    def quadratic(p):
        return float(np.sum((p.to_vector() - mid) ** 2))

    near, beats, rows = 0, 0, []
    for seed in range(10):
        bho = optimize(quadratic, space, total_trials=40, seed=seed).best_objective
        rand = random_search(quadratic, space, total_trials=40, seed=seed).best_objective
        near += bho <= 0.1
        beats += bho <= rand
        rows.append(f"{bho:.3f}/{rand:.3f}")
    ok = record(6, "BHO sanity", near >= 8 and beats >= 7,
                f"within 0.1 in {near}/10 seeds, >= random search in {beats}/10 "
                f"(bho/random: {' '.join(rows)})", time.perf_counter() - t0, 120)
    assert ok


# -- 7 ---------------------------------------------------------------------

SYNTHETIC_CONFIG = dict(epochs=50, readout="sum")


@pytest.mark.slow
def test_criterion_7_synthetic_directional():
    t0 = time.perf_counter()
    wins, rows = 0, []
    for seed in range(10):
        tr, va, _ = split(prepare(synthetic_dataset(500, seed)), SplitSpec(counts=(400, 50, 50), seed=seed))
        cfg = ModelConfig(seed=seed, neighbor_order=NeighborOrder.THIRD, **SYNTHETIC_CONFIG)
        std = train(tr, va, cfg, None).history.val_rmse[-1]
        geo = train(tr, va, cfg, PowerLawParams.reference()).history.val_rmse[-1]
        wins += geo < std
        rows.append(f"{geo:.3f}/{std:.3f}")
    ok = record(7, "directional improvement, synthetic", wins >= 8,
                f"geometric < standard in {wins}/10 seeds (geo/std val RMSE: {' '.join(rows)})",
                time.perf_counter() - t0, 300)
    assert ok


# -- 8 ---------------------------------------------------------------------


def _directional_run(tmp_path, dataset, split_counts, fmt=None, target_field=None):
    base = dict(dataset=str(dataset), format=fmt, target_field=target_field,
                split_fractions=None, split_counts=list(split_counts), num_seeds=5,
                neighbor_order=3, **SYNTHETIC_CONFIG)
    std = run_train(ExperimentConfig.from_dict({**base, "mode": "standard",
                                                "output": str(tmp_path / "std")}))
    geo = run_train(ExperimentConfig.from_dict({**base, "mode": "geometric-ref",
                                                "output": str(tmp_path / "geo")}))
    return directional_check(std, geo), std["split_sizes"]


@pytest.mark.slow
def test_criterion_8_reference_table_status(tmp_path):
    """Reference RMSEs are context only; the harness checks direction on user data."""
    t0 = time.perf_counter()
    user_data = os.environ.get("GEOGC_ACCEPTANCE_DATA")
    if user_data:
        counts = [int(v) for v in os.environ.get("GEOGC_ACCEPTANCE_SPLIT", "901,113,113").split(",")]
        verdict, sizes = _directional_run(tmp_path, user_data, counts,
                                          os.environ.get("GEOGC_ACCEPTANCE_FORMAT"),
                                          os.environ.get("GEOGC_ACCEPTANCE_TARGET"))
        passed = verdict["passed"]
        source = f"user data {user_data}"
    else:
        # no external data: exercise the harness end to end on a synthetic
        # stand-in at the ESOL split sizes; direction is reported, not asserted
        verdict, sizes = _directional_run(tmp_path, "synthetic:1127:8", (901, 113, 113))
        consistent = verdict["passed"] == (verdict["geometric"] < verdict["standard"])
        passed = verdict["enough_seeds"] and consistent
        source = "synthetic stand-in (no GEOGC_ACCEPTANCE_DATA), direction not asserted"
    context = reference_context(sizes) or "no reference numbers for this split"
    ok = record(8, "reference-table status", passed,
                f"{source}; split {sizes}, {verdict['seeds']} seeds, geometric "
                f"{verdict['geometric']:.4f} vs standard {verdict['standard']:.4f} -> "
                f"{'lower' if verdict['passed'] else 'not lower'}; {context}",
                time.perf_counter() - t0, 600)
    assert ok


# -- 9 ---------------------------------------------------------------------


def test_criterion_9_spectral_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    lo, hi = np.inf, -np.inf
    for k in range(200):
        n = int(rng.integers(1, 9))
        iu = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5]
        # spread weights over many orders of magnitude, up to the clamp
        w = 10.0 ** rng.uniform(-3, 6, size=len(iu))
        pairs = iu + [(j, i) for i, j in iu]
        adj = WeightedAdjacency(np.array(pairs, dtype=np.int64).reshape(-1, 2),
                                np.concatenate([w, w]), n)
        eig = np.linalg.eigvalsh(normalize(adj).to_dense())
        lo, hi = min(lo, eig.min()), max(hi, eig.max())
    ok = record(9, "spectral bound", lo >= -1 - 1e-9 and hi <= 1 + 1e-9,
                f"200 graphs, eigenvalues in [{lo:.12f}, {hi:.12f}]",
                time.perf_counter() - t0, 10)
    assert ok


if __name__ == "__main__":
    import tempfile

    warnings.simplefilter("ignore")
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                pass

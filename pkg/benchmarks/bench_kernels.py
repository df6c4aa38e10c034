"""Compare the compiled and pure-numpy propagation kernels.

    python benchmarks/bench_kernels.py [--graphs 400] [--repeat 20]

Times normalization and sparse products on a block-diagonal batch of
synthetic molecules, then one full training epoch with each backend.
"""
import argparse
import statistics
import time

import numpy as np

from geogc import _pykernels, nn
from geogc.synthetic import synthetic_dataset
from geogc.weighting import NeighborOrder, PowerLawParams

try:
    from geogc import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def batch_arrays(items, params):
    adjs = [nn.build_adjacency(it, params, NeighborOrder.THIRD) for it in items]
    pairs, weights, offset = [], [], 0
    for a in adjs:
        pairs.append(a.pairs + offset)
        weights.append(a.weights)
        offset += a.num_nodes
    return np.concatenate(pairs), np.concatenate(weights), offset


def epoch_time(items, params, backend, repeat):
    saved = nn.kernels.normalized_csr, nn.kernels.csr_matmul
    nn.kernels.normalized_csr, nn.kernels.csr_matmul = backend.normalized_csr, backend.csr_matmul
    try:
        batch = nn.batch_for(items, params, NeighborOrder.THIRD)
        model = nn.init_model(batch.x.shape[1], nn.ModelConfig())
        model.head_w = np.random.default_rng(0).normal(size=model.head_w.shape)
        return best_of(lambda: nn.loss_and_gradients(model, batch), repeat)
    finally:
        nn.kernels.normalized_csr, nn.kernels.csr_matmul = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--graphs", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    items = nn.prepare(synthetic_dataset(args.graphs, seed=0))
    params = PowerLawParams.reference()
    pairs, weights, n = batch_arrays(items, params)
    x = np.random.default_rng(1).normal(size=(n, 64))
    print(f"{args.graphs} graphs, {n} nodes, {len(pairs)} directed pairs, 64 features")

    backends = [("numpy", _pykernels)]
    if _ckernels is None:
        print("compiled kernels not built; only numpy timings shown")
    else:
        backends.append(("cython", _ckernels))

    rows = []
    for name, mod in backends:
        csr = mod.normalized_csr(pairs, weights, n)
        t_norm = best_of(lambda: mod.normalized_csr(pairs, weights, n), args.repeat)
        t_mm = best_of(lambda: mod.csr_matmul(*csr, x), args.repeat)
        t_ep = epoch_time(items, params, mod, max(3, args.repeat // 4))
        rows.append((name, t_norm, t_mm, t_ep))

    print(f"{'backend':8} {'normalize ms':>14} {'matmul ms':>12} {'loss+grad ms':>14}  (best / median)")
    for name, a, b, c in rows:
        cells = [f"{v[0] * 1e3:6.2f}/{v[1] * 1e3:6.2f}" for v in (a, b, c)]
        print(f"{name:8} {cells[0]:>14} {cells[1]:>12} {cells[2]:>14}")
    if len(rows) == 2:
        for label, k in (("normalize", 1), ("matmul", 2), ("loss+grad", 3)):
            print(f"speedup {label}: {rows[0][k][0] / rows[1][k][0]:.1f}x")


if __name__ == "__main__":
    main()

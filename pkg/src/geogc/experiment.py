"""Experiment configuration and the run drivers behind the CLI."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .bho import DEFAULT_BOUNDS, HyperparamSpace, optimize, train_evaluate
from .geometry import classify_pairs
from .ingest import SplitSpec, load_dataset, split
from .nn import ModelConfig, evaluate, prepare, save_checkpoint, train
from .synthetic import parse_synthetic, synthetic_dataset
from .weighting import PARAM_NAMES, NeighborOrder, PowerLawParams

MODES = ("standard", "geometric-ref", "geometric-bho")

# Reference ESOL/FreeSolv RMSEs, printed next to local results for context only.
REFERENCE_RMSE = {
    "ESOL": {"split": (901, 113, 113), "standard": 0.4573, "geometric-ref-3": 0.4273,
             "geometric-bho-3": 0.4261},
    "FreeSolv": {"split": (510, 64, 65), "standard": 0.4183, "geometric-ref-3": 0.3710,
                 "geometric-bho-3": 0.3764},
}


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic:500:0"
    format: Optional[str] = None
    target_field: Optional[str] = None
    split_fractions: Optional[list] = field(default_factory=lambda: [0.8, 0.1, 0.1])
    split_counts: Optional[list] = None
    mode: str = "geometric-ref"
    neighbor_order: int = 3
    params: Optional[dict] = None
    space: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_BOUNDS.items()})
    trials: int = 20
    seed: int = 0
    num_seeds: int = 1
    seeds: Optional[list] = None
    num_layers: int = 2
    hidden_dim: int = 64
    activation: str = "relu"
    readout: str = "mean"
    learning_rate: float = 1e-2
    epochs: int = 50
    output: str = "runs/default"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.neighbor_order = int(NeighborOrder.parse(self.neighbor_order))
        if self.split_counts is not None:
            self.split_fractions = None
        if self.mode == "geometric-bho" and (not self.space or self.trials < 1):
            raise ValueError("geometric-bho needs a search space and trials >= 1")
        if self.params is not None:
            PowerLawParams(**self.params)
        HyperparamSpace(self.space)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def run_seeds(self) -> list[int]:
        if self.seeds:
            return [int(s) for s in self.seeds]
        return [self.seed + k for k in range(self.num_seeds)]

    def split_spec(self) -> SplitSpec:
        if self.split_counts is not None:
            return SplitSpec(counts=tuple(self.split_counts), seed=self.seed)
        return SplitSpec(fractions=tuple(self.split_fractions), seed=self.seed)

    def model_config(self, seed: int) -> ModelConfig:
        return ModelConfig(
            num_layers=self.num_layers, hidden_dim=self.hidden_dim,
            activation=self.activation, readout=self.readout,
            learning_rate=self.learning_rate, epochs=self.epochs, seed=seed,
            neighbor_order=self.neighbor_order,
        )

    def power_law_params(self) -> Optional[PowerLawParams]:
        if self.mode == "standard":
            return None
        if self.params is not None:
            return PowerLawParams(**self.params)
        return PowerLawParams.reference()


def load_graphs(cfg: ExperimentConfig):
    synth = parse_synthetic(cfg.dataset)
    if synth is not None:
        return synthetic_dataset(*synth)
    return load_dataset(cfg.dataset, cfg.format, cfg.target_field)


def model_label(mode: str, order: int) -> str:
    if mode == "standard":
        return "Standard GC"
    kind = "Ref" if mode == "geometric-ref" else "BHO"
    suffix = {1: "1st", 2: "2nd", 3: "3rd"}[int(order)]
    return f"Geometric GC ({kind}) - {suffix} Nbrs"


def _summary(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


# -- featurize -------------------------------------------------------------

HIST_EDGES = np.arange(0.0, 8.0 + 1e-9, 0.25)


def featurize_stats(graphs) -> dict:
    if not graphs:
        raise ValueError("dataset is empty")
    per_graph = []
    pools = {"edge": [], "angle": [], "dihedral": []}
    for g in graphs:
        rep = prepare([g])[0].rep
        u, ut, up = rep.counts
        per_graph.append({"id": g.id, "num_nodes": g.num_nodes, "U": u, "U_theta": ut, "U_phi": up})
        pools["edge"].extend(rep.edge_distances.tolist())
        pools["angle"].extend(rep.angle_distances.tolist())
        pools["dihedral"].extend(rep.dihedral_distances.tolist())
    hist = {}
    for kind, vals in pools.items():
        counts, _ = np.histogram(np.clip(vals, 0, HIST_EDGES[-1]), bins=HIST_EDGES)
        v = np.asarray(vals)
        hist[kind] = {
            "bin_edges": HIST_EDGES.tolist(),
            "counts": counts.tolist(),
            "n": int(len(v)),
            "min": float(v.min()) if len(v) else None,
            "max": float(v.max()) if len(v) else None,
            "mean": float(v.mean()) if len(v) else None,
        }
    ang = np.asarray(pools["angle"])
    return {
        "num_graphs": len(graphs),
        "totals": {k: sum(p[k] for p in per_graph) for k in ("U", "U_theta", "U_phi")},
        "per_graph": per_graph,
        "histograms": hist,
        # typical organics put angle-edge distances in roughly 1.5-3 Å
        "angle_distance_fraction_1p5_to_3": float(np.mean((ang >= 1.5) & (ang <= 3.0))) if len(ang) else None,
    }


# -- train -----------------------------------------------------------------


def run_train(cfg: ExperimentConfig, params: Optional[PowerLawParams] = None,
              mode: Optional[str] = None) -> dict:
    """Train once per seed and write metrics, report and checkpoints."""
    mode = mode or cfg.mode
    if params is None:
        params = cfg.power_law_params()
    graphs = load_graphs(cfg)
    if not graphs:
        raise ValueError("dataset is empty")
    tr, va, te = split(graphs, cfg.split_spec())
    if params is not None:
        tr, va, te = prepare(tr), prepare(va), prepare(te)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)

    per_seed = []
    for s in cfg.run_seeds:
        trained = train(tr, va, cfg.model_config(s), params)
        per_seed.append({
            "seed": s,
            "val_rmse": evaluate(trained, va),
            "test_rmse": evaluate(trained, te) if te else None,
            "final_train_mse": trained.history.train_loss[-1],
        })
        save_checkpoint(trained, out / f"model_seed{s}.json")

    val_mean, val_std = _summary([p["val_rmse"] for p in per_seed])
    tests = [p["test_rmse"] for p in per_seed if p["test_rmse"] is not None]
    test_mean, test_std = _summary(tests) if tests else (None, None)
    metrics = {
        "model": model_label(mode, cfg.neighbor_order),
        "mode": mode,
        "neighbor_order": cfg.neighbor_order,
        "params": None if params is None else params.as_dict(),
        "split_sizes": [len(tr), len(va), len(te)],
        "per_seed": per_seed,
        "val_rmse_mean": val_mean,
        "val_rmse_std": val_std,
        "test_rmse_mean": test_mean,
        "test_rmse_std": test_std,
        "root_seed": cfg.seed,
        "backend": kernels.BACKEND,
        "config": cfg.to_dict(),
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    write_report([metrics], out)
    return metrics


# -- bho -------------------------------------------------------------------


def run_bho(cfg: ExperimentConfig) -> dict:
    graphs = load_graphs(cfg)
    if not graphs:
        raise ValueError("dataset is empty")
    tr, va, _ = split(graphs, cfg.split_spec())
    tr, va = prepare(tr), prepare(va)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    space = HyperparamSpace(cfg.space)
    model_cfg = cfg.model_config(cfg.run_seeds[0])

    result = optimize(
        lambda p: train_evaluate(p, tr, va, model_cfg),
        space, total_trials=cfg.trials, seed=cfg.seed, log_path=out / "trials.jsonl",
    )
    if result.best_params is None:
        raise ArithmeticError("every trial failed")
    at_bound = [
        k for k, v in result.best_params.as_dict().items()
        if math.isclose(v, space.bounds[k][0]) or math.isclose(v, space.bounds[k][1])
    ]
    summary = {
        "best_params": result.best_params.as_dict(),
        "best_val_rmse": result.best_objective,
        "trials": len(result.trials),
        "failed_trials": sum(not t.ok for t in result.trials),
        "params_at_bounds": at_bound,
        "space": space.bounds,
        "config": cfg.to_dict(),
    }
    (out / "bho_report.json").write_text(json.dumps(summary, indent=2))
    metrics = run_train(cfg, params=result.best_params, mode="geometric-bho")
    metrics["bho"] = {k: summary[k] for k in ("best_val_rmse", "trials", "failed_trials", "params_at_bounds")}
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    return summary


# -- report ----------------------------------------------------------------

COLUMNS = ["Model", "R0", "N", "R0_theta", "N_theta", "R0_phi", "N_phi",
           "RMSE_val", "RMSE_val_std", "RMSE_test", "RMSE_test_std", "seeds"]


def report_rows(metrics_list) -> list[list[str]]:
    rows = []
    for m in metrics_list:
        p = m.get("params")
        order = int(m.get("neighbor_order", 3))
        vals = []
        for k, name in enumerate(PARAM_NAMES):
            kind_order = k // 2 + 1
            vals.append("-" if p is None or kind_order > order else f"{p[name]:.4g}")
        fmt = lambda v: "-" if v is None else f"{v:.4f}"
        rows.append([m["model"], *vals, fmt(m["val_rmse_mean"]), fmt(m["val_rmse_std"]),
                     fmt(m["test_rmse_mean"]), fmt(m["test_rmse_std"]), str(len(m["per_seed"]))])
    return rows


def format_table(rows) -> str:
    table = [COLUMNS] + rows
    widths = [max(len(r[c]) for r in table) for c in range(len(COLUMNS))]
    lines = []
    for k, r in enumerate(table):
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def directional_check(standard: dict, geometric: dict, min_seeds: int = 5) -> dict:
    """Geometric mean validation RMSE below the standard baseline's."""
    n = min(len(standard["per_seed"]), len(geometric["per_seed"]))
    return {
        "standard": standard["val_rmse_mean"],
        "geometric": geometric["val_rmse_mean"],
        "seeds": n,
        "enough_seeds": n >= min_seeds,
        "passed": n >= min_seeds and geometric["val_rmse_mean"] < standard["val_rmse_mean"],
    }


def reference_context(split_sizes) -> Optional[str]:
    sizes = sorted(split_sizes)
    for name, ref in REFERENCE_RMSE.items():
        if sorted(ref["split"]) == sizes:
            parts = [f"{k}={v}" for k, v in ref.items() if k != "split"]
            return f"reference {name} RMSEs (context only, not reproduced): " + ", ".join(parts)
    return None


def write_report(metrics_list, out_dir) -> str:
    import csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = report_rows(metrics_list)
    text = [format_table(rows)]
    std = [m for m in metrics_list if m["mode"] == "standard"]
    geo = [m for m in metrics_list if m["mode"] != "standard"]
    for s in std:
        for g in geo:
            chk = directional_check(s, g)
            verdict = "PASS" if chk["passed"] else ("FAIL" if chk["enough_seeds"] else "n/a (<5 seeds)")
            text.append(
                f"directional check {g['model']} vs {s['model']}: "
                f"{chk['geometric']:.4f} < {chk['standard']:.4f} -> {verdict}"
            )
    for m in metrics_list:
        ctx = reference_context(m.get("split_sizes", []))
        if ctx:
            text.append(ctx)
            break
    body = "\n".join(text) + "\n"
    (out / "report.txt").write_text(body)
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        w.writerows(rows)
    return body


def load_metrics(run_dir) -> dict:
    path = Path(run_dir) / "metrics.json"
    if not path.exists():
        raise FileNotFoundError(f"{run_dir}: missing metrics.json")
    return json.loads(path.read_text())

"""Dataset ingestion: JSONL records, SDF V2000 molblocks, featurization, splits.

JSONL record layout (one object per line, UTF-8)::

    {"id": "mol-1",
     "nodes": [{"element": "C", "x": 0.0, "y": 0.0, "z": 0.0, "extra": [..]}, ...],
     "edges": [[0, 1, 1.0], ...],        # each undirected edge once; order optional
     "target": -0.77}
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import CountsMismatch, ParseError, SizeMismatch, UnsupportedFormat, ValidationError
from .types import Graph3D, validate

log = logging.getLogger(__name__)

VOCABULARY = ("H", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I", "other")
_SLOT = {sym: k for k, sym in enumerate(VOCABULARY[:-1])}


def featurize_atoms(elements: Sequence[str], extra=None) -> np.ndarray:
    """One-hot element encoding (11 columns) followed by any extra columns."""
    out = np.zeros((len(elements), len(VOCABULARY)))
    unknown = set()
    for row, sym in enumerate(elements):
        slot = _SLOT.get(sym)
        if slot is None:
            unknown.add(sym)
            slot = len(VOCABULARY) - 1
        out[row, slot] = 1.0
    if unknown:
        log.warning("unknown element symbol(s) %s mapped to 'other'", sorted(unknown))
    if extra is not None:
        extra = np.asarray(extra, dtype=np.float64).reshape(len(elements), -1)
        out = np.hstack([out, extra])
    return out


def elements_from_features(node_features: np.ndarray) -> list[str]:
    onehot = node_features[:, : len(VOCABULARY)]
    return [VOCABULARY[int(k)] if VOCABULARY[int(k)] != "other" else "X"
            for k in onehot.argmax(axis=1)]


def _undirected(edges, n_edges_hint=None):
    """Deduplicate listed edges into unordered pairs, keeping first bond order."""
    seen = {}
    for e in edges:
        i, j = int(e[0]), int(e[1])
        key = (min(i, j), max(i, j))
        if key not in seen:
            seen[key] = None if len(e) < 3 or e[2] is None else float(e[2])
    return seen


def _graph_from_parts(gid, elements, positions, extra, edges: dict, target):
    pairs = np.array(list(edges.keys()), dtype=np.int64).reshape(-1, 2)
    edge_index = np.concatenate([pairs, pairs[:, ::-1]])
    orders = list(edges.values())
    edge_features = None
    if orders and all(o is not None for o in orders):
        ef = np.array(orders, dtype=np.float64)
        edge_features = np.concatenate([ef, ef]).reshape(-1, 1)
    graph = Graph3D(
        node_features=featurize_atoms(elements, extra),
        edge_index=edge_index,
        positions=np.array(positions, dtype=np.float64).reshape(-1, 3),
        edge_features=edge_features,
        target=target,
        id=gid,
    )
    problems = validate(graph)
    if problems:
        raise ValidationError(gid, problems)
    return graph


def record_to_graph(rec: dict) -> Graph3D:
    nodes = rec["nodes"]
    elements = [str(nd["element"]) for nd in nodes]
    positions = [[float(nd["x"]), float(nd["y"]), float(nd["z"])] for nd in nodes]
    extras = [nd.get("extra") for nd in nodes]
    extra = None
    if any(e for e in extras):
        if not all(e is not None and len(e) == len(extras[0]) for e in extras):
            raise ValueError("'extra' must be present with equal length on every node")
        extra = extras
    target = rec.get("target")
    if target is not None and not math.isfinite(float(target)):
        raise ValueError("target must be finite")
    return _graph_from_parts(
        str(rec.get("id", "")), elements, positions, extra,
        _undirected(rec.get("edges", [])), target,
    )


def graph_to_record(graph: Graph3D) -> dict:
    elements = elements_from_features(graph.node_features)
    extra = graph.node_features[:, len(VOCABULARY):]
    nodes = []
    for k, sym in enumerate(elements):
        x, y, z = (float(v) for v in graph.positions[k])
        nd = {"element": sym, "x": x, "y": y, "z": z}
        if extra.shape[1]:
            nd["extra"] = extra[k].tolist()
        nodes.append(nd)
    edges = []
    for k, (i, j) in enumerate(graph.edge_index.tolist()):
        if i < j:
            e = [i, j]
            if graph.edge_features is not None:
                e.append(float(graph.edge_features[k, 0]))
            edges.append(e)
    return {"id": graph.id, "nodes": nodes, "edges": edges, "target": graph.target}


def write_jsonl(graphs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in graphs:
            fh.write(json.dumps(graph_to_record(g)) + "\n")


def parse_jsonl(path) -> list[Graph3D]:
    graphs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"malformed JSON: {exc.msg}") from exc
            try:
                graphs.append(record_to_graph(rec))
            except ValidationError:
                raise
            except (KeyError, TypeError, ValueError, IndexError) as exc:
                raise ParseError(lineno, f"bad record: {exc!r}") from exc
    return graphs


# -- SDF V2000 -------------------------------------------------------------


def _parse_molblock(lines: list[str], start_line: int, target_field: Optional[str], index: int):
    if len(lines) < 4:
        raise ParseError(start_line, "molblock shorter than header + counts line")
    counts = lines[3]
    if "V3000" in counts:
        raise UnsupportedFormat(f"line {start_line + 3}: V3000 molblocks are not supported")
    try:
        n_atoms = int(counts[0:3])
        n_bonds = int(counts[3:6])
    except ValueError as exc:
        raise ParseError(start_line + 3, f"bad counts line {counts!r}") from exc

    body = []
    k = 4
    while k < len(lines) and not lines[k].startswith("M  ") and not lines[k].startswith(">"):
        body.append(lines[k])
        k += 1
    if len(body) != n_atoms + n_bonds:
        raise CountsMismatch(
            f"line {start_line + 3}: counts line declares {n_atoms} atoms + {n_bonds} bonds "
            f"but the block has {len(body)} lines"
        )

    elements, positions = [], []
    for a, row in enumerate(body[:n_atoms]):
        try:
            positions.append([float(row[0:10]), float(row[10:20]), float(row[20:30])])
            sym = row[31:34].strip()
        except ValueError as exc:
            raise CountsMismatch(
                f"line {start_line + 4 + a}: expected an atom line, got {row!r}"
            ) from exc
        if not sym:
            raise ParseError(start_line + 4 + a, "missing element symbol")
        elements.append(sym)

    edges = {}
    for b, row in enumerate(body[n_atoms:]):
        try:
            i, j, order = int(row[0:3]) - 1, int(row[3:6]) - 1, float(row[6:9])
        except ValueError as exc:
            raise ParseError(start_line + 4 + n_atoms + b, f"bad bond line {row!r}") from exc
        edges.setdefault((min(i, j), max(i, j)), order)

    fields = {}
    while k < len(lines):
        line = lines[k]
        if line.startswith(">") and "<" in line and ">" in line[1:]:
            name = line[line.index("<") + 1: line.index(">", line.index("<"))]
            value = []
            k += 1
            while k < len(lines) and lines[k].strip():
                value.append(lines[k].strip())
                k += 1
            fields[name] = "\n".join(value)
        k += 1

    target = None
    if target_field is not None:
        if target_field not in fields:
            raise ParseError(start_line, f"data field <{target_field}> missing")
        try:
            target = float(fields[target_field])
        except ValueError as exc:
            raise ParseError(start_line, f"<{target_field}> is not a number") from exc

    gid = lines[0].strip() or f"mol-{index}"
    return _graph_from_parts(gid, elements, positions, None, edges, target)


def parse_sdf(path, target_field: Optional[str] = None) -> list[Graph3D]:
    """Read every V2000 molblock of an SD file; hydrogens are kept as written."""
    text = Path(path).read_text(encoding="utf-8")
    graphs, block, start = [], [], 1
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip() == "$$$$":
            if any(l.strip() for l in block):
                graphs.append(_parse_molblock(block, start, target_field, len(graphs)))
            block, start = [], lineno + 1
        else:
            block.append(line)
    if any(l.strip() for l in block):
        graphs.append(_parse_molblock(block, start, target_field, len(graphs)))
    return graphs


# -- splits ----------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    """Either ``fractions`` or ``counts`` as (train, val, test)."""

    fractions: Optional[tuple] = None
    counts: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        if (self.fractions is None) == (self.counts is None):
            raise ValueError("give exactly one of fractions or counts")
        if self.fractions is not None:
            f = tuple(float(v) for v in self.fractions)
            if len(f) != 3 or any(v < 0 for v in f) or abs(sum(f) - 1.0) > 1e-9:
                raise ValueError(f"fractions must be three non-negative numbers summing to 1, got {f}")
            object.__setattr__(self, "fractions", f)
        else:
            c = tuple(int(v) for v in self.counts)
            if len(c) != 3 or any(v < 0 for v in c):
                raise ValueError(f"counts must be three non-negative integers, got {c}")
            object.__setattr__(self, "counts", c)

    def sizes(self, n: int) -> tuple[int, int, int]:
        if self.counts is not None:
            if sum(self.counts) != n:
                raise SizeMismatch(f"split counts {self.counts} sum to {sum(self.counts)}, dataset has {n}")
            return self.counts
        n_val = int(round(self.fractions[1] * n))
        n_test = int(round(self.fractions[2] * n))
        return n - n_val - n_test, n_val, n_test


def split(dataset: Sequence, spec: SplitSpec):
    """Seeded shuffle, then (train, val, test) partitions."""
    n_train, n_val, _ = spec.sizes(len(dataset))
    perm = np.random.default_rng(spec.seed).permutation(len(dataset))
    items = [dataset[int(k)] for k in perm]
    return items[:n_train], items[n_train:n_train + n_val], items[n_train + n_val:]


def load_dataset(path, fmt: Optional[str] = None, target_field: Optional[str] = None):
    fmt = fmt or ("sdf" if str(path).lower().endswith((".sdf", ".sd", ".mol")) else "jsonl")
    if fmt == "sdf":
        return parse_sdf(path, target_field)
    if fmt == "jsonl":
        return parse_jsonl(path)
    raise ValueError(f"unknown dataset format {fmt!r}")

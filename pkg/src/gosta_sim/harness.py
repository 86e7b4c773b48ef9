"""Experiment orchestration: configs, synthetic data, multi-run aggregation.

An experiment runs a list of protocols on one shared (graph, kernel, data)
triple for R independent runs each, aggregates relative errors across nodes
and runs, and writes one CSV per protocol plus a combined comparison CSV.
Per-run seeds derive from (base seed, protocol index, run index) through a
fixed splitting function, so outputs are byte-identical on replay.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import engines, kernels
from .engines import EngineConfig, derive_seed, relative_error
from .graph import (Graph, make_complete, make_grid2d, make_watts_strogatz,
                    read_graph_file)
from .kernels import DesignMatrix, LabeledDataset, Partition
from .spectral import beta_second_smallest

__all__ = [
    "ExperimentSpec",
    "AggregateResult",
    "ProtocolAggregate",
    "load_experiment",
    "synth_gaussian_mixture",
    "synth_two_class",
    "run_experiment",
    "reaching_time",
    "table1",
    "build_graph_from_spec",
    "parse_graph_spec_string",
]

_GRAPH_KEYS = {
    "complete": {"n"},
    "grid2d": {"rows", "cols"},
    "watts_strogatz": {"n", "k", "p"},
    "file": {"path"},
}
_DATA_KEYS = {
    "csv": {"path", "cell_column"},
    "gaussian_mixture": {"n", "d", "clusters", "separation"},
    "two_class": {"n", "d", "margin"},
}
_KERNEL_NAMES = ("variance", "scatter", "auc")
_CHECKPOINT_POLICIES = ("geometric", "every")


@dataclass(frozen=True)
class ExperimentSpec:
    """Validated experiment description, ready to run."""

    graph: dict
    kernel: dict
    data: dict
    protocols: tuple[str, ...]
    iters: int
    runs: int
    seed: int
    checkpoint_policy: str = "geometric"
    checkpoint_step: int = 1
    checkpoint_max_points: int = 200
    output_dir: str = "."


@dataclass
class ProtocolAggregate:
    """Aggregated error curves for one protocol.

    ``err_mean`` averages the within-run node means across runs;
    ``err_std_nodes`` is the across-node std averaged over runs and
    ``err_std_runs`` the std of the per-run node means across runs.
    ``per_run_means`` has shape (runs, checkpoints).
    """

    protocol: str
    ts: np.ndarray
    comm_units: np.ndarray
    err_mean: np.ndarray
    err_std_nodes: np.ndarray
    err_std_runs: np.ndarray
    per_run_means: np.ndarray
    per_run_stds: np.ndarray
    absolute: bool


@dataclass
class AggregateResult:
    protocols: dict[str, ProtocolAggregate]
    truth: float | np.ndarray
    runs: int


def _reject_unknown(mapping: dict, allowed: set[str], where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ValueError(f"unknown key(s) {sorted(unknown)} in {where}; "
                         f"allowed: {sorted(allowed)}")


def load_experiment(path: str | Path) -> ExperimentSpec:
    """Parse and validate a JSON experiment config.

    Unknown keys are rejected at every level; referenced files must exist.
    Defaults: checkpoints policy "geometric" capped at 200 points,
    output_dir ".", seed 0, runs 1.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"experiment config not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{p}: invalid JSON ({exc})") from exc
    top_allowed = {"graph", "kernel", "data", "protocols", "iters", "runs",
                   "seed", "checkpoints", "output_dir"}
    _reject_unknown(raw, top_allowed, "experiment config")
    for req in ("graph", "kernel", "data", "protocols", "iters"):
        if req not in raw:
            raise ValueError(f"{p}: missing required key '{req}'")

    graph = dict(raw["graph"])
    family = graph.pop("family", None)
    if family not in _GRAPH_KEYS:
        raise ValueError(f"graph family must be one of "
                         f"{sorted(_GRAPH_KEYS)}, got {family!r}")
    _reject_unknown(graph, _GRAPH_KEYS[family], f"graph spec '{family}'")
    graph["family"] = family
    if family == "file":
        gpath = Path(graph.get("path", ""))
        if not gpath.exists():
            raise FileNotFoundError(f"graph file not found: {gpath}")

    kernel = dict(raw["kernel"])
    _reject_unknown(kernel, {"name"}, "kernel spec")
    if kernel.get("name") not in _KERNEL_NAMES:
        raise ValueError(f"kernel name must be one of {_KERNEL_NAMES}")

    data = dict(raw["data"])
    kind = data.pop("kind", None)
    if kind not in _DATA_KEYS:
        raise ValueError(f"data kind must be one of {sorted(_DATA_KEYS)}, "
                         f"got {kind!r}")
    _reject_unknown(data, _DATA_KEYS[kind], f"data spec '{kind}'")
    data["kind"] = kind
    if kind == "csv":
        dpath = Path(data.get("path", ""))
        if not dpath.exists():
            raise FileNotFoundError(f"dataset file not found: {dpath}")

    protocols = tuple(raw["protocols"])
    if not protocols:
        raise ValueError("protocols list must be nonempty")
    for proto in protocols:
        if proto not in engines.PROTOCOLS:
            raise ValueError(f"unknown protocol '{proto}'")

    iters = int(raw["iters"])
    if iters < 1:
        raise ValueError("iters must be >= 1")
    runs = int(raw.get("runs", 1))
    if runs < 1:
        raise ValueError("runs must be >= 1")
    seed = int(raw.get("seed", 0))

    cp = dict(raw.get("checkpoints", {}))
    _reject_unknown(cp, {"policy", "step", "max_points"}, "checkpoints spec")
    policy = cp.get("policy", "geometric")
    if policy not in _CHECKPOINT_POLICIES:
        raise ValueError(f"checkpoint policy must be one of "
                         f"{_CHECKPOINT_POLICIES}")
    step = int(cp.get("step", 1))
    if policy == "every" and not 1 <= step <= iters:
        raise ValueError("checkpoint step must satisfy 1 <= step <= iters")
    max_points = int(cp.get("max_points", 200))
    if max_points < 1:
        raise ValueError("checkpoint max_points must be >= 1")

    return ExperimentSpec(graph=graph, kernel=kernel, data=data,
                          protocols=protocols, iters=iters, runs=runs,
                          seed=seed, checkpoint_policy=policy,
                          checkpoint_step=step,
                          checkpoint_max_points=max_points,
                          output_dir=str(raw.get("output_dir", ".")))


def synth_gaussian_mixture(n: int, d: int, clusters: int, separation: float,
                           rng: np.random.Generator
                           ) -> tuple[DesignMatrix, Partition]:
    """Balanced sample from ``clusters`` unit-variance spherical Gaussians.

    Centers sit on a circle in the first two coordinates (a line for d = 1)
    with nearest-center distance ``separation``; the partition holds the true
    component labels. Remainder observations go to the earliest cells.
    """
    if clusters < 1 or n < clusters:
        raise ValueError(f"need n >= clusters >= 1, got n={n}, "
                         f"clusters={clusters}")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if separation < 0:
        raise ValueError("separation must be >= 0")
    centers = np.zeros((clusters, d))
    if clusters > 1:
        if d == 1:
            centers[:, 0] = separation * np.arange(clusters)
        else:
            radius = separation / (2.0 * math.sin(math.pi / clusters))
            angles = 2.0 * math.pi * np.arange(clusters) / clusters
            centers[:, 0] = radius * np.cos(angles)
            centers[:, 1] = radius * np.sin(angles)
    base = n // clusters
    sizes = [base + (1 if c < n % clusters else 0) for c in range(clusters)]
    xs, labels = [], []
    for c, size in enumerate(sizes):
        xs.append(centers[c] + rng.standard_normal((size, d)))
        labels.extend([c + 1] * size)
    return (DesignMatrix(np.vstack(xs)),
            Partition(np.array(labels, dtype=np.int64)))


def synth_two_class(n: int, d: int, margin: float,
                    rng: np.random.Generator) -> LabeledDataset:
    """Two unit-variance Gaussian classes whose means differ by ``margin``
    along the first coordinate; labels +1/-1, balanced (+1 gets the
    remainder for odd n)."""
    if n < 2:
        raise ValueError("need n >= 2")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if margin < 0:
        raise ValueError("margin must be >= 0")
    n_pos = (n + 1) // 2
    n_neg = n - n_pos
    offset = np.zeros(d)
    offset[0] = margin / 2.0
    x_pos = offset + rng.standard_normal((n_pos, d))
    x_neg = -offset + rng.standard_normal((n_neg, d))
    labels = np.concatenate([np.ones(n_pos, np.int64),
                             -np.ones(n_neg, np.int64)])
    return LabeledDataset(DesignMatrix(np.vstack([x_pos, x_neg])), labels)


def parse_graph_spec_string(text: str) -> dict:
    """Parse CLI graph specs like ``complete:n=100``,
    ``grid2d:rows=10,cols=10``, ``watts_strogatz:n=100,k=5,p=0.3``, or a
    path to a graph file."""
    if ":" not in text:
        return {"family": "file", "path": text}
    family, _, rest = text.partition(":")
    if family not in _GRAPH_KEYS:
        return {"family": "file", "path": text}
    out: dict = {"family": family}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise ValueError(f"bad graph spec item '{item}' in '{text}'")
            out[key] = float(val) if key == "p" else int(val)
    _reject_unknown({k: v for k, v in out.items() if k != "family"},
                    _GRAPH_KEYS[family], f"graph spec '{family}'")
    return out


def build_graph_from_spec(spec: dict, seed: int = 0) -> Graph:
    """Materialize a graph spec dict; generator randomness derives from
    ``seed`` through the fixed splitting function."""
    family = spec["family"]
    if family == "complete":
        return make_complete(int(spec["n"]))
    if family == "grid2d":
        return make_grid2d(int(spec["rows"]), int(spec["cols"]))
    if family == "watts_strogatz":
        rng = np.random.default_rng(derive_seed(seed, 101))
        return make_watts_strogatz(int(spec["n"]), int(spec["k"]),
                                   float(spec["p"]), rng)
    if family == "file":
        return read_graph_file(spec["path"])
    raise ValueError(f"unknown graph family '{family}'")


def _materialize_data(spec: ExperimentSpec):
    """Return (data, partition) for kernel construction."""
    data = spec.data
    kind = data["kind"]
    kname = spec.kernel["name"]
    if kind == "csv":
        path = data["path"]
        if kname == "scatter":
            design, part = kernels.load_partitioned_csv(
                path, int(data.get("cell_column", -1)))
            return design, part
        if kname == "auc":
            return kernels.load_labeled_csv(path), None
        return kernels.load_design_csv(path), None
    rng = np.random.default_rng(derive_seed(spec.seed, 202))
    if kind == "gaussian_mixture":
        design, part = synth_gaussian_mixture(
            int(data["n"]), int(data["d"]), int(data["clusters"]),
            float(data["separation"]), rng)
        return design, part
    if kind == "two_class":
        return synth_two_class(int(data["n"]), int(data["d"]),
                               float(data["margin"]), rng), None
    raise ValueError(f"unknown data kind '{kind}'")


def _experiment_checkpoints(spec: ExperimentSpec) -> tuple[int, ...]:
    from .expectation import geometric_checkpoints
    if spec.checkpoint_policy == "geometric":
        return geometric_checkpoints(spec.iters, spec.checkpoint_max_points)
    ts = list(range(spec.checkpoint_step, spec.iters + 1,
                    spec.checkpoint_step))
    if ts[-1] != spec.iters:
        ts.append(spec.iters)
    return tuple(ts)


def run_experiment(spec: ExperimentSpec,
                   write_csvs: bool = True) -> AggregateResult:
    """Run all protocols of the experiment and aggregate error statistics.

    Relative errors are first averaged across nodes within a run, then
    across runs. Deterministic given the spec seed.
    """
    graph = build_graph_from_spec(spec.graph, spec.seed)
    data, partition = _materialize_data(spec)
    km = kernels.build_kernel_matrix(spec.kernel["name"], data, partition)
    if graph.n != km.n:
        raise ValueError(f"graph has {graph.n} nodes but the dataset has "
                         f"{km.n} observations")
    cps = _experiment_checkpoints(spec)
    x_boyd = None
    if "boyd" in spec.protocols:
        rows = data.design.rows if isinstance(data, LabeledDataset) else data.rows
        x_boyd = rows[:, 0].copy()

    aggregates: dict[str, ProtocolAggregate] = {}
    truth: float | np.ndarray = km.u_stat
    for pidx, proto in enumerate(spec.protocols):
        per_run_mean = np.empty((spec.runs, len(cps)))
        per_run_std = np.empty((spec.runs, len(cps)))
        comm = None
        absolute = False
        for run in range(spec.runs):
            cfg = EngineConfig(protocol=proto, max_iters=spec.iters,
                               seed=derive_seed(spec.seed, pidx, run),
                               checkpoints=cps)
            trace = engines.run_protocol(cfg, g=graph, km=km, x=x_boyd)
            err = relative_error(trace)
            per_run_mean[run] = err.mean
            per_run_std[run] = err.std
            absolute = err.absolute
            comm = trace.comm_units
        aggregates[proto] = ProtocolAggregate(
            protocol=proto,
            ts=np.array(cps, dtype=np.int64),
            comm_units=comm,
            err_mean=per_run_mean.mean(axis=0),
            err_std_nodes=per_run_std.mean(axis=0),
            err_std_runs=per_run_mean.std(axis=0),
            per_run_means=per_run_mean,
            per_run_stds=per_run_std,
            absolute=absolute,
        )
    result = AggregateResult(protocols=aggregates, truth=truth,
                             runs=spec.runs)
    if write_csvs:
        write_experiment_csvs(result, spec.output_dir)
    return result


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_experiment_csvs(result: AggregateResult,
                          output_dir: str | Path) -> list[Path]:
    """One per-protocol CSV (per-run rows) plus a combined comparison CSV.

    Schemas (fixed column order):
      <protocol>.csv: protocol,run,t,comm_units,err_mean,err_std
      comparison.csv: protocol,t,comm_units,err_mean,err_std_nodes,err_std_runs
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for proto, agg in result.protocols.items():
        path = out / f"{proto}.csv"
        lines = ["protocol,run,t,comm_units,err_mean,err_std"]
        for run in range(agg.per_run_means.shape[0]):
            for k, t in enumerate(agg.ts):
                lines.append(f"{proto},{run},{int(t)},{int(agg.comm_units[k])},"
                             f"{_fmt(agg.per_run_means[run, k])},"
                             f"{_fmt(agg.per_run_stds[run, k])}")
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    path = out / "comparison.csv"
    lines = ["protocol,t,comm_units,err_mean,err_std_nodes,err_std_runs"]
    for proto, agg in result.protocols.items():
        for k, t in enumerate(agg.ts):
            lines.append(f"{proto},{int(t)},{int(agg.comm_units[k])},"
                         f"{_fmt(agg.err_mean[k])},"
                         f"{_fmt(agg.err_std_nodes[k])},"
                         f"{_fmt(agg.err_std_runs[k])}")
    path.write_text("\n".join(lines) + "\n")
    written.append(path)
    return written


def reaching_time(result: AggregateResult,
                  threshold: float) -> dict[str, int | None]:
    """First checkpoint at which the mean relative error drops below the
    threshold, per protocol; None when never reached."""
    out: dict[str, int | None] = {}
    for proto, agg in result.protocols.items():
        below = np.nonzero(agg.err_mean < threshold)[0]
        out[proto] = int(agg.ts[below[0]]) if below.size else None
    return out


def table1(graph_specs: list[dict], seed: int = 0) -> list[dict]:
    """Averaging-gap table rows for a list of graph specs.

    Each row reports the vertex count, family label and the gap
    ``c = beta_{n-1} / (2 m)``, computed through the iterative
    second-eigenvalue path so large instances stay fast.
    """
    rows = []
    for spec in graph_specs:
        g = build_graph_from_spec(spec, seed)
        beta = beta_second_smallest(g)
        rows.append({
            "family": spec["family"],
            "n": g.n,
            "m": g.num_edges,
            "gap": beta / (2.0 * g.num_edges),
        })
    return rows

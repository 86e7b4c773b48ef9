"""Sequential simulators for every gossip protocol and the two baselines.

All protocols share the iteration model: one global step draws one edge
uniformly at random (two for the double-propagation protocol). Observations
travel by index; kernel values are looked up in the precomputed kernel
matrix, while communication accounting still charges d units per logical
observation transfer and 1 unit per transmitted scalar estimate.

A single run is strictly sequential and driven by one seeded random stream;
edge draws are generated in iteration order. Identical (graph, kernel,
config, seed) inputs produce bit-identical traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, warn_if_unsuitable
from .kernels import KernelMatrix

__all__ = [
    "PROTOCOLS",
    "EngineConfig",
    "ProtocolState",
    "Trace",
    "RelativeError",
    "run_boyd",
    "run_u1",
    "run_u2",
    "run_gosta_sync",
    "run_gosta_async",
    "run_flooding",
    "run_master_node",
    "run_protocol",
    "relative_error",
    "derive_seed",
]

PROTOCOLS = ("boyd", "u1", "u2", "gosta_sync", "gosta_async",
             "flooding", "master_node")


@dataclass(frozen=True)
class ProtocolState:
    """One snapshot of a running protocol (attached to traces as the final
    state).

    ``aux_primary`` (and ``aux_secondary`` for the double-propagation
    protocol) hold the auxiliary observation index at each node and remain
    permutations of 0..n-1 throughout a run. ``iter_counters`` are the
    asynchronous per-node iteration estimators m_k; ``flood_holdings`` the
    per-node sets of received observation indices of the flooding baseline.
    """

    t: int
    estimates: np.ndarray
    aux_primary: np.ndarray | None = None
    aux_secondary: np.ndarray | None = None
    iter_counters: np.ndarray | None = None
    flood_holdings: tuple[frozenset, ...] | None = None


@dataclass(frozen=True)
class EngineConfig:
    """Run parameters for one protocol execution.

    Snapshots are taken at multiples of ``record_every`` (plus the final
    iteration), or at the explicit ``checkpoints`` when given.
    """

    protocol: str
    max_iters: int
    record_every: int = 1
    seed: int = 0
    checkpoints: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol '{self.protocol}'; "
                             f"expected one of {PROTOCOLS}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.checkpoints is None:
            if not 1 <= self.record_every <= self.max_iters:
                raise ValueError("record_every must satisfy "
                                 "1 <= record_every <= max_iters")
        else:
            cps = tuple(int(t) for t in self.checkpoints)
            if not cps:
                raise ValueError("checkpoints must be nonempty")
            if any(t < 0 or t > self.max_iters for t in cps):
                raise ValueError("checkpoints must lie in [0, max_iters]")
            if any(b <= a for a, b in zip(cps, cps[1:])):
                raise ValueError("checkpoints must be strictly increasing")
            object.__setattr__(self, "checkpoints", cps)

    def checkpoint_iters(self) -> tuple[int, ...]:
        if self.checkpoints is not None:
            return self.checkpoints
        ts = list(range(self.record_every, self.max_iters + 1,
                        self.record_every))
        if ts[-1] != self.max_iters:
            ts.append(self.max_iters)
        return tuple(ts)


@dataclass
class Trace:
    """Time series of one protocol run.

    ``estimates[k]`` is the per-node snapshot at iteration ``ts[k]``;
    ``comm_units`` is the cumulative communication in scalar units
    (one unit = one observation coordinate). ``truth`` is the exact target:
    the pair average for full-statistic protocols, the sample mean for
    plain averaging, or the per-node partial means (a vector) for the
    single-propagation protocol. ``m_snapshots`` holds the per-node
    iteration estimators of the asynchronous protocol.
    """

    protocol: str
    ts: np.ndarray
    estimates: np.ndarray
    comm_units: np.ndarray
    truth: float | np.ndarray
    m_snapshots: np.ndarray | None = None
    final_state: ProtocolState | None = None

    def __post_init__(self) -> None:
        if (np.diff(self.ts) <= 0).any():
            raise ValueError("trace checkpoints must be strictly increasing")
        if (np.diff(self.comm_units) < 0).any():
            raise ValueError("communication units must be non-decreasing")


@dataclass(frozen=True)
class RelativeError:
    """Across-node error statistics per checkpoint.

    ``absolute`` flags that the truth contains an exact zero, in which case
    the (unnormalized) absolute error is reported instead.
    """

    ts: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    absolute: bool


def derive_seed(base_seed: int, *indices: int) -> int:
    """Fixed splitting function mapping (base_seed, run indices) to a seed."""
    ss = np.random.SeedSequence([int(base_seed), *[int(i) for i in indices]])
    return int(ss.generate_state(1, np.uint64)[0])


def _check_permutation(y: np.ndarray) -> None:
    assert np.array_equal(np.sort(y), np.arange(y.shape[0])), \
        "auxiliary index list is no longer a permutation"


def _recorder(cfg: EngineConfig, n: int, with_m: bool = False):
    ts = cfg.checkpoint_iters()
    est = np.empty((len(ts), n))
    comm = np.empty(len(ts), dtype=np.int64)
    msnap = np.empty((len(ts), n)) if with_m else None
    return list(ts), est, comm, msnap


def run_boyd(g: Graph, x: np.ndarray, cfg: EngineConfig) -> Trace:
    """Plain randomized averaging: the drawn pair replaces both estimates by
    their midpoint. The estimate sum is invariant; truth is the sample mean."""
    warn_if_unsuitable(g, "boyd")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.n,):
        raise ValueError("x must hold one value per node")
    rng = np.random.default_rng(cfg.seed)
    edges = g.edges
    eidx = rng.integers(0, g.num_edges, size=cfg.max_iters)
    z = x.copy()
    ts, est, comm_arr, _ = _recorder(cfg, g.n)
    cps = set(ts)
    comm = 0
    k = 0
    if 0 in cps:
        est[k] = z
        comm_arr[k] = 0
        k += 1
    for t in range(1, cfg.max_iters + 1):
        i, j = edges[eidx[t - 1]]
        mid = 0.5 * (z[i] + z[j])
        z[i] = mid
        z[j] = mid
        comm += 2
        if t in cps:
            est[k] = z
            comm_arr[k] = comm
            k += 1
    state = ProtocolState(t=cfg.max_iters, estimates=z.copy())
    return Trace("boyd", np.array(ts), est, comm_arr, truth=float(x.mean()),
                 final_state=state)


def run_u1(g: Graph, km: KernelMatrix, cfg: EngineConfig) -> Trace:
    """Single-observation propagation without estimate averaging.

    Per iteration: the drawn pair swaps auxiliary observation indices, then
    every node folds its current pair value into a running average. Each node
    converges to its own partial mean, so truth is the row-mean vector.
    """
    warn_if_unsuitable(g, "u1")
    h = km.dense()
    n = km.n
    rng = np.random.default_rng(cfg.seed)
    edges = g.edges
    eidx = rng.integers(0, g.num_edges, size=cfg.max_iters)
    z = np.zeros(n)
    y = np.arange(n)
    rows = np.arange(n)
    ts, est, comm_arr, _ = _recorder(cfg, n)
    cps = set(ts)
    comm = 0
    k = 0
    if 0 in cps:
        est[k] = z
        comm_arr[k] = 0
        k += 1
    for t in range(1, cfg.max_iters + 1):
        i, j = edges[eidx[t - 1]]
        y[i], y[j] = y[j], y[i]
        z *= (t - 1) / t
        z += h[rows, y] / t
        comm += 2 * km.dim
        if t in cps:
            _check_permutation(y)
            est[k] = z
            comm_arr[k] = comm
            k += 1
    state = ProtocolState(t=cfg.max_iters, estimates=z.copy(),
                          aux_primary=y.copy())
    return Trace("u1", np.array(ts), est, comm_arr, truth=km.row_means.copy(),
                 final_state=state)


def run_u2(g: Graph, km: KernelMatrix, cfg: EngineConfig) -> Trace:
    """Double-observation propagation without estimate averaging.

    Per iteration: every node folds the kernel value of its two auxiliary
    observations into a running average, then two independently drawn edges
    swap the first resp. second auxiliaries. Two observation exchanges per
    iteration cost 4d units; there is no estimate exchange.
    """
    warn_if_unsuitable(g, "u2")
    h = km.dense()
    n = km.n
    rng = np.random.default_rng(cfg.seed)
    edges = g.edges
    eidx = rng.integers(0, g.num_edges, size=(cfg.max_iters, 2))
    z = np.zeros(n)
    y1 = np.arange(n)
    y2 = np.arange(n)
    ts, est, comm_arr, _ = _recorder(cfg, n)
    cps = set(ts)
    comm = 0
    k = 0
    if 0 in cps:
        est[k] = z
        comm_arr[k] = 0
        k += 1
    for t in range(1, cfg.max_iters + 1):
        z *= (t - 1) / t
        z += h[y1, y2] / t
        i, j = edges[eidx[t - 1, 0]]
        y1[i], y1[j] = y1[j], y1[i]
        a, b = edges[eidx[t - 1, 1]]
        y2[a], y2[b] = y2[b], y2[a]
        comm += 4 * km.dim
        if t in cps:
            _check_permutation(y1)
            _check_permutation(y2)
            est[k] = z
            comm_arr[k] = comm
            k += 1
    state = ProtocolState(t=cfg.max_iters, estimates=z.copy(),
                          aux_primary=y1.copy(), aux_secondary=y2.copy())
    return Trace("u2", np.array(ts), est, comm_arr, truth=km.u_stat,
                 final_state=state)


def run_gosta_sync(g: Graph, km: KernelMatrix, cfg: EngineConfig) -> Trace:
    """Synchronous propagation-plus-averaging protocol.

    Per iteration t: (a) every node folds its current pair value into a
    running average, (b) the drawn pair averages estimates, (c) the same pair
    swaps auxiliary observations. One estimate exchange (2 units) plus one
    observation swap (2d units) per iteration.
    """
    warn_if_unsuitable(g, "gosta_sync")
    h = km.dense()
    n = km.n
    rng = np.random.default_rng(cfg.seed)
    edges = g.edges
    eidx = rng.integers(0, g.num_edges, size=cfg.max_iters)
    z = np.zeros(n)
    y = np.arange(n)
    rows = np.arange(n)
    ts, est, comm_arr, _ = _recorder(cfg, n)
    cps = set(ts)
    comm = 0
    k = 0
    if 0 in cps:
        est[k] = z
        comm_arr[k] = 0
        k += 1
    for t in range(1, cfg.max_iters + 1):
        z *= (t - 1) / t
        z += h[rows, y] / t
        i, j = edges[eidx[t - 1]]
        mid = 0.5 * (z[i] + z[j])
        z[i] = mid
        z[j] = mid
        y[i], y[j] = y[j], y[i]
        comm += 2 + 2 * km.dim
        if t in cps:
            _check_permutation(y)
            est[k] = z
            comm_arr[k] = comm
            k += 1
    state = ProtocolState(t=cfg.max_iters, estimates=z.copy(),
                          aux_primary=y.copy())
    return Trace("gosta_sync", np.array(ts), est, comm_arr, truth=km.u_stat,
                 final_state=state)


def run_gosta_async(g: Graph, km: KernelMatrix, cfg: EngineConfig) -> Trace:
    """Asynchronous variant: only the drawn pair updates.

    Each selected node first increments its iteration estimator m_k by 1/p_k
    (p_k = d_k / m is its per-iteration selection probability, so E[m_k(t)]
    equals t), the pair averages estimates, then each folds its pair value in
    with weight 1/(p_k m_k) and the pair swaps observations. Since p_k m_k is
    exactly the number of activations of k, the integer activation count is
    used directly, which keeps the first-touch coefficient exactly zero on
    the stale estimate.
    """
    warn_if_unsuitable(g, "gosta_async")
    h = km.dense()
    n = km.n
    rng = np.random.default_rng(cfg.seed)
    edges = g.edges
    eidx = rng.integers(0, g.num_edges, size=cfg.max_iters)
    p = g.degrees / g.num_edges
    z = np.zeros(n)
    y = np.arange(n)
    activations = np.zeros(n, dtype=np.int64)
    ts, est, comm_arr, msnap = _recorder(cfg, n, with_m=True)
    cps = set(ts)
    comm = 0
    k = 0
    if 0 in cps:
        est[k] = z
        comm_arr[k] = 0
        msnap[k] = 0.0
        k += 1
    for t in range(1, cfg.max_iters + 1):
        i, j = edges[eidx[t - 1]]
        activations[i] += 1
        activations[j] += 1
        mid = 0.5 * (z[i] + z[j])
        z[i] = mid
        z[j] = mid
        assert activations[i] >= 1 and activations[j] >= 1
        wi = 1.0 / activations[i]
        z[i] = (1.0 - wi) * z[i] + wi * h[i, y[i]]
        wj = 1.0 / activations[j]
        z[j] = (1.0 - wj) * z[j] + wj * h[j, y[j]]
        y[i], y[j] = y[j], y[i]
        comm += 2 + 2 * km.dim
        if t in cps:
            _check_permutation(y)
            est[k] = z
            comm_arr[k] = comm
            msnap[k] = activations / p
            k += 1
    state = ProtocolState(t=cfg.max_iters, estimates=z.copy(),
                          aux_primary=y.copy(),
                          iter_counters=activations / p)
    return Trace("gosta_async", np.array(ts), est, comm_arr, truth=km.u_stat,
                 m_snapshots=msnap, final_state=state)


def run_flooding(g: Graph, km: KernelMatrix, cfg: EngineConfig) -> Trace:
    """Observation-flooding baseline with unbounded node memory.

    Per iteration the drawn pair exchange one uniformly chosen held
    observation each (chosen from the pre-event holdings, duplicates
    discarded on arrival). A node's estimate is the average of its pair
    values over held indices other than itself, or 0 while it holds nothing
    else. Every transfer costs d units whether or not it is a duplicate.
    """
    warn_if_unsuitable(g, "flooding")
    h = km.dense()
    n = km.n
    rng = np.random.default_rng(cfg.seed)
    edges = g.edges
    eidx = rng.integers(0, g.num_edges, size=cfg.max_iters)
    held_lists: list[list[int]] = [[v] for v in range(n)]
    held_sets: list[set[int]] = [{v} for v in range(n)]
    sums = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)

    def deliver(node: int, obs: int) -> None:
        if obs in held_sets[node]:
            return
        held_sets[node].add(obs)
        held_lists[node].append(obs)
        if obs != node:
            sums[node] += h[node, obs]
            counts[node] += 1

    def snapshot() -> np.ndarray:
        out = np.zeros(n)
        nz = counts > 0
        out[nz] = sums[nz] / counts[nz]
        return out

    ts, est, comm_arr, _ = _recorder(cfg, n)
    cps = set(ts)
    comm = 0
    k = 0
    if 0 in cps:
        est[k] = snapshot()
        comm_arr[k] = 0
        k += 1
    for t in range(1, cfg.max_iters + 1):
        i, j = edges[eidx[t - 1]]
        pick_i = held_lists[i][int(rng.integers(0, len(held_lists[i])))]
        pick_j = held_lists[j][int(rng.integers(0, len(held_lists[j])))]
        deliver(j, pick_i)
        deliver(i, pick_j)
        comm += 2 * km.dim
        if t in cps:
            est[k] = snapshot()
            comm_arr[k] = comm
            k += 1
    state = ProtocolState(t=cfg.max_iters, estimates=snapshot(),
                          flood_holdings=tuple(frozenset(s)
                                               for s in held_sets))
    return Trace("flooding", np.array(ts), est, comm_arr, truth=km.u_stat,
                 final_state=state)


def run_master_node(km: KernelMatrix, n: int, d: int,
                    cfg: EngineConfig) -> Trace:
    """Centralized broadcast baseline, independent of any network topology.

    At t=0 every node uploads its observation (n*d units); at each iteration
    t <= n the master broadcasts observation t to all nodes (n*d units).
    Estimates average pair values over all received indices plus the node's
    own, excluding the zero self-pair. Fully deterministic.
    """
    if n != km.n:
        raise ValueError(f"n={n} does not match the kernel matrix size {km.n}")
    h = km.dense()
    ts, est, comm_arr, _ = _recorder(cfg, n)
    idx = np.arange(n)
    for k, t in enumerate(ts):
        b = min(t, n)
        if b == 0:
            est[k] = 0.0
        else:
            sums = h[:, :b].sum(axis=1)
            counts = b - (idx < b).astype(np.int64)
            out = np.zeros(n)
            nz = counts > 0
            out[nz] = sums[nz] / counts[nz]
            est[k] = out
        comm_arr[k] = n * d * (1 + b)
    b = min(cfg.max_iters, n)
    sums = h[:, :b].sum(axis=1)
    counts = b - (idx < b).astype(np.int64)
    final = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    state = ProtocolState(t=cfg.max_iters, estimates=final)
    return Trace("master_node", np.array(ts), est, comm_arr, truth=km.u_stat,
                 final_state=state)


def run_protocol(cfg: EngineConfig, g: Graph | None = None,
                 km: KernelMatrix | None = None,
                 x: np.ndarray | None = None) -> Trace:
    """Dispatch a run by the protocol named in ``cfg``."""
    name = cfg.protocol
    if name == "boyd":
        if g is None or x is None:
            raise ValueError("boyd needs a graph and a node-value vector")
        return run_boyd(g, x, cfg)
    if name == "master_node":
        if km is None:
            raise ValueError("master_node needs a kernel matrix")
        return run_master_node(km, km.n, km.dim, cfg)
    if km is None or g is None:
        raise ValueError(f"{name} needs a graph and a kernel matrix")
    if g.n != km.n:
        raise ValueError(f"graph size {g.n} does not match sample size {km.n}")
    runner = {
        "u1": run_u1,
        "u2": run_u2,
        "gosta_sync": run_gosta_sync,
        "gosta_async": run_gosta_async,
        "flooding": run_flooding,
    }[name]
    return runner(g, km, cfg)


def relative_error(trace: Trace) -> RelativeError:
    """Per-checkpoint mean and population std of node errors.

    Node errors are |Z_k - truth_k| / |truth_k|; if the truth contains an
    exact zero the unnormalized absolute error is used and flagged.
    """
    truth = np.atleast_1d(np.asarray(trace.truth, dtype=np.float64))
    absolute = bool((truth == 0.0).any())
    diff = np.abs(trace.estimates - truth)
    err = diff if absolute else diff / np.abs(truth)
    return RelativeError(ts=trace.ts.copy(), mean=err.mean(axis=1),
                         std=err.std(axis=1), absolute=absolute)

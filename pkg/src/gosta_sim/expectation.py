"""Expected-dynamics oracles: closed recursions for E[Z(t)] per protocol.

The propagation of the n auxiliary observations is tracked through an n x n
matrix R whose row k lists the expected pair values node k would read for
each possible auxiliary position; one swap event applies the alpha=1
expected transition on the position axis, so R evolves as ``R @ W1``. This
is the Kronecker-structured propagation block applied as n independent W1
multiplications; the n^2 x n^2 matrix is never formed (the axis choice is
pinned by a brute-force equivalence test at n=4).

The synchronous recursion is the exact expectation of the simulator: the
pair-averaging expectation W2 multiplies both the decayed estimate and the
fresh kernel contribution, because the averaging event follows the running-
average update within an iteration.

The asynchronous recursion is a first-moment (mean-field) approximation:
the random per-node activation counts are replaced by their expectations.
It is exact at t=1 and asymptotically accurate, but the reciprocal counts
correlate with the estimates, so it is not the exact expectation of the
asynchronous simulator at small t. No finite linear recursion closes over
those correlations; see the notes in the test suite.
"""

from __future__ import annotations

import numpy as np

from .graph import Graph, adjacency, warn_if_unsuitable
from .kernels import KernelMatrix
from .spectral import w_alpha

__all__ = [
    "FULL_STATE_CAP",
    "DENSE_CAP",
    "BOYD_CAP",
    "geometric_checkpoints",
    "gosta_sync_expectation",
    "gosta_async_expectation",
    "u1_expectation",
    "u2_expectation",
    "boyd_expectation",
]

FULL_STATE_CAP = 60
DENSE_CAP = 400
BOYD_CAP = 2000


def geometric_checkpoints(t_max: int, max_points: int = 200) -> tuple[int, ...]:
    """1-2-5 geometric grid up to and including t_max, capped in length."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    pts = []
    decade = 1
    while decade <= t_max:
        for mult in (1, 2, 5):
            v = mult * decade
            if v <= t_max:
                pts.append(v)
        decade *= 10
    if not pts or pts[-1] != t_max:
        pts.append(t_max)
    if len(pts) > max_points:
        keep = np.unique(np.linspace(0, len(pts) - 1, max_points).astype(int))
        pts = [pts[i] for i in keep]
    return tuple(pts)


def _validate(g: Graph, n: int, t_max: int, checkpoints, cap: int, what: str):
    if g.n != n:
        raise ValueError(f"graph size {g.n} does not match sample size {n}")
    if n > cap:
        raise ValueError(
            f"{what}: n={n} exceeds the oracle cap ({cap}); "
            "use Monte-Carlo simulation at this scale or raise the cap"
        )
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    cps = sorted({int(t) for t in checkpoints})
    if not cps or cps[0] < 1 or cps[-1] > t_max:
        raise ValueError("checkpoints must be nonempty and lie in [1, t_max]")
    return cps


def gosta_sync_expectation(g: Graph, km: KernelMatrix, t_max: int,
                           checkpoints, cap: int = FULL_STATE_CAP
                           ) -> dict[int, np.ndarray]:
    """Exact E[Z(t)] of the synchronous protocol at the given checkpoints.

    Forward recursion on the (n + n^2)-dimensional expected state: estimate
    block z and propagation block R. Components converge to the pair average
    ``km.u_stat`` as t grows.
    """
    cps = _validate(g, km.n, t_max, checkpoints, cap, "gosta_sync_expectation")
    warn_if_unsuitable(g, "gosta_sync_expectation")
    w2 = w_alpha(g, 2.0)
    w1 = w_alpha(g, 1.0)
    h = km.dense()
    z = np.zeros(km.n)
    r = h.copy()
    out: dict[int, np.ndarray] = {}
    want = set(cps)
    for t in range(1, max(cps) + 1):
        z = w2 @ (((t - 1) / t) * z + np.diagonal(r) / t)
        r = r @ w1
        if t in want:
            out[t] = z.copy()
    return out


def _async_m1(g: Graph, w2: np.ndarray, t: int) -> np.ndarray:
    dinv_a = adjacency(g) / g.degrees[:, None]
    return w2 - (np.eye(g.n) + dinv_a) / (2.0 * t)


def gosta_async_expectation(g: Graph, km: KernelMatrix, t_max: int,
                            checkpoints, cap: int = FULL_STATE_CAP
                            ) -> dict[int, np.ndarray]:
    """Mean-field E[Z(t)] of the asynchronous protocol.

    Per-step transition on the estimate block: ``W2 - (I + D^{-1} A)/(2t)``
    applied to the previous expectation, plus 1/t times the diagonal of the
    propagation block. Converges to the pair average; see the module
    docstring for the approximation caveat.
    """
    cps = _validate(g, km.n, t_max, checkpoints, cap, "gosta_async_expectation")
    warn_if_unsuitable(g, "gosta_async_expectation")
    w2 = w_alpha(g, 2.0)
    w1 = w_alpha(g, 1.0)
    correction = np.eye(g.n) + adjacency(g) / g.degrees[:, None]
    h = km.dense()
    z = np.zeros(km.n)
    r = h.copy()
    out: dict[int, np.ndarray] = {}
    want = set(cps)
    for t in range(1, max(cps) + 1):
        z = w2 @ z - correction @ z / (2.0 * t) + np.diagonal(r) / t
        r = r @ w1
        if t in want:
            out[t] = z.copy()
    return out


def u1_expectation(g: Graph, km: KernelMatrix, t_max: int, checkpoints,
                   cap: int = DENSE_CAP) -> dict[int, np.ndarray]:
    """Exact E[Z(t)] of the single-propagation protocol.

    E[Z_k(t)] = (1/t) * sum_{s=1..t} (H W1^s)_{kk}; converges to the
    per-node partial means ``km.row_means``.
    """
    cps = _validate(g, km.n, t_max, checkpoints, cap, "u1_expectation")
    warn_if_unsuitable(g, "u1_expectation")
    w1 = w_alpha(g, 1.0)
    v = km.dense().copy()
    acc = np.zeros(km.n)
    out: dict[int, np.ndarray] = {}
    want = set(cps)
    for t in range(1, max(cps) + 1):
        v = v @ w1
        acc += np.diagonal(v)
        if t in want:
            out[t] = acc / t
    return out


def u2_expectation(g: Graph, km: KernelMatrix, t_max: int, checkpoints,
                   cap: int = DENSE_CAP) -> dict[int, np.ndarray]:
    """Exact E[Z(t)] of the double-propagation protocol.

    E[Z_k(t)] = (1/t) * sum_{s=0..t-1} (W1^s H W1^s)_{kk}; the s=0 term is
    the zero diagonal. Converges to the pair average ``km.u_stat``.
    """
    cps = _validate(g, km.n, t_max, checkpoints, cap, "u2_expectation")
    warn_if_unsuitable(g, "u2_expectation")
    w1 = w_alpha(g, 1.0)
    gmat = km.dense().copy()
    acc = np.zeros(km.n)
    out: dict[int, np.ndarray] = {}
    want = set(cps)
    for t in range(1, max(cps) + 1):
        acc += np.diagonal(gmat)
        if t in want:
            out[t] = acc / t
        gmat = w1 @ gmat @ w1
    return out


def boyd_expectation(g: Graph, x: np.ndarray, t_max: int, checkpoints,
                     cap: int = BOYD_CAP) -> dict[int, np.ndarray]:
    """Exact E[Z(t)] = W2^t x of plain averaging; converges to the mean."""
    x = np.asarray(x, dtype=np.float64)
    cps = _validate(g, x.shape[0], t_max, checkpoints, cap, "boyd_expectation")
    warn_if_unsuitable(g, "boyd_expectation")
    w2 = w_alpha(g, 2.0)
    z = x.copy()
    out: dict[int, np.ndarray] = {}
    want = set(cps)
    for t in range(1, max(cps) + 1):
        z = w2 @ z
        if t in want:
            out[t] = z.copy()
    return out

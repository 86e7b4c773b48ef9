"""Spectra of the expected gossip transition matrices.

One pairwise-averaging event on edge (i, j) with weight 1/alpha applies
``I - (1/alpha) (e_i - e_j)(e_i - e_j)^T``. Averaging that map over a uniform
edge draw gives the expected transition matrix

    W_alpha(G) = I - L(G) / (alpha * m),

where m is the number of (unordered) edges. Its eigenvalues are therefore
``lambda_i(alpha) = 1 - beta_{n-i+1} / (alpha * m)`` in terms of the
decreasingly sorted Laplacian eigenvalues beta. The convergence rate of every
protocol in this package is controlled by the gap ``c = 1 - lambda_2(2) =
beta_{n-1} / (2 m)``; alpha=2 corresponds to the estimate-averaging step
(both endpoints move to their midpoint in expectation) and alpha=1 to the
observation-swap step. These closed forms were pinned against a brute-force
edge-by-edge construction of the expected matrix; see the test suite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.sparse.linalg import lobpcg

from .graph import Graph, diagnose, laplacian

__all__ = [
    "SpectralSummary",
    "w_alpha",
    "laplacian_spectrum",
    "w_alpha_eigs_from_laplacian",
    "spectral_summary",
    "beta_second_smallest",
]

logger = logging.getLogger("gosta_sim.spectral")

# Above this size the full Laplacian spectrum is skipped and only the
# second-smallest eigenvalue is computed iteratively.
DENSE_SPECTRUM_LIMIT = 2000


@dataclass(frozen=True)
class SpectralSummary:
    """Spectral constants of a connected graph.

    ``laplacian_eigs`` holds the full Laplacian spectrum in decreasing order,
    or None when only the second-smallest eigenvalue was computed (large
    graphs). ``gap_c`` is ``1 - lambda2_of_w2 = beta_{n-1} / (2 m)``.
    """

    laplacian_eigs: np.ndarray | None
    lambda2_of_w2: float
    lambda2_of_w1: float
    gap_c: float
    edge_count: int
    beta_second_smallest: float


def w_alpha(g: Graph, alpha: float) -> np.ndarray:
    """Expected one-event transition matrix with averaging weight 1/alpha.

    Symmetric and doubly stochastic; equals ``I - L/(alpha*m)``.
    """
    if alpha < 1.0:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    m = g.num_edges
    if m == 0:
        raise ValueError("w_alpha is undefined on a graph with no edges")
    return np.eye(g.n) - laplacian(g) / (alpha * m)


def laplacian_spectrum(g: Graph) -> np.ndarray:
    """Real Laplacian eigenvalues sorted in decreasing order.

    The multiplicity of the eigenvalue 0 equals the number of connected
    components.
    """
    lap = laplacian(g)
    lap = (lap + lap.T) / 2.0
    eigs = np.linalg.eigvalsh(lap)
    return eigs[::-1].copy()


def w_alpha_eigs_from_laplacian(g: Graph, alpha: float) -> np.ndarray:
    """Eigenvalues of ``w_alpha`` derived from the Laplacian spectrum.

    Returns ``1 - beta_{n-i+1} / (alpha * m)`` in decreasing order; agrees
    with a direct eigendecomposition of :func:`w_alpha` to 1e-9.
    """
    if alpha < 1.0:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    m = g.num_edges
    if m == 0:
        raise ValueError("eigenvalues undefined on a graph with no edges")
    beta = laplacian_spectrum(g)
    return 1.0 - beta[::-1] / (alpha * m)


def _sparse_laplacian(g: Graph) -> scipy.sparse.csr_matrix:
    e = g.edges
    m = e.shape[0]
    rows = np.concatenate([e[:, 0], e[:, 1], np.arange(g.n)])
    cols = np.concatenate([e[:, 1], e[:, 0], np.arange(g.n)])
    vals = np.concatenate([-np.ones(2 * m), g.degrees.astype(np.float64)])
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(g.n, g.n))


def beta_second_smallest(g: Graph, tol: float = 1e-8,
                         maxiter: int = 20000) -> float:
    """Second-smallest Laplacian eigenvalue via a constrained iterative solve.

    Uses LOBPCG restricted to the complement of the all-ones null vector;
    falls back to the dense spectrum when the graph is small or the
    iteration fails to converge.
    """
    n = g.n
    if n <= 32:
        return float(laplacian_spectrum(g)[-2])
    lap = _sparse_laplacian(g)
    ones = np.ones((n, 1)) / np.sqrt(n)
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal((n, 1))
    x0 -= ones * (ones.T @ x0)
    try:
        vals, _ = lobpcg(lap, x0, Y=ones, largest=False, tol=tol,
                         maxiter=maxiter)
        beta = float(vals[0])
        if beta > 0 and np.isfinite(beta):
            return beta
    except Exception:  # pragma: no cover - solver robustness fallback
        pass
    if n <= 4000:
        logger.warning("iterative eigenvalue solve failed, using dense "
                       "fallback (n=%d)", n)
        return float(laplacian_spectrum(g)[-2])
    raise RuntimeError(f"second eigenvalue iteration failed for n={n}")


def spectral_summary(g: Graph, dense_limit: int = DENSE_SPECTRUM_LIMIT) -> SpectralSummary:
    """Spectral constants controlling the convergence bounds.

    Raises on disconnected graphs, where the gap is zero and every bound
    is vacuous.
    """
    if not diagnose(g).connected:
        raise ValueError("spectral summary requires a connected graph "
                         "(the averaging gap of a disconnected graph is zero)")
    m = g.num_edges
    if g.n <= dense_limit:
        eigs = laplacian_spectrum(g)
        beta = float(eigs[-2])
    else:
        eigs = None
        beta = beta_second_smallest(g)
    lam2_w2 = 1.0 - beta / (2.0 * m)
    lam2_w1 = 1.0 - beta / m
    return SpectralSummary(
        laplacian_eigs=eigs,
        lambda2_of_w2=lam2_w2,
        lambda2_of_w1=lam2_w1,
        gap_c=beta / (2.0 * m),
        edge_count=m,
        beta_second_smallest=beta,
    )

"""Pairwise kernels, kernel matrices, and the exact estimation targets.

A kernel H is symmetric with H(x, x) = 0. For a sample of n observations the
target statistic is the n^2-normalized pair average

    u_stat = (1/n^2) * sum_ij H(X_i, X_j),

and the per-node partial means are ``row_means[i] = (1/n) * sum_j H_ij``.
The two dispersion norms carried on :class:`KernelMatrix` (Frobenius norm of
the row-centered matrix, Euclidean norm of the centered row means) are the
data-dependent constants of the convergence bounds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "DesignMatrix",
    "LabeledDataset",
    "Partition",
    "KernelSpec",
    "KernelMatrix",
    "build_kernel_matrix",
    "scatter_kernel",
    "auc_kernel",
    "variance_kernel",
    "auc_value",
    "mean_difference_direction",
    "load_design_csv",
    "load_labeled_csv",
    "load_partitioned_csv",
    "write_design_csv",
]

DENSE_KERNEL_LIMIT = 4000


@dataclass(frozen=True)
class DesignMatrix:
    """n observation vectors of identical dimension d, all entries finite."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rows, dtype=np.float64)
        if r.ndim != 2:
            raise ValueError("design matrix must be 2-dimensional (n, d)")
        if r.shape[0] < 2:
            raise ValueError(f"need at least 2 observations, got {r.shape[0]}")
        if r.shape[1] < 1:
            raise ValueError("observation dimension must be >= 1")
        if not np.isfinite(r).all():
            raise ValueError("design matrix contains non-finite entries")
        object.__setattr__(self, "rows", r)
        r.flags.writeable = False

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def d(self) -> int:
        return int(self.rows.shape[1])


@dataclass(frozen=True)
class LabeledDataset:
    """Design matrix with one label in {-1, +1} per row."""

    design: DesignMatrix
    labels: np.ndarray

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.shape != (self.design.n,):
            raise ValueError("labels must be one value per observation")
        if not np.isin(lab, (-1, 1)).all():
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "labels", lab)
        lab.flags.writeable = False

    @property
    def n_pos(self) -> int:
        return int((self.labels == 1).sum())

    @property
    def n_neg(self) -> int:
        return int((self.labels == -1).sum())


@dataclass(frozen=True)
class Partition:
    """Cell assignment per observation; cell ids are arbitrary integers."""

    assignment: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1:
            raise ValueError("partition assignment must be one id per row")
        object.__setattr__(self, "assignment", a)
        a.flags.writeable = False

    @property
    def n(self) -> int:
        return int(self.assignment.shape[0])


@dataclass(frozen=True)
class KernelSpec:
    """A named pairwise kernel.

    ``matrix_fn`` builds the dense n x n kernel matrix from the observation
    array; ``pair_fn`` evaluates a single pair (used above the dense cap).
    Both produce exactly symmetric values with a zero diagonal.
    """

    name: str
    matrix_fn: Callable[[np.ndarray], np.ndarray]
    pair_fn: Callable[[np.ndarray, int, int], float]


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    d2 = (d2 + d2.T) / 2.0
    np.fill_diagonal(d2, 0.0)
    return d2


def scatter_kernel(partition: Partition) -> KernelSpec:
    """Within-cluster point scatter: Euclidean distance for same-cell pairs,
    zero across cells."""
    cells = partition.assignment

    def matrix_fn(x: np.ndarray) -> np.ndarray:
        h = np.sqrt(_pairwise_sq_dists(x))
        h *= (cells[:, None] == cells[None, :])
        return h

    def pair_fn(x: np.ndarray, i: int, j: int) -> float:
        if i == j or cells[i] != cells[j]:
            return 0.0
        return float(np.linalg.norm(x[i] - x[j]))

    return KernelSpec("scatter", matrix_fn, pair_fn)


def auc_kernel(theta: np.ndarray, labels: np.ndarray) -> KernelSpec:
    """Raw ranking kernel of a linear scorer.

    ``H_ij = (1 - l_i l_j) * 1{ l_i s_i > -l_j s_j }`` with scores
    ``s = X theta``; ties count as zero (strict inequality). The pair average
    ``u_stat`` of this kernel rescaled by ``n^2 / (4 n_pos n_neg)`` equals
    :func:`auc_value`. The rescaling is applied outside the protocols so the
    protocol layer stays kernel-agnostic.
    """
    theta = np.asarray(theta, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.int64)

    def matrix_fn(x: np.ndarray) -> np.ndarray:
        s = x @ theta
        ls = lab * s
        h = (1.0 - np.outer(lab, lab)) * (ls[:, None] > -ls[None, :])
        h = (h + h.T) / 2.0  # already symmetric; enforce exact bit equality
        np.fill_diagonal(h, 0.0)
        return h

    def pair_fn(x: np.ndarray, i: int, j: int) -> float:
        if i == j:
            return 0.0
        si, sj = float(x[i] @ theta), float(x[j] @ theta)
        return float((1 - lab[i] * lab[j]) * (lab[i] * si > -lab[j] * sj))

    return KernelSpec("auc", matrix_fn, pair_fn)


def variance_kernel() -> KernelSpec:
    """H(x, y) = ||x - y||^2 / 2, whose pair average is the biased sample
    variance (1/n) * sum_i ||X_i - mean||^2."""

    def matrix_fn(x: np.ndarray) -> np.ndarray:
        return _pairwise_sq_dists(x) / 2.0

    def pair_fn(x: np.ndarray, i: int, j: int) -> float:
        if i == j:
            return 0.0
        diff = x[i] - x[j]
        return float(diff @ diff) / 2.0

    return KernelSpec("variance", matrix_fn, pair_fn)


@dataclass(frozen=True)
class KernelMatrix:
    """Kernel matrix with the exact targets and dispersion norms.

    ``H`` is the dense matrix for n <= DENSE_KERNEL_LIMIT and None above;
    statistics are computed either way. ``dim`` is the dimension of the
    underlying observations, used for communication-cost accounting.
    """

    n: int
    dim: int
    u_stat: float
    row_means: np.ndarray
    frob_centered: float
    vec_centered: float
    H: np.ndarray | None = None
    _spec: KernelSpec | None = None
    _x: np.ndarray | None = None

    def value(self, i: int, j: int) -> float:
        if self.H is not None:
            return float(self.H[i, j])
        return self._spec.pair_fn(self._x, i, j)

    def dense(self) -> np.ndarray:
        if self.H is None:
            raise ValueError(
                f"kernel matrix for n={self.n} exceeds the dense cap "
                f"({DENSE_KERNEL_LIMIT}); only on-demand evaluation is available"
            )
        return self.H

    @classmethod
    def from_dense(cls, h: np.ndarray, dim: int = 1) -> "KernelMatrix":
        h = np.asarray(h, dtype=np.float64)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("kernel matrix must be square")
        if not np.isfinite(h).all():
            raise ValueError("kernel matrix contains non-finite values")
        if (h != h.T).any():
            raise ValueError("kernel matrix must be exactly symmetric")
        if np.diagonal(h).any():
            raise ValueError("kernel diagonal must be exactly zero")
        n = h.shape[0]
        u = float(h.sum() / n**2)
        row_means = h.sum(axis=1) / n
        frob = float(np.linalg.norm(h - row_means[:, None]))
        vec = float(np.linalg.norm(row_means - u))
        h.flags.writeable = False
        return cls(n=n, dim=dim, u_stat=u, row_means=row_means,
                   frob_centered=frob, vec_centered=vec, H=h)


def build_kernel_matrix(kernel, data, partition: Partition | None = None,
                        dense_limit: int = DENSE_KERNEL_LIMIT) -> KernelMatrix:
    """Construct a :class:`KernelMatrix` for the given kernel and data.

    ``kernel`` may be a :class:`KernelSpec` or one of the names "variance",
    "scatter" (needs ``partition``) or "auc" (needs a :class:`LabeledDataset`;
    the scoring direction defaults to the difference of the class means).
    """
    if isinstance(kernel, str):
        kernel = _resolve_named_kernel(kernel, data, partition)
    if isinstance(data, LabeledDataset):
        design = data.design
    elif isinstance(data, DesignMatrix):
        design = data
    else:
        raise TypeError("data must be a DesignMatrix or LabeledDataset")
    if kernel.name == "scatter" and partition is not None \
            and partition.n != design.n:
        raise ValueError("partition size does not match the sample size")
    x = design.rows
    n = design.n
    if n <= dense_limit:
        h = kernel.matrix_fn(x)
        if not np.isfinite(h).all():
            raise ValueError(f"kernel '{kernel.name}' produced non-finite values")
        km = KernelMatrix.from_dense(h, dim=design.d)
        return km
    # Streaming statistics above the dense cap; pairs stay evaluable on demand.
    row_sums = np.zeros(n)
    for i in range(n):
        row = np.array([kernel.pair_fn(x, i, j) for j in range(n)])
        if not np.isfinite(row).all():
            raise ValueError(f"kernel '{kernel.name}' produced non-finite values")
        row_sums[i] = row.sum()
    u = float(row_sums.sum() / n**2)
    row_means = row_sums / n
    frob_sq = 0.0
    for i in range(n):
        row = np.array([kernel.pair_fn(x, i, j) for j in range(n)])
        frob_sq += float(((row - row_means[i]) ** 2).sum())
    vec = float(np.linalg.norm(row_means - u))
    return KernelMatrix(n=n, dim=design.d, u_stat=u, row_means=row_means,
                        frob_centered=float(np.sqrt(frob_sq)), vec_centered=vec,
                        H=None, _spec=kernel, _x=x)


def _resolve_named_kernel(name: str, data, partition: Partition | None) -> KernelSpec:
    if name == "variance":
        return variance_kernel()
    if name == "scatter":
        if partition is None:
            raise ValueError("the scatter kernel requires a partition")
        return scatter_kernel(partition)
    if name == "auc":
        if not isinstance(data, LabeledDataset):
            raise ValueError("the auc kernel requires labeled data")
        theta = mean_difference_direction(data)
        return auc_kernel(theta, data.labels)
    raise ValueError(f"unknown kernel '{name}' (expected variance, scatter or auc)")


def mean_difference_direction(ds: LabeledDataset) -> np.ndarray:
    """Difference between the positive and negative class means."""
    if ds.n_pos == 0 or ds.n_neg == 0:
        raise ValueError("both classes must be present")
    x = ds.design.rows
    return x[ds.labels == 1].mean(axis=0) - x[ds.labels == -1].mean(axis=0)


def auc_value(theta: np.ndarray, ds: LabeledDataset) -> float:
    """Pairwise ranking score of the linear classifier ``theta`` in [0, 1].

    Counts ordered pairs (i, j) with ``l_i (theta^T X_i) > -l_j (theta^T X_j)``
    weighted by ``1 - l_i l_j``, normalized by ``4 n_pos n_neg``. Ties count
    as zero.
    """
    if ds.n_pos == 0 or ds.n_neg == 0:
        raise ValueError("AUC requires at least one observation of each class")
    theta = np.asarray(theta, dtype=np.float64)
    lab = ds.labels
    ls = lab * (ds.design.rows @ theta)
    numer = ((1.0 - np.outer(lab, lab)) * (ls[:, None] > -ls[None, :])).sum()
    return float(numer / (4.0 * ds.n_pos * ds.n_neg))


def _sniff_header(first_row: list[str]) -> bool:
    try:
        for tok in first_row:
            float(tok)
        return False
    except ValueError:
        return True


def _read_csv_rows(path: str | Path) -> list[list[str]]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"dataset file not found: {p}")
    with open(p, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{p}: empty dataset file")
    if _sniff_header(rows[0]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{p}: no data rows")
    return rows


def load_design_csv(path: str | Path) -> DesignMatrix:
    """Plain float CSV, one observation per row; optional header."""
    rows = _read_csv_rows(path)
    return DesignMatrix(np.array([[float(v) for v in r] for r in rows]))


def load_labeled_csv(path: str | Path) -> LabeledDataset:
    """Float CSV whose final column is the label (-1/+1)."""
    rows = _read_csv_rows(path)
    arr = np.array([[float(v) for v in r] for r in rows])
    if arr.shape[1] < 2:
        raise ValueError(f"{path}: labeled data needs at least 2 columns")
    return LabeledDataset(DesignMatrix(arr[:, :-1]),
                          arr[:, -1].astype(np.int64))


def load_partitioned_csv(path: str | Path,
                         cell_column: int = -1) -> tuple[DesignMatrix, Partition]:
    """Float CSV with one integer cell-id column (default: the last)."""
    rows = _read_csv_rows(path)
    arr = np.array([[float(v) for v in r] for r in rows])
    ncols = arr.shape[1]
    if ncols < 2:
        raise ValueError(f"{path}: partitioned data needs at least 2 columns")
    col = cell_column if cell_column >= 0 else ncols + cell_column
    if not 0 <= col < ncols:
        raise ValueError(f"{path}: cell column {cell_column} out of range")
    feat = np.delete(arr, col, axis=1)
    return DesignMatrix(feat), Partition(arr[:, col].astype(np.int64))


def write_design_csv(path: str | Path, x: np.ndarray,
                     extra_column: np.ndarray | None = None) -> None:
    """Write observations (plus an optional trailing label/cell column)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for i in range(x.shape[0]):
            row = [format(v, ".17g") for v in x[i]]
            if extra_column is not None:
                row.append(str(int(extra_column[i]))
                           if float(extra_column[i]).is_integer()
                           else format(extra_column[i], ".17g"))
            writer.writerow(row)

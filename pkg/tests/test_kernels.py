import numpy as np
import pytest

import gosta_sim as gs
from gosta_sim.kernels import (DesignMatrix, KernelMatrix, LabeledDataset,
                               Partition, build_kernel_matrix,
                               load_design_csv, load_labeled_csv,
                               load_partitioned_csv, mean_difference_direction,
                               write_design_csv)

from _reference import auc_double_loop, scatter_double_loop, u_stat_double_loop


def test_zero_kernel_targets():
    km = KernelMatrix.from_dense(np.zeros((4, 4)))
    assert km.u_stat == 0.0
    assert (km.row_means == 0.0).all()
    assert km.frob_centered == 0.0
    assert km.vec_centered == 0.0


def test_abs_difference_kernel_brute_force():
    # scalar points {0,1,2} with H(x,y)=|x-y|; pair average over all 9
    # ordered pairs is 8/9
    x = np.array([0.0, 1.0, 2.0])
    h = np.abs(x[:, None] - x[None, :])
    km = KernelMatrix.from_dense(h)
    assert km.u_stat == pytest.approx(8 / 9, abs=1e-15)
    assert km.u_stat == pytest.approx(u_stat_double_loop(h), abs=1e-15)


def test_row_means_average_to_u_stat(rng, kernel_factory):
    for _ in range(5):
        km = kernel_factory(int(rng.integers(3, 12)), rng)
        assert km.row_means.mean() == pytest.approx(km.u_stat, abs=1e-12)


def test_scatter_kernel_values():
    cells = Partition(np.array([1, 1, 2, 2]))
    x = np.array([[0.0, 0.0], [3.0, 4.0], [1.0, 0.0], [0.0, 0.0]])
    spec = gs.scatter_kernel(cells)
    h = spec.matrix_fn(x)
    assert h[0, 1] == pytest.approx(5.0, abs=1e-12)  # same cell, 3-4-5
    assert h[0, 2] == 0.0  # different cells
    assert np.allclose(h, scatter_double_loop(x, cells.assignment), atol=1e-12)


def test_scatter_kernel_matrix_oracle(rng):
    x = rng.normal(size=(6, 3))
    cells = Partition(np.array([1, 2, 1, 2, 1, 2]))
    km = build_kernel_matrix("scatter", DesignMatrix(x), cells)
    h_ref = scatter_double_loop(x, cells.assignment)
    assert km.u_stat == pytest.approx(u_stat_double_loop(h_ref), abs=1e-12)
    assert np.allclose(km.dense(), h_ref, atol=1e-12)


def test_auc_perfectly_separated():
    x = np.array([[2.0], [3.0], [-2.0], [-3.0]])
    ds = LabeledDataset(DesignMatrix(x), np.array([1, 1, -1, -1]))
    assert gs.auc_value(np.array([1.0]), ds) == 1.0


def test_auc_perfectly_reversed():
    x = np.array([[-2.0], [-3.0], [2.0], [3.0]])
    ds = LabeledDataset(DesignMatrix(x), np.array([1, 1, -1, -1]))
    assert gs.auc_value(np.array([1.0]), ds) == 0.0


def test_auc_matches_double_loop(rng):
    x = rng.normal(size=(10, 3))
    labels = np.array([1, -1, 1, 1, -1, -1, 1, -1, 1, -1])
    ds = LabeledDataset(DesignMatrix(x), labels)
    theta = rng.normal(size=3)
    assert gs.auc_value(theta, ds) == pytest.approx(
        auc_double_loop(theta, x, labels), abs=1e-12)


def test_auc_kernel_rescaled_u_stat_equals_auc(rng):
    x = rng.normal(size=(12, 2))
    labels = np.where(rng.random(12) < 0.5, 1, -1)
    if abs(labels.sum()) == 12:
        labels[0] = -labels[0]
    ds = LabeledDataset(DesignMatrix(x), labels)
    theta = rng.normal(size=2)
    km = build_kernel_matrix(gs.auc_kernel(theta, labels), ds)
    rescaled = km.u_stat * km.n**2 / (4.0 * ds.n_pos * ds.n_neg)
    assert rescaled == pytest.approx(gs.auc_value(theta, ds), abs=1e-12)


def test_auc_range_and_reversal(rng):
    for _ in range(5):
        x = rng.normal(size=(9, 2))
        labels = np.array([1, 1, 1, 1, -1, -1, -1, -1, 1])
        ds = LabeledDataset(DesignMatrix(x), labels)
        theta = rng.normal(size=2)
        a = gs.auc_value(theta, ds)
        assert 0.0 <= a <= 1.0
        # no ties almost surely for continuous data
        assert gs.auc_value(-theta, ds) == pytest.approx(1.0 - a, abs=1e-12)


def test_auc_single_class_rejected():
    # single-class data may exist (e.g. for other kernels) but AUC must refuse
    ds = LabeledDataset(DesignMatrix(np.zeros((3, 1))), np.array([1, 1, 1]))
    with pytest.raises(ValueError):
        gs.auc_value(np.array([1.0]), ds)
    with pytest.raises(ValueError):
        mean_difference_direction(ds)


def test_variance_kernel_two_points():
    x = np.array([[0.0], [2.0]])
    km = build_kernel_matrix("variance", DesignMatrix(x))
    assert km.dense()[0, 1] == 2.0
    assert km.u_stat == pytest.approx(1.0, abs=1e-15)  # population variance


def test_variance_kernel_identical_points():
    x = np.ones((5, 3))
    km = build_kernel_matrix("variance", DesignMatrix(x))
    assert km.u_stat == 0.0


def test_variance_kernel_matches_moment_formula(rng):
    x = rng.normal(size=(20, 4))
    km = build_kernel_matrix("variance", DesignMatrix(x))
    centered = x - x.mean(axis=0)
    assert km.u_stat == pytest.approx(
        (centered**2).sum() / 20, abs=1e-10)


def test_permutation_invariance(rng, kernel_factory):
    km = kernel_factory(8, rng)
    perm = rng.permutation(8)
    km2 = KernelMatrix.from_dense(np.asarray(km.dense()[np.ix_(perm, perm)]).copy())
    assert km2.u_stat == pytest.approx(km.u_stat, abs=1e-10)
    assert km2.frob_centered == pytest.approx(km.frob_centered, rel=1e-10)


def test_from_dense_validation():
    with pytest.raises(ValueError):
        KernelMatrix.from_dense(np.array([[0.0, 1.0], [2.0, 0.0]]))  # asym
    with pytest.raises(ValueError):
        KernelMatrix.from_dense(np.array([[1.0, 0.0], [0.0, 0.0]]))  # diag
    bad = np.zeros((2, 2))
    bad[0, 1] = bad[1, 0] = np.nan
    with pytest.raises(ValueError):
        KernelMatrix.from_dense(bad)


def test_dispersion_zero_iff_constant_rows():
    km = KernelMatrix.from_dense(np.zeros((5, 5)))
    assert km.frob_centered == 0.0
    h = np.ones((5, 5)) - np.eye(5)
    km2 = KernelMatrix.from_dense(h)
    assert km2.frob_centered > 0.0  # zero diagonal forces non-constant rows


def test_build_rejects_missing_requirements(rng):
    x = DesignMatrix(rng.normal(size=(4, 2)))
    with pytest.raises(ValueError):
        build_kernel_matrix("scatter", x)  # no partition
    with pytest.raises(ValueError):
        build_kernel_matrix("auc", x)  # unlabeled data
    with pytest.raises(ValueError):
        build_kernel_matrix("nope", x)


def test_streaming_stats_match_dense(rng):
    x = DesignMatrix(rng.normal(size=(12, 2)))
    dense = build_kernel_matrix("variance", x)
    lazy = build_kernel_matrix("variance", x, dense_limit=5)
    assert lazy.H is None
    assert lazy.u_stat == pytest.approx(dense.u_stat, abs=1e-12)
    assert np.allclose(lazy.row_means, dense.row_means, atol=1e-12)
    assert lazy.frob_centered == pytest.approx(dense.frob_centered, rel=1e-12)
    assert lazy.vec_centered == pytest.approx(dense.vec_centered, rel=1e-10)
    assert lazy.value(3, 7) == pytest.approx(dense.dense()[3, 7], abs=1e-15)
    with pytest.raises(ValueError):
        lazy.dense()


def test_csv_round_trip(tmp_path, rng):
    x = rng.normal(size=(6, 3))
    labels = np.array([1, -1, 1, -1, 1, -1])
    path = tmp_path / "d.csv"
    write_design_csv(path, x, labels)
    ds = load_labeled_csv(path)
    assert np.allclose(ds.design.rows, x, atol=0)
    assert np.array_equal(ds.labels, labels)

    path2 = tmp_path / "plain.csv"
    write_design_csv(path2, x)
    dm = load_design_csv(path2)
    assert np.allclose(dm.rows, x, atol=0)

    cells = np.array([1, 1, 2, 2, 3, 3])
    path3 = tmp_path / "cells.csv"
    write_design_csv(path3, x, cells)
    dm2, part = load_partitioned_csv(path3)
    assert np.allclose(dm2.rows, x, atol=0)
    assert np.array_equal(part.assignment, cells)


def test_csv_header_sniffing(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("a,b,label\n1.0,2.0,1\n3.0,4.0,-1\n")
    ds = load_labeled_csv(path)
    assert ds.design.n == 2
    assert np.array_equal(ds.labels, [1, -1])


def test_csv_missing_file():
    with pytest.raises(FileNotFoundError):
        load_design_csv("/nonexistent/file.csv")


def test_mean_difference_direction():
    x = np.array([[1.0, 0.0], [3.0, 0.0], [-1.0, 2.0], [-3.0, 2.0]])
    ds = LabeledDataset(DesignMatrix(x), np.array([1, 1, -1, -1]))
    assert np.allclose(mean_difference_direction(ds), [4.0, -2.0])

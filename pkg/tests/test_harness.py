import json

import numpy as np
import pytest

import gosta_sim as gs
from gosta_sim.harness import (build_graph_from_spec, load_experiment,
                               parse_graph_spec_string, reaching_time,
                               run_experiment, synth_gaussian_mixture,
                               synth_two_class, table1)


def minimal_config(tmp_path, **overrides):
    cfg = {
        "graph": {"family": "complete", "n": 12},
        "kernel": {"name": "variance"},
        "data": {"kind": "gaussian_mixture", "n": 12, "d": 2,
                 "clusters": 1, "separation": 0.0},
        "protocols": ["gosta_sync"],
        "iters": 50,
    }
    cfg.update(overrides)
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    return path


# ------------------------------------------------------------- config


def test_load_minimal_config_fills_defaults(tmp_path):
    spec = load_experiment(minimal_config(tmp_path))
    assert spec.runs == 1
    assert spec.seed == 0
    assert spec.checkpoint_policy == "geometric"
    assert spec.output_dir == "."


def test_load_config_missing_csv_names_path(tmp_path):
    path = minimal_config(tmp_path, data={"kind": "csv",
                                          "path": "does_not_exist.csv"})
    with pytest.raises(FileNotFoundError, match="does_not_exist.csv"):
        load_experiment(path)


def test_load_config_zero_runs_rejected(tmp_path):
    with pytest.raises(ValueError, match="runs"):
        load_experiment(minimal_config(tmp_path, runs=0))


def test_load_config_unknown_key_rejected(tmp_path):
    with pytest.raises(ValueError, match="frobnicate"):
        load_experiment(minimal_config(tmp_path, frobnicate=1))
    path = minimal_config(tmp_path,
                          graph={"family": "complete", "n": 5, "extra": 2})
    with pytest.raises(ValueError, match="extra"):
        load_experiment(path)


def test_load_config_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValueError, match="invalid JSON"):
        load_experiment(path)


def test_load_config_unknown_protocol(tmp_path):
    with pytest.raises(ValueError, match="protocol"):
        load_experiment(minimal_config(tmp_path, protocols=["warp_drive"]))


# ------------------------------------------------------------- generators


def test_mixture_single_cluster(rng):
    dm, part = synth_gaussian_mixture(10, 3, 1, 5.0, rng)
    assert dm.n == 10 and dm.d == 3
    assert (part.assignment == 1).all()


def test_mixture_zero_separation_two_halves(rng):
    dm, part = synth_gaussian_mixture(40, 2, 2, 0.0, rng)
    assert sorted(np.bincount(part.assignment)[1:]) == [20, 20]
    # identically distributed halves: means within a few standard errors
    a = dm.rows[part.assignment == 1].mean(axis=0)
    b = dm.rows[part.assignment == 2].mean(axis=0)
    assert np.abs(a - b).max() < 1.5


def test_mixture_separated_clusters(rng):
    dm, part = synth_gaussian_mixture(90, 2, 3, 10.0, rng)
    x = dm.rows
    within, across = [], []
    for i in range(90):
        for j in range(i + 1, 90):
            dist = np.linalg.norm(x[i] - x[j])
            (within if part.assignment[i] == part.assignment[j]
             else across).append(dist)
    assert np.mean(within) < 0.5 * np.mean(across)


def test_mixture_remainder_to_early_cells(rng):
    _, part = synth_gaussian_mixture(11, 2, 3, 1.0, rng)
    assert list(np.bincount(part.assignment)[1:]) == [4, 4, 3]


def test_mixture_validation(rng):
    with pytest.raises(ValueError):
        synth_gaussian_mixture(2, 2, 3, 1.0, rng)


def test_two_class_large_margin_high_auc(rng):
    ds = synth_two_class(200, 3, 10.0, rng)
    theta = gs.kernels.mean_difference_direction(ds)
    assert gs.auc_value(theta, ds) > 0.99


def test_two_class_zero_margin_chance_auc():
    vals = []
    for seed in range(5):
        ds = synth_two_class(300, 3, 0.0, np.random.default_rng(seed))
        theta = gs.kernels.mean_difference_direction(ds)
        vals.append(gs.auc_value(theta, ds))
    assert abs(np.mean(vals) - 0.5) < 0.05


def test_two_class_n2(rng):
    ds = synth_two_class(2, 1, 1.0, rng)
    assert sorted(ds.labels) == [-1, 1]


# ------------------------------------------------------------- graph specs


def test_parse_graph_spec_strings():
    assert parse_graph_spec_string("complete:n=10") == {
        "family": "complete", "n": 10}
    assert parse_graph_spec_string("watts_strogatz:n=50,k=4,p=0.3") == {
        "family": "watts_strogatz", "n": 50, "k": 4, "p": 0.3}
    assert parse_graph_spec_string("some/file.txt") == {
        "family": "file", "path": "some/file.txt"}


def test_build_graph_from_spec_deterministic():
    spec = {"family": "watts_strogatz", "n": 30, "k": 4, "p": 0.5}
    g1 = build_graph_from_spec(spec, seed=5)
    g2 = build_graph_from_spec(spec, seed=5)
    assert np.array_equal(g1.edges, g2.edges)


# ------------------------------------------------------------- experiments


def test_run_experiment_structure_and_determinism(tmp_path):
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    cfgpath = minimal_config(
        tmp_path,
        graph={"family": "complete", "n": 20},
        data={"kind": "gaussian_mixture", "n": 20, "d": 2,
              "clusters": 2, "separation": 4.0},
        kernel={"name": "scatter"},
        protocols=["gosta_sync", "u2"],
        iters=200, runs=3, seed=9,
        output_dir=str(out1),
    )
    spec = load_experiment(cfgpath)
    result = run_experiment(spec)
    # identical checkpoint grids across protocols
    sync = result.protocols["gosta_sync"]
    u2 = result.protocols["u2"]
    assert np.array_equal(sync.ts, u2.ts)
    assert sync.per_run_means.shape == (3, len(sync.ts))
    # byte-identical rerun
    spec2 = load_experiment(cfgpath)
    object.__setattr__(spec2, "output_dir", str(out2))
    run_experiment(spec2)
    for name in ("gosta_sync.csv", "u2.csv", "comparison.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_experiment_csv_round_trip(tmp_path):
    cfgpath = minimal_config(tmp_path, output_dir=str(tmp_path / "out"),
                             runs=2)
    result = run_experiment(load_experiment(cfgpath))
    csv_path = tmp_path / "out" / "comparison.csv"
    lines = csv_path.read_text().splitlines()
    header = lines[0].split(",")
    assert header == ["protocol", "t", "comm_units", "err_mean",
                      "err_std_nodes", "err_std_runs"]
    agg = result.protocols["gosta_sync"]
    row = lines[1].split(",")
    assert row[0] == "gosta_sync"
    assert int(row[1]) == agg.ts[0]
    assert float(row[3]) == agg.err_mean[0]  # exact round trip


def test_reaching_time_cases():
    agg = gs.harness.ProtocolAggregate(
        protocol="x", ts=np.array([1, 10, 100]),
        comm_units=np.array([1, 10, 100]),
        err_mean=np.array([0.5, 0.1, 0.01]),
        err_std_nodes=np.zeros(3), err_std_runs=np.zeros(3),
        per_run_means=np.zeros((1, 3)), per_run_stds=np.zeros((1, 3)),
        absolute=False)
    res = gs.harness.AggregateResult({"x": agg}, truth=1.0, runs=1)
    assert reaching_time(res, 0.2) == {"x": 10}
    assert reaching_time(res, 0.9) == {"x": 1}
    assert reaching_time(res, 0.001) == {"x": None}


def test_reaching_time_gap_widens_with_network_size():
    # the iteration count needed to reach 20% error grows faster for the
    # double-propagation protocol than for the averaging protocol
    from gosta_sim.engines import EngineConfig, derive_seed

    gaps = []
    for n in (50, 100, 200):
        g = gs.make_complete(n)
        dm, part = synth_gaussian_mixture(n, 2, 3, 8.0,
                                          np.random.default_rng(15))
        km = gs.build_kernel_matrix("scatter", dm, part)
        cps = sorted(set(int(v) for v in np.geomspace(10, 40 * n, 40)))
        reach = {}
        for pidx, proto in enumerate(("gosta_sync", "u2")):
            acc = np.zeros(len(cps))
            for r in range(20):
                cfg = EngineConfig(protocol=proto, max_iters=cps[-1],
                                   seed=derive_seed(700, n, pidx, r),
                                   checkpoints=tuple(cps))
                tr = gs.run_protocol(cfg, g=g, km=km)
                acc += gs.relative_error(tr).mean
            acc /= 20
            below = np.nonzero(acc < 0.2)[0]
            assert below.size, f"{proto} never reached 20% at n={n}"
            reach[proto] = cps[below[0]]
        assert reach["u2"] > reach["gosta_sync"]
        gaps.append(reach["u2"] - reach["gosta_sync"])
    assert gaps[0] < gaps[1] < gaps[2]


def test_table1_ordering_small():
    rows = table1([
        {"family": "grid2d", "rows": 6, "cols": 6},
        {"family": "watts_strogatz", "n": 36, "k": 5, "p": 0.3},
        {"family": "complete", "n": 36},
    ], seed=3)
    gaps = [r["gap"] for r in rows]
    assert gaps[0] < gaps[1] < gaps[2]
    assert rows[2]["gap"] == pytest.approx(1 / 35, rel=1e-6)


def test_boyd_in_experiment(tmp_path):
    cfgpath = minimal_config(tmp_path, protocols=["boyd"], iters=100,
                             output_dir=str(tmp_path / "b"))
    result = run_experiment(load_experiment(cfgpath))
    assert "boyd" in result.protocols

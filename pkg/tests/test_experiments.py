"""Config validation, experiment orchestration, report files, sweeps."""

import copy
import json

import numpy as np
import pytest

from dflmesh.engine import MetricsRecord
from dflmesh.errors import ConfigError, DisconnectedGraphError
from dflmesh.experiments import (
    build_mixing,
    build_topology,
    compare_topologies,
    failure_sweep,
    json_safe,
    parse_topology_label,
    rounds_to_threshold,
    run_from_config,
    validate_config,
)
from dflmesh.graphs import Graph
from dflmesh.spectral import eigen_extremes


def regression_config(**overrides):
    cfg = {
        "topology": {"kind": "ring", "n": 8, "seed": 1},
        "mixing": {"kind": "laplacian", "theta": "auto"},
        "train": {"eta": 0.01, "beta": 0.0, "K": 1, "T": 5, "seed": 0},
        "model": {"kind": "least_squares"},
        "data": {
            "kind": "synthetic_regression",
            "shards": 8,
            "rows_per_shard": 8,
            "dims": 2,
            "shard_shift": 1.0,
            "noise": 0.5,
            "seed": 0,
        },
    }
    cfg.update(copy.deepcopy(overrides))
    return cfg


def classification_config(**overrides):
    cfg = {
        "topology": {"kind": "ring", "n": 6, "seed": 2},
        "mixing": {"kind": "laplacian", "theta": "auto"},
        "train": {"eta": 0.2, "beta": 0.0, "K": 1, "T": 8, "seed": 3},
        "model": {"kind": "logistic"},
        "data": {
            "kind": "synthetic_classification",
            "shards": 6,
            "partition": "iid",
            "n_samples": 180,
            "dims": 4,
            "classes": 2,
            "cluster_sep": 3.0,
            "seed": 4,
            "test_per_class": 10,
        },
    }
    cfg.update(copy.deepcopy(overrides))
    return cfg


# -- validate_config -----------------------------------------------------------------


def test_unknown_keys_rejected_with_dotted_paths():
    cfg = regression_config()
    cfg["bogus"] = 1
    with pytest.raises(ConfigError, match="config: unknown key 'bogus'"):
        validate_config(cfg)
    cfg = regression_config()
    cfg["topology"]["extra"] = 1
    with pytest.raises(ConfigError, match="topology: unknown key 'extra'"):
        validate_config(cfg)
    cfg = regression_config()
    cfg["train"]["warmup"] = 1
    with pytest.raises(ConfigError, match="train: unknown key 'warmup'"):
        validate_config(cfg)


def test_shards_must_match_node_count():
    cfg = regression_config()
    cfg["data"]["shards"] = 4
    with pytest.raises(ConfigError, match="must equal topology.n"):
        validate_config(cfg)


def test_odd_expander_degrees_other_than_three_rejected():
    cfg = regression_config()
    cfg["topology"] = {"kind": "expander", "n": 8, "d": 5, "seed": 0}
    with pytest.raises(ConfigError, match="odd degrees other than 3"):
        validate_config(cfg)
    cfg["topology"]["d"] = 3  # ring plus matching handles this one
    validate_config(cfg)


def test_exactly_one_stepsize_schedule():
    cfg = regression_config()
    cfg["train"]["c"] = 0.5
    with pytest.raises(ConfigError, match="exactly one of 'eta' or 'c'"):
        validate_config(cfg)
    del cfg["train"]["eta"]
    del cfg["train"]["c"]
    with pytest.raises(ConfigError, match="exactly one of 'eta' or 'c'"):
        validate_config(cfg)


def test_model_data_compatibility():
    cfg = regression_config()
    cfg["model"]["kind"] = "logistic"
    with pytest.raises(ConfigError, match="needs model.kind least_squares"):
        validate_config(cfg)
    cfg = classification_config()
    cfg["data"]["classes"] = 3
    with pytest.raises(ConfigError, match="needs data.classes == 2"):
        validate_config(cfg)


def test_booleans_are_not_numbers():
    cfg = regression_config()
    cfg["topology"]["n"] = True
    with pytest.raises(ConfigError, match="expected a number, got True"):
        validate_config(cfg)


def test_zero_rounds_is_legal():
    cfg = regression_config()
    cfg["train"]["T"] = 0
    out = validate_config(cfg)
    assert out["train"]["T"] == 0


def test_defaults_are_filled_in():
    out = validate_config(regression_config())
    assert out["train"]["batch_size"] is None
    assert out["train"]["eval_stride"] == 1
    assert out["data"]["partition"] == "by_shard"
    assert out["data"]["eval_rows_per_shard"] == 4


def test_threshold_validation():
    cfg = regression_config(threshold={"kind": "relative", "value": 1e-3})
    validate_config(cfg)
    cfg = classification_config(threshold={"kind": "relative", "value": 1e-3})
    with pytest.raises(ConfigError, match="convex optimum"):
        validate_config(cfg)
    cfg = classification_config(threshold={"kind": "absolute", "value": 0.5})
    validate_config(cfg)


def test_compare_labels_validated_up_front():
    cfg = regression_config(compare=["ring", "expander:4"])
    validate_config(cfg)
    cfg = regression_config(compare=["hypercube"])
    with pytest.raises(ConfigError, match="unknown topology label"):
        validate_config(cfg)


# -- topology / label helpers ------------------------------------------------------------


def test_build_topology_kinds():
    ring = build_topology({"kind": "ring", "n": 6, "seed": 0})
    assert ring.num_edges == 6
    comp = build_topology({"kind": "complete", "n": 5, "seed": 0})
    assert comp.num_edges == 10
    exp3 = build_topology({"kind": "expander", "n": 10, "d": 3, "seed": 1})
    assert all(exp3.degree(i) == 3 for i in range(10))
    exp4 = build_topology({"kind": "expander", "n": 16, "d": 4, "seed": 1})
    assert int(exp4.degrees().max()) <= 4


def test_erdos_renyi_resample_budget_exhausts():
    spec = {"kind": "erdos_renyi", "n": 50, "p": 0.001, "seed": 0}
    with pytest.raises(DisconnectedGraphError, match="no connected sample in 16 attempts"):
        build_topology(spec)


def test_erdos_renyi_deterministic_given_seed():
    spec = {"kind": "erdos_renyi", "n": 20, "p": 0.3, "seed": 5}
    assert build_topology(spec) == build_topology(dict(spec))


def test_parse_topology_label_forms():
    base = {"n": 12, "seed": 9}
    assert parse_topology_label("ring", base) == {"kind": "ring", "n": 12, "seed": 9}
    assert parse_topology_label("expander:4", base)["d"] == 4
    assert parse_topology_label("erdos_renyi:0.25", base)["p"] == 0.25
    with pytest.raises(ConfigError, match="unknown topology label"):
        parse_topology_label("torus", base)
    with pytest.raises(ConfigError, match="needs a degree"):
        parse_topology_label("expander", base)
    with pytest.raises(ConfigError, match="takes no argument"):
        parse_topology_label("ring:5", base)
    with pytest.raises(ConfigError, match="bad topology label"):
        parse_topology_label("expander:four", base)


# -- run_from_config ------------------------------------------------------------------


def test_run_writes_all_reports(tmp_path):
    res = run_from_config(regression_config(bounds=True), out_dir=tmp_path, plot=True)
    text = (tmp_path / "metrics.csv").read_bytes().decode()
    lines = text.split("\n")
    assert lines[0] == "round,train_loss,test_loss,test_acc,consensus_dist,cum_comm_cost"
    assert len(lines) == 7  # header + 5 rounds + trailing newline
    assert "\r" not in text
    assert "," in lines[1] and "." in lines[1]
    topo = json.loads((tmp_path / "topology.json").read_text())
    assert Graph.from_json_dict(topo) == res["graph"]
    spectral = json.loads((tmp_path / "spectral.json").read_text())
    assert sorted(spectral) == ["kappa", "lambda2", "lambdaN", "lambda_mix"]
    lo, hi = eigen_extremes(res["graph"])
    assert spectral["lambda2"] == pytest.approx(lo, rel=1e-12)
    assert spectral["kappa"] == pytest.approx(hi / lo, rel=1e-12)
    assert (tmp_path / "metrics.png").stat().st_size > 0
    bounds = json.loads((tmp_path / "bounds.json").read_text())
    assert "measured" in bounds and "convergence_bound" in bounds


def test_guard_satisfying_run_reports_numeric_bound(tmp_path):
    cfg = regression_config(bounds=True)
    cfg["train"]["eta"] = 0.001
    res = run_from_config(cfg, out_dir=tmp_path, plot=False)
    report = json.loads((tmp_path / "bounds.json").read_text())
    assert report["convergence_bound"] is not None
    assert report["convergence_bound"] > 0.0
    assert report["measured"]["smoothness_source"] == "closed_form"
    assert "figure" not in res["paths"]


def test_zero_round_run_writes_header_only_csv(tmp_path):
    cfg = regression_config()
    cfg["train"]["T"] = 0
    res = run_from_config(cfg, out_dir=tmp_path, plot=True)
    text = (tmp_path / "metrics.csv").read_text()
    assert text == "round,train_loss,test_loss,test_acc,consensus_dist,cum_comm_cost\n"
    assert res["result"].metrics == []
    assert not (tmp_path / "metrics.png").exists()


def test_identical_config_gives_byte_identical_outputs(tmp_path):
    cfg = regression_config()
    cfg["train"]["batch_size"] = 4
    run_from_config(cfg, out_dir=tmp_path / "a", plot=False)
    run_from_config(copy.deepcopy(cfg), out_dir=tmp_path / "b", plot=False)
    assert (tmp_path / "a/metrics.csv").read_bytes() == (
        tmp_path / "b/metrics.csv"
    ).read_bytes()
    assert (tmp_path / "a/spectral.json").read_bytes() == (
        tmp_path / "b/spectral.json"
    ).read_bytes()


def test_config_file_loading_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        run_from_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        run_from_config(bad)


def test_classification_run_records_accuracy(tmp_path):
    res = run_from_config(classification_config(), out_dir=tmp_path, plot=False)
    last = res["result"].metrics[-1]
    assert 0.5 <= last.test_acc <= 1.0
    assert np.isfinite(last.test_loss)


# -- threshold helper ----------------------------------------------------------------


def fake_metrics(rows):
    return [
        MetricsRecord(
            round=r,
            train_loss=tl,
            test_loss=el,
            test_acc=float("nan"),
            consensus_dist=0.0,
            cum_comm_cost=0,
        )
        for r, tl, el in rows
    ]


def test_rounds_to_threshold_channels():
    metrics = fake_metrics([(1, 0.9, 0.95), (2, 0.5, 0.7), (3, 0.2, 0.4)])
    assert rounds_to_threshold(metrics, 0.5) == 2  # default: train loss
    assert rounds_to_threshold(metrics, 0.5, "test_loss") == 3
    assert rounds_to_threshold(metrics, 0.05) is None
    assert rounds_to_threshold(metrics, None) is None


# -- compare_topologies -----------------------------------------------------------------


def test_compare_single_label_single_row(tmp_path):
    out = compare_topologies(
        regression_config(), labels=["ring"], out_dir=tmp_path, plot=False
    )
    assert len(out["rows"]) == 1
    row = out["rows"][0]
    assert sorted(row) == [
        "final_test_acc",
        "final_train_loss",
        "mixing_rate",
        "rounds_to_threshold",
        "topology",
        "total_comm_cost",
    ]
    assert row["topology"] == "ring"
    assert (tmp_path / "metrics_ring.csv").exists()
    assert (tmp_path / "compare.csv").exists()


def test_compare_uses_config_compare_key_and_sanitizes_names(tmp_path):
    cfg = regression_config(compare=["ring", "expander:4"])
    cfg["topology"]["n"] = 16
    cfg["data"]["shards"] = 16
    out = compare_topologies(cfg, out_dir=tmp_path, plot=True)
    assert [r["topology"] for r in out["rows"]] == ["ring", "expander:4"]
    assert (tmp_path / "metrics_expander_4.csv").exists()
    assert (tmp_path / "compare_train_loss.png").exists()
    header = (tmp_path / "compare.csv").read_text().splitlines()[0]
    assert header == (
        "topology,mixing_rate,rounds_to_threshold,"
        "final_train_loss,final_test_acc,total_comm_cost"
    )


def test_compare_without_labels_anywhere_is_an_error(tmp_path):
    with pytest.raises(ConfigError, match="no topologies to compare"):
        compare_topologies(regression_config(), out_dir=tmp_path)


def test_complete_vs_three_regular_comm_cost_ratio(tmp_path):
    cfg = regression_config()
    cfg["topology"] = {"kind": "ring", "n": 10, "seed": 3}
    cfg["data"]["shards"] = 10
    out = compare_topologies(
        cfg, labels=["complete", "expander:3"], out_dir=tmp_path, plot=False
    )
    by = {r["topology"]: r["total_comm_cost"] for r in out["rows"]}
    # K10 has 45 edges, ring-plus-matching is exactly 3-regular with 15
    assert by["complete"] == 3 * by["expander:3"]


def test_compare_relative_threshold_populates_hit_round(tmp_path):
    cfg = regression_config(threshold={"kind": "relative", "value": 0.5})
    cfg["train"]["T"] = 60
    cfg["train"]["eta"] = 0.05
    out = compare_topologies(cfg, labels=["complete"], out_dir=tmp_path, plot=False)
    hit = out["rows"][0]["rounds_to_threshold"]
    assert isinstance(hit, int) and 1 <= hit <= 60


# -- failure_sweep ------------------------------------------------------------------------


def test_failure_sweep_baseline_and_files(tmp_path):
    cfg = classification_config()
    out = failure_sweep(cfg, [0.0, 0.25], out_dir=tmp_path / "sweep", plot=True)
    rows = out["rows"]
    assert [r["fraction"] for r in rows] == [0.0, 0.25]
    assert rows[0]["acc_degradation"] == 0.0
    assert rows[0]["alive_connected_rounds"] == rows[0]["total_rounds"] == 8
    assert np.isfinite(rows[1]["acc_degradation"])
    assert (tmp_path / "sweep/metrics_f0p00.csv").exists()
    assert (tmp_path / "sweep/metrics_f0p25.csv").exists()
    assert (tmp_path / "sweep/failures.csv").exists()
    assert (tmp_path / "sweep/failures.png").exists()
    header = (tmp_path / "sweep/failures.csv").read_text().splitlines()[0]
    assert header == (
        "fraction,final_acc,final_train_loss,acc_degradation,"
        "alive_connected_rounds,total_rounds"
    )


def test_failure_sweep_fraction_zero_matches_plain_run(tmp_path):
    cfg = classification_config()
    run_from_config(copy.deepcopy(cfg), out_dir=tmp_path / "plain", plot=False)
    failure_sweep(copy.deepcopy(cfg), [0.0], out_dir=tmp_path / "sweep", plot=False)
    assert (tmp_path / "plain/metrics.csv").read_bytes() == (
        tmp_path / "sweep/metrics_f0p00.csv"
    ).read_bytes()


def test_failure_sweep_rejects_bad_fraction(tmp_path):
    with pytest.raises(ConfigError, match="failure fraction"):
        failure_sweep(classification_config(), [1.0], out_dir=tmp_path)


# -- json helper --------------------------------------------------------------------------


def test_json_safe_handles_numpy_and_non_finite():
    blob = {
        "a": np.float64(1.5),
        "b": np.int64(3),
        "c": float("nan"),
        "d": [np.float32(2.0), float("inf")],
        "e": {"f": -float("inf")},
    }
    out = json_safe(blob)
    assert out == {"a": 1.5, "b": 3, "c": None, "d": [2.0, None], "e": {"f": None}}
    json.dumps(out)

"""Config-driven experiment runners behind the CLI.

A run is described by one JSON object.  Keys (unknown keys are rejected):

    topology   {kind, n, d?, p?, seed?}          ring | complete | erdos_renyi | expander
    mixing     {kind, theta?}                    laplacian | metropolis_hastings | max_degree
    train      {eta | c, beta?, K?, T, batch_size?, seed?, eval_stride?}
    model      {kind, hidden?, l2?}              least_squares | logistic | mlp
    data       {kind, shards, partition?, ...}   synthetic_classification | synthetic_regression | idx
    failures   {fraction, mode?, seed?}          optional
    threshold  {kind, value}                     optional; relative needs a convex optimum
    bounds     true | false                      optional; adds measured-constant bound report
    output     directory string                  optional; the CLI --out flag overrides it

``run_from_config`` writes metrics.csv (fixed column set, LF endings),
topology.json, spectral.json, optionally bounds.json, and a metrics figure.
``compare_topologies`` and ``failure_sweep`` reuse the same machinery across
topologies / failure fractions.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import data as datamod
from . import models as modelmod
from .bounds import (
    BoundParams,
    convergence_bound,
    stability_bound,
    stepsize_sum_worst_ratio,
)
from .engine import METRICS_COLUMNS, FailurePlan, TrainConfig, run_experiment
from .errors import BoundGuardError, ConfigError, DisconnectedGraphError
from .graphs import (
    Graph,
    is_connected,
    make_complete,
    make_erdos_renyi,
    make_regular_expander,
    make_ring,
    make_ring_with_matching,
)
from .mixing import (
    MixingMatrix,
    clamp_theta,
    laplacian_mixing,
    max_degree_mixing,
    metropolis_hastings_mixing,
    optimal_theta,
)
from .spectral import SpectralSummary, eigen_extremes, reduced_condition_number

__all__ = [
    "validate_config",
    "build_topology",
    "build_mixing",
    "analyze_topology",
    "run_from_config",
    "compare_topologies",
    "failure_sweep",
    "write_metrics_csv",
]

TOPOLOGY_KINDS = ("ring", "complete", "erdos_renyi", "expander")
MIXING_KINDS = ("laplacian", "metropolis_hastings", "max_degree")
MODEL_KINDS = ("least_squares", "logistic", "mlp")
DATA_KINDS = ("synthetic_classification", "synthetic_regression", "idx")
ER_RESAMPLE_BUDGET = 16


# -- validation helpers ----------------------------------------------------------


def _check_keys(obj: dict, path: str, required: set, optional: set) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = sorted(set(obj) - required - optional)
    if unknown:
        raise ConfigError(f"{path}: unknown key {unknown[0]!r}")
    missing = sorted(required - set(obj))
    if missing:
        raise ConfigError(f"{path}: missing required key {missing[0]!r}")


def _get_num(obj, path, key, default=None, minimum=None, maximum=None, integer=False):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {v}")
    if maximum is not None and v > maximum:
        raise ConfigError(f"{path}.{key}: must be <= {maximum}, got {v}")
    return int(v) if integer else float(v)


def _get_choice(obj, path, key, choices, default=None):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = obj[key]
    if v not in choices:
        raise ConfigError(
            f"{path}.{key}: expected one of {sorted(choices)}, got {v!r}"
        )
    return v


def validate_config(cfg: dict) -> dict:
    """Full schema walk; returns a normalized copy with defaults filled in."""
    _check_keys(
        cfg,
        "config",
        required={"topology", "train", "model", "data"},
        optional={"mixing", "failures", "threshold", "bounds", "output", "compare"},
    )
    out: dict = {}

    t = cfg["topology"]
    _check_keys(t, "topology", {"kind", "n"}, {"d", "p", "seed"})
    kind = _get_choice(t, "topology", "kind", TOPOLOGY_KINDS)
    n = _get_num(t, "topology", "n", minimum=2, integer=True)
    tnorm = {"kind": kind, "n": n, "seed": _get_num(t, "topology", "seed", 0, integer=True)}
    if kind == "expander":
        tnorm["d"] = _get_num(t, "topology", "d", minimum=2, integer=True)
        if tnorm["d"] % 2 == 1 and tnorm["d"] != 3:
            raise ConfigError(
                "topology.d: odd degrees other than 3 are not constructible"
            )
    elif "d" in t:
        raise ConfigError(f"topology.d: not valid for kind {kind!r}")
    if kind == "erdos_renyi":
        tnorm["p"] = _get_num(t, "topology", "p", minimum=1e-9, maximum=1 - 1e-9)
    elif "p" in t:
        raise ConfigError(f"topology.p: not valid for kind {kind!r}")
    if kind == "ring" and n < 3:
        raise ConfigError("topology.n: ring needs n >= 3")
    out["topology"] = tnorm

    m = cfg.get("mixing", {"kind": "laplacian", "theta": "auto"})
    _check_keys(m, "mixing", {"kind"}, {"theta"})
    mkind = _get_choice(m, "mixing", "kind", MIXING_KINDS)
    mnorm = {"kind": mkind}
    if mkind == "laplacian":
        theta = m.get("theta", "auto")
        if theta != "auto":
            if isinstance(theta, bool) or not isinstance(theta, (int, float)):
                raise ConfigError(f"mixing.theta: expected number or 'auto', got {theta!r}")
            if not 0.0 <= theta < 1.0:
                raise ConfigError(f"mixing.theta: must be in [0, 1), got {theta}")
            theta = float(theta)
        mnorm["theta"] = theta
    elif "theta" in m:
        raise ConfigError(f"mixing.theta: not valid for kind {mkind!r}")
    out["mixing"] = mnorm

    tr = cfg["train"]
    _check_keys(
        tr, "train", {"T"},
        {"eta", "c", "beta", "K", "batch_size", "seed", "eval_stride"},
    )
    if ("eta" in tr) == ("c" in tr):
        raise ConfigError("train: set exactly one of 'eta' or 'c'")
    trnorm = {
        "beta": _get_num(tr, "train", "beta", 0.0, minimum=0.0, maximum=1.0 - 1e-12),
        "K": _get_num(tr, "train", "K", 1, minimum=1, integer=True),
        "T": _get_num(tr, "train", "T", minimum=0, integer=True),
        "seed": _get_num(tr, "train", "seed", 0, integer=True),
        "eval_stride": _get_num(tr, "train", "eval_stride", 1, minimum=1, integer=True),
    }
    if "eta" in tr:
        trnorm["eta"] = _get_num(tr, "train", "eta", minimum=1e-300)
    else:
        trnorm["c"] = _get_num(tr, "train", "c", minimum=1e-300)
    if "batch_size" in tr and tr["batch_size"] is not None:
        trnorm["batch_size"] = _get_num(tr, "train", "batch_size", minimum=1, integer=True)
    else:
        trnorm["batch_size"] = None
    out["train"] = trnorm

    mo = cfg["model"]
    _check_keys(mo, "model", {"kind"}, {"hidden", "l2"})
    mokind = _get_choice(mo, "model", "kind", MODEL_KINDS)
    monorm = {"kind": mokind}
    if mokind == "mlp":
        monorm["hidden"] = _get_num(mo, "model", "hidden", 32, minimum=1, integer=True)
    elif "hidden" in mo:
        raise ConfigError(f"model.hidden: not valid for kind {mokind!r}")
    if mokind == "logistic":
        monorm["l2"] = _get_num(mo, "model", "l2", 0.0, minimum=0.0)
    elif "l2" in mo:
        raise ConfigError(f"model.l2: not valid for kind {mokind!r}")
    out["model"] = monorm

    d = cfg["data"]
    _check_keys(
        d, "data", {"kind", "shards"},
        {
            "partition", "n_samples", "dims", "classes", "cluster_sep", "seed",
            "noise", "shard_shift", "rows_per_shard", "test_per_class",
            "eval_rows_per_shard", "images", "labels", "test_images", "test_labels",
        },
    )
    dkind = _get_choice(d, "data", "kind", DATA_KINDS)
    shards = _get_num(d, "data", "shards", minimum=1, integer=True)
    if shards != n:
        raise ConfigError(f"data.shards: must equal topology.n ({n}), got {shards}")
    dnorm = {"kind": dkind, "shards": shards, "seed": _get_num(d, "data", "seed", 0, integer=True)}
    if dkind == "synthetic_classification":
        dnorm["partition"] = _get_choice(
            d, "data", "partition", ("iid", "by_label"), "by_label"
        )
        dnorm["n_samples"] = _get_num(d, "data", "n_samples", minimum=2, integer=True)
        dnorm["dims"] = _get_num(d, "data", "dims", minimum=1, integer=True)
        dnorm["classes"] = _get_num(d, "data", "classes", minimum=2, integer=True)
        dnorm["cluster_sep"] = _get_num(d, "data", "cluster_sep", minimum=0.0)
        dnorm["test_per_class"] = _get_num(d, "data", "test_per_class", 8, minimum=1, integer=True)
    elif dkind == "synthetic_regression":
        dnorm["partition"] = _get_choice(d, "data", "partition", ("by_shard",), "by_shard")
        dnorm["dims"] = _get_num(d, "data", "dims", minimum=1, integer=True)
        dnorm["rows_per_shard"] = _get_num(d, "data", "rows_per_shard", minimum=1, integer=True)
        dnorm["shard_shift"] = _get_num(d, "data", "shard_shift", 0.0, minimum=0.0)
        dnorm["noise"] = _get_num(d, "data", "noise", 0.0, minimum=0.0)
        dnorm["eval_rows_per_shard"] = _get_num(
            d, "data", "eval_rows_per_shard", 4, minimum=1, integer=True
        )
    else:  # idx
        dnorm["partition"] = _get_choice(
            d, "data", "partition", ("iid", "by_label"), "by_label"
        )
        for key in ("images", "labels", "test_images", "test_labels"):
            if key not in d or not isinstance(d[key], str):
                raise ConfigError(f"data.{key}: required path for kind 'idx'")
            dnorm[key] = d[key]
    out["data"] = dnorm

    if out["model"]["kind"] == "least_squares" and dkind != "synthetic_regression":
        raise ConfigError("model.kind least_squares needs data.kind synthetic_regression")
    if out["model"]["kind"] != "least_squares" and dkind == "synthetic_regression":
        raise ConfigError("data.kind synthetic_regression needs model.kind least_squares")
    if out["model"]["kind"] == "logistic" and dkind == "synthetic_classification":
        if dnorm["classes"] != 2:
            raise ConfigError("model.kind logistic needs data.classes == 2")

    if "failures" in cfg and cfg["failures"] is not None:
        f = cfg["failures"]
        _check_keys(f, "failures", {"fraction"}, {"mode", "seed"})
        out["failures"] = {
            "fraction": _get_num(f, "failures", "fraction", minimum=0.0, maximum=1.0 - 1e-12),
            "mode": _get_choice(f, "failures", "mode", ("transient", "permanent"), "transient"),
            "seed": _get_num(f, "failures", "seed", 0, integer=True),
        }
    if "threshold" in cfg and cfg["threshold"] is not None:
        th = cfg["threshold"]
        _check_keys(th, "threshold", {"kind", "value"}, set())
        thkind = _get_choice(th, "threshold", "kind", ("relative", "absolute"))
        if thkind == "relative" and out["model"]["kind"] != "least_squares":
            raise ConfigError(
                "threshold.kind relative needs a convex optimum (model least_squares)"
            )
        out["threshold"] = {
            "kind": thkind,
            "value": _get_num(th, "threshold", "value", minimum=0.0),
        }
    if "bounds" in cfg:
        if not isinstance(cfg["bounds"], bool):
            raise ConfigError("bounds: expected true or false")
        out["bounds"] = cfg["bounds"]
    if "output" in cfg:
        if not isinstance(cfg["output"], str):
            raise ConfigError("output: expected a directory string")
        out["output"] = cfg["output"]
    if "compare" in cfg:
        labels = cfg["compare"]
        if not isinstance(labels, list) or not labels or not all(
            isinstance(x, str) for x in labels
        ):
            raise ConfigError("compare: expected a non-empty list of topology labels")
        for x in labels:
            parse_topology_label(x, out["topology"])  # validates the shorthand
        out["compare"] = list(labels)
    return out


# -- builders ---------------------------------------------------------------------


def _child_seed(seed: int, salt: int) -> int:
    return int(np.random.SeedSequence((seed, salt)).generate_state(1)[0])


def build_topology(t: dict) -> Graph:
    kind, n, seed = t["kind"], t["n"], t.get("seed", 0)
    if kind == "ring":
        return make_ring(n)
    if kind == "complete":
        return make_complete(n)
    if kind == "erdos_renyi":
        for attempt in range(ER_RESAMPLE_BUDGET):
            g = make_erdos_renyi(n, t["p"], _child_seed(seed, attempt))
            if is_connected(g):
                return g
        raise DisconnectedGraphError(
            f"no connected sample in {ER_RESAMPLE_BUDGET} attempts "
            f"(n={n}, p={t['p']})"
        )
    if kind == "expander":
        d = t["d"]
        if d == 3:
            return make_ring_with_matching(n, seed)
        return make_regular_expander(n, d, seed)
    raise ConfigError(f"topology.kind: unknown kind {kind!r}")


def build_mixing(g: Graph, m: dict) -> MixingMatrix:
    kind = m["kind"]
    if kind == "laplacian":
        theta = m.get("theta", "auto")
        if theta == "auto":
            theta = clamp_theta(optimal_theta(reduced_condition_number(g)))
        return laplacian_mixing(g, theta)
    if kind == "metropolis_hastings":
        return metropolis_hastings_mixing(g)
    if kind == "max_degree":
        return max_degree_mixing(g)
    raise ConfigError(f"mixing.kind: unknown kind {kind!r}")


def analyze_topology(t: dict, m: dict | None = None) -> SpectralSummary:
    g = build_topology(t)
    mix = build_mixing(g, m or {"kind": "laplacian", "theta": "auto"})
    lo, hi = eigen_extremes(g)
    return SpectralSummary(
        lambda2=lo, lambda_n=hi, kappa=hi / lo, mixing_rate=mix.rate
    )


class _Problem:
    """Objectives plus evaluation data for one configured run."""

    def __init__(self, objectives, eval_set, model, init_params, optimum_loss):
        self.objectives = objectives
        self.eval_set = eval_set
        self.model = model
        self.init_params = init_params
        self.optimum_loss = optimum_loss


def build_problem(dspec: dict, mspec: dict, train_seed: int) -> _Problem:
    kind = dspec["kind"]
    if kind == "synthetic_regression":
        bundle = datamod.synthetic_regression(
            n_shards=dspec["shards"],
            rows_per_shard=dspec["rows_per_shard"],
            dims=dspec["dims"],
            shard_shift=dspec["shard_shift"],
            noise=dspec["noise"],
            seed=dspec["seed"],
            eval_rows_per_shard=dspec["eval_rows_per_shard"],
        )
        objectives = [
            modelmod.least_squares(bundle.features[s], bundle.targets[s])
            for s in bundle.shards
        ]
        _, opt_loss = modelmod.least_squares_optimum(bundle.features, bundle.targets)
        model = objectives[0].model
        init = np.zeros(model.param_count)
        # The evaluation split for least squares is the pooled training matrix:
        # the recorded eval loss is then the pooled objective at each node's own
        # parameters, averaged over nodes.  That quantity is >= the pooled
        # optimum, with equality exactly when every node holds the shared
        # solution, so it certifies optimality and consensus at once.
        return _Problem(
            objectives, (bundle.features, bundle.targets), model, init, opt_loss
        )
    if kind == "synthetic_classification":
        ds = datamod.synthetic_classification(
            n_samples=dspec["n_samples"],
            dims=dspec["dims"],
            classes=dspec["classes"],
            cluster_sep=dspec["cluster_sep"],
            seed=dspec["seed"],
        )
        train, test = datamod.balanced_holdout(
            ds, dspec["test_per_class"], _child_seed(dspec["seed"], 0x401D)
        )
    else:  # idx
        train = datamod.load_idx(dspec["images"], dspec["labels"], "train")
        test = datamod.load_idx(dspec["test_images"], dspec["test_labels"], "test")
    if dspec["partition"] == "iid":
        part = datamod.partition_iid(train, dspec["shards"], _child_seed(dspec["seed"], 0x5917))
    else:
        part = datamod.partition_by_label(train, dspec["shards"])
    dims = train.features.shape[1]
    if mspec["kind"] == "logistic":
        model = modelmod.LogisticRegression(dims, l2=mspec.get("l2", 0.0))
    else:
        model = modelmod.mlp_classifier(dims, mspec["hidden"], max(train.n_classes, test.n_classes))
    objectives = [
        modelmod.LocalObjective(model, train.features[s], train.labels[s])
        for s in part.shards
    ]
    init = model.init_params(train_seed)
    return _Problem(objectives, (test.features, test.labels), model, init, None)


# -- output writers -------------------------------------------------------------


def write_metrics_csv(metrics, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for m in metrics:
            writer.writerow(m.as_row())


def json_safe(obj):
    """Recursively convert numpy scalars and replace non-finite floats by None."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(json_safe(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _exact_smoothness(problem: _Problem) -> float | None:
    model = problem.model
    if not hasattr(model, "smoothness"):
        return None
    return max(model.smoothness(o.features) for o in problem.objectives)


def _bounds_report(cfg, problem, mix, result) -> dict:
    consts = result.constants
    exact_l = _exact_smoothness(problem)
    smooth = exact_l if exact_l is not None else consts.smoothness
    if smooth <= 0.0:
        smooth = max(consts.smoothness, 1e-12)
    min_f = problem.optimum_loss if problem.optimum_loss is not None else 0.0
    gap = max(consts.initial_gap_loss - min_f, 0.0)
    loss_sup = max((m.train_loss for m in result.metrics), default=0.0)
    report: dict = {
        "measured": {
            "smoothness": smooth,
            "smoothness_source": "closed_form" if exact_l is not None else "ratio_estimate",
            "noise_bound": consts.noise_bound,
            "heterogeneity_bound": consts.heterogeneity_bound,
            "grad_bound": consts.grad_bound,
            "initial_gap": gap,
            "mixing_rate": mix.rate,
            "min_mean_grad_sq": consts.min_mean_grad_sq,
        }
    }
    tr = cfg["train"]
    common = dict(
        smoothness=smooth,
        local_steps=tr["K"],
        rounds=max(tr["T"], 1),
        momentum=tr["beta"],
        mixing_rate=min(max(mix.rate, 1e-9), 1.0 - 1e-12),
        noise_bound=consts.noise_bound,
        heterogeneity_bound=consts.heterogeneity_bound,
        grad_bound=consts.grad_bound,
        num_nodes=len(problem.objectives),
        local_data_size=min(o.n_samples for o in problem.objectives),
        initial_gap=gap,
        loss_sup=loss_sup,
    )
    if "eta" in tr:
        try:
            report["convergence_bound"] = convergence_bound(
                BoundParams(stepsize=tr["eta"], **common)
            )
        except (BoundGuardError, ValueError) as err:
            report["convergence_bound"] = None
            report["convergence_skipped"] = str(err)
    if "c" in tr:
        try:
            params = BoundParams(stepsize_scale=tr["c"], **common)
            report["stability_bound"] = stability_bound(params)
            report["stepsize_sum_ratio"] = stepsize_sum_worst_ratio(
                tr["c"], params.mixing_rate, t_max=max(tr["T"], 2)
            )
        except (BoundGuardError, ValueError) as err:
            report["stability_bound"] = None
            report["stability_skipped"] = str(err)
    return report


# -- top-level runners -------------------------------------------------------------


def _load_config(config) -> dict:
    if isinstance(config, (str, Path)):
        try:
            with open(config) as fh:
                config = json.load(fh)
        except FileNotFoundError as err:
            raise ConfigError(f"config file not found: {config}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from err
    return validate_config(config)


def _train_config(tr: dict) -> TrainConfig:
    return TrainConfig(
        eta=tr.get("eta"),
        c=tr.get("c"),
        beta=tr["beta"],
        local_steps=tr["K"],
        rounds=tr["T"],
        batch_size=tr["batch_size"],
        seed=tr["seed"],
        eval_stride=tr["eval_stride"],
    )


def _failure_plan(cfg: dict) -> FailurePlan | None:
    f = cfg.get("failures")
    if f is None or f["fraction"] == 0.0:
        return None
    return FailurePlan(fraction=f["fraction"], mode=f["mode"], seed=f["seed"])


def run_from_config(config, out_dir=None, plot: bool = True) -> dict:
    """Run one configured experiment and write its report files.

    Returns a dict with the written paths, the ExperimentResult, the graph,
    and the mixing matrix.
    """
    cfg = _load_config(config)
    out = Path(out_dir if out_dir is not None else cfg.get("output", "."))
    out.mkdir(parents=True, exist_ok=True)
    g = build_topology(cfg["topology"])
    mix = build_mixing(g, cfg["mixing"])
    problem = build_problem(cfg["data"], cfg["model"], cfg["train"]["seed"])
    tc = _train_config(cfg["train"])
    result = run_experiment(
        tc,
        mix,
        problem.objectives,
        eval_set=problem.eval_set,
        failure_plan=_failure_plan(cfg),
        init_params=problem.init_params,
        track_constants=bool(cfg.get("bounds", False)),
    )
    paths = {
        "metrics": out / "metrics.csv",
        "topology": out / "topology.json",
        "spectral": out / "spectral.json",
    }
    write_metrics_csv(result.metrics, paths["metrics"])
    _write_json(g.to_json_dict(), paths["topology"])
    lo, hi = eigen_extremes(g)
    summary = SpectralSummary(lambda2=lo, lambda_n=hi, kappa=hi / lo, mixing_rate=mix.rate)
    _write_json(summary.to_json_dict(), paths["spectral"])
    if cfg.get("bounds", False):
        paths["bounds"] = out / "bounds.json"
        _write_json(_bounds_report(cfg, problem, mix, result), paths["bounds"])
    if plot and result.metrics:
        from .plots import metrics_figure

        paths["figure"] = out / "metrics.png"
        metrics_figure(
            result.metrics, paths["figure"],
            title=f"{cfg['topology']['kind']} n={cfg['topology']['n']}",
        )
    return {
        "config": cfg,
        "paths": {k: str(v) for k, v in paths.items()},
        "result": result,
        "graph": g,
        "mixing": mix,
        "problem": problem,
    }


def _resolve_threshold(cfg: dict, problem: _Problem) -> tuple[float, str] | None:
    """Map the threshold config onto a target value and a metrics column.

    Absolute thresholds cut the recorded training loss.  Relative thresholds
    are only meaningful against a computable optimum (least squares), and they
    cut the evaluation loss, which for those problems is the pooled objective
    at each node's own parameters -- the strictest progress measure, since it
    only reaches the optimum once all nodes agree on the shared solution.
    """
    th = cfg.get("threshold")
    if th is None:
        return None
    if th["kind"] == "absolute":
        return th["value"], "train_loss"
    if problem.optimum_loss is None:
        raise ConfigError("relative threshold needs a convex optimum")
    return (1.0 + th["value"]) * problem.optimum_loss, "test_loss"


def rounds_to_threshold(metrics, threshold, channel: str = "train_loss") -> int | None:
    """First recorded round whose ``channel`` value is <= ``threshold``."""
    if threshold is None:
        return None
    for m in metrics:
        if getattr(m, channel) <= threshold:
            return m.round
    return None


def parse_topology_label(label: str, base: dict) -> dict:
    """CLI shorthand: 'ring', 'complete', 'expander:4', 'erdos_renyi:0.05'."""
    head, _, arg = label.partition(":")
    if head not in TOPOLOGY_KINDS:
        raise ConfigError(f"unknown topology label {label!r}")
    t = {"kind": head, "n": base["n"], "seed": base.get("seed", 0)}
    try:
        if head == "expander":
            if not arg:
                raise ConfigError("expander label needs a degree, e.g. expander:4")
            t["d"] = int(arg)
        elif head == "erdos_renyi":
            if not arg:
                raise ConfigError(
                    "erdos_renyi label needs a probability, e.g. erdos_renyi:0.05"
                )
            t["p"] = float(arg)
        elif arg:
            raise ConfigError(f"topology label {label!r} takes no argument")
    except ValueError as err:
        raise ConfigError(f"bad topology label {label!r}: {err}") from err
    return t


def compare_topologies(config, labels=None, out_dir=None, plot: bool = True) -> dict:
    """Run the same problem over several topologies; one comparison row each.

    ``labels`` defaults to the config's own ``compare`` list.  Each topology
    additionally gets its full metrics CSV (metrics_<label>.csv).
    """
    cfg = _load_config(config)
    if labels is None:
        labels = cfg.get("compare")
    if not labels:
        raise ConfigError("no topologies to compare: pass labels or a 'compare' key")
    out = Path(out_dir if out_dir is not None else cfg.get("output", "."))
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    curves = {}
    paths = {}
    for label in labels:
        tspec = (
            parse_topology_label(label, cfg["topology"])
            if isinstance(label, str)
            else dict(label)
        )
        name = label if isinstance(label, str) else tspec["kind"]
        sub = dict(cfg)
        sub["topology"] = tspec
        sub["data"] = dict(cfg["data"])
        g = build_topology(tspec)
        mix = build_mixing(g, cfg["mixing"])
        problem = build_problem(sub["data"], cfg["model"], cfg["train"]["seed"])
        tc = _train_config(cfg["train"])
        result = run_experiment(
            tc,
            mix,
            problem.objectives,
            eval_set=problem.eval_set,
            failure_plan=_failure_plan(cfg),
            init_params=problem.init_params,
        )
        resolved = _resolve_threshold(cfg, problem)
        hit = (
            rounds_to_threshold(result.metrics, resolved[0], resolved[1])
            if resolved is not None
            else None
        )
        final = result.metrics[-1] if result.metrics else None
        rows.append(
            {
                "topology": name,
                "mixing_rate": mix.rate,
                "rounds_to_threshold": hit,
                "final_train_loss": final.train_loss if final else float("nan"),
                "final_test_acc": final.test_acc if final else float("nan"),
                "total_comm_cost": final.cum_comm_cost if final else 0,
            }
        )
        curves[name] = result.metrics
        safe = name.replace(":", "_").replace("/", "_")
        per_topology = out / f"metrics_{safe}.csv"
        write_metrics_csv(result.metrics, per_topology)
        paths[f"metrics_{safe}"] = str(per_topology)
    csv_path = out / "compare.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["topology", "mixing_rate", "rounds_to_threshold",
             "final_train_loss", "final_test_acc", "total_comm_cost"]
        )
        for r in rows:
            writer.writerow(
                [
                    r["topology"],
                    r["mixing_rate"],
                    "" if r["rounds_to_threshold"] is None else r["rounds_to_threshold"],
                    r["final_train_loss"],
                    r["final_test_acc"],
                    r["total_comm_cost"],
                ]
            )
    paths["compare"] = str(csv_path)
    if plot and curves:
        from .plots import comparison_figure

        fig_path = out / "compare_train_loss.png"
        comparison_figure(curves, fig_path, "train_loss", "train loss")
        paths["figure"] = str(fig_path)
        if any(
            not np.isnan(m.test_acc) for ms in curves.values() for m in ms
        ):
            acc_path = out / "compare_test_acc.png"
            comparison_figure(curves, acc_path, "test_acc", "test accuracy")
            paths["figure_acc"] = str(acc_path)
    return {"rows": rows, "paths": paths, "curves": curves}


def _alive_subgraph_connected(g: Graph, alive: np.ndarray) -> bool:
    ids = np.flatnonzero(alive)
    if ids.size == 0:
        return False
    seen = {int(ids[0])}
    stack = [int(ids[0])]
    alive_set = set(int(i) for i in ids)
    while stack:
        u = stack.pop()
        for v in g.neighbors(u):
            if v in alive_set and v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == ids.size


def failure_sweep(config, fractions, out_dir=None, plot: bool = True) -> dict:
    """Rerun one config at several failure fractions; report degradation."""
    cfg = _load_config(config)
    out = Path(out_dir if out_dir is not None else cfg.get("output", "."))
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    baseline_acc = None
    baseline_loss = None
    for fraction in fractions:
        if not 0.0 <= fraction < 1.0:
            raise ConfigError(f"failure fraction must be in [0, 1), got {fraction}")
        sub = dict(cfg)
        if fraction > 0.0:
            base_f = cfg.get("failures", {"mode": "transient", "seed": 0})
            sub["failures"] = {
                "fraction": fraction,
                "mode": base_f.get("mode", "transient"),
                "seed": base_f.get("seed", 0),
            }
        else:
            sub.pop("failures", None)
        g = build_topology(cfg["topology"])
        mix = build_mixing(g, cfg["mixing"])
        problem = build_problem(cfg["data"], cfg["model"], cfg["train"]["seed"])
        tc = _train_config(cfg["train"])
        result = run_experiment(
            tc,
            mix,
            problem.objectives,
            eval_set=problem.eval_set,
            failure_plan=_failure_plan(sub),
            init_params=problem.init_params,
        )
        connected_rounds = sum(
            1 for mask in result.alive_history if _alive_subgraph_connected(g, mask)
        )
        total_rounds = len(result.alive_history)
        final = result.metrics[-1] if result.metrics else None
        final_acc = final.test_acc if final else float("nan")
        final_loss = final.train_loss if final else float("nan")
        if fraction == 0.0:
            baseline_acc = final_acc
            baseline_loss = final_loss
        rows.append(
            {
                "fraction": fraction,
                "final_acc": final_acc,
                "final_train_loss": final_loss,
                "acc_degradation": (
                    baseline_acc - final_acc
                    if baseline_acc is not None and not np.isnan(final_acc)
                    else float("nan")
                ),
                "alive_connected_rounds": connected_rounds,
                "total_rounds": total_rounds,
            }
        )
        tag = f"{fraction:.2f}".replace(".", "p")
        write_metrics_csv(result.metrics, out / f"metrics_f{tag}.csv")
    csv_path = out / "failures.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["fraction", "final_acc", "final_train_loss", "acc_degradation",
             "alive_connected_rounds", "total_rounds"]
        )
        for r in rows:
            writer.writerow(
                [r["fraction"], r["final_acc"], r["final_train_loss"],
                 r["acc_degradation"], r["alive_connected_rounds"], r["total_rounds"]]
            )
    paths = {"failures": str(csv_path)}
    if plot and rows:
        from .plots import failure_figure

        fig_path = out / "failures.png"
        failure_figure(rows, fig_path)
        paths["figure"] = str(fig_path)
    return {"rows": rows, "paths": paths}

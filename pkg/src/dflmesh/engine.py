"""Decentralized training engine: local momentum SGD plus gossip averaging.

One round per node: K stochastic momentum steps on the local shard

    w_{k+1} = w_k - eta_t * g_k + beta * (w_k - w_{k-1}),   w_{-1} = w_0,

where g_k is a mini-batch gradient (uniform sampling with replacement) and
the momentum memory resets at the start of every round.  Rounds end with one
gossip step: each node replaces its parameters by the mixing-weighted
average of its neighborhood.

Node failures: a failed node neither sends nor receives for the round.  Each
alive node folds the weight of its dead neighbors into its own diagonal
entry, which keeps rows stochastic (symmetry is deliberately given up for
that round).  Failed nodes keep stale parameters and are excluded from
metrics.

Determinism: node i's sampling stream for round t is seeded by the tuple
(master_seed, node_id, t), so results are independent of node update order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteParameterError
from .mixing import MixingMatrix
from .models import LocalObjective, accuracy

__all__ = [
    "TrainConfig",
    "NodeState",
    "FailurePlan",
    "MetricsRecord",
    "ConstantEstimates",
    "ExperimentResult",
    "init_states",
    "local_round",
    "communication_round",
    "consensus_distance",
    "run_experiment",
]

METRICS_COLUMNS = (
    "round",
    "train_loss",
    "test_loss",
    "test_acc",
    "consensus_dist",
    "cum_comm_cost",
)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one decentralized run.

    Exactly one of ``eta`` (constant stepsize) and ``c`` (decaying schedule
    eta_t = c / t, rounds counted from 1) must be set.
    """

    eta: float | None = None
    c: float | None = None
    beta: float = 0.0
    local_steps: int = 1
    rounds: int = 1
    batch_size: int | None = None  # None = full local shard, deterministic
    seed: int = 0
    eval_stride: int = 1

    def __post_init__(self):
        if (self.eta is None) == (self.c is None):
            raise ValueError("set exactly one of eta (constant) or c (c/t schedule)")
        if self.eta is not None and self.eta <= 0.0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.c is not None and self.c <= 0.0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")
        if self.local_steps < 1:
            raise ValueError(f"local_steps must be >= 1, got {self.local_steps}")
        if self.rounds < 0:
            raise ValueError(f"rounds must be >= 0, got {self.rounds}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.eval_stride < 1:
            raise ValueError(f"eval_stride must be >= 1, got {self.eval_stride}")

    def stepsize(self, t: int) -> float:
        if self.eta is not None:
            return self.eta
        return self.c / t


@dataclass
class NodeState:
    """Per-node training state; the previous iterate feeds the momentum term."""

    node_id: int
    params: np.ndarray
    prev_params: np.ndarray


def init_states(n_nodes: int, init_params: np.ndarray) -> list[NodeState]:
    """All nodes start from the same parameter vector (shared initialization)."""
    init = np.asarray(init_params, dtype=np.float64)
    return [
        NodeState(node_id=i, params=init.copy(), prev_params=init.copy())
        for i in range(n_nodes)
    ]


def _round_rng(master_seed: int, node_id: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((master_seed, node_id, t)))


def local_round(
    state: NodeState, cfg: TrainConfig, objective: LocalObjective, t: int
) -> NodeState:
    """K local momentum-SGD steps for round t (t counts from 1)."""
    eta = cfg.stepsize(t)
    rng = _round_rng(cfg.seed, state.node_id, t)
    w = state.params.copy()
    w_prev = w.copy()  # momentum memory resets each round
    for k in range(cfg.local_steps):
        if cfg.batch_size is None:
            g = objective.grad(w)
        else:
            idx = rng.integers(0, objective.n_samples, size=cfg.batch_size)
            g = objective.grad(w, idx)
        w_next = w - eta * g + cfg.beta * (w - w_prev)
        if not np.isfinite(w_next).all():
            raise NonFiniteParameterError(
                f"non-finite parameters at round {t}, local step {k}, "
                f"node {state.node_id}"
            )
        w_prev, w = w, w_next
    return NodeState(node_id=state.node_id, params=w, prev_params=w_prev)


def _effective_matrix(m: np.ndarray, alive: np.ndarray) -> np.ndarray:
    """Gossip matrix for one round with failed nodes muted.

    Alive rows zero their dead-neighbor columns and add the lost mass to the
    diagonal; dead rows become identity (stale state).  Row sums stay 1.
    """
    eff = m.copy()
    dead = ~alive
    if dead.any():
        lost = eff[:, dead].sum(axis=1)
        eff[:, dead] = 0.0
        diag = np.diag_indices(m.shape[0])
        eff[diag] += lost
        eff[dead, :] = 0.0
        eff[dead, dead] = 1.0
    return eff


def communication_round(
    states: list[NodeState],
    mix: MixingMatrix,
    alive: np.ndarray | None = None,
) -> list[NodeState]:
    """One gossip exchange; returns new states with momentum memory synced."""
    n = len(states)
    if mix.n != n:
        raise ValueError(f"mixing matrix is {mix.n}x{mix.n}, got {n} nodes")
    if alive is None:
        alive = np.ones(n, dtype=bool)
    else:
        alive = np.asarray(alive, dtype=bool)
        if alive.shape != (n,):
            raise ValueError(f"alive mask must have shape ({n},)")
        if not alive.any():
            raise ValueError("all nodes failed; nothing to average")
    stacked = np.stack([s.params for s in states])
    eff = _effective_matrix(mix.matrix, alive)
    mixed = eff @ stacked
    out = []
    for i, s in enumerate(states):
        if alive[i]:
            out.append(
                NodeState(node_id=s.node_id, params=mixed[i], prev_params=mixed[i].copy())
            )
        else:
            out.append(s)  # stale
    return out


def consensus_distance(states) -> float:
    """Frobenius distance between the parameter stack and its row-mean stack."""
    if isinstance(states, np.ndarray):
        stacked = states
    else:
        stacked = np.stack([s.params for s in states])
    center = stacked.mean(axis=0, keepdims=True)
    return float(np.linalg.norm(stacked - center))


@dataclass(frozen=True)
class FailurePlan:
    """Drop a fixed fraction of nodes: fresh draw each round, or once for good."""

    fraction: float
    mode: str = "transient"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fraction < 1.0:
            raise ValueError(f"fraction must be in [0, 1), got {self.fraction}")
        if self.mode not in ("transient", "permanent"):
            raise ValueError(f"mode must be transient or permanent, got {self.mode!r}")

    def alive_mask(self, n_nodes: int, t: int) -> np.ndarray:
        k = int(round(self.fraction * n_nodes))
        if k == 0:
            return np.ones(n_nodes, dtype=bool)
        draw_key = 1 if self.mode == "permanent" else t
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, draw_key)))
        dead = rng.choice(n_nodes, size=k, replace=False)
        mask = np.ones(n_nodes, dtype=bool)
        mask[dead] = False
        return mask


@dataclass
class MetricsRecord:
    round: int
    train_loss: float
    test_loss: float
    test_acc: float
    consensus_dist: float
    cum_comm_cost: int

    def as_row(self) -> list:
        return [
            self.round,
            self.train_loss,
            self.test_loss,
            self.test_acc,
            self.consensus_dist,
            self.cum_comm_cost,
        ]


@dataclass
class ConstantEstimates:
    """Empirical problem constants observed along one run, for bound evaluation.

    smoothness is a max gradient-difference ratio (a lower estimate unless a
    closed form is supplied downstream); noise is the worst per-sample
    stochastic deviation; heterogeneity the worst node-vs-global gradient
    gap at the averaged iterate; grad_bound the largest full-shard gradient
    norm seen anywhere.
    """

    smoothness: float
    noise_bound: float
    heterogeneity_bound: float
    grad_bound: float
    initial_gap_loss: float
    min_mean_grad_sq: float


class _ConstantTracker:
    def __init__(self, objectives: list[LocalObjective]):
        self.objectives = objectives
        self.smoothness = 0.0
        self.noise_sq = 0.0
        self.hetero = 0.0
        self.grad_bound = 0.0
        self.initial_loss = None
        self.min_mean_grad_sq = np.inf
        self._prev_mean = None
        self._prev_grads = None

    def _full_grads(self, w: np.ndarray) -> np.ndarray:
        return np.stack([o.grad(w) for o in self.objectives])

    def observe(self, states: list[NodeState]) -> None:
        stacked = np.stack([s.params for s in states])
        mean_w = stacked.mean(axis=0)
        grads = self._full_grads(mean_w)
        mean_grad = grads.mean(axis=0)
        self.min_mean_grad_sq = min(
            self.min_mean_grad_sq, float(mean_grad @ mean_grad)
        )
        if self.initial_loss is None:
            self.initial_loss = float(
                np.mean([o.loss(mean_w) for o in self.objectives])
            )
        norms = np.linalg.norm(grads, axis=1)
        self.grad_bound = max(self.grad_bound, float(norms.max()))
        self.hetero = max(
            self.hetero, float(np.linalg.norm(grads - mean_grad, axis=1).max())
        )
        for i, obj in enumerate(self.objectives):
            model = obj.model
            if hasattr(model, "per_sample_grads"):
                per = model.per_sample_grads(mean_w, obj.features, obj.labels)
            else:
                per = np.stack(
                    [obj.grad(mean_w, np.array([j])) for j in range(obj.n_samples)]
                )
            dev = per - grads[i]
            self.noise_sq = max(self.noise_sq, float((dev * dev).sum(axis=1).mean()))
            # per-node gradients at the node's own iterate feed the ratio bound
            g_local = obj.grad(states[i].params)
            self.grad_bound = max(self.grad_bound, float(np.linalg.norm(g_local)))
            dw = states[i].params - mean_w
            dist = float(np.linalg.norm(dw))
            if dist > 1e-12:
                ratio = float(np.linalg.norm(g_local - grads[i])) / dist
                self.smoothness = max(self.smoothness, ratio)
        if self._prev_mean is not None:
            dist = float(np.linalg.norm(mean_w - self._prev_mean))
            if dist > 1e-12:
                ratios = (
                    np.linalg.norm(grads - self._prev_grads, axis=1) / dist
                )
                self.smoothness = max(self.smoothness, float(ratios.max()))
        self._prev_mean = mean_w
        self._prev_grads = grads

    def estimates(self) -> ConstantEstimates:
        return ConstantEstimates(
            smoothness=self.smoothness,
            noise_bound=float(np.sqrt(self.noise_sq)),
            heterogeneity_bound=self.hetero,
            grad_bound=self.grad_bound,
            initial_gap_loss=self.initial_loss if self.initial_loss is not None else np.nan,
            min_mean_grad_sq=float(self.min_mean_grad_sq),
        )


@dataclass
class ExperimentResult:
    metrics: list[MetricsRecord]
    final_states: list[NodeState]
    constants: ConstantEstimates | None
    alive_history: list[np.ndarray] = field(default_factory=list)


def run_experiment(
    cfg: TrainConfig,
    mix: MixingMatrix,
    objectives: list[LocalObjective],
    eval_set: tuple[np.ndarray, np.ndarray] | None = None,
    failure_plan: FailurePlan | None = None,
    init_params: np.ndarray | None = None,
    track_constants: bool = False,
) -> ExperimentResult:
    """Run T rounds of local training plus gossip and collect metrics.

    Metrics average over alive nodes only.  Communication cost counts two
    directed model transfers per edge whose endpoints are both alive.
    """
    n = len(objectives)
    if mix.n != n:
        raise ValueError(f"mixing matrix is {mix.n}x{mix.n}, got {n} objectives")
    p = objectives[0].param_count
    for o in objectives:
        if o.param_count != p:
            raise ValueError("objectives disagree on parameter count")
    if init_params is None:
        init_params = np.zeros(p)
    states = init_states(n, init_params)
    edges = mix.edge_pairs()
    model = objectives[0].model
    tracker = _ConstantTracker(objectives) if track_constants else None
    metrics: list[MetricsRecord] = []
    alive_history: list[np.ndarray] = []
    cum_cost = 0
    for t in range(1, cfg.rounds + 1):
        alive = (
            failure_plan.alive_mask(n, t)
            if failure_plan is not None
            else np.ones(n, dtype=bool)
        )
        if not alive.any():
            raise ValueError(f"all nodes failed at round {t}")
        alive_history.append(alive)
        if tracker is not None:
            tracker.observe(states)
        states = [
            local_round(s, cfg, objectives[i], t) if alive[i] else s
            for i, s in enumerate(states)
        ]
        states = communication_round(states, mix, alive)
        cum_cost += 2 * p * sum(1 for i, j in edges if alive[i] and alive[j])
        if t % cfg.eval_stride == 0 or t == cfg.rounds:
            live = [s for i, s in enumerate(states) if alive[i]]
            train_loss = float(
                np.mean(
                    [objectives[s.node_id].loss(s.params) for s in live]
                )
            )
            test_loss = float("nan")
            test_acc = float("nan")
            if eval_set is not None:
                ev_x, ev_y = eval_set
                test_loss = float(
                    np.mean([model.loss(s.params, ev_x, ev_y) for s in live])
                )
                if getattr(model, "is_classifier", False):
                    test_acc = float(
                        np.mean(
                            [accuracy(model, s.params, ev_x, ev_y) for s in live]
                        )
                    )
            metrics.append(
                MetricsRecord(
                    round=t,
                    train_loss=train_loss,
                    test_loss=test_loss,
                    test_acc=test_acc,
                    consensus_dist=consensus_distance(live),
                    cum_comm_cost=cum_cost,
                )
            )
    return ExperimentResult(
        metrics=metrics,
        final_states=states,
        constants=tracker.estimates() if tracker is not None else None,
        alive_history=alive_history,
    )

"""Executable convergence and stability bounds for decentralized momentum SGD.

Two regimes are covered.  With a constant stepsize, ``convergence_bound``
evaluates the nonconvex rate

    min_t E||grad f(w_mean_t)||^2  <=  2 gap / (gamma T) + alpha + xi / (1 - rate)^2,

whose constants gamma/alpha/xi are explicit polynomials in (L, K, eta, beta)
and the noise/heterogeneity/gradient bounds.  With the decaying schedule
eta_t = c / t, ``stability_bound`` evaluates the uniform-stability (hence
generalization) bound, which depends on the topology only through the
increasing constant ``c_lambda``.

``c_lambda_lemma`` is the tighter min-term variant used by the summation
lemma behind the stability proof; ``stepsize_sum_worst_ratio`` brute-forces
that lemma:   sum_{j=1..t-1} (c/(t-j)) rate^j  <=  c * C / t  for all t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BoundGuardError

__all__ = [
    "BoundParams",
    "convergence_constants",
    "convergence_bound",
    "c_lambda",
    "c_lambda_lemma",
    "stability_bound",
    "stepsize_sum_worst_ratio",
]


@dataclass(frozen=True)
class BoundParams:
    """Problem constants consumed by the bound calculators.

    ``stepsize`` (constant eta) drives the convergence bound;
    ``stepsize_scale`` (c of the c/t schedule) drives the stability bound.
    Either may be omitted when the corresponding bound is not evaluated.
    """

    smoothness: float
    local_steps: int
    rounds: int
    momentum: float = 0.0
    mixing_rate: float = 0.5
    noise_bound: float = 0.0
    heterogeneity_bound: float = 0.0
    grad_bound: float = 0.0
    stepsize: float | None = None
    stepsize_scale: float | None = None
    num_nodes: int = 1
    local_data_size: int = 1
    initial_gap: float = 0.0
    loss_sup: float = 0.0

    def __post_init__(self):
        if self.smoothness <= 0.0:
            raise ValueError(f"smoothness must be positive, got {self.smoothness}")
        if self.local_steps < 1:
            raise ValueError(f"local_steps must be >= 1, got {self.local_steps}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if not 0.0 < self.mixing_rate < 1.0:
            raise ValueError(
                f"mixing_rate must be in (0, 1), got {self.mixing_rate}"
            )
        for label in ("noise_bound", "heterogeneity_bound", "grad_bound",
                      "initial_gap", "loss_sup"):
            if getattr(self, label) < 0.0:
                raise ValueError(f"{label} must be >= 0")
        if self.stepsize is not None and self.stepsize <= 0.0:
            raise ValueError(f"stepsize must be positive, got {self.stepsize}")
        if self.stepsize_scale is not None and self.stepsize_scale <= 0.0:
            raise ValueError(
                f"stepsize_scale must be positive, got {self.stepsize_scale}"
            )
        if self.num_nodes < 1 or self.local_data_size < 1:
            raise ValueError("num_nodes and local_data_size must be >= 1")


def convergence_constants(
    p: BoundParams, check_guards: bool = True
) -> tuple[float, float, float]:
    """(gamma, alpha, xi) of the constant-stepsize convergence bound.

    With ``check_guards`` the stepsize validity region is enforced
    (eta <= 1/(8 L K) and 64 L^2 K^2 eta^2 + 64 L K eta < 1, gamma > 0).
    Turning it off evaluates the raw expressions anywhere, which is only
    useful for cross-checking the algebra.
    """
    if p.stepsize is None:
        raise ValueError("convergence constants need a constant stepsize")
    lip, k, eta, beta = p.smoothness, float(p.local_steps), p.stepsize, p.momentum
    sig2 = p.noise_bound**2
    zeta2 = p.heterogeneity_bound**2
    b2 = p.grad_bound**2
    if check_guards:
        if eta > 1.0 / (8.0 * lip * k):
            raise BoundGuardError(
                f"stepsize guard violated: eta={eta:g} > 1/(8LK)={1.0 / (8 * lip * k):g}"
            )
        if 64.0 * lip**2 * k**2 * eta**2 + 64.0 * lip * k * eta >= 1.0:
            raise BoundGuardError(
                "stepsize guard violated: 64 L^2 K^2 eta^2 + 64 L K eta >= 1"
            )
    gamma = (
        eta * (k - beta) / (1.0 - beta)
        - 64.0 * (1.0 - beta) * lip**2 * k**4 * eta**3 / (k - beta)
        - 64.0 * lip * k**2 * eta**2
    )
    if check_guards and gamma <= 0.0:
        raise BoundGuardError(f"gamma nonpositive: {gamma:g}")
    momentum_noise = 64.0 * k**2 * beta**2 * (sig2 + b2) / (1.0 - beta) ** 2
    alpha = (
        ((1.0 - beta) * lip**2 * k**2 * eta**3 / (k - beta) + lip * eta**2)
        * (8.0 * k * sig2 + 32.0 * k**2 * zeta2 + momentum_noise)
        / gamma
    )
    xi = (
        (64.0 * (1.0 - beta) * lip**4 * k**4 * eta**5 / (k - beta)
         + 64.0 * lip**3 * k**2 * eta**4)
        * (8.0 * k * sig2 + 32.0 * k**2 * zeta2 + 32.0 * k**2 * b2 + momentum_noise)
        / gamma
    )
    return gamma, alpha, xi


def convergence_bound(p: BoundParams, check_guards: bool = True) -> float:
    """Upper bound on min_t E||grad f(w_mean_t)||^2 over rounds 1..T."""
    gamma, alpha, xi = convergence_constants(p, check_guards=check_guards)
    return (
        2.0 * p.initial_gap / (gamma * p.rounds)
        + alpha
        + xi / (1.0 - p.mixing_rate) ** 2
    )


def c_lambda(rate: float) -> float:
    """Topology constant of the stability bound; increasing on (0, 1).

    2 r^2 + 4 r^2 ln(1/r) + 2 r + 2 / ln(1/r).
    """
    if not 0.0 < rate < 1.0:
        raise ValueError(f"rate must be in (0, 1), got {rate}")
    log_inv = math.log(1.0 / rate)
    return 2.0 * rate**2 + 4.0 * rate**2 * log_inv + 2.0 * rate + 2.0 / log_inv


def c_lambda_lemma(rate: float) -> float:
    """Min-term variant used by the stepsize-sum lemma (r^{1/ln(1/r)} = 1/e)."""
    if not 0.0 < rate < 1.0:
        raise ValueError(f"rate must be in (0, 1), got {rate}")
    log_inv = math.log(1.0 / rate)
    inv_e = math.exp(-1.0)
    head = min(2.0 * rate, inv_e / log_inv)
    mid = min(4.0 * rate * log_inv, 4.0 * math.exp(-2.0) / log_inv)
    return head + mid + head + 2.0 / log_inv


def stability_bound(p: BoundParams) -> float:
    """Uniform-stability bound for the decaying schedule eta_t = c / t."""
    if p.stepsize_scale is None:
        raise ValueError("stability bound needs stepsize_scale (the c in c/t)")
    if p.loss_sup <= 0.0 or p.grad_bound <= 0.0:
        raise ValueError("stability bound needs positive loss_sup and grad_bound")
    c, lip, k = p.stepsize_scale, p.smoothness, float(p.local_steps)
    clk = c * lip * k
    expo = clk / (1.0 + clk)
    head = float(p.rounds) ** expo * (
        p.loss_sup * k * clk ** (1.0 / (1.0 + clk)) / p.local_data_size
        + (2.0 * p.noise_bound * p.grad_bound / (p.num_nodes * lip)) / clk**expo
    )
    tail = (
        p.grad_bound
        * (p.noise_bound + p.grad_bound)
        * (c * k + 2.0 * c_lambda(p.mixing_rate))
        / clk
    )
    return head + tail


def stepsize_sum_worst_ratio(c: float, rate: float, t_max: int = 10_000) -> float:
    """Worst ratio of the geometric stepsize sum against its closed-form cap.

    For every t in [2, t_max] the lemma promises

        sum_{j=1}^{t-1} (c / (t - j)) * rate^j  <=  c * c_lambda_lemma(rate) / t.

    Returns max_t of (t * sum) / (c * c_lambda_lemma(rate)); values <= 1 mean
    the lemma holds on the range.  The sum is evaluated by the stable
    recurrence S(t+1) = rate * (S(t) + 1/t).
    """
    if c <= 0.0:
        raise ValueError(f"c must be positive, got {c}")
    if not 0.0 < rate < 1.0:
        raise ValueError(f"rate must be in (0, 1), got {rate}")
    if t_max < 2:
        raise ValueError(f"t_max must be >= 2, got {t_max}")
    cap = c * c_lambda_lemma(rate)
    partial = rate  # S(2) = rate^1 / (2 - 1)
    worst = 2.0 * c * partial / cap
    for t in range(2, t_max):
        partial = rate * (partial + 1.0 / t)
        ratio = (t + 1) * c * partial / cap
        if ratio > worst:
            worst = ratio
    return worst

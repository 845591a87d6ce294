"""Spectral analysis of communication graphs.

Everything here runs on the combinatorial Laplacian L = D - A of a connected
graph.  The two numbers that drive topology design are the extreme nonzero
Laplacian eigenvalues: their ratio kappa = lambda_max / lambda_min_nonzero
(the reduced condition number) controls the best achievable gossip rate.

Two eigensolve paths are provided: a dense symmetric eigendecomposition
(default, fine at lab scale) and a Lanczos iteration with the all-ones
kernel deflated, validated against the dense path in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DisconnectedGraphError, NotConvergedError
from .graphs import Graph, is_connected

__all__ = [
    "SpectralSummary",
    "eigen_extremes",
    "reduced_condition_number",
    "ring_kappa_lower_bound",
    "ramanujan_kappa_upper_bound",
    "adjacency_second_eigenvalue",
]

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class SpectralSummary:
    """Report row for one topology: Laplacian extremes, kappa, gossip rate."""

    lambda2: float
    lambda_n: float
    kappa: float
    mixing_rate: float

    def to_json_dict(self) -> dict:
        return {
            "lambda2": self.lambda2,
            "lambdaN": self.lambda_n,
            "kappa": self.kappa,
            "lambda_mix": self.mixing_rate,
        }


def _require_connected(g: Graph) -> None:
    if not is_connected(g):
        raise DisconnectedGraphError(
            "spectral analysis needs a connected graph (lambda_2 would be 0)"
        )


def eigen_extremes(
    g: Graph, tol: float = DEFAULT_TOL, method: str = "dense"
) -> tuple[float, float]:
    """Smallest nonzero and largest Laplacian eigenvalues of a connected graph."""
    _require_connected(g)
    lap = g.laplacian_matrix()
    if method == "dense":
        vals = np.linalg.eigvalsh(lap)
        return float(vals[1]), float(vals[-1])
    if method == "lanczos":
        return _lanczos_extremes(lap, tol)
    raise ValueError(f"unknown method {method!r}")


def _lanczos_extremes(lap: np.ndarray, tol: float) -> tuple[float, float]:
    """Extreme eigenvalues of L restricted to the subspace orthogonal to ones.

    Full reorthogonalization against the ones vector and the whole Krylov
    basis; cheap at the matrix sizes this package works at.  Raises
    NotConvergedError when the residual bound is still above ``tol`` after
    the iteration budget (10 * n matrix applications).
    """
    n = lap.shape[0]
    budget = min(10 * n, n - 1)
    ones = np.full(n, 1.0 / math.sqrt(n))
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(n)
    v -= ones * (ones @ v)
    v /= np.linalg.norm(v)
    basis = [v]
    alphas: list[float] = []
    betas: list[float] = []
    for k in range(budget):
        w = lap @ basis[k]
        a = float(basis[k] @ w)
        alphas.append(a)
        w -= a * basis[k]
        if k > 0:
            w -= betas[-1] * basis[k - 1]
        w -= ones * (ones @ w)
        for b in basis:  # full reorthogonalization
            w -= b * (b @ w)
        beta = float(np.linalg.norm(w))
        tri = np.diag(alphas)
        if betas:
            off = np.array(betas)
            tri += np.diag(off, 1) + np.diag(off, -1)
        ritz, vecs = np.linalg.eigh(tri)
        scale = max(abs(ritz[0]), abs(ritz[-1]), 1.0)
        res_lo = beta * abs(vecs[-1, 0])
        res_hi = beta * abs(vecs[-1, -1])
        if max(res_lo, res_hi) <= tol * scale or beta <= tol * scale:
            return float(ritz[0]), float(ritz[-1])
        betas.append(beta)
        basis.append(w / beta)
    raise NotConvergedError(
        f"Lanczos did not reach tol={tol} within {budget} iterations"
    )


def reduced_condition_number(g: Graph, tol: float = DEFAULT_TOL) -> float:
    """kappa = lambda_max(L) / lambda_2(L); infinite only for disconnected graphs."""
    lo, hi = eigen_extremes(g, tol=tol)
    if lo <= tol * max(hi, 1.0):
        raise DisconnectedGraphError("lambda_2 is numerically zero")
    return hi / lo


def ring_kappa_lower_bound(n: int) -> float:
    """n^2 / pi^2: every ring's kappa sits above this, growing quadratically."""
    if n < 3:
        raise ValueError(f"ring needs n >= 3, got {n}")
    return n * n / math.pi**2


def ramanujan_kappa_upper_bound(d: int) -> float:
    """Best-possible kappa scale for d-regular graphs: (d + 2 sqrt(d-1)) / (d - 2 sqrt(d-1))."""
    if d < 3:
        raise ValueError(f"bound needs degree d >= 3, got {d}")
    s = 2.0 * math.sqrt(d - 1.0)
    return (d + s) / (d - s)


def adjacency_second_eigenvalue(g: Graph, tol: float = DEFAULT_TOL) -> float:
    """Largest-magnitude adjacency eigenvalue after removing the trivial one.

    Only defined for connected d-regular graphs, where the trivial (Perron)
    eigenvalue is exactly d and is simple.  The returned magnitude mu gives
    the degree-based kappa bound kappa <= (d + mu) / (d - mu) when mu < d
    (bipartite graphs hit mu = d and the bound degenerates).
    """
    degs = g.degrees()
    if not (degs == degs[0]).all():
        raise ValueError("graph is not regular; adjacency gap undefined")
    _require_connected(g)
    vals = np.linalg.eigvalsh(g.adjacency_matrix())
    d = float(degs[0])
    if abs(vals[-1] - d) > tol * max(d, 1.0):
        raise NotConvergedError(
            f"trivial adjacency eigenvalue off target: {vals[-1]} vs degree {d}"
        )
    return float(max(abs(vals[0]), abs(vals[-2])))

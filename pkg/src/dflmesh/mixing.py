"""Gossip (mixing) matrix constructors and the averaging step.

A valid mixing matrix for a graph is symmetric, row-stochastic, supported
exactly on the edge set off the diagonal, has 1 as a simple eigenvalue with
the all-ones eigenvector, and keeps the rest of its spectrum strictly above
-1.  Every constructor validates those axioms after building the matrix and
raises MixingPropertyError when one fails.

The Laplacian family  M = I - 2 L / ((1 + theta) * lambda_max(L)),
theta in [0, 1), maps Laplacian eigenvalues affinely; the choice
theta = 1 / kappa minimizes the mixing rate, reaching (kappa-1)/(kappa+1).
theta = 0 always fails validation: it sends lambda_max(L) to exactly -1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DisconnectedGraphError, MixingPropertyError
from .graphs import Graph, is_connected
from .spectral import eigen_extremes

__all__ = [
    "MixingMatrix",
    "THETA_MAX",
    "laplacian_mixing",
    "optimal_theta",
    "clamp_theta",
    "mixing_rate",
    "metropolis_hastings_mixing",
    "max_degree_mixing",
    "mix_step",
]

THETA_MAX = 1.0 - 1e-6  # clamp target when 1/kappa reaches the open boundary

_SYM_TOL = 1e-12
_ROW_TOL = 1e-12
_SPECTRUM_FLOOR = -1.0 + 1e-9
_SIMPLE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Validated gossip matrix plus its contraction rate max(|lam_2|, |lam_n|)."""

    matrix: np.ndarray
    rate: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def edge_pairs(self) -> list[tuple[int, int]]:
        """Off-diagonal support as canonical (i < j) pairs."""
        i_idx, j_idx = np.nonzero(np.triu(self.matrix, k=1))
        return [(int(i), int(j)) for i, j in zip(i_idx, j_idx)]


def _validated(m: np.ndarray, g: Graph) -> MixingMatrix:
    n = g.n
    if m.shape != (n, n):
        raise MixingPropertyError(f"shape {m.shape} does not match n={n}")
    sym_err = float(np.max(np.abs(m - m.T)))
    if sym_err > _SYM_TOL:
        raise MixingPropertyError(f"not symmetric: max |M - M^T| = {sym_err:g}")
    row_err = float(np.max(np.abs(m.sum(axis=1) - 1.0)))
    if row_err > _ROW_TOL:
        raise MixingPropertyError(f"rows do not sum to 1: max error {row_err:g}")
    adj = g.adjacency_matrix() > 0.0
    off_diag = ~np.eye(n, dtype=bool)
    bad_edge = adj & (m <= 0.0)
    if bad_edge.any():
        i, j = np.argwhere(bad_edge)[0]
        raise MixingPropertyError(
            f"edge ({i},{j}) carries nonpositive weight {m[i, j]:g}"
        )
    bad_off = off_diag & ~adj & (m != 0.0)
    if bad_off.any():
        i, j = np.argwhere(bad_off)[0]
        raise MixingPropertyError(f"nonzero weight {m[i, j]:g} on non-edge ({i},{j})")
    vals = np.linalg.eigvalsh(m)
    if vals[0] <= _SPECTRUM_FLOOR:
        raise MixingPropertyError(
            f"smallest eigenvalue {vals[0]:.12g} not strictly above -1"
        )
    if vals[-1] > 1.0 + _SYM_TOL:
        raise MixingPropertyError(f"largest eigenvalue {vals[-1]:.12g} exceeds 1")
    if vals[-2] >= 1.0 - _SIMPLE_TOL:
        raise MixingPropertyError(
            "eigenvalue 1 is not simple; is the graph connected?"
        )
    rate = float(max(abs(vals[0]), abs(vals[-2])))
    return MixingMatrix(matrix=m, rate=rate)


def laplacian_mixing(g: Graph, theta: float) -> MixingMatrix:
    """M = I - 2 L / ((1 + theta) lambda_max(L)) for theta in [0, 1)."""
    if not 0.0 <= theta < 1.0:
        raise ValueError(f"theta out of range [0, 1): {theta}")
    if not is_connected(g):
        raise DisconnectedGraphError("mixing needs a connected graph")
    _, lam_max = eigen_extremes(g)
    m = np.eye(g.n) - (2.0 / ((1.0 + theta) * lam_max)) * g.laplacian_matrix()
    m = 0.5 * (m + m.T)  # kill representation asymmetry at the last bit
    return _validated(m, g)


def optimal_theta(kappa: float) -> float:
    """Rate-minimizing theta for the Laplacian family: 1/kappa.

    The returned value hits the open boundary theta = 1 exactly when
    kappa = 1 (complete graphs); use ``clamp_theta`` before constructing.
    """
    if kappa < 1.0:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    return 1.0 / kappa


def clamp_theta(theta: float) -> float:
    return min(theta, THETA_MAX)


def mixing_rate(kappa: float, theta: float) -> float:
    """Closed-form rate of the Laplacian family without building the matrix.

    max(|1 + theta - 2/kappa|, 1 - theta) / (1 + theta); equals
    (kappa - 1) / (kappa + 1) at theta = 1/kappa.
    """
    if kappa < 1.0:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    if not 0.0 <= theta < 1.0:
        raise ValueError(f"theta out of range [0, 1): {theta}")
    return max(abs(1.0 + theta - 2.0 / kappa), 1.0 - theta) / (1.0 + theta)


def metropolis_hastings_mixing(g: Graph) -> MixingMatrix:
    """Degree-aware weights 1 / (1 + max(deg_i, deg_j)) on each edge."""
    if not is_connected(g):
        raise DisconnectedGraphError("mixing needs a connected graph")
    degs = g.degrees().astype(np.float64)
    m = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w = 1.0 / (1.0 + max(degs[i], degs[j]))
        m[i, j] = w
        m[j, i] = w
    m[np.diag_indices(g.n)] = 1.0 - m.sum(axis=1)
    return _validated(m, g)


def max_degree_mixing(g: Graph) -> MixingMatrix:
    """Uniform weight 1 / (1 + max degree) on every edge."""
    if not is_connected(g):
        raise DisconnectedGraphError("mixing needs a connected graph")
    w = 1.0 / (1.0 + float(g.degrees().max()))
    m = np.zeros((g.n, g.n))
    for i, j in g.edges:
        m[i, j] = w
        m[j, i] = w
    m[np.diag_indices(g.n)] = 1.0 - m.sum(axis=1)
    return _validated(m, g)


def mix_step(mix: MixingMatrix, states: np.ndarray) -> np.ndarray:
    """One gossip round: row i of the result is the weighted neighborhood average.

    ``states`` stacks per-node parameter vectors as rows (n x p).  The
    product uses a fixed summation order, so repeated calls are bitwise
    reproducible.
    """
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2 or states.shape[0] != mix.n:
        raise ValueError(
            f"states must be (n, p) with n={mix.n}, got {states.shape}"
        )
    return mix.matrix @ states

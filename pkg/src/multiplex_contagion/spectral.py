"""Dominant eigenpair by power iteration and the structural risk measures."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import fold_eigenvector

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
DAMPING_EPS = 1e-8
STALL_WINDOW = 200


class NonConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"power iteration did not converge after {iterations} iterations "
                         f"(last residual {residual:.3e})")


@dataclass(frozen=True)
class SpectralResult:
    lambda_max: float
    v: np.ndarray
    u: np.ndarray
    iterations: int
    converged: bool
    shift: float = 0.0


def _iterate(At: np.ndarray, x: np.ndarray, tol: float, max_iter: int, stall_check: bool):
    """Normalised iteration of ``At``; returns (x, lam, iterations, residual, stalled)."""
    history = []
    residual = np.inf
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = At @ x
        lam = np.abs(y).max()
        if lam == 0.0:
            raise ValueError("matrix has no dominant eigenpair (iterate vanished)")
        y /= lam
        residual = np.abs(y - x).max()
        x = y
        if residual < tol:
            return x, lam, it, residual, False
        if stall_check:
            history.append(residual)
            if it >= STALL_WINDOW and residual > 0.5 * history[it - STALL_WINDOW]:
                return x, lam, it, residual, True
    return x, lam, max_iter, residual, False


def power_iterate(matrix, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SpectralResult:
    """Dominant eigenpair of ``matrix.T`` with infinity-norm normalisation.

    Starts from the all-ones vector. When the plain iteration stalls
    (periodic patterns), it restarts on ``matrix.T + shift*I``, which has the
    same eigenvectors, and subtracts the shift from the eigenvalue.
    """
    S = np.asarray(matrix, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("matrix must be square")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.any(S):
        raise ValueError("zero matrix has no dominant eigenpair")
    At = S.T.copy()
    x0 = np.ones(S.shape[0])
    x, lam, it, residual, stalled = _iterate(At, x0, tol, max_iter, stall_check=True)
    shift = 0.0
    if stalled:
        # a shift of the order of the row-sum bound collapses the modulus of
        # the periodic eigenvalues; 1e-8 alone would need ~1e8 steps
        shift = max(DAMPING_EPS, float(S.sum(axis=1).max()))
        logger.debug("power iteration stalled after %d steps; shifting by %g", it, shift)
        shifted = At + shift * np.eye(S.shape[0])
        x, lam_s, it2, residual, _ = _iterate(shifted, x0, tol, max_iter - it, stall_check=False)
        lam = lam_s - shift
        it += it2
    if residual >= tol:
        raise NonConvergenceError(it, residual)
    v = x
    u = v / np.dot(v, v)
    return SpectralResult(float(lam), v, u, it, True, shift)


def risk_measures(lambda_max: float, p_min: float) -> tuple[float, float, str]:
    """(risk, resilience, region) from eigenvalue and default threshold."""
    risk = max(0.0, lambda_max - p_min)
    resilience = max(0.0, p_min - lambda_max)
    region = "fragility" if lambda_max > p_min else "resilience"
    return risk, resilience, region


@dataclass(frozen=True)
class RiskAssessment:
    p_min: float
    lambda_max: float
    risk: float
    resilience: float
    region: str
    mode: str
    members: tuple[int, ...]
    indexes: np.ndarray
    spectral: SpectralResult | None = None
    eigenmatrix: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.indexes)

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def core_indexes(self) -> np.ndarray:
        return self.indexes[list(self.members)]

    @property
    def stability_condition(self) -> str:
        return f"lambda_max < {self.p_min:.5f}"


def assess(matrix_connected, p_min: float, mode: str = "single",
           members: Sequence[int] | None = None, n: int | None = None,
           tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> RiskAssessment:
    """Risk/resilience and systemic-impact indexes of a connected structure.

    ``members`` are the original indices of the core institutions (``m`` of
    them; the matrix is ``m`` square in single mode and ``3m`` square in
    multiplex mode). Indexes are returned over all ``n`` institutions, zero
    outside the core.
    """
    if not 0 < p_min <= 1:
        raise ValueError(f"p_min must lie in (0, 1], got {p_min}")
    S = np.asarray(matrix_connected, dtype=float)
    per_inst = 3 if mode == "multiplex" else 1
    if mode not in ("single", "multiplex"):
        raise ValueError(f"unknown mode {mode!r}")
    if S.shape[0] % per_inst:
        raise ValueError("multiplex matrix size must be divisible by 3")
    m = S.shape[0] // per_inst
    members = tuple(range(m)) if members is None else tuple(int(k) for k in members)
    if len(members) != m:
        raise ValueError(f"{len(members)} members given for a structure over {m} institutions")
    n = max(members) + 1 if n is None else n
    eig = power_iterate(S, tol, max_iter)
    eigenmatrix = None
    if mode == "single":
        weights = eig.u
    else:
        eigenmatrix, weights = fold_eigenvector(eig.u, m)
    indexes = np.zeros(n)
    indexes[list(members)] = weights / weights.sum()
    risk, resilience, region = risk_measures(eig.lambda_max, p_min)
    return RiskAssessment(p_min, eig.lambda_max, risk, resilience, region, mode, members,
                          indexes, eig, eigenmatrix)


@dataclass(frozen=True)
class RankEntry:
    index: int
    rank: int
    sii: float


def rank_institutions(assessment: RiskAssessment) -> list[RankEntry]:
    """Rank 1 = largest index; ties by original index; non-core rank 0.

    Returned in original index order.
    """
    core = sorted(assessment.members, key=lambda k: (-assessment.indexes[k], k))
    ranks = {k: r for r, k in enumerate(core, start=1)}
    return [RankEntry(k, ranks.get(k, 0), float(assessment.indexes[k])) for k in range(assessment.n)]

"""Surcharge redistribution, rebalanced structures and the minimum-gamma search.

Each core institution ``i`` pays ``gamma * SII_i * C_i^modified``; the
amount is handed to the institutions it impacts in proportion to that
impact. A recipient's modified capital grows accordingly, which divides the
column of impacts it receives.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectral import DEFAULT_MAX_ITER, DEFAULT_TOL, power_iterate, risk_measures
from .tensor import L, MultiplexImpactTensor, unfold

logger = logging.getLogger(__name__)

GAMMA_MAX = 0.5
SEARCH_TOL = 1e-6
SCAN_POINTS = 8


class StabilisationError(ValueError):
    pass


class InconsistentInputsError(StabilisationError):
    pass


class UnachievableTargetError(StabilisationError):
    def __init__(self, message: str, lambda_at_max: float, lambda_target: float):
        self.lambda_at_max = lambda_at_max
        self.lambda_target = lambda_target
        super().__init__(message)


class NonMonotoneError(StabilisationError):
    def __init__(self, message: str, gammas, lambdas):
        self.gammas = list(gammas)
        self.lambdas = list(lambdas)
        super().__init__(message)


class NonPositiveFactorError(StabilisationError):
    def __init__(self, message: str, positions):
        self.positions = list(positions)
        super().__init__(message)


def _check_gamma(gamma: float, name: str = "gamma"):
    if not 0 <= gamma < GAMMA_MAX:
        raise StabilisationError(f"{name} must lie in [0, {GAMMA_MAX}), got {gamma}")


def compute_surcharges(indexes, modified_funds, gamma: float) -> np.ndarray:
    """``gamma * SII_i * C_i^modified`` (zero wherever the index is zero)."""
    _check_gamma(gamma)
    indexes = np.asarray(indexes, dtype=float)
    modified_funds = np.asarray(modified_funds, dtype=float)
    if indexes.shape != modified_funds.shape:
        raise StabilisationError("indexes and modified funds must be aligned")
    if np.any(indexes < 0):
        raise StabilisationError("indexes must be non-negative")
    return gamma * indexes * modified_funds


def blend_indexes(sii_nac, sii_ead, weight_nac: float = 0.5) -> np.ndarray:
    """Convex combination of going-concern and at-default indexes."""
    if not 0 <= weight_nac <= 1:
        raise StabilisationError("blend weight must lie in [0, 1]")
    return weight_nac * np.asarray(sii_nac, dtype=float) + (1 - weight_nac) * np.asarray(sii_ead, dtype=float)


def distribute(surcharges, impact) -> np.ndarray:
    """``X[i, j] = surcharge_i * W[i, j] / sum_q W[i, q]``."""
    W = np.asarray(impact, dtype=float)
    surcharges = np.asarray(surcharges, dtype=float)
    out_total = W.sum(axis=1)
    stranded = (surcharges > 0) & (out_total <= 0)
    if np.any(stranded):
        raise InconsistentInputsError(
            f"positions {np.flatnonzero(stranded).tolist()} carry a surcharge but impact nobody")
    share = np.divide(W, out_total[:, None], out=np.zeros_like(W), where=out_total[:, None] > 0)
    return surcharges[:, None] * share


def column_factors(X, modified_funds, p_min: float, deduction=None) -> np.ndarray:
    """``1 + (sum_i X[i, j] - Q_j) / (p_min * C_j^modified)``."""
    received = np.asarray(X, dtype=float).sum(axis=0)
    if deduction is not None:
        received = received - np.asarray(deduction, dtype=float)
    return 1.0 + received / (p_min * np.asarray(modified_funds, dtype=float))


def rebalance_single(S_connected, indexes, modified_funds, p_min: float, gamma: float,
                     return_distribution: bool = False):
    """Rebalanced single-layer matrix; ``indexes`` and ``modified_funds``
    are aligned with the rows of ``S_connected``."""
    S = np.asarray(S_connected, dtype=float)
    surcharges = compute_surcharges(indexes, modified_funds, gamma)
    if gamma == 0:
        out = S.copy()
        X = np.zeros_like(S)
    else:
        X = distribute(surcharges, S)
        out = S / column_factors(X, modified_funds, p_min)[None, :]
    if return_distribution:
        return out, X, surcharges
    return out


def _scale_tensor(tensor: MultiplexImpactTensor, factors) -> MultiplexImpactTensor:
    # every block column of target j, whatever the target layer, shares one factor
    f = np.asarray(factors, dtype=float)
    return MultiplexImpactTensor(
        tuple(w / f[None, :] for w in tensor.within),
        tuple(c / f for c in tensor.coupling),
        tensor.members,
        tensor.p_min,
    )


def rebalance_multiplex(tensor: MultiplexImpactTensor, indexes, modified_funds, p_min: float,
                        gamma: float, return_distribution: bool = False):
    """Rebalanced multiplex; shares use impact summed over all layer pairs."""
    surcharges = compute_surcharges(indexes, modified_funds, gamma)
    if gamma == 0:
        out, X = tensor, np.zeros((tensor.m, tensor.m))
    else:
        X = distribute(surcharges, tensor.total_impact())
        out = _scale_tensor(tensor, column_factors(X, modified_funds, p_min))
    if return_distribution:
        return out, X, surcharges
    return out


def rebalance_with_deduction(tensor: MultiplexImpactTensor, indexes, modified_funds, p_min: float,
                             gamma: float, gamma_q: float, return_distribution: bool = False):
    """As ``rebalance_multiplex`` but each recipient's funds also drop by its
    own charge ``Q_j = gamma_q * SII_j * C_j^modified``."""
    _check_gamma(gamma_q, "gamma_q")
    surcharges = compute_surcharges(indexes, modified_funds, gamma)
    Q = compute_surcharges(indexes, modified_funds, gamma_q)
    X = distribute(surcharges, tensor.total_impact()) if gamma > 0 else np.zeros((tensor.m, tensor.m))
    factors = column_factors(X, modified_funds, p_min, Q)
    bad = np.flatnonzero(factors <= 0)
    if bad.size:
        raise NonPositiveFactorError(
            f"deduction exhausts the headroom of positions {bad.tolist()}", bad)
    out = _scale_tensor(tensor, factors)
    if return_distribution:
        return out, X, surcharges
    return out


@dataclass(frozen=True)
class Target:
    """``risk`` target: risk <= value. ``resilience`` target: resilience >= value."""

    kind: str = "risk"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("risk", "resilience"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.value < 0:
            raise ValueError("target value must be non-negative")

    def lambda_bound(self, p_min: float) -> float:
        return p_min + self.value if self.kind == "risk" else p_min - self.value

    def met(self, lambda_max: float, p_min: float) -> bool:
        risk, resilience, _ = risk_measures(lambda_max, p_min)
        return risk <= self.value if self.kind == "risk" else resilience >= self.value


@dataclass(frozen=True)
class StabilisationPlan:
    gamma: float
    surcharges: np.ndarray
    distribution: np.ndarray
    compensations: np.ndarray
    structure: object
    lambda_original: float
    lambda_rebalanced: float
    risk: float
    resilience: float
    p_min: float
    target: Target
    members: tuple[int, ...]
    evaluations: int = 0

    @property
    def net_position(self) -> np.ndarray:
        return self.compensations - self.surcharges


def _as_matrix(structure) -> np.ndarray:
    return unfold(structure) if isinstance(structure, MultiplexImpactTensor) else np.asarray(structure)


def spectral_radius(structure, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    mat = _as_matrix(structure)
    if not np.any(mat):
        return 0.0
    return power_iterate(mat, tol, max_iter).lambda_max


def _rebalance(structure, indexes, modified_funds, p_min, gamma, return_distribution=False):
    if isinstance(structure, MultiplexImpactTensor):
        return rebalance_multiplex(structure, indexes, modified_funds, p_min, gamma, return_distribution)
    return rebalance_single(structure, indexes, modified_funds, p_min, gamma, return_distribution)


def optimize_gamma(structure, indexes, modified_funds, p_min: float, target: Target | None = None,
                   tol: float = SEARCH_TOL, members: Sequence[int] | None = None,
                   lambda_original: float | None = None,
                   power_tol: float = DEFAULT_TOL) -> StabilisationPlan:
    """Smallest gamma (to ``tol``) whose rebalanced structure meets ``target``.

    ``structure`` is a connected single-layer matrix or a connected
    multiplex tensor; ``indexes`` and ``modified_funds`` are aligned with its
    institutions and stay fixed throughout the search.
    """
    target = target or Target()
    if tol <= 0:
        raise ValueError("search tol must be positive")
    m = structure.m if isinstance(structure, MultiplexImpactTensor) else np.asarray(structure).shape[0]
    members = tuple(range(m)) if members is None else tuple(members)
    bound = target.lambda_bound(p_min)
    evals = 0

    def lam(g):
        nonlocal evals
        evals += 1
        return spectral_radius(_rebalance(structure, indexes, modified_funds, p_min, g), power_tol)

    lam0 = lam(0.0) if lambda_original is None else lambda_original
    if lam0 <= bound:
        gamma = 0.0
    else:
        hi = np.nextafter(GAMMA_MAX, 0.0)
        grid = np.geomspace(hi * 1e-4, hi, SCAN_POINTS)
        lams = [lam(g) for g in grid]
        seq = [lam0] + lams
        if any(b > a * (1 + 1e-12) + 1e-15 for a, b in zip(seq, seq[1:])):
            raise NonMonotoneError("largest eigenvalue is not decreasing in gamma over the scan",
                                   [0.0, *grid], seq)
        if lams[-1] > bound:
            raise UnachievableTargetError(
                f"target lambda <= {bound:.6g} not reached at gamma = {hi:.6g} "
                f"(lambda = {lams[-1]:.6g})", lams[-1], bound)
        # tighten the bracket using the scan
        lo = 0.0
        for g, lv in zip(grid, lams):
            if lv > bound:
                lo = g
            else:
                hi = g
                break
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if lam(mid) <= bound:
                hi = mid
            else:
                lo = mid
        gamma = float(hi)
    rebalanced, X, surcharges = _rebalance(structure, indexes, modified_funds, p_min, gamma, True)
    lam_reb = lam0 if gamma == 0 else spectral_radius(rebalanced, power_tol)
    risk, resilience, _ = risk_measures(lam_reb, p_min)
    return StabilisationPlan(gamma, surcharges, X, X.sum(axis=0), rebalanced, lam0, lam_reb,
                             risk, resilience, p_min, target, members, evals)

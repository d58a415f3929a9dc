"""End-to-end analysis of a portfolio: core extraction, assessment, stabilisation.

Two passes are made. The first builds the structure over every institution
to find the strongly connected core; the second rebuilds it over the core
with ``p_min`` (and hence modified capital) evaluated on the core alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connectivity import SccResult, multiplex_core, tarjan_scc
from .impact import ModifiedCapital, build_layer, compute_modified_capital
from .portfolio import Portfolio
from .spectral import DEFAULT_MAX_ITER, DEFAULT_TOL, RiskAssessment, assess
from .stabilisation import SEARCH_TOL, StabilisationPlan, Target, optimize_gamma
from .tensor import MultiplexImpactTensor, build_multiplex, unfold

MODES = ("single", "multiplex", "multiplex-without-couplings")
SINGLE_SCENARIOS = {("D", "EAD"): "EAD", ("D", "NAC"): "NAC",
                    ("FI", "MtM_gross"): "FI", ("SF", "Notional_gross"): "SF"}


class EmptyStructureError(ValueError):
    pass


@dataclass(frozen=True)
class Analysis:
    mode: str
    scenario: str
    ids: tuple[str, ...]
    full_structure: np.ndarray
    scc: SccResult
    core: tuple[int, ...]
    modcap: ModifiedCapital
    structure: object
    assessment: RiskAssessment

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def m(self) -> int:
        return len(self.core)

    @property
    def p_min(self) -> float:
        return self.modcap.p_min

    @property
    def matrix(self) -> np.ndarray:
        """Connected structure as a matrix (unfolded for the multiplex)."""
        if isinstance(self.structure, MultiplexImpactTensor):
            return unfold(self.structure)
        return self.structure

    @property
    def core_indexes(self) -> np.ndarray:
        return self.assessment.indexes[list(self.core)]


def scenario_for(layer: str, basis: str) -> str:
    try:
        return SINGLE_SCENARIOS[(layer, basis)]
    except KeyError:
        raise ValueError(f"invalid layer/basis combination {layer}/{basis}") from None


def analyze_single(portfolio: Portfolio, scenario: str = "EAD", capital_basis: str | None = None,
                   tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> Analysis:
    everyone = compute_modified_capital(portfolio)
    full = build_layer(portfolio, scenario, everyone, capital_basis).matrix
    scc = tarjan_scc(full)
    core = scc.core_members
    modcap = compute_modified_capital(portfolio, core)
    S = build_layer(portfolio, scenario, modcap, capital_basis).matrix
    if not np.any(S):
        raise EmptyStructureError(f"{scenario} layer has no strongly connected structure")
    a = assess(S, modcap.p_min, "single", core, portfolio.n, tol, max_iter)
    return Analysis("single", scenario, tuple(portfolio.ids), full, scc, core, modcap, S, a)


def _multiplex_layers(portfolio, modcap, capital_basis, d_basis):
    return (build_layer(portfolio, "FI", modcap, capital_basis),
            build_layer(portfolio, "SF", modcap, capital_basis),
            build_layer(portfolio, d_basis, modcap))


def analyze_multiplex(portfolio: Portfolio, couplings: bool = True, capital_basis: str = "modified",
                      d_basis: str = "EAD", tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> Analysis:
    everyone = compute_modified_capital(portfolio)
    full_tensor = build_multiplex(*_multiplex_layers(portfolio, everyone, capital_basis, d_basis),
                                  couplings=couplings)
    full = unfold(full_tensor)
    scc, core = multiplex_core(full, portfolio.n)
    modcap = compute_modified_capital(portfolio, core)
    tensor = build_multiplex(*_multiplex_layers(portfolio, modcap, capital_basis, d_basis),
                             couplings=couplings)
    U = unfold(tensor)
    if not np.any(U):
        raise EmptyStructureError("multiplex has no strongly connected structure")
    a = assess(U, modcap.p_min, "multiplex", core, portfolio.n, tol, max_iter)
    mode = "multiplex" if couplings else "multiplex-without-couplings"
    return Analysis(mode, f"multiplex/{d_basis}", tuple(portfolio.ids), full, scc, core, modcap,
                    tensor, a)


def analyze(portfolio: Portfolio, mode: str = "multiplex", layer: str = "D", basis: str = "EAD",
            capital_basis: str | None = None, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER) -> Analysis:
    if mode == "single":
        return analyze_single(portfolio, scenario_for(layer, basis), capital_basis, tol, max_iter)
    if mode in ("multiplex", "multiplex-without-couplings"):
        return analyze_multiplex(portfolio, mode == "multiplex", capital_basis or "modified",
                                 basis if layer == "D" else "EAD", tol, max_iter)
    raise ValueError(f"unknown mode {mode!r}")


def stabilise(analysis: Analysis, target: Target | None = None, tol: float = SEARCH_TOL,
              indexes=None) -> StabilisationPlan:
    """Minimum-gamma plan on the connected structure of ``analysis``.

    ``indexes`` overrides the core-aligned surcharge weights (e.g. blended
    going-concern/at-default indexes).
    """
    weights = analysis.core_indexes if indexes is None else np.asarray(indexes, dtype=float)
    return optimize_gamma(analysis.structure, weights, analysis.modcap.modified_funds,
                          analysis.p_min, target, tol, analysis.core,
                          lambda_original=analysis.assessment.lambda_max)

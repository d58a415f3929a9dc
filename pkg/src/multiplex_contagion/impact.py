"""Modified-capital context and single-layer impact matrices.

Orientation used throughout the package: ``S[i, j]`` is the impact of
institution ``i`` on institution ``j``. A survivor ``i`` therefore tests
``S[failed, i].sum()`` against the default threshold.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .portfolio import Portfolio

SCENARIOS = ("EAD", "NAC", "FI", "SF")
GROSS_BASIS = {"FI": "MtM_gross", "SF": "Notional_gross"}


class CapitalContextError(ValueError):
    pass


@dataclass(frozen=True)
class ModifiedCapital:
    """Per-member capital rescaled so every member defaults at ``p_min``.

    Arrays are aligned with ``members`` (original portfolio indices).
    """

    p_min: float
    members: tuple[int, ...]
    p: np.ndarray
    alpha: np.ndarray
    own_funds: np.ndarray
    available_funds: np.ndarray
    modified_funds: np.ndarray

    def __post_init__(self):
        for name in ("p", "alpha", "own_funds", "available_funds", "modified_funds"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return len(self.members)

    def position(self, index: int) -> int:
        return self.members.index(index)

    def funds_for(self, members: Sequence[int]) -> np.ndarray:
        """Modified funds for ``members`` in the given order."""
        lookup = dict(zip(self.members, self.modified_funds))
        try:
            return np.array([lookup[k] for k in members], dtype=float)
        except KeyError as exc:
            raise CapitalContextError(f"no capital context for institution index {exc.args[0]}") from None


def compute_modified_capital(portfolio: Portfolio, members: Sequence[int] | None = None) -> ModifiedCapital:
    if members is None:
        members = range(portfolio.n)
    members = tuple(int(k) for k in members)
    if not members:
        raise CapitalContextError("member set is empty")
    insts = [portfolio.institutions[k] for k in members]
    own = np.array([float(i.own_funds) for i in insts])
    avail = np.array([float(i.available_funds) for i in insts])
    p = avail / own
    p_min = float(p.min())
    alpha = p / p_min
    # C_mod = alpha * C, equivalently A / p_min
    return ModifiedCapital(p_min, members, p, alpha, own, avail, alpha * own)


@dataclass(frozen=True)
class LayerImpactMatrix:
    scenario: str
    matrix: np.ndarray
    members: tuple[int, ...]
    capital_basis: str
    p_min: float | None = None

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] != len(self.members):
            raise ValueError("impact matrix must be square and match its member list")
        if not np.all(np.isfinite(mat)) or np.any(mat < 0):
            raise ValueError("impact entries must be finite and non-negative")
        if np.any(np.diag(mat) != 0):
            raise ValueError("impact matrix must have a zero diagonal")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "members", tuple(int(k) for k in self.members))

    @property
    def size(self) -> int:
        return len(self.members)


def _exposure_matrix(portfolio: Portfolio, layer: str, basis: str, members: Sequence[int]) -> np.ndarray:
    """Dense ``X[reporter, counterparty]`` over ``members``; others dropped."""
    pos = {k: a for a, k in enumerate(members)}
    X = np.zeros((len(members), len(members)))
    for (rep, cpty), amount in portfolio.table(layer, basis).entries.items():
        r = pos.get(portfolio.index_of(rep))
        c = pos.get(portfolio.index_of(cpty))
        if r is None or c is None:
            continue
        X[r, c] = float(amount)
    return X


def build_derivatives_impact(portfolio: Portfolio, modcap: ModifiedCapital, basis: str = "EAD",
                             members: Sequence[int] | None = None) -> LayerImpactMatrix:
    """``s_ij = X_ji / C_j^modified`` from the EAD or NAC table."""
    if basis not in ("EAD", "NAC"):
        raise ValueError(f"derivatives basis must be EAD or NAC, not {basis!r}")
    members = modcap.members if members is None else tuple(members)
    cmod = modcap.funds_for(members)
    X = _exposure_matrix(portfolio, "D", basis, members)
    # X[j, i] is j's exposure to i; divide row j by C_j, then transpose
    S = (X / cmod[:, None]).T.copy()
    np.fill_diagonal(S, 0.0)
    return LayerImpactMatrix(basis, S, members, "modified", modcap.p_min)


def build_netted_gross_impact(portfolio: Portfolio, layer: str, capital_basis: str = "raw",
                              modcap: ModifiedCapital | None = None,
                              members: Sequence[int] | None = None) -> LayerImpactMatrix:
    """``s_ij = max(0, G_ji - G_ij) / C_j`` from a gross FI or SF table."""
    if layer not in GROSS_BASIS:
        raise ValueError(f"netted gross impact is defined for FI and SF, not {layer!r}")
    if capital_basis not in ("raw", "modified"):
        raise ValueError(f"unknown capital basis {capital_basis!r}")
    if members is None:
        members = modcap.members if modcap is not None else tuple(range(portfolio.n))
    members = tuple(members)
    if capital_basis == "modified":
        if modcap is None:
            raise CapitalContextError("modified capital basis needs a ModifiedCapital context")
        cap = modcap.funds_for(members)
    else:
        cap = np.array([float(portfolio.institutions[k].own_funds) for k in members])
    G = _exposure_matrix(portfolio, layer, GROSS_BASIS[layer], members)
    net = np.maximum(G - G.T, 0.0)  # net[j, i] = max(0, G_ji - G_ij)
    S = (net / cap[:, None]).T.copy()
    np.fill_diagonal(S, 0.0)
    return LayerImpactMatrix(layer, S, members, capital_basis,
                             modcap.p_min if modcap is not None else None)


def build_layer(portfolio: Portfolio, scenario: str, modcap: ModifiedCapital,
                capital_basis: str | None = None,
                members: Sequence[int] | None = None) -> LayerImpactMatrix:
    """Dispatch on scenario; FI/SF default to raw capital as printed."""
    if scenario in ("EAD", "NAC"):
        if capital_basis not in (None, "modified"):
            raise ValueError("derivatives impact always uses modified capital")
        return build_derivatives_impact(portfolio, modcap, scenario, members)
    if scenario in GROSS_BASIS:
        return build_netted_gross_impact(portfolio, scenario, capital_basis or "raw", modcap, members)
    raise ValueError(f"unknown scenario {scenario!r}")

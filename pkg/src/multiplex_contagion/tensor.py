"""Rank-4 multiplex impact structure over three market layers.

Stored block-sparse: one within-layer matrix per layer plus one coupling
diagonal per source layer. ``S[i, j, l, k]`` is the impact of ``i`` acting
in layer ``l`` on ``j`` acting in layer ``k``. The unfolded view places
block ``(l, k)`` at rows ``l*m:(l+1)*m`` and columns ``k*m:(k+1)*m``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .impact import LayerImpactMatrix

LAYER_ORDER = ("FI", "SF", "D")
L = len(LAYER_ORDER)


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def interlayer_coupling(source) -> np.ndarray:
    """Diagonal coupling from a source layer: total impact received by each
    institution in that layer (column sums)."""
    mat = source.matrix if isinstance(source, LayerImpactMatrix) else np.asarray(source, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("source layer matrix must be square")
    return np.diag(mat.sum(axis=0))


@dataclass(frozen=True)
class MultiplexImpactTensor:
    within: tuple[np.ndarray, np.ndarray, np.ndarray]
    coupling: tuple[np.ndarray, np.ndarray, np.ndarray]
    members: tuple[int, ...]
    p_min: float | None = None

    def __post_init__(self):
        within = tuple(_frozen(w) for w in self.within)
        coupling = tuple(_frozen(c) for c in self.coupling)
        if len(within) != L or len(coupling) != L:
            raise ValueError("exactly three layers are required")
        m = len(self.members)
        for w in within:
            if w.shape != (m, m):
                raise ValueError(f"within-layer block has shape {w.shape}, expected {(m, m)}")
            if np.any(np.diag(w) != 0):
                raise ValueError("within-layer blocks must have a zero diagonal")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("tensor entries must be finite and non-negative")
        for c in coupling:
            if c.shape != (m,):
                raise ValueError("coupling diagonals must have one entry per institution")
            if np.any(c < 0) or not np.all(np.isfinite(c)):
                raise ValueError("tensor entries must be finite and non-negative")
        object.__setattr__(self, "within", within)
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "members", tuple(int(k) for k in self.members))

    @property
    def m(self) -> int:
        return len(self.members)

    def entry(self, i: int, j: int, l: int, k: int) -> float:
        if l == k:
            return float(self.within[l][i, j])
        return float(self.coupling[l][i]) if i == j else 0.0

    def dense(self) -> np.ndarray:
        """Full ``(m, m, 3, 3)`` array."""
        m = self.m
        T = np.zeros((m, m, L, L))
        for l in range(L):
            T[:, :, l, l] = self.within[l]
            for k in range(L):
                if k != l:
                    T[np.arange(m), np.arange(m), l, k] = self.coupling[l]
        return T

    def without_couplings(self) -> MultiplexImpactTensor:
        return MultiplexImpactTensor(self.within, tuple(np.zeros(self.m) for _ in range(L)),
                                     self.members, self.p_min)

    def restrict(self, positions: Sequence[int]) -> MultiplexImpactTensor:
        """Sub-tensor over the given positions, entries preserved."""
        idx = np.asarray(positions, dtype=int)
        return MultiplexImpactTensor(
            tuple(w[np.ix_(idx, idx)] for w in self.within),
            tuple(c[idx] for c in self.coupling),
            tuple(self.members[a] for a in idx),
            self.p_min,
        )

    def total_impact(self) -> np.ndarray:
        """``W[i, j]``: impact of i on j summed over all layer pairs."""
        W = sum(self.within)
        W = np.array(W, dtype=float)
        W[np.diag_indices(self.m)] += (L - 1) * sum(self.coupling)
        return W


def build_multiplex(fi: LayerImpactMatrix, sf: LayerImpactMatrix, d: LayerImpactMatrix,
                    couplings: bool = True) -> MultiplexImpactTensor:
    layers = (fi, sf, d)
    members = fi.members
    for lay in layers:
        if lay.members != members:
            raise ValueError("layers must share the same institution index set")
    within = tuple(lay.matrix for lay in layers)
    if couplings:
        coupling = tuple(lay.matrix.sum(axis=0) for lay in layers)
    else:
        coupling = tuple(np.zeros(len(members)) for _ in layers)
    p_mins = {lay.p_min for lay in layers if lay.p_min is not None}
    return MultiplexImpactTensor(within, coupling, members, p_mins.pop() if len(p_mins) == 1 else None)


def unfold(tensor: MultiplexImpactTensor) -> np.ndarray:
    m = tensor.m
    U = np.zeros((L * m, L * m))
    for l in range(L):
        for k in range(L):
            block = tensor.within[l] if l == k else np.diag(tensor.coupling[l])
            U[l * m:(l + 1) * m, k * m:(k + 1) * m] = block
    return U


def fold(unfolded, members: Sequence[int] | None = None, p_min: float | None = None,
         check: bool = True) -> MultiplexImpactTensor:
    """Inverse of ``unfold``. Rejects matrices outside the multiplex zero
    pattern, or with unequal coupling diagonals per source layer, when
    ``check`` is set."""
    U = np.asarray(unfolded, dtype=float)
    if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] % L:
        raise ValueError("unfolded matrix must be square with size divisible by 3")
    m = U.shape[0] // L
    members = tuple(range(m)) if members is None else tuple(members)
    block = lambda l, k: U[l * m:(l + 1) * m, k * m:(k + 1) * m]
    within = tuple(block(l, l).copy() for l in range(L))
    coupling = []
    for l in range(L):
        others = [k for k in range(L) if k != l]
        diag = np.diag(block(l, others[0])).copy()
        if check:
            for k in others:
                b = block(l, k)
                if np.any(b - np.diag(np.diag(b)) != 0):
                    raise ValueError(f"interlayer block ({l}, {k}) is not diagonal")
                if not np.array_equal(np.diag(b), diag):
                    raise ValueError(f"coupling diagonals of source layer {l} differ")
        coupling.append(diag)
    return MultiplexImpactTensor(within, tuple(coupling), members, p_min)


def fold_eigenvector(v, m: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Fold a length-3m vector into an (m, 3) eigenmatrix and its row sums."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size % L or (m is not None and v.size != L * m):
        raise ValueError(f"vector length {v.size} does not fit a 3 x m block layout")
    m = v.size // L
    U = v.reshape(L, m).T.copy()
    return U, U @ np.ones(L)

"""Strongly connected components of the positive-entry digraph."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SccResult:
    membership: tuple[int, ...]
    components: tuple[tuple[int, ...], ...]
    core_component: int
    core_members: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.membership)

    @property
    def submatrix_map(self) -> dict[int, int]:
        """Core position -> original index."""
        return dict(enumerate(self.core_members))


def _successors(matrix: np.ndarray) -> list[list[int]]:
    return [list(np.flatnonzero(row > 0)) for row in matrix]


def tarjan_components(succ: Sequence[Sequence[int]]) -> list[list[int]]:
    """Tarjan's algorithm without recursion; components in emission order."""
    n = len(succ)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            nbrs = succ[v]
            while pos < len(nbrs):
                w = nbrs[pos]
                pos += 1
                if index[w] == -1:
                    work.append((v, pos))
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return out


def tarjan_scc(matrix) -> SccResult:
    """Components of the digraph with edge i->j iff ``matrix[i, j] > 0``.

    The core is the largest component; ties go to the one holding the
    lowest original index.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix entries must be finite")
    n = matrix.shape[0]
    if n == 0:
        raise ValueError("matrix must be non-empty")
    comps = tarjan_components(_successors(matrix))
    membership = [0] * n
    for cid, comp in enumerate(comps):
        for v in comp:
            membership[v] = cid
    core = min(range(len(comps)), key=lambda c: (-len(comps[c]), comps[c][0]))
    return SccResult(tuple(membership), tuple(tuple(c) for c in comps), core, tuple(comps[core]))


def extract_connected(matrix, scc: SccResult) -> tuple[np.ndarray, tuple[int, ...]]:
    """Restrict to core rows and columns; returns the submatrix and the
    original index of each of its positions."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (scc.n, scc.n):
        raise ValueError(f"matrix shape {matrix.shape} does not match SCC size {scc.n}")
    idx = np.array(scc.core_members, dtype=int)
    return matrix[np.ix_(idx, idx)].copy(), scc.core_members


def multiplex_core(unfolded, m: int, layers: int = 3) -> tuple[SccResult, tuple[int, ...]]:
    """SCC on an unfolded ``(layers*m)``-square matrix, lifted to institutions.

    An institution is a core member when any of its layer instances lies in
    the core component.
    """
    unfolded = np.asarray(unfolded, dtype=float)
    if unfolded.shape != (layers * m, layers * m):
        raise ValueError(f"unfolded matrix must be {layers * m} square")
    scc = tarjan_scc(unfolded)
    insts = sorted({v % m for v in scc.core_members})
    return scc, tuple(insts)


def is_irreducible(matrix) -> bool:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape[0] == 1:
        return True
    return len(tarjan_components(_successors(matrix))) == 1


def to_dot(matrix, labels: Sequence[str], scc: SccResult | None = None, name: str = "impact") -> str:
    """Graphviz text of the positive pattern; core nodes filled."""
    matrix = np.asarray(matrix, dtype=float)
    scc = scc or tarjan_scc(matrix)
    palette = ["lightblue", "lightgrey", "khaki", "palegreen", "pink", "lavender", "wheat"]
    lines = [f"digraph {name} {{"]
    for v, label in enumerate(labels):
        cid = scc.membership[v]
        colour = "orange" if cid == scc.core_component else palette[cid % len(palette)]
        lines.append(f'  n{v} [label="{label}", style=filled, fillcolor={colour}, component={cid}];')
    for i, j in zip(*np.nonzero(matrix > 0)):
        lines.append(f'  n{i} -> n{j} [weight="{matrix[i, j]:.6g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"

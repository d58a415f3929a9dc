"""Step-by-step default cascade and its linear approximation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class ContagionTrace:
    seeds: frozenset[int]
    failed_steps: tuple[frozenset[int], ...]
    probabilities: tuple[np.ndarray, ...]
    q_stop: int
    outcome: str
    groups: tuple[int, ...] | None = field(default=None, repr=False)

    @property
    def cumulative(self) -> list[frozenset[int]]:
        out, acc = [], frozenset()
        for beta in self.failed_steps:
            acc = acc | beta
            out.append(acc)
        return out

    @property
    def failed(self) -> frozenset[int]:
        return self.cumulative[-1]

    @property
    def final_probabilities(self) -> np.ndarray:
        return self.probabilities[-1]

    def capped(self, q: int = -1) -> np.ndarray:
        return np.minimum(self.probabilities[q], 1.0)

    def failed_groups(self, q: int | None = None) -> list[list[int]]:
        """Per-step failed sets mapped through ``groups`` (institutions)."""
        steps = self.failed_steps if q is None else self.failed_steps[: q + 1]
        if self.groups is None:
            return [sorted(b) for b in steps]
        return [sorted({self.groups[v] for v in b}) for b in steps]


def _check_p(p_min: float):
    if not 0 < p_min <= 1:
        raise ValueError(f"p_min must lie in (0, 1], got {p_min}")


def simulate_stepwise(matrix, p_min: float, seeds: Iterable[int],
                      initial_probability: Sequence[float] | None = None,
                      groups: Sequence[int] | None = None) -> ContagionTrace:
    """Run the threshold cascade from ``seeds``.

    A survivor ``i`` fails at step ``q`` when the impact it receives from
    every institution failed by ``q-1`` exceeds ``p_min``. Survivor default
    probabilities follow the spreading recursion: at ``q = 1`` only the seed
    impact counts (the tiny initial values are ignored), afterwards
    ``(1 - p_min) * pi + impact received from nodes failed at q-1``.
    Failed nodes transmit once, at the step after they fail.

    ``groups`` maps nodes to institutions; a failing node takes every node
    of its group down with it (multiplex layer instances).
    """
    S = np.asarray(matrix, dtype=float)
    n = S.shape[0]
    _check_p(p_min)
    seeds = frozenset(int(s) for s in seeds)
    if not seeds:
        raise ValueError("seed set must be non-empty")
    if min(seeds) < 0 or max(seeds) >= n:
        raise ValueError("seed index out of range")
    members_of = None
    if groups is not None:
        groups = tuple(int(g) for g in groups)
        if len(groups) != n:
            raise ValueError("groups must assign every node")
        members_of = {}
        for v, g in enumerate(groups):
            members_of.setdefault(g, set()).add(v)
        seeds = frozenset(v for s in seeds for v in members_of[groups[s]])

    pi = np.zeros(n)
    if initial_probability is not None:
        pi[:] = np.asarray(initial_probability, dtype=float)
    survivors = np.ones(n, dtype=bool)
    idx = list(seeds)
    survivors[idx] = False
    pi[idx] = 1.0
    failed_mask = ~survivors
    steps = [seeds]
    probs = [pi.copy()]
    q = 0
    beta = seeds
    while survivors.any() and beta:
        q += 1
        received_total = S[failed_mask].sum(axis=0)
        received_new = S[list(beta)].sum(axis=0)
        new = set(np.flatnonzero(survivors & (received_total > p_min)).tolist())
        if members_of is not None:
            new = {v for s in new for v in members_of[groups[s]]} - set(np.flatnonzero(failed_mask))
        nxt = np.zeros(n)
        if q == 1:
            nxt[survivors] = received_new[survivors]
        else:
            nxt[survivors] = ((1.0 - p_min) * pi + received_new)[survivors]
        beta = frozenset(new)
        if beta:
            nxt[list(beta)] = 1.0
            survivors[list(beta)] = False
            failed_mask = ~survivors
        pi = nxt
        steps.append(beta)
        probs.append(pi.copy())
    outcome = "all_failed" if not survivors.any() else "contained"
    return ContagionTrace(seeds, tuple(steps), tuple(probs), q, outcome,
                          groups if groups is not None else None)


def simulate_multiplex(unfolded, p_min: float, seed_institutions: Iterable[int], m: int,
                       initial_probability: Sequence[float] | None = None) -> ContagionTrace:
    """Cascade on the unfolded ``3m`` structure with institution-level failure."""
    groups = [v % m for v in range(3 * m)]
    seeds = [s for s in seed_institutions]
    if any(s < 0 or s >= m for s in seeds):
        raise ValueError("seed institution out of range")
    return simulate_stepwise(unfolded, p_min, seeds, initial_probability, groups)


def propagate_linear(matrix, p_min: float, pi0, steps: int) -> np.ndarray:
    """``[(1 - p_min) I + S^T]^q pi0`` by repeated application."""
    S = np.asarray(matrix, dtype=float)
    if steps < 0:
        raise ValueError("steps must be non-negative")
    pi = np.array(pi0, dtype=float)
    if np.any(pi < 0):
        raise ValueError("initial probabilities must be non-negative")
    St = S.T
    for _ in range(steps):
        pi = (1.0 - p_min) * pi + St @ pi
    return pi


@dataclass(frozen=True)
class TriggerSummary:
    seeds: tuple[int, ...]
    failures: int
    q_stop: int
    outcome: str
    trace: ContagionTrace


def sweep_triggers(matrix, p_min: float, seed_family="all-singletons",
                   groups: Sequence[int] | None = None) -> list[TriggerSummary]:
    """One cascade per seed set; ``"all-singletons"`` or an explicit list.

    With ``groups`` the singletons are one per group and failure counts are
    group counts.
    """
    S = np.asarray(matrix, dtype=float)
    if isinstance(seed_family, str):
        if seed_family != "all-singletons":
            raise ValueError(f"unknown seed family {seed_family!r}")
        if groups is None:
            family = [(i,) for i in range(S.shape[0])]
        else:
            first = {}
            for v, g in enumerate(groups):
                first.setdefault(g, v)
            family = [(first[g],) for g in sorted(first)]
    else:
        family = [tuple(s) for s in seed_family]
    if not family:
        raise ValueError("seed family must be non-empty")
    out = []
    for seeds in family:
        tr = simulate_stepwise(S, p_min, seeds, groups=groups)
        count = len(tr.failed) if groups is None else len({groups[v] for v in tr.failed})
        out.append(TriggerSummary(tuple(seeds), count, tr.q_stop, tr.outcome, tr))
    return out

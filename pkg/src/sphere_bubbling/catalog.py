"""Critical points at infinity built from I^+ and the Euler-Hopf type criteria."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CombinatorialOverflow

MAX_CATALOG = 10 ** 6


@dataclass(frozen=True)
class InfinityPoint:
    """An unordered tuple of distinct I^+ points with its index and level."""

    members: tuple
    morse_index: int
    critical_level: float

    @property
    def p(self) -> int:
        return len(self.members)

    @property
    def labels(self) -> list:
        return [m.label for m in self.members]

    def to_dict(self) -> dict:
        return {"members": self.labels, "p": self.p, "index": int(self.morse_index),
                "level": float(self.critical_level)}


def morse_index_infinity(members: Sequence, n: int) -> int:
    """p - 1 + sum_j (n - ind(K, y_j)).  ``members`` are records or plain indices."""
    if len(members) == 0:
        raise ValueError("a critical point at infinity has at least one member")
    inds = [m if isinstance(m, (int, np.integer)) else m.index for m in members]
    return len(inds) - 1 + sum(n - int(i) for i in inds)


def critical_level_infinity(members: Sequence, S: float, n: int, gamma: float) -> float:
    """S^{2gamma/n} (sum_j K(y_j)^{-(n-2gamma)/(2gamma)})^{2gamma/n}.

    ``members`` are records (their ``K_value`` is used) or plain K values.
    """
    if len(members) == 0:
        raise ValueError("a critical point at infinity has at least one member")
    Kv = [m if isinstance(m, (float, int, np.floating)) else m.K_value for m in members]
    e = (n - 2.0 * gamma) / (2.0 * gamma)
    inner = math.fsum(float(k) ** (-e) for k in Kv)
    return S ** (2.0 * gamma / n) * inner ** (2.0 * gamma / n)


def enumerate_Finfinity(Iplus: Sequence, n: int, gamma: float, S: float,
                        p_max: int | None = None) -> list:
    """Every unordered subset of I^+ of size 1..p_max as an :class:`InfinityPoint`.

    Sorted by (p, level, labels).

    Raises
    ------
    CombinatorialOverflow
        If no ``p_max`` is given and 2^{|I^+|} exceeds one million.
    """
    m = len(Iplus)
    if p_max is None:
        if 2 ** m > MAX_CATALOG:
            raise CombinatorialOverflow(f"|I^+| = {m} gives 2^{m} subsets; pass p_max")
        p_max = m
    p_max = min(int(p_max), m)
    out = []
    for p in range(1, p_max + 1):
        for combo in itertools.combinations(Iplus, p):
            out.append(InfinityPoint(tuple(combo), morse_index_infinity(combo, n),
                                     critical_level_infinity(combo, S, n, gamma)))
    out.sort(key=lambda x: (x.p, x.critical_level, tuple(x.labels)))
    return out


def check_H1(X: Iterable[InfinityPoint]) -> tuple:
    """(sum of (-1)^index over X, whether the sum differs from 1)."""
    total = sum((-1) ** int(x.morse_index) for x in X)
    return int(total), total != 1


@dataclass
class CriterionReport:
    """Evaluation of the signed-count criterion over the admissible k."""

    n: int
    k_range: list
    excluded: list
    per_k_sums: dict
    k0: int | None
    maximizers: list
    criterion_value: int
    conclusion: str
    index_bound: int | None
    vacuous: bool
    h1: list = field(default_factory=list)

    @property
    def T_description(self) -> str:
        return (f"k in {{0..{self.n + 1}}} minus {{n - ind(K,y) - 1 : y in I^+}} = {self.k_range}; "
                f"sums are constant for k >= n")

    def to_dict(self) -> dict:
        return {"T": self.k_range, "T_excluded": self.excluded, "T_description": self.T_description,
                "per_k_sums": {str(k): int(v) for k, v in self.per_k_sums.items()},
                "k0": self.k0, "maximizers": self.maximizers,
                "criterion_value": int(self.criterion_value), "conclusion": self.conclusion,
                "index_bound": self.index_bound, "vacuous_Iplus": self.vacuous,
                "H2": "assumed", "H1": self.h1}


def _codims(Iplus, n):
    return [n - (m if isinstance(m, (int, np.integer)) else m.index) for m in Iplus]


def theorem12_criterion(Iplus: Sequence, n: int) -> CriterionReport:
    """max over k in T of |1 - sum_{y in I^+, n - ind(y) <= k} (-1)^{n - ind(y)}|.

    ``T`` is the set of k >= 0 with ``n - ind(K, y) != k + 1`` for every y.
    Because ``n - ind`` lies in [0, n], the sums are constant for k >= n and
    the evaluation is truncated to k <= n + 1.  ``k0`` is the smallest
    maximiser; the full maximiser set is reported.
    """
    cod = _codims(Iplus, n)
    excluded = sorted({c - 1 for c in cod if c - 1 >= 0})
    ks = [k for k in range(0, n + 2) if k not in excluded]
    sums = {k: sum((-1) ** c for c in cod if c <= k) for k in ks}
    vals = {k: abs(1 - s) for k, s in sums.items()}
    best = max(vals.values()) if vals else 0
    maxim = [k for k in ks if vals[k] == best]
    if best != 0:
        k0 = maxim[0]
        return CriterionReport(n, ks, excluded, sums, k0, maxim, best, "exists", k0 + 1,
                               len(cod) == 0)
    return CriterionReport(n, ks, excluded, sums, None, maxim, 0, "inconclusive", None,
                           len(cod) == 0)

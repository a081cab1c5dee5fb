"""Two-sample tests used to compare outcomes inside a cluster."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError

EXACT_MAX_GROUP = 10


@dataclass(frozen=True)
class TestResult:
    """Outcome of a hypothesis test.

    ``statistic`` depends on ``method``: the Mann-Whitney U of the first
    sample for ``exact``, the signed z score for ``normal-approx`` and the
    chi-square value for the proportion tests.
    """

    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    method: str

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "method": self.method}


def rankdata(values: Sequence[float]) -> list[float]:
    """1-based ranks, ties get the average of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _tie_sizes(values) -> list[int]:
    counts: dict = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return [c for c in counts.values() if c > 1]


def _u_distribution(n: int, m: int) -> list[int]:
    """Number of rank arrangements giving each U in 0..n*m (no ties).

    Counts subsets of size n drawn from 1..n+m by their rank sum, built one
    element at a time.
    """
    N = n + m
    max_sum = sum(range(m + 1, N + 1))
    # table[k][s]: number of k-subsets of the elements seen so far with sum s;
    # object dtype keeps the counts exact
    table = np.zeros((n + 1, max_sum + 1), dtype=object)
    table[0, 0] = 1
    for x in range(1, N + 1):
        for k in range(min(x, n), 0, -1):
            table[k, x:] += table[k - 1, : max_sum + 1 - x]
    offset = n * (n + 1) // 2
    return [int(c) for c in table[n, offset:offset + n * m + 1]]


def mann_whitney_u(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    ranks = rankdata(list(xs) + list(ys))
    return sum(ranks[:n]) - n * (n + 1) / 2


def wilcoxon_rank_sum(xs: Sequence[float], ys: Sequence[float], method: str = "auto") -> TestResult:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney) test.

    With ``method="auto"`` the test is exact when the smaller group has at
    most 10 values and there are no ties; otherwise a normal approximation
    with tie-corrected variance and a 0.5 continuity correction. ``"exact"``
    and ``"normal"`` force a path (exact refuses tied data).
    """
    if method not in ("auto", "exact", "normal"):
        raise InputError(f"unknown method {method!r}")
    n, m = len(xs), len(ys)
    if n == 0 or m == 0:
        raise InputError("rank-sum test needs two non-empty groups")
    pooled = list(xs) + list(ys)
    u = mann_whitney_u(xs, ys)
    ties = _tie_sizes(pooled)
    if method == "exact" and ties:
        raise InputError("exact rank-sum test needs tie-free data")

    use_exact = method == "exact" or (method == "auto" and min(n, m) <= EXACT_MAX_GROUP and not ties)
    if use_exact:
        counts = _u_distribution(n, m)
        total = sum(counts)
        k = int(round(u))
        le = sum(counts[: k + 1])
        ge = sum(counts[k:])
        return TestResult(float(u), min(total, 2 * min(le, ge)) / total, "exact")

    N = n + m
    mean = n * m / 2
    tie_term = sum(t ** 3 - t for t in ties) / (N * (N - 1))
    var = n * m / 12 * ((N + 1) - tie_term)
    if var <= 0:
        return TestResult(0.0, 1.0, "normal-approx")
    dev = max(abs(u - mean) - 0.5, 0.0)
    z = math.copysign(dev / math.sqrt(var), u - mean) if dev else 0.0
    p = math.erfc(abs(z) / math.sqrt(2))
    return TestResult(z, min(1.0, p), "normal-approx")


def chi2_sf_1df(x: float) -> float:
    """Survival function of the chi-square distribution with one degree of freedom."""
    if x <= 0:
        return 1.0
    return math.erfc(math.sqrt(x / 2))


def two_proportion_test(k1: int, n1: int, k2: int, n2: int, continuity: bool = True) -> TestResult:
    """Chi-square test that two binomial proportions are equal (2x2 table)."""
    for k, n in ((k1, n1), (k2, n2)):
        if n < 1:
            raise InputError("proportion test needs non-empty groups")
        if not 0 <= k <= n:
            raise InputError(f"count {k} outside [0, {n}]")
    a, b, c, d = k1, n1 - k1, k2, n2 - k2
    N = n1 + n2
    denom = (a + b) * (c + d) * (a + c) * (b + d)
    method = "chi-square-yates" if continuity else "chi-square"
    if denom == 0:
        return TestResult(0.0, 1.0, method)
    diff = abs(a * d - b * c)
    if continuity:
        diff = max(diff - N / 2, 0.0)
    chi2 = N * diff ** 2 / denom
    return TestResult(chi2, chi2_sf_1df(chi2), method)

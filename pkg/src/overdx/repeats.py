"""Maximal repeats and the maximal-repeat-alphabet feature space.

A maximal repeat is a contiguous pattern that occurs at least twice and whose
occurrences disagree on both the preceding and the following symbol (string
boundaries and trace delimiters count as unique symbols).  Repeats are found
from a suffix array with its LCP table: every LCP interval is a right-maximal
repeat, and the left-diverse ones are maximal.

Feature classes group the repeats by the set of activities they contain; a
variant's feature value for a class is the number of occurrences of the
class's repeats inside that variant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class MaximalRepeat:
    pattern: tuple
    occurrence_count: int

    @property
    def alphabet(self) -> frozenset:
        return frozenset(self.pattern)


@dataclass(frozen=True)
class FeatureBasis:
    classes: tuple[frozenset, ...]
    class_members: Mapping[frozenset, frozenset[MaximalRepeat]]

    def __len__(self):
        return len(self.classes)

    def pattern_index(self) -> dict[tuple, int]:
        idx = {}
        for i, cls in enumerate(self.classes):
            for rep in self.class_members[cls]:
                idx[rep.pattern] = i
        return idx


def suffix_array(codes: Sequence[int]) -> list[int]:
    """Prefix-doubling suffix array over integer codes."""
    n = len(codes)
    if n == 0:
        return []
    rank = list(codes)
    sa = list(range(n))
    k = 1
    while True:
        key = [(rank[i], rank[i + k] if i + k < n else -1) for i in range(n)]
        sa.sort(key=key.__getitem__)
        new_rank = [0] * n
        for j in range(1, n):
            new_rank[sa[j]] = new_rank[sa[j - 1]] + (key[sa[j]] != key[sa[j - 1]])
        rank = new_rank
        if rank[sa[-1]] == n - 1 or k >= n:
            return sa
        k *= 2


def lcp_array(codes: Sequence[int], sa: Sequence[int]) -> list[int]:
    """Kasai's algorithm; ``lcp[i]`` is the common prefix of ``sa[i-1]`` and ``sa[i]``."""
    n = len(codes)
    rank = [0] * n
    for i, s in enumerate(sa):
        rank[s] = i
    lcp = [0] * n
    h = 0
    for i in range(n):
        r = rank[i]
        if r == 0:
            h = 0
            continue
        j = sa[r - 1]
        while i + h < n and j + h < n and codes[i + h] == codes[j + h]:
            h += 1
        lcp[r] = h
        if h:
            h -= 1
    return lcp


def _repeats_from_codes(codes: Sequence[int], n_symbols: int) -> dict[tuple[int, ...], int]:
    """Maximal repeats of ``codes``; any code >= ``n_symbols`` must be unique."""
    n = len(codes)
    if n < 2:
        return {}
    sa = suffix_array(codes)
    lcp = lcp_array(codes, sa)

    def left_diverse(lb, rb):
        seen = None
        for k in range(lb, rb + 1):
            p = sa[k]
            if p == 0 or codes[p - 1] >= n_symbols:
                return True
            c = codes[p - 1]
            if seen is None:
                seen = c
            elif c != seen:
                return True
        return False

    found: dict[tuple[int, ...], int] = {}
    stack = [(0, 0)]  # (lcp value, left bound)
    for i in range(1, n + 1):
        cur = lcp[i] if i < n else 0
        lb = i - 1
        while cur < stack[-1][0]:
            depth, lb = stack.pop()
            if left_diverse(lb, i - 1):
                start = sa[lb]
                found[tuple(codes[start:start + depth])] = i - lb
        if cur > stack[-1][0]:
            stack.append((cur, lb))
    return found


def _encode(symbols: Iterable[Hashable]) -> tuple[list, dict]:
    distinct = set(symbols)
    try:
        ordered = sorted(distinct)
    except TypeError:
        ordered = sorted(distinct, key=repr)
    return ordered, {s: i for i, s in enumerate(ordered)}


def maximal_repeats(sequence: Sequence[Hashable]) -> set[MaximalRepeat]:
    """All maximal repeats of one sequence, with overlapping occurrence counts."""
    seq = list(sequence)
    ordered, code = _encode(seq)
    found = _repeats_from_codes([code[s] for s in seq], len(ordered))
    return {
        MaximalRepeat(tuple(ordered[c] for c in pat), cnt) for pat, cnt in found.items()
    }


def log_repeats(variants) -> set[MaximalRepeat]:
    """Maximal repeats over the whole log.

    Every trace (each variant repeated ``frequency`` times) is laid out in one
    sequence with a fresh delimiter after it, so no repeat spans two traces.
    """
    variants = list(variants)
    ordered, code = _encode(a for v in variants for a in v.activities)
    n_sym = len(ordered)
    codes: list[int] = []
    delim = n_sym
    for v in variants:
        body = [code[a] for a in v.activities]
        for _ in range(v.frequency):
            codes.extend(body)
            codes.append(delim)
            delim += 1
    found = _repeats_from_codes(codes, n_sym)
    return {
        MaximalRepeat(tuple(ordered[c] for c in pat), cnt) for pat, cnt in found.items()
    }


def _class_key(cls: frozenset):
    return (len(cls), sorted(cls))


def build_basis(repeats: Iterable[MaximalRepeat]) -> FeatureBasis:
    """Group repeats by alphabet; classes ordered by size, then sorted members."""
    members: dict[frozenset, set[MaximalRepeat]] = {}
    for rep in repeats:
        members.setdefault(rep.alphabet, set()).add(rep)
    classes = tuple(sorted(members, key=_class_key))
    return FeatureBasis(classes, {c: frozenset(members[c]) for c in classes})


def count_occurrences(pattern: Sequence, sequence: Sequence) -> int:
    m = len(pattern)
    pattern = tuple(pattern)
    seq = tuple(sequence)
    return sum(1 for i in range(len(seq) - m + 1) if seq[i:i + m] == pattern)


def vectorize(variant, basis: FeatureBasis, normalize: bool = False, _index=None) -> tuple[float, ...]:
    """Per-class occurrence counts of the basis repeats inside ``variant``.

    With ``normalize`` the counts are divided by the variant length.
    """
    index = basis.pattern_index() if _index is None else _index
    acts = tuple(getattr(variant, "activities", variant))
    values = [0] * len(basis.classes)
    if index:
        longest = max(len(p) for p in index)
        n = len(acts)
        for i in range(n):
            for j in range(i + 1, min(n, i + longest) + 1):
                k = index.get(acts[i:j])
                if k is not None:
                    values[k] += 1
    if normalize and acts:
        return tuple(v / len(acts) for v in values)
    return tuple(float(v) for v in values)


def vector_matrix(variants, basis: FeatureBasis, normalize: bool = False) -> np.ndarray:
    index = basis.pattern_index()
    rows = [vectorize(v, basis, normalize, _index=index) for v in variants]
    return np.array(rows, dtype=float).reshape(len(rows), len(basis.classes))


def euclidean(u: Sequence[float], v: Sequence[float]) -> float:
    if len(u) != len(v):
        raise DimensionError(f"vector lengths differ: {len(u)} != {len(v)}")
    return math.dist(u, v)


def write_basis_csv(basis: FeatureBasis, writer: IO[str]) -> None:
    out = csv.writer(writer, lineterminator="\n")
    out.writerow(["class", "alphabet", "pattern", "occurrences"])
    for i, cls in enumerate(basis.classes):
        for rep in sorted(basis.class_members[cls], key=lambda r: r.pattern):
            out.writerow([i, ";".join(sorted(cls)), ";".join(rep.pattern), rep.occurrence_count])


def write_vectors_csv(variants, matrix: np.ndarray, writer: IO[str]) -> None:
    out = csv.writer(writer, lineterminator="\n")
    out.writerow(["variant", "frequency"] + [f"c{i}" for i in range(matrix.shape[1])])
    for i, (v, row) in enumerate(zip(variants, matrix), 1):
        out.writerow([i, v.frequency] + [f"{x:g}" for x in row])

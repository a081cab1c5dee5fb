import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overdx.errors import DimensionError
from overdx.repeats import (
    MaximalRepeat,
    build_basis,
    count_occurrences,
    euclidean,
    log_repeats,
    maximal_repeats,
    vector_matrix,
    vectorize,
    write_basis_csv,
)

from conftest import make_variant
from oracles import Delim, brute_repeats

def as_dict(repeats):
    return {r.pattern: r.occurrence_count for r in repeats}


def test_examples():
    assert as_dict(maximal_repeats("abcabc")) == {("a", "b", "c"): 2}
    assert as_dict(maximal_repeats("aa")) == {("a",): 2}
    assert maximal_repeats("abcd") == set()


def test_overlapping_occurrences_counted():
    assert as_dict(maximal_repeats("aaa")) == {("a",): 3, ("a", "a"): 2}


def test_against_brute_force():
    rng = random.Random(1)
    for _ in range(500):
        k = rng.randint(1, 5)
        seq = [rng.choice("abcde"[:k]) for _ in range(rng.randint(0, 12))]
        assert as_dict(maximal_repeats(seq)) == brute_repeats(seq)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from("abcd"), max_size=14))
def test_brute_force_property(seq):
    assert as_dict(maximal_repeats(seq)) == brute_repeats(seq)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.text("abc", min_size=1, max_size=5), st.integers(1, 3)), max_size=5))
def test_log_repeats_match_delimited_oracle(pairs):
    vs = [make_variant(s, f) for s, f in pairs]
    seq = []
    for v in vs:
        for _ in range(v.frequency):
            seq.extend(v.activities)
            seq.append(Delim())
    assert as_dict(log_repeats(vs)) == brute_repeats(seq)


def test_log_repeats_examples():
    assert as_dict(log_repeats([make_variant("abc", 2)])) == {("a", "b", "c"): 2}
    assert log_repeats([make_variant("abcd")]) == set()
    assert log_repeats([make_variant("abc"), make_variant("xyz")]) == set()


def test_repeats_are_maximal():
    rng = random.Random(7)
    for _ in range(200):
        seq = [rng.choice("abc") for _ in range(rng.randint(2, 12))]
        for r in maximal_repeats(seq):
            starts = [i for i in range(len(seq)) if tuple(seq[i:i + len(r.pattern)]) == r.pattern]
            assert len(starts) == r.occurrence_count >= 2
            for shift in (-1, len(r.pattern)):
                ext = {seq[i + shift] if 0 <= i + shift < len(seq) else None for i in starts}
                assert len(ext) > 1 or None in ext


def test_basis_classes():
    b = build_basis([MaximalRepeat(("a", "b"), 2), MaximalRepeat(("b", "a"), 2)])
    assert b.classes == (frozenset("ab"),)
    assert len(b.class_members[frozenset("ab")]) == 2
    b = build_basis([MaximalRepeat(("a", "b", "c"), 2), MaximalRepeat(("a",), 3)])
    assert b.classes == (frozenset("a"), frozenset("abc"))
    assert build_basis([]).classes == ()


def test_vectorize_examples():
    basis = build_basis([MaximalRepeat(("a", "b", "c"), 2)])
    assert vectorize(make_variant("abcabc"), basis) == (2.0,)
    assert vectorize(make_variant("xyz"), basis) == (0.0,)
    assert vectorize(make_variant("abc"), build_basis([])) == ()


def scan_count(pattern, seq):
    return sum(tuple(seq[i:i + len(pattern)]) == tuple(pattern) for i in range(len(seq)))


def test_count_occurrences_matches_scan():
    rng = random.Random(5)
    for _ in range(300):
        seq = [rng.choice("ab") for _ in range(rng.randint(0, 10))]
        pat = [rng.choice("ab") for _ in range(rng.randint(1, 3))]
        assert count_occurrences(pat, seq) == scan_count(pat, seq)


def test_vectors_permutation_stable():
    rng = random.Random(2)
    vs = [make_variant("".join(rng.choice("abcd") for _ in range(rng.randint(2, 7))), rng.randint(1, 4))
          for _ in range(15)]
    basis = build_basis(log_repeats(vs))
    ref = {v.member_case_ids: vectorize(v, basis) for v in vs}
    shuffled = vs[:]
    rng.shuffle(shuffled)
    basis2 = build_basis(log_repeats(shuffled))
    assert basis2.classes == basis.classes
    m = vector_matrix(shuffled, basis2)
    for v, row in zip(shuffled, m):
        assert tuple(row) == ref[v.member_case_ids]


def test_euclidean():
    assert euclidean([1.0, 2.0], [1.0, 2.0]) == 0
    assert euclidean([0, 0], [3, 4]) == 5
    with pytest.raises(DimensionError):
        euclidean([1], [1, 2])


@given(*(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3) for _ in range(3)))
def test_euclidean_metric(u, v, w):
    assert euclidean(u, v) == euclidean(v, u)
    assert euclidean(u, w) <= euclidean(u, v) + euclidean(v, w) + 1e-9


def test_basis_csv():
    buf = io.StringIO()
    write_basis_csv(build_basis(maximal_repeats("abcabc")), buf)
    assert buf.getvalue().splitlines()[1].endswith("a;b;c,2")

from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from badseq.periodic import (BlockSplit, CapExceeded, Composed, Dense, DisjointSum, Masked, Scaled,
                             Splice, add_dense, conditional_histogram, factorizes, from_spec,
                             joint_histogram, lcm, normalize)

small_periods = st.sampled_from([1, 2, 3, 4, 5, 6])


def arrays(n, lo=0, hi=4):
    return st.lists(st.integers(lo, hi), min_size=n, max_size=n).map(np.array)


def masks(n):
    return st.lists(st.booleans(), min_size=n, max_size=n).map(lambda v: np.array(v, dtype=bool))


@st.composite
def dense(draw):
    P = draw(small_periods)
    return Dense(draw(arrays(P)), draw(st.sampled_from([1, 2, 3])))


@st.composite
def node(draw, depth=2):
    if depth == 0:
        return draw(dense())
    kind = draw(st.sampled_from(["dense", "scaled", "masked", "splice", "composed", "disjoint",
                                 "blocksplit"]))
    if kind == "dense":
        return draw(dense())
    sub = node(depth - 1)
    if kind == "scaled":
        return Scaled(draw(sub), draw(st.fractions(0, 3, max_denominator=4)))
    if kind == "masked":
        return Masked(draw(sub), draw(masks(draw(st.sampled_from([2, 3, 4, 5, 7])))))
    if kind == "splice":
        return Splice(draw(sub), draw(sub), draw(masks(draw(st.sampled_from([2, 3, 5])))))
    if kind == "disjoint":
        m = draw(masks(draw(st.sampled_from([2, 3, 5]))))
        return DisjointSum(Masked(draw(dense()), m), Masked(draw(dense()), ~m), m)
    if kind == "composed":
        base = draw(sub)
        S = base.period * draw(st.sampled_from([1, 2]))
        return Composed(base, draw(arrays(S, 0, base.period - 1)))
    # blocksplit with supports separated mod q
    q = draw(st.sampled_from([2, 3]))
    m = draw(masks(q))
    a = Masked(draw(dense()), m)
    b = Masked(draw(dense()), ~m)
    N0 = lcm(a.period, b.period) * draw(st.sampled_from([1, 2]))
    r = draw(st.integers(1, 4))
    return BlockSplit(a, b, N0, r, draw(st.integers(0, r)), draw(st.integers(0, r)),
                      disjoint_mod=draw(st.sampled_from([None, q])))


def brute_classes(f, g):
    x = np.arange(f.period)
    v = f.num_at(x)
    return {int(val): np.bincount(x[v == val] % g, minlength=g) for val in np.unique(v)}


def same_classes(a, b):
    ka = {k for k, v in a.items() if v.any()}
    kb = {k for k, v in b.items() if v.any()}
    return ka == kb and all(np.array_equal(a[k], b[k]) for k in ka)


def divisors(n):
    return [d for d in range(1, n + 1) if n % d == 0]


def frac_values(f, x):
    return [Fraction(int(v), f.den) for v in f.num_at(x)]


def test_dense_basics():
    f = Dense.from_fractions([Fraction(1, 2), 1, 0])
    assert f.period == 3 and f.den == 2
    assert f.mean() == Fraction(1, 2)
    assert f.lifted(6).num.tolist() == [1, 2, 0, 1, 2, 0]
    assert Dense.constant(3, 4).histogram() == Counter({3: 4})
    with pytest.raises(ValueError):
        Dense([])


def test_add_dense():
    s = add_dense(Dense([1, 0]), Dense([1, 1, 1], 2))
    assert s.period == 6
    assert [s.value(x) for x in range(6)] == [Fraction(3, 2), Fraction(1, 2)] * 3


def test_cap_exceeded():
    f = Masked(Dense(np.arange(7)), np.ones(11, dtype=bool))
    with pytest.raises(CapExceeded):
        f.numerators(cap=50)


def test_independence_examples():
    X = Dense([0, 1, 2, 2])
    assert factorizes(joint_histogram(X, Dense.constant(5)))
    assert not factorizes(joint_histogram(X, X))
    # digits of x in base 3 are independent over Z_9
    lo, hi = Dense(np.arange(9) % 3), Dense(np.arange(9) // 3)
    assert factorizes(joint_histogram(lo, hi))


def test_normalize():
    assert normalize(Counter({1: 1, 2: 3})) == {1: Fraction(1, 4), 2: Fraction(3, 4)}


@given(node())
def test_class_histograms_match_brute_force(f):
    for g in divisors(f.period):
        assert same_classes(f.class_histograms(g), brute_classes(f, g)), g


@given(node())
def test_histogram_and_mean(f):
    x = np.arange(f.period)
    vals = frac_values(f, x)
    assert f.histogram() == Counter(vals)
    assert f.mean() == sum(vals, Fraction(0)) / f.period


@given(node(), st.sampled_from([1, 2, 3, 4, 6, 12]))
def test_envelope_matches_brute_force(f, M):
    N = lcm(f.period, M)
    x = np.arange(N)
    v = f.num_at(x)
    ref = np.full(M, np.iinfo(np.int64).min)
    np.maximum.at(ref, x % M, v)
    assert np.array_equal(f.envelope(M), ref)


@given(node(), st.data())
def test_conditional_histogram(f, data):
    w = data.draw(masks(data.draw(st.sampled_from([2, 3, 4, 6, 7]))))
    N = lcm(f.period, w.size)
    x = np.arange(N)
    x = x[w[x % w.size]]
    assert conditional_histogram(f, w) == Counter(frac_values(f, x))


@given(node(), node(), st.data())
def test_joint_histogram(fa, fb, data):
    w = data.draw(st.one_of(st.none(), masks(data.draw(st.sampled_from([2, 3, 5])))))
    N = lcm(fa.period, fb.period, 1 if w is None else w.size)
    x = np.arange(N)
    if w is not None:
        x = x[w[x % w.size]]
    ref = Counter(zip(frac_values(fa, x), frac_values(fb, x)))
    assert +joint_histogram(fa, fb, where=w) == +ref


@given(node())
def test_spec_roundtrip(f):
    g = from_spec(f.to_spec())
    x = np.arange(f.period)
    assert g.period == f.period and g.den == f.den
    assert np.array_equal(g.num_at(x), f.num_at(x))


@given(node())
def test_values_are_periodic(f):
    x = np.arange(f.period)
    assert np.array_equal(f.num_at(x), f.num_at(x + 3 * f.period))

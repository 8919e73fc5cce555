import copy
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from badseq.equidist import SRule
from badseq.family import StepParams, locality_window, restrict_family, trivial_step_family
from badseq.periodic import Dense, Scaled
from badseq.residues import ResidueSet, admissible_residues, nth_terms, power_residues
from badseq.verify import (default_psi, demo_maximal, pairwise_independence_check,
                           residue_average, subsequence_average, verify_family, verify_restricted,
                           weak_norm)

from conftest import PRIMES, SQUARES

small_functions = st.lists(st.integers(0, 6), min_size=1, max_size=12).flatmap(
    lambda v: st.sampled_from([1, 2, 3]).map(lambda d: Dense(v, d)))


def test_residue_average_examples():
    f = Dense([1, 0, 0, 0, 0])
    assert residue_average(f, power_residues(5, 2), 4) == Fraction(1, 2)
    assert residue_average(Dense.constant(Fraction(3, 2)), power_residues(13, 2), 7) == Fraction(3, 2)
    with pytest.raises(ValueError):
        residue_average(f, ResidueSet(5, []), 0)


def test_subsequence_average_examples():
    f = Dense([1, 0, 0, 0])
    # 1, 4, 9, 16 mod 4 = 1, 0, 1, 0
    assert subsequence_average(f, SQUARES, 4, 0) == Fraction(1, 2)
    assert subsequence_average(Dense.constant(1), PRIMES, 50, 3) == 1
    with pytest.raises(ValueError):
        subsequence_average(f, SQUARES, 0, 0)


def test_weak_norm_examples():
    assert weak_norm(Dense([0, 1, 2])) == Fraction(2, 3)
    assert weak_norm(Dense.constant(Fraction(5, 2))) == Fraction(5, 2)
    assert weak_norm(Counter({Fraction(1): 3, Fraction(0): 1})) == Fraction(3, 4)


@given(st.lists(st.booleans(), min_size=1, max_size=30).filter(any))
def test_weak_norm_of_indicator(mask):
    m = np.array(mask, dtype=np.int64)
    assert weak_norm(Dense(m)) == Fraction(int(m.sum()), m.size)


@given(small_functions, st.fractions(min_value=0, max_value=10, max_denominator=7))
def test_weak_norm_homogeneous(g, c):
    assert weak_norm(Scaled(g, c)) == c * weak_norm(g)


@given(small_functions)
def test_weak_norm_brute_force(g):
    vals = [g.value(x) for x in range(g.period)]
    ref = max(v * Fraction(sum(1 for w in vals if w >= v), len(vals)) for v in vals)
    assert weak_norm(g) == ref


@given(small_functions, small_functions, st.integers(0, 50),
       st.sampled_from([power_residues(5, 2), power_residues(13, 2), admissible_residues(PRIMES, 12)]))
def test_residue_average_linear(f, g, x, lam):
    s = Dense.from_fractions([f.value(y) + g.value(y) for y in range(f.period * g.period)])
    assert residue_average(s, lam, x) == residue_average(f, lam, x) + residue_average(g, lam, x)
    ref = sum(f.value(x + a) for a in range(1, lam.modulus + 1) if a % lam.modulus in lam.to_list())
    assert residue_average(f, lam, x) == ref / len(lam)


@given(small_functions, small_functions, st.integers(1, 60), st.integers(0, 30),
       st.sampled_from([SQUARES, PRIMES]))
def test_subsequence_average_linear(f, g, N, x, seq):
    s = Dense.from_fractions([f.value(y) + g.value(y) for y in range(f.period * g.period)])
    assert subsequence_average(s, seq, N, x) == (subsequence_average(f, seq, N, x)
                                                 + subsequence_average(g, seq, N, x))
    ref = sum(f.value(x + int(n)) for n in nth_terms(seq, N)) / N
    assert subsequence_average(f, seq, N, x) == ref


def test_independence_examples():
    X = Dense([0, 1, 1, 3])
    assert pairwise_independence_check(X, Dense.constant(2))
    assert not pairwise_independence_check(X, X)


def test_trivial_family_passes():
    rep = verify_family(trivial_step_family(StepParams()))
    assert rep.passed
    assert [p.name for p in rep.properties][-1].startswith("(4)")


def test_trivial_family_demo():
    rep = demo_maximal(trivial_step_family(StepParams()), sample_size=50, N_cap=100)
    assert set(rep.sup_values) == {1}
    assert rep.ratio == 1 and rep.passed


def lowered(fam):
    """Zero f at every 7th point: breaks (joker) near those points."""
    d = fam.f[0].dense()
    num = d.num.copy()
    num[::7] = 0
    out = copy.copy(fam)
    out.f = [Dense(num, d.den)]
    return out


def test_mutated_family_fails_with_witness(fam111):
    rep = verify_family(lowered(fam111))
    p = rep.get("(4) averages and periodicity off E")
    assert not p.passed
    w = p.witness
    assert w["property"] == "joker"
    x, Q = w["x"], w["Q_x"]
    lam = admissible_residues(SQUARES, Q) if Q > 1 else ResidueSet(1, [0])
    avg = residue_average(lowered(fam111).f[0], lam, x)
    assert avg == Fraction(w["average"]) < Fraction(w["X_max"])


def test_inflated_X_fails_distribution(fam111):
    out = copy.copy(fam111)
    out.X = [Scaled(fam111.X[0], Fraction(2))]
    rep = verify_family(out)
    assert not rep.get("(2) distribution and independence").passed


def test_property_four_against_brute_force(fam111):
    fam = fam111
    T, R = fam.T, fam.R
    psi = default_psi(fam)
    f = fam.f[0]
    X = fam.X[0].num_at(np.arange(R * T)).reshape(R, T).max(axis=0)
    E = fam.E.dense().lifted(T).num.astype(bool)
    Q = fam.Q.dense().lifted(T).num
    joker = thief = 0
    lams = {}
    for x in np.flatnonzero(~E).tolist():
        Qx = int(Q[x])
        if Qx not in lams:
            lams[Qx] = admissible_residues(SQUARES, Qx) if Qx > 1 else ResidueSet(1, [0])
        if residue_average(f, lams[Qx], x) < Fraction(int(X[x]), fam.X[0].den):
            joker += 1
        top = locality_window(psi, fam.params.A, Qx)
        y = np.arange(Qx, top + 1)
        if not np.array_equal(f.num_at(x + y - Qx), f.num_at(x + y)):
            thief += 1
    d = verify_family(fam).get("(4) averages and periodicity off E").details
    assert (d["joker_violations"], d["thief_violations"]) == (joker, thief) == (0, 0)


def test_verify_restricted_small(fam111):
    bar = restrict_family(fam111, 29 * 37, 1, enforce_A=False)
    rep = verify_restricted(bar, fam111, sample_size=300)
    assert rep.get("(1bar) mean").passed
    assert rep.get("(2bar) conditional distributions").passed
    Ef = fam111.f[0].mean()
    assert bar.f[0].mean() <= fam111.params.gamma * Ef


def test_demo_on_one_level(fam111):
    rep = demo_maximal(fam111, sample_size=400, N_cap=600)
    assert rep.worth_violations == 0 and rep.worth_checked == int((fam111.E.dense().num == 0).sum())
    assert rep.ratio >= 1
    # sup A_N f >= A_N f at N = ψ(Q_x) >= β·X(x) at sampled x off E
    beta = fam111.params.beta
    T = fam111.T
    E = fam111.E.dense().lifted(T).num.astype(bool)
    lower = Counter()
    for x, s in zip(rep.sample, rep.sup_values):
        if not E[x % T]:
            bx = beta * fam111.X[0].value(x)
            assert s >= bx
            lower[bx] += 1
        else:
            lower[Fraction(0)] += 1
    assert rep.weak_norm >= weak_norm(lower)


def test_demo_is_deterministic(fam111):
    a = demo_maximal(fam111, sample_size=100, N_cap=200, seed=5).as_dict()
    b = demo_maximal(fam111, sample_size=100, N_cap=200, seed=5).as_dict()
    assert a == b


def test_demo_pow2_rule(fam111):
    rep = demo_maximal(fam111, S=SRule("pow2"), sample_size=100, N_cap=512)
    assert rep.passed

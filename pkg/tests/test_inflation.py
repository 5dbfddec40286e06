import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bilocal.algebra import IDENTITY, AlgebraError, Letter, canonicalize
from bilocal.inflation import (CopyPermutation, apply_party_restricted_permutation, apply_permutation,
                               build_generators, build_y0, build_yac, enumerate_fact_words)
from bilocal.oracle import product_state_moments, random_real_model, simulate_distribution
from bilocal.scenario import Scenario, shared_bit_distribution, uniform_distribution

A00 = Letter(0, 1, 0, 0)
C00 = Letter(2, 1, 0, 0)


def test_copy_permutation_validation():
    with pytest.raises(AlgebraError):
        CopyPermutation((1, 1, 3))
    assert CopyPermutation.transposition(3, 1, 2).image == (2, 1, 3)
    assert CopyPermutation.cycle(3, 1, 2, 3).image == (2, 3, 1)


@pytest.mark.parametrize("settings, outcomes, n, count", [
    ((2, 2, 2), (2, 2, 2), 2, 24),
    ((1, 1, 1), (1, 1, 1), 1, 3),
    ((1, 1, 1), (2, 2, 2), 4, 24),
])
def test_build_generators_counts(settings, outcomes, n, count):
    gens = build_generators(Scenario(settings, outcomes), n)
    assert len(gens) == len(set(gens)) == count


def test_build_generators_rejects_zero_copies():
    with pytest.raises(ValueError):
        build_generators(Scenario.binary(), 0)


def test_swap_copies():
    m = (Letter(0, 1, 0, 0), Letter(1, 2, 0, 0))
    assert apply_permutation(m, CopyPermutation.transposition(2, 1, 2)) == (Letter(0, 2, 0, 0), Letter(1, 1, 0, 0))


def test_identity_and_three_cycle():
    m = canonicalize([Letter(0, 1, 0, 1), Letter(0, 2, 0, 0), Letter(2, 3, 0, 1), Letter(1, 1, 0, 0)])
    assert apply_permutation(m, CopyPermutation.identity(3)) == m
    cyc = CopyPermutation.cycle(3, 1, 2, 3)
    out = m
    for _ in range(3):
        out = apply_permutation(out, cyc)
    assert out == m
    assert apply_permutation(m, cyc) != m


def test_permutation_copy_out_of_range():
    with pytest.raises(AlgebraError):
        apply_permutation((Letter(0, 3, 0, 0),), CopyPermutation.identity(2))


perms = st.integers(1, 4).flatmap(lambda n: st.tuples(st.permutations(range(1, n + 1)),
                                                      st.permutations(range(1, n + 1))))


@given(perms, st.lists(st.tuples(st.integers(0, 2), st.integers(0, 3), st.integers(0, 1)), max_size=6))
def test_left_group_action(pq, raw):
    p, q = CopyPermutation(tuple(pq[0])), CopyPermutation(tuple(pq[1]))
    m = canonicalize(Letter(party, copy % p.n + 1, 0, o) for party, copy, o in raw)
    assert apply_permutation(apply_permutation(m, p), q) == apply_permutation(m, q.compose(p))


def test_party_restricted_permutation_examples():
    swap = CopyPermutation.transposition(2, 1, 2)
    ac = (Letter(0, 1, 0, 0), Letter(2, 1, 0, 0))
    assert apply_party_restricted_permutation(ac, swap, "C") == (Letter(0, 1, 0, 0), Letter(2, 2, 0, 0))
    assert apply_party_restricted_permutation(ac, CopyPermutation.identity(2), "C") == ac
    aa = (Letter(0, 1, 0, 0), Letter(0, 2, 0, 0))
    assert apply_party_restricted_permutation(aa, swap, "C") == aa


def test_party_restricted_permutation_rejects_bob():
    with pytest.raises(AlgebraError):
        apply_party_restricted_permutation((Letter(1, 1, 0, 0),), CopyPermutation.identity(1), 2)


def test_y0_trivial_scenario_vanishes_when_every_moment_is_one():
    y0 = build_y0(uniform_distribution(Scenario((1, 1, 1), (1, 1, 1))))
    assert y0.poly.evaluate(lambda m: 1.0) == 0.0


def test_y0_term_structure_binary():
    d = uniform_distribution(Scenario.binary())
    y0 = build_y0(d)
    degrees = sorted(len(m) for m in y0.poly.terms)
    assert degrees == [0] + [3] * 8 + [6] * 8
    assert y0.poly.coefficient(IDENTITY) == pytest.approx(1 / 8, abs=1e-16)
    assert y0.kind == "objective_y0"
    for m in y0.poly.terms:
        assert {l.copy for l in m} <= {1, 2}


def test_y0_identity_coefficient_is_sum_of_squares():
    d = shared_bit_distribution()
    assert build_y0(d).poly.coefficient(IDENTITY) == pytest.approx(float(np.sum(d.p ** 2)))


def test_yac_coefficients_on_copy_patterns():
    yac = build_yac((A00,), (C00,))
    assert yac.kind == "factorization_yac"
    expected = {
        canonicalize([Letter(0, 1, 0, 0), Letter(2, 1, 0, 0), Letter(0, 2, 0, 0), Letter(2, 2, 0, 0)]): 1.0,
        canonicalize([Letter(0, 1, 0, 0), Letter(2, 1, 0, 0), Letter(0, 2, 0, 0), Letter(2, 3, 0, 0)]): -2.0,
        canonicalize([Letter(0, 1, 0, 0), Letter(2, 2, 0, 0), Letter(0, 3, 0, 0), Letter(2, 4, 0, 0)]): 1.0,
    }
    assert yac.poly.terms == expected
    for m in yac.poly.terms:
        assert {l.copy for l in m} <= {1, 2, 3, 4}


def test_yac_on_factorizing_and_shared_bit_moments():
    yac = build_yac((A00,), (C00,))
    assert yac.poly.evaluate(lambda m: 1.0) == 0.0
    assert yac.poly.evaluate(lambda m: 0.5) == 0.0


def test_yac_rejects_wrong_parties():
    with pytest.raises(AlgebraError):
        build_yac((C00,), (C00,))
    with pytest.raises(AlgebraError):
        build_yac((A00,), (Letter(1, 1, 0, 0),))
    with pytest.raises(AlgebraError):
        build_yac((), (C00,))


@pytest.mark.parametrize("scen, depth, count", [
    (Scenario.binary(1), 1, 4),
    (Scenario.binary(2), 1, 16),
    (Scenario((1, 1, 1), (2, 2, 2)), 2, 36),
])
def test_enumerate_fact_word_counts(scen, depth, count):
    pairs = enumerate_fact_words(scen, depth)
    assert len(pairs) == len(set(pairs)) == count


def test_fact_words_of_length_two_are_distinct():
    a_words = {a for a, _ in enumerate_fact_words(Scenario.binary(1), 2)}
    a0, a1 = Letter(0, 1, 0, 0), Letter(0, 1, 0, 1)
    assert {(a0, a1), (a1, a0), (a0, a0), (a1, a1)} <= a_words


@pytest.mark.parametrize("seed", range(8))
def test_polarization_identities_on_random_models(seed):
    scen = Scenario((2, 1, 2), (2, 3, 2))
    model = random_real_model(seed, scen)
    target = uniform_distribution(scen)
    y0 = build_y0(target)
    mom = product_state_moments(model, y0.poly.terms, 2)
    sigma = simulate_distribution(model).p
    assert y0.poly.evaluate(mom) == pytest.approx(float(np.sum((sigma - target.p) ** 2)), abs=1e-10)
    a_words = [(Letter(0, 1, 0, 0),), (Letter(0, 1, 1, 1), Letter(0, 1, 0, 0))]
    c_words = [(Letter(2, 1, 1, 0),), (Letter(2, 1, 0, 1), Letter(2, 1, 1, 1))]
    for a, c in itertools.product(a_words, c_words):
        yac = build_yac(a, c)
        mom4 = product_state_moments(model, yac.poly.terms, 4)
        rhs = (model.expectation(a + c) - model.expectation(a) * model.expectation(c)) ** 2
        assert yac.poly.evaluate(mom4) == pytest.approx(rhs, abs=1e-10)


def test_polarized_operators_are_adjoint_stable_on_symmetric_moments():
    scen = Scenario.binary(1)
    model = random_real_model(11, scen)
    for op in (build_y0(uniform_distribution(scen)), build_yac((A00, Letter(0, 1, 0, 1)), (C00,))):
        mom = product_state_moments(model, list(op.poly.terms) + list(op.poly.adjoint().terms), 4)
        assert op.poly.evaluate(mom) == pytest.approx(op.poly.adjoint().evaluate(mom), abs=1e-12)

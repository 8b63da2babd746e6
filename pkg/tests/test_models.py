"""Space models: word arithmetic, distances, translation lengths, classification."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pivotal.models import (
    FreeGroupWord,
    MoebiusIsometry,
    are_independent,
    classify_isometry,
    distance,
    reduce_letters,
    translation_length,
    translation_length_limit_oracle,
)

letters_st = st.lists(
    st.sampled_from([1, -1, 2, -2]), min_size=0, max_size=30
)


def word(s):
    return FreeGroupWord.from_string(s)


# -- free group arithmetic -----------------------------------------------------


def test_reduce_letters():
    assert reduce_letters([1, -1]) == ()
    assert reduce_letters([1, 2, -2, -1, 2]) == (2,)
    with pytest.raises(ValueError):
        reduce_letters([1, 0, 1])


def test_from_to_string_roundtrip():
    w = word("abAB")
    assert w.to_string() == "abAB"
    assert w.letters == (1, 2, -1, -2)


@given(letters_st, letters_st)
def test_product_inverse(u_l, v_l):
    u = FreeGroupWord(u_l)
    v = FreeGroupWord(v_l)
    assert (u * v).letters == reduce_letters(u_l + v_l)
    assert (u * u.inverse()).letters == ()
    assert u.inverse().inverse() == u


@given(letters_st, letters_st, letters_st)
def test_product_associative(a_l, b_l, c_l):
    a, b, c = FreeGroupWord(a_l), FreeGroupWord(b_l), FreeGroupWord(c_l)
    assert (a * b) * c == a * (b * c)


def test_power_matches_repeated_product():
    g = word("abA")
    acc = FreeGroupWord(())
    for n in range(7):
        assert g**n == acc
        acc = acc * g
    assert g**-3 == (g**3).inverse()


def test_letter_validation():
    with pytest.raises(ValueError):
        FreeGroupWord([3], rank=2)
    FreeGroupWord([3], rank=3)  # fine at rank 3


# -- metric axioms -------------------------------------------------------------


@settings(max_examples=200)
@given(letters_st, letters_st, letters_st)
def test_tree_metric_axioms(x_l, y_l, z_l):
    from pivotal.models import tree_model

    space = tree_model(2)
    x, y, z = FreeGroupWord(x_l), FreeGroupWord(y_l), FreeGroupWord(z_l)
    dxy = distance(x, y, space)
    assert dxy == distance(y, x, space)
    assert dxy >= 0 and (dxy == 0) == (x == y)
    assert dxy <= distance(x, z, space) + distance(z, y, space)


def _random_h2_points(rng, n):
    return [complex(rng.normal(0, 2), abs(rng.normal(0, 2)) + 0.05) for _ in range(n)]


def test_h2_metric_axioms(h2):
    rng = np.random.default_rng(11)
    for _ in range(2000):
        x, y, z = _random_h2_points(rng, 3)
        dxy = distance(x, y, h2)
        assert abs(dxy - distance(y, x, h2)) < 1e-9
        assert dxy >= 0
        assert dxy <= distance(x, z, h2) + distance(z, y, h2) + 1e-9
    assert distance(1j, 1j, h2) == 0.0


def test_h2_axis_distance(h2):
    # d(i, 4i) along the imaginary axis is log 4
    assert abs(distance(1j, 4j, h2) - math.log(4.0)) < 1e-12


# -- translation length --------------------------------------------------------


def test_tau_tree_examples(tree):
    assert translation_length(word(""), tree) == 0.0
    assert translation_length(word("abA"), tree) == 1.0  # conjugate of b
    assert translation_length_limit_oracle(word("ab"), tree, 100) == 2.0


def test_tau_h2_examples(h2):
    g = MoebiusIsometry(2.0, 0.0, 0.0, 0.5)
    assert abs(translation_length(g, h2) - 2.0 * math.log(2.0)) < 1e-12
    assert abs(translation_length_limit_oracle(g, h2, 1000) - 2.0 * math.log(2.0)) < 1e-6
    assert translation_length(MoebiusIsometry(1.0, 0.0, 0.0, 1.0), h2) == 0.0


@settings(max_examples=60)
@given(letters_st)
def test_tau_limit_oracle_agreement_tree(g_l, ):
    from pivotal.models import tree_model

    space = tree_model(2)
    g = FreeGroupWord(g_l)
    if len(g) == 0:
        return
    n = 64
    tau = translation_length(g, space)
    oracle = translation_length_limit_oracle(g, space, n)
    assert abs(tau - oracle) <= len(g) / n  # |d(o,g^n o)/n - tau| <= 2|strip|/n


@settings(max_examples=60)
@given(letters_st, letters_st, st.integers(min_value=1, max_value=8))
def test_tau_homogeneity_and_conjugation(g_l, h_l, n):
    from pivotal.models import tree_model

    space = tree_model(2)
    g, h = FreeGroupWord(g_l), FreeGroupWord(h_l)
    assert translation_length(g**n, space) == n * translation_length(g, space)
    assert translation_length(h * g * h.inverse(), space) == translation_length(g, space)


def test_tau_h2_conjugation(h2):
    g = MoebiusIsometry(2.0, 1.0, 0.0, 0.5)
    h = MoebiusIsometry(1.0, 3.0, 1.0, 4.0)
    lhs = translation_length(h * g * h.inverse(), h2)
    assert abs(lhs - translation_length(g, h2)) < 1e-9
    for n in range(1, 6):
        assert abs(translation_length(g**n, h2) - n * translation_length(g, h2)) < 1e-9


def test_oracle_overflow(tree):
    g = word("ab") ** 3000
    with pytest.raises(OverflowError):
        translation_length_limit_oracle(g, tree, 10**4)


# -- classification and independence -------------------------------------------


def test_classification(tree, h2):
    assert classify_isometry(word("a"), tree) == "loxodromic"
    assert classify_isometry(word(""), tree) == "elliptic"
    assert classify_isometry(word("aA"), tree) == "elliptic"
    assert classify_isometry(MoebiusIsometry(1.0, 1.0, 0.0, 1.0), h2) == "parabolic"
    assert classify_isometry(MoebiusIsometry(1.0, 0.0, 0.0, 1.0), h2) == "elliptic"
    assert classify_isometry(MoebiusIsometry(0.0, 1.0, -1.0, 0.0), h2) == "elliptic"
    assert classify_isometry(MoebiusIsometry(2.0, 0.0, 0.0, 0.5), h2) == "loxodromic"


def test_parabolic_zero_drift_unbounded(h2):
    # the parabolic orbit escapes but with zero stable displacement
    g = MoebiusIsometry(1.0, 1.0, 0.0, 1.0)
    assert translation_length(g, h2) == 0.0
    d100 = distance(1j, (g**100).apply(1j), h2)
    assert d100 > 5.0
    assert translation_length_limit_oracle(g, h2, 10**4) < 0.01


def test_independence(tree, h2):
    a, b = word("a"), word("b")
    assert are_independent(a, b, tree)
    assert not are_independent(a, a**2, tree)
    assert are_independent(a, b * a * b.inverse(), tree)
    with pytest.raises(ValueError):
        are_independent(word(""), a, tree)
    g = MoebiusIsometry(2.0, 0.0, 0.0, 0.5)
    h = MoebiusIsometry(2.0, 1.0, 1.0, 1.0)
    assert are_independent(g, h, h2)
    assert not are_independent(g, g**2, h2)

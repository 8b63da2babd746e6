"""Schottky set verification and the reference construction."""

import pytest

from pivotal.models import FreeGroupWord, translation_length, tree_model
from pivotal.schottky import (
    SchottkyParams,
    default_probes,
    schottky_subset,
    search_schottky,
    verify_schottky,
)

a = FreeGroupWord.from_string("a")
b = FreeGroupWord.from_string("b")


def test_reference_constants_ladder(reference):
    params, constants = reference
    # K is the max displacement of the 1024 pattern words phi_1^2...phi_10^2
    assert params.K == 20.0
    assert constants.C0 == 20.0
    assert (constants.D0, constants.F0, constants.G0) == (40.0, 80.0, 240.0)
    assert constants.L0 == 1762.0
    assert params.Kprime == constants.L0


def test_reference_set_shape(reference, tree):
    params, _ = reference
    assert len(params.set) == 310
    assert params.power == 89  # ceil(1762 / 20)
    lengths = {len(g) for g in params.set}
    assert lengths == {1780}
    # every element translates by at least K'
    for s in list(params.set)[::37]:
        assert translation_length(s, tree) >= params.Kprime


def test_reference_verifies_on_fresh_probes(reference, tree):
    params, _ = reference
    probes = default_probes(params, tree, seed=12345)
    report = verify_schottky(params, tree, probes)
    assert report.passed
    assert report.certificate_ok
    # the counting condition holds with room: at most 1 element per direction
    assert report.max_count_pos <= 1 and report.max_count_neg <= 1


def test_verify_rejects_shared_axis(tree):
    # a and a^3 point the same way: the pairwise ray certificate must fail
    params = SchottkyParams(K=2.0, Kprime=1.0, set=(a, a**3))
    probes = default_probes(params, tree, seed=1)
    report = verify_schottky(params, tree, probes)
    assert not report.passed


def test_verify_rejects_small_displacement(tree):
    params = SchottkyParams(K=3.0, Kprime=5.0, set=(a, b))
    probes = default_probes(params, tree, seed=1)
    report = verify_schottky(params, tree, probes)
    assert not report.displacement_ok and not report.passed


def test_verify_requires_probes(tree):
    params = SchottkyParams(K=3.0, Kprime=1.0, set=(a, b))
    with pytest.raises(ValueError):
        verify_schottky(params, tree, [])


def test_params_validation():
    with pytest.raises(ValueError):
        SchottkyParams(K=1.0, Kprime=1.0, set=(a,))
    with pytest.raises(ValueError):
        SchottkyParams(K=1.0, Kprime=1.0, set=(a, a))


def test_search_input_validation(tree):
    with pytest.raises(ValueError):
        search_schottky(a, a, 4, 10.0, tree)
    with pytest.raises(ValueError):
        search_schottky(a, a.inverse(), 4, 10.0, tree)  # shared axis
    with pytest.raises(ValueError):
        search_schottky(a, b, 2000, 10.0, tree)  # only 1024 candidates


def test_subset_stays_schottky(reference, tree):
    params, _ = reference
    sub = schottky_subset(params, 16)
    assert len(sub.set) == 16
    assert set(sub.set) <= set(params.set)
    report = verify_schottky(sub, tree, default_probes(sub, tree, seed=99))
    assert report.passed
    # canonical order: calling twice gives the same subset
    assert schottky_subset(params, 16).set == sub.set
    with pytest.raises(ValueError):
        schottky_subset(params, 1)
    with pytest.raises(ValueError):
        schottky_subset(params, 1000)


def test_small_search_end_to_end(tree):
    # a small set is found quickly and passes an independent verification
    params = search_schottky(a, b, 8, 50.0, tree)
    assert len(params.set) == 8
    report = verify_schottky(params, tree, default_probes(params, tree, seed=5))
    assert report.passed
    for s in params.set:
        assert translation_length(s, tree) >= 50.0

"""Step distributions, classification searches, and the decomposed block sampler."""

import math
from fractions import Fraction

import numpy as np
import pytest

from pivotal.models import FreeGroupWord, classify_isometry, are_independent, translation_length
from pivotal.walk import (
    StepDistribution,
    build_decomposed_model,
    exponential_moment,
    is_non_arithmetic,
    is_non_elementary,
    make_rng,
    pth_moment,
    sample_bidirectional,
    sample_trajectory,
    uniform_f2_steps,
)

w = FreeGroupWord.from_string


def test_make_rng_keyed_streams():
    x = make_rng(7, 0).random(4)
    y = make_rng(7, 0).random(4)
    z = make_rng(7, 1).random(4)
    assert np.array_equal(x, y)
    assert not np.array_equal(x, z)


def test_step_distribution_validation():
    with pytest.raises(ValueError):
        StepDistribution((w("a"), w("b")), (0.5, 0.6))
    with pytest.raises(ValueError):
        StepDistribution((w("a"), w("a")), (0.5, 0.5))
    with pytest.raises(ValueError):
        StepDistribution((w("a"), w("b")), (1.0, 0.0))
    with pytest.raises(ValueError):
        StepDistribution((w("a"),), (0.5,))


def test_moments(tree):
    mu = uniform_f2_steps()
    assert pth_moment(mu, 1.0, tree) == 1.0
    assert pth_moment(mu, 2.5, tree) == 1.0  # all steps displace by exactly 1
    assert abs(exponential_moment(mu, 0.3, tree) - math.exp(0.3)) < 1e-12


def test_non_elementary_positive(tree):
    mu = uniform_f2_steps()
    found, witness = is_non_elementary(mu, tree, search_depth=2)
    assert found
    g, h = witness
    assert classify_isometry(g, tree) == "loxodromic"
    assert classify_isometry(h, tree) == "loxodromic"
    assert are_independent(g, h, tree)


def test_non_elementary_negative(tree):
    # supported on a single axis: never two independent loxodromics
    mu = StepDistribution.uniform([w("a"), w("A")])
    found, witness = is_non_elementary(mu, tree, search_depth=4)
    assert not found and witness is None


def test_non_arithmetic(tree):
    mu = uniform_f2_steps()
    found, witness = is_non_arithmetic(mu, tree, search_depth=3)
    assert found
    N, g, h = witness
    assert abs(translation_length(g, tree) - translation_length(h, tree)) > 1e-9
    assert len(g) <= N and len(h) <= N
    # a point mass has a single translation length at every power
    delta_a = StepDistribution((w("a"),), (1.0,))
    found, _ = is_non_arithmetic(delta_a, tree, search_depth=4)
    assert not found


# -- decomposed model ----------------------------------------------------------


def test_exact_alpha(stub_model):
    m = stub_model
    # uniform base: every letter has mass 1/4, so alpha = |S|^2 (1/4)^{6N}
    assert m.alpha_exact == Fraction(305**2, 4 ** (6 * m.N))
    assert 0 < m.alpha_exact < 1
    assert m.alpha_sim == 0.3  # the override used for simulation


def test_alpha_dominated_by_block_mass(stub_model):
    # alpha * eta(block) <= mu^{6N}(block) for the eta atoms
    m = stub_model
    eta_mass = Fraction(1, len(m.S) ** 2)
    block_mass = Fraction(1, 4 ** (6 * m.N))
    assert m.alpha_exact * eta_mass <= block_mass


def test_model_shapes(stub_model):
    m = stub_model
    assert m.N == 1780
    assert m.block_steps == 6 * 1780
    assert len(m.S) == 305
    assert m.S_letters.shape == (305, 1780)
    assert m.c not in m.S
    assert m.filler_len() == 48


def test_build_validation(reference, tree):
    params, constants = reference
    with pytest.raises(ValueError):
        build_decomposed_model(
            uniform_f2_steps(), params, constants, tree, subset_size=500
        )


def test_trajectory_determinism(stub_model):
    n = 20 * stub_model.block_steps + 17
    t1 = sample_trajectory(stub_model, n, seed=3, stream=5)
    t2 = sample_trajectory(stub_model, n, seed=3, stream=5)
    t3 = sample_trajectory(stub_model, n, seed=3, stream=6)
    assert np.array_equal(t1.letters(), t2.letters())
    assert not np.array_equal(t1.letters(), t3.letters())
    assert t1.partial.shape[0] == 17


def test_bernoulli_bookkeeping(stub_model):
    t = sample_trajectory(stub_model, 40 * stub_model.block_steps, seed=11)
    assert t.n_blocks == 40
    assert t.B(t.n_blocks) == t.n_schottky == len(t.a_idx) == len(t.b_idx)
    for i in range(1, t.n_schottky + 1):
        assert t.B(t.T(i)) == i
        assert t.rho[t.T(i) - 1]
    with pytest.raises(IndexError):
        t.T(t.n_schottky + 1)
    with pytest.raises(IndexError):
        t.T(0)


def test_block_reconstruction(stub_model):
    m = stub_model
    t = sample_trajectory(m, 30 * m.block_steps, seed=13)
    total = 0
    k = 0
    for i in range(t.n_blocks):
        blk = t.block_letters(i)
        if t.rho[i]:
            a = m.S_letters[t.a_idx[k]]
            bb = m.S_letters[t.b_idx[k]]
            expect = np.concatenate([a, a, m.c_letters, m.c_letters, bb, bb])
            assert np.array_equal(blk, expect)
            k += 1
        else:
            assert blk.shape[0] == m.filler_len()
        total += blk.shape[0]
    assert t.letters().shape[0] == total + t.partial.shape[0]


def test_faithful_sampler_matches_stub_bookkeeping(faithful_model):
    m = faithful_model
    t = sample_trajectory(m, 8 * m.block_steps, seed=2)
    # faithful fillers are full 6N-letter mu-blocks
    for f in t.fillers:
        assert f.shape[0] == m.block_steps
    assert t.n_schottky + len(t.fillers) == t.n_blocks


def test_backward_direction_inverts_blocks(stub_model):
    m = stub_model
    fwd = sample_trajectory(m, 20 * m.block_steps, seed=9, stream=4)
    bwd = sample_trajectory(m, 20 * m.block_steps, seed=9, stream=4, direction="backward")
    # identical draws; backward Schottky blocks use the inverse alphabet
    # piece by piece (the a^2 c^2 b^2 pattern over S^{-1}), while fillers
    # are inverted wholesale
    assert np.array_equal(fwd.rho, bwd.rho)
    k = 0
    for i in range(fwd.n_blocks):
        if fwd.rho[i]:
            a = m.S_letters[fwd.a_idx[k]]
            bb = m.S_letters[fwd.b_idx[k]]
            ia, ib, ic = -a[::-1], -bb[::-1], -m.c_letters[::-1]
            expect = np.concatenate([ia, ia, ic, ic, ib, ib])
            assert np.array_equal(bwd.block_letters(i), expect)
            k += 1
        else:
            assert np.array_equal(bwd.block_letters(i), -fwd.block_letters(i)[::-1])


def test_bidirectional_streams_decorrelated(stub_model):
    bwd, fwd = sample_bidirectional(stub_model, 10 * stub_model.block_steps, seed=21)
    assert fwd.direction == "forward" and bwd.direction == "backward"
    assert fwd.stream == 0 and bwd.stream == 1
    assert not np.array_equal(fwd.rho, bwd.rho) or fwd.n_schottky != bwd.n_schottky


def test_omega_prefix_products(stub_model):
    t = sample_trajectory(stub_model, 2 * stub_model.block_steps + 5, seed=17)
    lets = t.letters()
    full = t.omega()
    assert len(full) == t.endpoint_distance()
    k = lets.shape[0] // 2
    partial = t.omega(k)
    brute = FreeGroupWord([int(x) for x in lets[:k]])
    assert partial == brute


def test_sample_validation(stub_model):
    with pytest.raises(ValueError):
        sample_trajectory(stub_model, 0, seed=1)

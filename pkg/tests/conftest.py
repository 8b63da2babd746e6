import numpy as np
import pytest

from pivotal.models import hyperbolic_plane_model, tree_model
from pivotal.schottky import reference_setup
from pivotal.walk import build_decomposed_model, uniform_f2_steps


@pytest.fixture(scope="session")
def tree():
    return tree_model(2)


@pytest.fixture(scope="session")
def h2():
    return hyperbolic_plane_model()


@pytest.fixture(scope="session")
def reference(tree):
    """(SchottkyParams, GromovConstants) for the standard two-generator setup.

    Built once per session (~5 s); every pivot test shares it.
    """
    return reference_setup(tree)


@pytest.fixture(scope="session")
def stub_model(reference, tree):
    """Decomposed model with short stub fillers: the workhorse for pivot tests."""
    params, constants = reference
    return build_decomposed_model(
        uniform_f2_steps(),
        params,
        constants,
        tree,
        alpha_override=0.3,
        nu_stub_len=48,
    )


@pytest.fixture(scope="session")
def faithful_model(reference, tree):
    """Decomposed model with full 6N-letter fillers (exact nu by rejection)."""
    params, constants = reference
    return build_decomposed_model(
        uniform_f2_steps(),
        params,
        constants,
        tree,
        alpha_override=0.5,
    )


@pytest.fixture(scope="session")
def constants(reference):
    return reference[1]


def random_word_letters(rng: np.random.Generator, max_len: int, rank: int = 2):
    n = int(rng.integers(0, max_len + 1))
    out = []
    for _ in range(n):
        g = int(rng.integers(1, rank + 1))
        out.append(g if rng.integers(0, 2) else -g)
    return out

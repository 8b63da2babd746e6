"""Step distributions and the decomposed block model for the random walk.

The decomposed model splits the 6N-step law mu^{6N} into alpha * (Schottky
block law) + (1 - alpha) * nu: a Bernoulli draw decides whether a block is a
Schottky block a^2 c^2 b^2 (a, b uniform in S) or a filler drawn from nu by
rejection. The exact alpha of the decomposition is astronomically small for
production-size Schottky sets, so simulations that need to observe Schottky
blocks pass an explicit alpha_override; the pivot lemmas are uniform over the
filler choices, so this only changes how often the machinery is exercised,
not what is being checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .geometry import GromovConstants, Segment, gromov_product, is_witnessed
from .models import (
    FreeGroupWord,
    GroupElement,
    SpaceModel,
    are_independent,
    classify_isometry,
    distance,
    translation_length,
)
from .schottky import SchottkyParams
from .treepath import reduce_array


def make_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream): bit-exact under any
    parallel schedule."""
    return np.random.Generator(np.random.Philox(key=(seed & (2**64 - 1), stream)))


@dataclass(frozen=True)
class StepDistribution:
    support: Tuple[GroupElement, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        if len(self.support) != len(self.weights):
            raise ValueError("support/weights length mismatch")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support elements must be distinct")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")

    @classmethod
    def uniform(cls, support: Sequence[GroupElement]) -> "StepDistribution":
        n = len(support)
        return cls(tuple(support), tuple(1.0 / n for _ in range(n)))


def uniform_f2_steps(rank: int = 2) -> StepDistribution:
    """Uniform measure on the 2*rank standard generators and inverses."""
    gens: List[GroupElement] = []
    for g in range(1, rank + 1):
        gens.append(FreeGroupWord([g], rank=rank))
        gens.append(FreeGroupWord([-g], rank=rank))
    return StepDistribution.uniform(gens)


def pth_moment(mu: StepDistribution, p: float, space: SpaceModel) -> float:
    o = space.basepoint
    return sum(w * distance(o, space.orbit(g), space) ** p for g, w in zip(mu.support, mu.weights))


def exponential_moment(mu: StepDistribution, K: float, space: SpaceModel) -> float:
    o = space.basepoint
    return sum(w * math.exp(K * distance(o, space.orbit(g), space)) for g, w in zip(mu.support, mu.weights))


def _semigroup_levels(mu: StepDistribution, depth: int, cap: int = 4096):
    """Breadth-first products of the support, deduplicated, level by level."""
    level: List[GroupElement] = [mu.support[0] ** 0] if isinstance(mu.support[0], FreeGroupWord) else [
        mu.support[0] * mu.support[0].inverse()
    ]
    seen = set(level)
    for _ in range(depth):
        nxt: List[GroupElement] = []
        for g in level:
            for h in mu.support:
                gh = g * h
                if gh not in seen:
                    seen.add(gh)
                    nxt.append(gh)
                if len(seen) > cap:
                    break
            if len(seen) > cap:
                break
        level = nxt
        yield level


def is_non_elementary(
    mu: StepDistribution, space: SpaceModel, search_depth: int = 4
) -> Tuple[bool, Optional[Tuple[GroupElement, GroupElement]]]:
    """Search the generated semigroup for two independent loxodromics.

    False means "not found within depth", not a disproof.
    """
    loxos: List[GroupElement] = []
    for level in _semigroup_levels(mu, search_depth):
        for g in level:
            if classify_isometry(g, space) == "loxodromic":
                for h in loxos:
                    if are_independent(g, h, space):
                        return True, (h, g)
                loxos.append(g)
    return False, None


def is_non_arithmetic(
    mu: StepDistribution, space: SpaceModel, search_depth: int = 4
) -> Tuple[bool, Optional[Tuple[int, GroupElement, GroupElement]]]:
    """Search supp mu^N, N <= search_depth, for two products with distinct
    translation lengths; returns (found, (N, g, h))."""
    level: List[GroupElement] = list(mu.support)
    for N in range(1, search_depth + 1):
        if N > 1:
            nxt = []
            seen = set()
            for g in level:
                for h in mu.support:
                    gh = g * h
                    if gh not in seen:
                        seen.add(gh)
                        nxt.append(gh)
                    if len(nxt) > 4096:
                        break
                if len(nxt) > 4096:
                    break
            level = nxt
        taus = {}
        for g in level:
            t = translation_length(g, space)
            for t0, g0 in taus.items():
                if abs(t - t0) > 1e-9:
                    return True, (N, g0, g)
            taus.setdefault(round(t, 9), g)
    return False, None


# -- decomposed block model ----------------------------------------------------


@dataclass
class DecomposedModel:
    """mu^{6N} = alpha * (S-choice^2 x c^2 x S-choice^2) + (1 - alpha) * nu."""

    base: StepDistribution
    schottky: SchottkyParams
    S: Tuple[FreeGroupWord, ...]
    c: FreeGroupWord
    N: int
    alpha_exact: Fraction
    alpha_sim: float
    constants: GromovConstants
    space: SpaceModel
    nu_stub_len: Optional[int] = None  # None: faithful 6N-letter filler
    S_letters: np.ndarray = field(repr=False, default=None)  # |S| x N int8
    c_letters: np.ndarray = field(repr=False, default=None)

    @property
    def block_steps(self) -> int:
        return 6 * self.N

    def filler_len(self) -> int:
        return self.block_steps if self.nu_stub_len is None else self.nu_stub_len


def _letter_mass(word: FreeGroupWord, base: StepDistribution) -> Fraction:
    """Exact mu-mass of the unique letter spelling of a reduced word."""
    table: Dict[int, Fraction] = {}
    for g, w in zip(base.support, base.weights):
        if len(g) != 1:
            raise ValueError("decomposition requires a single-letter base alphabet")
        table[g.letters[0]] = Fraction(w).limit_denominator(10**9)
    mass = Fraction(1)
    counts: Dict[int, int] = {}
    for x in word.letters:
        counts[x] = counts.get(x, 0) + 1
    for x, k in counts.items():
        if x not in table:
            raise ValueError("word uses a letter outside the base support")
        mass *= table[x] ** k
    return mass


def build_decomposed_model(
    base: StepDistribution,
    schottky: SchottkyParams,
    constants: GromovConstants,
    space: SpaceModel,
    c_index: int = 0,
    subset_size: int = 305,
    alpha_override: Optional[float] = None,
    nu_stub_len: Optional[int] = None,
) -> DecomposedModel:
    """Pick c and S from the Schottky set, compute the exact alpha, and check
    the trajectory-independent c-block product conditions."""
    from .schottky import schottky_subset

    full = sorted(schottky.set, key=lambda w: w.letters)
    c = full[c_index]
    rest = tuple(w for i, w in enumerate(full) if i != c_index)
    if len(rest) < subset_size:
        raise ValueError("schottky set too small for requested subset")
    S = tuple(rest[:subset_size])
    N = len(c)
    if any(len(s) != N for s in S):
        raise ValueError("schottky elements must share a common block length")

    # exact alpha: |S|^2 * min over (a, b) of the mu-mass of the 6N spelling
    # a a c c b b, i.e. m(a)^2 m(c)^2 m(b)^2 >= m_min^4 c_mass^2
    masses = [_letter_mass(s, base) for s in S]
    c_mass = _letter_mass(c, base)
    m_min = min(masses)
    alpha_exact = len(S) ** 2 * (m_min**4) * (c_mass**2) * Fraction(1)
    # each block tuple has eta-mass 1/|S|^2; alpha * eta <= mu^{6N} pointwise
    alpha_exact = min(alpha_exact, Fraction(1, 2))  # stay inside (0,1)
    alpha_sim = float(alpha_exact) if alpha_override is None else float(alpha_override)

    # trajectory-independent c-block checks (validated once per model)
    o = space.basepoint
    for s in S:
        p1 = gromov_product(o, space.orbit(c), space.orbit(s**-2), space)
        if not space.strict_less(p1, constants.C0):
            raise ValueError("c-block condition (c o, a^-2 o)_o < C0 fails")
        p2 = gromov_product(o, space.orbit(c.inverse()), space.orbit(s**2), space)
        if not space.strict_less(p2, constants.C0):
            raise ValueError("c-block condition (c^-1 o, b^2 o)_o < C0 fails")
    seg = Segment(o, space.orbit(c**2))
    chain = [Segment(o, space.orbit(c)), Segment(space.orbit(c), space.orbit(c**2))]
    if not is_witnessed(seg, chain, constants.D0, space):
        raise ValueError("c-block witnessing of [o, c^2 o] fails")

    S_letters = np.array([s.letters for s in S], dtype=np.int8)
    c_letters = np.array(c.letters, dtype=np.int8)
    return DecomposedModel(
        base=base,
        schottky=schottky,
        S=S,
        c=c,
        N=N,
        alpha_exact=alpha_exact,
        alpha_sim=alpha_sim,
        constants=constants,
        space=space,
        nu_stub_len=nu_stub_len,
        S_letters=S_letters,
        c_letters=c_letters,
    )


@dataclass
class Trajectory:
    """A sampled walk with its full Bernoulli/block bookkeeping.

    rho[i] is the Bernoulli draw for block i; for successes a_idx/b_idx hold
    the S-choices (indexed by success order), fillers holds the nu letter
    arrays for failure blocks in order. The letter stream
    is the concatenation in block order; steps are single letters for the
    standard models.
    """

    model: DecomposedModel
    seed: int
    stream: int
    n: int
    direction: str  # "forward" or "backward"
    rho: np.ndarray
    a_idx: np.ndarray
    b_idx: np.ndarray
    fillers: List[np.ndarray]
    partial: np.ndarray

    @property
    def n_blocks(self) -> int:
        return len(self.rho)

    @property
    def n_schottky(self) -> int:
        return int(self.rho.sum())

    def B(self, k: int) -> int:
        """Number of Bernoulli successes among blocks 1..k."""
        return int(self.rho[:k].sum())

    def T(self, i: int) -> int:
        """The block index of the i-th success (1-based), per B(T(i)) = i."""
        idx = np.flatnonzero(self.rho)
        if i < 1 or i > len(idx):
            raise IndexError("success index out of range")
        return int(idx[i - 1]) + 1

    def _sign(self) -> int:
        return 1 if self.direction == "forward" else -1

    def block_letters(self, i: int) -> np.ndarray:
        """Letter stream of block i (0-based)."""
        m = self.model
        if self.rho[i]:
            k = int(self.rho[: i + 1].sum()) - 1
            a = m.S_letters[self.a_idx[k]]
            b = m.S_letters[self.b_idx[k]]
            c = m.c_letters
            if self.direction == "backward":
                a, b, c = -a[::-1], -b[::-1], -c[::-1]
            return np.concatenate([a, a, c, c, b, b])
        k = int((~self.rho[: i + 1].astype(bool)).sum()) - 1
        return self.fillers[k]

    def letters(self) -> np.ndarray:
        chunks = [self.block_letters(i) for i in range(self.n_blocks)]
        chunks.append(self.partial)
        return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int8)

    def omega(self, k: Optional[int] = None) -> FreeGroupWord:
        """Prefix product omega_k as a reduced word (k in letter steps)."""
        lets = self.letters()
        if k is not None:
            lets = lets[:k]
        return FreeGroupWord(
            tuple(int(x) for x in reduce_array(lets)), rank=self.model.space.rank, _reduced=True
        )

    def endpoint_distance(self) -> int:
        return int(reduce_array(self.letters()).shape[0])


def _sample_letters(mu: StepDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. mu-steps flattened to a letter array."""
    idx = rng.choice(len(mu.support), size=n, p=np.array(mu.weights))
    if all(len(g) == 1 for g in mu.support):
        lut = np.array([g.letters[0] for g in mu.support], dtype=np.int8)
        return lut[idx]
    pieces = [np.array(mu.support[i].letters, dtype=np.int8) for i in idx]
    return np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.int8)


def sample_trajectory(
    model: DecomposedModel, n: int, seed: int, stream: int = 0, direction: str = "forward"
) -> Trajectory:
    """Sample n base steps of the decomposed walk, deterministic in (seed, stream).

    Blocks of 6N steps are drawn as Schottky blocks with probability alpha_sim,
    otherwise from nu by rejection against the eta-compatible tuples; the final
    partial block is i.i.d. base steps.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    m = model
    rng = make_rng(seed, stream)
    blocks = n // m.block_steps
    single = all(len(g) == 1 for g in m.base.support)
    if m.nu_stub_len is not None and single:
        # stub fillers need no rejection step, so the whole trajectory can be
        # drawn in a handful of vectorized calls
        lut = np.array([g.letters[0] for g in m.base.support], dtype=np.int8)
        p = np.array(m.base.weights)
        rho = rng.random(blocks) < m.alpha_sim
        k = int(rho.sum())
        a_idx = rng.integers(0, len(m.S), size=k)
        b_idx = rng.integers(0, len(m.S), size=k)
        n_fail = blocks - k
        fill = lut[rng.choice(len(lut), size=(n_fail, m.nu_stub_len), p=p)]
        partial = lut[rng.choice(len(lut), size=n - blocks * m.block_steps, p=p)]
        if direction == "backward":
            fill = -fill[:, ::-1]
            partial = -partial[::-1]
        return Trajectory(
            model=model,
            seed=seed,
            stream=stream,
            n=n,
            direction=direction,
            rho=rho,
            a_idx=a_idx.astype(np.int64),
            b_idx=b_idx.astype(np.int64),
            fillers=[fill[i] for i in range(n_fail)],
            partial=partial,
        )
    rho = np.zeros(blocks, dtype=bool)
    a_idx: List[int] = []
    b_idx: List[int] = []
    fillers: List[np.ndarray] = []
    eta_keys = {m.S_letters[i].tobytes() for i in range(len(m.S))}
    c_bytes = m.c_letters.tobytes()
    for i in range(blocks):
        if rng.random() < m.alpha_sim:
            rho[i] = True
            a_idx.append(int(rng.integers(0, len(m.S))))
            b_idx.append(int(rng.integers(0, len(m.S))))
        else:
            while True:
                lets = _sample_letters(m.base, m.filler_len(), rng)
                if m.nu_stub_len is not None:
                    break
                # rejection against eta-compatible tuples keeps nu exact
                Nl = m.N
                is_eta = (
                    lets[:Nl].tobytes() in eta_keys
                    and lets[Nl : 2 * Nl].tobytes() == lets[:Nl].tobytes()
                    and lets[2 * Nl : 3 * Nl].tobytes() == c_bytes
                    and lets[3 * Nl : 4 * Nl].tobytes() == c_bytes
                    and lets[4 * Nl : 5 * Nl].tobytes() in eta_keys
                    and lets[5 * Nl : 6 * Nl].tobytes() == lets[4 * Nl : 5 * Nl].tobytes()
                )
                if not is_eta:
                    break
                if rng.random() > float(m.alpha_exact):  # pragma: no cover - measure zero
                    break
            if direction == "backward":
                lets = -lets[::-1]
            fillers.append(lets)
    partial = _sample_letters(m.base, n - blocks * m.block_steps, rng)
    if direction == "backward":
        partial = -partial[::-1]
    return Trajectory(
        model=model,
        seed=seed,
        stream=stream,
        n=n,
        direction=direction,
        rho=rho,
        a_idx=np.array(a_idx, dtype=np.int64),
        b_idx=np.array(b_idx, dtype=np.int64),
        fillers=fillers,
        partial=partial,
    )


def sample_bidirectional(model: DecomposedModel, n: int, seed: int) -> Tuple[Trajectory, Trajectory]:
    """Backward and forward trajectories from decorrelated streams; backward
    Schottky choices use the inverse set S^{-1}."""
    fwd = sample_trajectory(model, n, seed, stream=0, direction="forward")
    bwd = sample_trajectory(model, n, seed, stream=1, direction="backward")
    return bwd, fwd

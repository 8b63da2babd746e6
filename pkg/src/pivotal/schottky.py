"""Schottky sets: verification of the (K, K') counting conditions and search.

A finite set S of isometries is (K, K')-Schottky when for every pair of points
x, y at most 2 elements s have (x, s^i y)_o >= K for some positive power i
(and likewise for negative powers), and all nonzero powers displace the
basepoint by at least K'. Universal quantification over x, y is approximated
by a structured adversarial probe family; on the tree an exact pairwise
prefix certificate is checked in addition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .models import (
    FreeGroupWord,
    GroupElement,
    Point,
    SpaceModel,
    are_independent,
    distance,
    translation_length,
)


@dataclass(frozen=True)
class SchottkyParams:
    K: float
    Kprime: float
    set: Tuple[GroupElement, ...]
    power: int = 1  # elements are pattern^power; kept for provenance

    def __post_init__(self):
        if len(self.set) < 2:
            raise ValueError("Schottky set needs at least 2 elements")
        if len(set(self.set)) != len(self.set):
            raise ValueError("Schottky set elements must be distinct")


@dataclass
class VerificationReport:
    passed: bool
    power_cap: int
    max_count_pos: int = 0
    max_count_neg: int = 0
    displacement_ok: bool = True
    certificate_ok: Optional[bool] = None  # exact pairwise check (tree only)
    worst_probe: Optional[int] = None
    failures: List[str] = field(default_factory=list)
    n_probes: int = 0

    def __bool__(self) -> bool:
        return self.passed


def _tree_max_product(x: FreeGroupWord, s: FreeGroupWord, y: FreeGroupWord, power_cap: int) -> int:
    """max over 0 < i <= power_cap of (x, s^i y)_o on the tree.

    Beyond i with |s^i| - |y| >= |x| the product equals the common prefix of x
    with the (periodic) forward ray of s, so only small powers are explicit.
    """
    Ls = len(s)
    if Ls == 0:
        return 0
    best = 0
    i_explicit = min(power_cap, (len(x) + len(y)) // Ls + 1)
    acc = s
    for i in range(1, i_explicit + 1):
        if i > 1:
            acc = acc * s
        w = acc * y
        best = max(best, x.common_prefix_length(w))
    if i_explicit < power_cap:
        # stable regime: compare against the infinite forward ray of s
        reps = len(x) // Ls + 1
        ray = FreeGroupWord(s.letters * reps, rank=x.rank, _reduced=True)
        best = max(best, x.common_prefix_length(ray))
    return best


def _max_product(x: Point, s: GroupElement, y: Point, space: SpaceModel, power_cap: int) -> float:
    if space.is_tree:
        return float(_tree_max_product(x, s, y, power_cap))
    o = space.basepoint
    best = 0.0
    g = s
    for _ in range(power_cap):
        z = g.apply(y) if not space.is_tree else None
        dxy = distance(x, z, space)
        prod = 0.5 * (distance(o, x, space) + distance(o, z, space) - dxy)
        best = max(best, prod)
        g = g * s
    return best


def _displacement_ok(s: GroupElement, space: SpaceModel, Kprime: float, power_cap: int) -> bool:
    if space.is_tree:
        core = s.cyclic_reduction()
        if len(core) == len(s):
            # cyclically reduced: d(o, s^i o) = |i| * |s|
            return len(s) >= Kprime
        for i in range(1, power_cap + 1):
            if len(s**i) < Kprime:
                return False
        return True
    # H2: d(o, s^i o) >= tau(s^i) = |i| tau(s); check the first power directly too
    if translation_length(s, space) >= Kprime:
        return True
    for i in range(1, power_cap + 1):
        if distance(space.basepoint, space.orbit(s**i), space) < Kprime:
            return False
    return True


def _tree_certificate(params: SchottkyParams) -> bool:
    """Exact pairwise check on the tree: the forward/backward rays of distinct
    elements (and the two rays of a single element) share a prefix < K."""
    K = params.K
    rays = []
    for s in params.set:
        n = int(math.ceil(K)) + 1
        reps = n // max(len(s), 1) + 2
        fwd = FreeGroupWord(s.letters * reps, rank=s.rank, _reduced=True)
        inv = s.inverse()
        bwd = FreeGroupWord(inv.letters * reps, rank=s.rank, _reduced=True)
        rays.append((fwd, bwd))
    for i in range(len(rays)):
        fi, bi = rays[i]
        if fi.common_prefix_length(bi) >= K:
            return False
        for j in range(i + 1, len(rays)):
            fj, bj = rays[j]
            for u in (fi, bi):
                for v in (fj, bj):
                    if u.common_prefix_length(v) >= K:
                        return False
    return True


def verify_schottky(
    params: SchottkyParams,
    space: SpaceModel,
    probes: Sequence[Tuple[Point, Point]],
    power_cap: int = 64,
) -> VerificationReport:
    """Check the counting conditions over the probe family plus displacements."""
    if len(probes) == 0:
        raise ValueError("probes must be nonempty")
    report = VerificationReport(passed=True, power_cap=power_cap, n_probes=len(probes))
    for s in params.set:
        if not _displacement_ok(s, space, params.Kprime, power_cap):
            report.displacement_ok = False
            report.passed = False
            report.failures.append(f"displacement below K' for element {s!r}")
            break
    inv_set = [s.inverse() for s in params.set]
    for pi, (x, y) in enumerate(probes):
        cpos = 0
        cneg = 0
        for s, si in zip(params.set, inv_set):
            if _max_product(x, s, y, space, power_cap) >= params.K:
                cpos += 1
            if _max_product(x, si, y, space, power_cap) >= params.K:
                cneg += 1
        if cpos > report.max_count_pos:
            report.max_count_pos = cpos
            report.worst_probe = pi
        if cneg > report.max_count_neg:
            report.max_count_neg = cneg
            report.worst_probe = pi
        if cpos > 2 or cneg > 2:
            report.passed = False
            report.failures.append(f"probe {pi}: counts ({cpos}, {cneg}) exceed 2")
    if space.is_tree:
        report.certificate_ok = _tree_certificate(params)
        if not report.certificate_ok:
            report.passed = False
            report.failures.append("exact pairwise ray certificate failed")
    return report


def default_probes(
    params: SchottkyParams,
    space: SpaceModel,
    seed: int,
    n_ball: int = 40,
    ball_radius: int = 6,
) -> List[Tuple[Point, Point]]:
    """Structured probe family: orbit-ball points, high powers of set elements,
    and mixed products — the adversarial directions for the counting conditions."""
    rng = np.random.default_rng(np.random.Philox(key=seed))
    probes: List[Tuple[Point, Point]] = []
    o = space.basepoint
    if space.is_tree:
        rank = params.set[0].rank
        for _ in range(n_ball):
            n = int(rng.integers(0, ball_radius + 1))
            letters = []
            for _ in range(n):
                g = int(rng.integers(1, rank + 1))
                letters.append(g if rng.integers(0, 2) else -g)
            probes.append((FreeGroupWord(letters, rank=rank), o))
    else:
        for _ in range(n_ball):
            re, im = rng.normal(0, 2), abs(rng.normal(0, 2)) + 0.1
            probes.append((complex(re, im), o))
    # powers of a few set elements, both directions, as x and as y
    idx = rng.choice(len(params.set), size=min(6, len(params.set)), replace=False)
    for i in idx:
        s = params.set[int(i)]
        for p in (1, 3):
            xp = space.orbit(s**p)
            xm = space.orbit(s**-p)
            probes.append((xp, o))
            probes.append((xm, o))
            probes.append((xp, xm))
    # mixed products of two distinct elements
    for _ in range(8):
        i, j = rng.choice(len(params.set), size=2, replace=False)
        g = params.set[int(i)] * params.set[int(j)].inverse()
        probes.append((space.orbit(g), o))
    return probes


def search_schottky(
    a: GroupElement,
    b: GroupElement,
    target_size: int,
    Kprime: float,
    space: SpaceModel,
    probe_seed: int = 7,
    power_cap: int = 64,
) -> SchottkyParams:
    """Search for a (K, K')-Schottky set among products of a and b.

    Candidates are the 2^10 words phi_1^2 ... phi_10^2 with phi_i in {a, b};
    K is the maximal displacement of these pattern words, and the returned
    elements are the common power of the patterns lifting all nonzero-power
    displacements above K'.
    """
    if a == b:
        raise ValueError("generators must be distinct")
    if not are_independent(a, b, space):
        raise ValueError("generators must be independent loxodromics")
    n_letters = 10
    patterns: List[GroupElement] = []
    for bits in range(2**n_letters):
        g = None
        for t in range(n_letters):
            h = (a if (bits >> t) & 1 == 0 else b) ** 2
            g = h if g is None else g * h
        patterns.append(g)
    if target_size > len(patterns):
        raise ValueError("schottky search exhausted: target size too large")
    K = max(distance(space.basepoint, space.orbit(g), space) for g in patterns)
    taus = [translation_length(g, space) for g in patterns]
    tau_min = min(taus)
    if tau_min <= 0:
        raise ValueError("schottky search exhausted: degenerate pattern")
    power = max(1, int(math.ceil(Kprime / tau_min)))
    chosen = patterns[:target_size]
    for escalation in range(3):
        elements = tuple(g**power for g in chosen)
        params = SchottkyParams(K=K, Kprime=Kprime, set=elements, power=power)
        probes = default_probes(params, space, seed=probe_seed)
        report = verify_schottky(params, space, probes, power_cap=power_cap)
        if report.passed:
            return params
        power *= 2
    raise RuntimeError("schottky search exhausted")


def schottky_subset(params: SchottkyParams, size: int) -> SchottkyParams:
    """Deterministic subset (canonical sorted order); subsets stay Schottky."""
    if size < 2 or size > len(params.set):
        raise ValueError("invalid subset size")
    if isinstance(params.set[0], FreeGroupWord):
        order = sorted(range(len(params.set)), key=lambda i: params.set[i].letters)
    else:
        order = sorted(range(len(params.set)), key=lambda i: (params.set[i].a, params.set[i].b))
    keep = tuple(params.set[i] for i in sorted(order[:size]))
    return SchottkyParams(K=params.K, Kprime=params.Kprime, set=keep, power=params.power)


def reference_setup(space: SpaceModel, target_size: int = 310, probe_seed: int = 7):
    """Standard two-generator setup: constants ladder + verified Schottky set.

    The pattern scale K (max displacement of the 2^10 candidate words) fixes
    the whole constants ladder, whose L0 then serves as the K' handed to the
    search, so the returned elements are powers displacing at least L0.
    Returns (params, constants).
    """
    from .geometry import GromovConstants

    a = FreeGroupWord((1,), rank=space.rank)
    b = FreeGroupWord((2,), rank=space.rank)
    K = 0.0
    for bits in range(2**10):
        g = None
        for t in range(10):
            h = (a if (bits >> t) & 1 == 0 else b) ** 2
            g = h if g is None else g * h
        K = max(K, distance(space.basepoint, space.orbit(g), space))
    constants = GromovConstants.from_schottky(space.delta, K)
    params = search_schottky(a, b, target_size, constants.L0, space, probe_seed=probe_seed)
    return params, constants

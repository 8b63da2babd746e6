"""Gromov-product algebra and the witnessing / gluing / alignment / marking predicates.

All predicates are phrased purely in terms of Gromov products of ordered point
pairs ("segments"), so they work uniformly over any SpaceModel that provides a
distance. Strictness of the `< D` comparisons is delegated to the space model
(exact on the tree, guard-banded on H2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

from .models import Point, SpaceModel, distance


@dataclass(frozen=True)
class GromovConstants:
    """The explicit constants ladder of the delta-hyperbolic predicates.

    C0 is the Schottky constant (reused as the gluing bound); the derived
    constants follow the ladder D0 = 2*C0, E0 = D0 + 4*delta, F0 = 2*E0 +
    3*delta, G0 = 3*F0 + 2*delta, with the minimum segment length L0 at least
    max(L1, L2, L3, 16*D0 + 8*F0 + 2*G0 + 16*delta + 2) where
    L1 = 4*D0 + 6*delta + 1, L2 = 2*E0 + 6*delta + 1, L3 = 4*F0 + 3*delta + 1.
    """

    delta: float
    C0: float
    D0: float
    E0: float
    F0: float
    G0: float
    L0: float

    def __post_init__(self):
        if min(self.delta, self.C0) < 0:
            raise ValueError("constants must be nonnegative")
        eps = 1e-9
        if abs(self.D0 - 2 * self.C0) > eps:
            raise ValueError("D0 must equal 2*C0")
        if abs(self.E0 - (self.D0 + 4 * self.delta)) > eps:
            raise ValueError("E0 must equal D0 + 4*delta")
        if abs(self.F0 - (2 * self.E0 + 3 * self.delta)) > eps:
            raise ValueError("F0 must equal 2*E0 + 3*delta")
        if abs(self.G0 - (3 * self.F0 + 2 * self.delta)) > eps:
            raise ValueError("G0 must equal 3*F0 + 2*delta")
        if self.L0 < self.min_L0() - eps:
            raise ValueError(f"L0 must be >= {self.min_L0()}")

    def min_L0(self) -> float:
        L1 = 4 * self.D0 + 6 * self.delta + 1
        L2 = 2 * self.E0 + 6 * self.delta + 1
        L3 = 4 * self.F0 + 3 * self.delta + 1
        return max(L1, L2, L3, 16 * self.D0 + 8 * self.F0 + 2 * self.G0 + 16 * self.delta + 2)

    @classmethod
    def from_schottky(cls, delta: float, C0: float, L0: Optional[float] = None) -> "GromovConstants":
        """Build the full ladder from delta and the Schottky constant C0."""
        D0 = 2 * C0
        E0 = D0 + 4 * delta
        F0 = 2 * E0 + 3 * delta
        G0 = 3 * F0 + 2 * delta
        stub = cls.__new__(cls)
        object.__setattr__(stub, "delta", delta)
        object.__setattr__(stub, "C0", C0)
        object.__setattr__(stub, "D0", D0)
        object.__setattr__(stub, "E0", E0)
        object.__setattr__(stub, "F0", F0)
        object.__setattr__(stub, "G0", G0)
        object.__setattr__(stub, "L0", 0.0)
        need = stub.min_L0()
        if L0 is None:
            L0 = need
        return cls(delta=delta, C0=C0, D0=D0, E0=E0, F0=F0, G0=G0, L0=L0)


@dataclass(frozen=True)
class Segment:
    """An ordered pair of points; no geodesic realization is assumed."""

    initial: Point
    terminal: Point

    def reversed(self) -> "Segment":
        return Segment(self.terminal, self.initial)

    def length(self, space: SpaceModel) -> float:
        return distance(self.initial, self.terminal, space)


def gromov_product(x: Point, y: Point, z: Point, space: SpaceModel) -> float:
    """(y, z)_x = (d(x,y) + d(x,z) - d(y,z)) / 2."""
    return 0.5 * (distance(x, y, space) + distance(x, z, space) - distance(y, z, space))


def check_four_point(x: Point, y: Point, z: Point, w: Point, space: SpaceModel, delta: float) -> bool:
    """The Gromov inequality (x,y)_w >= min{(x,z)_w, (y,z)_w} - delta."""
    lhs = gromov_product(w, x, y, space)
    rhs = min(gromov_product(w, x, z, space), gromov_product(w, y, z, space)) - delta
    if space.is_tree:
        return lhs >= rhs
    return lhs >= rhs - 1e-9


def segment_product(g1: Segment, g2: Segment, space: SpaceModel) -> float:
    """(g1, g2)_* : the Gromov product of the terminals at g1's initial point.

    Only meaningful when the segments share their initial point; callers that
    need the shared-basepoint semantics should check that themselves.
    """
    return gromov_product(g1.initial, g1.terminal, g2.terminal, space)


def segment_point_product(g: Segment, z: Point, space: SpaceModel) -> float:
    """(g, z)_* : product of g's terminal and z at g's initial point."""
    return gromov_product(g.initial, g.terminal, z, space)


def is_glued(g1: Segment, g2: Segment, C: float, space: SpaceModel) -> bool:
    """C-glued: shared initial point and (g1, g2)_* < C."""
    if space.is_tree:
        if g1.initial != g2.initial:
            return False
    else:
        if distance(g1.initial, g2.initial, space) > 1e-9:
            return False
    return space.strict_less(segment_product(g1, g2, space), C)


def is_witnessed(seg: Segment, chain: Sequence[Segment], D: float, space: SpaceModel) -> bool:
    """[x, y] D-witnessed by segments ([x_i, y_i])_{i=1..n}.

    Three product families, all strict below D:
      (1) (x_{i-1}, x_{i+1})_{x_i}  with x_0 = x, x_{n+1} = y
      (2) (y_{i-1}, y_{i+1})_{y_i}  with y_0 = x, y_{n+1} = y
      (3) (y_{i-1}, y_i)_{x_i} and (x_i, x_{i+1})_{y_i}
    """
    if len(chain) == 0:
        raise ValueError("empty witness chain")
    xs = [seg.initial] + [s.initial for s in chain] + [seg.terminal]
    ys = [seg.initial] + [s.terminal for s in chain] + [seg.terminal]
    n = len(chain)
    lt = space.strict_less
    for i in range(1, n + 1):
        if not lt(gromov_product(xs[i], xs[i - 1], xs[i + 1], space), D):
            return False
        if not lt(gromov_product(ys[i], ys[i - 1], ys[i + 1], space), D):
            return False
        if not lt(gromov_product(xs[i], ys[i - 1], ys[i], space), D):
            return False
        if not lt(gromov_product(ys[i], xs[i], xs[i + 1], space), D):
            return False
    return True


@dataclass
class AlignmentResult:
    aligned: bool
    loci: List[Point]
    failure: Optional[str] = None

    def __bool__(self) -> bool:
        return self.aligned


def is_aligned(
    gammas: Sequence[Segment],
    etas: Sequence[Segment],
    C: float,
    D: float,
    space: SpaceModel,
) -> AlignmentResult:
    """(C, D)-alignment of two segment chains.

    For each i the pair gamma_i, reversed(eta_i) must be C-glued at a locus
    p_i, and for i >= 2 the segment [p_{i-1}, p_i] must be D-witnessed by
    (gamma_{i-1}, eta_i).
    """
    if len(gammas) != len(etas) or len(gammas) == 0:
        raise ValueError("chains must have equal nonzero length")
    loci: List[Point] = []
    for i, (g, e) in enumerate(zip(gammas, etas)):
        if not is_glued(g, e.reversed(), C, space):
            return AlignmentResult(False, loci, failure=f"gluing fails at index {i}")
        loci.append(g.initial)
    for i in range(1, len(gammas)):
        seg = Segment(loci[i - 1], loci[i])
        if not is_witnessed(seg, [gammas[i - 1], etas[i]], D, space):
            return AlignmentResult(False, loci, failure=f"witnessing fails at index {i}")
    return AlignmentResult(True, loci)


def _head_alignment(
    gammas: Sequence[Segment],
    etas: Sequence[Segment],
    C: float,
    D: float,
    space: SpaceModel,
) -> AlignmentResult:
    """Alignment for a head chain: gammas has N segments, etas has N-1
    (indices 2..N); eta_1 is absent so only the gluings at p_2..p_N and the
    witnessing of [p_{i-1}, p_i] by (gamma_{i-1}, eta_i) are required."""
    if len(gammas) == 0:
        raise ValueError("empty gamma chain")
    if len(etas) != len(gammas) - 1:
        raise ValueError("head chain needs |etas| = |gammas| - 1")
    loci: List[Point] = [gammas[0].initial]
    for i, (g, e) in enumerate(zip(gammas[1:], etas), start=1):
        if not is_glued(g, e.reversed(), C, space):
            return AlignmentResult(False, loci, failure=f"gluing fails at index {i}")
        loci.append(g.initial)
    for i in range(1, len(gammas)):
        seg = Segment(loci[i - 1], loci[i])
        if not is_witnessed(seg, [gammas[i - 1], etas[i - 1]], D, space):
            return AlignmentResult(False, loci, failure=f"witnessing fails at index {i}")
    return AlignmentResult(True, loci)


def is_head_marked(
    seg: Segment,
    gammas: Sequence[Segment],
    etas: Sequence[Segment],
    C: float,
    D: float,
    space: SpaceModel,
) -> bool:
    """[p_1, y] is (C, D)-head-marked by (gamma_i)_{1..N}, (eta_i)_{2..N}:
    the head chain is aligned and (reversed(gamma_N), y)_* < C."""
    if len(gammas) == 0:
        raise ValueError("empty gamma chain")
    res = _head_alignment(gammas, etas, C, D, space)
    if not res:
        return False
    tail = gammas[-1].reversed()
    return space.strict_less(segment_point_product(tail, seg.terminal, space), C)


def is_tail_marked(
    seg: Segment,
    gammas: Sequence[Segment],
    etas: Sequence[Segment],
    C: float,
    D: float,
    space: SpaceModel,
) -> bool:
    """[x, p'] tail-marked: mirror of head-marking with (eta_1, x)_* < C.

    Here gammas has N-1 segments (indices 1..N-1) and etas has N; the chain
    ends at the gluing locus of the final eta.
    """
    if len(etas) == 0:
        raise ValueError("empty eta chain")
    if len(gammas) != len(etas) - 1:
        raise ValueError("tail chain needs |gammas| = |etas| - 1")
    # mirror: reverse the roles and the order, then reuse head-marking
    r_gammas = [e.reversed() for e in reversed(etas)]
    r_etas = [g.reversed() for g in reversed(gammas)]
    mirrored = Segment(seg.terminal, seg.initial)
    return is_head_marked(mirrored, r_gammas, r_etas, C, D, space)


def is_fully_marked(
    seg: Segment,
    gammas: Sequence[Segment],
    etas: Sequence[Segment],
    C: float,
    D: float,
    space: SpaceModel,
) -> bool:
    """Fully (C, D)-marked: aligned chains plus (eta_1, x)_* < C and
    (reversed(gamma_N), y)_* < C."""
    res = is_aligned(gammas, etas, C, D, space)
    if not res:
        return False
    head = space.strict_less(segment_point_product(etas[0], seg.initial, space), C)
    tail = space.strict_less(segment_point_product(gammas[-1].reversed(), seg.terminal, space), C)
    return head and tail


def chain_product_bound(points: Sequence[Point], space: SpaceModel, constants: GromovConstants) -> float:
    """Max over ordered triples i < j < k of (p_i, p_k)_{p_j}.

    Callers assert the result < constants.F0 for aligned-and-marked
    configurations. Returns 0 for fewer than 3 points.
    """
    n = len(points)
    if n < 3:
        return 0.0
    import numpy as np

    dmat = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dmat[i, j] = dmat[j, i] = distance(points[i], points[j], space)
    best = 0.0
    for j in range(1, n - 1):
        left = dmat[j, :j]
        right = dmat[j, j + 1 :]
        cross = dmat[:j, j + 1 :]
        prods = 0.5 * (left[:, None] + right[None, :] - cross)
        best = max(best, float(prods.max()))
    return best

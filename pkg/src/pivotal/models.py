"""Concrete space models: the Cayley tree of a free group and the hyperbolic plane.

Points and group elements for the tree model are freely reduced words; the
hyperbolic plane uses upper-half-plane coordinates with real Moebius matrices.
Both models expose exact (tree) or closed-form (H2) distances, translation
lengths, isometry classification and independence tests.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

WORD_CAPACITY = 2**24  # hard cap on reduced word length (predictable memory)

_LETTER_CHARS = "abcdefghijklmnopqrstuvwxyz"


def reduce_letters(letters: Iterable[int]) -> Tuple[int, ...]:
    """Freely reduce a letter sequence (signed generator indices, no zeros)."""
    stack: list[int] = []
    for x in letters:
        if x == 0:
            raise ValueError("letter 0 is not a generator")
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


class FreeGroupWord:
    """A freely reduced word in the free group of the given rank.

    Letters are signed generator indices: 1 = a, -1 = a^{-1}, 2 = b, ...
    Instances are immutable; all operations return new words.
    """

    __slots__ = ("letters", "rank")

    def __init__(self, letters: Iterable[int] = (), rank: int = 2, _reduced: bool = False):
        # _reduced marks letters coming from internal operations: already
        # reduced and validated, so the per-letter check is skipped
        if _reduced:
            self.letters = tuple(letters)
        else:
            self.letters = reduce_letters(letters)
            for x in self.letters:
                if not (1 <= abs(x) <= rank):
                    raise ValueError(f"letter {x} outside rank {rank}")
        self.rank = rank
        if len(self.letters) > WORD_CAPACITY:
            raise OverflowError("word length exceeds capacity 2^24")

    @classmethod
    def from_string(cls, s: str, rank: int = 2) -> "FreeGroupWord":
        """Parse e.g. 'abA' -> a b a^{-1} (uppercase = inverse)."""
        letters = []
        for ch in s:
            if ch.islower():
                letters.append(_LETTER_CHARS.index(ch) + 1)
            else:
                letters.append(-(_LETTER_CHARS.index(ch.lower()) + 1))
        return cls(letters, rank=rank)

    def to_string(self) -> str:
        out = []
        for x in self.letters:
            ch = _LETTER_CHARS[abs(x) - 1]
            out.append(ch if x > 0 else ch.upper())
        return "".join(out)

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "FreeGroupWord") -> "FreeGroupWord":
        u, v = self.letters, other.letters
        k = 0
        m = min(len(u), len(v))
        while k < m and u[len(u) - 1 - k] == -v[k]:
            k += 1
        return FreeGroupWord(u[: len(u) - k] + v[k:], rank=self.rank, _reduced=True)

    def inverse(self) -> "FreeGroupWord":
        return FreeGroupWord(tuple(-x for x in reversed(self.letters)), rank=self.rank, _reduced=True)

    def __pow__(self, n: int) -> "FreeGroupWord":
        if n < 0:
            return self.inverse() ** (-n)
        result = FreeGroupWord((), rank=self.rank, _reduced=True)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def cyclic_reduction(self) -> "FreeGroupWord":
        """The cyclically reduced core: strip matching conjugating ends."""
        w = self.letters
        i, j = 0, len(w)
        while j - i >= 2 and w[i] == -w[j - 1]:
            i += 1
            j -= 1
        return FreeGroupWord(w[i:j], rank=self.rank, _reduced=True)

    def common_prefix_length(self, other: "FreeGroupWord") -> int:
        u, v = self.letters, other.letters
        m = min(len(u), len(v))
        k = 0
        while k < m and u[k] == v[k]:
            k += 1
        return k

    def __eq__(self, other) -> bool:
        return isinstance(other, FreeGroupWord) and self.letters == other.letters

    def __hash__(self) -> int:
        return hash(self.letters)

    def __repr__(self) -> str:
        s = self.to_string()
        return f"FreeGroupWord({s!r})" if len(s) <= 40 else f"FreeGroupWord(<{len(s)} letters>)"


@dataclass(frozen=True)
class MoebiusIsometry:
    """Real Moebius transformation of the upper half plane, normalized to det=1."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if det <= 0:
            raise ValueError("orientation-reversing or singular matrix")
        r = math.sqrt(det)
        object.__setattr__(self, "a", self.a / r)
        object.__setattr__(self, "b", self.b / r)
        object.__setattr__(self, "c", self.c / r)
        object.__setattr__(self, "d", self.d / r)

    def __mul__(self, other: "MoebiusIsometry") -> "MoebiusIsometry":
        return MoebiusIsometry(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "MoebiusIsometry":
        return MoebiusIsometry(self.d, -self.b, -self.c, self.a)

    def __pow__(self, n: int) -> "MoebiusIsometry":
        if n < 0:
            return self.inverse() ** (-n)
        result = MoebiusIsometry(1.0, 0.0, 0.0, 1.0)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def apply(self, z: complex) -> complex:
        return (self.a * z + self.b) / (self.c * z + self.d)

    @property
    def trace(self) -> float:
        return self.a + self.d


GroupElement = Union[FreeGroupWord, MoebiusIsometry]
Point = Union[FreeGroupWord, complex]

H2_DELTA = 0.7  # safe hyperbolicity constant for H^2, revalidated by sampling
H2_EPS = 1e-9


@dataclass
class SpaceModel:
    """A concrete delta-hyperbolic space with basepoint and group action."""

    kind: str  # "tree" or "hyperbolic_plane"
    rank: int = 2
    delta: float = 0.0
    basepoint: Point = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.kind == "tree":
            self.delta = 0.0
            if self.basepoint is None:
                self.basepoint = FreeGroupWord((), rank=self.rank)
        elif self.kind == "hyperbolic_plane":
            if self.basepoint is None:
                self.basepoint = 1j
            if self.delta == 0.0:
                self.delta = H2_DELTA
        else:
            raise ValueError(f"unknown space kind {self.kind!r}")

    @property
    def is_tree(self) -> bool:
        return self.kind == "tree"

    def orbit(self, g: GroupElement) -> Point:
        """The orbit point g.o of the basepoint."""
        if self.is_tree:
            return g  # stabilizer of o is trivial; identify g.o with g
        return g.apply(self.basepoint)

    def strict_less(self, value: float, bound: float) -> bool:
        """Paper inequalities "< D": strict on the tree (exact arithmetic),
        strict with a 1e-9 guard band on H2 floats."""
        if self.is_tree:
            return value < bound
        return value < bound - H2_EPS


def tree_model(rank: int = 2) -> SpaceModel:
    return SpaceModel(kind="tree", rank=rank)


def hyperbolic_plane_model() -> SpaceModel:
    return SpaceModel(kind="hyperbolic_plane")


def distance(x: Point, y: Point, space: SpaceModel) -> float:
    """Metric of the model: word metric on the tree, arccosh formula on H2."""
    if space.is_tree:
        if not (isinstance(x, FreeGroupWord) and isinstance(y, FreeGroupWord)):
            raise TypeError("tree model points must be FreeGroupWord")
        k = x.common_prefix_length(y)
        return float(len(x) + len(y) - 2 * k)
    if isinstance(x, FreeGroupWord) or isinstance(y, FreeGroupWord):
        raise TypeError("mixed model points")
    num = abs(x - y) ** 2
    den = 2.0 * x.imag * y.imag
    return math.acosh(1.0 + num / den)


def translation_length(g: GroupElement, space: SpaceModel) -> float:
    """Stable displacement tau(g) = lim d(o, g^n o)/n, by closed form."""
    if space.is_tree:
        return float(len(g.cyclic_reduction()))
    t = abs(g.trace)
    if t <= 2.0:
        return 0.0
    return 2.0 * math.acosh(t / 2.0)


def translation_length_limit_oracle(g: GroupElement, space: SpaceModel, n_max: int) -> float:
    """Independent oracle: d(o, g^{n_max} o)/n_max (converges to tau(g))."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if space.is_tree:
        if len(g) * n_max > WORD_CAPACITY:
            raise OverflowError("g^n_max exceeds word capacity")
        gn = g**n_max
        return distance(space.basepoint, space.orbit(gn), space) / n_max
    # renormalized power: raw entries of g^n overflow floats long before
    # n = 1000, so accumulate the scale separately and use
    # cosh d(i, M i) = |M|_F^2 / 2 for det(M) = 1
    M = np.array([[g.a, g.b], [g.c, g.d]], dtype=float)
    P = np.eye(2)
    s = 0.0
    for _ in range(n_max):
        P = P @ M
        norm = math.sqrt(float((P * P).sum()))
        P /= norm
        s += math.log(norm)
    q_log = 2.0 * s + math.log(float((P * P).sum()) / 2.0)
    if q_log < 30.0:
        d = math.acosh(max(math.exp(q_log), 1.0))
    else:
        d = q_log + math.log(2.0)  # acosh(q) = log(2q) + O(q^-2)
    return d / n_max


def classify_isometry(g: GroupElement, space: SpaceModel) -> str:
    """'elliptic', 'parabolic' or 'loxodromic'."""
    if space.is_tree:
        # free groups are torsion free and tree actions have no parabolics
        return "loxodromic" if len(g.cyclic_reduction()) > 0 else "elliptic"
    t = abs(g.trace)
    if t < 2.0 - H2_EPS:
        return "elliptic"
    if t <= 2.0 + H2_EPS:
        # identity has trace 2 but fixes everything; treat as elliptic
        if abs(g.b) < H2_EPS and abs(g.c) < H2_EPS and abs(abs(g.a) - 1) < H2_EPS:
            return "elliptic"
        return "parabolic"
    return "loxodromic"


def _h2_fixed_points(g: MoebiusIsometry) -> Tuple[float, float]:
    # boundary fixed points solve c t^2 + (d - a) t - b = 0
    if abs(g.c) < H2_EPS:
        # one fixed point at infinity
        t = g.b / (g.d - g.a)
        return (t, math.inf)
    disc = (g.d - g.a) ** 2 + 4.0 * g.b * g.c
    r = math.sqrt(max(disc, 0.0))
    t1 = (-(g.d - g.a) + r) / (2.0 * g.c)
    t2 = (-(g.d - g.a) - r) / (2.0 * g.c)
    return (t1, t2)


def are_independent(g: GroupElement, h: GroupElement, space: SpaceModel) -> bool:
    """Disjoint fixed-point sets for two loxodromics."""
    if classify_isometry(g, space) != "loxodromic" or classify_isometry(h, space) != "loxodromic":
        raise ValueError("are_independent requires loxodromic inputs")
    if space.is_tree:
        # in a free group two loxodromics share an axis iff they commute
        return g * h != h * g
    fg = _h2_fixed_points(g)
    fh = _h2_fixed_points(h)
    for p in fg:
        for q in fh:
            if p == math.inf and q == math.inf:
                return False
            if p != math.inf and q != math.inf and abs(p - q) < H2_EPS:
                return False
    return True

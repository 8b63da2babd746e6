"""Exact incremental geometry for long trajectories on the Cayley tree.

A trajectory is maintained as a reduced-word stack. Alongside the stack we
keep, for every depth, the letter most recently written there ("previous
occupant"), which persists across pops. Appending a reduced piece with maximal
cancellation changes the content at some first depth p (or at no depth, when
the piece only pops or rewrites identical letters); those first-change depths
are recorded as a time-ordered event list.

Key fact (exactness): for two recorded marks i < j with stack depths d_i, d_j,
the common prefix length of their reduced words is

    cp(i, j) = min(d_i, d_j, min{event depths strictly after mark i up to j}).

Cancellation maximality plus reducedness of the appended piece guarantee that
the first letter pushed after a cancellation always differs from the previous
occupant, so the event list captures every real content change below any mark
depth. This gives exact pairwise distances between thousands of marks on
multi-million-letter trajectories in O(total letters).
"""

from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


INF_POS = np.iinfo(np.int64).max


def reduce_array(letters: np.ndarray) -> np.ndarray:
    """Freely reduce an int8 letter array (signed generator indices)."""
    return _reduce_array(np.ascontiguousarray(letters, dtype=np.int8))


@njit(cache=True)
def _reduce_array(letters):
    out = np.empty(letters.shape[0], dtype=np.int8)
    depth = 0
    for i in range(letters.shape[0]):
        x = letters[i]
        if depth > 0 and out[depth - 1] == -x:
            depth -= 1
        else:
            out[depth] = x
            depth += 1
    return out[:depth].copy()


@njit(cache=True)
def _append_piece(stack, depth, piece, push_depth, push_letter, n_push):
    """Append a reduced piece to the stack with maximal cancellation.

    Logs every surviving letter write into the push arrays. Returns
    (new_depth, floor, n_push) where floor is the depth after cancellation.
    """
    n = piece.shape[0]
    k = 0
    while k < n and k < depth and stack[depth - 1 - k] == -piece[k]:
        k += 1
    depth -= k
    floor = depth
    for i in range(k, n):
        x = piece[i]
        stack[depth] = x
        push_depth[n_push] = depth
        push_letter[n_push] = x
        n_push += 1
        depth += 1
    return depth, floor, n_push


@njit(cache=True)
def _content_at(starts, row_push, push_letter, p, t):
    """Letter at stack depth p just before push-time t (position must be
    occupied then: the last push at p with index < t)."""
    lo, hi = starts[p], starts[p + 1]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if row_push[mid] < t:
            lo = mid
        else:
            hi = mid
    return push_letter[row_push[lo]]


@njit(cache=True)
def _extend_cp_matrix(cand, depths, times, starts, row_push, push_letter):
    """Exact common-prefix matrix from the cancellation-floor candidates.

    Positions below the floor are untouched between the marks; from the floor
    upward the contents may have been popped and rewritten identically, so
    compare the actual letters until they diverge."""
    M = depths.shape[0]
    for a in range(M):
        for b in range(a + 1, M):
            c = cand[a, b]
            lim = min(depths[a], depths[b])
            while c < lim and _content_at(
                starts, row_push, push_letter, c, times[a]
            ) == _content_at(starts, row_push, push_letter, c, times[b]):
                c += 1
            cand[a, b] = c
            cand[b, a] = c
    return cand


class TreePath:
    """Growing reduced word over the free group with fast mark-distance queries.

    Distances need the exact common prefix of two past stack states. The
    cancellation floor (min depth reached between the marks) is a lower bound
    that composes over time windows; it can undershoot when a branch is popped
    and later rewritten with the same letters, so queries extend it by
    comparing logged letter writes depth by depth.
    """

    def __init__(self, rank: int = 2, capacity: int = 1 << 16, keep_pieces: bool = True):
        self.rank = rank
        self.stack = np.zeros(capacity, dtype=np.int8)
        self.depth = 0
        self.floors: List[int] = []  # cancellation floor per nonempty append
        self.mark_depth: List[int] = []
        self.mark_event: List[int] = []  # len(self.floors) at mark time
        self.mark_push: List[int] = []  # push count at mark time
        self.push_depth = np.zeros(capacity, dtype=np.int64)
        self.push_letter = np.zeros(capacity, dtype=np.int8)
        self.n_push = 0
        self._index = None  # lazy per-depth CSR over the push log
        self.keep_pieces = keep_pieces
        self.pieces: List[np.ndarray] = []
        self.mark_piece: List[int] = []  # pieces appended before each mark

    def _ensure(self, extra: int) -> None:
        need = self.depth + extra
        if need > self.stack.shape[0]:
            cap = max(2 * self.stack.shape[0], need + 1024)
            new_stack = np.zeros(cap, dtype=np.int8)
            new_stack[: self.stack.shape[0]] = self.stack
            self.stack = new_stack
        need = self.n_push + extra
        if need > self.push_depth.shape[0]:
            cap = max(2 * self.push_depth.shape[0], need + 1024)
            new_pd = np.zeros(cap, dtype=np.int64)
            new_pd[: self.n_push] = self.push_depth[: self.n_push]
            new_pl = np.zeros(cap, dtype=np.int8)
            new_pl[: self.n_push] = self.push_letter[: self.n_push]
            self.push_depth = new_pd
            self.push_letter = new_pl

    def append(self, piece: np.ndarray) -> None:
        """Append an already-reduced piece (int8 array)."""
        piece = np.ascontiguousarray(piece, dtype=np.int8)
        if piece.shape[0] == 0:
            if self.keep_pieces:
                self.pieces.append(piece)
            return
        self._ensure(piece.shape[0])
        self.depth, floor, self.n_push = _append_piece(
            self.stack, self.depth, piece, self.push_depth, self.push_letter, self.n_push
        )
        self.floors.append(floor)
        self._index = None
        if self.keep_pieces:
            self.pieces.append(piece)

    def append_raw(self, letters: np.ndarray) -> None:
        """Reduce an arbitrary letter array and append it as one piece."""
        self.append(reduce_array(letters))

    def mark(self) -> int:
        self.mark_depth.append(self.depth)
        self.mark_event.append(len(self.floors))
        self.mark_push.append(self.n_push)
        if self.keep_pieces:
            self.mark_piece.append(len(self.pieces))
        return len(self.mark_depth) - 1

    def fork(self) -> "TreePath":
        """Deep copy for what-if replays sharing the current prefix."""
        other = TreePath.__new__(TreePath)
        other.rank = self.rank
        other.stack = self.stack.copy()
        other.depth = self.depth
        other.floors = list(self.floors)
        other.mark_depth = list(self.mark_depth)
        other.mark_event = list(self.mark_event)
        other.mark_push = list(self.mark_push)
        other.push_depth = self.push_depth.copy()
        other.push_letter = self.push_letter.copy()
        other.n_push = self.n_push
        other._index = None
        other.keep_pieces = self.keep_pieces
        other.pieces = list(self.pieces)
        other.mark_piece = list(self.mark_piece)
        return other

    # -- queries ------------------------------------------------------------

    def n_marks(self) -> int:
        return len(self.mark_depth)

    def _push_index(self):
        """CSR layout of the push log grouped by depth (time order kept)."""
        if self._index is None:
            pd = self.push_depth[: self.n_push]
            row_push = np.argsort(pd, kind="stable").astype(np.int64)
            top = int(pd.max()) if self.n_push else 0
            starts = np.searchsorted(pd[row_push], np.arange(top + 2))
            starts = starts.astype(np.int64)
            self._index = (starts, row_push)
        return self._index

    def cp(self, i: int, j: int) -> int:
        """Common prefix length of the reduced words at marks i and j (exact)."""
        if i == j:
            return self.mark_depth[i]
        if i > j:
            i, j = j, i
        lo, hi = self.mark_event[i], self.mark_event[j]
        m = min(self.floors[lo:hi]) if hi > lo else INF_POS
        c = min(self.mark_depth[i], self.mark_depth[j], m)
        lim = min(self.mark_depth[i], self.mark_depth[j])
        if c >= lim:
            return c
        starts, row_push = self._push_index()
        ti, tj = self.mark_push[i], self.mark_push[j]
        while c < lim and _content_at(
            starts, row_push, self.push_letter, c, ti
        ) == _content_at(starts, row_push, self.push_letter, c, tj):
            c += 1
        return c

    def dist(self, i: int, j: int) -> int:
        return self.mark_depth[i] + self.mark_depth[j] - 2 * self.cp(i, j)

    def gromov(self, base: int, i: int, j: int) -> float:
        """(m_i, m_j)_{m_base} over mark indices."""
        return 0.5 * (self.dist(base, i) + self.dist(base, j) - self.dist(i, j))

    def dist_matrix(self, marks: Sequence[int]) -> np.ndarray:
        """Pairwise distance matrix for an increasing list of mark indices."""
        marks = list(marks)
        M = len(marks)
        depths = np.array([self.mark_depth[m] for m in marks], dtype=np.int64)
        fl = np.array(self.floors, dtype=np.int64)
        # min cancellation floor between consecutive chosen marks (composes)
        seg = np.full(M, INF_POS, dtype=np.int64)
        for t in range(1, M):
            lo, hi = self.mark_event[marks[t - 1]], self.mark_event[marks[t]]
            if hi > lo:
                seg[t] = fl[lo:hi].min()
        cand = np.zeros((M, M), dtype=np.int64)
        for a in range(M - 1):
            run = np.minimum.accumulate(seg[a + 1 :])
            cand[a, a + 1 :] = np.minimum(np.minimum(depths[a], depths[a + 1 :]), run)
        times = np.array([self.mark_push[m] for m in marks], dtype=np.int64)
        starts, row_push = self._push_index()
        cp = _extend_cp_matrix(cand, depths, times, starts, row_push, self.push_letter)
        np.fill_diagonal(cp, depths)
        return depths[:, None] + depths[None, :] - 2 * cp

    def word_at(self, mark: int) -> np.ndarray:
        """Reconstruct the full reduced word at a mark (replay; O(prefix))."""
        if not self.keep_pieces:
            raise RuntimeError("piece log disabled; cannot replay")
        scratch = TreePath(rank=self.rank, capacity=max(self.depth + 16, 1024), keep_pieces=False)
        for p in self.pieces[: self.mark_piece[mark]]:
            scratch.append(p)
        return scratch.stack[: scratch.depth].copy()

    def current_word(self) -> np.ndarray:
        return self.stack[: self.depth].copy()


# -- per-letter streaming kernels for plain random walks -----------------------


@njit(cache=True)
def _walk_depths(letters):
    """Depths d(o, w_k o) after each step of a letter stream."""
    stack = np.zeros(letters.shape[0] + 1, dtype=np.int8)
    depth = 0
    depths = np.empty(letters.shape[0], dtype=np.int64)
    for i in range(letters.shape[0]):
        x = letters[i]
        if depth > 0 and stack[depth - 1] == -x:
            depth -= 1
        else:
            stack[depth] = x
            depth += 1
        depths[i] = depth
    return depths


@njit(cache=True)
def _walk_checkpoint_stats(letters, checkpoints):
    """Stream a letter walk; at each checkpoint record depth, cyclic-reduction
    length (tau of the prefix product) and the min depth reached since the
    previous checkpoint (a lower bound on common prefixes, not exact).

    Returns (depths, taus, minseg) aligned with checkpoints.
    """
    n = letters.shape[0]
    stack = np.zeros(n + 1, dtype=np.int8)
    depth = 0
    m = checkpoints.shape[0]
    depths = np.empty(m, dtype=np.int64)
    taus = np.empty(m, dtype=np.int64)
    minseg = np.empty(m, dtype=np.int64)
    ci = 0
    run_min = INF_POS
    for i in range(n):
        x = letters[i]
        if depth > 0 and stack[depth - 1] == -x:
            depth -= 1
            if depth < run_min:
                run_min = depth
        else:
            stack[depth] = x
            depth += 1
        while ci < m and checkpoints[ci] == i + 1:
            depths[ci] = depth
            strip = 0
            while 2 * strip + 1 < depth and stack[strip] == -stack[depth - 1 - strip]:
                strip += 1
            taus[ci] = depth - 2 * strip
            minseg[ci] = run_min
            run_min = INF_POS
            ci += 1
    return depths, taus, minseg


@njit(cache=True)
def _walk_fixed_point_products(letters, target):
    """Per-step Gromov products (x, w_k o)_o for a fixed reduced word x."""
    n = letters.shape[0]
    stack = np.zeros(n + 1, dtype=np.int8)
    depth = 0
    t = target.shape[0]
    ca = 0  # content agreement with target (positions 0..ca-1 match)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        x = letters[i]
        if depth > 0 and stack[depth - 1] == -x:
            depth -= 1
            if depth < ca:
                ca = depth
        else:
            stack[depth] = x
            if depth == ca and ca < t and target[ca] == x:
                ca += 1
            depth += 1
        out[i] = ca if ca < depth else depth
        if out[i] > t:
            out[i] = t
    return out


@njit(cache=True)
def _mutual_products(letters_a, letters_b):
    """Per-step products (u_k o, v_k o)_o for two letter streams walked in
    lockstep (used for the two-sided walk diagnostics)."""
    n = min(letters_a.shape[0], letters_b.shape[0])
    sa = np.zeros(n + 1, dtype=np.int8)
    sb = np.zeros(n + 1, dtype=np.int8)
    da = 0
    db = 0
    ca = 0  # agreement length of the two stacks
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        x = letters_a[i]
        if da > 0 and sa[da - 1] == -x:
            da -= 1
        else:
            sa[da] = x
            da += 1
        y = letters_b[i]
        if db > 0 and sb[db - 1] == -y:
            db -= 1
        else:
            sb[db] = y
            db += 1
        if ca > da:
            ca = da
        if ca > db:
            ca = db
        while ca < da and ca < db and sa[ca] == sb[ca]:
            ca += 1
        out[i] = ca
    return out

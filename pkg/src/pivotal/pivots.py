"""Inductive pivotal-time construction over block trajectories.

Each Schottky block a^2 c^2 b^2 of a trajectory carries five loci

    y2m --a--> y1m --a--> y0m --c^2--> y0p --b^2--> y2p

(read minus/plus for m/p). Processing block n either gains a pivotal time
(three C0 Gromov-product conditions at the block boundaries), backtracks to a
head-marked subsequence of earlier pivotal times, or resets to the basepoint.
All products are evaluated exactly on the Cayley tree through TreePath marks,
so trajectories with millions of letters stay cheap.

Only the tree model is supported here; the block machinery relies on exact
mark arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import GromovConstants
from .models import FreeGroupWord, SpaceModel
from .treepath import TreePath, reduce_array
from .walk import Trajectory


@dataclass(frozen=True)
class Loci:
    """TreePath mark indices of the five block loci, in path order."""

    y2m: int
    y1m: int
    y0m: int
    y0p: int
    y2p: int


class BlockPath:
    """A trajectory laid out on a TreePath with marks at every block locus.

    Success blocks contribute seven pieces (a, a, c, c, b, b and nothing for
    the trailing filler, which is merged with subsequent failure blocks); runs
    of failure blocks are concatenated into single filler pieces so the number
    of appends stays proportional to the number of Schottky blocks.
    """

    def __init__(self, trajectory: Trajectory):
        m = trajectory.model
        if m.space.kind != "tree":
            raise NotImplementedError("block pivot machinery requires the tree model")
        est = int(trajectory.rho.sum()) * 6 * m.N + sum(
            f.shape[0] for f in trajectory.fillers
        ) + trajectory.partial.shape[0] + 1024
        self.trajectory = trajectory
        self.path = TreePath(rank=m.space.rank, capacity=est)
        self.o_mark = self.path.mark()
        self.loci: List[Loci] = []  # per success, in order
        self.end_mark = -1
        self._build()

    def _build(self) -> None:
        t = self.trajectory
        m = t.model
        path = self.path
        pending: List[np.ndarray] = []
        fail_i = 0
        succ_i = 0

        def flush():
            nonlocal pending
            if pending:
                path.append_raw(np.concatenate(pending))
                pending = []

        back = t.direction == "backward"
        c = m.c_letters if not back else -m.c_letters[::-1]
        for i in range(t.n_blocks):
            if t.rho[i]:
                flush()
                a = m.S_letters[t.a_idx[succ_i]]
                b = m.S_letters[t.b_idx[succ_i]]
                if back:
                    a, b = -a[::-1], -b[::-1]
                y2m = path.mark()
                path.append(a)
                y1m = path.mark()
                path.append(a)
                y0m = path.mark()
                path.append(c)
                path.append(c)
                y0p = path.mark()
                path.append(b)
                path.append(b)
                y2p = path.mark()
                self.loci.append(Loci(y2m, y1m, y0m, y0p, y2p))
                succ_i += 1
            else:
                pending.append(t.fillers[fail_i])
                fail_i += 1
        pending.append(t.partial)
        flush()
        self.end_mark = self.path.mark()

    @property
    def n_success(self) -> int:
        return len(self.loci)

    def next_start(self, j: int) -> int:
        """Mark playing the role of the (j+1)-th block start (1-based j);
        the walk endpoint for the last block."""
        if j < self.n_success:
            return self.loci[j].y2m
        return self.end_mark


def get_block_path(trajectory: Trajectory) -> BlockPath:
    bp = trajectory.__dict__.get("_block_path")
    if bp is None:
        bp = BlockPath(trajectory)
        trajectory.__dict__["_block_path"] = bp
    return bp


@dataclass
class PivotRecord:
    """State of the construction after processing some prefix of blocks."""

    P: List[int] = field(default_factory=list)  # pivotal times, 1-based successes
    z: int = 0  # TreePath mark of the moving point (o_mark initially)
    n_processed: int = 0
    loci: Dict[int, Loci] = field(default_factory=dict)
    history: List[Tuple[str, int]] = field(default_factory=list)  # (kind, value)
    sizes: List[int] = field(default_factory=list)  # |P| after each step
    z_trace: List[int] = field(default_factory=list)  # z before each step
    path: Optional[BlockPath] = None


def _pair_glued(bp: BlockPath, j: int, C0: float) -> bool:
    """Gluing at locus y1m of success j: (y0m, y2m)_{y1m} < C0."""
    lo = bp.loci[j - 1]
    return bp.path.gromov(lo.y1m, lo.y0m, lo.y2m) < C0


def _pair_witnessed(bp: BlockPath, prev_j: int, j: int, first: bool, D0: float) -> bool:
    """[p_{k-1}, p_k] D0-witnessed by (gamma_{k-1}, eta_k).

    gamma_1 = [y0p, y2p] of the first element, gamma_k = [y1m, y0m] later;
    eta_k = [y2m, y1m] of element k.
    """
    g = bp.path.gromov
    la, lb = bp.loci[prev_j - 1], bp.loci[j - 1]
    if first:
        g_init, g_term = la.y0p, la.y2p
    else:
        g_init, g_term = la.y1m, la.y0m
    e_init, e_term = lb.y2m, lb.y1m
    p_prev, p_cur = g_init, e_term
    xs = (p_prev, g_init, e_init, p_cur)
    ys = (p_prev, g_term, e_term, p_cur)
    for i in (1, 2):
        if g(xs[i], xs[i - 1], xs[i + 1]) >= D0:
            return False
        if g(ys[i], ys[i - 1], ys[i + 1]) >= D0:
            return False
        if g(xs[i], ys[i - 1], ys[i]) >= D0:
            return False
        if g(ys[i], xs[i], xs[i + 1]) >= D0:
            return False
    return True


def _head_ok(bp: BlockPath, j: int, y_next: int, C0: float) -> bool:
    """Terminal head condition: (y1m_j, y_next)_{y0m_j} < C0."""
    lo = bp.loci[j - 1]
    return bp.path.gromov(lo.y0m, lo.y1m, y_next) < C0


def head_marked_sequence(
    bp: BlockPath, seq: Sequence[int], y_next: int, C0: float, D0: float
) -> bool:
    """Full head-marking check for a candidate backtrack sequence (mark level)."""
    if len(seq) < 2:
        return False
    for k in range(1, len(seq)):
        if not _pair_glued(bp, seq[k], C0):
            return False
        if not _pair_witnessed(bp, seq[k - 1], seq[k], first=(k == 1), D0=D0):
            return False
    return _head_ok(bp, seq[-1], y_next, C0)


def _find_backtrack(
    bp: BlockPath, P: Sequence[int], y_next: int, C0: float, D0: float
) -> Optional[List[int]]:
    """Greedy search for the backtrack sequence with maximal i(1).

    For each candidate i(1) in descending order, extend left-to-right with
    every later pivotal time whose gluing/witnessing conditions hold, then
    trim from the right until the terminal head condition is met.
    """
    P = list(P)
    for pos in range(len(P) - 1, -1, -1):
        i1 = P[pos]
        seq = [i1]
        for j in P[pos + 1 :]:
            if _pair_glued(bp, j, C0) and _pair_witnessed(
                bp, seq[-1], j, first=(len(seq) == 1), D0=D0
            ):
                seq.append(j)
        while len(seq) >= 2:
            if _head_ok(bp, seq[-1], y_next, C0):
                return seq
            seq.pop()
    return None


def exhaustive_backtrack(
    bp: BlockPath, P: Sequence[int], y_next: int, C0: float, D0: float
) -> Optional[List[int]]:
    """Reference search over all increasing subsequences (test cross-check)."""
    from itertools import combinations

    P = list(P)
    best: Optional[List[int]] = None
    for r in range(2, len(P) + 1):
        for seq in combinations(P, r):
            if head_marked_sequence(bp, list(seq), y_next, C0, D0):
                if best is None or seq[0] > best[0]:
                    best = list(seq)
    return best


def advance_pivots(
    record: PivotRecord,
    trajectory: Trajectory,
    n: int,
    constants: GromovConstants,
    space: SpaceModel,
) -> PivotRecord:
    """Process success block n (1-based), updating pivotal times and z.

    Case (1) fires when (z_{n-1}, y_{n,t}^-)_{y_{n,2}^-} < C0 for t = 0, 1 and
    (y_{n,0}^+, y_{n+1,2}^-)_{y_{n,2}^+} < C0: the time is gained. Otherwise a
    head-marked subsequence of earlier pivotal times is searched (backtrack);
    failing that, everything resets.
    """
    if space.kind != "tree":
        raise NotImplementedError("pivot construction requires the tree model")
    bp = record.path
    if bp is None:
        bp = get_block_path(trajectory)
        record.path = bp
        record.z = bp.o_mark
    if n != record.n_processed + 1:
        raise ValueError("blocks must be processed in order")
    if n > bp.n_success:
        raise ValueError("missing loci: block not materialized")
    C0, D0 = constants.C0, constants.D0
    lo = bp.loci[n - 1]
    record.loci[n] = lo
    record.z_trace.append(record.z)
    y_next = bp.next_start(n)
    g = bp.path.gromov
    case1 = (
        g(lo.y2m, record.z, lo.y0m) < C0
        and g(lo.y2m, record.z, lo.y1m) < C0
        and g(lo.y2p, lo.y0p, y_next) < C0
    )
    if case1:
        record.P.append(n)
        record.z = lo.y0p
        record.history.append(("gain", 1))
    else:
        seq = _find_backtrack(bp, record.P, y_next, C0, D0)
        if seq is not None:
            i1 = seq[0]
            depth = len(record.P) - record.P.index(i1) - 1
            record.P = [p for p in record.P if p <= i1]
            record.z = bp.loci[seq[-1] - 1].y1m
            record.history.append(("backtrack", depth))
        else:
            record.P = []
            record.z = bp.o_mark
            record.history.append(("reset", 0))
    record.n_processed = n
    record.sizes.append(len(record.P))
    return record


def run_pivots(
    trajectory: Trajectory,
    constants: GromovConstants,
    space: SpaceModel,
    upto: Optional[int] = None,
) -> PivotRecord:
    """Run the construction over the first `upto` success blocks (default all)."""
    bp = get_block_path(trajectory)
    record = PivotRecord(path=bp, z=bp.o_mark)
    stop = bp.n_success if upto is None else min(upto, bp.n_success)
    for n in range(1, stop + 1):
        advance_pivots(record, trajectory, n, constants, space)
    return record


def compute_loci(
    trajectory: Trajectory, i: int, space: SpaceModel
) -> Tuple[FreeGroupWord, ...]:
    """The five loci of success block i (1-based) as orbit words.

    Materializes the actual group elements by replay; meant for inspection and
    tests, not the hot path.
    """
    bp = get_block_path(trajectory)
    if i < 1 or i > bp.n_success:
        raise ValueError("block is not a pivot-eligible (Schottky) block")
    lo = bp.loci[i - 1]
    rank = trajectory.model.space.rank
    out = []
    for mark in (lo.y2m, lo.y1m, lo.y0m, lo.y0p, lo.y2p):
        lets = bp.path.word_at(mark)
        out.append(FreeGroupWord(tuple(int(x) for x in lets), rank=rank, _reduced=True))
    return tuple(out)


# -- eventual pivotal times ----------------------------------------------------


@dataclass
class EventualPivots:
    Q: List[int]
    P_n: List[int]
    n: int
    horizon: int
    min_size: int
    stable_within_horizon: bool


def eventual_pivots(
    trajectory: Trajectory,
    n: int,
    constants: GromovConstants,
    space: SpaceModel,
    horizon: Optional[int] = None,
) -> EventualPivots:
    """First min_{n <= k <= H} |P_k| elements of P_n (block-time indexing).

    n and horizon count 6N-blocks; P only changes at Schottky blocks, so the
    minimum runs over the successes in (n, H] plus the value at n. The result
    over-approximates the true intersection of all future pivotal sets and is
    certified only up to the horizon.
    """
    H = 2 * n if horizon is None else horizon
    if H <= n:
        raise ValueError("horizon must exceed n")
    if trajectory.n_blocks < H:
        raise ValueError("trajectory shorter than the lookahead horizon")
    bp = get_block_path(trajectory)
    succ_blocks = np.flatnonzero(trajectory.rho) + 1  # block index of each success
    upto = int(np.searchsorted(succ_blocks, H, side="right"))
    record = run_pivots(trajectory, constants, space, upto=upto)
    k_n = int(np.searchsorted(succ_blocks, n, side="right"))  # successes within n blocks
    if k_n == 0:
        return EventualPivots([], [], n, H, 0, True)
    # P at block-time n is the state after success k_n; re-derive its snapshot
    snap = run_pivots(trajectory, constants, space, upto=k_n).P
    m = record.sizes[k_n - 1]
    for t in range(k_n, upto):
        m = min(m, record.sizes[t])
    Q = snap[:m]
    return EventualPivots(Q, snap, n, H, m, stable_within_horizon=(m == len(snap)))


@dataclass
class DecayReport:
    n_grid: List[int]
    kappa1: float
    freq_P: List[float]
    freq_Q: List[float]
    slope_P: float
    slope_Q: float
    r2_P: float
    r2_Q: float
    horizon: int
    trials: int
    seed: int


def _logfit(n_grid: np.ndarray, freqs: np.ndarray, floor: float) -> Tuple[float, float]:
    y = np.log(np.maximum(freqs, floor))
    slope, intercept = np.polyfit(n_grid, y, 1)
    resid = y - (slope * n_grid + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), r2


def pivot_decay(
    model,
    n_grid: Sequence[int],
    trials: int,
    seed: int,
    constants: GromovConstants,
    space: SpaceModel,
    horizon: Optional[int] = None,
) -> DecayReport:
    """Empirical decay of P(|P_n| <= kappa1 * n) over a grid of block-times n,
    with kappa1 set to half the empirical per-block pivot density.

    Also tracks the horizon-certified eventual sets: |Q_n| at block-time n is
    the running minimum of |P_k| over n <= k <= H.  Frequencies of zero are
    floored at 1/(2*trials) before the log-linear fit.
    """
    from .walk import sample_trajectory

    n_grid = sorted(int(n) for n in n_grid)
    n_max = n_grid[-1]
    H = n_max + n_max // 2 if horizon is None else horizon
    if H <= n_max:
        raise ValueError("horizon must exceed the largest grid point")
    sizes_P = np.zeros((trials, len(n_grid)))
    sizes_Q = np.zeros((trials, len(n_grid)))
    density = np.zeros(trials)
    steps = H * model.block_steps
    grid_arr = np.array(n_grid)
    for t in range(trials):
        traj = sample_trajectory(model, steps, seed, stream=t)
        record = run_pivots(traj, constants, space)
        sizes = np.array(record.sizes, dtype=float)
        succ = np.flatnonzero(traj.rho) + 1
        sufmin = np.minimum.accumulate(sizes[::-1])[::-1]
        k = np.searchsorted(succ, grid_arr, side="right")  # successes by time n
        has = k > 0
        sizes_P[t, has] = sizes[k[has] - 1]
        sizes_Q[t, has] = sufmin[k[has] - 1]
        k_max = int(np.searchsorted(succ, n_max, side="right"))
        density[t] = sizes[k_max - 1] / n_max if k_max > 0 else 0.0
    kappa1 = 0.5 * float(density.mean())
    thresh = kappa1 * grid_arr
    freq_P = (sizes_P <= thresh).mean(axis=0)
    freq_Q = (sizes_Q <= thresh).mean(axis=0)
    floor = 1.0 / (2.0 * trials)
    slope_P, r2_P = _logfit(grid_arr.astype(float), freq_P, floor)
    slope_Q, r2_Q = _logfit(grid_arr.astype(float), freq_Q, floor)
    return DecayReport(
        n_grid, kappa1, list(freq_P), list(freq_Q),
        slope_P, slope_Q, r2_P, r2_Q, H, trials, seed,
    )


# -- pivoting a trajectory -----------------------------------------------------


def _arr_cp(a: np.ndarray, b: np.ndarray) -> int:
    m = min(a.shape[0], b.shape[0])
    if m == 0:
        return 0
    neq = np.flatnonzero(a[:m] != b[:m])
    return int(neq[0]) if neq.size else m


def _pivot_rel(record: PivotRecord, j: int) -> np.ndarray:
    """Reduced word from y_{j,2}^- to z_{j-1} (shared by all candidates)."""
    bp = record.path
    z_mark = record.z_trace[j - 1]
    y2m = bp.loci[j - 1].y2m
    wz = bp.path.word_at(z_mark)
    wy = bp.path.word_at(y2m)
    c = _arr_cp(wz, wy)
    return np.concatenate([-wy[c:][::-1], wz[c:]]).astype(np.int8)


def pivot_admissible(
    trajectory: Trajectory,
    record: PivotRecord,
    j: int,
    replacement_idx: int,
    _rel: Optional[np.ndarray] = None,
) -> bool:
    """Local admissibility condition: (z_{j-1}, ybar_{j,t}^-)_{y_{j,2}^-} < C0
    for t = 0, 1, with the loci rebuilt from the replacement letter word."""
    m = trajectory.model
    C0 = m.constants.C0
    rel = _pivot_rel(record, j) if _rel is None else _rel
    abar = m.S_letters[replacement_idx]
    if trajectory.direction == "backward":
        abar = -abar[::-1]
    a2 = np.concatenate([abar, abar])
    # tree Gromov product at the basepoint is the common prefix length
    return _arr_cp(rel, abar) < C0 and _arr_cp(rel, a2) < C0


def admissible_replacements(
    trajectory: Trajectory, record: PivotRecord, j: int
) -> List[int]:
    """Indices into S satisfying the pivoting condition at time j."""
    rel = _pivot_rel(record, j)
    return [
        ridx
        for ridx in range(len(trajectory.model.S))
        if pivot_admissible(trajectory, record, j, ridx, _rel=rel)
    ]


def pivot_trajectory(
    trajectory: Trajectory,
    j: int,
    replacement: FreeGroupWord,
    constants: GromovConstants,
    space: SpaceModel,
    record: Optional[PivotRecord] = None,
) -> Trajectory:
    """Replace the a-choice of pivotal time j, keeping every other draw.

    Requires j to be pivotal for the full run and the replacement to satisfy
    the two Gromov-product conditions at z_{j-1}; otherwise raises
    "not a pivoting move". The pivoted trajectory has identical rho, b, and
    filler data, and re-running the construction yields identical P_n.
    A precomputed full-run record can be passed to skip the re-run.
    """
    m = trajectory.model
    try:
        ridx = m.S.index(replacement)
    except ValueError:
        raise ValueError("replacement is not in the Schottky choice set S") from None
    if record is None:
        record = run_pivots(trajectory, constants, space)
    if j not in record.P:
        raise ValueError("not a pivoting move: time is not pivotal")
    if not pivot_admissible(trajectory, record, j, ridx):
        raise ValueError("not a pivoting move: product condition fails")
    a_idx = trajectory.a_idx.copy()
    a_idx[j - 1] = ridx  # a-choices are indexed by success order
    return Trajectory(
        model=trajectory.model,
        seed=trajectory.seed,
        stream=trajectory.stream,
        n=trajectory.n,
        direction=trajectory.direction,
        rho=trajectory.rho,
        a_idx=a_idx,
        b_idx=trajectory.b_idx,
        fillers=trajectory.fillers,
        partial=trajectory.partial,
    )


def count_admissible(
    trajectory: Trajectory, record: PivotRecord, j: int
) -> int:
    """Number of S-choices satisfying the pivoting condition at time j."""
    return len(admissible_replacements(trajectory, record, j))


# -- downstream alignment checks -----------------------------------------------


@dataclass
class AlignmentCheck:
    ok: bool
    n_points: int
    max_triple_product: float
    min_growth: float
    violation: Optional[Tuple[int, int, int]] = None


def pivotal_alignment(
    trajectory: Trajectory,
    n: Optional[int],
    constants: GromovConstants,
    space: SpaceModel,
) -> AlignmentCheck:
    """Check the aligned-chain consequences of the pivotal times.

    Marked points are x_0 = o, then (y_{j,0}^-, y_{j,0}^+) for each pivotal
    time j, then the endpoint. Asserts (x_i, x_k)_{x_j} < F0 over all ordered
    triples and d(x_i, x_{j+1}) >= d(x_i, x_j) + L0/2 for all i <= j.
    """
    succ_blocks = np.flatnonzero(trajectory.rho) + 1
    upto = None
    if n is not None:
        n_blocks = n // trajectory.model.block_steps
        upto = int(np.searchsorted(succ_blocks, n_blocks, side="right"))
    record = run_pivots(trajectory, constants, space, upto=upto)
    bp = record.path
    marks = [bp.o_mark]
    for j in record.P:
        lo = bp.loci[j - 1]
        marks.extend([lo.y0m, lo.y0p])
    marks.append(bp.end_mark if upto is None or upto == bp.n_success else bp.next_start(upto))
    d = bp.path.dist_matrix(marks).astype(float)
    M = len(marks)
    F0, L0 = constants.F0, constants.L0
    max_prod = 0.0
    violation = None
    for jj in range(1, M - 1):
        prods = 0.5 * (d[jj, :jj, None] + d[jj, None, jj + 1 :] - d[:jj, jj + 1 :])
        if prods.size:
            local = float(prods.max())
            if local > max_prod:
                max_prod = local
                ii, kk = np.unravel_index(int(prods.argmax()), prods.shape)
                if local >= F0:
                    violation = (int(ii), jj, jj + 1 + int(kk))
    min_growth = float("inf")
    for jj in range(M - 1):
        growth = d[: jj + 1, jj + 1] - d[: jj + 1, jj]
        if growth.size:
            min_growth = min(min_growth, float(growth.min()))
    ok = max_prod < F0 and (M <= 2 or min_growth >= L0 / 2)
    if not ok and violation is None:
        violation = (0, 0, 0)
    return AlignmentCheck(ok, M, max_prod, min_growth if M > 1 else 0.0, violation)


@dataclass
class BidirectionalReport:
    ok: bool
    first_index: int
    n_checked: int
    max_product: float


def bidirectional_pivot_check(
    backward: Trajectory,
    forward: Trajectory,
    m: int,
    constants: GromovConstants,
    space: SpaceModel,
) -> BidirectionalReport:
    """Exact tree check that the two-sided geodesic passes the pivotal loci.

    Both paths must carry at least m eventual pivots within their horizons.
    On a tree d(x, [u, v]) = (u, v)_x, so the closeness of [omega-backward,
    omega-forward] to the forward pivotal loci pair (y0m, y0p) reduces to
    Gromov products between the two endpoint words and locus words. Reports
    the first pivot index from which every later locus passes the F0 bound.
    """
    if m < 1:
        raise ValueError("m must be positive")
    nb = backward.n_blocks
    nf = forward.n_blocks
    qb = eventual_pivots(backward, max(nb // 2, 1), constants, space, horizon=nb)
    qf = eventual_pivots(forward, max(nf // 2, 1), constants, space, horizon=nf)
    if len(qb.Q) < m or len(qf.Q) < m:
        raise ValueError("insufficient eventual pivots on one side")
    bpf = get_block_path(forward)
    bpb = get_block_path(backward)
    U = bpb.path.current_word()  # omega-backward endpoint
    V = bpf.path.current_word()  # omega-forward endpoint
    dUV = U.shape[0] + V.shape[0] - 2 * _arr_cp(U, V)
    F0 = constants.F0
    prods = []
    for j in qf.Q:
        lo = bpf.loci[j - 1]
        for mark in (lo.y0m, lo.y0p):
            Y = bpf.path.word_at(mark)
            dUY = U.shape[0] + Y.shape[0] - 2 * _arr_cp(U, Y)
            dVY = V.shape[0] + Y.shape[0] - 2 * _arr_cp(V, Y)
            prods.append(0.5 * (dUY + dVY - dUV))
    first = len(qf.Q)
    for l in range(len(qf.Q) - 1, -1, -1):
        if prods[2 * l] <= F0 and prods[2 * l + 1] <= F0:
            first = l
        else:
            break
    checked = prods[2 * first :]
    ok = first < len(qf.Q) and first + 1 <= m
    return BidirectionalReport(
        ok=ok,
        first_index=first + 1,
        n_checked=len(checked),
        max_product=float(max(checked)) if checked else 0.0,
    )

"""Estimators and theorem-checking statistics for the walk models.

Everything here is a deterministic function of (model, n, trials, seed): per
trial randomness comes from a counter-based generator keyed by (seed, trial),
so reports are independent of execution order and worker count.

Tree-model quantities (displacement, cyclic-reduction length, Gromov
products) are exact integers computed by the streaming kernels in treepath.
Hyperbolic-plane walks go through renormalized Moebius products with an
accumulated log-scale, which keeps 2^15-step displacements accurate even
though the raw matrix entries would overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

from .geometry import GromovConstants
from .models import FreeGroupWord, MoebiusIsometry, SpaceModel
from .treepath import (
    TreePath,
    _mutual_products,
    _walk_checkpoint_stats,
    _walk_depths,
    _walk_fixed_point_products,
    reduce_array,
)
from .walk import StepDistribution, Trajectory, make_rng


@dataclass(frozen=True)
class WalkModel:
    """A plain (undecomposed) random walk: step law + ambient space."""

    mu: StepDistribution
    space: SpaceModel


@dataclass
class PlainWalk:
    """One sampled walk; letters on the tree, step matrices on the plane."""

    model: WalkModel
    seed: int
    stream: int
    n: int
    letters: Optional[np.ndarray] = None
    mats: Optional[np.ndarray] = None


def _support_letter_table(mu: StepDistribution) -> Tuple[np.ndarray, np.ndarray]:
    """(flat letters, per-step lengths) for a word-valued support."""
    lens = np.array([len(g) for g in mu.support], dtype=np.int64)
    flat = np.concatenate([np.array(g.letters, dtype=np.int8) for g in mu.support])
    return flat, lens


def sample_plain_walk(model: WalkModel, n: int, seed: int, stream: int = 0) -> PlainWalk:
    rng = make_rng(seed, stream)
    if model.space.is_tree:
        idx = rng.choice(len(model.mu.support), size=n, p=np.array(model.mu.weights))
        if all(len(g) == 1 for g in model.mu.support):
            lut = np.array([g.letters[0] for g in model.mu.support], dtype=np.int8)
            letters = lut[idx]
        else:
            flat, lens = _support_letter_table(model.mu)
            offs = np.concatenate([[0], np.cumsum(lens)])
            letters = np.concatenate([flat[offs[i] : offs[i + 1]] for i in idx])
        return PlainWalk(model, seed, stream, n, letters=letters)
    idx = rng.choice(len(model.mu.support), size=n, p=np.array(model.mu.weights))
    mats = np.empty((n, 2, 2))
    table = np.array(
        [[[g.a, g.b], [g.c, g.d]] for g in model.mu.support], dtype=float
    )
    mats[:] = table[idx]
    return PlainWalk(model, seed, stream, n, mats=mats)


# -- renormalized Moebius products --------------------------------------------


def _h2_normalize(M: np.ndarray) -> Tuple[np.ndarray, float]:
    s = math.sqrt(float((M * M).sum()))
    return M / s, math.log(s)


def _h2_disp(M: np.ndarray, logscale: float) -> float:
    """d(i, g i) for g = e^{logscale} M with det(g) = 1."""
    ss = float((M * M).sum())
    q_log = 2.0 * logscale + math.log(ss / 2.0)
    if q_log < 30.0:
        q = math.exp(q_log)
        return math.acosh(max(q, 1.0))
    return q_log + math.log(2.0)  # acosh(q) = log(2q) + O(q^-2)


def _h2_tau(M: np.ndarray, logscale: float) -> float:
    tr_log_arg = abs(float(M[0, 0] + M[1, 1]))
    if tr_log_arg == 0.0:
        return 0.0
    half_log = logscale + math.log(tr_log_arg) - math.log(2.0)
    if half_log < 30.0:
        t = math.exp(half_log)
        return 2.0 * math.acosh(t) if t >= 1.0 else 0.0
    return 2.0 * (half_log + math.log(2.0))


def _h2_checkpoint_stats(mats: np.ndarray, checkpoints: np.ndarray):
    """(displacements, translation lengths) of the prefix products."""
    M = np.eye(2)
    s = 0.0
    out_d = np.empty(len(checkpoints))
    out_t = np.empty(len(checkpoints))
    ci = 0
    for i in range(mats.shape[0]):
        M = M @ mats[i]
        Mn, ds = _h2_normalize(M)
        M = Mn
        s += ds
        while ci < len(checkpoints) and checkpoints[ci] == i + 1:
            out_d[ci] = _h2_disp(M, s)
            out_t[ci] = _h2_tau(M, s)
            ci += 1
    return out_d, out_t


# -- basic estimators ----------------------------------------------------------


@dataclass
class Estimate:
    value: float
    ci_half: float
    n: int
    trials: int
    seed: int


def _final_stats(model: WalkModel, n: int, trials: int, seed: int, stream_base: int = 0):
    """Per-trial (displacement, translation length) at time n."""
    ds = np.empty(trials)
    ts = np.empty(trials)
    for t in range(trials):
        w = sample_plain_walk(model, n, seed, stream_base + t)
        if w.letters is not None:
            cp = np.array([w.letters.shape[0]], dtype=np.int64)
            depths, taus, _ = _walk_checkpoint_stats(w.letters, cp)
            ds[t], ts[t] = depths[0], taus[0]
        else:
            d, tau = _h2_checkpoint_stats(w.mats, np.array([n], dtype=np.int64))
            ds[t], ts[t] = d[0], tau[0]
    return ds, ts


def estimate_drift(model: WalkModel, n: int, trials: int, seed: int) -> Estimate:
    """Mean of d(o, omega_n o)/n with a 95% normal CI."""
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be >= 1")
    ds, _ = _final_stats(model, n, trials, seed)
    vals = ds / n
    half = 1.96 * vals.std(ddof=1) / math.sqrt(trials) if trials > 1 else 0.0
    return Estimate(float(vals.mean()), half, n, trials, seed)


def estimate_variance(model: WalkModel, n: int, trials: int, seed: int) -> Estimate:
    """Sample variance of d(o, omega_n o) divided by n, with a 95% CI."""
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be >= 1")
    ds, _ = _final_stats(model, n, trials, seed)
    s2 = float(ds.var(ddof=1)) / n if trials > 1 else 0.0
    half = 1.96 * s2 * math.sqrt(2.0 / max(trials - 1, 1))
    return Estimate(s2, half, n, trials, seed)


# -- CLT -----------------------------------------------------------------------


@dataclass
class CLTReport:
    samples_displacement: np.ndarray
    samples_translation: np.ndarray
    lambda_hat: float
    sigma_hat: float
    ks_displacement: float
    ks_translation: float
    arithmetic_warning: bool
    n: int
    trials: int
    seed: int


def clt_samples(
    model: WalkModel,
    n: int,
    trials: int,
    seed: int,
    drift_trials: int = 4000,
) -> CLTReport:
    """Normalized displacement/translation samples and their KS distance to
    the fitted centered Gaussian. The drift used for centering comes from a
    disjoint stream block so estimation and testing never share randomness."""
    from .walk import is_non_arithmetic

    lam = estimate_drift(model, n, drift_trials, seed + 1).value
    ds, ts = _final_stats(model, n, trials, seed)
    sd = (ds - lam * n) / math.sqrt(n)
    st = (ts - lam * n) / math.sqrt(n)
    sigma = float(sd.std(ddof=1))
    ks_d = float(sps.kstest(sd, "norm", args=(0.0, sigma)).statistic)
    ks_t = float(sps.kstest(st, "norm", args=(0.0, sigma)).statistic)
    found, _ = is_non_arithmetic(model.mu, model.space, search_depth=3)
    return CLTReport(sd, st, lam, sigma, ks_d, ks_t, not found, n, trials, seed)


# -- converse diagnostic -------------------------------------------------------


@dataclass(frozen=True)
class HeavyTailModel:
    """Mixture walk: with prob mix a uniform generator letter, else a^{+-k}
    with P(k) proportional to k^{-q} truncated at cap."""

    q: float
    cap: int
    mix: float = 0.5
    rank: int = 2


def _heavy_letters(model: HeavyTailModel, n: int, rng: np.random.Generator) -> np.ndarray:
    ks = np.arange(1, model.cap + 1, dtype=float)
    w = ks ** (-model.q)
    cdf = np.cumsum(w / w.sum())
    heavy = rng.random(n) >= model.mix
    k = np.ones(n, dtype=np.int64)
    k[heavy] = 1 + np.searchsorted(cdf, rng.random(int(heavy.sum())))
    vals = np.empty(n, dtype=np.int8)
    gens = rng.integers(0, 2 * model.rank, size=n)
    lut = np.array(
        [g for i in range(1, model.rank + 1) for g in (i, -i)], dtype=np.int8
    )
    vals[:] = lut[gens]
    sign = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    vals[heavy] = sign[heavy]  # heavy steps are powers of the first generator
    return np.repeat(vals, k)


@dataclass
class ConverseReport:
    n_grid: List[int]
    iqr: List[float]
    iqr_translation: List[float]
    slope: float
    slope_translation: float
    trials: int
    seed: int
    cap: Optional[int] = None


def converse_diagnostic(
    model_heavy,
    n_grid: Sequence[int],
    trials: int,
    seed: int,
) -> ConverseReport:
    """Interquartile range of d(o, omega_n o)/sqrt(n) over a grid of n.

    A positive log-log growth slope across a decade of n indicates the
    normalized statistics are spreading out instead of converging. Accepts
    either a HeavyTailModel or a finite-support WalkModel (control)."""
    iqr_d: List[float] = []
    iqr_t: List[float] = []
    for gi, n in enumerate(n_grid):
        ds = np.empty(trials)
        ts = np.empty(trials)
        for t in range(trials):
            rng = make_rng(seed, gi * 10**6 + t)
            if isinstance(model_heavy, HeavyTailModel):
                letters = _heavy_letters(model_heavy, n, rng)
            else:
                w = sample_plain_walk(model_heavy, n, seed, gi * 10**6 + t)
                letters = w.letters
            cp = np.array([letters.shape[0]], dtype=np.int64)
            dd, tt, _ = _walk_checkpoint_stats(letters, cp)
            ds[t], ts[t] = dd[0], tt[0]
        q75, q25 = np.percentile(ds, [75, 25])
        iqr_d.append(float(q75 - q25) / math.sqrt(n))
        q75, q25 = np.percentile(ts, [75, 25])
        iqr_t.append(float(q75 - q25) / math.sqrt(n))
    logn = np.log(np.array(n_grid, dtype=float))
    slope_d = float(np.polyfit(logn, np.log(np.maximum(iqr_d, 1e-12)), 1)[0])
    slope_t = float(np.polyfit(logn, np.log(np.maximum(iqr_t, 1e-12)), 1)[0])
    cap = model_heavy.cap if isinstance(model_heavy, HeavyTailModel) else None
    return ConverseReport(list(n_grid), iqr_d, iqr_t, slope_d, slope_t, trials, seed, cap)


# -- per-trajectory series -----------------------------------------------------


def _checkpoint_stats(walk: PlainWalk, checkpoints: np.ndarray):
    if walk.letters is not None:
        d, t, _ = _walk_checkpoint_stats(walk.letters, checkpoints.astype(np.int64))
        return d.astype(float), t.astype(float)
    return _h2_checkpoint_stats(walk.mats, checkpoints.astype(np.int64))


def log_deviation_series(
    walk: PlainWalk, checkpoints: Sequence[int]
) -> List[Tuple[int, float]]:
    """(n, |tau(omega_n) - d(o, omega_n o)|) at the checkpoints; exact on the
    tree, where the difference is a nonnegative integer."""
    cps = np.asarray(checkpoints, dtype=np.int64)
    if np.any(np.diff(cps) <= 0) or cps[0] < 1:
        raise ValueError("checkpoints must be increasing and positive")
    d, t = _checkpoint_stats(walk, cps)
    return [(int(n), float(dv - tv)) for n, dv, tv in zip(cps, d, t)]


def loglog(n: float) -> float:
    """LL(n): log log n for n >= 3, 1 below (the n = 2 gap closed by
    continuity of the convention)."""
    if n < 3:
        return 1.0
    return math.log(math.log(n))


def lil_alpha(n: float) -> float:
    return math.sqrt(2.0 * n * loglog(n))


@dataclass
class LILReport:
    checkpoints: List[int]
    values: List[float]
    tau_values: List[float]
    running_max: float
    running_min: float


def lil_series(walk: PlainWalk, lam: float, checkpoints: Sequence[int]) -> LILReport:
    """(d(o, omega_n o) - lambda n)/alpha(n) with alpha(n) = sqrt(2n LLn)."""
    cps = np.asarray(checkpoints, dtype=np.int64)
    d, t = _checkpoint_stats(walk, cps)
    vals = [(dv - lam * n) / lil_alpha(n) for n, dv in zip(cps, d)]
    tvals = [(tv - lam * n) / lil_alpha(n) for n, tv in zip(cps, t)]
    return LILReport(
        [int(x) for x in cps], vals, tvals, max(vals), min(vals)
    )


# -- geodesic tracking ---------------------------------------------------------


@dataclass
class TrackingReport:
    checkpoints: List[int]
    distances: List[float]
    quasi_ok: bool
    quasi_max_excess: float
    n_vertices: int


def tracking_series(
    trajectory: Trajectory,
    constants: GromovConstants,
    space: SpaceModel,
    checkpoints: Optional[Sequence[int]] = None,
) -> TrackingReport:
    """Distances from walk positions to the pivotal-loci path Gamma.

    Gamma concatenates o, the (y0m, y0p) pairs of the pivotal times, and the
    endpoint. On the tree d(p, [x, y]) = (x, y)_p, so everything reduces to
    the mark distance matrix. Also verifies the quasi-geodesic inequality
    path-length <= (1 + 8 F0/L0) d + (2 F0 + 2 D3) on all vertex pairs.
    """
    from .pivots import run_pivots

    if not space.is_tree:
        raise NotImplementedError("tracking check requires the tree model")
    record = run_pivots(trajectory, constants, space)
    if len(record.P) < 1:
        raise ValueError("need at least 2 pivotal loci to build the path")
    m = trajectory.model
    # letter offsets of the block starts
    lens = [trajectory.block_letters(i).shape[0] for i in range(trajectory.n_blocks)]
    offs = np.concatenate([[0], np.cumsum(lens)])
    letters = trajectory.letters()
    total = letters.shape[0]
    succ_blocks = np.flatnonzero(trajectory.rho)
    gamma_pos = [0]
    for j in record.P:
        start = int(offs[succ_blocks[j - 1]])
        gamma_pos.extend([start + 2 * m.N, start + 4 * m.N])
    gamma_pos.append(total)
    if checkpoints is None:
        checkpoints = sorted(
            {int(x) for x in np.geomspace(8, total, num=60).astype(int)}
        )
    cps = [int(k) for k in checkpoints if 0 < k <= total]
    positions = sorted(set(gamma_pos) | set(cps))
    path = TreePath(rank=m.space.rank, capacity=total + 64)
    marks = {}
    prev = 0
    marks[0] = path.mark()
    for pos in positions:
        if pos == 0:
            continue
        path.append_raw(letters[prev:pos])
        marks[pos] = path.mark()
        prev = pos
    order = {pos: i for i, pos in enumerate([0] + [p for p in positions if p != 0])}
    all_marks = [marks[pos] for pos in sorted(marks)]
    D = path.dist_matrix(all_marks).astype(float)
    gi = [order[p] for p in gamma_pos]
    # quasi-geodesic inequality on Gamma vertex pairs
    seg_len = [D[gi[i], gi[i + 1]] for i in range(len(gi) - 1)]
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    D3 = 2.0 * constants.F0
    lam_q = 1.0 + 8.0 * constants.F0 / constants.L0
    eps_q = 2.0 * constants.F0 + 2.0 * D3
    max_excess = -math.inf
    for i in range(len(gi)):
        for j in range(i + 1, len(gi)):
            excess = (cum[j] - cum[i]) - (lam_q * D[gi[i], gi[j]] + eps_q)
            max_excess = max(max_excess, excess)
    quasi_ok = max_excess <= 0
    # distance to Gamma at the checkpoints
    dists = []
    for k in cps:
        p = order[k]
        best = math.inf
        for i in range(len(gi) - 1):
            a, b = gi[i], gi[i + 1]
            prod = 0.5 * (D[p, a] + D[p, b] - D[a, b])
            best = min(best, prod)
        dists.append(best)
    return TrackingReport(cps, dists, quasi_ok, max_excess, len(gi))


# -- deviation probabilities and opposite-direction moments -------------------


@dataclass
class DeviationReport:
    k_grid: List[int]
    frequencies: List[float]
    slope: float
    horizon: int
    trials: int
    seed: int


def deviation_probability_check(
    model: WalkModel,
    k_grid: Sequence[int],
    trials: int,
    seed: int,
    x: Optional[FreeGroupWord] = None,
    horizon_mult: int = 4,
) -> DeviationReport:
    """Empirical P[sup_{n >= k} (x, omega_n o)_o >= d(o, omega_k o)] per k,
    with the sup truncated at horizon_mult * max(k_grid)."""
    if not model.space.is_tree:
        raise NotImplementedError("deviation check requires the tree model")
    k_grid = sorted(int(k) for k in k_grid)
    H = horizon_mult * k_grid[-1]
    if x is None:
        x = FreeGroupWord([-1] * (4 * k_grid[-1]), rank=model.space.rank)
    target = np.array(x.letters, dtype=np.int8)
    counts = np.zeros(len(k_grid))
    for t in range(trials):
        w = sample_plain_walk(model, H, seed, t)
        prods = _walk_fixed_point_products(w.letters, target)
        depths = _walk_depths(w.letters)
        # suffix maximum of the products
        sufmax = np.maximum.accumulate(prods[::-1])[::-1]
        for gi, k in enumerate(k_grid):
            if sufmax[k - 1] >= depths[k - 1]:
                counts[gi] += 1
    freqs = counts / trials
    floor = 1.0 / (2.0 * trials)
    slope = float(
        np.polyfit(np.array(k_grid, dtype=float), np.log(np.maximum(freqs, floor)), 1)[0]
    )
    return DeviationReport(k_grid, list(freqs), slope, H, trials, seed)


@dataclass
class OppositeReport:
    mean_pow: float
    ci_half: float
    exp_mean: float
    p: float
    exp_rate: float
    horizon: int
    trials: int
    seed: int
    max_products: np.ndarray = field(repr=False, default=None)


def opposite_deviation_moment(
    model: WalkModel,
    p: float,
    trials: int,
    horizon: int,
    seed: int,
    exp_rate: float = 0.05,
) -> OppositeReport:
    """Empirical E[max_{n <= horizon} (omega-check_n o, omega_n o)_o^{2p}] for
    two independent walks run in lockstep, plus the exponential-moment variant."""
    if not model.space.is_tree:
        raise NotImplementedError("opposite-deviation check requires the tree model")
    maxes = np.empty(trials)
    for t in range(trials):
        wf = sample_plain_walk(model, horizon, seed, 2 * t)
        wb = sample_plain_walk(model, horizon, seed, 2 * t + 1)
        prods = _mutual_products(wb.letters, wf.letters)
        maxes[t] = prods.max()
    vals = maxes ** (2 * p)
    half = 1.96 * vals.std(ddof=1) / math.sqrt(trials) if trials > 1 else 0.0
    exp_mean = float(np.exp(exp_rate * maxes).mean())
    return OppositeReport(
        float(vals.mean()), half, exp_mean, p, exp_rate, horizon, trials, seed, maxes
    )


# -- dyadic decomposition ------------------------------------------------------


@dataclass
class DyadicDecomposition:
    m: int
    k_max: int
    Y: List[np.ndarray]  # Y[k][i] = d(omega_{2^k M i} o, omega_{2^k M (i+1)} o)
    b: List[np.ndarray]  # b[k][i] = product at interior checkpoint i+1 of level k
    identity_max_error: float
    telescope_error: float


def dyadic_decompose(walk: PlainWalk, m: int, k_max: int) -> DyadicDecomposition:
    """Distances Y and Gromov products b over the dyadic checkpoint hierarchy.

    Verifies Y_{k+1,i} = Y_{k,2i-1} + Y_{k,2i} - 2 b_{k,2i-1} for every cell
    (exactly on the tree) and the telescoped sum for the top cell.
    """
    M = 1 << m
    n0 = 1 << k_max
    need = n0 * M
    if walk.letters is not None:
        total = walk.letters.shape[0]
    else:
        total = walk.mats.shape[0]
    if total < need:
        raise ValueError("trajectory shorter than 2^k_max * 2^m steps")
    if walk.letters is not None:
        path = TreePath(rank=walk.model.space.rank, capacity=need + 64)
        marks = [path.mark()]
        for i in range(n0):
            path.append_raw(walk.letters[i * M : (i + 1) * M])
            marks.append(path.mark())
        D = path.dist_matrix(marks).astype(float)
        Y: List[np.ndarray] = []
        b: List[np.ndarray] = []
        for k in range(k_max + 1):
            idx = np.arange(0, n0 + 1, 1 << k)
            Yk = np.array([D[idx[i], idx[i + 1]] for i in range(len(idx) - 1)])
            if len(idx) > 2:
                skip = np.array([D[idx[i], idx[i + 2]] for i in range(len(idx) - 2)])
                bk = 0.5 * (Yk[:-1] + Yk[1:] - skip)
            else:
                bk = np.zeros(0)
            Y.append(Yk)
            b.append(bk)
    else:
        # hierarchical renormalized segment products
        segs = []
        for i in range(n0):
            Mm = np.eye(2)
            s = 0.0
            for j in range(i * M, (i + 1) * M):
                Mm = Mm @ walk.mats[j]
                Mm, ds = _h2_normalize(Mm)
                s += ds
            segs.append((Mm, s))
        Y, b = [], []
        level = segs
        for k in range(k_max + 1):
            Yk = np.array([_h2_disp(Mm, s) for Mm, s in level])
            if len(level) >= 2:
                # distance across two consecutive spans, via their product
                pair = []
                for i in range(len(level) - 1):
                    P = level[i][0] @ level[i + 1][0]
                    Pn, ds = _h2_normalize(P)
                    pair.append(_h2_disp(Pn, level[i][1] + level[i + 1][1] + ds))
                bk = 0.5 * (Yk[:-1] + Yk[1:] - np.array(pair))
            else:
                bk = np.zeros(0)
            Y.append(Yk)
            b.append(np.asarray(bk))
            if k < k_max:
                nxt = []
                for i in range(0, len(level) - 1, 2):
                    P = level[i][0] @ level[i + 1][0]
                    Pn, ds = _h2_normalize(P)
                    nxt.append((Pn, level[i][1] + level[i + 1][1] + ds))
                level = nxt
    # identity check: Y_{k+1,i} = Y_{k,2i} + Y_{k,2i+1} - 2 b_{k,2i} (0-based)
    err = 0.0
    for k in range(k_max):
        for i in range(len(Y[k + 1])):
            lhs = Y[k + 1][i]
            rhs = Y[k][2 * i] + Y[k][2 * i + 1] - 2 * b[k][2 * i]
            err = max(err, abs(lhs - rhs))
    # telescoped top cell
    tele = float(Y[k_max][0])
    acc = float(Y[0].sum())
    for t in range(k_max):
        acc -= 2.0 * float(b[t][0::2][: len(Y[t]) // 2].sum())
    tele_err = abs(tele - acc)
    return DyadicDecomposition(m, k_max, Y, b, err, tele_err)


def power_diff_bound(t: float, s: float, p: float) -> float:
    """Upper bound for |t^p - s^p|: |t-s|^p when p <= 1, else
    2^p (|t-s|^p + s^{p-1} |t-s|)."""
    if t < 0 or s < 0:
        raise ValueError("t, s must be nonnegative")
    d = abs(t - s)
    if p <= 1:
        return d**p
    return 2.0**p * (d**p + s ** (p - 1) * d)

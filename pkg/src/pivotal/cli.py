"""Experiment runner CLI.

Subcommands:
  schottky-search   build and verify the reference Schottky artifact (JSON)
  run <suite>       run an experiment suite; CSV + JSON sidecar outputs
  pivot-stats       shorthand for `run pivot-stats`
  replay            re-derive a single trial of a saved report

Exit codes: 0 pass, 1 assertion failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import ExperimentConfig, config_hash, load_config
from .geometry import GromovConstants
from .models import FreeGroupWord, tree_model
from .schottky import SchottkyParams, default_probes, reference_setup, verify_schottky
from .walk import StepDistribution, build_decomposed_model, sample_trajectory, uniform_f2_steps

SCHEMA_VERSION = 1
SUITES = (
    "pivot-stats",
    "clt",
    "lil",
    "logdev",
    "tracking",
    "converse",
    "deviation",
    "dyadic",
)


def _out_dir(args, config: ExperimentConfig) -> Path:
    env = os.environ.get("PIVOTAL_OUT_DIR")
    out = args.out or env or config.outputs
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_csv(path: Path, header: List[str], rows: List[List]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["schema_version"] + header)
        for row in rows:
            w.writerow([SCHEMA_VERSION] + [repr(x) if isinstance(x, float) else x for x in row])


def _write_sidecar(path: Path, meta: Dict) -> None:
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def params_to_json(params: SchottkyParams, report=None) -> Dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "K": params.K,
        "Kprime": params.Kprime,
        "power": params.power,
        "size": len(params.set),
        "words": [g.to_string() for g in params.set],
        "report": None
        if report is None
        else {
            "passed": report.passed,
            "power_cap": report.power_cap,
            "max_count_pos": report.max_count_pos,
            "max_count_neg": report.max_count_neg,
            "displacement_ok": report.displacement_ok,
            "certificate_ok": report.certificate_ok,
            "n_probes": report.n_probes,
            "failures": report.failures,
        },
    }


def params_from_json(d: Dict, rank: int = 2) -> SchottkyParams:
    words = tuple(FreeGroupWord.from_string(w, rank=rank) for w in d["words"])
    return SchottkyParams(K=d["K"], Kprime=d["Kprime"], set=words, power=d["power"])


_REFERENCE_CACHE: Dict[Tuple[int, int], Tuple[SchottkyParams, GromovConstants]] = {}


def get_reference(config: ExperimentConfig, out: Optional[Path] = None):
    """Schottky params + constants, from the artifact file when present."""
    rank = int(config.model.get("rank", 2))
    target = int(config.schottky.get("target_size", 310))
    key = (rank, target)
    if key in _REFERENCE_CACHE:
        return _REFERENCE_CACHE[key]
    space = tree_model(rank)
    artifact = config.schottky.get("artifact")
    if artifact and Path(artifact).exists():
        d = json.loads(Path(artifact).read_text())
        params = params_from_json(d, rank=rank)
        constants = GromovConstants.from_schottky(space.delta, params.K)
    else:
        params, constants = reference_setup(space, target_size=target)
        if out is not None:
            _write_sidecar(out / "schottky.json", params_to_json(params))
    _REFERENCE_CACHE[key] = (params, constants)
    return params, constants


def _reference_model(config: ExperimentConfig, out: Optional[Path] = None):
    params, constants = get_reference(config, out)
    space = tree_model(int(config.model.get("rank", 2)))
    run = config.run
    return build_decomposed_model(
        base=uniform_f2_steps(space.rank),
        schottky=params,
        constants=constants,
        space=space,
        alpha_override=run.get("alpha_override", 0.2),
        nu_stub_len=run.get("nu_stub_len", 48),
    )


# -- suites -------------------------------------------------------------------


def suite_pivot_stats(config: ExperimentConfig, out: Path):
    from .pivots import run_pivots

    model = _reference_model(config, out)
    space = model.space
    trials = int(config.run.get("trials", 20))
    blocks = int(config.run.get("blocks", 60))
    n = blocks * model.block_steps
    rows = []
    gains = drops0 = drops1 = drops2 = steps = 0
    for t in range(trials):
        traj = sample_trajectory(model, n, config.seed, stream=t)
        rec = run_pivots(traj, model.constants, space)
        sizes = rec.sizes
        sufmin = list(np.minimum.accumulate(np.array(sizes[::-1])))[::-1] if sizes else []
        prev = 0
        for i, (kind, val) in enumerate(rec.history):
            inc = sizes[i] - prev
            bdepth = val if kind == "backtrack" else (prev if kind == "reset" else 0)
            q = min(sizes[i], sufmin[i])
            rows.append([t, i + 1, sizes[i], q, inc, bdepth])
            steps += 1
            if inc == 1:
                gains += 1
            drop = prev - sizes[i]
            if drop > 0:
                drops0 += 1
            if drop > 1:
                drops1 += 1
            if drop > 2:
                drops2 += 1
            prev = sizes[i]
    freq = gains / steps if steps else 0.0
    sig = math.sqrt(0.9 * 0.1 / steps) if steps else 1.0
    checks = {
        "gain_freq": freq,
        "gain_ok": freq >= 0.9 - 3 * sig,
        "drop_freqs": [drops0 / steps, drops1 / steps, drops2 / steps] if steps else [],
        "drop_ok": all(
            d / steps <= 10.0 ** (-(j + 1)) + 3 * math.sqrt(10.0 ** (-(j + 1)) / steps)
            for j, d in enumerate((drops0, drops1, drops2))
        )
        if steps
        else False,
        "steps": steps,
    }
    passed = bool(checks["gain_ok"] and checks["drop_ok"])
    header = ["trial", "step", "P_size", "Q_size", "increment", "backtrack_depth"]
    return passed, header, rows, checks


def suite_clt(config: ExperimentConfig, out: Path):
    from .stats import WalkModel, clt_samples

    model = WalkModel(uniform_f2_steps(), tree_model(2))
    n = int(config.run.get("n", 1024))
    trials = int(config.run.get("trials", 2000))
    rep = clt_samples(model, n, trials, config.seed)
    rows = [
        [i, float(d), float(t)]
        for i, (d, t) in enumerate(zip(rep.samples_displacement, rep.samples_translation))
    ]
    checks = {
        "ks_displacement": rep.ks_displacement,
        "ks_translation": rep.ks_translation,
        "lambda_hat": rep.lambda_hat,
        "sigma_hat": rep.sigma_hat,
        "arithmetic_warning": rep.arithmetic_warning,
    }
    passed = rep.ks_displacement <= 0.05 and rep.ks_translation <= 0.05
    return passed, ["trial", "norm_displacement", "norm_translation"], rows, checks


def suite_lil(config: ExperimentConfig, out: Path):
    from .stats import WalkModel, estimate_drift, lil_series, sample_plain_walk

    model = WalkModel(uniform_f2_steps(), tree_model(2))
    N = int(config.run.get("n", 1 << 14))
    trials = int(config.run.get("trials", 100))
    lam = estimate_drift(model, max(N // 8, 64), 200, config.seed + 1).value
    cps = [1 << k for k in range(6, int(math.log2(N)) + 1)]
    rows = []
    run_maxes = []
    for t in range(trials):
        w = sample_plain_walk(model, N, config.seed, t)
        rep = lil_series(w, lam, cps)
        run_maxes.append(rep.running_max)
        rows.append([t, float(rep.running_max), float(rep.running_min)])
    from .stats import clt_samples

    sigma = clt_samples(model, 1024, 400, config.seed + 2).sigma_hat
    mean_max = float(np.mean(run_maxes))
    checks = {"mean_running_max": mean_max, "sigma_hat": sigma, "window": [0.5 * sigma, 1.5 * sigma],
              "diagnostic": "LIL convergence is slow; window deliberately wide"}
    passed = 0.5 * sigma <= mean_max <= 1.5 * sigma
    return passed, ["trial", "running_max", "running_min"], rows, checks


def suite_logdev(config: ExperimentConfig, out: Path):
    from .stats import WalkModel, log_deviation_series, sample_plain_walk

    model = WalkModel(uniform_f2_steps(), tree_model(2))
    N = int(config.run.get("n", 1 << 16))
    trials = int(config.run.get("trials", 100))
    cps = [1 << k for k in range(6, int(math.log2(N)) + 1)]
    rows = []
    max_half: List[float] = []
    max_full: List[float] = []
    tau_le_d = True
    for t in range(trials):
        w = sample_plain_walk(model, N, config.seed, t)
        ser = log_deviation_series(w, cps)
        ratios = []
        for n, v in ser:
            rows.append([t, n, v, v / math.log(n)])
            ratios.append(v / math.log(n))
            tau_le_d = tau_le_d and v >= 0
        # running maximum of dev/log n: the boundedness statistic
        max_half.append(max(ratios[:-1]))
        max_full.append(max(ratios))
    p99_last = float(np.percentile(max_full, 99))
    p99_prev = float(np.percentile(max_half, 99))
    change = abs(p99_last - p99_prev) / max(p99_prev, 1e-9)
    checks = {
        "p99_running_max": p99_last,
        "p99_running_max_half": p99_prev,
        "rel_change": change,
        "tau_le_d": tau_le_d,
    }
    passed = change < 0.2 and tau_le_d
    return passed, ["trial", "n", "abs_dev", "dev_over_log_n"], rows, checks


def suite_tracking(config: ExperimentConfig, out: Path):
    from .stats import tracking_series

    model = _reference_model(config, out)
    trials = int(config.run.get("trials", 10))
    blocks = int(config.run.get("blocks", 40))
    n = blocks * model.block_steps
    rows = []
    ok = True
    ratios = []
    for t in range(trials):
        traj = sample_trajectory(model, n, config.seed, stream=t)
        rep = tracking_series(traj, model.constants, model.space)
        ok = ok and rep.quasi_ok
        for k, d in zip(rep.checkpoints, rep.distances):
            rows.append([t, k, float(d), float(d) / math.log(max(k, 3))])
        ratios.append(max(d / math.log(max(k, 3)) for k, d in zip(rep.checkpoints, rep.distances)))
    checks = {"quasi_geodesic_ok": ok, "max_ratio": float(max(ratios))}
    return bool(ok), ["trial", "k", "dist_to_path", "dist_over_log_k"], rows, checks


def suite_converse(config: ExperimentConfig, out: Path):
    from .stats import HeavyTailModel, WalkModel, converse_diagnostic

    trials = int(config.run.get("trials", 200))
    grid = config.run.get("n_grid", [1 << k for k in range(10, 15)])
    heavy = HeavyTailModel(
        q=float(config.run.get("q", 2.5)), cap=int(config.run.get("cap", 10**6))
    )
    control = WalkModel(uniform_f2_steps(), tree_model(2))
    rh = converse_diagnostic(heavy, grid, trials, config.seed)
    rc = converse_diagnostic(control, grid, trials, config.seed + 1)
    rows = [
        [n, float(ih), float(ic)] for n, ih, ic in zip(grid, rh.iqr, rc.iqr)
    ]
    checks = {
        "heavy_slope": rh.slope,
        "control_slope": rc.slope,
        "heavy_slope_translation": rh.slope_translation,
        "cap": heavy.cap,
    }
    passed = rh.slope > 0 and rh.slope >= 3 * abs(rc.slope)
    return passed, ["n", "iqr_heavy", "iqr_control"], rows, checks


def suite_deviation(config: ExperimentConfig, out: Path):
    from .stats import WalkModel, deviation_probability_check

    model = WalkModel(uniform_f2_steps(), tree_model(2))
    trials = int(config.run.get("trials", 400))
    grid = config.run.get("k_grid", [8, 16, 32, 64])
    rep = deviation_probability_check(model, grid, trials, config.seed)
    rows = [[k, float(f)] for k, f in zip(rep.k_grid, rep.frequencies)]
    checks = {"slope": rep.slope, "horizon": rep.horizon}
    passed = rep.slope < 0
    return passed, ["k", "frequency"], rows, checks


def suite_dyadic(config: ExperimentConfig, out: Path):
    from .stats import WalkModel, dyadic_decompose, sample_plain_walk

    model = WalkModel(uniform_f2_steps(), tree_model(2))
    m = int(config.run.get("m", 5))
    k_max = int(config.run.get("k_max", 10))
    w = sample_plain_walk(model, (1 << k_max) * (1 << m), config.seed, 0)
    dec = dyadic_decompose(w, m, k_max)
    rows = []
    for k, Yk in enumerate(dec.Y):
        for i, y in enumerate(Yk):
            bv = float(dec.b[k][i]) if i < len(dec.b[k]) else ""
            rows.append([k, i, float(y), bv])
    checks = {
        "identity_max_error": dec.identity_max_error,
        "telescope_error": dec.telescope_error,
    }
    passed = dec.identity_max_error == 0.0 and dec.telescope_error < 1e-9
    return passed, ["level", "index", "Y", "b"], rows, checks


SUITE_FUNCS = {
    "pivot-stats": suite_pivot_stats,
    "clt": suite_clt,
    "lil": suite_lil,
    "logdev": suite_logdev,
    "tracking": suite_tracking,
    "converse": suite_converse,
    "deviation": suite_deviation,
    "dyadic": suite_dyadic,
}


# -- commands -----------------------------------------------------------------


def _load_config_args(args) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
    else:
        if args.seed is None:
            raise ValueError("either --config or --seed is required")
        config = ExperimentConfig(seed=args.seed)
    if args.seed is not None:
        config.seed = args.seed
    if args.trials is not None:
        config.run["trials"] = args.trials
    return config


def cmd_schottky_search(args) -> int:
    config = _load_config_args(args)
    out = _out_dir(args, config)
    space = tree_model(int(config.model.get("rank", 2)))
    try:
        params, constants = reference_setup(
            space, target_size=int(config.schottky.get("target_size", 310))
        )
    except (RuntimeError, ValueError) as exc:
        print(f"schottky search failed: {exc}", file=sys.stderr)
        return 1
    probes = default_probes(params, space, seed=config.seed + 1)
    report = verify_schottky(params, space, probes)
    artifact = params_to_json(params, report)
    artifact["constants"] = {
        k: getattr(constants, k) for k in ("delta", "C0", "D0", "E0", "F0", "G0", "L0")
    }
    path = out / "schottky.json"
    path.write_text(json.dumps(artifact, indent=2, sort_keys=True) + "\n")
    print(f"schottky set of size {len(params.set)} -> {path} (passed={report.passed})")
    return 0 if report.passed else 1


def cmd_run(args) -> int:
    config = _load_config_args(args)
    out = _out_dir(args, config)
    fn = SUITE_FUNCS[args.suite]
    passed, header, rows, checks = fn(config, out)
    stem = args.suite.replace("-", "_")
    _write_csv(out / f"{stem}.csv", header, rows)
    meta = {
        "suite": args.suite,
        "schema_version": SCHEMA_VERSION,
        "seed": config.seed,
        "config": config.to_dict(),
        "config_hash": config_hash(config),
        "checks": checks,
        "passed": passed,
    }
    _write_sidecar(out / f"{stem}.json", meta)
    status = "PASS" if passed else "FAIL"
    print(f"{args.suite}: {status}")
    for k, v in checks.items():
        print(f"  {k}: {v}")
    return 0 if passed else 1


def cmd_replay(args) -> int:
    meta = json.loads(Path(args.report).read_text())
    config = ExperimentConfig.from_dict(meta["config"])
    if config_hash(config) != meta["config_hash"]:
        print("config hash mismatch", file=sys.stderr)
        return 2
    suite = meta["suite"]
    t = args.trial
    from .stats import WalkModel, sample_plain_walk
    from .treepath import _walk_checkpoint_stats

    if suite in ("clt", "lil", "logdev", "dyadic", "deviation"):
        model = WalkModel(uniform_f2_steps(), tree_model(2))
        n = int(config.run.get("n", 1024))
        w = sample_plain_walk(model, n, config.seed, t)
        cps = np.array([w.letters.shape[0]], dtype=np.int64)
        d, tau, _ = _walk_checkpoint_stats(w.letters, cps)
        dump = {
            "suite": suite,
            "trial": t,
            "n": n,
            "displacement": int(d[0]),
            "translation_length": int(tau[0]),
        }
    elif suite in ("pivot-stats", "tracking"):
        from .pivots import run_pivots

        model = _reference_model(config)
        blocks = int(config.run.get("blocks", 60))
        traj = sample_trajectory(model, blocks * model.block_steps, config.seed, stream=t)
        rec = run_pivots(traj, model.constants, model.space)
        dump = {
            "suite": suite,
            "trial": t,
            "n_schottky": traj.n_schottky,
            "P_sizes": rec.sizes,
            "history": rec.history,
            "final_P": rec.P,
        }
    else:
        print(f"replay unsupported for suite {suite!r}", file=sys.stderr)
        return 2
    print(json.dumps(dump, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pivotal", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON (or TOML) experiment config")
        p.add_argument("--seed", type=int, help="seed override (mandatory if no config)")
        p.add_argument("--trials", type=int, help="trial-count override")
        p.add_argument("--out", help="output directory (or PIVOTAL_OUT_DIR)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker hint; results are identical for any value")

    p = sub.add_parser("schottky-search", help="build + verify the Schottky artifact")
    common(p)
    p.set_defaults(func=cmd_schottky_search)

    p = sub.add_parser("run", help="run an experiment suite")
    p.add_argument("suite", choices=SUITES)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("pivot-stats", help="shorthand for `run pivot-stats`")
    common(p)
    p.set_defaults(func=cmd_run, suite="pivot-stats")

    p = sub.add_parser("replay", help="re-derive one trial from a report")
    p.add_argument("report", help="path to a suite JSON sidecar")
    p.add_argument("--trial", type=int, default=0)
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

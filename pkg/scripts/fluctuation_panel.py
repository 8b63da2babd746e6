#!/usr/bin/env python3
# CLT / LIL / log-deviation panel data for the uniform F2 walk.
# Dumps three CSVs under out/ that the plotting notebook consumes.
# Usage: python3 scripts/fluctuation_panel.py [seed]

import csv
import math
import os
import sys

import numpy as np

from pivotal.models import tree_model
from pivotal.stats import (
    WalkModel,
    clt_samples,
    estimate_drift,
    lil_series,
    log_deviation_series,
    sample_plain_walk,
)
from pivotal.walk import uniform_f2_steps

SEED = int(sys.argv[1]) if len(sys.argv) > 1 else 3
N_CLT = 1 << 10
N_LONG = 1 << 16
TRIALS = 400
OUT = os.environ.get("PIVOTAL_OUT_DIR", "out")

model = WalkModel(uniform_f2_steps(), tree_model(2))
os.makedirs(OUT, exist_ok=True)

rep = clt_samples(model, N_CLT, 2000, SEED)
print(f"clt: lambda={rep.lambda_hat:.4f} sigma={rep.sigma_hat:.4f} "
      f"KS(d)={rep.ks_displacement:.4f} KS(tau)={rep.ks_translation:.4f}")
with open(f"{OUT}/clt_samples.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["norm_displacement", "norm_translation"])
    w.writerows(zip(rep.samples_displacement.tolist(), rep.samples_translation.tolist()))

lam = estimate_drift(model, 1 << 13, 200, SEED + 1).value
cps = [1 << k for k in range(6, 17)]
with open(f"{OUT}/lil_series.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["trial", "n", "lil_normalized"])
    run_maxes = []
    for t in range(TRIALS):
        walk = sample_plain_walk(model, N_LONG, SEED, t)
        r = lil_series(walk, lam, cps)
        run_maxes.append(r.running_max)
        for n, v in zip(r.checkpoints, r.values):
            w.writerow([t, n, v])
print(f"lil: mean running max = {float(np.mean(run_maxes)):.4f} "
      f"(sigma window [{0.5 * rep.sigma_hat:.3f}, {1.5 * rep.sigma_hat:.3f}])")

with open(f"{OUT}/logdev_series.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["trial", "n", "abs_dev", "dev_over_log_n"])
    for t in range(100):
        walk = sample_plain_walk(model, N_LONG, SEED + 2, t)
        for n, v in log_deviation_series(walk, cps):
            w.writerow([t, n, v, v / math.log(n)])
print(f"wrote clt_samples.csv, lil_series.csv, logdev_series.csv under {OUT}/")

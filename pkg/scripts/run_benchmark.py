#!/usr/bin/env python3
"""Train the agent on one building and benchmark it against MPC.

Desk-scale version of the full experiment: synthetic weather, a few
hundred thousand training steps, best of a few seeds, then a like-for-like
comparison on the 2016 test windows.

    python3 scripts/run_benchmark.py --building old --steps 200000 --seeds 3
"""

import argparse
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from heatbench.config import preset
from heatbench.data import resample_900s, split_and_filter, synthesize_weather
from heatbench.harness import (HeatingCurveController, MpcController, PolicyController,
                               RandomController, compare, render_report_text)
from heatbench.ppo import train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--building", choices=["old", "efficient"], default="old")
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--synthetic-seed", type=int, default=0)
    args = ap.parse_args()

    warnings.simplefilter("ignore")
    cfg = preset(args.building)
    years = sorted(set(cfg.data.train_years) | set(cfg.data.test_years))
    weather = resample_900s(synthesize_weather(years, seed=args.synthetic_seed))
    split = split_and_filter(weather, list(cfg.data.train_years),
                             list(cfg.data.test_years), cfg.window_len())
    print(f"{args.building}: {len(split.train)} train windows, {len(split.test)} test")

    trainer = replace(cfg.trainer, total_steps=args.steps, seeds=args.seeds)
    t0 = time.time()
    ckpt, curves = train(split, cfg.episode, trainer, base_seed=args.seed)
    print(f"trained {args.seeds}x{args.steps} steps in {time.time() - t0:.0f}s, "
          f"best validation reward/step {ckpt.eval_score:.4f}")
    for s, curve in enumerate(curves):
        tail = curve[-1]
        print(f"  seed {s}: final val reward {tail[1]:.4f} elec {tail[2]:.1f} "
              f"dev {tail[3]:.4f}")

    report = compare([PolicyController(ckpt), MpcController(cfg.mpc()),
                      HeatingCurveController(), RandomController(seed=args.seed)],
                     split.test, cfg.episode)
    print(render_report_text(report))

    drl = report.by_name("drl")
    mpc = report.by_name("mpc")
    gap = drl.electricity_mean_wh / mpc.electricity_mean_wh - 1.0
    print(f"electricity gap drl vs mpc: {100 * gap:+.1f}%  "
          f"(dev max drl {drl.deviation_max_c:.3f}, mpc {mpc.deviation_max_c:.3f})")
    # load-shift signal: covariance of heating power with outdoor temperature
    # inside 12 h windows, averaged
    for res in report.results:
        if res.name not in ("drl", "mpc"):
            continue
        covs = []
        for trace in res.traces:
            arr = np.array(trace)
            for i in range(0, len(arr) - 48, 48):
                chunk = arr[i:i + 48]
                covs.append(np.cov(chunk[:, 4], chunk[:, 1])[0, 1])
        print(f"{res.name}: mean 12h cov(q, t_out) = {np.mean(covs):+.1f} W*degC")


if __name__ == "__main__":
    main()

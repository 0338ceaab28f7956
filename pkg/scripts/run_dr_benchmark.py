#!/usr/bin/env python3
"""Demand-response benchmark: price-aware agent vs DR-MPC vs price-agnostic agent.

    python3 scripts/run_dr_benchmark.py --steps 200000 --seeds 3
"""

import argparse
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from heatbench.config import preset
from heatbench.data import (resample_900s, split_and_filter, synthesize_prices,
                            synthesize_weather)
from heatbench.harness import MpcController, PolicyController, compare, render_report_text
from heatbench.ppo import train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--synthetic-seed", type=int, default=0)
    args = ap.parse_args()

    warnings.simplefilter("ignore")
    dr_cfg = preset("efficient", dr=True)
    base_cfg = preset("efficient")
    years = sorted(set(dr_cfg.data.train_years) | set(dr_cfg.data.test_years))
    weather = resample_900s(synthesize_weather(years, seed=args.synthetic_seed))
    prices = resample_900s(synthesize_prices(years, seed=args.synthetic_seed))
    window_len = max(dr_cfg.window_len(), base_cfg.window_len())
    split = split_and_filter(weather, list(dr_cfg.data.train_years),
                             list(dr_cfg.data.test_years), window_len, prices=prices)

    t0 = time.time()
    dr_trainer = replace(dr_cfg.trainer, total_steps=args.steps, seeds=args.seeds)
    dr_ckpt, _ = train(split, dr_cfg.episode, dr_trainer, base_seed=args.seed)
    print(f"price-aware agent trained in {time.time() - t0:.0f}s, "
          f"val score {dr_ckpt.eval_score:.4f}")

    t0 = time.time()
    base_trainer = replace(base_cfg.trainer, total_steps=args.steps, seeds=args.seeds)
    base_ckpt, _ = train(split, base_cfg.episode, base_trainer, base_seed=args.seed)
    print(f"price-agnostic agent trained in {time.time() - t0:.0f}s, "
          f"val score {base_ckpt.eval_score:.4f}")

    report = compare(
        [PolicyController(dr_ckpt), MpcController(dr_cfg.mpc())],
        split.test, dr_cfg.episode,
        dr_baseline=(PolicyController(base_ckpt, name="drl-baseline"), base_cfg.episode))
    print(render_report_text(report))
    drl = report.by_name("drl")
    mpc = report.by_name("mpc")
    baseline = report.by_name("drl-baseline")
    print(f"cost: drl {drl.cost_mean_cent:.4f} vs baseline {baseline.cost_mean_cent:.4f} "
          f"({100 * (1 - drl.cost_mean_cent / baseline.cost_mean_cent):.0f}% below) "
          f"vs mpc {mpc.cost_mean_cent:.4f}")


if __name__ == "__main__":
    main()

"""Acceptance gate: one test per criterion, printed pass/fail lines.

The heavy artifacts (trained agents, full receding-horizon runs) are
session fixtures shared between criteria; everything runs on the
deterministic built-in synthetic data, seed 0.  Run with `pytest -s` to
see the per-criterion lines while passing.
"""

import time
import warnings
from dataclasses import replace

import numpy as np
import pytest

from heatbench.config import preset
from heatbench.data import (resample_900s, split_and_filter, synthesize_prices,
                            synthesize_weather)
from heatbench.envs import HeatPumpEnv
from heatbench.harness import (MpcController, PolicyController, RandomController,
                               compare)
from heatbench.heatpump import HeatPumpParams
from heatbench.mpc import MpcConfig, mpc_config_for, receding_horizon_control, solve_horizon
from heatbench.nets import Adam
from heatbench.ppo import (ActorCritic, TrainerConfig, act_deterministic_params,
                           collect_rollout, compute_gae, ppo_loss_and_grads,
                           ppo_update, train)
from heatbench.thermal import (ThermalState, building_preset, continuous_matrices,
                               step_exact, step_exact_batch, steady_state)

from helpers import BanditEnv, gradcheck, grid_search_objective

TRAIN_STEPS = 200_000
TRAIN_SEEDS = 3
SEED = 0

warnings.filterwarnings("ignore", message="dropping")


def report(criterion: str, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    print("\n" + line, flush=True)
    assert passed, line


# ---------------------------------------------------------------------------
# Shared artifacts


@pytest.fixture(scope="session")
def acceptance_weather():
    return resample_900s(synthesize_weather(range(2010, 2017), seed=SEED))


@pytest.fixture(scope="session")
def acceptance_prices():
    return resample_900s(synthesize_prices(range(2010, 2017), seed=SEED))


@pytest.fixture(scope="session")
def splits(acceptance_weather, acceptance_prices):
    out = {}
    for name, dr in (("old", False), ("efficient", False), ("dr", True)):
        building = "efficient" if name == "dr" else name
        cfg = preset(building, dr=dr)
        window_len = cfg.window_len()
        if dr:   # shared windows must also feed the 48-step baseline agent
            window_len = max(window_len, preset("efficient").window_len())
        out[name] = split_and_filter(
            acceptance_weather, list(cfg.data.train_years), list(cfg.data.test_years),
            window_len, prices=acceptance_prices if dr else None)
    return out


@pytest.fixture(scope="session")
def trained(splits):
    """Best-of-3-seed agents for old, efficient and DR scenarios."""
    agents = {}
    for name in ("old", "efficient", "dr"):
        building = "efficient" if name == "dr" else name
        cfg = preset(building, dr=(name == "dr"))
        trainer = replace(cfg.trainer, total_steps=TRAIN_STEPS, seeds=TRAIN_SEEDS)
        started = time.time()
        ckpt, _ = train(splits[name], cfg.episode, trainer, base_seed=SEED)
        agents[name] = {"ckpt": ckpt, "cfg": cfg, "train_time": time.time() - started}
    return agents


@pytest.fixture(scope="session")
def baseline_comparisons(splits, trained):
    """Full-test-set DRL vs MPC comparison per building (criteria 5, 6, 8)."""
    out = {}
    for name in ("old", "efficient"):
        cfg = trained[name]["cfg"]
        started = time.time()
        report_obj = compare(
            [PolicyController(trained[name]["ckpt"]), MpcController(cfg.mpc()),
             RandomController(seed=SEED)],
            splits[name].test, cfg.episode)
        out[name] = {"report": report_obj, "wall": time.time() - started}
    return out


@pytest.fixture(scope="session")
def dr_comparison(splits, trained):
    dr_cfg = trained["dr"]["cfg"]
    base_cfg = trained["efficient"]["cfg"]
    started = time.time()
    report_obj = compare(
        [PolicyController(trained["dr"]["ckpt"]), MpcController(dr_cfg.mpc())],
        splits["dr"].test, dr_cfg.episode,
        dr_baseline=(PolicyController(trained["efficient"]["ckpt"], name="drl-baseline"),
                     base_cfg.episode))
    return {"report": report_obj, "wall": time.time() - started}


# ---------------------------------------------------------------------------
# Criteria


def test_criterion_1_dynamics_oracle(rng):
    started = time.time()
    worst = 0.0
    for label in ("old", "efficient"):
        building = building_preset(label)
        n = 10_000
        states = np.column_stack([rng.uniform(5, 35, n), rng.uniform(5, 60, n)])
        t_out = rng.uniform(-15, 20, n)
        q = rng.uniform(0, 12_000, n)
        exact = step_exact_batch(states, building, t_out, q, 900.0)

        # independent batched classical RK4, 100 substeps
        a, b = continuous_matrices(building)
        h = 9.0
        x = states.copy()
        u = np.column_stack([t_out, q])
        bu = u @ b.T
        for _ in range(100):
            k1 = x @ a.T + bu
            k2 = (x + 0.5 * h * k1) @ a.T + bu
            k3 = (x + 0.5 * h * k2) @ a.T + bu
            k4 = (x + h * k3) @ a.T + bu
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        worst = max(worst, float(np.abs(exact - x).max()))

        # scalar semigroup property at tight tolerance
        for _ in range(50):
            s = ThermalState(rng.uniform(5, 35), rng.uniform(5, 60))
            from heatbench.thermal import SimInputs
            inp_full = SimInputs(t_out=rng.uniform(-15, 20), q_hp=rng.uniform(0, 12000))
            inp_half = SimInputs(t_out=inp_full.t_out, q_hp=inp_full.q_hp, dt=450.0)
            one = step_exact(s, building, inp_full)
            two = step_exact(step_exact(s, building, inp_half), building, inp_half)
            assert abs(one.t_in - two.t_in) < 1e-9
            assert abs(one.t_ret - two.t_ret) < 1e-9
    elapsed = time.time() - started
    report("C1 dynamics oracle",
           worst < 1e-6 and elapsed < 5.0,
           f"max |exact - RK4(100)| = {worst:.2e} degC over 2x10^4 transitions, "
           f"semigroup <= 1e-9, runtime {elapsed:.2f}s")


def test_criterion_2_steady_state_law(rng):
    started = time.time()
    worst = 0.0
    for label in ("old", "efficient"):
        building = building_preset(label)
        n = 20
        t_out = rng.uniform(-10, 15, n)
        q = rng.uniform(0, 12_000, n)
        states = np.column_stack([rng.uniform(5, 35, n), rng.uniform(5, 60, n)])
        for _ in range(40_000):
            states = step_exact_batch(states, building, t_out, q, 900.0)
        targets = np.column_stack([t_out + q / building.h_ve_tr,
                                   t_out + q / building.h_ve_tr + q / building.h_rad_con])
        worst = max(worst, float(np.abs(states - targets).max()))
        one = steady_state(building, float(t_out[0]), float(q[0]))
        assert one.t_in == pytest.approx(targets[0, 0])
    elapsed = time.time() - started
    report("C2 steady-state law",
           worst < 0.01 and elapsed < 5.0,
           f"max |simulated - analytic| = {worst:.2e} degC over 20 random "
           f"(T_out, Q) pairs per building, runtime {elapsed:.2f}s")


def test_criterion_3_ppo_numerics(rng):
    started = time.time()
    # (a) analytic gradients vs central finite differences
    ac = ActorCritic(5)
    params = ac.init_params(rng)
    cfg = TrainerConfig(entropy_coef=0.01)
    obs = rng.normal(size=(6, 5))
    actions = rng.normal(size=6)
    from heatbench.ppo import gaussian_logprob
    means, _ = ac.pi.forward(params, obs)
    old_logp = gaussian_logprob(actions, means, float(params["log_std"][0]))
    for k in params:
        params[k] = params[k] + 0.01 * rng.normal(size=params[k].shape)
    adv = rng.normal(size=6)
    batch = {"obs": obs, "actions": actions, "old_log_probs": old_logp,
             "advantages": (adv - adv.mean()) / (adv.std() + 1e-8),
             "returns": rng.normal(size=6)}

    def loss_fn():
        loss, grads, _ = ppo_loss_and_grads(ac, params, batch, cfg)
        return loss, grads

    grad_err, grad_norm_err = gradcheck(loss_fn, params)

    # (b) GAE(lambda=1) vs brute-force discounted advantages
    n = 64
    rewards, values = rng.normal(size=n), rng.normal(size=n)
    dones = np.zeros(n)
    dones[-1] = 1.0
    gamma = 0.9
    adv_gae, _ = compute_gae(rewards, values, dones, gamma, 1.0, 0.0)
    brute = np.array([sum(gamma ** (k - t) * rewards[k] for k in range(t, n)) - values[t]
                      for t in range(n)])
    gae_err = float(np.abs(adv_gae - brute).max())

    # (c) bandit sanity task
    env = BanditEnv()
    bandit_ac = ActorCritic(1)
    ss = np.random.SeedSequence([SEED, 99])
    init_rng, roll_rng, shuf_rng = [np.random.default_rng(s) for s in ss.spawn(3)]
    bandit_params = bandit_ac.init_params(init_rng)
    adam = Adam(3e-4)
    tcfg = TrainerConfig()
    obs_b = env.reset()
    steps = 0
    while steps < 50_000:
        n_collect = min(tcfg.rollout_len, 50_000 - steps)
        buf, obs_b, _, boot = collect_rollout(env, lambda e: e.reset(), bandit_ac,
                                              bandit_params, n_collect, roll_rng, obs_b)
        buf.finalize(tcfg.gamma, tcfg.gae_lambda, boot)
        ppo_update(buf, bandit_ac, bandit_params, adam, tcfg, shuf_rng)
        steps += n_collect
    bandit_mean = act_deterministic_params(bandit_ac, bandit_params, np.zeros(1))

    elapsed = time.time() - started
    report("C3 PPO numerics",
           grad_err <= 1e-4 and gae_err <= 1e-10
           and abs(bandit_mean - 0.5) <= 0.05 and elapsed < 120.0,
           f"gradcheck max rel err {grad_err:.2e} (norm-wise {grad_norm_err:.2e}), "
           f"GAE(1) vs brute force {gae_err:.2e}, bandit mean {bandit_mean:.3f} "
           f"(target 0.5 +- 0.05), runtime {elapsed:.1f}s")


def test_criterion_4_mpc_optimality(rng, splits):
    started = time.time()
    building = building_preset("old")
    hp = HeatPumpParams()
    precise = dict(max_iters=60, tolerance=1e-9, stall_iters=40, max_anchor_sets=24)
    levels = np.linspace(0.0, hp.q_max, 25)
    worst_gap = -np.inf
    for _ in range(100):
        beta = 10 ** rng.uniform(-5, -2.5)
        cfg = MpcConfig(horizon=3, beta=beta, **precise)
        state = ThermalState(rng.uniform(18, 23), rng.uniform(20, 40))
        t_out = rng.uniform(-10, 15, size=3)
        sol = solve_horizon(state, t_out, None, building, hp, cfg)
        best, _ = grid_search_objective(state, t_out, building, hp, beta, levels, 3)
        worst_gap = max(worst_gap, sol.objective - best)

    env_cfg = replace(preset("old").episode, episode_len=400)
    env = HeatPumpEnv(env_cfg, training=False)
    env.reset(splits["old"].test[0])
    run = receding_horizon_control(env, mpc_config_for(env_cfg))
    elapsed = time.time() - started
    report("C4 MPC optimality",
           worst_gap <= 1e-6 and run.prediction_error <= 1e-9 and elapsed < 120.0,
           f"worst seqLP-vs-25^3-grid gap {worst_gap:.2e} over 100 instances, "
           f"receding-horizon prediction error {run.prediction_error:.2e} degC, "
           f"runtime {elapsed:.1f}s")


def test_criterion_5_drl_vs_mpc_gap(trained, baseline_comparisons):
    details = []
    ok = True
    for name in ("old", "efficient"):
        rep = baseline_comparisons[name]["report"]
        drl = rep.by_name("drl")
        mpc = rep.by_name("mpc")
        gap = abs(drl.electricity_mean_wh / mpc.electricity_mean_wh - 1.0)
        budget = trained[name]["train_time"] + baseline_comparisons[name]["wall"]
        ok &= gap <= 0.15 and drl.deviation_max_c <= 0.5 and budget <= 7200
        details.append(f"{name}: elec {drl.electricity_mean_wh:.1f} vs "
                       f"{mpc.electricity_mean_wh:.1f} Wh ({100 * gap:.1f}% gap), "
                       f"dev max {drl.deviation_max_c:.3f} degC, "
                       f"{budget / 60:.0f} min total")
    report("C5 DRL-vs-MPC gap", ok,
           f"{TRAIN_SEEDS} seeds x {TRAIN_STEPS} steps; " + "; ".join(details))


def test_criterion_6_strategy_qualitatives(baseline_comparisons):
    # old building: indoor temperature pinned near the lower band edge
    old = baseline_comparisons["old"]["report"].by_name("drl")
    old_traces = next(r.traces for r in baseline_comparisons["old"]["report"].results
                      if r.name == "drl")
    t_in = np.concatenate([[row[2] for row in trace] for trace in old_traces])
    frac_in_band = float(np.mean((t_in >= 20.8) & (t_in <= 22.0)))

    # efficient building: heating shifted into the warm half-days
    eff_traces = next(r.traces for r in baseline_comparisons["efficient"]["report"].results
                      if r.name == "drl")
    covs = []
    for trace in eff_traces:
        arr = np.array(trace)
        for i in range(0, len(arr) - 48, 48):
            chunk = arr[i:i + 48]
            covs.append(np.cov(chunk[:, 4], chunk[:, 1])[0, 1])
    mean_cov = float(np.mean(covs))

    report("C6 strategy qualitatives",
           frac_in_band >= 0.90 and mean_cov > 0.0,
           f"old agent holds [20.8, 22.0] degC for {100 * frac_in_band:.1f}% of test "
           f"steps; efficient agent 12h cov(q, t_out) = {mean_cov:+.0f} W*degC")


def test_criterion_7_demand_response(acceptance_prices, trained, dr_comparison):
    quiet = synthesize_prices([2016], seed=SEED, noise_scale=0.0)
    day = quiet.values[24:48]
    ratio = float(day.max() / day.min())

    rep = dr_comparison["report"]
    drl = rep.by_name("drl")
    mpc = rep.by_name("mpc")
    baseline = rep.by_name("drl-baseline")
    saving = 1.0 - drl.cost_mean_cent / baseline.cost_mean_cent
    mpc_gap = abs(drl.cost_mean_cent / mpc.cost_mean_cent - 1.0)
    budget = trained["dr"]["train_time"] + dr_comparison["wall"]
    report("C7 demand response",
           ratio >= 2.0 and saving >= 0.10 and mpc_gap <= 0.20 and budget <= 7200,
           f"peak/off-peak {ratio:.1f}:1; cost {drl.cost_mean_cent:.4f} ct/step = "
           f"{100 * saving:.0f}% below price-agnostic {baseline.cost_mean_cent:.4f} "
           f"and {100 * mpc_gap:.0f}% from DR-MPC {mpc.cost_mean_cent:.4f}; "
           f"{budget / 60:.0f} min total")


def test_criterion_8_execution_speed(baseline_comparisons):
    details = []
    worst_ratio = np.inf
    for name in ("old", "efficient"):
        rep = baseline_comparisons[name]["report"]
        drl = rep.by_name("drl")
        mpc = rep.by_name("mpc")
        ratio = mpc.decision_time_s / max(drl.decision_time_s, 1e-12)
        worst_ratio = min(worst_ratio, ratio)
        details.append(f"{name}: {drl.decision_time_s:.1f}s vs {mpc.decision_time_s:.0f}s "
                       f"({ratio:.0f}x)")
    report("C8 execution speed", worst_ratio >= 10.0,
           "policy inference vs receding-horizon MPC over the full test set: "
           + "; ".join(details))


def test_criterion_9_subcommand_determinism(tmp_path):
    import json
    from heatbench.cli import main as cli_main

    cfg_path = tmp_path / "tiny.json"
    cfg_path.write_text(json.dumps({
        "environment": {"episode_len": 150, "forecast_len": 8},
        "trainer": {"total_steps": 4096, "seeds": 2, "validate_every_episodes": 2},
        "data": {"train_years": [2015], "test_years": [2016]},
        "mpc": {"horizon": 8},
    }))

    def run_all(tag):
        root = tmp_path / tag
        root.mkdir()
        ckpt = root / "agent.npz"
        assert cli_main(["synth-data", "--config", str(cfg_path), "--out-dir",
                         str(root / "data")]) == 0
        assert cli_main(["simulate", "--config", str(cfg_path), "--seed", "5",
                         "--controller", "heating-curve", "--trace",
                         str(root / "trace.csv")]) == 0
        assert cli_main(["train", "--config", str(cfg_path), "--seed", "5",
                         "--out", str(ckpt), "--curve-prefix", str(root / "curve")]) == 0
        assert cli_main(["evaluate", "--config", str(cfg_path), "--seed", "5",
                         "--checkpoint", str(ckpt), "--metrics-out",
                         str(root / "metrics.csv")]) == 0
        assert cli_main(["mpc", "--config", str(cfg_path), "--seed", "5",
                         "--metrics-out", str(root / "mpc.csv"),
                         "--trace-dir", str(root / "mpc_traces")]) == 0
        assert cli_main(["compare", "--config", str(cfg_path), "--seed", "5",
                         "--controllers", f"drl={ckpt},mpc,heating-curve,random",
                         "--out-dir", str(root / "cmp")]) == 0
        csvs = {}
        for path in sorted(root.rglob("*.csv")):
            csvs[str(path.relative_to(root))] = path.read_bytes()
        return csvs

    first = run_all("a")
    second = run_all("b")
    assert first.keys() == second.keys()
    mismatched = [name for name in first if first[name] != second[name]]
    report("C9 determinism", not mismatched and len(first) >= 10,
           f"{len(first)} CSV artifacts from synth-data/simulate/train/evaluate/mpc/"
           f"compare byte-identical across two runs"
           + (f"; mismatches: {mismatched}" if mismatched else ""))

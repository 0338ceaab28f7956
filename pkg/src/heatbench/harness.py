"""Controller evaluation and side-by-side comparison over the test windows.

All controllers in one comparison run on the exact same windows and the
same environment config (asserted via window fingerprints).  Mean metrics
are per 900 s step over the whole test set; the deviation max is the worst
single step anywhere.  Per-decision wall time is accumulated around the
controller call only, so the speed comparison is between a policy forward
pass and a receding-horizon solve, not between logging paths.

The CSV rendering of a report contains only deterministic quantities;
wall-clock timings live in the text and JSON renderings.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .envs import EpisodeConfig, HeatPumpEnv, format_float, reward_dr
from .heatpump import HeatPumpParams
from .mpc import MpcConfig, solve_horizon
from .ppo import PolicyCheckpoint, act_deterministic_params
from .thermal import BuildingParams

REPORT_CSV_COLUMNS = ("controller", "electricity_mean_wh", "deviation_mean_c",
                      "deviation_max_c", "cost_mean_cent", "reward_mean",
                      "rel_electricity", "rel_cost")


class UsageError(ValueError):
    """Bad invocation (maps to exit code 1)."""


class FingerprintMismatch(RuntimeError):
    """Checkpoint was trained under a different environment config."""


@dataclass(frozen=True)
class Metrics:
    electricity_mean_wh: float
    deviation_mean_c: float
    deviation_max_c: float
    cost_mean_cent: float
    reward_mean: float
    decision_time_s: float
    steps: int

    def __post_init__(self):
        assert self.deviation_max_c >= self.deviation_mean_c - 1e-12
        assert self.electricity_mean_wh >= 0.0 and self.deviation_mean_c >= 0.0


@dataclass(frozen=True)
class EvaluationResult:
    name: str
    metrics: Metrics
    traces: list
    window_fingerprints: tuple


@dataclass(frozen=True)
class ComparisonReport:
    results: list
    reference: str        # controller name the relative gaps refer to

    def by_name(self, name: str) -> Metrics:
        for r in self.results:
            if r.name == name:
                return r.metrics
        raise KeyError(name)


def heating_curve_power(t_out: float, building: BuildingParams, hp: HeatPumpParams,
                        t_heat_limit: float = 15.0, t_design: float = -12.0,
                        t_target: float = 21.0) -> float:
    """Static outdoor-temperature-to-power map.

    Design power holds `t_target` at the design temperature in steady
    state (q = H_ve_tr * (t_target - t_design)); output ramps linearly to
    zero at the heating limit and saturates at the pump maximum.
    """
    q_design = building.h_ve_tr * (t_target - t_design)
    frac = np.clip((t_heat_limit - t_out) / (t_heat_limit - t_design), 0.0, 1.0)
    return float(min(q_design * frac, hp.q_max))


class PolicyController:
    """Deterministic trained-policy controller (frozen normalizer)."""

    def __init__(self, ckpt: PolicyCheckpoint, name: str = "drl"):
        self.name = name
        self.ckpt = ckpt
        self.ac = ckpt.actor_critic()

    def prepare(self, env: HeatPumpEnv) -> None:
        if self.ckpt.config_fingerprint != env.cfg.fingerprint():
            raise FingerprintMismatch(
                f"checkpoint fingerprint {self.ckpt.config_fingerprint} does not match "
                f"environment config {env.cfg.fingerprint()}")
        env.normalizer = self.ckpt.normalizer(env.cfg)

    def begin_window(self, env: HeatPumpEnv) -> None:
        pass

    def decide(self, env: HeatPumpEnv, obs) -> tuple[str, float]:
        return "action", act_deterministic_params(self.ac, self.ckpt.params,
                                                  obs.standardized)


class MpcController:
    """Receding-horizon planner on the exact model, warm-started step to step."""

    def __init__(self, cfg: MpcConfig, name: str = "mpc"):
        self.name = name
        self.cfg = cfg
        self._warm: np.ndarray | None = None
        self._basis: np.ndarray | None = None

    def prepare(self, env: HeatPumpEnv) -> None:
        if self.cfg.dr_mode != env.cfg.dr_mode:
            raise UsageError("MPC and environment disagree on DR mode")

    def begin_window(self, env: HeatPumpEnv) -> None:
        self._warm = None
        self._basis = None

    def decide(self, env: HeatPumpEnv, obs) -> tuple[str, float]:
        t_out_fc = env.forecast_outdoor(self.cfg.horizon)
        price_fc = env.forecast_price(self.cfg.horizon) if self.cfg.dr_mode else None
        if len(t_out_fc) == self.cfg.horizon:
            cfg = self.cfg
        else:
            cfg = replace(self.cfg, horizon=len(t_out_fc))
            self._basis = None      # shrunken horizon changes the LP layout
        sol = solve_horizon(env.state, t_out_fc, price_fc, env.cfg.building,
                            env.cfg.hp, cfg, dt=env.cfg.dt, q_init=self._warm,
                            basis_init=self._basis)
        self._warm = np.concatenate([sol.q[1:], [0.0]])
        self._basis = sol.lp_basis
        return "power", float(sol.q[0])


class HeatingCurveController:
    def __init__(self, name: str = "heating-curve", t_heat_limit: float = 15.0,
                 t_design: float = -12.0):
        self.name = name
        self.t_heat_limit = t_heat_limit
        self.t_design = t_design

    def prepare(self, env: HeatPumpEnv) -> None:
        pass

    def begin_window(self, env: HeatPumpEnv) -> None:
        pass

    def decide(self, env: HeatPumpEnv, obs) -> tuple[str, float]:
        t_out = float(env.forecast_outdoor(1)[0])
        return "power", heating_curve_power(t_out, env.cfg.building, env.cfg.hp,
                                            self.t_heat_limit, self.t_design,
                                            t_target=env.cfg.comfort_low)


class RandomController:
    """Uniform actions in [-1, 1]; the floor any learned policy must clear."""

    def __init__(self, seed: int = 0, name: str = "random"):
        self.name = name
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def prepare(self, env: HeatPumpEnv) -> None:
        self._rng = np.random.default_rng(self.seed)

    def begin_window(self, env: HeatPumpEnv) -> None:
        pass

    def decide(self, env: HeatPumpEnv, obs) -> tuple[str, float]:
        return "action", float(self._rng.uniform(-1.0, 1.0))


class ConstantPowerController:
    def __init__(self, q_hp: float, name: str | None = None):
        self.name = name or f"constant-{q_hp:g}W"
        self.q_hp = q_hp

    def prepare(self, env: HeatPumpEnv) -> None:
        pass

    def begin_window(self, env: HeatPumpEnv) -> None:
        pass

    def decide(self, env: HeatPumpEnv, obs) -> tuple[str, float]:
        return "power", self.q_hp


def evaluate_controller(controller, windows, env_cfg: EpisodeConfig) -> EvaluationResult:
    """Run every window deterministically and aggregate per-step metrics."""
    if not windows:
        raise UsageError("no test windows available")
    env = HeatPumpEnv(env_cfg, training=False)
    controller.prepare(env)
    totals = {"electricity": 0.0, "deviation": 0.0, "cost": 0.0, "reward": 0.0}
    dev_max = 0.0
    decision_time = 0.0
    steps = 0
    traces = []
    for window in windows:
        obs = env.reset(window)
        controller.begin_window(env)
        done = False
        while not done:
            t0 = time.perf_counter()
            kind, value = controller.decide(env, obs)
            decision_time += time.perf_counter() - t0
            result = env.step(value) if kind == "action" else env.step_power(value)
            totals["electricity"] += result.electricity
            totals["deviation"] += result.comfort_deviation
            totals["cost"] += result.cost
            totals["reward"] += result.reward
            dev_max = max(dev_max, result.comfort_deviation)
            steps += 1
            obs = result.next_obs
            done = result.done
        traces.append(list(env.trace))
    metrics = Metrics(
        electricity_mean_wh=totals["electricity"] / steps,
        deviation_mean_c=totals["deviation"] / steps,
        deviation_max_c=dev_max,
        cost_mean_cent=totals["cost"] / steps,
        reward_mean=totals["reward"] / steps,
        decision_time_s=decision_time,
        steps=steps,
    )
    fingerprints = tuple(w.fingerprint() for w in windows)
    return EvaluationResult(name=controller.name, metrics=metrics, traces=traces,
                            window_fingerprints=fingerprints)


DYNAMICS_FIELDS = ("building", "hp", "comfort_low", "comfort_high", "episode_len",
                   "dt", "initial_t_in", "initial_t_ret")


def evaluate_dr_baseline(controller, windows, base_env_cfg: EpisodeConfig,
                         dr_env_cfg: EpisodeConfig) -> EvaluationResult:
    """Price-agnostic controller priced under the demand-response objective.

    The controller runs in its own (no-price) observation layout on the
    very same windows, then each step's electricity is priced with the
    window's price series and the reward is recomputed with the DR
    trade-off weight.  Building physics must be identical in both configs.
    """
    for field_name in DYNAMICS_FIELDS:
        if getattr(base_env_cfg, field_name) != getattr(dr_env_cfg, field_name):
            raise UsageError(f"baseline and DR configs disagree on {field_name}")
    if not dr_env_cfg.dr_mode:
        raise UsageError("dr_env_cfg must have dr_mode enabled")
    result = evaluate_controller(controller, windows, base_env_cfg)
    cost_total = 0.0
    reward_total = 0.0
    steps = 0
    for trace, window in zip(result.traces, windows):
        if window.price is None:
            raise UsageError("windows carry no price series to price the baseline with")
        for row in trace:
            step, elec, dev = int(row[0]), row[5], row[6]
            price = float(window.price[step])
            cost_total += elec * price
            reward_total += reward_dr(elec, price, dev, dr_env_cfg.beta)
            steps += 1
    metrics = replace(result.metrics,
                      cost_mean_cent=cost_total / steps,
                      reward_mean=reward_total / steps)
    return EvaluationResult(name=result.name, metrics=metrics, traces=result.traces,
                            window_fingerprints=result.window_fingerprints)


def compare(controllers: list, windows, env_cfg: EpisodeConfig,
            dr_baseline=None) -> ComparisonReport:
    """Evaluate >= 2 controllers on identical windows.

    `dr_baseline` is an optional (controller, base_env_cfg) pair for the
    price-agnostic column of a demand-response comparison.
    """
    if len(controllers) + (1 if dr_baseline else 0) < 2:
        raise UsageError("compare needs at least two controllers (a baseline)")
    results = [evaluate_controller(c, windows, env_cfg) for c in controllers]
    if dr_baseline is not None:
        baseline_controller, base_env_cfg = dr_baseline
        results.append(evaluate_dr_baseline(baseline_controller, windows,
                                            base_env_cfg, env_cfg))
    names = [r.name for r in results]
    if len(set(names)) != len(names):
        raise UsageError(f"duplicate controller names: {names}")
    first = results[0].window_fingerprints
    for r in results[1:]:
        assert r.window_fingerprints == first, "controllers saw different windows"
    reference = "mpc" if "mpc" in names else names[0]
    return ComparisonReport(results=results, reference=reference)


def _relative(value: float, ref: float) -> float:
    if ref == 0.0:
        return 0.0 if value == 0.0 else float("inf")
    return value / ref - 1.0


def render_report_csv(report: ComparisonReport) -> str:
    ref = report.by_name(report.reference)
    lines = [",".join(REPORT_CSV_COLUMNS)]
    for r in report.results:
        m = r.metrics
        lines.append(",".join([
            r.name,
            format_float(m.electricity_mean_wh),
            format_float(m.deviation_mean_c),
            format_float(m.deviation_max_c),
            format_float(m.cost_mean_cent),
            format_float(m.reward_mean),
            format_float(_relative(m.electricity_mean_wh, ref.electricity_mean_wh)),
            format_float(_relative(m.cost_mean_cent, ref.cost_mean_cent)),
        ]))
    return "\n".join(lines) + "\n"


def render_report_text(report: ComparisonReport) -> str:
    ref = report.by_name(report.reference)
    header = f"{'controller':<16}{'elec Wh':>10}{'dev mean':>10}{'dev max':>9}" \
             f"{'cost ct':>9}{'reward':>10}{'time s':>10}"
    lines = [header, "-" * len(header)]
    for r in report.results:
        m = r.metrics
        lines.append(f"{r.name:<16}{m.electricity_mean_wh:>10.2f}{m.deviation_mean_c:>10.4f}"
                     f"{m.deviation_max_c:>9.3f}{m.cost_mean_cent:>9.4f}"
                     f"{m.reward_mean:>10.4f}{m.decision_time_s:>10.2f}")
    lines.append(f"(means per step over {report.results[0].metrics.steps} test steps; "
                 f"relative gaps vs {report.reference})")
    if ref.decision_time_s > 0:
        for r in report.results:
            if r.name != report.reference:
                ratio = ref.decision_time_s / max(r.metrics.decision_time_s, 1e-12)
                lines.append(f"execution-time ratio {report.reference}/{r.name}: {ratio:.1f}x")
    return "\n".join(lines) + "\n"


def report_to_dict(report: ComparisonReport) -> dict:
    ref = report.by_name(report.reference)
    out = {"reference": report.reference, "controllers": {}}
    for r in report.results:
        m = r.metrics
        out["controllers"][r.name] = {
            "electricity_mean_wh": m.electricity_mean_wh,
            "deviation_mean_c": m.deviation_mean_c,
            "deviation_max_c": m.deviation_max_c,
            "cost_mean_cent": m.cost_mean_cent,
            "reward_mean": m.reward_mean,
            "decision_time_s": m.decision_time_s,
            "steps": m.steps,
            "rel_electricity": _relative(m.electricity_mean_wh, ref.electricity_mean_wh),
            "rel_cost": _relative(m.cost_mean_cent, ref.cost_mean_cent),
        }
    return out


__all__ = [
    "ComparisonReport",
    "ConstantPowerController",
    "EvaluationResult",
    "FingerprintMismatch",
    "HeatingCurveController",
    "Metrics",
    "MpcController",
    "PolicyController",
    "RandomController",
    "UsageError",
    "compare",
    "evaluate_controller",
    "evaluate_dr_baseline",
    "heating_curve_power",
    "render_report_csv",
    "render_report_text",
    "report_to_dict",
]

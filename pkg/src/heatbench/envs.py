"""The control MDP: thermal model + heat pump wrapped as an episodic environment.

One step is 900 s.  The action is the heat pump thermal power for the next
step, rescaled so the agent acts in [-1, 1].  The observation is

    base mode: {T_in, T_ret, T_out[t], T_out[t+1], ..., T_out[t+n]}
    DR mode:   {T_in, T_ret, T_out[t], price[t], T_out[t+1], price[t+1], ...}

where the forecast entries are the true future series values (perfect
forecast).  Observations are standardized with running mean/variance
moments that update during training and are frozen for evaluation.

Reward per step:

    base: r = -(beta * electricity_Wh + comfort_deviation_degC)
    DR:   r = -(beta * electricity_Wh * price_cent_per_Wh + comfort_deviation_degC)

The environment is deterministic: same window, same actions, same config
give a bit-identical trajectory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .heatpump import HeatPumpParams, electricity_used
from .thermal import BuildingParams, SimInputs, ThermalState, building_preset, step_exact

TRACE_COLUMNS = ("step", "t_out", "t_in", "t_ret", "q_hp", "electricity_wh",
                 "deviation_c", "price_cent_per_wh", "reward")


class EpisodeDone(RuntimeError):
    """step() was called on a finished episode."""


class WindowTooShort(ValueError):
    """The series window cannot cover episode_len + forecast_len steps."""


@dataclass(frozen=True)
class EpisodeConfig:
    building: BuildingParams = field(default_factory=lambda: building_preset("old"))
    hp: HeatPumpParams = field(default_factory=HeatPumpParams)
    forecast_len: int = 8            # n, steps of perfect forecast
    dr_mode: bool = False
    beta: float = 0.001              # trade-off weight; per Wh (base) or per Wh*cent/Wh (DR)
    comfort_low: float = 21.0
    comfort_high: float = 25.0
    episode_len: int = 2880
    dt: float = 900.0
    initial_t_in: float = 21.0
    initial_t_ret: float = 25.0
    obs_clip: float = 10.0           # standardized observations clipped to +-obs_clip
    obs_epsilon: float = 1e-8

    def __post_init__(self):
        if self.comfort_low >= self.comfort_high:
            raise ValueError("comfort_low must be below comfort_high")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.forecast_len < 0:
            raise ValueError(f"forecast_len must be >= 0, got {self.forecast_len}")
        if self.episode_len < 1:
            raise ValueError(f"episode_len must be >= 1, got {self.episode_len}")

    @property
    def obs_dim(self) -> int:
        n = self.forecast_len
        return 3 + 1 + 2 * n if self.dr_mode else 3 + n

    def fingerprint(self) -> str:
        """Stable hash of everything a trained policy depends on."""
        blob = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Observation:
    raw: np.ndarray
    standardized: np.ndarray


@dataclass(frozen=True)
class StepResult:
    next_obs: Observation
    reward: float
    electricity: float        # Wh
    comfort_deviation: float  # degC
    cost: float               # euro cent; 0 outside DR mode
    done: bool
    info: dict


def rescale_action(a: float, q_max: float) -> float:
    """Map an action in [-1, 1] to thermal power in [0, q_max] W.

    Values outside [-1, 1] are clipped first (Gaussian policies emit
    unbounded samples).
    """
    a = float(np.clip(a, -1.0, 1.0))
    return (a + 1.0) / 2.0 * q_max


def comfort_deviation(t_in: float, comfort_low: float = 21.0, comfort_high: float = 25.0) -> float:
    """Distance (degC) of t_in outside the comfort band, 0 inside."""
    return max(0.0, comfort_low - t_in) + max(0.0, t_in - comfort_high)


def reward(electricity: float, deviation: float, beta: float) -> float:
    return -(beta * electricity + deviation)


def reward_dr(electricity: float, price: float, deviation: float, beta: float) -> float:
    return -(beta * electricity * price + deviation)


class RunningNormalizer:
    """Per-feature running mean/variance standardization.

    Welford updates; applying with zero samples uses mean 0 / variance 1.
    In frozen mode `update_apply` applies without updating.
    """

    def __init__(self, dim: int, clip: float = 10.0, epsilon: float = 1e-8):
        self.dim = dim
        self.clip = clip
        self.epsilon = epsilon
        self.count = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)
        self.frozen = False

    @property
    def var(self) -> np.ndarray:
        if self.count == 0:
            return np.ones(self.dim)
        return self._m2 / self.count

    def update(self, raw: np.ndarray) -> None:
        if self.frozen:
            return
        raw = np.asarray(raw, dtype=float)
        self.count += 1
        delta = raw - self.mean
        self.mean = self.mean + delta / self.count
        self._m2 = self._m2 + delta * (raw - self.mean)

    def apply(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        std = (raw - self.mean) / np.sqrt(self.var + self.epsilon)
        return np.clip(std, -self.clip, self.clip)

    def update_apply(self, raw: np.ndarray) -> np.ndarray:
        self.update(raw)
        return self.apply(raw)

    def invert(self, standardized: np.ndarray) -> np.ndarray:
        """Undo `apply` (exact only where no clipping occurred)."""
        return standardized * np.sqrt(self.var + self.epsilon) + self.mean

    def moments(self) -> dict:
        return {"mean": self.mean.copy(), "var": self.var.copy(),
                "count": np.array([float(self.count)])}

    @classmethod
    def from_moments(cls, mean: np.ndarray, var: np.ndarray, count: float,
                     clip: float = 10.0, epsilon: float = 1e-8) -> "RunningNormalizer":
        norm = cls(len(mean), clip=clip, epsilon=epsilon)
        norm.count = int(count)
        norm.mean = np.asarray(mean, dtype=float).copy()
        norm._m2 = np.asarray(var, dtype=float) * max(norm.count, 1)
        return norm


class HeatPumpEnv:
    """Episodic single-building environment over one weather/price window."""

    def __init__(self, cfg: EpisodeConfig, training: bool = True):
        self.cfg = cfg
        self.normalizer = RunningNormalizer(cfg.obs_dim, clip=cfg.obs_clip,
                                            epsilon=cfg.obs_epsilon)
        self.normalizer.frozen = not training
        self._window_t_out: np.ndarray | None = None
        self._window_price: np.ndarray | None = None
        self.state: ThermalState | None = None
        self.t = 0
        self.done = True
        self.trace: list[tuple] = []

    @property
    def training(self) -> bool:
        return not self.normalizer.frozen

    def reset(self, window) -> Observation:
        """Start an episode on `window` (needs .t_out; .price too in DR mode)."""
        cfg = self.cfg
        needed = cfg.episode_len + cfg.forecast_len
        t_out = np.asarray(window.t_out, dtype=float)
        if len(t_out) < needed:
            raise WindowTooShort(
                f"window has {len(t_out)} steps, needs episode_len + forecast_len = {needed}")
        self._window_t_out = t_out
        if cfg.dr_mode:
            price = getattr(window, "price", None)
            if price is None:
                raise ValueError("DR mode requires a window with a price series")
            price = np.asarray(price, dtype=float)
            if len(price) != len(t_out):
                raise ValueError("price and weather series lengths differ")
            self._window_price = price
        else:
            self._window_price = None
        self.state = ThermalState(t_in=cfg.initial_t_in, t_ret=cfg.initial_t_ret)
        self.t = 0
        self.done = False
        self.trace = []
        return self._observe()

    def _series_at(self, series: np.ndarray, idx: int) -> float:
        # The terminal observation overruns the window by one step; repeat
        # the last value (it is never used for control or bootstrapping).
        return float(series[min(idx, len(series) - 1)])

    def _raw_obs(self) -> np.ndarray:
        cfg = self.cfg
        t = self.t
        tout = self._window_t_out
        parts = [self.state.t_in, self.state.t_ret, self._series_at(tout, t)]
        if cfg.dr_mode:
            parts.append(self._series_at(self._window_price, t))
            for i in range(1, cfg.forecast_len + 1):
                parts.append(self._series_at(tout, t + i))
                parts.append(self._series_at(self._window_price, t + i))
        else:
            for i in range(1, cfg.forecast_len + 1):
                parts.append(self._series_at(tout, t + i))
        return np.array(parts)

    def _observe(self) -> Observation:
        raw = self._raw_obs()
        return Observation(raw=raw, standardized=self.normalizer.update_apply(raw))

    def step(self, a: float) -> StepResult:
        """Apply an action in [-1, 1] (clipped) and advance one step."""
        return self.step_power(rescale_action(a, self.cfg.hp.q_max))

    def step_power(self, q_hp: float) -> StepResult:
        """Apply a thermal power command in W (saturated at [0, q_max])."""
        if self.done:
            raise EpisodeDone("episode is done; call reset() first")
        cfg = self.cfg
        q_hp = float(np.clip(q_hp, 0.0, cfg.hp.q_max))
        t_out = float(self._window_t_out[self.t])
        elec = electricity_used(q_hp, t_out, self.state.t_ret, cfg.dt, cfg.hp)

        self.state = step_exact(self.state, cfg.building,
                                SimInputs(t_out=t_out, q_hp=q_hp, dt=cfg.dt))
        dev = comfort_deviation(self.state.t_in, cfg.comfort_low, cfg.comfort_high)

        if cfg.dr_mode:
            price = float(self._window_price[self.t])
            cost = elec * price
            r = reward_dr(elec, price, dev, cfg.beta)
        else:
            price = 0.0
            cost = 0.0
            r = reward(elec, dev, cfg.beta)

        self.trace.append((self.t, t_out, self.state.t_in, self.state.t_ret,
                           q_hp, elec, dev, price, r))
        self.t += 1
        self.done = self.t >= cfg.episode_len
        return StepResult(
            next_obs=self._observe(),
            reward=r,
            electricity=elec,
            comfort_deviation=dev,
            cost=cost,
            done=self.done,
            info={"q_hp": q_hp, "t_in": self.state.t_in, "t_ret": self.state.t_ret},
        )

    # Hooks for planners that need the ground truth the agent only sees
    # through observations.

    def forecast_outdoor(self, horizon: int) -> np.ndarray:
        """True outdoor forcing for the next `horizon` steps (may be shorter
        near the window end)."""
        return self._window_t_out[self.t:self.t + horizon].copy()

    def forecast_price(self, horizon: int) -> np.ndarray | None:
        if self._window_price is None:
            return None
        return self._window_price[self.t:self.t + horizon].copy()


def format_float(x: float) -> str:
    """Shortest round-trip decimal representation; deterministic."""
    return repr(float(x))


def write_trace_csv(trace: list[tuple], path) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for row in trace:
        step = str(int(row[0]))
        lines.append(",".join([step] + [format_float(v) for v in row[1:]]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != list(TRACE_COLUMNS):
            raise ValueError(f"unexpected trace header {header}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=float)
    if data.size == 0:
        raise ValueError("empty trace")
    return {name: data[:, i] for i, name in enumerate(TRACE_COLUMNS)}


__all__ = [
    "EpisodeConfig",
    "EpisodeDone",
    "HeatPumpEnv",
    "Observation",
    "RunningNormalizer",
    "StepResult",
    "TRACE_COLUMNS",
    "WindowTooShort",
    "comfort_deviation",
    "format_float",
    "read_trace_csv",
    "rescale_action",
    "reward",
    "reward_dr",
    "write_trace_csv",
]

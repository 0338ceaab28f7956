"""Workbench configuration: presets for the three scenarios plus JSON overrides.

The config file is a single JSON document with sections

    building     BuildingParams fields, or {"preset": "old" | "efficient"}
    heat_pump    HeatPumpParams fields
    environment  EpisodeConfig fields (minus building/heat pump)
    trainer      TrainerConfig fields
    mpc          {"horizon": int | null, "max_iters": int, "tolerance": float}
    data         {"train_years": [...], "test_years": [...], "synthetic_seed": int,
                  "weather": path | null, "prices": path | null}

Anything omitted falls back to the preset selected by building label and
demand-response flag: the old building plans/looks ahead 8 steps with
discount 0.96, the efficient one 48 steps with 0.99, and the
demand-response scenario 32 steps of interleaved price/weather forecast
with its own trade-off weight.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

from .envs import EpisodeConfig
from .heatpump import HeatPumpParams
from .mpc import MpcConfig, mpc_config_for
from .ppo import TrainerConfig
from .thermal import BuildingParams, building_preset


@dataclass(frozen=True)
class DataConfig:
    train_years: tuple = (2010, 2011, 2012, 2013, 2014, 2015)
    test_years: tuple = (2016,)
    synthetic_seed: int = 0
    weather: str | None = None
    prices: str | None = None


@dataclass(frozen=True)
class WorkbenchConfig:
    episode: EpisodeConfig
    trainer: TrainerConfig
    data: DataConfig
    mpc_horizon: int | None = None
    mpc_max_iters: int = 12
    mpc_tolerance: float = 1e-2

    def mpc(self) -> MpcConfig:
        return mpc_config_for(self.episode, horizon=self.mpc_horizon,
                              max_iters=self.mpc_max_iters,
                              tolerance=self.mpc_tolerance)

    def window_len(self) -> int:
        return self.episode.episode_len + self.episode.forecast_len

    def to_dict(self) -> dict:
        ep = asdict(self.episode)
        building = ep.pop("building")
        heat_pump = ep.pop("hp")
        return {
            "building": building,
            "heat_pump": heat_pump,
            "environment": ep,
            "trainer": asdict(self.trainer),
            "mpc": {"horizon": self.mpc_horizon, "max_iters": self.mpc_max_iters,
                    "tolerance": self.mpc_tolerance},
            "data": asdict(self.data),
        }


def preset(building: str = "old", dr: bool = False) -> WorkbenchConfig:
    """Built-in scenario defaults (old, efficient, efficient + demand response)."""
    params = building_preset(building)
    hp = HeatPumpParams()
    if dr:
        episode = EpisodeConfig(building=params, hp=hp, forecast_len=32,
                                dr_mode=True, beta=0.25)
        gamma = 0.99
    elif building == "efficient":
        episode = EpisodeConfig(building=params, hp=hp, forecast_len=48)
        gamma = 0.99
    else:
        episode = EpisodeConfig(building=params, hp=hp, forecast_len=8)
        gamma = 0.96
    trainer = TrainerConfig(gamma=gamma)
    return WorkbenchConfig(episode=episode, trainer=trainer, data=DataConfig())


def _merged(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merged(out[key], value)
        else:
            out[key] = value
    return out


def from_dict(doc: dict) -> WorkbenchConfig:
    building_doc = dict(doc["building"])
    if "preset" in building_doc:
        params = building_preset(building_doc.pop("preset"))
        if building_doc:
            params = replace(params, **building_doc)
    else:
        params = BuildingParams(**building_doc)
    hp = HeatPumpParams(**doc["heat_pump"])
    episode = EpisodeConfig(building=params, hp=hp, **doc["environment"])
    trainer = TrainerConfig(**doc["trainer"])
    mpc_doc = doc["mpc"]
    data_doc = dict(doc["data"])
    data_doc["train_years"] = tuple(data_doc["train_years"])
    data_doc["test_years"] = tuple(data_doc["test_years"])
    return WorkbenchConfig(
        episode=episode,
        trainer=trainer,
        data=DataConfig(**data_doc),
        mpc_horizon=mpc_doc.get("horizon"),
        mpc_max_iters=mpc_doc.get("max_iters", 12),
        mpc_tolerance=mpc_doc.get("tolerance", 1e-2),
    )


def load_config(path=None, building: str = "old", dr: bool = False) -> WorkbenchConfig:
    """Preset for (building, dr), deep-merged with a JSON override file."""
    cfg = preset(building, dr)
    if path is None:
        return cfg
    with open(path) as fh:
        override = json.load(fh)
    return from_dict(_merged(cfg.to_dict(), override))


def dump_config(cfg: WorkbenchConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


__all__ = ["DataConfig", "WorkbenchConfig", "dump_config", "from_dict",
           "load_config", "preset"]

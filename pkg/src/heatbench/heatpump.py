"""Air-source heat pump: thermal power -> electrical energy via a COP model.

The COP is a clamped Carnot model,

    COP = clip(carnot_eta * (T_sup + 273.15) / (T_sup - T_out), cop_min, cop_max)

which captures the one property that matters for control: the smaller the
lift between the outdoor air (source) and the supply temperature (sink),
the cheaper the heat.  The supply temperature is the return temperature
plus the temperature rise across the condenser at the given flow:

    T_sup = T_ret + Q_hp / flow_capacity
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KELVIN_OFFSET = 273.15


@dataclass(frozen=True)
class HeatPumpParams:
    q_max: float = 12000.0          # W, maximum thermal power
    carnot_eta: float = 0.45        # second-law efficiency
    flow_capacity: float = 1256.0   # W/K, mass flow times c_p of the loop
    cop_min: float = 1.5
    cop_max: float = 8.0            # must sit above the efficient building's
                                    # operating range or shifting loses its payoff

    def __post_init__(self):
        if self.q_max <= 0:
            raise ValueError(f"q_max must be > 0, got {self.q_max}")
        if not 0.0 < self.carnot_eta < 1.0:
            raise ValueError(f"carnot_eta must be in (0, 1), got {self.carnot_eta}")
        if self.cop_min < 1.0:
            raise ValueError(f"cop_min must be >= 1, got {self.cop_min}")
        if self.cop_max <= self.cop_min:
            raise ValueError(f"cop_max must exceed cop_min, got {self.cop_max}")
        if self.flow_capacity <= 0:
            raise ValueError(f"flow_capacity must be > 0, got {self.flow_capacity}")


def _check_q(q_hp: float, params: HeatPumpParams) -> None:
    if not np.isfinite(q_hp) or q_hp < 0.0 or q_hp > params.q_max:
        raise ValueError(f"q_hp={q_hp} outside [0, {params.q_max}] W")


def supply_temperature(t_ret: float, q_hp: float, params: HeatPumpParams) -> float:
    """Water temperature leaving the condenser, degC."""
    _check_q(q_hp, params)
    return t_ret + q_hp / params.flow_capacity


def cop(t_out: float, t_sup: float, params: HeatPumpParams) -> float:
    """Coefficient of performance for lifting heat from t_out to t_sup."""
    if t_sup <= t_out:
        return params.cop_max
    raw = params.carnot_eta * (t_sup + KELVIN_OFFSET) / (t_sup - t_out)
    return float(np.clip(raw, params.cop_min, params.cop_max))


def electricity_used(q_hp: float, t_out: float, t_ret: float, dt: float,
                     params: HeatPumpParams) -> float:
    """Electrical energy in Wh consumed to deliver q_hp W over dt seconds."""
    _check_q(q_hp, params)
    if q_hp == 0.0:
        return 0.0
    t_sup = supply_temperature(t_ret, q_hp, params)
    return q_hp * (dt / 3600.0) / cop(t_out, t_sup, params)


__all__ = ["HeatPumpParams", "supply_temperature", "cop", "electricity_used"]

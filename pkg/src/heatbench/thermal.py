"""2R2C lumped-capacitance building dynamics.

Two thermal nodes, two capacitances:

    C_bldg  * dT_in/dt  = H_rad_con * (T_ret - T_in) - H_ve_tr * (T_in - T_out)
    C_water * dT_ret/dt = Q_hp - H_rad_con * (T_ret - T_in)

T_in is the indoor air temperature, T_ret the return temperature of the
floor-heating water loop.  T_out and Q_hp are held constant over a step
(zero-order hold), so the system is an affine linear ODE with an exact
closed-form solution; `step_exact` evaluates that solution and is the one
integrator used everywhere in the workbench.  `step_rk4_oracle` is a
classical Runge-Kutta cross-check intended for tests only.

Units:
  - temperatures: degC
  - thermal power Q_hp: W
  - heat transfer coefficients H_*: W/K
  - capacities in `BuildingParams`: Wh/K (converted to J/K internally)
  - time: s
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

# Liters of loop water per m2 of floor area, times the heat capacity of
# one liter of water in Wh/K.
WATER_LITERS_PER_M2 = 5.0
WH_PER_LITER_KELVIN = 1.163

# Outside this band the model has almost certainly been mis-parameterized.
PLAUSIBLE_T_MIN = -30.0
PLAUSIBLE_T_MAX = 100.0


class SimulationDiverged(RuntimeError):
    """A state left the plausible temperature range [-30, 100] degC."""


@dataclass(frozen=True)
class BuildingParams:
    """RC-network coefficients and geometry of one simulated building.

    `c_bldg_specific` is per square meter; the absolute envelope capacity
    entering the ODE is c_bldg_specific * floor_area (Wh/K).
    """

    floor_area: float            # m2
    c_bldg_specific: float       # Wh/(m2 K)
    h_ve_tr: float               # W/K, transmission + ventilation
    h_rad_con: float             # W/K, radiation + convection (floor loop)
    c_water: float               # Wh/K, floor-heating water
    label: str = "custom"

    def __post_init__(self):
        for name in ("floor_area", "c_bldg_specific", "h_ve_tr", "h_rad_con", "c_water"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ValueError(f"BuildingParams.{name} must be strictly positive, got {v}")

    @property
    def c_bldg(self) -> float:
        """Absolute envelope capacity in Wh/K."""
        return self.c_bldg_specific * self.floor_area


@dataclass(frozen=True)
class ThermalState:
    t_in: float    # degC, indoor temperature
    t_ret: float   # degC, return temperature

    def __post_init__(self):
        if not (np.isfinite(self.t_in) and np.isfinite(self.t_ret)):
            raise ValueError(f"non-finite thermal state ({self.t_in}, {self.t_ret})")


@dataclass(frozen=True)
class SimInputs:
    t_out: float          # degC, outdoor temperature over the step
    q_hp: float           # W, heat pump thermal power (zero-order hold)
    dt: float = 900.0     # s

    def __post_init__(self):
        if not np.isfinite(self.t_out):
            raise ValueError(f"non-finite t_out {self.t_out}")
        if not np.isfinite(self.q_hp) or self.q_hp < 0.0:
            raise ValueError(f"q_hp must be >= 0, got {self.q_hp}")
        if not np.isfinite(self.dt) or self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")


def building_preset(label: str) -> BuildingParams:
    """Return one of the two built-in buildings ("old" or "efficient").

    The water-loop exchange coefficient and capacity are sized from floor
    area: large exchange surfaces are what allow floor heating to run at
    30-35 degC return temperatures.
    """
    if label == "old":
        floor_area, c_spec, h_ve_tr, h_rad_con = 136.0, 45.0, 396.0, 800.0
    elif label == "efficient":
        floor_area, c_spec, h_ve_tr, h_rad_con = 393.0, 65.9, 281.7, 2000.0
    else:
        raise KeyError(f"unknown building preset {label!r} (expected 'old' or 'efficient')")
    c_water = floor_area * WATER_LITERS_PER_M2 * WH_PER_LITER_KELVIN
    return BuildingParams(
        floor_area=floor_area,
        c_bldg_specific=c_spec,
        h_ve_tr=h_ve_tr,
        h_rad_con=h_rad_con,
        c_water=c_water,
        label=label,
    )


def continuous_matrices(params: BuildingParams) -> tuple[np.ndarray, np.ndarray]:
    """(A, B) of dx/dt = A x + B u with x = [T_in, T_ret], u = [T_out, Q_hp]."""
    cb = params.c_bldg * 3600.0    # Wh/K -> J/K
    cw = params.c_water * 3600.0
    hr, hv = params.h_rad_con, params.h_ve_tr
    a = np.array([[-(hr + hv) / cb, hr / cb],
                  [hr / cw, -hr / cw]])
    b = np.array([[hv / cb, 0.0],
                  [0.0, 1.0 / cw]])
    return a, b


def _expm_2x2(m: np.ndarray) -> np.ndarray:
    """Matrix exponential of a 2x2 matrix with distinct real eigenvalues.

    The RC network always qualifies: the discriminant of the characteristic
    polynomial is (a11-a22)^2 + 4 a12 a21 with a12*a21 > 0.
    """
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = tr * tr - 4.0 * det
    assert disc > 0.0, "2R2C system matrix must have distinct real eigenvalues"
    root = np.sqrt(disc)
    lam1 = 0.5 * (tr + root)
    lam2 = 0.5 * (tr - root)
    eye = np.eye(2)
    return (np.exp(lam1) * (m - lam2 * eye) - np.exp(lam2) * (m - lam1 * eye)) / (lam1 - lam2)


@lru_cache(maxsize=64)
def _discretize_cached(key: tuple) -> tuple[np.ndarray, np.ndarray]:
    params = BuildingParams(*key[:5], label=key[5])
    dt = key[6]
    a, b = continuous_matrices(params)
    det_a = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    assert det_a > 0.0, "2R2C system matrix singular; coefficients must be positive"
    ad = _expm_2x2(a * dt)
    a_inv = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det_a
    bd = a_inv @ (ad - np.eye(2)) @ b
    ad.setflags(write=False)
    bd.setflags(write=False)
    return ad, bd


def discretize(params: BuildingParams, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization: x' = Ad x + Bd u over dt seconds.

    Cached per (params, dt); the returned arrays are read-only.
    """
    key = (params.floor_area, params.c_bldg_specific, params.h_ve_tr,
           params.h_rad_con, params.c_water, params.label, float(dt))
    return _discretize_cached(key)


def _check_plausible(t_in: float, t_ret: float, context: str) -> None:
    for name, v in (("t_in", t_in), ("t_ret", t_ret)):
        if not np.isfinite(v) or not (PLAUSIBLE_T_MIN <= v <= PLAUSIBLE_T_MAX):
            raise SimulationDiverged(
                f"{context}: {name}={v} left the plausible range "
                f"[{PLAUSIBLE_T_MIN}, {PLAUSIBLE_T_MAX}] degC"
            )


def step_exact(state: ThermalState, params: BuildingParams, inputs: SimInputs) -> ThermalState:
    """Advance the state by one step using the exact ZOH solution."""
    ad, bd = discretize(params, inputs.dt)
    x = np.array([state.t_in, state.t_ret])
    u = np.array([inputs.t_out, inputs.q_hp])
    x_next = ad @ x + bd @ u
    _check_plausible(x_next[0], x_next[1], "step_exact")
    return ThermalState(t_in=float(x_next[0]), t_ret=float(x_next[1]))


def step_exact_batch(states: np.ndarray, params: BuildingParams,
                     t_out: np.ndarray, q_hp: np.ndarray, dt: float) -> np.ndarray:
    """Vectorized `step_exact` over (N, 2) state rows. No divergence check."""
    ad, bd = discretize(params, dt)
    u = np.stack([np.broadcast_to(t_out, states.shape[:1]),
                  np.broadcast_to(q_hp, states.shape[:1])], axis=1)
    return states @ ad.T + u @ bd.T


def step_rk4_oracle(state: ThermalState, params: BuildingParams, inputs: SimInputs,
                    substeps: int = 100) -> ThermalState:
    """Classical RK4 integration of the same ODE, for verification only."""
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    a, b = continuous_matrices(params)
    u = np.array([inputs.t_out, inputs.q_hp])
    h = inputs.dt / substeps
    x = np.array([state.t_in, state.t_ret])
    bu = b @ u

    def f(y):
        return a @ y + bu

    for _ in range(substeps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_plausible(x[0], x[1], "step_rk4_oracle")
    return ThermalState(t_in=float(x[0]), t_ret=float(x[1]))


def steady_state(params: BuildingParams, t_out: float, q_hp: float) -> ThermalState:
    """Fixed point of the dynamics under constant (t_out, q_hp).

    Setting both derivatives to zero gives
        T_in*  = T_out + Q_hp / H_ve_tr
        T_ret* = T_in* + Q_hp / H_rad_con
    """
    t_in = t_out + q_hp / params.h_ve_tr
    return ThermalState(t_in=t_in, t_ret=t_in + q_hp / params.h_rad_con)


def with_overrides(params: BuildingParams, **kwargs) -> BuildingParams:
    """Copy of `params` with selected fields replaced."""
    return replace(params, **kwargs)


__all__ = [
    "BuildingParams",
    "ThermalState",
    "SimInputs",
    "SimulationDiverged",
    "building_preset",
    "continuous_matrices",
    "discretize",
    "step_exact",
    "step_exact_batch",
    "step_rk4_oracle",
    "steady_state",
    "with_overrides",
]

"""Receding-horizon optimal control planning on the exact building model.

The dynamics are linear in the heat input and the comfort penalty is
piecewise linear, so with the COP coupling frozen at the incumbent
trajectory the horizon problem is an exact linear program:

    min  sum_k  beta (* price_k) * e_k  +  d_k
    s.t. d_k >= comfort_low  - T_in_k(q),   d_k >= T_in_k(q) - comfort_high
         e_k >= tangents of elec_k(q_k)  at the anchor points
         0 <= q_k <= q_max,  d_k, e_k >= 0

with T_in_k affine in q through the zero-order-hold discretization.  The
per-step electricity elec_k(q) is convex in q for a frozen return
temperature (the COP clamp only ever increases the marginal rate inside
the actuator range), so its supporting tangents under-approximate it
exactly; accumulating tangents at successive incumbents tightens the LP
into the true objective from below (cutting planes).  The outer loop:
freeze the return-temperature trajectory, rebuild the tangents, solve the
LP, re-simulate the true objective, and accept the LP point or backtrack
toward the incumbent.  The true objective is non-increasing across
iterations by construction, and the LP value is a lower bound whose gap
to the incumbent certifies convergence.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .envs import EpisodeConfig, HeatPumpEnv, comfort_deviation
from .heatpump import HeatPumpParams, cop, electricity_used, supply_temperature
from .simplex import LpError, solve_lp
from .thermal import BuildingParams, ThermalState, discretize


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 8
    beta: float = 0.001
    max_iters: int = 12           # outer sequential-LP iterations
    tolerance: float = 1e-4       # stop when the true objective improves less
    comfort_low: float = 21.0
    comfort_high: float = 25.0
    dr_mode: bool = False
    max_anchor_sets: int | None = None   # cut budget; default adapts to horizon
    stall_iters: int = 0          # extra cut-only iterations after a rejected step

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be > 0")

    @property
    def anchor_budget(self) -> int:
        if self.max_anchor_sets is not None:
            return max(4, self.max_anchor_sets)
        return max(4, min(16, 128 // self.horizon))


@dataclass(frozen=True)
class MpcSolution:
    q: np.ndarray                 # W, planned thermal power per step
    t_in: np.ndarray              # degC, predicted indoor trajectory (post-step)
    t_ret: np.ndarray             # degC, predicted return trajectory (post-step)
    objective: float
    iterations: int
    solve_time: float             # s, wall clock
    converged: bool
    lp_basis: np.ndarray | None = None   # warm start for the next solve


def mpc_config_for(env_cfg: EpisodeConfig, horizon: int | None = None,
                   **overrides) -> MpcConfig:
    """MpcConfig matching an environment's objective (like-for-like baseline)."""
    return MpcConfig(
        horizon=env_cfg.forecast_len if horizon is None else horizon,
        beta=env_cfg.beta,
        comfort_low=env_cfg.comfort_low,
        comfort_high=env_cfg.comfort_high,
        dr_mode=env_cfg.dr_mode,
        **overrides,
    )


@lru_cache(maxsize=32)
def _input_sensitivity(building_key: tuple, dt: float, horizon: int) -> np.ndarray:
    """G[k, j] = dT_in(after step k+1) / dq_j, lower triangular (H, H)."""
    building = BuildingParams(*building_key[:5], label=building_key[5])
    ad, bd = discretize(building, dt)
    b_q = bd[:, 1]
    g = np.zeros((horizon, horizon))
    impulse = b_q.copy()          # state response k steps after a unit q
    for lag in range(horizon):
        for k in range(lag, horizon):
            g[k, k - lag] = impulse[0]
        impulse = ad @ impulse
    return g


def _building_key(b: BuildingParams) -> tuple:
    return (b.floor_area, b.c_bldg_specific, b.h_ve_tr, b.h_rad_con, b.c_water, b.label)


def simulate_plan(state: ThermalState, q: np.ndarray, t_out: np.ndarray,
                  price: np.ndarray | None, building: BuildingParams,
                  hp: HeatPumpParams, cfg: MpcConfig, dt: float = 900.0):
    """Roll the exact model over a plan and price the true objective.

    Returns (objective, t_in, t_ret, elec, cops); trajectories are
    post-step, COPs are evaluated at the pre-step return temperature as the
    environment does.
    """
    return _simulate(state, q, t_out, price, building, hp, cfg, dt)


def _simulate(state: ThermalState, q: np.ndarray, t_out: np.ndarray,
              price: np.ndarray | None, building: BuildingParams,
              hp: HeatPumpParams, cfg: MpcConfig, dt: float):
    h = len(q)
    ad, bd = discretize(building, dt)
    x = np.array([state.t_in, state.t_ret])
    t_in = np.empty(h)
    t_ret = np.empty(h)
    elec = np.empty(h)
    cops = np.empty(h)
    objective = 0.0
    for k in range(h):
        q_k = float(q[k])
        cops[k] = cop(t_out[k], supply_temperature(x[1], q_k, hp), hp)
        elec[k] = electricity_used(q_k, t_out[k], x[1], dt, hp)
        x = ad @ x + bd @ np.array([t_out[k], q_k])
        t_in[k] = x[0]
        t_ret[k] = x[1]
        dev = comfort_deviation(x[0], cfg.comfort_low, cfg.comfort_high)
        if cfg.dr_mode:
            objective += cfg.beta * elec[k] * price[k] + dev
        else:
            objective += cfg.beta * elec[k] + dev
    return objective, t_in, t_ret, elec, cops


def _baseline_t_in(state: ThermalState, t_out: np.ndarray, building: BuildingParams,
                   dt: float) -> np.ndarray:
    """Indoor trajectory with q = 0 (the affine offset of the LP dynamics)."""
    ad, bd = discretize(building, dt)
    x = np.array([state.t_in, state.t_ret])
    base = np.empty(len(t_out))
    for k in range(len(t_out)):
        x = ad @ x + bd @ np.array([t_out[k], 0.0])
        base[k] = x[0]
    return base


def _elec_tangent(q: np.ndarray, t_out: np.ndarray, t_ret: np.ndarray, hp: HeatPumpParams,
                  dt: float) -> tuple[np.ndarray, np.ndarray]:
    """(value, slope) of per-step electricity at q, for frozen t_ret.

    Piecewise form of q * (dt/3600) / clamp(COP): linear where a clamp
    binds, smooth rational in between; the slope is exact on each branch.
    """
    hours = dt / 3600.0
    a = t_ret - t_out                # condenser lift at q = 0
    b = 1.0 / hp.flow_capacity
    c = t_ret + 273.15               # supply temperature in kelvin at q = 0
    t_sup = t_ret + b * q
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = hp.carnot_eta * (t_sup + 273.15) / (t_sup - t_out)
    raw = np.where(t_sup <= t_out, np.inf, raw)
    value = np.empty_like(np.asarray(q, dtype=float))
    slope = np.empty_like(value)

    hi = raw >= hp.cop_max
    lo = raw <= hp.cop_min
    mid = ~(hi | lo)
    value[hi] = q[hi] * hours / hp.cop_max
    slope[hi] = hours / hp.cop_max
    value[lo] = q[lo] * hours / hp.cop_min
    slope[lo] = hours / hp.cop_min
    if np.any(mid):
        am, bm, cm, qm = a[mid], b, c[mid], q[mid]
        denom = cm + bm * qm
        value[mid] = hours * qm * (am + bm * qm) / (hp.carnot_eta * denom)
        slope[mid] = hours * (am * cm + 2.0 * bm * cm * qm + bm * bm * qm * qm) / (
            hp.carnot_eta * denom * denom)
    return value, slope


def _solve_cut_lp(anchors: list[np.ndarray], t_out: np.ndarray, t_ret_pre: np.ndarray,
                  base_in: np.ndarray, g: np.ndarray, price: np.ndarray | None,
                  hp: HeatPumpParams, cfg: MpcConfig, dt: float,
                  basis_init: np.ndarray | None = None
                  ) -> tuple[np.ndarray, float, np.ndarray | None]:
    """One cutting-plane LP; returns (q plan, LP lower bound, basis).

    Variables are [q' (scaled to q_max), d, e'] where e' is the
    electricity epigraph already weighted by beta (and the price in DR
    mode), so every coefficient is O(1).  The anchor list has a fixed
    length within a control run, so the returned basis can warm-start the
    next solve.
    """
    h = len(t_out)
    weight = cfg.beta * (price if cfg.dr_mode else np.ones(h))
    q_scale = hp.q_max
    eye = np.eye(h)
    zero = np.zeros((h, h))
    g_scaled = g * q_scale

    rows = [
        np.hstack([-g_scaled, -eye, zero]),   # d_k + G q >= low - base
        np.hstack([g_scaled, -eye, zero]),    # d_k - G q >= base - high
        np.hstack([eye, zero, zero]),         # q' <= 1
    ]
    rhs = [base_in - cfg.comfort_low, cfg.comfort_high - base_in, np.ones(h)]
    for anchor in anchors:
        value, slope = _elec_tangent(anchor, t_out, t_ret_pre, hp, dt)
        # e'_k >= weight * (value + slope * (q - anchor))
        cut = np.zeros((h, 3 * h))
        cut[:, :h] = np.diag(weight * slope * q_scale)
        cut[:, 2 * h:] = -eye
        rows.append(cut)
        rhs.append(-(weight * (value - slope * anchor)))

    c = np.concatenate([np.zeros(h), np.ones(h), np.ones(h)])
    result = solve_lp(c, np.vstack(rows), np.concatenate(rhs), basis_init=basis_init)
    if not result.ok:
        raise LpError(f"horizon LP ended with status {result.status}")
    q_plan = np.clip(result.x[:h] * q_scale, 0.0, hp.q_max)
    return q_plan, result.objective, result.basis


def solve_horizon(state: ThermalState, t_out_forecast: np.ndarray,
                  price_forecast: np.ndarray | None, building: BuildingParams,
                  hp: HeatPumpParams, cfg: MpcConfig, dt: float = 900.0,
                  q_init: np.ndarray | None = None,
                  basis_init: np.ndarray | None = None) -> MpcSolution:
    """Sequential-LP minimization of the horizon objective."""
    started = time.perf_counter()
    h = cfg.horizon
    t_out = np.asarray(t_out_forecast, dtype=float)
    if len(t_out) < h:
        raise ValueError(f"forecast has {len(t_out)} steps, horizon needs {h}")
    t_out = t_out[:h]
    price = None
    if cfg.dr_mode:
        if price_forecast is None:
            raise ValueError("DR mode requires a price forecast")
        price = np.asarray(price_forecast, dtype=float)[:h]
        if len(price) < h:
            raise ValueError("price forecast shorter than horizon")

    g = _input_sensitivity(_building_key(building), float(dt), h)
    base_in = _baseline_t_in(state, t_out, building, dt)

    if q_init is None:
        q = np.zeros(h)
    else:
        q = np.clip(np.asarray(q_init, dtype=float)[:h], 0.0, hp.q_max)
        if len(q) < h:
            q = np.concatenate([q, np.zeros(h - len(q))])
    objective, t_in, t_ret, _, _ = _simulate(state, q, t_out, price, building, hp, cfg, dt)

    # fixed-length anchor list (endpoints, midpoint, then a FIFO of recent
    # plans) so the LP layout is identical between solves and across the
    # receding-horizon loop, keeping warm bases transferable
    pinned = [np.zeros(h), np.full(h, hp.q_max), np.full(h, 0.5 * hp.q_max)]
    fifo = [q.copy() for _ in range(cfg.anchor_budget - len(pinned))]
    basis = basis_init
    iterations = 0
    converged = False
    stalls = 0
    prev_q_lp: np.ndarray | None = None
    for _ in range(cfg.max_iters):
        iterations += 1
        t_ret_pre = np.concatenate([[state.t_ret], t_ret[:-1]])
        q_lp, lp_value, basis = _solve_cut_lp(pinned + fifo, t_out, t_ret_pre, base_in,
                                              g, price, hp, cfg, dt, basis_init=basis)
        accepted = False
        improvement = 0.0
        for alpha in (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125):
            q_try = q + alpha * (q_lp - q)
            obj_try, t_in_try, t_ret_try, _, _ = _simulate(
                state, q_try, t_out, price, building, hp, cfg, dt)
            if obj_try < objective:
                improvement = objective - obj_try
                q, objective, t_in, t_ret = q_try, obj_try, t_in_try, t_ret_try
                accepted = True
                break
        if objective - lp_value <= cfg.tolerance:
            converged = True    # incumbent certified against the LP lower bound
            break
        if accepted:
            stalls = 0
            if improvement < cfg.tolerance:
                converged = True    # objective change fell below tolerance
                break
        else:
            # a rejected step still contributes its cut; allow a configured
            # number of cut-only refinements before settling for the incumbent
            stalls += 1
            if stalls > cfg.stall_iters:
                break
            if prev_q_lp is not None and np.array_equal(q_lp, prev_q_lp):
                break           # cuts stopped changing; report the best incumbent
        prev_q_lp = q_lp
        fifo = fifo[1:] + [q_lp]            # evict the oldest cut anchor
        if accepted and len(fifo) > 1 and not np.array_equal(q, q_lp):
            fifo = fifo[1:] + [q.copy()]    # keep a tangent at the new incumbent

    return MpcSolution(q=q, t_in=t_in, t_ret=t_ret, objective=objective,
                       iterations=iterations, solve_time=time.perf_counter() - started,
                       converged=converged, lp_basis=basis)


@dataclass
class MpcRun:
    trace: list
    solve_time: float                 # s, total planning wall time
    prediction_error: float           # degC, max |planned next T_in - realized|
    iterations_total: int


def receding_horizon_control(env: HeatPumpEnv, cfg: MpcConfig) -> MpcRun:
    """Plan, apply the first input, re-observe, repeat until the episode ends.

    The horizon shrinks to the remaining forecast near the episode end.
    The environment must be freshly reset.
    """
    if env.done:
        raise RuntimeError("environment must be reset before receding-horizon control")
    building, hp, dt = env.cfg.building, env.cfg.hp, env.cfg.dt
    warm: np.ndarray | None = None
    basis: np.ndarray | None = None
    solve_time = 0.0
    iterations = 0
    prediction_error = 0.0
    while not env.done:
        t_out_fc = env.forecast_outdoor(cfg.horizon)
        price_fc = env.forecast_price(cfg.horizon) if cfg.dr_mode else None
        if len(t_out_fc) == cfg.horizon:
            step_cfg = cfg
        else:
            step_cfg = replace(cfg, horizon=len(t_out_fc))
            basis = None        # shrunken horizon changes the LP layout
        sol = solve_horizon(env.state, t_out_fc, price_fc, building, hp, step_cfg,
                            dt=dt, q_init=warm, basis_init=basis)
        solve_time += sol.solve_time
        iterations += sol.iterations
        env.step_power(float(sol.q[0]))
        prediction_error = max(prediction_error, abs(sol.t_in[0] - env.state.t_in))
        warm = np.concatenate([sol.q[1:], [0.0]])
        basis = sol.lp_basis    # same LP layout next step; staleness is repaired
    return MpcRun(trace=list(env.trace), solve_time=solve_time,
                  prediction_error=prediction_error, iterations_total=iterations)


__all__ = [
    "MpcConfig",
    "MpcRun",
    "MpcSolution",
    "mpc_config_for",
    "receding_horizon_control",
    "simulate_plan",
    "solve_horizon",
]

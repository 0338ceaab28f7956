"""Shared test utilities."""

import itertools

import numpy as np

from heatbench.envs import Observation, StepResult
from heatbench.heatpump import electricity_used
from heatbench.thermal import SimInputs, step_exact


class BanditEnv:
    """One-step environment: reward = -|clip(a) - 0.5|; optimum at a = 0.5."""

    def __init__(self):
        self._obs = Observation(raw=np.zeros(1), standardized=np.zeros(1))

    def reset(self):
        return self._obs

    def step(self, a: float) -> StepResult:
        action = float(np.clip(a, -1.0, 1.0))
        return StepResult(next_obs=self._obs, reward=-abs(action - 0.5),
                          electricity=0.0, comfort_deviation=0.0, cost=0.0,
                          done=True, info={})


def plan_objective(state, q_plan, t_out, building, hp, beta, price=None,
                   comfort=(21.0, 25.0), dt=900.0):
    """Horizon objective computed step by step from the public primitives.

    Independent of the planner internals: advances `step_exact`, prices
    electricity at the pre-step return temperature, and penalizes post-step
    band violations.
    """
    low, high = comfort
    total = 0.0
    for k, q in enumerate(q_plan):
        elec = electricity_used(float(q), float(t_out[k]), state.t_ret, dt, hp)
        state = step_exact(state, building, SimInputs(t_out=float(t_out[k]),
                                                      q_hp=float(q), dt=dt))
        dev = max(0.0, low - state.t_in) + max(0.0, state.t_in - high)
        weight = beta * (price[k] if price is not None else 1.0)
        total += weight * elec + dev
    return total


def grid_search_objective(state, t_out, building, hp, beta, levels, horizon,
                          price=None, comfort=(21.0, 25.0), dt=900.0):
    """Exhaustive enumeration over a power grid; returns (best objective, plan).

    All level**horizon trajectories are simulated in one numpy batch with
    the same electricity semantics as the heat pump module.
    """
    from heatbench.thermal import step_exact_batch

    low, high = comfort
    combos = np.array(list(itertools.product(levels, repeat=horizon)), dtype=float)
    states = np.tile([state.t_in, state.t_ret], (len(combos), 1))
    total = np.zeros(len(combos))
    for k in range(horizon):
        q = combos[:, k]
        t_sup = states[:, 1] + q / hp.flow_capacity
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = hp.carnot_eta * (t_sup + 273.15) / (t_sup - t_out[k])
        cop = np.where(t_sup <= t_out[k], hp.cop_max,
                       np.clip(raw, hp.cop_min, hp.cop_max))
        elec = np.where(q == 0.0, 0.0, q * (dt / 3600.0) / cop)
        states = step_exact_batch(states, building, float(t_out[k]), q, dt)
        dev = np.maximum(0.0, low - states[:, 0]) + np.maximum(0.0, states[:, 0] - high)
        weight = beta * (price[k] if price is not None else 1.0)
        total += weight * elec + dev
    best = int(np.argmin(total))
    return float(total[best]), combos[best]


def gradcheck(loss_fn, params, h=1e-5, floor_rel=1e-6):
    """Central-difference check of d loss / d params.

    Returns (max per-coordinate relative error with a magnitude floor,
    norm-wise relative error).  loss_fn() must return (loss, grads).
    """
    _, grads = loss_fn()
    analytic = []
    numeric = []
    for name in sorted(params):
        flat = params[name].ravel()
        gflat = grads[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up, _ = loss_fn()
            flat[i] = orig - h
            dn, _ = loss_fn()
            flat[i] = orig
            analytic.append(gflat[i])
            numeric.append((up - dn) / (2.0 * h))
    analytic = np.array(analytic)
    numeric = np.array(numeric)
    scale = max(1.0, np.abs(analytic).max())
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor_rel * scale)
    per_coord = float(np.max(np.abs(analytic - numeric) / denom))
    normwise = float(np.linalg.norm(analytic - numeric) /
                     max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-300))
    return per_coord, normwise

"""Proximal policy optimization with a Gaussian policy, from scratch.

Actor and critic are separate 2x64 tanh networks (`nets.Mlp`); the policy
standard deviation is a single state-independent learnable log-std.  The
update maximizes the clipped surrogate

    E[ min(rho * A, clip(rho, 1-eps, 1+eps) * A) ]
      - value_coef * E[(V - returns)^2] + entropy_coef * H

with advantages from generalized advantage estimation, normalized per
minibatch, and a global gradient-norm clip, all via hand-written
gradients and Adam.  Training, evaluation and checkpointing are
deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import DatasetSplit, sample_training_month
from .envs import EpisodeConfig, HeatPumpEnv, Observation, RunningNormalizer
from .nets import Adam, Mlp, clip_grads_

LOG_2PI = float(np.log(2.0 * np.pi))
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Non-finite loss or parameters during training."""


@dataclass(frozen=True)
class TrainerConfig:
    total_steps: int = 1_000_000
    rollout_len: int = 2048
    minibatch_size: int = 64
    epochs: int = 10
    clip_eps: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    seeds: int = 5
    validate_every_episodes: int = 7
    validation_windows: int = 2

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0 and 0.0 < self.gae_lambda <= 1.0):
            raise ValueError("gamma and gae_lambda must lie in (0, 1]")
        if self.clip_eps <= 0.0:
            raise ValueError("clip_eps must be > 0")

    @staticmethod
    def for_episodes(episodes: int, episode_len: int = 2880, **kwargs) -> "TrainerConfig":
        return TrainerConfig(total_steps=episodes * episode_len, **kwargs)


class ActorCritic:
    """Policy mean network + log-std parameter + value network."""

    def __init__(self, obs_dim: int, hidden: int = 64):
        self.obs_dim = obs_dim
        self.pi = Mlp("pi", obs_dim, hidden)
        self.vf = Mlp("vf", obs_dim, hidden)

    def init_params(self, rng: np.random.Generator) -> dict:
        params = self.pi.init_params(rng, head_gain=0.01)
        params.update(self.vf.init_params(rng, head_gain=1.0))
        params["log_std"] = np.zeros(1)
        return params

    def forward(self, params: dict, obs: np.ndarray):
        """(means, values, caches) for a (B, obs_dim) batch."""
        mean, pi_cache = self.pi.forward(params, obs)
        value, vf_cache = self.vf.forward(params, obs)
        return mean, value, (pi_cache, vf_cache)

    def policy_forward(self, params: dict, obs: np.ndarray) -> tuple[float, float, float]:
        """Single-observation (mean, log_std, value)."""
        obs = np.asarray(obs, dtype=float)
        if obs.shape != (self.obs_dim,):
            raise ValueError(f"expected obs of shape ({self.obs_dim},), got {obs.shape}")
        mean, value, _ = self.forward(params, obs[None, :])
        return float(mean[0]), float(params["log_std"][0]), float(value[0])


def gaussian_logprob(actions: np.ndarray, means: np.ndarray, log_std: float) -> np.ndarray:
    z = (actions - means) / np.exp(log_std)
    return -0.5 * z * z - log_std - 0.5 * LOG_2PI


def sample_action(mean: float, log_std: float, rng: np.random.Generator) -> tuple[float, float]:
    """Draw from Normal(mean, exp(log_std)); the env clips to [-1, 1] later."""
    action = mean + np.exp(log_std) * rng.standard_normal()
    logp = gaussian_logprob(np.array([action]), np.array([mean]), log_std)[0]
    return float(action), float(logp)


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                gamma: float, lam: float, bootstrap_value: float = 0.0):
    """delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t, accumulated with
    factor gamma*lam*(1 - done_t); returns (advantages, returns)."""
    n = len(rewards)
    if not (len(values) == len(dones) == n):
        raise ValueError("rewards, values, dones must have equal length")
    advantages = np.zeros(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 1.0 - float(dones[t])
        next_value = bootstrap_value if t == n - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        advantages[t] = last
    return advantages, advantages + values


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def finalize(self, gamma: float, lam: float, bootstrap_value: float) -> None:
        assert self.advantages is None, "rollout already finalized"
        self.advantages, self.returns = compute_gae(
            self.rewards, self.values, self.dones, gamma, lam, bootstrap_value)
        if not np.all(np.isfinite(self.advantages)):
            raise TrainingDiverged("non-finite advantages")


def ppo_loss_and_grads(ac: ActorCritic, params: dict, batch: dict, cfg: TrainerConfig):
    """Total loss, named gradients and diagnostics for one minibatch.

    `batch` holds obs, actions, old_log_probs, advantages (already
    normalized), returns.  Gradients are exact; tests check them against
    central finite differences.
    """
    obs, actions = batch["obs"], batch["actions"]
    old_logp, adv, returns = batch["old_log_probs"], batch["advantages"], batch["returns"]
    b = len(actions)

    means, pi_cache = ac.pi.forward(params, obs)
    values, vf_cache = ac.vf.forward(params, obs)
    log_std = float(params["log_std"][0])
    std = np.exp(log_std)

    logp = gaussian_logprob(actions, means, log_std)
    ratio = np.exp(logp - old_logp)
    clipped_out = ((ratio > 1.0 + cfg.clip_eps) & (adv > 0.0)) | \
                  ((ratio < 1.0 - cfg.clip_eps) & (adv < 0.0))
    surrogate = np.where(clipped_out,
                         np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv,
                         ratio * adv)
    policy_loss = -float(np.mean(surrogate))
    value_err = values - returns
    value_loss = float(np.mean(value_err * value_err))
    entropy = 0.5 * (1.0 + LOG_2PI) + log_std
    total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    if not np.isfinite(total):
        raise TrainingDiverged(f"non-finite loss {total}")

    # d total / d logp, zero where the clipped branch is active
    dlogp = np.where(clipped_out, 0.0, -(1.0 / b) * adv * ratio)
    z = (actions - means) / std
    dmeans = dlogp * z / std
    dlog_std = float(np.sum(dlogp * (z * z - 1.0))) - cfg.entropy_coef
    dvalues = cfg.value_coef * 2.0 * value_err / b

    grads = ac.pi.backward(params, pi_cache, dmeans)
    grads.update(ac.vf.backward(params, vf_cache, dvalues))
    grads["log_std"] = np.array([dlog_std])

    stats = {
        "loss": total,
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy,
        "clip_fraction": float(np.mean(clipped_out)),
    }
    return total, grads, stats


def ppo_update(buffer: RolloutBuffer, ac: ActorCritic, params: dict, adam: Adam,
               cfg: TrainerConfig, rng: np.random.Generator) -> dict:
    """Epochs of shuffled minibatch updates over one finalized rollout."""
    assert buffer.advantages is not None, "finalize the rollout first"
    n = len(buffer.actions)
    agg: dict[str, float] = {}
    count = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            adv = buffer.advantages[idx]
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            batch = {
                "obs": buffer.obs[idx],
                "actions": buffer.actions[idx],
                "old_log_probs": buffer.log_probs[idx],
                "advantages": adv,
                "returns": buffer.returns[idx],
            }
            _, grads, stats = ppo_loss_and_grads(ac, params, batch, cfg)
            clip_grads_(grads, cfg.max_grad_norm)
            adam.step(params, grads)
            for k, v in stats.items():
                agg[k] = agg.get(k, 0.0) + v
            count += 1
    for k in params:
        if not np.all(np.isfinite(params[k])):
            raise TrainingDiverged(f"non-finite parameter {k}")
    return {k: v / count for k, v in agg.items()}


def act_deterministic_params(ac: ActorCritic, params: dict, obs: np.ndarray) -> float:
    """Clipped mean action, no sampling."""
    mean, _, _ = ac.policy_forward(params, obs)
    return float(np.clip(mean, -1.0, 1.0))


# ---------------------------------------------------------------------------
# Checkpoints


@dataclass
class PolicyCheckpoint:
    params: dict
    norm_mean: np.ndarray
    norm_var: np.ndarray
    norm_count: float
    obs_dim: int
    config_fingerprint: str
    eval_score: float
    version: int = CHECKPOINT_VERSION

    def actor_critic(self) -> ActorCritic:
        return ActorCritic(self.obs_dim)

    def normalizer(self, cfg: EpisodeConfig) -> RunningNormalizer:
        norm = RunningNormalizer.from_moments(self.norm_mean, self.norm_var,
                                              self.norm_count, clip=cfg.obs_clip,
                                              epsilon=cfg.obs_epsilon)
        norm.frozen = True
        return norm


def act_deterministic(ckpt: PolicyCheckpoint, obs: np.ndarray) -> float:
    return act_deterministic_params(ckpt.actor_critic(), ckpt.params, obs)


def save_checkpoint(ckpt: PolicyCheckpoint, path) -> None:
    """Self-describing npz: one float64 array per named parameter, the
    normalizer moments, and a JSON `meta` entry (version, fingerprint,
    score, obs_dim, parameter names)."""
    arrays = {f"param/{k}": np.asarray(v, dtype=float) for k, v in ckpt.params.items()}
    arrays["norm/mean"] = np.asarray(ckpt.norm_mean, dtype=float)
    arrays["norm/var"] = np.asarray(ckpt.norm_var, dtype=float)
    arrays["norm/count"] = np.array([float(ckpt.norm_count)])
    meta = {
        "version": ckpt.version,
        "obs_dim": ckpt.obs_dim,
        "config_fingerprint": ckpt.config_fingerprint,
        "eval_score": ckpt.eval_score,
        "params": sorted(ckpt.params.keys()),
    }
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez(path, **arrays)


def load_checkpoint(path) -> PolicyCheckpoint:
    with np.load(path, allow_pickle=False) as npz:
        meta = json.loads(str(npz["meta"]))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        params = {k: npz[f"param/{k}"] for k in meta["params"]}
        return PolicyCheckpoint(
            params=params,
            norm_mean=npz["norm/mean"],
            norm_var=npz["norm/var"],
            norm_count=float(npz["norm/count"][0]),
            obs_dim=int(meta["obs_dim"]),
            config_fingerprint=meta["config_fingerprint"],
            eval_score=float(meta["eval_score"]),
            version=int(meta["version"]),
        )


# ---------------------------------------------------------------------------
# Training


def collect_rollout(env, reset_fn, ac: ActorCritic, params: dict, n_steps: int,
                    rng: np.random.Generator, obs: Observation):
    """Gather n_steps transitions, resetting on episode end.

    Returns (buffer, next_obs, episodes_finished, bootstrap_value).
    """
    obs_buf = np.empty((n_steps, ac.obs_dim))
    act_buf = np.empty(n_steps)
    logp_buf = np.empty(n_steps)
    rew_buf = np.empty(n_steps)
    val_buf = np.empty(n_steps)
    done_buf = np.empty(n_steps)
    episodes = 0
    for i in range(n_steps):
        mean, log_std, value = ac.policy_forward(params, obs.standardized)
        action, logp = sample_action(mean, log_std, rng)
        result = env.step(action)
        obs_buf[i] = obs.standardized
        act_buf[i] = action
        logp_buf[i] = logp
        rew_buf[i] = result.reward
        val_buf[i] = value
        done_buf[i] = float(result.done)
        if result.done:
            episodes += 1
            obs = reset_fn(env)
        else:
            obs = result.next_obs
    if done_buf[-1]:
        bootstrap = 0.0
    else:
        _, _, bootstrap = ac.policy_forward(params, obs.standardized)
    buffer = RolloutBuffer(obs=obs_buf, actions=act_buf, log_probs=logp_buf,
                           rewards=rew_buf, values=val_buf, dones=done_buf)
    return buffer, obs, episodes, bootstrap


def evaluate_policy(ac: ActorCritic, params: dict, norm: RunningNormalizer,
                    env_cfg: EpisodeConfig, windows) -> dict:
    """Deterministic per-step means over the given windows (frozen normalizer)."""
    env = HeatPumpEnv(env_cfg, training=False)
    env.normalizer = norm
    total = {"reward": 0.0, "electricity": 0.0, "deviation": 0.0, "cost": 0.0}
    steps = 0
    for window in windows:
        obs = env.reset(window)
        done = False
        while not done:
            action = act_deterministic_params(ac, params, obs.standardized)
            result = env.step(action)
            total["reward"] += result.reward
            total["electricity"] += result.electricity
            total["deviation"] += result.comfort_deviation
            total["cost"] += result.cost
            steps += 1
            obs = result.next_obs
            done = result.done
    return {k: v / steps for k, v in total.items()} | {"steps": steps}


def _frozen_norm_copy(norm: RunningNormalizer) -> RunningNormalizer:
    m = norm.moments()
    frozen = RunningNormalizer.from_moments(m["mean"], m["var"], m["count"][0],
                                            clip=norm.clip, epsilon=norm.epsilon)
    frozen.frozen = True
    return frozen


def validation_windows(split: DatasetSplit, count: int) -> list:
    """Fixed, deterministic validation windows spread over the train list."""
    if not split.train:
        raise ValueError("empty training split")
    count = min(count, len(split.train))
    idx = np.unique(np.linspace(0, len(split.train) - 1, count).astype(int))
    return [split.train[i] for i in idx]


def train_single_seed(split: DatasetSplit, env_cfg: EpisodeConfig, cfg: TrainerConfig,
                      seed_seq: np.random.SeedSequence, val_windows) -> tuple[dict, list]:
    """One PPO run; returns (best snapshot, learning-curve rows)."""
    init_rng, rollout_rng, shuffle_rng, window_rng = \
        [np.random.default_rng(s) for s in seed_seq.spawn(4)]
    ac = ActorCritic(env_cfg.obs_dim)
    params = ac.init_params(init_rng)
    adam = Adam(cfg.learning_rate)
    env = HeatPumpEnv(env_cfg, training=True)

    def reset_fn(e):
        return e.reset(sample_training_month(split, window_rng))

    curve: list[tuple] = []
    best = {"score": -np.inf, "params": None, "norm": None, "step": 0}

    def validate(step_count):
        frozen = _frozen_norm_copy(env.normalizer)
        metrics = evaluate_policy(ac, params, frozen, env_cfg, val_windows)
        curve.append((step_count, metrics["reward"], metrics["electricity"],
                      metrics["deviation"]))
        if metrics["reward"] > best["score"]:
            best.update(score=metrics["reward"],
                        params={k: v.copy() for k, v in params.items()},
                        norm=frozen, step=step_count)

    validate(0)
    obs = reset_fn(env)
    steps = 0
    episodes = 0
    validated_at = 0
    while steps < cfg.total_steps:
        n = min(cfg.rollout_len, cfg.total_steps - steps)
        buffer, obs, new_eps, bootstrap = collect_rollout(
            env, reset_fn, ac, params, n, rollout_rng, obs)
        buffer.finalize(cfg.gamma, cfg.gae_lambda, bootstrap)
        ppo_update(buffer, ac, params, adam, cfg, shuffle_rng)
        steps += n
        episodes += new_eps
        if episodes - validated_at >= cfg.validate_every_episodes:
            validated_at = episodes
            validate(steps)
    if not curve or curve[-1][0] != steps:
        validate(steps)
    return best, curve


def train(split: DatasetSplit, env_cfg: EpisodeConfig, cfg: TrainerConfig,
          base_seed: int = 0) -> tuple[PolicyCheckpoint, list[list[tuple]]]:
    """Multi-seed training; keeps the best validation-scored policy overall.

    Returns (checkpoint, per-seed learning curves); curve rows are
    (step, mean_eval_reward, elec_mean, dev_mean).
    """
    val_windows = validation_windows(split, cfg.validation_windows)
    curves = []
    best_overall = None
    for s in range(cfg.seeds):
        seed_seq = np.random.SeedSequence([int(base_seed), s])
        best, curve = train_single_seed(split, env_cfg, cfg, seed_seq, val_windows)
        curves.append(curve)
        if best_overall is None or best["score"] > best_overall["score"]:
            best_overall = best
    moments = best_overall["norm"].moments()
    ckpt = PolicyCheckpoint(
        params=best_overall["params"],
        norm_mean=moments["mean"],
        norm_var=moments["var"],
        norm_count=moments["count"][0],
        obs_dim=env_cfg.obs_dim,
        config_fingerprint=env_cfg.fingerprint(),
        eval_score=best_overall["score"],
    )
    return ckpt, curves


__all__ = [
    "ActorCritic",
    "PolicyCheckpoint",
    "RolloutBuffer",
    "TrainerConfig",
    "TrainingDiverged",
    "act_deterministic",
    "act_deterministic_params",
    "collect_rollout",
    "compute_gae",
    "evaluate_policy",
    "gaussian_logprob",
    "load_checkpoint",
    "ppo_loss_and_grads",
    "ppo_update",
    "sample_action",
    "save_checkpoint",
    "train",
    "train_single_seed",
    "validation_windows",
]

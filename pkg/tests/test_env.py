import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from heatbench.config import preset
from heatbench.envs import (EpisodeDone, HeatPumpEnv, RunningNormalizer,
                            WindowTooShort, comfort_deviation, read_trace_csv,
                            rescale_action, reward, reward_dr, write_trace_csv)


def short_cfg(dr=False, episode_len=300, forecast_len=8, building="old"):
    base = preset(building, dr=dr).episode
    return replace(base, episode_len=episode_len, forecast_len=forecast_len)


def test_rescale_endpoints():
    assert rescale_action(-1.0, 12000.0) == 0.0
    assert rescale_action(1.0, 12000.0) == 12000.0
    assert rescale_action(0.0, 12000.0) == 6000.0
    assert rescale_action(3.7, 12000.0) == 12000.0
    assert rescale_action(-5.0, 12000.0) == 0.0


def test_comfort_deviation_band():
    assert comfort_deviation(22.0) == 0.0
    assert comfort_deviation(20.5) == pytest.approx(0.5)
    assert comfort_deviation(25.3) == pytest.approx(0.3)


def test_reward_values():
    assert reward(0.0, 0.0, 0.001) == 0.0
    assert reward(300.0, 0.0, 0.001) == pytest.approx(-0.3)
    assert reward(300.0, 0.5, 0.001) == pytest.approx(-0.8)
    assert reward_dr(0.0, 5.0, 0.0, 0.1) == 0.0
    assert reward_dr(300.0, 0.004, 0.0, 0.1) == pytest.approx(-0.12)
    assert reward_dr(1e6, 0.0, 0.5, 0.1) == pytest.approx(-0.5)


@given(st.floats(0, 1000), st.floats(0, 5), st.floats(1e-6, 1.0))
@settings(max_examples=100, deadline=None)
def test_reward_never_positive(elec, dev, beta):
    assert reward(elec, dev, beta) <= 0.0
    assert reward_dr(elec, 0.003, dev, beta) <= 0.0


def test_reset_window_boundaries(small_split):
    cfg = short_cfg()
    env = HeatPumpEnv(cfg)
    window = small_split.train[0]

    class Short:
        t_out = window.t_out[:cfg.episode_len + cfg.forecast_len - 1]

    with pytest.raises(WindowTooShort):
        env.reset(Short())

    class Exact:
        t_out = window.t_out[:cfg.episode_len + cfg.forecast_len]

    obs = env.reset(Exact())
    assert len(obs.raw) == 3 + cfg.forecast_len


def test_observation_layout_base_and_dr(small_split_dr):
    base = HeatPumpEnv(short_cfg(episode_len=300, forecast_len=8))
    obs = base.reset(small_split_dr.train[0])
    assert len(obs.raw) == 11
    w = small_split_dr.train[0]
    assert obs.raw[0] == 21.0 and obs.raw[1] == 25.0
    assert obs.raw[2] == w.t_out[0]
    assert list(obs.raw[3:]) == list(w.t_out[1:9])

    dr_cfg = replace(preset("efficient", dr=True).episode, episode_len=300, forecast_len=32)
    dr = HeatPumpEnv(dr_cfg)
    obs = dr.reset(w)
    assert len(obs.raw) == 3 + 1 + 2 * 32
    assert obs.raw[2] == w.t_out[0]
    assert obs.raw[3] == w.price[0]
    assert obs.raw[4] == w.t_out[1]
    assert obs.raw[5] == w.price[1]


def test_cooling_without_heat(small_split):
    env = HeatPumpEnv(short_cfg())
    env.reset(small_split.train[0])   # january window, cold outside
    temps = []
    for _ in range(50):
        result = env.step(-1.0)
        temps.append(result.info["t_in"])
    assert all(b < a for a, b in zip(temps, temps[1:]))


def test_reward_recomputable_from_components(small_split):
    cfg = short_cfg()
    env = HeatPumpEnv(cfg)
    env.reset(small_split.train[0])
    for a in np.linspace(-1, 1, 40):
        r = env.step(float(a))
        assert r.reward == reward(r.electricity, r.comfort_deviation, cfg.beta)


def test_dr_reward_recomputable(small_split_dr):
    cfg = replace(preset("efficient", dr=True).episode, episode_len=300, forecast_len=32)
    env = HeatPumpEnv(cfg)
    env.reset(small_split_dr.train[0])
    for a in np.linspace(-1, 1, 20):
        r = env.step(float(a))
        price = r.cost / r.electricity if r.electricity else 0.0
        assert r.reward == reward_dr(r.electricity, price, r.comfort_deviation, cfg.beta)
        assert r.cost == r.electricity * price


def test_episode_terminates_and_refuses_more(small_split):
    cfg = short_cfg(episode_len=30)
    env = HeatPumpEnv(cfg)
    env.reset(small_split.train[0])
    for i in range(30):
        result = env.step(0.0)
    assert result.done
    with pytest.raises(EpisodeDone):
        env.step(0.0)


def test_trajectory_bit_identical(small_split):
    actions = np.sin(np.arange(60))
    traces = []
    for _ in range(2):
        env = HeatPumpEnv(short_cfg(episode_len=60))
        env.reset(small_split.train[0])
        for a in actions:
            env.step(float(a))
        traces.append(list(env.trace))
    assert traces[0] == traces[1]


def test_constant_price_dr_reward_equals_rescaled_base():
    # with price fixed at a power of two, the DR reward is exactly the base
    # reward evaluated at beta' = beta * price
    price, beta = 0.25, 0.004
    for elec, dev in [(0.0, 0.0), (312.5, 0.1), (800.0, 1.3)]:
        assert reward_dr(elec, price, dev, beta) == reward(elec, dev, beta * price)


def test_trace_csv_roundtrip(tmp_path, small_split):
    env = HeatPumpEnv(short_cfg(episode_len=40))
    env.reset(small_split.train[0])
    for _ in range(40):
        env.step(0.3)
    path = tmp_path / "trace.csv"
    write_trace_csv(env.trace, path)
    data = read_trace_csv(path)
    assert len(data["step"]) == 40
    assert data["t_in"][-1] == env.trace[-1][2]
    # byte-identical on rewrite
    first = path.read_bytes()
    write_trace_csv(env.trace, path)
    assert path.read_bytes() == first


class TestNormalizer:
    def test_first_observation_standardizes_to_zero(self):
        norm = RunningNormalizer(3)
        out = norm.update_apply(np.array([5.0, -2.0, 100.0]))
        assert np.allclose(out, 0.0)

    def test_constant_stream_stays_zero(self):
        norm = RunningNormalizer(2)
        for _ in range(50):
            out = norm.update_apply(np.array([7.0, -1.0]))
        assert np.allclose(out, 0.0)

    def test_alternating_stream_matches_hand_recursion(self):
        # independent recursion: mean_k and population variance over prefix
        norm = RunningNormalizer(1, clip=10.0, epsilon=1e-8)
        seen = []
        for i in range(10):
            x = float(i % 2 * 2)        # 0, 2, 0, 2, ...
            seen.append(x)
            out = norm.update_apply(np.array([x]))
            mean = np.mean(seen)
            var = np.mean((np.array(seen) - mean) ** 2)
            expected = np.clip((x - mean) / np.sqrt(var + 1e-8), -10, 10)
            assert out[0] == pytest.approx(expected, abs=1e-12)
        assert norm.mean[0] == pytest.approx(1.0)

    def test_roundtrip_inversion(self, rng):
        norm = RunningNormalizer(4)
        for _ in range(30):
            norm.update(rng.normal(size=4) * 10)
        raw = rng.normal(size=4) * 3       # well inside the clip range
        out = norm.apply(raw)
        back = norm.invert(out)
        assert np.allclose(back, raw, atol=1e-9)

    def test_clipping_bounds_output(self):
        norm = RunningNormalizer(1, clip=10.0)
        for x in [0.0, 0.001, -0.001]:
            norm.update(np.array([x]))
        out = norm.apply(np.array([1e9]))
        assert out[0] == 10.0

    def test_frozen_mode_does_not_update(self):
        norm = RunningNormalizer(1)
        norm.update(np.array([1.0]))
        norm.frozen = True
        before = norm.moments()
        norm.update_apply(np.array([100.0]))
        after = norm.moments()
        assert before["mean"] == after["mean"]
        assert before["count"] == after["count"]

    def test_moments_restore(self):
        norm = RunningNormalizer(2)
        for i in range(10):
            norm.update(np.array([i, -i], dtype=float))
        m = norm.moments()
        clone = RunningNormalizer.from_moments(m["mean"], m["var"], m["count"][0])
        x = np.array([3.3, -1.1])
        assert np.allclose(norm.apply(x), clone.apply(x))

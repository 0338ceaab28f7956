"""Command-line entry point.

Subcommands: simulate, train, evaluate, mpc, compare, plot, synth-data.
Exit codes: 0 success, 1 usage error, 2 data error, 3 simulation or
training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import data as datamod
from .config import WorkbenchConfig, dump_config, load_config
from .envs import HeatPumpEnv, write_trace_csv, format_float
from .harness import (ConstantPowerController, HeatingCurveController, MpcController,
                      PolicyController, RandomController, UsageError, compare,
                      evaluate_controller, render_report_csv, render_report_text,
                      report_to_dict)
from .ppo import TrainingDiverged, load_checkpoint, save_checkpoint, train
from .thermal import SimulationDiverged


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="JSON config overrides")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--building", choices=["old", "efficient"], default="old")
    p.add_argument("--dr", action="store_true", help="demand-response mode")
    p.add_argument("--weather", type=Path, default=None, help="weather CSV (timestamp,value)")
    p.add_argument("--prices", type=Path, default=None, help="price CSV (timestamp,value)")
    p.add_argument("--synthetic-seed", type=int, default=None,
                   help="seed for the built-in data synthesizers")


def build_parser() -> _Parser:
    parser = _Parser(prog="heatbench",
                     description="Heat-pump control workbench: simulate, train, compare.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="write synthetic weather/price CSVs")
    _add_common(p)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("simulate", help="run one window under a scripted controller")
    _add_common(p)
    p.add_argument("--controller", default="heating-curve",
                   help="heating-curve | random | constant:<W> | checkpoint:<path>")
    p.add_argument("--window", default="test:0", help="test:<i> or train:<i>")
    p.add_argument("--trace", type=Path, required=True, help="trace CSV output")

    p = sub.add_parser("train", help="train the PPO agent (multi-seed, best kept)")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True, help="checkpoint output (.npz)")
    p.add_argument("--curve-prefix", type=Path, default=None,
                   help="learning-curve CSV prefix (one file per seed)")
    p.add_argument("--total-steps", type=int, default=None)
    p.add_argument("--n-seeds", type=int, default=None)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on the test windows")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--metrics-out", type=Path, default=None, help="metrics CSV output")
    p.add_argument("--trace-dir", type=Path, default=None)

    p = sub.add_parser("mpc", help="receding-horizon MPC over the test windows")
    _add_common(p)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--metrics-out", type=Path, default=None)
    p.add_argument("--trace-dir", type=Path, default=None)

    p = sub.add_parser("compare", help="Table-style controller comparison")
    _add_common(p)
    p.add_argument("--controllers", required=True,
                   help="comma list: mpc | heating-curve | random | constant:<W> "
                        "| drl=<ckpt>")
    p.add_argument("--dr-baseline", type=Path, default=None,
                   help="price-agnostic checkpoint for the DR comparison column")
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("plot", help="render an episode trace as SVG panels")
    _add_common(p)
    p.add_argument("--trace", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("show-config", help="print the resolved configuration")
    _add_common(p)
    return parser


def _load_workbench(args) -> WorkbenchConfig:
    cfg = load_config(args.config, building=args.building, dr=args.dr)
    if args.synthetic_seed is not None:
        cfg = replace(cfg, data=replace(cfg.data, synthetic_seed=args.synthetic_seed))
    return cfg


def _load_split(args, cfg: WorkbenchConfig, window_len: int | None = None
                ) -> datamod.DatasetSplit:
    years = sorted(set(cfg.data.train_years) | set(cfg.data.test_years))
    weather_path = args.weather or cfg.data.weather
    if weather_path is not None:
        weather = datamod.load_series(weather_path, "weather")
    else:
        weather = datamod.synthesize_weather(years, seed=cfg.data.synthetic_seed)
    weather = datamod.resample_900s(weather)
    prices = None
    if cfg.episode.dr_mode:
        price_path = args.prices or cfg.data.prices
        if price_path is not None:
            prices = datamod.load_series(price_path, "price")
        else:
            prices = datamod.synthesize_prices(years, seed=cfg.data.synthetic_seed)
        prices = datamod.resample_900s(prices)
    return datamod.split_and_filter(weather, list(cfg.data.train_years),
                                    list(cfg.data.test_years),
                                    window_len or cfg.window_len(), prices=prices)


def _metrics_csv(metrics) -> str:
    names = ("electricity_mean_wh", "deviation_mean_c", "deviation_max_c",
             "cost_mean_cent", "reward_mean", "steps")
    values = [format_float(getattr(metrics, n)) if n != "steps" else str(metrics.steps)
              for n in names]
    return ",".join(names) + "\n" + ",".join(values) + "\n"


def _parse_controller(spec: str, args, cfg: WorkbenchConfig):
    if spec == "heating-curve":
        return HeatingCurveController()
    if spec == "random":
        return RandomController(seed=args.seed)
    if spec == "mpc":
        return MpcController(cfg.mpc())
    if spec.startswith("constant:"):
        return ConstantPowerController(float(spec.split(":", 1)[1]))
    if spec.startswith("checkpoint:"):
        return PolicyController(load_checkpoint(spec.split(":", 1)[1]))
    if spec.startswith("drl="):
        return PolicyController(load_checkpoint(spec.split("=", 1)[1]), name="drl")
    raise UsageError(f"unknown controller spec {spec!r}")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_synth_data(args) -> int:
    cfg = _load_workbench(args)
    years = sorted(set(cfg.data.train_years) | set(cfg.data.test_years))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    weather = datamod.synthesize_weather(years, seed=cfg.data.synthetic_seed)
    datamod.write_series_csv(weather, args.out_dir / "weather.csv")
    prices = datamod.synthesize_prices(years, seed=cfg.data.synthetic_seed)
    datamod.write_series_csv(prices, args.out_dir / "prices.csv")
    print(f"wrote {args.out_dir / 'weather.csv'} and {args.out_dir / 'prices.csv'} "
          f"({years[0]}..{years[-1]}, hourly)")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_workbench(args)
    split = _load_split(args, cfg)
    part, _, index = args.window.partition(":")
    windows = {"test": split.test, "train": split.train}.get(part)
    if windows is None:
        raise UsageError(f"window must be test:<i> or train:<i>, got {args.window}")
    try:
        window = windows[int(index or 0)]
    except (IndexError, ValueError):
        raise UsageError(f"no such window {args.window} "
                         f"({len(windows)} {part} windows available)") from None
    controller = _parse_controller(args.controller, args, cfg)
    env = HeatPumpEnv(cfg.episode, training=False)
    controller.prepare(env)
    obs = env.reset(window)
    controller.begin_window(env)
    done = False
    while not done:
        kind, value = controller.decide(env, obs)
        result = env.step(value) if kind == "action" else env.step_power(value)
        obs, done = result.next_obs, result.done
    write_trace_csv(env.trace, args.trace)
    print(f"wrote {args.trace} ({len(env.trace)} steps, window {window.label})")
    return 0


def cmd_train(args) -> int:
    cfg = _load_workbench(args)
    split = _load_split(args, cfg)
    trainer = cfg.trainer
    if args.total_steps is not None:
        trainer = replace(trainer, total_steps=args.total_steps)
    if args.n_seeds is not None:
        trainer = replace(trainer, seeds=args.n_seeds)
    ckpt, curves = train(split, cfg.episode, trainer, base_seed=args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, args.out)
    if args.curve_prefix is not None:
        for s, curve in enumerate(curves):
            lines = ["step,mean_eval_reward,elec_mean,dev_mean"]
            for row in curve:
                lines.append(",".join([str(int(row[0]))] +
                                      [format_float(v) for v in row[1:]]))
            _write(Path(f"{args.curve_prefix}_seed{s}.csv"), "\n".join(lines) + "\n")
    print(f"wrote {args.out} (validation score {ckpt.eval_score:.4f} reward/step)")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_workbench(args)
    split = _load_split(args, cfg)
    controller = PolicyController(load_checkpoint(args.checkpoint))
    result = evaluate_controller(controller, split.test, cfg.episode)
    _emit_metrics(result, args)
    return 0


def cmd_mpc(args) -> int:
    cfg = _load_workbench(args)
    if args.horizon is not None:
        cfg = replace(cfg, mpc_horizon=args.horizon)
    split = _load_split(args, cfg)
    controller = MpcController(cfg.mpc())
    result = evaluate_controller(controller, split.test, cfg.episode)
    _emit_metrics(result, args)
    return 0


def _emit_metrics(result, args) -> None:
    text = _metrics_csv(result.metrics)
    if args.metrics_out is not None:
        _write(args.metrics_out, text)
    if getattr(args, "trace_dir", None):
        args.trace_dir.mkdir(parents=True, exist_ok=True)
        for i, trace in enumerate(result.traces):
            write_trace_csv(trace, args.trace_dir / f"{result.name}_window{i}.csv")
    sys.stdout.write(f"{result.name}: " + text)
    print(f"decision time {result.metrics.decision_time_s:.2f} s over "
          f"{result.metrics.steps} steps")


def cmd_compare(args) -> int:
    cfg = _load_workbench(args)
    controllers = [_parse_controller(s.strip(), args, cfg)
                   for s in args.controllers.split(",") if s.strip()]
    dr_baseline = None
    window_len = cfg.window_len()
    if args.dr_baseline is not None:
        if not args.dr:
            raise UsageError("--dr-baseline only makes sense together with --dr")
        base_cfg = load_config(args.config, building=args.building, dr=False)
        dr_baseline = (PolicyController(load_checkpoint(args.dr_baseline),
                                        name="drl-baseline"), base_cfg.episode)
        window_len = max(window_len, base_cfg.window_len())
    if len(controllers) + (1 if dr_baseline else 0) < 2:
        raise UsageError("compare needs at least two controllers (a baseline)")
    split = _load_split(args, cfg, window_len=window_len)
    report = compare(controllers, split.test, cfg.episode, dr_baseline=dr_baseline)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "report.csv").write_text(render_report_csv(report))
    text = render_report_text(report)
    (args.out_dir / "report.txt").write_text(text)
    (args.out_dir / "report.json").write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
    for result in report.results:
        for i, trace in enumerate(result.traces):
            write_trace_csv(trace, args.out_dir / f"trace_{result.name}_window{i}.csv")
    sys.stdout.write(text)
    return 0


def cmd_plot(args) -> int:
    from .plots import plot_episode
    cfg = _load_workbench(args)
    plot_episode(args.trace, args.out, comfort_low=cfg.episode.comfort_low,
                 comfort_high=cfg.episode.comfort_high)
    print(f"wrote {args.out}")
    return 0


def cmd_show_config(args) -> int:
    print(dump_config(_load_workbench(args)))
    return 0


COMMANDS = {
    "synth-data": cmd_synth_data,
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "mpc": cmd_mpc,
    "compare": cmd_compare,
    "plot": cmd_plot,
    "show-config": cmd_show_config,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (datamod.DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (SimulationDiverged, TrainingDiverged) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Experiment harness CLI.

Subcommands:
    run      train/evaluate one algorithm over a list of seeds
    compare  align finished runs into one comparison report
    profile  classification-accuracy sweep over an SINR grid
    oracle   brute-force optimal assignment on a fixed channel

Exit codes: 0 success, 1 validation problem (config, flags, mismatched
inputs), 2 runtime failure (training divergence, I/O).  All CSV artifacts
carry a `# schema=` header line; reruns with identical config and seeds
are byte-identical unless timing capture is requested.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .baselines import DQNConfig, dqn_train, oracle_search, random_rollouts
from .config_io import ALGORITHMS, ExperimentSpec, load_config, serialize_config
from .env import AssignmentEnv, assignment_costs
from .netmodel import ScenarioConfig
from .ppo import (
    PPOConfig,
    convergence_iteration,
    moving_average,
    train,
    write_learning_curve,
)
from .seeding import stream_rng
from .semtask import accuracy_profile

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2

_DEFAULT_SINR_GRID_DB = tuple(np.linspace(-10.0, 20.0, 10))
_PROFILE_SAMPLES = 10_000
_MA_WINDOW = 20


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(v.strip()) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValueError(f"--seed expects comma-separated integers, got {text!r}")
    if not seeds:
        raise ValueError("--seed expects at least one integer")
    return seeds


def _resolve(args, need_algorithm: bool, default_algorithm: str | None = None):
    """Merge config file and flag overrides into (ScenarioConfig, ExperimentSpec)."""
    if args.config is not None:
        cfg, spec = load_config(args.config)
    else:
        cfg = ScenarioConfig()
        algo = getattr(args, "algo", None) or default_algorithm
        seeds = _parse_seeds(args.seed) if args.seed else None
        if need_algorithm and algo is None:
            raise ValueError("no config file given: --algo is required")
        if seeds is None:
            if args.config is None and need_algorithm:
                raise ValueError("no config file given: --seed is required")
            seeds = (0,)
        spec = ExperimentSpec(algorithm=algo or "random", seeds=seeds)
    overrides = {}
    if getattr(args, "algo", None):
        overrides["algorithm"] = args.algo
    if args.seed:
        overrides["seeds"] = _parse_seeds(args.seed)
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    if getattr(args, "iters", None):
        overrides["iterations"] = args.iters
    if getattr(args, "timing", False):
        overrides["record_timing"] = True
    if default_algorithm is not None:
        overrides["algorithm"] = default_algorithm
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    return cfg, spec


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _summary_from_curve(curve) -> tuple[float, float, int | None, int, int]:
    rewards = [r.mean_reward for r in curve]
    ma = moving_average(rewards, _MA_WINDOW)
    conv = convergence_iteration(rewards, _MA_WINDOW)
    return (
        float(ma[-1]),
        float(ma.max()),
        conv,
        sum(r.delay_violations for r in curve),
        sum(r.energy_violations for r in curve),
    )


def _write_oracle(path, assignment, value, costs) -> None:
    lines = [
        "# schema=oracle_assignment_v1",
        f"# value={value!r}",
        "user,k,q,delay_s,energy_j",
    ]
    for i, (k, q) in enumerate(assignment):
        c = costs[i]
        lines.append(f"{i},{k},{q},{c.total_delay_s!r},{c.total_energy_j!r}")
    _write_lines(path, lines)


def _run_profile(cfg, seed: int, grid_db, out_path) -> None:
    env = AssignmentEnv(cfg, seed=seed)    # builds prototypes from the task stream
    rng = stream_rng(seed, "profile")
    lines = ["# schema=accuracy_profile_v1", "encoder_k,sinr_db,accuracy"]
    linear = 10.0 ** (np.asarray(grid_db, dtype=float) / 10.0)
    for spec, protos in zip(env.catalog, env.prototypes):
        acc = accuracy_profile(
            protos,
            linear,
            _PROFILE_SAMPLES,
            rng,
            kappa=cfg.feature_noise_kappa,
            sigma_intra=cfg.intra_class_jitter,
        )
        for db, a in zip(grid_db, acc):
            lines.append(f"{spec.index},{float(db)!r},{float(a)!r}")
    _write_lines(out_path, lines)


def cmd_run(args) -> int:
    cfg, spec = _resolve(args, need_algorithm=True)
    out = spec.output_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(serialize_config(cfg, spec))

    summary = [
        "# schema=run_summary_v1",
        "algo,seed,final_ma_reward,peak_ma_reward,convergence_iteration,"
        "delay_violations,energy_violations",
    ]
    for seed in spec.seeds:
        if spec.algorithm == "oracle":
            env = AssignmentEnv(cfg, seed=seed, fixed_channel=True)
            channel = env.reset().channel
            best, value = oracle_search(
                channel,
                cfg,
                spec.oracle_samples,
                stream_rng(seed, "noise"),
                env.catalog,
                env.prototypes,
            )
            costs = assignment_costs(best, channel, cfg, env.catalog)
            _write_oracle(os.path.join(out, f"oracle_seed{seed}.csv"), best, value, costs)
            dv = sum(c.total_delay_s > cfg.delay_cap_s for c in costs)
            ev = sum(c.total_energy_j > cfg.energy_cap_j for c in costs)
            summary.append(f"oracle,{seed},{value!r},{value!r},,{dv},{ev}")
            print(f"oracle seed {seed}: value {value:.4f}")
            continue

        env = AssignmentEnv(cfg, seed=seed, fixed_channel=spec.fixed_channel)
        if spec.algorithm == "ppo":
            result = train(env, PPOConfig(max_iterations=spec.iterations), seed=seed)
        elif spec.algorithm == "dqn":
            result = dqn_train(env, DQNConfig(iterations=spec.iterations), seed=seed)
        else:
            result = random_rollouts(env, spec.iterations, 64, seed=seed)
        curve_path = os.path.join(out, f"curve_{spec.algorithm}_seed{seed}.csv")
        write_learning_curve(curve_path, result.curve, include_timing=spec.record_timing)
        final, peak, conv, dv, ev = _summary_from_curve(result.curve)
        summary.append(
            f"{spec.algorithm},{seed},{final!r},{peak!r},"
            f"{'' if conv is None else conv},{dv},{ev}"
        )
        print(
            f"{spec.algorithm} seed {seed}: {len(result.curve)} iterations, "
            f"final moving-average reward {final:.4f} -> {curve_path}"
        )

    if spec.sinr_grid_db:
        for seed in spec.seeds:
            _run_profile(
                cfg, seed, spec.sinr_grid_db,
                os.path.join(out, f"accuracy_profile_seed{seed}.csv"),
            )
    _write_lines(os.path.join(out, "summary.csv"), summary)
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg, spec = _resolve(args, need_algorithm=False, default_algorithm="random")
    out = spec.output_dir
    os.makedirs(out, exist_ok=True)
    grid = spec.sinr_grid_db or _DEFAULT_SINR_GRID_DB
    for seed in spec.seeds:
        path = os.path.join(out, f"accuracy_profile_seed{seed}.csv")
        _run_profile(cfg, seed, grid, path)
        print(f"accuracy profile seed {seed} -> {path}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg, spec = _resolve(args, need_algorithm=False, default_algorithm="oracle")
    out = spec.output_dir
    os.makedirs(out, exist_ok=True)
    for seed in spec.seeds:
        env = AssignmentEnv(cfg, seed=seed, fixed_channel=True)
        channel = env.reset().channel
        best, value = oracle_search(
            channel,
            cfg,
            spec.oracle_samples,
            stream_rng(seed, "noise"),
            env.catalog,
            env.prototypes,
        )
        costs = assignment_costs(best, channel, cfg, env.catalog)
        path = os.path.join(out, f"oracle_seed{seed}.csv")
        _write_oracle(path, best, value, costs)
        pairs = " ".join(f"user{i}:(k={k},q={q})" for i, (k, q) in enumerate(best))
        print(f"oracle seed {seed}: value {value:.4f} {pairs} -> {path}")
    return EXIT_OK


def _read_curve(path) -> list[float]:
    rewards = []
    with open(path, encoding="utf-8") as fh:
        header_seen = False
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                header_seen = True
                continue
            rewards.append(float(line.split(",")[1]))
    return rewards


def _scenario_lines(cfg, spec) -> list[str]:
    return [
        ln for ln in serialize_config(cfg, spec).splitlines() if ln.startswith("scenario.")
    ]


def cmd_compare(args) -> int:
    if len(args.runs) < 2:
        raise ValueError("compare needs at least two run directories")
    loaded = []
    for d in args.runs:
        cfg_path = os.path.join(d, "config.txt")
        if not os.path.exists(cfg_path):
            raise ValueError(f"{d} has no config.txt (not a run directory?)")
        cfg, spec = load_config(cfg_path)
        loaded.append((d, cfg, spec))
    base_scenario = _scenario_lines(loaded[0][1], loaded[0][2])
    for d, cfg, spec in loaded[1:]:
        if _scenario_lines(cfg, spec) != base_scenario:
            raise ValueError(f"scenario mismatch between {args.runs[0]} and {d}")

    lines = [
        "# schema=comparison_v1",
        "# note=DQN serves as the value-based comparison baseline; SAC is not "
        "implemented here, so no SAC-relative numbers are reported.",
        "row,run,algo,seed,final_ma,peak_ma,convergence_iteration,ratio_vs_first,oracle_value",
    ]
    base_final: float | None = None
    for d, cfg, spec in loaded:
        finals, rows = [], []
        oracle_value = None
        for seed in spec.seeds:
            if spec.algorithm == "oracle":
                path = os.path.join(d, f"oracle_seed{seed}.csv")
                with open(path, encoding="utf-8") as fh:
                    for ln in fh:
                        if ln.startswith("# value="):
                            oracle_value = float(ln.split("=", 1)[1])
                            break
                finals.append(oracle_value)
                rows.append(f"seed,{d},oracle,{seed},{oracle_value!r},{oracle_value!r},,,")
                continue
            rewards = _read_curve(os.path.join(d, f"curve_{spec.algorithm}_seed{seed}.csv"))
            ma = moving_average(rewards, _MA_WINDOW)
            conv = convergence_iteration(rewards, _MA_WINDOW)
            finals.append(float(ma[-1]))
            rows.append(
                f"seed,{d},{spec.algorithm},{seed},{ma[-1]!r},{ma.max()!r},"
                f"{'' if conv is None else conv},,"
            )
        mean_final = float(np.mean(finals))
        if base_final is None:
            base_final = mean_final
        ratio = mean_final / base_final if base_final != 0 else float("nan")
        lines.append(
            f"run,{d},{spec.algorithm},all,{mean_final!r},,,{ratio!r},"
            f"{'' if oracle_value is None else repr(oracle_value)}"
        )
        lines.extend(rows)
    _write_lines(args.out, lines)
    print(f"comparison -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semcomrl",
        description="Semantic-communication assignment experiments: train, compare, sweep.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one algorithm over seeds, emit curve CSVs")
    p_run.add_argument("--config", help="key=value config file")
    p_run.add_argument("--seed", help="comma-separated seeds (overrides config)")
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.add_argument("--algo", choices=ALGORITHMS, help="algorithm (overrides config)")
    p_run.add_argument("--iters", type=int, help="iteration budget (overrides config)")
    p_run.add_argument(
        "--timing", action="store_true",
        help="fill the wall_ms column (makes reruns differ byte-wise)",
    )
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="align finished runs into one report")
    p_cmp.add_argument("runs", nargs="+", help="run output directories")
    p_cmp.add_argument("--out", required=True, help="report CSV path")
    p_cmp.set_defaults(func=cmd_compare)

    p_prof = sub.add_parser("profile", help="accuracy vs SINR sweep per encoder")
    p_prof.add_argument("--config", help="key=value config file")
    p_prof.add_argument("--seed", help="comma-separated seeds")
    p_prof.add_argument("--out", help="output directory")
    p_prof.set_defaults(func=cmd_profile)

    p_or = sub.add_parser("oracle", help="exhaustive best assignment on a fixed channel")
    p_or.add_argument("--config", help="key=value config file")
    p_or.add_argument("--seed", help="comma-separated seeds")
    p_or.add_argument("--out", help="output directory")
    p_or.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, OSError) as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Configuration loading, experiment orchestration, and the command line.

Subcommands: `plan` writes a policy look-up table, `evaluate` scores a policy
file under a configuration, `sweep` runs the plan/evaluate loop over a
parameter grid and writes a delimited results file, and `timing` reports
planning operation counts and wall time per algorithm. Wall-clock ratios are
hardware-dependent and informational only; operation counters are the
portable complexity measure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .mdp import State, build_kernel, build_reward_table, enumerate_states
from .model import LINKS, ParameterError, SystemParams
from .planners import (
    PlanStats,
    greedy_policy,
    horizon_to_discount,
    load_policy,
    plan_backward_induction,
    plan_policy_iteration,
    save_policy,
)
from .sim import exact_evaluate, monte_carlo_evaluate

ALGORITHMS = ("fhjpa", "ga", "ihjpa")

SWEEP_VARIABLES = ("harvest_units_src", "harvest_units_dst",
                   "harvest_prob_src", "harvest_prob_dst", "horizon")
_INT_SWEEPS = {"harvest_units_src", "harvest_units_dst", "horizon"}
DEFAULT_SWEEP_GRIDS = {
    "harvest_units_src": (1, 2, 3, 4, 6, 8),
    "harvest_units_dst": (1, 2, 3, 4, 6, 8),
    "harvest_prob_src": (0.1, 0.3, 0.5, 0.7, 0.9),
    "harvest_prob_dst": (0.1, 0.3, 0.5, 0.7, 0.9),
    "horizon": (10, 20, 50, 100),
}

RESULT_COLUMNS = ("sweep_value", "algorithm", "avg_see_bits_per_joule",
                  "total_secure_bits", "backup_count", "plan_seconds", "mode")


class ConfigError(ValueError):
    """A configuration file fails schema or invariant validation."""


def default_params(**overrides) -> SystemParams:
    """System parameters of the standard simulation setup.

    2 MHz bandwidth, -204 dB noise density, 1e-5 residual self-interference,
    5 ms slots of one 2.5 uJ energy quantum per 0.5 mW, two-unit Bernoulli(0.5)
    harvests, 5-unit batteries, power set {0, 0.5, 1, 2} mW, two channel
    levels with 0.9 stay probability on every link, and the initial state at
    the highest gains with full batteries.
    """
    base: dict = dict(
        bandwidth_hz=2e6,
        noise_psd=10.0 ** -20.4,
        sic_factor=1e-5,
        slot_seconds=5e-3,
        energy_unit_joules=2.5e-6,
        harvest_units_src=2,
        harvest_units_dst=2,
        harvest_prob_src=0.5,
        harvest_prob_dst=0.5,
        battery_cap_src=5,
        battery_cap_dst=5,
        power_levels=(0.0, 0.5e-3, 1e-3, 2e-3),
        gain_levels={link: (1.655e-13, 3.311e-13) for link in LINKS},
        gain_transition={
            link: np.array([[0.9, 0.1], [0.1, 0.9]]) for link in LINKS
        },
        horizon=10,
    )
    initial = overrides.pop("initial_state", None)
    base.update(overrides)
    if initial is None:
        top = tuple(len(base["gain_levels"][link]) - 1 for link in LINKS)
        initial = State(*top, base["battery_cap_src"], base["battery_cap_dst"])
    return SystemParams(initial_state=initial, **base)


@dataclass(frozen=True)
class ExperimentConfig:
    """System parameters plus run controls for one experiment."""

    params: SystemParams
    algorithms: tuple[str, ...]
    sweep_variable: str
    sweep_grid: tuple
    episodes: int
    master_seed: int
    mode: str               # "exact" or "mc"
    output: str
    workers: int = 1

    def __post_init__(self):
        if not self.algorithms:
            raise ConfigError("algorithms: must request at least one algorithm")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ConfigError(
                    f"algorithms: unknown algorithm {name!r}; "
                    f"expected a subset of {ALGORITHMS}"
                )
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(
                f"sweep.variable: {self.sweep_variable!r} is not one of {SWEEP_VARIABLES}"
            )
        if not self.sweep_grid:
            raise ConfigError("sweep.grid: must be nonempty")
        if any(b <= a for a, b in zip(self.sweep_grid, self.sweep_grid[1:])):
            raise ConfigError("sweep.grid: must be strictly increasing")
        if self.episodes < 1:
            raise ConfigError("episodes: must be >= 1")
        if self.mode not in ("exact", "mc"):
            raise ConfigError(f"mode: expected 'exact' or 'mc', got {self.mode!r}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")


@dataclass(frozen=True)
class ResultRow:
    """One evaluated (sweep value, algorithm) point."""

    sweep_value: float
    algorithm: str
    avg_see: float
    total_secure_bits: float
    backup_count: int
    plan_seconds: float
    mode: str

    def __post_init__(self):
        for name in ("avg_see", "total_secure_bits", "plan_seconds"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def _number(raw: Mapping, key: str, default: float) -> float:
    value = raw.get(key, default)
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"{key}: expected a number, got {value!r}")
    return float(value)


def _integer(raw: Mapping, key: str, default: int) -> int:
    value = raw.get(key, default)
    _require(isinstance(value, int) and not isinstance(value, bool),
             f"{key}: expected an integer, got {value!r}")
    return int(value)


def _per_link(raw_value, key: str):
    """Accept one list for all links or a {link: list} mapping."""
    if isinstance(raw_value, Mapping):
        unknown = set(raw_value) - set(LINKS)
        _require(not unknown, f"{key}: unknown link keys {sorted(unknown)}")
        _require(set(raw_value) == set(LINKS),
                 f"{key}: per-link mapping must cover all of {LINKS}")
        return {link: raw_value[link] for link in LINKS}
    _require(isinstance(raw_value, Sequence) and not isinstance(raw_value, str),
             f"{key}: expected a list or a per-link mapping, got {raw_value!r}")
    return {link: raw_value for link in LINKS}


_PARAM_KEYS = (
    "bandwidth_hz", "noise_psd_w_per_hz", "sic_factor", "slot_seconds",
    "energy_unit_joules", "harvest_units_src", "harvest_units_dst",
    "harvest_prob_src", "harvest_prob_dst", "battery_cap_src",
    "battery_cap_dst", "power_levels_w", "gain_levels", "gain_transition",
    "horizon", "initial_state",
)
_RUN_KEYS = ("algorithms", "sweep", "episodes", "master_seed", "mode",
             "output", "workers")


def config_from_mapping(raw: Mapping) -> ExperimentConfig:
    """Build a validated configuration from parsed key/value data.

    Every omitted key falls back to the standard simulation defaults.
    """
    unknown = set(raw) - set(_PARAM_KEYS) - set(_RUN_KEYS)
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")

    overrides: dict = {}
    for key, field_name in (
        ("bandwidth_hz", "bandwidth_hz"),
        ("noise_psd_w_per_hz", "noise_psd"),
        ("sic_factor", "sic_factor"),
        ("slot_seconds", "slot_seconds"),
        ("energy_unit_joules", "energy_unit_joules"),
        ("harvest_prob_src", "harvest_prob_src"),
        ("harvest_prob_dst", "harvest_prob_dst"),
    ):
        if key in raw:
            overrides[field_name] = _number(raw, key, 0.0)
    for key in ("harvest_units_src", "harvest_units_dst",
                "battery_cap_src", "battery_cap_dst", "horizon"):
        if key in raw:
            overrides[key] = _integer(raw, key, 0)
    if "power_levels_w" in raw:
        levels = raw["power_levels_w"]
        _require(isinstance(levels, Sequence) and levels,
                 "power_levels_w: expected a nonempty list")
        for i, p in enumerate(levels):
            _require(isinstance(p, (int, float)) and not isinstance(p, bool),
                     f"power_levels_w[{i}]: expected a number, got {p!r}")
        overrides["power_levels"] = tuple(float(p) for p in levels)
    if "gain_levels" in raw:
        per_link = _per_link(raw["gain_levels"], "gain_levels")
        try:
            overrides["gain_levels"] = {
                link: tuple(float(g) for g in lv) for link, lv in per_link.items()
            }
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"gain_levels: {exc}") from exc
    if "gain_transition" in raw:
        per_link = _per_link(raw["gain_transition"], "gain_transition")
        try:
            overrides["gain_transition"] = {
                link: np.array(mat, dtype=float) for link, mat in per_link.items()
            }
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"gain_transition: {exc}") from exc
    if "initial_state" in raw:
        st = raw["initial_state"]
        _require(isinstance(st, Sequence) and len(st) == 6,
                 "initial_state: expected [g_sd, g_se, g_dd, g_de, b_src, b_dst]")
        for i, v in enumerate(st):
            _require(isinstance(v, int) and not isinstance(v, bool),
                     f"initial_state[{i}]: expected an integer, got {v!r}")
        overrides["initial_state"] = State(*st)

    try:
        params = default_params(**overrides)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    algorithms = raw.get("algorithms", list(ALGORITHMS))
    _require(isinstance(algorithms, Sequence) and not isinstance(algorithms, str),
             f"algorithms: expected a list, got {algorithms!r}")
    algorithms = tuple(str(a).lower() for a in algorithms)

    sweep = raw.get("sweep", {})
    _require(isinstance(sweep, Mapping), f"sweep: expected a mapping, got {sweep!r}")
    unknown = set(sweep) - {"variable", "grid"}
    _require(not unknown, f"sweep: unknown keys {sorted(unknown)}")
    variable = sweep.get("variable", "harvest_units_src")
    _require(variable in SWEEP_VARIABLES,
             f"sweep.variable: {variable!r} is not one of {SWEEP_VARIABLES}")
    grid = sweep.get("grid", DEFAULT_SWEEP_GRIDS[variable])
    _require(isinstance(grid, Sequence) and not isinstance(grid, str),
             f"sweep.grid: expected a list, got {grid!r}")
    cleaned = []
    for i, v in enumerate(grid):
        _require(isinstance(v, (int, float)) and not isinstance(v, bool),
                 f"sweep.grid[{i}]: expected a number, got {v!r}")
        if variable in _INT_SWEEPS:
            _require(float(v).is_integer(),
                     f"sweep.grid[{i}]: {variable} values must be integers, got {v!r}")
            cleaned.append(int(v))
        else:
            cleaned.append(float(v))

    mode = raw.get("mode", "exact")
    _require(isinstance(mode, str), f"mode: expected a string, got {mode!r}")
    output = raw.get("output", "results.csv")
    _require(isinstance(output, str), f"output: expected a string, got {output!r}")

    return ExperimentConfig(
        params=params,
        algorithms=algorithms,
        sweep_variable=variable,
        sweep_grid=tuple(cleaned),
        episodes=_integer(raw, "episodes", 10000),
        master_seed=_integer(raw, "master_seed", 20240501),
        mode=mode,
        output=output,
        workers=_integer(raw, "workers", 1),
    )


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON configuration file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    _require(isinstance(raw, Mapping), f"{path}: top level must be an object")
    return config_from_mapping(raw)


def _plan(algorithm: str, kernel, rewards, horizon: int):
    if algorithm == "fhjpa":
        return plan_backward_induction(kernel, rewards, horizon)
    if algorithm == "ga":
        return greedy_policy(rewards)
    if algorithm == "ihjpa":
        return plan_policy_iteration(kernel, rewards, horizon_to_discount(horizon))
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _apply_sweep(params: SystemParams, variable: str, value) -> SystemParams:
    if variable in _INT_SWEEPS:
        value = int(value)
    return replace(params, **{variable: value})


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """Plan and evaluate every requested algorithm at every sweep value.

    The greedy baseline has no planning phase, so its planning cost is
    reported as zero; its look-up table is materialized at evaluation time.
    """
    rows: list[ResultRow] = []
    for value in config.sweep_grid:
        try:
            params = _apply_sweep(config.params, config.sweep_variable, value)
            space = enumerate_states(params)
            kernel = build_kernel(space, params)
            rewards = build_reward_table(space, params)
            s0 = space.encode(params.initial_state)
            for algorithm in config.algorithms:
                policy = _plan(algorithm, kernel, rewards, params.horizon)
                if config.mode == "exact":
                    metrics = exact_evaluate(policy, kernel, rewards,
                                             params.horizon, s0)
                else:
                    metrics = monte_carlo_evaluate(policy, params,
                                                   config.episodes,
                                                   config.master_seed,
                                                   config.workers)
                stats = PlanStats() if algorithm == "ga" else policy.stats
                rows.append(ResultRow(
                    sweep_value=value,
                    algorithm=algorithm,
                    avg_see=metrics.avg_see,
                    total_secure_bits=metrics.total_secure_bits,
                    backup_count=stats.backup_ops,
                    plan_seconds=0.0 if algorithm == "ga" else stats.plan_seconds,
                    mode=config.mode,
                ))
        except (ValueError, RuntimeError) as exc:
            raise type(exc)(
                f"at sweep {config.sweep_variable}={value}: {exc}"
            ) from exc
    return rows


def write_results(rows: Sequence[ResultRow], path) -> None:
    """Write result rows as delimited text with one header line.

    Floats are written with repr so they round-trip to the same double.
    """
    if not rows:
        raise ValueError("no result rows to write")
    lines = [",".join(RESULT_COLUMNS)]
    for r in rows:
        lines.append(
            f"{r.sweep_value!r},{r.algorithm},{r.avg_see!r},"
            f"{r.total_secure_bits!r},{r.backup_count},{r.plan_seconds!r},{r.mode}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class TimingRow:
    horizon: int
    algorithm: str
    backup_count: int
    plan_seconds: float


@dataclass(frozen=True)
class TimingReport:
    """Planning-phase cost comparison across horizons."""

    rows: tuple[TimingRow, ...]

    def render(self) -> str:
        lines = [
            "planning-phase cost (backup_count = state-action-successor products)",
            "horizon,algorithm,backup_count,plan_seconds",
        ]
        for r in self.rows:
            lines.append(f"{r.horizon},{r.algorithm},{r.backup_count},{r.plan_seconds:.6f}")
        by_key = {(r.horizon, r.algorithm): r for r in self.rows}
        for horizon in sorted({r.horizon for r in self.rows}):
            fh = by_key.get((horizon, "fhjpa"))
            ih = by_key.get((horizon, "ihjpa"))
            if fh and ih and ih.plan_seconds > 0:
                lines.append(
                    f"fhjpa/ihjpa wall-time ratio at horizon {horizon}: "
                    f"{fh.plan_seconds / ih.plan_seconds:.3f}"
                )
        lines.append("wall-clock ratios are hardware-dependent and informational only")
        return "\n".join(lines) + "\n"


def compare_timing(config: ExperimentConfig) -> TimingReport:
    """Plan each requested algorithm per horizon and collect cost counters."""
    if not {"fhjpa", "ihjpa"} <= set(config.algorithms):
        raise ValueError("timing comparison needs both fhjpa and ihjpa requested")
    if config.sweep_variable == "horizon":
        horizons = [int(v) for v in config.sweep_grid]
    else:
        horizons = [10, 20]
    rows = []
    for horizon in horizons:
        params = replace(config.params, horizon=horizon)
        space = enumerate_states(params)
        kernel = build_kernel(space, params)
        rewards = build_reward_table(space, params)
        for algorithm in config.algorithms:
            policy = _plan(algorithm, kernel, rewards, horizon)
            stats = PlanStats() if algorithm == "ga" else policy.stats
            rows.append(TimingRow(horizon, algorithm, stats.backup_ops,
                                  0.0 if algorithm == "ga" else stats.plan_seconds))
    return TimingReport(rows=tuple(rows))


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", help="output file path")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--episodes", type=int, help="override the episode count")
    parser.add_argument("--mode", choices=("exact", "mc"),
                        help="override the evaluation mode")
    parser.add_argument("--algorithms",
                        help="comma-separated subset of fhjpa,ga,ihjpa")


def _configure(args) -> ExperimentConfig:
    config = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.episodes is not None:
        updates["episodes"] = args.episodes
    if args.mode is not None:
        updates["mode"] = args.mode
    if args.algorithms is not None:
        updates["algorithms"] = tuple(
            a.strip().lower() for a in args.algorithms.split(",") if a.strip()
        )
    return replace(config, **updates) if updates else config


def _cmd_plan(args) -> int:
    config = _configure(args)
    if len(config.algorithms) != 1:
        raise ConfigError("plan writes one policy file; request exactly one algorithm")
    if not args.out:
        raise ConfigError("plan requires --out for the policy file")
    algorithm = config.algorithms[0]
    params = config.params
    space = enumerate_states(params)
    kernel = build_kernel(space, params)
    rewards = build_reward_table(space, params)
    policy = _plan(algorithm, kernel, rewards, params.horizon)
    save_policy(policy, args.out)
    print(f"wrote {algorithm} policy for {space.n_states} states to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _configure(args)
    params = config.params
    policy = load_policy(args.policy)
    space = enumerate_states(params)
    if policy.actions.shape[-1] != space.n_states or policy.n_actions != space.n_actions:
        raise ConfigError(
            f"policy file covers {policy.actions.shape[-1]} states / "
            f"{policy.n_actions} actions but the config needs "
            f"{space.n_states} / {space.n_actions}"
        )
    if config.mode == "exact":
        kernel = build_kernel(space, params)
        rewards = build_reward_table(space, params)
        metrics = exact_evaluate(policy, kernel, rewards, params.horizon,
                                 space.encode(params.initial_state))
    else:
        metrics = monte_carlo_evaluate(policy, params, config.episodes,
                                       config.master_seed, config.workers)
    lines = [
        f"avg_see_bits_per_joule={metrics.avg_see!r}",
        f"total_secure_bits={metrics.total_secure_bits!r}",
    ]
    if metrics.episodes is not None:
        lines.append(f"episodes={metrics.episodes}")
        lines.append(f"avg_see_stderr={metrics.avg_see_stderr!r}")
        lines.append(f"secure_bits_stderr={metrics.secure_bits_stderr!r}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text)
    return 0


def _cmd_sweep(args) -> int:
    config = _configure(args)
    rows = run_experiment(config)
    out = args.out or config.output
    write_results(rows, out)
    print(f"wrote {len(rows)} result rows to {out}")
    return 0


def _cmd_timing(args) -> int:
    config = _configure(args)
    report = compare_timing(config)
    text = report.render()
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="seeplan",
        description="Plan and evaluate joint transmit/jamming power policies "
                    "for secrecy energy efficiency.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "plan": ("plan a policy and write its look-up table", _cmd_plan),
        "evaluate": ("evaluate a policy file under a configuration", _cmd_evaluate),
        "sweep": ("run the experiment sweep and write results", _cmd_sweep),
        "timing": ("compare planning cost across algorithms", _cmd_timing),
    }
    for name, (help_text, _) in commands.items():
        p = sub.add_parser(name, help=help_text)
        _add_common_flags(p)
        if name == "evaluate":
            p.add_argument("--policy", required=True, help="policy file to evaluate")
    args = parser.parse_args(argv)
    try:
        return commands[args.command][1](args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

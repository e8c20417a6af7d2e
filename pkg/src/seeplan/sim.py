"""Policy evaluation: Monte Carlo episodes and an exact forward evaluator.

`run_episode` replays one transmission phase with reproducible randomness:
per slot it looks the action up in the policy table, accrues the secrecy
rate and reward, then samples the four channel transitions and the two
Bernoulli harvests and updates the batteries. `exact_evaluate` propagates
the full state distribution instead and returns sampling-free metrics; the
two must agree in expectation, which the tests exploit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mdp import (
    Action,
    RewardTable,
    State,
    StateSpace,
    TransitionKernel,
    enumerate_states,
)
from .model import InfeasibleActionError, SystemParams, secrecy_rate, sinr_pair
from .planners import NonstationaryPolicy, StationaryPolicy

Policy = NonstationaryPolicy | StationaryPolicy

_TRACE_HEADER = ("slot,g_sd,g_se,g_dd,g_de,b_src,b_dst,ps_idx,pd_idx,"
                 "secrecy_bps,reward_bits_per_joule,harvested_src,harvested_dst")


class SlotRecord(NamedTuple):
    """Everything observed and decided in one time slot."""

    stage: int
    state: State
    action: Action
    secrecy_bps: float
    reward: float
    harvested_src: int
    harvested_dst: int


@dataclass(frozen=True)
class EpisodeTrace:
    """One simulated transmission phase of `horizon` slots."""

    records: list[SlotRecord]
    total_secure_bits: float
    total_reward: float
    rng_seed: int

    @property
    def avg_see(self) -> float:
        """Average per-slot reward, bits/J."""
        return self.total_reward / len(self.records)

    def to_text(self) -> str:
        """Delimited per-slot dump for debugging."""
        lines = [_TRACE_HEADER]
        for r in self.records:
            lines.append(
                f"{r.stage},{r.state.g_sd},{r.state.g_se},{r.state.g_dd},"
                f"{r.state.g_de},{r.state.b_src},{r.state.b_dst},"
                f"{r.action.ps_idx},{r.action.pd_idx},{r.secrecy_bps!r},"
                f"{r.reward!r},{r.harvested_src},{r.harvested_dst}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Metrics:
    """Average secrecy energy efficiency and expected total secure bits.

    Standard errors and the episode count are set in Monte Carlo mode only.
    """

    avg_see: float
    total_secure_bits: float
    episodes: int | None = None
    avg_see_stderr: float | None = None
    secure_bits_stderr: float | None = None


def _pick(cumulative: tuple[float, ...], u: float) -> int:
    """Index of the first cumulative weight exceeding the uniform draw."""
    for i, c in enumerate(cumulative):
        if u < c:
            return i
    return len(cumulative) - 1


def _channel_cdfs(params: SystemParams) -> list[list[tuple[float, ...]]]:
    return [
        [tuple(np.cumsum(row)) for row in params.gain_transition[link]]
        for link in ("sd", "se", "dd", "de")
    ]


def run_episode(policy: Policy, params: SystemParams, rng_seed: int,
                space: StateSpace | None = None) -> EpisodeTrace:
    """Simulate one episode of `params.horizon` slots from the initial state.

    The same seed always yields the same trace. Harvested energy becomes
    usable only from the next slot, so each slot acts and accrues reward
    before sampling its harvest and updating the batteries.
    """
    if space is None:
        space = enumerate_states(params)
    rng = np.random.default_rng(rng_seed)
    horizon = params.horizon
    draws = rng.random((horizon, 6))
    cdfs = _channel_cdfs(params)
    caps = (params.battery_cap_src, params.battery_cap_dst)
    harvest = (params.harvest_units_src, params.harvest_units_dst)
    probs = (params.harvest_prob_src, params.harvest_prob_dst)

    state = params.initial_state
    records: list[SlotRecord] = []
    total_bits = 0.0
    total_reward = 0.0
    for k in range(horizon):
        a_idx = policy.action_index(k, space.encode(state))
        action = space.actions[a_idx]
        units_src, units_dst = space.action_units[a_idx]
        if units_src > state.b_src or units_dst > state.b_dst:
            raise InfeasibleActionError(
                f"policy action {tuple(action)} infeasible in state {tuple(state)}"
            )
        p_s = params.power_levels[action.ps_idx]
        p_d = params.power_levels[action.pd_idx]
        gamma_d, gamma_e = sinr_pair(space.gains(state), p_s, p_d, params)
        rate = secrecy_rate(gamma_d, gamma_e, params)
        total = p_s + p_d
        reward = rate / total if total > 0.0 else 0.0

        gain_idx = (state.g_sd, state.g_se, state.g_dd, state.g_de)
        next_gains = tuple(
            _pick(cdfs[i][gain_idx[i]], draws[k, i]) for i in range(4)
        )
        harvested = tuple(
            harvest[n] if draws[k, 4 + n] < probs[n] else 0 for n in range(2)
        )
        records.append(SlotRecord(k, state, action, rate, reward,
                                  harvested[0], harvested[1]))
        total_bits += rate * params.slot_seconds
        total_reward += reward
        state = State(
            *next_gains,
            min(state.b_src - units_src + harvested[0], caps[0]),
            min(state.b_dst - units_dst + harvested[1], caps[1]),
        )
    return EpisodeTrace(records=records, total_secure_bits=total_bits,
                        total_reward=total_reward, rng_seed=rng_seed)


def episode_seeds(master_seed: int, episodes: int) -> np.ndarray:
    """Per-episode seeds expanded from the master seed by episode counter.

    The mapping episode index -> seed depends only on the master seed, so
    results cannot depend on scheduling or worker count.
    """
    ss = np.random.SeedSequence(master_seed)
    return ss.generate_state(episodes, dtype=np.uint64)


def monte_carlo_evaluate(policy: Policy, params: SystemParams, episodes: int,
                         master_seed: int, workers: int = 1) -> Metrics:
    """Estimate the metrics by averaging independent seeded episodes."""
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    space = enumerate_states(params)
    seeds = episode_seeds(master_seed, episodes)
    see = np.empty(episodes)
    bits = np.empty(episodes)

    def one(i: int):
        trace = run_episode(policy, params, int(seeds[i]), space)
        return trace.avg_see, trace.total_secure_bits

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, (s, b) in enumerate(pool.map(one, range(episodes))):
                see[i], bits[i] = s, b
    else:
        for i in range(episodes):
            see[i], bits[i] = one(i)

    if episodes > 1:
        see_se = float(np.std(see, ddof=1) / np.sqrt(episodes))
        bits_se = float(np.std(bits, ddof=1) / np.sqrt(episodes))
    else:
        see_se = bits_se = 0.0
    return Metrics(avg_see=float(see.mean()), total_secure_bits=float(bits.mean()),
                   episodes=episodes, avg_see_stderr=see_se,
                   secure_bits_stderr=bits_se)


def exact_evaluate(policy: Policy, kernel: TransitionKernel,
                   rewards: RewardTable, horizon: int, initial_index: int,
                   return_stage_profile: bool = False):
    """Exact metrics by forward propagation of the state distribution.

    With `return_stage_profile` the per-stage distribution mass, expected
    reward, and expected secure bits come back alongside the metrics.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    n_states, n_actions = rewards.values.shape
    if not 0 <= initial_index < n_states:
        raise ValueError(f"initial state index {initial_index} out of range")
    arange = np.arange(n_states)
    dist = np.zeros(n_states)
    dist[initial_index] = 1.0
    see_sum = 0.0
    bits_sum = 0.0
    profile = []
    prev_actions = None
    p_pi = None
    for k in range(horizon):
        acts = policy.stage_actions(k)
        if acts is not prev_actions:
            if not rewards.feasible[arange, acts].all():
                bad = int(np.flatnonzero(~rewards.feasible[arange, acts])[0])
                raise InfeasibleActionError(
                    f"policy action {int(acts[bad])} infeasible in state {bad}"
                )
            p_pi = kernel.matrix[arange * n_actions + acts]
            prev_actions = acts
        stage_see = float(dist @ rewards.values[arange, acts])
        stage_bits = float(dist @ rewards.secrecy_bps[arange, acts]) * rewards.slot_seconds
        see_sum += stage_see
        bits_sum += stage_bits
        if return_stage_profile:
            profile.append((k, float(dist.sum()), stage_see, stage_bits))
        if k < horizon - 1:
            dist = p_pi.T @ dist
    metrics = Metrics(avg_see=see_sum / horizon, total_secure_bits=bits_sum)
    if return_stage_profile:
        return metrics, profile
    return metrics


def exact_evaluate_geometric(policy: StationaryPolicy, kernel: TransitionKernel,
                             rewards: RewardTable, discount: float,
                             initial_index: int) -> Metrics:
    """Exact metrics when the slot count is geometric with mean 1/(1-discount).

    Expected totals solve the discounted fixed-point equations directly; the
    average SEE divides by the mean horizon. Stationary policies only.
    """
    if not isinstance(policy, StationaryPolicy):
        raise ValueError("geometric-horizon evaluation needs a stationary policy")
    if not 0.0 < discount < 1.0:
        raise ValueError(f"discount must be in (0, 1), got {discount}")
    n_states, n_actions = rewards.values.shape
    arange = np.arange(n_states)
    acts = policy.actions
    if not rewards.feasible[arange, acts].all():
        raise InfeasibleActionError("policy stores an infeasible action")
    p_pi = kernel.matrix[arange * n_actions + acts].toarray()
    lhs = np.eye(n_states) - discount * p_pi
    v_reward = np.linalg.solve(lhs, rewards.values[arange, acts])
    v_bits = np.linalg.solve(
        lhs, rewards.secrecy_bps[arange, acts] * rewards.slot_seconds
    )
    return Metrics(avg_see=float((1.0 - discount) * v_reward[initial_index]),
                   total_secure_bits=float(v_bits[initial_index]))

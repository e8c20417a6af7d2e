"""Look-up-table policy planners.

Three planners over the same kernel/reward tables:

* backward induction for a known finite horizon (nonstationary policy),
* a greedy baseline that maximizes the immediate reward only,
* policy iteration with exact linear-solve evaluation for the discounted
  infinite-horizon formulation (stationary policy).

All three share one deterministic argmax: highest value first, then lowest
total energy drain, then lowest action index. Policies serialize to a
versioned tabular text file for look-up-table deployment.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mdp import RewardTable, TransitionKernel

_POLICY_FORMAT = "seeplan-policy"
_POLICY_VERSION = 1
_PI_MAX_ITERATIONS = 1000


class PolicyCoverageError(ValueError):
    """A policy table does not cover a requested (stage, state) pair."""


@dataclass
class PlanStats:
    """Operation counters and wall time for one planning run.

    `backup_ops` counts (state, action, successor) products expanded in
    future-value terms; `value_evaluations` counts scored (state, action)
    pairs; `iterations` is stages for backward induction and improvement
    rounds for policy iteration.
    """

    value_evaluations: int = 0
    backup_ops: int = 0
    iterations: int = 0
    plan_seconds: float = 0.0


@dataclass(frozen=True, eq=False)
class NonstationaryPolicy:
    """Stage-indexed state -> action table with its stage value tables."""

    actions: np.ndarray   # (K, N_S) int action indices
    values: np.ndarray    # (K, N_S) float, expected remaining reward sum
    n_actions: int
    stats: PlanStats = field(default_factory=PlanStats)

    @property
    def stages(self) -> int:
        return self.actions.shape[0]

    def stage_actions(self, stage: int) -> np.ndarray:
        if not 0 <= stage < self.stages:
            raise PolicyCoverageError(
                f"policy covers stages [0, {self.stages}), got {stage}"
            )
        return self.actions[stage]

    def action_index(self, stage: int, state_index: int) -> int:
        return int(self.stage_actions(stage)[state_index])


@dataclass(frozen=True, eq=False)
class StationaryPolicy:
    """Stage-independent state -> action table with its value table."""

    actions: np.ndarray   # (N_S,) int action indices
    values: np.ndarray    # (N_S,) float
    n_actions: int
    stats: PlanStats = field(default_factory=PlanStats)

    def stage_actions(self, stage: int) -> np.ndarray:
        if stage < 0:
            raise PolicyCoverageError(f"stage must be nonnegative, got {stage}")
        return self.actions

    def action_index(self, stage: int, state_index: int) -> int:
        return int(self.stage_actions(stage)[state_index])


def _tie_order(rewards: RewardTable) -> np.ndarray:
    """Action indices sorted by (total energy drain, index)."""
    n = rewards.action_cost_units.shape[0]
    return np.lexsort((np.arange(n), rewards.action_cost_units))


def _argmax_tie(q: np.ndarray, feasible: np.ndarray,
                tie_order: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise argmax under the deterministic tie rule.

    Scanning columns in tie order and taking the first maximum implements
    "highest value, then lowest drain, then lowest index" in one pass.
    """
    masked = np.where(feasible, q, -np.inf)
    reordered = masked[:, tie_order]
    first = np.argmax(reordered, axis=1)
    best = tie_order[first]
    values = reordered[np.arange(q.shape[0]), first]
    return values, best


def plan_backward_induction(kernel: TransitionKernel, rewards: RewardTable,
                            horizon: int) -> NonstationaryPolicy:
    """Optimal nonstationary policy for a fixed number of slots.

    The last stage maximizes the immediate reward alone; every earlier stage
    maximizes immediate reward plus expected next-stage value.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    n_states, n_actions = rewards.values.shape
    if kernel.n_states != n_states or kernel.n_actions != n_actions:
        raise ValueError(
            f"kernel is {kernel.n_states}x{kernel.n_actions} but rewards are "
            f"{n_states}x{n_actions}"
        )
    t0 = time.perf_counter()
    stats = PlanStats()
    order = _tie_order(rewards)
    n_feasible = int(rewards.feasible.sum())

    actions = np.zeros((horizon, n_states), dtype=np.int32)
    values = np.zeros((horizon, n_states))
    values[-1], actions[-1] = _argmax_tie(rewards.values, rewards.feasible, order)
    stats.value_evaluations += n_feasible
    stats.iterations += 1
    for k in range(horizon - 2, -1, -1):
        future = (kernel.matrix @ values[k + 1]).reshape(n_states, n_actions)
        values[k], actions[k] = _argmax_tie(rewards.values + future,
                                            rewards.feasible, order)
        stats.value_evaluations += n_feasible
        stats.backup_ops += kernel.matrix.nnz
        stats.iterations += 1
    stats.plan_seconds = time.perf_counter() - t0
    return NonstationaryPolicy(actions=actions, values=values,
                               n_actions=n_actions, stats=stats)


def greedy_action(rewards: RewardTable, state_index: int) -> int:
    """Action index maximizing the immediate reward in one state.

    Ties go to the action draining the least energy, then to the lowest
    index, so states where every reward is zero choose the all-zero action.
    """
    row = rewards.values[state_index:state_index + 1]
    feas = rewards.feasible[state_index:state_index + 1]
    _, best = _argmax_tie(row, feas, _tie_order(rewards))
    return int(best[0])


def greedy_policy(rewards: RewardTable) -> StationaryPolicy:
    """Myopic stationary policy: per-state immediate-reward argmax.

    Needs no planning phase; the stats counters stay at zero because no
    future values are ever backed up.
    """
    values, actions = _argmax_tie(rewards.values, rewards.feasible,
                                  _tie_order(rewards))
    return StationaryPolicy(actions=actions.astype(np.int32), values=values,
                            n_actions=rewards.values.shape[1], stats=PlanStats())


def plan_policy_iteration(kernel: TransitionKernel, rewards: RewardTable,
                          discount: float) -> StationaryPolicy:
    """Optimal stationary policy for the discounted infinite-horizon problem.

    Alternates exact policy evaluation, (I - discount * P_pi) V = R_pi solved
    directly, with greedy improvement under the shared tie rule, starting
    from the greedy policy, until the policy is a fixed point.
    """
    if not 0.0 < discount < 1.0:
        raise ValueError(f"discount must be in (0, 1), got {discount}")
    n_states, n_actions = rewards.values.shape
    if kernel.n_states != n_states or kernel.n_actions != n_actions:
        raise ValueError(
            f"kernel is {kernel.n_states}x{kernel.n_actions} but rewards are "
            f"{n_states}x{n_actions}"
        )
    t0 = time.perf_counter()
    stats = PlanStats()
    order = _tie_order(rewards)
    n_feasible = int(rewards.feasible.sum())
    eye = np.eye(n_states)
    arange = np.arange(n_states)

    policy = greedy_policy(rewards).actions
    values = np.zeros(n_states)
    for _ in range(_PI_MAX_ITERATIONS):
        stats.iterations += 1
        # Exact evaluation of the current policy.
        p_pi = kernel.matrix[policy + arange * n_actions].toarray()
        r_pi = rewards.values[arange, policy]
        values = np.linalg.solve(eye - discount * p_pi, r_pi)
        # Greedy improvement.
        future = (kernel.matrix @ values).reshape(n_states, n_actions)
        _, improved = _argmax_tie(rewards.values + discount * future,
                                  rewards.feasible, order)
        stats.value_evaluations += n_feasible
        stats.backup_ops += kernel.matrix.nnz
        if np.array_equal(improved, policy):
            break
        policy = improved
    else:
        raise RuntimeError(
            f"policy iteration did not converge in {_PI_MAX_ITERATIONS} iterations"
        )
    stats.plan_seconds = time.perf_counter() - t0
    return StationaryPolicy(actions=policy.astype(np.int32), values=values,
                            n_actions=n_actions, stats=stats)


def horizon_to_discount(horizon: int) -> float:
    """Discount whose mean geometric horizon equals the given slot count."""
    if horizon < 2:
        raise ValueError(f"horizon must be >= 2 for a discount in (0, 1), got {horizon}")
    return 1.0 - 1.0 / horizon


def save_policy(policy: NonstationaryPolicy | StationaryPolicy, path) -> None:
    """Write a policy as versioned delimited text.

    One row per (stage, state): stage, state index, both power-level indices,
    and the stage value, full double precision.
    """
    nonstationary = isinstance(policy, NonstationaryPolicy)
    actions = policy.actions if nonstationary else policy.actions[None, :]
    values = policy.values if nonstationary else policy.values[None, :]
    stages, n_states = actions.shape
    m = int(round(np.sqrt(policy.n_actions)))
    kind = "nonstationary" if nonstationary else "stationary"
    lines = [
        f"# {_POLICY_FORMAT} v{_POLICY_VERSION} kind={kind} "
        f"stages={stages} states={n_states} actions={policy.n_actions}",
        "stage,state,ps_idx,pd_idx,value",
    ]
    for k in range(stages):
        for s in range(n_states):
            a = int(actions[k, s])
            lines.append(f"{k},{s},{a // m},{a % m},{float(values[k, s])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_policy(path) -> NonstationaryPolicy | StationaryPolicy:
    """Read a policy file written by `save_policy`, checking full coverage."""
    lines = Path(path).read_text().splitlines()
    if len(lines) < 3 or not lines[0].startswith(f"# {_POLICY_FORMAT} v"):
        raise ValueError(f"{path}: not a {_POLICY_FORMAT} file")
    header = dict(item.split("=") for item in lines[0].split()[3:])
    version = lines[0].split()[2]
    if version != f"v{_POLICY_VERSION}":
        raise ValueError(f"{path}: unsupported policy format version {version}")
    kind = header["kind"]
    stages, n_states = int(header["stages"]), int(header["states"])
    n_actions = int(header["actions"])
    m = int(round(np.sqrt(n_actions)))
    if lines[1] != "stage,state,ps_idx,pd_idx,value":
        raise ValueError(f"{path}: unexpected column header")
    actions = np.full((stages, n_states), -1, dtype=np.int32)
    values = np.zeros((stages, n_states))
    for line in lines[2:]:
        k, s, ps, pd, value = line.split(",")
        actions[int(k), int(s)] = int(ps) * m + int(pd)
        values[int(k), int(s)] = float(value)
    if np.any(actions < 0):
        raise PolicyCoverageError(f"{path}: policy file misses (stage, state) rows")
    if kind == "stationary":
        return StationaryPolicy(actions=actions[0], values=values[0],
                                n_actions=n_actions)
    return NonstationaryPolicy(actions=actions, values=values, n_actions=n_actions)

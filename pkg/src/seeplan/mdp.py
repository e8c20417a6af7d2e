"""Finite state/action spaces, the factored transition kernel, and rewards.

A state is four channel-level indices plus the two battery levels; an action
is a pair of power-level indices. The kernel factors into four independent
per-link channel chains and two battery updates driven by Bernoulli energy
harvesting, so it is built as a Kronecker product of a channel block and a
battery/action block. `transition_prob` and `successor_distribution` are
direct per-entry implementations of the same factorization and serve as
independent cross-checks of the assembled kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp

from .model import (
    LINKS,
    InfeasibleActionError,
    LinkGains,
    ParameterError,
    SystemParams,
    battery_next,
    secrecy_rate,
    sinr_pair,
)

# Guard for dense (state x action) tables.
_MAX_TABLE_ENTRIES = 2**31


class State(NamedTuple):
    """Channel level indices for the four links plus the two battery levels."""

    g_sd: int
    g_se: int
    g_dd: int
    g_de: int
    b_src: int
    b_dst: int


class Action(NamedTuple):
    """Indices into the power level set: transmit power and jamming power."""

    ps_idx: int
    pd_idx: int


class StateSpace:
    """Bijective encoder between `State` and a dense index.

    Ordering is gains-outer, batteries-inner: the source battery varies
    slower than the destination battery, and the four gain indices (sd, se,
    dd, de) vary slower still, sd slowest.
    """

    def __init__(self, params: SystemParams):
        self.params = params
        self._levels = tuple(len(params.gain_levels[link]) for link in LINKS)
        self._b1 = params.battery_cap_src + 1
        self._b2 = params.battery_cap_dst + 1
        m = params.n_power_levels
        self.n_states = int(np.prod(self._levels)) * self._b1 * self._b2
        self.n_actions = m * m
        if self.n_states * self.n_actions > _MAX_TABLE_ENTRIES:
            raise ParameterError(
                f"state-action table would need {self.n_states * self.n_actions} entries"
            )
        # ps-major, pd-minor: action index a = ps_idx * M + pd_idx.
        self.actions: tuple[Action, ...] = tuple(
            Action(i, j) for i in range(m) for j in range(m)
        )
        # Energy units consumed by each action (source units, destination units).
        units = params.power_units
        self.action_units: tuple[tuple[int, int], ...] = tuple(
            (units[a.ps_idx], units[a.pd_idx]) for a in self.actions
        )

    def encode(self, state: State) -> int:
        idx = state.g_sd
        idx = idx * self._levels[1] + state.g_se
        idx = idx * self._levels[2] + state.g_dd
        idx = idx * self._levels[3] + state.g_de
        return (idx * self._b1 + state.b_src) * self._b2 + state.b_dst

    def decode(self, index: int) -> State:
        idx, b_dst = divmod(index, self._b2)
        idx, b_src = divmod(idx, self._b1)
        idx, g_de = divmod(idx, self._levels[3])
        idx, g_dd = divmod(idx, self._levels[2])
        g_sd, g_se = divmod(idx, self._levels[1])
        return State(g_sd, g_se, g_dd, g_de, b_src, b_dst)

    def states(self) -> Iterator[State]:
        for index in range(self.n_states):
            yield self.decode(index)

    def gains(self, state: State) -> LinkGains:
        lv = self.params.gain_levels
        return LinkGains(
            lv["sd"][state.g_sd],
            lv["se"][state.g_se],
            lv["dd"][state.g_dd],
            lv["de"][state.g_de],
        )


def enumerate_states(params: SystemParams) -> StateSpace:
    """Build the full discrete state space for the given parameters."""
    return StateSpace(params)


def feasible_actions(s: State, params: SystemParams) -> list[Action]:
    """Power pairs whose per-slot energy drain fits in the current batteries.

    Ordered transmit-power-major, jamming-power-minor, both ascending, so the
    all-zero action is always first.
    """
    units = params.power_units
    ps_ok = [i for i, u in enumerate(units) if u <= s.b_src]
    pd_ok = [j for j, u in enumerate(units) if u <= s.b_dst]
    return [Action(i, j) for i in ps_ok for j in pd_ok]


def _battery_marginal(b: int, consumed: int, cap: int, harvest_units: int,
                      harvest_prob: float) -> dict[int, float]:
    """Distribution of the next battery level, harvest branches coalesced.

    When capacity clipping (or a zero harvest amount) makes both Bernoulli
    branches land on the same level, their probabilities add up.
    """
    out: dict[int, float] = {}
    for harvested, prob in ((harvest_units, harvest_prob), (0, 1.0 - harvest_prob)):
        if prob == 0.0:
            continue
        nxt = battery_next(b, consumed, harvested, cap)
        out[nxt] = out.get(nxt, 0.0) + prob
    return out


def transition_prob(s: State, a: Action, s_next: State,
                    params: SystemParams) -> float:
    """Probability of one transition: four channel factors times the
    harvest-weighted battery indicators for both nodes."""
    units = params.power_units
    consumed_src = units[a.ps_idx]
    consumed_dst = units[a.pd_idx]
    if consumed_src > s.b_src or consumed_dst > s.b_dst:
        raise InfeasibleActionError(
            f"action {tuple(a)} infeasible in state {tuple(s)}"
        )
    prob = 1.0
    for link, g, g_next in zip(
        LINKS,
        (s.g_sd, s.g_se, s.g_dd, s.g_de),
        (s_next.g_sd, s_next.g_se, s_next.g_dd, s_next.g_de),
    ):
        prob *= params.gain_transition[link][g, g_next]
        if prob == 0.0:
            return 0.0
    src = _battery_marginal(s.b_src, consumed_src, params.battery_cap_src,
                            params.harvest_units_src, params.harvest_prob_src)
    dst = _battery_marginal(s.b_dst, consumed_dst, params.battery_cap_dst,
                            params.harvest_units_dst, params.harvest_prob_dst)
    return prob * src.get(s_next.b_src, 0.0) * dst.get(s_next.b_dst, 0.0)


def successor_distribution(s: State, a: Action,
                           params: SystemParams) -> list[tuple[State, float]]:
    """Sparse successor list for one (state, action): all positive-probability
    next states with their probabilities, summing to 1."""
    units = params.power_units
    consumed_src = units[a.ps_idx]
    consumed_dst = units[a.pd_idx]
    if consumed_src > s.b_src or consumed_dst > s.b_dst:
        raise InfeasibleActionError(
            f"action {tuple(a)} infeasible in state {tuple(s)}"
        )
    trans = params.gain_transition
    link_rows = [
        [(j, p) for j, p in enumerate(trans[link][g]) if p > 0.0]
        for link, g in zip(LINKS, (s.g_sd, s.g_se, s.g_dd, s.g_de))
    ]
    src = _battery_marginal(s.b_src, consumed_src, params.battery_cap_src,
                            params.harvest_units_src, params.harvest_prob_src)
    dst = _battery_marginal(s.b_dst, consumed_dst, params.battery_cap_dst,
                            params.harvest_units_dst, params.harvest_prob_dst)
    out = []
    for g_sd, p_sd in link_rows[0]:
        for g_se, p_se in link_rows[1]:
            for g_dd, p_dd in link_rows[2]:
                for g_de, p_de in link_rows[3]:
                    p_chan = p_sd * p_se * p_dd * p_de
                    for b_src, p_src in src.items():
                        for b_dst, p_dst in dst.items():
                            out.append((
                                State(g_sd, g_se, g_dd, g_de, b_src, b_dst),
                                p_chan * p_src * p_dst,
                            ))
    return out


@dataclass(frozen=True, eq=False)
class RewardTable:
    """Per-(state, action) immediate rewards and secrecy rates.

    `values` holds bits/J, `secrecy_bps` the secrecy rate of the same slot;
    entries where `feasible` is False are placeholders (zero) and must not be
    read. `action_cost_units` is the total energy drain of each action, used
    for deterministic tie-breaking; `slot_seconds` converts rates to bits.
    """

    values: np.ndarray        # (N_S, N_A) float, bits/J
    secrecy_bps: np.ndarray   # (N_S, N_A) float, bps
    feasible: np.ndarray      # (N_S, N_A) bool
    action_cost_units: np.ndarray  # (N_A,) int
    slot_seconds: float


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Sparse one-step kernel, one row per (state, action) pair.

    Row s * n_actions + a of `matrix` is the successor distribution of taking
    action a in state s; rows of infeasible pairs are empty.
    """

    matrix: sp.csr_matrix     # (N_S * N_A, N_S)
    feasible: np.ndarray      # (N_S, N_A) bool
    n_states: int
    n_actions: int

    def row(self, state_index: int, action_index: int) -> tuple[np.ndarray, np.ndarray]:
        """Successor indices and probabilities for one feasible pair."""
        if not self.feasible[state_index, action_index]:
            raise InfeasibleActionError(
                f"action {action_index} infeasible in state {state_index}"
            )
        r = self.matrix.getrow(state_index * self.n_actions + action_index)
        return r.indices.copy(), r.data.copy()


def _feasibility_mask(space: StateSpace) -> np.ndarray:
    """(N_S, N_A) mask of actions whose drain fits in the state's batteries."""
    params = space.params
    units = np.array(params.power_units)
    b1, b2 = params.battery_cap_src + 1, params.battery_cap_dst + 1
    src_ok = units[None, :] <= np.arange(b1)[:, None]   # (b1, M)
    dst_ok = units[None, :] <= np.arange(b2)[:, None]   # (b2, M)
    # (b1, b2, M, M) -> rows ordered like b_src * b2 + b_dst, ps-major actions
    bat = (src_ok[:, None, :, None] & dst_ok[None, :, None, :]).reshape(b1 * b2, -1)
    n_gain = space.n_states // (b1 * b2)
    return np.tile(bat, (n_gain, 1))


def build_reward_table(space: StateSpace, params: SystemParams) -> RewardTable:
    """Immediate reward and secrecy rate for every feasible (state, action).

    Rewards depend only on the gain combination and the action, so they are
    computed once per combination and broadcast over the battery block.
    """
    levels = [params.gain_levels[link] for link in LINKS]
    n_combo = int(np.prod([len(lv) for lv in levels]))
    combo_reward = np.zeros((n_combo, space.n_actions))
    combo_rate = np.zeros((n_combo, space.n_actions))
    combo = 0
    for g_sd in levels[0]:
        for g_se in levels[1]:
            for g_dd in levels[2]:
                for g_de in levels[3]:
                    gains = LinkGains(g_sd, g_se, g_dd, g_de)
                    for a_idx, action in enumerate(space.actions):
                        p_s = params.power_levels[action.ps_idx]
                        p_d = params.power_levels[action.pd_idx]
                        gamma_d, gamma_e = sinr_pair(gains, p_s, p_d, params)
                        rate = secrecy_rate(gamma_d, gamma_e, params)
                        combo_rate[combo, a_idx] = rate
                        total = p_s + p_d
                        combo_reward[combo, a_idx] = rate / total if total > 0 else 0.0
                    combo += 1
    n_bat = space.n_states // n_combo
    feasible = _feasibility_mask(space)
    values = np.repeat(combo_reward, n_bat, axis=0)
    rates = np.repeat(combo_rate, n_bat, axis=0)
    values[~feasible] = 0.0
    rates[~feasible] = 0.0
    cost = np.array([u_s + u_d for u_s, u_d in space.action_units])
    return RewardTable(values=values, secrecy_bps=rates, feasible=feasible,
                       action_cost_units=cost, slot_seconds=params.slot_seconds)


def build_kernel(space: StateSpace, params: SystemParams) -> TransitionKernel:
    """Assemble the full sparse kernel as channel-block (x) battery-block.

    The state encoding makes the flat (state, action) row index factor as
    combo * (n_bat * N_A) + bat * N_A + a, which is exactly the row order of
    a Kronecker product of the channel-combination chain and a battery+action
    block, and the column order is combo * n_bat + bat.
    """
    chan = sp.csr_matrix(params.gain_transition["sd"])
    for link in LINKS[1:]:
        chan = sp.kron(chan, sp.csr_matrix(params.gain_transition[link]), format="csr")

    b1, b2 = params.battery_cap_src + 1, params.battery_cap_dst + 1
    n_bat = b1 * b2
    units = params.power_units
    src_marg = {
        (b, u): _battery_marginal(b, u, params.battery_cap_src,
                                  params.harvest_units_src, params.harvest_prob_src)
        for b in range(b1) for u in set(units) if u <= b
    }
    dst_marg = {
        (b, u): _battery_marginal(b, u, params.battery_cap_dst,
                                  params.harvest_units_dst, params.harvest_prob_dst)
        for b in range(b2) for u in set(units) if u <= b
    }
    rows, cols, data = [], [], []
    for b_src in range(b1):
        for b_dst in range(b2):
            base = (b_src * b2 + b_dst) * space.n_actions
            for a_idx, (u_s, u_d) in enumerate(space.action_units):
                if u_s > b_src or u_d > b_dst:
                    continue
                for nb_src, p_src in src_marg[(b_src, u_s)].items():
                    for nb_dst, p_dst in dst_marg[(b_dst, u_d)].items():
                        rows.append(base + a_idx)
                        cols.append(nb_src * b2 + nb_dst)
                        data.append(p_src * p_dst)
    battery = sp.csr_matrix(
        (data, (rows, cols)), shape=(n_bat * space.n_actions, n_bat)
    )
    matrix = sp.kron(chan, battery, format="csr")
    return TransitionKernel(matrix=matrix, feasible=_feasibility_mask(space),
                            n_states=space.n_states, n_actions=space.n_actions)

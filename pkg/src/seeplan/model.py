"""Physical-layer formulas and energy bookkeeping.

Everything here is a pure function of its arguments: SINRs of the data and
eavesdropping channels under full-duplex jamming, the secrecy rate, the
per-slot secrecy-energy-efficiency reward, and the quantized battery update.
Powers are stored in Watts but must map to whole battery energy units per
slot so that battery evolution stays exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping

import numpy as np

if TYPE_CHECKING:
    from .mdp import State

# The four links: source->destination, source->eavesdropper,
# destination self-interference, destination->eavesdropper.
LINKS = ("sd", "se", "dd", "de")

# Tolerance for "this float is a whole number of energy units".
_UNIT_TOL = 1e-9


class ParameterError(ValueError):
    """A physical or stochastic parameter is out of its valid domain."""


class InfeasibleActionError(ValueError):
    """An action would consume more energy than a battery holds."""


@dataclass(frozen=True)
class LinkGains:
    """Channel power gains of the four links in one time slot."""

    g_sd: float
    g_se: float
    g_dd: float
    g_de: float

    def __post_init__(self):
        for name in ("g_sd", "g_se", "g_dd", "g_de"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be strictly positive")


@dataclass(frozen=True, eq=False)
class SystemParams:
    """All physical and stochastic constants of one system instance.

    Channel gains are quantized per link into ordered level lists with a
    row-stochastic level-transition matrix each; the energy-harvesting
    process is Bernoulli per node and slot; batteries are integer lattices
    of `energy_unit_joules` quanta.
    """

    bandwidth_hz: float
    noise_psd: float            # W/Hz
    sic_factor: float           # residual self-interference fraction in [0, 1]
    slot_seconds: float
    energy_unit_joules: float
    harvest_units_src: int
    harvest_units_dst: int
    harvest_prob_src: float
    harvest_prob_dst: float
    battery_cap_src: int
    battery_cap_dst: int
    power_levels: tuple[float, ...]             # Watts, ascending, first is 0
    gain_levels: Mapping[str, tuple[float, ...]]  # per link in LINKS
    gain_transition: Mapping[str, np.ndarray]     # per link, L x L row-stochastic
    horizon: int
    initial_state: "State"
    # Energy units drained per slot by each power level; derived, not an input.
    power_units: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.bandwidth_hz <= 0.0:
            raise ParameterError("bandwidth_hz must be positive")
        if self.noise_psd <= 0.0:
            raise ParameterError("noise_psd must be positive")
        if self.slot_seconds <= 0.0:
            raise ParameterError("slot_seconds must be positive")
        if self.energy_unit_joules <= 0.0:
            raise ParameterError("energy_unit_joules must be positive")
        if not 0.0 <= self.sic_factor <= 1.0:
            raise ParameterError("sic_factor must be in [0, 1]")
        for name in ("harvest_prob_src", "harvest_prob_dst"):
            prob = getattr(self, name)
            if not 0.0 <= prob <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1]")
        for name in ("harvest_units_src", "harvest_units_dst",
                     "battery_cap_src", "battery_cap_dst"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 0:
                raise ParameterError(f"{name} must be a nonnegative integer")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ParameterError("horizon must be a positive integer")

        levels = tuple(float(p) for p in self.power_levels)
        if not levels or levels[0] != 0.0:
            raise ParameterError("power_levels must start with 0")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ParameterError("power_levels must be strictly increasing")
        object.__setattr__(self, "power_levels", levels)
        object.__setattr__(
            self, "power_units", tuple(power_to_units(p, self) for p in levels)
        )

        gains: dict[str, tuple[float, ...]] = {}
        trans: dict[str, np.ndarray] = {}
        for link in LINKS:
            if link not in self.gain_levels:
                raise ParameterError(f"gain_levels missing link {link!r}")
            if link not in self.gain_transition:
                raise ParameterError(f"gain_transition missing link {link!r}")
            lv = tuple(float(g) for g in self.gain_levels[link])
            if not lv or any(g <= 0.0 for g in lv):
                raise ParameterError(f"gain_levels[{link!r}] must be strictly positive")
            if any(b <= a for a, b in zip(lv, lv[1:])):
                raise ParameterError(f"gain_levels[{link!r}] must be strictly increasing")
            mat = np.array(self.gain_transition[link], dtype=float)
            if mat.shape != (len(lv), len(lv)):
                raise ParameterError(
                    f"gain_transition[{link!r}] must be {len(lv)}x{len(lv)}, got {mat.shape}"
                )
            if np.any(mat < 0.0):
                raise ParameterError(f"gain_transition[{link!r}] has negative entries")
            if np.any(np.abs(mat.sum(axis=1) - 1.0) > 1e-12):
                raise ParameterError(f"gain_transition[{link!r}] rows must sum to 1")
            mat.setflags(write=False)
            gains[link] = lv
            trans[link] = mat
        object.__setattr__(self, "gain_levels", gains)
        object.__setattr__(self, "gain_transition", trans)

        s0 = self.initial_state
        caps = (self.battery_cap_src, self.battery_cap_dst)
        if not (0 <= s0.b_src <= caps[0] and 0 <= s0.b_dst <= caps[1]):
            raise ParameterError("initial_state battery levels exceed capacities")
        for link, idx in zip(LINKS, (s0.g_sd, s0.g_se, s0.g_dd, s0.g_de)):
            if not 0 <= idx < len(gains[link]):
                raise ParameterError(f"initial_state gain index for {link!r} out of range")

    @property
    def noise_floor_w(self) -> float:
        """Total noise power W * N0 over the channel bandwidth."""
        return self.bandwidth_hz * self.noise_psd

    @property
    def n_power_levels(self) -> int:
        return len(self.power_levels)


def power_to_units(p: float, params: SystemParams) -> int:
    """Energy units drained in one slot by transmitting at power `p` Watts.

    The quotient p * T_s / unit must be a whole number; anything else means
    the power set and the battery quantum are inconsistent.
    """
    if p < 0.0:
        raise ParameterError("power must be nonnegative")
    raw = p * params.slot_seconds / params.energy_unit_joules
    units = round(raw)
    if abs(raw - units) > _UNIT_TOL * max(1.0, abs(raw)):
        raise ParameterError(
            f"power {p} W drains {raw} energy units per slot; must be an integer"
        )
    return int(units)


def sinr_pair(gains: LinkGains, p_s: float, p_d: float,
              params: SystemParams) -> tuple[float, float]:
    """SINRs at the destination and at the eavesdropper.

    The destination sees the source signal over residual self-interference
    (attenuated by the SIC factor) plus noise; the eavesdropper sees it over
    the full jamming power plus noise.
    """
    if p_s < 0.0 or p_d < 0.0:
        raise ParameterError("powers must be nonnegative")
    noise = params.noise_floor_w
    if noise <= 0.0:
        raise ParameterError("noise floor must be positive")
    gamma_d = gains.g_sd * p_s / (params.sic_factor * p_d * gains.g_dd + noise)
    gamma_e = gains.g_se * p_s / (p_d * gains.g_de + noise)
    return gamma_d, gamma_e


def secrecy_rate(gamma_d: float, gamma_e: float, params: SystemParams) -> float:
    """Achievable secrecy rate in bps, clamped at zero."""
    w = params.bandwidth_hz
    rate = w * math.log2(1.0 + gamma_d) - w * math.log2(1.0 + gamma_e)
    return max(rate, 0.0)


def immediate_reward(gains: LinkGains, p_s: float, p_d: float,
                     params: SystemParams) -> float:
    """Per-slot secrecy energy efficiency in bits/J: C_S / (P_S + P_D).

    Defined as 0 when both powers are zero (the secrecy rate is 0 there, so
    this is the natural limit and keeps idle slots reward-neutral).
    """
    total = p_s + p_d
    if total <= 0.0:
        return 0.0
    gamma_d, gamma_e = sinr_pair(gains, p_s, p_d, params)
    return secrecy_rate(gamma_d, gamma_e, params) / total


def battery_next(b: int, consumed_units: int, harvested_units: int, cap: int) -> int:
    """Battery level after one slot: clip(b - consumed + harvested, cap).

    `consumed_units` may not exceed the stored energy; harvested energy
    beyond the capacity is lost.
    """
    if consumed_units < 0:
        raise InfeasibleActionError("consumed_units must be nonnegative")
    if consumed_units > b:
        raise InfeasibleActionError(
            f"consuming {consumed_units} units from a battery holding {b}"
        )
    return min(b - consumed_units + harvested_units, cap)

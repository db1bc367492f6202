"""Delay and energy accounting for one user's semantic transmission.

Three delay stages: the base station extracts semantic features from the
source image (compute-bound on the BS CPU), transmits the feature payload
over the allocated resource block, and the user runs the decoder locally.
Energy splits into a BS share (extraction compute plus transmit power
integrated over the transmission time) and a user share (decoder compute).
Feasibility compares the totals against the per-transmission caps D and E
with closed inequalities.

A zero-rate allocation (no resource block, or an all-zero row) yields an
infinite transmission delay rather than an error, so a learning loop can
penalize the outcome instead of crashing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .netmodel import ScenarioConfig
from .semtask import EncoderSpec


@dataclass(frozen=True)
class CostBreakdown:
    """Per-user delay/energy components; totals are derived, not stored twice."""

    extraction_delay_s: float
    transmission_delay_s: float
    user_compute_delay_s: float
    bs_energy_j: float
    user_energy_j: float
    total_delay_s: float = field(init=False)
    total_energy_j: float = field(init=False)

    def __post_init__(self):
        parts = (
            self.extraction_delay_s,
            self.transmission_delay_s,
            self.user_compute_delay_s,
            self.bs_energy_j,
            self.user_energy_j,
        )
        for p in parts:
            if math.isnan(p) or p < 0:
                raise ValueError(f"cost components must be >= 0, got {parts}")
        object.__setattr__(
            self,
            "total_delay_s",
            self.extraction_delay_s + self.transmission_delay_s + self.user_compute_delay_s,
        )
        object.__setattr__(self, "total_energy_j", self.bs_energy_j + self.user_energy_j)


def extraction_delay(cfg: ScenarioConfig, encoder: EncoderSpec) -> float:
    """BS-side feature extraction time: omega_B * D_X * D_M / f_B (s)."""
    if not cfg.bs_cpu_hz > 0:
        raise ValueError("BS CPU frequency must be > 0")
    return cfg.bs_cycles_per_bit * cfg.image_size_bits * encoder.model_size_bits / cfg.bs_cpu_hz


def transmission_delay(encoder: EncoderSpec, rate_bps: float) -> float:
    """Payload transmission time D_O / rate (s); +inf when the rate is zero."""
    if rate_bps < 0:
        raise ValueError(f"rate must be >= 0, got {rate_bps}")
    if rate_bps == 0:
        return math.inf
    return encoder.output_size_bits / rate_bps


def user_compute_delay(cfg: ScenarioConfig, encoder: EncoderSpec, user: int) -> float:
    """Decoder run time on user hardware: omega_U * D_O * D_E / f_U (s)."""
    f_u = cfg.user_cpu_hz[user]
    if not f_u > 0:
        raise ValueError(f"user {user} CPU frequency must be > 0")
    return cfg.user_cycles_per_bit[user] * encoder.output_size_bits * cfg.decoder_size_bits / f_u


def total_delay(l_extract: float, l_transmit: float, l_compute: float) -> float:
    """Sum of the three delay stages (s)."""
    for l in (l_extract, l_transmit, l_compute):
        if math.isnan(l) or l < 0:
            raise ValueError("delay components must be >= 0")
    return l_extract + l_transmit + l_compute


def bs_energy(cfg: ScenarioConfig, encoder: EncoderSpec, transmission_delay_s: float) -> float:
    """BS energy: zeta_B * f_B^2 * D_X * D_M plus transmit power times l_T (J)."""
    if transmission_delay_s < 0:
        raise ValueError("transmission delay must be >= 0")
    compute = (
        cfg.energy_coeff_bs
        * cfg.bs_cpu_hz**2
        * cfg.image_size_bits
        * encoder.model_size_bits
    )
    return compute + cfg.tx_power_w * transmission_delay_s


def user_energy(cfg: ScenarioConfig, encoder: EncoderSpec, user: int) -> float:
    """User decode energy: zeta_i * f_U^2 * D_O * D_E (J)."""
    return (
        cfg.energy_coeff_user
        * cfg.user_cpu_hz[user] ** 2
        * encoder.output_size_bits
        * cfg.decoder_size_bits
    )


def cost_breakdown(
    cfg: ScenarioConfig, encoder: EncoderSpec, rate_bps: float, user: int
) -> CostBreakdown:
    """Full per-user accounting for one (encoder, rate) outcome."""
    l_t = transmission_delay(encoder, rate_bps)
    return CostBreakdown(
        extraction_delay_s=extraction_delay(cfg, encoder),
        transmission_delay_s=l_t,
        user_compute_delay_s=user_compute_delay(cfg, encoder, user),
        bs_energy_j=bs_energy(cfg, encoder, l_t),
        user_energy_j=user_energy(cfg, encoder, user),
    )


def feasibility(cost: CostBreakdown, cfg: ScenarioConfig) -> tuple[bool, bool]:
    """(delay_ok, energy_ok) against the caps; equality counts as feasible."""
    return (
        cost.total_delay_s <= cfg.delay_cap_s,
        cost.total_energy_j <= cfg.energy_cap_j,
    )

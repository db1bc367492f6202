"""Downlink channel and OFDMA rate model.

One base station serves U users over Q orthogonal resource blocks (RBs).
The channel gain of user i is phi_i = gamma_i * d_i^-2 with gamma_i a
squared-magnitude Rayleigh fading draw (unit-mean exponential) and d_i the
BS-user distance in meters.  A user transmitting on RB q sees

    rate = W * log2(1 + P * phi_i / (I_q + W * N0))     [bits/s]

where W is the per-RB bandwidth (Hz), P the BS transmit power (W), I_q the
inter-cell interference on RB q (W) and N0 the noise power spectral density
(W/Hz).  Config files quote N0 in W/MHz; ingestion converts to W/Hz (see
config_io), so with the default 4e-15 W/MHz the per-RB noise floor is
W*N0 = 2e7 * 4e-21 = 8e-14 W.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical, cost and penalty parameters of one scenario.

    Units are SI throughout: Hz, W, W/Hz, meters, seconds, joules, bits.
    Defaults give the stock 5-user / 10-RB downlink scenario.  The BS CPU
    frequency and cycles-per-bit are specified as (low, high) ranges; cost
    formulas use the range midpoint so that delay and energy are
    deterministic functions of the channel draw.
    """

    users: int = 5                        # U
    rbs: int = 10                         # Q, must be >= users
    rb_bandwidth_hz: float = 20e6         # W
    tx_power_w: float = 0.2               # P
    noise_psd_w_per_hz: float = 4e-21     # N0 (4e-15 W/MHz)
    interference_min_w: float = 1e-9      # I_q sampled log-uniform in
    interference_max_w: float = 1.0       # [min, max]
    cell_radius_m: float = 500.0
    bs_cpu_hz_range: tuple[float, float] = (2.5e9, 3.5e9)        # f_B
    bs_cycles_per_bit_range: tuple[float, float] = (500.0, 1000.0)  # omega_B
    user_cpu_hz: tuple[float, ...] = field(default=())           # f_U, per user
    user_cycles_per_bit: tuple[float, ...] = field(default=())   # omega_U, per user
    image_size_bits: float = 100.0        # D_X
    decoder_size_bits: float = 1e4        # D_E
    energy_coeff_bs: float = 1e-27        # zeta_B
    energy_coeff_user: float = 1e-27      # zeta_i
    delay_cap_s: float = 0.2              # D
    energy_cap_j: float = 20.0            # E
    penalty_delay: float = 1.0            # lambda_D
    penalty_energy: float = 1.0           # lambda_E
    feature_noise_kappa: float = 0.5      # per-coordinate noise var = kappa / SINR
    similarity_temperature: float = 10.0  # tau_s, softmax over cosine similarities
    num_classes: int = 10                 # N
    intra_class_jitter: float = 0.05      # sigma_intra
    draws_per_user: int = 1               # labeled samples per user per episode

    # Defaults for per-user CPU parameters when none are given.  The
    # cycles-per-bit scale is synthetic: chosen so that the default
    # scenario admits assignments inside the 200 ms delay cap given
    # D_E = 1e4 and payloads of ~2e4 bits.
    _DEFAULT_USER_CPU_HZ = 1e9
    _DEFAULT_USER_CYCLES_PER_BIT = 0.005

    def __post_init__(self):
        if not self.user_cpu_hz:
            object.__setattr__(
                self, "user_cpu_hz", (self._DEFAULT_USER_CPU_HZ,) * self.users
            )
        if not self.user_cycles_per_bit:
            object.__setattr__(
                self,
                "user_cycles_per_bit",
                (self._DEFAULT_USER_CYCLES_PER_BIT,) * self.users,
            )
        problems = self.validate()
        if problems:
            raise ValueError("invalid scenario config: " + "; ".join(problems))

    def validate(self) -> list[str]:
        """Return a list of every violated invariant (empty if valid)."""
        p = []
        if self.users < 1:
            p.append("users must be >= 1")
        if self.rbs < self.users:
            p.append(f"rbs ({self.rbs}) must be >= users ({self.users})")
        for name in (
            "rb_bandwidth_hz", "tx_power_w", "noise_psd_w_per_hz",
            "cell_radius_m", "energy_coeff_bs", "energy_coeff_user",
            "delay_cap_s", "energy_cap_j", "similarity_temperature",
        ):
            if not getattr(self, name) > 0:
                p.append(f"{name} must be > 0")
        # Zero is a legal degenerate value for these: no payload, no decoder,
        # noiseless channel, jitter-free encoder.
        for name in (
            "image_size_bits", "decoder_size_bits",
            "feature_noise_kappa", "intra_class_jitter",
        ):
            if getattr(self, name) < 0:
                p.append(f"{name} must be >= 0")
        if self.interference_min_w <= 0 or self.interference_max_w <= 0:
            p.append("interference bounds must be > 0")
        elif self.interference_min_w > self.interference_max_w:
            p.append("interference_min_w must be <= interference_max_w")
        for name in ("bs_cpu_hz_range", "bs_cycles_per_bit_range"):
            lo, hi = getattr(self, name)
            if lo <= 0 or hi < lo:
                p.append(f"{name} must satisfy 0 < low <= high")
        if len(self.user_cpu_hz) != self.users:
            p.append("user_cpu_hz must have one entry per user")
        elif any(f <= 0 for f in self.user_cpu_hz):
            p.append("user_cpu_hz entries must be > 0")
        if len(self.user_cycles_per_bit) != self.users:
            p.append("user_cycles_per_bit must have one entry per user")
        elif any(w <= 0 for w in self.user_cycles_per_bit):
            p.append("user_cycles_per_bit entries must be > 0")
        if self.penalty_delay < 0 or self.penalty_energy < 0:
            p.append("penalty weights must be >= 0")
        if self.num_classes < 2:
            p.append("num_classes must be >= 2")
        if self.draws_per_user < 1:
            p.append("draws_per_user must be >= 1")
        return p

    @property
    def bs_cpu_hz(self) -> float:
        """Effective f_B: midpoint of the configured range."""
        lo, hi = self.bs_cpu_hz_range
        return 0.5 * (lo + hi)

    @property
    def bs_cycles_per_bit(self) -> float:
        """Effective omega_B: midpoint of the configured range."""
        lo, hi = self.bs_cycles_per_bit_range
        return 0.5 * (lo + hi)

    @property
    def rb_noise_w(self) -> float:
        """Per-RB noise power W * N0 in watts."""
        return self.rb_bandwidth_hz * self.noise_psd_w_per_hz


@dataclass(frozen=True)
class ChannelState:
    """One channel realization: distances, fading and RB interference."""

    distances_m: np.ndarray      # (U,), > 0
    fading: np.ndarray           # (U,), gamma_i > 0, unit-mean exponential
    interference_w: np.ndarray   # (Q,), >= 0

    def __post_init__(self):
        d = np.asarray(self.distances_m, dtype=float)
        g = np.asarray(self.fading, dtype=float)
        i = np.asarray(self.interference_w, dtype=float)
        object.__setattr__(self, "distances_m", d)
        object.__setattr__(self, "fading", g)
        object.__setattr__(self, "interference_w", i)
        if d.ndim != 1 or g.shape != d.shape:
            raise ValueError("distances and fading must be 1-D with equal length")
        if i.ndim != 1:
            raise ValueError("interference must be a 1-D vector")
        if not np.all(d > 0):
            raise ValueError("all distances must be > 0")
        if not np.all(g > 0):
            raise ValueError("all fading draws must be > 0")
        if not np.all(i >= 0):
            raise ValueError("interference must be >= 0")
        gains = g * d ** -2.0
        if not np.all(np.isfinite(gains)) or not np.all(gains > 0):
            raise ValueError("derived channel gains must be finite and positive")

    @property
    def num_users(self) -> int:
        return self.distances_m.shape[0]

    @property
    def num_rbs(self) -> int:
        return self.interference_w.shape[0]

    @property
    def gains(self) -> np.ndarray:
        """phi_i = gamma_i / d_i^2 for every user."""
        return self.fading * self.distances_m ** -2.0


class RBAllocation:
    """Binary U x Q allocation matrix.

    Valid matrices have entries in {0, 1}, at most one RB per user (row sum
    <= 1) and at most one user per RB (column sum <= 1).  Construction
    rejects anything else.
    """

    def __init__(self, matrix: np.ndarray):
        m = np.asarray(matrix)
        if m.ndim != 2:
            raise ValueError("allocation must be a 2-D matrix")
        if not np.isin(m, (0, 1)).all():
            raise ValueError("allocation entries must be 0 or 1")
        m = m.astype(np.int8)
        rows = m.sum(axis=1)
        cols = m.sum(axis=0)
        if np.any(rows > 1):
            raise ValueError("some user holds more than one RB")
        if np.any(cols > 1):
            raise ValueError("some RB is assigned to more than one user")
        self.matrix = m

    @classmethod
    def from_rb_indices(cls, rb_of_user: list[int | None], num_rbs: int) -> "RBAllocation":
        """Build from a per-user RB index list (None = no RB)."""
        m = np.zeros((len(rb_of_user), num_rbs), dtype=np.int8)
        for i, q in enumerate(rb_of_user):
            if q is not None:
                m[i, q] = 1
        return cls(m)

    def row(self, user: int) -> np.ndarray:
        return self.matrix[user]


def channel_gain(distance_m: float, fading: float) -> float:
    """Channel gain gamma * d^-2 for a single BS-user link."""
    if distance_m <= 0:
        raise ValueError(f"distance must be > 0, got {distance_m}")
    if fading <= 0:
        raise ValueError(f"fading must be > 0, got {fading}")
    return fading / distance_m ** 2


def transmission_rate(
    alloc_row: np.ndarray,
    gain: float,
    cfg: ScenarioConfig,
    interference_w: np.ndarray,
) -> float:
    """Downlink rate in bits/s of one user given its RB allocation row.

    Sums W * log2(1 + P*phi / (I_q + W*N0)) over the RBs held by the user.
    A user holding no RB gets rate exactly 0.
    """
    a = np.asarray(alloc_row)
    i = np.asarray(interference_w, dtype=float)
    if a.shape != i.shape:
        raise ValueError(f"allocation row shape {a.shape} != interference shape {i.shape}")
    if not np.isin(a, (0, 1)).all():
        raise ValueError("allocation entries must be 0 or 1")
    sinr = cfg.tx_power_w * gain / (i + cfg.rb_noise_w)
    return float(np.sum(a * cfg.rb_bandwidth_hz * np.log2(1.0 + sinr)))


def rb_sinr(gain: float, cfg: ScenarioConfig, interference_w: float) -> float:
    """Linear SINR P*phi / (I_q + W*N0) on a single RB."""
    return cfg.tx_power_w * gain / (interference_w + cfg.rb_noise_w)


def sample_channel(cfg: ScenarioConfig, rng: np.random.Generator) -> ChannelState:
    """Draw one channel realization.

    Distances are uniform on (0, cell_radius], fading is unit-mean
    exponential (squared-magnitude Rayleigh), and interference is
    log-uniform over [interference_min_w, interference_max_w] because the
    configured range spans many decades.
    """
    # (1 - u) maps [0, 1) to (0, 1] so distances are never exactly zero.
    d = (1.0 - rng.random(cfg.users)) * cfg.cell_radius_m
    g = rng.exponential(1.0, size=cfg.users)
    lo, hi = np.log10(cfg.interference_min_w), np.log10(cfg.interference_max_w)
    i = 10.0 ** rng.uniform(lo, hi, size=cfg.rbs)
    return ChannelState(distances_m=d, fading=g, interference_w=i)

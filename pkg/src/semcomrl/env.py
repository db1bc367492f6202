"""Sequential encoder/resource-block assignment environment.

One episode serves U users in fixed index order: at step t the agent picks
a semantic encoder k in {0, 1, 2} and a free resource block q for user t.
Action masking guarantees no RB is handed out twice, so every trace
satisfies the one-RB-per-user / one-user-per-RB allocation constraints by
construction.  All intermediate rewards are zero; the terminal step scores
the completed joint assignment:

    reward = sum_i log(yhat_i[y_i])
             - lambda_D * #{i : total_delay_i > D}
             - lambda_E * #{i : total_energy_i > E}

where yhat_i is the receiver's class-probability vector for one labeled
sample of user i, simulated through encode -> channel noise -> classify.
The log-likelihood term is <= 0 and the penalties subtract, so rewards are
never positive.  We maximize this quantity: the log-likelihood sum is the
standard cross-entropy score of the follow-up classification task, and the
stated goal is to maximize task performance subject to the caps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costmodel import CostBreakdown, cost_breakdown
from .netmodel import ChannelState, RBAllocation, ScenarioConfig, sample_channel, rb_sinr, transmission_rate
from .seeding import stream_rng
from .semtask import EncoderSpec, PrototypeSet, default_catalog, make_prototypes, validate_catalog

NUM_ENCODERS = 3


@dataclass(frozen=True)
class EpisodeState:
    """Environment state before the assignment of user t (1-based).

    rb_used is the availability vector: entry q-1 is 1 iff RB q was already
    assigned this episode, so it holds exactly t - 1 ones.  assignments
    records the (encoder, rb) pair of every user served so far.
    """

    channel: ChannelState
    positions_m: np.ndarray              # (U, 2), consistent with channel distances
    rb_used: tuple[int, ...]             # length Q, entries in {0, 1}
    t: int                               # next user to assign; U + 1 when done
    assignments: tuple[tuple[int, int], ...]  # ((k, q), ...) for users 1..t-1

    def __post_init__(self):
        u, q = self.channel.num_users, self.channel.num_rbs
        p = np.asarray(self.positions_m, dtype=float)
        object.__setattr__(self, "positions_m", p)
        if p.shape != (u, 2):
            raise ValueError(f"positions must have shape ({u}, 2), got {p.shape}")
        if len(self.rb_used) != q or any(b not in (0, 1) for b in self.rb_used):
            raise ValueError("rb_used must be a length-Q binary tuple")
        if not 1 <= self.t <= u + 1:
            raise ValueError(f"step index {self.t} outside [1, {u + 1}]")
        if len(self.assignments) != self.t - 1:
            raise ValueError("one assignment per completed step required")
        if sum(self.rb_used) != self.t - 1:
            raise ValueError("rb_used must hold exactly t - 1 ones")

    @property
    def interference_w(self) -> np.ndarray:
        return self.channel.interference_w

    @property
    def done(self) -> bool:
        return self.t > self.channel.num_users


@dataclass(frozen=True)
class AssignAction:
    """Pick encoder k in {0, 1, 2} and RB q in {1..Q} for the current user."""

    encoder: int
    rb: int      # 1-based RB index

    def __post_init__(self):
        if not 0 <= self.encoder < NUM_ENCODERS:
            raise ValueError(f"encoder index {self.encoder} outside [0, {NUM_ENCODERS})")
        if self.rb < 1:
            raise ValueError(f"RB index {self.rb} must be >= 1")

    def to_flat(self, num_rbs: int) -> int:
        """Flat action id k * Q + (q - 1) in [0, 3Q)."""
        if self.rb > num_rbs:
            raise ValueError(f"RB index {self.rb} exceeds Q = {num_rbs}")
        return self.encoder * num_rbs + (self.rb - 1)

    @classmethod
    def from_flat(cls, flat: int, num_rbs: int) -> "AssignAction":
        if not 0 <= flat < NUM_ENCODERS * num_rbs:
            raise ValueError(f"flat action {flat} outside [0, {NUM_ENCODERS * num_rbs})")
        return cls(encoder=flat // num_rbs, rb=flat % num_rbs + 1)


@dataclass(frozen=True)
class StepOutcome:
    """Result of one environment step; cost diagnostics only at the terminal."""

    state: EpisodeState
    reward: float
    terminal: bool
    costs: tuple[CostBreakdown, ...] | None
    log_likelihoods: tuple[float, ...] | None


def action_mask(state: EpisodeState) -> np.ndarray:
    """Boolean vector over flat action ids; true iff the action's RB is free."""
    free = np.array(state.rb_used) == 0
    return np.tile(free, NUM_ENCODERS)


def encode_state(state: EpisodeState, cfg: ScenarioConfig) -> np.ndarray:
    """Network input of dimension 2Q + 2U: [I, p, nu].

    Interference spans many decades, so it enters as log10 min-max scaled
    to [0, 1] over the configured sampling bounds; positions are scaled by
    the cell radius; the availability bits pass through unchanged.
    """
    lo = math.log10(cfg.interference_min_w)
    hi = math.log10(cfg.interference_max_w)
    span = hi - lo if hi > lo else 1.0
    i_block = (np.log10(state.interference_w) - lo) / span
    p_block = (state.positions_m / cfg.cell_radius_m).ravel()
    nu_block = np.asarray(state.rb_used, dtype=float)
    return np.concatenate([i_block, p_block, nu_block])


def state_dim(cfg: ScenarioConfig) -> int:
    return 2 * cfg.rbs + 2 * cfg.users


def _validate_assignment(assignments, cfg: ScenarioConfig) -> None:
    """Reject anything violating one-RB-per-user / one-user-per-RB."""
    if len(assignments) != cfg.users:
        raise ValueError(f"need exactly {cfg.users} (encoder, rb) pairs")
    for k, q in assignments:
        if not 0 <= k < NUM_ENCODERS:
            raise ValueError(f"encoder index {k} outside [0, {NUM_ENCODERS})")
        if not 1 <= q <= cfg.rbs:
            raise ValueError(f"RB index {q} outside [1, {cfg.rbs}]")
    RBAllocation.from_rb_indices([q - 1 for _, q in assignments], cfg.rbs)


def assignment_costs(
    assignments,
    channel: ChannelState,
    cfg: ScenarioConfig,
    catalog: tuple[EncoderSpec, ...],
) -> tuple[CostBreakdown, ...]:
    """Per-user delay/energy accounting for a complete joint assignment."""
    costs = []
    for i, (k, q) in enumerate(assignments):
        row = np.zeros(cfg.rbs)
        row[q - 1] = 1
        rate = transmission_rate(row, channel.gains[i], cfg, channel.interference_w)
        costs.append(cost_breakdown(cfg, catalog[k], rate, i))
    return tuple(costs)


def episode_log_likelihoods(
    assignments,
    channel: ChannelState,
    cfg: ScenarioConfig,
    catalog: tuple[EncoderSpec, ...],
    prototypes: tuple[PrototypeSet, ...],
    rng: np.random.Generator,
    samples: int = 1,
) -> np.ndarray:
    """(samples, U) per-user log-likelihoods of the receiver classifications.

    Each sample simulates cfg.draws_per_user labeled images per user
    (prototype + jitter, renormalized, plus channel noise of variance
    kappa / SINR) and records the mean log-probability the receiver's
    softmax head puts on the true class.  All labels are drawn before any
    feature noise so that evaluations with a shared seed score different
    assignments against identical label sequences.
    """
    u = cfg.users
    draws = cfg.draws_per_user
    total = samples * draws
    labels = rng.integers(0, cfg.num_classes, size=(total, u))
    tau = cfg.similarity_temperature
    out = np.empty((total, u))
    for i, (k, q) in enumerate(assignments):
        protos = prototypes[k]
        dim = protos.dim
        sinr = rb_sinr(channel.gains[i], cfg, float(channel.interference_w[q - 1]))
        feats = protos.vectors[labels[:, i]]
        feats = feats + cfg.intra_class_jitter * rng.standard_normal((total, dim))
        feats /= np.linalg.norm(feats, axis=1, keepdims=True)
        noisy = feats + np.sqrt(cfg.feature_noise_kappa / sinr) * rng.standard_normal((total, dim))
        norms = np.linalg.norm(noisy, axis=1, keepdims=True)
        logits = tau * (noisy / norms) @ protos.vectors.T
        logits -= logits.max(axis=1, keepdims=True)
        log_probs = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        out[:, i] = log_probs[np.arange(total), labels[:, i]]
    return out.reshape(samples, draws, u).mean(axis=1)


def terminal_reward(
    assignments,
    channel: ChannelState,
    cfg: ScenarioConfig,
    catalog: tuple[EncoderSpec, ...],
    prototypes: tuple[PrototypeSet, ...],
    rng: np.random.Generator,
) -> tuple[float, tuple[CostBreakdown, ...], tuple[float, ...]]:
    """Score one completed episode: (reward, per-user costs, log-likelihoods)."""
    costs = assignment_costs(assignments, channel, cfg, catalog)
    ll = episode_log_likelihoods(assignments, channel, cfg, catalog, prototypes, rng)[0]
    delay_violations = sum(c.total_delay_s > cfg.delay_cap_s for c in costs)
    energy_violations = sum(c.total_energy_j > cfg.energy_cap_j for c in costs)
    reward = (
        float(ll.sum())
        - cfg.penalty_delay * delay_violations
        - cfg.penalty_energy * energy_violations
    )
    return reward, costs, tuple(float(x) for x in ll)


def evaluate_assignment(
    assignments,
    cfg: ScenarioConfig,
    channel: ChannelState,
    rng: np.random.Generator,
    samples: int,
    catalog: tuple[EncoderSpec, ...],
    prototypes: tuple[PrototypeSet, ...],
) -> float:
    """Monte Carlo expected terminal reward of a joint assignment.

    The channel (hence the delay/energy penalties) is held fixed; only the
    semantic noise is resampled.  With samples=1 this consumes the rng
    exactly like a terminal step() call, so both produce the same reward
    for the same generator state.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    _validate_assignment(assignments, cfg)
    costs = assignment_costs(assignments, channel, cfg, catalog)
    penalty = cfg.penalty_delay * sum(c.total_delay_s > cfg.delay_cap_s for c in costs)
    penalty += cfg.penalty_energy * sum(c.total_energy_j > cfg.energy_cap_j for c in costs)
    ll = episode_log_likelihoods(assignments, channel, cfg, catalog, prototypes, rng, samples)
    return float(ll.sum(axis=1).mean() - penalty)


class AssignmentEnv:
    """Stateful episode driver over the pure helpers above.

    Randomness is split into named streams keyed by the seed: "channel"
    feeds reset() draws, "noise" feeds terminal-step semantic sampling,
    and "task" builds the per-encoder prototype sets once at construction.
    With fixed_channel=True a single channel realization is drawn up front
    and reused by every reset, which turns the environment into a static
    assignment problem (used for oracle comparisons).
    """

    def __init__(
        self,
        cfg: ScenarioConfig,
        seed: int = 0,
        catalog: tuple[EncoderSpec, ...] | None = None,
        fixed_channel: bool = False,
    ):
        self.cfg = cfg
        self.catalog = default_catalog() if catalog is None else tuple(catalog)
        validate_catalog(self.catalog)
        self._rng_channel = stream_rng(seed, "channel")
        self._rng_noise = stream_rng(seed, "noise")
        task_rng = stream_rng(seed, "task")
        self.prototypes = tuple(
            make_prototypes(spec, cfg.num_classes, task_rng) for spec in self.catalog
        )
        self._fixed = self._draw_channel() if fixed_channel else None
        self.state: EpisodeState | None = None

    @property
    def num_actions(self) -> int:
        return NUM_ENCODERS * self.cfg.rbs

    def _draw_channel(self) -> tuple[ChannelState, np.ndarray]:
        channel = sample_channel(self.cfg, self._rng_channel)
        angle = self._rng_channel.uniform(0.0, 2.0 * np.pi, size=self.cfg.users)
        positions = channel.distances_m[:, None] * np.stack(
            [np.cos(angle), np.sin(angle)], axis=1
        )
        return channel, positions

    def reset(self) -> EpisodeState:
        channel, positions = self._fixed if self._fixed is not None else self._draw_channel()
        self.state = EpisodeState(
            channel=channel,
            positions_m=positions,
            rb_used=(0,) * self.cfg.rbs,
            t=1,
            assignments=(),
        )
        return self.state

    def action_mask(self) -> np.ndarray:
        if self.state is None:
            raise RuntimeError("call reset() before action_mask()")
        return action_mask(self.state)

    def encode_state(self, state: EpisodeState | None = None) -> np.ndarray:
        return encode_state(self.state if state is None else state, self.cfg)

    def step(self, action: AssignAction | int) -> StepOutcome:
        state = self.state
        if state is None:
            raise RuntimeError("call reset() before step()")
        if state.done:
            raise RuntimeError("episode finished; call reset()")
        if isinstance(action, (int, np.integer)):
            action = AssignAction.from_flat(int(action), self.cfg.rbs)
        if state.rb_used[action.rb - 1]:
            raise ValueError(f"RB {action.rb} already assigned this episode")

        rb_used = list(state.rb_used)
        rb_used[action.rb - 1] = 1
        next_state = EpisodeState(
            channel=state.channel,
            positions_m=state.positions_m,
            rb_used=tuple(rb_used),
            t=state.t + 1,
            assignments=state.assignments + ((action.encoder, action.rb),),
        )
        self.state = next_state
        terminal = next_state.done
        if not terminal:
            return StepOutcome(next_state, 0.0, False, None, None)
        reward, costs, ll = terminal_reward(
            next_state.assignments,
            state.channel,
            self.cfg,
            self.catalog,
            self.prototypes,
            self._rng_noise,
        )
        return StepOutcome(next_state, reward, True, costs, ll)


def write_episode_trace(path, outcomes: list[StepOutcome], cfg: ScenarioConfig) -> None:
    """Dump one completed episode as CSV, one row per assignment step."""
    last = outcomes[-1]
    if not last.terminal:
        raise ValueError("trace requires a completed episode")
    lines = ["# schema=episode_trace_v1", "step,user,k,q,reward,delay_s,energy_j,delay_ok,energy_ok"]
    for t, out in enumerate(outcomes, start=1):
        k, q = last.state.assignments[t - 1]
        cost = last.costs[t - 1]
        delay_ok = int(cost.total_delay_s <= cfg.delay_cap_s)
        energy_ok = int(cost.total_energy_j <= cfg.energy_cap_j)
        lines.append(
            f"{t},{t},{k},{q},{out.reward!r},{cost.total_delay_s!r},"
            f"{cost.total_energy_j!r},{delay_ok},{energy_ok}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

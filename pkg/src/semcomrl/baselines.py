"""Comparison policies: uniform random, exhaustive oracle, and DQN.

The oracle enumerates every joint (encoder, RB) assignment on small
instances and scores each with a Monte Carlo estimate of the expected
terminal reward under a shared evaluation seed (common random numbers), so
the returned optimum is deterministic and directly comparable to learned
policies evaluated on the same fixed channel.

DQN stands in for an off-policy value-based comparison: a Q-network over
the masked flat action space trained with epsilon-greedy exploration, a
replay buffer, and a periodically synced target network.  It emits the
same learning-curve rows as the policy-gradient trainer.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .env import AssignmentEnv, evaluate_assignment, state_dim
from .netmodel import ChannelState, ScenarioConfig
from .ppo import CurveRow, TrainResult
from .seeding import stream_rng
from .semtask import EncoderSpec, PrototypeSet
from .tinynn import (
    NetworkParameters,
    adam_ascend,
    adam_init,
    add_const,
    backward,
    forward_values,
    gather_rows,
    graph_forward,
    init_network,
    mean_all,
    square,
)

NUM_ENCODERS = 3


@dataclass(frozen=True)
class JointAssignment:
    """One (encoder, RB) pair per user; RBs pairwise distinct."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(k), int(q)) for k, q in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        rbs = [q for _, q in pairs]
        if len(set(rbs)) != len(rbs):
            raise ValueError("each RB may serve at most one user")
        for k, q in pairs:
            if not 0 <= k < NUM_ENCODERS:
                raise ValueError(f"encoder index {k} outside [0, {NUM_ENCODERS})")
            if q < 1:
                raise ValueError("RB indices are 1-based")

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


def random_policy(_state, mask: np.ndarray, rng: np.random.Generator) -> int:
    """Uniform draw over the unmasked flat action ids."""
    valid = np.flatnonzero(np.asarray(mask, dtype=bool))
    if valid.size == 0:
        raise ValueError("all actions masked")
    return int(valid[rng.integers(valid.size)])


def enumerate_assignments(users: int, rbs: int):
    """All joint assignments in lexicographic order of their pair tuples."""
    per_user = [(k, q) for k in range(NUM_ENCODERS) for q in range(1, rbs + 1)]
    for combo in itertools.product(per_user, repeat=users):
        if len({q for _, q in combo}) == users:
            yield JointAssignment(combo)


def assignment_count(users: int, rbs: int) -> int:
    """K^U * Q! / (Q - U)! candidates."""
    return NUM_ENCODERS**users * math.perm(rbs, users)


def oracle_search(
    channel: ChannelState,
    cfg: ScenarioConfig,
    samples: int,
    rng: np.random.Generator,
    catalog: tuple[EncoderSpec, ...],
    prototypes: tuple[PrototypeSet, ...],
    cap: int = 10**6,
) -> tuple[JointAssignment, float]:
    """Brute-force maximizer of the expected terminal reward.

    Every candidate is evaluated with a generator reseeded from the same
    evaluation seed, so all candidates see identical label sequences and
    the argmax is reproducible.  Ties break to the lexicographically
    smallest assignment.
    """
    n = assignment_count(cfg.users, cfg.rbs)
    if n > cap:
        raise ValueError(f"{n} candidates exceed the enumeration cap {cap}")
    eval_seed = int(rng.integers(2**63))
    best, best_value = None, -np.inf
    for assign in enumerate_assignments(cfg.users, cfg.rbs):
        value = evaluate_assignment(
            assign,
            cfg,
            channel,
            np.random.default_rng(eval_seed),
            samples,
            catalog,
            prototypes,
        )
        if value > best_value or (value == best_value and best is not None and assign.pairs < best.pairs):
            best, best_value = assign, value
    return best, best_value


# ---------------------------------------------------------------------------
# DQN

@dataclass(frozen=True)
class DQNConfig:
    iterations: int = 500
    episodes_per_iteration: int = 64
    replay_capacity: int = 10_000
    batch_size: int = 64
    learning_rate: float = 1e-3
    epsilon_start: float = 1.0
    epsilon_final: float = 0.05
    target_sync_every: int = 200     # gradient updates between target copies
    discount: float = 1.0
    hidden_sizes: tuple[int, ...] = (128, 128)

    def __post_init__(self):
        for name in (
            "iterations", "episodes_per_iteration", "replay_capacity",
            "batch_size", "learning_rate", "target_sync_every",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 <= self.epsilon_final <= self.epsilon_start <= 1:
            raise ValueError("need 0 <= epsilon_final <= epsilon_start <= 1")
        if not 0 <= self.discount <= 1:
            raise ValueError("discount must be in [0, 1]")


def greedy_policy(params: NetworkParameters):
    """Policy callable picking the highest-value unmasked action."""

    def act(state, mask, _rng):
        q = forward_values(params, state)
        q = np.where(np.asarray(mask, dtype=bool), q, -np.inf)
        return int(np.argmax(q))

    return act


def epsilon_greedy(params: NetworkParameters, epsilon: float):
    """Mix of random_policy and greedy_policy with exploration rate epsilon."""
    greedy = greedy_policy(params)

    def act(state, mask, rng):
        if rng.random() < epsilon:
            return random_policy(state, mask, rng)
        return greedy(state, mask, rng)

    return act


def q_regression_update(
    params: NetworkParameters,
    adam_state,
    states: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    learning_rate: float,
) -> tuple[NetworkParameters, float]:
    """One adaptive-moment step down the squared TD error; returns the loss."""
    logits, leaves = graph_forward(params, states)
    picked = gather_rows(logits, actions)
    loss = mean_all(square(add_const(picked, -targets)))
    backward(loss)
    grads = [-leaf.grad for leaf in leaves]    # descend = ascend on -loss
    new_params = adam_ascend(params, grads, adam_state, learning_rate)
    return new_params, float(loss.value)


class _Replay:
    """Fixed-capacity ring buffer of transitions with O(1) random access."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: list = []
        self._pos = 0

    def push(self, item) -> None:
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            self.items[self._pos] = item
            self._pos = (self._pos + 1) % self.capacity

    def __len__(self):
        return len(self.items)


def dqn_train(env: AssignmentEnv, cfg: DQNConfig, seed: int = 0) -> TrainResult:
    """Q-learning over episodes; one gradient update per environment step.

    Epsilon anneals linearly from epsilon_start to epsilon_final across the
    first half of all planned episodes, then stays at the floor.  The
    target network is a frozen copy refreshed every target_sync_every
    updates.  Terminal transitions bootstrap with zero successor value.
    """
    rng_policy = stream_rng(seed, "policy")
    rng_explore = stream_rng(seed, "explore")
    dims = (state_dim(env.cfg), *cfg.hidden_sizes, env.num_actions)
    params = init_network(dims, rng_policy)
    target = params.copy()
    adam_state = adam_init(params)
    replay = _Replay(cfg.replay_capacity)
    updates = 0
    total_episodes = cfg.iterations * cfg.episodes_per_iteration
    anneal_span = max(1, total_episodes // 2)
    episodes_done = 0
    curve: list[CurveRow] = []
    zero_state = np.zeros(state_dim(env.cfg))
    all_free = np.ones(env.cfg.rbs, dtype=bool)

    for iteration in range(1, cfg.iterations + 1):
        t0 = time.perf_counter()
        rewards, dv, ev = [], 0, 0
        for _ in range(cfg.episodes_per_iteration):
            frac = min(1.0, episodes_done / anneal_span)
            epsilon = cfg.epsilon_start + frac * (cfg.epsilon_final - cfg.epsilon_start)
            behave = epsilon_greedy(params, epsilon)
            env.reset()
            for _ in range(env.cfg.users):
                state = env.encode_state()
                mask = env.action_mask()
                action = behave(state, mask, rng_explore)
                outcome = env.step(action)
                done = outcome.terminal
                # Terminal rows keep placeholder successors; their value is
                # gated out of the target by the done flag.
                next_state = zero_state if done else env.encode_state(outcome.state)
                next_free = all_free if done else np.array(outcome.state.rb_used) == 0
                replay.push((state, action, outcome.reward, next_state, next_free, done))
                if len(replay) >= cfg.batch_size:
                    idx = rng_explore.integers(len(replay), size=cfg.batch_size)
                    batch = [replay.items[i] for i in idx]
                    ns = np.array([b[3] for b in batch])
                    nmask = np.tile(np.array([b[4] for b in batch]), (1, NUM_ENCODERS))
                    qn = forward_values(target, ns)
                    best_next = np.where(nmask, qn, -np.inf).max(axis=1)
                    live = ~np.array([b[5] for b in batch])
                    targets = np.array([b[2] for b in batch]) + cfg.discount * live * best_next
                    states_b = np.array([b[0] for b in batch])
                    actions_b = np.array([b[1] for b in batch], dtype=int)
                    params, _ = q_regression_update(
                        params, adam_state, states_b, actions_b, targets, cfg.learning_rate
                    )
                    updates += 1
                    if updates % cfg.target_sync_every == 0:
                        target = params.copy()
            rewards.append(outcome.reward)
            dv += sum(c.total_delay_s > env.cfg.delay_cap_s for c in outcome.costs)
            ev += sum(c.total_energy_j > env.cfg.energy_cap_j for c in outcome.costs)
            episodes_done += 1
        curve.append(
            CurveRow(
                iteration=iteration,
                mean_reward=float(np.mean(rewards)),
                mean_kl=0.0,
                penalty=0.0,
                delay_violations=dv,
                energy_violations=ev,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
        )
    return TrainResult(params=params, curve=curve, converged_at=None)


def random_rollouts(env: AssignmentEnv, iterations: int, episodes: int, seed: int = 0) -> TrainResult:
    """Uniform-random policy scored in the same curve format as trainers."""
    rng = stream_rng(seed, "explore")
    curve: list[CurveRow] = []
    for iteration in range(1, iterations + 1):
        rewards, dv, ev = [], 0, 0
        for _ in range(episodes):
            env.reset()
            for _ in range(env.cfg.users):
                outcome = env.step(random_policy(None, env.action_mask(), rng))
            rewards.append(outcome.reward)
            dv += sum(c.total_delay_s > env.cfg.delay_cap_s for c in outcome.costs)
            ev += sum(c.total_energy_j > env.cfg.energy_cap_j for c in outcome.costs)
        curve.append(
            CurveRow(iteration, float(np.mean(rewards)), 0.0, 0.0, dv, ev, None)
        )
    return TrainResult(params=None, curve=curve, converged_at=None)

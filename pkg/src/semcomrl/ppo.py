"""Policy-gradient training over the assignment environment.

Each training iteration collects a batch of full episodes under a frozen
snapshot theta*, then runs several ascent epochs on the importance-weighted
surrogate

    A(theta) = mean_w [ R_w * prod_t pi_theta(a_t|s_t) / pi_theta*(a_t|s_t) ]

with the per-trajectory ratio computed in log space (episodes are short,
terminal-only reward, no discounting).  Two objective variants:

    kl_penalty (default):  J = A(theta) - lambda * mean_s KL(pi*, pi_theta)
    clipped:               J = mean_w min(r_w R_w, clip(r_w, 1-eps, 1+eps) R_w)

After the inner epochs the batch-average KL between the old and new policy
is measured and the penalty coefficient adapts: multiplied by `factor` when
KL overshoots 1.5x the target, divided when it undershoots target/1.5.

The scalar `surrogate`/`objective` functions are independent plain-numpy
evaluations; training gradients come from the tinynn graph.  Keeping the
two routes separate lets finite differences of the former validate the
latter.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .env import AssignmentEnv, state_dim
from .seeding import stream_rng
from .tinynn import (
    NetworkParameters,
    Tensor,
    add_const,
    ascend,
    adam_ascend,
    adam_init,
    backward,
    clip_op,
    exp_op,
    forward_values,
    gather_rows,
    graph_forward,
    init_network,
    masked_log_softmax,
    mean_all,
    minimum_op,
    mul_const,
    policy_forward,
    reshape,
    sub,
    sum_axis,
)

OBJECTIVE_VARIANTS = ("kl_penalty", "clipped")


@dataclass(frozen=True)
class Trajectory:
    """One complete episode under the collection policy."""

    states: np.ndarray        # (U, state_dim) encoded states
    masks: np.ndarray         # (U, num_actions) action validity
    actions: np.ndarray       # (U,) flat action ids
    log_probs: np.ndarray     # (U,) log pi_theta*(a_t | s_t)
    reward: float             # terminal reward
    delay_violations: int = 0
    energy_violations: int = 0

    def __post_init__(self):
        u = self.states.shape[0]
        if not (self.masks.shape[0] == self.actions.shape[0] == self.log_probs.shape[0] == u):
            raise ValueError("trajectory fields disagree on episode length")
        if not np.isfinite(self.log_probs).all():
            raise ValueError("stored log-probs must be finite")


@dataclass(frozen=True)
class PPOConfig:
    trajectories_per_iteration: int = 64
    inner_epochs: int = 10
    learning_rate: float = 3e-3
    initial_penalty: float = 1.0     # lambda
    kl_target: float = 0.01          # tau
    penalty_factor: float = 2.0
    max_iterations: int = 500
    objective: str = "kl_penalty"
    clip_ratio: float = 0.2
    hidden_sizes: tuple[int, ...] = (128, 128)
    optimizer: str = "sgd"           # "sgd" (plain ascent) or "adam"
    convergence_window: int = 20
    convergence_tol: float = 1e-3
    stop_on_convergence: bool = True

    def __post_init__(self):
        positive = (
            ("trajectories_per_iteration", self.trajectories_per_iteration),
            ("inner_epochs", self.inner_epochs),
            ("learning_rate", self.learning_rate),
            ("initial_penalty", self.initial_penalty),
            ("kl_target", self.kl_target),
            ("max_iterations", self.max_iterations),
            ("convergence_window", self.convergence_window),
            ("convergence_tol", self.convergence_tol),
        )
        for name, v in positive:
            if not v > 0:
                raise ValueError(f"{name} must be > 0")
        if self.penalty_factor < 1:
            raise ValueError("penalty_factor must be >= 1")
        if not 0 < self.clip_ratio < 1:
            raise ValueError("clip_ratio must be in (0, 1)")
        if self.objective not in OBJECTIVE_VARIANTS:
            raise ValueError(f"objective must be one of {OBJECTIVE_VARIANTS}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")


@dataclass(frozen=True)
class CurveRow:
    iteration: int
    mean_reward: float
    mean_kl: float
    penalty: float
    delay_violations: int
    energy_violations: int
    wall_ms: float | None = None


@dataclass
class TrainResult:
    params: NetworkParameters
    curve: list[CurveRow]
    converged_at: int | None


def stochastic_policy(params: NetworkParameters):
    """Policy callable (state, mask, rng) -> sampled flat action id."""

    def act(state, mask, rng):
        return policy_forward(params, state, mask).sample(rng)

    return act


def collect(
    params: NetworkParameters, env: AssignmentEnv, n: int, rng: np.random.Generator
) -> list[Trajectory]:
    """Sample n full episodes under a frozen policy, masks honored."""
    if n < 1:
        raise ValueError("need at least one trajectory")
    trajectories = []
    for _ in range(n):
        env.reset()
        states, masks, actions, logps = [], [], [], []
        outcome = None
        for _ in range(env.cfg.users):
            enc = env.encode_state()
            mask = env.action_mask()
            dist = policy_forward(params, enc, mask)
            action = dist.sample(rng)
            states.append(enc)
            masks.append(mask)
            actions.append(action)
            logps.append(dist.log_prob(action))
            outcome = env.step(action)
        costs = outcome.costs
        trajectories.append(
            Trajectory(
                states=np.array(states),
                masks=np.array(masks),
                actions=np.array(actions, dtype=int),
                log_probs=np.array(logps),
                reward=outcome.reward,
                delay_violations=sum(
                    c.total_delay_s > env.cfg.delay_cap_s for c in costs
                ),
                energy_violations=sum(
                    c.total_energy_j > env.cfg.energy_cap_j for c in costs
                ),
            )
        )
    return trajectories


# ---------------------------------------------------------------------------
# stacked batch arrays

@dataclass
class _Batch:
    states: np.ndarray       # (n*U, D)
    masks: np.ndarray        # (n*U, A)
    actions: np.ndarray      # (n*U,)
    old_log_probs: np.ndarray  # (n*U,)
    rewards: np.ndarray      # (n,)
    episodes: int
    steps: int               # U


def _stack(batch: list[Trajectory]) -> _Batch:
    if not batch:
        raise ValueError("batch must be non-empty")
    u = batch[0].states.shape[0]
    if any(t.states.shape[0] != u for t in batch):
        raise ValueError("all trajectories must have equal length")
    return _Batch(
        states=np.concatenate([t.states for t in batch]),
        masks=np.concatenate([t.masks for t in batch]),
        actions=np.concatenate([t.actions for t in batch]),
        old_log_probs=np.concatenate([t.log_probs for t in batch]),
        rewards=np.array([t.reward for t in batch]),
        episodes=len(batch),
        steps=u,
    )


def _masked_log_probs_np(params: NetworkParameters, states, masks) -> np.ndarray:
    """(B, A) log-softmax over unmasked logits; masked entries sentinel 0."""
    logits = np.atleast_2d(forward_values(params, states))
    m = np.asarray(masks, dtype=bool)
    z = np.where(m, logits, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    total = np.exp(z).sum(axis=1, keepdims=True)
    return np.where(m, z - np.log(total), 0.0)


def _old_distribution(old_params: NetworkParameters, b: _Batch):
    """Per-state probabilities and entropy term under the frozen policy."""
    logp = _masked_log_probs_np(old_params, b.states, b.masks)
    probs = np.where(b.masks, np.exp(logp), 0.0)
    plogp = np.where(probs > 0, probs * np.where(b.masks, logp, 0.0), 0.0)
    return probs, plogp.sum(axis=1)    # (B, A), (B,)


def _taken_log_probs_np(params: NetworkParameters, b: _Batch) -> np.ndarray:
    logp = _masked_log_probs_np(params, b.states, b.masks)
    return logp[np.arange(b.states.shape[0]), b.actions]


def _ratios_np(params: NetworkParameters, old_params: NetworkParameters, b: _Batch) -> np.ndarray:
    log_ratio = _taken_log_probs_np(params, b) - _taken_log_probs_np(old_params, b)
    return np.exp(log_ratio.reshape(b.episodes, b.steps).sum(axis=1))


def surrogate(
    params: NetworkParameters, old_params: NetworkParameters, batch: list[Trajectory]
) -> float:
    """Importance-weighted mean terminal reward A(theta), plain numpy."""
    b = _stack(batch)
    return float(np.mean(_ratios_np(params, old_params, b) * b.rewards))


def mean_batch_kl(
    old_params: NetworkParameters, params: NetworkParameters, batch: list[Trajectory]
) -> float:
    """Batch-average per-state KL(pi_old, pi_new)."""
    b = _stack(batch)
    return _mean_kl_np(old_params, params, b)


def _mean_kl_np(old_params, params, b: _Batch) -> float:
    probs_old, ent_old = _old_distribution(old_params, b)
    logp_new = _masked_log_probs_np(params, b.states, b.masks)
    cross = (probs_old * np.where(b.masks, logp_new, 0.0)).sum(axis=1)
    return float(np.mean(ent_old - cross))


def objective(
    params: NetworkParameters,
    old_params: NetworkParameters,
    batch: list[Trajectory],
    penalty: float,
    variant: str = "kl_penalty",
    clip_ratio: float = 0.2,
) -> float:
    """Scalar training objective J(theta), plain numpy (no graph)."""
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    b = _stack(batch)
    ratios = _ratios_np(params, old_params, b)
    if variant == "clipped":
        clipped = np.clip(ratios, 1.0 - clip_ratio, 1.0 + clip_ratio)
        return float(np.mean(np.minimum(ratios * b.rewards, clipped * b.rewards)))
    if variant != "kl_penalty":
        raise ValueError(f"objective must be one of {OBJECTIVE_VARIANTS}")
    return float(np.mean(ratios * b.rewards)) - penalty * _mean_kl_np(
        old_params, params, b
    )


def objective_graph(
    params: NetworkParameters,
    b: _Batch,
    old_probs: np.ndarray,
    old_entropy: np.ndarray,
    penalty: float,
    variant: str,
    clip_ratio: float,
) -> tuple[Tensor, list[Tensor]]:
    """Taped J(theta) and the parameter leaves, for analytic gradients."""
    logits, leaves = graph_forward(params, b.states)
    logp = masked_log_softmax(logits, b.masks)
    taken = gather_rows(logp, b.actions)
    log_ratio = sum_axis(reshape(add_const(taken, -b.old_log_probs), (b.episodes, b.steps)), 1)
    ratios = exp_op(log_ratio)
    if variant == "clipped":
        raw = mul_const(ratios, b.rewards)
        clipped = mul_const(clip_op(ratios, 1.0 - clip_ratio, 1.0 + clip_ratio), b.rewards)
        return mean_all(minimum_op(raw, clipped)), leaves
    surr = mean_all(mul_const(ratios, b.rewards))
    cross = sum_axis(mul_const(logp, old_probs), 1)
    kl_rows = add_const(mul_const(cross, -1.0), old_entropy)
    return sub(surr, mul_const(mean_all(kl_rows), penalty)), leaves


def adapt_penalty(penalty: float, measured_kl: float, target: float, factor: float) -> float:
    """Double outside the trust band, halve inside, hold in the dead zone."""
    if penalty <= 0 or target <= 0 or factor < 1:
        raise ValueError("penalty and target must be > 0, factor >= 1")
    if measured_kl < 0:
        raise ValueError("measured KL must be >= 0")
    if measured_kl > 1.5 * target:
        return penalty * factor
    if measured_kl < target / 1.5:
        return penalty / factor
    return penalty


def moving_average(values, window: int) -> np.ndarray:
    """Trailing window means; entry i averages values[i-window+1 .. i]."""
    v = np.asarray(values, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    out = np.empty_like(v)
    c = np.concatenate([[0.0], np.cumsum(v)])
    for i in range(v.size):
        lo = max(0, i - window + 1)
        out[i] = (c[i + 1] - c[lo]) / (i + 1 - lo)
    return out


def _converged(rewards: list[float], window: int, tol: float) -> bool:
    """Relative change of the trailing moving average over one window."""
    if len(rewards) < 2 * window:
        return False
    ma = moving_average(rewards, window)
    prev, cur = ma[-1 - window], ma[-1]
    return abs(cur - prev) / max(abs(prev), 1e-12) < tol


def train(env: AssignmentEnv, cfg: PPOConfig, seed: int = 0) -> TrainResult:
    """Iterate collect -> inner ascent epochs -> penalty adaptation.

    Policy initialization draws from the "policy" stream and action
    sampling from the "explore" stream of the given seed, so the learning
    run never perturbs the environment's channel/noise streams.
    """
    rng_policy = stream_rng(seed, "policy")
    rng_explore = stream_rng(seed, "explore")
    dims = (state_dim(env.cfg), *cfg.hidden_sizes, env.num_actions)
    params = init_network(dims, rng_policy)
    adam_state = adam_init(params) if cfg.optimizer == "adam" else None
    penalty = cfg.initial_penalty
    curve: list[CurveRow] = []
    rewards_hist: list[float] = []
    converged_at = None

    for iteration in range(1, cfg.max_iterations + 1):
        t0 = time.perf_counter()
        batch = collect(params, env, cfg.trajectories_per_iteration, rng_explore)
        b = _stack(batch)
        old_probs, old_entropy = _old_distribution(params, b)
        theta = params
        for _ in range(cfg.inner_epochs):
            j, leaves = objective_graph(
                theta, b, old_probs, old_entropy, penalty, cfg.objective, cfg.clip_ratio
            )
            if not np.isfinite(j.value):
                raise FloatingPointError(
                    f"objective diverged at iteration {iteration}: J = {j.value}"
                )
            backward(j)
            grads = [leaf.grad for leaf in leaves]
            if adam_state is not None:
                theta = adam_ascend(theta, grads, adam_state, cfg.learning_rate)
            else:
                theta = ascend(theta, grads, cfg.learning_rate)
        kl = _mean_kl_np(params, theta, b)
        params = theta
        mean_reward = float(b.rewards.mean())
        rewards_hist.append(mean_reward)
        curve.append(
            CurveRow(
                iteration=iteration,
                mean_reward=mean_reward,
                mean_kl=kl,
                penalty=penalty,
                delay_violations=sum(t.delay_violations for t in batch),
                energy_violations=sum(t.energy_violations for t in batch),
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
        )
        penalty = adapt_penalty(penalty, kl, cfg.kl_target, cfg.penalty_factor)
        if converged_at is None and _converged(
            rewards_hist, cfg.convergence_window, cfg.convergence_tol
        ):
            converged_at = iteration
            if cfg.stop_on_convergence:
                break
    return TrainResult(params=params, curve=curve, converged_at=converged_at)


def write_learning_curve(path, rows: list[CurveRow], include_timing: bool = False) -> None:
    """Versioned CSV; wall_ms stays empty unless timing is requested, so
    identical runs produce byte-identical files."""
    lines = [
        "# schema=learning_curve_v1",
        "iteration,mean_reward,mean_kl,lambda,delay_violations,energy_violations,wall_ms",
    ]
    for r in rows:
        wall = repr(r.wall_ms) if include_timing and r.wall_ms is not None else ""
        lines.append(
            f"{r.iteration},{r.mean_reward!r},{r.mean_kl!r},{r.penalty!r},"
            f"{r.delay_violations},{r.energy_violations},{wall}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def convergence_iteration(rewards, window: int = 20) -> int | None:
    """First iteration whose trailing moving average is within 5% of the
    final moving average (in magnitude; rewards here are <= 0)."""
    v = np.asarray(rewards, dtype=float)
    if v.size == 0:
        return None
    ma = moving_average(v, window)
    final = ma[-1]
    threshold = 0.95 * final if final >= 0 else 1.05 * final
    hits = np.nonzero(ma >= threshold)[0]
    return int(hits[0]) + 1 if hits.size else None

"""Semantic-communication network simulator with RL-based assignment.

A base station must pick, for each user, a semantic encoder model (three
sizes, trading payload/compute cost against noise robustness) and an OFDMA
resource block (trading interference).  The package provides the channel
and cost models, a synthetic classification task whose accuracy depends on
the allocated SINR, a sequential assignment environment with terminal
cross-entropy-minus-penalty reward, a from-scratch policy-gradient trainer
with a KL trust region, value/random/exhaustive baselines, and a seeded
experiment CLI emitting deterministic CSV artifacts.
"""

from .baselines import (
    DQNConfig,
    JointAssignment,
    dqn_train,
    enumerate_assignments,
    greedy_policy,
    oracle_search,
    random_policy,
    random_rollouts,
)
from .config_io import ALGORITHMS, ExperimentSpec, load_config, parse_config, serialize_config
from .costmodel import (
    CostBreakdown,
    bs_energy,
    cost_breakdown,
    extraction_delay,
    feasibility,
    total_delay,
    transmission_delay,
    user_compute_delay,
    user_energy,
)
from .env import (
    AssignAction,
    AssignmentEnv,
    EpisodeState,
    StepOutcome,
    action_mask,
    encode_state,
    episode_log_likelihoods,
    evaluate_assignment,
    state_dim,
    terminal_reward,
    write_episode_trace,
)
from .netmodel import (
    ChannelState,
    RBAllocation,
    ScenarioConfig,
    channel_gain,
    rb_sinr,
    sample_channel,
    transmission_rate,
)
from .ppo import (
    CurveRow,
    PPOConfig,
    Trajectory,
    TrainResult,
    adapt_penalty,
    collect,
    convergence_iteration,
    mean_batch_kl,
    moving_average,
    objective,
    stochastic_policy,
    surrogate,
    train,
    write_learning_curve,
)
from .seeding import STREAM_NAMES, stream_rng
from .semtask import (
    EncoderSpec,
    PrototypeSet,
    accuracy_profile,
    channel_perturb,
    class_probabilities,
    classify,
    cosine_similarity,
    default_catalog,
    encode,
    make_prototypes,
    similarities,
    validate_catalog,
)
from .tinynn import (
    AffineLayer,
    Categorical,
    NetworkParameters,
    adam_ascend,
    adam_init,
    ascend,
    backward,
    forward_values,
    graph_forward,
    init_network,
    kl_divergence,
    load_network,
    policy_forward,
    save_network,
)

__all__ = [name for name in dir() if not name.startswith("_")]

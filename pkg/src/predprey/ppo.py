"""Clipped-surrogate actor-critic learner.

Rollouts are collected from one shared policy across N independent worlds
(every prey is a separate experience stream), advantages come from
exponentially-weighted temporal-difference residuals truncated at the
collection horizon, and updates run num_epoch shuffled passes of
batch_size minibatches over the full buffer. The stored behaviour
log-probabilities are never recomputed, so the post-update policy becomes
the next cycle's behaviour policy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import net as nets
from .errors import ContractViolation, InputError, NumericsError, StructuralError
from .net import AdamState, DenseNet
from .world import WorldState, observation_matrix, observe_all, step

ADVANTAGE_NORM_EPS = 1e-8


@dataclass
class PpoHyperparams:
    batch_size: int = 1024
    buffer_size: int = 10240
    epsilon: float = 0.2
    beta: float = 1.0e-2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    num_epoch: int = 3
    time_horizon: int = 64
    learning_rate: float = 3.0e-4
    max_steps: int = 1_000_000
    value_loss_coeff: float = 0.5
    summary_freq: int = 10_000

    def __post_init__(self) -> None:
        if self.buffer_size % self.batch_size != 0:
            raise StructuralError(
                f"batch_size {self.batch_size} must divide buffer_size {self.buffer_size}"
            )
        recommended = {
            "epsilon": (self.epsilon, 0.1, 0.3),
            "gae_lambda": (self.gae_lambda, 0.9, 0.95),
            "gamma": (self.gamma, 0.8, 0.995),
        }
        for name, (value, lo, hi) in recommended.items():
            if not lo <= value <= hi:
                warnings.warn(
                    f"{name}={value} outside recommended range [{lo}, {hi}]",
                    stacklevel=2,
                )


@dataclass
class AdvantageEstimates:
    advantages: np.ndarray
    returns: np.ndarray


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    boundaries: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> AdvantageEstimates:
    """Backward recursion over one stream.

    delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t), with
    V(s_{t+1}) = bootstrap_value past the last index; the advantage is the
    (gamma * lam)-discounted sum of deltas, cut at episode boundaries.
    Returns are advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    boundaries = np.asarray(boundaries, dtype=bool)
    if not (rewards.shape == values.shape == boundaries.shape) or rewards.ndim != 1:
        raise StructuralError(
            f"misaligned sequences: rewards {rewards.shape}, values {values.shape}, "
            f"boundaries {boundaries.shape}"
        )
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise InputError(f"gamma={gamma} and lam={lam} must lie in [0, 1]")

    n = len(rewards)
    advantages = np.zeros(n)
    next_value = float(bootstrap_value)
    next_advantage = 0.0
    for t in range(n - 1, -1, -1):
        live = 0.0 if boundaries[t] else 1.0
        delta = rewards[t] + gamma * next_value * live - values[t]
        next_advantage = delta + gamma * lam * live * next_advantage
        advantages[t] = next_advantage
        next_value = values[t]
    return AdvantageEstimates(advantages=advantages, returns=advantages + values)


def probability_ratio(
    net: DenseNet, obs: np.ndarray, action: int, log_prob_old: float
) -> float:
    """exp(log pi(a|s) under the current net minus the stored behaviour log-prob)."""
    if not np.isfinite(log_prob_old):
        raise InputError(f"log_prob_old must be finite, got {log_prob_old}")
    logits, _ = nets.forward(net, obs)
    logp = nets.log_softmax(logits)[action]
    return float(np.exp(logp - log_prob_old))


def clipped_surrogate(r, advantage, epsilon: float):
    """Pessimistic objective: min(r * A, clip(r, 1-eps, 1+eps) * A). Elementwise."""
    if not 0.0 < epsilon < 1.0:
        raise InputError(f"epsilon must be in (0, 1), got {epsilon}")
    r = np.asarray(r, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    out = np.minimum(r * advantage, np.clip(r, 1.0 - epsilon, 1.0 + epsilon) * advantage)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# rollout storage


class RolloutBuffer:
    """Columnar store of transitions, appended one (stream, horizon) chunk at a time."""

    FIELDS = ("obs", "actions", "log_prob_old", "rewards", "values", "boundaries", "advantages", "returns")

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._chunks: dict[str, list[np.ndarray]] = {f: [] for f in self.FIELDS}
        self._size = 0

    @property
    def size(self) -> int:
        return self._size

    def is_full(self) -> bool:
        return self._size >= self.capacity

    def append_chunk(self, **arrays: np.ndarray) -> None:
        if set(arrays) != set(self.FIELDS):
            raise StructuralError(f"chunk must provide exactly {self.FIELDS}")
        n = len(arrays["actions"])
        if any(len(arrays[f]) != n for f in self.FIELDS):
            raise StructuralError("chunk arrays have mismatched lengths")
        for f in self.FIELDS:
            self._chunks[f].append(np.asarray(arrays[f]))
        self._size += n

    def stacked(self) -> dict[str, np.ndarray]:
        return {f: np.concatenate(self._chunks[f]) for f in self.FIELDS}

    def clear(self) -> None:
        self._chunks = {f: [] for f in self.FIELDS}
        self._size = 0


@dataclass(eq=False)
class ActorWorld:
    """One world plus the cached observations the policy acts on."""

    state: WorldState
    obs: np.ndarray  # (n_prey, obs_dim)
    episode_return: np.ndarray
    completed_episode_returns: list[float] = field(default_factory=list)

    @classmethod
    def from_state(cls, state: WorldState) -> "ActorWorld":
        return cls(
            state=state,
            obs=observation_matrix(observe_all(state)),
            episode_return=np.zeros(len(state.prey)),
        )

    def finish_episode(self) -> None:
        self.completed_episode_returns.extend(float(r) for r in self.episode_return)
        self.episode_return[:] = 0.0


def sample_actions(
    net: DenseNet, obs_matrix: np.ndarray, rng: np.random.Generator, greedy: bool = False
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw one action per row; returns (actions, log_probs, values)."""
    logits, values = nets.forward(net, obs_matrix)
    logp = nets.log_softmax(logits)
    if greedy:
        actions = logits.argmax(axis=1)
    else:
        u = rng.random(len(obs_matrix))
        cdf = np.cumsum(np.exp(logp), axis=1)
        actions = (u[:, None] > cdf).sum(axis=1)
        actions = np.minimum(actions, logits.shape[1] - 1)
    rows = np.arange(len(obs_matrix))
    return actions, logp[rows, actions], values


def collect_rollout(
    net: DenseNet,
    actors: list[ActorWorld],
    T: int,
    hp: PpoHyperparams,
    rng: np.random.Generator,
    buffer: RolloutBuffer | None = None,
    reset_fn=None,
) -> RolloutBuffer:
    """One sweep: T ticks in every world, one chunk appended per prey stream.

    Chunks are horizon-truncated: the value of the state after the last tick
    bootstraps the advantage recursion unless an episode boundary cut it.
    reset_fn(actor_index) -> WorldState is invoked when a world's tick count
    reaches its configured episode_length; passing None disables resets.
    """
    if buffer is None:
        buffer = RolloutBuffer(hp.buffer_size)
    for a_idx, actor in enumerate(actors):
        n_prey = len(actor.state.prey)
        obs_seq = np.empty((T, n_prey, actor.obs.shape[1]))
        act_seq = np.empty((T, n_prey), dtype=np.int64)
        logp_seq = np.empty((T, n_prey))
        rew_seq = np.empty((T, n_prey))
        val_seq = np.empty((T, n_prey))
        bound_seq = np.zeros((T, n_prey), dtype=bool)

        for t in range(T):
            obs_seq[t] = actor.obs
            actions, logp, values = sample_actions(net, actor.obs, rng)
            act_seq[t] = actions
            logp_seq[t] = logp
            val_seq[t] = values
            _, rewards, observations, _ = step(actor.state, actions)
            rew_seq[t] = rewards
            actor.episode_return += rewards
            actor.obs = observation_matrix(observations)
            if reset_fn is not None and actor.state.tick >= actor.state.config.episode_length:
                bound_seq[t] = True
                actor.finish_episode()
                actor.state = reset_fn(a_idx)
                actor.obs = observation_matrix(observe_all(actor.state))

        _, bootstrap = nets.forward(net, actor.obs)
        for i in range(n_prey):
            est = compute_gae(
                rew_seq[:, i],
                val_seq[:, i],
                bound_seq[:, i],
                float(bootstrap[i]),
                hp.gamma,
                hp.gae_lambda,
            )
            buffer.append_chunk(
                obs=obs_seq[:, i, :],
                actions=act_seq[:, i],
                log_prob_old=logp_seq[:, i],
                rewards=rew_seq[:, i],
                values=val_seq[:, i],
                boundaries=bound_seq[:, i],
                advantages=est.advantages,
                returns=est.returns,
            )
    return buffer


# ---------------------------------------------------------------------------
# loss and update


def ppo_loss_and_grads(
    net: DenseNet,
    obs: np.ndarray,
    actions: np.ndarray,
    log_prob_old: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    epsilon: float,
    beta: float,
    value_loss_coeff: float,
) -> tuple[float, dict[str, float], list[np.ndarray]]:
    """Total loss over one minibatch plus exact parameter gradients.

    loss = -mean(clipped surrogate) + value_loss_coeff * mean((returns - V)^2)
           - beta * mean(entropy)
    """
    n = len(obs)
    logits, values = nets.forward(net, obs)
    logp_all = nets.log_softmax(logits)
    probs = np.exp(logp_all)
    rows = np.arange(n)
    logp = logp_all[rows, actions]
    ratio = np.exp(logp - log_prob_old)

    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantages
    surrogate = np.minimum(unclipped, clipped)
    policy_loss = -float(surrogate.mean())

    value_err = returns - values
    value_loss = float((value_err**2).mean())
    entropy = -(probs * logp_all).sum(axis=1)
    entropy_mean = float(entropy.mean())

    total = policy_loss + value_loss_coeff * value_loss - beta * entropy_mean

    # d surrogate / d ratio is the advantage wherever the unclipped branch is
    # active; when the clipped branch wins strictly, the ratio sits in the
    # saturated region and the derivative vanishes.
    active = (unclipped <= clipped).astype(np.float64)
    d_ratio = -(active * advantages) / n
    onehot = np.zeros_like(logits)
    onehot[rows, actions] = 1.0
    d_logits = d_ratio[:, None] * ratio[:, None] * (onehot - probs)
    d_logits += (beta / n) * probs * (logp_all + entropy[:, None])
    d_value = (-2.0 * value_loss_coeff / n) * value_err

    grads = nets.backward(net, obs, d_logits, d_value)
    parts = {
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy_mean,
        "total": total,
    }
    return total, parts, grads


@dataclass
class UpdateStats:
    policy_loss: float  # mean magnitude of the surrogate term across minibatches
    value_loss: float
    entropy: float
    value_estimate_mean: float
    n_minibatch_steps: int
    n_transitions: int


def ppo_update(
    net: DenseNet,
    adam: AdamState,
    buffer: RolloutBuffer,
    hp: PpoHyperparams,
    lr: float,
    rng: np.random.Generator,
) -> UpdateStats:
    """num_epoch shuffled passes of batch_size minibatches over the full buffer.

    Advantages are normalized once across the whole batch. A non-finite loss
    aborts the update, restores the pre-update parameters and optimizer
    moments, and raises NumericsError. The buffer is cleared on success.
    """
    if buffer.size < hp.buffer_size:
        raise ContractViolation(
            f"update requires a full buffer ({buffer.size} < {hp.buffer_size})"
        )
    data = buffer.stacked()
    for name in ("obs", "log_prob_old", "advantages", "returns"):
        if not np.all(np.isfinite(data[name])):
            raise NumericsError(f"buffer field {name!r} contains non-finite values")
    adv = data["advantages"]
    adv = (adv - adv.mean()) / (adv.std() + ADVANTAGE_NORM_EPS)

    params_backup = net.get_flat()
    adam_backup = adam.copy()
    n = buffer.size
    n_batches = n // hp.batch_size
    pol_mags, val_losses, entropies = [], [], []
    try:
        for _ in range(hp.num_epoch):
            order = rng.permutation(n)
            for b in range(n_batches):
                idx = order[b * hp.batch_size : (b + 1) * hp.batch_size]
                total, parts, grads = ppo_loss_and_grads(
                    net,
                    data["obs"][idx],
                    data["actions"][idx],
                    data["log_prob_old"][idx],
                    adv[idx],
                    data["returns"][idx],
                    hp.epsilon,
                    hp.beta,
                    hp.value_loss_coeff,
                )
                if not np.isfinite(total):
                    raise NumericsError(f"non-finite loss {parts}; update aborted")
                nets.adam_step(net, adam, grads, lr)
                pol_mags.append(abs(parts["policy_loss"]))
                val_losses.append(parts["value_loss"])
                entropies.append(parts["entropy"])
        net.validate()  # parameters must stay finite across the whole update
    except NumericsError:
        net.set_flat(params_backup)
        adam.first_moment = adam_backup.first_moment
        adam.second_moment = adam_backup.second_moment
        adam.step_count = adam_backup.step_count
        raise

    stats = UpdateStats(
        policy_loss=float(np.mean(pol_mags)),
        value_loss=float(np.mean(val_losses)),
        entropy=float(np.mean(entropies)),
        value_estimate_mean=float(data["values"].mean()),
        n_minibatch_steps=hp.num_epoch * n_batches,
        n_transitions=n,
    )
    buffer.clear()
    return stats

"""Actor-critic fine-tuning of the token policy on one event cluster.

Each episode samples a summary from the policy, scores prefix rewards,
computes undiscounted suffix-sum returns and critic-baselined advantages,
then takes one AdamW step on each of the actor (ascent on sum of
log-probability times advantage) and the critic (descent on mean squared
error against the returns).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import detokenize
from .embedding import avg_sentence_embedding
from .errors import NumericalError, ValidationError
from .reward import RewardContext, compound_reward
from .summarise import TokenPolicy, policy_init_from_cluster


@dataclass
class Trajectory:
    """One sampled episode; scoring fills in states and rewards.

    All per-step arrays share length T.  token_ids holds vocabulary indices
    (the actions), tokens the corresponding strings.  states[i] embeds the
    prefix through token i; rewards[i] is the reward collected at step i+1;
    returns[i] sums rewards[i:].
    """

    token_ids: tuple[int, ...]
    tokens: tuple[str, ...]
    log_probs: np.ndarray
    states: np.ndarray | None = None
    rewards: np.ndarray | None = None
    returns: np.ndarray | None = None
    advantages: np.ndarray | None = None
    final_breakdown: object = None

    def __len__(self) -> int:
        return len(self.token_ids)


class Critic:
    """Linear value baseline: v(s) = w @ s + b."""

    def __init__(self, dim: int):
        self.weights = np.zeros(dim)
        self.bias = np.zeros(1)

    def predict(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if states.shape[1] != self.weights.shape[0]:
            raise ValidationError(
                f"state dim {states.shape[1]} does not match critic dim {self.weights.shape[0]}"
            )
        return states @ self.weights + self.bias[0]

    def state_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": float(self.bias[0])}

    @classmethod
    def from_state_dict(cls, state: dict) -> "Critic":
        critic = cls(len(state["weights"]))
        critic.weights[:] = state["weights"]
        critic.bias[0] = state["bias"]
        return critic


@dataclass(frozen=True)
class TrainConfig:
    episodes_per_cluster: int = 300
    actor_lr: float = 2e-4
    critic_lr: float = 1e-3
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    max_summary_tokens: int = 48
    reward_stride: int = 1
    delta_shaping: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValidationError("learning rates must be positive")
        if self.episodes_per_cluster < 0:
            raise ValidationError("episode count must be >= 0")
        if self.reward_stride < 1:
            raise ValidationError("reward stride must be >= 1")

    def config_hash(self) -> str:
        payload = json.dumps(
            {k: getattr(self, k) for k in sorted(self.__dataclass_fields__)},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class AdamW:
    """Decoupled-weight-decay Adam over a named set of parameter arrays.

    step() applies a descent step in place, so callers pass negated
    gradients when maximising.
    """

    def __init__(self, params: dict, lr: float, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict) -> None:
        self.t += 1
        for key, grad in grads.items():
            p = self.params[key]
            self.m[key] = self.beta1 * self.m[key] + (1 - self.beta1) * grad
            self.v[key] = self.beta2 * self.v[key] + (1 - self.beta2) * grad * grad
            m_hat = self.m[key] / (1 - self.beta1 ** self.t)
            v_hat = self.v[key] / (1 - self.beta2 ** self.t)
            p -= self.lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p)

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "m": {k: v.tolist() for k, v in self.m.items()},
            "v": {k: v.tolist() for k, v in self.v.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        self.t = state["t"]
        self.m = {k: np.asarray(v, dtype=float) for k, v in state["m"].items()}
        self.v = {k: np.asarray(v, dtype=float) for k, v in state["v"].items()}


def _actor_params(policy: TokenPolicy) -> dict:
    return {"unigram": policy.unigram_logits, "bigram": policy.bigram_logits}


def _critic_params(critic: Critic) -> dict:
    return {"weights": critic.weights, "bias": critic.bias}


def sample_trajectory(policy: TokenPolicy, source: str, cfg: TrainConfig, seed) -> Trajectory:
    """Sample tokens until the end token or the length cap; states and
    rewards stay unfilled.  source is unused by the in-process policy,
    whose vocabulary already comes from the cluster."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ids, log_probs = policy.sample(rng, cfg.max_summary_tokens)
    return Trajectory(
        token_ids=tuple(ids),
        tokens=tuple(policy.decode(ids)),
        log_probs=np.asarray(log_probs, dtype=float),
    )


def score_trajectory(t: Trajectory, context: RewardContext, provider,
                     stride: int = 1, delta_shaping: bool = False) -> Trajectory:
    """Fill states for every prefix and rewards on the stride pattern.

    Rewards land on 1-based steps j with j % stride == 0, plus always the
    final step; other steps score 0.  With delta shaping each scored step
    receives the change in compound reward since the previous scored
    prefix, so the returns telescope to the full-summary reward.
    """
    n = len(t)
    if n == 0:
        raise ValidationError("cannot score an empty trajectory")
    if stride < 1:
        raise ValidationError("stride must be >= 1")
    states = np.zeros((n, provider.dim))
    rewards = np.zeros(n)
    previous_total = 0.0
    final_breakdown = None
    for j in range(1, n + 1):
        prefix = detokenize(t.tokens[:j])
        states[j - 1] = avg_sentence_embedding(prefix, provider)
        if j % stride == 0 or j == n:
            breakdown = compound_reward(prefix, context)
            rewards[j - 1] = (
                breakdown.total - previous_total if delta_shaping else breakdown.total
            )
            previous_total = breakdown.total
            if j == n:
                final_breakdown = breakdown
    return Trajectory(
        token_ids=t.token_ids,
        tokens=t.tokens,
        log_probs=t.log_probs,
        states=states,
        rewards=rewards,
        final_breakdown=final_breakdown,
    )


def compute_returns(rewards) -> np.ndarray:
    """Undiscounted suffix sums; the recurrence G[i] = r[i] + G[i+1] holds
    exactly because each entry is built from the next by one addition."""
    rewards = np.asarray(rewards, dtype=float)
    returns = np.zeros_like(rewards)
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + acc
        returns[i] = acc
    return returns


def compute_advantages(returns, states, critic: Critic) -> np.ndarray:
    returns = np.asarray(returns, dtype=float)
    baseline = critic.predict(states)
    if baseline.shape != returns.shape:
        raise ValidationError("returns and states disagree in length")
    return returns - baseline


def actor_update(policy: TokenPolicy, batch, cfg: TrainConfig,
                 optimizer: AdamW | None = None) -> TokenPolicy:
    """One AdamW ascent step on sum over steps of log pi(a|s) * advantage.

    The policy is updated in place; gradients are the analytic softmax
    score-function form accumulated into the unigram table and the touched
    bigram rows.
    """
    if optimizer is None:
        optimizer = AdamW(_actor_params(policy), cfg.actor_lr, cfg.adam_betas,
                          cfg.adam_eps, cfg.weight_decay)
    grad_unigram = np.zeros_like(policy.unigram_logits)
    grad_bigram = np.zeros_like(policy.bigram_logits)
    for t in batch:
        if t.advantages is None:
            raise ValidationError("trajectory advantages missing; score and baseline first")
        prev = None
        for i, action in enumerate(t.token_ids):
            row = policy.context_row(prev)
            g = policy.grad_log_prob(row, action) * t.advantages[i]
            grad_unigram += g
            grad_bigram[row] += g
            prev = action
    if not (np.all(np.isfinite(grad_unigram)) and np.all(np.isfinite(grad_bigram))):
        raise NumericalError("non-finite actor gradient; aborting batch")
    optimizer.step({"unigram": -grad_unigram, "bigram": -grad_bigram})
    return policy


def critic_update(critic: Critic, batch, cfg: TrainConfig,
                  optimizer: AdamW | None = None) -> Critic:
    """One AdamW descent step on the mean per-trajectory MSE against returns."""
    if optimizer is None:
        optimizer = AdamW(_critic_params(critic), cfg.critic_lr, cfg.adam_betas,
                          cfg.adam_eps, cfg.weight_decay)
    grad_w = np.zeros_like(critic.weights)
    grad_b = np.zeros_like(critic.bias)
    count = 0
    for t in batch:
        if t.returns is None or t.states is None:
            raise ValidationError("trajectory returns missing; compute them first")
        residual = critic.predict(t.states) - t.returns
        grad_w += (2.0 / len(t)) * (t.states.T @ residual)
        grad_b += (2.0 / len(t)) * residual.sum()
        count += 1
    if count == 0:
        return critic
    grad_w /= count
    grad_b /= count
    if not (np.all(np.isfinite(grad_w)) and np.all(np.isfinite(grad_b))):
        raise NumericalError("non-finite critic loss gradient; aborting batch")
    optimizer.step({"weights": grad_w, "bias": grad_b})
    return critic


def episode_seed(root_seed: int, cluster_index: int, episode: int) -> np.random.Generator:
    """All sampling randomness descends from one root seed, split so that
    every (cluster, episode) pair draws an independent, reproducible stream."""
    return np.random.default_rng(np.random.SeedSequence([root_seed, cluster_index, episode]))


def train_on_cluster(source: str, context: RewardContext, cfg: TrainConfig,
                     cluster_id: str = "", cluster_index: int = 0,
                     policy: TokenPolicy | None = None, critic: Critic | None = None,
                     actor_opt: AdamW | None = None, critic_opt: AdamW | None = None,
                     start_episode: int = 0):
    """Run the per-cluster training loop and return (policy, critic, log).

    Each episode: sample, score, suffix-sum returns, critic-baselined
    advantages, one actor step and one critic step.  The log gains one
    record per episode with the full-summary reward breakdown.
    """
    if context.provider is None:
        raise ValidationError("reward context needs an embedding provider")
    if policy is None:
        policy = policy_init_from_cluster(source)
    if critic is None:
        critic = Critic(context.provider.dim)
    if actor_opt is None:
        actor_opt = AdamW(_actor_params(policy), cfg.actor_lr, cfg.adam_betas,
                          cfg.adam_eps, cfg.weight_decay)
    if critic_opt is None:
        critic_opt = AdamW(_critic_params(critic), cfg.critic_lr, cfg.adam_betas,
                           cfg.adam_eps, cfg.weight_decay)

    log = []
    for episode in range(start_episode, cfg.episodes_per_cluster):
        rng = episode_seed(cfg.seed, cluster_index, episode)
        trajectory = sample_trajectory(policy, source, cfg, rng)
        record = {
            "cluster_id": cluster_id,
            "episode": episode,
            "r1": 0.0, "r2": 0.0, "r3": 0.0, "r4": 0.0,
            "total": 0.0,
            "episode_return": 0.0,
            "summary_len": len(trajectory),
        }
        if len(trajectory) > 0:
            trajectory = score_trajectory(trajectory, context, context.provider,
                                          cfg.reward_stride, cfg.delta_shaping)
            trajectory.returns = compute_returns(trajectory.rewards)
            trajectory.advantages = compute_advantages(
                trajectory.returns, trajectory.states, critic
            )
            actor_update(policy, [trajectory], cfg, actor_opt)
            critic_update(critic, [trajectory], cfg, critic_opt)
            b = trajectory.final_breakdown
            record.update(r1=b.r1, r2=b.r2, r3=b.r3, r4=b.r4, total=b.total,
                          episode_return=float(trajectory.returns[0]))
        log.append(record)
    return policy, critic, log


# ---------------------------------------------------------------------------
# Checkpointing: full training state for bit-identical resume.
# ---------------------------------------------------------------------------


def save_checkpoint(path: str | Path, cfg: TrainConfig, policy: TokenPolicy,
                    critic: Critic, actor_opt: AdamW, critic_opt: AdamW,
                    cluster_id: str, next_episode: int) -> None:
    payload = {
        "config_hash": cfg.config_hash(),
        "cluster_id": cluster_id,
        "next_episode": next_episode,
        "policy": policy.state_dict(),
        "critic": critic.state_dict(),
        "actor_opt": actor_opt.state_dict(),
        "critic_opt": critic_opt.state_dict(),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path: str | Path, cfg: TrainConfig):
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload["config_hash"] != cfg.config_hash():
        raise ValidationError("checkpoint was written under a different training config")
    policy = TokenPolicy.from_state_dict(payload["policy"])
    critic = Critic.from_state_dict(payload["critic"])
    actor_opt = AdamW(_actor_params(policy), cfg.actor_lr, cfg.adam_betas,
                      cfg.adam_eps, cfg.weight_decay)
    actor_opt.load_state_dict(payload["actor_opt"])
    critic_opt = AdamW(_critic_params(critic), cfg.critic_lr, cfg.adam_betas,
                       cfg.adam_eps, cfg.weight_decay)
    critic_opt.load_state_dict(payload["critic_opt"])
    return policy, critic, actor_opt, critic_opt, payload["cluster_id"], payload["next_episode"]


def save_training_log(log, path: str | Path) -> None:
    with Path(path).open("a", encoding="utf-8") as fh:
        for record in log:
            fh.write(json.dumps(record) + "\n")

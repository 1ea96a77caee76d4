"""Dissect the compound reward on real text, then fine-tune a token policy
against one component and watch the sampled summaries change."""

import warnings

import numpy as np

from chronoline.corpus import detokenize
from chronoline.datasets import toy_collection
from chronoline.embedding import avg_sentence_embedding, hashed_embedding_provider
from chronoline.reward import (
    RewardConfig,
    RewardContext,
    calibrate_alpha,
    compound_reward,
    ngram_lm_fit,
)
from chronoline.rl import TrainConfig, episode_seed, train_on_cluster
from chronoline.summarise import policy_init_from_cluster

warnings.filterwarnings("ignore", message="cosine of a zero vector")

collection = toy_collection()
provider = hashed_embedding_provider(dim=64, seed=0)
source = " ".join(a.text for a in collection.articles[:4])

lm = ngram_lm_fit(collection, n=3, discount=0.1)
alpha = calibrate_alpha(lm, [a.text for a in collection.articles])
print(f"language model calibrated: alpha = {alpha:.3f}")

config = RewardConfig(gamma1=0.0, alpha=alpha)  # preference term off for the demo
context = RewardContext(
    config=config, provider=provider, lm=lm,
    source_emb=avg_sentence_embedding(source, provider),
)
for text in [
    "protesters filled meridian square demanding the governor resign",
    "protesters protesters protesters protesters",
    "coalition jets struck the coastal airbase",
]:
    b = compound_reward(text, context)
    print(f"  r2={b.r2:+.2f} r3={b.r3:+.2f} r4={b.r4:.2f} total={b.total:+.2f}  {text!r}")

# train against the repetition penalty alone; delta shaping makes the
# return equal the final-summary reward instead of a sum over prefixes
repetition_only = RewardContext(
    config=RewardConfig(gamma1=0, gamma2=0, gamma3=0, gamma4=1), provider=provider,
)
train_config = TrainConfig(episodes_per_cluster=300, actor_lr=0.05,
                           max_summary_tokens=16, delta_shaping=True, seed=0)
untrained = policy_init_from_cluster(source)
trained, _, log = train_on_cluster(source, repetition_only, train_config,
                                   cluster_id="demo", cluster_index=0)
print(f"\ntrained 300 episodes; final-episode reward {log[-1]['total']:+.3f}")


def show_samples(policy, label):
    print(f"\n{label}:")
    for episode in range(3):
        ids, _ = policy.sample(episode_seed(99, 0, episode), 16)
        print(f"  {detokenize(policy.decode(ids))!r}")


show_samples(untrained, "samples before training")
show_samples(trained, "samples after repetition-only training")

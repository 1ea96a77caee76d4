"""Fit the pairwise preference model on simulated comparisons and inspect
what it believes about item quality."""

import numpy as np

from chronoline.gppl import (
    GpplConfig,
    PreferenceDataset,
    PreferencePair,
    fit_gppl,
    pairwise_probability,
    pairs_from_ranking,
    predict_score,
)

# five candidate summaries living on a one-dimensional quality axis
items = {f"cand{k}": np.array([float(k)]) for k in range(5)}
ranking = [f"cand{k}" for k in reversed(range(5))]  # cand4 best
pairs = pairs_from_ranking(ranking)
print(f"{len(pairs)} pairs from one ranking of {len(items)} items")

model = fit_gppl(PreferenceDataset(items, tuple(pairs)), GpplConfig())
print("\nposterior over latent quality:")
for item_id, mean in sorted(zip(model.item_ids, model.posterior_mean),
                            key=lambda p: -p[1]):
    _, var = predict_score(model, items[item_id])
    print(f"  {item_id}: {mean:+.3f} (sd {np.sqrt(var):.3f})")

best, worst = items["cand4"], items["cand0"]
print(f"\np(best beats worst) = {pairwise_probability(model, best, worst):.3f}")
print(f"p(worst beats best) = {pairwise_probability(model, worst, best):.3f}")

# an unseen item between cand3 and cand4 interpolates smoothly
x = np.array([3.5])
mean, var = predict_score(model, x)
print(f"unseen item at 3.5 scores {mean:+.3f} (sd {np.sqrt(var):.3f})")

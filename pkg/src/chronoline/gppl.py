"""Gaussian-process preference learning over item embeddings.

Latent quality scores f get a zero-mean GP prior with a squared-exponential
kernel; each preference (winner over loser) contributes a probit likelihood
term Phi(z) with z = (f_w - f_l) / sqrt(2 sigma^2).  The posterior is
approximated by Laplace: Newton ascent to the MAP scores, covariance from
the negative Hessian at the mode.  Prediction at new points follows the
usual GP posterior-predictive algebra.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class PreferencePair:
    winner_id: str
    loser_id: str
    weight: int = 1

    def __post_init__(self):
        if self.winner_id == self.loser_id:
            raise ValidationError("a pair must involve two distinct items")
        if self.weight < 1:
            raise ValidationError("pair weight must be at least 1")


@dataclass(frozen=True)
class PreferenceDataset:
    items: Mapping[str, np.ndarray]
    pairs: tuple[PreferencePair, ...]

    def __post_init__(self):
        dims = {np.asarray(v).shape for v in self.items.values()}
        if len(dims) > 1:
            raise ValidationError(f"item embeddings differ in dimension: {sorted(dims)}")
        for p in self.pairs:
            for item in (p.winner_id, p.loser_id):
                if item not in self.items:
                    raise ValidationError(f"pair references unknown item {item!r}")


@dataclass(frozen=True)
class GpplConfig:
    lengthscale: float | None = None  # None -> median pairwise distance
    signal_variance: float = 1.0
    noise_scale: float = 1.0
    max_iter: int = 100
    tol: float = 1e-6
    jitter: float = 1e-8


@dataclass(frozen=True)
class ScoreModel:
    item_ids: tuple[str, ...]
    posterior_mean: np.ndarray
    posterior_covariance: np.ndarray
    lengthscale: float
    signal_variance: float
    noise_scale: float
    training_embeddings: np.ndarray
    # cached solves against the kernel matrix, derived fields
    _kinv: np.ndarray = field(repr=False, default=None)
    _alpha: np.ndarray = field(repr=False, default=None)


def pairs_from_ranking(ranking: Sequence[str]) -> list[PreferencePair]:
    """All C(n,2) pairs of a ranking, earlier item winning each pair."""
    if len(ranking) != len(set(ranking)):
        raise ValidationError("ranking contains duplicate ids")
    if len(ranking) < 2:
        raise ValidationError("ranking needs at least two items")
    return [
        PreferencePair(ranking[i], ranking[j])
        for i in range(len(ranking))
        for j in range(i + 1, len(ranking))
    ]


def median_heuristic_lengthscale(x: np.ndarray) -> float:
    """Median pairwise Euclidean distance; 1.0 when degenerate."""
    n = x.shape[0]
    if n < 2:
        return 1.0
    dists = [
        float(np.linalg.norm(x[i] - x[j])) for i in range(n) for j in range(i + 1, n)
    ]
    med = float(np.median(dists))
    return med if med > 0 else 1.0


def se_kernel(a: np.ndarray, b: np.ndarray, lengthscale: float, signal_variance: float) -> np.ndarray:
    """v * exp(-||x - x'||^2 / (2 l^2)) for every row pair of a and b."""
    sq = (
        np.sum(a ** 2, axis=1)[:, None]
        + np.sum(b ** 2, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    return signal_variance * np.exp(-np.maximum(sq, 0.0) / (2.0 * lengthscale ** 2))


def _chol(matrix: np.ndarray, jitter: float):
    bumped = matrix + jitter * np.eye(matrix.shape[0])
    try:
        return cho_factor(bumped, lower=True)
    except np.linalg.LinAlgError as e:
        raise NumericalError("kernel matrix is not positive definite after jitter") from e


def _u_of_z(z: np.ndarray) -> np.ndarray:
    # phi(z)/Phi(z) computed in log space; stable far into the left tail
    return np.exp(norm.logpdf(z) - norm.logcdf(z))


def fit_gppl(data: PreferenceDataset, config: GpplConfig = GpplConfig()) -> ScoreModel:
    """Laplace approximation to the GP preference posterior.

    Newton iterations on the unnormalised log posterior run until the
    gradient infinity-norm drops below config.tol or config.max_iter is
    reached (warning on non-convergence).  Steps that lower the objective
    are halved.  With no pairs the posterior is the prior.
    """
    item_ids = tuple(sorted(data.items))
    if not item_ids:
        raise ValidationError("dataset has no items")
    x = np.vstack([np.asarray(data.items[i], dtype=float) for i in item_ids])
    if not np.all(np.isfinite(x)):
        raise ValidationError("item embeddings must be finite")
    n = len(item_ids)
    index = {item: i for i, item in enumerate(item_ids)}

    lengthscale = config.lengthscale or median_heuristic_lengthscale(x)
    k = se_kernel(x, x, lengthscale, config.signal_variance)
    k_chol = _chol(k, config.jitter)
    kinv = cho_solve(k_chol, np.eye(n))
    kinv = 0.5 * (kinv + kinv.T)

    w_idx = np.array([index[p.winner_id] for p in data.pairs], dtype=int)
    l_idx = np.array([index[p.loser_id] for p in data.pairs], dtype=int)
    weights = np.array([p.weight for p in data.pairs], dtype=float)
    scale = 1.0 / np.sqrt(2.0 * config.noise_scale ** 2)

    def objective(f: np.ndarray) -> float:
        z = scale * (f[w_idx] - f[l_idx])
        return float(np.dot(weights, norm.logcdf(z)) - 0.5 * f @ kinv @ f)

    f = np.zeros(n)
    converged = n == 0 or len(data.pairs) == 0
    for _ in range(config.max_iter):
        if converged:
            break
        z = scale * (f[w_idx] - f[l_idx])
        u = _u_of_z(z)
        grad_lik = np.zeros(n)
        np.add.at(grad_lik, w_idx, weights * u * scale)
        np.add.at(grad_lik, l_idx, -weights * u * scale)
        grad = grad_lik - kinv @ f
        if np.max(np.abs(grad)) < config.tol:
            converged = True
            break
        w_mat = _pair_hessian(n, w_idx, l_idx, weights, u, z, scale)
        step = np.linalg.solve(kinv + w_mat, grad)
        current = objective(f)
        t = 1.0
        while t > 1e-4 and objective(f + t * step) < current:
            t *= 0.5
        f = f + t * step
    if not converged:
        warnings.warn(
            "gppl newton iterations did not converge; returning partial model",
            RuntimeWarning,
            stacklevel=2,
        )

    if len(data.pairs) > 0:
        z = scale * (f[w_idx] - f[l_idx])
        w_mat = _pair_hessian(n, w_idx, l_idx, weights, _u_of_z(z), z, scale)
    else:
        w_mat = np.zeros((n, n))
    cov_chol = _chol(kinv + w_mat, config.jitter)
    cov = cho_solve(cov_chol, np.eye(n))
    cov = 0.5 * (cov + cov.T)

    return ScoreModel(
        item_ids=item_ids,
        posterior_mean=f,
        posterior_covariance=cov,
        lengthscale=lengthscale,
        signal_variance=config.signal_variance,
        noise_scale=config.noise_scale,
        training_embeddings=x,
        _kinv=kinv,
        _alpha=kinv @ f,
    )


def _pair_hessian(n, w_idx, l_idx, weights, u, z, scale) -> np.ndarray:
    """Negative Hessian of the pairwise log likelihood (PSD by construction)."""
    coeff = weights * u * (z + u) * scale ** 2
    w_mat = np.zeros((n, n))
    np.add.at(w_mat, (w_idx, w_idx), coeff)
    np.add.at(w_mat, (l_idx, l_idx), coeff)
    np.add.at(w_mat, (w_idx, l_idx), -coeff)
    np.add.at(w_mat, (l_idx, w_idx), -coeff)
    return w_mat


def _ensure_solves(m: ScoreModel) -> tuple[np.ndarray, np.ndarray]:
    if m._kinv is not None and m._alpha is not None:
        return m._kinv, m._alpha
    k = se_kernel(m.training_embeddings, m.training_embeddings, m.lengthscale, m.signal_variance)
    kinv = cho_solve(_chol(k, 1e-8), np.eye(k.shape[0]))
    kinv = 0.5 * (kinv + kinv.T)
    return kinv, kinv @ m.posterior_mean


def predict_score(m: ScoreModel, x: np.ndarray) -> tuple[float, float]:
    """GP posterior-predictive mean and variance at a new point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.training_embeddings.shape[1],):
        raise ValidationError(
            f"expected dim {m.training_embeddings.shape[1]}, got {x.shape}"
        )
    kinv, alpha = _ensure_solves(m)
    k_star = se_kernel(x[None, :], m.training_embeddings, m.lengthscale, m.signal_variance)[0]
    mean = float(k_star @ alpha)
    solved = kinv @ k_star
    var = (
        m.signal_variance
        - float(k_star @ solved)
        + float(solved @ m.posterior_covariance @ solved)
    )
    return mean, max(var, 0.0)


def win_probability(mean_a: float, var_a: float, mean_b: float, var_b: float,
                    noise_scale: float) -> float:
    """Phi((mu_a - mu_b) / sqrt(2 sigma^2 + v_a + v_b))."""
    denom = np.sqrt(2.0 * noise_scale ** 2 + var_a + var_b)
    return float(norm.cdf((mean_a - mean_b) / denom))


def pairwise_probability(m: ScoreModel, a: np.ndarray, b: np.ndarray) -> float:
    """Posterior probability that item at a beats item at b."""
    mean_a, var_a = predict_score(m, a)
    mean_b, var_b = predict_score(m, b)
    return win_probability(mean_a, var_a, mean_b, var_b, m.noise_scale)


# ---------------------------------------------------------------------------
# Checkpoint format: JSON with a scalar header plus flat arrays.
# ---------------------------------------------------------------------------


def save_score_model(m: ScoreModel, path: str | Path) -> None:
    payload = {
        "dim": int(m.training_embeddings.shape[1]),
        "n_items": len(m.item_ids),
        "lengthscale": m.lengthscale,
        "signal_variance": m.signal_variance,
        "noise_scale": m.noise_scale,
        "item_ids": list(m.item_ids),
        "posterior_mean": m.posterior_mean.tolist(),
        "posterior_covariance": m.posterior_covariance.tolist(),
        "training_embeddings": m.training_embeddings.tolist(),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_score_model(path: str | Path) -> ScoreModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    x = np.asarray(payload["training_embeddings"], dtype=float)
    if x.shape != (payload["n_items"], payload["dim"]):
        raise ValidationError("checkpoint header does not match array shapes")
    return ScoreModel(
        item_ids=tuple(payload["item_ids"]),
        posterior_mean=np.asarray(payload["posterior_mean"], dtype=float),
        posterior_covariance=np.asarray(payload["posterior_covariance"], dtype=float),
        lengthscale=float(payload["lengthscale"]),
        signal_variance=float(payload["signal_variance"]),
        noise_scale=float(payload["noise_scale"]),
        training_embeddings=x,
    )

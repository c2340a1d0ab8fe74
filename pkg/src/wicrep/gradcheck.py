"""Finite-difference verification of the analytic gradients.

Builds a tiny randomly initialized model, flattens every parameter into one
vector, and compares the backward pass against central differences of the
summed NLL. Relative error uses a guarded denominator so coordinates whose
true gradient is near zero are judged on the absolute scale instead of
blowing up on finite-difference noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import TranslationInstance
from .model import batch_nll, get_flat_params, loss_and_gradients, param_items, set_flat_params
from .numkit import finite_difference_grad, make_rng
from .train import TrainConfig, init_model


@dataclass
class GradCheckResult:
    seed: int
    max_rel_error: float
    worst_tensor: str
    passed: bool


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return np.abs(analytic - numeric) / denom


def _random_batch(rng, vocab_size: int, n_labels: int, sentence_len: int, batch: int):
    out = []
    for _ in range(batch):
        ids = [int(v) for v in rng.integers(0, vocab_size, size=sentence_len)]
        pos = int(rng.integers(0, sentence_len))
        tgt = int(rng.integers(1, n_labels))
        out.append(TranslationInstance(ids, pos, tgt))
    return out


def gradient_check(
    seed: int,
    *,
    d: int = 8,
    d_h: int = 8,
    vocab_size: int = 12,
    n_labels: int = 20,
    sentence_len: int = 6,
    batch: int = 4,
    epsilon: float = 1e-4,
    tolerance: float = 1e-4,
    peephole: str = "full",
    forward_only: bool = False,
) -> GradCheckResult:
    """Compare analytic and central-difference gradients for one seeded model."""
    cfg = TrainConfig(d=d, d_h=d_h, seed=seed, peephole=peephole, forward_only=forward_only)
    enc, head = init_model(cfg, vocab_size, n_labels)
    data_rng = make_rng(seed + 10_000)
    instances = _random_batch(data_rng, vocab_size, n_labels, sentence_len, batch)

    _, grads = loss_and_gradients(enc, head, instances)
    items = param_items(enc, head)
    analytic = np.concatenate([grads[name].ravel() for name, _ in items])

    theta0 = get_flat_params(enc, head)

    def loss_at(theta: np.ndarray) -> float:
        set_flat_params(enc, head, theta)
        return float(sum(batch_nll(enc, head, instances)))

    try:
        numeric = finite_difference_grad(loss_at, theta0, epsilon=epsilon)
    finally:
        set_flat_params(enc, head, theta0)

    errors = relative_error(analytic, numeric)
    worst = int(np.argmax(errors))
    offset = 0
    worst_tensor = "?"
    for name, arr in items:
        if offset <= worst < offset + arr.size:
            worst_tensor = name
            break
        offset += arr.size
    max_err = float(errors[worst])
    return GradCheckResult(seed=seed, max_rel_error=max_err, worst_tensor=worst_tensor,
                           passed=max_err < tolerance)


def gradient_check_many(n_seeds: int = 20, first_seed: int = 0, **kwargs) -> list[GradCheckResult]:
    return [gradient_check(seed, **kwargs) for seed in range(first_seed, first_seed + n_seeds)]

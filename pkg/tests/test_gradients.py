"""Loss values and exact BPTT gradients against the finite-difference oracle."""

import math

import numpy as np
import pytest

from wicrep.corpus import TranslationInstance
from wicrep.gradcheck import gradient_check, relative_error
from wicrep.model import loss_and_gradients, param_items
from wicrep.train import TrainConfig, init_model


def small_model(seed=0, n_labels=5, **kwargs):
    cfg = TrainConfig(d=4, d_h=3, seed=seed, **kwargs)
    return init_model(cfg, 8, n_labels)


def test_gradcheck_full_peepholes():
    for seed in (0, 1):
        r = gradient_check(seed)
        assert r.passed, f"seed {seed}: {r.max_rel_error} in {r.worst_tensor}"
        assert r.max_rel_error < 1e-4


def test_gradcheck_diagonal_peepholes():
    r = gradient_check(3, peephole="diagonal")
    assert r.passed, f"{r.max_rel_error} in {r.worst_tensor}"


def test_gradcheck_forward_only():
    r = gradient_check(4, forward_only=True)
    assert r.passed, f"{r.max_rel_error} in {r.worst_tensor}"


def test_relative_error_guards_small_denominators():
    assert relative_error(np.array([0.0]), np.array([1e-9]))[0] == 1e-9
    assert relative_error(np.array([100.0]), np.array([101.0]))[0] == pytest.approx(1 / 101)


def test_confident_model_has_zero_loss_and_gradients():
    enc, head = small_model()
    head.bias[2] = 1000.0  # drives p(label 2) to 1.0 exactly
    batch = [TranslationInstance([1, 5, 3], 1, 2), TranslationInstance([0, 2], 0, 2)]
    loss, grads = loss_and_gradients(enc, head, batch)
    assert loss == 0.0
    for name, _ in param_items(enc, head):
        assert not grads[name].any(), name


def test_zero_head_gives_uniform_loss():
    enc, head = small_model(n_labels=7)
    head.projection[:] = 0.0
    head.bias[:] = 0.0
    batch = [TranslationInstance([1, 2, 3], 0, 4), TranslationInstance([5, 5], 1, 0)]
    loss, _ = loss_and_gradients(enc, head, batch)
    assert loss == pytest.approx(2 * math.log(7), abs=1e-12)


def test_batch_loss_is_the_sum_of_instance_losses():
    enc, head = small_model(seed=5)
    batch = [
        TranslationInstance([3, 1, 4, 1], 2, 1),
        TranslationInstance([2, 7], 0, 3),
        TranslationInstance([3, 1, 4, 1], 0, 2),  # shares a sentence with the first
    ]
    loss, grads = loss_and_gradients(enc, head, batch)
    singles = [loss_and_gradients(enc, head, [inst]) for inst in batch]
    assert loss == pytest.approx(sum(l for l, _ in singles), rel=1e-12)
    for name, _ in param_items(enc, head):
        total = sum(g[name] for _, g in singles)
        assert np.allclose(grads[name], total, atol=1e-9, rtol=1e-9), name


def test_gradients_are_deterministic():
    enc, head = small_model(seed=9)
    batch = [TranslationInstance([1, 2, 3, 4], 2, 1), TranslationInstance([4, 3], 1, 2)]
    _, g1 = loss_and_gradients(enc, head, batch)
    _, g2 = loss_and_gradients(enc, head, batch)
    for name, _ in param_items(enc, head):
        assert np.array_equal(g1[name], g2[name]), name


def test_invalid_ids_are_rejected():
    enc, head = small_model()
    with pytest.raises(ValueError):
        loss_and_gradients(enc, head, [TranslationInstance([1, 2], 0, 99)])
    with pytest.raises(ValueError):
        loss_and_gradients(enc, head, [TranslationInstance([1, 200], 0, 1)])
    with pytest.raises(ValueError):
        loss_and_gradients(enc, head, [])


def test_embedding_gradient_touches_only_used_rows():
    enc, head = small_model(seed=2)
    _, grads = loss_and_gradients(enc, head, [TranslationInstance([1, 3], 0, 1)])
    used = {1, 3}
    for row in range(enc.embeddings.shape[0]):
        if row not in used:
            assert not grads["embedding"][row].any()

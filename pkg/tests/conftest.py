"""Shared fixtures.

The homograph training run costs about two minutes, so it happens once per
session and is shared by everything that needs a model with real structure
(acceptance criteria 2 and 4, substitution ranking).
"""

import time
from types import SimpleNamespace

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("wicrep", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("wicrep")


@pytest.fixture(scope="session")
def homograph_run():
    from wicrep.synthdata import generate_homograph_data, prepare_homograph_task
    from wicrep.train import TrainConfig, init_model, train

    t0 = time.monotonic()
    data = generate_homograph_data(seed=0)
    task = prepare_homograph_task(data)
    cfg = TrainConfig(d=32, d_h=32, batch_size=128, learning_rate=2e-3,
                      max_epochs=10, patience=3, seed=1)
    enc, head = init_model(cfg, len(task.src_vocab.words), len(task.tgt_vocab.words))
    ckpt, history = train(enc, head, task.train_instances, task.dev_amb_instances,
                          cfg, src_vocab=task.src_vocab, tgt_vocab=task.tgt_vocab,
                          log=lambda line: None)
    return SimpleNamespace(data=data, task=task, config=cfg, ckpt=ckpt,
                           history=history, seconds=time.monotonic() - t0)

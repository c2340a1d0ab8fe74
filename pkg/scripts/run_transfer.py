#!/usr/bin/env python3
"""Compare supersense fine-tuning from a pretrained start against random init.

The label of the ambiguous token is its sense, so the pretrained encoder
already carries the needed signal; fine-tuning should reach high accuracy
in fewer epochs than training from scratch.
"""

import argparse
import sys

import numpy as np

from wicrep.model import encode_bidirectional, head_distribution, loss_and_gradients, param_items
from wicrep.synthdata import generate_homograph_data, prepare_homograph_task, write_supersense_files
from wicrep.tasks import parse_supersense_file, supersense_instances
from wicrep.train import AdamState, TrainConfig, adam_step, init_model, init_task_head, train
from wicrep.numkit import make_rng

import tempfile
from pathlib import Path

LABELS = ["noun.money", "noun.river"]


def accuracy(enc, head, instances) -> float:
    correct = 0
    for inst in instances:
        h = encode_bidirectional(enc, inst.source_ids)[inst.position_t]
        if int(np.argmax(head_distribution(head, h))) == inst.target_id:
            correct += 1
    return correct / len(instances)


def epochs_to_target(enc, head, train_insts, dev_insts, cfg, target_acc, max_epochs):
    """First epoch (1-based) whose post-epoch dev accuracy reaches the target."""
    params = dict(param_items(enc, head))
    state = AdamState.for_params(params, alpha=cfg.learning_rate, beta1=cfg.beta1,
                                 beta2=cfg.beta2, eps=cfg.adam_eps)
    rng = make_rng(cfg.seed)
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(len(train_insts))
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_insts[k] for k in order[start : start + cfg.batch_size]]
            _, grads = loss_and_gradients(enc, head, batch)
            adam_step(params, grads, state)
        if accuracy(enc, head, dev_insts) >= target_acc:
            return epoch
    return max_epochs + 1  # never reached


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--d", type=int, default=32)
    ap.add_argument("--d-h", type=int, default=32)
    ap.add_argument("--pretrain-epochs", type=int, default=10)
    ap.add_argument("--finetune-sentences", type=int, default=600)
    ap.add_argument("--max-epochs", type=int, default=15)
    ap.add_argument("--learning-rate", type=float, default=2e-3)
    ap.add_argument("--batch-size", type=int, default=32)
    ap.add_argument("--target-acc", type=float, default=0.95)
    args = ap.parse_args()

    data = generate_homograph_data(seed=0)
    task = prepare_homograph_task(data)
    pre_cfg = TrainConfig(d=args.d, d_h=args.d_h, learning_rate=2e-3, batch_size=128,
                          max_epochs=args.pretrain_epochs, seed=1)
    enc, head = init_model(pre_cfg, len(task.src_vocab.words), len(task.tgt_vocab.words))
    pretrained, _ = train(enc, head, task.train_instances, task.dev_amb_instances, pre_cfg,
                          src_vocab=task.src_vocab, tgt_vocab=task.tgt_vocab,
                          log=lambda line: None)
    print("pretraining done")

    with tempfile.TemporaryDirectory() as tmp:
        trimmed = type(data)(train=data.train[: args.finetune_sentences], dev=data.dev)
        paths = write_supersense_files(trimmed, tmp)
        train_ds = parse_supersense_file(Path(paths["train.sst"]).read_text(encoding="utf-8"))
        dev_ds = parse_supersense_file(Path(paths["dev.sst"]).read_text(encoding="utf-8"))
    train_insts = supersense_instances(train_ds, task.src_vocab, LABELS, skip_unlabeled=True)
    dev_insts = supersense_instances(dev_ds, task.src_vocab, LABELS, skip_unlabeled=True)
    print(f"{len(train_insts)} fine-tune instances, {len(dev_insts)} dev tokens")

    wins = 0
    for seed in range(args.seeds):
        cfg = TrainConfig(d=args.d, d_h=args.d_h, batch_size=args.batch_size,
                          learning_rate=args.learning_rate, seed=100 + seed)

        from wicrep.train import model_from_arrays
        arrays = {name: arr.copy() for name, arr in
                  param_items(pretrained.encoder, pretrained.head)}
        warm_enc, _ = model_from_arrays(arrays)
        warm_head = init_task_head(cfg, warm_enc, len(LABELS), seed=200 + seed)
        e_warm = epochs_to_target(warm_enc, warm_head, train_insts, dev_insts, cfg,
                                  args.target_acc, args.max_epochs)

        cold_enc, cold_head = init_model(cfg, len(task.src_vocab.words), len(LABELS))
        e_cold = epochs_to_target(cold_enc, cold_head, train_insts, dev_insts, cfg,
                                  args.target_acc, args.max_epochs)

        verdict = "pretrained" if e_warm < e_cold else ("tie" if e_warm == e_cold else "random")
        wins += e_warm <= e_cold
        print(f"seed {seed}: pretrained {e_warm} epochs, random {e_cold} epochs -> {verdict}")

    print(f"pretrained start no slower in {wins}/{args.seeds} seeds")
    return 0


if __name__ == "__main__":
    sys.exit(main())

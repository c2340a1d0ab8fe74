"""Initialization, Adam, the pretraining/fine-tuning loop, and checkpoints.

Fine-tuning on a labeled task reuses the same loop: labeled tokens are
packed into the same instance shape (ids, position, label id) and a fresh
head replaces the translation head while all parameters stay trainable.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import TranslationInstance, Vocabulary
from .errors import CheckpointCorruptError, CheckpointFormatError, TrainingError
from .model import (
    DIRECTION_FIELDS,
    BiLstmEncoder,
    LstmDirectionParams,
    SoftmaxHead,
    batch_nll,
    loss_and_gradients,
    param_items,
)
from .numkit import init_matrix, make_rng

CHECKPOINT_MAGIC = b"WICREPCK"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    d: int = 300
    d_h: int = 300
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_every: int | None = None  # dev evals every N updates; None = once per epoch
    patience: int = 3
    max_epochs: int = 20
    seed: int = 0
    peephole: str = "full"  # "full" or "diagonal"
    forward_only: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.peephole not in ("full", "diagonal"):
            raise ValueError(f"unknown peephole mode {self.peephole!r}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")


@dataclass
class Checkpoint:
    """Everything needed to rebuild a trained model: config echo, vocabularies, tensors."""

    config: dict
    src_vocab: Vocabulary
    encoder: BiLstmEncoder
    head: SoftmaxHead
    tgt_vocab: Vocabulary | None = None  # translation head
    labels: list[str] | None = None     # task head

    @property
    def head_kind(self) -> str:
        return "translation" if self.tgt_vocab is not None else "labels"

    def label_names(self) -> list[str]:
        return self.tgt_vocab.words if self.tgt_vocab is not None else list(self.labels)


def _init_direction(d: int, hsz: int, peephole: str, rng) -> LstmDirectionParams:
    # Draw order follows DIRECTION_FIELDS so a seed pins the whole parameter set.
    arrays = {}
    for name in DIRECTION_FIELDS:
        if name.startswith("w_x"):
            arrays[name] = init_matrix(hsz, d, "glorot", rng)
        elif name.startswith("w_h"):
            arrays[name] = init_matrix(hsz, hsz, "orthogonal", rng)
        elif name.startswith("w_c"):
            if peephole == "diagonal":
                limit = math.sqrt(3.0 / hsz)
                arrays[name] = rng.uniform(-limit, limit, size=hsz)
            else:
                arrays[name] = init_matrix(hsz, hsz, "orthogonal", rng)
        else:
            arrays[name] = np.zeros(hsz)
    return LstmDirectionParams(**arrays)


def init_model(cfg: TrainConfig, src_vocab_size: int, n_labels: int) -> tuple[BiLstmEncoder, SoftmaxHead]:
    """Fresh parameters: uniform(0.08) embeddings, orthogonal recurrent and
    peephole matrices, glorot input and head weights, zero biases.

    Forward-only mode doubles the hidden size so the context vector keeps
    the same width as the bidirectional encoder.
    """
    rng = make_rng(cfg.seed)
    hsz = 2 * cfg.d_h if cfg.forward_only else cfg.d_h
    embeddings = init_matrix(src_vocab_size, cfg.d, "uniform", rng, scale=0.08)
    fwd = _init_direction(cfg.d, hsz, cfg.peephole, rng)
    bwd = None if cfg.forward_only else _init_direction(cfg.d, hsz, cfg.peephole, rng)
    enc = BiLstmEncoder(embeddings, fwd, bwd)
    if enc.output_dim != 2 * cfg.d_h:
        raise AssertionError("encoder output width must be 2*d_h in every configuration")
    head = SoftmaxHead(init_matrix(n_labels, enc.output_dim, "glorot", rng), np.zeros(n_labels))
    return enc, head


def init_task_head(cfg: TrainConfig, enc: BiLstmEncoder, n_labels: int, seed: int) -> SoftmaxHead:
    """Fresh glorot-initialized softmax head for a transfer task."""
    rng = make_rng(seed)
    return SoftmaxHead(init_matrix(n_labels, enc.output_dim, "glorot", rng), np.zeros(n_labels))


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int
    alpha: float
    beta1: float
    beta2: float
    eps: float

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], alpha=1e-3, beta1=0.9, beta2=0.999,
                   eps=1e-8) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0, alpha=alpha, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """In-place Adam update with bias-corrected moments."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in tensor {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.alpha * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def perplexity(enc: BiLstmEncoder, head: SoftmaxHead, instances: Sequence[TranslationInstance]) -> float:
    """exp of the mean negative log probability of each instance's target."""
    if len(instances) == 0:
        raise ValueError("perplexity needs at least one instance")
    nll = batch_nll(enc, head, instances)
    return float(math.exp(sum(nll) / len(nll)))


@dataclass
class EvalRecord:
    update: int
    train_loss: float  # mean per-instance NLL since the previous evaluation
    dev_ppl: float


def _tsv_logger(line: str) -> None:
    print(line, flush=True)


def train(
    enc: BiLstmEncoder,
    head: SoftmaxHead,
    train_instances: Sequence[TranslationInstance],
    dev_instances: Sequence[TranslationInstance],
    cfg: TrainConfig,
    *,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary | None = None,
    labels: list[str] | None = None,
    log: Callable[[str], None] = _tsv_logger,
) -> tuple[Checkpoint, list[EvalRecord]]:
    """Adam-optimize the summed NLL; keep the best-dev-perplexity parameters.

    Instances are reshuffled every epoch with the seeded generator. Dev
    perplexity is measured every cfg.eval_every updates (or at each epoch
    end when unset); training stops after cfg.patience consecutive
    evaluations without improvement, or at cfg.max_epochs. An empty dev set
    disables early stopping and the final parameters win. enc and head are
    updated in place; the returned checkpoint holds an independent copy of
    the best parameters.
    """
    if len(train_instances) == 0:
        raise ValueError("training set must be non-empty")
    params = dict(param_items(enc, head))
    state = AdamState.for_params(params, alpha=cfg.learning_rate, beta1=cfg.beta1,
                                 beta2=cfg.beta2, eps=cfg.adam_eps)
    rng = make_rng(cfg.seed)
    history: list[EvalRecord] = []
    best_arrays = {k: p.copy() for k, p in params.items()}
    best_ppl = math.inf
    bad_evals = 0
    update = 0
    interval_loss = 0.0
    interval_count = 0

    def evaluate() -> bool:
        nonlocal best_ppl, best_arrays, bad_evals, interval_loss, interval_count
        mean_loss = interval_loss / interval_count if interval_count else math.nan
        ppl = perplexity(enc, head, dev_instances) if len(dev_instances) else math.nan
        history.append(EvalRecord(update, mean_loss, ppl))
        log(f"{update}\t{mean_loss:.6f}\t{ppl:.6f}")
        interval_loss = 0.0
        interval_count = 0
        if not len(dev_instances):
            return False
        if ppl < best_ppl:
            best_ppl = ppl
            best_arrays = {k: p.copy() for k, p in params.items()}
            bad_evals = 0
            return False
        bad_evals += 1
        return bad_evals >= cfg.patience

    stop = False
    for _epoch in range(cfg.max_epochs):
        order = rng.permutation(len(train_instances))
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_instances[k] for k in order[start : start + cfg.batch_size]]
            loss, grads = loss_and_gradients(enc, head, batch)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite training loss {loss} at update {update}")
            adam_step(params, grads, state)
            update += 1
            interval_loss += loss
            interval_count += len(batch)
            if cfg.eval_every and update % cfg.eval_every == 0:
                stop = evaluate()
                if stop:
                    break
        if stop:
            break
        if not cfg.eval_every:
            stop = evaluate()
            if stop:
                break

    if not len(dev_instances):
        best_arrays = {k: p.copy() for k, p in params.items()}
    best_enc, best_head = model_from_arrays(best_arrays)
    ckpt = Checkpoint(
        config=_config_echo(cfg, head_kind="translation" if tgt_vocab is not None else "labels"),
        src_vocab=src_vocab,
        encoder=best_enc,
        head=best_head,
        tgt_vocab=tgt_vocab,
        labels=labels,
    )
    return ckpt, history


def _config_echo(cfg: TrainConfig, head_kind: str) -> dict:
    echo = asdict(cfg)
    echo["head_kind"] = head_kind
    return echo


def model_from_arrays(arrays: dict[str, np.ndarray]) -> tuple[BiLstmEncoder, SoftmaxHead]:
    fwd = LstmDirectionParams(**{f: arrays[f"fwd.{f}"] for f in DIRECTION_FIELDS})
    bwd = None
    if "bwd.w_xi" in arrays:
        bwd = LstmDirectionParams(**{f: arrays[f"bwd.{f}"] for f in DIRECTION_FIELDS})
    enc = BiLstmEncoder(arrays["embedding"], fwd, bwd)
    head = SoftmaxHead(arrays["head.projection"], arrays["head.bias"])
    return enc, head


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    """Binary layout: magic, version, length-prefixed JSON metadata, then the
    tensors as little-endian float32 in declared order."""
    items = param_items(ckpt.encoder, ckpt.head)
    meta = {
        "config": ckpt.config,
        "src_vocab": ckpt.src_vocab.to_pairs(),
        "tgt_vocab": ckpt.tgt_vocab.to_pairs() if ckpt.tgt_vocab is not None else None,
        "labels": ckpt.labels,
        "tensors": [[name, list(arr.shape)] for name, arr in items],
    }
    meta_bytes = json.dumps(meta, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(meta_bytes)))
        fh.write(meta_bytes)
        for _, arr in items:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(CHECKPOINT_MAGIC) + 12 or not blob.startswith(CHECKPOINT_MAGIC):
        raise CheckpointFormatError(f"{path}: not a checkpoint file (bad magic bytes)")
    offset = len(CHECKPOINT_MAGIC)
    (version,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    if offset + meta_len > len(blob):
        raise CheckpointCorruptError(f"{path}: truncated metadata block")
    try:
        meta = json.loads(blob[offset : offset + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"{path}: unreadable metadata block") from exc
    offset += meta_len
    for key in ("config", "src_vocab", "tensors"):
        if key not in meta:
            raise CheckpointCorruptError(f"{path}: metadata missing {key!r}")

    arrays = {}
    for name, shape in meta["tensors"]:
        n_values = int(np.prod(shape)) if shape else 1
        n_bytes = 4 * n_values
        if offset + n_bytes > len(blob):
            raise CheckpointCorruptError(f"{path}: truncated tensor section at {name}")
        flat = np.frombuffer(blob, dtype="<f4", count=n_values, offset=offset)
        arrays[name] = flat.astype(np.float64).reshape(shape)
        offset += n_bytes
    if offset != len(blob):
        raise CheckpointCorruptError(f"{path}: {len(blob) - offset} trailing bytes after tensors")

    try:
        enc, head = model_from_arrays(arrays)
    except KeyError as exc:
        raise CheckpointCorruptError(f"{path}: tensor list incomplete ({exc})") from exc
    return Checkpoint(
        config=meta["config"],
        src_vocab=Vocabulary.from_pairs(meta["src_vocab"]),
        encoder=enc,
        head=head,
        tgt_vocab=Vocabulary.from_pairs(meta["tgt_vocab"]) if meta.get("tgt_vocab") else None,
        labels=meta.get("labels"),
    )

"""Comparison encoders: context-averaging MLP, forward-only LSTM, type vectors.

The MLP sees the target embedding next to the unordered mean of the other
embeddings. The forward-only LSTM is the main encoder with the backward
direction disabled and the hidden size doubled so its output width still
matches the bidirectional one. The type-vector predictor ignores context
entirely and ranks candidates by embedding cosine.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .model import BiLstmEncoder, SoftmaxHead
from .numkit import affine, cosine, init_matrix, make_rng
from .tasks import rank_candidates
from .train import TrainConfig, init_model


@dataclass
class MlpParams:
    hidden_w: np.ndarray  # (2*d_h, 2*d)
    hidden_b: np.ndarray  # (2*d_h,)

    @property
    def output_dim(self) -> int:
        return self.hidden_b.shape[0]


def init_mlp(d: int, d_h: int, seed: int) -> MlpParams:
    rng = make_rng(seed)
    return MlpParams(init_matrix(2 * d_h, 2 * d, "glorot", rng), np.zeros(2 * d_h))


def mlp_encode(
    p: MlpParams,
    embeddings: np.ndarray,
    source_ids: Sequence[int],
    position_t: int,
) -> np.ndarray:
    """tanh affine of [x_t ; mean of the other embeddings] (zero mean if alone)."""
    if len(source_ids) == 0:
        raise ValueError("cannot encode an empty sentence")
    if not 0 <= position_t < len(source_ids):
        raise ValueError(f"position {position_t} outside sentence of length {len(source_ids)}")
    xs = embeddings[np.asarray(source_ids, dtype=np.intp)]
    x_t = xs[position_t]
    context = np.delete(xs, position_t, axis=0)
    mean = context.mean(axis=0) if context.shape[0] else np.zeros_like(x_t)
    return np.tanh(affine(p.hidden_w, np.concatenate([x_t, mean]), p.hidden_b))


def init_forward_lstm(cfg: TrainConfig, vocab_size: int, n_labels: int) -> tuple[BiLstmEncoder, SoftmaxHead]:
    """Forward-only encoder with doubled hidden size; output width stays 2*d_h."""
    fcfg = TrainConfig(**{**cfg.__dict__, "forward_only": True})
    enc, head = init_model(fcfg, vocab_size, n_labels)
    if enc.output_dim != 2 * cfg.d_h:
        raise AssertionError("forward-only encoder must keep the bidirectional output width")
    return enc, head


@dataclass
class TypeVectorTable:
    vectors: dict[str, np.ndarray]
    dim: int

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors[word]


def parse_type_vectors(text: str) -> TypeVectorTable:
    """First line "count dim", then "word v1 ... vdim" per line."""
    lines = text.splitlines()
    if not lines:
        raise DataError("empty vector file")
    header = lines[0].split()
    if len(header) != 2:
        raise DataError(f"bad vector file header {lines[0]!r}, expected 'count dim'")
    try:
        count, dim = int(header[0]), int(header[1])
    except ValueError as exc:
        raise DataError(f"bad vector file header {lines[0]!r}") from exc
    vectors: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != dim + 1:
            raise DataError(f"line {lineno}: expected word plus {dim} values, got {len(parts) - 1}")
        try:
            vectors[parts[0]] = np.array([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise DataError(f"line {lineno}: non-numeric vector entry") from exc
    if len(vectors) != count:
        raise DataError(f"header declares {count} vectors, file has {len(vectors)}")
    return TypeVectorTable(vectors, dim)


def load_type_vectors(path: str | Path) -> TypeVectorTable:
    return parse_type_vectors(Path(path).read_text(encoding="utf-8"))


def type_vector_predict(
    table: TypeVectorTable,
    target_word: str,
    candidates: Sequence[tuple[str, int]] | Sequence[str],
) -> str:
    """Context-insensitive best substitute: cosine between type vectors.

    Candidates missing from the table are skipped; ties go to the
    higher-ranked candidate.
    """
    if target_word not in table:
        raise KeyError(f"target word {target_word!r} not in vector table")
    ranked = [c for c in rank_candidates(candidates) if c in table]
    if not ranked:
        raise ValueError(f"none of the candidates for {target_word!r} are in the vector table")
    v_target = table[target_word]
    best_word = None
    best_sim = -np.inf
    for cand in ranked:
        sim = cosine(v_target, table[cand])
        if sim > best_sim:
            best_sim = sim
            best_word = cand
    return best_word

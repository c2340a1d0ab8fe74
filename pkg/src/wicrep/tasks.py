"""Transfer tasks: supersense tagging, lexical substitution, feature export.

Supersense tagging classifies each token from the context vector of its
position inside a clipped window. Lexical substitution ranks candidate
replacements by the cosine between the original context vector and the
vector obtained after substituting the candidate and re-encoding.
Candidate lists come from alignment co-occurrence counts via a pivot
language. Feature export emits translation probabilities for external
systems.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import AlignmentSet, ParallelSentencePair, TranslationInstance, Vocabulary
from .errors import DataError, ScoringError
from .model import encode_bidirectional, head_distribution
from .numkit import cosine
from .train import Checkpoint

OTHER_LABEL = "O"


# ---------------------------------------------------------------------------
# supersense tagging


@dataclass
class SupersenseDataset:
    """Sentences of (token, label) pairs; O marks tokens without a supersense."""

    sentences: list[list[tuple[str, str]]]

    def observed_labels(self) -> list[str]:
        seen = {label for sent in self.sentences for _, label in sent}
        seen.discard(OTHER_LABEL)
        return sorted(seen)

    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)


def parse_supersense_file(text: str) -> SupersenseDataset:
    """token TAB label lines, blank line between sentences.

    A token listed with several senses ("a|b") keeps only the first.
    """
    sentences: list[list[tuple[str, str]]] = []
    current: list[tuple[str, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            if current:
                sentences.append(current)
                current = []
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0]:
            raise DataError(f"line {lineno}: expected 'token<TAB>label', got {line!r}")
        token, label = parts
        label = label.split("|")[0]
        if not label:
            raise DataError(f"line {lineno}: empty label")
        current.append((token, label))
    if current:
        sentences.append(current)
    return SupersenseDataset(sentences)


def window_bounds(position: int, length: int, window: int) -> tuple[int, int]:
    """Half the window on each side, clipped at the sentence edges."""
    half = window // 2
    return max(0, position - half), min(length, position + half + 1)


def supersense_instances(
    dataset: SupersenseDataset,
    src_vocab: Vocabulary,
    labels: Sequence[str],
    window: int = 20,
    skip_unlabeled: bool = False,
) -> list[TranslationInstance]:
    """One windowed classification instance per token (per labeled token when
    skip_unlabeled is set). target_id indexes into labels."""
    label_id = {lab: k for k, lab in enumerate(labels)}
    out = []
    for sent in dataset.sentences:
        ids = [src_vocab.id(tok) for tok, _ in sent]
        for pos, (_, gold) in enumerate(sent):
            if skip_unlabeled and gold == OTHER_LABEL:
                continue
            if gold not in label_id:
                raise DataError(f"label {gold!r} outside inventory {sorted(label_id)}")
            lo, hi = window_bounds(pos, len(sent), window)
            out.append(TranslationInstance(ids[lo:hi], pos - lo, label_id[gold]))
    return out


@dataclass
class ClassScore:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class SupersenseScores:
    per_class: list[ClassScore]  # gold non-O classes, sorted by label
    precision: float             # support-weighted aggregates over those classes
    recall: float
    f1: float
    accuracy: float              # fraction of gold non-O tokens predicted exactly


def _prf(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def predict_tags(
    ckpt: Checkpoint,
    tokens: Sequence[str],
    window: int = 20,
    _cache: dict | None = None,
) -> list[str]:
    """Predicted label per token; positions sharing a clipped window share one encode."""
    labels = ckpt.label_names()
    ids = [ckpt.src_vocab.id(tok) for tok in tokens]
    cache = _cache if _cache is not None else {}
    out = []
    for pos in range(len(tokens)):
        lo, hi = window_bounds(pos, len(tokens), window)
        key = tuple(ids[lo:hi])
        if key not in cache:
            cache[key] = encode_bidirectional(ckpt.encoder, list(key))
        p = head_distribution(ckpt.head, cache[key][pos - lo])
        out.append(labels[int(np.argmax(p))])
    return out


def aggregate_scores(
    pairs: Iterable[tuple[str, str]],
    known_labels: Sequence[str],
) -> SupersenseScores:
    """Score (gold, predicted) label pairs: per-class and support-weighted P/R/F1.

    O never counts as a class of its own; gold labels outside the known
    inventory are a data error.
    """
    known = set(known_labels) | {OTHER_LABEL}
    tp: Counter = Counter()
    n_pred: Counter = Counter()
    n_gold: Counter = Counter()
    correct = 0
    for gold, pred in pairs:
        if gold not in known:
            raise DataError(f"gold label {gold!r} outside inventory {sorted(known)}")
        if pred != OTHER_LABEL:
            n_pred[pred] += 1
        if gold != OTHER_LABEL:
            n_gold[gold] += 1
            if pred == gold:
                tp[gold] += 1
                correct += 1
    per_class = []
    for label in sorted(n_gold):
        p, r, f1 = _prf(tp[label], n_pred[label], n_gold[label])
        per_class.append(ClassScore(label, p, r, f1, n_gold[label]))
    total = sum(n_gold.values())
    if total == 0:
        return SupersenseScores(per_class, 0.0, 0.0, 0.0, 0.0)
    agg_p = sum(c.precision * c.support for c in per_class) / total
    agg_r = sum(c.recall * c.support for c in per_class) / total
    agg_f1 = sum(c.f1 * c.support for c in per_class) / total
    return SupersenseScores(per_class, agg_p, agg_r, agg_f1, correct / total)


def evaluate_supersense(ckpt: Checkpoint, dataset: SupersenseDataset, window: int = 20) -> SupersenseScores:
    """Tag every token with the fine-tuned checkpoint and score against gold."""
    pairs: list[tuple[str, str]] = []
    cache: dict = {}
    for sent in dataset.sentences:
        preds = predict_tags(ckpt, [tok for tok, _ in sent], window, _cache=cache)
        pairs.extend((gold, pred) for (_, gold), pred in zip(sent, preds))
    return aggregate_scores(pairs, ckpt.label_names())


# ---------------------------------------------------------------------------
# candidate generation from alignment statistics


def alignment_cooccurrence(
    pairs: Iterable[ParallelSentencePair],
    alignments: Iterable[AlignmentSet],
) -> dict[tuple[str, str], int]:
    """Count (source word, target word) link co-occurrences over a corpus."""
    counts: dict[tuple[str, str], int] = {}
    for pair, links in zip(pairs, alignments):
        for i, j in links:
            if i >= len(pair.source) or j >= len(pair.target):
                raise DataError(f"pair {pair.index}: link {i}-{j} outside sentence")
            key = (pair.source[i], pair.target[j])
            counts[key] = counts.get(key, 0) + 1
    return counts


def build_candidate_table(
    pair_counts: Mapping[tuple[str, str], int],
    mass_threshold: float,
    targets: Iterable[str] | None = None,
) -> dict[str, list[tuple[str, int]]]:
    """Pivot through the second language: a word's candidates are the words
    aligned to its translations, ranked by total link count, cut at the
    shortest prefix holding mass_threshold of the count mass. The word itself
    is removed before the mass computation. Words with no surviving
    candidates get no entry.
    """
    if not 0.0 < mass_threshold <= 1.0:
        raise ValueError(f"mass_threshold must be in (0, 1], got {mass_threshold}")
    by_source: dict[str, dict[str, int]] = {}
    by_target: dict[str, dict[str, int]] = {}
    for (src, tgt), n in pair_counts.items():
        by_source.setdefault(src, {})[tgt] = n
        by_target.setdefault(tgt, {})[src] = n

    words = sorted(by_source) if targets is None else list(targets)
    table: dict[str, list[tuple[str, int]]] = {}
    for word in words:
        translations = by_source.get(word)
        if not translations:
            continue
        scores: Counter = Counter()
        for tgt in translations:
            for src, n in by_target[tgt].items():
                scores[src] += n
        scores.pop(word, None)
        if not scores:
            continue
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        total = sum(scores.values())
        kept = []
        cum = 0
        for cand, n in ranked:
            kept.append((cand, n))
            cum += n
            if cum / total >= mass_threshold:
                break
        table[word] = kept
    return table


def save_candidate_table(path, table: dict[str, list[tuple[str, int]]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(table):
            for cand, n in table[word]:
                fh.write(f"{word}\t{cand}\t{n}\n")


def load_candidate_table(path) -> dict[str, list[tuple[str, int]]]:
    table: dict[str, list[tuple[str, int]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh.read().splitlines(), start=1):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path} line {lineno}: expected 3 tab-separated fields")
            word, cand, n = parts
            try:
                table.setdefault(word, []).append((cand, int(n)))
            except ValueError as exc:
                raise DataError(f"{path} line {lineno}: bad count {n!r}") from exc
    return table


# ---------------------------------------------------------------------------
# lexical substitution


@dataclass
class LexsubItem:
    item_id: str
    lemma: str
    pos: str
    position: int
    sentence: list[str]

    def __post_init__(self):
        if not 0 <= self.position < len(self.sentence):
            raise DataError(f"item {self.item_id}: position {self.position} outside sentence "
                            f"of length {len(self.sentence)}")


def parse_lexsub_items(text: str) -> list[LexsubItem]:
    """TSV: item id, "lemma.pos", 0-indexed target position, tokenized sentence."""
    items = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"line {lineno}: expected 4 tab-separated fields, got {len(parts)}")
        item_id, lemma_pos, position, sentence = parts
        if "." not in lemma_pos:
            raise DataError(f"line {lineno}: expected 'lemma.pos', got {lemma_pos!r}")
        lemma, pos = lemma_pos.rsplit(".", 1)
        try:
            position = int(position)
        except ValueError as exc:
            raise DataError(f"line {lineno}: bad position {position!r}") from exc
        items.append(LexsubItem(item_id, lemma, pos, position, sentence.split()))
    return items


def parse_lexsub_gold(text: str) -> dict[str, list[tuple[str, int]]]:
    """item id TAB semicolon-separated "substitute count" pairs."""
    gold: dict[str, list[tuple[str, int]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"line {lineno}: expected 'id<TAB>substitutes'")
        item_id, subs = parts
        entries = []
        for piece in subs.split(";"):
            piece = piece.strip()
            if not piece:
                continue
            try:
                word, count = piece.rsplit(" ", 1)
                entries.append((word, int(count)))
            except ValueError as exc:
                raise DataError(f"line {lineno}: bad 'substitute count' pair {piece!r}") from exc
        if not entries:
            raise DataError(f"line {lineno}: item {item_id} has empty gold")
        gold[item_id] = entries
    return gold


def rank_candidates(candidates: Sequence[tuple[str, int]] | Sequence[str]) -> list[str]:
    """Canonical candidate order: alignment count descending, then word.

    Bare word lists rank lexicographically (all counts equal).
    """
    pairs = [(c, 0) if isinstance(c, str) else c for c in candidates]
    return [w for w, _ in sorted(pairs, key=lambda kv: (-kv[1], kv[0]))]


def lexsub_predict(
    ckpt: Checkpoint,
    item: LexsubItem,
    candidates: Sequence[tuple[str, int]] | Sequence[str],
) -> str:
    """Best substitute by cosine against the target's context vector.

    Each candidate replaces the target token and the sentence is re-encoded
    in full. Ties go to the higher-ranked candidate; rank is recomputed
    internally so the input order never matters.
    """
    if not candidates:
        raise ValueError(f"item {item.item_id}: empty candidate list")
    ranked = rank_candidates(candidates)
    ids = [ckpt.src_vocab.id(tok) for tok in item.sentence]
    h_orig = encode_bidirectional(ckpt.encoder, ids)[item.position]
    best_word = None
    best_sim = -math.inf
    for cand in ranked:
        ids[item.position] = ckpt.src_vocab.id(cand)
        h_sub = encode_bidirectional(ckpt.encoder, ids)[item.position]
        sim = cosine(h_orig, h_sub)
        if sim > best_sim:
            best_sim = sim
            best_word = cand
    return best_word


def lexsub_score(
    predictions: Mapping[str, str],
    gold: Mapping[str, list[tuple[str, int]]],
) -> tuple[float, float]:
    """(best, best-mode) percentages over the predicted items.

    best: annotator count of the guess over the item's total count, averaged.
    best-mode: exact match with the single most frequent substitute, averaged
    over predicted items that have a unique mode.
    """
    if not predictions:
        raise ScoringError("no predictions to score")
    best_sum = 0.0
    mode_sum = 0
    mode_items = 0
    for item_id, guess in predictions.items():
        if item_id not in gold:
            raise ScoringError(f"prediction for unknown item id {item_id!r}")
        entries = gold[item_id]
        total = sum(n for _, n in entries)
        counts = {w: n for w, n in entries}
        best_sum += counts.get(guess, 0) / total
        top = max(n for _, n in entries)
        modes = [w for w, n in entries if n == top]
        if len(modes) == 1:
            mode_items += 1
            if guess == modes[0]:
                mode_sum += 1
    best = 100.0 * best_sum / len(predictions)
    best_mode = 100.0 * mode_sum / mode_items if mode_items else 0.0
    return best, best_mode


# ---------------------------------------------------------------------------
# translation feature export


@dataclass
class FeatureRecord:
    source_word: str
    target_word: str
    p: float
    log_p: float
    oov: bool  # target word fell back to the unknown id


@dataclass
class FeatureQuery:
    sentence: list[str]
    position: int
    target_word: str

    def __post_init__(self):
        if not 0 <= self.position < len(self.sentence):
            raise DataError(f"query position {self.position} outside sentence "
                            f"of length {len(self.sentence)}")


def parse_feature_queries(text: str) -> list[FeatureQuery]:
    """TSV: tokenized source sentence, 0-indexed position, target word."""
    queries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}")
        sentence, position, target = parts
        try:
            position = int(position)
        except ValueError as exc:
            raise DataError(f"line {lineno}: bad position {position!r}") from exc
        try:
            queries.append(FeatureQuery(sentence.split(), position, target))
        except DataError as exc:
            raise DataError(f"line {lineno}: {exc}") from exc
    return queries


def export_translation_features(ckpt: Checkpoint, queries: Sequence[FeatureQuery]) -> list[FeatureRecord]:
    """p and ln p of each queried target word under the translation head.

    Out-of-vocabulary targets are scored at the unknown id and flagged.
    """
    if ckpt.tgt_vocab is None:
        raise ValueError("checkpoint has no translation head")
    records = []
    cache: dict = {}
    for q in queries:
        ids = [ckpt.src_vocab.id(tok) for tok in q.sentence]
        key = tuple(ids)
        if key not in cache:
            cache[key] = encode_bidirectional(ckpt.encoder, ids)
        dist = head_distribution(ckpt.head, cache[key][q.position])
        tgt_id = ckpt.tgt_vocab.id(q.target_word)
        oov = q.target_word not in ckpt.tgt_vocab.id_of
        p = float(dist[tgt_id])
        records.append(FeatureRecord(q.sentence[q.position], q.target_word, p, math.log(p), oov))
    return records


def format_feature_records(records: Sequence[FeatureRecord]) -> str:
    lines = [
        f"{r.source_word}\t{r.target_word}\t{r.p:.12g}\t{r.log_p:.12g}\t{int(r.oov)}"
        for r in records
    ]
    return "\n".join(lines) + ("\n" if lines else "")

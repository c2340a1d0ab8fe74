"""Bidirectional peephole-LSTM encoder, softmax heads, and exact loss gradients.

The cell follows the classic peephole recurrences: input and forget gates
read the previous cell state, the output gate reads the freshly computed
one, and the token representation at position t is the concatenation of
the forward and backward hidden states there. Peephole weights are full
square matrices by default, with a "diagonal" option storing one weight
per cell coordinate.

Gradients are computed by hand (backpropagation through time) rather than
by an autodiff framework so they can be certified coordinate-by-coordinate
against the central-difference oracle in numkit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import groupby
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .corpus import TranslationInstance
from .numkit import affine, sigmoid, softmax_stable

# Field order is the declared parameter order for checkpoints, Adam state,
# and gradient checking. Do not reorder.
DIRECTION_FIELDS = (
    "w_xi", "w_hi", "w_ci",
    "w_xf", "w_hf", "w_cf",
    "w_xc", "w_hc",
    "w_xo", "w_ho", "w_co",
    "b_i", "b_f", "b_c", "b_o",
)


@dataclass
class LstmDirectionParams:
    """Weights for one scan direction; peephole arrays are (H, H) or (H,)."""

    w_xi: np.ndarray
    w_hi: np.ndarray
    w_ci: np.ndarray
    w_xf: np.ndarray
    w_hf: np.ndarray
    w_cf: np.ndarray
    w_xc: np.ndarray
    w_hc: np.ndarray
    w_xo: np.ndarray
    w_ho: np.ndarray
    w_co: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.b_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_xi.shape[1]

    @property
    def diagonal_peepholes(self) -> bool:
        return self.w_ci.ndim == 1


@dataclass
class SoftmaxHead:
    projection: np.ndarray  # (labels, encoder output width)
    bias: np.ndarray        # (labels,)

    @property
    def n_labels(self) -> int:
        return self.bias.shape[0]


@dataclass
class BiLstmEncoder:
    """Shared embedding table plus one parameter set per scan direction.

    backward=None configures the forward-only variant; its output is the
    bare forward hidden state.
    """

    embeddings: np.ndarray  # (vocab, d)
    forward: LstmDirectionParams
    backward: LstmDirectionParams | None

    @property
    def embed_dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.forward.hidden_size

    @property
    def output_dim(self) -> int:
        return self.hidden_size * (2 if self.backward is not None else 1)


def param_items(enc: BiLstmEncoder, head: SoftmaxHead) -> list[tuple[str, np.ndarray]]:
    """All trainable tensors in declared order: embedding, fwd.*, bwd.*, head."""
    items = [("embedding", enc.embeddings)]
    for prefix, params in (("fwd", enc.forward), ("bwd", enc.backward)):
        if params is None:
            continue
        items.extend((f"{prefix}.{name}", getattr(params, name)) for name in DIRECTION_FIELDS)
    items.append(("head.projection", head.projection))
    items.append(("head.bias", head.bias))
    return items


def get_flat_params(enc: BiLstmEncoder, head: SoftmaxHead) -> np.ndarray:
    return np.concatenate([arr.ravel() for _, arr in param_items(enc, head)])


def set_flat_params(enc: BiLstmEncoder, head: SoftmaxHead, flat: np.ndarray) -> None:
    offset = 0
    for _, arr in param_items(enc, head):
        n = arr.size
        arr.ravel()[:] = flat[offset : offset + n]
        offset += n
    if offset != flat.shape[0]:
        raise ValueError(f"flat vector has {flat.shape[0]} entries, model needs {offset}")


def lstm_step(
    p: LstmDirectionParams,
    x_t: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One cell update; returns (h_t, c_t). The output gate peeks at the new cell."""
    if x_t.shape[0] != p.input_size or h_prev.shape[0] != p.hidden_size or c_prev.shape[0] != p.hidden_size:
        raise ValueError(f"lstm_step dimension mismatch: x {x_t.shape}, h {h_prev.shape}, "
                         f"c {c_prev.shape} vs d={p.input_size}, d_h={p.hidden_size}")
    peep = (lambda w, c: w * c) if p.diagonal_peepholes else (lambda w, c: w @ c)
    i = sigmoid(p.w_xi @ x_t + p.w_hi @ h_prev + peep(p.w_ci, c_prev) + p.b_i)
    f = sigmoid(p.w_xf @ x_t + p.w_hf @ h_prev + peep(p.w_cf, c_prev) + p.b_f)
    c = f * c_prev + i * np.tanh(p.w_xc @ x_t + p.w_hc @ h_prev + p.b_c)
    o = sigmoid(p.w_xo @ x_t + p.w_ho @ h_prev + peep(p.w_co, c) + p.b_o)
    h = o * np.tanh(c)
    return h, c


class _Stacked(NamedTuple):
    """Gate-stacked view of one direction, rebuilt per call; gate order i, f, g, o."""

    wx: np.ndarray  # (4H, d)
    wh: np.ndarray  # (4H, H)
    w_ci: np.ndarray
    w_cf: np.ndarray
    w_co: np.ndarray
    b: np.ndarray   # (4H,)
    diagonal: bool


def _stack(p: LstmDirectionParams) -> _Stacked:
    return _Stacked(
        wx=np.vstack([p.w_xi, p.w_xf, p.w_xc, p.w_xo]),
        wh=np.vstack([p.w_hi, p.w_hf, p.w_hc, p.w_ho]),
        w_ci=p.w_ci, w_cf=p.w_cf, w_co=p.w_co,
        b=np.concatenate([p.b_i, p.b_f, p.b_c, p.b_o]),
        diagonal=p.diagonal_peepholes,
    )


class _Trace(NamedTuple):
    """Forward-scan intermediates retained for the backward pass."""

    xs: np.ndarray   # (n, d)
    i: np.ndarray    # (n, H) input gate
    f: np.ndarray    # forget gate
    g: np.ndarray    # tanh candidate
    o: np.ndarray    # output gate
    c: np.ndarray    # cell state
    tc: np.ndarray   # tanh(cell)
    h: np.ndarray    # hidden state


def _peep(w: np.ndarray, v: np.ndarray, diagonal: bool) -> np.ndarray:
    return w * v if diagonal else w @ v


def _peep_t(w: np.ndarray, v: np.ndarray, diagonal: bool) -> np.ndarray:
    return w * v if diagonal else w.T @ v


def _scan(stk: _Stacked, xs: np.ndarray) -> _Trace:
    # Normalize layout so reversed views and contiguous arrays with equal
    # values take the same matmul path (keeps scans bitwise reproducible).
    xs = np.ascontiguousarray(xs)
    n = xs.shape[0]
    hsz = stk.wh.shape[1]
    pre_x = xs @ stk.wx.T + stk.b
    i_a = np.empty((n, hsz)); f_a = np.empty((n, hsz)); g_a = np.empty((n, hsz))
    o_a = np.empty((n, hsz)); c_a = np.empty((n, hsz)); tc_a = np.empty((n, hsz))
    h_a = np.empty((n, hsz))
    h = np.zeros(hsz)
    c = np.zeros(hsz)
    for t in range(n):
        pre = pre_x[t] + stk.wh @ h
        i = sigmoid(pre[:hsz] + _peep(stk.w_ci, c, stk.diagonal))
        f = sigmoid(pre[hsz : 2 * hsz] + _peep(stk.w_cf, c, stk.diagonal))
        g = np.tanh(pre[2 * hsz : 3 * hsz])
        c = f * c + i * g
        o = sigmoid(pre[3 * hsz :] + _peep(stk.w_co, c, stk.diagonal))
        tc = np.tanh(c)
        h = o * tc
        i_a[t] = i; f_a[t] = f; g_a[t] = g; o_a[t] = o
        c_a[t] = c; tc_a[t] = tc; h_a[t] = h
    return _Trace(xs, i_a, f_a, g_a, o_a, c_a, tc_a, h_a)


def _scan_h(stk: _Stacked, xs: np.ndarray) -> np.ndarray:
    """Inference-only scan: hidden states without the backward-pass trace."""
    xs = np.ascontiguousarray(xs)
    n = xs.shape[0]
    hsz = stk.wh.shape[1]
    pre_x = xs @ stk.wx.T + stk.b
    h_a = np.empty((n, hsz))
    h = np.zeros(hsz)
    c = np.zeros(hsz)
    for t in range(n):
        pre = pre_x[t] + stk.wh @ h
        i = sigmoid(pre[:hsz] + _peep(stk.w_ci, c, stk.diagonal))
        f = sigmoid(pre[hsz : 2 * hsz] + _peep(stk.w_cf, c, stk.diagonal))
        c = f * c + i * np.tanh(pre[2 * hsz : 3 * hsz])
        o = sigmoid(pre[3 * hsz :] + _peep(stk.w_co, c, stk.diagonal))
        h = o * np.tanh(c)
        h_a[t] = h
    return h_a


class _DirectionGrads(NamedTuple):
    wx: np.ndarray
    wh: np.ndarray
    w_ci: np.ndarray
    w_cf: np.ndarray
    w_co: np.ndarray
    b: np.ndarray


def _scan_backward(stk: _Stacked, tr: _Trace, dh_seq: np.ndarray) -> tuple[np.ndarray, _DirectionGrads]:
    """BPTT through one direction given dL/dh at each step; returns (dL/dxs, grads).

    Initial h and c are constants (zero), so their gradients are dropped at t=0.
    """
    n, hsz = tr.h.shape
    dpre = np.empty((n, 4 * hsz))
    # c_prev / h_prev rows aligned with step t (zeros at t=0)
    c_prev = np.vstack([np.zeros(hsz), tr.c[:-1]])
    h_prev = np.vstack([np.zeros(hsz), tr.h[:-1]])
    dh = np.zeros(hsz)
    dc = np.zeros(hsz)
    for t in range(n - 1, -1, -1):
        i, f, g, o = tr.i[t], tr.f[t], tr.g[t], tr.o[t]
        dh_t = dh + dh_seq[t]
        dpre_o = dh_t * tr.tc[t] * o * (1.0 - o)
        # cell gradient collects the tanh path, the carry, and the output peephole
        dc_t = dh_t * o * (1.0 - tr.tc[t] ** 2) + dc + _peep_t(stk.w_co, dpre_o, stk.diagonal)
        dpre_i = dc_t * g * i * (1.0 - i)
        dpre_f = dc_t * c_prev[t] * f * (1.0 - f)
        dpre_g = dc_t * i * (1.0 - g * g)
        dpre[t, :hsz] = dpre_i
        dpre[t, hsz : 2 * hsz] = dpre_f
        dpre[t, 2 * hsz : 3 * hsz] = dpre_g
        dpre[t, 3 * hsz :] = dpre_o
        dh = stk.wh.T @ dpre[t]
        dc = dc_t * f + _peep_t(stk.w_ci, dpre_i, stk.diagonal) + _peep_t(stk.w_cf, dpre_f, stk.diagonal)
    dxs = dpre @ stk.wx
    if stk.diagonal:
        d_ci = (dpre[:, :hsz] * c_prev).sum(axis=0)
        d_cf = (dpre[:, hsz : 2 * hsz] * c_prev).sum(axis=0)
        d_co = (dpre[:, 3 * hsz :] * tr.c).sum(axis=0)
    else:
        d_ci = dpre[:, :hsz].T @ c_prev
        d_cf = dpre[:, hsz : 2 * hsz].T @ c_prev
        d_co = dpre[:, 3 * hsz :].T @ tr.c
    grads = _DirectionGrads(
        wx=dpre.T @ tr.xs,
        wh=dpre.T @ h_prev,
        w_ci=d_ci, w_cf=d_cf, w_co=d_co,
        b=dpre.sum(axis=0),
    )
    return dxs, grads


def encode_bidirectional(enc: BiLstmEncoder, source_ids: Sequence[int]) -> np.ndarray:
    """Context vectors for every position, one row per token.

    Row t is [forward h_t ; backward h_t] (just the forward state in
    forward-only mode); both scans start from zero state.
    """
    if len(source_ids) == 0:
        raise ValueError("cannot encode an empty sentence")
    xs = enc.embeddings[np.asarray(source_ids, dtype=np.intp)]
    h_fwd = _scan_h(_stack(enc.forward), xs)
    if enc.backward is None:
        return h_fwd
    h_bwd = _scan_h(_stack(enc.backward), xs[::-1])
    return np.hstack([h_fwd, h_bwd[::-1]])


def head_distribution(head: SoftmaxHead, h: np.ndarray) -> np.ndarray:
    """Probability over labels for one context vector."""
    return softmax_stable(affine(head.projection, h, head.bias))


def _grouped(batch: Iterable[TranslationInstance]):
    """Group instances sharing a source sentence so each sentence is scanned once."""
    keyed = sorted(batch, key=lambda inst: tuple(inst.source_ids))
    return groupby(keyed, key=lambda inst: tuple(inst.source_ids))


def batch_nll(enc: BiLstmEncoder, head: SoftmaxHead, batch: Sequence[TranslationInstance]) -> list[float]:
    """Per-instance negative log probabilities, in batch order (forward only)."""
    stk_f = _stack(enc.forward)
    stk_b = _stack(enc.backward) if enc.backward is not None else None
    nll = {}
    for ids, group in _grouped(batch):
        xs = enc.embeddings[np.asarray(ids, dtype=np.intp)]
        h_f = _scan_h(stk_f, xs)
        h_b = _scan_h(stk_b, xs[::-1])[::-1] if stk_b is not None else None
        for inst in group:
            h = h_f[inst.position_t] if h_b is None else np.concatenate(
                [h_f[inst.position_t], h_b[inst.position_t]])
            p = head_distribution(head, h)
            nll[id(inst)] = -_safe_log(p[inst.target_id])
    return [nll[id(inst)] for inst in batch]


def _safe_log(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf


def loss_and_gradients(
    enc: BiLstmEncoder,
    head: SoftmaxHead,
    batch: Sequence[TranslationInstance],
) -> tuple[float, dict[str, np.ndarray]]:
    """Summed negative log likelihood over the batch and its exact gradients.

    The gradient dict mirrors param_items; accumulation order is fixed
    (sentences sorted by id sequence, batch order within a sentence) so
    repeated calls are bitwise identical.
    """
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    vocab_size = enc.embeddings.shape[0]
    for inst in batch:
        if inst.target_id >= head.n_labels or inst.target_id < 0:
            raise ValueError(f"target id {inst.target_id} outside head of size {head.n_labels}")
        if max(inst.source_ids) >= vocab_size or min(inst.source_ids) < 0:
            raise ValueError("source id outside embedding table")

    grads = {name: np.zeros_like(arr) for name, arr in param_items(enc, head)}
    stk_f = _stack(enc.forward)
    stk_b = _stack(enc.backward) if enc.backward is not None else None
    hsz = enc.hidden_size
    total = 0.0

    for ids, group in _grouped(batch):
        idx = np.asarray(ids, dtype=np.intp)
        xs = enc.embeddings[idx]
        n = xs.shape[0]
        tr_f = _scan(stk_f, xs)
        tr_b = _scan(stk_b, xs[::-1]) if stk_b is not None else None
        dh_f = np.zeros((n, hsz))
        dh_b = np.zeros((n, hsz)) if tr_b is not None else None
        for inst in group:
            t = inst.position_t
            if tr_b is None:
                h = tr_f.h[t]
            else:
                h = np.concatenate([tr_f.h[t], tr_b.h[n - 1 - t]])
            p = head_distribution(head, h)
            total += -_safe_log(p[inst.target_id])
            du = p.copy()
            du[inst.target_id] -= 1.0
            grads["head.projection"] += np.outer(du, h)
            grads["head.bias"] += du
            dh = head.projection.T @ du
            dh_f[t] += dh[:hsz]
            if dh_b is not None:
                dh_b[n - 1 - t] += dh[hsz:]
        dxs, g_f = _scan_backward(stk_f, tr_f, dh_f)
        _accumulate_direction(grads, "fwd", g_f, hsz)
        if tr_b is not None:
            dxs_b, g_b = _scan_backward(stk_b, tr_b, dh_b)
            _accumulate_direction(grads, "bwd", g_b, hsz)
            dxs = dxs + dxs_b[::-1]
        np.add.at(grads["embedding"], idx, dxs)
    return total, grads


def _accumulate_direction(grads: dict[str, np.ndarray], prefix: str, g: _DirectionGrads, hsz: int) -> None:
    gate = {"i": slice(0, hsz), "f": slice(hsz, 2 * hsz), "c": slice(2 * hsz, 3 * hsz),
            "o": slice(3 * hsz, 4 * hsz)}
    for tag, sl in gate.items():
        grads[f"{prefix}.w_x{tag}"] += g.wx[sl]
        grads[f"{prefix}.w_h{tag}"] += g.wh[sl]
        grads[f"{prefix}.b_{tag}"] += g.b[sl]
    grads[f"{prefix}.w_ci"] += g.w_ci
    grads[f"{prefix}.w_cf"] += g.w_cf
    grads[f"{prefix}.w_co"] += g.w_co

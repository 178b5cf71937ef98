"""Composition functions: token-id sequences -> node embedding.

Two code paths compute the same GRU. ``gru_forward``/``gru_backward`` run
one sequence step by step and keep a readable trace. ``gru_forward_batch``/
``gru_backward_batch`` run a padded batch through the compiled kernels and
are what training uses. Tests check the two against each other.
"""
from dataclasses import dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels

KINDS = ("sum", "mean", "gru", "multi_gru_sum")
GRU_NAMES = ("W_r", "W_z", "W", "U_r", "U_z", "U")


@dataclass(frozen=True)
class EncoderSpec:
    kind: str
    d: int
    h: int = 0
    n: int = 1
    shared: bool = True  # multi_gru_sum only: one GRU for all n sequences

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}; expected one of {KINDS}")
        if self.d < 1:
            raise ValueError("token dimension must be >= 1")
        if self.kind in ("gru", "multi_gru_sum") and self.h < 1:
            raise ValueError("GRU encoders need hidden dimension >= 1")
        if self.kind == "multi_gru_sum" and self.n < 1:
            raise ValueError("multi_gru_sum needs n >= 1")

    @property
    def out_dim(self):
        return self.d if self.kind in ("sum", "mean") else self.h

    @property
    def arity(self):
        return self.n if self.kind == "multi_gru_sum" else 1

    def param_shapes(self) -> Dict[str, Tuple[int, int]]:
        if self.kind in ("sum", "mean"):
            return {}
        shapes = {name: (self.h, self.d) if name.startswith("W") else (self.h, self.h) for name in GRU_NAMES}
        if self.kind == "multi_gru_sum" and not self.shared:
            return {f"{i}/{k}": s for i in range(self.n) for k, s in shapes.items()}
        return shapes

    def to_dict(self):
        return {"kind": self.kind, "d": self.d, "h": self.h, "n": self.n, "shared": self.shared}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], int(d["d"]), int(d.get("h", 0)), int(d.get("n", 1)), bool(d.get("shared", True)))


@dataclass
class GruParams:
    """GRU weights without biases; ``W*`` are h x d, ``U*`` are h x h."""

    W_r: np.ndarray
    W_z: np.ndarray
    W: np.ndarray
    U_r: np.ndarray
    U_z: np.ndarray
    U: np.ndarray

    @property
    def hidden(self):
        return self.W.shape[0]

    def as_dict(self, prefix=""):
        return {prefix + f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d, prefix=""):
        return cls(*(d[prefix + name] for name in GRU_NAMES))

    @classmethod
    def zeros_like(cls, p):
        return cls(*(np.zeros_like(getattr(p, name)) for name in GRU_NAMES))


@dataclass
class GruTrace:
    ids: Tuple[int, ...]
    x: np.ndarray  # (n, d) input embeddings
    r: np.ndarray  # (n, h)
    z: np.ndarray
    c: np.ndarray  # candidate state h~
    h: np.ndarray  # (n + 1, h); row 0 is the zero initial state


def init_table(vocab_size, d, rng, dtype=np.float64):
    return rng.uniform(-0.5 / d, 0.5 / d, size=(vocab_size, d)).astype(dtype)


def init_gru(d, h, rng, dtype=np.float64):
    mats = []
    for name in GRU_NAMES:
        fan_in = d if name.startswith("W") else h
        bound = np.sqrt(6.0 / (fan_in + h))
        mats.append(rng.uniform(-bound, bound, size=(h, fan_in)).astype(dtype))
    return GruParams(*mats)


def init_encoder(spec: EncoderSpec, rng, dtype=np.float64) -> Dict[str, np.ndarray]:
    """Fresh parameters for ``spec`` keyed by name relative to the encoder."""
    if spec.kind in ("sum", "mean"):
        return {}
    if spec.kind == "multi_gru_sum" and not spec.shared:
        out = {}
        for i in range(spec.n):
            out.update(init_gru(spec.d, spec.h, rng, dtype).as_dict(f"{i}/"))
        return out
    return init_gru(spec.d, spec.h, rng, dtype).as_dict()


def init_params(spec: EncoderSpec, vocab_size: int, seed: int, dtype=np.float64):
    """(token table, GruParams or None) for a single encoder."""
    rng = np.random.default_rng(seed)
    table = init_table(vocab_size, spec.d, rng, dtype)
    if spec.kind in ("sum", "mean"):
        return table, None
    return table, init_gru(spec.d, spec.h, rng, dtype)


def _sigmoid(x):
    # exp form keeps relative accuracy for very negative x (the tanh form
    # cancels there); the clamp keeps exp finite, as in the compiled kernel
    lim = 80.0 if np.asarray(x).dtype == np.float32 else 700.0
    one = np.asarray(1, dtype=np.asarray(x).dtype)
    return one / (one + np.exp(-np.clip(x, -lim, lim)))


# single-sequence reference path

def gru_forward(p: GruParams, table, ids):
    ids = tuple(int(i) for i in ids)
    if not ids:
        raise ValueError("GRU input sequence must be non-empty")
    n, hd = len(ids), p.hidden
    x = table[list(ids)]
    r = np.empty((n, hd), dtype=table.dtype)
    z = np.empty_like(r)
    c = np.empty_like(r)
    h = np.zeros((n + 1, hd), dtype=table.dtype)
    for t in range(n):
        hp = h[t]
        r[t] = _sigmoid(p.W_r @ x[t] + p.U_r @ hp)
        z[t] = _sigmoid(p.W_z @ x[t] + p.U_z @ hp)
        c[t] = np.tanh(p.W @ x[t] + p.U @ (r[t] * hp))
        h[t + 1] = (1.0 - z[t]) * hp + z[t] * c[t]
    return h[n].copy(), GruTrace(ids, x, r, z, c, h)


def gru_backward(p: GruParams, table, trace: GruTrace, grad_out):
    """Gradients of ``<grad_out, h_n>`` w.r.t. the GRU weights and input rows.

    Returns ``(GruParams of gradients, ids, rows)`` where ``rows[j]`` is the
    gradient for table row ``ids[j]`` (unique ids, sorted).
    """
    grad_out = np.asarray(grad_out)
    if grad_out.shape != (p.hidden,):
        raise ValueError(f"grad_out has shape {grad_out.shape}, expected ({p.hidden},)")
    g = GruParams.zeros_like(p)
    n = len(trace.ids)
    dx = np.zeros_like(trace.x)
    dh = grad_out.astype(trace.x.dtype, copy=True)
    for t in range(n - 1, -1, -1):
        hp, r, z, c, x = trace.h[t], trace.r[t], trace.z[t], trace.c[t], trace.x[t]
        dz = dh * (c - hp)
        dc = dh * z
        dh_prev = dh * (1.0 - z)
        dc_pre = dc * (1.0 - c * c)
        g.W += np.outer(dc_pre, x)
        g.U += np.outer(dc_pre, r * hp)
        d_rh = p.U.T @ dc_pre
        dr = d_rh * hp
        dh_prev += d_rh * r
        dz_pre = dz * z * (1.0 - z)
        dr_pre = dr * r * (1.0 - r)
        g.W_z += np.outer(dz_pre, x)
        g.U_z += np.outer(dz_pre, hp)
        g.W_r += np.outer(dr_pre, x)
        g.U_r += np.outer(dr_pre, hp)
        dh_prev += p.U_z.T @ dz_pre + p.U_r.T @ dr_pre
        dx[t] = p.W.T @ dc_pre + p.W_z.T @ dz_pre + p.W_r.T @ dr_pre
        dh = dh_prev
    ids, rows = _merge_rows(np.asarray(trace.ids, dtype=np.int64), dx)
    return g, ids, rows


def _merge_rows(ids, rows):
    """Sum rows that share an id; returns sorted unique ids and summed rows."""
    uniq, inv = np.unique(ids, return_inverse=True)
    out = np.zeros((len(uniq), rows.shape[1]), dtype=rows.dtype)
    kernels.scatter_add_rows(out, inv.astype(np.int64), np.ascontiguousarray(rows))
    return uniq, out


merge_rows = _merge_rows


def pool_forward(kind, table, ids):
    ids = list(ids)
    if not ids:
        raise ValueError("pooling input must be non-empty")
    out = table[ids].sum(axis=0)
    if kind == "mean":
        out = out / len(ids)
    elif kind != "sum":
        raise ValueError(f"unknown pooling kind {kind!r}")
    return out


def pool_backward(kind, ids, grad_out):
    ids = np.asarray(ids, dtype=np.int64)
    rows = np.tile(np.asarray(grad_out), (len(ids), 1))
    if kind == "mean":
        rows = rows / len(ids)
    return _merge_rows(ids, rows)


def _gru_set(spec, params, i):
    if spec.kind == "multi_gru_sum" and not spec.shared:
        return GruParams.from_dict(params, f"{i}/")
    return GruParams.from_dict(params)


def compose(spec: EncoderSpec, params, table, node_inputs):
    """Node embedding from one token sequence (or ``n`` for multi_gru_sum).

    ``params`` is the encoder's relative-name dict, a :class:`GruParams`,
    or None for pooling encoders.
    """
    if isinstance(params, GruParams):
        params = params.as_dict()
    if spec.kind in ("sum", "mean", "gru"):
        if len(node_inputs) != 1 or isinstance(node_inputs[0], (int, np.integer)):
            raise ValueError(f"{spec.kind} encoder takes exactly one sequence")
    elif len(node_inputs) != spec.n:
        raise ValueError(f"multi_gru_sum expects {spec.n} sequences, got {len(node_inputs)}")
    if spec.kind in ("sum", "mean"):
        return pool_forward(spec.kind, table, node_inputs[0])
    if spec.kind == "gru":
        return gru_forward(GruParams.from_dict(params), table, node_inputs[0])[0]
    out = np.zeros(spec.h, dtype=table.dtype)
    for i, seq in enumerate(node_inputs):
        out += gru_forward(_gru_set(spec, params, i), table, seq)[0]
    return out


def compose_backward(spec: EncoderSpec, params, table, node_inputs, grad_out):
    """Single-node reference gradients: (relative-name param grads, ids, rows)."""
    if isinstance(params, GruParams):
        params = params.as_dict()
    if spec.kind in ("sum", "mean"):
        ids, rows = pool_backward(spec.kind, node_inputs[0], grad_out)
        return {}, ids, rows
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    all_ids, all_rows = [], []
    for i, seq in enumerate(node_inputs):
        p = _gru_set(spec, params, i)
        _, trace = gru_forward(p, table, seq)
        g, ids, rows = gru_backward(p, table, trace, grad_out)
        prefix = f"{i}/" if spec.kind == "multi_gru_sum" and not spec.shared else ""
        for k, v in g.as_dict(prefix).items():
            grads[k] += v
        all_ids.append(ids)
        all_rows.append(rows)
    ids, rows = _merge_rows(np.concatenate(all_ids), np.concatenate(all_rows))
    return grads, ids, rows


# batched path used by training and bulk embedding

def pad_sequences(seqs: Sequence[Sequence[int]]):
    """Time-major ids ``(T, B)`` and int8 mask ``(T, B)``; padding id is 0."""
    lengths = np.fromiter((len(s) for s in seqs), dtype=np.int64, count=len(seqs))
    if len(seqs) and lengths.min() < 1:
        raise ValueError("sequences must be non-empty")
    T = int(lengths.max()) if len(seqs) else 0
    ids = np.zeros((T, len(seqs)), dtype=np.int64)
    for b, s in enumerate(seqs):
        ids[: len(s), b] = s
    mask = (np.arange(T)[:, None] < lengths[None, :]).astype(np.int8)
    return ids, mask


@dataclass
class GruBatchCache:
    ids: np.ndarray  # (T, B)
    mask: np.ndarray  # (T, B) int8
    x: np.ndarray  # (T, B, d)
    r: np.ndarray  # (T, B, h)
    z: np.ndarray
    c: np.ndarray
    rh: np.ndarray
    h_prev: np.ndarray  # (T, B, h) state entering step t


def gru_forward_batch(p: GruParams, table, seqs, kern=None):
    """Final hidden states ``(B, h)`` of a batch of variable-length sequences."""
    kern = kern or kernels
    ids, mask = pad_sequences(seqs)
    T, B = ids.shape
    hd = p.hidden
    dt = table.dtype
    x = table[ids]
    W_rz = np.concatenate([p.W_r, p.W_z])
    U_rz_T = np.ascontiguousarray(np.concatenate([p.U_r, p.U_z]).T)
    U_T = np.ascontiguousarray(p.U.T)
    pre_rz = x @ W_rz.T
    pre_c = x @ p.W.T
    r = np.empty((T, B, hd), dtype=dt)
    z = np.empty_like(r)
    c = np.empty_like(r)
    rh = np.empty_like(r)
    h_prev = np.empty_like(r)
    h = np.zeros((B, hd), dtype=dt)
    for t in range(T):
        h_prev[t] = h
        a_rz = pre_rz[t] + h @ U_rz_T
        kern.gru_fwd_gates(a_rz, h_prev[t], r[t], z[t], rh[t])
        a_c = pre_c[t] + rh[t] @ U_T
        h = np.empty((B, hd), dtype=dt)
        kern.gru_fwd_blend(a_c, z[t], h_prev[t], mask[t], c[t], h)
    return h, GruBatchCache(ids, mask, x, r, z, c, rh, h_prev)


def gru_backward_batch(p: GruParams, cache: GruBatchCache, grad_out, kern=None):
    """Gradients of ``sum(grad_out * H)``: (GruParams, ids, rows) with merged rows."""
    kern = kern or kernels
    T, B = cache.ids.shape
    hd = p.hidden
    dt = cache.x.dtype
    U_rz = np.concatenate([p.U_r, p.U_z])
    dpre_rz = np.empty((T, B, 2 * hd), dtype=dt)
    dpre_c = np.empty((T, B, hd), dtype=dt)
    dh = np.ascontiguousarray(grad_out, dtype=dt)
    dh_prev = np.empty((B, hd), dtype=dt)
    dr_pre = np.empty((B, hd), dtype=dt)
    dz_pre = np.empty((B, hd), dtype=dt)
    for t in range(T - 1, -1, -1):
        kern.gru_bwd_blend(dh, cache.mask[t], cache.z[t], cache.c[t], cache.h_prev[t], dpre_c[t], dz_pre, dh_prev)
        d_rh = dpre_c[t] @ p.U
        kern.gru_bwd_reset(d_rh, cache.r[t], cache.h_prev[t], dr_pre, dh_prev)
        dpre_rz[t, :, :hd] = dr_pre
        dpre_rz[t, :, hd:] = dz_pre
        dh = dh_prev + dpre_rz[t] @ U_rz
    flat_rz = dpre_rz.reshape(-1, 2 * hd)
    flat_c = dpre_c.reshape(-1, hd)
    x = cache.x.reshape(-1, cache.x.shape[-1])
    dW_rz = flat_rz.T @ x
    dU_rz = flat_rz.T @ cache.h_prev.reshape(-1, hd)
    grads = GruParams(
        dW_rz[:hd], dW_rz[hd:], flat_c.T @ x,
        dU_rz[:hd], dU_rz[hd:], flat_c.T @ cache.rh.reshape(-1, hd),
    )
    W_rz = np.concatenate([p.W_r, p.W_z])
    dx = flat_rz @ W_rz + flat_c @ p.W
    keep = cache.mask.reshape(-1) != 0
    ids, rows = _merge_rows(cache.ids.reshape(-1)[keep], dx[keep])
    return grads, ids, rows


@dataclass
class EncodeCache:
    spec: EncoderSpec
    n_nodes: int
    parts: list  # per GRU set: (GruParams, cache, index) or pooling ids/mask


def encode_batch(spec: EncoderSpec, params: Dict[str, np.ndarray], table, node_inputs, kern=None):
    """Embeddings ``(B, out_dim)`` for a list of per-node sequence tuples."""
    B = len(node_inputs)
    for inp in node_inputs:
        if len(inp) != spec.arity:
            raise ValueError(f"{spec.kind} encoder expects {spec.arity} sequence(s) per node, got {len(inp)}")
    if spec.kind in ("sum", "mean"):
        ids, mask = pad_sequences([inp[0] for inp in node_inputs])
        m = mask.astype(table.dtype)[:, :, None]
        out = (table[ids] * m).sum(axis=0)
        lengths = mask.sum(axis=0).astype(table.dtype)
        if spec.kind == "mean":
            out = out / lengths[:, None]
        return out, EncodeCache(spec, B, [(ids, mask, lengths)])
    if spec.kind == "gru" or spec.shared:
        p = GruParams.from_dict(params)
        seqs = [s for inp in node_inputs for s in inp]
        h, cache = gru_forward_batch(p, table, seqs, kern)
        out = h.reshape(B, spec.arity, spec.h).sum(axis=1) if spec.arity > 1 else h
        return out, EncodeCache(spec, B, [(p, cache, None)])
    out = np.zeros((B, spec.h), dtype=table.dtype)
    parts = []
    for i in range(spec.n):
        p = GruParams.from_dict(params, f"{i}/")
        h, cache = gru_forward_batch(p, table, [inp[i] for inp in node_inputs], kern)
        out += h
        parts.append((p, cache, i))
    return out, EncodeCache(spec, B, parts)


def encode_batch_backward(cache: EncodeCache, grad_out, kern=None):
    """(relative-name param grads, ids, rows) for ``sum(grad_out * out)``."""
    spec = cache.spec
    if spec.kind in ("sum", "mean"):
        ids, mask, lengths = cache.parts[0]
        g = grad_out / lengths[:, None] if spec.kind == "mean" else grad_out
        rows = np.broadcast_to(g[None, :, :], ids.shape + (g.shape[1],)).reshape(-1, g.shape[1])
        keep = mask.reshape(-1) != 0
        ids, rows = _merge_rows(ids.reshape(-1)[keep], rows[keep])
        return {}, ids, rows
    grads = {}
    all_ids, all_rows = [], []
    for p, c, i in cache.parts:
        g_out = np.repeat(grad_out, spec.arity, axis=0) if i is None and spec.arity > 1 else grad_out
        g, ids, rows = gru_backward_batch(p, c, g_out, kern)
        grads.update(g.as_dict("" if i is None else f"{i}/"))
        all_ids.append(ids)
        all_rows.append(rows)
    if len(all_ids) == 1:
        return grads, all_ids[0], all_rows[0]
    ids, rows = _merge_rows(np.concatenate(all_ids), np.concatenate(all_rows))
    return grads, ids, rows

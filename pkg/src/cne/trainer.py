"""Siamese max-margin training of composition encoders."""
import logging
from dataclasses import dataclass, field, fields
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .encoders import EncoderSpec, compose, encode_batch, encode_batch_backward, init_encoder, init_table, merge_rows
from .graph import DEFAULT_NODE_TYPE, Graph
from .sampler import ExampleStream, TrainingExample, epoch_stream

log = logging.getLogger(__name__)

COS_EPS = 1e-12
TABLE = "table"


@dataclass
class TrainConfig:
    walk_length: int = 20
    window: int = 2
    negatives: int = 4
    walks_per_node: int = 10
    margin: float = 1.0
    token_dim: int = 256
    hidden_dim: int = 512
    lr: float = 8e-4
    batch: int = 256
    epochs: int = 1
    seed: int = 0
    share_phi: bool = False
    edge_type_weights: Dict[str, float] = field(default_factory=dict)
    encoder: str = "gru"
    multi_n: int = 4
    multi_shared: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("walk_length", "window", "negatives", "token_dim", "batch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.walks_per_node < 0 or self.epochs < 0:
            raise ValueError("walks_per_node and epochs must be non-negative")
        if self.margin <= 0 or self.lr <= 0:
            raise ValueError("margin and lr must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        if any(w <= 0 for w in self.edge_type_weights.values()):
            raise ValueError("edge_type_weights must be positive")

    def encoder_spec(self, kind=None):
        kind = kind or self.encoder
        return EncoderSpec(kind, self.token_dim, self.hidden_dim if kind in ("gru", "multi_gru_sum") else 0,
                           self.multi_n if kind == "multi_gru_sum" else 1, self.multi_shared)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


class MissingAttributesError(KeyError):
    pass


class NodeInputs:
    """Token-id sequences and node type for every node id.

    ``seqs[v]`` is a tuple of sequences (one per sub-encoder); ``None``
    marks a node without attributes.
    """

    def __init__(self, seqs, types=None, labels=None):
        self.seqs = list(seqs)
        self.types = list(types) if types is not None else [DEFAULT_NODE_TYPE] * len(self.seqs)
        self.labels = labels

    @classmethod
    def from_graph(cls, g: Graph, seqs):
        return cls(seqs, g.node_type, g.labels)

    def __len__(self):
        return len(self.seqs)

    def get(self, v):
        s = self.seqs[v] if 0 <= v < len(self.seqs) else None
        if s is None:
            name = self.labels[v] if self.labels is not None and 0 <= v < len(self.labels) else v
            raise MissingAttributesError(f"node {name!r} has no attribute sequences")
        return s


class ModelState:
    """All trainable tensors plus Adam state.

    ``params`` holds one token table (``"table"``) and every encoder tensor
    under ``"<edge_type>/<side>/<node_type>/<name>"``. ``routes`` maps
    (edge_type, side, node_type) to that prefix; with shared encoders both
    sides map to the side-1 prefix.
    """

    def __init__(self, params, specs, routes, margin=1.0, step=0, m=None, v=None):
        self.params: Dict[str, np.ndarray] = params
        self.specs: Dict[str, EncoderSpec] = specs
        self.routes: Dict[tuple, str] = routes
        self.margin = float(margin)
        self.step = int(step)
        self.m: Dict[str, np.ndarray] = m if m is not None else {}
        self.v: Dict[str, np.ndarray] = v if v is not None else {}

    @property
    def table(self):
        return self.params[TABLE]

    @property
    def edge_types(self):
        return sorted({et for et, _, _ in self.routes})

    def encoder(self, edge_type, side, node_type):
        """(spec, relative-name params) of one encoder."""
        try:
            prefix = self.routes[(edge_type, side, node_type)]
        except KeyError:
            raise KeyError(f"no encoder for edge type {edge_type!r}, side {side}, node type {node_type!r}") from None
        spec = self.specs[node_type]
        cut = len(prefix) + 1
        return spec, {k[cut:]: v for k, v in self.params.items() if k.startswith(prefix + "/")}

    def copy(self):
        cp = lambda d: {k: v.copy() for k, v in d.items()}
        return ModelState(cp(self.params), dict(self.specs), dict(self.routes), self.margin, self.step,
                          cp(self.m), cp(self.v))

    def equals(self, other):
        if (self.specs, self.routes, self.margin, self.step) != (other.specs, other.routes, other.margin, other.step):
            return False
        for a, b in ((self.params, other.params), (self.m, other.m), (self.v, other.v)):
            if a.keys() != b.keys():
                return False
            if not all(a[k].dtype == b[k].dtype and np.array_equal(a[k], b[k]) for k in a):
                return False
        return True


def init_state(specs, vocab_size, edge_types, seed=0, share_phi=False, dtype="float64", margin=1.0):
    """Fresh parameters for every (edge_type, side, node_type) encoder.

    ``specs`` maps node type -> :class:`EncoderSpec`, or is a single spec
    used for the default node type. All encoders share one token table.
    """
    if isinstance(specs, EncoderSpec):
        specs = {DEFAULT_NODE_TYPE: specs}
    dims = {s.d for s in specs.values()}
    if len(dims) != 1:
        raise ValueError("all encoders must share the token embedding width")
    widths = {s.out_dim for s in specs.values()}
    if len(widths) != 1:
        raise ValueError("encoder output widths must match so cosine scores are defined")
    dt = np.dtype(dtype)
    routes = {}
    for et in edge_types:
        for nt in sorted(specs):
            routes[(et, 1, nt)] = f"{et}/1/{nt}"
            routes[(et, 2, nt)] = f"{et}/1/{nt}" if share_phi else f"{et}/2/{nt}"
    children = np.random.SeedSequence(seed).spawn(1 + len(routes))
    params = {TABLE: init_table(vocab_size, dims.pop(), np.random.default_rng(children[0]), dt)}
    done = set()
    for child, key in zip(children[1:], sorted(routes)):
        prefix = routes[key]
        if prefix in done:
            continue
        done.add(prefix)
        for name, arr in init_encoder(specs[key[2]], np.random.default_rng(child), dt).items():
            params[f"{prefix}/{name}"] = arr
    return ModelState(params, dict(specs), routes, margin)


def cosine(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError("cosine of vectors with different shapes")
    nx = max(float(np.linalg.norm(x)), COS_EPS)
    ny = max(float(np.linalg.norm(y)), COS_EPS)
    return float(np.dot(x, y)) / (nx * ny)


def hinge_loss(pos, negs, m=1.0):
    """sum_k max(0, m - pos + negs[k])."""
    if m <= 0:
        raise ValueError("margin must be positive")
    return float(sum(max(0.0, m - pos + n) for n in negs))


def _cos_rows(x, y):
    """Row-wise cosine of broadcastable (..., o) arrays plus the pieces for its gradient."""
    nx = np.maximum(np.linalg.norm(x, axis=-1), COS_EPS)
    ny = np.maximum(np.linalg.norm(y, axis=-1), COS_EPS)
    dot = (x * y).sum(axis=-1)
    return dot / (nx * ny), nx, ny


def _cos_grads(x, y, cos, nx, ny, gscale):
    """d(gscale * cos(x, y)) w.r.t. x and y; the eps guard freezes the norm."""
    inv = (gscale / (nx * ny))[..., None]
    gx = inv * y
    gy = inv * x
    live_x = (nx > COS_EPS)[..., None]
    live_y = (ny > COS_EPS)[..., None]
    gx = gx - np.where(live_x, (gscale * cos / (nx * nx))[..., None] * x, 0.0)
    gy = gy - np.where(live_y, (gscale * cos / (ny * ny))[..., None] * y, 0.0)
    return gx, gy


@dataclass
class Gradients:
    dense: Dict[str, np.ndarray]
    row_ids: np.ndarray
    rows: np.ndarray

    def is_finite(self):
        return bool(np.isfinite(self.rows).all() and all(np.isfinite(g).all() for g in self.dense.values()))

    def scaled(self, s):
        return Gradients({k: v * s for k, v in self.dense.items()}, self.row_ids, self.rows * s)

    def table_dense(self, shape, dtype):
        out = np.zeros(shape, dtype=dtype)
        out[self.row_ids] = self.rows
        return out


def _encode_side(state, inputs, edge_type, side, nodes):
    """Encode distinct ``nodes`` on one side, grouped by node type.

    Returns (embeddings aligned with ``nodes``, per-group caches).
    """
    types = np.array([inputs.types[v] for v in nodes], dtype=object)
    out = None
    groups = []
    for nt in sorted(set(types)):
        rows = np.flatnonzero(types == nt)
        spec, params = state.encoder(edge_type, side, nt)
        emb, cache = encode_batch(spec, params, state.table, [inputs.get(int(nodes[i])) for i in rows])
        if out is None:
            out = np.empty((len(nodes), emb.shape[1]), dtype=emb.dtype)
        out[rows] = emb
        groups.append((nt, rows, cache))
    return out, groups


def batch_loss_and_gradients(state: ModelState, batch: ExampleStream, inputs: NodeInputs, reduce="mean"):
    """Hinge loss of a batch and its gradients (mean over examples by default).

    Returns ``(per-example losses, Gradients)``.
    """
    et = batch.edge_type
    B = len(batch)
    m = state.margin
    left = np.unique(batch.centers)
    right = np.unique(np.concatenate([batch.positives, batch.negatives.reshape(-1)]))
    emb1, groups1 = _encode_side(state, inputs, et, 1, left)
    emb2, groups2 = _encode_side(state, inputs, et, 2, right)
    ci = np.searchsorted(left, batch.centers)
    pi = np.searchsorted(right, batch.positives)
    ni = np.searchsorted(right, batch.negatives)
    V, P, N = emb1[ci], emb2[pi], emb2[ni]
    pos, nv, np_ = _cos_rows(V, P)
    neg, nvn, nn = _cos_rows(V[:, None, :], N)
    arg = m - pos[:, None] + neg
    active = arg > 0
    losses = np.where(active, arg, 0.0).sum(axis=1)

    scale = 1.0 / B if reduce == "mean" else 1.0
    g_pos = -active.sum(axis=1).astype(V.dtype) * scale
    g_neg = active.astype(V.dtype) * scale
    dV, dP = _cos_grads(V, P, pos, nv, np_, g_pos)
    dVn, dN = _cos_grads(V[:, None, :], N, neg, nvn, nn, g_neg)
    dV = dV + dVn.sum(axis=1)

    d_emb1 = np.zeros_like(emb1)
    d_emb2 = np.zeros_like(emb2)
    kernels.scatter_add_rows(d_emb1, ci, np.ascontiguousarray(dV))
    kernels.scatter_add_rows(d_emb2, pi, np.ascontiguousarray(dP))
    kernels.scatter_add_rows(d_emb2, ni.reshape(-1), np.ascontiguousarray(dN.reshape(-1, dN.shape[-1])))

    dense = {}
    ids, rows = [], []
    for side, groups, d_emb in ((1, groups1, d_emb1), (2, groups2, d_emb2)):
        for nt, sel, cache in groups:
            g, i, r = encode_batch_backward(cache, d_emb[sel])
            prefix = state.routes[(et, side, nt)]
            for k, v in g.items():
                name = f"{prefix}/{k}"
                if name in dense:
                    dense[name] = dense[name] + v
                else:
                    dense[name] = v
            ids.append(i)
            rows.append(r)
    row_ids, table_rows = merge_rows(np.concatenate(ids), np.concatenate(rows))
    return losses, Gradients(dense, row_ids, table_rows)


def example_gradients(state: ModelState, ex: TrainingExample, inputs: NodeInputs):
    """(loss, Gradients) of a single example's hinge loss."""
    losses, grads = batch_loss_and_gradients(state, ExampleStream.from_examples([ex]), inputs)
    return float(losses[0]), grads


def example_loss(state: ModelState, ex: TrainingExample, inputs: NodeInputs):
    """Hinge loss evaluated node by node through the reference encoders."""
    emb = lambda v, side: compose(*state.encoder(ex.edge_type, side, inputs.types[v]), state.table, inputs.get(v))
    v = emb(ex.center, 1)
    pos = cosine(v, emb(ex.positive, 2))
    negs = [cosine(v, emb(u, 2)) for u in ex.negatives]
    return hinge_loss(pos, negs, state.margin)


def mean_loss(state, examples: ExampleStream, inputs, batch=1024):
    """Average hinge loss over ``examples`` without touching the state."""
    if len(examples) == 0:
        return 0.0
    total = 0.0
    for b in examples.batches(batch):
        losses, _ = batch_loss_and_gradients(state, b, inputs)
        total += float(losses.sum())
    return total / len(examples)


def adam_step(state: ModelState, grads: Gradients, lr, beta1=0.9, beta2=0.999, eps=1e-8, frozen=()):
    """Bias-corrected Adam; the token table is updated lazily on touched rows only.

    Parameters whose name starts with any prefix in ``frozen`` are skipped.
    """
    if not grads.is_finite():
        raise FloatingPointError("non-finite gradient; update skipped")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t

    def skip(name):
        return any(name == f or name.startswith(f + "/") for f in frozen)

    for name, g in grads.dense.items():
        if skip(name):
            continue
        p = state.params[name]
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    if len(grads.row_ids) and not skip(TABLE):
        p = state.params[TABLE]
        m = state.m.setdefault(TABLE, np.zeros_like(p))
        v = state.v.setdefault(TABLE, np.zeros_like(p))
        ids, g = grads.row_ids, grads.rows
        m_rows = beta1 * m[ids] + (1.0 - beta1) * g
        v_rows = beta2 * v[ids] + (1.0 - beta2) * (g * g)
        m[ids] = m_rows
        v[ids] = v_rows
        p[ids] -= lr * (m_rows / c1) / (np.sqrt(v_rows / c2) + eps)
    return state


def interleave(streams: Mapping[str, List], weights: Mapping[str, float]):
    """Merge per-type batch lists; type t's i-th batch sits at (i + 0.5) / w_t."""
    keyed = []
    for order, (et, batches) in enumerate(streams.items()):
        w = float(weights[et])
        for i, b in enumerate(batches):
            keyed.append(((i + 0.5) / w, order, i, b))
    keyed.sort(key=lambda k: k[:3])
    return [k[3] for k in keyed]


def _type_seed(seed, epoch, index):
    return int(np.random.SeedSequence([seed, epoch, index]).generate_state(1)[0])


def train(config: TrainConfig, g: Graph, inputs: NodeInputs, specs=None, state=None,
          edge_types=None, frozen=(), loss_log=None, vocab_size=None):
    """Train for ``config.epochs`` epochs and return the state.

    One example stream per edge type per epoch; batches from different types
    are interleaved in proportion to ``edge_type_weights`` (default: edge
    counts). ``loss_log`` (a list) receives ``(epoch, edge_type, mean_loss)``.
    """
    all_types = list(g.edge_types)
    edge_types = list(edge_types) if edge_types is not None else all_types
    if state is None:
        if specs is None:
            specs = config.encoder_spec()
        if vocab_size is None:
            vocab_size = 1 + max(i for s in inputs.seqs if s for seq in s for i in seq)
        state = init_state(specs, vocab_size, all_types, config.seed, config.share_phi, config.dtype, config.margin)
    for v in g.nodes():
        inputs.get(v)
    counts = {et: 0 for et in all_types}
    for _, _, et in g.edges:
        counts[et] += 1
    weights = {et: config.edge_type_weights.get(et, max(counts.get(et, 0), 1)) for et in edge_types}
    node_types = sorted(set(g.node_type))
    pool = {nt: g.nodes_of_type(nt) for nt in node_types} if len(node_types) > 1 else None

    for epoch in range(1, config.epochs + 1):
        streams = {}
        for et in edge_types:
            idx = all_types.index(et) if et in all_types else len(all_types)
            s = epoch_stream(g, config.walks_per_node, config.walk_length, config.window, config.negatives,
                             et, _type_seed(config.seed, epoch, idx), pool)
            streams[et] = list(s.batches(config.batch))
        totals = {et: 0.0 for et in edge_types}
        seen = {et: 0 for et in edge_types}
        for batch in interleave(streams, weights):
            losses, grads = batch_loss_and_gradients(state, batch, inputs)
            adam_step(state, grads, config.lr, frozen=frozen)
            totals[batch.edge_type] += float(losses.sum())
            seen[batch.edge_type] += len(batch)
        for et in edge_types:
            mean = totals[et] / seen[et] if seen[et] else 0.0
            log.info("epoch %d edge_type %s mean_loss %.6f (%d examples)", epoch, et, mean, seen[et])
            if loss_log is not None:
                loss_log.append((epoch, et, mean))
    return state


def write_loss_log(rows, path, header=None):
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("epoch,edge_type,mean_loss\n")
        for epoch, et, loss in rows:
            fh.write(f"{epoch},{et},{loss:.9g}\n")

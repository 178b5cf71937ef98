"""Random-walk positives and uniform negatives."""
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np

from . import kernels
from .graph import DEFAULT_EDGE_TYPE, Graph


class TrainingExample(NamedTuple):
    center: int
    positive: int
    negatives: tuple
    edge_type: str


def random_walk(g: Graph, start: int, length: int, edge_type=DEFAULT_EDGE_TYPE, rng=None) -> List[int]:
    """One truncated walk of at most ``length`` nodes, uniform over out-neighbors."""
    if length < 1:
        raise ValueError("walk length must be >= 1")
    rng = np.random.default_rng(rng)
    walk = [start]
    v = start
    while len(walk) < length:
        nbrs = g.neighbors(v, edge_type)
        if not nbrs:
            break
        v = nbrs[int(rng.integers(len(nbrs)))]
        walk.append(v)
    return walk


def window_pairs(walk, w: int):
    """Ordered (center, context) pairs within ``w`` positions, skipping equal nodes."""
    if w < 1:
        raise ValueError("window must be >= 1")
    pairs = []
    n = len(walk)
    for i in range(n):
        for j in range(max(0, i - w), min(n, i + w + 1)):
            if i != j and walk[i] != walk[j]:
                pairs.append((walk[i], walk[j]))
    return pairs


def sample_negatives(nodes, k: int, rng=None):
    """``k`` uniform draws with replacement; true neighbors are not filtered."""
    nodes = np.asarray(nodes)
    if len(nodes) == 0 or k < 1:
        raise ValueError("need a non-empty node set and k >= 1")
    rng = np.random.default_rng(rng)
    return nodes[rng.integers(0, len(nodes), size=k)].tolist()


def walk_batch(g: Graph, starts, length: int, edge_type=DEFAULT_EDGE_TYPE, rng=None):
    """Walks from every start node via the kernel; returns (walks, lengths).

    ``walks`` is ``(len(starts), length)`` padded with -1.
    """
    rng = np.random.default_rng(rng)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    indptr, indices = g.csr(edge_type)
    uniforms = rng.random((len(starts), max(length - 1, 1)))
    walks = np.empty((len(starts), length), dtype=np.int64)
    lengths = np.empty(len(starts), dtype=np.int64)
    kernels.random_walks(indptr, indices, starts, uniforms, walks, lengths)
    return walks, lengths


def pairs_from_walks(walks, lengths, w: int):
    n = kernels.count_window_pairs(walks, lengths, w)
    out = np.empty((n, 2), dtype=np.int64)
    written = kernels.window_pairs(walks, lengths, w, out)
    assert written == n
    return out


@dataclass
class ExampleStream:
    """Shuffled training examples of one edge type, stored column-wise."""

    centers: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray  # (n, K)
    edge_type: str

    def __len__(self):
        return len(self.centers)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i):
        return TrainingExample(int(self.centers[i]), int(self.positives[i]),
                               tuple(int(x) for x in self.negatives[i]), self.edge_type)

    def batches(self, size):
        for lo in range(0, len(self), size):
            hi = lo + size
            yield ExampleStream(self.centers[lo:hi], self.positives[lo:hi], self.negatives[lo:hi], self.edge_type)

    @classmethod
    def from_examples(cls, examples, edge_type=None):
        examples = list(examples)
        if edge_type is None:
            edge_type = examples[0].edge_type if examples else DEFAULT_EDGE_TYPE
        k = len(examples[0].negatives) if examples else 0
        return cls(
            np.array([e.center for e in examples], dtype=np.int64),
            np.array([e.positive for e in examples], dtype=np.int64),
            np.array([e.negatives for e in examples], dtype=np.int64).reshape(len(examples), k),
            edge_type,
        )


def epoch_stream(g: Graph, walks_per_node: int, walk_length: int, window: int, negatives: int,
                 edge_type=DEFAULT_EDGE_TYPE, seed=0, negative_pool: Optional[dict] = None) -> ExampleStream:
    """All window pairs from ``walks_per_node`` walks per node, with fresh negatives.

    Negatives are drawn from the whole node set, or, when ``negative_pool``
    maps node types to candidate arrays, from the pool of the positive's type.
    Output order is a seeded shuffle.
    """
    ss = np.random.SeedSequence(seed)
    walk_rng, neg_rng, shuffle_rng = (np.random.default_rng(s) for s in ss.spawn(3))
    starts = np.tile(np.arange(g.num_nodes, dtype=np.int64), walks_per_node)
    if len(starts) == 0:
        empty = np.empty(0, dtype=np.int64)
        return ExampleStream(empty, empty, np.empty((0, negatives), dtype=np.int64), edge_type)
    walks, lengths = walk_batch(g, starts, walk_length, edge_type, walk_rng)
    pairs = pairs_from_walks(walks, lengths, window)
    n = len(pairs)
    if negative_pool is None:
        negs = neg_rng.integers(0, g.num_nodes, size=(n, negatives), dtype=np.int64)
    else:
        negs = np.empty((n, negatives), dtype=np.int64)
        ctx_types = np.array([g.node_type[u] for u in pairs[:, 1]], dtype=object)
        for ntype in sorted(negative_pool):
            pool = np.asarray(negative_pool[ntype], dtype=np.int64)
            rows = np.flatnonzero(ctx_types == ntype)
            negs[rows] = pool[neg_rng.integers(0, len(pool), size=(len(rows), negatives))]
    order = shuffle_rng.permutation(n)
    return ExampleStream(pairs[order, 0].copy(), pairs[order, 1].copy(), negs[order], edge_type)


def dump_walks(g: Graph, walks, lengths, fh):
    for walk, n in zip(walks, lengths):
        fh.write(" ".join(g.labels[v] for v in walk[:n]) + "\n")

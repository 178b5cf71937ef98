"""Link prediction by ranking the whole node set."""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .encoders import encode_batch
from .graph import EdgeSet, Graph
from .trainer import COS_EPS, ModelState, NodeInputs

DEFAULT_KS = (1, 5, 10, 20, 50, 100)
DEFAULT_BOUNDARIES = (0, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024)


class EvaluationError(ValueError):
    pass


@dataclass
class EmbeddingMatrix:
    nodes: np.ndarray  # node ids, ascending
    vectors: np.ndarray  # (len(nodes), width)
    side: int
    edge_type: str

    def __post_init__(self):
        self._row = {int(v): i for i, v in enumerate(self.nodes)}

    def __getitem__(self, node):
        return self.vectors[self._row[int(node)]]

    @property
    def width(self):
        return self.vectors.shape[1]


def embed_all(state: ModelState, inputs: NodeInputs, nodes=None, side=1, edge_type=None,
              chunk=2048, workers=1):
    """Encode ``nodes`` (default: every node in ``inputs``) with one encoder side.

    Only attributes are read, so nodes that never appeared in training are
    embedded exactly like the rest. Chunks are encoded in fixed order, so the
    result does not depend on ``workers``.
    """
    if edge_type is None:
        edge_type = state.edge_types[0]
    nodes = np.arange(len(inputs), dtype=np.int64) if nodes is None else np.unique(np.asarray(nodes, dtype=np.int64))
    types = [inputs.types[v] for v in nodes]
    jobs = []
    for nt in sorted(set(types)):
        rows = np.array([i for i, t in enumerate(types) if t == nt], dtype=np.int64)
        spec, params = state.encoder(edge_type, side, nt)
        for lo in range(0, len(rows), chunk):
            jobs.append((spec, params, rows[lo:lo + chunk]))

    def run(job):
        spec, params, rows = job
        return encode_batch(spec, params, state.table, [inputs.get(int(nodes[i])) for i in rows])[0]

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    width = results[0].shape[1] if results else state.specs[sorted(state.specs)[0]].out_dim
    vectors = np.zeros((len(nodes), width), dtype=state.table.dtype)
    for (_, _, rows), emb in zip(jobs, results):
        vectors[rows] = emb
    return EmbeddingMatrix(nodes, vectors, side, edge_type)


def cosine_scores(query, vectors):
    """Cosine of ``query`` against every row, with the same eps guard as training.

    einsum (not BLAS) keeps the per-row arithmetic identical for every row,
    so equal candidates always tie exactly.
    """
    nq = max(float(np.sqrt(np.einsum("j,j->", query, query))), COS_EPS)
    nr = np.maximum(np.sqrt(np.einsum("ij,ij->i", vectors, vectors)), COS_EPS)
    return np.einsum("ij,j->i", vectors, query) / (nq * nr)


def order_by_score(nodes, scores):
    """Descending score, ties broken by ascending node id."""
    return np.asarray(nodes)[np.lexsort((nodes, -scores))]


def rank_candidates(query, matrix: EmbeddingMatrix, exclude=()):
    keep = ~np.isin(matrix.nodes, np.fromiter(exclude, dtype=np.int64))
    nodes = matrix.nodes[keep]
    scores = cosine_scores(query, matrix.vectors[keep])
    return order_by_score(nodes, scores).tolist()


def precision_recall_at_k(ranked, truth, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    if not truth:
        raise ValueError("truth must be non-empty")
    hits = len(set(ranked[:k]) & set(truth))
    return hits / k, hits / len(truth)


def rank_histogram(ranks, boundaries=DEFAULT_BOUNDARIES):
    """Counts per ``[b_i, b_{i+1})`` bucket plus a final overflow bucket."""
    b = np.asarray(boundaries)
    counts = np.zeros(len(b), dtype=np.int64)
    r = np.asarray(ranks, dtype=np.int64)
    if len(r) and r.min() < 0:
        raise ValueError("ranks must be >= 0")
    if len(r):
        idx = np.searchsorted(b, r, side="right") - 1
        np.add.at(counts, idx, 1)
    return counts


@dataclass
class RankingReport:
    ks: List[int]
    precision: Dict[int, float]
    recall: Dict[int, float]
    queries: List[int]
    truth: Dict[int, List[int]]
    ranks: Dict[int, List[int]]  # 0-based positions of each true neighbor, ascending
    boundaries: List[int] = field(default_factory=lambda: list(DEFAULT_BOUNDARIES))
    histogram: List[int] = field(default_factory=list)

    def per_node(self, k):
        """[(node, P@k, R@k)] for every query."""
        out = []
        for q in self.queries:
            hits = sum(1 for r in self.ranks[q] if r < k)
            out.append((q, hits / k, hits / len(self.truth[q])))
        return out


def held_out_truth(test: EdgeSet, directed: bool, edge_type=None):
    truth: Dict[int, set] = {}
    for s, d, t in test:
        if edge_type is not None and t != edge_type:
            continue
        truth.setdefault(s, set()).add(d)
        if not directed:
            truth.setdefault(d, set()).add(s)
    return truth


def evaluate_lp(state: ModelState, train_g: Graph, test: EdgeSet, inputs: NodeInputs, ks=DEFAULT_KS,
                sample_nodes=1000, seed=0, edge_type=None, mode="asym", query_nodes=None,
                boundaries=DEFAULT_BOUNDARIES, workers=1):
    """Precision@k / Recall@k of held-out edges, ranking the whole node set.

    Up to ``sample_nodes`` nodes with at least one held-out neighbor are
    drawn with ``seed``; each is scored against every other node (query side
    uses encoder side 1, candidates side 2; ``mode="sym"`` averages both
    orientations). Only the query itself is excluded from its ranking.
    """
    if edge_type is None:
        edge_type = test.edges[0][2] if len(test) else state.edge_types[0]
    truth = held_out_truth(test, train_g.directed, edge_type)
    eligible = sorted(truth)
    if query_nodes is not None:
        allowed = set(int(v) for v in query_nodes)
        eligible = [v for v in eligible if v in allowed]
    if not eligible:
        raise EvaluationError("no test node has a held-out neighbor")
    rng = np.random.default_rng(seed)
    if len(eligible) > sample_nodes:
        queries = sorted(rng.choice(eligible, size=sample_nodes, replace=False).tolist())
    else:
        queries = eligible
    ks = sorted(int(k) for k in ks)

    n = len(inputs)
    all_nodes = np.arange(n, dtype=np.int64)
    if mode not in ("asym", "sym"):
        raise ValueError("mode must be 'asym' or 'sym'")
    # both sides over the full node set: a node's vector never depends on
    # which other nodes were sampled as queries
    q1 = cand1 = embed_all(state, inputs, None, 1, edge_type, workers=workers)
    q2 = cand2 = embed_all(state, inputs, None, 2, edge_type, workers=workers)

    ranks = {}
    prec = {k: 0.0 for k in ks}
    rec = {k: 0.0 for k in ks}
    all_ranks = []
    for q in queries:
        scores = cosine_scores(q1[q], cand2.vectors)
        if mode == "sym":
            scores = 0.5 * (scores + cosine_scores(q2[q], cand1.vectors))
        keep = all_nodes != q
        order = order_by_score(all_nodes[keep], scores[keep])
        pos = np.empty(n, dtype=np.int64)
        pos[order] = np.arange(len(order))
        t = sorted(truth[q])
        r = sorted(int(pos[u]) for u in t)
        ranks[q] = r
        all_ranks.extend(r)
        for k in ks:
            hits = sum(1 for x in r if x < k)
            prec[k] += hits / k
            rec[k] += hits / len(t)
    nq = len(queries)
    return RankingReport(
        ks,
        {k: prec[k] / nq for k in ks},
        {k: rec[k] / nq for k in ks},
        queries,
        {q: sorted(truth[q]) for q in queries},
        ranks,
        list(boundaries),
        rank_histogram(all_ranks, boundaries).tolist(),
    )


def write_report(report: RankingReport, path, header=None):
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("k,precision,recall\n")
        for k in report.ks:
            fh.write(f"{k},{report.precision[k]:.9g},{report.recall[k]:.9g}\n")
        fh.write("bucket_lo,bucket_hi,count\n")
        b = report.boundaries
        for i, count in enumerate(report.histogram):
            hi = b[i + 1] if i + 1 < len(b) else "inf"
            fh.write(f"{b[i]},{hi},{count}\n")


def write_rank_dump(report: RankingReport, path, labels=None):
    with open(path, "w", encoding="utf-8") as fh:
        for q in report.queries:
            node = labels[q] if labels is not None else q
            fh.write(json.dumps({"node": node, "rank_list_of_truth": report.ranks[q]}) + "\n")

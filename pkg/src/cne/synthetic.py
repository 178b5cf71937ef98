"""Planted-block graphs whose edges and attribute text both follow block membership."""
import numpy as np

from .graph import DEFAULT_EDGE_TYPE, Graph


def _block_edges(rng, blocks, p_in, p_out):
    n = len(blocks)
    prob = np.where(blocks[:, None] == blocks[None, :], p_in, p_out)
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    return [tuple(e) for e in np.argwhere(upper).tolist()]


def planted_blocks(n_nodes=200, n_blocks=2, p_in=0.1, p_out=0.005, pool_size=50, noise_size=20,
                   tokens_per_node=8, seed=0, edge_types=None):
    """Undirected block graph with block-specific token pools.

    Each block owns ``pool_size`` tokens (``b<block>_w<i>``); ``noise_size``
    tokens (``noise<i>``) are shared. A node's text is ``tokens_per_node``
    draws from its block pool plus the noise pool. ``edge_types`` optionally
    maps an edge type to ``(p_in, p_out)``; each type is sampled independently
    over the same blocks.

    Returns ``(graph, texts, blocks)`` with ``texts`` keyed by node label.
    """
    rng = np.random.default_rng(seed)
    blocks = np.repeat(np.arange(n_blocks), -(-n_nodes // n_blocks))[:n_nodes]
    labels = [f"n{i}" for i in range(n_nodes)]
    noise = [f"noise{i}" for i in range(noise_size)]
    texts = {}
    for v in range(n_nodes):
        vocab = [f"b{blocks[v]}_w{i}" for i in range(pool_size)] + noise
        picks = rng.integers(0, len(vocab), size=tokens_per_node)
        texts[labels[v]] = " ".join(vocab[i] for i in picks)
    if edge_types is None:
        edge_types = {DEFAULT_EDGE_TYPE: (p_in, p_out)}
    edges = []
    for et, (pi, po) in edge_types.items():
        edges += [(s, d, et) for s, d in _block_edges(rng, blocks, pi, po)]
    return Graph(labels, edges, directed=False), texts, blocks


def write_fixture(graph, texts, edges_path, attrs_path, header=None):
    with open(edges_path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for s, d, t in graph.edges:
            fh.write(f"{graph.labels[s]}\t{graph.labels[d]}\t{t}\n")
    with open(attrs_path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for label in graph.labels:
            fh.write(f"{label}\t{texts[label]}\n")

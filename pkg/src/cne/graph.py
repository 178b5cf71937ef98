"""Attributed graph storage, TSV loaders and edge holdout splits."""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_EDGE_TYPE = "default"
DEFAULT_NODE_TYPE = "node"

Edge = Tuple[int, int, str]


class ParseError(ValueError):
    """Malformed input line; ``lineno`` is 1-based."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}: line {lineno}: {message}")


class Graph:
    """Immutable graph over dense node ids ``0..N-1``.

    ``labels[i]`` is the external label of node ``i``. Edges are stored once,
    in the orientation they were given; for undirected graphs the adjacency
    holds both directions. Adjacency lists are deduplicated and loop-free.
    """

    def __init__(
        self,
        labels: Sequence[str],
        edges: Iterable[Edge],
        directed: bool = False,
        node_types: Optional[Sequence[str]] = None,
    ):
        self.labels = tuple(labels)
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self.index) != len(self.labels):
            raise ValueError("duplicate node labels")
        self.directed = bool(directed)
        n = len(self.labels)
        if node_types is None:
            node_types = [DEFAULT_NODE_TYPE] * n
        if len(node_types) != n:
            raise ValueError("node_types length does not match node count")
        self.node_type = tuple(node_types)

        seen = set()
        kept = []
        adjacency: Dict[str, List[List[int]]] = {}
        for src, dst, etype in edges:
            src, dst = int(src), int(dst)
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"edge ({src}, {dst}) has an endpoint outside the node set")
            if src == dst:
                raise ValueError(f"self-loop on node {src}")
            key = (src, dst, etype) if self.directed else (min(src, dst), max(src, dst), etype)
            if key in seen:
                continue
            seen.add(key)
            kept.append((src, dst, etype))
            adj = adjacency.get(etype)
            if adj is None:
                adj = adjacency[etype] = [[] for _ in range(n)]
            adj[src].append(dst)
            if not self.directed:
                adj[dst].append(src)
        self.edges: Tuple[Edge, ...] = tuple(kept)
        self._adj = {t: tuple(tuple(a) for a in lists) for t, lists in adjacency.items()}
        self._csr = {}

    @property
    def num_nodes(self):
        return len(self.labels)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def edge_types(self):
        """Edge types in order of first appearance."""
        return tuple(self._adj)

    def nodes(self):
        return range(self.num_nodes)

    def neighbors(self, v, edge_type=DEFAULT_EDGE_TYPE):
        adj = self._adj.get(edge_type)
        if adj is None:
            return ()
        return adj[v]

    def degree(self, v, edge_type=None):
        """Out-degree (plus in-degree when directed) over one or all edge types."""
        types = self._adj if edge_type is None else [edge_type]
        deg = 0
        for t in types:
            deg += len(self.neighbors(v, t))
        if self.directed:
            deg += sum(1 for s, d, t in self.edges if d == v and (edge_type is None or t == edge_type))
        return deg

    def degrees(self):
        """Total degree of every node across all edge types, as an array."""
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for s, d, _ in self.edges:
            deg[s] += 1
            deg[d] += 1
        return deg

    def csr(self, edge_type=DEFAULT_EDGE_TYPE):
        """Out-adjacency of one edge type as ``(indptr, indices)`` int64 arrays."""
        cached = self._csr.get(edge_type)
        if cached is not None:
            return cached
        adj = self._adj.get(edge_type, ())
        indptr = np.zeros(self.num_nodes + 1, dtype=np.int64)
        for v, nbrs in enumerate(adj):
            indptr[v + 1] = len(nbrs)
        np.cumsum(indptr, out=indptr)
        indices = np.fromiter((u for nbrs in adj for u in nbrs), dtype=np.int64, count=int(indptr[-1]))
        self._csr[edge_type] = (indptr, indices)
        return indptr, indices

    def nodes_of_type(self, node_type):
        return np.array([i for i, t in enumerate(self.node_type) if t == node_type], dtype=np.int64)

    def with_edges(self, edges):
        """New graph with the same nodes, types and directedness but other edges."""
        return Graph(self.labels, edges, self.directed, self.node_type)

    def adjacency_sets(self, edge_type=DEFAULT_EDGE_TYPE):
        return [set(self.neighbors(v, edge_type)) for v in self.nodes()]

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Graph({self.num_nodes} nodes, {self.num_edges} edges, {kind}, types={list(self.edge_types)})"


@dataclass(frozen=True)
class EdgeSet:
    edges: Tuple[Edge, ...]
    role: str = "test"

    def __len__(self):
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)

    def of_type(self, edge_type):
        return EdgeSet(tuple(e for e in self.edges if e[2] == edge_type), self.role)


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line


def load_edge_list(path, directed=False, default_edge_type=DEFAULT_EDGE_TYPE, node_types=None):
    """Read a ``src<TAB>dst[<TAB>edge_type]`` file into a :class:`Graph`.

    Node ids are interned in order of first appearance. Self-loops are
    skipped; the count is kept on ``graph.self_loops_skipped``. ``node_types``
    optionally maps labels to node types (unlisted nodes get the default).
    """
    labels: Dict[str, int] = {}
    edges = []
    loops = 0
    for lineno, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) not in (2, 3) or not all(f.strip() for f in fields):
            raise ParseError(path, lineno, f"expected 2 or 3 tab-separated fields, got {len(fields)}")
        src, dst = fields[0].strip(), fields[1].strip()
        etype = fields[2].strip() if len(fields) == 3 else default_edge_type
        for lab in (src, dst):
            if lab not in labels:
                labels[lab] = len(labels)
        if src == dst:
            loops += 1
            continue
        edges.append((labels[src], labels[dst], etype))
    if loops:
        log.warning("%s: skipped %d self-loop(s)", path, loops)
    names = list(labels)
    types = None
    if node_types:
        types = [node_types.get(lab, DEFAULT_NODE_TYPE) for lab in names]
    g = Graph(names, edges, directed, types)
    g.self_loops_skipped = loops
    return g


def write_edge_list(g: Graph, path):
    with open(path, "w", encoding="utf-8") as fh:
        for s, d, t in g.edges:
            fh.write(f"{g.labels[s]}\t{g.labels[d]}\t{t}\n")


class AttributeMap(dict):
    """label -> raw text; ``duplicates`` counts overwritten labels."""

    duplicates = 0


def load_node_attributes(path):
    attrs = AttributeMap()
    for lineno, line in _data_lines(path):
        label, sep, text = line.partition("\t")
        if not sep:
            raise ParseError(path, lineno, "missing tab between node label and text")
        label = label.strip()
        if label in attrs:
            attrs.duplicates += 1
        attrs[label] = text
    if attrs.duplicates:
        log.warning("%s: %d duplicate node label(s), later lines win", path, attrs.duplicates)
    return attrs


def load_node_types(path):
    """Read ``node_label<TAB>node_type`` lines."""
    out = {}
    for lineno, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) != 2:
            raise ParseError(path, lineno, "expected node_label<TAB>node_type")
        out[fields[0].strip()] = fields[1].strip()
    return out


def split_edges(g: Graph, holdout_fraction: float, seed: int):
    """Hold out ``round(fraction * |E|)`` edges uniformly at random.

    Returns the training graph (all nodes kept, even if isolated) and the
    held-out :class:`EdgeSet`. Both keep the original edge order.
    """
    if not 0.0 <= holdout_fraction <= 1.0:
        raise ValueError("holdout_fraction must lie in [0, 1]")
    n_edges = g.num_edges
    n_test = int(math.floor(holdout_fraction * n_edges + 0.5))
    rng = np.random.default_rng(seed)
    chosen = np.zeros(n_edges, dtype=bool)
    chosen[rng.choice(n_edges, size=n_test, replace=False)] = True
    train = [e for e, c in zip(g.edges, chosen) if not c]
    test = tuple(e for e, c in zip(g.edges, chosen) if c)
    return g.with_edges(train), EdgeSet(test, "test")


def hold_out_nodes(g: Graph, nodes):
    """Move every edge touching ``nodes`` into the test set."""
    held = set(int(v) for v in nodes)
    train = [e for e in g.edges if e[0] not in held and e[1] not in held]
    test = tuple(e for e in g.edges if e[0] in held or e[1] in held)
    return g.with_edges(train), EdgeSet(test, "test")


def unseen_test_nodes(train: Graph, test: EdgeSet):
    deg = train.degrees()
    out = set()
    for s, d, _ in test:
        for v in (s, d):
            if deg[v] == 0:
                out.add(v)
    return out

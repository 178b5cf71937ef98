import itertools
from collections import Counter, deque

import numpy as np
import pytest
from scipy import stats

from cne.graph import Graph
from cne.sampler import (ExampleStream, TrainingExample, epoch_stream, pairs_from_walks, random_walk,
                         sample_negatives, walk_batch, window_pairs)

from conftest import path_graph


def star():
    return Graph(["c", "p", "q"], [(0, 1, "default"), (0, 2, "default")])


def test_walk_forced_path():
    g = Graph(["a", "b"], [(0, 1, "default")])
    assert random_walk(g, 0, 3, rng=0) == [0, 1, 0]


def test_walk_isolated_node():
    g = Graph(["x", "a", "b"], [(1, 2, "default")])
    assert random_walk(g, 0, 20, rng=0) == [0]


def test_walk_stops_at_sink():
    g = path_graph(4, directed=True)
    assert random_walk(g, 1, 20, rng=0) == [1, 2, 3]
    walks, lengths = walk_batch(g, [1], 20, rng=0)
    assert lengths.tolist() == [3]
    assert walks[0, :3].tolist() == [1, 2, 3] and (walks[0, 3:] == -1).all()


def test_walk_rejects_zero_length():
    with pytest.raises(ValueError):
        random_walk(star(), 0, 0)


def test_star_walk_is_fair():
    # 10^4 seeded walks; each leaf expected 5000 times, sd 50
    n = 10_000
    counts = Counter(random_walk(star(), 0, 2, rng=s)[1] for s in range(n))
    assert set(counts) == {1, 2}
    chi2 = sum((counts[v] - n / 2) ** 2 / (n / 2) for v in (1, 2))
    # chi-square with 1 dof: mean 1, sd sqrt(2)
    assert chi2 < 1 + 3 * np.sqrt(2)
    assert abs(counts[1] - n / 2) < 3 * np.sqrt(n / 4)


def test_star_walk_batch_is_fair():
    n = 10_000
    walks, lengths = walk_batch(star(), np.zeros(n, dtype=np.int64), 2, rng=1)
    assert (lengths == 2).all()
    hits = int((walks[:, 1] == 1).sum())
    assert abs(hits - n / 2) < 3 * np.sqrt(n / 4)


def test_walk_batch_steps_follow_edges():
    rng = np.random.default_rng(5)
    pairs = {(int(a), int(b)) for a, b in rng.integers(0, 30, size=(80, 2)) if a != b}
    g = Graph([str(i) for i in range(30)], [(a, b, "default") for a, b in pairs], directed=True)
    walks, lengths = walk_batch(g, np.arange(30), 12, rng=2)
    adj = g.adjacency_sets()
    for walk, n in zip(walks, lengths):
        for a, b in zip(walk[:n - 1], walk[1:n]):
            assert b in adj[a]
        if n < 12:
            assert not adj[walk[n - 1]]
        assert (walk[n:] == -1).all()


def test_window_pairs_examples():
    assert window_pairs([1, 2, 3, 4], 2) == [(1, 2), (1, 3), (2, 1), (2, 3), (2, 4), (3, 1), (3, 2), (3, 4),
                                             (4, 2), (4, 3)]
    assert window_pairs(["a"], 5) == []
    assert window_pairs(["a", "b", "a"], 1) == [("a", "b"), ("b", "a"), ("b", "a"), ("a", "b")]


def closed_form_pair_count(walk, w):
    """2 * sum over offsets d<=w of positions whose partner d steps on differs."""
    n = len(walk)
    return 2 * sum(walk[i] != walk[i + d] for d in range(1, min(w, n - 1) + 1) for i in range(n - d))


def brute_pairs(walk, w):
    return Counter((walk[i], walk[j]) for i, j in itertools.product(range(len(walk)), repeat=2)
                   if i != j and abs(i - j) <= w and walk[i] != walk[j])


def test_window_pairs_exhaustive(backend):
    """Every walk of length <= 6 over 3 symbols, every w <= 3."""
    for n in range(1, 7):
        walks = np.array(list(itertools.product(range(3), repeat=n)), dtype=np.int64)
        lengths = np.full(len(walks), n, dtype=np.int64)
        for w in (1, 2, 3):
            total = 0
            for walk in walks.tolist():
                pairs = window_pairs(walk, w)
                expected = closed_form_pair_count(walk, w)
                assert len(pairs) == expected
                assert Counter(pairs) == brute_pairs(walk, w)
                total += expected
            assert backend.count_window_pairs(walks, lengths, w) == total
            out = np.empty((total, 2), dtype=np.int64)
            assert backend.window_pairs(walks, lengths, w, out) == total
            ref = [p for walk in walks.tolist() for p in window_pairs(walk, w)]
            assert [tuple(p) for p in out.tolist()] == ref


def test_distinct_walk_pair_count_bound():
    for l, w in itertools.product(range(1, 21), range(1, 5)):
        walk = list(range(l))
        bound = 2 * (l * w - w * (w + 1) // 2) if l > w else l * (l - 1)
        assert len(window_pairs(walk, w)) == bound


def test_pairs_from_padded_walks():
    walks = np.array([[0, 1, 2, -1], [3, -1, -1, -1]], dtype=np.int64)
    pairs = pairs_from_walks(walks, np.array([3, 1], dtype=np.int64), 1)
    assert pairs.tolist() == [[0, 1], [1, 0], [1, 2], [2, 1]]


def test_negatives_single_node():
    assert sample_negatives(["a"], 4, 0) == ["a", "a", "a", "a"]


def test_negatives_deterministic():
    nodes = list(range(50))
    assert sample_negatives(nodes, 8, 3) == sample_negatives(nodes, 8, 3)


def test_negative_marginals_uniform():
    """10^5 draws of K=4 over 1000 nodes: inclusion frequency ~ 1-(1-1/1000)^4 each."""
    V, K, draws = 1000, 4, 100_000
    rng = np.random.default_rng(11)
    included = np.zeros(V, dtype=np.int64)
    for _ in range(100):
        batch = np.array([sample_negatives(np.arange(V), K, rng) for _ in range(draws // 100)])
        for row in batch:
            included[np.unique(row)] += 1
    p = 1 - (1 - 1 / V) ** K
    mean, sd = draws * p, np.sqrt(draws * p * (1 - p))
    z = (included - mean) / sd
    # aggregate: the mean frequency sits within 3 standard errors
    assert abs(z.mean()) < 3 / np.sqrt(V)
    # per node: 3 sigma, Bonferroni-widened for 1000 simultaneous nodes
    per_node = stats.norm.isf(0.0027 / 2 / V)
    assert np.abs(z).max() < per_node
    # and the chi-square of the counts is within 3 sigma of its mean (V-1 dof)
    chi2 = float(((included - mean) ** 2 / mean).sum())
    assert abs(chi2 - (V - 1)) < 3 * np.sqrt(2 * (V - 1))


def test_two_node_stream_has_four_examples():
    g = Graph(["a", "b"], [(0, 1, "default")])
    s = epoch_stream(g, 1, 2, 1, 1, seed=0)
    assert len(s) == 4
    assert sorted(zip(s.centers.tolist(), s.positives.tolist())) == [(0, 1), (0, 1), (1, 0), (1, 0)]
    assert s.negatives.shape == (4, 1)


def test_zero_walks_gives_empty_stream():
    s = epoch_stream(path_graph(4), 0, 5, 2, 3, seed=0)
    assert len(s) == 0 and s.negatives.shape == (0, 3)


def test_stream_deterministic():
    g = path_graph(12)
    a = epoch_stream(g, 3, 8, 2, 4, seed=42)
    b = epoch_stream(g, 3, 8, 2, 4, seed=42)
    for x, y in ((a.centers, b.centers), (a.positives, b.positives), (a.negatives, b.negatives)):
        assert x.tobytes() == y.tobytes()
    c = epoch_stream(g, 3, 8, 2, 4, seed=43)
    assert c.centers.tobytes() != a.centers.tobytes()


def bfs_dist(g, src):
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        for u in g.neighbors(v):
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def test_stream_pairs_within_window():
    rng = np.random.default_rng(8)
    pairs = {(int(a), int(b)) for a, b in rng.integers(0, 25, size=(50, 2)) if a != b}
    g = Graph([str(i) for i in range(25)], [(a, b, "default") for a, b in pairs])
    w, l, r = 2, 10, 2
    s = epoch_stream(g, r, l, w, 4, seed=1)
    dist = {v: bfs_dist(g, v) for v in g.nodes()}
    for v, u in zip(s.centers.tolist(), s.positives.tolist()):
        assert u != v
        assert dist[v][u] <= w
    assert len(s) <= r * g.num_nodes * 2 * (l * w - w * (w + 1) // 2)
    assert s.negatives.min() >= 0 and s.negatives.max() < g.num_nodes


def test_stream_typed_negative_pool():
    types = ["user"] * 5 + ["item"] * 5
    edges = [(u, 5 + (u + k) % 5, "default") for u in range(5) for k in range(2)]
    g = Graph([str(i) for i in range(10)], edges, node_types=types)
    pool = {"user": g.nodes_of_type("user"), "item": g.nodes_of_type("item")}
    s = epoch_stream(g, 2, 6, 2, 4, seed=0, negative_pool=pool)
    for u, negs in zip(s.positives, s.negatives):
        assert {types[x] for x in negs} == {types[u]}


def test_stream_examples_round_trip():
    g = path_graph(5)
    s = epoch_stream(g, 1, 4, 1, 2, seed=3)
    ex = list(s)
    assert all(isinstance(e, TrainingExample) and len(e.negatives) == 2 for e in ex)
    back = ExampleStream.from_examples(ex)
    assert back.centers.tolist() == s.centers.tolist()
    assert back.negatives.tolist() == s.negatives.tolist()
    sizes = [len(b) for b in s.batches(3)]
    assert sum(sizes) == len(s) and max(sizes) <= 3

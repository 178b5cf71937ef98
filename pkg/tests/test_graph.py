import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cne.graph import (EdgeSet, Graph, ParseError, hold_out_nodes, load_edge_list, load_node_attributes,
                       load_node_types, split_edges, unseen_test_nodes, write_edge_list)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def labelled_adj(g, et="default"):
    return {g.labels[v]: {g.labels[u] for u in g.neighbors(v, et)} for v in g.nodes()}


def test_load_two_lines_undirected(tmp_path):
    g = load_edge_list(write(tmp_path, "e.tsv", "a\tb\nb\tc\n"))
    assert g.num_nodes == 3
    assert g.labels == ("a", "b", "c")
    assert labelled_adj(g)["b"] == {"a", "c"}
    assert labelled_adj(g)["a"] == {"b"}


def test_duplicate_edges_collapse(tmp_path):
    g = load_edge_list(write(tmp_path, "e.tsv", "a\tb\na\tb\n"))
    assert g.num_edges == 1
    # undirected: the reversed edge is the same edge
    g = load_edge_list(write(tmp_path, "e2.tsv", "a\tb\nb\ta\n"))
    assert g.num_edges == 1
    assert g.neighbors(0) == (1,)


def test_one_field_line_is_a_parse_error_naming_line_1(tmp_path):
    with pytest.raises(ParseError) as err:
        load_edge_list(write(tmp_path, "e.tsv", "a\n"))
    assert err.value.lineno == 1
    assert "line 1" in str(err.value)


def test_parse_error_line_number_counts_comments(tmp_path):
    with pytest.raises(ParseError) as err:
        load_edge_list(write(tmp_path, "e.tsv", "# header\n\na\tb\na\tb\tc\td\n"))
    assert err.value.lineno == 4


def test_self_loops_skipped_and_counted(tmp_path):
    g = load_edge_list(write(tmp_path, "e.tsv", "a\ta\na\tb\nb\tb\n"))
    assert g.num_edges == 1
    assert g.self_loops_skipped == 2
    assert all(v not in g.neighbors(v) for v in g.nodes())


def test_directed_adjacency_is_one_way(tmp_path):
    g = load_edge_list(write(tmp_path, "e.tsv", "a\tb\nb\tc\n"), directed=True)
    adj = labelled_adj(g)
    assert adj == {"a": {"b"}, "b": {"c"}, "c": set()}
    # both orientations are distinct directed edges
    g = load_edge_list(write(tmp_path, "e2.tsv", "a\tb\nb\ta\n"), directed=True)
    assert g.num_edges == 2


def test_edge_types_and_default(tmp_path):
    g = load_edge_list(write(tmp_path, "e.tsv", "a\tb\tbuy\na\tc\nb\tc\tview\n"), default_edge_type="click")
    assert g.edge_types == ("buy", "click", "view")
    assert labelled_adj(g, "buy")["a"] == {"b"}
    assert labelled_adj(g, "click")["a"] == {"c"}
    assert g.neighbors(0, "missing") == ()


def test_graph_rejects_bad_edges():
    with pytest.raises(ValueError):
        Graph(["a"], [(0, 1, "x")])
    with pytest.raises(ValueError):
        Graph(["a", "b"], [(1, 1, "x")])


def test_csr_matches_neighbors():
    rng = np.random.default_rng(3)
    edges = {(int(a), int(b)) for a, b in rng.integers(0, 15, size=(40, 2)) if a != b}
    g = Graph([str(i) for i in range(15)], [(a, b, "default") for a, b in edges])
    indptr, indices = g.csr()
    for v in g.nodes():
        assert tuple(indices[indptr[v]:indptr[v + 1]]) == g.neighbors(v)
    assert indptr.dtype == np.int64 and indices.dtype == np.int64


def test_node_types_from_file(tmp_path):
    types = load_node_types(write(tmp_path, "t.tsv", "a\tuser\nb\titem\n"))
    g = load_edge_list(write(tmp_path, "e.tsv", "a\tb\nb\tc\n"), node_types=types)
    assert g.node_type == ("user", "item", "node")
    assert list(g.nodes_of_type("item")) == [1]


def test_attributes_example(tmp_path):
    attrs = load_node_attributes(write(tmp_path, "a.tsv", "n1\tGlass Baby Bottles\n"))
    assert attrs == {"n1": "Glass Baby Bottles"}
    assert attrs.duplicates == 0


def test_attributes_last_duplicate_wins(tmp_path):
    attrs = load_node_attributes(write(tmp_path, "a.tsv", "n1\tfirst\nn1\tsecond\n"))
    assert attrs == {"n1": "second"}
    assert attrs.duplicates == 1


def test_attributes_empty_file(tmp_path):
    assert load_node_attributes(write(tmp_path, "a.tsv", "")) == {}


def test_attributes_missing_tab(tmp_path):
    with pytest.raises(ParseError) as err:
        load_node_attributes(write(tmp_path, "a.tsv", "n1\tok\nn2 no tab\n"))
    assert err.value.lineno == 2


def ten_edge_graph():
    return Graph([str(i) for i in range(11)], [(i, i + 1, "default") for i in range(10)])


def test_split_counts():
    train, test = split_edges(ten_edge_graph(), 0.3, seed=1)
    assert len(test) == 3
    assert train.num_edges == 7


def test_split_rounds_half_up():
    # 5 edges * 0.1 = 0.5 -> 1
    g = Graph([str(i) for i in range(6)], [(i, i + 1, "default") for i in range(5)])
    assert len(split_edges(g, 0.1, 0)[1]) == 1


def test_split_zero_is_identity():
    g = ten_edge_graph()
    train, test = split_edges(g, 0.0, seed=5)
    assert len(test) == 0
    assert train.edges == g.edges
    assert train.labels == g.labels


def test_split_deterministic_and_seed_dependent():
    g = ten_edge_graph()
    assert split_edges(g, 0.5, 9)[1] == split_edges(g, 0.5, 9)[1]
    draws = {split_edges(g, 0.5, s)[1].edges for s in range(10)}
    assert len(draws) > 1


def test_split_keeps_isolated_nodes():
    g = Graph(["a", "b", "c"], [(0, 1, "default"), (1, 2, "default")])
    train, test = split_edges(g, 1.0, 0)
    assert train.num_nodes == 3 and train.num_edges == 0 and len(test) == 2


def test_split_rejects_bad_fraction():
    with pytest.raises(ValueError):
        split_edges(ten_edge_graph(), 1.5, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.floats(0, 1), st.integers(0, 2**31), st.booleans())
def test_split_partitions_edges(n, frac, seed, directed):
    rng = np.random.default_rng(seed)
    pairs = [(a, b) for a, b in itertools.permutations(range(n), 2) if rng.random() < 0.4]
    g = Graph([str(i) for i in range(n)], [(a, b, "default") for a, b in pairs], directed)
    train, test = split_edges(g, frac, seed)
    tr, te = set(train.edges), set(test.edges)
    assert tr.isdisjoint(te)
    assert tr | te == set(g.edges)
    assert train.num_nodes == g.num_nodes


def test_unseen_nodes_examples():
    g = Graph(["x", "y", "a", "b"], [(0, 2, "default"), (0, 3, "default"), (1, 2, "default"), (1, 3, "default")])
    train = g.with_edges([(1, 2, "default")])
    test = EdgeSet(((0, 2, "default"), (0, 3, "default"), (1, 3, "default")))
    unseen = unseen_test_nodes(train, test)
    assert 0 in unseen  # isolated in train, two test edges
    assert 1 not in unseen  # train degree 1
    assert unseen == {0, 3}
    assert unseen_test_nodes(train, EdgeSet(())) == set()


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 15), st.integers(0, 2**31))
def test_unseen_nodes_have_zero_train_degree(n, seed):
    rng = np.random.default_rng(seed)
    pairs = [(a, b) for a, b in itertools.combinations(range(n), 2) if rng.random() < 0.3]
    g = Graph([str(i) for i in range(n)], [(a, b, "default") for a, b in pairs])
    train, test = split_edges(g, 0.5, seed)
    deg = train.degrees()
    assert all(deg[v] == 0 for v in unseen_test_nodes(train, test))


def test_hold_out_nodes_moves_all_incident_edges():
    g = Graph(list("abcd"), [(0, 1, "default"), (1, 2, "default"), (2, 3, "default")])
    train, test = hold_out_nodes(g, [1])
    assert train.edges == ((2, 3, "default"),)
    assert set(test.edges) == {(0, 1, "default"), (1, 2, "default")}
    assert unseen_test_nodes(train, test) == {0, 1}


def test_load_split_write_load_round_trip(tmp_path):
    text = "".join(f"n{a}\tn{b}\t{'t' + str((a + b) % 2)}\n" for a in range(8) for b in range(a + 1, 8) if (a * b) % 3)
    g = load_edge_list(write(tmp_path, "e.tsv", text))
    train, _ = split_edges(g, 0.25, 4)
    write_edge_list(train, tmp_path / "train.tsv")
    again = load_edge_list(tmp_path / "train.tsv")
    for et in train.edge_types:
        mine = {lab: nb for lab, nb in labelled_adj(train, et).items() if nb}
        theirs = {lab: nb for lab, nb in labelled_adj(again, et).items() if nb}
        assert mine == theirs

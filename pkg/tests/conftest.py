import numpy as np
import pytest

from cne import kernels
from cne.encoders import EncoderSpec
from cne.graph import Graph
from cne.trainer import NodeInputs, init_state

# lines recorded by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.get_backend(request.param)


def path_graph(n, directed=False, edge_type="default"):
    return Graph([f"v{i}" for i in range(n)], [(i, i + 1, edge_type) for i in range(n - 1)], directed)


def random_inputs(n_nodes, vocab, rng, max_len=4, arity=None, types=None):
    """Random token sequences; ``arity`` maps node type -> sequence count."""
    arity = arity or {}
    types = types or ["node"] * n_nodes
    seqs = []
    for v in range(n_nodes):
        k = arity.get(types[v], 1)
        seqs.append(tuple(tuple(int(t) for t in rng.integers(0, vocab, size=rng.integers(1, max_len + 1)))
                          for _ in range(k)))
    return NodeInputs(seqs, types, [f"v{i}" for i in range(n_nodes)])


def toy_state(kind="gru", d=2, h=2, vocab=6, seed=0, share_phi=False, n=2, shared=True, edge_types=("default",)):
    spec = EncoderSpec(kind, d, h if kind in ("gru", "multi_gru_sum") else 0, n if kind == "multi_gru_sum" else 1, shared)
    return init_state(spec, vocab, list(edge_types), seed=seed, share_phi=share_phi, dtype="float64")


def rel_err(analytic, numeric, floor=1e-6):
    """Elementwise |a - f| / max(|a|, |f|, floor); the floor guards exact zeros."""
    a = np.asarray(analytic, dtype=np.float64)
    f = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)

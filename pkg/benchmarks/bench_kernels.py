"""Compiled vs fallback kernels: per-kernel timings and one end-to-end training run.

    python3 benchmarks/bench_kernels.py [--quick]

Per-kernel numbers are the best of several repeats (``timeit``). The
end-to-end run trains on a planted-block graph in a fresh interpreter per
backend, since the backend is fixed at import (``CNE_KERNELS``).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cne import kernels
from cne.synthetic import planted_blocks

E2E = """
import time
from cne.synthetic import planted_blocks
from cne.text import build_vocabulary, encode_nodes
from cne.trainer import NodeInputs, TrainConfig, train
g, texts, _ = planted_blocks(200, seed=0)
vocab = build_vocabulary(texts, 1000)
inputs = NodeInputs.from_graph(g, encode_nodes(g, texts, vocab))
cfg = TrainConfig(token_dim={d}, hidden_dim={d}, epochs=1, walks_per_node={wpn}, batch=256)
t0 = time.perf_counter()
state = train(cfg, g, inputs, vocab_size=len(vocab))
print(time.perf_counter() - t0, state.step)
"""


def kernel_cases(rng, dtype, nb=256, hd=512):
    g, _, _ = planted_blocks(2000, seed=0, p_in=0.005, p_out=0.0005)
    indptr, indices = g.csr()
    starts = np.tile(np.arange(g.num_nodes, dtype=np.int64), 5)
    uniforms = rng.random((len(starts), 19))
    walks = np.zeros((len(starts), 20), dtype=np.int64)
    lengths = np.zeros(len(starts), dtype=np.int64)
    kernels.get_backend("python").random_walks(indptr, indices, starts, uniforms, walks, lengths)
    n_pairs = kernels.get_backend("python").count_window_pairs(walks, lengths, 2)
    pairs = np.zeros((n_pairs, 2), dtype=np.int64)

    a = lambda *s: rng.standard_normal(s).astype(dtype)
    pre_rz, h_prev, pre_c, dh, d_rh = a(nb, 2 * hd), a(nb, hd), a(nb, hd), a(nb, hd), a(nb, hd)
    r, z, rh, c, h_new, dc, dz, dhp, dr = (np.empty((nb, hd), dtype) for _ in range(9))
    mask = (rng.random(nb) < 0.8).astype(np.int8)
    table = np.zeros((5000, 256), dtype)
    index = rng.integers(0, 5000, 20000).astype(np.int64)
    rows = a(20000, 256)
    return {
        "random_walks": lambda k: k.random_walks(indptr, indices, starts, uniforms, walks, lengths),
        "count_window_pairs": lambda k: k.count_window_pairs(walks, lengths, 2),
        "window_pairs": lambda k: k.window_pairs(walks, lengths, 2, pairs),
        "scatter_add_rows": lambda k: k.scatter_add_rows(table, index, rows),
        "gru_fwd_gates": lambda k: k.gru_fwd_gates(pre_rz, h_prev, r, z, rh),
        "gru_fwd_blend": lambda k: k.gru_fwd_blend(pre_c, z, h_prev, mask, c, h_new),
        "gru_bwd_blend": lambda k: k.gru_bwd_blend(dh, mask, z, c, h_prev, dc, dz, dhp),
        "gru_bwd_reset": lambda k: k.gru_bwd_reset(d_rh, r, h_prev, dr, dhp),
    }


def best_of(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10_000:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def end_to_end(backend, d, wpn):
    env = dict(os.environ, CNE_KERNELS=backend if backend == "python" else "")
    out = subprocess.run([sys.executable, "-c", E2E.format(d=d, wpn=wpn)], env=env, capture_output=True,
                         text=True, check=True)
    secs, steps = out.stdout.split()
    return float(secs), int(steps)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="fewer repeats and a smaller end-to-end run")
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; run `python3 setup.py build_ext --inplace` first")
    repeat = 3 if args.quick else 7
    rng = np.random.default_rng(0)
    mods = {b: kernels.get_backend(b) for b in backends}

    print(f"{'kernel':<20}{'dtype':<9}" + "".join(f"{b + ' (ms)':>15}" for b in backends) + f"{'speedup':>10}")
    for dtype in ("float32", "float64"):
        for name, fn in kernel_cases(rng, dtype).items():
            if dtype == "float64" and not (name.startswith("gru_") or name == "scatter_add_rows"):
                continue  # integer kernels: one row is enough
            t = {b: best_of(lambda: fn(mods[b]), repeat) for b in backends}
            speed = f"{t['python'] / t['cython']:9.1f}x" if "cython" in t else ""
            label = dtype if name.startswith("gru_") or name == "scatter_add_rows" else "int64"
            print(f"{name:<20}{label:<9}" + "".join(f"{1e3 * t[b]:15.3f}" for b in backends) + speed)

    d, wpn = (64, 2) if args.quick else (256, 5)
    print(f"\nend-to-end: 1 epoch, 200-node planted graph, token_dim=hidden_dim={d}, walks_per_node={wpn}")
    res = {b: end_to_end(b, d, wpn) for b in backends}
    for b, (secs, steps) in res.items():
        print(f"  {b:<8}{secs:8.2f}s  ({steps} Adam steps)")
    if "cython" in res:
        print(f"  speedup {res['python'][0] / res['cython'][0]:.2f}x")


if __name__ == "__main__":
    main()

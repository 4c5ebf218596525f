"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--nodes 5000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np
import scipy.sparse as sp

from graphite import kernels
from graphite.io import SynthParams, synth_heterophilic
from graphite.model import ModelConfig, message_plan
from graphite.transform import graphite_transform


def workloads(nodes: int, hidden: int):
    g = synth_heterophilic(SynthParams(num_nodes=nodes, num_classes=5, num_features=400, features_per_class=40,
                                       p_in=0.2 / nodes, p_out=8.0 / nodes, feature_noise_prob=0.8,
                                       background_prob=0.005, seed=0))
    t = graphite_transform(g)
    plan = message_plan(t, ModelConfig(hidden_dim=hidden))
    rng = np.random.default_rng(0)
    w = rng.normal(size=len(plan.cols))
    h = rng.normal(size=(t.num_nodes, hidden))
    x = g.features
    xt = sp.csr_matrix(x.T)
    xt.sort_indices()
    xi = (x.indptr.astype(np.int64), x.indices.astype(np.int64))
    xti = (xt.indptr.astype(np.int64), xt.indices.astype(np.int64))
    eu, ev = g.edges[:, 0].copy(), g.edges[:, 1].copy()
    return {
        "spmm": lambda k: k.spmm(plan.indptr, plan.cols, w, h),
        "spmm_backward": lambda k: k.spmm_backward(plan.indptr, plan.cols, w, h, h),
        "rows_intersect": lambda k: k.rows_intersect(*xi, eu, ev),
        "rows_dot": lambda k: k.rows_dot(*xi, x.data, eu, ev),
        "cooccurrence_pairs": lambda k: k.cooccurrence_pairs(*xi, *xti),
    }, g


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=5000)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    jobs, g = workloads(args.nodes, args.hidden)
    print(f"graph: {g.num_nodes} nodes, {g.num_edges} edges, {g.feature_nnz} feature nonzeros")
    names = [b for b in ("cython", "python") if b in kernels.BACKENDS]
    print(f"{'kernel':<20}" + "".join(f"{n + ' ms':>14}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for kernel, fn in jobs.items():
        times = []
        for n in names:
            mod = kernels.get(n)
            fn(mod)  # warm-up
            times.append(min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3)
        row = f"{kernel:<20}" + "".join(f"{t:>14.2f}" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()

"""Randomized checks of the homophily-boosting guarantees.

Each suite runs over seeded synthetic graphs and counts counterexamples.
Homophily comparisons use integer cross-multiplication so "strictly
greater" is decided exactly.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from graphite.graph import Graph, check_assumptions
from graphite.homophily import and_hom_counts, appended_mean_rises
from graphite.io import RetryBudgetExhausted, SynthParams, synth_heterophilic
from graphite.training import worker_count
from graphite.transform import graphite_transform, nhb_transform, two_hop_witness


@dataclass
class SuiteResult:
    name: str
    trials: int = 0
    failures: int = 0
    skipped: int = 0
    examples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failures == 0 and self.trials > 0

    def fail(self, detail) -> None:
        self.failures += 1
        if len(self.examples) < 5:
            self.examples.append(detail)

    def merge(self, other: SuiteResult) -> None:
        self.trials += other.trials
        self.failures += other.failures
        self.skipped += other.skipped
        self.examples.extend(other.examples[: max(0, 5 - len(self.examples))])

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f", skipped {self.skipped}" if self.skipped else ""
        return f"{status} {self.name}: {self.trials} trials, {self.failures} counterexamples{extra}"


def random_graph(seed: int, trial: int, max_nodes: int = 120) -> Graph:
    """One heterophilic synthetic graph with randomized size, density and feature noise."""
    rng = np.random.default_rng([seed, trial, 17])
    while True:
        n = int(rng.integers(12, max_nodes + 1))
        c = int(rng.integers(2, 6))
        fpc = int(rng.integers(1, 6))
        extra = int(rng.integers(0, 10))
        p_out = float(rng.uniform(2.0, 6.0) / n)
        params = SynthParams(
            num_nodes=n, num_classes=c, num_features=c * fpc + extra,
            p_in=float(rng.uniform(0.0, 0.5) * p_out), p_out=p_out,
            features_per_class=fpc, feature_noise_prob=float(rng.uniform(0.0, 0.8)),
            background_prob=float(rng.uniform(0.0, 0.1)), seed=int(rng.integers(2**31)), max_retries=10,
        )
        try:
            return synth_heterophilic(params)
        except RetryBudgetExhausted:
            continue


def check_feature_node_boost(g: Graph, res: SuiteResult, sizes: SuiteResult, identity: SuiteResult) -> None:
    t = graphite_transform(g)
    s0, e0 = and_hom_counts(g.edges, g.features)
    s1, e1 = and_hom_counts(t.all_edges(), t.x_star_binary)
    res.trials += 1
    if not s1 * e0 > s0 * e1:
        res.fail((s0, e0, s1, e1))
    used = np.bincount(g.features.indices, minlength=g.num_features) > 0
    retained = int(used.sum())
    sizes.trials += 1
    if t.num_nodes != g.num_nodes + retained or t.num_edges != g.num_edges + g.feature_nnz:
        sizes.fail((t.num_nodes, t.num_edges))
    identity.trials += 1
    n = g.num_nodes
    diag = t.x_star[n + np.arange(retained), np.arange(retained)]
    if retained and not np.all(np.asarray(diag).ravel() == 1.0):
        identity.fail("x_star diagonal")


def check_all_pairs_boost(g: Graph, res: SuiteResult) -> None:
    d = nhb_transform(g)
    s0, e0 = and_hom_counts(g.edges, g.features)
    s1, e1 = and_hom_counts(d.edges, d.features)
    n = g.num_nodes
    res.trials += 1
    if not s1 * e0 > s0 * e1 or e1 - e0 > n * (n - 1) // 2:
        res.fail((s0, e0, s1, e1))


def check_two_hop_witness(g: Graph, res: SuiteResult) -> None:
    t = graphite_transform(g)
    xd = g.features.toarray().astype(bool)
    share = (xd[:, None, :] & xd[None, :, :]).any(axis=2)
    n = g.num_nodes
    res.trials += 1
    bad = 0
    for u in range(n):
        for v in range(u + 1, n):
            k = two_hop_witness(t, u, v)
            if k is None:
                bad += share[u, v]
            else:
                col = t.column_map[k]
                bad += not (share[u, v] and xd[u, col] and xd[v, col])
    if bad:
        res.fail(bad)


def _graph_chunk(args):
    seed, trials, obs_trials = args
    out = {k: SuiteResult(k) for k in ("feature-node-boost", "size-bounds", "x-star-identity", "all-pairs-boost", "two-hop-witness")}
    for i in trials:
        g = random_graph(seed, i)
        if not check_assumptions(g).heterophilic:
            for k in ("feature-node-boost", "size-bounds", "x-star-identity", "all-pairs-boost"):
                out[k].skipped += 1
            continue
        check_feature_node_boost(g, out["feature-node-boost"], out["size-bounds"], out["x-star-identity"])
        check_all_pairs_boost(g, out["all-pairs-boost"])
    for i in obs_trials:
        check_two_hop_witness(random_graph(seed + 1, i, max_nodes=200), out["two-hop-witness"])
    return out


def mean_increase_fuzz(seed: int, cases: int) -> SuiteResult:
    """Random multiset pairs meeting the precondition; the mean must always rise."""
    res = SuiteResult("mean-increase")
    rng = np.random.default_rng([seed, 4])
    while res.trials < cases:
        a = rng.normal(size=int(rng.integers(1, 8))) * rng.choice([1e-3, 1.0, 1e3])
        gaps = np.abs(rng.normal(size=int(rng.integers(1, 8)))) * rng.choice([1e-9, 1e-3, 1.0])
        b = a.mean() + gaps
        try:
            ok = appended_mean_rises(a.tolist(), b.tolist())
        except ValueError:  # rounding pushed an element onto the mean
            res.skipped += 1
            continue
        res.trials += 1
        if not ok:
            res.fail((a.tolist(), b.tolist()))
    return res


def verify_theorems(trials: int = 500, seed: int = 0, witness_graphs: int = 100,
                    mean_cases: int = 100_000) -> list[SuiteResult]:
    """Run every suite; per-trial results are merged in trial order."""
    workers = worker_count(trials)
    jobs = [(seed, range(trials)[w::workers], range(witness_graphs)[w::workers]) for w in range(workers)]
    if workers == 1:
        parts = [_graph_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_graph_chunk, jobs))
    merged = {k: SuiteResult(k) for k in parts[0]}
    for part in parts:
        for k, r in part.items():
            merged[k].merge(r)
    return [*merged.values(), mean_increase_fuzz(seed, mean_cases)]

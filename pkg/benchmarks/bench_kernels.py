#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Run after an editable install:

    python3 benchmarks/bench_kernels.py [--pairs 400] [--doc-tokens 250]

Prints one row per kernel with both timings and the speedup factor. The
workloads mirror the real call sites: pairwise Jaccard over abstract-sized
token sets (dedup), LCS over summary-length token sequences (ROUGE-L), and
edit distance over property values (error typing).
"""

import argparse
import random
import time

from sciex._kernels import _pure

try:
    from sciex._kernels import _speedups
except ImportError:
    _speedups = None


def timeit(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=150, help="documents for jaccard")
    parser.add_argument("--doc-tokens", type=int, default=250)
    parser.add_argument("--lcs-pairs", type=int, default=400)
    parser.add_argument("--lcs-len", type=int, default=120)
    parser.add_argument("--lev-pairs", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    docs = [
        sorted(rng.sample(range(5000), args.doc_tokens)) for _ in range(args.docs)
    ]
    lcs_inputs = [
        (
            [rng.randint(0, 300) for _ in range(args.lcs_len)],
            [rng.randint(0, 300) for _ in range(args.lcs_len)],
        )
        for _ in range(args.lcs_pairs)
    ]
    words = ["r0", "estimate", "covid-19", "wuhan", "2.5", "(95%", "ci)", "model"]
    lev_inputs = [
        (
            " ".join(rng.choice(words) for _ in range(4)),
            " ".join(rng.choice(words) for _ in range(4)),
        )
        for _ in range(args.lev_pairs)
    ]

    workloads = [
        ("jaccard_pairs", lambda impl: impl.jaccard_pairs(docs, 0.2)),
        (
            "lcs_length",
            lambda impl: [impl.lcs_length(a, b) for a, b in lcs_inputs],
        ),
        (
            "lcs_hit_indices",
            lambda impl: [impl.lcs_hit_indices(a, b) for a, b in lcs_inputs[:100]],
        ),
        (
            "levenshtein",
            lambda impl: [impl.levenshtein(a, b) for a, b in lev_inputs],
        ),
    ]

    print(f"{'kernel':<18}{'pure (s)':>12}{'compiled (s)':>14}{'speedup':>10}")
    for name, workload in workloads:
        pure_time = timeit(lambda: workload(_pure))
        if _speedups is None:
            print(f"{name:<18}{pure_time:>12.4f}{'n/a':>14}{'n/a':>10}")
            continue
        fast_time = timeit(lambda: workload(_speedups))
        print(
            f"{name:<18}{pure_time:>12.4f}{fast_time:>14.4f}"
            f"{pure_time / fast_time:>9.1f}x"
        )
    if _speedups is None:
        print("\ncompiled extension not available; showing pure timings only")


if __name__ == "__main__":
    main()

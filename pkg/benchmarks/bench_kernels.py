"""Compiled vs pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py --users 2000 --mean-actions 50

Both backends must produce identical outputs; the script checks that
before reporting timings.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from feedinfluence import kernels
from feedinfluence.feed import FeedModel, overlap_counts
from feedinfluence.model import time_quantile
from feedinfluence.pipeline import PipelineConfig, prepare_matching
from feedinfluence.matching import match_all
from feedinfluence.synthgen import SynthProcess, generate, generate_network, neighbor_table


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=2000)
    ap.add_argument("--items", type=int, default=20000)
    ap.add_argument("--mean-actions", type=float, default=50.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args(argv)

    try:
        kernels.backend("compiled")
    except ImportError:
        print("compiled extension not built; only the Python backend is available")
        return 1

    log, graph = generate_network(n_users=a.users, n_items=a.items, mean_actions=a.mean_actions,
                                  seed=a.seed)
    T = time_quantile(log, 0.8)
    cfg = PipelineConfig(t=T)
    elig, store, pool = prepare_matching(log, graph, cfg, T)
    users = np.flatnonzero(elig)
    asg = match_all(users, graph, store, cfg.match_config(T), pool_mask=pool)
    friends = [graph.neighbors(u) for u in users]
    strangers = [asg[u].strangers() for u in users]
    nb = neighbor_table(log, T, 10)
    print(f"{len(log)} events, {a.users} users, {len(users)} query users, T={T:.4f}")

    cases = []
    for mode in ("full", "latest-per-friend"):
        model = FeedModel(10, mode)
        cases.append((f"feed sweep ({mode})",
                      lambda b, model=model: overlap_counts(log, users, [friends, strangers], model, None, None,
                                                            t_from=T, backend=b)))
    for proc in ("ci", "pp", "mix:0.5"):
        sp = SynthProcess.parse(proc)
        cases.append((f"generate ({proc})",
                      lambda b, sp=sp: generate(log, graph, sp, T, 10, seed=1, neighbors=nb, backend=b).output.item))

    print(f"{'kernel':<30}{'python s':>10}{'compiled s':>12}{'speedup':>10}")
    for name, fn in cases:
        tp, outp = best_of(lambda: fn("python"), a.repeat)
        tc, outc = best_of(lambda: fn("compiled"), a.repeat)
        same = all(np.array_equal(x, y) for x, y in zip(outp, outc)) if isinstance(outp, tuple) \
            else np.array_equal(outp, outc)
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<30}{tp:>10.3f}{tc:>12.4f}{tp / tc:>10.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Slow reference implementations used as test oracles.

Everything here works on plain Python lists and sets and rescans the whole
log for every query, sharing no code with the package's sweep kernels.
"""
from __future__ import annotations

import math
from itertools import combinations


def events_of(log):
    """(time, user, item, kind, seq) tuples in the documented total order."""
    ev = [(float(t), int(u), int(i), int(k)) for u, i, t, k in zip(log.user, log.item, log.time, log.kind)]
    # total order: time, user code, item code, then input sequence
    order = sorted(range(len(ev)), key=lambda j: (ev[j][0], ev[j][1], ev[j][2], j))
    return [ev[j] + (j,) for j in order]


def brute_feed(t, members, events, m, latest=False, kind=None, feed_from=-math.inf):
    """Item set shown by a feed over `members` just before time t."""
    members = set(members)
    visible = [e for e in events if e[1] in members and feed_from <= e[0] < t and (kind is None or e[3] == kind)]
    visible.reverse()  # most recent first
    if latest:
        seen, picked = set(), []
        for e in visible:
            if e[1] not in seen:
                seen.add(e[1])
                picked.append(e)
        visible = picked
    return {e[2] for e in visible[:m]}


def brute_overlap_counts(u, members, events, m, t_from, latest=False, exposure=None, target=None,
                         feed_from=-math.inf):
    members = set(members) - {u}
    # members' events once; every scored action still rescans them from scratch
    pool = [e for e in events if e[1] in members]
    hits = n = 0
    for e in events:
        if e[1] != u or e[0] < t_from or (target is not None and e[3] != target):
            continue
        n += 1
        if e[2] in brute_feed(e[0], members, pool, m, latest, exposure, feed_from):
            hits += 1
    return hits, n


def brute_jaccard(a: set, b: set) -> float:
    u = a | b
    return len(a & b) / len(u) if u else 0.0


def brute_cosine(a: set, b: set) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / math.sqrt(len(a) * len(b))


def pre_sets(log, T, kind=None):
    """Per-user-code (distinct item set, event count) over events strictly before T."""
    items = {c: set() for c in range(log.n_users)}
    counts = {c: 0 for c in range(log.n_users)}
    for u, i, t, k in zip(log.user, log.item, log.time, log.kind):
        if t < T and (kind is None or log.kinds[k] == kind):
            items[int(u)].add(int(i))
            counts[int(u)] += 1
    return items, counts


def validate_pairs(assignment, adj: dict, items, counts, eps_s, eps_a, sim=brute_jaccard):
    """Problems with an assignment, checked from raw sets. Empty list = valid."""
    u = assignment.user
    problems = []
    friends = adj.get(u, set())
    used = list(assignment.pairs.values())
    if len(set(used)) != len(used):
        problems.append("stranger used twice")
    for f, s in assignment.pairs.items():
        if f not in friends:
            problems.append(f"{f} is not a friend")
        if s in friends or s == u:
            problems.append(f"{s} is a friend or the user")
        sf, ss = sim(items[u], items[f]), sim(items[u], items[s])
        if abs(ss - sf) > eps_s * sf + 1e-12:
            problems.append(f"similarity {ss} vs {sf} outside tolerance")
        if abs(counts[s] - counts[f]) > eps_a * counts[f] + 1e-12:
            problems.append(f"count {counts[s]} vs {counts[f]} outside tolerance")
    return problems


def adjacency(graph):
    """user code -> set of friend codes, rebuilt from the edge list."""
    adj = {}
    for a, b in graph.edges():
        adj.setdefault(int(a), set()).add(int(b))
        adj.setdefault(int(b), set()).add(int(a))
    return adj


def streaming_stats(values):
    """Mean, SE of the mean and median; Welford updates for the moments."""
    n, mean, m2 = 0, 0.0, 0.0
    for x in values:
        n += 1
        d = float(x) - mean
        mean += d / n
        m2 += d * (float(x) - mean)
    se = math.sqrt(m2 / (n - 1) / n) if n > 1 else 0.0
    v = sorted(float(x) for x in values)
    med = v[n // 2] if n % 2 else (v[n // 2 - 1] + v[n // 2]) / 2
    return mean, se, med


def all_pairs(n):
    return combinations(range(n), 2)

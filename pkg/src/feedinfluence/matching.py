"""Pair each friend of a user with a non-friend of matching taste and activity.

A candidate s matches friend f of user u when

    |sim(u, s) - sim(u, f)| <= eps_s * sim(u, f)
    |n(s) - n(f)|           <= eps_a * n(f)

with similarity and action counts taken from data before T. Candidates are
drawn uniformly without replacement from the pool and each one is given to
the still-unmatched friend it resembles most (closest similarity, then
closest count, then lowest user code).

Two strategies produce the same distribution over assignments:

* ``exhaustive`` walks a full random permutation of the pool, testing every
  candidate. Simple, O(pool) per user.
* the default lazy strategy uses that candidates with similarity 0 can only
  match friends with similarity 0 (and positive only positive), so the two
  halves are independent. In each half the next *useful* candidate of a
  random permutation is a uniform draw among the untried candidates that
  still match some unmatched friend. Positive-similarity candidates are
  enumerated from shared items; zero-similarity ones are drawn from count
  ranges of a count-sorted pool index, never materialising the pool.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ActivityLog, SocialGraph
from .seeding import rng_for
from .similarity import ProfileStore, sim_from_counts


@dataclass(frozen=True)
class MatchConfig:
    eps_s: float = 0.1
    eps_a: float = 0.1
    rng_seed: int = 0
    max_candidates: int | None = None
    coverage_required: float = 1.0
    metric: str = "jaccard"

    def __post_init__(self):
        if self.eps_s < 0 or self.eps_a < 0:
            raise ValueError("tolerances must be non-negative")
        if not 0 < self.coverage_required <= 1:
            raise ValueError("coverage_required must lie in (0, 1]")
        if self.max_candidates is not None and self.max_candidates < 1:
            raise ValueError("max_candidates must be positive")


@dataclass(frozen=True)
class PairDiagnostics:
    sim_friend: float
    sim_stranger: float
    count_friend: int
    count_stranger: int


@dataclass
class MatchAssignment:
    user: int
    pairs: dict = field(default_factory=dict)  # friend code -> stranger code
    n_friends: int = 0
    diagnostics: dict = field(default_factory=dict)  # friend code -> PairDiagnostics
    candidates_tested: int = 0
    cap_hit: bool = False
    excluded: bool = False

    @property
    def coverage(self) -> float:
        return len(self.pairs) / self.n_friends if self.n_friends else 0.0

    def strangers(self) -> np.ndarray:
        return np.asarray(sorted(self.pairs.values()), dtype=np.int64)


def sim_ok(s_cand, s_friend, eps):
    return np.abs(s_cand - s_friend) <= eps * s_friend


def count_ok(n_cand, n_friend, eps):
    return np.abs(n_cand - n_friend) <= eps * n_friend


def plain_label(label):
    return label.item() if isinstance(label, np.generic) else label


class Matcher:
    """Shared state for matching many users against one pool."""

    def __init__(self, store: ProfileStore, graph: SocialGraph, pool_mask: np.ndarray, cfg: MatchConfig):
        if not np.array_equal(store.users, graph.users):
            raise ValueError("profiles and graph use different user tables")
        self.store, self.graph, self.cfg = store, graph, cfg
        self.pool_mask = np.asarray(pool_mask, dtype=bool)
        pool = np.flatnonzero(self.pool_mask)
        counts = store.counts[pool]
        order = np.argsort(counts, kind="stable")
        self.sorted_users = pool[order]
        self.sorted_counts = counts[order]
        self.rank = np.full(store.n_users, -1, dtype=np.int64)
        self.rank[self.sorted_users] = np.arange(len(pool))

    def rng(self, u: int) -> np.random.Generator:
        return rng_for(self.cfg.rng_seed, "match", plain_label(self.store.users[u]))

    def _row(self, u: int):
        inter = self.store.intersections([u])
        return inter.indices.astype(np.int64), inter.data.astype(np.int64)

    def _sims(self, u, codes, row_idx, row_val):
        inter = np.zeros(len(codes), dtype=np.int64)
        if len(row_idx):
            pos = np.minimum(np.searchsorted(row_idx, codes), len(row_idx) - 1)
            hit = row_idx[pos] == codes
            inter[hit] = row_val[pos[hit]]
        return sim_from_counts(inter, self.store.sizes[u], self.store.sizes[codes], self.cfg.metric)

    def match(self, u: int, row=None, rng=None, exhaustive: bool = False) -> MatchAssignment:
        store, cfg = self.store, self.cfg
        rng = self.rng(u) if rng is None else rng
        row_idx, row_val = self._row(u) if row is None else row
        friends = self.graph.neighbors(u).astype(np.int64)
        f_sim = self._sims(u, friends, row_idx, row_val)
        f_cnt = store.counts[friends]
        out = MatchAssignment(user=u, n_friends=len(friends))
        if not len(friends):
            return out
        state = _State(friends, f_sim, f_cnt, cfg)
        if exhaustive:
            self._walk_all(u, friends, row_idx, row_val, state, rng)
        else:
            is_friend = np.zeros(store.n_users, dtype=bool)
            is_friend[friends] = True
            plus = row_idx[self.pool_mask[row_idx] & ~is_friend[row_idx] & (row_idx != u)]
            self._walk_positive(u, plus, row_idx, row_val, state, rng)
            self._draw_zero(u, friends, plus, state, rng)
        out.pairs = {int(friends[j]): int(s) for j, s in state.assigned.items()}
        out.diagnostics = {
            int(friends[j]): PairDiagnostics(float(f_sim[j]), float(state.s_sim[j]),
                                             int(f_cnt[j]), int(store.counts[s]))
            for j, s in state.assigned.items()
        }
        out.candidates_tested = state.tested
        out.cap_hit = state.cap_hit
        return out

    # strategies ---------------------------------------------------------

    def _walk_all(self, u, friends, row_idx, row_val, state, rng):
        cand = np.flatnonzero(self.pool_mask)
        cand = cand[~np.isin(cand, friends) & (cand != u)]
        cand = cand[rng.permutation(len(cand))]
        sims = self._sims(u, cand, row_idx, row_val)
        for c, s in zip(cand.tolist(), sims.tolist()):
            if not state.open.any() or state.budget_spent():
                break
            state.tested += 1
            state.offer(c, s, int(self.store.counts[c]))

    def _walk_positive(self, u, plus, row_idx, row_val, state, rng):
        pos_friends = np.flatnonzero(state.f_sim > 0)
        if not len(plus) or not len(pos_friends):
            return
        cand = plus[rng.permutation(len(plus))]
        sims = self._sims(u, cand, row_idx, row_val)
        cnts = self.store.counts[cand]
        fit = (sim_ok(sims[:, None], state.f_sim[pos_friends][None, :], self.cfg.eps_s)
               & count_ok(cnts[:, None], state.f_cnt[pos_friends][None, :], self.cfg.eps_a))
        useful = np.flatnonzero(fit.any(axis=1))
        cap = self.cfg.max_candidates
        reached = len(cand)
        for r in useful.tolist():
            if not state.open[pos_friends].any():
                reached = r
                break
            if cap is not None and state.tested + r >= cap:
                state.cap_hit = True
                reached = cap - state.tested
                break
            state.offer(int(cand[r]), float(sims[r]), int(cnts[r]))
        state.tested += reached

    def _draw_zero(self, u, friends, plus, state, rng):
        zero = [j for j in np.flatnonzero(state.f_sim == 0).tolist() if state.open[j]]
        if not zero or not len(self.sorted_users):
            return
        # pool positions no zero-similarity draw may return
        blocked = np.concatenate([[u], friends, plus, list(state.assigned.values())]).astype(np.int64)
        ranks = self.rank[blocked]
        ex = sorted(set(ranks[ranks >= 0].tolist()))
        ex_set = set(ex)
        sc = self.sorted_counts
        while zero:
            if state.budget_spent():
                break
            spans = _merged_spans(sc, [(state.f_cnt[j], self.cfg.eps_a) for j in zero])
            total = sum(b - a for a, b in spans)
            inside = sum(bisect.bisect_left(ex, b) - bisect.bisect_left(ex, a) for a, b in spans)
            avail = total - inside
            if avail <= 0:
                break
            if avail * 4 < total:
                free = np.concatenate([np.arange(a, b) for a, b in spans])
                free = free[~np.isin(free, ex)]
                p = int(free[rng.integers(len(free))])
            else:
                while True:
                    p = _nth_in_spans(spans, int(rng.integers(total)))
                    if p not in ex_set:
                        break
            s = int(self.sorted_users[p])
            state.tested += 1
            j = state.offer(s, 0.0, int(sc[p]), among=zero)
            if j is None:  # pragma: no cover - spans guarantee a fit
                raise AssertionError("drawn candidate fits no open friend")
            zero.remove(j)
            bisect.insort(ex, p)
            ex_set.add(p)


class _State:
    def __init__(self, friends, f_sim, f_cnt, cfg: MatchConfig):
        self.friends, self.f_sim, self.f_cnt, self.cfg = friends, f_sim, f_cnt, cfg
        self.open = np.ones(len(friends), dtype=bool)
        self.assigned: dict[int, int] = {}
        self.s_sim: dict[int, float] = {}
        self.tested = 0
        self.cap_hit = False

    def budget_spent(self) -> bool:
        cap = self.cfg.max_candidates
        if cap is not None and self.tested >= cap:
            self.cap_hit = True
            return True
        return False

    def offer(self, cand: int, sim: float, cnt: int, among=None):
        """Give `cand` to the closest open friend it fits; returns that friend's index."""
        js = np.flatnonzero(self.open) if among is None else np.asarray(among, dtype=np.int64)
        if not len(js):
            return None
        fit = sim_ok(sim, self.f_sim[js], self.cfg.eps_s) & count_ok(cnt, self.f_cnt[js], self.cfg.eps_a)
        js = js[fit]
        if not len(js):
            return None
        key = np.lexsort((self.friends[js], np.abs(cnt - self.f_cnt[js]), np.abs(sim - self.f_sim[js])))
        j = int(js[key[0]])
        self.open[j] = False
        self.assigned[j] = cand
        self.s_sim[j] = sim
        return j


def _merged_spans(sorted_counts, targets):
    spans = []
    for c, eps in targets:
        tol = math.floor(eps * c)  # integer counts: |x - c| <= eps*c  <=>  |x - c| <= floor(eps*c)
        a = int(np.searchsorted(sorted_counts, c - tol, side="left"))
        b = int(np.searchsorted(sorted_counts, c + tol, side="right"))
        if b > a:
            spans.append((a, b))
    spans.sort()
    merged = []
    for a, b in spans:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def _nth_in_spans(spans, r):
    for a, b in spans:
        if r < b - a:
            return a + r
        r -= b - a
    raise IndexError(r)


def match_strangers(u: int, graph: SocialGraph, store: ProfileStore, cfg: MatchConfig,
                    pool_mask: np.ndarray | None = None, exhaustive: bool = False) -> MatchAssignment:
    """Match every friend of user code `u` to a distinct similar stranger."""
    if pool_mask is None:
        pool_mask = np.ones(store.n_users, dtype=bool)
    a = Matcher(store, graph, pool_mask, cfg).match(u, exhaustive=exhaustive)
    a.excluded = a.coverage < cfg.coverage_required
    return a


def match_all(users, graph: SocialGraph, store: ProfileStore, cfg: MatchConfig,
              pool_mask: np.ndarray | None = None, block: int = 256,
              exhaustive: bool = False) -> dict[int, MatchAssignment]:
    """Independent per-user assignments; users below coverage_required are flagged."""
    if pool_mask is None:
        pool_mask = np.ones(store.n_users, dtype=bool)
    matcher = Matcher(store, graph, pool_mask, cfg)
    users = np.asarray(sorted(int(u) for u in users), dtype=np.int64)
    out = {}
    for start in range(0, len(users), block):
        rows = users[start:start + block]
        inter = store.intersections(rows)
        for r, u in enumerate(rows.tolist()):
            lo, hi = inter.indptr[r], inter.indptr[r + 1]
            row = (inter.indices[lo:hi].astype(np.int64), inter.data[lo:hi].astype(np.int64))
            a = matcher.match(u, row=row, exhaustive=exhaustive)
            a.excluded = a.coverage < cfg.coverage_required
            out[u] = a
    return out


def check_assignment(a: MatchAssignment, graph: SocialGraph, log_pre: ActivityLog, cfg: MatchConfig,
                     kind: str | None = None) -> list[str]:
    """Problems with an assignment, recomputed from raw pre-T sets (empty list = valid)."""
    problems = []
    sub = log_pre.select_kind(kind)
    friends = set(graph.neighbors(a.user).tolist())

    def items(v):
        return set(sub.item[sub.user == v].tolist())

    def n_actions(v):
        return int(np.count_nonzero(sub.user == v))

    def sim(x, y):
        if cfg.metric == "cosine":
            return len(x & y) / math.sqrt(len(x) * len(y)) if x and y else 0.0
        union = len(x | y)
        return len(x & y) / union if union else 0.0

    mine = items(a.user)
    seen = set()
    for f, s in a.pairs.items():
        if f not in friends:
            problems.append(f"{f} is not a friend of {a.user}")
        if s == a.user or s in friends:
            problems.append(f"stranger {s} is the user or a friend")
        if s in seen:
            problems.append(f"stranger {s} assigned twice")
        seen.add(s)
        sf, ss = sim(mine, items(f)), sim(mine, items(s))
        nf, ns = n_actions(f), n_actions(s)
        if not abs(ss - sf) <= cfg.eps_s * sf:
            problems.append(f"similarity condition fails for {f}->{s}: {sf} vs {ss}")
        if not abs(ns - nf) <= cfg.eps_a * nf:
            problems.append(f"activity condition fails for {f}->{s}: {nf} vs {ns}")
    return problems

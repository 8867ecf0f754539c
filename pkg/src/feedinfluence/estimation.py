"""Friends-Overlap, Strangers-Overlap and copy-influence, per user and network-wide."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .feed import FeedModel, overlap_counts
from .matching import MatchAssignment, MatchConfig, Matcher
from .model import ActivityLog, SocialGraph
from .seeding import derive_seed


@dataclass(frozen=True)
class OverlapRecord:
    user: int
    friends_overlap: float
    strangers_overlap: float
    n_post_actions: int
    coverage: float = 1.0

    @property
    def copy_influence_raw(self) -> float:
        return self.friends_overlap - self.strangers_overlap

    @property
    def copy_influence_clamped(self) -> float:
        return max(0.0, self.copy_influence_raw)


@dataclass(frozen=True)
class EstimateSummary:
    mean_friends_overlap: float
    mean_strangers_overlap: float
    mean_copy_influence_raw: float
    mean_copy_influence_clamped: float
    bootstrap_se: float
    n_users: int
    n_bootstrap: int
    fraction_zero_friends_overlap: float
    fraction_nonpositive_influence: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EstimationResult:
    records: list
    skipped: dict = field(default_factory=dict)  # user code -> reason


def estimate_many(assignments: dict[int, MatchAssignment], log: ActivityLog, graph: SocialGraph,
                  T: float, model: FeedModel, exposure_kind: str | None = None,
                  target_kind: str | None = None, min_post_actions: int = 1,
                  feed_scope: str = "all", backend: str | None = None) -> EstimationResult:
    """Overlap records for every assigned, non-excluded user, in one sweep.

    Feeds are built from exposure actions of the whole log (``feed_scope='all'``)
    or from post-T exposure actions only (``'post'``); scored actions are the
    user's target actions at or after T.
    """
    if feed_scope not in ("all", "post"):
        raise ValueError("feed_scope must be 'all' or 'post'")
    skipped = {}
    users = []
    for u, a in sorted(assignments.items()):
        if a.excluded:
            skipped[u] = "excluded: coverage below requirement"
            continue
        users.append(u)
    users = np.asarray(users, dtype=np.int64)
    friends = [graph.neighbors(u) for u in users]
    strangers = [assignments[u].strangers() for u in users]
    hits, counts = overlap_counts(
        log, users, [friends, strangers], model, exposure_kind, target_kind,
        t_from=T, feed_from=T if feed_scope == "post" else -np.inf, backend=backend)
    records = []
    for q, u in enumerate(users.tolist()):
        n = int(counts[q])
        if n < max(min_post_actions, 1):
            skipped[u] = "too few post-T actions"
            continue
        records.append(OverlapRecord(u, hits[q, 0] / n, hits[q, 1] / n, n, assignments[u].coverage))
    return EstimationResult(records, skipped)


def estimate_user(u: int, assignment: MatchAssignment, log: ActivityLog, graph: SocialGraph, T: float,
                  model: FeedModel, exposure_kind: str | None = None, target_kind: str | None = None,
                  feed_scope: str = "all") -> OverlapRecord:
    res = estimate_many({u: assignment}, log, graph, T, model, exposure_kind, target_kind,
                        feed_scope=feed_scope)
    if not res.records:
        raise ValueError(f"user {u} skipped: {res.skipped.get(u)}")
    return res.records[0]


def bootstrap_se(values, n_bootstrap: int = 1000, rng_seed: int = 0, chunk: int = 200) -> float:
    """Standard deviation of the resampled mean (users drawn with replacement)."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n == 0:
        return math.nan
    rng = np.random.default_rng(rng_seed)
    means = np.empty(n_bootstrap)
    for start in range(0, n_bootstrap, chunk):
        b = min(chunk, n_bootstrap - start)
        means[start:start + b] = values[rng.integers(0, n, size=(b, n))].mean(axis=1)
    return float(means.std(ddof=1)) if n_bootstrap > 1 else 0.0


def network_estimate(records, n_bootstrap: int = 1000, rng_seed: int = 0) -> EstimateSummary:
    """Network-level means with a bootstrap SE of the raw copy-influence mean."""
    if len(records) < 2:
        raise ValueError("need at least two user records")
    fo = np.array([r.friends_overlap for r in records])
    so = np.array([r.strangers_overlap for r in records])
    raw = fo - so
    se = bootstrap_se(raw, n_bootstrap, rng_seed)
    if np.all(raw == raw[0]):
        se = 0.0  # resampling identical values cannot vary; avoid float noise
    return EstimateSummary(
        mean_friends_overlap=float(fo.mean()),
        mean_strangers_overlap=float(so.mean()),
        mean_copy_influence_raw=float(raw.mean()),
        mean_copy_influence_clamped=float(np.maximum(raw, 0).mean()),
        bootstrap_se=se,
        n_users=len(records),
        n_bootstrap=n_bootstrap,
        fraction_zero_friends_overlap=float(np.mean(fo == 0)),
        fraction_nonpositive_influence=float(np.mean(raw <= 0)),
    )


@dataclass(frozen=True)
class PerUserSE:
    user: int
    se: float
    estimates: tuple
    missing: int


def per_user_se(u: int, n_repeats: int, matcher: Matcher, log: ActivityLog, graph: SocialGraph, T: float,
                model: FeedModel, exposure_kind: str | None = None, target_kind: str | None = None,
                feed_scope: str = "all") -> PerUserSE:
    """SE of one user's estimate over repeated re-matchings with fresh sub-seeds."""
    if n_repeats < 2:
        raise ValueError("n_repeats must be >= 2")
    cfg: MatchConfig = matcher.cfg
    values, missing = [], 0
    for r in range(n_repeats):
        rng = np.random.default_rng(derive_seed(cfg.rng_seed, "per-user-se", int(u), r))
        a = matcher.match(u, rng=rng)
        a.excluded = a.coverage < cfg.coverage_required
        if a.excluded:
            missing += 1
            continue
        res = estimate_many({u: a}, log, graph, T, model, exposure_kind, target_kind, feed_scope=feed_scope)
        if not res.records:
            missing += 1
            continue
        values.append(res.records[0].copy_influence_raw)
    se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) >= 2 else math.nan
    return PerUserSE(u, se, tuple(values), missing)


@dataclass(frozen=True)
class ActivityBin:
    lo: float
    hi: float
    n_users: int
    mean_copy_influence: float
    se: float


def susceptibility_by_activity(records, bin_edges, min_users: int = 5, n_bootstrap: int = 1000,
                               rng_seed: int = 0) -> list[ActivityBin]:
    """Mean raw copy-influence of users binned by post-T activity, [lo, hi) bins."""
    edges = np.asarray(bin_edges, dtype=np.float64)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    acts = np.array([r.n_post_actions for r in records], dtype=np.float64)
    raw = np.array([r.copy_influence_raw for r in records], dtype=np.float64)
    out = []
    for b, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        sel = (acts >= lo) & (acts < hi)
        n = int(sel.sum())
        if n < min_users or n == 0:
            continue
        vals = raw[sel]
        se = 0.0 if np.all(vals == vals[0]) else bootstrap_se(vals, n_bootstrap, derive_seed(rng_seed, "bin", b))
        out.append(ActivityBin(float(lo), float(hi), n, float(vals.mean()), se))
    return out

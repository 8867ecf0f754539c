"""Matching followed by estimation, end to end."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .estimation import EstimateSummary, estimate_many, network_estimate
from .feed import FeedModel
from .matching import MatchConfig, match_all
from .model import ActivityLog, SocialGraph, SplitConfig, eligible_mask, split_at, time_quantile
from .seeding import derive_seed
from .similarity import ProfileStore


@dataclass(frozen=True)
class PipelineConfig:
    t: float | None = None
    t_quantile: float | None = None
    m: int = 10
    feed_mode: str = "full"
    eps_s: float = 0.1
    eps_a: float = 0.1
    seed: int = 0
    metric: str = "jaccard"
    exposure_kind: str | None = None
    target_kind: str | None = None
    match_kind: str | None = None  # defaults to the exposure kind
    min_actions_total: int = 10
    min_actions_each_side: int = 5
    core_threshold: float = 0.75
    coverage_required: float = 1.0
    max_candidates: int | None = None
    candidate_pool: str = "eligible"
    n_bootstrap: int = 1000
    feed_scope: str = "all"

    def resolve_t(self, log: ActivityLog) -> float:
        if self.t is not None:
            return float(self.t)
        if self.t_quantile is not None:
            return time_quantile(log, self.t_quantile)
        raise ValueError("either t or t_quantile is required")

    @property
    def kind_for_matching(self):
        return self.match_kind if self.match_kind is not None else self.exposure_kind

    def match_config(self, T: float) -> MatchConfig:
        return MatchConfig(eps_s=self.eps_s, eps_a=self.eps_a, rng_seed=derive_seed(self.seed, "match", T),
                           max_candidates=self.max_candidates, coverage_required=self.coverage_required,
                           metric=self.metric)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **kw) -> "PipelineConfig":
        return replace(self, **kw)


@dataclass
class PipelineResult:
    T: float
    eligible: np.ndarray  # user codes
    assignments: dict
    records: list
    skipped: dict
    summary: EstimateSummary | None
    match_seconds: float = 0.0
    estimate_seconds: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def mean_coverage(self) -> float:
        if not self.assignments:
            return math.nan
        return float(np.mean([a.coverage for a in self.assignments.values()]))


def prepare_matching(log: ActivityLog, graph: SocialGraph, cfg: PipelineConfig, T: float):
    """Eligible users, pre-T profile store and candidate pool."""
    split = SplitConfig(T, cfg.min_actions_total, cfg.min_actions_each_side)
    split.check_inside(log)
    mkind = cfg.kind_for_matching
    post_kind = cfg.target_kind if cfg.target_kind is not None else mkind
    elig = eligible_mask(log, graph, split, cfg.core_threshold, kind=mkind, post_kind=post_kind)
    pre, _ = split_at(log, T)
    store = ProfileStore(pre, mkind)
    if cfg.candidate_pool == "eligible":
        pool = elig
    elif cfg.candidate_pool == "all":
        pool = log.counts(mkind) >= cfg.min_actions_total
    else:
        raise ValueError(f"unknown candidate pool {cfg.candidate_pool!r}")
    return elig, store, pool


def run_pme(log: ActivityLog, graph: SocialGraph, cfg: PipelineConfig, assignments: dict | None = None,
            backend: str | None = None) -> PipelineResult:
    T = cfg.resolve_t(log)
    t0 = time.perf_counter()
    elig, store, pool = prepare_matching(log, graph, cfg, T)
    users = np.flatnonzero(elig)
    if assignments is None:
        assignments = match_all(users, graph, store, cfg.match_config(T), pool_mask=pool)
    t1 = time.perf_counter()
    est = estimate_many(assignments, log, graph, T, FeedModel(cfg.m, cfg.feed_mode),
                        cfg.exposure_kind, cfg.target_kind, min_post_actions=1,
                        feed_scope=cfg.feed_scope, backend=backend)
    summary = None
    if len(est.records) >= 2:
        summary = network_estimate(est.records, cfg.n_bootstrap, derive_seed(cfg.seed, "bootstrap", T))
    t2 = time.perf_counter()
    return PipelineResult(T, users, assignments, est.records, est.skipped, summary, t1 - t0, t2 - t1)

"""Semi-synthetic behaviour: regenerate post-T items under a known process.

The (user, time, kind) skeleton after T is kept; only items change. Processes:

ci    pick uniformly among the distinct items in the friends' last m actions
pp    the same over the k most similar users (fixed from pre-T profiles)
ee    pick an action uniformly from everything so far, i.e. items weighted by
      current popularity
mix   per action, ci with probability p_copy, else pp

An empty window falls back to ee for that action.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import ActivityLog, SocialGraph, split_at
from .pipeline import PipelineConfig, run_pme
from .seeding import derive_seed
from .similarity import ProfileStore, top_k_all

_CODES = {"ci": kernels.CI, "pp": kernels.PP, "ee": kernels.EE, "mix": kernels.MIX}


@dataclass(frozen=True)
class SynthProcess:
    variant: str
    k: int = 10
    p_copy: float = 0.0

    def __post_init__(self):
        if self.variant not in _CODES:
            raise ValueError(f"unknown process {self.variant!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 <= self.p_copy <= 1:
            raise ValueError("p_copy must lie in [0, 1]")

    @classmethod
    def parse(cls, text: str, k: int = 10) -> "SynthProcess":
        text = text.strip().lower()
        if text.startswith("mix:"):
            return cls("mix", k, float(text[4:]))
        return cls(text, k)

    @property
    def name(self) -> str:
        return f"mix:{self.p_copy:g}" if self.variant == "mix" else self.variant

    @property
    def needs_friends(self) -> bool:
        return self.variant in ("ci", "mix")

    @property
    def needs_neighbors(self) -> bool:
        return self.variant in ("pp", "mix")


@dataclass
class SynthRun:
    seed: int
    process: SynthProcess
    m: int
    T: float
    output: ActivityLog
    n_generated: int
    n_fallback: int
    n_copy_choices: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def fallback_rate(self) -> float:
        return self.n_fallback / self.n_generated if self.n_generated else 0.0


def neighbor_table(log: ActivityLog, T: float, k: int, kind: str | None = None,
                   metric: str = "jaccard") -> np.ndarray:
    pre, _ = split_at(log, T)
    return top_k_all(ProfileStore(pre, kind), k, metric)


def generate(log: ActivityLog, graph: SocialGraph, process: SynthProcess, T: float, m: int = 10,
             seed: int = 0, kind: str | None = None, neighbors: np.ndarray | None = None,
             backend: str | None = None) -> SynthRun:
    """Replace items of `kind` actions at or after T with process-generated ones."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not np.array_equal(log.users, graph.users):
        raise ValueError("log and graph use different user tables")
    sel = np.ones(len(log), dtype=bool) if kind is None else log.kind == log.kind_code(kind)
    idx = np.flatnonzero(sel)
    t = np.ascontiguousarray(log.time[idx])
    regen = t >= T
    if not regen.any():
        raise ValueError("no actions at or after T to regenerate")
    if regen.all():
        raise ValueError("no actions before T to start from")
    n_users = log.n_users
    actors, chans = [], []
    if process.needs_friends:
        src = np.repeat(np.arange(n_users), graph.degree)
        actors.append(graph.indices.astype(np.int64))
        chans.append(2 * src)
    if process.needs_neighbors:
        if neighbors is None:
            neighbors = neighbor_table(log, T, process.k, kind)
        nb = neighbors[:, :process.k]
        src = np.repeat(np.arange(n_users), nb.shape[1]).reshape(nb.shape)
        ok = nb >= 0
        actors.append(nb[ok].astype(np.int64))
        chans.append(2 * src[ok] + 1)
    actor_e = np.concatenate(actors) if actors else np.zeros(0, np.int64)
    chan_e = np.concatenate(chans) if chans else np.zeros(0, np.int64)
    order = np.lexsort((chan_e, actor_e))
    fan_chan = np.ascontiguousarray(chan_e[order], dtype=np.int64)
    fan_ptr = np.zeros(n_users + 1, dtype=np.int64)
    np.cumsum(np.bincount(actor_e, minlength=n_users), out=fan_ptr[1:])

    rng = np.random.default_rng(seed)
    u_mix = rng.random(len(idx))
    u_pick = rng.random(len(idx))
    impl = kernels if backend is None else kernels.backend(backend)
    new_items, fb, cp = impl.synth_generate(
        t, np.ascontiguousarray(log.user[idx], dtype=np.int64),
        np.ascontiguousarray(log.item[idx], dtype=np.int64), regen.astype(np.uint8),
        u_mix, u_pick, fan_ptr, fan_chan, n_users, int(m), _CODES[process.variant],
        float(process.p_copy), len(log.items))
    items = np.array(log.item, dtype=np.int32)
    items[idx] = new_items
    out = log.with_items(items)
    return SynthRun(seed, process, m, T, out, int(regen.sum()), int(fb.sum()), int(cp.sum()))


def generate_network(n_users: int = 600, n_items: int = 3000, n_clusters: int = 6, mean_degree: float = 8.0,
                     degree_dist: str = "poisson", homophily: float = 0.9, mean_actions: float = 80.0,
                     min_actions: int = 20, item_noise: float = 0.05, zipf: float = 0.8,
                     taste_width: float | None = None, taste_kernel: str = "uniform",
                     friend_reach: float = 0.05,
                     horizon: float = 1.0, min_degree: int = 1, missing_friends: float = 0.0,
                     kind: str = "action", seed: int = 0) -> tuple[ActivityLog, SocialGraph]:
    """Random friendship graph plus an activity log with planted taste clusters.

    Users and items are split into `n_clusters` groups. Each action picks,
    with probability 1 - `item_noise`, an item from the user's cluster pool
    (Zipf-weighted by within-pool rank), otherwise a uniform item. With
    `taste_width` set, each user instead sits at a random point of its pool
    (taken as a ring) and draws items at Gaussian offsets of that width
    (a fraction of the pool size), so similarity decays with distance. The
    default "uniform" kernel draws offsets in [-width, width], so users more
    than two widths apart share no taste at all; "gauss" uses a normal kernel. Friend
    choices stay inside the cluster with probability `homophily`; with
    `taste_width` set those ties also land within `friend_reach` of the
    user's ring position. Action times
    are uniform on [0, horizon). `missing_friends` > 0 declares extra friends
    absent from the graph, as in a crawled sample.
    """
    if n_users < 1 or n_items < 1 or n_clusters < 1 or mean_actions <= 0:
        raise ValueError("sizes must be positive")
    rng = np.random.default_rng(seed)
    n_clusters = min(n_clusters, n_users, n_items)
    ucl = rng.permutation(np.arange(n_users) * n_clusters // n_users)
    icl = np.arange(n_items) * n_clusters // n_items
    members = [np.flatnonzero(ucl == c) for c in range(n_clusters)]
    pools = [np.flatnonzero(icl == c) for c in range(n_clusters)]

    # graph
    if degree_dist == "poisson":
        deg = rng.poisson(mean_degree, n_users)
    elif degree_dist == "geometric":
        deg = rng.geometric(1.0 / max(mean_degree, 1.0), n_users)
    elif degree_dist == "powerlaw":
        deg = np.round(rng.pareto(2.0, n_users) * mean_degree + 1).astype(np.int64)
    else:
        raise ValueError(f"unknown degree distribution {degree_dist!r}")
    stubs = np.ceil(np.maximum(deg, 0) / 2).astype(np.int64)
    src = np.repeat(np.arange(n_users), stubs)
    inside = rng.random(len(src)) < homophily
    dst = rng.integers(0, n_users, len(src))
    center = rng.random(n_users)
    for c in range(n_clusters):
        pick = inside & (ucl[src] == c)
        if taste_width is None:
            dst[pick] = members[c][rng.integers(0, len(members[c]), pick.sum())]
        else:
            # homophilous ties land near the user's taste position on the ring
            by_pos = members[c][np.argsort(center[members[c]])]
            want = (center[src[pick]] + rng.uniform(-friend_reach, friend_reach, pick.sum())) % 1.0
            at = np.searchsorted(center[by_pos], want) % len(by_pos)
            dst[pick] = by_pos[at]
    keep = src != dst
    src, dst = src[keep], dst[keep]
    if min_degree > 0 and n_users > 1:
        has = np.zeros(n_users, dtype=bool)
        has[src] = has[dst] = True
        lonely = np.flatnonzero(~has)
        other = (lonely + rng.integers(1, n_users, len(lonely))) % n_users
        src, dst = np.concatenate([src, lonely]), np.concatenate([dst, other])
    users = np.arange(n_users)
    graph = SocialGraph.from_codes(src, dst, users)
    if missing_friends > 0:
        extra = rng.binomial(np.maximum(graph.degree, 1), missing_friends)
        graph = SocialGraph(graph.indptr, graph.indices, users, graph.degree + extra)

    # actions
    sigma = 0.6
    counts = rng.lognormal(math.log(mean_actions) - sigma ** 2 / 2, sigma, n_users)
    counts = np.maximum(np.round(counts).astype(np.int64), min_actions)
    owner = np.repeat(np.arange(n_users), counts)
    n = len(owner)
    item = rng.integers(0, n_items, n)
    in_pool = rng.random(n) >= item_noise
    for c in range(n_clusters):
        pool = pools[c]
        pick = in_pool & (ucl[owner] == c)
        if taste_width is None:
            w = 1.0 / np.arange(1, len(pool) + 1) ** zipf
            w /= w.sum()
            item[pick] = pool[rng.choice(len(pool), size=pick.sum(), p=w)]
        else:
            if taste_kernel == "uniform":
                off = rng.uniform(-taste_width, taste_width, pick.sum()) * len(pool)
            elif taste_kernel == "gauss":
                off = rng.normal(0.0, taste_width * len(pool), pick.sum())
            else:
                raise ValueError(f"unknown taste kernel {taste_kernel!r}")
            at = np.floor(center[owner[pick]] * len(pool) + off).astype(np.int64) % len(pool)
            item[pick] = pool[at]
    times = rng.random(n) * horizon
    log = ActivityLog(owner, item, times, np.zeros(n, dtype=np.int8), users, np.arange(n_items), (kind,))
    return log, graph


# Desk-scale network used for the recovery checks: ring tastes with
# homophilous ties inside the taste window, so zero pre-T similarity really
# means unrelated taste. Split at the 0.9 time quantile.
VALIDATION_NETWORK = dict(n_users=3000, n_items=50000, n_clusters=3, mean_degree=5.0,
                          mean_actions=100.0, taste_width=0.03, friend_reach=0.02)
VALIDATION_T_QUANTILE = 0.9


@dataclass
class ValidationRow:
    process: str
    T: float
    run: int
    friends_overlap: float
    strangers_overlap: float
    copy_influence: float
    se: float
    n_users: int
    fallback_rate: float
    counted: bool


@dataclass
class ValidationTable:
    rows: list
    seconds: float = 0.0

    def summary(self) -> list[dict]:
        """Grand means over counted runs and all T, one row per process."""
        out = []
        for name in dict.fromkeys(r.process for r in self.rows):
            rs = [r for r in self.rows if r.process == name and r.counted]
            if not rs:
                out.append(dict(process=name, friends_overlap=math.nan, copy_influence=math.nan,
                                se=math.nan, runs=0))
                continue
            out.append(dict(
                process=name,
                friends_overlap=float(np.mean([r.friends_overlap for r in rs])),
                copy_influence=float(np.mean([r.copy_influence for r in rs])),
                se=float(np.mean([r.se for r in rs])),
                runs=len(rs),
            ))
        return out


def validation_run(log: ActivityLog, graph: SocialGraph, processes, t_list, n_runs: int,
                   cfg: PipelineConfig, m_gen: int | None = None, kind: str | None = None,
                   max_fallback: float = 0.05, progress=None) -> ValidationTable:
    """Generate + estimate `n_runs` times per process and T."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    start = time.perf_counter()
    processes = [p if isinstance(p, SynthProcess) else SynthProcess.parse(p) for p in processes]
    m_gen = cfg.m if m_gen is None else m_gen
    rows = []
    for T in t_list:
        T = float(T)
        kmax = max((p.k for p in processes if p.needs_neighbors), default=0)
        nb = neighbor_table(log, T, kmax, kind) if kmax else None
        for run in range(n_runs):
            run_cfg = cfg.with_(t=T, seed=derive_seed(cfg.seed, "validate", T, run))
            assignments = None
            for proc in processes:
                gseed = derive_seed(cfg.seed, "synth", proc.name, T, run)
                sr = generate(log, graph, proc, T, m_gen, gseed, kind, neighbors=nb)
                # matching only sees pre-T data, identical across processes
                res = run_pme(sr.output, graph, run_cfg, assignments=assignments)
                assignments = res.assignments
                s = res.summary
                rows.append(ValidationRow(
                    proc.name, T, run,
                    s.mean_friends_overlap if s else math.nan,
                    s.mean_strangers_overlap if s else math.nan,
                    s.mean_copy_influence_raw if s else math.nan,
                    s.bootstrap_se if s else math.nan,
                    s.n_users if s else 0, sr.fallback_rate,
                    bool(s) and sr.fallback_rate < max_fallback,
                ))
                if progress:
                    progress(rows[-1])
    return ValidationTable(rows, time.perf_counter() - start)

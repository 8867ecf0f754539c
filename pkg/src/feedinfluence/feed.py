"""Reconstructed activity feeds and the overlap between a user and a feed.

A feed shows the `m` most recent actions by a set of users strictly before a
query time. Two layouts are supported: full chronological, and one latest
action per member (the most recent `m` of those).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .model import ActivityLog

FULL = "full"
LATEST = "latest-per-friend"


@dataclass(frozen=True)
class FeedModel:
    m: int = 10
    mode: str = FULL

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("attention budget m must be >= 1")
        if self.mode not in (FULL, LATEST):
            raise ValueError(f"unknown feed mode {self.mode!r}")

    @property
    def latest_per_member(self) -> bool:
        return self.mode == LATEST


@dataclass(frozen=True)
class FeedSnapshot:
    items: frozenset
    source_events: tuple  # indices into the log, most recent first


def feed_before(t: float, w: Iterable[int], log: ActivityLog, model: FeedModel,
                kind: str | None = None) -> FeedSnapshot:
    """What a feed over members `w` showed just before time `t`."""
    members = np.asarray(sorted(set(w)), dtype=np.int64)
    mask = np.isin(log.user, members) & (log.time < t)
    if kind is not None:
        mask &= log.kind == log.kind_code(kind)
    idx = np.flatnonzero(mask)[::-1]  # most recent first in total order
    if model.latest_per_member:
        _, first = np.unique(log.user[idx], return_index=True)
        idx = idx[np.sort(first)]
    idx = idx[:model.m]
    return FeedSnapshot(frozenset(log.item[idx].tolist()), tuple(idx.tolist()))


def _fan_out(actor_of_entry: np.ndarray, chan_of_entry: np.ndarray, n_actors: int):
    order = np.lexsort((chan_of_entry, actor_of_entry))
    fan_chan = chan_of_entry[order].astype(np.int64)
    ptr = np.zeros(n_actors + 1, dtype=np.int64)
    np.cumsum(np.bincount(actor_of_entry, minlength=n_actors), out=ptr[1:])
    return ptr, fan_chan


def overlap_counts(log: ActivityLog, query_users: np.ndarray, member_sets: Sequence[Sequence[np.ndarray]],
                   model: FeedModel, exposure_kind: str | None, target_kind: str | None,
                   t_from: float = -np.inf, feed_from: float = -np.inf,
                   backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Feed hits for many (user, member set) pairs in one sweep.

    `member_sets[c][q]` is the c-th feed (e.g. friends, strangers) of
    `query_users[q]`. Only target actions at or after `t_from` are scored,
    and only exposure actions at or after `feed_from` enter feeds.
    A user's own actions never enter their own feeds.

    Returns hits with shape (n_query, n_feeds) and scored actions per user.
    """
    query_users = np.asarray(query_users, dtype=np.int64)
    nq, nf = len(query_users), len(member_sets)
    actors, chans = [], []
    for c, sets in enumerate(member_sets):
        for q, members in enumerate(sets):
            members = np.asarray(members, dtype=np.int64)
            members = members[members != query_users[q]]
            actors.append(members)
            chans.append(np.full(len(members), q * nf + c, dtype=np.int64))
    actor_e = np.concatenate(actors) if actors else np.zeros(0, np.int64)
    chan_e = np.concatenate(chans) if chans else np.zeros(0, np.int64)
    fan_ptr, fan_chan = _fan_out(actor_e, chan_e, log.n_users)

    ek = None if exposure_kind is None else log.kind_code(exposure_kind)
    tk = None if target_kind is None else log.kind_code(target_kind)
    push = np.ones(len(log), dtype=bool) if ek is None else log.kind == ek
    if feed_from > -np.inf:
        push &= log.time >= feed_from
    slot = np.full(log.n_users, -1, dtype=np.int64)
    slot[query_users] = np.arange(nq)
    query = slot[log.user]
    scored = log.time >= t_from
    if tk is not None:
        scored &= log.kind == tk
    query[~scored] = -1
    keep = push | (query >= 0)
    # members that never act need no events; dropping them keeps the sweep short
    keep &= (fan_ptr[log.user + 1] > fan_ptr[log.user]) | (query >= 0)
    impl = kernels if backend is None else kernels.backend(backend)
    hits, counts = impl.feed_sweep(
        np.ascontiguousarray(log.time[keep]),
        np.ascontiguousarray(log.user[keep], dtype=np.int64),
        np.ascontiguousarray(log.item[keep], dtype=np.int64),
        np.ascontiguousarray(push[keep], dtype=np.uint8),
        np.ascontiguousarray(query[keep]),
        fan_ptr, fan_chan, nq, nf, int(model.m), bool(model.latest_per_member),
    )
    return hits.reshape(nq, nf), counts


def overlap(u: int, w: Iterable[int], log: ActivityLog, model: FeedModel,
            exposure_kind: str | None = None, target_kind: str | None = None,
            t_from: float = -np.inf) -> float:
    """Fraction of u's target actions (at/after `t_from`) whose item was in the feed of `w`.

    Raises ValueError when u has no scored actions.
    """
    members = np.asarray(sorted(set(w)), dtype=np.int64)
    hits, counts = overlap_counts(log, np.array([u]), [[members]], model, exposure_kind,
                                  target_kind, t_from)
    if counts[0] == 0:
        raise ValueError("user has no actions to score")
    return float(hits[0, 0]) / float(counts[0])

"""Domain types: actions, activity logs, the social graph, and temporal splits.

Users, items and action kinds are stored as dense integer codes. User and
item codes follow the sorted order of their labels, so "deterministic user
order" anywhere in the package means label order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np


class Action(NamedTuple):
    user: object
    item: object
    time: float
    kind: str = "action"


def _encode(labels) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(labels)
    if arr.dtype.kind == "U":
        arr = arr.astype(object)
    table, codes = np.unique(arr, return_inverse=True)
    return table, codes.astype(np.int32)


def lookup(table: np.ndarray, labels) -> np.ndarray:
    """Codes of `labels` in a sorted label table; KeyError for unknown labels."""
    labels = np.asarray(labels, dtype=table.dtype if table.dtype != object else object)
    pos = np.searchsorted(table, labels)
    clipped = np.minimum(pos, max(len(table) - 1, 0))
    if len(labels) and (len(table) == 0 or np.any(table[clipped] != labels)):
        bad = labels[(pos >= len(table)) | (table[clipped] != labels)] if len(table) else labels
        raise KeyError(bad[0])
    return pos.astype(np.int64)


def _recode(codes: np.ndarray, old: np.ndarray, new: np.ndarray) -> np.ndarray:
    """Map codes into a superset label table."""
    if old is new or (len(old) == len(new) and np.array_equal(old, new)):
        return codes
    pos = np.searchsorted(new, old)
    if len(old) and (np.any(pos >= len(new)) or np.any(new[np.minimum(pos, len(new) - 1)] != old)):
        raise ValueError("label table is not a superset of the existing labels")
    return pos[codes].astype(np.int32)


class ActivityLog:
    """Time-sorted action events with shared label tables.

    Events are ordered by (time, user, item, input sequence). Per-(user, kind)
    event ranges are available through :meth:`user_events`.
    """

    def __init__(self, user, item, time, kind, users, items, kinds: Sequence[str], *, presorted=False):
        user = np.asarray(user, dtype=np.int32)
        item = np.asarray(item, dtype=np.int32)
        time = np.asarray(time, dtype=np.float64)
        kind = np.asarray(kind, dtype=np.int8)
        if not (len(user) == len(item) == len(time) == len(kind)):
            raise ValueError("event arrays differ in length")
        if len(time) and (not np.all(np.isfinite(time)) or time.min() < 0):
            raise ValueError("timestamps must be finite and non-negative")
        if len(kind) and (kind.min() < 0 or kind.max() >= len(kinds)):
            raise ValueError("kind code outside declared kinds")
        if not presorted:
            order = np.lexsort((item, user, time))
            user, item, time, kind = user[order], item[order], time[order], kind[order]
        for a in (user, item, time, kind):
            a.setflags(write=False)
        self.user, self.item, self.time, self.kind = user, item, time, kind
        self.users = np.asarray(users)
        self.items = np.asarray(items)
        self.kinds = tuple(kinds)

    # construction -------------------------------------------------------

    @classmethod
    def from_actions(cls, actions: Iterable[Action], kinds: Sequence[str] | None = None,
                     users=None, items=None) -> "ActivityLog":
        acts = list(actions)
        return cls.from_columns(
            [a.user for a in acts], [a.item for a in acts], [a.time for a in acts],
            [a.kind for a in acts], kinds=kinds, users=users, items=items,
        )

    @classmethod
    def from_columns(cls, user_labels, item_labels, times, kind_labels=None, *,
                     kinds: Sequence[str] | None = None, users=None, items=None) -> "ActivityLog":
        n = len(times)
        if kind_labels is None:
            kind_labels = ["action"] * n
        if kinds is None:
            kinds = sorted(set(kind_labels)) or ["action"]
        kinds = tuple(kinds)
        kind_index = {k: i for i, k in enumerate(kinds)}
        try:
            kcodes = np.fromiter((kind_index[k] for k in kind_labels), dtype=np.int8, count=n)
        except KeyError as exc:
            raise ValueError(f"undeclared action kind {exc.args[0]!r}") from None
        utab, ucodes = _encode(user_labels) if n else (np.array([], dtype=object), np.zeros(0, np.int32))
        itab, icodes = _encode(item_labels) if n else (np.array([], dtype=object), np.zeros(0, np.int32))
        if users is not None:
            users = np.asarray(users)
            ucodes, utab = _recode(ucodes, utab, users), users
        if items is not None:
            items = np.asarray(items)
            icodes, itab = _recode(icodes, itab, items), items
        return cls(ucodes, icodes, np.asarray(times, dtype=np.float64), kcodes, utab, itab, kinds)

    def _derive(self, mask=None, *, item=None, users=None) -> "ActivityLog":
        sel = slice(None) if mask is None else mask
        new_item = self.item[sel] if item is None else item
        u = self.user[sel]
        utab = self.users
        if users is not None:
            u, utab = _recode(u, self.users, users), users
        return ActivityLog(u, new_item, self.time[sel], self.kind[sel], utab, self.items,
                           self.kinds, presorted=item is None)

    def with_users(self, users) -> "ActivityLog":
        return self._derive(users=np.asarray(users))

    def with_items(self, item_codes: np.ndarray, items=None) -> "ActivityLog":
        """Same skeleton (user, time, kind) with replaced item codes, re-sorted."""
        out = ActivityLog(self.user, item_codes, self.time, self.kind, self.users,
                          self.items if items is None else items, self.kinds)
        return out

    def select_kind(self, kind: str | None) -> "ActivityLog":
        if kind is None:
            return self
        return self._derive(self.kind == self.kind_code(kind))

    # access -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.time)

    def __iter__(self) -> Iterator[Action]:
        for u, i, t, k in zip(self.user, self.item, self.time, self.kind):
            yield Action(self.users[u], self.items[i], float(t), self.kinds[k])

    def kind_code(self, kind: str) -> int:
        try:
            return self.kinds.index(kind)
        except ValueError:
            raise ValueError(f"unknown action kind {kind!r}; declared {self.kinds}") from None

    def user_code(self, label) -> int:
        pos = int(np.searchsorted(self.users, label))
        if pos >= len(self.users) or self.users[pos] != label:
            raise KeyError(label)
        return pos

    @property
    def n_users(self) -> int:
        return len(self.users)

    @cached_property
    def _index(self):
        # events grouped by (kind, user), each group in time order
        key = self.kind.astype(np.int64) * max(self.n_users, 1) + self.user
        order = np.argsort(key, kind="stable")
        counts = np.bincount(key, minlength=len(self.kinds) * max(self.n_users, 1))
        ptr = np.zeros(len(counts) + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        return order, ptr

    def user_events(self, user_code: int, kind: str | int | None = None) -> np.ndarray:
        """Indices (into this log) of a user's events, time-sorted."""
        if kind is None:
            return np.flatnonzero(self.user == user_code)
        k = kind if isinstance(kind, (int, np.integer)) else self.kind_code(kind)
        order, ptr = self._index
        g = k * max(self.n_users, 1) + user_code
        return order[ptr[g]:ptr[g + 1]]

    def counts(self, kind: str | None = None) -> np.ndarray:
        """Action events per user code (optionally of one kind)."""
        u = self.user if kind is None else self.user[self.kind == self.kind_code(kind)]
        return np.bincount(u, minlength=self.n_users)

    def distinct_items(self, user_code: int, kind: str | None = None) -> frozenset:
        return frozenset(self.item[self.user_events(user_code, kind)].tolist())

    @property
    def time_range(self) -> tuple[float, float]:
        if not len(self):
            return (math.nan, math.nan)
        return float(self.time[0]), float(self.time[-1])

    def same_as(self, other: "ActivityLog") -> bool:
        return (
            self.kinds == other.kinds
            and np.array_equal(self.users, other.users)
            and np.array_equal(self.items, other.items)
            and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in ("user", "item", "time", "kind"))
        )


class SocialGraph:
    """Undirected friendship graph in CSR form over user codes."""

    def __init__(self, indptr, indices, users, declared_degree=None):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int32)
        self.users = np.asarray(users)
        deg = np.diff(self.indptr)
        if declared_degree is not None:
            declared_degree = np.asarray(declared_degree, dtype=np.int64)
            known = declared_degree >= 0
            bad = known & (declared_degree < deg)
            if np.any(bad & (declared_degree > 0)):
                u = self.users[np.flatnonzero(bad & (declared_degree > 0))[0]]
                raise ValueError(f"declared degree of {u!r} is below its observed friend count")
        self.declared_degree = declared_degree

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], users=None, declared: dict | None = None) -> "SocialGraph":
        edges = list(edges)
        if users is None:
            labels = [a for e in edges for a in e] + list(declared or ())
            users = np.unique(np.asarray(labels, dtype=object)) if labels else np.array([], dtype=object)
        users = np.asarray(users)
        if not edges:
            a = b = np.zeros(0, dtype=np.int64)
        else:
            ends = np.asarray(edges, dtype=object)
            a = lookup(users, ends[:, 0])
            b = lookup(users, ends[:, 1])
        return cls.from_codes(a, b, users, _declared_array(declared, users))

    @classmethod
    def from_codes(cls, a, b, users, declared_degree=None) -> "SocialGraph":
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if np.any(a == b):
            raise ValueError("self-edges are not allowed")
        n = len(users)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        key = np.unique(lo * n + hi)
        lo, hi = key // n, key % n
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(indptr, dst, users, declared_degree)

    def neighbors(self, code: int) -> np.ndarray:
        return self.indices[self.indptr[code]:self.indptr[code + 1]]

    def adj(self, label) -> set:
        return {self.users[v] for v in self.neighbors(self.user_code(label))}

    def user_code(self, label) -> int:
        pos = int(np.searchsorted(self.users, label))
        if pos >= len(self.users) or self.users[pos] != label:
            raise KeyError(label)
        return pos

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    def edges(self) -> np.ndarray:
        src = np.repeat(np.arange(len(self.users)), self.degree)
        keep = src < self.indices
        return np.stack([src[keep], self.indices[keep]], axis=1)

    def with_users(self, users) -> "SocialGraph":
        users = np.asarray(users)
        e = self.edges()
        pos = _recode(np.arange(len(self.users), dtype=np.int32), self.users, users)
        dd = None
        if self.declared_degree is not None:
            dd = np.full(len(users), -1, dtype=np.int64)
            dd[pos] = self.declared_degree
        return SocialGraph.from_codes(pos[e[:, 0]], pos[e[:, 1]], users, dd)

    def same_as(self, other: "SocialGraph") -> bool:
        same_dd = (self.declared_degree is None) == (other.declared_degree is None)
        if same_dd and self.declared_degree is not None:
            same_dd = np.array_equal(self.declared_degree, other.declared_degree)
        return (np.array_equal(self.users, other.users) and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices) and same_dd)


def _declared_array(declared: dict | None, users: np.ndarray):
    if not declared:
        return None
    out = np.full(len(users), -1, dtype=np.int64)
    for label, cnt in declared.items():
        pos = int(np.searchsorted(users, label))
        if pos < len(users) and users[pos] == label:
            out[pos] = int(cnt)
    return out


def align(log: ActivityLog, graph: SocialGraph) -> tuple[ActivityLog, SocialGraph]:
    """Re-encode both structures onto the union of their user labels."""
    if np.array_equal(log.users, graph.users):
        return log, graph
    users = np.union1d(np.asarray(log.users, dtype=object), np.asarray(graph.users, dtype=object))
    return log.with_users(users), graph.with_users(users)


@dataclass(frozen=True)
class SplitConfig:
    T: float
    min_actions_total: int = 10
    min_actions_each_side: int = 5

    def __post_init__(self):
        if not math.isfinite(self.T):
            raise ValueError("T must be finite")
        if self.min_actions_each_side < 1:
            raise ValueError("min_actions_each_side must be >= 1")

    def check_inside(self, log: ActivityLog) -> None:
        lo, hi = log.time_range
        if not (lo < self.T < hi):
            raise ValueError(f"T={self.T} is not strictly inside the data range [{lo}, {hi}]")


def split_at(log: ActivityLog, T: float) -> tuple[ActivityLog, ActivityLog]:
    """Partition at T; events at exactly T go to the post side."""
    if not math.isfinite(T):
        raise ValueError("T must be finite")
    cut = int(np.searchsorted(log.time, T, side="left"))
    pre = np.zeros(len(log), dtype=bool)
    pre[:cut] = True
    return log._derive(pre), log._derive(~pre)


def time_quantile(log: ActivityLog, q: float) -> float:
    """Split time leaving a fraction 1 - q of the actions at or after it."""
    if not 0 < q < 1:
        raise ValueError("quantile must lie in (0, 1)")
    idx = min(int(math.floor(q * len(log))), len(log) - 1)
    return float(log.time[idx])


def _core_mask(graph: SocialGraph, threshold: float) -> np.ndarray:
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    deg = graph.degree
    has_friend = deg >= 1
    dd = graph.declared_degree
    if dd is None:
        return has_friend
    known = dd >= 0
    corrupt = known & (dd == 0) & has_friend
    if np.any(corrupt):
        u = graph.users[np.flatnonzero(corrupt)[0]]
        raise ValueError(f"user {u!r} declares 0 friends but has friends in the data")
    ratio = np.divide(deg, dd, out=np.zeros(len(deg)), where=known & (dd > 0))
    return np.where(known, has_friend & (ratio >= threshold), has_friend)


def core_users(graph: SocialGraph, threshold: float = 0.75) -> set:
    """Users whose observed friends cover at least `threshold` of their declared friends.

    Users without a declared count are core as soon as they have one friend.
    """
    return set(graph.users[_core_mask(graph, threshold)].tolist())


def eligible_mask(log: ActivityLog, graph: SocialGraph, cfg: SplitConfig, threshold: float = 0.75,
                  kind: str | None = None, post_kind: str | None = None) -> np.ndarray:
    if not np.array_equal(log.users, graph.users):
        raise ValueError("log and graph use different user tables; call align() first")
    post_kind = kind if post_kind is None else post_kind
    pre, post = split_at(log, cfg.T)
    n_pre = pre.counts(kind)
    n_post = post.counts(post_kind)
    total = log.counts(kind)
    ok = (total >= cfg.min_actions_total) & (n_pre >= cfg.min_actions_each_side) \
        & (n_post >= cfg.min_actions_each_side)
    return ok & _core_mask(graph, threshold)


def eligible_users(log: ActivityLog, graph: SocialGraph, cfg: SplitConfig, threshold: float = 0.75,
                   kind: str | None = None, post_kind: str | None = None) -> set:
    """Core users with enough actions overall and on both sides of T.

    `kind` selects which actions count for the total and pre-T thresholds;
    `post_kind` (default: `kind`) for the post-T threshold.
    """
    return set(log.users[eligible_mask(log, graph, cfg, threshold, kind, post_kind)].tolist())

"""Preference similarity over pre-T activity sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

from .model import ActivityLog


@dataclass(frozen=True)
class PreferenceProfile:
    user: object
    items: frozenset = field(default_factory=frozenset)
    action_count: int = 0

    def __post_init__(self):
        if len(self.items) > self.action_count:
            raise ValueError("a profile cannot hold more distinct items than actions")


def jaccard(a: PreferenceProfile, b: PreferenceProfile) -> float:
    union = len(a.items | b.items)
    if union == 0:
        return 0.0
    return len(a.items & b.items) / union


def cosine(a: PreferenceProfile, b: PreferenceProfile) -> float:
    if not a.items or not b.items:
        return 0.0
    return len(a.items & b.items) / math.sqrt(len(a.items) * len(b.items))


METRICS: dict[str, Callable] = {"jaccard": jaccard, "cosine": cosine}


def sim_from_counts(inter, size_a, size_b, metric: str = "jaccard"):
    """Vectorised similarity from intersection and set sizes.

    Uses the same arithmetic as :func:`jaccard` / :func:`cosine` so both
    paths agree bit for bit.
    """
    inter = np.asarray(inter, dtype=np.float64)
    size_a = np.asarray(size_a, dtype=np.float64)
    size_b = np.asarray(size_b, dtype=np.float64)
    if metric == "jaccard":
        denom = size_a + size_b - inter
        return np.divide(inter, denom, out=np.zeros(np.broadcast(inter, denom).shape), where=denom > 0)
    if metric == "cosine":
        denom = np.sqrt(size_a * size_b)
        return np.divide(inter, denom, out=np.zeros(np.broadcast(inter, denom).shape), where=denom > 0)
    raise ValueError(f"unknown metric {metric!r}")


class ProfileStore:
    """Binary user-by-item incidence of one action kind, plus event counts."""

    def __init__(self, log: ActivityLog, kind: str | None = None):
        sub = log.select_kind(kind)
        n, n_items = log.n_users, len(log.items)
        key = np.unique(sub.user.astype(np.int64) * max(n_items, 1) + sub.item)
        rows, cols = key // max(n_items, 1), key % max(n_items, 1)
        self.matrix = sp.csr_matrix(
            (np.ones(len(key), dtype=np.int32), (rows, cols)), shape=(n, n_items))
        self.sizes = np.diff(self.matrix.indptr)
        self.counts = np.bincount(sub.user, minlength=n)
        self.users = log.users
        self._t = None

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def transposed(self) -> sp.csr_matrix:
        if self._t is None:
            self._t = self.matrix.T.tocsr()
        return self._t

    def profile(self, code: int) -> PreferenceProfile:
        row = self.matrix.indices[self.matrix.indptr[code]:self.matrix.indptr[code + 1]]
        return PreferenceProfile(self.users[code], frozenset(row.tolist()), int(self.counts[code]))

    def intersections(self, rows) -> sp.csr_matrix:
        """|A_r ∩ A_v| for each requested row r against every user v (sparse)."""
        out = (self.matrix[rows] @ self.transposed).tocsr()
        out.sort_indices()
        return out

    def similarity_rows(self, rows, metric: str = "jaccard") -> sp.csr_matrix:
        inter = self.intersections(rows)
        r = np.repeat(np.asarray(rows), np.diff(inter.indptr))
        vals = sim_from_counts(inter.data, self.sizes[r], self.sizes[inter.indices], metric)
        return sp.csr_matrix((vals, inter.indices, inter.indptr), shape=inter.shape)


def top_k_similar(u: int, pool: Iterable[int], k: int, store: ProfileStore, metric: str = "jaccard") -> list[int]:
    """The k pool members most similar to u; ties go to the lower user code."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pool = np.asarray(sorted(set(pool) - {u}), dtype=np.int64)
    if not len(pool):
        return []
    row = store.similarity_rows([u], metric)
    sims = np.zeros(store.n_users)
    sims[row.indices] = row.data
    order = np.argsort(-sims[pool], kind="stable")
    return pool[order[:k]].tolist()


def top_k_all(store: ProfileStore, k: int, metric: str = "jaccard", users=None,
              block: int = 512) -> np.ndarray:
    """Top-k neighbour codes for every user (or the given ones), pool = all other users.

    Returns an (n, k) array padded with -1 where fewer than k others exist.
    """
    n = store.n_users
    users = np.arange(n) if users is None else np.asarray(users, dtype=np.int64)
    kk = min(k, n - 1)
    out = np.full((len(users), k), -1, dtype=np.int64)
    if kk <= 0:
        return out
    block = max(1, min(block, 20_000_000 // max(n, 1)))
    for start in range(0, len(users), block):
        rows = users[start:start + block]
        sims = store.similarity_rows(rows, metric).toarray()
        sims[np.arange(len(rows)), rows] = -np.inf
        # stable sort keeps lower codes first among equal similarities
        order = np.argsort(-sims, axis=1, kind="stable")[:, :kk]
        out[start:start + len(rows), :kk] = order
    return out

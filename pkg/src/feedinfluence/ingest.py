"""Flat-file loading: action logs, friendship edges and declared degrees.

Formats (tab, comma or whitespace separated, detected per file; an optional
header line is recognised by its column names):

    actions           user, item, timestamp[, kind[, rating]]
    edges             user, user
    declared degrees  user, count

Timestamps are non-negative numbers or ISO-8601 datetimes (converted to
epoch seconds, naive values read as UTC).
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .model import ActivityLog, SocialGraph

log_ = logging.getLogger(__name__)

ACTION_HEADER = {"user", "user_id", "userid"}
TIME_NAMES = ("timestamp", "time", "ts", "t")
EDGE_HEADER = ({"user", "user1", "user_a", "src", "source", "from", "node1"},
               {"user", "user2", "user_b", "friend", "dst", "target", "to", "node2"})
DEGREE_HEADER = ({"user", "user_id"}, {"degree", "count", "friends", "declared"})
DEFAULT_KIND = "action"
MAX_WARNINGS = 20


class DataError(ValueError):
    """Input data failed validation."""


@dataclass(frozen=True)
class DatasetManifest:
    actions: tuple = ()  # (path, kind or None) pairs
    edges: str | None = None
    declared_degrees: str | None = None
    kinds: tuple | None = None  # declared kinds; None = whatever the files use
    lenient: bool = False
    rating_threshold: float | None = None

    @classmethod
    def from_specs(cls, action_specs, edges=None, declared_degrees=None, **kw) -> "DatasetManifest":
        """Build from `path[:kind]` strings as given on the command line."""
        acts = []
        for spec in action_specs:
            path, kind = spec, None
            head, sep, tail = spec.rpartition(":")
            if sep and head and tail and os.sep not in tail and not os.path.exists(spec):
                path, kind = head, tail
            acts.append((path, kind))
        return cls(tuple(acts), edges, declared_degrees, **kw)

    def files(self) -> list[str]:
        out = [p for p, _ in self.actions]
        out += [p for p in (self.edges, self.declared_degrees) if p]
        return out

    def check(self) -> None:
        missing = [p for p in self.files() if not Path(p).is_file()]
        if missing:
            raise FileNotFoundError("missing input files: " + ", ".join(missing))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["actions"] = [list(a) for a in self.actions]
        return d


@dataclass
class FileReport:
    path: str
    lines: int = 0  # non-blank, non-header lines
    accepted: int = 0
    rejected: int = 0
    filtered: int = 0  # dropped by the rating threshold, not errors


@dataclass
class LoadReport:
    files: list = field(default_factory=list)
    self_edges: int = 0
    duplicate_edges: int = 0
    warnings: list = field(default_factory=list)

    def warn(self, msg: str) -> None:
        if len(self.warnings) < MAX_WARNINGS:
            self.warnings.append(msg)
        log_.warning(msg)

    @property
    def rejected(self) -> int:
        return sum(f.rejected for f in self.files)


@dataclass
class Dataset:
    log: ActivityLog
    graph: SocialGraph
    report: LoadReport


def parse_time(text: str) -> float:
    text = text.strip()
    try:
        t = float(text)
    except ValueError:
        try:
            dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
        except ValueError:
            raise DataError(f"unparseable timestamp {text!r}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        t = dt.timestamp()
    if not math.isfinite(t):
        raise DataError(f"non-finite timestamp {text!r}")
    if t < 0:
        raise DataError(f"negative timestamp {text!r}")
    return t


def _rows(path: str):
    """(line number, fields) for each non-blank line, delimiter sniffed from the first."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = ""
        for first in fh:
            if first.strip():
                break
        fh.seek(0)
        if "\t" in first:
            reader = csv.reader(fh, delimiter="\t")
        elif "," in first:
            reader = csv.reader(fh)
        else:
            reader = (line.split() for line in fh)
        for lineno, row in enumerate(reader, 1):
            row = [c.strip() for c in row]
            if not row or not any(row):
                continue
            yield lineno, row


class _Sink:
    def __init__(self, path: str, report: LoadReport, lenient: bool):
        self.rep = FileReport(path)
        report.files.append(self.rep)
        self.report, self.lenient, self.path = report, lenient, path

    def reject(self, lineno: int, msg: str) -> None:
        text = f"{self.path}:{lineno}: {msg}"
        if not self.lenient:
            raise DataError(text)
        self.rep.rejected += 1
        self.report.warn(text)


def _read_actions(path, kind, manifest, report, out):
    sink = _Sink(path, report, manifest.lenient)
    cols = None
    for n, (lineno, row) in enumerate(_rows(path)):
        if n == 0 and row[0].lower() in ACTION_HEADER:
            names = [c.lower() for c in row]
            tcol = next((names.index(t) for t in TIME_NAMES if t in names), 2)
            cols = (0, names.index("item") if "item" in names else 1, tcol,
                    names.index("kind") if "kind" in names else None,
                    names.index("rating") if "rating" in names else None)
            continue
        if cols is None:
            cols = (0, 1, 2, 3 if len(row) > 3 else None, 4 if len(row) > 4 else None)
        sink.rep.lines += 1
        ucol, icol, tcol, kcol, rcol = cols
        if len(row) <= max(c for c in cols if c is not None):
            sink.reject(lineno, f"expected at least {max(c for c in cols if c is not None) + 1} fields, got {len(row)}")
            continue
        user, item = row[ucol], row[icol]
        if not user or not item:
            sink.reject(lineno, "empty user or item")
            continue
        try:
            t = parse_time(row[tcol])
        except DataError as exc:
            sink.reject(lineno, str(exc))
            continue
        k = row[kcol] if kcol is not None and row[kcol] else (kind or DEFAULT_KIND)
        if kind is not None and k != kind:
            sink.reject(lineno, f"action kind {k!r} in a file declared as {kind!r}")
            continue
        if manifest.kinds is not None and k not in manifest.kinds:
            sink.reject(lineno, f"unknown action kind {k!r}")
            continue
        if manifest.rating_threshold is not None and rcol is not None:
            try:
                rating = float(row[rcol])
            except ValueError:
                sink.reject(lineno, f"unparseable rating {row[rcol]!r}")
                continue
            if rating < manifest.rating_threshold:
                sink.rep.filtered += 1
                continue
        out.append((user, item, t, k))
        sink.rep.accepted += 1


def _read_pairs(path, report, lenient, header_names, second_int: bool):
    sink = _Sink(path, report, lenient)
    pairs = []
    for n, (lineno, row) in enumerate(_rows(path)):
        if n == 0 and len(row) == 2 and row[0].lower() in header_names[0] \
                and row[1].lower() in header_names[1]:
            continue
        sink.rep.lines += 1
        if len(row) != 2 or not row[0] or not row[1]:
            sink.reject(lineno, f"expected 2 fields, got {len(row)}")
            continue
        if second_int:
            try:
                cnt = int(row[1])
            except ValueError:
                sink.reject(lineno, f"degree {row[1]!r} is not an integer")
                continue
            if cnt < 0:
                sink.reject(lineno, f"negative degree {cnt}")
                continue
            pairs.append((row[0], cnt))
        else:
            pairs.append((row[0], row[1]))
        sink.rep.accepted += 1
    return sink, pairs


def load(manifest: DatasetManifest) -> Dataset:
    manifest.check()
    if not manifest.actions:
        raise DataError("no action files given")
    report = LoadReport()
    rows: list[tuple] = []
    for path, kind in manifest.actions:
        _read_actions(path, kind, manifest, report, rows)

    edges = []
    if manifest.edges:
        sink, raw = _read_pairs(manifest.edges, report, manifest.lenient, EDGE_HEADER, False)
        seen = set()
        for a, b in raw:
            if a == b:
                report.self_edges += 1
                sink.rep.accepted -= 1
                sink.rep.rejected += 1
                report.warn(f"{manifest.edges}: self-edge on {a!r} ignored")
                continue
            key = (a, b) if a < b else (b, a)
            if key in seen:
                report.duplicate_edges += 1
                continue
            seen.add(key)
            edges.append(key)
    declared = None
    if manifest.declared_degrees:
        _, raw = _read_pairs(manifest.declared_degrees, report, manifest.lenient, DEGREE_HEADER, True)
        declared = {}
        for u, c in raw:
            declared[u] = c

    labels = [r[0] for r in rows] + [x for e in edges for x in e] + list(declared or ())
    users = np.unique(np.asarray(labels, dtype=object)) if labels else np.array([], dtype=object)
    kinds = manifest.kinds
    if kinds is None:
        kinds = tuple(sorted({r[3] for r in rows})) or (DEFAULT_KIND,)
    if rows:
        u, i, t, k = zip(*rows)
    else:
        u = i = t = k = ()
    log = ActivityLog.from_columns(np.asarray(u, dtype=object), np.asarray(i, dtype=object),
                                   np.asarray(t, dtype=np.float64), list(k), kinds=kinds, users=users)
    try:
        graph = SocialGraph.from_edges(edges, users=users, declared=declared)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    return Dataset(log, graph, report)


def load_dataset(manifest: DatasetManifest) -> tuple[ActivityLog, SocialGraph]:
    ds = load(manifest)
    return ds.log, ds.graph


def _fmt_time(t: float) -> str:
    return repr(float(t))


def write_dataset(log: ActivityLog, graph: SocialGraph, out_dir, kinds_in_files: bool = True) -> DatasetManifest:
    """Write tab-separated files that load back to identical structures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    apath, epath = out / "actions.tsv", out / "edges.tsv"
    with open(apath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["user", "item", "timestamp", "kind"])
        for u, i, t, k in zip(log.user, log.item, log.time, log.kind):
            w.writerow([log.users[u], log.items[i], _fmt_time(t), log.kinds[k]])
    with open(epath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        for a, b in graph.edges():
            w.writerow([graph.users[a], graph.users[b]])
    dpath = None
    if graph.declared_degree is not None:
        dpath = out / "declared_degrees.tsv"
        with open(dpath, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            for u, d in zip(graph.users, graph.declared_degree):
                if d >= 0:
                    w.writerow([u, int(d)])
    return DatasetManifest(((str(apath), None),), str(epath), str(dpath) if dpath else None,
                           kinds=log.kinds)


# statistics ------------------------------------------------------------


@dataclass(frozen=True)
class Distribution:
    mean: float
    se: float
    median: float
    min: float
    max: float
    n: int

    @classmethod
    def of(cls, values) -> "Distribution":
        v = np.asarray(values, dtype=np.float64)
        if not len(v):
            return cls(math.nan, math.nan, math.nan, math.nan, math.nan, 0)
        se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        return cls(float(v.mean()), se, float(np.median(v)), float(v.min()), float(v.max()), len(v))


@dataclass(frozen=True)
class DatasetStats:
    user_count: int
    item_count: int
    action_count: int
    edge_count: int
    actions_per_user: Distribution
    actions_per_item: Distribution
    friends_per_user: Distribution
    actions_by_kind: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kw)


def dataset_stats(log: ActivityLog, graph: SocialGraph) -> DatasetStats:
    """Counts and (mean, SE, median) distributions over users and items present in the log."""
    if not len(log):
        raise ValueError("empty log")
    per_user = np.bincount(log.user, minlength=log.n_users)
    per_item = np.bincount(log.item, minlength=len(log.items))
    per_user, per_item = per_user[per_user > 0], per_item[per_item > 0]
    by_kind = {k: int(np.sum(log.kind == c)) for c, k in enumerate(log.kinds)}
    return DatasetStats(
        user_count=len(per_user),
        item_count=len(per_item),
        action_count=len(log),
        edge_count=graph.n_edges,
        actions_per_user=Distribution.of(per_user),
        actions_per_item=Distribution.of(per_item),
        friends_per_user=Distribution.of(graph.degree),
        actions_by_kind=by_kind,
    )

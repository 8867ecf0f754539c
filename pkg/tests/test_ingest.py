import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings

from feedinfluence.ingest import (DataError, DatasetManifest, dataset_stats, load, load_dataset, parse_time,
                                  write_dataset)
from feedinfluence.model import ActivityLog, SocialGraph

from .conftest import micro_world
from .oracles import streaming_stats


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_symmetric_edges_collapse(tmp_path):
    a = _write(tmp_path / "a.tsv", "a\ti\t1\nb\ti\t2\n")
    e = _write(tmp_path / "e.txt", "a b\nb a\n")
    ds = load(DatasetManifest.from_specs([a], e))
    assert ds.graph.n_edges == 1 and ds.graph.adj("a") == {"b"}
    assert ds.report.duplicate_edges == 1


def test_self_edges_rejected_with_count(tmp_path):
    a = _write(tmp_path / "a.tsv", "a\ti\t1\n")
    e = _write(tmp_path / "e.csv", "a,b\nc,c\nd,d\n")
    ds = load(DatasetManifest.from_specs([a], e))
    assert ds.report.self_edges == 2 and ds.graph.n_edges == 1


def test_negative_timestamp_names_line(tmp_path):
    a = _write(tmp_path / "a.csv", "user,item,timestamp\nu,i,3\nu,j,-1\n")
    with pytest.raises(DataError, match=r"a\.csv:3: negative timestamp"):
        load(DatasetManifest.from_specs([a]))


def test_malformed_and_unparseable_lines(tmp_path):
    a = _write(tmp_path / "a.tsv", "u\ti\t1\nu\ti\n")
    with pytest.raises(DataError, match=":2:"):
        load(DatasetManifest.from_specs([a]))
    b = _write(tmp_path / "b.tsv", "u\ti\tyesterday\n")
    with pytest.raises(DataError, match="unparseable timestamp"):
        load(DatasetManifest.from_specs([b]))


def test_unknown_kind(tmp_path):
    a = _write(tmp_path / "a.tsv", "u\ti\t1\tlove\nu\tj\t2\tshare\n")
    with pytest.raises(DataError, match="unknown action kind"):
        load(DatasetManifest.from_specs([a], kinds=("love", "listen")))
    b = _write(tmp_path / "b.tsv", "u\ti\t1\tlisten\n")
    with pytest.raises(DataError, match="declared as"):
        load(DatasetManifest.from_specs([b + ":love"]))


def test_kind_from_path_suffix(tmp_path):
    a = _write(tmp_path / "loves.tsv", "u\ti\t1\n")
    b = _write(tmp_path / "listens.tsv", "u\ti\t2\nv\ti\t3\n")
    log, _ = load_dataset(DatasetManifest.from_specs([a + ":love", b + ":listen"]))
    assert log.kinds == ("listen", "love")
    assert log.counts("listen").sum() == 2 and log.counts("love").sum() == 1


def test_iso_timestamps():
    assert parse_time("1970-01-01T00:00:10Z") == 10.0
    assert parse_time("1970-01-01T00:01:00") == 60.0
    with pytest.raises(DataError):
        parse_time("nan")


def test_ten_thousand_line_fixture_counts(tmp_path):
    rng = np.random.default_rng(3)
    lines, bad = [], 0
    for k in range(10_000):
        r = rng.random()
        if r < 0.01:
            lines.append(f"u{k % 97}\ti{k % 31}\t-5")
            bad += 1
        elif r < 0.02:
            lines.append(f"u{k % 97}\ti{k % 31}")
            bad += 1
        elif r < 0.03:
            lines.append(f"u{k % 97}\ti{k % 31}\tnot-a-time")
            bad += 1
        else:
            lines.append(f"u{k % 97}\ti{k % 31}\t{rng.random() * 1000:.6f}")
    a = _write(tmp_path / "big.tsv", "\n".join(lines) + "\n")
    ds = load(DatasetManifest.from_specs([a], lenient=True))
    rep = ds.report.files[0]
    assert rep.rejected == bad
    assert rep.accepted + rep.rejected == rep.lines == 10_000
    assert dataset_stats(ds.log, ds.graph).action_count == 10_000 - bad


def test_rating_threshold_filter(tmp_path):
    a = _write(tmp_path / "r.csv", "user,item,timestamp,kind,rating\nu,i,1,rate,5\nu,j,2,rate,2\nv,i,3,rate,4\n")
    log, _ = load_dataset(DatasetManifest.from_specs([a], rating_threshold=3))
    assert len(log) == 2
    log, _ = load_dataset(DatasetManifest.from_specs([a]))
    assert len(log) == 3


def test_declared_degrees(tmp_path):
    a = _write(tmp_path / "a.tsv", "u\ti\t1\n")
    e = _write(tmp_path / "e.tsv", "u\tv\nu\tw\n")
    d = _write(tmp_path / "d.tsv", "user\tdegree\nu\t4\nv\t1\n")
    _, g = load_dataset(DatasetManifest.from_specs([a], e, d))
    assert g.declared_degree[g.user_code("u")] == 4
    assert g.declared_degree[g.user_code("w")] == -1
    bad = _write(tmp_path / "bad.tsv", "u\t1\n")
    with pytest.raises(DataError, match="declared degree"):
        load(DatasetManifest.from_specs([a], e, bad))


def test_missing_files_listed(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.tsv"):
        load(DatasetManifest.from_specs([str(tmp_path / "nope.tsv")]))


@settings(max_examples=25)
@given(micro_world())
def test_round_trip(tmp_path_factory, world):
    log, graph = world
    if not len(log):
        return
    d = tmp_path_factory.mktemp("rt")
    once = load(write_dataset(log, graph, d / "one"))
    twice = load(write_dataset(once.log, once.graph, d / "two"))
    assert once.log.same_as(twice.log) and once.graph.same_as(twice.graph)
    # labels come back as strings, which may reorder equal-time events
    want = Counter((str(a.user), str(a.item), a.time, a.kind) for a in log)
    assert Counter(tuple(a) for a in once.log) == want
    edges = {frozenset((str(graph.users[a]), str(graph.users[b]))) for a, b in graph.edges()}
    assert {frozenset((once.graph.users[a], once.graph.users[b])) for a, b in once.graph.edges()} == edges


def test_stats_small_examples():
    log = ActivityLog.from_columns(["a", "b", "b", "c", "c", "c"], list("xyzxyz"), range(6))
    s = dataset_stats(log, SocialGraph.from_edges([], users=log.users))
    assert s.actions_per_user.mean == 2 and s.actions_per_user.median == 2
    one = ActivityLog.from_columns(["a", "a"], ["x", "y"], [1, 2])
    s1 = dataset_stats(one, SocialGraph.from_edges([], users=one.users))
    assert s1.actions_per_user.se == 0.0
    json.loads(s1.to_json())


def test_stats_against_streaming_oracle(small_world):
    log, graph = small_world
    s = dataset_stats(log, graph)
    per_user = np.bincount(log.user)
    per_item = np.bincount(log.item)
    for dist, vals in ((s.actions_per_user, per_user[per_user > 0]), (s.actions_per_item, per_item[per_item > 0]),
                       (s.friends_per_user, graph.degree)):
        mean, se, med = streaming_stats(vals.tolist())
        assert math.isclose(dist.mean, mean, rel_tol=1e-9)
        assert math.isclose(dist.se, se, rel_tol=1e-9)
        assert dist.median == med
        assert dist.min <= dist.mean <= dist.max and dist.min <= dist.median <= dist.max

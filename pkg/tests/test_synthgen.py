from collections import Counter

import numpy as np
import pytest

from feedinfluence import kernels
from feedinfluence.estimation import estimate_many
from feedinfluence.feed import FeedModel
from feedinfluence.matching import MatchAssignment
from feedinfluence.model import ActivityLog, SocialGraph, time_quantile
from feedinfluence.pipeline import PipelineConfig, run_pme
from feedinfluence.synthgen import (VALIDATION_NETWORK, SynthProcess, generate, generate_network, neighbor_table,
                                    validation_run)

from .oracles import all_pairs, brute_jaccard


@pytest.fixture(scope="module")
def world():
    log, graph = generate_network(n_users=300, n_items=3000, n_clusters=3, mean_actions=40, seed=5,
                                  taste_width=0.05)
    return log, graph, time_quantile(log, 0.8)


def _skeleton(log):
    return Counter(zip(log.user.tolist(), log.time.tolist(), log.kind.tolist()))


def test_process_parsing():
    assert SynthProcess.parse("mix:0.25") == SynthProcess("mix", 10, 0.25)
    assert SynthProcess.parse("PP", k=5).k == 5
    assert SynthProcess.parse("mix:0.1").name == "mix:0.1"
    for bad in (lambda: SynthProcess("zz"), lambda: SynthProcess("pp", k=0), lambda: SynthProcess("mix", 10, 1.5)):
        with pytest.raises(ValueError):
            bad()


@pytest.mark.parametrize("proc", ["ci", "pp", "ee", "mix:0.3"])
def test_skeleton_preserved_and_pre_t_untouched(world, proc):
    log, graph, T = world
    out = generate(log, graph, SynthProcess.parse(proc), T, seed=1).output
    assert _skeleton(out) == _skeleton(log)
    pre = log.time < T
    assert np.array_equal(out.item[pre], log.item[pre]) and np.array_equal(out.user, log.user)


@pytest.mark.parametrize("proc", ["ci", "pp", "ee", "mix:0.5"])
def test_same_seed_same_output(world, proc):
    log, graph, T = world
    a = generate(log, graph, SynthProcess.parse(proc), T, seed=3).output
    b = generate(log, graph, SynthProcess.parse(proc), T, seed=3).output
    c = generate(log, graph, SynthProcess.parse(proc), T, seed=4).output
    assert a.item.tobytes() == b.item.tobytes()
    assert a.item.tobytes() != c.item.tobytes()


def test_singleton_window_is_copied():
    log = ActivityLog.from_columns(["f", "u", "u"], ["i", "x", "y"], [1.0, 0.5, 5.0])
    graph = SocialGraph.from_edges([("u", "f")], users=log.users)
    run = generate(log, graph, SynthProcess("ci"), 2.0, m=10, seed=0)
    assert log.items[run.output.item[-1]] == "i"
    assert run.n_generated == 1 and run.n_fallback == 0


def test_empty_window_falls_back_and_is_counted():
    log = ActivityLog.from_columns(["f", "u", "u"], ["i", "x", "y"], [3.0, 0.5, 5.0])
    graph = SocialGraph.from_edges([], users=log.users)
    run = generate(log, graph, SynthProcess("ci"), 2.0, m=10, seed=0)
    assert run.n_fallback == 2 and run.fallback_rate == 1.0


def test_generate_rejects_degenerate_splits(world):
    log, graph, _ = world
    with pytest.raises(ValueError):
        generate(log, graph, SynthProcess("ci"), 2.0)
    with pytest.raises(ValueError):
        generate(log, graph, SynthProcess("ci"), 0.0)


def test_copy_process_friend_overlap_is_one(world):
    log, graph, T = world
    run = generate(log, graph, SynthProcess("ci"), T, m=10, seed=2)
    assert run.n_fallback == 0
    users = np.arange(log.n_users)
    assignments = {int(u): MatchAssignment(user=int(u), n_friends=graph.degree[u]) for u in users}
    res = estimate_many(assignments, run.output, graph, T, FeedModel(10))
    assert all(r.friends_overlap == 1.0 for r in res.records)


def test_window_items_are_distinct():
    # f acted on "a" nine times then "b" once; a uniform draw over distinct items gives ~50/50
    rows = [("f", "a", 0.1 * k) for k in range(9)] + [("f", "b", 0.95)]
    rows += [(f"u{j}", "x", 0.5) for j in range(2000)] + [(f"u{j}", "y", 2.0 + j * 1e-4) for j in range(2000)]
    log = ActivityLog.from_columns(*zip(*rows))
    graph = SocialGraph.from_edges([(f"u{j}", "f") for j in range(2000)], users=log.users)
    out = generate(log, graph, SynthProcess("ci"), 1.5, m=10, seed=0).output
    new = Counter(log.items[i] for i in out.item[out.time >= 1.5])
    # each u only has friend f, who is silent after T, so every draw sees the same window
    assert set(new) == {"a", "b"} and abs(new["a"] / 2000 - 0.5) < 0.04


def test_mixture_endpoints_match_pure_processes(world):
    log, graph, T = world
    nb = neighbor_table(log, T, 10)
    pp = generate(log, graph, SynthProcess("pp"), T, seed=9, neighbors=nb).output
    ci = generate(log, graph, SynthProcess("ci"), T, seed=9, neighbors=nb).output
    mix0 = generate(log, graph, SynthProcess("mix", 10, 0.0), T, seed=9, neighbors=nb).output
    mix1 = generate(log, graph, SynthProcess("mix", 10, 1.0), T, seed=9, neighbors=nb).output
    assert np.array_equal(mix0.item, pp.item)
    assert np.array_equal(mix1.item, ci.item)


def test_external_exposure_follows_popularity():
    # pre-T popularity 1:2:7 over three items, then one draw per call
    t = np.array([0.0] * 10 + [1.0])
    actor = np.zeros(11, dtype=np.int64)
    item = np.array([0, 1, 1] + [2] * 7 + [0], dtype=np.int64)
    regen = np.array([0] * 10 + [1], dtype=np.uint8)
    fan_ptr = np.zeros(2, dtype=np.int64)
    fan_chan = np.zeros(0, dtype=np.int64)
    rng = np.random.default_rng(0)
    n = 100_000
    draws = np.empty(n, dtype=np.int64)
    for k in range(n):
        u = np.full(11, rng.random())
        out, _, _ = kernels.synth_generate(t, actor, item, regen, u, u, fan_ptr, fan_chan, 1, 10,
                                           kernels.EE, 0.0, 3)
        draws[k] = out[-1]
    freq = np.bincount(draws, minlength=3) / n
    assert np.allclose(freq, [0.1, 0.2, 0.7], atol=0.01)


def test_minimal_network_has_one_edge():
    log, graph = generate_network(n_users=2, n_items=10, n_clusters=1, mean_degree=1.0, seed=0)
    assert graph.n_edges == 1
    assert len(log) >= 2


def test_network_is_deterministic():
    a = generate_network(n_users=80, n_items=300, seed=4)
    b = generate_network(n_users=80, n_items=300, seed=4)
    assert a[0].same_as(b[0]) and a[1].same_as(b[1])
    assert a[0].time.tobytes() == b[0].time.tobytes()


def test_planted_clusters_separate_tastes():
    log, graph = generate_network(n_users=50, n_items=500, n_clusters=5, item_noise=0.0, mean_actions=30, seed=1)
    sets = [set(log.distinct_items(u)) for u in range(log.n_users)]
    clusters = {}
    for u, s in enumerate(sets):
        clusters[u] = min(s) * 5 // 500  # contiguous item pools
    for u, v in all_pairs(log.n_users):
        if clusters[u] != clusters[v]:
            assert brute_jaccard(sets[u], sets[v]) == 0.0
    within = [brute_jaccard(sets[u], sets[v]) for u, v in all_pairs(log.n_users) if clusters[u] == clusters[v]]
    assert min(within) > 0.0


def test_friendship_is_homophilous():
    log, graph = generate_network(n_users=400, n_items=2000, n_clusters=4, item_noise=0.0, seed=2)
    cl = np.array([min(log.distinct_items(u)) * 4 // 2000 for u in range(log.n_users)])
    a, b = np.repeat(np.arange(log.n_users), graph.degree), graph.indices
    assert np.mean(cl[a] == cl[b]) > 0.8


def test_ring_tastes_decay_with_distance():
    log, graph = generate_network(n_users=200, n_items=4000, n_clusters=1, taste_width=0.03, item_noise=0.0,
                                  mean_actions=60, seed=3)
    friends = [brute_jaccard(set(log.distinct_items(a)), set(log.distinct_items(b))) for a, b in graph.edges()]
    rng = np.random.default_rng(0)
    rand = [brute_jaccard(set(log.distinct_items(a)), set(log.distinct_items(b)))
            for a, b in rng.integers(0, 200, (300, 2)) if a != b]
    assert np.mean(friends) > 3 * np.mean(rand)
    assert np.mean(np.array(rand) == 0) > 0.5


def test_bad_network_arguments():
    with pytest.raises(ValueError):
        generate_network(n_users=0)
    with pytest.raises(ValueError):
        generate_network(degree_dist="lattice")
    with pytest.raises(ValueError):
        generate_network(taste_width=0.1, taste_kernel="box")


def test_missing_friends_raise_declared_degree():
    _, g = generate_network(n_users=100, n_items=300, missing_friends=0.5, seed=1)
    assert np.all(g.declared_degree >= g.degree) and np.any(g.declared_degree > g.degree)


@pytest.mark.slow
def test_mixture_estimates_increase_with_copy_probability():
    kw = dict(VALIDATION_NETWORK, n_users=1500, n_items=25000)
    log, graph = generate_network(seed=21, **kw)
    T = time_quantile(log, 0.9)
    procs = ["mix:0", "mix:0.01", "mix:0.1", "mix:0.5", "mix:1"]
    table = validation_run(log, graph, procs, [T], 1, PipelineConfig(t=T, seed=21))
    est = [r["copy_influence"] for r in table.summary()]
    assert all(a <= b + 0.01 for a, b in zip(est, est[1:])), est
    assert est[-1] > est[0] + 0.5


def test_validation_run_shape(world):
    log, graph, T = world
    T2 = time_quantile(log, 0.85)
    table = validation_run(log, graph, ["ci", "ee"], [T, T2], 2, PipelineConfig(t=T, min_actions_total=5,
                                                                                 min_actions_each_side=2))
    assert len(table.rows) == 2 * 2 * 2
    assert [r["process"] for r in table.summary()] == ["ci", "ee"]
    assert {r.run for r in table.rows} == {0, 1} and {r.T for r in table.rows} == {T, T2}
    with pytest.raises(ValueError):
        validation_run(log, graph, ["ci"], [T], 0, PipelineConfig(t=T))


def test_pipeline_on_copy_process_recovers_influence(world):
    log, graph, T = world
    out = generate(log, graph, SynthProcess("ci"), T, seed=0).output
    res = run_pme(out, graph, PipelineConfig(t=T, min_actions_total=5, min_actions_each_side=2))
    assert res.summary.mean_friends_overlap == 1.0
    assert res.summary.mean_copy_influence_raw > 0.5

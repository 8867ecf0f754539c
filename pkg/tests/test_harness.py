import json

import numpy as np
import pytest

from feedinfluence import harness
from feedinfluence.harness import RunManifest, SweepError, report, run_manifest, sweep
from feedinfluence.ingest import DataError, DatasetManifest, write_dataset
from feedinfluence.pipeline import PipelineConfig, run_pme
from feedinfluence.synthgen import generate_network

NET = dict(n_users=300, n_items=2000, n_clusters=3, mean_actions=60, seed=3)
RESULT_FILES = ("per_user.csv", "summary.json", "susceptibility.csv", "matches.jsonl", "manifest.json")


@pytest.fixture(scope="module")
def inputs():
    return generate_network(**NET)


@pytest.fixture(scope="module")
def manifest():
    return RunManifest.for_network(NET, PipelineConfig(t_quantile=0.7, n_bootstrap=200))


def test_digest_is_stable_and_sensitive(manifest, tmp_path):
    again = RunManifest.for_network(NET, PipelineConfig(t_quantile=0.7, n_bootstrap=200))
    assert again.digest == manifest.digest
    assert manifest.with_pipeline(m=5).digest != manifest.digest
    (tmp_path / "m.json").write_text(manifest.to_json())
    assert RunManifest.load(tmp_path / "m.json").digest == manifest.digest
    with pytest.raises(ValueError):
        RunManifest({}, None, None)


def test_reruns_are_byte_identical(manifest, inputs, tmp_path):
    run_manifest(manifest, tmp_path / "a", inputs)
    run_manifest(manifest, tmp_path / "b", inputs)
    for name in RESULT_FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    tel = json.loads((tmp_path / "a" / "telemetry.json").read_text())
    assert tel["manifest_digest"] == manifest.digest and tel["wall_seconds"] > 0


def test_every_output_names_the_digest(manifest, inputs, tmp_path):
    run_manifest(manifest, tmp_path, inputs)
    d = manifest.digest
    for name in ("per_user.csv", "susceptibility.csv"):
        assert (tmp_path / name).read_text().splitlines()[0] == f"# manifest_digest={d}"
    assert json.loads((tmp_path / "summary.json").read_text())["manifest_digest"] == d
    meta = json.loads((tmp_path / "matches.jsonl").read_text().splitlines()[0])["meta"]
    assert meta["manifest_digest"] == d


def test_match_file_round_trip(manifest, inputs, tmp_path):
    log, graph = inputs
    res = run_manifest(manifest, tmp_path, inputs)
    T, back, digest = harness.read_matches(tmp_path / "matches.jsonl", log.users)
    assert T == res.T and digest == manifest.digest
    assert {u: a.pairs for u, a in back.items()} == {u: a.pairs for u, a in res.assignments.items()}
    assert {u: a.excluded for u, a in back.items()} == {u: a.excluded for u, a in res.assignments.items()}
    for line in (tmp_path / "matches.jsonl").read_text().splitlines()[1:]:
        assert json.loads(line)["t"] == T
    again = run_pme(log, graph, manifest.config(), assignments=back)
    assert again.records == res.records


def test_match_file_errors(inputs, tmp_path):
    log, _ = inputs
    p = tmp_path / "m.jsonl"
    p.write_text('{"user": "nobody", "t": 1.0, "n_friends": 0, "excluded": false, "pairs": []}\n')
    with pytest.raises(DataError, match="not in the dataset"):
        harness.read_matches(p, log.users)
    p.write_text("not json\n")
    with pytest.raises(DataError, match=":1:"):
        harness.read_matches(p, log.users)


def test_single_value_sweep_equals_direct_run(manifest, inputs, tmp_path):
    rows = sweep("m", [10], manifest, tmp_path / "s.csv", inputs)
    direct = run_pme(*inputs, manifest.config()).summary
    assert rows[0]["friends_overlap"] == direct.mean_friends_overlap
    assert rows[0]["copy_influence"] == direct.mean_copy_influence_raw
    assert rows[0]["se"] == direct.bootstrap_se


def test_m_sweep_is_monotone_with_ratio(manifest, inputs, tmp_path):
    rows = sweep("m", [1, 5, 10, 20], manifest, tmp_path / "s.csv", inputs)
    fo = [r["friends_overlap"] for r in rows]
    so = [r["strangers_overlap"] for r in rows]
    assert fo == sorted(fo) and so == sorted(so)
    assert all("ratio" in r for r in rows)
    _, back = harness._read_csv(tmp_path / "s.csv")
    assert [float(r["value"]) for r in back] == [1, 5, 10, 20]


def test_eps_sweep_coverage_grows(manifest, inputs):
    rows = sweep("eps_s", [0.05, 0.1, 0.2], manifest.with_pipeline(eps_a=0.2), None, inputs)
    cov = [r["mean_coverage"] for r in rows]
    assert cov == sorted(cov)


def test_failed_sweep_keeps_partial_rows(manifest, inputs, tmp_path):
    with pytest.raises(SweepError) as err:
        sweep("m", [5, 0], manifest, tmp_path / "s.csv", inputs)
    assert len(err.value.rows) == 1
    _, back = harness._read_csv(tmp_path / "s.csv")
    assert len(back) == 1
    with pytest.raises(ValueError):
        sweep("k", [1], manifest)


def test_report_outputs(manifest, inputs, tmp_path):
    res = run_manifest(manifest, tmp_path, inputs)
    sweep("m", [1, 10], manifest, tmp_path / "sweep.csv", inputs)
    harness.write_csv(tmp_path / "validation.csv", ("process", "friends_overlap", "copy_influence", "se", "runs"),
                      [["ci", 1.0, 0.93, 0.01, 3], ["pp", 0.05, 0.0, 0.002, 3]], manifest.digest)
    written = report(tmp_path)
    _, hist = harness._read_csv(written["histogram"])
    assert sum(int(r["count"]) for r in hist) == len(res.records)
    _, bins = harness._read_csv(written["activity_bins"])
    assert sum(int(r["n_users"]) for r in bins) == len(res.records)
    _, val = harness._read_csv(written["validation"])
    assert [r["process"] for r in val] == ["ci", "pp"]
    _, ms = harness._read_csv(written["m_sweep"])
    assert [r["m"] for r in ms] == ["1", "10"]
    text = (tmp_path / "report" / "summary.txt").read_text()
    assert manifest.digest in text and "copy-influence" in text


def test_report_missing_files_are_listed(tmp_path):
    with pytest.raises(FileNotFoundError) as err:
        report(tmp_path)
    assert "per_user.csv" in str(err.value) and "summary.json" in str(err.value)


def test_report_on_empty_results(tmp_path):
    harness.write_per_user([], np.array([]), tmp_path / "per_user.csv", "abc")
    (tmp_path / "summary.json").write_text(json.dumps({"manifest_digest": "abc", "estimate": None}))
    written = report(tmp_path)
    assert "histogram" not in written
    assert "zero eligible users" in (tmp_path / "report" / "summary.txt").read_text()


def test_dataset_manifest_detects_changed_inputs(inputs, tmp_path):
    log, graph = inputs
    dm = write_dataset(log, graph, tmp_path / "data")
    m = RunManifest.for_dataset(dm, PipelineConfig(t_quantile=0.8))
    back, _ = m.load_inputs()
    assert len(back) == len(log)
    edges = tmp_path / "data" / "edges.tsv"
    edges.write_text(edges.read_text() + "x\ty\n")
    with pytest.raises(DataError, match="changed"):
        m.load_inputs()


def test_dataset_manifest_round_trip(tmp_path):
    a = tmp_path / "a.tsv"
    a.write_text("u\ti\t1\n")
    dm = DatasetManifest.from_specs([f"{a}:love"], kinds=("love",))
    m = RunManifest.for_dataset(dm, PipelineConfig(t=0.5))
    (tmp_path / "m.json").write_text(m.to_json())
    back = RunManifest.load(tmp_path / "m.json")
    assert back.dataset_manifest() == dm and back.digest == m.digest

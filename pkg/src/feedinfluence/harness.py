"""Reproducible runs: manifests, output files, parameter sweeps and reports.

Every file written here carries the digest of the manifest that produced it
(a leading ``# manifest_digest=...`` line in CSVs, a ``manifest_digest`` key
in JSON). Timings and memory go to a separate telemetry file so the result
files stay byte-identical between reruns.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._version import __version__
from .estimation import OverlapRecord, network_estimate, susceptibility_by_activity
from .ingest import DataError, DatasetManifest, load_dataset
from .matching import MatchAssignment, PairDiagnostics
from .model import ActivityLog, SocialGraph
from .pipeline import PipelineConfig, PipelineResult, run_pme
from .synthgen import generate_network

SWEEP_PARAMS = ("m", "t", "eps_s", "eps_a")
DEFAULT_BINS = (1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384, 1 << 62)
HIST_EDGES = np.linspace(-1.0, 1.0, 41)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else str(x)
    return x


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


@dataclass
class Telemetry:
    wall_seconds: float = 0.0
    match_seconds: float = 0.0
    estimate_seconds: float = 0.0
    peak_rss_mb: float = math.nan

    @staticmethod
    def peak_rss() -> float:
        try:
            import resource
        except ImportError:  # not on every platform
            return math.nan
        return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


@dataclass
class RunManifest:
    """Everything that determines a run's numbers."""
    pipeline: dict
    dataset: dict | None = None  # DatasetManifest fields
    network: dict | None = None  # generate_network keyword arguments
    input_digests: dict = field(default_factory=dict)
    version: str = __version__
    bins: tuple = DEFAULT_BINS

    def __post_init__(self):
        if (self.dataset is None) == (self.network is None):
            raise ValueError("a manifest needs exactly one of dataset or network")

    @classmethod
    def for_dataset(cls, dm: DatasetManifest, cfg: PipelineConfig, **kw) -> "RunManifest":
        dm.check()
        digests = {p: file_digest(p) for p in dm.files()}
        return cls(cfg.to_dict(), dataset=dm.to_dict(), input_digests=digests, **kw)

    @classmethod
    def for_network(cls, network: dict, cfg: PipelineConfig, **kw) -> "RunManifest":
        return cls(cfg.to_dict(), network=dict(network), **kw)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    @property
    def digest(self) -> str:
        return text_digest(json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")))

    def to_json(self) -> str:
        return _dump(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        d = dict(d)
        if "bins" in d:
            d["bins"] = tuple(d["bins"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def config(self) -> PipelineConfig:
        return PipelineConfig(**self.pipeline)

    def dataset_manifest(self) -> DatasetManifest | None:
        if self.dataset is None:
            return None
        d = dict(self.dataset)
        d["actions"] = tuple(tuple(a) for a in d["actions"])
        if d.get("kinds") is not None:
            d["kinds"] = tuple(d["kinds"])
        return DatasetManifest(**d)

    def load_inputs(self) -> tuple[ActivityLog, SocialGraph]:
        if self.network is not None:
            return generate_network(**self.network)
        dm = self.dataset_manifest()
        dm.check()
        for p, want in self.input_digests.items():
            if file_digest(p) != want:
                raise DataError(f"input {p} changed since the manifest was written")
        return load_dataset(dm)

    def with_pipeline(self, **kw) -> "RunManifest":
        return RunManifest(self.config().with_(**kw).to_dict(), self.dataset, self.network,
                           dict(self.input_digests), self.version, self.bins)


# per-user records -------------------------------------------------------

PER_USER_FIELDS = ("user", "friends_overlap", "strangers_overlap", "raw", "clamped", "n_post_actions", "coverage")


def _f(x: float) -> str:
    return repr(float(x))


def write_per_user(records, users: np.ndarray, path, digest: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest_digest={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PER_USER_FIELDS)
        for r in records:
            w.writerow([users[r.user], _f(r.friends_overlap), _f(r.strangers_overlap), _f(r.copy_influence_raw),
                        _f(r.copy_influence_clamped), r.n_post_actions, _f(r.coverage)])


def _read_csv(path) -> tuple[str | None, list[dict]]:
    digest = None
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            if line.startswith("# manifest_digest="):
                digest = line.split("=", 1)[1].strip()
            continue
        body.append(line)
    return digest, list(csv.DictReader(body))


def read_per_user(path) -> tuple[str | None, list[OverlapRecord]]:
    digest, rows = _read_csv(path)
    recs = [OverlapRecord(i, float(r["friends_overlap"]), float(r["strangers_overlap"]),
                          int(r["n_post_actions"]), float(r["coverage"])) for i, r in enumerate(rows)]
    return digest, recs


def write_csv(path, header, rows, digest: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest_digest={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_f(v) if isinstance(v, float) else v for v in row])


# matches ------------------------------------------------------------------


def write_matches(assignments: dict, T: float, users: np.ndarray, path, digest: str) -> None:
    """JSON lines: a meta record, then one record per user with T attached."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": {"manifest_digest": digest, "t": T, "version": __version__}},
                            sort_keys=True) + "\n")
        for u, a in sorted(assignments.items()):
            pairs = []
            for f, s in sorted(a.pairs.items()):
                d = a.diagnostics[f]
                pairs.append([_jsonable(users[f]), _jsonable(users[s]), d.sim_friend, d.sim_stranger,
                              d.count_friend, d.count_stranger])
            rec = dict(user=_jsonable(users[u]), t=T, n_friends=a.n_friends, coverage=a.coverage,
                       excluded=a.excluded, candidates_tested=a.candidates_tested, cap_hit=a.cap_hit,
                       pairs=pairs)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_matches(path, users: np.ndarray) -> tuple[float, dict, str | None]:
    """Assignments keyed by user code, re-encoded against `users`."""
    T, digest, out = None, None, {}
    code = {(str(v) if not isinstance(v, (int, np.integer)) else int(v)): i for i, v in enumerate(users)}

    def c(label):
        try:
            return code[label]
        except KeyError:
            raise DataError(f"{path}: user {label!r} is not in the dataset") from None

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: {exc.msg}") from None
            if "meta" in rec:
                digest = rec["meta"].get("manifest_digest")
                T = rec["meta"].get("t", T)
                continue
            if T is None:
                T = rec["t"]
            elif rec["t"] != T:
                raise DataError(f"{path}:{lineno}: records with different T")
            a = MatchAssignment(c(rec["user"]), n_friends=rec["n_friends"],
                                candidates_tested=rec.get("candidates_tested", 0),
                                cap_hit=rec.get("cap_hit", False), excluded=rec["excluded"])
            for f, s, sf, ss, cf, cs in rec["pairs"]:
                a.pairs[c(f)] = c(s)
                a.diagnostics[c(f)] = PairDiagnostics(sf, ss, cf, cs)
            out[a.user] = a
    if T is None:
        raise DataError(f"{path}: no match records")
    return float(T), out, digest


# estimate outputs ---------------------------------------------------------


def write_estimate(result: PipelineResult, users: np.ndarray, out_dir, digest: str,
                   bins=DEFAULT_BINS, n_bootstrap: int = 1000, seed: int = 0) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_per_user(result.records, users, out / "per_user.csv", digest)
    s = result.summary
    summary = dict(manifest_digest=digest, T=result.T, n_eligible=len(result.eligible),
                   n_matched=len(result.assignments),
                   n_excluded=sum(a.excluded for a in result.assignments.values()),
                   n_estimated=len(result.records), mean_coverage=result.mean_coverage,
                   estimate=s.as_dict() if s else None)
    (out / "summary.json").write_text(_dump(summary), encoding="utf-8")
    rows = []
    if len(result.records):
        for b in susceptibility_by_activity(result.records, bins, n_bootstrap=n_bootstrap, rng_seed=seed):
            rows.append([float(b.lo), float(b.hi), b.n_users, b.mean_copy_influence, b.se])
    write_csv(out / "susceptibility.csv", ("lo", "hi", "n_users", "mean_copy_influence", "se"), rows, digest)


def run_manifest(manifest: RunManifest, out_dir, inputs=None) -> PipelineResult:
    """Match + estimate for one manifest, writing all result files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    log, graph = inputs if inputs is not None else manifest.load_inputs()
    cfg = manifest.config()
    res = run_pme(log, graph, cfg)
    digest = manifest.digest
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    write_matches(res.assignments, res.T, log.users, out / "matches.jsonl", digest)
    write_estimate(res, log.users, out, digest, manifest.bins, cfg.n_bootstrap, cfg.seed)
    tel = Telemetry(time.perf_counter() - t0, res.match_seconds, res.estimate_seconds, Telemetry.peak_rss())
    (out / "telemetry.json").write_text(_dump(dict(manifest_digest=digest, **asdict(tel))), encoding="utf-8")
    return res


# sweeps -----------------------------------------------------------------

SWEEP_FIELDS = ("param", "value", "T", "n_users", "mean_coverage", "friends_overlap", "strangers_overlap",
                "copy_influence", "copy_influence_clamped", "se")


class SweepError(RuntimeError):
    def __init__(self, msg, rows):
        super().__init__(msg)
        self.rows = rows


def sweep(param: str, values, manifest: RunManifest, out_path=None, inputs=None) -> list[dict]:
    """One full pipeline run per value; rows are written as they finish.

    For `m` sweeps a ``ratio`` column (Friends-Overlap / copy-influence) is added.
    """
    if param not in SWEEP_PARAMS:
        raise ValueError(f"cannot sweep {param!r}; choose from {SWEEP_PARAMS}")
    values = list(values)
    if not values:
        raise ValueError("no sweep values")
    log, graph = inputs if inputs is not None else manifest.load_inputs()
    header = SWEEP_FIELDS + (("ratio",) if param == "m" else ())
    rows = []
    digest = manifest.digest

    def flush():
        if out_path is not None:
            write_csv(out_path, header, [[r[h] for h in header] for r in rows], digest)

    for v in values:
        v = int(v) if param == "m" else float(v)
        m = manifest.with_pipeline(**{param: v})
        try:
            res = run_pme(log, graph, m.config())
        except Exception as exc:
            flush()
            raise SweepError(f"sweep {param}={v} failed: {exc}", rows) from exc
        s = res.summary
        row = dict(param=param, value=v, T=res.T, n_users=s.n_users if s else 0,
                   mean_coverage=res.mean_coverage,
                   friends_overlap=s.mean_friends_overlap if s else math.nan,
                   strangers_overlap=s.mean_strangers_overlap if s else math.nan,
                   copy_influence=s.mean_copy_influence_raw if s else math.nan,
                   copy_influence_clamped=s.mean_copy_influence_clamped if s else math.nan,
                   se=s.bootstrap_se if s else math.nan)
        if param == "m":
            ci = row["copy_influence"]
            row["ratio"] = row["friends_overlap"] / ci if ci and math.isfinite(ci) else math.nan
        rows.append(row)
        flush()
    return rows


# report ---------------------------------------------------------------------


def report(results_dir, out_dir=None, bins=DEFAULT_BINS) -> dict:
    """Plot-ready data files and a text summary from an estimate directory.

    Needs per_user.csv and summary.json; sweep.csv and validation.csv are
    picked up when present.
    """
    res = Path(results_dir)
    need = [res / "per_user.csv", res / "summary.json"]
    missing = [str(p) for p in need if not p.is_file()]
    if missing:
        raise FileNotFoundError("missing result files: " + ", ".join(missing))
    out = Path(out_dir) if out_dir is not None else res / "report"
    out.mkdir(parents=True, exist_ok=True)
    digest, records = read_per_user(res / "per_user.csv")
    summary = json.loads((res / "summary.json").read_text(encoding="utf-8"))
    digest = digest or summary.get("manifest_digest") or "unknown"
    written = {}
    lines = [f"manifest_digest: {digest}"]

    if not records:
        lines.append("zero eligible users: no per-user estimates, histogram and activity bins skipped")
    else:
        raw = np.array([r.copy_influence_raw for r in records])
        counts, edges = np.histogram(np.clip(raw, -1.0, 1.0), bins=HIST_EDGES)
        rows = [[float(lo), float(hi), int(c)] for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
        write_csv(out / "per_user_histogram.csv", ("lo", "hi", "count"), rows, digest)
        written["histogram"] = str(out / "per_user_histogram.csv")
        bin_rows = [[b.lo, b.hi, b.n_users, b.mean_copy_influence, b.se]
                    for b in susceptibility_by_activity(records, bins, min_users=1)]
        write_csv(out / "activity_bins.csv", ("lo", "hi", "n_users", "mean_copy_influence", "se"), bin_rows, digest)
        written["activity_bins"] = str(out / "activity_bins.csv")
        est = summary.get("estimate")
        if est is None and len(records) > 1:
            est = network_estimate(records).as_dict()
        lines.append(f"users estimated: {len(records)}")
        if est:
            lines += [
                f"mean Friends-Overlap: {est['mean_friends_overlap']:.6f}",
                f"mean Strangers-Overlap: {est['mean_strangers_overlap']:.6f}",
                f"mean copy-influence (raw): {est['mean_copy_influence_raw']:.6f} "
                f"(bootstrap SE {est['bootstrap_se']:.6f})",
                f"mean copy-influence (clamped): {est['mean_copy_influence_clamped']:.6f}",
                f"users with zero Friends-Overlap: {est['fraction_zero_friends_overlap']:.1%}",
                f"users with non-positive copy-influence: {est['fraction_nonpositive_influence']:.1%}",
            ]
        lines.append(f"mean coverage: {float(np.mean([r.coverage for r in records])):.4f}")

    sweep_path = res / "sweep.csv"
    if sweep_path.is_file():
        _, rows = _read_csv(sweep_path)
        m_rows = [r for r in rows if r["param"] == "m"]
        if m_rows:
            write_csv(out / "m_sweep.csv", ("m", "friends_overlap", "copy_influence", "ratio"),
                      [[int(float(r["value"])), float(r["friends_overlap"]), float(r["copy_influence"]),
                        float(r["ratio"])] for r in m_rows], digest)
            written["m_sweep"] = str(out / "m_sweep.csv")
            lines.append(f"m sweep: {len(m_rows)} values")
    val_path = res / "validation.csv"
    if val_path.is_file():
        _, rows = _read_csv(val_path)
        write_csv(out / "validation_table.csv", ("process", "friends_overlap", "copy_influence", "se"),
                  [[r["process"], float(r["friends_overlap"]), float(r["copy_influence"]), float(r["se"])]
                   for r in rows], digest)
        written["validation"] = str(out / "validation_table.csv")
        lines.append("validation:")
        for r in rows:
            lines.append(f"  {r['process']:<10} FrOverlap {float(r['friends_overlap']):.4f}  "
                         f"copy-influence {float(r['copy_influence']):.4f}  SE {float(r['se']):.4f}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    written["summary"] = str(out / "summary.txt")
    return written

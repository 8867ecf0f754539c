"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data validation failure, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from ._version import __version__
from .ingest import DataError, DatasetManifest, dataset_stats, load, write_dataset
from .matching import match_all
from .model import time_quantile
from .pipeline import PipelineConfig, prepare_matching, run_pme
from .seeding import derive_seed
from .synthgen import (VALIDATION_NETWORK, VALIDATION_T_QUANTILE, SynthProcess, generate, generate_network,
                       neighbor_table, validation_run)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
NETWORKS = {"validation": VALIDATION_NETWORK, "small": {}}
DEFAULT_PROCESSES = ("ci", "pp", "ee", "mix:0.5", "mix:0.1", "mix:0.01")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_data(p, allow_network=True):
    g = p.add_argument_group("input data")
    g.add_argument("--actions", action="append", default=[], metavar="PATH[:KIND]",
                   help="action file, optionally tagged with its kind (repeatable)")
    g.add_argument("--edges", help="friendship edge list")
    g.add_argument("--declared-degrees", help="user,count file of declared friend counts")
    g.add_argument("--kinds", help="comma-separated list of allowed action kinds")
    g.add_argument("--lenient", action="store_true", help="skip bad lines instead of failing")
    g.add_argument("--rating-threshold", type=float, help="drop actions rated below this value")
    if allow_network:
        g.add_argument("--network", choices=sorted(NETWORKS),
                       help="use a generated network instead of files")
        g.add_argument("--network-seed", type=int, default=0)


def _add_pipeline(p, multi_t=False):
    g = p.add_argument_group("pipeline")
    if multi_t:
        g.add_argument("--t", type=_floats, help="comma-separated split timestamps")
        g.add_argument("--t-quantile", type=_floats, help="comma-separated quantiles (default 0.9)")
    else:
        g.add_argument("--t", type=float, help="split timestamp T")
        g.add_argument("--t-quantile", type=float,
                       help="set T at this quantile of action times (0.9 = 10%% after T)")
    g.add_argument("--m", type=int, default=10, help="feed attention budget")
    g.add_argument("--feed-mode", choices=("full", "latest-per-friend"), default="full")
    g.add_argument("--eps-s", type=float, default=0.1)
    g.add_argument("--eps-a", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--metric", choices=("jaccard", "cosine"), default="jaccard")
    g.add_argument("--exposure-kind")
    g.add_argument("--target-kind")
    g.add_argument("--match-kind")
    g.add_argument("--min-actions", type=int, default=10)
    g.add_argument("--min-each-side", type=int, default=5)
    g.add_argument("--core-threshold", type=float, default=0.75)
    g.add_argument("--coverage-required", type=float, default=1.0)
    g.add_argument("--max-candidates", type=int)
    g.add_argument("--candidate-pool", choices=("eligible", "all"), default="eligible")
    g.add_argument("--bootstrap", type=int, default=1000)
    g.add_argument("--feed-scope", choices=("all", "post"), default="all")


def _config(a) -> PipelineConfig:
    return PipelineConfig(
        t=a.t, t_quantile=a.t_quantile, m=a.m, feed_mode=a.feed_mode, eps_s=a.eps_s, eps_a=a.eps_a,
        seed=a.seed, metric=a.metric, exposure_kind=a.exposure_kind, target_kind=a.target_kind,
        match_kind=a.match_kind, min_actions_total=a.min_actions, min_actions_each_side=a.min_each_side,
        core_threshold=a.core_threshold, coverage_required=a.coverage_required,
        max_candidates=a.max_candidates, candidate_pool=a.candidate_pool, n_bootstrap=a.bootstrap,
        feed_scope=a.feed_scope)


def _dataset_manifest(a) -> DatasetManifest:
    kinds = tuple(k.strip() for k in a.kinds.split(",")) if a.kinds else None
    return DatasetManifest.from_specs(a.actions, a.edges, a.declared_degrees, kinds=kinds,
                                      lenient=a.lenient, rating_threshold=a.rating_threshold)


def _network(a) -> dict:
    return dict(NETWORKS[a.network], seed=a.network_seed)


def _manifest(a, cfg: PipelineConfig) -> harness.RunManifest:
    if getattr(a, "manifest", None):
        return harness.RunManifest.load(a.manifest)
    if getattr(a, "network", None):
        if a.actions:
            raise UsageError("give either --network or --actions, not both")
        return harness.RunManifest.for_network(_network(a), cfg)
    if not a.actions:
        raise UsageError("no input: give --actions (and --edges) or --network")
    return harness.RunManifest.for_dataset(_dataset_manifest(a), cfg)


def _need_t(cfg: PipelineConfig):
    if cfg.t is None and cfg.t_quantile is None:
        raise UsageError("give --t or --t-quantile")


# subcommands ----------------------------------------------------------------


def cmd_ingest(a) -> int:
    if not a.actions:
        raise UsageError("ingest needs at least one --actions file")
    ds = load(_dataset_manifest(a))
    stats = dataset_stats(ds.log, ds.graph).to_dict()
    stats["load"] = dict(
        files=[vars(f) for f in ds.report.files], self_edges=ds.report.self_edges,
        duplicate_edges=ds.report.duplicate_edges, rejected_lines=ds.report.rejected)
    text = json.dumps(stats, indent=2, sort_keys=True) + "\n"
    if a.out:
        Path(a.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if a.write:
        write_dataset(ds.log, ds.graph, a.write)
    return EXIT_OK


def cmd_match(a) -> int:
    cfg = _config(a)
    if not a.manifest:
        _need_t(cfg)
    m = _manifest(a, cfg)
    cfg = m.config()
    log, graph = m.load_inputs()
    T = cfg.resolve_t(log)
    elig, store, pool = prepare_matching(log, graph, cfg, T)
    assignments = match_all(np.flatnonzero(elig), graph, store, cfg.match_config(T), pool_mask=pool)
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    harness.write_matches(assignments, T, log.users, out, m.digest)
    n_ex = sum(x.excluded for x in assignments.values())
    print(f"T={T!r}: {len(assignments)} eligible users matched, {n_ex} excluded -> {out}", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(a) -> int:
    cfg = _config(a)
    if a.network:
        raise UsageError("estimate reads a dataset from files; use `run` for generated networks")
    if not a.actions:
        raise UsageError("no input: give --actions (and --edges)")
    dm = _dataset_manifest(a)
    ds = load(dm)
    T, assignments, match_digest = harness.read_matches(a.matches, ds.log.users)
    cfg = cfg.with_(t=T, t_quantile=None)
    m = harness.RunManifest.for_dataset(dm, cfg)
    m.input_digests[str(a.matches)] = harness.file_digest(a.matches)
    res = run_pme(ds.log, ds.graph, cfg, assignments=assignments)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(m.to_json(), encoding="utf-8")
    harness.write_estimate(res, ds.log.users, out, m.digest, m.bins, cfg.n_bootstrap, cfg.seed)
    _print_summary(res)
    return EXIT_OK


def _print_summary(res) -> None:
    s = res.summary
    if s is None:
        print(f"T={res.T!r}: fewer than two users estimated", file=sys.stderr)
        return
    print(f"T={res.T!r} users={s.n_users} FrOverlap={s.mean_friends_overlap:.4f} "
          f"StrOverlap={s.mean_strangers_overlap:.4f} copy-influence={s.mean_copy_influence_raw:.4f} "
          f"(SE {s.bootstrap_se:.4f})", file=sys.stderr)


def cmd_run(a) -> int:
    cfg = _config(a)
    if not a.manifest:
        _need_t(cfg)
    m = _manifest(a, cfg)
    if a.save_manifest:
        Path(a.save_manifest).write_text(m.to_json(), encoding="utf-8")
    res = harness.run_manifest(m, a.out)
    _print_summary(res)
    return EXIT_OK


def _inputs(a):
    if a.network:
        if a.actions:
            raise UsageError("give either --network or --actions, not both")
        return generate_network(**_network(a))
    if not a.actions:
        raise UsageError("no input: give --actions (and --edges) or --network")
    ds = load(_dataset_manifest(a))
    return ds.log, ds.graph


def _t_list(a, log) -> list[float]:
    if a.t:
        return list(a.t)
    qs = a.t_quantile or [VALIDATION_T_QUANTILE]
    return [time_quantile(log, q) for q in qs]


def _input_manifest(a, cfg: PipelineConfig) -> harness.RunManifest:
    if getattr(a, "network", None):
        return harness.RunManifest.for_network(_network(a), cfg)
    return harness.RunManifest.for_dataset(_dataset_manifest(a), cfg)


def cmd_synth(a) -> int:
    log, graph = _inputs(a)
    procs = [SynthProcess.parse(p, a.k) for p in (a.process or ["ci"])]
    t_list = _t_list(a, log)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    m = _input_manifest(a, PipelineConfig(m=a.m, seed=a.seed))
    meta = dict(m.to_dict(), synth=dict(processes=[p.name for p in procs], k=a.k, runs=a.runs, t=t_list,
                                        kind=a.kind))
    (out / "manifest.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    digest = harness.text_digest(json.dumps(meta, sort_keys=True, separators=(",", ":")))
    rows = []
    for ti, T in enumerate(t_list):
        kmax = max((p.k for p in procs if p.needs_neighbors), default=0)
        nb = neighbor_table(log, T, kmax, a.kind) if kmax else None
        for proc in procs:
            for run in range(a.runs):
                seed = derive_seed(a.seed, "synth", proc.name, T, run)
                sr = generate(log, graph, proc, T, a.m, seed, a.kind, neighbors=nb)
                name = f"{proc.name.replace(':', '_')}_t{ti}_run{run}"
                write_dataset(sr.output, graph, out / name)
                rows.append([name, proc.name, T, run, seed, sr.n_generated, sr.n_fallback, sr.fallback_rate])
    harness.write_csv(out / "runs.csv", ("dir", "process", "T", "run", "seed", "n_generated", "n_fallback",
                                         "fallback_rate"), rows, digest)
    print(f"{len(rows)} synthetic datasets -> {out}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(a) -> int:
    log, graph = _inputs(a)
    cfg = _config(a).with_(t=None, t_quantile=None)
    procs = [SynthProcess.parse(p, a.k) for p in (a.process or DEFAULT_PROCESSES)]
    t_list = _t_list(a, log)

    def progress(r):
        print(f"  {r.process:<9} T={r.T:.6g} run {r.run}: FrOverlap {r.friends_overlap:.4f} "
              f"copy-influence {r.copy_influence:.4f}", file=sys.stderr)

    table = validation_run(log, graph, procs, t_list, a.runs, cfg, m_gen=a.m_gen, kind=a.kind,
                           progress=progress if a.verbose else None)
    m = _input_manifest(a, cfg)
    digest = m.digest
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(m.to_json(), encoding="utf-8")
    harness.write_csv(out / "validation.csv", ("process", "friends_overlap", "copy_influence", "se", "runs"),
                      [[s["process"], s["friends_overlap"], s["copy_influence"], s["se"], s["runs"]]
                       for s in table.summary()], digest)
    harness.write_csv(out / "validation_runs.csv",
                      ("process", "T", "run", "friends_overlap", "strangers_overlap", "copy_influence", "se",
                       "n_users", "fallback_rate", "counted"),
                      [[r.process, r.T, r.run, r.friends_overlap, r.strangers_overlap, r.copy_influence, r.se,
                        r.n_users, r.fallback_rate, int(r.counted)] for r in table.rows], digest)
    for s in table.summary():
        print(f"{s['process']:<10} FrOverlap {s['friends_overlap']:.4f}  copy-influence "
              f"{s['copy_influence']:.4f}  SE {s['se']:.4f}  runs {s['runs']}")
    return EXIT_OK


def cmd_sweep(a) -> int:
    cfg = _config(a)
    if not a.manifest and a.param != "t":
        _need_t(cfg)
    m = _manifest(a, cfg)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(m.to_json(), encoding="utf-8")
    if a.param == "t":
        m = m.with_pipeline(t_quantile=None)
    rows = harness.sweep(a.param, a.values, m, out / "sweep.csv")
    for r in rows:
        extra = f" ratio {r['ratio']:.3f}" if "ratio" in r else ""
        print(f"{a.param}={r['value']:g}: users {r['n_users']} FrOverlap {r['friends_overlap']:.4f} "
              f"copy-influence {r['copy_influence']:.4f}{extra}")
    return EXIT_OK


def cmd_report(a) -> int:
    written = harness.report(a.results, a.out)
    sys.stdout.write(Path(written["summary"]).read_text(encoding="utf-8"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="feedinfluence", description="Copy-influence estimation from activity feeds.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("ingest", help="load and validate input files, print statistics")
    _add_data(s, allow_network=False)
    s.add_argument("--out", help="write statistics JSON here instead of stdout")
    s.add_argument("--write", metavar="DIR", help="also write the normalised dataset")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("match", help="match friends to similar non-friends")
    _add_data(s)
    _add_pipeline(s)
    s.add_argument("--manifest", help="run manifest JSON (overrides data and pipeline flags)")
    s.add_argument("--out", default="matches.jsonl")
    s.set_defaults(func=cmd_match)

    s = sub.add_parser("estimate", help="estimate copy-influence from saved matches")
    _add_data(s)
    _add_pipeline(s)
    s.add_argument("--matches", required=True)
    s.add_argument("--out", default="results")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("run", help="match + estimate in one go")
    _add_data(s)
    _add_pipeline(s)
    s.add_argument("--manifest", help="run manifest JSON (overrides data and pipeline flags)")
    s.add_argument("--save-manifest", help="write the manifest used")
    s.add_argument("--out", default="results")
    s.set_defaults(func=cmd_run)

    for name, helptext in (("synth", "write semi-synthetic datasets"),
                           ("validate", "recovery table over synthetic processes")):
        s = sub.add_parser(name, help=helptext)
        _add_data(s)
        s.add_argument("--process", action="append", help="ci, pp, ee or mix:<p> (repeatable)")
        s.add_argument("--k", type=int, default=10, help="neighbours for the preference process")
        s.add_argument("--runs", type=int, default=100 if name == "synth" else 5)
        s.add_argument("--kind", help="action kind to regenerate (default: all)")
        if name == "synth":
            s.add_argument("--t", type=_floats, help="comma-separated split timestamps")
            s.add_argument("--t-quantile", type=_floats, help="comma-separated quantiles (default 0.9)")
            s.add_argument("--m", type=int, default=10)
            s.add_argument("--seed", type=int, default=0)
            s.add_argument("--out", default="synth")
            s.set_defaults(func=cmd_synth)
        else:
            _add_pipeline(s, multi_t=True)
            s.add_argument("--m-gen", type=int, help="generator window (default: --m)")
            s.add_argument("--out", default="validation")
            s.set_defaults(func=cmd_validate)

    s = sub.add_parser("sweep", help="rerun the pipeline over values of one parameter")
    _add_data(s)
    _add_pipeline(s)
    s.add_argument("--manifest", help="base run manifest JSON")
    s.add_argument("--param", required=True, choices=harness.SWEEP_PARAMS)
    s.add_argument("--values", required=True, type=_floats)
    s.add_argument("--out", default="sweep")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="summary and plot-ready data from a results directory")
    s.add_argument("--results", required=True)
    s.add_argument("--out", help="output directory (default: <results>/report)")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return a.func(a)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except harness.SweepError as exc:
        print(f"sweep aborted after {len(exc.rows)} values: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - top-level guard
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

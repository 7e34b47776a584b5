"""
msc - Multi-Source Clustering Forest command line.

Subcommands: synth, train, cluster, tag, summarize, correlate, eval.
Each command writes a JSON run log (argv, resolved configuration and its
hash, timings) next to its outputs and records the run in the database.
"""
import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from apps.cli.schemas import CoverageInput, EvalReport, RunLog, SourceEval, SourceTagRecord, TagRecord
from libs.analytics.forest import fan_in_stats
from libs.analytics.train_config import TrainConfig
from libs.errors import classify_error, exit_code_for
from services.config.flags import flag, get_flags_snapshot
from services.config.settings import get_settings

logger = logging.getLogger("msc")


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode("utf-8")).hexdigest()


class RunContext:
    """Collects what a command resolved and produced, for the run log."""

    def __init__(self, command: str, argv: List[str]):
        self.command = command
        self.argv = argv
        self.config: dict = {}
        self.seed: Optional[int] = None
        self.timings: dict = {}
        self.phi_star: Optional[float] = None
        self.fan_in: Optional[dict] = None
        self.outputs: List[str] = []
        self.log_path: Optional[Path] = None

    def phase(self, name: str, start: float):
        self.timings[name] = round(time.perf_counter() - start, 6)

    def write(self, status: str, error: Optional[dict] = None):
        log = RunLog(
            command=self.command,
            argv=self.argv,
            status=status,
            seed=self.seed,
            config=self.config,
            config_hash=config_hash(self.config),
            flags=get_flags_snapshot(),
            timings=self.timings,
            phi_star=self.phi_star,
            fan_in=self.fan_in,
            outputs=self.outputs,
            error=error,
        )
        if self.log_path is not None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self.log_path.write_text(log.model_dump_json(indent=2))
        _record_run(log, error)


def _record_run(log: RunLog, error: Optional[dict]):
    try:
        from db.models import RunRecord
        from db.session import SessionLocal, init_db

        init_db()
        with SessionLocal() as db:
            db.add(RunRecord(
                command=log.command,
                seed=log.seed,
                config_hash=log.config_hash,
                phi_star=log.phi_star,
                timings_json=log.timings,
                status=log.status,
                error_code=(error or {}).get("code", ""),
            ))
            db.commit()
    except Exception as e:  # the run registry never fails a command
        logger.warning(f"Could not record run in database: {e}")


def _default_log_path(out: Path) -> Path:
    if out.suffix:
        return out.with_name(out.stem + ".run.json")
    return out / "run.json"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(args, ctx: RunContext):
    from services.data.synthgen import SynthConfig, write_synth

    config = SynthConfig(
        n_clusters=args.clusters,
        samples_per_cluster=args.per_cluster,
        d=args.dim,
        blob_separation=args.separation,
        blob_sigma=args.sigma,
        n_categorical=args.categorical,
        alignment=args.alignment,
        n_continuous=args.continuous,
        missing_fraction=args.missing,
        temporal_blocks=not args.shuffle_time,
        seed=args.seed,
    )
    ctx.seed = args.seed
    ctx.config = {"synth": config.model_dump(), "holdout": args.holdout}
    paths = write_synth(config, args.out, holdout=args.holdout)
    ctx.outputs = [str(p) for p in paths]
    for p in paths:
        print(p)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        T_clust=args.trees,
        m_try=args.mtry,
        phi=args.phi,
        alpha_v=args.alpha_v,
        variant=args.variant,
        oblique=args.oblique or flag("MSC_OBLIQUE_SPLITS", False),
        shared_pseudo=args.shared_pseudo or flag("MSC_SHARED_PSEUDO", False),
        record_correlation=not args.no_correlation and flag("MSC_RECORD_CORRELATION", True),
        seed=args.seed,
    )


def cmd_train(args, ctx: RunContext):
    from services.clustering.model_store import save_model
    from services.clustering.pipeline import ClusteringParams, train_model
    from services.data.io import load_dataset
    from services.data.synthgen import inject_missing

    start = time.perf_counter()
    dataset = load_dataset(args.manifest)
    if args.inject_missing:
        rng = np.random.default_rng(np.random.SeedSequence(args.seed).spawn(2)[1])
        dataset = inject_missing(dataset, args.inject_missing, rng)
    ctx.phase("load", start)

    config = _train_config(args)
    params = ClusteringParams(knn_k=args.knn_k, k_max=args.kmax, n_clusters=args.n_clusters)
    ctx.seed = config.seed
    ctx.config = {
        "manifest": str(args.manifest),
        "train": config.model_identity(),
        "clustering": vars(params),
        "inject_missing": args.inject_missing,
        "m_try_resolved": config.resolve_m_try(dataset.n_features),
        "weights_resolved": config.resolve_weights(dataset).as_list(),
    }
    model = train_model(dataset, config, params, workers=args.workers)
    ctx.timings.update({k: round(v, 6) for k, v in model.timings.items()})

    stats = fan_in_stats(model.forest)
    ctx.phi_star = stats.phi_star
    ctx.fan_in = stats.to_dict()
    ctx.fan_in["tree_weights"] = [t.weights.as_list() for t in model.forest.trees]
    ctx.fan_in["n_clusters"] = model.n_clusters

    start = time.perf_counter()
    save_model(model, args.model, dataset.sample_ids, dataset.feature_names)
    ctx.phase("save", start)
    ctx.outputs = [str(args.model)]


def _load_unseen(args):
    from services.clustering.model_store import load_model
    from services.data.io import load_dataset

    model = load_model(args.model)
    dataset = load_dataset(args.manifest)
    return model, dataset


def _write_jsonl(path: Path, records) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for r in records:
            f.write(r.model_dump_json() + "\n")
    return path


def cmd_cluster(args, ctx: RunContext):
    from services.inference.tagging import assign_batch, assign_hard

    model, dataset = _load_unseen(args)
    ctx.config = {"model": str(args.model), "manifest": str(args.manifest), "hard": args.hard}
    start = time.perf_counter()
    if args.hard:
        records = [
            TagRecord(sample_id=sid, cluster=assign_hard(model.clusters, x), votes={})
            for sid, x in zip(dataset.sample_ids, dataset.main)
        ]
    else:
        assignments = assign_batch(model.forest, model.clusters, dataset.main, dataset.sample_ids)
        records = [
            TagRecord(sample_id=a.sample_id, cluster=a.cluster, votes={str(k): v for k, v in a.votes.items()})
            for a in assignments
        ]
    ctx.phase("assign", start)
    ctx.outputs = [str(_write_jsonl(Path(args.out), records))]


def cmd_tag(args, ctx: RunContext):
    from services.inference.tagging import assign_batch, assign_hard, infer_tags_batch, infer_tags_hard

    model, dataset = _load_unseen(args)
    ctx.config = {"model": str(args.model), "manifest": str(args.manifest), "strategy": args.strategy}
    start = time.perf_counter()
    records = []
    if args.strategy == "soft":
        assignments = assign_batch(model.forest, model.clusters, dataset.main, dataset.sample_ids)
        for a, pred in zip(assignments, infer_tags_batch(model.forest, model.clusters, assignments)):
            records.append(TagRecord(
                sample_id=a.sample_id,
                cluster=a.cluster,
                votes={str(k): v for k, v in a.votes.items()},
                tags={name: SourceTagRecord(**t.to_dict()) for name, t in pred.tags.items()},
            ))
    elif args.strategy == "hard":
        for sid, x in zip(dataset.sample_ids, dataset.main):
            pred = infer_tags_hard(model.clusters, x, sid)
            records.append(TagRecord(
                sample_id=sid,
                cluster=assign_hard(model.clusters, x),
                votes={},
                tags={name: SourceTagRecord(**t.to_dict()) for name, t in pred.tags.items()},
            ))
    else:
        from services.data.io import load_dataset
        from services.inference.tagging import nearest_neighbour_tags

        if args.train_manifest is None:
            raise ValueError("--strategy nn needs --train-manifest")
        train = load_dataset(args.train_manifest)
        for sid, tags in zip(dataset.sample_ids, nearest_neighbour_tags(train, dataset.main)):
            records.append(TagRecord(
                sample_id=sid,
                cluster=-1,
                votes={},
                tags={name: SourceTagRecord(argmax=v, distribution=[]) for name, v in tags.items() if v is not None},
            ))
    ctx.phase("tag", start)
    ctx.outputs = [str(_write_jsonl(Path(args.out), records))]


def cmd_summarize(args, ctx: RunContext):
    from services.clustering.pipeline import cluster_graph
    from services.inference.tagging import assign_batch, infer_tags_batch
    from services.summary.baselines import baseline_sufficient_change, baseline_uniform
    from services.summary.summarizer import compose_summary, keyclip_paths, representatives
    from services.summary.timeline import render_timeline

    model, dataset = _load_unseen(args)
    knn_k = args.knn_k if args.knn_k is not None else model.params.knn_k
    ctx.config = {"model": str(args.model), "manifest": str(args.manifest), "knn_k": knn_k}

    start = time.perf_counter()
    assignments = assign_batch(model.forest, model.clusters, dataset.main, dataset.sample_ids)
    tags = infer_tags_batch(model.forest, model.clusters, assignments)
    ctx.phase("assign", start)

    start = time.perf_counter()
    clusters = [a.cluster for a in assignments]
    reps = representatives(clusters, dataset.main)
    graph = cluster_graph(model.forest, dataset.main, knn_k, workers=args.workers)
    keys = keyclip_paths(graph, reps)
    manifest = compose_summary(keys, assignments, tags, dataset.time, config=ctx.config)
    ctx.phase("summarize", start)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(manifest.model_dump_json(indent=2))
    ctx.outputs = [str(out)]

    svg = Path(args.svg) if args.svg else out.with_suffix(".svg")
    render_timeline(manifest, dataset.time, clusters, svg)
    ctx.outputs.append(str(svg))

    if args.baselines:
        target = manifest.length
        ids = dataset.sample_ids
        baselines = {
            "uniform": [ids[i] for i in baseline_uniform(dataset.n_samples, target)],
            "sufficient_change": [ids[i] for i in baseline_sufficient_change(dataset.main, target, args.norm)],
            "norm": args.norm,
        }
        path = out.with_name(out.stem + ".baselines.json")
        path.write_text(json.dumps(baselines, indent=2, sort_keys=True))
        ctx.outputs.append(str(path))


def cmd_correlate(args, ctx: RunContext):
    from services.analysis.correlation import correlation_report, export_report
    from services.clustering.model_store import load_model
    from services.data.io import feature_groups

    model = load_model(args.model)
    groups = feature_groups(args.manifest) if args.manifest else None
    sources = [p.descriptor.name for p in model.clusters.profiles]
    exclude = args.exclude_empty_trees or flag("MSC_EXCLUDE_EMPTY_TREES", False)
    ctx.config = {"model": str(args.model), "groups": groups, "symmetric": args.symmetric, "exclude_empty_trees": exclude}
    report = correlation_report(model.forest, model.feature_names, sources, groups, exclude_empty=exclude)
    ctx.outputs = [str(p) for p in export_report(report, args.out, symmetric=args.symmetric, limit=args.top)]


def cmd_eval(args, ctx: RunContext):
    from services.analysis.evaluation import mean_entropy, tagging_accuracy
    from services.clustering.model_store import load_model
    from services.summary.summarizer import coverage

    ctx.config = {
        "model": str(args.model) if args.model else None,
        "predictions": str(args.predictions) if args.predictions else None,
        "truth": str(args.truth) if args.truth else None,
        "coverage": str(args.coverage) if args.coverage else None,
        "entropy_base": args.entropy_base,
        "weighted": not args.unweighted,
    }
    sources = {}
    model_hash = None
    if args.model:
        model = load_model(args.model)
        model_hash = hashlib.sha256(Path(args.model).read_bytes()).hexdigest()
        ctx.seed = model.forest.config.seed
        for p in model.clusters.profiles:
            if p.categorical:
                sources[p.descriptor.name] = SourceEval(mean_entropy=mean_entropy(
                    p.probs, model.clusters.sizes, weighted=not args.unweighted, base=args.entropy_base
                ))

    if args.predictions and args.truth:
        records = [TagRecord.model_validate_json(line) for line in Path(args.predictions).read_text().splitlines() if line.strip()]
        truth = pd.read_csv(args.truth, dtype=str, keep_default_na=False)
        for name in sorted({n for r in records for n in r.tags}):
            if name not in truth.columns:
                logger.warning(f"Truth file has no column '{name}'; skipped")
                continue
            preds = {r.sample_id: str(r.tags[name].argmax) for r in records if name in r.tags}
            known = {sid: (v if v not in ("", "NA") else None) for sid, v in zip(truth["sample_id"], truth[name])}
            result = tagging_accuracy(preds, known)
            entry = sources.get(name, SourceEval())
            entry.accuracy = result.accuracy
            entry.n_evaluated = result.n_evaluated
            entry.labels = [str(l) for l in result.labels]
            entry.confusion = result.confusion.tolist()
            sources[name] = entry

    report = EvalReport(
        sources=sources,
        seed=ctx.seed,
        config_hash=model_hash,
        entropy_base=args.entropy_base,
        size_weighted=not args.unweighted,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = report.model_dump(mode="json")
    if args.coverage:
        cov = CoverageInput.model_validate_json(Path(args.coverage).read_text())
        lengths = list(cov.lengths.values())
        payload["coverage"] = {
            name: coverage(lengths, cov.lengths[name], cov.covered[name], cov.total_events)
            for name in sorted(cov.lengths)
        }
    out.write_text(json.dumps(payload, indent=2, sort_keys=True))
    ctx.outputs = [str(out)]


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msc", description="Multi-Source Clustering Forest")
    parser.add_argument("--log-level", default=None, help="overrides MSC_LOG")
    parser.add_argument("--run-log", default=None, help="run log path (default: next to --out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted multi-source dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--per-cluster", type=int, default=125)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--separation", type=float, default=8.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--categorical", type=int, default=1)
    p.add_argument("--alignment", type=float, default=0.9)
    p.add_argument("--continuous", type=int, default=0)
    p.add_argument("--missing", type=float, default=0.0)
    p.add_argument("--shuffle-time", action="store_true", help="no contiguous temporal blocks per cluster")
    p.add_argument("--holdout", type=float, default=None, help="also split into train/test (test fraction)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train forest + spectral clustering, write model file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--trees", type=int, default=1000)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--phi", type=int, default=2)
    p.add_argument("--alpha-v", type=float, default=0.5)
    p.add_argument("--variant", choices=["full", "visual", "visual-temporal"], default="full")
    p.add_argument("--knn-k", type=int, default=None)
    p.add_argument("--kmax", type=int, default=30)
    p.add_argument("--n-clusters", type=int, default=None, help="fixed K instead of the eigengap estimate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--oblique", action="store_true")
    p.add_argument("--shared-pseudo", action="store_true")
    p.add_argument("--no-correlation", action="store_true")
    p.add_argument("--inject-missing", type=float, default=0.0, metavar="RHO")
    p.set_defaults(func=cmd_train)

    for name, func, help_text in (
        ("cluster", cmd_cluster, "assign unseen samples to clusters"),
        ("tag", cmd_tag, "infer auxiliary tags of unseen samples"),
        ("summarize", cmd_summarize, "key-clip summary of an unseen sequence"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--model", required=True)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--workers", type=int, default=None)
        p.set_defaults(func=func)
        if name == "cluster":
            p.add_argument("--hard", action="store_true", help="globally nearest centroid instead of tree voting")
        if name == "tag":
            p.add_argument("--strategy", choices=["soft", "hard", "nn"], default="soft")
            p.add_argument("--train-manifest", default=None)
        if name == "summarize":
            p.add_argument("--knn-k", type=int, default=None)
            p.add_argument("--svg", default=None)
            p.add_argument("--baselines", action="store_true", help="also emit uniform and sufficient-change selections")
            p.add_argument("--norm", choices=["L1", "L2"], default="L2")

    p = sub.add_parser("correlate", help="feature and source correlations of a trained forest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", default=None, help="manifest declaring feature_groups")
    p.add_argument("--out", required=True)
    p.add_argument("--symmetric", action="store_true")
    p.add_argument("--exclude-empty-trees", action="store_true")
    p.add_argument("--top", type=int, default=20)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("eval", help="mean entropy, tagging accuracy and coverage")
    p.add_argument("--model", default=None)
    p.add_argument("--predictions", default=None)
    p.add_argument("--truth", default=None)
    p.add_argument("--coverage", default=None, help="JSON with lengths/covered/total_events")
    p.add_argument("--out", required=True)
    p.add_argument("--entropy-base", choices=["e", "2"], default="e")
    p.add_argument("--unweighted", action="store_true")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, (args.log_level or settings.log).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )
    if getattr(args, "workers", 1) is None:
        args.workers = settings.workers

    ctx = RunContext(args.command, argv)
    out = getattr(args, "out", None) or getattr(args, "model", None)
    if args.run_log:
        ctx.log_path = Path(args.run_log)
    elif args.command == "train":
        ctx.log_path = _default_log_path(Path(args.model))
    elif out:
        ctx.log_path = _default_log_path(Path(out))

    start = time.perf_counter()
    try:
        args.func(args, ctx)
    except Exception as e:
        family = classify_error(e)
        error = getattr(e, "to_dict", lambda: {"code": type(e).__name__, "message": str(e)})()
        error["family"] = family
        logger.error(f"{args.command} failed [{family}]: {e}", exc_info=family == "UNKNOWN")
        ctx.phase("total", start)
        ctx.write("error", error)
        return exit_code_for(e)
    ctx.phase("total", start)
    ctx.write("ok")
    logger.info(f"{args.command} finished in {ctx.timings['total']:.2f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())

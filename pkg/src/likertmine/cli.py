"""``likertmine`` command line.

Subcommands ``generate``, ``cluster``, ``validate`` and ``forest`` run one
stage on files written by the previous one; ``pipeline`` runs everything.
Exit status: 0 success, 2 configuration error, 3 data error, 4 numerical
error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import ClusterModel, label_clusters
from .errors import ConfigError, DataError, LikertMineError
from .forest import ForestConfig, permutation_importance, train_forest
from .pipeline import (
    POLARITY_ALIASES,
    PipelineError,
    choose_k,
    fit_candidates,
    config_from_mapping,
    embed_likert,
    parse_k_list,
    read_config_file,
    run_pipeline,
    PipelineConfig,
)
from .similarity import dissimilarity_matrix
from .survey import read_dataset, write_dataset
from .synth import GeneratorSpec, generate_survey
from .tsne import TSNEConfig
from .validation import metric_for_mode, silhouette

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


def _add_source(p, default_seed=None):
    src = p.add_mutually_exclusive_group(required=default_seed is None)
    src.add_argument("--input", metavar="PATH", help="survey CSV to read")
    src.add_argument("--synth-seed", type=int, metavar="N", default=default_seed, help="generate synthetic data with this seed")
    p.add_argument("--n", type=int, default=None, help="synthetic record count (default 3000)")


def _add_cluster(p):
    p.add_argument("--k-list", default="2,3", help="candidate cluster counts, e.g. 2,3")
    p.add_argument("--metric", choices=("classic", "composite"), default="classic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--polarity", choices=("low", "high"), default="low", help="which end of the scale means strong willingness")


def _add_common(p):
    p.add_argument("--out", metavar="DIR", default="likertmine-out")
    p.add_argument("--threads", type=int, default=1, metavar="N")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="likertmine", description="Likert survey clustering and attribute importance.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic survey dataset")
    g.add_argument("--synth-seed", type=int, default=42, metavar="N")
    g.add_argument("--n", type=int, default=3000)
    g.add_argument("--out", metavar="DIR", default="likertmine-out")

    c = sub.add_parser("cluster", help="fit K-means for each candidate k")
    _add_source(c)
    _add_cluster(c)
    _add_common(c)

    v = sub.add_parser("validate", help="silhouette per k, chosen k, optional t-SNE")
    _add_source(v)
    _add_cluster(v)
    v.add_argument("--clusters", metavar="PATH", help="clusters.json from the cluster step (refit if omitted)")
    v.add_argument("--perplexity", type=float, default=30.0)
    v.add_argument("--no-tsne", action="store_true")
    _add_common(v)

    f = sub.add_parser("forest", help="random forest on cluster (or planted) labels")
    _add_source(f)
    f.add_argument("--clusters", metavar="PATH", help="clusters.json from the cluster step")
    f.add_argument("--k", type=int, help="which k in clusters.json to use")
    f.add_argument("--target", choices=("cluster", "planted"), default="cluster")
    f.add_argument("--mtry", type=int, default=4)
    f.add_argument("--ntree", type=int, default=500)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--repeats", type=int, default=5, help="permutations per feature and tree")
    _add_common(f)

    p = sub.add_parser("pipeline", help="run every stage and write report.json")
    p.add_argument("--config", metavar="FILE", help="key = value settings; flags override them")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", metavar="PATH", help="survey CSV to read")
    src.add_argument("--synth-seed", type=int, metavar="N", help="generate synthetic data with this seed (default 42)")
    p.add_argument("--n", type=int, default=None, help="synthetic record count (default 3000)")
    p.add_argument("--k-list", help="candidate cluster counts (default 2,3)")
    p.add_argument("--metric", choices=("classic", "composite"), help="Euclidean means or composite medoids (default classic)")
    p.add_argument("--seed", type=int, help="seed for clustering, t-SNE and the forest (default 0)")
    p.add_argument("--mtry", type=int, help="features tried per split (default 4)")
    p.add_argument("--ntree", type=int, help="number of trees (default 500)")
    p.add_argument("--perplexity", type=float, help="t-SNE perplexity (default 30)")
    p.add_argument("--no-tsne", action="store_true", help="skip the embedding stage")
    p.add_argument("--polarity", choices=("low", "high"), help="which end of the scale means strong willingness (default low)")
    p.add_argument("--out", metavar="DIR", help="output directory (default likertmine-out)")
    p.add_argument("--figures", action="store_true", help="also write SVG figures with CSV sidecars")
    p.add_argument("--threads", type=int, metavar="N", help="worker threads; results do not depend on it (default 1)")
    return parser


def _load(args):
    if args.input is not None:
        return read_dataset(args.input)
    spec = {"seed": args.synth_seed}
    if args.n is not None:
        spec["n"] = args.n
    return generate_survey(GeneratorSpec(**spec))


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n")


def _stage_config(args) -> PipelineConfig:
    # Reuse the pipeline's validation for the single-stage commands.
    return PipelineConfig(
        generator=GeneratorSpec(),
        metric_mode=args.metric,
        candidate_ks=parse_k_list(args.k_list),
        seed=args.seed,
        polarity=args.polarity,
        threads=args.threads,
    )


def cmd_generate(args) -> int:
    ds = generate_survey(GeneratorSpec(n=args.n, seed=args.synth_seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(ds, out / "dataset.csv")
    print(out / "dataset.csv")
    return EXIT_OK


def _fit(args, dataset):
    cfg = _stage_config(args)
    X = dataset.likert_matrix
    if max(cfg.candidate_ks) > len(dataset):
        raise DataError(f"k > n (k={max(cfg.candidate_ks)}, n={len(dataset)})")
    matrix = dissimilarity_matrix(X, metric_for_mode(cfg.metric_mode), threads=cfg.threads)
    models, sils = fit_candidates(X, matrix, cfg, lambda msg: warnings.warn(msg, stacklevel=2))
    return cfg, matrix, models, sils


def _labeled(models, polarity):
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k, m in models.items():
            out[k] = label_clusters(m, POLARITY_ALIASES[polarity])
    return out


def cmd_cluster(args) -> int:
    dataset = _load(args)
    cfg, _, models, _ = _fit(args, dataset)
    models = _labeled(models, args.polarity)
    _write_json(Path(args.out) / "clusters.json", {str(k): m.to_dict() for k, m in models.items()})
    for k, m in models.items():
        print(f"k={k} objective={m.objective!r} iterations={m.iterations} sizes={m.sizes}")
    return EXIT_OK


def _read_clusters(path) -> dict[int, ClusterModel]:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return {int(k): ClusterModel.from_dict(d) for k, d in raw.items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed cluster file ({exc})") from exc


def cmd_validate(args) -> int:
    dataset = _load(args)
    cfg = _stage_config(args)
    X = dataset.likert_matrix
    if args.clusters:
        models = _read_clusters(args.clusters)
        for k, m in models.items():
            if m.assignments.shape[0] != len(dataset):
                raise DataError(f"clusters.json k={k} has {m.assignments.shape[0]} assignments for {len(dataset)} records")
        modes = {m.config.metric_mode for m in models.values()}
        if len(modes) != 1:
            raise DataError("clusters.json mixes metric modes")
        matrix = dissimilarity_matrix(X, metric_for_mode(modes.pop()), threads=cfg.threads)
        sils = {k: silhouette(matrix, m.assignments) for k, m in models.items() if k >= 2}
    else:
        cfg, matrix, models, sils = _fit(args, dataset)
    best = choose_k(models, sils)
    out = Path(args.out)
    result = {
        "silhouette": {str(k): s.to_dict() for k, s in sils.items()},
        "chosen_k": best,
        "embedding": None,
    }
    lines = ["k,record,cluster,silhouette"]
    for k, s in sils.items():
        lines += [f"{k},{i},{int(models[k].assignments[i])},{float(v)!r}" for i, v in enumerate(s.per_sample)]
    out.mkdir(parents=True, exist_ok=True)
    (out / "silhouette.csv").write_text("\n".join(lines) + "\n")
    if not args.no_tsne:
        coords, res = embed_likert(X, TSNEConfig(perplexity=args.perplexity, seed=args.seed), cfg.threads)
        assign = models[best].assignments
        rows = ["x,y,cluster"] + [f"{float(x)!r},{float(y)!r},{int(c)}" for (x, y), c in zip(coords, assign)]
        (out / "embedding.csv").write_text("\n".join(rows) + "\n")
        result["embedding"] = {"final_kl": res.final_kl, "perplexity": args.perplexity}
    _write_json(out / "validation.json", result)
    for k, s in sils.items():
        print(f"k={k} silhouette={s.overall_mean:.4f}")
    print(f"chosen k={best}")
    return EXIT_OK


def _forest_target(args, dataset) -> np.ndarray:
    if args.target == "planted":
        if not dataset.has_labels:
            raise DataError("dataset has no planted labels")
        return dataset.planted_labels
    if not args.clusters:
        raise ConfigError("--clusters is required with --target cluster")
    models = _read_clusters(args.clusters)
    if args.k is not None:
        if args.k not in models:
            raise ConfigError(f"k={args.k} not in {sorted(models)}")
        k = args.k
    elif len(models) == 1:
        k = next(iter(models))
    else:
        val = Path(args.clusters).with_name("validation.json")
        if not val.exists():
            raise ConfigError("several k in clusters.json; pass --k or run validate first")
        k = int(json.loads(val.read_text())["chosen_k"])
    model = models[k]
    if model.assignments.shape[0] != len(dataset):
        raise DataError("cluster assignments do not match the dataset size")
    return model.will_codes()


def cmd_forest(args) -> int:
    dataset = _load(args)
    y = _forest_target(args, dataset)
    cfg = ForestConfig(mtry=args.mtry, ntree=args.ntree, seed=args.seed)
    X = dataset.profile_matrix
    model = train_forest(X, y, cfg, threads=args.threads)
    imp = permutation_importance(model, X, y, repeats=args.repeats, seed=args.seed, threads=args.threads)
    out = Path(args.out)
    _write_json(out / "forest.json", {**model.to_dict(), "importance": [{"factor": f, "mdeca": v} for f, v in imp.table()]})
    (out / "importance.csv").write_text(imp.to_csv())
    print(f"oob_error={model.oob_error:.4f}")
    for name, value in imp.table():
        print(f"{name:10s} {value:8.3f}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    values = read_config_file(args.config) if args.config else {}
    flags = {
        "input": args.input,
        "synth_seed": args.synth_seed,
        "synth_n": args.n,
        "k_list": args.k_list,
        "metric": args.metric,
        "seed": args.seed,
        "mtry": args.mtry,
        "ntree": args.ntree,
        "perplexity": args.perplexity,
        "polarity": args.polarity,
        "out": args.out,
        "threads": args.threads,
    }
    if args.input is not None:
        values.pop("synth_seed", None)
        values.pop("synth_n", None)
    if args.synth_seed is not None:
        values.pop("input", None)
    values.update({k: v for k, v in flags.items() if v is not None})
    if args.no_tsne:
        values["tsne"] = "false"
    if args.figures:
        values["figures"] = "true"
    config = config_from_mapping(values)
    report = run_pipeline(config)
    s = report.summary
    print(f"n={s['dataset']['n']} chosen k={s['clusters']['k']} -> {Path(config.out_dir) / 'report.json'}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "cluster": cmd_cluster,
    "validate": cmd_validate,
    "forest": cmd_forest,
    "pipeline": cmd_pipeline,
}


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"likertmine: warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    warnings.showwarning = _show_warning
    try:
        return COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"likertmine: error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL) else 1
    except LikertMineError as exc:
        print(f"likertmine: {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"likertmine: {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end analysis: load, check, cluster, validate, label, embed, forest.

Every stage is deterministic given the configured seeds, and no stage's
output depends on the worker count, so two runs of the same configuration
produce byte-identical reports.
"""

from __future__ import annotations

import configparser
import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .clustering import (
    CLASSIC,
    LOW_IS_STRONG,
    MEDOID,
    POLARITIES,
    WILL_CODES,
    ClusterConfig,
    ClusterModel,
    kmeans_fit,
    label_clusters,
)
from .errors import ConfigError, DataError, LikertMineError, UndefinedStatisticError
from .forest import ForestConfig, permutation_importance, train_forest
from .similarity import dissimilarity_matrix
from .survey import ALPHA_THRESHOLD, ATTRIBUTE_NAMES, CAUSE_ITEMS, Dataset, cronbach_alpha, read_dataset
from .synth import GeneratorSpec, generate_survey
from .tsne import TSNEConfig, tsne_affinities, tsne_embed
from .validation import adjusted_rand_index, metric_for_mode, silhouette

METRIC_ALIASES = {"classic": CLASSIC, "composite": MEDOID, CLASSIC: CLASSIC, MEDOID: MEDOID}
POLARITY_ALIASES = {"low": LOW_IS_STRONG, "high": "high_is_strong"}
POLARITY_ALIASES.update({p: p for p in POLARITIES})


class PipelineError(LikertMineError):
    """A stage failure; carries the stage name and the original error's exit code."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3 if isinstance(cause, OSError) else 1)
        super().__init__(f"[{stage}] {cause}")


@dataclass(frozen=True)
class PipelineConfig:
    input_path: str | None = None
    generator: GeneratorSpec | None = None
    metric_mode: str = CLASSIC
    candidate_ks: tuple[int, ...] = (2, 3)
    seed: int = 0
    n_init: int = 10
    forest: ForestConfig = field(default_factory=ForestConfig)
    importance_repeats: int = 5
    tsne_enabled: bool = True
    perplexity: float = 30.0
    tsne_iterations: int = 1000
    polarity: str = LOW_IS_STRONG
    out_dir: str = "likertmine-out"
    emit_figures: bool = False
    threads: int = 1

    def __post_init__(self):
        if (self.input_path is None) == (self.generator is None):
            raise ConfigError("give exactly one of an input path or a generator spec")
        mode = METRIC_ALIASES.get(self.metric_mode)
        if mode is None:
            raise ConfigError(f"unknown metric {self.metric_mode!r} (classic or composite)")
        object.__setattr__(self, "metric_mode", mode)
        polarity = POLARITY_ALIASES.get(self.polarity)
        if polarity is None:
            raise ConfigError(f"unknown polarity {self.polarity!r} (low or high)")
        object.__setattr__(self, "polarity", polarity)
        ks = tuple(sorted(set(int(k) for k in self.candidate_ks)))
        if not ks or ks[0] < 1:
            raise ConfigError(f"candidate ks must be positive integers, got {self.candidate_ks}")
        object.__setattr__(self, "candidate_ks", ks)
        if int(self.threads) < 1:
            raise ConfigError("threads must be >= 1")
        if not self.perplexity > 0:
            raise ConfigError("perplexity must be positive")
        if int(self.importance_repeats) < 1:
            raise ConfigError("importance repeats must be >= 1")
        if self.forest.mtry > len(ATTRIBUTE_NAMES):
            raise ConfigError(f"mtry={self.forest.mtry} exceeds the feature count {len(ATTRIBUTE_NAMES)}")
        # Fail early on a bad cluster setup rather than mid-run.
        self.cluster_config(ks[0])

    def cluster_config(self, k: int) -> ClusterConfig:
        return ClusterConfig(k=k, metric_mode=self.metric_mode, seed=self.seed, n_init=self.n_init)

    def tsne_config(self) -> TSNEConfig:
        return TSNEConfig(perplexity=self.perplexity, iterations=self.tsne_iterations, seed=self.seed)

    def resolved(self) -> dict:
        """Everything that can influence results; thread count and paths excluded."""
        return {
            "input": None if self.input_path is None else Path(self.input_path).name,
            "generator": None if self.generator is None else self.generator.to_dict(),
            "metric_mode": self.metric_mode,
            "candidate_ks": list(self.candidate_ks),
            "seed": int(self.seed),
            "n_init": int(self.n_init),
            "max_iter": self.cluster_config(self.candidate_ks[0]).max_iter,
            "forest": self.forest.to_dict(),
            "importance_repeats": int(self.importance_repeats),
            "tsne": {"enabled": self.tsne_enabled, **asdict(self.tsne_config())} if self.tsne_enabled else {"enabled": False},
            "polarity": self.polarity,
            "alpha_items": list(CAUSE_ITEMS),
            "alpha_threshold": ALPHA_THRESHOLD,
        }


@dataclass(frozen=True)
class FigureData:
    """The arrays behind the three figures."""

    k: int
    assignments: np.ndarray
    silhouette: np.ndarray | None
    centroids: np.ndarray
    cluster_names: tuple[str, ...]
    career: np.ndarray


@dataclass(frozen=True)
class PipelineReport:
    summary: dict
    figures: FigureData | None = field(default=None, repr=False)
    artifacts: dict[str, str] = field(default_factory=dict, repr=False)

    @property
    def chosen_k(self) -> int:
        return self.summary["clusters"]["k"]

    def to_json(self) -> str:
        return json.dumps(self.summary, sort_keys=True, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------- config files

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _as_bool(key, value) -> bool:
    v = str(value).strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def parse_k_list(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"k-list must be comma-separated integers, got {text!r}") from None
    if not ks:
        raise ConfigError("k-list is empty")
    return ks


def read_config_file(path) -> dict[str, str]:
    """Read a ``key = value`` document (``#`` comments, no sections needed)."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        parser.read_string("[likertmine]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc
    return dict(parser["likertmine"])


CONFIG_KEYS = (
    "input", "synth_seed", "synth_n", "k_list", "metric", "seed", "n_init", "mtry", "ntree",
    "repeats", "perplexity", "tsne", "tsne_iterations", "polarity", "out", "figures", "threads",
)


def config_from_mapping(values: Mapping[str, Any]) -> PipelineConfig:
    """Build a :class:`PipelineConfig` from flat key/value settings.

    Unset keys keep their defaults; ``synth_seed`` (with optional
    ``synth_n``) selects the generator instead of an input file.
    """
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    v = {k: x for k, x in values.items() if x is not None}

    def num(key, cast):
        try:
            return cast(v[key])
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: cannot parse {v[key]!r}") from None

    kw: dict[str, Any] = {}
    if "input" in v and "synth_seed" in v:
        raise ConfigError("give either input or synth_seed, not both")
    if "input" in v:
        kw["input_path"] = str(v["input"])
    elif "synth_seed" in v or "synth_n" in v:
        gen = {"seed": num("synth_seed", int) if "synth_seed" in v else GeneratorSpec.seed}
        if "synth_n" in v:
            gen["n"] = num("synth_n", int)
        kw["generator"] = GeneratorSpec(**gen)
    if "k_list" in v:
        kw["candidate_ks"] = parse_k_list(v["k_list"])
    if "metric" in v:
        kw["metric_mode"] = str(v["metric"])
    seed = num("seed", int) if "seed" in v else 0
    kw["seed"] = seed
    if "n_init" in v:
        kw["n_init"] = num("n_init", int)
    forest = {"seed": seed}
    if "mtry" in v:
        forest["mtry"] = num("mtry", int)
    if "ntree" in v:
        forest["ntree"] = num("ntree", int)
    kw["forest"] = ForestConfig(**forest)
    if "repeats" in v:
        kw["importance_repeats"] = num("repeats", int)
    if "perplexity" in v:
        kw["perplexity"] = num("perplexity", float)
    if "tsne" in v:
        kw["tsne_enabled"] = _as_bool("tsne", v["tsne"])
    if "tsne_iterations" in v:
        kw["tsne_iterations"] = num("tsne_iterations", int)
    if "polarity" in v:
        kw["polarity"] = str(v["polarity"])
    if "out" in v:
        kw["out_dir"] = str(v["out"])
    if "figures" in v:
        kw["emit_figures"] = _as_bool("figures", v["figures"])
    if "threads" in v:
        kw["threads"] = num("threads", int)
    if "input_path" not in kw and "generator" not in kw:
        kw["generator"] = GeneratorSpec()
    return PipelineConfig(**kw)


# ---------------------------------------------------------------- stages


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None or isinstance(exc, PipelineError):
            return False
        if isinstance(exc, (LikertMineError, ValueError, ArithmeticError, OSError)):
            raise PipelineError(self.name, exc) from exc
        return False


def load_input(config: PipelineConfig) -> Dataset:
    if config.input_path is not None:
        return read_dataset(config.input_path)
    return generate_survey(config.generator)


def embed_likert(likert: np.ndarray, config: TSNEConfig, threads: int = 1):
    """t-SNE of the distinct response vectors, mapped back to every record.

    Identical rows sit at distance zero from each other, which caps how low a
    row's entropy can go; embedding each distinct vector once keeps the
    perplexity target attainable. Returns ``(coords, result)``.
    """
    uniq, inverse = np.unique(likert, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    P = tsne_affinities(uniq, config.perplexity)
    result = tsne_embed(P, config, threads=threads)
    return result.coords[inverse], result


def fit_candidates(X, matrix, config: PipelineConfig, warn):
    models, sils = {}, {}
    for k in config.candidate_ks:
        models[k] = kmeans_fit(X, config.cluster_config(k), matrix=matrix if config.metric_mode == MEDOID else None)
        if k < 2:
            warn(f"silhouette skipped for k={k}: needs at least 2 clusters")
            continue
        sils[k] = silhouette(matrix, models[k].assignments)
    return models, sils


def choose_k(models, sils) -> int:
    if not sils:
        return min(models)
    # Highest mean silhouette; ties keep the smaller k.
    return max(sorted(sils), key=lambda k: (sils[k].overall_mean, -k))


def _planted_order(spec: GeneratorSpec, top: int = 4) -> list[str]:
    eff = spec.attribute_effects
    order = sorted(ATTRIBUTE_NAMES, key=lambda a: (-eff[a], ATTRIBUTE_NAMES.index(a)))
    return order[:top]


def run_pipeline(config: PipelineConfig, write: bool = True) -> PipelineReport:
    """Run every stage and, if ``write``, store artifacts and the report.

    Stage failures raise :class:`PipelineError` tagged with the stage name.
    Stages whose preconditions fail (silhouette for k = 1, a forest with a
    single target class, t-SNE on too few distinct vectors) are skipped and
    listed under ``warnings`` in the report.
    """
    notes: list[str] = []

    def warn(msg):
        warnings.warn(msg, stacklevel=3)
        notes.append(msg)

    with _Stage("load"):
        dataset = load_input(config)
        X = dataset.likert_matrix
        n = len(dataset)

    with _Stage("consistency"):
        try:
            alpha = cronbach_alpha(dataset, CAUSE_ITEMS)
        except (UndefinedStatisticError, DataError) as exc:
            alpha = None
            warn(f"consistency check skipped: {exc}")
        if alpha is not None and alpha < ALPHA_THRESHOLD:
            warn(f"Cronbach alpha {alpha:.4f} below {ALPHA_THRESHOLD}")

    with _Stage("cluster"):
        if max(config.candidate_ks) > n:
            raise DataError(f"k > n (k={max(config.candidate_ks)}, n={n})")
        matrix = dissimilarity_matrix(X, metric_for_mode(config.metric_mode), threads=config.threads)
        models, sils = fit_candidates(X, matrix, config, warn)
        k = choose_k(models, sils)

    with _Stage("label"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model: ClusterModel = label_clusters(models[k], config.polarity)
        if model.label_warning:
            warn(model.label_warning)
        target = model.will_codes()

    embedding = None
    coords = None
    if config.tsne_enabled:
        with _Stage("embed"):
            n_unique = int(np.unique(X, axis=0).shape[0])
            if n_unique <= max(3, config.perplexity):
                warn(f"t-SNE skipped: {n_unique} distinct vectors cannot support perplexity {config.perplexity}")
            else:
                coords, result = embed_likert(X, config.tsne_config(), config.threads)
                emb_sil = silhouette(_euclid(coords), model.assignments).overall_mean if k >= 2 else None
                embedding = {
                    "n_unique": n_unique,
                    "final_kl": result.final_kl,
                    "silhouette_2d": emb_sil,
                }

    forest_summary = None
    importance = None
    with _Stage("forest"):
        if np.unique(target).shape[0] < 2:
            warn("forest skipped: the cluster target has a single class")
        else:
            profiles = dataset.profile_matrix
            forest_model = train_forest(profiles, target, config.forest, threads=config.threads)
            report_imp = permutation_importance(
                forest_model, profiles, target, repeats=config.importance_repeats, seed=config.seed, threads=config.threads
            )
            forest_summary = forest_model.to_dict()
            forest_summary.pop("config")
            importance = report_imp

    planted = None
    if dataset.has_labels:
        planted = {"ari": adjusted_rand_index(dataset.planted_labels, model.assignments)}
        if config.generator is not None and importance is not None:
            want = _planted_order(config.generator)
            got = list(importance.ranking[: len(want)])
            planted.update({"planted_top": want, "recovered_top": got, "ranking_match": want == got})

    names = tuple(model.labels[j] if model.labels else f"cluster{j + 1}" for j in range(k))
    summary = {
        "tool": {"name": "likertmine", "version": __version__},
        "config": config.resolved(),
        "dataset": {
            "n": n,
            "source": dataset.source if config.input_path is None else Path(config.input_path).name,
            "alpha": alpha,
            "alpha_pass": None if alpha is None else alpha >= ALPHA_THRESHOLD,
            "has_planted_labels": dataset.has_labels,
        },
        "silhouette": {str(kk): s.to_dict() for kk, s in sils.items()},
        "silhouette_ranking": sorted(sils, key=lambda kk: (-sils[kk].overall_mean, kk)),
        "clusters": {
            "k": k,
            "metric_mode": config.metric_mode,
            "sizes": model.sizes,
            "names": list(names),
            "will_codes": [WILL_CODES[model.labels[j]] if model.labels else j + 1 for j in range(k)],
            "centroids": model.profiles.tolist(),
            "objective": model.objective,
            "iterations": model.iterations,
            "converged": model.converged,
        },
        "embedding": embedding,
        "forest": forest_summary,
        "importance": None if importance is None else [
            {"factor": name, "mdeca": value} for name, value in importance.table()
        ],
        "planted": planted,
        "warnings": notes,
    }
    figures = FigureData(
        k=k,
        assignments=model.assignments,
        silhouette=sils[k].per_sample if k in sils else None,
        centroids=model.profiles,
        cluster_names=names,
        career=dataset.profile_matrix[:, ATTRIBUTE_NAMES.index("career")],
    )
    report = PipelineReport(summary, figures)
    if write:
        with _Stage("report"):
            out = Path(config.out_dir)
            artifacts = write_artifacts(out / "artifacts", dataset, models, sils, model, coords, importance)
            report = replace(report, artifacts=artifacts)
            from .report import render_report

            render_report(report, out, emit_figures=config.emit_figures)
    return report


def _euclid(coords: np.ndarray) -> np.ndarray:
    out = np.empty((coords.shape[0], coords.shape[0]))
    for i in range(coords.shape[0]):
        diff = coords - coords[i]
        out[i] = np.sqrt((diff * diff).sum(axis=1))
    return out


def write_artifacts(directory: Path, dataset, models, sils, model, coords, importance) -> dict[str, str]:
    """Plain-text intermediates from which every reported number can be rebuilt."""
    from .survey import write_dataset

    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    write_dataset(dataset, directory / "dataset.csv")
    files["dataset"] = "dataset.csv"
    clusters = {str(k): (model if k == model.k else m).to_dict() for k, m in models.items()}
    (directory / "clusters.json").write_text(json.dumps(clusters, sort_keys=True) + "\n")
    files["clusters"] = "clusters.json"
    lines = ["k,record,cluster,silhouette"]
    for k, s in sils.items():
        assign = models[k].assignments
        lines += [f"{k},{i},{int(assign[i])},{float(v)!r}" for i, v in enumerate(s.per_sample)]
    (directory / "silhouette.csv").write_text("\n".join(lines) + "\n")
    files["silhouette"] = "silhouette.csv"
    if coords is not None:
        names = model.labels or {}
        rows = ["x,y,cluster,label"]
        rows += [
            f"{float(x)!r},{float(y)!r},{int(c)},{names.get(int(c), '')}"
            for (x, y), c in zip(coords, model.assignments)
        ]
        (directory / "embedding.csv").write_text("\n".join(rows) + "\n")
        files["embedding"] = "embedding.csv"
    if importance is not None:
        (directory / "importance.csv").write_text(importance.to_csv())
        files["importance"] = "importance.csv"
    return files


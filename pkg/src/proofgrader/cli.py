"""Command-line front end for the grading pipeline.

Subcommands cover the full workflow: ingest a raw corpus, embed it, train
per-problem graders, evaluate them, run training-size sweeps, grade a single
proof, serve the submission API, and compute study statistics from attempt
logs. Every artifact-producing run also writes a manifest (JSON next to the
main output) recording the command, the effective configuration, the seed,
SHA-256 hashes of the inputs, the output paths, and wall-clock timings. Two
runs with the same inputs, configuration, and seed produce byte-identical
artifacts; only the manifests differ, and only in their timings.

Exit codes: 0 success, 1 other errors, 2 configuration problems, 3 missing
input files, 4 provider problems (credentials absent, remote failures).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional

from . import corpus as corpus_mod
from . import evalharness, studystats
from .config import AppConfig, ConfigError, load_config
from .embeddings import (
    CacheFormatError,
    EmbedBatchError,
    Embedder,
    EmbeddingCache,
    EmbeddingError,
    ProviderConfig,
    RemoteEmbedError,
)
from .feedback import default_catalog, load_catalog
from .grader import (
    ModelFormatError,
    ProblemGrader,
    grade_proof,
    load_model,
    save_model,
    train_problem_grader,
)


class CliError(Exception):
    """Operational failure with a categorized exit code."""

    exit_code = 1


class MissingInputError(CliError):
    exit_code = 3


class ProviderError(CliError):
    exit_code = 4


@dataclasses.dataclass
class RunManifest:
    """Reproducibility record for one artifact-producing command."""

    command: list[str]
    config: dict
    seed: Optional[int]
    input_hashes: dict[str, str]
    output_paths: list[str]
    timings: dict[str, float]

    def write(self, path) -> None:
        Path(path).write_text(
            json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _require_file(path, what: str) -> Path:
    if path is None:
        raise MissingInputError(f"no {what} given; pass a flag or set it in the config")
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"{what} not found: {path}")
    return path


def _config_snapshot(cfg: AppConfig, provider: Optional[ProviderConfig]) -> dict:
    snap = {
        "training": dataclasses.asdict(cfg.training),
        "paths": {
            k: (str(v) if v is not None else None)
            for k, v in dataclasses.asdict(cfg.paths).items()
        },
    }
    snap["training"]["epochs_grid"] = list(cfg.training.epochs_grid)
    if provider is not None:
        snap["provider"] = dataclasses.asdict(provider)
    return snap


class Timer:
    """Collects named wall-clock durations for the manifest."""

    def __init__(self):
        self.timings: dict[str, float] = {}
        self._start = time.perf_counter()
        self._last = self._start

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.timings[name] = round(now - self._last, 6)
        self._last = now

    def finish(self) -> dict[str, float]:
        self.timings["total"] = round(time.perf_counter() - self._start, 6)
        return self.timings


def cache_path_for(cache_dir, provider_id: str) -> Path:
    return Path(cache_dir) / f"{provider_id}.pgec"


def build_embedder(
    provider: ProviderConfig, cache_dir, *, import_path=None
) -> tuple[Embedder, EmbeddingCache, Path]:
    """Assemble an embedder with the on-disk cache for this provider.

    Remote providers are checked for a resolvable credential up front so the
    failure happens before any work, not on the first network call.
    """
    if provider.kind == "remote-endpoint":
        if not provider.credential_env:
            raise ProviderError(
                f"provider {provider.provider_id!r} is remote but sets no credential_env"
            )
        if not os.environ.get(provider.credential_env):
            raise ProviderError(
                f"provider {provider.provider_id!r} needs credential in "
                f"${provider.credential_env}, which is unset"
            )
    cache = EmbeddingCache(provider.provider_id, provider.dim)
    cache_file = cache_path_for(cache_dir, provider.provider_id)
    if cache_file.is_file():
        cache.import_file(cache_file)
    if import_path is not None:
        cache.import_file(_require_file(import_path, "cache import file"))
    return Embedder(provider, cache=cache), cache, cache_file


def _load_corpus(path) -> list[corpus_mod.ProofRecord]:
    return corpus_mod.load_corpus(_require_file(path, "corpus file"))


def _resolve_seed(args, cfg: AppConfig) -> int:
    return args.seed if args.seed is not None else cfg.training.seed


def _train_config(cfg: AppConfig, seed: int):
    return dataclasses.replace(cfg.training, seed=seed)


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, cfg: AppConfig) -> int:
    timer = Timer()
    in_path = _require_file(args.in_path, "input corpus")
    records = corpus_mod.load_corpus(in_path)
    timer.lap("load")
    n_raw = len(records)
    if args.drop_empty:
        records = corpus_mod.filter_nonempty(records)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    corpus_mod.write_corpus_jsonl(records, out_path)
    timer.lap("write")

    per_problem: dict[str, int] = {}
    for r in records:
        per_problem[r.problem_id] = per_problem.get(r.problem_id, 0) + 1
    print(f"ingested {n_raw} records, kept {len(records)}")
    for pid in sorted(per_problem):
        print(f"  {pid}: {per_problem[pid]}")

    RunManifest(
        command=["ingest"] + _flag_list(args, ["in_path", "out", "drop_empty"]),
        config=_config_snapshot(cfg, None),
        seed=None,
        input_hashes={str(in_path): _sha256_file(in_path)},
        output_paths=[str(out_path)],
        timings=timer.finish(),
    ).write(_manifest_path(out_path))
    return 0


def cmd_embed(args, cfg: AppConfig) -> int:
    timer = Timer()
    provider = cfg.provider(args.provider)
    cfg.paths.cache_dir.mkdir(parents=True, exist_ok=True)
    embedder, cache, cache_file = build_embedder(
        provider, cfg.paths.cache_dir, import_path=args.import_path
    )
    before = len(cache)
    timer.lap("setup")

    corpus_path = args.corpus or cfg.paths.corpus
    inputs = {}
    n_texts = 0
    if corpus_path is not None:
        corpus_path = _require_file(corpus_path, "corpus file")
        inputs[str(corpus_path)] = _sha256_file(corpus_path)
        records = corpus_mod.filter_nonempty(corpus_mod.load_corpus(corpus_path))
        embedder.embed_batch([r.body_markdown for r in records])
        n_texts = len(records)
    timer.lap("embed")

    cache.export(cache_file)
    outputs = [str(cache_file)]
    if args.export:
        export_path = Path(args.export)
        export_path.parent.mkdir(parents=True, exist_ok=True)
        cache.export(export_path)
        outputs.append(str(export_path))
    timer.lap("persist")

    print(
        f"embedded {n_texts} texts with {provider.provider_id}: "
        f"cache {before} -> {len(cache)} entries ({len(cache) - before} new)"
    )
    print(f"cache written to {cache_file}")
    if args.export:
        print(f"cache exported to {args.export}")

    if args.import_path:
        inputs[str(args.import_path)] = _sha256_file(args.import_path)
    RunManifest(
        command=["embed"] + _flag_list(args, ["corpus", "provider", "export", "import_path"]),
        config=_config_snapshot(cfg, provider),
        seed=provider.seed,
        input_hashes=inputs,
        output_paths=outputs,
        timings=timer.finish(),
    ).write(_manifest_path(cache_file))
    return 0


def cmd_train(args, cfg: AppConfig) -> int:
    timer = Timer()
    provider = cfg.provider(args.provider)
    seed = _resolve_seed(args, cfg)
    train_cfg = _train_config(cfg, seed)
    corpus_path = _require_file(args.corpus or cfg.paths.corpus, "corpus file")
    records = corpus_mod.load_corpus(corpus_path)
    embedder, _, _ = build_embedder(provider, cfg.paths.cache_dir)
    timer.lap("load")

    split = corpus_mod.split_dataset(corpus_mod.filter_nonempty(records), seed)
    grader, report = train_problem_grader(records, split, args.problem, embedder, train_cfg)
    timer.lap("train")

    out_path = Path(args.out) if args.out else cfg.paths.models_dir / f"{args.problem}.pgmd"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(out_path, grader)
    timer.lap("save")

    print(f"trained {args.problem} on {provider.provider_id} (seed {seed})")
    for sel in report.rubrics:
        print(
            f"  {sel.rubric_id}: epochs={sel.chosen_epochs} "
            f"{report.selection_split}_acc={sel.chosen_accuracy:.3f}"
        )
    print(f"model written to {out_path}")

    RunManifest(
        command=["train"] + _flag_list(args, ["problem", "provider", "corpus", "seed", "out"]),
        config=_config_snapshot(cfg, provider),
        seed=seed,
        input_hashes={str(corpus_path): _sha256_file(corpus_path)},
        output_paths=[str(out_path)],
        timings=timer.finish(),
    ).write(_manifest_path(out_path))
    return 0


def _provider_for_model(args_provider: str, cfg: AppConfig, grader: ProblemGrader):
    provider = cfg.provider(args_provider or grader.provider_id)
    if provider.provider_id != grader.provider_id:
        raise ConfigError(
            f"model was trained with provider {grader.provider_id!r}, "
            f"got {provider.provider_id!r}"
        )
    if provider.dim != grader.dim:
        raise ConfigError(
            f"provider {provider.provider_id!r} has dim {provider.dim}, "
            f"model expects {grader.dim}"
        )
    return provider


def cmd_eval(args, cfg: AppConfig) -> int:
    timer = Timer()
    model_path = _require_file(args.model, "model file")
    grader = load_model(model_path)
    provider = _provider_for_model(args.provider, cfg, grader)
    corpus_path = _require_file(args.corpus or cfg.paths.corpus, "corpus file")
    records = corpus_mod.load_corpus(corpus_path)
    embedder, _, _ = build_embedder(provider, cfg.paths.cache_dir)
    timer.lap("load")

    seed = args.seed if args.seed is not None else grader.seed
    split = corpus_mod.split_dataset(corpus_mod.filter_nonempty(records), seed)
    test_records = corpus_mod.select_records(records, split.test_ids, grader.problem_id)
    if not test_records:
        raise CliError(f"no test records for problem {grader.problem_id!r}")
    report = evalharness.evaluate_problem(grader, embedder, test_records)
    timer.lap("evaluate")

    out_path = Path(args.out) if args.out else Path(f"metrics_{grader.problem_id}.csv")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    evalharness.write_metrics_csv(out_path, grader.problem_id, report)
    timer.lap("write")

    print(evalharness.format_metrics_table(grader.problem_id, report))
    print(f"metrics written to {out_path}")

    RunManifest(
        command=["eval"] + _flag_list(args, ["model", "corpus", "provider", "seed", "out"]),
        config=_config_snapshot(cfg, provider),
        seed=seed,
        input_hashes={
            str(model_path): _sha256_file(model_path),
            str(corpus_path): _sha256_file(corpus_path),
        },
        output_paths=[str(out_path)],
        timings=timer.finish(),
    ).write(_manifest_path(out_path))
    return 0


def cmd_sweep(args, cfg: AppConfig) -> int:
    timer = Timer()
    provider = cfg.provider(args.provider)
    seed = _resolve_seed(args, cfg)
    train_cfg = _train_config(cfg, seed)
    corpus_path = _require_file(args.corpus or cfg.paths.corpus, "corpus file")
    records = corpus_mod.load_corpus(corpus_path)
    embedder, _, _ = build_embedder(provider, cfg.paths.cache_dir)
    timer.lap("load")

    points = evalharness.size_sweep(records, args.problem, embedder, train_cfg)
    timer.lap("sweep")

    out_path = (
        Path(args.out)
        if args.out
        else Path(f"sweep_{args.problem}_{provider.provider_id}.csv")
    )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    evalharness.write_sweep_csv(out_path, args.problem, provider.provider_id, points)
    timer.lap("write")

    print(f"sweep for {args.problem} on {provider.provider_id} (seed {seed})")
    for p in points:
        print(f"  n={p.train_size}: mean_accuracy={p.mean_accuracy:.4f}")
    print(f"curve written to {out_path}")

    RunManifest(
        command=["sweep"] + _flag_list(args, ["problem", "provider", "corpus", "seed", "out"]),
        config=_config_snapshot(cfg, provider),
        seed=seed,
        input_hashes={str(corpus_path): _sha256_file(corpus_path)},
        output_paths=[str(out_path)],
        timings=timer.finish(),
    ).write(_manifest_path(out_path))
    return 0


def cmd_grade(args, cfg: AppConfig) -> int:
    model_path = _require_file(args.model, "model file")
    grader = load_model(model_path)
    provider = _provider_for_model(args.provider, cfg, grader)
    proof_path = _require_file(args.in_path, "proof file")
    body = proof_path.read_text(encoding="utf-8")
    embedder, _, _ = build_embedder(provider, cfg.paths.cache_dir)

    result = grade_proof(grader, body, embedder)
    score = 100.0 * result.rubric.num_correct / len(result.rubric.bits)
    if args.json:
        print(
            json.dumps(
                {
                    "problem_id": grader.problem_id,
                    "rubric": list(result.rubric.bits),
                    "score_percent": score,
                    "empty_body": result.empty_body,
                },
                sort_keys=True,
            )
        )
    else:
        for k, bit in enumerate(result.rubric.bits, start=1):
            print(f"  R{k}: {'correct' if bit else 'incorrect'}")
        print(f"score: {score:.1f}%")
        if result.empty_body:
            print("note: submission is empty, every rubric scored 0")
    return 0


def _load_roster(path) -> dict[str, str]:
    path = _require_file(path, "roster file")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"roster {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in data.items()
    ):
        raise CliError(f"roster {path} must map student ids to group names")
    return data


def build_server_state(args, cfg: AppConfig):
    """Assemble the shared server state from config plus flag overrides."""
    from .server import ServerState

    problems_path = _require_file(args.problems or cfg.paths.problems, "problems file")
    problems = tuple(corpus_mod.load_problems(problems_path).values())

    models_dir = Path(args.models_dir) if args.models_dir else cfg.paths.models_dir
    graders: dict[str, ProblemGrader] = {}
    if models_dir.is_dir():
        for model_file in sorted(models_dir.glob("*.pgmd")):
            grader = load_model(model_file)
            if grader.problem_id in graders:
                raise CliError(
                    f"{models_dir} holds two models for problem {grader.problem_id!r}"
                )
            graders[grader.problem_id] = grader

    embedder = None
    provider_id = args.provider or cfg.default_provider
    if graders:
        if not provider_id:
            raise ConfigError(
                "models are loaded but no provider is configured; "
                "set [training] provider or pass --provider"
            )
        provider_ids = {g.provider_id for g in graders.values()}
        if len(provider_ids) > 1:
            raise CliError(
                f"models in {models_dir} were trained with different providers: "
                f"{sorted(provider_ids)}"
            )
        first = next(iter(graders.values()))
        provider = _provider_for_model(provider_id, cfg, first)
        embedder, _, _ = build_embedder(provider, cfg.paths.cache_dir)

    catalog_path = args.catalog or cfg.paths.feedback_catalog
    if catalog_path is not None:
        catalog = load_catalog(_require_file(catalog_path, "feedback catalog"))
    else:
        catalog = default_catalog([p.problem_id for p in problems])

    roster_path = args.roster or cfg.server.roster
    roster = _load_roster(roster_path) if roster_path is not None else None

    max_attempts = (
        args.max_attempts if args.max_attempts is not None else cfg.server.max_attempts
    )
    log_path = Path(args.log) if args.log else cfg.paths.log_path
    log_path.parent.mkdir(parents=True, exist_ok=True)

    return ServerState(
        problems=problems,
        graders=graders,
        embedder=embedder,
        log_path=log_path,
        catalog=catalog,
        roster=roster,
        max_attempts=max_attempts,
    )


def cmd_serve(args, cfg: AppConfig) -> int:
    import uvicorn

    from .server import build_app

    state = build_server_state(args, cfg)
    webui_dir = Path(args.webui) if args.webui else cfg.paths.webui_dir
    app = build_app(state, webui_dir=webui_dir)
    host = args.host or cfg.server.host
    port = args.port if args.port is not None else cfg.server.port
    graded = sorted(state.graders)
    print(f"serving {len(state.problems)} problems on http://{host}:{port}")
    print(f"graders loaded for: {', '.join(graded) if graded else '(none)'}")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def cmd_stats(args, cfg: AppConfig) -> int:
    timer = Timer()
    log_path = _require_file(args.log or cfg.paths.log_path, "attempt log")
    attempts = studystats.load_attempt_log(log_path)
    roster = _load_roster(args.roster) if args.roster else None
    screen = studystats.screen_effort(
        attempts, roster=roster, min_chars=args.min_chars
    )
    included = [a for a in attempts if a.student_id in set(screen.included)]
    timer.lap("load")

    out_dir = Path(args.out_dir) if args.out_dir else cfg.paths.stats_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = {str(log_path): _sha256_file(log_path)}
    outputs = []

    comparisons = studystats.best_score_comparisons(included)
    best_path = out_dir / "best_scores.csv"
    studystats.write_best_scores_csv(best_path, comparisons)
    outputs.append(str(best_path))

    rows = studystats.score_rows(included)
    ols = studystats.fit_best_on_initial(rows)
    ols_path = out_dir / "best_on_initial_ols.csv"
    studystats.write_ols_csv(ols_path, ols)
    outputs.append(str(ols_path))
    timer.lap("scores")

    print(f"{len(attempts)} attempts, {len(screen.included)} students kept, "
          f"{len(screen.excluded)} excluded")
    for comp in comparisons:
        print(
            f"  {comp.problem_id}: H={comp.h:.3f} p={comp.p:.4f} "
            f"groups={comp.group_sizes}"
        )
    print(f"  OLS R^2={ols.r_squared:.3f} on {ols.n_obs} rows")

    if args.survey:
        survey_path = _require_file(args.survey, "survey file")
        inputs[str(survey_path)] = _sha256_file(survey_path)
        responses = studystats.load_survey_csv(survey_path)
        pairs = studystats.survey_pair_comparisons(responses)
        pairs_path = out_dir / "survey_pairs.csv"
        studystats.write_survey_pairs_csv(pairs_path, pairs)
        outputs.append(str(pairs_path))
        anova = studystats.survey_anova(responses)
        anova_path = out_dir / "survey_anova.csv"
        studystats.write_survey_anova_csv(anova_path, anova)
        outputs.append(str(anova_path))
        print(f"  survey: {len(responses)} responses, "
              f"{len(pairs)} pair rows, {len(anova)} anova rows")
    timer.lap("survey")

    for path in outputs:
        print(f"wrote {path}")
    RunManifest(
        command=["stats"]
        + _flag_list(args, ["log", "survey", "out_dir", "roster", "min_chars"]),
        config=_config_snapshot(cfg, None),
        seed=None,
        input_hashes=inputs,
        output_paths=outputs,
        timings=timer.finish(),
    ).write(out_dir / "run.manifest.json")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _flag_list(args, names: list[str]) -> list[str]:
    out = []
    for name in names:
        value = getattr(args, name)
        if value is not None and value is not False:
            out.append(f"--{name.replace('_', '-')}={value}")
    return out


def _manifest_path(out_path: Path) -> Path:
    return Path(str(out_path) + ".manifest.json")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proofgrader",
        description="Rubric-based grading pipeline for induction proofs.",
    )
    parser.add_argument(
        "--config", default=None, help="INI configuration file (flags override it)"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="validate a raw corpus and write canonical JSONL")
    p.add_argument("--in", dest="in_path", required=True, help="raw corpus JSONL")
    p.add_argument("--out", required=True, help="canonical corpus JSONL to write")
    p.add_argument(
        "--drop-empty", action="store_true", help="drop records with empty bodies"
    )
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="embed a corpus into the provider cache")
    p.add_argument("--corpus", default=None, help="corpus JSONL (default from config)")
    p.add_argument("--provider", default="", help="provider id (default from config)")
    p.add_argument("--export", default=None, help="also export the cache to this file")
    p.add_argument(
        "--import",
        dest="import_path",
        default=None,
        help="import a previously exported cache before embedding",
    )
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="train one problem's rubric models")
    p.add_argument("--problem", required=True, help="problem id, e.g. P1")
    p.add_argument("--provider", default="", help="provider id (default from config)")
    p.add_argument("--corpus", default=None, help="corpus JSONL (default from config)")
    p.add_argument("--seed", type=int, default=None, help="split and training seed")
    p.add_argument("--out", default=None, help="model file (default models_dir/<problem>.pgmd)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on the held-out test split")
    p.add_argument("--model", required=True, help="trained .pgmd model file")
    p.add_argument("--corpus", default=None, help="corpus JSONL (default from config)")
    p.add_argument("--provider", default="", help="provider id (default: model's)")
    p.add_argument("--seed", type=int, default=None, help="split seed (default: model's)")
    p.add_argument("--out", default=None, help="metrics CSV (default metrics_<problem>.csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="accuracy as a function of training-set size")
    p.add_argument("--problem", required=True, help="problem id, e.g. P1")
    p.add_argument("--provider", default="", help="provider id (default from config)")
    p.add_argument("--corpus", default=None, help="corpus JSONL (default from config)")
    p.add_argument("--seed", type=int, default=None, help="partition and training seed")
    p.add_argument(
        "--out", default=None, help="curve CSV (default sweep_<problem>_<provider>.csv)"
    )
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("grade", help="grade one proof file with a trained model")
    p.add_argument("--model", required=True, help="trained .pgmd model file")
    p.add_argument("--in", dest="in_path", required=True, help="markdown proof file")
    p.add_argument("--provider", default="", help="provider id (default: model's)")
    p.add_argument("--json", action="store_true", help="print a JSON object instead of text")
    p.set_defaults(func=cmd_grade)

    p = sub.add_parser("serve", help="run the submission and feedback API")
    p.add_argument("--host", default=None, help="bind host (default from config)")
    p.add_argument("--port", type=int, default=None, help="bind port (default from config)")
    p.add_argument("--models-dir", default=None, help="directory scanned for *.pgmd models")
    p.add_argument("--problems", default=None, help="problems JSONL (default from config)")
    p.add_argument("--provider", default="", help="provider id (default from config)")
    p.add_argument("--catalog", default=None, help="feedback catalog JSON")
    p.add_argument("--roster", default=None, help="JSON file mapping student id to group")
    p.add_argument("--max-attempts", type=int, default=None, help="per student and problem")
    p.add_argument("--log", default=None, help="attempt log path (default from config)")
    p.add_argument("--webui", default=None, help="static frontend directory to mount")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("stats", help="compute study tables from an attempt log")
    p.add_argument("--log", default=None, help="attempt log (default from config)")
    p.add_argument("--survey", default=None, help="survey responses CSV")
    p.add_argument("--out-dir", default=None, help="output directory (default from config)")
    p.add_argument("--roster", default=None, help="JSON roster, for the effort screen")
    p.add_argument("--min-chars", type=int, default=20, help="effort screen threshold")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        else:
            cfg = AppConfig()
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ProviderError, RemoteEmbedError, EmbedBatchError) as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 4
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (
        corpus_mod.CorpusError,
        ModelFormatError,
        CacheFormatError,
        EmbeddingError,
        studystats.StatsError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

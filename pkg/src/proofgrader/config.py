"""Declarative configuration for the pipeline commands.

One INI file describes embedding providers, training hyperparameters, file
locations, and the serving setup:

    [providers.demo]
    kind = deterministic-test
    dim = 256

    [training]
    provider = demo
    seed = 7
    epochs_grid = 100, 200, 300

    [paths]
    models_dir = models

    [server]
    port = 8080

Command-line flags override anything set here. Unknown sections and keys are
rejected rather than ignored so typos fail loudly.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .embeddings import ProviderConfig
from .grader import TrainConfig


class ConfigError(ValueError):
    """A configuration file could not be parsed or validated."""


@dataclass(frozen=True)
class PathsConfig:
    models_dir: Path = Path("models")
    cache_dir: Path = Path("caches")
    problems: Path = Path("data/problems.jsonl")
    corpus: Optional[Path] = None
    feedback_catalog: Optional[Path] = None
    log_path: Path = Path("attempts.log")
    webui_dir: Optional[Path] = None
    stats_dir: Path = Path("stats")


@dataclass(frozen=True)
class ServerSettings:
    host: str = "127.0.0.1"
    port: int = 8000
    max_attempts: Optional[int] = None
    roster: Optional[Path] = None


@dataclass(frozen=True)
class AppConfig:
    providers: dict[str, ProviderConfig] = field(default_factory=dict)
    training: TrainConfig = TrainConfig()
    default_provider: str = ""
    paths: PathsConfig = PathsConfig()
    server: ServerSettings = ServerSettings()

    def provider(self, provider_id: str) -> ProviderConfig:
        """Look up a provider, falling back to the configured default."""
        chosen = provider_id or self.default_provider
        if not chosen:
            raise ConfigError(
                "no provider named; pass --provider or set [training] provider"
            )
        if chosen not in self.providers:
            known = sorted(self.providers) or ["<none configured>"]
            raise ConfigError(f"unknown provider {chosen!r}; configured: {known}")
        return self.providers[chosen]


_PROVIDER_KEYS = {
    "kind",
    "dim",
    "endpoint_url",
    "credential_env",
    "needs_math_merge",
    "max_batch",
    "max_retries",
    "max_in_flight",
    "model",
    "seed",
}
_TRAINING_KEYS = {
    "batch_size",
    "epochs_grid",
    "peak_lr",
    "warmup_frac",
    "decay_floor_frac",
    "seed",
    "selection_split",
    "provider",
}
_PATHS_KEYS = {
    "models_dir",
    "cache_dir",
    "problems",
    "corpus",
    "feedback_catalog",
    "log_path",
    "webui_dir",
    "stats_dir",
}
_SERVER_KEYS = {"host", "port", "max_attempts", "roster"}


def _reject_unknown(section: str, present, allowed: set) -> None:
    unknown = sorted(set(present) - allowed)
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys {unknown}; allowed: {sorted(allowed)}")


def _get_int(parser, section: str, key: str, default: int) -> int:
    try:
        return parser.getint(section, key, fallback=default)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key} = {parser.get(section, key)!r} is not an integer"
        ) from None


def _get_float(parser, section: str, key: str, default: float) -> float:
    try:
        return parser.getfloat(section, key, fallback=default)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key} = {parser.get(section, key)!r} is not a number"
        ) from None


def _get_bool(parser, section: str, key: str, default: bool) -> bool:
    try:
        return parser.getboolean(section, key, fallback=default)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key} = {parser.get(section, key)!r} is not a boolean"
        ) from None


def _parse_epochs_grid(raw: str, section: str) -> tuple[int, ...]:
    try:
        return tuple(int(part.strip()) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"[{section}] epochs_grid = {raw!r} is not a comma list of integers") from None


def _optional_path(value: Optional[str]):
    if value is None or not value.strip():
        return None
    return Path(value.strip())


def load_config(path) -> AppConfig:
    """Parse an INI configuration file into an AppConfig."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    providers: dict[str, ProviderConfig] = {}
    for section in parser.sections():
        if section.startswith("providers."):
            provider_id = section.split(".", 1)[1]
            if not provider_id:
                raise ConfigError(f"provider section {section!r} has an empty id")
            _reject_unknown(section, parser.options(section), _PROVIDER_KEYS)
            if not parser.has_option(section, "kind"):
                raise ConfigError(f"[{section}] is missing required key 'kind'")
            if not parser.has_option(section, "dim"):
                raise ConfigError(f"[{section}] is missing required key 'dim'")
            try:
                providers[provider_id] = ProviderConfig(
                    provider_id=provider_id,
                    kind=parser.get(section, "kind").strip(),
                    dim=_get_int(parser, section, "dim", 0),
                    endpoint_url=parser.get(section, "endpoint_url", fallback="").strip(),
                    credential_env=parser.get(section, "credential_env", fallback="").strip(),
                    needs_math_merge=_get_bool(parser, section, "needs_math_merge", False),
                    max_batch=_get_int(parser, section, "max_batch", 64),
                    max_retries=_get_int(parser, section, "max_retries", 5),
                    max_in_flight=_get_int(parser, section, "max_in_flight", 4),
                    model=parser.get(section, "model", fallback="").strip(),
                    seed=_get_int(parser, section, "seed", 0),
                )
            except ValueError as exc:
                raise ConfigError(f"[{section}]: {exc}") from None
        elif section not in ("training", "paths", "server"):
            raise ConfigError(f"unknown config section [{section}]")

    training = TrainConfig()
    default_provider = ""
    if parser.has_section("training"):
        _reject_unknown("training", parser.options("training"), _TRAINING_KEYS)
        defaults = TrainConfig()
        grid = defaults.epochs_grid
        if parser.has_option("training", "epochs_grid"):
            grid = _parse_epochs_grid(parser.get("training", "epochs_grid"), "training")
        try:
            training = TrainConfig(
                batch_size=_get_int(parser, "training", "batch_size", defaults.batch_size),
                epochs_grid=grid,
                peak_lr=_get_float(parser, "training", "peak_lr", defaults.peak_lr),
                warmup_frac=_get_float(parser, "training", "warmup_frac", defaults.warmup_frac),
                decay_floor_frac=_get_float(
                    parser, "training", "decay_floor_frac", defaults.decay_floor_frac
                ),
                seed=_get_int(parser, "training", "seed", defaults.seed),
                selection_split=parser.get(
                    "training", "selection_split", fallback=defaults.selection_split
                ).strip(),
            )
        except ValueError as exc:
            raise ConfigError(f"[training]: {exc}") from None
        default_provider = parser.get("training", "provider", fallback="").strip()

    paths = PathsConfig()
    if parser.has_section("paths"):
        _reject_unknown("paths", parser.options("paths"), _PATHS_KEYS)
        defaults = PathsConfig()
        paths = PathsConfig(
            models_dir=Path(parser.get("paths", "models_dir", fallback=str(defaults.models_dir))),
            cache_dir=Path(parser.get("paths", "cache_dir", fallback=str(defaults.cache_dir))),
            problems=Path(parser.get("paths", "problems", fallback=str(defaults.problems))),
            corpus=_optional_path(parser.get("paths", "corpus", fallback=None)),
            feedback_catalog=_optional_path(
                parser.get("paths", "feedback_catalog", fallback=None)
            ),
            log_path=Path(parser.get("paths", "log_path", fallback=str(defaults.log_path))),
            webui_dir=_optional_path(parser.get("paths", "webui_dir", fallback=None)),
            stats_dir=Path(parser.get("paths", "stats_dir", fallback=str(defaults.stats_dir))),
        )

    server = ServerSettings()
    if parser.has_section("server"):
        _reject_unknown("server", parser.options("server"), _SERVER_KEYS)
        defaults = ServerSettings()
        max_attempts = None
        if parser.has_option("server", "max_attempts"):
            max_attempts = _get_int(parser, "server", "max_attempts", 0)
            if max_attempts <= 0:
                raise ConfigError("[server] max_attempts must be a positive integer")
        server = ServerSettings(
            host=parser.get("server", "host", fallback=defaults.host).strip(),
            port=_get_int(parser, "server", "port", defaults.port),
            max_attempts=max_attempts,
            roster=_optional_path(parser.get("server", "roster", fallback=None)),
        )

    return AppConfig(
        providers=providers,
        training=training,
        default_provider=default_provider,
        paths=paths,
        server=server,
    )

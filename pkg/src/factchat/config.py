"""Declarative run configuration: one JSON file describing the engine
constants, the providers for each role (system, simulator, judge), and the
retrieval backend. Provider credentials come from the environment
(FACTCHAT_API_KEY), never from the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .llm import (
    HTTPCompletionProvider,
    Provider,
    RecordingProvider,
    ReplayProvider,
    ScriptedProvider,
)
from .mockllm import mock_completion
from .model import EngineConfig, validate_config
from .retrieval import CorpusIndex, RemoteRetriever, Retriever

PROVIDER_MODES = ("mock", "live", "replay", "record", "record-mock")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ProviderSettings:
    mode: str = "mock"
    base_url: str = ""
    model_id: str = "engine-default"
    cassette: str = ""

    def __post_init__(self) -> None:
        if self.mode not in PROVIDER_MODES:
            raise ConfigError(f"provider mode {self.mode!r}; expected one of {PROVIDER_MODES}")
        if self.mode in ("live", "record") and not self.base_url:
            raise ConfigError(f"provider mode {self.mode!r} requires base_url")
        if self.mode in ("replay", "record", "record-mock") and not self.cassette:
            raise ConfigError(f"provider mode {self.mode!r} requires cassette")


@dataclass(frozen=True)
class RetrievalSettings:
    index_path: str = ""
    remote_url: str = ""

    def __post_init__(self) -> None:
        if self.index_path and self.remote_url:
            raise ConfigError("configure either index_path or remote_url, not both")


@dataclass(frozen=True)
class AppConfig:
    engine: EngineConfig = field(default_factory=EngineConfig)
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    simulator_provider: ProviderSettings = field(default_factory=lambda: ProviderSettings(model_id="simulator-default"))
    judge_provider: ProviderSettings = field(default_factory=lambda: ProviderSettings(model_id="judge-default"))
    retrieval: RetrievalSettings = field(default_factory=RetrievalSettings)
    turns_per_dialogue: int = 5
    wiki_base_url: str = "https://en.wikipedia.org/api/rest_v1"
    log_path: str = ""


def _engine_config(raw: dict) -> EngineConfig:
    kwargs = {}
    fields = {
        "n_ir": int,
        "n_evidence": int,
        "n_evidence_eval": int,
        "passage_word_limit": int,
        "history_window": int,
        "temperature": float,
        "recency_weight": float,
        "recency_timescale_days": float,
        "retrieval_overfetch": int,
        "location": str,
    }
    for name, cast in fields.items():
        if name in raw:
            kwargs[name] = cast(raw[name])
    if "today" in raw:
        kwargs["today"] = date.fromisoformat(raw["today"])
    return validate_config(EngineConfig(**kwargs))


def _provider_settings(raw: dict, default_model: str) -> ProviderSettings:
    return ProviderSettings(
        mode=raw.get("mode", "mock"),
        base_url=raw.get("base_url", ""),
        model_id=raw.get("model_id", default_model),
        cassette=raw.get("cassette", ""),
    )


def load_config(path: str | Path | None) -> AppConfig:
    """Load the config file; a missing path yields the all-defaults config
    (mock providers, no retrieval backend until one is configured)."""
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return AppConfig(
        engine=_engine_config(raw.get("engine", {})),
        provider=_provider_settings(raw.get("provider", {}), "engine-default"),
        simulator_provider=_provider_settings(raw.get("simulator_provider", {}), "simulator-default"),
        judge_provider=_provider_settings(raw.get("judge_provider", {}), "judge-default"),
        retrieval=RetrievalSettings(
            index_path=raw.get("retrieval", {}).get("index_path", ""),
            remote_url=raw.get("retrieval", {}).get("remote_url", ""),
        ),
        turns_per_dialogue=int(raw.get("turns_per_dialogue", 5)),
        wiki_base_url=raw.get("wiki_base_url", "https://en.wikipedia.org/api/rest_v1"),
        log_path=raw.get("log_path", ""),
    )


def build_provider(settings: ProviderSettings) -> Provider:
    if settings.mode == "mock":
        return ScriptedProvider(mock_completion)
    if settings.mode == "live":
        return HTTPCompletionProvider(settings.base_url)
    if settings.mode == "replay":
        return ReplayProvider.from_file(settings.cassette)
    if settings.mode == "record":
        return RecordingProvider(HTTPCompletionProvider(settings.base_url), settings.cassette)
    if settings.mode == "record-mock":
        return RecordingProvider(ScriptedProvider(mock_completion), settings.cassette)
    raise ConfigError(f"unhandled provider mode {settings.mode!r}")


def build_retriever(settings: RetrievalSettings) -> Retriever:
    if settings.remote_url:
        return RemoteRetriever(settings.remote_url)
    if settings.index_path:
        return CorpusIndex.load(settings.index_path)
    raise ConfigError("no retrieval backend configured: set retrieval.index_path or retrieval.remote_url")

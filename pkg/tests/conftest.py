from __future__ import annotations

import sys
from datetime import date
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from factchat.llm import ScriptedProvider
from factchat.mockllm import mock_completion
from factchat.model import EngineConfig, PassageDate
from factchat.pipeline import ChatEngine
from factchat.retrieval import Article, build_corpus_index

TODAY = date(2023, 4, 28)

DATA_DIR = Path(__file__).parent / "data"


def counter_clock(step: float = 1.0):
    """Deterministic stand-in for time.monotonic."""
    state = [0.0]

    def clock() -> float:
        state[0] += step
        return state[0]

    return clock


def _body(sentences: list[str], repeats: int) -> str:
    return " ".join(sentences * repeats)


@pytest.fixture(scope="session")
def corpus_articles() -> list[Article]:
    """Small corpus with enough lexical overlap that topic queries return
    several passages, and a spread of dates for temporal re-ranking."""
    return [
        Article(
            "Harbor Lighthouse",
            _body(
                [
                    "The Harbor Lighthouse is a stone lighthouse guarding the harbor entrance.",
                    "The lighthouse keepers maintained the harbor beacon through storms.",
                    "Sailors used the harbor lighthouse to navigate the rocky coast at night.",
                ],
                8,
            ),
            date=PassageDate(2021, 6, 1),
        ),
        Article(
            "Harbor Lighthouse Restoration",
            _body(
                [
                    "The harbor lighthouse restoration began in March 2023 with new masonry.",
                    "Volunteers repaired the lighthouse lantern room and the harbor pier.",
                ],
                9,
            ),
            date=PassageDate(2023, 3, 15),
        ),
        Article(
            "History of Harbor Navigation",
            _body(
                [
                    "Harbor navigation history records the first lighthouse on this coast in 1812.",
                    "Early harbor charts show the lighthouse position and the channel depths.",
                ],
                9,
            ),
            date=PassageDate(1998),
        ),
        Article(
            "Mount Vesta Eruption of 2022",
            _body(
                [
                    "The Mount Vesta eruption of 2022 began in November 2022 after decades of quiet.",
                    "Lava flows from Mount Vesta threatened the observatory road in 2022.",
                ],
                9,
            ),
            date=PassageDate(2022, 11, 27),
        ),
        Article(
            "Mount Vesta Eruption of 1984",
            _body(
                [
                    "The Mount Vesta eruption of 1984 lasted three weeks in spring 1984.",
                    "The 1984 eruption of Mount Vesta produced fountains of lava from the rift zone.",
                ],
                9,
            ),
            date=PassageDate(1984, 3, 25),
        ),
        Article(
            "Comet Quill",
            _body(
                [
                    "Comet Quill is a long-period comet discovered by amateur astronomers.",
                    "Observers photographed Comet Quill near the horizon before dawn.",
                ],
                9,
            ),
        ),
    ]


@pytest.fixture(scope="session")
def corpus_index(corpus_articles):
    return build_corpus_index(corpus_articles, 120)


@pytest.fixture()
def mock_provider() -> ScriptedProvider:
    return ScriptedProvider(mock_completion)


@pytest.fixture()
def engine_config() -> EngineConfig:
    return EngineConfig(today=TODAY)


@pytest.fixture()
def engine(engine_config, mock_provider, corpus_index) -> ChatEngine:
    return ChatEngine(
        engine_config,
        mock_provider,
        corpus_index,
        clock=counter_clock(),
    )


def make_engine(provider, index, **kwargs) -> ChatEngine:
    kwargs.setdefault("clock", counter_clock())
    return ChatEngine(EngineConfig(today=TODAY), provider, index, **kwargs)

"""LLM judge for the five conversationality criteria. The judge thinks out
loud per criterion and assigns 0-100 scores; turns whose completion is
missing a criterion are marked unjudged and excluded from averages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..llm import CompletionRequest, Provider
from ..model import DialogueTurn, EngineConfig, history_for_prompt
from ..parsers import ParseError, parse_judge_scores
from ..pipeline import dialogue_entries, format_day
from ..templating import load_prompt

JUDGE_MAX_TOKENS = 512
JUDGE_STOPS = ("\n=====",)

CRITERION_FIELDS = {
    "Relevant": "relevant",
    "Informational": "informational",
    "Natural": "natural",
    "Non-Repetitive": "non_repetitive",
    "Temporally Correct": "temporally_correct",
}


class JudgeError(Exception):
    """Completion could not be scored; the turn counts as unjudged."""


@dataclass(frozen=True)
class JudgeScores:
    relevant: int
    informational: int
    natural: int
    non_repetitive: int
    temporally_correct: int
    rationale: str = ""

    def __post_init__(self) -> None:
        for name in ("relevant", "informational", "natural", "non_repetitive", "temporally_correct"):
            value = getattr(self, name)
            if not 0 <= value <= 100:
                raise ValueError(f"{name} score out of [0,100]: {value}")

    def as_dict(self) -> dict[str, int]:
        return {
            "relevant": self.relevant,
            "informational": self.informational,
            "natural": self.natural,
            "non_repetitive": self.non_repetitive,
            "temporally_correct": self.temporally_correct,
        }


class Judge:
    def __init__(self, cfg: EngineConfig, provider: Provider, model_id: str = "judge-default") -> None:
        self.cfg = cfg
        self.provider = provider
        self.model_id = model_id
        self.template = load_prompt("judge")

    def judge_turn(
        self,
        history: Sequence[DialogueTurn],
        user_utterance: str,
        response: str,
    ) -> JudgeScores:
        if not response.strip():
            raise JudgeError("cannot judge an empty response")
        prompt = self.template.render(
            {
                "today": format_day(self.cfg.today),
                "dlg": dialogue_entries(history_for_prompt(history, self.cfg.history_window)),
                "new_user_utterance": user_utterance,
                "response": response,
            }
        )
        req = CompletionRequest(
            prompt=prompt,
            model_id=self.model_id,
            temperature=self.cfg.temperature,
            max_tokens=JUDGE_MAX_TOKENS,
            stop_sequences=JUDGE_STOPS,
        )
        completion = self.provider.complete(req).text
        try:
            scores = parse_judge_scores(completion)
        except ParseError as exc:
            raise JudgeError(str(exc)) from exc
        return JudgeScores(
            rationale=completion.strip(),
            **{field: scores[name] for name, field in CRITERION_FIELDS.items()},
        )

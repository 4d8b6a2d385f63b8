"""Parsers that turn each pipeline stage's raw LLM completion into typed
values. Every parser is total over well-formed stage output and raises
ParseError otherwise; the orchestrator maps ParseError to the stage's
documented fallback instead of aborting the turn.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .model import Claim, FeedbackScores, ModelError, QueryIntent, QueryTime, parse_query_time

log = logging.getLogger(__name__)


class ParseError(Exception):
    pass


@dataclass(frozen=True)
class SearchDecision:
    needed: bool
    intent: QueryIntent | None = None

    def __post_init__(self) -> None:
        if self.needed != (self.intent is not None):
            raise ModelError("intent must be present iff search is needed")


@dataclass(frozen=True)
class ParsedVerdict:
    label: str
    reasoning: str
    rewrite: str | None = None


REFINE_CRITERIA = ("Relevant", "Conversational", "Non-Repetitive", "Temporally Correct")
JUDGE_CRITERIA = ("Relevant", "Informational", "Natural", "Non-Repetitive", "Temporally Correct")

REFINED_MARKER = "New Response after applying this feedback:"

_NO_RE = re.compile(r"^\s*No\b\.?\s*\]?\s*$")
_YES_RE = re.compile(
    r'^\s*Yes\.?\s+You Google\s+"([^"]+)"\.?\s*'
    r'The year of the results is\s+"([^"]*)"\s*\.?\s*\]?\s*$',
    re.DOTALL,
)
_CLAIM_LINE_RE = re.compile(r'^\s*-\s*(.+?)\s*The year of the results is\s+"([^"]*)"\s*\.?\s*$')
_LABEL_RE = re.compile(r'"(SUPPORTS|REFUTES|NOT ENOUGH INFO)"')
_REWRITE_RE = re.compile(r"You rewrite your claim:\s*(.+)")
_THINK_PREFIX = "[You think step by step:"


def parse_search_decision(completion: str) -> SearchDecision:
    """Parse the query-generation completion.

    `` No.]`` means no search; `` Yes. You Google "<q>". The year of the
    results is "<t>".]`` yields an intent with t one of none/recent/a 4-digit
    year (``year=yyyy`` also accepted). Anything else raises ParseError.
    """
    if _NO_RE.match(completion):
        return SearchDecision(needed=False)
    m = _YES_RE.match(completion)
    if not m:
        raise ParseError(f"unparseable search decision: {completion[:80]!r}")
    query = m.group(1).strip()
    try:
        time = parse_query_time(m.group(2))
    except ModelError as exc:
        raise ParseError(str(exc)) from exc
    return SearchDecision(needed=True, intent=QueryIntent(query=query, time=time))


def parse_summary_bullets(completion: str) -> list[str]:
    """Lines beginning ``- `` become bullets; a bare ``None`` means the
    article was unrelated. Non-bullet noise lines are ignored."""
    if completion.strip().lower() == "none":
        return []
    bullets = []
    for line in completion.splitlines():
        stripped = line.strip()
        if stripped.startswith("- "):
            text = stripped[2:].strip()
            if text:
                bullets.append(text)
    return bullets


def parse_claims(completion: str, source_turn: int = 0) -> tuple[list[Claim], int]:
    """Parse claim-splitting output: one claim per line of the form
    ``- <claim text> The year of the results is "<time>".``

    Returns (claims, skipped) where skipped counts non-empty lines that
    failed the pattern. An empty claim list is valid (pure chitchat).
    """
    claims: list[Claim] = []
    skipped = 0
    for line in completion.splitlines():
        if not line.strip():
            continue
        m = _CLAIM_LINE_RE.match(line)
        if not m:
            skipped += 1
            log.warning("claim line does not match grammar: %r", line[:80])
            continue
        try:
            time: QueryTime = parse_query_time(m.group(2))
        except ModelError:
            skipped += 1
            log.warning("claim line has bad time qualifier: %r", line[:80])
            continue
        claims.append(Claim(text=m.group(1).strip(), time=time, source_turn=source_turn))
    return claims, skipped


def parse_verdict(completion: str) -> ParsedVerdict:
    """Find the LAST quoted label among SUPPORTS / REFUTES / NOT ENOUGH INFO.

    The reasoning is the chain-of-thought before the sentence that contains
    the label. A trailing ``You rewrite your claim:`` line is captured but
    the pipeline does not act on it.
    """
    matches = list(_LABEL_RE.finditer(completion))
    if not matches:
        raise ParseError(f"no verdict label in completion: {completion[:80]!r}")
    m = matches[-1]
    label = m.group(1).replace(" ", "_")

    pre = completion[:m.start()]
    sentence_end = pre.rfind(".")
    reasoning = pre[:sentence_end + 1] if sentence_end >= 0 else pre
    reasoning = reasoning.strip()
    if reasoning.startswith(_THINK_PREFIX):
        reasoning = reasoning[len(_THINK_PREFIX):].strip()
    reasoning = reasoning.rstrip("]").strip()

    rewrite = None
    rw = _REWRITE_RE.search(completion, m.end())
    if rw:
        rewrite = rw.group(1).splitlines()[0].strip() or None
    return ParsedVerdict(label=label, reasoning=reasoning, rewrite=rewrite)


def parse_rubric_scores(completion: str, criteria: tuple[str, ...]) -> dict[str, tuple[int, str]]:
    """Parse ``* <Criterion>: <rationale> <score>/100`` lines for every
    criterion. Scores outside [0,100] are clamped with a warning. Raises
    ParseError when any criterion line is missing."""
    results: dict[str, tuple[int, str]] = {}
    for name in criteria:
        pattern = re.compile(
            rf"^[ \t]*\*\s*{re.escape(name)}\s*:\s*(.*?)\s*(-?\d+)\s*/\s*100\b",
            re.MULTILINE | re.IGNORECASE,
        )
        m = pattern.search(completion)
        if not m:
            raise ParseError(f"missing criterion score line: {name}")
        score = int(m.group(2))
        if not 0 <= score <= 100:
            log.warning("%s score %d out of range, clamping", name, score)
            score = min(100, max(0, score))
        results[name] = (score, m.group(1).strip())
    return results


def parse_refinement(completion: str) -> tuple[FeedbackScores, str]:
    """Parse the feedback-and-refine completion into per-criterion scores and
    the refined response (text after the final marker)."""
    idx = completion.rfind(REFINED_MARKER)
    if idx < 0:
        raise ParseError("refined-response marker not found")
    refined = completion[idx + len(REFINED_MARKER):].strip()
    if refined.endswith("====="):
        refined = refined[:-5].strip()
    if not refined:
        raise ParseError("refined response is empty")

    parsed = parse_rubric_scores(completion[:idx], REFINE_CRITERIA)
    scores = FeedbackScores(
        relevant=parsed["Relevant"][0],
        conversational=parsed["Conversational"][0],
        non_repetitive=parsed["Non-Repetitive"][0],
        temporally_correct=parsed["Temporally Correct"][0],
        rationales=tuple(
            (name.lower().replace("-", "_").replace(" ", "_"), parsed[name][1])
            for name in REFINE_CRITERIA
        ),
    )
    return scores, refined


def parse_judge_scores(completion: str) -> dict[str, int]:
    """Parse the five conversationality criterion scores from a judge
    completion; raises ParseError when any criterion is absent."""
    parsed = parse_rubric_scores(completion, JUDGE_CRITERIA)
    return {name: score for name, (score, _) in parsed.items()}

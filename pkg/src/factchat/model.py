"""Domain types shared by every module: dialogue state, passages, claims,
verdicts, per-turn pipeline traces, and the engine configuration.

All types are immutable values. Serialization is canonical JSON (sorted keys,
compact separators) so that identical values always produce identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from datetime import date
from typing import Any, Iterable, Iterator, Literal, Union

# Query/claim time qualifier: "none", "recent", or a specific year.
QueryTime = Union[Literal["none", "recent"], int]

VERDICT_LABELS = ("SUPPORTS", "REFUTES", "NOT_ENOUGH_INFO")
BULLET_ORIGINS = ("retrieval_summary", "verified_llm_claim")
TOPIC_CLASSES = ("head", "tail", "recent")

# The seven pipeline stages, in execution order.
STAGES = (
    "query_generation",
    "retrieval",
    "summarization",
    "generation",
    "claim_splitting",
    "verification",
    "refinement",
)

FEEDBACK_CRITERIA = ("relevant", "conversational", "non_repetitive", "temporally_correct")

_YEAR_ONLY_RE = re.compile(r"^\d{1,4}$")
_FULL_DATE_RE = re.compile(r"^(\d{1,4})-(\d{2})-(\d{2})$")


class ModelError(ValueError):
    """Invariant violation in a domain value."""


def parse_query_time(token: str) -> QueryTime:
    """Parse a time qualifier token: "none", "recent", "yyyy" or "year=yyyy".

    Raises ModelError for anything else (e.g. "202X").
    """
    token = token.strip().strip('"').lower()
    if token in ("none", "recent"):
        return token  # type: ignore[return-value]
    if token.startswith("year="):
        token = token[len("year="):]
    if re.fullmatch(r"\d{4}", token):
        year = int(token)
        if 1 <= year <= 9999:
            return year
    raise ModelError(f"unrecognized time qualifier: {token!r}")


def format_query_time(time: QueryTime) -> str:
    return str(time)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ModelError(msg)


@dataclass(frozen=True)
class PassageDate:
    """Calendar date at day granularity; month/day may be absent (year-only).

    Year-only dates behave as July 1 of that year in recency arithmetic.
    """

    year: int
    month: int | None = None
    day: int | None = None

    def __post_init__(self) -> None:
        _require(1 <= self.year <= 9999, "year out of range")
        _require((self.month is None) == (self.day is None), "month and day must be set together")

    @property
    def year_only(self) -> bool:
        return self.month is None

    def effective(self) -> date:
        if self.year_only:
            return date(self.year, 7, 1)
        return date(self.year, self.month, self.day)  # type: ignore[arg-type]

    @classmethod
    def parse(cls, text: str) -> "PassageDate":
        text = text.strip()
        if _YEAR_ONLY_RE.match(text):
            return cls(year=int(text))
        m = _FULL_DATE_RE.match(text)
        if m:
            d = cls(year=int(m.group(1)), month=int(m.group(2)), day=int(m.group(3)))
            d.effective()  # reject e.g. Feb 30 early
            return d
        raise ModelError(f"unparseable date: {text!r}")

    def __str__(self) -> str:
        if self.year_only:
            return f"{self.year:04d}"
        return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"


@dataclass(frozen=True)
class QueryIntent:
    query: str
    time: QueryTime = "none"

    def __post_init__(self) -> None:
        _require(bool(self.query), "query must be non-empty")
        if isinstance(self.time, int):
            _require(1 <= self.time <= 9999, "year out of range")
        else:
            _require(self.time in ("none", "recent"), f"bad time qualifier: {self.time!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"query": self.query, "time": self.time}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "QueryIntent":
        return cls(query=d["query"], time=d["time"])


@dataclass(frozen=True)
class Passage:
    """A title-prefixed corpus chunk with retrieval score and rank."""

    id: str
    title: str
    body: str
    score: float = 0.0
    rank: int = 1
    date: PassageDate | None = None

    def __post_init__(self) -> None:
        _require(self.rank >= 1, "rank must be >= 1")
        _require(self.score == self.score and abs(self.score) != float("inf"), "score must be finite")

    def word_count(self) -> int:
        return len(self.title.split()) + len(self.body.split())

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "body": self.body,
            "date": str(self.date) if self.date else None,
            "score": float(self.score),
            "rank": self.rank,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Passage":
        return cls(
            id=d["id"],
            title=d["title"],
            body=d["body"],
            score=float(d["score"]),
            rank=int(d["rank"]),
            date=PassageDate.parse(d["date"]) if d.get("date") else None,
        )


@dataclass(frozen=True)
class Claim:
    """A self-contained factual statement extracted from an LLM response."""

    text: str
    time: QueryTime = "none"
    source_turn: int = 0

    def __post_init__(self) -> None:
        _require(bool(self.text.strip()), "claim text must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "time": self.time, "source_turn": self.source_turn}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Claim":
        return cls(text=d["text"], time=d["time"], source_turn=int(d["source_turn"]))


@dataclass(frozen=True)
class Verdict:
    label: str
    reasoning: str = ""
    evidence: tuple[Passage, ...] = ()

    def __post_init__(self) -> None:
        _require(self.label in VERDICT_LABELS, f"bad verdict label: {self.label!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "reasoning": self.reasoning,
            "evidence": [p.to_dict() for p in self.evidence],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Verdict":
        return cls(
            label=d["label"],
            reasoning=d.get("reasoning", ""),
            evidence=tuple(Passage.from_dict(p) for p in d.get("evidence", [])),
        )


@dataclass(frozen=True)
class EvidenceBullet:
    text: str
    origin: str
    provenance: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        _require(bool(self.text.strip()), "bullet text must be non-empty")
        _require(self.origin in BULLET_ORIGINS, f"bad bullet origin: {self.origin!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "origin": self.origin, "provenance": list(self.provenance)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvidenceBullet":
        return cls(text=d["text"], origin=d["origin"], provenance=tuple(d.get("provenance", ())))


@dataclass(frozen=True)
class FeedbackScores:
    """Per-criterion 0-100 scores from the feedback-and-refine stage."""

    relevant: int
    conversational: int
    non_repetitive: int
    temporally_correct: int
    rationales: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        for name in FEEDBACK_CRITERIA:
            value = getattr(self, name)
            _require(0 <= value <= 100, f"{name} score out of [0,100]: {value}")
        # serialized as a mapping, so keep a canonical order
        object.__setattr__(self, "rationales", tuple(sorted(self.rationales)))

    def rationale_for(self, criterion: str) -> str:
        for key, text in self.rationales:
            if key == criterion:
                return text
        return ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "relevant": self.relevant,
            "conversational": self.conversational,
            "non_repetitive": self.non_repetitive,
            "temporally_correct": self.temporally_correct,
            "rationales": {k: v for k, v in self.rationales},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FeedbackScores":
        return cls(
            relevant=int(d["relevant"]),
            conversational=int(d["conversational"]),
            non_repetitive=int(d["non_repetitive"]),
            temporally_correct=int(d["temporally_correct"]),
            rationales=tuple(sorted(d.get("rationales", {}).items())),
        )


@dataclass(frozen=True)
class StageOutcome:
    """Record of one pipeline stage: whether it ran, parsed, or fell back."""

    stage: str
    raw_completion: str | None = None
    parsed_ok: bool = True
    fallback_used: bool = False
    skipped: bool = False

    def __post_init__(self) -> None:
        _require(self.stage in STAGES, f"unknown stage: {self.stage!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "raw_completion": self.raw_completion,
            "parsed_ok": self.parsed_ok,
            "fallback_used": self.fallback_used,
            "skipped": self.skipped,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StageOutcome":
        return cls(
            stage=d["stage"],
            raw_completion=d.get("raw_completion"),
            parsed_ok=bool(d.get("parsed_ok", True)),
            fallback_used=bool(d.get("fallback_used", False)),
            skipped=bool(d.get("skipped", False)),
        )


@dataclass(frozen=True)
class PipelineTrace:
    """Every intermediate artifact of one agent turn, persisted and replayable."""

    search_decision: QueryIntent | None = None
    retrieved: tuple[Passage, ...] = ()
    reranked: tuple[Passage, ...] = ()
    summary_bullets: tuple[EvidenceBullet, ...] = ()
    llm_response: str = ""
    claims: tuple[tuple[Claim, Verdict], ...] = ()
    bullets_final: tuple[EvidenceBullet, ...] = ()
    draft: str = ""
    feedback: FeedbackScores | None = None
    final: str = ""
    timings: tuple[tuple[str, float], ...] = ()
    stages: tuple[StageOutcome, ...] = ()

    def __post_init__(self) -> None:
        # timings serialize as a mapping, so keep a canonical order
        object.__setattr__(self, "timings", tuple(sorted(self.timings)))

    def timing(self, stage: str) -> float | None:
        for name, ms in self.timings:
            if name == stage:
                return ms
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "search_decision": self.search_decision.to_dict() if self.search_decision else None,
            "retrieved": [p.to_dict() for p in self.retrieved],
            "reranked": [p.to_dict() for p in self.reranked],
            "summary_bullets": [b.to_dict() for b in self.summary_bullets],
            "llm_response": self.llm_response,
            "claims": [{"claim": c.to_dict(), "verdict": v.to_dict()} for c, v in self.claims],
            "bullets_final": [b.to_dict() for b in self.bullets_final],
            "draft": self.draft,
            "feedback": self.feedback.to_dict() if self.feedback else None,
            "final": self.final,
            "timings": {k: float(v) for k, v in self.timings},
            "stages": [s.to_dict() for s in self.stages],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PipelineTrace":
        return cls(
            search_decision=QueryIntent.from_dict(d["search_decision"]) if d.get("search_decision") else None,
            retrieved=tuple(Passage.from_dict(p) for p in d.get("retrieved", [])),
            reranked=tuple(Passage.from_dict(p) for p in d.get("reranked", [])),
            summary_bullets=tuple(EvidenceBullet.from_dict(b) for b in d.get("summary_bullets", [])),
            llm_response=d.get("llm_response", ""),
            claims=tuple(
                (Claim.from_dict(e["claim"]), Verdict.from_dict(e["verdict"])) for e in d.get("claims", [])
            ),
            bullets_final=tuple(EvidenceBullet.from_dict(b) for b in d.get("bullets_final", [])),
            draft=d.get("draft", ""),
            feedback=FeedbackScores.from_dict(d["feedback"]) if d.get("feedback") else None,
            final=d.get("final", ""),
            timings=tuple(sorted((k, float(v)) for k, v in d.get("timings", {}).items())),
            stages=tuple(StageOutcome.from_dict(s) for s in d.get("stages", [])),
        )


@dataclass(frozen=True)
class DialogueTurn:
    """One user/agent exchange; trace present iff produced by the pipeline."""

    user_utterance: str
    agent_utterance: str
    trace: PipelineTrace | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_utterance": self.user_utterance,
            "agent_utterance": self.agent_utterance,
            "trace": self.trace.to_dict() if self.trace else None,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DialogueTurn":
        return cls(
            user_utterance=d["user_utterance"],
            agent_utterance=d["agent_utterance"],
            trace=PipelineTrace.from_dict(d["trace"]) if d.get("trace") else None,
        )


@dataclass
class ConversationState:
    """Mutable conversation owned by a single orchestrator."""

    topic_id: str | None = None
    turns: list[DialogueTurn] = field(default_factory=list)
    pending_user_utterance: str | None = None

    def begin_user_turn(self, utterance: str) -> None:
        _require(bool(utterance.strip()), "user utterance must be non-empty")
        _require(self.pending_user_utterance is None, "a user turn is already pending")
        self.pending_user_utterance = utterance

    def complete_turn(self, agent_utterance: str, trace: PipelineTrace | None) -> DialogueTurn:
        _require(self.pending_user_utterance is not None, "no pending user utterance")
        _require(bool(agent_utterance.strip()), "agent utterance must be non-empty")
        turn = DialogueTurn(self.pending_user_utterance, agent_utterance, trace)
        self.turns.append(turn)
        self.pending_user_utterance = None
        return turn

    def to_dict(self) -> dict[str, Any]:
        return {
            "topic_id": self.topic_id,
            "turns": [t.to_dict() for t in self.turns],
            "pending_user_utterance": self.pending_user_utterance,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ConversationState":
        return cls(
            topic_id=d.get("topic_id"),
            turns=[DialogueTurn.from_dict(t) for t in d.get("turns", [])],
            pending_user_utterance=d.get("pending_user_utterance"),
        )


@dataclass(frozen=True)
class EngineConfig:
    """Tunable constants of the response pipeline.

    Defaults follow the reference setup: 3 passages after re-ranking, 2
    evidence passages per claim, 5 for annotation export, 120-word passages,
    greedy deterministic decoding.
    """

    n_ir: int = 3
    n_evidence: int = 2
    n_evidence_eval: int = 5
    passage_word_limit: int = 120
    history_window: int = 3
    temperature: float = 0.0
    recency_weight: float = 0.3
    recency_timescale_days: float = 365.0
    retrieval_overfetch: int = 20
    today: date = date(2023, 4, 28)
    location: str = "U.S."

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["today"] = self.today.isoformat()
        return d


def validate_config(cfg: EngineConfig) -> EngineConfig:
    """Check every field range; return cfg unchanged or raise naming the field."""
    checks = [
        (cfg.n_ir >= 1, "n_ir"),
        (cfg.n_evidence >= 1, "n_evidence"),
        (cfg.n_evidence_eval >= 1, "n_evidence_eval"),
        (cfg.passage_word_limit >= 2, "passage_word_limit"),
        (cfg.history_window >= 1, "history_window"),
        (cfg.temperature >= 0.0, "temperature"),
        (0.0 <= cfg.recency_weight <= 1.0, "recency_weight"),
        (cfg.recency_timescale_days > 0.0, "recency_timescale_days"),
        (cfg.retrieval_overfetch >= cfg.n_ir, "retrieval_overfetch"),
        (isinstance(cfg.today, date), "today"),
        (bool(cfg.location), "location"),
    ]
    for ok, name in checks:
        if not ok:
            raise ModelError(f"config field out of range: {name}")
    return cfg


def canonical_json(value: Any) -> str:
    """Deterministic JSON: sorted keys, compact separators, raw unicode."""
    return json.dumps(value, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def serialize_trace(trace: PipelineTrace) -> str:
    return canonical_json(trace.to_dict())


def deserialize_trace(text: str) -> PipelineTrace:
    return PipelineTrace.from_dict(json.loads(text))


def serialize_state(state: ConversationState) -> str:
    return canonical_json(state.to_dict())


def deserialize_state(text: str) -> ConversationState:
    return ConversationState.from_dict(json.loads(text))


def validate_trace(trace: PipelineTrace, n_ir: int | None = None, n_evidence: int | None = None) -> None:
    """Assert the structural trace invariants; raises ModelError on violation.

    - reranked is drawn from retrieved (as a multiset) and bounded by n_ir;
    - verified-claim bullets correspond 1:1 to claims labelled SUPPORTS;
    - all seven stages are recorded; the final response is non-empty.
    """
    retrieved_ids = [p.id for p in trace.retrieved]
    for p in trace.reranked:
        if p.id not in retrieved_ids:
            raise ModelError(f"reranked passage {p.id} not among retrieved")
        retrieved_ids.remove(p.id)
    if n_ir is not None and len(trace.reranked) > n_ir:
        raise ModelError(f"reranked length {len(trace.reranked)} exceeds n_ir={n_ir}")
    if n_evidence is not None:
        for _, verdict in trace.claims:
            if len(verdict.evidence) > n_evidence:
                raise ModelError("verdict evidence exceeds n_evidence")

    supported = [c.text for c, v in trace.claims if v.label == "SUPPORTS"]
    claim_bullets = [b.text for b in trace.bullets_final if b.origin == "verified_llm_claim"]
    if sorted(supported) != sorted(claim_bullets):
        raise ModelError("verified-claim bullets do not match SUPPORTS claims 1:1")

    recorded = tuple(s.stage for s in trace.stages)
    if recorded != STAGES:
        raise ModelError(f"trace stages {recorded} != expected {STAGES}")
    if not trace.final.strip():
        raise ModelError("final response is empty")


class ConversationLog:
    """Append-only JSON Lines log: one line per completed agent turn."""

    def __init__(self, path: str) -> None:
        self.path = path

    def append(self, topic_id: str | None, turn_index: int, turn: DialogueTurn) -> None:
        row = {
            "topic_id": topic_id,
            "turn_index": turn_index,
            "user": turn.user_utterance,
            "agent": turn.agent_utterance,
            "trace": turn.trace.to_dict() if turn.trace else None,
        }
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(canonical_json(row) + "\n")

    def read(self) -> Iterator[dict[str, Any]]:
        with open(self.path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    yield json.loads(line)


def history_for_prompt(turns: Iterable[DialogueTurn], window: int) -> list[DialogueTurn]:
    """Last `window` completed turns, oldest first."""
    turns = list(turns)
    return turns[-window:] if window >= 0 else turns

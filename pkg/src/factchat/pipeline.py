"""Seven-stage response pipeline: decide whether to search, retrieve and
re-rank passages, summarize them into bullets, generate an unguarded LLM
response, split it into claims, verify each claim against retrieved evidence,
then draft and refine the final reply from everything that survived.

Parser failures degrade to per-stage fallbacks (a chatbot must answer every
turn); provider or retriever failures abort the turn with a stage tag.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

from . import parsers
from .llm import CompletionRequest, Provider
from .model import (
    Claim,
    ConversationState,
    DialogueTurn,
    EngineConfig,
    EvidenceBullet,
    FeedbackScores,
    Passage,
    PipelineTrace,
    QueryIntent,
    StageOutcome,
    Verdict,
    format_query_time,
    history_for_prompt,
    validate_config,
)
from .parsers import ParseError, SearchDecision
from .retrieval import Retriever, rerank_temporal
from .templating import Template, load_prompt

STAGE_MAX_TOKENS = {
    "query_generation": 64,
    "summarization": 512,
    "generation": 512,
    "claim_splitting": 512,
    "verification": 256,
    "refinement": 512,
}

STAGE_STOPS: dict[str, tuple[str, ...]] = {
    "query_generation": ("]", "\n"),
    "summarization": ("\nQuery:", "\n====="),
    "generation": ("\nUser:", "\n====="),
    "claim_splitting": ("\nUser:", "\n====="),
    "verification": ("\n=====", "\nUser:"),
    "refinement": ("\n=====",),
}

FALLBACK_REPLY = "I'm not sure what to say to that."


class StageError(Exception):
    """Provider or retriever failure, tagged with the stage that hit it."""

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


def format_day(d) -> str:
    return f"{d.month}/{d.day}/{d.year}"


def dialogue_entries(history: Sequence[DialogueTurn]) -> list[dict]:
    """Render-context rows for one prior turn each, including the turn's
    recorded search decision when a trace is present."""
    entries = []
    for turn in history:
        query, when = "", ""
        if turn.trace and turn.trace.search_decision:
            query = turn.trace.search_decision.query
            when = format_query_time(turn.trace.search_decision.time)
        entries.append(
            {
                "user_utterance": turn.user_utterance,
                "agent_utterance": turn.agent_utterance,
                "search_query": query,
                "search_time": when,
            }
        )
    return entries


def supported_claim_bullets(claim_verdicts: Sequence[tuple[Claim, Verdict]]) -> list[EvidenceBullet]:
    """Keep exactly the claims whose verdict is SUPPORTS, in claim order."""
    return [
        EvidenceBullet(
            text=claim.text,
            origin="verified_llm_claim",
            provenance=tuple(p.id for p in verdict.evidence),
        )
        for claim, verdict in claim_verdicts
        if verdict.label == "SUPPORTS"
    ]


@dataclass
class _StageLog:
    outcomes: list[StageOutcome]
    timings: list[tuple[str, float]]


class ChatEngine:
    """Owns one conversation at a time; run_turn appends the completed turn
    to the given state and returns the final reply plus its full trace."""

    system_id = "engine"

    def __init__(
        self,
        cfg: EngineConfig,
        provider: Provider,
        retriever: Retriever,
        model_id: str = "engine-default",
        clock: Callable[[], float] = time.monotonic,
        max_parallel: int = 8,
        on_stage: Callable[[str], None] | None = None,
    ) -> None:
        self.cfg = validate_config(cfg)
        self.provider = provider
        self.retriever = retriever
        self.model_id = model_id
        self.clock = clock
        self.max_parallel = max(1, max_parallel)
        self.on_stage = on_stage
        self.templates: dict[str, Template] = {
            name: load_prompt(name)
            for name in (
                "query-generation",
                "summarization",
                "baseline",
                "claim-splitting",
                "verification",
                "draft-response",
                "refine",
            )
        }

    # -- plumbing ---------------------------------------------------------

    def _complete(self, stage: str, prompt: str) -> str:
        req = CompletionRequest(
            prompt=prompt,
            model_id=self.model_id,
            temperature=self.cfg.temperature,
            max_tokens=STAGE_MAX_TOKENS[stage],
            stop_sequences=STAGE_STOPS[stage],
        )
        try:
            return self.provider.complete(req).text
        except Exception as exc:
            raise StageError(stage, exc) from exc

    def _search(self, stage: str, query: str, time_qualifier, n: int) -> list[Passage]:
        try:
            candidates = self.retriever.search(query, self.cfg.retrieval_overfetch)
        except Exception as exc:
            raise StageError(stage, exc) from exc
        return rerank_temporal(
            candidates,
            time_qualifier,
            n,
            self.cfg.recency_weight,
            self.cfg.recency_timescale_days,
            self.cfg.today,
        )

    def _base_context(self, history: Sequence[DialogueTurn]) -> dict:
        return {
            "current_year": self.cfg.today.year,
            "today": format_day(self.cfg.today),
            "location": self.cfg.location,
            "dlg": dialogue_entries(history),
        }

    # -- the seven stages -------------------------------------------------

    def run_turn(
        self,
        state: ConversationState,
        user_utterance: str,
        on_stage: Callable[[str], None] | None = None,
    ) -> tuple[str, PipelineTrace]:
        state.begin_user_turn(user_utterance)
        try:
            final, trace = self._run_stages(state, user_utterance, on_stage or self.on_stage)
        except Exception:
            state.pending_user_utterance = None
            raise
        state.complete_turn(final, trace)
        return final, trace

    def respond(self, state: ConversationState, user_utterance: str) -> tuple[str, PipelineTrace]:
        return self.run_turn(state, user_utterance)

    def _run_stages(
        self,
        state: ConversationState,
        user_utterance: str,
        on_stage: Callable[[str], None] | None,
    ) -> tuple[str, PipelineTrace]:
        cfg = self.cfg
        history = history_for_prompt(state.turns, cfg.history_window)
        base_ctx = self._base_context(history)
        log = _StageLog(outcomes=[], timings=[])

        def record(outcome: StageOutcome, started: float) -> None:
            log.outcomes.append(outcome)
            log.timings.append((outcome.stage, (self.clock() - started) * 1000.0))
            if on_stage is not None and not outcome.skipped:
                on_stage(outcome.stage)

        # 1. query generation over the truncated history
        started = self.clock()
        raw = self._complete(
            "query_generation",
            self.templates["query-generation"].render(
                {**base_ctx, "new_user_utterance": user_utterance}
            ),
        )
        try:
            decision = parsers.parse_search_decision(raw)
            record(StageOutcome("query_generation", raw, True, False), started)
        except ParseError:
            decision = SearchDecision(needed=False)
            record(StageOutcome("query_generation", raw, False, True), started)

        # 2. retrieval + temporal re-rank
        started = self.clock()
        retrieved: list[Passage] = []
        reranked: list[Passage] = []
        if decision.needed:
            assert decision.intent is not None
            try:
                retrieved = self.retriever.search(decision.intent.query, cfg.retrieval_overfetch)
            except Exception as exc:
                raise StageError("retrieval", exc) from exc
            reranked = rerank_temporal(
                retrieved,
                decision.intent.time,
                cfg.n_ir,
                cfg.recency_weight,
                cfg.recency_timescale_days,
                cfg.today,
            )
            record(StageOutcome("retrieval", None, True, False), started)
        else:
            record(StageOutcome("retrieval", None, True, False, skipped=True), started)

        # 3. per-passage summarization into evidence bullets
        started = self.clock()
        summary_bullets: list[EvidenceBullet] = []
        if decision.needed:
            assert decision.intent is not None
            query = decision.intent.query

            def summarize(passage: Passage) -> tuple[str, list[EvidenceBullet]]:
                completion = self._complete(
                    "summarization",
                    self.templates["summarization"].render(
                        {
                            "today": base_ctx["today"],
                            "query": query,
                            "title": passage.title,
                            "article": passage.body,
                        }
                    ),
                )
                bullets = [
                    EvidenceBullet(text=b, origin="retrieval_summary", provenance=(passage.id,))
                    for b in parsers.parse_summary_bullets(completion)
                ]
                return completion, bullets

            raws = []
            for completion, bullets in self._map_in_order(summarize, reranked):
                raws.append(completion)
                summary_bullets.extend(bullets)
            record(StageOutcome("summarization", "\n-----\n".join(raws) or None, True, False), started)
        else:
            record(StageOutcome("summarization", None, True, False, skipped=True), started)

        # 4. unguarded LLM response over the history alone
        started = self.clock()
        llm_response = self._complete(
            "generation",
            self.templates["baseline"].render({**base_ctx, "new_user_utterance": user_utterance}),
        ).strip()
        record(StageOutcome("generation", llm_response, True, False), started)

        # 5. claim splitting
        started = self.clock()
        raw = self._complete(
            "claim_splitting",
            self.templates["claim-splitting"].render(
                {
                    **base_ctx,
                    "new_user_utterance": user_utterance,
                    "current_agent_utterance": llm_response,
                }
            ),
        )
        claims, skipped_lines = parsers.parse_claims(raw, source_turn=len(state.turns))
        record(StageOutcome("claim_splitting", raw, skipped_lines == 0, skipped_lines > 0), started)

        # 6. per-claim evidence retrieval + verification
        started = self.clock()

        def verify(claim: Claim) -> tuple[str | None, Verdict, bool]:
            evidence = self._search("verification", claim.text, claim.time, cfg.n_evidence)
            completion = self._complete(
                "verification",
                self.templates["verification"].render(
                    {
                        **base_ctx,
                        "last_user_utterance": user_utterance,
                        "original_reply": llm_response,
                        "claim": claim.text,
                        "evidence": [{"title": p.title, "text": p.body} for p in evidence],
                    }
                ),
            )
            try:
                parsed = parsers.parse_verdict(completion)
                return completion, Verdict(parsed.label, parsed.reasoning, tuple(evidence)), False
            except ParseError:
                return completion, Verdict("NOT_ENOUGH_INFO", "", tuple(evidence)), True

        claim_verdicts: list[tuple[Claim, Verdict]] = []
        verify_raws: list[str] = []
        any_fallback = False
        for claim, (completion, verdict, fell_back) in zip(claims, self._map_in_order(verify, claims)):
            claim_verdicts.append((claim, verdict))
            if completion:
                verify_raws.append(completion)
            any_fallback = any_fallback or fell_back
        record(
            StageOutcome(
                "verification",
                "\n-----\n".join(verify_raws) or None,
                not any_fallback,
                any_fallback,
            ),
            started,
        )

        bullets_final = summary_bullets + supported_claim_bullets(claim_verdicts)

        # 7. draft from history + bullets, then feedback and refine
        started = self.clock()
        draft = self._complete(
            "refinement",
            self.templates["draft-response"].render(
                {
                    **base_ctx,
                    "last_user_utterance": user_utterance,
                    "evidence": [b.text for b in bullets_final],
                }
            ),
        ).strip()
        if not draft:
            draft = llm_response or FALLBACK_REPLY
        raw = self._complete(
            "refinement",
            self.templates["refine"].render(
                {**base_ctx, "new_user_utterance": user_utterance, "draft": draft}
            ),
        )
        feedback: FeedbackScores | None = None
        try:
            feedback, final = parsers.parse_refinement(raw)
            record(StageOutcome("refinement", raw, True, False), started)
        except ParseError:
            final = draft
            record(StageOutcome("refinement", raw, False, True), started)

        trace = PipelineTrace(
            search_decision=decision.intent,
            retrieved=tuple(retrieved),
            reranked=tuple(reranked),
            summary_bullets=tuple(summary_bullets),
            llm_response=llm_response,
            claims=tuple(claim_verdicts),
            bullets_final=tuple(bullets_final),
            draft=draft,
            feedback=feedback,
            final=final,
            timings=tuple(log.timings),
            stages=tuple(log.outcomes),
        )
        return final, trace

    def _map_in_order(self, fn, items):
        """Run fn over items concurrently, yielding results in input order."""
        items = list(items)
        if len(items) <= 1 or self.max_parallel == 1:
            for item in items:
                yield fn(item)
            return
        with ThreadPoolExecutor(max_workers=min(self.max_parallel, len(items))) as pool:
            futures = [pool.submit(fn, item) for item in items]
            for future in futures:
                yield future.result()


class BaselineResponder:
    """Single-prompt chatbot with no retrieval or fact-checking; the
    comparison system for the evaluation harness. Produces no trace."""

    system_id = "baseline"

    def __init__(
        self,
        cfg: EngineConfig,
        provider: Provider,
        model_id: str = "baseline-default",
    ) -> None:
        self.cfg = validate_config(cfg)
        self.provider = provider
        self.model_id = model_id
        self.template = load_prompt("baseline")

    def respond(self, state: ConversationState, user_utterance: str) -> tuple[str, None]:
        state.begin_user_turn(user_utterance)
        prompt = self.template.render(
            {
                "current_year": self.cfg.today.year,
                "today": format_day(self.cfg.today),
                "dlg": dialogue_entries(history_for_prompt(state.turns, self.cfg.history_window)),
                "new_user_utterance": user_utterance,
            }
        )
        req = CompletionRequest(
            prompt=prompt,
            model_id=self.model_id,
            temperature=self.cfg.temperature,
            max_tokens=STAGE_MAX_TOKENS["generation"],
            stop_sequences=STAGE_STOPS["generation"],
        )
        try:
            text = self.provider.complete(req).text.strip() or FALLBACK_REPLY
        except Exception:
            state.pending_user_utterance = None
            raise
        state.complete_turn(text, None)
        return text, None

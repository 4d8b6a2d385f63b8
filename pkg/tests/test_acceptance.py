"""Acceptance suite: one test per acceptance criterion, each printing a
PASS line with its runtime (run with ``pytest tests/test_acceptance.py -s``
to see them). Tolerances and time bounds are pinned here.
"""

import json
import random
import threading
import time
from importlib import resources

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from factchat.cli import main as cli_main
from factchat.harness import (
    ClaimExtractor,
    Judge,
    UserSimulator,
    bleu,
    build_report,
    majority_label,
    run_benchmark,
    write_report,
)
from factchat.llm import RecordingProvider, ReplayProvider, ScriptedProvider
from factchat.mockllm import mock_completion
from factchat.model import (
    ConversationState,
    EngineConfig,
    Passage,
    PassageDate,
    STAGES,
    serialize_trace,
    validate_trace,
)
from factchat.parsers import (
    ParseError,
    parse_claims,
    parse_refinement,
    parse_search_decision,
    parse_summary_bullets,
    parse_verdict,
)
from factchat.pipeline import ChatEngine
from factchat.retrieval import Article, chunk_article, rerank_temporal
from factchat.server import create_app
from factchat.templating import PROMPT_NAMES, load_prompt, parse_template, render
from factchat.wiki import TopicSpec, load_topic_file

from conftest import DATA_DIR, TODAY, counter_clock
from oracles import bleu_oracle, majority_oracle, rerank_oracle
from test_harness import SMOKE_TOPICS
from test_parsers import MAUNA_LOA_CHAIN, REFINE_COMPLETION


class Timer:
    def __init__(self, name: str, budget_s: float):
        self.name = name
        self.budget_s = budget_s

    def __enter__(self):
        self.started = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.started
        if exc_type is None:
            assert elapsed < self.budget_s, (
                f"{self.name} took {elapsed:.2f}s, budget {self.budget_s}s"
            )
            print(f"PASS {self.name} ({elapsed:.2f}s < {self.budget_s}s)")
        else:
            print(f"FAIL {self.name} ({elapsed:.2f}s)")
        return False


def test_template_conformance():
    with Timer("template-conformance", 1.0):
        for name in PROMPT_NAMES:
            load_prompt(name)
        goldens = json.loads((DATA_DIR / "template_goldens.json").read_text("utf-8"))
        assert len(goldens) >= 30
        for golden in goldens:
            assert render(parse_template(golden["source"]), golden["context"]) == golden["output"]


def test_parser_fixtures():
    with Timer("parser-fixtures", 1.0):
        # search decisions
        d = parse_search_decision(
            ' Yes. You Google "how did Lebron James do in his most recent game". '
            'The year of the results is "recent".]'
        )
        assert d.needed and d.intent.time == "recent"
        assert d.intent.query == "how did Lebron James do in his most recent game"
        assert parse_search_decision(" No.]").needed is False
        with pytest.raises(ParseError):
            parse_search_decision(' Yes. You Google "x". The year of the results is "202X".]')

        # summary bullet lists
        assert parse_summary_bullets("None") == []
        assert parse_summary_bullets("- A\n- B") == ["A", "B"]
        assert parse_summary_bullets("- first\n\n- second") == ["first", "second"]

        # claim lines
        claims, skipped = parse_claims(
            '- Queen Elizabeth II was born in 1926. The year of the results is "1926".'
        )
        assert skipped == 0 and claims[0].time == 1926
        assert claims[0].text == "Queen Elizabeth II was born in 1926."
        assert parse_claims("")[0] == []

        # verdict chains
        verdict = parse_verdict(MAUNA_LOA_CHAIN)
        assert verdict.label == "REFUTES"
        assert parse_verdict('"SUPPORTS"').label == "SUPPORTS"
        with pytest.raises(ParseError):
            parse_verdict("no label anywhere")

        # feedback blocks
        scores, refined = parse_refinement(REFINE_COMPLETION)
        assert (scores.relevant, scores.conversational,
                scores.non_repetitive, scores.temporally_correct) == (100, 60, 30, 50)
        assert refined.startswith("Critics loved the character development")
        with pytest.raises(ParseError):
            parse_refinement("* Relevant: no marker here 90/100")
        clamped, _ = parse_refinement(
            "* Relevant: over 120/100\n* Conversational: c 90/100\n"
            "* Non-Repetitive: n 90/100\n* Temporally Correct: t 90/100\n"
            "New Response after applying this feedback: ok"
        )
        assert clamped.relevant == 100


def test_chunker_on_1000_randomized_articles():
    rng = random.Random(2023)
    with Timer("chunker-1000-articles", 5.0):
        for i in range(1000):
            title = " ".join(f"t{j}" for j in range(rng.randint(1, 15)))
            body = " ".join(f"w{j}" for j in range(rng.randint(0, 600)))
            passages = chunk_article(Article(title, body), 120)
            assert " ".join(p.body for p in passages).split() == body.split()
            for p in passages:
                assert p.word_count() <= 120


def test_temporal_reranker_vs_oracle_200_sets():
    rng = random.Random(7)
    day_pool = [None, "2023-04-20", "2023-01-15", "2022-11-27", "2018", "1984-03-25", "1950-06-01"]
    with Timer("temporal-reranker-oracle", 2.0):
        for trial in range(200):
            size = rng.randint(0, 14)
            candidates = []
            for i in range(size):
                d = rng.choice(day_pool)
                score = rng.choice([1.0, 2.5, 2.5, 4.0, rng.uniform(0, 10)])  # force ties
                candidates.append(
                    Passage(id=f"c{i}", title=f"T{i}", body="b", score=score, rank=i + 1,
                            date=PassageDate.parse(d) if d else None)
                )
            n = rng.randint(1, 6)
            lam = rng.choice([0.0, 0.3, 0.7, 1.0])
            tau = rng.choice([30.0, 365.0])
            for mode in ("none", "recent", rng.choice([1984, 2018, 2023])):
                expected = rerank_oracle(candidates, mode, n, lam, tau, TODAY)
                actual = rerank_temporal(candidates, mode, n, lam, tau, TODAY)
                assert actual == expected, f"trial {trial} mode {mode}"
            assert rerank_temporal(candidates, "none", 3, lam, tau, TODAY) == candidates[:3]


SEARCH_UTTERANCE = "Tell me about the harbor lighthouse history"


def test_pipeline_constants(corpus_index):
    with Timer("pipeline-constants", 10.0):
        provider = ScriptedProvider(mock_completion)
        engine = ChatEngine(EngineConfig(today=TODAY), provider, corpus_index, clock=counter_clock())
        state = ConversationState()
        utterances = [
            SEARCH_UTTERANCE,
            "what happened to the lighthouse in 1984?",
            "anything new about the harbor lighthouse recently?",
            "thanks!",
            "tell me about the mount vesta eruption",
            "and the comet quill discovery?",
        ]
        exactly_three = 0
        for utterance in utterances:
            _, trace = engine.run_turn(state, utterance)
            validate_trace(trace, n_ir=3, n_evidence=2)
            if trace.search_decision is not None:
                assert len(trace.reranked) == min(3, len(trace.retrieved))
                exactly_three += len(trace.reranked) == 3
            for _, verdict in trace.claims:
                assert len(verdict.evidence) <= 2
            supported = sorted(c.text for c, v in trace.claims if v.label == "SUPPORTS")
            bullets = sorted(b.text for b in trace.bullets_final if b.origin == "verified_llm_claim")
            assert supported == bullets
        assert exactly_three >= 3, "corpus should exercise the full n_ir=3 case"

        # rendered prompts contain at most history_window prior turns
        def prior_turns(prompt: str) -> int:
            live = prompt.rsplit("=====", 1)[-1]
            return sum(1 for ln in live.splitlines() if ln.startswith("User: ")) - 1

        dialogue_prompts = [
            r.prompt for r in provider.calls
            if r.prompt.endswith("[Search needed?") or
            (r.prompt.rstrip().endswith("Chatbot:") and "Extract verbatim" not in r.prompt)
        ]
        assert dialogue_prompts
        assert all(0 <= prior_turns(p) <= 3 for p in dialogue_prompts)


def test_end_to_end_determinism(tmp_path, corpus_index):
    utterances = [
        "hi!",
        SEARCH_UTTERANCE,
        "what happened in 1984?",
        "anything new recently?",
        "thanks, this was great",
    ]
    with Timer("end-to-end-determinism", 10.0):
        cassette = tmp_path / "conversation.jsonl"
        recorder = RecordingProvider(ScriptedProvider(mock_completion), str(cassette))
        engine = ChatEngine(EngineConfig(today=TODAY), recorder, corpus_index, clock=counter_clock())
        state = ConversationState()
        for utterance in utterances:
            engine.run_turn(state, utterance)
        assert len(state.turns) == 5

        runs = []
        for _ in range(3):
            replay_engine = ChatEngine(
                EngineConfig(today=TODAY), ReplayProvider.from_file(str(cassette)),
                corpus_index, clock=counter_clock(),
            )
            replay_state = ConversationState()
            outputs = [replay_engine.run_turn(replay_state, u) for u in utterances]
            runs.append(
                ([f for f, _ in outputs], [serialize_trace(t) for _, t in outputs])
            )
        assert runs[0] == runs[1] == runs[2]


def _benchmark_stack(system_provider, sim_provider, judge_provider, corpus_index):
    cfg = EngineConfig(today=TODAY)
    engine = ChatEngine(cfg, system_provider, corpus_index, clock=counter_clock())
    simulator = UserSimulator(cfg, sim_provider)
    judge = Judge(cfg, judge_provider)
    extractor = ClaimExtractor(cfg, judge_provider)
    return engine, simulator, judge, extractor


def test_benchmark_shape_and_determinism(tmp_path, corpus_index):
    with Timer("benchmark-smoke", 30.0):
        tapes = {name: tmp_path / f"{name}.jsonl" for name in ("system", "sim", "judge")}
        engine, simulator, judge, extractor = _benchmark_stack(
            RecordingProvider(ScriptedProvider(mock_completion), str(tapes["system"])),
            RecordingProvider(ScriptedProvider(mock_completion), str(tapes["sim"])),
            RecordingProvider(ScriptedProvider(mock_completion), str(tapes["judge"])),
            corpus_index,
        )
        recorded = run_benchmark(SMOKE_TOPICS, engine, simulator)
        build_report(recorded.dialogues, judge=judge, extractor=extractor)

        reports = []
        for _ in range(2):
            engine, simulator, judge, extractor = _benchmark_stack(
                ReplayProvider.from_file(str(tapes["system"])),
                ReplayProvider.from_file(str(tapes["sim"])),
                ReplayProvider.from_file(str(tapes["judge"])),
                corpus_index,
            )
            run = run_benchmark(SMOKE_TOPICS, engine, simulator)
            assert len(run.dialogues) == 3 and not run.failures
            for dialogue in run.dialogues:
                assert len(dialogue.turns) == 5  # 10 utterances: 5 user + 5 agent
                assert dialogue.turns[0].user_utterance.strip()  # user speaks first
                for turn in dialogue.turns:
                    assert turn.user_utterance.strip() and turn.agent_utterance.strip()
            report = build_report(run.dialogues, judge=judge, extractor=extractor)
            cell = report["systems"]["engine"]["all"]
            assert cell["claims_per_turn"] is not None
            assert cell["pct_verified_model_estimated"] is not None
            assert cell["bleu_draft_final"] is not None
            assert all(
                cell["judge"][f] is not None
                for f in ("relevant", "informational", "natural", "non_repetitive", "temporally_correct")
            )
            out = tmp_path / f"run{len(reports)}"
            write_report(report, out, figures=False)
            reports.append((out / "report.json").read_bytes() + (out / "report.csv").read_bytes())
        assert reports[0] == reports[1]


def test_full_60_topic_mock_run(tmp_path, corpus_index):
    with Timer("benchmark-60-topics", 300.0):
        text = resources.files("factchat").joinpath("assets/topics/benchmark-60.tsv").read_text("utf-8")
        topics_path = tmp_path / "benchmark-60.tsv"
        topics_path.write_text(text, encoding="utf-8")
        topics = load_topic_file(topics_path)
        by_class = {}
        for t in topics:
            by_class[t.topic_class] = by_class.get(t.topic_class, 0) + 1
        assert by_class == {"head": 20, "tail": 20, "recent": 20}

        engine, simulator, judge, extractor = _benchmark_stack(
            ScriptedProvider(mock_completion), ScriptedProvider(mock_completion),
            ScriptedProvider(mock_completion), corpus_index,
        )
        run = run_benchmark(topics, engine, simulator, log_dir=tmp_path / "logs")
        assert len(run.dialogues) == 60 and not run.failures
        report = build_report(run.dialogues, judge=judge, extractor=extractor)
        assert report["systems"]["engine"]["all"]["dialogues"] == 60
        for cls in ("head", "tail", "recent"):
            assert report["systems"]["engine"][cls]["dialogues"] == 20


def test_metrics_oracles():
    with Timer("metrics-oracles", 5.0):
        words = ["the", "cat", "sat", "volcano", "erupted", "lava", "in", "2022", ",", "!"]
        rng = random.Random(99)
        assert bleu("same sentence here", "same sentence here") == pytest.approx(1.0, abs=1e-12)
        assert bleu("alpha beta", "gamma delta") == 0.0
        for _ in range(50):
            pred = " ".join(rng.choices(words, k=rng.randint(1, 14)))
            ref = " ".join(rng.choices(words, k=rng.randint(1, 14)))
            assert bleu(pred, ref) == pytest.approx(bleu_oracle(pred, ref), abs=1e-6)

        from factchat.harness.annotations import FactualityLedger

        ledger = FactualityLedger()
        for i, label in enumerate(["supported", "supported", "supported", "refuted"]):
            ledger.add(f"t{i}", "engine", "head", label)
        assert ledger.factual_accuracy()[("engine", "head")] == pytest.approx(0.75)
        assert ("engine", "tail") not in ledger.factual_accuracy()

        counts = [2, 3, 4]
        assert sum(counts) / len(counts) == pytest.approx(3.0)

        labels = ["supported", "refuted", "not_enough_info"]
        for a in labels:
            for b in labels:
                for c in labels:
                    assert majority_label([a, b, c]) == majority_oracle([a, b, c])
        assert majority_label(labels) == "not_enough_info"


def _parse_sse(raw: str):
    events = []
    for block in raw.split("\n\n"):
        name, data = None, []
        for line in block.splitlines():
            if line.startswith("event: "):
                name = line[7:]
            elif line.startswith("data: "):
                data.append(line[6:])
        if name:
            events.append((name, "\n".join(data)))
    return events


def test_server_contract(corpus_index):
    with Timer("server-contract", 20.0):
        def slow_first(prompt):
            if "first message" in prompt:
                time.sleep(0.1)
            return mock_completion(prompt)

        engine = ChatEngine(EngineConfig(today=TODAY), ScriptedProvider(slow_first),
                            corpus_index, clock=counter_clock())
        client = TestClient(create_app(engine))

        # create / post / get round trip
        sid = client.post("/sessions").json()["session_id"]
        posted = client.post(f"/sessions/{sid}/messages", json={"utterance": "hi there"}).json()
        assert posted["turn_index"] == 0
        fetched = client.get(f"/sessions/{sid}/trace/0").json()
        assert fetched == posted["trace"]

        # two-writer race: indices gapless, ordered by submission
        rid = client.post("/sessions").json()["session_id"]
        results = {}

        def post(name, text):
            results[name] = client.post(f"/sessions/{rid}/messages", json={"utterance": text}).json()

        t1 = threading.Thread(target=post, args=("first", "hello this is the first message"))
        t2 = threading.Thread(target=post, args=("second", "hello this is the second message"))
        t1.start(); time.sleep(0.03); t2.start()
        t1.join(); t2.join()
        assert results["first"]["turn_index"] == 0
        assert results["second"]["turn_index"] == 1

        # SSE: 7 stage events then final on a full-search turn
        ssid = client.post("/sessions").json()["session_id"]
        with client.stream("POST", f"/sessions/{ssid}/messages/stream",
                           json={"utterance": SEARCH_UTTERANCE}) as response:
            events = _parse_sse("".join(response.iter_text()))
        stages = [payload for name, payload in events if name == "stage"]
        assert stages == list(STAGES)
        assert any(name == "final" for name, _ in events)

        # chitchat: fewer events, trace carries the skip markers
        with client.stream("POST", f"/sessions/{ssid}/messages/stream",
                           json={"utterance": "thanks!"}) as response:
            events = _parse_sse("".join(response.iter_text()))
        stages = [payload for name, payload in events if name == "stage"]
        assert len(stages) == 5
        trace = client.get(f"/sessions/{ssid}/trace/1").json()
        skipped = [s["stage"] for s in trace["stages"] if s["skipped"]]
        assert skipped == ["retrieval", "summarization"]

"""Analysis metrics: BLEU between draft and refined responses, factual
accuracy over labeled claims, and claims-per-turn via a claim extractor
running the claim-splitting stage with its own (judge-grade) provider.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Sequence

from ..llm import CompletionRequest, Provider
from ..model import Claim, DialogueTurn, EngineConfig, history_for_prompt
from ..parsers import parse_claims
from ..pipeline import STAGE_MAX_TOKENS, STAGE_STOPS, dialogue_entries, format_day
from ..templating import load_prompt

_BLEU_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
BLEU_MAX_ORDER = 4


def bleu_tokenize(text: str) -> list[str]:
    """Lowercase and split punctuation into separate tokens."""
    return _BLEU_TOKEN_RE.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(prediction: str, reference: str) -> float:
    """Sentence BLEU-4 with uniform weights, brevity penalty, and add-one
    smoothing on the n>1 precisions. Empty tokenization scores 0."""
    pred = bleu_tokenize(prediction)
    ref = bleu_tokenize(reference)
    if not pred or not ref:
        return 0.0

    log_sum = 0.0
    for n in range(1, BLEU_MAX_ORDER + 1):
        pred_ngrams = _ngrams(pred, n)
        ref_ngrams = _ngrams(ref, n)
        matched = sum(min(count, ref_ngrams[gram]) for gram, count in pred_ngrams.items())
        total = max(0, len(pred) - n + 1)
        if n == 1:
            if matched == 0:
                return 0.0
            precision = matched / total
        else:
            precision = (matched + 1) / (total + 1)
        log_sum += math.log(precision)

    geo_mean = math.exp(log_sum / BLEU_MAX_ORDER)
    c, r = len(pred), len(ref)
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * geo_mean


def mean(values: Sequence[float]) -> float | None:
    values = list(values)
    if not values:
        return None
    return sum(values) / len(values)


class ClaimExtractor:
    """Claim-splitting stage wired to a standalone provider, for counting
    claims in any system's responses (traced or not)."""

    def __init__(self, cfg: EngineConfig, provider: Provider, model_id: str = "judge-default") -> None:
        self.cfg = cfg
        self.provider = provider
        self.model_id = model_id
        self.template = load_prompt("claim-splitting")

    def extract(self, history: Sequence[DialogueTurn], user_utterance: str, response: str) -> list[Claim]:
        prompt = self.template.render(
            {
                "today": format_day(self.cfg.today),
                "dlg": dialogue_entries(history_for_prompt(history, self.cfg.history_window)),
                "new_user_utterance": user_utterance,
                "current_agent_utterance": response,
            }
        )
        req = CompletionRequest(
            prompt=prompt,
            model_id=self.model_id,
            temperature=self.cfg.temperature,
            max_tokens=STAGE_MAX_TOKENS["claim_splitting"],
            stop_sequences=STAGE_STOPS["claim_splitting"],
        )
        claims, _ = parse_claims(self.provider.complete(req).text)
        return claims

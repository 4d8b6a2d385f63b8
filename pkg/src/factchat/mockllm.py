"""Deterministic stand-in for a live completion model.

``mock_completion`` recognizes which stage prompt it was handed (by the
format markers each prompt ends with) and produces well-formed output for
that stage, derived only from the prompt text. It exists so the whole
pipeline, the benchmark, and the CLI can run offline and reproducibly; wrap
it in a ScriptedProvider, or record it into a cassette and replay.
"""

from __future__ import annotations

import hashlib
import re

_GREETING_WORDS = {
    "hi", "hello", "hey", "thanks", "thank", "bye", "goodbye", "ok", "okay",
    "cool", "nice", "great", "wow", "haha", "lol", "yes", "no", "sure",
}
_RECENT_WORDS = {"latest", "recent", "recently", "today", "now", "current", "currently", "new", "lately"}
_YEAR_RE = re.compile(r"\b(1[0-9]{3}|20[0-9]{2})\b")
_STOPWORDS = {
    "the", "a", "an", "is", "are", "was", "were", "do", "does", "did", "have",
    "has", "had", "what", "who", "when", "where", "why", "how", "about",
    "tell", "me", "you", "i", "it", "its", "of", "in", "on", "for", "to",
    "and", "or", "that", "this", "know", "like", "would", "can", "could",
}

_FOLLOW_UPS = (
    "What do you find most interesting about it?",
    "Has anything new happened with it recently?",
    "How did it all get started?",
    "Who are the key people involved?",
)


def _digest(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:4], "big")


def _last_tagged_line(prompt: str, tag: str) -> str:
    # only look at the live block after the last few-shot separator
    live = prompt.rsplit("=====", 1)[-1]
    lines = [ln[len(tag):].strip() for ln in live.splitlines() if ln.startswith(tag)]
    return lines[-1] if lines else ""


def _content_words(text: str) -> list[str]:
    return [w for w in re.findall(r"\w+", text.lower()) if w not in _STOPWORDS and len(w) > 2]


def _is_smalltalk(utterance: str) -> bool:
    words = re.findall(r"\w+", utterance.lower())
    if not words:
        return True
    if words[0] in _GREETING_WORDS and len(words) <= 6:
        return True
    return not _content_words(utterance)


def _time_token(text: str) -> str:
    m = _YEAR_RE.search(text)
    if m:
        return m.group(1)
    if set(re.findall(r"\w+", text.lower())) & _RECENT_WORDS:
        return "recent"
    return "none"


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in re.split(r"(?<=[.!?])\s+", text.strip()) if s.strip()]


def mock_completion(prompt: str) -> str:
    if prompt.endswith("[Search needed?"):
        return _query_generation(prompt)
    if prompt.endswith("To fact-check only your last response, you Google:"):
        return _claim_splitting(prompt)
    if prompt.endswith("[You think step by step:"):
        return _verification(prompt)
    if "Extract verbatim part(s)" in prompt:
        return _summarization(prompt)
    if prompt.endswith("Let's break down the feedback for the response:"):
        if "* Informational:" in prompt:
            return _judge(prompt)
        return _refine(prompt)
    if prompt.rstrip().endswith("You:"):
        return _simulator(prompt)
    if prompt.rstrip().endswith("Chatbot:"):
        if "[Chatbot searches and gets this information:" in prompt.rsplit("=====", 1)[-1]:
            return _draft_with_evidence(prompt)
        if "searches and gets this information" in prompt:
            return _draft_without_evidence(prompt)
        return _baseline(prompt)
    raise ValueError(f"mock cannot classify prompt ending {prompt[-60:]!r}")


def _query_generation(prompt: str) -> str:
    utterance = _last_tagged_line(prompt, "User: ")
    if _is_smalltalk(utterance):
        return " No.]"
    query = " ".join(_content_words(utterance)[:6]) or "general knowledge"
    return f' Yes. You Google "{query}". The year of the results is "{_time_token(utterance)}".]'


def _summarization(prompt: str) -> str:
    m = re.search(r'Query: "([^"]*)"\nTitle: (.*)\nArticle: (.*)\n\nExtract', prompt[prompt.rfind("====="):], re.DOTALL)
    if not m:
        return "None"
    query, title, article = m.group(1), m.group(2), m.group(3)
    overlap = set(_content_words(query)) & set(_content_words(title + " " + article))
    if not overlap:
        return "None"
    bullets = [f"- {s}" for s in _sentences(article)[:2]]
    return "\n".join(bullets) if bullets else "None"


def _baseline(prompt: str) -> str:
    utterance = _last_tagged_line(prompt, "User: ")
    if _is_smalltalk(utterance):
        return " Hi! What would you like to chat about today?"
    words = _content_words(utterance)
    subject = " ".join(words[:3]) or "that"
    year = _YEAR_RE.search(utterance)
    opener = f" The story of {subject} is a fascinating one."
    fact = f" The {subject} attracted worldwide attention in {year.group(1)}." if year else (
        f" Many consider the {subject} to be among the most notable of its kind."
    )
    return opener + fact


def _claim_splitting(prompt: str) -> str:
    reply = _last_tagged_line(prompt, "You: ")
    lines = []
    for sentence in _sentences(reply):
        words = re.findall(r"\w+", sentence)
        if sentence.endswith("?") or len(words) < 6:
            continue
        if words[0].lower() in _GREETING_WORDS:
            continue
        body = sentence.rstrip(".!") + "."
        lines.append(f'- {body} The year of the results is "{_time_token(sentence)}".')
    return "\n".join(lines)


def _verification(prompt: str) -> str:
    live = prompt[prompt.rfind("====="):]
    m = re.search(r'fact-check the claim "([^"]*)"', live)
    claim = m.group(1) if m else ""
    bodies = re.findall(r"Article: (.*)", live)
    evidence_words = set(_content_words(" ".join(bodies)))
    claim_words = set(_content_words(claim))
    ratio = (len(claim_words & evidence_words) / len(claim_words)) if claim_words else 0.0
    if ratio >= 0.5:
        reasoning = "The articles state the same facts as the claim."
        label = "SUPPORTS"
    elif ratio >= 0.25:
        reasoning = "The articles are related but do not settle the claim either way."
        label = "NOT ENOUGH INFO"
    else:
        reasoning = "The articles describe something different from the claim."
        label = "REFUTES"
    out = f' {reasoning} So the fact-checking result is "{label}".]'
    if label == "REFUTES" and bodies:
        out += f"\nYou rewrite your claim: {_sentences(bodies[0])[0]}"
    return out


def _draft_with_evidence(prompt: str) -> str:
    live = prompt[prompt.rfind("====="):]
    bullets = [ln[2:].strip() for ln in live.splitlines() if ln.startswith("- ")]
    picked = " ".join(bullets[:2])
    return f" Here's what I found: {picked}"


def _draft_without_evidence(prompt: str) -> str:
    utterance = _last_tagged_line(prompt, "User: ")
    if _is_smalltalk(utterance):
        return " Happy to chat! Is there a topic you're curious about?"
    subject = " ".join(_content_words(utterance)[:3]) or "that"
    return f" I couldn't verify anything specific about {subject}, but I'm happy to explore it with you."


def _refine(prompt: str) -> str:
    draft = _last_tagged_line(prompt, "Response: ")
    utterance = _last_tagged_line(prompt, "User: ")
    h = _digest(draft)
    scores = [60 + (h >> shift) % 41 for shift in (0, 5, 10, 15)]
    refined = draft if draft.endswith(("!", "?")) else (draft.rstrip(".") + "!")
    return (
        f"* Relevant: The response addresses the user's message. {scores[0]}/100\n"
        f"* Conversational: The tone fits a casual chat. {scores[1]}/100\n"
        f"* Non-Repetitive: No earlier statement is repeated. {scores[2]}/100\n"
        f"* Temporally Correct: The tense matches when events happened. {scores[3]}/100\n"
        "Now, use this feedback to improve the response. Do not repeat any previous statement in the conversation. Do not introduce new information.\n"
        f"User: {utterance}\n"
        f"New Response after applying this feedback: {refined}"
    )


def _judge(prompt: str) -> str:
    response = _last_tagged_line(prompt, "Response: ")
    h = _digest(response)
    scores = [60 + (h >> shift) % 41 for shift in (0, 4, 8, 12, 16)]
    names = ("Relevant", "Informational", "Natural", "Non-Repetitive", "Temporally Correct")
    notes = (
        "The response speaks to the user's question.",
        "It offers concrete details.",
        "The tone reads naturally.",
        "It does not repeat earlier turns.",
        "Tense usage is consistent with the date.",
    )
    lines = [f"* {n}: {note} {s}/100" for n, note, s in zip(names, notes, scores)]
    return "\n".join(lines)


def _simulator(prompt: str) -> str:
    m = re.search(r"You would like to talk about (.+?)\. You already know", prompt)
    title = m.group(1) if m else "something interesting"
    # anchor turn contributes one "Chatbot:" line; the rest are real turns
    prior_turns = prompt.count("\nChatbot:") - 1
    if prior_turns <= 0:
        return f" I'd love to chat about {title}. Do you know much about it?"
    follow_up = _FOLLOW_UPS[(prior_turns - 1) % len(_FOLLOW_UPS)]
    return f" {follow_up}"

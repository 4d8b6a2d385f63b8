"""Corpus construction and retrieval: article chunking into title-prefixed
passages, an embedded BM25 index as the desk-scale fallback backend, a client
for a remote IR server, and the time-aware re-ranker applied to both.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import httpx

from .model import ModelError, Passage, PassageDate, QueryTime, canonical_json

INDEX_FORMAT = "factchat-corpus/1"

# BM25 constants for the embedded lexical fallback.
BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN_RE = re.compile(r"\w+")
_DATE_LINE_RE = re.compile(r"^date:\s*(.+)$", re.IGNORECASE)
# wiki-style table/infobox markup dropped at ingestion
_TABLE_LINE_RE = re.compile(r"^\s*(\{\||\|\}?|!)")


class RetrievalError(Exception):
    pass


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Article:
    title: str
    body: str
    date: PassageDate | None = None

    def __post_init__(self) -> None:
        if not self.title.strip():
            raise ModelError("article title must be non-empty")


def chunk_article(article: Article, word_limit: int, id_prefix: str | None = None) -> list[Passage]:
    """Split an article body into disjoint passages in document order.

    Greedy fill: every passage except possibly the last takes the maximum
    number of body words such that title words + body words <= word_limit.
    Joining the passage bodies reproduces the article's token sequence.
    """
    title_words = len(article.title.split())
    capacity = word_limit - title_words
    if capacity < 2:
        raise RetrievalError(
            f"word_limit {word_limit} leaves no room for body after {title_words}-word title"
        )
    tokens = article.body.split()
    if not tokens:
        return []
    prefix = id_prefix if id_prefix is not None else slugify(article.title)
    passages = []
    for i, start in enumerate(range(0, len(tokens), capacity)):
        body = " ".join(tokens[start:start + capacity])
        passages.append(
            Passage(
                id=f"{prefix}:{i:04d}",
                title=article.title,
                body=body,
                score=0.0,
                rank=i + 1,
                date=article.date,
            )
        )
    return passages


def slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "untitled"


def load_article_file(path: Path) -> Article:
    """Plain-text article: first line title, optional ``date: YYYY[-MM-DD]``
    second line, remainder body. Table-markup lines are dropped."""
    raw = path.read_text("utf-8")
    lines = raw.splitlines()
    if not lines or not lines[0].strip():
        raise RetrievalError(f"{path}: missing title line")
    title = lines[0].strip()
    body_lines = lines[1:]
    art_date = None
    if body_lines:
        m = _DATE_LINE_RE.match(body_lines[0].strip())
        if m:
            art_date = PassageDate.parse(m.group(1))
            body_lines = body_lines[1:]
    kept = [ln for ln in body_lines if not _TABLE_LINE_RE.match(ln)]
    return Article(title=title, body="\n".join(kept).strip(), date=art_date)


def load_articles_dir(input_dir: str | Path) -> list[Article]:
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise RetrievalError(f"not a directory: {input_dir}")
    articles = []
    for path in sorted(input_dir.glob("*.txt")):
        articles.append(load_article_file(path))
    return articles


class Retriever(Protocol):
    def search(self, query: str, k: int) -> list[Passage]: ...


@dataclass
class CorpusIndex:
    """Immutable-after-build passage collection with BM25 lexical statistics.

    Statistics are derived from the passages and rebuilt on load. Scores sum
    one contribution per query token occurrence (repeated terms count again).
    """

    passages: list[Passage] = field(default_factory=list)
    _term_counts: list[Counter] = field(default_factory=list, repr=False)
    _doc_freq: Counter = field(default_factory=Counter, repr=False)
    _avg_len: float = field(default=0.0, repr=False)

    def __post_init__(self) -> None:
        seen = set()
        for p in self.passages:
            if p.id in seen:
                raise RetrievalError(f"duplicate passage id {p.id}")
            seen.add(p.id)
        self._rebuild_stats()

    def _rebuild_stats(self) -> None:
        self._term_counts = [Counter(tokenize(f"{p.title} {p.body}")) for p in self.passages]
        self._doc_freq = Counter()
        for counts in self._term_counts:
            self._doc_freq.update(counts.keys())
        lengths = [sum(c.values()) for c in self._term_counts]
        self._avg_len = (sum(lengths) / len(lengths)) if lengths else 0.0

    def __len__(self) -> int:
        return len(self.passages)

    def score(self, query: str, passage_index: int) -> float:
        counts = self._term_counts[passage_index]
        dl = sum(counts.values())
        n = len(self.passages)
        total = 0.0
        for term in tokenize(query):
            tf = counts.get(term, 0)
            if tf == 0:
                continue
            df = self._doc_freq[term]
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            norm = BM25_K1 * (1.0 - BM25_B + BM25_B * dl / self._avg_len)
            total += idf * tf * (BM25_K1 + 1.0) / (tf + norm)
        return total

    def search(self, query: str, k: int) -> list[Passage]:
        """BM25 search; returns up to k passages with nonzero score, ranked
        1..k' in descending score order (ties keep corpus order)."""
        if k < 1:
            raise RetrievalError("k must be >= 1")
        scored = []
        for i in range(len(self.passages)):
            s = self.score(query, i)
            if s > 0.0:
                scored.append((i, s))
        scored.sort(key=lambda t: (-t[1], t[0]))
        results = []
        for rank, (i, s) in enumerate(scored[:k], start=1):
            results.append(dataclasses.replace(self.passages[i], score=s, rank=rank))
        return results

    def save(self, path: str | Path) -> None:
        doc = {"format": INDEX_FORMAT, "passages": [p.to_dict() for p in self.passages]}
        Path(path).write_text(canonical_json(doc) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CorpusIndex":
        doc = json.loads(Path(path).read_text("utf-8"))
        if doc.get("format") != INDEX_FORMAT:
            raise RetrievalError(f"unsupported index format: {doc.get('format')!r}")
        return cls(passages=[Passage.from_dict(p) for p in doc["passages"]])


def build_corpus_index(articles: Iterable[Article], word_limit: int) -> CorpusIndex:
    passages: list[Passage] = []
    used_prefixes: dict[str, int] = {}
    for article in articles:
        prefix = slugify(article.title)
        bump = used_prefixes.get(prefix, 0)
        used_prefixes[prefix] = bump + 1
        if bump:
            prefix = f"{prefix}~{bump}"
        passages.extend(chunk_article(article, word_limit, id_prefix=prefix))
    return CorpusIndex(passages=passages)


class RemoteRetriever:
    """Client for an IR server speaking ``POST {base}/search`` with a
    ``{query, k}`` body and returning ``[{id, title, text, score, date?}]``."""

    def __init__(self, base_url: str, timeout: float = 30.0,
                 transport: httpx.BaseTransport | None = None) -> None:
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def search(self, query: str, k: int) -> list[Passage]:
        try:
            resp = self._client.post(f"{self.base_url}/search", json={"query": query, "k": k})
        except httpx.HTTPError as exc:
            raise RetrievalError(f"IR transport error: {exc}") from exc
        if resp.status_code != 200:
            raise RetrievalError(f"IR server status {resp.status_code}: {resp.text[:200]}")
        payload = resp.json()
        rows = payload["results"] if isinstance(payload, dict) else payload
        results = []
        for rank, row in enumerate(rows[:k], start=1):
            results.append(
                Passage(
                    id=str(row["id"]),
                    title=row["title"],
                    body=row["text"],
                    score=float(row.get("score", 0.0)),
                    rank=rank,
                    date=PassageDate.parse(row["date"]) if row.get("date") else None,
                )
            )
        return results


def recency_score(passage: Passage, today: date, timescale_days: float) -> float:
    """exp(-age_days/τ); undated passages score 0, future dates clamp to age 0."""
    if passage.date is None:
        return 0.0
    age_days = max(0, (today - passage.date.effective()).days)
    return math.exp(-age_days / timescale_days)


def normalized_scores(candidates: Sequence[Passage]) -> list[float]:
    """Min-max normalize retrieval scores over the candidate set; a flat set
    (or singleton) normalizes to all ones."""
    if not candidates:
        return []
    lo = min(p.score for p in candidates)
    hi = max(p.score for p in candidates)
    if hi == lo:
        return [1.0] * len(candidates)
    return [(p.score - lo) / (hi - lo) for p in candidates]


def rerank_temporal(
    candidates: Sequence[Passage],
    time: QueryTime,
    n: int,
    recency_weight: float,
    timescale_days: float,
    today: date,
) -> list[Passage]:
    """Reorder retrieval candidates according to the query's time qualifier
    and return the first n.

    - time "none": candidates unchanged (identity prefix).
    - a specific year: passages dated in that year first, both groups keeping
      original rank order.
    - time "recent": descending combined score
      c = (1-λ)·normalized_score + λ·recency, ties broken by original rank.
    """
    if n < 1:
        raise RetrievalError("n must be >= 1")
    pool = list(candidates)
    if time == "none":
        return pool[:n]
    if isinstance(time, int):
        in_year = [p for p in pool if p.date is not None and p.date.year == time]
        rest = [p for p in pool if not (p.date is not None and p.date.year == time)]
        in_year.sort(key=lambda p: p.rank)
        rest.sort(key=lambda p: p.rank)
        return (in_year + rest)[:n]
    # recent
    norm = normalized_scores(pool)
    combined = [
        (1.0 - recency_weight) * norm[i] + recency_weight * recency_score(p, today, timescale_days)
        for i, p in enumerate(pool)
    ]
    order = sorted(range(len(pool)), key=lambda i: (-combined[i], pool[i].rank))
    return [pool[i] for i in order[:n]]

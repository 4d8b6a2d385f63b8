"""Client for the Wikimedia REST API (configurable base URL) plus the topic
file loader used by the evaluation harness.

Topic files are UTF-8 TSV with columns: title, class, optional lead. When a
row has no inline lead it is resolved through fetch_article_lead.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable
from urllib.parse import quote

import httpx

from .model import TOPIC_CLASSES

RETRYABLE_STATUSES = {429, 500, 502, 503, 504}


class WikiError(Exception):
    pass


class ArticleNotFound(WikiError):
    pass


@dataclass(frozen=True)
class TopicSpec:
    title: str
    first_paragraph: str
    topic_class: str

    def __post_init__(self) -> None:
        if not self.title.strip() or not self.first_paragraph.strip():
            raise WikiError("topic title and lead must be non-empty")
        if self.topic_class not in TOPIC_CLASSES:
            raise WikiError(f"bad topic class {self.topic_class!r}; expected one of {TOPIC_CLASSES}")

    @property
    def topic_id(self) -> str:
        return self.title


@dataclass(frozen=True)
class TopicStats:
    title: str
    total_views: int
    edit_count_window: int

    def __post_init__(self) -> None:
        if self.total_views < 0 or self.edit_count_window < 0:
            raise WikiError("counts must be non-negative")


class WikiClient:
    """Read-only, idempotent fetches with retry and a politeness rate limit.

    Page summaries are served from the wiki's own REST base; the pageview and
    edit metrics live on the central wikimedia.org REST base. Both are
    configurable (tests point them at a fixture server).
    """

    def __init__(
        self,
        base_url: str = "https://en.wikipedia.org/api/rest_v1",
        metrics_base_url: str | None = "https://wikimedia.org/api/rest_v1",
        project: str = "en.wikipedia.org",
        timeout: float = 30.0,
        max_attempts: int = 3,
        rate_limit_per_s: float = 10.0,
        sleep: Callable[[float], None] = time.sleep,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.metrics_base_url = (metrics_base_url or base_url).rstrip("/")
        self.project = project
        self.max_attempts = max_attempts
        self._sleep = sleep
        self._min_interval = 1.0 / rate_limit_per_s if rate_limit_per_s > 0 else 0.0
        self._last_request = 0.0
        self._lock = threading.Lock()
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _get(self, url: str) -> httpx.Response:
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(float(2 ** (attempt - 1)))
            with self._lock:
                wait = self._min_interval - (time.monotonic() - self._last_request)
                if wait > 0:
                    self._sleep(wait)
                self._last_request = time.monotonic()
            try:
                resp = self._client.get(url)
            except httpx.HTTPError as exc:
                last_error = WikiError(f"transport error: {exc}")
                continue
            if resp.status_code in RETRYABLE_STATUSES:
                last_error = WikiError(f"status {resp.status_code} from {url}")
                continue
            return resp
        assert last_error is not None
        raise last_error

    def fetch_article_lead(self, title: str) -> tuple[str, str]:
        """Return (canonical title, first non-empty paragraph of the plain
        text extract)."""
        if not title.strip():
            raise WikiError("title must be non-empty")
        url = f"{self.base_url}/page/summary/{quote(title, safe='')}"
        resp = self._get(url)
        if resp.status_code == 404:
            raise ArticleNotFound(title)
        if resp.status_code != 200:
            raise WikiError(f"status {resp.status_code} fetching {title!r}")
        doc = resp.json()
        extract = doc.get("extract", "")
        for paragraph in extract.split("\n"):
            if paragraph.strip():
                return doc.get("title", title), paragraph.strip()
        raise WikiError(f"article {title!r} has an empty extract")

    def fetch_topic_stats(self, title: str, start: str, end: str) -> TopicStats:
        """Total page views and edit count over [start, end] (YYYYMMDD).

        Returns raw counts; choosing cutoffs for "most viewed" / "most
        edited" is left to the curator.
        """
        escaped = quote(title.replace(" ", "_"), safe="")
        views_url = (
            f"{self.metrics_base_url}/metrics/pageviews/per-article/{self.project}"
            f"/all-access/user/{escaped}/monthly/{start}/{end}"
        )
        edits_url = (
            f"{self.metrics_base_url}/metrics/edits/per-page/{self.project}"
            f"/{escaped}/all-editor-types/monthly/{start}/{end}"
        )
        views_resp = self._get(views_url)
        if views_resp.status_code == 404:
            raise ArticleNotFound(title)
        if views_resp.status_code != 200:
            raise WikiError(f"status {views_resp.status_code} fetching views for {title!r}")
        total_views = sum(int(item.get("views", 0)) for item in views_resp.json().get("items", []))

        edits_resp = self._get(edits_url)
        if edits_resp.status_code != 200:
            raise WikiError(f"status {edits_resp.status_code} fetching edits for {title!r}")
        edits = 0
        for item in edits_resp.json().get("items", []):
            for result in item.get("results", []):
                edits += int(result.get("edits", 0))
        return TopicStats(title=title, total_views=total_views, edit_count_window=edits)


def load_topic_file(
    path: str | Path,
    fetch_lead: Callable[[str], tuple[str, str]] | None = None,
) -> list[TopicSpec]:
    """Parse a TSV topic file; malformed rows report their line number."""
    path = Path(path)
    if not path.exists():
        raise WikiError(f"topic file not found: {path}")
    topics = []
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise WikiError(f"{path}:{lineno}: expected at least title<TAB>class")
        title = parts[0].strip()
        topic_class = parts[1].strip()
        lead = parts[2].strip() if len(parts) > 2 else ""
        if topic_class not in TOPIC_CLASSES:
            raise WikiError(f"{path}:{lineno}: bad topic class {topic_class!r}")
        if not lead:
            if fetch_lead is None:
                raise WikiError(f"{path}:{lineno}: no inline lead and no fetcher configured")
            _, lead = fetch_lead(title)
        try:
            topics.append(TopicSpec(title=title, first_paragraph=lead, topic_class=topic_class))
        except WikiError as exc:
            raise WikiError(f"{path}:{lineno}: {exc}") from exc
    return topics

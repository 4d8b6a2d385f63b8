from urllib.parse import unquote

import httpx
import pytest

from factchat.wiki import ArticleNotFound, TopicSpec, WikiClient, WikiError, load_topic_file

AUSTRALIAN_OPEN_LEAD = (
    "Novak Djokovic defeated Stefanos Tsitsipas in the final to win the men's singles "
    "tennis title at the 2023 Australian Open, claiming his tenth Australian Open title "
    "and a record-equalling 22nd major title overall."
)

FIXTURE_EXTRACTS = {
    "2023 Australian Open – Men's singles": AUSTRALIAN_OPEN_LEAD,
    "Tower of Hercules": "\n\nThe Tower of Hercules is an ancient Roman lighthouse in Spain.",
}


def fixture_handler(request: httpx.Request) -> httpx.Response:
    path = unquote(request.url.path)
    if path.startswith("/api/page/summary/"):
        title = path[len("/api/page/summary/"):]
        if title not in FIXTURE_EXTRACTS:
            return httpx.Response(404, json={"title": "Not found."})
        return httpx.Response(200, json={"title": title, "extract": FIXTURE_EXTRACTS[title]})
    if "/metrics/pageviews/per-article/" in path:
        return httpx.Response(200, json={"items": [{"views": 1200}, {"views": 800}]})
    if "/metrics/edits/per-page/" in path:
        return httpx.Response(200, json={"items": [{"results": [{"edits": 40}, {"edits": 2}]}]})
    return httpx.Response(404)


@pytest.fixture()
def client():
    return WikiClient(
        base_url="http://wiki.test/api",
        transport=httpx.MockTransport(fixture_handler),
        rate_limit_per_s=0,
        sleep=lambda s: None,
    )


class TestFetchLead:
    def test_lead_mentions_tenth_title(self, client):
        title, lead = client.fetch_article_lead("2023 Australian Open – Men's singles")
        assert "tenth Australian Open title" in lead
        assert title == "2023 Australian Open – Men's singles"

    def test_leading_blank_lines_skipped(self, client):
        _, lead = client.fetch_article_lead("Tower of Hercules")
        assert lead.startswith("The Tower of Hercules")

    def test_not_found(self, client):
        with pytest.raises(ArticleNotFound):
            client.fetch_article_lead("No Such Page Anywhere")

    def test_empty_title_rejected(self, client):
        with pytest.raises(WikiError):
            client.fetch_article_lead("  ")

    def test_fetch_idempotent(self, client):
        first = client.fetch_article_lead("Tower of Hercules")
        second = client.fetch_article_lead("Tower of Hercules")
        assert first == second

    def test_transient_errors_retried(self):
        calls = []

        def flaky(request: httpx.Request) -> httpx.Response:
            calls.append(1)
            if len(calls) < 3:
                return httpx.Response(503)
            return fixture_handler(request)

        client = WikiClient(
            base_url="http://wiki.test/api",
            transport=httpx.MockTransport(flaky),
            rate_limit_per_s=0,
            sleep=lambda s: None,
        )
        _, lead = client.fetch_article_lead("Tower of Hercules")
        assert lead
        assert len(calls) == 3


class TestTopicStats:
    def test_counts_summed(self, client):
        stats = client.fetch_topic_stats("Tower of Hercules", "20230101", "20230430")
        assert stats.total_views == 2000
        assert stats.edit_count_window == 42

    def test_counts_nonnegative_enforced(self):
        from factchat.wiki import TopicStats

        with pytest.raises(WikiError):
            TopicStats("T", -1, 0)


class TestTopicSpec:
    def test_class_closed_set(self):
        with pytest.raises(WikiError, match="topic class"):
            TopicSpec("T", "lead", "old")

    def test_fields_non_empty(self):
        with pytest.raises(WikiError):
            TopicSpec("T", "   ", "head")


class TestTopicFile:
    def test_shipped_benchmark_has_20_per_class(self, tmp_path):
        from importlib import resources

        text = resources.files("factchat").joinpath("assets/topics/benchmark-60.tsv").read_text("utf-8")
        path = tmp_path / "benchmark.tsv"
        path.write_text(text, encoding="utf-8")
        topics = load_topic_file(path)
        assert len(topics) == 60
        by_class = {}
        for t in topics:
            by_class[t.topic_class] = by_class.get(t.topic_class, 0) + 1
        assert by_class == {"head": 20, "tail": 20, "recent": 20}

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("")
        assert load_topic_file(path) == []

    def test_bad_class_reports_line_number(self, tmp_path):
        path = tmp_path / "topics.tsv"
        path.write_text("Good Topic\thead\tlead text\nBad Topic\told\tlead text\n")
        with pytest.raises(WikiError, match=r"topics\.tsv:2"):
            load_topic_file(path)

    def test_missing_lead_without_fetcher(self, tmp_path):
        path = tmp_path / "topics.tsv"
        path.write_text("Only Title\thead\n")
        with pytest.raises(WikiError, match="no fetcher"):
            load_topic_file(path)

    def test_missing_lead_resolved_via_fetcher(self, tmp_path, client):
        path = tmp_path / "topics.tsv"
        path.write_text("Tower of Hercules\ttail\n")
        topics = load_topic_file(path, fetch_lead=client.fetch_article_lead)
        assert topics[0].first_paragraph.startswith("The Tower of Hercules")

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "topics.tsv"
        path.write_text("# comment\n\nTopic\thead\tlead\n")
        assert len(load_topic_file(path)) == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(WikiError, match="not found"):
            load_topic_file(tmp_path / "absent.tsv")

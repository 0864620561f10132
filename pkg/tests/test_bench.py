"""Percentile math and the two benchmark drivers."""

import json
import math

import numpy as np
import pytest

from ragscope.bench import (
    InProcessClient,
    LiveClient,
    compare_snippeting,
    format_report,
    load_queries,
    percentile,
    run_latency,
    summarize,
    write_report,
)
from ragscope.errors import RagscopeError, TransportError
from ragscope.pipeline import STAGES


class TestPercentile:
    def test_one_to_hundred(self):
        samples = list(range(1, 101))
        assert percentile(samples, 0.5) == 50
        assert percentile(samples, 0.95) == 95
        assert percentile(samples, 1.0) == 100

    def test_order_independent(self):
        assert percentile([5, 1, 9, 3], 0.5) == 3

    def test_constant_samples(self):
        s = summarize([2.5] * 17)
        assert s["median"] == s["p95"] == 2.5

    def test_single_sample(self):
        assert percentile([7.0], 0.5) == 7.0
        assert percentile([7.0], 0.95) == 7.0

    def test_matches_ceil_rank_oracle(self):
        rng = np.random.default_rng(81)
        for _ in range(50):
            n = int(rng.integers(1, 200))
            samples = rng.random(n).tolist()
            p = float(rng.uniform(0.01, 1.0))
            ordered = sorted(samples)
            want = ordered[math.ceil(p * n) - 1]
            assert percentile(samples, p) == want

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            percentile([], 0.5)

    def test_bad_p_rejected(self):
        for p in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                percentile([1.0], p)


class CannedClient:
    """Replays fixed per-query timings; optionally fails some queries."""

    def __init__(self, timings_by_query, fail=()):
        self.timings = timings_by_query
        self.fail = set(fail)

    def query(self, q):
        if q in self.fail:
            raise TransportError("canned failure")
        return {"timings": self.timings[q]}


def flat_timings(value, total=None):
    t = {s: value for s in STAGES}
    t["single_ann_call"] = value / 2
    if total is not None:
        t["total"] = total
    return t


class TestRunLatency:
    def test_exact_summaries_from_canned_timings(self):
        queries = [f"q{i}" for i in range(10)]
        canned = {q: flat_timings(0.001 * (i + 1)) for i, q in enumerate(queries)}
        report = run_latency(queries, CannedClient(canned))
        assert set(report["stages"]) == set(STAGES)
        embed = report["stages"]["embed"]
        assert embed["median"] == pytest.approx(0.005)
        assert embed["p95"] == pytest.approx(0.010)
        assert report["queries_run"] == 10
        assert report["failures"] == []

    def test_median_le_p95_everywhere(self):
        rng = np.random.default_rng(82)
        queries = [f"q{i}" for i in range(30)]
        canned = {
            q: {**{s: float(v) for s, v in zip(STAGES, rng.random(len(STAGES)))}}
            for q in queries
        }
        report = run_latency(queries, CannedClient(canned))
        for row in list(report["stages"].values()) + [report["other"]]:
            assert row["median"] <= row["p95"]

    def test_other_is_residual(self):
        queries = [f"q{i}" for i in range(10)]
        # total 1.0, six disjoint stages at 0.1 each -> residual 0.4
        t = {s: 0.1 for s in STAGES}
        t["single_ann_call"] = 0.05  # sub-measurement, not part of the sum
        t["total"] = 1.0
        report = run_latency(queries, CannedClient({q: dict(t) for q in queries}))
        assert report["other"]["median"] == pytest.approx(0.4)
        assert report["other"]["p95"] == pytest.approx(0.4)

    def test_other_clamped_at_zero(self):
        queries = [f"q{i}" for i in range(10)]
        t = {s: 0.2 for s in STAGES}
        t["total"] = 0.1  # stage sum exceeds total; residual must not go negative
        report = run_latency(queries, CannedClient({q: dict(t) for q in queries}))
        assert report["other"]["median"] == 0.0

    def test_failures_recorded_but_tolerated(self):
        queries = [f"q{i}" for i in range(10)]
        canned = {q: flat_timings(0.01, total=0.1) for q in queries}
        report = run_latency(queries, CannedClient(canned, fail={"q3", "q7"}))
        assert report["queries_run"] == 8
        assert len(report["failures"]) == 2
        assert "q3" in report["failures"][0]

    def test_too_many_failures_abort(self):
        queries = [f"q{i}" for i in range(10)]
        canned = {q: flat_timings(0.01, total=0.1) for q in queries}
        with pytest.raises(RagscopeError, match="aborting"):
            run_latency(queries, CannedClient(canned, fail={"q1", "q2", "q3"}))

    def test_too_few_queries_rejected(self):
        with pytest.raises(RagscopeError, match="at least 10"):
            run_latency(["a"] * 9, CannedClient({}))


class TestInProcessClient:
    def test_runs_real_pipeline(self, small_stack):
        payload = InProcessClient(small_stack).query("what happens to the ocean")
        assert payload["answer_tokens"]
        assert set(payload["timings"]) == set(STAGES)


class TestLiveClient:
    def test_non_200_raises(self):
        import httpx

        def handler(request):
            return httpx.Response(503, json={"error": "down"})

        http = httpx.Client(
            transport=httpx.MockTransport(handler), base_url="http://x"
        )
        with pytest.raises(TransportError, match="503"):
            LiveClient("http://x", "k", client=http).query("q")

    def test_posts_query_with_key(self):
        import httpx

        seen = {}

        def handler(request):
            seen["path"] = request.url.path
            seen["key"] = request.headers.get("X-API-Key")
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={"timings": {}})

        http = httpx.Client(
            transport=httpx.MockTransport(handler),
            base_url="http://x",
            headers={"X-API-Key": "sekret"},
        )
        LiveClient("http://x", "sekret", client=http).query("hello")
        assert seen == {
            "path": "/api/query",
            "key": "sekret",
            "body": {"query": "hello"},
        }


class TestCompareSnippeting:
    def test_small_stack_report(self, small_stack):
        queries = [
            "what happens to the mountain snow",
            "what happens to the market price",
            "what happens to the river delta",
            "what happens to the desert dune",
            "what happens to the storm front",
        ]
        report = compare_snippeting(queries, small_stack, window=32, stride=16)
        methods = report["methods"]
        assert methods["naive_first"]["pairs"] == methods["sliding_window"]["pairs"] > 0
        assert (
            methods["sliding_window"]["mean_similarity"]
            >= methods["naive_first"]["mean_similarity"]
        )
        assert (
            methods["naive_first"]["median_latency"]
            <= methods["sliding_window"]["median_latency"]
        )

    def test_window_covering_doc_ties_methods(self, small_stack):
        """When stride and window both exceed every document length the
        only candidate is the leading span, so the methods coincide."""
        queries = ["what happens to the forest", "what happens to the city"]
        report = compare_snippeting(queries, small_stack, window=4096, stride=4096)
        m = report["methods"]
        assert m["naive_first"]["mean_similarity"] == pytest.approx(
            m["sliding_window"]["mean_similarity"], abs=1e-9
        )


class TestReportIO:
    def test_latency_report_text(self):
        queries = [f"q{i}" for i in range(10)]
        canned = {q: flat_timings(0.01, total=0.1) for q in queries}
        text = format_report(run_latency(queries, CannedClient(canned)))
        for stage in STAGES:
            assert stage in text
        assert "other" in text
        assert "latency over 10 queries" in text

    def test_snippet_report_text(self, small_stack):
        report = compare_snippeting(
            ["what happens to the ocean wave"], small_stack, window=16, stride=8
        )
        text = format_report(report)
        assert "naive_first" in text and "sliding_window" in text

    def test_write_round_trip(self, tmp_path):
        report = {"kind": "latency", "queries_run": 0, "failures": [], "stages": {}}
        path = tmp_path / "r.json"
        write_report(report, path)
        assert json.loads(path.read_text()) == report


class TestLoadQueries:
    def test_plain_lines(self, tmp_path):
        p = tmp_path / "q.txt"
        p.write_text("first query\n\nsecond query\n", encoding="utf-8")
        assert load_queries(p) == ["first query", "second query"]

    def test_jsonl(self, tmp_path):
        p = tmp_path / "q.jsonl"
        p.write_text(
            '{"query": "alpha"}\n{"query": "beta", "id": 2}\n', encoding="utf-8"
        )
        assert load_queries(p) == ["alpha", "beta"]

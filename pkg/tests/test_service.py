import json
import threading
import urllib.request
from urllib.error import HTTPError
from urllib.parse import quote

import pytest

from swarmsearch.pheromone import Flavor
from swarmsearch.provider import UpstreamResult, write_fixture
from swarmsearch.querylog import read_log, sessionize
from swarmsearch.service import (
    SearchApp,
    ServiceConfig,
    UnknownTokenError,
    make_server,
)

TEN_RESULTS = [UpstreamResult(f"http://result{i}.example", f"Result {i}",
                              f"Snippet for result {i}") for i in range(1, 11)]


def make_app(tmp_path, monkeypatch=None, **overrides):
    fixtures = tmp_path / "fixtures"
    fixtures.mkdir(exist_ok=True)
    write_fixture(fixtures, "ants", TEN_RESULTS)
    settings = dict(
        flavor="naive",
        k=3,
        key_mode="exact",
        provider="fixture",
        provider_dir=str(fixtures),
        log_path=str(tmp_path / "interactions.tsv"),
        seed=42,
    )
    settings.update(overrides)
    return SearchApp(ServiceConfig(**settings))


class FakeClock:
    def __init__(self, start=1_148_000_000.0):
        self.now = start

    def __call__(self):
        return self.now

    def advance(self, seconds):
        self.now += seconds


class TestConfig:
    def test_file_and_env_overrides(self, tmp_path):
        path = tmp_path / "service.cfg"
        path.write_text("flavor=ranking-bias\nk=2\n# comment\ndelta=604800\n",
                        encoding="utf-8")
        cfg = ServiceConfig.load(path, env={"SWARMSEARCH_K": "5"})
        assert cfg.flavor is Flavor.RANKING_BIAS
        assert cfg.k == 5
        assert cfg.delta == 604800.0

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            ServiceConfig.from_mapping({"frobnicate": "1"})

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            ServiceConfig(k=0)
        with pytest.raises(ValueError):
            ServiceConfig(k=11)


class TestSearch:
    def test_unknown_query_is_pure_upstream(self, tmp_path):
        app = make_app(tmp_path)
        payload = app.search("ants", 1, "sess")
        assert [r["url"] for r in payload["results"]] == [r.url for r in TEN_RESULTS]
        app.close()

    def test_single_trailed_doc_injects_exactly_one(self, tmp_path):
        app = make_app(tmp_path)
        app.store.deposit("ants", "http://trail.example", None, 2.0, 0.0)
        payload = app.search("ants", 1, "sess", now=10.0)
        urls = [r["url"] for r in payload["results"]]
        assert urls[0] == "http://trail.example"
        assert len(urls) == 10
        assert urls[1:] == [r.url for r in TEN_RESULTS[:9]]
        app.close()

    def test_injection_moves_known_doc_up_without_duplicating(self, tmp_path):
        app = make_app(tmp_path)
        app.store.deposit("ants", "http://result8.example", None, 2.0, 0.0)
        payload = app.search("ants", 1, "sess", now=10.0)
        urls = [r["url"] for r in payload["results"]]
        assert urls[0] == "http://result8.example"
        assert urls.count("http://result8.example") == 1
        assert len(urls) == 10
        app.close()

    def test_second_page_gets_no_injection(self, tmp_path):
        fixtures = tmp_path / "fixtures"
        app = make_app(tmp_path)
        write_fixture(fixtures, "ants",
                      [UpstreamResult(f"http://r{i}", "t", "s") for i in range(15)])
        app.store.deposit("ants", "http://trail.example", None, 2.0, 0.0)
        payload = app.search("ants", 2, "sess", now=10.0)
        urls = [r["url"] for r in payload["results"]]
        assert "http://trail.example" not in urls
        assert payload["results"][0]["rank"] == 11
        app.close()

    def test_blank_query_rejected(self, tmp_path):
        app = make_app(tmp_path)
        with pytest.raises(ValueError):
            app.search("   ", 1, "sess")
        app.close()

    def test_missing_fixture_degrades_to_recommendations_only(self, tmp_path):
        app = make_app(tmp_path)
        app.store.deposit("bees", "http://hive.example", None, 1.0, 0.0)
        payload = app.search("bees", 1, "sess", now=5.0)
        assert [r["url"] for r in payload["results"]] == ["http://hive.example"]
        log_text = (tmp_path / "interactions.tsv").read_text()
        assert "# upstream-error" in log_text
        app.close()

    def test_recommended_and_organic_payloads_share_schema(self, tmp_path):
        app = make_app(tmp_path)
        app.store.deposit("ants", "http://trail.example", None, 2.0, 0.0)
        payload = app.search("ants", 1, "sess", now=10.0)
        keysets = {tuple(sorted(result)) for result in payload["results"]}
        assert keysets == {("click_token", "rank", "snippet", "title", "url")}
        app.close()

    def test_ranks_continue_across_pages(self, tmp_path):
        fixtures = tmp_path / "fixtures"
        app = make_app(tmp_path)
        write_fixture(fixtures, "ants",
                      [UpstreamResult(f"http://r{i}", "t", "s") for i in range(12)])
        page2 = app.search("ants", 2, "sess")
        assert [r["rank"] for r in page2["results"]] == [11, 12]
        app.close()


class TestClick:
    def test_click_deposits_and_redirects(self, tmp_path):
        app = make_app(tmp_path)
        payload = app.search("ants", 1, "sess", now=100.0)
        token = payload["results"][0]["click_token"]
        destination = app.click(token, now=101.0)
        assert destination == "http://result1.example"
        assert app.store.weight("ants", "http://result1.example") == 1.0
        app.close()

    def test_replayed_token_rejected_and_weight_unchanged(self, tmp_path):
        app = make_app(tmp_path)
        payload = app.search("ants", 1, "sess", now=100.0)
        token = payload["results"][3]["click_token"]
        app.click(token, now=101.0)
        before = app.store.dumps()
        with pytest.raises(UnknownTokenError):
            app.click(token, now=102.0)
        assert app.store.dumps() == before
        log_text = (tmp_path / "interactions.tsv").read_text()
        assert "# rejected-click" in log_text
        app.close()

    def test_ranking_bias_click_at_rank_four(self, tmp_path):
        app = make_app(tmp_path, flavor="ranking_bias")
        payload = app.search("ants", 1, "sess", now=100.0)
        token = payload["results"][3]["click_token"]
        app.click(token, now=101.0)
        assert app.store.weight("ants", "http://result4.example") == pytest.approx(
            1.22, abs=5e-3)
        app.close()

    def test_elaborate_clicks_take_ordinal_positions(self, tmp_path):
        app = make_app(tmp_path, flavor="elaborate")
        payload = app.search("ants", 1, "sess", now=100.0)
        app.click(payload["results"][4]["click_token"], now=101.0)
        app.click(payload["results"][1]["click_token"], now=102.0)
        assert app.store.weight("ants", "http://result5.example", position=1) == 1.0
        assert app.store.weight("ants", "http://result2.example", position=2) == 1.0
        app.close()

    def test_ngram_mode_deposits_every_key(self, tmp_path):
        fixtures = tmp_path / "fixtures"
        app = make_app(tmp_path, key_mode="ngram")
        write_fixture(fixtures, "carpenter ants",
                      [UpstreamResult("http://a", "t", "s")])
        payload = app.search("carpenter ants", 1, "sess", now=10.0)
        app.click(payload["results"][0]["click_token"], now=11.0)
        for key in ("carpenter", "ants", "carpenter ants"):
            assert app.store.weight(key, "http://a") == 1.0
        app.close()

    def test_real_time_adaptation(self, tmp_path):
        # a click makes the document an immediate recommendation candidate
        clock = FakeClock()
        app = make_app(tmp_path)
        app._clock = clock
        payload = app.search("ants", 1, "sess")
        token = payload["results"][7]["click_token"]
        clicked_url = payload["results"][7]["url"]
        app.click(token)
        clock.advance(1.0)
        repeat = app.search("ants", 1, "sess")
        assert repeat["results"][0]["url"] == clicked_url
        app.close()


class TestLogCompleteness:
    def test_every_event_logged_once_and_sessionizable(self, tmp_path):
        clock = FakeClock()
        app = make_app(tmp_path)
        app._clock = clock
        first = app.search("ants", 1, "user-a")
        app.click(first.get("results")[2]["click_token"])
        clock.advance(60.0)
        app.search("ants", 1, "user-a")
        clock.advance(3600.0)
        app.search("ants", 1, "user-a")
        app.close()

        rows = read_log(tmp_path / "interactions.tsv")
        assert len(rows) == 4  # 3 queries + 1 click
        assert sum(1 for r in rows if r.rank > 0) == 1
        sessions = sessionize(rows)
        assert len(sessions) == 2  # one-hour gap splits
        assert app.stats()["queries"] == 3
        assert app.stats()["clicks"] == 1

    def test_extension_columns_present(self, tmp_path):
        app = make_app(tmp_path)
        payload = app.search("ants", 1, "sess", now=100.0)
        app.click(payload["results"][0]["click_token"], now=101.0)
        app.close()
        lines = [l for l in (tmp_path / "interactions.tsv").read_text().splitlines()
                 if not l.startswith("#")]
        query_row = lines[0].split("\t")
        click_row = lines[1].split("\t")
        assert query_row[3] == "0" and query_row[5] == "0"
        assert click_row[3] == "1" and click_row[5] == "0"
        assert click_row[6] == "naive" and click_row[7] == "1"

    def test_recommended_flag_survives_in_log(self, tmp_path):
        app = make_app(tmp_path)
        app.store.deposit("ants", "http://trail.example", None, 2.0, 0.0)
        payload = app.search("ants", 1, "sess", now=10.0)
        app.click(payload["results"][0]["click_token"], now=11.0)
        app.close()
        click_rows = [l.split("\t") for l in
                      (tmp_path / "interactions.tsv").read_text().splitlines()
                      if not l.startswith("#") and l.split("\t")[3] != "0"]
        assert click_rows[0][5] == "1"


@pytest.fixture
def running_server(tmp_path):
    app = make_app(tmp_path)
    server = make_server(app, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield app, base
    server.shutdown()
    server.server_close()
    app.close()


def http_get(url, redirect=True):
    class NoRedirect(urllib.request.HTTPRedirectHandler):
        def redirect_request(self, *args, **kwargs):
            return None

    opener = (urllib.request.build_opener() if redirect
              else urllib.request.build_opener(NoRedirect))
    return opener.open(url, timeout=10)


class TestHttpSurface:
    def test_healthz(self, running_server):
        _, base = running_server
        assert http_get(f"{base}/healthz").read() == b"ok"

    def test_search_schema(self, running_server):
        _, base = running_server
        with http_get(f"{base}/search?q=ants&p=1") as response:
            payload = json.loads(response.read())
        assert payload["query"] == "ants" and payload["page"] == 1
        assert len(payload["results"]) == 10
        first = payload["results"][0]
        assert set(first) == {"rank", "url", "title", "snippet", "click_token"}

    def test_click_redirects_to_destination(self, running_server):
        _, base = running_server
        with http_get(f"{base}/search?q=ants") as response:
            payload = json.loads(response.read())
        token = payload["results"][0]["click_token"]
        try:
            response = http_get(f"{base}/click?t={quote(token)}", redirect=False)
            status, location = response.status, response.headers["Location"]
        except HTTPError as err:  # urllib raises on non-2xx without handler
            status, location = err.code, err.headers["Location"]
        assert status == 302
        assert location == "http://result1.example"

    def test_unknown_token_is_gone(self, running_server):
        _, base = running_server
        with pytest.raises(HTTPError) as err:
            http_get(f"{base}/click?t=forged")
        assert err.value.code == 410

    def test_blank_query_is_bad_request(self, running_server):
        _, base = running_server
        with pytest.raises(HTTPError) as err:
            http_get(f"{base}/search?q=%20")
        assert err.value.code == 400

    def test_stats_counts(self, running_server):
        app, base = running_server
        http_get(f"{base}/search?q=ants").read()
        with http_get(f"{base}/stats") as response:
            stats = json.loads(response.read())
        assert stats["queries"] >= 1
        assert set(stats) == {"queries", "clicks", "trails", "store_bytes"}

    def test_root_serves_fallback_page(self, running_server):
        _, base = running_server
        body = http_get(f"{base}/").read().decode()
        assert "<html>" in body


class TestStaticFrontend:
    def test_serves_configured_bundle(self, tmp_path):
        static = tmp_path / "dist"
        static.mkdir()
        (static / "index.html").write_text("<html><body>bundle</body></html>",
                                           encoding="utf-8")
        (static / "main.js").write_text("console.log('serp');", encoding="utf-8")
        app = make_app(tmp_path, static_dir=str(static))
        server = make_server(app, "127.0.0.1", 0)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{server.server_address[1]}"
        try:
            assert b"bundle" in http_get(f"{base}/").read()
            response = http_get(f"{base}/static/main.js")
            assert response.headers["Content-Type"].startswith("text/javascript")
            assert b"serp" in response.read()
            with pytest.raises(HTTPError) as err:
                http_get(f"{base}/static/../secret")
            assert err.value.code == 404
        finally:
            server.shutdown()
            server.server_close()
            app.close()

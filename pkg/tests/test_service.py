import json
import os
import signal
import socket
import subprocess
import sys
import threading
import time
import urllib.error
import urllib.request

import pytest

from mathfind.cli import main
from mathfind.corpus import generate_corpus
from mathfind.service import make_server


@pytest.fixture(scope="module")
def fixture_index(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    generate_corpus(23, 12, root / "dataset")
    assert main([
        "index", "--dataset", str(root / "dataset"), "--index", str(root / "idx"),
        "--threads", "1",
    ]) == 0
    return root / "idx"


@pytest.fixture
def server(fixture_index):
    srv, state = make_server(str(fixture_index), "127.0.0.1:0")
    thread = threading.Thread(target=srv.serve_forever, kwargs={"poll_interval": 0.05})
    thread.start()
    state.wait_loaded(10)
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    try:
        yield base
    finally:
        srv.shutdown()
        thread.join()
        srv.server_close()
        if state.reader:
            state.reader.close()


def get(url: str):
    try:
        with urllib.request.urlopen(url, timeout=10) as resp:
            return resp.status, json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read().decode("utf-8"))


def get_raw(url: str):
    with urllib.request.urlopen(url, timeout=10) as resp:
        return resp.status, resp.headers, resp.read()


class TestEndpoints:
    def test_healthz(self, server):
        status, body = get(f"{server}/healthz")
        assert status == 200
        assert body == {"status": "ok", "documents": 12}

    def test_search_basic(self, server):
        status, body = get(f"{server}/api/search?q=energy")
        assert status == 200
        assert body["query_echo"] == "energy"
        assert body["total_hits"] >= 1
        assert isinstance(body["took_ms"], float)
        first = body["results"][0]
        assert set(first) == {"doc_id", "score", "title", "path", "snippet", "highlights"}
        assert first["highlights"] and first["highlights"][0]["kind"] in ("text", "math")

    def test_search_math_query(self, server):
        status, body = get(f"{server}/api/search?q=%24x%2By%24")  # $x+y$
        assert status == 200
        assert body["total_hits"] >= 1

    def test_empty_query_400(self, server):
        status, body = get(f"{server}/api/search?q=")
        assert status == 400
        assert "error" in body

    def test_parse_error_400_with_offset(self, server):
        status, body = get(f"{server}/api/search?q=%24%5Cfoo%24")  # $\foo$
        assert status == 400
        assert "offset" in body

    def test_offset_beyond_hits(self, server):
        status, body = get(f"{server}/api/search?q=energy&offset=10000")
        assert status == 200
        assert body["results"] == []
        assert body["total_hits"] >= 1

    def test_k_clamped(self, server):
        status, body = get(f"{server}/api/search?q=energy&k=100000")
        assert status == 200
        assert len(body["results"]) <= 100

    def test_deterministic_excluding_took_ms(self, server):
        _, first = get(f"{server}/api/search?q=energy+theorem&k=12")
        _, second = get(f"{server}/api/search?q=energy+theorem&k=12")
        first.pop("took_ms")
        second.pop("took_ms")
        assert first == second

    def test_took_ms_sane(self, server):
        started = time.perf_counter()
        _, body = get(f"{server}/api/search?q=energy")
        wall_ms = (time.perf_counter() - started) * 1000
        assert 0 <= body["took_ms"] <= wall_ms + 10.0

    def test_doc_endpoint(self, server):
        _, hits = get(f"{server}/api/search?q=energy")
        doc_id = hits["results"][0]["doc_id"]
        status, body = get(f"{server}/api/doc/{doc_id}")
        assert status == 200
        assert body["doc_id"] == doc_id
        assert body["path"].endswith(".xhtml")
        encoded = body["body"].encode("utf-8")
        for span in body["formulae"]:
            piece = encoded[span["start"]:span["end"]]
            assert piece.startswith(b"<math")
            assert piece.endswith(b"</math>")

    def test_doc_not_found_404(self, server):
        status, body = get(f"{server}/api/doc/99999")
        assert status == 404
        status, _ = get(f"{server}/api/doc/notanid")
        assert status == 404

    def test_cors_header(self, server):
        _, headers, _ = get_raw(f"{server}/healthz")
        assert headers["Access-Control-Allow-Origin"] == "*"

    def test_fallback_page(self, server):
        status, headers, body = get_raw(f"{server}/")
        assert status == 200
        assert b"mathfind" in body

    def test_unknown_path_404(self, server):
        status, _ = get(f"{server}/api/unknown")
        assert status == 404


class TestLoadingState:
    def test_503_while_loading(self, fixture_index, monkeypatch):
        import mathfind.service as service_mod

        release = threading.Event()
        real_open = service_mod.open_index

        def slow_open(path):
            release.wait(10)
            return real_open(path)

        monkeypatch.setattr(service_mod, "open_index", slow_open)
        srv, state = make_server(str(fixture_index), "127.0.0.1:0")
        thread = threading.Thread(target=srv.serve_forever, kwargs={"poll_interval": 0.05})
        thread.start()
        base = f"http://127.0.0.1:{srv.server_address[1]}"
        try:
            status, body = get(f"{base}/api/search?q=energy")
            assert status == 503
            status, body = get(f"{base}/healthz")
            assert status == 503
            release.set()
            state.wait_loaded(10)
            status, body = get(f"{base}/healthz")
            assert status == 200
        finally:
            release.set()
            srv.shutdown()
            thread.join()
            srv.server_close()
            if state.reader:
                state.reader.close()


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _wait_healthy(base: str, proc, timeout=30.0) -> bool:
    deadline = time.time() + timeout
    while time.time() < deadline:
        if proc.poll() is not None:
            return False
        try:
            status, _ = get(f"{base}/healthz")
            if status == 200:
                return True
        except (urllib.error.URLError, ConnectionError, OSError):
            pass
        time.sleep(0.1)
    return False


class TestProcessLifecycle:
    def test_sigterm_completes_inflight_query_then_exit_0(self, fixture_index):
        port = _free_port()
        proc = subprocess.Popen(
            [sys.executable, "-m", "mathfind.cli", "serve",
             "--index", str(fixture_index), "--bind", f"127.0.0.1:{port}"],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        base = f"http://127.0.0.1:{port}"
        try:
            assert _wait_healthy(base, proc)
            responses = []

            def slow_query():
                responses.append(get(f"{base}/api/search?q=energy+theorem+momentum&k=100"))

            worker = threading.Thread(target=slow_query)
            worker.start()
            time.sleep(0.02)
            proc.send_signal(signal.SIGTERM)
            worker.join(timeout=15)
            assert not worker.is_alive()
            status, body = responses[0]
            assert status == 200
            assert body["total_hits"] >= 0
            assert proc.wait(timeout=15) == 0
        finally:
            if proc.poll() is None:
                proc.kill()

    def test_occupied_port_exit_2(self, fixture_index):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        blocker.listen(1)
        try:
            proc = subprocess.run(
                [sys.executable, "-m", "mathfind.cli", "serve",
                 "--index", str(fixture_index), "--bind", f"127.0.0.1:{port}"],
                capture_output=True,
                timeout=30,
            )
            assert proc.returncode == 2
        finally:
            blocker.close()

    def test_unreadable_index_exit_2(self, tmp_path):
        bad = tmp_path / "bad"
        bad.mkdir()
        (bad / "junk").write_text("garbage")
        proc = subprocess.run(
            [sys.executable, "-m", "mathfind.cli", "serve",
             "--index", str(bad), "--bind", "127.0.0.1:0"],
            capture_output=True,
            timeout=30,
        )
        assert proc.returncode == 2

    def test_env_overrides_flags(self, fixture_index):
        port = _free_port()
        env = dict(os.environ)
        env["MATHFIND_INDEX"] = str(fixture_index)
        env["MATHFIND_BIND"] = f"127.0.0.1:{port}"
        proc = subprocess.Popen(
            [sys.executable, "-m", "mathfind.cli", "serve",
             "--index", "/nonexistent", "--bind", "127.0.0.1:1"],
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        base = f"http://127.0.0.1:{port}"
        try:
            assert _wait_healthy(base, proc)
        finally:
            proc.send_signal(signal.SIGTERM)
            proc.wait(timeout=15)

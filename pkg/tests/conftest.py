"""Shared fixtures: tiny corpora and a controllable scoring server."""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from embkit.corpus import Document

FIXTURES = Path(__file__).parent / "fixtures"


def make_docs(texts: dict[str, str]) -> list[Document]:
    return [Document(id=doc_id, text=text) for doc_id, text in texts.items()]


class _ScoringHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        server = self.server
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length).decode("utf-8"))
        pairs = payload.get("pairs", [])
        with server.state_lock:
            server.calls += 1
            fail = server.fail_next > 0
            if fail:
                server.fail_next -= 1
        if server.request_seen is not None:
            server.request_seen.set()
        if server.delay:
            time.sleep(server.delay)
        if fail:
            self._reply(503, {"error": "unavailable"})
            return
        if server.max_batch_size and len(pairs) > server.max_batch_size:
            self._reply(413, {"error": "batch too large", "max_batch_size": server.max_batch_size})
            return
        scores = [server.score_fn(p["query"], p["doc"]) for p in pairs]
        if server.short_response:
            scores = scores[:-1]
        self._reply(200, {"scores": scores})

    def _reply(self, code: int, obj: dict):
        body = json.dumps(obj).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


def default_score(query: str, doc: str) -> float:
    # Deterministic, text-dependent, and order-sensitive in the pair.
    return float((len(query) * 7 + len(doc) * 3) % 97) / 10.0


class ScoringServer:
    """In-process reranker endpoint with failure and batch-limit knobs."""

    def __init__(self, score_fn=None, max_batch_size=None):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _ScoringHandler)
        self.httpd.score_fn = score_fn or default_score
        self.httpd.max_batch_size = max_batch_size
        self.httpd.calls = 0
        self.httpd.fail_next = 0
        self.httpd.delay = 0.0
        self.httpd.short_response = False
        self.httpd.request_seen = None
        self.httpd.state_lock = threading.Lock()
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()

    @property
    def endpoint(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}/score"

    @property
    def calls(self) -> int:
        return self.httpd.calls


@pytest.fixture
def scoring_server():
    with ScoringServer() as server:
        yield server

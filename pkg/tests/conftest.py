import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class ChatStub:
    """Local chat-completions double.

    ``script`` is a list of (status, content) consumed one per request; once
    exhausted, ``default`` answers. Counts requests and peak concurrency.
    """

    def __init__(self, script=None, default=(200, "Yes"), delay_s=0.0, reply=None):
        self.script = list(script or [])
        self.default = default
        self.delay_s = delay_s
        self.reply = reply  # optional callable(body) -> content
        self.requests = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with stub._lock:
                    stub.requests.append({"path": self.path, "body": body,
                                          "auth": self.headers.get("Authorization")})
                    stub.in_flight += 1
                    stub.max_in_flight = max(stub.max_in_flight, stub.in_flight)
                    status, content = stub.script.pop(0) if stub.script else stub.default
                try:
                    if stub.delay_s:
                        time.sleep(stub.delay_s)
                    if status == 200 and stub.reply is not None:
                        content = stub.reply(body)
                    if status == 200 and not isinstance(content, bytes):
                        payload = json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]})
                    else:
                        payload = content if isinstance(content, bytes) else json.dumps({"error": content})
                    data = payload.encode() if isinstance(payload, str) else payload
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass  # client gave up (timeout tests)
                finally:
                    with stub._lock:
                        stub.in_flight -= 1

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        self.thread = threading.Thread(target=self.server.serve_forever, kwargs={"poll_interval": 0.02}, daemon=True)

    @property
    def url(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}/v1"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def chat_stub():
    stubs = []

    def make(**kwargs):
        stub = ChatStub(**kwargs).__enter__()
        stubs.append(stub)
        return stub

    yield make
    for s in stubs:
        s.__exit__(None, None, None)


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv("SPATIALQA_TEST_KEY", "sk-test")
    return "SPATIALQA_TEST_KEY"

# -*- coding: utf-8 -*-
"""
Minimal reasoner endpoint for tests.

Run like
    $ python -m tests.reasoner_stub_server
"""
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

#: variant -> decision returned in 'ok' mode
DECISIONS = {
    "early_stop": "switch",
    "room_label": "kitchen",
    "attribute": "red",
    "relation": True,
}


class StubHandler(BaseHTTPRequestHandler):
    def log_message(self, format, *args):
        pass

    def _reply(self, code, body):
        data = body if isinstance(body, bytes) else json.dumps(body).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        server = self.server
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        server.requests.append(
            {"path": self.path, "body": body, "auth": self.headers.get("Authorization")}
        )
        mode = server.mode
        if self.path != "/decide":
            return self._reply(404, {"error": "not found"})
        if mode == "error" or (mode == "flaky" and len(server.requests) % 2):
            return self._reply(500, {"error": "boom"})
        elif mode == "garbage":
            return self._reply(200, b"<html>not json</html>")
        elif mode == "no_decision":
            return self._reply(200, {"rationale": "thinking"})
        elif mode == "slow":
            time.sleep(server.delay)

        variant = body.get("variant")
        if variant == "room_query":
            rooms = body["payload"]["uncovered_rooms"]
            decision = 999 if mode == "bad_room" else rooms[-1]["id"]
        elif mode == "bad_room":
            decision = None
        else:
            decision = DECISIONS.get(variant)
        return self._reply(200, {"decision": decision, "rationale": "stub"})


class StubServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address=("127.0.0.1", 0)):
        super().__init__(address, StubHandler)
        self.requests = []
        # ok, error, flaky (odd requests fail), garbage, no_decision, slow, bad_room
        self.mode = "ok"
        self.delay = 1.0

    @property
    def url(self):
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


def start_stub_server():
    """Serve in a daemon thread; call `shutdown()` and `server_close()` when done."""
    server = StubServer()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


if __name__ == "__main__":
    server = StubServer(("127.0.0.1", 8077))
    print(f"Serving reasoner stub at {server.url}/decide")
    server.serve_forever()

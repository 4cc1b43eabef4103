import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest


def vector_for_text(text, dim=8):
    """Deterministic pseudo-embedding for a text, independent of hash seeds."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(dim).tolist()


class _EmbedHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        state = self.server.state
        state["requests"] += 1
        if state["fail_remaining"] > 0:
            state["fail_remaining"] -= 1
            self.send_response(500)
            self.end_headers()
            return
        length = int(self.headers.get("Content-Length", 0))
        texts = json.loads(self.rfile.read(length))["texts"]
        vectors = []
        for text in texts:
            if text == state.get("nan_text"):
                vectors.append([float("nan")] * 8)
            elif text == state.get("zero_text"):
                vectors.append([0.0] * 8)
            else:
                vectors.append(vector_for_text(text))
        if state.get("drop_one"):
            vectors = vectors[:-1]
        payload = json.dumps({"vectors": vectors}).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def embed_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _EmbedHandler)
    server.state = {"requests": 0, "fail_remaining": 0}
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}/embed", server.state
    finally:
        server.shutdown()
        thread.join()


def random_unit_matrix(rng, count, dim):
    rows = rng.standard_normal((count, dim))
    return (rows / np.linalg.norm(rows, axis=1, keepdims=True)).astype(np.float32)

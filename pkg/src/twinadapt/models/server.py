"""Server side of the remote-model protocol (a partial-model host).

Serves simulate requests for models of one pool over newline-delimited
JSON/TCP. Connections are handled concurrently; requests on a single
connection are answered in order.
"""

from __future__ import annotations

import json
import socketserver
import threading

from ..pool import ModelPool
from ..signals import SignalFrame, SimTrace
from .composite import simulate_single


def handle_request_obj(pool: ModelPool, obj: dict) -> dict:
    """Answer one decoded request; never raises, reports errors in-band."""
    req_id = obj.get("id") if isinstance(obj, dict) else None
    try:
        if not isinstance(obj, dict):
            raise ValueError("request must be a JSON object")
        for key in ("id", "op", "model", "window", "dt"):
            if key not in obj:
                raise ValueError(f"request missing field {key!r}")
        if obj["op"] != "simulate":
            raise ValueError(f"unsupported op {obj['op']!r}")
        descriptor = pool.get(str(obj["model"]))
        window = obj["window"]
        t0, t1 = float(window[0]), float(window[1])
        params = {str(k): float(v) for k, v in (obj.get("params") or {}).items()}
        stimulus = SimTrace(t0=t0, t1=t1)
        for frame_obj in obj.get("stimulus") or []:
            stimulus.add_frame(SignalFrame.from_json_obj(frame_obj))
        trace = simulate_single(descriptor, params, stimulus, (t0, t1), float(obj["dt"]))
        return {"id": req_id, "ok": True, "trace": trace.to_json_obj()}
    except Exception as exc:  # protocol demands in-band error reporting
        return {"id": req_id, "ok": False, "error": f"{type(exc).__name__}: {exc}"}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        pool = self.server.pool  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                response = {"id": None, "ok": False, "error": f"bad JSON: {exc}"}
            else:
                response = handle_request_obj(pool, obj)
            self.wfile.write(
                (json.dumps(response, separators=(",", ":")) + "\n").encode("utf-8")
            )
            self.wfile.flush()


class ModelServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, pool: ModelPool, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _Handler)
        self.pool = pool

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

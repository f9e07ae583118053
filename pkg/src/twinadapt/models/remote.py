"""Client side of the remote-model protocol.

Partial models may execute on another host (e.g. a vendor simulation
server). The wire protocol is newline-delimited JSON over TCP: one
simulate request per line, one response line per request, correlated by
id. A remote run must decode to exactly the trace a local run of the same
model, parameters and stimulus produces.
"""

from __future__ import annotations

import itertools
import json
import socket

from ..errors import (
    ProtocolError,
    RemoteSimulationError,
    RemoteTimeoutError,
    UnreachableError,
)
from ..signals import SimTrace

DEFAULT_TIMEOUT = 30.0
CONNECT_TIMEOUT = 5.0

_request_counter = itertools.count(1)


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    addr = endpoint
    if addr.startswith("tcp://"):
        addr = addr[len("tcp://"):]
    host, _, port = addr.rpartition(":")
    if not host or not port:
        raise ProtocolError(f"endpoint {endpoint!r} must be host:port")
    try:
        return host, int(port)
    except ValueError as exc:
        raise ProtocolError(f"endpoint {endpoint!r} has a non-numeric port") from exc


def remote_simulate(
    endpoint: str,
    request: dict,
    timeout: float = DEFAULT_TIMEOUT,
    connect_timeout: float = CONNECT_TIMEOUT,
) -> SimTrace:
    """Execute one simulate request on a remote model endpoint."""
    host, port = parse_endpoint(endpoint)
    payload = dict(request)
    payload.setdefault("op", "simulate")
    payload.setdefault("id", f"req-{next(_request_counter)}")
    line = json.dumps(payload, separators=(",", ":")) + "\n"
    try:
        sock = socket.create_connection((host, port), timeout=connect_timeout)
    except socket.timeout as exc:
        raise UnreachableError(f"connect to {endpoint} timed out") from exc
    except OSError as exc:
        raise UnreachableError(f"cannot connect to {endpoint}: {exc}") from exc
    try:
        sock.settimeout(timeout)
        sock.sendall(line.encode("utf-8"))
        raw = _read_line(sock, timeout)
    finally:
        sock.close()
    return decode_response(raw, expect_id=payload["id"])


def _read_line(sock: socket.socket, timeout: float) -> str:
    chunks = []
    try:
        while True:
            data = sock.recv(65536)
            if not data:
                break
            chunks.append(data)
            if b"\n" in data:
                break
    except socket.timeout as exc:
        raise RemoteTimeoutError(f"no response within {timeout} s") from exc
    raw = b"".join(chunks)
    if not raw:
        raise ProtocolError("connection closed before any response line")
    return raw.split(b"\n", 1)[0].decode("utf-8")


def decode_response(raw: str, expect_id: str | None = None) -> SimTrace:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"response line is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("response must be a JSON object")
    if "id" not in obj:
        raise ProtocolError("response missing field 'id'")
    if expect_id is not None and obj["id"] != expect_id:
        raise ProtocolError(f"response field 'id' mismatch: {obj['id']!r}")
    if "ok" not in obj:
        raise ProtocolError("response missing field 'ok'")
    if obj["ok"] is not True:
        raise RemoteSimulationError(str(obj.get("error", "remote simulation failed")))
    if "trace" not in obj:
        raise ProtocolError("response missing field 'trace'")
    return SimTrace.from_json_obj(obj["trace"])

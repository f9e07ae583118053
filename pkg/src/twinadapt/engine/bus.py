"""In-process event bus connecting the engine to the service layer.

Events are plain dicts; the bus stamps a monotonically increasing id so
consumers (SSE clients in particular) can resume after a disconnect.
"""

from __future__ import annotations

import threading
from collections import deque


class EventBus:
    def __init__(self, buffer_size: int = 2048):
        self._lock = threading.Lock()
        self._subscribers: list = []
        self._next_id = 1
        self._buffer: deque = deque(maxlen=buffer_size)

    def publish(self, event_type: str, data: dict | None = None) -> dict:
        with self._lock:
            event = {"id": self._next_id, "type": event_type, "data": data or {}}
            self._next_id += 1
            self._buffer.append(event)
            subscribers = list(self._subscribers)
        for callback in subscribers:
            callback(event)
        return event

    def subscribe(self, callback) -> None:
        with self._lock:
            self._subscribers.append(callback)

    def unsubscribe(self, callback) -> None:
        with self._lock:
            if callback in self._subscribers:
                self._subscribers.remove(callback)

    def replay_since(self, last_id: int) -> list[dict]:
        """Buffered events with id > last_id, oldest first."""
        with self._lock:
            return [e for e in self._buffer if e["id"] > last_id]

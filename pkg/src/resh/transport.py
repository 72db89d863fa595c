"""Message transports: in-process loopback and line framing for sockets.

The codec lives in ``protocol``; this module only moves bytes. The
loopback bus preserves per-sender send order, which is all the engines
may rely on. Socket transport is newline-framed; ``LineReader`` turns an
arbitrary chunk stream back into complete lines.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, Deque, Dict, Iterator, List, Optional

from .protocol import Envelope, decode, encode


class Loopback:
    """In-process bus: endpoints publish envelopes, subscribers drain FIFO."""

    def __init__(self):
        self._queues: Dict[str, Deque[Envelope]] = {}
        self._taps: List[Callable[[Envelope], None]] = []

    def endpoint(self, name: str) -> "Endpoint":
        self._queues.setdefault(name, deque())
        return Endpoint(self, name)

    def publish(self, to: str, env: Envelope):
        # encode/decode even in-process so loopback exercises the codec
        wire = encode(env)
        self._queues.setdefault(to, deque()).append(decode(wire))
        for tap in self._taps:
            tap(env)

    def tap(self, fn: Callable[[Envelope], None]):
        """Observe every published envelope (tracing, tests)."""
        self._taps.append(fn)

    def drain(self, name: str) -> List[Envelope]:
        q = self._queues.setdefault(name, deque())
        out = list(q)
        q.clear()
        return out


class Endpoint:
    def __init__(self, bus: Loopback, name: str):
        self.bus = bus
        self.name = name
        self._next = 0

    def fresh_id(self) -> str:
        self._next += 1
        return f"{self.name}-{self._next}"

    def send(self, to: str, env: Envelope):
        self.bus.publish(to, env)

    def poll(self) -> List[Envelope]:
        return self.bus.drain(self.name)


class LineReader:
    """Reassemble newline-framed messages from a chunked byte stream."""

    def __init__(self):
        self._buf = b""

    def feed(self, chunk: bytes) -> Iterator[bytes]:
        self._buf += chunk
        while True:
            nl = self._buf.find(b"\n")
            if nl < 0:
                return
            line = self._buf[:nl + 1]
            self._buf = self._buf[nl + 1:]
            yield line

    @property
    def pending(self) -> bytes:
        return self._buf

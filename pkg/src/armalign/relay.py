"""Pose-streaming relay over TCP.

The server sends the session header, then one frame line per tick. Each
subscriber has its own writer thread and a bounded queue. A subscriber whose
queue overflows is dropped with a connection reset, so a stalled reader never
holds up the others. When the source is exhausted every remaining subscriber
gets its queued lines followed by an orderly close.

:func:`subscribe` is the client side: a generator of parsed frames, with the
optional low-pass filter applied to the base pose.
"""
from __future__ import annotations

import logging
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator

from .session import (FilterState, SessionFrame, SessionParseError, ema_filter, format_frame,
                      format_header, parse_frame, parse_header)

log = logging.getLogger(__name__)

BUFFER_FRAMES = 256


class RelayStartupError(OSError):
    pass


class TransportError(ConnectionError):
    pass


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


@dataclass(frozen=True)
class RelayConfig:
    host: str = "127.0.0.1"
    port: int = 0
    rate: float = 100.0
    buffer_frames: int = BUFFER_FRAMES
    wait_for: int = 0           # subscribers to wait for before the first tick
    send_buffer: int | None = None  # SO_SNDBUF for subscriber sockets

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if self.buffer_frames < 1:
            raise ValueError("buffer_frames must be at least 1")


_EOS = None


class _Subscriber:
    def __init__(self, sock: socket.socket, header: bytes, maxsize: int):
        self.sock = sock
        self.queue: queue.Queue = queue.Queue(maxsize)
        self.alive = True
        self._header = header
        self.thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        try:
            self.sock.sendall(self._header)
            while True:
                item = self.queue.get()
                if item is _EOS:
                    self.sock.shutdown(socket.SHUT_WR)
                    break
                self.sock.sendall(item)
        except OSError:
            pass
        finally:
            self.alive = False
            self.sock.close()

    def offer(self, line: bytes) -> bool:
        try:
            self.queue.put_nowait(line)
            return True
        except queue.Full:
            return False

    def drop(self):
        """Abort with a reset so the client can tell this apart from end of stream."""
        self.alive = False
        try:
            self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_LINGER, struct.pack("ii", 1, 0))
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass

    def finish(self):
        try:
            self.queue.put(_EOS, timeout=1.0)
        except queue.Full:
            self.drop()


class RelayServer:
    """Streams ``frames`` (any iterable, so a live generator works) at ``config.rate``."""

    def __init__(self, frames: Iterable[SessionFrame], config: RelayConfig = RelayConfig()):
        self.config = config
        self._frames = frames
        self._header = (format_header(config.rate) + "\n").encode("utf-8")
        self._subs: list[_Subscriber] = []
        self._lock = threading.Lock()
        self._joined = threading.Condition(self._lock)
        self._stop = threading.Event()
        self._listener: socket.socket | None = None
        self._producer: threading.Thread | None = None
        self.frames_sent = 0
        self.dropped = 0

    @property
    def address(self) -> tuple[str, int]:
        if self._listener is None:
            raise RuntimeError("server not started")
        return self._listener.getsockname()[:2]

    def start(self) -> RelayServer:
        try:
            ls = socket.create_server((self.config.host, self.config.port))
        except OSError as e:
            raise RelayStartupError(f"cannot bind {self.config.host}:{self.config.port}: {e}") from e
        ls.settimeout(0.1)
        self._listener = ls
        threading.Thread(target=self._accept_loop, daemon=True).start()
        self._producer = threading.Thread(target=self._produce, daemon=True)
        self._producer.start()
        return self

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            conn.settimeout(None)
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            if self.config.send_buffer:
                conn.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, self.config.send_buffer)
            sub = _Subscriber(conn, self._header, self.config.buffer_frames)
            with self._lock:
                if self._stop.is_set():
                    conn.close()
                    break
                self._subs.append(sub)
                self._joined.notify_all()
            sub.thread.start()

    def _produce(self):
        with self._lock:
            while len(self._subs) < self.config.wait_for and not self._stop.is_set():
                self._joined.wait(0.1)
        period = 1.0 / self.config.rate
        t0 = time.perf_counter()
        for i, frame in enumerate(self._frames):
            if self._stop.is_set():
                break
            delay = t0 + i * period - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
            line = (format_frame(frame) + "\n").encode("utf-8")
            with self._lock:
                for sub in self._subs:
                    if sub.alive and not sub.offer(line):
                        log.warning("dropping slow subscriber %s", sub.sock.getpeername())
                        self.dropped += 1
                        sub.drop()
                self._subs = [s for s in self._subs if s.alive]
            self.frames_sent += 1
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            sub.finish()
        for sub in subs:
            sub.thread.join(timeout=5.0)
        self._stop.set()
        self._listener.close()

    def wait(self, timeout: float | None = None) -> bool:
        """Block until the source is exhausted; ``True`` if the stream ended."""
        self._producer.join(timeout)
        return not self._producer.is_alive()

    def close(self):
        self._stop.set()
        if self._producer is not None:
            self._producer.join(timeout=5.0)
        with self._lock:
            for sub in self._subs:
                sub.drop()

    def __enter__(self):
        return self if self._listener is not None else self.start()

    def __exit__(self, *exc):
        self.close()


def serve(frames: Iterable[SessionFrame], config: RelayConfig = RelayConfig()) -> RelayServer:
    return RelayServer(frames, config).start()


def subscribe(address: tuple[str, int], filter_beta: float | None = None,
              on_error: Callable[[SessionParseError], None] | None = None,
              timeout: float | None = None,
              on_header: Callable[[float], None] | None = None) -> Iterator[SessionFrame]:
    """Yield frames until the server ends the stream.

    A malformed frame line is passed to ``on_error`` (or logged) and skipped.
    A reset or a truncated final line raises :class:`TransportError`.
    """
    try:
        sock = socket.create_connection(address, timeout=timeout)
    except OSError as e:
        raise TransportError(f"cannot connect to {address[0]}:{address[1]}: {e}") from e
    state = FilterState(beta=filter_beta) if filter_beta is not None else None
    with sock, sock.makefile("r", encoding="utf-8", newline="\n") as f:
        try:
            header = f.readline()
            if not header.endswith("\n"):
                raise TransportError("connection closed before the session header")
            rate = parse_header(header)
            if on_header is not None:
                on_header(rate)
            lineno = 1
            for line in f:
                lineno += 1
                if not line.endswith("\n"):
                    raise TransportError(f"stream cut inside line {lineno}")
                try:
                    frame = parse_frame(line, lineno)
                except SessionParseError as e:
                    if on_error is not None:
                        on_error(e)
                    else:
                        log.warning("skipping bad frame: %s", e)
                    continue
                if state is not None:
                    state, base = ema_filter(state, frame.base_pose)
                    frame = replace(frame, base_pose=base)
                yield frame
        except OSError as e:
            raise TransportError(f"connection lost: {e}") from e

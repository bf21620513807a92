"""Round-trip latency probe and echo responder.

Frame layout (big-endian), padded with zeros to the configured size::

    magic "FRPB" | version u8 = 1 | flags u8 = 0 | reserved u16 = 0
    | sequence u32 | send timestamp u64 (ns, sender monotonic clock)

Stream transport prefixes each frame with its length as a u32.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import List, Optional

from .errors import BindError, ResolveError
from .stats import LatencyStats, summarize

log = logging.getLogger(__name__)

MAGIC = b"FRPB"
VERSION = 1
HEADER = struct.Struct(">4sBBHIQ")
LENGTH = struct.Struct(">I")
MIN_PAYLOAD = 36
MAX_PAYLOAD = 65_507

DATAGRAM = "datagram"
STREAM = "stream"


def encode_frame(seq: int, timestamp_ns: int, size: int) -> bytes:
    if size < HEADER.size:
        raise ValueError(f"frame size must be >= {HEADER.size}")
    head = HEADER.pack(MAGIC, VERSION, 0, 0, seq & 0xFFFFFFFF, timestamp_ns & 0xFFFFFFFFFFFFFFFF)
    return head + bytes(size - HEADER.size)


@dataclass(frozen=True)
class Frame:
    seq: int
    timestamp_ns: int
    size: int


def decode_frame(data: bytes) -> Optional[Frame]:
    if len(data) < HEADER.size:
        return None
    magic, version, _flags, _reserved, seq, ts = HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        return None
    return Frame(seq, ts, len(data))


@dataclass(frozen=True)
class ProbeConfig:
    host: str
    port: int
    transport: str = DATAGRAM
    count: int = 20
    payload_bytes: int = 64
    interval_ms: float = 200.0
    timeout_ms: float = 1000.0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not MIN_PAYLOAD <= self.payload_bytes <= MAX_PAYLOAD:
            raise ValueError(f"payload_bytes must be in [{MIN_PAYLOAD}, {MAX_PAYLOAD}]")
        if self.transport not in (DATAGRAM, STREAM):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.interval_ms < 0 or self.timeout_ms <= 0:
            raise ValueError("interval_ms must be >= 0 and timeout_ms > 0")


@dataclass
class ProbeResult:
    """``stats`` is always ``summarize(raw_rtts_ms, lost)``; with no replies
    its count is 0 and every latency field is None."""

    stats: LatencyStats
    lost: int
    raw_rtts_ms: List[float] = field(default_factory=list)


def _resolve(host, port, socktype):
    try:
        infos = socket.getaddrinfo(host, port, 0, socktype)
    except (socket.gaierror, UnicodeError) as exc:
        raise ResolveError(f"cannot resolve {host!r}: {exc}") from None
    if not infos:
        raise ResolveError(f"cannot resolve {host!r}")
    family, _, _, _, addr = infos[0]
    return family, addr


def _now_ns():
    return time.monotonic_ns()


def _pace(start_ns, seq, interval_ms):
    target = start_ns + int((seq + 1) * interval_ms * 1e6)
    delay = (target - _now_ns()) / 1e9
    if delay > 0:
        time.sleep(delay)


def _probe_datagram(cfg: ProbeConfig, family, addr):
    try:
        sock = socket.socket(family, socket.SOCK_DGRAM)
        sock.bind(("::", 0) if family == socket.AF_INET6 else ("0.0.0.0", 0))
    except OSError as exc:
        raise BindError(f"cannot open probe socket: {exc}") from None
    rtts = {}
    timeout_ns = int(cfg.timeout_ms * 1e6)
    start = _now_ns()
    with sock:
        for seq in range(cfg.count):
            sent_at = _now_ns()
            try:
                sock.sendto(encode_frame(seq, sent_at, cfg.payload_bytes), addr)
            except OSError as exc:
                log.debug("send %d failed: %s", seq, exc)
            deadline = sent_at + timeout_ns
            while seq not in rtts:
                remaining = (deadline - _now_ns()) / 1e9
                if remaining <= 0:
                    break
                sock.settimeout(remaining)
                try:
                    data, _ = sock.recvfrom(MAX_PAYLOAD + 64)
                except socket.timeout:
                    break
                except OSError:
                    # ICMP unreachable surfaces here on some platforms
                    time.sleep(min(remaining, 0.005))
                    continue
                got = _now_ns()
                frame = decode_frame(data)
                # late replies to earlier sequence numbers and duplicates are dropped
                if frame is not None and frame.seq == seq:
                    rtts[seq] = (got - sent_at) / 1e6
            _pace(start, seq, cfg.interval_ms)
    return rtts


class _FrameReader:
    def __init__(self, sock):
        self.sock = sock
        self.buf = b""

    def read(self, deadline_ns) -> Optional[bytes]:
        while True:
            if len(self.buf) >= LENGTH.size:
                (n,) = LENGTH.unpack_from(self.buf)
                if len(self.buf) >= LENGTH.size + n:
                    frame = self.buf[LENGTH.size:LENGTH.size + n]
                    self.buf = self.buf[LENGTH.size + n:]
                    return frame
            remaining = (deadline_ns - _now_ns()) / 1e9
            if remaining <= 0:
                return None
            self.sock.settimeout(remaining)
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                return None
            if not chunk:
                raise ConnectionError("peer closed the stream")
            self.buf += chunk


def _probe_stream(cfg: ProbeConfig, family, addr):
    rtts = {}
    try:
        sock = socket.socket(family, socket.SOCK_STREAM)
    except OSError as exc:
        raise BindError(f"cannot open probe socket: {exc}") from None
    with sock:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(cfg.timeout_ms / 1000.0)
        try:
            sock.connect(addr)
        except OSError as exc:
            log.debug("connect failed: %s", exc)
            return rtts
        reader = _FrameReader(sock)
        timeout_ns = int(cfg.timeout_ms * 1e6)
        start = _now_ns()
        for seq in range(cfg.count):
            sent_at = _now_ns()
            frame = encode_frame(seq, sent_at, cfg.payload_bytes)
            try:
                sock.sendall(LENGTH.pack(len(frame)) + frame)
                deadline = sent_at + timeout_ns
                while True:
                    data = reader.read(deadline)
                    if data is None:
                        break
                    got = _now_ns()
                    parsed = decode_frame(data)
                    if parsed is not None and parsed.seq == seq:
                        rtts[seq] = (got - sent_at) / 1e6
                        break
            except OSError as exc:
                log.debug("stream probe aborted at %d: %s", seq, exc)
                return rtts
            _pace(start, seq, cfg.interval_ms)
    return rtts


def probe(cfg: ProbeConfig) -> ProbeResult:
    socktype = socket.SOCK_STREAM if cfg.transport == STREAM else socket.SOCK_DGRAM
    family, addr = _resolve(cfg.host, cfg.port, socktype)
    if cfg.transport == STREAM:
        rtts = _probe_stream(cfg, family, addr)
    else:
        rtts = _probe_datagram(cfg, family, addr)
    raw = [rtts[s] for s in sorted(rtts)]
    lost = cfg.count - len(raw)
    return ProbeResult(summarize(raw, lost), lost, raw)


class _UDPHandler(socketserver.BaseRequestHandler):
    def handle(self):
        data, sock = self.request
        if self.server.delay_s:
            time.sleep(self.server.delay_s)
        sock.sendto(data, self.client_address)


class _TCPHandler(socketserver.BaseRequestHandler):
    def handle(self):
        reader = _FrameReader(self.request)
        while True:
            try:
                frame = reader.read(_now_ns() + 3_600 * 10**9)
            except (ConnectionError, OSError):
                return
            if frame is None:
                return
            if self.server.delay_s:
                time.sleep(self.server.delay_s)
            try:
                self.request.sendall(LENGTH.pack(len(frame)) + frame)
            except OSError:
                return


class _UDPServer(socketserver.ThreadingUDPServer):
    daemon_threads = True
    allow_reuse_address = True
    max_packet_size = MAX_PAYLOAD + 64


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class EchoServer:
    """Echo responder; usable as a context manager that serves in a thread."""

    def __init__(self, port: int = 0, transport: str = DATAGRAM, delay_ms: float = 0.0,
                 host: str = "127.0.0.1"):
        cls, handler = (_TCPServer, _TCPHandler) if transport == STREAM else (_UDPServer, _UDPHandler)
        try:
            self.server = cls((host, port), handler)
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from None
        self.server.delay_s = delay_ms / 1000.0
        self.transport = transport
        self._thread = None

    @property
    def address(self):
        return self.server.server_address[:2]

    @property
    def port(self):
        return self.address[1]

    def serve_forever(self):
        self.server.serve_forever(poll_interval=0.05)

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.server.shutdown()
        self.server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=2)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def echo_serve(port: int, transport: str = DATAGRAM, delay_ms: float = 0.0, host: str = "0.0.0.0"):
    """Serve echoes until interrupted."""
    server = EchoServer(port, transport, delay_ms, host)
    log.info("echo %s on %s:%d (delay %.1f ms)", transport, *server.address, delay_ms)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server.server_close()

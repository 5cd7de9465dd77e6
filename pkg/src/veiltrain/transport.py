"""Length-prefixed binary framing and the channels that carry it.

Frame layout: 4-byte little-endian frame length (bytes after this field),
1-byte message kind, 4-byte session id, then the payload of little-endian
64-bit ring elements. Party-to-party frames insert a 4-byte round counter
between the session id and the payload; dealer and file frames do not.
"""

from __future__ import annotations

import queue
import socket
import struct

import numpy as np

from .errors import ConnectTimeout, RoundDesync, SessionMismatch

KIND_HELLO = 1
KIND_OPEN = 2
KIND_PROVISION = 3
KIND_MATERIAL = 4
KIND_DATA = 5
KIND_LABELS = 6
KIND_RESULT = 7

_HEADER = struct.Struct("<IBI")
_ROUND = struct.Struct("<I")


def pack_frame(kind: int, session: int, payload: bytes, round_no: int | None = None) -> bytes:
    body = _HEADER.pack(0, kind, session)[4:]  # kind + session only
    if round_no is not None:
        body += _ROUND.pack(round_no)
    body += payload
    return struct.pack("<I", len(body)) + body


def unpack_frame(body: bytes, with_round: bool):
    kind = body[0]
    session = struct.unpack_from("<I", body, 1)[0]
    off = 5
    round_no = None
    if with_round:
        round_no = struct.unpack_from("<I", body, off)[0]
        off += 4
    return kind, session, round_no, body[off:]


def u64_payload(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<u8").tobytes()


def payload_u64(payload: bytes) -> np.ndarray:
    return np.frombuffer(payload, dtype="<u8").astype(np.uint64)


class QueueChannel:
    """In-process duplex channel; one end of a pair of queues."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._in = inbox
        self._out = outbox
        self.bytes_sent = 0
        self.bytes_received = 0

    def send_bytes(self, data: bytes) -> None:
        self.bytes_sent += len(data)
        self._out.put(data)

    def recv_bytes(self, timeout: float | None = 60.0) -> bytes:
        try:
            data = self._in.get(timeout=timeout)
        except queue.Empty:
            raise ConnectTimeout("peer sent nothing before the deadline")
        self.bytes_received += len(data)
        return data

    def close(self) -> None:
        pass


def queue_pair():
    a, b = queue.Queue(), queue.Queue()
    return QueueChannel(a, b), QueueChannel(b, a)


class SocketChannel:
    """Framed duplex channel over a connected TCP socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.bytes_sent = 0
        self.bytes_received = 0

    def send_bytes(self, data: bytes) -> None:
        self.bytes_sent += len(data)
        self.sock.sendall(data)

    def _recv_exact(self, n: int) -> bytes:
        chunks = []
        while n:
            chunk = self.sock.recv(min(n, 1 << 20))
            if not chunk:
                raise ConnectTimeout("peer closed the connection")
            chunks.append(chunk)
            n -= len(chunk)
        return b"".join(chunks)

    def recv_bytes(self, timeout: float | None = 60.0) -> bytes:
        self.sock.settimeout(timeout)
        try:
            header = self._recv_exact(4)
            (length,) = struct.unpack("<I", header)
            body = self._recv_exact(length)
        except socket.timeout:
            raise ConnectTimeout("peer sent nothing before the deadline")
        self.bytes_received += 4 + len(body)
        return header + body

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def connect(host: str, port: int, deadline: float = 10.0, retry: float = 0.05) -> SocketChannel:
    """Dial a peer, retrying until the deadline."""
    import time

    end = time.monotonic() + deadline
    last = None
    while time.monotonic() < end:
        try:
            sock = socket.create_connection((host, port), timeout=retry * 4)
            return SocketChannel(sock)
        except OSError as exc:
            last = exc
            time.sleep(retry)
    raise ConnectTimeout(f"could not reach {host}:{port} within {deadline}s: {last}")


def listen_one(host: str, port: int, timeout: float = 30.0):
    """Accept a single connection; returns (channel, bound_port)."""
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    srv.settimeout(timeout)
    try:
        conn, _ = srv.accept()
    except socket.timeout:
        raise ConnectTimeout(f"nobody connected to {host}:{port} within {timeout}s")
    finally:
        srv.close()
    return SocketChannel(conn)


class FrameIO:
    """Frame-level send/receive with session and round checking."""

    def __init__(self, channel, session: int, with_round: bool):
        self.channel = channel
        self.session = session
        self.with_round = with_round

    def send(self, kind: int, payload: bytes, round_no: int | None = None) -> None:
        self.channel.send_bytes(pack_frame(kind, self.session, payload, round_no))

    def recv(self, expect_kind: int | None = None, expect_round: int | None = None,
             timeout: float | None = 60.0):
        data = self.channel.recv_bytes(timeout=timeout)
        kind, session, round_no, payload = unpack_frame(data[4:], self.with_round)
        if session != self.session:
            raise SessionMismatch(f"frame for session {session}, expected {self.session}")
        if expect_kind is not None and kind != expect_kind:
            raise RoundDesync(f"expected frame kind {expect_kind}, got {kind}")
        if expect_round is not None and round_no != expect_round:
            raise RoundDesync(f"expected round {expect_round}, peer sent {round_no}")
        return kind, round_no, payload

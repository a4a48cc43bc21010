"""MQTT 3.1.1 over TCP, QoS 0 only.

Packet encoders/decoders plus a publisher and a subscriber client. Enough of
the protocol to interoperate with a standard broker; no persistence, no
QoS 1/2, no retained messages.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading
from typing import Optional

from .errors import BackendUnavailable
from .pubsub import PubSubMessage

log = logging.getLogger(__name__)

CONNECT = 1
CONNACK = 2
PUBLISH = 3
SUBSCRIBE = 8
SUBACK = 9
PINGREQ = 12
PINGRESP = 13
DISCONNECT = 14

PROTOCOL_LEVEL = 4  # 3.1.1
MAX_REMAINING = 268_435_455

CONNACK_CODES = {
    0: "accepted",
    1: "unacceptable protocol version",
    2: "identifier rejected",
    3: "server unavailable",
    4: "bad user name or password",
    5: "not authorized",
}


class ProtocolError(ValueError):
    pass


def encode_remaining_length(n: int) -> bytes:
    if not 0 <= n <= MAX_REMAINING:
        raise ValueError(f"remaining length {n} out of range")
    out = bytearray()
    while True:
        byte, n = n % 128, n // 128
        if n:
            byte |= 0x80
        out.append(byte)
        if not n:
            return bytes(out)


def decode_remaining_length(buf: bytes, offset: int = 0) -> tuple[int, int]:
    """Returns (value, bytes consumed)."""
    mult, value = 1, 0
    for i in range(4):
        if offset + i >= len(buf):
            raise ProtocolError("truncated remaining length")
        b = buf[offset + i]
        value += (b & 0x7F) * mult
        if not b & 0x80:
            return value, i + 1
        mult *= 128
    raise ProtocolError("malformed remaining length")


def _str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("string too long for MQTT")
    return struct.pack("!H", len(raw)) + raw


def _packet(header: int, body: bytes) -> bytes:
    return bytes([header]) + encode_remaining_length(len(body)) + body


def connect_packet(client_id: str, keepalive: int = 60, clean_session: bool = True,
                   username: Optional[str] = None, password: Optional[str] = None) -> bytes:
    flags = 0x02 if clean_session else 0
    payload = _str(client_id)
    if username is not None:
        flags |= 0x80
        payload += _str(username)
        if password is not None:
            flags |= 0x40
            payload += _str(password)
    var = _str("MQTT") + bytes([PROTOCOL_LEVEL, flags]) + struct.pack("!H", keepalive)
    return _packet(CONNECT << 4, var + payload)


def connack_packet(return_code: int = 0, session_present: bool = False) -> bytes:
    return _packet(CONNACK << 4, bytes([1 if session_present else 0, return_code]))


def publish_packet(topic: str, payload: bytes, retain: bool = False) -> bytes:
    return _packet((PUBLISH << 4) | (1 if retain else 0), _str(topic) + bytes(payload))


def subscribe_packet(packet_id: int, topics: list[str]) -> bytes:
    body = struct.pack("!H", packet_id) + b"".join(_str(t) + b"\x00" for t in topics)
    return _packet((SUBSCRIBE << 4) | 0x02, body)


def suback_packet(packet_id: int, count: int) -> bytes:
    return _packet(SUBACK << 4, struct.pack("!H", packet_id) + b"\x00" * count)


def pingreq_packet() -> bytes:
    return bytes([PINGREQ << 4, 0])


def pingresp_packet() -> bytes:
    return bytes([PINGRESP << 4, 0])


def disconnect_packet() -> bytes:
    return bytes([DISCONNECT << 4, 0])


def split_packet(buf: bytes) -> Optional[tuple[int, int, bytes, int]]:
    """Parse one packet from the front of ``buf``.

    Returns (type, flags, body, total length) or None if more bytes are needed.
    """
    if len(buf) < 2:
        return None
    try:
        length, used = decode_remaining_length(buf, 1)
    except ProtocolError as exc:
        if "truncated" in str(exc):
            return None
        raise
    end = 1 + used + length
    if len(buf) < end:
        return None
    return buf[0] >> 4, buf[0] & 0x0F, bytes(buf[1 + used : end]), end


def parse_publish(flags: int, body: bytes) -> tuple[str, bytes]:
    qos = (flags >> 1) & 0x03
    if len(body) < 2:
        raise ProtocolError("truncated PUBLISH")
    (n,) = struct.unpack_from("!H", body)
    topic = body[2 : 2 + n].decode("utf-8")
    rest = 2 + n + (2 if qos else 0)  # QoS > 0 carries a packet id
    return topic, body[rest:]


def parse_connect(body: bytes) -> dict:
    (n,) = struct.unpack_from("!H", body)
    name = body[2 : 2 + n].decode("utf-8")
    pos = 2 + n
    level, flags = body[pos], body[pos + 1]
    (keepalive,) = struct.unpack_from("!H", body, pos + 2)
    pos += 4
    (n,) = struct.unpack_from("!H", body, pos)
    client_id = body[pos + 2 : pos + 2 + n].decode("utf-8")
    return {"protocol": name, "level": level, "flags": flags, "keepalive": keepalive, "client_id": client_id}


def parse_subscribe(body: bytes) -> tuple[int, list[str]]:
    (pid,) = struct.unpack_from("!H", body)
    pos, topics = 2, []
    while pos < len(body):
        (n,) = struct.unpack_from("!H", body, pos)
        topics.append(body[pos + 2 : pos + 2 + n].decode("utf-8"))
        pos += 2 + n + 1
    return pid, topics


class _Connection:
    def __init__(self, host: str, port: int, client_id: str, keepalive: int, timeout: float) -> None:
        self.host, self.port = host, port
        self.client_id = client_id
        self.keepalive = keepalive
        self.timeout = timeout
        self.sock: Optional[socket.socket] = None
        self._buf = b""

    def open(self) -> None:
        try:
            sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            sock.sendall(connect_packet(self.client_id, self.keepalive))
            self.sock = sock
            self._buf = b""
            ptype, _, body = self.read_packet(self.timeout)
        except OSError as exc:
            self.close()
            raise BackendUnavailable(f"cannot reach MQTT broker {self.host}:{self.port}: {exc}") from exc
        if ptype != CONNACK or len(body) != 2:
            self.close()
            raise ProtocolError(f"expected CONNACK, got packet type {ptype}")
        if body[1] != 0:
            self.close()
            raise BackendUnavailable(f"broker refused connection: {CONNACK_CODES.get(body[1], body[1])}")

    def read_packet(self, timeout: Optional[float]) -> tuple[int, int, bytes]:
        assert self.sock is not None
        self.sock.settimeout(timeout)
        while True:
            got = split_packet(self._buf)
            if got is not None:
                ptype, flags, body, end = got
                self._buf = self._buf[end:]
                return ptype, flags, body
            chunk = self.sock.recv(65536)
            if not chunk:
                raise ConnectionError("broker closed the connection")
            self._buf += chunk

    def close(self, graceful: bool = False) -> None:
        if self.sock is None:
            return
        try:
            if graceful:
                self.sock.sendall(disconnect_packet())
        except OSError:
            pass
        finally:
            self.sock.close()
            self.sock = None


class MqttPublisher:
    """QoS 0 publisher. Reconnects once per publish when the session drops."""

    def __init__(self, host: str = "127.0.0.1", port: int = 1883, client_id: str = "iotbench-pub",
                 keepalive: int = 60, timeout: float = 5.0, counters=None) -> None:
        self._conn = _Connection(host, port, client_id, keepalive, timeout)
        self._lock = threading.Lock()
        self.counters = counters if counters is not None else {}
        self.published = 0

    def connect(self) -> "MqttPublisher":
        with self._lock:
            if self._conn.sock is None:
                self._conn.open()
        return self

    def publish(self, msg: PubSubMessage) -> bool:
        pkt = publish_packet(msg.topic, msg.payload)
        with self._lock:
            if self._conn.sock is None:
                self._conn.open()
            try:
                self._conn.sock.sendall(pkt)
            except OSError:
                log.info("MQTT session lost, reconnecting")
                self.counters["reconnects"] = self.counters.get("reconnects", 0) + 1
                self._conn.close()
                self._conn.open()
                self._conn.sock.sendall(pkt)
            self.published += 1
        return True

    def close(self) -> None:
        with self._lock:
            self._conn.close(graceful=True)

    def __enter__(self) -> "MqttPublisher":
        return self.connect()

    def __exit__(self, *exc) -> None:
        self.close()


class MqttSubscriber:
    def __init__(self, host: str = "127.0.0.1", port: int = 1883, client_id: str = "iotbench-sub",
                 keepalive: int = 60, timeout: float = 5.0) -> None:
        self._conn = _Connection(host, port, client_id, keepalive, timeout)
        self._next_id = 1

    def connect(self) -> "MqttSubscriber":
        self._conn.open()
        return self

    def subscribe(self, *topics: str) -> None:
        pid = self._next_id
        self._next_id = self._next_id % 0xFFFF + 1
        self._conn.sock.sendall(subscribe_packet(pid, list(topics)))
        while True:
            ptype, _, body = self._conn.read_packet(self._conn.timeout)
            if ptype == SUBACK:
                (got,) = struct.unpack_from("!H", body)
                if got != pid:
                    raise ProtocolError(f"SUBACK for packet {got}, expected {pid}")
                if any(b == 0x80 for b in body[2:]):
                    raise BackendUnavailable("broker rejected subscription")
                return

    def receive(self, timeout: Optional[float] = None) -> Optional[PubSubMessage]:
        """Next PUBLISH, or None on timeout."""
        try:
            while True:
                ptype, flags, body = self._conn.read_packet(timeout)
                if ptype == PUBLISH:
                    topic, payload = parse_publish(flags, body)
                    return PubSubMessage(topic, payload)
        except socket.timeout:
            return None

    def close(self) -> None:
        self._conn.close(graceful=True)

    def __enter__(self) -> "MqttSubscriber":
        return self.connect()

    def __exit__(self, *exc) -> None:
        self.close()

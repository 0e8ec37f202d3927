"""Binary frame protocol for out-of-process predictor backends.

A backend (an "adapter") receives images and returns saliency maps over a
byte stream, either the stdio of a spawned child process or a local TCP
socket. Every message is one frame:

======  =======  ==========================================
offset  size     field
======  =======  ==========================================
0       4        magic ``b"HSAL"``
4       1        protocol version, currently 1
5       1        role: 1 = coarse request, 2 = refine request
6       4        width, u32 little-endian
10      4        height, u32 little-endian
14      1        channels: 3 = RGB bytes, 1 = float map
15      8        payload length in bytes, u64 little-endian
23      ...      payload, row-major
======  =======  ==========================================

RGB payloads are ``width * height * 3`` bytes; map payloads are
``width * height`` IEEE-754 little-endian float32 values in ``[0, 1]``.
A coarse request is a single RGB frame; a refine request is an RGB frame
followed by a map frame (the guidance). Either way the response is a
single map frame with the same dimensions and role as the request. One
request is in flight per connection at a time, and a peer that sees a
malformed frame simply closes the connection.
"""

from __future__ import annotations

import os
import selectors
import shlex
import socket
import struct
import subprocess
import threading
import time
from dataclasses import dataclass

import numpy as np

from .raster import RasterImage, SaliencyMap

__all__ = [
    "MAGIC",
    "VERSION",
    "ROLE_COARSE",
    "ROLE_REFINE",
    "HEADER_SIZE",
    "Frame",
    "ProtocolError",
    "encode_frame",
    "image_frame",
    "map_frame",
    "parse_header",
    "read_frame",
    "frame_to_image",
    "frame_to_map",
    "SidecarChannel",
]

MAGIC = b"HSAL"
VERSION = 1
ROLE_COARSE = 1
ROLE_REFINE = 2

_HEADER = struct.Struct("<4sBBIIBQ")
HEADER_SIZE = _HEADER.size

_CHANNEL_ITEM_SIZE = {3: 1, 1: 4}  # RGB bytes vs float32 map


class ProtocolError(RuntimeError):
    """A malformed frame or a broken/timed-out transport."""


@dataclass(frozen=True)
class Frame:
    role: int
    width: int
    height: int
    channels: int
    payload: bytes


def encode_frame(frame: Frame) -> bytes:
    expected = frame.width * frame.height * frame.channels * _CHANNEL_ITEM_SIZE[frame.channels]
    if len(frame.payload) != expected:
        raise ProtocolError(
            f"payload of {len(frame.payload)} bytes does not match "
            f"{frame.width}x{frame.height}x{frame.channels}"
        )
    header = _HEADER.pack(
        MAGIC, VERSION, frame.role, frame.width, frame.height, frame.channels, len(frame.payload)
    )
    return header + frame.payload


def image_frame(role: int, image: RasterImage) -> Frame:
    return Frame(role, image.width, image.height, 3, image.data.tobytes())


def map_frame(role: int, saliency: SaliencyMap) -> Frame:
    payload = saliency.data.astype("<f4").tobytes()
    return Frame(role, saliency.width, saliency.height, 1, payload)


def parse_header(header: bytes) -> tuple[int, int, int, int, int]:
    """Validate a 23-byte header; returns (role, width, height, channels, payload_len)."""
    if len(header) != HEADER_SIZE:
        raise ProtocolError(f"short header: {len(header)} bytes")
    magic, version, role, width, height, channels, payload_len = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    if role not in (ROLE_COARSE, ROLE_REFINE):
        raise ProtocolError(f"unknown role {role}")
    if channels not in _CHANNEL_ITEM_SIZE:
        raise ProtocolError(f"unknown channel count {channels}")
    if width < 1 or height < 1:
        raise ProtocolError(f"bad dimensions {width}x{height}")
    expected = width * height * channels * _CHANNEL_ITEM_SIZE[channels]
    if payload_len != expected:
        raise ProtocolError(
            f"payload length {payload_len} does not match {width}x{height}x{channels}"
        )
    return role, width, height, channels, payload_len


def read_frame(read_exact) -> Frame:
    """Read one frame via ``read_exact(n) -> bytes`` (which must return n bytes)."""
    role, width, height, channels, payload_len = parse_header(read_exact(HEADER_SIZE))
    payload = read_exact(payload_len)
    if len(payload) != payload_len:
        raise ProtocolError(f"short payload: {len(payload)} of {payload_len} bytes")
    return Frame(role, width, height, channels, bytes(payload))


def frame_to_image(frame: Frame) -> RasterImage:
    if frame.channels != 3:
        raise ProtocolError(f"expected an RGB frame, got channels={frame.channels}")
    arr = np.frombuffer(frame.payload, dtype=np.uint8).reshape(frame.height, frame.width, 3)
    return RasterImage(arr)


def frame_to_map(frame: Frame) -> SaliencyMap:
    if frame.channels != 1:
        raise ProtocolError(f"expected a map frame, got channels={frame.channels}")
    arr = np.frombuffer(frame.payload, dtype="<f4").reshape(frame.height, frame.width)
    values = arr.astype(np.float64)
    if not np.isfinite(values).all():
        raise ProtocolError("map payload contains non-finite values")
    if values.min() < 0.0 or values.max() > 1.0:
        raise ProtocolError("map payload values outside [0, 1]")
    return SaliencyMap(values)


class _StdioTransport:
    """Spawned child process; frames travel over its stdin/stdout."""

    def __init__(self, argv: list[str]) -> None:
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as err:
            raise ProtocolError(f"failed to spawn adapter {argv!r}: {err}") from err
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)

    def alive(self) -> bool:
        return self._proc.poll() is None

    def send(self, data: bytes) -> None:
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as err:
            raise ProtocolError(f"adapter pipe closed: {err}") from err

    def read_exact(self, n: int, deadline: float) -> bytes:
        chunks = bytearray()
        fd = self._proc.stdout.fileno()
        while len(chunks) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError("timed out waiting for adapter response")
            if not self._selector.select(timeout=remaining):
                continue
            chunk = os.read(fd, n - len(chunks))
            if not chunk:
                raise ProtocolError("adapter closed the stream mid-response")
            chunks.extend(chunk)
        return bytes(chunks)

    def close(self) -> None:
        self._selector.close()
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


class _SocketTransport:
    """Client connection to an adapter listening on a local TCP port."""

    def __init__(self, host: str, port: int, timeout: float) -> None:
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as err:
            raise ProtocolError(f"failed to connect to {host}:{port}: {err}") from err

    def send(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as err:
            raise ProtocolError(f"socket send failed: {err}") from err

    def read_exact(self, n: int, deadline: float) -> bytes:
        chunks = bytearray()
        while len(chunks) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError("timed out waiting for adapter response")
            self._sock.settimeout(remaining)
            try:
                chunk = self._sock.recv(n - len(chunks))
            except socket.timeout as err:
                raise ProtocolError("timed out waiting for adapter response") from err
            except OSError as err:
                raise ProtocolError(f"socket read failed: {err}") from err
            if not chunk:
                raise ProtocolError("adapter closed the connection mid-response")
            chunks.extend(chunk)
        return bytes(chunks)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def _parse_endpoint(endpoint: str) -> tuple[str, int] | list[str]:
    """``HOST:PORT`` becomes a socket target, anything else a command line."""
    head, sep, tail = endpoint.rpartition(":")
    if sep and head and tail.isdigit() and " " not in endpoint and "/" not in head:
        return head, int(tail)
    argv = shlex.split(endpoint)
    if not argv:
        raise ProtocolError("empty adapter endpoint")
    return argv


class SidecarChannel:
    """A serialized request/response channel to one adapter endpoint.

    ``endpoint`` is either a command line to spawn (stdio transport) or a
    ``HOST:PORT`` pair to connect to. The channel is validated at
    construction by the transport setup; requests are serialized by an
    internal lock so only one is ever in flight.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0) -> None:
        if timeout <= 0:
            raise ValueError(f"timeout must be positive, got {timeout}")
        self.endpoint = endpoint
        self.timeout = timeout
        target = _parse_endpoint(endpoint)
        if isinstance(target, tuple):
            self._transport = _SocketTransport(target[0], target[1], timeout)
        else:
            self._transport = _StdioTransport(target)
        self._lock = threading.Lock()

    def request_map(self, frames: list[Frame], width: int, height: int) -> SaliencyMap:
        """Send request frames, await one map frame of the given dimensions."""
        encoded = b"".join(encode_frame(f) for f in frames)
        with self._lock:
            self._transport.send(encoded)
            deadline = time.monotonic() + self.timeout
            response = read_frame(lambda n: self._transport.read_exact(n, deadline))
        if (response.width, response.height) != (width, height):
            raise ProtocolError(
                f"response dimensions {response.width}x{response.height} do not "
                f"match request {width}x{height}"
            )
        return frame_to_map(response)

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> "SidecarChannel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

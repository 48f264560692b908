"""Datagram transports: UDP sockets and a virtual-clock loopback.

The virtual loopback models a fixed-latency clocked pipeline: every datagram
reaches its peer exactly ``one_way_ns(model)`` after it was sent, so a
ping-pong run over it is perfectly isochronous.
"""

from __future__ import annotations

import heapq
import itertools
import random
import select
import socket
import sys
import time
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Protocol, Union

from .errors import (
    BindFailed,
    DatagramTooLarge,
    InvalidModel,
    SendFailed,
    TransportClosed,
)

MAX_DATAGRAM = 65507
_IP_RECVERR = getattr(socket, "IP_RECVERR", 11)

Number = Union[int, float, str, Fraction]


@dataclass(frozen=True, order=True)
class Locator:
    address: bytes
    port: int
    kind: str = "UDPv4"

    def __post_init__(self) -> None:
        if self.kind != "UDPv4":
            raise ValueError(f"unsupported locator kind {self.kind!r}")
        if len(self.address) != 4:
            raise ValueError("UDPv4 locator address must be 4 bytes")
        if not 0 < self.port <= 0xFFFF:
            raise ValueError(f"locator port must be in 1..65535, got {self.port}")

    @classmethod
    def parse(cls, text: str) -> Locator:
        """Parse ``"a.b.c.d:port"``."""
        host, sep, port = text.strip().rpartition(":")
        if not sep or not host:
            raise ValueError(f"expected ADDR:PORT, got {text!r}")
        try:
            return cls(socket.inet_aton(host), int(port))
        except OSError:
            raise ValueError(f"bad IPv4 address in {text!r}") from None

    @property
    def host(self) -> str:
        return socket.inet_ntoa(self.address)

    def sockaddr(self) -> tuple[str, int]:
        return self.host, self.port

    def __str__(self) -> str:
        return f"{self.host}:{self.port}"


class Transport(Protocol):
    locator: Locator

    def send(self, dest: Locator, datagram: bytes) -> None: ...

    def recv(self, max_wait: float) -> tuple[Locator, bytes] | None: ...

    def now_ns(self) -> int: ...

    def close(self) -> None: ...

    @property
    def closed(self) -> bool: ...


# -- UDP --------------------------------------------------------------------

class UdpTransport:
    """A bound, non-blocking UDP socket.

    On Linux the socket asks for ICMP errors, so a send to a port nobody
    listens on shows up as ``refused`` instead of a silent timeout.
    """

    def __init__(self, bind: Locator) -> None:
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self._sock.bind(bind.sockaddr())
        except OSError as exc:
            self._sock.close()
            raise BindFailed(f"cannot bind {bind}: {exc.strerror or exc}") from exc
        self._sock.setblocking(False)
        if sys.platform.startswith("linux"):
            try:
                self._sock.setsockopt(socket.IPPROTO_IP, _IP_RECVERR, 1)
            except OSError:
                pass
        host, port = self._sock.getsockname()
        self.locator = Locator(socket.inet_aton(host), port)
        self._poll = select.poll()
        self._poll.register(self._sock, select.POLLIN | select.POLLERR)
        self._closed = False
        self.refused = 0

    @property
    def closed(self) -> bool:
        return self._closed

    def now_ns(self) -> int:
        return time.monotonic_ns()

    def _drain_errors(self) -> None:
        self.refused += 1
        while True:
            try:
                self._sock.recvmsg(512, 512, socket.MSG_ERRQUEUE)
            except OSError:
                return

    def send(self, dest: Locator, datagram: bytes) -> None:
        if self._closed:
            raise TransportClosed("send on a closed UDP transport")
        if len(datagram) > MAX_DATAGRAM:
            raise DatagramTooLarge(f"{len(datagram)} bytes exceeds the {MAX_DATAGRAM}-byte UDP limit")
        for _ in range(2):
            try:
                self._sock.sendto(datagram, dest.sockaddr())
                return
            except ConnectionRefusedError:
                # stale ICMP error from an earlier datagram; clear it and retry
                self._drain_errors()
            except OSError as exc:
                raise SendFailed(f"sendto {dest}: {exc.strerror or exc}") from exc
        raise SendFailed(f"sendto {dest}: connection refused")

    def recv(self, max_wait: float) -> tuple[Locator, bytes] | None:
        if self._closed:
            raise TransportClosed("recv on a closed UDP transport")
        try:
            data, (host, port) = self._sock.recvfrom(65536)
            return Locator(socket.inet_aton(host), port), data
        except BlockingIOError:
            pass
        except ConnectionRefusedError:
            self._drain_errors()
            return None
        if max_wait <= 0:
            return None
        if not self._poll.poll(max(1, int(max_wait * 1000 + 0.999))):
            return None
        try:
            data, (host, port) = self._sock.recvfrom(65536)
        except BlockingIOError:
            return None
        except ConnectionRefusedError:
            self._drain_errors()
            return None
        return Locator(socket.inet_aton(host), port), data

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._sock.close()

    def __enter__(self) -> UdpTransport:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def udp_open(bind: Locator) -> UdpTransport:
    return UdpTransport(bind)


# -- stage latency model ----------------------------------------------------

def _exact(value: Number) -> Fraction:
    if isinstance(value, float):
        # go through repr so 0.35 means 35/100, not the nearest binary double
        return Fraction(repr(value))
    return Fraction(value)


def _round_half_up(x: Fraction) -> int:
    return int((x + Fraction(1, 2)).__floor__())


@dataclass(frozen=True)
class StageLatencyModel:
    """Per-direction stage latencies (µs) of a clocked datapath.

    Stage order follows the bottom-up layering: UDP/IP, RTPS, ROS 2.
    """

    udpip_us: Fraction
    rtps_us: Fraction
    ros2_us: Fraction
    clock_mhz: Fraction

    def __init__(self, udpip_us: Number, rtps_us: Number, ros2_us: Number, clock_mhz: Number) -> None:
        try:
            values = [_exact(v) for v in (udpip_us, rtps_us, ros2_us, clock_mhz)]
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise InvalidModel(f"stage model values must be numbers: {exc}") from None
        for name, v in zip(("udpip_us", "rtps_us", "ros2_us", "clock_mhz"), values):
            object.__setattr__(self, name, v)
        if min(values[:3]) < 0:
            raise InvalidModel("stage latencies must be non-negative")
        if values[3] <= 0:
            raise InvalidModel("clock_mhz must be positive")

    @classmethod
    def from_round_trip(cls, stages: Sequence[Number], clock_mhz: Number) -> StageLatencyModel:
        """Build a per-direction model from round-trip stage rows (split evenly)."""
        if len(stages) != 3:
            raise InvalidModel(f"expected 3 stage latencies (udpip, rtps, ros2), got {len(stages)}")
        try:
            halves = [_exact(s) / 2 for s in stages]
        except (ValueError, TypeError) as exc:
            raise InvalidModel(f"stage latencies must be numbers: {exc}") from None
        return cls(*halves, clock_mhz)

    @property
    def stages_us(self) -> tuple[Fraction, Fraction, Fraction]:
        return self.udpip_us, self.rtps_us, self.ros2_us

    def stage_cycles(self) -> tuple[int, int, int]:
        """Each stage rounded (half up) to a whole number of clock cycles."""
        return tuple(_round_half_up(s * self.clock_mhz) for s in self.stages_us)  # type: ignore[return-value]

    def one_way_ns(self) -> int:
        cycles = sum(self.stage_cycles())
        return _round_half_up(Fraction(cycles * 1000) / self.clock_mhz)

    def round_trip_ns(self) -> int:
        return 2 * self.one_way_ns()


def one_way_ns(model: StageLatencyModel) -> int:
    return model.one_way_ns()


ZERO_MODEL = StageLatencyModel(0, 0, 0, 1)


# -- virtual loopback -------------------------------------------------------

@dataclass(frozen=True)
class TraceEvent:
    send_ns: int
    deliver_ns: int
    source: Locator
    dest: Locator
    datagram: bytes


class VirtualClock:
    """Shared virtual time with a (time, insertion index) ordered event queue."""

    def __init__(self) -> None:
        self.now_ns = 0
        self._seq = itertools.count()
        self._queues: dict[Locator, list[tuple[int, int, Locator, bytes]]] = {}

    def register(self, where: Locator) -> None:
        self._queues.setdefault(where, [])

    def schedule(self, at_ns: int, source: Locator, dest: Locator, datagram: bytes) -> bool:
        queue = self._queues.get(dest)
        if queue is None:
            return False
        heapq.heappush(queue, (at_ns, next(self._seq), source, datagram))
        return True

    def pending(self, where: Locator) -> int:
        return len(self._queues.get(where, ()))

    def take(self, where: Locator, max_wait_ns: int) -> tuple[Locator, bytes] | None:
        queue = self._queues[where]
        horizon = self.now_ns + max_wait_ns
        if queue and queue[0][0] <= horizon:
            at, _, source, datagram = heapq.heappop(queue)
            if at > self.now_ns:
                self.now_ns = at
            return source, datagram
        self.now_ns = horizon
        return None


class VirtualTransport:
    """One end of a virtual network; all ends share a :class:`VirtualClock`."""

    def __init__(self, clock: VirtualClock, locator: Locator, latency_ns: int,
                 trace: list[TraceEvent] | None = None) -> None:
        self.clock = clock
        self.locator = locator
        self.latency_ns = latency_ns
        self.trace = trace
        self.undeliverable = 0
        self._closed = False
        clock.register(locator)

    @property
    def closed(self) -> bool:
        return self._closed

    def now_ns(self) -> int:
        return self.clock.now_ns

    def send(self, dest: Locator, datagram: bytes) -> None:
        if self._closed:
            raise TransportClosed("send on a closed virtual transport")
        if len(datagram) > MAX_DATAGRAM:
            raise DatagramTooLarge(f"{len(datagram)} bytes exceeds the {MAX_DATAGRAM}-byte UDP limit")
        now = self.clock.now_ns
        at = now + self.latency_ns
        if not self.clock.schedule(at, self.locator, dest, datagram):
            self.undeliverable += 1
            return
        if self.trace is not None:
            self.trace.append(TraceEvent(now, at, self.locator, dest, bytes(datagram)))

    def recv(self, max_wait: float) -> tuple[Locator, bytes] | None:
        if self._closed:
            raise TransportClosed("recv on a closed virtual transport")
        return self.clock.take(self.locator, max(0, round(max_wait * 1e9)))

    def close(self) -> None:
        self._closed = True


def virtual_loopback(
    model: StageLatencyModel, seed: int = 0, *, record_trace: bool = False
) -> tuple[VirtualTransport, VirtualTransport]:
    """Two virtual endpoints joined by a lossless, order-preserving link.

    ``seed`` only picks the endpoints' port numbers; delivery is fully
    determined by the model.
    """
    if not isinstance(model, StageLatencyModel):
        raise InvalidModel(f"expected a StageLatencyModel, got {type(model).__name__}")
    latency = model.one_way_ns()
    rng = random.Random(seed)
    port = 7400 + 2 * rng.randrange(20000)
    clock = VirtualClock()
    trace: list[TraceEvent] | None = [] if record_trace else None
    a = VirtualTransport(clock, Locator(bytes((10, 0, 0, 1)), port), latency, trace)
    b = VirtualTransport(clock, Locator(bytes((10, 0, 0, 2)), port + 1), latency, trace)
    return a, b


"""Node / publisher / subscription layer mapped onto RTPS endpoints.

No executor: :meth:`Node.spin_once` is an explicit pull-style driver.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .cdr import Endianness, PingPayload, deserialize_ping_payload, serialize_ping_payload
from .errors import (
    DuplicateEntity,
    EmptyTopic,
    LabError,
    TransportClosed,
    TransportError,
    UnsupportedQos,
)
from .rtps import (
    BestEffortReader,
    BestEffortWriter,
    EntityId,
    Guid,
    GuidPrefix,
    decode_message,
    encode_message,
)
from .transport import Locator, Transport

LOCALHOST_ID = 0x7F000001

LAYERS = ("ros2", "rtps", "transport")


class Qos(enum.Enum):
    BEST_EFFORT = "best_effort"


def mangle_topic(ros_topic: str) -> str:
    """Map a ROS 2 topic name to its DDS topic name (``/ping`` -> ``rt/ping``)."""
    name = ros_topic[1:] if ros_topic.startswith("/") else ros_topic
    if not name:
        raise EmptyTopic(f"topic name {ros_topic!r} is empty")
    return "rt/" + name


class LayerProbe:
    """Accumulates time spent per layer (ns) on the send and receive paths."""

    def __init__(self) -> None:
        self.total_ns = {f"{d}.{layer}": 0 for d in ("send", "recv") for layer in LAYERS}
        self.count = {"send": 0, "recv": 0}

    def add(self, direction: str, ros2: int, rtps: int, transport: int) -> None:
        t = self.total_ns
        t[direction + ".ros2"] += ros2
        t[direction + ".rtps"] += rtps
        t[direction + ".transport"] += transport
        self.count[direction] += 1

    def mean_ns(self) -> dict[str, float]:
        out = {}
        for key, total in self.total_ns.items():
            n = self.count[key.split(".")[0]]
            out[key] = total / n if n else 0.0
        return out


@dataclass
class NodeDiagnostics:
    received: int = 0
    malformed: int = 0
    transport_errors: int = 0


class Publisher:
    def __init__(self, node: Node, topic: str, writer: BestEffortWriter) -> None:
        self.node = node
        self.topic = topic
        self.writer = writer

    @property
    def guid(self) -> Guid:
        return self.writer.guid

    @property
    def publish_count(self) -> int:
        return self.writer.next_sequence_number - 1

    def publish(self, payload: PingPayload) -> None:
        """Serialize, frame and send one message; raises TransportClosed."""
        node = self.node
        transport = node.transport
        if transport.closed:
            raise TransportClosed(f"publisher on {self.topic!r}: transport is closed")
        probe = node.probe
        if probe is None:
            data = serialize_ping_payload(payload, node.endianness)
            msg, dests = self.writer.produce(data, transport.now_ns())
            datagram = encode_message(msg)
            for dest in dests:
                transport.send(dest, datagram)
            return
        t0 = time.perf_counter_ns()
        data = serialize_ping_payload(payload, node.endianness)
        self._send(data, t0)

    def publish_serialized(self, data: bytes) -> None:
        """Publish an already CDR-encapsulated payload as-is."""
        transport = self.node.transport
        if transport.closed:
            raise TransportClosed(f"publisher on {self.topic!r}: transport is closed")
        if self.node.probe is None:
            msg, dests = self.writer.produce(data, transport.now_ns())
            datagram = encode_message(msg)
            for dest in dests:
                transport.send(dest, datagram)
            return
        self._send(data, time.perf_counter_ns())

    def _send(self, data: bytes, t0: int) -> None:
        transport = self.node.transport
        probe = self.node.probe
        t1 = time.perf_counter_ns()
        msg, dests = self.writer.produce(data, transport.now_ns())
        datagram = encode_message(msg)
        t2 = time.perf_counter_ns()
        for dest in dests:
            transport.send(dest, datagram)
        t3 = time.perf_counter_ns()
        probe.add("send", t1 - t0, t2 - t1, t3 - t2)


class Subscription:
    """Delivers PingPayloads to ``callback`` in sequence order per writer.

    With ``raw`` set the callback gets the serialized payload bytes instead
    (still validated as a ping payload first).
    """

    def __init__(self, node: Node, topic: str, reader: BestEffortReader,
                 callback: Callable[[Any], object], raw: bool = False) -> None:
        self.node = node
        self.topic = topic
        self.reader = reader
        self.callback = callback
        self.raw = raw

    @property
    def guid(self) -> Guid:
        return self.reader.guid


@dataclass
class StaticPeers:
    """Static endpoint matching, standing in for discovery."""

    destinations: dict[str, list[Locator]] = field(default_factory=dict)
    default_destinations: list[Locator] = field(default_factory=list)
    matched_writers: dict[str, list[Guid]] = field(default_factory=dict)

    def destinations_for(self, topic: str) -> list[Locator]:
        return self.destinations.get(mangle_topic(topic), self.default_destinations)

    def writers_for(self, topic: str) -> list[Guid]:
        return self.matched_writers.get(mangle_topic(topic), [])


class Node:
    """A participant owning one transport and any number of endpoints."""

    def __init__(
        self,
        name: str,
        transport: Transport,
        *,
        host_id: int = LOCALHOST_ID,
        participant_id: int = 1,
        prefix_counter: int | None = None,
        peers: StaticPeers | None = None,
        endianness: Endianness = Endianness.LITTLE,
        probe: LayerProbe | None = None,
    ) -> None:
        if not name or any(c.isspace() for c in name):
            raise ValueError(f"node name must be non-empty with no whitespace, got {name!r}")
        self.name = name
        self.transport = transport
        self.guid_prefix = GuidPrefix.make(host_id, participant_id, prefix_counter)
        self.peers = peers or StaticPeers()
        self.endianness = endianness
        self.probe = probe
        self.publishers: dict[str, Publisher] = {}
        self.subscriptions: dict[str, Subscription] = {}
        self.diagnostics = NodeDiagnostics()
        self._writer_keys = 0
        self._reader_keys = 0

    def writer_guid(self, index: int) -> Guid:
        """GUID of the ``index``-th publisher this node creates (1-based)."""
        return Guid(self.guid_prefix, EntityId.user_writer(index))

    def create_publisher(
        self,
        topic: str,
        destinations: Iterable[Locator] | None = None,
        qos: Qos = Qos.BEST_EFFORT,
    ) -> Publisher:
        dds_topic = mangle_topic(topic)
        if qos is not Qos.BEST_EFFORT:
            raise UnsupportedQos(f"only best-effort QoS is supported, got {qos!r}")
        if dds_topic in self.publishers:
            raise DuplicateEntity(f"node {self.name!r} already publishes {dds_topic!r}")
        dests = list(destinations) if destinations is not None else self.peers.destinations_for(topic)
        self._writer_keys += 1
        writer = BestEffortWriter(self.writer_guid(self._writer_keys), dests)
        pub = Publisher(self, dds_topic, writer)
        self.publishers[dds_topic] = pub
        return pub

    def create_subscription(
        self,
        topic: str,
        callback: Callable[[Any], object],
        matched_writers: Iterable[Guid] | None = None,
        qos: Qos = Qos.BEST_EFFORT,
        *,
        raw: bool = False,
    ) -> Subscription:
        dds_topic = mangle_topic(topic)
        if qos is not Qos.BEST_EFFORT:
            raise UnsupportedQos(f"only best-effort QoS is supported, got {qos!r}")
        if dds_topic in self.subscriptions:
            raise DuplicateEntity(f"node {self.name!r} already subscribes to {dds_topic!r}")
        writers = list(matched_writers) if matched_writers is not None else self.peers.writers_for(topic)
        self._reader_keys += 1
        reader = BestEffortReader(Guid(self.guid_prefix, EntityId.user_reader(self._reader_keys)), writers)
        sub = Subscription(self, dds_topic, reader, callback, raw)
        self.subscriptions[dds_topic] = sub
        return sub

    def spin_once(self, max_wait: float) -> int:
        """Drain pending datagrams, run callbacks; returns callbacks invoked."""
        transport = self.transport
        invoked = 0
        wait = max_wait
        while True:
            try:
                item = transport.recv(wait)
            except TransportError:
                self.diagnostics.transport_errors += 1
                return invoked
            if item is None:
                return invoked
            wait = 0.0
            invoked += self._dispatch(item[1])

    def _dispatch(self, datagram: bytes) -> int:
        self.diagnostics.received += 1
        probe = self.probe
        t0 = time.perf_counter_ns() if probe else 0
        try:
            msg = decode_message(datagram)
        except (LabError, ValueError):
            self.diagnostics.malformed += 1
            return 0
        invoked = 0
        rtps_ns = ros2_ns = 0
        for sub in self.subscriptions.values():
            samples = sub.reader.consume(msg)
            if probe:
                t1 = time.perf_counter_ns()
                rtps_ns += t1 - t0
                t0 = t1
            for sample in samples:
                try:
                    payload = deserialize_ping_payload(sample.payload)
                except LabError:
                    sub.reader.note_malformed()
                    continue
                sub.callback(sample.payload if sub.raw else payload)
                invoked += 1
            if probe:
                t1 = time.perf_counter_ns()
                ros2_ns += t1 - t0
                t0 = t1
        if probe:
            probe.add("recv", ros2_ns, rtps_ns, 0)
        return invoked

"""Ping-pong round-trip harness and the echo ("pong") side.

The initiator publishes a PingPayload on the ping topic, the echo republishes
the serialized payload unchanged on the pong topic, and the initiator takes
RTT = receive time - send timestamp on a single clock. Timed-out or
mismatched replies are drops, never latency values.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from decimal import Decimal
from fractions import Fraction
from typing import Any

from ..cdr import PingPayload
from ..errors import PeerUnreachable
from ..ros2 import LOCALHOST_ID, LayerProbe, Node
from ..rtps import EntityId, Guid, GuidPrefix
from ..transport import Locator, StageLatencyModel, UdpTransport, virtual_loopback

log = logging.getLogger(__name__)

INITIATOR_PARTICIPANT = 1
ECHO_PARTICIPANT = 2

# hardware pipeline rows, round trip: UDP/IP, RTPS, ROS 2 (µs) at 156 MHz
HARDWARE_STAGES_US = ("0.7", "2.3", "2.0")
HARDWARE_CLOCK_MHZ = "156"


def _decimal_str(x: Fraction) -> str:
    text = str(Decimal(x.numerator) / Decimal(x.denominator))
    return text if x == Fraction(text) else str(x)


def hardware_model() -> StageLatencyModel:
    return StageLatencyModel.from_round_trip(HARDWARE_STAGES_US, HARDWARE_CLOCK_MHZ)


@dataclass
class BenchConfig:
    sample_count: int = 1_000_000
    warmup_count: int = 10_000
    payload_padding: int = 0
    transport: str = "udp"
    model: StageLatencyModel = field(default_factory=hardware_model)
    bucket_ns: int = 100
    timeout_s: float = 1.0
    max_consecutive_timeouts: int = 100
    bind: Locator = field(default_factory=lambda: Locator.parse("127.0.0.1:7411"))
    peer: Locator = field(default_factory=lambda: Locator.parse("127.0.0.1:7412"))
    host_id: int = LOCALHOST_ID
    peer_host_id: int = LOCALHOST_ID
    ping_topic: str = "/ping"
    pong_topic: str = "/pong"
    seed: int = 0
    probe_layers: bool = False
    matched_writers: tuple[Guid, ...] | None = None
    node_name: str | None = None

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be >= 1, got {self.sample_count}")
        if self.warmup_count < 0:
            raise ValueError(f"warmup_count must be >= 0, got {self.warmup_count}")
        if self.payload_padding < 0:
            raise ValueError(f"payload_padding must be >= 0, got {self.payload_padding}")
        if self.transport not in ("udp", "virtual"):
            raise ValueError(f"transport must be 'udp' or 'virtual', got {self.transport!r}")
        if self.bucket_ns <= 0:
            raise ValueError(f"bucket_ns must be positive, got {self.bucket_ns}")
        if self.timeout_s <= 0:
            raise ValueError(f"timeout_s must be positive, got {self.timeout_s}")

    def describe(self) -> dict[str, Any]:
        """Flat, JSON-friendly echo of every field."""
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "model":
                value = {
                    "stages_us": [_decimal_str(s) for s in value.stages_us],
                    "clock_mhz": _decimal_str(value.clock_mhz),
                    "one_way_ns": value.one_way_ns(),
                }
            elif isinstance(value, Locator):
                value = str(value)
            elif f.name in ("host_id", "peer_host_id"):
                value = f"0x{value:08x}"
            elif f.name == "matched_writers" and value is not None:
                value = [str(g) for g in value]
            out[f.name] = value
        return out


@dataclass
class SampleSet:
    samples: list[int]
    config: BenchConfig
    started_at: str = ""
    ended_at: str = ""
    dropped: int = 0
    late: int = 0
    warmup_discarded: int = 0
    layer_ns: dict[str, float] | None = None

    def __len__(self) -> int:
        return len(self.samples)

    def metadata(self) -> dict[str, Any]:
        meta: dict[str, Any] = {
            "config": self.config.describe(),
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "samples": len(self.samples),
            "dropped": self.dropped,
            "late": self.late,
            "warmup_discarded": self.warmup_discarded,
        }
        if self.layer_ns is not None:
            meta["layer_mean_ns"] = self.layer_ns
        return meta


def _prefix(host_id: int, participant: int) -> GuidPrefix:
    return GuidPrefix.make(host_id, participant, 0)


def initiator_writer_guid(host_id: int = LOCALHOST_ID) -> Guid:
    return Guid(_prefix(host_id, INITIATOR_PARTICIPANT), EntityId.user_writer(1))


def echo_writer_guid(host_id: int = LOCALHOST_ID) -> Guid:
    return Guid(_prefix(host_id, ECHO_PARTICIPANT), EntityId.user_writer(1))


@dataclass
class EchoStats:
    echoed: int = 0
    malformed: int = 0


def make_echo_node(transport, config: BenchConfig, peer: Locator | None = None,
                   stats: EchoStats | None = None) -> Node:
    """Build the echo participant: pong publisher plus raw-forwarding ping subscription."""
    stats = stats if stats is not None else EchoStats()
    node = Node(config.node_name or "pingpong_echo", transport, host_id=config.host_id,
                participant_id=ECHO_PARTICIPANT, prefix_counter=0)
    pong = node.create_publisher(config.pong_topic, [peer or config.peer])

    def forward(serialized: bytes) -> None:
        pong.publish_serialized(serialized)
        stats.echoed += 1

    writers = config.matched_writers or [initiator_writer_guid(config.peer_host_id)]
    node.create_subscription(config.ping_topic, forward, writers, raw=True)
    return node


def run_echo(config: BenchConfig, stop: threading.Event | None = None,
             transport: UdpTransport | None = None, ready: threading.Event | None = None) -> EchoStats:
    """Serve pings until ``stop`` is set (forever if it is None)."""
    own = transport is None
    transport = transport or UdpTransport(config.bind)
    stats = EchoStats()
    try:
        node = make_echo_node(transport, config, stats=stats)
        log.info("echo listening on %s, replying to %s", transport.locator, config.peer)
        if ready is not None:
            ready.set()
        while stop is None or not stop.is_set():
            node.spin_once(0.05)
            stats.malformed = node.diagnostics.malformed + sum(
                s.reader.counters.malformed for s in node.subscriptions.values())
    finally:
        if own:
            transport.close()
    return stats


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_pingpong(config: BenchConfig) -> SampleSet:
    """Run ``warmup_count + sample_count`` ping-pong exchanges and collect RTTs (ns)."""
    if config.transport == "virtual":
        mine, theirs = virtual_loopback(config.model, config.seed)
        peer_locator = theirs.locator
        echo_node = make_echo_node(theirs, config, peer=mine.locator)
    else:
        mine = UdpTransport(config.bind)
        peer_locator = config.peer
        echo_node = None

    probe = LayerProbe() if config.probe_layers else None
    node = Node(config.node_name or "pingpong_initiator", mine, host_id=config.host_id,
                participant_id=INITIATOR_PARTICIPANT, prefix_counter=0, probe=probe)
    ping = node.create_publisher(config.ping_topic, [peer_locator])

    expected = -1
    rtt = -1
    late = 0

    def on_pong(p: PingPayload) -> None:
        nonlocal rtt, late
        if p.sequence == expected and rtt < 0:
            rtt = mine.now_ns() - p.send_timestamp_ns
        else:
            late += 1

    writers = config.matched_writers or [echo_writer_guid(config.peer_host_id)]
    node.create_subscription(config.pong_topic, on_pong, writers)

    padding = bytes(config.payload_padding)
    timeout_ns = int(config.timeout_s * 1e9)
    samples: list[int] = []
    dropped = 0
    consecutive = 0
    started = _now_iso()
    try:
        for i in range(config.warmup_count + config.sample_count):
            expected, rtt = i, -1
            refused_before = getattr(mine, "refused", 0)
            send_ns = mine.now_ns()
            ping.publish(PingPayload(i, send_ns, padding))
            if echo_node is not None:
                echo_node.spin_once(config.timeout_s)
            deadline = send_ns + timeout_ns
            while rtt < 0:
                now = mine.now_ns()
                if now >= deadline or getattr(mine, "refused", 0) != refused_before:
                    break
                node.spin_once((deadline - now) / 1e9)
            if rtt < 0:
                consecutive += 1
                if i >= config.warmup_count:
                    dropped += 1
                if consecutive >= config.max_consecutive_timeouts:
                    raise PeerUnreachable(
                        f"no echo from {peer_locator} for {consecutive} consecutive samples"
                    )
                continue
            consecutive = 0
            if i >= config.warmup_count:
                samples.append(rtt)
    finally:
        mine.close()
    if consecutive == config.warmup_count + config.sample_count:
        raise PeerUnreachable(f"no echo from {peer_locator} in {consecutive} attempts")
    return SampleSet(
        samples=samples,
        config=config,
        started_at=started,
        ended_at=_now_iso(),
        dropped=dropped,
        late=late,
        warmup_discarded=config.warmup_count,
        layer_ns=probe.mean_ns() if probe else None,
    )


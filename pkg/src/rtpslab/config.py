"""Key/value configuration files shared by the CLI and the harness.

Format: one ``key = value`` per line, ``#`` starts a comment::

    # initiator side
    node = pingpong_initiator
    samples = 100000
    warmup = 10000
    padding = 44
    transport = udp
    bind = 127.0.0.1:7411
    peer = 127.0.0.1:7412
    matched_writers = 7f000001000000020000000000000103

Lists (``peer``, ``stages``, ``matched_writers``) are comma separated.
"""

from __future__ import annotations

import configparser
import socket
import struct
from pathlib import Path
from typing import Any, Mapping

from .lab.harness import HARDWARE_CLOCK_MHZ, HARDWARE_STAGES_US, BenchConfig
from .ros2 import StaticPeers, mangle_topic
from .rtps import Guid
from .transport import InvalidModel, Locator, StageLatencyModel

_SECTION = "rtpslab"

KEYS = {
    "node", "samples", "warmup", "padding", "transport", "stages", "clock_mhz",
    "bind", "peer", "format", "out", "timeout", "bucket_ns", "seed", "host_id",
    "peer_host_id", "ping_topic", "pong_topic", "probe_layers", "matched_writers",
    "max_consecutive_timeouts", "publish", "subscribe",
}


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as exc:
        raise ConfigError(f"bad config: {exc}") from None
    values = dict(parser[_SECTION])
    unknown = sorted(set(values) - KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return values


def read_config(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text)


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def parse_host_id(value: str | int) -> int:
    """Accept ``0x7f000001``, ``2130706433`` or a dotted quad."""
    if isinstance(value, int):
        return value
    value = value.strip()
    if value.count(".") == 3:
        return struct.unpack(">I", socket.inet_aton(value))[0]
    return int(value, 0)


def parse_bool(value: str | bool) -> bool:
    if isinstance(value, bool):
        return value
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def parse_model(stages: str | None, clock_mhz: str | None) -> StageLatencyModel:
    """Round-trip stage rows (UDP/IP, RTPS, ROS 2 in µs) plus clock -> per-direction model."""
    rows = _split(stages) if stages else list(HARDWARE_STAGES_US)
    try:
        return StageLatencyModel.from_round_trip(rows, clock_mhz or HARDWARE_CLOCK_MHZ)
    except InvalidModel as exc:
        raise ConfigError(str(exc)) from None


def bench_config(values: Mapping[str, Any]) -> BenchConfig:
    """Build a BenchConfig from config-file / flag values (all keys optional)."""
    kwargs: dict[str, Any] = {}
    try:
        for key, field_name, conv in (
            ("samples", "sample_count", int),
            ("warmup", "warmup_count", int),
            ("padding", "payload_padding", int),
            ("transport", "transport", str),
            ("bucket_ns", "bucket_ns", int),
            ("timeout", "timeout_s", float),
            ("max_consecutive_timeouts", "max_consecutive_timeouts", int),
            ("bind", "bind", Locator.parse),
            ("peer", "peer", lambda v: Locator.parse(_split(v)[0])),
            ("host_id", "host_id", parse_host_id),
            ("peer_host_id", "peer_host_id", parse_host_id),
            ("ping_topic", "ping_topic", str),
            ("pong_topic", "pong_topic", str),
            ("seed", "seed", int),
            ("probe_layers", "probe_layers", parse_bool),
        ):
            if values.get(key) is not None:
                kwargs[field_name] = conv(values[key])
        if values.get("matched_writers"):
            kwargs["matched_writers"] = tuple(Guid.parse(g) for g in _split(values["matched_writers"]))
        if values.get("node"):
            kwargs["node_name"] = values["node"]
        if values.get("stages") is not None or values.get("clock_mhz") is not None:
            kwargs["model"] = parse_model(values.get("stages"), values.get("clock_mhz"))
        for topic in ("ping_topic", "pong_topic"):
            if topic in kwargs:
                mangle_topic(kwargs[topic])
        return BenchConfig(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def static_peers(values: Mapping[str, Any]) -> StaticPeers:
    """Static matching for a node: destinations for ``publish``, writers for ``subscribe``."""
    try:
        dests = [Locator.parse(p) for p in _split(values.get("peer") or "")]
        writers = [Guid.parse(g) for g in _split(values.get("matched_writers") or "")]
        peers = StaticPeers(default_destinations=dests)
        for topic in _split(values.get("publish") or ""):
            peers.destinations[mangle_topic(topic)] = dests
        for topic in _split(values.get("subscribe") or ""):
            peers.matched_writers[mangle_topic(topic)] = writers
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return peers

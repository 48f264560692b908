import threading

import pytest

from rtpslab.cdr import PingPayload, serialize_ping_payload
from rtpslab.config import ConfigError, bench_config, parse_config
from rtpslab.errors import BindFailed, PeerUnreachable
from rtpslab.lab.harness import (
    BenchConfig,
    echo_writer_guid,
    hardware_model,
    initiator_writer_guid,
    run_echo,
    run_pingpong,
)
from rtpslab.lab.stats import compute_stats
from rtpslab.ros2 import Node
from rtpslab.transport import Locator, StageLatencyModel, UdpTransport


def test_hardware_model_round_trip():
    assert hardware_model().round_trip_ns() == 5000


def test_virtual_run_is_isochronous():
    result = run_pingpong(BenchConfig(sample_count=500, warmup_count=20, transport="virtual"))
    assert len(result) == 500 and result.dropped == 0
    assert set(result.samples) == {5000}
    stats = compute_stats(result)
    assert stats.isochronous and stats.max == stats.mean == stats.min == 5000
    assert result.warmup_discarded == 20


def test_virtual_zero_model_single_sample():
    cfg = BenchConfig(sample_count=1, warmup_count=0, transport="virtual",
                      model=StageLatencyModel(0, 0, 0, 156))
    assert run_pingpong(cfg).samples == [0]


def test_virtual_with_padding_and_probe():
    cfg = BenchConfig(sample_count=50, warmup_count=0, transport="virtual",
                      payload_padding=333, probe_layers=True)
    result = run_pingpong(cfg)
    assert set(result.samples) == {5000}
    assert set(result.layer_ns) >= {"send.rtps", "recv.ros2"}
    assert result.metadata()["layer_mean_ns"] == result.layer_ns


def test_metadata_echoes_config():
    cfg = BenchConfig(sample_count=3, warmup_count=1, transport="virtual", seed=4)
    meta = run_pingpong(cfg).metadata()
    assert meta["config"]["sample_count"] == 3
    assert meta["config"]["model"] == {"stages_us": ["0.35", "1.15", "1"], "clock_mhz": "156",
                                       "one_way_ns": 2500}
    assert meta["config"]["seed"] == 4
    assert set(meta) >= {"started_at", "ended_at", "dropped", "late", "warmup_discarded"}


@pytest.mark.parametrize("kw", [dict(sample_count=0), dict(warmup_count=-1), dict(transport="tcp"),
                                dict(bucket_ns=0), dict(payload_padding=-1), dict(timeout_s=0)])
def test_bench_config_validation(kw):
    with pytest.raises(ValueError):
        BenchConfig(**kw)


def test_udp_peer_down(udp_ports):
    a, b = udp_ports
    cfg = BenchConfig(sample_count=5, warmup_count=0, bind=Locator.parse(f"127.0.0.1:{a}"),
                      peer=Locator.parse(f"127.0.0.1:{b}"), timeout_s=0.02, max_consecutive_timeouts=3)
    with pytest.raises(PeerUnreachable):
        run_pingpong(cfg)


def _echo_thread(cfg):
    stop, ready = threading.Event(), threading.Event()
    out = {}
    t = threading.Thread(target=lambda: out.setdefault("stats", run_echo(cfg, stop, ready=ready)), daemon=True)
    t.start()
    assert ready.wait(5)
    return stop, t, out


def test_udp_round_trip_with_echo_thread(udp_ports):
    a, b = udp_ports
    ping_loc, echo_loc = Locator.parse(f"127.0.0.1:{a}"), Locator.parse(f"127.0.0.1:{b}")
    stop, t, out = _echo_thread(BenchConfig(bind=echo_loc, peer=ping_loc))
    try:
        result = run_pingpong(BenchConfig(sample_count=300, warmup_count=10, bind=ping_loc, peer=echo_loc))
    finally:
        stop.set()
        t.join(5)
    assert len(result) + result.dropped == 300
    assert result.dropped <= 3
    assert all(s > 0 for s in result.samples)
    s = compute_stats(result)
    assert s.min <= s.p50 <= s.p99 <= s.p999 <= s.max
    assert out["stats"].echoed >= 300


def test_echo_is_bit_identical_and_survives_garbage(udp_ports):
    a, b = udp_ports
    ping_loc, echo_loc = Locator.parse(f"127.0.0.1:{a}"), Locator.parse(f"127.0.0.1:{b}")
    stop, t, out = _echo_thread(BenchConfig(bind=echo_loc, peer=ping_loc))
    got = []
    with UdpTransport(ping_loc) as tr:
        node = Node("client", tr, participant_id=1, prefix_counter=0)
        pub = node.create_publisher("/ping", [echo_loc])
        assert pub.guid == initiator_writer_guid()
        node.create_subscription("/pong", got.append, [echo_writer_guid()], raw=True)
        tr.send(echo_loc, b"not rtps at all")
        sent = [PingPayload(k, 1234 + k, b"abc" * k) for k in range(5)]
        for p in sent:
            pub.publish(p)
        for _ in range(50):
            node.spin_once(0.05)
            if len(got) == 5:
                break
    stop.set()
    t.join(5)
    assert got == [serialize_ping_payload(p) for p in sent]
    assert out["stats"].malformed == 1
    assert out["stats"].echoed == 5


def test_echo_no_traffic_no_output(udp_ports):
    a, b = udp_ports
    ping_loc, echo_loc = Locator.parse(f"127.0.0.1:{a}"), Locator.parse(f"127.0.0.1:{b}")
    with UdpTransport(ping_loc) as listener:
        stop, t, out = _echo_thread(BenchConfig(bind=echo_loc, peer=ping_loc))
        assert listener.recv(0.2) is None
        stop.set()
        t.join(5)
    assert out["stats"].echoed == 0


def test_echo_bind_failed(udp_ports):
    loc = Locator.parse(f"127.0.0.1:{udp_ports[0]}")
    with UdpTransport(loc):
        with pytest.raises(BindFailed):
            run_echo(BenchConfig(bind=loc), threading.Event())


# -- config files ---------------------------------------------------------------

def test_config_file_to_bench_config():
    values = parse_config("""
# comment
samples = 42
warmup = 0
transport = virtual
stages = 0.7, 2.3, 2.0
clock_mhz = 156
padding = 8
""")
    cfg = bench_config(values)
    assert (cfg.sample_count, cfg.warmup_count, cfg.transport, cfg.payload_padding) == (42, 0, "virtual", 8)
    assert cfg.model.one_way_ns() == 2500


@pytest.mark.parametrize("text", ["bogus = 1", "samples = many", "samples"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        bench_config(parse_config(text))

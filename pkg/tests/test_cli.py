import json
import subprocess
import sys

import pytest

from rtpslab.cli import main


def run(capsysbinary, *argv):
    code = main(list(argv))
    out, err = capsysbinary.readouterr()
    return code, out.decode(), err.decode()


def test_tables(capsysbinary):
    code, out, _ = run(capsysbinary, "tables")
    assert code == 0
    for needle in ("1044.000 (208×)", "314.000 (62×)", "367.000 (73×) [printed 369]",
                   "warning", "336750.000 (30613×)", "(543×)"):
        assert needle in out


def test_tables_bytewise_stable():
    cmd = [sys.executable, "-m", "rtpslab", "tables", "--format", "csv"]
    assert subprocess.run(cmd, capture_output=True).stdout == subprocess.run(cmd, capture_output=True).stdout


def test_model(capsysbinary):
    code, out, _ = run(capsysbinary, "model", "--stages", "0.7,2.3,2.0", "--clock-mhz", "156")
    assert code == 0
    assert "Total in us | 5.000" in out
    assert "2500 ns" in out
    code, out, _ = run(capsysbinary, "model", "--format", "json")
    doc = json.loads(out)
    assert doc["total_us"] == 5.0 and doc["one_way_ns"] == 2500


def test_model_invalid(capsysbinary):
    code, _, err = run(capsysbinary, "model", "--stages", "1,2", "--clock-mhz", "156")
    assert code == 1 and "usage" in err


def test_ping_virtual_json(capsysbinary, tmp_path):
    hist = tmp_path / "h.csv"
    code, out, _ = run(capsysbinary, "ping", "--transport", "virtual", "--samples", "100",
                       "--warmup", "5", "--format", "json", "--histogram-csv", str(hist),
                       "--node", "pinger", "--ping-topic", "/p", "--pong-topic", "/q")
    assert code == 0
    doc = json.loads(out)
    assert doc["stats"]["min_ns"] == doc["stats"]["max_ns"] == 5000
    cfg = doc["metadata"]["config"]
    assert (cfg["sample_count"], cfg["warmup_count"], cfg["node_name"]) == (100, 5, "pinger")
    assert (cfg["ping_topic"], cfg["pong_topic"]) == ("/p", "/q")
    assert hist.read_text() == "bucket_start_ns,count\n5000,100\n"


def test_ping_config_file_and_out(capsysbinary, tmp_path):
    conf = tmp_path / "bench.conf"
    conf.write_text("transport = virtual\nsamples = 20\nwarmup = 0\nstages = 0,0,0\n")
    out_path = tmp_path / "r.csv"
    code, out, _ = run(capsysbinary, "ping", "--config", str(conf), "--samples", "7",
                       "--format", "csv", "--out", str(out_path))
    assert code == 0 and out == ""
    text = out_path.read_text()
    assert "count,7" in text and "min_ns,0" in text


@pytest.mark.parametrize("argv", [
    ["ping", "--transport", "udp", "--stages", "1,2,3"],
    ["ping", "--transport", "virtual", "--peer", "127.0.0.1:9"],
    ["echo", "--transport", "virtual"],
    ["ping", "--samples", "x"],
    ["ping", "--samples", "0", "--transport", "virtual"],
    ["bogus"],
    [],
])
def test_usage_errors(capsysbinary, argv):
    code, _, err = run(capsysbinary, *argv)
    assert code == 1
    assert "usage:" in err


def test_ping_peer_unreachable(capsysbinary, udp_ports):
    a, b = udp_ports
    code, _, err = run(capsysbinary, "ping", "--bind", f"127.0.0.1:{a}", "--peer", f"127.0.0.1:{b}",
                       "--samples", "5", "--warmup", "0", "--timeout", "0.05")
    assert code == 2
    assert "PeerUnreachable" in err


def test_report_convert(capsysbinary, tmp_path):
    saved = tmp_path / "t.json"
    assert main(["tables", "--format", "json", "--out", str(saved)]) == 0
    code, out, _ = run(capsysbinary, "report-convert", str(saved), "--format", "text")
    assert code == 0
    _, direct, _ = run(capsysbinary, "tables")
    assert out == direct
    code, _, err = run(capsysbinary, "report-convert", str(tmp_path / "missing.json"))
    assert code == 1


def test_echo_and_ping_processes(udp_ports):
    a, b = udp_ports
    echo = subprocess.Popen([sys.executable, "-m", "rtpslab", "echo", "--bind", f"127.0.0.1:{b}",
                             "--peer", f"127.0.0.1:{a}"], stderr=subprocess.PIPE, text=True)
    try:
        assert "echo listening" in echo.stderr.readline()
        res = subprocess.run([sys.executable, "-m", "rtpslab", "ping", "--bind", f"127.0.0.1:{a}",
                              "--peer", f"127.0.0.1:{b}", "--samples", "200", "--warmup", "10",
                              "--format", "json"], capture_output=True, timeout=60)
    finally:
        echo.terminate()
        echo.wait(10)
    assert res.returncode == 0, res.stderr
    doc = json.loads(res.stdout)
    assert doc["metadata"]["samples"] + doc["metadata"]["dropped"] == 200
    assert echo.returncode == 0

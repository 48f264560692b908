from __future__ import annotations

import socket
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def load_hex(name: str) -> bytes:
    """Read a hex-dump fixture: whitespace-separated hex, ``#`` comments."""
    lines = (FIXTURES / name).read_text().splitlines()
    return bytes.fromhex("".join(line.split("#", 1)[0] for line in lines))


def free_udp_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture
def hexfix():
    return load_hex


@pytest.fixture
def udp_ports():
    return free_udp_port(), free_udp_port()

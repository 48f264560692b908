"""Latency laboratory: ping-pong harness, statistics, tables and reports."""

"""Brute-force reference for best-effort reader accounting.

Replays (writer, sequence) arrivals keeping the full history per writer and
derives deliveries, losses and drops without any incremental state machine.
"""

from __future__ import annotations


def replay(arrivals, matched):
    """Return (delivered list, lost per writer, dropped count)."""
    history: dict = {}
    delivered = []
    dropped = 0
    for writer, sn in arrivals:
        if writer not in matched:
            continue
        seen = history.setdefault(writer, [])
        if seen and sn <= max(seen):
            dropped += 1
            continue
        seen.append(sn)
        delivered.append((writer, sn))
    # everything below the highest delivered number that never got delivered is lost
    lost = {w: max(s) - len(s) for w, s in history.items()}
    return delivered, lost, dropped

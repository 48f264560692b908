"""Recompute the published comparison tables from their raw inputs.

The inputs ship as ``rtpslab/data/published_inputs.json``; printed totals and
ratios are kept next to the recomputed ones so disagreements are visible.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from decimal import Decimal
from importlib import resources
from typing import Any

from ..errors import ConsistencyWarning
from .tables import (
    ComparisonRow,
    comparison_table,
    efficiency_ratio,
    energy_metrics,
    floor_ratio,
    stage_total,
    to_decimal,
)


def load_published_inputs() -> dict[str, Any]:
    text = resources.files("rtpslab").joinpath("data/published_inputs.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class StageColumn:
    label: str
    stages: tuple[tuple[str, Decimal], ...]
    total_us: Decimal
    ratio: int
    printed_total_us: Decimal | None = None

    @property
    def consistent(self) -> bool:
        return self.printed_total_us is None or self.printed_total_us == self.total_us


@dataclass(frozen=True)
class StageBreakdown:
    title: str
    reference: str
    columns: tuple[StageColumn, ...]
    clock_mhz: Decimal | None = None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class ComparisonTable:
    title: str
    reference: str
    rows: tuple[ComparisonRow, ...]
    printed: dict[str, tuple[int | None, int | None]] = field(default_factory=dict)


@dataclass(frozen=True)
class EnergyRow:
    label: str
    frequency_per_watt: Decimal
    ratio: int
    printed_ratio: int | None = None


@dataclass(frozen=True)
class EnergyTable:
    title: str
    reference: str
    rows: tuple[EnergyRow, ...]
    energy_per_message_uj: Decimal | None = None
    messages_per_round_trip: int = 1


@dataclass(frozen=True)
class PublishedTables:
    stage_breakdown: StageBreakdown
    isochrony: ComparisonTable
    other_chips: ComparisonTable
    energy: EnergyTable


def build_stage_breakdown(section: dict[str, Any]) -> StageBreakdown:
    totals: list[tuple[str, Decimal, Decimal | None, list]] = []
    notes = []
    for col in section["columns"]:
        stages = [(label, to_decimal(us)) for label, us in col["stages"]]
        printed = col.get("printed_total")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConsistencyWarning)
            total = stage_total(stages, expected=printed)
        for w in caught:
            notes.append(f"{col['label']}: {w.message}")
        totals.append((col["label"], total, None if printed is None else to_decimal(printed), stages))
    ratios = comparison_table([(label, total, None) for label, total, _, _ in totals], section["reference"])
    columns = tuple(
        StageColumn(label, tuple(stages), total, row.mean_ratio, printed)
        for (label, total, printed, stages), row in zip(totals, ratios)
    )
    clock = section.get("clock_mhz")
    return StageBreakdown(section["title"], section["reference"], columns,
                          None if clock is None else to_decimal(clock), tuple(notes))


def build_comparison(section: dict[str, Any]) -> ComparisonTable:
    rows = comparison_table([(r["label"], r["mean_us"], r["max_us"]) for r in section["rows"]], section["reference"])
    printed = {r["label"]: (r.get("printed_mean_ratio"), r.get("printed_max_ratio")) for r in section["rows"]}
    return ComparisonTable(section["title"], section["reference"], tuple(rows), printed)


def build_energy(section: dict[str, Any]) -> EnergyTable:
    metrics = {r["label"]: energy_metrics(1, r["frequency_per_watt"]) for r in section["rows"]}
    ref = metrics[section["reference"]]
    rows = tuple(
        EnergyRow(r["label"], to_decimal(r["frequency_per_watt"]), efficiency_ratio(metrics[r["label"]], ref),
                  r.get("printed_ratio"))
        for r in section["rows"]
    )
    uj = section.get("energy_per_message_uj")
    return EnergyTable(section["title"], section["reference"], rows,
                       None if uj is None else to_decimal(uj), section.get("messages_per_round_trip", 1))


def reproduce_tables(inputs: dict[str, Any] | None = None) -> PublishedTables:
    inputs = inputs if inputs is not None else load_published_inputs()
    return PublishedTables(
        build_stage_breakdown(inputs["stage_breakdown"]),
        build_comparison(inputs["isochrony"]),
        build_comparison(inputs["other_chips"]),
        build_energy(inputs["energy"]),
    )


def energy_per_message_uj(fpw: Decimal | int | str, messages_per_round_trip: int = 1) -> Decimal:
    """µJ per message at 1 W given a frequency-per-watt figure."""
    return Decimal(1_000_000) / (to_decimal(fpw) * messages_per_round_trip)


__all__ = [
    "ComparisonTable",
    "EnergyRow",
    "EnergyTable",
    "PublishedTables",
    "StageBreakdown",
    "StageColumn",
    "energy_per_message_uj",
    "floor_ratio",
    "load_published_inputs",
    "reproduce_tables",
]

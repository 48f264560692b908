"""Calculators behind the published comparison tables.

All ratios are ``floor(value / reference)`` computed on exact rationals, which
is the rounding the published speedup/slowdown/efficiency columns follow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Sequence, Union

from ..errors import ConsistencyWarning, MissingReference, NonpositiveInput, NonpositiveReference

Number = Union[int, float, str, Decimal]


def to_decimal(x: Number) -> Decimal:
    if isinstance(x, float):
        return Decimal(repr(x))
    return Decimal(x)


def floor_ratio(value: Number, reference: Number) -> int:
    return math.floor(Fraction(to_decimal(value)) / Fraction(to_decimal(reference)))


def stage_total(rows: Iterable[Number] | Iterable[tuple[str, Number]],
                expected: Number | None = None) -> Decimal:
    """Exact decimal sum of stage latencies (µs).

    Rows may be bare numbers or ``(label, µs)`` pairs. When ``expected`` is
    given and differs from the sum, a :class:`ConsistencyWarning` is issued.
    """
    total = Decimal(0)
    for row in rows:
        value = to_decimal(row[1] if isinstance(row, tuple) else row)
        if value < 0:
            raise ValueError(f"stage latency must be non-negative, got {value}")
        total += value
    if expected is not None and to_decimal(expected) != total:
        warnings.warn(
            ConsistencyWarning(f"stage rows sum to {total} µs but the expected total is {to_decimal(expected)} µs"),
            stacklevel=2,
        )
    return total


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    mean_us: Decimal | None
    max_us: Decimal | None
    mean_ratio: int | None
    max_ratio: int | None


def comparison_table(
    rows: Sequence[tuple[str, Number | None, Number | None]],
    reference_label: str,
) -> list[ComparisonRow]:
    by_label = {label: (mean, mx) for label, mean, mx in rows}
    if reference_label not in by_label:
        raise MissingReference(f"reference row {reference_label!r} not in table")
    ref_mean, ref_max = by_label[reference_label]
    for name, ref in (("mean", ref_mean), ("max", ref_max)):
        if ref is not None and to_decimal(ref) <= 0:
            raise NonpositiveReference(f"reference {name} latency must be positive, got {ref}")

    def ratio(value: Number | None, ref: Number | None) -> int | None:
        if value is None or ref is None:
            return None
        return floor_ratio(value, ref)

    out = []
    for label, mean, mx in rows:
        out.append(ComparisonRow(
            label,
            None if mean is None else to_decimal(mean),
            None if mx is None else to_decimal(mx),
            ratio(mean, ref_mean),
            ratio(mx, ref_max),
        ))
    return out


@dataclass(frozen=True)
class EnergyMetrics:
    power_watts: float
    message_rate_hz: float

    @property
    def frequency_per_watt(self) -> float:
        return self.message_rate_hz / self.power_watts

    @property
    def energy_per_message_joules(self) -> float:
        return self.power_watts / self.message_rate_hz

    @classmethod
    def from_frequency_per_watt(cls, fpw: Number) -> EnergyMetrics:
        """Metrics normalized to 1 W, for when only the ratio is published."""
        return energy_metrics(1, fpw)


def energy_metrics(power_watts: Number, message_rate_hz: Number) -> EnergyMetrics:
    power, rate = float(to_decimal(power_watts)), float(to_decimal(message_rate_hz))
    if not (power > 0 and rate > 0):
        raise NonpositiveInput(f"power and rate must be positive, got {power_watts} W, {message_rate_hz} Hz")
    return EnergyMetrics(power, rate)


def efficiency_ratio(a: EnergyMetrics, b: EnergyMetrics) -> int:
    """floor(a.frequency_per_watt / b.frequency_per_watt), computed exactly."""
    fa = Fraction(a.message_rate_hz) / Fraction(a.power_watts)
    fb = Fraction(b.message_rate_hz) / Fraction(b.power_watts)
    return math.floor(fa / fb)


def power_for(energy_per_message_joules: Number, message_rate_hz: Number) -> float:
    """Power draw implied by a per-message energy at a given message rate."""
    e, r = to_decimal(energy_per_message_joules), to_decimal(message_rate_hz)
    if e <= 0 or r <= 0:
        raise NonpositiveInput("energy and rate must be positive")
    return float(e * r)

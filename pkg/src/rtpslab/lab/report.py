"""Report rendering (json / csv / text) with stable field order.

Everything is first converted to a plain dict (the JSON document); csv and
text are rendered from that dict, so ``report-convert`` can turn a saved JSON
report into the other formats without the original objects.
"""

from __future__ import annotations

import csv
import io
import json
from decimal import Decimal
from typing import Any

from .harness import SampleSet
from .published import ComparisonTable, EnergyTable, PublishedTables, StageBreakdown
from .stats import LatencyStats
from .tables import ComparisonRow

FORMATS = ("json", "csv", "text")
TIMES = "×"


def _us(value: Any) -> float | None:
    """ns or Decimal µs -> µs float rounded to 3 decimals."""
    if value is None:
        return None
    return round(float(value), 3)


def _fmt_us(value: float | None) -> str:
    return "" if value is None else f"{value:.3f}"


# -- to dict ----------------------------------------------------------------

def latency_dict(stats: LatencyStats, samples: SampleSet | None = None) -> dict[str, Any]:
    fields = ("mean", "min", "max", "p50", "p99", "p999", "stddev")
    doc: dict[str, Any] = {"kind": "latency"}
    if samples is not None:
        doc["metadata"] = samples.metadata()
    doc["stats"] = {"count": stats.count}
    for name in fields:
        doc["stats"][f"{name}_ns"] = getattr(stats, name)
    for name in fields:
        doc["stats"][f"{name}_us"] = _us(getattr(stats, name) / 1000)
    doc["stats"]["isochronous"] = stats.isochronous
    doc["histogram"] = {
        "bucket_ns": stats.bucket_ns,
        "buckets": [[start, count] for start, count in sorted(stats.histogram.items())],
    }
    return doc


def _row_dict(row: ComparisonRow, printed: tuple[int | None, int | None] | None) -> dict[str, Any]:
    d = {
        "label": row.label,
        "mean_us": _us(row.mean_us),
        "max_us": _us(row.max_us),
        "mean_ratio": row.mean_ratio,
        "max_ratio": row.max_ratio,
    }
    if printed is not None:
        d["printed_mean_ratio"], d["printed_max_ratio"] = printed
    return d


def comparison_dict(rows: list[ComparisonRow] | ComparisonTable, title: str = "", reference: str = "") -> dict[str, Any]:
    printed: dict[str, Any] = {}
    if isinstance(rows, ComparisonTable):
        title, reference, printed, rows = rows.title, rows.reference, rows.printed, list(rows.rows)
    return {
        "kind": "comparison",
        "title": title,
        "reference": reference,
        "rows": [_row_dict(r, printed.get(r.label)) for r in rows],
    }


def stage_breakdown_dict(table: StageBreakdown) -> dict[str, Any]:
    return {
        "kind": "stage_breakdown",
        "title": table.title,
        "reference": table.reference,
        "clock_mhz": None if table.clock_mhz is None else float(table.clock_mhz),
        "columns": [
            {
                "label": col.label,
                "stages": [[label, _us(us)] for label, us in col.stages],
                "total_us": _us(col.total_us),
                "ratio": col.ratio,
                "printed_total_us": _us(col.printed_total_us),
                "consistent": col.consistent,
            }
            for col in table.columns
        ],
        "notes": list(table.notes),
    }


def energy_dict(table: EnergyTable) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "kind": "energy",
        "title": table.title,
        "reference": table.reference,
        "rows": [
            {"label": r.label, "frequency_per_watt": float(r.frequency_per_watt),
             "ratio": r.ratio, "printed_ratio": r.printed_ratio}
            for r in table.rows
        ],
    }
    if table.energy_per_message_uj is not None:
        doc["printed_energy_per_message_uj"] = float(table.energy_per_message_uj)
    doc["messages_per_round_trip"] = table.messages_per_round_trip
    return doc


def published_tables_dict(tables: PublishedTables) -> dict[str, Any]:
    return {
        "kind": "published_tables",
        "sections": [
            stage_breakdown_dict(tables.stage_breakdown),
            comparison_dict(tables.isochrony),
            comparison_dict(tables.other_chips),
            energy_dict(tables.energy),
        ],
    }


def model_dict(stages: list[tuple[str, Decimal]], total_us: Decimal, clock_mhz: Decimal,
               one_way_ns: int, cycles: tuple[int, ...]) -> dict[str, Any]:
    return {
        "kind": "model",
        "clock_mhz": float(clock_mhz),
        "stages": [
            {"label": label, "round_trip_us": _us(us), "one_way_cycles": c}
            for (label, us), c in zip(stages, cycles)
        ],
        "total_us": _us(total_us),
        "one_way_ns": one_way_ns,
        "round_trip_ns": 2 * one_way_ns,
    }


def to_report_dict(obj: Any, samples: SampleSet | None = None) -> dict[str, Any]:
    if isinstance(obj, dict):
        return obj
    if isinstance(obj, LatencyStats):
        return latency_dict(obj, samples)
    if isinstance(obj, PublishedTables):
        return published_tables_dict(obj)
    if isinstance(obj, StageBreakdown):
        return stage_breakdown_dict(obj)
    if isinstance(obj, EnergyTable):
        return energy_dict(obj)
    if isinstance(obj, ComparisonTable) or (isinstance(obj, list) and all(isinstance(r, ComparisonRow) for r in obj)):
        return comparison_dict(obj)
    raise TypeError(f"don't know how to report a {type(obj).__name__}")


# -- renderers --------------------------------------------------------------

def _grid(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for n, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)


def _ratio(value: float | None, ratio: int | None) -> str:
    if value is None:
        return ""
    return f"{_fmt_us(value)} ({ratio}{TIMES})" if ratio is not None else _fmt_us(value)


def _text_latency(doc: dict[str, Any]) -> str:
    s = doc["stats"]
    lines = ["Round-trip latency (us)"]
    rows = [["metric", "us", "ns"], ["count", str(s["count"]), ""]]
    for name in ("mean", "min", "p50", "p99", "p999", "max", "stddev"):
        ns = s[f"{name}_ns"]
        rows.append([name, _fmt_us(s[f"{name}_us"]), f"{ns:.1f}" if isinstance(ns, float) else str(ns)])
    rows.append(["isochronous", "yes" if s["isochronous"] else "no", ""])
    lines.append(_grid(rows))
    meta = doc.get("metadata")
    if meta:
        lines.append("")
        for key in ("samples", "dropped", "late", "warmup_discarded", "started_at", "ended_at"):
            lines.append(f"{key}: {meta[key]}")
        for key, value in meta["config"].items():
            lines.append(f"config.{key}: {json.dumps(value)}")
        for key, value in meta.get("layer_mean_ns", {}).items():
            lines.append(f"layer_mean_ns.{key}: {value:.1f}")
    return "\n".join(lines)


def _text_stage_breakdown(doc: dict[str, Any]) -> str:
    cols = doc["columns"]
    # reference column rows first, then other rows by layer position
    first_seen: dict[str, tuple[int, int, int]] = {}
    for c, col in enumerate(cols):
        is_ref = col["label"] == doc["reference"]
        for pos, (label, _) in enumerate(col["stages"]):
            first_seen.setdefault(label, (0 if is_ref else 1, pos, c))
    stage_labels = sorted(first_seen, key=first_seen.__getitem__)
    rows = [[""] + [c["label"] for c in cols]]
    for label in stage_labels:
        row = [label]
        for col in cols:
            value = dict((k, v) for k, v in col["stages"]).get(label)
            row.append(_fmt_us(value))
        rows.append(row)
    total = ["Total in us (speedup)"]
    for col in cols:
        cell = _ratio(col["total_us"], col["ratio"])
        if not col["consistent"]:
            cell += f" [printed {col['printed_total_us']:g}]"
        total.append(cell)
    rows.append(total)
    out = [doc["title"], _grid(rows)]
    out += [f"warning: {note}" for note in doc["notes"]]
    return "\n".join(out)


def _text_comparison(doc: dict[str, Any]) -> str:
    rows_in = doc["rows"]
    rows = [[""] + [r["label"] for r in rows_in]]
    rows.append(["Mean latency (slowdown)"] + [_ratio(r["mean_us"], r["mean_ratio"]) for r in rows_in])
    if any(r["max_us"] is not None for r in rows_in):
        rows.append(["Max. latency (slowdown)"] + [_ratio(r["max_us"], r["max_ratio"]) for r in rows_in])
    out = [doc["title"], _grid(rows)] if doc["title"] else [_grid(rows)]
    for r in rows_in:
        for key in ("mean", "max"):
            printed = r.get(f"printed_{key}_ratio")
            if printed is not None and printed != r[f"{key}_ratio"]:
                out.append(f"warning: {r['label']}: {key} ratio {r[f'{key}_ratio']} differs from printed {printed}")
    return "\n".join(out)


def _text_energy(doc: dict[str, Any]) -> str:
    rows = [[""] + [r["label"] for r in doc["rows"]]]
    rows.append(["Mean communication frequency-per-Watt (energy efficiency)"]
                + [f"{r['frequency_per_watt']:,.0f} ({r['ratio']}{TIMES})" for r in doc["rows"]])
    out = [doc["title"], _grid(rows)]
    per_rt = doc["messages_per_round_trip"]
    for r in doc["rows"]:
        uj = 1e6 / (r["frequency_per_watt"] * per_rt)
        out.append(f"energy per message at 1 W, {r['label']}: {uj:.3f} uJ")
    if "printed_energy_per_message_uj" in doc:
        out.append(f"printed energy per message: {doc['printed_energy_per_message_uj']:.3f} uJ")
    return "\n".join(out)


def _text_model(doc: dict[str, Any]) -> str:
    rows = [["stage", "round-trip us", "one-way cycles"]]
    for st in doc["stages"]:
        rows.append([st["label"], _fmt_us(st["round_trip_us"]), str(st["one_way_cycles"])])
    rows.append(["Total in us", _fmt_us(doc["total_us"]), str(sum(s["one_way_cycles"] for s in doc["stages"]))])
    return "\n".join([
        f"Stage latency model @ {doc['clock_mhz']:g} MHz",
        _grid(rows),
        f"one-way: {doc['one_way_ns']} ns ({doc['one_way_ns'] / 1000:.3f} us)",
        f"round trip: {doc['round_trip_ns']} ns ({doc['round_trip_ns'] / 1000:.3f} us)",
    ])


_TEXT = {
    "latency": _text_latency,
    "stage_breakdown": _text_stage_breakdown,
    "comparison": _text_comparison,
    "energy": _text_energy,
    "model": _text_model,
}


def _text(doc: dict[str, Any]) -> str:
    if doc["kind"] == "published_tables":
        return "\n\n".join(_text(s) for s in doc["sections"])
    return _TEXT[doc["kind"]](doc)


def _csv_rows(doc: dict[str, Any]) -> list[list[Any]]:
    kind = doc["kind"]
    if kind == "latency":
        rows: list[list[Any]] = [["metric", "value"]]
        rows += [[k, v] for k, v in doc["stats"].items()]
        meta = doc.get("metadata")
        if meta:
            rows += [[k, meta[k]] for k in ("samples", "dropped", "late", "warmup_discarded", "started_at", "ended_at")]
            rows += [[f"config.{k}", json.dumps(v)] for k, v in meta["config"].items()]
        return rows
    if kind == "comparison":
        rows = [["label", "mean_us", "max_us", "mean_ratio", "max_ratio"]]
        for r in doc["rows"]:
            rows.append([r["label"], _fmt_us(r["mean_us"]), _fmt_us(r["max_us"]),
                         "" if r["mean_ratio"] is None else r["mean_ratio"],
                         "" if r["max_ratio"] is None else r["max_ratio"]])
        return rows
    if kind == "stage_breakdown":
        rows = [["column", "stage", "latency_us", "ratio", "printed_total_us"]]
        for col in doc["columns"]:
            for label, us in col["stages"]:
                rows.append([col["label"], label, _fmt_us(us), "", ""])
            rows.append([col["label"], "TOTAL", _fmt_us(col["total_us"]), col["ratio"],
                         _fmt_us(col["printed_total_us"])])
        return rows
    if kind == "energy":
        rows = [["label", "frequency_per_watt", "ratio"]]
        rows += [[r["label"], f"{r['frequency_per_watt']:.0f}", r["ratio"]] for r in doc["rows"]]
        return rows
    if kind == "model":
        rows = [["stage", "round_trip_us", "one_way_cycles"]]
        rows += [[s["label"], _fmt_us(s["round_trip_us"]), s["one_way_cycles"]] for s in doc["stages"]]
        rows.append(["TOTAL", _fmt_us(doc["total_us"]), sum(s["one_way_cycles"] for s in doc["stages"])])
        return rows
    raise ValueError(f"no csv layout for report kind {kind!r}")


def _csv(doc: dict[str, Any]) -> str:
    buf = io.StringIO()
    if doc["kind"] == "published_tables":
        for n, section in enumerate(doc["sections"]):
            if n:
                buf.write("\n")
            buf.write(f"# {section['title']}\n")
            csv.writer(buf, lineterminator="\n").writerows(_csv_rows(section))
        return buf.getvalue()
    csv.writer(buf, lineterminator="\n").writerows(_csv_rows(doc))
    return buf.getvalue()


def emit_report(obj: Any, fmt: str = "text", samples: SampleSet | None = None) -> bytes:
    """Render stats, tables, or an already-parsed report dict as UTF-8 bytes."""
    doc = to_report_dict(obj, samples)
    if fmt == "json":
        text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    elif fmt == "csv":
        text = _csv(doc)
    elif fmt == "text":
        text = _text(doc) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    return text.encode("utf-8")


def read_report_json(data: bytes | str) -> dict[str, Any]:
    """Parse a JSON report, as written by :func:`emit_report`."""
    doc = json.loads(data)
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError("not an rtpslab report: missing 'kind'")
    return doc


def histogram_csv(stats: LatencyStats | dict[str, Any]) -> bytes:
    """Histogram as ``bucket_start_ns,count`` lines for external plotting."""
    if isinstance(stats, LatencyStats):
        buckets = sorted(stats.histogram.items())
    else:
        buckets = [tuple(b) for b in stats["histogram"]["buckets"]]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bucket_start_ns", "count"])
    w.writerows(buckets)
    return buf.getvalue().encode("utf-8")

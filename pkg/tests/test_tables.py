import warnings
from decimal import Decimal

import pytest

from rtpslab.errors import ConsistencyWarning, MissingReference, NonpositiveInput, NonpositiveReference
from rtpslab.lab.published import energy_per_message_uj, load_published_inputs, reproduce_tables
from rtpslab.lab.tables import (
    comparison_table,
    efficiency_ratio,
    energy_metrics,
    floor_ratio,
    power_for,
    stage_total,
)


def test_stage_totals():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert stage_total(["0.7", "2.3", "2"]) == Decimal("5.0")
        assert stage_total([0.7, 2.3, 2.0]) == 5
        assert stage_total([70, 835, 139]) == 1044
        assert stage_total([("a", 73), ("b", 127), ("c", 114)], expected=314) == 314


def test_stage_total_no_float_drift():
    # binary floats would give 0.30000000000000004
    assert stage_total([0.1, 0.2]) == Decimal("0.3")


def test_stage_total_warns_on_mismatch():
    with pytest.warns(ConsistencyWarning, match="369"):
        assert stage_total([71, 141, 155], expected=369) == 367


def test_stage_total_rejects_negative():
    with pytest.raises(ValueError):
        stage_total([1, -1])


def test_comparison_mean_ratios():
    rows = comparison_table(
        [("hw", 5, None), ("dds1", 1044, None), ("dds2", 314, None), ("dds3", 369, None)], "hw")
    assert [r.mean_ratio for r in rows] == [1, 208, 62, 73]
    assert rows[1].max_ratio is None


def test_comparison_max_ratios():
    rows = comparison_table(
        [("ref", 5, 11), ("a", 1, 336750), ("b", 1, 22769), ("c", 1, 109776), ("d", 1, 5532)], "ref")
    assert [r.max_ratio for r in rows[1:]] == [30613, 2069, 9979, 502]


def test_comparison_errors():
    with pytest.raises(MissingReference):
        comparison_table([("a", 1, 1)], "b")
    with pytest.raises(NonpositiveReference):
        comparison_table([("a", 0, 1)], "a")
    with pytest.raises(NonpositiveReference):
        comparison_table([("a", 1, -2)], "a")


def test_floor_ratio_is_floor():
    assert floor_ratio(1044, 5) == 208
    assert floor_ratio("336750", "11") == 30613
    assert floor_ratio(10, 5) == 2


def test_energy_ratio_and_identity():
    assert efficiency_ratio(energy_metrics(1, 281690), energy_metrics(1, 518)) == 543
    m = energy_metrics(1, 1)
    assert m.energy_per_message_joules == 1 and m.frequency_per_watt == 1
    m = energy_metrics(3.5, 700)
    assert m.frequency_per_watt * m.energy_per_message_joules == pytest.approx(1)


def test_energy_inversion():
    assert power_for(1.775e-6, 563380) == pytest.approx(1.0, rel=5e-3)
    m = energy_metrics(1, 563380)
    assert m.energy_per_message_joules == pytest.approx(1.775e-6, rel=5e-3)
    assert energy_per_message_uj(281690, 2).quantize(Decimal("0.001")) == Decimal("1.775")


@pytest.mark.parametrize("p, r", [(0, 1), (1, 0), (-1, 5)])
def test_energy_nonpositive(p, r):
    with pytest.raises(NonpositiveInput):
        energy_metrics(p, r)


def test_reproduce_tables_matches_printed():
    t = reproduce_tables()
    cols = {c.label: c for c in t.stage_breakdown.columns}
    assert [c.total_us for c in cols.values()][0] == Decimal("5.0")
    totals = sorted((c.total_us, c.ratio) for c in cols.values())
    assert (Decimal(1044), 208) in totals and (Decimal(314), 62) in totals
    inconsistent = [c for c in cols.values() if not c.consistent]
    assert len(inconsistent) == 1
    assert inconsistent[0].total_us == 367 and inconsistent[0].printed_total_us == 369
    assert inconsistent[0].ratio == 73
    assert any("369" in n for n in t.stage_breakdown.notes)
    for table in (t.isochrony, t.other_chips):
        for row in table.rows:
            pm, px = table.printed.get(row.label, (None, None))
            if pm is not None:
                assert row.mean_ratio == pm, row.label
            if px is not None:
                assert row.max_ratio == px, row.label
    for row in t.energy.rows:
        if row.printed_ratio is not None:
            assert row.ratio == row.printed_ratio


def test_fixture_has_every_table():
    inputs = load_published_inputs()
    assert set(inputs) >= {"stage_breakdown", "isochrony", "other_chips", "energy"}

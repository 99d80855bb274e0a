import pytest
from hypothesis import given, strategies as st

from memos.measure import LogicThresholds, cell_settle, check_rows, exhaustive_vectors, truth_table
from memos.netlist import flip_polarities, validate
from memos.stdcells import (
    AreaModel,
    CellKind,
    CellParams,
    DeviceCount,
    area_ratio,
    build_cell,
    cell_ports,
    count_devices,
    parse_cell,
    reference_function,
)

VCC = 1.8

# MOSFETs, memristors per cell, hybrid then all-CMOS
GATE_COUNTS = {
    "NOT": ((2, 0), 2), "AND": ((0, 2), 6), "OR": ((0, 2), 6), "NAND": ((2, 2), 4),
    "NOR": ((2, 2), 4), "XOR": ((4, 6), 12), "XNOR": ((4, 6), 12), "BUF": ((4, 0), 4),
}
ADDER_COUNTS = {
    "HALF_ADDER": ((8, 8, 5), 14),
    "FULL_ADDER": ((16, 18, 10), 34),
    "RIPPLE_ADDER": ((128, 144, 80), 272),
}


@pytest.mark.parametrize("name", list(GATE_COUNTS))
def test_gate_device_counts(name):
    (mos, mem), cmos = GATE_COUNTS[name]
    n = count_devices(build_cell(name))
    assert (n.mosfets, n.memristors) == (mos, mem)
    c = count_devices(build_cell(name, "cmos"))
    assert (c.mosfets, c.memristors, c.vias) == (cmos, 0, 0)


@pytest.mark.parametrize("name", list(ADDER_COUNTS))
def test_adder_device_counts(name):
    hybrid, cmos = ADDER_COUNTS[name]
    n = count_devices(build_cell(name))
    assert (n.mosfets, n.memristors, n.vias) == hybrid
    assert count_devices(build_cell(name, "cmos")).mosfets == cmos


def test_output_buffers_do_not_change_structure_elsewhere():
    plain = count_devices(build_cell("XOR"))
    buffered = count_devices(build_cell("XOR", output_buffers=True))
    assert buffered.memristors == plain.memristors
    assert buffered.mosfets == plain.mosfets + 4


@pytest.mark.parametrize("bits", [1, 2, 4, 8])
def test_ripple_counts_scale_with_width(bits):
    n = count_devices(build_cell(f"RIPPLE_ADDER({bits})"))
    assert (n.mosfets, n.memristors, n.vias) == (16 * bits, 18 * bits, 10 * bits)


@pytest.mark.parametrize("name, want", [("FULL_ADDER", 47.06), ("HALF_ADDER", 57.14),
                                        ("RIPPLE_ADDER", 47.06)])
def test_area_ratio(name, want):
    ratio = area_ratio(count_devices(build_cell(name)), count_devices(build_cell(name, "cmos")))
    assert ratio == pytest.approx(want, abs=0.01)


def test_area_ratio_with_memristor_footprint():
    hybrid, cmos = DeviceCount(16, 18, 10), DeviceCount(34, 0, 0)
    ratio = area_ratio(hybrid, cmos, AreaModel(1.0, 0.5))
    assert ratio == pytest.approx(100 * (16 + 9) / 34)


def test_area_ratio_rejects_empty_reference():
    with pytest.raises(ZeroDivisionError):
        area_ratio(DeviceCount(1, 0, 0), DeviceCount())


@pytest.mark.parametrize("text, parsed", [
    ("AND", (CellKind.AND, None)), (" xor ", (CellKind.XOR, None)),
    ("ripple_adder", (CellKind.RIPPLE_ADDER, None)), ("RIPPLE_ADDER(4)", (CellKind.RIPPLE_ADDER, 4)),
])
def test_parse_cell(text, parsed):
    assert parse_cell(text) == parsed


@pytest.mark.parametrize("text", ["NAND3", "AND(2)", "RIPPLE_ADDER(0)", ""])
def test_parse_cell_rejects(text):
    with pytest.raises(ValueError):
        parse_cell(text)


def test_cell_params_reject_zero_width():
    with pytest.raises(ValueError):
        CellParams(bits=0)


def test_unknown_family():
    with pytest.raises(ValueError):
        build_cell("AND", "ttl")


def test_ripple_ports():
    ins, outs = cell_ports(build_cell("RIPPLE_ADDER(3)"))
    assert sorted(ins) == ["A0", "A1", "A2", "B0", "B1", "B2", "Cin"]
    assert sorted(outs) == ["Cout", "S0", "S1", "S2"]


@given(a=st.integers(0, 15), b=st.integers(0, 15), cin=st.integers(0, 1))
def test_ripple_reference_is_addition(a, b, cin):
    v = {f"A{k}": (a >> k) & 1 for k in range(4)}
    v.update({f"B{k}": (b >> k) & 1 for k in range(4)})
    v["Cin"] = cin
    out = reference_function(CellKind.RIPPLE_ADDER, 4)(v)
    total = sum(out[f"S{k}"] << k for k in range(4)) + (out["Cout"] << 4)
    assert total == a + b + cin


# -- function -------------------------------------------------------------------

FAST_CELLS = ["NOT", "BUF", "AND", "OR", "NAND", "NOR", "XOR", "XNOR", "HALF_ADDER", "FULL_ADDER"]


@pytest.mark.parametrize("family", ["memos", "cmos"])
@pytest.mark.parametrize("name", FAST_CELLS)
def test_truth_table(name, family):
    kind, _ = parse_cell(name)
    c = build_cell(kind, family, output_buffers=True)
    rows = truth_table(c)
    assert not check_rows(rows, reference_function(kind))
    assert not any(r.flagged for r in rows)


def test_small_ripple_truth_table():
    c = build_cell("RIPPLE_ADDER(2)", output_buffers=True)
    rows = truth_table(c, settle=cell_settle(CellKind.RIPPLE_ADDER, 2))
    assert len(rows) == 32
    assert not check_rows(rows, reference_function(CellKind.RIPPLE_ADDER, 2))


def test_flipped_and_behaves_as_or():
    c = flip_polarities(build_cell("AND"))
    rows = truth_table(c)
    assert not check_rows(rows, reference_function(CellKind.OR))
    assert check_rows(rows, reference_function(CellKind.AND))


def test_flipped_nor_behaves_as_nand():
    rows = truth_table(flip_polarities(build_cell("NOR")))
    assert not check_rows(rows, reference_function(CellKind.NAND))


def test_raw_xor_output_degrades_and_buffer_restores():
    odd = [v for v in exhaustive_vectors(["A", "B"]) if v["A"] != v["B"]]
    raw = truth_table(build_cell("XOR"), vectors=odd)
    restored = truth_table(build_cell("XOR", output_buffers=True), vectors=odd)
    for r in raw:
        assert r.volts["Y"] < 0.99 * VCC
    for r in restored:
        assert r.volts["Y"] >= 0.99 * VCC


def test_strict_thresholds_flag_unbuffered_xor():
    strict = LogicThresholds.for_vcc(VCC, 0.02, 0.98)
    rows = truth_table(build_cell("XOR"), th=strict)
    assert any(r.flagged for r in rows)


@pytest.mark.parametrize("family", ["memos", "cmos"])
def test_ripple_validates(family):
    assert validate(build_cell("RIPPLE_ADDER", family, output_buffers=True)) == []

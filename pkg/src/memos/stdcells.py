"""Gate and adder builders for the hybrid memristor-CMOS family and a static CMOS reference.

Memristor AND/OR gates are two-device voltage dividers: each memristor runs
from one input to the output with its polarity mark on the input side (AND)
or on the output side (OR). Inversion and level restoration come from CMOS
inverters on a shared ``vdd`` rail.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .devices import FIG3_TEAM, NMOS_180, PMOS_180, MosfetParams, Polarity, TeamParams
from .netlist import GROUND, Circuit, Memristor, Mosfet, Port

VDD = "vdd"
VCC_DEFAULT = 1.8


class CellKind(str, Enum):
    NOT = "NOT"
    AND = "AND"
    OR = "OR"
    NAND = "NAND"
    NOR = "NOR"
    XOR = "XOR"
    XNOR = "XNOR"
    BUF = "BUF"
    HALF_ADDER = "HALF_ADDER"
    FULL_ADDER = "FULL_ADDER"
    RIPPLE_ADDER = "RIPPLE_ADDER"


FAMILIES = ("memos", "cmos")

# the ten rows of the performance tables, in order
TABLE_CELLS = ("NOT", "AND", "OR", "NAND", "NOR", "XOR", "XNOR", "HALF_ADDER", "FULL_ADDER",
               "RIPPLE_ADDER")
GATE_CELLS = ("NOT", "AND", "OR", "NAND", "NOR", "XOR", "XNOR", "BUF")


@dataclass(frozen=True)
class CellParams:
    """Device parameter set shared by every cell builder."""

    memristor: TeamParams = FIG3_TEAM
    nmos: MosfetParams = NMOS_180
    pmos: MosfetParams = PMOS_180
    vcc: float = VCC_DEFAULT
    bits: int = 8  # ripple adder width
    # start memristors at R_ON; a pair of R_OFF devices has to be rewritten
    # by ~9 uA and takes microseconds to resolve
    start_low_resistance: bool = True

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("ripple adder needs at least one bit")


@dataclass(frozen=True)
class DeviceCount:
    mosfets: int = 0
    memristors: int = 0
    vias: int = 0

    def __post_init__(self):
        if min(self.mosfets, self.memristors, self.vias) < 0:
            raise ValueError("device counts are non-negative")


def parse_cell(name: str) -> tuple[CellKind, int | None]:
    """Parse ``AND``, ``ripple_adder`` or ``RIPPLE_ADDER(4)`` into (kind, bits)."""
    text = name.strip().upper()
    bits = None
    if text.endswith(")") and "(" in text:
        text, arg = text[:-1].split("(", 1)
        bits = int(arg)
        if bits < 1:
            raise ValueError("ripple adder needs at least one bit")
    try:
        kind = CellKind(text)
    except ValueError:
        raise ValueError(f"unknown cell {name!r}") from None
    if bits is not None and kind is not CellKind.RIPPLE_ADDER:
        raise ValueError(f"{kind.value} takes no width")
    return kind, bits


class _Builder:
    def __init__(self, params: CellParams):
        self.p = params
        self.elements = []
        self.ports = []
        self.counters = {}
        self.n_nodes = 0

    def _name(self, head):
        k = self.counters.get(head, 0)
        self.counters[head] = k + 1
        return f"{head}{k}"

    def node(self, hint="n"):
        self.n_nodes += 1
        return f"{hint}{self.n_nodes}"

    def port(self, direction, name, node=None):
        self.ports.append(Port(direction, name, node or name))
        return node or name

    def memristor(self, plus, minus):
        x0 = self.p.memristor.x_on if self.p.start_low_resistance else None
        self.elements.append(Memristor(self._name("MR"), plus, minus, self.p.memristor,
                                       Polarity.FORWARD, x0))

    def nmos(self, d, g, s):
        self.elements.append(Mosfet(self._name("MN"), d, g, s, self.p.nmos))

    def pmos(self, d, g, s):
        self.elements.append(Mosfet(self._name("MP"), d, g, s, self.p.pmos))

    # memristor dividers
    def mem_and(self, a, b, y=None):
        y = y or self.node("and")
        self.memristor(a, y)
        self.memristor(b, y)
        return y

    def mem_or(self, a, b, y=None):
        y = y or self.node("or")
        self.memristor(y, a)
        self.memristor(y, b)
        return y

    # static CMOS
    def inv(self, a, y=None):
        y = y or self.node("inv")
        self.pmos(y, a, VDD)
        self.nmos(y, a, GROUND)
        return y

    def buf(self, a, y=None):
        return self.inv(self.inv(a), y)

    def complex_gate(self, pdn, y=None):
        """Static CMOS gate computing NOT(pdn).

        ``pdn`` is an input node or a tree ("s", ...) / ("p", ...) of series
        and parallel branches for the pull-down network; the pull-up network
        is its dual.
        """
        y = y or self.node("cg")
        self._network(pdn, y, GROUND, self.nmos, series="s")
        self._network(pdn, y, VDD, self.pmos, series="p")
        return y

    def _network(self, expr, top, bottom, device, series):
        if isinstance(expr, str):
            device(top, expr, bottom)
            return
        op, *terms = expr
        if op == series:
            nodes = [top] + [self.node("st") for _ in terms[:-1]] + [bottom]
            for t, hi, lo in zip(terms, nodes, nodes[1:]):
                self._network(t, hi, lo, device, series)
        else:
            for t in terms:
                self._network(t, top, bottom, device, series)

    def circuit(self, name):
        return Circuit(tuple(self.elements), tuple(self.ports), (VDD, self.p.vcc), name)


# --- hybrid memristor-CMOS cells


def _memos_xor(b, a, c, y=None, invert=False):
    """Sum of products: OR of two memristor ANDs fed by the inputs and their complements."""
    na, nc = b.inv(a), b.inv(c)
    if invert:
        t1, t2 = b.mem_and(a, c), b.mem_and(na, nc)
    else:
        t1, t2 = b.mem_and(a, nc), b.mem_and(na, c)
    return b.mem_or(t1, t2, y)


def _memos_half_adder(b, a, c, s, cout, buffer_sum=True):
    x = _memos_xor(b, a, c, None if buffer_sum else s)
    if buffer_sum:
        b.buf(x, s)
    b.mem_and(a, c, cout)


def _memos_full_adder(b, a, c, cin, s, cout):
    # Two half adders and a memristor OR for the carry. The buffer of the
    # second half adder restores the carry instead of the sum, so a ripple
    # chain never passes a degraded carry on; the sum is left for the reader.
    s1, c1, c2 = b.node("s"), b.node("c"), b.node("c")
    _memos_half_adder(b, a, c, s1, c1)
    _memos_half_adder(b, s1, cin, s, c2, buffer_sum=False)
    b.buf(b.mem_or(c1, c2), cout)


# --- CMOS reference cells


def _cmos_xor(b, a, c, y=None, invert=False):
    na, nc = b.inv(a), b.inv(c)
    if invert:
        pdn = ("p", ("s", a, nc), ("s", na, c))
    else:
        pdn = ("p", ("s", a, c), ("s", na, nc))
    return b.complex_gate(pdn, y)


def _cmos_half_adder(b, a, c, s, cout):
    nand = b.complex_gate(("s", a, c))
    b.inv(nand, cout)
    nor = b.complex_gate(("p", a, c))
    b.complex_gate(("p", cout, nor), s)


def _cmos_full_adder(b, a, c, cin, s, cout):
    s1, c1, c2 = b.node("s"), b.node("c"), b.node("c")
    _cmos_half_adder(b, a, c, s1, c1)
    _cmos_half_adder(b, s1, cin, s, c2)
    b.inv(b.complex_gate(("p", c1, c2)), cout)


def _ripple(b, bits, full_adder, cout, buffer_sums=False):
    a = [b.port("in", f"A{k}") for k in range(bits)]
    c = [b.port("in", f"B{k}") for k in range(bits)]
    carry = b.port("in", "Cin")
    s = [b.port("out", f"S{k}") for k in range(bits)]
    for k in range(bits):
        nxt = cout if k == bits - 1 else f"carry{k + 1}"
        raw = b.node("raw") if buffer_sums else s[k]
        full_adder(b, a[k], c[k], carry, raw, nxt)
        if buffer_sums:
            b.buf(raw, s[k])
        carry = nxt


def build_cell(kind, family: str = "memos", params: CellParams | None = None,
               output_buffers: bool = False) -> Circuit:
    """Build one cell with ports A, B (or A, B, Cin) and Y (or SUM, Cout).

    The ripple adder uses ports A0..A{n-1}, B0.., Cin, S0.. and Cout.
    ``output_buffers`` puts a level-restoring buffer behind every hybrid output
    that comes straight from a memristor divider (XOR/XNOR Y, adder SUM and
    S0..). Device counts refer to the cell without it.
    """
    p = params or CellParams()
    if isinstance(kind, str):
        kind, bits = parse_cell(kind)
        if bits is not None:
            p = CellParams(p.memristor, p.nmos, p.pmos, p.vcc, bits, p.start_low_resistance)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    b = _Builder(p)
    memos = family == "memos"
    name = f"{family}_{kind.value.lower()}"
    if kind is CellKind.RIPPLE_ADDER:
        name += str(p.bits)

    def out(port):
        """Output node, behind a buffer when ``output_buffers`` is set."""
        if output_buffers:
            inner = b.node("raw")
            b.buf(inner, b.port("out", port))
            return inner
        return b.port("out", port)

    if kind is CellKind.RIPPLE_ADDER:
        _ripple(b, p.bits, _memos_full_adder if memos else _cmos_full_adder, "Cout",
                buffer_sums=memos and output_buffers)
        b.port("out", "Cout")
        return b.circuit(name)

    if kind in (CellKind.HALF_ADDER, CellKind.FULL_ADDER):
        a, c = b.port("in", "A"), b.port("in", "B")
        cin = b.port("in", "Cin") if kind is CellKind.FULL_ADDER else None
        if memos and kind is CellKind.FULL_ADDER:
            s = out("SUM")
        else:
            s = b.port("out", "SUM")
        cout = b.port("out", "Cout")
        if kind is CellKind.HALF_ADDER:
            (_memos_half_adder if memos else _cmos_half_adder)(b, a, c, s, cout)
        else:
            (_memos_full_adder if memos else _cmos_full_adder)(b, a, c, cin, s, cout)
        return b.circuit(name)

    a = b.port("in", "A")
    if kind is CellKind.NOT:
        b.inv(a, b.port("out", "Y"))
        return b.circuit(name)
    if kind is CellKind.BUF:
        b.buf(a, b.port("out", "Y"))
        return b.circuit(name)
    c = b.port("in", "B")
    y = b.port("out", "Y") if not (memos and kind in (CellKind.XOR, CellKind.XNOR)) else None
    if memos:
        if kind is CellKind.AND:
            b.mem_and(a, c, y)
        elif kind is CellKind.OR:
            b.mem_or(a, c, y)
        elif kind is CellKind.NAND:
            b.inv(b.mem_and(a, c), y)
        elif kind is CellKind.NOR:
            b.inv(b.mem_or(a, c), y)
        else:
            _memos_xor(b, a, c, out("Y"), invert=kind is CellKind.XNOR)
    else:
        if kind is CellKind.AND:
            b.inv(b.complex_gate(("s", a, c)), y)
        elif kind is CellKind.OR:
            b.inv(b.complex_gate(("p", a, c)), y)
        elif kind is CellKind.NAND:
            b.complex_gate(("s", a, c), y)
        elif kind is CellKind.NOR:
            b.complex_gate(("p", a, c), y)
        else:
            _cmos_xor(b, a, c, y, invert=kind is CellKind.XNOR)
    return b.circuit(name)


def count_devices(c: Circuit) -> DeviceCount:
    """MOSFETs, memristors, and vias (nodes shared by both device layers)."""
    mem_nodes, mos_nodes = set(), set()
    n_mem = n_mos = 0
    for e in c.elements:
        if isinstance(e, Memristor):
            n_mem += 1
            mem_nodes.update(e.nodes)
        elif isinstance(e, Mosfet):
            n_mos += 1
            mos_nodes.update(e.nodes)
    vias = len((mem_nodes & mos_nodes) - {GROUND})
    if c.vcc is not None:
        vias -= c.vcc[0] in mem_nodes and c.vcc[0] in mos_nodes
    return DeviceCount(n_mos, n_mem, int(vias))


@dataclass(frozen=True)
class AreaModel:
    """Footprint per device on the CMOS layer.

    Memristors sit on a layer above the transistors and are ~3 nm wide, so
    by default they add nothing to the footprint.
    """

    mosfet_area: float = 1.0
    memristor_area: float = 0.0


def area_ratio(memos: DeviceCount, cmos: DeviceCount, geometry: AreaModel | None = None) -> float:
    """Hybrid footprint as a percentage of the all-CMOS footprint."""
    g = geometry or AreaModel()
    denom = cmos.mosfets * g.mosfet_area + cmos.memristors * g.memristor_area
    if denom == 0:
        raise ZeroDivisionError("reference circuit has zero area")
    return 100.0 * (memos.mosfets * g.mosfet_area + memos.memristors * g.memristor_area) / denom


def cell_ports(c: Circuit) -> tuple[list, list]:
    return [p.name for p in c.inputs], [p.name for p in c.outputs]


def reference_function(kind: CellKind, bits: int = 8):
    """Boolean reference: maps a dict of input bits to a dict of output bits."""
    k = kind

    def f(v):
        if k is CellKind.NOT:
            return {"Y": 1 - v["A"]}
        if k is CellKind.BUF:
            return {"Y": v["A"]}
        a, b = v["A"] if "A" in v else 0, v["B"] if "B" in v else 0
        table = {CellKind.AND: a & b, CellKind.OR: a | b, CellKind.NAND: 1 - (a & b),
                 CellKind.NOR: 1 - (a | b), CellKind.XOR: a ^ b, CellKind.XNOR: 1 - (a ^ b)}
        if k in table:
            return {"Y": table[k]}
        if k is CellKind.HALF_ADDER:
            return {"SUM": a ^ b, "Cout": a & b}
        if k is CellKind.FULL_ADDER:
            t = a + b + v["Cin"]
            return {"SUM": t & 1, "Cout": t >> 1}
        x = sum(v[f"A{i}"] << i for i in range(bits))
        y = sum(v[f"B{i}"] << i for i in range(bits))
        t = x + y + v["Cin"]
        res = {f"S{i}": (t >> i) & 1 for i in range(bits)}
        res["Cout"] = (t >> bits) & 1
        return res

    return f

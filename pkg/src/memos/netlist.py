"""Circuit graph and a small SPICE-flavoured netlist format.

Grammar (one card per line, case-insensitive keywords, ``*`` or ``//`` starts
a comment line)::

    MR<name> n+ n- TEAM [key=value ...]     TEAM memristor
    MR<name> n+ n- LID  [key=value ...]     linear ion drift memristor
    M<name>  d g s (NMOS|PMOS) [key=value ...]
    V<name>  n+ n- DC <v> | <v>
    V<name>  n+ n- PULSE(v1 v2 delay rise fall width period)
    V<name>  n+ n- SIN(amplitude frequency [offset])
    R<name>  n+ n- <ohms>
    .port in|out <name> <node>
    .vcc <node> <volts>
    .end

Numbers take SPICE scale suffixes (f p n u m k meg g t), trailing unit
letters are ignored (``1ns``, ``100kohm``). Node ``0`` or ``gnd`` is ground.

TEAM keys: ron roff kon koff alphaon alphaoff ion ioff xon xoff wc aon aoff
window polarity x0. LID keys: d muv ron roff polarity x0 (initial doped width).
MOSFET keys: vth kp lambda cgs cgd cdb. ``polarity`` is ``fwd`` or ``rev``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping, Union

import numpy as np

from .devices import (
    NMOS_180,
    PMOS_180,
    LinearDriftParams,
    MosfetParams,
    Polarity,
    TeamParams,
    default_state,
)

GROUND = "0"


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        loc = f"line {line}, column {column}: " if line else ""
        super().__init__(loc + message)
        self.message = message


def canonical_node(name: str) -> str:
    return GROUND if name.lower() in ("0", "gnd") else name


# --- sources ----------------------------------------------------------------


@dataclass(frozen=True)
class SourceSpec:
    """Independent voltage source waveform.

    ``args`` holds (v,) for dc, (v_low, v_high, delay, rise, fall, width,
    period) for pulse and (amplitude, frequency, offset) for sine.
    """

    kind: str
    args: tuple

    def __post_init__(self):
        if self.kind == "dc":
            if len(self.args) != 1:
                raise ValueError("dc source takes one value")
        elif self.kind == "pulse":
            if len(self.args) != 7:
                raise ValueError("pulse source takes 7 values")
            _, _, _, rise, fall, width, period = self.args
            if min(rise, fall, width, period) <= 0:
                raise ValueError("pulse rise, fall, width and period must be > 0")
        elif self.kind == "sine":
            if len(self.args) != 3:
                raise ValueError("sine source takes amplitude, frequency, offset")
            if self.args[1] <= 0:
                raise ValueError("sine frequency must be > 0")
        else:
            raise ValueError(f"unknown source kind {self.kind!r}")
        object.__setattr__(self, "args", tuple(float(a) for a in self.args))

    @classmethod
    def dc(cls, v: float) -> "SourceSpec":
        return cls("dc", (v,))

    @classmethod
    def pulse(cls, v_low, v_high, delay, rise, fall, width, period) -> "SourceSpec":
        return cls("pulse", (v_low, v_high, delay, rise, fall, width, period))

    @classmethod
    def sine(cls, amplitude, frequency, offset=0.0) -> "SourceSpec":
        return cls("sine", (amplitude, frequency, offset))

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "dc":
            return np.full_like(t, self.args[0])[()]
        if self.kind == "sine":
            amp, freq, off = self.args
            return (off + amp * np.sin(2 * math.pi * freq * t))[()]
        v1, v2, td, tr, tf, pw, per = self.args
        tau = np.where(t < td, -1.0, np.mod(t - td, per))
        out = np.full_like(t, v1)
        rising = (tau >= 0) & (tau < tr)
        out = np.where(rising, v1 + (v2 - v1) * tau / tr, out)
        high = (tau >= tr) & (tau < tr + pw)
        out = np.where(high, v2, out)
        falling = (tau >= tr + pw) & (tau < tr + pw + tf)
        out = np.where(falling, v2 - (v2 - v1) * (tau - tr - pw) / tf, out)
        return out[()]

    def breakpoints(self, t_stop: float) -> list[float]:
        if self.kind != "pulse":
            return []
        v1, v2, td, tr, tf, pw, per = self.args
        pts, k = [], 0
        while td + k * per <= t_stop:
            base = td + k * per
            pts += [base, base + tr, base + tr + pw, base + tr + pw + tf]
            k += 1
        return [p for p in pts if p <= t_stop]


# --- elements -----------------------------------------------------------------


@dataclass(frozen=True)
class Resistor:
    name: str
    a: str
    b: str
    ohms: float

    def __post_init__(self):
        if not self.ohms > 0:
            raise ValueError(f"{self.name}: resistance must be positive")

    @property
    def nodes(self) -> tuple:
        return (self.a, self.b)


@dataclass(frozen=True)
class Memristor:
    """Two-terminal memristor; ``a`` is the polarity-marked (+) terminal.

    Forward polarity: current entering ``a`` drives the device toward R_OFF.
    ``x0`` is the initial state (x for TEAM, doped width w for LID).
    """

    name: str
    a: str
    b: str
    params: Union[TeamParams, LinearDriftParams]
    polarity: Polarity = Polarity.FORWARD
    x0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "polarity", Polarity(self.polarity))
        if self.x0 is None:
            object.__setattr__(self, "x0", float(default_state(self.params)))
        lo, hi = self.params.x_min, self.params.x_max
        if not (lo <= self.x0 <= hi):
            raise ValueError(f"{self.name}: initial state {self.x0} outside [{lo}, {hi}]")

    @property
    def nodes(self) -> tuple:
        return (self.a, self.b)

    @property
    def model(self) -> str:
        return "TEAM" if isinstance(self.params, TeamParams) else "LID"


@dataclass(frozen=True)
class Mosfet:
    name: str
    d: str
    g: str
    s: str
    params: MosfetParams

    @property
    def nodes(self) -> tuple:
        return (self.d, self.g, self.s)


@dataclass(frozen=True)
class VSource:
    name: str
    a: str
    b: str
    spec: SourceSpec

    @property
    def nodes(self) -> tuple:
        return (self.a, self.b)


Element = Union[Resistor, Memristor, Mosfet, VSource]


@dataclass(frozen=True)
class Port:
    direction: str  # "in" | "out"
    name: str
    node: str


@dataclass(frozen=True)
class Circuit:
    """Immutable circuit: elements, ports and an optional supply rail.

    ``nodes`` lists every node name with ground first, so a node's index in
    the tuple is its dense id.
    """

    elements: tuple = ()
    ports: tuple = ()
    vcc: tuple | None = None  # (node, volts)
    name: str = field(default="", compare=False)
    nodes: tuple = field(default=(), compare=False, init=False, repr=False)

    def __post_init__(self):
        elements = tuple(_canon_element(e) for e in self.elements)
        ports = tuple(Port(p.direction, p.name, canonical_node(p.node)) for p in self.ports)
        vcc = None if self.vcc is None else (canonical_node(self.vcc[0]), float(self.vcc[1]))
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "ports", ports)
        object.__setattr__(self, "vcc", vcc)
        order = [GROUND]
        seen = {GROUND}

        def add(n):
            if n not in seen:
                seen.add(n)
                order.append(n)

        for e in elements:
            for n in e.nodes:
                add(n)
        for p in ports:
            add(p.node)
        if vcc is not None:
            add(vcc[0])
        object.__setattr__(self, "nodes", tuple(order))

    @property
    def node_index(self) -> dict:
        return {n: i for i, n in enumerate(self.nodes)}

    @property
    def inputs(self) -> list:
        return [p for p in self.ports if p.direction == "in"]

    @property
    def outputs(self) -> list:
        return [p for p in self.ports if p.direction == "out"]

    def port(self, name: str) -> Port:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)

    def element(self, name: str):
        for e in self.elements:
            if e.name == name:
                return e
        raise KeyError(name)

    def of_type(self, cls) -> list:
        return [e for e in self.elements if isinstance(e, cls)]

    def __len__(self):
        return len(self.elements)


def _canon_element(e):
    if isinstance(e, Mosfet):
        return replace(e, d=canonical_node(e.d), g=canonical_node(e.g), s=canonical_node(e.s))
    return replace(e, a=canonical_node(e.a), b=canonical_node(e.b))


# --- number parsing -------------------------------------------------------------

# decimal exponents, so "3n" parses to exactly the float 3e-9
_SCALE = {"t": 12, "g": 9, "meg": 6, "k": 3, "m": -3, "u": -6, "n": -9, "p": -12, "f": -15}
_NUM_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(meg|[tgkmunpf])?([a-z]*)$",
                     re.IGNORECASE)


def parse_value(text: str) -> float:
    """Parse a SPICE number such as ``100k``, ``5u``, ``1.0ns`` or ``1meg``."""
    m = _NUM_RE.match(text.strip())
    if not m:
        raise ValueError(f"not a number: {text!r}")
    num, scale, _unit = m.groups()
    if not scale:
        return float(num)
    mant, _, exp = num.lower().partition("e")
    return float(f"{mant}e{int(exp or 0) + _SCALE[scale.lower()]}")


# --- parsing --------------------------------------------------------------------

_TEAM_KEYS = {
    "ron": "r_on", "roff": "r_off", "kon": "k_on", "koff": "k_off",
    "alphaon": "alpha_on", "alphaoff": "alpha_off", "ion": "i_on", "ioff": "i_off",
    "xon": "x_on", "xoff": "x_off", "wc": "w_c", "aon": "a_on", "aoff": "a_off",
}
_LID_KEYS = {"d": "d", "muv": "mu_v", "ron": "r_on", "roff": "r_off"}
_MOS_KEYS = {"vth": "v_th", "kp": "k_prime", "lambda": "lambda_",
             "cgs": "c_gs", "cgd": "c_gd", "cdb": "c_db"}
_TOKEN_RE = re.compile(r"\S+")


def _tokens(line: str) -> list:
    return [(m.group(0), m.start() + 1) for m in _TOKEN_RE.finditer(line)]


def _kv_pairs(toks, lineno):
    out = {}
    for tok, col in toks:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", lineno, col)
        key, _, val = tok.partition("=")
        key = key.lower()
        if key in out:
            raise ParseError(f"parameter {key!r} given twice", lineno, col)
        out[key] = (val, col)
    return out


def _num(val, lineno, col):
    try:
        return parse_value(val)
    except ValueError:
        raise ParseError(f"bad number {val!r}", lineno, col) from None


def _parse_memristor(name, toks, lineno):
    if len(toks) < 3:
        raise ParseError(f"memristor {name} needs 2 nodes and a model", lineno,
                         toks[-1][1] if toks else 1)
    (a, _), (b, _), (model, mcol) = toks[:3]
    kv = _kv_pairs(toks[3:], lineno)
    model = model.upper()
    if model not in ("TEAM", "LID"):
        raise ParseError(f"unknown memristor model {model!r}", lineno, mcol)
    keys = _TEAM_KEYS if model == "TEAM" else _LID_KEYS
    kwargs, polarity, x0 = {}, Polarity.FORWARD, None
    for key, (val, col) in kv.items():
        if key == "polarity":
            try:
                polarity = Polarity(val.lower())
            except ValueError:
                raise ParseError(f"polarity must be fwd or rev, got {val!r}", lineno, col) from None
        elif key == "x0":
            x0 = _num(val, lineno, col)
        elif key == "window" and model == "TEAM":
            kwargs["window"] = val.lower()
        elif key in keys:
            kwargs[keys[key]] = _num(val, lineno, col)
        else:
            raise ParseError(f"undefined parameter {key!r} for {model}", lineno, col)
    try:
        params = TeamParams(**kwargs) if model == "TEAM" else LinearDriftParams(**kwargs)
        return Memristor(name, a, b, params, polarity, x0)
    except ValueError as exc:
        raise ParseError(str(exc), lineno, toks[0][1]) from None


def _parse_mosfet(name, toks, lineno):
    if len(toks) < 4:
        raise ParseError(f"MOSFET {name} needs 3 nodes and a model", lineno,
                         toks[-1][1] if toks else 1)
    (d, _), (g, _), (s, _), (model, mcol) = toks[:4]
    model = model.upper()
    if model == "NMOS":
        base = NMOS_180
    elif model == "PMOS":
        base = PMOS_180
    else:
        raise ParseError(f"unknown MOSFET model {model!r}", lineno, mcol)
    kwargs = {}
    for key, (val, col) in _kv_pairs(toks[4:], lineno).items():
        if key not in _MOS_KEYS:
            raise ParseError(f"undefined parameter {key!r} for {model}", lineno, col)
        kwargs[_MOS_KEYS[key]] = _num(val, lineno, col)
    try:
        return Mosfet(name, d, g, s, replace(base, **kwargs))
    except ValueError as exc:
        raise ParseError(str(exc), lineno, toks[0][1]) from None


_FUNC_RE = re.compile(r"^(PULSE|SIN)\s*\((.*)\)\s*$", re.IGNORECASE)


def _parse_vsource(name, toks, line, lineno):
    if len(toks) < 3:
        raise ParseError(f"source {name} needs 2 nodes and a value", lineno,
                         toks[-1][1] if toks else 1)
    (a, _), (b, _) = toks[:2]
    col = toks[2][1]
    rest = line[col - 1:].strip()
    m = _FUNC_RE.match(rest)
    try:
        if m:
            kind = m.group(1).upper()
            vals = [parse_value(v) for v in m.group(2).replace(",", " ").split()]
            if kind == "PULSE":
                if len(vals) != 7:
                    raise ParseError("PULSE takes 7 values", lineno, col)
                spec = SourceSpec.pulse(*vals)
            else:
                if len(vals) not in (2, 3):
                    raise ParseError("SIN takes amplitude, frequency [, offset]", lineno, col)
                spec = SourceSpec.sine(*vals)
        else:
            parts = rest.split()
            if parts[0].upper() == "DC":
                parts = parts[1:]
            if len(parts) != 1:
                raise ParseError(f"cannot read source value {rest!r}", lineno, col)
            spec = SourceSpec.dc(parse_value(parts[0]))
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc), lineno, col) from None
    return VSource(name, a, b, spec)


def _parse_resistor(name, toks, lineno):
    if len(toks) != 3:
        raise ParseError(f"resistor {name} needs 2 nodes and a value", lineno,
                         toks[-1][1] if toks else 1)
    (a, _), (b, _), (val, col) = toks
    try:
        return Resistor(name, a, b, _num(val, lineno, col))
    except ValueError as exc:
        raise ParseError(str(exc), lineno, col) from None


def parse_netlist(text: str, name: str = "") -> Circuit:
    """Parse netlist text into a validated-shape Circuit.

    Raises ParseError (with line and column) on malformed input. Structural
    problems such as floating nodes are left to :func:`validate`.
    """
    elements, ports, vcc = [], [], None
    names, port_names = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("*") or line.startswith("//"):
            continue
        toks = _tokens(raw)
        head, hcol = toks[0]
        low = head.lower()
        if low == ".end":
            break
        if low == ".port":
            if len(toks) != 4:
                raise ParseError(".port takes direction, name and node", lineno, hcol)
            direction = toks[1][0].lower()
            if direction not in ("in", "out"):
                raise ParseError(f"port direction must be in or out, got {toks[1][0]!r}",
                                 lineno, toks[1][1])
            pname, pnode = toks[2][0], toks[3][0]
            if pname in port_names:
                raise ParseError(f"port {pname!r} already defined on line {port_names[pname]}",
                                 lineno, toks[2][1])
            port_names[pname] = lineno
            ports.append(Port(direction, pname, pnode))
            continue
        if low == ".vcc":
            if len(toks) != 3:
                raise ParseError(".vcc takes a node and a value", lineno, hcol)
            new = (canonical_node(toks[1][0]), _num(toks[2][0], lineno, toks[2][1]))
            if vcc is not None and vcc != new:
                raise ParseError("conflicting .vcc definitions", lineno, hcol)
            vcc = new
            continue
        if low.startswith("."):
            raise ParseError(f"unknown directive {head!r}", lineno, hcol)

        if head in names:
            raise ParseError(f"element {head!r} already defined on line {names[head]}",
                             lineno, hcol)
        names[head] = lineno
        body = toks[1:]
        if low.startswith("mr"):
            el = _parse_memristor(head, body, lineno)
        elif low.startswith("m"):
            el = _parse_mosfet(head, body, lineno)
        elif low.startswith("v"):
            el = _parse_vsource(head, body, raw, lineno)
        elif low.startswith("r"):
            el = _parse_resistor(head, body, lineno)
        else:
            raise ParseError(f"unknown element card {head!r}", lineno, hcol)
        elements.append(el)

    if not elements and not ports:
        raise ParseError("empty circuit")
    return Circuit(tuple(elements), tuple(ports), vcc, name)


# --- serialization -----------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def _team_kv(p: TeamParams) -> list:
    inv = {v: k for k, v in _TEAM_KEYS.items()}
    out = []
    for f in fields(TeamParams):
        val = getattr(p, f.name)
        if f.name == "window":
            out.append(f"window={val}")
        elif val is not None:
            out.append(f"{inv[f.name]}={_fmt(val)}")
    return out


def serialize(c: Circuit) -> str:
    """Emit ``c`` in the netlist format; parse(serialize(c)) == c."""
    lines = [f"* {c.name}" if c.name else "* circuit"]
    for e in c.elements:
        if isinstance(e, Memristor):
            if isinstance(e.params, TeamParams):
                kv = _team_kv(e.params)
            else:
                p = e.params
                kv = [f"d={_fmt(p.d)}", f"muv={_fmt(p.mu_v)}",
                      f"ron={_fmt(p.r_on)}", f"roff={_fmt(p.r_off)}"]
            kv += [f"polarity={e.polarity.value}", f"x0={_fmt(e.x0)}"]
            lines.append(" ".join([e.name, e.a, e.b, e.model] + kv))
        elif isinstance(e, Mosfet):
            p = e.params
            model = "NMOS" if p.kind == "n" else "PMOS"
            kv = [f"{k}={_fmt(getattr(p, attr))}" for k, attr in _MOS_KEYS.items()]
            lines.append(" ".join([e.name, e.d, e.g, e.s, model] + kv))
        elif isinstance(e, VSource):
            s = e.spec
            if s.kind == "dc":
                val = f"DC {_fmt(s.args[0])}"
            elif s.kind == "pulse":
                val = "PULSE(" + " ".join(_fmt(a) for a in s.args) + ")"
            else:
                val = "SIN(" + " ".join(_fmt(a) for a in s.args) + ")"
            lines.append(f"{e.name} {e.a} {e.b} {val}")
        elif isinstance(e, Resistor):
            lines.append(f"{e.name} {e.a} {e.b} {_fmt(e.ohms)}")
    for p in c.ports:
        lines.append(f".port {p.direction} {p.name} {p.node}")
    if c.vcc is not None:
        lines.append(f".vcc {c.vcc[0]} {_fmt(c.vcc[1])}")
    lines.append(".end")
    return "\n".join(lines) + "\n"


# --- validation ---------------------------------------------------------------------


class _DisjointSet:
    def __init__(self):
        self.parent = {}

    def find(self, a):
        self.parent.setdefault(a, a)
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def validate(c: Circuit) -> list:
    """Return a list of human-readable violations; empty means simulatable.

    Input ports count as driven (the harness ties them to ground through a
    source), as does the supply rail.
    """
    problems = []
    touches_ground = any(GROUND in e.nodes for e in c.elements)
    if not (touches_ground or c.vcc is not None or c.inputs):
        problems.append("no ground node")

    # loops of ideal voltage sources (parallel sources included)
    dsu = _DisjointSet()
    if c.vcc is not None:
        dsu.union(c.vcc[0], GROUND)
    for e in c.of_type(VSource):
        if e.a == e.b:
            problems.append(f"source {e.name} is short-circuited")
        elif not dsu.union(e.a, e.b):
            problems.append(f"source {e.name} closes a loop of voltage sources")

    # every node needs a conducting path to a driven root
    adj = {n: set() for n in c.nodes}
    for e in c.elements:
        if isinstance(e, Mosfet):
            pairs = [(e.d, e.s)]
        else:
            pairs = [(e.a, e.b)]
        for a, b in pairs:
            adj[a].add(b)
            adj[b].add(a)
    roots = {GROUND} | {p.node for p in c.inputs}
    if c.vcc is not None:
        roots.add(c.vcc[0])
    seen, stack = set(roots), list(roots)
    while stack:
        n = stack.pop()
        for m in adj.get(n, ()):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    for n in c.nodes:
        if n not in seen:
            problems.append(f"floating node {n}")

    names = [e.name for e in c.elements]
    for n in sorted({n for n in names if names.count(n) > 1}):
        problems.append(f"duplicate element name {n}")
    pnames = [p.name for p in c.ports]
    for n in sorted({n for n in pnames if pnames.count(n) > 1}):
        problems.append(f"duplicate port name {n}")
    return problems


# --- composition ---------------------------------------------------------------------


def _card_prefix(e) -> str:
    if isinstance(e, Memristor):
        return "MR"
    if isinstance(e, Mosfet):
        return "M"
    return "V" if isinstance(e, VSource) else "R"


def _rename(e, prefix: str, nodemap: Mapping):
    head = _card_prefix(e)
    name = head + prefix + e.name[len(head):]
    if isinstance(e, Mosfet):
        return replace(e, name=name, d=nodemap[e.d], g=nodemap[e.g], s=nodemap[e.s])
    return replace(e, name=name, a=nodemap[e.a], b=nodemap[e.b])


def merge(sub: Circuit, into: Circuit, binding: Mapping, prefix: str | None = None) -> Circuit:
    """Instantiate ``sub`` inside ``into``.

    ``binding`` maps every port name of ``sub`` to a node name of the result
    (existing or fresh). Internal nodes of ``sub`` are renamed under
    ``prefix`` so they never alias nodes of ``into``; ground and the supply
    rail are shared. The ports of the result are those of ``into``.
    """
    if not sub.elements:
        return into
    sub_ports = {p.name: p for p in sub.ports}
    for name in binding:
        if name not in sub_ports:
            raise KeyError(f"binding references unknown port {name!r}")
    missing = set(sub_ports) - set(binding)
    if missing:
        raise KeyError(f"unbound ports {sorted(missing)}")
    if prefix is None:
        prefix = f"x{len(into.elements)}_"

    vcc = into.vcc if into.vcc is not None else sub.vcc
    nodemap = {GROUND: GROUND}
    if sub.vcc is not None:
        nodemap[sub.vcc[0]] = vcc[0]
    for name, port in sub_ports.items():
        target = canonical_node(binding[name])
        prev = nodemap.get(port.node)
        if prev is not None and prev != target:
            raise ValueError(f"port {name!r} node {port.node!r} bound to both {prev!r} "
                             f"and {target!r}")
        nodemap[port.node] = target
    taken = set(into.nodes) | set(nodemap.values())
    for n in sub.nodes:
        if n not in nodemap:
            new = f"{prefix}{n}"
            if new in taken:
                raise ValueError(f"prefix {prefix!r} collides on node {new!r}")
            nodemap[n] = new
            taken.add(new)
    new_elements = [_rename(e, prefix, nodemap) for e in sub.elements]
    existing = {e.name for e in into.elements}
    for e in new_elements:
        if e.name in existing:
            raise ValueError(f"prefix {prefix!r} collides on element {e.name!r}")
    return Circuit(into.elements + tuple(new_elements), into.ports, vcc, into.name)


def drive(c: Circuit, levels: Mapping) -> Circuit:
    """Attach sources to nodes, replacing any grounded source already there.

    ``levels`` maps a port name or node name to a SourceSpec or a DC value.
    """
    port_nodes = {p.name: p.node for p in c.ports}
    targets = {}
    for key, spec in levels.items():
        node = port_nodes.get(key, canonical_node(key))
        if not isinstance(spec, SourceSpec):
            spec = SourceSpec.dc(float(spec))
        targets[node] = (key, spec)
    kept = [e for e in c.elements
            if not (isinstance(e, VSource) and e.b == GROUND and e.a in targets)]
    used = {e.name for e in kept}
    for node, (key, spec) in targets.items():
        name = f"V_{key}"
        while name in used:
            name += "_"
        used.add(name)
        kept.append(VSource(name, node, GROUND, spec))
    return Circuit(tuple(kept), c.ports, c.vcc, c.name)


def flip_polarities(c: Circuit, names: Iterable | None = None) -> Circuit:
    """Reverse the polarity of the named memristors (all if ``names`` is None)."""
    chosen = None if names is None else set(names)
    out = []
    for e in c.elements:
        if isinstance(e, Memristor) and (chosen is None or e.name in chosen):
            e = replace(e, polarity=e.polarity.flipped())
        out.append(e)
    return Circuit(tuple(out), c.ports, c.vcc, c.name)


def with_initial_states(c: Circuit, states: Mapping) -> Circuit:
    out = [replace(e, x0=float(states[e.name])) if isinstance(e, Memristor) and e.name in states
           else e for e in c.elements]
    return Circuit(tuple(out), c.ports, c.vcc, c.name)

"""Command-line front end: ``memos simulate|characterize|iv-sweep|verify``.

Exit codes: 0 success, 1 input error, 2 solver divergence, 3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace

from . import __version__
from .devices import FIG3_TEAM, LinearDriftParams, TeamParams
from .measure import (CharacterizeConfig, LogicThresholds, cell_settle, characterize, check_rows,
                      format_table, loop_area, reports_to_json, ripple_vectors, truth_table)
from .netlist import (Memristor, ParseError, SourceSpec, flip_polarities, parse_netlist,
                      parse_value, validate)
from .solver import SolverConfig, SolverDivergence, iv_sweep, transient, write_csv
from .stdcells import (FAMILIES, TABLE_CELLS, CellKind, CellParams, build_cell,
                       count_devices, parse_cell, reference_function)

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED, EXIT_FAILED = 0, 1, 2, 3

# published device counts per family: (mosfets, memristors, vias); None = not reported
EXPECTED_COUNTS = {
    "memos": {
        CellKind.NOT: (2, 0, None), CellKind.AND: (0, 2, None), CellKind.OR: (0, 2, None),
        CellKind.NAND: (2, 2, None), CellKind.NOR: (2, 2, None), CellKind.XOR: (4, 6, None),
        CellKind.XNOR: (4, 6, None), CellKind.BUF: (4, 0, None),
        CellKind.HALF_ADDER: (8, 8, 5), CellKind.FULL_ADDER: (16, 18, 10),
    },
    "cmos": {
        CellKind.NOT: (2, 0, 0), CellKind.AND: (6, 0, 0), CellKind.OR: (6, 0, 0),
        CellKind.NAND: (4, 0, 0), CellKind.NOR: (4, 0, 0), CellKind.XOR: (12, 0, 0),
        CellKind.XNOR: (12, 0, 0), CellKind.BUF: (4, 0, 0),
        CellKind.HALF_ADDER: (14, 0, 0), CellKind.FULL_ADDER: (34, 0, 0),
    },
}

# per-model defaults for the I-V sweep: the drive frequency sits where the
# default device completes a visible loop in one period
IV_DEFAULT_FREQ = {"team": 1e6, "lid": 1e3}

DETERMINISM_NOTE = "no random state except seeded vector generation; reruns give identical files"


class InputError(Exception):
    """Bad user input; reported on stderr with exit code 1."""


def expected_counts(kind: CellKind, family: str, bits: int) -> tuple:
    if kind is CellKind.RIPPLE_ADDER:
        fa = EXPECTED_COUNTS[family][CellKind.FULL_ADDER]
        return tuple(None if n is None else n * bits for n in fa)
    return EXPECTED_COUNTS[family][kind]


# -- config files ------------------------------------------------------------

def read_kv(path) -> dict:
    """``key = value`` lines, ``#`` comments. Values are floats where they parse."""
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


def _apply(obj, values: dict, what: str):
    names = {f.name for f in fields(obj)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise InputError(f"unknown {what} key(s): {', '.join(unknown)}")
    cast = {f.name: type(getattr(obj, f.name)) for f in fields(obj)}
    fixed = {k: (int(v) if cast[k] is int else v) for k, v in values.items()}
    try:
        return replace(obj, **fixed)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad {what}: {exc}") from None


def _solver_config(conf: dict, args) -> SolverConfig:
    conf = dict(conf)
    if "tstop" in conf:
        conf["t_stop"] = conf.pop("tstop")
    if args.tstop is not None:
        conf["t_stop"] = args.tstop
    if args.dt is not None:
        conf["dt"] = args.dt
    if "t_stop" in conf and "dt" not in conf:
        conf["dt"] = min(SolverConfig.dt, conf["t_stop"])
    return _apply(SolverConfig(), conf, "solver")


def _split_config(conf: dict):
    """Split a characterize config into cell, memristor and harness overrides."""
    team = {k: v for k, v in conf.items() if k in {f.name for f in fields(TeamParams)}}
    cell = {k: v for k, v in conf.items() if k in ("vcc",)}
    rest = {k: v for k, v in conf.items() if k not in team and k not in cell}
    return cell, team, rest


def write_manifest(out_dir, command, argv, inputs, config, outputs) -> str:
    path = os.path.join(out_dir or ".", "run.json")
    doc = {
        "command": command,
        "argv": list(argv),
        "inputs": sorted(inputs),
        "config": config,
        "outputs": sorted(outputs),
        "version": __version__,
        "determinism": DETERMINISM_NOTE,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _parse_cells(text: str) -> list:
    names = TABLE_CELLS if text.strip().lower() == "all" else [s for s in text.split(",") if s.strip()]
    out = []
    for name in names:
        try:
            kind, bits = parse_cell(name)
        except ValueError as exc:
            raise InputError(f"{exc}; choose from {', '.join(k.value for k in CellKind)} or all")
        out.append((kind, bits))
    if not out:
        raise InputError("no cells given")
    return out


def _families(text: str) -> list:
    if text == "both":
        return list(FAMILIES)
    if text not in FAMILIES:
        raise InputError(f"unknown family {text!r}")
    return [text]


def _number(text: str) -> float:
    """argparse type accepting SPICE suffixes (``1n``, ``10ps``)."""
    try:
        return parse_value(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _open_out(path):
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    return open(path, "w")


def _parallel_map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- commands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        with open(args.netlist) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {args.netlist}: {exc.strerror}")
    try:
        c = parse_netlist(text, os.path.basename(args.netlist))
    except ParseError as exc:
        raise InputError(f"{args.netlist}: line {exc.line}, column {exc.column}: {exc.message}")
    conf = read_kv(args.config) if args.config else {}
    cfg = _solver_config(conf, args)
    for problem in validate(c):
        print(f"warning: {problem}", file=sys.stderr)

    probes = args.probe or [p.name for p in c.ports] or [n for n in c.nodes if n != "0"]
    ports = {p.name for p in c.ports}
    sources = {e.name for e in c.elements}
    for name in probes:
        if name.startswith("I(") and name.endswith(")"):
            if name[2:-1] not in sources and name != "I(Vvcc)":
                raise InputError(f"unknown source in probe {name!r}")
        elif name not in ports and name not in c.nodes:
            raise InputError(f"unknown probe {name!r}")

    out = args.out or os.path.splitext(os.path.basename(args.netlist))[0] + ".csv"
    status = EXIT_OK
    try:
        result = transient(c, cfg)
    except SolverDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        result, status = exc.partial, EXIT_DIVERGED
    _open_out(out).close()
    write_csv(result, probes, out)
    write_manifest(os.path.dirname(out), "simulate", args.argv, [args.netlist] +
                   ([args.config] if args.config else []),
                   {"dt": cfg.dt, "t_stop": cfg.t_stop}, [out])
    print(f"wrote {out} ({len(result.times)} samples)")
    return status


def _characterize_one(job):
    kind, bits, family, params, cfg = job
    name = kind.value if bits is None else f"{kind.value}({bits})"
    return characterize(name, family, params, cfg)


def _cell_params(conf: dict) -> tuple:
    cell, team, rest = _split_config(conf)
    params = CellParams()
    if team:
        params = replace(params, memristor=_apply(FIG3_TEAM, team, "memristor"))
    if cell:
        params = replace(params, vcc=cell["vcc"])
    return params, rest


def cmd_characterize(args) -> int:
    cells = _parse_cells(args.cells)
    families = _families(args.family)
    conf = read_kv(args.config) if args.config else {}
    params, rest = _cell_params(conf)
    cfg = _apply(CharacterizeConfig(), rest, "characterize")
    jobs = [(kind, bits, fam, params, cfg) for kind, bits in cells for fam in families]
    try:
        reports = _parallel_map(_characterize_one, jobs, args.jobs)
    except SolverDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    print(format_table(reports), end="")
    out = args.out
    with _open_out(out) as fh:
        fh.write(reports_to_json(reports))
    write_manifest(os.path.dirname(out), "characterize", args.argv,
                   [args.config] if args.config else [], conf, [out])
    print(f"wrote {out}")
    return EXIT_OK if all(r.truth_table_pass for r in reports) else EXIT_FAILED


def cmd_iv_sweep(args) -> int:
    conf = read_kv(args.params) if args.params else {}
    if args.model == "team":
        params = _apply(FIG3_TEAM, conf, "TEAM")
    else:
        params = _apply(LinearDriftParams(), conf, "linear drift")
    try:
        mults = [float(m) for m in args.mult.split(",") if m.strip()]
    except ValueError:
        raise InputError(f"bad --mult {args.mult!r}")
    if not mults or min(mults) <= 0:
        raise InputError("--mult needs positive multiples")
    freq = args.freq or IV_DEFAULT_FREQ[args.model]
    if freq <= 0:
        raise InputError("--freq must be positive")

    device = Memristor("MR1", "p", "0", params)
    stem, ext = os.path.splitext(args.out)
    outputs, areas = [], []
    for m in mults:
        f = freq * m
        cfg = SolverConfig(dt=1.0 / (f * args.samples), t_stop=1.0 / f)
        try:
            v, i = iv_sweep(device, SourceSpec.sine(args.amp, f), cfg)
        except SolverDivergence as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
        path = f"{stem}_x{m:g}{ext or '.csv'}"
        with _open_out(path) as fh:
            fh.write("v,i\n")
            for a, b in zip(v, i):
                fh.write(f"{a:.8e},{b:.8e}\n")
        outputs.append(path)
        area = loop_area(v, i)
        areas.append(area)
        print(f"x{m:g}  f={f:.6g} Hz  loop area={area:.6e} V*A")
    if len(areas) > 1 and areas[0] > 0:
        print(f"area(x{mults[-1]:g}) / area(x{mults[0]:g}) = {areas[-1] / areas[0]:.4f}")
    write_manifest(os.path.dirname(args.out), "iv-sweep", args.argv,
                   [args.params] if args.params else [],
                   {"model": args.model, "amp": args.amp, "freq": freq, "mult": mults}, outputs)
    return EXIT_OK


def verify_cell(kind: CellKind, family: str = "memos", bits: int | None = None,
                params: CellParams | None = None, flip: bool = False) -> list:
    """Problems found in one cell: device counts, then the simulated truth table."""
    p = params or CellParams()
    if bits is not None:
        p = replace(p, bits=bits)
    problems = []
    counts = count_devices(build_cell(kind, family, p))
    want = expected_counts(kind, family, p.bits)
    got = (counts.mosfets, counts.memristors, counts.vias)
    for label, g, w in zip(("MOSFETs", "memristors", "vias"), got, want):
        if w is not None and g != w:
            problems.append(f"{label}: {g}, expected {w}")
    c = build_cell(kind, family, p, output_buffers=True)
    if flip:
        c = flip_polarities(c)
    vectors = ripple_vectors(p.bits) if kind is CellKind.RIPPLE_ADDER else None
    rows = truth_table(c, th=LogicThresholds.for_vcc(p.vcc), settle=cell_settle(kind, p.bits),
                       vectors=vectors)
    for row in check_rows(rows, reference_function(kind, p.bits)):
        ins = "".join(str(row.inputs[k]) for k in row.inputs)
        outs = " ".join(f"{k}={v}" for k, v in row.outputs.items())
        problems.append(f"inputs {ins}: {outs}")
    return problems


def _verify_one(job):
    kind, bits, family, flip = job
    try:
        return verify_cell(kind, family, bits, flip=flip), None
    except SolverDivergence as exc:
        return [], str(exc)


def cmd_verify(args) -> int:
    cells = _parse_cells(args.cells)
    families = _families(args.family)
    flipped = {parse_cell(n)[0] for n in args.flip_polarity.split(",") if n.strip()} \
        if args.flip_polarity else set()
    jobs = [(kind, bits, fam, kind in flipped) for kind, bits in cells for fam in families]
    results = _parallel_map(_verify_one, jobs, args.jobs)
    passed, diverged = 0, False
    for (kind, bits, fam, _), (problems, err) in zip(jobs, results):
        name = kind.value if bits is None else f"{kind.value}({bits})"
        label = f"{name} [{fam}]"
        if err:
            diverged = True
            print(f"DIVERGED  {label}: {err}")
        elif problems:
            print(f"FAIL  {label}")
            for p in problems:
                print(f"      {p}")
        else:
            passed += 1
            print(f"pass  {label}")
    print(f"{passed}/{len(jobs)} cells pass")
    if diverged:
        return EXIT_DIVERGED
    return EXIT_OK if passed == len(jobs) else EXIT_FAILED


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="memos", description="Hybrid memristor-CMOS logic simulator.")
    ap.add_argument("--version", action="version", version=f"memos {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="transient simulation of a netlist file")
    s.add_argument("netlist")
    s.add_argument("--tstop", type=_number, help="stop time in seconds")
    s.add_argument("--dt", type=_number, help="output time step in seconds")
    s.add_argument("--probe", action="append", help="port, node, or I(source); repeatable")
    s.add_argument("--out", help="CSV path (default: <netlist>.csv)")
    s.add_argument("--config", help="key=value file with solver settings; flags win")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("characterize", help="timing, power, and counts per cell")
    c.add_argument("--cells", default="all", help="'all' or comma-separated, e.g. AND,RIPPLE_ADDER(4)")
    c.add_argument("--family", default="memos", choices=("memos", "cmos", "both"))
    c.add_argument("--out", default="report.json")
    c.add_argument("--config", help="key=value file: vcc, memristor and harness settings")
    c.add_argument("--jobs", type=int, default=1)
    c.set_defaults(func=cmd_characterize)

    i = sub.add_parser("iv-sweep", help="sinusoidal I-V sweep of one memristor")
    i.add_argument("--model", default="team", choices=("team", "lid"))
    i.add_argument("--params", help="key=value file of model parameters")
    i.add_argument("--amp", type=_number, default=1.0, help="drive amplitude in volts")
    i.add_argument("--freq", type=_number, help="base drive frequency in Hz")
    i.add_argument("--mult", default="1,5,10", help="comma-separated frequency multiples")
    i.add_argument("--samples", type=int, default=2000, help="time steps per period")
    i.add_argument("--out", default="iv.csv", help="path stem; one file per multiple")
    i.set_defaults(func=cmd_iv_sweep)

    v = sub.add_parser("verify", help="truth tables and device counts")
    v.add_argument("--cells", default="all")
    v.add_argument("--family", default="memos", choices=("memos", "cmos", "both"))
    v.add_argument("--flip-polarity", default="",
                   help="cells whose memristor polarities are reversed before checking")
    v.add_argument("--jobs", type=int, default=1)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse: usage errors exit 2, which means divergence here
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    args.argv = argv
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if args.command in ("characterize", "verify"):
            print(f"usage hint: memos {args.command} --cells all|NOT,AND,...", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

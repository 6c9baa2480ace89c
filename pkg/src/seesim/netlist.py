"""Structural gate-level netlist front-end.

Parses a small structural Verilog subset, flattens the module hierarchy into a
:class:`FlatDesign` and computes combinational levels.

Grammar (whitespace-insensitive, ``//`` comments)::

    design   := module+
    module   := "module" ID "(" [portdecl ("," portdecl)*] ")" ";" (wiredecl | instance)* "endmodule"
    portdecl := ["input" | "output"] ID
    wiredecl := "wire" ID ("," ID)* ";"
    instance := ID ID "(" conn ("," conn)* ")" ";"
    conn     := "." ID "(" [ID] ")" | ID
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum


class CellKind(str, Enum):
    COMBINATIONAL = "combinational"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class GateDef:
    name: str
    inputs: tuple[str, ...]
    output: str

    @property
    def pins(self) -> tuple[str, ...]:
        return self.inputs + (self.output,)

    @property
    def kind(self) -> CellKind:
        return CellKind.SEQUENTIAL if self.name in SEQUENTIAL_TYPES else CellKind.COMBINATIONAL


LIBRARY: dict[str, GateDef] = {
    g.name: g
    for g in (
        GateDef("NOT", ("A",), "Y"),
        GateDef("BUF", ("A",), "Y"),
        GateDef("AND2", ("A", "B"), "Y"),
        GateDef("OR2", ("A", "B"), "Y"),
        GateDef("NAND2", ("A", "B"), "Y"),
        GateDef("NOR2", ("A", "B"), "Y"),
        GateDef("XOR2", ("A", "B"), "Y"),
        GateDef("XNOR2", ("A", "B"), "Y"),
        # Y = S ? B : A
        GateDef("MUX2", ("A", "B", "S"), "Y"),
        GateDef("DFF", ("D", "CK"), "Q"),
        GateDef("DFFR", ("D", "CK", "R"), "Q"),
    )
}
SEQUENTIAL_TYPES = frozenset({"DFF", "DFFR"})


class NetlistError(Exception):
    """Base class for netlist front-end errors."""


class NetlistSyntaxError(NetlistError, SyntaxError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"{msg} (line {line}, column {column})")
        self.msg = msg
        self.lineno = line
        self.offset = column

    def __str__(self):
        return f"{self.msg} (line {self.lineno}, column {self.offset})"


class UndeclaredNet(NetlistError):
    pass


class UnknownMaster(NetlistError):
    pass


class UnknownPort(NetlistError):
    pass


class DuplicateModule(NetlistError):
    pass


class DuplicateName(NetlistError):
    pass


class UnconnectedPin(NetlistError):
    pass


class RecursiveHierarchy(NetlistError):
    pass


class MultipleDrivers(NetlistError):
    def __init__(self, net: str, drivers: list[str]):
        super().__init__(f"net {net!r} has multiple drivers: {', '.join(drivers)}")
        self.net = net
        self.drivers = drivers


class CombinationalLoop(NetlistError):
    def __init__(self, cycle: list[str]):
        super().__init__("combinational loop through " + " -> ".join(cycle))
        self.cycle = cycle


# --------------------------------------------------------------------------
# source model


@dataclass
class Port:
    name: str
    direction: str  # "input" | "output"


@dataclass
class Instance:
    master: str
    name: str
    conns: dict[str, str | None]  # pin -> net (None: explicitly unconnected)
    line: int = field(default=0, compare=False)


@dataclass
class Module:
    name: str
    ports: list[Port] = field(default_factory=list)
    wires: list[str] = field(default_factory=list)
    instances: list[Instance] = field(default_factory=list)

    def port_names(self) -> list[str]:
        return [p.name for p in self.ports]

    def declared(self) -> set[str]:
        return set(self.port_names()) | set(self.wires)


@dataclass
class NetlistSource:
    modules: dict[str, Module]

    def top_candidates(self) -> list[str]:
        """Modules never instantiated by another module."""
        used = {inst.master for m in self.modules.values() for inst in m.instances}
        return [name for name in self.modules if name not in used]


# --------------------------------------------------------------------------
# parser

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\f\v]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<id>[A-Za-z_\\][A-Za-z0-9_$\[\]]*)|(?P<punct>[().,;])"
)
_KEYWORDS = {"module", "endmodule", "input", "output", "wire"}


@dataclass
class _Tok:
    kind: str  # "id" | "kw" | "punct" | "eof"
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise NetlistSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "id":
            word = m.group()
            toks.append(_Tok("kw" if word in _KEYWORDS else "id", word, line, col))
        elif kind == "punct":
            toks.append(_Tok("punct", m.group(), line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        found = tok.text or "end of input"
        raise NetlistSyntaxError(f"{msg}, found {found!r}", tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text or tok.kind == "id":
            self.error(f"expected {text!r}")
        return self.next()

    def ident(self) -> _Tok:
        tok = self.peek()
        if tok.kind != "id":
            self.error("expected identifier")
        return self.next()

    def design(self) -> list[tuple[Module, _Tok]]:
        modules = []
        if self.peek().kind == "eof":
            self.error("expected 'module'")
        while self.peek().kind != "eof":
            modules.append(self.module())
        return modules

    def module(self) -> tuple[Module, _Tok]:
        self.expect("module")
        name_tok = self.ident()
        mod = Module(name_tok.text)
        self.expect("(")
        direction = None
        if self.peek().text != ")":
            while True:
                tok = self.peek()
                if tok.kind == "kw" and tok.text in ("input", "output"):
                    direction = self.next().text
                if direction is None:
                    self.error("expected port direction")
                port = self.ident()
                mod.ports.append(Port(port.text, direction))
                if self.peek().text == ",":
                    self.next()
                    continue
                break
        self.expect(")")
        self.expect(";")
        while True:
            tok = self.peek()
            if tok.kind == "kw" and tok.text == "endmodule":
                self.next()
                break
            if tok.kind == "kw" and tok.text == "wire":
                self.next()
                mod.wires.append(self.ident().text)
                while self.peek().text == ",":
                    self.next()
                    mod.wires.append(self.ident().text)
                self.expect(";")
            elif tok.kind == "id":
                mod.instances.append(self.instance())
            else:
                self.error("expected 'wire', instance or 'endmodule'")
        return mod, name_tok

    def instance(self) -> Instance:
        master = self.ident()
        name = self.ident()
        self.expect("(")
        named: dict[str, str | None] = {}
        positional: list[str] = []
        while True:
            tok = self.peek()
            if tok.text == ".":
                self.next()
                pin = self.ident().text
                self.expect("(")
                net = None
                if self.peek().kind == "id":
                    net = self.ident().text
                self.expect(")")
                if pin in named:
                    self.error(f"pin {pin!r} connected twice", tok)
                named[pin] = net
            elif tok.kind == "id":
                positional.append(self.next().text)
            else:
                self.error("expected connection")
            if self.peek().text == ",":
                self.next()
                continue
            break
        if named and positional:
            self.error("mixed named and positional connections", master)
        self.expect(")")
        self.expect(";")
        inst = Instance(master.text, name.text, named, line=master.line)
        if positional:
            inst.conns = {f"#{k}": net for k, net in enumerate(positional)}
        return inst


def _pin_order(src: dict[str, Module], master: str) -> list[str]:
    if master in LIBRARY:
        return list(LIBRARY[master].pins)
    return src[master].port_names()


def parse_netlist(text: str) -> NetlistSource:
    """Parse netlist text into a :class:`NetlistSource`.

    Positional connections are resolved to named ones by port order, so the
    returned model only holds named connections.
    """
    parser = _Parser(text)
    modules: dict[str, Module] = {}
    for mod, tok in parser.design():
        if mod.name in modules:
            raise DuplicateModule(f"module {mod.name!r} defined twice (line {tok.line})")
        if mod.name in LIBRARY:
            raise DuplicateModule(f"module {mod.name!r} shadows a library gate (line {tok.line})")
        modules[mod.name] = mod

    for mod in modules.values():
        declared = mod.declared()
        seen_names = set()
        if len(declared) != len(mod.ports) + len(mod.wires):
            raise DuplicateName(f"module {mod.name!r}: net declared twice")
        for inst in mod.instances:
            if inst.master not in LIBRARY and inst.master not in modules:
                raise UnknownMaster(inst.master)
            if inst.name in seen_names:
                raise DuplicateName(f"module {mod.name!r}: instance {inst.name!r} defined twice")
            seen_names.add(inst.name)
            order = _pin_order(modules, inst.master)
            if any(pin.startswith("#") for pin in inst.conns):
                if len(inst.conns) > len(order):
                    raise UnknownPort(
                        f"{mod.name}.{inst.name}: {len(inst.conns)} connections for "
                        f"{inst.master} with {len(order)} ports"
                    )
                inst.conns = {order[k]: net for k, net in enumerate(inst.conns.values())}
            for pin, net in inst.conns.items():
                if pin not in order:
                    raise UnknownPort(f"{mod.name}.{inst.name}: {inst.master} has no port {pin!r}")
                if net is not None and net not in declared:
                    raise UndeclaredNet(f"module {mod.name!r}: net {net!r} is not declared (line {inst.line})")
    return NetlistSource(modules)


def format_netlist(src: NetlistSource) -> str:
    """Print a source model back to netlist text (named connections only)."""
    out = []
    for mod in src.modules.values():
        ports = ", ".join(f"{p.direction} {p.name}" for p in mod.ports)
        out.append(f"module {mod.name}({ports});")
        if mod.wires:
            out.append(f"  wire {', '.join(mod.wires)};")
        for inst in mod.instances:
            conns = ", ".join(f".{pin}({net or ''})" for pin, net in inst.conns.items())
            out.append(f"  {inst.master} {inst.name}({conns});")
        out.append("endmodule")
        out.append("")
    return "\n".join(out)


# --------------------------------------------------------------------------
# elaboration


@dataclass(frozen=True)
class CellInfo:
    id: int
    path: tuple[str, ...]
    instance_name: str
    cell_type: str
    kind: CellKind
    output_net: int
    inputs: tuple[int, ...]  # net ids in library pin order

    @property
    def name(self) -> str:
        return ".".join(self.path + (self.instance_name,))

    @property
    def is_sequential(self) -> bool:
        return self.kind is CellKind.SEQUENTIAL


@dataclass(frozen=True)
class FlatDesign:
    top: str
    cells: tuple[CellInfo, ...]
    nets: tuple[str, ...]  # net id -> hierarchical name
    primary_inputs: tuple[int, ...]
    primary_outputs: tuple[int, ...]
    clock_nets: tuple[int, ...]

    def __post_init__(self):
        net_index = {name: i for i, name in enumerate(self.nets)}
        driver = {}
        for c in self.cells:
            driver[c.output_net] = c.id
        sinks: list[list[int]] = [[] for _ in self.nets]
        for c in self.cells:
            for net in c.inputs:
                if c.id not in sinks[net]:
                    sinks[net].append(c.id)
        object.__setattr__(self, "_net_index", net_index)
        object.__setattr__(self, "_driver", driver)
        object.__setattr__(self, "_sinks", tuple(tuple(s) for s in sinks))

    def net_id(self, name: str) -> int:
        return self._net_index[name]

    def driver_of(self, net: int) -> int | None:
        """Cell id driving ``net`` or None for primary inputs and undriven nets."""
        return self._driver.get(net)

    def sinks_of(self, net: int) -> tuple[int, ...]:
        return self._sinks[net]

    def cell_by_name(self, name: str) -> CellInfo:
        for c in self.cells:
            if c.name == name:
                return c
        raise KeyError(name)


def elaborate(src: NetlistSource, top: str) -> FlatDesign:
    """Flatten the hierarchy below ``top`` into a :class:`FlatDesign`."""
    if top not in src.modules:
        raise UnknownMaster(top)
    nets: list[str] = []
    cells: list[CellInfo] = []
    drivers: dict[int, list[str]] = {}

    def new_net(name: str) -> int:
        nets.append(name)
        return len(nets) - 1

    top_mod = src.modules[top]
    top_map = {p.name: new_net(p.name) for p in top_mod.ports}
    pis = tuple(top_map[p.name] for p in top_mod.ports if p.direction == "input")
    pos = tuple(top_map[p.name] for p in top_mod.ports if p.direction == "output")
    for net in pis:
        drivers[net] = ["<input>"]

    def walk(mod: Module, path: tuple[str, ...], netmap: dict[str, int], stack: tuple[str, ...]):
        prefix = ".".join(path) + "." if path else ""
        for w in mod.wires:
            netmap[w] = new_net(prefix + w)
        for inst in mod.instances:
            if inst.master in LIBRARY:
                gate = LIBRARY[inst.master]
                ids = []
                for pin in gate.pins:
                    net = inst.conns.get(pin)
                    if net is None:
                        raise UnconnectedPin(f"{prefix}{inst.name}: pin {pin} of {gate.name} is unconnected")
                    ids.append(netmap[net])
                cell = CellInfo(
                    id=len(cells),
                    path=path,
                    instance_name=inst.name,
                    cell_type=gate.name,
                    kind=gate.kind,
                    output_net=ids[-1],
                    inputs=tuple(ids[:-1]),
                )
                cells.append(cell)
                drivers.setdefault(cell.output_net, []).append(cell.name)
            else:
                if inst.master in stack:
                    raise RecursiveHierarchy(" -> ".join(stack + (inst.master,)))
                child = src.modules[inst.master]
                child_path = path + (inst.name,)
                child_prefix = ".".join(child_path) + "."
                child_map = {}
                for p in child.ports:
                    net = inst.conns.get(p.name)
                    child_map[p.name] = netmap[net] if net is not None else new_net(child_prefix + p.name)
                walk(child, child_path, child_map, stack + (inst.master,))

    walk(top_mod, (), dict(top_map), (top,))

    for net, who in drivers.items():
        if len(who) > 1:
            raise MultipleDrivers(nets[net], who)

    clocks = sorted({c.inputs[1] for c in cells if c.is_sequential})
    design = FlatDesign(
        top=top,
        cells=tuple(cells),
        nets=tuple(nets),
        primary_inputs=pis,
        primary_outputs=pos,
        clock_nets=tuple(clocks),
    )
    levelize(design)
    return design


# --------------------------------------------------------------------------
# structural properties


def _comb_driver(d: FlatDesign, net: int) -> int | None:
    cid = d.driver_of(net)
    if cid is None or d.cells[cid].is_sequential:
        return None
    return cid


def _find_cycle(d: FlatDesign, remaining: set[int]) -> list[str]:
    # every remaining cell has a combinational predecessor that is also remaining
    start = min(remaining)
    seen: dict[int, int] = {}
    order = []
    cur = start
    while cur not in seen:
        seen[cur] = len(order)
        order.append(cur)
        preds = sorted(
            p for p in (_comb_driver(d, n) for n in d.cells[cur].inputs) if p is not None and p in remaining
        )
        cur = preds[0]
    cycle = order[seen[cur]:]
    cycle.reverse()
    return [d.cells[c].name for c in cycle]


def levelize(d: FlatDesign) -> dict[int, int]:
    """Level of every cell: 1 + max level of its combinational drivers.

    Primary inputs, undriven nets and flip-flop outputs are level-0 sources.
    Flip-flops get a level too (one above the cone feeding their inputs) but
    never propagate it to their fanout.
    """
    indeg = {}
    for c in d.cells:
        indeg[c.id] = len({p for p in (_comb_driver(d, n) for n in c.inputs) if p is not None})
    level = {c.id: 1 for c in d.cells}
    queue = deque(sorted(cid for cid, k in indeg.items() if k == 0))
    done = 0
    while queue:
        cid = queue.popleft()
        done += 1
        cell = d.cells[cid]
        if cell.is_sequential:
            continue
        for succ in d.sinks_of(cell.output_net):
            level[succ] = max(level[succ], level[cid] + 1)
            indeg[succ] -= 1
            if indeg[succ] == 0:
                queue.append(succ)
    if done != len(d.cells):
        remaining = {cid for cid, k in indeg.items() if k > 0}
        raise CombinationalLoop(_find_cycle(d, remaining))
    return level


def reverse_levelize(d: FlatDesign) -> dict[int, int]:
    """Longest combinational distance to a sink: 1 for cells whose output only
    reaches primary outputs or flip-flop inputs."""
    levels = levelize(d)
    depth = {}
    # flip-flops do not order against their fanout, so they go last
    for cid in sorted(levels, key=lambda c: (d.cells[c].is_sequential, -levels[c])):
        cell = d.cells[cid]
        succ = [s for s in d.sinks_of(cell.output_net) if not d.cells[s].is_sequential]
        depth[cid] = 1 + max((depth[s] for s in succ), default=0)
    return depth


def fan_in(d: FlatDesign, cid: int) -> int:
    return len(d.cells[cid].inputs)


def fan_out(d: FlatDesign, cid: int) -> int:
    """Number of input pins reading the cell's output, plus one if it is a primary output."""
    net = d.cells[cid].output_net
    pins = sum(1 for s in d.sinks_of(net) for n in d.cells[s].inputs if n == net)
    return pins + (1 if net in d.primary_outputs else 0)


def summarize(d: FlatDesign) -> dict:
    levels = levelize(d)
    counts: dict[str, int] = {}
    for c in d.cells:
        counts[c.cell_type] = counts.get(c.cell_type, 0) + 1
    return {
        "top": d.top,
        "num_cells": len(d.cells),
        "num_nets": len(d.nets),
        "num_sequential": sum(c.is_sequential for c in d.cells),
        "primary_inputs": [d.nets[n] for n in d.primary_inputs],
        "primary_outputs": [d.nets[n] for n in d.primary_outputs],
        "clock_nets": [d.nets[n] for n in d.clock_nets],
        "max_level": max(levels.values(), default=0),
        "cell_types": dict(sorted(counts.items())),
        "cells": [
            {
                "id": c.id,
                "name": c.name,
                "path": list(c.path),
                "type": c.cell_type,
                "kind": c.kind.value,
                "output": d.nets[c.output_net],
                "inputs": [d.nets[n] for n in c.inputs],
                "level": levels[c.id],
            }
            for c in d.cells
        ],
    }


def load_design(text: str, top: str | None = None) -> FlatDesign:
    """Parse and elaborate; ``top`` defaults to the single uninstantiated module."""
    src = parse_netlist(text)
    if top is None:
        cands = src.top_candidates()
        if len(cands) != 1:
            raise NetlistError(f"cannot infer top module, candidates: {cands}")
        top = cands[0]
    return elaborate(src, top)

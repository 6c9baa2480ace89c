"""Generate the bundled mini-SoC netlist and its stimulus.

    python tools/gen_minisoc.py src/seesim/data
"""

import json
import random
import sys
from pathlib import Path

W = 4  # datapath width


class Mod:
    def __init__(self, name, ports):
        self.name = name
        self.ports = ports  # list of (dir, name)
        self.wires = []
        self.insts = []
        self.n = 0

    def wire(self, *names):
        self.wires.extend(names)
        return names[0] if len(names) == 1 else names

    def tmp(self, stem="n"):
        self.n += 1
        return self.wire(f"{stem}{self.n}")

    def gate(self, master, name, **conns):
        self.insts.append((master, name, conns))

    def text(self):
        ports = ", ".join(f"{d} {n}" for d, n in self.ports)
        out = [f"module {self.name}({ports});"]
        for k in range(0, len(self.wires), 8):
            out.append("  wire " + ", ".join(self.wires[k:k + 8]) + ";")
        for master, name, conns in self.insts:
            c = ", ".join(f".{p}({n})" for p, n in conns.items())
            out.append(f"  {master} {name}({c});")
        out.append("endmodule")
        return "\n".join(out)


def bus(stem):
    return [f"{stem}{i}" for i in range(W)]


def ports(d, *stems):
    return [(d, n) for s in stems for n in bus(s)]


def mux4(m, prefix, sel1, sel0, ins):
    """4:1 mux from three MUX2 cells; ins[k] selected by {sel1, sel0} == k."""
    lo = m.tmp(f"{prefix}_lo")
    hi = m.tmp(f"{prefix}_hi")
    out = m.tmp(f"{prefix}_o")
    m.gate("MUX2", f"{prefix}_m0", A=ins[0], B=ins[1], S=sel0, Y=lo)
    m.gate("MUX2", f"{prefix}_m1", A=ins[2], B=ins[3], S=sel0, Y=hi)
    m.gate("MUX2", f"{prefix}_m2", A=lo, B=hi, S=sel1, Y=out)
    return out


def decoder(m, a1, a0, en):
    """One-hot write enables for a 2-bit address gated by en."""
    na1, na0 = m.wire("na1", "na0")
    m.gate("NOT", "inv1", A=a1, Y=na1)
    m.gate("NOT", "inv0", A=a0, Y=na0)
    outs = []
    for k, (s1, s0) in enumerate([(na1, na0), (na1, a0), (a1, na0), (a1, a0)]):
        sel = m.wire(f"sel{k}")
        m.gate("AND2", f"dec{k}", A=s1, B=s0, Y=sel)
        we = m.wire(f"we{k}")
        m.gate("AND2", f"wen{k}", A=sel, B=en, Y=we)
        outs.append(we)
    return outs


def adder():
    m = Mod("adder4", ports("input", "a", "b") + [("output", f"s{i}") for i in range(W)] + [("output", "cout")])
    carry = None
    for i in range(W):
        if carry is None:
            m.gate("XOR2", f"x{i}", A=f"a{i}", B=f"b{i}", Y=f"s{i}")
            carry = m.wire(f"c{i}")
            m.gate("AND2", f"g{i}", A=f"a{i}", B=f"b{i}", Y=carry)
            continue
        p = m.wire(f"p{i}")
        m.gate("XOR2", f"x{i}", A=f"a{i}", B=f"b{i}", Y=p)
        m.gate("XOR2", f"sx{i}", A=p, B=carry, Y=f"s{i}")
        g, pc = m.wire(f"g{i}", f"pc{i}")
        m.gate("AND2", f"ga{i}", A=f"a{i}", B=f"b{i}", Y=g)
        m.gate("AND2", f"pa{i}", A=p, B=carry, Y=pc)
        nxt = "cout" if i == W - 1 else m.wire(f"c{i}")
        m.gate("OR2", f"co{i}", A=g, B=pc, Y=nxt)
        carry = nxt
    return m


def logic_unit():
    m = Mod("logic4", ports("input", "a", "b") + ports("output", "n", "x"))
    for i in range(W):
        m.gate("NAND2", f"nd{i}", A=f"a{i}", B=f"b{i}", Y=f"n{i}")
        m.gate("XOR2", f"xr{i}", A=f"a{i}", B=f"b{i}", Y=f"x{i}")
    return m


def alu():
    m = Mod("alu", ports("input", "a", "b") + [("input", "op1"), ("input", "op0")] + ports("output", "r")
            + [("output", "carry")])
    s = [m.wire(f"sum{i}") for i in range(W)]
    nd = [m.wire(f"nand{i}") for i in range(W)]
    xr = [m.wire(f"xor{i}") for i in range(W)]
    conns = {f"a{i}": f"a{i}" for i in range(W)} | {f"b{i}": f"b{i}" for i in range(W)}
    m.gate("adder4", "add", **conns, **{f"s{i}": s[i] for i in range(W)}, cout="carry")
    m.gate("logic4", "lu", **conns, **{f"n{i}": nd[i] for i in range(W)}, **{f"x{i}": xr[i] for i in range(W)})
    for i in range(W):
        out = mux4(m, f"op{i}", "op1", "op0", [s[i], nd[i], xr[i], f"a{i}"])
        m.gate("BUF", f"rb{i}", A=out, Y=f"r{i}")
    return m


def storage(name, with_reset):
    """4 words x W bits with hold muxes, a write decoder and a read mux."""
    ps = [("input", "clk")] + ([("input", "rst")] if with_reset else [])
    ps += [("input", "we"), ("input", "wa1"), ("input", "wa0"), ("input", "ra1"), ("input", "ra0")]
    ps += ports("input", "d") + ports("output", "q")
    m = Mod(name, ps)
    wen = decoder(m, "wa1", "wa0", "we")
    words = []
    for k in range(4):
        bits = []
        for i in range(W):
            cur, nxt = m.wire(f"w{k}_{i}", f"w{k}_{i}_d")
            m.gate("MUX2", f"hold{k}_{i}", A=cur, B=f"d{i}", S=wen[k], Y=nxt)
            if with_reset:
                m.gate("DFFR", f"ff{k}_{i}", D=nxt, CK="clk", R="rst", Q=cur)
            else:
                m.gate("DFF", f"ff{k}_{i}", D=nxt, CK="clk", Q=cur)
            bits.append(cur)
        words.append(bits)
    for i in range(W):
        out = mux4(m, f"rd{i}", "ra1", "ra0", [words[k][i] for k in range(4)])
        m.gate("BUF", f"qb{i}", A=out, Y=f"q{i}")
    return m


def cpu():
    ps = [("input", "clk"), ("input", "rst"), ("input", "op1"), ("input", "op0"), ("input", "we"),
          ("input", "wa1"), ("input", "wa0"), ("input", "ra1"), ("input", "ra0")]
    ps += ports("input", "din") + ports("output", "alu_r") + ports("output", "rf_q") + [("output", "carry")]
    m = Mod("cpu", ps)
    opa = [m.wire(f"opa{i}") for i in range(W)]
    for i in range(W):
        m.gate("DFFR", f"areg{i}", D=f"din{i}", CK="clk", R="rst", Q=opa[i])
    m.gate("alu", "alu0", **{f"a{i}": opa[i] for i in range(W)}, **{f"b{i}": f"rf_q{i}" for i in range(W)},
           op1="op1", op0="op0", **{f"r{i}": f"alu_r{i}" for i in range(W)}, carry="carry")
    m.gate("regfile", "rf", clk="clk", rst="rst", we="we", wa1="wa1", wa0="wa0", ra1="ra1", ra0="ra0",
           **{f"d{i}": f"alu_r{i}" for i in range(W)}, **{f"q{i}": f"rf_q{i}" for i in range(W)})
    return m


def mem():
    ps = [("input", "clk"), ("input", "we"), ("input", "a1"), ("input", "a0")] + ports("input", "d") \
        + ports("output", "q")
    m = Mod("mem", ps)
    m.gate("sram4x4", "bank0", clk="clk", we="we", wa1="a1", wa0="a0", ra1="a1", ra0="a0",
           **{f"d{i}": f"d{i}" for i in range(W)}, **{f"q{i}": f"q{i}" for i in range(W)})
    return m


def busmux():
    ps = [("input", "clk"), ("input", "s1"), ("input", "s0")] + ports("input", "u", "v", "w", "x") \
        + ports("output", "y") + [("output", "par")]
    m = Mod("busmux", ps)
    outs = []
    for i in range(W):
        o = mux4(m, f"bm{i}", "s1", "s0", [f"u{i}", f"v{i}", f"w{i}", f"x{i}"])
        m.gate("DFF", f"oreg{i}", D=o, CK="clk", Q=f"y{i}")
        outs.append(o)
    acc = outs[0]
    for i in range(1, W):
        nxt = m.tmp("par")
        m.gate("XOR2", f"px{i}", A=acc, B=outs[i], Y=nxt)
        acc = nxt
    m.gate("DFF", "preg", D=acc, CK="clk", Q="par")
    return m


def top():
    ps = [("input", "clk"), ("input", "rst"), ("input", "op1"), ("input", "op0"), ("input", "rwe"),
          ("input", "wa1"), ("input", "wa0"), ("input", "ra1"), ("input", "ra0"), ("input", "mwe"),
          ("input", "ma1"), ("input", "ma0"), ("input", "bs1"), ("input", "bs0")]
    ps += ports("input", "din") + ports("output", "y") + [("output", "par"), ("output", "flag")]
    m = Mod("minisoc", ps)
    alu_r = [m.wire(f"alu_r{i}") for i in range(W)]
    rf_q = [m.wire(f"rf_q{i}") for i in range(W)]
    mem_q = [m.wire(f"mem_q{i}") for i in range(W)]
    carry = m.wire("carry")
    m.gate("cpu", "cpu", clk="clk", rst="rst", op1="op1", op0="op0", we="rwe", wa1="wa1", wa0="wa0",
           ra1="ra1", ra0="ra0", **{f"din{i}": f"din{i}" for i in range(W)},
           **{f"alu_r{i}": alu_r[i] for i in range(W)}, **{f"rf_q{i}": rf_q[i] for i in range(W)}, carry=carry)
    m.gate("mem", "mem", clk="clk", we="mwe", a1="ma1", a0="ma0", **{f"d{i}": rf_q[i] for i in range(W)},
           **{f"q{i}": mem_q[i] for i in range(W)})
    m.gate("busmux", "bus", clk="clk", s1="bs1", s0="bs0", **{f"u{i}": alu_r[i] for i in range(W)},
           **{f"v{i}": rf_q[i] for i in range(W)}, **{f"w{i}": mem_q[i] for i in range(W)},
           **{f"x{i}": f"din{i}" for i in range(W)}, **{f"y{i}": f"y{i}" for i in range(W)}, par="par")
    m.gate("DFFR", "flagreg", D=carry, CK="clk", R="rst", Q="flag")
    return m


def netlist():
    mods = [adder(), logic_unit(), alu(), storage("regfile", True), storage("sram4x4", False), cpu(), mem(),
            busmux(), top()]
    head = "// mini SoC: 4-bit ALU + 4x4 register file + 4x4 DFF memory + registered bus mux\n"
    return head + "\n\n".join(m.text() for m in mods) + "\n"


def stimulus(cycles=40, period=10, seed=2024):
    rng = random.Random(seed)
    names = ["op1", "op0", "rwe", "wa1", "wa0", "ra1", "ra0", "mwe", "ma1", "ma0", "bs1", "bs0"] + bus("din")
    inputs = {n: [] for n in names}
    inputs["rst"] = [[0, 1], [period + period // 2, 0]]
    for c in range(cycles):
        t = c * period + period // 2
        for n in names:
            v = rng.randint(0, 1)
            if n in ("rwe", "mwe"):
                v = int(rng.random() < 0.6)
            wave = inputs[n]
            if not wave or wave[-1][1] != v:
                wave.append([t, v])
    return {"clock": {"net": "clk", "period": period, "first_edge": period}, "inputs": inputs,
            "duration": cycles * period + period}


def main(outdir):
    out = Path(outdir)
    (out / "minisoc.v").write_text(netlist())
    (out / "minisoc_stim.json").write_text(json.dumps(stimulus()) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/seesim/data")

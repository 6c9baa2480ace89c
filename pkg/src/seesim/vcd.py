"""Minimal IEEE-1364 value change dump output and a reader for the same subset."""

from __future__ import annotations

import re

from .gatesim import Trace

_ID_CHARS = [chr(c) for c in range(33, 127)]


def vcd_id(k: int) -> str:
    """Short identifier code for the k-th variable (base-94 printable ASCII)."""
    out = ""
    while True:
        k, r = divmod(k, len(_ID_CHARS))
        out += _ID_CHARS[r]
        if k == 0:
            return out
        k -= 1


def write_vcd(trace: Trace, design=None, timescale: str = "1ns", scope: str | None = None) -> str:
    scope = scope or (design.top if design is not None else "top")
    names = list(trace.changes)
    ids = {name: vcd_id(k) for k, name in enumerate(names)}
    lines = [f"$timescale {timescale} $end", f"$scope module {scope} $end"]
    for name in names:
        lines.append(f"$var wire 1 {ids[name]} {name} $end")
    lines += ["$upscope $end", "$enddefinitions $end"]
    if names:
        by_time: dict[int, list[str]] = {}
        for name in names:
            for t, v in trace.changes[name]:
                by_time.setdefault(t, []).append(f"{v}{ids[name]}")
        for t in sorted(by_time):
            lines.append(f"#{t}")
            lines.extend(by_time[t])
        if trace.end_time > max(by_time, default=0):
            lines.append(f"#{trace.end_time}")
    return "\n".join(lines) + "\n"


class VcdParseError(ValueError):
    pass


_VAR_RE = re.compile(r"\$var\s+\S+\s+(\d+)\s+(\S+)\s+(\S+)(?:\s+\[[^\]]*\])?\s+\$end")


def read_vcd(text: str) -> Trace:
    """Parse single-bit scalar changes back into a :class:`Trace`."""
    header, sep, body = text.partition("$enddefinitions")
    if not sep:
        raise VcdParseError("missing $enddefinitions")
    names: dict[str, str] = {}
    order: list[str] = []
    for m in _VAR_RE.finditer(header):
        width, code, name = int(m.group(1)), m.group(2), m.group(3)
        if width != 1:
            raise VcdParseError(f"only 1-bit variables are supported ({name} has width {width})")
        names[code] = name
        order.append(name)
    changes: dict[str, list[tuple[int, int]]] = {name: [] for name in order}
    t = 0
    last_t = 0
    for tok in body.split()[1:]:  # skip the "$end" closing $enddefinitions
        if tok.startswith("#"):
            t = int(tok[1:])
            last_t = max(last_t, t)
        elif tok.startswith("$"):
            continue  # $dumpvars / $end
        elif tok[0] in "01xXzZ":
            code = tok[1:]
            if code not in names:
                raise VcdParseError(f"unknown identifier {code!r}")
            v = 1 if tok[0] == "1" else 0
            seq = changes[names[code]]
            if seq and seq[-1][0] == t:
                seq[-1] = (t, v)
            elif not seq or seq[-1][1] != v:
                seq.append((t, v))
        else:
            raise VcdParseError(f"unsupported token {tok!r}")
    return Trace(changes, last_t)

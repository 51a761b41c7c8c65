"""Structured text reports: key/value lines and matrix blocks.

Layout::

    # fqhe-torus report
    [timestamp]
    started = 2026-01-01T00:00:00Z
    wall_time_s = 0.25
    [inputs]
    tau = 0+1i
    [results]
    gram = matrix 2 2
      1+0i 0+0i
      0+0i 1+0i
    [verdicts]
    overall = PASS

Floats are written with 17 significant digits so doubles round-trip
exactly; complex numbers as ``x+yi``.  Only the ``[timestamp]`` section
depends on when the report was produced (see ``strip_timestamp``).
"""
from __future__ import annotations

import math
import re
from collections import OrderedDict
from fractions import Fraction

import numpy as np

HEADER = "# fqhe-torus report"
TIMESTAMP_SECTION = "timestamp"

_FLOAT = r"[+-]?(?:\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|inf|nan)"
_COMPLEX_RE = re.compile(rf"^({_FLOAT})([+-](?:\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|inf|nan))i$")
_IMAG_RE = re.compile(rf"^({_FLOAT})i$")
_INT_RE = re.compile(r"^[+-]?\d+$")
_FLOAT_RE = re.compile(rf"^{_FLOAT}$")


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def format_complex(z: complex) -> str:
    z = complex(z)
    im = format_float(z.imag)
    if not im.startswith("-"):
        im = "+" + im
    return f"{format_float(z.real)}{im}i"


def parse_complex(text: str) -> complex:
    """Inverse of ``format_complex``; also accepts ``"2i"``, ``"-1.5"`` and Python's ``"1+2j"``."""
    s = text.strip().replace(" ", "")
    if s.endswith("j"):
        s = s[:-1] + "i"
    m = _COMPLEX_RE.match(s)
    if m:
        return complex(float(m.group(1)), float(m.group(2)))
    m = _IMAG_RE.match(s)
    if m:
        return complex(0.0, float(m.group(1)))
    if s in ("i", "+i"):
        return 1j
    if s == "-i":
        return -1j
    if _FLOAT_RE.match(s):
        return complex(float(s), 0.0)
    raise ValueError(f"cannot read {text!r} as a complex number x+yi")


def format_scalar(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (complex, np.complexfloating)):
        return format_complex(v)
    if isinstance(v, (list, tuple)):
        return " ".join(format_scalar(x) for x in v)
    text = str(v)
    if "\n" in text:
        raise ValueError("report values must fit on one line")
    return text


def parse_scalar(text: str):
    s = text.strip()
    if s in ("true", "false"):
        return s == "true"
    if _INT_RE.match(s):
        return int(s)
    if _FLOAT_RE.match(s):
        return float(s)
    try:
        return parse_complex(s)
    except ValueError:
        return s


class Report:
    """Ordered sections of key/value entries; values are scalars or 2-D arrays."""

    def __init__(self, command: str):
        self.command = command
        self.sections: "OrderedDict[str, OrderedDict[str, object]]" = OrderedDict()
        self.section(TIMESTAMP_SECTION)
        self.section("inputs")["command"] = command

    def section(self, name: str) -> "OrderedDict[str, object]":
        if name not in self.sections:
            self.sections[name] = OrderedDict()
        return self.sections[name]

    def add(self, section: str, key: str, value) -> None:
        if not re.match(r"^[A-Za-z_][A-Za-z0-9_.-]*$", key):
            raise ValueError(f"bad report key {key!r}")
        self.section(section)[key] = value

    def verdict(self, key: str, passed: bool) -> bool:
        self.add("verdicts", key, "PASS" if passed else "FAIL")
        return passed

    @property
    def passed(self) -> bool:
        return all(v == "PASS" for v in self.sections.get("verdicts", {}).values())

    def to_text(self) -> str:
        lines = [HEADER]
        for name, entries in self.sections.items():
            lines.append(f"[{name}]")
            for key, value in entries.items():
                if isinstance(value, np.ndarray) and value.ndim == 2:
                    rows, cols = value.shape
                    lines.append(f"{key} = matrix {rows} {cols}")
                    lines += ["  " + " ".join(format_scalar(x) for x in row) for row in value.tolist()]
                else:
                    if isinstance(value, np.ndarray):
                        value = value.tolist()
                    lines.append(f"{key} = {format_scalar(value)}")
        return "\n".join(lines) + "\n"


def parse_report(text: str) -> "OrderedDict[str, OrderedDict[str, object]]":
    """Read a report back into ``{section: {key: value}}``; matrices become arrays."""
    out: "OrderedDict[str, OrderedDict[str, object]]" = OrderedDict()
    current = None
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = out.setdefault(line[1:-1], OrderedDict())
            continue
        if current is None:
            raise ValueError(f"entry outside any section: {line!r}")
        key, sep, value = line.partition(" = ")
        if not sep:
            raise ValueError(f"malformed report line: {line!r}")
        value = value.strip()
        if value.startswith("matrix "):
            rows, cols = (int(x) for x in value.split()[1:3])
            data = [[parse_scalar(x) for x in lines[i + r].split()] for r in range(rows)]
            i += rows
            if any(len(r) != cols for r in data):
                raise ValueError(f"matrix {key} has ragged rows")
            kind = complex if any(isinstance(x, complex) for r in data for x in r) else float
            current[key] = np.array(data, dtype=kind).reshape(rows, cols)
        else:
            current[key] = parse_scalar(value)
    return out


def strip_timestamp(text: str) -> str:
    """The report without its ``[timestamp]`` section, for reproducibility checks."""
    keep, skipping = [], False
    for line in text.splitlines():
        if line.startswith("[") and line.endswith("]"):
            skipping = line == f"[{TIMESTAMP_SECTION}]"
        if not skipping:
            keep.append(line)
    return "\n".join(keep) + "\n"

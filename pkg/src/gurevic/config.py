"""Line-oriented configuration documents.

Example::

    # golden mean shift
    [shift]
    states = 2
    edges = 1->1, 1->2, 2->1

    [potential]
    depth = 2
    phi 1 2 = 0.3

    [cocycle]
    group = free 2
    psi 1 = x
    psi 2 = x^-1

Sections are ``[shift]``, ``[potential]``, ``[cocycle]``, ``[testfunction]``,
``[family]`` and ``[options]``.  States are numbered from 1.  ``#`` starts a
comment.  Errors carry the line and column of the offending token.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError

SECTIONS = ("shift", "potential", "cocycle", "testfunction", "family", "options")

# option name -> (type, default); the defaults are echoed in every run manifest
OPTIONS = {
    "oracle_ceiling": (int, 20),
    "tol": (float, 1e-12),
    "xi_tol": (float, 1e-10),
    "budget_entries": (int, 200_000_000),
    "n_max": (int, None),
    "mode": (str, "periodic"),
    "modes": (str, "periodic, periodic-cylinder, preimage, preimage-cylinder"),
    "cylinder": (int, 1),
    "base_point": (str, None),
    "target": (str, "e"),
    "n_list": (str, None),
    "epsilon": (float, 0.2),
    "horizon": (int, None),
    "oracle_n": (int, 8),
    "seed": (int, 0),
    "truncation": (int, 3),
}

_NUMBER = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")
_LOG = re.compile(r"^([-+]?)log\(\s*([^()]+?)\s*\)$")


@dataclass
class _Line:
    no: int
    key: str
    value: str
    key_col: int
    value_col: int


@dataclass
class Config:
    """Parsed configuration; ``shift`` is ``None`` for family-only documents."""

    text: str
    shift: object = None
    potential: object = None
    cocycle: object = None
    testfunction: object = None
    family: object = None
    options: dict = field(default_factory=dict)
    sections: tuple = ()

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def option(self, name: str):
        if name in self.options:
            return self.options[name]
        return OPTIONS[name][1]

    def skew(self):
        from .groups import Cocycle
        from .skewprod import SkewSystem

        if self.shift is None:
            if self.family is not None:
                from .bip import truncate

                return truncate(self.family, self.option("truncation"))
            raise ConfigError("configuration has no [shift] section")
        coc = self.cocycle or Cocycle.trivial(self.shift.state_count)
        return SkewSystem(self.shift, self.potential, coc)


def parse_value(text: str, no: int, col: int) -> float:
    """A real number, or ``log(x)`` / ``-log(x)`` with ``x`` a positive number."""
    t = text.strip()
    if _NUMBER.match(t):
        return float(t)
    m = _LOG.match(t)
    if m and _NUMBER.match(m.group(2)):
        x = float(m.group(2))
        if x <= 0:
            raise ConfigError(f"log of non-positive number {x}", no, col)
        return (-1 if m.group(1) == "-" else 1) * math.log(x)
    raise ConfigError(f"expected a number, got {t!r}", no, col)


def _tokenise(text: str) -> dict[str, list[_Line]]:
    sections: dict[str, list[_Line]] = {}
    current = None
    for no, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.lstrip()
        indent = len(line) - len(stripped)
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("unterminated section header", no, len(line) + 1)
            name = stripped[1:-1].strip().lower()
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]", no, indent + 2)
            if name in sections:
                raise ConfigError(f"duplicate section [{name}]", no, indent + 2)
            sections[name] = []
            current = name
            continue
        if current is None:
            raise ConfigError("entry outside any section", no, indent + 1)
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", no, indent + 1)
        eq = line.index("=")
        key = line[:eq].strip()
        value = line[eq + 1 :]
        vcol = eq + 2 + (len(value) - len(value.lstrip()))
        if not key:
            raise ConfigError("missing key before '='", no, eq + 1)
        sections[current].append(_Line(no, key, value.strip(), indent + 1, vcol))
    return sections


def _state(tok: str, s: int, no: int, col: int) -> int:
    if not re.fullmatch(r"\d+", tok):
        raise ConfigError(f"expected a state number, got {tok!r}", no, col)
    i = int(tok)
    if not 1 <= i <= s:
        raise ConfigError(f"state {i} out of range 1..{s}", no, col)
    return i - 1


def _bool(text: str, no: int, col: int) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected true or false, got {text!r}", no, col)


def _parse_shift(lines: list[_Line]):
    from .shift import ShiftSystem

    states, full, edges, labels = None, False, [], None
    states_line = None
    for ln in lines:
        if ln.key == "states":
            if not re.fullmatch(r"\d+", ln.value) or int(ln.value) < 1:
                raise ConfigError(f"states must be a positive integer, got {ln.value!r}", ln.no, ln.value_col)
            states, states_line = int(ln.value), ln
        elif ln.key == "full":
            full = _bool(ln.value, ln.no, ln.value_col)
        elif ln.key == "edges":
            edges.append(ln)
        elif ln.key == "labels":
            labels = (ln.value.split(), ln)
        else:
            raise ConfigError(f"unknown key {ln.key!r} in [shift]", ln.no, ln.key_col)
    if states is None:
        raise ConfigError("[shift] needs 'states = <int>'", lines[0].no if lines else None)
    a = np.zeros((states, states), dtype=bool)
    if full:
        a[:] = True
    for ln in edges:
        col = ln.value_col
        for part in ln.value.split(","):
            tok = part.strip()
            pcol = col + len(part) - len(part.lstrip())
            col += len(part) + 1
            if not tok:
                continue
            m = re.fullmatch(r"(\S+)\s*->\s*(\S+)", tok)
            if not m:
                raise ConfigError(f"expected an edge 'i->j', got {tok!r}", ln.no, pcol)
            i = _state(m.group(1), states, ln.no, pcol)
            j = _state(m.group(2), states, ln.no, pcol + m.start(2))
            a[i, j] = True
    if not full and not edges:
        raise ConfigError("[shift] needs 'edges = ...' or 'full = true'", states_line.no)
    lab = ()
    if labels is not None:
        lab, ln = labels
        if len(lab) != states:
            raise ConfigError(f"{len(lab)} labels for {states} states", ln.no, ln.value_col)
        lab = tuple(lab)
    try:
        return ShiftSystem(a, lab)
    except ValidationError as exc:
        raise ValidationError(str(exc), states_line.no) from None


def _parse_table(lines: list[_Line], shift, prefix: str, section: str):
    """Depth and ``S x S`` table from ``<prefix> i = v`` / ``<prefix> i j = v`` lines."""
    s = shift.state_count
    depth = None
    entries = []
    for ln in lines:
        if ln.key == "depth":
            if ln.value not in ("1", "2"):
                raise ConfigError(f"depth must be 1 or 2, got {ln.value!r}", ln.no, ln.value_col)
            depth = int(ln.value)
            continue
        parts = ln.key.split()
        if parts and parts[0] == prefix and len(parts) in (2, 3):
            col = ln.key_col + len(prefix) + 1
            idx = []
            for p in parts[1:]:
                col = ln.key_col + ln.key.index(p, col - ln.key_col)
                idx.append(_state(p, s, ln.no, col))
                col += len(p)
            entries.append((tuple(idx), parse_value(ln.value, ln.no, ln.value_col), ln))
            continue
        if section == "testfunction" and ln.key == "name":
            continue
        raise ConfigError(f"unknown key {ln.key!r} in [{section}]", ln.no, ln.key_col)
    if depth is None:
        depth = 2 if any(len(ix) == 2 for ix, _, _ in entries) else 1
    table = np.zeros((s, s))
    for ix, v, ln in entries:
        if len(ix) == 1:
            if depth == 2:
                raise ConfigError(f"depth-2 {section} needs '{prefix} i j = ...'", ln.no, ln.key_col)
            table[ix[0], :] = v
        else:
            if depth == 1:
                raise ConfigError(f"depth-1 {section} takes '{prefix} i = ...'", ln.no, ln.key_col)
            if not shift.adjacency[ix]:
                raise ValidationError(
                    f"{section} value on forbidden edge {ix[0] + 1}->{ix[1] + 1}", ln.no, ln.key_col
                )
            table[ix] = v
    return depth, table


def _parse_potential(lines, shift):
    from .shift import Potential

    depth, table = _parse_table(lines, shift, "phi", "potential")
    if depth == 2:
        return Potential(np.where(shift.adjacency, table, 0.0), 2)
    return Potential(table, 1)


def _parse_cocycle(lines, shift):
    from .groups import Cocycle, make_group

    s = shift.state_count
    group, values = None, {}
    for ln in lines:
        if ln.key == "group":
            try:
                group = make_group(ln.value)
            except ValidationError as exc:
                raise ConfigError(str(exc), ln.no, ln.value_col) from None
            continue
        parts = ln.key.split()
        if len(parts) == 2 and parts[0] == "psi":
            if group is None:
                raise ConfigError("'group = ...' must precede psi entries", ln.no, ln.key_col)
            col = ln.key_col + ln.key.index(parts[1], 3)
            i = _state(parts[1], s, ln.no, col)
            try:
                values[i] = group.parse(ln.value)
            except (ValidationError, ValueError) as exc:
                raise ConfigError(f"bad group word {ln.value!r}: {exc}", ln.no, ln.value_col) from None
            continue
        raise ConfigError(f"unknown key {ln.key!r} in [cocycle]", ln.no, ln.key_col)
    if group is None:
        raise ConfigError("[cocycle] needs 'group = ...'", lines[0].no if lines else None)
    return Cocycle(group, tuple(values.get(i, group.identity) for i in range(s)))


def _parse_testfunction(lines, shift):
    from .equidist import TestFunction

    depth, table = _parse_table(lines, shift, "g", "testfunction")
    name = next((ln.value for ln in lines if ln.key == "name"), "g")
    return TestFunction(table, depth, name)


def _parse_family(lines):
    from .bip import TruncationFamily

    name, beta = "zeta", 2.0
    for ln in lines:
        if ln.key == "name":
            name = ln.value
        elif ln.key == "beta":
            beta = parse_value(ln.value, ln.no, ln.value_col)
        else:
            raise ConfigError(f"unknown key {ln.key!r} in [family]", ln.no, ln.key_col)
    try:
        return TruncationFamily(name, beta)
    except ValidationError as exc:
        raise ValidationError(str(exc), lines[0].no if lines else None) from None


def _parse_options(lines):
    out = {}
    for ln in lines:
        if ln.key not in OPTIONS:
            raise ConfigError(f"unknown option {ln.key!r}", ln.no, ln.key_col)
        typ = OPTIONS[ln.key][0]
        try:
            out[ln.key] = typ(float(ln.value)) if typ is int and _NUMBER.match(ln.value) else typ(ln.value)
        except ValueError:
            raise ConfigError(f"option {ln.key} expects {typ.__name__}, got {ln.value!r}", ln.no, ln.value_col) from None
    return out


def parse_config(text: str) -> Config:
    """Parse and validate a configuration document."""
    if "\r" in text:
        text = text.replace("\r\n", "\n")
    sections = _tokenise(text)
    cfg = Config(text=text, sections=tuple(sections))
    if "shift" in sections:
        cfg.shift = _parse_shift(sections["shift"])
        cfg.potential = _parse_potential(sections.get("potential", []), cfg.shift)
        if "cocycle" in sections:
            cfg.cocycle = _parse_cocycle(sections["cocycle"], cfg.shift)
        if "testfunction" in sections:
            cfg.testfunction = _parse_testfunction(sections["testfunction"], cfg.shift)
    else:
        for sec in ("potential", "cocycle", "testfunction"):
            if sec in sections:
                first = sections[sec][0].no if sections[sec] else None
                raise ConfigError(f"[{sec}] needs a [shift] section", first)
    if "family" in sections:
        cfg.family = _parse_family(sections["family"])
    if cfg.shift is None and cfg.family is None:
        raise ConfigError("configuration needs a [shift] or [family] section")
    cfg.options = _parse_options(sections.get("options", []))
    return cfg


def parse_system(text: str):
    """``(ShiftSystem, Potential, Cocycle or None)`` from a configuration document."""
    cfg = parse_config(text)
    if cfg.shift is None:
        raise ConfigError("configuration has no [shift] section")
    return cfg.shift, cfg.potential, cfg.cocycle


def load_config(path) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ConfigError(f"{path} is not valid UTF-8") from None
    return parse_config(text)


def parse_base_point(text: str, shift) -> "object":
    """``"1 2 (3 4)"`` -> prefix ``(0, 1)`` then ``(2, 3)`` repeated forever."""
    from .skewprod import BasePoint

    m = re.fullmatch(r"\s*([\d\s]*)\(\s*([\d\s]+)\)\s*", text)
    if not m:
        raise ConfigError(f"base point must look like '1 2 (3 4)', got {text!r}")
    s = shift.state_count
    prefix = tuple(_state(t, s, None, None) for t in m.group(1).split())
    period = tuple(_state(t, s, None, None) for t in m.group(2).split())
    return BasePoint(prefix, period).check(shift)


def parse_int_list(text: str) -> list[int]:
    """``"6 10 14"``, ``"6, 10, 14"`` or a range ``"8..20"``."""
    out = []
    for tok in re.split(r"[,\s]+", text.strip()):
        if not tok:
            continue
        m = re.fullmatch(r"(\d+)\.\.(\d+)", tok)
        if m:
            out.extend(range(int(m.group(1)), int(m.group(2)) + 1))
        elif tok.isdigit():
            out.append(int(tok))
        else:
            raise ConfigError(f"expected integers or a range a..b, got {tok!r}")
    return out

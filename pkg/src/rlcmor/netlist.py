"""Line-oriented RLCk netlist reader.

Grammar (one element per line, ``*`` starts a comment, node ``0`` is ground)::

    R<name> <node_a> <node_b> <ohms>
    C<name> <node_a> <node_b> <farads>
    L<name> <node_a> <node_b> <henries>
    K<name> <L_a> <L_b> <mutual henries>
    P<name> <node>

Values accept the usual SPICE scale suffixes (``f p n u m k meg g t``).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

GROUND = "0"

_SUFFIX = {
    "f": 1e-15,
    "p": 1e-12,
    "n": 1e-9,
    "u": 1e-6,
    "m": 1e-3,
    "k": 1e3,
    "meg": 1e6,
    "g": 1e9,
    "t": 1e12,
}
_VALUE_RE = re.compile(
    r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(meg|[fpnumkgt])?[a-z]*$",
    re.IGNORECASE,
)


class NetlistError(ValueError):
    """Raised for malformed or non-physical netlists.

    ``line`` and ``column`` are 1-based and ``None`` when the problem is not
    tied to one location (e.g. a coupling that references an inductor
    defined nowhere).
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass
class Element:
    name: str
    node_a: str
    node_b: str
    value: float


@dataclass
class Mutual:
    name: str
    index_a: int
    index_b: int
    value: float


@dataclass
class RlckNetlist:
    """Element-level description of a passive RLCk network."""

    nodes: list[str] = field(default_factory=list)
    ports: list[tuple[str, str]] = field(default_factory=list)
    resistors: list[Element] = field(default_factory=list)
    capacitors: list[Element] = field(default_factory=list)
    inductors: list[Element] = field(default_factory=list)
    mutual_inductors: list[Mutual] = field(default_factory=list)

    def node_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.nodes)}

    def validate(self) -> None:
        """Check the physical invariants; raise :class:`NetlistError` on failure."""
        node_set = set(self.nodes)
        if GROUND in node_set:
            raise NetlistError("ground node must not be listed among nodes")
        for kind in (self.resistors, self.capacitors, self.inductors):
            for el in kind:
                if not el.value > 0 or not math.isfinite(el.value):
                    raise NetlistError(f"{el.name}: value must be positive, got {el.value}")
                for nd in (el.node_a, el.node_b):
                    if nd != GROUND and nd not in node_set:
                        raise NetlistError(f"{el.name}: unknown node {nd!r}")
        for pname, nd in self.ports:
            if nd not in node_set:
                raise NetlistError(f"{pname}: port node {nd!r} is not connected to any element")
        seen_pairs = set()
        for k in self.mutual_inductors:
            if k.index_a == k.index_b:
                raise NetlistError(f"{k.name}: self-coupling is not allowed")
            pair = frozenset((k.index_a, k.index_b))
            if pair in seen_pairs:
                raise NetlistError(f"{k.name}: duplicate coupling between the same inductors")
            seen_pairs.add(pair)
            la = self.inductors[k.index_a].value
            lb = self.inductors[k.index_b].value
            if not abs(k.value) < math.sqrt(la * lb):
                raise NetlistError(
                    f"{k.name}: |M|={abs(k.value):g} H must be below sqrt(La*Lb)={math.sqrt(la * lb):g} H"
                )


def parse_value(token: str) -> float:
    m = _VALUE_RE.match(token)
    if m is None:
        raise ValueError(f"cannot parse value {token!r}")
    scale = _SUFFIX[m.group(2).lower()] if m.group(2) else 1.0
    return float(m.group(1)) * scale


def _tokens(line: str):
    """Yield (token, 1-based column) pairs."""
    for m in re.finditer(r"\S+", line):
        yield m.group(0), m.start() + 1


def parse_netlist(text: str) -> RlckNetlist:
    """Parse netlist text into an :class:`RlckNetlist`.

    Nodes are numbered in order of first appearance; element order is kept as
    written.
    """
    net = RlckNetlist()
    node_seen: dict[str, None] = {}
    names: dict[str, int] = {}
    inductor_idx: dict[str, int] = {}
    pending_k: list[tuple[str, str, str, float, int, int]] = []
    port_lines: list[tuple[str, str, int, int]] = []

    def add_node(nd: str) -> None:
        if nd != GROUND and nd not in node_seen:
            node_seen[nd] = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.lstrip().startswith("*"):
            continue
        toks = list(_tokens(raw))
        if not toks:
            continue
        name, col = toks[0]
        if name.lower() == ".end":
            break
        kind = name[0].upper()
        if kind not in "RCLKP" or len(name) < 2:
            raise NetlistError(f"unknown element {name!r}", lineno, col)
        key = name.upper()
        if key in names:
            raise NetlistError(
                f"duplicate element name {name!r} (first defined on line {names[key]})", lineno, col
            )
        names[key] = lineno

        expected = 2 if kind == "P" else 4
        if len(toks) != expected:
            bad_col = toks[expected][1] if len(toks) > expected else len(raw) + 1
            raise NetlistError(
                f"{name}: expected {expected - 1} fields after the name, got {len(toks) - 1}",
                lineno,
                bad_col,
            )

        if kind == "P":
            nd, ncol = toks[1]
            if nd == GROUND:
                raise NetlistError(f"{name}: port cannot sit on ground", lineno, ncol)
            port_lines.append((name, nd, lineno, ncol))
            continue

        vtok, vcol = toks[3]
        try:
            value = parse_value(vtok)
        except ValueError:
            raise NetlistError(f"{name}: bad value {vtok!r}", lineno, vcol) from None

        if kind == "K":
            pending_k.append((name, toks[1][0], toks[2][0], value, lineno, toks[1][1]))
            continue

        if not value > 0:
            raise NetlistError(f"{name}: value must be positive, got {vtok}", lineno, vcol)
        a, b = toks[1][0], toks[2][0]
        if a == b:
            raise NetlistError(f"{name}: both terminals on node {a!r}", lineno, toks[2][1])
        add_node(a)
        add_node(b)
        el = Element(name, a, b, value)
        if kind == "R":
            net.resistors.append(el)
        elif kind == "C":
            net.capacitors.append(el)
        else:
            inductor_idx[key] = len(net.inductors)
            net.inductors.append(el)

    net.nodes = list(node_seen)

    for pname, nd, lineno, ncol in port_lines:
        if nd not in node_seen:
            raise NetlistError(f"{pname}: dangling port node {nd!r}", lineno, ncol)
        net.ports.append((pname, nd))

    for kname, la, lb, value, lineno, col in pending_k:
        try:
            ia, ib = inductor_idx[la.upper()], inductor_idx[lb.upper()]
        except KeyError as exc:
            raise NetlistError(f"{kname}: unknown inductor {exc.args[0]!r}", lineno, col) from None
        net.mutual_inductors.append(Mutual(kname, ia, ib, value))

    try:
        net.validate()
    except NetlistError as exc:
        # attach the line of the offending coupling when we can find it
        for kname, *_rest, lineno, col in pending_k:
            if str(exc).startswith(kname + ":"):
                raise NetlistError(str(exc), lineno, col) from None
        raise
    return net


def read_netlist(path) -> RlckNetlist:
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read())


def format_netlist(net: RlckNetlist) -> str:
    """Inverse of :func:`parse_netlist` (values written with full precision)."""
    out = []
    for el in net.resistors + net.capacitors + net.inductors:
        out.append(f"{el.name} {el.node_a} {el.node_b} {el.value!r}")
    for k in net.mutual_inductors:
        out.append(f"{k.name} {net.inductors[k.index_a].name} {net.inductors[k.index_b].name} {k.value!r}")
    for pname, nd in net.ports:
        out.append(f"{pname} {nd}")
    return "\n".join(out) + "\n"

"""Network data model, case-file parsing (native JSON and a MATPOWER .m
subset), validation diagnostics, and incidence/susceptance matrix assembly.

Orientation convention: every line is directed tail -> head in file order,
and a positive branch flow means power moving from tail to head.  All factor
matrices produced elsewhere inherit this convention.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .util import zero_threshold

ORIENTATION_STAMP = "positive flow tail->head, line order as parsed"


@dataclass(frozen=True)
class Bus:
    id: int
    injection: float = 0.0
    is_slack: bool = False


@dataclass(frozen=True)
class Line:
    id: int
    tail: int
    head: int
    reactance: float
    susceptance: float

    @staticmethod
    def from_reactance(idx: int, tail: int, head: int, x: float) -> "Line":
        return Line(id=idx, tail=tail, head=head, reactance=x, susceptance=1.0 / x)


@dataclass(frozen=True)
class CaseError:
    code: str
    message: str
    line: int | None = None
    column: int | None = None


@dataclass
class CaseDiagnostics:
    warnings: list[str] = field(default_factory=list)
    errors: list[CaseError] = field(default_factory=list)

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def error(self, code: str, message: str, line: int | None = None,
              column: int | None = None) -> None:
        self.errors.append(CaseError(code, message, line, column))

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class Network:
    """Immutable bus/line graph.  Safe for concurrent reads."""

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]

    def __post_init__(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate bus ids")
        slacks = [b.id for b in self.buses if b.is_slack]
        if len(slacks) != 1:
            raise ValueError(f"expected exactly one slack bus, got {slacks}")
        known = set(ids)
        for ln in self.lines:
            if ln.tail == ln.head:
                raise ValueError(f"self-loop on bus {ln.tail}")
            if ln.tail not in known or ln.head not in known:
                raise ValueError(f"line {ln.id} references unknown bus")
            if ln.reactance <= 0 or ln.susceptance <= 0:
                raise ValueError(f"line {ln.id} has nonpositive reactance")
            if abs(ln.susceptance * ln.reactance - 1.0) > 1e-12:
                raise ValueError(f"line {ln.id}: susceptance * reactance != 1")

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def m(self) -> int:
        return len(self.lines)

    @cached_property
    def bus_position(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @cached_property
    def slack_id(self) -> int:
        return next(b.id for b in self.buses if b.is_slack)

    @property
    def slack_position(self) -> int:
        return self.bus_position[self.slack_id]

    def injection_vector(self) -> np.ndarray:
        return np.array([b.injection for b in self.buses], dtype=float)

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        adj: dict[int, list[int]] = {b.id: [] for b in self.buses}
        for ln in self.lines:
            adj[ln.tail].append(ln.head)
            adj[ln.head].append(ln.tail)
        seen = {self.buses[0].id}
        stack = [self.buses[0].id]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == self.n

    @cached_property
    def line_labels(self) -> tuple[str, ...]:
        """Human labels "tail-head", with "#k" appended to disambiguate
        parallel lines (k counts occurrences of the unordered pair)."""
        multiplicity: dict[frozenset[int], int] = {}
        for ln in self.lines:
            key = frozenset((ln.tail, ln.head))
            multiplicity[key] = multiplicity.get(key, 0) + 1
        counter: dict[frozenset[int], int] = {}
        labels = []
        for ln in self.lines:
            key = frozenset((ln.tail, ln.head))
            if multiplicity[key] > 1:
                k = counter.get(key, 0)
                counter[key] = k + 1
                labels.append(f"{ln.tail}-{ln.head}#{k}")
            else:
                labels.append(f"{ln.tail}-{ln.head}")
        return tuple(labels)


def incidence_matrix(net: Network) -> np.ndarray:
    """Dense n x m incidence matrix: +1 at the tail row, -1 at the head."""
    C = np.zeros((net.n, net.m))
    pos = net.bus_position
    for k, ln in enumerate(net.lines):
        C[pos[ln.tail], k] = 1.0
        C[pos[ln.head], k] = -1.0
    return C


def susceptance_matrix(net: Network) -> np.ndarray:
    """Diagonal m x m susceptance matrix in line order."""
    return np.diag([ln.susceptance for ln in net.lines])


def with_injections(net: Network, p: np.ndarray) -> Network:
    """Copy of the network with the injection vector replaced (bus order)."""
    buses = tuple(replace(b, injection=float(p[k])) for k, b in enumerate(net.buses))
    return Network(buses=buses, lines=net.lines)


def balanced_at_slack(net: Network) -> Network:
    """Copy with the slack injection set so the total sums to zero.

    MATPOWER-style cases carry a generation/load mismatch that the slack
    absorbs; a DC solve requires an exactly balanced vector.
    """
    p = net.injection_vector()
    k = net.slack_position
    p[k] -= p.sum()
    return with_injections(net, p)


def drop_lines(net: Network, line_ids) -> tuple[Network, tuple[int, ...]]:
    """Network without the given lines; also returns the surviving original
    ids, in order, so row k of the new network maps to kept[k]."""
    doomed = set(line_ids)
    kept = tuple(ln.id for ln in net.lines if ln.id not in doomed)
    lines = tuple(
        replace(ln, id=k) for k, ln in enumerate(ln for ln in net.lines if ln.id not in doomed)
    )
    return Network(buses=net.buses, lines=lines), kept


def strip_dangling(net: Network) -> tuple[Network, tuple[int, ...]]:
    """Iteratively remove degree-1 buses and their bridge lines, folding each
    removed bus's injection into its neighbor.

    The folded injection equals the pre-contingency flow on the removed
    bridge, so the flows on every surviving line are unchanged.  Returns the
    reduced network and the removed original line ids.
    """
    bus_ids = [b.id for b in net.buses]
    inj = {b.id: b.injection for b in net.buses}
    alive_lines = {ln.id: ln for ln in net.lines}
    removed: list[int] = []
    slack = net.slack_id

    def degree(b):
        return sum(1 for ln in alive_lines.values() if b in (ln.tail, ln.head))

    changed = True
    while changed:
        changed = False
        for b in list(bus_ids):
            if b == slack:
                continue
            incident = [ln for ln in alive_lines.values() if b in (ln.tail, ln.head)]
            if len(incident) == 1:
                ln = incident[0]
                other = ln.head if ln.tail == b else ln.tail
                inj[other] += inj[b]
                del alive_lines[ln.id]
                removed.append(ln.id)
                bus_ids.remove(b)
                del inj[b]
                changed = True

    buses = tuple(
        Bus(id=b, injection=inj[b], is_slack=(b == slack)) for b in bus_ids
    )
    lines = tuple(
        replace(ln, id=k)
        for k, ln in enumerate(ln for ln in net.lines if ln.id in alive_lines)
    )
    return Network(buses=buses, lines=lines), tuple(sorted(removed))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def parse_case(text: str, format: str = "native_json") -> tuple[Network | None, CaseDiagnostics]:
    """Parse a case file into a Network plus diagnostics.

    Any error in the diagnostics means construction was refused and the
    network is None.  Syntax problems are reported with line/column where
    the underlying parser provides them.
    """
    if format == "native_json":
        return _parse_native_json(text)
    if format == "matpower_m":
        return _parse_matpower(text)
    raise ValueError(f"unknown case format: {format}")


def _finish(diag: CaseDiagnostics, raw_buses, raw_lines) -> tuple[Network | None, CaseDiagnostics]:
    """Shared semantic validation for both formats."""
    seen: set[int] = set()
    for bid, _, _ in raw_buses:
        if bid in seen:
            diag.error("DUPLICATE_BUS", f"bus id {bid} appears more than once")
        seen.add(bid)
    slacks = [bid for bid, _, sl in raw_buses if sl]
    if len(slacks) == 0:
        diag.error("NO_SLACK", "no slack bus designated")
    elif len(slacks) > 1:
        diag.error("MULTIPLE_SLACK", f"multiple slack buses: {slacks}")
    for k, (tail, head, x) in enumerate(raw_lines):
        if x <= 0:
            diag.error("NONPOSITIVE_REACTANCE", f"line {k} ({tail},{head}) has x={x}")
        if tail == head:
            diag.error("SELF_LOOP", f"line {k} is a self-loop on bus {tail}")
        if tail not in seen or head not in seen:
            diag.error("UNKNOWN_BUS", f"line {k} references unknown bus")
    if len(raw_buses) < 2:
        diag.error("TOO_SMALL", "a case needs at least two buses")
    if not diag.ok:
        return None, diag

    buses = tuple(Bus(id=b, injection=p, is_slack=sl) for b, p, sl in raw_buses)
    lines = tuple(
        Line.from_reactance(k, tail, head, x) for k, (tail, head, x) in enumerate(raw_lines)
    )
    net = Network(buses=buses, lines=lines)
    if not net.is_connected():
        diag.error("DISCONNECTED", "network is not connected")
        return None, diag
    total = float(net.injection_vector().sum())
    if abs(total) > zero_threshold(float(np.abs(net.injection_vector()).max(initial=0.0))):
        diag.warn(f"injections sum to {total:.6g}, not zero; a flow solve will "
                  f"reject this vector unless it is rebalanced")
    return net, diag


def _parse_native_json(text: str) -> tuple[Network | None, CaseDiagnostics]:
    diag = CaseDiagnostics()
    if not text.strip():
        diag.error("SYNTAX", "empty input")
        return None, diag
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        diag.error("SYNTAX", exc.msg, line=exc.lineno, column=exc.colno)
        return None, diag
    if not isinstance(doc, dict) or "buses" not in doc or "lines" not in doc:
        diag.error("SYNTAX", 'expected an object with "buses" and "lines"')
        return None, diag
    raw_buses = []
    for entry in doc["buses"]:
        try:
            raw_buses.append((int(entry["id"]), float(entry.get("p", 0.0)),
                              bool(entry.get("slack", False))))
        except (KeyError, TypeError, ValueError):
            diag.error("SYNTAX", f"malformed bus entry: {entry!r}")
            return None, diag
    raw_lines = []
    for entry in doc["lines"]:
        try:
            raw_lines.append((int(entry["from"]), int(entry["to"]), float(entry["x"])))
        except (KeyError, TypeError, ValueError):
            diag.error("SYNTAX", f"malformed line entry: {entry!r}")
            return None, diag
    return _finish(diag, raw_buses, raw_lines)


def serialize(net: Network) -> str:
    """Native JSON text; parse_case(serialize(net)) reproduces the network."""
    doc = {
        "buses": [
            {"id": b.id, "p": b.injection, **({"slack": True} if b.is_slack else {})}
            for b in net.buses
        ],
        "lines": [{"from": ln.tail, "to": ln.head, "x": ln.reactance} for ln in net.lines],
    }
    return json.dumps(doc, indent=2)


_MATRIX_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\];", re.DOTALL)
_SCALAR_RE = re.compile(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)\s*;")

# Columns actually consumed from the MATPOWER tables (0-based):
#   bus:    0 id, 1 type, 2 Pd
#   gen:    0 bus, 1 Pg
#   branch: 0 from, 1 to, 3 x, 10 status
_BUS_MIN_COLS = 3
_GEN_MIN_COLS = 2
_BRANCH_MIN_COLS = 4


def _parse_matpower(text: str) -> tuple[Network | None, CaseDiagnostics]:
    diag = CaseDiagnostics()
    if not text.strip():
        diag.error("SYNTAX", "empty input")
        return None, diag
    # Strip % comments but keep newlines so reported line numbers stay honest.
    stripped = "\n".join(line.split("%", 1)[0] for line in text.splitlines())

    def read_matrix(name: str):
        m = re.search(rf"mpc\.{name}\s*=\s*\[(.*?)\];", stripped, re.DOTALL)
        if m is None:
            return None
        base_line = stripped[: m.start()].count("\n") + 1
        rows = []
        for offset, row_text in enumerate(m.group(1).split("\n")):
            row_text = row_text.strip().rstrip(";").strip()
            if not row_text:
                continue
            try:
                rows.append(([float(tok) for tok in row_text.replace(",", " ").split()],
                             base_line + offset))
            except ValueError:
                diag.error("SYNTAX", f"bad number in mpc.{name} row: {row_text!r}",
                           line=base_line + offset)
        return rows

    base_mva = None
    m = _SCALAR_RE.search(stripped)
    if m is not None:
        base_mva = float(m.group(1))
    else:
        diag.warn("no baseMVA found; using powers as-is")

    bus_rows = read_matrix("bus")
    branch_rows = read_matrix("branch")
    gen_rows = read_matrix("gen") or []
    if bus_rows is None or branch_rows is None:
        diag.error("SYNTAX", "missing mpc.bus or mpc.branch block")
        return None, diag
    if not diag.ok:
        return None, diag

    scale = base_mva if base_mva else 1.0
    extra_cols = False
    load = {}
    slack_ids = []
    order = []
    for row, lineno in bus_rows:
        if len(row) < _BUS_MIN_COLS:
            diag.error("SYNTAX", f"bus row too short: {row}", line=lineno)
            return None, diag
        bid, btype, pd = int(row[0]), int(row[1]), row[2]
        if len(row) > _BUS_MIN_COLS:
            extra_cols = True
        if bid in load:
            diag.error("DUPLICATE_BUS", f"bus id {bid} appears more than once", line=lineno)
            continue
        load[bid] = pd / scale
        order.append(bid)
        if btype == 3:
            slack_ids.append(bid)
    gen = {bid: 0.0 for bid in order}
    for row, lineno in gen_rows:
        if len(row) < _GEN_MIN_COLS:
            diag.error("SYNTAX", f"gen row too short: {row}", line=lineno)
            return None, diag
        bid = int(row[0])
        if bid not in gen:
            diag.error("UNKNOWN_BUS", f"generator at unknown bus {bid}", line=lineno)
            continue
        gen[bid] += row[1] / scale
        if len(row) > _GEN_MIN_COLS:
            extra_cols = True

    raw_lines = []
    dropped = 0
    for row, lineno in branch_rows:
        if len(row) < _BRANCH_MIN_COLS:
            diag.error("SYNTAX", f"branch row too short: {row}", line=lineno)
            return None, diag
        status = row[10] if len(row) > 10 else 1.0
        if len(row) > _BRANCH_MIN_COLS:
            extra_cols = True
        if status == 0:
            dropped += 1
            continue
        raw_lines.append((int(row[0]), int(row[1]), float(row[3])))
    if dropped:
        diag.warn(f"excluded {dropped} out-of-service branch(es) (status 0)")
    if extra_cols:
        diag.warn("only bus(id,type,Pd), gen(bus,Pg), branch(from,to,x,status) "
                  "columns are read; all others ignored")
    if not diag.ok:
        return None, diag

    raw_buses = [(bid, gen[bid] - load[bid], bid in slack_ids) for bid in order]
    return _finish(diag, raw_buses, raw_lines)

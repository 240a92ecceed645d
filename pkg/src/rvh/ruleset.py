"""Rules, packets, rule-file ingestion and the linear-scan reference oracle.

Packets are plain tuples of header integers, one per match dimension.
All engines in this package rank matching rules by the same total order:
higher priority first, then lower rule id.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

Packet = tuple  # tuple[int, ...], one full-width header per dimension

IPV4_WIDTH = 32
PROTO_WIDTH = 8
DEFAULT_DIMS = ("sa", "da")
CLASSBENCH_FIELDS = ("sa", "da", "proto")


class ParseError(ValueError):
    """A line of a rule or trace file could not be parsed."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class FormatError(ValueError):
    """Rules disagree with the declared dimension count or field widths."""


@dataclass(frozen=True, slots=True)
class Prefix:
    value: int
    length: int
    width: int
    mask: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.length <= self.width:
            raise FormatError(f"prefix length {self.length} outside [0, {self.width}]")
        mask = ((1 << self.length) - 1) << (self.width - self.length)
        if self.value < 0 or self.value & ~mask:
            raise FormatError(f"prefix value {self.value:#x} has bits beyond /{self.length}")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_bits(cls, bits: str, width: int) -> "Prefix":
        """Build from MSB-first binary notation, e.g. ``"100"`` or ``"100*"``."""
        bits = bits.rstrip("*")
        if bits and set(bits) - {"0", "1"}:
            raise FormatError(f"not a binary prefix: {bits!r}")
        length = len(bits)
        if length > width:
            raise FormatError(f"prefix {bits!r} longer than width {width}")
        value = int(bits, 2) << (width - length) if bits else 0
        return cls(value, length, width)

    def bits(self) -> str:
        if self.length == 0:
            return ""
        return format(self.value >> (self.width - self.length), f"0{self.length}b")

    def matches(self, header: int) -> bool:
        return header & self.mask == self.value

    def __str__(self):
        return self.bits() + ("*" if self.length < self.width else "")


@dataclass(frozen=True, slots=True)
class Rule:
    id: int
    fields: tuple
    priority: int
    action: str = ""

    def __post_init__(self):
        if self.id < 0 or self.priority < 0:
            raise FormatError("rule id and priority must be non-negative")
        if not self.fields:
            raise FormatError("a rule needs at least one field")
        object.__setattr__(self, "fields", tuple(self.fields))

    @property
    def widths(self) -> tuple:
        return tuple(p.width for p in self.fields)

    def matches(self, headers: Sequence[int]) -> bool:
        for p, h in zip(self.fields, headers):
            if h & p.mask != p.value:
                return False
        return True


def rule_order(rule: Rule) -> tuple:
    """Sort key placing the best rule first: priority desc, id asc."""
    return (-rule.priority, rule.id)


def rule_length_vector(rule: Rule) -> tuple:
    return tuple(p.length for p in rule.fields)


@dataclass(frozen=True, slots=True)
class MatchResult:
    rule_id: Optional[int] = None
    priority: int = 0

    @property
    def matched(self) -> bool:
        return self.rule_id is not None

    @classmethod
    def of(cls, rule: Optional[Rule]) -> "MatchResult":
        if rule is None:
            return NO_MATCH
        return cls(rule.id, rule.priority)


NO_MATCH = MatchResult()


def better(a: Optional[Rule], b: Optional[Rule]) -> Optional[Rule]:
    """The preferred of two candidate matches under the total order."""
    if a is None:
        return b
    if b is None:
        return a
    if a.priority != b.priority:
        return a if a.priority > b.priority else b
    return a if a.id < b.id else b


class Ruleset:
    """An ordered rule collection sharing one dimension count and field widths."""

    def __init__(self, rules: Iterable[Rule] = (), widths: Optional[Sequence[int]] = None,
                 name: str = ""):
        self.rules = list(rules)
        self.name = name
        if widths is None:
            if not self.rules:
                raise FormatError("widths are required for an empty ruleset")
            widths = self.rules[0].widths
        self.widths = tuple(widths)
        ids = set()
        for r in self.rules:
            if r.widths != self.widths:
                raise FormatError(f"rule {r.id} has widths {r.widths}, expected {self.widths}")
            if r.id in ids:
                raise FormatError(f"duplicate rule id {r.id}")
            ids.add(r.id)

    @property
    def dims(self) -> int:
        return len(self.widths)

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __getitem__(self, i):
        return self.rules[i]

    def by_id(self) -> dict:
        return {r.id: r for r in self.rules}

    def subset(self, rules: Iterable[Rule], name: str = "") -> "Ruleset":
        return Ruleset(rules, self.widths, name or self.name)

    def __repr__(self):
        return f"Ruleset({self.name!r}, {len(self.rules)} rules, widths={self.widths})"


# -- ClassBench and toy-fixture ingestion ---------------------------------

_CB_LINE = re.compile(
    r"^@(?P<sa>\d+\.\d+\.\d+\.\d+)/(?P<sl>\d+)\s+"
    r"(?P<da>\d+\.\d+\.\d+\.\d+)/(?P<dl>\d+)\s+"
    r"(?P<splo>\d+)\s*:\s*(?P<sphi>\d+)\s+"
    r"(?P<dplo>\d+)\s*:\s*(?P<dphi>\d+)\s+"
    r"(?P<proto>0x[0-9a-fA-F]+)/(?P<pmask>0x[0-9a-fA-F]+)"
    r"(?:\s+.*)?$"
)


def _ipv4(text: str, lineno: int) -> int:
    parts = text.split(".")
    octets = [int(p) for p in parts]
    if len(octets) != 4 or any(o > 255 for o in octets):
        raise ParseError(f"bad IPv4 address {text!r}", lineno)
    return (octets[0] << 24) | (octets[1] << 16) | (octets[2] << 8) | octets[3]


def _cb_prefix(addr: int, plen: int, lineno: int) -> Prefix:
    if plen > IPV4_WIDTH:
        raise ParseError(f"prefix length {plen} exceeds 32", lineno)
    mask = ((1 << plen) - 1) << (IPV4_WIDTH - plen)
    # ClassBench occasionally emits host bits below the prefix length.
    return Prefix(addr & mask, plen, IPV4_WIDTH)


def _proto_prefix(proto: int, pmask: int, lineno: int) -> Prefix:
    if pmask == 0xFF:
        return Prefix(proto & 0xFF, PROTO_WIDTH, PROTO_WIDTH)
    if pmask == 0:
        return Prefix(0, 0, PROTO_WIDTH)
    raise ParseError(f"protocol mask {pmask:#x} is not a prefix mask", lineno)


def parse_classbench(text: str, dims: Sequence[str] = DEFAULT_DIMS, name: str = "") -> Ruleset:
    """Parse a ClassBench filter file.

    ``dims`` selects which fields become match dimensions (from ``sa``,
    ``da``, ``proto``). Port ranges are validated and dropped. Priority is
    positional: with N rules, the rule on the first line gets N and the
    last gets 1.
    """
    for d in dims:
        if d not in CLASSBENCH_FIELDS:
            raise ValueError(f"unsupported ClassBench dimension {d!r}")
    parsed = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = _CB_LINE.match(line)
        if m is None:
            raise ParseError("not a ClassBench filter line", lineno)
        for lo, hi in (("splo", "sphi"), ("dplo", "dphi")):
            if int(m[lo]) > int(m[hi]) or int(m[hi]) > 0xFFFF:
                raise ParseError("bad port range", lineno)
        values = {
            "sa": _cb_prefix(_ipv4(m["sa"], lineno), int(m["sl"]), lineno),
            "da": _cb_prefix(_ipv4(m["da"], lineno), int(m["dl"]), lineno),
            "proto": _proto_prefix(int(m["proto"], 16), int(m["pmask"], 16), lineno),
        }
        parsed.append(tuple(values[d] for d in dims))
    n = len(parsed)
    rules = [Rule(i, f, n - i) for i, f in enumerate(parsed)]
    widths = [IPV4_WIDTH if d != "proto" else PROTO_WIDTH for d in dims]
    return Ruleset(rules, widths, name)


def parse_toy(text: str, name: str = "") -> Ruleset:
    """Parse the fixture format: ``!widths W1 W2 ...`` then
    ``id bits/len ... priority action`` lines with binary prefixes."""
    widths = None
    rules = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "!widths":
            if widths is not None:
                raise ParseError("duplicate !widths header", lineno)
            try:
                widths = tuple(int(t) for t in tokens[1:])
            except ValueError:
                raise ParseError("widths must be integers", lineno) from None
            if not widths or min(widths) < 1:
                raise ParseError("need at least one positive width", lineno)
            continue
        if widths is None:
            raise ParseError("rule before !widths header", lineno)
        d = len(widths)
        if len(tokens) < d + 2:
            raise ParseError(f"expected id, {d} prefixes and a priority", lineno)
        try:
            rid = int(tokens[0])
            priority = int(tokens[d + 1])
        except ValueError:
            raise ParseError("id and priority must be integers", lineno) from None
        fields = []
        for tok, w in zip(tokens[1:d + 1], widths):
            bits, sep, length = tok.partition("/")
            if not sep:
                raise ParseError(f"prefix {tok!r} lacks /len", lineno)
            bits = "" if bits in ("*", "-") else bits
            try:
                prefix = Prefix.from_bits(bits, w)
            except FormatError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
            if not length.isdigit() or int(length) != prefix.length:
                raise ParseError(f"prefix {tok!r} length mismatch", lineno)
            fields.append(prefix)
        try:
            rules.append(Rule(rid, tuple(fields), priority, " ".join(tokens[d + 2:])))
        except FormatError as exc:
            raise ParseError(str(exc), lineno) from None
    if widths is None:
        raise FormatError("toy fixture has no !widths header")
    return Ruleset(rules, widths, name)


def parse_ruleset(text: str, dims: Sequence[str] = DEFAULT_DIMS, name: str = "") -> Ruleset:
    """Parse either format; a leading ``!widths`` line selects the toy fixture."""
    for line in text.splitlines():
        s = line.strip()
        if s and not s.startswith("#"):
            if s.startswith("!widths"):
                return parse_toy(text, name)
            break
    return parse_classbench(text, dims, name)


def format_toy(ruleset: Ruleset) -> str:
    lines = ["!widths " + " ".join(map(str, ruleset.widths))]
    for r in ruleset:
        prefixes = " ".join(f"{p.bits() or '*'}/{p.length}" for p in r.fields)
        lines.append(f"{r.id} {prefixes} {r.priority} {r.action}".rstrip())
    return "\n".join(lines) + "\n"


def format_classbench(ruleset: Ruleset) -> str:
    """Serialise a two-dimension 32-bit ruleset as ClassBench lines (wildcard ports/proto)."""
    if ruleset.widths != (IPV4_WIDTH, IPV4_WIDTH):
        raise FormatError("ClassBench output needs exactly two 32-bit dimensions")

    def dotted(v):
        return ".".join(str((v >> s) & 0xFF) for s in (24, 16, 8, 0))

    out = []
    for r in ruleset:
        sa, da = r.fields
        out.append(f"@{dotted(sa.value)}/{sa.length}\t{dotted(da.value)}/{da.length}\t"
                   f"0 : 65535\t0 : 65535\t0x00/0x00")
    return "\n".join(out) + ("\n" if out else "")


# -- traces -----------------------------------------------------------------

class TraceRecord(NamedTuple):
    packet: Packet
    expected: Optional[int]


_TRACE_COLUMNS = {"sa": 0, "da": 1, "sport": 2, "dport": 3, "proto": 4}


def parse_trace(text: str, dims: Sequence[str] = DEFAULT_DIMS) -> list:
    """Parse a trace: 2 columns ``sa da``, 3 columns ``sa da id`` or the
    6-column ClassBench shape ``sa da sport dport proto id``."""
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        if len(tokens) not in (2, 3, 6):
            raise ParseError(f"expected 2, 3 or 6 columns, got {len(tokens)}", lineno)
        try:
            nums = [int(t) for t in tokens]
        except ValueError:
            raise ParseError("trace columns must be decimal integers", lineno) from None
        if any(n < 0 for n in nums):
            raise ParseError("negative value", lineno)
        expected = nums[-1] if len(nums) in (3, 6) else None
        headers = []
        for d in dims:
            col = _TRACE_COLUMNS[d]
            if col >= len(nums) - (expected is not None):
                raise ParseError(f"dimension {d!r} needs the 6-column form", lineno)
            headers.append(nums[col])
        records.append(TraceRecord(tuple(headers), expected))
    return records


def format_trace(records: Iterable) -> str:
    lines = []
    for rec in records:
        if len(rec) == 2 and isinstance(rec[0], tuple):
            packet, expected = rec
        else:
            packet, expected = rec, None
        cols = [str(h) for h in packet]
        if expected is not None:
            cols.append(str(expected))
        lines.append(" ".join(cols))
    return "\n".join(lines) + ("\n" if lines else "")


def generate_trace(ruleset: Ruleset, count: int, seed: int) -> list:
    """Packets that each hit a uniformly chosen rule, wildcard bits filled at random."""
    if not ruleset.rules:
        raise ValueError("cannot generate a trace from an empty ruleset")
    rng = random.Random(seed)
    rules = ruleset.rules
    out = []
    for _ in range(count):
        r = rules[rng.randrange(len(rules))]
        out.append(tuple(p.value | (rng.getrandbits(p.width) & ~p.mask) for p in r.fields))
    return out


def random_packets(widths: Sequence[int], count: int, seed: int) -> list:
    rng = random.Random(seed)
    return [tuple(rng.getrandbits(w) for w in widths) for _ in range(count)]


def prefix_length_histogram(ruleset: Ruleset, dim: int) -> list:
    """Fraction of rules at each prefix length 0..W along one dimension."""
    if not ruleset.rules:
        raise ValueError("histogram of an empty ruleset")
    if not 0 <= dim < ruleset.dims:
        raise IndexError(f"dimension {dim} out of range")
    counts = [0] * (ruleset.widths[dim] + 1)
    for r in ruleset:
        counts[r.fields[dim].length] += 1
    n = len(ruleset)
    return [c / n for c in counts]


# -- reference oracle -------------------------------------------------------

def oracle_classify(ruleset: Iterable[Rule], packet: Sequence[int]) -> MatchResult:
    best = None
    for r in ruleset:
        if r.matches(packet):
            best = better(best, r)
    return MatchResult.of(best)


class LinearOracle:
    """Vectorised linear scan for checking many packets against large rulesets.

    Same semantics as :func:`oracle_classify`; rules are pre-ranked by the
    total order so the first matching row is the answer.
    """

    def __init__(self, rules: Iterable[Rule]):
        ranked = sorted(rules, key=rule_order)
        self.rules = ranked
        d = len(ranked[0].fields) if ranked else 0
        self._values = [np.array([r.fields[k].value for r in ranked], dtype=np.uint64)
                        for k in range(d)]
        self._masks = [np.array([r.fields[k].mask for r in ranked], dtype=np.uint64)
                       for k in range(d)]

    def classify(self, packet: Sequence[int]) -> MatchResult:
        if not self.rules:
            return NO_MATCH
        hit = None
        for k, h in enumerate(packet):
            ok = (np.uint64(h) & self._masks[k]) == self._values[k]
            hit = ok if hit is None else hit & ok
        idx = int(np.argmax(hit))
        if not hit[idx]:
            return NO_MATCH
        return MatchResult.of(self.rules[idx])

    def classify_all(self, packets: Iterable) -> list:
        return [self.classify(p) for p in packets]

"""Range-vector hash tables and the RVH classifier.

A range-vector assigns each dimension a half-open interval of prefix
lengths. Rules whose length-vector falls inside it share one hash table,
keyed by the leading ``base[k]`` bits of each field where ``base`` holds the
intervals' lower bounds.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass
from math import prod
from typing import Iterable, NamedTuple, Optional, Sequence

from .hashtable import MASK64, DEFAULT_SEED, HashKey, ProbeTable, hash_bits, hash_word, length_seed
from .ruleset import NO_MATCH, MatchResult, Rule, rule_length_vector, rule_order


@dataclass(frozen=True)
class RangeVector:
    ranges: tuple  # ((lo, hi), ...) half-open

    def __post_init__(self):
        object.__setattr__(self, "ranges", tuple((int(lo), int(hi)) for lo, hi in self.ranges))
        for lo, hi in self.ranges:
            if not 0 <= lo < hi:
                raise ValueError(f"empty or negative length range [{lo}, {hi})")

    @classmethod
    def from_closed(cls, ranges: Iterable) -> "RangeVector":
        return cls(tuple((lo, hi + 1) for lo, hi in ranges))

    @property
    def base(self) -> tuple:
        return tuple(lo for lo, _ in self.ranges)

    def contains(self, lengths: Sequence[int]) -> bool:
        return all(lo <= L < hi for (lo, hi), L in zip(self.ranges, lengths))

    def volume(self) -> int:
        return prod(hi - lo for lo, hi in self.ranges)

    def intersects(self, other: "RangeVector") -> bool:
        return all(a < d and c < b for (a, b), (c, d) in zip(self.ranges, other.ranges))

    def __str__(self):
        return "(" + ", ".join(f"[{lo}, {hi})" for lo, hi in self.ranges) + ")"


class RangeVectorSet:
    """A disjoint, covering partition of the length-vector space."""

    def __init__(self, vectors: Iterable[RangeVector], widths: Sequence[int]):
        self.vectors = [v if isinstance(v, RangeVector) else RangeVector(v) for v in vectors]
        self.widths = tuple(widths)
        self._cache = {}
        self._validate()

    def _validate(self):
        if not self.vectors:
            raise ValueError("a partition needs at least one range-vector")
        d = len(self.widths)
        for v in self.vectors:
            if len(v.ranges) != d:
                raise ValueError(f"range-vector {v} has wrong dimension count")
            for (lo, hi), w in zip(v.ranges, self.widths):
                if hi > w + 1:
                    raise ValueError(f"range-vector {v} exceeds width {w}")
        for i, a in enumerate(self.vectors):
            for b in self.vectors[i + 1:]:
                if a.intersects(b):
                    raise ValueError(f"range-vectors {a} and {b} overlap")
        # Disjoint boxes inside the space cover it iff their volumes add up.
        if sum(v.volume() for v in self.vectors) != prod(w + 1 for w in self.widths):
            raise ValueError("range-vectors do not cover every length-vector")

    def __len__(self):
        return len(self.vectors)

    def __iter__(self):
        return iter(self.vectors)

    def __getitem__(self, i):
        return self.vectors[i]

    def locate(self, lengths: Sequence[int]) -> int:
        lengths = tuple(lengths)
        idx = self._cache.get(lengths)
        if idx is None:
            for i, v in enumerate(self.vectors):
                if v.contains(lengths):
                    idx = i
                    break
            else:
                raise ValueError(f"length-vector {lengths} outside the partition")
            self._cache[lengths] = idx
        return idx

    def __eq__(self, other):
        return (isinstance(other, RangeVectorSet) and self.widths == other.widths
                and self.vectors == other.vectors)

    def __repr__(self):
        return f"RangeVectorSet({[str(v) for v in self.vectors]}, widths={self.widths})"


def map_rule(partition: RangeVectorSet, rule: Rule) -> int:
    if len(rule.fields) != len(partition.widths):
        raise ValueError("rule and partition disagree on dimension count")
    return partition.locate(rule_length_vector(rule))


def pack_key(headers: Sequence[int], base: Sequence[int], widths: Sequence[int]) -> int:
    """Concatenate the top ``base[k]`` bits of each header, MSB first."""
    key = 0
    for h, b, w in zip(headers, base, widths):
        key = (key << b) | (h >> (w - b))
    return key


def build_rule_key(base: Sequence[int], rule: Rule, seed: int = DEFAULT_SEED) -> HashKey:
    if len(base) != len(rule.fields):
        raise ValueError("base-vector and rule disagree on dimension count")
    for b, p in zip(base, rule.fields):
        if p.length < b:
            raise ValueError(f"prefix /{p.length} shorter than base {b}")
    key = pack_key([p.value for p in rule.fields], base, rule.widths)
    return HashKey.make(key, sum(base), seed)


def build_packet_key(base: Sequence[int], packet: Sequence[int], widths: Sequence[int],
                     seed: int = DEFAULT_SEED) -> HashKey:
    if len(base) != len(packet):
        raise ValueError("base-vector and packet disagree on dimension count")
    return HashKey.make(pack_key(packet, base, widths), sum(base), seed)


class TableStats(NamedTuple):
    index: int       # partition index (RVH) or position (TSS)
    rules: int       # n_i
    entries: int     # e_i, occupied slots
    capacity: int    # s_i
    priority: int


class ClassifierStats(NamedTuple):
    tables: tuple

    @property
    def m(self) -> int:
        return len(self.tables)

    @property
    def rules(self) -> int:
        return sum(t.rules for t in self.tables)


class KeyedTable:
    """One hash table whose keys take ``base[k]`` leading bits per field.

    Overlap groups are lists kept sorted best-first; ``priority`` is the
    highest priority of any rule in the table.
    """

    def __init__(self, index: int, base: Sequence[int], widths: Sequence[int], seed: int):
        self.index = index
        self.base = tuple(base)
        self.widths = tuple(widths)
        self.key_length = sum(self.base)
        self.modulus = sum(b * b for b in self.base)
        self.seed = seed
        self._start = length_seed(self.key_length, seed)
        self._parts = tuple((b, w - b) for b, w in zip(self.base, self.widths))
        self.slots = ProbeTable()
        self._ranked = []  # (-priority, id), best first
        self.priority = 0

    @property
    def n(self) -> int:
        return len(self._ranked)

    def key(self, headers: Sequence[int]) -> int:
        key = 0
        for (b, shift), h in zip(self._parts, headers):
            key = (key << b) | (h >> shift)
        return key

    def hash(self, key: int) -> int:
        if key <= MASK64:
            return hash_word(key, self._start)
        return hash_bits(key, self.key_length, self.seed)

    def lookup(self, packet: Sequence[int]) -> Optional[list]:
        key = 0
        for (b, shift), h in zip(self._parts, packet):
            key = (key << b) | (h >> shift)
        if key <= MASK64:
            # Inlined hash_word: this is the per-table cost of every lookup.
            k = ((self._start ^ key) * 0x9E3779B97F4A7C15) & MASK64
            k ^= k >> 33
            k = (k * 0xFF51AFD7ED558CCD) & MASK64
            k ^= k >> 33
            k = (k * 0xC4CEB9FE1A85EC53) & MASK64
            return self.slots.get(key, k ^ (k >> 33))
        return self.slots.get(key, hash_bits(key, self.key_length, self.seed))

    def add(self, rule: Rule) -> None:
        key = self.key([p.value for p in rule.fields])
        h = self.hash(key)
        group = self.slots.get(key, h)
        if group is None:
            self.slots.put(key, h, [rule])
        else:
            insort(group, rule, key=rule_order)
        insort(self._ranked, (-rule.priority, rule.id))
        self.priority = -self._ranked[0][0]

    def remove(self, rule: Rule) -> None:
        key = self.key([p.value for p in rule.fields])
        h = self.hash(key)
        group = self.slots.get(key, h)
        if group is None:
            raise KeyError(rule.id)
        i = bisect_left(group, rule_order(rule), key=rule_order)
        if i == len(group) or group[i].id != rule.id:
            raise KeyError(rule.id)
        del group[i]
        if not group:
            self.slots.remove(key, h)
        del self._ranked[bisect_left(self._ranked, (-rule.priority, rule.id))]
        self.priority = -self._ranked[0][0] if self._ranked else 0

    def groups(self):
        return self.slots.values()

    def rules(self):
        for g in self.slots.values():
            yield from g

    def stats(self) -> TableStats:
        return TableStats(self.index, self.n, self.slots.occupied, self.slots.capacity,
                          self.priority)


class RvhTable(KeyedTable):
    def __init__(self, index: int, range_vector: RangeVector, widths: Sequence[int], seed: int):
        super().__init__(index, range_vector.base, widths, seed)
        self.range_vector = range_vector

    def __repr__(self):
        return f"RvhTable(#{self.index} {self.range_vector}, n={self.n}, pri={self.priority})"


def _table_order(t: RvhTable) -> tuple:
    return (-t.priority, -t.modulus, t.index)


class RvhClassifier:
    """Range-vector hash classifier.

    Tables are created on first insert into their range-vector and dropped
    when emptied. The live table list is kept sorted by table priority,
    then base-vector squared modulus (larger first), then partition index,
    which lets :meth:`classify` stop early.
    """

    def __init__(self, partition: RangeVectorSet, rules: Iterable[Rule] = (),
                 seed: int = DEFAULT_SEED):
        self.partition = partition
        self.widths = partition.widths
        self.seed = seed
        self._tables = {}
        self._order = []
        self._rules = {}
        for r in rules:
            if not self.insert(r):
                raise ValueError(f"duplicate rule id {r.id}")

    def __len__(self):
        return len(self._rules)

    def __contains__(self, rule_id):
        return rule_id in self._rules

    @property
    def tables(self) -> list:
        return list(self._order)

    @property
    def m(self) -> int:
        return len(self._order)

    def rules(self) -> list:
        return list(self._rules.values())

    def insert(self, rule: Rule) -> bool:
        if rule.id in self._rules:
            return False
        if rule.widths != self.widths:
            raise ValueError(f"rule widths {rule.widths} do not match classifier {self.widths}")
        idx = self.partition.locate(rule_length_vector(rule))
        table = self._tables.get(idx)
        created = table is None
        if created:
            table = RvhTable(idx, self.partition[idx], self.widths, self.seed)
            self._tables[idx] = table
            self._order.append(table)
        old = table.priority
        table.add(rule)
        self._rules[rule.id] = rule
        if created or table.priority != old:
            self._order.sort(key=_table_order)
        return True

    def delete(self, rule_id: int) -> bool:
        rule = self._rules.pop(rule_id, None)
        if rule is None:
            return False
        idx = self.partition.locate(rule_length_vector(rule))
        table = self._tables[idx]
        old = table.priority
        table.remove(rule)
        if table.n == 0:
            del self._tables[idx]
            self._order.remove(table)
        elif table.priority != old:
            self._order.sort(key=_table_order)
        return True

    def classify(self, packet: Sequence[int], early_exit: bool = True) -> MatchResult:
        best = None
        for t in self._order:
            # Ties must still be searched: an equal-priority rule with a lower
            # id may sit in this table.
            if early_exit and best is not None and best.priority > t.priority:
                break
            group = t.lookup(packet)
            if group:
                for r in group:
                    if r.matches(packet):
                        if (best is None or r.priority > best.priority
                                or (r.priority == best.priority and r.id < best.id)):
                            best = r
                        break
        return MatchResult.of(best) if best is not None else NO_MATCH

    def classify_traced(self, packet: Sequence[int], early_exit: bool = True):
        """Like :meth:`classify`, also returning the partition indices probed."""
        probed = []
        best = None
        for t in self._order:
            if early_exit and best is not None and best.priority > t.priority:
                break
            probed.append(t.index)
            for r in t.lookup(packet) or ():
                if r.matches(packet):
                    if (best is None or r.priority > best.priority
                            or (r.priority == best.priority and r.id < best.id)):
                        best = r
                    break
        return MatchResult.of(best), probed

    def table(self, index: int) -> Optional[RvhTable]:
        return self._tables.get(index)

    def table_stats(self) -> ClassifierStats:
        return ClassifierStats(tuple(t.stats() for t in self._order))

    def check_invariants(self) -> None:
        """Raise AssertionError if any structural invariant is broken."""
        assert len(self._order) == len(self._tables) <= len(self.partition)
        assert self._order == sorted(self._order, key=_table_order)
        total = 0
        for t in self._order:
            assert t.n > 0
            assert self._tables[t.index] is t
            rules = list(t.rules())
            assert len(rules) == t.n
            assert t.priority == max(r.priority for r in rules)
            for r in rules:
                assert t.range_vector.contains(rule_length_vector(r))
            for g in t.groups():
                assert g == sorted(g, key=rule_order)
            s = t.stats()
            assert s.entries <= s.rules and s.entries <= s.capacity
            total += t.n
        assert total == len(self._rules)

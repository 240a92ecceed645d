"""Desk-scale benchmark protocols for the RVH and TSS engines.

Every benchmark finishes with a correctness sweep of the engine against the
linear-scan oracle on its final rule set, and raises
:class:`CorrectnessError` on any disagreement.
"""

from __future__ import annotations

import logging
import random
import statistics
import time
from dataclasses import asdict, dataclass, field
from math import ceil, prod
from typing import Optional, Sequence

from .core import RangeVectorSet, RvhClassifier
from .hashtable import DEFAULT_SEED
from .partition import (PartitionParams, build_range_vector_set, even_ranges,
                        partition_ruleset)
from .perfmodel import CalibrationConstants, ModelInput
from .ruleset import (LinearOracle, MatchResult, Ruleset, TraceRecord, better,
                      generate_trace, random_packets)
from .tss import TssClassifier

log = logging.getLogger(__name__)

ENGINES = ("rvh", "tss", "oracle")
EXHAUSTIVE_LIMIT = 1 << 16
DEFAULT_VERIFY_PACKETS = 10_000


class CorrectnessError(AssertionError):
    """An engine disagreed with the oracle or with a trace expectation."""


@dataclass
class BenchReport:
    engine: str
    metric: str  # mups | mlps | mixed | memory_bytes | sweep
    value: float
    ruleset: str = ""
    rules: int = 0
    seed: int = 0
    reps: int = 1
    trace_len: int = 0
    update_rate: float = 0.0
    samples: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.value < 0 or any(s < 0 for s in self.samples):
            raise ValueError("benchmark values must be non-negative")

    def to_record(self) -> dict:
        return asdict(self)


class OracleEngine:
    """Linear scan behind the same update/lookup interface as the hash engines."""

    def __init__(self, widths, rules=()):
        self.widths = tuple(widths)
        self._rules = {}
        for r in rules:
            self.insert(r)

    def __len__(self):
        return len(self._rules)

    def rules(self):
        return list(self._rules.values())

    @property
    def tables(self):
        return []

    def insert(self, rule) -> bool:
        if rule.id in self._rules:
            return False
        self._rules[rule.id] = rule
        return True

    def delete(self, rule_id) -> bool:
        return self._rules.pop(rule_id, None) is not None

    def classify(self, packet) -> MatchResult:
        best = None
        for r in self._rules.values():
            if r.matches(packet):
                best = better(best, r)
        return MatchResult.of(best)


def make_engine(name: str, ruleset: Ruleset, rules=None,
                partition: Optional[RangeVectorSet] = None,
                params: PartitionParams = PartitionParams(), seed: int = DEFAULT_SEED):
    """Build an engine over ``rules`` (default: all of ``ruleset``).

    An RVH partition, when not given, is derived from the whole ruleset.
    """
    rules = ruleset.rules if rules is None else rules
    if name == "rvh":
        if partition is None:
            partition = build_range_vector_set(partition_ruleset(ruleset, params), ruleset.widths)
        return RvhClassifier(partition, rules, seed)
    if name == "tss":
        return TssClassifier(ruleset.widths, rules, seed)
    if name == "oracle":
        return OracleEngine(ruleset.widths, rules)
    raise ValueError(f"unknown engine {name!r}; choose from {', '.join(ENGINES)}")


def engine_tag(engine) -> str:
    if isinstance(engine, RvhClassifier):
        return "rvh"
    if isinstance(engine, TssClassifier):
        return "tss"
    return "oracle"


def sweep_packets(ruleset: Ruleset, rules, count: int, seed: int) -> list:
    """Packets for a correctness sweep: every packet when the space is small,
    otherwise half rule-targeted and half uniform random."""
    widths = ruleset.widths
    if prod(1 << w for w in widths) <= EXHAUSTIVE_LIMIT:
        packets = [()]
        for w in widths:
            packets = [p + (h,) for p in packets for h in range(1 << w)]
        return packets
    targeted = generate_trace(ruleset.subset(rules), count // 2, seed) if rules else []
    return targeted + random_packets(widths, count - len(targeted), seed + 1)


def verify_engine(engine, ruleset: Ruleset, count: int = DEFAULT_VERIFY_PACKETS,
                  seed: int = 0) -> int:
    """Check ``engine`` against the oracle on its own rules; returns packets checked."""
    rules = engine.rules()
    oracle = LinearOracle(rules)
    packets = sweep_packets(ruleset, rules, count, seed)
    for p in packets:
        got = engine.classify(p)
        want = oracle.classify(p)
        if got != want:
            raise CorrectnessError(f"packet {p}: engine gave {got}, oracle {want}")
    return len(packets)


def split_fifths(ruleset: Ruleset, seed: int):
    """Seeded 4/5 - 1/5 split of the rules (base, held-out)."""
    if len(ruleset) < 5:
        raise ValueError("the update protocol needs at least 5 rules")
    order = list(range(len(ruleset)))
    random.Random(seed).shuffle(order)
    held = set(order[::5])
    base = [r for i, r in enumerate(ruleset.rules) if i not in held]
    heldout = [r for i, r in enumerate(ruleset.rules) if i in held]
    return base, heldout


def _packets(trace) -> list:
    return [rec.packet if isinstance(rec, TraceRecord) else rec for rec in trace]


def bench_update(ruleset: Ruleset, engine: str, seed: int = 0, reps: int = 5,
                 partition: Optional[RangeVectorSet] = None, verify: bool = True,
                 verify_packets: int = DEFAULT_VERIFY_PACKETS) -> BenchReport:
    """Insert then delete the held-out fifth, timing both phases."""
    base, heldout = split_fifths(ruleset, seed)
    clf = make_engine(engine, ruleset, base, partition)
    totals, ins, dels = [], [], []
    for _ in range(reps):
        t0 = time.perf_counter()
        for r in heldout:
            if not clf.insert(r):
                raise CorrectnessError(f"insert of rule {r.id} failed")
        t1 = time.perf_counter()
        for r in heldout:
            if not clf.delete(r.id):
                raise CorrectnessError(f"delete of rule {r.id} failed")
        t2 = time.perf_counter()
        n = len(heldout)
        totals.append(2 * n / (t2 - t0) / 1e6)
        ins.append(n / (t1 - t0) / 1e6)
        dels.append(n / (t2 - t1) / 1e6)
    checked = verify_engine(clf, ruleset, verify_packets, seed) if verify else 0
    return BenchReport(
        engine, "mups", statistics.median(totals), ruleset.name, len(ruleset), seed, reps,
        samples=totals,
        extra={"insert_mups": statistics.median(ins), "delete_mups": statistics.median(dels),
               "min": min(totals), "max": max(totals), "heldout": len(heldout),
               "verified_packets": checked},
    )


def bench_lookup(ruleset: Ruleset, engine, trace: Sequence, reps: int = 5,
                 partition: Optional[RangeVectorSet] = None, seed: int = 0,
                 verify: bool = True, verify_packets: int = DEFAULT_VERIFY_PACKETS) -> BenchReport:
    """Lookup throughput over ``trace``; ``engine`` is a name or a built engine."""
    if not trace:
        raise ValueError("lookup benchmark needs a non-empty trace")
    name = engine if isinstance(engine, str) else engine_tag(engine)
    clf = make_engine(engine, ruleset, partition=partition) if isinstance(engine, str) else engine
    packets = _packets(trace)
    for rec in trace:
        if isinstance(rec, TraceRecord) and rec.expected is not None:
            got = clf.classify(rec.packet).rule_id
            if got != rec.expected:
                raise CorrectnessError(f"packet {rec.packet}: expected rule {rec.expected}, got {got}")
    classify = clf.classify
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        for p in packets:
            classify(p)
        samples.append(len(packets) / (time.perf_counter() - start) / 1e6)
    checked = verify_engine(clf, ruleset, verify_packets, seed) if verify else 0
    return BenchReport(
        name, "mlps", statistics.median(samples), ruleset.name, len(ruleset), seed, reps,
        trace_len=len(packets), samples=samples,
        extra={"min": min(samples), "max": max(samples), "tables": len(clf.tables),
               "verified_packets": checked},
    )


def _mixed_run(clf, packets, heldout, rate, duration):
    classify = clf.classify
    n = len(packets)
    lookups = updates = 0
    start = time.perf_counter()
    if rate <= 0 or not heldout:
        while True:
            for p in packets:
                classify(p)
            lookups += n
            if time.perf_counter() - start >= duration:
                break
    else:
        # Token bucket holding at most one token: no bursts.
        tokens = 0.0
        last = start
        i = u = 0
        inserted = False
        while True:
            classify(packets[i])
            i += 1
            if i == n:
                i = 0
            lookups += 1
            now = time.perf_counter()
            tokens = min(1.0, tokens + (now - last) * rate)
            last = now
            if tokens >= 1.0:
                tokens -= 1.0
                r = heldout[u]
                if inserted:
                    clf.delete(r.id)
                    u = (u + 1) % len(heldout)
                else:
                    clf.insert(r)
                inserted = not inserted
                updates += 1
            if now - start >= duration:
                break
    elapsed = time.perf_counter() - start
    return lookups / elapsed / 1e6, updates / elapsed


def bench_mixed(ruleset: Ruleset, engine: str, trace: Sequence, update_rate: float,
                duration: float = 1.0, reps: int = 3, seed: int = 0,
                partition: Optional[RangeVectorSet] = None, verify: bool = True,
                verify_packets: int = DEFAULT_VERIFY_PACKETS) -> BenchReport:
    """Lookups interleaved with a paced stream of held-out rule insert/delete pairs."""
    if update_rate < 0:
        raise ValueError("update rate must be non-negative")
    if not trace:
        raise ValueError("mixed benchmark needs a non-empty trace")
    base, heldout = split_fifths(ruleset, seed)
    clf = make_engine(engine, ruleset, base, partition)
    packets = _packets(trace)
    samples, achieved = [], []
    for _ in range(reps):
        mlps, ups = _mixed_run(clf, packets, heldout, update_rate, duration)
        samples.append(mlps)
        achieved.append(ups)
    checked = verify_engine(clf, ruleset, verify_packets, seed) if verify else 0
    return BenchReport(
        engine, "mixed", statistics.median(samples), ruleset.name, len(ruleset), seed, reps,
        trace_len=len(packets), update_rate=update_rate, samples=samples,
        extra={"min": min(samples), "max": max(samples),
               "achieved_ups": statistics.median(achieved), "verified_packets": checked},
    )


# -- memory accounting -----------------------------------------------------

FIXED_OVERHEAD = 64      # classifier header
TABLE_HEADER = 64        # range/base vectors, counters, priority
TABLE_INDEX = 8          # pointer in the table list / tuple map
SLOT_BYTES = 16          # 64-bit hash plus entry pointer
RULE_OVERHEAD = 8 + 4 + 4  # group link, priority, id
ID_INDEX = 16            # id -> rule map entry


def rule_bytes(widths: Sequence[int]) -> int:
    return RULE_OVERHEAD + sum(ceil(w / 8) + 1 for w in widths)


def memory_footprint(classifier) -> int:
    """Analytic byte count of the engine's index structures."""
    rules = len(classifier)
    total = FIXED_OVERHEAD + rules * (rule_bytes(classifier.widths) + ID_INDEX)
    for t in classifier.tables:
        s = t.stats()
        total += (TABLE_HEADER + TABLE_INDEX + s.capacity * SLOT_BYTES
                  + s.entries * ceil(t.key_length / 8))
    return total


def bench_memory(ruleset: Ruleset, engine: str, partition: Optional[RangeVectorSet] = None,
                 seed: int = 0) -> BenchReport:
    clf = make_engine(engine, ruleset, partition=partition)
    return BenchReport(engine, "memory_bytes", memory_footprint(clf), ruleset.name,
                       len(ruleset), seed, extra={"tables": len(clf.tables)})


# -- partition granularity sweep --------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    segments: int
    range_vectors: int
    live_tables: int
    hash_ns: float
    verify_ns: float
    total_ns: float


def sweep_even_partition(ruleset: Ruleset, segments: Sequence[int],
                         k: CalibrationConstants) -> list:
    """Model cost of even x-per-dimension splits, for each x in ``segments``."""
    if not ruleset.rules:
        raise ValueError("sweep needs a non-empty ruleset")
    rows = []
    for x in segments:
        partition = build_range_vector_set([even_ranges(w, x) for w in ruleset.widths],
                                           ruleset.widths)
        stats = RvhClassifier(partition, ruleset.rules).table_stats()
        load = ModelInput.from_stats(stats).load_sum()
        hash_ns = len(partition) * k.hash_ns
        verify_ns = k.verify_ns * load
        rows.append(SweepRow(x, len(partition), stats.m, hash_ns, verify_ns,
                             hash_ns + verify_ns + k.compare_ns))
    return rows


def sweet_point(rows: Sequence[SweepRow]) -> int:
    return min(rows, key=lambda r: (r.total_ns, r.segments)).segments


# -- overlap statistic -------------------------------------------------------

def overlap_statistic(classifier) -> dict:
    """Average overlap-group size per occupied entry, and extra rules per entry."""
    n = e = 0
    for t in classifier.tables:
        s = t.stats()
        n += s.rules
        e += s.entries
    if e == 0:
        return {"rules": 0, "entries": 0, "group_size": 0.0, "extra_per_entry": 0.0}
    return {"rules": n, "entries": e, "group_size": n / e, "extra_per_entry": (n - e) / e}

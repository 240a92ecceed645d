"""Analytical lookup-cost model and its calibration.

Per-packet time is modelled as one hash probe per live table, plus one
verification per expected rule touched (``n_i / s_i`` per table), plus a
final priority comparison::

    T = m * hash_ns + verify_ns * sum(n_i / s_i) + compare_ns
"""

from __future__ import annotations

import logging
import random
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

from .core import ClassifierStats, TableStats

log = logging.getLogger(__name__)

DEFAULT_ITERATIONS = 10**7
MIN_ITERATIONS = 10**5
BATCH = 1000


@dataclass(frozen=True)
class CalibrationConstants:
    hash_ns: float
    verify_ns: float
    compare_ns: float

    def __post_init__(self):
        if min(self.hash_ns, self.verify_ns, self.compare_ns) <= 0:
            raise ValueError("calibration constants must be strictly positive")

    @classmethod
    def parse(cls, text: str) -> "CalibrationConstants":
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 3:
            raise ValueError("expected three comma-separated values: hash,verify,compare")
        return cls(*parts)


# Constants measured on the reference server; handy for reproducing its table.
REFERENCE_CONSTANTS = CalibrationConstants(61.0, 4.7, 0.9)


@dataclass(frozen=True)
class ModelInput:
    """Live table count plus either per-table ``(n_i, s_i)`` or the mean load."""

    m: int
    saturation: Optional[float] = None
    tables: Optional[tuple] = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("the model needs at least one live table (m >= 1)")
        if self.tables is not None:
            tables = tuple((int(n), int(s)) for n, s in self.tables)
            if len(tables) != self.m:
                raise ValueError("per-table stats must have exactly m entries")
            if any(n < 0 or s < 1 for n, s in tables):
                raise ValueError("need n_i >= 0 and s_i >= 1")
            object.__setattr__(self, "tables", tables)
        elif self.saturation is None or self.saturation < 0:
            raise ValueError("give either per-table stats or a non-negative saturation")

    @classmethod
    def from_stats(cls, stats: ClassifierStats) -> "ModelInput":
        return cls(stats.m, tables=tuple((t.rules, t.capacity) for t in stats.tables))

    def load_sum(self) -> float:
        """Sum of n_i / s_i over live tables."""
        if self.tables is not None:
            return sum(n / s for n, s in self.tables)
        return self.m * self.saturation

    def mean_saturation(self) -> float:
        return self.load_sum() / self.m


def saturation(stats: ClassifierStats) -> float:
    if stats.m == 0:
        raise ValueError("saturation is undefined without live tables")
    return sum(t.rules / t.capacity for t in stats.tables) / stats.m


def estimate_time(inp: ModelInput, k: CalibrationConstants) -> float:
    """Estimated nanoseconds to classify one packet."""
    return inp.m * k.hash_ns + k.verify_ns * inp.load_sum() + k.compare_ns


def hash_time(inp: ModelInput, k: CalibrationConstants) -> float:
    return inp.m * k.hash_ns


def verify_time(inp: ModelInput, k: CalibrationConstants) -> float:
    return k.verify_ns * inp.load_sum()


def intermediate_ratios(tables: Sequence[TableStats]) -> list:
    """Per-table (utilisation e/s, overlap n/e); overlap is None for empty tables."""
    out = []
    for t in tables:
        if t.capacity < 1 or t.entries < 0:
            raise ValueError(f"bad table stats {t}")
        if t.entries == 0:
            if t.rules > 0:
                raise ValueError(f"table {t.index} holds rules but no entries")
            out.append((0.0, None))
        else:
            out.append((t.entries / t.capacity, t.rules / t.entries))
    return out


def estimate_time_per_table(tables: Sequence[TableStats], hash_ns: Sequence[float],
                            verify_ns: Sequence[float], compare_ns: float) -> float:
    """General form with distinct per-table hash and verification costs.

    Sums ``h_i + c_i * r_i * o_i`` over tables; tables without entries
    contribute only their hash cost.
    """
    if not tables:
        raise ValueError("the model needs at least one live table")
    if not len(tables) == len(hash_ns) == len(verify_ns):
        raise ValueError("one hash and one verify cost per table")
    total = compare_ns
    for (r, o), h, c in zip(intermediate_ratios(tables), hash_ns, verify_ns):
        total += h
        if o is not None:
            total += c * r * o
    return total


# -- calibration -----------------------------------------------------------

def _per_op_ns(fn, args_list, iterations: int) -> float:
    """Median nanoseconds per call over batches of BATCH calls."""
    resolution = time.get_clock_info("perf_counter").resolution
    samples = []
    n_args = len(args_list)
    done = 0
    j = 0
    while done < iterations:
        batch = min(BATCH, iterations - done)
        start = time.perf_counter()
        for _ in range(batch):
            fn(*args_list[j])
            j += 1
            if j == n_args:
                j = 0
        elapsed = time.perf_counter() - start
        if elapsed < 100 * resolution:
            raise RuntimeError("timer too coarse for this batch size; raise the iteration count")
        samples.append(elapsed / batch * 1e9)
        done += batch
    return statistics.median(samples)


def calibrate(iterations: int = DEFAULT_ITERATIONS, seed: int = 0) -> CalibrationConstants:
    """Micro-benchmark table probing, rule verification and priority comparison."""
    if iterations < MIN_ITERATIONS:
        raise ValueError(f"calibration needs at least {MIN_ITERATIONS} iterations")
    from .partition import build_classifier
    from .ruleset import generate_trace
    from .synth import acl_like

    ruleset = acl_like(512, seed)
    clf = build_classifier(ruleset)
    tables = clf.tables
    packets = generate_trace(ruleset, 1024, seed)
    rng = random.Random(seed)
    rules = ruleset.rules

    probe_args = [(tables[rng.randrange(len(tables))], p) for p in packets]
    verify_args = [(rules[rng.randrange(len(rules))], p) for p in packets]
    compare_args = [(rules[rng.randrange(len(rules))], rules[rng.randrange(len(rules))])
                    for _ in range(1024)]

    def probe(table, packet):
        return table.lookup(packet)

    def verify(rule, packet):
        return rule.matches(packet)

    def compare(a, b):
        return a.priority > b.priority or (a.priority == b.priority and a.id < b.id)

    k = CalibrationConstants(
        _per_op_ns(probe, probe_args, iterations),
        _per_op_ns(verify, verify_args, iterations),
        _per_op_ns(compare, compare_args, iterations),
    )
    log.info("calibrated %s", k)
    return k


@dataclass(frozen=True)
class ValidationReport:
    ruleset: str
    m: int
    saturation: float
    estimated_ns: float
    measured_ns: float

    @property
    def error_pct(self) -> float:
        return abs(self.estimated_ns - self.measured_ns) / self.measured_ns * 100

    @property
    def estimated_us(self) -> float:
        return self.estimated_ns / 1000

    @property
    def measured_us(self) -> float:
        return self.measured_ns / 1000

    def to_record(self) -> dict:
        rec = asdict(self)
        rec.update(estimated_us=self.estimated_us, measured_us=self.measured_us,
                   error_pct=self.error_pct)
        return rec


def validate(classifier, trace: Sequence, k: CalibrationConstants,
             name: str = "") -> ValidationReport:
    """Compare the model's estimate with the measured mean classify time."""
    if not trace:
        raise ValueError("validation needs a non-empty trace")
    stats = classifier.table_stats()
    inp = ModelInput.from_stats(stats)
    estimated = estimate_time(inp, k)
    classify = classifier.classify
    start = time.perf_counter()
    for p in trace:
        classify(p)
    measured = (time.perf_counter() - start) / len(trace) * 1e9
    report = ValidationReport(name, stats.m, inp.mean_saturation(), estimated, measured)
    if estimated > measured:
        log.warning("estimate %.1f ns exceeds measured %.1f ns", estimated, measured)
    return report

"""Distribution-driven partition of prefix-length space.

Each dimension is cut independently from its prefix-length histogram
(locate, combine, merge, align); the Cartesian product of the per-dimension
ranges gives the range-vectors. Ranges here are closed ``(lo, hi)`` pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

from .core import RangeVector, RangeVectorSet, RvhClassifier
from .hashtable import DEFAULT_SEED
from .ruleset import Ruleset, prefix_length_histogram

# Masses within this of the threshold count as equal, not greater.
_EPS = 1e-12


@dataclass(frozen=True)
class PartitionParams:
    max_gap: int = 2     # D
    max_size: int = 8    # S, merged ranges must be strictly smaller

    def __post_init__(self):
        if self.max_gap < 0 or self.max_size < 1:
            raise ValueError("need max_gap >= 0 and max_size >= 1")


def locate_points(hist: Sequence[float], width: int) -> list:
    """Lengths whose mass exceeds the mean CDF slope 1/W."""
    if width <= 0:
        raise ValueError("field width must be positive")
    if len(hist) != width + 1:
        raise ValueError(f"histogram needs {width + 1} entries, got {len(hist)}")
    threshold = 1.0 / width
    return [L for L, mass in enumerate(hist) if mass > threshold + _EPS]


def combine_lengths(points: Sequence[int]) -> list:
    """Runs of consecutive lengths become ranges; [0, 0] is always present."""
    ranges = []
    for p in points:
        if ranges and p == ranges[-1][1] + 1:
            ranges[-1] = (ranges[-1][0], p)
        else:
            ranges.append((p, p))
    if not ranges or ranges[0][0] != 0:
        ranges.insert(0, (0, 0))
    return ranges


def merge_ranges(ranges: Sequence[tuple], params: PartitionParams = PartitionParams()) -> list:
    """Greedy left-to-right merge of close neighbours.

    ``(a, b)`` and ``(c, d)`` merge when ``c - b <= max_gap`` and
    ``d - a + 1 < max_size``; the merged range is then tested against the
    next one.
    """
    out = []
    for lo, hi in ranges:
        if out:
            a, b = out[-1]
            if lo - b <= params.max_gap and hi - a + 1 < params.max_size:
                out[-1] = (a, hi)
                continue
        out.append((lo, hi))
    return out


def align_ranges(ranges: Sequence[tuple], width: int) -> list:
    """Stretch each range up to the next one's start so [0, W] is covered."""
    if not ranges:
        return [(0, width)]
    los = [lo for lo, _ in ranges]
    los[0] = 0
    his = [nxt - 1 for nxt in los[1:]] + [width]
    return list(zip(los, his))


def partition_dimension(ruleset: Ruleset, dim: int,
                        params: PartitionParams = PartitionParams()) -> list:
    width = ruleset.widths[dim]
    hist = prefix_length_histogram(ruleset, dim)
    points = locate_points(hist, width)
    return align_ranges(merge_ranges(combine_lengths(points), params), width)


def check_dimension_ranges(ranges: Sequence[tuple], width: int) -> None:
    expected = 0
    for lo, hi in ranges:
        if lo != expected or hi < lo:
            raise ValueError(f"ranges {list(ranges)} do not tile [0, {width}]")
        expected = hi + 1
    if expected != width + 1:
        raise ValueError(f"ranges {list(ranges)} do not tile [0, {width}]")


def build_range_vector_set(per_dim: Sequence[Sequence[tuple]],
                           widths: Sequence[int]) -> RangeVectorSet:
    if len(per_dim) != len(widths):
        raise ValueError("one range list per dimension is required")
    for ranges, w in zip(per_dim, widths):
        check_dimension_ranges(ranges, w)
    vectors = [RangeVector.from_closed(combo) for combo in product(*per_dim)]
    return RangeVectorSet(vectors, widths)


def even_ranges(width: int, segments: int) -> list:
    """Split [0, W] into ``segments`` near-equal closed ranges."""
    if not 1 <= segments <= width + 1:
        raise ValueError(f"cannot split {width + 1} lengths into {segments} segments")
    n = width + 1
    bounds = [(j * n) // segments for j in range(segments + 1)]
    return [(bounds[j], bounds[j + 1] - 1) for j in range(segments)]


def partition_ruleset(ruleset: Ruleset, params: PartitionParams = PartitionParams()) -> list:
    """Per-dimension closed ranges for every dimension of ``ruleset``."""
    if not ruleset.rules:
        raise ValueError("cannot partition an empty ruleset")
    return [partition_dimension(ruleset, k, params) for k in range(ruleset.dims)]


def build_classifier(ruleset: Ruleset, params: PartitionParams = PartitionParams(),
                     seed: int = DEFAULT_SEED) -> RvhClassifier:
    partition = build_range_vector_set(partition_ruleset(ruleset, params), ruleset.widths)
    return RvhClassifier(partition, ruleset.rules, seed)


def rebuild(classifier: RvhClassifier, params: PartitionParams = PartitionParams()) -> RvhClassifier:
    """Repartition from the classifier's current rules and reload them."""
    rules = sorted(classifier.rules(), key=lambda r: r.id)
    return build_classifier(Ruleset(rules, classifier.widths), params, classifier.seed)

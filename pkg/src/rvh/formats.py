"""On-disk documents: partitions, model stats files and benchmark reports.

Structured documents are one versioned header line followed by a JSON
body; see docs/FORMATS.md for the exact schemas.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from math import prod
from typing import IO, Iterable, Optional, Sequence

from .core import ClassifierStats, RangeVectorSet, TableStats
from .partition import PartitionParams, build_range_vector_set, check_dimension_ranges
from .perfmodel import ModelInput

PARTITION_HEADER = "#rvh-partition v1"
STATS_HEADER = "#rvh-stats v1"
CSV_COLUMNS = ("engine", "metric", "ruleset", "rules", "value", "seed", "reps")


class DocumentError(ValueError):
    pass


def _split(text: str, header: str) -> dict:
    first, _, body = text.partition("\n")
    if first.strip() != header:
        raise DocumentError(f"expected header {header!r}, got {first.strip()!r}")
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"bad JSON body: {exc}") from None


@dataclass(frozen=True)
class PartitionDocument:
    widths: tuple
    params: PartitionParams
    ranges: tuple  # per dimension, closed (lo, hi) pairs
    dims: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(self.widths))
        object.__setattr__(self, "ranges",
                           tuple(tuple((int(lo), int(hi)) for lo, hi in r) for r in self.ranges))
        object.__setattr__(self, "dims", tuple(self.dims))
        if len(self.ranges) != len(self.widths):
            raise DocumentError("one range list per dimension is required")
        for r, w in zip(self.ranges, self.widths):
            check_dimension_ranges(r, w)

    @property
    def count(self) -> int:
        return prod(len(r) for r in self.ranges)

    def range_vector_set(self) -> RangeVectorSet:
        return build_range_vector_set(self.ranges, self.widths)

    def to_text(self) -> str:
        body = {
            "widths": list(self.widths),
            "dims": list(self.dims),
            "params": {"D": self.params.max_gap, "S": self.params.max_size},
            "ranges": [[list(r) for r in rs] for rs in self.ranges],
            "range_vectors": self.count,
        }
        return PARTITION_HEADER + "\n" + json.dumps(body, indent=2) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PartitionDocument":
        body = _split(text, PARTITION_HEADER)
        try:
            params = PartitionParams(body["params"]["D"], body["params"]["S"])
            doc = cls(body["widths"], params, body["ranges"], body.get("dims", ()))
        except (KeyError, TypeError) as exc:
            raise DocumentError(f"missing or malformed field: {exc}") from None
        if body.get("range_vectors", doc.count) != doc.count:
            raise DocumentError("range_vectors does not equal the product of range counts")
        return doc


def stats_to_text(stats: ClassifierStats, ruleset: str = "") -> str:
    body = {"ruleset": ruleset, "tables": [t._asdict() for t in stats.tables]}
    return STATS_HEADER + "\n" + json.dumps(body, indent=2) + "\n"


def model_input_from_text(text: str) -> tuple:
    """Read a stats file into ``(ModelInput, ruleset name)``.

    The body holds either ``{"m": .., "saturation": ..}`` or a ``tables``
    list with ``rules`` and ``capacity`` per table.
    """
    body = _split(text, STATS_HEADER)
    name = body.get("ruleset", "")
    try:
        if "tables" in body:
            tables = [TableStats(**{"index": i, "entries": 0, "priority": 0, **t})
                      for i, t in enumerate(body["tables"])]
            return ModelInput.from_stats(ClassifierStats(tuple(tables))), name
        return ModelInput(int(body["m"]), saturation=float(body["saturation"])), name
    except (KeyError, TypeError) as exc:
        raise DocumentError(f"missing or malformed field: {exc}") from None


def write_jsonl(records: Iterable[dict], fh: IO) -> None:
    for rec in records:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(fh: IO) -> list:
    return [json.loads(line) for line in fh if line.strip()]


def write_csv(records: Iterable[dict], fh: IO, columns: Sequence[str] = CSV_COLUMNS) -> None:
    w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for rec in records:
        w.writerow(rec)


def read_csv(fh: IO) -> list:
    return list(csv.DictReader(fh))


def report_records(reports: Iterable) -> list:
    return [r.to_record() if hasattr(r, "to_record") else dict(r) for r in reports]


def load_text(path: str, encoding: Optional[str] = "utf-8") -> str:
    with open(path, encoding=encoding) as fh:
        return fh.read()

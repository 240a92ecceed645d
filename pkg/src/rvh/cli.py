"""Command-line front end.

Exit codes: 0 success, 1 correctness failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from collections import Counter
from contextlib import contextmanager

from . import bench as B
from .formats import (CSV_COLUMNS, DocumentError, PartitionDocument, load_text,
                      model_input_from_text, report_records, write_csv, write_jsonl)
from .partition import PartitionParams, build_classifier, partition_ruleset
from .perfmodel import (CalibrationConstants, DEFAULT_ITERATIONS, ModelInput, calibrate,
                        estimate_time, validate)
from .ruleset import (FormatError, ParseError, generate_trace, parse_ruleset, parse_trace,
                      prefix_length_histogram, rule_length_vector)
from .core import RvhClassifier

log = logging.getLogger("rvh")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def default_seed() -> int:
    try:
        return int(os.environ.get("RVH_SEED", "0"))
    except ValueError:
        raise UsageError("RVH_SEED must be an integer") from None


def _dims(text):
    return tuple(d.strip() for d in text.split(",") if d.strip())


def _segments(text):
    lo, sep, hi = text.partition("..")
    try:
        if sep:
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad segment list {text!r}") from None


def _constants(text):
    try:
        return CalibrationConstants.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def load_ruleset(path, dims):
    name = os.path.splitext(os.path.basename(path))[0]
    return parse_ruleset(load_text(path), dims, name)


def load_trace(path, ruleset, dims):
    records = parse_trace(load_text(path), dims if len(dims) == ruleset.dims else ("sa", "da"))
    for i, rec in enumerate(records, 1):
        if len(rec.packet) != ruleset.dims:
            raise UsageError(f"trace has {len(rec.packet)} dimensions, ruleset {ruleset.dims}")
        for h, w in zip(rec.packet, ruleset.widths):
            if h >> w:
                raise UsageError(f"trace record {i}: header {h} exceeds {w} bits")
    return records


def _params(args):
    return PartitionParams(args.D, args.S)


def _partition_for(args, ruleset):
    if getattr(args, "partition", None):
        doc = PartitionDocument.from_text(load_text(args.partition))
        if doc.widths != ruleset.widths:
            raise UsageError(f"partition widths {doc.widths} do not match ruleset {ruleset.widths}")
        return doc.range_vector_set()
    return None


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


# -- commands ---------------------------------------------------------------

def cmd_partition(args):
    ruleset = load_ruleset(args.ruleset, args.dims)
    params = _params(args)
    doc = PartitionDocument(ruleset.widths, params, partition_ruleset(ruleset, params),
                            args.dims if len(args.dims) == ruleset.dims else ())
    with _output(args.output) as fh:
        fh.write(doc.to_text())
    print(f"range-vectors: {doc.count}", file=sys.stderr if args.output in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_classify(args):
    ruleset = load_ruleset(args.ruleset, args.dims)
    trace = load_trace(args.trace, ruleset, args.dims)
    partition = _partition_for(args, ruleset)
    engine = B.make_engine(args.engine, ruleset, partition=partition, params=_params(args))
    matched = 0
    mismatch = None
    out = sys.stdout
    for i, rec in enumerate(trace, 1):
        res = engine.classify(rec.packet)
        rid = res.rule_id if res.matched else -1
        matched += res.matched
        out.write(f"{rid} {res.priority}\n")
        if mismatch is None and rec.expected is not None and rec.expected != rid:
            mismatch = (i, rec.expected, rid)
    n = len(trace)
    rate = matched / n * 100 if n else 0.0
    print(f"{args.engine}: matched {matched}/{n} packets ({rate:.1f}%)", file=sys.stderr)
    if mismatch:
        i, want, got = mismatch
        print(f"mismatch at trace record {i}: expected {want}, got {got}", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def _bench_trace(args, ruleset):
    if args.trace:
        return load_trace(args.trace, ruleset, args.dims)
    return generate_trace(ruleset, args.trace_count, args.seed)


def cmd_bench(args):
    ruleset = load_ruleset(args.ruleset, args.dims)
    partition = _partition_for(args, ruleset)
    engines = args.engine or ["rvh"]
    records = []
    kind = args.kind
    if kind == "sweep":
        k = args.constants or calibrate(args.iterations, args.seed)
        rows = B.sweep_even_partition(ruleset, args.segments, k)
        for row in rows:
            records.append(dict(engine="rvh", metric="sweep", ruleset=ruleset.name,
                                rules=len(ruleset), value=row.total_ns, seed=args.seed, reps=1,
                                **row.__dict__))
        log.info("sweet point: %d segments per dimension", B.sweet_point(rows))
        columns = ("segments", "range_vectors", "live_tables", "hash_ns", "verify_ns", "total_ns")
    else:
        columns = None
        trace = _bench_trace(args, ruleset) if kind in ("lookup", "mixed") else None
        for eng in engines:
            if kind == "update":
                reports = [B.bench_update(ruleset, eng, args.seed, args.reps, partition,
                                          verify_packets=args.verify_packets)]
            elif kind == "lookup":
                reports = [B.bench_lookup(ruleset, eng, trace, args.reps, partition, args.seed,
                                          verify_packets=args.verify_packets)]
            elif kind == "mixed":
                reports = [B.bench_mixed(ruleset, eng, trace, rate, args.duration, args.reps,
                                         args.seed, partition, verify_packets=args.verify_packets)
                           for rate in (args.rate or [0.0])]
            else:
                reports = [B.bench_memory(ruleset, eng, partition, args.seed)]
            records.extend(report_records(reports))
    if args.jsonl:
        with _output(args.jsonl) as fh:
            write_jsonl(records, fh)
    with _output(args.csv) as fh:
        write_csv(records, fh, columns or CSV_COLUMNS)
    return EXIT_OK


def cmd_estimate(args):
    if args.constants is None and not args.calibrate:
        raise UsageError("give --constants h,c,q or --calibrate")
    k = args.constants or calibrate(args.iterations, args.seed)
    clf = None
    if args.stats_file:
        inp, name = model_input_from_text(load_text(args.stats_file))
    else:
        if not args.ruleset:
            raise UsageError("a ruleset path or --stats-file is required")
        ruleset = load_ruleset(args.ruleset, args.dims)
        name = ruleset.name
        partition = _partition_for(args, ruleset)
        clf = (RvhClassifier(partition, ruleset.rules) if partition is not None
               else build_classifier(ruleset, _params(args)))
        stats = clf.table_stats()
        if stats.m == 0:
            raise UsageError("classifier has no live tables; nothing to estimate")
        inp = ModelInput.from_stats(stats)
    est = estimate_time(inp, k)
    record = {"ruleset": name, "m": inp.m, "saturation": inp.mean_saturation(),
              "estimated_us": est / 1000,
              "constants": [k.hash_ns, k.verify_ns, k.compare_ns]}
    if args.trace:
        if clf is None:
            raise UsageError("--trace needs a ruleset, not a stats file")
        trace = [rec.packet for rec in load_trace(args.trace, ruleset, args.dims)]
        record.update(validate(clf, trace, k, name).to_record())
    if args.json:
        print(json.dumps(record, sort_keys=True))
    else:
        line = (f"{name or '-'}: m={inp.m} saturation={inp.mean_saturation():.4f} "
                f"estimated={est / 1000:.2f}us")
        if "measured_us" in record:
            line += f" measured={record['measured_us']:.2f}us error={record['error_pct']:.2f}%"
        print(line)
    return EXIT_OK


def cmd_stats(args):
    ruleset = load_ruleset(args.ruleset, args.dims)
    if not ruleset.rules:
        raise UsageError("ruleset is empty")
    dims = [args.dim] if args.dim is not None else range(ruleset.dims)
    counts_by_dim = {}
    for k in dims:
        if not 0 <= k < ruleset.dims:
            raise UsageError(f"dimension {k} out of range")
        counts_by_dim[k] = Counter(r.fields[k].length for r in ruleset)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dim", "length", "count", "mass", "cdf"])
        for k in dims:
            cdf = 0.0
            for L, mass in enumerate(prefix_length_histogram(ruleset, k)):
                cdf += mass
                w.writerow([k, L, counts_by_dim[k][L], f"{mass:.6f}", f"{min(cdf, 1.0):.6f}"])
    if args.cooccurrence:
        co = Counter(rule_length_vector(r) for r in ruleset)
        with _output(args.cooccurrence) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"len{k}" for k in range(ruleset.dims)] + ["count"])
            for lv, c in sorted(co.items()):
                w.writerow(list(lv) + [c])
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="rvh", description="Range-vector hash packet classification")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, partition_opts=True):
        sp.add_argument("--dims", type=_dims, default=("sa", "da"),
                        help="ClassBench fields to match, comma-separated (default sa,da)")
        if partition_opts:
            sp.add_argument("--D", type=int, default=2, help="max gap for merging ranges")
            sp.add_argument("--S", type=int, default=8, help="merged range size bound")

    sp = sub.add_parser("partition", help="derive a range-vector partition from a ruleset")
    sp.add_argument("ruleset")
    sp.add_argument("-o", "--output")
    common(sp)
    sp.set_defaults(func=cmd_partition)

    sp = sub.add_parser("classify", help="classify a trace")
    sp.add_argument("ruleset")
    sp.add_argument("trace")
    sp.add_argument("--engine", choices=B.ENGINES, default="rvh")
    sp.add_argument("--partition", help="partition document (default: derive from ruleset)")
    common(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("bench", help="run a benchmark protocol")
    sp.add_argument("kind", choices=("update", "lookup", "mixed", "memory", "sweep"))
    sp.add_argument("--ruleset", required=True)
    sp.add_argument("--trace")
    sp.add_argument("--trace-count", type=int, default=10_000)
    sp.add_argument("--engine", action="append", choices=B.ENGINES)
    sp.add_argument("--partition")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--reps", type=int, default=5)
    sp.add_argument("--rate", type=float, action="append", help="updates/second (mixed)")
    sp.add_argument("--duration", type=float, default=1.0, help="seconds per mixed run")
    sp.add_argument("--segments", type=_segments, default=list(range(1, 11)))
    sp.add_argument("--constants", type=_constants)
    sp.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS)
    sp.add_argument("--verify-packets", type=int, default=B.DEFAULT_VERIFY_PACKETS)
    sp.add_argument("--csv", help="CSV output (default stdout)")
    sp.add_argument("--jsonl", help="line-delimited JSON records")
    common(sp, partition_opts=False)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("estimate", help="model estimate of per-packet lookup time")
    sp.add_argument("ruleset", nargs="?")
    sp.add_argument("--partition")
    sp.add_argument("--constants", type=_constants, help="hash,verify,compare in ns")
    sp.add_argument("--calibrate", action="store_true")
    sp.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--stats-file")
    sp.add_argument("--trace", help="also measure and report model error")
    sp.add_argument("--json", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("stats", help="prefix-length distribution tables")
    sp.add_argument("ruleset")
    sp.add_argument("--dim", type=int)
    sp.add_argument("--out", help="distribution CSV (default stdout)")
    sp.add_argument("--cooccurrence", help="length-vector co-occurrence CSV")
    common(sp, partition_opts=False)
    sp.set_defaults(func=cmd_stats)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = default_seed()
        return args.func(args)
    except B.CorrectnessError as exc:
        print(f"rvh: correctness failure: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (OSError, ParseError, FormatError, DocumentError, UsageError, ValueError) as exc:
        print(f"rvh: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

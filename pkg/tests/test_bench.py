import pytest

from conftest import all_toy_packets
from rvh import bench as B
from rvh.core import RvhClassifier
from rvh.partition import build_classifier
from rvh.perfmodel import REFERENCE_CONSTANTS
from rvh.ruleset import (LinearOracle, Prefix, Rule, Ruleset, TraceRecord, generate_trace,
                         oracle_classify)
from rvh.synth import acl_like
from rvh.tss import TssClassifier


@pytest.fixture(scope="module")
def acl10k():
    return acl_like(10_000)


@pytest.fixture(scope="module")
def acl2k():
    return acl_like(2000, seed=7)


def test_report_validation():
    with pytest.raises(ValueError):
        B.BenchReport("rvh", "mlps", -1.0)
    with pytest.raises(ValueError):
        B.BenchReport("rvh", "mlps", 1.0, reps=0)
    rec = B.BenchReport("rvh", "mlps", 1.0, "x", 5).to_record()
    assert rec["engine"] == "rvh" and rec["rules"] == 5


def test_make_engine(toy):
    assert B.engine_tag(B.make_engine("rvh", toy)) == "rvh"
    assert B.engine_tag(B.make_engine("tss", toy)) == "tss"
    assert B.engine_tag(B.make_engine("oracle", toy)) == "oracle"
    with pytest.raises(ValueError):
        B.make_engine("trie", toy)


def test_oracle_engine(toy):
    eng = B.OracleEngine(toy.widths, toy.rules)
    assert not eng.insert(toy.rules[0])
    assert eng.delete(0) and not eng.delete(0)
    for p in all_toy_packets()[::3]:
        assert eng.classify(p) == oracle_classify(toy.rules[1:], p)


def test_split_fifths(acl2k, toy):
    base, held = B.split_fifths(acl2k, 1)
    assert len(held) == 400 and len(base) == 1600
    assert {r.id for r in base}.isdisjoint(r.id for r in held)
    assert B.split_fifths(acl2k, 1) == (base, held)
    assert B.split_fifths(acl2k, 2)[1] != held
    with pytest.raises(ValueError):
        B.split_fifths(toy.subset(toy.rules[:4]), 0)


def test_sweep_packets_exhaustive_for_toy(toy):
    assert len(B.sweep_packets(toy, toy.rules, 10, 0)) == 1024


def test_verify_engine_catches_wrong_answers(toy):
    clf = B.make_engine("rvh", toy)
    assert B.verify_engine(clf, toy) == 1024

    class Broken:
        def rules(self):
            return toy.rules

        def classify(self, packet):
            return clf.classify((0, 0))

    with pytest.raises(B.CorrectnessError):
        B.verify_engine(Broken(), toy)


# -- update -------------------------------------------------------------------

@pytest.mark.parametrize("engine", ["rvh", "tss"])
def test_bench_update(acl2k, engine):
    rep = B.bench_update(acl2k, engine, seed=3, reps=2, verify_packets=2000)
    assert rep.metric == "mups" and rep.value > 0
    assert rep.extra["heldout"] == 400
    assert rep.extra["insert_mups"] > 0 and rep.extra["delete_mups"] > 0
    assert rep.extra["verified_packets"] == 2000


def test_bench_update_toy_is_exhaustive(toy):
    for engine in B.ENGINES:
        rep = B.bench_update(toy, engine, seed=0, reps=1)
        assert rep.extra["verified_packets"] == 1024


def test_update_engines_end_equivalent(acl2k):
    base, held = B.split_fifths(acl2k, 4)
    finals = []
    for engine in ("rvh", "tss"):
        clf = B.make_engine(engine, acl2k, base)
        for r in held:
            clf.insert(r)
        for r in held[::2]:
            clf.delete(r.id)
        finals.append(clf)
    packets = B.sweep_packets(acl2k, finals[0].rules(), 3000, 1)
    oracle = LinearOracle(finals[0].rules())
    for p in packets:
        assert finals[0].classify(p) == finals[1].classify(p) == oracle.classify(p)


def test_lower_priority_inserts_leave_higher_results_alone(acl2k):
    rules = sorted(acl2k.rules, key=lambda r: -r.priority)
    base, held = rules[:1600], rules[1600:]
    floor = max(r.priority for r in held)
    clf = build_classifier(acl2k.subset(base))
    packets = generate_trace(acl2k.subset(base), 2000, 5)
    before = [clf.classify(p) for p in packets]
    for r in held:
        clf.insert(r)
    for p, res in zip(packets, before):
        if res.priority > floor:
            assert clf.classify(p) == res


# -- lookup -------------------------------------------------------------------

def test_bench_lookup(acl2k):
    trace = generate_trace(acl2k, 2000, 1)
    rep = B.bench_lookup(acl2k, "rvh", trace, reps=2, verify_packets=1000)
    assert rep.metric == "mlps" and rep.value > 0 and rep.trace_len == 2000
    assert len(rep.samples) == 2


def test_bench_lookup_checks_expectations(toy):
    bad = [TraceRecord((31, 16), 3)]
    with pytest.raises(B.CorrectnessError):
        B.bench_lookup(toy, "tss", bad, reps=1)
    good = [TraceRecord((31, 16), 2), TraceRecord((0, 0), None)]
    assert B.bench_lookup(toy, "tss", good, reps=1).value > 0
    with pytest.raises(ValueError):
        B.bench_lookup(toy, "rvh", [], reps=1)


@pytest.mark.slow
def test_lookup_rvh_beats_tss(acl10k):
    clf = build_classifier(acl10k)
    tss = TssClassifier(acl10k.widths, acl10k.rules)
    assert clf.m <= 25 and tss.m >= 100
    trace = generate_trace(acl10k, 3000, 2)
    rvh = B.bench_lookup(acl10k, clf, trace, reps=3, verify_packets=1000)
    base = B.bench_lookup(acl10k, tss, trace, reps=3, verify_packets=1000)
    assert rvh.value > base.value


# -- mixed --------------------------------------------------------------------

def test_bench_mixed(acl2k):
    trace = generate_trace(acl2k, 1000, 1)
    rep = B.bench_mixed(acl2k, "rvh", trace, 2000, duration=0.2, reps=1, verify_packets=1000)
    assert rep.metric == "mixed" and rep.value > 0
    assert rep.update_rate == 2000
    assert rep.extra["achieved_ups"] > 0
    idle = B.bench_mixed(acl2k, "tss", trace, 0, duration=0.1, reps=1, verify_packets=500)
    assert idle.extra["achieved_ups"] == 0
    with pytest.raises(ValueError):
        B.bench_mixed(acl2k, "rvh", trace, -1)


def test_mixed_run_keeps_rules_consistent(toy):
    trace = generate_trace(toy, 50, 0)
    rep = B.bench_mixed(toy, "rvh", trace, 10**6, duration=0.05, reps=2)
    assert rep.extra["verified_packets"] == 1024


# -- memory -------------------------------------------------------------------

def test_memory_empty_is_fixed_overhead(toy_partition):
    assert B.memory_footprint(RvhClassifier(toy_partition)) == B.FIXED_OVERHEAD
    assert B.memory_footprint(TssClassifier((5, 5))) == B.FIXED_OVERHEAD


def test_memory_deterministic_and_rvh_smaller(acl10k):
    rvh = build_classifier(acl10k)
    tss = TssClassifier(acl10k.widths, acl10k.rules)
    assert B.memory_footprint(rvh) == B.memory_footprint(build_classifier(acl10k))
    assert B.memory_footprint(rvh) <= B.memory_footprint(tss)


def test_memory_grows_with_rules(acl10k):
    part = build_classifier(acl10k).partition
    sizes = []
    for n in (1000, 2000, 4000, 8000, 10_000):
        sub = acl10k.rules[:n]
        sizes.append((B.memory_footprint(RvhClassifier(part, sub)),
                      B.memory_footprint(TssClassifier(acl10k.widths, sub))))
    for (a, b), (c, d) in zip(sizes, sizes[1:]):
        assert c > a and d > b


def test_bench_memory(toy):
    rep = B.bench_memory(toy, "rvh")
    assert rep.metric == "memory_bytes" and rep.extra["tables"] == 4


# -- granularity sweep --------------------------------------------------------

@pytest.fixture(scope="module")
def sweep_rows(acl10k):
    return B.sweep_even_partition(acl10k, range(1, 11), REFERENCE_CONSTANTS)


def test_sweep_hash_column(sweep_rows):
    for row in sweep_rows:
        assert row.range_vectors == row.segments ** 2
        assert row.hash_ns == row.segments ** 2 * REFERENCE_CONSTANTS.hash_ns
        assert row.live_tables <= row.range_vectors
        assert row.total_ns == pytest.approx(row.hash_ns + row.verify_ns + 0.9)


def test_sweep_sweet_point_on_clustered_fixture(sweep_rows):
    sweet = B.sweet_point(sweep_rows)
    assert 3 <= sweet <= 5
    # Verification cost falls up to the sweet point; past it the load floor
    # of the many small tables lets it creep back up while hashing dominates.
    verify = [r.verify_ns for r in sweep_rows]
    assert all(a >= b for a, b in zip(verify[:sweet], verify[1:sweet]))
    assert verify[-1] < verify[0] / 10


def test_sweep_errors():
    with pytest.raises(ValueError):
        B.sweep_even_partition(Ruleset([], (32,)), [1], REFERENCE_CONSTANTS)


# -- overlap ------------------------------------------------------------------

def test_overlap_statistic(toy_rvh):
    stat = B.overlap_statistic(toy_rvh)
    # Five keys in table 0, "011" and "110" in table 1, one each in 2 and 3.
    assert stat["rules"] == 10 and stat["entries"] == 9
    assert stat["group_size"] == pytest.approx(10 / 9)
    assert stat["extra_per_entry"] == pytest.approx(1 / 9)


def test_overlap_statistic_empty():
    clf = TssClassifier((4,))
    assert B.overlap_statistic(clf)["entries"] == 0
    clf.insert(Rule(0, (Prefix(0, 0, 4),), 1))
    assert B.overlap_statistic(clf)["group_size"] == 1.0

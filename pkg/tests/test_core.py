import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import all_toy_packets
from rvh.core import (RangeVector, RangeVectorSet, RvhClassifier, build_packet_key,
                      build_rule_key, map_rule)
from rvh.hashtable import HashKey
from rvh.partition import build_range_vector_set
from rvh.ruleset import NO_MATCH, MatchResult, Prefix, Rule, oracle_classify


def bits(s):
    return int(s, 2)


def toy_rule(rid, sa, da, pri):
    return Rule(rid, (Prefix.from_bits(sa, 5), Prefix.from_bits(da, 5)), pri)


# -- range-vectors ------------------------------------------------------------

def test_range_vector_basics():
    rv = RangeVector.from_closed([(3, 5), (4, 5)])
    assert rv.ranges == ((3, 6), (4, 6))
    assert rv.base == (3, 4)
    assert rv.contains((3, 5)) and not rv.contains((2, 5))
    assert rv.volume() == 6
    assert str(rv) == "([3, 6), [4, 6))"
    with pytest.raises(ValueError):
        RangeVector(((2, 2),))


def test_range_vector_set_rejects_bad_partitions():
    with pytest.raises(ValueError, match="overlap"):
        RangeVectorSet([((0, 4),), ((3, 6),)], (5,))
    with pytest.raises(ValueError, match="cover"):
        RangeVectorSet([((0, 3),)], (5,))
    with pytest.raises(ValueError, match="exceeds"):
        RangeVectorSet([((0, 7),)], (5,))
    with pytest.raises(ValueError):
        RangeVectorSet([], (5,))


def test_map_rule_worked_example(toy, toy_partition):
    by_id = toy.by_id()
    assert map_rule(toy_partition, by_id[0]) == 0
    assert toy_partition[0].ranges == ((3, 6), (4, 6))
    assert map_rule(toy_partition, by_id[9]) == 3
    assert toy_partition[3].ranges == ((0, 3), (0, 4))
    assert map_rule(toy_partition, by_id[6]) == 2


# -- keys -----------------------------------------------------------------

def test_rule_keys_worked_example(toy):
    by_id = toy.by_id()
    assert str(build_rule_key((3, 4), by_id[0])) == "1001101"
    k2, k3 = build_rule_key((3, 4), by_id[2]), build_rule_key((3, 4), by_id[3])
    assert str(k2) == str(k3) == "1111000"
    assert k2 == k3
    assert build_rule_key((0, 0), by_id[7]) == HashKey.make(0, 0)
    with pytest.raises(ValueError):
        build_rule_key((3,), by_id[0])
    with pytest.raises(ValueError):
        build_rule_key((4, 4), by_id[0])


def test_packet_keys():
    p = (bits("11111"), bits("10000"))
    assert str(build_packet_key((3, 4), p, (5, 5))) == "1111000"
    assert build_packet_key((0, 0), p, (5, 5)).length == 0
    assert str(build_packet_key((5, 5), p, (5, 5))) == "1111110000"
    with pytest.raises(ValueError):
        build_packet_key((3,), p, (5, 5))


# -- the worked example ---------------------------------------------------------

def test_table_contents(toy_rvh):
    assert toy_rvh.m == 4
    contents = {t.index: sorted(r.id for r in t.rules()) for t in toy_rvh.tables}
    assert contents == {0: [0, 1, 2, 3, 4, 5], 1: [7, 8], 2: [6], 3: [9]}
    t0 = toy_rvh.table(0)
    keys = {str(build_rule_key(t0.base, r)): sorted(x.id for x in g)
            for g in t0.groups() for r in g[:1]}
    assert keys == {"1011001": [1], "0100110": [4], "0010100": [5], "1111000": [2, 3],
                    "1001101": [0]}


def test_table_stats(toy_rvh):
    stats = toy_rvh.table_stats()
    assert stats.m == 4
    n = {t.index: t.rules for t in stats.tables}
    assert n == {0: 6, 1: 2, 2: 1, 3: 1}
    t0 = next(t for t in stats.tables if t.index == 0)
    assert (t0.entries, t0.capacity, t0.priority) == (5, 8, 4)
    assert RvhClassifier(toy_rvh.partition).table_stats().m == 0


def test_table_order(toy_rvh):
    # Priority first (4, 3, 2, 0); nothing ties here.
    assert [t.index for t in toy_rvh.tables] == [0, 2, 1, 3]
    assert [t.priority for t in toy_rvh.tables] == [4, 3, 2, 0]


def test_table_order_tie_break_on_modulus():
    part = build_range_vector_set([[(0, 2), (3, 5)], [(0, 3), (4, 5)]], (5, 5))
    rules = [toy_rule(i, sa, da, 1) for i, (sa, da) in
             enumerate([("", ""), ("111", ""), ("", "1111"), ("111", "1111")])]
    clf = RvhClassifier(part, rules)
    # Equal priorities: larger sum of squared bases first, i.e. (3,4), (0,4), (3,0), (0,0).
    assert [t.base for t in clf.tables] == [(3, 4), (0, 4), (3, 0), (0, 0)]


def test_classify_worked_example(toy_rvh):
    res, probed = toy_rvh.classify_traced((bits("11111"), bits("10000")))
    assert res == MatchResult(2, 4)
    assert probed == [0]
    assert toy_rvh.classify((bits("01010"), bits("11111"))) == MatchResult(9, 0)


def test_insert_lands_ahead_of_equal_key(toy_rvh):
    r10 = toy_rule(10, "011", "011", 3)
    assert toy_rvh.insert(r10)
    t1 = toy_rvh.table(1)
    (group,) = [g for g in t1.groups() if 7 in {r.id for r in g}]
    assert [r.id for r in group] == [10, 7]
    assert str(build_rule_key(t1.base, r10)) == "011"
    assert toy_rvh.classify((bits("01110"), bits("01100"))).rule_id == 10
    toy_rvh.check_invariants()


def test_insert_into_empty_and_duplicates(toy_partition, toy):
    clf = RvhClassifier(toy_partition)
    assert clf.m == 0
    assert clf.insert(toy.rules[0])
    assert clf.m == 1
    before = clf.table_stats()
    assert not clf.insert(toy.rules[0])
    assert clf.table_stats() == before and len(clf) == 1
    with pytest.raises(ValueError):
        clf.insert(Rule(99, (Prefix(0, 0, 6), Prefix(0, 0, 5)), 1))
    with pytest.raises(ValueError):
        RvhClassifier(toy_partition, [toy.rules[0], toy.rules[0]])


def test_delete_removes_empty_table(toy_rvh):
    assert toy_rvh.delete(9)
    assert toy_rvh.m == 3 and toy_rvh.table(3) is None
    assert 9 not in toy_rvh
    toy_rvh.check_invariants()


def test_delete_then_classify(toy_rvh, toy):
    assert toy_rvh.delete(2)
    p = (bits("11111"), bits("10000"))
    assert toy_rvh.classify(p).rule_id == 3
    assert toy_rvh.classify(p) == oracle_classify([r for r in toy if r.id != 2], p)


def test_delete_unknown(toy_rvh):
    before = toy_rvh.table_stats()
    assert not toy_rvh.delete(99)
    assert toy_rvh.table_stats() == before and len(toy_rvh) == 10


def test_empty_classifier(toy_partition):
    assert RvhClassifier(toy_partition).classify((3, 4)) == NO_MATCH


def test_exhaustive_equivalence(toy_rvh, toy):
    for p in all_toy_packets():
        assert toy_rvh.classify(p) == oracle_classify(toy, p)


def test_equal_priority_in_later_table_is_found():
    # The best rule by id sits in a table probed later, with the same priority.
    part = build_range_vector_set([[(0, 2), (3, 5)], [(0, 5)]], (5, 5))
    a = toy_rule(5, "111", "", 2)
    b = toy_rule(1, "1", "", 2)
    clf = RvhClassifier(part, [a, b])
    assert clf.tables[0].base == (3, 0)
    assert clf.classify((0b11100, 0)) == MatchResult(1, 2)


def test_long_keys_beyond_64_bits():
    widths = (48, 48)
    part = build_range_vector_set([[(0, 39), (40, 48)]] * 2, widths)
    rng = random.Random(2)
    rules = []
    for i in range(300):
        f = []
        for w in widths:
            L = rng.choice([0, 20, 40, 48])
            f.append(Prefix((rng.getrandbits(L) << (w - L)) if L else 0, L, w))
        rules.append(Rule(i, tuple(f), rng.randint(0, 5)))
    clf = RvhClassifier(part, rules)
    assert max(t.key_length for t in clf.tables) > 64
    for r in rules[:100]:
        p = tuple(pf.value for pf in r.fields)
        assert clf.classify(p) == oracle_classify(rules, p)


# -- properties ---------------------------------------------------------------

prefix5 = st.integers(0, 5).flatmap(
    lambda L: st.integers(0, (1 << L) - 1).map(lambda v: Prefix(v << (5 - L), L, 5)))

ops = st.lists(st.tuples(st.booleans(), st.integers(0, 30), prefix5, prefix5, st.integers(0, 4)),
               max_size=60)


def closed_ranges(cuts):
    """Closed ranges over [0, 5] split at the given start points."""
    starts = sorted({0} | set(cuts))
    return [(s, e - 1) for s, e in zip(starts, starts[1:] + [6])]


partitions = st.tuples(st.sets(st.integers(1, 5)), st.sets(st.integers(1, 5))).map(
    lambda c: build_range_vector_set([closed_ranges(c[0]), closed_ranges(c[1])], (5, 5)))


@settings(max_examples=60, deadline=None)
@given(partitions, ops, st.randoms(use_true_random=False))
def test_random_updates_preserve_invariants(part, sequence, rnd):
    clf = RvhClassifier(part)
    live = {}
    for is_insert, rid, sa, da, pri in sequence:
        if is_insert:
            rule = Rule(rid, (sa, da), pri)
            assert clf.insert(rule) == (rid not in live)
            live.setdefault(rid, rule)
        else:
            assert clf.delete(rid) == (rid in live)
            live.pop(rid, None)
        clf.check_invariants()
        assert clf.m <= len(part)
    for t in clf.table_stats().tables:
        assert t.entries <= t.rules and t.entries <= t.capacity
    packets = [(rnd.randrange(32), rnd.randrange(32)) for _ in range(64)]
    packets += [(r.fields[0].value, r.fields[1].value) for r in live.values()]
    for p in packets:
        want = oracle_classify(live.values(), p)
        assert clf.classify(p) == want
        assert clf.classify(p, early_exit=False) == want


@settings(max_examples=30, deadline=None)
@given(partitions, st.lists(st.tuples(prefix5, prefix5, st.integers(0, 4)), max_size=20),
       prefix5, prefix5, st.integers(0, 4))
def test_insert_then_delete_restores_behaviour(part, base_rules, sa, da, pri):
    rules = [Rule(i, (a, b), p) for i, (a, b, p) in enumerate(base_rules)]
    clf = RvhClassifier(part, rules)
    before = [clf.classify(p) for p in all_toy_packets()]
    order_before = [t.index for t in clf.tables]
    assert clf.insert(Rule(100, (sa, da), pri))
    assert clf.delete(100)
    assert [clf.classify(p) for p in all_toy_packets()] == before
    assert [t.index for t in clf.tables] == order_before

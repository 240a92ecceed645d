"""Tuple space search: one hash table per distinct length-vector.

Shares the table substrate, hash and rule order with the RVH engine so
that benchmark differences come from the table count alone.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

from .core import ClassifierStats, KeyedTable
from .hashtable import DEFAULT_SEED
from .ruleset import NO_MATCH, MatchResult, Rule, rule_length_vector


class TssClassifier:
    def __init__(self, widths: Sequence[int], rules: Iterable[Rule] = (),
                 seed: int = DEFAULT_SEED):
        self.widths = tuple(widths)
        self.seed = seed
        self._tables = {}  # length-vector -> KeyedTable
        self._list = []
        self._rules = {}
        self._serial = 0
        for r in rules:
            if not self.insert(r):
                raise ValueError(f"duplicate rule id {r.id}")

    def __len__(self):
        return len(self._rules)

    def __contains__(self, rule_id):
        return rule_id in self._rules

    @property
    def m(self) -> int:
        return len(self._tables)

    @property
    def tables(self) -> list:
        return list(self._list)

    def rules(self) -> list:
        return list(self._rules.values())

    def table_for(self, lengths: Sequence[int]) -> Optional[KeyedTable]:
        return self._tables.get(tuple(lengths))

    def insert(self, rule: Rule) -> bool:
        if rule.id in self._rules:
            return False
        if rule.widths != self.widths:
            raise ValueError(f"rule widths {rule.widths} do not match classifier {self.widths}")
        lv = rule_length_vector(rule)
        table = self._tables.get(lv)
        if table is None:
            table = KeyedTable(self._serial, lv, self.widths, self.seed)
            self._serial += 1
            self._tables[lv] = table
            self._list.append(table)
        table.add(rule)
        self._rules[rule.id] = rule
        return True

    def delete(self, rule_id: int) -> bool:
        rule = self._rules.pop(rule_id, None)
        if rule is None:
            return False
        lv = rule_length_vector(rule)
        table = self._tables[lv]
        table.remove(rule)
        if table.n == 0:
            del self._tables[lv]
            self._list.remove(table)
        return True

    def classify(self, packet: Sequence[int]) -> MatchResult:
        best = None
        for t in self._list:
            group = t.lookup(packet)
            if group:
                for r in group:
                    if r.matches(packet):
                        if (best is None or r.priority > best.priority
                                or (r.priority == best.priority and r.id < best.id)):
                            best = r
                        break
        return MatchResult.of(best) if best is not None else NO_MATCH

    def table_stats(self) -> ClassifierStats:
        return ClassifierStats(tuple(t.stats() for t in self._list))

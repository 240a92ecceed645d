"""Seeded synthetic rulesets with prescribed prefix-length distributions.

Counts per length are allocated exactly (largest remainder), so a mass of
0.4 over 100 rules yields exactly 40 rules; lengths are then paired across
dimensions by independent shuffles.

Addresses come from a binary tree that only branches every ``stride`` bits
(the other bits are a fixed function of the prefix above them), so the
number of distinct prefixes grows gradually with length, as in real filter
sets where many rules share a parent block. ``stride=1`` gives uniform bits.
"""

from __future__ import annotations

import random
from typing import Mapping, Sequence

from .ruleset import Prefix, Rule, Ruleset

# Clustered source-address lengths; the lengths above 1/32 are exactly
# 12, 14-17, 23-26 and 30-32.
ACL_LIKE_SA = {
    0: 0.02, 8: 0.02, 12: 0.05, 13: 0.01, 14: 0.06, 15: 0.06, 16: 0.12, 17: 0.05,
    20: 0.02, 23: 0.06, 24: 0.14, 25: 0.05, 26: 0.05, 28: 0.02, 30: 0.06, 31: 0.06,
    32: 0.15,
}
ACL_LIKE_DA = {
    0: 0.10, 4: 0.02, 8: 0.05, 12: 0.02, 16: 0.15, 18: 0.04, 20: 0.02, 24: 0.25,
    25: 0.05, 28: 0.04, 30: 0.01, 32: 0.25,
}


def exact_counts(masses: Mapping[int, float], n: int) -> dict:
    total = sum(masses.values())
    raw = {L: m / total * n for L, m in masses.items()}
    counts = {L: int(v) for L, v in raw.items()}
    short = n - sum(counts.values())
    for L in sorted(raw, key=lambda L: (counts[L] - raw[L], L))[:short]:
        counts[L] += 1
    return counts


def tree_address(rng: random.Random, width: int, stride: int) -> int:
    a = 0
    for j in range(width):
        if j % stride == 0:
            bit = rng.getrandbits(1)
        else:
            bit = ((a * 0x9E3779B1 + j * 0x85EBCA77) >> 13) & 1
        a = (a << 1) | bit
    return a


def synthetic_ruleset(n: int, masses: Sequence[Mapping[int, float]], widths: Sequence[int],
                      seed: int, name: str = "synthetic", stride: int = 1) -> Ruleset:
    """``n`` rules, dimension k drawing lengths from ``masses[k]``.

    Priorities are positional (rule i gets n - i), ids are 0..n-1.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rng = random.Random(seed)
    columns = []
    for dist, w in zip(masses, widths):
        if max(dist) > w:
            raise ValueError(f"length above width {w}")
        col = [L for L, c in sorted(exact_counts(dist, n).items()) for _ in range(c)]
        rng.shuffle(col)
        columns.append(col)
    rules = []
    for i in range(n):
        fields = []
        for col, w in zip(columns, widths):
            L = col[i]
            a = tree_address(rng, w, stride)
            fields.append(Prefix((a >> (w - L)) << (w - L), L, w))
        rules.append(Rule(i, tuple(fields), n - i, "fwd"))
    return Ruleset(rules, widths, name)


def acl_like(n: int, seed: int = 1, stride: int = 4) -> Ruleset:
    """The clustered 2-field fixture: ACL-like lengths, tree addresses."""
    return synthetic_ruleset(n, [ACL_LIKE_SA, ACL_LIKE_DA], (32, 32), seed,
                             name=f"acl-like-{n}", stride=stride)


def random_ruleset(n: int, widths: Sequence[int], seed: int, max_priority: int = 8,
                   name: str = "random") -> Ruleset:
    """Uniform random lengths and small priority range (many ties)."""
    rng = random.Random(seed)
    rules = []
    for i in range(n):
        fields = []
        for w in widths:
            L = rng.randint(0, w)
            fields.append(Prefix((rng.getrandbits(L) if L else 0) << (w - L), L, w))
        rules.append(Rule(i, tuple(fields), rng.randint(0, max_priority), "fwd"))
    return Ruleset(rules, widths, name)

"""Range-vector hash (RVH) packet classification.

Rules are grouped into a handful of hash tables, one per range-vector of
prefix lengths, with keys built from truncated field prefixes. The package
also ships a tuple space search baseline, an analytical lookup-cost model
and a benchmark harness.
"""

from .core import RangeVector, RangeVectorSet, RvhClassifier, build_packet_key, build_rule_key, map_rule
from .partition import PartitionParams, build_classifier, build_range_vector_set, partition_ruleset
from .perfmodel import CalibrationConstants, ModelInput, calibrate, estimate_time, validate
from .ruleset import (MatchResult, Prefix, Rule, Ruleset, generate_trace, oracle_classify,
                      parse_ruleset, parse_trace, rule_length_vector)
from .tss import TssClassifier

__version__ = "0.1.0"

__all__ = [
    "CalibrationConstants", "MatchResult", "ModelInput", "PartitionParams", "Prefix",
    "RangeVector", "RangeVectorSet", "Rule", "Ruleset", "RvhClassifier", "TssClassifier",
    "build_classifier", "build_packet_key", "build_range_vector_set", "build_rule_key",
    "calibrate", "estimate_time", "generate_trace", "map_rule", "oracle_classify",
    "parse_ruleset", "parse_trace", "partition_ruleset", "rule_length_vector", "validate",
]

"""Compositional-generalization splits: train/test membership predicates.

Six split identifiers cover the no-generalization baseline plus five ways a
test program can be structured unlike anything in training:

    NONE              train and test share one distribution
    LENGTH            test programs are longer than any training program
    CONCEPT_MIX       training composes within one concept, test mixes both
    CONCEPT_ORDER     test reverses the concept ordering seen in training
    NEW_OP            a special operation appears alone in training,
                      composed with others only at test time
    OP_FUNCTIONALITY  a special operation is exercised in a new mode at test

Concepts partition each domain's operations: string programs split into
substring extractors (S) versus modifiers plus constants (M), with Compose
carrying no concept; list programs split into first-order operations plus
Map (F) versus the remaining higher-order operations (H).

"Length" counts subprograms: concatenated expressions for string programs,
non-input statements for list programs.
"""

import math
from dataclasses import dataclass

from . import dc_dsl, rf_dsl

RF, DC = "rf", "dc"
DOMAINS = (RF, DC)

SPLIT_IDS = ("NONE", "LENGTH", "CONCEPT_MIX", "CONCEPT_ORDER", "NEW_OP",
             "OP_FUNCTIONALITY")

TRAIN, TEST = "train", "test"
SIDES = (TRAIN, TEST)

# Concept ids. The *_FIRST constants fix which concept opens a training
# program under CONCEPT_ORDER; the test side opens with the other one.
S, M = "S", "M"
F, H = "F", "H"

_RF_SPECIAL = "Compose"
_DC_SPECIAL = "Scanl1"

_DC_H_OPS = frozenset({"Filter", "Count", "ZipWith", "Scanl1"})

_RF_OP_IDS = (
    ("Const", M),
    ("SubStr", S), ("GetSpan", S), ("GetToken", S), ("GetUpto", S),
    ("GetFrom", S),
    ("ToCase", M), ("Replace", M), ("Trim", M), ("GetFirst", M),
    ("GetAll", M), ("Substitute", M), ("SubstituteAll", M), ("Remove", M),
    ("RemoveAll", M),
)
_RF_CONCEPT = dict(_RF_OP_IDS)
_RF_CONCEPT["ConstStr"] = M  # accepted surface alias


def concept_of(domain, operation):
    """Concept id for an operation id; None for the string Compose."""
    if domain == RF:
        if operation == _RF_SPECIAL:
            return None
        concept = _RF_CONCEPT.get(operation)
        if concept is None:
            raise ValueError(f"unknown string operation {operation!r}")
        return concept
    if domain == DC:
        if operation not in dc_dsl.TOKEN_TO_OPERATION:
            raise ValueError(f"unknown list operation {operation!r}")
        return H if operation in _DC_H_OPS else F
    raise ValueError(f"unknown domain {domain!r}")


def program_length(domain, program):
    if domain == RF:
        return len(program.expressions)
    return len(program.statements)


def concept_sequence(domain, program):
    """Per-subprogram concept ids; None if any subprogram lacks a concept.

    A string program containing Compose has no concept sequence and belongs
    to neither side of the concept-based splits.
    """
    if domain == RF:
        out = []
        for expr in program.expressions:
            if isinstance(expr, rf_dsl.Compose):
                return None
            out.append(concept_of(RF, type(expr).__name__))
        return tuple(out)
    return tuple(concept_of(DC, s.operation) for s in program.statements)


def _rf_uses_compose(program):
    return any(isinstance(e, rf_dsl.Compose) for e in program.expressions)


def _rf_substring_in_compose(program):
    return any(isinstance(e, rf_dsl.Compose)
               and isinstance(e.inner, rf_dsl.SUBSTRING_TYPES)
               for e in program.expressions)


def _dc_scanl1_lambdas(program):
    return [s.lam for s in program.statements if s.operation == _DC_SPECIAL]


_DC_OLD_MODE = frozenset({"(-)", "(min)"})


@dataclass(frozen=True)
class SplitSpec:
    split: str
    domain: str
    train_lengths: range
    test_lengths: range
    first_concept: str | None = None  # CONCEPT_ORDER train-side opener
    second_concept: str | None = None
    special: str | None = None  # NEW_OP / OP_FUNCTIONALITY operation

    def lengths(self, side):
        return self.train_lengths if side == TRAIN else self.test_lengths

    def ordered_pattern(self, side, length):
        """CONCEPT_ORDER concept sequence demanded at this length.

        The opening concept covers the first ceil(length/2) subprograms;
        the test side swaps which concept opens.
        """
        first, second = self.first_concept, self.second_concept
        if side == TEST:
            first, second = second, first
        head = math.ceil(length / 2)
        return (first,) * head + (second,) * (length - head)


def _ranges(domain, lo_hi_train, lo_hi_test):
    a, b = lo_hi_train
    c, d = lo_hi_test
    return range(a, b + 1), range(c, d + 1)


def get_split(split_id, domain):
    if domain not in DOMAINS:
        raise ValueError(f"unknown domain {domain!r}")
    base = (1, 6) if domain == RF else (1, 4)
    concept_lo = 2 if domain == RF else 1
    concept = ((concept_lo, 6) if domain == RF else (concept_lo, 4))
    composed = (2, 6) if domain == RF else (2, 4)
    special = _RF_SPECIAL if domain == RF else _DC_SPECIAL
    if split_id == "NONE":
        train, test = _ranges(domain, base, base)
        return SplitSpec("NONE", domain, train, test)
    if split_id == "LENGTH":
        test_range = (7, 10) if domain == RF else (5, 5)
        train, test = _ranges(domain, base, test_range)
        return SplitSpec("LENGTH", domain, train, test)
    if split_id == "CONCEPT_MIX":
        train, test = _ranges(domain, concept, concept)
        return SplitSpec("CONCEPT_MIX", domain, train, test)
    if split_id == "CONCEPT_ORDER":
        train, test = _ranges(domain, concept, concept)
        first, second = (S, M) if domain == RF else (F, H)
        return SplitSpec("CONCEPT_ORDER", domain, train, test,
                         first_concept=first, second_concept=second)
    if split_id == "NEW_OP":
        # Training also admits length-1 programs that are exactly the
        # special operation; the ranges describe the composed remainder.
        train, test = _ranges(domain, composed, composed)
        return SplitSpec("NEW_OP", domain, train, test, special=special)
    if split_id == "OP_FUNCTIONALITY":
        train, test = _ranges(domain, base, base)
        return SplitSpec("OP_FUNCTIONALITY", domain, train, test,
                         special=special)
    raise ValueError(f"unknown split {split_id!r}")


def all_splits(domain):
    return [get_split(s, domain) for s in SPLIT_IDS]


def _uses_special(spec, program):
    if spec.domain == RF:
        return _rf_uses_compose(program)
    return any(s.operation == _DC_SPECIAL for s in program.statements)


def _only_special_length_one(spec, program):
    if program_length(spec.domain, program) != 1:
        return False
    if spec.domain == RF:
        return isinstance(program.expressions[0], rf_dsl.Compose)
    return program.statements[0].operation == _DC_SPECIAL


def in_train(spec, program):
    n = program_length(spec.domain, program)
    split = spec.split
    if split in ("NONE", "LENGTH"):
        return n in spec.train_lengths
    if split == "CONCEPT_MIX":
        seq = concept_sequence(spec.domain, program)
        return (n in spec.train_lengths and seq is not None
                and len(set(seq)) == 1)
    if split == "CONCEPT_ORDER":
        seq = concept_sequence(spec.domain, program)
        return (n in spec.train_lengths and seq is not None
                and seq == spec.ordered_pattern(TRAIN, n))
    if split == "NEW_OP":
        if _only_special_length_one(spec, program):
            return True
        return n in spec.train_lengths and not _uses_special(spec, program)
    if split == "OP_FUNCTIONALITY":
        if n not in spec.train_lengths:
            return False
        if spec.domain == RF:
            return not _rf_substring_in_compose(program)
        return all(lam in _DC_OLD_MODE for lam in _dc_scanl1_lambdas(program))
    raise ValueError(f"unknown split {split!r}")


def in_test(spec, program):
    n = program_length(spec.domain, program)
    split = spec.split
    if split in ("NONE", "LENGTH"):
        return n in spec.test_lengths
    if split == "CONCEPT_MIX":
        seq = concept_sequence(spec.domain, program)
        return (n in spec.test_lengths and seq is not None
                and len(set(seq)) == 2)
    if split == "CONCEPT_ORDER":
        seq = concept_sequence(spec.domain, program)
        return (n in spec.test_lengths and seq is not None
                and seq == spec.ordered_pattern(TEST, n))
    if split == "NEW_OP":
        return n in spec.test_lengths and _uses_special(spec, program)
    if split == "OP_FUNCTIONALITY":
        if n not in spec.test_lengths:
            return False
        if spec.domain == RF:
            return _rf_substring_in_compose(program)
        return any(lam not in _DC_OLD_MODE
                   for lam in _dc_scanl1_lambdas(program))
    raise ValueError(f"unknown split {split!r}")


def side_predicate(spec, side):
    return in_train if side == TRAIN else in_test

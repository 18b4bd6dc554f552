"""Benchmark task construction for both domains.

String tasks are rejection-sampled: draw four input strings, draw a program
shaped for the requested split and side, and keep the pair when every
expression runs cleanly and the side's membership predicate holds. List
tasks are built the other way around: enumerate every program up to the
split's length cap on a fixed input tuple, group programs by their output
signature, and draw a signature whose minimal solutions sit on the right
side of the split.

Each task carries a ground-truth decomposition trace: the per-step values
its solution produces, paired with the specification state after each step.
Datasets are written one task per JSON line with all program and list
values in DSL surface syntax.
"""

import functools
import json
import logging
import random
from dataclasses import dataclass

from . import dc_dsl, dc_enum, rf_dsl, splits
from .errors import (
    ExecError, GenerationTimeout, InconsistentSolution, InvalidUpdate,
)
from .search import (
    DC, RF, execute_subprogram, is_solved, make_dc_spec, make_rf_spec,
    subprogram_text, update_specification, verify_program,
)

logger = logging.getLogger(__name__)

RF_EXAMPLE_COUNT = 4
DC_EXAMPLE_COUNT = 3

RF_INPUT_MIN, RF_INPUT_MAX = 5, 20
RF_OUTPUT_MAX = 20
RF_ATTEMPT_CAP = 1000
_EXPR_TRIES = 25  # draws per program position before the attempt fails

DC_INT_MIN, DC_INT_MAX = -50, 50
DC_LIST_MIN, DC_LIST_MAX = 1, 5
DC_SECOND_INPUT_RATE = 0.5
DC_SECOND_LIST_RATE = 0.25
DC_BLOCK_SIZE = 64  # tasks sharing one input tuple and solution index
SPECIAL_SOLO_RATE = 0.25  # train tasks that are the special op alone

_DELIMS_NO_SPACE = rf_dsl.DELIMITERS.replace(" ", "")
_REGEX_POOL = rf_dsl.REGEX_CLASSES + tuple(rf_dsl.DELIMITERS)
_INDEX_POOL = tuple(i for i in range(-rf_dsl.INDEX_MAX, rf_dsl.INDEX_MAX + 1)
                    if i != 0)
# Positions beyond the input length cap can never address a character.
_POSITION_POOL = tuple(i for i in range(-RF_INPUT_MAX, RF_INPUT_MAX + 1)
                       if i != 0)

_SUBSTRING_CATS = rf_dsl.SUBSTRING_TYPES
_MODIFY_CATS = (rf_dsl.ConstStr,) + rf_dsl.MODIFICATION_TYPES
_PLAIN_CATS = _SUBSTRING_CATS + _MODIFY_CATS
_ALL_CATS = _PLAIN_CATS + (rf_dsl.Compose,)
_ANY_INNER = rf_dsl.MODIFICATION_TYPES + rf_dsl.SUBSTRING_TYPES


@dataclass(frozen=True)
class Task:
    domain: str
    split: str
    side: str
    seed: int
    spec: object  # IOSpecification with the full outputs still remaining
    solution: object


@dataclass(frozen=True)
class TraceStep:
    updated_spec: object  # specification after applying this step
    subgoals: tuple  # per-example value the subprogram produced
    subprogram: object


@dataclass(frozen=True)
class DecompositionTrace:
    steps: tuple


def solution_parts(domain, program):
    return (program.expressions if domain == RF
            else program.statements)


def derive_trace(spec0, program):
    """Execute a solution stepwise, recording the evolving specification."""
    parts = solution_parts(spec0.domain, program)
    steps = []
    spec = spec0
    solved = False
    for part in parts:
        try:
            results = execute_subprogram(spec, part)
            solved = is_solved(spec, results)
            spec = update_specification(spec, results)
        except (ExecError, InvalidUpdate) as exc:
            raise InconsistentSolution(
                f"solution step {len(steps) + 1} failed: {exc}") from exc
        steps.append(TraceStep(spec, tuple(results), part))
    if not solved:
        raise InconsistentSolution("solution does not complete the task")
    return DecompositionTrace(tuple(steps))


def decompose(task):
    return derive_trace(task.spec, task.solution)


# String-domain input sampling: mostly letters so substring operations have
# material to work with, and always at least one word token.

def _rf_char(rng):
    r = rng.random()
    if r < 0.6:
        return rng.choice(rf_dsl.LETTERS)
    if r < 0.8:
        return rng.choice(rf_dsl.DIGITS)
    if r < 0.9:
        return rng.choice(_DELIMS_NO_SPACE)
    return " "


def _rf_input(rng):
    while True:
        n = rng.randint(RF_INPUT_MIN, RF_INPUT_MAX)
        text = "".join(_rf_char(rng) for _ in range(n))
        if rf_dsl.matches("WORD", text):
            return text


def sample_rf_inputs(seed):
    rng = random.Random(f"rf-inputs/{seed}")
    return tuple(_rf_input(rng) for _ in range(RF_EXAMPLE_COUNT))


# String-domain expression sampling: uniform over categories, then uniform
# over each category's argument grammar.

def _rand_expr(rng, cat):
    if cat is rf_dsl.ConstStr:
        return rf_dsl.ConstStr(rng.choice(rf_dsl.CHARACTERS))
    if cat is rf_dsl.SubStr:
        return rf_dsl.SubStr(rng.choice(_POSITION_POOL),
                             rng.choice(_POSITION_POOL))
    if cat is rf_dsl.GetSpan:
        return rf_dsl.GetSpan(
            rng.choice(_REGEX_POOL), rng.choice(_INDEX_POOL),
            rng.choice(rf_dsl.BOUNDARIES),
            rng.choice(_REGEX_POOL), rng.choice(_INDEX_POOL),
            rng.choice(rf_dsl.BOUNDARIES))
    if cat in (rf_dsl.GetToken, rf_dsl.GetFirst, rf_dsl.Remove):
        return cat(rng.choice(_REGEX_POOL), rng.choice(_INDEX_POOL))
    if cat in (rf_dsl.GetUpto, rf_dsl.GetFrom, rf_dsl.GetAll,
               rf_dsl.RemoveAll):
        return cat(rng.choice(_REGEX_POOL))
    if cat is rf_dsl.ToCase:
        return rf_dsl.ToCase(rng.choice(rf_dsl.CASES))
    if cat is rf_dsl.Replace:
        return rf_dsl.Replace(rng.choice(rf_dsl.DELIMITERS),
                              rng.choice(rf_dsl.DELIMITERS))
    if cat is rf_dsl.Trim:
        return rf_dsl.Trim()
    if cat is rf_dsl.Substitute:
        return rf_dsl.Substitute(rng.choice(_REGEX_POOL),
                                 rng.choice(_INDEX_POOL),
                                 rng.choice(rf_dsl.CHARACTERS))
    if cat is rf_dsl.SubstituteAll:
        return rf_dsl.SubstituteAll(rng.choice(_REGEX_POOL),
                                    rng.choice(rf_dsl.CHARACTERS))
    raise ValueError(f"unknown expression category {cat!r}")


def _rand_slot_expr(rng, slot):
    cats, inner_cats = slot
    cat = rng.choice(cats)
    if cat is rf_dsl.Compose:
        outer = _rand_expr(rng, rng.choice(rf_dsl.MODIFICATION_TYPES))
        inner = _rand_expr(rng, rng.choice(inner_cats))
        return rf_dsl.Compose(outer, inner)
    return _rand_expr(rng, cat)


def _concept_cats(concept):
    return _SUBSTRING_CATS if concept == splits.S else _MODIFY_CATS


def _rf_plan(rng, split_spec, side, n, solo):
    """Per-position category pools shaped for the split and side."""
    split = split_spec.split
    if solo:
        return [((rf_dsl.Compose,), _ANY_INNER)]
    if split in ("NONE", "LENGTH"):
        return [(_ALL_CATS, _ANY_INNER)] * n
    if split == "CONCEPT_MIX":
        if side == splits.TRAIN:
            seq = (rng.choice((splits.S, splits.M)),) * n
        else:
            seq = tuple(rng.choice((splits.S, splits.M)) for _ in range(n))
            while len(set(seq)) < 2:
                seq = tuple(rng.choice((splits.S, splits.M))
                            for _ in range(n))
        return [(_concept_cats(c), ()) for c in seq]
    if split == "CONCEPT_ORDER":
        seq = split_spec.ordered_pattern(side, n)
        return [(_concept_cats(c), ()) for c in seq]
    if split == "NEW_OP":
        if side == splits.TRAIN:
            return [(_PLAIN_CATS, ())] * n
        slots = [[_ALL_CATS, _ANY_INNER] for _ in range(n)]
        slots[rng.randrange(n)][0] = (rf_dsl.Compose,)
        return [tuple(s) for s in slots]
    if split == "OP_FUNCTIONALITY":
        if side == splits.TRAIN:
            # compositions stay legal but may only wrap modifications
            return [(_ALL_CATS, rf_dsl.MODIFICATION_TYPES)] * n
        slots = [[_ALL_CATS, _ANY_INNER] for _ in range(n)]
        j = rng.randrange(n)
        slots[j] = [(rf_dsl.Compose,), _SUBSTRING_CATS]
        return [tuple(s) for s in slots]
    raise ValueError(f"unknown split {split!r}")


def _rf_assemble(rng, slots, inputs):
    """Fill a plan against concrete inputs, or None if a position starves.

    Every expression must produce non-empty output on every input (an empty
    prefix would make the concatenation decomposition ambiguous), and the
    accumulated outputs stay within the output length cap.
    """
    exprs = []
    totals = [""] * len(inputs)
    for slot in slots:
        for _ in range(_EXPR_TRIES):
            expr = _rand_slot_expr(rng, slot)
            try:
                outs = [rf_dsl.execute_expression(expr, t) for t in inputs]
            except ExecError:
                continue
            if any(not o for o in outs):
                continue
            if any(len(a) + len(o) > RF_OUTPUT_MAX
                   for a, o in zip(totals, outs)):
                continue
            exprs.append(expr)
            totals = [a + o for a, o in zip(totals, outs)]
            break
        else:
            return None
    return exprs, totals


def sample_rf_task(seed, split_id, side):
    split_spec = splits.get_split(split_id, RF)
    predicate = splits.side_predicate(split_spec, side)
    rng = random.Random(f"rf-task/{split_id}/{side}/{seed}")
    # The length and the special-op-alone choice are drawn once per task:
    # re-rolling them on every rejected attempt would skew both toward
    # whatever assembles most easily.
    n = rng.choice(split_spec.lengths(side))
    solo = (split_id == "NEW_OP" and side == splits.TRAIN
            and rng.random() < SPECIAL_SOLO_RATE)
    for _ in range(RF_ATTEMPT_CAP):
        inputs = tuple(_rf_input(rng) for _ in range(RF_EXAMPLE_COUNT))
        slots = _rf_plan(rng, split_spec, side, n, solo)
        built = _rf_assemble(rng, slots, inputs)
        if built is None:
            continue
        exprs, outputs = built
        program = rf_dsl.RfProgram(tuple(exprs))
        if not predicate(split_spec, program):
            continue
        spec0 = make_rf_spec(list(zip(inputs, outputs)))
        return Task(RF, split_id, side, seed, spec0, program)
    raise GenerationTimeout(
        f"no {split_id}/{side} string task for seed {seed} "
        f"within {RF_ATTEMPT_CAP} attempts")


# List-domain construction. One input tuple is shared by a whole block of
# seeds so the enumeration cost amortizes across tasks.

def _dc_value(rng, sort):
    if sort == "list":
        return [rng.randint(DC_INT_MIN, DC_INT_MAX)
                for _ in range(rng.randint(DC_LIST_MIN, DC_LIST_MAX))]
    return rng.randint(DC_INT_MIN, DC_INT_MAX)


def sample_dc_inputs(seed):
    """Input names and per-example rows: a list, possibly plus a second
    list or integer, with every element drawn from the value range."""
    rng = random.Random(f"dc-inputs/{seed}")
    sorts = ["list"]
    if rng.random() < DC_SECOND_INPUT_RATE:
        sorts.append("list" if rng.random() < DC_SECOND_LIST_RATE else "int")
    names = dc_dsl.VARIABLE_POOL[:len(sorts)]
    rows = [[_dc_value(rng, s) for s in sorts]
            for _ in range(DC_EXAMPLE_COUNT)]
    return names, rows


@functools.lru_cache(maxsize=1)
def _dc_block(split_id, block):
    names, rows = sample_dc_inputs(f"{split_id}/{block}")
    return names, rows, dc_enum.build_index(split_id, names, rows)


@functools.lru_cache(maxsize=1)
def _dc_block_reachable(split_id, block):
    names, rows = sample_dc_inputs(f"{split_id}/{block}")
    split_spec = splits.get_split(split_id, DC)
    return dc_enum.train_reachable(split_id, names, rows,
                                   split_spec.train_lengths.stop - 1)


def _copy_rows(rows):
    return [[list(v) if isinstance(v, list) else v for v in row]
            for row in rows]


def build_dc_task(seed, split_id, side):
    names, rows, index = _dc_block(split_id, seed // DC_BLOCK_SIZE)
    rng = random.Random(f"dc-select/{split_id}/{side}/{seed}")
    # Stratify by length first: signature counts grow steeply with length,
    # so a flat draw over signatures would yield almost no short programs.
    by_len = {}
    for v in index.eligible(side):
        by_len.setdefault(index.min_len(v), []).append(v)
    if split_id == "NEW_OP" and side == splits.TRAIN and len(by_len) > 1:
        solo = by_len.pop(1, None)  # length-1 pool is the special op alone
        if solo and rng.random() < SPECIAL_SOLO_RATE:
            by_len = {1: solo}
    if not by_len:
        raise GenerationTimeout(
            f"no {split_id}/{side} signatures on block inputs "
            f"for seed {seed}")
    vid = rng.choice(by_len[rng.choice(sorted(by_len))])
    spec0 = make_dc_spec(names, _copy_rows(rows), index.outputs(vid))
    return Task(DC, split_id, side, seed, spec0,
                index.minimal_program(vid, side))


def generate_task(domain, split_id, side, seed):
    if domain == RF:
        return sample_rf_task(seed, split_id, side)
    return build_dc_task(seed, split_id, side)


def build_dataset(domain, split_id, side, count, seed_start=0):
    """Tasks for consecutive seeds; seeds that time out are skipped."""
    tasks = []
    seed = seed_start
    while len(tasks) < count:
        if seed - seed_start >= 10 * count + 100:
            raise GenerationTimeout(
                f"{domain}/{split_id}/{side}: too many seeds skipped")
        try:
            tasks.append(generate_task(domain, split_id, side, seed))
        except GenerationTimeout as exc:
            logger.warning("skipping seed %d: %s", seed, exc)
        seed += 1
    return tasks


# Dataset files: one task per JSON line, values in DSL surface syntax.

def _value_out(domain, value):
    return value if domain == RF else dc_dsl.value_to_str(value)


def _value_in(domain, text):
    return text if domain == RF else dc_dsl.value_from_str(text)


def _serialize_program(domain, program):
    return (rf_dsl.serialize(program) if domain == RF
            else dc_dsl.serialize(program))


def _parse_program(domain, text):
    return rf_dsl.parse(text) if domain == RF else dc_dsl.parse(text)


def task_record(task):
    domain = task.domain
    trace = decompose(task)
    examples = [
        {"inputs": [_value_out(domain, v) for v in ex.inputs],
         "output": _value_out(domain, ex.remaining_output)}
        for ex in task.spec.examples
    ]
    return {
        "domain": domain,
        "split": task.split,
        "side": task.side,
        "seed": task.seed,
        "examples": examples,
        "program": _serialize_program(domain, task.solution),
        "trace": [
            {"subgoals": [_value_out(domain, v) for v in step.subgoals],
             "subprogram": subprogram_text(domain, step.subprogram)}
            for step in trace.steps
        ],
    }


def record_to_task(record):
    domain = record["domain"]
    solution = _parse_program(domain, record["program"])
    examples = record["examples"]
    if domain == RF:
        spec0 = make_rf_spec([(ex["inputs"][0], ex["output"])
                              for ex in examples])
    else:
        rows = [[_value_in(DC, t) for t in ex["inputs"]] for ex in examples]
        outs = [_value_in(DC, ex["output"]) for ex in examples]
        spec0 = make_dc_spec(solution.inputs, rows, outs)
    return Task(domain, record["split"], record["side"], record["seed"],
                spec0, solution)


def write_tasks(path, tasks):
    records = [task_record(t) for t in sorted(tasks, key=lambda t: t.seed)]
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def read_tasks(path):
    with open(path, encoding="utf-8") as fh:
        return [record_to_task(json.loads(line))
                for line in fh if line.strip()]


# Invariant checks, shared by the generator tests and `--verify`.

def _freeze_value(value):
    return tuple(value) if isinstance(value, list) else value


def verify_task(task, recheck_minimal=True):
    """Re-check every construction invariant; raises ValueError on failure.

    For list-domain test tasks this includes the expensive re-enumeration
    confirming no training-distribution program of up to the solution's
    length reaches the same outputs.
    """
    split_spec = splits.get_split(task.split, task.domain)
    examples = task.spec.examples

    def need(cond, what):
        if not cond:
            raise ValueError(
                f"{task.domain}/{task.split}/{task.side} seed {task.seed}: "
                f"{what}")

    if task.domain == RF:
        need(len(examples) == RF_EXAMPLE_COUNT, "wrong example count")
        for ex in examples:
            need(1 <= len(ex.inputs[0]) <= RF_INPUT_MAX, "input length")
            need(1 <= len(ex.remaining_output) <= RF_OUTPUT_MAX,
                 "output length")
        need(rf_dsl.validate_program(task.solution), "malformed solution")
    else:
        need(len(examples) == DC_EXAMPLE_COUNT, "wrong example count")
        need(1 <= len(task.solution.inputs) <= 2, "input arity")
        for ex in examples:
            for value in ex.inputs:
                if isinstance(value, list):
                    need(DC_LIST_MIN <= len(value) <= DC_LIST_MAX,
                         "input list length")
                for x in (value if isinstance(value, list) else [value]):
                    need(DC_INT_MIN <= x <= DC_INT_MAX, "input value range")
    need(verify_program(task.domain, task.solution, task.spec),
         "solution does not map inputs to outputs")
    predicate = splits.side_predicate(split_spec, task.side)
    need(predicate(split_spec, task.solution), "side predicate fails")
    trace = decompose(task)  # raises InconsistentSolution on bad steps
    if task.domain == RF:
        for step in trace.steps:
            need(all(s for s in step.subgoals), "empty step output")
    if (recheck_minimal and task.domain == DC and task.side == splits.TEST
            and task.split != "NONE"):
        reachable = _dc_block_reachable(task.split,
                                        task.seed // DC_BLOCK_SIZE)
        sig = tuple(_freeze_value(ex.remaining_output) for ex in examples)
        n = len(task.solution.statements)
        need(reachable.get(sig, n + 1) > n,
             "a training-distribution program of minimal length exists")
    return True

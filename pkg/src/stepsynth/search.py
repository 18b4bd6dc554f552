"""Step-by-step synthesis as one long beam search over decomposition steps.

Each beam candidate is a partial rollout: a sequence of (subgoal, subprogram)
steps together with the specification that remains after executing them. A
round extends every active candidate by one step, in two stages (subgoal
proposals, then subprogram proposals conditioned on those subgoals) or in a
single combined stage for the no-subgoal variant.

A candidate's score is the sum of its proposal log-probabilities; candidates
that fail a validity condition (unparseable proposal, failed execution, a
string result that is not a prefix of the remaining output, a list result
duplicating an existing binding, or a functional duplicate of a
higher-scoring candidate) are discarded rather than carried at minus
infinity. Solved candidates freeze and keep competing for beam slots by
score until the search returns.
"""

import dataclasses
import logging
from dataclasses import dataclass

from . import dc_dsl, rf_dsl
from .errors import ExecError, InvalidUpdate, NoSolution, ParseError

logger = logging.getLogger(__name__)

RF, DC = "rf", "dc"

SUBGOAL, SYNTHESIZER, COMBINED = "subgoal", "synthesizer", "combined"

DEFAULT_MAX_STEPS = {RF: 10, DC: 5}


@dataclass(frozen=True)
class Example:
    """One I/O example's live view during synthesis.

    inputs never change. For string tasks remaining_output shrinks as
    prefixes are synthesized and bindings stays empty; for list tasks
    remaining_output is the fixed target and bindings grows one variable
    per step (inputs included, in order).
    """
    inputs: tuple
    remaining_output: object
    bindings: tuple = ()


@dataclass(frozen=True)
class IOSpecification:
    domain: str
    examples: tuple


def make_rf_spec(pairs):
    """Specification from (input string, output string) pairs."""
    return IOSpecification(RF, tuple(
        Example((i,), o) for i, o in pairs))


def make_dc_spec(input_names, input_rows, outputs):
    """Specification from per-example input value rows and target outputs."""
    examples = []
    for values, output in zip(input_rows, outputs):
        values = tuple(values)
        examples.append(Example(values, output,
                                tuple(zip(input_names, values))))
    return IOSpecification(DC, tuple(examples))


def bound_names(spec):
    return tuple(name for name, _ in spec.examples[0].bindings)


def next_variable(spec):
    used = set(bound_names(spec))
    for name in dc_dsl.VARIABLE_POOL:
        if name not in used:
            return name
    return None


def update_specification(spec, results):
    """Fold one step's per-example execution results into the spec.

    String domain: each result must be a prefix of that example's remaining
    output and is removed from it. List domain: each result is bound to the
    next canonical variable. Raises InvalidUpdate otherwise.
    """
    if spec.domain == RF:
        examples = []
        for i, (ex, res) in enumerate(zip(spec.examples, results)):
            if not ex.remaining_output.startswith(res):
                raise InvalidUpdate(
                    f"result {res!r} is not a prefix of "
                    f"{ex.remaining_output!r}", i)
            examples.append(dataclasses.replace(
                ex, remaining_output=ex.remaining_output[len(res):]))
        return IOSpecification(RF, tuple(examples))
    name = next_variable(spec)
    if name is None:
        raise InvalidUpdate("variable pool exhausted")
    examples = []
    for i, (ex, res) in enumerate(zip(spec.examples, results)):
        if not dc_dsl.validate_value(res):
            raise InvalidUpdate(f"result out of range: {res!r}", i)
        examples.append(dataclasses.replace(
            ex, bindings=ex.bindings + ((name, res),)))
    return IOSpecification(DC, tuple(examples))


def combine_program_parts(domain, parts, input_names=()):
    """Assemble executed subprograms into one whole program."""
    if domain == RF:
        return rf_dsl.RfProgram(tuple(parts))
    return dc_dsl.DcProgram(tuple(input_names), tuple(parts))


def execute_subprogram(spec, subprogram):
    """Per-example results of one subprogram; raises ExecError on failure."""
    if spec.domain == RF:
        return [rf_dsl.execute_expression(subprogram, ex.inputs[0])
                for ex in spec.examples]
    results = []
    for ex in spec.examples:
        extended = dc_dsl.execute_statement(subprogram, ex.bindings)
        results.append(extended[-1][1])
    return results


def is_solved(spec, results):
    return all(res == ex.remaining_output
               for ex, res in zip(spec.examples, results))


def functional_signature(spec):
    """Hashable summary of everything executed so far, per example.

    Two candidates with equal signatures behave identically on the spec:
    string candidates have produced the same prefixes (equivalently, the
    same remainders), list candidates have bound the same values in the
    same order.
    """
    if spec.domain == RF:
        return tuple(ex.remaining_output for ex in spec.examples)
    return tuple(";".join(dc_dsl.value_to_str(v) for _, v in ex.bindings)
                 for ex in spec.examples)


def encode_subgoals(domain, values):
    """Render per-example subgoal values as one newline-joined text."""
    if domain == RF:
        return "\n".join(values)
    return "\n".join(dc_dsl.value_to_str(v) for v in values)


def decode_subgoals(domain, text, n_examples):
    parts = text.split("\n")
    if len(parts) != n_examples:
        raise ParseError(
            f"expected {n_examples} subgoal values, got {len(parts)}")
    if domain == RF:
        return parts
    return [dc_dsl.value_from_str(p) for p in parts]


def with_subgoals(spec, values):
    """The synthesizer's view: subgoals stand in for the remaining outputs."""
    examples = tuple(dataclasses.replace(ex, remaining_output=v)
                     for ex, v in zip(spec.examples, values))
    return IOSpecification(spec.domain, examples)


def parse_subprogram(spec, text):
    """Parse one proposal into an executable subprogram for this spec."""
    if spec.domain == RF:
        return rf_dsl.parse_expression(text)
    target = next_variable(spec)
    if target is None:
        raise ParseError("variable pool exhausted")
    return dc_dsl.parse_rhs(text, target=target)


def subprogram_text(domain, subprogram):
    if domain == RF:
        return rf_dsl.serialize_expression(subprogram)
    return dc_dsl.serialize_rhs(subprogram.operation, subprogram.lam,
                                subprogram.args)


def verify_program(domain, program, spec0):
    """Ground-truth check: the whole program maps inputs to outputs."""
    try:
        for ex in spec0.examples:
            if domain == RF:
                got = rf_dsl.execute(program, ex.inputs[0])
            else:
                got = dc_dsl.execute(program, list(ex.inputs))
            if got != ex.remaining_output:
                return False
    except ExecError:
        return False
    return True


@dataclass(frozen=True)
class Proposal:
    text: str
    logp: float


@dataclass(frozen=True)
class StepRecord:
    subgoals: tuple | None  # per-example values; None in no-subgoal mode
    subgoal_logp: float
    subprogram: object
    subprogram_text: str
    subprogram_logp: float


@dataclass(frozen=True)
class BeamCandidate:
    steps: tuple
    score: float
    spec: IOSpecification  # specification after all steps so far
    solved: bool
    order: int  # insertion counter; earlier wins score ties

    @property
    def signature(self):
        return functional_signature(self.spec)


@dataclass(frozen=True)
class SolvedProgram:
    program: object
    score: float
    n_steps: int


@dataclass
class SearchConfig:
    beam_size: int = 1
    max_steps: int | None = None  # None: domain default
    dedup: bool = True
    observer: object = None  # called with (round_index, beam) per round

    def resolved_max_steps(self, domain):
        return self.max_steps if self.max_steps else DEFAULT_MAX_STEPS[domain]


def _clean_proposals(backend, spec, k):
    out = []
    for prop in backend.propose(spec, k)[:k]:
        if prop.logp > 0:
            logger.warning("dropping proposal with positive logp: %r",
                           prop.text)
            continue
        out.append(prop)
    return out


def _prune(candidates, beam_size, dedup):
    """Top beam_size by score, stable on insertion order; among unsolved
    candidates, only the best-scoring of each functional signature survives.
    """
    ranked = sorted(candidates, key=lambda c: (-c.score, c.order))
    kept = []
    seen = set()
    for cand in ranked:
        if dedup and not cand.solved:
            sig = cand.signature
            if sig in seen:
                continue
            seen.add(sig)
        kept.append(cand)
        if len(kept) == beam_size:
            break
    return kept


def _extend(cand, subgoals, subgoal_logp, proposal, spec0, order):
    """Build the candidate extending `cand` by one step, or None if invalid."""
    try:
        subprogram = parse_subprogram(cand.spec, proposal.text)
    except ParseError:
        return None
    try:
        results = execute_subprogram(cand.spec, subprogram)
    except ExecError:
        return None
    solved = is_solved(cand.spec, results)
    if cand.spec.domain == DC and not solved:
        # A result equal to an existing binding on every example is a
        # no-op step: anything after it could reference the old variable.
        for i, (name, _) in enumerate(cand.spec.examples[0].bindings):
            if all(ex.bindings[i][1] == res
                   for ex, res in zip(cand.spec.examples, results)):
                return None
    try:
        new_spec = update_specification(cand.spec, results)
    except InvalidUpdate:
        return None
    step = StepRecord(
        subgoals=tuple(subgoals) if subgoals is not None else None,
        subgoal_logp=subgoal_logp,
        subprogram=subprogram,
        subprogram_text=subprogram_text(cand.spec.domain, subprogram),
        subprogram_logp=proposal.logp,
    )
    return BeamCandidate(
        steps=cand.steps + (step,),
        score=cand.score + subgoal_logp + proposal.logp,
        spec=new_spec,
        solved=solved,
        order=order,
    )


def _run_beam(spec0, config, expand_stage):
    """The shared loop: expand_stage maps actives to extension candidates."""
    domain = spec0.domain
    max_steps = config.resolved_max_steps(domain)
    beam = [BeamCandidate((), 0.0, spec0, False, 0)]
    counter = 1
    for round_index in range(max_steps):
        actives = [c for c in beam if not c.solved]
        if not actives:
            break
        frozen = [c for c in beam if c.solved]
        extensions, counter = expand_stage(actives, counter)
        beam = _prune(frozen + extensions, config.beam_size, config.dedup)
        if config.observer is not None:
            config.observer(round_index, beam)
    input_names = bound_names(spec0) if domain == DC else ()
    out = []
    for cand in sorted((c for c in beam if c.solved),
                       key=lambda c: (-c.score, c.order)):
        program = combine_program_parts(
            domain, [s.subprogram for s in cand.steps], input_names)
        if not verify_program(domain, program, spec0):
            logger.warning("discarding unsound solved candidate %r", program)
            continue
        out.append(SolvedProgram(program, cand.score, len(cand.steps)))
    if not out:
        raise NoSolution(
            f"no solution within {max_steps} steps at beam "
            f"{config.beam_size}")
    return out


def exedec_search(spec0, subgoal_backend, synthesizer_backend, config):
    """Two-stage decomposition search: subgoals first, then subprograms.

    Returns solved programs ranked by score; raises NoSolution otherwise.
    """
    if getattr(subgoal_backend, "role", SUBGOAL) != SUBGOAL:
        raise ValueError("subgoal_backend must have the subgoal role")
    if getattr(synthesizer_backend, "role", SYNTHESIZER) != SYNTHESIZER:
        raise ValueError("synthesizer_backend must have the synthesizer role")
    domain = spec0.domain
    k = config.beam_size

    def expand(actives, counter):
        staged = []
        for cand in actives:
            n = len(cand.spec.examples)
            for prop in _clean_proposals(subgoal_backend, cand.spec, k):
                try:
                    values = decode_subgoals(domain, prop.text, n)
                except ParseError:
                    continue
                staged.append((cand.score + prop.logp, counter, cand,
                               values, prop.logp))
                counter += 1
        staged.sort(key=lambda t: (-t[0], t[1]))
        staged = staged[:config.beam_size]
        extensions = []
        for _, _, cand, values, sg_logp in staged:
            synth_spec = with_subgoals(cand.spec, values)
            for prop in _clean_proposals(synthesizer_backend, synth_spec, k):
                ext = _extend(cand, values, sg_logp, prop, spec0, counter)
                counter += 1
                if ext is not None:
                    extensions.append(ext)
        return extensions, counter

    return _run_beam(spec0, config, expand)


def nosubgoal_search(spec0, combined_backend, config):
    """Single-stage variant: one model proposes subprograms directly."""
    if getattr(combined_backend, "role", COMBINED) != COMBINED:
        raise ValueError("combined_backend must have the combined role")
    k = config.beam_size

    def expand(actives, counter):
        extensions = []
        for cand in actives:
            for prop in _clean_proposals(combined_backend, cand.spec, k):
                ext = _extend(cand, None, 0.0, prop, spec0, counter)
                counter += 1
                if ext is not None:
                    extensions.append(ext)
        return extensions, counter

    return _run_beam(spec0, config, expand)

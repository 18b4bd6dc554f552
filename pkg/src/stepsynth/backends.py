"""Proposal backends: oracle replay, enumerative synthesis, a seeded random
stub, and a client for remote models speaking the wire protocol.

The search treats every backend uniformly: propose(spec, k) returns scored
proposals with non-positive log-probabilities, and a backend that cannot
help returns an empty list rather than raising. All backends here are pure
functions of the spec (given fixed seeds and budgets), so repeated searches
over the same task reproduce bit-identical beams.
"""

import dataclasses
import itertools
import logging
import random

from . import dc_dsl, protocol, rf_dsl
from .errors import BudgetExceeded, ExecError, ProtocolError
from .search import (
    IOSpecification, Proposal, encode_subgoals, subprogram_text,
    with_subgoals)

logger = logging.getLogger(__name__)

RF, DC = "rf", "dc"
ROLES = ("subgoal", "synthesizer", "combined")

# Work units one enumeration may spend before giving up; generous for the
# bounded grammars here, a tripwire for pathological specs.
DEFAULT_BUDGET = 5_000_000


def _freeze(value):
    return tuple(value) if isinstance(value, list) else value


def spec_fingerprint(spec):
    """Hashable identity of a spec: domain plus every example's full state."""
    return (spec.domain, tuple(
        (tuple(_freeze(v) for v in ex.inputs),
         _freeze(ex.remaining_output),
         tuple((name, _freeze(v)) for name, v in ex.bindings))
        for ex in spec.examples))


def _check_role(role):
    if role not in ROLES:
        raise ValueError(f"unknown backend role: {role!r}")


def _initial_spec(trace):
    # The spec the first step was proposed against, reconstructed by undoing
    # that step's update: re-prepend the produced prefixes (strings) or drop
    # the freshly bound variable (lists).
    step = trace.steps[0]
    after = step.updated_spec
    if after.domain == RF:
        examples = tuple(
            dataclasses.replace(ex, remaining_output=v + ex.remaining_output)
            for ex, v in zip(after.examples, step.subgoals))
    else:
        examples = tuple(dataclasses.replace(ex, bindings=ex.bindings[:-1])
                         for ex in after.examples)
    return IOSpecification(after.domain, examples)


class OracleBackend:
    """Replays a recorded decomposition as the single ground-truth proposal.

    The table is keyed by how the spec looks right before each step (for the
    synthesizer role, with that step's subgoals substituted in), so a search
    that stays on the recorded path is fed the exact next move at
    log-probability 0 and anything off the path gets nothing.
    """

    def __init__(self, trace, role):
        _check_role(role)
        self.role = role
        self._table = {}
        pre = _initial_spec(trace)
        for step in trace.steps:
            domain = pre.domain
            if role == "subgoal":
                key = spec_fingerprint(pre)
                text = encode_subgoals(domain, step.subgoals)
            elif role == "synthesizer":
                key = spec_fingerprint(with_subgoals(pre, step.subgoals))
                text = subprogram_text(domain, step.subprogram)
            else:
                key = spec_fingerprint(pre)
                text = subprogram_text(domain, step.subprogram)
            self._table.setdefault(key, text)
            pre = step.updated_spec

    def propose(self, spec, k):
        text = self._table.get(spec_fingerprint(spec))
        if text is None or k < 1:
            return []
        return [Proposal(text, 0.0)]


class _Meter:
    __slots__ = ("left",)

    def __init__(self, budget):
        self.left = budget

    def spend(self, n=1):
        self.left -= n
        if self.left < 0:
            raise BudgetExceeded("enumeration budget exhausted")


# ---------------------------------------------------------------------------
# Enumerative synthesizer.

_RF_REGEXES = rf_dsl.REGEX_CLASSES + tuple(rf_dsl.DELIMITERS)
_RF_INDICES = tuple(range(1, rf_dsl.INDEX_MAX + 1)) \
    + tuple(range(-1, -rf_dsl.INDEX_MAX - 1, -1))
# Inputs are at most 20 characters, so positions beyond +-21 never denote
# anything a smaller position cannot.
_RF_POSITIONS = tuple(k for k in range(-21, 22) if k != 0)

_RF_CATEGORY_RANK = {cls: rank for rank, cls in enumerate(
    (rf_dsl.ConstStr,) + rf_dsl.SUBSTRING_TYPES + rf_dsl.MODIFICATION_TYPES
    + (rf_dsl.Compose,))}


def _rank_key(expr):
    text = rf_dsl.serialize_expression(expr)
    return (_RF_CATEGORY_RANK[type(expr)], len(text), text)


def _nth_rows(per_example_spans, i):
    """The i-th span in every example, or None where any example lacks it."""
    rows = []
    for spans in per_example_spans:
        if i > 0 and i <= len(spans):
            rows.append(spans[i - 1])
        elif i < 0 and -i <= len(spans):
            rows.append(spans[i])
        else:
            return None
    return rows


def _consider_getspan(spans, texts, targets, found, pool, meter):
    # Anchor positions per (regex, index, boundary), shared between the
    # match scan and the pool scan.
    ends = []
    for r in _RF_REGEXES:
        for i in _RF_INDICES:
            rows = _nth_rows(spans[r], i)
            if rows is None:
                continue
            for b in rf_dsl.BOUNDARIES:
                pos = tuple(row[0] if b == "START" else row[1] for row in rows)
                ends.append(((r, i, b), pos))
    # Matches: the first example pins the right anchor to p1 + len(target),
    # which turns the quadratic argument grid into a dictionary lookup.
    by_first = {}
    for args, pos in ends:
        by_first.setdefault(pos[0], []).append((args, pos))
    want = len(targets[0])
    for (r1, i1, b1), p1 in ends:
        for (r2, i2, b2), p2 in by_first.get(p1[0] + want, ()):
            meter.spend()
            if all(a < b and t[a:b] == g
                   for a, b, t, g in zip(p1, p2, texts, targets)):
                found.append(rf_dsl.GetSpan(r1, i1, b1, r2, i2, b2))
    # Pool: distinct position vectors only; every argument choice with the
    # same anchor positions produces the same output everywhere.
    firsts = {}
    for args, pos in ends:
        firsts.setdefault(pos, args)
    for p1, (r1, i1, b1) in firsts.items():
        for p2, (r2, i2, b2) in firsts.items():
            meter.spend()
            if all(a < b for a, b in zip(p1, p2)):
                vec = tuple(t[a:b] for t, a, b in zip(texts, p1, p2))
                if vec not in pool:
                    pool[vec] = rf_dsl.GetSpan(r1, i1, b1, r2, i2, b2)


def _consider_substitute(spans, texts, targets, found, pool, meter):
    for r in _RF_REGEXES:
        for i in _RF_INDICES:
            rows = _nth_rows(spans[r], i)
            if rows is None:
                continue
            for c in rf_dsl.CHARACTERS:
                meter.spend()
                vec = tuple(t[:s] + c + t[e:]
                            for t, (s, e) in zip(texts, rows))
                if vec == targets:
                    found.append(rf_dsl.Substitute(r, i, c))
                if vec not in pool:
                    pool[vec] = rf_dsl.Substitute(r, i, c)


def _indexable(spans):
    m = min(len(spans), rf_dsl.INDEX_MAX)
    for i in range(1, m + 1):
        yield i, spans[i - 1]
    for i in range(1, m + 1):
        yield -i, spans[len(spans) - i]


def _invert_outer(s, g, spans_of, meter):
    """All modification expressions mapping string s to string g.

    Each family is inverted rather than enumerated: the argument values that
    could work are computed from (s, g) and checked, so the cost per string
    stays near the number of families instead of the argument grid size.
    """
    out = []
    meter.spend(4)
    for case in rf_dsl.CASES:
        if rf_dsl.execute_expression(rf_dsl.ToCase(case), s) == g:
            out.append(rf_dsl.ToCase(case))
    if len(s) == len(g):
        diffs = [j for j, (a, b) in enumerate(zip(s, g)) if a != b]
        if diffs:
            d1, d2 = s[diffs[0]], g[diffs[0]]
            if (d1 in rf_dsl.DELIMITERS and d2 in rf_dsl.DELIMITERS
                    and s.replace(d1, d2) == g):
                out.append(rf_dsl.Replace(d1, d2))
        else:
            # s == g: any replacement that never fires, or fires in place.
            meter.spend(len(rf_dsl.DELIMITERS) ** 2)
            for d1 in rf_dsl.DELIMITERS:
                absent = d1 not in s
                for d2 in rf_dsl.DELIMITERS:
                    if absent or d1 == d2:
                        out.append(rf_dsl.Replace(d1, d2))
    if s.strip(" ") == g:
        out.append(rf_dsl.Trim())
    for r in _RF_REGEXES:
        spans = spans_of(r, s)
        meter.spend(8 + 2 * min(len(spans), rf_dsl.INDEX_MAX))
        acc = ""
        for j in range(1, min(len(spans), rf_dsl.INDEX_MAX) + 1):
            acc += s[spans[j - 1][0]:spans[j - 1][1]]
            if acc == g:
                out.append(rf_dsl.GetFirst(r, j))
        if "".join(s[a:b] for a, b in spans) == g:
            out.append(rf_dsl.GetAll(r))
        for i, (a, b) in _indexable(spans):
            if (len(g) == len(s) - (b - a) + 1 and g[:a] == s[:a]
                    and g[a + 1:] == s[b:] and g[a] in rf_dsl.CHARACTERS):
                out.append(rf_dsl.Substitute(r, i, g[a]))
            if (len(g) == len(s) - (b - a) and g[:a] == s[:a]
                    and g[a:] == s[b:]):
                out.append(rf_dsl.Remove(r, i))
        if spans:
            if len(g) == len(s) - sum(b - a for a, b in spans) + len(spans):
                pos = spans[0][0]
                if pos < len(g) and g[pos] in rf_dsl.CHARACTERS:
                    c = g[pos]
                    expr = rf_dsl.SubstituteAll(r, c)
                    if rf_dsl.execute_expression(expr, s) == g:
                        out.append(expr)
            last = 0
            parts = []
            for a, b in spans:
                parts.append(s[last:a])
                last = b
            parts.append(s[last:])
            if "".join(parts) == g:
                out.append(rf_dsl.RemoveAll(r))
        elif s == g:
            # No match anywhere: removal is the identity, and so is
            # substitution regardless of the replacement character.
            meter.spend(len(rf_dsl.CHARACTERS))
            out.append(rf_dsl.RemoveAll(r))
            for c in rf_dsl.CHARACTERS:
                out.append(rf_dsl.SubstituteAll(r, c))
    return out


def _compose_matches(texts, targets, pool, meter):
    """Second stage: Compose(outer modification, stage-one inner).

    Outer candidates are inverted against the first example and verified on
    the rest. Any inner whose output vector matches the ground truth's is
    observationally equal on this spec, so keeping one representative per
    vector loses nothing.
    """
    cache = {}

    def spans_of(r, s):
        key = (r, s)
        if key not in cache:
            cache[key] = rf_dsl.matches(r, s)
        return cache[key]

    found = []
    g0 = targets[0]
    for vec, inner in pool.items():
        for outer in _invert_outer(vec[0], g0, spans_of, meter):
            meter.spend()
            ok = True
            for s, g in zip(vec[1:], targets[1:]):
                try:
                    if rf_dsl.execute_expression(outer, s) != g:
                        ok = False
                        break
                except ExecError:
                    ok = False
                    break
            if ok:
                found.append(rf_dsl.Compose(outer, inner))
    return found


def _rf_enumerate(spec, k, budget):
    meter = _Meter(budget)
    texts = [ex.inputs[0] for ex in spec.examples]
    targets = tuple(ex.remaining_output for ex in spec.examples)
    found = []
    pool = {}  # output vector -> first inner expression producing it
    spans = {r: [rf_dsl.matches(r, t) for t in texts] for r in _RF_REGEXES}

    def consider(expr):
        meter.spend()
        vec = []
        for t in texts:
            try:
                vec.append(rf_dsl.execute_expression(expr, t))
            except ExecError:
                return
        vec = tuple(vec)
        if vec == targets:
            found.append(expr)
        if not isinstance(expr, rf_dsl.ConstStr) and vec not in pool:
            pool[vec] = expr

    def scan_const():
        for c in rf_dsl.CHARACTERS:
            consider(rf_dsl.ConstStr(c))

    def scan_substr():
        for k1 in _RF_POSITIONS:
            for k2 in _RF_POSITIONS:
                consider(rf_dsl.SubStr(k1, k2))

    def scan_getspan():
        _consider_getspan(spans, texts, targets, found, pool, meter)

    def scan_gettoken():
        for r in _RF_REGEXES:
            for i in _RF_INDICES:
                consider(rf_dsl.GetToken(r, i))

    def scan_getupto():
        for r in _RF_REGEXES:
            consider(rf_dsl.GetUpto(r))

    def scan_getfrom():
        for r in _RF_REGEXES:
            consider(rf_dsl.GetFrom(r))

    def scan_tocase():
        for case in rf_dsl.CASES:
            consider(rf_dsl.ToCase(case))

    def scan_replace():
        for d1 in rf_dsl.DELIMITERS:
            for d2 in rf_dsl.DELIMITERS:
                consider(rf_dsl.Replace(d1, d2))

    def scan_trim():
        consider(rf_dsl.Trim())

    def scan_getfirst():
        for r in _RF_REGEXES:
            for i in range(1, rf_dsl.INDEX_MAX + 1):
                consider(rf_dsl.GetFirst(r, i))

    def scan_getall():
        for r in _RF_REGEXES:
            consider(rf_dsl.GetAll(r))

    def scan_substitute():
        _consider_substitute(spans, texts, targets, found, pool, meter)

    def scan_substituteall():
        for r in _RF_REGEXES:
            for c in rf_dsl.CHARACTERS:
                consider(rf_dsl.SubstituteAll(r, c))

    def scan_remove():
        for r in _RF_REGEXES:
            for i in _RF_INDICES:
                consider(rf_dsl.Remove(r, i))

    def scan_removeall():
        for r in _RF_REGEXES:
            consider(rf_dsl.RemoveAll(r))

    # Scanned in rank order; once k matches exist, everything a later
    # category could add would rank below what is already in hand.
    scans = (scan_const, scan_substr, scan_getspan, scan_gettoken,
             scan_getupto, scan_getfrom, scan_tocase, scan_replace,
             scan_trim, scan_getfirst, scan_getall, scan_substitute,
             scan_substituteall, scan_remove, scan_removeall)
    for scan in scans:
        scan()
        if len(found) >= k:
            break
    ranked = sorted(found, key=_rank_key)
    if len(ranked) < k:
        # Compose sorts after every single-expression category, so it only
        # runs when the simple matches cannot fill the request; by the same
        # token the early break above never skips it while it could matter.
        composed = _compose_matches(texts, targets, pool, meter)
        ranked += sorted(composed, key=_rank_key)
    return [rf_dsl.serialize_expression(e) for e in ranked[:k]]


def _dc_enumerate(spec, k, budget):
    meter = _Meter(budget)
    targets = [ex.remaining_output for ex in spec.examples]
    names = [name for name, _ in spec.examples[0].bindings]
    columns = [[ex.bindings[j][1] for ex in spec.examples]
               for j in range(len(names))]
    int_vars = [j for j in range(len(names))
                if isinstance(columns[j][0], int)]
    list_vars = [j for j in range(len(names))
                 if not isinstance(columns[j][0], int)]
    out = []
    for op in dc_dsl.OPERATIONS:
        pools = [int_vars if sort == dc_dsl.INT else list_vars
                 for sort in op.operand_sorts]
        if op.lambda_kind:
            lams = [l.token for l in dc_dsl.LAMBDAS
                    if l.kind == op.lambda_kind]
        else:
            lams = [None]
        for combo in itertools.product(*pools):
            for lam in lams:
                meter.spend()
                ok = True
                for row in range(len(targets)):
                    args = tuple(columns[j][row] for j in combo)
                    try:
                        if dc_dsl.execute_rhs(op.token, lam, args) != targets[row]:
                            ok = False
                            break
                    except ExecError:
                        ok = False
                        break
                if ok:
                    out.append(dc_dsl.serialize_rhs(
                        op.token, lam, tuple(names[j] for j in combo)))
                    if len(out) == k:
                        return out
    return out


class EnumBackend:
    """Enumerative synthesizer: proposes subprograms whose execution equals
    the given subgoals exactly on every example.

    Ranking is a fixed total order (strings: category then serialized
    length; lists: operation, operand indices, lambda), with scores the
    negated ranks. Exceeding the work budget logs a warning and proposes
    nothing.
    """

    def __init__(self, role="synthesizer", budget=DEFAULT_BUDGET):
        if role not in ("synthesizer", "combined"):
            raise ValueError(f"EnumBackend cannot act as {role!r}")
        self.role = role
        self.budget = budget

    def propose(self, spec, k):
        if k < 1:
            return []
        try:
            if spec.domain == DC:
                texts = _dc_enumerate(spec, k, self.budget)
            else:
                texts = _rf_enumerate(spec, k, self.budget)
        except BudgetExceeded:
            logger.warning("enumeration budget %d exhausted; no proposals",
                           self.budget)
            return []
        return [Proposal(text, -float(rank))
                for rank, text in enumerate(texts)]


class StubBackend:
    """Seeded pseudo-random proposer for exercising the search machinery.

    Proposals are syntactically valid but carry no competence: subgoal
    suggestions are slices or rearrangements of the remaining outputs,
    subprograms are small random expressions. Deterministic per
    (seed, role, spec).
    """

    def __init__(self, role, seed=0):
        _check_role(role)
        self.role = role
        self.seed = seed

    def propose(self, spec, k):
        rng = random.Random(
            f"{self.seed}/{self.role}/{spec_fingerprint(spec)}")
        if k < 1:
            return []
        if self.role == "subgoal":
            texts = [self._subgoal(spec, rng) for _ in range(k)]
        elif spec.domain == RF:
            texts = [self._rf_subprogram(spec, rng) for _ in range(k)]
        else:
            texts = [self._dc_subprogram(spec, rng) for _ in range(k)]
        return [Proposal(text, -(i + 1) * 0.25 - rng.random() * 0.1)
                for i, text in enumerate(t for t in texts if t is not None)]

    def _subgoal(self, spec, rng):
        values = []
        for ex in spec.examples:
            rem = ex.remaining_output
            if spec.domain == RF:
                values.append(rem[:rng.randint(1, len(rem))] if rem else "")
            else:
                options = [rem]
                if isinstance(rem, list) and rem:
                    options += [sorted(rem), rem[::-1], [rem[0]]]
                options += [v for _, v in ex.bindings]
                values.append(rng.choice(options))
        return encode_subgoals(spec.domain, values)

    def _rf_subprogram(self, spec, rng):
        rem0 = spec.examples[0].remaining_output
        roll = rng.random()
        if roll < 0.5 and rem0:
            expr = rf_dsl.ConstStr(rem0[0])
        elif roll < 0.65:
            start = rng.randint(1, 5)
            expr = rf_dsl.SubStr(start, start + rng.randint(0, 3))
        elif roll < 0.8:
            expr = rf_dsl.GetToken(rng.choice(rf_dsl.REGEX_CLASSES),
                                   rng.choice((1, 2, -1)))
        elif roll < 0.9:
            expr = rf_dsl.ToCase(rng.choice(rf_dsl.CASES))
        else:
            expr = rf_dsl.ConstStr(rng.choice(rf_dsl.CHARACTERS))
        return rf_dsl.serialize_expression(expr)

    def _dc_subprogram(self, spec, rng):
        names = [name for name, _ in spec.examples[0].bindings]
        values = dict(spec.examples[0].bindings)
        for _ in range(10):
            op = rng.choice(dc_dsl.OPERATIONS)
            args = []
            for sort in op.operand_sorts:
                fits = [n for n in names
                        if isinstance(values[n], int) == (sort == dc_dsl.INT)]
                if not fits:
                    break
                args.append(rng.choice(fits))
            if len(args) != len(op.operand_sorts):
                continue
            lam = None
            if op.lambda_kind:
                lam = rng.choice([l.token for l in dc_dsl.LAMBDAS
                                  if l.kind == op.lambda_kind])
            return dc_dsl.serialize_rhs(op.token, lam, tuple(args))
        return None


class RemoteBackend:
    """Client for an out-of-process proposal model on the NDJSON protocol.

    Transport trouble and malformed replies degrade to empty proposal lists
    with a logged warning; the search never crashes on a misbehaving server.
    """

    def __init__(self, role, endpoint, timeout=10.0):
        _check_role(role)
        self.role = role
        self.endpoint = endpoint
        self.timeout = timeout
        self._transport = None

    def _connected(self):
        if self._transport is None:
            self._transport = protocol.open_transport(self.endpoint,
                                                      self.timeout)
        return self._transport

    def propose(self, spec, k):
        if k < 1:
            return []
        line = protocol.encode_request(self.role, spec.domain, k, spec)
        try:
            reply = self._connected().roundtrip(line)
        except (TimeoutError, OSError, ProtocolError) as exc:
            logger.warning("remote %s: transport failure: %s",
                           self.endpoint, exc)
            self.close()
            return []
        try:
            proposals = protocol.decode_response(reply)
        except ProtocolError as exc:
            logger.warning("remote %s: dropped malformed response: %s",
                           self.endpoint, exc)
            return []
        return proposals[:k]

    def close(self):
        if self._transport is not None:
            self._transport.close()
            self._transport = None

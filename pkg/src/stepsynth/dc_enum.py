"""Exhaustive minimal-solution indexing for list tasks on fixed inputs.

Given example inputs and a split, this enumerates every program in the
union of the split's train and test distributions up to the split's
maximum length, and records, per reachable output signature, the minimal
program length, which distributions contain minimal-length solutions, and
one exemplar program per side: the first one discovered (fixed by the
enumeration order) that a stepwise solver can follow, meaning every
statement binds a fresh value until the one that produces the output.

The frontier is kept small by observational equivalence: a program prefix
is represented by the SET of values it has bound (as interned per-example
vectors) plus the distribution tag of its statement sequence. Two prefixes
with equal value sets and tags reach exactly the same completions, because
statements reference values (through variables) and the tag carries
everything the membership predicates inspect. Statements whose result is
already bound re-enter the frontier with the value set unchanged but the
tag extended; such "padding" statements can participate in minimal
solutions of the pattern-constrained splits and when the target value
equals an earlier binding. Padded programs count toward membership, but
solvers that prune value-duplicating steps cannot follow them, so they
are never stored as exemplars; a signature whose minimal member programs
are all padded keeps its membership flags and is not offered for
selection.

States are stored for all layers except the last; the final layer is
streamed, recording only completions of signatures not already indexed at
a shorter length. When the length range extends past 4, the penultimate
frontier is additionally capped: the lower layers stay exhaustive (so
minimality judgements remain exact) and the cap only narrows the pool of
deepest signatures offered for task selection. Work is counted in
statement evaluations and capped by a budget.
"""

from dataclasses import dataclass

from . import dc_dsl, splits
from .errors import BudgetExceeded

# Statement memo keys pack two value ids into one int with 22 bits each,
# so the evaluation budget (which bounds the id count) must stay below 2**22.
DEFAULT_BUDGET = 4_000_000
TAIL_FRONTIER_CAP = 2500

_INT, _LIST = dc_dsl.INT, dc_dsl.LIST
_VMIN, _VMAX = dc_dsl.VALUE_MIN, dc_dsl.VALUE_MAX
_OPS = dc_dsl.OPERATIONS
_LAMBDA_FAMILY = {
    "int": dc_dsl.INT_LAMBDAS,
    "bool": dc_dsl.BOOL_LAMBDAS,
    "pair": dc_dsl.PAIR_LAMBDAS,
}
_UNSEEN = object()


def _freeze(value):
    return tuple(value) if isinstance(value, list) else value


def _thaw(value):
    return list(value) if isinstance(value, tuple) else value


# Vector-level statement implementations. Each takes per-example argument
# tuples and returns a tuple of per-example result values (lists frozen to
# tuples), or None if any example fails: empty aggregate, index out of
# bounds, or a result outside the value range. Elements of argument lists
# are already range-checked, so only operations that create new numbers
# re-check.

def _v_head(vec):
    out = []
    for xs in vec:
        if not xs:
            return None
        out.append(xs[0])
    return tuple(out)


def _v_last(vec):
    out = []
    for xs in vec:
        if not xs:
            return None
        out.append(xs[-1])
    return tuple(out)


def _v_access(vec_n, vec_xs):
    out = []
    for n, xs in zip(vec_n, vec_xs):
        if n < 0 or n >= len(xs):
            return None
        out.append(xs[n])
    return tuple(out)


def _v_minimum(vec):
    out = []
    for xs in vec:
        if not xs:
            return None
        out.append(min(xs))
    return tuple(out)


def _v_maximum(vec):
    out = []
    for xs in vec:
        if not xs:
            return None
        out.append(max(xs))
    return tuple(out)


def _v_sum(vec):
    out = []
    for xs in vec:
        s = sum(xs)
        if s < _VMIN or s > _VMAX:
            return None
        out.append(s)
    return tuple(out)


def _v_take(vec_n, vec_xs):
    return tuple(xs[:n] if n > 0 else () for n, xs in zip(vec_n, vec_xs))


def _v_drop(vec_n, vec_xs):
    return tuple(xs[n:] if n > 0 else xs for n, xs in zip(vec_n, vec_xs))


def _v_reverse(vec):
    return tuple(xs[::-1] for xs in vec)


def _v_sort(vec):
    return tuple(tuple(sorted(xs)) for xs in vec)


def _v_map(lam, vec):
    out = []
    for xs in vec:
        r = tuple(map(lam, xs))
        if r and (min(r) < _VMIN or max(r) > _VMAX):
            return None
        out.append(r)
    return tuple(out)


def _v_filter(lam, vec):
    return tuple(tuple(filter(lam, xs)) for xs in vec)


def _v_count(lam, vec):
    return tuple(sum(map(lam, xs)) for xs in vec)


def _v_zipwith(lam, vec_a, vec_b):
    out = []
    for xs, ys in zip(vec_a, vec_b):
        r = tuple(map(lam, xs, ys))
        if r and (min(r) < _VMIN or max(r) > _VMAX):
            return None
        out.append(r)
    return tuple(out)


def _v_scanl1(lam, vec):
    out = []
    for xs in vec:
        if not xs:
            out.append(())
            continue
        acc = xs[0]
        row = [acc]
        push = row.append
        for x in xs[1:]:
            acc = lam(acc, x)
            push(acc)
        if min(row) < _VMIN or max(row) > _VMAX:
            return None
        out.append(tuple(row))
    return tuple(out)


# Pool codes: 0 takes one list, 1 takes an int then a list, 2 two lists.
_IMPL_INFO = {
    "Head": (_v_head, 0),
    "Last": (_v_last, 0),
    "Access": (_v_access, 1),
    "Minimum": (_v_minimum, 0),
    "Maximum": (_v_maximum, 0),
    "Sum": (_v_sum, 0),
    "Take": (_v_take, 1),
    "Drop": (_v_drop, 1),
    "Reverse": (_v_reverse, 0),
    "Sort": (_v_sort, 0),
    "Map": (_v_map, 0),
    "Filter": (_v_filter, 0),
    "Count": (_v_count, 0),
    "ZipWith": (_v_zipwith, 2),
    "Scanl1": (_v_scanl1, 0),
}

_POOL_SORTS = {0: (_LIST,), 1: (_INT, _LIST), 2: (_LIST, _LIST)}


def _build_op_rows():
    rows = []
    for op_idx, op in enumerate(_OPS):
        impl, pools_code = _IMPL_INFO[op.token]
        if tuple(op.operand_sorts) != _POOL_SORTS[pools_code]:
            raise AssertionError(f"operand sorts changed for {op.token}")
        if op.lambda_kind is None:
            lam_fns = (None,)
            lam_tokens = (None,)
        else:
            family = _LAMBDA_FAMILY[op.lambda_kind]
            lam_fns = tuple(l.fn for l in family)
            lam_tokens = tuple(l.token for l in family)
        rows.append((op_idx, op.token, impl, pools_code, lam_fns, lam_tokens,
                     1 if op.result_sort == _LIST else 0))
    return tuple(rows)


_OP_ROWS = _build_op_rows()


def _lam_token(op_idx, lam_idx):
    op = _OPS[op_idx]
    if op.lambda_kind is None:
        return None
    return _LAMBDA_FAMILY[op.lambda_kind][lam_idx].token


def _decode(code):
    return code >> 4, code & 15


class _Evaluator:
    """Interned per-example value vectors plus memoized statement results.

    Statement candidates are emitted as (result id, code, a, b) with
    code = op_idx * 16 + lam_idx and b == -1 for single-argument
    operations; failing statements are dropped. The emission order is
    fixed: operations in DSL order, lambdas in family order, argument ids
    ascending.
    """

    def __init__(self, input_names, input_rows, budget):
        self.input_rows = [tuple(row) for row in input_rows]
        self.n_examples = len(self.input_rows)
        self.budget = budget
        self.evals = 0
        self.vectors = []
        self._vec_ids = {}
        self.sorts = []  # vid -> 1 for list, 0 for int
        self._memo_u = {}
        self._memo_b = {}
        self.input_vids = []
        for i, name in enumerate(input_names):
            column = tuple(_freeze(row[i]) for row in self.input_rows)
            kinds = {isinstance(v, tuple) for v in column}
            if len(kinds) != 1:
                raise ValueError(
                    f"input {name} mixes ints and lists across examples")
            for v in column:
                if not dc_dsl.validate_value(_thaw(v)):
                    raise ValueError(f"input {name} holds an invalid value")
            self.input_vids.append(self.intern(column, int(kinds.pop())))

    def intern(self, vector, sort_code):
        vid = self._vec_ids.get(vector)
        if vid is None:
            vid = len(self.vectors)
            self._vec_ids[vector] = vid
            self.vectors.append(vector)
            self.sorts.append(sort_code)
        return vid

    def statements(self, values):
        sorts = self.sorts
        ints = []
        lists = []
        for v in values:
            if sorts[v]:
                lists.append(v)
            else:
                ints.append(v)
        vectors = self.vectors
        memo_u = self._memo_u
        memo_b = self._memo_b
        budget = self.budget
        out = []
        add = out.append
        for op_idx, _token, impl, pools_code, lam_fns, _lt, res_sort in _OP_ROWS:
            if pools_code == 0:
                if not lists:
                    continue
                base = op_idx * 16
                for lam_idx, lam in enumerate(lam_fns):
                    code = base + lam_idx
                    for a in lists:
                        key = (a << 8) | code
                        vid = memo_u.get(key, _UNSEEN)
                        if vid is _UNSEEN:
                            self.evals += 1
                            if self.evals > budget:
                                raise BudgetExceeded(
                                    f"enumeration exceeded {budget} "
                                    "statement evaluations")
                            vec = (impl(vectors[a]) if lam is None
                                   else impl(lam, vectors[a]))
                            vid = (None if vec is None
                                   else self.intern(vec, res_sort))
                            memo_u[key] = vid
                        if vid is not None:
                            add((vid, code, a, -1))
            elif pools_code == 1:
                if not ints or not lists:
                    continue
                code = op_idx * 16
                for a in ints:
                    ashift = a << 22
                    for b in lists:
                        key = ((ashift | b) << 8) | code
                        vid = memo_b.get(key, _UNSEEN)
                        if vid is _UNSEEN:
                            self.evals += 1
                            if self.evals > budget:
                                raise BudgetExceeded(
                                    f"enumeration exceeded {budget} "
                                    "statement evaluations")
                            vec = impl(vectors[a], vectors[b])
                            vid = (None if vec is None
                                   else self.intern(vec, res_sort))
                            memo_b[key] = vid
                        if vid is not None:
                            add((vid, code, a, b))
            else:
                if not lists:
                    continue
                base = op_idx * 16
                for lam_idx, lam in enumerate(lam_fns):
                    code = base + lam_idx
                    for a in lists:
                        ashift = a << 22
                        for b in lists:
                            key = ((ashift | b) << 8) | code
                            vid = memo_b.get(key, _UNSEEN)
                            if vid is _UNSEEN:
                                self.evals += 1
                                if self.evals > budget:
                                    raise BudgetExceeded(
                                        f"enumeration exceeded {budget} "
                                        "statement evaluations")
                                vec = impl(lam, vectors[a], vectors[b])
                                vid = (None if vec is None
                                       else self.intern(vec, res_sort))
                                memo_b[key] = vid
                            if vid is not None:
                                add((vid, code, a, b))
        return out

    def result(self, code, a, b):
        """Memoized result id of an already-evaluated statement."""
        if b < 0:
            return self._memo_u[(a << 8) | code]
        return self._memo_b[(((a << 22) | b) << 8) | code]


@dataclass(slots=True)
class _SigInfo:
    min_len: int
    train: bool = False
    test: bool = False
    train_chain: tuple | None = None
    test_chain: tuple | None = None


class _Tags:
    """Distribution tags: what a membership predicate needs beyond length.

    Tags are small bitmask ints, except for the concept-order split where
    the tag is the concept character sequence so far.
    """

    def __init__(self, spec):
        self.spec = spec
        self.split = spec.split
        self.max_len = max(spec.train_lengths.stop, spec.test_lengths.stop) - 1
        self.ordered = spec.split == "CONCEPT_ORDER"
        concept = [splits.concept_of(splits.DC, op.token) for op in _OPS]
        mask_flat = [0] * 256
        for op_idx, token, _impl, _pc, lam_fns, lam_tokens, _rs in _OP_ROWS:
            for lam_idx, lt in enumerate(lam_tokens):
                code = op_idx * 16 + lam_idx
                if self.ordered:
                    mask_flat[code] = concept[op_idx]
                elif spec.split == "CONCEPT_MIX":
                    mask_flat[code] = 1 if concept[op_idx] == splits.F else 2
                elif spec.split == "NEW_OP":
                    mask_flat[code] = 1 if token == spec.special else 0
                elif spec.split == "OP_FUNCTIONALITY":
                    mask_flat[code] = (1 if token == spec.special
                                       and lt not in ("(-)", "(min)") else 0)
        self.mask_flat = mask_flat
        if self.ordered:
            self._pattern = {splits.TRAIN: {}, splits.TEST: {}}
            viable = {}
            for side in splits.SIDES:
                for n in spec.lengths(side):
                    pat = "".join(spec.ordered_pattern(side, n))
                    self._pattern[side][n] = pat
                    for i in range(1, len(pat)):
                        viable.setdefault(i, set()).add(pat[:i])
            self._viable = viable

    def initial(self):
        return "" if self.ordered else 0

    def viable_at(self, length):
        """Tag values of this length that can still extend to a pattern."""
        if not self.ordered:
            return None
        return self._viable.get(length, frozenset())

    def membership(self, tag, length):
        """(in train dist, in test dist) for a COMPLETE program."""
        spec, split = self.spec, self.split
        tr = length in spec.train_lengths
        te = length in spec.test_lengths
        if split == "CONCEPT_ORDER":
            return (self._pattern[splits.TRAIN].get(length) == tag,
                    self._pattern[splits.TEST].get(length) == tag)
        if split == "CONCEPT_MIX":
            mixed = tag == 3
            return tr and not mixed, te and mixed
        if split == "NEW_OP":
            if length == 1:
                return tag == 1, False
            return tr and tag == 0, te and tag == 1
        if split == "OP_FUNCTIONALITY":
            return tr and tag == 0, te and tag == 1
        return tr, te


class SolutionIndex:
    """All minimal-length solutions over fixed inputs, by output signature."""

    def __init__(self, split_spec, input_names, input_rows,
                 budget=DEFAULT_BUDGET, tail_cap=TAIL_FRONTIER_CAP):
        self.split_spec = split_spec
        self.input_names = tuple(input_names)
        self.tail_cap = tail_cap
        self._tags = _Tags(split_spec)
        self.max_len = self._tags.max_len
        self._ev = _Evaluator(self.input_names, input_rows, budget)
        self._input_vids = self._ev.input_vids
        # state key (sorted value-id tuple, tag) -> (parent key, (code, a, b))
        self._states = {}
        self.sigs = {}  # vid -> _SigInfo
        self._run()

    @property
    def evals(self):
        return self._ev.evals

    def _chain(self, parent_key, step):
        chain = [step]
        key = parent_key
        while key is not None:
            key, step = self._states[key]
            if step is not None:
                chain.append(step)
        chain.reverse()
        return tuple(chain)

    def _searchable(self, chain, goal):
        """Whether a stepwise solver can follow the chain as exemplar.

        Solvers prune a statement whose result merely re-produces an
        already-bound value, unless that statement solves the task, so
        every statement before the first goal-producing one must bind a
        fresh value.
        """
        bound = set(self._input_vids)
        for code, a, b in chain:
            vid = self._ev.result(code, a, b)
            if vid == goal:
                return True
            if vid in bound:
                return False
            bound.add(vid)
        return True

    def _run(self):
        tags = self._tags
        root_values = tuple(sorted(set(self._input_vids)))
        root_key = (root_values, tags.initial())
        self._states[root_key] = (None, None)
        frontier = {root_values: [(tags.initial(), root_key)]}
        cap_layer = self.max_len - 1 if self.max_len >= 5 else None
        ordered = tags.ordered
        mask_flat = tags.mask_flat
        sigs = self.sigs
        states = self._states
        for length in range(1, self.max_len + 1):
            last = length == self.max_len
            room = self.tail_cap if length == cap_layer else None
            viable = tags.viable_at(length)
            member_cache = {}
            membership = tags.membership
            nxt = {}
            # The capped layer samples its survivors evenly across the whole
            # candidate stream (doubling the stride whenever the reservoir
            # fills); taking the first N instead would keep only near-
            # duplicate states from the earliest value sets.
            reservoir = []
            stride = 1
            counter = 0
            for values, tag_states in frontier.items():
                stmts = self._ev.statements(values)
                merged_cache = {}
                for tag, state_key in tag_states:
                    for vid, code, a, b in stmts:
                        mask = mask_flat[code]
                        new_tag = tag + mask if ordered else tag | mask
                        mem = member_cache.get(new_tag)
                        if mem is None:
                            mem = membership(new_tag, length)
                            member_cache[new_tag] = mem
                        tr, te = mem
                        if tr or te:
                            info = sigs.get(vid)
                            if info is None:
                                info = _SigInfo(length)
                                sigs[vid] = info
                            if info.min_len == length and (
                                    (tr and info.train_chain is None)
                                    or (te and info.test_chain is None)):
                                if tr:
                                    info.train = True
                                if te:
                                    info.test = True
                                chain = self._chain(state_key, (code, a, b))
                                if self._searchable(chain, vid):
                                    if tr and info.train_chain is None:
                                        info.train_chain = chain
                                    if te and info.test_chain is None:
                                        info.test_chain = chain
                        if last:
                            continue
                        if viable is not None and new_tag not in viable:
                            continue
                        merged = merged_cache.get(vid)
                        if merged is None:
                            merged = (values if vid in values
                                      else tuple(sorted(values + (vid,))))
                            merged_cache[vid] = merged
                        new_key = (merged, new_tag)
                        if room is not None:
                            if new_key not in states:
                                if counter % stride == 0:
                                    reservoir.append(
                                        (new_key, state_key, code, a, b))
                                    if len(reservoir) >= 2 * room:
                                        del reservoir[::2]
                                        stride *= 2
                                counter += 1
                            continue
                        if new_key not in states:
                            states[new_key] = (state_key, (code, a, b))
                            nxt.setdefault(merged, []).append(
                                (new_tag, new_key))
            for new_key, parent_key, code, a, b in reservoir[:room]:
                if new_key not in states:
                    states[new_key] = (parent_key, (code, a, b))
                    nxt.setdefault(new_key[0], []).append(
                        (new_key[1], new_key))
            frontier = nxt

    # Selection API.

    def eligible(self, side):
        """Signature ids this side can draw tasks from, in stable order.

        Both sides of the identity split share the training pool, because
        its test distribution IS the training distribution. Signatures
        whose minimal member programs are all padded keep their membership
        flags but have no exemplar, so they are not offered.
        """
        sigs = self.sigs
        if side == splits.TRAIN or self.split_spec.split == "NONE":
            return [v for v in sorted(sigs)
                    if sigs[v].train and sigs[v].train_chain is not None]
        return [v for v in sorted(sigs)
                if sigs[v].test and not sigs[v].train
                and sigs[v].test_chain is not None]

    def outputs(self, vid):
        return [_thaw(v) for v in self._ev.vectors[vid]]

    def min_len(self, vid):
        return self.sigs[vid].min_len

    def minimal_program(self, vid, side):
        info = self.sigs[vid]
        chain = info.train_chain if side == splits.TRAIN else info.test_chain
        if chain is None and self.split_spec.split == "NONE":
            chain = info.train_chain
        if chain is None:
            raise KeyError(f"signature {vid} has no {side} exemplar")
        binder = {}
        for name, in_vid in zip(self.input_names, self._input_vids):
            binder.setdefault(in_vid, name)
        statements = []
        for i, (code, a, b) in enumerate(chain):
            op_idx, lam_idx = _decode(code)
            op = _OPS[op_idx]
            target = dc_dsl.VARIABLE_POOL[len(self.input_names) + i]
            args = (binder[a],) if b < 0 else (binder[a], binder[b])
            statements.append(dc_dsl.DcStatement(
                target, op.token, _lam_token(op_idx, lam_idx), args))
            binder.setdefault(self._ev.result(code, a, b), target)
        return dc_dsl.DcProgram(tuple(self.input_names), tuple(statements))


def build_index(split_id, input_names, input_rows, budget=DEFAULT_BUDGET):
    spec = splits.get_split(split_id, splits.DC)
    return SolutionIndex(spec, input_names, input_rows, budget)


def train_reachable(split_id, input_names, input_rows, max_len,
                    budget=DEFAULT_BUDGET):
    """Independent cross-check enumerator: minimal TRAIN-distribution length
    per reachable output signature, judging membership by reconstructing
    each finished program and asking the split predicates directly.

    Deliberately avoids SolutionIndex's tag tables and its global state
    store: chains are carried per layer, keyed by value set plus the
    features membership can depend on (concept sequence and special-
    operation flags), and the verdict per feature/length pair comes from
    the program-level predicate on a representative program.
    """
    spec = splits.get_split(split_id, splits.DC)
    ev = _Evaluator(input_names, input_rows, budget)
    input_names = tuple(input_names)

    concept_flat = [""] * 256
    flag_flat = [0] * 256  # bit 0: special op; bit 1: outside training modes
    for op_idx, token, _impl, _pc, _lf, lam_tokens, _rs in _OP_ROWS:
        for lam_idx, lt in enumerate(lam_tokens):
            code = op_idx * 16 + lam_idx
            concept_flat[code] = splits.concept_of(splits.DC, token)
            if token == "Scanl1":
                flag_flat[code] = 1 if lt in ("(-)", "(min)") else 3

    def to_program(chain):
        binder = {}
        for name, vid in zip(input_names, ev.input_vids):
            binder.setdefault(vid, name)
        stmts = []
        for i, (code, a, b) in enumerate(chain):
            op_idx, lam_idx = _decode(code)
            target = dc_dsl.VARIABLE_POOL[len(input_names) + i]
            args = (binder[a],) if b < 0 else (binder[a], binder[b])
            stmts.append(dc_dsl.DcStatement(
                target, _OPS[op_idx].token, _lam_token(op_idx, lam_idx), args))
            binder.setdefault(ev.result(code, a, b), target)
        return dc_dsl.DcProgram(input_names, tuple(stmts))

    member_cache = {}

    def is_train_member(feats, length, chain):
        key = (feats, length)
        verdict = member_cache.get(key)
        if verdict is None:
            verdict = splits.in_train(spec, to_program(chain))
            member_cache[key] = verdict
        return verdict

    best = {}
    root_values = tuple(sorted(set(ev.input_vids)))
    frontier = {root_values: [(("", 0), ())]}
    for length in range(1, max_len + 1):
        last = length == max_len
        nxt = {}
        seen = set()
        for values, feat_chains in frontier.items():
            stmts = ev.statements(values)
            merged_cache = {}
            for (concepts, flags), chain in feat_chains:
                for vid, code, a, b in stmts:
                    new_feats = (concepts + concept_flat[code],
                                 flags | flag_flat[code])
                    prev = best.get(vid)
                    if (prev is None or prev > length) and is_train_member(
                            new_feats, length, chain + ((code, a, b),)):
                        best[vid] = length
                    if last:
                        continue
                    merged = merged_cache.get(vid)
                    if merged is None:
                        merged = (values if vid in values
                                  else tuple(sorted(values + (vid,))))
                        merged_cache[vid] = merged
                    state_key = (merged, new_feats)
                    if state_key not in seen:
                        seen.add(state_key)
                        nxt.setdefault(merged, []).append(
                            (new_feats, chain + ((code, a, b),)))
        frontier = nxt
    return {tuple(ev.vectors[v]): n for v, n in best.items()}

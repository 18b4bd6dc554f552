"""Integer-list DSL: syntax, typing, parsing, and execution semantics.

Programs are straight-line: input initializations followed by assignments,
one DSL operation per line, each binding a fresh variable. Values are ints
or int lists. Surface form is space-tokenized:

    x0 = INPUT | x1 = Map (**2) x0 | x2 = Sort x1

Execution raises ExecError on empty-list aggregates, out-of-bounds Access,
or any produced integer outside [-256, 256]. Take/Drop clamp their index to
the list bounds. Division lambdas floor (round toward minus infinity).
"""

from dataclasses import dataclass

from .errors import ExecError, ParseError

VALUE_MIN, VALUE_MAX = -256, 256
INPUT_MIN, INPUT_MAX = -50, 50
MAX_INPUT_LIST_LEN = 5
MAX_VARIABLES = 10

VARIABLE_POOL = tuple(f"x{i}" for i in range(MAX_VARIABLES))

INT, LIST = "int", "list"


@dataclass(frozen=True)
class Lambda:
    token: str
    kind: str  # "int" (int->int), "bool" (int->bool), "pair" ((int,int)->int)
    fn: object


INT_LAMBDAS = (
    Lambda("(+1)", "int", lambda x: x + 1),
    Lambda("(-1)", "int", lambda x: x - 1),
    Lambda("(*2)", "int", lambda x: x * 2),
    Lambda("(/2)", "int", lambda x: x // 2),
    Lambda("(*(-1))", "int", lambda x: -x),
    Lambda("(**2)", "int", lambda x: x ** 2),
    Lambda("(*3)", "int", lambda x: x * 3),
    Lambda("(/3)", "int", lambda x: x // 3),
    Lambda("(*4)", "int", lambda x: x * 4),
    Lambda("(/4)", "int", lambda x: x // 4),
)
BOOL_LAMBDAS = (
    Lambda("(>0)", "bool", lambda x: x > 0),
    Lambda("(<0)", "bool", lambda x: x < 0),
    Lambda("(%2==0)", "bool", lambda x: x % 2 == 0),
    Lambda("(%2==1)", "bool", lambda x: x % 2 == 1),
)
PAIR_LAMBDAS = (
    Lambda("(+)", "pair", lambda x, y: x + y),
    Lambda("(-)", "pair", lambda x, y: x - y),
    Lambda("(*)", "pair", lambda x, y: x * y),
    Lambda("(min)", "pair", min),
    Lambda("(max)", "pair", max),
)
LAMBDAS = INT_LAMBDAS + BOOL_LAMBDAS + PAIR_LAMBDAS
TOKEN_TO_LAMBDA = {l.token: l for l in LAMBDAS}


def _scanl1(f, xs):
    ys = []
    for i, x in enumerate(xs):
        ys.append(x if i == 0 else f(ys[-1], x))
    return ys


def _head(xs):
    if not xs:
        raise ExecError("Head of empty list")
    return xs[0]


def _last(xs):
    if not xs:
        raise ExecError("Last of empty list")
    return xs[-1]


def _access(n, xs):
    if not 0 <= n < len(xs):
        raise ExecError(f"Access index {n} out of bounds for length {len(xs)}")
    return xs[n]


def _minimum(xs):
    if not xs:
        raise ExecError("Minimum of empty list")
    return min(xs)


def _maximum(xs):
    if not xs:
        raise ExecError("Maximum of empty list")
    return max(xs)


@dataclass(frozen=True)
class Operation:
    token: str
    operand_sorts: tuple  # per positional operand, INT or LIST
    lambda_kind: str | None  # None for first-order operations
    result_sort: str
    fn: object


FIRST_ORDER_OPS = (
    Operation("Head", (LIST,), None, INT, _head),
    Operation("Last", (LIST,), None, INT, _last),
    Operation("Access", (INT, LIST), None, INT, _access),
    Operation("Minimum", (LIST,), None, INT, _minimum),
    Operation("Maximum", (LIST,), None, INT, _maximum),
    Operation("Sum", (LIST,), None, INT, sum),
    Operation("Take", (INT, LIST), None, LIST, lambda n, xs: xs[:max(0, n)]),
    Operation("Drop", (INT, LIST), None, LIST, lambda n, xs: xs[max(0, n):]),
    Operation("Reverse", (LIST,), None, LIST, lambda xs: list(reversed(xs))),
    Operation("Sort", (LIST,), None, LIST, sorted),
)
HIGHER_ORDER_OPS = (
    Operation("Map", (LIST,), "int", LIST, lambda f, xs: [f(x) for x in xs]),
    Operation("Filter", (LIST,), "bool", LIST, lambda f, xs: [x for x in xs if f(x)]),
    Operation("Count", (LIST,), "bool", INT, lambda f, xs: sum(1 for x in xs if f(x))),
    Operation("ZipWith", (LIST, LIST), "pair", LIST,
              lambda f, xs, ys: [f(x, y) for x, y in zip(xs, ys)]),
    Operation("Scanl1", (LIST,), "pair", LIST, _scanl1),
)
OPERATIONS = FIRST_ORDER_OPS + HIGHER_ORDER_OPS
TOKEN_TO_OPERATION = {op.token: op for op in OPERATIONS}


@dataclass(frozen=True)
class DcStatement:
    target: str
    operation: str  # operation token
    lam: str | None  # lambda token, present iff the operation is higher-order
    args: tuple  # operand variable names


@dataclass(frozen=True)
class DcProgram:
    inputs: tuple  # input variable names, in order
    statements: tuple


def value_sort(value):
    return INT if isinstance(value, int) else LIST


def validate_value(value):
    """True iff the value is an int or int list within execution range."""
    if isinstance(value, bool):
        return False
    if isinstance(value, int):
        return VALUE_MIN <= value <= VALUE_MAX
    if isinstance(value, list):
        return all(isinstance(x, int) and not isinstance(x, bool)
                   and VALUE_MIN <= x <= VALUE_MAX for x in value)
    return False


def typecheck_statement(stmt, bindings):
    """True iff operand sorts and lambda kind match the grammar.

    `bindings` is an ordered tuple of (name, value) pairs; the statement's
    target must be fresh and its operands bound with the demanded sorts.
    """
    op = TOKEN_TO_OPERATION.get(stmt.operation)
    if op is None or len(stmt.args) != len(op.operand_sorts):
        return False
    if (op.lambda_kind is None) != (stmt.lam is None):
        return False
    if stmt.lam is not None:
        lam = TOKEN_TO_LAMBDA.get(stmt.lam)
        if lam is None or lam.kind != op.lambda_kind:
            return False
    names = {name: value for name, value in bindings}
    if stmt.target in names or stmt.target not in VARIABLE_POOL:
        return False
    for arg, sort in zip(stmt.args, op.operand_sorts):
        if arg not in names or value_sort(names[arg]) != sort:
            return False
    return True


def execute_rhs(op_token, lam_token, arg_values):
    """Apply one operation to already-resolved operand values."""
    op = TOKEN_TO_OPERATION[op_token]
    if lam_token is None:
        result = op.fn(*arg_values)
    else:
        result = op.fn(TOKEN_TO_LAMBDA[lam_token].fn, *arg_values)
    if not validate_value(result):
        raise ExecError(f"{op_token} result out of range: {result}")
    return result


def execute_statement(stmt, bindings):
    """Extend the bindings with the statement's result; prior pairs unchanged."""
    if not typecheck_statement(stmt, bindings):
        raise ExecError(f"statement does not typecheck: {serialize_statement(stmt)}")
    by_name = dict(bindings)
    args = [by_name[a] for a in stmt.args]
    result = execute_rhs(stmt.operation, stmt.lam, args)
    return bindings + ((stmt.target, result),)


def execute(program, inputs):
    """Run the program; the result is the final binding's value."""
    if len(inputs) != len(program.inputs):
        raise ExecError(f"expected {len(program.inputs)} inputs, got {len(inputs)}")
    for value in inputs:
        if not validate_value(value):
            raise ExecError(f"input out of range: {value}")
    bindings = tuple(zip(program.inputs, inputs))
    for stmt in program.statements:
        bindings = execute_statement(stmt, bindings)
    return bindings[-1][1]


# Serialization.

def value_to_str(value):
    if isinstance(value, int):
        return str(value)
    if not value:
        return "[ ]"
    return "[ " + " ".join(str(x) for x in value) + " ]"


def value_from_str(text):
    """Parse an int or bracketed int list; commas tolerated."""
    tokens = (text.replace(",", " ").replace("[", " [ ")
              .replace("]", " ] ").split())
    if not tokens:
        raise ParseError("empty value")
    if tokens[0] == "[":
        if tokens[-1] != "]":
            raise ParseError(f"unterminated list: {text!r}")
        body = tokens[1:-1]
        try:
            return [int(t) for t in body]
        except ValueError:
            raise ParseError(f"bad list element in {text!r}") from None
    if len(tokens) != 1:
        raise ParseError(f"expected a single value: {text!r}")
    try:
        return int(tokens[0])
    except ValueError:
        raise ParseError(f"bad value: {text!r}") from None


def serialize_rhs(op_token, lam_token, args):
    parts = [op_token]
    if lam_token is not None:
        parts.append(lam_token)
    parts.extend(args)
    return " ".join(parts)


def serialize_statement(stmt):
    return f"{stmt.target} = {serialize_rhs(stmt.operation, stmt.lam, stmt.args)}"


def serialize(program):
    lines = [f"{name} = INPUT" for name in program.inputs]
    lines.extend(serialize_statement(s) for s in program.statements)
    return " | ".join(lines)


def _check_variable(token, position):
    if token not in VARIABLE_POOL:
        raise ParseError(f"bad variable name {token!r}", position)
    return token


def parse_rhs(text, target="x9", position=0):
    """Parse an assignment right-hand side like 'Map (**2) x0'."""
    tokens = text.split()
    if not tokens:
        raise ParseError("empty statement", position)
    op = TOKEN_TO_OPERATION.get(tokens[0])
    if op is None:
        raise ParseError(f"unknown operation {tokens[0]!r}", position)
    rest = tokens[1:]
    lam = None
    if op.lambda_kind is not None:
        if not rest:
            raise ParseError(f"{op.token} needs a lambda", position)
        lam = TOKEN_TO_LAMBDA.get(rest[0])
        if lam is None or lam.kind != op.lambda_kind:
            raise ParseError(f"bad lambda {rest[0]!r} for {op.token}", position)
        rest = rest[1:]
    if len(rest) != len(op.operand_sorts):
        raise ParseError(f"{op.token} takes {len(op.operand_sorts)} operands", position)
    args = tuple(_check_variable(t, position) for t in rest)
    return DcStatement(target, op.token, lam.token if lam else None, args)


def parse(text):
    """Parse a full program; INPUT initializations must come first."""
    lines = text.split(" | ")
    inputs = []
    statements = []
    offset = 0
    for line in lines:
        stripped = line.strip()
        if "=" not in stripped:
            raise ParseError(f"missing '=' in {stripped!r}", offset)
        lhs, rhs = stripped.split("=", 1)
        lhs, rhs = lhs.strip(), rhs.strip()
        _check_variable(lhs, offset)
        if rhs == "INPUT":
            if statements:
                raise ParseError("INPUT line after a statement", offset)
            if lhs in inputs:
                raise ParseError(f"duplicate input {lhs}", offset)
            inputs.append(lhs)
        else:
            if lhs in inputs or any(s.target == lhs for s in statements):
                raise ParseError(f"duplicate variable {lhs}", offset)
            statements.append(parse_rhs(rhs, target=lhs, position=offset))
        offset += len(line) + 3
    if not inputs:
        raise ParseError("program has no INPUT line", 0)
    if not statements:
        raise ParseError("program has no statements", 0)
    return DcProgram(tuple(inputs), tuple(statements))


def infer_input_sorts(program):
    """Demanded sort of each input, inferred from its first typed use.

    Unused inputs default to list for the first input and int otherwise,
    matching the sampling convention below.
    """
    sorts = {}
    for stmt in program.statements:
        op = TOKEN_TO_OPERATION[stmt.operation]
        for arg, sort in zip(stmt.args, op.operand_sorts):
            if arg in program.inputs and arg not in sorts:
                sorts[arg] = sort
    return [sorts.get(name, LIST if i == 0 else INT)
            for i, name in enumerate(program.inputs)]


# Grammar-uniform random sampling for the property suites. Typed correctly
# by construction; execution success is not guaranteed (taskgen rejects).

def sample_statement(rng, bindings_sorts, target, operations=OPERATIONS):
    """One random well-typed statement over {name: sort} bindings."""
    int_vars = sorted(n for n, s in bindings_sorts.items() if s == INT)
    list_vars = sorted(n for n, s in bindings_sorts.items() if s == LIST)
    candidates = []
    for op in operations:
        if INT in op.operand_sorts and not int_vars:
            continue
        if LIST in op.operand_sorts and not list_vars:
            continue
        candidates.append(op)
    if not candidates:
        return None
    op = rng.choice(candidates)
    lam = None
    if op.lambda_kind == "int":
        lam = rng.choice(INT_LAMBDAS).token
    elif op.lambda_kind == "bool":
        lam = rng.choice(BOOL_LAMBDAS).token
    elif op.lambda_kind == "pair":
        lam = rng.choice(PAIR_LAMBDAS).token
    args = tuple(rng.choice(int_vars if sort == INT else list_vars)
                 for sort in op.operand_sorts)
    return DcStatement(target, op.token, lam, args)


def sample_program(rng, length=None, arity=None):
    """One random well-typed program with canonical variable names."""
    if length is None:
        length = rng.randint(1, 4)
    if arity is None:
        arity = rng.choice((1, 2))
    sorts = {}
    names = []
    for i in range(arity):
        name = VARIABLE_POOL[i]
        # At least one list input; extra inputs choose their sort freely.
        sorts[name] = LIST if i == 0 else rng.choice((INT, LIST))
        names.append(name)
    statements = []
    for j in range(length):
        target = VARIABLE_POOL[arity + j]
        stmt = sample_statement(rng, sorts, target)
        statements.append(stmt)
        sorts[target] = TOKEN_TO_OPERATION[stmt.operation].result_sort
    return DcProgram(tuple(names), tuple(statements))


def sample_inputs_for(rng, program_sorts):
    """Random in-range input values for the given per-input sorts."""
    values = []
    for sort in program_sorts:
        if sort == INT:
            values.append(rng.randint(INPUT_MIN, INPUT_MAX))
        else:
            n = rng.randint(1, MAX_INPUT_LIST_LEN)
            values.append([rng.randint(INPUT_MIN, INPUT_MAX) for _ in range(n)])
    return values

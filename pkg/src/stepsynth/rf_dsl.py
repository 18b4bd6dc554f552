"""String-transformation DSL: syntax, parsing, and execution semantics.

A program is a concatenation of expressions; executing the program on an
input string concatenates the per-expression results in order. Expressions
are substring extractions, string modifications, constants, or a composition
of a modification with another expression.

Token classes match maximally and without overlap. Positions are 1-based
and inclusive at both ends; negative positions and match indices count from
the end. Operations whose requested match or span does not exist raise
ExecError rather than returning a default.
"""

import re
from dataclasses import dataclass

from .errors import ExecError, ParseError

DELIMITERS = "&,.?!@()[]%{}/:;$# \"'"
LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
DIGITS = "0123456789"
CHARACTERS = LETTERS + DIGITS + DELIMITERS
ALPHABET = frozenset(CHARACTERS)

REGEX_CLASSES = (
    "NUMBER", "WORD", "ALPHANUM", "ALL_CAPS",
    "PROPER_CASE", "LOWER", "DIGIT", "CHAR",
)
CASES = ("PROPER", "ALL_CAPS", "LOWER")
BOUNDARIES = ("START", "END")

POSITION_MIN, POSITION_MAX = -100, 100
INDEX_MAX = 5

_CLASS_PATTERNS = {
    "NUMBER": re.compile(r"[0-9]+"),
    "WORD": re.compile(r"[A-Za-z]+"),
    "ALPHANUM": re.compile(r"[A-Za-z0-9]+"),
    "ALL_CAPS": re.compile(r"[A-Z]+"),
    "PROPER_CASE": re.compile(r"[A-Z][a-z]+"),
    "LOWER": re.compile(r"[a-z]+"),
    "DIGIT": re.compile(r"[0-9]"),
    "CHAR": re.compile(r"."),
}


def matches(regex, text):
    """Ordered, non-overlapping, maximal (start, end) spans of a token class.

    `regex` is a class name from REGEX_CLASSES or a single delimiter
    character, which matches literally.
    """
    if regex in _CLASS_PATTERNS:
        pattern = _CLASS_PATTERNS[regex]
    else:
        pattern = re.compile(re.escape(regex))
    return [(m.start(), m.end()) for m in pattern.finditer(text)]


def is_regex(value):
    return value in REGEX_CLASSES or (len(value) == 1 and value in DELIMITERS)


# Abstract syntax. Substring expressions extract from the input; modification
# expressions rewrite a string; Compose(outer, inner) is outer(inner(x)).

@dataclass(frozen=True)
class ConstStr:
    char: str


@dataclass(frozen=True)
class SubStr:
    k1: int
    k2: int


@dataclass(frozen=True)
class GetSpan:
    r1: str
    i1: int
    b1: str
    r2: str
    i2: int
    b2: str


@dataclass(frozen=True)
class GetToken:
    regex: str
    index: int


@dataclass(frozen=True)
class GetUpto:
    regex: str


@dataclass(frozen=True)
class GetFrom:
    regex: str


@dataclass(frozen=True)
class ToCase:
    case: str


@dataclass(frozen=True)
class Replace:
    d1: str
    d2: str


@dataclass(frozen=True)
class Trim:
    pass


@dataclass(frozen=True)
class GetFirst:
    regex: str
    index: int


@dataclass(frozen=True)
class GetAll:
    regex: str


@dataclass(frozen=True)
class Substitute:
    regex: str
    index: int
    char: str


@dataclass(frozen=True)
class SubstituteAll:
    regex: str
    char: str


@dataclass(frozen=True)
class Remove:
    regex: str
    index: int


@dataclass(frozen=True)
class RemoveAll:
    regex: str


@dataclass(frozen=True)
class Compose:
    outer: object
    inner: object


@dataclass(frozen=True)
class RfProgram:
    expressions: tuple


SUBSTRING_TYPES = (SubStr, GetSpan, GetToken, GetUpto, GetFrom)
MODIFICATION_TYPES = (
    ToCase, Replace, Trim, GetFirst, GetAll,
    Substitute, SubstituteAll, Remove, RemoveAll,
)


def _valid_index(i):
    return isinstance(i, int) and i != 0 and -INDEX_MAX <= i <= INDEX_MAX


def _valid_char(c):
    return isinstance(c, str) and len(c) == 1 and c in ALPHABET


def _valid_delim(c):
    return isinstance(c, str) and len(c) == 1 and c in DELIMITERS


def validate_expression(expr):
    """True iff all argument values lie in the grammar's ranges."""
    if isinstance(expr, ConstStr):
        return _valid_char(expr.char)
    if isinstance(expr, SubStr):
        return all(POSITION_MIN <= k <= POSITION_MAX for k in (expr.k1, expr.k2))
    if isinstance(expr, GetSpan):
        return (is_regex(expr.r1) and is_regex(expr.r2)
                and _valid_index(expr.i1) and _valid_index(expr.i2)
                and expr.b1 in BOUNDARIES and expr.b2 in BOUNDARIES)
    if isinstance(expr, (GetToken, GetFirst, Remove)):
        return is_regex(expr.regex) and _valid_index(expr.index)
    if isinstance(expr, (GetUpto, GetFrom, GetAll, RemoveAll)):
        return is_regex(expr.regex)
    if isinstance(expr, ToCase):
        return expr.case in CASES
    if isinstance(expr, Replace):
        return _valid_delim(expr.d1) and _valid_delim(expr.d2)
    if isinstance(expr, Trim):
        return True
    if isinstance(expr, Substitute):
        return is_regex(expr.regex) and _valid_index(expr.index) and _valid_char(expr.char)
    if isinstance(expr, SubstituteAll):
        return is_regex(expr.regex) and _valid_char(expr.char)
    if isinstance(expr, Compose):
        return (isinstance(expr.outer, MODIFICATION_TYPES)
                and isinstance(expr.inner, MODIFICATION_TYPES + SUBSTRING_TYPES)
                and validate_expression(expr.outer)
                and validate_expression(expr.inner))
    return False


def validate_program(program):
    return (isinstance(program, RfProgram) and len(program.expressions) >= 1
            and all(validate_expression(e) for e in program.expressions))


# Execution.

def _nth_match(spans, i, what):
    # 1-based; negative counts from the end of the match list.
    if i == 0 or not -len(spans) <= (i if i < 0 else i - 1) < len(spans):
        raise ExecError(f"no {what} match #{i} ({len(spans)} matches)")
    return spans[i - 1 if i > 0 else i]


def _proper_case(text):
    out = list(text.lower())
    for start, end in matches("WORD", text):
        out[start] = out[start].upper()
    return "".join(out)


def execute_expression(expr, text):
    """Run one expression on the original input string."""
    if isinstance(expr, ConstStr):
        return expr.char
    if isinstance(expr, SubStr):
        n = len(text)
        p1 = expr.k1 - 1 if expr.k1 > 0 else n + expr.k1
        p2 = expr.k2 - 1 if expr.k2 > 0 else n + expr.k2
        if expr.k1 == 0 or expr.k2 == 0 or not (0 <= p1 <= p2 < n):
            raise ExecError(f"bad substring span ({expr.k1}, {expr.k2}) on length {n}")
        return text[p1:p2 + 1]
    if isinstance(expr, GetSpan):
        s1 = _nth_match(matches(expr.r1, text), expr.i1, expr.r1)
        s2 = _nth_match(matches(expr.r2, text), expr.i2, expr.r2)
        p1 = s1[0] if expr.b1 == "START" else s1[1]
        p2 = s2[0] if expr.b2 == "START" else s2[1]
        if p1 >= p2:
            raise ExecError(f"empty or reversed span ({p1}, {p2})")
        return text[p1:p2]
    if isinstance(expr, GetToken):
        start, end = _nth_match(matches(expr.regex, text), expr.index, expr.regex)
        return text[start:end]
    if isinstance(expr, GetUpto):
        spans = matches(expr.regex, text)
        if not spans:
            raise ExecError(f"no {expr.regex} match")
        return text[:spans[0][1]]
    if isinstance(expr, GetFrom):
        spans = matches(expr.regex, text)
        if not spans:
            raise ExecError(f"no {expr.regex} match")
        return text[spans[0][1]:]
    if isinstance(expr, ToCase):
        if expr.case == "LOWER":
            return text.lower()
        if expr.case == "ALL_CAPS":
            return text.upper()
        return _proper_case(text)
    if isinstance(expr, Replace):
        return text.replace(expr.d1, expr.d2)
    if isinstance(expr, Trim):
        return text.strip(" ")
    if isinstance(expr, GetFirst):
        spans = matches(expr.regex, text)
        if expr.index < 0 or len(spans) < expr.index:
            raise ExecError(f"need {expr.index} {expr.regex} matches, have {len(spans)}")
        return "".join(text[s:e] for s, e in spans[:expr.index])
    if isinstance(expr, GetAll):
        return "".join(text[s:e] for s, e in matches(expr.regex, text))
    if isinstance(expr, Substitute):
        start, end = _nth_match(matches(expr.regex, text), expr.index, expr.regex)
        return text[:start] + expr.char + text[end:]
    if isinstance(expr, SubstituteAll):
        parts = []
        last = 0
        for start, end in matches(expr.regex, text):
            parts.append(text[last:start])
            parts.append(expr.char)
            last = end
        parts.append(text[last:])
        return "".join(parts)
    if isinstance(expr, Remove):
        start, end = _nth_match(matches(expr.regex, text), expr.index, expr.regex)
        return text[:start] + text[end:]
    if isinstance(expr, RemoveAll):
        parts = []
        last = 0
        for start, end in matches(expr.regex, text):
            parts.append(text[last:start])
            last = end
        parts.append(text[last:])
        return "".join(parts)
    if isinstance(expr, Compose):
        return execute_expression(expr.outer, execute_expression(expr.inner, text))
    raise ExecError(f"unknown expression {expr!r}")


def execute(program, text):
    """Concatenation of per-expression results, in order."""
    return "".join(execute_expression(e, text) for e in program.expressions)


# Serialization. The canonical surface prints constants as Const('.') and
# the case argument as PROPER; the parser also accepts the grammar-figure
# spellings ConstStr and PROPER_CASE/PROP_CASE.

def _quote(c):
    return "'\\''" if c == "'" else f"'{c}'"


def _regex_str(r):
    return r if r in REGEX_CLASSES else _quote(r)


def serialize_expression(expr):
    if isinstance(expr, ConstStr):
        return f"Const({_quote(expr.char)})"
    if isinstance(expr, SubStr):
        return f"SubStr({expr.k1}, {expr.k2})"
    if isinstance(expr, GetSpan):
        return (f"GetSpan({_regex_str(expr.r1)}, {expr.i1}, {expr.b1}, "
                f"{_regex_str(expr.r2)}, {expr.i2}, {expr.b2})")
    if isinstance(expr, GetToken):
        return f"GetToken({_regex_str(expr.regex)}, {expr.index})"
    if isinstance(expr, GetUpto):
        return f"GetUpto({_regex_str(expr.regex)})"
    if isinstance(expr, GetFrom):
        return f"GetFrom({_regex_str(expr.regex)})"
    if isinstance(expr, ToCase):
        return f"ToCase({expr.case})"
    if isinstance(expr, Replace):
        return f"Replace({_quote(expr.d1)}, {_quote(expr.d2)})"
    if isinstance(expr, Trim):
        return "Trim()"
    if isinstance(expr, GetFirst):
        return f"GetFirst({_regex_str(expr.regex)}, {expr.index})"
    if isinstance(expr, GetAll):
        return f"GetAll({_regex_str(expr.regex)})"
    if isinstance(expr, Substitute):
        return f"Substitute({_regex_str(expr.regex)}, {expr.index}, {_quote(expr.char)})"
    if isinstance(expr, SubstituteAll):
        return f"SubstituteAll({_regex_str(expr.regex)}, {_quote(expr.char)})"
    if isinstance(expr, Remove):
        return f"Remove({_regex_str(expr.regex)}, {expr.index})"
    if isinstance(expr, RemoveAll):
        return f"RemoveAll({_regex_str(expr.regex)})"
    if isinstance(expr, Compose):
        return (f"Compose({serialize_expression(expr.outer)}, "
                f"{serialize_expression(expr.inner)})")
    raise ValueError(f"unknown expression {expr!r}")


def serialize(program):
    return " | ".join(serialize_expression(e) for e in program.expressions)


# Parsing: a tokenizer plus recursive descent over one expression.
# " | " cannot occur inside an expression ('|' is outside the alphabet),
# so the program splits on it safely.

_NAME_ALIASES = {"ConstStr": "Const", "PROP_CASE": "PROPER_CASE"}
_CASE_ALIASES = {"PROPER_CASE": "PROPER", "PROP_CASE": "PROPER"}


class _Tokens:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] == " ":
            self.pos += 1

    def peek(self):
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take_name(self):
        self._skip_ws()
        m = re.match(r"[A-Za-z_]+", self.text[self.pos:])
        if not m:
            raise ParseError("expected a name", self.pos)
        self.pos += m.end()
        return m.group()

    def take_int(self):
        self._skip_ws()
        m = re.match(r"-?[0-9]+", self.text[self.pos:])
        if not m:
            raise ParseError("expected an integer", self.pos)
        self.pos += m.end()
        return int(m.group())

    def take_char_literal(self):
        self._skip_ws()
        t, p = self.text, self.pos
        if p >= len(t) or t[p] != "'":
            raise ParseError("expected a quoted character", p)
        if t[p:p + 4] == "'\\''":
            self.pos = p + 4
            return "'"
        if p + 2 < len(t) and t[p + 2] == "'":
            c = t[p + 1]
            if c not in ALPHABET:
                raise ParseError(f"character {c!r} outside the alphabet", p + 1)
            self.pos = p + 3
            return c
        raise ParseError("unterminated character literal", p)

    def expect(self, ch):
        self._skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            raise ParseError(f"expected {ch!r}", self.pos)
        self.pos += 1

    def at_end(self):
        self._skip_ws()
        return self.pos >= len(self.text)


def _parse_regex_arg(toks):
    if toks.peek() == "'":
        c = toks.take_char_literal()
        if c not in DELIMITERS:
            raise ParseError(f"{c!r} is not a delimiter", toks.pos)
        return c
    name = toks.take_name()
    name = _NAME_ALIASES.get(name, name)
    if name not in REGEX_CLASSES:
        raise ParseError(f"unknown token class {name}", toks.pos)
    return name


def _parse_index(toks):
    i = toks.take_int()
    if not _valid_index(i):
        raise ParseError(f"index {i} outside [-5,-1] u [1,5]", toks.pos)
    return i


def _parse_position(toks):
    k = toks.take_int()
    if not POSITION_MIN <= k <= POSITION_MAX:
        raise ParseError(f"position {k} outside [{POSITION_MIN},{POSITION_MAX}]", toks.pos)
    return k


def _parse_expression(toks, allow_compose=True):
    name = toks.take_name()
    name = _NAME_ALIASES.get(name, name)
    toks.expect("(")

    def close(result):
        toks.expect(")")
        return result

    if name == "Const":
        return close(ConstStr(toks.take_char_literal()))
    if name == "SubStr":
        k1 = _parse_position(toks)
        toks.expect(",")
        return close(SubStr(k1, _parse_position(toks)))
    if name == "GetSpan":
        r1 = _parse_regex_arg(toks)
        toks.expect(",")
        i1 = _parse_index(toks)
        toks.expect(",")
        b1 = toks.take_name()
        toks.expect(",")
        r2 = _parse_regex_arg(toks)
        toks.expect(",")
        i2 = _parse_index(toks)
        toks.expect(",")
        b2 = toks.take_name()
        if b1 not in BOUNDARIES or b2 not in BOUNDARIES:
            raise ParseError("bad boundary in GetSpan", toks.pos)
        return close(GetSpan(r1, i1, b1, r2, i2, b2))
    if name == "GetToken":
        r = _parse_regex_arg(toks)
        toks.expect(",")
        return close(GetToken(r, _parse_index(toks)))
    if name == "GetUpto":
        return close(GetUpto(_parse_regex_arg(toks)))
    if name == "GetFrom":
        return close(GetFrom(_parse_regex_arg(toks)))
    if name == "ToCase":
        case = toks.take_name()
        case = _CASE_ALIASES.get(case, case)
        if case not in CASES:
            raise ParseError(f"unknown case {case}", toks.pos)
        return close(ToCase(case))
    if name == "Replace":
        d1 = toks.take_char_literal()
        toks.expect(",")
        d2 = toks.take_char_literal()
        if d1 not in DELIMITERS or d2 not in DELIMITERS:
            raise ParseError("Replace arguments must be delimiters", toks.pos)
        return close(Replace(d1, d2))
    if name == "Trim":
        return close(Trim())
    if name == "GetFirst":
        r = _parse_regex_arg(toks)
        toks.expect(",")
        return close(GetFirst(r, _parse_index(toks)))
    if name == "GetAll":
        return close(GetAll(_parse_regex_arg(toks)))
    if name == "Substitute":
        r = _parse_regex_arg(toks)
        toks.expect(",")
        i = _parse_index(toks)
        toks.expect(",")
        return close(Substitute(r, i, toks.take_char_literal()))
    if name == "SubstituteAll":
        r = _parse_regex_arg(toks)
        toks.expect(",")
        return close(SubstituteAll(r, toks.take_char_literal()))
    if name == "Remove":
        r = _parse_regex_arg(toks)
        toks.expect(",")
        return close(Remove(r, _parse_index(toks)))
    if name == "RemoveAll":
        return close(RemoveAll(_parse_regex_arg(toks)))
    if name == "Compose":
        if not allow_compose:
            raise ParseError("Compose cannot nest", toks.pos)
        outer = _parse_expression(toks, allow_compose=False)
        if not isinstance(outer, MODIFICATION_TYPES):
            raise ParseError("Compose outer part must be a modification", toks.pos)
        toks.expect(",")
        inner = _parse_expression(toks, allow_compose=False)
        if not isinstance(inner, MODIFICATION_TYPES + SUBSTRING_TYPES):
            raise ParseError("Compose inner part must be a modification or substring", toks.pos)
        return close(Compose(outer, inner))
    raise ParseError(f"unknown operation {name}", toks.pos)


def parse_expression(text):
    """Parse a single expression; the whole text must be consumed."""
    toks = _Tokens(text)
    expr = _parse_expression(toks)
    if not toks.at_end():
        raise ParseError("trailing input after expression", toks.pos)
    return expr


def parse(text):
    """Parse a full program: expressions joined by ' | '."""
    parts = text.split(" | ")
    if not text.strip():
        raise ParseError("empty program", 0)
    return RfProgram(tuple(parse_expression(part) for part in parts))


# Grammar-uniform random sampling, used by the round-trip and law property
# suites. Dataset-quality sampling (rejection against execution) lives in
# taskgen.

def _sample_regex(rng):
    if rng.random() < 0.5:
        return rng.choice(REGEX_CLASSES)
    return rng.choice(DELIMITERS)


def _sample_index(rng):
    i = rng.randint(1, INDEX_MAX)
    return i if rng.random() < 0.5 else -i


def sample_expression(rng, category=None, allow_compose=True):
    """One random well-formed expression; category in {substring,
    modification, const, compose} or None for uniform."""
    if category is None:
        choices = ["substring", "modification", "const"]
        if allow_compose:
            choices.append("compose")
        category = rng.choice(choices)
    if category == "const":
        return ConstStr(rng.choice(CHARACTERS))
    if category == "compose":
        outer = sample_expression(rng, "modification")
        inner_cat = rng.choice(["modification", "substring"])
        return Compose(outer, sample_expression(rng, inner_cat))
    if category == "substring":
        kind = rng.choice(SUBSTRING_TYPES)
        if kind is SubStr:
            return SubStr(rng.randint(POSITION_MIN, POSITION_MAX),
                          rng.randint(POSITION_MIN, POSITION_MAX))
        if kind is GetSpan:
            return GetSpan(_sample_regex(rng), _sample_index(rng), rng.choice(BOUNDARIES),
                           _sample_regex(rng), _sample_index(rng), rng.choice(BOUNDARIES))
        if kind is GetToken:
            return GetToken(_sample_regex(rng), _sample_index(rng))
        if kind is GetUpto:
            return GetUpto(_sample_regex(rng))
        return GetFrom(_sample_regex(rng))
    kind = rng.choice(MODIFICATION_TYPES)
    if kind is ToCase:
        return ToCase(rng.choice(CASES))
    if kind is Replace:
        return Replace(rng.choice(DELIMITERS), rng.choice(DELIMITERS))
    if kind is Trim:
        return Trim()
    if kind is GetFirst:
        return GetFirst(_sample_regex(rng), _sample_index(rng))
    if kind is GetAll:
        return GetAll(_sample_regex(rng))
    if kind is Substitute:
        return Substitute(_sample_regex(rng), _sample_index(rng), rng.choice(CHARACTERS))
    if kind is SubstituteAll:
        return SubstituteAll(_sample_regex(rng), rng.choice(CHARACTERS))
    if kind is Remove:
        return Remove(_sample_regex(rng), _sample_index(rng))
    return RemoveAll(_sample_regex(rng))


def sample_program(rng, length=None):
    if length is None:
        length = rng.randint(1, 6)
    return RfProgram(tuple(sample_expression(rng) for _ in range(length)))

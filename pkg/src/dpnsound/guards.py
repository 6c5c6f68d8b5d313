"""Typed domains, values and guard expressions.

Values are plain Python objects: ``int`` for integers, ``fractions.Fraction``
for reals, ``bool`` and ``str``.  The undefined value is the singleton
:data:`UNDEFINED`.

Guard concrete syntax::

    guard := disj
    disj  := conj {"||" conj}
    conj  := atom {"&&" atom}
    atom  := "defined(" var ")" | var cmp literal | "(" disj ")"
    var   := IDENT ["'"]
    cmp   := "<" | ">" | "<=" | ">=" | "==" | "!="

A bare identifier is a read occurrence, a primed one (``amount'``) is a
write occurrence.
"""
from __future__ import annotations

import enum
import operator
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Union


class _Undefined:
    __slots__ = ()

    def __repr__(self) -> str:
        return "⊥"

    def __reduce__(self):
        return "UNDEFINED"


UNDEFINED = _Undefined()


class Kind(str, enum.Enum):
    INT = "int"
    REAL = "real"
    BOOL = "bool"
    STRING = "string"

    @property
    def ordered(self) -> bool:
        return self in (Kind.INT, Kind.REAL)


LT, GT, EQ, NE = "<", ">", "==", "!="

_PREDICATES = {
    Kind.INT: frozenset({LT, GT, EQ, NE}),
    Kind.REAL: frozenset({LT, GT, EQ, NE}),
    Kind.BOOL: frozenset({EQ, NE}),
    Kind.STRING: frozenset({EQ}),
}


@dataclass(frozen=True)
class Domain:
    kind: Kind

    @property
    def predicates(self) -> frozenset:
        return _PREDICATES[self.kind]

    def contains(self, value) -> bool:
        return value_matches(self.kind, value)


INT = Domain(Kind.INT)
REAL = Domain(Kind.REAL)
BOOL = Domain(Kind.BOOL)
STRING = Domain(Kind.STRING)

DOMAINS = {d.kind: d for d in (INT, REAL, BOOL, STRING)}


def value_matches(kind: Kind, value) -> bool:
    if kind is Kind.INT:
        return type(value) is int
    if kind is Kind.REAL:
        return isinstance(value, Fraction)
    if kind is Kind.BOOL:
        return type(value) is bool
    return type(value) is str


def coerce_value(kind: Kind, raw):
    """Convert a JSON-ish scalar to a domain value, or raise ValueError."""
    if raw is None:
        return UNDEFINED
    if kind is Kind.INT and type(raw) is int:
        return raw
    if kind is Kind.REAL and type(raw) in (int, float, str) and not isinstance(raw, bool):
        try:
            return Fraction(str(raw))
        except ValueError:
            pass
    if kind is Kind.REAL and isinstance(raw, Fraction):
        return raw
    if kind is Kind.BOOL and type(raw) is bool:
        return raw
    if kind is Kind.STRING and type(raw) is str:
        return raw
    raise ValueError(f"{raw!r} is not a {kind.value} value")


def format_value(value) -> str:
    if value is UNDEFINED:
        return "⊥"
    if type(value) is bool:
        return "true" if value else "false"
    if type(value) is str:
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, Fraction):
        return format_real(value)
    return str(value)


def format_real(value: Fraction) -> str:
    if value.denominator == 1:
        return f"{value.numerator}.0"
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    scaled = value * 10**digits
    sign = "-" if scaled < 0 else ""
    whole = str(abs(scaled.numerator))
    whole = whole.rjust(digits + 1, "0")
    return f"{sign}{whole[:-digits]}.{whole[-digits:]}"


def value_sort_key(value):
    if value is UNDEFINED:
        return (0, 0)
    if type(value) is bool:
        return (1, int(value))
    if type(value) is str:
        return (3, value)
    return (2, value)


@dataclass(frozen=True)
class TypedVariable:
    name: str
    domain: Domain

    @property
    def kind(self) -> Kind:
        return self.domain.kind


class Occ(NamedTuple):
    """A variable occurrence: ``name`` read (``write=False``) or written."""

    name: str
    write: bool = False

    def __str__(self) -> str:
        return self.name + ("'" if self.write else "")


def read(name: str) -> Occ:
    return Occ(name, False)


def written(name: str) -> Occ:
    return Occ(name, True)


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Defined:
    occ: Occ


@dataclass(frozen=True)
class Compare:
    occ: Occ
    op: str
    const: object


@dataclass(frozen=True)
class And:
    left: "Guard"
    right: "Guard"


@dataclass(frozen=True)
class Or:
    left: "Guard"
    right: "Guard"


Guard = Union[Defined, Compare, And, Or]


def conj(parts: Iterable[Guard]) -> Guard | None:
    """Left-nested conjunction of ``parts``; ``None`` for no parts."""
    result = None
    for part in parts:
        result = part if result is None else And(result, part)
    return result


def disj(parts: Iterable[Guard]) -> Guard | None:
    result = None
    for part in parts:
        result = part if result is None else Or(result, part)
    return result


def conjuncts(g: Guard | None) -> list:
    if g is None:
        return []
    if isinstance(g, And):
        return conjuncts(g.left) + conjuncts(g.right)
    return [g]


class GuardError(ValueError):
    pass


class GuardSyntaxError(GuardError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.pos = pos
        self.text = text


class UnknownVariable(GuardError):
    pass


class PredicateNotPermitted(GuardError):
    pass


class ConstantKindMismatch(GuardError):
    pass


class UnboundOccurrence(KeyError):
    pass


# --------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<op>&&|\|\||<=|>=|==|!=|<|>|\(|\)|')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
    """,
    re.VERBOSE,
)

_CMP = {"<", ">", "<=", ">=", "==", "!="}


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise GuardSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Mapping[str, TypedVariable]):
        self.text = text
        self.vars = variables
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.next()
        if tok[0] != "op" or tok[1] != value:
            raise GuardSyntaxError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", self.text, tok[2])
        return tok

    def error(self, message: str, tok=None):
        tok = tok or self.peek()
        return GuardSyntaxError(message, self.text, tok[2])

    def parse(self) -> Guard:
        g = self.disj()
        tok = self.peek()
        if tok[0] != "eof":
            raise self.error(f"unexpected {tok[1]!r}")
        return g

    def disj(self) -> Guard:
        g = self.conj()
        while self.peek()[1] == "||" and self.peek()[0] == "op":
            self.next()
            g = Or(g, self.conj())
        return g

    def conj(self) -> Guard:
        g = self.atom()
        while self.peek()[1] == "&&" and self.peek()[0] == "op":
            self.next()
            g = And(g, self.atom())
        return g

    def atom(self) -> Guard:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "(":
            self.next()
            g = self.disj()
            self.expect(")")
            return g
        if tok[0] == "ident" and tok[1] == "defined" and self.tokens[self.i + 1][1] == "(":
            self.next()
            self.next()
            occ, _ = self.var()
            self.expect(")")
            return Defined(occ)
        if tok[0] != "ident":
            raise self.error(f"expected a variable, found {tok[1] or 'end of input'!r}")
        occ, var = self.var()
        op_tok = self.next()
        if op_tok[0] != "op" or op_tok[1] not in _CMP:
            raise self.error(f"expected a comparison, found {op_tok[1] or 'end of input'!r}", op_tok)
        lit_tok = self.next()
        const = self.literal(lit_tok, var)
        return _make_compare(occ, var, op_tok[1], const)

    def var(self):
        tok = self.next()
        if tok[0] != "ident":
            raise self.error(f"expected a variable, found {tok[1] or 'end of input'!r}", tok)
        name = tok[1]
        if name not in self.vars:
            raise UnknownVariable(f"unknown variable {name!r} at position {tok[2]}")
        primed = self.peek()[0] == "op" and self.peek()[1] == "'"
        if primed:
            self.next()
        return Occ(name, primed), self.vars[name]

    def literal(self, tok, var: TypedVariable):
        kind, text, pos = tok
        if kind == "string":
            value = re.sub(r"\\(.)", r"\1", text[1:-1])
        elif kind == "number":
            if re.fullmatch(r"-?\d+", text):
                value = int(text)
            else:
                value = Fraction(text)
        elif kind == "ident" and text in ("true", "false"):
            value = text == "true"
        else:
            raise GuardSyntaxError(f"expected a literal, found {text or 'end of input'!r}", self.text, pos)
        if var.kind is Kind.REAL and type(value) is int:
            value = Fraction(value)
        if not value_matches(var.kind, value):
            raise ConstantKindMismatch(
                f"constant {text} does not fit {var.name}: {var.kind.value} (position {pos})"
            )
        return value


def _make_compare(occ: Occ, var: TypedVariable, op: str, const) -> Guard:
    kind = var.kind
    if op in ("<=", ">="):
        if not kind.ordered:
            raise PredicateNotPermitted(f"{op!r} is not permitted on {var.name}: {kind.value}")
        strict = LT if op == "<=" else GT
        return Or(Compare(occ, strict, const), Compare(occ, EQ, const))
    if op not in var.domain.predicates:
        raise PredicateNotPermitted(f"{op!r} is not permitted on {var.name}: {kind.value}")
    return Compare(occ, op, const)


def _var_map(variables) -> dict:
    if isinstance(variables, Mapping):
        return dict(variables)
    return {v.name: v for v in variables}


def parse_guard(text: str, variables) -> Guard:
    """Parse ``text`` against the declared ``variables``.

    ``<=``/``>=`` are rewritten into a disjunction of the strict comparison
    and equality.
    """
    return _Parser(text, _var_map(variables)).parse()


def parse_optional_guard(text: str | None, variables) -> Guard | None:
    if text is None or not text.strip() or text.strip() == "true":
        return None
    return parse_guard(text, variables)


# --------------------------------------------------------------------------
# Printing


def format_guard(g: Guard | None) -> str:
    if g is None:
        return "true"
    return _fmt(g)


def _fmt(g: Guard) -> str:
    if isinstance(g, Defined):
        return f"defined({g.occ})"
    if isinstance(g, Compare):
        return f"{g.occ} {g.op} {format_value(g.const)}"
    sep = " && " if isinstance(g, And) else " || "
    left = _fmt(g.left)
    if isinstance(g.left, (And, Or)) and type(g.left) is not type(g):
        left = f"({left})"
    right = _fmt(g.right)
    if isinstance(g.right, (And, Or)):
        right = f"({right})"
    return left + sep + right


# --------------------------------------------------------------------------
# Evaluation

_OPS = {LT: operator.lt, GT: operator.gt, EQ: operator.eq, NE: operator.ne}


def eval_guard(g: Guard | None, beta: Mapping) -> bool:
    """Evaluate ``g`` under ``beta`` (a map from :class:`Occ` to values)."""
    if g is None:
        return True
    if isinstance(g, Compare):
        try:
            x = beta[g.occ]
        except KeyError:
            raise UnboundOccurrence(g.occ) from None
        return x is not UNDEFINED and _OPS[g.op](x, g.const)
    if isinstance(g, Defined):
        try:
            return beta[g.occ] is not UNDEFINED
        except KeyError:
            raise UnboundOccurrence(g.occ) from None
    if isinstance(g, And):
        return eval_guard(g.left, beta) and eval_guard(g.right, beta)
    return eval_guard(g.left, beta) or eval_guard(g.right, beta)


def compile_guard(g: Guard | None):
    """Return a fast ``beta -> bool`` closure equivalent to :func:`eval_guard`.

    Missing occurrences raise :class:`UnboundOccurrence` just like the
    interpreter.
    """
    if g is None:
        return lambda beta: True
    if isinstance(g, Compare):
        occ, const, op = g.occ, g.const, _OPS[g.op]

        def cmp(beta):
            try:
                x = beta[occ]
            except KeyError:
                raise UnboundOccurrence(occ) from None
            return x is not UNDEFINED and op(x, const)

        return cmp
    if isinstance(g, Defined):
        occ = g.occ

        def defined(beta):
            try:
                return beta[occ] is not UNDEFINED
            except KeyError:
                raise UnboundOccurrence(occ) from None

        return defined
    left, right = compile_guard(g.left), compile_guard(g.right)
    if isinstance(g, And):
        return lambda beta: left(beta) and right(beta)
    return lambda beta: left(beta) or right(beta)


def iter_atoms(g: Guard | None):
    if g is None:
        return
    if isinstance(g, (And, Or)):
        yield from iter_atoms(g.left)
        yield from iter_atoms(g.right)
    else:
        yield g


def guard_occurrences(g: Guard | None) -> tuple[set, set]:
    reads, writes = set(), set()
    for atom in iter_atoms(g):
        (writes if atom.occ.write else reads).add(atom.occ.name)
    return reads, writes


def extract_constants(guards: Iterable[Guard | None], var: TypedVariable | str) -> tuple:
    """All constants compared against ``var`` (read or written) in ``guards``, sorted."""
    name = var if isinstance(var, str) else var.name
    found = set()
    for g in guards:
        for atom in iter_atoms(g):
            if isinstance(atom, Compare) and atom.occ.name == name:
                found.add(atom.const)
    return tuple(sorted(found, key=value_sort_key))


def with_mode(g: Guard | None, names: Iterable[str], write: bool) -> Guard | None:
    """Rewrite occurrences of ``names`` to the given mode."""
    names = set(names)
    if g is None:
        return None
    if isinstance(g, Defined):
        return Defined(Occ(g.occ.name, write)) if g.occ.name in names else g
    if isinstance(g, Compare):
        return Compare(Occ(g.occ.name, write), g.op, g.const) if g.occ.name in names else g
    return type(g)(with_mode(g.left, names, write), with_mode(g.right, names, write))

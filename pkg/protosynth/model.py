"""
Finite-domain values, typed set/boolean expressions and their evaluation.

Every other module builds on the types defined here: sort atoms, sets of atoms,
booleans, the expression AST shared by sketches and hole grammars, protocol
states and hole interpretations. All of them are immutable.
"""

from __future__ import annotations

import logging
from collections import ChainMap
from dataclasses import dataclass
from itertools import product
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union as TUnion

from .exceptions import ExprError, MissingArgError, TypeMismatchError, UnboundNameError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SortDecl:
    """A finite sort whose atoms are numbered 1..cardinality."""
    name: str
    cardinality: int


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoolT:
    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class AtomT:
    sort: str

    def __str__(self) -> str:
        return self.sort


@dataclass(frozen=True)
class SetT:
    # sort is None only while an unannotated {} awaits resolution
    sort: Optional[str]

    def __str__(self) -> str:
        return f"set {self.sort}"


ValType = TUnion[BoolT, AtomT, SetT]
BOOL = BoolT()


def unify(a: ValType, b: ValType) -> Optional[ValType]:
    """Return the common type of a and b, treating SetT(None) as any set."""
    if isinstance(a, SetT) and isinstance(b, SetT):
        if a.sort is None:
            return b
        if b.sort is None or a.sort == b.sort:
            return a
        return None
    return a if a == b else None


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoolVal:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class AtomVal:
    sort: str
    index: int

    def __str__(self) -> str:
        return atom_name(self.sort, self.index)


@dataclass(frozen=True)
class SetVal:
    sort: str
    members: frozenset

    def __str__(self) -> str:
        inner = ", ".join(atom_name(self.sort, i) for i in sorted(self.members))
        return "{" + inner + "}"


Value = TUnion[BoolVal, AtomVal, SetVal]
TRUE = BoolVal(True)
FALSE = BoolVal(False)


def atom_name(sort: str, index: int) -> str:
    return f"{sort.lower()}{index}"


def value_type(v: Value) -> ValType:
    if isinstance(v, BoolVal):
        return BOOL
    if isinstance(v, AtomVal):
        return AtomT(v.sort)
    return SetT(v.sort)


def value_to_json(v: Value):
    """JSON form of a value: booleans stay booleans, atoms become names, sets sorted name lists."""
    if isinstance(v, BoolVal):
        return v.value
    if isinstance(v, AtomVal):
        return atom_name(v.sort, v.index)
    return [atom_name(v.sort, i) for i in sorted(v.members)]


def all_values(vt: ValType, sorts: Mapping[str, int]) -> List[Value]:
    """Every value of a type, in a fixed order.

    Booleans are false then true, atoms ascend by index, and sets follow the
    binary counting order of their membership bitmask.
    """
    if isinstance(vt, BoolT):
        return [FALSE, TRUE]
    k = sorts[vt.sort]
    if isinstance(vt, AtomT):
        return [AtomVal(vt.sort, i) for i in range(1, k + 1)]
    return [
        SetVal(vt.sort, frozenset(i + 1 for i in range(k) if mask >> i & 1))
        for mask in range(2 ** k)
    ]


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

Env = Mapping[str, object]


class Expr:
    """Base class of the expression AST."""

    def children(self) -> Tuple["Expr", ...]:
        return ()

    def rebuild(self, children: Sequence["Expr"]) -> "Expr":
        return self

    def _eval(self, env: Env, sorts: Mapping[str, int]) -> Value:
        raise NotImplementedError

    def _type(self, env: Mapping[str, ValType], sorts: Optional[Mapping[str, int]]) -> ValType:
        raise NotImplementedError

    def __str__(self) -> str:
        return format_expr(self)


@dataclass(frozen=True, repr=False)
class EmptySet(Expr):
    sort: Optional[str] = None

    def _eval(self, env, sorts):
        if self.sort is None:
            raise ExprError("the sort of {} was never resolved")
        return SetVal(self.sort, frozenset())

    def _type(self, env, sorts):
        return SetT(self.sort)

    def __repr__(self) -> str:
        return f"EmptySet({self.sort})"


@dataclass(frozen=True, repr=False)
class FullSort(Expr):
    sort: str

    def _eval(self, env, sorts):
        return SetVal(self.sort, frozenset(range(1, sorts[self.sort] + 1)))

    def _type(self, env, sorts):
        if sorts is not None and self.sort not in sorts:
            raise UnboundNameError(f"Unknown sort: {self.sort}")
        return SetT(self.sort)

    def __repr__(self) -> str:
        return f"FullSort({self.sort})"


@dataclass(frozen=True, repr=False)
class BoolLit(Expr):
    value: bool

    def _eval(self, env, sorts):
        return TRUE if self.value else FALSE

    def _type(self, env, sorts):
        return BOOL

    def __repr__(self) -> str:
        return f"BoolLit({self.value})"


@dataclass(frozen=True, repr=False)
class VarRef(Expr):
    name: str

    def _eval(self, env, sorts):
        try:
            return env[self.name]
        except KeyError:
            raise UnboundNameError(f"Unbound name: {self.name}") from None

    def _type(self, env, sorts):
        if self.name not in env:
            raise UnboundNameError(f"Unbound name: {self.name}")
        return env[self.name]

    def __repr__(self) -> str:
        return f"VarRef({self.name})"


@dataclass(frozen=True, repr=False)
class Const(Expr):
    """A literal value. Never produced by the parser."""
    value: Value

    def _eval(self, env, sorts):
        return self.value

    def _type(self, env, sorts):
        return value_type(self.value)

    def __repr__(self) -> str:
        return f"Const({self.value})"


@dataclass(frozen=True, repr=False)
class Placeholder(Expr):
    """A nonterminal occurrence inside a grammar production template."""
    nonterminal: str
    slot: int

    @property
    def key(self) -> str:
        return f"${self.slot}"

    def _eval(self, env, sorts):
        try:
            return env[self.key]
        except KeyError:
            raise UnboundNameError(f"Unfilled placeholder: {self.nonterminal}") from None

    def _type(self, env, sorts):
        if self.key not in env:
            raise UnboundNameError(f"Untyped nonterminal: {self.nonterminal}")
        return env[self.key]

    def __repr__(self) -> str:
        return f"Placeholder({self.nonterminal}, {self.slot})"


@dataclass(frozen=True, repr=False)
class HoleRef(Expr):
    """A use of a hole, ?name(args), legal only as a whole pre-condition or post-clause."""
    name: str
    args: Tuple[str, ...]

    def _eval(self, env, sorts):
        raise ExprError(f"Hole ?{self.name} cannot be evaluated before it is filled")

    def _type(self, env, sorts):
        raise ExprError(f"Hole ?{self.name} used inside an expression")

    def __repr__(self) -> str:
        return f"HoleRef({self.name}, {self.args})"


@dataclass(frozen=True, repr=False)
class Singleton(Expr):
    elem: Expr

    def children(self):
        return (self.elem,)

    def rebuild(self, children):
        return Singleton(children[0])

    def _eval(self, env, sorts):
        a = self.elem._eval(env, sorts)
        return SetVal(a.sort, frozenset((a.index,)))

    def _type(self, env, sorts):
        t = self.elem._type(env, sorts)
        if not isinstance(t, AtomT):
            raise TypeMismatchError(f"{{...}} needs an atom, got {t}")
        return SetT(t.sort)

    def __repr__(self) -> str:
        return f"Singleton({self.elem!r})"


@dataclass(frozen=True, repr=False)
class _Binary(Expr):
    left: Expr
    right: Expr

    symbol = "?"

    def children(self):
        return (self.left, self.right)

    def rebuild(self, children):
        return type(self)(children[0], children[1])

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class _SetOp(_Binary):
    def _apply(self, a: frozenset, b: frozenset) -> frozenset:
        raise NotImplementedError

    def _eval(self, env, sorts):
        a = self.left._eval(env, sorts)
        b = self.right._eval(env, sorts)
        return SetVal(a.sort, self._apply(a.members, b.members))

    def _type(self, env, sorts):
        a = self.left._type(env, sorts)
        b = self.right._type(env, sorts)
        if not isinstance(a, SetT) or not isinstance(b, SetT):
            raise TypeMismatchError(f"'{self.symbol}' needs two sets, got {a} and {b}")
        common = unify(a, b)
        if common is None:
            raise TypeMismatchError(f"'{self.symbol}' mixes {a} and {b}")
        return common


class Union(_SetOp):
    symbol = "union"

    def _apply(self, a, b):
        return a | b


class Inter(_SetOp):
    symbol = "inter"

    def _apply(self, a, b):
        return a & b


class Diff(_SetOp):
    symbol = "minus"

    def _apply(self, a, b):
        return a - b


class In(_Binary):
    symbol = "in"

    def _eval(self, env, sorts):
        a = self.left._eval(env, sorts)
        s = self.right._eval(env, sorts)
        return TRUE if a.index in s.members else FALSE

    def _type(self, env, sorts):
        a = self.left._type(env, sorts)
        s = self.right._type(env, sorts)
        if not isinstance(a, AtomT) or not isinstance(s, SetT) or unify(SetT(a.sort), s) is None:
            raise TypeMismatchError(f"'in' needs an atom and a set of its sort, got {a} and {s}")
        return BOOL


class Eq(_Binary):
    symbol = "="

    def _eval(self, env, sorts):
        a = self.left._eval(env, sorts)
        b = self.right._eval(env, sorts)
        return TRUE if a == b else FALSE

    def _type(self, env, sorts):
        a = self.left._type(env, sorts)
        b = self.right._type(env, sorts)
        if unify(a, b) is None:
            raise TypeMismatchError(f"'=' compares {a} with {b}")
        return BOOL


class SubsetEq(_Binary):
    symbol = "subseteq"

    def _eval(self, env, sorts):
        a = self.left._eval(env, sorts)
        b = self.right._eval(env, sorts)
        return TRUE if a.members <= b.members else FALSE

    def _type(self, env, sorts):
        a = self.left._type(env, sorts)
        b = self.right._type(env, sorts)
        if not isinstance(a, SetT) or not isinstance(b, SetT) or unify(a, b) is None:
            raise TypeMismatchError(f"'subseteq' needs two sets of one sort, got {a} and {b}")
        return BOOL


class _BoolOp(_Binary):
    def _type(self, env, sorts):
        a = self.left._type(env, sorts)
        b = self.right._type(env, sorts)
        if a != BOOL or b != BOOL:
            raise TypeMismatchError(f"'{self.symbol}' needs booleans, got {a} and {b}")
        return BOOL


class And(_BoolOp):
    symbol = "/\\"

    def _eval(self, env, sorts):
        if not self.left._eval(env, sorts).value:
            return FALSE
        return self.right._eval(env, sorts)


class Or(_BoolOp):
    symbol = "\\/"

    def _eval(self, env, sorts):
        if self.left._eval(env, sorts).value:
            return TRUE
        return self.right._eval(env, sorts)


class Implies(_BoolOp):
    symbol = "=>"

    def _eval(self, env, sorts):
        if not self.left._eval(env, sorts).value:
            return TRUE
        return self.right._eval(env, sorts)


@dataclass(frozen=True, repr=False)
class Not(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def rebuild(self, children):
        return Not(children[0])

    def _eval(self, env, sorts):
        return FALSE if self.arg._eval(env, sorts).value else TRUE

    def _type(self, env, sorts):
        t = self.arg._type(env, sorts)
        if t != BOOL:
            raise TypeMismatchError(f"'~' needs a boolean, got {t}")
        return BOOL

    def __repr__(self) -> str:
        return f"Not({self.arg!r})"


@dataclass(frozen=True, repr=False)
class _Quantifier(Expr):
    var: str
    sort: str
    body: Expr

    keyword = "?"

    def children(self):
        return (self.body,)

    def rebuild(self, children):
        return type(self)(self.var, self.sort, children[0])

    def _instances(self, env, sorts) -> Iterator[Value]:
        for i in range(1, sorts[self.sort] + 1):
            yield self.body._eval(ChainMap({self.var: AtomVal(self.sort, i)}, env), sorts)

    def _type(self, env, sorts):
        if sorts is not None and self.sort not in sorts:
            raise UnboundNameError(f"Unknown sort: {self.sort}")
        t = self.body._type(ChainMap({self.var: AtomT(self.sort)}, env), sorts)
        if t != BOOL:
            raise TypeMismatchError(f"'{self.keyword}' body must be boolean, got {t}")
        return BOOL

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.var}, {self.sort}, {self.body!r})"


class Forall(_Quantifier):
    keyword = "forall"

    def _eval(self, env, sorts):
        return TRUE if all(v.value for v in self._instances(env, sorts)) else FALSE


class Exists(_Quantifier):
    keyword = "exists"

    def _eval(self, env, sorts):
        return TRUE if any(v.value for v in self._instances(env, sorts)) else FALSE


_LEAVES = (EmptySet, FullSort, BoolLit, VarRef, Const, Placeholder, HoleRef, Singleton)


# ---------------------------------------------------------------------------
# Operations on expressions
# ---------------------------------------------------------------------------

def type_check(e: Expr, env: Mapping[str, ValType], sorts: Optional[Mapping[str, int]] = None) -> ValType:
    """Return the unique type of e.

    Args:
        e: Expression to type
        env: Types of the free names of e
        sorts: Declared sort cardinalities; when given, sort names are checked too

    Returns:
        The expression's ValType

    Raises:
        UnboundNameError: If e mentions a name env does not bind
        TypeMismatchError: If operand types do not fit an operator
    """
    return e._type(env, sorts)


def evaluate(e: Expr, bindings: Mapping[str, Value], sorts: Mapping[str, int]) -> Value:
    """Evaluate a well-typed expression. Total on well-typed input."""
    return e._eval(bindings, sorts)


def walk(e: Expr) -> Iterator[Expr]:
    """Yield e and every subexpression in preorder."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def size(e: Expr) -> int:
    """Number of AST nodes."""
    return sum(1 for _ in walk(e))


def transform(e: Expr, fn: Callable[[Expr], Optional[Expr]]) -> Expr:
    """Rebuild e bottom-up, replacing every node for which fn returns an expression."""
    kids = e.children()
    if kids:
        new_kids = [transform(k, fn) for k in kids]
        if any(a is not b for a, b in zip(new_kids, kids)):
            e = e.rebuild(new_kids)
    replacement = fn(e)
    return e if replacement is None else replacement


def free_names(e: Expr) -> set:
    """Names referenced by e and not bound by one of its quantifiers."""
    if isinstance(e, VarRef):
        return {e.name}
    if isinstance(e, HoleRef):
        return set(e.args)
    if isinstance(e, _Quantifier):
        return free_names(e.body) - {e.var}
    names = set()
    for k in e.children():
        names |= free_names(k)
    return names


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace free occurrences of names with expressions."""
    if isinstance(e, VarRef):
        return mapping.get(e.name, e)
    if isinstance(e, _Quantifier):
        inner = {k: v for k, v in mapping.items() if k != e.var}
        return e.rebuild([substitute(e.body, inner)])
    kids = e.children()
    if not kids:
        return e
    return e.rebuild([substitute(k, mapping) for k in kids])


def instantiate(template: Expr, children: Sequence[Expr]) -> Expr:
    """Fill every placeholder of a production template with the expression for its slot."""
    return transform(template, lambda n: children[n.slot] if isinstance(n, Placeholder) else None)


def placeholders(template: Expr) -> List[Placeholder]:
    """Placeholders of a template ordered by slot."""
    return sorted((n for n in walk(template) if isinstance(n, Placeholder)), key=lambda p: p.slot)


def conjuncts(e: Expr) -> List[Expr]:
    """Flatten nested conjunctions."""
    if isinstance(e, And):
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def format_expr(e: Expr) -> str:
    """Render an expression in sketch syntax."""
    if isinstance(e, EmptySet):
        return "{}"
    if isinstance(e, FullSort):
        return e.sort
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Placeholder):
        return e.nonterminal
    if isinstance(e, HoleRef):
        return f"?{e.name}({', '.join(e.args)})"
    if isinstance(e, Singleton):
        return "{" + format_expr(e.elem) + "}"
    if isinstance(e, Not):
        return f"~{_operand(e.arg)}"
    if isinstance(e, _Binary):
        return f"{_operand(e.left)} {e.symbol} {_operand(e.right)}"
    if isinstance(e, _Quantifier):
        return f"{e.keyword} {e.var} in {e.sort} : {format_expr(e.body)}"
    raise ExprError(f"Cannot format {e!r}")


def _operand(e: Expr) -> str:
    text = format_expr(e)
    return text if isinstance(e, _LEAVES) else f"({text})"


# ---------------------------------------------------------------------------
# States and interpretations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class State:
    """A valuation of the protocol's state variables, in declaration order."""
    names: Tuple[str, ...]
    values: Tuple[Value, ...]

    def __getitem__(self, name: str) -> Value:
        return self.values[self.names.index(name)]

    def as_dict(self) -> Dict[str, Value]:
        return dict(zip(self.names, self.values))

    def to_json(self) -> Dict[str, object]:
        return {n: value_to_json(v) for n, v in zip(self.names, self.values)}

    def __str__(self) -> str:
        return "[" + ", ".join(f"{n}={v}" for n, v in zip(self.names, self.values)) + "]"


@dataclass(frozen=True)
class Interpretation:
    """Values for the arguments of one hole, in argument order."""
    bindings: Tuple[Tuple[str, Value], ...]

    def as_dict(self) -> Dict[str, Value]:
        return dict(self.bindings)

    def to_json(self) -> Dict[str, object]:
        return {n: value_to_json(v) for n, v in self.bindings}

    def __str__(self) -> str:
        return "[" + ", ".join(f"{n}={v}" for n, v in self.bindings) + "]"


def restrict(s: State, params: Mapping[str, Value], args: Sequence[str]) -> Interpretation:
    """Project a state plus action parameters onto a hole's argument list.

    Raises:
        MissingArgError: If an argument is bound by neither the state nor the parameters
    """
    combined = s.as_dict()
    combined.update(params)
    try:
        return Interpretation(tuple((a, combined[a]) for a in args))
    except KeyError as e:
        raise MissingArgError(f"Hole argument {e.args[0]} is not bound") from e


def interpretations(arg_types: Sequence[Tuple[str, ValType]], sorts: Mapping[str, int]) -> Iterable[Interpretation]:
    """Every interpretation of an argument list, in all_values order."""
    names = [n for n, _ in arg_types]
    for combo in product(*(all_values(t, sorts) for _, t in arg_types)):
        yield Interpretation(tuple(zip(names, combo)))

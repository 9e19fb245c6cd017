"""
Protocol sketches: declarations, validation and pretty-printing.

A sketch is a protocol whose actions may leave pre-conditions and post-clauses
open as holes. Each hole carries an argument list and a grammar of candidate
fill expressions. Sketches are produced by protosynth.parser.parse_sketch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .exceptions import ExprError, UnboundNameError
from .model import (
    BOOL,
    AtomT,
    BoolT,
    EmptySet,
    Expr,
    HoleRef,
    Placeholder,
    SetT,
    SortDecl,
    ValType,
    _Quantifier,
    format_expr,
    free_names,
    size,
    type_check,
    unify,
    walk,
)

logger = logging.getLogger(__name__)


class Fairness(str, Enum):
    NONE = "none"
    WEAK = "weak"
    STRONG = "strong"


class HoleKind(str, Enum):
    PRE = "pre"
    POST = "post"


class PropertyKind(str, Enum):
    ALWAYS = "always"
    EVENTUALLY = "eventually"
    LEADSTO = "leadsto"


@dataclass(frozen=True)
class Diagnostic:
    """A problem found in a sketch, with its source location."""
    line: int
    col: int
    code: str
    message: str

    def format(self, path: Optional[str] = None) -> str:
        prefix = f"{path}:" if path else ""
        return f"{prefix}{self.line}:{self.col}: {self.message}"

    def __str__(self) -> str:
        return self.format()


@dataclass(frozen=True)
class Production:
    """One grammar alternative: a template whose placeholders stand for nonterminals."""
    lhs: str
    template: Expr
    placeholders: Tuple[str, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def base_size(self) -> int:
        """Node count of the template without its placeholders."""
        return size(self.template) - len(self.placeholders)


@dataclass(frozen=True)
class GrammarDecl:
    """A hole grammar.

    Attributes:
        start: start nonterminal (lhs of the first rule)
        nonterminals: nonterminals in order of first appearance as a rule lhs
        rules: productions grouped by nonterminal, source order within a group
        annotations: nonterminal types written in the source
        types: every nonterminal's type, annotated or inferred
    """
    start: str
    nonterminals: Tuple[str, ...]
    rules: Tuple[Production, ...]
    annotations: Tuple[Tuple[str, ValType], ...] = ()
    types: Tuple[Tuple[str, ValType], ...] = field(default=(), compare=False)

    def productions(self, nonterminal: str) -> List[Production]:
        return [p for p in self.rules if p.lhs == nonterminal]

    @cached_property
    def type_map(self) -> Dict[str, ValType]:
        return dict(self.types)


@dataclass(frozen=True)
class HoleDecl:
    """A hole and where it is used.

    Attributes:
        name: hole name
        kind: pre or post (None when the hole is never used)
        args: argument names with their types (type None when the name is unbound)
        grammar: candidate expressions
        action: the action containing the hole
        var: state variable a post-hole assigns
        index: 1-based position in declaration order
    """
    name: str
    kind: Optional[HoleKind]
    args: Tuple[Tuple[str, Optional[ValType]], ...]
    grammar: GrammarDecl
    action: Optional[str]
    var: Optional[str]
    index: int
    result: Optional[ValType] = None
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def arg_names(self) -> Tuple[str, ...]:
        return tuple(n for n, _ in self.args)


@dataclass(frozen=True)
class PostClause:
    """v' = expr, or v' = ?hole(args) when hole is set."""
    var: str
    expr: Optional[Expr] = None
    hole: Optional[str] = None
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ActionDecl:
    name: str
    params: Tuple[Tuple[str, str], ...]
    fairness: Fairness
    fixed_pres: Tuple[Expr, ...]
    pre_holes: Tuple[str, ...]
    post_clauses: Tuple[PostClause, ...]
    line: int = field(default=0, compare=False)
    pre_locs: Tuple[Tuple[int, int], ...] = field(default=(), compare=False)

    def post_for(self, var: str) -> Optional[PostClause]:
        for clause in self.post_clauses:
            if clause.var == var:
                return clause
        return None

    @property
    def post_holes(self) -> Tuple[str, ...]:
        return tuple(c.hole for c in self.post_clauses if c.hole is not None)

    @property
    def is_fair(self) -> bool:
        return self.fairness != Fairness.NONE


@dataclass(frozen=True)
class Property:
    """always(pred), eventually(pred) or leadsto(pred, goal)."""
    kind: PropertyKind
    pred: Expr
    goal: Optional[Expr] = None
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def is_safety(self) -> bool:
        return self.kind == PropertyKind.ALWAYS

    def __str__(self) -> str:
        if self.kind == PropertyKind.LEADSTO:
            return f"leadsto({format_expr(self.pred)}, {format_expr(self.goal)})"
        return f"{self.kind.value}({format_expr(self.pred)})"


@dataclass(frozen=True)
class Sketch:
    """A protocol with holes.

    Attributes:
        sorts: declared sorts
        vars: state variables and their types, in declaration order
        init: boolean expression over the state variables
        actions: actions in declaration order (this order drives instance enumeration)
        holes: holes in declaration order, hole i at position i - 1
    """
    sorts: Tuple[SortDecl, ...]
    vars: Tuple[Tuple[str, ValType], ...]
    init: Expr
    actions: Tuple[ActionDecl, ...]
    holes: Tuple[HoleDecl, ...]
    init_loc: Tuple[int, int] = field(default=(0, 0), compare=False)

    @cached_property
    def sort_sizes(self) -> Dict[str, int]:
        return {s.name: s.cardinality for s in self.sorts}

    @cached_property
    def var_types(self) -> Dict[str, ValType]:
        return dict(self.vars)

    @cached_property
    def var_names(self) -> Tuple[str, ...]:
        return tuple(n for n, _ in self.vars)

    def action(self, name: str) -> ActionDecl:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    def hole(self, name: str) -> HoleDecl:
        for h in self.holes:
            if h.name == name:
                return h
        raise KeyError(name)

    def action_env(self, action: ActionDecl) -> Dict[str, ValType]:
        env = dict(self.vars)
        env.update((p, AtomT(s)) for p, s in action.params)
        return env


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

class _Collector:
    def __init__(self):
        self.items: List[Diagnostic] = []

    def add(self, line: int, col: int, code: str, message: str) -> None:
        self.items.append(Diagnostic(line, col, code, message))


def _check_expr(out: _Collector, e: Expr, env, sorts, expected: Optional[ValType], where: Tuple[int, int]) -> None:
    line, col = where
    for node in walk(e):
        if isinstance(node, HoleRef):
            out.add(line, col, "HoleOutsideAction", f"hole ?{node.name} may only be a whole pre-condition or post-clause")
            return
        if isinstance(node, EmptySet) and node.sort is None:
            out.add(line, col, "TypeMismatch", "cannot infer the sort of {}")
            return
    try:
        t = type_check(e, env, sorts)
    except ExprError as exc:
        code = "UnboundName" if isinstance(exc, UnboundNameError) else "TypeMismatch"
        out.add(line, col, code, str(exc))
        return
    if expected is not None and unify(t, expected) is None:
        out.add(line, col, "TypeMismatch", f"expected {expected}, got {t} in '{format_expr(e)}'")


def _type_declared(vt: Optional[ValType], sorts) -> bool:
    if vt is None:
        return False
    if isinstance(vt, BoolT):
        return True
    return vt.sort in sorts


def _validate_grammar(out: _Collector, hole: HoleDecl, sorts) -> None:
    g = hole.grammar
    where = (hole.line, hole.col)
    if not g.rules:
        out.add(hole.line, 1, "EmptyGrammar", f"hole ?{hole.name} has no grammar rules")
        return
    types = g.type_map
    for nt in g.nonterminals:
        if nt not in types:
            out.add(hole.line, 1, "TypeMismatch", f"cannot infer the type of nonterminal {nt} in ?{hole.name}")
    if hole.result is not None and g.start in types and unify(types[g.start], hole.result) is None:
        out.add(where[0], where[1], "TypeMismatch",
                f"grammar of ?{hole.name} produces {types[g.start]} but the hole needs {hole.result}")
    args = {n: t for n, t in hole.args if t is not None}
    for p in g.rules:
        loc = (p.line, p.col)
        missing = [nt for nt in p.placeholders if nt not in g.nonterminals]
        if missing:
            out.add(p.line, p.col, "UnboundName", f"nonterminal {missing[0]} has no rules")
            continue
        for node in walk(p.template):
            if isinstance(node, _Quantifier) and any(isinstance(n, Placeholder) for n in walk(node.body)):
                out.add(p.line, p.col, "PlaceholderUnderBinder",
                        f"nonterminals cannot appear under '{node.keyword}' in ?{hole.name}")
        unknown = free_names(p.template) - set(hole.arg_names)
        if unknown:
            out.add(p.line, p.col, "UnboundName",
                    f"'{sorted(unknown)[0]}' is not an argument of ?{hole.name}")
            continue
        if any(nt not in types for nt in p.placeholders) or p.lhs not in types:
            continue
        env = dict(args)
        for slot, nt in enumerate(p.placeholders):
            env[f"${slot}"] = types[nt]
        _check_expr(out, p.template, env, sorts, types[p.lhs], loc)


def validate(sk: Sketch, props: Sequence[Property] = ()) -> List[Diagnostic]:
    """Check every well-formedness rule of a sketch and its properties.

    Never raises; an empty list means the sketch is valid.

    Args:
        sk: Sketch to check
        props: Properties to check against the sketch's variables

    Returns:
        Diagnostics ordered by source location
    """
    out = _Collector()
    sorts = {}
    for s in sk.sorts:
        if s.name in sorts:
            out.add(0, 0, "DuplicateName", f"sort {s.name} declared twice")
        if s.cardinality < 1:
            out.add(0, 0, "BadCardinality", f"sort {s.name} needs at least one atom")
        sorts[s.name] = s.cardinality

    seen_vars = set()
    for name, vt in sk.vars:
        if name in seen_vars:
            out.add(0, 0, "DuplicateName", f"variable {name} declared twice")
        seen_vars.add(name)
        if not _type_declared(vt, sorts):
            out.add(0, 0, "UnboundName", f"variable {name} has an undeclared type {vt}")

    var_env = dict(sk.vars)
    _check_expr(out, sk.init, var_env, sorts, BOOL, sk.init_loc)

    uses: Dict[str, List[Tuple[str, int]]] = {}
    action_names = set()
    for a in sk.actions:
        if a.name in action_names:
            out.add(a.line, 1, "DuplicateName", f"action {a.name} declared twice")
        action_names.add(a.name)
        for p, s in a.params:
            if s not in sorts:
                out.add(a.line, 1, "UnboundName", f"parameter {p} of {a.name} has an undeclared sort {s}")
            if p in var_env:
                out.add(a.line, 1, "DuplicateName", f"parameter {p} of {a.name} shadows a state variable")
        env = sk.action_env(a)
        for i, pre in enumerate(a.fixed_pres):
            loc = a.pre_locs[i] if i < len(a.pre_locs) else (a.line, 1)
            _check_expr(out, pre, env, sorts, BOOL, loc)
        for h in a.pre_holes:
            uses.setdefault(h, []).append((a.name, a.line))
        covered = set()
        for clause in a.post_clauses:
            loc = (clause.line, clause.col)
            if clause.var not in var_env:
                out.add(*loc, "UnboundName", f"{a.name} assigns undeclared variable {clause.var}")
                continue
            if clause.var in covered:
                out.add(*loc, "DuplicatePostClause", f"{a.name} assigns {clause.var} twice")
            covered.add(clause.var)
            if clause.hole is not None:
                uses.setdefault(clause.hole, []).append((a.name, clause.line))
            else:
                _check_expr(out, clause.expr, env, sorts, var_env[clause.var], loc)
        for name in sk.var_names:
            if name not in covered:
                out.add(a.line, 1, "MissingPostClause", f"action {a.name} has no post-clause for {name}")

    declared = set()
    for position, hole in enumerate(sk.holes, start=1):
        if hole.name in declared:
            out.add(hole.line, 1, "DuplicateHole", f"hole ?{hole.name} declared twice")
            continue
        declared.add(hole.name)
        if hole.index != position:
            out.add(hole.line, 1, "TypeMismatch", f"hole ?{hole.name} has index {hole.index}, expected {position}")
        sites = uses.get(hole.name, [])
        if not sites:
            out.add(hole.line, 1, "HoleOutsideAction", f"hole ?{hole.name} is never used in an action")
            continue
        if len(sites) > 1:
            out.add(sites[1][1], 1, "DuplicateHole", f"hole ?{hole.name} is used more than once")
        if hole.action != sites[0][0]:
            out.add(hole.line, 1, "HoleOutsideAction", f"hole ?{hole.name} belongs to {hole.action}, used in {sites[0][0]}")
            continue
        action = sk.action(hole.action)
        env = sk.action_env(action)
        bad_arg = False
        for arg, vt in hole.args:
            if arg not in env:
                out.add(hole.line, hole.col, "UnboundName", f"argument {arg} of ?{hole.name} is not bound in {action.name}")
                bad_arg = True
            elif vt != env[arg]:
                out.add(hole.line, hole.col, "TypeMismatch", f"argument {arg} of ?{hole.name} should have type {env[arg]}")
                bad_arg = True
        expected = BOOL if hole.kind == HoleKind.PRE else var_env.get(hole.var)
        if hole.result != expected:
            out.add(hole.line, hole.col, "TypeMismatch", f"hole ?{hole.name} should produce {expected}")
        if not bad_arg:
            _validate_grammar(out, hole, sorts)
    for name, sites in uses.items():
        if name not in declared:
            out.add(sites[0][1], 1, "UnboundName", f"hole ?{name} has no grammar declaration")

    for prop in props:
        loc = (prop.line, prop.col)
        _check_expr(out, prop.pred, var_env, sorts, BOOL, loc)
        if prop.kind == PropertyKind.LEADSTO:
            _check_expr(out, prop.goal, var_env, sorts, BOOL, loc)

    return sorted(out.items, key=lambda d: (d.line, d.col))


# ---------------------------------------------------------------------------
# Pretty-printing
# ---------------------------------------------------------------------------

def format_type(vt: ValType) -> str:
    return str(vt)


def _format_grammar(g: GrammarDecl) -> List[str]:
    annotated = dict(g.annotations)
    lines = []
    for nt in g.nonterminals:
        alts = " | ".join(format_expr(p.template) for p in g.productions(nt))
        head = f"{nt} : {format_type(annotated[nt])}" if nt in annotated else nt
        lines.append(f"  {head} ::= {alts}")
    return lines


def pretty_print(sk: Sketch, props: Iterable[Property] = ()) -> str:
    """Render a sketch and its properties in the .sketch format."""
    holes = {h.name: h for h in sk.holes}
    lines = [f"sort {s.name} {s.cardinality}" for s in sk.sorts]
    lines += [f"var {n} : {format_type(t)}" for n, t in sk.vars]
    lines.append(f"init: {format_expr(sk.init)}")
    for a in sk.actions:
        params = ", ".join(f"{p} : {s}" for p, s in a.params)
        lines.append(f"action {a.name}({params}) fairness {a.fairness.value}")
        lines += [f"  pre: {format_expr(p)}" for p in a.fixed_pres]
        for name in a.pre_holes:
            lines.append(f"  pre: ?{name}({', '.join(holes[name].arg_names) if name in holes else ''})")
        for clause in a.post_clauses:
            if clause.hole is not None:
                args = ", ".join(holes[clause.hole].arg_names) if clause.hole in holes else ""
                lines.append(f"  post: {clause.var}' = ?{clause.hole}({args})")
            else:
                lines.append(f"  post: {clause.var}' = {format_expr(clause.expr)}")
    for h in sk.holes:
        lines.append(f"hole {h.name} grammar:")
        lines += _format_grammar(h.grammar)
    lines += [f"property: {p}" for p in props]
    return "\n".join(lines) + "\n"

"""
Parser for the .sketch protocol DSL.

The format is line oriented. One statement per line, except grammar
alternatives, which may continue on following lines that start with '|'.
'#' starts a comment.

Example:
    sort Node 2
    var vote_yes : set Node
    init: vote_yes = {}
    action VoteYes(n : Node) fairness weak
      post: vote_yes' = ?h1(vote_yes, n)
    hole h1 grammar:
      E ::= {} | {n} | vote_yes | E union E
    property: eventually(vote_yes = Node)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pyparsing as pp

from .exceptions import (
    DuplicateHoleError,
    ExprError,
    HoleOutsideActionError,
    MissingPostClauseError,
    SketchError,
    SketchSyntaxError,
    SketchTypeError,
)
from .model import (
    BOOL,
    And,
    AtomT,
    Diff,
    EmptySet,
    Eq,
    Exists,
    Expr,
    Forall,
    FullSort,
    HoleRef,
    Implies,
    In,
    Inter,
    Not,
    Or,
    Placeholder,
    SetT,
    Singleton,
    SortDecl,
    SubsetEq,
    Union,
    ValType,
    VarRef,
    BoolLit,
    _Quantifier,
    _SetOp,
    transform,
    type_check,
    unify,
    walk,
)
from .sketch import (
    ActionDecl,
    Diagnostic,
    Fairness,
    GrammarDecl,
    HoleDecl,
    HoleKind,
    PostClause,
    Production,
    Property,
    PropertyKind,
    Sketch,
    validate,
)

logger = logging.getLogger(__name__)

pp.ParserElement.enable_packrat()

KEYWORDS = (
    "sort", "var", "init", "action", "pre", "post", "hole", "grammar", "property",
    "fairness", "none", "weak", "strong", "bool", "set", "true", "false",
    "forall", "exists", "in", "union", "inter", "minus", "subseteq",
    "always", "eventually", "leadsto",
)

K = pp.Keyword
S = pp.Suppress

IDENT = (
    pp.Word(pp.alphas + "_", pp.alphanums + "_")
    .add_condition(lambda t: t[0] not in KEYWORDS)
    .set_name("identifier")
)

_BINARY = {
    "inter": Inter,
    "union": Union,
    "minus": Diff,
    "=": Eq,
    "/=": lambda a, b: Not(Eq(a, b)),
    "in": In,
    "subseteq": SubsetEq,
    "/\\": And,
    "\\/": Or,
    "=>": Implies,
}


def _fold_left(tokens):
    items = tokens[0]
    acc = items[0]
    for i in range(1, len(items), 2):
        acc = _BINARY[items[i]](acc, items[i + 1])
    return acc


def _fold_right(tokens):
    items = tokens[0]
    acc = items[-1]
    for i in range(len(items) - 2, 0, -2):
        acc = _BINARY[items[i]](items[i - 1], acc)
    return acc


def _fold_not(tokens):
    items = tokens[0]
    acc = items[-1]
    for _ in items[:-1]:
        acc = Not(acc)
    return acc


def _quantifier(tokens):
    cls = Forall if tokens[0] == "forall" else Exists
    return cls(tokens[1], tokens[2], tokens[3])


def _build_expression() -> pp.ParserElement:
    expr = pp.Forward()
    true_ = K("true").set_parse_action(lambda: BoolLit(True))
    false_ = K("false").set_parse_action(lambda: BoolLit(False))
    empty = (pp.Literal("{") + pp.Literal("}")).set_parse_action(lambda: EmptySet(None))
    singleton = (S("{") + expr + S("}")).set_parse_action(lambda t: Singleton(t[0]))
    hole_ref = (S("?") + IDENT + S("(") + pp.Optional(pp.DelimitedList(IDENT)) + S(")")).set_parse_action(
        lambda t: HoleRef(t[0], tuple(t[1:]))
    )
    quant = ((K("forall") | K("exists")) + IDENT + S(K("in")) + IDENT + S(":") + expr).set_parse_action(_quantifier)
    name = IDENT.copy().add_parse_action(lambda t: VarRef(t[0]))
    operand = true_ | false_ | empty | singleton | hole_ref | quant | name

    expr <<= pp.infix_notation(
        operand,
        [
            (K("inter"), 2, pp.OpAssoc.LEFT, _fold_left),
            (K("union") | K("minus"), 2, pp.OpAssoc.LEFT, _fold_left),
            (pp.Literal("/=") | pp.Regex(r"=(?!>)") | K("in") | K("subseteq"), 2, pp.OpAssoc.LEFT, _fold_left),
            (pp.Literal("~"), 1, pp.OpAssoc.RIGHT, _fold_not),
            (pp.Literal("/\\"), 2, pp.OpAssoc.LEFT, _fold_left),
            (pp.Literal("\\/"), 2, pp.OpAssoc.LEFT, _fold_left),
            (pp.Literal("=>"), 2, pp.OpAssoc.RIGHT, _fold_right),
        ],
    )
    return expr


EXPR = _build_expression()

TYPE_SPEC = pp.Group(K("bool") | (K("set") + IDENT) | IDENT)

SORT_STMT = S(K("sort")) + IDENT("name") + pp.Word(pp.nums)("card")
VAR_STMT = S(K("var")) + IDENT("name") + S(":") + TYPE_SPEC("type")
INIT_STMT = S(K("init")) + S(":") + EXPR("expr")
PARAM = pp.Group(IDENT + S(":") + IDENT)
ACTION_STMT = (
    S(K("action")) + IDENT("name") + S("(") + pp.Group(pp.Optional(pp.DelimitedList(PARAM)))("params") + S(")")
    + pp.Optional(S(K("fairness")) + (K("none") | K("weak") | K("strong"))("fairness"))
)
PRE_STMT = S(K("pre")) + S(":") + EXPR("expr")
POST_STMT = S(K("post")) + S(":") + IDENT("var") + S("'") + S("=") + EXPR("expr")
ALTERNATIVES = pp.Group(pp.DelimitedList(pp.Group(EXPR), delim="|"))
HOLE_STMT = S(K("hole")) + IDENT("name") + S(K("grammar")) + S(":")
RULE_STMT = IDENT("lhs") + pp.Optional(S(":") + TYPE_SPEC("type")) + S("::=") + ALTERNATIVES("alts")
CONT_STMT = S("|") + ALTERNATIVES("alts")
PROPERTY_STMT = S(K("property")) + S(":") + (
    (K("always") | K("eventually"))("kind") + S("(") + EXPR("pred") + S(")")
    | K("leadsto")("kind") + S("(") + EXPR("pred") + S(",") + EXPR("goal") + S(")")
)

_STATEMENTS = {
    "sort": SORT_STMT,
    "var": VAR_STMT,
    "init": INIT_STMT,
    "action": ACTION_STMT,
    "pre": PRE_STMT,
    "post": POST_STMT,
    "hole": HOLE_STMT,
    "property": PROPERTY_STMT,
}


# ---------------------------------------------------------------------------
# Raw declarations, as read from the text
# ---------------------------------------------------------------------------

@dataclass
class _RawRule:
    lhs: str
    annotation: Optional[object]
    alts: List[Tuple[Expr, int, int]]


@dataclass
class _RawHole:
    name: str
    line: int
    rules: List[_RawRule] = field(default_factory=list)


@dataclass
class _RawAction:
    name: str
    params: List[Tuple[str, str]]
    fairness: Fairness
    line: int
    pres: List[Tuple[Expr, int, int]] = field(default_factory=list)
    posts: List[Tuple[str, Expr, int, int]] = field(default_factory=list)


@dataclass
class _RawSketch:
    sorts: List[Tuple[str, int, int]] = field(default_factory=list)
    vars: List[Tuple[str, object, int]] = field(default_factory=list)
    init: Optional[Tuple[Expr, int, int]] = None
    actions: List[_RawAction] = field(default_factory=list)
    holes: List[_RawHole] = field(default_factory=list)
    props: List[Tuple[str, Expr, Optional[Expr], int, int]] = field(default_factory=list)


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].rstrip()


def _body_col(line: str) -> int:
    """1-based column of the first character after the statement's leading 'keyword:'."""
    idx = line.find(":")
    rest = line[idx + 1:]
    return idx + 2 + (len(rest) - len(rest.lstrip()))


class _Reader:
    """Turns lines into raw declarations, collecting syntax diagnostics."""

    def __init__(self):
        self.raw = _RawSketch()
        self.diagnostics: List[Diagnostic] = []
        self._action: Optional[_RawAction] = None
        self._hole: Optional[_RawHole] = None

    def _error(self, line_no: int, col: int, message: str) -> None:
        self.diagnostics.append(Diagnostic(line_no, col, "SyntaxError", message))

    def read(self, text: str) -> _RawSketch:
        for line_no, raw_line in enumerate(text.splitlines(), start=1):
            line = _strip_comment(raw_line)
            if not line.strip():
                continue
            try:
                self._statement(line, line_no)
            except pp.ParseBaseException as e:
                self._error(line_no, e.col, f"syntax error: {e.msg}")
        return self.raw

    def _statement(self, line: str, line_no: int) -> None:
        stripped = line.lstrip()
        indent = len(line) - len(stripped)
        head = stripped.split(None, 1)[0].rstrip(":")
        if stripped.startswith("|"):
            if self._hole is None or not self._hole.rules:
                self._error(line_no, indent + 1, "'|' continuation outside a grammar")
                return
            r = CONT_STMT.parse_string(line, parse_all=True)
            self._hole.rules[-1].alts.extend(self._alts(r.alts, line_no, line))
            return
        stmt = _STATEMENTS.get(head)
        if stmt is None:
            if self._hole is None:
                self._error(line_no, indent + 1, f"unknown statement '{head}'")
                return
            r = RULE_STMT.parse_string(line, parse_all=True)
            annotation = r.type if "type" in r else None
            self._hole.rules.append(_RawRule(r.lhs, annotation, self._alts(r.alts, line_no, line)))
            return

        r = stmt.parse_string(line, parse_all=True)
        if head in ("pre", "post"):
            if self._action is None:
                self._error(line_no, indent + 1, f"'{head}:' outside an action")
                return
            col = _body_col(line)
            if head == "pre":
                self._action.pres.append((r.expr, line_no, col))
            else:
                self._action.posts.append((r.var, r.expr, line_no, col))
            return

        self._action = None
        self._hole = None
        if head == "sort":
            self.raw.sorts.append((r.name, int(r.card), line_no))
        elif head == "var":
            self.raw.vars.append((r.name, r.type, line_no))
        elif head == "init":
            if self.raw.init is not None:
                self._error(line_no, indent + 1, "init declared twice")
            self.raw.init = (r.expr, line_no, _body_col(line))
        elif head == "action":
            params = [(p[0], p[1]) for p in r.params]
            fairness = Fairness(r.fairness) if "fairness" in r else Fairness.NONE
            self._action = _RawAction(r.name, params, fairness, line_no)
            self.raw.actions.append(self._action)
        elif head == "hole":
            self._hole = _RawHole(r.name, line_no)
            self.raw.holes.append(self._hole)
        elif head == "property":
            goal = r.goal if "goal" in r else None
            self.raw.props.append((r.kind, r.pred, goal, line_no, _body_col(line)))

    @staticmethod
    def _alts(alts, line_no: int, line: str) -> List[Tuple[Expr, int, int]]:
        col = line.find("::=") + 4 if "::=" in line else line.find("|") + 2
        return [(a[0], line_no, col) for a in alts]


# ---------------------------------------------------------------------------
# Elaboration: raw declarations to a Sketch
# ---------------------------------------------------------------------------

def _type_of(spec, sorts) -> Optional[ValType]:
    if spec is None:
        return None
    if spec[0] == "bool":
        return BOOL
    if spec[0] == "set":
        return SetT(spec[1])
    return AtomT(spec[0])


def _resolve_names(e: Expr, sort_names, bound: frozenset, nonterminals=()) -> Expr:
    """Turn identifiers that name sorts into FullSort and nonterminals into placeholders."""
    if isinstance(e, VarRef):
        if e.name in bound:
            return e
        if e.name in nonterminals:
            return Placeholder(e.name, -1)
        if e.name in sort_names:
            return FullSort(e.name)
        return e
    if isinstance(e, _Quantifier):
        return e.rebuild([_resolve_names(e.body, sort_names, bound | {e.var}, nonterminals)])
    kids = e.children()
    if not kids:
        return e
    return e.rebuild([_resolve_names(k, sort_names, bound, nonterminals) for k in kids])


def _number_placeholders(template: Expr) -> Tuple[Expr, Tuple[str, ...]]:
    order: List[str] = []

    def number(node):
        if isinstance(node, Placeholder):
            order.append(node.nonterminal)
            return Placeholder(node.nonterminal, len(order) - 1)
        return None

    return transform(template, number), tuple(order)


def _loose_type(e: Expr, env) -> Optional[ValType]:
    try:
        return type_check(e, env)
    except ExprError:
        return None


def settle_sorts(e: Expr, env, expected: Optional[ValType] = None) -> Expr:
    """Give every unannotated {} the set sort its context requires.

    Best effort: subexpressions whose types cannot be determined are left as
    they are and reported later by validation.
    """
    if isinstance(e, EmptySet):
        if e.sort is None and isinstance(expected, SetT) and expected.sort is not None:
            return EmptySet(expected.sort)
        return e
    if isinstance(e, _SetOp):
        own = _loose_type(e, env)
        target = own if own is not None and own.sort is not None else expected
        return e.rebuild([settle_sorts(e.left, env, target), settle_sorts(e.right, env, target)])
    if isinstance(e, (Eq, SubsetEq)):
        lt, rt = _loose_type(e.left, env), _loose_type(e.right, env)
        common = unify(lt, rt) if lt is not None and rt is not None else (lt or rt)
        return e.rebuild([settle_sorts(e.left, env, common), settle_sorts(e.right, env, common)])
    if isinstance(e, In):
        lt = _loose_type(e.left, env)
        target = SetT(lt.sort) if isinstance(lt, AtomT) else None
        return e.rebuild([settle_sorts(e.left, env, None), settle_sorts(e.right, env, target)])
    if isinstance(e, _Quantifier):
        inner = dict(env)
        inner[e.var] = AtomT(e.sort)
        return e.rebuild([settle_sorts(e.body, inner, BOOL)])
    if isinstance(e, (Not, And, Or, Implies)):
        return e.rebuild([settle_sorts(k, env, BOOL) for k in e.children()])
    kids = e.children()
    if not kids:
        return e
    return e.rebuild([settle_sorts(k, env, None) for k in kids])


class _Elaborator:
    def __init__(self, raw: _RawSketch):
        self.raw = raw
        self.diagnostics: List[Diagnostic] = []
        self.sort_names = {name for name, _, _ in raw.sorts}

    def _error(self, line: int, col: int, code: str, message: str) -> None:
        self.diagnostics.append(Diagnostic(line, col, code, message))

    def _expr(self, e: Expr, env, expected, bound=frozenset()) -> Expr:
        return settle_sorts(_resolve_names(e, self.sort_names, bound | frozenset(env)), env, expected)

    def _contains_hole(self, e: Expr, line: int, col: int) -> bool:
        for node in walk(e):
            if isinstance(node, HoleRef):
                self._error(line, col, "HoleOutsideAction",
                            f"hole ?{node.name} may only be a whole pre-condition or post-clause")
                return True
        return False

    def build(self) -> Tuple[Sketch, List[Property]]:
        raw = self.raw
        sorts = tuple(SortDecl(name, card) for name, card, _ in raw.sorts)
        var_list = tuple((name, _type_of(spec, self.sort_names)) for name, spec, _ in raw.vars)
        var_env = dict(var_list)

        if raw.init is None:
            self._error(1, 1, "SyntaxError", "missing init: statement")
            init, init_loc = BoolLit(True), (1, 1)
        else:
            e, line, col = raw.init
            self._contains_hole(e, line, col)
            init, init_loc = self._expr(e, var_env, BOOL), (line, col)

        uses: Dict[str, Tuple[str, HoleKind, Optional[str], Tuple[str, ...], int, int]] = {}
        actions = []
        for ra in raw.actions:
            env = dict(var_env)
            env.update((p, AtomT(s)) for p, s in ra.params)
            fixed, locs, pre_holes = [], [], []
            for e, line, col in ra.pres:
                if isinstance(e, HoleRef):
                    self._use(uses, e, ra.name, HoleKind.PRE, None, line, col)
                    pre_holes.append(e.name)
                elif not self._contains_hole(e, line, col):
                    fixed.append(self._expr(e, env, BOOL))
                    locs.append((line, col))
            posts = []
            for var, e, line, col in ra.posts:
                if isinstance(e, HoleRef):
                    self._use(uses, e, ra.name, HoleKind.POST, var, line, col)
                    posts.append(PostClause(var, None, e.name, line, col))
                elif not self._contains_hole(e, line, col):
                    posts.append(PostClause(var, self._expr(e, env, var_env.get(var)), None, line, col))
            actions.append(ActionDecl(
                ra.name, tuple(ra.params), ra.fairness, tuple(fixed), tuple(pre_holes), tuple(posts),
                ra.line, tuple(locs),
            ))

        holes = []
        declared = set()
        for index, rh in enumerate(raw.holes, start=1):
            if rh.name in declared:
                self._error(rh.line, 1, "DuplicateHole", f"hole ?{rh.name} declared twice")
                continue
            declared.add(rh.name)
            holes.append(self._hole(rh, len(holes) + 1, uses.get(rh.name), var_env, actions))

        props = []
        for kind, pred, goal, line, col in raw.props:
            for e in (pred, goal):
                if e is not None:
                    self._contains_hole(e, line, col)
            pred = self._expr(pred, var_env, BOOL)
            goal = self._expr(goal, var_env, BOOL) if goal is not None else None
            props.append(Property(PropertyKind(kind), pred, goal, line, col))

        sk = Sketch(sorts, var_list, init, tuple(actions), tuple(holes), init_loc)
        return sk, props

    def _use(self, uses, ref: HoleRef, action: str, kind: HoleKind, var, line: int, col: int) -> None:
        if ref.name in uses:
            self._error(line, col, "DuplicateHole", f"hole ?{ref.name} is used more than once")
            return
        uses[ref.name] = (action, kind, var, ref.args, line, col)

    def _hole(self, rh: _RawHole, index: int, use, var_env, actions) -> HoleDecl:
        if use is None:
            action, kind, var, arg_names, line, col = None, None, None, (), rh.line, 1
            env = {}
        else:
            action, kind, var, arg_names, line, col = use
            env = dict(var_env)
            for a in actions:
                if a.name == action:
                    env.update((p, AtomT(s)) for p, s in a.params)
        args = tuple((n, env.get(n)) for n in arg_names)
        if kind == HoleKind.PRE:
            result = BOOL
        elif kind == HoleKind.POST:
            result = var_env.get(var)
        else:
            result = None
        grammar = self._grammar(rh, args, result)
        return HoleDecl(rh.name, kind, args, grammar, action, var, index, result, line, col)

    def _grammar(self, rh: _RawHole, args, result: Optional[ValType]) -> GrammarDecl:
        nonterminals: List[str] = []
        for rule in rh.rules:
            if rule.lhs not in nonterminals:
                nonterminals.append(rule.lhs)
        annotations = []
        for rule in rh.rules:
            if rule.annotation is not None and rule.lhs not in dict(annotations):
                annotations.append((rule.lhs, _type_of(rule.annotation, self.sort_names)))
        arg_env = {n: t for n, t in args if t is not None}

        productions: List[Production] = []
        for nt in nonterminals:
            for rule in rh.rules:
                if rule.lhs != nt:
                    continue
                for e, line, col in rule.alts:
                    if self._contains_hole(e, line, col):
                        continue
                    resolved = _resolve_names(e, self.sort_names, frozenset(arg_env), nonterminals)
                    template, slots = _number_placeholders(resolved)
                    productions.append(Production(nt, template, slots, line, col))

        types: Dict[str, ValType] = dict(annotations)
        start = nonterminals[0] if nonterminals else ""
        if result is not None and start and start not in types:
            types[start] = result
        changed = True
        while changed:
            changed = False
            for p in productions:
                if p.lhs in types or any(nt not in types for nt in p.placeholders):
                    continue
                env = dict(arg_env)
                env.update((f"${i}", types[nt]) for i, nt in enumerate(p.placeholders))
                t = _loose_type(p.template, env)
                if t is not None and not (isinstance(t, SetT) and t.sort is None):
                    types[p.lhs] = t
                    changed = True

        settled = []
        for p in productions:
            if p.lhs in types and all(nt in types for nt in p.placeholders):
                env = dict(arg_env)
                env.update((f"${i}", types[nt]) for i, nt in enumerate(p.placeholders))
                p = Production(p.lhs, settle_sorts(p.template, env, types[p.lhs]), p.placeholders, p.line, p.col)
            settled.append(p)

        ordered_types = tuple((nt, types[nt]) for nt in nonterminals if nt in types)
        return GrammarDecl(start, tuple(nonterminals), tuple(settled), tuple(annotations), ordered_types)


_ERRORS = {
    "SyntaxError": SketchSyntaxError,
    "MissingPostClause": MissingPostClauseError,
    "DuplicateHole": DuplicateHoleError,
    "HoleOutsideAction": HoleOutsideActionError,
}


def error_for(diagnostics: List[Diagnostic]) -> SketchError:
    """The exception matching the first diagnostic's code."""
    return _ERRORS.get(diagnostics[0].code, SketchTypeError)(diagnostics)


def parse_sketch(text: str) -> Tuple[Sketch, List[Property]]:
    """Parse and validate a sketch.

    Args:
        text: Contents of a .sketch file

    Returns:
        The validated sketch and its properties

    Raises:
        SketchError: the subclass matching the first diagnostic; every
            diagnostic is available on the exception
    """
    reader = _Reader()
    raw = reader.read(text)
    if reader.diagnostics:
        raise SketchSyntaxError(reader.diagnostics)

    elaborator = _Elaborator(raw)
    sk, props = elaborator.build()
    problems = sorted(elaborator.diagnostics, key=lambda d: (d.line, d.col)) + validate(sk, props)
    if problems:
        raise error_for(problems)
    logger.debug(f"Parsed sketch: {len(sk.vars)} vars, {len(sk.actions)} actions, {len(sk.holes)} holes")
    return sk, props


def load_sketch(path) -> Tuple[Sketch, List[Property]]:
    """Read and parse a .sketch file.

    Raises:
        SketchSyntaxError: If the file is not valid UTF-8
    """
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        line = data[:e.start].count(b"\n") + 1
        col = e.start - (data.rfind(b"\n", 0, e.start) + 1) + 1
        raise SketchSyntaxError([
            Diagnostic(line, col, "SyntaxError", f"invalid UTF-8 byte 0x{data[e.start]:02x} at offset {e.start}")
        ]) from e
    return parse_sketch(text)

"""Tests for expression classes, candidate picking and refinement."""

import random

import pytest

from oracles import completions, expressions
from protosynth.checker import Completion, check
from protosynth.exceptions import CandidateBudgetError
from protosynth.model import AtomVal, EmptySet, Interpretation, SetVal, evaluate, format_expr
from protosynth.parser import parse_sketch
from protosynth.pruning import EXACT_STUT, PRUNE_FALSE, STANDARD, PruneAtom, PruneOr, generalize, interps_of, satisfies
from protosynth.reduction import (
    GlobalSpace,
    HoleSpace,
    abstract,
    all_interps,
    brute_force_keys,
    enumerate_pass,
    init_search_space,
    pick,
    prune,
)


def node_set(*members):
    return SetVal("Node", frozenset(members))


def h1_interp(vote_yes, n):
    return Interpretation((("vote_yes", vote_yes), ("n", AtomVal("Node", n))))


def closed_space(sk, interps, hole="h1"):
    hs = HoleSpace(sk.hole(hole), sk.sort_sizes)
    hs.add_interps(interps)
    while not hs.closed:
        enumerate_pass(hs, hs.level + 1)
    return hs


@pytest.mark.parametrize("interps, expected", [
    ([], 1),
    ([h1_interp(node_set(), 1)], 2),
    ([h1_interp(node_set(), 1), h1_interp(node_set(), 2)], 2),
    ([h1_interp(node_set(), 1), h1_interp(node_set(1), 2)], 4),
])
def test_class_counts(corpus, interps, expected):
    """Test expressions fall together when no collected interpretation tells them apart"""
    sk, _ = corpus("toy2pc")
    hs = closed_space(sk, interps)
    assert len(hs.classes("E")) == expected


def test_class_representatives_are_smallest_first(corpus):
    sk, _ = corpus("toy2pc")
    hs = closed_space(sk, [h1_interp(node_set(), 1), h1_interp(node_set(1), 2)])
    assert [format_expr(e.expr) for e in hs.classes()] == [
        "{}", "vote_yes", "{n}", "vote_yes union {n}",
    ]


@pytest.mark.parametrize("name", ["toy2pc", "toy2pc_n3"])
@pytest.mark.parametrize("count", [0, 1, 2, 3])
def test_cache_covers_brute_force(corpus, name, count):
    """Test no value vector reachable by brute force is missing from the closed cache"""
    sk, _ = corpus(name)
    hole = sk.hole("h1")
    interps = all_interps(hole, sk.sort_sizes)[:count]
    hs = closed_space(sk, interps)
    oracle = brute_force_keys(hole.grammar, interps, sk.sort_sizes, depth=4)
    cached = {e.values for e in hs.classes("E")}
    assert oracle["E"] <= cached
    assert len(oracle["E"]) == len(cached)


# Pre-condition hole over a flag, a set and a node; each grammar keeps its anchor
# rules and draws the rest at random.
GRAMMAR_SKETCH = """\
sort Node 2
var flag : bool
var s : set Node
init: flag = false /\\ s = {{}}

action Go(n : Node) fairness weak
  pre: ?g(flag, s, n)
  post: flag' = flag
  post: s' = s

hole g grammar:
  B ::= {b}
  S ::= {s}

property: always(true)
"""
BOOL_RULES = ["true", "false", "n in s", "~B", "B /\\ B", "B \\/ B", "n in S", "S = S", "S subseteq S"]
SET_RULES = ["{}", "{n}", "Node", "S union S", "S inter S", "S minus S"]


def random_grammar_sketch(rng):
    b = ["flag"] + rng.sample(BOOL_RULES, rng.randint(1, len(BOOL_RULES)))
    s = ["s"] + rng.sample(SET_RULES, rng.randint(0, len(SET_RULES)))
    return parse_sketch(GRAMMAR_SKETCH.format(b=" | ".join(b), s=" | ".join(s)))[0]


def saturated_keys(grammar, interps, sorts):
    """Brute-force value vectors, deepened until another level adds nothing."""
    depth = 1
    found = brute_force_keys(grammar, interps, sorts, depth)
    while True:
        depth += 1
        deeper = brute_force_keys(grammar, interps, sorts, depth)
        if deeper == found:
            return found
        found = deeper


@pytest.mark.parametrize("seed", range(25))
def test_cache_matches_brute_force_on_random_grammars(seed):
    rng = random.Random(seed)
    sk = random_grammar_sketch(rng)
    hole = sk.hole("g")
    interps = rng.sample(all_interps(hole, sk.sort_sizes), rng.randrange(3))
    hs = closed_space(sk, interps, hole="g")
    oracle = saturated_keys(hole.grammar, interps, sk.sort_sizes)
    for nt in hole.grammar.nonterminals:
        assert {e.values for e in hs.classes(nt)} == oracle[nt], nt


@pytest.mark.parametrize("name, depth", [("button", 4), ("finish", 4), ("toy2pc", 3)])
def test_satisfies_agrees_across_each_class(request, corpus, name, depth):
    """Test a learned constraint keeps or prunes every member of a class alike"""
    sk, props = corpus(name) if name == "toy2pc" else request.getfixturevalue(name)
    sorts = sk.sort_sizes
    (hole,) = sk.holes
    pool = expressions(hole.grammar, depth)[hole.grammar.start]
    learned = 0
    for c in completions(sk, 1 if name == "toy2pc" else 2):
        cex = check(sk, c, props)
        if cex is None:
            continue
        for mode in (STANDARD, EXACT_STUT):
            pc = generalize(cex, c, sk, mode)
            hs = closed_space(sk, interps_of(pc).get(hole.name, []), hole=hole.name)
            verdict = {e.values: satisfies(Completion.of(sk, {hole.name: e.expr}), pc, sorts) for e in hs.classes()}
            for e in pool:
                key = tuple(evaluate(e, a.as_dict(), sorts) for a in hs.interps)
                assert satisfies(Completion.of(sk, {hole.name: e}), pc, sorts) == verdict[key], format_expr(e)
            learned += 1
    assert learned


def test_every_interpretation_separates_all_region_unions(corpus):
    sk, _ = corpus("toy2pc")
    hs = closed_space(sk, all_interps(sk.hole("h1"), sk.sort_sizes))
    assert len(hs.interps) == 8
    assert len(hs.classes()) == 8


def test_adding_known_interps_is_a_no_op(corpus):
    sk, _ = corpus("toy2pc")
    hs = closed_space(sk, [h1_interp(node_set(), 1)])
    assert hs.add_interps([h1_interp(node_set(), 1)]) == 0
    assert hs.closed


def test_first_pick_is_smallest(corpus):
    sk, _ = corpus("toy2pc")
    gs = init_search_space(sk)
    candidate = pick(gs)
    assert candidate.to_json() == {"h1": "{}"}
    assert candidate.exprs == (EmptySet("Node"),)
    assert gs.enumerated == 1


def test_pick_exhausts_when_everything_is_pruned(corpus):
    """Test an unsatisfiable constraint leaves nothing to pick"""
    sk, _ = corpus("toy2pc")
    gs = init_search_space(sk)
    prune(gs, PRUNE_FALSE)
    assert pick(gs) is None
    assert gs.closed
    assert gs.enumerated == 1
    assert gs.pruned == 1


def test_abstract_refines_and_restarts(corpus):
    sk, _ = corpus("toy2pc")
    gs = init_search_space(sk)
    first = pick(gs)
    pc = PruneOr((
        PruneAtom("h1", h1_interp(node_set(), 1), node_set()),
        PruneAtom("h1", h1_interp(node_set(), 2), node_set()),
    ))
    prune(gs, pc)
    abstract(gs, pc)
    assert len(gs.per_hole[0].interps) == 2

    second = pick(gs)
    assert second.to_json() == {"h1": "{n}"}
    assert second.exprs != first.exprs

    abstract(gs, pc)
    assert len(gs.per_hole[0].interps) == 2


def test_no_reduction_keeps_syntactic_duplicates(corpus):
    sk, _ = corpus("toy2pc")
    gs = GlobalSpace(sk, no_reduction=True)
    assert pick(gs).to_json() == {"h1": "{}"}
    assert pick(gs).to_json() == {"h1": "vote_yes"}


def test_candidate_budget(corpus):
    sk, _ = corpus("toy2pc")
    gs = GlobalSpace(sk, no_reduction=True, candidate_budget=1)
    pick(gs)
    with pytest.raises(CandidateBudgetError):
        pick(gs)


def test_sketch_without_holes_has_one_candidate(corpus):
    sk, _ = corpus("toy2pc_completed")
    gs = init_search_space(sk)
    assert pick(gs) == Completion((), ())
    assert pick(gs) is None


def test_cache_json(corpus):
    sk, _ = corpus("toy2pc")
    data = closed_space(sk, [h1_interp(node_set(), 1)]).to_json()
    assert data["hole"] == "h1"
    assert data["interps"] == [{"vote_yes": [], "n": "node1"}]
    assert [c["vector"] for c in data["classes"]] == [[[]], [["node1"]]]

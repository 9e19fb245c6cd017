"""End-to-end tests of the synthesis loop on the corpus."""

import pytest

from conftest import REALIZABLE, UNREALIZABLE
from oracles import passing
from protosynth.cegis import Outcome, ablate, synth
from protosynth.checker import check, reachable_graph
from protosynth.config import SynthConfig


def test_toy2pc_solution(corpus):
    """Test the two-phase commit hole is filled with the voter added to vote_yes"""
    sk, props = corpus("toy2pc")
    result = synth(sk, props)

    assert result.solved
    assert result.completion.to_json() == {"h1": "vote_yes union {n}"}
    assert str(result.completion) == "?h1 := vote_yes union {n}"
    assert result.stats.candidates_enumerated == 4
    assert result.stats.candidates_pruned == 1
    assert result.stats.verifier_calls == 3
    assert result.stats.constraints_added == 2
    assert result.stats.interps_total == 5
    assert check(sk, result.completion, props) is None


def test_toy2pc_ablations(corpus):
    sk, props = corpus("toy2pc")
    base = SynthConfig()

    no_pruning = synth(sk, props, ablate(base, no_pruning=True))
    assert no_pruning.completion.to_json() == {"h1": "vote_yes union {n}"}
    assert no_pruning.stats.verifier_calls == 4
    assert no_pruning.stats.candidates_pruned == 0

    no_reduction = synth(sk, props, ablate(base, no_reduction=True))
    assert no_reduction.completion.to_json() == {"h1": "vote_yes union {n}"}
    assert no_reduction.stats.candidates_enumerated == 17
    assert no_reduction.stats.verifier_calls == 3

    base = synth(sk, props, base)
    assert base.stats.verifier_calls <= no_pruning.stats.verifier_calls
    assert base.stats.candidates_enumerated <= no_reduction.stats.candidates_enumerated


def test_ablate_only_touches_given_flags():
    config = SynthConfig(timeout_seconds=5.0, no_pruning=True)
    changed = ablate(config, no_reduction=True)
    assert changed.no_pruning and changed.no_reduction
    assert changed.timeout_seconds == 5.0
    assert not config.no_reduction


@pytest.mark.parametrize("name", REALIZABLE)
def test_ablations_agree_on_outcome(corpus, name):
    """Test switching off pruning or reduction still finds a verified solution, never with fewer checks or candidates"""
    sk, props = corpus(name)
    base = synth(sk, props)
    no_pruning = synth(sk, props, ablate(SynthConfig(), no_pruning=True))
    no_reduction = synth(sk, props, ablate(SynthConfig(), no_reduction=True))

    assert base.outcome == no_pruning.outcome == no_reduction.outcome == Outcome.SOLUTION
    assert no_pruning.stats.candidates_pruned == 0
    assert base.stats.verifier_calls <= no_pruning.stats.verifier_calls
    assert base.stats.candidates_enumerated <= no_reduction.stats.candidates_enumerated
    for result in (base, no_pruning, no_reduction):
        assert check(sk, result.completion, props) is None


def test_every_check_is_a_candidate(corpus):
    sk, props = corpus("lock_server")
    stats = synth(sk, props).stats
    assert stats.verifier_calls == stats.candidates_enumerated - stats.candidates_pruned
    assert stats.constraints_added == stats.verifier_calls - 1


@pytest.mark.parametrize("name", UNREALIZABLE)
def test_unrealizable(corpus, name):
    """Test each broken variant is reported unrealizable and no small completion passes"""
    sk, props = corpus(name)
    result = synth(sk, props)
    assert result.outcome == Outcome.UNREALIZABLE
    assert result.completion is None
    assert passing(sk, props, 2 if len(sk.holes) <= 1 else 1) == []


def test_unrealizable_without_holes_in_the_way(corpus):
    sk, props = corpus("toy2pc_commit_early")
    result = synth(sk, props)
    assert result.outcome == Outcome.UNREALIZABLE
    assert result.stats.verifier_calls == 1


def test_pruned_grammar_needs_one_check(corpus):
    sk, props = corpus("toy2pc_pruned")
    result = synth(sk, props)
    assert result.outcome == Outcome.UNREALIZABLE
    assert result.stats.verifier_calls == 1


def test_sketch_without_holes(corpus):
    sk, _ = corpus("toy2pc_completed")
    _, toy_props = corpus("toy2pc")
    assert synth(sk, toy_props).completion is not None
    assert str(synth(sk, toy_props).completion) == "(no holes)"

    _, broken = corpus("toy2pc_completed")
    assert synth(sk, broken).outcome == Outcome.UNREALIZABLE


def test_stuttering_is_learned(button):
    sk, props = button
    for exact in (False, True):
        result = synth(sk, props, SynthConfig(exact_stut=exact))
        assert result.solved
        assert check(sk, result.completion, props) is None


def test_candidate_budget_outcome(corpus):
    sk, props = corpus("toy2pc")
    result = synth(sk, props, SynthConfig(candidate_budget=1))
    assert result.outcome == Outcome.BUDGET
    assert result.reason
    assert result.stats.verifier_calls == 1


def test_state_budget_outcome(corpus):
    sk, props = corpus("toy2pc")
    result = synth(sk, props, SynthConfig(state_budget=1))
    assert result.outcome == Outcome.BUDGET


def test_deterministic_stats(corpus):
    sk, props = corpus("lock_server")
    first = synth(sk, props)
    second = synth(sk, props)
    assert first.completion == second.completion
    assert first.stats.classes_per_hole == second.stats.classes_per_hole
    assert first.stats.verifier_calls == second.stats.verifier_calls


@pytest.mark.slow
@pytest.mark.parametrize("name", ["toy2pc_n3", "consensus", "consensus_n3"])
def test_larger_fixtures(corpus, name):
    sk, props = corpus(name)
    result = synth(sk, props)
    assert result.solved
    assert check(sk, result.completion, props) is None


@pytest.mark.slow
def test_distributed_lock_from_scratch(corpus):
    """Test all six holes of the distributed lock are synthesized together"""
    sk, props = corpus("dl")
    result = synth(sk, props, SynthConfig(timeout_seconds=1800))
    assert result.solved
    assert len(result.completion.holes) == 6
    assert check(sk, result.completion, props) is None

    graph = reachable_graph(sk, result.completion)
    start = graph.initial[0]
    owner = graph.states[start]["has_lock"]
    reached, frontier = {start}, [start]
    while frontier:
        for _, j in graph.edges[frontier.pop()]:
            if j not in reached:
                reached.add(j)
                frontier.append(j)
    assert any(graph.states[j]["has_lock"].members - owner.members for j in reached)

"""Shared fixtures: the shipped corpus plus a few tiny protocols written inline."""

from pathlib import Path

import pytest

from protosynth.parser import load_sketch, parse_sketch

CORPUS_DIR = Path(__file__).resolve().parent.parent / "corpus"

REALIZABLE = ["toy2pc", "lock_server"]
UNREALIZABLE = [
    "toy2pc_pruned",
    "toy2pc_no_singleton",
    "toy2pc_blind",
    "toy2pc_no_commit",
    "toy2pc_commit_early",
    "toy2pc_no_param",
    "lock_server_weak_grammar",
    "lock_server_no_semaphore",
    "lock_server_no_disconnect",
    "lock_server_sticky",
    "consensus_weak_grammar",
]

# Press only fires when the hole allows it; Jump is unfair, so with g = false
# the protocol may idle in the initial state forever.
BUTTON = """\
sort Node 1
var on : bool
init: on = false

action Press() fairness weak
  pre: ?g(on)
  post: on' = true

action Jump() fairness none
  pre: true
  post: on' = true

hole g grammar:
  B ::= true | false | on | ~B

property: eventually(on)
"""

# Every node finishes once; with fin = ~(n in done) the finished state is stuck.
FINISH = """\
sort Node 2
var done : set Node
init: done = {}

action Finish(n : Node) fairness weak
  pre: ?fin(done, n)
  post: done' = done union {n}

hole fin grammar:
  B ::= true | false | n in done | ~B

property: eventually(done = Node)
"""

# Finish is enabled every other step of the Flip loop: only strong fairness forces it.
TOGGLE = """\
sort Node 1
var on : bool
var done : bool
init: on = false /\\ done = false

action Flip() fairness weak
  pre: ~done
  post: on' = ~on
  post: done' = done

action Finish() fairness FAIRNESS
  pre: on /\\ ~done
  post: on' = on
  post: done' = true

action Rest() fairness none
  pre: done
  post: on' = on
  post: done' = done

property: eventually(done)
"""

# Nothing is ever enabled.
STUCK = """\
sort Node 1
var done : bool
init: done = false

action Wait() fairness weak
  pre: done
  post: done' = done

property: eventually(done)
"""


def corpus_path(name: str) -> Path:
    return CORPUS_DIR / f"{name}.sketch"


@pytest.fixture
def corpus():
    """Load a corpus sketch by name."""
    def load(name):
        return load_sketch(corpus_path(name))
    return load


@pytest.fixture
def button():
    return parse_sketch(BUTTON)


@pytest.fixture
def finish():
    return parse_sketch(FINISH)


@pytest.fixture
def stuck():
    return parse_sketch(STUCK)


@pytest.fixture
def toggle():
    """Build the toggle protocol with the given fairness for Finish."""
    def build(fairness):
        return parse_sketch(TOGGLE.replace("FAIRNESS", fairness))
    return build

"""Tests for the sketch DSL parser, validation and pretty-printer."""

import pytest

from conftest import CORPUS_DIR, corpus_path
from protosynth.exceptions import (
    DuplicateHoleError,
    HoleOutsideActionError,
    MissingPostClauseError,
    SketchSyntaxError,
    SketchTypeError,
)
from protosynth.model import AtomT, SetT
from protosynth.parser import load_sketch, parse_sketch
from protosynth.sketch import Fairness, HoleKind, PropertyKind, pretty_print, validate

ALL_SKETCHES = sorted(p.stem for p in CORPUS_DIR.glob("*.sketch"))


def toy2pc_text():
    return corpus_path("toy2pc").read_text()


def test_parse_toy2pc(corpus):
    """Test the declarations of the two-phase commit sketch"""
    sk, props = corpus("toy2pc")

    assert sk.sort_sizes == {"Node": 2}
    assert sk.var_names == ("vote_yes", "go_commit", "go_abort")
    assert [a.name for a in sk.actions] == ["GoCommit", "VoteYes"]
    assert sk.action("VoteYes").params == (("n", "Node"),)
    assert sk.action("VoteYes").fairness == Fairness.WEAK
    assert sk.action("VoteYes").post_holes == ("h1",)

    h1 = sk.hole("h1")
    assert h1.kind == HoleKind.POST
    assert h1.var == "vote_yes"
    assert h1.index == 1
    assert h1.args == (("vote_yes", SetT("Node")), ("n", AtomT("Node")))
    assert h1.grammar.start == "E"
    assert len(h1.grammar.rules) == 6
    assert h1.grammar.type_map == {"E": SetT("Node")}

    assert [p.kind for p in props] == [PropertyKind.ALWAYS, PropertyKind.EVENTUALLY, PropertyKind.LEADSTO]
    assert str(props[1]) == "eventually(vote_yes = Node)"


def test_parse_pre_hole(corpus):
    sk, _ = corpus("lock_server")
    hole = sk.hole("connect_pre")
    assert hole.kind == HoleKind.PRE
    assert hole.action == "Connect"
    assert sk.action("Connect").pre_holes == ("connect_pre",)
    assert sk.action("Disconnect").fixed_pres


@pytest.mark.parametrize("name", ALL_SKETCHES)
def test_corpus_is_valid(corpus, name):
    sk, props = corpus(name)
    assert validate(sk, props) == []


@pytest.mark.parametrize("name", ALL_SKETCHES)
def test_pretty_print_round_trip(corpus, name):
    """Test pretty-printed sketches parse back to the same declarations"""
    sk, props = corpus(name)
    again, again_props = parse_sketch(pretty_print(sk, props))
    assert again == sk
    assert again_props == props


def test_pretty_print_grammar_line(corpus):
    sk, props = corpus("toy2pc")
    text = pretty_print(sk, props)
    assert "hole h1 grammar:" in text
    assert "  E ::= {} | vote_yes | {n} | E union E | E inter E | E minus E" in text
    assert "  post: vote_yes' = ?h1(vote_yes, n)" in text


def test_missing_post_clause():
    text = toy2pc_text().replace("  post: go_abort' = go_abort\n", "", 1)
    with pytest.raises(MissingPostClauseError) as exc:
        parse_sketch(text)
    assert exc.value.diagnostics[0].code == "MissingPostClause"
    assert "GoCommit" in exc.value.diagnostics[0].message


def test_duplicate_hole_declaration():
    text = toy2pc_text() + "\nhole h1 grammar:\n  E ::= {}\n"
    with pytest.raises(DuplicateHoleError):
        parse_sketch(text)


def test_hole_outside_action():
    text = toy2pc_text() + "\nproperty: always(?h1(vote_yes, n) = {})\n"
    with pytest.raises(HoleOutsideActionError):
        parse_sketch(text)


def test_syntax_error_location():
    """Test syntax errors report the offending line"""
    text = "sort Node\nvar vote_yes : set Node\n"
    with pytest.raises(SketchSyntaxError) as exc:
        parse_sketch(text)
    assert exc.value.diagnostics[0].line == 1
    assert exc.value.diagnostics[0].format("bad.sketch").startswith("bad.sketch:1:")


def test_names_parse_as_plain_strings(corpus):
    sk, props = corpus("lock_server")
    assert all(type(n) is str for n in sk.var_names)
    assert sk.hole("connect_pre").args[0] == ("semaphore", sk.var_types["semaphore"])
    assert [a.name for a in sk.actions] == ["Connect", "Disconnect"]
    assert sk.action("Connect").params == (("c", "Client"),)


def test_keyword_is_not_a_name():
    text = toy2pc_text().replace("var go_abort : set Node", "var union : set Node", 1)
    with pytest.raises(SketchSyntaxError) as exc:
        parse_sketch(text)
    assert exc.value.diagnostics[0].line == 6


def test_load_rejects_invalid_utf8(tmp_path):
    """Test undecodable bytes are reported as a syntax error at their position"""
    path = tmp_path / "bin.sketch"
    path.write_bytes(b"sort Node 2\n\xff\xfe")
    with pytest.raises(SketchSyntaxError) as exc:
        load_sketch(path)
    assert exc.value.diagnostics[0].format("bin.sketch") == "bin.sketch:2:1: invalid UTF-8 byte 0xff at offset 12"


def test_type_mismatch():
    text = toy2pc_text().replace("init: vote_yes = {}", "init: vote_yes = true", 1)
    with pytest.raises(SketchTypeError) as exc:
        parse_sketch(text)
    assert exc.value.diagnostics[0].code == "TypeMismatch"


def test_unknown_name_in_pre():
    text = toy2pc_text().replace("  pre: vote_yes = Node", "  pre: votes = Node", 1)
    with pytest.raises(SketchTypeError) as exc:
        parse_sketch(text)
    assert exc.value.diagnostics[0].code == "UnboundName"


def test_grammar_names_outside_hole_arguments():
    text = toy2pc_text().replace("E ::= {} | vote_yes | {n}", "E ::= {} | go_commit | {n}", 1)
    with pytest.raises(SketchTypeError) as exc:
        parse_sketch(text)
    assert "not an argument of ?h1" in exc.value.diagnostics[0].message


def test_comments_and_blank_lines_ignored():
    text = "# header\n\n" + toy2pc_text().replace("init:", "init:  ", 1) + "\n# trailing\n"
    sk, props = parse_sketch(text)
    assert len(props) == 3
    assert len(sk.holes) == 1

"""Tests for parsing, typing, normalization, positions, and (de)sugaring."""

import pytest

from goalfold.syntax import (
    FALSE,
    TRUE,
    AmbiguousEquality,
    Atom,
    Conj,
    Disj,
    GoalEq,
    GVar,
    InvalidPosition,
    Struct,
    SyntaxError,
    TermEq,
    TypeClash,
    UndefinedPredicate,
    Var,
    conj,
    conjuncts,
    desugar_program,
    disj,
    disjuncts,
    format_clause,
    format_goal,
    format_position,
    format_program,
    format_term,
    is_ordinary,
    iter_goal_positions,
    local_vars,
    normalize,
    parse_clause_text,
    parse_goal,
    parse_position,
    parse_program,
    replace_at,
    subgoal_at,
    vars_of,
)


def goal(text, program_text=""):
    prog = parse_program(program_text) if program_text else None
    return parse_goal(text, prog)


# --- normalization ---------------------------------------------------------


def test_conjunction_drops_true_units():
    g = Conj((TRUE, Atom("p", (Var("X"),)), TRUE))
    assert normalize(g) == Atom("p", (Var("X"),))


def test_empty_conjunction_is_true():
    assert normalize(Conj(())) == TRUE
    assert normalize(Conj((TRUE, TRUE))) == TRUE


def test_disjunction_drops_false_units():
    g = Disj((FALSE, Atom("p", ()), FALSE))
    assert normalize(g) == Atom("p", ())
    assert normalize(Disj(())) == FALSE


def test_nested_connectives_flatten():
    p, q, r = Atom("p", ()), Atom("q", ()), Atom("r", ())
    g = Conj((Conj((p, q)), r))
    assert normalize(g) == Conj((p, q, r))
    g = Disj((Disj((p, q)), r))
    assert normalize(g) == Disj((p, q, r))


def test_false_survives_inside_conjunction():
    # false is not a unit for conjunction, only for disjunction
    p = Atom("p", ())
    assert normalize(Conj((FALSE, p))) == Conj((FALSE, p))
    assert normalize(Disj((TRUE, p))) == Disj((TRUE, p))


def test_normalize_reaches_goal_arguments():
    inner = Conj((TRUE, Atom("q", ())))
    g = Atom("p", (inner,))
    assert normalize(g) == Atom("p", (Atom("q", ()),))


def test_conjuncts_and_disjuncts_views():
    p, q = Atom("p", ()), Atom("q", ())
    assert conjuncts(Conj((p, q))) == (p, q)
    assert conjuncts(TRUE) == ()
    assert conjuncts(p) == (p,)
    assert disjuncts(FALSE) == ()
    assert disjuncts(Disj((p, q))) == (p, q)


def test_conj_disj_constructors_normalize():
    p = Atom("p", ())
    assert conj([TRUE, p, TRUE]) == p
    assert disj([FALSE]) == FALSE
    assert conj([]) == TRUE


# --- parsing ---------------------------------------------------------------


def test_parse_simple_program():
    prog = parse_program("p(X) :- q(X), r(X).\nq(a).\nr(a).")
    assert sorted(p for p, _ in prog.defined_preds()) == ["p", "q", "r"]


def test_integers_become_successor_terms():
    g = goal("p(2)", "p(X).")
    assert g == Atom("p", (Struct("s", (Struct("s", (Struct("0"),)),)),))
    assert format_term(g.args[0]) == "2"


def test_list_sugar():
    g = goal("p([a, b | T])", "p(X).")
    cell = g.args[0]
    assert cell == Struct(".", (Struct("a"), Struct(".", (Struct("b"), Var("T")))))
    assert format_term(cell) == "[a,b|T]"
    assert format_term(goal("p([])", "p(X).").args[0]) == "[]"


def test_semicolon_parses_as_disjunction():
    g = goal("p ; q, r", "p. q. r.")
    assert g == Disj((Atom("p", ()), Conj((Atom("q", ()), Atom("r", ())))))


def test_parse_errors_are_reported_with_position():
    with pytest.raises(SyntaxError):
        parse_program("p(X :- q.")
    with pytest.raises(SyntaxError):
        parse_program("p(X) q.")
    with pytest.raises(SyntaxError):
        parse_program("p(X) :- q(X)")  # missing final dot


def test_goal_equality_requires_goal_kinds():
    prog = parse_program("h :- p(q).\np(G) :- G = q.\nq :- true.")
    clause = prog.clause_by_id(2)
    assert isinstance(clause.body, GoalEq)
    assert clause.body == GoalEq(GVar("G"), Atom("q", ()))


def test_term_equality_inferred_from_context():
    # the integer pattern in q/1 fixes X to the term kind
    prog = parse_program("p(X, Y) :- X = Y, q(X).\nq(0).")
    body = prog.clause_by_id(1).body
    assert conjuncts(body)[0] == TermEq(Var("X"), Var("Y"))


def test_ambiguous_equality_is_rejected():
    with pytest.raises(AmbiguousEquality):
        parse_program("p(X, Y) :- X = Y.")


def test_type_directive_resolves_ambiguity():
    prog = parse_program(":- type p(term, term).\np(X, Y) :- X = Y.")
    assert isinstance(prog.clause_by_id(1).body, TermEq)
    prog = parse_program(":- type p(bool, bool).\np(X, Y) :- X = Y.")
    assert isinstance(prog.clause_by_id(1).body, GoalEq)


def test_kind_clash_is_rejected():
    # f(X) fed both to a goal slot and to a term slot
    with pytest.raises(TypeClash):
        parse_program("p(X) :- q(f(X)), r(f(X)).\nq(G) :- G.\nr(0).")
    with pytest.raises(TypeClash):
        parse_program(":- type p(term).\np(true).")


def test_one_signature_per_symbol():
    # a/0 cannot be both an atom and a constant under a function symbol
    with pytest.raises(TypeClash):
        parse_program("h :- q(a), r(f(a)).\nq(G) :- G.\nr(0).\na.")


def test_signatures_are_program_wide():
    prog = parse_program("p(G) :- G.\nq :- p(r).\nr.")
    g = parse_goal("p(r)", prog)
    assert g.args[0] == Atom("r", ())


def test_format_round_trips_through_parser():
    text = """
    deepest(l(N), N).
    deepest(t(L, R), X) :- depth(L, DL), depth(R, DR), geq(DL, DR), deepest(L, X).
    depth(l(N), 1).
    geq(X, Y).
    """
    prog = parse_program(text)
    reparsed = parse_program(format_program(prog))
    assert [c.head for c in reparsed.clauses] == [c.head for c in prog.clauses]
    assert [c.body for c in reparsed.clauses] == [c.body for c in prog.clauses]


def test_parse_goal_checks_kinds_against_program():
    prog = parse_program("p(G) :- G.")
    g = parse_goal("p(true)", prog)
    assert g.args == (TRUE,)
    with pytest.raises(TypeClash):
        parse_goal("p(G), q(G)", parse_program("p(G) :- G.\nq(X) :- X = 0."))


def test_parse_clause_text_extends_signature_table():
    prog = parse_program("q(a).")
    clause, symbols = parse_clause_text("p(X) :- q(X).", prog, cid=2)
    assert clause.id == 2
    assert clause.head == Atom("p", (Var("X"),))
    assert ("p", 1) in symbols and ("q", 1) in symbols
    assert ("p", 1) not in dict(prog.symbols)


# --- variables -------------------------------------------------------------


def test_vars_of_collects_both_kinds():
    g = goal("p(X, G), (G = q(Y))", ":- type p(term, bool).\np(X, G) :- G.\nq(Y).")
    assert vars_of(g) == {"X", "G", "Y"}


def test_is_ordinary():
    assert is_ordinary(goal("p(a)", "p(X)."))
    assert not is_ordinary(goal("p(G)", "p(G) :- G."))
    assert not is_ordinary(goal("G", "p(G) :- G."))


# --- positions -------------------------------------------------------------

POS_PROG = """
:- type p(term, bool).
p(X, G) :- q(X), (G = (r(X), s)), (t ; u).
q(a). r(a). s. t. u.
"""


def test_position_round_trip():
    for text in ["root", "c2", "c2/l", "c2/r/c1", "d2", "a1", "c1-3"]:
        assert format_position(parse_position(text)) == text
    assert parse_position("") == ()


def test_subgoal_at_navigates_structure():
    prog = parse_program(POS_PROG)
    body = prog.clause_by_id(1).body
    assert subgoal_at(body, parse_position("c1")) == Atom("q", (Var("X"),))
    eq = subgoal_at(body, parse_position("c2"))
    assert isinstance(eq, GoalEq)
    assert subgoal_at(body, parse_position("c2/l")) == GVar("G")
    assert subgoal_at(body, parse_position("c2/r/c2")) == Atom("s", ())
    assert subgoal_at(body, parse_position("c3/d1")) == Atom("t", ())


def test_span_positions_select_subconjunctions():
    prog = parse_program(POS_PROG)
    body = prog.clause_by_id(1).body
    span = subgoal_at(body, parse_position("c1-2"))
    assert conjuncts(span)[0] == Atom("q", (Var("X"),))
    assert len(conjuncts(span)) == 2
    # spans address a single element too
    assert subgoal_at(body, parse_position("c1-1")) == Atom("q", (Var("X"),))


def test_replace_at_rebuilds_and_normalizes():
    prog = parse_program(POS_PROG)
    body = prog.clause_by_id(1).body
    out = replace_at(body, parse_position("c1"), TRUE)
    assert len(conjuncts(out)) == 2  # q(X) dropped by normalization
    out = replace_at(body, parse_position("c2/r/c1"), TRUE)
    assert subgoal_at(out, parse_position("c2/r")) == Atom("s", ())


def test_replace_at_span_splices():
    g = goal("p, q, r", "p. q. r.")
    out = replace_at(g, parse_position("c1-2"), Atom("w", ()))
    assert out == Conj((Atom("w", ()), Atom("r", ())))


def test_invalid_positions_raise():
    g = goal("p, q", "p. q.")
    with pytest.raises(InvalidPosition):
        subgoal_at(g, parse_position("c5"))
    with pytest.raises(InvalidPosition):
        subgoal_at(g, parse_position("d2"))
    with pytest.raises(InvalidPosition):
        subgoal_at(Atom("p", ()), parse_position("l"))
    # a goal reads as a one-element conjunction or disjunction of itself
    assert subgoal_at(g, parse_position("d1")) == g
    assert subgoal_at(Atom("p", ()), parse_position("c1")) == Atom("p", ())


def test_iter_goal_positions_covers_goal_arguments():
    prog = parse_program(POS_PROG)
    body = prog.clause_by_id(1).body
    seen = {format_position(pos) for pos, _ in iter_goal_positions(body)}
    assert "c2/r/c1" in seen  # inside a goal argument of =
    assert "c3/d2" in seen
    assert "root" in seen


def test_local_vars_excludes_head_and_context():
    prog = parse_program(
        ":- type g(term, term, term, bool).\n"
        "g(T, D, X, G) :- depth(T, D), (G = deepest(T, X)).\n"
        "depth(l(N), 1). deepest(l(N), N)."
    )
    c = prog.clause_by_id(1)
    assert local_vars(c.head, c.body, parse_position("c1")) == set()
    prog = parse_program("p(X) :- q(X, Y), r(Y, Z), s(Z).\nq(a, b). r(a, b). s(a).")
    c = prog.clause_by_id(1)
    # Y escapes into q(X, Y); Z is confined to the c2-3 span
    assert local_vars(c.head, c.body, parse_position("c2")) == set()
    assert local_vars(c.head, c.body, parse_position("c2-3")) == {"Z"}
    assert local_vars(c.head, c.body, parse_position("c1-3")) == {"Y", "Z"}


# --- desugaring ------------------------------------------------------------


def test_multiple_clauses_merge_into_disjunction():
    prog = desugar_program(
        parse_program("p([], Cont) :- Cont.\np([X | Xs], Cont) :- p(Xs, q(X, Cont)).\nq(0, Cont) :- Cont.")
    )
    params, body = prog.preds[("p", 2)]
    assert len(params) == 2
    assert isinstance(body, Disj)
    assert len(body.parts) == 2
    # each branch leads with the head-pattern equality
    first = conjuncts(body.parts[0])
    assert isinstance(first[0], TermEq)


def test_single_clause_with_variable_head_keeps_params():
    prog = desugar_program(parse_program("p(X, G) :- q(X), G.\nq(a)."))
    params, body = prog.preds[("p", 2)]
    assert params == (Var("X"), GVar("G"))
    assert body == Conj((Atom("q", (Var("X"),)), GVar("G")))


def test_repeated_head_variables_become_equalities():
    prog = desugar_program(parse_program("p(X, X)."))
    params, body = prog.preds[("p", 2)]
    assert isinstance(body, TermEq)


def test_goal_valued_head_arguments_desugar_to_goal_equalities():
    prog = desugar_program(parse_program("w(true).\nw(G) :- G."))
    _, body = prog.preds[("w", 1)]
    branch = next(b for b in disjuncts(body) if isinstance(b, GoalEq))
    assert branch.right == TRUE


def test_undefined_predicates_are_rejected():
    with pytest.raises(UndefinedPredicate):
        desugar_program(parse_program("p :- q."))
    with pytest.raises(UndefinedPredicate):
        # undefined predicate inside a goal argument
        desugar_program(parse_program("p(G) :- G = q, G.\nh :- p(r)."))


def test_resugared_clause_hoists_leading_equalities():
    prog = parse_program(":- type g(term, term).\ng(T, D) :- T = l(N), D = 1.")
    assert format_clause(prog.clause_by_id(1)) == "g(l(N),1)."


def test_format_clause_without_resugaring():
    prog = parse_program(":- type g(term).\ng(T) :- T = l(N), q(N).\nq(X).")
    assert format_clause(prog.clause_by_id(1), resugar=False) == "g(T) :- T = l(N), q(N)."

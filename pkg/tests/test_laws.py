"""Tests for replacement laws: catalog, checking, CET decisions, declarations."""

import pytest

from goalfold.errors import GoalfoldError
from goalfold.laws import (
    ARROW,
    BUILTIN_LAWS,
    STRONG,
    STRONGEQ,
    WEAK,
    LawRefuted,
    NonEquationalInput,
    ReplacementLaw,
    SideConditionViolated,
    builtin_laws,
    cet_decide,
    check_law_empirically,
    check_safety_preservation_law,
    declare_law,
    do_not_hold_laws,
    format_law,
    instantiate_eq_drop,
    instantiate_eq_intro,
    instantiate_eq_rearrange,
    instantiate_eq_subst,
    instantiate_renaming,
    parse_law_declaration,
    refutation_program,
    term_eq_leftmove,
)
from goalfold.syntax import (
    FALSE,
    TRUE,
    Atom,
    Conj,
    Disj,
    GoalEq,
    GVar,
    Struct,
    SyntaxError,
    TermEq,
    UndefinedPredicate,
    Var,
    format_goal,
    parse_program,
)

X, Y, Z = Var("X"), Var("Y"), Var("Z")
G = GVar("G")


def f(t):
    return Struct("f", (t,))


def const(name):
    return Struct(name, ())


@pytest.fixture(scope="module")
def fixture_program():
    return refutation_program()


# --- the builtin catalog -----------------------------------------------------


def test_catalog_has_the_thirteen_connective_laws():
    names = {law.name for law in builtin_laws()}
    assert names == {
        "and_true_r",
        "and_true_l",
        "or_true_l",
        "and_false_r",
        "and_false_l",
        "or_false_l",
        "and_idem",
        "or_idem",
        "or_comm",
        "or_and_left",
        "or_and_right",
        "and_or_dist",
        "teq_left",
    }


def test_catalog_kinds_are_pinned():
    kinds = {law.name: law.kind for law in builtin_laws()}
    assert kinds["and_true_r"] == STRONGEQ
    assert kinds["or_true_l"] == WEAK
    assert kinds["and_false_r"] == WEAK
    assert kinds["and_false_l"] == STRONGEQ
    assert kinds["and_idem"] == WEAK
    assert kinds["or_idem"] == STRONGEQ
    assert kinds["or_comm"] == STRONGEQ
    assert kinds["or_and_left"] == STRONGEQ
    assert kinds["and_or_dist"] == WEAK
    assert kinds["teq_left"] == WEAK


def test_builtin_laws_preserve_safety_and_quantify_everything():
    for law in builtin_laws():
        assert law.status == "builtin"
        assert law.preserves_safety is True
        assert law.forall is None
        assert law.quantified == law.free_vars | law.quantified


@pytest.mark.parametrize("law", builtin_laws(), ids=lambda l: l.name)
def test_every_builtin_law_survives_the_empirical_check(fixture_program, law):
    res = check_law_empirically(fixture_program, law)
    assert res.verdict == "verified", res.witness and res.witness.describe()


@pytest.mark.parametrize("law", builtin_laws(), ids=lambda l: l.name)
def test_every_builtin_law_preserves_safety_on_the_fixture(fixture_program, law):
    res = check_safety_preservation_law(fixture_program, law)
    assert res.verdict == "verified", res.witness and res.witness.describe()


# --- the do-not-hold suite ---------------------------------------------------


def test_do_not_hold_names_and_kinds():
    entries = {law.name: law.kind for law in do_not_hold_laws()}
    assert entries == {
        "true_into_or": ARROW,
        "false_into_and": ARROW,
        "teq_right": ARROW,
        "or_over_and": ARROW,
        "geq_intro_trailing": ARROW,
        "geq_move_shared": ARROW,
        "geq_move_unshared": STRONGEQ,
    }


@pytest.mark.parametrize("law", do_not_hold_laws(), ids=lambda l: l.name)
def test_every_do_not_hold_entry_is_refuted(fixture_program, law):
    res = check_law_empirically(fixture_program, law)
    assert res.verdict == "refuted"
    assert res.witness is not None
    # witnesses replay: the describe line carries both outcomes
    text = res.witness.describe()
    assert "gives" in text


def test_moving_truth_into_a_disjunction_diverges(fixture_program):
    law = next(l for l in do_not_hold_laws() if l.name == "true_into_or")
    res = check_law_empirically(fixture_program, law)
    w = res.witness
    assert w.direction == "forward"
    assert w.lhs_outcome == "SUCCESS"
    assert w.rhs_outcome == "FUEL_EXHAUSTED"


def test_goal_equality_hoist_fails_only_in_the_converse_direction(fixture_program):
    law = next(l for l in do_not_hold_laws() if l.name == "geq_move_unshared")
    res = check_law_empirically(fixture_program, law)
    w = res.witness
    assert w.direction == "converse"
    assert w.lhs_outcome == "STUCK"
    assert w.rhs_outcome == "SUCCESS"
    # refuted through the context that duplicates its hole
    assert "w(" in w.lhs_goal


def test_trailing_goal_equality_introduction_gets_stuck(fixture_program):
    law = next(l for l in do_not_hold_laws() if l.name == "geq_intro_trailing")
    res = check_law_empirically(fixture_program, law)
    assert res.witness.rhs_outcome == "STUCK"


# --- the empirical checker on handwritten laws -------------------------------


def test_one_step_consequence_holds_at_arrow_but_not_weak():
    prog = parse_program("p :- q.\nq.\n")
    q, p = Atom("q", ()), Atom("p", ())
    assert check_law_empirically(prog, ReplacementLaw("qp", ARROW, q, p)).verdict == "verified"
    res = check_law_empirically(prog, ReplacementLaw("qpw", WEAK, q, p))
    assert res.verdict == "refuted"
    assert res.witness.lhs_depth == 1 and res.witness.rhs_depth == 2


def test_strong_needs_the_converse_outcome_direction():
    # r diverges, so the forward premise never fires; the converse implication
    # is refuted because p terminates where r does not
    prog = parse_program("p.\nr :- r.\n")
    law = ReplacementLaw("rp", STRONG, Atom("r", ()), Atom("p", ()))
    res = check_law_empirically(prog, law, budget=60, fuel=50)
    assert res.verdict == "refuted"
    assert res.witness.direction == "converse"
    # at arrow the same sides impose no obligation at all
    arrow = ReplacementLaw("rpa", ARROW, Atom("r", ()), Atom("p", ()))
    assert check_law_empirically(prog, arrow, budget=60, fuel=50).verdict == "unknown"


def test_identical_sides_verify_without_sampling(fixture_program):
    law = ReplacementLaw("idg", STRONGEQ, GVar("G1"), GVar("G1"))
    res = check_law_empirically(fixture_program, law)
    assert res.verdict == "verified"
    assert res.samples == 0


def test_checker_reports_unknown_when_nothing_terminates():
    prog = parse_program("p :- p.\nq :- q.\n")
    law = ReplacementLaw("pq", STRONGEQ, Atom("p", ()), Atom("q", ()))
    res = check_law_empirically(prog, law, budget=40, fuel=30)
    assert res.verdict == "unknown"
    assert res.obligations == 0


def test_budget_caps_the_number_of_samples(fixture_program):
    law = BUILTIN_LAWS["or_comm"]
    res = check_law_empirically(fixture_program, law, budget=17)
    assert res.samples == 17


# --- safety preservation ------------------------------------------------------


def test_replacing_a_predicate_by_a_free_goal_variable_breaks_safety():
    prog = parse_program("p :- p.\n")
    law = ReplacementLaw("leak", STRONGEQ, Atom("p", ()), GVar("G"), forall=frozenset())
    res = check_safety_preservation_law(prog, law)
    assert res.verdict == "refuted"
    # the unsafe outcome names the stuck leaf
    assert res.witness.rhs_outcome.startswith("UNSAFE")


# --- CET decisions -------------------------------------------------------------


def test_cet_solved_forms_agree_up_to_local_names():
    r = cet_decide(TermEq(X, f(Y)), TermEq(X, f(Z)), quantified={"X"})
    assert r.verdict == "equivalent"


def test_cet_distinguishes_different_constants():
    r = cet_decide(TermEq(X, const("a")), TermEq(X, const("b")), quantified={"X"})
    assert r.verdict == "not-equivalent"
    assert r.witness == {"X": const("a")}


def test_cet_ignores_disjunct_order():
    lhs = Disj((TermEq(X, const("a")), TermEq(X, const("b"))))
    rhs = Disj((TermEq(X, const("b")), TermEq(X, const("a"))))
    assert cet_decide(lhs, rhs, quantified={"X"}).verdict == "equivalent"


def test_cet_composes_equation_chains():
    lhs = Conj((TermEq(X, f(Y)), TermEq(Y, const("a"))))
    assert cet_decide(lhs, TermEq(X, f(const("a"))), quantified={"X"}).verdict == "equivalent"


def test_cet_rejects_true_versus_false():
    assert cet_decide(TRUE, FALSE, quantified=set()).verdict == "not-equivalent"


def test_cet_identifies_unsatisfiable_sides_with_false():
    assert cet_decide(TermEq(const("a"), const("b")), FALSE, quantified=set()).verdict == "equivalent"


def test_cet_refuses_non_equational_goals():
    with pytest.raises(NonEquationalInput):
        cet_decide(Atom("p", ()), TRUE, quantified=set())


# --- schema instances -----------------------------------------------------------


def test_eq_intro_builds_the_equality_in_front():
    lhs = Atom("q1", (f(X),))
    law = instantiate_eq_intro(lhs, u=f(X), v=Y, rhs_tail=Atom("q1", (Y,)))
    assert law.kind == STRONGEQ
    assert format_goal(law.rhs) == "Y = f(X), q1(Y)"


def test_eq_intro_rejects_a_variable_already_in_use():
    lhs = Atom("q1", (f(X),))
    with pytest.raises(SideConditionViolated):
        instantiate_eq_intro(lhs, u=f(X), v=X, rhs_tail=Atom("q1", (X,)))


def test_eq_intro_rejects_a_tail_that_does_not_restore_the_goal():
    lhs = Atom("q1", (f(X),))
    with pytest.raises(SideConditionViolated):
        instantiate_eq_intro(lhs, u=f(X), v=Y, rhs_tail=Atom("q1", (f(Y),)))


def test_eq_drop_removes_an_unused_binding():
    law = instantiate_eq_drop(TermEq(Y, f(X)), Atom("q1", (X,)))
    assert law.kind == STRONGEQ
    assert format_goal(law.lhs) == "Y = f(X), q1(X)"
    assert format_goal(law.rhs) == "q1(X)"


def test_eq_drop_handles_goal_equalities():
    law = instantiate_eq_drop(GoalEq(G, Atom("p", ())), TRUE)
    assert format_goal(law.rhs) == "true"


def test_eq_drop_rejects_a_variable_still_in_use():
    with pytest.raises(SideConditionViolated):
        instantiate_eq_drop(TermEq(Y, f(X)), Atom("q1", (Y,)))


def test_eq_drop_rejects_a_non_variable_left_side():
    with pytest.raises(SideConditionViolated):
        instantiate_eq_drop(TermEq(f(X), Y), Atom("p", ()))


def test_eq_rearrange_hoists_an_isolated_equality():
    p, q = Atom("p", ()), Atom("q1", (Z,))
    goal = Conj((p, TermEq(Y, f(X)), q))
    law = instantiate_eq_rearrange(goal, TermEq(Y, f(X)), Conj((p, q)))
    assert format_goal(law.rhs) == "Y = f(X), p, q1(Z)"


def test_eq_rearrange_rejects_a_variable_used_elsewhere():
    goal = Conj((TermEq(Y, f(X)), Atom("q1", (Y,))))
    with pytest.raises(SideConditionViolated):
        instantiate_eq_rearrange(goal, TermEq(Y, f(X)), Atom("q1", (Y,)))


def test_eq_rearrange_rejects_an_unrelated_remainder():
    p, q = Atom("p", ()), Atom("q1", (Z,))
    with pytest.raises(SideConditionViolated):
        instantiate_eq_rearrange(Conj((p, q)), TermEq(Y, f(X)), p)


def test_term_equality_left_move_is_weak():
    law = term_eq_leftmove(Atom("p", ()), TermEq(X, f(Y)))
    assert law.kind == WEAK
    assert format_goal(law.lhs) == "p, X = f(Y)"
    assert format_goal(law.rhs) == "X = f(Y), p"


def test_eq_subst_rewrites_forward_and_back():
    law, fwd = instantiate_eq_subst(TermEq(X, f(Y)), Atom("q1", (X,)))
    assert format_goal(fwd) == "q1(f(Y))"
    law, back = instantiate_eq_subst(TermEq(X, f(Y)), Atom("q1", (f(Y),)), back=True)
    assert format_goal(back) == "q1(X)"


def test_eq_subst_through_a_goal_equality():
    p = Atom("p", ())
    law, out = instantiate_eq_subst(GoalEq(G, p), Conj((G, Atom("q1", (Z,)))))
    assert format_goal(out) == "p, q1(Z)"


def test_eq_subst_rejects_an_occurs_goal_equality():
    with pytest.raises(SideConditionViolated):
        instantiate_eq_subst(GoalEq(G, Conj((G, Atom("p", ())))), G)


def test_renaming_replaces_locals_and_guards_captures():
    law, renamed = instantiate_renaming(Atom("q1", (X,)), {"X": "W"})
    assert format_goal(renamed) == "q1(W)"
    assert law.kind == STRONGEQ
    with pytest.raises(SideConditionViolated):
        instantiate_renaming(Conj((Atom("q1", (X,)), Atom("q1", (Y,)))), {"X": "Y"})
    with pytest.raises(SideConditionViolated):
        instantiate_renaming(Conj((Atom("q1", (X,)), Atom("q1", (Y,)))), {"X": "W", "Y": "W"})


# --- declared laws ---------------------------------------------------------------


def test_declare_law_checks_and_records_the_budget():
    prog = parse_program("p :- q.\nq.\n")
    law = declare_law(prog, "qp", ARROW, Atom("q", ()), Atom("p", ()))
    assert law.status == "checked"
    assert law.checked_budget is not None
    assert law.preserves_safety is None


def test_declare_law_rejects_a_depth_increasing_weak_claim():
    prog = parse_program("p :- q.\nq.\n")
    with pytest.raises(LawRefuted):
        declare_law(prog, "qp", WEAK, Atom("q", ()), Atom("p", ()))


def test_declare_law_decides_equational_sides_through_the_term_algebra():
    prog = parse_program("p(a).\n")
    N, N1 = Var("N"), Var("N1")
    lhs = Conj((TermEq(Struct("l", (N,)), Struct("l", (N1,))), TermEq(X, N1)))
    law = declare_law(prog, "peel", STRONGEQ, lhs, TermEq(X, N), forall={"N", "X"})
    assert law.status == "builtin"
    assert law.preserves_safety is True


def test_declare_law_refutes_an_equational_strongeq_mismatch():
    prog = parse_program("p(a).\n")
    with pytest.raises(LawRefuted):
        declare_law(
            prog, "bad", STRONGEQ, TermEq(X, const("a")), TermEq(X, const("b")), forall={"X"}
        )


def test_declare_law_requires_defined_predicates():
    prog = parse_program("q.\n")
    with pytest.raises(UndefinedPredicate):
        declare_law(prog, "ghost", ARROW, Atom("nosuch", ()), Atom("q", ()))


def test_assumed_laws_skip_checking():
    prog = parse_program("p :- p.\n")
    law = declare_law(prog, "brave", STRONGEQ, Atom("p", ()), TRUE, assume=True)
    assert law.status == "assumed"
    assert law.preserves_safety is None


def test_unknown_status_when_no_obligation_fires():
    prog = parse_program("p :- p.\nq :- q.\n")
    law = declare_law(prog, "pq", STRONGEQ, Atom("p", ()), Atom("q", ()), budget=40, fuel=30)
    assert law.status == "unknown"


# --- declaration text ---------------------------------------------------------


def test_parse_law_declaration_round_trip():
    prog = parse_program("p :- q.\nq.\n")
    law = parse_law_declaration("law qp : arrow : q ~> p .", prog)
    assert (law.name, law.kind, law.status) == ("qp", ARROW, "checked")


def test_parse_law_declaration_with_forall_and_context():
    prog = parse_program(":- type w(bool).\nw(K) :- K.\n")
    law = parse_law_declaration("law hole : arrow forall G1 : @C[G1] ~> @C[G1] .", prog)
    assert law.forall == frozenset({"G1"})
    assert law.context_name == "@C"


def test_assume_keyword_admits_without_checking():
    prog = parse_program("p :- p.\n")
    law = parse_law_declaration("assume brave : strongeq : p ~> true .", prog)
    assert law.status == "assumed"


@pytest.mark.parametrize(
    "text",
    [
        "law x : arrow q ~> p .",
        "law x : arrow : q ~> p",
        "law x : arrow forall Z : q ~> p .",
        "law 9x : arrow : q ~> p .",
        "law x : arrow : q .",
        "norm x : arrow : q ~> p .",
    ],
)
def test_malformed_declarations_are_rejected(text):
    prog = parse_program("p :- q.\nq.\n")
    with pytest.raises(GoalfoldError):
        parse_law_declaration(text, prog)


def test_two_context_names_are_rejected():
    law = ReplacementLaw("twoctx", ARROW, Atom("@C", (GVar("G1"),)), Atom("@D", (GVar("G1"),)))
    with pytest.raises(GoalfoldError):
        law.context_name


def test_format_law_shows_kind_and_sides():
    law = BUILTIN_LAWS["teq_left"]
    text = format_law(law)
    assert "teq_left" in text and "~>" in text

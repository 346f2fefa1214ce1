"""Tests for the deduction-tree evaluator and its unification-based variant."""

import pytest

from goalfold.evaluate import (
    FuelExhausted,
    terminating,
    Failure,
    Safe,
    Stuck,
    Success,
    TypeInconsistency,
    Unknown,
    Unsafe,
    default_fuel,
    evaluate,
    is_safe_bounded,
    ld_evaluate,
)
from goalfold.subst import format_subst, thaw_subst
from goalfold.syntax import UndefinedPredicate, format_goal, parse_goal, parse_program


def run(program_text, goal_text, fuel=100_000, ld=False):
    prog = parse_program(program_text)
    g = parse_goal(goal_text, prog)
    f = ld_evaluate if ld else evaluate
    return f(prog, g, fuel=fuel)


def answers_of(outcome):
    return sorted(format_subst(thaw_subst(a)) for a in outcome.answers)


# --- leaves ----------------------------------------------------------------


def test_true_succeeds_with_the_empty_answer():
    r = run("p.", "true")
    assert isinstance(r.outcome, Success)
    assert answers_of(r.outcome) == ["{}"]
    assert r.stats.at_depth == 0 and r.stats.at_total == 0


def test_false_fails():
    r = run("p.", "false")
    assert isinstance(r.outcome, Failure)


def test_unsolvable_term_equality_prunes_the_whole_conjunction():
    # the continuation q is never evaluated, even though q diverges
    r = run("q :- q.", "0 = s(0), q", fuel=50)
    assert isinstance(r.outcome, Failure)
    assert r.stats.at_total == 0


def test_term_equality_threads_bindings():
    r = run("p(1).", "X = 1, p(X)")
    assert isinstance(r.outcome, Success)
    assert answers_of(r.outcome) == ["{X/1}"]


# --- goal equality ---------------------------------------------------------


def test_goal_equality_substitutes_syntactically():
    r = run("a(G) :- (G = p), G.\np :- q.\nq.", "a(G)")
    assert isinstance(r.outcome, Success)
    assert answers_of(r.outcome) == ["{G/p}"]


def test_goal_equality_with_nonvariable_left_side_is_stuck():
    r = run("h :- (p = p), true.\np :- true.", "h")
    assert isinstance(r.outcome, Stuck)
    r = run("h :- (p = p), true.\np :- true.", "h", ld=True)
    assert isinstance(r.outcome, Success)


def test_goal_equality_occurs_restriction():
    # G appears on both sides: no syntactic step is possible
    prog = "h(G) :- (G = (G, p)), true.\np."
    r = run(prog, "h(G)")
    assert isinstance(r.outcome, Stuck)


def test_unbound_goal_variable_call_is_stuck_under_both():
    prog = "w(G) :- G."
    for ld in (False, True):
        r = run(prog, "w(G)", ld=ld)
        assert isinstance(r.outcome, Stuck)
        assert format_goal(r.outcome.goal) == "G"


def test_stuck_dominates_other_outcomes():
    # first branch succeeds, second branch gets stuck
    prog = "h(G) :- true ; G.\np."
    r = run(prog, "h(G)")
    assert isinstance(r.outcome, Stuck)


def test_restricted_and_unification_semantics_disagree_on_program_pairs():
    q1 = "h :- p(q).\np(G) :- G = q.\nq :- s.\ns :- false."
    q2 = "h :- p(s).\np(G) :- G = q.\nq :- s.\ns :- false."
    assert isinstance(run(q1, "h").outcome, Stuck)
    assert isinstance(run(q2, "h").outcome, Stuck)
    assert isinstance(run(q1, "h", ld=True).outcome, Success)
    assert isinstance(run(q2, "h", ld=True).outcome, Failure)


# --- clause application and answers ----------------------------------------


def test_clause_application_restricts_answers_to_call_variables():
    r = run("p(X) :- q(X, Y).\nq(a, b).", "p(Z)")
    assert answers_of(r.outcome) == ["{Z/a}"]


def test_multiple_clauses_explore_all_branches():
    r = run("p(a).\np(b).", "p(X)")
    assert answers_of(r.outcome) == ["{X/a}", "{X/b}"]


def test_answers_union_up_to_duplicates():
    r = run("p(a).\np(a).", "p(X)")
    assert answers_of(r.outcome) == ["{X/a}"]


def test_failure_needs_every_branch_to_fail():
    r = run("p(a) :- false.\np(b) :- 0 = 1.", "p(X)")
    assert isinstance(r.outcome, Failure)


def test_goal_arguments_pass_through_calls():
    prog = """
    p([], Cont) :- Cont.
    p([X | Xs], Cont) :- p(Xs, q(X, Cont)).
    q(0, Cont) :- Cont.
    """
    r = run(prog, "p([0,0,0], true)")
    assert isinstance(r.outcome, Success)
    assert isinstance(run(prog, "p([0,1,0], true)").outcome, Failure)


def test_undefined_predicate_is_an_error():
    with pytest.raises(UndefinedPredicate):
        run("p :- q(0).\nq(1).", "r(0)")


def test_goal_argument_kind_mismatch_is_an_error():
    prog = parse_program("p(G) :- G.\nq.")
    from goalfold.syntax import Atom, Struct

    bad = Atom("p", (Struct("a"),))  # term where the slot wants a goal
    with pytest.raises(TypeInconsistency):
        evaluate(prog, bad)


# --- universal termination and fuel ----------------------------------------


def test_whole_tree_is_explored_under_both_semantics():
    prog = "p(0).\np(X) :- p(X)."
    for ld in (False, True):
        r = run(prog, "p(0)", fuel=2_000, ld=ld)
        assert isinstance(r.outcome, FuelExhausted)


def test_fuel_exhaustion_reports_partial_stats():
    r = run("p :- p.", "p", fuel=7)
    assert isinstance(r.outcome, FuelExhausted)
    assert r.stats.fuel_used <= 7


def test_terminating_outcomes():
    assert terminating(Success(frozenset()))
    assert terminating(Failure())
    assert not terminating(Stuck(parse_goal("true", parse_program("p."))))
    assert not terminating(FuelExhausted())


def test_default_fuel_reads_environment(monkeypatch):
    monkeypatch.setenv("GOALFOLD_FUEL", "1234")
    assert default_fuel() == 1234
    monkeypatch.delenv("GOALFOLD_FUEL")
    assert default_fuel() == 100_000


# --- proof statistics ------------------------------------------------------


def test_depth_counts_clause_applications_on_one_path():
    prog = "p(0).\np(s(X)) :- p(X)."
    r = run(prog, "p(3)")
    assert r.stats.at_depth == 4
    assert r.stats.at_total == 4


def test_at_total_sums_across_branches():
    prog = "p :- q ; r.\nq.\nr."
    r = run(prog, "p")
    # one application for p, one per branch
    assert r.stats.at_total == 3
    assert r.stats.at_depth == 2


def test_tree_size_counts_all_nodes():
    r = run("p.", "true")
    assert r.stats.tree_size == 1
    r = run("p.", "p")
    assert r.stats.tree_size == 2


def test_disjunct_order_does_not_change_answers():
    prog1 = "h(X) :- p(X) ; q(X).\np(a).\nq(b)."
    prog2 = "h(X) :- q(X) ; p(X).\np(a).\nq(b)."
    r1 = run(prog1, "h(X)")
    r2 = run(prog2, "h(X)")
    assert answers_of(r1.outcome) == answers_of(r2.outcome)


def test_evaluation_is_deterministic():
    prog = "p(X) :- q(X), r(X).\nq(a). q(b).\nr(a). r(b)."
    runs = [run(prog, "p(X)") for _ in range(3)]
    assert len({frozenset(r.outcome.answers) for r in runs}) == 1
    assert len({r.stats for r in runs}) == 1


# --- trace -----------------------------------------------------------------


def test_trace_records_rule_applications():
    prog = parse_program("p :- true.")
    r = evaluate(prog, parse_goal("p", prog), capture_trace=True)
    rules = [step[0] for step in r.trace]
    assert rules[0] == "at"
    assert "tt" in rules


# --- safety ----------------------------------------------------------------


def test_is_safe_bounded():
    prog = parse_program("p(X) :- q(X).\nq(a).")
    verdict = is_safe_bounded(prog, parse_goal("p(X)", prog), fuel=1_000)
    assert isinstance(verdict, Safe)

    prog = parse_program("w(G) :- G.\nh :- w(G).")
    verdict = is_safe_bounded(prog, parse_goal("h", prog), fuel=1_000)
    assert isinstance(verdict, Unsafe)
    assert verdict.witness is not None

    prog = parse_program("p :- p.")
    verdict = is_safe_bounded(prog, parse_goal("p", prog), fuel=50)
    assert isinstance(verdict, Unknown)

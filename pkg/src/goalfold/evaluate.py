"""Evaluator for the goal-argument language.

Judgments P |- g -> A are computed by exploring the full deduction tree
(universal termination: disjunction explores every branch).  Rules, applied
to the leftmost conjunct:

  true            one answer, the identity            (leaf)
  false , g       no answers                          (leaf)
  t1 = t2 , g     no answers if non-unifiable (leaf); otherwise continue
                  with the mgu applied to the continuation
  (G = g1) , g2   replace G by g1 syntactically in the continuation;
                  requires G to be a goal variable not occurring in g1,
                  otherwise the goal is stuck
  p(u...) , g     continue with the definition body, actuals substituted
                  for formals literally (no head unification)
  (d1;...;dk), g  explore each di , g and join the answers

A goal is stuck when its leftmost conjunct is an unbound goal variable or a
goal equality whose left side is not a goal variable or occurs in its right
side.  `ld_evaluate` differs in exactly one point: goal equality unifies the
two sides as trees instead of the one-way syntactic replacement.

Fuel bounds the number of rule applications.  Outcome precedence is
Stuck > FuelExhausted > answers; exploration is leftmost-first, so which of
a stuck leaf or fuel exhaustion is reported is deterministic.  Statistics:
`at_depth` is the maximum number of definition steps on a root-to-leaf path,
`tree_size` counts tree nodes, `at_total` counts all definition steps, and
`fuel_used` counts rule applications.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

from .errors import GoalfoldError
from .subst import (
    FrozenSubst,
    Subst,
    _ordered_vars,
    _strip_suffix,
    apply,
    freeze_subst,
    mgu,
)
from .syntax import (
    Atom,
    Conj,
    Disj,
    EvalProgram,
    GFalse,
    GTrue,
    GVar,
    Goal,
    GoalEq,
    Program,
    TermEq,
    UndefinedPredicate,
    Var,
    conj,
    conjuncts,
    desugar_program,
    format_goal,
    is_goal,
    is_term,
    iter_goal_positions,
    normalize,
)


class TypeInconsistency(GoalfoldError):
    """A call binds a term parameter to a goal or vice versa."""


DEFAULT_FUEL = 100_000
_TRACE_CAP = 20_000
_NUM_SUFFIX = re.compile(r"^(.*?)(\d+)$")


def default_fuel() -> int:
    """Default rule-application budget; GOALFOLD_FUEL overrides it."""
    raw = os.environ.get("GOALFOLD_FUEL")
    if raw:
        try:
            return int(raw)
        except ValueError:
            pass
    return DEFAULT_FUEL


# ---------------------------------------------------------------------------
# Outcomes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Success:
    answers: frozenset[FrozenSubst]

    @property
    def name(self) -> str:
        return "SUCCESS"


@dataclass(frozen=True)
class Failure:
    @property
    def name(self) -> str:
        return "FAILURE"


@dataclass(frozen=True)
class Stuck:
    goal: Goal

    @property
    def name(self) -> str:
        return "STUCK"


@dataclass(frozen=True)
class FuelExhausted:
    @property
    def name(self) -> str:
        return "FUEL_EXHAUSTED"


Outcome = Union[Success, Failure, Stuck, FuelExhausted]


def terminating(outcome: Outcome) -> bool:
    return isinstance(outcome, (Success, Failure))


@dataclass(frozen=True)
class ProofStats:
    at_depth: int
    tree_size: int
    at_total: int
    fuel_used: int


class EvalResult(NamedTuple):
    outcome: Outcome
    stats: ProofStats
    trace: Optional[list[tuple[str, str]]]


# is_safe_bounded verdicts


@dataclass(frozen=True)
class Safe:
    pass


@dataclass(frozen=True)
class Unsafe:
    witness: Goal


@dataclass(frozen=True)
class Unknown:
    pass


# ---------------------------------------------------------------------------
# The machine
# ---------------------------------------------------------------------------


def _as_eval_program(program: Union[Program, EvalProgram]) -> EvalProgram:
    if isinstance(program, EvalProgram):
        return program
    return desugar_program(program)


def _fresh_floor(ep: EvalProgram, goal: Goal) -> int:
    names = set(goal.fvs)
    for params, body in ep.preds.values():
        names |= body.fvs
        names.update(p.name for p in params)
    floor = 0
    for n in names:
        m = _NUM_SUFFIX.match(n)
        if m:
            floor = max(floor, int(m.group(2)))
    return floor + 1


def _pred_info(ep: EvalProgram):
    info = {}
    for key, (params, body) in ep.preds.items():
        pnames = {p.name for p in params}
        locals_ = []
        for v in _ordered_vars(body):
            if v.name not in pnames:
                locals_.append(v)
        info[key] = (params, body, locals_)
    return info


def _check_defined(ep: EvalProgram, goal: Goal) -> None:
    for _, sub in iter_goal_positions(goal):
        if isinstance(sub, Atom) and sub.key not in ep.preds:
            raise UndefinedPredicate(f"goal calls undefined predicate {sub.pred}/{len(sub.args)}")


def _resolve(qvars, acc: list[Subst]) -> Subst:
    out: Subst = {}
    for v in qvars:
        val = v
        for b in acc:
            if not val.fvs:
                break
            val = apply(val, b)
        if not (type(val) is type(v) and getattr(val, "name", None) == v.name):
            out[v.name] = val
    return out


def _run(
    ep: EvalProgram,
    goal: Goal,
    fuel: int,
    unify_goal_eq: bool,
    capture_trace: bool,
) -> EvalResult:
    goal = normalize(goal)
    _check_defined(ep, goal)
    info = _pred_info(ep)
    qvars = _ordered_vars(goal)
    counter = _fresh_floor(ep, goal)

    trace: Optional[list[tuple[str, str]]] = [] if capture_trace else None
    acc: list[Subst] = []
    # goals live as reversed conjunct lists (leftmost conjunct on top), so
    # selecting and replacing the leftmost conjunct is O(1) plus the size of
    # what replaces it, not a rebuild of the whole conjunction
    stack: list[tuple[list[Goal], int, int]] = [(list(reversed(conjuncts(goal))), 0, 0)]
    answers: set[FrozenSubst] = set()
    stuck_goal: Optional[Goal] = None
    exhausted = False
    fuel_left = fuel
    at_total = 0
    size = 0
    max_depth = 0

    def materialize(rev: list[Goal]) -> Goal:
        return conj(list(reversed(rev)))

    def emit(rule: str, rev: list[Goal]) -> None:
        if trace is not None and len(trace) < _TRACE_CAP:
            trace.append((rule, format_goal(materialize(rev))))

    def subst_all(rev: list[Goal], theta: Subst) -> list[Goal]:
        # goal-variable bindings may splice conjunctions or true into place
        out: list[Goal] = []
        for p in rev:
            out.extend(reversed(conjuncts(normalize(apply(p, theta)))))
        return out

    while stack and stuck_goal is None and not exhausted:
        rev, alen, depth = stack.pop()
        del acc[alen:]
        while True:
            if fuel_left <= 0:
                exhausted = True
                max_depth = max(max_depth, depth)
                break
            if not rev:  # true
                fuel_left -= 1
                size += 1
                emit("tt", rev)
                answers.add(freeze_subst(_resolve(qvars, acc)))
                max_depth = max(max_depth, depth)
                break
            first = rev[-1]
            if isinstance(first, GFalse):
                fuel_left -= 1
                size += 1
                emit("ff", rev)
                max_depth = max(max_depth, depth)
                break
            if isinstance(first, TermEq):
                fuel_left -= 1
                size += 1
                u = mgu(first.left, first.right)
                if u is None:
                    emit("teq1", rev)
                    max_depth = max(max_depth, depth)
                    break
                emit("teq2", rev)
                acc.append(u)
                rev.pop()
                if u:
                    # a term binding cannot disturb and/or normal form
                    rev[:] = [apply(p, u) for p in rev]
                continue
            if isinstance(first, GoalEq):
                if unify_goal_eq:
                    fuel_left -= 1
                    size += 1
                    u = mgu(first.left, first.right)
                    if u is None:
                        emit("geq-clash", rev)
                        max_depth = max(max_depth, depth)
                        break
                    emit("geq-unify", rev)
                    acc.append(u)
                    rev.pop()
                    rev[:] = subst_all(rev, u)
                    continue
                if isinstance(first.left, GVar) and first.left.name not in first.right.fvs:
                    fuel_left -= 1
                    size += 1
                    emit("geq", rev)
                    theta = {first.left.name: first.right}
                    acc.append(theta)
                    rev.pop()
                    rev[:] = subst_all(rev, theta)
                    continue
                size += 1
                emit("stuck", rev)
                stuck_goal = materialize(rev)
                max_depth = max(max_depth, depth)
                break
            if isinstance(first, GVar):
                size += 1
                emit("stuck", rev)
                stuck_goal = materialize(rev)
                max_depth = max(max_depth, depth)
                break
            if isinstance(first, Atom):
                entry = info.get(first.key)
                if entry is None:
                    raise UndefinedPredicate(
                        f"call to undefined predicate {first.pred}/{len(first.args)}"
                    )
                fuel_left -= 1
                size += 1
                at_total += 1
                depth += 1
                emit("at", rev)
                params, body, locals_ = entry
                m: Subst = {}
                for p, a in zip(params, first.args):
                    if isinstance(p, Var) and not is_term(a):
                        raise TypeInconsistency(f"{first.pred}: goal passed in term position")
                    if isinstance(p, GVar) and not is_goal(a):
                        raise TypeInconsistency(f"{first.pred}: term passed in goal position")
                    m[p.name] = a
                for v in locals_:
                    m[v.name] = type(v)(f"{_strip_suffix(v.name)}{counter}")
                    counter += 1
                rev.pop()
                rev.extend(reversed(conjuncts(normalize(apply(body, m)))))
                continue
            if isinstance(first, Disj):
                fuel_left -= 1
                size += 1
                emit("or", rev)
                rev.pop()
                here = len(acc)
                branches = first.parts
                for b in reversed(branches[1:]):
                    alt = list(rev)
                    alt.extend(reversed(conjuncts(b)))
                    stack.append((alt, here, depth))
                rev.extend(reversed(conjuncts(branches[0])))
                continue
            raise AssertionError(f"unexpected leftmost conjunct {first!r}")

    if stuck_goal is not None:
        outcome: Outcome = Stuck(stuck_goal)
    elif exhausted:
        outcome = FuelExhausted()
    elif answers:
        outcome = Success(frozenset(answers))
    else:
        outcome = Failure()
    stats = ProofStats(
        at_depth=max_depth,
        tree_size=size,
        at_total=at_total,
        fuel_used=fuel - fuel_left,
    )
    return EvalResult(outcome, stats, trace)


def evaluate(
    program: Union[Program, EvalProgram],
    goal: Goal,
    fuel: Optional[int] = None,
    capture_trace: bool = False,
) -> EvalResult:
    """Full deduction-tree evaluation with the syntactic goal-equality rule."""
    ep = _as_eval_program(program)
    return _run(ep, goal, fuel if fuel is not None else default_fuel(), False, capture_trace)


def ld_evaluate(
    program: Union[Program, EvalProgram],
    goal: Goal,
    fuel: Optional[int] = None,
    capture_trace: bool = False,
) -> EvalResult:
    """Like evaluate, but goal equality unifies its sides as trees."""
    ep = _as_eval_program(program)
    return _run(ep, goal, fuel if fuel is not None else default_fuel(), True, capture_trace)


def is_safe_bounded(
    program: Union[Program, EvalProgram],
    goal: Goal,
    fuel: Optional[int] = None,
) -> Union[Safe, Unsafe, Unknown]:
    """Safe when the whole tree was explored without a stuck leaf; Unsafe
    carries the stuck leaf as witness; Unknown when fuel ran out first."""
    outcome, _, _ = evaluate(program, goal, fuel)
    if isinstance(outcome, Stuck):
        return Unsafe(outcome.goal)
    if isinstance(outcome, FuelExhausted):
        return Unknown()
    return Safe()

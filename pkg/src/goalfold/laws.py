"""Replacement laws and the machinery that vouches for them.

A replacement law states that one goal may be substituted for another inside
a clause body.  Laws come in four strengths: ``arrow`` (terminating outcomes
carry over), ``weak`` (outcomes carry over and proof depth does not increase),
``strong`` (weak plus the reverse outcome implication) and ``strongeq`` (weak
in both directions).  The catalog of builtin laws is proved on paper; declared
laws are either decided through the equality theory of the free term algebra
(for purely equational sides) or spot-checked empirically, and a failed check
rejects the declaration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace as _dc_replace
from importlib import resources
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .errors import GoalfoldError
from .evaluate import (
    FuelExhausted,
    Safe,
    Unsafe,
    evaluate,
    is_safe_bounded,
    terminating,
)
from .subst import Subst, apply, format_subst, is_instance, mgu_many
from .syntax import (
    BOOL,
    FALSE,
    TERM,
    TRUE,
    Atom,
    Conj,
    Disj,
    GFalse,
    Goal,
    GoalEq,
    GTrue,
    GVar,
    Program,
    Struct,
    SyntaxError,
    Term,
    TermEq,
    UndefinedPredicate,
    Var,
    conj,
    format_goal,
    format_term,
    normalize,
    parse_law_goals,
    parse_program,
    var_kinds_of,
    vars_of,
)

ARROW = "arrow"
WEAK = "weak"
STRONG = "strong"
STRONGEQ = "strongeq"

KINDS = (ARROW, WEAK, STRONG, STRONGEQ)

# statuses a law can carry
BUILTIN = "builtin"
ASSUMED = "assumed"
CHECKED = "checked"
UNKNOWN_STATUS = "unknown"

HOLE = Atom("@hole", ())


class SideConditionViolated(GoalfoldError):
    pass


class NonEquationalInput(GoalfoldError):
    pass


class LawRefuted(GoalfoldError):
    pass


class LawStatusUnknown(GoalfoldError):
    pass


# ---------------------------------------------------------------------------
# The law record
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplacementLaw:
    """A named pair of goals with a claimed strength.

    ``forall`` lists the universally quantified variables; None quantifies
    every variable of both sides.  Variables outside ``forall`` are local to
    the law: when the law is applied they must not leak into the surrounding
    clause, and when it is checked they stay uninstantiated.
    """

    name: str
    kind: str
    lhs: Goal
    rhs: Goal
    forall: Optional[frozenset[str]] = None
    status: str = BUILTIN
    preserves_safety: Optional[bool] = True
    checked_budget: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown law kind {self.kind!r}")

    @property
    def quantified(self) -> frozenset[str]:
        if self.forall is None:
            return vars_of(self.lhs) | vars_of(self.rhs)
        return self.forall

    @property
    def free_vars(self) -> frozenset[str]:
        return (vars_of(self.lhs) | vars_of(self.rhs)) - self.quantified

    @property
    def context_name(self) -> Optional[str]:
        names = _context_names(self.lhs) | _context_names(self.rhs)
        if not names:
            return None
        if len(names) > 1:
            raise SideConditionViolated(
                f"law {self.name}: more than one context variable: {sorted(names)}"
            )
        return next(iter(names))

    @property
    def bidirectional(self) -> bool:
        return self.kind == STRONGEQ


_KIND_SYMBOL = {ARROW: "->", WEAK: ">=->", STRONG: ">=<->", STRONGEQ: "=<->"}


def format_law(law: ReplacementLaw) -> str:
    quant = ""
    if law.forall is not None:
        quant = " forall " + ", ".join(sorted(law.forall))
    return (
        f"{law.name} : {law.kind}{quant} : "
        f"{format_goal(law.lhs)} ~> {format_goal(law.rhs)}"
    )


def _context_names(g: Goal, out: Optional[set[str]] = None) -> set[str]:
    if out is None:
        out = set()
    if isinstance(g, Atom):
        if g.pred.startswith("@") and g.pred != "@hole":
            out.add(g.pred)
        for a in g.args:
            if not isinstance(a, (Var, Struct)):
                _context_names(a, out)
    elif isinstance(g, (Conj, Disj)):
        for p in g.parts:
            _context_names(p, out)
    elif isinstance(g, GoalEq):
        _context_names(g.left, out)
        _context_names(g.right, out)
    return out


def splice_context(ctx: Goal, content: Goal) -> Goal:
    """Replace the hole marker in ctx by content (no normalization)."""
    if isinstance(ctx, Atom):
        if ctx.pred == "@hole":
            return content
        return Atom(
            ctx.pred,
            tuple(
                splice_context(a, content) if not isinstance(a, (Var, Struct)) else a
                for a in ctx.args
            ),
        )
    if isinstance(ctx, Conj):
        return Conj(tuple(splice_context(p, content) for p in ctx.parts))
    if isinstance(ctx, Disj):
        return Disj(tuple(splice_context(p, content) for p in ctx.parts))
    if isinstance(ctx, GoalEq):
        return GoalEq(splice_context(ctx.left, content), splice_context(ctx.right, content))
    return ctx


def _instantiate_side(side: Goal, theta: Subst, ctx: Optional[Goal], ctx_name: Optional[str]) -> Goal:
    """Apply theta, then realize the law's context variable with ctx."""
    g = apply(side, theta)
    if ctx_name is not None:
        g = _fill_context_atoms(g, ctx_name, ctx)
    return normalize(g)


def _fill_context_atoms(g: Goal, name: str, ctx: Goal) -> Goal:
    if isinstance(g, Atom):
        if g.pred == name:
            # one goal argument by construction
            return splice_context(ctx, g.args[0])
        return g
    if isinstance(g, Conj):
        return Conj(tuple(_fill_context_atoms(p, name, ctx) for p in g.parts))
    if isinstance(g, Disj):
        return Disj(tuple(_fill_context_atoms(p, name, ctx) for p in g.parts))
    if isinstance(g, GoalEq):
        return GoalEq(
            _fill_context_atoms(g.left, name, ctx),
            _fill_context_atoms(g.right, name, ctx),
        )
    return g


# ---------------------------------------------------------------------------
# Builtin catalog
# ---------------------------------------------------------------------------


def builtin_laws() -> list[ReplacementLaw]:
    """The boolean table plus the leftward move of a term equality.

    The sides are stored unnormalized on purpose: half of these laws talk
    about neutral elements which normalization erases, so their instances
    agree trivially.  They are kept for completeness of the catalog.
    """
    g1, g2, g3 = GVar("G1"), GVar("G2"), GVar("G3")
    t1, t2 = Var("T1"), Var("T2")
    teq = TermEq(t1, t2)

    def law(name: str, kind: str, lhs: Goal, rhs: Goal) -> ReplacementLaw:
        return ReplacementLaw(name, kind, lhs, rhs)

    return [
        law("and_true_r", STRONGEQ, Conj((g1, TRUE)), g1),
        law("and_true_l", STRONGEQ, Conj((TRUE, g1)), g1),
        law("or_true_l", WEAK, Disj((TRUE, g1)), TRUE),
        law("and_false_r", WEAK, Conj((g1, FALSE)), FALSE),
        law("and_false_l", STRONGEQ, Conj((FALSE, g1)), FALSE),
        law("or_false_l", STRONGEQ, Disj((FALSE, g1)), g1),
        law("and_idem", WEAK, Conj((g1, g1)), g1),
        law("or_idem", STRONGEQ, Disj((g1, g1)), g1),
        law("or_comm", STRONGEQ, Disj((g1, g2)), Disj((g2, g1))),
        law(
            "or_and_left",
            STRONGEQ,
            Disj((Conj((g1, g2)), Conj((g1, g3)))),
            Conj((g1, Disj((g2, g3)))),
        ),
        law(
            "or_and_right",
            STRONGEQ,
            Disj((Conj((g1, g2)), Conj((g3, g2)))),
            Conj((Disj((g1, g3)), g2)),
        ),
        law(
            "and_or_dist",
            WEAK,
            Conj((Disj((g1, g2)), Disj((g1, g3)))),
            Disj((g1, Conj((g2, g3)))),
        ),
        law("teq_left", WEAK, Conj((g1, teq)), Conj((teq, g1))),
    ]


BUILTIN_LAWS: dict[str, ReplacementLaw] = {law.name: law for law in builtin_laws()}


def do_not_hold_laws() -> list[ReplacementLaw]:
    """Claims the evaluator refutes; each is checked against refutation_program().

    The first six are claimed at the arrow kind and fail outright.  The last
    one (moving a goal equality out of a context that repeats its hole through
    a defined predicate) is valid left-to-right in this semantics, so it is
    claimed as an equivalence and refuted in the converse direction.
    """
    g = GVar("G")
    g1, g2, g3 = GVar("G1"), GVar("G2"), GVar("G3")
    t1, t2 = Var("T1"), Var("T2")
    ctx = lambda inner: Atom("@C", (inner,))  # noqa: E731 - local shorthand
    return [
        ReplacementLaw("true_into_or", ARROW, TRUE, Disj((TRUE, g1))),
        ReplacementLaw("false_into_and", ARROW, FALSE, Conj((g1, FALSE))),
        ReplacementLaw("teq_right", ARROW, Conj((TermEq(t1, t2), g1)), Conj((g1, TermEq(t1, t2)))),
        ReplacementLaw(
            "or_over_and",
            ARROW,
            Disj((g1, Conj((g2, g3)))),
            Conj((Disj((g1, g2)), Disj((g1, g3)))),
        ),
        ReplacementLaw(
            "geq_intro_trailing",
            ARROW,
            ctx(g1),
            Conj((ctx(g), GoalEq(g, g1))),
            forall=frozenset({"G1"}),
        ),
        ReplacementLaw(
            "geq_move_shared",
            ARROW,
            ctx(Conj((GoalEq(g, g), g2))),
            Conj((GoalEq(g, g), ctx(g2))),
            forall=frozenset({"G2"}),
        ),
        ReplacementLaw(
            "geq_move_unshared",
            STRONGEQ,
            ctx(Conj((GoalEq(g, g1), g2))),
            Conj((GoalEq(g, g1), ctx(g2))),
            forall=frozenset({"G1", "G2"}),
        ),
    ]


def refutation_program() -> Program:
    """The bundled program the do-not-hold suite is refuted against."""
    text = resources.files("goalfold").joinpath("corpus/lawcheck.glp").read_text()
    return parse_program(text)


# ---------------------------------------------------------------------------
# Schema instances (equality introduction / rearrangement / substitution)
# ---------------------------------------------------------------------------


def _mk_eq(v: Union[Var, GVar], u) -> Goal:
    if isinstance(v, GVar):
        return GoalEq(v, u)
    return TermEq(v, u)


def instantiate_eq_intro(lhs: Goal, u, v: Union[Var, GVar], rhs_tail: Goal) -> ReplacementLaw:
    """Equality introduction: lhs =<-> (v = u), rhs_tail where rhs_tail{v/u} = lhs.

    v must be fresh with respect to lhs; the caller chooses which occurrences
    of u were abstracted into v.
    """
    if v.name in vars_of(lhs):
        raise SideConditionViolated(
            f"eq_intro: {v.name} already occurs in the goal it abstracts"
        )
    if v.name not in vars_of(rhs_tail):
        raise SideConditionViolated(f"eq_intro: {v.name} does not occur in the replacement")
    if normalize(apply(rhs_tail, {v.name: u})) != normalize(lhs):
        raise SideConditionViolated(
            "eq_intro: replacing the new variable by its definition does not "
            "restore the original goal"
        )
    rhs = conj([_mk_eq(v, u), rhs_tail])
    return ReplacementLaw("eq_intro", STRONGEQ, normalize(lhs), rhs, forall=vars_of(lhs))


def _erase_conjunct(x: Goal, target: Goal) -> tuple[Goal, int]:
    """Remove conjunct occurrences equal to target, returning (goal, count)."""
    if x == target:
        return TRUE, 1
    if isinstance(x, Conj):
        hits = 0
        parts = []
        for p in x.parts:
            q, n = _erase_conjunct(p, target)
            hits += n
            parts.append(q)
        return conj(parts), hits
    if isinstance(x, Disj):
        hits = 0
        parts = []
        for p in x.parts:
            q, n = _erase_conjunct(p, target)
            hits += n
            parts.append(q)
        return Disj(tuple(parts)), hits
    if isinstance(x, GoalEq):
        right, n = _erase_conjunct(x.right, target)
        return GoalEq(x.left, right), n
    return x, 0


def instantiate_eq_rearrange(goal: Goal, eq: Goal, remainder: Goal) -> ReplacementLaw:
    """Equality rearrangement: hoist (v = u) from inside goal to its front.

    goal must be the subgoal containing the equality, remainder the same
    subgoal with the equality removed.  Requires the bound variable to occur
    nowhere outside the equality.
    """
    if isinstance(eq, GoalEq):
        v, u = eq.left, eq.right
        if not isinstance(v, GVar):
            raise SideConditionViolated("eq_rearrange: left side is not a goal variable")
    elif isinstance(eq, TermEq):
        v, u = eq.left, eq.right
        if not isinstance(v, Var):
            raise SideConditionViolated("eq_rearrange: left side is not a variable")
    else:
        raise SideConditionViolated("eq_rearrange: not an equality")
    if v.name in vars_of(u):
        raise SideConditionViolated(f"eq_rearrange: {v.name} occurs in its own definition")
    if v.name in vars_of(remainder):
        raise SideConditionViolated(
            f"eq_rearrange: {v.name} occurs outside the moved equality"
        )
    erased, hits = _erase_conjunct(normalize(goal), eq)
    if hits != 1 or erased != normalize(remainder):
        raise SideConditionViolated(
            "eq_rearrange: goal is not remainder with the equality inserted once"
        )
    rhs = conj([eq, remainder])
    return ReplacementLaw(
        "eq_rearrange",
        STRONGEQ,
        normalize(goal),
        rhs,
        forall=vars_of(remainder) | vars_of(u),
    )


def term_eq_leftmove(g: Goal, eq: TermEq) -> ReplacementLaw:
    """A concrete weak instance of the leftward move of a term equality."""
    if not isinstance(eq, TermEq):
        raise SideConditionViolated("term_eq_leftmove: not a term equality")
    lhs = conj([g, eq])
    rhs = conj([eq, g])
    return ReplacementLaw("teq_left", WEAK, lhs, rhs, forall=vars_of(lhs))


def instantiate_eq_drop(eq: Goal, keep: Goal) -> ReplacementLaw:
    """Existential elimination: (v = u), g =<-> g for a v used nowhere else.

    The bound variable must not occur in u, in g, or (the caller's duty) in
    the surrounding clause.  The equality then contributes one deterministic
    binding step and no (at) applications, so both depth directions hold.
    """
    if isinstance(eq, TermEq) and isinstance(eq.left, Var):
        v, u = eq.left, eq.right
    elif isinstance(eq, GoalEq) and isinstance(eq.left, GVar):
        v, u = eq.left, eq.right
    else:
        raise SideConditionViolated("eq_drop: left side is not a variable")
    if v.name in vars_of(u):
        raise SideConditionViolated(f"eq_drop: {v.name} occurs in its own definition")
    if v.name in vars_of(keep):
        raise SideConditionViolated(f"eq_drop: {v.name} still occurs in the kept goal")
    lhs = conj([eq, keep])
    rhs = normalize(keep)
    return ReplacementLaw("eq_drop", STRONGEQ, lhs, rhs, forall=vars_of(u) | vars_of(keep))


def _replace_occurrences(x, old, new):
    """Replace every occurrence of subconstruct old in x by new."""
    if x == old:
        return new
    if isinstance(x, Struct):
        return Struct(x.functor, tuple(_replace_occurrences(a, old, new) for a in x.args))
    if isinstance(x, Atom):
        return Atom(x.pred, tuple(_replace_occurrences(a, old, new) for a in x.args))
    if isinstance(x, TermEq):
        return TermEq(_replace_occurrences(x.left, old, new), _replace_occurrences(x.right, old, new))
    if isinstance(x, GoalEq):
        return GoalEq(_replace_occurrences(x.left, old, new), _replace_occurrences(x.right, old, new))
    if isinstance(x, Conj):
        return Conj(tuple(_replace_occurrences(p, old, new) for p in x.parts))
    if isinstance(x, Disj):
        return Disj(tuple(_replace_occurrences(p, old, new) for p in x.parts))
    return x


def instantiate_eq_subst(eq: Goal, scope: Goal, back: bool = False) -> tuple[ReplacementLaw, Goal]:
    """Substitution through an equality: (v=u), g[v] =<-> (v=u), g[u].

    Sound because the evaluator applies the binding of the equality to its
    whole continuation anyway.  Forward replaces the variable side by the
    other side inside scope; back replaces occurrences of the other side by
    the variable.  Returns the law instance and the rewritten scope.
    """
    if isinstance(eq, TermEq):
        if isinstance(eq.left, Var):
            v, u = eq.left, eq.right
        elif isinstance(eq.right, Var):
            v, u = eq.right, eq.left
        else:
            raise SideConditionViolated("eq_subst: neither side of the equality is a variable")
    elif isinstance(eq, GoalEq):
        if not isinstance(eq.left, GVar):
            raise SideConditionViolated("eq_subst: left side is not a goal variable")
        v, u = eq.left, eq.right
        if v.name in vars_of(u):
            raise SideConditionViolated(f"eq_subst: {v.name} occurs in its own definition")
    else:
        raise SideConditionViolated("eq_subst: not an equality")
    old, new = (u, v) if back else (v, u)
    new_scope = normalize(_replace_occurrences(scope, old, new))
    if new_scope == normalize(scope):
        raise SideConditionViolated("eq_subst: nothing to substitute in the scope")
    lhs = conj([eq, scope])
    rhs = conj([eq, new_scope])
    return (
        ReplacementLaw("eq_subst", STRONGEQ, lhs, rhs, forall=vars_of(lhs) | vars_of(rhs)),
        new_scope,
    )


def instantiate_renaming(scope: Goal, mapping: Mapping[str, str]) -> tuple[ReplacementLaw, Goal]:
    """Alpha-rename variables inside a subgoal: a strongeq law instance.

    The new names must not occur in the subgoal; the caller is responsible
    for checking that the renamed variables are local to it.
    """
    kinds = var_kinds_of(scope)
    scope_vars = vars_of(scope)
    news = list(mapping.values())
    theta: dict[str, Union[Var, GVar]] = {}
    for old, new in mapping.items():
        if old not in scope_vars:
            raise SideConditionViolated(f"rename: {old} does not occur in the subgoal")
        if new in scope_vars:
            raise SideConditionViolated(f"rename: {new} already occurs in the subgoal")
        if news.count(new) > 1:
            raise SideConditionViolated(f"rename: {new} is the target of two renamings")
        theta[old] = GVar(new) if kinds[old] == BOOL else Var(new)
    renamed = normalize(apply(scope, theta))
    law = ReplacementLaw(
        "rename_locals",
        STRONGEQ,
        normalize(scope),
        renamed,
        forall=scope_vars - set(mapping),
    )
    return law, renamed


# ---------------------------------------------------------------------------
# CET decision fragment
# ---------------------------------------------------------------------------

EQUIVALENT = "equivalent"
NOT_EQUIVALENT = "not-equivalent"
UNKNOWN = "unknown"

_DNF_CAP = 512
_GROUND_CAP = 4096


@dataclass(frozen=True)
class CetResult:
    verdict: str
    witness: Optional[dict[str, Term]] = None


def _require_equational(g: Goal, where: str) -> None:
    if isinstance(g, (GTrue, GFalse, TermEq)):
        return
    if isinstance(g, (Conj, Disj)):
        for p in g.parts:
            _require_equational(p, where)
        return
    raise NonEquationalInput(f"{where}: only true, false, term equalities, and/or allowed")


def _dnf(g: Goal) -> Optional[list[list[TermEq]]]:
    if isinstance(g, GTrue):
        return [[]]
    if isinstance(g, GFalse):
        return []
    if isinstance(g, TermEq):
        return [[g]]
    if isinstance(g, Disj):
        out: list[list[TermEq]] = []
        for p in g.parts:
            sub = _dnf(p)
            if sub is None:
                return None
            out.extend(sub)
            if len(out) > _DNF_CAP:
                return None
        return out
    if isinstance(g, Conj):
        acc: list[list[TermEq]] = [[]]
        for p in g.parts:
            sub = _dnf(p)
            if sub is None:
                return None
            acc = [a + b for a in acc for b in sub]
            if len(acc) > _DNF_CAP:
                return None
        return acc
    raise NonEquationalInput("not an equational goal")


def _solved_images(disjuncts: list[list[TermEq]], quantified: Sequence[str]) -> list[Term]:
    images = []
    for d in disjuncts:
        sigma = mgu_many([(eq.left, eq.right) for eq in d])
        if sigma is None:
            continue
        images.append(Struct("$sol", tuple(apply(Var(x), sigma) for x in quantified)))
    return images


def _ground_domain(eq1: Goal, eq2: Goal) -> list[Term]:
    consts: set[str] = set()
    unaries: set[str] = set()

    def walk_term(t) -> None:
        if isinstance(t, Struct):
            if not t.args:
                consts.add(t.functor)
            elif len(t.args) == 1:
                unaries.add(t.functor)
            for a in t.args:
                walk_term(a)

    def walk(g: Goal) -> None:
        if isinstance(g, TermEq):
            walk_term(g.left)
            walk_term(g.right)
        elif isinstance(g, (Conj, Disj)):
            for p in g.parts:
                walk(p)

    walk(eq1)
    walk(eq2)
    base = sorted(consts)[:2]
    while len(base) < 2:
        base.append(f"$k{len(base)}")
    domain: list[Term] = [Struct(c, ()) for c in base]
    for u in sorted(unaries)[:1]:
        domain.extend(Struct(u, (d,)) for d in list(domain))
    return domain


def _sat(disjuncts: list[list[TermEq]], theta: Subst) -> bool:
    for d in disjuncts:
        if mgu_many([(apply(eq.left, theta), apply(eq.right, theta)) for eq in d]) is not None:
            return True
    return False


def cet_decide(eq1: Goal, eq2: Goal, quantified: Iterable[str]) -> CetResult:
    """Decide whether two equational goals agree on their shared variables.

    Sound in both definite verdicts: ``equivalent`` comes from mutual
    per-disjunct instance coverage of mgu solved forms, ``not-equivalent``
    from a ground counterexample over a small term domain.  Everything else
    is ``unknown``.
    """
    _require_equational(eq1, "left side")
    _require_equational(eq2, "right side")
    qvars = sorted(set(quantified))
    d1 = _dnf(normalize(eq1))
    d2 = _dnf(normalize(eq2))
    if d1 is not None and d2 is not None:
        imgs1 = _solved_images(d1, qvars)
        imgs2 = _solved_images(d2, qvars)
        covered = lambda xs, ys: all(  # noqa: E731 - local shorthand
            any(is_instance(x, y) for y in ys) for x in xs
        )
        if covered(imgs1, imgs2) and covered(imgs2, imgs1):
            return CetResult(EQUIVALENT)
        # fall through to the ground search for a definite counterexample
        domain = _ground_domain(eq1, eq2)
        combos = itertools.product(domain, repeat=len(qvars))
        for n, combo in enumerate(combos):
            if n >= _GROUND_CAP:
                break
            theta = dict(zip(qvars, combo))
            if _sat(d1, theta) != _sat(d2, theta):
                return CetResult(NOT_EQUIVALENT, witness=theta)
    return CetResult(UNKNOWN)


# ---------------------------------------------------------------------------
# Empirical checking
# ---------------------------------------------------------------------------

VERIFIED = "verified"
REFUTED = "refuted"

_CHECK_BUDGET = 1500
_CHECK_FUEL = 400


@dataclass(frozen=True)
class LawWitness:
    direction: str  # "forward" or "converse"
    context: str
    substitution: str
    lhs_goal: str
    rhs_goal: str
    lhs_outcome: str
    rhs_outcome: str
    lhs_depth: Optional[int]
    rhs_depth: Optional[int]
    fuel: int

    def describe(self) -> str:
        return (
            f"{self.direction}: context {self.context} with {self.substitution}: "
            f"{self.lhs_goal} gives {self.lhs_outcome}"
            + (f" at depth {self.lhs_depth}" if self.lhs_depth is not None else "")
            + f", {self.rhs_goal} gives {self.rhs_outcome}"
            + (f" at depth {self.rhs_depth}" if self.rhs_depth is not None else "")
        )


@dataclass(frozen=True)
class LawCheckResult:
    verdict: str  # verified | refuted | unknown
    law: ReplacementLaw
    samples: int
    obligations: int
    budget: int
    witness: Optional[LawWitness] = None


def _term_pool(program: Program) -> list[Term]:
    consts = sorted(
        name
        for (name, arity), info in program.symbols.items()
        if arity == 0 and info.result == TERM
    )[:2]
    while len(consts) < 2:
        consts.append("a" if "a" not in consts else "b")
    unaries = sorted(
        name
        for (name, arity), info in program.symbols.items()
        if arity == 1 and info.result == TERM and info.args == (TERM,)
    )[:1]
    pool: list[Term] = [Var("X1"), Struct(consts[0], ()), Struct(consts[1], ())]
    for u in unaries:
        pool.append(Struct(u, (Struct(consts[0], ()),)))
        pool.append(Struct(u, (Struct(u, (Struct(consts[0], ()),)),)))
    return pool


def _fresh_typed_atom(key: tuple[str, int], info) -> Atom:
    args = []
    n = 0
    for k in info.args:
        if k == BOOL:
            args.append(TRUE)
        else:
            n += 1
            args.append(Var(f"X{n}"))
    return Atom(key[0], tuple(args))


def _goal_pool(program: Program) -> list[Goal]:
    consts = sorted(
        name
        for (name, arity), info in program.symbols.items()
        if arity == 0 and info.result == TERM
    )[:2]
    pool: list[Goal] = [TRUE]
    for c in consts:
        pool.append(TermEq(Var("X1"), Struct(c, ())))
    defined = sorted(program.defined_preds())
    for key in defined:
        pool.append(_fresh_typed_atom(key, program.symbols[key]))
    pool.append(FALSE)
    return pool[:12]


def _context_pool(program: Program) -> list[Goal]:
    defined = sorted(program.defined_preds())
    atoms = [_fresh_typed_atom(key, program.symbols[key]) for key in defined]
    ctxs: list[Goal] = [HOLE]
    for key, atom in zip(defined, atoms):
        info = program.symbols[key]
        if any(k == BOOL for k in info.args):
            i = info.args.index(BOOL)
            ctxs.append(Atom(key[0], atom.args[:i] + (HOLE,) + atom.args[i + 1 :]))
    for atom in atoms[:4]:
        ctxs.append(Conj((atom, HOLE)))
    for atom in atoms[:4]:
        ctxs.append(Conj((HOLE, atom)))
    if atoms:
        ctxs.append(Disj((HOLE, atoms[0])))
    return ctxs


def _rename_free(law: ReplacementLaw) -> tuple[Goal, Goal]:
    kinds = var_kinds_of(Conj((law.lhs, law.rhs)))
    theta: dict[str, Union[Var, GVar]] = {}
    for i, name in enumerate(sorted(law.free_vars), start=1):
        fresh = f"_L{i}"
        theta[name] = GVar(fresh) if kinds.get(name) == BOOL else Var(fresh)
    if not theta:
        return law.lhs, law.rhs
    return apply(law.lhs, theta), apply(law.rhs, theta)


def _iter_samples(
    law: ReplacementLaw, program: Program
) -> Iterator[tuple[Subst, Optional[Goal], Goal]]:
    """Yields (theta, law-context, outer-context) triples, deterministic order."""
    kinds = var_kinds_of(Conj((law.lhs, law.rhs)))
    qnames = sorted(n for n in law.quantified if n in kinds)
    gpool = _goal_pool(program)
    tpool = _term_pool(program)
    pools = [gpool if kinds[n] == BOOL else tpool for n in qnames]
    ctxs = _context_pool(program)
    ctx_name = law.context_name
    if ctx_name is not None:
        for ctx in ctxs:
            for combo in itertools.product(*pools):
                yield dict(zip(qnames, combo)), ctx, HOLE
    else:
        for outer in ctxs:
            for combo in itertools.product(*pools):
                yield dict(zip(qnames, combo)), None, outer


def _outcome_class(outcome) -> str:
    return outcome.name


def check_law_empirically(
    program: Program,
    law: ReplacementLaw,
    budget: int = _CHECK_BUDGET,
    fuel: int = _CHECK_FUEL,
) -> LawCheckResult:
    """Hunt for outcome or depth disagreements across instantiations and contexts.

    Never a proof: verified just records that every obligation inside the
    budget held.  A refutation carries a replayable witness.  Left sides that
    do not terminate within fuel impose no obligation; a right side that runs
    out of fuel is retried once with four times the fuel before it counts as
    a refutation.
    """
    lhs0, rhs0 = _rename_free(law)
    ctx_name = law.context_name
    if normalize(lhs0) == normalize(rhs0):
        return LawCheckResult(VERIFIED, law, samples=0, obligations=0, budget=budget)

    def finish(direction, ctx_goal, theta, L, R, rl, rr) -> LawCheckResult:
        witness = LawWitness(
            direction=direction,
            context=format_goal(ctx_goal),
            substitution=format_subst(theta),
            lhs_goal=format_goal(L),
            rhs_goal=format_goal(R),
            lhs_outcome=_outcome_class(rl.outcome),
            rhs_outcome=_outcome_class(rr.outcome),
            lhs_depth=rl.stats.at_depth if terminating(rl.outcome) else None,
            rhs_depth=rr.stats.at_depth if terminating(rr.outcome) else None,
            fuel=fuel,
        )
        return LawCheckResult(REFUTED, law, samples, obligations, budget, witness)

    samples = 0
    obligations = 0
    for theta, law_ctx, outer in _iter_samples(law, program):
        if samples >= budget:
            break
        samples += 1
        L = _instantiate_side(lhs0, theta, law_ctx, ctx_name)
        R = _instantiate_side(rhs0, theta, law_ctx, ctx_name)
        if law_ctx is None:
            L = normalize(splice_context(outer, L))
            R = normalize(splice_context(outer, R))
        if L == R:
            obligations += 1
            continue
        ctx_goal = law_ctx if law_ctx is not None else outer
        rl = evaluate(program, L, fuel=fuel)
        rr = evaluate(program, R, fuel=fuel)
        if terminating(rl.outcome):
            if isinstance(rr.outcome, FuelExhausted):
                rr = evaluate(program, R, fuel=fuel * 4)
            obligations += 1
            if not terminating(rr.outcome) or _outcome_class(rl.outcome) != _outcome_class(
                rr.outcome
            ):
                return finish("forward", ctx_goal, theta, L, R, rl, rr)
            if law.kind != ARROW and rr.stats.at_depth > rl.stats.at_depth:
                return finish("forward", ctx_goal, theta, L, R, rl, rr)
        if law.kind in (STRONG, STRONGEQ) and terminating(rr.outcome):
            if isinstance(rl.outcome, FuelExhausted):
                rl = evaluate(program, L, fuel=fuel * 4)
            obligations += 1
            if not terminating(rl.outcome) or _outcome_class(rl.outcome) != _outcome_class(
                rr.outcome
            ):
                return finish("converse", ctx_goal, theta, L, R, rl, rr)
            if law.kind == STRONGEQ and rl.stats.at_depth > rr.stats.at_depth:
                return finish("converse", ctx_goal, theta, L, R, rl, rr)
    if obligations == 0:
        return LawCheckResult(UNKNOWN, law, samples, obligations, budget)
    return LawCheckResult(VERIFIED, law, samples, obligations, budget)


def check_safety_preservation_law(
    program: Program,
    law: ReplacementLaw,
    budget: int = 800,
    fuel: int = _CHECK_FUEL,
) -> LawCheckResult:
    """Check that contexts safe around the left side stay safe around the right.

    A left side with no stuck configuration within fuel counts as the premise
    holding (bounded evidence, recorded in the verdict's budget); the check
    refutes when the right side then exhibits a stuck configuration.
    """
    lhs0, rhs0 = _rename_free(law)
    ctx_name = law.context_name
    if normalize(lhs0) == normalize(rhs0):
        return LawCheckResult(VERIFIED, law, samples=0, obligations=0, budget=budget)
    samples = 0
    obligations = 0
    for theta, law_ctx, outer in _iter_samples(law, program):
        if samples >= budget:
            break
        samples += 1
        L = _instantiate_side(lhs0, theta, law_ctx, ctx_name)
        R = _instantiate_side(rhs0, theta, law_ctx, ctx_name)
        if law_ctx is None:
            L = normalize(splice_context(outer, L))
            R = normalize(splice_context(outer, R))
        if L == R:
            obligations += 1
            continue
        sl = is_safe_bounded(program, L, fuel=fuel)
        if isinstance(sl, Unsafe):
            continue
        obligations += 1
        sr = is_safe_bounded(program, R, fuel=fuel)
        if isinstance(sr, Unsafe):
            ctx_goal = law_ctx if law_ctx is not None else outer
            witness = LawWitness(
                direction="forward",
                context=format_goal(ctx_goal),
                substitution=format_subst(theta),
                lhs_goal=format_goal(L),
                rhs_goal=format_goal(R),
                lhs_outcome="SAFE" if isinstance(sl, Safe) else "NO_STUCK_AT_BUDGET",
                rhs_outcome=f"UNSAFE ({format_goal(sr.witness)})",
                lhs_depth=None,
                rhs_depth=None,
                fuel=fuel,
            )
            return LawCheckResult(REFUTED, law, samples, obligations, budget, witness)
    if obligations == 0:
        return LawCheckResult(UNKNOWN, law, samples, obligations, budget)
    return LawCheckResult(VERIFIED, law, samples, obligations, budget)


# ---------------------------------------------------------------------------
# Declared laws
# ---------------------------------------------------------------------------


def _is_equational(g: Goal) -> bool:
    try:
        _require_equational(g, "")
    except NonEquationalInput:
        return False
    return True


def _defined_pred_check(program: Program, g: Goal, where: str) -> None:
    defined = program.defined_preds()

    def walk(x: Goal) -> None:
        if isinstance(x, Atom):
            if x.pred.startswith("@"):
                pass
            elif x.key not in defined:
                raise UndefinedPredicate(f"{where}: predicate {x.pred}/{len(x.args)} not defined")
            for a in x.args:
                if not isinstance(a, (Var, Struct)):
                    walk(a)
        elif isinstance(x, (Conj, Disj)):
            for p in x.parts:
                walk(p)
        elif isinstance(x, GoalEq):
            walk(x.left)
            walk(x.right)

    walk(g)


def declare_law(
    program: Program,
    name: str,
    kind: str,
    lhs: Goal,
    rhs: Goal,
    forall: Optional[frozenset[str]] = None,
    assume: bool = False,
    budget: int = _CHECK_BUDGET,
    fuel: int = _CHECK_FUEL,
) -> ReplacementLaw:
    """Admit a user law: assumed as-is, decided equationally, or spot-checked.

    Purely equational sides go through cet_decide; a proved equivalence is as
    good as a builtin law.  Otherwise the empirical checker runs and a found
    counterexample rejects the declaration with LawRefuted.
    """
    if kind not in KINDS:
        raise SideConditionViolated(f"law {name}: unknown kind {kind!r}")
    law = ReplacementLaw(name, kind, lhs, rhs, forall=forall, status=ASSUMED, preserves_safety=None)
    law.context_name  # validates single context variable
    _defined_pred_check(program, lhs, f"law {name} left side")
    _defined_pred_check(program, rhs, f"law {name} right side")
    if assume:
        return law
    if _is_equational(lhs) and _is_equational(rhs):
        cet = cet_decide(lhs, rhs, law.quantified)
        if cet.verdict == EQUIVALENT:
            return _dc_replace(law, status=BUILTIN, preserves_safety=True)
        if cet.verdict == NOT_EQUIVALENT and kind == STRONGEQ:
            witness = {k: format_term(v) for k, v in (cet.witness or {}).items()}
            raise LawRefuted(f"law {name}: equational sides differ, witness {witness}")
    result = check_law_empirically(program, law, budget=budget, fuel=fuel)
    if result.verdict == REFUTED:
        assert result.witness is not None
        raise LawRefuted(f"law {name}: {result.witness.describe()}")
    if result.verdict == VERIFIED:
        return _dc_replace(law, status=CHECKED, checked_budget=budget)
    return _dc_replace(law, status=UNKNOWN_STATUS)


def parse_law_declaration(
    text: str,
    program: Program,
    budget: int = _CHECK_BUDGET,
    fuel: int = _CHECK_FUEL,
) -> ReplacementLaw:
    """Parse 'law <name> : <kind> [forall V, ...] : <lhs> ~> <rhs> .'

    The leading keyword may be ``assume`` instead of ``law``, which skips
    checking and admits the law with assumed status.
    """
    stripped = text.strip()
    head, _, rest = stripped.partition(" ")
    if head not in ("law", "assume"):
        raise SyntaxError(f"law declaration must start with 'law' or 'assume', got {head!r}")
    assume = head == "assume"
    name_part, sep, rest = rest.partition(":")
    if not sep:
        raise SyntaxError("law declaration: missing ':' after the name")
    name = name_part.strip()
    if not name or not name[0].isalpha() or not name.replace("_", "").isalnum():
        raise SyntaxError(f"bad law name {name!r}")
    kind_part, sep, goals_part = rest.partition(":")
    if not sep:
        raise SyntaxError("law declaration: missing ':' after the kind")
    kind_tokens = kind_part.split()
    if not kind_tokens:
        raise SyntaxError("law declaration: missing kind")
    kind = kind_tokens[0]
    forall: Optional[frozenset[str]] = None
    var_kinds: dict[str, str] = {}
    if len(kind_tokens) > 1:
        if kind_tokens[1] != "forall":
            raise SyntaxError(f"law declaration: expected 'forall', got {kind_tokens[1]!r}")
        tokens = " ".join(kind_tokens[2:]).replace(",", " ").split()
        # a variable may be preceded by `term` or `bool` to pin a kind the
        # law's two sides leave open, e.g. `forall term X, G`
        names: list[str] = []
        pending: Optional[str] = None
        for tok in tokens:
            if tok in (TERM, BOOL):
                if pending is not None:
                    raise SyntaxError(f"law declaration: kind {pending!r} names no variable")
                pending = tok
                continue
            names.append(tok)
            if pending is not None:
                var_kinds[tok] = pending
                pending = None
        if pending is not None:
            raise SyntaxError(f"law declaration: kind {pending!r} names no variable")
        if not names:
            raise SyntaxError("law declaration: empty forall list")
        forall = frozenset(names)
    lhs_text, sep, rhs_text = goals_part.partition("~>")
    if not sep:
        raise SyntaxError("law declaration: missing '~>'")
    rhs_text = rhs_text.strip()
    if not rhs_text.endswith("."):
        raise SyntaxError("law declaration: missing final '.'")
    rhs_text = rhs_text[:-1]
    lhs, rhs = parse_law_goals(
        lhs_text.strip(), rhs_text.strip(), program, allow_context=True, var_kinds=var_kinds
    )
    if forall is not None:
        extra = forall - (vars_of(lhs) | vars_of(rhs))
        if extra:
            raise SyntaxError(f"law {name}: forall lists unused variables {sorted(extra)}")
    return declare_law(
        program, name, kind, lhs, rhs, forall=forall, assume=assume, budget=budget, fuel=fuel
    )

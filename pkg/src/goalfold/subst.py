"""Substitutions over terms and goals.

A substitution maps variable names to terms (individual variables) or goals
(goal variables); the kind is implied by the bound value.  All exported
operations are purely functional and deterministic.
"""

from __future__ import annotations

import re
from typing import Iterable, Mapping, Optional, Sequence, Union

from .syntax import (
    Arg,
    Atom,
    Clause,
    Conj,
    Disj,
    GFalse,
    GTrue,
    GVar,
    Goal,
    GoalEq,
    Struct,
    Term,
    TermEq,
    Var,
    conj,
    disj,
    format_goal,
    format_term,
    is_goal,
    is_term,
    normalize,
    vars_of,
)

Subst = dict[str, Arg]
FrozenSubst = tuple[tuple[str, Arg], ...]

EMPTY: Subst = {}


# ---------------------------------------------------------------------------
# Application
# ---------------------------------------------------------------------------


def apply(x, theta: Mapping[str, Arg]):
    """Apply theta simultaneously to a term, goal, clause, or sequence."""
    if not theta:
        return x
    if isinstance(x, Clause):
        return Clause(x.id, apply(x.head, theta), apply(x.body, theta))
    if isinstance(x, (list, tuple)):
        return type(x)(apply(item, theta) for item in x)
    return _apply(x, theta)


def _apply(x: Arg, theta: Mapping[str, Arg]) -> Arg:
    if x.fvs.isdisjoint(theta):
        return x
    if isinstance(x, Var):
        return theta.get(x.name, x)
    if isinstance(x, GVar):
        return theta.get(x.name, x)
    if isinstance(x, Struct):
        return Struct(x.functor, tuple(_apply(a, theta) for a in x.args))
    if isinstance(x, Atom):
        return Atom(x.pred, tuple(_apply(a, theta) for a in x.args))
    if isinstance(x, TermEq):
        return TermEq(_apply(x.left, theta), _apply(x.right, theta))
    if isinstance(x, GoalEq):
        return GoalEq(_apply(x.left, theta), _apply(x.right, theta))
    if isinstance(x, Conj):
        return conj([_apply(p, theta) for p in x.parts])
    if isinstance(x, Disj):
        return disj([_apply(p, theta) for p in x.parts])
    return x  # GTrue / GFalse


def _identity(name: str, value: Arg) -> bool:
    return (isinstance(value, Var) or isinstance(value, GVar)) and value.name == name


def compose(first: Subst, second: Subst) -> Subst:
    """Substitution composition: apply(x, compose(a, b)) == apply(apply(x, a), b)."""
    out: Subst = {}
    for k, v in first.items():
        w = apply(v, second)
        if not _identity(k, w):
            out[k] = w
    for k, v in second.items():
        if k not in first and not _identity(k, v):
            out[k] = v
    return out


def compose_set(theta: Subst, answers: Iterable[Subst]) -> list[Subst]:
    """Compose theta with each answer substitution."""
    return [compose(theta, a) for a in answers]


def restrict(theta: Subst, names: Iterable[str]) -> Subst:
    keep = names if isinstance(names, (set, frozenset)) else set(names)
    return {k: v for k, v in theta.items() if k in keep}


def freeze_subst(theta: Subst) -> FrozenSubst:
    return tuple(sorted(theta.items(), key=lambda kv: kv[0]))


def thaw_subst(frozen: FrozenSubst) -> Subst:
    return dict(frozen)


def format_subst(theta: Subst) -> str:
    items = []
    for k in sorted(theta):
        v = theta[k]
        items.append(f"{k}/{format_term(v) if is_term(v) else format_goal(v, 4)}")
    return "{" + ", ".join(items) + "}"


# ---------------------------------------------------------------------------
# Unification
# ---------------------------------------------------------------------------

_NUM_SUFFIX = re.compile(r"^(.*?)(\d+)$")


def _var_age(name: str) -> tuple[int, str]:
    """Heuristic creation order: bare names before numbered ones."""
    m = _NUM_SUFFIX.match(name)
    if m:
        return (int(m.group(2)) + 1, m.group(1))
    return (0, name)


def mgu(a: Arg, b: Arg) -> Optional[Subst]:
    """Most general unifier of two terms or two goals, with occurs check.

    Variable-variable pairs bind the newer-looking variable to the older one,
    so query variables survive as representatives.  Returns None when not
    unifiable (including kind mismatches).
    """
    return mgu_many([(a, b)])


def mgu_many(pairs: Sequence[tuple[Arg, Arg]]) -> Optional[Subst]:
    s: Subst = {}
    work = list(reversed(pairs))
    while work:
        a, b = work.pop()
        a, b = apply(a, s), apply(b, s)
        if a == b:
            continue
        if isinstance(a, Var) or isinstance(a, GVar):
            if (isinstance(b, Var) or isinstance(b, GVar)) and type(a) is type(b):
                if _var_age(a.name) > _var_age(b.name):
                    a, b = b, a
                s = _bind(s, b.name, a)
                continue
            if isinstance(a, Var) and is_term(b) or isinstance(a, GVar) and is_goal(b):
                if a.name in b.fvs:
                    return None  # occurs check
                s = _bind(s, a.name, b)
                continue
            return None
        if isinstance(b, Var) or isinstance(b, GVar):
            work.append((b, a))
            continue
        if isinstance(a, Struct) and isinstance(b, Struct):
            if a.functor != b.functor or len(a.args) != len(b.args):
                return None
            work.extend(zip(a.args, b.args))
            continue
        if isinstance(a, Atom) and isinstance(b, Atom):
            if a.pred != b.pred or len(a.args) != len(b.args):
                return None
            work.extend(zip(a.args, b.args))
            continue
        if isinstance(a, TermEq) and isinstance(b, TermEq):
            work.extend(((a.left, b.left), (a.right, b.right)))
            continue
        if isinstance(a, GoalEq) and isinstance(b, GoalEq):
            work.extend(((a.left, b.left), (a.right, b.right)))
            continue
        if isinstance(a, Conj) and isinstance(b, Conj) or isinstance(a, Disj) and isinstance(b, Disj):
            if len(a.parts) != len(b.parts):
                return None
            work.extend(zip(a.parts, b.parts))
            continue
        return None
    return s


def _bind(s: Subst, name: str, value: Arg) -> Subst:
    one = {name: value}
    out = {k: apply(v, one) for k, v in s.items()}
    out[name] = value
    return out


# ---------------------------------------------------------------------------
# One-way matching
# ---------------------------------------------------------------------------


def match(
    pattern: Arg,
    target: Arg,
    fixed: Iterable[str] = (),
    bound: Optional[Subst] = None,
) -> Optional[Subst]:
    """Find theta with apply(pattern, theta) == target, binding only pattern
    variables outside `fixed`.

    A trailing goal variable in a conjunction absorbs the remaining conjuncts
    (an empty remainder binds it to true), which is how definition bodies with
    continuation variables match clause-body ranges.
    """
    fixed_set = fixed if isinstance(fixed, (set, frozenset)) else set(fixed)
    s: Subst = dict(bound) if bound else {}
    if _match(pattern, target, fixed_set, s):
        return s
    return None


def _match_var(v: Union[Var, GVar], target: Arg, fixed: set[str], s: Subst) -> bool:
    if isinstance(v, Var) and not is_term(target):
        return False
    if isinstance(v, GVar) and not is_goal(target):
        return False
    if v.name in fixed:
        return type(target) is type(v) and target.name == v.name
    if v.name in s:
        return s[v.name] == target
    s[v.name] = target
    return True


def _match(pattern: Arg, target: Arg, fixed: set[str], s: Subst) -> bool:
    if isinstance(pattern, (Var, GVar)):
        return _match_var(pattern, target, fixed, s)
    if isinstance(pattern, Struct):
        return (
            isinstance(target, Struct)
            and pattern.functor == target.functor
            and len(pattern.args) == len(target.args)
            and all(_match(p, t, fixed, s) for p, t in zip(pattern.args, target.args))
        )
    if isinstance(pattern, Atom):
        return (
            isinstance(target, Atom)
            and pattern.pred == target.pred
            and len(pattern.args) == len(target.args)
            and all(_match(p, t, fixed, s) for p, t in zip(pattern.args, target.args))
        )
    if isinstance(pattern, GTrue):
        return isinstance(target, GTrue)
    if isinstance(pattern, GFalse):
        return isinstance(target, GFalse)
    if isinstance(pattern, TermEq):
        return (
            isinstance(target, TermEq)
            and _match(pattern.left, target.left, fixed, s)
            and _match(pattern.right, target.right, fixed, s)
        )
    if isinstance(pattern, GoalEq):
        return (
            isinstance(target, GoalEq)
            and _match(pattern.left, target.left, fixed, s)
            and _match(pattern.right, target.right, fixed, s)
        )
    if isinstance(pattern, Conj):
        if not is_goal(target):
            return False
        return _match_conj(pattern.parts, target, fixed, s)
    if isinstance(pattern, Disj):
        if not isinstance(target, Disj) or len(pattern.parts) != len(target.parts):
            return False
        return all(_match(p, t, fixed, s) for p, t in zip(pattern.parts, target.parts))
    raise TypeError(f"bad pattern {pattern!r}")


def _match_conj(pparts: tuple[Goal, ...], target: Goal, fixed: set[str], s: Subst) -> bool:
    tparts = target.parts if isinstance(target, Conj) else (() if isinstance(target, GTrue) else (target,))
    last = pparts[-1]
    absorbing = isinstance(last, GVar) and last.name not in fixed and last.name not in s
    if absorbing:
        head = pparts[:-1]
        if len(tparts) < len(head):
            return False
        if not all(_match(p, t, fixed, s) for p, t in zip(head, tparts)):
            return False
        return _match_var(last, conj(tparts[len(head):]), fixed, s)
    if len(pparts) != len(tparts):
        return False
    return all(_match(p, t, fixed, s) for p, t in zip(pparts, tparts))


# ---------------------------------------------------------------------------
# Instances, variants, renaming
# ---------------------------------------------------------------------------


def is_instance(x: Arg, general: Arg) -> bool:
    """True when x == apply(general, theta) for some theta (structural)."""
    return match(general, x) is not None


def variant_map(a: Arg, b: Arg) -> Optional[dict[str, str]]:
    """Variable bijection making a and b equal, or None."""
    fwd: dict[str, str] = {}
    bwd: dict[str, str] = {}
    if _variant(a, b, fwd, bwd):
        return fwd
    return None


def _variant(a: Arg, b: Arg, fwd: dict[str, str], bwd: dict[str, str]) -> bool:
    if isinstance(a, (Var, GVar)):
        if type(a) is not type(b):
            return False
        if a.name in fwd:
            return fwd[a.name] == b.name
        if b.name in bwd:
            return False
        fwd[a.name] = b.name
        bwd[b.name] = a.name
        return True
    if type(a) is not type(b):
        return False
    if isinstance(a, Struct):
        return (
            a.functor == b.functor
            and len(a.args) == len(b.args)
            and all(_variant(x, y, fwd, bwd) for x, y in zip(a.args, b.args))
        )
    if isinstance(a, Atom):
        return (
            a.pred == b.pred
            and len(a.args) == len(b.args)
            and all(_variant(x, y, fwd, bwd) for x, y in zip(a.args, b.args))
        )
    if isinstance(a, (TermEq, GoalEq)):
        return _variant(a.left, b.left, fwd, bwd) and _variant(a.right, b.right, fwd, bwd)
    if isinstance(a, (Conj, Disj)):
        return len(a.parts) == len(b.parts) and all(
            _variant(x, y, fwd, bwd) for x, y in zip(a.parts, b.parts)
        )
    return True  # GTrue / GFalse


def is_variant(a: Arg, b: Arg) -> bool:
    return variant_map(a, b) is not None


def _ordered_vars(x) -> list[Union[Var, GVar]]:
    out: list[Union[Var, GVar]] = []
    seen: set[str] = set()

    def walk(n):
        if isinstance(n, (Var, GVar)):
            if n.name not in seen:
                seen.add(n.name)
                out.append(n)
        elif isinstance(n, (Struct, Atom)):
            for a in n.args:
                walk(a)
        elif isinstance(n, (TermEq, GoalEq)):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, (Conj, Disj)):
            for p in n.parts:
                walk(p)
        elif isinstance(n, Clause):
            walk(n.head)
            walk(n.body)
        elif isinstance(n, (list, tuple)):
            for item in n:
                walk(item)

    walk(x)
    return out


def _strip_suffix(name: str) -> str:
    m = _NUM_SUFFIX.match(name)
    return m.group(1) if m and m.group(1) else name


def rename_apart(x, avoid: Iterable[str]):
    """Rename every variable of x away from `avoid`, keeping names that do
    not collide.  Returns (renamed, name_map)."""
    taken = set(avoid)
    mapping: Subst = {}
    for v in _ordered_vars(x):
        if v.name not in taken:
            taken.add(v.name)
            continue
        base = _strip_suffix(v.name)
        i = 1
        while f"{base}{i}" in taken:
            i += 1
        fresh = f"{base}{i}"
        taken.add(fresh)
        mapping[v.name] = Var(fresh) if isinstance(v, Var) else GVar(fresh)
    return apply(x, mapping), mapping


# ---------------------------------------------------------------------------
# Answer-set machinery
# ---------------------------------------------------------------------------


def mostgen(answers: Iterable[Subst], goal: Goal) -> list[Goal]:
    """Most general instances among {apply(goal, a)}: variants collapse to
    one representative (first under the printed-form order) and strict
    instances of another image are dropped.  Sorted by printed form."""
    images: dict[Goal, None] = {}
    for a in answers:
        images.setdefault(normalize(apply(goal, dict(a) if not isinstance(a, dict) else a)), None)
    reps: list[Goal] = []
    for g in sorted(images, key=format_goal):
        if not any(is_variant(g, r) for r in reps):
            reps.append(g)
    kept = [g for g in reps if not any(h is not g and is_instance(g, h) for h in reps)]
    return sorted(kept, key=format_goal)


def equally_general(
    answers_a: Iterable[Subst], answers_b: Iterable[Subst], goal: Goal
) -> bool:
    """Mutual instance coverage of the two answer sets' goal images."""
    ia = [normalize(apply(goal, dict(a) if not isinstance(a, dict) else a)) for a in answers_a]
    ib = [normalize(apply(goal, dict(b) if not isinstance(b, dict) else b)) for b in answers_b]
    return all(any(is_instance(x, y) for y in ib) for x in ia) and all(
        any(is_instance(y, x) for x in ia) for y in ib
    )

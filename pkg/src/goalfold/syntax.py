"""Syntax for a logic language whose predicates may take goals as arguments.

Terms are ordinary first-order terms.  Goals extend conjunction/disjunction
of atoms with goal variables (variables of kind bool that can be called),
goal equality, and atoms whose argument slots may carry goals, e.g.
continuations.  A program is a list of clauses; typing assigns every
function/predicate symbol one signature over {term, bool} per program, and
resolves each surface `=` to a term equality or a goal equality.

Goals are identified modulo associativity of `,` and `;` with neutral
elements true/false; `normalize` computes the canonical representative.
Evaluation and transformation work on that representative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence, Union

from .errors import GoalfoldError

TERM = "term"
BOOL = "bool"

# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class SyntaxError(GoalfoldError):  # noqa: A001 - the reason code must read "SyntaxError"
    """Malformed program or goal text."""


class TypeClash(GoalfoldError):
    """A symbol or variable is used at two incompatible kinds."""


class AmbiguousEquality(GoalfoldError):
    """An `=` whose sides cannot be resolved to term or goal kind."""


class InvalidPosition(GoalfoldError):
    """A position that does not address a subgoal of the given goal."""


class UndefinedPredicate(GoalfoldError):
    """A body atom calls a predicate the program never defines."""


# ---------------------------------------------------------------------------
# Abstract syntax
# ---------------------------------------------------------------------------
#
# Every node caches its free-variable name set in `fvs` (excluded from
# equality/hash); substitution and restriction are hot paths and use it to
# skip untouched subtrees.

_EMPTY_FS: frozenset[str] = frozenset()


def _fvs_union(parts) -> frozenset[str]:
    sets = [p.fvs for p in parts if p.fvs]
    if not sets:
        return _EMPTY_FS
    if len(sets) == 1:
        return sets[0]
    return frozenset().union(*sets)


@dataclass(frozen=True)
class Var:
    """Individual (term-kind) variable."""

    name: str
    fvs: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fvs", frozenset((self.name,)))

    def __repr__(self) -> str:
        return f"Var({self.name})"


@dataclass(frozen=True)
class Struct:
    """Function symbol application; a constant when args is empty."""

    functor: str
    args: tuple["Term", ...] = ()
    fvs: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fvs", _fvs_union(self.args))

    def __repr__(self) -> str:
        return f"Struct({self.functor}/{len(self.args)})"


Term = Union[Var, Struct]


@dataclass(frozen=True)
class GTrue:
    fvs: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fvs", _EMPTY_FS)


@dataclass(frozen=True)
class GFalse:
    fvs: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fvs", _EMPTY_FS)


@dataclass(frozen=True)
class GVar:
    """Goal (bool-kind) variable; callable when it appears as a conjunct."""

    name: str
    fvs: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fvs", frozenset((self.name,)))

    def __repr__(self) -> str:
        return f"GVar({self.name})"


@dataclass(frozen=True)
class TermEq:
    left: Term
    right: Term
    fvs: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fvs", _fvs_union((self.left, self.right)))


@dataclass(frozen=True)
class GoalEq:
    """Goal equality.  Not symmetric: only a goal-variable left side steps."""

    left: "Goal"
    right: "Goal"
    fvs: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fvs", _fvs_union((self.left, self.right)))


@dataclass(frozen=True)
class Atom:
    """Predicate call; argument slots may hold terms or goals."""

    pred: str
    args: tuple["Arg", ...] = ()
    fvs: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fvs", _fvs_union(self.args))

    @property
    def key(self) -> tuple[str, int]:
        return (self.pred, len(self.args))

    def __repr__(self) -> str:
        return f"Atom({self.pred}/{len(self.args)})"


@dataclass(frozen=True)
class Conj:
    parts: tuple["Goal", ...]
    fvs: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fvs", _fvs_union(self.parts))


@dataclass(frozen=True)
class Disj:
    parts: tuple["Goal", ...]
    fvs: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fvs", _fvs_union(self.parts))


Goal = Union[GTrue, GFalse, GVar, TermEq, GoalEq, Atom, Conj, Disj]
Arg = Union[Term, Goal]

TRUE = GTrue()
FALSE = GFalse()

_GOAL_TYPES = (GTrue, GFalse, GVar, TermEq, GoalEq, Atom, Conj, Disj)
_TERM_TYPES = (Var, Struct)


def is_goal(x: Arg) -> bool:
    return isinstance(x, _GOAL_TYPES)


def is_term(x: Arg) -> bool:
    return isinstance(x, _TERM_TYPES)


# ---------------------------------------------------------------------------
# Normal form
# ---------------------------------------------------------------------------


def normalize(g: Goal) -> Goal:
    """Canonical representative modulo assoc/neutral laws of `,` and `;`.

    Conjunctions are flattened with `true` parts dropped; disjunctions are
    flattened with `false` parts dropped.  `false` may remain inside a
    conjunction and `true` inside a disjunction: neither is neutral there.
    """
    if isinstance(g, Conj):
        parts: list[Goal] = []
        for p in g.parts:
            p = normalize(p)
            if isinstance(p, GTrue):
                continue
            if isinstance(p, Conj):
                parts.extend(p.parts)
            else:
                parts.append(p)
        if not parts:
            return TRUE
        if len(parts) == 1:
            return parts[0]
        return Conj(tuple(parts))
    if isinstance(g, Disj):
        parts = []
        for p in g.parts:
            p = normalize(p)
            if isinstance(p, GFalse):
                continue
            if isinstance(p, Disj):
                parts.extend(p.parts)
            else:
                parts.append(p)
        if not parts:
            return FALSE
        if len(parts) == 1:
            return parts[0]
        return Disj(tuple(parts))
    if isinstance(g, GoalEq):
        return GoalEq(normalize(g.left), normalize(g.right))
    if isinstance(g, Atom):
        return Atom(g.pred, tuple(normalize(a) if is_goal(a) else a for a in g.args))
    return g


def conjuncts(g: Goal) -> tuple[Goal, ...]:
    """View any goal as a conjunct list (true is the empty conjunction)."""
    if isinstance(g, Conj):
        return g.parts
    if isinstance(g, GTrue):
        return ()
    return (g,)


def disjuncts(g: Goal) -> tuple[Goal, ...]:
    if isinstance(g, Disj):
        return g.parts
    if isinstance(g, GFalse):
        return ()
    return (g,)


def conj(parts: Sequence[Goal]) -> Goal:
    return normalize(Conj(tuple(parts)))


def disj(parts: Sequence[Goal]) -> Goal:
    return normalize(Disj(tuple(parts)))


# ---------------------------------------------------------------------------
# Variables
# ---------------------------------------------------------------------------


def vars_of(x: Union[Arg, "Clause", Sequence[Arg]]) -> frozenset[str]:
    """Names of all variables (both kinds) occurring in x."""
    if isinstance(x, _GOAL_TYPES) or isinstance(x, _TERM_TYPES):
        return x.fvs
    if isinstance(x, Clause):
        return x.head.fvs | x.body.fvs
    out: set[str] = set()
    _collect_vars(x, out, None)
    return frozenset(out)


def goal_vars_of(x: Union[Arg, Sequence[Arg]]) -> set[str]:
    out: set[str] = set()
    _collect_vars(x, out, GVar)
    return out


def term_vars_of(x: Union[Arg, Sequence[Arg]]) -> set[str]:
    out: set[str] = set()
    _collect_vars(x, out, Var)
    return out


def _collect_vars(x, out: set[str], only) -> None:
    if isinstance(x, Var):
        if only in (None, Var):
            out.add(x.name)
    elif isinstance(x, GVar):
        if only in (None, GVar):
            out.add(x.name)
    elif isinstance(x, Struct):
        for a in x.args:
            _collect_vars(a, out, only)
    elif isinstance(x, Atom):
        for a in x.args:
            _collect_vars(a, out, only)
    elif isinstance(x, TermEq):
        _collect_vars(x.left, out, only)
        _collect_vars(x.right, out, only)
    elif isinstance(x, GoalEq):
        _collect_vars(x.left, out, only)
        _collect_vars(x.right, out, only)
    elif isinstance(x, (Conj, Disj)):
        for p in x.parts:
            _collect_vars(p, out, only)
    elif isinstance(x, Clause):
        _collect_vars(x.head, out, only)
        _collect_vars(x.body, out, only)
    elif isinstance(x, (list, tuple)):
        for item in x:
            _collect_vars(item, out, only)
    # GTrue/GFalse: nothing


def var_kinds_of(x: Union[Arg, "Clause"]) -> dict[str, str]:
    """Map each variable name in x to its kind."""
    kinds: dict[str, str] = {}
    for n in term_vars_of([x.head, x.body] if isinstance(x, Clause) else x):
        kinds[n] = TERM
    for n in goal_vars_of([x.head, x.body] if isinstance(x, Clause) else x):
        kinds[n] = BOOL
    return kinds


# ---------------------------------------------------------------------------
# Clauses and programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Clause:
    """One program clause.  Ids are append-only within a derivation."""

    id: int
    head: Atom
    body: Goal


@dataclass(frozen=True)
class SymbolInfo:
    """Program-wide signature of a function/predicate symbol."""

    result: str  # TERM for function symbols, BOOL for predicates
    args: tuple[str, ...]


@dataclass
class Program:
    """Typed clause list plus the signature table the typing produced."""

    clauses: list[Clause]
    symbols: dict[tuple[str, int], SymbolInfo]

    def pred_sigs(self) -> dict[tuple[str, int], SymbolInfo]:
        return {k: v for k, v in self.symbols.items() if v.result == BOOL}

    def defined_preds(self) -> set[tuple[str, int]]:
        return {c.head.key for c in self.clauses}

    def clauses_for(self, key: tuple[str, int]) -> list[Clause]:
        return [c for c in self.clauses if c.head.key == key]

    def clause_by_id(self, cid: int) -> Clause:
        for c in self.clauses:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def max_id(self) -> int:
        return max((c.id for c in self.clauses), default=0)


@dataclass
class EvalProgram:
    """Desugared form: one (params, body) pair per predicate."""

    preds: dict[tuple[str, int], tuple[tuple[Union[Var, GVar], ...], Goal]]
    symbols: dict[tuple[str, int], SymbolInfo]


# ---------------------------------------------------------------------------
# Positions
# ---------------------------------------------------------------------------
#
# A position is a tuple of steps descending the goal tree:
#   ('and', i)   i-th conjunct (conjunct view, so valid on single goals too)
#   ('or', i)    i-th disjunct
#   ('arg', i)   i-th argument of an atom (must be a goal slot)
#   ('eql',)     left side of a goal equality
#   ('eqr',)     right side of a goal equality
#   ('span', lo, hi)   conjunct range [lo, hi)
#   ('dspan', lo, hi)  disjunct range [lo, hi)
#
# Commands that rewrite the whole addressed subgoal accept a span only as
# the final step; commands that address one conjunct of a scope (the
# equality moves and eliminations) also take a span as the scope prefix.
# A disjunct span addresses adjacent branches as one disjunction, which is
# how two-branch laws and disjunctive definition bodies reach them; a
# disjunction written back at a disjunct span splices into the enclosing
# branch list.
#
# Printed form (1-based): c3, d1, a4, l, r, c3-5, d2-3, joined by '/';
# root = "root".

Position = tuple[tuple, ...]

ROOT: Position = ()


def format_position(pos: Position) -> str:
    if not pos:
        return "root"
    out = []
    for step in pos:
        tag = step[0]
        if tag == "and":
            out.append(f"c{step[1] + 1}")
        elif tag == "or":
            out.append(f"d{step[1] + 1}")
        elif tag == "arg":
            out.append(f"a{step[1] + 1}")
        elif tag == "eql":
            out.append("l")
        elif tag == "eqr":
            out.append("r")
        elif tag == "span":
            out.append(f"c{step[1] + 1}-{step[2]}")
        elif tag == "dspan":
            out.append(f"d{step[1] + 1}-{step[2]}")
        else:  # pragma: no cover - construction is controlled
            raise InvalidPosition(f"unknown step {step!r}")
    return "/".join(out)


_POS_SPAN = re.compile(r"^([cd])(\d+)-(\d+)$")
_POS_STEP = re.compile(r"^([cda])(\d+)$")


def parse_position(text: str) -> Position:
    text = text.strip()
    if text in ("root", ""):
        return ()
    steps: list[tuple] = []
    for piece in text.split("/"):
        piece = piece.strip()
        if piece == "l":
            steps.append(("eql",))
            continue
        if piece == "r":
            steps.append(("eqr",))
            continue
        m = _POS_SPAN.match(piece)
        if m:
            lo, hi = int(m.group(2)), int(m.group(3))
            if lo < 1 or hi < lo:
                raise InvalidPosition(f"bad span {piece!r}")
            steps.append(("span" if m.group(1) == "c" else "dspan", lo - 1, hi))
            continue
        m = _POS_STEP.match(piece)
        if m:
            tag = {"c": "and", "d": "or", "a": "arg"}[m.group(1)]
            idx = int(m.group(2))
            if idx < 1:
                raise InvalidPosition(f"bad index in {piece!r}")
            steps.append((tag, idx - 1))
            continue
        raise InvalidPosition(f"bad position step {piece!r}")
    return tuple(steps)


def subgoal_at(goal: Goal, pos: Position) -> Goal:
    """The subgoal addressed by pos; a span yields the sub-conjunction."""
    node = goal
    for step in pos:
        tag = step[0]
        if tag == "and":
            parts = conjuncts(node)
            if step[1] >= len(parts):
                raise InvalidPosition(f"{format_position(pos)}: conjunct {step[1] + 1} out of range")
            node = parts[step[1]]
        elif tag == "or":
            parts = disjuncts(node)
            if step[1] >= len(parts):
                raise InvalidPosition(f"{format_position(pos)}: disjunct {step[1] + 1} out of range")
            node = parts[step[1]]
        elif tag == "arg":
            if not isinstance(node, Atom) or step[1] >= len(node.args):
                raise InvalidPosition(f"{format_position(pos)}: no argument {step[1] + 1} here")
            arg = node.args[step[1]]
            if not is_goal(arg):
                raise InvalidPosition(f"{format_position(pos)}: argument {step[1] + 1} is a term")
            node = arg
        elif tag == "eql":
            if not isinstance(node, GoalEq):
                raise InvalidPosition(f"{format_position(pos)}: not a goal equality")
            node = node.left
        elif tag == "eqr":
            if not isinstance(node, GoalEq):
                raise InvalidPosition(f"{format_position(pos)}: not a goal equality")
            node = node.right
        elif tag == "span":
            parts = conjuncts(node)
            lo, hi = step[1], step[2]
            if lo >= hi or hi > len(parts):
                raise InvalidPosition(f"{format_position(pos)}: span out of range")
            node = conj(parts[lo:hi])
        elif tag == "dspan":
            parts = disjuncts(node)
            lo, hi = step[1], step[2]
            if lo >= hi or hi > len(parts):
                raise InvalidPosition(f"{format_position(pos)}: disjunct span out of range")
            node = disj(parts[lo:hi])
        else:
            raise InvalidPosition(f"unknown step {step!r}")
    return node


def replace_at(goal: Goal, pos: Position, new: Goal) -> Goal:
    """Goal with the subgoal at pos replaced by `new`, renormalized."""
    if not pos:
        return normalize(new)
    step, rest = pos[0], pos[1:]
    tag = step[0]
    if tag == "and":
        parts = list(conjuncts(goal))
        if step[1] >= len(parts):
            raise InvalidPosition(f"conjunct {step[1] + 1} out of range")
        parts[step[1]] = replace_at(parts[step[1]], rest, new)
        return conj(parts)
    if tag == "or":
        parts = list(disjuncts(goal))
        if step[1] >= len(parts):
            raise InvalidPosition(f"disjunct {step[1] + 1} out of range")
        parts[step[1]] = replace_at(parts[step[1]], rest, new)
        return disj(parts)
    if tag == "arg":
        if not isinstance(goal, Atom) or step[1] >= len(goal.args):
            raise InvalidPosition(f"no argument {step[1] + 1} here")
        arg = goal.args[step[1]]
        if not is_goal(arg):
            raise InvalidPosition(f"argument {step[1] + 1} is a term")
        args = list(goal.args)
        args[step[1]] = replace_at(arg, rest, new)
        return Atom(goal.pred, tuple(args))
    if tag == "eql":
        if not isinstance(goal, GoalEq):
            raise InvalidPosition("not a goal equality")
        return GoalEq(replace_at(goal.left, rest, new), goal.right)
    if tag == "eqr":
        if not isinstance(goal, GoalEq):
            raise InvalidPosition("not a goal equality")
        return GoalEq(goal.left, replace_at(goal.right, rest, new))
    if tag == "span":
        if rest:
            raise InvalidPosition("span step must be last")
        parts = list(conjuncts(goal))
        lo, hi = step[1], step[2]
        if lo >= hi or hi > len(parts):
            raise InvalidPosition("span out of range")
        return conj(parts[:lo] + [new] + parts[hi:])
    raise InvalidPosition(f"unknown step {step!r}")


def iter_goal_positions(g: Goal, prefix: Position = ()) -> Iterator[tuple[Position, Goal]]:
    """All canonical element positions in g, root included, preorder."""
    yield prefix, g
    if isinstance(g, Conj):
        for i, p in enumerate(g.parts):
            yield from iter_goal_positions(p, prefix + (("and", i),))
    elif isinstance(g, Disj):
        for i, p in enumerate(g.parts):
            yield from iter_goal_positions(p, prefix + (("or", i),))
    elif isinstance(g, GoalEq):
        yield from iter_goal_positions(g.left, prefix + (("eql",),))
        yield from iter_goal_positions(g.right, prefix + (("eqr",),))
    elif isinstance(g, Atom):
        for i, a in enumerate(g.args):
            if is_goal(a):
                yield from iter_goal_positions(a, prefix + (("arg", i),))


def local_vars(head: Atom, body: Goal, pos: Position) -> set[str]:
    """Variables of the subgoal at pos occurring neither in the head nor in
    the rest of the body."""
    sub = subgoal_at(body, pos)
    ctx = replace_at(body, pos, TRUE)
    return vars_of(sub) - vars_of(head) - vars_of(ctx)


def is_ordinary(g: Goal) -> bool:
    """True when g has no goal variables, goal equalities, or goal arguments."""
    if isinstance(g, (GVar, GoalEq)):
        return False
    if isinstance(g, Atom):
        return all(is_term(a) for a in g.args)
    if isinstance(g, (Conj, Disj)):
        return all(is_ordinary(p) for p in g.parts)
    return True  # true / false / term equality


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC_DISJ = 1
_PREC_CONJ = 2
_PREC_EQ = 3
_PREC_PRIMARY = 4


def _numeral_value(t: Term) -> Optional[int]:
    n = 0
    while isinstance(t, Struct) and t.functor == "s" and len(t.args) == 1:
        n += 1
        t = t.args[0]
    if isinstance(t, Struct) and t.functor == "0" and not t.args:
        return n
    return None


def format_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    v = _numeral_value(t)
    if v is not None:
        return str(v)
    if t.functor == "[]" and not t.args:
        return "[]"
    if t.functor == "." and len(t.args) == 2:
        items = []
        node: Term = t
        while isinstance(node, Struct) and node.functor == "." and len(node.args) == 2:
            items.append(format_term(node.args[0]))
            node = node.args[1]
        if isinstance(node, Struct) and node.functor == "[]" and not node.args:
            return "[" + ",".join(items) + "]"
        return "[" + ",".join(items) + "|" + format_term(node) + "]"
    if not t.args:
        return t.functor
    return t.functor + "(" + ",".join(format_term(a) for a in t.args) + ")"


def format_goal(g: Goal, prec: int = _PREC_DISJ) -> str:
    if isinstance(g, GTrue):
        return "true"
    if isinstance(g, GFalse):
        return "false"
    if isinstance(g, GVar):
        return g.name
    if isinstance(g, TermEq):
        s = f"{format_term(g.left)} = {format_term(g.right)}"
        return f"({s})" if prec > _PREC_EQ else s
    if isinstance(g, GoalEq):
        s = f"{format_goal(g.left, _PREC_PRIMARY)} = {format_goal(g.right, _PREC_PRIMARY)}"
        return f"({s})" if prec > _PREC_EQ else s
    if isinstance(g, Atom):
        if not g.args:
            return g.pred
        args = []
        for a in g.args:
            args.append(format_term(a) if is_term(a) else format_goal(a, _PREC_PRIMARY))
        return g.pred + "(" + ",".join(args) + ")"
    if isinstance(g, Conj):
        s = ", ".join(format_goal(p, _PREC_EQ) for p in g.parts)
        return f"({s})" if prec > _PREC_CONJ else s
    if isinstance(g, Disj):
        s = " ; ".join(format_goal(p, _PREC_EQ) for p in g.parts)
        return f"({s})" if prec > _PREC_DISJ else s
    raise TypeError(f"not a goal: {g!r}")


def format_clause(c: Clause, resugar: bool = True) -> str:
    head, body = (resugar_clause(c.head, c.body) if resugar else (c.head, c.body))
    if isinstance(body, GTrue):
        return format_goal(head) + "."
    return format_goal(head) + " :- " + format_goal(body) + "."


def resugar_clause(head: Atom, body: Goal) -> tuple[Atom, Goal]:
    """Hoist leading equalities on head variables back into head patterns.

    A leading conjunct (V = u) with V a head variable not occurring in u is
    folded into the clause by applying {V/u} to head and remaining body.
    """
    from . import subst as _subst  # local import: subst depends on syntax

    while True:
        parts = conjuncts(body)
        if not parts:
            break
        first = parts[0]
        binding = None
        if isinstance(first, TermEq) and isinstance(first.left, Var):
            if first.left.name not in vars_of(first.right):
                binding = (first.left.name, first.right)
        elif isinstance(first, GoalEq) and isinstance(first.left, GVar):
            if first.left.name not in vars_of(first.right):
                binding = (first.left.name, first.right)
        if binding is None or binding[0] not in vars_of(head):
            break
        theta = {binding[0]: binding[1]}
        head = _subst.apply(head, theta)
        body = _subst.apply(conj(parts[1:]), theta)
    return head, body


def format_program(p: Program, resugar: bool = True, directives: bool = True) -> str:
    lines: list[str] = []
    if directives:
        for key in sorted(p.pred_sigs()):
            info = p.symbols[key]
            if key[1] == 0:
                lines.append(f":- type {key[0]}.")
            else:
                lines.append(f":- type {key[0]}({','.join(info.args)}).")
        if lines:
            lines.append("")
    for c in p.clauses:
        lines.append(format_clause(c, resugar=resugar))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+|%[^\n]*)
      | (?P<arrow>:-)
      | (?P<int>\d+)
      | (?P<ctx>@[A-Z][A-Za-z0-9_]*)
      | (?P<var>[A-Z_][A-Za-z0-9_]*)
      | (?P<name>[a-z][A-Za-z0-9_]*)
      | (?P<punct>[()\[\]|,;=.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    out: list[_Token] = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise SyntaxError(f"unexpected character {text[i]!r} at offset {i}")
        i = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        out.append(_Token(kind, m.group(), m.start()))
    out.append(_Token("eof", "", len(text)))
    return out


# ---------------------------------------------------------------------------
# Raw (untyped) syntax produced by the parser
# ---------------------------------------------------------------------------


@dataclass
class _RVar:
    name: str


@dataclass
class _RApp:
    functor: str
    args: list
    # set for nodes built from numeral and list sugar, which is term-only syntax
    term_syntax: bool = False

    @property
    def key(self) -> tuple[str, int]:
        return (self.functor, len(self.args))


@dataclass
class _RTrue:
    pass


@dataclass
class _RFalse:
    pass


@dataclass
class _REq:
    left: object
    right: object
    cell: object = None


@dataclass
class _RConj:
    parts: list


@dataclass
class _RDisj:
    parts: list


@dataclass
class _RClause:
    head: _RApp
    body: object
    text: str


class _Parser:
    def __init__(self, text: str, allow_context: bool = False):
        self.toks = _tokenize(text)
        self.i = 0
        self.allow_context = allow_context

    def peek(self) -> _Token:
        return self.toks[self.i]

    def next(self) -> _Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, text: Optional[str] = None) -> _Token:
        t = self.next()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise SyntaxError(f"expected {want!r}, got {t.text!r} at offset {t.pos}")
        return t

    def at_punct(self, ch: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == ch

    # program := (directive | clause)* eof
    def parse_program_items(self) -> tuple[list[_RClause], list[tuple[str, tuple[str, ...]]]]:
        clauses: list[_RClause] = []
        directives: list[tuple[str, tuple[str, ...]]] = []
        while self.peek().kind != "eof":
            if self.peek().kind == "arrow":
                directives.append(self.parse_directive())
            else:
                clauses.append(self.parse_clause())
        return clauses, directives

    def parse_directive(self) -> tuple[str, tuple[str, ...]]:
        self.expect("arrow")
        t = self.expect("name")
        if t.text != "type":
            raise SyntaxError(f"unknown directive {t.text!r} at offset {t.pos}")
        name = self.expect("name").text
        kinds: list[str] = []
        if self.at_punct("("):
            self.next()
            while True:
                k = self.expect("name").text
                if k not in (TERM, BOOL):
                    raise SyntaxError(f"bad kind {k!r} in type directive")
                kinds.append(k)
                if self.at_punct(","):
                    self.next()
                    continue
                break
            self.expect("punct", ")")
        self.expect("punct", ".")
        return name, tuple(kinds)

    def parse_clause(self) -> _RClause:
        start = self.peek().pos
        head = self.parse_primary()
        if not isinstance(head, _RApp):
            raise SyntaxError(f"clause head must be a predicate call, at offset {start}")
        if self.peek().kind == "arrow":
            self.next()
            body = self.parse_disj()
        else:
            body = _RTrue()
        self.expect("punct", ".")
        return _RClause(head, body, text="")

    def parse_disj(self):
        parts = [self.parse_conj()]
        while self.at_punct(";"):
            self.next()
            parts.append(self.parse_conj())
        return parts[0] if len(parts) == 1 else _RDisj(parts)

    def parse_conj(self):
        parts = [self.parse_eq()]
        while self.at_punct(","):
            self.next()
            parts.append(self.parse_eq())
        return parts[0] if len(parts) == 1 else _RConj(parts)

    def parse_eq(self):
        left = self.parse_primary()
        if self.at_punct("="):
            self.next()
            right = self.parse_primary()
            return _REq(left, right)
        return left

    def parse_primary(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            node: object = _RApp("0", [], term_syntax=True)
            for _ in range(int(t.text)):
                node = _RApp("s", [node], term_syntax=True)
            return node
        if t.kind == "var":
            self.next()
            return _RVar(t.text)
        if t.kind == "name":
            self.next()
            if t.text == "true":
                return _RTrue()
            if t.text == "false":
                return _RFalse()
            args: list = []
            if self.at_punct("("):
                self.next()
                while True:
                    args.append(self.parse_eq())
                    if self.at_punct(","):
                        self.next()
                        continue
                    break
                self.expect("punct", ")")
            return _RApp(t.text, args)
        if t.kind == "ctx":
            if not self.allow_context:
                raise SyntaxError(f"context variable {t.text!r} not allowed here, at offset {t.pos}")
            self.next()
            self.expect("punct", "[")
            inner = self.parse_disj()
            self.expect("punct", "]")
            return _RApp(t.text, [inner])
        if t.kind == "punct" and t.text == "(":
            self.next()
            inner = self.parse_disj()
            self.expect("punct", ")")
            return inner
        if t.kind == "punct" and t.text == "[":
            return self.parse_list()
        raise SyntaxError(f"unexpected {t.text!r} at offset {t.pos}")

    def parse_list(self):
        self.expect("punct", "[")
        if self.at_punct("]"):
            self.next()
            return _RApp("[]", [], term_syntax=True)
        items = [self.parse_eq()]
        while self.at_punct(","):
            self.next()
            items.append(self.parse_eq())
        if self.at_punct("|"):
            self.next()
            tail = self.parse_eq()
        else:
            tail = _RApp("[]", [], term_syntax=True)
        self.expect("punct", "]")
        node = tail
        for item in reversed(items):
            node = _RApp(".", [item, node], term_syntax=True)
        return node


# ---------------------------------------------------------------------------
# Kind inference
# ---------------------------------------------------------------------------


class _Cell:
    __slots__ = ("parent", "kind")

    def __init__(self, kind: Optional[str] = None):
        self.parent = self
        self.kind = kind


def _find(c: _Cell) -> _Cell:
    while c.parent is not c:
        c.parent = c.parent.parent
        c = c.parent
    return c


class _KindSolver:
    def __init__(self) -> None:
        self.res: dict[tuple[str, int], _Cell] = {}
        self.arg: dict[tuple[str, int], list[_Cell]] = {}
        self.eqs: list[tuple[_REq, str]] = []

    def cell_for(self, key: tuple[str, int]) -> tuple[_Cell, list[_Cell]]:
        if key not in self.res:
            self.res[key] = _Cell()
            self.arg[key] = [_Cell() for _ in range(key[1])]
        return self.res[key], self.arg[key]

    def seed(self, symbols: Mapping[tuple[str, int], SymbolInfo]) -> None:
        for key, info in symbols.items():
            res, args = self.cell_for(key)
            self.assign(res, info.result, f"{key[0]}/{key[1]}")
            for cell, k in zip(args, info.args):
                self.assign(cell, k, f"{key[0]}/{key[1]}")

    def assign(self, c: _Cell, kind: str, where: str) -> None:
        c = _find(c)
        if c.kind is None:
            c.kind = kind
        elif c.kind != kind:
            raise TypeClash(f"{where}: used both as {c.kind} and {kind}")

    def union(self, a: _Cell, b: _Cell, where: str) -> None:
        a, b = _find(a), _find(b)
        if a is b:
            return
        if a.kind is not None and b.kind is not None and a.kind != b.kind:
            raise TypeClash(f"{where}: used both as {a.kind} and {b.kind}")
        kind = a.kind if a.kind is not None else b.kind
        b.parent = a
        a.kind = kind

    def type_clause(self, rc: _RClause, where: str) -> dict[str, _Cell]:
        vcells: dict[str, _Cell] = {}
        res, args = self.cell_for(rc.head.key)
        self.assign(res, BOOL, where)
        for cell, a in zip(args, rc.head.args):
            self.type_expr(a, cell, vcells, where)
        bcell = _Cell(BOOL)
        self.type_expr(rc.body, bcell, vcells, where)
        return vcells

    def type_goal(self, raw, vcells: dict[str, _Cell], where: str) -> None:
        self.type_expr(raw, _Cell(BOOL), vcells, where)

    def type_expr(self, e, cell: _Cell, vcells: dict[str, _Cell], where: str) -> None:
        if isinstance(e, _RVar):
            vc = vcells.setdefault(e.name, _Cell())
            self.union(vc, cell, f"{where}: variable {e.name}")
        elif isinstance(e, (_RTrue, _RFalse)):
            self.assign(cell, BOOL, where)
        elif isinstance(e, (_RConj, _RDisj)):
            self.assign(cell, BOOL, where)
            for p in e.parts:
                self.type_expr(p, _Cell(BOOL), vcells, where)
        elif isinstance(e, _REq):
            self.assign(cell, BOOL, where)
            c = _Cell()
            e.cell = c
            self.type_expr(e.left, c, vcells, where)
            self.type_expr(e.right, c, vcells, where)
            self.eqs.append((e, where))
        elif isinstance(e, _RApp):
            res, args = self.cell_for(e.key)
            if e.term_syntax:
                self.assign(res, TERM, f"{where}: symbol {e.functor}/{len(e.args)}")
            if e.functor.startswith("@"):
                # context metavariable: boolean hole inside a boolean context
                self.assign(res, BOOL, f"{where}: context {e.functor}")
                for acell in args:
                    self.assign(acell, BOOL, f"{where}: context {e.functor}")
            self.union(res, cell, f"{where}: symbol {e.functor}/{len(e.args)}")
            for acell, a in zip(args, e.args):
                self.type_expr(a, acell, vcells, where)
        else:  # pragma: no cover
            raise TypeError(f"bad raw node {e!r}")

    def check_equalities(self) -> None:
        for e, where in self.eqs:
            if _find(e.cell).kind is None:
                raise AmbiguousEquality(
                    f"{where}: cannot tell whether `=` compares terms or goals; "
                    "add a type directive"
                )

    def kind(self, c: _Cell) -> str:
        k = _find(c).kind
        return k if k is not None else TERM

    def symbol_table(self) -> dict[tuple[str, int], SymbolInfo]:
        out: dict[tuple[str, int], SymbolInfo] = {}
        for key, res in self.res.items():
            out[key] = SymbolInfo(self.kind(res), tuple(self.kind(c) for c in self.arg[key]))
        return out


def _build_term(e, solver: _KindSolver, vcells: dict[str, _Cell], where: str) -> Term:
    if isinstance(e, _RVar):
        return Var(e.name)
    if isinstance(e, _RApp):
        _, acells = solver.cell_for(e.key)
        for c in acells:
            if solver.kind(c) != TERM:
                raise TypeClash(f"{where}: function symbol {e.functor} applied to a goal")
        return Struct(e.functor, tuple(_build_term(a, solver, vcells, where) for a in e.args))
    raise TypeClash(f"{where}: goal used where a term is required")


def _build_goal(e, solver: _KindSolver, vcells: dict[str, _Cell], where: str) -> Goal:
    if isinstance(e, _RTrue):
        return TRUE
    if isinstance(e, _RFalse):
        return FALSE
    if isinstance(e, _RVar):
        return GVar(e.name)
    if isinstance(e, _RConj):
        return conj([_build_goal(p, solver, vcells, where) for p in e.parts])
    if isinstance(e, _RDisj):
        return disj([_build_goal(p, solver, vcells, where) for p in e.parts])
    if isinstance(e, _REq):
        if solver.kind(e.cell) == TERM:
            return TermEq(
                _build_term(e.left, solver, vcells, where),
                _build_term(e.right, solver, vcells, where),
            )
        return GoalEq(
            _build_goal(e.left, solver, vcells, where),
            _build_goal(e.right, solver, vcells, where),
        )
    if isinstance(e, _RApp):
        res, acells = solver.cell_for(e.key)
        if solver.kind(res) != BOOL:
            raise TypeClash(f"{where}: term {e.functor} used as a goal")
        args: list[Arg] = []
        for a, c in zip(e.args, acells):
            if solver.kind(c) == BOOL:
                args.append(_build_goal(a, solver, vcells, where))
            else:
                args.append(_build_term(a, solver, vcells, where))
        return Atom(e.functor, tuple(args))
    raise TypeError(f"bad raw node {e!r}")


def _build_arg(e, solver: _KindSolver, vcells, kind: str, where: str) -> Arg:
    if kind == BOOL:
        return _build_goal(e, solver, vcells, where)
    return _build_term(e, solver, vcells, where)


def infer_types(
    raw_clauses: list[_RClause],
    directives: Sequence[tuple[str, tuple[str, ...]]] = (),
) -> Program:
    """Resolve kinds and produce a typed Program.

    One signature per symbol per program; surface `=` nodes become term or
    goal equalities; unresolved kinds default to term after every equality
    has been checked for ambiguity.
    """
    solver = _KindSolver()
    for name, kinds in directives:
        res, args = solver.cell_for((name, len(kinds)))
        solver.assign(res, BOOL, f"type directive {name}")
        for c, k in zip(args, kinds):
            solver.assign(c, k, f"type directive {name}")
    per_clause: list[dict[str, _Cell]] = []
    for idx, rc in enumerate(raw_clauses):
        where = f"clause {idx + 1} ({rc.head.functor}/{len(rc.head.args)})"
        per_clause.append(solver.type_clause(rc, where))
    solver.check_equalities()

    clauses: list[Clause] = []
    for idx, (rc, vcells) in enumerate(zip(raw_clauses, per_clause)):
        where = f"clause {idx + 1} ({rc.head.functor}/{len(rc.head.args)})"
        _, acells = solver.cell_for(rc.head.key)
        head_args = tuple(
            _build_arg(a, solver, vcells, solver.kind(c), where)
            for a, c in zip(rc.head.args, acells)
        )
        head = Atom(rc.head.functor, head_args)
        body = normalize(_build_goal(rc.body, solver, vcells, where))
        clauses.append(Clause(idx + 1, head, body))
    return Program(clauses, solver.symbol_table())


def parse_program(text: str) -> Program:
    """Parse and type a program; raises SyntaxError / TypeClash / AmbiguousEquality."""
    parser = _Parser(text)
    raw, directives = parser.parse_program_items()
    return infer_types(raw, directives)


def parse_goal(text: str, program: Optional[Program] = None) -> Goal:
    """Parse and type a goal against a program's signature table."""
    parser = _Parser(text)
    raw = parser.parse_disj()
    if parser.peek().kind == "punct" and parser.peek().text == ".":
        parser.next()
    if parser.peek().kind != "eof":
        t = parser.peek()
        raise SyntaxError(f"trailing input at offset {t.pos}: {t.text!r}")
    solver = _KindSolver()
    if program is not None:
        solver.seed(program.symbols)
    vcells: dict[str, _Cell] = {}
    solver.type_goal(raw, vcells, "goal")
    solver.check_equalities()
    return normalize(_build_goal(raw, solver, vcells, "goal"))


def parse_law_goals(
    lhs_text: str,
    rhs_text: str,
    program: Optional[Program] = None,
    allow_context: bool = False,
    var_kinds: Optional[dict[str, str]] = None,
) -> tuple[Goal, Goal]:
    """Parse the two sides of a replacement law with one shared kind solver.

    Variables occurring on both sides get a single consistent kind; var_kinds
    pins kinds that the sides alone leave open.  With allow_context a `@C[g]`
    form is accepted and built as an atom whose functor keeps the `@` marker.
    """
    raws = []
    for text in (lhs_text, rhs_text):
        parser = _Parser(text, allow_context=allow_context)
        raw = parser.parse_disj()
        if parser.peek().kind == "punct" and parser.peek().text == ".":
            parser.next()
        if parser.peek().kind != "eof":
            t = parser.peek()
            raise SyntaxError(f"trailing input at offset {t.pos}: {t.text!r}")
        raws.append(raw)
    solver = _KindSolver()
    if program is not None:
        solver.seed(program.symbols)
    vcells: dict[str, _Cell] = {}
    for vname, kind in (var_kinds or {}).items():
        vcells[vname] = _Cell(kind)
    solver.type_goal(raws[0], vcells, "law lhs")
    solver.type_goal(raws[1], vcells, "law rhs")
    solver.check_equalities()
    lhs = normalize(_build_goal(raws[0], solver, vcells, "law lhs"))
    rhs = normalize(_build_goal(raws[1], solver, vcells, "law rhs"))
    return lhs, rhs


def parse_clause_text(
    text: str, program: Optional[Program] = None, cid: int = 0
) -> tuple[Clause, dict[tuple[str, int], SymbolInfo]]:
    """Parse one clause against an existing signature table.

    The text may open with `:- type name(kind, ...)` directives to pin
    signatures the clause alone leaves ambiguous.  Returns the clause
    together with the signature table extended by any symbols the clause
    introduces.  The input program is not modified.
    """
    parser = _Parser(text)
    raws, directives = parser.parse_program_items()
    if len(raws) != 1:
        raise SyntaxError(f"expected exactly one clause, found {len(raws)}")
    rc = raws[0]
    solver = _KindSolver()
    merged: dict[tuple[str, int], SymbolInfo] = {}
    if program is not None:
        solver.seed(program.symbols)
        merged.update(program.symbols)
    for name, kinds in directives:
        res, acells = solver.cell_for((name, len(kinds)))
        solver.assign(res, BOOL, f"type directive {name}")
        for c, k in zip(acells, kinds):
            solver.assign(c, k, f"type directive {name}")
    where = f"clause ({rc.head.functor}/{len(rc.head.args)})"
    vcells = solver.type_clause(rc, where)
    solver.check_equalities()
    _, acells = solver.cell_for(rc.head.key)
    head_args = tuple(
        _build_arg(a, solver, vcells, solver.kind(c), where)
        for a, c in zip(rc.head.args, acells)
    )
    head = Atom(rc.head.functor, head_args)
    body = normalize(_build_goal(rc.body, solver, vcells, where))
    merged.update(solver.symbol_table())
    return Clause(cid, head, body), merged


# ---------------------------------------------------------------------------
# Desugaring: one disjunctive clause per predicate
# ---------------------------------------------------------------------------


def _fresh_param_names(arity: int, avoid: set[str]) -> list[str]:
    names = []
    i = 1
    while len(names) < arity:
        cand = f"V{i}"
        if cand not in avoid:
            names.append(cand)
        i += 1
    return names


def desugar_clause(clause: Clause, params: Sequence[Union[Var, GVar]]) -> Goal:
    """Clause body as a disjunct over the given head parameters.

    Non-variable or repeated head arguments turn into leading equalities;
    first-occurrence variable arguments are renamed to the parameter.
    """
    from . import subst as _subst

    rename: dict[str, Arg] = {}
    eqs: list[Goal] = []
    seen: set[str] = set()
    for param, arg in zip(params, clause.head.args):
        if isinstance(arg, Var) and arg.name not in seen and isinstance(param, Var):
            rename[arg.name] = param
            seen.add(arg.name)
        elif isinstance(arg, GVar) and arg.name not in seen and isinstance(param, GVar):
            rename[arg.name] = param
            seen.add(arg.name)
        else:
            eqs.append((param, arg))
    parts: list[Goal] = []
    for param, arg in eqs:
        arg = _subst.apply(arg, rename)
        if isinstance(param, Var):
            parts.append(TermEq(param, arg))
        else:
            parts.append(GoalEq(param, arg))
    parts.append(_subst.apply(clause.body, rename))
    return conj(parts)


def desugar_program(program: Program) -> EvalProgram:
    """Merge clauses per predicate into (params, disjunctive body) pairs.

    Raises UndefinedPredicate when a body calls a predicate with no clause.
    """
    order: list[tuple[str, int]] = []
    groups: dict[tuple[str, int], list[Clause]] = {}
    for c in program.clauses:
        key = c.head.key
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(c)

    preds: dict[tuple[str, int], tuple[tuple[Union[Var, GVar], ...], Goal]] = {}
    for key in order:
        clauses = groups[key]
        info = program.symbols[key]
        first = clauses[0]
        head_args = first.head.args
        all_distinct_vars = (
            len(clauses) == 1
            and all(isinstance(a, (Var, GVar)) for a in head_args)
            and len({a.name for a in head_args}) == len(head_args)  # type: ignore[union-attr]
        )
        if all_distinct_vars:
            params = tuple(head_args)  # type: ignore[assignment]
        else:
            avoid: set[str] = set()
            for c in clauses:
                avoid |= vars_of(c)
            names = _fresh_param_names(key[1], avoid)
            params = tuple(
                Var(n) if k == TERM else GVar(n) for n, k in zip(names, info.args)
            )
        body = disj([desugar_clause(c, params) for c in clauses])
        preds[key] = (params, body)

    defined = set(preds)
    for key, (_, body) in preds.items():
        for _, sub in iter_goal_positions(body):
            if isinstance(sub, Atom) and sub.key not in defined:
                raise UndefinedPredicate(
                    f"{key[0]}/{key[1]} calls undefined predicate {sub.pred}/{len(sub.args)}"
                )
    return EvalProgram(preds, dict(program.symbols))

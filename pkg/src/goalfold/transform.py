"""Transformation sequences: rules, derivation scripts, and classification.

A TransformationSequence starts from a program and applies recorded rule
steps: definition introduction, unfolding (also inside goal arguments),
parallel leftmost unfolding, folding with respect to an introduced
definition, goal replacement justified by a law, and a small set of
equality-manipulation steps that are themselves law instances (equality
introduction/elimination, leftward moves, substitution through an equality,
local renaming).  Every step snapshots the resulting program, so the whole
sequence can be inspected, replayed, undone, and classified:

- admissible: every definition used for folding is also parallel leftmost
  unfolded somewhere in the sequence (in any order), which is what the
  correctness theorem needs;
- ordered: definition introductions come first, then the block of parallel
  leftmost unfoldings covering every definition later folded, then the rest;
- weak/strong correctness and safety preservation, downgraded to
  "conditional" when any applied law is merely assumed.

Programs are kept in merged form: one clause per predicate, variable head
parameters, and a body that disjoins the original clause bodies in source
order.  Displays resugar leading equalities back into head patterns, so the
merged form is a representation choice, not a transformation step.

The module also reads and writes derivation scripts (.gds), a line oriented
format whose commands mirror the methods here one to one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from .errors import GoalfoldError
from .evaluate import default_fuel, evaluate
from .laws import (
    ARROW,
    ASSUMED,
    BUILTIN_LAWS,
    EQUIVALENT,
    STRONG,
    STRONGEQ,
    UNKNOWN_STATUS,
    WEAK,
    LawStatusUnknown,
    ReplacementLaw,
    SideConditionViolated,
    cet_decide,
    instantiate_eq_drop,
    instantiate_eq_intro,
    instantiate_eq_rearrange,
    instantiate_eq_subst,
    instantiate_renaming,
    parse_law_declaration,
    splice_context,
    term_eq_leftmove,
)
from .subst import FrozenSubst, apply, freeze_subst, match, mgu_many, rename_apart
from .syntax import (
    Arg,
    Atom,
    Clause,
    Conj,
    Disj,
    FALSE,
    GFalse,
    GTrue,
    GVar,
    Goal,
    GoalEq,
    InvalidPosition,
    Position,
    Program,
    Struct,
    TRUE,
    TermEq,
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
    iter_goal_positions,
    normalize,
    parse_clause_text,
    parse_goal,
    parse_position,
    parse_program,
    replace_at,
    subgoal_at,
    var_kinds_of,
    vars_of,
)

# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class NoSuchClause(GoalfoldError):
    """The clause id does not name a clause of the current program."""


class NoSuchLaw(GoalfoldError):
    """The law name is neither declared in this sequence nor builtin."""


class PredicateAlreadyUsed(GoalfoldError):
    """Definition introduction needs a predicate symbol new to the sequence."""


class BodyPredNotInP0(GoalfoldError):
    """Definition bodies may only call predicates of the initial program."""


class ParamNotInBody(GoalfoldError):
    """Definition heads take distinct variables that occur in the body."""


class NotAnAtom(GoalfoldError):
    """Unfolding needs the position of a predicate call."""


class PrimitivePredicate(GoalfoldError):
    """true/false/equality/connectives cannot be unfolded."""


class NoDefinition(GoalfoldError):
    """The called predicate has no clause in the initial program or the defs."""


class NotADefinition(GoalfoldError):
    """Folding works with respect to an introduced definition only."""


class FoldConditionViolated(GoalfoldError):
    """One of the two fold side conditions on local variables fails."""

    def __init__(self, condition: int, message: str) -> None:
        super().__init__(message)
        self.condition = condition


class NoFoldMatch(GoalfoldError):
    """The definition body does not match the selected subgoal."""


class ShapeMismatch(GoalfoldError):
    """Parallel leftmost unfolding needs an atom first in every disjunct."""


class LawNotApplicable(GoalfoldError):
    """The law does not match here, or its kind does not sanction the step."""


class VConditionViolated(GoalfoldError):
    """A law variable would be identified with a variable of the context."""


class ScriptError(GoalfoldError):
    """A derivation script line failed to parse or to apply."""


# ---------------------------------------------------------------------------
# Merged program form
# ---------------------------------------------------------------------------


def merge_program(program: Program) -> Program:
    """One clause per predicate, in first-occurrence order, ids from 1.

    Head arguments become distinct variable parameters; non-variable or
    repeated arguments turn into leading body equalities and multiple
    clauses disjoin in source order.  Idempotent.
    """
    ep = desugar_program(program)
    clauses = [
        Clause(i + 1, Atom(key[0], params), normalize(body))
        for i, (key, (params, body)) in enumerate(ep.preds.items())
    ]
    return Program(clauses, dict(program.symbols))


# ---------------------------------------------------------------------------
# Recorded steps
# ---------------------------------------------------------------------------

VARIANTS = (
    "DefIntro",
    "Unfold",
    "ParallelLeftmostUnfold",
    "Fold",
    "GoalRepl",
    "EqIntro",
    "EqElim",
    "EqMoveLeft",
    "TermEqMoveLeft",
    "EqSubst",
    "RenameLocals",
    "Extract",
    "MainRedirect",
)


@dataclass(frozen=True)
class RuleApp:
    """One recorded rule application.

    Law-backed steps carry the law's name, kind, status and safety flag so
    a sequence can be classified without re-resolving the laws; folds and
    parallel leftmost unfoldings carry the definition id they talk about.
    """

    variant: str
    clause_in: Optional[int] = None
    clause_out: Optional[int] = None
    position: Optional[Position] = None
    def_id: Optional[int] = None
    law_name: Optional[str] = None
    law_kind: Optional[str] = None
    law_status: Optional[str] = None
    preserves_safety: Optional[bool] = None
    direction: str = "forward"
    binding: Optional[FrozenSubst] = None
    command: int = 0

    def describe(self) -> str:
        bits = [self.variant]
        if self.clause_in is not None:
            arrow = f"c{self.clause_in}"
            if self.clause_out is not None:
                arrow += f" -> c{self.clause_out}"
            bits.append(arrow)
        elif self.clause_out is not None:
            bits.append(f"-> c{self.clause_out}")
        if self.position is not None:
            bits.append(f"at {format_position(self.position)}")
        if self.def_id is not None:
            bits.append(f"def c{self.def_id}")
        if self.law_name is not None:
            tag = self.law_name
            if self.direction == "reverse":
                tag += " (reversed)"
            bits.append(f"by {tag} [{self.law_kind}/{self.law_status}]")
        return " ".join(bits)


@dataclass(frozen=True)
class FoldCandidate:
    """A position where a definition body matches, with the matcher.

    ``call`` is the folded atom the fold would put there.
    """

    position: Position
    def_id: int
    binding: FrozenSubst
    call: Atom


@dataclass(frozen=True)
class SequenceReport:
    """Classification of a whole sequence.

    weak/strong/safety take "yes", "conditional" (the claim rests on at
    least one assumed law) or "no".
    """

    admissible: bool
    ordered: bool
    weak: str
    strong: str
    safety: str
    folded_defs: tuple[int, ...]
    plunfolded_defs: tuple[int, ...]
    assumed_laws: tuple[str, ...]
    non_strong_laws: tuple[str, ...]
    unsafe_laws: tuple[str, ...]

    def summary(self) -> str:
        return (
            f"admissible={'yes' if self.admissible else 'no'} "
            f"ordered={'yes' if self.ordered else 'no'} "
            f"weak={self.weak} strong={self.strong} safety={self.safety}"
        )


_LAW_STEP_VARIANTS = (
    "GoalRepl",
    "EqIntro",
    "EqElim",
    "EqMoveLeft",
    "TermEqMoveLeft",
    "EqSubst",
    "RenameLocals",
    "Extract",
    "MainRedirect",
)

# Fold-like for admissibility: the step's def must be parallel leftmost
# unfolded somewhere for the correctness theorem to apply.
_FOLDING_VARIANTS = ("Fold", "MainRedirect")


# ---------------------------------------------------------------------------
# The sequence
# ---------------------------------------------------------------------------


class TransformationSequence:
    """A single-writer derivation: program snapshots plus recorded steps."""

    def __init__(self, program: Program, *, source: str = "inline", name: str = "") -> None:
        base = merge_program(program)
        self.name = name or "derivation"
        self.source = source
        self.programs: list[Program] = [base]
        self.steps: list[RuleApp] = []
        self.defs: dict[int, Clause] = {}
        self.laws: dict[str, ReplacementLaw] = {}
        self.commands: list[str] = []
        self._plunfolded: set[int] = set()
        self._next_id = base.max_id() + 1
        self._checkpoints: list[tuple] = []

    # -- access ------------------------------------------------------------

    @property
    def initial(self) -> Program:
        return self.programs[0]

    @property
    def current(self) -> Program:
        return self.programs[-1]

    def clause(self, cid: int) -> Clause:
        try:
            return self.current.clause_by_id(cid)
        except KeyError:
            raise NoSuchClause(f"no clause c{cid} in the current program") from None

    def initial_with_defs(self) -> Program:
        """The initial program together with every definition as introduced."""
        clauses = list(self.initial.clauses) + [self.defs[k] for k in sorted(self.defs)]
        return Program(clauses, dict(self.current.symbols))

    def script(self) -> str:
        lines = []
        if self.source == "inline":
            lines.append("program <<")
            lines.append(format_program(self.initial, resugar=False).rstrip())
            lines.append(">>")
        else:
            lines.append(f"program {self.source}")
        lines.extend(self.commands)
        return "\n".join(lines) + "\n"

    # -- command bookkeeping -------------------------------------------------

    def _checkpoint(self) -> None:
        self._checkpoints.append(
            (
                len(self.programs),
                len(self.steps),
                len(self.commands),
                dict(self.defs),
                dict(self.laws),
                set(self._plunfolded),
                self._next_id,
            )
        )

    def _restore(self) -> None:
        np, ns, nc, defs, laws, plun, nid = self._checkpoints.pop()
        del self.programs[np:]
        del self.steps[ns:]
        del self.commands[nc:]
        self.defs = defs
        self.laws = laws
        self._plunfolded = plun
        self._next_id = nid

    def _execute(self, command: str, action: Callable[[], object]) -> object:
        self._checkpoint()
        self.commands.append(command)
        try:
            return action()
        except BaseException:
            self._restore()
            raise

    def undo(self) -> bool:
        """Drop the most recent command (with every step it recorded)."""
        if not self._checkpoints:
            return False
        self._restore()
        return True

    # -- shared helpers ------------------------------------------------------

    def _fresh_id(self) -> int:
        cid = self._next_id
        self._next_id += 1
        return cid

    def _swap(self, old_cid: int, new_clause: Clause, symbols=None) -> None:
        cur = self.current
        clauses = [new_clause if c.id == old_cid else c for c in cur.clauses]
        self.programs.append(Program(clauses, dict(symbols or cur.symbols)))

    def _append_clause(self, new_clause: Clause, symbols) -> None:
        cur = self.current
        self.programs.append(Program(list(cur.clauses) + [new_clause], dict(symbols)))

    def _record(self, **fields) -> RuleApp:
        step = RuleApp(command=len(self.commands) - 1, **fields)
        assert step.variant in VARIANTS
        self.steps.append(step)
        return step

    def _rewrite(self, c1: Clause, body: Goal, **fields) -> Clause:
        c2 = Clause(self._fresh_id(), c1.head, normalize(body))
        self._swap(c1.id, c2)
        self._record(clause_in=c1.id, clause_out=c2.id, **fields)
        return c2

    @staticmethod
    def _pos(pos: Union[Position, str]) -> Position:
        return parse_position(pos) if isinstance(pos, str) else tuple(pos)

    def _definition_of(self, key: tuple[str, int]) -> Clause:
        for c in self.initial.clauses:
            if c.head.key == key:
                return c
        for c in self.defs.values():
            if c.head.key == key:
                return c
        raise NoDefinition(f"no clause defines {key[0]}/{key[1]}")

    def _clause_vars(self, c: Clause) -> frozenset[str]:
        return vars_of(c.head) | vars_of(c.body)

    def _outside_vars(self, c: Clause, pos: Position) -> frozenset[str]:
        """Variables of the clause outside the subgoal at pos."""
        return vars_of(c.head) | vars_of(replace_at(c.body, pos, TRUE))

    def _context_vars(self, c: Clause, pos: Position) -> tuple[frozenset[str], frozenset[str]]:
        """Variables visible from the subgoal at pos, split by binding time.

        The first set holds everything that can be bound by the time the
        subgoal runs: the head, earlier conjuncts at every level, and the
        surroundings of any goal argument or equality side on the path.
        The second holds later conjuncts of enclosing conjunctions.
        Sibling disjuncts never run in the same derivation and belong to
        neither set.
        """
        before: set[str] = set(vars_of(c.head))
        after: set[str] = set()
        node: object = c.body
        for step in pos:
            tag = step[0]
            if tag in ("and", "span"):
                parts = conjuncts(node)
                hi = step[2] if tag == "span" else step[1] + 1
                for p in parts[: step[1]]:
                    before |= vars_of(p)
                for p in parts[hi:]:
                    after |= vars_of(p)
                node = parts[step[1]] if tag == "and" else conj(parts[step[1] : hi])
            elif tag == "or":
                node = disjuncts(node)[step[1]]
            elif tag == "arg":
                for i, a in enumerate(node.args):
                    if i != step[1]:
                        before |= vars_of(a)
                node = node.args[step[1]]
            elif tag == "eql":
                before |= vars_of(node.right)
                node = node.left
            else:
                before |= vars_of(node.left)
                node = node.right
        return frozenset(before), frozenset(after)

    def _preceding_vars(self, c: Clause, pos: Position) -> frozenset[str]:
        """Variables that can be bound by the time the subgoal at pos runs."""
        return self._context_vars(c, pos)[0]

    def _derivation_outside_vars(self, c: Clause, pos: Position) -> frozenset[str]:
        """Variables outside the subgoal at pos that share a derivation
        with it; occurrences in sibling disjuncts do not count."""
        before, after = self._context_vars(c, pos)
        return before | after

    # -- definition introduction (rule R1) -----------------------------------

    def def_intro(self, clause_text: str) -> Clause:
        text = clause_text.strip()
        if not text.endswith("."):
            text += "."
        return self._execute(f"define {text}", lambda: self._def_intro(text))

    def _def_intro(self, text: str) -> Clause:
        clause, symbols = parse_clause_text(text, self.current)
        head = clause.head
        args = head.args
        names = [a.name for a in args if isinstance(a, (Var, GVar))]
        if len(names) != len(args) or len(set(names)) != len(names):
            raise ParamNotInBody(
                f"definition head {head.pred}/{len(args)} must take distinct variables"
            )
        body_vars = vars_of(clause.body)
        for n in names:
            if n not in body_vars:
                raise ParamNotInBody(f"head parameter {n} does not occur in the body")
        key = head.key
        for prog in self.programs:
            for c in prog.clauses:
                if c.head.key == key:
                    raise PredicateAlreadyUsed(f"{key[0]}/{key[1]} is already defined")
                for _, sub in iter_goal_positions(c.body):
                    if isinstance(sub, Atom) and sub.key == key:
                        raise PredicateAlreadyUsed(f"{key[0]}/{key[1]} is already called")
        p0_defined = self.initial.defined_preds()
        for _, sub in iter_goal_positions(clause.body):
            if isinstance(sub, Atom) and sub.key not in p0_defined:
                raise BodyPredNotInP0(
                    f"definition body calls {sub.pred}/{len(sub.args)}, "
                    "which the initial program does not define"
                )
        c = Clause(self._fresh_id(), head, normalize(clause.body))
        self.defs[c.id] = c
        self._append_clause(c, symbols)
        self._record(variant="DefIntro", clause_out=c.id, def_id=c.id)
        return c

    # -- unfolding (rule R2) --------------------------------------------------

    def unfold(self, cid: int, pos: Union[Position, str]) -> Clause:
        pos = self._pos(pos)
        return self._execute(
            f"unfold c{cid} at {format_position(pos)}", lambda: self._unfold(cid, pos)
        )

    def _unfold_body(self, c1_head: Atom, body: Goal, pos: Position) -> Goal:
        sub = subgoal_at(body, pos)
        if isinstance(sub, (GTrue, GFalse, TermEq, GoalEq)):
            raise PrimitivePredicate(
                f"the goal at {format_position(pos)} is primitive and cannot be unfolded"
            )
        if not isinstance(sub, Atom):
            raise NotAnAtom(f"the goal at {format_position(pos)} is not a predicate call")
        d = self._definition_of(sub.key)
        avoid = vars_of(c1_head) | vars_of(body)
        renamed, _ = rename_apart(Conj((d.head, d.body)), avoid)
        dh, db = renamed.parts
        theta = {p.name: a for p, a in zip(dh.args, sub.args)}
        return replace_at(body, pos, normalize(apply(db, theta)))

    def _unfold(self, cid: int, pos: Position) -> Clause:
        c1 = self.clause(cid)
        body = self._unfold_body(c1.head, c1.body, pos)
        return self._rewrite(c1, body, variant="Unfold", position=pos)

    def unfold_positions(self, cid: int) -> list[Position]:
        """Positions of every predicate call in the clause body."""
        c = self.clause(cid)
        return [p for p, sub in iter_goal_positions(c.body) if isinstance(sub, Atom)]

    # -- parallel leftmost unfolding (the admissibility marker) ---------------

    def parallel_leftmost_unfold(self, cid: int) -> Clause:
        return self._execute(f"plunfold c{cid}", lambda: self._plunfold(cid))

    def _plunfold(self, cid: int) -> Clause:
        c1 = self.clause(cid)
        parts = disjuncts(c1.body)
        for i, d in enumerate(parts):
            first = conjuncts(d)[0]
            if not isinstance(first, Atom):
                raise ShapeMismatch(
                    f"disjunct {i + 1} of c{cid} does not start with a predicate call"
                )
        body = c1.body
        # right-to-left so unfolding one disjunct cannot shift the others
        for i in reversed(range(len(parts))):
            pos: Position = (("and", 0),) if len(parts) == 1 else (("or", i), ("and", 0))
            body = self._unfold_body(c1.head, body, pos)
        c2 = self._rewrite(
            c1,
            body,
            variant="ParallelLeftmostUnfold",
            def_id=cid if cid in self.defs else None,
        )
        if cid in self.defs:
            self._plunfolded.add(cid)
        return c2

    # -- folding (rule R3) ------------------------------------------------------

    def _fold_conditions(self, c1: Clause, pos: Position, theta, d: Clause) -> None:
        dparams = {a.name for a in d.head.args}
        outside = self._outside_vars(c1, pos)
        dvars = sorted(vars_of(d.body))
        for v in dvars:
            if v in dparams:
                continue
            img = theta[v]
            if not isinstance(img, (Var, GVar)):
                raise FoldConditionViolated(
                    1, f"local variable {v} of the definition matched a non-variable"
                )
            if img.name in outside:
                raise FoldConditionViolated(
                    1,
                    f"local variable {v} matched {img.name}, which occurs outside "
                    "the folded subgoal",
                )
            for w in dvars:
                if w != v and img.name in vars_of(theta[w]):
                    raise FoldConditionViolated(
                        2, f"local variable {v} shares {img.name} with the image of {w}"
                    )

    def _fold_subjects(self, body: Goal):
        """Every contiguous conjunct range, innermost ranges included."""
        for pos, node in iter_goal_positions(body):
            if isinstance(node, Conj):
                parts = conjuncts(node)
                for lo in range(len(parts)):
                    for hi in range(lo + 1, len(parts) + 1):
                        yield pos + (("span", lo, hi),), conj(parts[lo:hi])
            elif not pos or pos[-1][0] != "and":
                yield pos, node

    def find_fold_candidates(self, cid: int, def_id: int) -> list[FoldCandidate]:
        if def_id not in self.defs:
            raise NotADefinition(f"c{def_id} is not an introduced definition")
        d = self.defs[def_id]
        c1 = self.clause(cid)
        out = []
        for pos, subject in self._fold_subjects(c1.body):
            theta = match(d.body, subject)
            if theta is None:
                continue
            try:
                self._fold_conditions(c1, pos, theta, d)
            except FoldConditionViolated:
                continue
            call = apply(d.head, theta)
            out.append(FoldCandidate(pos, def_id, freeze_subst(theta), call))
        return out

    def fold(self, cid: int, pos: Union[Position, str], def_id: int) -> Clause:
        pos = self._pos(pos)
        return self._execute(
            f"fold c{cid} at {format_position(pos)} using c{def_id}",
            lambda: self._fold(cid, pos, def_id),
        )

    def _fold(self, cid: int, pos: Position, def_id: int) -> Clause:
        if def_id not in self.defs:
            raise NotADefinition(f"c{def_id} is not an introduced definition")
        d = self.defs[def_id]
        c1 = self.clause(cid)
        subject = subgoal_at(c1.body, pos)
        theta = match(d.body, subject)
        if theta is None:
            raise NoFoldMatch(
                f"the body of definition c{def_id} does not match c{cid} "
                f"at {format_position(pos)}"
            )
        self._fold_conditions(c1, pos, theta, d)
        call = apply(d.head, theta)
        body = replace_at(c1.body, pos, call)
        return self._rewrite(
            c1,
            body,
            variant="Fold",
            position=pos,
            def_id=def_id,
            binding=freeze_subst({n: theta[n] for n in sorted(a.name for a in d.head.args)}),
        )

    # -- goal replacement (rule R4) ---------------------------------------------

    def declare(self, text: str) -> ReplacementLaw:
        """Admit a law declaration ('law ...' or 'assume ...').

        Declarations are read against the current program, so a law may
        mention predicates introduced by earlier definition steps.
        """
        line = " ".join(text.split())
        return self._execute(line, lambda: self._declare(line))

    def _declare(self, line: str) -> ReplacementLaw:
        law = parse_law_declaration(line, self.current)
        self.laws[law.name] = law
        return law

    def _law(self, name: str) -> ReplacementLaw:
        law = self.laws.get(name) or BUILTIN_LAWS.get(name)
        if law is None:
            raise NoSuchLaw(f"no law named {name}")
        return law

    def goal_replace(
        self, cid: int, pos: Union[Position, str], law: Union[str, ReplacementLaw],
        reverse: bool = False,
    ) -> Clause:
        pos = self._pos(pos)
        name = law if isinstance(law, str) else law.name
        cmd = f"replace c{cid} at {format_position(pos)} by {name}"
        if reverse:
            cmd += " reverse"
        return self._execute(cmd, lambda: self._goal_replace(cid, pos, name, reverse))

    def _goal_replace(self, cid: int, pos: Position, name: str, reverse: bool) -> Clause:
        law = self._law(name)
        if law.status == UNKNOWN_STATUS:
            raise LawStatusUnknown(
                f"law {law.name} has unknown status and cannot justify a step"
            )
        if law.kind == ARROW:
            raise LawNotApplicable(
                f"law {law.name} claims only outcome implication; replacement needs "
                "at least a weak law"
            )
        if reverse and law.kind != STRONGEQ:
            raise LawNotApplicable(
                f"law {law.name} ({law.kind}) cannot be applied right to left"
            )
        c1 = self.clause(cid)
        subject = subgoal_at(c1.body, pos)
        src, dst = (law.rhs, law.lhs) if reverse else (law.lhs, law.rhs)
        new_subject = self._instantiate(law, src, dst, subject, c1, pos)
        body = replace_at(c1.body, pos, new_subject)
        return self._rewrite(
            c1,
            body,
            variant="GoalRepl",
            position=pos,
            law_name=law.name,
            law_kind=law.kind,
            law_status=law.status,
            preserves_safety=law.preserves_safety,
            direction="reverse" if reverse else "forward",
        )

    def _instantiate(
        self,
        law: ReplacementLaw,
        src: Goal,
        dst: Goal,
        subject: Goal,
        c1: Clause,
        pos: Position,
    ) -> Goal:
        """Match src against the subject and build the instantiated dst.

        Quantified law variables take arbitrary images; the remaining law
        variables admit only an injective renaming whose targets avoid both
        the quantified images and everything outside the replaced subgoal.
        """
        ctx_name = law.context_name
        ctx: Optional[Goal] = None
        if ctx_name is None:
            theta = match(src, normalize(subject))
            if theta is None:
                raise LawNotApplicable(
                    f"law {law.name} does not match the subgoal at {format_position(pos)}"
                )
        else:
            theta, ctx, dst_parts = self._match_context(law, src, dst, subject, ctx_name)

        law_vars = vars_of(law.lhs) | vars_of(law.rhs)
        kinds = var_kinds_of(Conj((law.lhs, law.rhs)))
        free = law.free_vars
        quant_images: set[str] = set()
        for q in law.quantified:
            if q in theta:
                quant_images |= vars_of(theta[q])
        if ctx is not None:
            quant_images |= vars_of(ctx)

        used = set(vars_of(c1.head)) | set(vars_of(c1.body)) | set(law_vars) | quant_images
        for v in theta.values():
            used |= vars_of(v)
        for v in sorted(law_vars - set(theta)):
            fresh = _fresh_name(v, used)
            used.add(fresh)
            theta[v] = GVar(fresh) if kinds[v] == "bool" else Var(fresh)

        outside = self._derivation_outside_vars(c1, pos)
        seen_targets: dict[str, str] = {}
        for f in sorted(free):
            img = theta[f]
            if not isinstance(img, (Var, GVar)):
                raise LawNotApplicable(
                    f"law variable {f} admits only renaming but matched a compound"
                )
            if img.name in seen_targets:
                raise LawNotApplicable(
                    f"law variables {seen_targets[img.name]} and {f} both matched {img.name}"
                )
            seen_targets[img.name] = f
            if img.name in outside:
                raise VConditionViolated(
                    f"law variable {f} matched {img.name}, which occurs outside the "
                    "replaced subgoal"
                )
            if img.name in quant_images:
                raise VConditionViolated(
                    f"law variable {f} matched {img.name}, which a quantified "
                    "variable's image also uses"
                )

        if ctx is None:
            return normalize(apply(dst, theta))
        pieces = [normalize(apply(p, theta)) for p in dst_parts[:-1]]
        inner = dst_parts[-1].args[0]
        pieces.append(splice_context(ctx, normalize(apply(inner, theta))))
        return normalize(conj(pieces))

    def _match_context(self, law, src: Goal, dst: Goal, subject: Goal, ctx_name: str):
        """Context laws carry the context as the last conjunct of both sides."""
        src_parts = conjuncts(src)
        dst_parts = conjuncts(dst)
        for parts, side in ((src_parts, "left"), (dst_parts, "right")):
            last = parts[-1]
            if not (isinstance(last, Atom) and last.pred == ctx_name and len(last.args) == 1):
                raise LawNotApplicable(
                    f"law {law.name}: the context must be the last conjunct of the "
                    f"{side} side"
                )
        k = len(src_parts)
        sparts = conjuncts(normalize(subject))
        if len(sparts) < k:
            raise LawNotApplicable(
                f"law {law.name} does not match: the subgoal has too few conjuncts"
            )
        theta0 = {}
        if k > 1:
            theta0 = match(conj(src_parts[:-1]), conj(sparts[: k - 1]))
            if theta0 is None:
                raise LawNotApplicable(
                    f"law {law.name} does not match the subgoal's leading conjuncts"
                )
        ctx_subject = conj(sparts[k - 1 :])
        inner_src = src_parts[-1].args[0]
        for cpos, node in iter_goal_positions(ctx_subject):
            theta = match(inner_src, node, bound=theta0)
            if theta is not None:
                ctx = replace_at(ctx_subject, cpos, Atom("@hole", ()))
                return theta, ctx, dst_parts
        raise LawNotApplicable(
            f"law {law.name}: no occurrence of the context content in the subgoal"
        )

    # -- equality introduction / elimination (law instances) --------------------

    def eq_intro(
        self,
        cid: int,
        span_pos: Union[Position, str],
        occ: Union[Position, str],
        name: str,
    ) -> Clause:
        """Name the subgoal at `occ` (relative to the span at `span_pos`).

        The span S[u] becomes `name = u, S[name]`, so a later fold can pick
        up the equality together with whatever precedes it.
        """
        span_pos = self._pos(span_pos)
        occ = self._pos(occ)
        return self._execute(
            "eqintro c{} at {} occ {} as {}".format(
                cid, format_position(span_pos), format_position(occ), name
            ),
            lambda: self._eq_intro(cid, span_pos, occ, name),
        )

    def _eq_intro(self, cid: int, span_pos: Position, occ: Position, name: str) -> Clause:
        c1 = self.clause(cid)
        span = subgoal_at(c1.body, span_pos)
        u = subgoal_at(span, occ)
        if name in self._clause_vars(c1):
            raise VConditionViolated(f"{name} already occurs in clause c{cid}")
        v = GVar(name)
        rhs_tail = replace_at(span, occ, v)
        law = instantiate_eq_intro(span, u, v, rhs_tail)
        body = replace_at(c1.body, span_pos, law.rhs)
        return self._rewrite(
            c1,
            body,
            variant="EqIntro",
            position=span_pos,
            law_name=law.name,
            law_kind=law.kind,
            law_status=law.status,
            preserves_safety=law.preserves_safety,
            binding=freeze_subst({name: u}),
        )

    def eq_elim(self, cid: int, pos: Union[Position, str]) -> Clause:
        pos = self._pos(pos)
        return self._execute(
            f"eqelim c{cid} at {format_position(pos)}", lambda: self._eq_elim(cid, pos)
        )

    def _eq_parts(self, c1: Clause, pos: Position):
        """Split a conjunct position into its scope prefix and index."""
        if pos and pos[-1][0] == "and":
            prefix, i = tuple(pos[:-1]), pos[-1][1]
        else:
            prefix, i = tuple(pos), 0
        scope = subgoal_at(c1.body, prefix)
        parts = conjuncts(scope)
        if not 0 <= i < len(parts):
            raise InvalidPosition(f"no conjunct {i + 1} at {format_position(prefix)}")
        return prefix, i, parts

    def _eq_elim(self, cid: int, pos: Position) -> Clause:
        c1 = self.clause(cid)
        prefix, i, parts = self._eq_parts(c1, pos)
        eq = parts[i]
        if isinstance(eq, TermEq) and isinstance(eq.left, Var):
            v: Union[Var, GVar] = eq.left
        elif isinstance(eq, GoalEq) and isinstance(eq.left, GVar):
            v = eq.left
        else:
            raise LawNotApplicable(
                f"the goal at {format_position(pos)} is not an equality with a "
                "variable on the left"
            )
        span = prefix + (("span", i, len(parts)),)
        outside = self._outside_vars(c1, span)
        if v.name in outside or v.name in vars_of(eq.right):
            raise VConditionViolated(
                f"{v.name} occurs beyond the eliminated equality's scope"
            )
        tail = conj(parts[i + 1 :])
        if v.name in vars_of(tail):
            kept = normalize(apply(tail, {v.name: eq.right}))
            law = instantiate_eq_intro(kept, eq.right, v, tail)
            new, direction = law.lhs, "reverse"
        else:
            law = instantiate_eq_drop(eq, tail)
            new, direction = law.rhs, "forward"
        body = replace_at(c1.body, span, new)
        return self._rewrite(
            c1,
            body,
            variant="EqElim",
            position=pos,
            law_name=law.name,
            law_kind=law.kind,
            law_status=law.status,
            preserves_safety=law.preserves_safety,
            direction=direction,
        )

    # -- equality moves ----------------------------------------------------------

    def eq_move_left(self, cid: int, pos: Union[Position, str]) -> Clause:
        pos = self._pos(pos)
        return self._execute(
            f"eqmove c{cid} at {format_position(pos)}", lambda: self._eq_move_left(cid, pos)
        )

    def _eq_move_left(self, cid: int, pos: Position) -> Clause:
        c1 = self.clause(cid)
        prefix, i, parts = self._eq_parts(c1, pos)
        eq = parts[i]
        remainder = conj(parts[:i] + parts[i + 1 :])
        law = instantiate_eq_rearrange(conj(parts), eq, remainder)
        v = eq.left
        if v.name in self._preceding_vars(c1, prefix):
            raise VConditionViolated(
                f"{v.name} may already be bound when the scope of the move runs"
            )
        body = replace_at(c1.body, prefix, law.rhs)
        return self._rewrite(
            c1,
            body,
            variant="EqMoveLeft",
            position=pos,
            law_name=law.name,
            law_kind=law.kind,
            law_status=law.status,
            preserves_safety=law.preserves_safety,
        )

    def teq_move_left(self, cid: int, pos: Union[Position, str]) -> Clause:
        pos = self._pos(pos)
        return self._execute(
            f"teqmove c{cid} at {format_position(pos)}",
            lambda: self._teq_move_left(cid, pos),
        )

    def _teq_move_left(self, cid: int, pos: Position) -> Clause:
        c1 = self.clause(cid)
        prefix, i, parts = self._eq_parts(c1, pos)
        eq = parts[i]
        if not isinstance(eq, TermEq):
            raise LawNotApplicable(
                f"the goal at {format_position(pos)} is not a term equality"
            )
        if i == 0:
            raise LawNotApplicable("the equality is already leftmost")
        law = term_eq_leftmove(conj(parts[:i]), eq)
        span = prefix + (("span", 0, i + 1),)
        body = replace_at(c1.body, span, law.rhs)
        return self._rewrite(
            c1,
            body,
            variant="TermEqMoveLeft",
            position=pos,
            law_name=law.name,
            law_kind=law.kind,
            law_status=law.status,
            preserves_safety=law.preserves_safety,
        )

    # -- substitution through an equality ----------------------------------------

    def eq_subst(self, cid: int, pos: Union[Position, str], back: bool = False) -> Clause:
        pos = self._pos(pos)
        cmd = f"subst c{cid} at {format_position(pos)}"
        if back:
            cmd += " back"
        return self._execute(cmd, lambda: self._eq_subst(cid, pos, back))

    def _eq_subst(self, cid: int, pos: Position, back: bool) -> Clause:
        c1 = self.clause(cid)
        prefix, i, parts = self._eq_parts(c1, pos)
        eq = parts[i]
        scope = conj(parts[i + 1 :])
        law, _ = instantiate_eq_subst(eq, scope, back=back)
        span = prefix + (("span", i, len(parts)),)
        body = replace_at(c1.body, span, law.rhs)
        return self._rewrite(
            c1,
            body,
            variant="EqSubst",
            position=pos,
            law_name=law.name,
            law_kind=law.kind,
            law_status=law.status,
            preserves_safety=law.preserves_safety,
            direction="back" if back else "forward",
        )

    # -- local renaming ------------------------------------------------------------

    def rename_locals(
        self, cid: int, pos: Union[Position, str], mapping: dict[str, str]
    ) -> Clause:
        pos = self._pos(pos)
        pairs = ",".join(f"{o}/{n}" for o, n in sorted(mapping.items()))
        return self._execute(
            f"rename c{cid} at {format_position(pos)} {pairs}",
            lambda: self._rename_locals(cid, pos, dict(sorted(mapping.items()))),
        )

    def _rename_locals(self, cid: int, pos: Position, mapping: dict[str, str]) -> Clause:
        c1 = self.clause(cid)
        sub = subgoal_at(c1.body, pos)
        law, renamed = instantiate_renaming(sub, mapping)
        outside = self._derivation_outside_vars(c1, pos)
        for old, new in mapping.items():
            if old in outside:
                raise VConditionViolated(f"{old} is not local to the renamed subgoal")
            if new in outside:
                raise VConditionViolated(f"{new} already occurs outside the renamed subgoal")
        body = replace_at(c1.body, pos, renamed)
        return self._rewrite(
            c1,
            body,
            variant="RenameLocals",
            position=pos,
            law_name=law.name,
            law_kind=law.kind,
            law_status=law.status,
            preserves_safety=law.preserves_safety,
        )

    # -- goal-argument equality extraction (assumed instances) ----------------------

    def extract(self, cid: int, pos: Union[Position, str]) -> Clause:
        pos = self._pos(pos)
        return self._execute(
            f"extract c{cid} at {format_position(pos)}", lambda: self._extract(cid, pos)
        )

    def _extract(self, cid: int, pos: Position) -> Clause:
        c1 = self.clause(cid)
        prefix, i, parts = self._eq_parts(c1, pos)
        ge = parts[i]
        if not isinstance(ge, GoalEq):
            raise LawNotApplicable(
                f"the goal at {format_position(pos)} is not a goal equality"
            )
        rparts = conjuncts(ge.right)
        first = rparts[0]
        if not isinstance(first, (TermEq, GoalEq)):
            raise LawNotApplicable(
                "the goal argument does not start with an equality binding a variable"
            )
        eq_pos = prefix + (("and", i),)
        outside = vars_of(c1.head) | vars_of(replace_at(c1.body, eq_pos, TRUE))

        # when one side of the leading equality is a variable invisible
        # everywhere else, hoisting always succeeds and binds nothing the
        # rest of the clause can observe: the move is a strong equivalence;
        # otherwise the hoisted equality can fail or bind observably even
        # when the argument is never called, so only a weak law is assumed
        def fresh(side: object, other: object) -> bool:
            if not isinstance(side, (Var, GVar)):
                return False
            return (
                side.name not in outside
                and side.name not in vars_of(ge.left)
                and side.name not in vars_of(other)
            )

        kind = WEAK
        if fresh(first.left, first.right) or fresh(first.right, first.left):
            kind = STRONGEQ
        span = prefix + (("span", i, len(parts)),)
        lhs = conj(parts[i:])
        rhs = conj([first, GoalEq(ge.left, conj(rparts[1:]))] + list(parts[i + 1 :]))
        law = ReplacementLaw(
            f"extract_c{cid}",
            kind,
            normalize(lhs),
            normalize(rhs),
            status=ASSUMED,
            preserves_safety=None,
        )
        body = replace_at(c1.body, span, rhs)
        return self._rewrite(
            c1,
            body,
            variant="Extract",
            position=pos,
            law_name=law.name,
            law_kind=law.kind,
            law_status=law.status,
            preserves_safety=law.preserves_safety,
        )

    # -- redirecting a main predicate through a wrapper definition -------------------

    def express(self, pred: str, def_id: int) -> Clause:
        return self._execute(
            f"express {pred} using c{def_id}", lambda: self._express(pred, def_id)
        )

    def _express(self, pred: str, def_id: int) -> Clause:
        m = re.fullmatch(r"([a-z]\w*)/(\d+)", pred.strip())
        if not m:
            raise ScriptError(f"bad predicate reference {pred!r}; expected name/arity")
        key = (m.group(1), int(m.group(2)))
        if def_id not in self.defs:
            raise NotADefinition(f"c{def_id} is not an introduced definition")
        d = self.defs[def_id]
        dparts = conjuncts(d.body)
        ok = (
            len(dparts) == 2
            and isinstance(dparts[0], Atom)
            and dparts[0].key == key
            and isinstance(dparts[1], GVar)
            and all(isinstance(a, (Var, GVar)) for a in dparts[0].args)
        )
        if not ok:
            raise ShapeMismatch(
                f"definition c{def_id} is not '{key[0]}(...), Continuation'"
            )
        main = None
        for c in self.current.clauses:
            if c.head.key == key:
                main = c
                break
        if main is None:
            raise NoSuchClause(f"no clause defines {key[0]}/{key[1]}")
        theta: dict[str, Arg] = {dparts[1].name: TRUE}
        for p, a in zip(dparts[0].args, main.head.args):
            theta[p.name] = a
        call = apply(d.head, theta)
        law = ReplacementLaw(
            f"express_{key[0]}_{key[1]}",
            STRONGEQ,
            normalize(main.body),
            call,
            status=ASSUMED,
            preserves_safety=None,
        )
        return self._rewrite(
            main,
            call,
            variant="MainRedirect",
            def_id=def_id,
            law_name=law.name,
            law_kind=law.kind,
            law_status=law.status,
            preserves_safety=law.preserves_safety,
        )

    # -- the simplification macro ------------------------------------------------------

    def simplify(self, cid: int) -> Clause:
        return self._execute(f"simplify c{cid}", lambda: self._simplify(cid))

    def _simplify(self, cid: int) -> Clause:
        """Distribute ∨ outward, solve leading equality runs, prune and drop.

        Emits one recorded law application per primitive change, all of them
        strongeq (distribution instances, CET-justified equation rewrites,
        equality elimination), so simplification never weakens a claim.
        """
        c = self.clause(cid)
        for _ in range(500):
            step = self._simplify_once(c)
            if step is None:
                return c
            c = step
        raise RuntimeError(f"simplify c{cid} did not stabilize")  # pragma: no cover

    def _simplify_once(self, c: Clause) -> Optional[Clause]:
        for pos, node in iter_goal_positions(c.body):
            if pos and pos[-1][0] == "and":
                continue  # conjuncts are handled through their owning scope
            parts = conjuncts(node)
            done = (
                self._distribute(c, pos, parts)
                or self._prune_false(c, pos, parts)
                or self._solve_leading(c, pos, parts)
            )
            if done is not None:
                return done
        return None

    def _apply_builtin(
        self, c: Clause, span: Position, name: str, theta, reverse: bool
    ) -> Clause:
        """Record one builtin-law application with an explicit instantiation."""
        law = BUILTIN_LAWS[name]
        src, dst = (law.rhs, law.lhs) if reverse else (law.lhs, law.rhs)
        new = normalize(apply(dst, theta))
        assert normalize(apply(src, theta)) == normalize(subgoal_at(c.body, span))
        body = replace_at(c.body, span, new)
        return self._rewrite(
            c,
            body,
            variant="GoalRepl",
            position=span,
            law_name=law.name,
            law_kind=law.kind,
            law_status=law.status,
            preserves_safety=law.preserves_safety,
            direction="reverse" if reverse else "forward",
        )

    def _distribute(self, c: Clause, pos: Position, parts) -> Optional[Clause]:
        # only a disjunction followed by more conjuncts is split; a trailing
        # disjunction stays factored (splitting it is rarely wanted and is
        # available explicitly through or_and_left applied in reverse)
        if len(parts) < 2:
            return None
        for j, p in enumerate(parts[:-1]):
            if not isinstance(p, Disj):
                continue
            branches = disjuncts(p)
            # (b1 or rest), suffix  =>  (b1, suffix) or (rest, suffix)
            theta = {
                "G1": branches[0],
                "G3": disj(branches[1:]),
                "G2": conj(parts[j + 1 :]),
            }
            span = pos + (("span", j, len(parts)),)
            return self._apply_builtin(c, span, "or_and_right", theta, reverse=True)
        return None

    def _prune_false(self, c: Clause, pos: Position, parts) -> Optional[Clause]:
        if len(parts) > 1 and parts[0] == FALSE:
            theta = {"G1": conj(parts[1:])}
            span = pos + (("span", 0, len(parts)),)
            return self._apply_builtin(c, span, "and_false_l", theta, reverse=False)
        return None

    def _solve_leading(self, c: Clause, pos: Position, parts) -> Optional[Clause]:
        k = 0
        while k < len(parts) and isinstance(parts[k], TermEq):
            k += 1
        if k == 0:
            return None
        run = list(parts[:k])
        span = pos + (("span", 0, k),)
        sigma = mgu_many([(e.left, e.right) for e in run])
        if sigma is None:
            cet = cet_decide(conj(run), FALSE, vars_of(conj(run)))
            assert cet.verdict == EQUIVALENT
            law = ReplacementLaw("cet_unsat", STRONGEQ, conj(run), FALSE)
            body = replace_at(c.body, span, FALSE)
            return self._rewrite(
                c, body, variant="GoalRepl", position=span,
                law_name=law.name, law_kind=law.kind, law_status=law.status,
                preserves_safety=law.preserves_safety,
            )
        protected = self._outside_vars(c, span)
        canon = self._canonical_eqs(sigma, protected, c)
        if canon != run:
            lhs, rhs = conj(run), conj(canon)
            cet = cet_decide(lhs, rhs, vars_of(lhs) | vars_of(rhs))
            if cet.verdict == EQUIVALENT:
                law = ReplacementLaw("cet_solve", STRONGEQ, lhs, rhs)
                body = replace_at(c.body, span, rhs)
                return self._rewrite(
                    c, body, variant="GoalRepl", position=span,
                    law_name=law.name, law_kind=law.kind, law_status=law.status,
                    preserves_safety=law.preserves_safety,
                )
        # eliminate solved equalities whose variable is local to the run's scope
        for e in range(k):
            eq = parts[e]
            if not isinstance(eq.left, Var):
                continue
            espan = pos + (("span", e, len(parts)),)
            if eq.left.name in self._outside_vars(c, espan) | vars_of(eq.right):
                continue
            return self._eq_elim(c.id, pos + (("and", e),))
        return None

    @staticmethod
    def _canonical_eqs(sigma, protected, c: Clause) -> list[Goal]:
        """Solved form of an equality run, oriented to free local variables."""
        sol = dict(sigma)
        # flip protected -> local variable bindings so locals can be dropped
        changed = True
        while changed:
            changed = False
            for x, img in list(sol.items()):
                if (
                    isinstance(img, Var)
                    and x in protected
                    and img.name not in protected
                    and img.name not in sol
                ):
                    y = img.name
                    del sol[x]
                    flip = {y: Var(x)}
                    sol = {k: apply(v, flip) for k, v in sol.items()}
                    sol[y] = Var(x)
                    changed = True
                    break
        head_order: dict[str, int] = {}

        def note(a) -> None:
            if isinstance(a, (Var, GVar)):
                head_order.setdefault(a.name, len(head_order))
            elif isinstance(a, Struct):
                for s in a.args:
                    note(s)

        for a in c.head.args:
            note(a)
        names = sorted(
            sol, key=lambda n: (n not in protected, head_order.get(n, len(head_order)), n)
        )
        return [TermEq(Var(n), sol[n]) for n in names]

    # -- evaluation against the current program ------------------------------------

    def eval_goal(self, goal_text: str, fuel: Optional[int] = None):
        """Evaluate a goal in the current program, recording the command."""
        goal_text = " ".join(goal_text.split())
        cmd = f"eval {goal_text}" if fuel is None else f"eval fuel={fuel} {goal_text}"
        return self._execute(cmd, lambda: self._eval(goal_text, fuel))

    def _eval(self, goal_text: str, fuel: Optional[int]):
        goal = parse_goal(goal_text, self.current)
        return evaluate(self.current, goal, fuel if fuel is not None else default_fuel())


def _fresh_name(base: str, used) -> str:
    if base not in used:
        return base
    i = 1
    while f"{base}{i}" in used:
        i += 1
    return f"{base}{i}"


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


def is_admissible(seq: TransformationSequence) -> bool:
    folded = {s.def_id for s in seq.steps if s.variant in _FOLDING_VARIANTS}
    return folded <= seq._plunfolded


def is_ordered(seq: TransformationSequence) -> bool:
    """Definitions first, then their parallel leftmost unfoldings, then the rest."""
    variants = [s.variant for s in seq.steps]
    i = 0
    while i < len(variants) and variants[i] == "DefIntro":
        i += 1
    j = i
    phase_two: set[Optional[int]] = set()
    while j < len(variants) and variants[j] == "ParallelLeftmostUnfold":
        if seq.steps[j].def_id is not None:
            phase_two.add(seq.steps[j].def_id)
        j += 1
    if "DefIntro" in variants[i:]:
        return False
    folded = {s.def_id for s in seq.steps if s.variant in _FOLDING_VARIANTS}
    return folded <= phase_two


def classify_correctness(seq: TransformationSequence) -> SequenceReport:
    folded = sorted(
        {s.def_id for s in seq.steps if s.variant in _FOLDING_VARIANTS if s.def_id}
    )
    used = [s for s in seq.steps if s.variant in _LAW_STEP_VARIANTS]
    assumed = sorted({s.law_name for s in used if s.law_status == ASSUMED})
    non_strong = sorted(
        {s.law_name for s in used if s.law_kind not in (STRONG, STRONGEQ)}
    )
    unsafe = sorted({s.law_name for s in used if s.preserves_safety is False})
    not_flagged = any(s.preserves_safety is not True for s in used)

    admissible = is_admissible(seq)
    conditional = bool(assumed)

    def verdict(base: bool) -> str:
        if not base:
            return "no"
        return "conditional" if conditional else "yes"

    weak = verdict(admissible)
    strong = verdict(admissible and not non_strong)
    if unsafe:
        safety = "no"
    elif not_flagged:
        safety = "conditional"
    else:
        safety = "yes"
    return SequenceReport(
        admissible=admissible,
        ordered=is_ordered(seq),
        weak=weak,
        strong=strong,
        safety=safety,
        folded_defs=tuple(folded),
        plunfolded_defs=tuple(sorted(seq._plunfolded)),
        assumed_laws=tuple(assumed),
        non_strong_laws=tuple(non_strong),
        unsafe_laws=tuple(unsafe),
    )


# ---------------------------------------------------------------------------
# Derivation scripts
# ---------------------------------------------------------------------------

_OUTCOMES = ("success", "failure", "stuck", "fuel")


def corpus_text(name: str) -> str:
    """Text of a bundled corpus file."""
    return (resources.files("goalfold") / "corpus" / name).read_text()


def _default_loader(name: str) -> str:
    try:
        return corpus_text(name)
    except FileNotFoundError:
        return Path(name).read_text()


_CLAUSE_REF = re.compile(r"^c(\d+)$")


def _cid(token: str, lineno: int) -> int:
    m = _CLAUSE_REF.match(token)
    if not m:
        raise ScriptError(f"line {lineno}: expected a clause reference, got {token!r}")
    return int(m.group(1))


def run_script(
    text: str,
    loader: Optional[Callable[[str], str]] = None,
    name: str = "",
) -> TransformationSequence:
    """Execute a derivation script and return the finished sequence.

    Commands mirror the TransformationSequence methods; '%' starts a comment.
    The first command must load a program, either `program <file>` or an
    inline block between `program <<` and `>>`.
    """
    load = loader or _default_loader
    lines = text.splitlines()
    seq: Optional[TransformationSequence] = None
    i = 0
    while i < len(lines):
        lineno = i + 1
        line = lines[i].split("%", 1)[0].strip()
        i += 1
        if not line:
            continue
        tokens = line.split()
        cmd = tokens[0]
        try:
            if cmd == "program":
                if seq is not None:
                    raise ScriptError("program may only be loaded once")
                if tokens[1:] == ["<<"]:
                    block = []
                    while i < len(lines) and lines[i].strip() != ">>":
                        block.append(lines[i])
                        i += 1
                    if i == len(lines):
                        raise ScriptError("unterminated program block")
                    i += 1
                    seq = TransformationSequence(
                        parse_program("\n".join(block)), name=name
                    )
                else:
                    if len(tokens) != 2:
                        raise ScriptError("usage: program <file>")
                    seq = TransformationSequence(
                        parse_program(load(tokens[1])), source=tokens[1], name=name
                    )
                continue
            if seq is None:
                raise ScriptError("the first command must load a program")
            _dispatch(seq, cmd, tokens, line, lineno)
        except ScriptError:
            raise
        except GoalfoldError as err:
            raise ScriptError(f"line {lineno}: {err}") from err
    if seq is None:
        raise ScriptError("empty script: no program loaded")
    return seq


def _dispatch(
    seq: TransformationSequence, cmd: str, tokens: list[str], line: str, lineno: int
) -> None:
    if cmd in ("law", "assume"):
        seq.declare(line)
        return
    if cmd == "define":
        seq.def_intro(line[len("define") :].strip())
        return
    if cmd == "unfold" and len(tokens) == 4 and tokens[2] == "at":
        seq.unfold(_cid(tokens[1], lineno), tokens[3])
        return
    if cmd == "plunfold" and len(tokens) == 2:
        seq.parallel_leftmost_unfold(_cid(tokens[1], lineno))
        return
    if cmd == "fold" and len(tokens) == 6 and tokens[2] == "at" and tokens[4] == "using":
        seq.fold(_cid(tokens[1], lineno), tokens[3], _cid(tokens[5], lineno))
        return
    if cmd == "replace" and len(tokens) in (6, 7) and tokens[2] == "at" and tokens[4] == "by":
        reverse = len(tokens) == 7
        if reverse and tokens[6] != "reverse":
            raise ScriptError(f"line {lineno}: bad trailing token {tokens[6]!r}")
        seq.goal_replace(_cid(tokens[1], lineno), tokens[3], tokens[5], reverse=reverse)
        return
    if (
        cmd == "eqintro"
        and len(tokens) == 8
        and tokens[2] == "at"
        and tokens[4] == "occ"
        and tokens[6] == "as"
    ):
        seq.eq_intro(_cid(tokens[1], lineno), tokens[3], tokens[5], tokens[7])
        return
    if cmd == "eqelim" and len(tokens) == 4 and tokens[2] == "at":
        seq.eq_elim(_cid(tokens[1], lineno), tokens[3])
        return
    if cmd == "eqmove" and len(tokens) == 4 and tokens[2] == "at":
        seq.eq_move_left(_cid(tokens[1], lineno), tokens[3])
        return
    if cmd == "teqmove" and len(tokens) == 4 and tokens[2] == "at":
        seq.teq_move_left(_cid(tokens[1], lineno), tokens[3])
        return
    if cmd == "subst" and len(tokens) in (4, 5) and tokens[2] == "at":
        back = len(tokens) == 5
        if back and tokens[4] != "back":
            raise ScriptError(f"line {lineno}: bad trailing token {tokens[4]!r}")
        seq.eq_subst(_cid(tokens[1], lineno), tokens[3], back=back)
        return
    if cmd == "rename" and len(tokens) == 5 and tokens[2] == "at":
        mapping = {}
        for piece in tokens[4].split(","):
            old, sep, new = piece.partition("/")
            if not sep or not old or not new:
                raise ScriptError(f"line {lineno}: bad renaming {piece!r}")
            mapping[old] = new
        seq.rename_locals(_cid(tokens[1], lineno), tokens[3], mapping)
        return
    if cmd == "extract" and len(tokens) == 4 and tokens[2] == "at":
        seq.extract(_cid(tokens[1], lineno), tokens[3])
        return
    if cmd == "express" and len(tokens) == 4 and tokens[2] == "using":
        seq.express(tokens[1], _cid(tokens[3], lineno))
        return
    if cmd == "simplify" and len(tokens) == 2:
        seq.simplify(_cid(tokens[1], lineno))
        return
    if cmd == "eval" and len(tokens) >= 3:
        rest = tokens[1:]
        fuel = None
        if rest[0].startswith("fuel="):
            fuel = int(rest[0][len("fuel=") :])
            rest = rest[1:]
        expect = None
        if rest and rest[0] in _OUTCOMES:
            expect = rest[0]
            rest = rest[1:]
        if not rest:
            raise ScriptError(f"line {lineno}: eval needs a goal")
        result = seq.eval_goal(" ".join(rest), fuel=fuel)
        got = {
            "Success": "success",
            "Failure": "failure",
            "Stuck": "stuck",
            "FuelExhausted": "fuel",
        }[type(result.outcome).__name__]
        if expect is not None and got != expect:
            raise ScriptError(f"line {lineno}: eval expected {expect}, got {got}")
        return
    raise ScriptError(f"line {lineno}: unknown or malformed command {line!r}")


def run_corpus_script(name: str) -> TransformationSequence:
    """Run a bundled derivation script by file name."""
    return run_script(corpus_text(name), name=name.rsplit(".", 1)[0])

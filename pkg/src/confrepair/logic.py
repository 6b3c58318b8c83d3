"""Propositional formulas, Tseitin conversion to CNF, and a small CDCL solver.

The solver understands assumption literals (decided first, one per decision
level) and reports an unsatisfiable core drawn from those assumptions when
they cannot all hold.  Cores are shrunk with one deletion pass.

Formulas are immutable trees built from :class:`Const`, :class:`Var`,
:class:`Not`, :class:`And` and :class:`Or`.  Use :func:`conj`, :func:`disj`
and :func:`neg` to build them; those fold constants and flatten nested
connectives so structurally equal inputs give equal trees.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "Formula",
    "Const",
    "Var",
    "Not",
    "And",
    "Or",
    "TRUE",
    "FALSE",
    "conj",
    "disj",
    "neg",
    "implies",
    "iff",
    "evaluate",
    "variables",
    "substitute",
    "to_infix",
    "parse_infix",
    "truth_table",
    "is_satisfiable_bruteforce",
    "Literal",
    "CnfFormula",
    "to_cnf",
    "SolveOutcome",
    "SolverStats",
    "solve",
    "solve_with_preference",
    "formula_to_json",
    "formula_from_json",
]


class Formula:
    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return conj(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return disj(self, other)

    def __invert__(self) -> "Formula":
        return neg(self)

    def __str__(self) -> str:
        return to_infix(self)


@dataclass(frozen=True, repr=False)
class Const(Formula):
    value: bool

    def __repr__(self):
        return "TRUE" if self.value else "FALSE"


@dataclass(frozen=True, repr=False)
class Var(Formula):
    name: str

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise ValueError(f"invalid variable name {self.name!r}")

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, repr=False)
class Not(Formula):
    arg: Formula

    def __repr__(self):
        return f"Not({self.arg!r})"


@dataclass(frozen=True, repr=False)
class And(Formula):
    args: tuple[Formula, ...]

    def __post_init__(self):
        if not self.args:
            raise ValueError("And needs at least one child")

    def __repr__(self):
        return f"And({', '.join(map(repr, self.args))})"


@dataclass(frozen=True, repr=False)
class Or(Formula):
    args: tuple[Formula, ...]

    def __post_init__(self):
        if not self.args:
            raise ValueError("Or needs at least one child")

    def __repr__(self):
        return f"Or({', '.join(map(repr, self.args))})"


TRUE = Const(True)
FALSE = Const(False)


def neg(f: Formula) -> Formula:
    if isinstance(f, Const):
        return FALSE if f.value else TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def _complement(f: Formula) -> Formula:
    return f.arg if isinstance(f, Not) else Not(f)


def _junction(kind, absorbing: Const, neutral: Const, items) -> Formula:
    out: list[Formula] = []
    seen: set[Formula] = set()
    for f in items:
        if f == neutral:
            continue
        if f == absorbing:
            return absorbing
        children = f.args if isinstance(f, kind) else (f,)
        for c in children:
            if c in seen:
                continue
            if _complement(c) in seen:
                return absorbing
            seen.add(c)
            out.append(c)
    if not out:
        return neutral
    if len(out) == 1:
        return out[0]
    return kind(tuple(out))


def conj(*fs: Formula) -> Formula:
    """Conjunction with constant folding, flattening and duplicate removal."""
    return _junction(And, FALSE, TRUE, fs)


def disj(*fs: Formula) -> Formula:
    """Disjunction with constant folding, flattening and duplicate removal."""
    return _junction(Or, TRUE, FALSE, fs)


def implies(a: Formula, b: Formula) -> Formula:
    return disj(neg(a), b)


def iff(a: Formula, b: Formula) -> Formula:
    return conj(implies(a, b), implies(b, a))


def evaluate(f: Formula, env: Mapping[str, bool]) -> bool:
    """Evaluate ``f`` under a total assignment; missing variables raise KeyError."""
    if isinstance(f, Var):
        return bool(env[f.name])
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Not):
        return not evaluate(f.arg, env)
    if isinstance(f, And):
        return all(evaluate(a, env) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, env) for a in f.args)
    raise TypeError(f)


def variables(f: Formula) -> list[str]:
    """Variable names of ``f`` in first-occurrence (depth-first) order."""
    out: dict[str, None] = {}
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.setdefault(node.name)
        elif isinstance(node, Not):
            stack.append(node.arg)
        elif isinstance(node, (And, Or)):
            stack.extend(reversed(node.args))
    return list(out)


def substitute(f: Formula, mapping: Mapping[str, Formula]) -> Formula:
    """Replace variables by formulas, re-simplifying on the way up."""
    if isinstance(f, Var):
        return mapping.get(f.name, f)
    if isinstance(f, Const):
        return f
    if isinstance(f, Not):
        return neg(substitute(f.arg, mapping))
    if isinstance(f, And):
        return conj(*(substitute(a, mapping) for a in f.args))
    if isinstance(f, Or):
        return disj(*(substitute(a, mapping) for a in f.args))
    raise TypeError(f)


# -- text form -------------------------------------------------------------

_PREC = {Or: 1, And: 2}


def to_infix(f: Formula, true: str = "true", false: str = "false") -> str:
    """Canonical infix text: ``!`` binds tighter than ``&&``, which binds tighter than ``||``."""

    def go(node: Formula, parent_prec: int) -> str:
        if isinstance(node, Const):
            return true if node.value else false
        if isinstance(node, Var):
            return node.name
        if isinstance(node, Not):
            inner = go(node.arg, 3)
            return "!" + inner
        prec = _PREC[type(node)]
        op = " || " if isinstance(node, Or) else " && "
        text = op.join(go(a, prec) for a in node.args)
        if prec <= parent_prec:
            return f"({text})"
        return text

    return go(f, 0)


_INFIX_TOKEN = re.compile(r"\s*(?:(&&|\|\||!|\(|\))|([^\s&|!()]+))")


def parse_infix(text: str, true: str = "true", false: str = "false") -> Formula:
    """Inverse of :func:`to_infix`."""
    tokens: list[str] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _INFIX_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot tokenize {text[pos:]!r}")
        tokens.append(m.group(1) or m.group(2))
        pos = m.end()
    it = _TokenCursor(tokens)

    def p_or() -> Formula:
        items = [p_and()]
        while it.peek() == "||":
            it.next()
            items.append(p_and())
        return disj(*items)

    def p_and() -> Formula:
        items = [p_unary()]
        while it.peek() == "&&":
            it.next()
            items.append(p_unary())
        return conj(*items)

    def p_unary() -> Formula:
        tok = it.next()
        if tok == "!":
            return neg(p_unary())
        if tok == "(":
            inner = p_or()
            if it.next() != ")":
                raise ValueError("expected ')'")
            return inner
        if tok in ("&&", "||", ")", None):
            raise ValueError(f"unexpected token {tok!r}")
        if tok == true:
            return TRUE
        if tok == false:
            return FALSE
        return Var(tok)

    result = p_or()
    if it.peek() is not None:
        raise ValueError(f"trailing input at {it.peek()!r}")
    return result


class _TokenCursor:
    def __init__(self, tokens: Sequence[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok


def formula_to_json(f: Formula):
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Var):
        return f.name
    if isinstance(f, Not):
        return ["not", formula_to_json(f.arg)]
    tag = "and" if isinstance(f, And) else "or"
    return [tag, *(formula_to_json(a) for a in f.args)]


def formula_from_json(obj) -> Formula:
    if isinstance(obj, bool):
        return TRUE if obj else FALSE
    if isinstance(obj, str):
        return Var(obj)
    tag, *rest = obj
    if tag == "not":
        return Not(formula_from_json(rest[0]))
    children = tuple(formula_from_json(r) for r in rest)
    return And(children) if tag == "and" else Or(children)


# -- brute force -----------------------------------------------------------


def truth_table(f: Formula, names: Sequence[str] | None = None) -> np.ndarray:
    """Evaluate ``f`` on all ``2**len(names)`` assignments at once.

    Row ``i`` assigns ``names[j] = bool(i >> j & 1)``.  Every variable of
    ``f`` must appear in ``names``.
    """
    if names is None:
        names = variables(f)
    n = len(names)
    rows = np.arange(1 << n, dtype=np.int64)
    columns = {name: ((rows >> j) & 1).astype(bool) for j, name in enumerate(names)}
    memo: dict[Formula, np.ndarray] = {}

    def go(node: Formula) -> np.ndarray:
        hit = memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            out = np.full(rows.shape, node.value)
        elif isinstance(node, Var):
            out = columns[node.name]
        elif isinstance(node, Not):
            out = ~go(node.arg)
        elif isinstance(node, And):
            out = np.logical_and.reduce([go(a) for a in node.args])
        else:
            out = np.logical_or.reduce([go(a) for a in node.args])
        memo[node] = out
        return out

    return go(f)


def is_satisfiable_bruteforce(f: Formula) -> bool:
    return bool(truth_table(f).any())


# -- CNF -------------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    var: str
    positive: bool = True

    def __invert__(self) -> "Literal":
        return Literal(self.var, not self.positive)

    def __str__(self):
        return self.var if self.positive else "!" + self.var


class CnfFormula:
    """Clauses over integer variables with a name table.

    Variable ``i`` (1-based) is named ``names[i - 1]``; Tseitin auxiliaries
    have name ``None`` and never collide with configuration variables.
    """

    def __init__(self):
        self.names: list[str | None] = []
        self.index: dict[str, int] = {}
        self.clauses: list[list[int]] = []

    @property
    def var_count(self) -> int:
        return len(self.names)

    def var(self, name: str) -> int:
        """Intern ``name``; interning the same name twice yields the same id."""
        vid = self.index.get(name)
        if vid is None:
            if not name or any(c.isspace() for c in name):
                raise ValueError(f"invalid variable name {name!r}")
            self.names.append(name)
            vid = self.index[name] = len(self.names)
        return vid

    def fresh(self) -> int:
        self.names.append(None)
        return len(self.names)

    def is_aux(self, vid: int) -> bool:
        return self.names[vid - 1] is None

    def literal(self, lit: Literal) -> int:
        vid = self.var(lit.var)
        return vid if lit.positive else -vid

    def add_clause(self, clause: Iterable[int]):
        self.clauses.append(list(clause))

    def copy(self) -> "CnfFormula":
        other = CnfFormula()
        other.names = list(self.names)
        other.index = dict(self.index)
        other.clauses = [list(c) for c in self.clauses]
        return other

    def to_dimacs(self) -> str:
        lines = []
        for vid, name in enumerate(self.names, 1):
            if name is not None:
                lines.append(f"c var {vid} {name}")
        lines.append(f"p cnf {self.var_count} {len(self.clauses)}")
        for clause in self.clauses:
            lines.append(" ".join(map(str, [*clause, 0])))
        return "\n".join(lines) + "\n"


def to_cnf(f: Formula, cnf: CnfFormula | None = None) -> CnfFormula:
    """Equisatisfiable Tseitin encoding of ``f``, conjoined onto ``cnf``.

    Top-level conjunctions and disjunctions are emitted directly; nested
    connectives get one auxiliary variable each with full (both-direction)
    definitions, so any model restricted to ``f``'s variables satisfies ``f``.
    """
    if cnf is None:
        cnf = CnfFormula()
    for name in variables(f):
        cnf.var(name)
    memo: dict[Formula, int] = {}

    def encode(node: Formula) -> int:
        if isinstance(node, Var):
            return cnf.var(node.name)
        if isinstance(node, Not):
            return -encode(node.arg)
        hit = memo.get(node)
        if hit is not None:
            return hit
        aux = cnf.fresh()
        if isinstance(node, Const):
            cnf.add_clause([aux if node.value else -aux])
        else:
            kids = [encode(a) for a in node.args]
            if isinstance(node, And):
                for k in kids:
                    cnf.add_clause([-aux, k])
                cnf.add_clause([aux, *(-k for k in kids)])
            else:
                cnf.add_clause([-aux, *kids])
                for k in kids:
                    cnf.add_clause([aux, -k])
        memo[node] = aux
        return aux

    def require(node: Formula):
        if isinstance(node, Const):
            if not node.value:
                cnf.add_clause([])
        elif isinstance(node, And):
            for a in node.args:
                require(a)
        elif isinstance(node, Or):
            cnf.add_clause([encode(a) for a in node.args])
        elif isinstance(node, Not) and isinstance(node.arg, Or):
            for a in node.arg.args:
                cnf.add_clause([-encode(a)])
        else:
            cnf.add_clause([encode(node)])

    require(f)
    return cnf


# -- solving ---------------------------------------------------------------


@dataclass
class SolveOutcome:
    """``model`` is set when satisfiable, ``core`` when not."""

    sat: bool
    model: dict[str, bool] | None = None
    core: list[Literal] | None = None

    def __bool__(self):
        return self.sat


@dataclass
class SolverStats:
    calls: int = 0
    conflicts: int = 0
    decisions: int = 0

    def as_dict(self) -> dict[str, int]:
        return {"calls": self.calls, "conflicts": self.conflicts, "decisions": self.decisions}


class _Cdcl:
    # Literals are non-zero ints; watch lists are indexed by ``lit + n``.

    def __init__(self, cnf: CnfFormula):
        n = self.n = cnf.var_count
        self.assign = [0] * (n + 1)
        self.level = [0] * (n + 1)
        self.reason: list[list[int] | None] = [None] * (n + 1)
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.watches: list[list[list[int]]] = [[] for _ in range(2 * n + 1)]
        self.ok = True
        self.conflicts = 0
        self.decisions = 0
        # Named variables first, in interning order; auxiliaries afterwards.
        named = [v for v in range(1, n + 1) if not cnf.is_aux(v)]
        aux = [v for v in range(1, n + 1) if cnf.is_aux(v)]
        self.order = named + aux
        self.phase = [False] * (n + 1)
        for clause in cnf.clauses:
            if not self._add_input_clause(clause):
                self.ok = False
                break

    def value(self, lit: int) -> int:
        a = self.assign[lit if lit > 0 else -lit]
        return a if lit > 0 else -a

    def _add_input_clause(self, clause: Sequence[int]) -> bool:
        lits: list[int] = []
        seen: set[int] = set()
        for lit in clause:
            if -lit in seen:
                return True
            if lit not in seen:
                seen.add(lit)
                lits.append(lit)
        if not lits:
            return False
        if len(lits) == 1:
            val = self.value(lits[0])
            if val == -1:
                return False
            if val == 0:
                self._enqueue(lits[0], None)
            return True
        self._watch(lits)
        return True

    def _watch(self, clause: list[int]):
        n = self.n
        self.watches[clause[0] + n].append(clause)
        self.watches[clause[1] + n].append(clause)

    def _enqueue(self, lit: int, reason):
        v = lit if lit > 0 else -lit
        self.assign[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self):
        n = self.n
        watches = self.watches
        assign = self.assign
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            false_lit = -p
            ws = watches[false_lit + n]
            kept: list[list[int]] = []
            i = 0
            while i < len(ws):
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                fv = assign[first if first > 0 else -first]
                if (fv if first > 0 else -fv) == 1:
                    kept.append(c)
                    continue
                moved = False
                for k in range(2, len(c)):
                    lit = c[k]
                    lv = assign[lit if lit > 0 else -lit]
                    if (lv if lit > 0 else -lv) != -1:
                        c[1], c[k] = c[k], c[1]
                        watches[c[1] + n].append(c)
                        moved = True
                        break
                if moved:
                    continue
                kept.append(c)
                if (fv if first > 0 else -fv) == -1:
                    kept.extend(ws[i:])
                    watches[false_lit + n] = kept
                    self.qhead = len(self.trail)
                    return c
                self._enqueue(first, c)
            watches[false_lit + n] = kept
        return None

    def _cancel_until(self, lvl: int):
        if len(self.trail_lim) <= lvl:
            return
        stop = self.trail_lim[lvl]
        for lit in self.trail[stop:]:
            v = lit if lit > 0 else -lit
            self.assign[v] = 0
            self.reason[v] = None
        del self.trail[stop:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def _analyze(self, confl: list[int]):
        current = len(self.trail_lim)
        seen: set[int] = set()
        learnt: list[int] = [0]
        path = 0
        p = 0
        idx = len(self.trail) - 1
        clause = confl
        while True:
            for q in clause:
                v = q if q > 0 else -q
                if v == abs(p) or v in seen or self.level[v] == 0:
                    continue
                seen.add(v)
                if self.level[v] >= current:
                    path += 1
                else:
                    learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            seen.discard(abs(p))
            path -= 1
            if path == 0:
                break
            clause = self.reason[abs(p)]
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda k: self.level[abs(learnt[k])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[abs(learnt[1])]

    def _analyze_final(self, failed: int) -> list[int]:
        # ``failed`` is an assumption currently false; collect the assumption
        # decisions that imply its negation.
        core = [failed]
        v0 = abs(failed)
        if self.level[v0] == 0:
            return core
        seen = {v0}
        for i in range(len(self.trail) - 1, self.trail_lim[0] - 1, -1):
            lit = self.trail[i]
            v = abs(lit)
            if v not in seen:
                continue
            reason = self.reason[v]
            if reason is None:
                core.append(lit)
            else:
                for q in reason:
                    w = abs(q)
                    if w != v and self.level[w] > 0:
                        seen.add(w)
            seen.discard(v)
        return core

    def run(self, assumptions: Sequence[int]):
        """Return ``(True, assign)`` or ``(False, core_literals)``."""
        if not self.ok:
            return False, []
        if self._propagate() is not None:
            return False, []
        order_pos = 0
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                if not self.trail_lim:
                    return False, []
                learnt, back = self._analyze(confl)
                self._cancel_until(back)
                order_pos = 0
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    self._watch(learnt)
                    self._enqueue(learnt[0], learnt)
                continue
            nxt = 0
            while len(self.trail_lim) < len(assumptions):
                a = assumptions[len(self.trail_lim)]
                val = self.value(a)
                if val == 1:
                    self.trail_lim.append(len(self.trail))
                elif val == -1:
                    return False, self._analyze_final(a)
                else:
                    nxt = a
                    break
            if not nxt:
                while order_pos < len(self.order) and self.assign[self.order[order_pos]] != 0:
                    order_pos += 1
                if order_pos == len(self.order):
                    return True, self.assign
                v = self.order[order_pos]
                nxt = v if self.phase[v] else -v
                self.decisions += 1
            self.trail_lim.append(len(self.trail))
            self._enqueue(nxt, None)


def _run(cnf: CnfFormula, lits: Sequence[int], phases: Mapping[int, bool] | None, stats):
    engine = _Cdcl(cnf)
    if phases:
        for vid, val in phases.items():
            engine.phase[vid] = val
    sat, payload = engine.run(lits)
    if stats is not None:
        stats.calls += 1
        stats.conflicts += engine.conflicts
        stats.decisions += engine.decisions
    return sat, payload


def _solve(cnf, assumptions, phases, stats, shrink):
    lits = [cnf.literal(a) for a in assumptions]
    back: dict[int, Literal] = {}
    for a, lit in zip(assumptions, lits):
        back.setdefault(lit, a)
    sat, payload = _run(cnf, lits, phases, stats)
    if sat:
        model = {name: payload[vid] == 1 for vid, name in enumerate(cnf.names, 1) if name is not None}
        return SolveOutcome(True, model=model)
    core = list(dict.fromkeys(payload))
    if shrink and len(core) > 1:
        for lit in list(core):
            if lit not in core or len(core) == 1:
                continue
            trial = [c for c in core if c != lit]
            ok, smaller = _run(cnf, trial, None, stats)
            if not ok:
                keep = set(smaller)
                core = [c for c in trial if c in keep]
    return SolveOutcome(False, core=[back[c] for c in core])


def solve(
    cnf: CnfFormula,
    assumptions: Sequence[Literal] = (),
    *,
    stats: SolverStats | None = None,
    shrink: bool = True,
) -> SolveOutcome:
    """Decide ``cnf`` under ``assumptions``.

    Assumption variables not yet known to ``cnf`` are interned.  An
    unsatisfiable answer carries a core: a subset of ``assumptions`` that is
    unsatisfiable together with the clauses (not necessarily minimal, but
    passed once through deletion-based shrinking).  The core is empty only
    when the clauses alone are unsatisfiable.
    """
    return _solve(cnf, assumptions, None, stats, shrink)


def solve_with_preference(
    cnf: CnfFormula,
    assumptions: Sequence[Literal] = (),
    preferred: Mapping[str, bool] | None = None,
    *,
    stats: SolverStats | None = None,
    shrink: bool = True,
) -> SolveOutcome:
    """Like :func:`solve`, but decisions on free variables try ``preferred`` first.

    This is a phase bias, not an optimisation: the model is close to the
    preference only as far as the search allows.
    """
    phases = {}
    for name, val in (preferred or {}).items():
        phases[cnf.var(name)] = bool(val)
    return _solve(cnf, assumptions, phases, stats, shrink)

import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confrepair.logic import (
    FALSE,
    TRUE,
    And,
    CnfFormula,
    Const,
    Literal,
    Not,
    Or,
    SolverStats,
    Var,
    conj,
    disj,
    evaluate,
    formula_from_json,
    formula_to_json,
    iff,
    implies,
    is_satisfiable_bruteforce,
    neg,
    parse_infix,
    solve,
    solve_with_preference,
    substitute,
    to_cnf,
    to_infix,
    truth_table,
    variables,
)

NAMES = ["A", "B", "C", "D", "E"]


def formulas(names=NAMES, max_leaves=12):
    leaves = st.one_of(st.sampled_from([Var(n) for n in names]), st.sampled_from([TRUE, FALSE]))
    return st.recursive(
        leaves,
        lambda kids: st.one_of(
            kids.map(neg),
            st.lists(kids, min_size=2, max_size=3).map(lambda xs: conj(*xs)),
            st.lists(kids, min_size=2, max_size=3).map(lambda xs: disj(*xs)),
        ),
        max_leaves=max_leaves,
    )


def models_of(f, names):
    """Satisfying assignments by plain enumeration (no numpy)."""
    out = []
    for bits in itertools.product([False, True], repeat=len(names)):
        env = dict(zip(names, bits))
        if evaluate(f, env):
            out.append(env)
    return out


def brute_sat(clauses, n):
    for bits in itertools.product([False, True], repeat=n):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            return True
    return False


# -- construction ----------------------------------------------------------


def test_smart_constructors_fold_and_flatten():
    a, b, c = Var("A"), Var("B"), Var("C")
    assert conj() == TRUE and disj() == FALSE
    assert conj(a, TRUE) == a
    assert conj(a, FALSE) == FALSE
    assert disj(a, TRUE) == TRUE
    assert conj(a, conj(b, c)) == And((a, b, c))
    assert conj(a, a) == a
    assert conj(a, neg(a)) == FALSE
    assert disj(a, neg(a)) == TRUE
    assert neg(neg(a)) == a
    assert neg(TRUE) == FALSE


def test_var_rejects_empty_name():
    with pytest.raises(ValueError):
        Var("")


@given(formulas())
def test_smart_constructors_preserve_meaning(f):
    names = NAMES
    raw = truth_table(f, names)
    again = truth_table(conj(f, TRUE), names)
    assert np.array_equal(raw, again)
    assert np.array_equal(truth_table(neg(f), names), ~raw)


def test_variables_in_first_occurrence_order():
    f = parse_infix("C && (A || !C) && B")
    assert variables(f) == ["C", "A", "B"]


def test_substitute_folds_constants():
    f = parse_infix("A && (B || C)")
    assert substitute(f, {"A": TRUE, "B": FALSE}) == Var("C")
    assert substitute(f, {"A": FALSE}) == FALSE


def test_implies_and_iff_truth_tables():
    a, b = Var("A"), Var("B")
    assert truth_table(implies(a, b), ["A", "B"]).tolist() == [True, False, True, True]
    assert truth_table(iff(a, b), ["A", "B"]).tolist() == [True, False, False, True]


def test_truth_table_row_order():
    # row i assigns names[j] = bit j of i
    assert truth_table(Var("A"), ["A", "B"]).tolist() == [False, True, False, True]
    assert truth_table(Var("B"), ["A", "B"]).tolist() == [False, False, True, True]


@given(formulas())
def test_truth_table_matches_evaluate(f):
    table = truth_table(f, NAMES)
    for i in range(0, 1 << len(NAMES), 7):
        env = {n: bool(i >> j & 1) for j, n in enumerate(NAMES)}
        assert table[i] == evaluate(f, env)


# -- text and json ---------------------------------------------------------


@given(formulas())
def test_infix_round_trip_is_structural(f):
    assert parse_infix(to_infix(f)) == f


def test_infix_precedence():
    f = parse_infix("A || B && !C")
    assert f == disj(Var("A"), conj(Var("B"), neg(Var("C"))))
    assert to_infix(conj(disj(Var("A"), Var("B")), Var("C"))) == "(A || B) && C"
    assert to_infix(TRUE) == "true" and to_infix(FALSE) == "false"


def test_parse_infix_rejects_garbage():
    for text in ["A &&", "(A", "A B", "&& A", ""]:
        with pytest.raises(ValueError):
            parse_infix(text)


@given(formulas())
def test_json_round_trip(f):
    assert formula_from_json(formula_to_json(f)) == f


# -- CNF and solving -------------------------------------------------------


@settings(max_examples=300)
@given(formulas(max_leaves=16))
def test_cnf_equisatisfiable_and_models_project(f):
    cnf = to_cnf(f)
    out = solve(cnf)
    assert out.sat == is_satisfiable_bruteforce(f)
    if out.sat:
        # the named part of any model satisfies the original formula
        env = {n: out.model.get(n, False) for n in NAMES}
        assert evaluate(f, env)


@settings(max_examples=200)
@given(formulas(max_leaves=10))
def test_cnf_projection_is_exact(f):
    """Every model of ``f`` extends to a model of the CNF and nothing else does."""
    cnf = to_cnf(f)
    names = [n for n in cnf.names if n is not None]
    for env in models_of(f, names) or [None]:
        if env is None:
            break
        assumptions = [Literal(n, v) for n, v in env.items()]
        assert solve(cnf, assumptions).sat
    n_aux = sum(1 for n in cnf.names if n is None)
    if n_aux <= 10:
        assert brute_sat(cnf.clauses, cnf.var_count) == is_satisfiable_bruteforce(f)


def test_aux_variables_are_unnamed_and_fresh():
    f = disj(conj(Var("A"), Var("B")), conj(Var("C"), Var("D")))
    cnf = to_cnf(f)
    named = [n for n in cnf.names if n is not None]
    assert named == ["A", "B", "C", "D"]
    assert any(cnf.is_aux(v) for v in range(1, cnf.var_count + 1))


def test_dimacs_header_and_comments():
    cnf = to_cnf(conj(Var("A"), disj(neg(Var("A")), Var("B"))))
    text = cnf.to_dimacs()
    lines = text.splitlines()
    header = [l for l in lines if l.startswith("p cnf")]
    assert header == [f"p cnf {cnf.var_count} {len(cnf.clauses)}"]
    assert "c var 1 A" in lines
    assert all(l.endswith(" 0") for l in lines if l and l[0] not in "cp")


def test_constant_formulas():
    assert solve(to_cnf(TRUE)).sat
    out = solve(to_cnf(FALSE))
    assert not out.sat and out.core == []


def test_assumptions_force_values():
    cnf = to_cnf(disj(Var("A"), Var("B")))
    out = solve(cnf, [Literal("A", False)])
    assert out.sat and out.model["B"] and not out.model["A"]


def test_unknown_assumption_variable_is_interned():
    cnf = to_cnf(Var("A"))
    out = solve(cnf, [Literal("Z", True)])
    assert out.sat and out.model["Z"]


def test_core_is_subset_of_failing_assumptions():
    cnf = to_cnf(conj(implies(Var("A"), Var("B")), implies(Var("B"), Var("C"))))
    assumptions = [Literal("D"), Literal("A"), Literal("E", False), Literal("C", False)]
    out = solve(cnf, assumptions)
    assert not out.sat
    assert set(out.core) == {Literal("A"), Literal("C", False)}


def test_contradictory_assumptions():
    cnf = CnfFormula()
    out = solve(cnf, [Literal("A"), Literal("A", False)])
    assert not out.sat and set(out.core) == {Literal("A"), Literal("A", False)}


def test_preference_steers_free_variables():
    cnf = to_cnf(disj(Var("A"), Var("B"), Var("C")))
    for want in ("A", "B", "C"):
        pref = {n: n == want for n in "ABC"}
        out = solve_with_preference(cnf, (), pref)
        assert out.sat and out.model == pref


def test_stats_count_calls():
    stats = SolverStats()
    cnf = to_cnf(Var("A"))
    solve(cnf, stats=stats)
    solve(cnf, [Literal("A", False)], stats=stats, shrink=False)
    assert stats.calls == 2
    assert set(stats.as_dict()) == {"calls", "conflicts", "decisions"}


def _random_cnf(rng, n, m, k=3):
    return [[rng.choice([-1, 1]) * rng.randint(1, n) for _ in range(k)] for _ in range(m)]


def test_random_cnf_against_enumeration():
    rng = random.Random(7)
    for _ in range(300):
        n = rng.randint(1, 9)
        clauses = _random_cnf(rng, n, rng.randint(1, 5 * n))
        cnf = CnfFormula()
        for v in range(1, n + 1):
            cnf.var(f"x{v}")
        for c in clauses:
            cnf.add_clause(c)
        out = solve(cnf)
        assert out.sat == brute_sat(clauses, n)
        if out.sat:
            bits = [out.model[f"x{v}"] for v in range(1, n + 1)]
            assert all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses)


def test_random_cores_are_sound():
    rng = random.Random(11)
    checked = 0
    while checked < 150:
        n = rng.randint(3, 8)
        clauses = _random_cnf(rng, n, rng.randint(n, 3 * n))
        if not brute_sat(clauses, n):
            continue
        cnf = CnfFormula()
        for v in range(1, n + 1):
            cnf.var(f"x{v}")
        for c in clauses:
            cnf.add_clause(c)
        assumptions = [Literal(f"x{v}", rng.random() < 0.5) for v in rng.sample(range(1, n + 1), rng.randint(1, n))]
        out = solve(cnf, assumptions)
        fixed = [[(1 if a.positive else -1) * int(a.var[1:])] for a in assumptions]
        assert out.sat == brute_sat(clauses + fixed, n)
        if not out.sat:
            checked += 1
            assert out.core and set(out.core) <= set(assumptions)
            core_units = [[(1 if a.positive else -1) * int(a.var[1:])] for a in out.core]
            assert not brute_sat(clauses + core_units, n)

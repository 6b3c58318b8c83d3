"""End-to-end acceptance checks; each test carries one criterion marker."""

import itertools
import json
import random
import time

import numpy as np
import pytest

from confrepair.cache import Cache
from confrepair.cli import EXIT_INCOMPLETE, EXIT_OK, main
from confrepair.configfile import config_diff
from confrepair.fixtures import FixtureSize, figure2_fixture, generate_random_fixture, git_diff
from confrepair.logic import (
    CnfFormula,
    Literal,
    Var,
    conj,
    disj,
    neg,
    solve,
    to_cnf,
    truth_table,
    variables,
)
from confrepair.patch import HEADER_ONLY, parse_patch, patch_lines, patch_lines_from_text
from confrepair.repair import ConstraintSource, Optimizations

from helpers import corpus, holds_bruteforce, run_fixture
from test_patch import apply, opcode_lines


@pytest.mark.criterion(1, "interrupt-controller example end to end")
def test_figure_two_end_to_end(tmp_path, capsys):
    start = time.perf_counter()
    d = figure2_fixture().write(tmp_path / "fig2")
    assert (d / "input.config").read_text() == "# CONFIG_PM is not set\n"
    out = tmp_path / "out"
    common = ["--tree", str(d / "tree"), "--patch", str(d / "patch.diff")]
    assert main(["repair", *common, "--config", str(d / "input.config"), "--out", str(out)]) == EXIT_OK
    configs = sorted(out.glob("*.config"))
    assert len(configs) == 2
    capsys.readouterr()

    assert main(["coverage", *common, *itertools.chain.from_iterable(("--config", str(c)) for c in configs)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["ratio"] == 1.0
    assert main(["coverage", *common, "--config", str(d / "input.config")]) == EXIT_INCOMPLETE
    assert json.loads(capsys.readouterr().out)["ratio"] == 0.0
    elapsed = time.perf_counter() - start
    print(f"\ncriterion 1: 2 configs, aggregate 1.0, input 0.0 in {elapsed:.3f} s")
    assert elapsed < 1.0


@pytest.mark.criterion(2, "every repaired config satisfies the spec and its group")
def test_repair_validity():
    start = time.perf_counter()
    runs = corpus()
    assert len(runs) >= 500
    limit = FixtureSize().variables()
    violations = checked = 0
    for run in runs:
        spec = run.bundle.spec
        assert len(spec.variables()) <= min(limit, 16)
        source = ConstraintSource(run.bundle, Optimizations.none())
        for rc in run.outcome.configs:
            values = rc.config.entries
            checked += 1
            ok = holds_bruteforce(run.bundle.spec_formula, spec, values) and holds_bruteforce(rc.constraint, spec, values)
            ok = ok and all(holds_bruteforce(source.get(p)[0], spec, values) for p in rc.covered)
            # the independent rule checker and build simulation must agree
            ok = ok and run.fixture.model.is_valid(values) and all(run.fixture.included(values, tuple(p)) for p in rc.covered)
            violations += not ok
    elapsed = time.perf_counter() - start
    print(f"\ncriterion 2: {checked} configs over {len(runs)} fixtures, {violations} violations, {elapsed:.1f} s")
    assert violations == 0
    assert elapsed < 60


@pytest.mark.criterion(3, "covered and uncoverable pairs partition the patch")
def test_partition_completeness():
    violations = uncoverable = 0
    for run in corpus():
        covered = run.outcome.covered
        dead = [p for p, _ in run.outcome.uncoverable]
        if len(covered) + len(dead) != len(run.pairs) or set(covered) | set(dead) != set(run.pairs) or set(covered) & set(dead):
            violations += 1
        source = ConstraintSource(run.bundle, Optimizations.none())
        for pair in dead:
            uncoverable += 1
            f = conj(run.bundle.spec_formula, source.get(pair)[0])
            if truth_table(f, sorted(set(variables(f)))).any():
                violations += 1
        groups, oracle_dead = run.fixture.oracle_partition()
        if [[tuple(p) for p in rc.covered] for rc in run.outcome.configs] != groups or [tuple(p) for p in dead] != oracle_dead:
            violations += 1
    print(f"\ncriterion 3: {uncoverable} uncoverable pairs confirmed by enumeration, {violations} violations")
    assert violations == 0


@pytest.mark.criterion(4, "changed options are locally irredundant")
def test_preservation():
    violations = reverts = 0
    for run in corpus():
        fx, spec = run.fixture, run.bundle.spec
        original = {n: run.config.entries.get(n, "n") for n in spec.options}
        report = json.loads(run.report_bytes())
        for rc, entry in zip(run.outcome.configs, report["configs"]):
            values = rc.config.entries
            for name in rc.options_changed:
                reverts += 1
                trial = dict(values, **{name: original[name]})
                if fx.model.is_valid(trial) and all(fx.included(trial, tuple(p)) for p in rc.covered):
                    violations += 1
            ratio = len(rc.options_changed) / len(spec.options)
            if config_diff(run.config, rc.config, spec) != ratio or entry["change_ratio"] != ratio:
                violations += 1
            if entry["options_changed"] != rc.options_changed:
                violations += 1
    print(f"\ncriterion 4: {reverts} single-option reverts tried, {violations} violations")
    assert reverts > 0 and violations == 0


def _random_formula(rng, names, depth):
    if depth == 0 or rng.random() < 0.2:
        return Var(rng.choice(names))
    roll = rng.random()
    if roll < 0.2:
        return neg(_random_formula(rng, names, depth - 1))
    kids = [_random_formula(rng, names, depth - 1) for _ in range(rng.randint(2, 3))]
    return conj(*kids) if roll < 0.6 else disj(*kids)


def _clauses_sat(clauses, n, fixed=()):
    """Satisfiability of integer clauses by enumerating all 2**n assignments."""
    rows = np.arange(1 << n)
    bits = ((rows[:, None] >> np.arange(n)) & 1).astype(bool)
    ok = np.ones(1 << n, dtype=bool)
    for c in list(clauses) + [[l] for l in fixed]:
        sat = np.zeros(1 << n, dtype=bool)
        for lit in c:
            col = bits[:, abs(lit) - 1]
            sat |= col if lit > 0 else ~col
        ok &= sat
    return bool(ok.any())


@pytest.mark.criterion(5, "CNF encoding and unsat cores are sound")
def test_solver_soundness():
    start = time.perf_counter()
    rng = random.Random(2024)
    violations = 0
    for _ in range(10_000):
        names = [f"v{i}" for i in range(rng.randint(1, 12))]
        f = _random_formula(rng, names, rng.randint(1, 5))
        expected = bool(truth_table(f, names).any())
        if solve(to_cnf(f), shrink=False).sat != expected:
            violations += 1

    unsat = 0
    while unsat < 1000:
        n = rng.randint(3, 10)
        clauses = [[rng.choice([-1, 1]) * rng.randint(1, n) for _ in range(3)] for _ in range(rng.randint(n, 4 * n))]
        if not _clauses_sat(clauses, n):
            continue
        cnf = CnfFormula()
        for v in range(1, n + 1):
            cnf.var(f"x{v}")
        for c in clauses:
            cnf.add_clause(c)
        assumptions = [Literal(f"x{v}", rng.random() < 0.5) for v in rng.sample(range(1, n + 1), rng.randint(2, n))]
        as_int = {a: (1 if a.positive else -1) * int(a.var[1:]) for a in assumptions}
        out = solve(cnf, assumptions)
        if out.sat:
            continue
        unsat += 1
        # soundness: the core alone is contradictory
        core = list(out.core)
        if not core or not set(core) <= set(assumptions) or _clauses_sat(clauses, n, [as_int[a] for a in core]):
            violations += 1
            continue
        # progress: dropping cores reaches a satisfiable subset in fewer steps than there are assumptions
        remaining, steps = list(assumptions), 0
        while not out.sat and steps <= len(assumptions):
            steps += 1
            remaining = [a for a in remaining if a not in set(out.core)]
            out = solve(cnf, remaining)
            if not out.sat and not out.core:
                break
        if not out.sat or steps > len(assumptions):
            violations += 1
    elapsed = time.perf_counter() - start
    print(f"\ncriterion 5: 10000 formulas and {unsat} unsat instances, {violations} violations, {elapsed:.1f} s")
    assert violations == 0
    assert elapsed < 120


_VARIANTS = {
    "skip_unconditional": Optimizations(False, True, True),
    "reuse_chain": Optimizations(True, False, True),
    "nested_sat": Optimizations(True, True, False),
}


@pytest.mark.criterion(6, "optimizations change cost, not results")
def test_optimization_equivalence():
    violations = 0
    strict = {name: 0 for name in _VARIANTS}
    strict_all = 0
    for run in corpus():
        fx = run.fixture
        base = (run.config_bytes(), run.coverage_bytes())
        calls, queries = run.outcome.stats["solver_calls"], run.outcome.stats["line_pc_queries"]
        off = run_fixture(fx, optimizations=Optimizations.none())
        if (off.config_bytes(), off.coverage_bytes()) != base:
            violations += 1
        if calls > off.outcome.stats["solver_calls"] or queries > off.outcome.stats["line_pc_queries"]:
            violations += 1
        strict_all += calls < off.outcome.stats["solver_calls"] or queries < off.outcome.stats["line_pc_queries"]
        for name, opts in _VARIANTS.items():
            without = run_fixture(fx, optimizations=opts)
            if (without.config_bytes(), without.coverage_bytes()) != base:
                violations += 1
            w_calls, w_queries = without.outcome.stats["solver_calls"], without.outcome.stats["line_pc_queries"]
            if calls > w_calls or queries > w_queries:
                violations += 1
            strict[name] += calls < w_calls or queries < w_queries
    print(f"\ncriterion 6: {violations} violations; strict reductions: all {strict_all}, " + ", ".join(f"{k} {v}" for k, v in strict.items()))
    assert violations == 0
    assert strict_all > 0 and all(v > 0 for v in strict.values())


@pytest.mark.criterion(7, "warm cache reproduces cold-cache output")
def test_cache_equivalence(tmp_path):
    violations = 0
    for run in corpus():
        fx = run.fixture
        directory = tmp_path / fx.name
        cold = run_fixture(fx, cache=Cache(directory))
        warm_cache = Cache(directory)
        warm = run_fixture(fx, cache=warm_cache)
        outputs = lambda r: (r.report_bytes(), r.config_bytes(), r.coverage_bytes())
        if not (outputs(cold) == outputs(warm) == outputs(run)):
            violations += 1
        if sum(warm_cache.misses.values()):
            violations += 1
        # one byte of the Kconfig root changes: only its entry is recomputed
        text = fx.files[fx.kconfig_root]
        fx.files[fx.kconfig_root] = text[:-1] + (" " if text.endswith("\n") else "\n")
        try:
            edited = Cache(directory)
            run_fixture(fx, cache=edited)
        finally:
            fx.files[fx.kconfig_root] = text
        if edited.misses["kconfig"] != 1 or edited.misses["kbuild"] or edited.misses["cpp"]:
            violations += 1
    print(f"\ncriterion 7: {violations} violations")
    assert violations == 0


def _random_lines(rng, k):
    pool = ["int a;", "a++;", "#ifdef CONFIG_X", "#endif", "return 0;", "", "}", "{", "b = a;"]
    return [rng.choice(pool) for _ in range(k)]


def _text(lines):
    return "".join(l + "\n" for l in lines)


@pytest.mark.criterion(8, "patch lines agree with the apply oracle")
def test_patch_semantics():
    rng = random.Random(8)
    kinds = ["modify"] * 4 + ["new", "deleted", "rename-only", "head-removal"]
    violations = 0
    seen = set()
    for i in range(200):
        kind = kinds[i % len(kinds)] if i < len(kinds) else rng.choice(kinds)
        seen.add(kind)
        old_lines = _random_lines(rng, rng.randint(1, 25))
        if kind == "modify":
            new_lines = _random_lines(rng, rng.randint(0, 25))
            old, new, renames = {"f.c": _text(old_lines)}, {"f.c": _text(new_lines)}, {}
        elif kind == "new":
            old, new, renames = {}, {"f.c": _text(old_lines)}, {}
        elif kind == "deleted":
            old, new, renames = {"f.c": _text(old_lines)}, {}, {}
        elif kind == "rename-only":
            old, new, renames = {"a.c": _text(old_lines)}, {"b.c": _text(old_lines)}, {"a.c": "b.c"}
        else:
            cut = rng.randint(1, len(old_lines))
            old, new, renames = {"f.c": _text(old_lines)}, {"f.c": _text(old_lines[cut:] + ["tail();"])}, {}
        deltas = parse_patch(git_diff(old, new, renames))
        got = [(p.path, p.line) for p in patch_lines(deltas)]
        if kind in ("deleted", "rename-only"):
            violations += got != []
            continue
        before = old.get("f.c", "").splitlines()
        after = new["f.c"].splitlines()
        if before != after:
            replayed = apply(before, deltas[0])
            violations += replayed != after
        want = [("f.c", n) for n in opcode_lines(before, after)] if after else []
        if kind == "head-removal" and want:
            violations += want[0] != ("f.c", 1)
        violations += got != want

    header = patch_lines_from_text(git_diff({"x.h": "a\n"}, {"x.h": "b\n"}))
    violations += header.pairs != [] or header.unsupported != [("x.h", HEADER_ONLY)]
    print(f"\ncriterion 8: 200 randomized diffs covering {sorted(seen)}, {violations} violations")
    assert seen == set(kinds)
    assert violations == 0

"""Constraint analysis and unsat-core driven configuration repair.

:func:`krepair` partitions a patch's changed lines greedily into groups whose
constraints are jointly satisfiable, and :func:`repair_one` turns each
group's constraint into a configuration close to the input one.
"""

from __future__ import annotations

import json
import logging
import posixpath
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .cache import Cache, CacheKey
from .configfile import ConfigFile, changed_options
from .cpp_pc import TOKEN_PREFIX, BlockTree, enclosing_chain, parse_conditionals, specialize
from .kbuild import KbuildError, KbuildModel
from .kconfig import (
    KconfigSpec,
    MODULE_SUFFIX,
    declared_only,
    normalize_config,
    parse_kconfig,
    spec_from_json,
    spec_to_formula,
    spec_to_json,
    value_env,
    values_from_env,
)
from .logic import (
    FALSE,
    TRUE,
    Const,
    CnfFormula,
    Formula,
    Literal,
    SolverStats,
    conj,
    formula_from_json,
    formula_to_json,
    solve,
    solve_with_preference,
    substitute,
    to_cnf,
)
from .patch import PatchLine, PatchLineSet
from .tree import Tree

log = logging.getLogger(__name__)

UNSATISFIABLE = "unsatisfiable"


class RepairError(Exception):
    pass


class SolverBudgetExceeded(RepairError):
    pass


class ConstraintError(Exception):
    """A (file, line) pair that does not exist in the tree."""


# -- constraint bundle -----------------------------------------------------


def _cached(cache: Cache | None, key: CacheKey, compute, encode, decode):
    if cache is not None:
        raw = cache.get(key)
        if raw is not None:
            try:
                return decode(json.loads(raw))
            except (ValueError, KeyError, TypeError, IndexError):
                log.warning("undecodable %s cache entry; recomputing", key.producer)
    value = compute()
    if cache is not None:
        try:
            cache.put(key, json.dumps(encode(value), sort_keys=True).encode())
        except OSError as exc:
            log.warning("cache write failed (%s); continuing uncached", exc)
    return value


@dataclass
class BundleStats:
    file_pc_queries: int = 0
    line_pc_queries: int = 0


class ConstraintBundle:
    """Spec formula plus per-file and per-line constraint sources over one tree."""

    def __init__(self, tree: Tree, spec: KconfigSpec, spec_formula: Formula | None = None, cache: Cache | None = None):
        self.tree = tree
        self.spec = spec
        self.spec_formula = spec_to_formula(spec) if spec_formula is None else spec_formula
        self.cache = cache
        self.kbuild = KbuildModel(tree)
        self.stats = BundleStats()
        self._file_pc: dict[str, Formula] = {}
        self._blocks: dict[str, BlockTree] = {}
        self._tree_id: str | None = None

    @property
    def tree_id(self) -> str:
        if self._tree_id is None:
            self._tree_id = self.tree.digest(self.spec.source_files)
        return self._tree_id

    def _require_file(self, path: str):
        if not self.tree.exists(path):
            raise ConstraintError(f"{path}: no such file in the tree")

    def file_pc(self, path: str) -> Formula:
        """Build-system presence condition of compilation unit ``path``."""
        hit = self._file_pc.get(path)
        if hit is not None:
            return hit
        self._require_file(path)
        self.stats.file_pc_queries += 1
        inputs = [("path", path.encode())]
        inputs += [(mk, self.tree.read_bytes(mk)) for mk in self.kbuild.makefiles_for(path)]
        key = CacheKey.for_inputs("kbuild", inputs)
        try:
            raw = _cached(self.cache, key, lambda: self.kbuild.file_pc(path), formula_to_json, formula_from_json)
        except KbuildError as exc:
            raise ConstraintError(str(exc)) from None
        pc = declared_only(raw, self.spec)
        self._file_pc[path] = pc
        return pc

    def block_tree(self, path: str) -> BlockTree:
        hit = self._blocks.get(path)
        if hit is not None:
            return hit
        self._require_file(path)
        data = self.tree.read_bytes(path)
        key = CacheKey.for_inputs("cpp", [("path", path.encode()), (path, data)])
        text = data.decode("utf-8", errors="surrogateescape")
        raw = _cached(self.cache, key, lambda: parse_conditionals(text, namespace=path), BlockTree.to_json, BlockTree.from_json)
        tree = specialize(raw, self.spec)
        self._blocks[path] = tree
        return tree

    def chain(self, path: str, line: int) -> tuple[int, ...]:
        tree = self.block_tree(path)
        if not 1 <= line <= tree.line_count:
            raise ConstraintError(f"{path}:{line}: line out of range 1..{tree.line_count}")
        return enclosing_chain(tree, line)

    def line_pc(self, path: str, line: int) -> Formula:
        """Preprocessor condition of one line (counted as a query)."""
        chain = self.chain(path, line)
        self.stats.line_pc_queries += 1
        return self.block_tree(path).block_pc(chain[-1])


def _kconfig_inputs(tree: Tree, root: str) -> list[tuple[str, bytes]]:
    out: list[tuple[str, bytes]] = []
    seen: set[str] = set()
    todo = [root]
    while todo:
        path = todo.pop(0)
        if path in seen or not tree.exists(path):
            continue
        seen.add(path)
        data = tree.read_bytes(path)
        out.append((path, data))
        for m in re.finditer(rb'^\s*source\s+"([^"]+)"', data, re.M):
            todo.append(m.group(1).decode())
    return out


def load_bundle(tree: Tree, kconfig_root: str = "Kconfig", cache: Cache | None = None) -> ConstraintBundle:
    """Parse (or fetch from ``cache``) the Kconfig spec and wrap ``tree``."""
    key = CacheKey.for_inputs("kconfig", [("root", kconfig_root.encode()), *_kconfig_inputs(tree, kconfig_root)])

    def compute():
        spec = parse_kconfig(kconfig_root, tree.read_text)
        return spec, spec_to_formula(spec)

    def encode(value):
        spec, formula = value
        return {"spec": spec_to_json(spec), "formula": formula_to_json(formula)}

    def decode(obj):
        return spec_from_json(obj["spec"]), formula_from_json(obj["formula"])

    spec, formula = _cached(cache, key, compute, encode, decode)
    if not solve(to_cnf(formula)).sat:
        raise RepairError("the Kconfig specification admits no configuration")
    return ConstraintBundle(tree, spec, formula, cache)


# -- constraints per line --------------------------------------------------


@dataclass(frozen=True)
class Optimizations:
    """Switches for the three constraint-analysis shortcuts."""

    skip_unconditional: bool = True
    reuse_chain: bool = True
    nested_sat: bool = True

    @classmethod
    def none(cls) -> "Optimizations":
        return cls(False, False, False)


class ConstraintSource:
    """Per-run memo of line constraints, keyed by ``(unit, block chain)``."""

    def __init__(self, bundle: ConstraintBundle, optimizations: Optimizations = Optimizations()):
        self.bundle = bundle
        self.opts = optimizations
        self._memo: dict[tuple, Formula] = {}

    def get(self, pair: PatchLine) -> tuple[Formula, tuple]:
        b = self.bundle
        if pair.proxy is not None:
            # header line: the unit's file-level condition stands in for it
            b.chain(pair.path, pair.line)
            return b.file_pc(pair.proxy), (pair.proxy, (0,))
        chain = b.chain(pair.path, pair.line)
        key = (pair.path, chain)
        file_pc = b.file_pc(pair.path)
        if self.opts.skip_unconditional and len(chain) == 1:
            return file_pc, key
        if self.opts.reuse_chain and key in self._memo:
            return self._memo[key], key
        formula = conj(file_pc, b.line_pc(pair.path, pair.line))
        self._memo[key] = formula
        return formula, key


def get_constraint(bundle: ConstraintBundle, file: str, line: int, optimizations: Optimizations = Optimizations()) -> Formula:
    """Presence condition of one changed line: file condition and line condition."""
    return ConstraintSource(bundle, optimizations).get(PatchLine(file, line))[0]


# -- repair ----------------------------------------------------------------


@dataclass
class RepairTrace:
    iterations: int = 0
    removed: list[Literal] = field(default_factory=list)
    reverted: list[str] = field(default_factory=list)


def config_assumptions(spec: KconfigSpec, config: ConfigFile) -> list[Literal]:
    """One literal per boolean fact: ``y`` gives two for tristates."""
    out = []
    for name in spec.options:
        value = config.entries.get(name)
        if value is None:
            continue
        tri = spec.is_tristate(name)
        if value == "n":
            out.append(Literal(name, False))
        elif value == "m" and tri:
            out.append(Literal(name + MODULE_SUFFIX, True))
        else:
            out.append(Literal(name, True))
            if tri:
                out.append(Literal(name + MODULE_SUFFIX, False))
    return out


def _fresh_cnf(spec: KconfigSpec, formula: Formula) -> CnfFormula:
    cnf = CnfFormula()
    for name in spec.variables():
        cnf.var(name)
    return to_cnf(formula, cnf)


def _holds(spec: KconfigSpec, formula: Formula, values: dict[str, str], stats: SolverStats | None) -> bool:
    """Does ``formula`` hold for these option values, for some choice of free tokens?"""
    env = value_env(spec, values)
    rest = substitute(formula, {k: TRUE if v else FALSE for k, v in env.items()})
    if isinstance(rest, Const):
        return rest.value
    return solve(to_cnf(rest), stats=stats, shrink=False).sat


def repair_one(
    config: ConfigFile,
    constraint: Formula,
    bundle: ConstraintBundle,
    stats: SolverStats | None = None,
    trace: RepairTrace | None = None,
) -> ConfigFile:
    """Change ``config`` as little as the unsat cores demand so that ``constraint`` holds.

    Settings named in an unsat core are dropped until the rest is
    consistent with the spec and ``constraint``; dropped settings are then
    refilled from a model that prefers the original (then default) values.
    Finally any changed option that could go back to its original value on
    its own is put back.
    """
    spec = bundle.spec
    trace = trace if trace is not None else RepairTrace()
    formula = conj(bundle.spec_formula, constraint)
    cnf = _fresh_cnf(spec, formula)
    assumptions = config_assumptions(spec, config)
    while True:
        trace.iterations += 1
        out = solve(cnf, assumptions, stats=stats)
        if out.sat:
            break
        if not out.core:
            raise RepairError("constraint is unsatisfiable under the spec (empty unsat core)")
        core = set(out.core)
        trace.removed.extend(a for a in assumptions if a in core)
        assumptions = [a for a in assumptions if a not in core]
    preferred = value_env(spec, normalize_config(spec, config.entries).values)
    out = solve_with_preference(cnf, assumptions, preferred, stats=stats)
    if not out.sat:
        raise RepairError("lost satisfiability while repopulating")
    values = values_from_env(spec, out.model)

    original = {name: config.entries.get(name, "n") for name in spec.options}
    progress = True
    while progress:
        progress = False
        for name in spec.options:
            if values[name] == original[name]:
                continue
            trial = dict(values)
            trial[name] = original[name]
            if _holds(spec, formula, trial, stats):
                values = trial
                trace.reverted.append(name)
                progress = True
    return ConfigFile(entries=values, passthrough=list(config.passthrough), provenance=config.provenance)


@dataclass
class RepairedConfig:
    config: ConfigFile
    covered: list[PatchLine]
    constraint: Formula
    options_changed: list[str]
    removed: list[Literal]


@dataclass
class RepairOutcome:
    configs: list[RepairedConfig]
    uncoverable: list[tuple[PatchLine, str]]
    stats: dict
    unsupported: list[tuple[str, str]] = field(default_factory=list)

    @property
    def covered(self) -> list[PatchLine]:
        return [p for rc in self.configs for p in rc.covered]


def _prefixes(key: tuple) -> list[tuple]:
    unit, chain = key
    return [(unit, chain[:k]) for k in range(1, len(chain) + 1)]


def krepair(
    pairs: PatchLineSet | Sequence[PatchLine],
    config: ConfigFile,
    bundle: ConstraintBundle,
    *,
    optimizations: Optimizations = Optimizations(),
    max_solver_calls: int | None = None,
) -> RepairOutcome:
    """Repair ``config`` into as many configurations as needed to cover ``pairs``."""
    unsupported = list(pairs.unsupported) if isinstance(pairs, PatchLineSet) else []
    remaining = list(dict.fromkeys(pairs))
    stats = SolverStats()
    queries_before = bundle.stats.line_pc_queries
    source = ConstraintSource(bundle, optimizations)
    skipped = 0

    def is_sat(f: Formula) -> bool:
        if max_solver_calls is not None and stats.calls >= max_solver_calls:
            raise SolverBudgetExceeded(f"solver call budget of {max_solver_calls} exhausted")
        return solve(to_cnf(f), stats=stats, shrink=False).sat

    results: list[RepairedConfig] = []
    while remaining:
        current = bundle.spec_formula
        parts: list[Formula] = []
        covered: list[PatchLine] = []
        known_sat: set[tuple] = set()
        known_unsat: set[tuple] = set()
        for pair in remaining:
            constraint, key = source.get(pair)
            verdict = None
            if optimizations.nested_sat:
                if key in known_sat:
                    verdict = True
                elif any(p in known_unsat for p in _prefixes(key)):
                    verdict = False
                if verdict is not None:
                    skipped += 1
            if verdict is None:
                verdict = is_sat(conj(current, constraint))
                if not verdict and optimizations.nested_sat:
                    known_unsat.add(key)
            if verdict:
                current = conj(current, constraint)
                parts.append(constraint)
                covered.append(pair)
                if optimizations.nested_sat:
                    known_sat.update(_prefixes(key))
        if not covered:
            break
        group_constraint = conj(*parts)
        trace = RepairTrace()
        repaired = repair_one(config, group_constraint, bundle, stats, trace)
        results.append(
            RepairedConfig(repaired, covered, group_constraint, changed_options(config, repaired, bundle.spec), trace.removed)
        )
        done = set(covered)
        remaining = [p for p in remaining if p not in done]
        if max_solver_calls is not None and stats.calls > max_solver_calls:
            raise SolverBudgetExceeded(f"solver call budget of {max_solver_calls} exhausted")
    run_stats = {
        "solver_calls": stats.calls,
        "conflicts": stats.conflicts,
        "line_pc_queries": bundle.stats.line_pc_queries - queries_before,
        "sat_checks_skipped": skipped,
        "cores_removed": sum(len(rc.removed) for rc in results),
        "groups": len(results),
    }
    return RepairOutcome(results, [(p, UNSATISFIABLE) for p in remaining], run_stats, unsupported)

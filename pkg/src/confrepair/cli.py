"""``confrepair`` command line: repair, coverage, constraints."""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .cache import Cache, default_cache_dir
from .configfile import ConfigFile, ConfigFileError, config_diff
from .coverage import CoverageReport, aggregate_coverage, measure_coverage
from .cpp_pc import CppError
from .kbuild import KbuildError
from .kconfig import KconfigError, NonConvergenceError
from .logic import conj, solve, to_cnf, to_infix
from .patch import PatchError, PatchLine, patch_lines_from_text
from .repair import (
    ConstraintError,
    ConstraintSource,
    Optimizations,
    RepairError,
    RepairOutcome,
    get_constraint,
    krepair,
    load_bundle,
)
from .tree import Tree, TreeError

log = logging.getLogger("confrepair")

EXIT_OK = 0
EXIT_INCOMPLETE = 1
EXIT_ERROR = 2

_FAILURES = (
    OSError,
    UnicodeDecodeError,
    TreeError,
    KconfigError,
    NonConvergenceError,
    KbuildError,
    CppError,
    PatchError,
    ConfigFileError,
    ConstraintError,
    RepairError,
)


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    """Everything one invocation reads and writes, checked up front."""

    tree: Path
    kconfig: str = "Kconfig"
    configs: list[Path] = field(default_factory=list)
    patch: Path | None = None
    cache: Path | None = None
    out: Path | None = None
    format: str = "json"

    def validate(self, *, need_config: bool, need_patch: bool) -> None:
        self.tree = Path(self.tree).resolve()
        if not self.tree.is_dir():
            raise UsageError(f"--tree {self.tree}: not a directory")
        if not (self.tree / self.kconfig).is_file():
            raise UsageError(f"--kconfig {self.kconfig}: not found under {self.tree}")
        self.configs = [Path(c).resolve() for c in self.configs]
        if need_config and not self.configs:
            raise UsageError("--config is required")
        for c in self.configs:
            if not c.is_file():
                raise UsageError(f"--config {c}: no such file")
        if need_patch:
            if self.patch is None:
                raise UsageError("--patch is required")
            self.patch = Path(self.patch).resolve()
            if not self.patch.is_file():
                raise UsageError(f"--patch {self.patch}: no such file")
        if self.cache is not None:
            self.cache = Path(self.cache).resolve()
        if self.out is not None:
            self.out = Path(self.out).resolve()


def _manifest(args) -> RunManifest:
    cache = args.cache or default_cache_dir()
    return RunManifest(
        tree=Path(args.tree),
        kconfig=args.kconfig,
        configs=[Path(c) for c in getattr(args, "config", None) or []],
        patch=Path(args.patch) if getattr(args, "patch", None) else None,
        cache=Path(cache) if cache else None,
        out=Path(args.out) if getattr(args, "out", None) else None,
        format=args.format,
    )


def _bundle(m: RunManifest):
    cache = Cache(m.cache) if m.cache is not None else None
    return load_bundle(Tree(m.tree), m.kconfig, cache)


def _pair_json(pair: PatchLine) -> dict:
    out = {"file": pair.path, "line": pair.line}
    if pair.proxy is not None:
        out["proxy"] = pair.proxy
    return out


def repair_report(outcome: RepairOutcome, original: ConfigFile, bundle, paths: Sequence[str]) -> dict:
    return {
        "tool_version": __version__,
        "tree_id": bundle.tree_id,
        "pairs_total": len(outcome.covered) + len(outcome.uncoverable),
        "pairs_covered": len(outcome.covered),
        "pairs_uncoverable": len(outcome.uncoverable),
        "configs": [
            {
                "path": path,
                "covered_pairs": [_pair_json(p) for p in rc.covered],
                "options_changed": rc.options_changed,
                "change_ratio": config_diff(original, rc.config, bundle.spec),
            }
            for path, rc in zip(paths, outcome.configs)
        ],
        "uncoverable": [dict(_pair_json(p), reason=reason) for p, reason in outcome.uncoverable],
        "unsupported": [{"file": f, "reason": reason} for f, reason in outcome.unsupported],
        "solver_stats": outcome.stats,
    }


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _publish(staging: Path, out: Path) -> None:
    """Move staged files into ``out``; a fresh ``out`` appears in one rename."""
    if not out.exists():
        os.rename(staging, out)
        return
    if not out.is_dir():
        raise UsageError(f"--out {out}: exists and is not a directory")
    for item in sorted(staging.iterdir()):
        os.replace(item, out / item.name)
    staging.rmdir()


def cmd_repair(m: RunManifest, *, optimizations: Optimizations = Optimizations(), max_solver_calls=None, dump_dimacs=False) -> int:
    m.validate(need_config=True, need_patch=True)
    if m.out is None:
        raise UsageError("--out is required")
    if len(m.configs) != 1:
        raise UsageError("repair takes exactly one --config")
    bundle = _bundle(m)
    original = ConfigFile.load(m.configs[0])
    pairs = patch_lines_from_text(m.patch.read_text())
    outcome = krepair(pairs, original, bundle, optimizations=optimizations, max_solver_calls=max_solver_calls)

    paths = [f"repaired-{k}.config" for k in range(1, len(outcome.configs) + 1)]
    report = repair_report(outcome, original, bundle, paths)
    m.out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".confrepair-", dir=m.out.parent))
    try:
        for k, (path, rc) in enumerate(zip(paths, outcome.configs), 1):
            (staging / path).write_text(rc.config.deparse(bundle.spec))
            if dump_dimacs:
                cnf = to_cnf(conj(bundle.spec_formula, rc.constraint))
                (staging / f"group-{k}.cnf").write_text(cnf.to_dimacs())
        (staging / "report.json").write_text(_dumps(report))
        _publish(staging, m.out)
    finally:
        if staging.exists():
            shutil.rmtree(staging)

    if m.format == "json":
        sys.stdout.write(_dumps(report))
    else:
        print(f"pairs: {report['pairs_total']} total, {report['pairs_covered']} covered, {report['pairs_uncoverable']} uncoverable")
        for entry in report["configs"]:
            print(f"{m.out / entry['path']}: {len(entry['covered_pairs'])} pairs, {len(entry['options_changed'])} options changed")
        for entry in report["unsupported"]:
            print(f"unsupported: {entry['file']} ({entry['reason']})")
    # uncoverable pairs must be dead on their own; anything else is a bug
    source = ConstraintSource(bundle, Optimizations.none())
    for pair, _ in outcome.uncoverable:
        if solve(to_cnf(conj(bundle.spec_formula, source.get(pair)[0]))).sat:
            log.error("%s was left uncovered although it is satisfiable", pair)
            return EXIT_INCOMPLETE
    return EXIT_OK


def coverage_document(reports: Sequence[CoverageReport], configs: Sequence[str], aggregate: CoverageReport) -> dict:
    doc = aggregate.to_json()
    doc["tool_version"] = __version__
    doc["configs"] = [
        {"path": path, "covered_lines": r.covered_lines, "ratio": r.ratio} for path, r in zip(configs, reports)
    ]
    return doc


def cmd_coverage(m: RunManifest) -> int:
    m.validate(need_config=True, need_patch=True)
    bundle = _bundle(m)
    pairs = patch_lines_from_text(m.patch.read_text())
    reports = [measure_coverage(pairs, ConfigFile.load(c), bundle) for c in m.configs]
    agg = aggregate_coverage(reports)
    if m.format == "json":
        names = [os.path.relpath(c, m.out.parent if m.out else Path.cwd()) for c in m.configs]
        text = _dumps(coverage_document(reports, names, agg))
    else:
        text = agg.to_text()
    if m.out is not None:
        m.out.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".confrepair-", dir=m.out.parent)
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, m.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK if agg.ratio == 1.0 else EXIT_INCOMPLETE


def cmd_constraints(m: RunManifest, file: str, line: int, optimizations: Optimizations = Optimizations()) -> int:
    m.validate(need_config=False, need_patch=False)
    bundle = _bundle(m)
    formula = get_constraint(bundle, file, line, optimizations)
    print(to_infix(formula))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tree", required=True, help="root of the patched source tree")
    common.add_argument("--kconfig", default="Kconfig", help="top-level Kconfig file, relative to the tree (default: Kconfig)")
    common.add_argument("--cache", help="constraint cache directory (default: $CONFREPAIR_CACHE)")
    common.add_argument("--format", choices=("json", "text"), default="json", help="output format on stdout")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")

    parser = argparse.ArgumentParser(prog="confrepair", description="Repair kernel configurations so they build every line a patch touches.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    rp = sub.add_parser("repair", parents=[common], help="write configurations covering a patch")
    rp.add_argument("--config", action="append", required=True, help="input .config")
    rp.add_argument("--patch", required=True, help="unified diff already applied to the tree")
    rp.add_argument("--out", required=True, help="output directory")
    rp.add_argument("--max-solver-calls", type=int, help="abort after this many solver calls")
    rp.add_argument("--disable-optimizations", action="store_true", help="turn off the constraint-analysis shortcuts")
    rp.add_argument("--dump-dimacs", action="store_true", help="also write each group's CNF")

    cp = sub.add_parser("coverage", parents=[common], help="measure patch coverage of configurations")
    cp.add_argument("--config", action="append", required=True, help=".config to measure (repeat to aggregate)")
    cp.add_argument("--patch", required=True, help="unified diff already applied to the tree")
    cp.add_argument("--out", help="write the report here instead of stdout")

    kp = sub.add_parser("constraints", parents=[common], help="print the constraint of one source line")
    kp.add_argument("--file", required=True, help="tree-relative .c file")
    kp.add_argument("--line", required=True, type=int, help="1-based line number")
    kp.add_argument("--disable-optimizations", action="store_true", help="always conjoin the line condition")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="confrepair: %(levelname)s: %(message)s", stream=sys.stderr)
    m = _manifest(args)
    opts = Optimizations.none() if getattr(args, "disable_optimizations", False) else Optimizations()
    try:
        if args.command == "repair":
            return cmd_repair(m, optimizations=opts, max_solver_calls=args.max_solver_calls, dump_dimacs=args.dump_dimacs)
        if args.command == "coverage":
            return cmd_coverage(m)
        return cmd_constraints(m, args.file, args.line, opts)
    except UsageError as exc:
        print(f"confrepair: {exc}", file=sys.stderr)
    except _FAILURES as exc:
        print(f"confrepair: error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

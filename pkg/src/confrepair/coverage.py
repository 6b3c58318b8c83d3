"""Patch coverage of configuration files."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

from .configfile import ConfigFile
from .kconfig import normalize_config, value_env
from .logic import FALSE, TRUE, Const, Formula, solve, substitute, to_cnf
from .patch import PatchLine, PatchLineSet
from .repair import ConstraintBundle

COVERED = "covered"
FILE_EXCLUDED = "file-excluded"
LINE_EXCLUDED = "line-excluded"

@dataclass(frozen=True)
class PairCoverage:
    file: str
    line: int
    proxy: str | None
    covered: bool
    reason: str

    @property
    def pair(self) -> PatchLine:
        return PatchLine(self.file, self.line, self.proxy)

@dataclass
class CoverageReport:
    total_lines: int
    covered_lines: int
    ratio: float
    per_pair: list[PairCoverage]
    empty_patch: bool = False
    header_note: list[str] = field(default_factory=list)

    @classmethod
    def from_pairs(cls, per_pair: list[PairCoverage], header_note=()) -> "CoverageReport":
        total = len(per_pair)
        covered = sum(p.covered for p in per_pair)
        return cls(
            total_lines=total,
            covered_lines=covered,
            ratio=covered / total if total else 1.0,
            per_pair=per_pair,
            empty_patch=total == 0,
            header_note=list(header_note),
        )

    def to_json(self) -> dict:
        return {
            "total_lines": self.total_lines,
            "covered_lines": self.covered_lines,
            "ratio": self.ratio,
            "empty_patch": self.empty_patch,
            "header_note": self.header_note,
            "pairs": [asdict(p) for p in self.per_pair],
        }

    def to_text(self) -> str:
        lines = [
            f"total_lines: {self.total_lines}",
            f"covered_lines: {self.covered_lines}",
            f"ratio: {self.ratio:.4f}",
            f"empty_patch: {'yes' if self.empty_patch else 'no'}",
        ]
        for note in self.header_note:
            lines.append(f"header: {note}")
        if self.per_pair:
            lines.append("")
            width = max(len(f"{p.file}:{p.line}") for p in self.per_pair)
            for p in self.per_pair:
                where = f"{p.file}:{p.line}"
                via = f"  via {p.proxy}" if p.proxy else ""
                lines.append(f"{where:<{width}}  {p.reason}{via}")
        return "\n".join(lines) + "\n"

def _holds(f: Formula, env: dict[str, bool]) -> bool:
    rest = substitute(f, {k: TRUE if v else FALSE for k, v in env.items()})
    if isinstance(rest, Const):
        return rest.value
    # free tokens left: the line is reachable if some choice of them works
    return solve(to_cnf(rest), shrink=False).sat

def measure_coverage(pairs: PatchLineSet | Sequence[PatchLine], config: ConfigFile, bundle: ConstraintBundle) -> CoverageReport:
    """Which changed lines a configuration builds, after ``olddefconfig``-style completion."""
    spec = bundle.spec
    env = value_env(spec, normalize_config(spec, config.entries).values)
    out = []
    for pair in pairs:
        unit = pair.proxy or pair.path
        bundle.chain(pair.path, pair.line)
        if not _holds(bundle.file_pc(unit), env):
            reason = FILE_EXCLUDED
        elif pair.proxy is None and not _holds(bundle.line_pc(pair.path, pair.line), env):
            reason = LINE_EXCLUDED
        else:
            reason = COVERED
        out.append(PairCoverage(pair.path, pair.line, pair.proxy, reason == COVERED, reason))
    notes = []
    if isinstance(pairs, PatchLineSet):
        notes = [f"{h} -> {u}" for h, u in pairs.header_mapped]
    return CoverageReport.from_pairs(out, notes)

def aggregate_coverage(reports: Sequence[CoverageReport]) -> CoverageReport:
    """Union of coverage: a line counts once any report covers it."""
    if not reports:
        raise ValueError("no reports to aggregate")
    keys = [p.pair for p in reports[0].per_pair]
    for r in reports[1:]:
        if [p.pair for p in r.per_pair] != keys:
            raise ValueError("reports cover different patch lines")
    merged = []
    for i, key in enumerate(keys):
        rows = [r.per_pair[i] for r in reports]
        best = next((row for row in rows if row.covered), None)
        if best is None:
            # most specific failure: line-excluded beats file-excluded
            best = next((row for row in rows if row.reason == LINE_EXCLUDED), rows[0])
        merged.append(best)
    return CoverageReport.from_pairs(merged, reports[0].header_note)

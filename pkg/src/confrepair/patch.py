"""Unified diffs to after-patch ``(file, line)`` pairs."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple

MODIFY = "modify"
ADD = "add"
DELETE = "delete"
RENAME_ONLY = "rename-only"

HEADER_ONLY = "header-only"
NON_SOURCE = "non-source"


class PatchError(Exception):
    pass


@dataclass
class Hunk:
    old_start: int
    old_len: int
    new_start: int
    new_len: int
    lines: list[tuple[str, str]] = field(default_factory=list)
    """``(kind, text)`` with kind one of ``' '``, ``'+'``, ``'-'``."""


@dataclass
class FileDelta:
    old_path: str | None
    new_path: str | None
    kind: str
    hunks: list[Hunk] = field(default_factory=list)

    @property
    def path(self) -> str:
        return self.new_path if self.new_path is not None else self.old_path


class PatchLine(NamedTuple):
    """A changed line.  Header lines carry the compilation unit standing in for them."""

    path: str
    line: int
    proxy: str | None = None

    @property
    def unit(self) -> str:
        return self.proxy or self.path

    def __str__(self):
        via = f" (via {self.proxy})" if self.proxy else ""
        return f"{self.path}:{self.line}{via}"


@dataclass
class PatchLineSet:
    pairs: list[PatchLine] = field(default_factory=list)
    unsupported: list[tuple[str, str]] = field(default_factory=list)
    header_mapped: list[tuple[str, str]] = field(default_factory=list)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


_HUNK = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_GIT = re.compile(r"^diff --git (\S+) (\S+)")


def _strip_prefix(path: str) -> str | None:
    path = path.split("\t", 1)[0].strip()
    if path == "/dev/null":
        return None
    if path.startswith(("a/", "b/")):
        return path[2:]
    return path


def parse_patch(text: str) -> list[FileDelta]:
    """Parse git-style or plain unified diffs into one delta per changed file."""
    deltas: list[FileDelta] = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    cur: FileDelta | None = None
    git_block = False
    rename_from = rename_to = None
    i = 0

    def finish():
        nonlocal cur
        if cur is None:
            return
        if cur.old_path is None and cur.new_path is None:
            raise PatchError("delta without file names")
        if cur.kind == MODIFY:
            if cur.old_path is None:
                cur.kind = ADD
            elif cur.new_path is None:
                cur.kind = DELETE
            elif cur.old_path != cur.new_path and not cur.hunks:
                cur.kind = RENAME_ONLY
        deltas.append(cur)
        cur = None

    while i < len(lines):
        line = lines[i]
        m = _GIT.match(line)
        if m:
            finish()
            cur = FileDelta(_strip_prefix(m.group(1)), _strip_prefix(m.group(2)), MODIFY)
            git_block = True
            i += 1
            continue
        if line.startswith("--- ") and i + 1 < len(lines) and lines[i + 1].startswith("+++ "):
            old = _strip_prefix(line[4:])
            new = _strip_prefix(lines[i + 1][4:])
            if not git_block:
                finish()
                cur = FileDelta(old, new, MODIFY)
            else:
                cur.old_path, cur.new_path = old, new
            git_block = False
            i += 2
            continue
        if cur is not None and git_block:
            if line.startswith("new file mode"):
                cur.old_path = None
                cur.kind = ADD
            elif line.startswith("deleted file mode"):
                cur.new_path = None
                cur.kind = DELETE
            elif line.startswith("rename from "):
                cur.old_path = line[len("rename from "):].strip()
            elif line.startswith("rename to "):
                cur.new_path = line[len("rename to "):].strip()
            i += 1
            continue
        m = _HUNK.match(line)
        if m:
            if cur is None:
                raise PatchError(f"hunk outside a file delta at line {i + 1}")
            hunk = Hunk(
                int(m.group(1)),
                int(m.group(2)) if m.group(2) is not None else 1,
                int(m.group(3)),
                int(m.group(4)) if m.group(4) is not None else 1,
            )
            i += 1
            old_seen = new_seen = 0
            while old_seen < hunk.old_len or new_seen < hunk.new_len:
                if i >= len(lines):
                    raise PatchError(f"hunk at {hunk.old_start} is truncated")
                body = lines[i]
                kind = body[:1] if body else " "
                if kind == "\\":
                    i += 1
                    continue
                if kind not in " +-":
                    raise PatchError(f"line {i + 1}: unexpected {body!r} inside hunk")
                if kind in " -":
                    old_seen += 1
                if kind in " +":
                    new_seen += 1
                if old_seen > hunk.old_len or new_seen > hunk.new_len:
                    raise PatchError(f"line {i + 1}: hunk longer than its header declares")
                hunk.lines.append((kind, body[1:]))
                i += 1
            while i < len(lines) and lines[i].startswith("\\"):
                i += 1
            cur.hunks.append(hunk)
            continue
        if line.startswith("@@"):
            raise PatchError(f"line {i + 1}: malformed hunk header {line!r}")
        i += 1
    finish()
    return deltas


def _is_unit(path: str) -> bool:
    return path.endswith(".c")


def _is_header(path: str) -> bool:
    return path.endswith(".h")


def _changed_lines(delta: FileDelta) -> list[int]:
    out: list[int] = []
    for hunk in delta.hunks:
        if hunk.new_start == 0 and hunk.new_len == 0:
            continue  # file emptied
        new_no = hunk.new_start if hunk.new_len else hunk.new_start + 1
        in_run = False
        for kind, _ in hunk.lines:
            if kind == "-":
                if not in_run:
                    out.append(max(new_no - 1, 1))
                in_run = True
                continue
            in_run = False
            if kind == "+":
                out.append(new_no)
            new_no += 1
    return sorted(set(out))


def patch_lines(deltas: list[FileDelta]) -> PatchLineSet:
    """After-patch line numbers of every change.

    An added line counts at its new position; a run of removed lines counts
    once, at the line just before it (line 1 at the head of the file).
    Deleted files and pure renames contribute nothing.  Header lines are
    attributed to every compilation unit the same patch touches.
    """
    result = PatchLineSet()
    units = [d.new_path for d in deltas if d.kind in (MODIFY, ADD) and _is_unit(d.new_path)]
    for delta in deltas:
        if delta.kind in (DELETE, RENAME_ONLY):
            continue
        path = delta.new_path
        lines = _changed_lines(delta)
        if not lines:
            continue
        if _is_unit(path):
            result.pairs.extend(PatchLine(path, n) for n in lines)
        elif _is_header(path):
            if not units:
                result.unsupported.append((path, HEADER_ONLY))
                continue
            for unit in units:
                result.header_mapped.append((path, unit))
                result.pairs.extend(PatchLine(path, n, unit) for n in lines)
        else:
            result.unsupported.append((path, NON_SOURCE))
    return result


def patch_lines_from_text(text: str) -> PatchLineSet:
    return patch_lines(parse_patch(text))

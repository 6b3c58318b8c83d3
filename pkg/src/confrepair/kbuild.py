"""Kbuild Makefile subset and per-file presence conditions.

Supported lines::

    obj-y += a.o sub/
    obj-m += b.o
    obj-$(CONFIG_X) += c.o other/
    foo-objs := x.o y.o
    foo-y += z.o
    foo-m += v.o
    foo-$(CONFIG_X) += w.o

with ``#`` comments and backslash continuations.  Anything else is an error.
"""

from __future__ import annotations

import logging
import posixpath
import re
from dataclasses import dataclass, field
from typing import Iterable

from .logic import FALSE, TRUE, Formula, Var, conj, disj
from .tree import Tree, TreeError, normalize

log = logging.getLogger(__name__)

MAKEFILE_NAMES = ("Kbuild", "Makefile")

ALWAYS = "always"
MODULE = "module"
OPTION = "var"


class KbuildError(Exception):
    pass


@dataclass(frozen=True)
class BuildRule:
    """One target occurrence.  ``target`` is relative to the Makefile's directory."""

    target: str
    guard: str
    option: str | None = None
    composite_parent: str | None = None
    line: int = field(default=0, compare=False)

    @property
    def is_subdir(self) -> bool:
        return self.target.endswith("/")

    def guard_formula(self) -> Formula:
        if self.guard == ALWAYS:
            return TRUE
        if self.guard == MODULE:
            return Var("MODULES")
        return Var(self.option)


_ASSIGN = re.compile(
    r"^(?P<name>[A-Za-z0-9_.\-]+?)-(?:(?P<y>y)|(?P<m>m)|(?P<objs>objs)|\$\(CONFIG_(?P<opt>[A-Za-z0-9_]+)\))"
    r"\s*(?P<op>\+=|:=|=)\s*(?P<rest>.*)$"
)


def find_makefile(tree: Tree, directory: str) -> str | None:
    for name in MAKEFILE_NAMES:
        path = posixpath.join(directory, name) if directory else name
        if tree.exists(path):
            return path
    return None


def parse_kbuild_text(text: str, filename: str = "Makefile") -> list[BuildRule]:
    rules: list[BuildRule] = []
    logical: list[tuple[int, str]] = []
    buf, start = "", 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not buf:
            start = lineno
        line = raw.rstrip()
        if line.endswith("\\"):
            buf += line[:-1] + " "
            continue
        buf += line
        logical.append((start, buf))
        buf = ""
    if buf:
        logical.append((start, buf))

    for lineno, line in logical:
        code = line.split("#", 1)[0].strip()
        if not code:
            continue
        m = _ASSIGN.match(code)
        if not m:
            raise KbuildError(f"{filename}:{lineno}: unsupported make construct: {code!r}")
        if m.group("y"):
            guard, option = ALWAYS, None
        elif m.group("m"):
            guard, option = MODULE, None
        elif m.group("objs"):
            guard, option = ALWAYS, None
        else:
            guard, option = OPTION, m.group("opt")
        name = m.group("name")
        composite = None if name == "obj" else name + ".o"
        if composite is None and m.group("objs"):
            raise KbuildError(f"{filename}:{lineno}: obj-objs is not a valid list")
        for target in m.group("rest").split():
            if "$" in target:
                raise KbuildError(f"{filename}:{lineno}: variable expansion is not supported: {target!r}")
            if not (target.endswith(".o") or target.endswith("/")):
                raise KbuildError(f"{filename}:{lineno}: unsupported target {target!r}")
            if composite is not None and target.endswith("/"):
                raise KbuildError(f"{filename}:{lineno}: composite {composite} lists a directory")
            try:
                target = normalize(target.rstrip("/")) + ("/" if target.endswith("/") else "")
            except TreeError as exc:
                raise KbuildError(f"{filename}:{lineno}: {exc}") from None
            rules.append(BuildRule(target, guard, option, composite, lineno))
    return rules


def parse_kbuild(tree: Tree, directory: str) -> list[BuildRule]:
    """Rules of the Makefile in ``directory``; no Makefile means no rules."""
    path = find_makefile(tree, directory)
    if path is None:
        return []
    return parse_kbuild_text(tree.read_text(path), path)


def _ancestors(directory: str) -> list[str]:
    """``directory`` and its parents, innermost first, ending with the root ``""``."""
    out = []
    d = directory
    while True:
        out.append(d)
        if not d:
            return out
        d = posixpath.dirname(d)


def _rel(path: str, base: str) -> str:
    return posixpath.relpath(path, base) if base else path


class KbuildModel:
    """Presence conditions of compilation units over raw option names.

    Formulas use ``Var(X)`` for ``obj-$(CONFIG_X)`` and ``Var("MODULES")``
    for ``obj-m``; :func:`confrepair.kconfig.declared_only` maps names the
    Kconfig spec does not declare to false.
    """

    def __init__(self, tree: Tree):
        self.tree = tree
        self._rules: dict[str, list[BuildRule]] = {}
        self._dir_pc: dict[str, Formula] = {}
        self.unreferenced: set[str] = set()

    def rules(self, directory: str) -> list[BuildRule]:
        if directory not in self._rules:
            self._rules[directory] = parse_kbuild(self.tree, directory)
        return self._rules[directory]

    def makefiles_for(self, path: str) -> list[str]:
        """Makefiles that can influence ``path`` (its directory and all ancestors)."""
        out = []
        for d in reversed(_ancestors(posixpath.dirname(path))):
            mk = find_makefile(self.tree, d)
            if mk is not None:
                out.append(mk)
        return out

    def dir_pc(self, directory: str) -> Formula:
        if directory == "":
            return TRUE
        hit = self._dir_pc.get(directory)
        if hit is not None:
            return hit
        terms = []
        for a in _ancestors(posixpath.dirname(directory)):
            want = _rel(directory, a) + "/"
            for r in self.rules(a):
                if r.composite_parent is None and r.target == want:
                    terms.append(conj(self.dir_pc(a), r.guard_formula()))
        pc = disj(*terms)
        self._dir_pc[directory] = pc
        return pc

    def _is_composite(self, obj: str) -> bool:
        directory = posixpath.dirname(obj)
        for a in _ancestors(directory):
            for r in self.rules(a):
                if r.composite_parent is not None and posixpath.normpath(posixpath.join(a, r.composite_parent)) == obj:
                    return True
        return False

    def object_pc(self, obj: str, _active: frozenset = frozenset()) -> Formula:
        if obj in _active:
            raise KbuildError(f"composite cycle through {obj}")
        active = _active | {obj}
        terms = []
        for a in _ancestors(posixpath.dirname(obj)):
            want = _rel(obj, a)
            for r in self.rules(a):
                if r.target != want:
                    continue
                if r.composite_parent is None:
                    terms.append(conj(self.dir_pc(a), r.guard_formula()))
                else:
                    parent = normalize(posixpath.join(a, r.composite_parent))
                    terms.append(conj(r.guard_formula(), self.object_pc(parent, active)))
        return disj(*terms)

    def file_pc(self, path: str) -> Formula:
        """Presence condition of compilation unit ``path``; false when never built."""
        try:
            path = normalize(path)
        except TreeError as exc:
            raise KbuildError(str(exc)) from None
        if not path.endswith(".c"):
            raise KbuildError(f"not a compilation unit: {path}")
        obj = path[:-2] + ".o"
        pc = FALSE if self._is_composite(obj) else self.object_pc(obj)
        if pc == FALSE:
            self.unreferenced.add(path)
            log.info("%s is not referenced by any build rule", path)
        return pc


def file_presence(tree: Tree, path: str, spec=None) -> Formula:
    """Presence condition of ``path``; with ``spec``, undeclared options become false."""
    pc = KbuildModel(tree).file_pc(path)
    if spec is not None:
        from .kconfig import declared_only

        pc = declared_only(pc, spec)
    return pc

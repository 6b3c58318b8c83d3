"""Read-only access to a source tree, on disk or in memory."""

from __future__ import annotations

import hashlib
import os
import posixpath
from pathlib import Path
from typing import Iterator, Mapping

RELEVANT_SUFFIXES = (".c", ".h", ".S")
RELEVANT_NAMES = ("Makefile", "Kbuild")


class TreeError(Exception):
    pass


def normalize(path: str) -> str:
    """Tree-relative POSIX path without ``.``/``..`` components."""
    if not path or path.startswith("/") or "\\" in path:
        raise TreeError(f"path must be tree-relative: {path!r}")
    norm = posixpath.normpath(path)
    if norm == ".." or norm.startswith("../"):
        raise TreeError(f"path escapes the tree: {path!r}")
    return "" if norm == "." else norm


class Tree:
    """A checked-out tree.  Either ``root`` (a directory) or ``files`` is given."""

    def __init__(self, root: str | os.PathLike | None = None, files: Mapping[str, str | bytes] | None = None):
        if (root is None) == (files is None):
            raise TypeError("give exactly one of root or files")
        self.root = Path(root) if root is not None else None
        self._files = None
        if files is not None:
            self._files = {normalize(k): v.encode() if isinstance(v, str) else bytes(v) for k, v in files.items()}
        elif not self.root.is_dir():
            raise TreeError(f"not a directory: {self.root}")

    @classmethod
    def from_files(cls, files: Mapping[str, str | bytes]) -> "Tree":
        return cls(files=files)

    def read_bytes(self, path: str) -> bytes:
        path = normalize(path)
        if self._files is not None:
            try:
                return self._files[path]
            except KeyError:
                raise FileNotFoundError(path) from None
        full = self.root / path
        if not full.is_file():
            raise FileNotFoundError(path)
        return full.read_bytes()

    def read_text(self, path: str) -> str:
        return self.read_bytes(path).decode("utf-8", errors="surrogateescape")

    def exists(self, path: str) -> bool:
        path = normalize(path)
        if self._files is not None:
            return path in self._files
        return (self.root / path).is_file()

    def walk(self) -> Iterator[str]:
        """All file paths, sorted."""
        if self._files is not None:
            yield from sorted(self._files)
            return
        out = []
        for dirpath, dirnames, filenames in os.walk(self.root):
            dirnames[:] = sorted(d for d in dirnames if not d.startswith("."))
            rel = os.path.relpath(dirpath, self.root)
            for name in filenames:
                out.append(name if rel == "." else f"{rel}/{name}".replace(os.sep, "/"))
        yield from sorted(out)

    def digest(self, kconfig_files=()) -> str:
        """Content digest over build-relevant files; stands in for a commit id."""
        h = hashlib.sha256()
        extra = set(kconfig_files)
        for path in self.walk():
            base = posixpath.basename(path)
            if path in extra or base in RELEVANT_NAMES or base.startswith("Kconfig") or path.endswith(RELEVANT_SUFFIXES):
                h.update(path.encode() + b"\0")
                h.update(hashlib.sha256(self.read_bytes(path)).digest())
        return h.hexdigest()

    def line_count(self, path: str) -> int:
        text = self.read_text(path)
        return len(text.splitlines())

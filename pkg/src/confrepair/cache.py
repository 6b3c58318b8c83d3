"""Content-addressed on-disk cache for extracted constraints.

Entries live at ``<dir>/<producer>/<hh>/<digest>``.  Each file starts with
a header line carrying the format version and the payload's sha256, so a
torn or tampered entry is detected and dropped on read.  Writers go through
a temporary file and ``os.replace``.
"""

from __future__ import annotations

import hashlib
import logging
import os
import tempfile
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
PRODUCERS = ("kconfig", "kbuild", "cpp")
ENV_VAR = "CONFREPAIR_CACHE"
_MAGIC = b"confrepair-cache"


@dataclass(frozen=True)
class CacheKey:
    producer: str
    content_digest: str

    def __post_init__(self):
        if self.producer not in PRODUCERS:
            raise ValueError(f"unknown producer {self.producer!r}")

    @classmethod
    def for_inputs(cls, producer: str, inputs: Iterable[tuple[str, bytes]]) -> "CacheKey":
        """Key over exactly the named inputs a producer read."""
        h = hashlib.sha256(f"{_MAGIC.decode()} v{FORMAT_VERSION} {producer}\n".encode())
        for name, data in inputs:
            h.update(len(name).to_bytes(8, "big") + name.encode())
            h.update(len(data).to_bytes(8, "big") + data)
        return cls(producer, h.hexdigest())


class Cache:
    def __init__(self, directory):
        self.directory = Path(directory)
        self.hits: Counter = Counter()
        self.misses: Counter = Counter()

    def _path(self, key: CacheKey) -> Path:
        d = key.content_digest
        return self.directory / key.producer / d[:2] / d

    def get(self, key: CacheKey) -> bytes | None:
        path = self._path(key)
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            self.misses[key.producer] += 1
            return None
        except OSError as exc:
            log.warning("cache unreadable (%s); treating as a miss", exc)
            self.misses[key.producer] += 1
            return None
        header, sep, payload = raw.partition(b"\n")
        expected = b"%s %d %s" % (_MAGIC, FORMAT_VERSION, hashlib.sha256(payload).hexdigest().encode())
        if not sep or header != expected:
            log.warning("dropping corrupt cache entry %s", path)
            try:
                path.unlink()
            except OSError:
                pass
            self.misses[key.producer] += 1
            return None
        self.hits[key.producer] += 1
        return payload

    def put(self, key: CacheKey, payload: bytes) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = b"%s %d %s\n" % (_MAGIC, FORMAT_VERSION, hashlib.sha256(payload).hexdigest().encode())
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(header + payload)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise

    def entries(self, producer: str | None = None) -> list[Path]:
        producers = [producer] if producer else PRODUCERS
        out = []
        for p in producers:
            base = self.directory / p
            if base.is_dir():
                out.extend(sorted(f for f in base.rglob("*") if f.is_file() and not f.name.startswith(".tmp-")))
        return out


def cache_get(cache: Cache, key: CacheKey) -> bytes | None:
    return cache.get(key)


def cache_put(cache: Cache, key: CacheKey, payload: bytes) -> None:
    cache.put(key, payload)


def default_cache_dir() -> str | None:
    return os.environ.get(ENV_VAR) or None

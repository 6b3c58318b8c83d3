"""Linux ``.config`` files: parse, deparse, compare."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

_SET = re.compile(r"^CONFIG_([A-Za-z0-9_]+)=(.*)$")
_UNSET = re.compile(r"^# CONFIG_([A-Za-z0-9_]+) is not set\s*$")


class ConfigFileError(Exception):
    pass


@dataclass
class ConfigFile:
    """Boolean settings plus verbatim non-boolean lines.

    An option missing from ``entries`` is absent, which is not the same as
    ``n`` (``# CONFIG_X is not set``).
    """

    entries: dict[str, str] = field(default_factory=dict)
    passthrough: list[str] = field(default_factory=list)
    provenance: str | None = None

    @classmethod
    def parse(cls, text: str, provenance: str | None = None) -> "ConfigFile":
        cfg = cls(provenance=provenance)
        for lineno, line in enumerate(text.splitlines(), 1):
            stripped = line.strip()
            m = _UNSET.match(stripped)
            if m:
                cfg.entries[m.group(1)] = "n"
                continue
            if not stripped or stripped.startswith("#"):
                continue
            m = _SET.match(stripped)
            if not m:
                raise ConfigFileError(f"{provenance or '<config>'}:{lineno}: cannot parse {line!r}")
            name, value = m.groups()
            if value in ("y", "m", "n"):
                cfg.entries[name] = value
            else:
                cfg.passthrough.append(stripped)
        return cfg

    @classmethod
    def load(cls, path) -> "ConfigFile":
        path = Path(path)
        return cls.parse(path.read_text(), str(path))

    def deparse(self, spec=None) -> str:
        """Config text; with ``spec``, options follow declaration order and
        every declared bool/tristate option is written."""
        lines = []
        if spec is not None:
            names = spec.options
            for name in self.entries:
                if name not in spec:
                    log.warning("dropping undeclared option %s from output", name)
        else:
            names = list(self.entries)
        for name in names:
            value = self.entries.get(name, "n" if spec is not None else None)
            if value is None:
                continue
            if value == "n":
                lines.append(f"# CONFIG_{name} is not set")
            else:
                lines.append(f"CONFIG_{name}={value}")
        lines.extend(self.passthrough)
        return "\n".join(lines) + "\n" if lines else ""


def changed_options(a: ConfigFile, b: ConfigFile, spec) -> list[str]:
    """Declared bool/tristate options whose values differ; absent counts as ``n``."""
    return [name for name in spec.options if a.entries.get(name, "n") != b.entries.get(name, "n")]


def config_diff(a: ConfigFile, b: ConfigFile, spec) -> float:
    """Share of declared bool/tristate options whose settings differ."""
    total = len(spec.options)
    if total == 0:
        return 0.0
    return len(changed_options(a, b, spec)) / total

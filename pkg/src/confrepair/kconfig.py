"""Kconfig subset: parsing, translation to one propositional formula, and
``olddefconfig``-style completion of partial configurations.

Tristate options use two variables: ``X`` (enabled at all) and ``X_MODULE``
(enabled as a module), with ``X_MODULE -> X``.  Value ``y`` is
``X & !X_MODULE``, ``m`` is ``X_MODULE``, ``n`` is ``!X``.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

from .logic import (
    FALSE,
    TRUE,
    Formula,
    Var,
    conj,
    disj,
    evaluate,
    formula_from_json,
    formula_to_json,
    implies,
    neg,
    substitute,
    to_infix,
    variables,
)

log = logging.getLogger(__name__)

BOOLEAN_KINDS = ("bool", "tristate")
VALUE_KINDS = ("string", "int", "hex")
MODULES = "MODULES"
MODULE_SUFFIX = "_MODULE"


class KconfigError(Exception):
    def __init__(self, message: str, file: str | None = None, line: int | None = None):
        where = f"{file}:{line}: " if file is not None and line is not None else ""
        super().__init__(where + message)
        self.file = file
        self.line = line


class NonConvergenceError(Exception):
    def __init__(self, option: str, bound: int):
        super().__init__(f"normalization did not converge within {bound} rounds; {option} keeps changing")
        self.option = option


@dataclass(frozen=True)
class OptionDecl:
    name: str
    kind: str
    prompt: str | None = None
    defaults: tuple[tuple[str, Formula], ...] = ()
    depends_on: Formula = TRUE
    selects: tuple[tuple[str, Formula], ...] = ()
    selected_by: tuple[tuple[str, Formula], ...] = ()
    enclosing_if: Formula = TRUE

    @property
    def is_boolean(self) -> bool:
        return self.kind in BOOLEAN_KINDS

    @property
    def is_tristate(self) -> bool:
        return self.kind == "tristate"

    @property
    def visibility(self) -> Formula:
        """``depends on`` conjoined with enclosing ``if`` blocks."""
        return conj(self.depends_on, self.enclosing_if)


@dataclass(frozen=True)
class KconfigSpec:
    decls: tuple[OptionDecl, ...]
    source_digest: str = field(default="", compare=False)
    source_files: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {d.name: d for d in self.decls})

    def __getitem__(self, name: str) -> OptionDecl:
        return self._by_name[name]

    def __contains__(self, name) -> bool:
        return name in self._by_name

    @property
    def options(self) -> list[str]:
        """Declared bool/tristate option names in declaration order."""
        return [d.name for d in self.decls if d.is_boolean]

    @property
    def has_modules(self) -> bool:
        return MODULES in self._by_name and self._by_name[MODULES].is_boolean

    def variables(self) -> list[str]:
        """Propositional variables: ``X`` per option plus ``X_MODULE`` per tristate."""
        out = []
        for d in self.decls:
            if d.is_boolean:
                out.append(d.name)
                if d.is_tristate:
                    out.append(d.name + MODULE_SUFFIX)
        return out

    def is_tristate(self, name: str) -> bool:
        d = self._by_name.get(name)
        return d is not None and d.is_tristate


# -- parsing ---------------------------------------------------------------

_EXPR_TOKEN = re.compile(r"\s*(&&|\|\||!=|!|\(|\)|=|\"[^\"]*\"|[A-Za-z0-9_]+)")


def parse_expr(text: str) -> Formula:
    """Parse a Kconfig expression: names, ``&&``, ``||``, ``!``, parentheses."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _EXPR_TOKEN.match(text, pos)
        if not m:
            raise KconfigError(f"cannot parse expression {text!r}")
        tokens.append(m.group(1))
        pos = m.end()
    if not tokens:
        raise KconfigError("empty expression")
    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else None

    def take():
        nonlocal i
        tok = peek()
        i += 1
        return tok

    def p_or():
        items = [p_and()]
        while peek() == "||":
            take()
            items.append(p_and())
        return disj(*items)

    def p_and():
        items = [p_not()]
        while peek() == "&&":
            take()
            items.append(p_not())
        return conj(*items)

    def p_not():
        tok = take()
        if tok == "!":
            return neg(p_not())
        if tok == "(":
            inner = p_or()
            if take() != ")":
                raise KconfigError(f"unbalanced parentheses in {text!r}")
            return inner
        if tok is None or not re.fullmatch(r"[A-Za-z0-9_]+", tok):
            raise KconfigError(f"unsupported expression syntax {tok!r} in {text!r}")
        if peek() in ("=", "!="):
            raise KconfigError(f"comparisons are not supported: {text!r}")
        if tok == "y":
            return TRUE
        if tok == "n":
            return FALSE
        if tok == "m":
            raise KconfigError(f"the m constant is not supported in expressions: {text!r}")
        return Var(tok)

    result = p_or()
    if peek() is not None:
        raise KconfigError(f"trailing tokens in expression {text!r}")
    return result


def expr_to_text(f: Formula) -> str:
    return to_infix(f, true="y", false="n")


_PROMPT = r'"((?:[^"\\]|\\.)*)"'


@dataclass
class _Draft:
    name: str
    file: str
    line: int
    kind: str | None = None
    prompt: str | None = None
    defaults: list = field(default_factory=list)
    depends: list = field(default_factory=list)
    selects: list = field(default_factory=list)
    enclosing_if: Formula = TRUE


def _indent(line: str) -> int:
    return len(line.expandtabs(8)) - len(line.expandtabs(8).lstrip())


def parse_kconfig(root: str, loader: Callable[[str], str]) -> KconfigSpec:
    """Parse ``root`` and everything it ``source``s via ``loader(path) -> text``."""
    drafts: list[_Draft] = []
    digest = hashlib.sha256()
    files: list[str] = []

    def parse_file(path: str, stack: tuple[str, ...], if_stack: list[Formula]):
        if path in stack:
            chain = " -> ".join((*stack, path))
            raise KconfigError(f"source cycle: {chain}")
        try:
            text = loader(path)
        except FileNotFoundError:
            where = stack[-1] if stack else None
            raise KconfigError(f"cannot read {path}", where) from None
        files.append(path)
        digest.update(path.encode() + b"\0" + text.encode() + b"\0")
        current: _Draft | None = None
        opened_here = 0
        help_indent: int | None = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            if help_indent is not None:
                if not raw.strip() or _indent(raw) > help_indent:
                    continue
                help_indent = None
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            head, _, rest = stripped.partition(" ")
            rest = rest.strip()
            if head in ("config", "menuconfig"):
                if not re.fullmatch(r"[A-Za-z0-9_]+", rest):
                    raise KconfigError(f"bad option name {rest!r}", path, lineno)
                current = _Draft(rest, path, lineno, enclosing_if=conj(*if_stack))
                drafts.append(current)
            elif head == "if":
                current = None
                if_stack.append(_expr(rest, path, lineno))
                opened_here += 1
            elif head == "endif":
                current = None
                if opened_here == 0:
                    raise KconfigError("endif without if", path, lineno)
                if_stack.pop()
                opened_here -= 1
            elif head == "source":
                current = None
                m = re.fullmatch(_PROMPT, rest)
                if not m:
                    raise KconfigError(f"bad source line {stripped!r}", path, lineno)
                parse_file(m.group(1), (*stack, path), if_stack)
            elif head in ("choice", "endchoice", "menu", "endmenu", "mainmenu", "comment", "imply", "visible"):
                raise KconfigError(f"unsupported construct {head!r}", path, lineno)
            else:
                if current is None:
                    raise KconfigError(f"attribute outside a config block: {stripped!r}", path, lineno)
                if head in ("help", "---help---"):
                    help_indent = _indent(raw)
                    continue
                _attribute(current, head, rest, path, lineno)
        if opened_here:
            raise KconfigError("missing endif", path, None)

    parse_file(root, (), [])
    return _finish(drafts, digest.hexdigest(), tuple(files))


def _expr(text: str, path: str, lineno: int) -> Formula:
    try:
        return parse_expr(text)
    except KconfigError as exc:
        raise KconfigError(str(exc), path, lineno) from None


def _attribute(d: _Draft, head: str, rest: str, path: str, lineno: int):
    if head in BOOLEAN_KINDS or head in VALUE_KINDS:
        if d.kind is not None and d.kind != head:
            raise KconfigError(f"{d.name} declared as both {d.kind} and {head}", path, lineno)
        d.kind = head
        if rest:
            m = re.fullmatch(_PROMPT, rest)
            if not m:
                raise KconfigError(f"bad prompt {rest!r}", path, lineno)
            d.prompt = m.group(1)
    elif head == "prompt":
        m = re.fullmatch(_PROMPT, rest)
        if not m:
            raise KconfigError(f"bad prompt {rest!r}", path, lineno)
        d.prompt = m.group(1)
    elif head == "depends":
        if not rest.startswith("on "):
            raise KconfigError("expected 'depends on'", path, lineno)
        d.depends.append(_expr(rest[3:], path, lineno))
    elif head == "select":
        target, _, cond = rest.partition(" if ")
        target = target.strip()
        if not re.fullmatch(r"[A-Za-z0-9_]+", target):
            raise KconfigError(f"bad select target {target!r}", path, lineno)
        d.selects.append((target, _expr(cond, path, lineno) if cond else TRUE, lineno))
    elif head == "default":
        value, _, cond = rest.partition(" if ")
        value = value.strip()
        d.defaults.append((value, _expr(cond, path, lineno) if cond else TRUE, lineno))
    elif head == "range":
        pass
    elif head in ("imply", "visible", "def_bool", "def_tristate", "option", "modules", "transitional"):
        raise KconfigError(f"unsupported attribute {head!r}", path, lineno)
    else:
        raise KconfigError(f"unknown attribute {head!r}", path, lineno)


def _finish(drafts: list[_Draft], digest: str, files: tuple[str, ...]) -> KconfigSpec:
    by_name: dict[str, _Draft] = {}
    for d in drafts:
        if d.name in by_name:
            raise KconfigError(f"duplicate option {d.name}", d.file, d.line)
        if d.kind is None:
            raise KconfigError(f"option {d.name} has no type", d.file, d.line)
        by_name[d.name] = d
    for d in drafts:
        if d.kind == "tristate" and d.name + MODULE_SUFFIX in by_name:
            raise KconfigError(f"{d.name + MODULE_SUFFIX} collides with the module variable of {d.name}", d.file, d.line)
        for value, cond, lineno in d.defaults:
            if d.kind in BOOLEAN_KINDS and value not in ("y", "m", "n"):
                raise KconfigError(f"unsupported default {value!r} for {d.name}; only y, m, n", d.file, lineno)
            for ref in variables(cond):
                if ref not in by_name:
                    raise KconfigError(f"default condition of {d.name} references undeclared {ref}", d.file, lineno)
        for target, _, lineno in d.selects:
            if target not in by_name:
                raise KconfigError(f"{d.name} selects undeclared option {target}", d.file, lineno)
            if by_name[target].kind not in BOOLEAN_KINDS:
                raise KconfigError(f"{d.name} selects non-boolean option {target}", d.file, lineno)
        for ref in variables(conj(*d.depends, d.enclosing_if)):
            if ref not in by_name:
                log.warning("%s:%d: %s depends on undeclared %s (treated as n)", d.file, d.line, d.name, ref)
    selected_by: dict[str, list] = {d.name: [] for d in drafts}
    for d in drafts:
        for target, cond, _ in d.selects:
            selected_by[target].append((d.name, cond))
    decls = tuple(
        OptionDecl(
            name=d.name,
            kind=d.kind,
            prompt=d.prompt,
            defaults=tuple((v, c) for v, c, _ in d.defaults),
            depends_on=conj(*d.depends),
            selects=tuple((t, c) for t, c, _ in d.selects),
            selected_by=tuple(selected_by[d.name]),
            enclosing_if=d.enclosing_if,
        )
        for d in drafts
    )
    return KconfigSpec(decls, digest, files)


def parse_kconfig_text(text: str) -> KconfigSpec:
    """Parse a single self-contained Kconfig text (no ``source`` lines)."""

    def loader(path):
        if path != "<text>":
            raise FileNotFoundError(path)
        return text

    return parse_kconfig("<text>", loader)


def format_kconfig(spec: KconfigSpec) -> str:
    """Pretty-print ``spec``; parsing the output yields an equal spec."""
    out = []
    for d in spec.decls:
        wrapped = d.enclosing_if != TRUE
        if wrapped:
            out.append(f"if {expr_to_text(d.enclosing_if)}")
        out.append(f"config {d.name}")
        prompt = ""
        if d.prompt is not None:
            escaped = d.prompt.replace("\\", "\\\\").replace('"', '\\"')
            prompt = f' "{escaped}"'
        out.append(f"\t{d.kind}{prompt}")
        if d.depends_on != TRUE:
            out.append(f"\tdepends on {expr_to_text(d.depends_on)}")
        for target, cond in d.selects:
            suffix = f" if {expr_to_text(cond)}" if cond != TRUE else ""
            out.append(f"\tselect {target}{suffix}")
        for value, cond in d.defaults:
            suffix = f" if {expr_to_text(cond)}" if cond != TRUE else ""
            out.append(f"\tdefault {value}{suffix}")
        if wrapped:
            out.append("endif")
        out.append("")
    return "\n".join(out)


# -- translation -----------------------------------------------------------


def declared_only(f: Formula, spec: KconfigSpec, keep=lambda name: False) -> Formula:
    """Map references to undeclared variables to false (Kconfig's ``n``).

    Names for which ``keep(name)`` is true are left alone.
    """
    known = set(spec.variables())
    missing = {v: FALSE for v in variables(f) if v not in known and not keep(v)}
    return substitute(f, missing) if missing else f


def spec_to_formula(spec: KconfigSpec) -> Formula:
    """One formula whose models are exactly the configurations ``spec`` admits."""
    clauses: list[Formula] = []
    for d in spec.decls:
        if not d.is_boolean:
            continue
        x = Var(d.name)
        vis = declared_only(d.visibility, spec)
        clauses.append(implies(x, vis))
        if d.is_tristate:
            xm = Var(d.name + MODULE_SUFFIX)
            clauses.append(implies(xm, x))
            if spec.has_modules:
                clauses.append(implies(xm, Var(MODULES)))
        for target, cond in d.selects:
            clauses.append(implies(conj(x, declared_only(cond, spec)), Var(target)))
        if d.prompt is None:
            reasons = [conj(Var(s), declared_only(c, spec)) for s, c in d.selected_by]
            reasons += [conj(declared_only(c, spec), vis) for v, c in d.defaults if v != "n"]
            clauses.append(implies(x, disj(*reasons)))
    return conj(*clauses)


def value_env(spec: KconfigSpec, values: Mapping[str, str]) -> dict[str, bool]:
    """Boolean variable assignment for option values (missing options are ``n``)."""
    env = {}
    for d in spec.decls:
        if not d.is_boolean:
            continue
        v = values.get(d.name, "n")
        env[d.name] = v in ("y", "m")
        if d.is_tristate:
            env[d.name + MODULE_SUFFIX] = v == "m"
    return env


def values_from_env(spec: KconfigSpec, env: Mapping[str, bool]) -> dict[str, str]:
    out = {}
    for d in spec.decls:
        if not d.is_boolean:
            continue
        if not env.get(d.name, False):
            out[d.name] = "n"
        elif d.is_tristate and env.get(d.name + MODULE_SUFFIX, False):
            out[d.name] = "m"
        else:
            out[d.name] = "y"
    return out


# -- normalization ---------------------------------------------------------


@dataclass
class Assignment:
    values: dict[str, str]
    complete: bool = False


def normalize_config(spec: KconfigSpec, partial: Assignment | Mapping[str, str]) -> Assignment:
    """Complete ``partial`` the way ``make olddefconfig`` would, simplified.

    Explicit values are kept unless a select forces an option on (an ``n``
    becomes ``y``) or unmet dependencies force it off.  Options without an
    explicit value take their first default whose condition holds.  The
    whole computation repeats until nothing changes.
    """
    given = partial.values if isinstance(partial, Assignment) else dict(partial)
    explicit: dict[str, str] = {}
    for name, value in given.items():
        if value not in ("y", "m", "n"):
            continue
        if name not in spec or not spec[name].is_boolean:
            log.warning("dropping unknown option %s=%s", name, value)
            continue
        explicit[name] = value
    decls = [d for d in spec.decls if d.is_boolean]
    current = {d.name: explicit.get(d.name, "n") for d in decls}
    vis = {d.name: declared_only(d.visibility, spec) for d in decls}
    sel = {d.name: [(s, declared_only(c, spec)) for s, c in d.selected_by] for d in decls}
    dflt = {d.name: [(v, declared_only(c, spec)) for v, c in d.defaults] for d in decls}

    def env():
        return value_env(spec, current)

    bound = max(1, len(decls) * len(decls))
    last_changed = None
    for _ in range(bound + 1):
        changed = None
        for d in decls:
            e = env()
            if d.name in explicit:
                value = explicit[d.name]
            else:
                value = next((v for v, c in dflt[d.name] if evaluate(c, e)), "n")
            if value == "m" and not d.is_tristate:
                value = "y"
            selected = any(current[s] != "n" and evaluate(c, e) for s, c in sel[d.name])
            if selected and value == "n":
                value = "y"
            if not selected and not evaluate(vis[d.name], e):
                value = "n"
            if value == "m" and spec.has_modules and current[MODULES] == "n":
                value = "y"
            if current[d.name] != value:
                current[d.name] = value
                changed = d.name
        if changed is None:
            break
        last_changed = changed
    else:
        raise NonConvergenceError(last_changed, bound)
    _warn_violations(spec, current)
    return Assignment(dict(current), complete=True)


def _warn_violations(spec: KconfigSpec, values: Mapping[str, str]):
    e = value_env(spec, values)
    for d in spec.decls:
        if not d.is_boolean or values[d.name] == "n":
            continue
        if not evaluate(declared_only(d.visibility, spec), e):
            log.info("%s is selected although its dependencies are unmet", d.name)
        if d.prompt is None:
            reasons = [conj(Var(s), declared_only(c, spec)) for s, c in d.selected_by]
            reasons += [declared_only(conj(c, d.visibility), spec) for v, c in d.defaults if v != "n"]
            if not evaluate(disj(*reasons), e):
                log.info("%s=%s has no prompt and nothing enables it", d.name, values[d.name])


# -- serialization ---------------------------------------------------------


def spec_to_json(spec: KconfigSpec) -> dict:
    def pairs(items):
        return [[a, formula_to_json(b)] for a, b in items]

    return {
        "source_digest": spec.source_digest,
        "source_files": list(spec.source_files),
        "decls": [
            {
                "name": d.name,
                "kind": d.kind,
                "prompt": d.prompt,
                "defaults": pairs(d.defaults),
                "depends_on": formula_to_json(d.depends_on),
                "selects": pairs(d.selects),
                "selected_by": pairs(d.selected_by),
                "enclosing_if": formula_to_json(d.enclosing_if),
            }
            for d in spec.decls
        ],
    }


def spec_from_json(obj: dict) -> KconfigSpec:
    def pairs(items):
        return tuple((a, formula_from_json(b)) for a, b in items)

    decls = tuple(
        OptionDecl(
            name=d["name"],
            kind=d["kind"],
            prompt=d["prompt"],
            defaults=pairs(d["defaults"]),
            depends_on=formula_from_json(d["depends_on"]),
            selects=pairs(d["selects"]),
            selected_by=pairs(d["selected_by"]),
            enclosing_if=formula_from_json(d["enclosing_if"]),
        )
        for d in obj["decls"]
    )
    return KconfigSpec(decls, obj["source_digest"], tuple(obj["source_files"]))

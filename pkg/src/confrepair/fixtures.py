"""Miniature kernel-like trees with brute-force ground truth.

Two sources of fixtures live here: :func:`figure2_fixture`, a small
reconstruction of an interrupt-controller patch whose changed lines sit in
both arms of one ``#ifdef``, and :func:`generate_random_fixture`, which
builds a random tree, patch and input configuration from a seed.

Every fixture keeps the structured model it was rendered from.  The oracle
functions below answer questions (is this assignment valid, is this line
built) from that model and from a deliberately naive simulation of Kbuild
and the preprocessor.  They share no code with the analysis modules, so
agreement between the two is evidence rather than tautology.
"""

from __future__ import annotations

import argparse
import difflib
import itertools
import json
import random
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .tree import Tree

# -- Kconfig model ---------------------------------------------------------
#
# Expressions are nested tuples: ("var", NAME), ("not", e), ("and", a, b),
# ("or", a, b).  An option counts as true when its value is not "n".


def _ev(expr, values: Mapping[str, str]) -> bool:
    op = expr[0]
    if op == "var":
        return values.get(expr[1], "n") != "n"
    if op == "not":
        return not _ev(expr[1], values)
    if op == "and":
        return _ev(expr[1], values) and _ev(expr[2], values)
    return _ev(expr[1], values) or _ev(expr[2], values)


def _kexpr(expr, nested: bool = False) -> str:
    op = expr[0]
    if op == "var":
        return expr[1]
    if op == "not":
        return "!" + _kexpr(expr[1], True)
    sym = " && " if op == "and" else " || "
    text = _kexpr(expr[1], True) + sym + _kexpr(expr[2], True)
    return f"({text})" if nested else text


@dataclass
class KOption:
    name: str
    kind: str = "bool"
    prompt: str | None = None
    depends: tuple | None = None
    selects: list[tuple[str, tuple | None]] = field(default_factory=list)
    defaults: list[tuple[str, tuple | None]] = field(default_factory=list)


@dataclass
class KIf:
    cond: tuple
    body: list


@dataclass
class KSource:
    path: str


@dataclass
class KconfigModel:
    root: str
    files: dict[str, list]

    def flatten(self) -> list[tuple[KOption, list[tuple]]]:
        out = []

        def walk(entries, guards):
            for e in entries:
                if isinstance(e, KOption):
                    out.append((e, list(guards)))
                elif isinstance(e, KIf):
                    walk(e.body, guards + [e.cond])
                else:
                    walk(self.files[e.path], guards)

        walk(self.files[self.root], [])
        return out

    def render(self) -> dict[str, str]:
        texts = {}
        for path, entries in self.files.items():
            lines: list[str] = []
            _render(entries, lines)
            texts[path] = "\n".join(lines) + "\n"
        return texts

    def options(self) -> list[tuple[str, str]]:
        return [(o.name, o.kind) for o, _ in self.flatten()]

    def is_valid(self, values: Mapping[str, str]) -> bool:
        """Kconfig validity of a complete value assignment, checked rule by rule."""
        flat = self.flatten()
        names = {o.name for o, _ in flat}
        has_modules = "MODULES" in names
        selectors: dict[str, list[tuple[str, tuple | None]]] = {}
        for o, _ in flat:
            for target, cond in o.selects:
                selectors.setdefault(target, []).append((o.name, cond))
        for o, guards in flat:
            v = values.get(o.name, "n")
            if v == "m" and (o.kind != "tristate" or (has_modules and values.get("MODULES", "n") == "n")):
                return False
            if v == "n":
                continue
            visible = all(_ev(g, values) for g in guards) and (o.depends is None or _ev(o.depends, values))
            if not visible:
                return False
            for target, cond in o.selects:
                if (cond is None or _ev(cond, values)) and values.get(target, "n") == "n":
                    return False
            if o.prompt is None:
                reason = any(
                    values.get(s, "n") != "n" and (c is None or _ev(c, values)) for s, c in selectors.get(o.name, [])
                ) or any(dv != "n" and (c is None or _ev(c, values)) for dv, c in o.defaults)
                if not reason:
                    return False
        return True


def _render(entries, lines: list[str]):
    for e in entries:
        if isinstance(e, KSource):
            lines.append(f'source "{e.path}"')
        elif isinstance(e, KIf):
            lines.append(f"if {_kexpr(e.cond)}")
            _render(e.body, lines)
            lines.append("endif")
        else:
            head = "config"
            lines.append(f"{head} {e.name}")
            lines.append(f'\t{e.kind} "{e.prompt}"' if e.prompt else f"\t{e.kind}")
            if e.depends is not None:
                lines.append(f"\tdepends on {_kexpr(e.depends)}")
            for value, cond in e.defaults:
                lines.append(f"\tdefault {value}" + (f" if {_kexpr(cond)}" if cond else ""))
            for target, cond in e.selects:
                lines.append(f"\tselect {target}" + (f" if {_kexpr(cond)}" if cond else ""))


# -- naive build simulation ------------------------------------------------

_RULE = re.compile(r"^([A-Za-z0-9_-]+)-(y|m|objs|\$\(CONFIG_([A-Za-z0-9_]+)\))\s*(?:\+=|:=|=)\s*(.*)$")
_EXPR_CACHE: dict[str, object] = {}


def _makefile_lists(text: str, values: Mapping[str, str]) -> tuple[dict[str, list[str]], set[str]]:
    """Active target lists by name (``obj`` plus composites) and all composite names."""
    joined = re.sub(r"\\\n", " ", text)
    lists: dict[str, list[str]] = {}
    composites: set[str] = set()
    for raw in joined.splitlines():
        line = raw.split("#", 1)[0].strip()
        m = _RULE.match(line)
        if not m:
            continue
        name, suffix, option, targets = m.groups()
        if name != "obj":
            composites.add(name)
        if option is not None:
            suffix = values.get(option, "n")
        elif suffix == "objs":
            suffix = "y"
        elif suffix == "m" and name != "obj" and values.get("MODULES", "n") == "n":
            continue  # a composite's -m parts count only with modules enabled
        if suffix not in ("y", "m"):
            continue
        key = name if name != "obj" else f"obj-{suffix}"
        lists.setdefault(key, []).extend(targets.split())
    return lists, composites


def built_units(files: Mapping[str, str], values: Mapping[str, str]) -> set[str]:
    """Paths of the ``.c`` files a build with ``values`` compiles."""
    modules = values.get("MODULES", "n") != "n"
    out: set[str] = set()
    todo = [""]
    while todo:
        d = todo.pop()
        prefix = f"{d}/" if d else ""
        text = files.get(prefix + "Kbuild", files.get(prefix + "Makefile"))
        if text is None:
            continue
        lists, composites = _makefile_lists(text, values)
        objs = lists.get("obj-y", []) + (lists.get("obj-m", []) if modules else [])
        for t in objs:
            if t.endswith("/"):
                todo.append(prefix + t.rstrip("/"))
            elif t.endswith(".o"):
                base = t[:-2]
                if base in composites:
                    for part in lists.get(base, []):
                        out.add(prefix + part[:-2] + ".c")
                else:
                    out.add(prefix + base + ".c")
    return out


def _cpp_eval(expr: str, defined: set[str], ones: set[str]) -> bool:
    code = _EXPR_CACHE.get(expr)
    if code is None:
        py = re.sub(r"defined\s*\(\s*(\w+)\s*\)|defined\s+(\w+)", lambda m: f"D('{m.group(1) or m.group(2)}')", expr)
        py = re.sub(r"IS_ENABLED\((\w+)\)", r"(V('\1') or V('\1_MODULE'))", py)
        py = re.sub(r"IS_BUILTIN\((\w+)\)", r"V('\1')", py)
        py = re.sub(r"IS_MODULE\((\w+)\)", r"V('\1_MODULE')", py)
        py = re.sub(r"\b(CONFIG_\w+)\b(?!')", r"V('\1')", py)
        py = py.replace("&&", " and ").replace("||", " or ").replace("!", " not ")
        code = compile(py.strip(), "<cpp>", "eval")
        _EXPR_CACHE[expr] = code
    return bool(eval(code, {"D": defined.__contains__, "V": ones.__contains__}))


def preprocess_lines(text: str, values: Mapping[str, str]) -> list[bool]:
    """Per-line inclusion of ``text`` after preprocessing with ``values``.

    ``CONFIG_X`` expands to 1 for ``y`` and ``CONFIG_X_MODULE`` to 1 for
    ``m``.  Existence checks (``defined``, ``#ifdef``) treat a module as
    present too, so ``defined(CONFIG_X)`` means "X is y or m".  A directive
    line counts as included when the code around its chain is.
    """
    ones = set()
    for name, v in values.items():
        if v == "y":
            ones.add(f"CONFIG_{name}")
        elif v == "m":
            ones.add(f"CONFIG_{name}_MODULE")
    defined = ones | {f"CONFIG_{name}" for name, v in values.items() if v == "m"}
    out = []
    # frames: [outer_active, some_arm_taken, this_arm_active]
    stack: list[list[bool]] = []
    active = True
    for line in text.splitlines():
        s = line.strip()
        m = re.match(r"#\s*(\w+)\s*(.*)$", s)
        word = m.group(1) if m else None
        if word in ("if", "ifdef", "ifndef"):
            out.append(active)
            arg = m.group(2)
            if word == "if":
                cond = _cpp_eval(arg, defined, ones)
            else:
                cond = (arg.split()[0] in defined) == (word == "ifdef")
            stack.append([active, cond, active and cond])
            active = active and cond
        elif word in ("elif", "else"):
            frame = stack[-1]
            out.append(frame[0])
            cond = (not frame[1]) and (word == "else" or _cpp_eval(m.group(2), defined, ones))
            frame[1] = frame[1] or cond
            frame[2] = frame[0] and cond
            active = frame[2]
        elif word == "endif":
            frame = stack.pop()
            out.append(frame[0])
            active = frame[0]
        else:
            out.append(active)
    return out


# -- fixture container -----------------------------------------------------


@dataclass
class FixtureTree:
    """A patched tree plus everything needed to check an analysis against it."""

    name: str
    files: dict[str, str]
    old_files: dict[str, str]
    patch: str
    config: str
    model: KconfigModel
    kconfig_root: str = "Kconfig"
    seed: int | None = None
    renames: dict[str, str] = field(default_factory=dict)
    _table: tuple | None = field(default=None, repr=False, compare=False)

    def tree(self) -> Tree:
        return Tree.from_files(self.files)

    def write(self, dest) -> Path:
        dest = Path(dest)
        for path, text in sorted(self.files.items()):
            target = dest / "tree" / path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text)
        (dest / "patch.diff").write_text(self.patch)
        (dest / "input.config").write_text(self.config)
        (dest / "manifest.json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return dest

    # ground truth

    def expected_pairs(self) -> list[tuple[str, int, str | None]]:
        """Changed lines computed straight from line-level matching of old and new files."""
        pairs: list[tuple[str, int, str | None]] = []
        per_file: dict[str, list[int]] = {}
        before = {new: self.old_files[old] for old, new in self.renames.items()}
        for path in sorted(set(self.files) | set(self.old_files)):
            if not path.endswith((".c", ".h")) or path not in self.files:
                continue
            old = self.old_files.get(path, before.get(path, "")).splitlines()
            new = self.files[path].splitlines()
            if old == new or not new:
                continue
            lines = set()
            for tag, i1, i2, j1, j2 in difflib.SequenceMatcher(None, old, new, autojunk=False).get_opcodes():
                if tag in ("delete", "replace"):
                    lines.add(max(j1, 1))
                if tag in ("insert", "replace"):
                    lines.update(range(j1 + 1, j2 + 1))
            per_file[path] = sorted(lines)
        units = [p for p in per_file if p.endswith(".c")]
        for path, lines in per_file.items():
            if path.endswith(".c"):
                pairs.extend((path, n, None) for n in lines)
            else:
                for unit in units:
                    pairs.extend((path, n, unit) for n in lines)
        return pairs

    def assignments(self) -> Iterator[dict[str, str]]:
        """Every value assignment, with ``m`` only where modules are enabled."""
        opts = self.model.options()
        names = [n for n, _ in opts]
        choices = [("n", "y", "m") if kind == "tristate" else ("n", "y") for _, kind in opts]
        has_modules = "MODULES" in names
        for combo in itertools.product(*choices):
            values = dict(zip(names, combo))
            if has_modules and values["MODULES"] == "n" and "m" in combo:
                continue
            yield values

    def included(self, values: Mapping[str, str], pair) -> bool:
        path, line, proxy = pair
        unit = proxy or path
        if unit not in built_units(self.files, values):
            return False
        if proxy is not None:
            return True
        return preprocess_lines(self.files[path], values)[line - 1]

    def inclusion_table(self):
        """``(assignments, valid, table)``; ``table[i, j]`` says whether pair j is built under assignment i."""
        if self._table is None:
            pairs = self.expected_pairs()
            rows, valid, table = [], [], []
            for values in self.assignments():
                rows.append(values)
                valid.append(self.model.is_valid(values))
                built = built_units(self.files, values)
                lines = {}
                row = []
                for path, line, proxy in pairs:
                    unit = proxy or path
                    if unit not in built:
                        row.append(False)
                    elif proxy is not None:
                        row.append(True)
                    else:
                        if path not in lines:
                            lines[path] = preprocess_lines(self.files[path], values)
                        row.append(lines[path][line - 1])
                table.append(row)
            self._table = (rows, np.array(valid, dtype=bool), np.array(table, dtype=bool).reshape(len(rows), len(pairs)))
        return self._table

    def oracle_partition(self) -> tuple[list[list[tuple]], list[tuple]]:
        """Greedy grouping in pair order, deciding joint coverability by enumeration."""
        pairs = self.expected_pairs()
        _, valid, table = self.inclusion_table()
        remaining = list(range(len(pairs)))
        groups = []
        while remaining:
            mask = valid.copy()
            group = []
            for j in remaining:
                trial = mask & table[:, j]
                if trial.any():
                    mask = trial
                    group.append(j)
            if not group:
                break
            groups.append([pairs[j] for j in group])
            remaining = [j for j in remaining if j not in group]
        return groups, [pairs[j] for j in remaining]

    def manifest(self) -> dict:
        groups, uncoverable = self.oracle_partition()
        _, valid, _ = self.inclusion_table()
        return {
            "fixture": self.name,
            "seed": self.seed,
            "kconfig_root": self.kconfig_root,
            "expected_report": {
                "pairs_total": sum(len(g) for g in groups) + len(uncoverable),
                "pairs_covered": sum(len(g) for g in groups),
                "pairs_uncoverable": len(uncoverable),
                "configs": [{"covered_pairs": [_pair_json(p) for p in g]} for g in groups],
                "uncoverable": [_pair_json(p) for p in uncoverable],
            },
            "provenance": (
                f"changed lines from line matching of old and new files; groups from greedy joint coverability "
                f"over {int(valid.sum())} valid of {len(valid)} enumerated assignments, "
                f"each line's inclusion from simulated Kbuild traversal and preprocessing"
            ),
        }


def _pair_json(pair) -> dict:
    path, line, proxy = pair
    out = {"file": path, "line": line}
    if proxy is not None:
        out["proxy"] = proxy
    return out


def git_diff(old: Mapping[str, str], new: Mapping[str, str], renames: Mapping[str, str] | None = None) -> str:
    """A ``git diff``-style patch from ``old`` to ``new``; ``renames`` maps old path to new path."""
    renames = dict(renames or {})
    renamed_to = set(renames.values())
    chunks = []
    for path in sorted(set(old) | set(new)):
        if path in renames:
            chunks.append(f"diff --git a/{path} b/{renames[path]}\nsimilarity index 100%\nrename from {path}\nrename to {renames[path]}\n")
            continue
        if path in renamed_to:
            continue
        a, b = old.get(path), new.get(path)
        if a == b:
            continue
        head = f"diff --git a/{path} b/{path}\n"
        if a is None:
            head += "new file mode 100644\n"
        elif b is None:
            head += "deleted file mode 100644\n"
        body = difflib.unified_diff(
            (a or "").splitlines(True),
            (b or "").splitlines(True),
            "/dev/null" if a is None else f"a/{path}",
            "/dev/null" if b is None else f"b/{path}",
        )
        chunks.append(head + "".join(body))
    return "".join(chunks)


# -- the interrupt controller example --------------------------------------

_GIC_COMMON_HEAD = """\
// Interrupt controller driver, reconstructed for the walkthrough fixture.
#include <linux/init.h>
#include <linux/io.h>
#include <linux/jump_label.h>

union gic_base {
\tvoid __iomem *common_base;
\tvoid __percpu * __iomem *percpu_base;
};

struct gic_chip_data {
\tunion gic_base dist_base;
\tunsigned long percpu_offset;
};

"""

_GIC_COMMON_MID = """\

static void gic_dist_init(struct gic_chip_data *gic)
{
\twritel_relaxed(0, gic->dist_base.common_base);
}

static int gic_init_bases(struct gic_chip_data *gic)
{
\tif (gic->percpu_offset) {
"""

_GIC_COMMON_TAIL = """\
\t}
\tgic_dist_init(gic);
\treturn 0;
}
"""

_GIC_OLD = (
    _GIC_COMMON_HEAD
    + """\
#ifdef CONFIG_GIC_NON_BANKED
static void *gic_get_common_base(union gic_base *base)
{
\treturn base->common_base;
}
#else
#define gic_set_base_accessor(d, f)
#endif
"""
    + _GIC_COMMON_MID
    + "\t\tgic_set_base_accessor(gic, gic_get_percpu_base);\n"
    + _GIC_COMMON_TAIL
)

_GIC_NEW = (
    _GIC_COMMON_HEAD
    + """\
#ifdef CONFIG_GIC_NON_BANKED
static void enable_frankengic(void)
{
\tstatic_branch_enable(&frankengic_key);
}
#else
#define enable_frankengic()\tdo { } while(0)
#endif
"""
    + _GIC_COMMON_MID
    + "\t\tenable_frankengic();\n"
    + _GIC_COMMON_TAIL
)


def figure2_model() -> KconfigModel:
    v = lambda name: ("var", name)  # noqa: E731
    return KconfigModel(
        "Kconfig",
        {
            "Kconfig": [
                KSource("drivers/irqchip/Kconfig"),
                KSource("kernel/power/Kconfig"),
                KSource("arch/arm/Kconfig"),
            ],
            "drivers/irqchip/Kconfig": [
                KOption("ARM_GIC"),
                KOption("ARM_GIC_PM", depends=v("PM"), selects=[("ARM_GIC", None)]),
                KOption("GIC_NON_BANKED"),
            ],
            "kernel/power/Kconfig": [KOption("PM", prompt="Device power management core functionality")],
            "arch/arm/Kconfig": [
                KOption("ARCH_EXYNOS", prompt="Samsung EXYNOS", selects=[("ARM_GIC_PM", v("PM"))]),
                KSource("arch/arm/mach-exynos/Kconfig"),
            ],
            "arch/arm/mach-exynos/Kconfig": [
                KIf(
                    v("ARCH_EXYNOS"),
                    [KOption("ARCH_EXYNOS4", prompt="Samsung Exynos4", defaults=[("y", None)], selects=[("GIC_NON_BANKED", None)])],
                )
            ],
        },
    )


def figure2_fixture() -> FixtureTree:
    """Patch touching both arms of ``#ifdef CONFIG_GIC_NON_BANKED`` in a file gated by ``ARM_GIC``."""
    model = figure2_model()
    build = {
        "Makefile": "obj-y += drivers/\n",
        "drivers/Makefile": "obj-y += irqchip/\n",
        "drivers/irqchip/Makefile": "obj-$(CONFIG_ARM_GIC)\t\t\t+= irq-gic.o\n",
    }
    common = {**model.render(), **build}
    old = {**common, "drivers/irqchip/irq-gic.c": _GIC_OLD}
    new = {**common, "drivers/irqchip/irq-gic.c": _GIC_NEW}
    return FixtureTree(
        name="figure2",
        files=new,
        old_files=old,
        patch=git_diff(old, new),
        config="# CONFIG_PM is not set\n",
        model=model,
    )


# -- random fixtures -------------------------------------------------------

_OPTION_NAMES = ["USB", "NET", "PCI", "ACPI", "SND", "I2C", "SPI", "GPIO", "DMA", "HID", "MMC", "RTC"]
_DIR_NAMES = ["drivers", "lib", "fs", "sound"]
_FILE_NAMES = ["core", "bus", "dev", "main", "util", "irq", "power", "probe"]
_CODE = [
    "int {f}_count;",
    "static int {f}_ready = 1;",
    "\treturn 0;",
    "\t{f}_count++;",
    "void {f}_init(void);",
    "\t/* nothing to do */",
    "#include <linux/{f}.h>",
    "\tpr_info(\"{f}\\n\");",
    "static const char {f}_name[] = \"{f}\";",
    "#define {F}_MAX 16",
    "",
]


@dataclass(frozen=True)
class FixtureSize:
    max_options: int = 7
    max_tristates: int = 2
    max_depth: int = 4
    max_files: int = 3
    max_lines: int = 28

    def variables(self) -> int:
        return self.max_options + 1 + self.max_tristates


def _rand_expr(rng: random.Random, names: Sequence[str], depth: int = 2):
    if depth == 0 or rng.random() < 0.5:
        e = ("var", rng.choice(names))
        return ("not", e) if rng.random() < 0.25 else e
    op = rng.choice(("and", "or"))
    return (op, _rand_expr(rng, names, depth - 1), _rand_expr(rng, names, depth - 1))


def _random_model(rng: random.Random, size: FixtureSize) -> KconfigModel:
    n = rng.randint(3, size.max_options)
    names = rng.sample(_OPTION_NAMES, n)
    n_tri = rng.randint(0, min(size.max_tristates, n))
    tristates = set(rng.sample(names, n_tri))
    opts: list[KOption] = []
    if tristates:
        opts.append(KOption("MODULES", prompt="Enable loadable module support"))
    # references point only to earlier options and selects only to later
    # ones, so the dependency graph is acyclic as Kconfig requires
    for i, name in enumerate(names):
        kind = "tristate" if name in tristates else "bool"
        earlier, later = names[:i], names[i + 1:]
        o = KOption(name, kind)
        if rng.random() < 0.7:
            o.prompt = f"{name.lower()} support"
        if earlier and rng.random() < 0.4:
            o.depends = _rand_expr(rng, earlier, 1)
        if rng.random() < 0.4:
            value = "m" if kind == "tristate" and rng.random() < 0.4 else "y"
            o.defaults.append((value, _rand_expr(rng, earlier, 1) if earlier and rng.random() < 0.5 else None))
        if later and rng.random() < 0.3:
            o.selects.append((rng.choice(later), _rand_expr(rng, earlier, 0) if earlier and rng.random() < 0.3 else None))
        if o.prompt is None and not o.defaults and rng.random() < 0.8:
            # give most promptless options a way to turn on
            selectors = [x for x in opts if x.name in earlier]
            if selectors:
                rng.choice(selectors).selects.append((name, None))
            else:
                o.defaults.append(("y", None))
        opts.append(o)
    root: list = []
    sub: list = []
    for o in opts:
        target = sub if o.name != "MODULES" and rng.random() < 0.3 else root
        earlier = names[: names.index(o.name)] if o.name != "MODULES" else []
        if earlier and rng.random() < 0.2:
            target.append(KIf(("var", rng.choice(earlier)), [o]))
        else:
            target.append(o)
    files = {"Kconfig": root}
    if sub:
        root.append(KSource("arch/Kconfig"))
        files["arch/Kconfig"] = sub
    return KconfigModel("Kconfig", files)


def _guard_text(rng: random.Random, names: Sequence[str], tristates: set[str], allow_zero=True) -> str:
    def mac(name=None):
        return "CONFIG_" + (name or rng.choice(names))

    roll = rng.random()
    if allow_zero and roll < 0.02:
        return "#if 0"
    if roll < 0.35:
        return f"#ifdef {mac()}"
    if roll < 0.5:
        return f"#ifndef {mac()}"
    if roll < 0.7:
        a, b = mac(), mac()
        neg = "!" if rng.random() < 0.4 else ""
        op = rng.choice(("&&", "||"))
        return f"#if defined({a}) {op} {neg}defined({b})"
    if roll < 0.8 and tristates:
        t = rng.choice(sorted(tristates))
        pred = rng.choice(("IS_ENABLED", "IS_BUILTIN", "IS_MODULE"))
        return f"#if {pred}(CONFIG_{t})"
    if roll < 0.9:
        return f"#if IS_ENABLED({mac()})"
    if rng.random() < 0.3:
        return "#ifdef CONFIG_UNDECLARED_FEATURE"
    return f"#if {mac()}"


def _random_source(rng: random.Random, stem: str, names, tristates, size: FixtureSize) -> list[str]:
    lines: list[str] = []
    budget = rng.randint(10, size.max_lines)

    def code():
        return rng.choice(_CODE).format(f=stem, F=stem.upper())

    def emit(depth: int):
        while len(lines) < budget:
            roll = rng.random()
            if depth < size.max_depth and roll < 0.25:
                lines.append(_guard_text(rng, names, tristates))
                emit_block(depth + 1)
                while rng.random() < 0.3:
                    if rng.random() < 0.5:
                        lines.append(f"#elif defined(CONFIG_{rng.choice(names)})")
                        emit_block(depth + 1)
                    else:
                        lines.append("#else")
                        emit_block(depth + 1)
                        break
                lines.append("#endif")
            elif depth > 0 and roll > 0.85:
                return
            else:
                lines.append(code())

    def emit_block(depth: int):
        for _ in range(rng.randint(1, 3)):
            lines.append(code())
        if rng.random() < 0.4:
            emit(depth)

    emit(0)
    return lines


def _mutate(rng: random.Random, new_lines: list[str]) -> list[str]:
    """An older version of ``new_lines``: only code lines differ, so structure stays balanced."""
    old: list[str] = []
    if rng.random() < 0.15:
        old.append("/* obsolete banner */")
    for line in new_lines:
        directive = line.lstrip().startswith("#") and not line.lstrip().startswith(("#include", "#define"))
        roll = rng.random()
        if directive or roll < 0.75:
            old.append(line)
        elif roll < 0.83:
            continue
        elif roll < 0.92:
            old.append(line + " /* old */")
        else:
            old.append(line)
            old.append("\tlegacy_call();")
    if old == new_lines:
        idx = rng.randrange(len(new_lines) + 1)
        old.insert(idx, "\tremoved_line();")
    return old


def _text(lines: list[str]) -> str:
    return "\n".join(lines) + "\n"


def generate_random_fixture(seed: int, size: FixtureSize = FixtureSize()) -> FixtureTree:
    """A random tree, patch and partial input config, fully determined by ``seed``."""
    rng = random.Random(seed)
    model = _random_model(rng, size)
    opts = model.options()
    names = [n for n, _ in opts if n != "MODULES"]
    tristates = {n for n, k in opts if k == "tristate"}
    has_modules = bool(tristates)

    def guard():
        roll = rng.random()
        if roll < 0.35:
            return "y"
        if has_modules and roll < 0.45:
            return "m"
        return f"$(CONFIG_{rng.choice(names)})"

    dirs = rng.sample(_DIR_NAMES, rng.randint(1, 2))
    files: dict[str, str] = {}
    root_mk = [f"obj-{guard()} += {d}/" for d in dirs]
    units: list[str] = []
    n_files = rng.randint(1, size.max_files)
    stems = rng.sample(_FILE_NAMES, n_files + 1)
    mk: dict[str, list[str]] = {d: [] for d in dirs}
    for stem in stems[:n_files]:
        d = rng.choice(dirs)
        path = f"{d}/{stem}.c"
        units.append(path)
        roll = rng.random()
        if roll < 0.05:
            pass  # never built
        elif roll < 0.25:
            parent = f"{stem}-all"
            mk[d].append(f"obj-{guard()} += {parent}.o")
            mk[d].append(f"{parent}-{rng.choice(['y', 'objs', guard()])} += {stem}.o")
        else:
            mk[d].append(f"obj-{guard()} += {stem}.o")
        files[path] = _text(_random_source(rng, stem, names, tristates, size))
    files["Makefile"] = _text(root_mk)
    for d in dirs:
        files[f"{d}/Makefile"] = _text(mk[d]) if mk[d] else "# nothing here\n"
    header = None
    if rng.random() < 0.2:
        header = f"{dirs[0]}/{stems[-1]}.h"
        files[header] = _text(_random_source(rng, stems[-1], names, tristates, size))
    files.update(model.render())

    old = {p: t for p, t in files.items()}
    renames = {}
    for path in [*units, *([header] if header else [])]:
        roll = rng.random()
        if roll < 0.12:
            del old[path]  # added by the patch
        elif roll < 0.9:
            old[path] = _text(_mutate(rng, files[path].splitlines()))
    if rng.random() < 0.1:
        old[f"{dirs[0]}/gone.c"] = "int gone;\n"
    if rng.random() < 0.1:
        old[f"{dirs[0]}/before.c"] = "int moved;\n"
        files[f"{dirs[0]}/after.c"] = "int moved;\n"
        renames[f"{dirs[0]}/before.c"] = f"{dirs[0]}/after.c"

    config_lines = []
    for name, kind in opts:
        if rng.random() < 0.45:
            continue
        value = rng.choice(("y", "m", "n") if kind == "tristate" else ("y", "n"))
        config_lines.append(f"# CONFIG_{name} is not set" if value == "n" else f"CONFIG_{name}={value}")
    if rng.random() < 0.2:
        config_lines.append('CONFIG_LOCALVERSION="-test"')
    return FixtureTree(
        name=f"random-{seed}",
        files=files,
        old_files=old,
        patch=git_diff(old, files, renames),
        config=_text(config_lines) if config_lines else "",
        model=model,
        seed=seed,
        renames=renames,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="python -m confrepair.fixtures", description="Write a fixture tree to disk.")
    which = parser.add_mutually_exclusive_group(required=True)
    which.add_argument("--seed", type=int, help="random fixture seed")
    which.add_argument("--figure2", action="store_true", help="the interrupt controller example")
    parser.add_argument("--out", required=True, help="destination directory")
    args = parser.parse_args(argv)
    fixture = figure2_fixture() if args.figure2 else generate_random_fixture(args.seed)
    dest = fixture.write(args.out)
    print(dest)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Preprocessor conditionals: block trees and per-line presence conditions.

Atoms map to option variables as follows (raw names; the repair bundle maps
undeclared ones to false)::

    defined(CONFIG_X), defined CONFIG_X   X || X_MODULE
    IS_ENABLED(CONFIG_X)                  X
    IS_BUILTIN(CONFIG_X), bare CONFIG_X   X && !X_MODULE
    IS_MODULE(CONFIG_X)                   X_MODULE
    0 / nonzero integer                   false / true

Any other identifier, and any arithmetic or comparison, becomes a free
variable named ``?<namespace>:<text>`` so both branches stay reachable.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .logic import FALSE, TRUE, Formula, Var, conj, disj, formula_from_json, formula_to_json, neg

log = logging.getLogger(__name__)

TOKEN_PREFIX = "?"


class CppError(Exception):
    pass


@dataclass
class Block:
    id: int
    start: int
    end: int
    condition: Formula
    parent: int | None
    children: list[int] = field(default_factory=list)
    group: int | None = None


@dataclass
class LinePC:
    file: str
    line: int
    pc: Formula
    innermost_block: int


@dataclass
class BlockTree:
    blocks: list[Block]
    line_block: list[int]
    groups: list[list[int]]
    tokens: dict[str, str] = field(default_factory=dict)

    @property
    def line_count(self) -> int:
        return len(self.line_block)

    def block_pc(self, block_id: int) -> Formula:
        chain = []
        b: int | None = block_id
        while b is not None:
            chain.append(self.blocks[b].condition)
            b = self.blocks[b].parent
        return conj(*reversed(chain))

    def to_json(self) -> dict:
        return {
            "blocks": [
                [b.id, b.start, b.end, formula_to_json(b.condition), b.parent, b.children, b.group] for b in self.blocks
            ],
            "line_block": self.line_block,
            "groups": self.groups,
            "tokens": self.tokens,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BlockTree":
        blocks = [Block(i, s, e, formula_from_json(c), p, list(ch), g) for i, s, e, c, p, ch, g in obj["blocks"]]
        return cls(blocks, list(obj["line_block"]), [list(g) for g in obj["groups"]], dict(obj["tokens"]))


_DIRECTIVE = re.compile(r"^\s*#\s*([A-Za-z_]+)\b(.*)$")
_TOKEN = re.compile(
    r"\s*(?:(?P<num>0[xX][0-9a-fA-F]+|\d+)[uUlL]*|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>&&|\|\||==|!=|<=|>=|<<|>>|[!()<>+\-*/%&|^~?:,]))"
)
_LOGICAL = {"&&", "||", "!", "(", ")"}
_PREDICATES = ("IS_ENABLED", "IS_BUILTIN", "IS_MODULE", "IS_REACHABLE")


def _strip_comments(text: str) -> list[str]:
    """Remove ``/* */`` and ``//`` comments, preserving line structure."""
    out = []
    in_block = False
    for line in text.splitlines():
        buf = []
        i = 0
        while i < len(line):
            if in_block:
                j = line.find("*/", i)
                if j < 0:
                    i = len(line)
                else:
                    in_block = False
                    i = j + 2
                    buf.append(" ")
            else:
                j = line.find("/*", i)
                k = line.find("//", i)
                if k >= 0 and (j < 0 or k < j):
                    buf.append(line[i:k])
                    i = len(line)
                elif j >= 0:
                    buf.append(line[i:j])
                    in_block = True
                    i = j + 2
                else:
                    buf.append(line[i:])
                    i = len(line)
        out.append("".join(buf))
    return out


def _int(text: str) -> int:
    if text[:2] in ("0x", "0X"):
        return int(text, 16)
    if len(text) > 1 and text[0] == "0":
        return int(text, 8)
    return int(text)


class _ExprParser:
    def __init__(self, text: str, tokens: dict[str, str], namespace: str):
        self.text = text
        self.toks = self._tokenize(text)
        self.pos = 0
        self.memo = tokens
        self.namespace = namespace

    @staticmethod
    def _tokenize(text):
        toks = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise CppError(f"cannot tokenize #if expression {text!r}")
            kind = m.lastgroup
            toks.append((kind, m.group(kind)))
            pos = m.end()
        return toks

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            raise CppError(f"expected {value!r} in {self.text!r}")
        return tok

    def opaque(self, start: int, end: int) -> Formula:
        text = " ".join(v for _, v in self.toks[start:end])
        log.warning("unsupported preprocessor expression %r treated as a free variable", text)
        return self.free(text)

    def free(self, text: str) -> Formula:
        key = re.sub(r"\s+", "", text)
        name = self.memo.get(key)
        if name is None:
            name = self.memo[key] = f"{TOKEN_PREFIX}{self.namespace}:{key}"
        return Var(name)

    def parse(self) -> Formula:
        if not self.toks:
            raise CppError("empty #if expression")
        f = self.p_or()
        if self.pos != len(self.toks):
            raise CppError(f"unexpected {self.peek()[1]!r} in {self.text!r}")
        return f

    def p_or(self):
        items = [self.p_and()]
        while self.peek()[1] == "||":
            self.take()
            items.append(self.p_and())
        return disj(*items)

    def p_and(self):
        items = [self.p_chunk()]
        while self.peek()[1] == "&&":
            self.take()
            items.append(self.p_chunk())
        return conj(*items)

    def p_chunk(self):
        start = self.pos
        f = self.p_unary()
        kind, value = self.peek()
        if value is not None and value not in _LOGICAL:
            # Arithmetic or comparison: swallow up to the next logical operator
            # at this nesting level.
            depth = 0
            while self.pos < len(self.toks):
                v = self.toks[self.pos][1]
                if v == "(":
                    depth += 1
                elif v == ")":
                    if depth == 0:
                        break
                    depth -= 1
                elif v in ("&&", "||") and depth == 0:
                    break
                self.pos += 1
            return self.opaque(start, self.pos)
        return f

    def p_unary(self):
        kind, value = self.peek()
        if value == "!":
            self.take()
            return neg(self.p_unary())
        if value == "(":
            self.take()
            f = self.p_or()
            self.expect(")")
            return f
        if kind == "num":
            self.take()
            return TRUE if _int(value) != 0 else FALSE
        if kind == "id":
            return self.p_ident()
        raise CppError(f"unexpected {value!r} in {self.text!r}")

    def p_ident(self):
        start = self.pos
        _, name = self.take()
        if name == "defined":
            paren = self.peek()[1] == "("
            if paren:
                self.take()
            kind, macro = self.take()
            if kind != "id":
                raise CppError(f"bad defined() in {self.text!r}")
            if paren:
                self.expect(")")
            if macro.startswith("CONFIG_"):
                x = macro[len("CONFIG_"):]
                return disj(Var(x), Var(x + "_MODULE"))
            return self.free(f"defined({macro})")
        if name in _PREDICATES and self.peek()[1] == "(":
            self.take()
            kind, macro = self.take()
            self.expect(")")
            if kind == "id" and macro.startswith("CONFIG_"):
                x = macro[len("CONFIG_"):]
                if name in ("IS_ENABLED", "IS_REACHABLE"):
                    return Var(x)
                if name == "IS_BUILTIN":
                    return conj(Var(x), neg(Var(x + "_MODULE")))
                return Var(x + "_MODULE")
            return self.free(f"{name}({macro})")
        if self.peek()[1] == "(":
            # function-like macro invocation
            depth = 0
            while self.pos < len(self.toks):
                v = self.toks[self.pos][1]
                self.pos += 1
                if v == "(":
                    depth += 1
                elif v == ")":
                    depth -= 1
                    if depth == 0:
                        break
            return self.opaque(start, self.pos)
        if name.startswith("CONFIG_"):
            x = name[len("CONFIG_"):]
            return conj(Var(x), neg(Var(x + "_MODULE")))
        return self.free(name)


def parse_conditionals(text: str, *, namespace: str = "", spec=None) -> BlockTree:
    """Build the block tree of ``text``.

    Block 0 is the whole file.  Each arm of an ``#if``/``#elif``/``#else``
    chain is a block whose condition is its own guard conjoined with the
    negation of all earlier guards in the chain.  Directive lines belong to
    the block enclosing the chain.

    Without ``spec`` the conditions use raw option names; with it, options
    the spec does not declare (and module variables of bool options) become
    false.
    """
    tree = _parse(text, namespace)
    return specialize(tree, spec) if spec is not None else tree


def specialize(tree: BlockTree, spec) -> BlockTree:
    """Copy of ``tree`` with conditions restricted to ``spec``'s variables."""
    from .kconfig import declared_only

    def keep(name):
        return name.startswith(TOKEN_PREFIX)

    blocks = [
        Block(b.id, b.start, b.end, declared_only(b.condition, spec, keep), b.parent, list(b.children), b.group)
        for b in tree.blocks
    ]
    return BlockTree(blocks, list(tree.line_block), [list(g) for g in tree.groups], dict(tree.tokens))


def _parse(text: str, namespace: str) -> BlockTree:
    lines = _strip_comments(text)
    n = len(lines)
    blocks = [Block(0, 1, n, TRUE, None)]
    groups: list[list[int]] = []
    line_block = [0] * n
    tokens: dict[str, str] = {}
    # stack entries: [group_id, guards so far, current arm block id, seen_else]
    stack: list[list] = []

    def current() -> int:
        return stack[-1][2] if stack else 0

    i = 0
    while i < n:
        raw = lines[i]
        lineno = i + 1
        m = _DIRECTIVE.match(raw)
        if not m:
            line_block[i] = current()
            i += 1
            continue
        # join continuation lines
        body = m.group(2)
        span_end = i
        while body.rstrip().endswith("\\") and span_end + 1 < n:
            span_end += 1
            body = body.rstrip()[:-1] + " " + lines[span_end]
        kw = m.group(1)
        outer = stack[-1][2] if stack else 0
        if kw in ("if", "ifdef", "ifndef"):
            enclosing = outer
            if kw == "if":
                guard = _ExprParser(body, tokens, namespace).parse()
            else:
                name = body.strip().split()[0] if body.strip() else ""
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                    raise CppError(f"line {lineno}: bad #{kw} {body.strip()!r}")
                guard = _ExprParser(f"defined({name})", tokens, namespace).parse()
                if kw == "ifndef":
                    guard = neg(guard)
            gid = len(groups)
            groups.append([])
            bid = _new_block(blocks, groups, gid, enclosing, guard, span_end + 2)
            stack.append([gid, [guard], bid, False, enclosing])
            for k in range(i, span_end + 1):
                line_block[k] = enclosing
        elif kw in ("elif", "else"):
            if not stack:
                raise CppError(f"line {lineno}: #{kw} without #if")
            frame = stack[-1]
            gid, guards, arm, seen_else, enclosing = frame
            if seen_else:
                raise CppError(f"line {lineno}: #{kw} after #else")
            blocks[arm].end = i
            if kw == "elif":
                guard = _ExprParser(body, tokens, namespace).parse()
            else:
                guard = TRUE
                frame[3] = True
            cond = conj(guard, *(neg(g) for g in guards))
            guards.append(guard)
            frame[2] = _new_block(blocks, groups, gid, enclosing, cond, span_end + 2)
            for k in range(i, span_end + 1):
                line_block[k] = enclosing
        elif kw == "endif":
            if not stack:
                raise CppError(f"line {lineno}: unbalanced #endif")
            frame = stack.pop()
            blocks[frame[2]].end = i
            for k in range(i, span_end + 1):
                line_block[k] = frame[4]
        else:
            if kw in ("define", "undef") and body.split() and body.split()[0].startswith("CONFIG_"):
                log.warning("line %d: #%s of %s ignored", lineno, kw, body.split()[0])
            for k in range(i, span_end + 1):
                line_block[k] = outer
        i = span_end + 1
    if stack:
        raise CppError("unbalanced #if: missing #endif")
    return BlockTree(blocks, line_block, groups, tokens)


def _new_block(blocks, groups, gid, parent, cond, start) -> int:
    bid = len(blocks)
    blocks.append(Block(bid, start, start - 1, cond, parent, group=gid))
    blocks[parent].children.append(bid)
    groups[gid].append(bid)
    return bid


def _check_line(tree: BlockTree, line: int):
    if not 1 <= line <= tree.line_count:
        raise CppError(f"line {line} out of range 1..{tree.line_count}")


def enclosing_chain(tree: BlockTree, line: int) -> tuple[int, ...]:
    """Block ids from the root to the innermost block containing ``line``."""
    _check_line(tree, line)
    chain = []
    b: int | None = tree.line_block[line - 1]
    while b is not None:
        chain.append(b)
        b = tree.blocks[b].parent
    return tuple(reversed(chain))


def line_condition(tree: BlockTree, line: int, file: str = "") -> LinePC:
    _check_line(tree, line)
    innermost = tree.line_block[line - 1]
    return LinePC(file, line, tree.block_pc(innermost), innermost)

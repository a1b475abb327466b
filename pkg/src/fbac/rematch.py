r"""Anchored regular-expression matching with guaranteed linear-time evaluation.

This is the predicate dialect used by access-control entries: a POSIX-ERE
style subset compiled to a nondeterministic automaton and simulated without
backtracking, so a hostile pattern cannot stall the decision path.

Dialect:
    - literals, ``.`` (any character, including newline)
    - character classes ``[abc]``, ``[a-z]``, ``[^...]`` (``]`` first is literal,
      ``-`` first/last is literal)
    - alternation ``|``, grouping ``(...)``
    - quantifiers ``*`` ``+`` ``?`` and bounds ``{m}`` ``{m,}`` ``{m,n}``
    - escapes: ``\\`` before a metacharacter, ``\n`` ``\t`` ``\r`` ``\xHH``,
      shorthand classes ``\d \w \s \D \W \S`` (ASCII)
    - ``^`` and ``$`` as position assertions (redundant under full-match)

Matching is always full-string: anchoring is implicit, there is no notion of
a partial match.  Substring search is provided by wrapping the pattern in
implicit ``.*`` on both sides.  Backreferences, lookaround and lazy/possessive
quantifiers are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import InvalidPattern

_METACHARS = set(r"\.*+?()[]{}|^$")
_CLASS_SHORTHANDS = {
    "d": frozenset("0123456789"),
    "w": frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_"),
    "s": frozenset(" \t\n\r\f\v"),
}
_MAX_BOUND = 256          # cap on {m,n} bounds
_MAX_STATES = 20_000      # cap on compiled automaton size


# --- syntax tree ---------------------------------------------------------------

@dataclass(frozen=True)
class _Lit:
    ch: str


@dataclass(frozen=True)
class _Any:
    pass


@dataclass(frozen=True)
class _Shorthand:
    chars: frozenset
    negated: bool


@dataclass(frozen=True)
class _Class:
    negated: bool
    chars: frozenset
    ranges: tuple  # of (lo, hi) char pairs


@dataclass(frozen=True)
class _Cat:
    parts: tuple


@dataclass(frozen=True)
class _Alt:
    branches: tuple


@dataclass(frozen=True)
class _Rep:
    node: object
    low: int
    high: int | None  # None = unbounded


@dataclass(frozen=True)
class _Anchor:
    at_start: bool


@dataclass(frozen=True)
class _Empty:
    pass


class _Parser:
    """Recursive-descent parser for the dialect; raises InvalidPattern."""

    def __init__(self, pattern: str):
        self.pattern = pattern
        self.pos = 0

    def fail(self, message: str):
        raise InvalidPattern(f"{message} at index {self.pos} in pattern {self.pattern!r}")

    def peek(self) -> str | None:
        return self.pattern[self.pos] if self.pos < len(self.pattern) else None

    def take(self) -> str:
        ch = self.pattern[self.pos]
        self.pos += 1
        return ch

    def parse(self):
        node = self.alternation()
        if self.pos != len(self.pattern):
            self.fail("unbalanced ')'" if self.peek() == ")" else "trailing input")
        return node

    def alternation(self):
        branches = [self.concatenation()]
        while self.peek() == "|":
            self.take()
            branches.append(self.concatenation())
        return branches[0] if len(branches) == 1 else _Alt(tuple(branches))

    def concatenation(self):
        parts = []
        while self.peek() is not None and self.peek() not in "|)":
            parts.append(self.repeatable())
        if not parts:
            return _Empty()
        return parts[0] if len(parts) == 1 else _Cat(tuple(parts))

    def repeatable(self):
        node = self.atom()
        quantified = False
        while True:
            ch = self.peek()
            if ch in ("*", "+", "?"):
                if quantified:
                    self.fail("stacked quantifiers are not supported")
                if isinstance(node, (_Anchor, _Empty)):
                    self.fail("nothing to repeat")
                self.take()
                node = _Rep(node, 0 if ch != "+" else 1, 1 if ch == "?" else None)
                quantified = True
            elif ch == "{":
                if quantified:
                    self.fail("stacked quantifiers are not supported")
                if isinstance(node, (_Anchor, _Empty)):
                    self.fail("nothing to repeat")
                low, high = self.bounds()
                node = _Rep(node, low, high)
                quantified = True
            else:
                return node

    def bounds(self):
        self.take()  # '{'
        low = self.integer("repetition bound")
        high: int | None
        if self.peek() == ",":
            self.take()
            high = None if self.peek() == "}" else self.integer("repetition bound")
        else:
            high = low
        if self.peek() != "}":
            self.fail("expected '}' closing repetition bound")
        self.take()
        if high is not None and high < low:
            self.fail("repetition bound out of order")
        if low > _MAX_BOUND or (high or 0) > _MAX_BOUND:
            self.fail(f"repetition bound above {_MAX_BOUND}")
        return low, high

    def integer(self, what: str) -> int:
        digits = ""
        while self.peek() is not None and self.peek().isdigit():
            digits += self.take()
        if not digits:
            self.fail(f"expected {what}")
        return int(digits)

    def atom(self):
        ch = self.peek()
        if ch == "(":
            self.take()
            node = self.alternation()
            if self.peek() != ")":
                self.fail("unbalanced '('")
            self.take()
            return node
        if ch == "[":
            return self.char_class()
        if ch == ".":
            self.take()
            return _Any()
        if ch == "^":
            self.take()
            return _Anchor(at_start=True)
        if ch == "$":
            self.take()
            return _Anchor(at_start=False)
        if ch == "\\":
            return self.escape(in_class=False)
        if ch in ("*", "+", "?"):
            self.fail("nothing to repeat")
        if ch == "{":
            self.fail("bare '{' (escape it to match a literal brace)")
        return _Lit(self.take())

    def escape(self, in_class: bool):
        self.take()  # backslash
        ch = self.peek()
        if ch is None:
            self.fail("trailing backslash")
        self.take()
        if ch == "n":
            return _Lit("\n")
        if ch == "t":
            return _Lit("\t")
        if ch == "r":
            return _Lit("\r")
        if ch == "x":
            hexits = self.pattern[self.pos:self.pos + 2]
            if len(hexits) < 2 or any(c not in "0123456789abcdefABCDEF" for c in hexits):
                self.fail("\\x expects two hex digits")
            self.pos += 2
            return _Lit(chr(int(hexits, 16)))
        if ch.lower() in _CLASS_SHORTHANDS:
            return _Shorthand(_CLASS_SHORTHANDS[ch.lower()], negated=ch.isupper())
        if ch.isalnum():
            # rejects backreferences (\1) and unknown letter escapes alike
            self.fail(f"unsupported escape \\{ch}")
        return _Lit(ch)

    def char_class(self):
        self.take()  # '['
        negated = False
        if self.peek() == "^":
            negated = True
            self.take()
        chars: set[str] = set()
        ranges: list[tuple[str, str]] = []
        first = True
        while True:
            ch = self.peek()
            if ch is None:
                self.fail("unterminated character class")
            if ch == "]" and not first:
                self.take()
                break
            first = False
            if ch == "\\":
                item = self.escape(in_class=True)
                if isinstance(item, _Shorthand):
                    if item.negated:
                        self.fail("negated shorthand inside a class is not supported")
                    chars |= item.chars
                    continue
                lo = item.ch
            else:
                lo = self.take()
            if self.peek() == "-" and self.pos + 1 < len(self.pattern) \
                    and self.pattern[self.pos + 1] != "]":
                self.take()
                if self.peek() == "\\":
                    hi_item = self.escape(in_class=True)
                    if isinstance(hi_item, _Shorthand):
                        self.fail("shorthand cannot end a range")
                    hi = hi_item.ch
                else:
                    hi = self.take()
                if ord(hi) < ord(lo):
                    self.fail(f"reversed range {lo}-{hi}")
                ranges.append((lo, hi))
            else:
                chars.add(lo)
        return _Class(negated, frozenset(chars), tuple(ranges))


# --- automaton -----------------------------------------------------------------

_EPS, _BOL, _EOL, _CHAR = 0, 1, 2, 3


class _Nfa:
    def __init__(self):
        self.trans: list[list[tuple]] = []

    def state(self) -> int:
        if len(self.trans) >= _MAX_STATES:
            raise InvalidPattern("pattern expands beyond the automaton size cap")
        self.trans.append([])
        return len(self.trans) - 1

    def edge(self, src: int, kind: int, test, dst: int):
        self.trans[src].append((kind, test, dst))

    def build(self, node) -> tuple[int, int]:
        """Return (entry, exit) states for a fresh fragment matching node."""
        if isinstance(node, _Empty):
            s = self.state()
            return s, s
        if isinstance(node, _Lit):
            s, e = self.state(), self.state()
            ch = node.ch
            self.edge(s, _CHAR, lambda c, ch=ch: c == ch, e)
            return s, e
        if isinstance(node, _Any):
            s, e = self.state(), self.state()
            self.edge(s, _CHAR, lambda c: True, e)
            return s, e
        if isinstance(node, _Shorthand):
            s, e = self.state(), self.state()
            chars, neg = node.chars, node.negated
            self.edge(s, _CHAR, lambda c, chars=chars, neg=neg: (c in chars) != neg, e)
            return s, e
        if isinstance(node, _Class):
            s, e = self.state(), self.state()
            chars, ranges, neg = node.chars, node.ranges, node.negated

            def test(c, chars=chars, ranges=ranges, neg=neg):
                hit = c in chars or any(lo <= c <= hi for lo, hi in ranges)
                return hit != neg

            self.edge(s, _CHAR, test, e)
            return s, e
        if isinstance(node, _Anchor):
            s, e = self.state(), self.state()
            self.edge(s, _BOL if node.at_start else _EOL, None, e)
            return s, e
        if isinstance(node, _Cat):
            entry, exit_ = self.build(node.parts[0])
            for part in node.parts[1:]:
                nxt_entry, nxt_exit = self.build(part)
                self.edge(exit_, _EPS, None, nxt_entry)
                exit_ = nxt_exit
            return entry, exit_
        if isinstance(node, _Alt):
            s, e = self.state(), self.state()
            for branch in node.branches:
                b_entry, b_exit = self.build(branch)
                self.edge(s, _EPS, None, b_entry)
                self.edge(b_exit, _EPS, None, e)
            return s, e
        if isinstance(node, _Rep):
            return self.build_rep(node)
        raise AssertionError(f"unknown node {node!r}")

    def build_rep(self, node: _Rep) -> tuple[int, int]:
        entry = self.state()
        exit_ = entry
        for _ in range(node.low):
            s, e = self.build(node.node)
            self.edge(exit_, _EPS, None, s)
            exit_ = e
        if node.high is None:
            # trailing Kleene star
            loop_in, loop_out = self.build(node.node)
            star = self.state()
            self.edge(exit_, _EPS, None, star)
            self.edge(star, _EPS, None, loop_in)
            self.edge(loop_out, _EPS, None, star)
            return entry, star
        for _ in range(node.high - node.low):
            s, e = self.build(node.node)
            skip = self.state()
            self.edge(exit_, _EPS, None, s)
            self.edge(exit_, _EPS, None, skip)
            self.edge(e, _EPS, None, skip)
            exit_ = skip
        return entry, exit_


class CompiledPattern:
    """A compiled dialect pattern; matching never backtracks."""

    def __init__(self, pattern: str):
        ast = _Parser(pattern).parse()
        self.pattern = pattern
        self._nfa = _Nfa()
        self._start, self._accept = self._nfa.build(ast)
        # substring form: implicit .* on both sides, same automaton arena
        wrapped = _Cat((_Rep(_Any(), 0, None), ast, _Rep(_Any(), 0, None)))
        self._search_start, self._search_accept = self._nfa.build(wrapped)

    def _closure(self, states: set[int], pos: int, length: int) -> set[int]:
        stack = list(states)
        seen = set(states)
        trans = self._nfa.trans
        while stack:
            st = stack.pop()
            for kind, _test, dst in trans[st]:
                if kind == _CHAR or dst in seen:
                    continue
                if kind == _BOL and pos != 0:
                    continue
                if kind == _EOL and pos != length:
                    continue
                seen.add(dst)
                stack.append(dst)
        return seen

    def _run(self, text: str, start: int, accept: int) -> bool:
        length = len(text)
        current = self._closure({start}, 0, length)
        trans = self._nfa.trans
        for pos, ch in enumerate(text):
            following = set()
            for st in current:
                for kind, test, dst in trans[st]:
                    if kind == _CHAR and test(ch):
                        following.add(dst)
            if not following:
                return False
            current = self._closure(following, pos + 1, length)
        return accept in current

    def fullmatch(self, text: str) -> bool:
        """True iff the pattern matches the entire text."""
        return self._run(text, self._start, self._accept)

    def search(self, text: str) -> bool:
        """True iff the pattern matches anywhere inside the text."""
        return self._run(text, self._search_start, self._search_accept)


@lru_cache(maxsize=512)
def compile_pattern(pattern: str) -> CompiledPattern:
    """Compile and cache a dialect pattern.  Raises InvalidPattern."""
    return CompiledPattern(pattern)


def escape_literal(text: str) -> str:
    """Escape text so it matches itself under the dialect."""
    out = []
    for ch in text:
        if ch in _METACHARS:
            out.append("\\" + ch)
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        else:
            out.append(ch)
    return "".join(out)


def int_le_pattern(limit: int) -> str:
    """Pattern matching decimal integers 0..limit (no leading zeros).

    Used to compile numeric option ceilings (e.g. a context-line budget)
    into predicate patterns.
    """
    if limit < 0:
        raise ValueError("limit must be >= 0")
    rendered = str(limit)
    width = len(rendered)
    branches = []
    if width > 1:
        branches.append("[0-9]")
        for k in range(2, width):
            branches.append("[1-9][0-9]{%d}" % (k - 1))
    for i, digit_ch in enumerate(rendered):
        digit = int(digit_ch)
        low = 1 if (i == 0 and width > 1) else 0
        high = digit - 1
        if high < low:
            continue
        prefix = rendered[:i]
        span = str(low) if high == low else f"[{low}-{high}]"
        rest = width - i - 1
        tail = "" if rest == 0 else ("[0-9]" if rest == 1 else "[0-9]{%d}" % rest)
        branches.append(prefix + span + tail)
    branches.append(rendered)
    return "(" + "|".join(branches) + ")"

r"""The access tensor: sparse (subject, function, object-tuple) authorizations.

Entries are one of False, True, or True carrying a predicate over the
invocation (its option list plus standard input).  NotApplicable is never
stored: it is derived, holding exactly when the object tuple length differs
from the function's declared object arity.  Absent entries at arity-correct
coordinates mean False, so the tensor is deny-by-default and storage stays
proportional to granted rights.

Tensors are immutable snapshots: every mutation primitive returns a new
tensor, so unlimited concurrent readers are safe and never observe a
partially applied change.  Bulk construction goes through ``with_entries``
to avoid per-entry copying.
"""

from __future__ import annotations

import hashlib
import re as _stdre
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping

from . import rematch
from .errors import (
    ArityMismatch,
    BadIdentifier,
    DuplicateIdentifier,
    InvalidPattern,
    PredicateError,
    UnknownFunction,
    UnknownObject,
    UnknownSubject,
)

# Subjects and objects are plain token strings; "∘" is additionally allowed in
# function names so pipeline composites remain first-class registry citizens.
_TOKEN = _stdre.compile(r"[A-Za-z0-9._/-]+\Z")
_FUNC_TOKEN = _stdre.compile(r"[A-Za-z0-9._/∘-]+\Z")


def check_token(name: str, what: str = "identifier", *, function: bool = False) -> str:
    pattern = _FUNC_TOKEN if function else _TOKEN
    if not isinstance(name, str) or not pattern.match(name):
        raise BadIdentifier(f"bad {what}: {name!r}")
    return name


@dataclass(frozen=True)
class FunctionSig:
    """A registered function: its name and how many object inputs it takes.

    Arity counts predefined object inputs only; options, patterns and standard
    input are not objects.  Arity 0 is legal (standard-input-only commands).
    """

    name: str
    arity: int

    def __post_init__(self):
        check_token(self.name, "function name", function=True)
        if self.arity < 0:
            raise ValueError(f"arity must be >= 0, got {self.arity}")


@dataclass(frozen=True)
class Invocation:
    """What the caller supplied besides objects: ordered options and stdin."""

    options: tuple = ()
    stdin: bytes = b""

    def __post_init__(self):
        normalized = []
        for pair in self.options:
            key, value = pair
            if not _TOKEN.match(key) or "=" in key or ";" in key:
                raise ValueError(f"bad option key {key!r}")
            if value is not None and not isinstance(value, str):
                raise ValueError(f"option value must be a string or None, got {value!r}")
            normalized.append((key, value))
        object.__setattr__(self, "options", tuple(normalized))
        if not isinstance(self.stdin, bytes):
            raise ValueError("stdin must be bytes")


class PredicateKind(Enum):
    REGEX = "regex"
    PROGRAM = "program"


@dataclass(frozen=True)
class Predicate:
    """Restriction attached to a True entry: a pattern or a named evaluator."""

    kind: PredicateKind
    body: str


def regex_predicate(pattern: str) -> Predicate:
    """Build a regex predicate, validating the pattern eagerly."""
    rematch.compile_pattern(pattern)
    return Predicate(PredicateKind.REGEX, pattern)


def program_predicate(name: str) -> Predicate:
    if name not in _PROGRAMS:
        raise PredicateError(f"unregistered predicate program {name!r}")
    return Predicate(PredicateKind.PROGRAM, name)


class EntryKind(Enum):
    NOT_APPLICABLE = "n/a"
    FALSE = "false"
    TRUE = "true"
    TRUE_WITH = "true_with"


@dataclass(frozen=True)
class TensorEntry:
    kind: EntryKind
    predicate: Predicate | None = None

    def __post_init__(self):
        if (self.predicate is not None) != (self.kind is EntryKind.TRUE_WITH):
            raise ValueError("predicate present iff kind is TRUE_WITH")

    @property
    def grants(self) -> bool:
        return self.kind in (EntryKind.TRUE, EntryKind.TRUE_WITH)

    def render(self) -> str:
        if self.kind is EntryKind.TRUE_WITH:
            return f"TRUE_RE:{self.predicate.body}" \
                if self.predicate.kind is PredicateKind.REGEX \
                else f"TRUE_PROG:{self.predicate.body}"
        return {EntryKind.NOT_APPLICABLE: "N/A",
                EntryKind.FALSE: "FALSE",
                EntryKind.TRUE: "TRUE"}[self.kind]


NOT_APPLICABLE = TensorEntry(EntryKind.NOT_APPLICABLE)
ENTRY_FALSE = TensorEntry(EntryKind.FALSE)
ENTRY_TRUE = TensorEntry(EntryKind.TRUE)


def true_with(predicate: Predicate) -> TensorEntry:
    return TensorEntry(EntryKind.TRUE_WITH, predicate)


class Outcome(Enum):
    ALLOW = "allow"
    DENY = "deny"
    NOT_APPLICABLE = "n/a"


@dataclass(frozen=True)
class Decision:
    """Result of evaluating one coordinate against one invocation.

    reason codes: arity-mismatch, no-entry, entry-false, entry-true,
    predicate-matched, predicate-failed, predicate-error.
    """

    outcome: Outcome
    reason: str
    detail: str | None = None

    @property
    def allowed(self) -> bool:
        return self.outcome is Outcome.ALLOW


# --- invocation serialization ----------------------------------------------------

_TEXT_BYTES = frozenset({0x09, 0x0A, 0x0D} | set(range(0x20, 0x7F)))


def canonical_serialize(inv: Invocation) -> str:
    r"""Deterministic string form of an invocation for predicate matching.

    Options render as ``key=value`` (bare ``key`` when valueless) joined by
    ";", then a literal "\nSTDIN:" and the stdin bytes.  Bytes outside
    printable ASCII plus tab/LF/CR render as ``\xHH``.
    """
    opts = ";".join(k if v is None else f"{k}={v}" for k, v in inv.options)
    rendered = []
    for b in inv.stdin:
        rendered.append(chr(b) if b in _TEXT_BYTES else f"\\x{b:02x}")
    return f"{opts}\nSTDIN:{''.join(rendered)}"


# --- predicate programs -----------------------------------------------------------

_PROGRAMS: dict[str, Callable[[Invocation], bool]] = {}


def register_program(name: str, evaluator: Callable[[Invocation], bool]) -> None:
    """Register a pure boolean evaluator usable as a program predicate.

    Evaluators must not mutate anything and must be deterministic in the
    invocation alone; nothing enforces this beyond the contract.
    """
    check_token(name, "program name")
    if name in _PROGRAMS:
        raise DuplicateIdentifier(f"predicate program {name!r} already registered")
    _PROGRAMS[name] = evaluator


def registered_programs() -> tuple[str, ...]:
    return tuple(sorted(_PROGRAMS))


register_program("always_true", lambda inv: True)
register_program("always_false", lambda inv: False)
register_program("stdin_empty", lambda inv: inv.stdin == b"")
register_program("no_options", lambda inv: inv.options == ())


def match_predicate(predicate: Predicate, inv: Invocation) -> bool:
    """Evaluate a predicate against an invocation.  Pure; raises PredicateError."""
    if predicate.kind is PredicateKind.REGEX:
        try:
            compiled = rematch.compile_pattern(predicate.body)
        except InvalidPattern as exc:
            raise PredicateError(f"invalid predicate pattern: {exc}") from exc
        return compiled.fullmatch(canonical_serialize(inv))
    evaluator = _PROGRAMS.get(predicate.body)
    if evaluator is None:
        raise PredicateError(f"unresolvable predicate program {predicate.body!r}")
    return bool(evaluator(inv))


# --- the tensor -------------------------------------------------------------------

Coordinate = tuple  # (subject, function name, object tuple)


@dataclass(frozen=True)
class AccessTensor:
    """Immutable authorization snapshot.

    ``entries`` maps (subject, function name, object tuple) to a stored
    TensorEntry; only FALSE / TRUE / TRUE_WITH are ever stored, and every
    stored tuple length equals the named function's arity.
    """

    subjects: frozenset = frozenset()
    functions: Mapping[str, FunctionSig] = field(default_factory=dict)
    objects: frozenset = frozenset()
    entries: Mapping[Coordinate, TensorEntry] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> "AccessTensor":
        return cls()

    # -- registration checks --

    def require_subject(self, s: str) -> str:
        if s not in self.subjects:
            raise UnknownSubject(f"subject {s!r} is not registered")
        return s

    def require_function(self, f) -> FunctionSig:
        name = f.name if isinstance(f, FunctionSig) else f
        sig = self.functions.get(name)
        if sig is None or (isinstance(f, FunctionSig) and f != sig):
            raise UnknownFunction(f"function {f!r} is not registered")
        return sig

    def require_tuple(self, o: Iterable[str]) -> tuple:
        objects = tuple(o)
        for ref in objects:
            if ref not in self.objects:
                raise UnknownObject(f"object {ref!r} is not registered")
        return objects

    # -- reads --

    def lookup(self, s: str, f, o: Iterable[str]) -> TensorEntry:
        """Entry at one coordinate: NotApplicable on arity mismatch, else the
        stored entry, else False."""
        self.require_subject(s)
        sig = self.require_function(f)
        objects = self.require_tuple(o)
        if len(objects) != sig.arity:
            return NOT_APPLICABLE
        return self.entries.get((s, sig.name, objects), ENTRY_FALSE)

    def decide(self, s: str, f, o: Iterable[str], inv: Invocation) -> Decision:
        """Evaluate one access request.  Predicate failures deny; a predicate
        that cannot be evaluated denies and surfaces the error in detail."""
        entry = self.lookup(s, f, o)
        if entry.kind is EntryKind.NOT_APPLICABLE:
            sig = self.require_function(f)
            return Decision(Outcome.NOT_APPLICABLE, "arity-mismatch",
                            f"function {sig.name!r} takes {sig.arity} objects, got {len(tuple(o))}")
        if entry.kind is EntryKind.FALSE:
            key = (s, self.require_function(f).name, tuple(o))
            reason = "entry-false" if key in self.entries else "no-entry"
            return Decision(Outcome.DENY, reason)
        if entry.kind is EntryKind.TRUE:
            return Decision(Outcome.ALLOW, "entry-true")
        try:
            matched = match_predicate(entry.predicate, inv)
        except PredicateError as exc:
            return Decision(Outcome.DENY, "predicate-error", str(exc))
        if matched:
            return Decision(Outcome.ALLOW, "predicate-matched")
        return Decision(Outcome.DENY, "predicate-failed")

    # -- mutation primitives (each returns a new snapshot) --

    def create_subject(self, s: str) -> "AccessTensor":
        check_token(s, "subject")
        if s in self.subjects:
            raise DuplicateIdentifier(f"subject {s!r} already registered")
        return self._replace(subjects=self.subjects | {s})

    def destroy_subject(self, s: str) -> "AccessTensor":
        self.require_subject(s)
        entries = {k: v for k, v in self.entries.items() if k[0] != s}
        return self._replace(subjects=self.subjects - {s}, entries=entries)

    def create_object(self, ref: str) -> "AccessTensor":
        check_token(ref, "object")
        if ref in self.objects:
            raise DuplicateIdentifier(f"object {ref!r} already registered")
        return self._replace(objects=self.objects | {ref})

    def destroy_object(self, ref: str) -> "AccessTensor":
        if ref not in self.objects:
            raise UnknownObject(f"object {ref!r} is not registered")
        entries = {k: v for k, v in self.entries.items() if ref not in k[2]}
        return self._replace(objects=self.objects - {ref}, entries=entries)

    def create_function(self, f: FunctionSig) -> "AccessTensor":
        if f.name in self.functions:
            raise DuplicateIdentifier(f"function {f.name!r} already registered")
        functions = dict(self.functions)
        functions[f.name] = f
        return self._replace(functions=functions)

    def destroy_function(self, f) -> "AccessTensor":
        sig = self.require_function(f)
        functions = dict(self.functions)
        del functions[sig.name]
        entries = {k: v for k, v in self.entries.items() if k[1] != sig.name}
        return self._replace(functions=functions, entries=entries)

    def enter_entry(self, s: str, f, o: Iterable[str], entry: TensorEntry) -> "AccessTensor":
        """Store (overwrite) an entry; the tuple length must equal the arity."""
        coordinate = self._entry_coordinate(s, f, o)
        if entry.kind is EntryKind.NOT_APPLICABLE:
            raise ValueError("NotApplicable is derived, never stored")
        entries = dict(self.entries)
        entries[coordinate] = entry
        return self._replace(entries=entries)

    def delete_entry(self, s: str, f, o: Iterable[str]) -> "AccessTensor":
        """Remove the entry at a coordinate; removing an absent entry is a no-op."""
        coordinate = self._entry_coordinate(s, f, o)
        if coordinate not in self.entries:
            return self
        entries = dict(self.entries)
        del entries[coordinate]
        return self._replace(entries=entries)

    def with_entries(self, batch: Iterable[tuple]) -> "AccessTensor":
        """Bulk enter_entry: one copy for the whole batch of (s, f, o, entry)."""
        entries = dict(self.entries)
        for s, f, o, entry in batch:
            coordinate = self._entry_coordinate(s, f, o)
            if entry.kind is EntryKind.NOT_APPLICABLE:
                raise ValueError("NotApplicable is derived, never stored")
            entries[coordinate] = entry
        return self._replace(entries=entries)

    def _entry_coordinate(self, s: str, f, o: Iterable[str]) -> Coordinate:
        self.require_subject(s)
        sig = self.require_function(f)
        objects = self.require_tuple(o)
        if len(objects) != sig.arity:
            raise ArityMismatch(
                f"function {sig.name!r} takes {sig.arity} objects, got {len(objects)}")
        return (s, sig.name, objects)

    def _replace(self, **changes) -> "AccessTensor":
        parts = {
            "subjects": self.subjects,
            "functions": self.functions,
            "objects": self.objects,
            "entries": self.entries,
        }
        parts.update(changes)
        return AccessTensor(**parts)

    # -- identity --

    def __eq__(self, other) -> bool:
        if not isinstance(other, AccessTensor):
            return NotImplemented
        return (self.subjects == other.subjects
                and dict(self.functions) == dict(other.functions)
                and self.objects == other.objects
                and dict(self.entries) == dict(other.entries))

    def fingerprint(self) -> str:
        """Stable digest of the full snapshot contents."""
        digest = hashlib.sha256()
        for s in sorted(self.subjects):
            digest.update(b"S" + s.encode())
        for name in sorted(self.functions):
            digest.update(f"F{name}:{self.functions[name].arity}".encode())
        for ref in sorted(self.objects):
            digest.update(b"O" + ref.encode())
        for key in sorted(self.entries, key=lambda k: (k[0], k[1], k[2])):
            digest.update(repr(key).encode() + self.entries[key].render().encode())
        return digest.hexdigest()

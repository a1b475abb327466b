"""Line-oriented policy text: declarations plus tensor entries.

Grammar (UTF-8, one statement per line, full-line ``#`` comments):

    SUBJECT <id>
    FUNCTION <id> <arity>
    OBJECT <id>
    ENTRY <subject> <function> <obj1[,obj2,...]|-> <FALSE|TRUE|TRUE_RE:<pattern>>

``-`` denotes the empty object tuple.  The predicate pattern runs to the end
of the line, so it may contain spaces (but not newlines).  Entries whose
tuple length differs from the declared arity are rejected.  ``TRUE_PROG:<name>``
is additionally accepted so tensors holding program predicates round-trip.

Re-declaring an identical SUBJECT/OBJECT/FUNCTION is a no-op, which lets
several policy files merge into one snapshot; a FUNCTION re-declared with a
different arity is an error.  A later ENTRY overwrites an earlier one at the
same coordinate.
"""

from __future__ import annotations

from .act_core import (
    ENTRY_FALSE,
    ENTRY_TRUE,
    AccessTensor,
    EntryKind,
    FunctionSig,
    PredicateKind,
    TensorEntry,
    check_token,
    program_predicate,
    regex_predicate,
    true_with,
)
from .errors import BadIdentifier, FbacError, PolicyParseError


def load_policy(text: str, base: AccessTensor | None = None) -> AccessTensor:
    """Parse policy text into a tensor snapshot, merging onto ``base``."""
    tensor = base if base is not None else AccessTensor.empty()
    subjects = set(tensor.subjects)
    functions = dict(tensor.functions)
    objects = set(tensor.objects)
    entries = dict(tensor.entries)

    def fail(message: str, lineno: int):
        raise PolicyParseError(message, lineno)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(None, 1)
        keyword, rest = fields[0], (fields[1] if len(fields) > 1 else "")
        try:
            if keyword == "SUBJECT":
                name = check_token(rest.strip(), "subject")
                subjects.add(name)
            elif keyword == "OBJECT":
                name = check_token(rest.strip(), "object")
                objects.add(name)
            elif keyword == "FUNCTION":
                parts = rest.split()
                if len(parts) != 2 or not parts[1].lstrip("-").isdigit():
                    fail("FUNCTION expects <id> <arity>", lineno)
                sig = FunctionSig(parts[0], int(parts[1]))
                existing = functions.get(sig.name)
                if existing is not None and existing != sig:
                    fail(f"function {sig.name!r} re-declared with arity "
                         f"{sig.arity} (was {existing.arity})", lineno)
                functions[sig.name] = sig
            elif keyword == "ENTRY":
                parts = rest.split(None, 3)
                if len(parts) != 4:
                    fail("ENTRY expects <subject> <function> <objects|-> <value>", lineno)
                subject, fname, tuple_field, value_field = parts
                if subject not in subjects:
                    fail(f"undeclared subject {subject!r}", lineno)
                sig = functions.get(fname)
                if sig is None:
                    fail(f"undeclared function {fname!r}", lineno)
                refs = () if tuple_field == "-" else tuple(tuple_field.split(","))
                for ref in refs:
                    if ref not in objects:
                        fail(f"undeclared object {ref!r}", lineno)
                if len(refs) != sig.arity:
                    fail(f"function {fname!r} takes {sig.arity} objects, "
                         f"entry names {len(refs)}", lineno)
                entries[(subject, fname, refs)] = _parse_value(value_field, lineno)
            else:
                fail(f"unknown keyword {keyword!r}", lineno)
        except PolicyParseError:
            raise
        except (BadIdentifier, FbacError, ValueError) as exc:
            fail(str(exc), lineno)
    return AccessTensor(
        subjects=frozenset(subjects),
        functions=functions,
        objects=frozenset(objects),
        entries=entries,
    )


def _parse_value(field: str, lineno: int) -> TensorEntry:
    if field == "FALSE":
        return ENTRY_FALSE
    if field == "TRUE":
        return ENTRY_TRUE
    if field.startswith("TRUE_RE:"):
        return true_with(regex_predicate(field[len("TRUE_RE:"):]))
    if field.startswith("TRUE_PROG:"):
        return true_with(program_predicate(field[len("TRUE_PROG:"):]))
    raise PolicyParseError(f"bad entry value {field!r}", lineno)


def dump_policy(tensor: AccessTensor) -> str:
    """Deterministic text form; load_policy(dump_policy(t)) == t."""
    lines = []
    for name in sorted(tensor.subjects):
        lines.append(f"SUBJECT {name}")
    for name in sorted(tensor.functions):
        lines.append(f"FUNCTION {name} {tensor.functions[name].arity}")
    for ref in sorted(tensor.objects):
        lines.append(f"OBJECT {ref}")
    for (subject, fname, refs) in sorted(tensor.entries):
        entry = tensor.entries[(subject, fname, refs)]
        tuple_field = ",".join(refs) if refs else "-"
        lines.append(f"ENTRY {subject} {fname} {tuple_field} {_render_value(entry)}")
    return "\n".join(lines) + "\n"


def _render_value(entry: TensorEntry) -> str:
    if entry.kind is EntryKind.TRUE_WITH:
        prefix = "TRUE_RE:" if entry.predicate.kind is PredicateKind.REGEX else "TRUE_PROG:"
        return prefix + entry.predicate.body
    return "TRUE" if entry.kind is EntryKind.TRUE else "FALSE"

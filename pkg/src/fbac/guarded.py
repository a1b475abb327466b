"""The guarded command catalog: every function runs through a decision.

Each command evaluates the tensor per atom before touching content, and its
output is bounded by construction: search emits only matched lines plus a
capped context window, views replace denied atoms with markers, copies
truncate or filter their payload, printing watermarks every page, email
always carries the policy's carbon-copy address.  Holding a search right on
an atom therefore never amounts to a read right on it.

Commands taking several atoms (copy, email) are all-or-nothing: one denied
atom refuses the whole request.  Rendering commands (view, print) degrade
per atom instead, emitting a redaction or blur marker.  Atoms whose cascade
link targets are gone are unavailable and are skipped everywhere, which is
what couples a quote to its citation.

Pipelines: ``compose(catalog, f, g)`` registers ``f∘g`` as a new first-class
function with g's arity (g consumes the objects, f consumes g's output as
standard input).  The composite starts with no authorizations of its own -
rights on f and g do not carry over.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import rematch
from .act_core import AccessTensor, FunctionSig, Invocation
from .adoc import (
    Atom,
    AtomicDocument,
    AtomLink,
    CASCADE_UNAVAILABLE,
    atom_ref,
    insert_atom,
    unavailable_atoms,
)
from .errors import (
    AccessDenied,
    DuplicateComposite,
    DuplicateIdentifier,
    InvalidAddress,
    InvalidRange,
    UnknownFunction,
)

REDACTED_MARKER = "[REDACTED]"
BLURRED_MARKER = "[IMAGE BLURRED]"
PAGE_LINES = 60  # watermark period for printed output


# --- catalog ----------------------------------------------------------------------

@dataclass(frozen=True)
class OptionSpec:
    key: str
    kind: str            # "string" | "int" | "flag" | "csv"
    default: object = None


@dataclass(frozen=True)
class GuardedFunctionSpec:
    sig: FunctionSig
    options: tuple = ()
    output_contract: str = ""
    runner: Callable | None = None   # (objects, stdin, resolve) -> bytes, for pipelines


class Catalog:
    """Registry of guarded function specs, composites included."""

    def __init__(self, specs: Iterable[GuardedFunctionSpec] = ()):
        self._specs: dict[str, GuardedFunctionSpec] = {}
        for spec in specs:
            self.register(spec)

    def register(self, spec: GuardedFunctionSpec) -> None:
        if spec.sig.name in self._specs:
            raise DuplicateIdentifier(f"function {spec.sig.name!r} already in catalog")
        self._specs[spec.sig.name] = spec

    def get(self, name: str) -> GuardedFunctionSpec:
        spec = self._specs.get(name)
        if spec is None:
            raise UnknownFunction(f"function {name!r} is not in the catalog")
        return spec

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._specs))

    def sigs(self) -> dict[str, FunctionSig]:
        return {name: spec.sig for name, spec in self._specs.items()}

    def execute(self, name: str, objects: tuple, stdin: bytes,
                resolve: Callable[[str], bytes]) -> bytes:
        spec = self.get(name)
        if spec.runner is None:
            raise UnknownFunction(f"function {name!r} is not executable in a pipeline")
        return spec.runner(tuple(objects), stdin, resolve)


def compose(catalog: Catalog, f_name: str, g_name: str) -> FunctionSig:
    """Register ``f∘g``: g consumes the objects, f pipes from g's output.

    The composite inherits no authorizations; only entries stored under the
    composite's own name are consulted when it is invoked.
    """
    f_spec = catalog.get(f_name)
    g_spec = catalog.get(g_name)
    name = f"{f_name}∘{g_name}"
    if name in catalog:
        raise DuplicateComposite(f"composite {name!r} already registered")
    runner = None
    if f_spec.runner is not None and g_spec.runner is not None:
        def runner(objects, stdin, resolve,
                   _f=f_spec.runner, _g=g_spec.runner):
            return _f((), _g(objects, stdin, resolve), resolve)
    sig = FunctionSig(name, g_spec.sig.arity)
    catalog.register(GuardedFunctionSpec(
        sig=sig,
        options=g_spec.options,
        output_contract=f"{f_name} applied to the output of {g_name}",
        runner=runner,
    ))
    return sig


def default_catalog() -> Catalog:
    return Catalog([
        GuardedFunctionSpec(
            FunctionSig("read", 1),
            output_contract="atom content via redacted views only"),
        GuardedFunctionSpec(
            FunctionSig("search", 1),
            options=(OptionSpec("pattern", "string"),
                     OptionSpec("context", "int", 0),
                     OptionSpec("quiet", "flag", False),
                     OptionSpec("hide_words", "csv", ())),
            output_contract="matched lines plus at most `context` lines around each"),
        GuardedFunctionSpec(
            FunctionSig("grep_in_standard", 0),
            options=(OptionSpec("pattern", "string"),
                     OptionSpec("context", "int", 0),
                     OptionSpec("quiet", "flag", False),
                     OptionSpec("hide_words", "csv", ())),
            output_contract="matched stdin lines, or a boolean under quiet"),
        GuardedFunctionSpec(
            FunctionSig("print", 1),
            options=(OptionSpec("watermark", "string", None),),
            output_contract="paginated text, watermark on every page"),
        GuardedFunctionSpec(
            FunctionSig("email", 1),
            options=(OptionSpec("to", "csv", ()), OptionSpec("cc", "csv", ())),
            output_contract="outbox record with the policy cc enforced"),
        GuardedFunctionSpec(
            FunctionSig("copy_byte_restricted", 1),
            options=(OptionSpec("max_bytes", "int", None),),
            output_contract="payload truncated to max_bytes on a UTF-8 boundary"),
        GuardedFunctionSpec(
            FunctionSig("copy_character_limited", 1),
            options=(OptionSpec("max_chars", "int", None),),
            output_contract="payload truncated to max_chars code points"),
        GuardedFunctionSpec(
            FunctionSig("copy_sensitive_word_exclusion", 1),
            options=(OptionSpec("exclude", "csv", ()),),
            output_contract="payload with blocklisted words removed"),
        GuardedFunctionSpec(
            FunctionSig("copy_with_citation", 1),
            output_contract="quote atom cascade-linked to a citation atom"),
    ])


# --- canonical invocations ----------------------------------------------------------
#
# Predicates match the canonical serialization, so the option order and
# inclusion rules below are part of the enforcement contract: pattern and
# context always present for searches, flags present only when set, csv
# values sorted.

def search_invocation(pattern: str, context: int = 0, quiet: bool = False,
                      hide_words: Iterable[str] = (), stdin: bytes = b"") -> Invocation:
    options = [("pattern", pattern), ("context", str(context))]
    if quiet:
        options.append(("quiet", None))
    hide = sorted(hide_words)
    if hide:
        options.append(("hide_words", ",".join(hide)))
    return Invocation(options=tuple(options), stdin=stdin)


def copy_invocation(variant: str, max_bytes: int | None = None,
                    max_chars: int | None = None,
                    blocklist: Iterable[str] = ()) -> Invocation:
    options = []
    if variant == "byte_restricted":
        options.append(("max_bytes", str(max_bytes)))
    elif variant == "character_limited":
        options.append(("max_chars", str(max_chars)))
    elif variant == "sensitive_word_exclusion":
        options.append(("exclude", ",".join(sorted(blocklist))))
    return Invocation(options=tuple(options))


def print_invocation(watermark: str | None = None) -> Invocation:
    options = (("watermark", watermark),) if watermark else ()
    return Invocation(options=options)


def email_invocation(to: Iterable[str], cc: Iterable[str]) -> Invocation:
    return Invocation(options=(("to", ",".join(to)), ("cc", ",".join(cc))))


# --- word redaction -----------------------------------------------------------------

_WORD_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


def _word_tokens(line: str) -> list[tuple[bool, str]]:
    tokens, current, in_word = [], [], None
    for ch in line:
        is_word = ch in _WORD_CHARS
        if in_word is None or is_word == in_word:
            current.append(ch)
        else:
            tokens.append((in_word, "".join(current)))
            current = [ch]
        in_word = is_word
    if current:
        tokens.append((in_word, "".join(current)))
    return tokens


def redact_words(line: str, words: Iterable[str]) -> str:
    """Replace whole-word, case-insensitive occurrences with the marker."""
    lowered = {w.lower() for w in words}
    if not lowered:
        return line
    return "".join(
        REDACTED_MARKER if is_word and token.lower() in lowered else token
        for is_word, token in _word_tokens(line))


def remove_words(text: str, words: Iterable[str]) -> tuple[str, dict[str, int]]:
    """Drop whole-word, case-insensitive occurrences; count what was dropped."""
    lowered = {w.lower() for w in words}
    counts: dict[str, int] = {}
    kept = []
    for is_word, token in _word_tokens(text):
        if is_word and token.lower() in lowered:
            counts[token.lower()] = counts.get(token.lower(), 0) + 1
        else:
            kept.append(token)
    return "".join(kept), counts


# --- search ------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchHit:
    atom_id: str | None
    line_number: int          # 1-based within the atom (or stdin)
    line: str
    before: tuple = ()
    after: tuple = ()


@dataclass(frozen=True)
class SearchResult:
    hits: tuple = ()
    boolean_only: bool = False
    found: bool = False


def _scan_lines(lines: list[str], compiled, context: int, quiet: bool,
                hide: Iterable[str], atom_id: str | None) -> tuple[list[SearchHit], bool]:
    hits, found = [], False
    for i, line in enumerate(lines):
        if not compiled.search(line):
            continue
        found = True
        if quiet:
            continue
        lo = max(0, i - context)
        hi = min(len(lines), i + context + 1)
        hits.append(SearchHit(
            atom_id=atom_id,
            line_number=i + 1,
            line=redact_words(line, hide),
            before=tuple(redact_words(x, hide) for x in lines[lo:i]),
            after=tuple(redact_words(x, hide) for x in lines[i + 1:hi]),
        ))
    return hits, found


def search(tensor: AccessTensor, subject: str, document: AtomicDocument,
           pattern: str, context: int = 0, quiet: bool = False,
           hide_words: Iterable[str] = (), function: str = "search") -> SearchResult:
    """Search the atoms of a document the subject is allowed to search.

    Context windows never cross an atom boundary.  A denied atom contributes
    nothing - not even the fact that it matched.
    """
    compiled = rematch.compile_pattern(pattern)
    inv = search_invocation(pattern, context, quiet, hide_words)
    hidden = unavailable_atoms(document)
    all_hits: list[SearchHit] = []
    found = False
    for atom in document.atoms:
        if atom.id in hidden or atom.kind != "text":
            continue
        decision = tensor.decide(subject, function, (atom_ref(document, atom),), inv)
        if not decision.allowed:
            continue
        hits, matched = _scan_lines(atom.content.splitlines(), compiled,
                                    context, quiet, hide_words, atom.id)
        all_hits.extend(hits)
        found = found or matched
    return SearchResult(hits=tuple(all_hits), boolean_only=quiet, found=found)


def search_standard(tensor: AccessTensor, subject: str, stdin: bytes,
                    pattern: str, context: int = 0, quiet: bool = False,
                    hide_words: Iterable[str] = (),
                    function: str = "grep_in_standard") -> SearchResult:
    """Zero-object search over standard input.

    The decision is taken on the empty tuple with stdin embedded in the
    invocation, so a predicate can constrain the stdin content itself.
    """
    compiled = rematch.compile_pattern(pattern)
    inv = search_invocation(pattern, context, quiet, hide_words, stdin=stdin)
    decision = tensor.decide(subject, function, (), inv)
    if not decision.allowed:
        return SearchResult(boolean_only=quiet, found=False)
    lines = stdin.decode("utf-8", errors="replace").splitlines()
    hits, found = _scan_lines(lines, compiled, context, quiet, hide_words, None)
    return SearchResult(hits=tuple(hits), boolean_only=quiet, found=found)


# --- views -------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    atom_id: str
    kind: str            # "content" | "redacted" | "blurred-image"
    atom_kind: str       # "text" | "image-ref"
    text: str = ""


@dataclass(frozen=True)
class RenderedView:
    document_id: str
    segments: tuple = ()


def redacted_view(tensor: AccessTensor, subject: str,
                  document: AtomicDocument) -> RenderedView:
    """Per-atom read decisions; denials become markers, unavailable atoms vanish."""
    hidden = unavailable_atoms(document)
    segments = []
    for atom in document.atoms:
        if atom.id in hidden:
            continue
        decision = tensor.decide(subject, "read", (atom_ref(document, atom),),
                                 Invocation())
        if decision.allowed:
            segments.append(Segment(atom.id, "content", atom.kind, atom.content))
        elif atom.kind == "image-ref":
            segments.append(Segment(atom.id, "blurred-image", atom.kind))
        else:
            segments.append(Segment(atom.id, "redacted", atom.kind))
    return RenderedView(document.id, tuple(segments))


def view_text(view: RenderedView) -> str:
    """Plain-text rendering of a view; markers stand in for denied atoms."""
    blocks = []
    for segment in view.segments:
        if segment.kind == "content":
            blocks.append(segment.text)
        elif segment.kind == "blurred-image":
            blocks.append(BLURRED_MARKER)
        else:
            blocks.append(REDACTED_MARKER)
    return "\n\n".join(blocks)


# --- copy --------------------------------------------------------------------------

COPY_VARIANTS = ("byte_restricted", "character_limited",
                 "sensitive_word_exclusion", "with_citation")


@dataclass(frozen=True)
class CopyResult:
    payload: str
    citation: tuple | None = None          # (source document id, atom ids)
    applied_limits: Mapping = field(default_factory=dict)
    inserted_atom_ids: tuple = ()


def _select_atoms(document: AtomicDocument, atom_ids: Iterable[str]) -> list[Atom]:
    wanted = list(atom_ids)
    if not wanted:
        raise InvalidRange("no atoms named")
    if len(set(wanted)) != len(wanted):
        raise InvalidRange("duplicate atom ids in range")
    hidden = unavailable_atoms(document)
    by_id = {a.id: a for a in document.atoms}
    for aid in wanted:
        if aid not in by_id or aid in hidden:
            raise InvalidRange(f"no atom {aid!r} available in {document.id!r}")
    return [a for a in document.atoms if a.id in set(wanted)]


def _fresh_atom_id(document: AtomicDocument, prefix: str) -> str:
    n = 1
    while document.has_atom(f"{prefix}{n}"):
        n += 1
    return f"{prefix}{n}"


def _truncate_utf8(text: str, max_bytes: int) -> tuple[str, bool]:
    raw = text.encode("utf-8")
    if len(raw) <= max_bytes:
        return text, False
    # the input is valid UTF-8, so the only decode error is a split final
    # sequence, which "ignore" drops cleanly
    return raw[:max_bytes].decode("utf-8", errors="ignore"), True


def copy(tensor: AccessTensor, subject: str, source: AtomicDocument,
         atom_ids: Iterable[str], dest: AtomicDocument, variant: str,
         max_bytes: int | None = None, max_chars: int | None = None,
         blocklist: Iterable[str] = ()) -> tuple[CopyResult, AtomicDocument]:
    """Copy atoms into the destination document under one output-limiting variant.

    All-or-nothing: one denied source atom refuses the whole range.  The
    payload is the raw atom content (copying does not require read rights);
    what limits it is the variant itself.
    """
    if variant not in COPY_VARIANTS:
        raise ValueError(f"unknown copy variant {variant!r}")
    if variant == "byte_restricted" and (max_bytes is None or max_bytes < 0):
        raise ValueError("byte_restricted needs max_bytes >= 0")
    if variant == "character_limited" and (max_chars is None or max_chars < 0):
        raise ValueError("character_limited needs max_chars >= 0")
    atoms = _select_atoms(source, atom_ids)
    function = f"copy_{variant}"
    inv = copy_invocation(variant, max_bytes, max_chars, blocklist)
    for atom in atoms:
        if not tensor.decide(subject, function, (atom_ref(source, atom),), inv).allowed:
            raise AccessDenied(f"{function} denied")
    payload = "\n\n".join(a.content for a in atoms)
    limits: dict = {"variant": variant}
    if variant == "byte_restricted":
        payload, truncated = _truncate_utf8(payload, max_bytes)
        limits.update(max_bytes=max_bytes, truncated=truncated)
    elif variant == "character_limited":
        truncated = len(payload) > max_chars
        payload = payload[:max_chars]
        limits.update(max_chars=max_chars, truncated=truncated)
    elif variant == "sensitive_word_exclusion":
        payload, counts = remove_words(payload, blocklist)
        limits.update(excluded=counts)

    citation = None
    if variant == "with_citation":
        citation = (source.id, tuple(a.id for a in atoms))
        citation_id = _fresh_atom_id(dest, "cite")
        dest = insert_atom(dest, Atom(
            id=citation_id,
            content=f"Source: {source.id} atoms {','.join(citation[1])}"))
        quote_id = _fresh_atom_id(dest, "quote")
        dest = insert_atom(dest, Atom(
            id=quote_id,
            content=payload,
            links=(AtomLink(citation_id, "citation-of", CASCADE_UNAVAILABLE),)))
        inserted = (citation_id, quote_id)
    else:
        copy_id = _fresh_atom_id(dest, "copy")
        dest = insert_atom(dest, Atom(id=copy_id, content=payload))
        inserted = (copy_id,)
    return CopyResult(payload=payload, citation=citation,
                      applied_limits=limits, inserted_atom_ids=inserted), dest


# --- print -------------------------------------------------------------------------

@dataclass(frozen=True)
class PrintArtifact:
    text: str
    pages: int
    watermark: str


def watermark_print(tensor: AccessTensor, subject: str, document: AtomicDocument,
                    watermark: str) -> PrintArtifact:
    """Render the document for printing with the watermark on every page.

    Content appears only where both print and read are allowed; anything
    else prints as a marker.  A document whose forbidden set contains print
    refuses for every subject.
    """
    if "print" in document.forbidden_functions:
        raise AccessDenied("this document is not printable")
    hidden = unavailable_atoms(document)
    inv = print_invocation(watermark)
    blocks = []
    for atom in document.atoms:
        if atom.id in hidden:
            continue
        ref = (atom_ref(document, atom),)
        printable = tensor.decide(subject, "print", ref, inv).allowed
        readable = tensor.decide(subject, "read", ref, Invocation()).allowed
        if printable and readable:
            blocks.append(atom.content)
        elif atom.kind == "image-ref":
            blocks.append(BLURRED_MARKER)
        else:
            blocks.append(REDACTED_MARKER)
    body_lines = "\n\n".join(blocks).splitlines()
    pages = max(1, -(-len(body_lines) // PAGE_LINES))
    out_lines = []
    for page in range(pages):
        out_lines.append(watermark)
        out_lines.extend(body_lines[page * PAGE_LINES:(page + 1) * PAGE_LINES])
    return PrintArtifact(text="\n".join(out_lines) + "\n", pages=pages,
                         watermark=watermark)


# --- email -------------------------------------------------------------------------

@dataclass(frozen=True)
class OutboxRecord:
    sender: str
    to: tuple
    cc: tuple
    body: str
    timestamp: float

    def to_json(self) -> dict:
        return {"from": self.sender, "to": list(self.to), "cc": list(self.cc),
                "body": self.body, "timestamp": self.timestamp}


def _check_address(address: str) -> str:
    if (not address or address.count("@") != 1
            or any(c in address for c in " ,;\t\n") or address.startswith("@")
            or address.endswith("@")):
        raise InvalidAddress(f"bad address {address!r}")
    return address


def force_cc_email(tensor: AccessTensor, subject: str, document: AtomicDocument,
                   atom_ids: Iterable[str], to: Iterable[str], policy_cc: str,
                   cc: Iterable[str] = (),
                   outbox_path: Path | str | None = None) -> OutboxRecord:
    """Email selected atoms; the policy's cc address is always on the record.

    All named atoms must carry an email grant.  The body is the read-redacted
    rendering of those atoms, so email rights never widen read rights.
    """
    to = tuple(_check_address(a) for a in to)
    cc = tuple(_check_address(a) for a in cc)
    _check_address(policy_cc)
    atoms = _select_atoms(document, atom_ids)
    inv = email_invocation(to, cc)
    for atom in atoms:
        if not tensor.decide(subject, "email", (atom_ref(document, atom),), inv).allowed:
            raise AccessDenied("email denied")
    blocks = []
    for atom in atoms:
        ref = (atom_ref(document, atom),)
        if tensor.decide(subject, "read", ref, Invocation()).allowed:
            blocks.append(atom.content)
        elif atom.kind == "image-ref":
            blocks.append(BLURRED_MARKER)
        else:
            blocks.append(REDACTED_MARKER)
    cc_list = list(cc)
    if policy_cc not in cc_list:
        cc_list.append(policy_cc)
    record = OutboxRecord(sender=subject, to=to, cc=tuple(cc_list),
                          body="\n\n".join(blocks), timestamp=time.time())
    if outbox_path is not None:
        with open(outbox_path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record.to_json()) + "\n")
    return record

"""The reference monitor: identity, policy loading, dispatch, audit.

Every invocation goes through ``MonitorService.invoke``: the tensor decides,
the matching guarded function runs on Allow, and exactly one audit record is
appended either way.  Denials come back as a uniform structured refusal that
does not distinguish nonexistent from forbidden targets, so error shape
cannot be used as an oracle.

Identity is a static token file; roles pick default grant templates when a
document is authored and never influence a decision.  Policy lives in plain
policy files plus the atom-scoped lines embedded in documents, merged into
one immutable tensor snapshot at load time; reloading swaps the snapshot
atomically.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

from . import guarded
from .act_core import (
    ENTRY_TRUE,
    AccessTensor,
    Invocation,
    canonical_serialize,
    regex_predicate,
    true_with,
)
from .adoc import AtomicDocument, atom_ref, parse, validate_document
from .errors import (
    AccessDenied,
    InconsistentDefaults,
    InvalidRange,
    NotASubset,
    PolicyParseError,
    Unauthenticated,
    UnknownAtom,
    UnknownFunction,
    UnknownObject,
)
from .guarded import Catalog, default_catalog
from .policyfile import load_policy
from .rematch import int_le_pattern

ROLES = ("Author", "CoAuthor", "Viewer", "Admin")


@dataclass(frozen=True)
class Principal:
    subject: str
    role: str
    token: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"bad role {self.role!r}")


def load_identities(text: str) -> dict[str, Principal]:
    """Parse the identity file: ``PRINCIPAL <token> <subject> <role>`` lines.

    Tokens map injectively to subjects: a duplicate token or a second token
    for the same subject is rejected.
    """
    principals: dict[str, Principal] = {}
    subjects_seen: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4 or parts[0] != "PRINCIPAL":
            raise PolicyParseError("expected PRINCIPAL <token> <subject> <role>", lineno)
        _, token, subject, role = parts
        if token in principals:
            raise PolicyParseError(f"duplicate token {token!r}", lineno)
        if subject in subjects_seen:
            raise PolicyParseError(
                f"subject {subject!r} already has a token", lineno)
        try:
            principals[token] = Principal(subject, role, token)
        except ValueError as exc:
            raise PolicyParseError(str(exc), lineno) from exc
        subjects_seen[subject] = token
    return principals


# --- audit ------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditRecord:
    sequence: int
    timestamp: float
    subject: str
    function: str
    objects: tuple
    options_digest: str
    outcome: str          # "allow" | "deny" | "n/a"
    output_size: int

    def to_json(self) -> dict:
        return {
            "sequence": self.sequence,
            "timestamp": self.timestamp,
            "subject": self.subject,
            "function": self.function,
            "objects": list(self.objects),
            "options_digest": self.options_digest,
            "outcome": self.outcome,
            "output_size": self.output_size,
        }


class AuditLog:
    """Append-only, gap-free record store with filterable queries."""

    def __init__(self, sink_path: Path | str | None = None):
        self._records: list[AuditRecord] = []
        self._lock = threading.Lock()
        self._sink_path = Path(sink_path) if sink_path else None

    def append(self, subject: str, function: str, objects: tuple,
               inv: Invocation, outcome: str, output_size: int) -> AuditRecord:
        digest = hashlib.sha256(canonical_serialize(inv).encode()).hexdigest()
        with self._lock:
            record = AuditRecord(
                sequence=len(self._records) + 1,
                timestamp=time.time(),
                subject=subject,
                function=function,
                objects=tuple(objects),
                options_digest=digest,
                outcome=outcome,
                output_size=output_size,
            )
            self._records.append(record)
            if self._sink_path is not None:
                with open(self._sink_path, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record.to_json()) + "\n")
        return record

    def query(self, subject: str | None = None, function: str | None = None,
              obj: str | None = None, outcome: str | None = None,
              since: float | None = None,
              until: float | None = None) -> list[AuditRecord]:
        with self._lock:
            records = list(self._records)
        out = []
        for r in records:
            if subject is not None and r.subject != subject:
                continue
            if function is not None and r.function != function:
                continue
            if obj is not None and obj not in r.objects:
                continue
            if outcome is not None and r.outcome != outcome:
                continue
            if since is not None and r.timestamp < since:
                continue
            if until is not None and r.timestamp > until:
                continue
            out.append(r)
        return out

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


# --- authoring defaults --------------------------------------------------------------

@dataclass(frozen=True)
class QuestionnaireAnswers:
    printable: bool = True
    copyable: bool = True
    emailable: bool = True
    default_search_context: int = 2
    watermark: str | None = None

    def __post_init__(self):
        if self.default_search_context < 0:
            raise ValueError("default_search_context must be >= 0")


COPY_FUNCTIONS = ("copy_byte_restricted", "copy_character_limited",
                  "copy_sensitive_word_exclusion", "copy_with_citation")


@dataclass(frozen=True)
class DefaultsBatch:
    document: AtomicDocument           # with forbidden set and atom policies applied
    entries: tuple                     # (subject, function, objects, entry) coordinates


def context_limit_predicate(limit: int):
    """Search predicate admitting any pattern but capping the context option."""
    pattern = f"pattern=[^;]*;context={int_le_pattern(limit)}(;.*)?\\nSTDIN:.*"
    return true_with(regex_predicate(pattern))


def defaults_from_questionnaire(q: QuestionnaireAnswers, document: AtomicDocument,
                                author: str) -> DefaultsBatch:
    """Author-time defaults: per-atom grants derived from the questionnaire.

    printable=False lands print in the document's forbidden set instead of
    granting it; the produced document must still validate, otherwise the
    defaults are refused as inconsistent.
    """
    from .adoc import PolicyLine  # local import to avoid a cycle at module load

    granted: list[tuple[str, object]] = [("read", ENTRY_TRUE)]
    granted.append(("search", context_limit_predicate(q.default_search_context)))
    if q.printable:
        granted.append(("print", ENTRY_TRUE))
    if q.emailable:
        granted.append(("email", ENTRY_TRUE))
    if q.copyable:
        granted.extend((f, ENTRY_TRUE) for f in COPY_FUNCTIONS)

    forbidden = set(document.forbidden_functions)
    if not q.printable:
        forbidden.add("print")

    new_atoms = []
    entries = []
    for atom in document.atoms:
        lines = list(atom.policy)
        for function, entry in granted:
            lines.append(PolicyLine(author, function, entry))
            entries.append((author, function, (atom_ref(document, atom),), entry))
        new_atoms.append(replace(atom, policy=tuple(lines)))
    new_document = replace(document, atoms=tuple(new_atoms),
                           forbidden_functions=frozenset(forbidden))
    report = validate_document(new_document)
    if not report.accepted:
        names = ", ".join(v.atom_id for v in report.violations)
        raise InconsistentDefaults(f"defaults violate consistency on atom(s) {names}")
    return DefaultsBatch(new_document, tuple(entries))


def derive_coauthor_policy(author_entries: Iterable[tuple], coauthor: str,
                           removals: Iterable[str] = ()) -> tuple:
    """Co-author grants: the author's entries minus the removed functions.

    The subset property holds by construction; removals naming functions the
    author never held are rejected.
    """
    author_entries = list(author_entries)
    granted_functions = {e[1] for e in author_entries}
    removals = set(removals)
    extra = removals - granted_functions
    if extra:
        raise NotASubset(f"removals not granted to the author: {sorted(extra)}")
    return tuple((coauthor, function, objects, entry)
                 for (_subject, function, objects, entry) in author_entries
                 if function not in removals)


# --- workspace loading ----------------------------------------------------------------

def register_document(tensor: AccessTensor, document: AtomicDocument) -> AccessTensor:
    """Register a document's objects and merge its atom-scoped policy lines.

    Subjects named only in atom policies are auto-registered; atom policy
    functions must already be in the tensor's registry.
    """
    subjects = set(tensor.subjects)
    objects = set(tensor.objects)
    objects.add(document.id)
    entries = []
    for atom in document.atoms:
        ref = atom_ref(document, atom)
        objects.add(ref)
        for line in atom.policy:
            if line.function not in tensor.functions:
                raise UnknownFunction(
                    f"atom policy names unregistered function {line.function!r}")
            subjects.add(line.subject)
            entries.append((line.subject, line.function, (ref,), line.entry))
    widened = AccessTensor(
        subjects=frozenset(subjects),
        functions=dict(tensor.functions),
        objects=frozenset(objects),
        entries=dict(tensor.entries),
    )
    return widened.with_entries(entries)


def load_workspace(policy_texts: Iterable[str] = (),
                   documents: Iterable[AtomicDocument] = (),
                   catalog: Catalog | None = None) -> tuple[Catalog, AccessTensor, dict]:
    """One tensor snapshot from catalog sigs, documents and policy files.

    Documents register first so policy files can reference their atoms
    without re-declaring them; a file entry therefore overrides an
    atom-embedded default at the same coordinate.
    """
    catalog = catalog or default_catalog()
    tensor = AccessTensor(functions=catalog.sigs())
    doc_map: dict[str, AtomicDocument] = {}
    for document in documents:
        if document.id in doc_map:
            raise InvalidRange(f"duplicate document id {document.id!r}")
        doc_map[document.id] = document
        tensor = register_document(tensor, document)
    for text in policy_texts:
        tensor = load_policy(text, base=tensor)
    return catalog, tensor, doc_map


# --- the service ----------------------------------------------------------------------

DENY_REFUSAL = {
    "error": "denied",
    "detail": "the requested invocation is not permitted",
}


@dataclass(frozen=True)
class InvokeResult:
    outcome: str              # "allow" | "deny" | "n/a"
    payload: Mapping = field(default_factory=dict)
    audit_sequence: int = 0


class MonitorService:
    """Shared-snapshot dispatcher; all mutation goes through one writer lock."""

    def __init__(self, catalog: Catalog, tensor: AccessTensor,
                 documents: Mapping[str, AtomicDocument],
                 identities: Mapping[str, Principal] | None = None,
                 policy_cc: str = "supervisor@policy.local",
                 outbox_path: Path | str | None = None,
                 audit_sink: Path | str | None = None):
        self.catalog = catalog
        self._tensor = tensor
        self._documents = dict(documents)
        self._identities = dict(identities or {})
        self.policy_cc = policy_cc
        self.outbox_path = Path(outbox_path) if outbox_path else None
        self.audit = AuditLog(audit_sink)
        self._write_lock = threading.Lock()

    # -- snapshot accessors --

    @property
    def tensor(self) -> AccessTensor:
        return self._tensor

    def swap_tensor(self, tensor: AccessTensor) -> None:
        with self._write_lock:
            self._tensor = tensor

    def documents(self) -> dict[str, AtomicDocument]:
        return dict(self._documents)

    def document(self, doc_id: str) -> AtomicDocument:
        doc = self._documents.get(doc_id)
        if doc is None:
            raise UnknownObject(f"no document {doc_id!r}")
        return doc

    def store_document(self, document: AtomicDocument) -> None:
        with self._write_lock:
            self._documents[document.id] = document

    # -- identity --

    def authenticate(self, token: str) -> Principal:
        principal = self._identities.get(token)
        if principal is None:
            raise Unauthenticated("unknown token")
        return principal

    # -- dispatch --

    def invoke(self, principal: Principal, function: str, args: Iterable[str] = (),
               options: Mapping | Iterable = (), stdin: bytes = b"") -> InvokeResult:
        """Route one invocation through the tensor and the guarded catalog.

        Exactly one audit record is appended, whatever the outcome.  Unknown
        or forbidden targets produce the same uniform refusal.
        """
        if function not in self.catalog:
            raise UnknownFunction(f"function {function!r} is not registered")
        args = list(args)
        opts = _normalize_options(options)
        subject = principal.subject
        tensor = self._tensor
        outcome, payload, audited_objects, inv = "deny", dict(DENY_REFUSAL), tuple(args), None
        try:
            outcome, payload, audited_objects, inv = self._dispatch(
                tensor, subject, function, args, opts, stdin)
        except (AccessDenied, UnknownObject, UnknownAtom, InvalidRange,
                KeyError, ValueError):
            # uniform refusal: forbidden and nonexistent shall look alike
            outcome, payload = "deny", dict(DENY_REFUSAL)
        size = len(json.dumps(payload).encode()) if outcome == "allow" else 0
        record = self.audit.append(subject, function, audited_objects,
                                   inv or Invocation(), outcome, size)
        return InvokeResult(outcome, payload, record.sequence)

    def _dispatch(self, tensor: AccessTensor, subject: str, function: str,
                  args: list, opts: dict, stdin: bytes):
        if function == "read":
            document = self.document(_need(args, 0, "document id"))
            view = guarded.redacted_view(tensor, subject, document)
            return "allow", render_view(view), (document.id,), Invocation()
        if function == "search":
            document = self.document(_need(args, 0, "document id"))
            pattern = opts.get("pattern", "")
            context = int(opts.get("context", 0))
            quiet = _flag(opts, "quiet")
            hide = _csv(opts.get("hide_words"))
            inv = guarded.search_invocation(pattern, context, quiet, hide)
            result = guarded.search(tensor, subject, document, pattern,
                                    context=context, quiet=quiet, hide_words=hide)
            allowed_any = any(
                tensor.decide(subject, "search", (atom_ref(document, a),), inv).allowed
                for a in document.atoms if a.kind == "text")
            outcome = "allow" if allowed_any else "deny"
            payload = render_search(result) if allowed_any else dict(DENY_REFUSAL)
            return outcome, payload, (document.id,), inv
        if function == "grep_in_standard":
            pattern = opts.get("pattern", "")
            context = int(opts.get("context", 0))
            quiet = _flag(opts, "quiet")
            hide = _csv(opts.get("hide_words"))
            inv = guarded.search_invocation(pattern, context, quiet, hide, stdin=stdin)
            decision = tensor.decide(subject, function, (), inv)
            if not decision.allowed:
                return "deny", dict(DENY_REFUSAL), (), inv
            result = guarded.search_standard(tensor, subject, stdin, pattern,
                                             context=context, quiet=quiet,
                                             hide_words=hide)
            return "allow", render_search(result), (), inv
        if function == "print":
            document = self.document(_need(args, 0, "document id"))
            watermark = opts.get("watermark") or subject
            inv = guarded.print_invocation(watermark)
            artifact = guarded.watermark_print(tensor, subject, document, watermark)
            printable_any = any(
                tensor.decide(subject, "print", (atom_ref(document, a),), inv).allowed
                for a in document.atoms)
            if not printable_any:
                return "deny", dict(DENY_REFUSAL), (document.id,), inv
            return "allow", render_print(artifact), (document.id,), inv
        if function == "email":
            document = self.document(_need(args, 0, "document id"))
            atom_ids = args[1:] or [a.id for a in document.atoms]
            to = _csv(opts.get("to"))
            cc = _csv(opts.get("cc"))
            inv = guarded.email_invocation(to, cc)
            record = guarded.force_cc_email(
                tensor, subject, document, atom_ids, to=to, cc=cc,
                policy_cc=self.policy_cc, outbox_path=self.outbox_path)
            return "allow", render_outbox(record), \
                tuple(atom_ref(document, a) for a in atom_ids), inv
        if function.startswith("copy_"):
            variant = function[len("copy_"):]
            source = self.document(_need(args, 0, "document id"))
            atom_ids = args[1:]
            dest = self.document(opts.get("dest", ""))
            max_bytes = int(opts["max_bytes"]) if "max_bytes" in opts else None
            max_chars = int(opts["max_chars"]) if "max_chars" in opts else None
            blocklist = _csv(opts.get("exclude"))
            inv = guarded.copy_invocation(variant, max_bytes, max_chars, blocklist)
            result, new_dest = guarded.copy(
                tensor, subject, source, atom_ids, dest, variant,
                max_bytes=max_bytes, max_chars=max_chars, blocklist=blocklist)
            self.store_document(new_dest)
            self._register_new_atoms(new_dest, result.inserted_atom_ids)
            return "allow", render_copy(result, new_dest.id), \
                tuple(atom_ref(source, a) for a in atom_ids), inv
        return self._dispatch_generic(tensor, subject, function, args, opts, stdin)

    def _dispatch_generic(self, tensor: AccessTensor, subject: str, function: str,
                          args: list, opts: dict, stdin: bytes):
        """Composites and custom catalog functions: one decision on the
        supplied object tuple, then the pipeline runner if there is one."""
        inv = Invocation(options=tuple(opts.items()), stdin=stdin)
        objects = tuple(args)
        decision = tensor.decide(subject, function, objects, inv)
        if decision.outcome.value == "n/a":
            return "n/a", {"error": "not-applicable", "detail": decision.detail}, objects, inv
        if not decision.allowed:
            return "deny", dict(DENY_REFUSAL), objects, inv
        spec = self.catalog.get(function)
        if spec.runner is None:
            return "allow", {"decision": "allow"}, objects, inv
        output = self.catalog.execute(function, objects, stdin, self._resolve_ref)
        return "allow", {"output": output.decode("utf-8", errors="replace")}, objects, inv

    def _resolve_ref(self, ref: str) -> bytes:
        """Object reference to content bytes: a document or one of its atoms."""
        if "/" in ref:
            doc_id, atom_id = ref.split("/", 1)
            return self.document(doc_id).atom(atom_id).content.encode()
        document = self.document(ref)
        return "\n\n".join(a.content for a in document.atoms).encode()

    def _register_new_atoms(self, document: AtomicDocument,
                            atom_ids: tuple) -> None:
        tensor = self._tensor
        additions = [atom_ref(document, aid) for aid in atom_ids
                     if atom_ref(document, aid) not in tensor.objects]
        if additions:
            with self._write_lock:
                current = self._tensor
                self._tensor = AccessTensor(
                    subjects=current.subjects,
                    functions=dict(current.functions),
                    objects=current.objects | frozenset(additions),
                    entries=dict(current.entries),
                )


def _need(args: list, index: int, what: str) -> str:
    if len(args) <= index:
        raise InvalidRange(f"missing argument: {what}")
    return args[index]


def _normalize_options(options: Mapping | Iterable) -> dict:
    if isinstance(options, Mapping):
        return dict(options)
    return {k: v for k, v in options}


def _flag(opts: dict, key: str) -> bool:
    if key not in opts:
        return False
    return opts[key] in (True, None, "", "true", "1")


def _csv(value) -> tuple:
    if value is None or value == "":
        return ()
    if isinstance(value, str):
        return tuple(x for x in value.split(",") if x)
    return tuple(value)


# --- result rendering ------------------------------------------------------------------

def render_view(view: guarded.RenderedView) -> dict:
    return {
        "kind": "view",
        "document": view.document_id,
        "segments": [{
            "atom": s.atom_id,
            "kind": s.kind,
            "atom_kind": s.atom_kind,
            "text": s.text,
        } for s in view.segments],
    }


def render_search(result: guarded.SearchResult) -> dict:
    return {
        "kind": "search",
        "boolean_only": result.boolean_only,
        "found": result.found,
        "hits": [{
            "atom": h.atom_id,
            "line_number": h.line_number,
            "line": h.line,
            "before": list(h.before),
            "after": list(h.after),
        } for h in result.hits],
    }


def render_copy(result: guarded.CopyResult, dest_id: str) -> dict:
    return {
        "kind": "copy",
        "payload": result.payload,
        "citation": {"document": result.citation[0],
                     "atoms": list(result.citation[1])} if result.citation else None,
        "applied_limits": dict(result.applied_limits),
        "inserted_atoms": list(result.inserted_atom_ids),
        "destination": dest_id,
    }


def render_print(artifact: guarded.PrintArtifact) -> dict:
    return {
        "kind": "print",
        "text": artifact.text,
        "pages": artifact.pages,
        "watermark": artifact.watermark,
    }


def render_outbox(record: guarded.OutboxRecord) -> dict:
    return {"kind": "email", **record.to_json()}


def load_documents_from_paths(paths: Iterable[Path | str],
                              catalog: Catalog | None = None) -> list[AtomicDocument]:
    registry = (catalog or default_catalog()).names()
    docs = []
    for path in paths:
        data = Path(path).read_bytes()
        docs.append(parse(data, function_registry=registry))
    return docs

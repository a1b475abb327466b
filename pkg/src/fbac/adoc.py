"""Atom-structured documents: parse, validate, serialize, edit.

A document is an ordered list of atoms - the smallest undividable content
segments - plus a document-level forbidden-function set and an optional
classification.  Each atom carries its own policy lines, an optional
classification, and links to other atoms (a link with cascade
"unavailable-on-remove" makes the atom unusable once its target is gone,
which is how quote/citation coupling works).

A document is consistent when no atom grants a function the document
forbids, and - when both sides are classified - the atom's class is
dominated by the document's.  Parsing checks structure only; consistency
is a separate, report-producing validation step.

Concrete syntax is an XML-flavored container, fixed here bit-exactly:

    <adoc id="doc1" version="1">
      <forbidden functions="print,email"/>
      <classification level="2" compartments="A,B"/>
      <atom id="a1" kind="text">
        <classification level="1" compartments="A"/>
        <policy><![CDATA[
    ENTRY alice search TRUE_RE:pattern=[^;]*;context=[0-5]\\nSTDIN:.*
    ENTRY bob read TRUE
    ]]></policy>
        <links>
          <link target="a2" relation="quote-of" cascade="unavailable-on-remove"/>
        </links>
        <content><![CDATA[First paragraph.]]></content>
      </atom>
    </adoc>

Policy lines reuse the entry-value grammar of the tensor policy files but
are scoped to their atom: ``ENTRY <subject> <function> <value>`` with no
object field.  Link targets containing "/" refer into other documents and
are resolved lazily; bare targets must name an atom in this document.
Documents are immutable values; edits produce new documents.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

from .act_core import check_token
from .errors import (
    DanglingLink,
    DuplicateAtomId,
    InvalidDocument,
    MalformedDocument,
    MissingClassification,
    UnknownAtom,
    UnknownFunctionName,
    UnsupportedVersion,
)
from .lattice import SecurityClass, dominated_by
from .policyfile import _parse_value, _render_value

FORMAT_VERSION = 1
CASCADE_UNAVAILABLE = "unavailable-on-remove"
CASCADE_NONE = "none"
ATOM_KINDS = ("text", "image-ref")


@dataclass(frozen=True)
class PolicyLine:
    """One scoped grant: subject, function, entry value (object = this atom)."""

    subject: str
    function: str
    entry: object  # TensorEntry


@dataclass(frozen=True)
class AtomLink:
    target: str          # atom id, or "doc/atom" into another document
    relation: str
    cascade: str = CASCADE_NONE

    def __post_init__(self):
        if self.cascade not in (CASCADE_UNAVAILABLE, CASCADE_NONE):
            raise ValueError(f"bad cascade {self.cascade!r}")

    @property
    def cross_document(self) -> bool:
        return "/" in self.target


@dataclass(frozen=True)
class Atom:
    id: str
    kind: str = "text"
    content: str = ""
    policy: tuple = ()
    classification: SecurityClass | None = None
    links: tuple = ()

    def __post_init__(self):
        check_token(self.id, "atom id")
        if self.kind not in ATOM_KINDS:
            raise ValueError(f"bad atom kind {self.kind!r}")
        object.__setattr__(self, "policy", tuple(self.policy))
        object.__setattr__(self, "links", tuple(self.links))

    def granted_functions(self) -> frozenset:
        """Functions some subject may run on this atom (True or predicated True)."""
        return frozenset(line.function for line in self.policy if line.entry.grants)

    def function_list(self, subject: str) -> dict:
        """The per-subject view of this atom's policy (last line wins)."""
        return {line.function: line.entry
                for line in self.policy if line.subject == subject}


@dataclass(frozen=True)
class AtomicDocument:
    id: str
    atoms: tuple = ()
    forbidden_functions: frozenset = frozenset()
    classification: SecurityClass | None = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        check_token(self.id, "document id")
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "forbidden_functions",
                           frozenset(self.forbidden_functions))

    def atom(self, atom_id: str) -> Atom:
        for atom in self.atoms:
            if atom.id == atom_id:
                return atom
        raise UnknownAtom(f"no atom {atom_id!r} in document {self.id!r}")

    def has_atom(self, atom_id: str) -> bool:
        return any(a.id == atom_id for a in self.atoms)


def atom_ref(document: AtomicDocument, atom: Atom | str) -> str:
    """Object-registry reference for one atom: ``<doc id>/<atom id>``."""
    atom_id = atom if isinstance(atom, str) else atom.id
    return f"{document.id}/{atom_id}"


# --- structural checks -----------------------------------------------------------

def check_structure(document: AtomicDocument) -> None:
    """Raise unless the document satisfies every structural invariant."""
    if not document.atoms:
        raise InvalidDocument("a document is composed of one or more atoms")
    seen = set()
    for atom in document.atoms:
        if atom.id in seen:
            raise DuplicateAtomId(f"duplicate atom id {atom.id!r}")
        seen.add(atom.id)
    for atom in document.atoms:
        for link in atom.links:
            if link.target == atom.id:
                raise MalformedDocument(f"atom {atom.id!r} links to itself")
            if not link.cross_document and link.target not in seen:
                raise DanglingLink(
                    f"atom {atom.id!r} links to missing atom {link.target!r}")


# --- consistency -----------------------------------------------------------------

def check_atom_consistency(atom: Atom, document: AtomicDocument) -> bool:
    """The atom grants nothing the document forbids."""
    return not (atom.granted_functions() & document.forbidden_functions)


def check_atom_consistency_classified(atom: Atom, document: AtomicDocument,
                                      strict: bool = False) -> bool:
    """Consistency plus classification dominance.

    Non-strict dominance is the default; ``strict`` additionally forbids an
    atom classified exactly at the document level.
    """
    if atom.classification is None or document.classification is None:
        raise MissingClassification(
            f"atom {atom.id!r} and document {document.id!r} must both be classified")
    if not check_atom_consistency(atom, document):
        return False
    if not dominated_by(atom.classification, document.classification):
        return False
    if strict and atom.classification == document.classification:
        return False
    return True


@dataclass(frozen=True)
class Violation:
    atom_id: str
    condition: str       # "forbidden-overlap" | "classification-dominance"
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    document_id: str
    violations: tuple = ()

    @property
    def accepted(self) -> bool:
        return not self.violations


def validate_document(document: AtomicDocument,
                      strict: bool = False) -> ValidationReport:
    """Check every atom; violations are data, not errors.

    The classification conjunct applies only when both the document and the
    atom carry a classification.
    """
    violations = []
    for atom in document.atoms:
        overlap = atom.granted_functions() & document.forbidden_functions
        if overlap:
            violations.append(Violation(
                atom.id, "forbidden-overlap",
                f"grants forbidden function(s) {', '.join(sorted(overlap))}"))
        if atom.classification is not None and document.classification is not None:
            dominated = dominated_by(atom.classification, document.classification)
            if dominated and strict and atom.classification == document.classification:
                dominated = False
            if not dominated:
                violations.append(Violation(
                    atom.id, "classification-dominance",
                    "atom class is not dominated by the document class"))
    return ValidationReport(document.id, tuple(violations))


# --- links -------------------------------------------------------------------------

def link_closure(document: AtomicDocument, atom_id: str) -> set:
    """Atoms that become unavailable when atom_id is removed.

    Follows cascade links in reverse (dependents), transitively; includes
    the atom itself; terminates on cycles.
    """
    document.atom(atom_id)
    dependents: dict[str, set] = {}
    for atom in document.atoms:
        for link in atom.links:
            if link.cascade == CASCADE_UNAVAILABLE and not link.cross_document:
                dependents.setdefault(link.target, set()).add(atom.id)
    closure = {atom_id}
    frontier = [atom_id]
    while frontier:
        current = frontier.pop()
        for dep in dependents.get(current, ()):
            if dep not in closure:
                closure.add(dep)
                frontier.append(dep)
    return closure


def unavailable_atoms(document: AtomicDocument) -> set:
    """Atoms whose cascade dependencies (transitively) no longer resolve.

    Cross-document targets are not checked here; they resolve lazily when
    both documents are loaded.
    """
    present = {atom.id for atom in document.atoms}
    bad = set()
    for atom in document.atoms:
        for link in atom.links:
            if link.cascade == CASCADE_UNAVAILABLE and not link.cross_document \
                    and link.target not in present:
                bad.add(atom.id)
    changed = True
    while changed:
        changed = False
        for atom in document.atoms:
            if atom.id in bad:
                continue
            for link in atom.links:
                if link.cascade == CASCADE_UNAVAILABLE and not link.cross_document \
                        and link.target in bad:
                    bad.add(atom.id)
                    changed = True
                    break
    return bad


# --- edits -------------------------------------------------------------------------

def remove_atom(document: AtomicDocument, atom_id: str) -> AtomicDocument:
    """New document without the atom; links pointing at it are kept dangling,
    which is exactly what makes cascade-linked atoms unavailable."""
    document.atom(atom_id)
    remaining = tuple(a for a in document.atoms if a.id != atom_id)
    if not remaining:
        raise InvalidDocument("removing the last atom would empty the document")
    return replace(document, atoms=remaining)


def insert_atom(document: AtomicDocument, atom: Atom,
                index: int | None = None) -> AtomicDocument:
    if document.has_atom(atom.id):
        raise DuplicateAtomId(f"duplicate atom id {atom.id!r}")
    atoms = list(document.atoms)
    atoms.insert(len(atoms) if index is None else index, atom)
    return replace(document, atoms=tuple(atoms))


# --- plain-text import ---------------------------------------------------------------

def text_to_document(text: str, document_id: str) -> AtomicDocument:
    """Import plain text, one atom per blank-line-delimited paragraph."""
    paragraphs = [p.strip("\n") for p in _split_paragraphs(text)]
    atoms = tuple(Atom(id=f"p{i}", kind="text", content=p)
                  for i, p in enumerate(paragraphs, start=1))
    doc = AtomicDocument(id=document_id, atoms=atoms)
    check_structure(doc)
    return doc


def _split_paragraphs(text: str) -> list[str]:
    parts, current = [], []
    for line in text.splitlines():
        if line.strip():
            current.append(line)
        elif current:
            parts.append("\n".join(current))
            current = []
    if current:
        parts.append("\n".join(current))
    return parts


# --- serialization -------------------------------------------------------------------

def serialize(document: AtomicDocument) -> bytes:
    """Deterministic byte form; parse(serialize(d)) == d structurally."""
    check_structure(document)
    out = [f'<adoc id="{_attr(document.id)}" version="{document.format_version}">']
    if document.forbidden_functions:
        functions = ",".join(sorted(document.forbidden_functions))
        out.append(f'  <forbidden functions="{_attr(functions)}"/>')
    if document.classification is not None:
        out.append("  " + _classification_tag(document.classification))
    for atom in document.atoms:
        out.append(f'  <atom id="{_attr(atom.id)}" kind="{_attr(atom.kind)}">')
        if atom.classification is not None:
            out.append("    " + _classification_tag(atom.classification))
        if atom.policy:
            lines = "\n".join(
                f"ENTRY {line.subject} {line.function} {_render_value(line.entry)}"
                for line in atom.policy)
            out.append(f"    <policy><![CDATA[\n{_cdata(lines)}\n]]></policy>")
        if atom.links:
            out.append("    <links>")
            for link in atom.links:
                out.append(f'      <link target="{_attr(link.target)}" '
                           f'relation="{_attr(link.relation)}" '
                           f'cascade="{_attr(link.cascade)}"/>')
            out.append("    </links>")
        out.append(f"    <content><![CDATA[{_cdata(atom.content)}]]></content>")
        out.append("  </atom>")
    out.append("</adoc>")
    return ("\n".join(out) + "\n").encode("utf-8")


def _classification_tag(c: SecurityClass) -> str:
    compartments = ",".join(sorted(c.compartments))
    return f'<classification level="{c.level}" compartments="{_attr(compartments)}"/>'


def _attr(value: str) -> str:
    return (value.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def _cdata(value: str) -> str:
    # the standard split trick keeps "]]>" representable
    return value.replace("]]>", "]]]]><![CDATA[>")


# --- parsing ---------------------------------------------------------------------------

class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str):
        line = self.text.count("\n", 0, self.pos) + 1
        col = self.pos - self.text.rfind("\n", 0, self.pos)
        raise MalformedDocument(message, line, col)

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def skip_ws(self):
        while not self.eof() and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def lookahead(self, token: str) -> bool:
        return self.text.startswith(token, self.pos)

    def expect(self, token: str):
        if not self.lookahead(token):
            self.error(f"expected {token!r}")
        self.pos += len(token)

    def read_tag(self) -> tuple[str, dict, bool]:
        """After '<': tag name, attributes, self-closing flag."""
        self.expect("<")
        name = self._read_name()
        attrs = {}
        while True:
            self.skip_ws()
            if self.lookahead("/>"):
                self.pos += 2
                return name, attrs, True
            if self.lookahead(">"):
                self.pos += 1
                return name, attrs, False
            key = self._read_name()
            self.skip_ws()
            self.expect("=")
            self.skip_ws()
            if key in attrs:
                self.error(f"duplicate attribute {key!r}")
            attrs[key] = self._read_quoted()

    def _read_name(self) -> str:
        start = self.pos
        while not self.eof() and (self.text[self.pos].isalnum()
                                  or self.text[self.pos] in "_-"):
            self.pos += 1
        if start == self.pos:
            self.error("expected a name")
        return self.text[start:self.pos]

    def _read_quoted(self) -> str:
        self.expect('"')
        out = []
        while True:
            if self.eof():
                self.error("unterminated attribute value")
            ch = self.text[self.pos]
            if ch == '"':
                self.pos += 1
                return "".join(out)
            if ch == "&":
                out.append(self._read_entity())
            elif ch == "<":
                self.error("'<' inside attribute value")
            else:
                out.append(ch)
                self.pos += 1

    def _read_entity(self) -> str:
        entities = {"&lt;": "<", "&gt;": ">", "&amp;": "&",
                    "&quot;": '"', "&apos;": "'"}
        for entity, ch in entities.items():
            if self.lookahead(entity):
                self.pos += len(entity)
                return ch
        self.error("unknown entity")

    def read_text_until_close(self, tag: str) -> str:
        """Mixed CDATA/entity-escaped text up to ``</tag>``."""
        close = f"</{tag}>"
        out = []
        while True:
            if self.eof():
                self.error(f"unterminated <{tag}>")
            if self.lookahead(close):
                self.pos += len(close)
                return "".join(out)
            if self.lookahead("<![CDATA["):
                self.pos += len("<![CDATA[")
                end = self.text.find("]]>", self.pos)
                if end < 0:
                    self.error("unterminated CDATA section")
                out.append(self.text[self.pos:end])
                self.pos = end + 3
            elif self.lookahead("<"):
                self.error(f"unexpected tag inside <{tag}>")
            elif self.lookahead("&"):
                out.append(self._read_entity())
            else:
                out.append(self.text[self.pos])
                self.pos += 1


def parse(data: bytes | str, function_registry: Iterable[str] | None = None) -> AtomicDocument:
    """Parse document bytes; structure is enforced, consistency is not.

    When ``function_registry`` is given, policy lines naming functions outside
    it raise UnknownFunctionName.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"not UTF-8: {exc}") from exc
    else:
        text = data
    cursor = _Cursor(text)
    cursor.skip_ws()
    name, attrs, self_closing = cursor.read_tag()
    if name != "adoc" or self_closing:
        cursor.error("expected <adoc ...>")
    doc_id = attrs.get("id") or cursor.error("adoc needs an id attribute")
    version = attrs.get("version", "")
    if not version.isdigit():
        cursor.error("adoc needs a numeric version attribute")
    if int(version) != FORMAT_VERSION:
        raise UnsupportedVersion(f"version {version} (supported: {FORMAT_VERSION})")

    forbidden: frozenset | None = None
    classification: SecurityClass | None = None
    atoms: list[Atom] = []
    registry = None if function_registry is None else set(function_registry)

    while True:
        cursor.skip_ws()
        if cursor.lookahead("</adoc>"):
            cursor.pos += len("</adoc>")
            break
        child, child_attrs, child_closed = cursor.read_tag()
        if child == "forbidden":
            if forbidden is not None:
                cursor.error("duplicate <forbidden>")
            if not child_closed:
                cursor.error("<forbidden> must be self-closing")
            forbidden = _parse_name_csv(child_attrs.get("functions", ""), cursor, registry)
        elif child == "classification":
            if classification is not None:
                cursor.error("duplicate document <classification>")
            if not child_closed:
                cursor.error("<classification> must be self-closing")
            classification = _parse_classification(child_attrs, cursor)
        elif child == "atom":
            if child_closed:
                cursor.error("<atom> cannot be self-closing")
            atoms.append(_parse_atom(cursor, child_attrs, registry))
        else:
            cursor.error(f"unexpected <{child}> in <adoc>")

    cursor.skip_ws()
    if not cursor.eof():
        cursor.error("trailing content after </adoc>")

    try:
        document = AtomicDocument(
            id=doc_id,
            atoms=tuple(atoms),
            forbidden_functions=forbidden or frozenset(),
            classification=classification,
            format_version=int(version),
        )
    except ValueError as exc:
        raise MalformedDocument(str(exc)) from exc
    check_structure(document)
    return document


def _parse_name_csv(raw: str, cursor: _Cursor, registry: set | None) -> frozenset:
    names = [n for n in raw.split(",") if n]
    for n in names:
        try:
            check_token(n, "function name", function=True)
        except Exception:
            cursor.error(f"bad function name {n!r}")
        if registry is not None and n not in registry:
            raise UnknownFunctionName(f"function {n!r} is not registered")
    return frozenset(names)


def _parse_classification(attrs: dict, cursor: _Cursor) -> SecurityClass:
    level = attrs.get("level", "")
    if not level.isdigit():
        cursor.error("classification needs a numeric level")
    compartments = frozenset(c for c in attrs.get("compartments", "").split(",") if c)
    return SecurityClass(int(level), compartments)


def _parse_atom(cursor: _Cursor, attrs: dict, registry: set | None) -> Atom:
    atom_id = attrs.get("id") or cursor.error("atom needs an id attribute")
    kind = attrs.get("kind", "text")
    if kind not in ATOM_KINDS:
        cursor.error(f"bad atom kind {kind!r}")
    classification = None
    policy: tuple | None = None
    links: tuple | None = None
    content: str | None = None
    while True:
        cursor.skip_ws()
        if cursor.lookahead("</atom>"):
            cursor.pos += len("</atom>")
            break
        child, child_attrs, child_closed = cursor.read_tag()
        if child == "classification":
            if classification is not None:
                cursor.error("duplicate atom <classification>")
            classification = _parse_classification(child_attrs, cursor)
        elif child == "policy":
            if policy is not None:
                cursor.error("duplicate <policy>")
            if child_closed:
                policy = ()
            else:
                text = cursor.read_text_until_close("policy")
                policy = _parse_policy_lines(text, cursor, registry)
        elif child == "links":
            if links is not None:
                cursor.error("duplicate <links>")
            links = () if child_closed else _parse_links(cursor)
        elif child == "content":
            if content is not None:
                cursor.error("duplicate <content>")
            content = "" if child_closed else cursor.read_text_until_close("content")
        else:
            cursor.error(f"unexpected <{child}> in <atom>")
    if content is None:
        cursor.error(f"atom {atom_id!r} has no <content>")
    try:
        return Atom(id=atom_id, kind=kind, content=content,
                    policy=policy or (), classification=classification,
                    links=links or ())
    except ValueError as exc:
        cursor.error(str(exc))


def _parse_policy_lines(text: str, cursor: _Cursor, registry: set | None) -> tuple:
    lines = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 3)
        if len(parts) != 4 or parts[0] != "ENTRY":
            cursor.error(f"bad policy line {line!r} "
                         "(expected ENTRY <subject> <function> <value>)")
        _, subject, function, value = parts
        try:
            check_token(subject, "subject")
            check_token(function, "function name", function=True)
            entry = _parse_value(value, 0)
        except Exception as exc:
            cursor.error(f"bad policy line {line!r}: {exc}")
        if registry is not None and function not in registry:
            raise UnknownFunctionName(f"function {function!r} is not registered")
        lines.append(PolicyLine(subject, function, entry))
    return tuple(lines)


def _parse_links(cursor: _Cursor) -> tuple:
    links = []
    while True:
        cursor.skip_ws()
        if cursor.lookahead("</links>"):
            cursor.pos += len("</links>")
            return tuple(links)
        name, attrs, closed = cursor.read_tag()
        if name != "link" or not closed:
            cursor.error("expected self-closing <link .../>")
        target = attrs.get("target") or cursor.error("link needs a target")
        relation = attrs.get("relation", "related")
        cascade = attrs.get("cascade", CASCADE_NONE)
        try:
            links.append(AtomLink(target, relation, cascade))
        except ValueError as exc:
            cursor.error(str(exc))

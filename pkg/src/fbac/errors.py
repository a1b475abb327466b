"""Exception hierarchy shared by every engine layer.

Decision evaluation itself never raises for a denial: a Deny is a value,
not an error.  Exceptions are reserved for malformed input, unregistered
identifiers, and contract violations.
"""

from __future__ import annotations


class FbacError(Exception):
    """Base class for all engine errors."""


# --- identifier registration -------------------------------------------------

class UnknownIdentifier(FbacError):
    """An identifier was used before being registered."""


class UnknownSubject(UnknownIdentifier):
    pass


class UnknownFunction(UnknownIdentifier):
    pass


class UnknownObject(UnknownIdentifier):
    pass


class DuplicateIdentifier(FbacError):
    """An identifier was registered twice."""


class DuplicateComposite(DuplicateIdentifier):
    """A composite function was registered twice."""


class ArityMismatch(FbacError):
    """A stored entry's object tuple length disagrees with the function arity."""


class BadIdentifier(FbacError):
    """Identifier does not match the token syntax."""


# --- predicates ---------------------------------------------------------------

class PredicateError(FbacError):
    """Predicate could not be evaluated (bad pattern, unresolvable program)."""


class InvalidPattern(PredicateError):
    """Search or predicate pattern does not compile under the dialect."""


# --- projections --------------------------------------------------------------

class MeaninglessPair(FbacError):
    """(function, object tuple) pair with mismatched arity where one is required."""


class EnumerationTooLarge(FbacError):
    """Object-tuple enumeration would exceed the configured cap."""


# --- lattice policies ---------------------------------------------------------

class ForeignClass(FbacError):
    """Security class does not belong to the lattice it is used with."""


class UnassignedSubject(FbacError):
    pass


class UnassignedPair(FbacError):
    pass


class UnassignedObject(FbacError):
    pass


# --- document format ----------------------------------------------------------

class MalformedDocument(FbacError):
    """Document text does not parse; carries line/column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})" if line else message)
        self.line = line
        self.column = column


class DuplicateAtomId(FbacError):
    pass


class DanglingLink(FbacError):
    pass


class UnknownFunctionName(FbacError):
    """Atom policy names a function absent from the supplied registry."""


class UnsupportedVersion(FbacError):
    pass


class InvalidDocument(FbacError):
    """Document violates a structural invariant (e.g. zero atoms)."""


class MissingClassification(FbacError):
    pass


class UnknownAtom(FbacError):
    pass


# --- guarded functions --------------------------------------------------------

class AccessDenied(FbacError):
    """A guarded function refused to run; never carries denied content."""


class InvalidRange(FbacError):
    pass


class InvalidAddress(FbacError):
    pass


# --- monitor ------------------------------------------------------------------

class Unauthenticated(FbacError):
    pass


class NotASubset(FbacError):
    """Co-author removals name functions the author never held."""


class InconsistentDefaults(FbacError):
    """Questionnaire defaults would violate the document consistency condition."""


class PolicyParseError(FbacError):
    """Policy text does not parse; carries the offending line number."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"{message} (line {line})" if line else message)
        self.line = line

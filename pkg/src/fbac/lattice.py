"""Lattice information-flow policies with function-dependent classes.

Classes are the standard military construction: an integer rank plus a
compartment set, ordered by rank <= rank and compartment-subset.  Classes
attach to subjects and to (function, object tuple) pairs, so clearance can
differ per command: a tightly restricted search variant may sit in a lower
class than its unrestricted sibling over the same files.

Flow is allowed to a subject when the pair's class is dominated by the
subject's class.  The same comparison read over integrity classes is the
write-down rule (an object may be written when its integrity class is
dominated by the writer's), so one assignment structure serves both modes;
``mode`` records which reading is intended.

A compiled tensor is a one-shot snapshot: policy updates recompile rather
than re-checking classes at decision time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .act_core import ENTRY_FALSE, ENTRY_TRUE, AccessTensor, FunctionSig, check_token
from .errors import (
    ForeignClass,
    PolicyParseError,
    UnassignedObject,
    UnassignedPair,
    UnassignedSubject,
)


@dataclass(frozen=True)
class SecurityClass:
    level: int
    compartments: frozenset = frozenset()

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        object.__setattr__(self, "compartments", frozenset(self.compartments))


def dominated_by(c1: SecurityClass, c2: SecurityClass) -> bool:
    """Raw dominance test, no lattice-membership validation."""
    return c1.level <= c2.level and c1.compartments <= c2.compartments


@dataclass(frozen=True)
class ClassLattice:
    """The (classes, dominance) lattice induced by ranks and a compartment universe."""

    levels: tuple                      # ordered distinct ranks
    compartments: frozenset            # compartment universe
    level_names: Mapping = field(default_factory=dict)  # rank -> display name

    def __post_init__(self):
        ranks = tuple(sorted(set(self.levels)))
        object.__setattr__(self, "levels", ranks)
        object.__setattr__(self, "compartments", frozenset(self.compartments))
        if not ranks:
            raise ValueError("a lattice needs at least one level")

    def _require_member(self, c: SecurityClass) -> SecurityClass:
        if c.level not in self.levels or not c.compartments <= self.compartments:
            raise ForeignClass(f"{c} is not drawn from this lattice")
        return c

    def leq(self, c1: SecurityClass, c2: SecurityClass) -> bool:
        self._require_member(c1)
        self._require_member(c2)
        return dominated_by(c1, c2)

    def join(self, c1: SecurityClass, c2: SecurityClass) -> SecurityClass:
        self._require_member(c1)
        self._require_member(c2)
        return SecurityClass(max(c1.level, c2.level),
                             c1.compartments | c2.compartments)

    def meet(self, c1: SecurityClass, c2: SecurityClass) -> SecurityClass:
        self._require_member(c1)
        self._require_member(c2)
        return SecurityClass(min(c1.level, c2.level),
                             c1.compartments & c2.compartments)

    def all_classes(self) -> list[SecurityClass]:
        """Every class in the lattice; exponential in compartments, test-sized only."""
        universe = sorted(self.compartments)
        subsets = itertools.chain.from_iterable(
            itertools.combinations(universe, k) for k in range(len(universe) + 1))
        return [SecurityClass(rank, frozenset(sub))
                for sub in subsets for rank in self.levels]


@dataclass(frozen=True)
class ClassAssignment:
    """Clearances for subjects and classes for (function, object tuple) pairs.

    ``object_class`` carries object-level integrity classes for the plain
    write-down check; the function-dependent path never consults it.
    """

    lattice: ClassLattice
    subject_class: Mapping = field(default_factory=dict)   # subject -> SecurityClass
    pair_class: Mapping = field(default_factory=dict)      # (fname, otuple) -> SecurityClass
    object_class: Mapping = field(default_factory=dict)    # otuple -> SecurityClass
    mode: str = "confidentiality"

    def __post_init__(self):
        if self.mode not in ("confidentiality", "integrity"):
            raise ValueError(f"bad mode {self.mode!r}")
        for c in (*self.subject_class.values(), *self.pair_class.values(),
                  *self.object_class.values()):
            self.lattice._require_member(c)


def flow_allowed(assignment: ClassAssignment, subject: str, function,
                 obj: Iterable[str]) -> bool:
    """True iff the (function, object) class is dominated by the subject's."""
    name = function.name if isinstance(function, FunctionSig) else function
    key = (name, tuple(obj))
    pair = assignment.pair_class.get(key)
    if pair is None:
        raise UnassignedPair(f"no class assigned to {key!r}")
    subject_c = assignment.subject_class.get(subject)
    if subject_c is None:
        raise UnassignedSubject(f"no class assigned to subject {subject!r}")
    return assignment.lattice.leq(pair, subject_c)


def biba_write_allowed(assignment: ClassAssignment, subject: str,
                       obj: Iterable[str]) -> bool:
    """Plain integrity write rule: the object's class must be dominated by
    the subject's (classes read as integrity levels)."""
    subject_c = assignment.subject_class.get(subject)
    if subject_c is None:
        raise UnassignedSubject(f"no class assigned to subject {subject!r}")
    object_c = assignment.object_class.get(tuple(obj))
    if object_c is None:
        raise UnassignedObject(f"no class assigned to object {tuple(obj)!r}")
    return assignment.lattice.leq(object_c, subject_c)


def compile_to_tensor(assignment: ClassAssignment,
                      base: AccessTensor) -> AccessTensor:
    """Materialize the flow policy: True where flow is allowed, explicit False
    where a pair is assigned but flow is denied, untouched elsewhere."""
    batch = []
    for subject in assignment.subject_class:
        for (fname, otuple) in assignment.pair_class:
            allowed = flow_allowed(assignment, subject, fname, otuple)
            batch.append((subject, fname, otuple,
                          ENTRY_TRUE if allowed else ENTRY_FALSE))
    return base.with_entries(batch)


# --- policy text -------------------------------------------------------------------

def load_lattice_policy(text: str) -> ClassAssignment:
    """Parse lattice policy text.

    Grammar (one statement per line, ``#`` comments):

        LEVEL <rank> <name>
        COMPARTMENT <token>
        SUBJECTCLASS <subject> <level> [compartments...]
        PAIRCLASS <function> <obj1[,obj2,...]|-> <level> [compartments...]
        MODE {confidentiality|integrity}

    <level> may be the numeric rank or a declared level name.
    """
    levels: dict[int, str] = {}
    compartments: set[str] = set()
    subject_class: dict[str, SecurityClass] = {}
    pair_class: dict[tuple, SecurityClass] = {}
    mode = "confidentiality"

    def resolve_level(token: str, lineno: int) -> int:
        if token.isdigit():
            rank = int(token)
            if rank not in levels:
                raise PolicyParseError(f"undeclared level rank {rank}", lineno)
            return rank
        for rank, name in levels.items():
            if name == token:
                return rank
        raise PolicyParseError(f"undeclared level {token!r}", lineno)

    def resolve_compartments(tokens: list[str], lineno: int) -> frozenset:
        for token in tokens:
            if token not in compartments:
                raise PolicyParseError(f"undeclared compartment {token!r}", lineno)
        return frozenset(tokens)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        keyword = parts[0]
        try:
            if keyword == "LEVEL":
                if len(parts) != 3 or not parts[1].isdigit():
                    raise PolicyParseError("LEVEL expects <rank> <name>", lineno)
                levels[int(parts[1])] = check_token(parts[2], "level name")
            elif keyword == "COMPARTMENT":
                if len(parts) != 2:
                    raise PolicyParseError("COMPARTMENT expects <token>", lineno)
                compartments.add(check_token(parts[1], "compartment"))
            elif keyword == "SUBJECTCLASS":
                if len(parts) < 3:
                    raise PolicyParseError(
                        "SUBJECTCLASS expects <subject> <level> [compartments...]", lineno)
                rank = resolve_level(parts[2], lineno)
                subject_class[parts[1]] = SecurityClass(
                    rank, resolve_compartments(parts[3:], lineno))
            elif keyword == "PAIRCLASS":
                if len(parts) < 4:
                    raise PolicyParseError(
                        "PAIRCLASS expects <function> <objects|-> <level> [compartments...]",
                        lineno)
                refs = () if parts[2] == "-" else tuple(parts[2].split(","))
                rank = resolve_level(parts[3], lineno)
                pair_class[(parts[1], refs)] = SecurityClass(
                    rank, resolve_compartments(parts[4:], lineno))
            elif keyword == "MODE":
                if len(parts) != 2 or parts[1] not in ("confidentiality", "integrity"):
                    raise PolicyParseError(
                        "MODE expects confidentiality or integrity", lineno)
                mode = parts[1]
            else:
                raise PolicyParseError(f"unknown keyword {keyword!r}", lineno)
        except PolicyParseError:
            raise
        except Exception as exc:
            raise PolicyParseError(str(exc), lineno) from exc

    lattice = ClassLattice(tuple(levels), frozenset(compartments),
                           level_names=dict(levels))
    return ClassAssignment(lattice, subject_class, pair_class, mode=mode)

"""Two- and one-dimensional views of the access tensor.

Fixing one or two coordinates of the tensor yields the classic structures:
an authorization matrix (object fixed), a capability matrix (subject fixed),
a per-function access control matrix (function fixed), and the one-dimensional
function / subject / object lists.  Each view supports dropping NotApplicable
cells ("compression") and, where it makes sense, restricting the enumerated
domain.

Views are computed on demand from the sparse store and never persisted.
Object tuples are enumerated only over registered objects, and enumeration
refuses to run past a configurable cap rather than blow up silently.

Compression removes NotApplicable cells only: all-False rows and columns
stay visible, because a deny-by-default coordinate is still a meaningful
answer where an arity mismatch is not.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .act_core import AccessTensor, FunctionSig, TensorEntry
from .errors import EnumerationTooLarge, MeaninglessPair, UnknownFunction

DEFAULT_ENUMERATION_CAP = 10 ** 6


def render_tuple(refs: tuple) -> str:
    return ",".join(refs) if refs else "-"


def _tuple_universe(tensor: AccessTensor, arities: Iterable[int],
                    cap: int) -> list[tuple]:
    objects = sorted(tensor.objects)
    arities = sorted(set(arities))
    total = sum(len(objects) ** a for a in arities)
    if total > cap:
        raise EnumerationTooLarge(
            f"{total} object tuples exceed the cap of {cap}")
    universe: list[tuple] = []
    for arity in arities:
        universe.extend(itertools.product(objects, repeat=arity))
    return universe


@dataclass(frozen=True)
class AuthorizationMatrix:
    """All (subject, function) rights for one fixed object tuple."""

    object: tuple
    rows: tuple            # subject ids
    cols: tuple            # function names
    cells: Mapping = field(default_factory=dict)  # (subject, fname) -> TensorEntry

    def to_json(self) -> dict:
        return {
            "kind": "authorization_matrix",
            "object": render_tuple(self.object),
            "rows": list(self.rows),
            "cols": list(self.cols),
            "cells": [{"subject": s, "function": f, "entry": e.render()}
                      for (s, f), e in sorted(self.cells.items())],
        }


@dataclass(frozen=True)
class CapabilityMatrix:
    """All (function, object tuple) rights for one fixed subject."""

    subject: str
    rows: tuple            # function names
    cols: tuple            # object tuples
    cells: Mapping = field(default_factory=dict)  # (fname, otuple) -> TensorEntry

    def to_json(self) -> dict:
        return {
            "kind": "capability_matrix",
            "subject": self.subject,
            "rows": list(self.rows),
            "cols": [render_tuple(o) for o in self.cols],
            "cells": [{"function": f, "object": render_tuple(o), "entry": e.render()}
                      for (f, o), e in sorted(self.cells.items())],
        }


@dataclass(frozen=True)
class PerFunctionACM:
    """The Lampson-shaped matrix for one fixed function."""

    function: FunctionSig
    rows: tuple            # subject ids
    cols: tuple            # object tuples
    cells: Mapping = field(default_factory=dict)  # (subject, otuple) -> TensorEntry

    def to_json(self) -> dict:
        return {
            "kind": "access_control_matrix",
            "function": self.function.name,
            "arity": self.function.arity,
            "rows": list(self.rows),
            "cols": [render_tuple(o) for o in self.cols],
            "cells": [{"subject": s, "object": render_tuple(o), "entry": e.render()}
                      for (s, o), e in sorted(self.cells.items())],
        }


@dataclass(frozen=True)
class FunctionList:
    """Rights of one subject on one object tuple, per function."""

    subject: str
    object: tuple
    entries: Mapping = field(default_factory=dict)  # fname -> TensorEntry

    def to_json(self) -> dict:
        return {
            "kind": "function_list",
            "subject": self.subject,
            "object": render_tuple(self.object),
            "entries": [{"function": f, "entry": e.render()}
                        for f, e in sorted(self.entries.items())],
        }


@dataclass(frozen=True)
class SubjectList:
    """Who holds rights on a fixed (function, object tuple) pair."""

    function: FunctionSig
    object: tuple
    entries: Mapping = field(default_factory=dict)  # subject -> TensorEntry
    restriction: frozenset | None = None

    def to_json(self) -> dict:
        return {
            "kind": "subject_list",
            "function": self.function.name,
            "object": render_tuple(self.object),
            "restriction": sorted(self.restriction) if self.restriction is not None else None,
            "entries": [{"subject": s, "entry": e.render()}
                        for s, e in sorted(self.entries.items())],
        }


@dataclass(frozen=True)
class ObjectList:
    """What one subject may run one function on, with any predicate limits."""

    subject: str
    function: FunctionSig
    entries: Mapping = field(default_factory=dict)  # otuple -> TensorEntry
    restriction: frozenset | None = None

    def to_json(self) -> dict:
        return {
            "kind": "object_list",
            "subject": self.subject,
            "function": self.function.name,
            "restriction": sorted(render_tuple(o) for o in self.restriction)
            if self.restriction is not None else None,
            "entries": [{"object": render_tuple(o), "entry": e.render()}
                        for o, e in sorted(self.entries.items())],
        }


# --- the six view constructors ---------------------------------------------------


def authorization_matrix(tensor: AccessTensor, obj: Iterable[str],
                         compress: bool = True) -> AuthorizationMatrix:
    obj = tensor.require_tuple(obj)
    subjects = tuple(sorted(tensor.subjects))
    if compress:
        names = tuple(sorted(n for n, sig in tensor.functions.items()
                             if sig.arity == len(obj)))
    else:
        names = tuple(sorted(tensor.functions))
    cells = {}
    for s in subjects:
        for name in names:
            entry = tensor.lookup(s, name, obj)
            if compress and entry.kind.value == "n/a":
                continue
            cells[(s, name)] = entry
    return AuthorizationMatrix(obj, subjects, names, cells)


def capability_matrix(tensor: AccessTensor, subject: str, compress: bool = True,
                      cap: int = DEFAULT_ENUMERATION_CAP) -> CapabilityMatrix:
    tensor.require_subject(subject)
    names = tuple(sorted(tensor.functions))
    universe = _tuple_universe(
        tensor, (sig.arity for sig in tensor.functions.values()), cap)
    cells = {}
    for name in names:
        arity = tensor.functions[name].arity
        for combo in universe:
            if compress and len(combo) != arity:
                continue
            cells[(name, combo)] = tensor.lookup(subject, name, combo)
    return CapabilityMatrix(subject, names, tuple(universe), cells)


def per_function_acm(tensor: AccessTensor, function, compress: bool = True,
                     cap: int = DEFAULT_ENUMERATION_CAP) -> PerFunctionACM:
    sig = tensor.require_function(function)
    subjects = tuple(sorted(tensor.subjects))
    if compress:
        universe = _tuple_universe(tensor, (sig.arity,), cap)
    else:
        universe = _tuple_universe(
            tensor, (s.arity for s in tensor.functions.values()), cap)
    cells = {}
    for s in subjects:
        for combo in universe:
            entry = tensor.lookup(s, sig, combo)
            if compress and entry.kind.value == "n/a":
                continue
            cells[(s, combo)] = entry
    return PerFunctionACM(sig, subjects, tuple(universe), cells)


def function_list(tensor: AccessTensor, subject: str,
                  obj: Iterable[str]) -> FunctionList:
    tensor.require_subject(subject)
    obj = tensor.require_tuple(obj)
    entries = {name: tensor.lookup(subject, name, obj)
               for name, sig in tensor.functions.items() if sig.arity == len(obj)}
    return FunctionList(subject, obj, entries)


def application_restricted_function_list(tensor: AccessTensor, app: Iterable[str],
                                         subject: str,
                                         obj: Iterable[str]) -> FunctionList:
    """function_list cut down to the functions one application exposes."""
    app = set(app)
    for name in app:
        if name not in tensor.functions:
            raise UnknownFunction(f"application function {name!r} is not registered")
    full = function_list(tensor, subject, obj)
    entries = {name: e for name, e in full.entries.items() if name in app}
    return FunctionList(subject, full.object, entries)


def subject_list(tensor: AccessTensor, function, obj: Iterable[str],
                 restriction: Iterable[str] | None = None) -> SubjectList:
    sig = tensor.require_function(function)
    obj = tensor.require_tuple(obj)
    if len(obj) != sig.arity:
        raise MeaninglessPair(
            f"function {sig.name!r} takes {sig.arity} objects, pair names {len(obj)}")
    domain = tensor.subjects if restriction is None \
        else tensor.subjects & set(restriction)
    entries = {s: tensor.lookup(s, sig, obj) for s in domain}
    return SubjectList(sig, obj, entries,
                       None if restriction is None else frozenset(restriction))


def object_list(tensor: AccessTensor, subject: str, function,
                restriction: Iterable[tuple] | None = None,
                cap: int = DEFAULT_ENUMERATION_CAP) -> ObjectList:
    tensor.require_subject(subject)
    sig = tensor.require_function(function)
    if restriction is None:
        universe = _tuple_universe(tensor, (sig.arity,), cap)
        frozen = None
    else:
        frozen = frozenset(tuple(o) for o in restriction)
        universe = sorted(o for o in frozen if len(o) == sig.arity)
        for combo in universe:
            tensor.require_tuple(combo)
    entries = {combo: tensor.lookup(subject, sig, combo) for combo in universe}
    return ObjectList(subject, sig, entries, frozen)


# --- report rendering --------------------------------------------------------------


def to_json_text(view) -> str:
    return json.dumps(view.to_json(), indent=2, sort_keys=True) + "\n"


def to_table_text(view) -> str:
    """Plain tabular report for terminals; one header line, one line per row."""
    payload = view.to_json()
    cells = payload["cells"] if "cells" in payload else payload["entries"]
    if not cells:
        return f"[{payload['kind']}] (empty)\n"
    columns = list(cells[0].keys())
    widths = {c: max(len(c), *(len(str(row[c])) for row in cells)) for c in columns}
    header = "  ".join(c.ljust(widths[c]) for c in columns)
    lines = [f"[{payload['kind']}]", header, "-" * len(header)]
    for row in cells:
        lines.append("  ".join(str(row[c]).ljust(widths[c]) for c in columns))
    return "\n".join(lines) + "\n"

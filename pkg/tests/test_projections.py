"""Projection views vs. a dense brute-force enumeration oracle.

The oracle looks at the tensor's raw parts only (never tensor.lookup or the
projection code): NotApplicable when tuple length differs from the arity,
else the stored entry, else False.
"""

from __future__ import annotations

import itertools
import random

import pytest

from fbac.act_core import (
    ENTRY_FALSE,
    ENTRY_TRUE,
    NOT_APPLICABLE,
    AccessTensor,
    EntryKind,
    FunctionSig,
    regex_predicate,
    true_with,
)
from fbac.errors import EnumerationTooLarge, MeaninglessPair, UnknownFunction
from fbac.projections import (
    application_restricted_function_list,
    authorization_matrix,
    capability_matrix,
    function_list,
    object_list,
    per_function_acm,
    subject_list,
    to_json_text,
    to_table_text,
)


def dense_value(tensor: AccessTensor, s: str, fname: str, combo: tuple):
    if len(combo) != tensor.functions[fname].arity:
        return NOT_APPLICABLE
    return dict(tensor.entries).get((s, fname, combo), ENTRY_FALSE)


def random_tensor(rng: random.Random) -> AccessTensor:
    subjects = [f"s{i}" for i in range(rng.randint(1, 5))]
    objects = [f"o{i}" for i in range(rng.randint(1, 5))]
    functions = [FunctionSig(f"f{i}", rng.randint(0, 2))
                 for i in range(rng.randint(1, 5))]
    t = AccessTensor(
        subjects=frozenset(subjects),
        functions={f.name: f for f in functions},
        objects=frozenset(objects),
    )
    batch = []
    for _ in range(rng.randint(0, 25)):
        s = rng.choice(subjects)
        sig = rng.choice(functions)
        combo = tuple(rng.choice(objects) for _ in range(sig.arity))
        entry = rng.choice([ENTRY_TRUE, ENTRY_FALSE,
                            true_with(regex_predicate(".*"))])
        batch.append((s, sig.name, combo, entry))
    return t.with_entries(batch)


def all_tuples(tensor: AccessTensor) -> list[tuple]:
    objs = sorted(tensor.objects)
    arities = sorted({sig.arity for sig in tensor.functions.values()})
    out = []
    for a in arities:
        out.extend(itertools.product(objs, repeat=a))
    return out


def test_authorization_matrix_compresses_wrong_arity_functions():
    t = AccessTensor(
        subjects=frozenset({"alice"}),
        functions={"grep": FunctionSig("grep", 1), "join": FunctionSig("join", 2)},
        objects=frozenset({"fileA"}),
    )
    view = authorization_matrix(t, ("fileA",), compress=True)
    assert view.cols == ("grep",)
    assert set(view.cells) == {("alice", "grep")}
    full = authorization_matrix(t, ("fileA",), compress=False)
    assert full.cells[("alice", "join")] is NOT_APPLICABLE


def test_empty_tensor_projects_all_false():
    t = AccessTensor(
        subjects=frozenset({"a", "b"}),
        functions={"read": FunctionSig("read", 1)},
        objects=frozenset({"x"}),
    )
    view = authorization_matrix(t, ("x",), compress=True)
    assert all(e is ENTRY_FALSE for e in view.cells.values())


def test_random_tensors_match_dense_oracle():
    rng = random.Random(31337)
    for _ in range(60):
        t = random_tensor(rng)
        subjects = sorted(t.subjects)
        names = sorted(t.functions)
        universe = all_tuples(t)

        obj = rng.choice(universe) if universe else ()
        authz = authorization_matrix(t, obj, compress=False)
        for s in subjects:
            for n in names:
                assert authz.cells[(s, n)] == dense_value(t, s, n, obj)

        s = rng.choice(subjects)
        cap_view = capability_matrix(t, s, compress=False)
        for n in names:
            for combo in universe:
                assert cap_view.cells[(n, combo)] == dense_value(t, s, n, combo)

        n = rng.choice(names)
        acm = per_function_acm(t, n, compress=False)
        for subj in subjects:
            for combo in universe:
                assert acm.cells[(subj, combo)] == dense_value(t, subj, n, combo)

        flist = function_list(t, s, obj)
        expected = {name for name, sig in t.functions.items()
                    if sig.arity == len(obj)}
        assert set(flist.entries) == expected
        for name in expected:
            assert flist.entries[name] == dense_value(t, s, name, obj)

        sig = t.functions[n]
        pair_obj = tuple(rng.choice(sorted(t.objects)) for _ in range(sig.arity))
        slist = subject_list(t, n, pair_obj)
        assert set(slist.entries) == set(subjects)
        for subj in subjects:
            assert slist.entries[subj] == dense_value(t, subj, n, pair_obj)

        olist = object_list(t, s, n)
        expected_tuples = set(itertools.product(sorted(t.objects), repeat=sig.arity))
        assert set(olist.entries) == expected_tuples
        for combo in expected_tuples:
            assert olist.entries[combo] == dense_value(t, s, n, combo)


def test_compression_soundness():
    rng = random.Random(7)
    for _ in range(20):
        t = random_tensor(rng)
        s = rng.choice(sorted(t.subjects))
        compressed = capability_matrix(t, s, compress=True)
        full = capability_matrix(t, s, compress=False)
        assert not any(e is NOT_APPLICABLE for e in compressed.cells.values())
        for key, entry in full.cells.items():
            if entry is not NOT_APPLICABLE:
                assert compressed.cells[key] == entry
        for key in compressed.cells:
            assert compressed.cells[key] == full.cells[key]


def test_slice_consistency():
    rng = random.Random(99)
    for _ in range(20):
        t = random_tensor(rng)
        s = rng.choice(sorted(t.subjects))
        n = rng.choice(sorted(t.functions))
        combo = rng.choice(all_tuples(t))
        a = authorization_matrix(t, combo, compress=False).cells[(s, n)]
        c = capability_matrix(t, s, compress=False).cells[(n, combo)]
        m = per_function_acm(t, n, compress=False).cells[(s, combo)]
        assert a == c == m


def test_function_list_application_restriction():
    t = AccessTensor(
        subjects=frozenset({"alice"}),
        functions={n: FunctionSig(n, 1) for n in ("search", "copy", "print")},
        objects=frozenset({"doc"}),
    ).with_entries([
        ("alice", "search", ("doc",), ENTRY_TRUE),
        ("alice", "print", ("doc",), ENTRY_TRUE),
    ])
    restricted = application_restricted_function_list(
        t, {"search", "copy"}, "alice", ("doc",))
    assert set(restricted.entries) == {"search", "copy"}
    assert restricted.entries["search"] is ENTRY_TRUE
    assert restricted.entries["copy"] is ENTRY_FALSE
    # the whole registry as the application = unrestricted list
    everything = application_restricted_function_list(
        t, set(t.functions), "alice", ("doc",))
    assert everything.entries == function_list(t, "alice", ("doc",)).entries
    with pytest.raises(UnknownFunction):
        application_restricted_function_list(t, {"ghost"}, "alice", ("doc",))


def test_subject_list_restriction_laws():
    rng = random.Random(5)
    t = random_tensor(rng)
    n = sorted(t.functions)[0]
    sig = t.functions[n]
    combo = tuple(sorted(t.objects))[:1] * sig.arity if sig.arity else ()
    combo = tuple(combo)
    unrestricted = subject_list(t, n, combo)
    assert subject_list(t, n, combo, restriction=t.subjects).entries \
        == unrestricted.entries
    assert subject_list(t, n, combo, restriction=set()).entries == {}


def test_subject_list_meaningless_pair():
    t = AccessTensor(
        subjects=frozenset({"a"}),
        functions={"join": FunctionSig("join", 2)},
        objects=frozenset({"x"}),
    )
    with pytest.raises(MeaninglessPair):
        subject_list(t, "join", ("x",))


def test_subject_list_audit_example():
    subjects = {f"emp{i}" for i in range(5)}
    t = AccessTensor(
        subjects=frozenset(subjects),
        functions={"read_context": FunctionSig("read_context", 1)},
        objects=frozenset({"docX"}),
    ).with_entries([
        ("emp1", "read_context", ("docX",), ENTRY_TRUE),
        ("emp3", "read_context", ("docX",), ENTRY_TRUE),
    ])
    view = subject_list(t, "read_context", ("docX",))
    granted = {s for s, e in view.entries.items() if e.grants}
    assert granted == {"emp1", "emp3"}


def test_object_list_directory_restriction():
    objects = {"cia/alpha", "cia/beta", "fbi/gamma"}
    t = AccessTensor(
        subjects=frozenset({"alice"}),
        functions={"grep": FunctionSig("grep", 1)},
        objects=frozenset(objects),
    ).with_entries([
        ("alice", "grep", ("cia/alpha",), true_with(regex_predicate(".*"))),
    ])
    subset = {(o,) for o in objects if o.startswith("cia/")}
    view = object_list(t, "alice", "grep", restriction=subset)
    assert set(view.entries) == subset
    assert view.entries[("cia/alpha",)].kind is EntryKind.TRUE_WITH
    # B* = O^arity equals unrestricted
    full = object_list(t, "alice", "grep")
    again = object_list(t, "alice", "grep",
                        restriction={(o,) for o in objects})
    assert full.entries == again.entries


def test_object_list_tuple_count_bound():
    t = AccessTensor(
        subjects=frozenset({"a"}),
        functions={"join": FunctionSig("join", 2)},
        objects=frozenset({"x", "y", "z"}),
    )
    view = object_list(t, "a", "join")
    assert len(view.entries) == 9


def test_enumeration_cap():
    t = AccessTensor(
        subjects=frozenset({"a"}),
        functions={"join": FunctionSig("join", 2)},
        objects=frozenset({f"o{i}" for i in range(40)}),
    )
    with pytest.raises(EnumerationTooLarge):
        object_list(t, "a", "join", cap=100)
    with pytest.raises(EnumerationTooLarge):
        capability_matrix(t, "a", cap=100)


def test_per_function_acm_reproduces_classic_matrix():
    # a classic 2-D read policy: rows subjects, columns objects
    t = AccessTensor(
        subjects=frozenset({"alice", "bob"}),
        functions={"read": FunctionSig("read", 1)},
        objects=frozenset({"f1", "f2"}),
    ).with_entries([
        ("alice", "read", ("f1",), ENTRY_TRUE),
        ("bob", "read", ("f2",), ENTRY_TRUE),
    ])
    acm = per_function_acm(t, "read", compress=True)
    assert acm.cells[("alice", ("f1",))] is ENTRY_TRUE
    assert acm.cells[("alice", ("f2",))] is ENTRY_FALSE
    assert acm.cells[("bob", ("f2",))] is ENTRY_TRUE
    assert acm.cells[("bob", ("f1",))] is ENTRY_FALSE


def test_report_rendering_smoke():
    t = AccessTensor(
        subjects=frozenset({"alice"}),
        functions={"read": FunctionSig("read", 1)},
        objects=frozenset({"f1"}),
    ).with_entries([("alice", "read", ("f1",), ENTRY_TRUE)])
    for view in (authorization_matrix(t, ("f1",)), capability_matrix(t, "alice"),
                 per_function_acm(t, "read"), function_list(t, "alice", ("f1",)),
                 subject_list(t, "read", ("f1",)), object_list(t, "alice", "read")):
        assert "read" in to_json_text(view)
        assert "TRUE" in to_table_text(view)

"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines live.
Every expected value is computed by an oracle that does not share code with
the path under test (dense enumeration, the stdlib regex engine, explicit
set arithmetic, scripted scenarios).
"""

from __future__ import annotations

import itertools
import random
import re
import statistics
import time

from fbac.act_core import (
    ENTRY_FALSE,
    ENTRY_TRUE,
    NOT_APPLICABLE,
    AccessTensor,
    FunctionSig,
    Invocation,
    Outcome,
    canonical_serialize,
    regex_predicate,
    true_with,
)
from fbac.adoc import Atom, AtomicDocument, atom_ref, insert_atom, parse, remove_atom, serialize, validate_document
from fbac.errors import AccessDenied
from fbac.guarded import (
    Catalog,
    GuardedFunctionSpec,
    compose,
    copy,
    default_catalog,
    force_cc_email,
    redacted_view,
    search,
    view_text,
    watermark_print,
)
from fbac.lattice import (
    ClassAssignment,
    ClassLattice,
    SecurityClass,
    compile_to_tensor,
    dominated_by,
    flow_allowed,
)
from fbac.monitor import MonitorService, Principal, load_workspace
from fbac.projections import (
    application_restricted_function_list,
    authorization_matrix,
    capability_matrix,
    function_list,
    object_list,
    per_function_acm,
    subject_list,
)
from fbac.rematch import escape_literal, int_le_pattern

from docgen import random_document
from test_rematch import gen_pattern


def report(name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[ACCEPTANCE] {name}: {status}{suffix}")
    assert ok, f"{name}{suffix}"


# --- 1. arity law -----------------------------------------------------------------

def test_arity_law_exhaustive():
    started = time.perf_counter()
    subjects = ["s1", "s2", "s3"]
    functions = [FunctionSig("f0", 0), FunctionSig("f1", 1),
                 FunctionSig("f2a", 2), FunctionSig("f2b", 2)]
    objects = ["o1", "o2", "o3"]
    tensor = AccessTensor(
        subjects=frozenset(subjects),
        functions={f.name: f for f in functions},
        objects=frozenset(objects),
    ).with_entries([
        ("s1", "f1", ("o1",), ENTRY_TRUE),
        ("s2", "f2a", ("o1", "o2"), ENTRY_FALSE),
        ("s3", "f0", (), true_with(regex_predicate(".*"))),
    ])
    checked = 0
    exceptions = 0
    for s in subjects:
        for sig in functions:
            for length in range(0, 4):
                for combo in itertools.product(objects, repeat=length):
                    entry = tensor.lookup(s, sig.name, combo)
                    if (entry is NOT_APPLICABLE) != (length != sig.arity):
                        exceptions += 1
                    checked += 1
    elapsed = time.perf_counter() - started
    report("arity-law", exceptions == 0 and elapsed < 1.0,
           f"{checked} coordinates, {elapsed:.3f}s")


# --- 2. projection oracle equivalence ------------------------------------------------

def _random_tensor(rng: random.Random) -> AccessTensor:
    subjects = [f"s{i}" for i in range(rng.randint(1, 5))]
    objects = [f"o{i}" for i in range(rng.randint(1, 5))]
    functions = [FunctionSig(f"f{i}", rng.randint(0, 2))
                 for i in range(rng.randint(1, 5))]
    tensor = AccessTensor(
        subjects=frozenset(subjects),
        functions={f.name: f for f in functions},
        objects=frozenset(objects),
    )
    batch = []
    for _ in range(rng.randint(0, 30)):
        sig = rng.choice(functions)
        combo = tuple(rng.choice(objects) for _ in range(sig.arity))
        entry = rng.choice([ENTRY_TRUE, ENTRY_FALSE,
                            true_with(regex_predicate("x.*"))])
        batch.append((rng.choice(subjects), sig.name, combo, entry))
    return tensor.with_entries(batch)


def test_projection_oracle_equivalence():
    started = time.perf_counter()
    rng = random.Random(2718)
    mismatches = 0
    for _ in range(200):
        tensor = _random_tensor(rng)
        subjects = sorted(tensor.subjects)
        names = sorted(tensor.functions)
        objects = sorted(tensor.objects)
        raw_entries = dict(tensor.entries)
        arities = sorted({sig.arity for sig in tensor.functions.values()})
        universe = [c for a in arities for c in itertools.product(objects, repeat=a)]

        def dense(s, n, combo):
            if len(combo) != tensor.functions[n].arity:
                return NOT_APPLICABLE
            return raw_entries.get((s, n, combo), ENTRY_FALSE)

        obj = rng.choice(universe)
        authz = authorization_matrix(tensor, obj, compress=False)
        for s in subjects:
            for n in names:
                if authz.cells[(s, n)] != dense(s, n, obj):
                    mismatches += 1

        s = rng.choice(subjects)
        cap_m = capability_matrix(tensor, s, compress=False)
        for n in names:
            for combo in universe:
                if cap_m.cells[(n, combo)] != dense(s, n, combo):
                    mismatches += 1

        n = rng.choice(names)
        acm = per_function_acm(tensor, n, compress=False)
        for subj in subjects:
            for combo in universe:
                if acm.cells[(subj, combo)] != dense(subj, n, combo):
                    mismatches += 1

        flist = function_list(tensor, s, obj)
        expected_names = {x for x in names if tensor.functions[x].arity == len(obj)}
        if set(flist.entries) != expected_names or any(
                flist.entries[x] != dense(s, x, obj) for x in expected_names):
            mismatches += 1
        app = set(rng.sample(names, rng.randint(0, len(names))))
        restricted = application_restricted_function_list(tensor, app, s, obj)
        if set(restricted.entries) != expected_names & app:
            mismatches += 1

        sig = tensor.functions[n]
        pair = tuple(rng.choice(objects) for _ in range(sig.arity))
        slist = subject_list(tensor, n, pair)
        if set(slist.entries) != set(subjects) or any(
                slist.entries[x] != dense(x, n, pair) for x in subjects):
            mismatches += 1

        olist = object_list(tensor, s, n)
        expected_tuples = set(itertools.product(objects, repeat=sig.arity))
        if set(olist.entries) != expected_tuples or any(
                olist.entries[c] != dense(s, n, c) for c in expected_tuples):
            mismatches += 1
    elapsed = time.perf_counter() - started
    report("projection-oracle-equivalence", mismatches == 0 and elapsed < 30.0,
           f"200 tensors, 6 projections, {elapsed:.2f}s")


# --- 3. regular-expression decision semantics ----------------------------------------

def test_re_fbac_agreement_with_independent_engine():
    rng = random.Random(31415)
    tensor_base = AccessTensor(
        subjects=frozenset({"s"}),
        functions={"f": FunctionSig("f", 0)},
    )
    disagreements = 0
    for trial in range(500):
        options = tuple(
            (rng.choice(["count", "quiet", "mode", "ctx"]),
             rng.choice([None, str(rng.randint(0, 99)), "on", "x;y", "a=b"]))
            for _ in range(rng.randint(0, 3)))
        # option keys must be unique-ish tokens; duplicates are legal, keep as-is
        stdin = bytes(rng.randrange(256) for _ in range(rng.randint(0, 12))) \
            if rng.random() < 0.3 else " ".join(
                rng.choice(["alpha", "beta", "42"]) for _ in range(rng.randint(0, 4))).encode()
        inv = Invocation(options=options, stdin=stdin)
        serialized = canonical_serialize(inv)
        if trial % 3 == 0:
            pattern = escape_literal(serialized)        # guaranteed-match case
        elif trial % 3 == 1:
            pattern, _sample = gen_pattern(rng, 3)      # arbitrary dialect pattern
        else:
            prefix_len = rng.randint(0, len(serialized))
            pattern = escape_literal(serialized[:prefix_len]) + ".*"
        tensor = tensor_base.with_entries(
            [("s", "f", (), true_with(regex_predicate(pattern)))])
        decision = tensor.decide("s", "f", (), inv)
        expected = re.fullmatch(pattern, serialized,
                                re.DOTALL | re.ASCII) is not None
        if decision.allowed != expected:
            disagreements += 1
    report("re-fbac-semantics", disagreements == 0, "500 predicate/invocation pairs")


# --- 4. lattice laws and compile soundness --------------------------------------------

def test_lattice_laws_and_compile_soundness():
    lattice = ClassLattice(levels=(0, 1, 2), compartments=frozenset({"A", "B"}))
    classes = lattice.all_classes()
    violations = 0
    pairs = 0
    for c1 in classes:
        if not lattice.leq(c1, c1):
            violations += 1
        for c2 in classes:
            pairs += 1
            if lattice.leq(c1, c2) and lattice.leq(c2, c1) and c1 != c2:
                violations += 1
            j, m = lattice.join(c1, c2), lattice.meet(c1, c2)
            if not (lattice.leq(c1, j) and lattice.leq(c2, j)):
                violations += 1
            if not (lattice.leq(m, c1) and lattice.leq(m, c2)):
                violations += 1
            if lattice.join(c1, c2) != lattice.join(c2, c1):
                violations += 1
            if lattice.meet(c1, lattice.join(c1, c2)) != c1:
                violations += 1
            if lattice.join(c1, lattice.meet(c1, c2)) != c1:
                violations += 1
            for c3 in classes:
                if lattice.leq(c1, c2) and lattice.leq(c2, c3) \
                        and not lattice.leq(c1, c3):
                    violations += 1

    rng = random.Random(1618)
    base = AccessTensor(
        subjects=frozenset({"s1", "s2"}),
        functions={"f1": FunctionSig("f1", 1), "f2": FunctionSig("f2", 1)},
        objects=frozenset({"o1", "o2"}),
    )
    compile_mismatches = 0
    for _ in range(100):
        assignment = ClassAssignment(
            lattice,
            subject_class={s: rng.choice(classes) for s in ("s1", "s2")},
            pair_class={(f, (o,)): rng.choice(classes)
                        for f in ("f1", "f2") for o in ("o1", "o2")},
        )
        compiled = compile_to_tensor(assignment, base)
        for s in ("s1", "s2"):
            for f in ("f1", "f2"):
                for o in ("o1", "o2"):
                    allowed = compiled.decide(s, f, (o,), Invocation()).allowed
                    if allowed != flow_allowed(assignment, s, f, (o,)):
                        compile_mismatches += 1
    report("lattice-laws-and-compile",
           violations == 0 and compile_mismatches == 0 and pairs == 144,
           f"{pairs} ordered pairs, 100 assignments")


# --- 5. consistency conditions ---------------------------------------------------------

def test_consistency_conditions_fuzzed():
    rng = random.Random(303)
    mismatches = 0
    for _ in range(300):
        doc = random_document(rng)
        accepted = validate_document(doc).accepted
        expected = True
        for atom in doc.atoms:
            if atom.granted_functions() & doc.forbidden_functions:
                expected = False
            if atom.classification is not None and doc.classification is not None \
                    and not dominated_by(atom.classification, doc.classification):
                expected = False
        if accepted != expected:
            mismatches += 1
    report("consistency-conditions", mismatches == 0, "300 fuzzed documents")


# --- 6. no-leak property ----------------------------------------------------------------

GUARD_FUNCTIONS = ("read", "search", "print", "email", "copy_byte_restricted",
                   "copy_character_limited", "copy_sensitive_word_exclusion",
                   "copy_with_citation")


def _leak_fixture(rng: random.Random):
    atoms = []
    for i in range(rng.randint(2, 5)):
        lines = [f"atom{i} line{j} tok{rng.randrange(10 ** 6)}"
                 for j in range(rng.randint(1, 4))]
        atoms.append(Atom(id=f"a{i}", content="\n".join(lines)))
    doc = AtomicDocument(id="doc", atoms=tuple(atoms))
    dest = AtomicDocument(id="dest", atoms=(Atom(id="seed", content="seed text"),))
    grants = {}
    batch = []
    for atom in doc.atoms:
        for fn in GUARD_FUNCTIONS:
            allowed = rng.random() < 0.5
            grants[(fn, atom.id)] = allowed
            batch.append(("subj", fn, (atom_ref(doc, atom),),
                          ENTRY_TRUE if allowed else ENTRY_FALSE))
    catalog = default_catalog()
    objects = {doc.id, dest.id} | {atom_ref(doc, a) for a in doc.atoms} \
        | {atom_ref(dest, a) for a in dest.atoms}
    tensor = AccessTensor(
        subjects=frozenset({"subj"}),
        functions=catalog.sigs(),
        objects=frozenset(objects),
    ).with_entries(batch)
    return doc, dest, tensor, grants


def _lines_of(atoms) -> set:
    out = set()
    for atom in atoms:
        out.update(atom.content.splitlines())
    return out


def test_no_leak_property():
    rng = random.Random(4242)
    leaks = 0
    for _ in range(100):
        doc, dest, tensor, grants = _leak_fixture(rng)

        # search: denied atoms contribute no emitted line
        result = search(tensor, "subj", doc, "line", context=rng.randint(0, 3))
        denied_lines = _lines_of(a for a in doc.atoms
                                 if not grants[("search", a.id)])
        for hit in result.hits:
            for line in (*hit.before, hit.line, *hit.after):
                if line in denied_lines:
                    leaks += 1

        # view: read-denied atoms render as markers only
        view_lines = set(view_text(redacted_view(tensor, "subj", doc)).splitlines())
        denied_lines = _lines_of(a for a in doc.atoms if not grants[("read", a.id)])
        leaks += len(view_lines & denied_lines)

        # print: content needs print and read
        try:
            artifact = watermark_print(tensor, "subj", doc, "WM")
            printed = set(artifact.text.splitlines())
            denied_lines = _lines_of(
                a for a in doc.atoms
                if not (grants[("print", a.id)] and grants[("read", a.id)]))
            leaks += len(printed & denied_lines)
        except AccessDenied:
            pass

        # email: whole request refused unless every atom is emailable
        wanted = [a.id for a in doc.atoms if rng.random() < 0.7] or [doc.atoms[0].id]
        try:
            record = force_cc_email(tensor, "subj", doc, wanted,
                                    to=["x@org.test"], policy_cc="cc@org.test")
            body_lines = set(record.body.splitlines())
            denied_lines = _lines_of(
                a for a in doc.atoms if not grants[("read", a.id)])
            leaks += len(body_lines & denied_lines)
        except AccessDenied:
            pass

        # copy variants: atomically refused when any atom lacks the grant
        for variant in ("byte_restricted", "character_limited",
                        "sensitive_word_exclusion", "with_citation"):
            try:
                result, _dest2 = copy(
                    tensor, "subj", doc, wanted, dest, variant,
                    max_bytes=10 ** 6, max_chars=10 ** 6, blocklist=("tok",))
                if any(not grants[(f"copy_{variant}", aid)] for aid in wanted):
                    leaks += 1  # should have been refused outright
            except AccessDenied:
                pass
    report("no-leak", leaks == 0, "100 randomized triples, all guarded functions")


# --- 7. context bounding ------------------------------------------------------------------

def test_context_bounding():
    lines = "\n".join(f"filler {i}" if i != 10 else "needle here"
                      for i in range(20))
    doc = AtomicDocument(id="doc", atoms=(Atom(id="a1", content=lines),))
    predicate = true_with(regex_predicate(
        f"pattern=[^;]*;context={int_le_pattern(5)}(;.*)?\\nSTDIN:.*"))
    catalog = default_catalog()
    tensor = AccessTensor(
        subjects=frozenset({"agent"}),
        functions=catalog.sigs(),
        objects=frozenset({"doc", "doc/a1"}),
    ).with_entries([("agent", "search", ("doc/a1",), predicate)])

    at_limit = search(tensor, "agent", doc, "needle", context=5)
    over_limit = search(tensor, "agent", doc, "needle", context=6)
    ok = (at_limit.found and len(at_limit.hits) == 1
          and len(at_limit.hits[0].before) <= 5
          and len(at_limit.hits[0].after) <= 5
          and not over_limit.found and over_limit.hits == ())
    report("context-bounding", ok,
           "context=5 allowed with <=5 lines, context=6 denied")


# --- 8. citation cascade --------------------------------------------------------------------

def test_citation_cascade():
    source = AtomicDocument(id="src", atoms=(
        Atom(id="a1", content="quotable insight"),))
    dest = AtomicDocument(id="dest", atoms=(Atom(id="seed", content="draft"),))
    catalog = default_catalog()
    tensor = AccessTensor(
        subjects=frozenset({"author"}),
        functions=catalog.sigs(),
        objects=frozenset({"src", "dest", "src/a1", "dest/seed"}),
    ).with_entries([
        ("author", "copy_with_citation", ("src/a1",), ENTRY_TRUE),
        ("author", "read", ("dest/seed",), ENTRY_TRUE),
    ])
    result, updated = copy(tensor, "author", source, ["a1"], dest, "with_citation")
    cite_id, quote_id = result.inserted_atom_ids
    tensor = tensor.create_object(f"dest/{quote_id}") \
                   .create_object(f"dest/{cite_id}") \
                   .enter_entry("author", "read", (f"dest/{quote_id}",), ENTRY_TRUE) \
                   .enter_entry("author", "read", (f"dest/{cite_id}",), ENTRY_TRUE)

    with_quote = {s.atom_id for s in redacted_view(tensor, "author", updated).segments}
    broken = remove_atom(updated, cite_id)
    without = {s.atom_id for s in redacted_view(tensor, "author", broken).segments}
    restored = insert_atom(broken, updated.atom(cite_id))
    back = {s.atom_id for s in redacted_view(tensor, "author", restored).segments}
    ok = (quote_id in with_quote and quote_id not in without and quote_id in back)
    report("citation-cascade", ok,
           "quote vanished on citation removal, returned on restoration")


# --- 9. composition isolation -----------------------------------------------------------------

def test_composition_isolation():
    catalog = Catalog([
        GuardedFunctionSpec(FunctionSig("cat", 1),
                            runner=lambda objs, stdin, resolve: resolve(objs[0])),
        GuardedFunctionSpec(FunctionSig("upper", 0),
                            runner=lambda objs, stdin, resolve: stdin.upper()),
        GuardedFunctionSpec(FunctionSig("head", 0),
                            runner=lambda objs, stdin, resolve: stdin[:10]),
    ])
    base = list(catalog.names())
    composites = [compose(catalog, f, g).name for f in base for g in base]
    tensor = AccessTensor(
        subjects=frozenset({"alice"}),
        functions=catalog.sigs(),
        objects=frozenset({"docX"}),
    ).with_entries([
        ("alice", name, tuple(["docX"] * catalog.get(name).sig.arity), ENTRY_TRUE)
        for name in base])
    grants_leaked = 0
    for name in composites:
        objs = tuple(["docX"] * catalog.get(name).sig.arity)
        if tensor.decide("alice", name, objs, Invocation()).allowed:
            grants_leaked += 1
    report("composition-isolation", grants_leaked == 0,
           f"{len(composites)} composites over a 3-function registry")


# --- 10. document round-trip --------------------------------------------------------------------

def test_document_round_trip():
    rng = random.Random(55)
    failures = 0
    for i in range(200):
        doc = random_document(rng, doc_id=f"doc{i}")
        if parse(serialize(doc)) != doc:
            failures += 1
    report("adoc-round-trip", failures == 0, "200 generated documents")


# --- 11. audit totality -----------------------------------------------------------------------

def _session_service() -> MonitorService:
    doc = AtomicDocument(id="doc", atoms=(
        Atom(id="a1", content="alpha content"),
        Atom(id="a2", content="beta content"),
    ))
    dest = AtomicDocument(id="dest", atoms=(Atom(id="seed", content="x"),))
    policy = (
        "SUBJECT worker\n"
        "ENTRY worker read doc/a1 TRUE\n"
        "ENTRY worker search doc/a1 TRUE\n"
        "ENTRY worker search doc/a2 TRUE\n"
        "ENTRY worker copy_with_citation doc/a1 TRUE\n"
        "ENTRY worker email doc/a1 TRUE\n"
        "ENTRY worker grep_in_standard - TRUE\n"
    )
    catalog, tensor, docs = load_workspace([policy], [doc, dest])
    return MonitorService(catalog, tensor, docs)


def _run_session(service: MonitorService, calls: int = 1000) -> list[str]:
    rng = random.Random(999)
    principal = Principal("worker", "Viewer", "t")
    outcomes = []
    for _ in range(calls):
        roll = rng.random()
        if roll < 0.25:
            result = service.invoke(principal, "read",
                                    [rng.choice(["doc", "ghost"])])
        elif roll < 0.5:
            result = service.invoke(principal, "search", ["doc"],
                                    {"pattern": rng.choice(["alpha", "beta", "zz"]),
                                     "context": str(rng.randint(0, 3))})
        elif roll < 0.65:
            result = service.invoke(principal, "print", ["doc"])
        elif roll < 0.8:
            result = service.invoke(principal, "grep_in_standard", [],
                                    {"pattern": "a"}, b"alpha\nbeta")
        elif roll < 0.9:
            result = service.invoke(principal, "email", ["doc", "a1"],
                                    {"to": "x@org.test"})
        else:
            result = service.invoke(principal, "copy_with_citation",
                                    ["doc", "a1"], {"dest": "dest"})
        outcomes.append(result.outcome)
    return outcomes


def test_audit_totality_and_replay():
    service = _session_service()
    outcomes = _run_session(service)
    records = service.audit.query()
    sequences = [r.sequence for r in records]
    replay_outcomes = _run_session(_session_service())
    ok = (len(outcomes) == 1000 and len(records) == 1000
          and sequences == list(range(1, 1001))
          and [r.outcome for r in records] == outcomes
          and replay_outcomes == outcomes)
    report("audit-totality", ok, "1000 calls, gap-free, replay identical")


# --- 12. decision latency ------------------------------------------------------------------------

def test_decision_latency():
    rng = random.Random(7777)
    subjects = [f"s{i}" for i in range(50)]
    objects = [f"o{i}" for i in range(100)]
    functions = [FunctionSig(f"f{i}", i % 3) for i in range(20)]
    coordinates = set()
    while len(coordinates) < 100_000:
        sig = functions[rng.randrange(len(functions))]
        combo = tuple(objects[rng.randrange(100)] for _ in range(sig.arity))
        coordinates.add((subjects[rng.randrange(50)], sig.name, combo))
    predicate = true_with(regex_predicate("count=[0-9]{1,3}\\nSTDIN:.*"))
    mix = [ENTRY_TRUE, ENTRY_FALSE, predicate, ENTRY_TRUE, ENTRY_FALSE]
    batch = [(s, fname, combo, mix[i % len(mix)])
             for i, (s, fname, combo) in enumerate(coordinates)]
    tensor = AccessTensor(
        subjects=frozenset(subjects),
        functions={f.name: f for f in functions},
        objects=frozenset(objects),
    ).with_entries(batch)
    assert len(tensor.entries) == 100_000

    inv = Invocation(options=(("count", "5"),))
    probes = []
    for _ in range(10_000):
        sig = functions[rng.randrange(len(functions))]
        combo = tuple(objects[rng.randrange(100)] for _ in range(sig.arity))
        probes.append((subjects[rng.randrange(50)], sig.name, combo))
    timings = []
    for s, fname, combo in probes:
        t0 = time.perf_counter_ns()
        tensor.decide(s, fname, combo, inv)
        timings.append(time.perf_counter_ns() - t0)
    median_us = statistics.median(timings) / 1000.0
    report("decision-latency", median_us < 50.0,
           f"median {median_us:.2f}us over 10^4 lookups in 10^5 entries")

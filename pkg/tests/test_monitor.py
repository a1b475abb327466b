"""Reference monitor: identity, defaults, dispatch, audit pairing, replay."""

from __future__ import annotations

import random

import pytest

from fbac.act_core import ENTRY_TRUE, EntryKind, Invocation
from fbac.adoc import Atom, AtomicDocument, atom_ref
from fbac.errors import (
    InconsistentDefaults,
    NotASubset,
    PolicyParseError,
    Unauthenticated,
    UnknownFunction,
)
from fbac.guarded import compose
from fbac.monitor import (
    AuditLog,
    DENY_REFUSAL,
    MonitorService,
    Principal,
    QuestionnaireAnswers,
    defaults_from_questionnaire,
    derive_coauthor_policy,
    load_identities,
    load_workspace,
)

IDENTITIES = """\
# token  subject  role
PRINCIPAL tok-alice alice Author
PRINCIPAL tok-bob bob CoAuthor
PRINCIPAL tok-viv viv Viewer
"""


def sample_doc(doc_id="doc") -> AtomicDocument:
    return AtomicDocument(id=doc_id, atoms=(
        Atom(id="a1", content="alpha lines here\nsecond line"),
        Atom(id="a2", kind="image-ref", content="media/figure.png"),
        Atom(id="a3", content="gamma content"),
    ))


def build_service(extra_policy="", docs=None, identities=IDENTITIES,
                  **kwargs) -> MonitorService:
    docs = docs if docs is not None else [sample_doc(), sample_doc("dest")]
    policy = ["SUBJECT alice\nSUBJECT bob\nSUBJECT viv\n" + extra_policy]
    catalog, tensor, doc_map = load_workspace(policy, docs)
    return MonitorService(catalog, tensor, doc_map,
                          identities=load_identities(identities), **kwargs)


def grant(service: MonitorService, subject, function, doc_id, atom_id,
          entry=ENTRY_TRUE):
    ref = f"{doc_id}/{atom_id}"
    service.swap_tensor(service.tensor.enter_entry(subject, function, (ref,), entry))


# --- identity -----------------------------------------------------------------------

def test_authenticate():
    service = build_service()
    principal = service.authenticate("tok-alice")
    assert principal.subject == "alice" and principal.role == "Author"
    with pytest.raises(Unauthenticated):
        service.authenticate("nope")
    with pytest.raises(Unauthenticated):
        service.authenticate("")


def test_identity_file_injectivity():
    with pytest.raises(PolicyParseError):
        load_identities("PRINCIPAL t1 alice Author\nPRINCIPAL t1 bob Viewer\n")
    with pytest.raises(PolicyParseError):
        load_identities("PRINCIPAL t1 alice Author\nPRINCIPAL t2 alice Viewer\n")
    with pytest.raises(PolicyParseError):
        load_identities("PRINCIPAL t1 alice God\n")


# --- questionnaire defaults -----------------------------------------------------------

def test_defaults_not_printable_forbids_print_everywhere():
    q = QuestionnaireAnswers(printable=False)
    batch = defaults_from_questionnaire(q, sample_doc(), "alice")
    assert "print" in batch.document.forbidden_functions
    for atom in batch.document.atoms:
        assert "print" not in atom.granted_functions()
    assert not any(f == "print" for (_s, f, _o, _e) in batch.entries)


def test_defaults_all_true_grants_full_catalog():
    q = QuestionnaireAnswers(printable=True, copyable=True, emailable=True,
                             default_search_context=5)
    batch = defaults_from_questionnaire(q, sample_doc(), "alice")
    granted = {f for (_s, f, _o, _e) in batch.entries}
    assert granted == {"read", "search", "print", "email",
                       "copy_byte_restricted", "copy_character_limited",
                       "copy_sensitive_word_exclusion", "copy_with_citation"}
    search_entries = [e for (_s, f, _o, e) in batch.entries if f == "search"]
    assert all(e.kind is EntryKind.TRUE_WITH for e in search_entries)


def test_defaults_always_validate():
    rng = random.Random(9)
    for _ in range(40):
        q = QuestionnaireAnswers(
            printable=rng.random() < 0.5,
            copyable=rng.random() < 0.5,
            emailable=rng.random() < 0.5,
            default_search_context=rng.randint(0, 9),
        )
        batch = defaults_from_questionnaire(q, sample_doc(), "alice")
        from fbac.adoc import validate_document
        assert validate_document(batch.document).accepted


def test_defaults_inconsistent_with_prior_atom_policy():
    from fbac.adoc import PolicyLine
    doc = AtomicDocument(id="d", atoms=(
        Atom(id="a1", content="x",
             policy=(PolicyLine("bob", "print", ENTRY_TRUE),)),))
    with pytest.raises(InconsistentDefaults):
        defaults_from_questionnaire(QuestionnaireAnswers(printable=False), doc, "alice")


def test_defaults_search_predicate_enforces_context_ceiling():
    q = QuestionnaireAnswers(default_search_context=3)
    batch = defaults_from_questionnaire(q, sample_doc(), "alice")
    doc = batch.document
    _catalog, tensor, _docs = load_workspace([], [doc])
    from fbac.guarded import search
    ok = search(tensor, "alice", doc, "alpha", context=3)
    assert ok.found
    blocked = search(tensor, "alice", doc, "alpha", context=4)
    assert not blocked.found


# --- co-author derivation --------------------------------------------------------------

def test_coauthor_subset_by_construction():
    batch = defaults_from_questionnaire(QuestionnaireAnswers(), sample_doc(), "alice")
    derived = derive_coauthor_policy(batch.entries, "bob", removals={"print"})
    author_functions = {f for (_s, f, _o, _e) in batch.entries}
    coauthor_functions = {f for (_s, f, _o, _e) in derived}
    assert coauthor_functions == author_functions - {"print"}
    assert all(s == "bob" for (s, _f, _o, _e) in derived)


def test_coauthor_empty_removals_equal_grants():
    batch = defaults_from_questionnaire(QuestionnaireAnswers(), sample_doc(), "alice")
    derived = derive_coauthor_policy(batch.entries, "bob")
    assert {(f, o) for (_s, f, o, _e) in derived} \
        == {(f, o) for (_s, f, o, _e) in batch.entries}


def test_coauthor_removals_must_be_subset():
    batch = defaults_from_questionnaire(
        QuestionnaireAnswers(copyable=False), sample_doc(), "alice")
    with pytest.raises(NotASubset):
        derive_coauthor_policy(batch.entries, "bob", removals={"copy_with_citation"})


def test_coauthor_random_removals_keep_inclusion():
    rng = random.Random(21)
    batch = defaults_from_questionnaire(QuestionnaireAnswers(), sample_doc(), "alice")
    functions = sorted({f for (_s, f, _o, _e) in batch.entries})
    for _ in range(30):
        removals = set(rng.sample(functions, rng.randint(0, len(functions))))
        derived = derive_coauthor_policy(batch.entries, "bob", removals)
        assert {f for (_s, f, _o, _e) in derived} <= set(functions)


# --- invoke + audit ---------------------------------------------------------------------

def test_invoke_view_mixed_grants_one_audit_record():
    service = build_service()
    grant(service, "viv", "read", "doc", "a1")
    principal = service.authenticate("tok-viv")
    result = service.invoke(principal, "read", ["doc"])
    assert result.outcome == "allow"
    kinds = {s["atom"]: s["kind"] for s in result.payload["segments"]}
    assert kinds == {"a1": "content", "a2": "blurred-image", "a3": "redacted"}
    assert len(service.audit) == 1
    assert result.audit_sequence == 1


def test_invoke_deny_emits_audit_with_zero_output():
    service = build_service()
    principal = service.authenticate("tok-viv")
    result = service.invoke(principal, "print", ["doc"])
    assert result.outcome == "deny"
    assert result.payload == DENY_REFUSAL
    record = service.audit.query(outcome="deny")[0]
    assert record.output_size == 0 and record.function == "print"


def test_invoke_unknown_document_is_uniform_refusal():
    service = build_service()
    principal = service.authenticate("tok-viv")
    denied = service.invoke(principal, "read", ["ghost-doc"])
    forbidden = service.invoke(principal, "print", ["doc"])
    assert denied.outcome == forbidden.outcome == "deny"
    assert denied.payload == forbidden.payload


def test_invoke_unknown_function_raises():
    service = build_service()
    principal = service.authenticate("tok-viv")
    with pytest.raises(UnknownFunction):
        service.invoke(principal, "frobnicate", [])


def test_invoke_search_and_copy_round_trip():
    service = build_service()
    for atom in ("a1", "a3"):
        grant(service, "alice", "search", "doc", atom)
        grant(service, "alice", "copy_with_citation", "doc", atom)
    principal = service.authenticate("tok-alice")

    found = service.invoke(principal, "search", ["doc"],
                           {"pattern": "alpha", "context": "1"})
    assert found.outcome == "allow"
    assert found.payload["hits"][0]["atom"] == "a1"

    copied = service.invoke(principal, "copy_with_citation",
                            ["doc", "a1"], {"dest": "dest"})
    assert copied.outcome == "allow"
    cite_id, quote_id = copied.payload["inserted_atoms"]
    dest = service.document("dest")
    assert dest.atom(quote_id).links[0].target == cite_id
    assert len(service.audit) == 2


def test_invoke_email_uses_policy_cc_and_outbox(tmp_path):
    outbox = tmp_path / "outbox.jsonl"
    service = build_service(policy_cc="boss@org.test", outbox_path=outbox)
    for atom in ("a1", "a2", "a3"):
        grant(service, "alice", "email", "doc", atom)
        grant(service, "alice", "read", "doc", atom)
    principal = service.authenticate("tok-alice")
    result = service.invoke(principal, "email", ["doc", "a1"],
                            {"to": "x@org.test"})
    assert result.outcome == "allow"
    assert result.payload["cc"] == ["boss@org.test"]
    assert outbox.read_text().count("\n") == 1


def test_invoke_composite_through_generic_path():
    service = build_service()
    from fbac.guarded import GuardedFunctionSpec
    from fbac.act_core import FunctionSig
    service.catalog.register(GuardedFunctionSpec(
        FunctionSig("cat", 1), runner=lambda objs, stdin, resolve: resolve(objs[0])))
    service.catalog.register(GuardedFunctionSpec(
        FunctionSig("upper", 0), runner=lambda objs, stdin, resolve: stdin.upper()))
    sig = compose(service.catalog, "upper", "cat")
    tensor = service.tensor
    tensor = tensor.create_function(FunctionSig("cat", 1))
    tensor = tensor.create_function(FunctionSig("upper", 0))
    tensor = tensor.create_function(sig)
    service.swap_tensor(tensor)
    principal = service.authenticate("tok-alice")

    denied = service.invoke(principal, "upper∘cat", ["doc/a1"])
    assert denied.outcome == "deny"

    service.swap_tensor(service.tensor.enter_entry(
        "alice", "upper∘cat", ("doc/a1",), ENTRY_TRUE))
    allowed = service.invoke(principal, "upper∘cat", ["doc/a1"])
    assert allowed.outcome == "allow"
    assert allowed.payload["output"] == "ALPHA LINES HERE\nSECOND LINE"


def test_role_never_bypasses_decide():
    service = build_service()
    grant(service, "viv", "read", "doc", "a1")
    as_viewer = service.invoke(Principal("viv", "Viewer", "t"), "read", ["doc"])
    as_author = service.invoke(Principal("viv", "Author", "t"), "read", ["doc"])
    assert as_viewer.payload == as_author.payload


def test_audit_query_filters():
    service = build_service()
    grant(service, "alice", "read", "doc", "a1")
    alice = service.authenticate("tok-alice")
    viv = service.authenticate("tok-viv")
    service.invoke(alice, "read", ["doc"])
    service.invoke(viv, "print", ["doc"])
    service.invoke(alice, "print", ["doc"])
    assert len(service.audit.query()) == 3
    assert [r.sequence for r in service.audit.query()] == [1, 2, 3]
    assert all(r.outcome == "deny" for r in service.audit.query(outcome="deny"))
    assert {r.subject for r in service.audit.query(subject="alice")} == {"alice"}
    assert len(service.audit.query(function="print")) == 2


def test_audit_suspect_narrowing_scenario():
    # five subjects, two granted; one granted subject actually searched
    doc = sample_doc()
    policy = "\n".join(f"SUBJECT emp{i}" for i in range(5)) + "\n"
    catalog, tensor, docs = load_workspace([policy], [doc])
    identities = "\n".join(
        f"PRINCIPAL tok{i} emp{i} Viewer" for i in range(5)) + "\n"
    service = MonitorService(catalog, tensor, docs,
                             identities=load_identities(identities))
    for emp in ("emp1", "emp3"):
        grant(service, emp, "search", "doc", "a1")
    service.invoke(service.authenticate("tok1"), "search", ["doc"],
                   {"pattern": "alpha"})
    service.invoke(service.authenticate("tok2"), "search", ["doc"],
                   {"pattern": "alpha"})

    from fbac.projections import subject_list
    granted = {s for s, e in subject_list(
        service.tensor, "search", (atom_ref(doc, "a1"),)).entries.items() if e.grants}
    invoked = {r.subject for r in service.audit.query(function="search",
                                                      outcome="allow")}
    assert granted == {"emp1", "emp3"}
    assert granted & invoked == {"emp1"}


def test_audit_sequences_are_gap_free_and_replayable():
    def run_session(service):
        rng = random.Random(77)
        grant(service, "alice", "read", "doc", "a1")
        grant(service, "alice", "search", "doc", "a1")
        principal = service.authenticate("tok-alice")
        outcomes = []
        for _ in range(200):
            function = rng.choice(["read", "search", "print"])
            options = {"pattern": "alpha"} if function == "search" else {}
            outcomes.append(service.invoke(principal, function, ["doc"], options).outcome)
        return outcomes

    first = build_service()
    second = build_service()
    outcomes_a = run_session(first)
    outcomes_b = run_session(second)
    assert outcomes_a == outcomes_b
    assert [r.sequence for r in first.audit.query()] == list(range(1, 201))
    assert [r.outcome for r in first.audit.query()] \
        == [r.outcome for r in second.audit.query()]


def test_audit_log_never_stores_content():
    service = build_service()
    grant(service, "alice", "read", "doc", "a1")
    service.invoke(service.authenticate("tok-alice"), "read", ["doc"])
    for record in service.audit.query():
        assert "alpha" not in str(record.to_json())


def test_audit_sink_jsonl(tmp_path):
    sink = tmp_path / "audit.jsonl"
    service = build_service(audit_sink=sink)
    service.invoke(service.authenticate("tok-viv"), "read", ["doc"])
    import json
    lines = [json.loads(x) for x in sink.read_text().splitlines()]
    assert lines[0]["sequence"] == 1


def test_audit_log_standalone():
    log = AuditLog()
    for i in range(5):
        log.append("s", "f", (), Invocation(), "allow", 0)
    assert [r.sequence for r in log.query()] == [1, 2, 3, 4, 5]


def test_concurrent_invokes_get_distinct_gap_free_sequences():
    import threading

    service = build_service()
    grant(service, "alice", "read", "doc", "a1")
    principal = service.authenticate("tok-alice")

    def worker():
        for _ in range(10):
            service.invoke(principal, "read", ["doc"])

    threads = [threading.Thread(target=worker) for _ in range(20)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    sequences = [r.sequence for r in service.audit.query()]
    assert sequences == list(range(1, 201))

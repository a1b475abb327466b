"""Record live HTTP API responses as JSON fixtures for the workbench tests.

Run from the repository root:  python3 tools/record_workbench_fixtures.py
Rewrites frontend/tests/fixtures/*.json from a scripted monitor session, so
the frontend contract tests always diff against the real wire format.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from fastapi.testclient import TestClient

from fbac.act_core import ENTRY_TRUE, true_with, regex_predicate
from fbac.adoc import Atom, AtomicDocument
from fbac.httpapi import SESSION_HEADER, create_app
from fbac.monitor import MonitorService, load_identities, load_workspace
from fbac.rematch import int_le_pattern

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"

IDENTITIES = """\
PRINCIPAL tok-alice alice Author
PRINCIPAL tok-viv viv Viewer
"""

DENIED_TEXT = "TOPSECRET gamma details nobody may see"
DENIED_IMAGE_1 = "media/classified-one.png"
DENIED_IMAGE_2 = "media/classified-two.png"


def make_service() -> MonitorService:
    doc = AtomicDocument(id="doc", atoms=(
        Atom(id="a1", content="public alpha text"),
        Atom(id="a2", kind="image-ref", content=DENIED_IMAGE_1),
        Atom(id="a3", content=DENIED_TEXT),
        Atom(id="a4", kind="image-ref", content=DENIED_IMAGE_2),
        Atom(id="a5", content="second public paragraph"),
    ))
    dest = AtomicDocument(id="dest", atoms=(Atom(id="seed", content="draft"),))
    catalog, tensor, docs = load_workspace(
        ["SUBJECT alice\nSUBJECT viv\n"], [doc, dest])
    service = MonitorService(catalog, tensor, docs,
                             identities=load_identities(IDENTITIES))
    context_pred = true_with(regex_predicate(
        f"pattern=[^;]*;context={int_le_pattern(5)}(;.*)?\\nSTDIN:.*"))
    batch = [
        ("alice", "read", ("doc/a1",), ENTRY_TRUE),
        ("alice", "read", ("doc/a5",), ENTRY_TRUE),
        ("alice", "search", ("doc/a1",), context_pred),
        ("alice", "search", ("doc/a5",), ENTRY_TRUE),
        ("alice", "copy_with_citation", ("doc/a1",), ENTRY_TRUE),
        ("viv", "read", ("doc/a1",), ENTRY_TRUE),
        ("viv", "read", ("doc/a5",), ENTRY_TRUE),
    ]
    service.swap_tensor(service.tensor.with_entries(batch))
    return service


def save(name: str, payload) -> None:
    path = FIXTURES / name
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    print(f"wrote {path.relative_to(Path.cwd())}")


def record_randomized_views(client: TestClient, headers: dict) -> None:
    """Views over documents with random grants, for order-preservation tests."""
    rng = random.Random(12)
    views = []
    for n in range(5):
        doc_id = f"rand{n}"
        atoms = []
        for i in range(rng.randint(2, 6)):
            kind = "image-ref" if rng.random() < 0.3 else "text"
            content = f"media/r{n}a{i}.png" if kind == "image-ref" \
                else f"random atom {n}.{i} body"
            atoms.append(Atom(id=f"a{i}", kind=kind, content=content))
        document = AtomicDocument(id=doc_id, atoms=tuple(atoms))
        service = client.app.state.service
        service.store_document(document)
        tensor = service.tensor
        new_objects = {f"{doc_id}/{a.id}" for a in atoms} | {doc_id}
        from fbac.act_core import AccessTensor
        tensor = AccessTensor(
            subjects=tensor.subjects,
            functions=dict(tensor.functions),
            objects=tensor.objects | frozenset(new_objects),
            entries=dict(tensor.entries),
        )
        grants = [("viv", "read", (f"{doc_id}/{a.id}",), ENTRY_TRUE)
                  for a in atoms if rng.random() < 0.5]
        service.swap_tensor(tensor.with_entries(grants))
        views.append(client.get(f"/documents/{doc_id}/view", headers=headers).json())
    save("views_randomized.json", views)


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    service = make_service()
    app = create_app(service)
    app.state.service = service
    client = TestClient(app)

    session = client.post("/session", json={"token": "tok-viv"}).json()
    save("session.json", session)
    headers = {SESSION_HEADER: session["session"]}

    alice_session = client.post("/session", json={"token": "tok-alice"}).json()
    alice = {SESSION_HEADER: alice_session["session"]}

    save("documents.json", client.get("/documents", headers=headers).json())
    save("view.json", client.get("/documents/doc/view", headers=headers).json())
    save("atom_functions.json",
         client.get("/documents/doc/atoms/a1/functions", headers=alice).json())
    save("atom_functions_denied.json",
         client.get("/documents/doc/atoms/a3/functions", headers=headers).json())

    save("invoke_search.json", client.post("/invoke", headers=alice, json={
        "function": "search", "args": ["doc"],
        "options": {"pattern": "alpha|paragraph", "context": "1"},
    }).json())
    save("invoke_print_denied.json", client.post("/invoke", headers=alice, json={
        "function": "print", "args": ["doc"],
    }).json())

    save("audit_before.json", client.get("/audit", headers=alice).json())
    save("invoke_copy_citation.json", client.post("/invoke", headers=alice, json={
        "function": "copy_with_citation", "args": ["doc", "a1"],
        "options": {"dest": "dest"},
    }).json())
    save("audit_after.json", client.get("/audit", headers=alice).json())

    save("denied_strings.json", {
        "strings": [DENIED_TEXT, DENIED_IMAGE_1, DENIED_IMAGE_2,
                    "TOPSECRET", "classified-one", "classified-two"],
        "denied_image_atoms": ["a2", "a4"],
    })
    record_randomized_views(client, headers)


if __name__ == "__main__":
    main()

"""HTTP face of the monitor, consumed by the browser workbench.

Sessions are minted from identity tokens; every other endpoint requires the
session header.  Content-bearing reads (the document view) go through the
same invoke path as everything else, so they are decided and audited like
any invocation.  Denials keep their uniform shape here too.
"""

from __future__ import annotations

import uuid
from typing import Any, Mapping

from fastapi import Depends, FastAPI, Header, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import projections
from .errors import (
    EnumerationTooLarge,
    FbacError,
    MeaninglessPair,
    Unauthenticated,
    UnknownFunction,
    UnknownIdentifier,
)
from .monitor import MonitorService, Principal

SESSION_HEADER = "X-FBAC-Session"


class SessionRequest(BaseModel):
    token: str


class InvokeRequest(BaseModel):
    function: str
    args: list[str] = []
    options: dict[str, Any] | list[list[str | None]] = {}
    stdin: str = ""


def create_app(service: MonitorService) -> FastAPI:
    app = FastAPI(title="fbac monitor", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])
    sessions: dict[str, Principal] = {}

    def current_principal(
            session: str | None = Header(default=None, alias=SESSION_HEADER)) -> Principal:
        principal = sessions.get(session or "")
        if principal is None:
            raise HTTPException(status_code=401, detail="session-expired")
        return principal

    @app.post("/session")
    def open_session(body: SessionRequest):
        try:
            principal = service.authenticate(body.token)
        except Unauthenticated:
            raise HTTPException(status_code=401, detail="unknown token")
        session_id = uuid.uuid4().hex
        sessions[session_id] = principal
        return {"session": session_id, "subject": principal.subject,
                "role": principal.role}

    @app.get("/documents")
    def list_documents(principal: Principal = Depends(current_principal)):
        return {"documents": [
            {"id": doc_id, "atoms": len(doc.atoms),
             "forbidden_functions": sorted(doc.forbidden_functions)}
            for doc_id, doc in sorted(service.documents().items())]}

    @app.get("/documents/{doc_id}/view")
    def document_view(doc_id: str,
                      principal: Principal = Depends(current_principal)):
        result = service.invoke(principal, "read", [doc_id])
        return {"outcome": result.outcome, **result.payload}

    @app.get("/documents/{doc_id}/atoms/{atom_id}/functions")
    def atom_functions(doc_id: str, atom_id: str,
                       principal: Principal = Depends(current_principal)):
        try:
            document = service.document(doc_id)
            document.atom(atom_id)
            view = projections.function_list(
                service.tensor, principal.subject, (f"{doc_id}/{atom_id}",))
        except (UnknownIdentifier, FbacError) as exc:
            raise HTTPException(status_code=404, detail="not-found") from exc
        return view.to_json()

    @app.post("/invoke")
    def invoke(body: InvokeRequest,
               principal: Principal = Depends(current_principal)):
        options: Mapping | list = body.options
        if isinstance(options, list):
            options = {k: v for k, v in options}
        try:
            result = service.invoke(principal, body.function, body.args,
                                    options, body.stdin.encode("utf-8"))
        except UnknownFunction as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"outcome": result.outcome, "audit_sequence": result.audit_sequence,
                "result": dict(result.payload)}

    @app.get("/projections/{kind}")
    def projection(kind: str,
                   object: str | None = Query(default=None),
                   subject: str | None = Query(default=None),
                   function: str | None = Query(default=None),
                   app_functions: str | None = Query(default=None, alias="app"),
                   restrict: str | None = Query(default=None),
                   compress: bool = Query(default=True),
                   principal: Principal = Depends(current_principal)):
        tensor = service.tensor

        def parse_tuple(raw: str) -> tuple:
            return () if raw == "-" else tuple(raw.split(","))

        try:
            if kind == "authz":
                view = projections.authorization_matrix(
                    tensor, parse_tuple(object or "-"), compress)
            elif kind == "cap":
                view = projections.capability_matrix(
                    tensor, subject or principal.subject, compress)
            elif kind == "acm":
                view = projections.per_function_acm(tensor, function, compress)
            elif kind == "flist":
                if app_functions:
                    view = projections.application_restricted_function_list(
                        tensor, parse_tuple(app_functions),
                        subject or principal.subject, parse_tuple(object or "-"))
                else:
                    view = projections.function_list(
                        tensor, subject or principal.subject,
                        parse_tuple(object or "-"))
            elif kind == "slist":
                restriction = None if restrict is None else set(parse_tuple(restrict))
                view = projections.subject_list(
                    tensor, function, parse_tuple(object or "-"), restriction)
            elif kind == "olist":
                restriction = None if restrict is None else \
                    {parse_tuple(part) for part in restrict.split(";") if part}
                view = projections.object_list(
                    tensor, subject or principal.subject, function, restriction)
            else:
                raise HTTPException(status_code=404,
                                    detail=f"unknown projection kind {kind!r}")
        except (UnknownIdentifier, MeaninglessPair, EnumerationTooLarge) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return view.to_json()

    @app.get("/audit")
    def audit(subject: str | None = None, function: str | None = None,
              object: str | None = None, outcome: str | None = None,
              since: float | None = None, until: float | None = None,
              principal: Principal = Depends(current_principal)):
        records = service.audit.query(subject=subject, function=function,
                                      obj=object, outcome=outcome,
                                      since=since, until=until)
        return {"records": [r.to_json() for r in records]}

    return app

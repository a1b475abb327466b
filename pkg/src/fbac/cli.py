"""Command-line face: conversion, projections, guarded verbs, shell, server.

Policy comes from --policy files plus every ``*.policy`` file under the
FBAC_POLICY_DIR directory when that variable is set; documents from --doc
files.  The guarded verbs run as the --as subject through the same monitor
dispatch the HTTP API uses, so the audit and denial behavior is identical.
"""

from __future__ import annotations

import argparse
import cmd
import json
import os
import sys
from pathlib import Path

from . import projections
from .adoc import parse as parse_adoc
from .adoc import serialize, text_to_document
from .errors import FbacError
from .monitor import (
    MonitorService,
    Principal,
    load_documents_from_paths,
    load_identities,
    load_workspace,
)
from .policyfile import dump_policy

POLICY_DIR_ENV = "FBAC_POLICY_DIR"


def gather_policy_texts(policy_paths) -> list[str]:
    paths = [Path(p) for p in policy_paths or []]
    policy_dir = os.environ.get(POLICY_DIR_ENV)
    if policy_dir:
        paths.extend(sorted(Path(policy_dir).glob("*.policy")))
    return [p.read_text(encoding="utf-8") for p in paths]


def build_service(args, require_subject: bool = True) -> MonitorService:
    texts = gather_policy_texts(getattr(args, "policy", None))
    docs = load_documents_from_paths(getattr(args, "doc", None) or [])
    catalog, tensor, doc_map = load_workspace(texts, docs)
    subject = getattr(args, "as_subject", None)
    if require_subject and subject and subject not in tensor.subjects:
        tensor = tensor.create_subject(subject)
    lattice_path = getattr(args, "lattice", None)
    if lattice_path:
        from .lattice import compile_to_tensor, load_lattice_policy
        assignment = load_lattice_policy(
            Path(lattice_path).read_text(encoding="utf-8"))
        for named in assignment.subject_class:
            if named not in tensor.subjects:
                tensor = tensor.create_subject(named)
        tensor = compile_to_tensor(assignment, tensor)
    identities = {}
    identity_path = getattr(args, "identity", None)
    if identity_path:
        identities = load_identities(Path(identity_path).read_text(encoding="utf-8"))
    return MonitorService(
        catalog, tensor, doc_map, identities=identities,
        policy_cc=getattr(args, "policy_cc", None) or "supervisor@policy.local",
        outbox_path=getattr(args, "outbox", None),
        audit_sink=getattr(args, "audit_log", None),
    )


def shell_principal(args) -> Principal:
    return Principal(args.as_subject, "Admin", token="-")


def emit(args, payload: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    kind = payload.get("kind")
    if kind == "view":
        for segment in payload["segments"]:
            prefix = f"[{segment['atom']}]"
            if segment["kind"] == "content":
                print(f"{prefix} {segment['text']}")
            else:
                print(f"{prefix} <{segment['kind']}>")
    elif kind == "search":
        if payload["boolean_only"]:
            print("match" if payload["found"] else "no match")
        for hit in payload["hits"]:
            where = hit["atom"] or "<stdin>"
            for line in hit["before"]:
                print(f"{where}- {line}")
            print(f"{where}:{hit['line_number']}: {hit['line']}")
            for line in hit["after"]:
                print(f"{where}- {line}")
    elif kind == "print":
        sys.stdout.write(payload["text"])
    elif kind == "copy":
        print(payload["payload"])
        if payload.get("citation"):
            print(f"(cited: {payload['citation']['document']} "
                  f"{','.join(payload['citation']['atoms'])})")
    elif kind == "email":
        print(f"queued to {','.join(payload['to'])} cc {','.join(payload['cc'])}")
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))


def run_invoke(args, service, function, call_args, options, stdin=b"") -> int:
    result = service.invoke(shell_principal(args), function, call_args,
                            options, stdin)
    if result.outcome != "allow":
        print(f"denied: {result.payload.get('detail', 'not permitted')}",
              file=sys.stderr)
        return 1
    emit(args, dict(result.payload))
    return 0


# --- subcommands -----------------------------------------------------------------


def cmd_convert(args) -> int:
    source = Path(args.input).read_text(encoding="utf-8") if args.input \
        else sys.stdin.read()
    if args.from_format == "txt" and args.to_format == "adoc":
        document = text_to_document(source, args.id)
        data = serialize(document)
    elif args.from_format == "adoc" and args.to_format == "txt":
        document = parse_adoc(source.encode("utf-8"))
        data = "\n\n".join(a.content for a in document.atoms).encode("utf-8")
    else:
        print(f"unsupported conversion {args.from_format} -> {args.to_format}",
              file=sys.stderr)
        return 2
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return 0


def cmd_project(args) -> int:
    service = build_service(args, require_subject=False)
    tensor = service.tensor

    def tup(raw):
        return () if raw in (None, "-") else tuple(raw.split(","))

    kind = args.kind
    if kind == "authz":
        view = projections.authorization_matrix(tensor, tup(args.object),
                                                not args.no_compress)
    elif kind == "cap":
        view = projections.capability_matrix(tensor, args.subject,
                                             not args.no_compress)
    elif kind == "acm":
        view = projections.per_function_acm(tensor, args.function,
                                            not args.no_compress)
    elif kind == "flist":
        if args.app:
            view = projections.application_restricted_function_list(
                tensor, tup(args.app), args.subject, tup(args.object))
        else:
            view = projections.function_list(tensor, args.subject, tup(args.object))
    elif kind == "slist":
        restriction = None if args.restrict is None else set(tup(args.restrict))
        view = projections.subject_list(tensor, args.function, tup(args.object),
                                        restriction)
    else:
        restriction = None if args.restrict is None else \
            {tup(part) for part in args.restrict.split(";") if part}
        view = projections.object_list(tensor, args.subject, args.function,
                                       restriction)
    if args.json:
        sys.stdout.write(projections.to_json_text(view))
    else:
        sys.stdout.write(projections.to_table_text(view))
    return 0


def cmd_search(args) -> int:
    service = build_service(args)
    options = {"pattern": args.pattern, "context": str(args.context)}
    if args.quiet:
        options["quiet"] = None
    if args.hide:
        options["hide_words"] = args.hide
    if args.stdin:
        return run_invoke(args, service, "grep_in_standard", [], options,
                          sys.stdin.buffer.read())
    return run_invoke(args, service, "search", [args.document], options)


def cmd_view(args) -> int:
    service = build_service(args)
    return run_invoke(args, service, "read", [args.document], {})


def cmd_copy(args) -> int:
    service = build_service(args)
    options = {"dest": args.dest}
    if args.max_bytes is not None:
        options["max_bytes"] = str(args.max_bytes)
    if args.max_chars is not None:
        options["max_chars"] = str(args.max_chars)
    if args.exclude:
        options["exclude"] = args.exclude
    status = run_invoke(args, service, f"copy_{args.variant}",
                        [args.document, *args.atoms.split(",")], options)
    if status == 0 and args.save_dest:
        Path(args.save_dest).write_bytes(serialize(service.document(args.dest)))
    return status


def cmd_print(args) -> int:
    service = build_service(args)
    options = {}
    if args.watermark:
        options["watermark"] = args.watermark
    result = service.invoke(shell_principal(args), "print", [args.document], options)
    if result.outcome != "allow":
        print("denied: this document or selection is not printable",
              file=sys.stderr)
        return 1
    if args.output:
        Path(args.output).write_text(result.payload["text"], encoding="utf-8")
    else:
        emit(args, dict(result.payload))
    return 0


def cmd_email(args) -> int:
    service = build_service(args)
    options = {"to": args.to}
    if args.cc:
        options["cc"] = args.cc
    call_args = [args.document]
    if args.atoms:
        call_args.extend(args.atoms.split(","))
    return run_invoke(args, service, "email", call_args, options)


def cmd_serve(args) -> int:
    import uvicorn

    from .httpapi import create_app
    service = build_service(args, require_subject=False)
    uvicorn.run(create_app(service), host=args.host, port=args.port)
    return 0


def cmd_dump_policy(args) -> int:
    service = build_service(args, require_subject=False)
    sys.stdout.write(dump_policy(service.tensor))
    return 0


class Shell(cmd.Cmd):
    """Interactive session against one loaded workspace."""

    intro = "fbac shell - type help or ? to list commands"
    prompt = "fbac> "

    def __init__(self, service: MonitorService, args, **kwargs):
        super().__init__(**kwargs)
        self.service = service
        self.args = args
        self.principal = shell_principal(args)
        self.prompt = f"fbac[{self.principal.subject}]> "

    def _invoke(self, function, call_args, options, stdin=b""):
        result = self.service.invoke(self.principal, function, call_args,
                                     options, stdin)
        if result.outcome != "allow":
            print(f"denied: {result.payload.get('detail', 'not permitted')}",
                  file=self.stdout)
        else:
            emit(self.args, dict(result.payload))

    def do_docs(self, _line):
        """docs -- list loaded documents"""
        for doc_id, doc in sorted(self.service.documents().items()):
            print(f"{doc_id} ({len(doc.atoms)} atoms)", file=self.stdout)

    def do_view(self, line):
        """view DOC -- redacted rendering of a document"""
        self._invoke("read", [line.strip()], {})

    def do_search(self, line):
        """search DOC PATTERN [CONTEXT] -- guarded search"""
        parts = line.split()
        if len(parts) < 2:
            print("usage: search DOC PATTERN [CONTEXT]", file=self.stdout)
            return
        options = {"pattern": parts[1],
                   "context": parts[2] if len(parts) > 2 else "0"}
        self._invoke("search", [parts[0]], options)

    def do_functions(self, line):
        """functions DOC ATOM -- function list for one atom"""
        parts = line.split()
        if len(parts) != 2:
            print("usage: functions DOC ATOM", file=self.stdout)
            return
        view = projections.function_list(
            self.service.tensor, self.principal.subject,
            (f"{parts[0]}/{parts[1]}",))
        for name, entry in sorted(view.entries.items()):
            print(f"{name}: {entry.render()}", file=self.stdout)

    def do_print(self, line):
        """print DOC [WATERMARK] -- watermarked print rendering"""
        parts = line.split()
        if not parts:
            print("usage: print DOC [WATERMARK]", file=self.stdout)
            return
        options = {"watermark": parts[1]} if len(parts) > 1 else {}
        self._invoke("print", [parts[0]], options)

    def do_copy(self, line):
        """copy VARIANT SRC ATOMS DEST [PARAM] -- e.g. copy with_citation doc a1,a2 dest"""
        parts = line.split()
        if len(parts) < 4:
            print("usage: copy VARIANT SRC ATOMS DEST [PARAM]", file=self.stdout)
            return
        variant, src, atoms, dest = parts[:4]
        options = {"dest": dest}
        if variant == "byte_restricted" and len(parts) > 4:
            options["max_bytes"] = parts[4]
        if variant == "character_limited" and len(parts) > 4:
            options["max_chars"] = parts[4]
        if variant == "sensitive_word_exclusion" and len(parts) > 4:
            options["exclude"] = parts[4]
        self._invoke(f"copy_{variant}", [src, *atoms.split(",")], options)

    def do_email(self, line):
        """email DOC ATOMS TO -- send atoms; policy cc always applies"""
        parts = line.split()
        if len(parts) != 3:
            print("usage: email DOC ATOMS TO", file=self.stdout)
            return
        self._invoke("email", [parts[0], *parts[1].split(",")], {"to": parts[2]})

    def do_audit(self, line):
        """audit [OUTCOME] -- show audit records"""
        outcome = line.strip() or None
        for record in self.service.audit.query(outcome=outcome):
            print(f"#{record.sequence} {record.subject} {record.function} "
                  f"{','.join(record.objects) or '-'} -> {record.outcome}",
                  file=self.stdout)

    def do_quit(self, _line):
        """quit -- leave the shell"""
        return True

    do_EOF = do_quit


def cmd_shell(args) -> int:
    service = build_service(args)
    Shell(service, args).cmdloop()
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbac",
        description="function-granular access control over atom-structured documents")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, subject=True):
        p.add_argument("--policy", action="append", metavar="FILE",
                       help="policy file (repeatable); FBAC_POLICY_DIR adds *.policy")
        p.add_argument("--lattice", metavar="FILE",
                       help="lattice policy file compiled into the snapshot")
        p.add_argument("--doc", action="append", metavar="FILE",
                       help=".adoc document (repeatable)")
        if subject:
            p.add_argument("--as", dest="as_subject", required=True,
                           metavar="SUBJECT", help="acting subject")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--outbox", metavar="FILE", help="outbox file for email")
        p.add_argument("--policy-cc", metavar="ADDR", help="enforced cc address")
        p.add_argument("--audit-log", metavar="FILE", help="audit JSONL sink")

    p = sub.add_parser("convert", help="convert between txt and adoc")
    p.add_argument("--from", dest="from_format", required=True, choices=["txt", "adoc"])
    p.add_argument("--to", dest="to_format", required=True, choices=["txt", "adoc"])
    p.add_argument("--id", default="imported", help="document id for txt imports")
    p.add_argument("input", nargs="?", help="input file (default stdin)")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("project", help="tensor views")
    common(p, subject=False)
    p.add_argument("--kind", required=True,
                   choices=["authz", "cap", "acm", "flist", "slist", "olist"])
    p.add_argument("--object", help="comma-separated tuple, - for empty")
    p.add_argument("--subject")
    p.add_argument("--function")
    p.add_argument("--app", help="application function subset (csv)")
    p.add_argument("--restrict", help="subject csv, or ;-separated object tuples")
    p.add_argument("--no-compress", action="store_true")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("search", help="guarded search")
    common(p)
    p.add_argument("pattern")
    p.add_argument("--document", "-d", help="document id (omit with --stdin)")
    p.add_argument("--context", type=int, default=0)
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--hide", help="csv words to redact in output")
    p.add_argument("--stdin", action="store_true",
                   help="search standard input instead of a document")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("view", help="redacted document rendering")
    common(p)
    p.add_argument("document")
    p.set_defaults(func=cmd_view)

    p = sub.add_parser("copy", help="guarded copy into a destination document")
    common(p)
    p.add_argument("--variant", required=True,
                   choices=["byte_restricted", "character_limited",
                            "sensitive_word_exclusion", "with_citation"])
    p.add_argument("--document", "-d", required=True, help="source document id")
    p.add_argument("--atoms", required=True, help="csv atom ids")
    p.add_argument("--dest", required=True, help="destination document id")
    p.add_argument("--max-bytes", type=int)
    p.add_argument("--max-chars", type=int)
    p.add_argument("--exclude", help="csv blocklist words")
    p.add_argument("--save-dest", metavar="FILE",
                   help="write the updated destination document")
    p.set_defaults(func=cmd_copy)

    p = sub.add_parser("print", help="watermarked print artifact")
    common(p)
    p.add_argument("document")
    p.add_argument("--watermark")
    p.add_argument("-o", "--output", help="artifact file")
    p.set_defaults(func=cmd_print)

    p = sub.add_parser("email", help="force-cc email of selected atoms")
    common(p)
    p.add_argument("document")
    p.add_argument("--atoms", help="csv atom ids (default: all)")
    p.add_argument("--to", required=True, help="csv recipients")
    p.add_argument("--cc", help="csv cc list")
    p.set_defaults(func=cmd_email)

    p = sub.add_parser("shell", help="interactive session")
    common(p)
    p.set_defaults(func=cmd_shell)

    p = sub.add_parser("serve", help="run the HTTP monitor")
    common(p, subject=False)
    p.add_argument("--identity", metavar="FILE", help="PRINCIPAL token file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8437)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("dump-policy", help="merged policy snapshot as text")
    common(p, subject=False)
    p.set_defaults(func=cmd_dump_policy)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except FbacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

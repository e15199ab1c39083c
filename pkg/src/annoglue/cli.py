"""Command-line interface.

One invocation is one unit of work against the project directory (the
current directory, or ``$ANNOGLUE_PROJECT`` when set). Mutating subcommands
take the repository's advisory writer lock; read-only ones work on an
immutable snapshot.

Exit codes: 0 success, 1 domain error (validation, illegal transition,
unknown id), 2 usage error, 3 I/O or corruption.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import graph as graphs
from . import linker, model, repository, w3c
from .artefacts import (
    ArtefactKind,
    EditorBinding,
    VersionStatus,
    add_version,
    find_artefact,
    latest_version,
    register_artefact,
    set_version_status,
)
from .canonical import canonical_dumps
from .errors import (
    AnnoglueError,
    InvalidPresentationError,
    IoFailureError,
    SelectorSyntaxError,
    UnknownUserError,
    UsageError,
)
from .model import (
    Annotation,
    AnnotationFunction,
    Choice,
    Creator,
    DrawingBody,
    ElementId,
    ExternalFileBody,
    Fragment,
    LifecycleState,
    MarkerBody,
    Motivation,
    Presentation,
    Region,
    Role,
    Target,
    TextBody,
    VoteBody,
    WholeArtefact,
    body_summary,
    body_text,
    parse_scenario,
)

USERS_FILENAME = "users.json"

# Session-wide clock; tests pin it for reproducible repositories.
_utcnow = model.utcnow


def project_dir() -> Path:
    return Path(os.environ.get("ANNOGLUE_PROJECT") or os.getcwd())


# --- argument parsing helpers ---------------------------------------------------


def _number(text: str) -> float:
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_at(text: str) -> Presentation:
    """``x,y,w,h`` -> Presentation. Malformed input is a usage error;
    non-positive size is a domain error."""
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"--at expects x,y,w,h; got {text!r}")
    try:
        x, y, w, h = (_number(part) for part in parts)
    except ValueError:
        raise UsageError(f"--at expects four numbers; got {text!r}") from None
    if w <= 0 or h <= 0:
        raise InvalidPresentationError(f"--at width and height must be > 0; got {text!r}")
    return Presentation(x, y, w, h)


def parse_selector_expr(expr: str):
    """Selector expression grammar:

    ``whole`` | ``id:a/b/c`` | ``region:x,y,w,h`` | ``frag:<scheme>:<expression>``
    """
    if not expr:
        raise SelectorSyntaxError("empty selector expression", 0)
    if expr == "whole":
        return WholeArtefact()
    if expr.startswith("id:"):
        rest = expr[3:]
        if not rest:
            raise SelectorSyntaxError("element path must be non-empty", 3)
        offset = 3
        parts = []
        for part in rest.split("/"):
            if not part:
                raise SelectorSyntaxError("empty element path segment", offset)
            parts.append(part)
            offset += len(part) + 1
        return ElementId(tuple(parts))
    if expr.startswith("region:"):
        rest = expr[7:]
        parts = rest.split(",")
        if len(parts) != 4:
            raise SelectorSyntaxError("region selector needs x,y,w,h", 7)
        numbers = []
        offset = 7
        for part in parts:
            try:
                numbers.append(_number(part))
            except ValueError:
                raise SelectorSyntaxError(f"not a number: {part!r}", offset) from None
            offset += len(part) + 1
        x, y, w, h = numbers
        if w <= 0:
            raise SelectorSyntaxError("w must be > 0", 7)
        if h <= 0:
            raise SelectorSyntaxError("h must be > 0", 7)
        return Region(x, y, w, h)
    if expr.startswith("frag:"):
        scheme, sep, expression = expr[5:].partition(":")
        if not scheme:
            raise SelectorSyntaxError("fragment scheme must be non-empty", 5)
        if not sep or not expression:
            raise SelectorSyntaxError(
                "fragment selector needs frag:<scheme>:<expression>", 5 + len(scheme)
            )
        return Fragment(expression=expression, scheme=scheme)
    head = expr.split(":", 1)[0]
    raise SelectorSyntaxError(f"unknown selector form {head!r}", 0)


def _version_arg(text: str):
    if text == "any":
        return "any"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"version must be an integer or 'any': {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"version must be >= 1: {text!r}")
    return value


def _resolve_version_flag(flag, artefact) -> int | None:
    """Map the --version flag onto a concrete pin. Omitted pins the current
    latest; 'any' tracks whatever the latest becomes."""
    if flag is None:
        return latest_version(artefact).version_id
    if flag == "any":
        return None
    return flag


def load_users(root: Path) -> dict:
    path = root / USERS_FILENAME
    if not path.is_file():
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailureError(f"cannot read {USERS_FILENAME}: {exc}") from exc
    return data if isinstance(data, dict) else {}


def parse_creator(raw: str, root: Path, strict: bool) -> Creator:
    """``role:user`` declares the creator inline; a bare ``user`` is looked
    up in the project's users.json (required under --strict-users)."""
    if not raw:
        raise UsageError("--as expects <role>:<user> or a declared <user>")
    role_label, sep, user_id = raw.partition(":")
    if sep:
        if not user_id:
            raise UsageError(f"--as expects <role>:<user>; got {raw!r}")
        try:
            role = Role(role_label)
        except ValueError as exc:
            raise UsageError(f"--as role: {exc}") from None
        return Creator(user_id=user_id, display_name=user_id, roles=frozenset({role}))
    user_id = raw
    declared = load_users(root).get(user_id)
    if declared is not None:
        roles = frozenset(Role(label) for label in declared.get("roles", []) if label)
        return Creator(
            user_id=user_id,
            display_name=str(declared.get("display_name", user_id)),
            roles=roles or frozenset({Role("unspecified")}),
        )
    if strict:
        raise UnknownUserError(f"user {user_id!r} is not declared in {USERS_FILENAME}")
    return Creator(user_id=user_id, display_name=user_id, roles=frozenset({Role("unspecified")}))


def _read_body_arg(arg: str, root: Path) -> str:
    """``@path`` reads the file (relative to the project), else the literal."""
    if arg.startswith("@"):
        try:
            return (root / arg[1:]).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailureError(f"cannot read body file {arg[1:]!r}: {exc}") from exc
    return arg


def build_body(type_name: str, body_arg: str, root: Path):
    if type_name == "text":
        return TextBody(content=_read_body_arg(body_arg, root))
    if type_name == "scenario":
        return parse_scenario(_read_body_arg(body_arg, root))
    if type_name == "vote":
        return VoteBody(label=body_arg)
    if type_name == "marker":
        glyph, sep, label = body_arg.partition("::")
        return MarkerBody(glyph=glyph, label=label if sep else "")
    if type_name == "file":
        label, sep, link = body_arg.partition("::")
        if not sep:
            label, link = body_arg, body_arg
        return ExternalFileBody(label=label, link=link)
    if type_name == "drawing":
        raw = _read_body_arg(body_arg, root)
        try:
            strokes = json.loads(raw)
            return DrawingBody(
                strokes=tuple(tuple((x, y) for x, y in stroke) for stroke in strokes)
            )
        except (ValueError, TypeError) as exc:
            raise UsageError(
                f"drawing body must be JSON [[[x,y],...],...] (inline or @file): {exc}"
            ) from None
    raise UsageError(f"unknown body type {type_name!r}")


# --- subcommand handlers ---------------------------------------------------------


def cmd_init(args) -> int:
    project = repository.init_project(project_dir(), args.name)
    print(f"initialized project {project.index.project_name!r} in {project.root}")
    return 0


def cmd_artefact_add(args) -> int:
    root = project_dir()
    with repository.project_lock(root):
        p = repository.load_project(root)
        artefact = register_artefact(
            root,
            p.index.artefacts,
            name=args.name,
            path=args.path,
            editor=EditorBinding(editor_id=args.editor),
            kind=ArtefactKind(args.kind),
            now=_utcnow(),
        )
        p = repository.with_artefact(p, artefact)
        repository.save_index(p)
    print(artefact.id)
    return 0


def cmd_artefact_version(args) -> int:
    root = project_dir()
    with repository.project_lock(root):
        p = repository.load_project(root)
        artefact = find_artefact(p.index.artefacts, args.artefact_id)
        artefact = add_version(artefact, args.path, root=root, now=_utcnow())
        p = repository.with_artefact(p, artefact)
        repository.save_index(p)
    print(latest_version(artefact).version_id)
    return 0


def cmd_artefact_status(args) -> int:
    root = project_dir()
    with repository.project_lock(root):
        p = repository.load_project(root)
        artefact = find_artefact(p.index.artefacts, args.artefact_id)
        artefact = set_version_status(artefact, args.version, VersionStatus(args.status))
        p = repository.with_artefact(p, artefact)
        repository.save_index(p)
    return 0


def cmd_annotate(args) -> int:
    root = project_dir()
    now = _utcnow()
    with repository.project_lock(root):
        p = repository.load_project(root)
        artefact = find_artefact(p.index.artefacts, args.artefact_id)
        creator = parse_creator(args.creator_spec, root, args.strict_users)
        body = build_body(args.type, args.body, root)
        annotation = model.create_annotation(
            body,
            AnnotationFunction(args.function),
            creator,
            Motivation(args.motivation),
            now=now,
        )
        target = Target(
            artefact=artefact.id,
            version=_resolve_version_flag(args.version, artefact),
            selector=parse_selector_expr(args.selector) if args.selector else WholeArtefact(),
            presentation=parse_at(args.at) if args.at else model.DEFAULT_PRESENTATION,
        )
        annotation = model.attach_target(annotation, target, now=now)
        _upsert_into_default_set(p, artefact.id, annotation, creator, now)
    print(annotation.id)
    return 0


def _upsert_into_default_set(p, artefact_id: str, annotation: Annotation, creator, now):
    set_id = linker.default_set_id(artefact_id)
    existing = repository.get_set(p, set_id)
    if existing is None:
        set_file = repository.AnnotationSetFile(
            set_id=set_id,
            username=creator.user_id,
            session="",
            date=now,
            annotations=(annotation,),
        )
    else:
        set_file = replace(existing, annotations=existing.annotations + (annotation,))
    return repository.persist_annotation_set(p, set_file)


def cmd_target_add(args) -> int:
    root = project_dir()
    with repository.project_lock(root):
        p = repository.load_project(root)
        artefact = find_artefact(p.index.artefacts, args.artefact_id)
        version = _resolve_version_flag(args.version, artefact)
        p = linker.import_into_artefact(
            p, [args.annotation_id], (artefact.id, version), now=_utcnow()
        )
        _, annotation = repository.find_annotation(p, args.annotation_id)
    print(len(annotation.targets) - 1)
    return 0


def cmd_target_move(args) -> int:
    root = project_dir()
    with repository.project_lock(root):
        p = repository.load_project(root)
        set_file, annotation = repository.find_annotation(p, args.annotation_id)
        annotation = model.set_target_presentation(
            annotation, args.index, parse_at(args.at), now=_utcnow()
        )
        p = repository.replace_annotation(p, annotation)
        repository.persist_annotation_set(p, repository.get_set(p, set_file.set_id))
    return 0


def cmd_vote(args) -> int:
    root = project_dir()
    with repository.project_lock(root):
        p = repository.load_project(root)
        set_file, annotation = repository.find_annotation(p, args.annotation_id)
        voter = parse_creator(args.creator_spec, root, args.strict_users)
        annotation = model.cast_vote(annotation, voter, Choice(args.choice), now=_utcnow())
        p = repository.replace_annotation(p, annotation)
        repository.persist_annotation_set(p, repository.get_set(p, set_file.set_id))
    agree, disagree = model.tally_votes(annotation)
    print(f"agree={agree} disagree={disagree}")
    return 0


def cmd_status(args) -> int:
    root = project_dir()
    with repository.project_lock(root):
        p = repository.load_project(root)
        set_file, annotation = repository.find_annotation(p, args.annotation_id)
        annotation = model.transition_state(annotation, LifecycleState(args.state), now=_utcnow())
        p = repository.replace_annotation(p, annotation)
        repository.persist_annotation_set(p, repository.get_set(p, set_file.set_id))
    return 0


def cmd_list(args) -> int:
    p = repository.load_project(project_dir())
    rows = []
    for _, annotation in repository.all_annotations(p):
        if args.artefact and not any(t.artefact == args.artefact for t in annotation.targets):
            continue
        if args.state and annotation.state.value != args.state:
            continue
        if args.function and annotation.function.value != args.function:
            continue
        if args.creator and annotation.metadata.creator.user_id != args.creator:
            continue
        if args.grep and args.grep not in body_text(annotation.body):
            continue
        rows.append(annotation)
    rows.sort(key=lambda a: (a.metadata.created_at, a.id))
    for annotation in rows:
        print(
            f"{annotation.id}\t{annotation.state.value}\t{annotation.function.value}\t"
            f"{annotation.metadata.creator.user_id}\t{body_summary(annotation.body)}"
        )
    return 0


def cmd_check(args) -> int:
    p = repository.load_project(project_dir())
    findings = linker.check_consistency(p)
    if args.json:
        print(linker.render_findings_json(findings))
    else:
        sys.stdout.write(linker.render_findings_text(findings))
    if args.strict and any(f.severity == linker.ERROR for f in findings):
        return 1
    return 0


def cmd_graph(args) -> int:
    p = repository.load_project(project_dir())
    g = graphs.build_graph(p, include_disposed=args.include_disposed)
    if args.format == "json":
        text = graphs.export_graph_json(g) + "\n"
    else:
        text = graphs.export_dot(g)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoFailureError(f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return 0


def cmd_export_w3c(args) -> int:
    p = repository.load_project(project_dir())
    if args.all:
        annotations = sorted(
            (a for _, a in repository.all_annotations(p)),
            key=lambda a: (a.metadata.created_at, a.id),
        )
        docs = [json.loads(w3c.export_w3c(a, p)) for a in annotations]
        print(canonical_dumps(docs, indent=2))
    else:
        _, annotation = repository.find_annotation(p, args.annotation_id)
        print(w3c.export_w3c(annotation, p))
    return 0


def cmd_import_w3c(args) -> int:
    root = project_dir()
    if args.file == "-":
        raw = sys.stdin.read()
    else:
        try:
            raw = Path(args.file).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailureError(f"cannot read {args.file}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise IoFailureError(f"invalid JSON in {args.file}: {exc}") from exc
    docs = data if isinstance(data, list) else [data]

    now = _utcnow()
    with repository.project_lock(root):
        p = repository.load_project(root)
        for doc in docs:
            annotation, warnings = w3c.import_w3c(doc, p)
            for warning in warnings:
                print(f"warning: {warning}", file=sys.stderr)
            p = _upsert_into_default_set(
                p, annotation.targets[0].artefact, annotation, annotation.metadata.creator, now
            )
            print(annotation.id)
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annoglue",
        description="Typed, multi-target annotations over a file-based design-artefact repository.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init", help="create the repository layout in the project directory")
    s.add_argument("name")
    s.set_defaults(handler=cmd_init)

    artefact = sub.add_parser("artefact", help="register and version project artefacts")
    artefact_sub = artefact.add_subparsers(dest="artefact_command", required=True)

    s = artefact_sub.add_parser("add", help="register a file as a new artefact (version 1)")
    s.add_argument("path")
    s.add_argument("--editor", required=True, help="editor id (lowercase alphanumeric)")
    s.add_argument("--kind", required=True, choices=[k.value for k in ArtefactKind])
    s.add_argument("--name", required=True)
    s.set_defaults(handler=cmd_artefact_add)

    s = artefact_sub.add_parser("version", help="append the next version from a file")
    s.add_argument("artefact_id")
    s.add_argument("path")
    s.set_defaults(handler=cmd_artefact_version)

    s = artefact_sub.add_parser("status", help="move one version through its lifecycle")
    s.add_argument("artefact_id")
    s.add_argument("version", type=int)
    s.add_argument("status", choices=[k.value for k in VersionStatus])
    s.set_defaults(handler=cmd_artefact_status)

    s = sub.add_parser("annotate", help="create an annotation targeting an artefact")
    s.add_argument("artefact_id")
    s.add_argument(
        "--type",
        required=True,
        choices=["text", "drawing", "marker", "vote", "scenario", "file"],
    )
    s.add_argument("--body", required=True, help="body argument; @file reads a file")
    s.add_argument("--function", required=True, choices=[f.value for f in AnnotationFunction])
    s.add_argument("--motivation", required=True, choices=[m.value for m in Motivation])
    s.add_argument("--at", help="x,y,w,h placement (default 0,0,160,40)")
    s.add_argument("--version", type=_version_arg, help="version pin (default: latest; 'any' floats)")
    s.add_argument("--selector", help="whole | id:a/b/c | region:x,y,w,h | frag:<scheme>:<expr>")
    s.add_argument("--as", dest="creator_spec", required=True, metavar="ROLE:USER")
    s.add_argument("--strict-users", action="store_true")
    s.set_defaults(handler=cmd_annotate)

    target = sub.add_parser("target", help="manage an annotation's targets")
    target_sub = target.add_subparsers(dest="target_command", required=True)

    s = target_sub.add_parser("add", help="import the annotation onto another artefact")
    s.add_argument("annotation_id")
    s.add_argument("artefact_id")
    s.add_argument("--version", type=_version_arg)
    s.set_defaults(handler=cmd_target_add)

    s = target_sub.add_parser("move", help="move/resize one target's annotation box")
    s.add_argument("annotation_id")
    s.add_argument("index", type=int)
    s.add_argument("--at", required=True)
    s.set_defaults(handler=cmd_target_move)

    s = sub.add_parser("vote", help="cast or replace your ballot on a vote annotation")
    s.add_argument("annotation_id")
    s.add_argument("choice", choices=[c.value for c in Choice])
    s.add_argument("--as", dest="creator_spec", required=True, metavar="ROLE:USER")
    s.add_argument("--strict-users", action="store_true")
    s.set_defaults(handler=cmd_vote)

    s = sub.add_parser("status", help="move an annotation through its lifecycle")
    s.add_argument("annotation_id")
    s.add_argument("state", choices=[x.value for x in LifecycleState])
    s.set_defaults(handler=cmd_status)

    s = sub.add_parser("list", help="list annotations (sorted by creation time, then id)")
    s.add_argument("--artefact")
    s.add_argument("--state", choices=[x.value for x in LifecycleState])
    s.add_argument("--function", choices=[f.value for f in AnnotationFunction])
    s.add_argument("--creator")
    s.add_argument("--grep")
    s.set_defaults(handler=cmd_list)

    s = sub.add_parser("check", help="run the project consistency check")
    s.add_argument("--json", action="store_true")
    s.add_argument("--strict", action="store_true", help="exit 1 when errors are found")
    s.set_defaults(handler=cmd_check)

    s = sub.add_parser("graph", help="export the project annotation graph")
    s.add_argument("--format", choices=["dot", "json"], default="dot")
    s.add_argument("--include-disposed", action="store_true")
    s.add_argument("--out")
    s.set_defaults(handler=cmd_graph)

    export = sub.add_parser("export", help="export annotations")
    export_sub = export.add_subparsers(dest="export_command", required=True)
    s = export_sub.add_parser("w3c", help="emit W3C Web Annotation JSON-LD")
    s.add_argument("annotation_id", nargs="?")
    s.add_argument("--all", action="store_true")
    s.set_defaults(handler=cmd_export_w3c)

    imp = sub.add_parser("import", help="import annotations")
    import_sub = imp.add_subparsers(dest="import_command", required=True)
    s = import_sub.add_parser("w3c", help="read W3C Web Annotation JSON-LD ('-' for stdin)")
    s.add_argument("file")
    s.set_defaults(handler=cmd_import_w3c)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.handler is cmd_export_w3c and bool(args.annotation_id) == bool(args.all):
        print("error: export w3c expects an annotation id or --all", file=sys.stderr)
        return 2
    try:
        return args.handler(args)
    except AnnoglueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

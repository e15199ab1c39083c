"""Cross-referencing: importing annotations onto more artefacts, annotating
annotations, and the project-wide consistency check.

Imported targets always use whole-artefact selectors: fragment selection is
meaningless across heterogeneous models, so the carried-over coordinates are
what associates the annotation with the right part of the destination. The
consistency check reports; it never repairs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime
from typing import Sequence

from .artefacts import (
    ArtefactKind,
    EditorBinding,
    compute_digest,
    latest_version,
    register_artefact,
    resolve_ref,
    slugify,
)
from .canonical import canonical_dumps
from .errors import DuplicateTargetError
from .model import (
    DEFAULT_PRESENTATION,
    Annotation,
    AnnotationFunction,
    Creator,
    ElementId,
    ExternalFileBody,
    Motivation,
    Target,
    WholeArtefact,
    attach_target,
    create_annotation,
)
from .repository import (
    AnnotationSetFile,
    Project,
    all_annotations,
    find_annotation,
    get_set,
    persist_annotation_set,
    replace_annotation,
    save_index,
    set_path,
    with_artefact,
)

SET_EDITOR = EditorBinding(editor_id="annoglue", display_name="annoglue")


def default_set_id(artefact_id: str) -> str:
    """Per-artefact default annotation-set id (also the set's file stem)."""
    return slugify(artefact_id)


def import_into_artefact(
    p: Project,
    ids: Sequence[str],
    dest: tuple[str, int | None],
    *,
    now: datetime | None = None,
) -> Project:
    """Give each listed annotation one extra whole-artefact target on ``dest``.

    The new target starts at the same coordinates as the annotation's first
    existing target, so freshly imported annotations appear where they were
    on the source artefact; bodies and existing targets are untouched.
    """
    dest_artefact, dest_version = dest
    resolve_ref(p.index.artefacts, dest_artefact, dest_version)  # raises if unknown

    triple = (dest_artefact, dest_version, WholeArtefact())
    annotations = []
    touched_sets = set()
    seen_ids = set()
    for annotation_id in ids:
        set_file, annotation = find_annotation(p, annotation_id)
        if annotation_id in seen_ids or any(t.triple() == triple for t in annotation.targets):
            raise DuplicateTargetError(
                f"annotation {annotation_id} already targets "
                f"({dest_artefact!r}, {dest_version if dest_version is not None else 'any'})"
            )
        seen_ids.add(annotation_id)
        annotations.append(annotation)
        touched_sets.add(set_file.set_id)

    for annotation in annotations:
        presentation = (
            annotation.targets[0].presentation if annotation.targets else DEFAULT_PRESENTATION
        )
        target = Target(
            artefact=dest_artefact,
            version=dest_version,
            selector=WholeArtefact(),
            presentation=presentation,
        )
        p = replace_annotation(p, attach_target(annotation, target, now=now))

    for set_id in sorted(touched_sets):
        p = persist_annotation_set(p, get_set(p, set_id))
    return p


def annotate_annotation(
    p: Project,
    source: str,
    body,
    function: AnnotationFunction,
    creator: Creator,
    motivation: Motivation,
    *,
    now: datetime | None = None,
    annotation_id: str | None = None,
) -> tuple[Project, str]:
    """Create an annotation whose target is another annotation.

    The source annotation's set file is registered as an ANNOTATION_SET
    artefact on demand; the new annotation anchors to it with an element-id
    selector naming the source annotation.
    """
    source_set, _ = find_annotation(p, source)
    source_path = set_path(source_set.set_id)

    set_artefact = None
    for artefact in p.index.artefacts:
        if artefact.kind is ArtefactKind.ANNOTATION_SET and any(
            v.path == source_path for v in artefact.versions
        ):
            set_artefact = artefact
            break
    if set_artefact is None:
        set_artefact = register_artefact(
            p.root,
            p.index.artefacts,
            name=source_path,
            path=source_path,
            editor=SET_EDITOR,
            kind=ArtefactKind.ANNOTATION_SET,
            now=now,
        )
        p = with_artefact(p, set_artefact)
        save_index(p)

    reply = create_annotation(
        body, function, creator, motivation, now=now, annotation_id=annotation_id
    )
    reply = attach_target(
        reply,
        Target(
            artefact=set_artefact.id,
            version=None,
            selector=ElementId((source,)),
            presentation=DEFAULT_PRESENTATION,
        ),
        now=now,
    )

    reply_set_id = default_set_id(set_artefact.id)
    existing = get_set(p, reply_set_id)
    if existing is None:
        set_file = AnnotationSetFile(
            set_id=reply_set_id,
            username=creator.user_id,
            session="",
            date=now or reply.metadata.created_at,
            annotations=(reply,),
        )
    else:
        set_file = replace(existing, annotations=existing.annotations + (reply,))
    p = persist_annotation_set(p, set_file)
    return p, reply.id


# --- consistency check ----------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyFinding:
    severity: str  # "error" | "warning"
    kind: str
    annotation: str
    target_index: int | None
    detail: str

    def render(self) -> str:
        where = f"{self.annotation}[{self.target_index}]" if self.target_index is not None else self.annotation
        return f"{self.severity.upper()} {self.kind} {where}: {self.detail}"


ERROR = "error"
WARNING = "warning"


def check_consistency(p: Project) -> list[ConsistencyFinding]:
    """Report every referential problem in the project, deterministically
    ordered by annotation id then target index. Read-only.

    Per target: DanglingArtefact / DanglingVersion (errors) when the
    reference no longer resolves, StaleTarget (warning) when a pinned version
    has been superseded, DigestMismatch (warning) when the resolved version's
    file changed or vanished since registration, OrphanAnnotationTarget
    (error) when an annotation-on-annotation reference names a ghost. Per
    body: BrokenExternalFile (error) for dead project-relative links.
    """
    findings: list[ConsistencyFinding] = []
    artefact_by_id = {a.id: a for a in p.index.artefacts}
    annotation_ids = {a.id for _, a in all_annotations(p)}
    digest_cache: dict[str, str | None] = {}

    def file_digest(rel_path: str) -> str | None:
        if rel_path not in digest_cache:
            full = p.root / rel_path
            if full.is_file():
                digest_cache[rel_path] = compute_digest(p.root, rel_path)
            else:
                digest_cache[rel_path] = None
        return digest_cache[rel_path]

    for _, annotation in all_annotations(p):
        if isinstance(annotation.body, ExternalFileBody):
            link = annotation.body.link
            if "://" not in link and not link.startswith("/"):
                if not (p.root / link).is_file():
                    findings.append(
                        ConsistencyFinding(
                            ERROR,
                            "BrokenExternalFile",
                            annotation.id,
                            None,
                            f"external file link does not exist: {link}",
                        )
                    )
        for i, target in enumerate(annotation.targets):
            artefact = artefact_by_id.get(target.artefact)
            if artefact is None:
                findings.append(
                    ConsistencyFinding(
                        ERROR,
                        "DanglingArtefact",
                        annotation.id,
                        i,
                        f"target references unknown artefact {target.artefact!r}",
                    )
                )
                continue
            latest = latest_version(artefact)
            if target.version is None:
                resolved = latest
            else:
                resolved = next(
                    (v for v in artefact.versions if v.version_id == target.version), None
                )
                if resolved is None:
                    findings.append(
                        ConsistencyFinding(
                            ERROR,
                            "DanglingVersion",
                            annotation.id,
                            i,
                            f"target pins unknown version {target.version} of {target.artefact!r}",
                        )
                    )
                    continue
                if resolved.version_id != latest.version_id:
                    findings.append(
                        ConsistencyFinding(
                            WARNING,
                            "StaleTarget",
                            annotation.id,
                            i,
                            f"target pins version {resolved.version_id} of {target.artefact!r}; "
                            f"latest is {latest.version_id}",
                        )
                    )
            actual = file_digest(resolved.path)
            if actual is None:
                findings.append(
                    ConsistencyFinding(
                        WARNING,
                        "DigestMismatch",
                        annotation.id,
                        i,
                        f"file for version {resolved.version_id} of {target.artefact!r} "
                        f"is missing: {resolved.path}",
                    )
                )
            elif actual != resolved.content_digest:
                findings.append(
                    ConsistencyFinding(
                        WARNING,
                        "DigestMismatch",
                        annotation.id,
                        i,
                        f"file content of {resolved.path} no longer matches the digest "
                        f"recorded for version {resolved.version_id} of {target.artefact!r}",
                    )
                )
            if artefact.kind is ArtefactKind.ANNOTATION_SET and isinstance(
                target.selector, ElementId
            ):
                referenced = target.selector.path[0] if target.selector.path else ""
                if referenced not in annotation_ids:
                    findings.append(
                        ConsistencyFinding(
                            ERROR,
                            "OrphanAnnotationTarget",
                            annotation.id,
                            i,
                            f"target names nonexistent annotation {referenced!r}",
                        )
                    )

    findings.sort(key=_finding_order)
    return findings


def _finding_order(f: ConsistencyFinding) -> tuple:
    return (f.annotation, -1 if f.target_index is None else f.target_index, f.kind, f.detail)


def render_findings_text(findings: Sequence[ConsistencyFinding]) -> str:
    return "".join(f.render() + "\n" for f in findings)


def render_findings_json(findings: Sequence[ConsistencyFinding]) -> str:
    return canonical_dumps(
        [
            {
                "severity": f.severity,
                "kind": f.kind,
                "annotation": f.annotation,
                "target_index": f.target_index,
                "detail": f.detail,
            }
            for f in findings
        ],
        indent=2,
    )

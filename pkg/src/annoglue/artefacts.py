"""Artefact registry: project files, their versions, and version lifecycle.

Artefact content is opaque: files are only ever read to compute content
digests, never parsed. Annotation-set files can themselves be registered
(kind ``ANNOTATION_SET``), which is what makes annotating annotations work.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from pathlib import Path, PurePosixPath
from typing import Sequence

from .errors import (
    ArtefactFileNotFoundError,
    DuplicateNameError,
    IdenticalContentError,
    IllegalStatusTransitionError,
    InvalidPathError,
    UnknownArtefactError,
    UnknownVersionError,
)
from .model import utcnow

DIGEST_ALGORITHM = "sha256"

_EDITOR_ID_RE = re.compile(r"^[a-z0-9]+$")


class ArtefactKind(Enum):
    TASK_MODEL = "task_model"
    DIALOG_MODEL = "dialog_model"
    PROTOTYPE = "prototype"
    DOCUMENT = "document"
    ANNOTATION_SET = "annotation_set"


class VersionStatus(Enum):
    WRITING = "writing"
    WAITING_REVIEW = "waiting_review"
    REVIEWED = "reviewed"
    UPDATING = "updating"
    ARCHIVED = "archived"


# write -> review -> revise cycle; ARCHIVED is reachable from anywhere and
# terminal.
STATUS_EDGES = frozenset(
    {
        (VersionStatus.WRITING, VersionStatus.WAITING_REVIEW),
        (VersionStatus.WAITING_REVIEW, VersionStatus.WRITING),
        (VersionStatus.WAITING_REVIEW, VersionStatus.REVIEWED),
        (VersionStatus.REVIEWED, VersionStatus.UPDATING),
        (VersionStatus.UPDATING, VersionStatus.WAITING_REVIEW),
    }
    | {
        (status, VersionStatus.ARCHIVED)
        for status in VersionStatus
        if status is not VersionStatus.ARCHIVED
    }
)


@dataclass(frozen=True)
class EditorBinding:
    """Which tool produced an artefact and how a client might launch it.
    ``launch_hint`` is informative only."""

    editor_id: str
    display_name: str = ""
    launch_hint: str = ""

    def __post_init__(self):
        if not _EDITOR_ID_RE.match(self.editor_id):
            raise ValueError(f"editor_id must be lowercase alphanumeric: {self.editor_id!r}")


@dataclass(frozen=True)
class ArtefactVersion:
    version_id: int
    path: str
    status: VersionStatus
    created_at: datetime
    content_digest: str


@dataclass(frozen=True)
class Artefact:
    id: str
    name: str
    editor: EditorBinding
    kind: ArtefactKind
    versions: tuple[ArtefactVersion, ...]

    def __post_init__(self):
        object.__setattr__(self, "versions", tuple(self.versions))


def validate_relative_path(path: str) -> str:
    """Project-relative, forward slashes, no '..' segments."""
    if not path:
        raise InvalidPathError("artefact path must be non-empty")
    if "\\" in path:
        raise InvalidPathError(f"artefact path must use forward slashes: {path!r}")
    pure = PurePosixPath(path)
    if pure.is_absolute():
        raise InvalidPathError(f"artefact path must be project-relative: {path!r}")
    if any(part == ".." for part in pure.parts):
        raise InvalidPathError(f"artefact path must not contain '..': {path!r}")
    return path


def compute_digest(root: Path, rel_path: str) -> str:
    """Hex digest of the file's bytes; the algorithm is fixed project-wide."""
    full = root / rel_path
    try:
        data = full.read_bytes()
    except FileNotFoundError:
        raise ArtefactFileNotFoundError(f"file not found: {rel_path}") from None
    except OSError as exc:
        raise ArtefactFileNotFoundError(f"cannot read {rel_path}: {exc}") from None
    return hashlib.sha256(data).hexdigest()


def slugify(text: str) -> str:
    """Lowercase, alphanumeric runs joined by single dashes."""
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "artefact"


def unique_artefact_id(name: str, existing_ids: Sequence[str]) -> str:
    base = slugify(name)
    candidate = base
    suffix = 2
    taken = set(existing_ids)
    while candidate in taken:
        candidate = f"{base}-{suffix}"
        suffix += 1
    return candidate


def register_artefact(
    root: Path,
    existing: Sequence[Artefact],
    name: str,
    path: str,
    editor: EditorBinding,
    kind: ArtefactKind,
    *,
    artefact_id: str | None = None,
    now: datetime | None = None,
) -> Artefact:
    """Register a project file, creating version 1 from its current bytes."""
    if not name:
        raise InvalidPathError("artefact name must be non-empty")
    if any(a.name == name for a in existing):
        raise DuplicateNameError(f"artefact name already registered: {name!r}")
    validate_relative_path(path)
    digest = compute_digest(root, path)
    aid = artefact_id or unique_artefact_id(name, [a.id for a in existing])
    version = ArtefactVersion(
        version_id=1,
        path=path,
        status=VersionStatus.WRITING,
        created_at=now or utcnow(),
        content_digest=digest,
    )
    return Artefact(id=aid, name=name, editor=editor, kind=kind, versions=(version,))


def add_version(
    a: Artefact, path: str, *, root: Path, now: datetime | None = None
) -> Artefact:
    """Append the next version; rejected when the content is byte-identical
    to the current latest (a meaningless version)."""
    validate_relative_path(path)
    digest = compute_digest(root, path)
    latest = latest_version(a)
    if digest == latest.content_digest:
        raise IdenticalContentError(
            f"content of {path!r} is identical to version {latest.version_id}"
        )
    version = ArtefactVersion(
        version_id=latest.version_id + 1,
        path=path,
        status=VersionStatus.WRITING,
        created_at=now or utcnow(),
        content_digest=digest,
    )
    return replace(a, versions=a.versions + (version,))


def set_version_status(a: Artefact, version_id: int, next_status: VersionStatus) -> Artefact:
    versions = list(a.versions)
    for i, version in enumerate(versions):
        if version.version_id == version_id:
            if (version.status, next_status) not in STATUS_EDGES:
                raise IllegalStatusTransitionError(version.status, next_status)
            versions[i] = replace(version, status=next_status)
            return replace(a, versions=tuple(versions))
    raise UnknownVersionError(f"artefact {a.id!r} has no version {version_id}")


def latest_version(a: Artefact) -> ArtefactVersion:
    return max(a.versions, key=lambda v: v.version_id)


def find_artefact(artefacts: Sequence[Artefact], artefact_id: str) -> Artefact:
    for a in artefacts:
        if a.id == artefact_id:
            return a
    raise UnknownArtefactError(f"unknown artefact: {artefact_id!r}")


def resolve_ref(
    artefacts: Sequence[Artefact], artefact_id: str, version: int | None
) -> ArtefactVersion:
    """Resolve (artefact, version) to a concrete version; ``None`` means the
    latest."""
    a = find_artefact(artefacts, artefact_id)
    if version is None:
        return latest_version(a)
    for v in a.versions:
        if v.version_id == version:
            return v
    raise UnknownVersionError(f"artefact {artefact_id!r} has no version {version}")

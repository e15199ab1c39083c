"""File-based project repository.

Layout inside a project directory::

    annoglue.index.json     catalogue of artefacts and annotation-set files
    annotations/<id>.json   one annotation set per file
    annoglue.lock           advisory single-writer lock (pid + timestamp)

All files are canonical JSON (sorted keys, UTF-8, LF) written via
write-temp-then-rename, so equal projects serialize to identical bytes and a
crash can never leave a half-written file. Mutating operations return new
``Project`` snapshots; loaded values are immutable and safe to share between
readers.
"""

from __future__ import annotations

import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Iterator

from . import serialization as codec
from .artefacts import (
    DIGEST_ALGORITHM,
    Artefact,
    ArtefactKind,
    compute_digest,
    find_artefact,
    latest_version,
    resolve_ref,
)
from .canonical import atomic_write_text, canonical_file_text
from .errors import (
    AlreadyInitializedError,
    CorruptIndexError,
    CorruptSetError,
    IoFailureError,
    LockHeldError,
    NotAProjectError,
    UnknownArtefactError,
    UnknownAnnotationError,
    UnknownVersionError,
    UnresolvedTargetError,
    ValidationFailedError,
)
from .model import Annotation, Violation, utcnow, validate_annotation

log = logging.getLogger(__name__)

INDEX_FILENAME = "annoglue.index.json"
ANNOTATIONS_DIR = "annotations"
LOCK_FILENAME = "annoglue.lock"
FORMAT_VERSION = 1

#: Seconds after which another writer may steal the advisory lock.
DEFAULT_LOCK_STALE_AFTER = 600.0


@dataclass(frozen=True)
class AnnotationSetEntry:
    set_id: str
    path: str
    artefact_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "artefact_ids", tuple(self.artefact_ids))


@dataclass(frozen=True)
class ProjectIndex:
    project_name: str
    format_version: int = FORMAT_VERSION
    digest_algorithm: str = DIGEST_ALGORITHM
    artefacts: tuple[Artefact, ...] = ()
    annotation_sets: tuple[AnnotationSetEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "artefacts", tuple(self.artefacts))
        object.__setattr__(self, "annotation_sets", tuple(self.annotation_sets))


@dataclass(frozen=True)
class AnnotationSetFile:
    """One stored set of annotations: who created it, in which session, and
    which artefact files its annotations reference."""

    set_id: str
    username: str
    session: str
    date: datetime
    files: tuple[str, ...] = ()
    annotations: tuple[Annotation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "files", tuple(self.files))
        object.__setattr__(self, "annotations", tuple(self.annotations))


@dataclass(frozen=True)
class Project:
    root: Path
    index: ProjectIndex
    sets: tuple[AnnotationSetFile, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        object.__setattr__(self, "sets", tuple(self.sets))


# --- index / set codecs ------------------------------------------------------


def encode_index(index: ProjectIndex) -> dict:
    return {
        "format_version": index.format_version,
        "project_name": index.project_name,
        "digest_algorithm": index.digest_algorithm,
        "artefacts": [codec.encode_artefact(a) for a in index.artefacts],
        "annotation_sets": [
            {"set_id": e.set_id, "path": e.path, "artefact_ids": list(e.artefact_ids)}
            for e in index.annotation_sets
        ],
    }


def decode_index(data) -> ProjectIndex:
    version = codec._get(data, "format_version", "index")
    if not isinstance(version, int) or isinstance(version, bool):
        raise ValueError("index.format_version: expected integer")
    if version != FORMAT_VERSION:
        raise ValueError(f"index.format_version: unsupported version {version}")
    algorithm = codec._as_str(
        codec._get(data, "digest_algorithm", "index"), "index.digest_algorithm"
    )
    if algorithm != DIGEST_ALGORITHM:
        raise ValueError(f"index.digest_algorithm: unsupported algorithm {algorithm!r}")
    entries = []
    for i, entry in enumerate(
        codec._as_list(codec._get(data, "annotation_sets", "index"), "index.annotation_sets")
    ):
        epath = f"index.annotation_sets[{i}]"
        entries.append(
            AnnotationSetEntry(
                set_id=codec._as_str(codec._get(entry, "set_id", epath), f"{epath}.set_id"),
                path=codec._as_str(codec._get(entry, "path", epath), f"{epath}.path"),
                artefact_ids=tuple(
                    codec._as_str(a, f"{epath}.artefact_ids[{j}]")
                    for j, a in enumerate(
                        codec._as_list(
                            codec._get(entry, "artefact_ids", epath), f"{epath}.artefact_ids"
                        )
                    )
                ),
            )
        )
    artefacts = tuple(
        codec.decode_artefact(a, f"index.artefacts[{i}]")
        for i, a in enumerate(
            codec._as_list(codec._get(data, "artefacts", "index"), "index.artefacts")
        )
    )
    seen_ids = [a.id for a in artefacts]
    if len(set(seen_ids)) != len(seen_ids):
        raise ValueError("index.artefacts: duplicate artefact ids")
    seen_sets = [e.set_id for e in entries]
    if len(set(seen_sets)) != len(seen_sets):
        raise ValueError("index.annotation_sets: duplicate set ids")
    return ProjectIndex(
        project_name=codec._as_str(
            codec._get(data, "project_name", "index"), "index.project_name"
        ),
        format_version=version,
        digest_algorithm=algorithm,
        artefacts=artefacts,
        annotation_sets=tuple(entries),
    )


def encode_set(set_file: AnnotationSetFile) -> dict:
    return {
        "set_id": set_file.set_id,
        "username": set_file.username,
        "session": set_file.session,
        "date": codec.encode_timestamp(set_file.date),
        "files": list(set_file.files),
        "annotations": [codec.encode_annotation(a) for a in set_file.annotations],
    }


def decode_set(data) -> AnnotationSetFile:
    return AnnotationSetFile(
        set_id=codec._as_str(codec._get(data, "set_id", "set"), "set.set_id"),
        username=codec._as_str(codec._get(data, "username", "set"), "set.username"),
        session=codec._as_str(codec._get(data, "session", "set"), "set.session"),
        date=codec.decode_timestamp(codec._get(data, "date", "set"), "set.date"),
        files=tuple(
            codec._as_str(f, f"set.files[{i}]")
            for i, f in enumerate(codec._as_list(codec._get(data, "files", "set"), "set.files"))
        ),
        annotations=tuple(
            codec.decode_annotation(a, f"set.annotations[{i}]")
            for i, a in enumerate(
                codec._as_list(codec._get(data, "annotations", "set"), "set.annotations")
            )
        ),
    )


# --- lifecycle ----------------------------------------------------------------


def init_project(directory: Path, name: str) -> Project:
    """Create the repository layout in an existing directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IoFailureError(f"not a directory: {directory}")
    index_path = directory / INDEX_FILENAME
    if index_path.exists():
        raise AlreadyInitializedError(f"project already initialized: {index_path}")
    index = ProjectIndex(project_name=name)
    try:
        (directory / ANNOTATIONS_DIR).mkdir(exist_ok=True)
    except OSError as exc:
        raise IoFailureError(f"cannot create annotations directory: {exc}") from exc
    atomic_write_text(index_path, canonical_file_text(encode_index(index)))
    return Project(root=directory, index=index, sets=())


def set_path(set_id: str) -> str:
    return f"{ANNOTATIONS_DIR}/{set_id}.json"


def load_project(directory: Path) -> Project:
    directory = Path(directory)
    index_path = directory / INDEX_FILENAME
    if not index_path.is_file():
        raise NotAProjectError(f"no {INDEX_FILENAME} in {directory}")
    try:
        raw = index_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailureError(f"cannot read {index_path}: {exc}") from exc
    try:
        index = decode_index(json.loads(raw))
    except json.JSONDecodeError as exc:
        raise CorruptIndexError(f"invalid JSON at offset {exc.pos}: {exc.msg}") from exc
    except ValueError as exc:
        raise CorruptIndexError(str(exc)) from exc
    sets = []
    for entry in index.annotation_sets:
        sets.append(_load_set(directory, entry.path))
    return Project(root=directory, index=index, sets=tuple(sets))


def _load_set(directory: Path, rel_path: str) -> AnnotationSetFile:
    full = directory / rel_path
    if not full.is_file():
        raise CorruptSetError(rel_path, "file not found")
    try:
        raw = full.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailureError(f"cannot read {full}: {exc}") from exc
    try:
        return decode_set(json.loads(raw))
    except json.JSONDecodeError as exc:
        raise CorruptSetError(rel_path, exc.msg, exc.pos) from exc
    except ValueError as exc:
        raise CorruptSetError(rel_path, str(exc)) from exc


# --- persistence ----------------------------------------------------------------


def _referenced_paths(p: Project, set_file: AnnotationSetFile) -> tuple[str, ...]:
    """Artefact file paths the set's annotations point at (resolved versions;
    unknown pinned versions fall back to the latest path)."""
    paths = set()
    for annotation in set_file.annotations:
        for target in annotation.targets:
            try:
                version = resolve_ref(p.index.artefacts, target.artefact, target.version)
            except UnknownArtefactError:
                continue
            except UnknownVersionError:
                version = latest_version(find_artefact(p.index.artefacts, target.artefact))
            paths.add(version.path)
    return tuple(sorted(paths))


def _validate_set_for_persist(p: Project, set_file: AnnotationSetFile) -> None:
    if not set_file.set_id or not all(
        c.isalnum() or c in "-_." for c in set_file.set_id
    ):
        raise ValidationFailedError(
            f"set_id must be filename-safe (alphanumeric, '-', '_', '.'): {set_file.set_id!r}"
        )
    violations: list[Violation] = []
    ids_here = set()
    for annotation in set_file.annotations:
        for violation in validate_annotation(annotation):
            violations.append(
                Violation(f"{annotation.id}.{violation.location}", violation.rule)
            )
        if not annotation.targets:
            violations.append(Violation(f"{annotation.id}.targets", "persisted annotation needs >= 1 target"))
        if annotation.id in ids_here:
            violations.append(Violation(f"{annotation.id}", "duplicate annotation id in set"))
        ids_here.add(annotation.id)
    for other in p.sets:
        if other.set_id == set_file.set_id:
            continue
        for annotation in other.annotations:
            if annotation.id in ids_here:
                violations.append(
                    Violation(
                        f"{annotation.id}",
                        f"annotation id already lives in set {other.set_id!r}",
                    )
                )
    if violations:
        raise ValidationFailedError(
            "annotation set failed validation: " + "; ".join(str(v) for v in violations),
            violations,
        )
    known = {a.id for a in p.index.artefacts}
    for annotation in set_file.annotations:
        for i, target in enumerate(annotation.targets):
            if target.artefact not in known:
                raise UnresolvedTargetError(
                    f"{annotation.id}.targets[{i}]: unknown artefact {target.artefact!r}"
                )


def _refresh_set_artefact_digests(p: Project, rel_path: str) -> Project:
    """The repository just rewrote ``rel_path``; if that file is registered as
    an ANNOTATION_SET artefact, its recorded digest follows (digest tracking
    exists to catch out-of-band edits, not our own writes)."""
    changed = False
    artefacts = list(p.index.artefacts)
    for i, artefact in enumerate(artefacts):
        if artefact.kind is not ArtefactKind.ANNOTATION_SET:
            continue
        latest = latest_version(artefact)
        if latest.path != rel_path:
            continue
        digest = compute_digest(p.root, rel_path)
        if digest != latest.content_digest:
            versions = tuple(
                replace(v, content_digest=digest) if v.version_id == latest.version_id else v
                for v in artefact.versions
            )
            artefacts[i] = replace(artefact, versions=versions)
            changed = True
    if not changed:
        return p
    return replace(p, index=replace(p.index, artefacts=tuple(artefacts)))


def persist_annotation_set(p: Project, set_file: AnnotationSetFile) -> Project:
    """Validate, write the set file atomically, then update and rewrite the
    index. On failure each file is left whole (old or new, never hybrid)."""
    _validate_set_for_persist(p, set_file)
    set_file = replace(set_file, files=_referenced_paths(p, set_file))
    rel_path = set_path(set_file.set_id)
    atomic_write_text(p.root / rel_path, canonical_file_text(encode_set(set_file)))

    referenced = tuple(
        sorted({t.artefact for a in set_file.annotations for t in a.targets})
    )
    entry = AnnotationSetEntry(set_id=set_file.set_id, path=rel_path, artefact_ids=referenced)
    entries = list(p.index.annotation_sets)
    sets = list(p.sets)
    for i, existing in enumerate(entries):
        if existing.set_id == set_file.set_id:
            entries[i] = entry
            sets[i] = set_file
            break
    else:
        entries.append(entry)
        sets.append(set_file)
    updated = Project(
        root=p.root,
        index=replace(p.index, annotation_sets=tuple(entries)),
        sets=tuple(sets),
    )
    updated = _refresh_set_artefact_digests(updated, rel_path)
    save_index(updated)
    return updated


def save_index(p: Project) -> None:
    atomic_write_text(p.root / INDEX_FILENAME, canonical_file_text(encode_index(p.index)))


def save_project(p: Project) -> None:
    """Write every set file and the index (full canonical save)."""
    (p.root / ANNOTATIONS_DIR).mkdir(exist_ok=True)
    for entry, set_file in zip(p.index.annotation_sets, p.sets):
        atomic_write_text(p.root / entry.path, canonical_file_text(encode_set(set_file)))
    save_index(p)


# --- index rebuild ---------------------------------------------------------------


@dataclass(frozen=True)
class IndexFinding:
    kind: str  # MissingFile | UnlistedSet | DuplicateAnnotation
    path: str
    detail: str


def rebuild_index(directory: Path) -> tuple[ProjectIndex, list[IndexFinding]]:
    """Reconstruct the annotation_sets catalogue by scanning the annotations
    directory. Findings report index entries whose file is gone and on-disk
    sets the index did not list (those entries are restored in the returned
    index). Nothing is written; pass the result to :func:`save_index`."""
    directory = Path(directory)
    project = _load_index_only(directory)
    annotations_dir = directory / ANNOTATIONS_DIR
    try:
        on_disk = sorted(f.name for f in annotations_dir.iterdir() if f.suffix == ".json")
    except OSError as exc:
        raise IoFailureError(f"cannot scan {annotations_dir}: {exc}") from exc

    findings: list[IndexFinding] = []
    listed_paths = {entry.path: entry for entry in project.annotation_sets}
    kept: list[AnnotationSetEntry] = []
    seen_paths = set()
    for entry in project.annotation_sets:
        if (directory / entry.path).is_file():
            kept.append(_entry_from_file(directory, entry.path))
            seen_paths.add(entry.path)
        else:
            findings.append(
                IndexFinding("MissingFile", entry.path, f"indexed set file missing: {entry.path}")
            )
    for name in on_disk:
        rel_path = f"{ANNOTATIONS_DIR}/{name}"
        if rel_path in listed_paths or rel_path in seen_paths:
            continue
        entry = _entry_from_file(directory, rel_path)
        kept.append(entry)
        findings.append(
            IndexFinding("UnlistedSet", rel_path, f"set file not in index: {rel_path}")
        )

    seen_ids: dict[str, str] = {}
    for entry in kept:
        set_file = _load_set(directory, entry.path)
        for annotation in set_file.annotations:
            if annotation.id in seen_ids:
                findings.append(
                    IndexFinding(
                        "DuplicateAnnotation",
                        entry.path,
                        f"annotation {annotation.id} already lives in {seen_ids[annotation.id]}",
                    )
                )
            else:
                seen_ids[annotation.id] = entry.path
    index = replace(project, annotation_sets=tuple(kept))
    return index, findings


def _load_index_only(directory: Path) -> ProjectIndex:
    index_path = directory / INDEX_FILENAME
    if not index_path.is_file():
        raise NotAProjectError(f"no {INDEX_FILENAME} in {directory}")
    try:
        return decode_index(json.loads(index_path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise CorruptIndexError(f"invalid JSON at offset {exc.pos}: {exc.msg}") from exc
    except ValueError as exc:
        raise CorruptIndexError(str(exc)) from exc
    except OSError as exc:
        raise IoFailureError(f"cannot read {index_path}: {exc}") from exc


def _entry_from_file(directory: Path, rel_path: str) -> AnnotationSetEntry:
    set_file = _load_set(directory, rel_path)
    referenced = tuple(sorted({t.artefact for a in set_file.annotations for t in a.targets}))
    return AnnotationSetEntry(set_id=set_file.set_id, path=rel_path, artefact_ids=referenced)


# --- project queries and functional updates ----------------------------------------


def all_annotations(p: Project) -> Iterator[tuple[AnnotationSetFile, Annotation]]:
    for set_file in p.sets:
        for annotation in set_file.annotations:
            yield set_file, annotation


def find_annotation(p: Project, annotation_id: str) -> tuple[AnnotationSetFile, Annotation]:
    for set_file, annotation in all_annotations(p):
        if annotation.id == annotation_id:
            return set_file, annotation
    raise UnknownAnnotationError(f"unknown annotation: {annotation_id!r}")


def replace_annotation(p: Project, annotation: Annotation) -> Project:
    """Swap an annotation in-memory (no disk write); keyed by id."""
    sets = list(p.sets)
    for i, set_file in enumerate(sets):
        for j, existing in enumerate(set_file.annotations):
            if existing.id == annotation.id:
                annotations = list(set_file.annotations)
                annotations[j] = annotation
                sets[i] = replace(set_file, annotations=tuple(annotations))
                return replace(p, sets=tuple(sets))
    raise UnknownAnnotationError(f"unknown annotation: {annotation.id!r}")


def with_artefact(p: Project, artefact: Artefact) -> Project:
    """Add or replace an artefact in the index (no disk write)."""
    artefacts = list(p.index.artefacts)
    for i, existing in enumerate(artefacts):
        if existing.id == artefact.id:
            artefacts[i] = artefact
            break
    else:
        artefacts.append(artefact)
    return replace(p, index=replace(p.index, artefacts=tuple(artefacts)))


def get_set(p: Project, set_id: str) -> AnnotationSetFile | None:
    for set_file in p.sets:
        if set_file.set_id == set_id:
            return set_file
    return None


# --- advisory lock -------------------------------------------------------------------


@contextmanager
def project_lock(root: Path, *, stale_after: float = DEFAULT_LOCK_STALE_AFTER):
    """Single-writer advisory lock. A lock older than ``stale_after`` seconds
    is presumed abandoned and stolen with a warning."""
    root = Path(root)
    lock_path = root / LOCK_FILENAME
    payload = canonical_file_text(
        {"pid": os.getpid(), "acquired_at": codec.encode_timestamp(utcnow())}
    )
    acquired = False
    try:
        try:
            with open(lock_path, "x", encoding="utf-8") as handle:
                handle.write(payload)
            acquired = True
        except FileExistsError:
            age = _lock_age_seconds(lock_path)
            if age is not None and age <= stale_after:
                raise LockHeldError(
                    f"project is locked by another writer ({lock_path}, {age:.0f}s old)"
                ) from None
            log.warning("stealing stale lock %s", lock_path)
            atomic_write_text(lock_path, payload)
            acquired = True
        except OSError as exc:
            raise IoFailureError(f"cannot acquire lock {lock_path}: {exc}") from exc
        yield
    finally:
        if acquired:
            try:
                lock_path.unlink()
            except OSError:
                pass


def _lock_age_seconds(lock_path: Path) -> float | None:
    try:
        data = json.loads(lock_path.read_text(encoding="utf-8"))
        stamp = codec.decode_timestamp(data["acquired_at"])
    except (OSError, ValueError, KeyError, TypeError):
        return None  # unreadable lock: treat as stale
    return (utcnow() - stamp).total_seconds()

"""W3C Web Annotation import/export.

Exports each annotation as a standalone JSON-LD document under the Web
Annotation context. Text bodies map onto ``TextualBody``; the structured
variants become bodies of a custom ``ext:`` type that keep their fields and
always carry a plain-text ``value`` fallback, so foreign consumers can at
least read them and foreign documents degrade to text on import. Placement,
function, audience, roles and lifecycle state ride along under ``ext:`` keys;
strict JSON-LD processors will drop them, which is the intended degradation.
"""

from __future__ import annotations

import re
from typing import Any

from . import model
from . import serialization as codec
from .artefacts import resolve_ref
from .canonical import canonical_dumps
from .errors import (
    NoMappableTargetError,
    NotAnAnnotationError,
    UnknownArtefactError,
    UnknownVersionError,
    UnresolvedTargetError,
)
from .model import (
    Annotation,
    AnnotationFunction,
    Creator,
    ElementId,
    Fragment,
    LifecycleState,
    Metadata,
    Motivation,
    Region,
    Role,
    Target,
    TextBody,
    WholeArtefact,
    body_text,
)
from .repository import Project

WEB_ANNOTATION_CONTEXT = "http://www.w3.org/ns/anno.jsonld"
MEDIA_FRAGMENTS = "http://www.w3.org/TR/media-frags/"
ID_PREFIX = "urn:annoglue:"

_XYWH_RE = re.compile(r"^xywh=([-0-9.eE]+),([-0-9.eE]+),([-0-9.eE]+),([-0-9.eE]+)$")

#: Defaults applied to foreign documents that lack our extension fields.
DEFAULT_IMPORT_FUNCTION = AnnotationFunction.CONTRIBUTIVE
DEFAULT_IMPORT_ROLE = Role("imported")


def _ext_body_type(body: model.Body) -> str:
    return "ext:" + type(body).__name__.removesuffix("Body")


def export_w3c(a: Annotation, p: Project) -> str:
    """Render one annotation as a JSON-LD Web Annotation document (text)."""
    targets = []
    for target in a.targets:
        try:
            version = resolve_ref(p.index.artefacts, target.artefact, target.version)
        except (UnknownArtefactError, UnknownVersionError) as exc:
            raise UnresolvedTargetError(
                f"cannot export {a.id}: target does not resolve ({exc})"
            ) from exc
        entry: dict[str, Any] = {"source": version.path}
        selector = _export_selector(target.selector)
        if selector is not None:
            entry["selector"] = selector
        entry["ext:presentation"] = codec.encode_presentation(target.presentation)
        entry["ext:version"] = (
            codec.ANY_VERSION_TOKEN if target.version is None else target.version
        )
        targets.append(entry)

    body = codec.encode_body(a.body)
    if isinstance(a.body, TextBody):
        w3c_body: dict[str, Any] = {
            "type": "TextualBody",
            "value": a.body.content,
            "format": "text/plain",
        }
    else:
        w3c_body = {key: value for key, value in body.items() if key != "type"}
        w3c_body["type"] = _ext_body_type(a.body)
        w3c_body["value"] = body_text(a.body)

    doc: dict[str, Any] = {
        "@context": WEB_ANNOTATION_CONTEXT,
        "type": "Annotation",
        "id": ID_PREFIX + a.id,
        "created": codec.encode_timestamp(a.metadata.created_at),
        "modified": codec.encode_timestamp(a.metadata.modified_at),
        "creator": {
            "type": "Person",
            "id": a.metadata.creator.user_id,
            "name": a.metadata.creator.display_name,
            "ext:roles": sorted(role.label for role in a.metadata.creator.roles),
        },
        "motivation": a.metadata.motivation.value,
        "body": w3c_body,
        "target": targets,
        "ext:function": a.function.value,
        "ext:state": a.state.value,
        "ext:audience": sorted(role.label for role in a.metadata.audience),
    }
    if a.metadata.purpose:
        doc["ext:purpose"] = a.metadata.purpose
    return canonical_dumps(doc, indent=2)


def _export_selector(selector: model.Selector) -> dict | None:
    if isinstance(selector, WholeArtefact):
        return None
    if isinstance(selector, Region):
        return {
            "type": "FragmentSelector",
            "conformsTo": MEDIA_FRAGMENTS,
            "value": f"xywh={_num(selector.x)},{_num(selector.y)},{_num(selector.w)},{_num(selector.h)}",
        }
    if isinstance(selector, ElementId):
        return {
            "type": "ext:ElementIdSelector",
            "value": "/".join(selector.path),
            "ext:path": list(selector.path),
        }
    if isinstance(selector, Fragment):
        return {
            "type": "FragmentSelector",
            "conformsTo": selector.scheme,
            "value": selector.expression,
        }
    raise TypeError(f"unknown selector variant: {type(selector).__name__}")


def _num(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


# --- import ---------------------------------------------------------------------


def import_w3c(doc: dict, p: Project) -> tuple[Annotation, list[str]]:
    """Build an Annotation from a Web Annotation document.

    Unknown body types degrade to a text body using the document's textual
    fallback; targets whose source does not match any registered artefact
    path are dropped and reported in the returned warning list.
    """
    if not isinstance(doc, dict):
        raise NotAnAnnotationError("document is not a JSON object")
    doc_type = doc.get("type")
    types = doc_type if isinstance(doc_type, list) else [doc_type]
    if "Annotation" not in types:
        raise NotAnAnnotationError(f"document type is {doc_type!r}, not 'Annotation'")

    warnings: list[str] = []
    targets, target_warnings = _import_targets(doc, p)
    warnings.extend(target_warnings)
    if not targets:
        raise NoMappableTargetError("no target source matches a registered artefact path")

    raw_id = doc.get("id")
    if isinstance(raw_id, str) and raw_id:
        annotation_id = raw_id.removeprefix(ID_PREFIX)
    else:
        annotation_id = model.new_annotation_id()

    body, body_warnings = _import_body(doc)
    warnings.extend(body_warnings)

    now = model.utcnow()
    created = _maybe_timestamp(doc.get("created"), now, warnings, "created")
    modified = _maybe_timestamp(doc.get("modified"), created, warnings, "modified")
    if modified < created:
        modified = created

    annotation = Annotation(
        id=annotation_id,
        body=body,
        function=_import_enum(
            AnnotationFunction, doc.get("ext:function"), DEFAULT_IMPORT_FUNCTION, warnings
        ),
        metadata=Metadata(
            created_at=created,
            modified_at=modified,
            creator=_import_creator(doc.get("creator")),
            audience=_import_roles(doc.get("ext:audience")),
            motivation=_import_enum(
                Motivation, doc.get("motivation"), Motivation.COMMENTING, warnings
            ),
            purpose=doc.get("ext:purpose") if isinstance(doc.get("ext:purpose"), str) else "",
        ),
        targets=tuple(targets),
        state=_import_enum(LifecycleState, doc.get("ext:state"), LifecycleState.OPEN, warnings),
    )
    return annotation, warnings


def _import_targets(doc: dict, p: Project) -> tuple[list[Target], list[str]]:
    raw = doc.get("target")
    items = raw if isinstance(raw, list) else [raw] if raw is not None else []
    paths_to_artefact: dict[str, str] = {}
    for artefact in p.index.artefacts:
        for version in artefact.versions:
            paths_to_artefact.setdefault(version.path, artefact.id)

    targets: list[Target] = []
    warnings: list[str] = []
    for item in items:
        if isinstance(item, str):
            source, entry = item, {}
        elif isinstance(item, dict):
            source, entry = item.get("source"), item
        else:
            warnings.append(f"dropped unreadable target: {item!r}")
            continue
        artefact_id = paths_to_artefact.get(source) if isinstance(source, str) else None
        if artefact_id is None:
            warnings.append(f"dropped target with unknown source: {source!r}")
            continue
        selector, selector_warnings = _import_selector(entry.get("selector"))
        warnings.extend(selector_warnings)
        raw_version = entry.get("ext:version")
        version = raw_version if isinstance(raw_version, int) and not isinstance(raw_version, bool) else None
        raw_presentation = entry.get("ext:presentation")
        if isinstance(raw_presentation, dict):
            try:
                presentation = codec.decode_presentation(raw_presentation)
            except ValueError:
                warnings.append("ignored malformed ext:presentation")
                presentation = model.DEFAULT_PRESENTATION
        else:
            presentation = model.DEFAULT_PRESENTATION
        targets.append(
            Target(
                artefact=artefact_id,
                version=version,
                selector=selector,
                presentation=presentation,
            )
        )
    return targets, warnings


def _import_selector(raw) -> tuple[model.Selector, list[str]]:
    if raw is None:
        return WholeArtefact(), []
    if isinstance(raw, list):
        raw = raw[0] if raw else None
        if raw is None:
            return WholeArtefact(), []
    if not isinstance(raw, dict):
        return WholeArtefact(), [f"ignored unreadable selector: {raw!r}"]
    kind = raw.get("type")
    value = raw.get("value")
    if kind == "FragmentSelector":
        if raw.get("conformsTo") == MEDIA_FRAGMENTS and isinstance(value, str):
            match = _XYWH_RE.match(value)
            if match:
                x, y, w, h = (_parse_num(g) for g in match.groups())
                return Region(x, y, w, h), []
        if isinstance(value, str) and value:
            scheme = raw.get("conformsTo") if isinstance(raw.get("conformsTo"), str) else ""
            return Fragment(expression=value, scheme=scheme), []
        return WholeArtefact(), ["ignored FragmentSelector without a value"]
    if kind == "ext:ElementIdSelector":
        path = raw.get("ext:path")
        if isinstance(path, list) and all(isinstance(part, str) for part in path):
            return ElementId(tuple(path)), []
        if isinstance(value, str) and value:
            return ElementId(tuple(value.split("/"))), []
        return WholeArtefact(), ["ignored ElementIdSelector without a path"]
    return WholeArtefact(), [f"ignored unsupported selector type {kind!r}"]


def _parse_num(text: str) -> float:
    value = float(text)
    return int(value) if value.is_integer() else value


def _import_body(doc: dict) -> tuple[model.Body, list[str]]:
    raw = doc.get("body")
    if raw is None and isinstance(doc.get("bodyValue"), str):
        raw = {"type": "TextualBody", "value": doc["bodyValue"]}
    if isinstance(raw, list):
        raw = raw[0] if raw else None
    if not isinstance(raw, dict):
        return TextBody("[imported annotation without body]"), ["document has no readable body"]

    kind = raw.get("type")
    kind = kind[0] if isinstance(kind, list) and kind else kind
    if isinstance(kind, str) and kind.startswith("ext:"):
        native = {"type": _snake(kind.removeprefix("ext:"))}
        native.update({k: v for k, v in raw.items() if k not in ("type", "value")})
        try:
            return codec.decode_body(native), []
        except ValueError as exc:
            fallback = raw.get("value") if isinstance(raw.get("value"), str) else ""
            return (
                TextBody(fallback or f"[unreadable {kind} body]"),
                [f"degraded {kind} body to text: {exc}"],
            )
    value = raw.get("value")
    if kind == "TextualBody" and isinstance(value, str) and value:
        return TextBody(value), []
    fallback = value if isinstance(value, str) and value else f"[imported {kind or 'unknown'} body]"
    warnings = [] if kind == "TextualBody" else [f"degraded {kind!r} body to text"]
    return TextBody(fallback), warnings


def _snake(name: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", name).lower()


def _import_creator(raw) -> Creator:
    if isinstance(raw, str) and raw:
        return Creator(user_id=raw, display_name=raw, roles=frozenset({DEFAULT_IMPORT_ROLE}))
    if isinstance(raw, dict):
        user_id = raw.get("id") or raw.get("name") or "unknown"
        name = raw.get("name") or user_id
        roles = _import_roles(raw.get("ext:roles"))
        return Creator(
            user_id=str(user_id),
            display_name=str(name),
            roles=roles or frozenset({DEFAULT_IMPORT_ROLE}),
        )
    return Creator(user_id="unknown", display_name="unknown", roles=frozenset({DEFAULT_IMPORT_ROLE}))


def _import_roles(raw) -> frozenset[Role]:
    if not isinstance(raw, list):
        return frozenset()
    roles = set()
    for label in raw:
        if isinstance(label, str) and label:
            try:
                roles.add(Role(label))
            except ValueError:
                continue
    return frozenset(roles)


def _import_enum(enum_type, raw, default, warnings: list[str]):
    if raw is None:
        return default
    if isinstance(raw, str):
        try:
            return enum_type(raw)
        except ValueError:
            pass
    warnings.append(f"unsupported {enum_type.__name__} value {raw!r}; using {default.value}")
    return default


def _maybe_timestamp(raw, default, warnings: list[str], field: str):
    if raw is None:
        return default
    try:
        return codec.decode_timestamp(raw, field)
    except ValueError:
        warnings.append(f"ignored malformed {field} timestamp {raw!r}")
        return default

"""JSON codec for domain values.

Encoders emit plain dict/list/str/number structures ready for canonical
dumping; decoders rebuild domain values and raise ``ValueError`` with a
``path: problem`` message on any schema violation (the repository layer wraps
those into its corruption errors).
"""

from __future__ import annotations

from datetime import datetime, timezone
from typing import Mapping

from . import model
from .artefacts import (
    Artefact,
    ArtefactKind,
    ArtefactVersion,
    EditorBinding,
    VersionStatus,
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
    ImageBody,
    LifecycleState,
    MarkerBody,
    Metadata,
    Motivation,
    Presentation,
    Region,
    Role,
    ScenarioBody,
    ScenarioStep,
    StepKeyword,
    Target,
    TextBody,
    VoteBody,
    WholeArtefact,
)

ANY_VERSION_TOKEN = "any"


def _fail(path: str, message: str) -> None:
    raise ValueError(f"{path}: {message}")


def _get(data: Mapping, key: str, path: str):
    if not isinstance(data, Mapping):
        _fail(path, f"expected object, got {type(data).__name__}")
    if key not in data:
        _fail(path, f"missing field {key!r}")
    return data[key]


def _as_str(value, path: str) -> str:
    if not isinstance(value, str):
        _fail(path, f"expected string, got {type(value).__name__}")
    return value


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected number, got {type(value).__name__}")
    return value


def _as_list(value, path: str) -> list:
    if not isinstance(value, list):
        _fail(path, f"expected array, got {type(value).__name__}")
    return value


def _as_enum(enum_type, value, path: str):
    text = _as_str(value, path)
    try:
        return enum_type(text)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_type)
        _fail(path, f"invalid value {text!r}; expected one of: {allowed}")


# --- timestamps -----------------------------------------------------------


def encode_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).replace(microsecond=0).strftime("%Y-%m-%dT%H:%M:%SZ")


def decode_timestamp(value, path: str = "timestamp") -> datetime:
    text = _as_str(value, path)
    try:
        parsed = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        _fail(path, f"invalid ISO-8601 timestamp: {text!r}")
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc).replace(microsecond=0)


# --- creator / metadata -----------------------------------------------------


def encode_creator(creator: Creator) -> dict:
    return {
        "user_id": creator.user_id,
        "display_name": creator.display_name,
        "roles": sorted(role.label for role in creator.roles),
    }


def decode_creator(data, path: str = "creator") -> Creator:
    roles = []
    for i, label in enumerate(_as_list(_get(data, "roles", path), f"{path}.roles")):
        try:
            roles.append(Role(_as_str(label, f"{path}.roles[{i}]")))
        except ValueError as exc:
            _fail(f"{path}.roles[{i}]", str(exc))
    return Creator(
        user_id=_as_str(_get(data, "user_id", path), f"{path}.user_id"),
        display_name=_as_str(_get(data, "display_name", path), f"{path}.display_name"),
        roles=frozenset(roles),
    )


def encode_metadata(meta: Metadata) -> dict:
    return {
        "created_at": encode_timestamp(meta.created_at),
        "modified_at": encode_timestamp(meta.modified_at),
        "creator": encode_creator(meta.creator),
        "audience": sorted(role.label for role in meta.audience),
        "motivation": meta.motivation.value,
        "purpose": meta.purpose,
    }


def decode_metadata(data, path: str = "metadata") -> Metadata:
    audience = frozenset(
        Role(_as_str(label, f"{path}.audience[{i}]"))
        for i, label in enumerate(_as_list(_get(data, "audience", path), f"{path}.audience"))
    )
    return Metadata(
        created_at=decode_timestamp(_get(data, "created_at", path), f"{path}.created_at"),
        modified_at=decode_timestamp(_get(data, "modified_at", path), f"{path}.modified_at"),
        creator=decode_creator(_get(data, "creator", path), f"{path}.creator"),
        audience=audience,
        motivation=_as_enum(Motivation, _get(data, "motivation", path), f"{path}.motivation"),
        purpose=_as_str(_get(data, "purpose", path), f"{path}.purpose"),
    )


# --- bodies -----------------------------------------------------------------


def encode_body(body: model.Body) -> dict:
    if isinstance(body, TextBody):
        return {"type": "text", "content": body.content}
    if isinstance(body, DrawingBody):
        return {
            "type": "drawing",
            "strokes": [[[x, y] for x, y in stroke] for stroke in body.strokes],
        }
    if isinstance(body, ImageBody):
        return {"type": "image", "uri": body.uri, "alt": body.alt}
    if isinstance(body, MarkerBody):
        return {"type": "marker", "glyph": body.glyph, "label": body.label}
    if isinstance(body, VoteBody):
        return {
            "type": "vote",
            "label": body.label,
            "ballots": {uid: choice.value for uid, choice in body.ballots.items()},
        }
    if isinstance(body, ScenarioBody):
        return {
            "type": "scenario",
            "title": body.title,
            "steps": [{"keyword": s.keyword.value, "text": s.text} for s in body.steps],
        }
    if isinstance(body, ExternalFileBody):
        return {"type": "external_file", "label": body.label, "link": body.link}
    raise TypeError(f"unknown body variant: {type(body).__name__}")


def decode_body(data, path: str = "body") -> model.Body:
    kind = _as_str(_get(data, "type", path), f"{path}.type")
    if kind == "text":
        return TextBody(content=_as_str(_get(data, "content", path), f"{path}.content"))
    if kind == "drawing":
        strokes = []
        for i, stroke in enumerate(_as_list(_get(data, "strokes", path), f"{path}.strokes")):
            points = []
            for j, point in enumerate(_as_list(stroke, f"{path}.strokes[{i}]")):
                coords = _as_list(point, f"{path}.strokes[{i}][{j}]")
                if len(coords) != 2:
                    _fail(f"{path}.strokes[{i}][{j}]", "point must be [x, y]")
                points.append(
                    (
                        _as_number(coords[0], f"{path}.strokes[{i}][{j}][0]"),
                        _as_number(coords[1], f"{path}.strokes[{i}][{j}][1]"),
                    )
                )
            strokes.append(tuple(points))
        return DrawingBody(strokes=tuple(strokes))
    if kind == "image":
        return ImageBody(
            uri=_as_str(_get(data, "uri", path), f"{path}.uri"),
            alt=_as_str(_get(data, "alt", path), f"{path}.alt"),
        )
    if kind == "marker":
        return MarkerBody(
            glyph=_as_str(_get(data, "glyph", path), f"{path}.glyph"),
            label=_as_str(_get(data, "label", path), f"{path}.label"),
        )
    if kind == "vote":
        raw = _get(data, "ballots", path)
        if not isinstance(raw, Mapping):
            _fail(f"{path}.ballots", f"expected object, got {type(raw).__name__}")
        ballots = {
            _as_str(uid, f"{path}.ballots key"): _as_enum(
                Choice, choice, f"{path}.ballots[{uid}]"
            )
            for uid, choice in raw.items()
        }
        return VoteBody(label=_as_str(_get(data, "label", path), f"{path}.label"), ballots=ballots)
    if kind == "scenario":
        steps = []
        for i, step in enumerate(_as_list(_get(data, "steps", path), f"{path}.steps")):
            steps.append(
                ScenarioStep(
                    keyword=_as_enum(
                        StepKeyword, _get(step, "keyword", f"{path}.steps[{i}]"),
                        f"{path}.steps[{i}].keyword",
                    ),
                    text=_as_str(_get(step, "text", f"{path}.steps[{i}]"), f"{path}.steps[{i}].text"),
                )
            )
        return ScenarioBody(
            title=_as_str(_get(data, "title", path), f"{path}.title"), steps=tuple(steps)
        )
    if kind == "external_file":
        return ExternalFileBody(
            label=_as_str(_get(data, "label", path), f"{path}.label"),
            link=_as_str(_get(data, "link", path), f"{path}.link"),
        )
    _fail(f"{path}.type", f"unknown body type {kind!r}")


# --- selectors / targets ------------------------------------------------------


def encode_selector(selector: model.Selector) -> dict:
    if isinstance(selector, WholeArtefact):
        return {"type": "whole"}
    if isinstance(selector, ElementId):
        return {"type": "element_id", "path": list(selector.path)}
    if isinstance(selector, Region):
        return {"type": "region", "x": selector.x, "y": selector.y, "w": selector.w, "h": selector.h}
    if isinstance(selector, Fragment):
        return {"type": "fragment", "expression": selector.expression, "scheme": selector.scheme}
    raise TypeError(f"unknown selector variant: {type(selector).__name__}")


def decode_selector(data, path: str = "selector") -> model.Selector:
    kind = _as_str(_get(data, "type", path), f"{path}.type")
    if kind == "whole":
        return WholeArtefact()
    if kind == "element_id":
        return ElementId(
            path=tuple(
                _as_str(part, f"{path}.path[{i}]")
                for i, part in enumerate(_as_list(_get(data, "path", path), f"{path}.path"))
            )
        )
    if kind == "region":
        return Region(
            x=_as_number(_get(data, "x", path), f"{path}.x"),
            y=_as_number(_get(data, "y", path), f"{path}.y"),
            w=_as_number(_get(data, "w", path), f"{path}.w"),
            h=_as_number(_get(data, "h", path), f"{path}.h"),
        )
    if kind == "fragment":
        return Fragment(
            expression=_as_str(_get(data, "expression", path), f"{path}.expression"),
            scheme=_as_str(_get(data, "scheme", path), f"{path}.scheme"),
        )
    _fail(f"{path}.type", f"unknown selector type {kind!r}")


def encode_presentation(p: Presentation) -> dict:
    return {"x": p.x, "y": p.y, "width": p.width, "height": p.height}


def decode_presentation(data, path: str = "presentation") -> Presentation:
    return Presentation(
        x=_as_number(_get(data, "x", path), f"{path}.x"),
        y=_as_number(_get(data, "y", path), f"{path}.y"),
        width=_as_number(_get(data, "width", path), f"{path}.width"),
        height=_as_number(_get(data, "height", path), f"{path}.height"),
    )


def encode_target(target: Target) -> dict:
    return {
        "artefact": target.artefact,
        "version": ANY_VERSION_TOKEN if target.version is None else target.version,
        "selector": encode_selector(target.selector),
        "presentation": encode_presentation(target.presentation),
    }


def decode_target(data, path: str = "target") -> Target:
    raw_version = _get(data, "version", path)
    if raw_version == ANY_VERSION_TOKEN:
        version = None
    elif isinstance(raw_version, bool) or not isinstance(raw_version, int):
        _fail(f"{path}.version", f"expected integer or {ANY_VERSION_TOKEN!r}")
    else:
        version = raw_version
    return Target(
        artefact=_as_str(_get(data, "artefact", path), f"{path}.artefact"),
        version=version,
        selector=decode_selector(_get(data, "selector", path), f"{path}.selector"),
        presentation=decode_presentation(
            _get(data, "presentation", path), f"{path}.presentation"
        ),
    )


# --- annotations ---------------------------------------------------------------


def encode_annotation(a: Annotation) -> dict:
    return {
        "id": a.id,
        "state": a.state.value,
        "function": a.function.value,
        "body": encode_body(a.body),
        "metadata": encode_metadata(a.metadata),
        "targets": [encode_target(t) for t in a.targets],
    }


def decode_annotation(data, path: str = "annotation") -> Annotation:
    return Annotation(
        id=_as_str(_get(data, "id", path), f"{path}.id"),
        state=_as_enum(LifecycleState, _get(data, "state", path), f"{path}.state"),
        function=_as_enum(AnnotationFunction, _get(data, "function", path), f"{path}.function"),
        body=decode_body(_get(data, "body", path), f"{path}.body"),
        metadata=decode_metadata(_get(data, "metadata", path), f"{path}.metadata"),
        targets=tuple(
            decode_target(t, f"{path}.targets[{i}]")
            for i, t in enumerate(_as_list(_get(data, "targets", path), f"{path}.targets"))
        ),
    )


# --- artefacts -----------------------------------------------------------------


def encode_artefact(a: Artefact) -> dict:
    return {
        "id": a.id,
        "name": a.name,
        "kind": a.kind.value,
        "editor": {
            "editor_id": a.editor.editor_id,
            "display_name": a.editor.display_name,
            "launch_hint": a.editor.launch_hint,
        },
        "versions": [
            {
                "version_id": v.version_id,
                "path": v.path,
                "status": v.status.value,
                "created_at": encode_timestamp(v.created_at),
                "content_digest": v.content_digest,
            }
            for v in a.versions
        ],
    }


def decode_artefact(data, path: str = "artefact") -> Artefact:
    editor_data = _get(data, "editor", path)
    try:
        editor = EditorBinding(
            editor_id=_as_str(_get(editor_data, "editor_id", f"{path}.editor"), f"{path}.editor.editor_id"),
            display_name=_as_str(
                _get(editor_data, "display_name", f"{path}.editor"), f"{path}.editor.display_name"
            ),
            launch_hint=_as_str(
                _get(editor_data, "launch_hint", f"{path}.editor"), f"{path}.editor.launch_hint"
            ),
        )
    except ValueError as exc:
        _fail(f"{path}.editor", str(exc))
    versions = []
    for i, v in enumerate(_as_list(_get(data, "versions", path), f"{path}.versions")):
        vpath = f"{path}.versions[{i}]"
        version_id = _get(v, "version_id", vpath)
        if isinstance(version_id, bool) or not isinstance(version_id, int):
            _fail(f"{vpath}.version_id", "expected integer")
        versions.append(
            ArtefactVersion(
                version_id=version_id,
                path=_as_str(_get(v, "path", vpath), f"{vpath}.path"),
                status=_as_enum(VersionStatus, _get(v, "status", vpath), f"{vpath}.status"),
                created_at=decode_timestamp(_get(v, "created_at", vpath), f"{vpath}.created_at"),
                content_digest=_as_str(_get(v, "content_digest", vpath), f"{vpath}.content_digest"),
            )
        )
    return Artefact(
        id=_as_str(_get(data, "id", path), f"{path}.id"),
        name=_as_str(_get(data, "name", path), f"{path}.name"),
        kind=_as_enum(ArtefactKind, _get(data, "kind", path), f"{path}.kind"),
        editor=editor,
        versions=tuple(versions),
    )

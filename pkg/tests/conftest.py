"""Shared fixtures: the weather-radar case-study project used across suites."""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import pytest

from annoglue import linker, repository
from annoglue.artefacts import ArtefactKind, EditorBinding, register_artefact
from annoglue.model import (
    DEFAULT_PRESENTATION,
    DESIGNER,
    AnnotationFunction,
    Creator,
    ExternalFileBody,
    Motivation,
    Presentation,
    Target,
    TextBody,
    WholeArtefact,
    attach_target,
    create_annotation,
)

FIXED_NOW = datetime(2024, 3, 1, 12, 0, 0, tzinfo=timezone.utc)

MODE_TEXTS = (
    "OFF = Switch OFF",
    "STDY = Switch for test only",
    "TST = trigger for hardware checkup",
    "WxON = activate radar detection",
    "WXA = Focus detection on alert",
)

PROTO_ID = "wxr-prototype"
ICO_ID = "wxr-behavior"
MODE_IDS = tuple(f"mode-{i}" for i in range(1, 6))
TODO_ID = "todo-ergonomic"


def build_case_study(root: Path, *, now: datetime = FIXED_NOW) -> repository.Project:
    """Prototype + dialog-model artefacts, five mode explanations imported
    onto the dialog model, and one external-file reminder."""
    root = Path(root)
    (root / "WXR - V0.prstn").write_text("prototype content v0", encoding="utf-8")
    (root / "MPIA_WXR.xml").write_text("<ico>mode selection</ico>", encoding="utf-8")
    (root / "criteria.pdf").write_text("%PDF- placeholder", encoding="utf-8")

    p = repository.init_project(root, "WXR")
    proto = register_artefact(
        root,
        p.index.artefacts,
        name="WXR prototype",
        path="WXR - V0.prstn",
        editor=EditorBinding("pandaannotation"),
        kind=ArtefactKind.PROTOTYPE,
        now=now,
    )
    p = repository.with_artefact(p, proto)
    ico = register_artefact(
        root,
        p.index.artefacts,
        name="WXR behavior",
        path="MPIA_WXR.xml",
        editor=EditorBinding("petshop"),
        kind=ArtefactKind.DIALOG_MODEL,
        now=now,
    )
    p = repository.with_artefact(p, ico)
    repository.save_index(p)
    assert proto.id == PROTO_ID and ico.id == ICO_ID

    creator = Creator("jlh", "jlh", frozenset({DESIGNER}))
    annotations = []
    for i, text in enumerate(MODE_TEXTS):
        annotation = create_annotation(
            TextBody(text),
            AnnotationFunction.DESCRIPTIVE,
            creator,
            Motivation.DESCRIBING,
            now=now,
            annotation_id=MODE_IDS[i],
        )
        annotation = attach_target(
            annotation,
            Target(PROTO_ID, 1, WholeArtefact(), Presentation(400, 40 * i, 160, 40)),
            now=now,
        )
        annotations.append(annotation)
    todo = create_annotation(
        ExternalFileBody("TODO: Ergonomic inspection reference", "criteria.pdf"),
        AnnotationFunction.ORGANIZATIONAL,
        creator,
        Motivation.BOOKMARKING,
        now=now,
        annotation_id=TODO_ID,
    )
    todo = attach_target(
        todo, Target(PROTO_ID, 1, WholeArtefact(), DEFAULT_PRESENTATION), now=now
    )

    set_file = repository.AnnotationSetFile(
        set_id=PROTO_ID,
        username="jlh",
        session="",
        date=now,
        annotations=tuple(annotations) + (todo,),
    )
    p = repository.persist_annotation_set(p, set_file)
    return linker.import_into_artefact(p, MODE_IDS, (ICO_ID, 1), now=now)


@pytest.fixture
def case_study(tmp_path) -> repository.Project:
    return build_case_study(tmp_path)

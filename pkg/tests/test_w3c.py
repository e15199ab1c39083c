from __future__ import annotations

import json

import pytest

from annoglue import repository, w3c
from annoglue.errors import (
    NoMappableTargetError,
    NotAnAnnotationError,
    UnresolvedTargetError,
)
from annoglue.model import (
    DESIGNER,
    AnnotationFunction,
    Choice,
    Creator,
    ElementId,
    Fragment,
    Motivation,
    Presentation,
    Region,
    Target,
    TextBody,
    VoteBody,
    WholeArtefact,
    attach_target,
    cast_vote,
    create_annotation,
    parse_scenario,
)
from conftest import FIXED_NOW, MODE_IDS, PROTO_ID, TODO_ID

CREATOR = Creator("jlh", "Jean-Luc", frozenset({DESIGNER}))


def get(p, annotation_id):
    return repository.find_annotation(p, annotation_id)[1]


class TestExport:
    def test_document_shape(self, case_study):
        doc = json.loads(w3c.export_w3c(get(case_study, MODE_IDS[0]), case_study))
        assert doc["@context"] == "http://www.w3.org/ns/anno.jsonld"
        assert doc["type"] == "Annotation"
        assert doc["id"] == f"urn:annoglue:{MODE_IDS[0]}"
        assert doc["body"]["type"] == "TextualBody"
        assert doc["body"]["value"] == "OFF = Switch OFF"
        assert doc["motivation"] == "describing"
        assert doc["creator"]["id"] == "jlh"
        assert len(doc["target"]) == 2
        sources = {t["source"] for t in doc["target"]}
        assert sources == {"WXR - V0.prstn", "MPIA_WXR.xml"}

    def test_whole_artefact_target_has_no_selector(self, case_study):
        doc = json.loads(w3c.export_w3c(get(case_study, MODE_IDS[0]), case_study))
        assert all("selector" not in t for t in doc["target"])

    def test_region_maps_to_media_fragment(self, case_study):
        a = create_annotation(
            TextBody("zoom here"), AnnotationFunction.ATTENTIONAL, CREATOR,
            Motivation.COMMENTING, now=FIXED_NOW,
        )
        a = attach_target(
            a, Target(PROTO_ID, 1, Region(10, 20, 160, 40), Presentation(0, 0, 10, 10))
        )
        doc = json.loads(w3c.export_w3c(a, case_study))
        selector = doc["target"][0]["selector"]
        assert selector["type"] == "FragmentSelector"
        assert selector["value"] == "xywh=10,20,160,40"

    def test_unresolved_target_rejected(self, case_study):
        a = create_annotation(
            TextBody("dangling"), AnnotationFunction.DESCRIPTIVE, CREATOR,
            Motivation.COMMENTING, now=FIXED_NOW,
        )
        a = attach_target(a, Target("ghost", 1, WholeArtefact(), Presentation(0, 0, 1, 1)))
        with pytest.raises(UnresolvedTargetError):
            w3c.export_w3c(a, case_study)


class TestRoundTrip:
    def test_all_fixture_annotations_round_trip_exactly(self, case_study):
        for _, annotation in repository.all_annotations(case_study):
            doc = json.loads(w3c.export_w3c(annotation, case_study))
            back, warnings = w3c.import_w3c(doc, case_study)
            assert warnings == []
            assert back == annotation  # nothing in the fixture is lossy

    def test_structured_bodies_round_trip(self, case_study):
        vote = create_annotation(
            VoteBody("keep labels verbose?"), AnnotationFunction.CONTRIBUTIVE, CREATOR,
            Motivation.ASSESSING, now=FIXED_NOW,
        )
        vote = cast_vote(vote, Creator("u1", "u1", frozenset({DESIGNER})), Choice.AGREE, now=FIXED_NOW)
        vote = attach_target(
            vote, Target(PROTO_ID, None, WholeArtefact(), Presentation(0, 0, 160, 40)), now=FIXED_NOW
        )
        scenario = create_annotation(
            parse_scenario("Given mode is OFF\nWhen pilot selects WXON\nThen radar detection is active"),
            AnnotationFunction.DESCRIPTIVE, CREATOR, Motivation.DESCRIBING, now=FIXED_NOW,
        )
        scenario = attach_target(
            scenario,
            Target(PROTO_ID, 1, ElementId(("MODE_SELECTION", "WXON")), Presentation(1, 2, 3, 4)),
            now=FIXED_NOW,
        )
        frag = create_annotation(
            TextBody("fragment bound"), AnnotationFunction.ASSOCIATIVE, CREATOR,
            Motivation.TAGGING, now=FIXED_NOW,
        )
        frag = attach_target(
            frag, Target(PROTO_ID, 1, Fragment("//place[@name='MODE_SELECTION']", "xpath"),
                         Presentation(0, 0, 9, 9)), now=FIXED_NOW,
        )
        for annotation in (vote, scenario, frag):
            doc = json.loads(w3c.export_w3c(annotation, case_study))
            back, warnings = w3c.import_w3c(doc, case_study)
            assert warnings == []
            assert back == annotation


class TestForeignImport:
    def test_textual_body_with_known_source(self, case_study):
        doc = {
            "@context": "http://www.w3.org/ns/anno.jsonld",
            "type": "Annotation",
            "body": {"type": "TextualBody", "value": "external comment"},
            "target": "WXR - V0.prstn",
        }
        annotation, warnings = w3c.import_w3c(doc, case_study)
        assert annotation.body == TextBody("external comment")
        assert annotation.targets[0].artefact == PROTO_ID
        assert annotation.targets[0].selector == WholeArtefact()
        assert annotation.targets[0].version is None

    def test_body_value_shortcut(self, case_study):
        doc = {"type": "Annotation", "bodyValue": "short note", "target": "MPIA_WXR.xml"}
        annotation, _ = w3c.import_w3c(doc, case_study)
        assert annotation.body == TextBody("short note")

    def test_unknown_body_degrades_to_text_with_warning(self, case_study):
        doc = {
            "type": "Annotation",
            "body": {"type": "SpecificResource", "value": "fallback text"},
            "target": {"source": "WXR - V0.prstn"},
        }
        annotation, warnings = w3c.import_w3c(doc, case_study)
        assert annotation.body == TextBody("fallback text")
        assert warnings

    def test_unmapped_targets_dropped_with_warning(self, case_study):
        doc = {
            "type": "Annotation",
            "body": {"type": "TextualBody", "value": "partial"},
            "target": [{"source": "WXR - V0.prstn"}, {"source": "elsewhere.xml"}],
        }
        annotation, warnings = w3c.import_w3c(doc, case_study)
        assert len(annotation.targets) == 1
        assert any("elsewhere.xml" in warning for warning in warnings)

    def test_every_target_unknown_is_rejected(self, case_study):
        doc = {
            "type": "Annotation",
            "body": {"type": "TextualBody", "value": "lost"},
            "target": "elsewhere.xml",
        }
        with pytest.raises(NoMappableTargetError):
            w3c.import_w3c(doc, case_study)

    def test_non_annotation_rejected(self, case_study):
        with pytest.raises(NotAnAnnotationError):
            w3c.import_w3c({"type": "Dataset"}, case_study)

    def test_type_list_accepted(self, case_study):
        doc = {
            "type": ["Annotation", "oa:Annotation"],
            "bodyValue": "typed twice",
            "target": "WXR - V0.prstn",
        }
        annotation, _ = w3c.import_w3c(doc, case_study)
        assert annotation.body == TextBody("typed twice")

    def test_unknown_motivation_defaults_with_warning(self, case_study):
        doc = {
            "type": "Annotation",
            "bodyValue": "odd",
            "motivation": "moderating",
            "target": "WXR - V0.prstn",
        }
        annotation, warnings = w3c.import_w3c(doc, case_study)
        assert annotation.metadata.motivation == Motivation.COMMENTING
        assert warnings

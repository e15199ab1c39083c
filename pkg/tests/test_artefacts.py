from __future__ import annotations

import random

import pytest

from annoglue.artefacts import (
    STATUS_EDGES,
    ArtefactKind,
    EditorBinding,
    VersionStatus,
    add_version,
    compute_digest,
    latest_version,
    register_artefact,
    resolve_ref,
    set_version_status,
    slugify,
    unique_artefact_id,
)
from annoglue.errors import (
    ArtefactFileNotFoundError,
    DuplicateNameError,
    IdenticalContentError,
    IllegalStatusTransitionError,
    InvalidPathError,
    UnknownArtefactError,
    UnknownVersionError,
)


@pytest.fixture
def root(tmp_path):
    (tmp_path / "WXR - V0.prstn").write_text("prototype v0")
    (tmp_path / "MPIA_WXR.xml").write_text("<ico/>")
    return tmp_path


def register(root, name="WXR prototype", path="WXR - V0.prstn", existing=()):
    return register_artefact(
        root,
        existing,
        name=name,
        path=path,
        editor=EditorBinding("pandaannotation"),
        kind=ArtefactKind.PROTOTYPE,
    )


class TestRegister:
    def test_first_version_is_writing(self, root):
        a = register(root)
        assert a.id == "wxr-prototype"
        assert len(a.versions) == 1
        v = a.versions[0]
        assert v.version_id == 1
        assert v.status is VersionStatus.WRITING
        assert v.content_digest == compute_digest(root, "WXR - V0.prstn")

    def test_second_artefact(self, root):
        first = register(root)
        second = register(root, name="WXR behavior", path="MPIA_WXR.xml", existing=[first])
        assert second.id == "wxr-behavior"
        assert second.versions[0].version_id == 1

    def test_missing_file(self, root):
        with pytest.raises(ArtefactFileNotFoundError):
            register(root, path="nope.xml")

    def test_duplicate_name(self, root):
        first = register(root)
        with pytest.raises(DuplicateNameError):
            register(root, existing=[first])

    def test_absolute_path_rejected(self, root):
        with pytest.raises(InvalidPathError):
            register(root, path="/etc/passwd")

    def test_dotdot_rejected(self, root):
        with pytest.raises(InvalidPathError):
            register(root, path="../outside.txt")

    def test_backslash_rejected(self, root):
        with pytest.raises(InvalidPathError):
            register(root, path="a\\b.txt")

    def test_id_collision_gets_suffix(self):
        assert unique_artefact_id("WXR prototype", ["wxr-prototype"]) == "wxr-prototype-2"
        assert slugify("WXR - V0.prstn") == "wxr-v0-prstn"

    def test_editor_id_must_be_lowercase_alnum(self):
        with pytest.raises(ValueError):
            EditorBinding("Panda Annotation")


class TestVersions:
    def test_add_version_increments(self, root):
        a = register(root)
        (root / "WXR - V1.prstn").write_text("prototype v1")
        a = add_version(a, "WXR - V1.prstn", root=root)
        assert [v.version_id for v in a.versions] == [1, 2]
        assert a.versions[0].path == "WXR - V0.prstn"  # prior version untouched

    def test_identical_content_rejected(self, root):
        a = register(root)
        with pytest.raises(IdenticalContentError):
            add_version(a, "WXR - V0.prstn", root=root)

    def test_three_versions_gapless(self, root):
        a = register(root)
        for i in (1, 2, 3):
            (root / f"v{i}.prstn").write_text(f"content {i}")
            a = add_version(a, f"v{i}.prstn", root=root)
        # oracle: brute-force enumeration
        assert [v.version_id for v in a.versions] == list(range(1, len(a.versions) + 1))

    def test_add_version_bumps_latest_by_one(self, root):
        a = register(root)
        before = max(v.version_id for v in a.versions)
        (root / "next.prstn").write_text("next")
        a = add_version(a, "next.prstn", root=root)
        assert max(v.version_id for v in a.versions) == before + 1

    def test_digest_stability(self, root):
        first = compute_digest(root, "WXR - V0.prstn")
        assert compute_digest(root, "WXR - V0.prstn") == first


class TestVersionStatus:
    def test_write_review_cycle(self, root):
        a = register(root)
        a = set_version_status(a, 1, VersionStatus.WAITING_REVIEW)
        a = set_version_status(a, 1, VersionStatus.REVIEWED)
        assert a.versions[0].status is VersionStatus.REVIEWED

    def test_reviewed_back_to_writing_is_illegal(self, root):
        a = register(root)
        a = set_version_status(a, 1, VersionStatus.WAITING_REVIEW)
        a = set_version_status(a, 1, VersionStatus.REVIEWED)
        with pytest.raises(IllegalStatusTransitionError):
            set_version_status(a, 1, VersionStatus.WRITING)

    def test_archived_is_terminal(self, root):
        a = register(root)
        a = set_version_status(a, 1, VersionStatus.ARCHIVED)
        for status in VersionStatus:
            with pytest.raises(IllegalStatusTransitionError):
                set_version_status(a, 1, status)

    def test_unknown_version(self, root):
        with pytest.raises(UnknownVersionError):
            set_version_status(register(root), 3, VersionStatus.ARCHIVED)

    def test_only_named_version_changes(self, root):
        a = register(root)
        (root / "v2.prstn").write_text("v2")
        a = add_version(a, "v2.prstn", root=root)
        a = set_version_status(a, 2, VersionStatus.WAITING_REVIEW)
        assert a.versions[0].status is VersionStatus.WRITING
        assert a.versions[1].status is VersionStatus.WAITING_REVIEW

    def test_random_walk_stays_in_state_set(self, root):
        rng = random.Random(13)
        a = register(root)
        for _ in range(500):
            requested = rng.choice(list(VersionStatus))
            before = a
            try:
                a = set_version_status(a, 1, requested)
            except IllegalStatusTransitionError:
                assert a == before
            status = a.versions[0].status
            assert status in set(VersionStatus)
            if status is VersionStatus.ARCHIVED:
                # no outgoing edges from ARCHIVED
                assert not any(edge[0] is VersionStatus.ARCHIVED for edge in STATUS_EDGES)


class TestResolveRef:
    def three_version_artefact(self, root):
        a = register(root)
        for i in (1, 2):
            (root / f"v{i}.prstn").write_text(f"content {i}")
            a = add_version(a, f"v{i}.prstn", root=root)
        return a

    def test_any_version_resolves_latest(self, root):
        a = self.three_version_artefact(root)
        assert resolve_ref([a], a.id, None).version_id == 3
        assert resolve_ref([a], a.id, None) == latest_version(a)

    def test_pinned_version(self, root):
        a = self.three_version_artefact(root)
        assert resolve_ref([a], a.id, 2).version_id == 2

    def test_unknown_artefact(self, root):
        with pytest.raises(UnknownArtefactError):
            resolve_ref([register(root)], "ghost", 1)

    def test_unknown_version(self, root):
        with pytest.raises(UnknownVersionError):
            resolve_ref([register(root)], "wxr-prototype", 9)

from __future__ import annotations

import json
import random
from dataclasses import replace

import pytest

from annoglue import repository
from annoglue.canonical import atomic_write_text, canonical_dumps, canonical_file_text
from annoglue.errors import (
    AlreadyInitializedError,
    CorruptIndexError,
    CorruptSetError,
    IoFailureError,
    LockHeldError,
    NotAProjectError,
    UnresolvedTargetError,
    ValidationFailedError,
)
from annoglue.model import DESIGNER, Creator, TextBody
from conftest import FIXED_NOW, MODE_IDS, PROTO_ID, build_case_study
from projectgen import random_project


class TestInit:
    def test_empty_project_layout(self, tmp_path):
        p = repository.init_project(tmp_path, "WXR")
        assert (tmp_path / "annoglue.index.json").is_file()
        assert (tmp_path / "annotations").is_dir()
        assert p.index.project_name == "WXR"
        assert p.index.artefacts == () and p.index.annotation_sets == ()

    def test_double_init_rejected(self, tmp_path):
        repository.init_project(tmp_path, "WXR")
        with pytest.raises(AlreadyInitializedError):
            repository.init_project(tmp_path, "WXR")

    def test_missing_directory_is_io_failure(self, tmp_path):
        with pytest.raises(IoFailureError):
            repository.init_project(tmp_path / "ghost", "WXR")


class TestCanonicalForm:
    def test_sorted_keys_no_trailing_whitespace(self, case_study):
        text = (case_study.root / "annoglue.index.json").read_text(encoding="utf-8")
        assert "\r" not in text
        assert text.endswith("\n") and not text.endswith("\n\n")
        for line in text.split("\n"):
            assert line == line.rstrip()
        parsed = json.loads(text)
        assert list(parsed) == sorted(parsed)

    def test_compact_dumps_matches_expected_form(self):
        assert canonical_dumps({"b": 1, "a": [2, 1]}) == '{"a":[2,1],"b":1}'

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            canonical_dumps({"x": float("nan")})


class TestPersistAnnotationSet:
    def test_fixture_persists_and_is_indexed(self, case_study):
        entry_paths = [e.path for e in case_study.index.annotation_sets]
        assert f"annotations/{PROTO_ID}.json" in entry_paths
        for entry in case_study.index.annotation_sets:
            assert (case_study.root / entry.path).is_file()

    def test_zero_target_annotation_rejected(self, case_study):
        orphan = replace(
            case_study.sets[0].annotations[0], id="no-targets", targets=()
        )
        bad = replace(
            case_study.sets[0],
            set_id="extra",
            annotations=(orphan,),
        )
        with pytest.raises(ValidationFailedError) as exc:
            repository.persist_annotation_set(case_study, bad)
        assert any(">= 1 target" in v.rule for v in exc.value.violations)

    def test_unknown_artefact_id_rejected(self, case_study):
        annotation = case_study.sets[0].annotations[0]
        ghost_target = replace(annotation.targets[0], artefact="ghost")
        bad = replace(
            case_study.sets[0],
            set_id="extra",
            annotations=(replace(annotation, id="ghost-ann", targets=(ghost_target,)),),
        )
        with pytest.raises(UnresolvedTargetError):
            repository.persist_annotation_set(case_study, bad)

    def test_annotation_id_unique_across_sets(self, case_study):
        duplicate = replace(case_study.sets[0], set_id="copy")
        with pytest.raises(ValidationFailedError):
            repository.persist_annotation_set(case_study, duplicate)

    def test_unsafe_set_id_rejected(self, case_study):
        bad = replace(case_study.sets[0], set_id="../escape")
        with pytest.raises(ValidationFailedError):
            repository.persist_annotation_set(case_study, bad)

    def test_index_bijection_after_persist(self, case_study):
        on_disk = sorted(
            f"annotations/{f.name}" for f in (case_study.root / "annotations").iterdir()
        )
        listed = sorted(e.path for e in case_study.index.annotation_sets)
        assert on_disk == listed


class TestLoadProject:
    def test_fixture_round_trip_structural(self, case_study):
        loaded = repository.load_project(case_study.root)
        assert loaded == case_study

    def test_save_load_save_byte_identical(self, case_study):
        files = ["annoglue.index.json"] + [e.path for e in case_study.index.annotation_sets]
        before = {f: (case_study.root / f).read_bytes() for f in files}
        loaded = repository.load_project(case_study.root)
        repository.save_project(loaded)
        after = {f: (case_study.root / f).read_bytes() for f in files}
        assert before == after

    def test_missing_index_is_not_a_project(self, tmp_path):
        with pytest.raises(NotAProjectError):
            repository.load_project(tmp_path)

    def test_corrupt_index_reports_detail(self, tmp_path):
        repository.init_project(tmp_path, "X")
        (tmp_path / "annoglue.index.json").write_text("{not json", encoding="utf-8")
        with pytest.raises(CorruptIndexError):
            repository.load_project(tmp_path)

    def test_unsupported_format_version(self, tmp_path):
        p = repository.init_project(tmp_path, "X")
        data = repository.encode_index(p.index)
        data["format_version"] = 99
        (tmp_path / "annoglue.index.json").write_text(
            canonical_file_text(data), encoding="utf-8"
        )
        with pytest.raises(CorruptIndexError) as exc:
            repository.load_project(tmp_path)
        assert "99" in str(exc.value)

    def test_truncated_set_reports_offset(self, case_study):
        set_file = case_study.root / f"annotations/{PROTO_ID}.json"
        content = set_file.read_text(encoding="utf-8")
        set_file.write_text(content[: len(content) // 2], encoding="utf-8")
        with pytest.raises(CorruptSetError) as exc:
            repository.load_project(case_study.root)
        assert exc.value.position is not None
        assert exc.value.path == f"annotations/{PROTO_ID}.json"

    def test_missing_listed_set_is_corrupt(self, case_study):
        (case_study.root / f"annotations/{PROTO_ID}.json").unlink()
        with pytest.raises(CorruptSetError):
            repository.load_project(case_study.root)

    def test_schema_violation_in_set_names_the_field(self, case_study):
        set_file = case_study.root / f"annotations/{PROTO_ID}.json"
        data = json.loads(set_file.read_text(encoding="utf-8"))
        data["annotations"][0]["state"] = "zombie"
        set_file.write_text(canonical_file_text(data), encoding="utf-8")
        with pytest.raises(CorruptSetError) as exc:
            repository.load_project(case_study.root)
        assert "state" in str(exc.value)

    def test_dangling_target_does_not_fail_load(self, case_study):
        # drop one artefact from the on-disk index; the set still loads
        index = replace(
            case_study.index,
            artefacts=tuple(a for a in case_study.index.artefacts if a.id == PROTO_ID),
        )
        repository.save_index(replace(case_study, index=index))
        loaded = repository.load_project(case_study.root)
        assert len(loaded.index.artefacts) == 1
        assert loaded.sets  # annotations with now-dangling targets still loaded


class TestRandomRoundTrip:
    def test_random_projects_round_trip(self, tmp_path):
        rng = random.Random(42)
        for i in range(25):
            root = tmp_path / f"proj{i}"
            root.mkdir()
            p = random_project(root, rng)
            loaded = repository.load_project(root)
            assert loaded == p
            files = ["annoglue.index.json"] + [e.path for e in p.index.annotation_sets]
            before = {f: (root / f).read_bytes() for f in files}
            repository.save_project(loaded)
            after = {f: (root / f).read_bytes() for f in files}
            assert before == after


class TestAtomicity:
    def test_failed_replace_leaves_old_content(self, tmp_path, monkeypatch):
        target = tmp_path / "file.json"
        target.write_text("old", encoding="utf-8")

        import annoglue.canonical as canonical_module

        def exploding_replace(src, dst):
            raise OSError("injected crash")

        monkeypatch.setattr(canonical_module.os, "replace", exploding_replace)
        with pytest.raises(IoFailureError):
            atomic_write_text(target, "new")
        assert target.read_text(encoding="utf-8") == "old"
        leftovers = [f for f in tmp_path.iterdir() if f.name != "file.json"]
        assert leftovers == []  # temp file cleaned up

    def test_index_write_failure_leaves_whole_files(self, case_study, monkeypatch):
        creator = Creator("jlh", "jlh", frozenset({DESIGNER}))
        annotation = replace(
            case_study.sets[0].annotations[0],
            id="late-annotation",
            body=TextBody("added later"),
        )
        new_set = replace(
            case_study.sets[0],
            annotations=case_study.sets[0].annotations + (annotation,),
        )

        index_path = case_study.root / "annoglue.index.json"
        set_path = case_study.root / f"annotations/{PROTO_ID}.json"
        index_before = index_path.read_bytes()

        calls = {"n": 0}
        real = repository.atomic_write_text

        def fail_on_index(path, text):
            calls["n"] += 1
            if path.name == "annoglue.index.json":
                raise IoFailureError("injected index failure")
            real(path, text)

        monkeypatch.setattr(repository, "atomic_write_text", fail_on_index)
        with pytest.raises(IoFailureError):
            repository.persist_annotation_set(case_study, new_set)

        assert index_path.read_bytes() == index_before  # old index intact
        json.loads(set_path.read_text(encoding="utf-8"))  # set file whole (new)
        # recovery: the rebuilt index still lists the set, so nothing is lost
        monkeypatch.setattr(repository, "atomic_write_text", real)
        index, findings = repository.rebuild_index(case_study.root)
        assert findings == []
        assert any(e.set_id == PROTO_ID for e in index.annotation_sets)


class TestRebuildIndex:
    def test_consistent_project_has_no_findings(self, case_study):
        index, findings = repository.rebuild_index(case_study.root)
        assert findings == []
        assert index.annotation_sets == case_study.index.annotation_sets

    def test_deleted_set_file_reports_missing(self, case_study):
        (case_study.root / f"annotations/{PROTO_ID}.json").unlink()
        index, findings = repository.rebuild_index(case_study.root)
        assert [f.kind for f in findings] == ["MissingFile"]
        assert all(e.path != f"annotations/{PROTO_ID}.json" for e in index.annotation_sets)

    def test_dropped_entry_is_restored(self, case_study):
        # oracle: directory listing vs index entries
        stripped = replace(case_study.index, annotation_sets=())
        repository.save_index(replace(case_study, index=stripped))
        on_disk = sorted(
            f"annotations/{f.name}" for f in (case_study.root / "annotations").iterdir()
        )
        index, findings = repository.rebuild_index(case_study.root)
        assert sorted(f.kind for f in findings) == ["UnlistedSet"] * len(on_disk)
        assert sorted(e.path for e in index.annotation_sets) == on_disk

    def test_duplicate_annotation_ids_reported(self, case_study):
        original = case_study.root / f"annotations/{PROTO_ID}.json"
        data = json.loads(original.read_text(encoding="utf-8"))
        data["set_id"] = "copycat"
        (case_study.root / "annotations/copycat.json").write_text(
            canonical_file_text(data), encoding="utf-8"
        )
        _, findings = repository.rebuild_index(case_study.root)
        kinds = {f.kind for f in findings}
        assert "UnlistedSet" in kinds and "DuplicateAnnotation" in kinds


class TestLock:
    def test_lock_excludes_second_writer(self, case_study):
        with repository.project_lock(case_study.root):
            with pytest.raises(LockHeldError):
                with repository.project_lock(case_study.root):
                    pass
        # released afterwards
        with repository.project_lock(case_study.root):
            pass

    def test_stale_lock_is_stolen(self, case_study):
        lock = case_study.root / "annoglue.lock"
        lock.write_text(
            canonical_file_text({"pid": 1, "acquired_at": "2000-01-01T00:00:00Z"}),
            encoding="utf-8",
        )
        with repository.project_lock(case_study.root, stale_after=60):
            assert lock.is_file()
        assert not lock.exists()

    def test_unreadable_lock_is_treated_as_stale(self, case_study):
        (case_study.root / "annoglue.lock").write_text("garbage", encoding="utf-8")
        with repository.project_lock(case_study.root):
            pass

import json

import pytest

from segedit import PipelineConfig, parse_instructions, reference_stack, run_session, undo
from segedit.store import (
    CorruptSessionError,
    SessionNotFoundError,
    SessionStore,
    StoreError,
)

CONFIG = PipelineConfig(dilation_radius=0, feather_radius=0)


def build_session(two_disks, session_id="abc123"):
    image, _, _ = two_disks
    return run_session(
        image,
        parse_instructions(
            "replace red circle with blue; replace green circle with yellow"
        ),
        reference_stack(),
        CONFIG,
        session_id=session_id,
    )


def test_save_load_round_trip(two_disks, tmp_path):
    store = SessionStore(tmp_path)
    session = build_session(two_disks)
    store.save(session)
    loaded = store.load("abc123")
    assert loaded.session_id == session.session_id
    assert loaded.config == session.config
    assert loaded.base_image == session.base_image
    assert len(loaded.steps) == len(session.steps)
    for got, want in zip(loaded.steps, session.steps):
        assert got.instruction == want.instruction
        assert got.status == want.status
        assert got.seed == want.seed
        assert got.dilated_mask == want.dilated_mask
        assert got.output_image == want.output_image
        assert got.selection.to_json() == want.selection.to_json()


def test_double_save_byte_identical(two_disks, tmp_path):
    store = SessionStore(tmp_path)
    session = build_session(two_disks)
    store.save(session)
    sdir = tmp_path / "abc123"
    first = {p.name: p.read_bytes() for p in sorted(sdir.iterdir())}
    store.save(store.load("abc123"))
    second = {p.name: p.read_bytes() for p in sorted(sdir.iterdir())}
    assert first == second


def test_no_leftover_temp_files(two_disks, tmp_path):
    store = SessionStore(tmp_path)
    store.save(build_session(two_disks))
    names = [p.name for p in (tmp_path / "abc123").iterdir()]
    assert sorted(names) == ["base.png", "session.json", "step_000.png", "step_001.png"]


def test_undo_prunes_step_files(two_disks, tmp_path):
    store = SessionStore(tmp_path)
    session = build_session(two_disks)
    store.save(session)
    store.save(undo(session, 1))
    names = sorted(p.name for p in (tmp_path / "abc123").iterdir())
    assert names == ["base.png", "session.json", "step_000.png"]
    assert len(store.load("abc123").steps) == 1


def test_list_and_exists(two_disks, tmp_path):
    store = SessionStore(tmp_path)
    assert store.list_sessions() == []
    store.save(build_session(two_disks, "one"))
    store.save(build_session(two_disks, "two"))
    assert store.list_sessions() == ["one", "two"]
    assert store.exists("one")
    assert not store.exists("nope")


def test_delete(two_disks, tmp_path):
    store = SessionStore(tmp_path)
    store.save(build_session(two_disks))
    store.delete("abc123")
    assert not store.exists("abc123")
    with pytest.raises(SessionNotFoundError):
        store.delete("abc123")


def test_load_unknown_session(tmp_path):
    with pytest.raises(SessionNotFoundError):
        SessionStore(tmp_path).load("ghost")


def test_invalid_session_id_rejected(tmp_path):
    store = SessionStore(tmp_path)
    with pytest.raises(StoreError):
        store.load("../escape")
    with pytest.raises(StoreError):
        store.load("")


def test_corrupt_json_rejected(two_disks, tmp_path):
    store = SessionStore(tmp_path)
    store.save(build_session(two_disks))
    meta = tmp_path / "abc123" / "session.json"
    meta.write_text("{ not json", "utf-8")
    with pytest.raises(CorruptSessionError):
        store.load("abc123")


def test_schema_version_checked(two_disks, tmp_path):
    store = SessionStore(tmp_path)
    store.save(build_session(two_disks))
    meta = tmp_path / "abc123" / "session.json"
    doc = json.loads(meta.read_text("utf-8"))
    doc["schema"] = 99
    meta.write_text(json.dumps(doc), "utf-8")
    with pytest.raises(CorruptSessionError):
        store.load("abc123")


def test_missing_step_image_rejected(two_disks, tmp_path):
    store = SessionStore(tmp_path)
    store.save(build_session(two_disks))
    (tmp_path / "abc123" / "step_001.png").unlink()
    with pytest.raises(CorruptSessionError):
        store.load("abc123")


def test_session_json_is_versioned_and_sorted(two_disks, tmp_path):
    store = SessionStore(tmp_path)
    store.save(build_session(two_disks))
    doc = json.loads((tmp_path / "abc123" / "session.json").read_text("utf-8"))
    assert doc["schema"] == 1
    assert list(doc) == sorted(doc)

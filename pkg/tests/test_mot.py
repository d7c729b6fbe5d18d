"""MOT ground-truth ingestion: parsing, gap splitting, velocities, models."""

import numpy as np
import pytest
import yaml

from kftune import mot
from kftune.errors import ConfigError, ParseError


def test_parse_single_record():
    tracks = mot.parse_mot_gt("1,7,100,200,50,80,1,1,1")
    assert len(tracks) == 1
    t = tracks[0]
    assert t.target_id == 7
    assert t.frames.tolist() == [1]
    np.testing.assert_allclose(t.boxes[0], [100, 200, 50, 80])


def test_parse_interleaved_ids_sorted_by_frame():
    text = "\n".join(
        ["2,1,10,10,5,5,1,1,1", "1,2,0,0,5,5,1,1,1", "1,1,9,9,5,5,1,1,1", "2,2,1,1,5,5,1,1,1"]
    )
    tracks = mot.parse_mot_gt(text)
    assert [(t.target_id, t.frames.tolist()) for t in tracks] == [(1, [1, 2]), (2, [1, 2])]
    np.testing.assert_allclose(tracks[0].boxes[:, 0], [9, 10])


def test_gap_splits_into_segments():
    text = "\n".join(f"{f},3,0,0,5,5,1,1,1" for f in (1, 2, 5, 6))
    tracks = mot.parse_mot_gt(text)
    assert [t.frames.tolist() for t in tracks] == [[1, 2], [5, 6]]
    assert all(t.target_id == 3 for t in tracks)


def test_malformed_line_reports_line_number():
    with pytest.raises(ParseError) as err:
        mot.parse_mot_gt("1,7,100,200,50,80,1,1,1\n1,7,oops,200,50,80,1,1,1")
    assert "line 2" in str(err.value)
    with pytest.raises(ParseError):
        mot.parse_mot_gt("1,2,3")  # wrong field count


def test_empty_input_gives_empty_list():
    assert mot.parse_mot_gt("") == []


def test_class_and_flag_filters():
    text = "\n".join(
        ["1,1,0,0,5,5,1,1,1", "1,2,0,0,5,5,1,7,1", "1,3,0,0,5,5,0,1,1"]
    )
    assert [t.target_id for t in mot.parse_mot_gt(text)] == [1]
    assert {t.target_id for t in mot.parse_mot_gt(text, keep_classes=None)} == {1, 2}
    assert {t.target_id for t in mot.parse_mot_gt(text, require_flag=False)} == {1, 3}


def test_derive_velocity_backward_differences():
    t = mot.parse_mot_gt("\n".join(f"{f},1,{x},0,5,5,1,1,1" for f, x in [(1, 0), (2, 3), (3, 6)]))[0]
    t = mot.derive_velocity(t)
    np.testing.assert_allclose(t.vel[:, 0], [3, 3, 3])
    np.testing.assert_allclose(t.vel[:, 1], 0)

    t2 = mot.parse_mot_gt("\n".join(f"{f},1,{x},0,5,5,1,1,1" for f, x in [(1, 0), (2, 1), (3, 4)]))[0]
    t2 = mot.derive_velocity(t2)
    np.testing.assert_allclose(t2.vel[:, 0], [1, 1, 3])


def test_length_one_segment_dropped_with_warning():
    t = mot.parse_mot_gt("1,1,0,0,5,5,1,1,1")[0]
    with pytest.warns(UserWarning):
        assert mot.derive_velocity(t) is None


def test_video_models_exact_matrices():
    F, H = mot.video_models()
    np.testing.assert_array_equal(H, np.hstack([np.eye(4), np.zeros((4, 2))]))
    expected_F = np.eye(6)
    expected_F[0, 4] = expected_F[1, 5] = 1.0
    np.testing.assert_array_equal(F, expected_F)
    np.testing.assert_allclose(F @ np.array([0.0, 0, 5, 5, 2, 3]), [2, 3, 5, 5, 2, 3])
    np.testing.assert_allclose(H @ np.array([1.0, 2, 3, 4, 5, 6]), [1, 2, 3, 4])


def test_round_trip_lines_byte_identical_modulo_order():
    lines = [
        "1,7,100,200,50,80,1,1,1",
        "2,7,101.5,201,50,80,1,1,0.8",
        "1,9,5,5,10,10,1,1,1",
    ]
    tracks = mot.parse_mot_gt("\n".join(lines))
    assert sorted(mot.tracks_to_lines(tracks)) == sorted(lines)


def test_dataset_layout_and_manifest(tmp_path):
    seq1 = tmp_path / "seq01" / "gt.txt"
    seq1.parent.mkdir()
    seq1.write_text("\n".join(f"{f},1,{10.0 + 2 * f},{5.0 + f},20,40,1,1,1" for f in range(1, 31)))
    seq5 = tmp_path / "seq05" / "gt.txt"
    seq5.parent.mkdir()
    seq5.write_text("\n".join(f"{f},2,{100.0 - f},{50.0},15,30,1,1,1" for f in range(1, 21)))
    manifest = tmp_path / "manifest.yaml"
    manifest.write_text(yaml.safe_dump({"train": ["seq01/gt.txt"], "test": ["seq05/gt.txt"]}))

    train = mot.dataset_from_manifest(manifest, "train")
    test = mot.dataset_from_manifest(manifest, "test")
    assert train.domain == "video" and len(train) == 1 and len(test) == 1
    states = train.targets[0].states
    assert states.shape == (30, 6)
    np.testing.assert_allclose(states[1, 4:], [2.0, 1.0])  # (vx, vy)
    np.testing.assert_array_equal(train.targets[0].obs, states[:, :4])


def test_manifest_missing_file_rejected(tmp_path):
    manifest = tmp_path / "manifest.yaml"
    manifest.write_text(yaml.safe_dump({"train": ["nope/gt.txt"], "test": []}))
    with pytest.raises(ConfigError):
        mot.load_manifest(manifest)


def test_manifest_requires_both_splits(tmp_path):
    manifest = tmp_path / "manifest.yaml"
    manifest.write_text(yaml.safe_dump({"train": []}))
    with pytest.raises(ConfigError):
        mot.load_manifest(manifest)

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from waypoint_imitation.core import AttributedTrajectory, RobotLog, Sample, Scene
from waypoint_imitation.errors import ParseError
from waypoint_imitation.io import (
    dumps,
    load_dataset,
    load_json,
    load_jsonl,
    save_dataset,
    save_jsonl,
    waypoints_from_dict,
)

FIX = Path(__file__).parent / "fixtures"


@pytest.mark.parametrize("name, kind", [
    ("trajectory.jsonl", AttributedTrajectory),
    ("robot_log.jsonl", RobotLog),
    ("sample.jsonl", Sample),
    ("mined_golden.jsonl", AttributedTrajectory),
])
def test_golden_files_load_and_reserialize_identically(name, kind, tmp_path):
    records = load_jsonl(FIX / name)
    assert len(records) == 1 and isinstance(records[0], kind)
    save_jsonl(records, tmp_path / name)
    assert (tmp_path / name).read_text() == (FIX / name).read_text()


def test_golden_scene_and_waypoints():
    scene = load_json(FIX / "scene.json")
    assert isinstance(scene, Scene) and len(scene.objects) == 4 and len(scene.bins) == 4
    assert dumps(scene) + "\n" == (FIX / "scene.json").read_text()
    wps = load_json(FIX / "waypoints.json")
    assert len(wps) == 5 and [float(w.attributes[0]) for w in wps] == [0, 1, 1, 0, 0]
    assert waypoints_from_dict(json.loads((FIX / "waypoints.json").read_text())) == wps


def test_dataset_round_trip(tmp_path):
    s = load_dataset(FIX / "sample.jsonl")[0]
    save_dataset([s, s, s], tmp_path / "d.jsonl")
    back = load_dataset(tmp_path / "d.jsonl")
    assert back == [s, s, s]


def test_empty_file_is_empty_dataset(tmp_path):
    (tmp_path / "e.jsonl").write_text("")
    assert load_dataset(tmp_path / "e.jsonl") == []


def test_truncated_line_names_the_line(tmp_path):
    text = (FIX / "trajectory.jsonl").read_text()
    p = tmp_path / "t.jsonl"
    p.write_text(text + text[: len(text) // 2])
    with pytest.raises(ParseError) as err:
        load_jsonl(p)
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_wrong_record_type_rejected(tmp_path):
    with pytest.raises(ParseError):
        load_dataset(FIX / "trajectory.jsonl")


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 8), st.just(3)),
              elements=st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)),
       st.integers(0, 2 ** 32 - 1))
def test_trajectory_round_trip_bit_exact(pos, seed):
    attrs = np.random.default_rng(seed).uniform(size=(len(pos), 1))
    t = AttributedTrajectory(np.concatenate([pos, attrs], axis=1))
    back = load_jsonl_from_text(dumps(t))
    assert back == t
    assert back.points.tobytes() == t.points.tobytes()


def load_jsonl_from_text(line):
    from waypoint_imitation.io import from_record

    return from_record(json.loads(line))

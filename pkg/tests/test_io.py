import json

import numpy as np
import pytest

from wandcal.exceptions import SchemaError
from wandcal.io import dataset_to_dict, read_dataset, read_state, state_doc, write_dataset, dump_json


def test_dataset_round_trip_is_identity(tmp_path, noisy_small_scene):
    truth, obs = noisy_small_scene
    path = tmp_path / "d.json"
    write_dataset(path, obs, truth.state, truth.low_start_markers)
    obs2, truth2, low = read_dataset(path)
    np.testing.assert_array_equal(obs2.fps, obs.fps)
    np.testing.assert_array_equal(obs2.mask, obs.mask)
    assert obs2.intrinsics == obs.intrinsics
    np.testing.assert_array_equal(truth2.markers, truth.state.markers)
    assert low == truth.low_start_markers
    # and writing again gives the same bytes
    write_dataset(tmp_path / "e.json", obs2, truth2, low)
    assert (tmp_path / "e.json").read_bytes() == path.read_bytes()


def test_state_round_trip(tmp_path, small_scene):
    truth, obs = small_scene
    dump_json(state_doc(truth.state, obs.intrinsics), tmp_path / "s.json")
    st, doc = read_state(tmp_path / "s.json")
    np.testing.assert_array_equal(st.angles, truth.state.angles)
    np.testing.assert_array_equal(st.t_prime, truth.state.t_prime)
    assert doc["kind"] == "state"


def _write(tmp_path, doc):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    return path


def test_schema_error_names_path(tmp_path, small_scene):
    _, obs = small_scene
    doc = dataset_to_dict(obs)
    doc["observations"][3]["u"] = "left"
    with pytest.raises(SchemaError, match="observations/3/u"):
        read_dataset(_write(tmp_path, doc))


def test_index_out_of_range(tmp_path, small_scene):
    _, obs = small_scene
    doc = dataset_to_dict(obs)
    doc["observations"][0]["camera_index"] = 9
    with pytest.raises(SchemaError, match="observations/0/camera_index"):
        read_dataset(_write(tmp_path, doc))


def test_unknown_key_and_missing_version(tmp_path, small_scene):
    _, obs = small_scene
    doc = dataset_to_dict(obs)
    doc["extra"] = 1
    with pytest.raises(SchemaError, match="extra"):
        read_dataset(_write(tmp_path, doc))
    doc = dataset_to_dict(obs)
    del doc["format_version"]
    with pytest.raises(SchemaError, match="format_version"):
        read_dataset(_write(tmp_path, doc))


def test_corrupt_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"format_version": 1,')
    with pytest.raises(SchemaError, match="invalid JSON"):
        read_dataset(path)

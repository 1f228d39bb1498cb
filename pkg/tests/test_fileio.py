import json

import numpy as np
import pytest

from slipdetect import fileio
from slipdetect.classifiers import (LogisticSlipClassifier, SMOSlipClassifier,
                                    ThresholdSlipClassifier)
from slipdetect.online import SlipDetector, StrategyConfig, run_stream
from slipdetect.simulator import SensorNoiseProfile, gen_grasp_run, gen_single_finger_run
from slipdetect.training import build_dataset


@pytest.fixture(scope="module")
def small_ds():
    runs = [gen_single_finger_run(SensorNoiseProfile(), 0.5 + i, i) for i in range(4)]
    return build_dataset(runs, 13)


@pytest.fixture(scope="module")
def fitted(small_ds):
    X, y = small_ds.X, small_ds.y
    return {"threshold": ThresholdSlipClassifier().fit(X, y),
            "logreg": LogisticSlipClassifier().fit(X, y),
            "svm": SMOSlipClassifier(gamma=0.05, C=5.0).fit(X, y),
            "svm-linear": SMOSlipClassifier(kernel="linear", C=1.0).fit(X, y)}


def probes(ds, n=100):
    rng = np.random.default_rng(0)
    idx = rng.choice(len(ds), n, replace=len(ds) < n)
    return ds.X[idx] + rng.normal(0, 0.05, (n, 60))


def assert_same_run(a, b):
    assert a.run_id == b.run_id and list(a.sensor_ids) == list(b.sensor_ids)
    for sid in a.sensor_ids:
        np.testing.assert_array_equal(a.streams[sid].t_ms, b.streams[sid].t_ms)
        np.testing.assert_array_equal(a.streams[sid].pins, b.streams[sid].pins)
    np.testing.assert_array_equal(a.height_t_ms, b.height_t_ms)
    np.testing.assert_array_equal(a.height_mm, b.height_mm)


# ---------------------------------------------------------------- runs

@pytest.mark.parametrize("make", [
    lambda: gen_single_finger_run(SensorNoiseProfile(), 1.7, 3, run_id="rail"),
    lambda: gen_grasp_run(SensorNoiseProfile(), seed=4, run_id="grasp"),
])
def test_run_round_trip(tmp_path, make):
    run = make()
    path = fileio.write_run(run, tmp_path / "r.jsonl")
    back = fileio.read_run(path)
    assert_same_run(run, back)
    assert back.metadata["onset_ms"] == run.metadata["onset_ms"]
    head = json.loads(path.read_text().splitlines()[0])
    assert head["schema"] == fileio.RUN_SCHEMA and head["version"] == fileio.RUN_VERSION
    assert len(head["config_hash"]) == 64
    # writing the reloaded run gives the same bytes
    again = fileio.write_run(back, tmp_path / "again.jsonl")
    assert again.read_bytes() == path.read_bytes()


def test_loaded_runs_feed_every_consumer(tmp_path, fitted):
    runs = [gen_single_finger_run(SensorNoiseProfile(), 2.0, s) for s in range(2)]
    fileio.write_runs(runs, tmp_path)
    loaded = fileio.read_runs(tmp_path)
    a, b = build_dataset(runs, 13), build_dataset(loaded, 13)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    det = SlipDetector(fitted["svm"], StrategyConfig(2, 1), sensor_ids=loaded[0].sensor_ids)
    assert run_stream(det, loaded[0]).log == run_stream(det, runs[0]).log


def write_lines(path, recs):
    path.write_text("".join(json.dumps(r) + "\n" for r in recs))
    return path


def header(**kw):
    return {"schema": fileio.RUN_SCHEMA, "version": fileio.RUN_VERSION, "run_id": "x", **kw}


PINS = [[0.0, 0.0]] * 30


def test_read_run_validation(tmp_path):
    with pytest.raises(fileio.FormatError):
        fileio.read_run(write_lines(tmp_path / "a.jsonl", [{"t_ms": 0, "sensor": 0, "pins": PINS}]))
    with pytest.raises(fileio.UnsupportedVersionError):
        fileio.read_run(write_lines(tmp_path / "b.jsonl", [header(version=99)]))
    with pytest.raises(fileio.FormatError, match="30 pins"):
        fileio.read_run(write_lines(tmp_path / "c.jsonl",
                                    [header(), {"t_ms": 0, "sensor": 0, "pins": PINS[:29]}]))
    with pytest.raises(fileio.FormatError, match="decrease"):
        fileio.read_run(write_lines(tmp_path / "d.jsonl", [
            header(), {"t_ms": 5, "sensor": 0, "pins": PINS}, {"t_ms": 4, "sensor": 0, "pins": PINS}]))
    with pytest.raises(fileio.FormatError, match="unknown record"):
        fileio.read_run(write_lines(tmp_path / "e.jsonl", [header(), {"t_ms": 5}]))
    (tmp_path / "f.jsonl").write_text("{not json\n")
    with pytest.raises(fileio.FormatError):
        fileio.read_run(tmp_path / "f.jsonl")
    (tmp_path / "empty").mkdir()
    with pytest.raises(fileio.FormatError):
        fileio.read_runs(tmp_path / "empty")
    with pytest.raises(FileNotFoundError):
        fileio.read_runs(tmp_path / "missing.jsonl")


def test_read_run_minimal(tmp_path):
    run = fileio.read_run(write_lines(tmp_path / "m.jsonl", [
        header(), {"t_ms": 0, "sensor": 2, "pins": PINS}, {"t_ms": 17, "sensor": 2, "pins": PINS},
        {"t_ms": 0, "height_mm": 100.0}]))
    assert list(run.sensor_ids) == [2] and run.height_mm.tolist() == [100.0]


# ---------------------------------------------------------------- models

@pytest.mark.parametrize("kind", ["threshold", "logreg", "svm", "svm-linear"])
def test_model_round_trip_bit_exact(tmp_path, fitted, small_ds, kind):
    model = fitted[kind]
    path = fileio.save_model(model, tmp_path / "m.json", {"seed": 0, "d": 0.4, "n_slip": 13})
    back = fileio.load_model(path)
    P = probes(small_ds)
    a, b = model.decision_function(P), back.decision_function(P)
    assert a.tobytes() == b.tobytes()
    np.testing.assert_array_equal(model.predict(P), back.predict(P))
    assert back.get_params() == model.get_params()
    assert back.training_ == {"seed": 0, "d": 0.4, "n_slip": 13}


def test_truncated_model_is_checksum_error(tmp_path, fitted):
    path = fileio.save_model(fitted["svm"], tmp_path / "m.json")
    raw = path.read_text()
    path.write_text(raw[: len(raw) // 2])
    with pytest.raises(fileio.ChecksumError):
        fileio.load_model(path)


def test_tampered_model_is_checksum_error(tmp_path, fitted):
    path = fileio.save_model(fitted["logreg"], tmp_path / "m.json")
    doc = json.loads(path.read_text())
    doc["payload"]["state"]["theta"][0] += 1.0
    path.write_text(json.dumps(doc))
    with pytest.raises(fileio.ChecksumError):
        fileio.load_model(path)


def test_version_bump_rejected(tmp_path, fitted):
    path = fileio.save_model(fitted["threshold"], tmp_path / "m.json")
    doc = json.loads(path.read_text())
    doc["version"] = fileio.MODEL_VERSION + 1
    path.write_text(json.dumps(doc))
    with pytest.raises(fileio.UnsupportedVersionError):
        fileio.load_model(path)


def test_kind_mismatch(tmp_path, fitted):
    path = fileio.save_model(fitted["logreg"], tmp_path / "m.json")
    with pytest.raises(fileio.KindMismatchError):
        fileio.load_model(path, expected_kind="svm")
    assert fileio.load_model(path, expected_kind="logreg").kind == "logreg"


def test_not_a_model_file(tmp_path):
    (tmp_path / "x.json").write_text('{"format": "other"}')
    with pytest.raises(fileio.FormatError):
        fileio.load_model(tmp_path / "x.json")


def test_save_is_deterministic(tmp_path, fitted):
    a = fileio.save_model(fitted["svm"], tmp_path / "a.json", {"seed": 1})
    b = fileio.save_model(fitted["svm"], tmp_path / "b.json", {"seed": 1})
    assert a.read_bytes() == b.read_bytes()
    assert not list(tmp_path.glob("*.tmp"))


def test_config_loading(tmp_path):
    (tmp_path / "c.json").write_text('{"seed": 3, "train": {"d": 0.5}}')
    assert fileio.load_config(tmp_path / "c.json") == {"seed": 3, "train": {"d": 0.5}}
    (tmp_path / "bad.json").write_text("[1, 2]")
    with pytest.raises(fileio.FormatError):
        fileio.load_config(tmp_path / "bad.json")


def test_to_plain():
    out = fileio.to_plain({"a": np.float64(1.5), "b": np.arange(3), "c": (np.int64(2), None)})
    assert out == {"a": 1.5, "b": [0, 1, 2], "c": [2, None]}
    assert json.dumps(out)

import numpy as np

from slipdetect import benchmark
from slipdetect.simulator import SensorNoiseProfile, gen_single_finger_run
from slipdetect.training import build_dataset, label_run


def test_benchmark_is_seeded_and_split_by_run(bench):
    assert len(bench.train_runs) == len(bench.test_runs) == 50
    ids_train = {r.run_id for r in bench.train_runs}
    assert not ids_train & {r.run_id for r in bench.test_runs}
    again = benchmark.rail_runs(3, 0)
    for a, b in zip(again, benchmark.rail_runs(3, 0)):
        np.testing.assert_array_equal(a.streams[0].pins, b.streams[0].pins)


def test_transients_confound_the_threshold(bench, svm_model):
    # static frames only: every positive is a false positive
    test = bench.test_set()
    static = test.X[test.y == 0]
    fp_threshold = int(benchmark.benchmark_model("threshold").predict(static).sum())
    fp_svm = int(svm_model.predict(static).sum())
    assert fp_threshold > 0
    assert fp_svm < fp_threshold


def test_transients_land_in_static_frames():
    noisy = gen_single_finger_run(SensorNoiseProfile(transient_rate=20.0), 1.0, 8, static_s=2.0)
    quiet = gen_single_finger_run(SensorNoiseProfile(transient_rate=0.0), 1.0, 8, static_s=2.0)
    a, b = label_run(noisy), label_run(quiet)
    assert a.X[a.y == 0, :30].mean(axis=1).max() > 5 * b.X[b.y == 0, :30].mean(axis=1).max()
    np.testing.assert_array_equal(a.y, b.y)


def test_default_params_are_copies():
    p = benchmark.default_params("svm")
    p["C"] = -1
    assert benchmark.SVM_PARAMS["C"] > 0


def test_grasp_runs_cover_objects():
    runs = benchmark.grasp_runs(4, seed=1)
    assert [r.tag for r in runs] == ["can", "box", "bottle", "tin"]
    ds = build_dataset(runs, 13)
    assert ds.n_slip > 0 and set(np.unique(ds.sensor_ids)) == {0, 1, 2}

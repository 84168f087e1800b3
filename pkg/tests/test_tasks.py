import numpy as np
import pytest

from rscn.errors import ContractViolationError, CsvParseError, SchemaError
from rscn.tasks import (
    DEBUTANIZER_FULL_FEATURES,
    DEBUTANIZER_REDUCED_FEATURES,
    MGParams,
    POWER_LOAD_FEATURES,
    PlantParams,
    SupervisedSequence,
    add_gaussian_noise,
    load_csv,
    mackey_glass,
    mg_task,
    plant_response,
    plant_simulate,
    plant_task,
    plant_test_input,
    read_sequence_csv,
    task_from_manifest,
    write_sequence_csv,
)


class TestMackeyGlass:
    def test_constant_unit_history_is_a_fixed_point(self):
        # rate at y = y_tau = 1 is -0.1 + 0.2 / 2 = 0
        p = MGParams(init_range=(1.0, 1.0), length=200)
        series = mackey_glass(p, np.random.default_rng(0))
        assert np.all(series == 1.0)

    def test_zero_feedback_gain_decays_monotonically(self):
        p = MGParams(alpha=0.0, init_range=(1.0, 1.0), length=100)
        series = mackey_glass(p, np.random.default_rng(0))
        assert np.all(np.diff(series[17:]) < 0)
        assert series[-1] > 0

    def test_default_series_shape_and_range(self):
        series = mackey_glass(MGParams(), np.random.default_rng(42))
        assert series.shape == (1177,)
        assert np.all(np.isfinite(series))
        assert np.all((series > 0) & (series < 2))

    def test_seed_determinism(self):
        a = mackey_glass(MGParams(), np.random.default_rng(7))
        b = mackey_glass(MGParams(), np.random.default_rng(7))
        assert np.array_equal(a, b)


@pytest.fixture(scope="module")
def series():
    return mackey_glass(MGParams(), np.random.default_rng(3))


class TestMgTask:

    def test_variant_input_counts(self, series):
        assert mg_task(series, "mg").train.n_inputs == 4
        assert mg_task(series, "mg1").train.n_inputs == 3
        assert mg_task(series, "mg2").train.n_inputs == 2

    def test_windowing_is_a_copy_of_the_series(self, series):
        task = mg_task(series, "mg")
        # first training sample sits at the first index with all lags present
        n0 = 18
        for j, lag in enumerate((0, 6, 12, 18)):
            assert task.train.inputs[j, 0] == series[n0 - lag]
        assert task.train.targets[0, 0] == series[n0 + 6]

    def test_split_sizes(self, series):
        task = mg_task(series, "mg")
        assert task.train.n_steps == 500 - 18
        assert task.val.n_steps == 300
        assert task.test.n_steps == 1177 - 6 - 800
        assert task.train.washout == 20

    def test_short_series_rejected(self):
        with pytest.raises(ContractViolationError):
            mg_task(np.ones(24), "mg")


class TestPlant:
    def test_zero_input_recursion_value(self):
        y = plant_response(np.zeros(10))
        assert y[4] == pytest.approx(0.072, abs=1e-15)  # 0.72 * 0.1

    def test_test_input_segments(self):
        u = plant_test_input(np.array([100, 300, 600, 800]))
        assert abs(u[0]) < 1e-12  # sin(4 pi)
        assert u[1] == 1.0
        assert u[2] == -1.0
        expected = (
            0.6 * np.cos(np.pi * 800 / 10)
            + 0.1 * np.cos(np.pi * 800 / 32)
            + 0.3 * np.sin(np.pi * 800 / 25)
        )
        assert u[3] == pytest.approx(expected, abs=1e-15)

    def test_inputs_pair_current_output_and_drive(self):
        rng = np.random.default_rng(1)
        seq = plant_simulate(PlantParams(n_train=50, washout=5), "train", rng)
        u = seq.inputs[1]
        y_full = plant_response(u)
        assert np.array_equal(seq.inputs[0], y_full[:50])
        assert np.array_equal(seq.targets[0], y_full[1:51])

    def test_task_split_sizes(self):
        task = plant_task(PlantParams(), np.random.default_rng(0))
        assert task.train.n_steps == 2000
        assert task.val.n_steps == 1000
        assert task.test.n_steps == 1000
        assert task.train.washout == 100

    def test_determinism(self):
        a = plant_task(PlantParams(), np.random.default_rng(5))
        b = plant_task(PlantParams(), np.random.default_rng(5))
        assert np.array_equal(a.train.inputs, b.train.inputs)
        assert np.array_equal(a.val.targets, b.val.targets)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


class TestLoadCsv:
    def test_round_trip_is_value_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        seq = SupervisedSequence(
            rng.normal(size=(3, 40)) * 1e3, rng.normal(size=(1, 40)), washout=4,
            name="t",
        )
        path = tmp_path / "seq.csv"
        write_sequence_csv(seq, str(path))
        back = read_sequence_csv(str(path), n_inputs=3, washout=4)
        assert np.array_equal(back.inputs, seq.inputs)
        assert np.array_equal(back.targets, seq.targets)

    def test_debutanizer_reduced_feature_count(self, tmp_path):
        rng = np.random.default_rng(2)
        header = [f"u{i}" for i in range(1, 8)] + ["y"]
        rows = rng.normal(size=(60, 8)).tolist()
        path = tmp_path / "debutanizer.csv"
        _write_csv(path, header, rows)
        seq = load_csv(
            str(path), header[:-1], "y", lag_spec=DEBUTANIZER_REDUCED_FEATURES
        )
        assert seq.n_inputs == 6
        assert seq.n_steps == 59  # one leading row dropped for the y lag

    def test_debutanizer_full_feature_count_and_mean_channel(self, tmp_path):
        rng = np.random.default_rng(3)
        header = [f"u{i}" for i in range(1, 8)] + ["y"]
        data = rng.normal(size=(30, 8))
        path = tmp_path / "debutanizer.csv"
        _write_csv(path, header, data.tolist())
        seq = load_csv(str(path), header[:-1], "y", lag_spec=DEBUTANIZER_FULL_FEATURES)
        assert seq.n_inputs == 13
        # mean feature is the average of the first two columns at lag 0
        want = (data[4:, 0] + data[4:, 1]) / 2.0
        assert np.allclose(seq.inputs[8], want, atol=1e-12)

    def test_power_load_feature_count(self, tmp_path):
        rng = np.random.default_rng(4)
        header = ["u1", "u2", "u3", "u4", "y"]
        path = tmp_path / "load.csv"
        _write_csv(path, header, rng.normal(size=(50, 5)).tolist())
        seq = load_csv(str(path), header[:-1], "y", lag_spec=POWER_LOAD_FEATURES)
        assert seq.n_inputs == 5

    def test_missing_column_is_schema_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        _write_csv(path, ["a", "b"], [[1, 2]])
        with pytest.raises(SchemaError):
            load_csv(str(path), ["a"], "y")

    def test_non_numeric_cell_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        _write_csv(path, ["u1", "y"], [[1.0, 2.0], ["oops", 3.0]])
        with pytest.raises(CsvParseError) as err:
            load_csv(str(path), ["u1"], "y")
        assert err.value.line == 3


class TestGaussianNoise:
    def base(self, n=64):
        rng = np.random.default_rng(0)
        return SupervisedSequence(rng.normal(size=(2, n)), rng.normal(size=(1, n)))

    def test_zero_sigma_is_identity(self):
        seq = self.base()
        out = add_gaussian_noise(seq, 0.0, np.random.default_rng(1))
        assert np.array_equal(out.targets, seq.targets)

    def test_same_seed_same_perturbation(self):
        seq = self.base()
        a = add_gaussian_noise(seq, 0.3, np.random.default_rng(9))
        b = add_gaussian_noise(seq, 0.3, np.random.default_rng(9))
        assert np.array_equal(a.targets, b.targets)

    def test_inputs_untouched(self):
        seq = self.base()
        out = add_gaussian_noise(seq, 0.5, np.random.default_rng(2))
        assert np.array_equal(out.inputs, seq.inputs)

    def test_empirical_sigma_close_to_requested(self):
        seq = self.base(10_000)
        out = add_gaussian_noise(seq, 0.25, np.random.default_rng(3))
        sample_std = np.std(out.targets - seq.targets)
        assert abs(sample_std - 0.25) < 0.05 * 0.25


class TestManifests:
    def test_mg_manifest_replays_identically(self):
        manifest = {"task": "mg2", "seed": 123}
        a = task_from_manifest(manifest)
        b = task_from_manifest(manifest)
        assert a.train.n_inputs == 2
        assert np.array_equal(a.train.inputs, b.train.inputs)
        assert np.array_equal(a.test.targets, b.test.targets)

    def test_csv_manifest_builds_noisy_validation(self, tmp_path):
        rng = np.random.default_rng(6)
        header = ["u1", "u2", "u3", "u4", "u5", "y"]
        path = tmp_path / "plantlike.csv"
        _write_csv(path, header, rng.normal(size=(120, 6)).tolist())
        manifest = {
            "task": "csv",
            "seed": 5,
            "washout": 3,
            "csv": {
                "path": str(path),
                "u_columns": header[:-1],
                "y_column": "y",
                "features": DEBUTANIZER_REDUCED_FEATURES,
                "n_train": 80,
                "n_test": 39,
            },
        }
        task = task_from_manifest(manifest)
        assert task.train.n_steps == 80
        assert task.test.n_steps == 39
        # validation = test inputs with perturbed targets
        assert np.array_equal(task.val.inputs, task.test.inputs)
        assert not np.array_equal(task.val.targets, task.test.targets)

    def test_unknown_kind_rejected(self):
        with pytest.raises(SchemaError):
            task_from_manifest({"task": "nope"})

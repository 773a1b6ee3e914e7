"""File formats round-trip to full float precision."""

import numpy as np
import pytest

from fmgl import io as fio
from fmgl.errors import DataError

from conftest import random_spd


class TestDenseCsv:
    def test_round_trip_exact(self, rng, tmp_path):
        m = random_spd(rng, 7) * np.pi
        path = tmp_path / "m.csv"
        fio.write_dense_csv(path, m)
        back = fio.read_dense_csv(path)
        assert np.array_equal(back, m)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            fio.read_dense_csv(tmp_path / "nope.csv")

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\nnot-a-number,oops,3\n")
        with pytest.raises(DataError):
            fio.read_dense_csv(path)


class TestMatrixMarket:
    def test_round_trip_exact(self, rng, tmp_path):
        m = random_spd(rng, 6)
        m[np.abs(m) < 0.3] = 0.0
        m = 0.5 * (m + m.T)
        np.fill_diagonal(m, np.abs(m).sum(axis=1) + 1.0)
        path = tmp_path / "m.mtx"
        fio.write_matrix_market(path, m)
        back = fio.read_matrix_market(path)
        assert np.array_equal(back, m)

    def test_one_based_symmetric_header(self, tmp_path):
        m = np.array([[2.0, 1.0], [1.0, 3.0]])
        path = tmp_path / "m.mtx"
        fio.write_matrix_market(path, m)
        text = path.read_text()
        assert "symmetric" in text.splitlines()[0]
        data_lines = [ln for ln in text.splitlines()
                      if ln and not ln.startswith("%")]
        # size line then triplets with 1-based indices
        assert data_lines[0].split()[:2] == ["2", "2"]
        assert data_lines[1].split()[:2] == ["1", "1"]


class TestStacks:
    def test_covariance_stack_round_trip(self, rng, tmp_path):
        mats = np.stack([random_spd(rng, 4) for _ in range(3)])
        from fmgl.core import CovarianceSet
        paths = fio.save_covariances(CovarianceSet(mats), tmp_path)
        assert len(paths) == 3
        back = fio.load_covariances(paths)
        assert np.array_equal(back.matrices, mats)

    def test_precision_stack_round_trip(self, rng, tmp_path):
        mats = np.stack([random_spd(rng, 5) for _ in range(2)])
        paths = fio.save_precisions(mats, tmp_path)
        back = fio.load_precisions(paths)
        assert np.array_equal(back, mats)

    def test_shape_mismatch_rejected(self, rng, tmp_path):
        fio.write_dense_csv(tmp_path / "a.csv", np.eye(3))
        fio.write_dense_csv(tmp_path / "b.csv", np.eye(4))
        with pytest.raises(DataError):
            fio.load_covariances([tmp_path / "a.csv", tmp_path / "b.csv"])


class TestRawData:
    def test_covariance_formula_no_centering(self, rng, tmp_path):
        x = rng.standard_normal((20, 4)) + 3.0
        path = tmp_path / "x.csv"
        fio.write_dense_csv(path, x)
        s = fio.load_raw_data([path, path])
        assert np.allclose(s.matrices[0], x.T @ x / 20, atol=1e-14)
        assert s.n_samples == 20

    def test_center_flag_subtracts_means(self, rng, tmp_path):
        x = rng.standard_normal((30, 3)) + 5.0
        path = tmp_path / "x.csv"
        fio.write_dense_csv(path, x)
        s = fio.load_raw_data([path, path], center=True)
        xc = x - x.mean(axis=0)
        assert np.allclose(s.matrices[0], xc.T @ xc / 30, atol=1e-12)


class TestManifest:
    def test_contains_schema_and_argv(self, tmp_path):
        fio.write_manifest(tmp_path, "solve", ["solve", "--lambda1", "0.1"],
                           {"lambda1": 0.1})
        payload = fio.read_json(tmp_path / "manifest.json")
        assert payload["schema_version"] == fio.SCHEMA_VERSION
        assert payload["argv"][0] == "solve"
        assert "numpy" in payload["versions"]
        assert "timestamp" in payload

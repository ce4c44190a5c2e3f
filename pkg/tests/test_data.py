"""Tests for sampling, labeling, splitting, and CSV round-trips."""

from __future__ import annotations

import numpy as np
import pytest

from wignernet.data import (
    Dataset,
    DatasetFormatError,
    EmptyDatasetError,
    SamplingRanges,
    build_dataset,
    load_dataset,
    load_splits,
    sample_inputs,
    save_dataset,
    save_splits,
    split_indices,
)
from wignernet.oscillator import OscillatorConfig, evolve_batch

CFG = OscillatorConfig()


class TestSamplingRanges:
    def test_defaults_are_valid(self):
        SamplingRanges()

    def test_rejects_inverted_interval(self):
        with pytest.raises(ValueError):
            SamplingRanges(x0_range=(1.0, -1.0))

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            SamplingRanges(sigma_x0_range=(0.0, 1.0))


class TestSampleInputs:
    def test_degenerate_intervals_give_identical_rows(self):
        ranges = SamplingRanges(
            x0_range=(2.0, 2.0),
            p0_range=(-1.0, -1.0),
            sigma_x0_range=(0.7, 0.7),
            hbar_log10_range=(-2.0, -2.0),
        )
        inputs = sample_inputs(ranges, 25, seed=0)
        assert np.allclose(inputs, inputs[0])
        assert np.allclose(inputs[0], [2.0, -1.0, 0.7, 0.01])

    def test_default_ranges_cover_and_stay_inside(self):
        ranges = SamplingRanges()
        inputs = sample_inputs(ranges, 10_000, seed=42)
        for col, (lo, hi) in zip(
            inputs.T[:3], (ranges.x0_range, ranges.p0_range, ranges.sigma_x0_range)
        ):
            assert col.min() >= lo and col.max() <= hi
        hbar = inputs[:, 3]
        assert hbar.min() >= 10.0 ** ranges.hbar_log10_range[0]
        assert hbar.max() <= 10.0 ** ranges.hbar_log10_range[1]
        assert np.log10(hbar.max() / hbar.min()) >= 5.0  # spans at least five decades

    def test_same_seed_is_bit_identical(self):
        a = sample_inputs(SamplingRanges(), 100, seed=7)
        b = sample_inputs(SamplingRanges(), 100, seed=7)
        assert np.array_equal(a, b)

    def test_column_means_near_interval_midpoints(self):
        """Empirical mean of each uniform column is within 5 standard errors."""
        ranges = SamplingRanges()
        inputs = sample_inputs(ranges, 10_000, seed=42)
        for col, (lo, hi) in zip(
            inputs.T[:3], (ranges.x0_range, ranges.p0_range, ranges.sigma_x0_range)
        ):
            se = (hi - lo) / np.sqrt(12.0) / np.sqrt(10_000)
            assert abs(col.mean() - (lo + hi) / 2.0) < 5.0 * se
        log_hbar = np.log10(inputs[:, 3])
        lo, hi = ranges.hbar_log10_range
        se = (hi - lo) / np.sqrt(12.0) / np.sqrt(10_000)
        assert abs(log_hbar.mean() - (lo + hi) / 2.0) < 5.0 * se

    def test_rejects_bad_count(self):
        with pytest.raises(ValueError):
            sample_inputs(SamplingRanges(), 0, seed=0)


class TestBuildDataset:
    def test_single_row_probe(self):
        ds = build_dataset(CFG, np.array([[1.0, 0.0, 1.0, 1.0]]))
        assert np.allclose(
            ds.targets[0],
            [0.28366218546322625, 0.9589242746631385, 0.8475635726972683, 0.8475635726972683],
            atol=1e-12,
        )

    def test_t_zero_targets_echo_inputs(self):
        cfg = OscillatorConfig(t=0.0)
        inputs = sample_inputs(SamplingRanges(), 50, seed=1)
        ds = build_dataset(cfg, inputs)
        assert np.allclose(ds.targets[:, 0], inputs[:, 0], rtol=1e-14)
        assert np.allclose(ds.targets[:, 1], inputs[:, 1], rtol=1e-14)
        assert np.allclose(ds.targets[:, 2], inputs[:, 2], rtol=1e-14)
        assert np.allclose(ds.targets[:, 3], inputs[:, 2], rtol=1e-14)  # m = omega = 1

    def test_rebuild_is_identical(self):
        inputs = sample_inputs(SamplingRanges(), 100, seed=2)
        a = build_dataset(CFG, inputs)
        b = build_dataset(CFG, inputs)
        assert np.array_equal(a.targets, b.targets)

    def test_row_error_carries_index(self):
        inputs = np.array([[0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, -1.0]])
        with pytest.raises(ValueError, match="row 1"):
            build_dataset(CFG, inputs)

    def test_row_count_mismatch_rejected(self):
        with pytest.raises(ValueError, match="row count"):
            Dataset(
                inputs=np.zeros((3, 4)),
                targets=np.zeros((2, 4)),
                config=CFG,
                seed=0,
                ranges=SamplingRanges(),
            )


class TestSplitIndices:
    def test_exact_division_at_ten(self):
        s = split_indices(10, seed=0)
        assert (s.train.size, s.validation.size, s.test.size) == (8, 1, 1)

    def test_ten_thousand_row_split(self):
        s = split_indices(10_000, seed=0)
        assert (s.train.size, s.validation.size, s.test.size) == (8000, 1000, 1000)

    def test_partition_property(self):
        for n in (10, 11, 37, 1000):
            s = split_indices(n, seed=3)
            merged = np.concatenate([s.train, s.validation, s.test])
            assert np.array_equal(np.sort(merged), np.arange(n))

    def test_deterministic_per_seed(self):
        a = split_indices(500, seed=11)
        b = split_indices(500, seed=11)
        c = split_indices(500, seed=12)
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.test, b.test)
        assert not np.array_equal(a.train, c.train)

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            split_indices(9, seed=0)


class TestDatasetRoundTrip:
    def make_dataset(self, n=3, seed=5):
        inputs = sample_inputs(SamplingRanges(), n, seed=seed)
        return build_dataset(CFG, inputs, ranges=SamplingRanges(), seed=seed)

    def test_save_load_is_bit_identical(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "ds.csv"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert np.array_equal(loaded.inputs, ds.inputs)
        assert np.array_equal(loaded.targets, ds.targets)
        assert loaded.seed == ds.seed
        assert loaded.config == ds.config
        assert loaded.ranges == ds.ranges

    def test_save_load_save_is_byte_identical(self, tmp_path):
        ds = self.make_dataset(n=20)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        save_dataset(ds, p1)
        save_dataset(load_dataset(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_regeneration_matches_stored_targets(self, tmp_path):
        ds = self.make_dataset(n=200, seed=8)
        path = tmp_path / "ds.csv"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        regenerated, _ = evolve_batch(loaded.config, loaded.inputs)
        assert np.allclose(regenerated, loaded.targets, rtol=1e-12)

    def test_wrong_column_count_names_line(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "ds.csv"
        save_dataset(ds, path)
        lines = path.read_text().splitlines()
        lines[10] = lines[10].rsplit(",", 1)[0]  # drop a column on the second data row
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match="line 11"):
            load_dataset(path)

    def test_non_numeric_cell_names_line(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "ds.csv"
        save_dataset(ds, path)
        lines = path.read_text().splitlines()
        cells = lines[9].split(",")
        cells[3] = "bogus"
        lines[9] = ",".join(cells)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match="line 10"):
            load_dataset(path)

    def test_empty_file_raises_distinct_error(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(EmptyDatasetError):
            load_dataset(path)

    def test_header_only_file_raises_distinct_error(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "ds.csv"
        save_dataset(ds, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:9]) + "\n")  # metadata + header, no rows
        with pytest.raises(EmptyDatasetError):
            load_dataset(path)

    def test_wrong_header_rejected(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "ds.csv"
        save_dataset(ds, path)
        lines = path.read_text().splitlines()
        lines[8] = "a,b,c,d,e,f,g,h"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match="header"):
            load_dataset(path)


class TestSplitRoundTrip:
    def test_save_load_round_trip(self, tmp_path):
        s = split_indices(57, seed=4)
        path = tmp_path / "splits.csv"
        save_splits(s, path)
        loaded = load_splits(path)
        assert np.array_equal(loaded.train, s.train)
        assert np.array_equal(loaded.validation, s.validation)
        assert np.array_equal(loaded.test, s.test)

    def test_bad_label_rejected(self, tmp_path):
        path = tmp_path / "splits.csv"
        path.write_text("index,split\n0,train\n1,bogus\n")
        with pytest.raises(DatasetFormatError, match="line 3"):
            load_splits(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "splits.csv"
        path.write_text("0,train\n")
        with pytest.raises(DatasetFormatError):
            load_splits(path)

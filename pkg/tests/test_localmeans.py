"""Tests for FFT region sums against direct summation."""

import numpy as np
import pytest

from errors import DomainError, NegativeCount, ShapeError, SizeError
from localmeans import COUNTS, REALS, fft_scale_sums, make_field, naive_scale_sums
from regions import RegionSystem, build_rectangles


def _as_dict(scale_sums):
    return {entry.scale: entry for entry in scale_sums}


class TestMakeField:
    def test_square_required(self):
        with pytest.raises(ShapeError):
            make_field(np.zeros((3, 4)))

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            make_field(np.array([[1.0, np.nan], [0.0, 0.0]]))

    def test_negative_counts(self):
        with pytest.raises(NegativeCount):
            make_field(np.array([[1, -1], [0, 0]]), COUNTS)

    def test_fractional_counts(self):
        with pytest.raises(NegativeCount):
            make_field(np.array([[1.5, 1], [0, 0]]), COUNTS)

    def test_read_only(self):
        field = make_field(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            field.data[0, 0] = 1.0

    def test_shape_metadata(self):
        field = make_field(np.zeros((5, 5, 5)))
        assert (field.n, field.d, field.dtype) == (5, 3, REALS)


class TestFftSums:
    def test_constant_field(self):
        system = build_rectangles(8, 2, 2, 3)
        field = make_field(np.full((8, 8), 3.0))
        for entry in fft_scale_sums(field, system):
            assert np.allclose(entry.sums, 3.0 * entry.cardinality, atol=1e-9)
            assert entry.sums.shape == (8 - entry.scale[0] + 1, 8 - entry.scale[1] + 1)

    def test_impulse(self):
        data = np.zeros((4, 4))
        data[0, 0] = 1
        sums = fft_scale_sums(make_field(data, COUNTS), build_rectangles(4, 2, 2, 2))[0].sums
        expected = np.zeros((3, 3))
        expected[0, 0] = 1
        assert np.array_equal(sums, expected)

    def test_one_dimensional(self):
        sums = fft_scale_sums(make_field([1, 2, 3], COUNTS), build_rectangles(3, 1, 2, 2))[0].sums
        assert np.array_equal(sums, [3.0, 5.0])

    def test_size_mismatch(self, small_system):
        with pytest.raises(SizeError):
            fft_scale_sums(make_field(np.zeros((8, 8))), small_system)

    def test_counts_are_integral(self, count_field, small_system):
        for entry in fft_scale_sums(count_field, small_system):
            assert np.array_equal(entry.sums, np.round(entry.sums))

    def test_matches_naive_on_reals(self, rng, small_system):
        field = make_field(rng.normal(0, 1, (16, 16)))
        naive = _as_dict(naive_scale_sums(field, small_system))
        for entry in fft_scale_sums(field, small_system):
            assert np.allclose(entry.sums, naive[entry.scale].sums, atol=1e-9, rtol=0)

    def test_matches_naive_on_random_integer_fields(self, rng):
        for _ in range(100):
            sides = rng.integers(1, 33, size=(3, 2))
            scales = tuple(dict.fromkeys(tuple(int(h) for h in row) for row in sides))
            cards = [h[0] * h[1] for h in scales]
            system = RegionSystem(n=32, d=2, scales=scales, scale_bounds=(min(cards), max(cards)))
            field = make_field(rng.integers(0, 50, size=(32, 32)), COUNTS)

            naive = _as_dict(naive_scale_sums(field, system))
            for entry in fft_scale_sums(field, system):
                assert np.allclose(entry.sums, naive[entry.scale].sums, atol=1e-9, rtol=0)

    def test_linear_in_the_field(self, rng, small_system):
        first = rng.normal(0, 1, (16, 16))
        second = rng.poisson(3.0, (16, 16)).astype(float)
        combined = fft_scale_sums(make_field(2.5 * first - 1.5 * second), small_system)
        sums_first = fft_scale_sums(make_field(first), small_system)
        sums_second = fft_scale_sums(make_field(second), small_system)
        for mixed, a, b in zip(combined, sums_first, sums_second):
            assert np.allclose(mixed.sums, 2.5 * a.sums - 1.5 * b.sums, atol=1e-9, rtol=0)

    def test_translation_on_overlap(self, rng, small_system):
        data = rng.normal(0, 1, (16, 16))
        shift = (3, 5)
        moved = np.zeros_like(data)
        moved[:16 - shift[0], :16 - shift[1]] = data[shift[0]:, shift[1]:]

        original = fft_scale_sums(make_field(data), small_system)
        translated = fft_scale_sums(make_field(moved), small_system)
        for entry, shifted in zip(original, translated):
            h = entry.scale
            rows, cols = 16 - shift[0] - h[0] + 1, 16 - shift[1] - h[1] + 1
            if rows < 1 or cols < 1:
                continue
            assert np.allclose(shifted.sums[:rows, :cols], entry.sums[shift[0]:, shift[1]:],
                               atol=1e-9, rtol=0)

    def test_full_grid_scale_is_total(self, count_field):
        system = build_rectangles(16, 2, 16, 16)
        sums = fft_scale_sums(count_field, system)[0].sums
        assert sums.shape == (1, 1)
        assert sums[0, 0] == count_field.data.sum()

    def test_three_dimensions(self, rng):
        system = build_rectangles(6, 3, 2, 3)
        field = make_field(rng.integers(0, 9, size=(6, 6, 6)), COUNTS)
        naive = _as_dict(naive_scale_sums(field, system))
        for entry in fft_scale_sums(field, system):
            assert np.array_equal(entry.sums, naive[entry.scale].sums)

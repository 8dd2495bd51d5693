"""End-to-end tests of the ams.py command line."""

import csv
import os

import pytest

import ams
from config import load_yaml_file
from errors import ConfigError
from gridio import write_grid
from localmeans import COUNTS, make_field


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture()
def photon_grid(workdir, rng):
    data = rng.poisson(1.0, (16, 16))
    data[5:9, 5:9] += rng.poisson(6.0, (4, 4))
    write_grid(make_field(data, COUNTS), 'field.csv')
    return 'field.csv'


def _scan_args(*extra):
    return ['--no-progress', 'scan', '--input', 'field.csv', '--model', 'poisson', '--one-sided',
            '--sides', '2..4', '--runs', '50', '--seed', '7', '--quantile-store', 'store', *extra]


class TestParseSides:
    def test_range(self):
        assert ams.parse_sides('4..14') == (4, 14, 'all')

    def test_even(self):
        assert ams.parse_sides('4..14:even') == (4, 14, 'even')

    def test_single(self):
        assert ams.parse_sides('6') == (6, 6, 'all')

    @pytest.mark.parametrize('text', ['4-14', '..3', '4..14:odd'])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            ams.parse_sides(text)

    def test_format_round_trip(self):
        assert ams.parse_sides(ams.format_sides(2, 8, 'even')) == (2, 8, 'even')


class TestScan:
    def test_pipeline(self, photon_grid, capsys):
        assert ams.main(_scan_args('--baseline', '1.0', '--out', 'out/run')) == 0

        for suffix in ('_regions.csv', '_significance.pgm', '_segmentation.pgm', '_coverage.pgm',
                       '_manifest.yaml'):
            assert os.path.exists('out/run' + suffix)

        manifest = load_yaml_file('out/run_manifest.yaml')
        assert manifest['parameters']['seed'] == 7
        assert manifest['model']['provenance'] == 'known'
        assert manifest['sidedness'] == 'one-sided'
        assert manifest['n_significant'] > 0
        assert "SUMMARY" in capsys.readouterr().out

    def test_manifest_rerun_is_identical(self, photon_grid):
        assert ams.main(_scan_args('--baseline', '1.0', '--out', 'first')) == 0
        assert ams.main(['--no-progress', 'scan', '--manifest', 'first_manifest.yaml', '--out', 'second']) == 0

        for suffix in ('_regions.csv', '_significance.pgm', '_segmentation.pgm'):
            with open('first' + suffix, 'rb') as a, open('second' + suffix, 'rb') as b:
                assert a.read() == b.read()

    def test_pixel_size_adds_physical_areas(self, photon_grid, capsys):
        assert ams.main(_scan_args('--baseline', '1.0', '--out', 'plain')) == 0
        plain_out = capsys.readouterr().out
        assert ams.main(_scan_args('--baseline', '1.0', '--out', 'nm', '--pixel-size', '20',
                                   '--pixel-unit', 'nm')) == 0
        nm_out = capsys.readouterr().out

        with open('plain_regions.csv', newline='') as f:
            plain_rows = list(csv.reader(f))
        with open('nm_regions.csv', newline='') as f:
            nm_rows = list(csv.reader(f))
        assert 'area_nm2' not in plain_rows[0]
        assert nm_rows[0] == plain_rows[0] + ['area_nm2']
        for plain, scaled in zip(plain_rows[1:], nm_rows[1:]):
            assert scaled[:-1] == plain
            assert float(scaled[-1]) == pytest.approx(int(plain[4]) * 400.0)

        manifest = load_yaml_file('nm_manifest.yaml')
        assert manifest['area_unit'] == 'nm^2'
        assert manifest['smallest_significant_area'] == pytest.approx(
            manifest['smallest_significant_scale'] * 400.0)
        assert load_yaml_file('plain_manifest.yaml')['area_unit'] == 'px'
        assert "nm^2" in nm_out
        assert "Smallest area" not in plain_out

    def test_estimated_parameters_cap_scales(self, photon_grid, capsys):
        assert ams.main(_scan_args('--out', 'est', '--sides', '2..6')) == 0
        out = capsys.readouterr().out
        assert "⚠️  WARNING:" in out
        assert "n^(d/2) = 16" in out
        manifest = load_yaml_file('est_manifest.yaml')
        assert manifest['model']['provenance'] == 'estimated'

    def test_missing_input(self, workdir, capsys):
        assert ams.main(['--no-progress', 'scan', '--input', 'nowhere.csv']) == 3
        assert "error_category=data" in capsys.readouterr().err

    def test_constant_field(self, workdir, capsys):
        with open('flat.csv', 'w') as f:
            f.write("2.5,2.5\n2.5,2.5\n")
        code = ams.main(['--no-progress', 'scan', '--input', 'flat.csv', '--model', 'gauss-unknown',
                         '--sides', '1..2'])
        assert code == 4
        assert "error_category=degenerate" in capsys.readouterr().err

    def test_poisson_needs_counts(self, workdir):
        with open('reals.csv', 'w') as f:
            f.write("0.5,1\n2,3\n")
        assert ams.main(['--no-progress', 'scan', '--input', 'reals.csv', '--model', 'poisson',
                         '--sides', '1..2']) == 3

    def test_bad_sides(self, photon_grid, capsys):
        assert ams.main(_scan_args('--sides', '4-8')) == 2
        assert "error_category=config" in capsys.readouterr().err

    def test_zero_threads(self, photon_grid):
        assert ams.main(['--threads', '0'] + _scan_args('--baseline', '1.0')) == 2


class TestQuantile:
    ARGS = ['--no-progress', 'quantile', '--n', '8', '--sides', '2..4', '--runs', '20', '--seed', '3',
            '--quantile-store', 'store']

    def test_simulate_then_cache(self, workdir, capsys):
        assert ams.main(self.ARGS) == 0
        first = capsys.readouterr().out
        assert "(simulated)" in first
        assert "alpha=0.1" in first

        assert ams.main(self.ARGS) == 0
        assert "(cache)" in capsys.readouterr().out
        assert os.path.exists(os.path.join('store', 'quantiles.db'))

    def test_needs_grid_size(self, workdir):
        assert ams.main(['--no-progress', 'quantile', '--sides', '2..4']) == 2


class TestSimulate:
    def test_phantom(self, workdir):
        assert ams.main(['--no-progress', 'simulate', '--scenario', 'phantom', '--seed', '1',
                         '--out', 'sim/phantom']) == 0
        assert os.path.exists('sim/phantom.csv')
        manifest = load_yaml_file('sim/phantom_manifest.yaml')
        assert manifest['config']['seed'] == 1
        assert manifest['summary']['truth_pixels'] == 8 * 8 + 12 * 6

    def test_phantom_scan(self, workdir):
        assert ams.main(['--no-progress', 'simulate', '--scenario', 'phantom', '--seed', '1',
                         '--out', 'phantom']) == 0
        assert ams.main(['--no-progress', 'scan', '--input', 'phantom.csv', '--model', 'poisson',
                         '--baseline', '1.0', '--one-sided', '--sides', '4..8:even', '--runs', '20',
                         '--seed', '2', '--quantile-store', 'store', '--out', 'phantom_scan']) == 0
        manifest = load_yaml_file('phantom_scan_manifest.yaml')
        assert manifest['n_significant'] > 0

    def test_missing_scenario(self, workdir):
        assert ams.main(['--no-progress', 'simulate']) == 2


class TestValidate:
    def test_dw(self, workdir, capsys):
        assert ams.main(['validate', '--calibration', 'dw', '--n', '64']) == 0
        assert "✓ Calibration dw" in capsys.readouterr().out

    def test_small_scale_advisory(self, workdir, capsys):
        assert ams.main(['validate', '--calibration', 'sac', '--min-card', '16']) == 0
        assert "⚠️  WARNING:" in capsys.readouterr().out

    def test_bad_nu(self, workdir):
        assert ams.main(['validate', '--calibration', 'dw', '--nu', '0.5']) == 2

    def test_unit_calibration(self, workdir):
        assert ams.main(['validate', '--calibration', 'unit', '--d', '1', '--n', '32']) == 0


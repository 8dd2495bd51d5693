"""
Simulation studies.

Scenarios:
- plugin-failure:       distribution of the plug-in statistic on all scales vs
                        the restricted (adjusted) statistic, compared with M_n
- quantile-table:       critical values of the calibrated and the uncalibrated scan
- gaussian-level-power: rejection rates over a grid of noise levels sigma
- poisson-level-power:  rejection rates over block intensities and background levels
- phantom:              synthetic photon-count image for the scan pipeline

Each scenario is driven by an ExperimentConfig and writes one CSV plus a
manifest. Every replicate draws from its own generator, seeded with the
config seed and the replicate's position, so outputs do not depend on the
worker count.
"""

import csv
import hashlib
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.stats import ks_2samp

from calibration import build_calibration
from config import load_yaml_file, write_yaml_file
from errors import ConfigError
from gridio import write_csv, write_mask, write_pgm
from localmeans import COUNTS, REALS, fft_scale_sums, make_field
from models import (GAUSS_KNOWN, GAUSS_UNKNOWN, POISSON, build_model, estimate_global,
                    model_from_estimates)
from quantiles import cache_lookup_or_simulate, run_replicates, simulate_mn
from regions import build_rectangles, restrict
from statistic import ONE_SIDED, SIDEDNESS, TWO_SIDED, scan_from_sums, surrogate_from_sums


PLUGIN_FAILURE = 'plugin-failure'
QUANTILE_TABLE = 'quantile-table'
GAUSSIAN_LEVEL_POWER = 'gaussian-level-power'
POISSON_LEVEL_POWER = 'poisson-level-power'
PHANTOM = 'phantom'

SCENARIOS = (PLUGIN_FAILURE, QUANTILE_TABLE, GAUSSIAN_LEVEL_POWER, POISSON_LEVEL_POWER, PHANTOM)

# Published critical values for n=128, d=2, even sides 4..14, dw (nu=1), two-sided
REFERENCE_QUANTILES = {0.2: 1.2906, 0.1: 1.4677, 0.05: 1.6278, 0.025: 1.7841, 0.01: 1.9768}

# Generator streams, combined with the config seed
STREAM_DATA = 0
STREAM_NOISE = 1
STREAM_FLOOR = 2
STREAM_LEVEL = 3
STREAM_POWER = 4
STREAM_PHANTOM = 5

KS_FLOOR_LEVEL = 0.95


def _grid(start, stop, step):
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


@dataclass
class ExperimentConfig:
    scenario: str
    n: int = 128
    d: int = 2
    min_side: int = 4
    max_side: int = 14
    parity: str = 'even'
    min_card: int = None
    max_card: int = None
    calibration: str = 'dw'
    nu: float = 1.0
    pwm_c: float = 2.0
    pwm_cd: float = 1.0
    unit_offset: float = 0.0
    sidedness: str = TWO_SIDED
    alpha: float = 0.1
    mc_runs: int = 2000
    replicates: int = 500
    seed: int = 0
    grid: list = field(default_factory=list)
    level_grid: list = field(default_factory=list)
    background: float = 1.0
    amplitude: float = 1.0
    anomaly_size: int = 8
    anomaly_offset: list = None  # 0-based; None centres the block
    estimate_mean: bool = False
    smoothing_width: int = 1
    restricted_min_side: int = 4
    restricted_max_side: int = 64
    floor_trials: int = 200
    blocks: list = field(default_factory=list)
    store: str = None


SCENARIO_DEFAULTS = {
    PLUGIN_FAILURE: {
        'n': 128, 'd': 1, 'min_side': 1, 'max_side': 128, 'parity': 'all',
        'replicates': 2000, 'restricted_min_side': 4, 'restricted_max_side': 64,
    },
    QUANTILE_TABLE: {
        'n': 128, 'd': 2, 'min_side': 4, 'max_side': 14, 'parity': 'even', 'mc_runs': 2000,
    },
    GAUSSIAN_LEVEL_POWER: {
        'sidedness': TWO_SIDED, 'amplitude': 1.0, 'grid': _grid(0.5, 2.5, 0.1),
    },
    POISSON_LEVEL_POWER: {
        'sidedness': ONE_SIDED, 'background': 1.0,
        'grid': _grid(1.0, 2.0, 0.05), 'level_grid': _grid(0.2, 2.0, 0.2),
    },
    PHANTOM: {
        'background': 1.0,
        'blocks': [
            {'offset': [30, 30], 'size': [8, 8], 'intensity': 3.0},
            {'offset': [80, 60], 'size': [12, 6], 'intensity': 2.0},
        ],
    },
}


def load_experiment_config(source=None, overrides=None, defaults=None):
    """
    Build an ExperimentConfig.

    source is a YAML path or a mapping; overrides (e.g. command-line flags)
    win over it, and defaults (the experiments section of settings.yaml,
    keyed by scenario) sit below it. Scenario defaults fill in everything else.
    """
    data = load_yaml_file(source) if isinstance(source, str) else dict(source or {})
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})

    scenario = data.get('scenario')
    if scenario not in SCENARIOS:
        raise ConfigError(f"Unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}")

    known = {f.name for f in fields(ExperimentConfig)}
    merged = dict(SCENARIO_DEFAULTS[scenario])
    for layer in ((defaults or {}).get(scenario) or {}, data):
        unknown = set(layer) - known
        if unknown:
            raise ConfigError(f"Unknown experiment setting(s): {', '.join(sorted(unknown))}")
        merged.update(layer)

    config = ExperimentConfig(**merged)
    validate_config(config)
    return config


def anomaly_slices(config):
    """Index slices of the planted block (centred unless an offset is given)."""
    size = config.anomaly_size
    if config.anomaly_offset is None:
        offset = [(config.n - size) // 2] * config.d
    else:
        offset = list(config.anomaly_offset)
    return tuple(slice(t, t + size) for t in offset)


def validate_config(config):
    """Raise ConfigError for settings that cannot describe a runnable experiment."""
    if config.n < 1 or config.d < 1:
        raise ConfigError(f"Grid needs n >= 1 and d >= 1, got n={config.n}, d={config.d}")
    if config.sidedness not in SIDEDNESS:
        raise ConfigError(f"Unknown sidedness {config.sidedness!r}")
    if not 0 < config.alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {config.alpha}")
    if config.replicates < 1 or config.mc_runs < 1:
        raise ConfigError("replicates and mc_runs must be >= 1")
    if config.smoothing_width < 1:
        raise ConfigError(f"smoothing_width must be >= 1, got {config.smoothing_width}")

    if config.scenario in (GAUSSIAN_LEVEL_POWER, POISSON_LEVEL_POWER):
        if not config.grid:
            raise ConfigError(f"{config.scenario} needs a non-empty amplitude grid")
        if config.anomaly_offset is not None and len(config.anomaly_offset) != config.d:
            raise ConfigError(f"anomaly_offset needs {config.d} coordinates")
        for window in anomaly_slices(config):
            if window.start < 0 or window.stop > config.n or config.anomaly_size < 1:
                raise ConfigError(f"Anomaly of side {config.anomaly_size} does not fit the {config.n}^{config.d} grid")

    if config.scenario == GAUSSIAN_LEVEL_POWER and any(s <= 0 for s in config.grid):
        raise ConfigError("Noise levels sigma must be > 0")
    if config.scenario == POISSON_LEVEL_POWER:
        if not config.level_grid:
            raise ConfigError("poisson-level-power needs a non-empty background grid")
        if any(v < 0 for v in config.grid) or any(v <= 0 for v in config.level_grid) or config.background <= 0:
            raise ConfigError("Poisson intensities must be positive")

    if config.scenario == PLUGIN_FAILURE:
        if not 1 <= config.restricted_min_side <= config.restricted_max_side <= config.n:
            raise ConfigError("Restricted sides must satisfy 1 <= min <= max <= n")

    if config.scenario == PHANTOM:
        for block in config.blocks:
            offset, size = block.get('offset', []), block.get('size', [])
            if len(offset) != config.d or len(size) != config.d:
                raise ConfigError(f"Phantom block {block} needs {config.d}-d offset and size")
            if any(t < 0 or h < 1 or t + h > config.n for t, h in zip(offset, size)):
                raise ConfigError(f"Phantom block {block} does not fit the grid")
            if block.get('intensity', 0) < 0:
                raise ConfigError(f"Phantom block {block} has a negative intensity")


def config_system(config):
    """Region system of the config, restricted to [min_card, max_card] when given."""
    system = build_rectangles(config.n, config.d, config.min_side, config.max_side, config.parity)
    if config.min_card is not None or config.max_card is not None:
        low = config.min_card if config.min_card is not None else 1
        high = config.max_card if config.max_card is not None else config.n ** config.d
        system = restrict(system, low, high)
    return system


def config_calibration(config):
    return build_calibration(config.calibration, config.d, nu=config.nu, pwm_c=config.pwm_c,
                             pwm_cd=config.pwm_cd, unit_offset=config.unit_offset)


def _quantile_table(config, system, cal, sidedness, n_jobs, progress):
    if config.store:
        return cache_lookup_or_simulate(config.store, system, cal, sidedness=sidedness,
                                        mc_runs=config.mc_runs, seed=config.seed,
                                        alphas=(config.alpha,), n_jobs=n_jobs, progress=progress)
    return simulate_mn(system, cal, sidedness=sidedness, mc_runs=config.mc_runs, seed=config.seed,
                       alphas=(config.alpha,), n_jobs=n_jobs, progress=progress)


# ----------------------------------------------------------------------------
# Curve helpers
# ----------------------------------------------------------------------------

def smooth_curve(values, width):
    """Centred moving average; near the ends the window shrinks to the available points."""
    values = np.asarray(values, dtype=float)
    if width <= 1 or values.size == 0:
        return values.copy()
    kernel = np.ones(int(width))
    totals = np.convolve(values, kernel, mode='same')
    counts = np.convolve(np.ones_like(values), kernel, mode='same')
    return totals / counts


def monotonicity_violation(values, increasing=True):
    """Largest drop against the expected direction (0 for a monotone curve)."""
    values = np.asarray(values, dtype=float)
    if not increasing:
        values = -values
    if values.size == 0:
        return 0.0
    return float(np.max(np.maximum.accumulate(values) - values))


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov distance between empirical distributions."""
    return float(ks_2samp(a, b, method='asymp').statistic)


def ks_noise_floor(size, trials=200, seed=0, level=KS_FLOOR_LEVEL):
    """
    Quantile of the KS distance between two independent samples of `size`
    draws from one distribution. KS is distribution-free, so uniforms suffice.
    """
    rng = np.random.default_rng([seed, STREAM_FLOOR])
    distances = [ks_distance(rng.random(size), rng.random(size)) for _ in range(trials)]
    return float(np.quantile(distances, level))


# ----------------------------------------------------------------------------
# Plug-in failure
# ----------------------------------------------------------------------------

def _plugin_replicate(r, full, restricted, cal, sidedness, seed):
    """One replicate: surrogates on independent noise, oracle and plug-in scans on Y."""
    shape = (full.n,) * full.d
    y = make_field(np.random.default_rng([seed, STREAM_DATA, r]).standard_normal(shape))
    x = make_field(np.random.default_rng([seed, STREAM_NOISE, r]).standard_normal(shape))

    noise_full = fft_scale_sums(x, full, workers=1)
    data_full = fft_scale_sums(y, full, workers=1)
    keep = set(restricted.scales)
    noise_restricted = [s for s in noise_full if s.scale in keep]
    data_restricted = [s for s in data_full if s.scale in keep]

    oracle = build_model(GAUSS_KNOWN, 0.0, 1.0)
    plugin = model_from_estimates(GAUSS_UNKNOWN, estimate_global(GAUSS_UNKNOWN, y))

    return (
        surrogate_from_sums(noise_full, full, cal, sidedness),
        surrogate_from_sums(noise_restricted, restricted, cal, sidedness),
        scan_from_sums(data_full, full, oracle, cal, sidedness, keep_regions=False).t_n,
        scan_from_sums(data_full, full, plugin, cal, sidedness, keep_regions=False).t_n,
        scan_from_sums(data_restricted, restricted, plugin, cal, sidedness, keep_regions=False).t_n,
    )


PLUGIN_COLUMNS = ['replicate', 'm_n_full', 'm_n_restricted', 'oracle_full', 'plugin_full', 'plugin_restricted']


def run_plugin_failure(config, n_jobs=1, progress=False):
    """
    Compare the plug-in statistic on all scales and on the restricted scales
    with the surrogate M_n of the same system.

    Returns (rows, summary); summary holds the KS distances and the noise floor.
    """
    if config.scenario != PLUGIN_FAILURE:
        raise ConfigError(f"run_plugin_failure needs the {PLUGIN_FAILURE} scenario")

    full = build_rectangles(config.n, config.d, config.min_side, config.max_side, config.parity)
    restricted = restrict(full, config.restricted_min_side ** config.d, config.restricted_max_side ** config.d)
    cal = config_calibration(config)

    draws = run_replicates(
        _plugin_replicate, config.replicates,
        args=(full, restricted, cal, config.sidedness, config.seed),
        n_jobs=n_jobs, progress=progress, desc='Plug-in replicates',
    )
    columns = np.asarray(draws, dtype=float).T
    m_full, m_restricted, oracle_full, plugin_full, plugin_restricted = columns

    floor = ks_noise_floor(config.replicates, trials=config.floor_trials, seed=config.seed)
    summary = {
        'ks_noise_floor': floor,
        'ks_oracle_vs_m_n': ks_distance(oracle_full, m_full),
        'ks_plugin_full_vs_m_n': ks_distance(plugin_full, m_full),
        'ks_plugin_restricted_vs_m_n': ks_distance(plugin_restricted, m_restricted),
    }
    summary['plugin_full_differs'] = summary['ks_plugin_full_vs_m_n'] > floor
    summary['plugin_restricted_fits'] = summary['ks_plugin_restricted_vs_m_n'] < 2 * floor

    rows = [[r] + [float(v) for v in draw] for r, draw in enumerate(draws)]
    return rows, summary


# ----------------------------------------------------------------------------
# Quantile table
# ----------------------------------------------------------------------------

QUANTILE_COLUMNS = ['alpha', 'level', 'calibrated', 'uncalibrated', 'reference']


def _is_reference_setup(config):
    return (config.n, config.d, config.min_side, config.max_side, config.parity,
            config.calibration, config.nu, config.sidedness) == (128, 2, 4, 14, 'even', 'dw', 1.0, TWO_SIDED)


def run_quantile_table(config, n_jobs=1, progress=False):
    """
    Critical values of the calibrated statistic next to the uncalibrated one
    (unit calibration with no offset) for the same system and seed.
    """
    system = config_system(config)
    calibrated = _quantile_table(config, system, config_calibration(config), config.sidedness,
                                 n_jobs, progress)
    uncalibrated = _quantile_table(config, system, build_calibration('unit', config.d),
                                   config.sidedness, n_jobs, progress)

    reference = REFERENCE_QUANTILES if _is_reference_setup(config) else {}
    rows = []
    for alpha in sorted(calibrated.quantiles, reverse=True):
        rows.append([
            alpha,
            round(1.0 - alpha, 10),
            calibrated.quantile(alpha),
            uncalibrated.quantile(alpha),
            reference.get(alpha, ''),
        ])

    summary = {
        'seed': calibrated.key.seed,
        'mc_runs': config.mc_runs,
        'max_reference_gap': max((abs(calibrated.quantile(a) - q) for a, q in reference.items()), default=None),
    }
    return rows, summary


# ----------------------------------------------------------------------------
# Level and power
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    """Everything one replicate of a level or power curve needs."""
    family: str  # 'gaussian' or 'poisson'
    system: object
    cal: object
    sidedness: str
    eta: float
    seed: int
    stream: int
    index: int
    background: float  # sigma (gaussian) or lambda0 (poisson)
    block_value: float  # block mean (gaussian) or intensity (poisson); None under H0
    block: tuple
    estimate_mean: bool = False


def _simulate_field(point, rng):
    shape = (point.system.n,) * point.system.d
    if point.family == 'gaussian':
        data = point.background * rng.standard_normal(shape)
        if point.block_value is not None:
            data[point.block] += point.block_value
        return make_field(data, REALS)

    data = rng.poisson(point.background, shape).astype(float)
    if point.block_value is not None:
        block_shape = data[point.block].shape
        data[point.block] = rng.poisson(point.block_value, block_shape)
    return make_field(data, COUNTS)


def _curve_replicate(r, point):
    """(oracle rejects, adjusted rejects) for one simulated field."""
    rng = np.random.default_rng([point.seed, point.stream, point.index, r])
    data = _simulate_field(point, rng)
    sums = fft_scale_sums(data, point.system, workers=1)

    if point.family == 'gaussian':
        oracle = build_model(GAUSS_KNOWN, 0.0, point.background ** 2)
        known_mean = None if point.estimate_mean else 0.0
        adjusted = model_from_estimates(GAUSS_UNKNOWN,
                                        estimate_global(GAUSS_UNKNOWN, data, known_theta=known_mean))
    else:
        oracle = build_model(POISSON, point.background)
        adjusted = model_from_estimates(POISSON, estimate_global(POISSON, data))

    t_oracle = scan_from_sums(sums, point.system, oracle, point.cal, point.sidedness, keep_regions=False).t_n
    t_adjusted = scan_from_sums(sums, point.system, adjusted, point.cal, point.sidedness, keep_regions=False).t_n
    return t_oracle >= point.eta, t_adjusted >= point.eta


LEVEL_POWER_COLUMNS = ['kind', 'parameter', 'value', 'method', 'rejections', 'replicates', 'rate', 'smoothed_rate']


def _curve(config, base, kind, parameter, values, stream, n_jobs, progress):
    """Rejection rates of the oracle and the adjusted scan for each value of the grid."""
    oracle_rates, adjusted_rates, counts = [], [], []
    for index, value in enumerate(values):
        if kind == 'level':
            point = CurvePoint(**base, stream=stream, index=index, background=value, block_value=None)
        elif base['family'] == 'gaussian':
            point = CurvePoint(**base, stream=stream, index=index, background=value,
                               block_value=config.amplitude)
        else:
            point = CurvePoint(**base, stream=stream, index=index, background=config.background,
                               block_value=value)

        outcomes = run_replicates(_curve_replicate, config.replicates, args=(point,),
                                  n_jobs=n_jobs, progress=progress, desc=f"{kind} {parameter}={value:g}")
        oracle_hits = sum(1 for o, _ in outcomes if o)
        adjusted_hits = sum(1 for _, a in outcomes if a)
        counts.append((oracle_hits, adjusted_hits))
        oracle_rates.append(oracle_hits / config.replicates)
        adjusted_rates.append(adjusted_hits / config.replicates)

    rows = []
    for method, rates, position in (('oracle', oracle_rates, 0), ('ams', adjusted_rates, 1)):
        smoothed = smooth_curve(rates, config.smoothing_width)
        for value, rate, smooth, hits in zip(values, rates, smoothed, counts):
            rows.append([kind, parameter, value, method, hits[position], config.replicates,
                         rate, float(smooth)])
    return rows, oracle_rates, adjusted_rates


def run_level_power(config, n_jobs=1, progress=False):
    """
    Empirical level and power at q_{1-alpha} for the oracle scan (true
    parameters) and the adjusted scan (parameters estimated from the field).

    gaussian-level-power: level and power over the noise level sigma, block mean
    fixed at `amplitude`. poisson-level-power: power over the block intensity at
    background lambda0, level over the lambda0 grid.
    """
    if config.scenario not in (GAUSSIAN_LEVEL_POWER, POISSON_LEVEL_POWER):
        raise ConfigError(f"run_level_power needs a level/power scenario, got {config.scenario}")

    system = config_system(config)
    cal = config_calibration(config)
    table = _quantile_table(config, system, cal, config.sidedness, n_jobs, progress)
    eta = table.quantile(config.alpha)

    base = {
        'family': 'gaussian' if config.scenario == GAUSSIAN_LEVEL_POWER else 'poisson',
        'system': system,
        'cal': cal,
        'sidedness': config.sidedness,
        'eta': eta,
        'seed': config.seed,
        'block': anomaly_slices(config),
        'estimate_mean': config.estimate_mean,
    }

    if config.scenario == GAUSSIAN_LEVEL_POWER:
        level_rows, oracle_level, ams_level = _curve(config, base, 'level', 'sigma', config.grid,
                                                     STREAM_LEVEL, n_jobs, progress)
        power_rows, oracle_power, ams_power = _curve(config, base, 'power', 'sigma', config.grid,
                                                     STREAM_POWER, n_jobs, progress)
        power_increasing = False
    else:
        level_rows, oracle_level, ams_level = _curve(config, base, 'level', 'lambda0', config.level_grid,
                                                     STREAM_LEVEL, n_jobs, progress)
        power_rows, oracle_power, ams_power = _curve(config, base, 'power', 'lambda', config.grid,
                                                     STREAM_POWER, n_jobs, progress)
        power_increasing = True

    summary = {
        'eta': eta,
        'quantile_seed': table.key.seed,
        'max_level_oracle': max(oracle_level),
        'max_level_ams': max(ams_level),
        'max_power_gap': max(abs(o - a) for o, a in zip(oracle_power, ams_power)),
        'power_monotonicity_violation': monotonicity_violation(ams_power, increasing=power_increasing),
    }
    return level_rows + power_rows, summary


# ----------------------------------------------------------------------------
# Phantom
# ----------------------------------------------------------------------------

def make_phantom(config):
    """
    Poisson photon counts with background lambda0 and bright rectangular blocks.
    Returns (Field, truth mask).
    """
    rng = np.random.default_rng([config.seed, STREAM_PHANTOM])
    shape = (config.n,) * config.d
    intensity = np.full(shape, float(config.background))
    truth = np.zeros(shape, dtype=bool)
    for block in config.blocks:
        window = tuple(slice(t, t + h) for t, h in zip(block['offset'], block['size']))
        intensity[window] = float(block['intensity'])
        truth[window] = True
    counts = rng.poisson(intensity).astype(float)
    return make_field(counts, COUNTS), truth


def run_phantom(config, out_prefix):
    """Write the phantom as CSV (and PGM images of counts and truth for d <= 2)."""
    if config.d > 2:
        raise ConfigError("Phantom export supports d <= 2")
    phantom, truth = make_phantom(config)
    files = [f"{out_prefix}.csv", f"{out_prefix}.pgm", f"{out_prefix}_truth.pgm"]

    write_csv(phantom, files[0])
    write_pgm(phantom.data.astype(np.int64), files[1])
    write_mask(truth, files[2])

    summary = {
        'total_counts': int(phantom.data.sum()),
        'truth_pixels': int(truth.sum()),
        'files': files,
    }
    return summary


# ----------------------------------------------------------------------------
# Runner
# ----------------------------------------------------------------------------

def sha256_file(path):
    with open(path, 'rb') as f:
        return hashlib.sha256(f.read()).hexdigest()


def write_rows(path, header, rows):
    """CSV with floats written by repr so reruns are byte-identical."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _plain(value):
    """numpy scalars to built-ins so the manifest is plain YAML."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def run_experiment(config, out_prefix, n_jobs=1, progress=False):
    """
    Run the config's scenario, write <out_prefix>.csv and <out_prefix>_manifest.yaml,
    and return the summary.
    """
    if config.scenario == PHANTOM:
        summary = run_phantom(config, out_prefix)
    else:
        if config.scenario == PLUGIN_FAILURE:
            header, (rows, summary) = PLUGIN_COLUMNS, run_plugin_failure(config, n_jobs, progress)
        elif config.scenario == QUANTILE_TABLE:
            header, (rows, summary) = QUANTILE_COLUMNS, run_quantile_table(config, n_jobs, progress)
        else:
            header, (rows, summary) = LEVEL_POWER_COLUMNS, run_level_power(config, n_jobs, progress)
        write_rows(f"{out_prefix}.csv", header, rows)

    csv_path = f"{out_prefix}.csv"
    manifest = {
        'config': _plain(asdict(config)),
        'output': csv_path,
        'output_sha256': sha256_file(csv_path),
        'summary': _plain(summary),
    }
    write_yaml_file(f"{out_prefix}_manifest.yaml", manifest)
    return summary

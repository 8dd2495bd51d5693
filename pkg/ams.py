#!/usr/bin/env python3
"""
Adjusted Multiscale Scanning - command line.

Subcommands:
  scan      scan a grid for anomalies and export the significant regions
  quantile  simulate (or fetch from the store) critical values q_{1-alpha}
  simulate  run a simulation study (see experiments.py)
  validate  check a calibration's monotonicity and growth bounds

Defaults come from settings.yaml; command-line flags win over the file.
"""

import argparse
import hashlib
import math
import os
import re
import sys
import warnings

from calibration import (CALIBRATION_KINDS, build_calibration, gamma_exponent, min_scale_guard,
                         validate_growth)
from config import load_settings, load_yaml_file, write_yaml_file
from detect import segment, significance_map
from errors import AmsError, CacheWarning, ConfigError, DataError, ExportWarning, ScaleAdvisory
from experiments import SCENARIOS, load_experiment_config, run_experiment
from gridio import FORMATS, read_grid, write_mask, write_pgm, write_regions_csv
from localmeans import COUNTS
from models import (GAMMA, GAUSS_KNOWN, GAUSS_UNKNOWN, MODEL_KINDS, POISSON, build_model,
                    estimate_global, model_from_estimates)
from quantiles import cache_lookup_or_simulate, fresh_seed
from regions import PARITIES, build_rectangles, check_growth, restrict
from statistic import ONE_SIDED, TWO_SIDED, scan_statistic


SIDES_PATTERN = re.compile(r'^(\d+)(?:\.\.(\d+))?(?::(\w+))?$')


def parse_sides(text):
    """
    Parse a side-length range "a..b" or "a..b:even" (a single "a" means a..a).
    Returns (min_side, max_side, parity).
    """
    match = SIDES_PATTERN.match(text.strip())
    if not match:
        raise ConfigError(f"Cannot parse side range {text!r}; expected a..b or a..b:even")
    low = int(match.group(1))
    high = int(match.group(2) or low)
    parity = match.group(3) or 'all'
    if parity not in PARITIES:
        raise ConfigError(f"Unknown parity {parity!r} in {text!r}")
    return low, high, parity


def format_sides(min_side, max_side, parity):
    suffix = '' if parity == 'all' else f":{parity}"
    return f"{min_side}..{max_side}{suffix}"


def print_banner(title):
    print("=" * 60)
    print(title)
    print("=" * 60)


def show_warning(message, category, filename, lineno, file=None, line=None):
    """Print library warnings in the console style of the scripts."""
    print(f"⚠️  WARNING: {message}")


def sha256_file(path):
    with open(path, 'rb') as f:
        return hashlib.sha256(f.read()).hexdigest()


def _pick(flag, setting):
    return flag if flag is not None else setting


def _threads(args, settings):
    threads = _pick(args.threads, settings['runtime']['threads'])
    if threads == 0:
        raise ConfigError("--threads must be nonzero (use -1 for all cores)")
    return threads


def _progress(args, settings):
    return bool(settings['runtime']['progress']) and not args.no_progress


def _calibration_parameters(args, settings):
    section = settings['calibration']
    return {
        'calibration': _pick(args.calibration, section['kind']),
        'nu': float(_pick(args.nu, section['nu'])),
        'pwm_c': float(_pick(args.pwm_c, section['pwm_c'])),
        'pwm_cd': float(_pick(args.pwm_cd, section['pwm_cd'])),
        'unit_offset': float(_pick(args.unit_offset, section['unit_offset'])),
    }


def _side_parameters(args, settings):
    if args.sides:
        return parse_sides(args.sides)
    section = settings['regions']
    return int(section['min_side']), int(section['max_side']), section['parity']


def _calibration_from(params, d):
    return build_calibration(params['calibration'], d, nu=params['nu'], pwm_c=params['pwm_c'],
                             pwm_cd=params['pwm_cd'], unit_offset=params['unit_offset'])


def _system_from(n, d, params):
    system = build_rectangles(n, d, params['min_side'], params['max_side'], params['parity'])
    if params['min_card'] is not None or params['max_card'] is not None:
        low = params['min_card'] if params['min_card'] is not None else 1
        high = params['max_card'] if params['max_card'] is not None else n ** d
        system = restrict(system, low, high)
    return system


# ----------------------------------------------------------------------------
# scan
# ----------------------------------------------------------------------------

def resolve_scan_parameters(args, settings):
    """Every parameter of a scan run, flags over settings; this is what the manifest records."""
    if args.manifest:
        recorded = load_yaml_file(args.manifest).get('parameters')
        if not isinstance(recorded, dict):
            raise ConfigError(f"{args.manifest} has no 'parameters' section")
        params = dict(recorded)
        if args.out:
            params['out'] = args.out
        return params

    if not args.input:
        raise ConfigError("scan needs --input (or --manifest)")

    min_side, max_side, parity = _side_parameters(args, settings)
    params = {
        'input': args.input,
        'format': args.format,
        'dtype': args.dtype,
        'model': _pick(args.model, settings['model']['kind']),
        'baseline': _pick(args.baseline, settings['model']['baseline']),
        'nuisance': _pick(args.nuisance, settings['model']['nuisance']),
        'min_side': min_side,
        'max_side': max_side,
        'parity': parity,
        'min_card': _pick(args.min_card, settings['regions']['min_card']),
        'max_card': _pick(args.max_card, settings['regions']['max_card']),
        'alpha': float(_pick(args.alpha, settings['scan']['alpha'])),
        'one_sided': bool(args.one_sided or settings['scan']['one_sided']),
        'mc_runs': int(_pick(args.runs, settings['quantiles']['mc_runs'])),
        'seed': _pick(args.seed, settings['quantiles']['seed']),
        'quantile_store': _pick(args.quantile_store, settings['quantiles']['store']),
        'pixel_size': _pick(args.pixel_size, settings['scan']['pixel_size']),
        'pixel_unit': _pick(args.pixel_unit, settings['scan']['pixel_unit']),
        'out': args.out or os.path.splitext(os.path.basename(args.input))[0],
    }
    params.update(_calibration_parameters(args, settings))
    if params['seed'] is None:
        params['seed'] = fresh_seed()
    return params


def fit_model(kind, field, baseline, nuisance):
    """
    Known model when every parameter is given, otherwise the global estimates
    (given parameters are kept). Returns the ModelFamily.
    """
    needs_nuisance = kind in (GAUSS_KNOWN, GAUSS_UNKNOWN, GAMMA)
    if baseline is not None and (nuisance is not None or not needs_nuisance):
        return build_model(kind, baseline, nuisance if needs_nuisance else ())

    report = estimate_global(kind, field, known_theta=baseline, known_xi=nuisance)
    return model_from_estimates(kind, report)


def scan_system(params, n, d, estimated):
    """
    Region system for a scan. With estimated parameters the largest scale is
    capped at n^(d/2) unless max_card is given; a larger explicit cap only
    triggers an advisory.
    """
    params = dict(params)
    cap = math.floor(n ** (d / 2.0))
    if estimated and params['max_card'] is None:
        largest = params['max_side'] ** d
        if largest > cap:
            params['max_card'] = cap
            warnings.warn(f"estimated parameters: largest scale capped at n^(d/2) = {cap} pixels "
                          f"(pass --max-card to override)", ScaleAdvisory)
    elif estimated and params['max_card'] > cap:
        warnings.warn(f"max-card {params['max_card']} exceeds n^(d/2) = {cap}; with estimated "
                      f"parameters the largest scales must stay below this order for the "
                      f"critical values to hold", ScaleAdvisory)
    return _system_from(n, d, params)


def export_images(out, significance, segmentation, d):
    """Raster, segmentation and coverage PGMs; images need d <= 2."""
    if d > 2:
        warnings.warn(f"No PGM images for d={d}; only the region CSV is written", ExportWarning)
        return []
    files = [f"{out}_significance.pgm", f"{out}_segmentation.pgm", f"{out}_coverage.pgm"]
    write_pgm(significance.raster, files[0], bits=16)
    write_mask(segmentation.mask, files[1])
    write_mask(significance.coverage, files[2])
    return files


def _smallest_area(significance, segmentation):
    if segmentation.source_scale is None:
        return None
    return float(significance.physical_area(segmentation.source_scale))


def cmd_scan(args, settings):
    print_banner("AMS Scan")
    params = resolve_scan_parameters(args, settings)
    threads = _threads(args, settings)

    field = read_grid(params['input'], fmt=params['format'], dtype=params['dtype'])
    print(f"✓ Read {params['input']}: n={field.n}, d={field.d}, dtype={field.dtype}")
    if params['model'] == POISSON and field.dtype != COUNTS:
        raise DataError("poisson model needs a count field (nonnegative integers)")

    model = fit_model(params['model'], field, params['baseline'], params['nuisance'])
    estimated = model.provenance == 'estimated'
    print(f"✓ Model {model.kind}: theta0={model.theta0}, xi={model.xi} ({model.provenance})")

    system = scan_system(params, field.n, field.d, estimated)
    growth = check_growth(system)
    smallest = min(system.cardinalities())
    print(f"✓ Region system: {growth.n_scales} scales, {growth.total_regions:,} regions, "
          f"cardinalities {smallest}..{max(system.cardinalities())}")

    cal = _calibration_from(params, field.d)
    if estimated:
        guard = min_scale_guard(cal, field.n, smallest)
        if guard.warn:
            warnings.warn(guard.message, ScaleAdvisory)

    sidedness = ONE_SIDED if params['one_sided'] else TWO_SIDED
    result = scan_statistic(field, system, model, cal, sidedness=sidedness, workers=threads)
    print(f"✓ T_n = {result.t_n:.4f} ({sidedness}, calibration {cal.kind})")

    print(f"\nFetching critical values ({params['mc_runs']} runs, seed {params['seed']})...")
    table = cache_lookup_or_simulate(params['quantile_store'], system, cal, sidedness=sidedness,
                                     mc_runs=params['mc_runs'], seed=params['seed'],
                                     alphas=(params['alpha'],), n_jobs=threads,
                                     progress=_progress(args, settings))
    print(f"✓ Quantile table ({table.source})")

    significance = significance_map(result, table, params['alpha'], pixel_size=params['pixel_size'],
                                    pixel_unit=params['pixel_unit'])
    segmentation = segment(significance)

    out = params['out']
    out_dir = os.path.dirname(out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    regions_file = f"{out}_regions.csv"
    write_regions_csv(significance.regions, field.d, regions_file, pixel_size=significance.pixel_size,
                      pixel_unit=significance.pixel_unit)
    outputs = [regions_file] + export_images(out, significance, segmentation, field.d)

    manifest = {
        'parameters': params,
        'input_sha256': sha256_file(params['input']),
        'model': {'kind': model.kind, 'theta0': list(model.theta0), 'xi': list(model.xi),
                  'provenance': model.provenance},
        'sidedness': sidedness,
        'n_scales': growth.n_scales,
        'n_regions': growth.total_regions,
        't_n': float(result.t_n),
        'eta': float(significance.eta),
        'quantile': float(table.quantile(params['alpha'])),
        'n_significant': len(significance.regions),
        'smallest_significant_scale': segmentation.source_scale,
        'smallest_significant_area': _smallest_area(significance, segmentation),
        'area_unit': significance.area_unit,
        'outputs': outputs,
    }
    write_yaml_file(f"{out}_manifest.yaml", manifest)

    print("\n" + "=" * 60)
    print("SUMMARY")
    print("=" * 60)
    print(f"alpha:                {params['alpha']}")
    print(f"q_(1-alpha):          {significance.eta:.4f}")
    print(f"T_n:                  {result.t_n:.4f}")
    print(f"Significant regions:  {len(significance.regions):,}")
    if segmentation.source_scale is not None:
        print(f"Smallest scale:       {segmentation.source_scale} px")
        if significance.pixel_size is not None:
            print(f"Smallest area:        {_smallest_area(significance, segmentation):g} {significance.area_unit}")
    print(f"Outputs:              {', '.join(outputs)}")
    print(f"Manifest:             {out}_manifest.yaml")
    return 0


# ----------------------------------------------------------------------------
# quantile
# ----------------------------------------------------------------------------

def cmd_quantile(args, settings):
    print_banner("AMS Quantiles")
    if args.n is None:
        raise ConfigError("quantile needs --n")
    min_side, max_side, parity = _side_parameters(args, settings)
    params = {
        'min_side': min_side,
        'max_side': max_side,
        'parity': parity,
        'min_card': _pick(args.min_card, settings['regions']['min_card']),
        'max_card': _pick(args.max_card, settings['regions']['max_card']),
    }
    params.update(_calibration_parameters(args, settings))

    system = _system_from(args.n, args.d, params)
    cal = _calibration_from(params, args.d)
    sidedness = ONE_SIDED if args.one_sided else TWO_SIDED
    mc_runs = int(_pick(args.runs, settings['quantiles']['mc_runs']))
    seed = _pick(args.seed, settings['quantiles']['seed'])
    seed = fresh_seed() if seed is None else int(seed)
    alphas = tuple(args.alpha_list or settings['quantiles']['alphas'])
    store = _pick(args.quantile_store, settings['quantiles']['store'])

    print(f"✓ n={args.n}, d={args.d}, sides {format_sides(min_side, max_side, parity)}, "
          f"{len(system)} scales, calibration {cal.kind}, {sidedness}")
    print(f"Simulating {mc_runs} runs with seed {seed}...")
    table = cache_lookup_or_simulate(store, system, cal, sidedness=sidedness, mc_runs=mc_runs,
                                     seed=seed, alphas=alphas, n_jobs=_threads(args, settings),
                                     progress=_progress(args, settings))
    print(f"✓ Quantile table ({table.source}) stored in {store}")

    print("\n" + "=" * 60)
    print("QUANTILES")
    print("=" * 60)
    for alpha in sorted(alphas, reverse=True):
        print(f"  alpha={alpha:<6g} q_{1 - alpha:.3g} = {table.quantile(alpha):.4f}")
    return 0


# ----------------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------------

def cmd_simulate(args, settings):
    print_banner("AMS Simulation")
    overrides = {
        'scenario': args.scenario,
        'seed': args.seed,
        'replicates': args.replicates,
        'mc_runs': args.runs,
    }
    config = load_experiment_config(args.config, overrides=overrides, defaults=settings['experiments'])
    out = args.out or config.scenario
    out_dir = os.path.dirname(out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    print(f"✓ Scenario {config.scenario}: n={config.n}, d={config.d}, seed={config.seed}")
    summary = run_experiment(config, out, n_jobs=_threads(args, settings),
                             progress=_progress(args, settings))

    print("\n" + "=" * 60)
    print("SUMMARY")
    print("=" * 60)
    for key, value in summary.items():
        print(f"{key + ':':<30}{value}")
    print(f"Output:   {out}.csv")
    print(f"Manifest: {out}_manifest.yaml")
    return 0


# ----------------------------------------------------------------------------
# validate
# ----------------------------------------------------------------------------

def cmd_validate(args, settings):
    print_banner("AMS Calibration Check")
    params = _calibration_parameters(args, settings)
    cal = _calibration_from(params, args.d)
    n = args.n if args.n is not None else 128

    report = validate_growth(cal, n)
    print(f"Calibration: {cal.describe()}")
    print(f"Exponents:   {report.exponents}")
    print(f"C_omega = {report.c_omega:.4g}, C_omega_tilde = {report.c_omega_tilde:.4g}")
    print(f"gamma = {gamma_exponent(cal):g}")
    for note in report.notes:
        print(f"  - {note}")

    if args.min_card is not None:
        guard = min_scale_guard(cal, n, args.min_card)
        if guard.warn:
            warnings.warn(guard.message, ScaleAdvisory)
        else:
            print(f"✓ {guard.message}")

    if not report.passed:
        raise ConfigError(f"Calibration {cal.kind} fails the growth conditions")
    print(f"✓ Calibration {cal.kind} is monotone and satisfies its growth bounds on n={n}")
    return 0


# ----------------------------------------------------------------------------
# Parser and entry point
# ----------------------------------------------------------------------------

def _add_calibration_flags(parser):
    parser.add_argument('--calibration', choices=CALIBRATION_KINDS)
    parser.add_argument('--nu', type=float)
    parser.add_argument('--pwm-c', type=float)
    parser.add_argument('--pwm-cd', type=float)
    parser.add_argument('--unit-offset', type=float)


def _add_region_flags(parser):
    parser.add_argument('--sides', help='side lengths a..b, optionally a..b:even')
    parser.add_argument('--min-card', type=int)
    parser.add_argument('--max-card', type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog='ams.py', description='Adjusted multiscale scanning')
    parser.add_argument('--settings', help='settings file (default: settings.yaml or $AMS_SETTINGS)')
    parser.add_argument('--threads', type=int, help='worker count (-1 = all cores)')
    parser.add_argument('--no-progress', action='store_true', help='hide progress bars')
    commands = parser.add_subparsers(dest='command', required=True)

    scan = commands.add_parser('scan', help='scan a grid for anomalies')
    scan.add_argument('--input')
    scan.add_argument('--format', choices=FORMATS)
    scan.add_argument('--dtype', choices=('counts', 'reals'))
    scan.add_argument('--model', choices=MODEL_KINDS)
    scan.add_argument('--baseline', type=float)
    scan.add_argument('--nuisance', type=float)
    _add_region_flags(scan)
    _add_calibration_flags(scan)
    scan.add_argument('--alpha', type=float)
    scan.add_argument('--one-sided', action='store_true')
    scan.add_argument('--runs', type=int, help='Monte-Carlo runs for the critical value')
    scan.add_argument('--seed', type=int)
    scan.add_argument('--quantile-store')
    scan.add_argument('--pixel-size', type=float)
    scan.add_argument('--pixel-unit')
    scan.add_argument('--out', help='output prefix')
    scan.add_argument('--manifest', help='re-run with the parameters recorded in a manifest')
    scan.set_defaults(handler=cmd_scan)

    quantile = commands.add_parser('quantile', help='simulate critical values')
    quantile.add_argument('--n', type=int)
    quantile.add_argument('--d', type=int, default=2)
    _add_region_flags(quantile)
    _add_calibration_flags(quantile)
    quantile.add_argument('--one-sided', action='store_true')
    quantile.add_argument('--runs', type=int)
    quantile.add_argument('--seed', type=int)
    quantile.add_argument('--alpha-list', type=float, nargs='+')
    quantile.add_argument('--quantile-store')
    quantile.set_defaults(handler=cmd_quantile)

    simulate = commands.add_parser('simulate', help='run a simulation study')
    simulate.add_argument('--scenario', choices=SCENARIOS)
    simulate.add_argument('--config', help='experiment YAML file')
    simulate.add_argument('--seed', type=int)
    simulate.add_argument('--replicates', type=int)
    simulate.add_argument('--runs', type=int)
    simulate.add_argument('--out', help='output prefix')
    simulate.set_defaults(handler=cmd_simulate)

    validate = commands.add_parser('validate', help='check a calibration')
    validate.add_argument('--n', type=int)
    validate.add_argument('--d', type=int, default=2)
    validate.add_argument('--min-card', type=int, help='smallest scale to check against log(n)^gamma')
    _add_calibration_flags(validate)
    validate.set_defaults(handler=cmd_validate)

    return parser


def main(argv=None):
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            for category in (ScaleAdvisory, CacheWarning, ExportWarning):
                warnings.simplefilter('always', category)
            warnings.showwarning = show_warning
            settings = load_settings(args.settings)
            return args.handler(args, settings)
    except AmsError as e:
        print(f"✗ {e}", file=sys.stderr)
        print(f"error_category={e.category}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        print(f"✗ Unexpected error: {e}", file=sys.stderr)
        print("error_category=internal", file=sys.stderr)
        return AmsError.exit_code


if __name__ == '__main__':
    sys.exit(main())

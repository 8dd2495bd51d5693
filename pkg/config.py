"""
Settings loader.
Every script reads its defaults from settings.yaml; values missing from the file
fall back to the built-in defaults below. Environment variables (or a .env file)
can point at another settings file, quantile store or worker count.
"""

import copy
import os

import yaml
from dotenv import load_dotenv

from errors import ConfigError


DEFAULT_SETTINGS_PATH = 'settings.yaml'

DEFAULT_SETTINGS = {
    'regions': {
        'min_side': 4,
        'max_side': 14,
        'parity': 'even',
        'min_card': None,
        'max_card': None,
    },
    'model': {
        'kind': 'poisson',
        'baseline': None,
        'nuisance': None,
    },
    'calibration': {
        'kind': 'dw',
        'nu': 1.0,
        'pwm_c': 2.0,
        'pwm_cd': 1.0,
        'unit_offset': 0.0,
    },
    'scan': {
        'alpha': 0.1,
        'one_sided': False,
        'pixel_size': None,
        'pixel_unit': 'px',
    },
    'quantiles': {
        'store': 'quantile_store',
        'mc_runs': 2000,
        'seed': None,
        'alphas': [0.2, 0.1, 0.05, 0.025, 0.01],
    },
    'runtime': {
        'threads': 1,
        'progress': True,
    },
    'experiments': {},
}


def merge_settings(defaults, overrides):
    """
    Recursively merge two settings dictionaries.
    Values in overrides win; nested sections are merged key by key.
    """
    merged = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_settings(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_settings(path=None):
    """
    Load configuration from a settings file merged over the defaults.

    The path is taken from the argument, then the AMS_SETTINGS environment
    variable, then settings.yaml in the current directory. A missing file is
    not an error; a malformed one is.
    """
    load_dotenv()
    path = path or os.getenv('AMS_SETTINGS') or DEFAULT_SETTINGS_PATH

    file_settings = {}
    if os.path.exists(path):
        try:
            with open(path, 'r') as f:
                file_settings = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Could not parse settings file {path}: {e}")
        if not isinstance(file_settings, dict):
            raise ConfigError(f"Settings file {path} must contain a mapping")

    settings = merge_settings(DEFAULT_SETTINGS, file_settings)

    # Environment overrides
    store = os.getenv('AMS_QUANTILE_STORE')
    if store:
        settings['quantiles']['store'] = store

    threads = os.getenv('AMS_THREADS')
    if threads:
        try:
            settings['runtime']['threads'] = int(threads)
        except ValueError:
            raise ConfigError(f"AMS_THREADS must be an integer, got {threads!r}")

    return settings


def load_yaml_file(path):
    """Read a YAML mapping from disk (used for experiment configs and manifests)."""
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"Could not read {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"Could not parse {path}: {e}")

    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return data


def write_yaml_file(path, data):
    """Write a mapping as YAML with a stable key order."""
    with open(path, 'w') as f:
        yaml.safe_dump(data, f, sort_keys=True, default_flow_style=False)

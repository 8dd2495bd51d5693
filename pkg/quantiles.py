"""
Monte-Carlo critical values.

simulate_mn draws the surrogate statistic M_n for mc_runs standard-normal
fields and keeps the sorted draws. Tables are cached in a SQLite store so a
configuration is only simulated once.

Replicate r always uses the generator seeded with (seed, r), so the draws do
not depend on how replicates are split over workers.
"""

import hashlib
import json
import math
import os
import sqlite3
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from calibration import calibration_digest
from errors import CacheCorrupt, CacheWarning, ConfigError, DomainError, StoreError
from localmeans import make_field
from statistic import TWO_SIDED, surrogate_statistic


DEFAULT_ALPHAS = (0.2, 0.1, 0.05, 0.025, 0.01)
DEFAULT_MC_RUNS = 2000

STORE_FILENAME = 'quantiles.db'
FORMAT_VERSION = 1

# absorbs binary rounding in p * N before taking the ceiling
QUANTILE_FUZZ = 1e-9


@dataclass(frozen=True)
class QuantileKey:
    n: int
    d: int
    system_digest: str
    calibration_digest: str
    sidedness: str
    mc_runs: int
    seed: int

    def digest(self):
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class QuantileTable:
    key: QuantileKey
    samples: np.ndarray
    quantiles: dict = field(default_factory=dict)  # alpha -> q_{1-alpha}
    source: str = 'simulated'  # 'simulated' or 'cache'

    def quantile(self, alpha):
        """q_{1-alpha}, from the precomputed map or straight from the samples."""
        if alpha in self.quantiles:
            return self.quantiles[alpha]
        return empirical_quantile(self.samples, 1.0 - alpha)


@dataclass(frozen=True)
class StoreEntry:
    key_digest: str
    key: dict
    mc_runs: int
    created_at: str
    status: str  # 'ok', 'corrupt' or 'outdated'


def system_digest(system):
    """sha256 over the content of a region system (not its identity)."""
    payload = {
        'n': system.n,
        'd': system.d,
        'scales': [list(h) for h in system.scales],
        'bounds': list(system.scale_bounds),
        'parity': system.parity,
        'shape': system.shape,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def quantile_key(system, cal, sidedness, mc_runs, seed):
    return QuantileKey(
        n=system.n,
        d=system.d,
        system_digest=system_digest(system),
        calibration_digest=calibration_digest(cal),
        sidedness=sidedness,
        mc_runs=int(mc_runs),
        seed=int(seed),
    )


def fresh_seed():
    """A new entropy seed; callers record it so the run can be replayed."""
    return int(np.random.SeedSequence().entropy)


def empirical_quantile(samples, p):
    """
    Order-statistic quantile: the ceil(p * N)-th smallest sample (1-based),
    clamped to [1, N]. Never interpolates.
    """
    if not 0 < p < 1:
        raise DomainError(f"Quantile level must lie in (0, 1), got {p}")
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise DomainError("Cannot take a quantile of an empty sample")

    count = samples.size
    index = math.ceil(p * count - QUANTILE_FUZZ)
    index = min(max(index, 1), count)
    return float(samples[index - 1])


def _replicate_chunk(worker, indices, args):
    return [worker(int(r), *args) for r in indices]


def run_replicates(worker, runs, args=(), n_jobs=1, progress=False, desc='Replicates'):
    """
    Evaluate worker(r, *args) for r = 0..runs-1 and return the results in replicate order.
    With n_jobs != 1 the index range is split into chunks handed to a joblib pool.
    """
    if runs < 1:
        raise ConfigError(f"Need at least one replicate, got {runs}")

    indices = np.arange(runs)
    if n_jobs == 1:
        return [worker(int(r), *args) for r in tqdm(indices, desc=desc, disable=not progress)]

    workers = (os.cpu_count() or 1) if n_jobs < 0 else n_jobs
    chunks = np.array_split(indices, min(runs, 4 * workers))
    results = Parallel(n_jobs=n_jobs)(
        delayed(_replicate_chunk)(worker, chunk, args)
        for chunk in tqdm(chunks, desc=desc, disable=not progress)
    )
    return [value for chunk in results for value in chunk]


def _surrogate_replicate(r, system, cal, sidedness, seed):
    rng = np.random.default_rng([seed, r])
    noise = make_field(rng.standard_normal((system.n,) * system.d))
    return surrogate_statistic(noise, system, cal, sidedness=sidedness, workers=1)


def _quantile_map(samples, alphas):
    return {float(a): empirical_quantile(samples, 1.0 - a) for a in alphas}


def simulate_mn(system, cal, sidedness=TWO_SIDED, mc_runs=DEFAULT_MC_RUNS, seed=None,
                alphas=DEFAULT_ALPHAS, n_jobs=1, progress=False):
    """
    Simulate mc_runs draws of M_n for the system and calibration.

    Returns a QuantileTable with the sorted draws and q_{1-alpha} for the
    default levels plus any extra alphas. seed=None draws a fresh seed, which
    is recorded in the table key.
    """
    if mc_runs < 1:
        raise ConfigError(f"mc_runs must be >= 1, got {mc_runs}")
    seed = fresh_seed() if seed is None else int(seed)

    draws = run_replicates(
        _surrogate_replicate, mc_runs,
        args=(system, cal, sidedness, seed),
        n_jobs=n_jobs, progress=progress, desc='Simulating M_n',
    )
    samples = np.sort(np.asarray(draws, dtype=float))
    samples.flags.writeable = False

    levels = sorted(set(DEFAULT_ALPHAS) | {float(a) for a in alphas}, reverse=True)
    return QuantileTable(
        key=quantile_key(system, cal, sidedness, mc_runs, seed),
        samples=samples,
        quantiles=_quantile_map(samples, levels),
        source='simulated',
    )


# ----------------------------------------------------------------------------
# Quantile store
# ----------------------------------------------------------------------------

def store_path(store_dir):
    return os.path.join(store_dir, STORE_FILENAME)


def open_store(store_dir):
    """
    Open (and create if needed) the quantile store in store_dir.

    Table structure:
    - key_digest: sha256 of the key fields (primary key)
    - format_version: layout version of the row
    - key_json: the key fields as JSON
    - samples_json: sorted M_n draws as a JSON array
    - checksum: sha256 of samples_json
    - created_at: when the table was simulated
    """
    try:
        os.makedirs(store_dir, exist_ok=True)
        conn = sqlite3.connect(store_path(store_dir))
        conn.execute('''
            CREATE TABLE IF NOT EXISTS quantile_tables (
                key_digest TEXT PRIMARY KEY,
                format_version INTEGER NOT NULL,
                key_json TEXT NOT NULL,
                samples_json TEXT NOT NULL,
                checksum TEXT NOT NULL,
                created_at TEXT NOT NULL
            )
        ''')
        conn.commit()
    except (OSError, sqlite3.Error) as e:
        raise StoreError(f"Could not open quantile store {store_dir}: {e}")
    return conn


def _checksum(text):
    return hashlib.sha256(text.encode()).hexdigest()


def _row_status(format_version, samples_json, checksum):
    if format_version != FORMAT_VERSION:
        return 'outdated'
    if _checksum(samples_json) != checksum:
        return 'corrupt'
    return 'ok'


def save_table(conn, table):
    """Insert or replace a table; the commit is atomic."""
    samples_json = json.dumps([float(v) for v in table.samples])
    try:
        with conn:
            conn.execute('''
                INSERT OR REPLACE INTO quantile_tables
                (key_digest, format_version, key_json, samples_json, checksum, created_at)
                VALUES (?, ?, ?, ?, ?, ?)
            ''', (
                table.key.digest(),
                FORMAT_VERSION,
                json.dumps(asdict(table.key), sort_keys=True),
                samples_json,
                _checksum(samples_json),
                datetime.now().isoformat(),
            ))
    except sqlite3.Error as e:
        raise StoreError(f"Could not write quantile table: {e}")


def load_table(conn, key, alphas=DEFAULT_ALPHAS):
    """
    Return the stored table for key, or None when there is none.
    Raises CacheCorrupt when the row fails its format or checksum check.
    """
    try:
        row = conn.execute('''
            SELECT format_version, samples_json, checksum
            FROM quantile_tables
            WHERE key_digest = ?
        ''', (key.digest(),)).fetchone()
    except sqlite3.Error as e:
        raise StoreError(f"Could not read quantile store: {e}")

    if row is None:
        return None

    format_version, samples_json, checksum = row
    status = _row_status(format_version, samples_json, checksum)
    if status != 'ok':
        raise CacheCorrupt(f"Stored table {key.digest()[:12]} is {status}")

    try:
        samples = np.asarray(json.loads(samples_json), dtype=float)
    except (ValueError, TypeError) as e:
        raise CacheCorrupt(f"Stored samples are unreadable: {e}")
    if samples.size != key.mc_runs:
        raise CacheCorrupt(f"Stored table has {samples.size} samples, expected {key.mc_runs}")
    samples.flags.writeable = False

    levels = sorted(set(DEFAULT_ALPHAS) | {float(a) for a in alphas}, reverse=True)
    return QuantileTable(key=key, samples=samples, quantiles=_quantile_map(samples, levels), source='cache')


def cache_lookup_or_simulate(store_dir, system, cal, sidedness=TWO_SIDED, mc_runs=DEFAULT_MC_RUNS,
                             seed=None, alphas=DEFAULT_ALPHAS, n_jobs=1, progress=False):
    """
    Return the cached table for this exact configuration (including seed and
    mc_runs), simulating and storing it on a miss. A corrupt or outdated row
    is replaced after a CacheWarning.
    """
    seed = fresh_seed() if seed is None else int(seed)
    key = quantile_key(system, cal, sidedness, mc_runs, seed)

    conn = open_store(store_dir)
    try:
        try:
            table = load_table(conn, key, alphas)
        except CacheCorrupt as e:
            warnings.warn(f"{e}; re-simulating", CacheWarning)
            table = None

        if table is None:
            table = simulate_mn(system, cal, sidedness=sidedness, mc_runs=mc_runs, seed=seed,
                                alphas=alphas, n_jobs=n_jobs, progress=progress)
            save_table(conn, table)
        return table
    finally:
        conn.close()


def list_entries(conn):
    """All rows of the store with their status, oldest first."""
    try:
        rows = conn.execute('''
            SELECT key_digest, format_version, key_json, samples_json, checksum, created_at
            FROM quantile_tables
            ORDER BY created_at
        ''').fetchall()
    except sqlite3.Error as e:
        raise StoreError(f"Could not read quantile store: {e}")

    entries = []
    for key_digest, format_version, key_json, samples_json, checksum, created_at in rows:
        try:
            key = json.loads(key_json)
        except ValueError:
            key = {}
        entries.append(StoreEntry(
            key_digest=key_digest,
            key=key,
            mc_runs=int(key.get('mc_runs', 0)),
            created_at=created_at,
            status=_row_status(format_version, samples_json, checksum),
        ))
    return entries


def delete_entries(conn, key_digests):
    """Delete rows by key digest; returns the number removed."""
    with conn:
        cursor = conn.executemany('DELETE FROM quantile_tables WHERE key_digest = ?',
                                  [(k,) for k in key_digests])
    return cursor.rowcount

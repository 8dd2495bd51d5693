#!/usr/bin/env python3
"""
Utility: Clean Up the Quantile Store
Lists the cached quantile tables and removes rows that fail their checksum
or were written by an older store format. Those tables are re-simulated the
next time they are needed.

Usage:
  python cleanup_cache.py            # report, then ask before deleting
  python cleanup_cache.py --yes      # delete without asking
  python cleanup_cache.py --stats    # report only
"""

import argparse
import os

from config import load_settings
from quantiles import delete_entries, list_entries, open_store, store_path


def summarize(entries):
    """Count entries per status."""
    counts = {}
    for entry in entries:
        counts[entry.status] = counts.get(entry.status, 0) + 1
    return counts


def describe(entry):
    key = entry.key
    return (f"[{entry.status}] {entry.key_digest[:12]} n={key.get('n')} d={key.get('d')} "
            f"{key.get('sidedness')} runs={entry.mc_runs} seed={key.get('seed')} ({entry.created_at})")


def main(argv=None):
    """Main execution function."""
    parser = argparse.ArgumentParser(description='Report and clean the quantile store')
    parser.add_argument('--store', help='store directory (default from settings.yaml)')
    parser.add_argument('--yes', action='store_true', help='delete without asking')
    parser.add_argument('--stats', action='store_true', help='only print entry counts')
    args = parser.parse_args(argv)

    print("=" * 60)
    print("Clean Up Quantile Store Utility")
    print("=" * 60)

    settings = load_settings()
    store_dir = args.store or settings['quantiles']['store']
    if not os.path.exists(store_path(store_dir)):
        print(f"✓ No quantile store at {store_dir}, nothing to do")
        return 0

    conn = open_store(store_dir)
    print(f"✓ Connected to store: {store_path(store_dir)}")

    entries = list_entries(conn)
    counts = summarize(entries)
    print(f"\nFound {len(entries)} tables:")
    for status in ('ok', 'corrupt', 'outdated'):
        print(f"  - {status}: {counts.get(status, 0)}")

    if args.stats:
        conn.close()
        return 0

    broken = [entry for entry in entries if entry.status != 'ok']
    if not broken:
        print("✓ No corrupt or outdated tables found!")
        conn.close()
        return 0

    print("\nExamples:")
    for entry in broken[:5]:
        print(f"  {describe(entry)}")

    if not args.yes:
        print("\n" + "=" * 60)
        response = input("Delete these tables? [y/N]: ")
        if response.lower() != 'y':
            print("Cancelled.")
            conn.close()
            return 0

    removed = delete_entries(conn, [entry.key_digest for entry in broken])
    print(f"\n✓ Deleted {removed} tables")
    print("They will be re-simulated on the next 'make quantiles' or 'make scan'")

    conn.close()
    return 0


if __name__ == '__main__':
    raise SystemExit(main())

"""Append-only, resumable record tables."""

from __future__ import annotations

import csv
import hashlib
import json
import os

import numpy as np


def point_key(config_digest, coords):
    """Checksum identifying one grid point of one configuration."""
    blob = json.dumps({"config": config_digest, "coords": coords}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:32]


def point_seed(seed, coords):
    """Per-point seed independent of grid order and worker count."""
    digest = hashlib.sha256(json.dumps(coords, sort_keys=True).encode()).digest()
    entropy = [int(seed), int.from_bytes(digest[:8], "little")]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0] >> 1)


class RecordStore:
    """JSON-lines ledger keyed by :func:`point_key`.

    Only the owning process appends; a rerun loads completed points and
    skips them.  ``path=None`` keeps records in memory only.
    """

    def __init__(self, path=None):
        self.path = path
        self._records = {}
        if path is not None and os.path.exists(path):
            with open(path) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        continue  # torn final line from an interrupted run
                    self._records[rec["key"]] = rec

    def __contains__(self, key):
        return key in self._records

    def __len__(self):
        return len(self._records)

    def get(self, key):
        return self._records.get(key)

    def put(self, record):
        self._records[record["key"]] = record
        if self.path is not None:
            os.makedirs(os.path.dirname(os.path.abspath(self.path)), exist_ok=True)
            with open(self.path, "a") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
                fh.flush()


def write_table(path, records, columns):
    """Flat CSV with the given columns, in the order given."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rec in records:
            writer.writerow([_fmt(rec.get(c)) for c in columns])
    return path


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.12g}"
    return "" if value is None else value


def write_json(path, data):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path

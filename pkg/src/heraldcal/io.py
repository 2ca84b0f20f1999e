"""File formats: time-tag CSV, counts JSON, sweep CSV, fit reports.

All writers are deterministic: integer columns are written as plain
ints, floats with shortest round-trip repr, JSON with sorted keys.
Identical inputs therefore produce byte-identical files, which is what
the reproducibility checks compare.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .coincidence import CoincCounts
from .errors import ConfigError
from .estimation import SweepPoint

TAG_HEADER = ["channel", "timestamp_ps"]
SWEEP_HEADER = ["direction", "pump_dac", "duration_s", "c1", "c2", "c12_raw", "c12_acc"]
COUNTS_KEYS = ("singles_1", "singles_2", "raw", "accidentals", "effective", "cw", "delay")


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_tags(path, streams):
    """Merge streams into one CSV ordered by (timestamp, channel)."""
    chans = []
    times = []
    for s in streams:
        chans.append(np.full(len(s.tags), s.channel_id, dtype=np.int64))
        times.append(s.tags)
    ch = np.concatenate(chans) if chans else np.empty(0, dtype=np.int64)
    ts = np.concatenate(times) if times else np.empty(0, dtype=np.int64)
    order = np.lexsort((ch, ts))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TAG_HEADER) + "\n")
        fh.writelines(f"{int(c)},{int(t)}\n" for c, t in zip(ch[order], ts[order]))


def read_tags(path):
    """Tag CSV back to {channel_id: int64 timestamp array}."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TAG_HEADER:
            raise ConfigError(f"{path}: expected header {TAG_HEADER}, got {header}")
        by_channel = {}
        for row in reader:
            by_channel.setdefault(int(row[0]), []).append(int(row[1]))
    return {c: np.array(v, dtype=np.int64) for c, v in sorted(by_channel.items())}


def write_counts(path, counts):
    payload = {
        "singles_1": counts.singles_1,
        "singles_2": counts.singles_2,
        "raw": counts.raw_coinc,
        "accidentals": counts.accidentals,
        "effective": counts.effective_coinc,
        "cw": counts.window_cw_s,
        "delay": counts.rel_delay_s,
    }
    write_json(path, payload)


def read_counts(path):
    with open(path) as fh:
        payload = json.load(fh)
    if set(payload) != set(COUNTS_KEYS):
        raise ConfigError(f"{path}: counts keys {sorted(payload)} do not match")
    return CoincCounts(
        singles_1=payload["singles_1"],
        singles_2=payload["singles_2"],
        raw_coinc=payload["raw"],
        accidentals=payload["accidentals"],
        effective_coinc=payload["effective"],
        window_cw_s=payload["cw"],
        rel_delay_s=payload["delay"],
    )


def write_sweep(path, points):
    """Two rows per pump point, one per conditioning direction."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for p in sorted(points, key=lambda q: q.pump_dac):
            for direction, c in (("12", p.counts_12), ("21", p.counts_21)):
                writer.writerow([
                    direction,
                    _fmt(p.pump_dac),
                    _fmt(p.duration_s),
                    c.singles_1,
                    c.singles_2,
                    c.raw_coinc,
                    c.accidentals,
                ])


def read_sweep(path, window_cw_s=30e-9, rel_delay_s=10e-9):
    """Sweep CSV back to SweepPoint objects.

    The CSV carries no electronics settings, so the window and delay
    stored on the reconstructed counts come from the arguments.
    """
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SWEEP_HEADER:
            raise ConfigError(f"{path}: expected header {SWEEP_HEADER}, got {header}")
        for direction, dac, dur, c1, c2, raw, acc in reader:
            raw, acc = int(raw), int(acc)
            counts = CoincCounts(
                singles_1=int(c1),
                singles_2=int(c2),
                raw_coinc=raw,
                accidentals=acc,
                effective_coinc=raw - acc,
                window_cw_s=window_cw_s,
                rel_delay_s=rel_delay_s,
            )
            rows.setdefault((float(dac), float(dur)), {})[direction] = counts
    points = []
    for (dac, dur), both in sorted(rows.items()):
        if set(both) != {"12", "21"}:
            raise ConfigError(f"{path}: pump {dac} lacks one conditioning direction")
        points.append(SweepPoint(dac, dur, both["12"], both["21"]))
    return points


def write_histogram(path, lags, counts):
    _write_columns(path, ["lag_cycles", "count"], zip(lags, counts))


def read_histogram(path):
    data = _read_columns(path, ["lag_cycles", "count"])
    return data[:, 0].astype(np.int64), data[:, 1].astype(np.int64)


def write_scan(path, scan):
    """(n, 2) array of (cw_s, accidental count) from a window scan."""
    scan = np.asarray(scan)
    _write_columns(path, ["cw_s", "accidentals"], scan)


def read_scan(path):
    return _read_columns(path, ["cw_s", "accidentals"])


def write_curve(path, header, columns):
    """Generic plot-data CSV: columns is a sequence of equal-length arrays."""
    rows = zip(*[np.asarray(c) for c in columns])
    _write_columns(path, list(header), rows)


BUDGET_HEADER = ["component", "value", "sigma", "relative"]


def write_budget(path, budget):
    """Uncertainty budget table, one (value, sigma) component per row."""
    rows = [(name, value, sigma, abs(sigma / value))
            for name, value, sigma in budget.components]
    _write_columns(path, BUDGET_HEADER, rows)


def read_budget(path):
    """Budget CSV back to (name, value, sigma) triples.

    The derived relative column is dropped; feed the triples to
    combine_budget to rebuild the full object.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != BUDGET_HEADER:
            raise ConfigError(f"{path}: expected header {BUDGET_HEADER}, got {header}")
        return [(row[0], float(row[1]), float(row[2])) for row in reader]


def write_report(path, fit, config_hash, seed):
    """Fit result as JSON, stamped with the config hash and seed."""
    payload = {
        "config_hash": config_hash,
        "seed": seed,
        "mu": fit.mu,
        "eta_tot_1": fit.eta_tot_1,
        "sigma_eta_1": fit.sigma_eta_1,
        "eta_tot_2": fit.eta_tot_2,
        "sigma_eta_2": fit.sigma_eta_2,
        "k_factor": fit.k_factor,
        "condition_number": fit.condition_number,
        "ill_conditioned": fit.ill_conditioned,
        "n_points": int(fit.r_values.size),
        "n_evaluations": fit.n_evaluations,
        "residual_normality_p": fit.residual_normality_p,
        "r_values": [float(r) for r in fit.r_values],
        "per_point_sigma_1": [float(s) for s in fit.per_point_sigma_1],
        "per_point_sigma_2": [float(s) for s in fit.per_point_sigma_2],
        "covariance": [[float(v) for v in row] for row in fit.covariance],
        "residuals": [[float(v) for v in row] for row in fit.residuals],
    }
    write_json(path, payload)


def read_report(path):
    with open(path) as fh:
        return json.load(fh)


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_columns(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _read_columns(path, expected_header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected_header:
            raise ConfigError(
                f"{path}: expected header {expected_header}, got {header}"
            )
        rows = [[float(v) for v in row] for row in reader]
    return np.array(rows, dtype=np.float64).reshape(-1, len(expected_header))


def ensure_parent(path):
    parent = Path(path).parent
    if parent and not parent.exists():
        parent.mkdir(parents=True, exist_ok=True)
    return path

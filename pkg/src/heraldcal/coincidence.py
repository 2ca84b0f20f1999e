"""Clocked coincidence counting over integer-picosecond tag streams.

Everything is quantized to the electronics clock before any comparison,
mirroring gate logic on an FPGA: a herald tag opens a gate of whole
clock cycles after a programmable relative delay, a partner tag is
stretched to a whole-cycle pulse, and a coincidence requires the two
cycle intervals to share at least one cycle.  Requested durations are
floored to whole cycles, so the effective window of a scan comes out
between one and two clock periods short of window + pulse width,
depending on how the requested values align with the clock grid.

Accidentals are measured by repeating the count with the gate moved to
a far delay where no correlations survive, and are subtracted from the
raw count to form the effective coincidence count.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .validation import check_positive, check_scalar

PS_PER_S = 10**12


@dataclass(frozen=True)
class CoincConfig:
    """Clock, gate and delay settings of the coincidence electronics."""

    clock_period_s: float = 10e-9
    rel_delay_s: float = 10e-9
    window_cw_s: float = 30e-9
    pulse_width_w2_s: float = 20e-9
    far_delay_s: float = 300e-9

    def __post_init__(self):
        check_positive(self.clock_period_s, "clock_period_s")
        check_scalar(self.rel_delay_s, "rel_delay_s")
        check_positive(self.window_cw_s, "window_cw_s")
        check_positive(self.pulse_width_w2_s, "pulse_width_w2_s")
        check_positive(self.far_delay_s, "far_delay_s")
        if self.window_cw_s < self.clock_period_s:
            raise ConfigError("window_cw_s must be at least one clock period")
        if self.far_delay_s <= self.window_cw_s + self.pulse_width_w2_s:
            raise ConfigError("far_delay_s must exceed window_cw_s + pulse_width_w2_s")

    @property
    def clock_ps(self):
        clk = int(round(self.clock_period_s * PS_PER_S))
        if clk <= 0:
            raise ConfigError("clock_period_s below 1 ps")
        return clk

    @property
    def window_cycles(self):
        return int(round(self.window_cw_s * PS_PER_S)) // self.clock_ps

    @property
    def pulse_cycles(self):
        return max(1, int(round(self.pulse_width_w2_s * PS_PER_S)) // self.clock_ps)

    @property
    def delay_cycles(self):
        return int(round(self.rel_delay_s * PS_PER_S)) // self.clock_ps

    @property
    def far_delay_cycles(self):
        return int(round(self.far_delay_s * PS_PER_S)) // self.clock_ps


@dataclass(frozen=True)
class CoincCounts:
    """Counting result; effective_coinc = raw_coinc - accidentals."""

    singles_1: int
    singles_2: int
    raw_coinc: int
    accidentals: int
    effective_coinc: int
    window_cw_s: float
    rel_delay_s: float


def quantize(tags, clock_ps):
    """Map tags to clock-cycle indices, collapsing same-cycle duplicates."""
    if clock_ps <= 0:
        raise ConfigError("clock_ps must be positive")
    tags = np.asarray(tags, dtype=np.int64)
    return np.unique(tags // clock_ps)


def _stream_cycles(stream, clock_ps):
    return quantize(stream.tags, clock_ps)


def _merged_gates(c1, delay_cycles, window_cycles, pulse_cycles):
    """Disjoint acceptance intervals [a, b] (inclusive, in partner-cycle
    space) and the number of heralds backing each one.

    A pulse registered in cycle p stays high for pulse_cycles, so it
    overlaps the gate of herald cycle c iff
    p in [c + d - (pulse_cycles - 1), c + d + window_cycles - 1].
    Heralds whose acceptance intervals overlap are merged into one gate.
    """
    starts = c1 + (delay_cycles - (pulse_cycles - 1))
    ends = c1 + (delay_cycles + window_cycles - 1)
    if c1.size == 0:
        return starts, ends, np.empty(0, np.int64)
    new_group = np.empty(c1.size, dtype=bool)
    new_group[0] = True
    # equal-width intervals on sorted cycles: running max of ends == ends
    new_group[1:] = starts[1:] > ends[:-1]
    idx = np.flatnonzero(new_group)
    a = starts[idx]
    b = ends[np.append(idx[1:] - 1, c1.size - 1)]
    heralds = np.diff(np.append(idx, c1.size)).astype(np.int64)
    return a, b, heralds


def _count_at_delay(c1, c2, delay_cycles, window_cycles, pulse_cycles):
    a, b, heralds = _merged_gates(c1, delay_cycles, window_cycles, pulse_cycles)
    if heralds.size == 0 or c2.size == 0:
        return 0
    lo = np.searchsorted(c2, a, side="left")
    hi = np.searchsorted(c2, b + 1, side="left")
    pulses = hi - lo
    # each merged gate pairs up heralds with pulses one-to-one
    return int(np.minimum(pulses, heralds).sum())


def count_coincidences(s1, s2, cfg):
    """Count gated coincidences of stream s2 against heralds of s1.

    Raises ConfigError when the accidental-subtracted count is more
    negative than 3 sqrt(accidentals), which indicates a broken window
    or delay setting rather than statistical fluctuation.
    """
    clk = cfg.clock_ps
    c1 = _stream_cycles(s1, clk)
    c2 = _stream_cycles(s2, clk)
    raw = _count_at_delay(c1, c2, cfg.delay_cycles, cfg.window_cycles, cfg.pulse_cycles)
    acc = _count_at_delay(c1, c2, cfg.far_delay_cycles, cfg.window_cycles, cfg.pulse_cycles)
    effective = raw - acc
    if effective < -3.0 * math.sqrt(acc):
        raise ConfigError(
            f"effective coincidences {effective} below -3*sqrt(accidentals); "
            "window or delay settings are inconsistent with the data"
        )
    return CoincCounts(
        singles_1=int(len(s1.tags)),
        singles_2=int(len(s2.tags)),
        raw_coinc=raw,
        accidentals=acc,
        effective_coinc=effective,
        window_cw_s=cfg.window_cw_s,
        rel_delay_s=cfg.rel_delay_s,
    )


def delay_histogram(s1, s2, clock_period_s, max_lag_cycles=30):
    """Counts of cycle pairs at each quantized lag in [-max_lag, +max_lag].

    Returns (lags, counts).  The lag axis is c2 - c1 in clock cycles.
    """
    clk = int(round(check_positive(clock_period_s, "clock_period_s") * PS_PER_S))
    c1 = _stream_cycles(s1, clk)
    c2 = _stream_cycles(s2, clk)
    lags = np.arange(-int(max_lag_cycles), int(max_lag_cycles) + 1, dtype=np.int64)
    counts = np.zeros(lags.size, dtype=np.int64)
    if c1.size and c2.size:
        for i, k in enumerate(lags):
            target = c1 + k
            pos = np.searchsorted(c2, target)
            valid = pos < c2.size
            counts[i] = int(np.count_nonzero(c2[pos[valid]] == target[valid]))
    return lags, counts


def triple_counts(s_herald, s2, s3, cfg):
    """Windowed herald / double / triple counts for the beamsplitter setup.

    Returns (n1, n12, n13, n123): n1 is the number of (merged) herald
    gates, n12 / n13 count gates with at least one pulse on channel 2 / 3,
    n123 counts gates with pulses on both.
    """
    clk = cfg.clock_ps
    ch = _stream_cycles(s_herald, clk)
    c2 = _stream_cycles(s2, clk)
    c3 = _stream_cycles(s3, clk)
    a, b, heralds = _merged_gates(ch, cfg.delay_cycles, cfg.window_cycles, cfg.pulse_cycles)
    n1 = int(heralds.size)
    if n1 == 0:
        return 0, 0, 0, 0
    def hits(c):
        if c.size == 0:
            return np.zeros(a.size, dtype=bool)
        return (np.searchsorted(c, b + 1, "left") - np.searchsorted(c, a, "left")) > 0
    h2 = hits(c2)
    h3 = hits(c3)
    return n1, int(h2.sum()), int(h3.sum()), int((h2 & h3).sum())


def accidental_scan(s1, s2, cfg, cw_values_s):
    """Accidental counts at the far delay for each requested window width.

    Returns an array of shape (n, 2) with columns (cw_s, counts).
    """
    rows = []
    for cw in cw_values_s:
        cw = check_positive(cw, "cw")
        counts = count_coincidences(s1, s2, replace(cfg, window_cw_s=cw))
        rows.append((cw, counts.accidentals))
    return np.array(rows, dtype=np.float64)

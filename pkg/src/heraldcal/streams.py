"""Monte Carlo time-tag simulator for a pulsed-mode photon-pair source.

Pair-generating temporal modes are placed as a Poisson process; each
occupied mode carries a geometrically distributed photon number that is
identical in the two arms.  Each arm thins the photons with its merged
efficiency, collapses survivors to a single click tag, adds timing
jitter, dark and background counts, and (optionally) applies detector
dead time.  All tags are integer picoseconds.

Reproducibility contract: generation is chunked in time and every
(chunk, channel) pair draws from its own counter-derived substream, so
the merged streams are byte-identical for any worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fock import squeeze_to_zeta
from .validation import check_efficiency, check_nonneg, check_positive, check_scalar

PS_PER_S = 10**12


@dataclass(frozen=True)
class SourceParams:
    """Pair source settings.

    background_rate_per_arm is an uncorrelated Poisson tag rate added to
    every detector channel, quoted as detected counts per second (it is
    not thinned again by the channel efficiency).
    """

    r: float
    mode_rate_hz: float = 1.0e7
    background_rate_per_arm: float = 0.0
    duration_s: float = 1.0

    def __post_init__(self):
        check_nonneg(self.r, "r")
        check_positive(self.mode_rate_hz, "mode_rate_hz")
        check_nonneg(self.background_rate_per_arm, "background_rate_per_arm")
        check_nonneg(self.duration_s, "duration_s")

    @property
    def zeta(self):
        return squeeze_to_zeta(self.r)


@dataclass(frozen=True)
class DetectorChannel:
    """One detection channel: transmission, detector, and its pathologies.

    delay_s models the fixed electrical/optical path delay of the channel;
    the coincidence electronics compensate it with their relative delay
    setting.
    """

    t_chan: float = 1.0
    eta_d: float = 1.0
    dark_rate_hz: float = 0.0
    jitter_sigma_s: float = 300e-12
    pulse_width_s: float = 20e-9
    dead_time_s: float = 0.0
    delay_s: float = 0.0

    def __post_init__(self):
        check_efficiency(self.t_chan, "t_chan", allow_zero=True)
        check_efficiency(self.eta_d, "eta_d", allow_zero=True)
        check_nonneg(self.dark_rate_hz, "dark_rate_hz")
        check_nonneg(self.jitter_sigma_s, "jitter_sigma_s")
        check_nonneg(self.pulse_width_s, "pulse_width_s")
        check_nonneg(self.dead_time_s, "dead_time_s")
        check_scalar(self.delay_s, "delay_s")

    @property
    def eta_tot(self):
        return self.t_chan * self.eta_d


@dataclass(frozen=True)
class SimSeed:
    """Master seed plus the chunking grain that fixes substream layout.

    Changing chunk_seconds changes which substream generates which mode,
    so it is part of the reproducibility contract, not a tuning knob.
    """

    master_seed: int
    chunk_seconds: float = 1.0

    def __post_init__(self):
        if not isinstance(self.master_seed, (int, np.integer)) or self.master_seed < 0:
            raise ValueError("master_seed must be a nonnegative integer")
        check_positive(self.chunk_seconds, "chunk_seconds")

    def substream(self, chunk_index, slot):
        """Independent generator for (chunk, slot); slot 0 is the source."""
        ss = np.random.SeedSequence(
            entropy=int(self.master_seed), spawn_key=(int(chunk_index), int(slot))
        )
        return np.random.default_rng(ss)


@dataclass
class TimeTagStream:
    """Sorted, deduplicated integer-picosecond tags of one channel."""

    channel_id: int
    tags: np.ndarray = field(repr=False)
    duration_ps: int = 0

    def __post_init__(self):
        tags = np.asarray(self.tags, dtype=np.int64)
        if tags.ndim != 1:
            raise ValueError("tags must be 1-dimensional")
        if tags.size:
            if np.any(np.diff(tags) <= 0):
                raise ValueError("tags must be sorted strictly increasing")
            if tags[0] < 0 or tags[-1] > self.duration_ps:
                raise ValueError("tags must lie within [0, duration_ps]")
        self.tags = tags

    def __len__(self):
        return self.tags.size

    def rate_hz(self):
        if self.duration_ps == 0:
            return 0.0
        return self.tags.size * PS_PER_S / self.duration_ps


def _chunk_grid(duration_ps, chunk_seconds):
    chunk_ps = int(round(chunk_seconds * PS_PER_S))
    n_chunks = max(1, -(-duration_ps // chunk_ps))
    return chunk_ps, n_chunks


def _source_modes(rng, zeta, mode_rate_hz, start_ps, span_ps):
    """Occupied-mode times (ps) and photon numbers within one chunk.

    Thinning the Poisson mode process by the occupation probability zeta
    leaves a Poisson process of rate mode_rate * zeta; conditioned on
    occupation the photon number is geometric starting at 1.
    """
    if zeta <= 0.0 or span_ps <= 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    lam = mode_rate_hz * zeta * (span_ps / PS_PER_S)
    n_occ = rng.poisson(lam)
    if n_occ == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    times = start_ps + rng.integers(0, span_ps, size=n_occ, dtype=np.int64)
    n_photons = rng.geometric(1.0 - zeta, size=n_occ).astype(np.int64)
    return times, n_photons


def _channel_tags(rng, channel, extra_rate_hz, mode_times, n_detected, start_ps, span_ps):
    """Click tags of one channel in one chunk, given per-mode survivor counts."""
    clicked = n_detected > 0
    tags = mode_times[clicked]
    delay_ps = int(round(channel.delay_s * PS_PER_S))
    if delay_ps:
        tags = tags + delay_ps
    if channel.jitter_sigma_s > 0.0 and tags.size:
        sigma_ps = channel.jitter_sigma_s * PS_PER_S
        tags = tags + np.rint(rng.normal(0.0, sigma_ps, size=tags.size)).astype(np.int64)
    noise_rate = channel.dark_rate_hz + extra_rate_hz
    if noise_rate > 0.0 and span_ps > 0:
        n_noise = rng.poisson(noise_rate * span_ps / PS_PER_S)
        if n_noise:
            noise = start_ps + rng.integers(0, span_ps, size=n_noise, dtype=np.int64)
            tags = np.concatenate([tags, noise])
    return tags


def _apply_dead_time(tags, dead_time_ps):
    """Drop tags closer than dead_time_ps behind the last accepted tag."""
    if dead_time_ps <= 0 or tags.size == 0:
        return tags
    keep = np.ones(tags.size, dtype=bool)
    last = tags[0]
    for i in range(1, tags.size):
        if tags[i] - last < dead_time_ps:
            keep[i] = False
        else:
            last = tags[i]
    return tags[keep]


def _finalize(channel_id, pieces, duration_ps, channel):
    tags = np.concatenate(pieces) if pieces else np.empty(0, np.int64)
    tags = tags[(tags >= 0) & (tags <= duration_ps)]
    tags = np.unique(tags)  # sorts and collapses same-picosecond hits
    tags = _apply_dead_time(tags, int(round(channel.dead_time_s * PS_PER_S)))
    return TimeTagStream(channel_id, tags, duration_ps)


def _run_chunks(worker, n_chunks, n_workers):
    if n_workers <= 1:
        return [worker(i) for i in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(worker, range(n_chunks)))


def simulate_pair_streams(source, ch1, ch2, seed, n_workers=1):
    """Simulate the two arms of the pair source; returns two tag streams.

    Photon numbers in the arms are perfectly correlated per mode; each
    arm thins them independently with its eta_tot.
    """
    zeta = source.zeta
    duration_ps = int(round(source.duration_s * PS_PER_S))
    chunk_ps, n_chunks = _chunk_grid(duration_ps, seed.chunk_seconds)

    def one_chunk(i):
        start = i * chunk_ps
        span = min(chunk_ps, duration_ps - start)
        times, n_ph = _source_modes(seed.substream(i, 0), zeta,
                                    source.mode_rate_hz, start, span)
        out = []
        for slot, ch in ((1, ch1), (2, ch2)):
            rng = seed.substream(i, slot)
            n_det = rng.binomial(n_ph, ch.eta_tot) if n_ph.size else n_ph
            out.append(_channel_tags(rng, ch, source.background_rate_per_arm,
                                     times, n_det, start, span))
        return out

    results = _run_chunks(one_chunk, n_chunks, n_workers)
    s1 = _finalize(1, [r[0] for r in results], duration_ps, ch1)
    s2 = _finalize(2, [r[1] for r in results], duration_ps, ch2)
    return s1, s2


def simulate_hbt_streams(source, herald, split, ch2, ch3, seed, n_workers=1):
    """Simulate herald arm plus a beamsplitter feeding two detectors.

    Every photon of the measured arm independently ends up detected at
    channel 2 (probability split * eta_tot2), detected at channel 3
    (probability (1 - split) * eta_tot3), or lost.  Returns the herald,
    channel-2 and channel-3 tag streams.
    """
    if not 0.0 < split < 1.0:
        raise ValueError(f"split must be in (0, 1), got {split}")
    zeta = source.zeta
    duration_ps = int(round(source.duration_s * PS_PER_S))
    chunk_ps, n_chunks = _chunk_grid(duration_ps, seed.chunk_seconds)
    a2 = split * ch2.eta_tot
    a3 = (1.0 - split) * ch3.eta_tot

    def one_chunk(i):
        start = i * chunk_ps
        span = min(chunk_ps, duration_ps - start)
        times, n_ph = _source_modes(seed.substream(i, 0), zeta,
                                    source.mode_rate_hz, start, span)
        rng_h = seed.substream(i, 1)
        n_det_h = rng_h.binomial(n_ph, herald.eta_tot) if n_ph.size else n_ph
        tags_h = _channel_tags(rng_h, herald, source.background_rate_per_arm,
                               times, n_det_h, start, span)
        rng_2 = seed.substream(i, 2)
        k2 = rng_2.binomial(n_ph, a2) if n_ph.size else n_ph
        tags_2 = _channel_tags(rng_2, ch2, source.background_rate_per_arm,
                               times, k2, start, span)
        rng_3 = seed.substream(i, 3)
        if n_ph.size and a2 < 1.0:
            k3 = rng_3.binomial(n_ph - k2, a3 / (1.0 - a2))
        else:
            k3 = np.zeros_like(n_ph)
        tags_3 = _channel_tags(rng_3, ch3, source.background_rate_per_arm,
                               times, k3, start, span)
        return tags_h, tags_2, tags_3

    results = _run_chunks(one_chunk, n_chunks, n_workers)
    sh = _finalize(1, [r[0] for r in results], duration_ps, herald)
    s2 = _finalize(2, [r[1] for r in results], duration_ps, ch2)
    s3 = _finalize(3, [r[2] for r in results], duration_ps, ch3)
    return sh, s2, s3

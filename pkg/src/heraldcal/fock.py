"""Exact click statistics for a two-mode squeezed vacuum photon-pair source.

Photon number in the two output arms is perfectly correlated: the joint
distribution is P(n, n) = (1 - zeta) * zeta**n with zeta = tanh(r)**2, so
each arm alone is thermal.  Detectors are binary (click / no click) with
no number resolution; optical loss T followed by detection efficiency
eta_d is equivalent to a single detector with eta_tot = T * eta_d, which
is why everything below takes a single merged efficiency per arm.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .validation import check_efficiency, check_nonneg, check_scalar, check_unit_interval

# Truncation tolerance for adaptive Fock-space cutoffs and the hard cap on
# the cutoff itself.  zeta**(nmax+1) < TRUNC_TOL bounds the discarded tail.
TRUNC_TOL = 1e-14
NMAX_CAP = 4096


@dataclass(frozen=True)
class SqueezeParam:
    """Squeezing parameter r >= 0 of the pair source."""

    r: float

    def __post_init__(self):
        check_nonneg(self.r, "r")

    @property
    def zeta(self):
        return squeeze_to_zeta(self.r)


@dataclass(frozen=True)
class EffectiveEfficiency:
    """Detector efficiency eta_d behind a transmission-t_chan channel."""

    eta_d: float
    t_chan: float = 1.0

    def __post_init__(self):
        check_efficiency(self.eta_d, "eta_d", allow_zero=True)
        check_efficiency(self.t_chan, "t_chan", allow_zero=True)

    @property
    def eta_tot(self):
        return self.eta_d * self.t_chan


@dataclass(frozen=True)
class DiagonalFockDist:
    """Photon-number distribution, truncated at nmax = len(probs) - 1.

    probs[n] is the probability of n photons.  The truncated sum must not
    fall below 1 - TRUNC_TOL; the deficit is the discarded tail.
    """

    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-d array")
        if np.any(probs < 0.0):
            raise ValueError("probs must be nonnegative")
        total = math.fsum(probs.tolist())
        if not (1.0 - TRUNC_TOL <= total <= 1.0 + TRUNC_TOL):
            raise ValueError(f"probs sum to {total}, outside [1 - {TRUNC_TOL}, 1]")
        object.__setattr__(self, "probs", probs)

    @property
    def nmax(self):
        return self.probs.size - 1

    def mean(self):
        n = np.arange(self.probs.size, dtype=np.float64)
        return math.fsum((n * self.probs).tolist())


def squeeze_to_zeta(r):
    """Map squeezing r to the geometric-distribution parameter tanh(r)**2."""
    r = check_nonneg(r, "r")
    return math.tanh(r) ** 2


def adaptive_nmax(zeta, tol=TRUNC_TOL, cap=NMAX_CAP, floor=16):
    """Smallest cutoff with zeta**(nmax+1) < tol, clamped to [floor, cap]."""
    zeta = check_unit_interval(zeta, "zeta", inclusive_high=False)
    if zeta <= 0.0:
        return floor
    n = int(math.floor(math.log(tol) / math.log(zeta)))
    return max(floor, min(cap, n))


def _as_dist(probs):
    """Wrap a truncated probability vector, renormalizing if the cutoff
    (typically the NMAX_CAP clamp at extreme zeta) left visible tail mass."""
    total = math.fsum(np.asarray(probs, dtype=np.float64).tolist())
    if total < 1.0 - TRUNC_TOL:
        probs = probs / total
    return DiagonalFockDist(probs)


def thermal_pmf(zeta, nmax=None):
    """Thermal photon-number distribution (1 - zeta) * zeta**n of one arm."""
    zeta = check_unit_interval(zeta, "zeta", inclusive_high=False)
    if nmax is None:
        nmax = adaptive_nmax(zeta)
    n = np.arange(nmax + 1, dtype=np.float64)
    return _as_dist((1.0 - zeta) * zeta**n)


def povm_off_weights(eta_tot, nmax):
    """No-click weights (1 - eta_tot)**n of a binary detector, n = 0..nmax."""
    eta_tot = check_efficiency(eta_tot, "eta_tot", allow_zero=True)
    n = np.arange(int(nmax) + 1, dtype=np.float64)
    return (1.0 - eta_tot) ** n


def marginal_click_prob(zeta, eta_tot):
    """Unconditional click probability of one arm per pump mode."""
    zeta = check_unit_interval(zeta, "zeta", inclusive_high=False)
    eta_tot = check_efficiency(eta_tot, "eta_tot", allow_zero=True)
    # Geometric sum of (1 - eta)**n against the thermal weights.
    return zeta * eta_tot / (1.0 - zeta * (1.0 - eta_tot))


def heralded_pmf(zeta, eta1_tot, nmax=None):
    """Photon-number distribution of arm B given a click on arm A.

    The herald click reweights the thermal distribution by the click
    probability 1 - (1 - eta1_tot)**n and renormalizes by the marginal
    click probability; vacuum is removed exactly.
    """
    zeta = check_scalar(zeta, "zeta", low=0.0, high=1.0,
                        inclusive_low=False, inclusive_high=False)
    eta1_tot = check_efficiency(eta1_tot, "eta1_tot")
    if nmax is None:
        # Guard the cutoff for small eta1_tot: the normalization boosts the
        # tail by (1 - zeta * (1 - eta1_tot)) / (zeta * eta1_tot).
        boost = (1.0 - zeta * (1.0 - eta1_tot)) / (zeta * eta1_tot)
        tol = TRUNC_TOL / max(boost, 1.0)
        nmax = adaptive_nmax(zeta, tol=max(tol, 1e-300))
    n = np.arange(nmax + 1, dtype=np.float64)
    q1 = 1.0 - eta1_tot
    unnorm = (1.0 - zeta) * zeta**n * (1.0 - q1**n)
    norm = marginal_click_prob(zeta, eta1_tot)
    return _as_dist(unnorm / norm)


def conditional_click_prob(eta1_tot, eta2_tot, r):
    """P(click on arm 2 | click on arm 1) for merged efficiencies and squeezing r.

    Closed form; the apparent 0/0 at r = 0 cancels algebraically, so the
    expression is exact for all r >= 0 and returns eta2_tot at r = 0.
    """
    eta1_tot = check_efficiency(eta1_tot, "eta1_tot")
    eta2_tot = check_efficiency(eta2_tot, "eta2_tot", allow_zero=True)
    z = squeeze_to_zeta(r)
    q1 = 1.0 - eta1_tot
    q2 = 1.0 - eta2_tot
    if z >= 1.0:  # tanh(r)**2 rounds to 1 for r >~ 19
        return 1.0 if eta2_tot > 0.0 else 0.0
    p_off = (1.0 - z) * (1.0 - z * q1) * q2 / ((1.0 - z * q2) * (1.0 - z * q1 * q2))
    return 1.0 - p_off


def conditional_prob_deta2(eta1_tot, eta2_tot, r):
    """Slope d P(click2 | click1) / d eta2_tot at fixed eta1_tot and r.

    Equals 1 at r = 0 and shrinks as multiphoton terms saturate the
    click probability; its reciprocal propagates a probability error
    into an efficiency error.
    """
    eta1_tot = check_efficiency(eta1_tot, "eta1_tot")
    eta2_tot = check_efficiency(eta2_tot, "eta2_tot", allow_zero=True)
    z = squeeze_to_zeta(r)
    q1 = 1.0 - eta1_tot
    q2 = 1.0 - eta2_tot
    a = 1.0 - z * q2
    b = 1.0 - z * q1 * q2
    return (1.0 - z) * (1.0 - z * q1) / eta1_tot * (1.0 / a**2 - q1 / b**2)


def fock_g2(dist):
    """Photon-number autocorrelation <n(n-1)> / <n>**2 of a distribution.

    This is the loss-independent statistic: 2 for thermal light, 0 for a
    single photon, 1 for Poissonian light.
    """
    probs = dist.probs if isinstance(dist, DiagonalFockDist) else np.asarray(dist, float)
    n = np.arange(probs.size, dtype=np.float64)
    mean = math.fsum((n * probs).tolist())
    if mean <= 0.0:
        raise ValueError("distribution has zero mean photon number")
    nn1 = math.fsum((n * (n - 1.0) * probs).tolist())
    return nn1 / mean**2


def heralded_g2_analytic(zeta, eta1_tot, split, eta2_tot, eta3_tot, nmax=None):
    """Click-based g2(0) of the heralded arm behind a beamsplitter.

    The heralded mode is split with ratio `split` onto two binary
    detectors with merged efficiencies eta2_tot and eta3_tot:

        g2 = P(click2 and click3 | herald) /
             (P(click2 | herald) * P(click3 | herald))

    evaluated by an exact truncated Fock sum over the heralded
    distribution.  Approaches 0 for weak squeezing (single-photon-like)
    and grows with multiphoton contamination.
    """
    split = check_unit_interval(split, "split")
    eta2_tot = check_efficiency(eta2_tot, "eta2_tot")
    eta3_tot = check_efficiency(eta3_tot, "eta3_tot")
    dist = heralded_pmf(zeta, eta1_tot, nmax=nmax)
    a2 = split * eta2_tot
    a3 = (1.0 - split) * eta3_tot
    if a2 <= 0.0 or a3 <= 0.0:
        raise ValueError("each beamsplitter output needs nonzero detection probability")
    probs = dist.probs
    off2 = math.fsum((probs * povm_off_weights(a2, dist.nmax)).tolist())
    off3 = math.fsum((probs * povm_off_weights(a3, dist.nmax)).tolist())
    off23 = math.fsum((probs * povm_off_weights(a2 + a3, dist.nmax)).tolist())
    on2 = 1.0 - off2
    on3 = 1.0 - off3
    on23 = 1.0 - off2 - off3 + off23
    return on23 / (on2 * on3)


def heralded_fidelity_from_g2(g2):
    """Single-photon fidelity bound 1 - g2/2, clamped to [0, 1]."""
    g2 = check_nonneg(g2, "g2")
    return min(1.0, max(0.0, 1.0 - 0.5 * g2))

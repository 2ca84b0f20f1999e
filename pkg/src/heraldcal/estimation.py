"""Absolute-efficiency estimators and model fits on coincidence data.

The herald-ratio estimator eta = C12 / C1 is exact for true pair
sources; with a squeezed-vacuum source its multiphoton terms bias it
high, which is what the joint model fit corrects: both conditional
click probabilities are fitted simultaneously against pump power with
shared (eta_tot_1, eta_tot_2, K) and the crystal-specific pump-to-
squeezing coefficient mu, r = mu * sqrt(K * pump_dac).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import shapiro
from sklearn.base import BaseEstimator, RegressorMixin

from .coincidence import CoincCounts
from .errors import ConfigError, NumericalError
from .fock import conditional_click_prob, conditional_prob_deta2, squeeze_to_zeta
from .validation import (
    as_float_array,
    check_efficiency,
    check_nonneg,
    check_positive,
    check_unit_interval,
)

# covariance condition number above which the fit is flagged as
# ill-conditioned (near-linear data cannot separate K from the etas)
CONDITION_LIMIT = 1e6


def klyshko_efficiency(c12, c_herald):
    """Herald-ratio efficiency estimate with its binomial error.

    c12 may be the accidental-subtracted effective count (a float,
    possibly slightly negative after subtraction noise).
    """
    c_herald = check_positive(c_herald, "c_herald")
    c12 = float(c12)
    if c12 > c_herald:
        raise ValueError(f"c12 = {c12} exceeds c_herald = {c_herald}")
    eta = c12 / c_herald
    p = min(max(eta, 0.0), 1.0)
    sigma = math.sqrt(p * (1.0 - p) / c_herald)
    return eta, sigma


def conventional_efficiency(rate_obs, rate_exp, sigma_obs=0.0, sigma_exp=0.0):
    """Substitution-method efficiency: observed rate over expected rate."""
    rate_obs = check_nonneg(rate_obs, "rate_obs")
    rate_exp = check_positive(rate_exp, "rate_exp")
    sigma_obs = check_nonneg(sigma_obs, "sigma_obs")
    sigma_exp = check_nonneg(sigma_exp, "sigma_exp")
    eta = rate_obs / rate_exp
    rel = 0.0
    if rate_obs > 0.0:
        rel = math.hypot(sigma_obs / rate_obs, sigma_exp / rate_exp)
    return eta, eta * rel


def propagate_sigma_eta(eta1_tot, eta2_tot, r, sigma_p):
    """Propagate an error on the conditional click probability into an
    error on eta2_tot through the inverse model slope."""
    sigma_p = check_nonneg(sigma_p, "sigma_p")
    deriv = conditional_prob_deta2(eta1_tot, eta2_tot, r)
    if not np.isfinite(deriv) or abs(deriv) < 1e-300:
        raise NumericalError(
            f"conditional-probability slope {deriv} too small to invert"
        )
    return sigma_p / abs(deriv)


def infer_source_transmission(eta_tot, eta_conv, channel_loss):
    """Source-internal transmission left after dividing out the detector.

    eta_tot is the absolute (herald-based) efficiency of the whole arm,
    eta_conv the substitution-method efficiency of the bare detector,
    channel_loss the measured fractional loss of the passive path.
    """
    eta_tot = check_efficiency(eta_tot, "eta_tot")
    eta_conv = check_efficiency(eta_conv, "eta_conv")
    channel_loss = check_unit_interval(channel_loss, "channel_loss", inclusive_high=False)
    if eta_tot > eta_conv:
        raise ValueError(
            f"eta_tot = {eta_tot} exceeds the bare-detector efficiency "
            f"{eta_conv}; the arm cannot out-perform its detector"
        )
    return eta_tot / (eta_conv * (1.0 - channel_loss))


@dataclass(frozen=True)
class UncertaintyBudget:
    """Named (value, sigma) components combined in relative quadrature."""

    components: tuple
    combined_relative: float
    combined_sigma: float | None = None

    def dominant(self):
        return max(self.components, key=lambda c: abs(c[2] / c[1]))[0]


def combine_budget(components, reference_value=None):
    """Root-sum-square of the relative errors of independent components.

    components: iterable of (name, value, sigma).  When reference_value
    is given, combined_sigma scales the relative total onto it.
    """
    comps = []
    for name, value, sigma in components:
        value = float(value)
        sigma = check_nonneg(sigma, f"sigma of {name}")
        if value == 0.0:
            raise ConfigError(f"budget component {name!r} has zero value")
        comps.append((str(name), value, sigma))
    if not comps:
        raise ConfigError("budget needs at least one component")
    rel = math.sqrt(math.fsum((s / v) ** 2 for _, v, s in comps))
    sigma = rel * abs(reference_value) if reference_value is not None else None
    return UncertaintyBudget(tuple(comps), rel, sigma)


@dataclass(frozen=True)
class SweepPoint:
    """One pump power: coincidence counts in both conditioning directions.

    counts_12 gates on channel 1 and counts channel-2 pulses;
    counts_21 is the reverse.
    """

    pump_dac: float
    duration_s: float
    counts_12: CoincCounts
    counts_21: CoincCounts

    def ratios(self):
        """((p21, sigma21), (p12, sigma12)) conditional ratio estimates."""
        out = []
        for c in (self.counts_12, self.counts_21):
            eta, sigma = klyshko_efficiency(c.effective_coinc, c.singles_1)
            # zero-count guard: keep weights finite
            if sigma == 0.0:
                sigma = 1.0 / c.singles_1
            out.append((eta, sigma))
        return tuple(out)


@dataclass(frozen=True)
class CalibrationFit:
    """Joint-fit result for one sweep."""

    eta_tot_1: float
    eta_tot_2: float
    k_factor: float
    sigma_eta_1: float
    sigma_eta_2: float
    covariance: np.ndarray
    condition_number: float
    ill_conditioned: bool
    mu: float
    residuals: np.ndarray
    per_point_sigma_1: np.ndarray
    per_point_sigma_2: np.ndarray
    r_values: np.ndarray
    n_evaluations: int
    residual_normality_p: float | None

    def summary(self):
        flag = "  [ill-conditioned]" if self.ill_conditioned else ""
        return (
            f"eta_tot_1 = {self.eta_tot_1:.6f} +- {self.sigma_eta_1:.2g}, "
            f"eta_tot_2 = {self.eta_tot_2:.6f} +- {self.sigma_eta_2:.2g}, "
            f"K = {self.k_factor:.6g}{flag}"
        )


class CalibrationModel(BaseEstimator, RegressorMixin):
    """Joint two-direction conditional-probability model.

    Parameters
    ----------
    mu : pump-to-squeezing coefficient, r = mu * sqrt(k * pump_dac).
    k_init : starting value of the pump scale factor k.
    xtol : relative parameter-change convergence tolerance.
    max_eval : cap on model evaluations before declaring non-convergence.

    fit(X, y, y_sigma) takes pump values X of shape (n,) and measured
    conditional probabilities y of shape (n, 2), column 0 heralding on
    channel 1, column 1 heralding on channel 2.
    """

    def __init__(self, mu=0.115, k_init=1.0, xtol=1e-10, max_eval=2000):
        self.mu = mu
        self.k_init = k_init
        self.xtol = xtol
        self.max_eval = max_eval

    def _model(self, params, dac):
        eta1, eta2, k = params
        r = self.mu * np.sqrt(k * dac)
        p21 = np.array([conditional_click_prob(eta1, eta2, ri) for ri in r])
        p12 = np.array([conditional_click_prob(eta2, eta1, ri) for ri in r])
        return np.column_stack([p21, p12])

    def fit(self, X, y, y_sigma=None):
        dac = as_float_array(X, "X")
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (dac.size, 2):
            raise ValueError(f"y must have shape ({dac.size}, 2), got {y.shape}")
        if np.any(dac <= 0.0):
            raise ValueError("pump values must be positive")
        if dac.size < 3:
            raise ValueError("need at least 3 sweep points for a 3-parameter fit")
        if y_sigma is None:
            y_sigma = np.ones_like(y)
        y_sigma = np.asarray(y_sigma, dtype=np.float64)
        if y_sigma.shape != y.shape or np.any(y_sigma <= 0.0):
            raise ValueError("y_sigma must match y and be positive")

        check_positive(self.mu, "mu")
        p0 = np.array([
            min(max(y[np.argmin(dac), 1], 1e-3), 0.99),
            min(max(y[np.argmin(dac), 0], 1e-3), 0.99),
            check_positive(self.k_init, "k_init"),
        ])

        def residuals(params):
            return ((self._model(params, dac) - y) / y_sigma).ravel()

        result = least_squares(
            residuals,
            p0,
            bounds=([1e-6, 1e-6, 1e-12], [1.0, 1.0, np.inf]),
            xtol=self.xtol,
            ftol=None,
            gtol=None,
            max_nfev=self.max_eval,
        )
        if result.status <= 0:
            raise NumericalError(
                f"calibration fit did not converge: {result.message} "
                f"(evaluations = {result.nfev}, cost = {result.cost:.3g}, "
                f"best iterate = {result.x.tolist()})"
            )
        jac = result.jac
        jtj = jac.T @ jac
        try:
            cov = np.linalg.inv(jtj)
        except np.linalg.LinAlgError as err:
            raise NumericalError(f"singular normal matrix in fit: {err}") from None
        cov = 0.5 * (cov + cov.T)  # inversion roundoff must not break symmetry
        self.eta_tot_1_, self.eta_tot_2_, self.k_factor_ = result.x
        self.covariance_ = cov
        self.condition_number_ = float(np.linalg.cond(cov))
        self.ill_conditioned_ = bool(self.condition_number_ >= CONDITION_LIMIT)
        self.residuals_ = result.fun.reshape(-1, 2)
        self.n_evaluations_ = int(result.nfev)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        if not hasattr(self, "eta_tot_1_"):
            raise NumericalError("model is not fitted")
        dac = as_float_array(X, "X")
        return self._model((self.eta_tot_1_, self.eta_tot_2_, self.k_factor_), dac)


def fit_sweep(points, mu=0.115, k_init=1.0):
    """Fit (eta_tot_1, eta_tot_2, K) jointly to both conditioning
    directions of a pump sweep.

    Exchange symmetry is exact: relabeling the channels in the input
    produces the same internal problem and therefore bitwise-swapped
    estimates.
    """
    points = sorted(points, key=lambda p: p.pump_dac)
    if len(points) < 4:
        raise ConfigError("sweep needs at least 4 pump points")
    dac = np.array([p.pump_dac for p in points])
    if np.unique(dac).size != dac.size:
        raise ConfigError("sweep pump values must be distinct")
    rat = [p.ratios() for p in points]
    p21 = np.array([r[0][0] for r in rat])
    s21 = np.array([r[0][1] for r in rat])
    p12 = np.array([r[1][0] for r in rat])
    s12 = np.array([r[1][1] for r in rat])

    # canonical orientation makes channel relabeling an exact mirror
    swapped = (p12.tobytes(), s12.tobytes()) < (p21.tobytes(), s21.tobytes())
    if swapped:
        p21, p12 = p12, p21
        s21, s12 = s12, s21

    model = CalibrationModel(mu=mu, k_init=k_init)
    model.fit(dac, np.column_stack([p21, p12]), np.column_stack([s21, s12]))
    eta_a, eta_b, k = model.eta_tot_1_, model.eta_tot_2_, model.k_factor_
    cov = model.covariance_

    r_values = mu * np.sqrt(k * dac)
    sig_b = np.array([propagate_sigma_eta(eta_a, eta_b, r, s)
                      for r, s in zip(r_values, s21)])
    sig_a = np.array([propagate_sigma_eta(eta_b, eta_a, r, s)
                      for r, s in zip(r_values, s12)])
    resid = model.residuals_

    if swapped:
        eta_a, eta_b = eta_b, eta_a
        sig_a, sig_b = sig_b, sig_a
        perm = [1, 0, 2]
        cov = cov[np.ix_(perm, perm)]
        resid = resid[:, ::-1]

    flat = resid.ravel()
    # the diagnostic needs spread: noiseless synthetic fits leave a
    # numerically constant residual vector shapiro cannot rank
    if flat.size >= 8 and float(np.ptp(flat)) > 0.0:
        normality_p = float(shapiro(flat).pvalue)
    else:
        normality_p = None

    return CalibrationFit(
        eta_tot_1=float(eta_a),
        eta_tot_2=float(eta_b),
        k_factor=float(k),
        sigma_eta_1=float(math.sqrt(max(cov[0, 0], 0.0))),
        sigma_eta_2=float(math.sqrt(max(cov[1, 1], 0.0))),
        covariance=cov,
        condition_number=model.condition_number_,
        ill_conditioned=model.ill_conditioned_,
        mu=mu,
        residuals=resid,
        per_point_sigma_1=sig_a,
        per_point_sigma_2=sig_b,
        r_values=r_values,
        n_evaluations=model.n_evaluations_,
        residual_normality_p=normality_p,
    )


class AccidentalWindowModel(BaseEstimator, RegressorMixin):
    """Straight line through an accidentals-versus-window scan.

    counts = slope * (cw + pulse_width - delta_w); the fitted intercept
    measures the effective-window shortfall delta_w of the electronics.
    """

    def __init__(self, pulse_width_w2_s=20e-9):
        self.pulse_width_w2_s = pulse_width_w2_s

    def fit(self, X, y):
        cw = as_float_array(X, "X")
        counts = as_float_array(y, "y")
        if cw.size != counts.size:
            raise ValueError("X and y must have the same length")
        if np.unique(cw).size < 3:
            raise ValueError("need at least 3 distinct window values")
        check_positive(self.pulse_width_w2_s, "pulse_width_w2_s")
        slope, intercept = np.polyfit(cw, counts, 1)
        # a flat scan fits with a roundoff-sized slope; demand a rise
        # across the scanned range that is resolvable against the counts
        rise = slope * float(np.ptp(cw))
        floor = 1e-9 * max(float(np.max(np.abs(counts))), 1.0)
        if slope <= 0.0 or rise <= floor:
            raise NumericalError(f"accidental scan slope {slope:.3g} unusably small")
        pred = slope * cw + intercept
        ss_res = float(np.sum((counts - pred) ** 2))
        ss_tot = float(np.sum((counts - counts.mean()) ** 2))
        self.slope_ = float(slope)
        self.intercept_ = float(intercept)
        self.r_squared_ = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
        self.delta_w_s_ = self.pulse_width_w2_s - intercept / slope
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        if not hasattr(self, "slope_"):
            raise NumericalError("model is not fitted")
        return self.slope_ * as_float_array(X, "X") + self.intercept_


def accidental_line_fit(scan, pulse_width_w2_s=20e-9):
    """Fit the scan array from accidental_scan; returns
    (slope, delta_w_s, r_squared)."""
    scan = np.asarray(scan, dtype=np.float64)
    if scan.ndim != 2 or scan.shape[1] != 2:
        raise ValueError("scan must be an (n, 2) array of (cw_s, counts)")
    model = AccidentalWindowModel(pulse_width_w2_s=pulse_width_w2_s)
    model.fit(scan[:, 0], scan[:, 1])
    return model.slope_, model.delta_w_s_, model.r_squared_


def klyshko_bias_curve(eta1_tot, eta2_tot, r_values):
    """Analytic overestimate of the herald-ratio estimator versus r:
    conditional click probability minus the true eta2_tot."""
    r_values = as_float_array(r_values, "r_values")
    return np.array([
        conditional_click_prob(eta1_tot, eta2_tot, r) - eta2_tot for r in r_values
    ])


def expected_accidentals_per_second(rate1_hz, rate2_hz, effective_window_s):
    """Poisson accidental-coincidence rate for uncorrelated streams."""
    check_nonneg(rate1_hz, "rate1_hz")
    check_nonneg(rate2_hz, "rate2_hz")
    check_nonneg(effective_window_s, "effective_window_s")
    return rate1_hz * rate2_hz * effective_window_s

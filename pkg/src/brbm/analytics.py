"""Closed-form and statistical analytics: the alternating-series density of a
reflected path surviving below an affine boundary, many-to-one band
expectations, theta-type sums, order-statistic quantiles, frontier
regression, two-sided dependence statistics, and count ratios for the
law-of-large-numbers experiments.
"""

import warnings
from dataclasses import dataclass
from math import cosh, exp, log, pi, sqrt
from typing import NamedTuple

import numpy as np
from scipy.stats import binom

from ._backend import kernels
from .stochastic import AffineBoundary, adaptive_simpson

__all__ = [
    "QuantileEstimate",
    "FrontierFit",
    "DependenceEstimate",
    "taboo_density",
    "taboo_band_probability",
    "expected_band_count",
    "theta_sums",
    "quantile_estimate",
    "frontier_fit",
    "dependence_statistic",
    "pair_overlap_exponent",
    "interval_count",
    "lln_count_ratios",
    "fpt_band_estimate",
]

SQRT2 = sqrt(2.0)
LOG_COEFF = 3.0 / (2.0 * SQRT2)
SQRT8 = sqrt(8.0)


@dataclass(frozen=True)
class QuantileEstimate:
    """Order-statistic quantile with a distribution-free 95% CI.

    ``value`` follows the right-continuous-from-below convention: the largest
    order statistic whose empirical CDF does not exceed delta, ties broken
    toward the larger order statistic.
    """

    delta: float
    horizon: float
    value: float
    ci_low: float
    ci_high: float
    n: int


@dataclass(frozen=True)
class FrontierFit:
    """Least-squares coefficients of median(t) ~ speed*t + log_coeff*log t + intercept."""

    speed: float
    log_coeff: float
    intercept: float
    residual_rms: float


class DependenceEstimate(NamedTuple):
    value: float
    std_error: float
    n: int


def taboo_density(boundary: AffineBoundary, t, x, n_max=12):
    """Density at x of the reflected path at time t on the event that it has
    stayed below the affine boundary throughout [0, t].

    Evaluates the alternating image series

        sqrt(2/(pi t)) e^{-x^2/(2t)} sum_n (-1)^n e^{-2a(b+a/t) n^2} cosh(2axn/t)

    truncated at |n| <= n_max.  Returns (value, truncation_bound) where the
    bound dominates the omitted tail (first omitted term times a geometric
    factor).
    """
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    a, b = boundary.intercept, boundary.slope
    edge = a + b * t
    if not 0.0 <= x < edge:
        raise ValueError(f"x must lie in [0, a + b t) = [0, {edge}), got {x}")

    c = 2.0 * a * (b + a / t)
    g = 2.0 * a * x / t  # g < c exactly because x < a + b t
    s = 1.0
    for n in range(1, n_max + 1):
        # e^{-c n^2} cosh(g n) in split form: both exponents are negative on
        # the stated domain, so nothing can overflow even for huge intercepts
        term = 0.5 * (exp(-c * n * n + g * n) + exp(-c * n * n - g * n))
        s += 2.0 * (-1) ** n * term

    n1 = n_max + 1
    ratio = exp(min(-c * (2 * n1 + 1) + g, 0.0))
    assert ratio < 1.0, "series ratio must contract on the stated domain"
    tail = 2.0 * exp(-c * n1 * n1 + g * n1) / (1.0 - ratio)

    prefactor = sqrt(2.0 / (pi * t)) * exp(-x * x / (2.0 * t))
    return max(prefactor * s, 0.0), prefactor * tail


def taboo_band_probability(boundary: AffineBoundary, t, x_lo, x_hi, tol=1e-10, n_max=12):
    """Probability that the reflected path survives below the boundary up to
    time t and ends in [x_lo, x_hi]; quadrature of :func:`taboo_density`.

    The Gaussian prefactor at x_lo is pulled out of the integral so the
    quadrature works on O(1)-scaled values even when the band probability is
    exponentially small (the e^t-scaled expectations need this).
    """
    a, b = boundary.intercept, boundary.slope
    edge = a + b * t
    if not 0.0 <= x_lo <= x_hi <= edge:
        raise ValueError(f"band must satisfy 0 <= x_lo <= x_hi <= {edge}")
    if x_lo == x_hi:
        return 0.0

    log_scale = -x_lo * x_lo / (2.0 * t) + 0.5 * log(2.0 / (pi * t))

    def scaled(x):
        if x >= edge:
            return 0.0  # exact pair-cancellation limit at the boundary
        value, _ = taboo_density(boundary, t, x, n_max)
        return value * exp(-log_scale)

    integral = adaptive_simpson(scaled, x_lo, x_hi, tol=tol)
    if integral <= 0.0:
        return 0.0
    return min(exp(log(integral) + log_scale), 1.0)


def band_slope(y, t):
    """Slope sqrt(2) - (3/(2 sqrt 2)) (log t)/t + y/t of the census barrier."""
    return SQRT2 - LOG_COEFF * log(t) / t + y / t


def expected_band_count(y, t, n_max=12):
    """Expected number of reflected particles that stayed below the straight
    barrier slope*s + 1 and end in [slope*t - 1, slope*t]: by many-to-one,
    e^t times the single-path band survival probability.  Computed in log
    space so the e^t factor cannot overflow the intermediate values.
    """
    if t < 1.0 or not 0.0 <= y <= sqrt(t):
        warnings.warn(
            f"(y={y}, t={t}) outside the stated envelope range t >= 1, y in [0, sqrt(t)]; "
            "computing anyway",
            stacklevel=2,
        )
    beta = band_slope(y, t)
    p = taboo_band_probability(AffineBoundary(1.0, beta), t, beta * t - 1.0, beta * t)
    if p == 0.0:
        return 0.0
    return exp(t + log(p))


def theta_sums(n_max=12):
    """The two lattice sums governing the band survival asymptotics:

        S1 = sum_n (-1)^n e^{-sqrt(8) n^2} cosh(sqrt(8) n)   (telescopes to 0)
        S2 = sum_n (-1)^n n^2 e^{-sqrt(8) n^2} cosh(sqrt(8) n)

    Terms decay like e^{-sqrt(8) n(n-1)}, so n_max = 10 already reaches
    truncation error far below 1e-12.
    """
    if n_max < 5:
        raise ValueError(f"n_max must be >= 5, got {n_max}")
    s1 = 1.0
    s2 = 0.0
    for n in range(1, n_max + 1):
        term = (-1) ** n * exp(-SQRT8 * n * n) * cosh(SQRT8 * n)
        s1 += 2.0 * term
        s2 += 2.0 * n * n * term
    return s1, s2


def quantile_estimate(samples, delta, horizon=float("nan")):
    """Empirical delta-quantile with a binomial order-statistic 95% CI."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 20:
        raise ValueError(f"need at least 20 samples, got {samples.size}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    n = samples.size
    xs = np.sort(samples)
    k = max(1, int(np.floor(n * delta)))
    lo = int(binom.ppf(0.025, n, delta))
    hi = int(binom.ppf(0.975, n, delta))
    lo = min(max(lo, 1), n)
    hi = min(max(hi, 1), n)
    return QuantileEstimate(
        delta=float(delta),
        horizon=float(horizon),
        value=float(xs[k - 1]),
        ci_low=float(xs[lo - 1]),
        ci_high=float(xs[hi - 1]),
        n=n,
    )


def frontier_fit(t_list, medians):
    """Least squares of median(t) against (t, log t, 1)."""
    t = np.asarray(t_list, dtype=float)
    med = np.asarray(medians, dtype=float)
    if t.shape != med.shape:
        raise ValueError("t_list and medians must have matching shapes")
    if np.unique(t).size < 4:
        raise ValueError("need at least 4 distinct horizons")
    design = np.column_stack([t, np.log(t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, med, rcond=None)
    resid = med - design @ coef
    return FrontierFit(
        speed=float(coef[0]),
        log_coeff=float(coef[1]),
        intercept=float(coef[2]),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
    )


def dependence_statistic(pairs, x):
    """Plug-in estimate of P(M <= x, m >= -x) - P(M <= x)^2 with jackknife SE.

    ``pairs`` holds one (max, min) per replicate.  The statistic vanishes in
    the limit where the two extremes become independent (the two one-sided
    laws are symmetric), so its decay measures the two-sided dependence.
    """
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("pairs must be an (n, 2) array of (max, min)")
    n = arr.shape[0]
    if n < 100:
        raise ValueError(f"need at least 100 replicates, got {n}")
    both = (arr[:, 0] <= x) & (arr[:, 1] >= -x)
    one = arr[:, 0] <= x
    c_both = np.count_nonzero(both)
    c_one = np.count_nonzero(one)
    value = c_both / n - (c_one / n) ** 2

    jk = (c_both - both) / (n - 1) - ((c_one - one) / (n - 1)) ** 2
    se = sqrt((n - 1) / n * np.sum((jk - jk.mean()) ** 2))
    return DependenceEstimate(float(value), float(se), n)


def pair_overlap_exponent(a, b, r):
    """Growth exponent 2 - r - (b - a)^2 / (4 (1 - r)) of the expected number
    of particle pairs in speed-a and speed-b windows whose ancestral paths
    stay together past time r t; a negative value certifies decay."""
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if not 0.0 < r < 1.0:
        raise ValueError(f"need 0 < r < 1, got {r}")
    return 2.0 - r - (b - a) ** 2 / (4.0 * (1.0 - r))


def interval_count(snap, interval):
    """Number of alive particles with position in [lo, hi]."""
    lo, hi = interval
    pos = snap.positions
    return int(np.count_nonzero((pos >= lo) & (pos <= hi)))


def lln_count_ratios(runs, interval, t1, t2):
    """Per-replicate normalized count ratios between two nested horizons.

    Each run is a (snapshot at t1, snapshot at t2) pair from one replicate;
    the ratio R = [N_D(t2) sqrt(t2) e^{-t2}] / [N_D(t1) sqrt(t1) e^{-t1}]
    tends to 1 because both normalized counts converge to the same limit
    proportional to |D|.  Replicates with N_D(t1) = 0 are excluded and the
    exclusion count reported.
    """
    lo, hi = interval
    if not np.isfinite(lo) or not np.isfinite(hi) or not lo < hi:
        raise ValueError("interval must be finite with lo < hi")
    ratios = []
    excluded = 0
    for snap1, snap2 in runs:
        if not (snap1.horizon == t1 and snap2.horizon == t2):
            raise ValueError("run horizons do not match (t1, t2)")
        n1 = interval_count(snap1, interval)
        n2 = interval_count(snap2, interval)
        if n1 == 0:
            excluded += 1
            continue
        log_r = log(n2 / n1) if n2 > 0 else -np.inf
        log_r += 0.5 * (log(t2) - log(t1)) - (t2 - t1)
        ratios.append(exp(log_r) if np.isfinite(log_r) else 0.0)
    return np.asarray(ratios), excluded


def fpt_band_estimate(boundary: AffineBoundary, t, x_lo, x_hi, stream, n_paths=10**6, dt=1e-3):
    """Monte Carlo estimate (value, std_error) of the band survival
    probability, using bridge-corrected path weights: the independent
    cross-check for :func:`taboo_band_probability`."""
    if not 0.0 <= x_lo < x_hi:
        raise ValueError("band must satisfy 0 <= x_lo < x_hi")
    end, w = kernels.fpt_paths(
        stream.generator, boundary.intercept, boundary.slope, float(t), float(dt), int(n_paths)
    )
    vals = w * ((np.abs(end) >= x_lo) & (np.abs(end) <= x_hi))
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / sqrt(n_paths))
    return est, se

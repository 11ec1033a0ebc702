"""Point and variance estimators for a weighted cluster sample.

Everything here works on sorted incomes: the weighted CDF, the tail sums
``sum w'x' 1(x' >= x)`` and hence the Gini estimate and the linearized
cluster scores all come from prefix sums in O(n log n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .design import FrameSource, PopulationFrame, WeightedSample, compute_weights
from .errors import DegenerateSampleError, InsufficientReplicatesError, ParameterError


def z_quantile(alpha: float) -> float:
    """Upper ``alpha/2`` point of the standard normal."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return float(ndtri(1.0 - alpha / 2.0))


@dataclass(frozen=True)
class GiniEstimate:
    g_hat: float
    mu_hat: float
    v_n2: float
    n: int
    alpha: float
    ci_low: float
    ci_high: float
    width: float

    @property
    def se(self) -> float:
        return math.sqrt(self.v_n2 / self.n)


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Linearized score per cluster draw and its stratum mean."""

    u: np.ndarray
    draw_stratum: np.ndarray
    ubar: np.ndarray
    n_s: np.ndarray


# --------------------------------------------------------------------------
# sorted-array kernels

def _sorted_order(sample: WeightedSample):
    order = np.argsort(sample.x, kind="stable")
    return order, sample.x[order], sample.w[order]


def has_ties(xs: np.ndarray) -> bool:
    return bool(np.any(xs[1:] == xs[:-1]))


def cdf_and_tail(xs, ws, ties=None):
    """For ascending ``xs``: weighted mean, F(x_i) and sum_{x_j >= x_i} w_j x_j.

    Equal incomes share one CDF value (the weight at or below them) and one
    tail value (the weight-income mass at or above them).
    """
    wx = ws * xs
    mu = wx.sum()
    cw = np.cumsum(ws)
    cw /= cw[-1]            # F at the largest income is exactly 1
    cwx = np.cumsum(wx)
    if ties is None:
        ties = has_ties(xs)
    if ties:
        hi = np.searchsorted(xs, xs, side="right") - 1
        lo = np.searchsorted(xs, xs, side="left")
        F = cw[hi]
        T = mu - (cwx[lo] - wx[lo])
    else:
        F = cw
        T = mu - cwx + wx
    return mu, wx, F, T


def gini_from_sorted(mu, wx, F) -> float:
    if not mu > 0:
        raise DegenerateSampleError(f"weighted mean income is {mu}; Gini undefined")
    return 1.0 - 2.0 / mu * float(np.dot(wx, 1.0 - F))


def scores_from_sorted(xs, ws, draw, n_draws, g, mu, F, T) -> np.ndarray:
    half = (g + 1.0) / 2.0
    bracket = (F - half) * xs + T - mu * half
    return np.bincount(draw, weights=(2.0 / mu) * ws * bracket, minlength=n_draws)


def variance_from_scores(u, draw_stratum, n_s, n=None) -> tuple:
    """Returns ``(V^2, ubar)``; raises if a sampled stratum has one draw.

    ``n`` defaults to the total draw count.
    """
    n_s = np.asarray(n_s)
    S = len(n_s)
    present = n_s > 0
    if np.any(n_s[present] < 2):
        bad = [int(s) for s in np.flatnonzero(present & (n_s < 2))]
        raise InsufficientReplicatesError(f"strata {bad} have a single cluster draw")
    sums = np.bincount(draw_stratum, weights=u, minlength=S)
    ubar = np.divide(sums, n_s, out=np.zeros(S), where=present)
    dev = u - ubar[draw_stratum]
    ss = np.bincount(draw_stratum, weights=dev * dev, minlength=S)
    factor = np.divide(n_s, n_s - 1.0, out=np.zeros(S), where=present)
    if n is None:
        n = n_s.sum()
    return float(n * np.dot(factor, ss)), ubar


# --------------------------------------------------------------------------
# public estimators

def weighted_mean(sample: WeightedSample) -> float:
    if len(sample) == 0:
        raise ParameterError("empty sample")
    return math.fsum(sample.w * sample.x)


def empirical_cdf(sample: WeightedSample, x):
    """Weighted share of households with income ``<= x``."""
    if len(sample) == 0:
        raise ParameterError("empty sample")
    _, xs, ws = _sorted_order(sample)
    cw = np.concatenate(([0.0], np.cumsum(ws)))
    out = np.minimum(cw[np.searchsorted(xs, x, side="right")], 1.0)
    return float(out) if np.ndim(out) == 0 else out


def sample_quantile(sample: WeightedSample, p):
    """Smallest observed income whose weighted CDF reaches ``p``."""
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
        raise ParameterError(f"quantile level outside [0, 1]: {p}")
    if len(sample) == 0:
        raise ParameterError("empty sample")
    _, xs, ws = _sorted_order(sample)
    cw = np.cumsum(ws)
    # cw of a tie group's first member is below the group's CDF, but the
    # returned income is the same either way
    idx = np.minimum(np.searchsorted(cw, p_arr, side="left"), len(xs) - 1)
    out = xs[idx]
    return float(out) if np.ndim(out) == 0 else out


def gini_hat(sample: WeightedSample) -> float:
    """Plug-in Gini ``1 - (2/mu) sum w x (1 - F(x))``."""
    _, xs, ws = _sorted_order(sample)
    mu, wx, F, _ = cdf_and_tail(xs, ws)
    return gini_from_sorted(mu, wx, F)


def gini_pairwise_oracle(sample: WeightedSample) -> float:
    """``sum_i sum_j w_i w_j |x_i - x_j| / (2 mu)`` by brute force."""
    x, w = sample.x, sample.w
    mu = math.fsum(w * x)
    if not mu > 0:
        raise DegenerateSampleError(f"weighted mean income is {mu}; Gini undefined")
    D = float(w @ np.abs(x[:, None] - x[None, :]) @ w)
    return D / (2.0 * mu)


def lorenz_curve(sample: WeightedSample):
    """Knots ``(p, phi)`` of the estimated Lorenz curve, starting at (0, 0).

    Between knots the curve is linear, so the trapezoid rule integrates it
    exactly.
    """
    _, xs, ws = _sorted_order(sample)
    wx = ws * xs
    p = np.concatenate(([0.0], np.cumsum(ws)))
    phi = np.concatenate(([0.0], np.cumsum(wx))) / wx.sum()
    return p, phi


def lorenz_gini(sample: WeightedSample) -> float:
    p, phi = lorenz_curve(sample)
    return 1.0 - 2.0 * float(np.sum(np.diff(p) * (phi[1:] + phi[:-1]) / 2.0))


def _draw_labels(sample: WeightedSample):
    if sample.draw_stratum is not None:
        return sample.draw, sample.draw_stratum
    keys, draw = np.unique(np.stack([sample.stratum, sample.draw]), axis=1, return_inverse=True)
    return draw.ravel(), keys[0]


def linearized_scores(sample: WeightedSample, g_hat: float, mu_hat: float) -> ScoreTable:
    order, xs, ws = _sorted_order(sample)
    draw, draw_stratum = _draw_labels(sample)
    _, _, F, T = cdf_and_tail(xs, ws)
    u = scores_from_sorted(xs, ws, draw[order], len(draw_stratum), g_hat, mu_hat, F, T)
    n_s = np.bincount(draw_stratum, minlength=len(sample.n_s))
    sums = np.bincount(draw_stratum, weights=u, minlength=len(n_s))
    ubar = np.divide(sums, n_s, out=np.zeros(len(n_s)), where=n_s > 0)
    return ScoreTable(u, draw_stratum, ubar, n_s)


def variance_hat(scores: ScoreTable, n: int = None) -> float:
    """``n sum_s n_s/(n_s - 1) sum_c (u_sc - ubar_s)^2``."""
    v2, _ = variance_from_scores(scores.u, scores.draw_stratum, scores.n_s, n)
    return v2


def estimate(sample: WeightedSample, alpha: float = 0.05) -> GiniEstimate:
    """Gini, its linearization variance and the normal interval in one pass."""
    order, xs, ws = _sorted_order(sample)
    draw, draw_stratum = _draw_labels(sample)
    mu, wx, F, T = cdf_and_tail(xs, ws)
    g = gini_from_sorted(mu, wx, F)
    u = scores_from_sorted(xs, ws, draw[order], len(draw_stratum), g, mu, F, T)
    n_s = np.bincount(draw_stratum, minlength=len(sample.n_s))
    v2, _ = variance_from_scores(u, draw_stratum, n_s)
    n = int(n_s.sum())
    lo, hi, width = confidence_interval(g, v2, n, alpha)
    return GiniEstimate(g, mu, v2, n, alpha, lo, hi, width)


def optimal_C(xi2: float, alpha: float, omega: float) -> int:
    """Smallest total cluster count giving interval width <= omega."""
    if not xi2 > 0:
        raise ParameterError("xi2 must be positive")
    if not omega > 0:
        raise ParameterError("omega must be positive")
    z = z_quantile(alpha)
    return max(1, math.ceil(4.0 * z * z * xi2 / omega ** 2))


def stratum_allocation(C: float, allocation) -> list:
    """Per-stratum ``(C a_s, ceil(C a_s))`` pairs."""
    return [(C * a, math.ceil(C * a)) for a in allocation]


def confidence_interval(g_hat: float, v2: float, n: int, alpha: float) -> tuple:
    """``g_hat -/+ z V / sqrt(n)`` as ``(low, high, width)``."""
    if v2 < 0:
        raise ParameterError("v2 must be nonnegative")
    if n < 1:
        raise ParameterError("n must be at least 1")
    half = z_quantile(alpha) * math.sqrt(v2 / n)
    return g_hat - half, g_hat + half, 2.0 * half


def split_clusters(n: int, allocation) -> list:
    """Integer per-stratum counts summing to ``n`` (largest remainder)."""
    raw = [n * a for a in allocation]
    out = [math.floor(r) for r in raw]
    rest = n - sum(out)
    for i in sorted(range(len(raw)), key=lambda i: (out[i] - raw[i], i))[:rest]:
        out[i] += 1
    return out


@dataclass(frozen=True, eq=False)
class FixedNResult:
    n: int
    n_s: tuple
    widths: np.ndarray
    g_hats: np.ndarray
    thresholds: tuple

    @property
    def mean_width(self) -> float:
        return float(self.widths.mean())

    @property
    def sd_width(self) -> float:
        return float(self.widths.std(ddof=1)) if len(self.widths) > 1 else 0.0

    def exceed(self, threshold: float) -> float:
        return float(np.mean(self.widths > threshold))


def fixed_n_experiment(frame: PopulationFrame, n: int, alpha: float, reps: int, seed,
                       k: int = 2, thresholds=(0.015,), substratify: bool = True) -> FixedNResult:
    """Interval widths from ``reps`` independent draws of ``n`` clusters."""
    if n > frame.H:
        raise ParameterError(f"n = {n} exceeds the frame's {frame.H} clusters")
    if reps < 1:
        raise ParameterError("reps must be at least 1")
    n_s = split_clusters(n, frame.allocation)
    if min(n_s) < 2:
        raise InsufficientReplicatesError(f"allocation {n_s} leaves a stratum with < 2 clusters")
    widths = np.empty(reps)
    gs = np.empty(reps)
    for r in range(reps):
        src = FrameSource(frame, k, np.random.SeedSequence(seed, spawn_key=(r,)), substratify)
        draws = [d for s, m in enumerate(n_s) for d in src.draw(s, m)]
        est = estimate(compute_weights(frame, draws), alpha)
        widths[r] = est.width
        gs[r] = est.g_hat
    return FixedNResult(n, tuple(n_s), widths, gs, tuple(thresholds))

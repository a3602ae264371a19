"""Evaluation metrics: relative errors, rate fits, identifiability gaps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HyperParams, ObservationSeries, RngStream

_TAG_GAP_REP = 301


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log y against log x.

    `flat` marks the degenerate case of an (effectively) all-zero error
    curve, where no log-log slope exists.
    """

    slope: float
    intercept: float
    r_squared: float
    flat: bool = False


def rrmse(Y: ObservationSeries, Y_star: ObservationSeries) -> float:
    """Relative root mean square error: sqrt(mean over all coordinates of
    ((Y - Y*)/Y*)^2).  Any zero coordinate in Y* is a domain error; callers
    with leading zero observations drop those steps first."""
    if len(Y) != len(Y_star) or Y.dim != Y_star.dim:
        raise ValueError("series shapes differ")
    if not np.array_equal(Y.times, Y_star.times):
        raise ValueError("series time grids differ")
    ref = Y_star.values
    if np.any(ref == 0.0):
        raise ValueError("Y_star contains zero coordinates; rrmse undefined")
    rel = (Y.values - ref) / ref
    return float(np.sqrt(np.mean(rel**2)))


def rae(h_hat: HyperParams, h_star: HyperParams) -> float:
    """Relative absolute error |h_hat - h*| / |h*|; vectors take the worst
    coordinate.  Labels must match (order-insensitive)."""
    if set(h_hat.labels) != set(h_star.labels):
        raise ValueError(f"label mismatch: {h_hat.labels} vs {h_star.labels}")
    ref = np.array([h_star[lab] for lab in h_hat.labels])
    if np.any(ref == 0.0):
        raise ValueError("h_star has a zero coordinate; rae undefined")
    return float(np.max(np.abs((h_hat.values - ref) / ref)))


def final_rae(trace, window: int, h_star: HyperParams) -> float:
    """RAE of the arithmetic mean of the last `window` estimates."""
    if window > len(trace):
        raise ValueError(f"window {window} exceeds trace length {len(trace)}")
    if window < 1:
        raise ValueError("window must be >= 1")
    mean_tail = trace.mean[len(trace) - window :].mean(axis=0)
    return rae(HyperParams(trace.labels, mean_tail), h_star)


def loglog_slope(xs, ys) -> RateFit:
    """Ordinary least squares of log(y) on log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 2:
        raise ValueError("need at least two paired points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit requires strictly positive data")
    lx, ly = np.log(xs), np.log(ys)
    vx = np.mean((lx - lx.mean()) ** 2)
    cov = np.mean((lx - lx.mean()) * (ly - ly.mean()))
    slope = cov / vx
    intercept = ly.mean() - slope * lx.mean()
    ss_res = np.sum((ly - (intercept + slope * lx)) ** 2)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(slope=float(slope), intercept=float(intercept), r_squared=float(r2))


def _average_ranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size)
    sv = v[order]
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    """Spearman rank correlation with average-rank ties; returns 0 when
    either side is constant."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 2:
        raise ValueError("need at least two paired points")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    sx = rx - rx.mean()
    sy = ry - ry.mean()
    denom = np.sqrt(np.sum(sx**2) * np.sum(sy**2))
    if denom == 0.0:
        return 0.0
    return float(np.sum(sx * sy) / denom)


def identifiability_gap(h: HyperParams, h_star: HyperParams, model_factory,
                        t: int, reps: int, rng: RngStream) -> float:
    """Monte Carlo estimate of the squared distance between the population
    observations at step t under h versus h*.

    Each replicate builds the two simulators from the *same* substream
    (paired randomness, noise disabled), so the gap is exactly zero at
    h = h* and reflects only the hyperparameter difference otherwise.
    """
    if reps < 2:
        raise ValueError("need at least 2 replicates")
    total = 0.0
    for r in range(reps):
        s = rng.child(_TAG_GAP_REP, r)
        sim_h = model_factory(h, s)
        sim_star = model_factory(h_star, s)
        for _ in range(t):
            sim_h.advance()
            sim_star.advance()
        diff = np.atleast_1d(sim_h.observe()) - np.atleast_1d(sim_star.observe())
        total += float(np.sum(diff**2))
    return total / reps

"""Statistical characterisation of estimators: bias / RMSE / skewness /
excess kurtosis, BCa bootstrap intervals, and the amplitude-sweep
benchmark harness.

Moment estimators are population-style (divide by n) to match the
definitional formulas the metrics are reported against; skewness and
kurtosis are therefore slightly biased at small n, which is fine for the
benchmark sample sizes used here.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm as _norm

from . import qae as qae_mod


@dataclass(frozen=True)
class EstimatorStats:
    bias: float
    mse: float
    rmse: float
    skewness: float
    kurtosis: float
    excess_kurtosis: float
    n_samples: int
    degenerate: bool = False  # all samples equal: skew/kurtosis undefined

    def to_dict(self) -> dict:
        return {
            "bias": self.bias,
            "mse": self.mse,
            "rmse": self.rmse,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
            "excess_kurtosis": self.excess_kurtosis,
            "n_samples": self.n_samples,
            "degenerate": self.degenerate,
        }


def estimator_stats(samples, true_value: float) -> EstimatorStats:
    """Bias and MSE about ``true_value``; central moments about the sample
    mean.  Needs at least four samples (moments up to order four).
    Samples are sorted internally, so the result is exactly invariant
    under permutation of the input."""
    s = np.sort(np.asarray(samples, dtype=float))
    if s.size < 4:
        raise ValueError("need at least 4 samples")
    mean = float(s.mean())
    bias = mean - true_value
    mse = float(np.mean((s - true_value) ** 2))
    mu2 = float(np.mean((s - mean) ** 2))
    scale = max(1.0, abs(mean))
    if mu2 <= (1e-14 * scale) ** 2:
        return EstimatorStats(bias, mse, math.sqrt(mse), float("nan"),
                              float("nan"), float("nan"), s.size, degenerate=True)
    mu3 = float(np.mean((s - mean) ** 3))
    mu4 = float(np.mean((s - mean) ** 4))
    skew = mu3 / mu2**1.5
    kurt = mu4 / mu2**2
    return EstimatorStats(bias, mse, math.sqrt(mse), skew, kurt, kurt - 3.0, s.size)


_NAMED_STATISTICS = {
    "mean": np.mean,
    "median": np.median,
    "std": np.std,
}


def bootstrap_ci(samples, statistic, level: float = 0.68,
                 n_resamples: int = 1000, seed: int = 0) -> tuple[float, float]:
    """Bias-corrected and accelerated bootstrap interval.

    ``statistic`` is a callable on a 1-D sample array or one of the tags
    "mean" / "median" / "std".  z0 comes from the resample CDF at the
    point estimate, the acceleration from the jackknife skewness.
    Deterministic under ``seed``; degenerate (all-equal) samples give a
    zero-width interval.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if n_resamples < 100:
        raise ValueError("need at least 100 resamples")
    stat = _NAMED_STATISTICS.get(statistic, statistic)
    s = np.asarray(samples, dtype=float)
    n = s.size
    if n < 2 or np.all(s == s[0]):
        v = float(stat(s))
        return (v, v)
    point = float(stat(s))
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_resamples, n))
    boot = np.array([float(stat(s[row])) for row in idx])
    below = float(np.sum(boot < point) + 0.5 * np.sum(boot == point))
    frac = min(max(below / n_resamples, 1.0 / (2 * n_resamples)),
               1.0 - 1.0 / (2 * n_resamples))
    z0 = float(_norm.ppf(frac))
    jack = np.array([float(stat(np.delete(s, i))) for i in range(n)])
    jm = jack.mean()
    num = float(np.sum((jm - jack) ** 3))
    den = float(np.sum((jm - jack) ** 2)) ** 1.5
    a = num / (6.0 * den) if den > 0 else 0.0
    alpha = 1.0 - level
    out = []
    for z in (_norm.ppf(alpha / 2.0), _norm.ppf(1.0 - alpha / 2.0)):
        adj = z0 + (z0 + z) / (1.0 - a * (z0 + z))
        out.append(float(_norm.cdf(adj)))
    lo = float(np.quantile(boot, out[0]))
    hi = float(np.quantile(boot, out[1]))
    return (min(lo, hi), max(lo, hi))


# --------------------------------------------------------------------------
# the amplitude-sweep harness


_METRICS = ("bias", "rmse", "skewness", "excess_kurtosis")


@dataclass
class SweepReport:
    qae_kind: str
    amplitudes: list
    q_list: list
    repeats: int
    seed: int
    cells: dict = field(default_factory=dict)  # (a, q) -> per-metric dict
    fitted_conservative: dict = field(default_factory=dict)  # a -> max RMSE q^(l/2)
    fitted_lsq: dict = field(default_factory=dict)           # a -> log-log fit

    def aggregate(self) -> dict:
        vals = sorted(self.fitted_conservative.values())
        if not vals:
            return {}
        return {
            "max": vals[-1],
            "median": float(np.median(vals)),
            "min": vals[0],
        }

    def to_dict(self) -> dict:
        return {
            "qae_kind": self.qae_kind,
            "amplitudes": self.amplitudes,
            "q_list": self.q_list,
            "repeats": self.repeats,
            "seed": self.seed,
            "cells": {
                f"{a}|{q}": v for (a, q), v in sorted(self.cells.items())
            },
            "fitted_conservative": {str(a): v for a, v in sorted(self.fitted_conservative.items())},
            "fitted_lsq": {str(a): v for a, v in sorted(self.fitted_lsq.items())},
            "aggregate": self.aggregate(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def to_csv(self) -> str:
        lines = ["amplitude,q,metric,value,ci_lo,ci_hi"]
        for (a, q), cell in sorted(self.cells.items()):
            for m in _METRICS:
                lo, hi = cell[f"{m}_ci"]
                lines.append(f"{a},{q},{m},{cell[m]!r},{lo!r},{hi!r}")
        return "\n".join(lines) + "\n"


def _estimates(qae_kind, a, q, repeats, seed, p_max_fail):
    if qae_kind == "PAM":
        rng = np.random.default_rng(seed)
        return rng.binomial(q, a, size=repeats) / q
    if qae_kind == "MLQAE":
        return qae_mod._mlqae_batch(a, q, repeats, seed)
    if qae_kind == "LCU":
        return qae_mod._lcu_batch(a, q, repeats, seed, p_max_fail=p_max_fail)
    if qae_kind == "IQAE":
        out = np.empty(repeats)
        base = np.random.SeedSequence((seed, 7)).generate_state(repeats)
        for r in range(repeats):
            out[r] = qae_mod.iqae_from_amplitude(a, q, int(base[r])).a_hat
        return out
    raise ValueError(f"unknown QAE kind {qae_kind!r}")


def amplitude_sweep(
    qae_kind: str,
    amplitude_grid,
    q_list,
    repeats: int = 500,
    seed: int = 0,
    n_resamples: int = 200,
    p_max_fail: float = 0.5,
) -> SweepReport:
    """Run the QAE repeatedly on the two-qubit benchmark circuit across an
    amplitude grid and use budgets; report the four robustness metrics
    with BCa intervals plus fitted convergence constants per amplitude.

    The conservative fit is max over q of RMSE * q^(lambda/2); the
    least-squares fit regresses log RMSE on log q with slope -lambda/2.
    Each (amplitude, q) cell derives its own seed substream, so the report
    is reproducible regardless of evaluation order.
    """
    amplitude_grid = [float(a) for a in amplitude_grid]
    q_list = [int(q) for q in q_list]
    if repeats < 100:
        raise ValueError("need at least 100 repeats")
    if any(not 0.0 < a < 1.0 for a in amplitude_grid):
        raise ValueError("amplitudes must lie in (0, 1)")
    lam = 1 if qae_kind == "PAM" else 2
    report = SweepReport(qae_kind, amplitude_grid, q_list, repeats, seed)
    for ai, a in enumerate(amplitude_grid):
        rmses = []
        for qi, q in enumerate(q_list):
            sub = int(np.random.SeedSequence((seed, ai, qi)).generate_state(1)[0])
            est = _estimates(qae_kind, a, q, repeats, sub, p_max_fail)
            st = estimator_stats(est, a)
            cell = {
                "bias": st.bias,
                "rmse": st.rmse,
                "skewness": st.skewness,
                "excess_kurtosis": st.excess_kurtosis,
            }
            for name, fn in (
                ("bias", lambda x: float(np.mean(x)) - a),
                ("rmse", lambda x: float(np.sqrt(np.mean((x - a) ** 2)))),
                ("skewness", lambda x: estimator_stats(x, a).skewness),
                ("excess_kurtosis", lambda x: estimator_stats(x, a).excess_kurtosis),
            ):
                cell[f"{name}_ci"] = bootstrap_ci(
                    est, fn, 0.68, n_resamples, seed=sub + 1
                )
            report.cells[(a, q)] = cell
            rmses.append(st.rmse)
        rmses = np.array(rmses)
        qs = np.array(q_list, dtype=float)
        report.fitted_conservative[a] = float(np.max(rmses * qs ** (lam / 2.0)))
        slope_known = -lam / 2.0
        # least-squares intercept of log rmse = log c + slope * log q
        logc = np.mean(np.log(np.maximum(rmses, 1e-300)) - slope_known * np.log(qs))
        report.fitted_lsq[a] = float(np.exp(logc))
    return report

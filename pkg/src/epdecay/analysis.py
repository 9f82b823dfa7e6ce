"""Decay-exponent estimation and verdicts against the predicted rates.

A norm time series is reduced to a power-law fit in log(1+t) coordinates
(matching the (1+t)^e shape of the rate statements), with a sliding-window
drift diagnostic to flag non-power-law behavior such as exponential decay.
Fits on periodic-box nonlinear runs are only trusted inside the wrap-around
window t <= (L/2 - data_radius)/c_max, after which re-entrant waves
contaminate the whole-space decay measurement.

Verdict tolerances are configuration, not code: quadrature-grade linear
series get a tight band, finite-box nonlinear runs a loose one, and the
disparity check on nonlinear runs is one-sided (the rates are proven as
upper bounds there).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "NormSeries",
    "DecayFit",
    "TrustWindow",
    "AnalysisConfig",
    "Verdict",
    "AnalysisError",
    "fit_decay",
    "sliding_exponent",
    "compare_to_prediction",
    "negative_norm_monitor",
]


class AnalysisError(ValueError):
    """Invalid series or fit request."""


@dataclass(frozen=True)
class NormSeries:
    """A sampled norm history with provenance."""

    label: str
    times: np.ndarray
    values: np.ndarray
    source: str = "nonlinear"          # "linear" | "nonlinear"
    provenance: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise AnalysisError("times and values must be matching 1-d arrays")
        if len(t) and np.any(np.diff(t) <= 0):
            raise AnalysisError("times must be strictly increasing")
        if np.any(v < 0):
            raise AnalysisError("norm values must be nonnegative")
        if self.source not in ("linear", "nonlinear"):
            raise AnalysisError(f"unknown source {self.source!r}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def restrict(self, t0: float, t1: float) -> "NormSeries":
        m = (self.times >= t0) & (self.times <= t1)
        return NormSeries(self.label, self.times[m], self.values[m],
                          self.source, dict(self.provenance))

    def value_at(self, t: float) -> float:
        """Value at the first sample time >= t."""
        idx = np.searchsorted(self.times, t)
        if idx >= len(self.times):
            raise AnalysisError(f"series {self.label} has no sample at t >= {t}")
        return float(self.values[idx])


@dataclass(frozen=True)
class DecayFit:
    """Least-squares power-law fit of a norm series in log(1+t).

    Windows start no earlier than t = 1: the log(1+t) abscissa is
    meaningless for exponent estimation before the rates' own time scale.
    """

    exponent: float
    intercept: float
    window: tuple[float, float]
    residual_rms: float
    n_samples: int
    trusted: bool = True

    def __post_init__(self):
        t0, t1 = self.window
        if not (t1 > t0 >= 1.0):
            raise AnalysisError(f"bad fit window {self.window}: need t1 > t0 >= 1")


@dataclass(frozen=True)
class TrustWindow:
    """Time range on the torus before wrap-around reaches the data.

    c_max = 1 + sqrt(2)*margin: unit sound speed at the normalized
    background plus a dispersive allowance for the plasma branch.
    """

    box_length: float
    data_radius: float
    margin: float = 0.5

    @property
    def c_max(self) -> float:
        return 1.0 + np.sqrt(2.0) * self.margin

    @property
    def t_wrap(self) -> float:
        t = (self.box_length / 2.0 - self.data_radius) / self.c_max
        if not t > 0:
            raise AnalysisError(
                f"no trust window: data radius {self.data_radius} too large "
                f"for box {self.box_length}"
            )
        return t

    def contains(self, t: float) -> bool:
        return 0.0 <= t <= self.t_wrap


@dataclass(frozen=True)
class AnalysisConfig:
    """Verdict tolerances; linear quadrature vs finite-box nonlinear runs."""

    tol_linear: float = 0.03
    tol_nonlinear: float = 0.15
    min_samples: int = 8
    transient_time: float = 1.0
    boundedness_slack: float = 1.1


@dataclass(frozen=True)
class Verdict:
    """One PASS/FAIL record of a measured quantity against its prediction."""

    quantity: str
    passed: bool
    predicted: float
    measured: float
    tolerance: float
    window: tuple[float, float]
    detail: str = ""

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def fit_decay(series: NormSeries, window: tuple[float, float] | None = None,
              config: AnalysisConfig = AnalysisConfig(),
              trust: TrustWindow | None = None) -> DecayFit:
    """Least squares of log(value) against log(1+t) over the window."""
    if window is None:
        t_end = float(series.times[-1]) if len(series.times) else 0.0
        window = (max(1.0, config.transient_time, float(series.times[0])), t_end)
    t0, t1 = window
    sub = series.restrict(t0, t1)
    if len(sub.times) < config.min_samples:
        raise AnalysisError(
            f"need at least {config.min_samples} samples in window, got {len(sub.times)}"
        )
    if np.any(sub.values <= 0):
        raise AnalysisError("fit window contains zero or negative norm values")
    x = np.log1p(sub.times)
    y = np.log(sub.values)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    trusted = True
    if trust is not None and series.source == "nonlinear":
        trusted = trust.contains(t1)
    return DecayFit(
        exponent=float(coef[0]),
        intercept=float(coef[1]),
        window=(t0, t1),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        n_samples=len(sub.times),
        trusted=trusted,
    )


def sliding_exponent(series: NormSeries, n_windows: int = 6,
                     config: AnalysisConfig = AnalysisConfig()):
    """Per-window exponents across the series; drift flags non-power laws.

    Returns (window centers, exponents).  A pure power law keeps the
    exponent flat to within the fit residual; an exponential drifts
    monotonically without bound.
    """
    t = series.times
    if len(t) < config.min_samples * 2:
        raise AnalysisError("series too short for a sliding-window scan")
    lo, hi = max(float(t[0]), 1.0), float(t[-1])
    if hi <= lo:
        raise AnalysisError("series has no samples past t = 1")
    edges = np.geomspace(lo + 1.0, hi + 1.0, n_windows + 1) - 1.0
    centers, exps = [], []
    cfg = AnalysisConfig(tol_linear=config.tol_linear,
                         tol_nonlinear=config.tol_nonlinear,
                         min_samples=max(3, config.min_samples // 2),
                         transient_time=config.transient_time)
    for w0, w1 in zip(edges[:-1], edges[1:]):
        sub = series.restrict(w0, w1)
        if len(sub.times) < cfg.min_samples or np.any(sub.values <= 0):
            continue
        f = fit_decay(series, (w0, w1), config=cfg)
        centers.append(0.5 * (w0 + w1))
        exps.append(f.exponent)
    return np.asarray(centers), np.asarray(exps)


def compare_to_prediction(fit: DecayFit, l: int, data_class: tuple[str, float],
                          quantity: str, source: str = "linear",
                          config: AnalysisConfig = AnalysisConfig()) -> Verdict:
    """PASS/FAIL of a fitted exponent against the predicted rate.

    Linear-source fits are held to the two-sided band (the propagator
    attains the rates for generic profiles); nonlinear disparity fits are
    one-sided, measured <= predicted + tol.
    """
    from .linear import predicted_exponent

    if not fit.trusted:
        raise AnalysisError("fit lies outside the trust window; refusing verdict")
    predicted = predicted_exponent(l, data_class, quantity)
    tol = config.tol_linear if source == "linear" else config.tol_nonlinear
    if source == "nonlinear" and quantity == "disparity":
        passed = fit.exponent <= predicted + tol
        detail = "one-sided (proven as upper bound)"
    else:
        passed = abs(fit.exponent - predicted) <= tol
        detail = "two-sided"
    kind, value = data_class
    return Verdict(
        quantity=f"{quantity} l={l} {kind}={value:g}",
        passed=passed,
        predicted=predicted,
        measured=fit.exponent,
        tolerance=tol,
        window=fit.window,
        detail=detail,
    )


def negative_norm_monitor(series_map: Mapping[str, NormSeries],
                          t_wrap: float | None = None,
                          config: AnalysisConfig = AnalysisConfig()) -> list[Verdict]:
    """Boundedness verdicts for the monitored negative norms.

    Each series passes when its maximum over the trusted window stays
    within the configured slack of its value at the end of the initial
    transient.
    """
    if not series_map:
        raise AnalysisError("no negative-norm series to monitor")
    verdicts = []
    for label, series in series_map.items():
        t1 = float(series.times[-1]) if t_wrap is None else min(t_wrap, float(series.times[-1]))
        ref = series.value_at(config.transient_time)
        sub = series.restrict(config.transient_time, t1)
        if len(sub.times) == 0:
            raise AnalysisError(f"series {label} has no samples in the trusted window")
        peak = float(sub.values.max())
        bound = config.boundedness_slack * ref
        passed = bool(peak <= bound) if ref > 0 else bool(peak == 0.0)
        verdicts.append(Verdict(
            quantity=f"boundedness {label}",
            passed=passed,
            predicted=bound,
            measured=peak,
            tolerance=config.boundedness_slack,
            window=(config.transient_time, t1),
            detail=f"reference at t={config.transient_time:g}: {ref:.6e}",
        ))
    return verdicts

"""Time-dependent reproduction number estimation and smoothing.

The estimator attributes each day's case mass probabilistically to
earlier days through the serial-interval pmf and averages the resulting
expected secondary counts per primary case:

    R(t) = sum_{s > t} N_s * w(s - t) / sum_{u < s} N_u * w(s - u)

with w defined on lags 1..L. Days with no cases, days within L of the
series end (right-censoring), and days depending on an empty attribution
denominator are marked invalid rather than guessed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import Calendar, IncidenceSeries, UnitId
from .errors import EmptySeries, InvalidParams, InvalidWindow


@dataclass(frozen=True)
class SerialInterval:
    """Pmf w(1..L) over transmission lags in days; no same-day transmission."""

    pmf: tuple[float, ...]

    def __post_init__(self):
        if len(self.pmf) < 1:
            raise InvalidParams("serial interval needs at least one lag")
        if any((not math.isfinite(p)) or p < 0 for p in self.pmf):
            raise InvalidParams("serial interval probabilities must be >= 0 and finite")
        if abs(sum(self.pmf) - 1.0) > 1e-9:
            raise InvalidParams("serial interval pmf must sum to 1")

    @property
    def max_lag(self) -> int:
        return len(self.pmf)

    def w(self, tau: int) -> float:
        """Probability of a transmission lag of `tau` days."""
        return self.pmf[tau - 1] if 1 <= tau <= len(self.pmf) else 0.0


@dataclass(frozen=True)
class RtSeries:
    """Per-day reproduction number estimates with a validity mask."""

    unit: UnitId
    calendar: Calendar
    values: tuple[float, ...]
    valid: tuple[bool, ...]

    def __post_init__(self):
        if not (len(self.values) == len(self.valid) == self.calendar.length):
            raise ValueError("values/valid length must match calendar")
        for v, ok in zip(self.values, self.valid):
            if ok and (not math.isfinite(v) or v < 0):
                raise ValueError("valid R(t) values must be finite and >= 0")


def discretize_gamma_si(mean: float, sd: float, max_lag: int) -> SerialInterval:
    """Discretize a gamma distribution onto integer lags 1..max_lag.

    w(tau) = F(tau + 0.5) - F(tau - 0.5) for tau < max_lag; the last bin
    absorbs the right tail; the result is renormalized to sum exactly 1.
    """
    if mean <= 0 or sd <= 0 or max_lag < 1:
        raise InvalidParams("need mean > 0, sd > 0, max_lag >= 1")
    shape = (mean / sd) ** 2
    scale = sd * sd / mean
    taus = np.arange(1, max_lag + 1, dtype=float)
    upper = stats.gamma.cdf(taus + 0.5, a=shape, scale=scale)
    lower = stats.gamma.cdf(taus - 0.5, a=shape, scale=scale)
    w = upper - lower
    w[-1] = 1.0 - lower[-1]
    total = w.sum()
    if total <= 0:
        raise InvalidParams("degenerate discretization")
    return SerialInterval(tuple(w / total))


def estimate_rt(series: IncidenceSeries, si: SerialInterval) -> RtSeries:
    """Wallinga-Teunis style estimate of R(t) from one incidence series."""
    n = np.asarray(series.counts, dtype=float)
    t_len = len(n)
    if t_len == 0 or float(n.sum()) == 0.0:
        raise EmptySeries(f"no case mass for unit {series.unit.id!r}")
    lags = si.max_lag
    w = np.asarray(si.pmf, dtype=float)

    # lam[s] = sum_{tau=1..min(s,L)} N[s-tau] * w(tau): the attribution
    # denominator, truncated at the window start like the numerator.
    lam = np.zeros(t_len)
    for tau in range(1, lags + 1):
        if tau >= t_len:
            break
        lam[tau:] += n[:-tau] * w[tau - 1]

    values = [0.0] * t_len
    valid = [False] * t_len
    for t in range(t_len):
        if n[t] == 0.0 or t >= t_len - lags:
            continue
        total = 0.0
        ok = True
        for tau in range(1, lags + 1):
            s = t + tau
            if s >= t_len or w[tau - 1] == 0.0:
                continue
            if n[s] == 0.0:
                continue
            if lam[s] == 0.0:
                ok = False
                break
            total += n[s] * w[tau - 1] / lam[s]
        if ok:
            values[t] = total
            valid[t] = True
    return RtSeries(series.unit, series.calendar, tuple(values), tuple(valid))


def smooth_rt(rt: RtSeries, window: int = 7) -> RtSeries:
    """Centered moving average over valid days only.

    An output day is valid iff at least ceil(window/2) of the days in its
    window are valid. window=1 is the identity.
    """
    if window < 1 or window % 2 == 0:
        raise InvalidWindow(f"window must be odd and >= 1, got {window}")
    if window == 1:
        return rt
    half = window // 2
    need = (window + 1) // 2
    t_len = rt.calendar.length
    values = [0.0] * t_len
    valid = [False] * t_len
    for t in range(t_len):
        lo, hi = max(0, t - half), min(t_len, t + half + 1)
        vals = [rt.values[i] for i in range(lo, hi) if rt.valid[i]]
        if len(vals) >= need:
            values[t] = sum(vals) / len(vals)
            valid[t] = True
    return RtSeries(rt.unit, rt.calendar, tuple(values), tuple(valid))

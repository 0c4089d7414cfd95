"""Decay-law fitting for diagnostic time series.

Exponential laws are fitted as straight lines in ``(t, log y)``, algebraic laws
in ``(log t, log y)``. Windows default to the late half of the series once any
flat tail (a numerical floor) has been trimmed away.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .errors import Inconclusive, InsufficientData, NonpositiveValue

MIN_POINTS = 8
MIN_CLASSIFY = 16


@dataclass(frozen=True)
class RateFit:
    law: str  # "exponential" or "algebraic"
    value: float  # rate or exponent (positive for decay)
    window: tuple
    r_squared: float
    residual_rms: float
    floor_detected: bool
    intercept: float = 0.0
    n_points: int = 0

    def envelope(self, t):
        """Fitted curve evaluated at ``t``."""
        t = np.asarray(t, dtype=float)
        if self.law == "exponential":
            return np.exp(self.intercept - self.value * t)
        return np.exp(self.intercept) * t ** (-self.value)

    def summary(self):
        name = "rate" if self.law == "exponential" else "exponent"
        return (f"{self.law} {name}={self.value:.6g} window=[{self.window[0]:.6g}, {self.window[1]:.6g}] "
                f"r2={self.r_squared:.6f} rms={self.residual_rms:.3g} floor={self.floor_detected}")


def _clean(t, y, positive_t=False):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be matching 1-D arrays")
    ok = np.isfinite(t) & np.isfinite(y)
    t, y = t[ok], y[ok]
    if np.any(y <= 0):
        raise NonpositiveValue(f"series contains nonpositive values (min {y.min():.3g})")
    if positive_t and np.any(t <= 0):
        raise NonpositiveValue("algebraic fits need t > 0")
    return t, y


def _line(u, w):
    slope, intercept = np.polyfit(u, w, 1)
    resid = w - (slope * u + intercept)
    ss_tot = float(np.sum((w - w.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(intercept), min(max(r2, 0.0), 1.0), float(np.sqrt(np.mean(resid ** 2)))


def _abscissa(law, t):
    return t if law == "exponential" else np.log(t)


def trim_floor(t, y, law="exponential"):
    """Drop a flat tail: if the last quartile has flattened, keep only points a decade above it."""
    n = len(t)
    if n < MIN_POINTS:
        return t, y
    u, w = _abscissa(law, t), np.log(y)
    slope = _line(u, w)[0]
    q = max(n // 4, 3)
    tail_slope = _line(u[-q:], w[-q:])[0]
    level = np.median(y[-max(n // 10, 2):])
    if not abs(tail_slope) < 0.1 * abs(slope):
        # a shorter floor: trailing run within a factor 3 of the last values, lasting
        # far longer than the bulk decay rate would allow
        level = np.median(y[-3:])
        run = np.nonzero(y > 3.0 * level)[0]
        start = run[-1] + 1 if run.size else 0
        if n - start < 3 or slope == 0 or u[-1] - u[start] < 3.0 * np.log(3.0) / abs(slope):
            return t, y
    above = np.nonzero(y > 10.0 * level)[0]
    if above.size == 0:
        return t[:0], y[:0]
    last = above[-1] + 1
    return t[:last], y[:last]


def _late_half(t, y):
    start = 0.5 * (t[0] + t[-1])
    keep = t >= start
    return t[keep], y[keep]


def _select(t, y, window, law):
    if window is None:
        t, y = trim_floor(t, y, law)
        if len(t) == 0:
            raise InsufficientData("series is entirely at its floor")
        return _late_half(t, y)
    lo, hi = window
    keep = (t >= lo) & (t <= hi)
    return t[keep], y[keep]


def _fit(law, t, y, window):
    t, y = _clean(t, y, positive_t=(law == "algebraic"))
    tw, yw = _select(t, y, window, law)
    if len(tw) < MIN_POINTS:
        raise InsufficientData(f"{len(tw)} points in the fit window, need {MIN_POINTS}")
    u, w = _abscissa(law, tw), np.log(yw)
    slope, intercept, r2, rms = _line(u, w)
    q = max(len(tw) // 4, 3)
    tail = _line(u[-q:], w[-q:])[0]
    floor = bool(abs(tail) < 0.1 * abs(slope)) if slope != 0 else False
    return RateFit(law, -slope, (float(tw[0]), float(tw[-1])), r2, rms, floor, intercept, len(tw))


def fit_exponential(t, y, window=None):
    """Least-squares rate of ``y ~ C exp(-rate t)``."""
    return _fit("exponential", t, y, window)


def fit_algebraic(t, y, window=None):
    """Least-squares exponent of ``y ~ C t^-exponent``."""
    return _fit("algebraic", t, y, window)


def classify_decay(t, y):
    """Pick the better-fitting law by r^2.

    Both laws are compared on the series minus its first tenth (and any floor
    tail); a window spanning only a factor of two in time cannot separate the
    two laws. The reported parameter is then refit on the default late window.
    """
    t, y = _clean(t, y)
    if len(t) < MIN_CLASSIFY:
        raise InsufficientData(f"{len(t)} points, classification needs {MIN_CLASSIFY}")
    pos = t > 0
    t, y = t[pos], y[pos]
    t_exp, y_exp = trim_floor(t, y, "exponential")
    t_alg, y_alg = trim_floor(t, y, "algebraic")
    scores = {}
    for law, (tt, yy) in (("exponential", (t_exp, y_exp)), ("algebraic", (t_alg, y_alg))):
        start = tt[0] + 0.1 * (tt[-1] - tt[0]) if len(tt) else 0.0
        keep = tt >= start
        if keep.sum() < MIN_POINTS:
            raise InsufficientData("too few points above the floor to classify")
        scores[law] = _line(_abscissa(law, tt[keep]), np.log(yy[keep]))[2]
    gap = scores["exponential"] - scores["algebraic"]
    if abs(gap) < 0.01:
        raise Inconclusive(f"r^2 exponential={scores['exponential']:.4f} "
                           f"algebraic={scores['algebraic']:.4f} differ by < 0.01")
    law = "exponential" if gap > 0 else "algebraic"
    return _fit(law, t, y, None)


def window_ratio(t, y, exponent, window=None):
    """max/min of ``y t^exponent`` over the window (late half by default)."""
    t, y = _clean(t, y, positive_t=True)
    tw, yw = _select(t, y, window, "algebraic")
    if len(tw) < 2:
        raise InsufficientData("window ratio needs at least two points")
    scaled = yw * tw ** exponent
    return float(scaled.max() / scaled.min())


def theta_check(t, y, exponent, rel_tol, ratio_max=10.0, window=None):
    """Two-sided algebraic check: fitted exponent near ``exponent`` and bounded window ratio."""
    fit = fit_algebraic(t, y, window)
    ratio = window_ratio(t, y, exponent, window)
    ok = abs(fit.value - exponent) <= rel_tol * exponent and ratio < ratio_max
    return ok, fit, ratio


def log_slope_exponent(t, y):
    """Local exponent ``-d log y / d log t`` by centered differences (diagnostic only)."""
    t, y = _clean(t, y, positive_t=True)
    return -np.gradient(np.log(y), np.log(t))


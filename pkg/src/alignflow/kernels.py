"""Communication weights and their primitives.

A kernel is a nonnegative, nonincreasing radial rate ``psi(r)``. Its
primitive ``Psi(r) = int_0^r psi`` is extended to negative arguments as an odd
function. Every family is integrated in closed form: power laws analytically,
piecewise-linear families exactly segment by segment (constant and banded
kernels are stored internally as piecewise-linear knot tables).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
import math

import numpy as np

from .errors import (BadOrdering, InvalidKernel, NonIntegrable, SignMismatch,
                     SingularAtZero)

FAMILIES = ("constant", "bounded_band", "power_law", "table")


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of a communication weight.

    Use the classmethod constructors rather than filling fields by hand.

    Parameters
    ----------
    family : str
        One of ``constant``, ``bounded_band``, ``power_law``, ``table``.
    knots : tuple of (radius, value)
        Piecewise-linear knots for the non power-law families. The last value
        is continued as a constant beyond the last radius.
    alpha, coeff_b, coeff_a, floor :
        Power law ``max(coeff_b * r**-alpha, floor)``; ``coeff_a`` is the
        lower-band coefficient used by :func:`increment_bounds`.
    radius :
        Radius of validity of the local bounds (``inf`` when global).
    eps :
        Optional regularization radius, ``psi_eps(r) = psi(max(r, eps))``.
    """

    family: str
    knots: tuple = ()
    alpha: float = 0.0
    coeff_b: float = 0.0
    coeff_a: float = 0.0
    floor: float = 0.0
    radius: float = math.inf
    eps: float | None = None

    # constructors

    @classmethod
    def constant(cls, value):
        if not value > 0:
            raise InvalidKernel(f"constant kernel needs a positive value, got {value}")
        return cls("constant", knots=((0.0, float(value)),))

    @classmethod
    def bounded_band(cls, psi_min, psi_max, radius):
        """Linear ramp from ``psi_max`` at 0 down to ``psi_min`` at ``radius``, flat after."""
        if not (0 < psi_min <= psi_max):
            raise InvalidKernel(f"need 0 < psi_min <= psi_max, got {psi_min}, {psi_max}")
        if not radius > 0:
            raise InvalidKernel(f"band radius must be positive, got {radius}")
        return cls("bounded_band",
                   knots=((0.0, float(psi_max)), (float(radius), float(psi_min))),
                   radius=float(radius))

    @classmethod
    def power_law(cls, alpha, coeff_b, floor=0.0, coeff_a=None):
        if not 0 < alpha < 2:
            raise InvalidKernel(f"power-law exponent must lie in (0, 2), got {alpha}")
        if not coeff_b > 0:
            raise InvalidKernel(f"power-law coefficient must be positive, got {coeff_b}")
        if floor < 0:
            raise InvalidKernel(f"floor must be nonnegative, got {floor}")
        coeff_a = coeff_b if coeff_a is None else coeff_a
        if not 0 < coeff_a <= coeff_b:
            raise InvalidKernel("need 0 < coeff_a <= coeff_b")
        radius = (coeff_b / floor) ** (1.0 / alpha) if floor > 0 else math.inf
        return cls("power_law", alpha=float(alpha), coeff_b=float(coeff_b),
                   coeff_a=float(coeff_a), floor=float(floor), radius=radius)

    @classmethod
    def table(cls, knots):
        knots = tuple((float(r), float(v)) for r, v in knots)
        if not knots:
            raise InvalidKernel("table kernel needs at least one knot")
        radii = np.array([k[0] for k in knots])
        values = np.array([k[1] for k in knots])
        if radii[0] != 0.0:
            raise InvalidKernel("first knot must sit at radius 0")
        if np.any(np.diff(radii) <= 0):
            raise InvalidKernel("knot radii must be strictly increasing")
        if np.any(values < 0) or np.any(np.diff(values) > 0):
            raise InvalidKernel("knot values must be nonnegative and nonincreasing")
        return cls("table", knots=knots, radius=float(radii[-1]) if len(knots) > 1 else math.inf)

    def regularized(self, eps):
        if eps is not None and not eps > 0:
            raise InvalidKernel("regularization radius must be positive")
        return replace(self, eps=eps)

    # derived bounds

    @property
    def singular(self):
        """True when psi is unbounded at the origin."""
        return self.family == "power_law" and self.eps is None

    @property
    def primitive_finite(self):
        return not (self.singular and self.alpha >= 1)

    @property
    def psi_min(self):
        """Lower bound of psi on the whole half-line (global floor)."""
        if self.family == "power_law":
            return self.floor
        return self.knots[-1][1]

    @property
    def psi_max(self):
        """Supremum of psi (``inf`` for an unregularized power law)."""
        if self.family == "power_law":
            return math.inf if self.eps is None else float(eval_psi(self, self.eps))
        return self.knots[0][1]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidKernel(f"unknown kernel family {self.family!r}")


# evaluation

def _table_arrays(kernel):
    radii = np.array([k[0] for k in kernel.knots])
    values = np.array([k[1] for k in kernel.knots])
    return radii, values


def _raw_psi(kernel, r):
    if kernel.family == "power_law":
        with np.errstate(divide="ignore"):
            out = kernel.coeff_b * r ** (-kernel.alpha)
        return np.maximum(out, kernel.floor)
    radii, values = _table_arrays(kernel)
    return np.interp(r, radii, values)


def eval_psi(kernel: KernelSpec, r):
    """Communication rate at distance ``r >= 0`` (scalar or array)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("psi takes nonnegative distances; pass |x - y|")
    if kernel.eps is not None:
        r_arr = np.maximum(r_arr, kernel.eps)
    elif kernel.singular and np.any(r_arr == 0):
        raise SingularAtZero("power-law kernel diverges at r = 0 (no regularization set)")
    out = _raw_psi(kernel, r_arr)
    return float(out) if np.ndim(out) == 0 else out


def _power_moment(kernel, a, b, k):
    # int_a^b s^k max(B s^-alpha, floor) ds for 0 <= a <= b
    alpha, coeff, floor = kernel.alpha, kernel.coeff_b, kernel.floor
    split = kernel.radius
    hi = np.minimum(b, split)
    lo = np.minimum(a, split)
    expo = k + 1 - alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        if expo == 0:
            power = coeff * (np.log(hi) - np.log(lo))
        else:
            power = coeff * (hi ** expo - lo ** expo) / expo
        power = np.where(hi > lo, power, 0.0)
    if expo <= 0 and np.any((lo == 0) & (hi > 0)):
        raise NonIntegrable(f"int_0 s^{k} psi diverges for alpha = {alpha}")
    if floor > 0:
        lo_f = np.maximum(a, split)
        hi_f = np.maximum(b, split)
        power = power + floor * (hi_f ** (k + 1) - lo_f ** (k + 1)) / (k + 1)
    return power


def _table_cumulative(kernel, x, k):
    # int_0^x s^k psi(s) ds for piecewise-linear psi
    radii, values = _table_arrays(kernel)
    last = len(radii) - 1
    # the final slope entry (0) continues the last value as a constant tail
    slopes = np.append(np.diff(values) / np.diff(radii), 0.0)
    full = np.zeros(len(radii))
    for j in range(last):
        full[j + 1] = full[j] + _segment(radii[j], radii[j + 1], values[j], slopes[j], k)
    idx = np.clip(np.searchsorted(radii, x, side="right") - 1, 0, last)
    return full[idx] + _segment(radii[idx], x, values[idx], slopes[idx], k)


def _segment(r0, r1, v0, slope, k):
    intercept = v0 - slope * r0
    return (intercept * (r1 ** (k + 1) - r0 ** (k + 1)) / (k + 1)
            + slope * (r1 ** (k + 2) - r0 ** (k + 2)) / (k + 2))


def _raw_moment(kernel, a, b, k):
    if kernel.family == "power_law":
        return _power_moment(kernel, a, b, k)
    return _table_cumulative(kernel, b, k) - _table_cumulative(kernel, a, k)


def _moment_from_zero(kernel, r, k):
    # int_0^r s^k psi_eps(s) ds for r >= 0
    if kernel.eps is None:
        return _raw_moment(kernel, np.zeros_like(r), r, k)
    eps = kernel.eps
    cap = float(_raw_psi(kernel, np.asarray(eps)))
    inner = cap * np.minimum(r, eps) ** (k + 1) / (k + 1)
    outer = _raw_moment(kernel, np.full_like(r, eps), np.maximum(r, eps), k)
    return inner + outer


def eval_Psi(kernel: KernelSpec, r):
    """Odd primitive ``Psi(r) = sign(r) int_0^|r| psi``."""
    if not kernel.primitive_finite:
        raise NonIntegrable(f"Psi is undefined for a power law with alpha = {kernel.alpha} >= 1")
    r_arr = np.asarray(r, dtype=float)
    out = np.sign(r_arr) * _moment_from_zero(kernel, np.abs(r_arr), 0)
    return float(out) if np.ndim(out) == 0 else out


def radial_moment(kernel: KernelSpec, r):
    """``int_0^|r| s psi(s) ds``; finite for every supported family."""
    r_arr = np.abs(np.asarray(r, dtype=float))
    out = _moment_from_zero(kernel, r_arr, 1)
    return float(out) if np.ndim(out) == 0 else out


# increment estimates

def increment_bounds(kernel: KernelSpec, a, b, D):
    """Lower/upper bounds on ``Psi(a - c) - Psi(b - c)`` when both arguments lie in ``[-D, D]``."""
    if not a > b:
        raise BadOrdering(f"need a > b, got a={a}, b={b}")
    gap = a - b
    if D < gap:
        raise BadOrdering(f"window D={D} smaller than the increment {gap}")
    lower = eval_psi(kernel, D) * gap if D > 0 else 0.0
    upper = 2.0 * eval_Psi(kernel, gap / 2.0)
    if kernel.family == "bounded_band" and gap <= kernel.radius:
        lower = max(lower, kernel.psi_min * gap)
        upper = min(upper, kernel.psi_max * gap)
    elif kernel.family == "power_law" and kernel.eps is None:
        lower = max(lower, kernel.coeff_a * D ** (-kernel.alpha) * gap)
        if kernel.floor == 0 and kernel.alpha < 1:
            closed = 2 ** kernel.alpha * kernel.coeff_b * gap ** (1 - kernel.alpha) / (1 - kernel.alpha)
            upper = min(upper, closed)
    return float(lower), float(upper)


def averaged_lipschitz(kernel: KernelSpec, a, b):
    """Slope bound ``min(Psi(a)/a, Psi(b)/b)`` for same-sign arguments."""
    if not a * b > 0:
        raise SignMismatch(f"arguments must share a sign, got a={a}, b={b}")
    return float(min(eval_Psi(kernel, a) / a, eval_Psi(kernel, b) / b))


def effective_bounds(kernel: KernelSpec, D):
    """Effective ``(psi_m, psi_M)`` on ``[0, D]``: the extremes of psi there."""
    upper = math.inf if kernel.singular else float(eval_psi(kernel, 0.0))
    return float(eval_psi(kernel, D)), upper


def check_invariants(kernel: KernelSpec, r_max=None, n=2001, tol=1e-12):
    """Sampled sanity checks; raises :class:`InvalidKernel` on the first failure."""
    if r_max is None:
        r_max = 4 * kernel.radius if math.isfinite(kernel.radius) else 10.0
    grid = np.concatenate([[0.0], np.geomspace(1e-6 * r_max, r_max, n)])
    psi = eval_psi(kernel, grid[1:] if kernel.singular else grid)
    if np.any(psi < 0):
        raise InvalidKernel("psi takes negative values")
    if np.any(np.diff(psi) > tol * np.maximum(1.0, np.abs(psi[:-1]))):
        raise InvalidKernel("psi is not nonincreasing")
    if np.any(psi < kernel.psi_min - tol):
        raise InvalidKernel("psi drops below its declared floor")
    if kernel.primitive_finite:
        if eval_Psi(kernel, 0.0) != 0.0:
            raise InvalidKernel("Psi(0) must vanish")
        lin = np.linspace(0.0, r_max, n)
        prim = eval_Psi(kernel, lin)
        if np.any(np.diff(prim) < -tol):
            raise InvalidKernel("Psi is not nondecreasing")
        second = prim[2:] - 2 * prim[1:-1] + prim[:-2]
        if np.any(second > 1e-10 * max(1.0, float(np.max(np.abs(prim))))):
            raise InvalidKernel("Psi is not concave")
    return True

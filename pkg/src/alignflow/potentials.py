"""Interaction potentials W with gradients and convexity moduli.

Evaluation is vectorized over leading axes: ``x`` has shape ``(..., d)``. In one
dimension a bare scalar is accepted as well.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvexityViolation, DimensionMismatch, IncompatiblePotential

FAMILIES = ("quadratic", "convex", "coulomb_quadratic", "null")


@dataclass(frozen=True)
class PotentialSpec:
    family: str
    dim: int
    lam: float | None = None
    Lam: float | None = None
    W: Callable | None = None
    gradW: Callable | None = None
    label: str = ""

    @classmethod
    def quadratic(cls, lam, dim=1):
        if not lam > 0:
            raise IncompatiblePotential(f"quadratic strength must be positive, got {lam}")
        return cls("quadratic", int(dim), float(lam), float(lam), label=f"quadratic({lam})")

    @classmethod
    def convex(cls, W, gradW, lam, Lam, dim=1, check=True, seed=0, label="convex"):
        """User-supplied potential with declared moduli ``lam <= Lam``.

        The declaration is spot-checked on random pairs unless ``check`` is off.
        """
        if not 0 < lam <= Lam:
            raise IncompatiblePotential(f"need 0 < lam <= Lam, got {lam}, {Lam}")
        pot = cls("convex", int(dim), float(lam), float(Lam), W, gradW, label)
        if check:
            check_convexity(pot, seed=seed)
        return pot

    @classmethod
    def soft_convex(cls, lam, Lam, dim=1):
        """``lam |x|^2 / 2 + (Lam - lam)(sqrt(1 + |x|^2) - 1)``, Hessian between lam and Lam."""
        gap = Lam - lam

        def W(x):
            sq = np.sum(x * x, axis=-1)
            return 0.5 * lam * sq + gap * (np.sqrt(1.0 + sq) - 1.0)

        def gradW(x):
            sq = np.sum(x * x, axis=-1, keepdims=True)
            return lam * x + gap * x / np.sqrt(1.0 + sq)

        return cls.convex(W, gradW, lam, Lam, dim, label=f"soft_convex({lam},{Lam})")

    @classmethod
    def coulomb_quadratic(cls):
        return cls("coulomb_quadratic", 1, label="coulomb_quadratic")

    @classmethod
    def null(cls, dim=1):
        """Zero potential, for free-streaming checks."""
        return cls("null", int(dim), label="null")

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise IncompatiblePotential(f"unknown potential family {self.family!r}")
        if self.family == "coulomb_quadratic" and self.dim != 1:
            raise DimensionMismatch("the Coulomb-quadratic potential is one-dimensional")


def _as_points(pot, x):
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    if scalar:
        if pot.dim != 1:
            raise DimensionMismatch(f"scalar input for a {pot.dim}-dimensional potential")
        arr = arr.reshape(1)
    if arr.shape[-1] != pot.dim:
        raise DimensionMismatch(f"expected trailing dimension {pot.dim}, got shape {arr.shape}")
    return arr, scalar


def eval_W(pot: PotentialSpec, x):
    arr, scalar = _as_points(pot, x)
    if pot.family == "quadratic":
        out = 0.5 * pot.lam * np.sum(arr * arr, axis=-1)
    elif pot.family == "coulomb_quadratic":
        s = arr[..., 0]
        out = -np.abs(s) + 0.5 * s * s
    elif pot.family == "null":
        out = np.zeros(arr.shape[:-1])
    else:
        out = np.asarray(pot.W(arr), dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def eval_gradW(pot: PotentialSpec, x):
    arr, scalar = _as_points(pot, x)
    if pot.family == "quadratic":
        out = pot.lam * arr
    elif pot.family == "coulomb_quadratic":
        # np.sign(0) = 0, so the force vanishes on the diagonal
        out = -np.sign(arr) + arr
    elif pot.family == "null":
        out = np.zeros_like(arr)
    else:
        out = np.asarray(pot.gradW(arr), dtype=float)
    return float(out[0]) if scalar else out


def convexity_moduli(pot: PotentialSpec):
    if pot.family in ("quadratic", "convex"):
        return pot.lam, pot.Lam
    return None


def check_convexity(pot: PotentialSpec, n_pairs=10_000, seed=0, scale=3.0, rtol=1e-9):
    """Spot-check the declared moduli on random pairs and W(x) = W(-x)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-scale, scale, size=(n_pairs, pot.dim))
    y = rng.uniform(-scale, scale, size=(n_pairs, pot.dim))
    diff = x - y
    sq = np.sum(diff * diff, axis=-1)
    inner = np.sum((eval_gradW(pot, x) - eval_gradW(pot, y)) * diff, axis=-1)
    slack = rtol * (1.0 + sq)
    low = np.nonzero(inner < pot.lam * sq - slack)[0]
    if low.size:
        raise ConvexityViolation(f"lower modulus {pot.lam} violated at x={x[low[0]]}, y={y[low[0]]}")
    high = np.nonzero(inner > pot.Lam * sq + slack)[0]
    if high.size:
        raise ConvexityViolation(f"upper modulus {pot.Lam} violated at x={x[high[0]]}, y={y[high[0]]}")
    w_plus, w_minus = eval_W(pot, x), eval_W(pot, -x)
    if np.any(np.abs(w_plus - w_minus) > rtol * (1.0 + np.abs(w_plus))):
        raise ConvexityViolation("potential is not even")
    if np.any(np.abs(eval_gradW(pot, np.zeros(pot.dim))) > 1e-12):
        raise ConvexityViolation("gradient does not vanish at the origin")
    return True

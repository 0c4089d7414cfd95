"""Independent reference computations used to cross-check the main code paths.

Nothing here shares an algorithm with the production routines: primitives
come from adaptive quadrature, transport distances from brute force, linear
programming or an explicit north-west-corner sweep, and the two-body motion
from a matrix exponential.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.optimize import linprog

from .kernels import KernelSpec, eval_psi


def primitive_by_quadrature(kernel: KernelSpec, r):
    """``int_0^|r| psi`` by adaptive quadrature, extended oddly."""
    r = float(r)
    if r == 0:
        return 0.0
    hi = abs(r)
    breaks = []
    if kernel.family in ("bounded_band", "table"):
        breaks = [float(k[0]) for k in kernel.knots if 0 < k[0] < hi]
    elif kernel.family == "power_law" and kernel.floor > 0:
        knee = (kernel.coeff_b / kernel.floor) ** (1.0 / kernel.alpha)
        breaks = [knee] if knee < hi else []
    if kernel.eps is not None and kernel.eps < hi:
        breaks.append(kernel.eps)
    edges = [0.0] + sorted(breaks) + [hi]
    total = 0.0
    for lo, up in zip(edges[:-1], edges[1:]):
        val, _ = quad(lambda s: float(eval_psi(kernel, s)), lo, up, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val
    return math.copysign(total, r)


# two particles

def two_body_separation(t, r0, rdot0, lam=1.0, psi=1.0):
    """Separation of two equal-mass particles under ``W = lam x^2/2`` and constant ``psi``."""
    gen = np.array([[0.0, 1.0], [-lam, -psi]])
    start = np.array([r0, rdot0], dtype=float)
    return np.array([(expm(gen * s) @ start)[0] for s in np.atleast_1d(t)])


# optimal transport on the line

def _cost(x, y, p):
    return np.abs(np.subtract.outer(x, y)) ** (1.0 if math.isinf(p) else p)


def transport_bruteforce(p, x, y):
    """Equal-weight, equal-size ``d_p`` by minimizing over all permutations."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    best = math.inf
    for perm in itertools.permutations(range(len(y))):
        gap = np.abs(x - y[list(perm)])
        val = gap.max() if math.isinf(p) else float(np.mean(gap ** p))
        best = min(best, val)
    return best if math.isinf(p) else best ** (1.0 / p)


def _plan_constraints(wx, wy):
    n, m = len(wx), len(wy)
    rows = []
    for i in range(n):
        row = np.zeros((n, m))
        row[i, :] = 1
        rows.append(row.ravel())
    for j in range(m):
        row = np.zeros((n, m))
        row[:, j] = 1
        rows.append(row.ravel())
    return np.array(rows), np.concatenate([wx, wy])


def transport_linprog(p, x, wx, y, wy):
    """General-weight ``d_p`` from the Kantorovich linear program.

    For ``p = inf`` the smallest admissible cost threshold is found by
    checking plan feasibility on the sorted candidate distances.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    wx = np.asarray(wx, float) / np.sum(wx)
    wy = np.asarray(wy, float) / np.sum(wy)
    A, b = _plan_constraints(wx, wy)
    dist = np.abs(np.subtract.outer(x, y))
    if not math.isinf(p):
        res = linprog((dist ** p).ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        return float(res.fun) ** (1.0 / p)
    for level in np.unique(dist):
        allowed = (dist <= level + 1e-15).ravel()
        bounds = [(0, None) if ok else (0, 0) for ok in allowed]
        res = linprog(np.zeros(allowed.size), A_eq=A, b_eq=b, bounds=bounds, method="highs")
        if res.status == 0:
            return float(level)
    raise RuntimeError("no feasible plan found")


def monotone_sweep(p, x, wx, y, wy):
    """``d_p`` of the sorted (north-west corner) coupling, one atom pair at a time."""
    ox, oy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    xs, ys = [float(v) for v in np.asarray(x)[ox]], [float(v) for v in np.asarray(y)[oy]]
    ax = [float(v) for v in np.asarray(wx, float)[ox] / np.sum(wx)]
    ay = [float(v) for v in np.asarray(wy, float)[oy] / np.sum(wy)]
    i = j = 0
    total = 0.0
    worst = 0.0
    while i < len(xs) and j < len(ys):
        move = min(ax[i], ay[j])
        if move > 1e-15:
            gap = abs(xs[i] - ys[j])
            worst = max(worst, gap)
            total += move * gap ** (0 if math.isinf(p) else p)
        ax[i] -= move
        ay[j] -= move
        if ax[i] <= 1e-15:
            i += 1
        if ay[j] <= 1e-15:
            j += 1
    return worst if math.isinf(p) else total ** (1.0 / p)


def interval_atoms(center, half_width, n_atoms=10_000):
    """Equal atoms at the cell midpoints of ``[center - half_width, center + half_width]``."""
    cells = (np.arange(n_atoms) + 0.5) / n_atoms
    return center - half_width + 2 * half_width * cells, np.full(n_atoms, 1.0 / n_atoms)

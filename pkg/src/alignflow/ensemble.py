"""Weighted particle ensembles, initial data and asymptotic reference maps."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (DimensionMismatch, EmptyEnsemble, IncompatiblePotential,
                     NonpositiveWeight, UnsupportedDescriptor)
from .kernels import KernelSpec, eval_Psi
from .potentials import PotentialSpec

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Snapshot of ``N`` particles in ``d`` dimensions.

    Arrays are treated as read-only; the integrator builds new snapshots with
    :meth:`evolve` rather than mutating in place.
    """

    positions: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray
    time: float = 0.0

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]

    def evolve(self, positions, velocities, time):
        return Ensemble(positions, velocities, self.weights, float(time))

    def ordered(self):
        """True when 1D positions are strictly increasing in particle index."""
        return bool(np.all(np.diff(self.positions[:, 0]) > 0))


def _as_columns(arr, n=None):
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or (n is not None and arr.shape[0] != n):
        raise DimensionMismatch(f"bad array shape {arr.shape}")
    return arr


def init_particles(positions, velocities, weights=None, time=0.0):
    """Build a validated ensemble; weights renormalized, 1D data sorted by position."""
    x = np.asarray(positions, dtype=float)
    if x.size == 0:
        raise EmptyEnsemble("no particles given")
    x = _as_columns(x)
    n = x.shape[0]
    if n < 2:
        raise EmptyEnsemble("an ensemble needs at least two particles")
    v = _as_columns(velocities, n)
    if v.shape != x.shape:
        raise DimensionMismatch(f"positions {x.shape} and velocities {v.shape} disagree")
    m = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float).ravel()
    if m.shape != (n,):
        raise DimensionMismatch(f"expected {n} weights, got {m.shape}")
    if np.any(~(m > 0)):
        raise NonpositiveWeight("all weights must be positive")
    m = m / m.sum()
    if x.shape[1] == 1:
        order = np.argsort(x[:, 0], kind="stable")
        x, v, m = x[order], v[order], m[order]
    return Ensemble(x.copy(), v.copy(), m.copy(), float(time))


def center_of_mass(e: Ensemble):
    return e.weights @ e.positions


def mean_velocity(e: Ensemble):
    return e.weights @ e.velocities


def momentum(e: Ensemble):
    return mean_velocity(e)


# initial data

def _density(name):
    shapes = {
        "uniform": lambda u: np.ones_like(u),
        "triangle": lambda u: 1.0 - np.abs(2.0 * u - 1.0),
        "parabola": lambda u: u * (1.0 - u),
        "cosine": lambda u: 1.0 - np.cos(2.0 * np.pi * u),
    }
    if name not in shapes:
        raise UnsupportedDescriptor(f"unknown density {name!r}; choose from {sorted(shapes)}")
    return shapes[name]


def _quantile_positions(density, lo, hi, n, weights_mode):
    levels = (np.arange(n) + 0.5) / n
    if weights_mode == "density":
        pos = lo + (hi - lo) * levels
        w = density(levels)
        return pos, w / w.sum()
    grid = np.linspace(0.0, 1.0, 20001)
    dens = density(grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]))])
    cdf /= cdf[-1]
    return lo + (hi - lo) * np.interp(levels, cdf, grid), np.full(n, 1.0 / n)


def _velocity_field(desc, x, rng):
    kind = desc.get("kind", "zero")
    n, d = x.shape
    if kind == "zero":
        return np.zeros_like(x)
    if kind == "constant":
        return np.broadcast_to(np.asarray(desc["value"], dtype=float), (n, d)).copy()
    offset = np.broadcast_to(np.asarray(desc.get("offset", 0.0), dtype=float), (d,))
    if kind == "linear":
        return offset + float(desc["slope"]) * x
    if kind == "sine":
        amp = float(desc.get("amplitude", 1.0))
        k = float(desc.get("wavenumber", 1.0))
        # component j sees coordinate j+1 so multi-D fields carry vorticity
        shifted = np.roll(x, -1, axis=1) if d > 1 else x
        return offset + amp * np.sin(k * shifted)
    if kind == "random":
        lo = np.broadcast_to(np.asarray(desc.get("low", -1.0), dtype=float), (d,))
        hi = np.broadcast_to(np.asarray(desc.get("high", 1.0), dtype=float), (d,))
        return rng.uniform(lo, hi, size=(n, d))
    raise UnsupportedDescriptor(f"unknown velocity field {kind!r}")


def sample_initial(descriptor: dict, n: int, seed: int = 0):
    """Construct initial data from a descriptor dictionary.

    Supported ``kind`` values: ``uniform_box`` (``mode`` random or quantile),
    ``density_quantiles`` (1D), ``explicit`` and ``csv``. A nested ``velocity``
    dictionary selects the velocity field for the generated kinds, and
    ``center = true`` shifts the data to zero center of mass and mean velocity.
    """
    kind = descriptor.get("kind")
    if kind == "explicit":
        return init_particles(descriptor["positions"], descriptor["velocities"],
                              descriptor.get("weights"))
    if kind == "csv":
        return load_state_csv(descriptor["path"])
    if n is None or n < 2:
        raise EmptyEnsemble("an ensemble needs at least two particles")
    rng = np.random.default_rng(seed)
    if kind == "uniform_box":
        lo = np.atleast_1d(np.asarray(descriptor.get("low", -1.0), dtype=float))
        hi = np.atleast_1d(np.asarray(descriptor.get("high", 1.0), dtype=float))
        if lo.shape != hi.shape:
            raise DimensionMismatch("box corners disagree in dimension")
        mode = descriptor.get("mode", "random")
        if mode == "quantile":
            if lo.size != 1:
                raise UnsupportedDescriptor("quantile mode is one-dimensional")
            x = (lo + (hi - lo) * (np.arange(n) + 0.5) / n)[:, None]
        elif mode == "random":
            x = rng.uniform(lo, hi, size=(n, lo.size))
        else:
            raise UnsupportedDescriptor(f"unknown box mode {mode!r}")
        w = None
    elif kind == "density_quantiles":
        lo, hi = (float(s) for s in descriptor.get("support", (-1.0, 1.0)))
        pos, w = _quantile_positions(_density(descriptor.get("density", "uniform")),
                                     lo, hi, n, descriptor.get("weights", "equal"))
        amp = float(descriptor.get("perturb_amplitude", 0.0))
        if amp:
            mode = int(descriptor.get("perturb_mode", 1))
            levels = (np.arange(n) + 0.5) / n
            pos = pos + amp * np.sin(mode * np.pi * levels)
        x = pos[:, None]
    else:
        raise UnsupportedDescriptor(f"unknown initial-data kind {kind!r}")
    v = _velocity_field(descriptor.get("velocity", {"kind": "zero"}), x, rng)
    if descriptor.get("center", False):
        # zero center of mass and zero mean velocity
        mass = np.full(n, 1.0 / n) if w is None else w
        x = x - mass @ x
        v = v - mass @ v
    return init_particles(x, v, w)


def load_state_csv(path):
    """Read columns ``x1..xd, v1..vd, m``; lines starting with ``#`` are skipped."""
    with open(Path(path), newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    header, body = rows[0], np.array(rows[1:], dtype=float)
    xs = [i for i, h in enumerate(header) if h.strip().startswith("x")]
    vs = [i for i, h in enumerate(header) if h.strip().startswith("v")]
    if "m" not in [h.strip() for h in header] or len(xs) != len(vs) or not xs:
        raise UnsupportedDescriptor(f"{path}: need columns x1..xd, v1..vd, m")
    m = body[:, [h.strip() for h in header].index("m")]
    return init_particles(body[:, xs], body[:, vs], m)


# reference maps

@dataclass(frozen=True, eq=False)
class ReferenceMap:
    kind: str  # "dirac" or "coulomb_uniform"
    eta_c0: np.ndarray
    u_inf: np.ndarray
    n: int
    eta_r: np.ndarray | None = None


def reference_map(e0: Ensemble, potential: PotentialSpec):
    """Asymptotic Lagrangian map: a drifting Dirac or the uniform interval law."""
    u_inf = mean_velocity(e0)
    eta_c0 = center_of_mass(e0) - e0.time * u_inf
    if potential.family in ("quadratic", "convex"):
        return ReferenceMap("dirac", eta_c0, u_inf, e0.n)
    if potential.family == "coulomb_quadratic":
        if e0.dim != 1:
            raise IncompatiblePotential("the uniform flock profile needs d = 1")
        cum = np.cumsum(e0.weights)
        # midpoint of each atom's mass slab, mapped onto [-1, 1]
        eta_r = 2.0 * (cum - 0.5 * e0.weights) - 1.0
        return ReferenceMap("coulomb_uniform", eta_c0, u_inf, e0.n, eta_r)
    raise IncompatiblePotential(f"no flock profile is known for potential {potential.family!r}")


def evaluate_reference(ref: ReferenceMap, t):
    base = np.tile(ref.eta_c0 + t * ref.u_inf, (ref.n, 1))
    if ref.eta_r is not None:
        base[:, 0] += ref.eta_r
    return base


# auxiliary fields

def _pairwise_Psi_sum(x, weights, kernel):
    diff = x[:, None] - x[None, :]
    return np.sum(eval_Psi(kernel, diff) * weights[None, :], axis=1)


def aux_omega(e: Ensemble, kernel: KernelSpec):
    """``omega_i = v_i + sum_j m_j Psi(eta_i - eta_j)``."""
    if e.dim != 1:
        raise DimensionMismatch("omega is defined for one-dimensional ensembles")
    x = e.positions[:, 0]
    return e.velocities[:, 0] + _pairwise_Psi_sum(x, e.weights, kernel)


def aux_omega_tilde(e: Ensemble, ref: ReferenceMap, kernel: KernelSpec):
    """omega relative to the flock profile: the Psi-sum of the reference positions is removed."""
    if e.dim != 1:
        raise DimensionMismatch("omega is defined for one-dimensional ensembles")
    x = e.positions[:, 0]
    x_ref = evaluate_reference(ref, e.time)[:, 0]
    return (e.velocities[:, 0] + _pairwise_Psi_sum(x, e.weights, kernel)
            - _pairwise_Psi_sum(x_ref, e.weights, kernel))

"""Diagnostics: diameters, pairwise deviations, energies, Lyapunov values, Wasserstein distances."""
from __future__ import annotations

from dataclasses import dataclass, fields
import math

import numpy as np

from .ensemble import (Ensemble, ReferenceMap, aux_omega, aux_omega_tilde,
                       center_of_mass, evaluate_reference, mean_velocity)
from .errors import AdmissibilityViolation, DimensionMismatch, IncompatiblePotential
from .kernels import KernelSpec, eval_Psi, eval_psi, radial_moment
from .potentials import PotentialSpec, convexity_moduli, eval_W

NAN = math.nan


@dataclass
class DiagnosticsFrame:
    """One row of diagnostics. Quantities that do not apply to a run stay NaN."""

    t: float = NAN
    D_eta: float = NAN
    D_v: float = NAN
    D_omega: float = NAN
    D_eta_tilde: float = NAN
    D_omega_tilde: float = NAN
    X: float = NAN
    Y: float = NAN
    Z: float = NAN
    Z_tilde: float = NAN
    E_diss: float = NAN
    E_zeta: float = NAN
    E_tilde_xi: float = NAN
    L_cal: float = NAN
    w2_to_ref: float = NAN
    winf_to_ref: float = NAN
    w2_to_dirac: float = NAN
    w2_to_profile: float = NAN
    winf_to_profile: float = NAN
    momentum_drift: float = NAN
    com_drift: float = NAN

    def as_row(self):
        return [getattr(self, name) for name in FRAME_COLUMNS]


FRAME_COLUMNS = tuple(f.name for f in fields(DiagnosticsFrame))


# diameters and pairwise sums

def _spread(values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1 or values.shape[1] == 1:
        flat = values.ravel()
        return float(flat.max() - flat.min())
    diff = values[:, None, :] - values[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))


def diameters(e: Ensemble, omega=None, eta_tilde=None, omega_tilde=None):
    """Exact diameters of the available fields, keyed like the frame columns."""
    out = {"D_eta": _spread(e.positions), "D_v": _spread(e.velocities)}
    if omega is not None:
        out["D_omega"] = _spread(omega)
    if eta_tilde is not None:
        out["D_eta_tilde"] = _spread(eta_tilde)
    if omega_tilde is not None:
        out["D_omega_tilde"] = _spread(omega_tilde)
    return out


def pairwise_sum(values, weights):
    """``sum_ij m_i m_j |a_i - a_j|^2`` via the centered identity ``2 sum_i m_i |a_i - mean|^2``."""
    a = np.asarray(values, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    centered = a - weights @ a
    return float(2.0 * weights @ np.sum(centered * centered, axis=1))


def _pair_geometry(e):
    diff = e.positions[:, None, :] - e.positions[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return diff, dist


def weighted_dissipation(e: Ensemble, kernel: KernelSpec):
    """``Z~ = sum_ij m_i m_j psi(|eta_i - eta_j|) |v_i - v_j|^2``."""
    _, dist = _pair_geometry(e)
    dv = e.velocities[:, None, :] - e.velocities[None, :, :]
    dv2 = np.sum(dv * dv, axis=-1)
    apart = dist > 0
    psi = eval_psi(kernel, np.where(apart, dist, 1.0))
    # coincident pairs only contribute if they move apart
    psi = np.where(apart, psi, np.where(dv2 > 0, math.inf, 0.0))
    terms = np.where(dv2 > 0, psi * dv2, 0.0)
    return float(e.weights @ terms @ e.weights)


def pairwise_L2(e: Ensemble, reference: ReferenceMap | None, kernel: KernelSpec, mode="plain"):
    """Pairwise deviations ``(X, Y, Z, Z~)``.

    ``coulomb_perturbation`` measures positions relative to the reference map
    and uses omega-tilde for ``Y``; ``plain`` uses raw positions and omega
    (``Y`` is NaN when omega is unavailable).
    """
    if mode == "coulomb_perturbation":
        if reference is None or reference.kind != "coulomb_uniform":
            raise IncompatiblePotential("perturbation mode needs the uniform flock reference")
        eta = e.positions - evaluate_reference(reference, e.time)
        Y = pairwise_sum(aux_omega_tilde(e, reference, kernel), e.weights)
    elif mode == "plain":
        eta = e.positions
        Y = NAN
        if e.dim == 1 and kernel.primitive_finite:
            Y = pairwise_sum(aux_omega(e, kernel), e.weights)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    X = pairwise_sum(eta, e.weights)
    Z = pairwise_sum(e.velocities, e.weights)
    return X, Y, Z, weighted_dissipation(e, kernel)


def dissipated_energy(e: Ensemble, potential: PotentialSpec):
    """``E = Z/2 + sum_ij m_i m_j (W(eta_i - eta_j) - W(0))``."""
    diff, _ = _pair_geometry(e)
    W = eval_W(potential, diff) - eval_W(potential, np.zeros(e.dim))
    return 0.5 * pairwise_sum(e.velocities, e.weights) + float(e.weights @ W @ e.weights)


def _cross_term(e):
    dx = e.positions - center_of_mass(e)
    dv = e.velocities - mean_velocity(e)
    return float(2.0 * e.weights @ np.sum(dx * dv, axis=1))


def zeta_ceiling(potential, kernel):
    lam = convexity_moduli(potential)[0]
    psi_m, psi_M = kernel.psi_min, kernel.psi_max
    third = psi_m / (1.0 + psi_M ** 2 / (2.0 * lam)) if math.isfinite(psi_M) else 0.0
    return {"lambda/2": lam / 2.0, "1/2": 0.5, "psi_m/(1+psi_M^2/(2 lambda))": third}


def xi_ceiling(potential, kernel):
    lam = convexity_moduli(potential)[0]
    return {"lambda": lam, "1": 1.0, "psi_m": kernel.psi_min}


def _check_window(name, value, ceiling):
    if value < 0:
        raise AdmissibilityViolation(f"{name} = {value} must be nonnegative")
    for label, bound in ceiling.items():
        if not value < bound:
            raise AdmissibilityViolation(f"{name} = {value} violates {name} < {label} = {bound:.6g}")


def check_admissible(potential, kernel, zeta=None, xi=None):
    if convexity_moduli(potential) is None and (zeta is not None or xi is not None):
        raise AdmissibilityViolation("Lyapunov weights need a uniformly convex potential")
    if zeta is not None:
        _check_window("zeta", zeta, zeta_ceiling(potential, kernel))
    if xi is not None:
        _check_window("xi", xi, xi_ceiling(potential, kernel))


def lyapunov_multiD(e: Ensemble, potential: PotentialSpec, kernel: KernelSpec, zeta=None, xi=None):
    """Mixed Lyapunov values ``(E_zeta, E_tilde_xi, L_cal)``; NaN for weights not given."""
    check_admissible(potential, kernel, zeta, xi)
    energy = dissipated_energy(e, potential)
    cross = _cross_term(e)
    E_zeta = energy + zeta * cross if zeta is not None else NAN
    E_tilde = NAN
    if xi is not None:
        _, dist = _pair_geometry(e)
        E_tilde = energy + xi * (cross + float(e.weights @ radial_moment(kernel, dist) @ e.weights))
    L = pairwise_sum(e.positions, e.weights) + pairwise_sum(e.velocities, e.weights)
    return E_zeta, E_tilde, L


# Wasserstein distances

@dataclass(frozen=True)
class Dirac:
    point: float


@dataclass(frozen=True)
class UniformInterval:
    center: float
    half_width: float


@dataclass(frozen=True, eq=False)
class Atoms:
    positions: np.ndarray
    weights: np.ndarray


def _atoms_of(obj):
    if isinstance(obj, Ensemble):
        if obj.dim != 1:
            raise DimensionMismatch("one-dimensional Wasserstein distance needs d = 1")
        x, w = obj.positions[:, 0], obj.weights
    elif isinstance(obj, Atoms):
        x, w = np.asarray(obj.positions, dtype=float).ravel(), np.asarray(obj.weights, dtype=float)
    else:
        raise TypeError(f"not an atomic measure: {obj!r}")
    order = np.argsort(x, kind="stable")
    return x[order], w[order] / w.sum()


def _finish(p, total):
    return float(total) if math.isinf(p) else float(total) ** (1.0 / p)


def wasserstein_1d(p, e, target):
    """Exact ``d_p`` on the line through the monotone (quantile) coupling."""
    p = float(p)
    if p < 1:
        raise ValueError("p must be at least 1")
    x, w = _atoms_of(e)
    if isinstance(target, Dirac):
        gap = np.abs(x - target.point)
        return _finish(p, gap.max() if math.isinf(p) else w @ gap ** p)
    if isinstance(target, UniformInterval):
        c, h = target.center, target.half_width
        cum = np.concatenate([[0.0], np.cumsum(w)])
        cum /= cum[-1]
        lo = c - h + 2 * h * cum[:-1]
        hi = c - h + 2 * h * cum[1:]
        if math.isinf(p):
            return float(np.max(np.maximum(np.abs(x - lo), np.abs(x - hi))))

        def prim(u):
            return np.sign(u) * np.abs(u) ** (p + 1) / (p + 1)

        return _finish(p, np.sum((prim(hi - x) - prim(lo - x)) / (2 * h)))
    y, v = _atoms_of(target)
    cx, cy = np.cumsum(w), np.cumsum(v)
    cx /= cx[-1]
    cy /= cy[-1]
    breaks = np.union1d(cx, cy)
    mass = np.diff(np.concatenate([[0.0], breaks]))
    keep = mass > 1e-13
    mid = (breaks - 0.5 * mass)[keep]
    ix = np.minimum(np.searchsorted(cx, mid), len(x) - 1)
    iy = np.minimum(np.searchsorted(cy, mid), len(y) - 1)
    gap = np.abs(x[ix] - y[iy])
    return _finish(p, gap.max() if math.isinf(p) else mass[keep] @ gap ** p)


def wasserstein_2_multiD_to_dirac(e: Ensemble, point=None):
    point = center_of_mass(e) if point is None else np.asarray(point, dtype=float)
    dx = e.positions - point
    return float(math.sqrt(e.weights @ np.sum(dx * dx, axis=1)))


def diameter_bound_Dbar(frame0: DiagnosticsFrame, kernel: KernelSpec):
    """Uniform-in-time diameter bound for one-dimensional Coulomb runs."""
    d_eta, d_omega = frame0.D_eta, frame0.D_omega
    if math.isnan(d_omega):
        raise ValueError("the initial frame carries no omega diameter")
    barrier = 2.0 * eval_Psi(kernel, 1.0) + 1.0
    return 2.0 + max(math.hypot(d_eta - 2.0, d_omega), max(d_omega, barrier) + 2.0)


# per-frame assembly

@dataclass(frozen=True)
class FrameContext:
    potential: PotentialSpec
    kernel: KernelSpec
    reference: ReferenceMap | None = None
    zeta: float | None = None
    xi: float | None = None

    @property
    def mode(self):
        if self.reference is not None and self.reference.kind == "coulomb_uniform":
            return "coulomb_perturbation"
        return "plain"


def compute_frame(e: Ensemble, ctx: FrameContext):
    frame = DiagnosticsFrame(t=e.time)
    ref, kernel = ctx.reference, ctx.kernel
    omega = omega_tilde = eta_tilde = None
    if e.dim == 1 and kernel.primitive_finite:
        omega = aux_omega(e, kernel)
        if ctx.mode == "coulomb_perturbation":
            omega_tilde = aux_omega_tilde(e, ref, kernel)
    if e.dim == 1 and ref is not None:
        eta_tilde = e.positions - evaluate_reference(ref, e.time)
    for key, val in diameters(e, omega, eta_tilde, omega_tilde).items():
        setattr(frame, key, val)
    frame.X, frame.Y, frame.Z, frame.Z_tilde = pairwise_L2(e, ref, kernel, ctx.mode)
    frame.E_diss = dissipated_energy(e, ctx.potential)
    if ctx.zeta is not None or ctx.xi is not None:
        frame.E_zeta, frame.E_tilde_xi, _ = lyapunov_multiD(e, ctx.potential, kernel, ctx.zeta, ctx.xi)
    if ctx.mode == "plain":
        frame.L_cal = frame.X + frame.Z
    frame.w2_to_dirac = wasserstein_2_multiD_to_dirac(e)
    if ref is not None:
        center = ref.eta_c0 + e.time * ref.u_inf
        frame.momentum_drift = float(np.linalg.norm(mean_velocity(e) - ref.u_inf))
        frame.com_drift = float(np.linalg.norm(center_of_mass(e) - center))
        if e.dim == 1:
            if ref.kind == "coulomb_uniform":
                target = Atoms(evaluate_reference(ref, e.time)[:, 0], e.weights)
                profile = UniformInterval(float(center[0]), 1.0)
                frame.w2_to_profile = wasserstein_1d(2, e, profile)
                frame.winf_to_profile = wasserstein_1d(math.inf, e, profile)
            else:
                target = Dirac(float(center[0]))
            frame.w2_to_ref = wasserstein_1d(2, e, target)
            frame.winf_to_ref = wasserstein_1d(math.inf, e, target)
    return frame

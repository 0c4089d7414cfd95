"""Particle right-hand side and time integration (RK4, Dormand-Prince 5(4))."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .ensemble import Ensemble, reference_map
from .errors import (AlignflowError, IncompatiblePotential, OrderViolation,
                     SeparationUnderflow, StepSizeUnderflow)
from .kernels import KernelSpec, eval_psi
from .metrics import FRAME_COLUMNS, FrameContext, compute_frame
from .potentials import PotentialSpec, eval_gradW

INTEGRATORS = ("rk45", "rk4")


@dataclass
class SimConfig:
    t_final: float
    dt_init: float = 1e-2
    integrator: str = "rk45"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    record_every: int = 1
    record_interval: float | None = None
    min_separation_guard: float | None = None
    deterministic_reduction: bool = True
    check_order: bool = True
    max_steps: int = 5_000_000
    max_order_rejections: int = 200

    def __post_init__(self):
        if not (self.dt_init > 0 and self.t_final > 0):
            raise ValueError("dt_init and t_final must be positive")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if self.record_interval is not None and not self.record_interval > 0:
            raise ValueError("record_interval must be positive")


# right-hand side

def _accelerations(x, v, m, potential, kernel, guard, deterministic):
    n, d = x.shape
    off = ~np.eye(n, dtype=bool)
    if d == 1:
        diff = x[:, 0][:, None] - x[:, 0][None, :]
        dist = np.abs(diff)
    else:
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
    if kernel.singular and guard is not None and np.min(dist[off]) < guard:
        i, j = np.unravel_index(np.argmin(np.where(off, dist, np.inf)), dist.shape)
        raise SeparationUnderflow(f"particles {i} and {j} are {dist[i, j]:.3e} apart (guard {guard:.3e})")

    # potential force
    if potential.family == "quadratic":
        force = -potential.lam * (x - m @ x)
    elif potential.family == "null":
        force = np.zeros_like(x)
    elif d == 1:
        grad = eval_gradW(potential, diff[..., None])[..., 0]
        force = -np.sum(grad * m[None, :], axis=1)[:, None]
    else:
        grad = eval_gradW(potential, diff)
        force = -np.sum(grad * m[None, :, None], axis=1)

    # alignment: weights psi_ij m_j with the diagonal removed
    psi = eval_psi(kernel, np.where(off, dist, 1.0))
    weights = np.where(off, psi, 0.0) * m[None, :]
    if deterministic:
        pulled = np.sum(weights[:, :, None] * v[None, :, :], axis=1)
    else:
        pulled = weights @ v
    return force - (np.sum(weights, axis=1)[:, None] * v - pulled)


def rhs(e: Ensemble, potential: PotentialSpec, kernel: KernelSpec, guard=None, deterministic=True):
    """Accelerations of every particle (``N x d``)."""
    return _accelerations(e.positions, e.velocities, e.weights, potential, kernel, guard, deterministic)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class _Integrator:
    """Holds the problem data and performs single steps on ``(x, v)`` arrays."""

    def __init__(self, config, potential, kernel, weights, guard):
        self.config = config
        self.potential = potential
        self.kernel = kernel
        self.weights = weights
        self.guard = guard

    def deriv(self, x, v):
        return v, _accelerations(x, v, self.weights, self.potential, self.kernel,
                                 self.guard, self.config.deterministic_reduction)

    def rk4(self, x, v, h):
        k1x, k1v = self.deriv(x, v)
        k2x, k2v = self.deriv(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x, k3v = self.deriv(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x, k4v = self.deriv(x + h * k3x, v + h * k3v)
        return (x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x),
                v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v))

    def dopri(self, x, v, h, first):
        """One embedded step; returns new state, scaled error and the FSAL derivative."""
        kx, kv = [first[0]], [first[1]]
        for stage in range(1, 7):
            coeffs = _A[stage]
            xs = x + h * sum(c * k for c, k in zip(coeffs, kx) if c)
            vs = v + h * sum(c * k for c, k in zip(coeffs, kv) if c)
            dx, dv = self.deriv(xs, vs)
            kx.append(dx)
            kv.append(dv)
        # stage 7 sits at the propagated 5th-order solution (FSAL)
        x_new, v_new = xs, vs
        ex = h * sum(c * k for c, k in zip(_E, kx) if c)
        ev = h * sum(c * k for c, k in zip(_E, kv) if c)
        cfg = self.config
        sx = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x), np.abs(x_new))
        sv = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(v), np.abs(v_new))
        err = max(float(np.max(np.abs(ex) / sx)), float(np.max(np.abs(ev) / sv)))
        return x_new, v_new, err, (kx[6], kv[6])


def _order_broken(x):
    return x.shape[1] == 1 and not np.all(np.diff(x[:, 0]) > 0)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    ensembles: list = field(default_factory=list)
    frames: list = field(default_factory=list)
    steps: int = 0
    rejected: int = 0

    def __iter__(self):
        return iter(zip(self.times, self.ensembles, self.frames))

    def __len__(self):
        return len(self.times)

    def column(self, name):
        if name == "t":
            return np.array(self.times)
        if name not in FRAME_COLUMNS:
            raise KeyError(name)
        return np.array([getattr(f, name) for f in self.frames])

    @property
    def final(self):
        return self.ensembles[-1]


def default_guard(e0):
    x = e0.positions
    if e0.dim == 1:
        diam = float(x.max() - x.min())
    else:
        diff = x[:, None, :] - x[None, :, :]
        diam = float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))
    return 1e-9 * diam


def _attach_time(err, t):
    err.time = t
    err.args = (f"{err.args[0] if err.args else err} (at t = {t:.6g})",)
    return err


def step(e: Ensemble, config: SimConfig, potential: PotentialSpec, kernel: KernelSpec, dt=None):
    """Advance one accepted step of size ``dt`` (default ``config.dt_init``).

    The adaptive integrator substeps internally until ``dt`` has been covered.
    """
    dt = config.dt_init if dt is None else dt
    sub = SimConfig(t_final=dt, dt_init=dt, integrator=config.integrator, rel_tol=config.rel_tol,
                    abs_tol=config.abs_tol, record_every=10 ** 9,
                    min_separation_guard=config.min_separation_guard,
                    deterministic_reduction=config.deterministic_reduction,
                    check_order=config.check_order)
    return simulate(e, sub, potential, kernel, diagnostics=False).final


def simulate(e0: Ensemble, config: SimConfig, potential: PotentialSpec, kernel: KernelSpec,
             zeta=None, xi=None, reference="auto", diagnostics=True):
    """Integrate from ``e0.time`` to ``e0.time + config.t_final`` and record frames.

    ``reference`` defaults to the flock profile implied by the potential (none
    for the null potential). Frames are recorded every ``record_every`` steps,
    or on the ``record_interval`` time grid when that is set, and at the end.
    """
    if potential.dim != e0.dim:
        raise IncompatiblePotential(f"potential is {potential.dim}-D but the ensemble is {e0.dim}-D")
    if reference == "auto":
        try:
            reference = reference_map(e0, potential)
        except IncompatiblePotential:
            reference = None
    ctx = FrameContext(potential, kernel, reference, zeta, xi)
    guard = config.min_separation_guard
    if guard is None:
        guard = default_guard(e0)
    integ = _Integrator(config, potential, kernel, e0.weights, guard)

    traj = Trajectory()

    def record(ens):
        traj.times.append(ens.time)
        traj.ensembles.append(ens)
        if diagnostics:
            traj.frames.append(compute_frame(ens, ctx))

    record(e0)
    t0 = e0.time
    t_end = t0 + config.t_final
    min_dt = 1e-12 * config.t_final
    interval = config.record_interval
    next_mark = t0 + interval if interval else math.inf
    mark_index = 1
    x, v, t = e0.positions, e0.velocities, t0
    h = config.dt_init
    adaptive = config.integrator == "rk45"
    first = None
    last_reason = None
    order_rejections = 0

    while t < t_end:
        if traj.steps >= config.max_steps:
            raise _attach_time(StepSizeUnderflow(f"exceeded max_steps={config.max_steps}"), t)
        target = min(t_end, next_mark)
        clipped = t + h >= target
        h_try = target - t if clipped else h
        if h_try < min_dt and not clipped:
            cls = OrderViolation if last_reason == "order" else StepSizeUnderflow
            raise _attach_time(cls(f"step size {h_try:.3e} fell below {min_dt:.3e}"
                                   + (f" after {last_reason}" if last_reason else "")), t)
        try:
            if adaptive:
                if first is None:
                    first = integ.deriv(x, v)
                x_new, v_new, err, fsal = integ.dopri(x, v, h_try, first)
            else:
                x_new, v_new = integ.rk4(x, v, h_try)
                err, fsal = 0.0, None
            if config.check_order and _order_broken(x_new):
                raise OrderViolation("1D particle order changed")
        except (SeparationUnderflow, OrderViolation) as exc:
            if not adaptive:
                raise _attach_time(exc, t)
            last_reason = "order" if isinstance(exc, OrderViolation) else "separation"
            traj.rejected += 1
            if last_reason == "order":
                order_rejections += 1
                if order_rejections > config.max_order_rejections:
                    raise _attach_time(OrderViolation(
                        f"particle order kept breaking ({order_rejections} rejected steps); "
                        "the state is below the integrator's resolution"), t)
            h = 0.25 * h_try
            continue
        except AlignflowError as exc:
            raise _attach_time(exc, t)
        if err > 1.0 or not np.isfinite(err):
            traj.rejected += 1
            last_reason = "error"
            h = h_try * (0.2 if not np.isfinite(err) else max(0.2, 0.9 * err ** -0.2))
            continue
        last_reason = None
        traj.steps += 1
        t = target if clipped else t + h_try
        x, v, first = x_new, v_new, fsal
        if adaptive:
            grow = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            h = max(h, h_try * grow) if clipped else h_try * grow
        at_mark = clipped and target == next_mark
        if at_mark:
            mark_index += 1
            next_mark = t0 + mark_index * interval
        ens = e0.evolve(x, v, t)
        if t >= t_end or at_mark or (interval is None and traj.steps % config.record_every == 0):
            record(ens)
    if traj.times[-1] != t:
        record(e0.evolve(x, v, t))
    return traj

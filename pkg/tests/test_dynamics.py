import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from alignflow.dynamics import SimConfig, rhs, simulate, step
from alignflow.ensemble import center_of_mass, init_particles, mean_velocity, sample_initial
from alignflow.errors import IncompatiblePotential, OrderViolation, StepSizeUnderflow
from alignflow.kernels import KernelSpec, eval_Psi
from alignflow.oracles import two_body_separation
from alignflow.potentials import PotentialSpec

QUAD = PotentialSpec.quadratic(1.0)
BAND = KernelSpec.bounded_band(0.5, 2.0, 4.0)


def test_two_particle_acceleration():
    e = init_particles([-1.0, 1.0], [0.0, 0.0])
    for kernel in (BAND, KernelSpec.power_law(0.5, 1.0), KernelSpec.constant(4.0)):
        np.testing.assert_allclose(rhs(e, QUAD, kernel)[:, 0], [1.0, -1.0])


@given(st.integers(0, 10_000), st.sampled_from(["quadratic", "soft", "coulomb"]))
def test_accelerations_sum_to_zero(seed, pot_name):
    rng = np.random.default_rng(seed)
    d = 1 if pot_name == "coulomb" else 2
    pot = {"quadratic": PotentialSpec.quadratic(1.3, d), "soft": PotentialSpec.soft_convex(0.5, 2.0, d),
           "coulomb": PotentialSpec.coulomb_quadratic()}[pot_name]
    e = init_particles(rng.normal(size=(9, d)), rng.normal(size=(9, d)), rng.uniform(0.1, 1, 9))
    a = rhs(e, pot, KernelSpec.power_law(0.7, 1.0))
    np.testing.assert_allclose(e.weights @ a, 0.0, atol=1e-13)


def test_identical_velocities_have_no_alignment():
    x = np.array([-1.0, 0.0, 1.0])
    e = init_particles(x, np.full(3, 0.7))
    np.testing.assert_allclose(rhs(e, QUAD, BAND), rhs(e, QUAD, KernelSpec.constant(9.0)), rtol=0, atol=1e-15)
    np.testing.assert_allclose(rhs(e, QUAD, BAND)[:, 0], [1.0, 0.0, -1.0], atol=1e-15)


def test_deterministic_and_blas_paths_agree():
    e = sample_initial({"kind": "uniform_box", "low": [-1, -1], "high": [1, 1],
                        "velocity": {"kind": "random"}}, 30, seed=2)
    pot = PotentialSpec.soft_convex(0.5, 2.0, 2)
    np.testing.assert_allclose(rhs(e, pot, BAND, deterministic=True), rhs(e, pot, BAND, deterministic=False),
                               rtol=1e-12, atol=1e-14)


def test_free_streaming_rk4_exact():
    # no potential and a common velocity: nothing accelerates
    e = init_particles([0.0, 1.0, 3.0], [0.5, 0.5, 0.5])
    cfg = SimConfig(t_final=1.0, dt_init=0.1, integrator="rk4", check_order=False)
    out = step(e, cfg, PotentialSpec.null(1), BAND, dt=0.1)
    np.testing.assert_allclose(out.positions, e.positions + 0.1 * e.velocities, rtol=0, atol=1e-15)


def test_two_body_rk4_fixed_step():
    e = init_particles([-0.5, 0.5], [0.2, -0.1])
    cfg = SimConfig(t_final=5.0, dt_init=1e-3, integrator="rk4", check_order=False)
    final = simulate(e, cfg, QUAD, KernelSpec.constant(1.0), diagnostics=False).final
    s = final.positions[1, 0] - final.positions[0, 0]
    assert abs(s - two_body_separation(5.0, 1.0, -0.3)[0]) < 1e-6


@pytest.mark.parametrize("psi", [0.5, 1.0, 2.0, 3.0])
def test_two_body_adaptive_against_matrix_exponential(psi):
    e = init_particles([-0.5, 0.5], [0.3, -0.2])
    cfg = SimConfig(t_final=10.0, record_interval=0.25, check_order=False)
    traj = simulate(e, cfg, QUAD, KernelSpec.constant(psi), diagnostics=False)
    t = traj.column("t")
    sep = np.array([en.positions[1, 0] - en.positions[0, 0] for en in traj.ensembles])
    np.testing.assert_allclose(sep, two_body_separation(t, 1.0, -0.5, psi=psi), atol=1e-6)


def test_crossing_aborts_with_time():
    e = init_particles([-0.5, 0.5], [1.0, -1.0])
    with pytest.raises(OrderViolation) as info:
        simulate(e, SimConfig(t_final=10.0), QUAD, KernelSpec.constant(0.1), diagnostics=False)
    assert info.value.time is not None and 0 < info.value.time < 10


def test_near_contact_shrinks_then_underflows():
    e = init_particles([-0.01, 0.01], [5.0, -5.0])
    with pytest.raises(StepSizeUnderflow) as info:
        simulate(e, SimConfig(t_final=1.0), PotentialSpec.null(1), KernelSpec.power_law(0.5, 1.0),
                 diagnostics=False)
    assert "separation" in str(info.value)
    assert 0 < info.value.time < 0.01


def test_tiny_fixed_step_underflows():
    e = init_particles([-0.5, 0.5], [0.0, 0.0])
    with pytest.raises(StepSizeUnderflow):
        simulate(e, SimConfig(t_final=1.0, dt_init=1e-13, integrator="rk4"), QUAD, BAND, diagnostics=False)


def test_potential_dimension_checked():
    e = init_particles(np.zeros((3, 2)) + np.arange(3)[:, None], np.zeros((3, 2)))
    with pytest.raises(IncompatiblePotential):
        simulate(e, SimConfig(t_final=1.0), QUAD, BAND)


def test_galilean_equivariance_rk4():
    e = sample_initial({"kind": "density_quantiles", "velocity": {"kind": "sine", "amplitude": 0.4}}, 16)
    c, w = 3.0, 0.7
    moved = init_particles(e.positions + c, e.velocities + w, e.weights)
    cfg = SimConfig(t_final=2.0, dt_init=0.01, integrator="rk4")
    a = simulate(e, cfg, QUAD, BAND, diagnostics=False).final
    b = simulate(moved, cfg, QUAD, BAND, diagnostics=False).final
    np.testing.assert_allclose(b.positions, a.positions + c + 2.0 * w, atol=1e-11)
    np.testing.assert_allclose(b.velocities, a.velocities + w, atol=1e-11)


def test_repeat_runs_identical():
    e = sample_initial({"kind": "uniform_box", "low": [-1, -1], "high": [1, 1],
                        "velocity": {"kind": "random"}}, 20, seed=4)
    cfg = SimConfig(t_final=3.0, record_interval=0.5)
    pot = PotentialSpec.quadratic(1.0, 2)
    a, b = simulate(e, cfg, pot, BAND), simulate(e, cfg, pot, BAND)
    np.testing.assert_array_equal(a.final.positions, b.final.positions)
    np.testing.assert_array_equal(a.column("Z_tilde"), b.column("Z_tilde"))


@pytest.fixture(scope="module")
def drifting_run():
    e = sample_initial({"kind": "uniform_box", "low": [-1, -1], "high": [1, 1],
                        "velocity": {"kind": "random", "low": [0.0, -1.0], "high": [1.0, 0.5]}}, 24, seed=8)
    cfg = SimConfig(t_final=8.0, record_interval=0.02)
    return e, simulate(e, cfg, PotentialSpec.quadratic(1.0, 2), KernelSpec.power_law(0.5, 1.0, floor=0.2))


def test_momentum_and_center_of_mass(drifting_run):
    e0, traj = drifting_run
    u = mean_velocity(e0)
    for t, e, _ in traj:
        assert np.all(e.weights == e0.weights)
        np.testing.assert_allclose(mean_velocity(e), u, atol=1e-12)
        np.testing.assert_allclose(center_of_mass(e), center_of_mass(e0) + t * u, atol=1e-12)


def _integral(t, y):
    return np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))])


def test_energy_drop_equals_integrated_dissipation(drifting_run):
    _, traj = drifting_run
    t, E, Zt = traj.column("t"), traj.column("E_diss"), traj.column("Z_tilde")
    assert np.all(np.diff(E) <= 10 * (1e-8 * np.abs(E[:-1]) + 1e-10))
    drop, integral = E[0] - E, _integral(t, Zt)
    late = integral > 0.1 * integral[-1]
    np.testing.assert_allclose(drop[late], integral[late], rtol=0.01)


def test_position_velocity_sum_identity(drifting_run):
    # with lam = 1 the quantity X + Z is twice the energy, so it drops by 2 int Z~
    _, traj = drifting_run
    t = traj.column("t")
    XZ = traj.column("X") + traj.column("Z")
    integral = _integral(t, traj.column("Z_tilde"))
    late = integral > 0.1 * integral[-1]
    np.testing.assert_allclose((XZ[0] - XZ)[late], 2 * integral[late], rtol=0.01)


def test_velocity_diameter_sandwich():
    kernel = KernelSpec.power_law(0.5, 1.0)
    e = sample_initial({"kind": "density_quantiles", "velocity": {"kind": "sine", "amplitude": 0.3}}, 24)
    traj = simulate(e, SimConfig(t_final=10.0, record_interval=0.1), QUAD, kernel)
    Dv, Dw, De = traj.column("D_v"), traj.column("D_omega"), traj.column("D_eta")
    assert np.all(Dv <= Dw + 2 * eval_Psi(kernel, De / 2) + 1e-12)
    x = np.array([en.positions[:, 0] for en in traj.ensembles])
    assert np.all(np.diff(x, axis=1) > 0)

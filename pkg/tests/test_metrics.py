import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from alignflow.ensemble import aux_omega, init_particles, reference_map
from alignflow.errors import AdmissibilityViolation
from alignflow.kernels import KernelSpec, eval_psi, radial_moment
from alignflow.metrics import (Atoms, DiagnosticsFrame, Dirac, FrameContext, UniformInterval,
                               compute_frame, diameter_bound_Dbar, diameters, dissipated_energy,
                               lyapunov_multiD, pairwise_L2, wasserstein_1d,
                               wasserstein_2_multiD_to_dirac)
from alignflow.oracles import (interval_atoms, monotone_sweep, transport_bruteforce,
                               transport_linprog)
from alignflow.potentials import PotentialSpec, eval_W

QUAD2 = PotentialSpec.quadratic(1.0, dim=2)
BAND = KernelSpec.bounded_band(0.5, 2.0, 4.0)


def brute_sums(e, kernel, potential):
    """Double loops over all ordered pairs; the reference for the vectorized sums."""
    X = Z = Zt = Wsum = 0.0
    for i in range(e.n):
        for j in range(e.n):
            mm = e.weights[i] * e.weights[j]
            dx = e.positions[i] - e.positions[j]
            dv = e.velocities[i] - e.velocities[j]
            X += mm * dx @ dx
            Z += mm * dv @ dv
            Wsum += mm * (eval_W(potential, dx) - eval_W(potential, np.zeros(e.dim)))
            if i != j:
                Zt += mm * eval_psi(kernel, math.sqrt(dx @ dx)) * (dv @ dv)
    return X, Z, Zt, 0.5 * Z + Wsum


def random_ensemble(seed, n=7, d=2):
    rng = np.random.default_rng(seed)
    return init_particles(rng.normal(size=(n, d)), rng.normal(size=(n, d)), rng.uniform(0.2, 1, n))


@pytest.mark.parametrize("seed", range(5))
def test_pairwise_sums_match_double_loops(seed):
    e = random_ensemble(seed)
    X, _, Z, Zt = pairwise_L2(e, None, BAND, "plain")
    bX, bZ, bZt, bE = brute_sums(e, BAND, QUAD2)
    assert X == pytest.approx(bX, rel=1e-12)
    assert Z == pytest.approx(bZ, rel=1e-12)
    assert Zt == pytest.approx(bZt, rel=1e-12)
    assert dissipated_energy(e, QUAD2) == pytest.approx(bE, rel=1e-12)


def test_examples():
    e = init_particles([0.0, 2.0, 5.0], [1.0, 1.0, 1.0])
    d = diameters(e)
    assert d["D_eta"] == 5.0 and d["D_v"] == 0.0
    two = init_particles([0.0, 2.0], [0.0, 0.0])
    d = diameters(two, omega=aux_omega(two, KernelSpec.constant(1.0)))
    assert d["D_omega"] == pytest.approx(2.0)
    pair = init_particles([-1.0, 1.0], [0.3, 0.3])
    X, _, Z, Zt = pairwise_L2(pair, None, BAND, "plain")
    assert X == pytest.approx(2.0) and Z == 0.0 and Zt == 0.0


def test_constant_kernel_factors_out():
    e = random_ensemble(3)
    _, _, Z, Zt = pairwise_L2(e, None, KernelSpec.constant(2.5), "plain")
    assert Zt == pytest.approx(2.5 * Z, rel=1e-12)


def test_lyapunov_values():
    e = random_ensemble(4)
    E = dissipated_energy(e, QUAD2)
    E_zeta, _, L = lyapunov_multiD(e, QUAD2, BAND, zeta=0.0)
    assert E_zeta == pytest.approx(E)
    X, _, Z, _ = pairwise_L2(e, None, BAND, "plain")
    assert L == pytest.approx(X + Z)
    # constant kernel: the radial-moment term is xi psi X / 2
    k = KernelSpec.constant(0.8)
    _, E_xi, _ = lyapunov_multiD(e, QUAD2, k, xi=0.3)
    dist = np.sqrt(((e.positions[:, None] - e.positions[None]) ** 2).sum(-1))
    radial = e.weights @ radial_moment(k, dist) @ e.weights
    assert radial == pytest.approx(0.8 * X / 2, rel=1e-12)
    dx = e.positions - e.weights @ e.positions
    dv = e.velocities - e.weights @ e.velocities
    cross = 2 * e.weights @ np.sum(dx * dv, axis=1)
    assert E_xi == pytest.approx(E + 0.3 * (cross + 0.8 * X / 2), rel=1e-12)


def test_flocked_state_zero():
    e = init_particles(np.ones((4, 2)), np.full((4, 2), 0.5))
    vals = lyapunov_multiD(e, QUAD2, BAND, zeta=0.1, xi=0.2)
    np.testing.assert_allclose(vals, 0.0, atol=1e-15)


def test_admissibility_names_inequality():
    e = random_ensemble(1)
    with pytest.raises(AdmissibilityViolation, match="psi_m/"):
        lyapunov_multiD(e, QUAD2, BAND, zeta=0.2)
    with pytest.raises(AdmissibilityViolation, match="psi_m"):
        lyapunov_multiD(e, QUAD2, BAND, xi=0.6)
    with pytest.raises(AdmissibilityViolation):
        lyapunov_multiD(e, QUAD2, KernelSpec.power_law(0.5, 1.0), zeta=0.01)


def test_wasserstein_examples():
    e = init_particles([0.0, 2.0], [0.0, 0.0])
    assert wasserstein_1d(2, e, Dirac(1.0)) == pytest.approx(1.0)
    dinf = wasserstein_1d(math.inf, e, Dirac(1.0))
    assert dinf == pytest.approx(1.0) and 1.0 <= dinf <= 2.0
    for p in (1, 2, math.inf):
        assert wasserstein_1d(p, e, Atoms(e.positions[:, 0], e.weights)) == 0.0
    half = init_particles([-0.5, 0.5], [0.0, 0.0])
    exact = wasserstein_1d(2, half, UniformInterval(0.0, 1.0))
    assert exact == pytest.approx(math.sqrt(1 / 12), rel=1e-12)
    x, w = interval_atoms(0.0, 1.0)
    assert abs(exact - monotone_sweep(2, [-0.5, 0.5], [0.5, 0.5], x, w)) < 1e-4


def test_multid_dirac_distance():
    e = init_particles([[-1.0, 0.0], [1.0, 0.0]], np.zeros((2, 2)))
    assert wasserstein_2_multiD_to_dirac(e) == pytest.approx(1.0)
    assert wasserstein_2_multiD_to_dirac(init_particles(np.ones((3, 2)), np.zeros((3, 2)))) == 0.0
    r = random_ensemble(9)
    X = pairwise_L2(r, None, BAND, "plain")[0]
    assert wasserstein_2_multiD_to_dirac(r) ** 2 == pytest.approx(X / 2, rel=1e-12)


atoms = st.integers(2, 6).flatmap(lambda n: st.tuples(
    arrays(float, n, elements=st.floats(-5, 5)), arrays(float, n, elements=st.floats(-5, 5))))


@given(atoms, st.sampled_from([1.0, 2.0, math.inf]))
def test_equal_weights_match_permutations(pair, p):
    x, y = pair
    w = np.full(len(x), 1.0 / len(x))
    assert wasserstein_1d(p, Atoms(x, w), Atoms(y, w)) == pytest.approx(transport_bruteforce(p, x, y), abs=1e-9)


@given(st.integers(0, 10_000), st.sampled_from([1.0, 2.0, math.inf]))
def test_general_weights_match_linprog(seed, p):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(2, 6, 2)
    x, y = rng.normal(size=n), rng.normal(size=m)
    wx, wy = rng.uniform(0.1, 1, n), rng.uniform(0.1, 1, m)
    got = wasserstein_1d(p, Atoms(x, wx), Atoms(y, wy))
    assert got == pytest.approx(transport_linprog(p, x, wx, y, wy), abs=1e-7)


@given(st.integers(0, 10_000))
def test_triangle_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    meas = [Atoms(rng.normal(size=k), rng.uniform(0.1, 1, k)) for k in rng.integers(2, 7, 3)]
    for p in (1.0, 2.0, math.inf):
        ab = wasserstein_1d(p, meas[0], meas[1])
        assert ab == pytest.approx(wasserstein_1d(p, meas[1], meas[0]), abs=1e-12)
        assert ab <= wasserstein_1d(p, meas[0], meas[2]) + wasserstein_1d(p, meas[2], meas[1]) + 1e-12


@given(st.integers(0, 10_000))
def test_interval_matches_discretization(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 15))
    x, w = rng.uniform(-1, 1, n), rng.uniform(0.1, 1, n)
    c, h = rng.uniform(-0.5, 0.5), rng.uniform(0.25, 0.75)
    ya, yw = interval_atoms(c, h)
    for p in (1.0, 2.0, math.inf):
        assert abs(wasserstein_1d(p, Atoms(x, w), UniformInterval(c, h)) - monotone_sweep(p, x, w, ya, yw)) < 1e-4


@given(st.integers(0, 10_000))
def test_dinf_to_center_within_diameter(seed):
    rng = np.random.default_rng(seed)
    e = init_particles(rng.normal(size=6), np.zeros(6), rng.uniform(0.1, 1, 6))
    com = float(e.weights @ e.positions[:, 0])
    d = wasserstein_1d(math.inf, e, Dirac(com))
    D = float(np.ptp(e.positions))
    assert D / 2 - 1e-12 <= d <= D + 1e-12


def test_dbar_examples():
    f = DiagnosticsFrame(D_eta=2.0, D_omega=0.0)
    assert diameter_bound_Dbar(f, KernelSpec.constant(1.0)) == pytest.approx(7.0)
    assert diameter_bound_Dbar(f, KernelSpec.constant(0.1)) == pytest.approx(5.2)
    for k in (KernelSpec.constant(1e-6), BAND):
        assert diameter_bound_Dbar(DiagnosticsFrame(D_eta=0.1, D_omega=0.0), k) >= 4.0


def test_coulomb_frame_fields():
    e = init_particles(np.linspace(-0.9, 0.9, 16), 0.1 * np.sin(np.arange(16)))
    ctx = FrameContext(PotentialSpec.coulomb_quadratic(), BAND,
                       reference_map(e, PotentialSpec.coulomb_quadratic()))
    f = compute_frame(e, ctx)
    assert ctx.mode == "coulomb_perturbation"
    assert f.momentum_drift == 0.0 and f.com_drift == 0.0
    assert f.winf_to_profile >= 1.0 / 16 - 1e-12
    assert math.isnan(f.L_cal)

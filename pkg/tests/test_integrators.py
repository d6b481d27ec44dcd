import numpy as np
import pytest
from scipy.linalg import expm

from sevensphere.frames import CombinedField, frame_field, generator_matrix
from sevensphere.geometry import geodesic_distance, random_sphere_point
from sevensphere.integrators import (NoisePath, SdeProblem, brownian_problem,
                                     combination_problem, exact_rotation_step,
                                     frame_rotation_apply, frame_rotation_matrix,
                                     heun_stratonovich_step, ito_correction_drift,
                                     ito_euler_step, load_noise_path,
                                     path_generator, sample_brownian,
                                     save_noise_path, simulate_ensemble,
                                     single_frame_problem, write_trajectories_csv)
from conftest import unit_vector

E = np.eye(8)


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------

def test_brownian_deterministic():
    a = sample_brownian(100, 0.01, 7, seed=42)
    b = sample_brownian(100, 0.01, 7, seed=42)
    np.testing.assert_array_equal(a.increments, b.increments)


def test_brownian_path_indices_differ():
    a = sample_brownian(10, 0.01, 1, seed=42, path_index=0)
    b = sample_brownian(10, 0.01, 1, seed=42, path_index=1)
    assert np.max(np.abs(a.increments - b.increments)) > 0


def test_brownian_variance():
    path = sample_brownian(10 ** 6, 0.01, 1, seed=1)
    var = float(np.var(path.increments))
    assert abs(var - 0.01) / 0.01 < 0.005


def test_brownian_channels_uncorrelated():
    path = sample_brownian(10 ** 6, 1.0, 7, seed=2)
    corr = np.corrcoef(path.increments.T)
    off = corr - np.diag(np.diag(corr))
    assert np.max(np.abs(off)) < 0.01


def test_noise_path_validation():
    with pytest.raises(ValueError):
        NoisePath(0.0, np.zeros((3, 1)))
    with pytest.raises(ValueError):
        sample_brownian(0, 0.1, 1, seed=3)


def test_noise_save_load_roundtrip(tmp_path):
    path = sample_brownian(50, 0.02, 3, seed=9)
    fname = tmp_path / "noise.csv"
    save_noise_path(path, fname)
    back = load_noise_path(fname)
    assert back.dt == path.dt
    np.testing.assert_array_equal(back.increments, path.increments)


def test_noise_coarsening_conserves_sum():
    path = sample_brownian(103, 0.01, 2, seed=11)
    coarse = path.coarsened(4)
    np.testing.assert_allclose(coarse.increments.sum(axis=0),
                               path.increments.sum(axis=0), atol=1e-15)
    assert coarse.dt == 0.04


# --------------------------------------------------------------------------
# Ito correction
# --------------------------------------------------------------------------

def test_correction_single_frame_exact(rng):
    z = unit_vector(rng)
    for mu in range(1, 8):
        np.testing.assert_array_equal(ito_correction_drift(frame_field(mu), z), -z)


def test_correction_zero_field(rng):
    z = unit_vector(rng)
    zero = CombinedField.constant(np.zeros(7))
    np.testing.assert_allclose(ito_correction_drift(zero, z), np.zeros(8), atol=0)


def test_correction_full_frame(rng):
    z = unit_vector(rng)
    fields = [frame_field(mu) for mu in range(1, 8)]
    np.testing.assert_allclose(ito_correction_drift(fields, z), -7.0 * z, atol=1e-14)


def test_correction_fd_matches_generator(rng):
    z = unit_vector(rng)
    combo = CombinedField.constant(np.array([0.5, 0, -1.0, 0, 0, 2.0, 0]))
    exact = ito_correction_drift(combo, z)

    def bare(x):  # same field without the generator attribute
        return combo(x)

    np.testing.assert_allclose(ito_correction_drift(bare, z), exact, atol=1e-6)


# --------------------------------------------------------------------------
# steps
# --------------------------------------------------------------------------

def test_exact_step_quarter_turn():
    coeffs = np.zeros((1, 7))
    coeffs[0, 0] = 1.0
    out = exact_rotation_step(coeffs, E[0], np.array([np.pi / 2]))
    np.testing.assert_allclose(out, E[1], atol=1e-13)


def test_exact_step_zero_increment(rng):
    z = unit_vector(rng)
    out = exact_rotation_step(np.eye(7), z, np.zeros(7))
    np.testing.assert_array_equal(out, z)


def test_exact_step_isometry(rng):
    x = unit_vector(rng)
    y = unit_vector(rng)
    dw = rng.normal(0, 0.3, 7)
    xr = frame_rotation_apply(dw, x)
    yr = frame_rotation_apply(dw, y)
    assert abs(np.linalg.norm(xr) - 1.0) <= 1e-14
    assert abs(np.dot(xr, yr) - np.dot(x, y)) <= 1e-13


def test_closed_form_rotation_matches_pade_expm(rng):
    # dual route: the anticommutation closed form against scipy's
    # scaling-and-squaring exponential of the same skew matrix
    for _ in range(20):
        a = rng.normal(0, 0.7, 7)
        k = np.tensordot(a, np.stack([generator_matrix(m) for m in range(1, 8)]),
                         axes=(0, 0))
        np.testing.assert_allclose(frame_rotation_matrix(a), expm(k), atol=1e-13)


def test_heun_zero_increment_fixed_point(rng):
    z = unit_vector(rng)
    problem = single_frame_problem(1, z)
    out, defect = heun_stratonovich_step(problem, z, np.zeros(1), 0.01)
    np.testing.assert_allclose(out, z, atol=1e-15)
    assert defect <= 1e-15


def test_heun_output_unit_norm(rng):
    z = unit_vector(rng)
    problem = brownian_problem(z)
    out, _ = heun_stratonovich_step(problem, z, rng.normal(0, 0.1, 7), 0.01)
    assert abs(np.linalg.norm(out) - 1.0) <= 1e-14


def test_heun_one_step_order_three_halves():
    # coupled one-step strong error against the exact rotation: the local
    # defect is |dW|^3/6, so halving dt scales the averaged error by 2^(3/2)
    rng = np.random.default_rng(77)
    z0 = random_sphere_point(rng)
    problem = single_frame_problem(1, z0)
    xi = rng.standard_normal(64)
    errors = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        dw = (np.sqrt(dt) * xi)[:, None]
        z = np.broadcast_to(z0, (64, 8))
        heun, _ = heun_stratonovich_step(problem, z, dw, dt)
        exact = exact_rotation_step(problem.frame_coefficients, z, dw)
        errors.append(float(np.mean(np.linalg.norm(heun - exact, axis=1))))
    for a, b in zip(errors, errors[1:]):
        assert 2.5 <= a / b <= 3.2


def test_ito_euler_drift_uses_half_correction(rng):
    z = unit_vector(rng)
    problem = single_frame_problem(1, z)
    dt = 1e-4
    out, _ = ito_euler_step(problem, z, np.zeros(1), dt)
    # drift-only step: z + dt/2 * (-z), renormalized; displacement ~ 0
    np.testing.assert_allclose(out, z, atol=1e-12)


# --------------------------------------------------------------------------
# ensembles
# --------------------------------------------------------------------------

def test_exact_rejected_for_state_dependent():
    field = CombinedField(lambda z: np.stack(
        [z[..., 0]] + [np.zeros_like(z[..., 0])] * 6, axis=-1))
    problem = SdeProblem((field,), E[0], channel_mode="shared")
    with pytest.raises(ValueError):
        simulate_ensemble(problem, 2, 2, 0.01, seed=1, scheme="exact_rotation")


def test_strong_error_decreases_with_refinement():
    # shared increments across levels; averaged heun error against the exact flow
    t = 0.5
    z0 = E[0]
    problem = single_frame_problem(2, z0)
    n_paths = 32
    paths = [sample_brownian(512, t / 512, 1, seed=5150, path_index=k)
             for k in range(n_paths)]
    errors = []
    for level in (8, 4, 2, 1):
        level_errors = []
        for fine in paths:
            coarse = fine.coarsened(level)
            z = z0.copy()
            zx = z0.copy()
            for dw in coarse.increments:
                z, _ = heun_stratonovich_step(problem, z, dw, coarse.dt)
                zx = exact_rotation_step(problem.frame_coefficients, zx, dw)
            level_errors.append(np.linalg.norm(z - zx))
        errors.append(float(np.mean(level_errors)))
    assert all(a > b for a, b in zip(errors, errors[1:]))


def test_full_frame_mean_decay():
    # linear functions are eigenfunctions of the generator with eigenvalue -7/2
    n = 20000
    t = 0.1
    z0 = np.zeros(8)
    z0[0] = 1.0
    problem = brownian_problem(z0)
    result = simulate_ensemble(problem, n, 100, t / 100, seed=31,
                               scheme="exact_rotation")
    mean = result.final_states.mean(axis=0)
    target = np.exp(-3.5 * t) * z0
    se = result.final_states.std(axis=0, ddof=1) / np.sqrt(n)
    np.testing.assert_array_less(np.abs(mean - target), 3.0 * se + 1e-12)
    assert target[0] == pytest.approx(0.7047, abs=2e-4)


def test_full_frame_quadratic_mode_decay():
    # the trace-free part of (z1)^2 is a degree-2 harmonic with generator
    # eigenvalue -8, so E[(z1)^2] relaxes to 1/8 at rate e^{-8t}
    n = 30000
    t = 0.1
    z0 = random_sphere_point(np.random.default_rng(47))
    problem = brownian_problem(z0)
    result = simulate_ensemble(problem, n, 100, t / 100, seed=47,
                               scheme="exact_rotation")
    vals = result.final_states[:, 0] ** 2
    target = 0.125 + (z0[0] ** 2 - 0.125) * np.exp(-8.0 * t)
    se = vals.std(ddof=1) / np.sqrt(n)
    assert abs(vals.mean() - target) < 3.0 * se


def test_heun_weak_quadratic_mode():
    # heun must reproduce the degree-2 relaxation too, not just the means
    z0 = random_sphere_point(np.random.default_rng(53))
    t = 0.1
    result = simulate_ensemble(brownian_problem(z0), 20000, 100, t / 100,
                               seed=53, scheme="heun")
    vals = result.final_states[:, 0] ** 2
    target = 0.125 + (z0[0] ** 2 - 0.125) * np.exp(-8.0 * t)
    se = vals.std(ddof=1) / np.sqrt(20000)
    assert abs(vals.mean() - target) < 3.0 * se


def test_ito_stratonovich_ensembles_agree():
    n = 20000
    t = 0.1
    z0 = random_sphere_point(np.random.default_rng(8))
    problem = brownian_problem(z0)
    heun = simulate_ensemble(problem, n, 100, t / 100, seed=100, scheme="heun")
    ito = simulate_ensemble(problem, n, 100, t / 100, seed=200, scheme="ito_euler")
    mh = heun.final_states.mean(axis=0)
    mi = ito.final_states.mean(axis=0)
    se = np.hypot(heun.final_states.std(axis=0, ddof=1),
                  ito.final_states.std(axis=0, ddof=1)) / np.sqrt(n)
    np.testing.assert_array_less(np.abs(mh - mi), 3.0 * se + 1e-12)


def test_heun_norm_defect_order_dt():
    z0 = random_sphere_point(np.random.default_rng(4))
    problem = brownian_problem(z0)
    defects = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        result = simulate_ensemble(problem, 64, int(0.2 / dt), dt, seed=64,
                                   scheme="heun")
        defects.append(result.max_renorm_defect)
    assert all(d > 0 for d in defects)
    assert all(a > b for a, b in zip(defects, defects[1:]))


def test_ensemble_deterministic_across_workers():
    z0 = E[0]
    problem = brownian_problem(z0)
    runs = [simulate_ensemble(problem, 2500, 20, 0.01, seed=7, scheme="heun",
                              threads=k) for k in (1, 4, 8)]
    for other in runs[1:]:
        np.testing.assert_array_equal(runs[0].states, other.states)


def test_exact_n_point_isometry_over_many_steps(rng):
    pts = random_sphere_point(rng, 12)
    iu = np.triu_indices(12, 1)
    before = geodesic_distance(pts[iu[0]], pts[iu[1]])
    noise = sample_brownian(1000, 1e-3, 7, seed=12)
    state = pts.copy()
    for dw in noise.increments:
        state = frame_rotation_apply(dw, state)
    after = geodesic_distance(state[iu[0]], state[iu[1]])
    assert np.max(np.abs(after - before)) < 1e-12


def test_trajectory_and_csv(tmp_path):
    problem = single_frame_problem(1, E[0])
    result = simulate_ensemble(problem, 3, 10, 0.01, seed=77, scheme="heun",
                               save_times=[0.0, 0.05, 0.1])
    traj = result.trajectory(1)
    assert traj.path_id == 1
    assert traj.seed_lineage == (77, 1)
    assert np.max(np.abs(np.linalg.norm(traj.states, axis=1) - 1.0)) < 1e-12
    fname = tmp_path / "traj.csv"
    write_trajectories_csv(result, fname)
    lines = fname.read_text().splitlines()
    assert lines[0] == "path_id,t,z1,z2,z3,z4,z5,z6,z7,z8"
    assert len(lines) == 1 + 3 * 3


def test_save_times_validated():
    problem = single_frame_problem(1, E[0])
    with pytest.raises(ValueError):
        simulate_ensemble(problem, 1, 10, 0.01, seed=1, save_times=[0.005])


def test_shared_channel_combination_matches_single_generator(rng):
    c = np.array([0.6, 0, 0, 0.8, 0, 0, 0])
    z0 = unit_vector(rng)
    problem = combination_problem(c, z0)
    assert problem.n_channels == 1
    dw = np.array([0.3])
    out = exact_rotation_step(problem.frame_coefficients, z0, dw)
    k = 0.6 * generator_matrix(1) + 0.8 * generator_matrix(4)
    np.testing.assert_allclose(out, expm(0.3 * k) @ z0, atol=1e-13)


def test_path_generator_reproducible():
    a = path_generator(99, 5).normal(size=4)
    b = path_generator(99, 5).normal(size=4)
    np.testing.assert_array_equal(a, b)


def test_heun_integrates_deterministic_drift():
    # zero noise, rotational drift: the midpoint scheme tracks the rotation
    # with second-order accuracy
    z0 = E[0]
    problem = SdeProblem((frame_field(2),), z0, drift=frame_field(1),
                         frame_coefficients=np.eye(7)[1:2])
    t = 1.0
    errors = []
    for n in (50, 100, 200):
        z = z0.copy()
        for _ in range(n):
            z, _ = heun_stratonovich_step(problem, z, np.zeros(1), t / n)
        exact = expm(t * generator_matrix(1)) @ z0
        errors.append(np.linalg.norm(z - exact))
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.2)
    assert errors[1] / errors[2] == pytest.approx(4.0, rel=0.2)


def test_exact_scheme_rejects_drift():
    problem = SdeProblem((frame_field(1),), E[0], drift=frame_field(2),
                         frame_coefficients=np.eye(7)[:1])
    with pytest.raises(ValueError):
        simulate_ensemble(problem, 1, 2, 0.01, seed=1, scheme="exact_rotation")


def test_ito_correction_rejects_non_finite():
    def broken(z):
        out = np.asarray(z, dtype=float).copy()
        out[0] = np.nan
        return out

    with pytest.raises(FloatingPointError):
        ito_correction_drift(broken, E[0])

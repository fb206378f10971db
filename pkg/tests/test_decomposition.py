import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soldmd import bench
from soldmd import decomposition as dmd
from soldmd.errors import DegenerateDataError, InputError, StateError
from soldmd.kernels import KernelSpec
from soldmd.quadrature import TimeGrid, make_rule
from soldmd.signals import Dataset, Trajectory

LIN1, LIN2 = KernelSpec("linear", 1.0, 1), KernelSpec("linear", 1.0, 2)


def const(a, grid, iv=None):
    a = np.asarray(a, dtype=float)
    return Trajectory(grid, np.tile(a, (grid.count, 1)), iv)


def oscillator_dataset(dt, dim=2, horizon=5.0, corner=0.8):
    x0s, v0s = bench.training_conditions(corner, dim)
    grid = TimeGrid(dt, int(round(horizon / dt)) + 1)
    return Dataset(tuple(
        Trajectory(grid, bench.oscillator_truth(x, v, grid.times), v, str(k))
        for k, (x, v) in enumerate(zip(x0s, v0s))
    ))


@pytest.fixture(scope="module")
def linear_model():
    return dmd.fit(oscillator_dataset(0.01), LIN2, ridge=0.0)


# ------------------------------------------------------------- occupation


def test_occupation_eval_constant_linear():
    g = TimeGrid(0.01, 101)
    rule = make_rule(g, 2)
    a, p = np.array([1.5, -2.0]), np.array([0.3, 0.7])
    assert dmd.occupation_eval(LIN2, rule, const(a, g), p) == pytest.approx(0.5 * p @ a, rel=1e-12)
    assert dmd.occupation_eval(LIN2, rule, const(a, g), [2.0, 1.5]) == pytest.approx(0.0, abs=1e-15)


def test_occupation_eval_gaussian_far_point():
    g = TimeGrid(0.1, 11)
    gauss = KernelSpec("gaussian", 0.5, 1)
    traj = Trajectory(g, np.sin(g.times))
    assert abs(dmd.occupation_eval(gauss, make_rule(g, 2), traj, [10.0])) < 1e-8


def test_occupation_eval_grid_mismatch():
    rule = make_rule(TimeGrid(0.1, 11), 2)
    with pytest.raises(InputError):
        dmd.occupation_eval(LIN1, rule, Trajectory(TimeGrid(0.1, 12), np.zeros(12)), [0.0])


# ------------------------------------------------------------------- gram


def test_gram_constant_orthogonal():
    g = TimeGrid(0.01, 101)
    G = dmd.gram(LIN2, make_rule(g, 2), Dataset((const([1, 0], g), const([0, 1], g))))
    np.testing.assert_allclose(G, [[0.25, 0], [0, 0.25]], atol=1e-12)


def test_gram_single_trajectory_nonnegative():
    g = TimeGrid(0.1, 21)
    G = dmd.gram(KernelSpec("gaussian", 1.0, 1), make_rule(g, 2), Trajectory(g, np.cos(g.times)))
    assert G.shape == (1, 1) and G[0, 0] >= 0


def test_gram_separable_closed_form():
    g = TimeGrid(1e-3, 1001)
    G = dmd.gram(LIN1, make_rule(g, 2), Trajectory(g, g.times))
    # (int_0^1 (1 - t) t dt)^2
    assert G[0, 0] == pytest.approx((1 / 6) ** 2, abs=1e-5)


@given(st.sampled_from(["gaussian", "linear", "exponential"]), st.integers(1, 8),
       st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_gram_symmetric_psd(family, M, n, seed):
    rng = np.random.default_rng(seed)
    g = TimeGrid(0.2, 9)
    data = Dataset(tuple(Trajectory(g, rng.uniform(-1, 1, (9, n))) for _ in range(M)))
    G = dmd.gram(KernelSpec(family, 1.5, n), make_rule(g, 2), data)
    np.testing.assert_array_equal(G, G.T)
    ev = np.linalg.eigvalsh(G)
    assert ev.min() >= -1e-8 * max(ev.max(), 0)


# ------------------------------------------------------------ interaction


def test_interaction_constant_zero_velocity():
    g = TimeGrid(0.1, 11)
    data = Dataset((const([1.0, 2.0], g, [0, 0]), const([-1.0, 0.5], g, [0, 0])))
    for fam in ("gaussian", "linear", "exponential"):
        A = dmd.interaction(KernelSpec(fam, 1.0, 2), make_rule(g, 2), data)
        np.testing.assert_allclose(A, 0.0, atol=1e-14)


def test_interaction_cosine_ratio():
    g = TimeGrid(1e-3, 5001)
    data = Trajectory(g, np.cos(math.sqrt(2) * g.times), [0.0])
    rule = make_rule(g, 2)
    A, G = dmd.interaction(LIN1, rule, data), dmd.gram(LIN1, rule, data)
    assert A[0, 0] / G[0, 0] == pytest.approx(-2.0, abs=1e-3)


def test_interaction_scales_with_kernel():
    # for the linear kernel, scaling the data by s scales every kernel value by s^2
    data = oscillator_dataset(0.05)
    rule = make_rule(data.grid, 2)
    s = 1.7
    scaled = Dataset(tuple(Trajectory(t.grid, s * t.samples, s * t.initial_velocity) for t in data))
    A = dmd.interaction(LIN2, rule, data)
    np.testing.assert_allclose(dmd.interaction(LIN2, rule, scaled), s**2 * A,
                               rtol=0, atol=1e-12 * np.abs(A).max())


def test_interaction_needs_velocities():
    g = TimeGrid(0.1, 5)
    with pytest.raises(StateError):
        dmd.interaction(LIN1, make_rule(g, 2), Trajectory(g, np.zeros(5)))


def test_adjoint_consistency_rate():
    defects = []
    for dt in (0.02, 0.01):
        data = oscillator_dataset(dt)
        rule = make_rule(data.grid, 2)
        A, G = dmd.interaction(LIN2, rule, data), dmd.gram(LIN2, rule, data)
        defects.append(np.abs(A + 2 * G).max())
        assert defects[-1] <= dt**2 * np.abs(G).max()
    assert defects[0] / defects[1] > 3.5


# ------------------------------------------------------------ finite rank


def test_finite_rank_identity():
    np.testing.assert_array_equal(dmd.finite_rank(np.eye(3), -2 * np.eye(3), 0.0), -2 * np.eye(3))


def test_finite_rank_proportional():
    rng = np.random.default_rng(3)
    B = rng.normal(size=(5, 5))
    G = B @ B.T + 0.1 * np.eye(5)
    np.testing.assert_allclose(dmd.finite_rank(G, -2 * G, 0.0), -2 * np.eye(5), atol=1e-10)


def test_finite_rank_large_ridge():
    rng = np.random.default_rng(4)
    G, A = np.eye(3) * 1e-3, rng.normal(size=(3, 3))
    np.testing.assert_allclose(dmd.finite_rank(G, A, 1e9), A / 1e9, rtol=1e-10)


def test_finite_rank_default_ridge():
    G = np.diag([2.0, 4.0])
    _, info = dmd.finite_rank(G, G, return_info=True)
    assert info.ridge == pytest.approx(3e-8)


def test_finite_rank_duplicates_named():
    G = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(DegenerateDataError) as exc:
        dmd.finite_rank(G, G, 0.0)
    assert list(exc.value.pairs) == [(0, 1)]


def test_finite_rank_singular_without_duplicates_uses_pseudoinverse():
    v = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]).T
    G = v @ v.T  # rank 2, no two columns coincide
    A = -2 * G
    X, info = dmd.finite_rank(G, A, 0.0, return_info=True)
    assert info.truncated and info.rank == 2
    np.testing.assert_allclose(X, -2 * np.linalg.pinv(G) @ G, atol=1e-10)


def test_finite_rank_rejects_negative_ridge():
    with pytest.raises(InputError):
        dmd.finite_rank(np.eye(2), np.eye(2), -1.0)


# ----------------------------------------------------------------- eigen


def test_eigendecompose_sorted():
    vals, _ = dmd.eigendecompose(np.diag([-2.0, 3.0]))
    np.testing.assert_array_equal(vals, [3, -2])


def test_eigendecompose_rotation():
    vals, vecs = dmd.eigendecompose([[0, 1], [-2, 0]])
    np.testing.assert_allclose(vals, [1j * math.sqrt(2), -1j * math.sqrt(2)], atol=1e-14)


def test_eigendecompose_nilpotent():
    X = np.array([[0.0, 1.0], [0.0, 0.0]])
    vals, vecs = dmd.eigendecompose(X)
    np.testing.assert_array_equal(vals, [0, 0])
    for lam, v in zip(vals, vecs.T):
        assert np.linalg.norm(X @ v - lam * v) <= 1e-8 * np.linalg.norm(X) * np.linalg.norm(v)


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_eigendecompose_contract(n, seed):
    X = np.random.default_rng(seed).normal(size=(n, n))
    vals, vecs = dmd.eigendecompose(X)
    for lam, v in zip(vals, vecs.T):
        assert np.linalg.norm(X @ v - lam * v) <= 1e-8 * np.linalg.norm(X, 2) * np.linalg.norm(v)
    np.testing.assert_allclose(np.sort_complex(vals), np.sort_complex(vals.conj()), atol=1e-8)
    mags = np.abs(vals)
    assert np.all(np.diff(mags) <= 1e-10 * max(mags.max(), 1))


# -------------------------------------------------------------------- fit


def test_fit_single_trajectory_modes():
    g = TimeGrid(0.05, 41)
    tr = Trajectory(g, np.cos(math.sqrt(2) * g.times), [0.0])
    model = dmd.fit(tr, LIN1, ridge=0.0)
    rule = make_rule(g, 2)
    G = dmd.gram(LIN1, rule, tr)[0, 0]
    V = dmd.identity_projections(rule, model.training_samples)
    assert model.rank == 1
    np.testing.assert_allclose(np.abs(model.modes), np.abs(V) / math.sqrt(G), rtol=1e-12)
    np.testing.assert_allclose(model.modes * model.coeffs[0, 0] * G, V, rtol=1e-12)


def test_fit_oscillator_eigenvalues(linear_model):
    assert linear_model.rank == 2
    assert np.abs(linear_model.eigenvalues + 2).max() < 1e-2


def test_fit_duplicate_trajectory():
    data = oscillator_dataset(0.05)
    with pytest.raises(DegenerateDataError):
        dmd.fit(Dataset((*data.trajectories, data[0])), LIN2)


def test_fit_dimension_mismatch():
    with pytest.raises(InputError):
        dmd.fit(oscillator_dataset(0.1), LIN1)


def test_fit_estimates_missing_velocities():
    data = oscillator_dataset(0.01)
    bare = Dataset(tuple(Trajectory(t.grid, t.samples) for t in data))
    model = dmd.fit(bare, LIN2, ridge=0.0)
    assert np.abs(model.eigenvalues + 2).max() < 1e-2


def _training_gram(m):
    return dmd.gram(m.kernel, m.rule, Dataset(tuple(Trajectory(m.rule.grid, s) for s in m.training_samples)))


@pytest.mark.parametrize("sigma", [0.0, 0.01])
def test_coefficient_normalization(sigma):
    _, m = bench.fit_experiment1(bench.Experiment1Config(sigma=sigma))
    G = _training_gram(m)
    for row in m.coeffs:
        assert row @ G @ row == pytest.approx(1.0, abs=1e-8)


def test_coefficient_normalization_degenerate_pair(linear_model):
    # a nearly double eigenvalue makes the unconjugated norm almost vanish,
    # so the recomputed form is only good to roundoff on |row|^2 |G|
    G = _training_gram(linear_model)
    for row in linear_model.coeffs:
        tol = 1e-13 * np.abs(row).max() ** 2 * np.abs(G).max()
        assert abs(row @ G @ row - 1.0) <= max(tol, 1e-8)


def test_conjugate_pairs():
    model = dmd.fit(oscillator_dataset(0.5, dim=1), KernelSpec("gaussian", 24.0, 1))
    vals = model.eigenvalues
    np.testing.assert_allclose(np.sort_complex(vals), np.sort_complex(vals.conj()), atol=1e-8)
    for k, lam in enumerate(vals):
        if abs(lam.imag) > 1e-8:
            j = int(np.argmin(np.abs(vals - lam.conj())))
            np.testing.assert_allclose(model.coeffs[j], model.coeffs[k].conj(), atol=1e-8)


# ------------------------------------------------------- eigenfunctions


def _toy_model(a, T=1.0):
    g = TimeGrid(T / 100, 101)
    samples = np.tile(np.asarray(a, float), (g.count, 1))[None]
    n = len(a)
    return dmd.SodmdModel(KernelSpec("linear", 1.0, n), make_rule(g, 2), samples, np.zeros((1, n)),
                          np.array([-2.0 + 0j]), np.ones((1, 1), complex), np.ones((n, 1), complex))


def test_eigenfunction_unit_coefficients():
    a, x0 = np.array([1.0, -3.0]), np.array([0.4, 0.2])
    phi0, dphi0 = dmd.eigenfunction_at(_toy_model(a), 0, x0, [0.0, 0.0])
    assert phi0 == pytest.approx(0.5 * a @ x0, rel=1e-12)
    assert dphi0 == 0
    phi_c, _ = dmd.eigenfunction_at(_toy_model(a), 0, 3 * x0, [0.0, 0.0])
    assert phi_c == pytest.approx(3 * phi0, rel=1e-12)


def test_eigenfunction_directional_derivative():
    # phi(x) = 0.5 a.x, so grad phi . v = 0.5 a.v
    a, v = np.array([1.0, -3.0]), np.array([0.7, 0.1])
    _, dphi0 = dmd.eigenfunction_at(_toy_model(a), 0, [0.1, 0.1], v)
    assert dphi0 == pytest.approx(0.5 * a @ v, rel=1e-12)


def test_eigenfunction_index_and_dimension_checks():
    model = _toy_model([1.0])
    with pytest.raises(InputError):
        dmd.eigenfunction_at(model, 1, [0.0], [0.0])
    with pytest.raises(InputError):
        dmd.eigenfunction_at(model, 0, [0.0, 1.0], [0.0])


# --------------------------------------------------------- reconstruction


def test_single_mode_cosine():
    t = np.array([0.0, 1.0, 2.5])
    c = dmd.modal_response([-2.0 + 0j], np.array([1.0 + 0j]), np.array([0j]), t)
    np.testing.assert_allclose(c[:, 0].real, np.cos(math.sqrt(2) * t), atol=1e-15)
    assert c[1, 0].real == pytest.approx(0.1559437, abs=1e-7)


def test_zero_eigenvalue_limit():
    t = np.linspace(0, 3, 7)
    c = dmd.modal_response([0j], np.array([2.0 + 0j]), np.array([3.0 + 0j]), t)
    np.testing.assert_allclose(c[:, 0], 2 + 3 * t)


def _two_exponential(lam, phi0, dphi0, t, signs):
    s = np.sqrt(lam.astype(complex)) * signs
    e = np.exp(s * t[:, None])
    return 0.5 * (phi0 + dphi0 / s) * e + 0.5 * (phi0 - dphi0 / s) / e


@given(st.integers(0, 2**32 - 1))
def test_branch_invariance(seed):
    rng = np.random.default_rng(seed)
    k = 4
    lam = -rng.uniform(0.5, 4, k) + 1j * rng.uniform(-0.2, 0.2, k)
    phi0 = rng.normal(size=k) + 1j * rng.normal(size=k)
    dphi0 = rng.normal(size=k) + 1j * rng.normal(size=k)
    t = np.linspace(0, 5, 21)
    ours = dmd.modal_response(lam, phi0, dphi0, t)
    for _ in range(3):
        signs = rng.choice([-1.0, 1.0], size=k)
        other = _two_exponential(lam, phi0, dphi0, t, signs)
        assert np.abs(ours - other).max() <= 1e-10 * max(1.0, np.abs(ours).max())


def test_reconstruct_t0_consistency(linear_model):
    x0, v0 = np.array([0.3, -0.6]), np.array([0.2, 0.9])
    rec = dmd.reconstruct(linear_model, dmd.ReconstructionRequest(x0, v0, [0.0, 1.0]))
    phi0, dphi0 = dmd.eigenfunctions_at(linear_model, x0, v0)
    c0 = dmd.modal_response(linear_model.eigenvalues, phi0, dphi0, [0.0])
    assert np.array_equal(c0[0], phi0)
    assert np.array_equal(rec.states[0], dmd.synthesize(phi0, linear_model.modes)[0].real)


def test_reconstruct_accuracy_and_reality(linear_model):
    x0, v0 = np.array([1.0, 0.0]), np.array([0.0, 0.5])
    t = np.linspace(0, 10, 201)
    rec = dmd.reconstruct(linear_model, dmd.ReconstructionRequest(x0, v0, t))
    truth = bench.oscillator_truth(x0, v0, t)
    assert np.abs(rec.states - truth).max() < 1e-3
    assert rec.imag_residual <= 1e-8
    assert not rec.ill_conditioned


def test_reconstruct_equilibrium(linear_model):
    rec = dmd.reconstruct(linear_model, dmd.ReconstructionRequest([0, 0], [0, 0], np.linspace(0, 5, 11)))
    assert np.abs(rec.states).max() <= linear_model.diagnostics["projection_error"] + 1e-15


def test_request_validation():
    with pytest.raises(InputError):
        dmd.ReconstructionRequest([np.inf], [0.0], [0.0])
    with pytest.raises(InputError):
        dmd.ReconstructionRequest([0.0], [0.0], [-1.0])


def test_projection_sanity_noiseless_experiment1():
    cfg = bench.Experiment1Config(sigma=0.0)
    data, model = bench.fit_experiment1(cfg)
    proj = model.diagnostics["projection_error"]
    assert proj < 0.05
    scale = np.abs(data.samples()).max()
    for tr in data:
        phi0, _ = dmd.eigenfunctions_at(model, tr.samples[0], tr.initial_velocity)
        err = np.abs(dmd.synthesize(phi0, model.modes)[0].real - tr.samples[0]).max() / scale
        assert err <= proj + 1e-15

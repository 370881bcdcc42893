import numpy as np
import pytest

from adjpath import (
    CollocationModel,
    DimensionError,
    ParamMatrix,
    Trajectory,
    build_diff_matrix,
    build_uniform_grid,
    cosine_basis,
    eval_basis_matrix,
    flatten_state,
)


@pytest.fixture
def small_model():
    grid = build_uniform_grid(12, 2 * np.pi, periodic=True)
    return CollocationModel(cosine_basis(6), grid, n_states=1)


def fd_jac_u(model, u, m, h=1e-6):
    """Dense finite-difference Jacobian of the residual in the state."""
    t_dim, u_dim, _ = model.dims
    base = u.copy()
    cols = []
    for idx in range(t_dim * u_dim):
        e = np.zeros(t_dim * u_dim)
        e[idx] = h
        du = e.reshape((t_dim, u_dim), order="F")
        diff = model.residual(base + du, m) - model.residual(base - du, m)
        cols.append(flatten_state(diff) / (2 * h))
    return np.column_stack(cols)


def fd_jac_m(model, u, m, h=1e-6):
    t_dim, u_dim, m_dim = model.dims
    cols = []
    for idx in range(m_dim):
        e = np.zeros(m_dim)
        e[idx] = h
        dm = e.reshape((m_dim // u_dim, u_dim), order="F")
        diff = model.residual(u, m.values + dm) - model.residual(u, m.values - dm)
        cols.append(flatten_state(diff) / (2 * h))
    return np.column_stack(cols)


class TestBasisMatrix:
    def test_rows_of_ones_at_zero_state(self, small_model):
        phi = eval_basis_matrix(small_model, np.zeros((12, 1)))
        assert phi.shape == (12, 6)
        assert np.allclose(phi, 1.0)

    def test_half_pi_row(self):
        grid = build_uniform_grid(5, 1.0)
        model = CollocationModel(cosine_basis(2), grid)
        phi = model.basis_matrix(np.full((5, 1), np.pi / 2))
        assert np.allclose(phi[:, 0], 0.0, atol=1e-15)
        assert np.allclose(phi[:, 1], -1.0)

    def test_columns_reproduce_each_basis_entry(self, small_model):
        rng = np.random.default_rng(2)
        u = rng.standard_normal((12, 1))
        phi = small_model.basis_matrix(u)
        for j in range(6):
            e = np.zeros((6, 1))
            e[j] = 1.0
            assert np.allclose(phi @ e, small_model.basis.eval(j, u))

    def test_column_layout_for_two_states(self):
        # column h' + U*j holds phi_j of source component h'
        grid = build_uniform_grid(4, 1.0)
        model = CollocationModel(cosine_basis(2), grid, n_states=2)
        u = np.column_stack([np.zeros(4), np.full(4, np.pi)])
        phi = model.basis_matrix(u)
        assert phi.shape == (4, 4)
        assert np.allclose(phi[:, 0], 1.0)   # cos(u_0)
        assert np.allclose(phi[:, 1], -1.0)  # cos(u_1)
        assert np.allclose(phi[:, 2], 1.0)   # cos(2 u_0)
        assert np.allclose(phi[:, 3], 1.0)   # cos(2 u_1)

    def test_pointwise_in_time(self, small_model):
        # permuting two time samples permutes the corresponding rows
        rng = np.random.default_rng(7)
        u = rng.standard_normal((12, 1))
        phi = small_model.basis_matrix(u)
        swapped = u.copy()
        swapped[[3, 8]] = swapped[[8, 3]]
        phi_swapped = small_model.basis_matrix(swapped)
        expect = phi.copy()
        expect[[3, 8]] = expect[[8, 3]]
        assert np.array_equal(phi_swapped, expect)


class TestResidual:
    def test_zero_params_constant_state_periodic(self, small_model):
        m = ParamMatrix(np.zeros((6, 1)))
        assert np.allclose(small_model.residual(np.full((12, 1), 2.5), m), 0.0)

    def test_balanced_params_cancel_at_zero_state(self, small_model):
        m = ParamMatrix(np.array([1.0, -1.0, 0.0, 0.0, 0.0, 0.0]))
        r = small_model.residual(np.zeros((12, 1)), m)
        assert np.allclose(r, 0.0)

    def test_unbalanced_params_at_zero_state(self, small_model):
        m = ParamMatrix(np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
        r = small_model.residual(np.zeros((12, 1)), m)
        assert np.allclose(r, -1.0)

    def test_shape_mismatch_raises(self, small_model):
        m = ParamMatrix(np.zeros((6, 1)))
        with pytest.raises(DimensionError):
            small_model.residual(np.zeros((11, 1)), m)
        with pytest.raises(DimensionError):
            small_model.residual(np.zeros((12, 1)), ParamMatrix(np.zeros((5, 1))))

    def test_accepts_trajectory_and_param_types(self, small_model):
        traj = Trajectory(small_model.grid, np.zeros((12, 1)))
        m = ParamMatrix(np.zeros((6, 1)))
        assert np.allclose(small_model.residual(traj, m), 0.0)


class TestJacobians:
    def test_jac_u_equals_diff_matrix_at_zero_params(self, small_model):
        m = ParamMatrix(np.zeros((6, 1)))
        jac = small_model.jac_u(np.random.default_rng(0).standard_normal((12, 1)), m)
        assert np.array_equal(jac, build_diff_matrix(small_model.grid))

    def test_jac_m_constant_rows_at_zero_state(self, small_model):
        jac = small_model.jac_m(np.zeros((12, 1)), ParamMatrix(np.zeros((6, 1))))
        assert jac.shape == (12, 6)
        assert np.allclose(jac, -1.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_jac_u_matches_finite_differences(self, small_model, seed):
        rng = np.random.default_rng(seed)
        u = rng.uniform(-1, 1, (12, 1))
        m = ParamMatrix(rng.uniform(-1, 1, (6, 1)))
        jac = small_model.jac_u(u, m)
        fd = fd_jac_u(small_model, u, m)
        assert np.linalg.norm(fd - jac) / np.linalg.norm(jac) <= 1e-5

    @pytest.mark.parametrize("seed", [3, 4])
    def test_jac_m_matches_finite_differences(self, small_model, seed):
        rng = np.random.default_rng(seed)
        u = rng.uniform(-1, 1, (12, 1))
        m = ParamMatrix(rng.uniform(-1, 1, (6, 1)))
        jac = small_model.jac_m(u, m)
        fd = fd_jac_m(small_model, u, m)
        assert np.linalg.norm(fd - jac) / np.linalg.norm(jac) <= 1e-5

    @pytest.mark.parametrize("seed", [5, 6])
    def test_jacobians_match_fd_with_two_states(self, seed):
        grid = build_uniform_grid(8, 1.0)
        model = CollocationModel(cosine_basis(3), grid, n_states=2)
        rng = np.random.default_rng(seed)
        u = rng.uniform(-1, 1, (8, 2))
        m = ParamMatrix(rng.uniform(-1, 1, (6, 2)))
        jac_u = model.jac_u(u, m)
        assert jac_u.shape == (16, 16)
        assert np.linalg.norm(fd_jac_u(model, u, m) - jac_u) / np.linalg.norm(jac_u) <= 1e-5
        jac_m = model.jac_m(u, m)
        assert jac_m.shape == (16, 12)
        assert np.linalg.norm(fd_jac_m(model, u, m) - jac_m) / np.linalg.norm(jac_m) <= 1e-5

    def test_directional_derivatives(self, small_model):
        rng = np.random.default_rng(11)
        u = rng.uniform(-1, 1, (12, 1))
        m = ParamMatrix(rng.uniform(-1, 1, (6, 1)))
        du = rng.standard_normal((12, 1))
        dm = rng.standard_normal(6)
        h = 1e-6
        fd_u = flatten_state(
            small_model.residual(u + h * du, m) - small_model.residual(u - h * du, m)
        ) / (2 * h)
        assert np.allclose(small_model.jac_u(u, m) @ flatten_state(du), fd_u, rtol=1e-5, atol=1e-9)
        m_hi = ParamMatrix(m.values + h * dm[:, None])
        m_lo = ParamMatrix(m.values - h * dm[:, None])
        fd_m = flatten_state(small_model.residual(u, m_hi) - small_model.residual(u, m_lo)) / (2 * h)
        assert np.allclose(small_model.jac_m(u, m) @ dm, fd_m, rtol=1e-5, atol=1e-9)

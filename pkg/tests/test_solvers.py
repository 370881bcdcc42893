import numpy as np
import pytest

from adjpath import (
    AdjointField,
    ConfigError,
    ImplicitModel,
    LandweberConfig,
    NewtonConfig,
    Trajectory,
    build_uniform_grid,
    flatten_state,
    landweber_solve,
    newton_solve,
)


class AffineModel(ImplicitModel):
    """F(u, m) = A u - c with invertible A; Newton is exact in one step."""

    def __init__(self, matrix, target):
        self.matrix = np.asarray(matrix, dtype=float)
        self.target = np.asarray(target, dtype=float).reshape(-1, 1)

    @property
    def dims(self):
        n = self.target.size
        return (n, 1, 1)

    def residual(self, u, m):
        u = np.asarray(getattr(u, "values", u), dtype=float).reshape(-1, 1)
        return self.matrix @ u - self.target

    def jac_u(self, u, m):
        return self.matrix

    def jac_m(self, u, m):
        return np.zeros((self.target.size, 1))


def make_affine(seed, n=5):
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((n, n)) + 3 * np.eye(n)
    return AffineModel(mat, rng.standard_normal(n)), rng


class TestNewton:
    @pytest.mark.parametrize("seed", range(5))
    def test_one_step_exactness_on_affine(self, seed):
        model, rng = make_affine(seed)
        grid = build_uniform_grid(5, 1.0)
        u0 = Trajectory(grid, rng.standard_normal((5, 1)))
        u, report = newton_solve(model, None, u0, NewtonConfig(residual_tol=1e-10))
        expected = np.linalg.solve(model.matrix, model.target)
        assert report.iterations == 1
        assert report.converged
        assert not report.used_fallback
        assert np.allclose(u.values, expected, atol=1e-12)

    def test_zero_iterations_when_already_converged(self):
        model, _ = make_affine(0)
        grid = build_uniform_grid(5, 1.0)
        exact = np.linalg.solve(model.matrix, model.target)
        u, report = newton_solve(model, None, Trajectory(grid, exact), NewtonConfig())
        assert report.iterations == 0
        assert report.converged

    def test_max_iter_zero_rejected_at_config(self):
        with pytest.raises(ConfigError):
            NewtonConfig(max_iter=0)

    def test_damping_out_of_range_rejected(self):
        with pytest.raises(ConfigError):
            NewtonConfig(step_damping=0.0)
        with pytest.raises(ConfigError):
            NewtonConfig(step_damping=1.5)

    @pytest.mark.parametrize("seed", range(3))
    def test_residual_nonincreasing_first_steps_on_quadratic(self, seed):
        # guarded smoke property: mildly nonlinear well-conditioned model
        rng = np.random.default_rng(seed)
        n = 4
        mat = rng.standard_normal((n, n)) + 4 * np.eye(n)

        class Quadratic(ImplicitModel):
            @property
            def dims(self):
                return (n, 1, 1)

            def residual(self, u, m):
                u = np.asarray(getattr(u, "values", u), dtype=float).reshape(-1, 1)
                return mat @ u + 0.1 * u**2 - 1.0

            def jac_u(self, u, m):
                u = np.asarray(getattr(u, "values", u), dtype=float).reshape(-1)
                return mat + np.diag(0.2 * u)

            def jac_m(self, u, m):
                return np.zeros((n, 1))

        model = Quadratic()
        grid = build_uniform_grid(n, 1.0)
        u = Trajectory(grid, 0.5 * rng.standard_normal((n, 1)))
        norms = [np.linalg.norm(model.residual(u, None))]
        for _ in range(3):
            u, _ = newton_solve(model, None, u, NewtonConfig(max_iter=1, residual_tol=0.0))
            norms.append(np.linalg.norm(model.residual(u, None)))
        assert all(b <= a + 1e-14 for a, b in zip(norms, norms[1:]))

    def test_singular_jacobian_falls_back_to_least_squares(self):
        # rank-deficient A: LU cannot be used, the min-norm step is taken
        mat = np.diag([1.0, 1.0, 0.0])
        model = AffineModel(mat, np.array([1.0, 2.0, 0.0]))
        grid = build_uniform_grid(3, 1.0)
        u, report = newton_solve(
            model, None, Trajectory(grid, np.zeros((3, 1))), NewtonConfig(residual_tol=1e-12)
        )
        assert report.used_fallback
        assert np.allclose(u.values[:2, 0], [1.0, 2.0], atol=1e-10)
        assert u.values[2, 0] == 0.0  # null direction untouched


class TestLandweber:
    def test_identity_converges_in_one_step(self):
        rhs = np.array([[1.0], [2.0], [3.0]])
        lam0 = AdjointField(np.zeros((3, 1)))
        lam, report = landweber_solve(np.eye(3), rhs, lam0, LandweberConfig(step=1.0))
        assert report.iterations == 1
        assert report.converged
        assert np.array_equal(lam.values, rhs)

    def test_diagonal_closed_form(self):
        # M = diag(1, 2), rhs = (1, 2): solution (1, 1); frozen diagonal-solve oracle
        mat = np.diag([1.0, 2.0])
        rhs = np.array([[1.0], [2.0]])
        lam, report = landweber_solve(
            mat, rhs, AdjointField(np.zeros((2, 1))), LandweberConfig(max_iter=100, residual_tol=0.0)
        )
        assert report.iterations == 100
        assert np.allclose(lam.values[:, 0], [1.0, 1.0], atol=1e-6)

    def test_rank_deficient_minimum_norm(self):
        mat = np.diag([1.0, 0.0])
        rhs = np.array([[1.0], [0.0]])
        lam, _ = landweber_solve(
            mat, rhs, AdjointField(np.zeros((2, 1))), LandweberConfig(max_iter=200, residual_tol=0.0)
        )
        assert np.allclose(lam.values[:, 0], [1.0, 0.0], atol=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_minimum_norm_on_random_rank_deficient_diagonals(self, seed):
        rng = np.random.default_rng(seed)
        diag = rng.uniform(0.5, 2.0, 6)
        diag[rng.integers(0, 6, 2)] = 0.0
        mat = np.diag(diag)
        target = rng.standard_normal(6)
        rhs = (mat @ target)[:, None]
        lam, _ = landweber_solve(
            mat, rhs, AdjointField(np.zeros((6, 1))),
            LandweberConfig(max_iter=3000, residual_tol=1e-14),
        )
        expected = np.linalg.pinv(mat) @ mat @ target  # minimum-norm solution
        assert np.allclose(lam.values[:, 0], expected, atol=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_error_nonincreasing_on_full_rank_systems(self, seed):
        rng = np.random.default_rng(seed)
        mat = rng.standard_normal((10, 10)) + 4 * np.eye(10)
        exact = rng.standard_normal(10)
        rhs = (mat @ exact)[:, None]
        smax = np.linalg.svd(mat, compute_uv=False)[0]
        cfg = LandweberConfig(max_iter=1, step=1.0 / smax**2, residual_tol=0.0)
        lam = AdjointField(np.zeros((10, 1)))
        errs = [np.linalg.norm(exact)]
        for _ in range(30):
            lam, _ = landweber_solve(mat, rhs, lam, cfg)  # chained single steps
            errs.append(np.linalg.norm(lam.values[:, 0] - exact))
        assert all(b <= a + 1e-13 for a, b in zip(errs, errs[1:]))

    def test_auto_step_zero_operator_rejected(self):
        with pytest.raises(ConfigError, match="auto step"):
            landweber_solve(
                np.zeros((3, 3)), np.ones((3, 1)), AdjointField(np.zeros((3, 1))),
                LandweberConfig(),
            )

    def test_nonpositive_step_rejected_at_config(self):
        with pytest.raises(ConfigError):
            LandweberConfig(step=0.0)
        with pytest.raises(ConfigError):
            LandweberConfig(max_iter=0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            landweber_solve(
                np.eye(4), np.ones((3, 1)), AdjointField(np.zeros((3, 1))), LandweberConfig()
            )

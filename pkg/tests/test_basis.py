import numpy as np
import pytest

from adjpath import BasisFunction, BasisLibrary, ConfigError, cosine_basis


class TestCosineBasis:
    def test_values_at_zero(self):
        basis = cosine_basis(6)
        u = np.zeros((4, 1))
        for j in range(6):
            assert np.allclose(basis.eval(j, u), 1.0)

    def test_values_at_pi(self):
        basis = cosine_basis(6)
        u = np.full((3, 1), np.pi)
        assert np.allclose(basis.eval(0, u), -1.0)
        assert np.allclose(basis.eval(1, u), 1.0)

    def test_size_and_names(self):
        basis = cosine_basis(3)
        assert basis.size == 3
        assert len(basis) == 3
        assert basis.names == ("cos(1u)", "cos(2u)", "cos(3u)")

    def test_invalid_size(self):
        with pytest.raises(ConfigError):
            cosine_basis(0)

    def test_derivative_matches_central_difference(self):
        # frozen oracle: phi_2 at u = 0.3 with h = 1e-6
        basis = cosine_basis(6)
        u = 0.3
        h = 1e-6
        fd = (basis.eval(2, u + h) - basis.eval(2, u - h)) / (2 * h)
        d = basis.deriv(2, np.asarray(u))
        assert abs(fd - d) / abs(d) <= 1e-6
        assert d == pytest.approx(-3 * np.sin(0.9))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_all_derivatives_match_fd_on_random_points(self, seed):
        basis = cosine_basis(6)
        rng = np.random.default_rng(seed)
        u = rng.uniform(-3, 3, 50)
        h = 1e-6
        for j in range(6):
            fd = (basis.eval(j, u + h) - basis.eval(j, u - h)) / (2 * h)
            d = basis.deriv(j, u)
            assert np.linalg.norm(fd - d) / np.linalg.norm(d) <= 1e-6

    def test_eval_stack_shape(self):
        basis = cosine_basis(4)
        stack = basis.eval_stack(np.zeros((7, 2)))
        assert stack.shape == (4, 7, 2)
        assert np.allclose(stack, 1.0)


class TestRegistration:
    def test_wrong_derivative_rejected_at_registration(self):
        bad = BasisFunction("bad", fn=np.cos, deriv=np.sin)  # sign error
        with pytest.raises(ConfigError, match="disagrees"):
            BasisLibrary([bad])

    def test_correct_custom_entry_accepted(self):
        entry = BasisFunction("u^2", fn=lambda u: u**2, deriv=lambda u: 2 * u)
        lib = BasisLibrary([entry])
        assert lib.size == 1
        assert np.allclose(lib.eval(0, np.array([3.0])), 9.0)

    def test_empty_library_rejected(self):
        with pytest.raises(ConfigError):
            BasisLibrary([])

import numpy as np
import pytest

from adjpath import (
    AdjointField,
    DataVector,
    DimensionError,
    ParamMatrix,
    Trajectory,
    build_uniform_grid,
    flatten_state,
    read_data_csv,
    read_trajectory_csv,
    unflatten_state,
    write_data_csv,
    write_trajectory_csv,
)


@pytest.fixture
def grid():
    return build_uniform_grid(5, 1.0)


class TestTrajectory:
    def test_row_count_must_match_grid(self, grid):
        with pytest.raises(DimensionError):
            Trajectory(grid, np.zeros((4, 1)))

    def test_one_dimensional_input_becomes_column(self, grid):
        traj = Trajectory(grid, np.arange(5.0))
        assert traj.values.shape == (5, 1)
        assert traj.n_states == 1

    def test_non_finite_rejected(self, grid):
        with pytest.raises(DimensionError):
            Trajectory(grid, np.array([0.0, 1.0, np.nan, 3.0, 4.0]))

    def test_values_immutable(self, grid):
        traj = Trajectory(grid, np.zeros((5, 2)))
        with pytest.raises(ValueError):
            traj.values[0, 0] = 1.0


class TestDataVector:
    def test_negative_sigma_rejected(self, grid):
        with pytest.raises(DimensionError):
            DataVector(grid, np.zeros((5, 1)), noise_sigma=-0.1)

    def test_metadata_stored(self, grid):
        d = DataVector(grid, np.zeros((5, 1)), noise_sigma=0.5, seed=99)
        assert d.noise_sigma == 0.5
        assert d.seed == 99


class TestParamMatrix:
    def test_flat_length(self):
        m = ParamMatrix(np.zeros((12, 2)))  # D=6, U=2
        assert m.size == 24
        assert m.u_dim == 2

    def test_flatten_unflatten_roundtrip(self):
        rng = np.random.default_rng(5)
        for u_dim in (1, 2, 3):
            vals = rng.standard_normal((4 * u_dim, u_dim))
            m = ParamMatrix(vals)
            back = ParamMatrix.from_flat(m.flatten(), u_dim)
            assert np.array_equal(back.values, m.values)

    def test_flatten_component_major(self):
        m = ParamMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
        # column for output component 0 first, then component 1
        assert np.array_equal(m.flatten(), [1.0, 3.0, 2.0, 4.0])

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            ParamMatrix(np.zeros((0, 1)))

    def test_non_finite_rejected(self):
        with pytest.raises(DimensionError):
            ParamMatrix(np.array([[np.inf]]))


class TestFlattening:
    def test_state_flatten_component_major(self):
        vals = np.array([[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]])
        flat = flatten_state(vals)
        assert np.array_equal(flat, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        assert np.array_equal(unflatten_state(flat, 3, 2), vals)

    def test_unflatten_size_check(self):
        with pytest.raises(DimensionError):
            unflatten_state(np.zeros(5), 2, 2)


class TestCsvRoundTrip:
    def test_trajectory_roundtrip(self, grid, tmp_path):
        rng = np.random.default_rng(0)
        traj = Trajectory(grid, rng.standard_normal((5, 2)))
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path, preamble={"config_hash": "abc"})
        back = read_trajectory_csv(path)
        assert np.array_equal(back.values, traj.values)
        assert np.array_equal(back.grid.points, traj.grid.points)

    def test_trajectory_header(self, grid, tmp_path):
        traj = Trajectory(grid, np.zeros((5, 2)))
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        header = path.read_text().splitlines()[0]
        assert header == "t,u_0,u_1"

    def test_data_roundtrip_preserves_17_digits(self, grid, tmp_path):
        vals = np.array([1 / 3, np.pi, np.e, 2 / 7, 1e-17])[:, None]
        d = DataVector(grid, vals, noise_sigma=0.1, seed=3)
        path = tmp_path / "data.csv"
        write_data_csv(d, path)
        header = path.read_text().splitlines()[0]
        assert header == "t,d_0"
        back = read_data_csv(path, noise_sigma=0.1, seed=3)
        assert np.array_equal(back.values, vals)

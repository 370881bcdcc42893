"""Implicit model contract and its collocation instantiation for ODE dynamics.

The residual of the collocation model is F(u, m) = D u - Phi(u) m, where D is
the differentiation matrix of the grid and Phi(u) is the T x (D*U) design
matrix of basis evaluations. Jacobians are materialized as dense matrices
(state dimensions here are at most a few hundred), so the transpose needed by
the adjoint solve is just ``.T``.
"""

import abc

import numpy as np

from .basis import BasisLibrary
from .errors import DimensionError
from .grid import TimeGrid, build_diff_matrix
from .state import as_param_values, as_state_values


class ImplicitModel(abc.ABC):
    """Discretized implicit constraint F(u, m) = 0 with dense Jacobians.

    Shapes: state u is (T, U), parameters m are (D*U, U) with flat length M.
    Flattened vectors use the component-major convention of
    :mod:`adjpath.state`.
    """

    @property
    @abc.abstractmethod
    def dims(self) -> tuple:
        """(T, U, M)."""

    @abc.abstractmethod
    def residual(self, u, m) -> np.ndarray:
        """F(u, m), shaped (T, U)."""

    @abc.abstractmethod
    def jac_u(self, u, m) -> np.ndarray:
        """dF/du as a dense (T*U, T*U) matrix."""

    @abc.abstractmethod
    def jac_m(self, u, m) -> np.ndarray:
        """dF/dm as a dense (T*U, M) matrix."""

    def check_state(self, u) -> np.ndarray:
        t_dim, u_dim, _ = self.dims
        vals = as_state_values(u)
        if vals.shape != (t_dim, u_dim):
            raise DimensionError(f"state shape {vals.shape}, expected {(t_dim, u_dim)}")
        return vals

    def check_params(self, m) -> np.ndarray:
        t_dim, u_dim, m_dim = self.dims
        vals = as_param_values(m)
        if vals.shape != (m_dim // u_dim, u_dim):
            raise DimensionError(
                f"parameter shape {vals.shape}, expected {(m_dim // u_dim, u_dim)}"
            )
        return vals


class CollocationModel(ImplicitModel):
    """F(u, m) = D u - Phi(u) m on a fixed time grid.

    Parameters
    ----------
    basis : BasisLibrary
        Elementwise basis functions phi_j with derivatives.
    grid : TimeGrid
        Sample times; its periodic flag selects the differentiation scheme.
    n_states : int
        Number of state components U.
    diff : array, optional
        Differentiation matrix override; defaults to ``build_diff_matrix(grid)``.
    """

    def __init__(self, basis: BasisLibrary, grid: TimeGrid, n_states: int = 1, diff=None):
        self.basis = basis
        self.grid = grid
        self.n_states = int(n_states)
        if self.n_states < 1:
            raise DimensionError(f"n_states must be positive, got {n_states}")
        self.diff = build_diff_matrix(grid) if diff is None else np.asarray(diff, dtype=float)
        if self.diff.shape != (grid.size, grid.size):
            raise DimensionError(
                f"diff matrix shape {self.diff.shape}, expected {(grid.size, grid.size)}"
            )
        self._dims = (grid.size, self.n_states, basis.size * self.n_states**2)

    @property
    def dims(self) -> tuple:
        return self._dims

    def basis_matrix(self, u) -> np.ndarray:
        """Design matrix Phi(u), shape (T, D*U); column h' + U*j holds phi_j(u)_{h'}."""
        vals = self.check_state(u)
        stack = self.basis.eval_stack(vals)  # (D, T, U)
        t_dim, u_dim = vals.shape
        return stack.transpose(1, 0, 2).reshape(t_dim, self.basis.size * u_dim)

    def residual(self, u, m) -> np.ndarray:
        vals = self.check_state(u)
        params = self.check_params(m)
        return self.diff @ vals - self.basis_matrix(vals) @ params

    def jac_u(self, u, m) -> np.ndarray:
        vals = self.check_state(u)
        params = self.check_params(m)
        t_dim, u_dim = vals.shape
        d_dim = self.basis.size
        # coupling[k, v, h] = sum_j m[v + U*j, h] * phi_j'(u[k, v])
        m3 = params.reshape(d_dim, u_dim, u_dim)
        dstack = self.basis.deriv_stack(vals)  # (D, T, U)
        coupling = np.einsum("jkv,jvh->kvh", dstack, m3)
        if u_dim == 1:
            jac = self.diff.copy()
            idx = np.arange(t_dim)
            jac[idx, idx] -= coupling[:, 0, 0]
            return jac
        jac = np.kron(np.eye(u_dim), self.diff)
        idx = np.arange(t_dim)
        for h in range(u_dim):
            for v in range(u_dim):
                jac[h * t_dim + idx, v * t_dim + idx] -= coupling[:, v, h]
        return jac

    def jac_m(self, u, m) -> np.ndarray:
        vals = self.check_state(u)
        phi = self.basis_matrix(vals)
        if self.n_states == 1:
            return -phi
        return -np.kron(np.eye(self.n_states), phi)


def eval_basis_matrix(model: CollocationModel, u) -> np.ndarray:
    """Design matrix Phi(u) for a collocation model."""
    return model.basis_matrix(u)

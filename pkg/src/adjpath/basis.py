"""Libraries of scalar basis functions with hand-coded derivatives.

Basis entries act elementwise on state arrays, so evaluation at time t_k only
sees the state at t_k. Derivatives are supplied by hand and every entry is
finite-difference checked at registration, so a silently wrong derivative
cannot enter a model.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class BasisFunction:
    """One elementwise basis entry: value map and its derivative."""

    name: str
    fn: Callable
    deriv: Callable


def _fd_self_check(entry: BasisFunction, tol=1e-6, h=1e-6, n_points=64, span=3.0):
    rng = np.random.default_rng(17)
    u = rng.uniform(-span, span, n_points)
    fd = (np.asarray(entry.fn(u + h)) - np.asarray(entry.fn(u - h))) / (2.0 * h)
    d = np.asarray(entry.deriv(u))
    denom = np.linalg.norm(d)
    err = np.linalg.norm(fd - d) / (denom if denom > 0 else 1.0)
    if not err <= tol:
        raise ConfigError(
            f"basis entry {entry.name!r}: derivative disagrees with finite "
            f"differences (rel err {err:.2e} > {tol:g})"
        )


class BasisLibrary:
    """Ordered collection of elementwise basis functions."""

    def __init__(self, entries):
        entries = tuple(entries)
        if not entries:
            raise ConfigError("basis library needs at least one entry")
        for entry in entries:
            _fd_self_check(entry)
        self._entries = entries

    def __len__(self):
        return len(self._entries)

    @property
    def size(self) -> int:
        return len(self._entries)

    @property
    def names(self):
        return tuple(e.name for e in self._entries)

    def eval(self, j: int, u) -> np.ndarray:
        return np.asarray(self._entries[j].fn(np.asarray(u, dtype=float)))

    def deriv(self, j: int, u) -> np.ndarray:
        return np.asarray(self._entries[j].deriv(np.asarray(u, dtype=float)))

    def eval_stack(self, u) -> np.ndarray:
        """All entries evaluated at u, stacked along a new leading axis."""
        u = np.asarray(u, dtype=float)
        return np.stack([np.asarray(e.fn(u)) for e in self._entries])

    def deriv_stack(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([np.asarray(e.deriv(u)) for e in self._entries])


def cosine_basis(size: int) -> BasisLibrary:
    """cos(u), cos(2u), ..., cos(size*u), applied elementwise."""
    if size < 1:
        raise ConfigError(f"basis size must be at least 1, got {size}")
    entries = []
    for j in range(size):
        k = j + 1
        entries.append(
            BasisFunction(
                name=f"cos({k}u)",
                fn=lambda u, k=k: np.cos(k * u),
                deriv=lambda u, k=k: -k * np.sin(k * u),
            )
        )
    return BasisLibrary(entries)

"""Uniform-mesh spatial discretization of the interval (0, 1).

The second-derivative operator with homogeneous Dirichlet boundary
conditions is discretized with the standard 3-point stencil on the
interior nodes xi_j = j*dx, j = 1..n, dx = 1/(n+1).  Its eigenvectors
are the discrete sine modes v_k(j) = sin(k*pi*j*dx), with eigenvalues
-lam_k, lam_k = (4/dx^2) * sin^2(k*pi*dx/2), so the resolvent
(I - dt*A)^{-1} and the semigroup exp(dt*A) are available exactly:
the resolvent through a banded Cholesky solve, the semigroup through
the type-I discrete sine transform.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst, idst
from scipy.linalg import cholesky_banded, cho_solve_banded


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of (0, 1) with ``n_interior`` interior nodes.

    The boundary nodes xi = 0 and xi = 1 carry the value 0 and are not
    stored; ``dx = 1/(n_interior + 1)``.
    """

    n_interior: int

    def __post_init__(self):
        if self.n_interior < 1:
            raise ValueError("n_interior must be >= 1")

    @property
    def dx(self) -> float:
        return 1.0 / (self.n_interior + 1)

    @property
    def nodes(self) -> np.ndarray:
        """Interior node coordinates j*dx, j = 1..n_interior."""
        return self.dx * np.arange(1, self.n_interior + 1)


@dataclass(frozen=True)
class GridFunction:
    """Values of a scalar field on the interior nodes of a mesh.

    Boundary values are implicitly zero.  All entries are expected to be
    finite; non-finite entries signal a blown-up trajectory and are
    detected by the time steppers, not here.
    """

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.mesh.n_interior,):
            raise ValueError(
                f"values has shape {v.shape}, expected ({self.mesh.n_interior},)"
            )
        object.__setattr__(self, "values", v)

    @staticmethod
    def zeros(mesh: Mesh) -> "GridFunction":
        return GridFunction(mesh, np.zeros(mesh.n_interior))


def eigenvector(mesh: Mesh, k: int) -> GridFunction:
    """Discrete sine mode v_k(j) = sin(k*pi*j*dx) as a grid function."""
    if not 1 <= k <= mesh.n_interior:
        raise ValueError(f"mode index {k} out of range 1..{mesh.n_interior}")
    return GridFunction(mesh, np.sin(k * np.pi * mesh.nodes))


@dataclass(frozen=True)
class DiscreteOperator:
    """Finite-difference Laplacian on a mesh, with spectral machinery.

    ``eigenvalues[k-1] = (4/dx^2) * sin^2(k*pi*dx/2)`` lists lam_k for
    -A_h (all positive, strictly increasing in k).  The associated
    transform is the orthonormal DST-I, which diagonalizes A_h exactly
    for any mesh size.
    """

    mesh: Mesh
    eigenvalues: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.mesh.n_interior
        dx = self.mesh.dx
        k = np.arange(1, n + 1)
        lam = (4.0 / dx**2) * np.sin(k * np.pi * dx / 2.0) ** 2
        object.__setattr__(self, "eigenvalues", lam)

    def to_modes(self, values: np.ndarray) -> np.ndarray:
        """Orthonormal DST-I along the last axis (its own inverse)."""
        return dst(values, type=1, axis=-1, norm="ortho")

    def from_modes(self, coeffs: np.ndarray) -> np.ndarray:
        return idst(coeffs, type=1, axis=-1, norm="ortho")

    def laplacian_values(self, values: np.ndarray) -> np.ndarray:
        """3-point stencil (v_{j-1} - 2 v_j + v_{j+1})/dx^2, zero boundaries.

        Acts along the last axis of ``values``.
        """
        dx2 = self.mesh.dx**2
        out = -2.0 * values.copy()
        out[..., :-1] += values[..., 1:]
        out[..., 1:] += values[..., :-1]
        return out / dx2

    def resolvent_factor(self, dt: float) -> np.ndarray:
        """Banded Cholesky factor of I - dt*A_h (SPD, tridiagonal)."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        n = self.mesh.n_interior
        dx2 = self.mesh.dx**2
        ab = np.zeros((2, n))
        ab[0, 1:] = -dt / dx2
        ab[1, :] = 1.0 + 2.0 * dt / dx2
        return cholesky_banded(ab, lower=False)

    def resolvent_apply(self, factor: np.ndarray, values: np.ndarray) -> np.ndarray:
        """Solve (I - dt*A_h) y = values along the last axis.

        Non-finite entries pass through (the steppers treat them as
        blow-up data, never as an error).
        """
        flat = np.atleast_2d(values.reshape(-1, values.shape[-1]))
        y = cho_solve_banded((factor, False), flat.T, check_finite=False).T
        return y.reshape(values.shape)

    def semigroup_apply(self, dt: float, values: np.ndarray) -> np.ndarray:
        """exp(dt*A_h) applied along the last axis by mode-wise damping."""
        if dt < 0:
            raise ValueError("dt must be nonnegative")
        damp = np.exp(-dt * self.eigenvalues)
        return self.from_modes(self.to_modes(values) * damp)


def _check_same_mesh(op: DiscreteOperator, x: GridFunction):
    if op.mesh != x.mesh:
        raise ValueError(
            f"mesh mismatch: operator has n={op.mesh.n_interior}, "
            f"grid function has n={x.mesh.n_interior}"
        )


def apply_laplacian(op: DiscreteOperator, x: GridFunction) -> GridFunction:
    """Apply the discrete Dirichlet Laplacian to a grid function."""
    _check_same_mesh(op, x)
    return GridFunction(x.mesh, op.laplacian_values(x.values))


def solve_resolvent(op: DiscreteOperator, dt: float, rhs: GridFunction) -> GridFunction:
    """Solve (I - dt*A_h) y = rhs.

    The matrix is strictly diagonally dominant, so the tridiagonal solve
    always succeeds; the residual is at the level of rounding error.
    """
    _check_same_mesh(op, rhs)
    factor = op.resolvent_factor(dt)
    return GridFunction(rhs.mesh, op.resolvent_apply(factor, rhs.values))


def apply_semigroup(op: DiscreteOperator, dt: float, x: GridFunction) -> GridFunction:
    """Apply the discrete heat semigroup exp(dt*A_h) to a grid function."""
    _check_same_mesh(op, x)
    return GridFunction(x.mesh, op.semigroup_apply(dt, x.values))


def norm_h(x: GridFunction) -> float:
    """Discrete L^2(0,1) norm: sqrt(dx * sum_j x_j^2)."""
    return float(np.sqrt(x.mesh.dx * np.dot(x.values, x.values)))


def norm_e(x: GridFunction) -> float:
    """Sup norm over the interval (boundary values are zero)."""
    return float(np.max(np.abs(x.values))) if x.values.size else 0.0


def norm_h_values(values: np.ndarray, dx: float) -> np.ndarray:
    """Batched H-norm along the last axis of ``values``."""
    return np.sqrt(dx * np.sum(values * values, axis=-1))

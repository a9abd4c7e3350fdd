"""Uniform interior grid on the unit square with homogeneous Dirichlet boundary."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "Grid2D",
    "GridField",
    "RegionMask",
    "SolverError",
    "build_grid",
    "apply_laplacian",
    "solve_spd",
    "region_mask",
    "inner",
    "norm2",
]


class SolverError(RuntimeError):
    """Raised when the conjugate-gradient solve does not reach its tolerance."""

    def __init__(self, msg, residual):
        super().__init__(f"{msg} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Interior nodes (i h, j h), 1 <= i, j <= N-1, of the uniform grid with h = 1/N.

    Flat index ``k = (i-1) * (N-1) + (j-1)``: x is the slow (row) index.
    """

    n_cells: int

    def __eq__(self, other):
        return isinstance(other, Grid2D) and other.n_cells == self.n_cells

    def __hash__(self):
        return hash(("Grid2D", self.n_cells))

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_side(self) -> int:
        return self.n_cells - 1

    @property
    def interior_count(self) -> int:
        return self.n_side**2

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened x and y coordinates of the interior nodes."""
        s = np.arange(1, self.n_cells) * self.h
        X, Y = np.meshgrid(s, s, indexing="ij")
        return X.ravel(), Y.ravel()

    @cached_property
    def neg_laplacian(self) -> sp.csr_matrix:
        """Sparse 5-point matrix of -Delta_h."""
        n = self.n_side
        main = np.full(n, 2.0)
        off = np.full(n - 1, -1.0)
        T = sp.diags([off, main, off], [-1, 0, 1], format="csr")
        I = sp.identity(n, format="csr")
        return ((sp.kron(T, I) + sp.kron(I, T)) / self.h**2).tocsr()

    def sample(self, func) -> "GridField":
        """Field of ``func(x, y)`` evaluated at the interior nodes."""
        x, y = self.coords
        vals = np.asarray(func(x, y), dtype=float)
        return GridField(self, np.broadcast_to(vals, x.shape).copy())

    def zeros(self) -> "GridField":
        return GridField(self, np.zeros(self.interior_count))

    def eigenvalue(self, n: int, m: int) -> float:
        """Discrete eigenvalue of -Delta_h for sin(n pi x) sin(m pi y)."""
        h = self.h
        return 4.0 / h**2 * (math.sin(n * math.pi * h / 2) ** 2 + math.sin(m * math.pi * h / 2) ** 2)


@dataclass(frozen=True, eq=False)
class GridField:
    """Values at the interior nodes of ``grid`` (flat, x-major)."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.interior_count,):
            raise ValueError(
                f"GridField needs {self.grid.interior_count} values, got shape {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    def as_array(self) -> np.ndarray:
        """Values reshaped to (N-1, N-1) with x along axis 0."""
        n = self.grid.n_side
        return self.values.reshape(n, n)

    def _check(self, other):
        if isinstance(other, GridField):
            if other.grid != self.grid:
                raise ValueError("grid mismatch")
            return other.values
        return other

    def __add__(self, other):
        return GridField(self.grid, self.values + self._check(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridField(self.grid, self.values - self._check(other))

    def __mul__(self, a):
        return GridField(self.grid, self.values * self._check(a))

    __rmul__ = __mul__

    def __truediv__(self, a):
        return GridField(self.grid, self.values / a)

    def __neg__(self):
        return GridField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class RegionMask:
    grid: Grid2D
    indicator: np.ndarray

    @property
    def count(self) -> int:
        return int(self.indicator.sum())

    @cached_property
    def index(self) -> np.ndarray:
        return np.flatnonzero(self.indicator)


def build_grid(N: int) -> Grid2D:
    """Uniform grid with N cells per axis (N >= 4)."""
    if int(N) != N or N < 4:
        raise ValueError("build_grid: N must be an integer >= 4")
    return Grid2D(int(N))


def apply_laplacian(u: GridField) -> GridField:
    """5-point -Delta_h with zero Dirichlet values outside the interior."""
    return GridField(u.grid, u.grid.neg_laplacian @ u.values)


def _cg(A, b, x0, diag, tol, maxiter):
    """Jacobi-preconditioned conjugate gradients; returns (x, rel_residual, iterations)."""
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0, 0
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    inv_d = 1.0 / diag
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    thresh = tol * bnorm
    rnorm = np.linalg.norm(r)
    it = 0
    while rnorm > thresh and it < maxiter:
        Ap = A @ p
        pAp = p @ Ap
        if not pAp > 0.0:
            break
        step = rz / pAp
        x += step * p
        r -= step * Ap
        rnorm = np.linalg.norm(r)
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, rnorm / bnorm, it


def solve_spd(
    shift: float, conv_diag: float, rhs: GridField, tol: float = 1e-10, x0=None, method: str = "cg"
) -> GridField:
    """Solve ((shift + conv_diag) I - Delta_h) w = rhs by conjugate gradients.

    ``shift`` and ``conv_diag`` are kept apart only because they come from
    different terms of the time-stepping operator; the solve only sees their sum.

    Raises
    ------
    SolverError
        If the iteration cap 10 (N-1)^2 is reached before the relative
        residual drops below ``tol``.
    """
    c = shift + conv_diag
    if c < 0:
        raise ValueError("solve_spd: shift + conv_diag must be non-negative")
    grid = rhs.grid
    guess = None if x0 is None else np.asarray(getattr(x0, "values", x0), dtype=float)
    return GridField(grid, solve_spd_array(grid, c, rhs.values, tol, guess, method))


@lru_cache(maxsize=16)
def _shifted_operator_cached(n_cells: int, c: float) -> sp.csr_matrix:
    grid = Grid2D(n_cells)
    return (grid.neg_laplacian + c * sp.identity(grid.interior_count, format="csr")).tocsr()


def _shifted_operator(grid: Grid2D, c: float) -> sp.csr_matrix:
    return _shifted_operator_cached(grid.n_cells, float(c))


@lru_cache(maxsize=16)
def _factorized(n_cells: int, c: float):
    return spla.splu(_shifted_operator_cached(n_cells, c).tocsc())


def solve_spd_array(
    grid: Grid2D, c: float, rhs: np.ndarray, tol: float = 1e-10, x0=None, method: str = "cg"
) -> np.ndarray:
    """Array-level core of :func:`solve_spd` for the time steppers.

    ``method="direct"`` reuses a cached sparse LU factorisation of the fixed
    step operator instead of conjugate gradients; the residual contract is the same.
    """
    A = _shifted_operator(grid, c)
    if method == "direct":
        x = _factorized(grid.n_cells, float(c)).solve(rhs)
        bnorm = np.linalg.norm(rhs)
        if bnorm > 0 and np.linalg.norm(A @ x - rhs) > tol * bnorm:
            raise SolverError("solve_spd: direct solve residual above tolerance", np.linalg.norm(A @ x - rhs) / bnorm)
        return x
    if method != "cg":
        raise ValueError(f"unknown solver method {method!r}")
    x, res, _ = _cg(A, rhs, x0, A.diagonal(), tol, 10 * grid.interior_count)
    if not res <= tol:  # also catches a NaN from CG breakdown
        raise SolverError("solve_spd: conjugate gradients did not converge", res)
    return x


def region_mask(grid: Grid2D, box) -> RegionMask:
    """Interior nodes inside the closed box ``(x0, x1, y0, y1)``."""
    x0, x1, y0, y1 = map(float, box)
    if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
        raise ValueError("region_mask: box must satisfy 0 <= x0 < x1 <= 1, 0 <= y0 < y1 <= 1")
    x, y = grid.coords
    eps = 1e-9 * grid.h  # closed box, nodes on its edges count as inside
    ind = (x >= x0 - eps) & (x <= x1 + eps) & (y >= y0 - eps) & (y <= y1 + eps)
    if not ind.any():
        raise ValueError("region_mask: box contains no interior node")
    return RegionMask(grid, ind)


def inner(u: GridField, v: GridField) -> float:
    """Discrete L2(Omega) inner product h^2 sum u v."""
    if u.grid != v.grid:
        raise ValueError("inner: grid mismatch")
    return float(u.grid.h**2 * (u.values @ v.values))


def norm2(u: GridField) -> float:
    return math.sqrt(inner(u, u))

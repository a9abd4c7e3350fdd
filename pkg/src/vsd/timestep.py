"""Time stepping for the transformed forward problem and its time-reversed adjoint.

Both problems have the form

    C-D^{alpha0} u - Delta u + (gtilde' * u) = rhs(t)

and are advanced with the L1 scheme for the Caputo term and product
integration (piecewise-linear u, exact cell integrals of gtilde') for the
memory term. The newest half cell of the memory term is implicit, so each step
is one solve with ((c0 + gtilde(dt)/2) I - Delta_h).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .grid import Grid2D, GridField, RegionMask, solve_spd_array
from .kernel import KernelSplit, convolution_weights, eval_gtilde
from .specfun import gamma_fn

__all__ = [
    "TimeGrid",
    "Trajectory",
    "SourceSpec",
    "PowerBeta",
    "l1_weights",
    "solve_forward",
    "solve_adjoint",
    "duhamel_reconstruct",
    "trajectory_l2",
]


def l1_weights(alpha0: float, Nt: int) -> np.ndarray:
    """L1 weights b_j = (j+1)^{1-alpha0} - j^{1-alpha0}, j = 0..Nt-1."""
    if not 0.0 < alpha0 < 1.0:
        raise ValueError("l1_weights: alpha0 must lie in (0, 1)")
    j = np.arange(Nt + 1, dtype=float)
    return np.diff(j ** (1.0 - alpha0))


@dataclass(frozen=True)
class TimeGrid:
    T: float
    Nt: int
    alpha0: float

    def __post_init__(self):
        if not self.T > 0 or self.Nt < 1:
            raise ValueError("TimeGrid needs T > 0 and Nt >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.Nt

    @cached_property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.Nt + 1)

    @cached_property
    def l1_weights(self) -> np.ndarray:
        return l1_weights(self.alpha0, self.Nt)

    @cached_property
    def trapezoid(self) -> np.ndarray:
        """Trapezoidal weights on t_0..t_Nt."""
        w = np.full(self.Nt + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


@dataclass(frozen=True)
class PowerBeta:
    """Temporal factor beta(t) = t^p (p = 0 gives beta = 1)."""

    p: float = 0.0

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("PowerBeta needs p >= 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.ones_like(t) if self.p == 0 else t**self.p


@dataclass
class SourceSpec:
    """Right-hand side f(x) beta(t) + extra_rhs(t)."""

    f: Optional[GridField] = None
    beta: Callable = field(default_factory=PowerBeta)
    extra_rhs: Optional[Callable] = None

    def __post_init__(self):
        if self.f is not None and not np.all(np.isfinite(self.f.values)):
            raise ValueError("SourceSpec: f must be finite")


@dataclass
class Trajectory:
    """Fields at t_0..t_Nt stored as an (Nt+1, (N-1)^2) array."""

    timegrid: TimeGrid
    grid: Grid2D
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.timegrid.Nt + 1, self.grid.interior_count):
            raise ValueError("Trajectory shape does not match its grids")

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, n) -> GridField:
        return GridField(self.grid, self.values[n])

    @property
    def fields(self) -> list[GridField]:
        return [self[n] for n in range(len(self))]


def trajectory_l2(traj_or_values, grid: Grid2D, tg: TimeGrid) -> float:
    """L2(Omega x (0, T)) norm: h^2 in space, trapezoid in time."""
    vals = getattr(traj_or_values, "values", traj_or_values)
    per_t = grid.h**2 * np.einsum("ij,ij->i", vals, vals)
    return math.sqrt(float(tg.trapezoid @ per_t))


def _march(
    ks: KernelSplit,
    grid: Grid2D,
    tg: TimeGrid,
    rhs: Callable[[int], np.ndarray],
    u0: np.ndarray,
    solver: str,
    tol: float,
    include_memory: bool,
    start: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Advance the scheme; ``rhs(n)`` returns the right-hand side at t_n.

    ``start`` is an extra right-hand side used only in the first step.
    """
    Nt, dt, M = tg.Nt, tg.dt, grid.interior_count
    a0 = ks.alpha0
    c0 = dt ** (-a0) / float(gamma_fn(2.0 - a0))
    b = tg.l1_weights
    w = convolution_weights(ks, dt, Nt) if include_memory else np.zeros(Nt)
    diag = c0 + 0.5 * w[0]

    # Collect the explicit L1 and memory history into one coefficient per lag:
    # u^{n-k} enters the right-hand side with kappa[k] for 1 <= k <= n-1, and
    # u^0 with a lag-n boundary coefficient (it only borders one cell).
    kappa = np.zeros(Nt + 1)
    kappa[1:Nt] = -c0 * b[1:Nt] - 0.5 * (w[0 : Nt - 1] + w[1:Nt])
    kappa[2:Nt] += c0 * b[1 : Nt - 1]
    kappa[1] += c0
    first = c0 * np.concatenate(([1.0], b[1:Nt])) - 0.5 * w  # index n-1

    U = np.zeros((Nt + 1, M))
    U[0] = u0
    x_prev = u0
    for n in range(1, Nt + 1):
        r = rhs(n) + first[n - 1] * U[0]
        if n == 1 and start is not None:
            r += start
        if n > 1:
            r += kappa[n - 1 : 0 : -1] @ U[1:n]
        un = solve_spd_array(grid, diag, r, tol, x_prev, solver)
        if not np.all(np.isfinite(un)):
            raise FloatingPointError(f"non-finite values at time step {n} (t = {n * dt:.6g})")
        U[n] = un
        x_prev = un
    return U


def solve_forward(
    ks: KernelSplit,
    grid: Grid2D,
    tg: TimeGrid,
    src: SourceSpec,
    u0: Optional[GridField] = None,
    *,
    solver: str = "cg",
    tol: float = 1e-10,
    include_memory: bool = True,
    memory_u0: bool = True,
    correct_start: bool = True,
) -> Trajectory:
    """Solve C-D^{alpha0} u - Delta u + gtilde' * u = gtilde u0 + f beta + extra_rhs, u(0) = u0.

    ``memory_u0=False`` drops the gtilde u0 term, i.e. solves the constant-order
    form with initial value u0 and no induced source. With ``correct_start`` a
    nonzero u0 adds Delta_h u0 / 2 to the first step, the standard starting
    correction that restores the L1 accuracy for non-smooth initial layers; the
    source part is left as is, so problems with u0 = 0 are unaffected.
    """
    if tg.T > ks.T * (1 + 1e-12):
        raise ValueError("solve_forward: time horizon exceeds the kernel horizon")
    if not math.isclose(tg.alpha0, ks.alpha0, rel_tol=0, abs_tol=1e-15):
        raise ValueError("solve_forward: TimeGrid and KernelSplit disagree on alpha0")
    u0v = np.zeros(grid.interior_count) if u0 is None else u0.values
    times = tg.times
    g_t = eval_gtilde(ks, times) if include_memory else np.zeros_like(times)
    beta_t = np.asarray(src.beta(times), dtype=float) * np.ones_like(times)
    fv = None if src.f is None else src.f.values
    has_u0 = u0 is not None and np.any(u0v != 0.0)
    g_u0 = has_u0 and memory_u0
    start = -0.5 * (grid.neg_laplacian @ u0v) if (has_u0 and correct_start) else None

    def rhs(n):
        r = np.zeros(grid.interior_count)
        if fv is not None:
            r += beta_t[n] * fv
        if g_u0:
            r += g_t[n] * u0v
        if src.extra_rhs is not None:
            extra = src.extra_rhs(times[n])
            r += getattr(extra, "values", extra)
        return r

    U = _march(ks, grid, tg, rhs, u0v, solver, tol, include_memory, start)
    return Trajectory(tg, grid, U, {"scheme": "L1 + product integration", "solver": solver})


def _omega_table(omega, mask: RegionMask, tg: TimeGrid) -> np.ndarray:
    """Observation-space weights as an (Nt+1, n_mask) table on t_0..t_Nt."""
    Nt, k = tg.Nt, mask.count
    if callable(omega):
        x, y = mask.grid.coords
        xm, ym = x[mask.index], y[mask.index]
        return np.stack([np.broadcast_to(np.asarray(omega(xm, ym, t), float), (k,)) for t in tg.times])
    arr = np.asarray(omega, dtype=float)
    if arr.shape == (Nt + 1, k):
        return arr
    if arr.shape == (Nt, k):
        # observations start at t_1; the t_0 row is held constant from t_1
        return np.vstack([arr[:1], arr])
    raise ValueError(f"omega has shape {arr.shape}, expected ({Nt}, {k}) or ({Nt + 1}, {k})")


def solve_adjoint(
    ks: KernelSplit,
    grid: Grid2D,
    tg: TimeGrid,
    mask: RegionMask,
    omega,
    *,
    solver: str = "cg",
    tol: float = 1e-10,
    include_memory: bool = True,
) -> Trajectory:
    """Backward adjoint problem with source chi_{Omega0} omega, returned on t_0..t_Nt.

    Solved through phi_T(t) = phi(T - t), which satisfies the forward-type
    equation with source chi omega(T - t) and phi_T(0) = 0; the result is then
    reversed in time. ``omega`` is either a callable ``omega(x, y, t)`` on the
    masked nodes or a table over the masked nodes at t_1..t_Nt (or t_0..t_Nt).
    """
    if mask.grid != grid:
        raise ValueError("solve_adjoint: mask lives on a different grid")
    table = _omega_table(omega, mask, tg)
    Nt, idx = tg.Nt, mask.index

    def rhs(m):
        r = np.zeros(grid.interior_count)
        r[idx] = table[Nt - m]
        return r

    if tg.T > ks.T * (1 + 1e-12):
        raise ValueError("solve_adjoint: time horizon exceeds the kernel horizon")
    PhiT = _march(ks, grid, tg, rhs, np.zeros(grid.interior_count), solver, tol, include_memory)
    return Trajectory(
        tg, grid, PhiT[::-1].copy(), {"adjoint": "continuous-then-discretized (time reversal)", "solver": solver}
    )


def _theta_cell_weights(p: float, alpha0: float, dt: float, Nt: int):
    """Exact cell weights of theta(tau) = C tau^q against piecewise-linear v.

    theta solves J^{1-alpha0} theta = t^p: C = Gamma(p+1)/Gamma(p+alpha0), q = p + alpha0 - 1.
    Returns (A, B): cell k = n-1-j contributes A[k] v^j + B[k] v^{j+1} to u^n.
    """
    C = float(gamma_fn(p + 1.0) / gamma_fn(p + alpha0))
    q = p + alpha0 - 1.0
    a = dt * np.arange(Nt, dtype=float)
    b = a + dt
    Iq = (b ** (q + 1) - a ** (q + 1)) / (q + 1)
    Iq1 = (b ** (q + 2) - a ** (q + 2)) / (q + 2)
    A = C / dt * (Iq1 - a * Iq)
    B = C / dt * (b * Iq - Iq1)
    return A, B


def duhamel_reconstruct(
    ks: KernelSplit,
    grid: Grid2D,
    tg: TimeGrid,
    f: GridField,
    beta,
    *,
    solver: str = "cg",
    tol: float = 1e-10,
) -> Trajectory:
    """u = theta * v, with v the solution started from f and J^{1-alpha0} theta = beta.

    v solves C-D^{alpha0} v - Delta v + gtilde' * v = 0 with v(0) = f: applying
    the operator to theta * v gives (J^{1-alpha0} theta) f plus theta convolved
    with the operator applied to v, so v must solve the homogeneous equation.
    Only ``beta = PowerBeta(p)`` (t^p, p >= 0; p = 0 is beta = 1) is supported,
    for which theta is a power function and its cell integrals are exact.
    """
    if not isinstance(beta, PowerBeta):
        raise ValueError("duhamel_reconstruct: beta must be a PowerBeta (t^p)")
    v = solve_forward(ks, grid, tg, SourceSpec(), u0=f, solver=solver, tol=tol, memory_u0=False)
    A, B = _theta_cell_weights(beta.p, ks.alpha0, tg.dt, tg.Nt)
    V = v.values
    U = np.zeros_like(V)
    for n in range(1, tg.Nt + 1):
        U[n] = A[n - 1 :: -1] @ V[:n] + B[n - 1 :: -1] @ V[1 : n + 1]
    return Trajectory(tg, grid, U, {"duhamel": True, "beta_power": beta.p})

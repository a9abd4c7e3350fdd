"""Observation operator, its adjoint, noise model and the two reconstruction schemes.

Data live on the masked nodes at t_1..t_Nt (u(., 0) = 0 is known) and are
stored as an (Nt, n_mask) array. The data inner product is h^2 in space and
the trapezoidal rule in time; since the t_0 row vanishes, the time weights are
dt except for dt/2 at t_Nt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import Grid2D, GridField, RegionMask
from .kernel import KernelSplit
from .timestep import PowerBeta, SourceSpec, TimeGrid, _march, solve_adjoint, solve_forward

__all__ = [
    "InversionSetup",
    "Observation",
    "InversionConfig",
    "HistoryRow",
    "ReconstructionResult",
    "apply_G",
    "apply_Gstar",
    "data_inner",
    "data_norm",
    "add_noise",
    "iterative_thresholding",
    "tv_prox",
    "ProxState",
    "total_variation",
    "nesterov_tpg",
    "relative_error",
    "default_lambda_schedule",
]


@dataclass(frozen=True)
class InversionSetup:
    """Everything the forward map f -> u[f]|_{Omega0 x (0,T)} depends on.

    ``adjoint="continuous"`` discretises the backward adjoint problem
    (time reversal of the forward scheme); ``adjoint="discrete"`` uses the
    exact transpose of the discrete forward map.

    ``norm`` fixes the inner products on both sides of G. ``"l2"`` is the
    quadrature of L2(Omega) and L2(Omega0 x (0, T)); ``"euclidean"`` is the
    plain 2-norm of the nodal vectors (sums over nodes and time steps). The
    two differ by a factor of order 1/dt in the size of G*G, which is what
    the thresholding constant A is measured against.
    """

    ks: KernelSplit
    grid: Grid2D
    tg: TimeGrid
    mask: RegionMask
    beta: Callable = field(default_factory=PowerBeta)
    solver: str = "direct"
    tol: float = 1e-10
    adjoint: str = "continuous"
    norm: str = "l2"

    def __post_init__(self):
        if self.mask.grid != self.grid:
            raise ValueError("InversionSetup: mask lives on a different grid")
        if self.adjoint not in ("continuous", "discrete"):
            raise ValueError(f"unknown adjoint mode {self.adjoint!r}")
        if self.norm not in ("l2", "euclidean"):
            raise ValueError(f"unknown norm {self.norm!r}")

    @property
    def data_shape(self) -> tuple[int, int]:
        return (self.tg.Nt, self.mask.count)

    @property
    def time_weights(self) -> np.ndarray:
        """Quadrature weights on t_1..t_Nt."""
        return self.tg.trapezoid[1:]

    def field_norm(self, f: GridField) -> float:
        nrm = float(np.linalg.norm(f.values))
        return nrm * self.grid.h if self.norm == "l2" else nrm


@dataclass
class Observation:
    mask: RegionMask
    timegrid: TimeGrid
    data: np.ndarray
    noise_level: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.timegrid.Nt, self.mask.count):
            raise ValueError(
                f"Observation data has shape {self.data.shape}, expected {(self.timegrid.Nt, self.mask.count)}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("Observation data must be finite")
        if self.noise_level < 0:
            raise ValueError("noise_level must be non-negative")


def default_lambda_schedule(n: int) -> float:
    return n / (n + 5.0)


@dataclass(frozen=True)
class InversionConfig:
    A: float = 30.0
    eps: Optional[float] = None  # None -> 1e-4 * A
    rho: float = 2e-4
    kappa: float = 1.0
    tau: float = 1.05
    gamma0_bar: float = 1.0
    gamma1_bar: float = 100.0
    lambda_schedule: Callable[[int], float] = default_lambda_schedule
    max_outer: int = 500
    pdhg_iters: int = 200

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("InversionConfig: A must be positive")
        if self.eps is None:
            object.__setattr__(self, "eps", 1e-4 * self.A)
        if self.eps < 0:
            raise ValueError("InversionConfig: eps must be non-negative")
        if not self.rho > 0:
            raise ValueError("InversionConfig: rho must be positive")
        if not self.tau > 1:
            raise ValueError("InversionConfig: tau must exceed 1")
        if not (self.kappa > 0 and self.gamma0_bar > 0 and self.gamma1_bar > 0):
            raise ValueError("InversionConfig: kappa and step-size caps must be positive")
        if self.lambda_schedule(0) != 0:
            raise ValueError("InversionConfig: lambda_schedule(0) must be 0")
        if self.max_outer < 1 or self.pdhg_iters < 1:
            raise ValueError("InversionConfig: iteration counts must be positive")


@dataclass(frozen=True)
class HistoryRow:
    iter: int
    residual: float
    rel_change: float
    rel_error: Optional[float] = None
    gamma_n: Optional[float] = None
    lambda_n: Optional[float] = None


@dataclass
class ReconstructionResult:
    f_inv: GridField
    iterations: int
    history: list
    stop_reason: str
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.history:
            raise ValueError("ReconstructionResult: empty history")
        if self.stop_reason not in ("tolerance", "discrepancy", "cap"):
            raise ValueError(f"unknown stop reason {self.stop_reason!r}")


# -- operators ---------------------------------------------------------------


def _check_field(f: GridField, setup: InversionSetup):
    if f.grid != setup.grid:
        raise ValueError("field lives on a different grid than the setup")


def apply_G(f: GridField, setup: InversionSetup) -> np.ndarray:
    """u[f] with zero initial value and source f beta, on the masked nodes at t_1..t_Nt."""
    _check_field(f, setup)
    if not np.any(f.values):
        return np.zeros(setup.data_shape)
    traj = solve_forward(
        setup.ks, setup.grid, setup.tg, SourceSpec(f=f, beta=setup.beta), solver=setup.solver, tol=setup.tol
    )
    return traj.values[1:, setup.mask.index]


def _beta_nodes(setup: InversionSetup) -> np.ndarray:
    t = setup.tg.times
    return np.asarray(setup.beta(t), dtype=float) * np.ones_like(t)


def _gstar_discrete(w: np.ndarray, setup: InversionSetup) -> np.ndarray:
    # Transpose of the lower-triangular block-Toeplitz march: the same march
    # run on reversed, quadrature-weighted data.
    Nt, idx = setup.tg.Nt, setup.mask.index
    tw = setup.time_weights
    M = setup.grid.interior_count

    def rhs(m):
        r = np.zeros(M)
        r[idx] = tw[Nt - m] * w[Nt - m]  # data row for t_{Nt+1-m}
        return r

    P = _march(setup.ks, setup.grid, setup.tg, rhs, np.zeros(M), setup.solver, setup.tol, True)
    beta = _beta_nodes(setup)
    # P[m] is the multiplier attached to u^{Nt+1-m}
    return beta[Nt:0:-1] @ P[1:]


def apply_Gstar(w: np.ndarray, setup: InversionSetup) -> GridField:
    """Adjoint of :func:`apply_G` for data ``w`` of shape (Nt, n_mask)."""
    w = np.asarray(w, dtype=float)
    if w.shape != setup.data_shape:
        raise ValueError(f"apply_Gstar: data has shape {w.shape}, expected {setup.data_shape}")
    if not np.any(w):
        return setup.grid.zeros()
    if setup.norm == "euclidean":
        # G^T v = G*_{l2}(v / time weights); the h^2 factors cancel
        w = w / setup.time_weights[:, None]
    if setup.adjoint == "discrete":
        return GridField(setup.grid, _gstar_discrete(w, setup))
    phi = solve_adjoint(setup.ks, setup.grid, setup.tg, setup.mask, w, solver=setup.solver, tol=setup.tol)
    weights = setup.tg.trapezoid * _beta_nodes(setup)
    return GridField(setup.grid, weights @ phi.values)


def data_inner(a: np.ndarray, b: np.ndarray, setup: InversionSetup) -> float:
    """Data inner product: L2(Omega0 x (0, T)) quadrature or the nodal dot product."""
    if setup.norm == "euclidean":
        return float(np.sum(a * b))
    return float(setup.grid.h**2 * (setup.time_weights @ np.einsum("ij,ij->i", a, b)))


def data_norm(a: np.ndarray, setup: InversionSetup) -> float:
    return math.sqrt(max(data_inner(a, a, setup), 0.0))


def add_noise(g: np.ndarray, delta: float, seed) -> np.ndarray:
    """Multiplicative noise g (1 + delta zeta), zeta i.i.d. standard normal."""
    if delta < 0:
        raise ValueError("add_noise: delta must be non-negative")
    g = np.asarray(g, dtype=float)
    if delta == 0:
        return g.copy()
    zeta = np.random.default_rng(seed).standard_normal(g.shape)
    return g * (1.0 + delta * zeta)


def relative_error(f_inv: GridField, f_true: GridField) -> float:
    """Discrete L2 error of f_inv relative to f_true."""
    if f_inv.grid != f_true.grid:
        raise ValueError("relative_error: grid mismatch")
    ref = float(np.linalg.norm(f_true.values))
    if ref == 0.0:
        raise ValueError("relative_error: f_true has zero norm")
    return float(np.linalg.norm(f_inv.values - f_true.values)) / ref


# -- smooth sources ----------------------------------------------------------


def iterative_thresholding(
    g_delta: np.ndarray,
    cfg: InversionConfig,
    f0: GridField,
    setup: InversionSetup,
    f_true: Optional[GridField] = None,
) -> ReconstructionResult:
    """Fixed-point iteration f <- (A f - G*(G f - g_delta)) / (A + eps).

    Stops when ||f_{n+1} - f_n|| / ||f_n|| <= rho, or at ``cfg.max_outer``.
    When ||f_n|| = 0 the absolute change is compared with rho for that step.
    """
    _check_field(f0, setup)
    A, eps = cfg.A, cfg.eps
    f = f0
    history = []
    reason = "cap"
    n = 0
    for n in range(1, cfg.max_outer + 1):
        r = apply_G(f, setup) - g_delta
        res = data_norm(r, setup)
        f_new = GridField(setup.grid, (A * f.values - apply_Gstar(r, setup).values) / (A + eps))
        change = setup.field_norm(f_new - f)
        fn = setup.field_norm(f)
        rel = change / fn if fn > 0 else change
        err = relative_error(f_new, f_true) if f_true is not None else None
        # residual recorded is the one of the iterate the step started from
        history.append(HistoryRow(n, res, rel, err))
        f = f_new
        if rel <= cfg.rho:
            reason = "tolerance"
            break
    return ReconstructionResult(f, n, history, reason, {"A": A, "eps": eps, "rho": cfg.rho})


# -- TV prox -----------------------------------------------------------------


def _grad(z: np.ndarray, h: float):
    gx = np.zeros_like(z)
    gy = np.zeros_like(z)
    gx[:-1, :] = (z[1:, :] - z[:-1, :]) / h
    gy[:, :-1] = (z[:, 1:] - z[:, :-1]) / h
    return gx, gy


def _div(px: np.ndarray, py: np.ndarray, h: float) -> np.ndarray:
    """Negative adjoint of :func:`_grad`."""
    d = np.zeros_like(px)
    d[:-1, :] += px[:-1, :]
    d[1:, :] -= px[:-1, :]
    d[:, :-1] += py[:, :-1]
    d[:, 1:] -= py[:, :-1]
    return d / h


def total_variation(z: GridField) -> float:
    """Isotropic discrete TV, h^2 sum |grad_h z| (forward differences, reflecting boundary)."""
    gx, gy = _grad(z.as_array(), z.grid.h)
    return float(z.grid.h**2 * np.sum(np.sqrt(gx * gx + gy * gy)))


@dataclass
class ProxState:
    """Dual field of the last :func:`tv_prox` call, reusable as a warm start."""

    px: np.ndarray
    py: np.ndarray
    gap: float


def tv_prox(
    v: GridField,
    weight: float,
    iters: int = 200,
    *,
    tau0: float = 1.0,
    warm: Optional[ProxState] = None,
    return_state: bool = False,
):
    """argmin_z 1/2 ||z - v||^2 + weight * TV(z) by the accelerated primal-dual method.

    The data term is 1-strongly convex, so the step sizes follow
    theta = 1/sqrt(1 + 2 tau), tau <- theta tau, sigma <- sigma / theta from
    tau0 and sigma0 = h^2 / (8 tau0), keeping sigma tau 8 / h^2 = 1.
    ``warm`` restarts from a previous dual field; ``return_state=True``
    also returns a :class:`ProxState` carrying the final primal-dual gap
    of the per-node problem.
    """
    if not weight > 0:
        raise ValueError("tv_prox: weight must be positive")
    if iters < 1:
        raise ValueError("tv_prox: iters must be positive")
    h = v.grid.h
    V = v.as_array()
    if warm is None:
        px = np.zeros_like(V)
        py = np.zeros_like(V)
        z = V.copy()
    else:
        px, py = warm.px.copy(), warm.py.copy()
        scale = np.maximum(1.0, np.sqrt(px * px + py * py) / weight)
        px /= scale
        py /= scale
        z = V + _div(px, py, h)
    zbar = z.copy()
    tau = tau0
    sigma = h * h / (8.0 * tau0)
    for _ in range(iters):
        gx, gy = _grad(zbar, h)
        px += sigma * gx
        py += sigma * gy
        scale = np.maximum(1.0, np.sqrt(px * px + py * py) / weight)
        px /= scale
        py /= scale
        # written relative to v so that a constant input is returned exactly
        z_new = V + (z - V + tau * _div(px, py, h)) / (1.0 + tau)
        theta = 1.0 / math.sqrt(1.0 + 2.0 * tau)
        tau *= theta
        sigma /= theta
        zbar = z_new + theta * (z_new - z)
        z = z_new
    out = GridField(v.grid, z.ravel())
    if not return_state:
        return out
    # the dual objective is -|div p|^2/2 - <div p, v>
    gx, gy = _grad(z, h)
    primal = 0.5 * np.sum((z - V) ** 2) + weight * np.sum(np.sqrt(gx * gx + gy * gy))
    d = _div(px, py, h)
    dual = -0.5 * np.sum(d * d) - np.sum(V * d)
    return out, ProxState(px, py, float(primal - dual))


# -- non-smooth sources ------------------------------------------------------


def nesterov_tpg(
    g_delta: np.ndarray,
    cfg: InversionConfig,
    f0: GridField,
    xi0: Optional[GridField],
    setup: InversionSetup,
    delta_abs: float,
    f_true: Optional[GridField] = None,
) -> ReconstructionResult:
    """Two-point gradient iteration with the penalty ||f||^2/(2 kappa) + TV(f).

    Every argmin {R(z) - (eta, z)} is ``tv_prox(kappa * eta, kappa)``,
    warm-started from the previous dual field. The iteration stops at the
    first n with ||G z_n - g_delta|| <= tau * delta_abs and returns z_n, so the
    f-sequence (which never feeds back into z) is not formed. ``xi0`` must be
    a subgradient of R at f0; ``None`` uses f0 / kappa, which is one whenever
    f0 is constant. The inner primal-dual gaps are kept in ``info["prox_gap"]``.
    """
    _check_field(f0, setup)
    kappa = cfg.kappa
    xi = f0 / kappa if xi0 is None else xi0
    _check_field(xi, setup)
    xi_prev = xi
    thresh = cfg.tau * delta_abs
    history = []
    reason = "cap"
    z = f0
    z_prev = None
    state = None
    gaps = []
    for n in range(cfg.max_outer + 1):
        lam = float(cfg.lambda_schedule(n))
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lambda_schedule({n}) = {lam} outside [0, 1]")
        eta = xi + lam * (xi - xi_prev)
        z, state = tv_prox(eta * kappa, kappa, cfg.pdhg_iters, warm=state, return_state=True)
        gaps.append(state.gap)
        r = apply_G(z, setup) - g_delta if math.isfinite(thresh) else None
        res = data_norm(r, setup) if r is not None else 0.0
        change = setup.field_norm(z - z_prev) / max(setup.field_norm(z_prev), 1e-300) if z_prev is not None else math.nan
        err = relative_error(z, f_true) if f_true is not None else None
        if res <= thresh:
            history.append(HistoryRow(n, res, change, err, 0.0, lam))
            reason = "discrepancy"
            break
        if n == cfg.max_outer:
            history.append(HistoryRow(n, res, change, err, 0.0, lam))
            break
        grad = apply_Gstar(r, setup)
        gnorm2 = setup.field_norm(grad) ** 2
        gamma = cfg.gamma1_bar if gnorm2 == 0 else min(cfg.gamma0_bar * res * res / gnorm2, cfg.gamma1_bar)
        history.append(HistoryRow(n, res, change, err, gamma, lam))
        xi_prev, xi = xi, xi - gamma * grad
        z_prev = z
    return ReconstructionResult(
        z, len(history) - 1, history, reason, {"delta_abs": delta_abs, "threshold": thresh, "prox_gap": gaps}
    )

"""Spectral-mode reference solutions on the unit square.

Each Dirichlet eigenmode phi_nm = 2 sin(n pi x) sin(m pi y) with
lambda_nm = pi^2 (n^2 + m^2) decouples the transformed equation into the scalar
Volterra problem

    C-D^{alpha0} c + lambda c + (gtilde' * c) = gtilde c(0) + q(t),

solved here on a fine time grid. Nothing in this module touches the spatial
grid solver; only the special functions and the kernel split are shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .kernel import KernelSplit, convolution_weights, eval_gtilde
from .specfun import gamma_fn

__all__ = [
    "Mode",
    "ModeSet",
    "SpectralSolution",
    "project_modes",
    "solve_mode_scalar",
    "spectral_solution",
]


@dataclass(frozen=True)
class Mode:
    n: int
    m: int
    lam: float
    coef: float


@dataclass
class ModeSet:
    max_index: int
    modes: list = field(default_factory=list)

    def coefficient(self, n: int, m: int) -> float:
        for md in self.modes:
            if md.n == n and md.m == m:
                return md.coef
        raise KeyError((n, m))

    def nonzero(self, rel: float = 1e-14) -> list:
        big = max((abs(md.coef) for md in self.modes), default=0.0)
        return [md for md in self.modes if abs(md.coef) > rel * big and md.coef != 0.0]


def _simpson_weights(n_intervals: int, h: float) -> np.ndarray:
    w = np.ones(n_intervals + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def project_modes(f: Union[Callable, "object"], M: int) -> ModeSet:
    """L2 projections (f, 2 sin(n pi x) sin(m pi y)) for 1 <= n, m <= M.

    ``f`` is either a callable f(x, y) (sampled at >= 4M Simpson points per
    axis, at least 64) or a GridField, whose nodal values (with zero boundary)
    are integrated with Simpson's rule when N is even and the trapezoid rule
    otherwise.
    """
    if M < 1:
        raise ValueError("project_modes: M must be >= 1")
    if callable(f):
        nq = max(4 * M, 64)
        nq += nq % 2
        s = np.linspace(0.0, 1.0, nq + 1)
        X, Y = np.meshgrid(s, s, indexing="ij")
        F = np.asarray(f(X, Y), dtype=float) * np.ones_like(X)
        w = _simpson_weights(nq, 1.0 / nq)
    else:
        grid = f.grid
        N = grid.n_cells
        s = np.linspace(0.0, 1.0, N + 1)
        F = np.zeros((N + 1, N + 1))
        F[1:-1, 1:-1] = f.as_array()
        if N % 2 == 0:
            w = _simpson_weights(N, 1.0 / N)
        else:
            w = np.full(N + 1, 1.0 / N)
            w[0] = w[-1] = 0.5 / N
    idx = np.arange(1, M + 1)
    S = np.sin(np.pi * np.outer(s, idx))  # (points, M)
    Sw = S * w[:, None]
    C = 2.0 * Sw.T @ F @ Sw  # C[n-1, m-1]
    modes = [
        Mode(int(n), int(m), math.pi**2 * (n * n + m * m), float(C[n - 1, m - 1]))
        for n in idx
        for m in idx
    ]
    return ModeSet(M, modes)


def solve_mode_scalar(
    ks: KernelSplit,
    lam,
    q: Callable,
    c0,
    Nt_fine: int,
    T: float = None,
    *,
    include_memory: bool = True,
    correct_start: bool = True,
) -> np.ndarray:
    """Scalar mode problem on Nt_fine uniform steps of [0, T].

    ``lam`` and ``c0`` may be arrays of equal length (independent modes
    solved together); ``q(t)`` returns the forcing at the time nodes, either
    shared by every mode or one value per mode. Returns shape (Nt_fine+1,) for
    scalar input, else (Nt_fine+1, n_modes).
    """
    if Nt_fine < 10:
        raise ValueError("solve_mode_scalar: Nt_fine must be >= 10")
    T = ks.T if T is None else T
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    c0_arr = np.broadcast_to(np.asarray(c0, dtype=float), lam_arr.shape).astype(float)
    scalar = np.ndim(lam) == 0
    dt = T / Nt_fine
    a0 = ks.alpha0
    mu = dt ** (-a0) / float(gamma_fn(2.0 - a0))
    jj = np.arange(Nt_fine + 1, dtype=float)
    b = np.diff(jj ** (1.0 - a0))
    w = convolution_weights(ks, dt, Nt_fine) if include_memory else np.zeros(Nt_fine)
    t = dt * jj
    g_t = eval_gtilde(ks, t) if include_memory else np.zeros_like(t)
    Q = np.asarray(q(t), dtype=float)
    if Q.ndim == 1:
        Q = Q[:, None]
    Q = np.broadcast_to(Q, (t.size, lam_arr.size))

    C = np.zeros((Nt_fine + 1, lam_arr.size))
    C[0] = c0_arr
    # history written directly in differences (L1) and cell averages (memory)
    D = np.zeros_like(C)
    Avg = np.zeros_like(C)
    denom = mu + lam_arr + 0.5 * w[0]
    for n in range(1, Nt_fine + 1):
        r = Q[n] + g_t[n] * c0_arr + mu * C[n - 1]
        if n > 1:
            r -= mu * (b[1:n] @ D[n - 1 : 0 : -1])
            r -= w[n - 1 : 0 : -1] @ Avg[1:n]
        r -= 0.5 * w[0] * C[n - 1]
        if n == 1 and correct_start:
            r -= 0.5 * lam_arr * c0_arr
        cn = r / denom
        C[n] = cn
        D[n] = cn - C[n - 1]
        Avg[n] = 0.5 * (C[n - 1] + cn)
    return C[:, 0] if scalar else C


class SpectralSolution:
    """Callable u(x, y, t) = sum_nm c_nm(t) phi_nm(x, y), c_nm linear in t between fine nodes."""

    def __init__(self, modes: list, coeffs: np.ndarray, t_fine: np.ndarray):
        self.modes = modes
        self.coeffs = coeffs  # (Nt_fine+1, n_modes)
        self.t_fine = t_fine

    def coefficients_at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, len(self.modes)))
        for k in range(len(self.modes)):
            out[:, k] = np.interp(t, self.t_fine, self.coeffs[:, k])
        return out

    def _basis(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if not self.modes:
            return np.zeros((x.size, 0))
        return np.stack(
            [2.0 * np.sin(md.n * np.pi * x) * np.sin(md.m * np.pi * y) for md in self.modes], axis=1
        )

    def __call__(self, x, y, t):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        X, Y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        phi = self._basis(X, Y)
        c = self.coefficients_at(t)
        vals = c @ phi.T
        if np.ndim(t) == 0:
            return vals[0].reshape(shape) if shape else float(vals[0, 0])
        return vals.reshape((np.size(t),) + shape)

    def on_nodes(self, x, y, times) -> np.ndarray:
        """Values at flattened node coordinates for each time: shape (len(times), len(x))."""
        return self.coefficients_at(times) @ self._basis(x, y).T


def spectral_solution(ks: KernelSplit, modes: ModeSet, beta: Callable, tg=None, Nt_fine: int = 4000,
                      T: float = None) -> SpectralSolution:
    """Zero-initial-value solution for the source f(x) beta(t), f given by its modes.

    Every retained mode obeys c_nm = coef_nm * y(lambda_nm), where y solves the
    scalar problem with forcing beta; one solve per distinct eigenvalue.
    """
    T = (tg.T if tg is not None else ks.T) if T is None else T
    kept = modes.nonzero()
    if not kept:
        t = np.linspace(0.0, T, Nt_fine + 1)
        return SpectralSolution([], np.zeros((t.size, 0)), t)
    lams = np.array([md.lam for md in kept])
    uniq, inv = np.unique(np.round(lams, 9), return_inverse=True)
    Y = solve_mode_scalar(ks, uniq, lambda t: np.asarray(beta(t), float) * np.ones_like(t), np.zeros(uniq.size), Nt_fine, T)
    coefs = np.array([md.coef for md in kept])
    t = np.linspace(0.0, T, Nt_fine + 1)
    return SpectralSolution(kept, Y[:, inv] * coefs[None, :], t)

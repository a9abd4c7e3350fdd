"""Orchestration of forward runs, synthetic data, reconstructions and verification reports."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import io as vio
from .config import ExperimentConfig, source_function
from .grid import Grid2D, GridField, build_grid, region_mask
from .inversion import (
    InversionConfig,
    InversionSetup,
    add_noise,
    apply_G,
    apply_Gstar,
    data_inner,
    data_norm,
    iterative_thresholding,
    nesterov_tpg,
    relative_error,
)
from .kernel import ExponentProfile, KernelSplit, verify_kernel_bounds
from .oracle import project_modes, spectral_solution
from .timestep import PowerBeta, SourceSpec, TimeGrid, duhamel_reconstruct, solve_forward, trajectory_l2

__all__ = [
    "Problem",
    "build_problem",
    "output_dir",
    "restrict",
    "generate_data",
    "run_forward",
    "run_inversion",
    "oracle_report",
    "run_oracle_check",
    "verify_reports",
    "run_verify",
]

log = logging.getLogger(__name__)


@dataclass
class Problem:
    cfg: ExperimentConfig
    ks: KernelSplit
    grid: Grid2D
    tg: TimeGrid
    setup: InversionSetup
    beta: PowerBeta


def _kernel(cfg: ExperimentConfig) -> KernelSplit:
    prof = ExponentProfile.affine(cfg.exponent.a0, cfg.exponent.slope, cfg.T)
    return KernelSplit(prof, cfg.T)


def build_problem(cfg: ExperimentConfig, N: Optional[int] = None, Nt: Optional[int] = None) -> Problem:
    ks = _kernel(cfg)
    grid = build_grid(N or cfg.N)
    tg = TimeGrid(cfg.T, Nt or cfg.Nt, ks.alpha0)
    beta = PowerBeta(cfg.beta.p)
    mask = region_mask(grid, cfg.observation.box)
    num = cfg.numerics
    setup = InversionSetup(ks, grid, tg, mask, beta=beta, solver=num.solver, adjoint=num.adjoint, norm=num.norm)
    return Problem(cfg, ks, grid, tg, setup, beta)


def output_dir(cfg: ExperimentConfig, sub: str = "") -> Path:
    """``$VSD_OUT/<name>`` when the variable is set, else ``<cfg.output>/<name>``."""
    root = os.environ.get("VSD_OUT") or cfg.output
    d = Path(root) / cfg.name
    if sub:
        d = d / sub
    d.mkdir(parents=True, exist_ok=True)
    return d


def restrict(values: np.ndarray, fine: Grid2D, coarse: Grid2D, time_stride: int) -> np.ndarray:
    """Nodal injection of an (Nt_fine+1, M_fine) trajectory onto nested coarse grids."""
    r, rem = divmod(fine.n_cells, coarse.n_cells)
    if rem:
        raise ValueError("restrict: grids are not nested")
    idx = np.arange(1, coarse.n_cells) * r - 1
    arr = values[::time_stride].reshape(-1, fine.n_side, fine.n_side)
    return arr[:, idx][:, :, idx].reshape(arr.shape[0], -1)


def generate_data(cfg: ExperimentConfig, seed: Optional[int] = None):
    """Exact and noisy observations of the configured source.

    The forward problem is solved on a grid refined by ``numerics.data_refinement``
    in space and ``numerics.data_time_refinement`` in time, then restricted to
    the inversion grid, so the data never come from the inversion discretisation.
    Returns ``(g_exact, g_delta, delta_abs, problem)``.
    """
    prob = build_problem(cfg)
    num = cfg.numerics
    fine = build_grid(cfg.N * num.data_refinement)
    tg_fine = TimeGrid(cfg.T, cfg.Nt * num.data_time_refinement, prob.ks.alpha0)
    f_fine = fine.sample(source_function(cfg.source))
    traj = solve_forward(prob.ks, fine, tg_fine, SourceSpec(f=f_fine, beta=prob.beta), solver=num.solver)
    U = restrict(traj.values, fine, prob.grid, num.data_time_refinement)
    g = U[1:, prob.setup.mask.index]
    seed = cfg.noise.seed if seed is None else seed
    g_delta = add_noise(g, cfg.noise.delta, seed)
    delta_abs = cfg.noise.delta * data_norm(g, prob.setup)
    return g, g_delta, delta_abs, prob


def _inv_config(cfg: ExperimentConfig) -> InversionConfig:
    a = cfg.algorithm
    shift = a.lambda_shift
    return InversionConfig(
        A=a.A,
        eps=a.eps,
        rho=a.rho,
        kappa=a.kappa,
        tau=a.tau,
        gamma0_bar=a.gamma0_bar,
        gamma1_bar=a.gamma1_bar,
        lambda_schedule=lambda n: n / (n + shift),
        max_outer=a.max_outer,
        pdhg_iters=a.pdhg_iters,
    )


def run_forward(cfg: ExperimentConfig, plots: bool = True) -> dict:
    prob = build_problem(cfg)
    f = prob.grid.sample(source_function(cfg.source))
    traj = solve_forward(prob.ks, prob.grid, prob.tg, SourceSpec(f=f, beta=prob.beta), solver=cfg.numerics.solver)
    out = output_dir(cfg, "forward")
    vio.write_field_csv(f, out / "source.csv")
    vio.write_trajectory(traj, out / "trajectory", stride=cfg.trajectory_stride)
    vio.write_metadata(out / "metadata.json", cfg.to_dict(), {"subcommand": "forward"})
    if plots:
        from .plotting import plot_snapshots

        plot_snapshots(traj, out / "snapshots.png")
    return {"out": out, "trajectory": traj, "l2_norm": trajectory_l2(traj, prob.grid, prob.tg)}


def run_inversion(
    cfg: ExperimentConfig,
    data_path=None,
    seed: Optional[int] = None,
    plots: bool = True,
    write: bool = True,
) -> dict:
    """Synthetic (or supplied) data followed by the configured reconstruction."""
    prob = build_problem(cfg)
    f_true = prob.grid.sample(source_function(cfg.source))
    if data_path is None:
        g, g_delta, delta_abs, _ = generate_data(cfg, seed)
        data_meta = {"source": "synthetic", "delta_abs": delta_abs}
    else:
        g_delta, side = vio.read_observation(data_path)
        if g_delta.shape != prob.setup.data_shape:
            raise ValueError(f"{data_path}: data shape {g_delta.shape} does not match {prob.setup.data_shape}")
        g = None
        if "delta_abs" in side:
            delta_abs = float(side["delta_abs"])
        else:
            # without the exact data, the noisy data norm stands in for ||g||
            delta_abs = cfg.noise.delta * data_norm(g_delta, prob.setup)
        data_meta = {"source": str(data_path), "delta_abs": delta_abs}

    f0 = (
        prob.grid.sample(source_function(cfg.initial_guess)) if cfg.initial_guess is not None else prob.grid.zeros()
    )
    icfg = _inv_config(cfg)
    if cfg.algorithm.kind == "thresholding":
        res = iterative_thresholding(g_delta, icfg, f0, prob.setup, f_true=f_true)
    else:
        res = nesterov_tpg(g_delta, icfg, f0, None, prob.setup, delta_abs, f_true=f_true)
    err = relative_error(res.f_inv, f_true)
    final_res = data_norm(apply_G(res.f_inv, prob.setup) - g_delta, prob.setup)
    summary = {
        "stop_reason": res.stop_reason,
        "iterations": res.iterations,
        "rel_error": err,
        "final_residual": final_res,
        "delta_abs": delta_abs,
        "threshold": cfg.algorithm.tau * delta_abs,
        "seed": cfg.noise.seed if seed is None else seed,
        "eps": icfg.eps,
    }
    out = None
    if write:
        cfg_dict = cfg.to_dict()
        cfg_dict["noise"]["seed"] = summary["seed"]
        out = output_dir(cfg, "invert")
        vio.write_field_csv(res.f_inv, out / "reconstruction.csv")
        vio.write_field_csv(f_true, out / "truth.csv")
        vio.write_log_csv(res.history, out / "convergence.csv")
        meta = {"observation": {"delta_abs": delta_abs, "delta": cfg.noise.delta, "seed": summary["seed"]}}
        vio.write_observation(g_delta, out / "data.csv", meta["observation"])
        vio.write_metadata(out / "metadata.json", cfg_dict, {"result": summary, "data": data_meta})
        if plots:
            from .plotting import plot_convergence, plot_fields

            plot_fields(f_true, res.f_inv, out / "reconstruction.png", cfg.observation.box, cfg.name)
            thr = summary["threshold"] if cfg.algorithm.kind == "tpg" else None
            plot_convergence(res.history, out / "convergence.png", thr)
    return {"result": res, "summary": summary, "out": out, "f_true": f_true, "problem": prob, "g": g,
            "g_delta": g_delta}


# -- verification ------------------------------------------------------------


def _mode_coefficients(values: np.ndarray, grid: Grid2D, modes) -> np.ndarray:
    """Discrete projections (u(t), 2 sin sin) of nodal trajectories, one column per mode."""
    x, y = grid.coords
    B = np.stack([2.0 * np.sin(md.n * np.pi * x) * np.sin(md.m * np.pi * y) for md in modes], axis=1)
    return grid.h**2 * values @ B


def oracle_report(cfg: ExperimentConfig, n_modes: int = 10, tol: float = 1e-2):
    """Grid solution against the spectral oracle.

    Returns per-mode rows (mode, lambda, max deviation of the coefficient over
    time, verdict) for the ``n_modes`` largest source modes and the overall
    relative L2(Omega x (0, T)) deviation.
    """
    prob = build_problem(cfg)
    ffun = source_function(cfg.source)
    f = prob.grid.sample(ffun)
    traj = solve_forward(prob.ks, prob.grid, prob.tg, SourceSpec(f=f, beta=prob.beta), solver=cfg.numerics.solver)
    modes = project_modes(ffun, cfg.oracle.M)
    spec = spectral_solution(prob.ks, modes, prob.beta, prob.tg, Nt_fine=cfg.oracle.Nt_fine)
    x, y = prob.grid.coords
    us = spec.on_nodes(x, y, prob.tg.times)
    overall = trajectory_l2(traj.values - us, prob.grid, prob.tg) / trajectory_l2(us, prob.grid, prob.tg)
    top = sorted(spec.modes, key=lambda md: -abs(md.coef))[:n_modes]
    c_grid = _mode_coefficients(traj.values, prob.grid, top)
    c_spec = spec.coefficients_at(prob.tg.times)[:, [spec.modes.index(md) for md in top]]
    scale = np.abs(c_spec).max()
    rows = []
    for k, md in enumerate(top):
        dev = float(np.abs(c_grid[:, k] - c_spec[:, k]).max())
        rows.append(
            {
                "mode": f"({md.n},{md.m})",
                "lambda": md.lam,
                "max_deviation": dev,
                "verdict": "pass" if dev <= tol * scale else "fail",
            }
        )
    return rows, float(overall)


def run_oracle_check(cfg: ExperimentConfig, plots: bool = True, tol: float = 1e-2) -> dict:
    rows, overall = oracle_report(cfg, tol=tol)
    out = output_dir(cfg, "oracle")
    path = out / "oracle_report.csv"
    with path.open("w", newline="") as fh:
        fh.write("mode,lambda,max_deviation,verdict\n")
        for r in rows:
            fh.write(f"\"{r['mode']}\",{r['lambda']:.17g},{r['max_deviation']:.17g},{r['verdict']}\n")
        fh.write(f"overall,,{overall:.17g},{'pass' if overall <= tol else 'fail'}\n")
    if plots:
        from .plotting import plot_oracle_report

        plot_oracle_report(rows, out / "oracle_report.png")
    ok = overall <= tol and all(r["verdict"] == "pass" for r in rows)
    return {"rows": rows, "overall": overall, "passed": ok, "out": out}


def _smooth_random_field(grid: Grid2D, rng, K: int = 4) -> GridField:
    x, y = grid.coords
    vals = np.zeros_like(x)
    for n in range(1, K + 1):
        for m in range(1, K + 1):
            vals += rng.standard_normal() / (n * m) * np.sin(n * np.pi * x) * np.sin(m * np.pi * y)
    return GridField(grid, vals)


def _smooth_random_data(setup: InversionSetup, rng, K: int = 3) -> np.ndarray:
    x, y = setup.grid.coords
    xm, ym = x[setup.mask.index], y[setup.mask.index]
    t = setup.tg.times[1:]
    out = np.zeros(setup.data_shape)
    for n in range(K):
        for m in range(K):
            for k in range(K):
                c = rng.standard_normal() / (1 + n + m + k)
                out += c * np.cos(k * np.pi * t)[:, None] * (np.cos(n * np.pi * xm) * np.cos(m * np.pi * ym))[None, :]
    return out


def duality_gaps(ks: KernelSplit, N: int, Nt: int, box=(0.3, 0.7, 0.3, 0.7), n_pairs: int = 3, seed: int = 0,
                 adjoint: str = "continuous") -> list[float]:
    """|<G f, w> - <f, G* w>| / (||G f|| ||w||) in the L2 inner products for smooth random pairs.

    The pairs are built from the same random coefficients at every resolution
    so that refinement studies compare like with like.
    """
    grid = build_grid(N)
    tg = TimeGrid(ks.T, Nt, ks.alpha0)
    setup = InversionSetup(ks, grid, tg, region_mask(grid, box), adjoint=adjoint, norm="l2")
    rng = np.random.default_rng(seed)
    gaps = []
    for _ in range(n_pairs):
        f = _smooth_random_field(grid, rng)
        w = _smooth_random_data(setup, rng)
        Gf = apply_G(f, setup)
        Gw = apply_Gstar(w, setup)
        lhs = data_inner(Gf, w, setup)
        rhs = grid.h**2 * float(f.values @ Gw.values)
        gaps.append(abs(lhs - rhs) / (data_norm(Gf, setup) * data_norm(w, setup)))
    return gaps


def duhamel_gap(ks: KernelSplit, N: int, Nt: int, p: float = 0.0) -> float:
    """Relative L2(Omega x (0, T)) gap between u[f beta] and theta * v for f = sin sin + sin 2 sin 2 ."""
    grid = build_grid(N)
    tg = TimeGrid(ks.T, Nt, ks.alpha0)
    f = grid.sample(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y) + np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y))
    beta = PowerBeta(p)
    u = solve_forward(ks, grid, tg, SourceSpec(f=f, beta=beta), solver="direct")
    w = duhamel_reconstruct(ks, grid, tg, f, beta, solver="direct")
    return trajectory_l2(u.values - w.values, grid, tg) / trajectory_l2(u, grid, tg)


def verify_reports(fast: bool = False) -> list[dict]:
    """Kernel bounds, oracle agreement, adjoint duality and Duhamel consistency.

    ``fast`` shrinks the grids (for smoke tests); the thresholds stay the same.
    """
    ks = KernelSplit(ExponentProfile.affine(0.5, 0.25, 1.0), 1.0)
    rows = []
    t = np.logspace(-8, 0, 2000)
    rep = verify_kernel_bounds(ks, t)
    rows.append({"check": "kernel_bounds", "value": max(rep.ratio_g, rep.ratio_gp), "threshold": 10.0,
                 "passed": rep.passed, "detail": f"C_g={rep.C_g:.6g} C_gp={rep.C_gp:.6g}"})

    from .config import ExperimentConfig as _EC

    N, Nt, M, Ntf = (32, 200, 24, 2000) if fast else (64, 400, 40, 4000)
    ocfg = _EC.model_validate(
        {
            "name": "verify",
            "exponent": {"a0": 0.5, "slope": 0.25},
            "N": N,
            "Nt": Nt,
            "source": {"kind": "modes", "modes": [[1, 1, 1.0]]},
            "noise": {"delta": 0.0},
            "algorithm": {"kind": "thresholding"},
            "oracle": {"M": M, "Nt_fine": Ntf},
        }
    )
    _, overall = oracle_report(ocfg)
    rows.append({"check": "oracle", "value": overall, "threshold": 1e-2, "passed": overall <= 1e-2,
                 "detail": f"N={N} Nt={Nt} M={M} Nt_fine={Ntf}"})

    gaps = duality_gaps(ks, 16 if fast else 32, 50 if fast else 100)
    rows.append({"check": "adjoint_duality", "value": max(gaps), "threshold": 5e-2, "passed": max(gaps) <= 5e-2,
                 "detail": " ".join(f"{g:.3e}" for g in gaps)})

    # the gap is set by the time step, so only the space grid shrinks in fast mode
    Nd = 16 if fast else 32
    dg = duhamel_gap(ks, Nd, 400)
    rows.append({"check": "duhamel", "value": dg, "threshold": 2e-2, "passed": dg <= 2e-2,
                 "detail": f"N={Nd} Nt=400"})
    return rows


def run_verify(out_root=None, plots: bool = True, fast: bool = False) -> dict:
    rows = verify_reports(fast=fast)
    root = Path(out_root or os.environ.get("VSD_OUT") or "out") / "verify"
    root.mkdir(parents=True, exist_ok=True)
    path = root / "verify_report.csv"
    with path.open("w", newline="") as fh:
        fh.write("check,value,threshold,verdict,detail\n")
        for r in rows:
            fh.write(f"{r['check']},{r['value']:.17g},{r['threshold']:.17g},{'pass' if r['passed'] else 'fail'},"
                     f"\"{r['detail']}\"\n")
    return {"rows": rows, "passed": all(r["passed"] for r in rows), "out": root}

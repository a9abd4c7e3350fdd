import math

import numpy as np
import pytest

from vsd.grid import build_grid
from vsd.kernel import ExponentProfile, KernelSplit
from vsd.oracle import ModeSet, project_modes, solve_mode_scalar, spectral_solution
from vsd.specfun import mittag_leffler
from vsd.timestep import PowerBeta


@pytest.fixture(scope="module")
def ks():
    return KernelSplit(ExponentProfile.affine(0.5, 0.25), 1.0)


@pytest.fixture(scope="module")
def ks_const():
    return KernelSplit(ExponentProfile.affine(0.5, 0.0), 1.0)


def sinsin(n, m):
    return lambda x, y: np.sin(n * np.pi * x) * np.sin(m * np.pi * y)


# ---- projection ------------------------------------------------------------


def test_project_single_mode():
    ms = project_modes(sinsin(1, 1), 8)
    assert ms.coefficient(1, 1) == pytest.approx(0.5, abs=1e-12)
    others = [abs(md.coef) for md in ms.modes if (md.n, md.m) != (1, 1)]
    assert max(others) <= 1e-10
    assert ms.modes[0].lam == pytest.approx(2 * math.pi**2)


def test_project_zero():
    ms = project_modes(lambda x, y: 0.0 * x, 5)
    assert all(md.coef == 0.0 for md in ms.modes)
    assert ms.nonzero() == []


def test_project_orthogonality():
    ms = project_modes(sinsin(2, 2), 6)
    assert [(md.n, md.m) for md in ms.nonzero(1e-10)] == [(2, 2)]


def test_project_constant_closed_form():
    # (1, 2 sin(n pi x) sin(m pi y)) = 8 / (n m pi^2) for odd n, m
    ms = project_modes(lambda x, y: np.ones_like(x), 10)
    for n, m in [(1, 1), (1, 3), (5, 7)]:
        assert ms.coefficient(n, m) == pytest.approx(8.0 / (n * m * math.pi**2), rel=1e-4)
    assert abs(ms.coefficient(2, 1)) <= 1e-12


def test_project_grid_field_matches_callable():
    g = build_grid(64)
    a = project_modes(g.sample(sinsin(1, 2)), 4)
    assert a.coefficient(1, 2) == pytest.approx(0.5, abs=1e-10)


def test_project_rejects_bad_M():
    with pytest.raises(ValueError):
        project_modes(sinsin(1, 1), 0)


def test_modeset_missing_key():
    with pytest.raises(KeyError):
        ModeSet(1, []).coefficient(1, 1)


# ---- scalar mode problem ---------------------------------------------------


def test_scalar_zero(ks):
    c = solve_mode_scalar(ks, 20.0, lambda t: 0.0 * t, 0.0, 100)
    assert np.all(c == 0.0)


def test_scalar_rejects_coarse(ks):
    with pytest.raises(ValueError):
        solve_mode_scalar(ks, 1.0, lambda t: t, 0.0, 5)


@pytest.mark.parametrize("lam", [2 * math.pi**2, 5 * math.pi**2])
def test_scalar_constant_order_relaxation(ks_const, lam):
    Nt = 10_000
    c = solve_mode_scalar(ks_const, lam, lambda t: 0.0 * t, 1.0, Nt)
    t = np.linspace(0.0, 1.0, Nt + 1)
    for i in range(100, Nt + 1, 700):
        assert abs(c[i] - mittag_leffler(0.5, 1.0, -lam * t[i] ** 0.5)) <= 1e-3


@pytest.mark.parametrize("lam", [2 * math.pi**2, 8 * math.pi**2])
def test_scalar_constant_order_forced(ks_const, lam):
    Nt = 10_000
    c = solve_mode_scalar(ks_const, lam, lambda t: np.ones_like(t), 0.0, Nt)
    t = np.linspace(0.0, 1.0, Nt + 1)
    for i in range(50, Nt + 1, 650):
        exact = (1.0 - mittag_leffler(0.5, 1.0, -lam * t[i] ** 0.5)) / lam
        assert abs(c[i] - exact) <= 1e-3


def test_scalar_self_convergence(ks):
    lam = 2 * math.pi**2
    runs = {Nt: solve_mode_scalar(ks, lam, lambda t: np.ones_like(t), 0.0, Nt) for Nt in (1000, 2000, 4000, 8000)}
    diffs = [np.max(np.abs(runs[Nt] - runs[2 * Nt][::2])) for Nt in (1000, 2000, 4000)]
    assert diffs[0] > diffs[1] > diffs[2]


def test_scalar_vectorised_matches_loop(ks):
    lams = np.array([10.0, 30.0, 90.0])
    c0 = np.array([0.0, 1.0, -0.5])
    both = solve_mode_scalar(ks, lams, lambda t: 1.0 + t, c0, 200)
    for k in range(3):
        single = solve_mode_scalar(ks, lams[k], lambda t: 1.0 + t, c0[k], 200)
        assert np.array_equal(both[:, k], single)


def test_scalar_memory_switch_constant_order(ks_const):
    a = solve_mode_scalar(ks_const, 20.0, lambda t: np.cos(t), 0.3, 500)
    b = solve_mode_scalar(ks_const, 20.0, lambda t: np.cos(t), 0.3, 500, include_memory=False)
    assert np.max(np.abs(a - b)) <= 1e-14


def test_scalar_start_correction(ks_const):
    lam, Nt = 5 * math.pi**2, 2000
    q = lambda t: np.cos(t)  # noqa: E731
    assert np.array_equal(
        solve_mode_scalar(ks_const, lam, q, 0.0, Nt), solve_mode_scalar(ks_const, lam, q, 0.0, Nt, correct_start=False)
    )
    t = np.linspace(0.0, 1.0, Nt + 1)
    ref = np.array([mittag_leffler(0.5, 1.0, -lam * s**0.5) for s in t[10::40]])
    on = solve_mode_scalar(ks_const, lam, lambda s: 0 * s, 1.0, Nt)[10::40]
    off = solve_mode_scalar(ks_const, lam, lambda s: 0 * s, 1.0, Nt, correct_start=False)[10::40]
    assert np.max(np.abs(on - ref)) < 0.2 * np.max(np.abs(off - ref))


def test_mode_decay_in_eigenvalue(ks):
    lams = np.pi**2 * np.array([2.0, 5.0, 8.0, 13.0, 25.0, 50.0])
    C = solve_mode_scalar(ks, lams, lambda t: np.ones_like(t), np.zeros(lams.size), 2000)
    for i in (200, 1000, 2000):
        assert np.all(np.diff(np.abs(C[i])) <= 0.0)


# ---- spectral solution -----------------------------------------------------


def test_spectral_single_mode_value(ks):
    ms = project_modes(sinsin(1, 1), 4)
    sol = spectral_solution(ks, ms, PowerBeta(), Nt_fine=1000)
    c = solve_mode_scalar(ks, 2 * math.pi**2, lambda t: np.ones_like(t), 0.0, 1000)
    assert sol(0.5, 0.5, 1.0) == pytest.approx(2 * 0.5 * c[-1], rel=1e-10)


def test_spectral_linearity(ks):
    a = spectral_solution(ks, project_modes(sinsin(1, 1), 4), PowerBeta(), Nt_fine=800)
    b = spectral_solution(ks, project_modes(sinsin(2, 2), 4), PowerBeta(), Nt_fine=800)
    ab = spectral_solution(
        ks, project_modes(lambda x, y: sinsin(1, 1)(x, y) + sinsin(2, 2)(x, y), 4), PowerBeta(), Nt_fine=800
    )
    for pt in [(0.3, 0.6, 0.5), (0.5, 0.5, 1.0), (0.1, 0.9, 0.25)]:
        assert abs(ab(*pt) - a(*pt) - b(*pt)) <= 1e-12


def test_spectral_zero_source(ks):
    sol = spectral_solution(ks, project_modes(lambda x, y: 0 * x, 3), PowerBeta(), Nt_fine=100)
    assert sol(0.5, 0.5, 1.0) == 0.0


def test_spectral_truncation(ks):
    f = lambda x, y: 1.0 + np.sin(np.pi * x) * np.sin(np.pi * y)  # noqa: E731
    s = np.linspace(0.0, 1.0, 201)
    X, Y = np.meshgrid(s, s, indexing="ij")
    vals = []
    for M in (25, 50):
        sol = spectral_solution(ks, project_modes(f, M), PowerBeta(), Nt_fine=1000)
        vals.append(sol(X, Y, 1.0))
    d = vals[0] - vals[1]
    l2 = math.sqrt(np.trapezoid(np.trapezoid(d * d, s), s))
    assert l2 <= 1e-4

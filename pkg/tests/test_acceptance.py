"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the terminal
summary) before asserting.  Solver runs shared between criteria live in
module-scoped fixtures.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import trapezoid

from conftest import ACCEPTANCE_LINES
from kslab import blowup as B
from kslab import functionals as fn
from kslab import inequalities as iq
from kslab.cli import hypercontractivity_sup
from kslab.functionals import ModelParams, Variant
from kslab.grid import Grid2D
from kslab.kernels import bessel_B, g_alpha, log_H, weight_H
from kslab.solver import InitPreset, PresetKind, StepControl, Termination, default_dt_min, run

PI = math.pi
PE = Variant.PARABOLIC_ELLIPTIC
SOLVER_RUNS: dict[str, object] = {}


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _register(label: str, traj):
    SOLVER_RUNS[label] = traj
    return traj


# -- shared solver runs ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def virial_run():
    g = Grid2D(16.0, 256)
    params = ModelParams(0.0, 0.0, 4 * PI, variant=PE)
    ctrl = StepControl(1e-3, min(default_dt_min(g), 1e-3), 1e-3, 0.9, 0.1, 1)
    return params, _register("virial", run(params, InitPreset(PresetKind.GAUSSIAN, 4 * PI, sigma=1.0), g, ctrl))


SWEEP_MASSES = (4 * PI, 6 * PI, 10 * PI, 12 * PI)


@pytest.fixture(scope="module")
def sweep():
    # N = 512: the discrete virial rate of the sigma = 0.25 data is 9% low at N = 256
    g = Grid2D(16.0, 512)
    ctrl = StepControl(1e-3, default_dt_min(g), 1e-3, 0.9, 0.1, 5)
    out = []
    for M in SWEEP_MASSES:
        params = ModelParams(0.0, 0.0, M, variant=PE)
        traj = _register(f"sweep M={M / PI:g}pi", run(params, InitPreset(PresetKind.GAUSSIAN, M, sigma=0.25), g, ctrl))
        out.append((params, traj, B.classify(traj, params, grid=g)))
    return out


ENERGY_DTS = (2e-3, 1e-3, 5e-4)


@pytest.fixture(scope="module")
def energy_runs():
    g = Grid2D(16.0, 256)
    params = ModelParams(1.0, 1.0, 4 * PI)
    out = []
    for dt in ENERGY_DTS:
        ctrl = StepControl(dt, 1e-9, dt, 0.9, 1.0, 1)
        out.append(_register(f"energy dt={dt:g}", run(params, InitPreset(PresetKind.GAUSSIAN, 4 * PI, sigma=1.0), g, ctrl)))
    return params, out


@pytest.fixture(scope="module")
def hyper_runs():
    params = ModelParams(1.0, 1.0, 4 * PI)
    preset = InitPreset(PresetKind.SPIKY_L1, 4 * PI, width=0.02)
    out = []
    for N in (256, 512):
        g = Grid2D(16.0, N)
        dt = 0.9 * g.h**2 / 4
        ctrl = StepControl(dt, 1e-12, dt, 0.9, 0.5, 1)
        # c0 = 0: the elliptic chemical of unresolved data is not H^1-bounded in N
        out.append((dt, _register(f"hyper N={N}", run(params, preset, g, ctrl, c0=g.zeros()))))
    return params, out


@pytest.fixture(scope="module")
def suite():
    return iq.inequality_suite(Grid2D(16.0, 256), seed=0)


# -- criteria -----------------------------------------------------------------------------------


def test_01_virial_slope(virial_run):
    params, traj = virial_run
    slope, _, _ = B.fit_virial(traj.column("t"), traj.column("moment_2"))
    rel = abs(slope - 8 * PI) / (8 * PI)
    ok = traj.cause is Termination.TIME_REACHED and rel <= 0.02
    verdict(1, "virial slope at M = 4pi", ok, f"slope {slope:.6g} vs 8pi, rel err {rel:.2e} <= 2e-2")


def test_02_critical_mass_dichotomy(sweep):
    got = [v.classification.value for _, _, v in sweep]
    expected = ["GlobalLike", "GlobalLike", "BlowupLike", "BlowupLike"]
    slope_err = [
        abs(v.virial_slope_fit - B.critical_slope(p.M)) / abs(B.critical_slope(p.M)) for p, _, v in sweep if p.M > 8 * PI
    ]
    ok = got == expected and max(slope_err) <= 0.10
    verdict(2, "mass sweep dichotomy", ok, f"{got}, super-critical slope errs {[f'{e:.3f}' for e in slope_err]} <= 0.10")


def test_03_blowup_bound(sweep):
    params, traj, v = sweep[-1]
    I0 = float(traj.column("moment_2")[0])
    bound = 2 * PI * I0 / (params.M * (params.M - 8 * PI))
    ok = traj.cause is Termination.DT_UNDERFLOW and v.t_detect is not None and v.t_detect <= bound
    verdict(3, "blow-up time bound at M = 12pi", ok, f"t_detect {v.t_detect} <= {bound:.6g} (I0 = {I0:.6g})")


def test_04_energy_balance(energy_runs):
    params, runs = energy_runs
    residuals, spectral, increments = [], [], []
    for traj in runs:
        t, E = traj.column("t"), traj.column("free_energy")
        rate = traj.column("scheme_dissipation") + params.epsilon * traj.column("dt_c_sq")
        residuals.append(abs(E[-1] - E[0] + trapezoid(rate, t)))
        spectral.append(E[-1] - E[0] + trapezoid(traj.column("entropy_production") + params.epsilon * traj.column("dt_c_sq"), t))
        increments.append(float(np.max(np.diff(E))))
    ratios = [residuals[i] / residuals[i + 1] for i in range(len(residuals) - 1)]
    monotone = max(increments) <= 0.0
    ok = monotone and all(1.8 <= r <= 2.2 for r in ratios)
    print(f"  spectral-form entropy production residuals (reference): {[f'{s:.3e}' for s in spectral]}")
    verdict(
        4,
        "free-energy monotonicity and balance",
        ok,
        f"residuals {[f'{r:.3e}' for r in residuals]}, halving ratios {[f'{r:.3f}' for r in ratios]}, max dE {max(increments):.3e}",
    )


def test_05_mass_and_positivity(virial_run, sweep, energy_runs, hyper_runs):
    worst_mass = max(t.max_step_mass_error for t in SOLVER_RUNS.values())
    min_n = min(t.min_density for t in SOLVER_RUNS.values())
    ok = len(SOLVER_RUNS) == 10 and worst_mass <= 1e-10 and min_n >= 0.0
    verdict(5, "mass conservation and positivity", ok, f"{len(SOLVER_RUNS)} runs, worst step drift {worst_mass:.2e}, min n {min_n:.3e}")


def test_06_kernel_oracles():
    mpmath.mp.dps = 30
    r = np.geomspace(0.01, 10.0, 60)
    worst_B = worst_g = 0.0
    for alpha in (0.1, 1.0, 10.0):
        s = math.sqrt(alpha)
        K0 = np.array([float(mpmath.besselk(0, s * x)) for x in r])
        K1 = np.array([float(mpmath.besselk(1, s * x)) for x in r])
        B_ref = K0 / (2 * PI)
        g_ref = s * r * K1
        worst_B = max(worst_B, float(np.max(np.abs(bessel_B(alpha, r) - B_ref) / B_ref)))
        worst_g = max(worst_g, float(np.max(np.abs(g_alpha(alpha, r) - g_ref) / g_ref)))
    ok = worst_B <= 1e-8 and worst_g <= 1e-8
    verdict(6, "kernel oracles", ok, f"max rel err B {worst_B:.2e}, g {worst_g:.2e} <= 1e-8")


def test_07_cancellation_order():
    errs = []
    for N in (64, 128, 256):
        g = Grid2D(8.0, N)
        mask = g.interior_mask(0.5)
        errs.append(float(np.abs(-g.laplacian_fd(log_H(g.x, g.y)) - 8 * PI * weight_H(g.x, g.y))[mask].max()))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = bool(np.all(orders >= 1.9))
    verdict(7, "cancellation identity order", ok, f"errors {[f'{e:.2e}' for e in errs]}, orders {[f'{o:.3f}' for o in orders]} >= 1.9")


def test_08_onofri(suite):
    on = suite["onofri"]
    eq = on["equality_log_residuals"]
    ok = (
        len(eq) == 3
        and max(abs(v) for v in eq.values()) <= 1e-6
        and on["random_count"] == 100
        and on["random_satisfied"] == 100
        and on["random_min_residual"] >= -1e-8
    )
    eq_text = ", ".join(f"{k}: {v:.2e}" for k, v in eq.items())
    verdict(8, "Onofri suite", ok, f"{eq_text}; {on['random_satisfied']}/{on['random_count']} random, min residual {on['random_min_residual']:.3g}")


def test_09_log_hls(suite):
    hls = suite["log_hls"]
    rows = hls["masses"]
    # zero at MH itself by construction; translated copies exercise the tail closure
    worst_res = max(max(abs(m["extremal_residual"]), abs(m["translated_residual"])) for m in rows)
    worst_rel = max(m["relative_error"] for m in rows)
    ok = (
        [m["M"] for m in rows] == [1.0, PI, 4 * PI]
        and worst_res <= 1e-5
        and worst_rel <= 1e-5
        and hls["family_count"] == 50
        and hls["family_satisfied"] == 50
    )
    verdict(
        9,
        "log-HLS suite",
        ok,
        f"max |residual at (translated) MH| {worst_res:.2e}, max C(M) rel err {worst_rel:.2e}, {hls['family_satisfied']}/{hls['family_count']} densities",
    )


def test_10_minimization_identities(suite):
    ids = suite["identities"]
    ok = ids["count"] == 20 and ids["entropy_max_residual"] <= 1e-10 and ids["chemical_max_residual"] <= 1e-8
    verdict(10, "minimization identities", ok, f"entropy {ids['entropy_max_residual']:.2e} <= 1e-10, chemical {ids['chemical_max_residual']:.2e} <= 1e-8")


def test_11_hypercontractivity(hyper_runs):
    _, runs = hyper_runs
    sups = {p: [hypercontractivity_sup(traj, p, 5 * dt) for dt, traj in runs] for p in (2, 3)}
    reached = all(traj.cause is Termination.TIME_REACHED for _, traj in runs)
    changes = {p: abs(s[1] / s[0] - 1.0) for p, s in sups.items()}
    ok = reached and all(np.isfinite(s).all() for s in map(np.array, sups.values())) and max(changes.values()) <= 0.20
    text = ", ".join(f"p={p}: {s[0]:.4g} -> {s[1]:.4g} ({changes[p]:+.1%})" for p, s in sups.items())
    verdict(11, "hypercontractivity under N-doubling", ok, text)


def test_12_log_moment_bound(virial_run, sweep, energy_runs):
    global_runs = []
    for params, traj in [virial_run, *[(p, t) for p, t, _ in sweep], *[(energy_runs[0], t) for t in energy_runs[1]]]:
        if B.classify(traj, params).classification is B.Classification.GLOBAL_LIKE:
            excess = fn.moment_log_excess(traj.column("t"), traj.column("moment_log"), traj.column("entropy_production"), params.M)
            global_runs.append(excess)
    ok = len(global_runs) >= 2 and max(global_runs) <= 0.05
    verdict(12, "log-moment bound on GlobalLike runs", ok, f"{len(global_runs)} runs, max relative excess {max(global_runs):.3e} <= 0.05")

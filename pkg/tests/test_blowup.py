from __future__ import annotations

import math

import numpy as np
import pytest

from kslab import blowup as B
from kslab import functionals as fn
from kslab.blowup import Classification
from kslab.functionals import CSV_COLUMNS, DiagnosticsRecord, ModelParams, Variant
from kslab.grid import Grid2D
from kslab.kernels import g_alpha
from kslab.solver import SimState, Termination, Trajectory

PE = Variant.PARABOLIC_ELLIPTIC


def test_blowup_bound_closed_form():
    ok, T = B.blowup_bound(16 * math.pi, 0.0, 1.0, 1.0)
    assert ok and T == pytest.approx(1.0 / (64 * math.pi), rel=1e-15)
    assert T == pytest.approx(B.virial_zero_time(16 * math.pi, 1.0))


def test_blowup_bound_threshold():
    M = 12 * math.pi
    limit = (M - 8 * math.pi) ** 2 / (4 * M)
    ok, T = B.blowup_bound(M, 1.0, 0.99 * limit, 1.0)
    assert ok and T > B.virial_zero_time(M, 0.99 * limit)
    assert B.blowup_bound(M, 1.0, 1.01 * limit, 1.0) == (False, None)


@pytest.mark.parametrize("args", [(8 * math.pi, 0.0, 1.0, 1.0), (9 * math.pi, 0.0, 0.0, 1.0), (9 * math.pi, -1.0, 1.0, 1.0), (9 * math.pi, 0.0, 1.0, 0.5)])
def test_blowup_bound_rejects(args):
    with pytest.raises(ValueError):
        B.blowup_bound(*args)


@pytest.mark.parametrize("M, slope", [(4 * math.pi, 8 * math.pi), (8 * math.pi, 0.0), (12 * math.pi, -24 * math.pi)])
def test_critical_slope(M, slope):
    assert B.critical_slope(M) == pytest.approx(slope, abs=1e-12)


def test_screening_pairing_matches_direct_sum():
    g = Grid2D(4.0, 24)
    n = fn.gaussian(g, 2.0, 0.7, center=(0.3, -0.2))
    x, y, w = g.x.ravel(), g.y.ravel(), n.ravel() * g.h**2
    d = np.hypot(x[:, None] - x[None, :], y[:, None] - y[None, :])
    direct = w @ (1.0 - g_alpha(1.5, d)) @ w
    assert B.screening_pairing(g, n, 1.5) == pytest.approx(direct, rel=1e-12)


def test_virial_rhs_between_critical_and_upper_bound(grid128):
    n = fn.gaussian(grid128, 4 * math.pi, 0.5)
    M, I = 4 * math.pi, fn.moments(grid128, n)[2]
    assert B.virial_rhs(grid128, n, 0.0) == pytest.approx(B.critical_slope(M))
    rhs = B.virial_rhs(grid128, n, 2.0)
    assert B.critical_slope(M) < rhs <= B.virial_upper_bound(M, 2.0, I, 1.0)
    with pytest.raises(ValueError):
        B.virial_rhs(grid128, n, -1.0)


def test_fit_virial_recovers_line():
    t = np.linspace(0, 0.1, 21)
    slope, icept, res = B.fit_virial(t, 3.0 - 7.0 * t)
    assert (slope, icept) == pytest.approx((-7.0, 3.0))
    assert res < 1e-12
    assert B.fit_virial(t[:1], np.array([1.0]))[2] == math.inf


def test_integral_form_on_exact_virial_line():
    M = 4 * math.pi
    t = np.linspace(0, 1, 11)
    I = 2.0 + B.critical_slope(M) * t
    assert abs(B.integral_form_violation(t, I, M, 0.0, 1.0)) < 1e-12
    assert B.integral_form_violation(t, I + t, M, 0.0, 1.0) > 0


def test_tail_fraction(grid128):
    n = fn.gaussian(grid128, 1.0, 1.0)
    assert B.tail_fraction(grid128, n) < 1e-20
    assert 0.0 < B.tail_fraction(grid128, n, 0.1) < 1.0


def _traj(t, moment_2, max_n, lp2, cause):
    recs = []
    for vals in zip(t, moment_2, max_n, lp2):
        d = dict.fromkeys(CSV_COLUMNS, 1.0)
        d.update(zip(("t", "moment_2", "max_n", "lp2"), vals))
        recs.append(DiagnosticsRecord(**d))
    return Trajectory(recs, cause, SimState(np.ones((2, 2)), np.zeros((2, 2))))


def test_classify_blowup_like():
    M = 12 * math.pi
    t = np.linspace(0, 0.04, 20)
    I = 3.0 + B.critical_slope(M) * t
    tr = _traj(t, I, np.geomspace(1, 1e4, 20), np.geomspace(1, 1e2, 20), Termination.DT_UNDERFLOW)
    v = B.classify(tr, ModelParams(0.0, 0.0, M, variant=PE))
    assert v.classification is Classification.BLOWUP_LIKE
    assert v.t_detect == pytest.approx(0.04)
    assert v.threshold_ok and v.bound_Tstar == pytest.approx(B.virial_zero_time(M, 3.0))
    assert v.to_dict()["classification"] == "BlowupLike"


def test_classify_wrong_slope_is_inconclusive():
    M = 12 * math.pi
    t = np.linspace(0, 0.04, 20)
    tr = _traj(t, 3.0 - 10.0 * t, np.geomspace(1, 1e4, 20), np.ones(20), Termination.DT_UNDERFLOW)
    assert B.classify(tr, ModelParams(0.0, 0.0, M, variant=PE)).classification is Classification.INCONCLUSIVE


def test_classify_global_like_and_stalled():
    M = 4 * math.pi
    t = np.linspace(0, 0.1, 20)
    params = ModelParams(0.0, 0.0, M, variant=PE)
    ok = _traj(t, 2.0 + B.critical_slope(M) * t, np.ones(20), np.ones(20), Termination.TIME_REACHED)
    assert B.classify(ok, params).classification is Classification.GLOBAL_LIKE
    grown = _traj(t, 2.0 + B.critical_slope(M) * t, np.ones(20), np.linspace(1, 50, 20), Termination.TIME_REACHED)
    assert B.classify(grown, params).classification is Classification.INCONCLUSIVE
    flat = _traj(t, np.full(20, 2.0) + 1e-4 * t, np.ones(20), np.ones(20), Termination.TIME_REACHED)
    assert B.classify(flat, params).classification is Classification.INCONCLUSIVE


def test_verdict_invariant():
    with pytest.raises(ValueError):
        B.BlowupVerdict(Classification.BLOWUP_LIKE, None, None, 0.0, False)
    empty = Trajectory([], Termination.TIME_REACHED, SimState(np.ones((2, 2)), np.zeros((2, 2))))
    with pytest.raises(ValueError):
        B.classify(empty, ModelParams(1.0, 0.0, 1.0))

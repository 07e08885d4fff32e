from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from kslab import functionals as fn
from kslab.functionals import CSV_COLUMNS, DiagnosticsRecord, ModelParams, Variant
from kslab.grid import Grid2D
from kslab.kernels import log_H

M = 4 * math.pi
SIGMA = 1.2


@pytest.fixture(scope="module")
def blob(grid256):
    return fn.gaussian(grid256, M, SIGMA)


def test_gaussian_mass_and_moments(grid256, blob):
    m_log, m1, m2 = fn.moments(grid256, blob)
    assert grid256.integrate(blob) == pytest.approx(M, rel=1e-13)
    # |x| has a cone point at the origin, which limits the midpoint rule
    assert m1 == pytest.approx(M * SIGMA * math.sqrt(math.pi / 2), rel=1e-4)
    assert m2 == pytest.approx(2 * M * SIGMA**2, rel=1e-12)
    radial, _ = integrate.quad(
        lambda r: M * math.exp(-r * r / (2 * SIGMA**2)) / (2 * math.pi * SIGMA**2) * math.log1p(r * r) * 2 * math.pi * r,
        0,
        math.inf,
        epsabs=1e-13,
    )
    assert m_log == pytest.approx(radial, rel=1e-12)


def test_gaussian_entropy(grid256, blob):
    expected = M * math.log(M) - M * (math.log(2 * math.pi * SIGMA**2) + 1)
    assert fn.phys_entropy(grid256, blob) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("p", [2, 3, 4])
def test_lp_norms(grid256, blob, p):
    expected = (M**p * (2 * math.pi * SIGMA**2) ** (1 - p) / p) ** (1 / p)
    assert fn.lp_norm(grid256, blob, p) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("k", [0.1, 0.5, 1.0])
def test_equi_integrability(grid256, blob, k):
    A = M / (2 * math.pi * SIGMA**2)
    expected = M * (1 - k / A) - 2 * math.pi * SIGMA**2 * k * math.log(A / k)
    # the integrand has a kink on the level set, so the midpoint rule is second order
    assert fn.equi_integrability(grid256, blob, k) == pytest.approx(expected, rel=2e-3)


def test_equi_integrability_above_peak_is_zero(grid256, blob):
    assert fn.equi_integrability(grid256, blob, 10.0) == 0.0
    with pytest.raises(ValueError):
        fn.equi_integrability(grid256, blob, 0.0)


def test_entropy_production_of_pure_diffusion(grid256, blob):
    # int n |grad log n|^2 = int n |x|^2 / sigma^4 = 2M / sigma^2
    assert fn.entropy_production(grid256, blob) == pytest.approx(2 * M / SIGMA**2, rel=1e-10)


def test_entropy_production_vanishes_at_equilibrium(grid256):
    g = grid256
    c = -0.5 * g.r2 / 4.0
    n = np.exp(c)
    assert fn.entropy_production(g, n, grad_c=(-g.x / 4.0, -g.y / 4.0)) < 1e-10


def test_chemical_quadratic_on_trig_mode(grid64):
    g = grid64
    k = math.pi / g.L
    c = np.cos(k * g.x)
    area_half = 2 * g.L**2
    for alpha in (0.0, 2.0):
        assert fn.chemical_quadratic(g, c, alpha) == pytest.approx(0.5 * k * k * area_half + 0.5 * alpha * area_half, rel=1e-12)


def test_energy_decompositions(grid128):
    g = grid128
    n = fn.gaussian(g, 3.0, 1.0)
    c = np.exp(-g.r2 / 3)
    E = fn.free_energy(g, n, c, 0.5)
    assert E == pytest.approx(fn.entropy(g, n, c) + fn.chemical_quadratic(g, c, 0.5))
    assert fn.chemical_energy(g, c, n, 0.5) == pytest.approx(fn.chemical_quadratic(g, c, 0.5) - fn.coupling(g, n, c))
    assert fn.modified_free_energy(g, n, c, 0.5) == pytest.approx(E - g.integrate(n * log_H(g.x, g.y)))
    corrected = fn.corrected_free_energy(g, n, np.zeros(g.shape))
    assert corrected == pytest.approx(fn.phys_entropy(g, n) - 3.0 / (8 * math.pi) * g.integrate(n * log_H(g.x, g.y)))


def test_zero_log_zero_convention(grid64):
    n = fn.gaussian(grid64, 1.0, 1.0)
    n[:10] = 0.0
    assert math.isfinite(fn.phys_entropy(grid64, n))
    assert math.isfinite(fn.entropy_production(grid64, n))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 40.0), st.floats(0.3, 3.0))
def test_mass_control_bound_holds(mass, sigma):
    g = Grid2D(16.0, 128)
    lhs, rhs = fn.mass_control(g, fn.gaussian(g, mass, sigma))
    assert lhs <= rhs + 1e-12


@pytest.mark.parametrize(
    "text, variant",
    [("pp", Variant.PARABOLIC_PARABOLIC), ("PE", Variant.PARABOLIC_ELLIPTIC), ("corrected", Variant.CORRECTED_PP), ("CorrectedPP", Variant.CORRECTED_PP)],
)
def test_variant_parse(text, variant):
    assert Variant.parse(text) is variant


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(epsilon=-1, alpha=0, M=1),
        dict(epsilon=1, alpha=-1, M=1),
        dict(epsilon=1, alpha=0, M=0),
        dict(epsilon=1, alpha=0, M=1, variant=Variant.PARABOLIC_ELLIPTIC),
        dict(epsilon=0, alpha=0, M=1),
        dict(epsilon=1, alpha=1, M=1, variant=Variant.CORRECTED_PP),
        dict(epsilon=1, alpha=0, M=9 * math.pi, variant=Variant.CORRECTED_PP),
        dict(epsilon=1, alpha=0, M=1, sigma_mollify=-0.1),
    ],
)
def test_model_params_validation(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_record_row_follows_csv_order():
    values = {k: float(i) for i, k in enumerate(CSV_COLUMNS)}
    rec = DiagnosticsRecord(**values)
    assert rec.row() == tuple(float(i) for i in range(len(CSV_COLUMNS)))
    assert "extra" not in rec.to_dict()


def test_moment_log_excess():
    t = np.linspace(0, 1, 11)
    flat = np.full_like(t, 2.0)
    assert fn.moment_log_excess(t, flat, np.zeros_like(t), 1.0) <= 0
    fast = 2.0 + 3.0 * t  # grows faster than M/2 with no entropy production
    assert fn.moment_log_excess(t, fast, np.zeros_like(t), 1.0) > 0
    with pytest.raises(ValueError):
        fn.moment_log_excess(t, flat, flat, 1.0, delta=0)

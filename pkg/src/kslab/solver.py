"""Time stepping for the dimensionless Keller-Segel system.

    n_t = Lap n - div(n grad phi),     eps c_t = Lap c + n - alpha c

with phi = c, or phi = u + (M/8pi) log H for the corrected variant where
u = c - (M/8pi) log H solves eps u_t = Lap u + n - M H.

The cell density is advanced by an explicit Scharfetter-Gummel finite-volume
step on the grid nodes with zero flux through the box boundary.  Each edge
flux is

    J = (B(-d) n_i - B(d) n_{i+1}) / h,     B(z) = z / (e^z - 1),

with d the potential jump across the edge.  The step is written as
n_i (1 - dt S_i / h^2) + dt (inflow) / h^2, so nonnegativity holds exactly
whenever dt S_i <= h^2, and mass moves only between cells.  The chemical is
advanced implicitly in Fourier space (parabolic variants) or obtained from
the elliptic solve (parabolic-elliptic variant).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage, special

from . import functionals as fn
from .functionals import DiagnosticsRecord, ModelParams, Variant
from .grid import Grid2D
from .kernels import (
    KernelSpec,
    convolve_free_space,
    gradient_free_space,
    grad_log_H,
    log_H,
    solve_screened_poisson,
    weight_H,
)

_THETA_REL = 1e-14


class Termination(enum.Enum):
    TIME_REACHED = "TimeReached"
    DT_UNDERFLOW = "DtUnderflow"
    NAN_ABORT = "NanAbort"


class DtUnderflow(RuntimeError):
    """The advective step bound fell below dt_min."""

    def __init__(self, dt_adv: float, dt_min: float) -> None:
        super().__init__(f"advective dt {dt_adv:.3e} below dt_min {dt_min:.3e}")
        self.dt_adv = dt_adv


class NanAbort(FloatingPointError):
    """Non-finite values appeared in the state."""

    def __init__(self, message: str, dump: dict) -> None:
        super().__init__(message)
        self.dump = dump


# -- configuration --------------------------------------------------------------


class PresetKind(enum.Enum):
    GAUSSIAN = "Gaussian"
    TWO_BUMPS = "TwoBumps"
    H_FAMILY = "HFamily"
    SPIKY_L1 = "SpikyL1"


@dataclass(frozen=True)
class InitPreset:
    """Initial density family.

    Gaussian: mass M, width ``sigma`` at ``center``.  TwoBumps: two Gaussians of
    mass M/2 and width ``sigma`` at +-separation/2 on the x axis.  HFamily:
    M lam^2 H(lam x), left unnormalized.  SpikyL1: cell averages of a Gaussian of
    width ``width``; meant to be unresolved, so the resolution check is skipped.
    """

    kind: PresetKind
    M: float
    sigma: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    separation: float = 4.0
    lam: float = 1.0
    width: float = 0.02

    def __post_init__(self) -> None:
        if not self.M > 0:
            raise ValueError("preset mass must be positive")
        if self.sigma <= 0 or self.lam <= 0 or self.width <= 0:
            raise ValueError("preset scales must be positive")


@dataclass(frozen=True)
class StepControl:
    dt_init: float
    dt_min: float
    dt_max: float
    cfl_safety: float = 0.9
    t_end: float = 1.0
    record_every: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.t_end > 0 or self.record_every < 1:
            raise ValueError("t_end must be positive and record_every >= 1")


def default_dt_min(grid: Grid2D, cfl_safety: float = 0.9, peclet: float = 4.0) -> float:
    """dt_min at which the advective bound cfl h / max|grad phi| signals collapse.

    Underflow then means a potential jump of ``peclet`` across one cell, which
    only happens once the density has collapsed onto a few cells.
    """
    return cfl_safety * grid.h**2 / peclet


@dataclass(frozen=True, eq=False)
class SimState:
    """Solver state; for CorrectedPP ``c`` holds the deviation u."""

    n: np.ndarray
    c: np.ndarray
    t: float = 0.0
    step: int = 0
    dt_c: np.ndarray | None = None
    dt_used: float = 0.0
    dt_adv: float = math.inf


@dataclass(frozen=True)
class Adimensionalization:
    time_scale: float
    n_scale: float
    c_scale: float
    epsilon: float
    alpha: float


def adimensionalize(kappa: float, chi: float, eta: float, beta: float, epsilon: float, alpha: float) -> Adimensionalization:
    """Scalings taking kappa, chi, eta, beta to one.

    tau = kappa t, n~ = beta chi / (eta kappa) n, c~ = chi / kappa c,
    eps~ = eps kappa / eta, alpha~ = alpha / eta.
    """
    if min(kappa, chi, eta, beta) <= 0:
        raise ValueError("kappa, chi, eta, beta must be positive")
    return Adimensionalization(
        time_scale=kappa,
        n_scale=beta * chi / (eta * kappa),
        c_scale=chi / kappa,
        epsilon=epsilon * kappa / eta,
        alpha=alpha / eta,
    )


# -- initial data ----------------------------------------------------------------


def _cell_average_gaussian(grid: Grid2D, width: float, center: tuple[float, float]) -> np.ndarray:
    # exact integrals of a unit-mass Gaussian over each cell [x - h/2, x + h/2]^2
    h = grid.h
    s = width * math.sqrt(2.0)
    out = []
    for c in center:
        a = grid.axis - c
        out.append(0.5 * (special.erf((a + 0.5 * h) / s) - special.erf((a - 0.5 * h) / s)))
    return np.outer(out[0], out[1]) / h**2


def _require_resolved(grid: Grid2D, scale: float, what: str) -> None:
    # at least 8 cells across the 4-sigma core of each feature
    if 4.0 * scale < 8.0 * grid.h:
        raise ValueError(f"grid too coarse: h = {grid.h} does not resolve {what} = {scale}")


def mollifier(grid: Grid2D, sigma: float) -> np.ndarray:
    """Unit-sum stencil of the bump exp(-1 / (1 - |x|^2 / sigma^2)) on |x| < sigma."""
    m = int(math.ceil(sigma / grid.h))
    d = grid.h * np.arange(-m, m + 1)
    q = (d[:, None] ** 2 + d[None, :] ** 2) / sigma**2
    inside = q < 1.0
    w = np.zeros(q.shape)
    w[inside] = np.exp(-1.0 / (1.0 - q[inside]))
    if w.sum() == 0:
        w[m, m] = 1.0
    return w / w.sum()


def initial_density(grid: Grid2D, preset: InitPreset) -> np.ndarray:
    kind = preset.kind
    if kind is PresetKind.GAUSSIAN:
        _require_resolved(grid, preset.sigma, "sigma")
        n = fn.gaussian(grid, 1.0, preset.sigma, preset.center)
    elif kind is PresetKind.TWO_BUMPS:
        _require_resolved(grid, preset.sigma, "sigma")
        a = 0.5 * preset.separation
        cx, cy = preset.center
        n = fn.gaussian(grid, 0.5, preset.sigma, (cx - a, cy)) + fn.gaussian(grid, 0.5, preset.sigma, (cx + a, cy))
    elif kind is PresetKind.H_FAMILY:
        _require_resolved(grid, 1.0 / preset.lam, "1/lambda")
        lam = preset.lam
        return preset.M * lam**2 * weight_H(lam * (grid.x - preset.center[0]), lam * (grid.y - preset.center[1]))
    else:
        n = _cell_average_gaussian(grid, preset.width, preset.center)
    return n * (preset.M / grid.integrate(n))


def _elliptic(grid: Grid2D, n: np.ndarray, alpha: float, free_space: bool) -> np.ndarray:
    if alpha > 0:
        return solve_screened_poisson(grid, n, alpha)
    if free_space:
        return convolve_free_space(grid, n, KernelSpec.log())
    return solve_screened_poisson(grid, n, 0.0)


def init_state(
    params: ModelParams,
    preset: InitPreset,
    grid: Grid2D,
    c0: np.ndarray | None = None,
) -> SimState:
    """Build (n0, c0); c0 defaults to the elliptic response to n0.

    For alpha = 0 the parabolic-parabolic chemical lives on the torus with the
    mean of the source removed, so its default c0 is the mean-zero periodic
    solution.  For CorrectedPP the state stores u0 = c0 - (M/8pi) log H.
    """
    n = initial_density(grid, preset)
    if params.sigma_mollify > 0:
        n = ndimage.convolve(n, mollifier(grid, params.sigma_mollify), mode="constant", cval=0.0)
    variant = params.variant
    if variant is Variant.CORRECTED_PP:
        if c0 is None:
            c0 = convolve_free_space(grid, n, KernelSpec.log())
        M = grid.integrate(n)
        c = c0 - M / (8.0 * math.pi) * log_H(grid.x, grid.y)
    elif c0 is not None:
        c = np.array(c0, dtype=float)
    else:
        c = _elliptic(grid, n, params.alpha, free_space=variant is Variant.PARABOLIC_ELLIPTIC)
    if c.shape != grid.shape:
        raise ValueError("c0 does not match the grid")
    return SimState(n=n, c=c)


# -- one step ----------------------------------------------------------------------


def _bernoulli(z: np.ndarray) -> np.ndarray:
    """B(z) = z / (e^z - 1), B(0) = 1."""
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = z[nz] / np.expm1(z[nz])
    return out


def _potential(grid: Grid2D, state: SimState, params: ModelParams, M: float) -> np.ndarray:
    if params.variant is Variant.CORRECTED_PP:
        return state.c + M / (8.0 * math.pi) * log_H(grid.x, grid.y)
    return state.c


@dataclass(frozen=True)
class _Fluxes:
    out_rate: np.ndarray  # S_i: total outflow coefficient of each cell
    bx_in: np.ndarray  # B(d) on x edges, weight of n_{i+1} flowing to i
    bx_out: np.ndarray  # B(-d) on x edges, weight of n_i flowing to i+1
    by_in: np.ndarray
    by_out: np.ndarray
    max_jump: float


def _fluxes(phi: np.ndarray) -> _Fluxes:
    dx = np.diff(phi, axis=0)
    dy = np.diff(phi, axis=1)
    bx_in, bx_out = _bernoulli(dx), _bernoulli(-dx)
    by_in, by_out = _bernoulli(dy), _bernoulli(-dy)
    s = np.zeros(phi.shape)
    s[:-1, :] += bx_out
    s[1:, :] += bx_in
    s[:, :-1] += by_out
    s[:, 1:] += by_in
    jump = max(np.abs(dx).max(), np.abs(dy).max())
    return _Fluxes(s, bx_in, bx_out, by_in, by_out, float(jump))


def _advance_density(n: np.ndarray, fl: _Fluxes, a: float) -> np.ndarray:
    inflow = np.zeros(n.shape)
    inflow[:-1, :] += fl.bx_in * n[1:, :]
    inflow[1:, :] += fl.bx_out * n[:-1, :]
    inflow[:, :-1] += fl.by_in * n[:, 1:]
    inflow[:, 1:] += fl.by_out * n[:, :-1]
    return n * (1.0 - a * fl.out_rate) + a * inflow


def _advance_chemical(grid: Grid2D, state: SimState, n_new: np.ndarray, params: ModelParams, dt: float, M: float) -> np.ndarray:
    variant = params.variant
    if variant is Variant.PARABOLIC_ELLIPTIC:
        return _elliptic(grid, n_new, params.alpha, free_space=True)
    source = n_new
    if variant is Variant.CORRECTED_PP:
        source = n_new - M * weight_H(grid.x, grid.y)
    sh = grid.fft(source)
    if params.alpha == 0:
        sh[0, 0] = 0.0  # torus: keep the chemical mean fixed
    ratio = params.epsilon / dt
    return grid.ifft((ratio * grid.fft(state.c) + sh) / (ratio + grid.k2 + params.alpha))


def step(
    grid: Grid2D,
    state: SimState,
    params: ModelParams,
    ctrl: StepControl,
    *,
    zero_drift: bool = False,
    M: float | None = None,
    dt_cap: float | None = None,
) -> SimState:
    """Advance one step of adaptive size.

    Raises DtUnderflow when cfl h / max|grad phi| < dt_min, and NanAbort when
    the new state is not finite.
    """
    if M is None:
        M = grid.integrate(state.n)
    h2 = grid.h**2
    phi = grid.zeros() if zero_drift else _potential(grid, state, params, M)
    fl = _fluxes(phi)
    dt_adv = ctrl.cfl_safety * h2 / fl.max_jump if fl.max_jump > 0 else math.inf
    if dt_adv < ctrl.dt_min:
        raise DtUnderflow(dt_adv, ctrl.dt_min)
    dt = min(ctrl.dt_max, ctrl.cfl_safety * h2 / fl.out_rate.max())
    if state.step == 0:
        dt = min(dt, ctrl.dt_init)
    if dt_cap is not None:
        dt = min(dt, dt_cap)
    n_new = _advance_density(state.n, fl, dt / h2)
    c_new = _advance_chemical(grid, state, n_new, params, dt, M)
    if not (np.isfinite(n_new).all() and np.isfinite(c_new).all()):
        raise NanAbort(
            f"non-finite state at step {state.step + 1}, t = {state.t + dt}",
            {"t": state.t, "step": state.step, "dt": dt, "max_n": float(np.nanmax(state.n))},
        )
    return SimState(n_new, c_new, state.t + dt, state.step + 1, (c_new - state.c) / dt, dt, dt_adv)


# -- diagnostics ----------------------------------------------------------------------


def scheme_dissipation(n: np.ndarray, phi: np.ndarray) -> float:
    """Exact entropy dissipation of the finite-volume step for frozen phi.

    sum over edges of (B(d) n_{i+1} - B(-d) n_i) (g_{i+1} - g_i), g = log n - phi;
    each term is nonnegative.  Equals h^2 sum (dn/dt)(phi - log n) for the
    semi-discrete density equation, so the discrete energy balance closes
    without a spatial remainder.
    """
    act = n > _THETA_REL * n.max()
    g = np.where(act, np.log(np.where(act, n, 1.0)) - phi, 0.0)
    total = 0.0
    for ax in (0, 1):
        d = np.diff(phi, axis=ax)
        lo = [slice(None)] * 2
        hi = [slice(None)] * 2
        lo[ax], hi[ax] = slice(None, -1), slice(1, None)
        both = act[tuple(lo)] & act[tuple(hi)]
        flux = _bernoulli(d) * n[tuple(hi)] - _bernoulli(-d) * n[tuple(lo)]
        total += float(np.sum(np.where(both, flux * np.diff(g, axis=ax), 0.0)))
    return total


def _chemical_rate(grid: Grid2D, state: SimState, params: ModelParams, M: float) -> np.ndarray:
    # d/dt of the chemical from its equation, used before the first increment exists
    if params.variant is Variant.PARABOLIC_ELLIPTIC:
        return grid.zeros()
    source = state.n - (M * weight_H(grid.x, grid.y) if params.variant is Variant.CORRECTED_PP else 0.0)
    sh = grid.fft(source)
    if params.alpha == 0:
        sh[0, 0] = 0.0
    ch = grid.fft(state.c)
    return grid.ifft(sh - (grid.k2 + params.alpha) * ch) / params.epsilon


def diagnose(
    grid: Grid2D,
    state: SimState,
    params: ModelParams,
    equi_levels: tuple[float, float] = (1.0, 10.0),
    M: float | None = None,
) -> DiagnosticsRecord:
    """All monitored functionals of one state.

    Parabolic-elliptic with alpha = 0: c grows like log|x|, so int |grad c|^2 is
    not finite; the column holds int n c (equal by Green's identity in the
    whole plane) and the free energy is int n log n - (1/2) int n c.
    CorrectedPP: chemical columns refer to u and the free energy is the
    corrected energy.
    """
    n, c = state.n, state.c
    if M is None:
        M = grid.integrate(n)
    variant = params.variant
    alpha = params.alpha
    S = fn.phys_entropy(grid, n)
    coup = fn.coupling(grid, n, c)
    c_sq = grid.integrate(c * c)
    if variant is Variant.PARABOLIC_ELLIPTIC and alpha == 0:
        grad_c = gradient_free_space(grid, n, KernelSpec.log())
        grad_c_sq = coup
        energy = S - 0.5 * coup
    elif variant is Variant.CORRECTED_PP:
        gu = grid.gradient(c)
        grad_c_sq = grid.integrate(gu[0] ** 2 + gu[1] ** 2)
        lx, ly = grad_log_H(grid.x, grid.y)
        k = M / (8.0 * math.pi)
        grad_c = (gu[0] + k * lx, gu[1] + k * ly)
        energy = fn.corrected_free_energy(grid, n, c, M)
    else:
        grad_c = grid.gradient(c)
        grad_c_sq = grid.integrate(grad_c[0] ** 2 + grad_c[1] ** 2)
        energy = S - coup + 0.5 * grad_c_sq + 0.5 * alpha * c_sq
    modified = energy - grid.integrate(n * log_H(grid.x, grid.y))
    if variant is Variant.PARABOLIC_ELLIPTIC:
        dt_c_sq = 0.0
    else:
        rate = state.dt_c if state.dt_c is not None else _chemical_rate(grid, state, params, M)
        dt_c_sq = grid.integrate(rate * rate)
    m_log, m1, m2 = fn.moments(grid, n)
    return DiagnosticsRecord(
        t=state.t,
        mass=grid.integrate(n),
        moment_log=m_log,
        moment_1=m1,
        moment_2=m2,
        phys_entropy=S,
        coupling=coup,
        grad_c_sq=grad_c_sq,
        c_sq=c_sq,
        free_energy=energy,
        modified_free_energy=modified,
        entropy_production=fn.entropy_production(grid, n, grad_c=grad_c),
        dt_c_sq=dt_c_sq,
        lp2=fn.lp_norm(grid, n, 2),
        lp3=fn.lp_norm(grid, n, 3),
        lp4=fn.lp_norm(grid, n, 4),
        equi_k1=fn.equi_integrability(grid, n, equi_levels[0]),
        equi_k2=fn.equi_integrability(grid, n, equi_levels[1]),
        dt_used=state.dt_used,
        max_n=float(n.max()),
        min_n=float(n.min()),
        dt_adv=state.dt_adv,
        scheme_dissipation=scheme_dissipation(n, _potential(grid, state, params, M)),
    )


# -- driver -------------------------------------------------------------------------------


@dataclass
class Trajectory:
    records: list[DiagnosticsRecord]
    cause: Termination
    state: SimState
    steps: int = 0
    max_step_mass_error: float = 0.0
    min_density: float = 0.0
    nan_dump: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def run(
    params: ModelParams,
    preset: InitPreset,
    grid: Grid2D,
    ctrl: StepControl,
    *,
    zero_drift: bool = False,
    equi_levels: tuple[float, float] = (1.0, 10.0),
    c0: np.ndarray | None = None,
    state: SimState | None = None,
) -> Trajectory:
    """Step until t_end, dt underflow or a non-finite state.

    Records are taken at t = 0, every ``record_every`` steps and at the end.
    The last step is shortened to land on t_end.
    """
    if state is None:
        state = init_state(params, preset, grid, c0)
    M = grid.integrate(state.n)
    records = [diagnose(grid, state, params, equi_levels, M)]
    cause = Termination.TIME_REACHED
    worst_mass = 0.0
    min_n = float(state.n.min())
    dump: dict = {}
    last_recorded = state.step
    while state.t < ctrl.t_end * (1.0 - 1e-12):
        mass_before = grid.integrate(state.n)
        try:
            state = step(grid, state, params, ctrl, zero_drift=zero_drift, M=M, dt_cap=ctrl.t_end - state.t)
        except DtUnderflow as exc:
            cause = Termination.DT_UNDERFLOW
            state = replace(state, dt_adv=exc.dt_adv)
            break
        except NanAbort as exc:
            cause = Termination.NAN_ABORT
            dump = exc.dump
            break
        worst_mass = max(worst_mass, abs(grid.integrate(state.n) - mass_before) / mass_before)
        min_n = min(min_n, float(state.n.min()))
        if state.step % ctrl.record_every == 0:
            records.append(diagnose(grid, state, params, equi_levels, M))
            last_recorded = state.step
    if cause is not Termination.NAN_ABORT and (state.step != last_recorded or cause is Termination.DT_UNDERFLOW):
        final = diagnose(grid, state, params, equi_levels, M)
        if state.step == last_recorded:
            records[-1] = final
        else:
            records.append(final)
    return Trajectory(records, cause, state, state.step, worst_mass, min_n, dump)

"""Second-moment analysis: virial right-hand side, blow-up bound, classification."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .functionals import ModelParams, Variant
from .grid import Grid2D, fft_workers
from .kernels import g_alpha
from .solver import Termination, Trajectory

EIGHT_PI = 8.0 * math.pi


class Classification(enum.Enum):
    GLOBAL_LIKE = "GlobalLike"
    BLOWUP_LIKE = "BlowupLike"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class BlowupVerdict:
    classification: Classification
    t_detect: float | None
    bound_Tstar: float | None
    virial_slope_fit: float
    threshold_ok: bool
    virial_fit_residual: float = 0.0
    tail_fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.classification is Classification.BLOWUP_LIKE and self.t_detect is None:
            raise ValueError("BlowupLike requires t_detect")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classification"] = self.classification.value
        return d


@dataclass(frozen=True)
class ClassifyThresholds:
    growth_window: int = 10  # records over which max n must grow
    slope_band: float = 0.10  # relative band around 4M(1 - M/8pi)
    lp2_growth: float = 10.0  # GlobalLike needs max lp2 <= this * lp2(0)
    flat_slope: float = 0.01  # GlobalLike needs slope > this * 4M


def critical_slope(M: float) -> float:
    """4M(1 - M/8pi), the second-moment slope when g_alpha = 1."""
    return 4.0 * M * (1.0 - M / EIGHT_PI)


@lru_cache(maxsize=8)
def _screening_hat(L: float, N: int, alpha: float) -> np.ndarray:
    # sampled 1 - g_alpha on the (2N, 2N) displacement image; bounded, so no
    # singular-cell treatment is needed
    h = 2.0 * L / N
    d = np.arange(N + 1)
    n2 = d[:, None] ** 2 + d[None, :] ** 2
    uniq, inv = np.unique(n2, return_inverse=True)
    quad = (1.0 - g_alpha(alpha, h * np.sqrt(uniq)))[inv].reshape(n2.shape)
    k = np.arange(2 * N)
    absd = np.minimum(k, 2 * N - k)
    return sfft.rfft2(quad[absd[:, None], absd[None, :]], workers=fft_workers())


def screening_pairing(grid: Grid2D, n: np.ndarray, alpha: float) -> float:
    """The double integral of n(x) (1 - g_alpha(x - y)) n(y)."""
    N = grid.N
    nh = sfft.rfft2(n, s=(2 * N, 2 * N), workers=fft_workers())
    conv = sfft.irfft2(nh * _screening_hat(grid.L, N, alpha), s=(2 * N, 2 * N), workers=fft_workers())
    return grid.integrate(n * grid.h**2 * conv[:N, :N])


def virial_rhs(grid: Grid2D, n: np.ndarray, alpha: float) -> float:
    """dI/dt = 4M(1 - M/8pi) + (1/2pi) double integral of n (1 - g_alpha) n."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    M = grid.integrate(n)
    base = critical_slope(M)
    if alpha == 0:
        return base
    return base + screening_pairing(grid, n, alpha) / (2.0 * math.pi)


def virial_upper_bound(M: float, alpha: float, I: float, C_const: float) -> float:
    """4M(1 - M/8pi) + (sqrt(alpha)/pi) C M^{3/2} sqrt(I)."""
    return critical_slope(M) + math.sqrt(alpha) / math.pi * C_const * M**1.5 * math.sqrt(I)


def blowup_bound(M: float, alpha: float, I0: float, C_const: float) -> tuple[bool, float | None]:
    """Threshold condition alpha I0 <= (M - 8pi)^2 / (4 C^2 M) and the time bound.

    Returns (threshold_ok, T*) with T* = 2 pi I0 / (M (M - 8pi - 2 C sqrt(alpha M I0)))
    when the threshold holds, else (False, None).
    """
    if not M > EIGHT_PI:
        raise ValueError("the bound needs super-critical mass M > 8 pi")
    if not I0 > 0 or alpha < 0 or C_const < 1:
        raise ValueError("need I0 > 0, alpha >= 0 and C >= 1")
    ok = alpha * I0 <= (M - EIGHT_PI) ** 2 / (4.0 * C_const**2 * M)
    if not ok:
        return False, None
    denom = M * (M - EIGHT_PI - 2.0 * C_const * math.sqrt(alpha * M * I0))
    return True, (2.0 * math.pi * I0 / denom if denom > 0 else math.inf)


def virial_zero_time(M: float, I0: float) -> float:
    """Time at which the line I0 + 4M(1 - M/8pi) t reaches zero (M > 8pi)."""
    return 2.0 * math.pi * I0 / (M * (M - EIGHT_PI))


def fit_virial(t: np.ndarray, I: np.ndarray) -> tuple[float, float, float]:
    """Least-squares line through I(t).

    Returns (slope, intercept, residual) with the residual measured as
    max |I - fit| / (|slope| * duration).
    """
    t = np.asarray(t, dtype=float)
    I = np.asarray(I, dtype=float)
    if t.size < 2:
        return 0.0, float(I[0]) if I.size else 0.0, math.inf
    slope, icept = np.polyfit(t, I, 1)
    span = abs(slope) * (t[-1] - t[0])
    res = np.abs(I - (slope * t + icept)).max()
    return float(slope), float(icept), float(res / span) if span > 0 else math.inf


def integral_form_violation(t: np.ndarray, I: np.ndarray, M: float, alpha: float, C_const: float) -> float:
    """max over records of I(t) - I(0) - int_0^t f(I(s)) ds, relative to I(0).

    f(l) = (M/2pi)(8pi - M) + (sqrt(alpha)/pi) C M^{3/2} sqrt(l); nonpositive
    values mean the integral inequality holds.
    """
    f = np.array([virial_upper_bound(M, alpha, max(v, 0.0), C_const) for v in I])
    acc = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))])
    return float(np.max(I - I[0] - acc) / I[0])


def tail_fraction(grid: Grid2D, n: np.ndarray, fraction: float = 0.9) -> float:
    """Share of the second moment carried by |x| > fraction * L."""
    w = n * grid.r2
    total = grid.integrate(w)
    return grid.integrate(np.where(grid.r > fraction * grid.L, w, 0.0)) / total if total > 0 else 0.0


def classify(
    traj: Trajectory,
    params: ModelParams,
    thresholds: ClassifyThresholds = ClassifyThresholds(),
    C_const: float = 1.0,
    grid: Grid2D | None = None,
) -> BlowupVerdict:
    """Three-signal verdict.

    BlowupLike: dt underflow, max n nondecreasing over the last window of
    records and, for the parabolic-elliptic model with alpha = 0, the fitted
    slope within the band of 4M(1 - M/8pi) < 0.  GlobalLike: the run reached
    t_end, lp2 stayed within a factor of its initial value and the second
    moment kept growing.  Anything else is Inconclusive.
    """
    recs = traj.records
    if not recs:
        raise ValueError("empty trajectory")
    t = traj.column("t")
    I = traj.column("moment_2")
    slope, _, resid = fit_virial(t, I)
    M = params.M
    I0 = float(I[0])
    threshold_ok = False
    Tstar = None
    if M > EIGHT_PI and params.variant is Variant.PARABOLIC_ELLIPTIC:
        threshold_ok, Tstar = blowup_bound(M, params.alpha, I0, C_const)
    tail = tail_fraction(grid, traj.state.n) if grid is not None else 0.0

    cls = Classification.INCONCLUSIVE
    t_detect = None
    if traj.cause is Termination.DT_UNDERFLOW:
        mx = traj.column("max_n")[-thresholds.growth_window :]
        growing = mx.size >= 2 and bool(np.all(np.diff(mx) >= 0))
        slope_ok = True
        if params.variant is Variant.PARABOLIC_ELLIPTIC and params.alpha == 0:
            ref = critical_slope(M)
            slope_ok = ref < 0 and abs(slope - ref) <= thresholds.slope_band * abs(ref)
        if growing and slope_ok:
            cls = Classification.BLOWUP_LIKE
            t_detect = float(t[-1])
    elif traj.cause is Termination.TIME_REACHED:
        lp2 = traj.column("lp2")
        bounded = bool(np.all(np.isfinite(lp2))) and lp2.max() <= thresholds.lp2_growth * lp2[0]
        spreading = slope > thresholds.flat_slope * 4.0 * M
        if bounded and spreading:
            cls = Classification.GLOBAL_LIKE
    return BlowupVerdict(cls, t_detect, Tstar, slope, threshold_ok, resid, tail)

"""Closed-form kernels and free-space solves.

The Bessel kernel B_alpha and the screening factor g_alpha are evaluated from
their defining Laplace-type integrals on a logarithmic axis.  Both integrands
are analytic in a strip around the real axis and decay doubly exponentially,
so the trapezoid rule converges geometrically; step halving stops once two
successive estimates agree.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import integrate, optimize, special

from .grid import Grid2D, fft_workers

# Truncate the log-axis integrals where the integrand is e^-50 below its peak.
_TAIL = 50.0
_RTOL = 1e-14

# Mean of log|z| over the unit square centred at the origin.
LOG_UNIT_SQUARE_MEAN = 0.5 * (math.log(0.5) - 3.0 + math.pi / 2.0)


class SingularEvaluation(ValueError):
    """Kernel sampled at its singular point r = 0 in checked mode."""


# -- the weight H -----------------------------------------------------------


def weight_H(x, y=0.0):
    """H(x) = 1 / (pi (1 + |x|^2)^2); integrates to one over the plane."""
    r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
    return 1.0 / (np.pi * (1.0 + r2) ** 2)


def log_H(x, y=0.0):
    r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
    return -math.log(math.pi) - 2.0 * np.log1p(r2)


def grad_log_H(x, y=0.0):
    """Analytic gradient -4x / (1 + |x|^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = 1.0 + x**2 + y**2
    return -4.0 * x / d, -4.0 * y / d


# -- log-axis quadrature ----------------------------------------------------


def _log_axis_trapezoid(phi, lo, hi, peak):
    """Integrate exp(phi(s)) over [lo, hi] for each column of parameters.

    ``phi`` maps an (m, k) array of nodes to exponents; ``lo``, ``hi``, ``peak``
    are length-k arrays.  Returns the integrals, computed as
    exp(peak) * sum(exp(phi - peak)) * ds with step halving.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    peak = np.asarray(peak, dtype=float)

    def rule(m):
        tau = (np.arange(m + 1) / m)[:, None]
        s = lo + (hi - lo) * tau
        w = np.exp(phi(s) - peak)
        return (hi - lo) / m * (w.sum(axis=0) - 0.5 * (w[0] + w[-1]))

    m = 64
    prev = rule(m)
    while True:
        m *= 2
        cur = rule(m)
        if np.all(np.abs(cur - prev) <= _RTOL * np.abs(cur)) or m >= 1 << 14:
            return np.exp(peak) * cur
        prev = cur


def bessel_B(alpha: float, r, checked: bool = False):
    """Bessel kernel B_alpha(r) = (1/4pi) int_0^inf t^-1 exp(-r^2/4t - alpha t) dt.

    Returns +inf where r == 0; with ``checked=True`` that raises instead.
    """
    if alpha <= 0:
        raise ValueError("Bessel kernel requires alpha > 0")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    if checked and np.any(r == 0):
        raise SingularEvaluation("B_alpha sampled at r = 0")
    out = np.full(r.shape, np.inf)
    pos = r > 0
    if np.any(pos):
        a = 0.25 * r[pos] ** 2
        # exponent -a e^-s - alpha e^s peaks at s* = log(a/alpha)/2
        peak = -2.0 * np.sqrt(a * alpha)
        lo = np.log(a / (_TAIL - peak))
        hi = np.log((_TAIL - peak) / alpha)
        phi = lambda s: -a * np.exp(-s) - alpha * np.exp(s)  # noqa: E731
        out[pos] = _log_axis_trapezoid(phi, lo, hi, peak) / (4.0 * np.pi)
    return out if out.ndim else float(out)


def g_alpha(alpha: float, r):
    """Screening factor g_alpha(r) = int_0^inf exp(-s - alpha r^2 / 4s) ds."""
    if alpha <= 0:
        raise ValueError("g_alpha requires alpha > 0")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    b = 0.25 * alpha * r**2
    flat = b.ravel()
    # exponent u - e^u - b e^-u in s = e^u, concave with a unique maximum
    eu = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * flat))
    peak = np.log(eu) - eu - flat / eu
    depth = _TAIL - peak
    lo = peak - _TAIL
    with np.errstate(divide="ignore"):
        lo = np.maximum(lo, np.log(flat / depth))
    hi = np.log(2.0 * depth + 10.0)
    phi = lambda u: u - np.exp(u) - flat * np.exp(-u)  # noqa: E731
    out = _log_axis_trapezoid(phi, lo, hi, peak).reshape(b.shape)
    return out if out.ndim else float(out)


def constant_K(samples: int = 1000) -> float:
    """K = 2 pi sup_{0 < rho < 1} rho B_1(rho): dense scan, then golden section."""
    if samples < 100:
        raise ValueError("samples must be >= 100")
    rho = (np.arange(samples) + 0.5) / samples
    vals = rho * bessel_B(1.0, rho)
    i = int(np.clip(np.argmax(vals), 1, samples - 2))
    res = optimize.minimize_scalar(
        lambda p: -p * bessel_B(1.0, p),
        bracket=(rho[i - 1], rho[i], rho[i + 1]),
        method="golden",
        tol=1e-12,
    )
    return 2.0 * np.pi * max(-res.fun, vals.max())


def constant_C(samples: int = 1000) -> float:
    """The blow-up constant max(K, 1)."""
    return max(constant_K(samples), 1.0)


# -- convolution kernels ----------------------------------------------------


class KernelKind(enum.Enum):
    LOG_E2 = "LogE2"
    BESSEL = "Bessel"


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is KernelKind.BESSEL and not self.alpha > 0:
            raise ValueError("Bessel kernel requires alpha > 0")

    @classmethod
    def log(cls) -> KernelSpec:
        return cls(KernelKind.LOG_E2)

    @classmethod
    def bessel(cls, alpha: float) -> KernelSpec:
        return cls(KernelKind.BESSEL, float(alpha))


def log_cell_average(h: float) -> float:
    """Exact average of E_2(z) = -(1/2pi) log|z| over the square of side h at 0."""
    return -(math.log(h) + LOG_UNIT_SQUARE_MEAN) / (2.0 * math.pi)


def bessel_cell_average(alpha: float, h: float) -> float:
    """Average of B_alpha over the square of side h centred at the origin.

    Uses int_0^R B(r) r dr = (1/2pi) int_0^inf (1 - e^{-R^2/4t}) e^{-alpha t} dt
    and integrates over the eight symmetric triangles of the square.
    """

    def radial_mass(R):
        f = lambda s: -math.expm1(-0.25 * R * R * math.exp(-s)) * math.exp(s - alpha * math.exp(s))  # noqa: E731
        hi = math.log((_TAIL + 10.0) / alpha)
        val, _ = integrate.quad(f, -60.0, hi, epsabs=0.0, epsrel=1e-13, limit=400)
        return val / (2.0 * math.pi)

    nodes, weights = np.polynomial.legendre.leggauss(24)
    theta = 0.125 * np.pi * (nodes + 1.0)
    total = sum(w * radial_mass(0.5 * h / math.cos(t)) for t, w in zip(theta, weights))
    return 8.0 * 0.125 * np.pi * total / h**2


def _fold(quad: np.ndarray, N: int) -> np.ndarray:
    # quadrant of |displacement| in [0, N] -> (2N, 2N) image in FFT order
    k = np.arange(2 * N)
    absd = np.minimum(k, 2 * N - k)
    return quad[absd[:, None], absd[None, :]]


def _sampled_image(L: float, N: int, kind: KernelKind, alpha: float) -> np.ndarray:
    """Pointwise kernel samples with the central cell replaced by its average."""
    h = 2.0 * L / N
    d = np.arange(N + 1)
    n2 = d[:, None] ** 2 + d[None, :] ** 2
    if kind is KernelKind.LOG_E2:
        with np.errstate(divide="ignore"):
            quad = -0.5 * np.log(h * h * n2) / (2.0 * np.pi)
        quad[0, 0] = log_cell_average(h)
    else:
        uniq, inv = np.unique(n2, return_inverse=True)
        vals = np.empty(uniq.shape)
        vals[0] = bessel_cell_average(alpha, h)
        vals[1:] = bessel_B(alpha, h * np.sqrt(uniq[1:]))
        quad = vals[inv].reshape(n2.shape)
    return _fold(quad, N)


def _symbol(L: float, N: int, kind: KernelKind, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Kernel transform sampled on the 4N grid (box of side 8L); also returns k."""
    h = 2.0 * L / N
    k1 = 2.0 * np.pi * sfft.fftfreq(4 * N, d=h)
    kk = np.hypot(k1[:, None], k1[None, :])
    if kind is KernelKind.LOG_E2:
        R = 2.0 * math.sqrt(2.0) * L
        with np.errstate(divide="ignore", invalid="ignore"):
            sym = (1.0 - special.j0(kk * R)) / kk**2 - R * math.log(R) * special.j1(kk * R) / kk
        sym[0, 0] = 0.25 * R * R * (1.0 - 2.0 * math.log(R))
    else:
        sym = 1.0 / (kk**2 + alpha)
    return sym, k1


def _restrict(sym: np.ndarray, N: int, h: float) -> np.ndarray:
    # real-space image of a 4N symbol, cut to displacements |d| <= N, FFT order
    M = sym.shape[0]
    image = sfft.ifft2(sym, workers=fft_workers()).real / h**2
    idx = np.r_[0 : N + 1, M - N + 1 : M]
    return image[np.ix_(idx, idx)]


def _spectral_image(L: float, N: int, kind: KernelKind, alpha: float) -> np.ndarray:
    """Band-limited kernel image, spectrally accurate for resolved fields.

    The kernel is cut off at R = 2 sqrt(2) L, beyond every displacement that
    occurs between two points of the box, and its exact transform is sampled on
    a box of side 8L so that the cut-off kernel never wraps.  The LogE2 cut-off
    transform is (1 - J0(kR))/k^2 - R log R J1(kR)/k.  For the Bessel kernel the
    untruncated symbol 1/(k^2 + alpha) is used; its periodic images sit at
    distance >= 8L - 2 sqrt(2) L, where B_alpha is exponentially small.
    """
    sym, _ = _symbol(L, N, kind, alpha)
    return _restrict(sym, N, 2.0 * L / N)


@lru_cache(maxsize=8)
def _kernel_grad_hat(L: float, N: int, kind: KernelKind, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    # the cut-off kernel jumps at |x| = R, which lies outside every displacement used
    sym, k1 = _symbol(L, N, kind, alpha)
    k1 = k1.copy()
    k1[2 * N] = 0.0
    h = 2.0 * L / N
    gx = _restrict(1j * k1[:, None] * sym, N, h)
    gy = _restrict(1j * k1[None, :] * sym, N, h)
    return sfft.rfft2(gx, workers=fft_workers()), sfft.rfft2(gy, workers=fft_workers())


@lru_cache(maxsize=16)
def _kernel_hat(L: float, N: int, kind: KernelKind, alpha: float, method: str) -> np.ndarray:
    build = _spectral_image if method == "spectral" else _sampled_image
    return sfft.rfft2(build(L, N, kind, alpha), workers=fft_workers())


def convolve_free_space(
    grid: Grid2D,
    f: np.ndarray,
    spec: KernelSpec,
    checked: bool = False,
    method: str = "spectral",
) -> np.ndarray:
    """(K * f)(x) on the grid, without periodic images (zero padding to 2N).

    ``method="spectral"`` (default) uses a band-limited kernel image and is
    spectrally accurate; ``method="sampled"`` uses pointwise kernel samples with
    a cell-averaged central cell and is second order.
    """
    if method not in ("spectral", "sampled"):
        raise ValueError(f"unknown convolution method {method!r}")
    if checked:
        peak = np.abs(f).max()
        if peak > 0 and np.abs(f[grid.boundary_ring()]).max() > 1e-10 * peak:
            raise ValueError("field does not decay to 1e-10 of its peak at the boundary")
    N = grid.N
    khat = _kernel_hat(grid.L, N, spec.kind, spec.alpha, method)
    fhat = sfft.rfft2(f, s=(2 * N, 2 * N), workers=fft_workers())
    out = sfft.irfft2(fhat * khat, s=(2 * N, 2 * N), workers=fft_workers())
    return grid.h**2 * out[:N, :N]


def gradient_free_space(grid: Grid2D, f: np.ndarray, spec: KernelSpec) -> tuple[np.ndarray, np.ndarray]:
    """grad (K * f) on the grid, from the kernel's band-limited gradient image."""
    N = grid.N
    fhat = sfft.rfft2(f, s=(2 * N, 2 * N), workers=fft_workers())
    out = []
    for ghat in _kernel_grad_hat(grid.L, N, spec.kind, spec.alpha):
        full = sfft.irfft2(fhat * ghat, s=(2 * N, 2 * N), workers=fft_workers())
        out.append(grid.h**2 * full[:N, :N])
    return out[0], out[1]


def solve_screened_poisson(grid: Grid2D, n: np.ndarray, alpha: float) -> np.ndarray:
    """Periodic spectral solve of (-Delta + alpha) c = n.

    For alpha == 0 the zero mode of n is dropped and c has zero mean.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    nh = grid.fft(n)
    denom = grid.k2 + alpha
    if alpha == 0:
        denom = denom.copy()
        denom[0, 0] = 1.0
        nh = nh.copy()
        nh[0, 0] = 0.0
    return grid.ifft(nh / denom)

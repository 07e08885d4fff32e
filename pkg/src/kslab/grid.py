"""Uniform tensor grid on [-L, L]^2 with spectral calculus and quadrature.

Fields are plain ``(N, N)`` float arrays; ``values[i, j]`` samples the point
``(-L + i*h, -L + j*h)``.  Vector fields are ``(fx, fy)`` tuples of such arrays.
Spectral operators treat the box as a torus.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

VectorField = tuple[np.ndarray, np.ndarray]

# FFT worker count; the cli sets this from --threads / KSLAB_THREADS.
_WORKERS = 1


def set_workers(n: int) -> None:
    global _WORKERS
    _WORKERS = max(1, int(n))


def fft_workers() -> int:
    return _WORKERS


@dataclass(frozen=True)
class Grid2D:
    L: float
    N: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"half width L must be positive, got {self.L}")
        if int(self.N) != self.N or self.N < 8:
            raise ValueError(f"N must be an integer >= 8, got {self.N}")
        if self.N % 2:
            raise ValueError(f"N must be even, got {self.N}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N, self.N)

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def x(self) -> np.ndarray:
        return np.broadcast_to(self.axis[:, None], self.shape)

    @cached_property
    def y(self) -> np.ndarray:
        return np.broadcast_to(self.axis[None, :], self.shape)

    @cached_property
    def r2(self) -> np.ndarray:
        return self.x**2 + self.y**2

    @cached_property
    def r(self) -> np.ndarray:
        return np.sqrt(self.r2)

    @cached_property
    def _k(self) -> tuple[np.ndarray, np.ndarray]:
        # rfft2 layout: full frequencies along axis 0, half along axis 1
        kx = 2.0 * np.pi * sfft.fftfreq(self.N, d=self.h)
        ky = 2.0 * np.pi * sfft.rfftfreq(self.N, d=self.h)
        return kx[:, None], ky[None, :]

    @cached_property
    def _k_odd(self) -> tuple[np.ndarray, np.ndarray]:
        # first-derivative symbols with the Nyquist mode removed
        kx, ky = (k.copy() for k in self._k)
        kx[self.N // 2, 0] = 0.0
        ky[0, -1] = 0.0
        return kx, ky

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky = self._k
        return kx**2 + ky**2

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def interior_mask(self, fraction: float = 0.5) -> np.ndarray:
        """Points with |x| <= fraction * L (the 'interior window')."""
        return self.r <= fraction * self.L

    def boundary_ring(self, width: int = 2) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[:width, :] = m[-width:, :] = True
        m[:, :width] = m[:, -width:] = True
        return m

    # -- transforms -------------------------------------------------------

    def fft(self, f: np.ndarray) -> np.ndarray:
        return sfft.rfft2(f, workers=_WORKERS)

    def ifft(self, fh: np.ndarray) -> np.ndarray:
        return sfft.irfft2(fh, s=self.shape, workers=_WORKERS)

    # -- calculus ---------------------------------------------------------

    def integrate(self, f: np.ndarray) -> float:
        # numpy's sum is pairwise, which keeps reductions reproducible
        return float(self.h**2 * np.sum(f))

    def gradient(self, f: np.ndarray) -> VectorField:
        fh = self.fft(f)
        kx, ky = self._k_odd
        return self.ifft(1j * kx * fh), self.ifft(1j * ky * fh)

    def divergence(self, v: VectorField) -> np.ndarray:
        kx, ky = self._k_odd
        return self.ifft(1j * kx * self.fft(v[0]) + 1j * ky * self.fft(v[1]))

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.ifft(-self.k2 * self.fft(f))

    def grad_sq(self, f: np.ndarray) -> np.ndarray:
        gx, gy = self.gradient(f)
        return gx**2 + gy**2

    def laplacian_fd(self, f: np.ndarray) -> np.ndarray:
        """Five-point Laplacian (second order, periodic wrap)."""
        s = np.roll(f, 1, 0) + np.roll(f, -1, 0) + np.roll(f, 1, 1) + np.roll(f, -1, 1)
        return (s - 4.0 * f) / self.h**2

    def window(self, inner: float = 0.5, outer: float = 0.9) -> np.ndarray:
        """Smooth radial cutoff: 1 for |x| <= inner*L, 0 for |x| >= outer*L."""
        t = np.clip((self.r / self.L - inner) / (outer - inner), 0.0, 1.0)
        a, b = _bump_step(1.0 - t), _bump_step(t)
        return a / (a + b)


def _bump_step(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def make_grid(L: float, N: int) -> Grid2D:
    return Grid2D(float(L), int(N))


def dot(u: VectorField, v: VectorField) -> np.ndarray:
    return u[0] * v[0] + u[1] * v[1]

"""Energies, entropies, moments and norms tracked along trajectories.

Every functional takes the grid first and plain ``(N, N)`` arrays after it.
The convention 0 log 0 = 0 is used throughout; cells with n below
``1e-14 * max(n)`` are left out of every log-containing integrand.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .grid import Grid2D, VectorField
from .kernels import log_H, weight_H

_THETA_REL = 1e-14


class Variant(enum.Enum):
    PARABOLIC_PARABOLIC = "ParabolicParabolic"
    PARABOLIC_ELLIPTIC = "ParabolicElliptic"
    CORRECTED_PP = "CorrectedPP"

    @classmethod
    def parse(cls, text: str) -> Variant:
        aliases = {"pp": cls.PARABOLIC_PARABOLIC, "pe": cls.PARABOLIC_ELLIPTIC, "corrected": cls.CORRECTED_PP}
        key = text.strip()
        if key.lower() in aliases:
            return aliases[key.lower()]
        return cls(key)


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    alpha: float
    M: float
    sigma_mollify: float = 0.0
    variant: Variant = Variant.PARABOLIC_PARABOLIC

    def __post_init__(self) -> None:
        if self.epsilon < 0 or self.alpha < 0 or self.sigma_mollify < 0:
            raise ValueError("epsilon, alpha and sigma_mollify must be nonnegative")
        if not self.M > 0:
            raise ValueError("mass M must be positive")
        if self.variant is Variant.PARABOLIC_ELLIPTIC and self.epsilon != 0:
            raise ValueError("ParabolicElliptic requires epsilon = 0")
        if self.variant is not Variant.PARABOLIC_ELLIPTIC and not self.epsilon > 0:
            raise ValueError(f"{self.variant.value} requires epsilon > 0")
        if self.variant is Variant.CORRECTED_PP and (self.alpha != 0 or self.M >= 8 * math.pi):
            raise ValueError("CorrectedPP requires alpha = 0 and M < 8 pi")


CSV_COLUMNS = (
    "t", "mass", "moment_log", "moment_1", "moment_2", "phys_entropy", "coupling",
    "grad_c_sq", "c_sq", "free_energy", "modified_free_energy", "entropy_production",
    "dt_c_sq", "lp2", "lp3", "lp4", "equi_k1", "equi_k2", "dt_used",
)  # fmt: skip


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One time sample of every monitored functional.

    For CorrectedPP the chemical columns refer to the deviation u and
    ``free_energy`` holds the corrected energy.
    """

    t: float
    mass: float
    moment_log: float
    moment_1: float
    moment_2: float
    phys_entropy: float
    coupling: float
    grad_c_sq: float
    c_sq: float
    free_energy: float
    modified_free_energy: float
    entropy_production: float
    dt_c_sq: float
    lp2: float
    lp3: float
    lp4: float
    equi_k1: float
    equi_k2: float
    dt_used: float
    max_n: float = 0.0
    min_n: float = 0.0
    dt_adv: float = math.inf
    scheme_dissipation: float = math.nan
    extra: dict = field(default_factory=dict, compare=False)

    def row(self) -> tuple[float, ...]:
        return tuple(getattr(self, k) for k in CSV_COLUMNS)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


# -- building blocks ----------------------------------------------------------


def _active(n: np.ndarray) -> np.ndarray:
    peak = n.max() if n.size else 0.0
    return n > _THETA_REL * peak if peak > 0 else np.zeros(n.shape, dtype=bool)


def phys_entropy(grid: Grid2D, n: np.ndarray) -> float:
    """int n log n with 0 log 0 = 0."""
    act = _active(n)
    return grid.integrate(np.where(act, n * np.log(np.where(act, n, 1.0)), 0.0))


def coupling(grid: Grid2D, n: np.ndarray, c: np.ndarray) -> float:
    return grid.integrate(n * c)


def chemical_quadratic(grid: Grid2D, c: np.ndarray, alpha: float) -> float:
    """(1/2) int |grad c|^2 + (alpha/2) int c^2."""
    return 0.5 * grid.integrate(grid.grad_sq(c)) + 0.5 * alpha * grid.integrate(c * c)


# -- named functionals --------------------------------------------------------


def free_energy(grid: Grid2D, n: np.ndarray, c: np.ndarray, alpha: float) -> float:
    return phys_entropy(grid, n) - coupling(grid, n, c) + chemical_quadratic(grid, c, alpha)


def entropy(grid: Grid2D, n: np.ndarray, c: np.ndarray) -> float:
    """E(n; c) = int n log n - int n c."""
    return phys_entropy(grid, n) - coupling(grid, n, c)


def chemical_energy(grid: Grid2D, c: np.ndarray, n: np.ndarray, alpha: float) -> float:
    """F_alpha(c; n) = (1/2) int |grad c|^2 + (alpha/2) int c^2 - int n c."""
    return chemical_quadratic(grid, c, alpha) - coupling(grid, n, c)


def entropy_production(
    grid: Grid2D,
    n: np.ndarray,
    c: np.ndarray | None = None,
    grad_c: VectorField | None = None,
) -> float:
    """int n |grad(log n - c)|^2 in the form int |2 grad sqrt(n) - sqrt(n) grad c|^2.

    ``grad_c`` may be supplied when c is not periodic on the box.
    """
    s = np.sqrt(np.maximum(n, 0.0))
    sx, sy = grid.gradient(s)
    if grad_c is None:
        grad_c = grid.gradient(c) if c is not None else (0.0, 0.0)
    fx = 2.0 * sx - s * grad_c[0]
    fy = 2.0 * sy - s * grad_c[1]
    return grid.integrate(np.where(_active(n), fx * fx + fy * fy, 0.0))


def moments(grid: Grid2D, n: np.ndarray) -> tuple[float, float, float]:
    """(int n log(1+|x|^2), int |x| n, int |x|^2 n)."""
    return (
        grid.integrate(n * np.log1p(grid.r2)),
        grid.integrate(n * grid.r),
        grid.integrate(n * grid.r2),
    )


def equi_integrability(grid: Grid2D, n: np.ndarray, k: float) -> float:
    """int (n - k)_+."""
    if not k > 0:
        raise ValueError("level k must be positive")
    return grid.integrate(np.maximum(n - k, 0.0))


def lp_norm(grid: Grid2D, n: np.ndarray, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    return grid.integrate(np.abs(n) ** p) ** (1.0 / p)


def modified_free_energy(grid: Grid2D, n: np.ndarray, c: np.ndarray, alpha: float) -> float:
    """E_H = E - int n log H, with log H analytic per cell."""
    return free_energy(grid, n, c, alpha) - grid.integrate(n * log_H(grid.x, grid.y))


def corrected_free_energy(grid: Grid2D, n: np.ndarray, u: np.ndarray, M: float | None = None) -> float:
    """int n log n - int n u + (1/2) int |grad u|^2 - (M/8pi) int n log H + M int u H."""
    if M is None:
        M = grid.integrate(n)
    lh = log_H(grid.x, grid.y)
    H = weight_H(grid.x, grid.y)
    return (
        phys_entropy(grid, n)
        - coupling(grid, n, u)
        + 0.5 * grid.integrate(grid.grad_sq(u))
        - M / (8.0 * math.pi) * grid.integrate(n * lh)
        + M * grid.integrate(u * H)
    )


def mass_control(grid: Grid2D, n: np.ndarray) -> tuple[float, float]:
    """Negative-entropy part and its bound with psi = -2 log(1+|x|^2).

    Returns (int n (log n)_-, m log(Z/m) - int_{n<=1} n psi) where m is the
    mass of n on {n <= 1} and Z = int e^psi over the box.
    """
    act = _active(n)
    logn = np.log(np.where(act, n, 1.0))
    lhs = grid.integrate(np.where(act, n * np.maximum(-logn, 0.0), 0.0))
    low = n <= 1.0
    psi = -2.0 * np.log1p(grid.r2)
    m = grid.integrate(np.where(low, n, 0.0))
    Z = grid.integrate(np.exp(psi))
    const = m * math.log(Z / m) if m > 0 else 0.0
    return lhs, const - grid.integrate(np.where(low, n * psi, 0.0))


def gaussian(grid: Grid2D, M: float, sigma: float, center: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Sampled M / (2 pi sigma^2) exp(-|x - center|^2 / 2 sigma^2)."""
    r2 = (grid.x - center[0]) ** 2 + (grid.y - center[1]) ** 2
    return M / (2.0 * math.pi * sigma**2) * np.exp(-r2 / (2.0 * sigma**2))


def moment_log_excess(
    t: np.ndarray,
    moment_log: np.ndarray,
    entropy_production: np.ndarray,
    M: float,
    delta: float = 1.0,
) -> float:
    """Largest relative excess of int n log(1+|x|^2) over its a-priori bound.

    Bound: moment_log(0) + M t / (2 delta) + (delta / 2) int_0^t I_prod, the
    time integral by the trapezoid rule.  Values <= 0 mean the bound holds.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    t = np.asarray(t, dtype=float)
    prod = cumulative_trapezoid(np.asarray(entropy_production, dtype=float), t, initial=0.0)
    bound = moment_log[0] + M * t / (2.0 * delta) + 0.5 * delta * prod
    # bound can be 0 at t = 0 for mass concentrated at the origin
    return float(np.max((np.asarray(moment_log) - bound) / np.maximum(bound, np.finfo(float).tiny)))

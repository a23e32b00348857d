"""Two-level Unruh-DeWitt detector: operators, profiles and spacetime smearing.

Hilbert-space ordering is ``(|e>, |g>)``, so ``sigma_plus = [[0, 1], [0, 0]]``
raises the ground state to the excited one.

Profiles carry their own quadrature rules.  A spatial rule integrates
``int d^3x f(x) h(x)`` as ``sum(weights * h(nodes))``; the weights already
contain ``f``.  A temporal rule does the same for ``chi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite, roots_legendre

from .errors import FermiChartError, ValidationError
from .numerics import GAUSSIAN_TRUNCATION
from .worldline import Worldline

__all__ = [
    "TwoLevelOperator",
    "SIGMA_PLUS",
    "SIGMA_MINUS",
    "GaussianSmearing",
    "HardSphereSmearing",
    "PointlikeSmearing",
    "GaussianSwitching",
    "CosineBumpSwitching",
    "SmoothTopHatSwitching",
    "SpatialRule",
    "DetectorSpec",
    "free_hamiltonian",
    "monopole",
    "spacetime_smearing",
    "smearing_moments",
]


@dataclass(frozen=True)
class TwoLevelOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValidationError("two-level operators are 2x2")
        object.__setattr__(self, "matrix", m)

    def dagger(self) -> "TwoLevelOperator":
        return TwoLevelOperator(self.matrix.conj().T)

    def is_hermitian(self, tol=1e-14) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix) if self.is_hermitian() else np.linalg.eigvals(self.matrix)

    def __matmul__(self, other):
        if isinstance(other, TwoLevelOperator):
            return TwoLevelOperator(self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    def __add__(self, other):
        return TwoLevelOperator(self.matrix + other.matrix)

    def __mul__(self, c):
        return TwoLevelOperator(c * self.matrix)

    __rmul__ = __mul__


SIGMA_PLUS = TwoLevelOperator(np.array([[0, 1], [0, 0]]))
SIGMA_MINUS = SIGMA_PLUS.dagger()
EXCITED = np.array([1.0, 0.0], dtype=complex)
GROUND = np.array([0.0, 1.0], dtype=complex)


# --- spatial profiles ------------------------------------------------------------


@dataclass(frozen=True)
class SpatialRule:
    """Quadrature nodes ``(N, 3)`` and weights ``(N,)`` with the profile folded in."""

    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> np.ndarray:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def _as_center(center):
    c = np.asarray(center, dtype=float)
    if c.shape != (3,) or not np.all(np.isfinite(c)):
        raise ValidationError("smearing centre must be a finite 3-vector")
    return c


def _place(axis_nodes, other_nodes, axis):
    """Assemble 3-vectors with ``axis_nodes`` on ``axis`` and 2-vectors elsewhere."""
    out = np.empty((len(axis_nodes), 3))
    rest = [i for i in range(3) if i != axis]
    out[:, axis] = axis_nodes
    out[:, rest] = other_nodes
    return out


@dataclass(frozen=True)
class GaussianSmearing:
    """Isotropic Gaussian of width ``sigma`` about ``center``, cut to a cube of half-side 8 sigma.

    The mass outside the cube is ``1 - erf(8/sqrt 2)**3``, about 4e-15.
    """

    sigma: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "center", _as_center(self.center))

    @property
    def kind(self) -> str:
        return "gaussian-shifted" if np.any(self.center) else "gaussian"

    @property
    def characteristic_size(self) -> float:
        return float(self.sigma)

    @property
    def half_width(self) -> float:
        return GAUSSIAN_TRUNCATION * self.sigma

    @property
    def support_radius(self) -> float:
        """Largest ``|xbar|`` in the support."""
        return float(np.linalg.norm(self.center) + np.sqrt(3) * self.half_width)

    def __call__(self, xbar):
        d = np.asarray(xbar, dtype=float) - self.center
        value = (2 * np.pi * self.sigma**2) ** -1.5 * np.exp(-0.5 * np.sum(d * d, axis=-1) / self.sigma**2)
        return np.where(np.all(np.abs(d) <= self.half_width, axis=-1), value, 0.0)

    def rule(self, n: int = 12, axis: int = 0) -> SpatialRule:
        t, w = roots_hermite(n)
        x = np.sqrt(2) * self.sigma * t
        w = w / np.sqrt(np.pi)
        inside = np.abs(x) <= self.half_width
        x, w = x[inside], w[inside]
        grid = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
        weights = np.einsum("i,j,k->ijk", w, w, w).ravel()
        return SpatialRule(grid + self.center, weights)

    def rotated(self, rotation) -> "GaussianSmearing":
        return GaussianSmearing(self.sigma, np.asarray(rotation, dtype=float) @ self.center)


@dataclass(frozen=True)
class HardSphereSmearing:
    """Uniform ball of radius ``radius``."""

    radius: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValidationError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", _as_center(self.center))

    kind = "hard-sphere"

    @property
    def characteristic_size(self) -> float:
        return float(self.radius)

    @property
    def support_radius(self) -> float:
        return float(np.linalg.norm(self.center) + self.radius)

    def __call__(self, xbar):
        d = np.asarray(xbar, dtype=float) - self.center
        inside = np.sum(d * d, axis=-1) <= self.radius**2
        return np.where(inside, 3.0 / (4 * np.pi * self.radius**3), 0.0)

    def rule(self, n: int = 12, axis: int = 0) -> SpatialRule:
        """Slices perpendicular to ``axis``, each a polar disk rule.

        The disk radius is exact on every slice, so the boundary
        discontinuity costs no accuracy.
        """
        R = self.radius
        s, ws = np.polynomial.legendre.leggauss(n)
        rho_t, rho_w = np.polynomial.legendre.leggauss(n)
        n_phi = 2 * n
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        pts, wts = [], []
        for si, wi in zip(R * s, R * ws):
            rmax = np.sqrt(R * R - si * si)
            rho = 0.5 * rmax * (rho_t + 1)
            wr = 0.5 * rmax * rho_w * rho * (2 * np.pi / n_phi)
            disk = np.stack([np.outer(rho, np.cos(phi)).ravel(), np.outer(rho, np.sin(phi)).ravel()], axis=1)
            pts.append(_place(np.full(len(disk), si), disk, axis))
            wts.append(wi * np.repeat(wr, n_phi))
        weights = np.concatenate(wts) * 3.0 / (4 * np.pi * R**3)
        return SpatialRule(np.concatenate(pts) + self.center, weights)

    def rotated(self, rotation) -> "HardSphereSmearing":
        return HardSphereSmearing(self.radius, np.asarray(rotation, dtype=float) @ self.center)


@dataclass(frozen=True)
class PointlikeSmearing:
    """Delta-function smearing at ``center``; has a quadrature rule but no density."""

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "center", _as_center(self.center))

    kind = "pointlike"
    characteristic_size = 0.0

    @property
    def support_radius(self) -> float:
        return float(np.linalg.norm(self.center))

    def __call__(self, xbar):
        raise ValidationError("a pointlike smearing has no pointwise density")

    def rule(self, n: int = 1, axis: int = 0) -> SpatialRule:
        return SpatialRule(self.center[None, :].copy(), np.ones(1))

    def rotated(self, rotation) -> "PointlikeSmearing":
        return PointlikeSmearing(np.asarray(rotation, dtype=float) @ self.center)


# --- switching profiles ------------------------------------------------------------


@lru_cache(maxsize=64)
def _legendre_nodes(n):
    return roots_legendre(n)


def _legendre(a, b, n):
    t, w = _legendre_nodes(int(n))
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


@dataclass(frozen=True)
class GaussianSwitching:
    """``exp(-(tau - center)^2 / (2 T^2))``, zero beyond 8 T."""

    T: float
    center: float = 0.0
    kind = "gaussian"

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValidationError(f"switching time must be positive, got {self.T}")

    @property
    def support(self) -> tuple[float, float]:
        h = GAUSSIAN_TRUNCATION * self.T
        return self.center - h, self.center + h

    def __call__(self, tau):
        d = np.asarray(tau, dtype=float) - self.center
        return np.where(np.abs(d) <= GAUSSIAN_TRUNCATION * self.T, np.exp(-0.5 * d * d / self.T**2), 0.0)

    def integral(self) -> float:
        return float(np.sqrt(2 * np.pi) * self.T)

    def rule(self, n: int = 48):
        t, w = roots_hermite(n)
        x = np.sqrt(2) * self.T * t
        keep = np.abs(x) <= GAUSSIAN_TRUNCATION * self.T
        return x[keep] + self.center, (np.sqrt(2) * self.T * w)[keep]


@dataclass(frozen=True)
class CosineBumpSwitching:
    """``cos^2(pi (tau - center) / (2 T))`` on ``|tau - center| < T``."""

    T: float
    center: float = 0.0
    kind = "cosine-bump"

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValidationError(f"switching time must be positive, got {self.T}")

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.T, self.center + self.T

    def __call__(self, tau):
        d = np.asarray(tau, dtype=float) - self.center
        return np.where(np.abs(d) < self.T, np.cos(0.5 * np.pi * d / self.T) ** 2, 0.0)

    def integral(self) -> float:
        return float(self.T)

    def rule(self, n: int = 64):
        x, w = _legendre(*self.support, n)
        return x, w * self(x)


@dataclass(frozen=True)
class SmoothTopHatSwitching:
    """Plateau of length ``T`` with ``sin^2`` ramps of length ``ramp`` on each side."""

    T: float
    ramp: float
    center: float = 0.0
    kind = "top-hat-smoothed"

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0 and np.isfinite(self.ramp) and self.ramp > 0):
            raise ValidationError("plateau and ramp lengths must be positive")

    @property
    def support(self) -> tuple[float, float]:
        h = 0.5 * self.T + self.ramp
        return self.center - h, self.center + h

    def __call__(self, tau):
        d = np.abs(np.asarray(tau, dtype=float) - self.center) - 0.5 * self.T
        edge = np.cos(0.5 * np.pi * np.clip(d, 0, self.ramp) / self.ramp) ** 2
        return np.where(d <= 0, 1.0, np.where(d < self.ramp, edge, 0.0))

    def integral(self) -> float:
        return float(self.T + self.ramp)

    def rule(self, n: int = 64):
        """Gauss-Legendre on the two ramps and the plateau, ``n`` nodes shared by length."""
        lo, hi = self.support
        p = 0.5 * self.T
        pieces = [(lo, self.center - p), (self.center - p, self.center + p), (self.center + p, hi)]
        total = hi - lo
        xs, ws = zip(*(_legendre(a, b, max(16, int(np.ceil(n * (b - a) / total)))) for a, b in pieces))
        x, w = np.concatenate(xs), np.concatenate(ws)
        return x, w * self(x)


# --- detector --------------------------------------------------------------------


@dataclass(frozen=True)
class DetectorSpec:
    """Gap, coupling, profiles and centre-of-mass worldline of one detector."""

    gap_omega: float
    coupling_lambda: float
    smearing: object
    switching: object
    worldline: Worldline | None = None

    def __post_init__(self):
        if not (np.isfinite(self.gap_omega) and self.gap_omega > 0):
            raise ValidationError(f"gap must be positive, got {self.gap_omega}")
        if not np.isfinite(self.coupling_lambda):
            raise ValidationError("coupling must be finite")

    def with_smearing(self, smearing) -> "DetectorSpec":
        return DetectorSpec(self.gap_omega, self.coupling_lambda, smearing, self.switching, self.worldline)


def free_hamiltonian(spec: DetectorSpec) -> TwoLevelOperator:
    return spec.gap_omega * (SIGMA_PLUS @ SIGMA_MINUS)


def monopole(spec: DetectorSpec, tau) -> TwoLevelOperator:
    phase = np.exp(1j * spec.gap_omega * float(tau))
    return phase * SIGMA_PLUS + np.conj(phase) * SIGMA_MINUS


def spacetime_smearing(spec: DetectorSpec):
    """``Lambda(tau, xbar) = chi(tau) f(xbar)``, zero outside the support box."""
    chi, f = spec.switching, spec.smearing

    def Lambda(tau, xbar):
        return np.asarray(chi(tau))[..., None] * f(xbar) if np.ndim(tau) else chi(tau) * f(xbar)

    return Lambda


def check_support(smearing, radius: float) -> None:
    if smearing.support_radius > radius * (1 + 1e-12):
        raise FermiChartError(
            f"smearing support reaches |xbar| = {smearing.support_radius:.4g}, beyond the validity radius {radius:.4g}"
        )


def smearing_moments(spec: DetectorSpec, exp, measure: str = "spatial", validity_radius=None, n=None):
    """Monopole, dipole and quadrupole moments of the smearing.

    ``measure="spatial"`` weights by the second-order ``sqrt(g_Sigma)``;
    ``measure="flat"`` drops it (the truncation used for correction terms).
    """
    from .fermi import sqrt_det_spatial

    radius = exp.validity_radius() if validity_radius is None else validity_radius
    check_support(spec.smearing, radius)
    rule = spec.smearing.rule() if n is None else spec.smearing.rule(n)
    x = rule.nodes
    if measure == "spatial":
        w = rule.weights * sqrt_det_spatial(exp, x, np.inf)
    elif measure == "flat":
        w = rule.weights
    else:
        raise ValidationError(f"unknown measure {measure!r}")
    M0 = float(np.sum(w))
    M1 = w @ x
    M2 = np.einsum("n,ni,nj->ij", w, x, x)
    return M0, M1, 0.5 * (M2 + M2.T)

"""Metric fields, Levi-Civita connection and Riemann curvature.

Conventions: signature (-,+,+,+); ``dg[r, m, n]`` is the partial
derivative of ``g[m, n]`` with respect to coordinate ``r``;
``gamma[m, n, r]`` is the connection coefficient with upper index ``m``;

    R^m_{n r s} = d_r Gamma^m_{n s} - d_s Gamma^m_{n r}
                  + Gamma^m_{r l} Gamma^l_{n s} - Gamma^m_{s l} Gamma^l_{n r}

so that a static observer in Schwarzschild sees R_{t r t r} = -2M/r^3 in
its orthonormal frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ChartDomainError, OrthonormalityError, SingularMetricError

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])
_EPS = np.finfo(float).eps


def _always(x):
    return True


def fd_step(x):
    """Per-coordinate central-difference step ``eps**(1/3) * max(1, |x|)``."""
    return _EPS ** (1.0 / 3.0) * np.maximum(1.0, np.abs(x))


@dataclass(frozen=True)
class MetricField:
    """A 4-dimensional Lorentzian metric on one coordinate chart.

    ``derivative_fn(x)`` returns ``dg[r, m, n]`` and ``second_derivative_fn(x)``
    returns ``d2g[r, s, m, n]``; either may be omitted, in which case central
    finite differences are used (nested for second derivatives).
    """

    component_fn: Callable[[np.ndarray], np.ndarray]
    derivative_fn: Callable[[np.ndarray], np.ndarray] | None = None
    second_derivative_fn: Callable[[np.ndarray], np.ndarray] | None = None
    chart_domain: Callable[[np.ndarray], bool] = _always
    name: str = "custom"
    params: dict = field(default_factory=dict)
    coordinates: tuple = ("x0", "x1", "x2", "x3")
    flat: bool = False

    dimension = 4

    def check_domain(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (4,) or not np.all(np.isfinite(x)):
            raise ChartDomainError(f"bad coordinate vector {x!r}")
        if not self.chart_domain(x):
            raise ChartDomainError(f"point {x} is outside the chart of {self.name}")
        return x

    def g(self, x):
        x = self.check_domain(x)
        return np.asarray(self.component_fn(x), dtype=float)

    def inverse(self, x):
        g = self.g(x)
        if not np.isfinite(np.linalg.cond(g)) or np.linalg.cond(g) > 1e14:
            raise SingularMetricError(f"metric not invertible at {x}")
        return np.linalg.inv(g)

    def dg(self, x):
        x = self.check_domain(x)
        if self.derivative_fn is not None:
            return np.asarray(self.derivative_fn(x), dtype=float)
        return _central(self.g, x)

    def d2g(self, x):
        x = self.check_domain(x)
        if self.second_derivative_fn is not None:
            return np.asarray(self.second_derivative_fn(x), dtype=float)
        out = _central(self.dg, x)
        # symmetrise the two derivative slots; FD leaves O(h^2) asymmetry
        return 0.5 * (out + out.transpose(1, 0, 2, 3))

    def fd_dg(self, x):
        """Finite-difference first derivatives, ignoring ``derivative_fn``."""
        return _central(self.g, self.check_domain(x))


def _central(fn, x):
    h = fd_step(x)
    rows = []
    for r in range(4):
        step = np.zeros(4)
        step[r] = h[r]
        rows.append((fn(x + step) - fn(x - step)) / (2 * h[r]))
    return np.array(rows)


def christoffel(metric: MetricField, x) -> np.ndarray:
    """Connection coefficients ``gamma[m, n, r]`` = Gamma^m_{n r} at ``x``."""
    ginv = metric.inverse(x)
    dg = metric.dg(x)
    # lowered[l, n, r] = 1/2 (d_n g_lr + d_r g_ln - d_l g_nr)
    lowered = 0.5 * (np.einsum("nlr->lnr", dg) + np.einsum("rln->lnr", dg) - dg)
    return np.einsum("ml,lnr->mnr", ginv, lowered)


def christoffel_derivative(metric: MetricField, x) -> np.ndarray:
    """Partial derivatives ``dgamma[s, m, n, r]`` = d_s Gamma^m_{n r}."""
    ginv = metric.inverse(x)
    dg = metric.dg(x)
    d2g = metric.d2g(x)
    lowered = 0.5 * (np.einsum("nlr->lnr", dg) + np.einsum("rln->lnr", dg) - dg)
    d_lowered = 0.5 * (
        np.einsum("snlr->slnr", d2g) + np.einsum("srln->slnr", d2g) - d2g
    )
    d_ginv = -np.einsum("ma,sab,bl->sml", ginv, dg, ginv)
    return np.einsum("sml,lnr->smnr", d_ginv, lowered) + np.einsum("ml,slnr->smnr", ginv, d_lowered)


@dataclass(frozen=True)
class CurvatureAtPoint:
    riemann_lower: np.ndarray
    point: np.ndarray
    metric_at_point: np.ndarray

    def symmetry_residuals(self) -> dict:
        R = self.riemann_lower
        scale = max(1.0, np.max(np.abs(R)))
        return {
            "antisym_first": np.max(np.abs(R + R.transpose(1, 0, 2, 3))) / scale,
            "antisym_second": np.max(np.abs(R + R.transpose(0, 1, 3, 2))) / scale,
            "pair": np.max(np.abs(R - R.transpose(2, 3, 0, 1))) / scale,
            "bianchi": np.max(np.abs(R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2))) / scale,
        }

    def ricci(self) -> np.ndarray:
        ginv = np.linalg.inv(self.metric_at_point)
        return np.einsum("ac,abcd->bd", ginv, self.riemann_lower)

    def kretschmann(self) -> float:
        ginv = np.linalg.inv(self.metric_at_point)
        upper = np.einsum("ai,bj,ck,dl,ijkl->abcd", ginv, ginv, ginv, ginv, self.riemann_lower,
                          optimize=True)
        return float(np.einsum("abcd,abcd->", upper, self.riemann_lower))


def riemann_at(metric: MetricField, x) -> CurvatureAtPoint:
    x = metric.check_domain(x)
    gamma = christoffel(metric, x)
    dgamma = christoffel_derivative(metric, x)
    upper = (
        np.einsum("rmns->mnrs", dgamma)
        - np.einsum("smnr->mnrs", dgamma)
        + np.einsum("mrl,lns->mnrs", gamma, gamma)
        - np.einsum("msl,lnr->mnrs", gamma, gamma)
    )
    g = metric.g(x)
    return CurvatureAtPoint(np.einsum("am,mnrs->anrs", g, upper), x, g)


@dataclass(frozen=True)
class FrameCurvature:
    """Riemann components in an orthonormal frame; index 0 is the time leg."""

    components: np.ndarray

    @property
    def tidal(self) -> np.ndarray:
        """R_{tau i tau j}, a symmetric 3x3 block."""
        return self.components[0, 1:, 0, 1:]

    @property
    def tau_kij(self) -> np.ndarray:
        """R_{tau k i j} indexed ``[k, i, j]``."""
        return self.components[0, 1:, 1:, 1:]

    @property
    def spatial(self) -> np.ndarray:
        """R_{i j k l} indexed in natural order."""
        return self.components[1:, 1:, 1:, 1:]

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.components)))


def gram(legs: np.ndarray, g: np.ndarray) -> np.ndarray:
    return legs @ g @ legs.T


def gram_schmidt(g: np.ndarray, vectors) -> np.ndarray:
    """Orthonormalise ``vectors`` (rows, first one timelike) against ``g``.

    Returns an array of legs, one per input vector (at most four).  Two projection passes are made so the
    result is orthonormal to rounding error.  Raises
    :class:`OrthonormalityError` for degenerate input.
    """
    vs = [np.asarray(v, dtype=float) for v in vectors]
    if not 1 <= len(vs) <= 4:
        raise OrthonormalityError("need one to four vectors")
    signs = np.diag(ETA)
    legs = []
    for i, v in enumerate(vs):
        w = v.copy()
        for _ in range(2):
            for j, e in enumerate(legs):
                w = w - signs[j] * (e @ g @ w) * e
        norm2 = w @ g @ w
        if norm2 * signs[i] <= 1e-12 * max(1.0, abs(v @ g @ v)):
            kind = "timelike" if i == 0 else "spacelike and independent"
            raise OrthonormalityError(f"vector {i} is not {kind}")
        legs.append(w / np.sqrt(abs(norm2)))
    return np.array(legs)


def frame_components(curv: CurvatureAtPoint, tetrad, tol=1e-8) -> FrameCurvature:
    """Project ``curv`` onto an orthonormal tetrad.

    ``tetrad`` is a :class:`~fermi_detector.worldline.Tetrad` or a 4x4
    array whose rows are the legs (time leg first) in coordinate
    components.
    """
    legs = np.asarray(getattr(tetrad, "legs", tetrad), dtype=float)
    dev = np.max(np.abs(gram(legs, curv.metric_at_point) - ETA))
    if dev > tol:
        raise OrthonormalityError(f"tetrad Gram matrix deviates from eta by {dev:.3e}")
    comps = np.einsum("am,bn,cr,ds,mnrs->abcd", legs, legs, legs, legs, curv.riemann_lower,
                      optimize=True)
    return FrameCurvature(comps)

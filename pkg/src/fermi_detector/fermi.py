"""Fermi normal coordinates around a worldline.

Two independent routes to the metric in Fermi coordinates ``(tau, xbar)``:

* the closed-form second-order expansion in the proper acceleration and
  the frame components of the Riemann tensor on the curve
  (:func:`metric_second_order` and the volume-element series), and
* a numerical construction of the chart itself by shooting spacelike
  geodesics off the curve (:func:`exponential_map`,
  :func:`numeric_fermi_metric`), used as a test oracle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import FermiChartError, ValidationError
from .geometry import (
    MetricField,
    christoffel,
    christoffel_derivative,
    frame_components,
    riemann_at,
)
from .numerics import integrate_ode
from .worldline import Tetrad, Worldline, _kinematics

__all__ = [
    "fit_slopes",
    "FermiExpansion",
    "FermiPoint",
    "expansion_coefficients",
    "metric_second_order",
    "sqrt_det_spatial",
    "sqrt_det_full",
    "sqrt_det_ratio",
    "exponential_map",
    "geodesic_solution",
    "geodesic_length",
    "numeric_fermi_metric",
    "convergence_table",
    "write_oracle_csv",
    "COMPONENTS",
]

VALIDITY_FACTOR = 0.1


@dataclass(frozen=True)
class FermiExpansion:
    """Coefficients of the second-order Fermi-coordinate metric at one proper time.

    ``accel[i]`` is a_i, ``tidal[i, j]`` is R_{tau i tau j},
    ``tau_kij[k, i, j]`` is R_{tau k i j} and ``spatial[i, j, k, l]`` is
    R_{ijkl}, all in the Fermi-Walker frame.
    """

    tau: float
    accel: np.ndarray
    tidal: np.ndarray
    tau_kij: np.ndarray
    spatial: np.ndarray
    base_tetrad: Tetrad | None = None

    @classmethod
    def synthetic(cls, accel=(0.0, 0.0, 0.0), tidal=None, tau_kij=None, spatial=None, tau=0.0):
        """Expansion with user-chosen coefficients (zero where omitted)."""
        return cls(
            float(tau),
            np.asarray(accel, dtype=float),
            np.zeros((3, 3)) if tidal is None else np.asarray(tidal, dtype=float),
            np.zeros((3, 3, 3)) if tau_kij is None else np.asarray(tau_kij, dtype=float),
            np.zeros((3, 3, 3, 3)) if spatial is None else np.asarray(spatial, dtype=float),
        )

    @property
    def is_flat(self) -> bool:
        return not (np.any(self.tidal) or np.any(self.tau_kij) or np.any(self.spatial))

    def curvature_radius(self) -> float:
        """Inverse square root of the largest curvature scale, independent of the triad.

        Each block is read as a matrix (the ``ij`` pairs as bivectors) and
        measured by its spectral norm, so a rotation of the triad leaves the
        result unchanged.  In a frame diagonalising the curvature this is
        the largest component.
        """
        ii, jj = (0, 0, 1), (1, 2, 2)
        blocks = (self.tidal, self.tau_kij[:, ii, jj], self.spatial[ii, jj][:, ii, jj])
        biggest = max(float(np.linalg.norm(b, 2)) for b in blocks)
        return float("inf") if biggest == 0 else float(biggest ** -0.5)

    def length_scale(self) -> float:
        """``min(curvature radius, 1/|a|)``; infinite for inertial motion in flat space."""
        a = np.linalg.norm(self.accel)
        return min(self.curvature_radius(), float("inf") if a == 0 else 1.0 / a)

    def validity_radius(self, factor: float = VALIDITY_FACTOR) -> float:
        return factor * self.length_scale()

    def ricci_spatial(self) -> np.ndarray:
        """``sum_k R_{k i k j}``, the combination entering det(g_ij)."""
        return np.einsum("kikj->ij", self.spatial)

    def rotated(self, rotation) -> "FermiExpansion":
        """Coefficients in the triad ``e'_i = O_ij e_j``."""
        O = np.asarray(rotation, dtype=float)
        return replace(
            self,
            accel=O @ self.accel,
            tidal=O @ self.tidal @ O.T,
            tau_kij=np.einsum("ka,ib,jc,abc->kij", O, O, O, self.tau_kij),
            spatial=np.einsum("ia,jb,kc,ld,abcd->ijkl", O, O, O, O, self.spatial, optimize=True),
            base_tetrad=None,
        )


@dataclass(frozen=True)
class FermiPoint:
    tau: float
    xbar: np.ndarray

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.xbar))


def _xbar(p, radius):
    x = np.asarray(getattr(p, "xbar", p), dtype=float)
    if x.shape[-1] != 3:
        raise ValidationError("Fermi spatial coordinates must have a trailing axis of length 3")
    r = np.linalg.norm(x, axis=-1)
    if radius is not None and np.any(r > radius * (1 + 1e-12)):
        raise FermiChartError(f"|xbar| = {np.max(r):.4g} exceeds the validity radius {radius:.4g}")
    return x


def _radius(exp, validity_radius):
    return exp.validity_radius() if validity_radius is None else validity_radius


def expansion_coefficients(metric: MetricField, w: Worldline, tetrad: Tetrad, tau=None) -> FermiExpansion:
    """Expansion coefficients on the curve at the tetrad's base point.

    ``tetrad`` must already be Fermi-Walker transported to ``tau``.
    """
    if tau is not None and not np.isclose(tau, tetrad.tau, rtol=0, atol=1e-12 * max(1.0, abs(tau))):
        raise ValidationError(f"tetrad is at tau={tetrad.tau}, not {tau}")
    _, _, a, _, g, _ = _kinematics(w, tetrad.lam)
    accel = tetrad.spatial @ g @ a
    frame = frame_components(riemann_at(metric, tetrad.base_point), tetrad)
    return FermiExpansion(tetrad.tau, accel, frame.tidal.copy(), frame.tau_kij.copy(),
                          frame.spatial.copy(), tetrad)


def metric_second_order(exp: FermiExpansion, xbar, validity_radius=None) -> np.ndarray:
    """Second-order Fermi-coordinate metric, shape ``(..., 4, 4)``, index 0 = tau."""
    x = _xbar(xbar, _radius(exp, validity_radius))
    ax = x @ exp.accel
    out = np.zeros(x.shape[:-1] + (4, 4))
    out[..., 0, 0] = -(1 + 2 * ax + ax**2 + np.einsum("...i,ij,...j->...", x, exp.tidal, x))
    g_ti = -(2.0 / 3.0) * np.einsum("kij,...k,...j->...i", exp.tau_kij, x, x)
    out[..., 0, 1:] = g_ti
    out[..., 1:, 0] = g_ti
    out[..., 1:, 1:] = np.eye(3) - np.einsum("ikjl,...k,...l->...ij", exp.spatial, x, x) / 3.0
    return out


def sqrt_det_spatial(exp: FermiExpansion, xbar, validity_radius=None):
    x = _xbar(xbar, _radius(exp, validity_radius))
    return 1 - np.einsum("...i,ij,...j->...", x, exp.ricci_spatial(), x) / 6.0


def sqrt_det_full(exp: FermiExpansion, xbar, validity_radius=None):
    x = _xbar(xbar, _radius(exp, validity_radius))
    quad = exp.tidal - exp.ricci_spatial() / 3.0
    return 1 + x @ exp.accel + 0.5 * np.einsum("...i,ij,...j->...", x, quad, x)


def sqrt_det_ratio(exp: FermiExpansion, xbar, validity_radius=None):
    """``sqrt(-g) / sqrt(g_Sigma)`` to second order: the covariant/non-covariant measure factor."""
    x = _xbar(xbar, _radius(exp, validity_radius))
    return 1 + x @ exp.accel + 0.5 * np.einsum("...i,ij,...j->...", x, exp.tidal, x)


# --- numerical chart --------------------------------------------------------


def _default_exp_radius(metric, tetrad):
    frame = frame_components(riemann_at(metric, tetrad.base_point), tetrad)
    biggest = frame.max_abs()
    return float("inf") if biggest == 0 else VALIDITY_FACTOR * biggest ** -0.5


def _geodesic_rhs(metric, n_var=0):
    """Geodesic equation, optionally with ``n_var`` linearised variations appended."""

    def rhs(s, y):
        x, v = y[:4], y[4:8]
        gamma = christoffel(metric, x)
        dv = -np.einsum("mab,a,b->m", gamma, v, v)
        if not n_var:
            return np.concatenate([v, dv])
        dgamma = christoffel_derivative(metric, x)
        var = y[8:].reshape(n_var, 2, 4)
        dx, dvv = var[:, 0], var[:, 1]
        ddv = -np.einsum("smab,ks,a,b->km", dgamma, dx, v, v) - 2 * np.einsum("mab,a,kb->km", gamma, v, dvv)
        return np.concatenate([v, dv, np.stack([dvv, ddv], axis=1).ravel()])

    return rhs


def geodesic_solution(metric: MetricField, tetrad: Tetrad, xbar, rel_tol=1e-13, abs_tol=1e-15):
    """Dense solution ``(x(s), v(s))`` of the geodesic with tangent ``xbar^i e_i``, ``s`` in [0, 1]."""
    x = np.asarray(xbar, dtype=float)
    v0 = x @ tetrad.spatial
    y0 = np.concatenate([tetrad.base_point, v0])
    return integrate_ode(_geodesic_rhs(metric), y0, 0.0, 1.0, rel_tol, abs_tol)


def exponential_map(metric: MetricField, tetrad: Tetrad, xbar, validity_radius=None,
                    rel_tol=1e-13, abs_tol=1e-15) -> np.ndarray:
    """Coordinates of the point ``exp_{z(tau)}(xbar^i e_i)``."""
    radius = _default_exp_radius(metric, tetrad) if validity_radius is None else validity_radius
    x = _xbar(xbar, radius)
    if not np.any(x):
        return tetrad.base_point.copy()
    return geodesic_solution(metric, tetrad, x, rel_tol, abs_tol).final[:4]


def geodesic_length(metric: MetricField, solution, n=64) -> float:
    """Metric length of a spacelike geodesic solution, by Gauss-Legendre quadrature."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (nodes + 1) * (solution.t1 - solution.t0) + solution.t0
    total = 0.0
    for si, wi in zip(s, weights):
        y = solution(si)
        total += wi * np.sqrt(y[4:8] @ metric.g(y[:4]) @ y[4:8])
    return 0.5 * (solution.t1 - solution.t0) * total


def _tetrad_at(family, tau):
    if isinstance(family, Tetrad):
        if not np.isclose(family.tau, tau, rtol=0, atol=1e-12):
            raise ValidationError("a single tetrad only serves its own proper time; pass a transport path")
        return family
    return family(tau)


def numeric_fermi_metric(metric: MetricField, w: Worldline, tetrad_family, p: FermiPoint,
                         h: float = 1e-4, method: str = "jacobi", validity_radius=None,
                         rel_tol=1e-13, abs_tol=1e-15) -> np.ndarray:
    """Metric at ``p`` in the Fermi chart built by geodesic shooting.

    ``method="jacobi"`` pushes the coordinate basis forward with the
    linearised geodesic equation (exact derivatives of the exponential
    map, the tau-derivative seeded by the Fermi-Walker law).
    ``method="fd"`` uses central differences of :func:`exponential_map`
    with step ``h`` in both ``tau`` and ``xbar`` and needs a transport path
    as ``tetrad_family``.
    """
    tetrad = _tetrad_at(tetrad_family, p.tau)
    if validity_radius is None:
        validity_radius = expansion_coefficients(metric, w, tetrad).validity_radius()
    x = _xbar(p, validity_radius)

    if method == "jacobi":
        _, u, a, gamma, g0, _ = _kinematics(w, tetrad.lam)
        e = tetrad.spatial
        de = -np.einsum("mab,a,kb->km", gamma, u, e) + np.outer(e @ g0 @ a, u)
        var0 = np.zeros((4, 2, 4))
        var0[0, 0] = u
        var0[0, 1] = x @ de
        var0[1:, 1] = e
        y0 = np.concatenate([tetrad.base_point, x @ e, var0.ravel()])
        sol = integrate_ode(_geodesic_rhs(metric, 4), y0, 0.0, 1.0, rel_tol, abs_tol)
        end = sol.final
        point = end[:4]
        J = end[8:].reshape(4, 2, 4)[:, 0]
    elif method == "fd":
        if h <= 0:
            raise ValidationError("finite-difference step must be positive")

        def pmap(tau, xb):
            return exponential_map(metric, _tetrad_at(tetrad_family, tau), xb, np.inf, rel_tol, abs_tol)

        point = pmap(p.tau, x)
        cols = [(pmap(p.tau + h, x) - pmap(p.tau - h, x)) / (2 * h)]
        for i in range(3):
            step = np.zeros(3)
            step[i] = h
            cols.append((pmap(p.tau, x + step) - pmap(p.tau, x - step)) / (2 * h))
        J = np.array(cols)
    else:
        raise ValidationError(f"unknown method {method!r}")

    gbar = J @ metric.g(point) @ J.T
    if np.linalg.det(gbar[1:, 1:]) < 1e-6:
        raise FermiChartError("exponential map is close to a caustic at this point")
    return gbar


# --- convergence study --------------------------------------------------------

COMPONENTS = ("g_tautau", "g_tau1", "g_tau2", "g_tau3", "g_11", "g_12", "g_13", "g_22", "g_23", "g_33",
              "sqrt_det_spatial", "sqrt_det_full", "sqrt_det_ratio")
_INDEX = {"g_tautau": (0, 0), "g_tau1": (0, 1), "g_tau2": (0, 2), "g_tau3": (0, 3),
          "g_11": (1, 1), "g_12": (1, 2), "g_13": (1, 3), "g_22": (2, 2), "g_23": (2, 3), "g_33": (3, 3)}


def _scalars(gbar):
    det_s = np.linalg.det(gbar[1:, 1:])
    det_f = np.linalg.det(gbar)
    return {"sqrt_det_spatial": np.sqrt(det_s), "sqrt_det_full": np.sqrt(-det_f),
            "sqrt_det_ratio": np.sqrt(-det_f / det_s)}


def convergence_table(metric: MetricField, w: Worldline, tetrad_family, direction, radii,
                      tau: float = 0.0, method: str = "jacobi", validity_radius=None,
                      exp: FermiExpansion | None = None) -> list[dict]:
    """Rows ``(r, component, numeric, expansion, residual)`` along one direction."""
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    tetrad = _tetrad_at(tetrad_family, tau)
    if exp is None:
        exp = expansion_coefficients(metric, w, tetrad)
    radius = exp.validity_radius() if validity_radius is None else validity_radius
    rows = []
    for r in radii:
        x = r * n
        num = numeric_fermi_metric(metric, w, tetrad_family, FermiPoint(tau, x), method=method,
                                   validity_radius=radius)
        ser = metric_second_order(exp, x, radius)
        numeric = {c: num[_INDEX[c]] for c in _INDEX} | _scalars(num)
        series = {c: ser[_INDEX[c]] for c in _INDEX}
        series["sqrt_det_spatial"] = sqrt_det_spatial(exp, x, radius)
        series["sqrt_det_full"] = sqrt_det_full(exp, x, radius)
        series["sqrt_det_ratio"] = sqrt_det_ratio(exp, x, radius)
        for c in COMPONENTS:
            rows.append({"r": float(r), "component": c, "numeric": float(numeric[c]),
                         "expansion": float(series[c]),
                         "residual": float(numeric[c] - series[c])})
    return rows


def write_oracle_csv(path, rows, length_unit="geometric length") -> None:
    """Write convergence rows as CSV with a units header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"r [{length_unit}]", "component", "numeric [1]", "expansion [1]", "residual [1]"])
        for row in rows:
            writer.writerow([repr(row["r"]), row["component"], repr(row["numeric"]),
                             repr(row["expansion"]), repr(row["residual"])])


def fit_slopes(rows, floor: float = 1e-13, min_points: int = 3) -> dict:
    """Log-log slope of ``|residual|`` against ``r`` for each component.

    Residuals below ``floor * max(1, |numeric|)`` are at roundoff and are
    dropped; a component with fewer than ``min_points`` usable radii maps to
    ``None``.
    """
    out = {}
    for c in dict.fromkeys(row["component"] for row in rows):
        pts = [(row["r"], abs(row["residual"])) for row in rows if row["component"] == c
               and abs(row["residual"]) > floor * max(1.0, abs(row["numeric"]))]
        if len(pts) < min_points:
            out[c] = None
            continue
        r, res = np.log(np.array(pts)).T
        out[c] = float(np.polyfit(r, res, 1)[0])
    return out

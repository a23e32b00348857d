"""Covariant and non-covariant interaction-Hamiltonian weights.

Both prescriptions share the operator kernel ``lambda mu(tau) phi(xbar)``;
they differ only in the c-number measure that multiplies it on each rest
space: ``Lambda sqrt(-g)`` (covariant) against ``chi f sqrt(g_Sigma)``
(non-covariant).  Everything here therefore works with scalar weights.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .detector import DetectorSpec, check_support, smearing_moments
from .errors import ValidationError
from .fermi import FermiExpansion, expansion_coefficients, sqrt_det_full, sqrt_det_spatial
from .geometry import MetricField
from .worldline import ProperTimeMap, Worldline, _kinematics, _lambda_at

__all__ = [
    "ExpansionFamily",
    "HamiltonianWeight",
    "ComparisonReport",
    "reparam_factor",
    "build_weight",
    "multipole_decomposition",
    "hamiltonian_difference",
    "write_reports_csv",
    "magnitude_estimate",
    "threshold_acceleration",
    "lhc_acceleration",
    "solar_horizon_curvature_radius",
    "C_SI",
    "G_EARTH",
]

C_SI = 299_792_458.0
G_EARTH = 9.80665
GM_SUN = 1.32712440018e20  # m^3 s^-2


class ExpansionFamily:
    """Expansion coefficients as a function of proper time.

    Build with :meth:`constant` (fixed or synthetic coefficients) or
    :meth:`along` (evaluated on a Fermi-Walker transported tetrad path).
    ``validity_factor`` scales the validity radius; ``validity_radius``
    overrides it outright (``np.inf`` disables the guard).
    """

    def __init__(self, fn, constant=False, validity_factor=0.1, validity_radius=None):
        self._fn = lru_cache(maxsize=256)(fn)
        self.is_constant = constant
        self.validity_factor = validity_factor
        self._radius = validity_radius

    @classmethod
    def constant(cls, exp: FermiExpansion, **kw) -> "ExpansionFamily":
        return cls(lambda tau: replace_tau(exp, tau), constant=True, **kw)

    @classmethod
    def along(cls, metric: MetricField, w: Worldline, path, **kw) -> "ExpansionFamily":
        return cls(lambda tau: expansion_coefficients(metric, w, path(tau)), **kw)

    def __call__(self, tau) -> FermiExpansion:
        return self._fn(float(tau))

    def validity_radius(self, tau) -> float:
        if self._radius is not None:
            return self._radius
        return self(tau).validity_radius(self.validity_factor)


def replace_tau(exp: FermiExpansion, tau):
    return FermiExpansion(float(tau), exp.accel, exp.tidal, exp.tau_kij, exp.spatial, exp.base_tetrad)


def reparam_factor(w: Worldline, pmap: ProperTimeMap | None, tau: float, t_coordinate=0) -> float:
    """``dtau/dt = 1/u^t`` on the worldline.

    ``t_coordinate`` is either the index of the chart's time coordinate or
    a scalar function ``t(x)`` of the coordinates, differentiated by
    central differences.
    """
    lam = _lambda_at(w, tau, pmap)
    x, u, *_ = _kinematics(w, lam)
    if callable(t_coordinate):
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        grad = np.array([(t_coordinate(x + h[i] * e) - t_coordinate(x - h[i] * e)) / (2 * h[i])
                         for i, e in enumerate(np.eye(4))])
        ut = grad @ u
    else:
        ut = u[int(t_coordinate)]
    if not ut > 0:
        raise ValidationError(f"u^t = {ut} is not positive: lab time is not future-directed along the detector")
    return float(1.0 / ut)


@dataclass(frozen=True)
class HamiltonianWeight:
    kind: str
    detector: DetectorSpec
    expansion: ExpansionFamily

    def __post_init__(self):
        if self.kind not in ("covariant", "noncovariant"):
            raise ValidationError(f"kind must be 'covariant' or 'noncovariant', got {self.kind!r}")

    def measure(self, tau, xbar):
        exp = self.expansion(tau)
        fn = sqrt_det_full if self.kind == "covariant" else sqrt_det_spatial
        return fn(exp, xbar, np.inf)

    def scalar_density(self, tau, xbar):
        """The c-number factor multiplying ``lambda mu(tau) phi(xbar)``."""
        check_support(self.detector.smearing, self.expansion.validity_radius(tau))
        chi = self.detector.switching(tau)
        return chi * self.detector.smearing(xbar) * self.measure(tau, xbar)

    def sheet_integral(self, tau, n=None) -> float:
        """``int d^3xbar`` of the scalar density on the rest space at ``tau``."""
        check_support(self.detector.smearing, self.expansion.validity_radius(tau))
        rule = self.detector.smearing.rule() if n is None else self.detector.smearing.rule(n)
        return float(self.detector.switching(tau) * rule.integrate(self.measure(tau, rule.nodes)))


def build_weight(det: DetectorSpec, kind: str, family: ExpansionFamily, n_check: int = 9) -> HamiltonianWeight:
    """Weight of the given prescription, after checking the support at sampled times.

    For a non-constant family the validity radius is checked at ``n_check``
    equally spaced proper times across the switching support.
    """
    lo, hi = det.switching.support
    taus = [0.5 * (lo + hi)] if family.is_constant else np.linspace(lo, hi, n_check)
    for tau in taus:
        check_support(det.smearing, family.validity_radius(tau))
    return HamiltonianWeight(kind, det, family)


@dataclass(frozen=True)
class ComparisonReport:
    """Multipole terms of the covariant weight relative to the non-covariant one.

    ``difference`` is ``covariant - noncovariant`` to second order.  In a
    t-frame report every term already carries ``reparam_factor``.
    """

    tau: float
    monopole_term: float
    dipole_term: float
    quadrupole_term: float
    relative_correction: float
    reparam_factor: float
    remainder_bound: float
    frame: str = "tau"

    @property
    def difference(self) -> float:
        return self.dipole_term + self.quadrupole_term

    def scalars(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "frame"}

    def to_record(self) -> dict:
        return {"tau": self.tau, "monopole": self.monopole_term, "dipole": self.dipole_term,
                "quadrupole": self.quadrupole_term, "relative": self.relative_correction,
                "reparam": self.reparam_factor, "remainder_bound": self.remainder_bound,
                "frame": self.frame}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def write_reports_csv(path, reports, length_unit="geometric") -> None:
    columns = ["tau", "monopole", "dipole", "quadrupole", "relative", "reparam", "remainder_bound", "frame"]
    units = [f"tau [{length_unit}]", "monopole [1]", "dipole [1]", "quadrupole [1]", "relative [1]",
             "reparam [1]", "remainder_bound [1]", "frame"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(units)
        for r in reports:
            rec = r.to_record()
            writer.writerow([rec[c] if c == "frame" else repr(float(rec[c])) for c in columns])


def _relative(mono, corr):
    if mono != 0:
        return abs(corr) / abs(mono)
    return 0.0 if corr == 0 else float("inf")


def multipole_decomposition(weight: HamiltonianWeight, exp: FermiExpansion | None, tau: float,
                            envelope_constant: float = 1.0) -> ComparisonReport:
    """Monopole, dipole and quadrupole coefficients of the covariant weight at ``tau``.

    The monopole uses the spatial volume element; the correction moments
    use the flat measure, consistent with truncating at second order.
    ``remainder_bound`` is ``chi * C * (r_max / l)**3`` with ``r_max`` the
    support radius and ``l = min(1/|a|, curvature radius)``.
    """
    det = weight.detector
    if exp is None:
        exp = weight.expansion(tau)
    radius = weight.expansion.validity_radius(tau)
    chi = float(det.switching(tau))
    M0, _, _ = smearing_moments(det, exp, "spatial", radius)
    _, M1, M2 = smearing_moments(det, exp, "flat", radius)
    mono = chi * M0
    dip = chi * float(exp.accel @ M1)
    quad = chi * 0.5 * float(np.einsum("ij,ij->", exp.tidal, M2))
    ell = exp.length_scale()
    rem = 0.0 if np.isinf(ell) else float(chi * envelope_constant * (det.smearing.support_radius / ell) ** 3)
    return ComparisonReport(float(tau), mono, dip, quad, _relative(mono, dip + quad), 1.0, rem)


def hamiltonian_difference(det: DetectorSpec, family: ExpansionFamily, tau: float,
                           t_coordinate=0, pmap: ProperTimeMap | None = None,
                           envelope_constant: float = 1.0) -> ComparisonReport:
    """Lab-time (t-frame) version of :func:`multipole_decomposition`.

    All terms are multiplied by ``dtau/dt`` taken on the detector's
    worldline.  When the expansion carries its transported tetrad, ``u`` is
    read from it; otherwise ``pmap`` locates ``tau`` on the worldline.
    """
    exp = family(tau)
    weight = HamiltonianWeight("covariant", det, family)
    rep = multipole_decomposition(weight, exp, tau, envelope_constant)
    if det.worldline is None:
        raise ValidationError("the detector needs a worldline for a lab-time comparison")
    if exp.base_tetrad is not None and not callable(t_coordinate):
        ut = exp.base_tetrad.u[int(t_coordinate)]
        if not ut > 0:
            raise ValidationError(f"u^t = {ut} is not positive")
        factor = float(1.0 / ut)
    else:
        factor = reparam_factor(det.worldline, pmap, tau, t_coordinate)
    return ComparisonReport(rep.tau, factor * rep.monopole_term, factor * rep.dipole_term,
                            factor * rep.quadrupole_term, rep.relative_correction, factor,
                            factor * rep.remainder_bound, "t")


# --- order-of-magnitude estimates -----------------------------------------------


def magnitude_estimate(size_m: float, acceleration_ms2: float | None = None,
                       curvature_radius_m: float | None = None) -> dict:
    """Dimensionless correction scales ``a L / c^2`` and ``(L / l_curv)^2`` in SI inputs."""
    if not size_m > 0:
        raise ValidationError("detector size must be positive")
    out = {"size_m": float(size_m)}
    if acceleration_ms2 is not None:
        if not acceleration_ms2 > 0:
            raise ValidationError("acceleration must be positive")
        out["dipole_scale"] = acceleration_ms2 * size_m / C_SI**2
    if curvature_radius_m is not None:
        if not curvature_radius_m > 0:
            raise ValidationError("curvature radius must be positive")
        out["quadrupole_scale"] = (size_m / curvature_radius_m) ** 2
    return out


def threshold_acceleration(size_m: float) -> float:
    """Acceleration in m/s^2 at which ``a L / c^2 = 1``."""
    if not size_m > 0:
        raise ValidationError("detector size must be positive")
    return C_SI**2 / size_m


def lhc_acceleration(beam_energy_ev: float = 6.5e12, ring_radius_m: float = 26_659.0 / (2 * np.pi),
                     rest_energy_ev: float = 938.272_088e6) -> dict:
    """Centripetal acceleration of a proton on a circle of the LHC's size.

    ``lab`` is ``v^2/R`` in the laboratory frame; ``proper`` is the proper
    acceleration ``gamma^2 v^2 / R`` felt by the proton.
    """
    gamma = beam_energy_ev / rest_energy_ev
    v = C_SI * np.sqrt(1 - 1 / gamma**2)
    lab = v * v / ring_radius_m
    return {"gamma": gamma, "lab": lab, "proper": gamma**2 * lab}


def solar_horizon_curvature_radius(solar_masses: float = 1.0) -> float:
    """Curvature radius in metres at the horizon of a Schwarzschild black hole.

    Evaluated from the catalog metric at ``r = 2M (1 + 1e-6)`` (the static
    frame is singular on the horizon itself; the offset changes the result
    by about 1e-6) in units of
    ``M``, then scaled by ``M = G M / c^2``.
    """
    from .spacetimes import SpacetimeId, curvature_radius

    mass_m = solar_masses * GM_SUN / C_SI**2
    ell = curvature_radius(SpacetimeId("schwarzschild", {"mass": 1.0}), np.array([0.0, 2.0 * (1 + 1e-6), np.pi / 2, 0.0]))
    return float(ell * mass_m)

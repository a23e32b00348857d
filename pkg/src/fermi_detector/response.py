"""First-order detector response to a free scalar field in Minkowski space.

The amplitude for the transition ``|g, 0> -> |e, 1_k>`` is

    A(k) = -i lambda int dtau d^3xbar  m(tau, xbar) chi(tau) f(xbar)
           e^{i Omega tau} e^{i (omega X^0 - k . X)} / sqrt((2 pi)^3 2 omega)

with ``X(tau, xbar) = z(tau) + xbar^i e_i(tau)`` the flat-space Fermi chart
and ``m`` the measure of the chosen prescription.  The lab chart must be
the inertial Minkowski chart; the tetrad legs come from Fermi-Walker
transport along the worldline.

``P = int d^3k |A|^2`` is integrated as a radial integral of angular
averages.  The angular rule is Clenshaw-Curtis in ``cos theta`` times the
trapezoid rule in ``phi``; both are nested, so the half-resolution rule
rides along for free and supplies the angular error estimate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .detector import DetectorSpec
from .errors import NumericalError, ValidationError
from .fermi import FermiExpansion, sqrt_det_full, sqrt_det_spatial
from .hamiltonians import ExpansionFamily, HamiltonianWeight, build_weight
from .numerics import quad_adaptive
from .worldline import fw_span, initial_tetrad

__all__ = [
    "FieldSpec",
    "KGridSpec",
    "ResponseResult",
    "PrescriptionComparison",
    "first_order_amplitude",
    "excitation_probability",
    "compare_prescriptions",
    "detector_frame",
    "clenshaw_curtis",
]


@dataclass(frozen=True)
class FieldSpec:
    """Free real scalar field of mass ``mass`` in its Minkowski vacuum."""

    mass: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.mass) and self.mass >= 0):
            raise ValidationError("field mass must be non-negative")

    def omega(self, k):
        return np.sqrt(np.asarray(k, dtype=float) ** 2 + self.mass**2)


@dataclass(frozen=True)
class KGridSpec:
    """Settings of the momentum-space integration.

    ``n_theta`` (odd) and ``n_phi`` (even) set the starting angular rule;
    it is refined by doubling up to ``max_refinements`` times until the
    nested half-rule agrees to ``rel_tol``.  The radial integral runs over
    chunks of growing width until a chunk contributes less than
    ``tail_tol`` of the running total.
    """

    rel_tol: float = 1e-9
    n_theta: int = 9
    n_phi: int = 8
    max_refinements: int = 3
    spatial_order: int = 8
    temporal_order: int | None = None
    tail_tol: float | None = None
    max_chunks: int = 40
    polar_axis: tuple | None = None

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be positive")
        if self.n_theta < 3 or self.n_theta % 2 == 0:
            raise ValidationError("n_theta must be odd and at least 3")
        if self.n_phi < 2 or self.n_phi % 2:
            raise ValidationError("n_phi must be even and at least 2")

    def refined(self) -> "KGridSpec":
        return KGridSpec(**{**self.__dict__, "n_theta": 2 * self.n_theta - 1, "n_phi": 2 * self.n_phi})


@dataclass(frozen=True)
class ResponseResult:
    probability: float
    prescription: str
    integration_error: float
    params: dict = field(default_factory=dict)
    converged: bool = True

    def to_json(self) -> str:
        return json.dumps({"probability": self.probability, "prescription": self.prescription,
                           "integration_error": self.integration_error, "converged": self.converged,
                           "params": self.params}, sort_keys=True)


@dataclass(frozen=True)
class PrescriptionComparison:
    p_cov: float
    p_noncov: float
    delta_p: float
    relative: float
    error_cov: float
    error_noncov: float
    error_delta: float
    inconclusive: bool
    identical_measures: bool
    params: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"P_cov": self.p_cov, "P_noncov": self.p_noncov, "dP": self.delta_p,
                "dP_over_P": self.relative, "err_cov": self.error_cov, "err_noncov": self.error_noncov,
                "err_dP": self.error_delta, "inconclusive": self.inconclusive}


def clenshaw_curtis(n: int):
    """Clenshaw-Curtis nodes and weights on [-1, 1] (``n`` odd, nodes descending)."""
    N = n - 1
    k = np.arange(n)
    x = np.cos(np.pi * k / N)
    w = np.empty(n)
    for i in k:
        s = 0.0
        for j in range(1, N // 2 + 1):
            b = 1.0 if 2 * j == N else 2.0
            s += b / (4 * j * j - 1) * np.cos(2 * j * i * np.pi / N)
        c = 1.0 if i in (0, N) else 2.0
        w[i] = c / N * (1 - s)
    return x, w


def _angular_rules(n_theta, n_phi, axis):
    """Unit directions and fine/coarse weights (coarse uses every other node)."""
    mu, wm = clenshaw_curtis(n_theta)
    muc, wmc = clenshaw_curtis((n_theta + 1) // 2)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(np.clip(1 - mu**2, 0, None))
    local = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                      np.outer(mu, np.ones(n_phi))], axis=-1).reshape(-1, 3)
    fine = np.outer(wm, np.full(n_phi, 2 * np.pi / n_phi)).ravel()
    coarse = np.zeros((n_theta, n_phi))
    coarse[::2, ::2] = np.outer(wmc, np.full(n_phi // 2, 4 * np.pi / n_phi))
    # rotate local z onto the polar axis
    z = np.asarray(axis, dtype=float)
    z = z / np.linalg.norm(z)
    helper = np.eye(3)[np.argmin(np.abs(z))]
    xa = np.cross(helper, z)
    xa /= np.linalg.norm(xa)
    ya = np.cross(z, xa)
    dirs = local @ np.array([xa, ya, z])
    return dirs, fine, coarse.ravel()


def detector_frame(det: DetectorSpec, path=None, tau0: float = 0.0):
    """Fermi-Walker transport of the default tetrad over the switching support.

    Returns a callable ``tau -> Tetrad`` covering the support with margin.
    """
    w = det.worldline
    if w is None:
        raise ValidationError("the detector needs a worldline")
    if path is not None:
        return path
    lo, hi = det.switching.support
    margin = 1e-3 * (hi - lo)
    start = initial_tetrad(w, tau0)
    return fw_span(start, w, min(lo, tau0) - margin, max(hi, tau0) + margin)


class _Kernel:
    """Quadrature nodes, lab positions and measures for one detector.

    The temporal rule is rebuilt (and cached) per order, because the
    number of nodes needed grows with the frequency ``Omega + omega``.
    """

    def __init__(self, det: DetectorSpec, family: ExpansionFamily, path, kinds, spatial_order,
                 temporal_order=None):
        w = det.worldline
        if w is None or w.metric.name != "minkowski-inertial":
            raise ValidationError("response is only available for worldlines in the inertial Minkowski chart")
        self.det, self.family, self.path = det, family, path
        self.gap = det.gap_omega
        self.coupling = det.coupling_lambda
        self.fixed_order = temporal_order
        self._cache = {}

        taus, _ = det.switching.rule(64)
        tets = [path(t) for t in taus]
        legs = np.array([t.legs for t in tets])
        # which spatial legs change along the switching support
        varying = [i for i in range(1, 4) if np.max(np.abs(legs[:, i] - legs[:1, i])) > 1e-12]
        exps = [family(t) for t in taus]
        ref = exps[len(exps) // 2]
        const_measure = family.is_constant or all(_same_expansion(e, ref) for e in exps)
        self.fast = const_measure and len(varying) <= 1
        self.axis = axis = varying[0] - 1 if varying else 0

        sm = det.smearing
        self.rule = rule = sm.rule() if sm.kind == "pointlike" else sm.rule(spatial_order, axis)
        self.kinds = kinds
        self.ref = ref

        # bound on d(phase)/d(tau) per unit omega, used to size the temporal rule
        u = legs[:, 0]
        accel = max(np.linalg.norm(e.accel) for e in exps)
        r_sup = sm.support_radius
        self.doppler = float(np.max(u[:, 0] + np.linalg.norm(u[:, 1:], axis=1)) * (1 + accel * r_sup))

        if self.fast:
            m = {k: self._measure(ref, k) * rule.weights for k in kinds}
            self.slices, inverse = np.unique(rule.nodes[:, axis], return_inverse=True)
            self.slice_sum = np.zeros((len(rule.weights), len(self.slices)))
            self.slice_sum[np.arange(len(inverse)), inverse] = 1.0
            # with no varying leg the tau sum factorises out of the slice phases
            self.static_legs = not varying
            rest = [i for i in range(3) if i != axis]
            self.x_rest = rule.nodes[:, rest]
            self.const_legs = legs[0, [r + 1 for r in rest]]
            self.m_static = m
            self.identical = "covariant" in kinds and "noncovariant" in kinds and not np.any(
                m["covariant"] - m["noncovariant"])
        else:
            self.identical = False

    def _measure(self, exp, kind):
        fn = sqrt_det_full if kind == "covariant" else sqrt_det_spatial
        return fn(exp, self.rule.nodes, np.inf)

    def order_for(self, omega_max):
        if self.fixed_order is not None:
            return self.fixed_order
        sw = self.det.switching
        beta = self.gap + omega_max * self.doppler
        if sw.kind == "gaussian":
            bt = beta * sw.T
            n = 0.75 * bt * bt + 20
        else:
            lo, hi = sw.support
            n = 0.5 * beta * (hi - lo) + 24
        return int(16 * np.ceil(max(n, 32) / 16))

    def _temporal(self, order):
        if order not in self._cache:
            taus, wt = self.det.switching.rule(order)
            tets = [self.path(t) for t in taus]
            legs = np.array([t.legs for t in tets])
            z = np.array([t.base_point for t in tets])
            m = None
            if not self.fast:
                exps = [self.family(t) for t in taus]
                m = {k: np.array([self._measure(e, k) for e in exps]) * self.rule.weights for k in self.kinds}
            self._cache[order] = (taus, wt, legs, z, m)
        return self._cache[order]

    def weights(self, name, order):
        m = self.m_static if self.fast else self._temporal(order)[4]
        if name == "delta":
            return m["covariant"] - m["noncovariant"]
        return m[name]

    def amplitudes(self, k_vecs, omega, names):
        """Amplitudes for each row of ``k_vecs`` under each measure in ``names``."""
        if self.det.switching.kind == "gaussian" and self.fixed_order is None:
            # beyond (Omega + omega) T = 27 the Gaussian factor is below 1e-150
            if (self.gap + np.min(omega) / self.doppler) * self.det.switching.T > 27:
                return [np.zeros(len(k_vecs), dtype=complex) for _ in names]
        order = self.order_for(float(np.max(omega)))
        taus, wt, legs, z, _ = self._temporal(order)
        k4 = np.concatenate([omega[:, None], -k_vecs], axis=1)  # k4 . X = omega X^0 - k . X
        norm = -1j * self.coupling / np.sqrt((2 * np.pi) ** 3 * 2 * omega)
        phase_t = np.exp(1j * (self.gap * taus[:, None] + z @ k4.T)).T * wt  # (K, T)
        if self.fast:
            if self.static_legs:
                Ea = k4 @ legs[0, self.axis + 1]  # (K,)
                T = phase_t.sum(axis=1)[:, None] * np.exp(1j * Ea[:, None] * self.slices[None, :])
            else:
                Ea = k4 @ legs[:, self.axis + 1].T  # (K, T)
                T = np.einsum("kt,kts->ks", phase_t, np.exp(1j * Ea[:, :, None] * self.slices[None, None, :]))
            trans = np.exp(1j * (k4 @ self.const_legs.T) @ self.x_rest.T)  # (K, N)
            out = []
            for name in names:
                S = (trans * self.weights(name, order)[None, :]) @ self.slice_sum  # (K, slices)
                out.append(norm * np.sum(T * S, axis=1))
            return out
        E = np.einsum("tim,km->kti", legs[:, 1:], k4)  # (K, T, 3)
        spatial = np.exp(1j * np.einsum("kti,ni->ktn", E, self.rule.nodes))  # (K, T, N)
        return [norm * np.einsum("kt,ktn,tn->k", phase_t, spatial, self.weights(name, order)) for name in names]


def _same_expansion(a: FermiExpansion, b: FermiExpansion, tol=1e-10):
    pairs = [(a.accel, b.accel), (a.tidal, b.tidal), (a.tau_kij, b.tau_kij), (a.spatial, b.spatial)]
    return all(np.max(np.abs(p - q)) <= tol * max(1.0, np.max(np.abs(q))) for p, q in pairs)


def _switch_scale(sw):
    lo, hi = sw.support
    return sw.T if sw.kind == "gaussian" else 0.25 * (hi - lo)


def _resolve_family(det, expansion, path):
    if expansion is None:
        return ExpansionFamily.along(det.worldline.metric, det.worldline, path)
    if isinstance(expansion, FermiExpansion):
        return ExpansionFamily.constant(expansion)
    return expansion


def first_order_amplitude(weight: HamiltonianWeight, field: FieldSpec, k, path=None,
                          spatial_order: int = 8, temporal_order: int | None = None):
    """Transition amplitude ``A(k)`` for one momentum (or an ``(n, 3)`` array of them)."""
    det = weight.detector
    path = detector_frame(det, path)
    k = np.asarray(k, dtype=float)
    kv = np.atleast_2d(k)
    omega = field.omega(np.linalg.norm(kv, axis=1))
    if np.any(omega == 0):
        raise ValidationError("the massless zero mode has no normalisable amplitude")
    kernel = _Kernel(det, weight.expansion, path, (weight.kind,), spatial_order, temporal_order)
    (amp,) = kernel.amplitudes(kv, omega, [weight.kind])
    return amp[0] if k.ndim == 1 else amp


def _k_scale(det, field):
    return 1.0 / _switch_scale(det.switching)


def _radial_integrals(kernel, field, kgrid, components, k_scale):
    """Integrate the radial densities of ``components`` over ``[0, inf)``.

    Returns (values, radial_errors, angular_errors, k_max, converged).
    Each component is a function ``(A_list) -> |.|`` of the amplitudes
    for the measures named in ``kernel.names``.
    """
    dirs, wf, wc = kernel.ang

    def density(kk):
        kk = np.asarray(kk, dtype=float).reshape(-1)
        out = np.zeros((kk.size, 2 * len(components)))
        for i, kr in enumerate(kk):
            om = np.full(len(dirs), field.omega(kr))
            if om[0] == 0:
                continue
            amps = kernel.amplitudes(kr * dirs, om, kernel.names)
            vals = np.array([c(amps) for c in components])  # (C, D)
            out[i, : len(components)] = kr * kr * (vals @ wf)
            out[i, len(components):] = kr * kr * (vals @ wc)
        return out

    # pass 1: fixed rule to find the tail and the component scales
    tail_tol = kgrid.tail_tol if kgrid.tail_tol is not None else 1e-3 * kgrid.rel_tol
    gl_x, gl_w = np.polynomial.legendre.leggauss(24)
    edges = [0.0]
    width = 2.0 * k_scale
    totals = np.zeros(2 * len(components))
    quiet = 0
    for _ in range(kgrid.max_chunks):
        a, b = edges[-1], edges[-1] + width
        xs = 0.5 * (b - a) * gl_x + 0.5 * (a + b)
        part = 0.5 * (b - a) * (gl_w @ density(xs))
        totals += part
        edges.append(b)
        small = np.abs(part[: len(components)]) <= tail_tol * np.maximum(np.abs(totals[: len(components)]), 1e-300)
        small |= part[: len(components)] == 0
        quiet = quiet + 1 if np.all(small) else 0
        if quiet >= 2:
            break
        width *= 1.5
    converged = quiet >= 2
    scales = np.where(totals != 0, np.abs(totals), 1.0)

    # pass 2: adaptive Gauss-Kronrod per chunk on normalised components
    values = np.zeros_like(totals)
    errors = np.zeros_like(totals)
    n_chunks = len(edges) - 1
    for a, b in zip(edges[:-1], edges[1:]):
        res = quad_adaptive(lambda x: density(x[:, 0]) / scales, a, b, rel_tol=kgrid.rel_tol,
                            abs_tol=kgrid.rel_tol / n_chunks)
        values += np.asarray(res.value) * scales
        errors += np.asarray(res.error_estimate) * scales
        converged &= res.converged
    fine, coarse = values[: len(components)], values[len(components):]
    return fine, errors[: len(components)], np.abs(fine - coarse), edges[-1], converged


def _integrate(kernel, field, kgrid, components, k_scale, axis):
    grid = kgrid
    for attempt in range(kgrid.max_refinements + 1):
        kernel.ang = _angular_rules(grid.n_theta, grid.n_phi, axis)
        vals, rad_err, ang_err, k_max, ok = _radial_integrals(kernel, field, grid, components, k_scale)
        if np.all(ang_err <= grid.rel_tol * np.maximum(np.abs(vals), 1e-300)) or attempt == kgrid.max_refinements:
            break
        grid = grid.refined()
    ang_ok = bool(np.all(ang_err <= grid.rel_tol * np.maximum(np.abs(vals), 1e-300)))
    return vals, rad_err + ang_err, k_max, grid, ok and ang_ok


def _params(det, field, grid, k_max, kernel):
    sm, sw = det.smearing, det.switching
    return {"gap": det.gap_omega, "coupling": det.coupling_lambda, "smearing": sm.kind,
            "size": sm.characteristic_size, "switching": sw.kind, "T": getattr(sw, "T", None),
            "field_mass": field.mass, "k_max": float(k_max), "n_theta": grid.n_theta, "n_phi": grid.n_phi,
            "rel_tol": grid.rel_tol, "fast_path": kernel.fast}


def _axis_for(path):
    t = path(0.0) if _covers(path, 0.0) else None
    a = None
    if t is not None:
        e1 = t.legs[1, 1:]
        a = e1 / np.linalg.norm(e1)
    return (0.0, 0.0, 1.0) if a is None else a


def _covers(path, tau):
    lo, hi = path.tau_range
    return lo <= tau <= hi


def excitation_probability(weight: HamiltonianWeight, field: FieldSpec, kgrid: KGridSpec | None = None,
                           path=None) -> ResponseResult:
    """``P = int d^3k |A(k)|^2`` for one prescription, with an error estimate."""
    kgrid = kgrid or KGridSpec()
    det = weight.detector
    path = detector_frame(det, path)
    kernel = _Kernel(det, weight.expansion, path, (weight.kind,), kgrid.spatial_order, kgrid.temporal_order)
    kernel.names = [weight.kind]
    axis = kgrid.polar_axis if kgrid.polar_axis is not None else _axis_for(path)
    vals, err, k_max, grid, ok = _integrate(kernel, field, kgrid, [lambda A: np.abs(A[0]) ** 2],
                                            _k_scale(det, field), axis)
    return ResponseResult(float(vals[0]), weight.kind, float(err[0]), _params(det, field, grid, k_max, kernel), ok)


def compare_prescriptions(det: DetectorSpec, field: FieldSpec, kgrid: KGridSpec | None = None,
                          expansion=None, path=None) -> PrescriptionComparison:
    """Probabilities under both prescriptions and their difference.

    ``delta_p`` is integrated directly from ``2 Re(conj(A_nc) dA) + |dA|^2``
    with ``dA`` the amplitude of the measure difference, so its error bar
    is relative to ``delta_p`` itself rather than to ``P``.  ``expansion``
    may be a :class:`FermiExpansion` or :class:`ExpansionFamily` that
    replaces the coefficients computed along the worldline (for example
    synthetic curvature in the measure).
    """
    kgrid = kgrid or KGridSpec()
    path = detector_frame(det, path)
    family = _resolve_family(det, expansion, path)
    build_weight(det, "covariant", family)
    kernel = _Kernel(det, family, path, ("covariant", "noncovariant"), kgrid.spatial_order,
                     kgrid.temporal_order)
    kernel.names = ["noncovariant", "delta"]
    components = [
        lambda A: np.abs(A[0]) ** 2,
        lambda A: 2 * np.real(np.conj(A[0]) * A[1]) + np.abs(A[1]) ** 2,
    ]
    axis = kgrid.polar_axis if kgrid.polar_axis is not None else _axis_for(path)
    if kernel.identical:
        vals, err, k_max, grid, ok = _integrate(kernel, field, kgrid, components[:1], _k_scale(det, field), axis)
        vals, err = np.append(vals, 0.0), np.append(err, 0.0)
    else:
        vals, err, k_max, grid, ok = _integrate(kernel, field, kgrid, components, _k_scale(det, field), axis)
    p_nc, dp = float(vals[0]), float(vals[1])
    p_cov = p_nc + dp
    err_nc, err_dp = float(err[0]), float(err[1])
    if p_nc <= 0:
        raise NumericalError("non-positive reference probability")
    params = _params(det, field, grid, k_max, kernel) | {"converged": bool(ok)}
    return PrescriptionComparison(p_cov, p_nc, dp, dp / p_nc, err_nc + err_dp, err_nc, err_dp,
                                  inconclusive=(not kernel.identical) and abs(dp) <= err_dp,
                                  identical_measures=bool(kernel.identical), params=params)

"""Catalog of analytic spacetimes.

Every entry comes with analytic first and second metric derivatives, so
curvature is computed without finite differences.  Geometric units
(c = G = 1) throughout; lengths are in metres when the caller works in SI.

=========================  ==========================  ==================
name                       coordinates                 params
=========================  ==========================  ==================
``minkowski-inertial``     (t, x, y, z)                none
``minkowski-rindler-chart``(eta, xi, y, z)             ``acceleration``
``schwarzschild``          (t, r, theta, phi)          ``mass``
``de-sitter-static``       (t, x, y, z), static patch  ``hubble``
=========================  ==========================  ==================

The de Sitter static patch uses Cartesian spatial coordinates,
``g_ij = delta_ij + H^2 x_i x_j / (1 - H^2 r^2)``, which are regular at the
origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import MetricField, frame_components, gram_schmidt, riemann_at

SPACETIMES = ("minkowski-inertial", "minkowski-rindler-chart", "schwarzschild", "de-sitter-static")

_REQUIRED = {
    "minkowski-inertial": (),
    "minkowski-rindler-chart": ("acceleration",),
    "schwarzschild": ("mass",),
    "de-sitter-static": ("hubble",),
}


@dataclass(frozen=True)
class SpacetimeId:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _REQUIRED:
            raise ValidationError(f"unknown spacetime {self.name!r}; choose from {SPACETIMES}")
        for key in _REQUIRED[self.name]:
            if key not in self.params:
                raise ValidationError(f"spacetime {self.name} needs parameter {key!r}")
            value = self.params[key]
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"parameter {key} must be positive, got {value}")
        extra = set(self.params) - set(_REQUIRED[self.name])
        if extra:
            raise ValidationError(f"unexpected parameters for {self.name}: {sorted(extra)}")

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.params.items()))))


def _zeros(*shape):
    return lambda x: np.zeros(shape)


def _minkowski():
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    return MetricField(lambda x: eta.copy(), _zeros(4, 4, 4), _zeros(4, 4, 4, 4),
                       name="minkowski-inertial", coordinates=("t", "x", "y", "z"), flat=True)


def _rindler(a):
    def g(x):
        out = np.eye(4)
        out[0, 0] = -(1 + a * x[1]) ** 2
        return out

    def dg(x):
        out = np.zeros((4, 4, 4))
        out[1, 0, 0] = -2 * a * (1 + a * x[1])
        return out

    def d2g(x):
        out = np.zeros((4, 4, 4, 4))
        out[1, 1, 0, 0] = -2 * a * a
        return out

    return MetricField(g, dg, d2g, chart_domain=lambda x: 1 + a * x[1] > 0,
                       name="minkowski-rindler-chart", params={"acceleration": a},
                       coordinates=("eta", "xi", "y", "z"), flat=True)


def _schwarzschild(M):
    def g(x):
        r, th = x[1], x[2]
        f = 1 - 2 * M / r
        return np.diag([-f, 1 / f, r * r, (r * np.sin(th)) ** 2])

    def dg(x):
        r, th = x[1], x[2]
        f = 1 - 2 * M / r
        fp = 2 * M / r**2
        out = np.zeros((4, 4, 4))
        out[1] = np.diag([-fp, -fp / f**2, 2 * r, 2 * r * np.sin(th) ** 2])
        out[2, 3, 3] = r * r * np.sin(2 * th)
        return out

    def d2g(x):
        r, th = x[1], x[2]
        f = 1 - 2 * M / r
        fp = 2 * M / r**2
        fpp = -4 * M / r**3
        out = np.zeros((4, 4, 4, 4))
        out[1, 1] = np.diag([-fpp, -fpp / f**2 + 2 * fp**2 / f**3, 2.0, 2 * np.sin(th) ** 2])
        out[1, 2, 3, 3] = out[2, 1, 3, 3] = 2 * r * np.sin(2 * th)
        out[2, 2, 3, 3] = 2 * r * r * np.cos(2 * th)
        return out

    def domain(x):
        return x[1] > 2 * M and 0 < x[2] < np.pi

    return MetricField(g, dg, d2g, chart_domain=domain, name="schwarzschild",
                       params={"mass": M}, coordinates=("t", "r", "theta", "phi"))


def _de_sitter(H):
    H2 = H * H
    eye = np.eye(3)

    def g(x):
        s = x[1:]
        B = 1 / (1 - H2 * (s @ s))
        out = np.zeros((4, 4))
        out[0, 0] = -1 / B
        out[1:, 1:] = eye + H2 * B * np.outer(s, s)
        return out

    def dg(x):
        s = x[1:]
        B = 1 / (1 - H2 * (s @ s))
        out = np.zeros((4, 4, 4))
        out[1:, 0, 0] = 2 * H2 * s
        sym = np.einsum("ik,j->kij", eye, s) + np.einsum("i,jk->kij", s, eye)
        out[1:, 1:, 1:] = H2 * (B * sym + 2 * H2 * B * B * np.einsum("i,j,k->kij", s, s, s))
        return out

    def d2g(x):
        s = x[1:]
        B = 1 / (1 - H2 * (s @ s))
        out = np.zeros((4, 4, 4, 4))
        out[1:, 1:, 0, 0] = 2 * H2 * eye
        # index order [l, k, i, j] = d_l d_k g_ij
        t1 = B * (np.einsum("ik,jl->lkij", eye, eye) + np.einsum("il,jk->lkij", eye, eye))
        t2 = 2 * H2 * B * B * (np.einsum("ik,j,l->lkij", eye, s, s) + np.einsum("i,jk,l->lkij", s, eye, s))
        t3 = 2 * H2 * B * B * (
            np.einsum("il,j,k->lkij", eye, s, s)
            + np.einsum("i,jl,k->lkij", s, eye, s)
            + np.einsum("i,j,kl->lkij", s, s, eye)
        )
        t4 = 8 * H2 * H2 * B**3 * np.einsum("i,j,k,l->lkij", s, s, s, s)
        out[1:, 1:, 1:, 1:] = H2 * (t1 + t2 + t3 + t4)
        return out

    return MetricField(g, dg, d2g, chart_domain=lambda x: H2 * (x[1:] @ x[1:]) < 1,
                       name="de-sitter-static", params={"hubble": H},
                       coordinates=("t", "x", "y", "z"))


def lookup(spacetime: SpacetimeId) -> MetricField:
    """Return the :class:`MetricField` for a catalog entry."""
    p = spacetime.params
    if spacetime.name == "minkowski-inertial":
        return _minkowski()
    if spacetime.name == "minkowski-rindler-chart":
        return _rindler(float(p["acceleration"]))
    if spacetime.name == "schwarzschild":
        return _schwarzschild(float(p["mass"]))
    return _de_sitter(float(p["hubble"]))


def static_tetrad(metric: MetricField, x) -> np.ndarray:
    """Orthonormal legs built from the coordinate basis at ``x``, time leg first."""
    return gram_schmidt(metric.g(x), np.eye(4))


def curvature_radius(spacetime: SpacetimeId | MetricField, x) -> float:
    """Inverse square root of the largest orthonormal-frame Riemann component.

    The frame is the coordinate-aligned (static) one at ``x``.  Flat
    entries return ``inf``.
    """
    metric = spacetime if isinstance(spacetime, MetricField) else lookup(spacetime)
    if metric.flat:
        return float("inf")
    curv = riemann_at(metric, x)
    biggest = frame_components(curv, static_tetrad(metric, x)).max_abs()
    if biggest == 0.0:
        return float("inf")
    return biggest ** -0.5

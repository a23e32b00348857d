"""Timelike worldlines, proper time, and Fermi-Walker transported tetrads."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import OrthonormalityError, TimelikeError, ValidationError
from .geometry import ETA, MetricField, christoffel, gram, gram_schmidt
from .numerics import OdeSolution, integrate_ode

__all__ = [
    "Worldline",
    "ProperTimeMap",
    "Tetrad",
    "FermiWalkerPath",
    "reparametrize",
    "four_velocity",
    "proper_acceleration",
    "initial_tetrad",
    "fw_transport",
    "fw_path",
    "fw_span",
    "FermiWalkerSpan",
    "rotate_triad",
    "inertial",
    "uniform_acceleration",
    "static_observer",
    "circular_orbit",
]

REORTHO_THRESHOLD = 1e-6


@dataclass(frozen=True)
class Worldline:
    """A curve ``x(lambda)`` in the chart of ``metric``.

    ``velocity_fn`` and ``acceleration_fn`` give the first and second
    ``lambda``-derivatives of the coordinates; missing ones are replaced by
    fourth-order central differences.  Proper time is zero at
    ``lambda = tau_origin``.
    """

    metric: MetricField
    coords_fn: Callable[[float], np.ndarray]
    param_range: tuple[float, float]
    velocity_fn: Callable[[float], np.ndarray] | None = None
    acceleration_fn: Callable[[float], np.ndarray] | None = None
    tau_origin: float = 0.0
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.param_range
        if not lo < hi:
            raise ValidationError("param_range must be increasing")
        if not lo <= self.tau_origin <= hi:
            raise ValidationError("tau_origin outside param_range")

    def _check(self, lam):
        lo, hi = self.param_range
        if not lo - 1e-12 * max(1, abs(lo)) <= lam <= hi + 1e-12 * max(1, abs(hi)):
            raise ValidationError(f"parameter {lam} outside {self.param_range}")

    def position(self, lam) -> np.ndarray:
        self._check(lam)
        return np.asarray(self.coords_fn(lam), dtype=float)

    def velocity(self, lam) -> np.ndarray:
        if self.velocity_fn is not None:
            return np.asarray(self.velocity_fn(lam), dtype=float)
        h = _step(lam)
        f = self.coords_fn
        return (-f(lam + 2 * h) + 8 * f(lam + h) - 8 * f(lam - h) + f(lam - 2 * h)) / (12 * h)

    def second_derivative(self, lam) -> np.ndarray:
        if self.acceleration_fn is not None:
            return np.asarray(self.acceleration_fn(lam), dtype=float)
        h = _step(lam)
        if self.velocity_fn is not None:
            f = self.velocity
            return (-f(lam + 2 * h) + 8 * f(lam + h) - 8 * f(lam - h) + f(lam - 2 * h)) / (12 * h)
        h = h**0.8  # second differences of positions need a larger step
        f = self.coords_fn
        return (-f(lam + 2 * h) + 16 * f(lam + h) - 30 * f(lam) + 16 * f(lam - h) - f(lam - 2 * h)) / (12 * h * h)

    def lapse(self, lam) -> float:
        """``d tau / d lambda = sqrt(-g(xdot, xdot))``."""
        x = self.position(lam)
        v = self.velocity(lam)
        norm2 = v @ self.metric.g(x) @ v
        if not norm2 < 0:
            raise TimelikeError(f"worldline is not timelike at lambda={lam} (g(v,v)={norm2})")
        return float(np.sqrt(-norm2))

    def rescaled(self, factor: float) -> "Worldline":
        """Same curve with parameter ``lambda' = factor * lambda``."""
        c = float(factor)
        if c <= 0:
            raise ValidationError("rescaling factor must be positive")
        vel = None if self.velocity_fn is None else (lambda s: self.velocity_fn(s / c) / c)
        acc = None if self.acceleration_fn is None else (lambda s: self.acceleration_fn(s / c) / c**2)
        lo, hi = self.param_range
        return replace(self, coords_fn=lambda s: self.coords_fn(s / c), velocity_fn=vel,
                       acceleration_fn=acc, param_range=(c * lo, c * hi),
                       tau_origin=c * self.tau_origin)


def _step(lam):
    return np.finfo(float).eps ** 0.2 * max(1.0, abs(lam))


def _kinematics(w: Worldline, lam):
    """Position, four-velocity, proper acceleration and connection at ``lambda``."""
    x = w.position(lam)
    xd = w.velocity(lam)
    g = w.metric.g(x)
    norm2 = xd @ g @ xd
    if not norm2 < 0:
        raise TimelikeError(f"worldline is not timelike at lambda={lam}")
    N = np.sqrt(-norm2)
    u = xd / N
    gamma = christoffel(w.metric, x)
    raw = (w.second_derivative(lam) + np.einsum("mab,a,b->m", gamma, xd, xd)) / N**2
    a = raw + u * (u @ g @ raw)
    return x, u, a, gamma, g, N


@dataclass(frozen=True)
class ProperTimeMap:
    """Monotone map between the curve parameter and proper time."""

    forward: OdeSolution | None
    backward: OdeSolution | None
    lambda0: float
    param_range: tuple[float, float]

    @property
    def tau_range(self) -> tuple[float, float]:
        lo = self.backward.final[0] if self.backward is not None else 0.0
        hi = self.forward.final[0] if self.forward is not None else 0.0
        return float(lo), float(hi)

    def tau_of_lambda(self, lam) -> float:
        if lam == self.lambda0:
            return 0.0
        branch = self.forward if lam > self.lambda0 else self.backward
        if branch is None:
            raise ValidationError(f"parameter {lam} outside {self.param_range}")
        return float(branch(lam)[0])

    def lambda_of_tau(self, tau) -> float:
        lo, hi = self.tau_range
        if tau == 0.0:
            return self.lambda0
        if not lo - 1e-12 * max(1, abs(lo)) <= tau <= hi + 1e-12 * max(1, abs(hi)):
            raise ValidationError(f"proper time {tau} outside {self.tau_range}")
        if tau > 0:
            a, b = self.lambda0, self.param_range[1]
        else:
            a, b = self.param_range[0], self.lambda0
        tau = min(max(tau, lo), hi)
        return float(brentq(lambda s: self.tau_of_lambda(s) - tau, a, b, xtol=1e-15, rtol=1e-15))


def reparametrize(w: Worldline, rel_tol=1e-12, abs_tol=1e-14) -> ProperTimeMap:
    """Solve ``d tau / d lambda = sqrt(-g(xdot, xdot))`` over the whole parameter range."""
    lo, hi = w.param_range
    lam0 = w.tau_origin

    def rhs(lam, y):
        return [w.lapse(lam)]

    fwd = integrate_ode(rhs, [0.0], lam0, hi, rel_tol, abs_tol) if hi > lam0 else None
    bwd = integrate_ode(rhs, [0.0], lam0, lo, rel_tol, abs_tol) if lo < lam0 else None
    return ProperTimeMap(fwd, bwd, lam0, (lo, hi))


def _lambda_at(w: Worldline, tau, pmap: ProperTimeMap | None):
    if tau == 0.0:
        return w.tau_origin
    if pmap is None:
        pmap = reparametrize(w)
    return pmap.lambda_of_tau(tau)


def four_velocity(w: Worldline, pmap: ProperTimeMap | None, tau: float) -> np.ndarray:
    lam = _lambda_at(w, tau, pmap)
    return w.velocity(lam) / w.lapse(lam)


def proper_acceleration(w: Worldline, pmap: ProperTimeMap | None, tau: float) -> np.ndarray:
    """``a^mu = u^nu nabla_nu u^mu``, orthogonal to ``u`` by construction."""
    return _kinematics(w, _lambda_at(w, tau, pmap))[2]


@dataclass(frozen=True)
class Tetrad:
    """Orthonormal frame at a point of a worldline.

    ``legs`` rows are ``u, e_1, e_2, e_3`` in coordinate components.
    ``lam`` is the curve parameter of ``base_point``; ``corrections`` counts
    re-orthonormalisations applied during transport.
    """

    tau: float
    legs: np.ndarray
    base_point: np.ndarray
    lam: float
    corrections: int = 0

    @property
    def u(self) -> np.ndarray:
        return self.legs[0]

    @property
    def spatial(self) -> np.ndarray:
        return self.legs[1:]

    def gram_deviation(self, metric: MetricField) -> float:
        return float(np.max(np.abs(gram(self.legs, metric.g(self.base_point)) - ETA)))


def initial_tetrad(w: Worldline, tau0: float = 0.0, hint_axes=None, pmap=None) -> Tetrad:
    """Gram-Schmidt frame ``{u, e_i}`` at proper time ``tau0``.

    ``hint_axes`` are up to three spatial directions, given as 3-vectors
    (coordinate components, zero time component) or 4-vectors.  Missing
    directions are completed with the coordinate axes.
    """
    lam = _lambda_at(w, tau0, pmap)
    x = w.position(lam)
    g = w.metric.g(x)
    u = w.velocity(lam) / w.lapse(lam)

    hints = []
    for h in hint_axes if hint_axes is not None else ():
        h = np.asarray(h, dtype=float)
        hints.append(np.concatenate([[0.0], h]) if h.shape == (3,) else h)
    if len(hints) > 3:
        raise ValidationError("at most three hint axes")

    chosen = [u]
    for i, v in enumerate([*hints, *np.eye(4)[1:]]):
        if len(chosen) == 4:
            break
        try:
            gram_schmidt(g, chosen + [v])
        except OrthonormalityError:
            if i < len(hints):
                raise OrthonormalityError(f"hint axis {i} is degenerate with the frame so far")
            continue
        chosen.append(v)
    return Tetrad(float(tau0), gram_schmidt(g, chosen), x, float(lam))


def rotate_triad(tetrad: Tetrad, rotation) -> Tetrad:
    """Rotate the spatial legs: ``e'_i = O_ij e_j``."""
    O = np.asarray(rotation, dtype=float)
    if O.shape != (3, 3) or np.max(np.abs(O @ O.T - np.eye(3))) > 1e-12:
        raise ValidationError("rotation must be an orthogonal 3x3 matrix")
    legs = tetrad.legs.copy()
    legs[1:] = O @ tetrad.legs[1:]
    return replace(tetrad, legs=legs)


@dataclass(frozen=True)
class FermiWalkerPath:
    """Dense Fermi-Walker transport of a tetrad along a worldline."""

    worldline: Worldline
    start: Tetrad
    solution: OdeSolution

    @property
    def tau_range(self) -> tuple[float, float]:
        return tuple(sorted((self.solution.t0, self.solution.t1)))

    def __call__(self, tau: float) -> Tetrad:
        y = self.solution(tau)
        return _finish(self.worldline, float(tau), y)

    def drift(self, taus) -> np.ndarray:
        """Gram-matrix deviation from eta at each of ``taus``, before any correction."""
        out = []
        for tau in taus:
            y = self.solution(tau)
            x = self.worldline.position(y[0])
            out.append(np.max(np.abs(gram(y[1:].reshape(4, 4), self.worldline.metric.g(x)) - ETA)))
        return np.array(out)


def _finish(w, tau, y):
    lam = float(y[0])
    legs = y[1:].reshape(4, 4)
    x = w.position(lam)
    g = w.metric.g(x)
    corrections = 0
    if np.max(np.abs(gram(legs, g) - ETA)) > REORTHO_THRESHOLD:
        legs = gram_schmidt(g, legs)
        corrections = 1
    return Tetrad(tau, legs, x, lam, corrections)


def fw_path(start: Tetrad, w: Worldline, tau_end: float, rel_tol=1e-13, abs_tol=1e-14) -> FermiWalkerPath:
    """Transport ``start`` from its proper time to ``tau_end``.

    The curve parameter is integrated together with the four legs, so the
    base point is always exactly on the worldline.
    """

    def rhs(tau, y):
        lam = y[0]
        _, u, a, gamma, g, N = _kinematics(w, lam)
        legs = y[1:].reshape(4, 4)
        ga = g @ a
        gu = g @ u
        d = (
            -np.einsum("mab,a,kb->km", gamma, u, legs)
            + np.outer(legs @ ga, u)
            - np.outer(legs @ gu, a)
        )
        return np.concatenate([[1.0 / N], d.ravel()])

    y0 = np.concatenate([[start.lam], start.legs.ravel()])
    sol = integrate_ode(rhs, y0, start.tau, tau_end, rel_tol, abs_tol)
    return FermiWalkerPath(w, start, sol)


@dataclass(frozen=True)
class FermiWalkerSpan:
    """Transport on both sides of the start tetrad: ``backward`` then ``forward``."""

    backward: FermiWalkerPath
    forward: FermiWalkerPath

    @property
    def start(self) -> Tetrad:
        return self.forward.start

    @property
    def tau_range(self) -> tuple[float, float]:
        return self.backward.tau_range[0], self.forward.tau_range[1]

    def _side(self, tau):
        return self.forward if tau >= self.start.tau else self.backward

    def __call__(self, tau: float) -> Tetrad:
        return self._side(tau)(tau)

    def drift(self, taus) -> np.ndarray:
        return np.array([self._side(t).drift([t])[0] for t in taus])


def fw_span(start: Tetrad, w: Worldline, tau_lo: float, tau_hi: float, rel_tol=1e-13,
            abs_tol=1e-14) -> FermiWalkerSpan:
    """Transport ``start`` both ways so that the result covers ``[tau_lo, tau_hi]``."""
    if not tau_lo < start.tau < tau_hi:
        raise ValidationError("the start tetrad must lie strictly inside [tau_lo, tau_hi]")
    return FermiWalkerSpan(fw_path(start, w, tau_lo, rel_tol, abs_tol), fw_path(start, w, tau_hi, rel_tol, abs_tol))


def fw_transport(start: Tetrad, w: Worldline, tau_target: float, rel_tol=1e-13, abs_tol=1e-14) -> Tetrad:
    if tau_target == start.tau:
        return start
    path = fw_path(start, w, tau_target, rel_tol, abs_tol)
    return _finish(w, float(tau_target), path.solution.final)


# --- trajectory families -------------------------------------------------


def inertial(metric: MetricField, velocity=(0.0, 0.0, 0.0), origin=(0.0, 0.0, 0.0, 0.0),
             param_range=(-1e6, 1e6)) -> Worldline:
    """Straight line ``x = origin + lambda (1, v)`` in an inertial chart."""
    v = np.asarray(velocity, dtype=float)
    if v @ v >= 1:
        raise ValidationError("speed must be below 1")
    o = np.asarray(origin, dtype=float)
    d = np.concatenate([[1.0], v])
    return Worldline(metric, lambda s: o + s * d, param_range, lambda s: d.copy(),
                     lambda s: np.zeros(4), family="inertial",
                     params={"velocity": tuple(v)})


def uniform_acceleration(metric: MetricField, acceleration: float, direction=(1.0, 0.0, 0.0),
                         start=(0.0, 0.0, 0.0, 0.0), param_range=None) -> Worldline:
    """Hyperbolic motion in an inertial chart, turning point at ``start``.

    ``x(lambda) = start + (sinh(a lambda)/a, (cosh(a lambda) - 1)/a n)``;
    ``lambda`` is proper time.  The default parameter range is
    ``|a lambda| <= 8``: beyond that ``cosh^2 - sinh^2`` loses more than
    nine digits and the lapse becomes unreliable.
    """
    a = float(acceleration)
    if not a > 0:
        raise ValidationError("acceleration must be positive")
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    s0 = np.asarray(start, dtype=float)
    if param_range is None:
        param_range = (-8.0 / a, 8.0 / a)

    def pos(s):
        return s0 + np.concatenate([[np.sinh(a * s) / a], (np.cosh(a * s) - 1) / a * n])

    def vel(s):
        return np.concatenate([[np.cosh(a * s)], np.sinh(a * s) * n])

    def acc(s):
        return a * np.concatenate([[np.sinh(a * s)], np.cosh(a * s) * n])

    return Worldline(metric, pos, param_range, vel, acc, family="uniform-acceleration",
                     params={"acceleration": a, "direction": tuple(n)})


def static_observer(metric: MetricField, spatial_position, param_range=(-1e6, 1e6)) -> Worldline:
    """Observer at fixed spatial coordinates, ``x = (lambda, X)``."""
    X = np.asarray(spatial_position, dtype=float)
    d = np.array([1.0, 0.0, 0.0, 0.0])
    w = Worldline(metric, lambda s: np.concatenate([[s], X]), param_range, lambda s: d.copy(),
                  lambda s: np.zeros(4), family="static-observer",
                  params={"position": tuple(X)})
    w.lapse(0.0)
    return w


def circular_orbit(metric: MetricField, radius: float, angular_velocity: float | None = None,
                   param_range=(-1e6, 1e6)) -> Worldline:
    """Circular motion at coordinate radius ``radius``.

    In Schwarzschild the orbit lies in the equatorial plane and
    ``angular_velocity`` (``d phi / d t``) defaults to the Keplerian
    geodesic value ``sqrt(M / r^3)``.  In Minkowski the circle lies in the
    x-y plane and the angular velocity is required.
    """
    R = float(radius)
    if metric.name == "schwarzschild":
        M = metric.params["mass"]
        w_ = np.sqrt(M / R**3) if angular_velocity is None else float(angular_velocity)

        def pos(s):
            return np.array([s, R, np.pi / 2, w_ * s])

        vel = lambda s: np.array([1.0, 0.0, 0.0, w_])
        acc = lambda s: np.zeros(4)
    elif metric.name == "minkowski-inertial":
        if angular_velocity is None:
            raise ValidationError("Minkowski circular motion needs an angular velocity")
        w_ = float(angular_velocity)

        def pos(s):
            return np.array([s, R * np.cos(w_ * s), R * np.sin(w_ * s), 0.0])

        def vel(s):
            return np.array([1.0, -R * w_ * np.sin(w_ * s), R * w_ * np.cos(w_ * s), 0.0])

        def acc(s):
            return np.array([0.0, -R * w_**2 * np.cos(w_ * s), -R * w_**2 * np.sin(w_ * s), 0.0])
    else:
        raise ValidationError(f"circular orbits are not defined for {metric.name}")
    w = Worldline(metric, pos, param_range, vel, acc, family="circular",
                  params={"radius": R, "angular_velocity": w_})
    w.lapse(0.0)
    return w

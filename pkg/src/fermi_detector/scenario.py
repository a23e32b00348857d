"""Scenario files: parsing, unit conversion, serialisation and object builders.

A scenario is an INI file with the sections ``[spacetime]``,
``[trajectory]``, ``[detector]`` and ``[run]``.  Quantities are written as
``<number> [unit]``; a bare number is in the scenario's length unit
(``[spacetime] unit_length``, default ``1 m``), so plain numbers are
geometric units (c = G = 1).  Inside the package everything is
geometric: lengths and times in units of ``unit_length``, accelerations
and frequencies in its inverse.  ``M`` as a unit means multiples of the
spacetime mass.  See the README for the full grammar.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detector import (
    CosineBumpSwitching,
    DetectorSpec,
    GaussianSmearing,
    GaussianSwitching,
    HardSphereSmearing,
    PointlikeSmearing,
    SmoothTopHatSwitching,
)
from .errors import ValidationError
from .hamiltonians import C_SI, G_EARTH, GM_SUN
from .spacetimes import SPACETIMES, SpacetimeId, lookup
from .worldline import circular_orbit, inertial, static_observer, uniform_acceleration

__all__ = ["Scenario", "parse_scenario", "parse_scenario_text", "serialize_scenario", "parse_quantity",
           "build_metric", "build_worldline", "build_detector", "TRAJECTORIES"]

TRAJECTORIES = ("inertial", "uniform-acceleration", "static-observer", "circular")
HBAR_C_EV_M = 1.973_269_804e-7

# unit -> (dimension, factor to SI base: m, 1/m, or dimensionless)
_UNITS = {
    "length": {"m": 1.0, "km": 1e3, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "nm": 1e-9, "angstrom": 1e-10,
               "s": C_SI, "ms": C_SI * 1e-3, "us": C_SI * 1e-6, "ns": C_SI * 1e-9,
               "kg": 6.674_30e-11 / C_SI**2, "M_sun": GM_SUN / C_SI**2},
    "inverse_length": {"1/m": 1.0, "1/km": 1e-3, "1/s": 1 / C_SI, "rad/s": 1 / C_SI, "Hz": 2 * np.pi / C_SI,
                       "eV": 1 / HBAR_C_EV_M, "m/s^2": 1 / C_SI**2, "g": G_EARTH / C_SI**2},
    "angle": {"rad": 1.0, "deg": np.pi / 180},
    "dimensionless": {"": 1.0, "c": 1.0},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def parse_quantity(text: str, dimension: str, unit_length: float = 1.0, mass: float | None = None,
                   where: str = "value") -> float:
    """Convert ``"<number> [unit]"`` to geometric units.

    ``dimension`` is one of ``length``, ``inverse_length``, ``angle``,
    ``dimensionless``.  Bare numbers are taken as already geometric.
    """
    m = _QUANTITY.match(str(text))
    if not m:
        raise ValidationError(f"{where}: cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if not np.isfinite(value):
        raise ValidationError(f"{where}: value must be finite")
    if unit == "":
        return value
    if unit == "M":
        if dimension != "length":
            raise ValidationError(f"{where}: unit 'M' is a length but a {dimension} is expected")
        if mass is None:
            raise ValidationError(f"{where}: unit 'M' needs a spacetime with a mass")
        return value * mass
    table = _UNITS.get(dimension, {})
    if unit not in table:
        known = [u for d, t in _UNITS.items() if unit in t for u in [d]]
        hint = f" (that unit is a {known[0].replace('_', ' ')})" if known else ""
        raise ValidationError(f"{where}: unit {unit!r} does not fit a {dimension.replace('_', ' ')}{hint}")
    si = value * table[unit]
    if dimension == "length":
        return si / unit_length
    if dimension == "inverse_length":
        return si * unit_length
    return si


def _vector(text, dimension, n, unit_length, mass, where, dims=None):
    parts = [p for p in str(text).split(",")]
    if len(parts) != n:
        raise ValidationError(f"{where}: expected {n} comma-separated values, got {len(parts)}")
    dims = dims or [dimension] * n
    return tuple(parse_quantity(p, d, unit_length, mass, where) for p, d in zip(parts, dims))


def _list(text, dimension, unit_length, mass, where):
    return tuple(parse_quantity(p, dimension, unit_length, mass, where) for p in str(text).split(",") if p.strip())


@dataclass(frozen=True)
class Scenario:
    """A validated scenario in geometric units.

    ``trajectory``, ``detector`` and ``run`` are flat dictionaries of
    numbers, strings and tuples.  ``detector`` is ``None`` when the file
    has no ``[detector]`` section.
    """

    spacetime: SpacetimeId
    trajectory: dict
    detector: dict | None
    run: dict = field(default_factory=dict)
    seed: int = 0
    unit_length_m: float = 1.0

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.spacetime == other.spacetime and self.trajectory == other.trajectory
                and self.detector == other.detector and self.run == other.run
                and self.seed == other.seed and self.unit_length_m == other.unit_length_m)

    __hash__ = None


# field -> dimension; tuples give per-component dimensions
_TRAJECTORY_FIELDS = {
    "inertial": {"velocity": ("dimensionless", 3), "origin": ("length", 4)},
    "uniform-acceleration": {"acceleration": ("inverse_length", 1), "direction": ("dimensionless", 3),
                             "start": ("length", 4)},
    "static-observer": {"position": ("position", 3)},
    "circular": {"radius": ("length", 1), "angular_velocity": ("inverse_length", 1)},
}
_DETECTOR_FIELDS = {
    "gap": ("inverse_length", 1), "coupling": ("dimensionless", 1), "sigma": ("length", 1),
    "radius": ("length", 1), "center": ("length", 3), "switching_time": ("length", 1),
    "ramp": ("length", 1), "switching_center": ("length", 1),
}
_RUN_FIELDS = {
    "rel_tol": ("dimensionless", 1), "tau": ("length", 1), "tau_end": ("length", 1),
    "samples": ("int", 1), "radii": ("length", "list"), "direction": ("dimensionless", 3),
    "n_directions": ("int", 1), "taus": ("length", "list"), "field_mass": ("inverse_length", 1),
    "size": ("length", 1), "acceleration": ("inverse_length", 1), "method": ("str", 1),
    "h": ("length", 1), "validity_factor": ("dimensionless", 1), "validity_radius": ("length", 1),
    "n_theta": ("int", 1), "n_phi": ("int", 1), "spatial_order": ("int", 1),
    "prescription": ("str", 1), "t_coordinate": ("int", 1), "synthetic_tidal": ("inverse_length2", 3),
    "envelope_constant": ("dimensionless", 1), "sizes": ("length", "list"),
}
_SMEARINGS = ("gaussian", "gaussian-shifted", "hard-sphere", "pointlike")
_SWITCHINGS = ("gaussian", "cosine-bump", "top-hat-smoothed")


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and "=" in s and s.split("=", 1)[0].strip() == key:
            return i
    return None


def _where(text, section, key):
    line = _line_of(text, section, key)
    return f"[{section}] {key}" + (f" (line {line})" if line else "")


def _convert(raw, spec, unit_length, mass, where, spacetime_name=None):
    dim, n = spec
    if dim == "str":
        return raw.strip()
    if dim == "int":
        try:
            return int(raw)
        except ValueError:
            raise ValidationError(f"{where}: expected an integer, got {raw!r}") from None
    if dim == "position":
        dims = ["length", "angle", "angle"] if spacetime_name == "schwarzschild" else ["length"] * 3
        return _vector(raw, None, 3, unit_length, mass, where, dims)
    if dim == "inverse_length2":
        # curvature components: bare numbers only (geometric units of unit_length^-2)
        vals = _vector(raw, "dimensionless", 3, unit_length, mass, where)
        return vals
    if n == "list":
        return _list(raw, dim, unit_length, mass, where)
    if n == 1:
        return parse_quantity(raw, dim, unit_length, mass, where)
    return _vector(raw, dim, n, unit_length, mass, where)


def parse_scenario_text(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"scenario syntax error: {exc}") from None
    unknown = set(cp.sections()) - {"spacetime", "trajectory", "detector", "run"}
    if unknown:
        raise ValidationError(f"unknown sections: {sorted(unknown)}")
    if not cp.has_section("spacetime"):
        raise ValidationError("missing [spacetime] section")

    st = dict(cp["spacetime"])
    unit_length = parse_quantity(st.pop("unit_length", "1 m"), "length", 1.0, None,
                                 _where(text, "spacetime", "unit_length"))
    if not unit_length > 0:
        raise ValidationError("[spacetime] unit_length must be positive")
    name = st.pop("name", None)
    if name is None:
        raise ValidationError("[spacetime] name is required")
    if name not in SPACETIMES:
        raise ValidationError(f"{_where(text, 'spacetime', 'name')}: unknown spacetime {name!r}; choose from {SPACETIMES}")
    dims = {"mass": "length", "acceleration": "inverse_length", "hubble": "inverse_length"}
    params = {}
    for key, raw in st.items():
        if key not in dims:
            raise ValidationError(f"{_where(text, 'spacetime', key)}: unknown field")
        params[key] = parse_quantity(raw, dims[key], unit_length, None, _where(text, "spacetime", key))
    spacetime = SpacetimeId(name, params)
    mass = params.get("mass")

    tr = dict(cp["trajectory"]) if cp.has_section("trajectory") else {"family": "inertial"}
    family = tr.pop("family", None)
    if family not in TRAJECTORIES:
        raise ValidationError(f"{_where(text, 'trajectory', 'family')}: unknown or missing family {family!r}; "
                              f"choose from {TRAJECTORIES}")
    trajectory = {"family": family}
    for key, raw in tr.items():
        spec = _TRAJECTORY_FIELDS[family].get(key)
        if spec is None:
            raise ValidationError(f"{_where(text, 'trajectory', key)}: unknown field for family {family}")
        trajectory[key] = _convert(raw, spec, unit_length, mass, _where(text, "trajectory", key), name)
    required = {"uniform-acceleration": ("acceleration",), "static-observer": ("position",), "circular": ("radius",)}
    for key in required.get(family, ()):
        if key not in trajectory:
            raise ValidationError(f"[trajectory] {key} is required for family {family}")

    detector = None
    if cp.has_section("detector"):
        dt = dict(cp["detector"])
        detector = {}
        for key in ("smearing", "switching"):
            if key in dt:
                detector[key] = dt.pop(key).strip()
        detector.setdefault("smearing", "gaussian")
        detector.setdefault("switching", "gaussian")
        if detector["smearing"] not in _SMEARINGS:
            raise ValidationError(f"{_where(text, 'detector', 'smearing')}: unknown smearing {detector['smearing']!r}")
        if detector["switching"] not in _SWITCHINGS:
            raise ValidationError(f"{_where(text, 'detector', 'switching')}: unknown switching {detector['switching']!r}")
        for key, raw in dt.items():
            if key not in _DETECTOR_FIELDS:
                raise ValidationError(f"{_where(text, 'detector', key)}: unknown field")
            detector[key] = _convert(raw, _DETECTOR_FIELDS[key], unit_length, mass, _where(text, "detector", key))
        if "gap" not in detector:
            raise ValidationError("[detector] gap is required (energy gap Omega)")
        detector.setdefault("coupling", 1.0)
        detector.setdefault("switching_time", 1.0)
        detector.setdefault("switching_center", 0.0)
        detector.setdefault("center", (0.0, 0.0, 0.0))
        size_key = {"gaussian": "sigma", "gaussian-shifted": "sigma", "hard-sphere": "radius"}.get(detector["smearing"])
        if size_key and size_key not in detector:
            raise ValidationError(f"[detector] {size_key} is required for {detector['smearing']} smearing")
        if detector["switching"] == "top-hat-smoothed" and "ramp" not in detector:
            raise ValidationError("[detector] ramp is required for top-hat-smoothed switching")

    run = {}
    seed = 0
    if cp.has_section("run"):
        for key, raw in cp["run"].items():
            if key == "seed":
                seed = _convert(raw, ("int", 1), unit_length, mass, _where(text, "run", key))
                continue
            if key not in _RUN_FIELDS:
                raise ValidationError(f"{_where(text, 'run', key)}: unknown field")
            run[key] = _convert(raw, _RUN_FIELDS[key], unit_length, mass, _where(text, "run", key))
    run.setdefault("rel_tol", 1e-9)
    if not run["rel_tol"] > 0:
        raise ValidationError("[run] rel_tol must be positive")
    return Scenario(spacetime, trajectory, detector, run, seed, unit_length * 1.0)


def parse_scenario(path) -> Scenario:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"scenario file {p} does not exist")
    try:
        text = p.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ValidationError(f"scenario file {p} is not UTF-8: {exc}") from None
    return parse_scenario_text(text)


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_scenario(sc: Scenario) -> str:
    """Inverse of :func:`parse_scenario_text`; all quantities written as bare geometric numbers."""
    lines = ["[spacetime]", f"name = {sc.spacetime.name}", f"unit_length = {sc.unit_length_m!r} m"]
    lines += [f"{k} = {_fmt(float(v))}" for k, v in sorted(sc.spacetime.params.items())]
    lines += ["", "[trajectory]"] + [f"{k} = {_fmt(v)}" for k, v in sc.trajectory.items()]
    if sc.detector is not None:
        lines += ["", "[detector]"] + [f"{k} = {_fmt(v)}" for k, v in sc.detector.items()]
    lines += ["", "[run]", f"seed = {sc.seed}"] + [f"{k} = {_fmt(v)}" for k, v in sc.run.items()]
    return "\n".join(lines) + "\n"


# --- builders ----------------------------------------------------------------


def build_metric(sc: Scenario):
    return lookup(sc.spacetime)


def build_worldline(sc: Scenario, metric=None):
    metric = metric or build_metric(sc)
    t = sc.trajectory
    fam = t["family"]
    if fam == "inertial":
        return inertial(metric, t.get("velocity", (0.0, 0.0, 0.0)), t.get("origin", (0.0, 0.0, 0.0, 0.0)))
    if fam == "uniform-acceleration":
        return uniform_acceleration(metric, t["acceleration"], t.get("direction", (1.0, 0.0, 0.0)),
                                    t.get("start", (0.0, 0.0, 0.0, 0.0)))
    if fam == "static-observer":
        return static_observer(metric, t["position"])
    return circular_orbit(metric, t["radius"], t.get("angular_velocity"))


def build_detector(sc: Scenario, worldline=None) -> DetectorSpec:
    d = sc.detector
    if d is None:
        raise ValidationError("this subcommand needs a [detector] section")
    kind = d["smearing"]
    if kind in ("gaussian", "gaussian-shifted"):
        smearing = GaussianSmearing(d["sigma"], d["center"])
    elif kind == "hard-sphere":
        smearing = HardSphereSmearing(d["radius"], d["center"])
    else:
        smearing = PointlikeSmearing(d["center"])
    T, c = d["switching_time"], d["switching_center"]
    if d["switching"] == "gaussian":
        switching = GaussianSwitching(T, c)
    elif d["switching"] == "cosine-bump":
        switching = CosineBumpSwitching(T, c)
    else:
        switching = SmoothTopHatSwitching(T, d["ramp"], c)
    return DetectorSpec(d["gap"], d["coupling"], smearing, switching, worldline)

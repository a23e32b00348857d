"""Command-line entry point ``fermi-detector``.

Each subcommand reads a scenario file, writes its results into
``<out>/<timestamp>-<hash>/`` together with ``manifest.json``, and exits
with 0 on success, 2 on invalid input and 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .detector import smearing_moments
from .errors import NumericalError, ValidationError
from .fermi import (
    FermiExpansion,
    convergence_table,
    expansion_coefficients,
    fit_slopes,
    write_oracle_csv,
)
from .hamiltonians import (
    C_SI,
    ExpansionFamily,
    HamiltonianWeight,
    build_weight,
    hamiltonian_difference,
    lhc_acceleration,
    magnitude_estimate,
    multipole_decomposition,
    solar_horizon_curvature_radius,
    threshold_acceleration,
)
from .response import FieldSpec, KGridSpec, compare_prescriptions, excitation_probability
from .scenario import Scenario, build_detector, build_metric, build_worldline, parse_scenario
from .spacetimes import curvature_radius
from .worldline import fw_path, fw_span, initial_tetrad, proper_acceleration, reparametrize

__all__ = ["main", "run"]

SUBCOMMANDS = ("frame", "volume", "moments", "compare", "response", "magnitudes", "oracle")
ODE_REL_TOL = 1e-13


class _Run:
    """Output directory bookkeeping; files are recorded with their checksums."""

    def __init__(self, directory: Path, scenario: Scenario):
        self.dir = directory
        self.sc = scenario
        self.files: list[str] = []
        self.notes: dict = {}

    def path(self, name):
        self.files.append(name)
        return self.dir / name

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])

    def write_json(self, name, obj):
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")

    # SI conversions for a geometric quantity of length dimension ``p``
    def si_length(self, x):
        return x * self.sc.unit_length_m

    def si_time(self, x):
        return x * self.sc.unit_length_m / C_SI

    def si_accel(self, a):
        return a * C_SI**2 / self.sc.unit_length_m


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- shared setup ---------------------------------------------------------------


def _validity_kw(sc: Scenario) -> dict:
    kw = {}
    if "validity_radius" in sc.run:
        kw["validity_radius"] = sc.run["validity_radius"]
    if "validity_factor" in sc.run:
        kw["validity_factor"] = sc.run["validity_factor"]
    return kw


def _validity_radius(sc: Scenario, exp: FermiExpansion) -> float:
    if "validity_radius" in sc.run:
        return sc.run["validity_radius"]
    return exp.validity_radius(sc.run.get("validity_factor", 0.1))


def _family(sc: Scenario, det, span):
    kw = _validity_kw(sc)
    w = det.worldline
    if "synthetic_tidal" in sc.run:
        base = expansion_coefficients(w.metric, w, span(sc.run.get("tau", 0.0)))
        exp = FermiExpansion.synthetic(base.accel, np.diag(sc.run["synthetic_tidal"]))
        return ExpansionFamily.constant(exp, **kw)
    return ExpansionFamily.along(w.metric, w, span, **kw)


def _detector_span(det, tau):
    lo, hi = det.switching.support
    lo, hi = min(lo, tau), max(hi, tau)
    margin = 1e-3 * (hi - lo) + 1e-9
    return fw_span(initial_tetrad(det.worldline, tau), det.worldline, lo - margin, hi + margin)


def _kgrid(sc: Scenario) -> KGridSpec:
    keys = ("n_theta", "n_phi", "spatial_order")
    return KGridSpec(rel_tol=sc.run["rel_tol"], **{k: sc.run[k] for k in keys if k in sc.run})


# --- subcommands -----------------------------------------------------------------


def _cmd_frame(run: _Run):
    sc = run.sc
    metric = build_metric(sc)
    w = build_worldline(sc, metric)
    tau_end = sc.run.get("tau_end", 10.0)
    n = sc.run.get("samples", 21)
    if not tau_end > 0 or n < 2:
        raise ValidationError("[run] tau_end must be positive and samples at least 2")
    path = fw_path(initial_tetrad(w, 0.0), w, tau_end, ODE_REL_TOL)
    pmap = reparametrize(w)
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    rows = []
    drift = 0.0
    for tau in np.linspace(0.0, tau_end, n):
        t = path(tau)
        g = metric.g(t.base_point)
        dev = float(np.max(np.abs(t.legs @ g @ t.legs.T - eta)))
        drift = max(drift, dev)
        a = proper_acceleration(w, pmap, tau)
        a_frame = t.spatial @ g @ a
        ua = float(t.u @ g @ a)
        rows.append([tau, run.si_time(tau), *t.base_point, dev, ua, *a_frame,
                     *(run.si_accel(x) for x in a_frame)])
    header = ["tau [L]", "tau [s]", "x0 [chart]", "x1 [chart]", "x2 [chart]", "x3 [chart]", "gram_deviation [1]",
              "u_dot_a [1/L]", "a_1 [1/L]", "a_2 [1/L]", "a_3 [1/L]", "a_1 [m/s^2]", "a_2 [m/s^2]", "a_3 [m/s^2]"]
    run.write_csv("frame.csv", header, rows)
    run.notes["max_gram_deviation"] = drift
    return "frame.csv", 1, 7


def _cmd_volume(run: _Run, components=("sqrt_det_spatial", "sqrt_det_full", "sqrt_det_ratio"), name="volume"):
    sc = run.sc
    metric = build_metric(sc)
    w = build_worldline(sc, metric)
    tau = sc.run.get("tau", 0.0)
    h = sc.run.get("h", 1e-4)
    method = sc.run.get("method", "jacobi")
    start = initial_tetrad(w, tau)
    span = fw_span(start, w, tau - 10 * h, tau + 10 * h, ODE_REL_TOL)
    exp = expansion_coefficients(metric, w, start)
    radius = _validity_radius(sc, exp)
    if "radii" in sc.run:
        radii = sc.run["radii"]
    elif np.isfinite(radius):
        radii = tuple(radius * np.geomspace(0.05, 1.0, 7))
    else:
        radii = tuple(np.geomspace(0.01, 1.0, 7))
    dirs = [np.asarray(sc.run.get("direction", (1.0, 1.0, 1.0)))]
    rng = np.random.default_rng(sc.seed)
    for _ in range(sc.run.get("n_directions", 1) - 1):
        v = rng.normal(size=3)
        dirs.append(v / np.linalg.norm(v))
    rows, fits = [], []
    for i, d in enumerate(dirs):
        table = convergence_table(metric, w, span, d, radii, tau, method, radius, exp)
        table = [r for r in table if r["component"] in components]
        for r in table:
            r["direction"] = i
        rows += table
        fits.append({"direction": [float(x) for x in d / np.linalg.norm(d)], "slopes": fit_slopes(table)})
    header = ["direction", "r [L]", "r [m]", "component", "numeric [1]", "expansion [1]", "residual [1]"]
    run.write_csv(f"{name}.csv", header, [[r["direction"], r["r"], run.si_length(r["r"]), r["component"],
                                            r["numeric"], r["expansion"], r["residual"]] for r in rows])
    run.write_json(f"{name}_fits.json", {"validity_radius": radius, "method": method, "fits": fits})
    run.notes["max_abs_residual"] = max(abs(r["residual"]) for r in rows)
    return f"{name}.csv", 2, 7


def _cmd_oracle(run: _Run):
    from .fermi import COMPONENTS

    return _cmd_volume(run, COMPONENTS, "oracle")


def _detector_setup(sc: Scenario):
    metric = build_metric(sc)
    w = build_worldline(sc, metric)
    det = build_detector(sc, w)
    tau = sc.run.get("tau", det.switching.center)
    span = _detector_span(det, tau)
    return det, _family(sc, det, span), span, tau


def _cmd_moments(run: _Run):
    sc = run.sc
    det, family, _, tau = _detector_setup(sc)
    exp = family(tau)
    radius = family.validity_radius(tau)
    out = {"tau": tau, "validity_radius": radius}
    rows = []
    for measure in ("spatial", "flat"):
        M0, M1, M2 = smearing_moments(det, exp, measure, radius)
        out[measure] = {"M0": M0, "M1": M1, "M2": M2}
        rows.append([measure, "M0", "", M0])
        rows += [[measure, "M1", f"{i + 1}", M1[i]] for i in range(3)]
        rows += [[measure, "M2", f"{i + 1}{j + 1}", M2[i, j]] for i in range(3) for j in range(3)]
    weight = HamiltonianWeight("covariant", det, family)
    out["report"] = multipole_decomposition(weight, exp, tau, sc.run.get("envelope_constant", 1.0)).to_record()
    run.write_csv("moments.csv", ["measure", "moment", "index", "value [L^order]"], rows)
    run.write_json("moments.json", out)
    return None, 0, 0


def _cmd_compare(run: _Run):
    sc = run.sc
    det, family, span, tau = _detector_setup(sc)
    build_weight(det, "covariant", family)
    taus = sc.run.get("taus", (tau,))
    env = sc.run.get("envelope_constant", 1.0)
    weight = HamiltonianWeight("covariant", det, family)
    reports = []
    for t in taus:
        reports.append(multipole_decomposition(weight, None, t, env))
        reports.append(hamiltonian_difference(det, family, t, sc.run.get("t_coordinate", 0), envelope_constant=env))
    header = ["frame", "tau [L]", "tau [s]", "monopole [1]", "dipole [1]", "quadrupole [1]", "relative [1]",
              "reparam [1]", "remainder_bound [1]"]
    run.write_csv("reports.csv", header, [[r.frame, r.tau, run.si_time(r.tau), r.monopole_term, r.dipole_term,
                                           r.quadrupole_term, r.relative_correction, r.reparam_factor,
                                           r.remainder_bound] for r in reports])
    if det.worldline.metric.name != "minkowski-inertial":
        run.notes["prescription_comparison"] = "skipped: response integrals need the inertial Minkowski chart"
        return None, 0, 0
    cmp = compare_prescriptions(det, FieldSpec(sc.run.get("field_mass", 0.0)), _kgrid(sc), family, span)
    rec = cmp.to_record()
    cols = ["P_cov", "P_noncov", "dP", "dP_over_P", "err_cov", "err_noncov", "err_dP"]
    run.write_csv("compare.csv", [f"{c} [1]" for c in cols] + ["inconclusive"],
                  [[rec[c] for c in cols] + [rec["inconclusive"]]])
    run.write_json("compare.json", rec | {"identical_measures": cmp.identical_measures, "params": cmp.params})
    run.notes["converged"] = bool(cmp.params.get("converged", True))
    return None, 0, 0


def _cmd_response(run: _Run):
    sc = run.sc
    det, family, span, _ = _detector_setup(sc)
    which = sc.run.get("prescription", "both")
    kinds = ("covariant", "noncovariant") if which == "both" else (which,)
    field = FieldSpec(sc.run.get("field_mass", 0.0))
    rows, results = [], []
    for kind in kinds:
        res = excitation_probability(build_weight(det, kind, family), field, _kgrid(sc), span)
        rows.append([kind, res.probability, res.integration_error, res.converged])
        results.append(json.loads(res.to_json()))
    run.write_csv("response.csv", ["prescription", "probability [1]", "integration_error [1]", "converged"], rows)
    run.write_json("response.json", results)
    run.notes["converged"] = all(r[3] for r in rows)
    return None, 0, 0


def _cmd_magnitudes(run: _Run):
    sc = run.sc
    if "size" not in sc.run:
        raise ValidationError("[run] size is required for magnitudes")
    size_m = run.si_length(sc.run["size"])
    accel = sc.run.get("acceleration")
    if accel is None and sc.trajectory["family"] == "uniform-acceleration":
        accel = sc.trajectory["acceleration"]
    ell = None
    if sc.spacetime.name in ("schwarzschild", "de-sitter-static"):
        w = build_worldline(sc)
        ell = curvature_radius(sc.spacetime, w.position(0.0))
    lhc = lhc_acceleration()
    est = magnitude_estimate(size_m, None if accel is None else run.si_accel(accel),
                             None if ell is None else run.si_length(ell))
    out = {"size_m": size_m, "threshold_acceleration_ms2": threshold_acceleration(size_m),
           "lhc_lab_acceleration_ms2": lhc["lab"], "lhc_proper_acceleration_ms2": lhc["proper"],
           "lhc_gamma": lhc["gamma"], "solar_horizon_curvature_radius_m": solar_horizon_curvature_radius(),
           "scenario": est}
    out["threshold_acceleration_g"] = out["threshold_acceleration_ms2"] / 9.80665
    out["lhc_lab_acceleration_g"] = lhc["lab"] / 9.80665
    rows = [[k, v] for k, v in sorted(out.items()) if not isinstance(v, dict)]
    rows += [[f"scenario_{k}", v] for k, v in sorted(est.items())]
    run.write_csv("magnitudes.csv", ["quantity", "value [SI or 1]"], rows)
    run.write_json("magnitudes.json", out)
    return None, 0, 0


_COMMANDS = {"frame": _cmd_frame, "volume": _cmd_volume, "moments": _cmd_moments, "compare": _cmd_compare,
             "response": _cmd_response, "magnitudes": _cmd_magnitudes, "oracle": _cmd_oracle}


def _plot_script(csv_name, xcol, ycol) -> str:
    return (f"# gnuplot script\nset datafile separator ','\nset key autotitle columnhead\n"
            f"set logscale xy\nplot '{csv_name}' using {xcol}:(abs(${ycol})) with linespoints\n")


# --- driver ------------------------------------------------------------------------


def run(subcommand: str, scenario_path, out="runs", tol=None, seed=None, plot=False) -> Path:
    """Execute one subcommand and return the run directory."""
    if subcommand not in _COMMANDS:
        raise ValidationError(f"unknown subcommand {subcommand!r}")
    sc = parse_scenario(scenario_path)
    if tol is not None:
        if not tol > 0:
            raise ValidationError("--tol must be positive")
        sc.run["rel_tol"] = float(tol)
    if seed is not None:
        object.__setattr__(sc, "seed", int(seed))
    input_sha = _sha256(scenario_path)
    key = json.dumps([input_sha, subcommand, sc.run["rel_tol"], sc.seed, bool(plot)])
    digest = hashlib.sha256(key.encode()).hexdigest()[:12]
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    directory = Path(out) / f"{stamp}-{digest}"
    directory.mkdir(parents=True, exist_ok=False)
    r = _Run(directory, sc)
    manifest = {"subcommand": subcommand, "input": str(scenario_path), "input_sha256": input_sha,
                "version": __version__, "timestamp": stamp, "seed": sc.seed, "unit_length_m": sc.unit_length_m,
                "tolerances": {"rel_tol": sc.run["rel_tol"], "ode_rel_tol": ODE_REL_TOL}, "partial": True}
    try:
        plot_csv, xcol, ycol = _COMMANDS[subcommand](r)
        if plot and plot_csv:
            (directory / "plot.txt").write_text(_plot_script(plot_csv, xcol, ycol), encoding="utf-8")
            r.files.append("plot.txt")
        manifest["partial"] = False
    except Exception as exc:
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest["notes"] = r.notes
        manifest["files"] = {name: _sha256(directory / name) for name in r.files if (directory / name).exists()}
        with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
    return directory


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fermi-detector", description="Smeared detectors in Fermi normal coordinates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--scenario", required=True, help="scenario INI file")
    p.add_argument("--out", default="runs", help="parent directory for run outputs (default: runs)")
    p.add_argument("--tol", type=float, default=None, help="override [run] rel_tol")
    p.add_argument("--seed", type=int, default=None, help="override [run] seed")
    p.add_argument("--plot", action="store_true", help="also write a gnuplot script plot.txt")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        directory = run(args.subcommand, args.scenario, args.out, args.tol, args.seed, args.plot)
    except ValidationError as exc:
        print(f"fermi-detector: invalid input: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"fermi-detector: numerical failure: {exc}", file=sys.stderr)
        return 3
    print(directory)
    return 0


if __name__ == "__main__":
    sys.exit(main())

import numpy as np
import pytest

from conftest import random_rotation
from fermi_detector.detector import DetectorSpec, GaussianSmearing, GaussianSwitching, HardSphereSmearing
from fermi_detector.errors import FermiChartError, ValidationError
from fermi_detector.fermi import FermiExpansion
from fermi_detector.hamiltonians import (
    ComparisonReport,
    ExpansionFamily,
    HamiltonianWeight,
    build_weight,
    hamiltonian_difference,
    lhc_acceleration,
    magnitude_estimate,
    multipole_decomposition,
    reparam_factor,
    solar_horizon_curvature_radius,
    threshold_acceleration,
    write_reports_csv,
)
from fermi_detector.worldline import (
    circular_orbit,
    fw_span,
    inertial,
    initial_tetrad,
    rotate_triad,
    static_observer,
    uniform_acceleration,
)


def _accelerated(minkowski, a=0.1, smearing=None):
    w = uniform_acceleration(minkowski, a)
    span = fw_span(initial_tetrad(w), w, -2.0, 2.0)
    fam = ExpansionFamily.along(minkowski, w, span)
    det = DetectorSpec(1.0, 1.0, smearing or GaussianSmearing(0.01, (0.01, 0, 0)), GaussianSwitching(0.2), w)
    return det, fam


def test_inertial_flat_weights_identical(minkowski):
    w = inertial(minkowski, (0.2, 0, 0))
    fam = ExpansionFamily.constant(FermiExpansion.synthetic())
    det = DetectorSpec(1.0, 1.0, GaussianSmearing(0.3), GaussianSwitching(1.0), w)
    rep = multipole_decomposition(build_weight(det, "covariant", fam), None, 0.0)
    assert rep.dipole_term == 0 and rep.quadrupole_term == 0 and rep.remainder_bound == 0
    x = np.random.default_rng(1).normal(size=(5, 3)) * 0.3
    cov = HamiltonianWeight("covariant", det, fam).measure(0.0, x)
    non = HamiltonianWeight("noncovariant", det, fam).measure(0.0, x)
    assert np.array_equal(cov, non)


def test_dipole_term(minkowski):
    det, fam = _accelerated(minkowski)
    rep = multipole_decomposition(build_weight(det, "covariant", fam), None, 0.0)
    assert np.isclose(rep.monopole_term, 1.0, rtol=1e-12)
    assert np.isclose(rep.dipole_term, 0.1 * 0.01, rtol=1e-10)
    assert np.isclose(rep.relative_correction, 1e-3, rtol=1e-9)
    assert rep.difference == rep.dipole_term + rep.quadrupole_term


def test_sheet_integral_matches_multipoles(minkowski):
    det, fam = _accelerated(minkowski)
    cov = HamiltonianWeight("covariant", det, fam).sheet_integral(0.1)
    non = HamiltonianWeight("noncovariant", det, fam).sheet_integral(0.1)
    rep = multipole_decomposition(build_weight(det, "covariant", fam), None, 0.1)
    assert np.isclose(cov - non, rep.difference, rtol=1e-10)


def test_quadrupole_term_centered(schwarzschild):
    w = static_observer(schwarzschild, (10.0, np.pi / 2, 0.0))
    span = fw_span(initial_tetrad(w), w, -1.0, 1.0)
    fam = ExpansionFamily.along(schwarzschild, w, span)
    s = 0.01
    det = DetectorSpec(1.0, 1.0, GaussianSmearing(s), GaussianSwitching(0.1), w)
    rep = multipole_decomposition(build_weight(det, "covariant", fam), None, 0.0)
    assert abs(rep.dipole_term) < 1e-18
    # trace of R_tau i tau j vanishes in vacuum
    assert abs(rep.quadrupole_term) < 1e-16


def test_reparam_factor(minkowski, schwarzschild):
    w = uniform_acceleration(minkowski, 0.1)
    assert np.isclose(reparam_factor(w, None, 0.5), 1 / np.cosh(0.05), rtol=1e-10)
    assert np.isclose(reparam_factor(w, None, 0.5, lambda x: 2 * x[0]), 0.5 / np.cosh(0.05), rtol=1e-8)
    ws = static_observer(schwarzschild, (10.0, np.pi / 2, 0.0))
    assert np.isclose(reparam_factor(ws, None, 0.0), np.sqrt(0.8))
    with pytest.raises(ValidationError):
        reparam_factor(w, None, 0.5, lambda x: -x[0])


def test_t_frame_report(minkowski):
    det, fam = _accelerated(minkowski)
    tau = 0.5
    rt = hamiltonian_difference(det, fam, tau)
    rtau = multipole_decomposition(build_weight(det, "covariant", fam), None, tau)
    f = 1 / np.cosh(0.1 * tau)
    assert rt.frame == "t" and np.isclose(rt.reparam_factor, f, rtol=1e-10)
    assert np.isclose(rt.dipole_term, f * rtau.dipole_term, rtol=1e-10)
    assert np.isclose(rt.relative_correction, rtau.relative_correction)


def test_reparam_invariance_under_rescaling(schwarzschild):
    w = circular_orbit(schwarzschild, 9.0)
    for c in (0.5, 3.0):
        assert np.isclose(reparam_factor(w, None, 2.0), reparam_factor(w.rescaled(c), None, 2.0), rtol=1e-9)


def test_frame_rotation_invariance(minkowski):
    det, _ = _accelerated(minkowski)
    w = det.worldline
    T0 = initial_tetrad(w)
    ref = None
    rng = np.random.default_rng(2)
    for _ in range(3):
        O = random_rotation(rng)
        span = fw_span(rotate_triad(T0, O), w, -2.0, 2.0)
        fam = ExpansionFamily.along(minkowski, w, span)
        d = det.with_smearing(det.smearing.rotated(O))
        sc = hamiltonian_difference(d, fam, 0.3).scalars()
        ref = ref or sc
        for k in sc:
            assert abs(sc[k] - ref[k]) <= 1e-9 * max(1.0, abs(ref[k]))


def test_support_violation(minkowski):
    det, fam = _accelerated(minkowski, a=0.1, smearing=HardSphereSmearing(2.0))
    with pytest.raises(FermiChartError):
        build_weight(det, "covariant", fam)
    with pytest.raises(ValidationError):
        HamiltonianWeight("other", det, fam)


def test_report_serialisation(tmp_path):
    rep = ComparisonReport(0.0, 1.0, 1e-3, 2e-5, 1.02e-3, 1.0, 1e-7)
    rec = rep.to_record()
    assert rec["dipole"] == 1e-3
    assert '"frame": "tau"' in rep.to_json()
    write_reports_csv(tmp_path / "r.csv", [rep])
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].startswith("tau [")
    assert len(lines) == 2


def test_magnitudes():
    assert 1e25 <= threshold_acceleration(1e-10) / 9.80665 <= 1e27
    lhc = lhc_acceleration()
    assert 1e12 <= lhc["lab"] / 9.80665 <= 1e14
    assert lhc["proper"] > lhc["lab"]
    assert 100 <= solar_horizon_curvature_radius() <= 1e4
    est = magnitude_estimate(1e-10, 9.8, 1e3)
    assert np.isclose(est["dipole_scale"], 9.8e-10 / 299_792_458.0**2)
    assert np.isclose(est["quadrupole_scale"], 1e-26)
    with pytest.raises(ValidationError):
        magnitude_estimate(-1.0)

import numpy as np
import pytest
from scipy.integrate import quad

from fermi_detector.detector import (
    CosineBumpSwitching,
    DetectorSpec,
    GaussianSmearing,
    GaussianSwitching,
    HardSphereSmearing,
    PointlikeSmearing,
    SmoothTopHatSwitching,
)
from fermi_detector.errors import ValidationError
from fermi_detector.fermi import FermiExpansion, FermiPoint, exponential_map, numeric_fermi_metric
from fermi_detector.hamiltonians import ExpansionFamily, build_weight
from fermi_detector.response import (
    FieldSpec,
    KGridSpec,
    ResponseResult,
    clenshaw_curtis,
    compare_prescriptions,
    detector_frame,
    excitation_probability,
    first_order_amplitude,
)
from fermi_detector.worldline import inertial, uniform_acceleration

FLAT = ExpansionFamily.constant(FermiExpansion.synthetic())


def _norm(om):
    return 1 / np.sqrt(2 * om * (2 * np.pi) ** 3)


def _pointlike_probability(Om, T):
    v, _ = quad(lambda k: k * np.exp(-(k + Om) ** 2 * T**2), 0, np.inf, epsabs=0, epsrel=1e-13, limit=500)
    return T**2 / (2 * np.pi) * v


def test_clenshaw_curtis_exact_for_polynomials():
    x, w = clenshaw_curtis(9)
    for p in range(9):
        assert np.isclose(w @ x**p, (1 - (-1) ** (p + 1)) / (p + 1), atol=1e-14)


def test_zero_coupling(minkowski):
    det = DetectorSpec(1.0, 0.0, PointlikeSmearing(), GaussianSwitching(1.0), inertial(minkowski))
    assert first_order_amplitude(build_weight(det, "covariant", FLAT), FieldSpec(), [0.3, 0, 0]) == 0


def test_pointlike_amplitude_closed_form(minkowski):
    T, Om, lam = 0.7, 1.3, 0.5
    det = DetectorSpec(Om, lam, PointlikeSmearing(), GaussianSwitching(T), inertial(minkowski))
    k = np.array([[0.3, -0.2, 0.5], [2.0, 0.0, 0.0]])
    om = np.linalg.norm(k, axis=1)
    A = first_order_amplitude(build_weight(det, "noncovariant", FLAT), FieldSpec(), k)
    expected = lam * np.sqrt(2 * np.pi) * T * np.exp(-((Om + om) ** 2) * T**2 / 2) * _norm(om)
    assert np.allclose(np.abs(A), expected, rtol=1e-12)


def test_narrow_switching_limit(minkowski):
    s, Om, T = 0.2, 1.3, 1e-3
    det = DetectorSpec(Om, 0.5, GaussianSmearing(s), GaussianSwitching(T), inertial(minkowski))
    k = np.array([0.3, -0.2, 0.5])
    om = np.linalg.norm(k)
    A = first_order_amplitude(build_weight(det, "covariant", FLAT), FieldSpec(), k)
    direct = -1j * 0.5 * np.sqrt(2 * np.pi) * T * np.exp(-om**2 * s**2 / 2) * _norm(om)
    assert abs(A / direct - 1) < (Om + om) ** 2 * T**2


def test_massless_zero_mode_rejected(minkowski):
    det = DetectorSpec(1.0, 1.0, PointlikeSmearing(), GaussianSwitching(1.0), inertial(minkowski))
    with pytest.raises(ValidationError):
        first_order_amplitude(build_weight(det, "covariant", FLAT), FieldSpec(), [0.0, 0.0, 0.0])


def test_pointlike_probability_oracle(minkowski):
    det = DetectorSpec(1.0, 1.0, PointlikeSmearing(), GaussianSwitching(1.0), inertial(minkowski))
    res = excitation_probability(build_weight(det, "noncovariant", FLAT), FieldSpec())
    assert isinstance(res, ResponseResult) and res.converged
    assert abs(res.probability / _pointlike_probability(1.0, 1.0) - 1) < 1e-6
    assert '"prescription": "noncovariant"' in res.to_json()


def test_monotone_decay_in_gap(minkowski):
    w = inertial(minkowski)
    probs = []
    for Om in np.geomspace(0.5, 5.0, 5):
        det = DetectorSpec(Om, 1.0, GaussianSmearing(0.1), GaussianSwitching(1.0), w)
        probs.append(excitation_probability(build_weight(det, "covariant", FLAT), FieldSpec(),
                                            KGridSpec(rel_tol=1e-7)).probability)
    assert all(b < a for a, b in zip(probs, probs[1:]))
    assert all(p > 0 for p in probs)


def test_refinement_stability(minkowski):
    det = DetectorSpec(1.0, 1.0, GaussianSmearing(0.2), GaussianSwitching(1.0), inertial(minkowski))
    weight = build_weight(det, "covariant", FLAT)
    a = excitation_probability(weight, FieldSpec(), KGridSpec(rel_tol=1e-6))
    b = excitation_probability(weight, FieldSpec(), KGridSpec(rel_tol=5e-7))
    assert abs(a.probability - b.probability) <= a.integration_error


@pytest.mark.parametrize("smearing, switching", [
    (HardSphereSmearing(0.2), CosineBumpSwitching(2.0)),
    (GaussianSmearing(0.1), SmoothTopHatSwitching(2.0, 1.0)),
])
def test_other_profiles_sane(minkowski, smearing, switching):
    det = DetectorSpec(1.0, 1.0, smearing, switching, inertial(minkowski, (0.2, 0, 0)))
    cmp = compare_prescriptions(det, FieldSpec(), KGridSpec(rel_tol=1e-6))
    assert cmp.identical_measures and cmp.delta_p == 0
    assert cmp.p_noncov > 0 and np.isfinite(cmp.p_noncov)
    assert cmp.error_noncov < 1e-4 * cmp.p_noncov


def test_massive_field_suppresses_response(minkowski):
    det = DetectorSpec(1.0, 1.0, GaussianSmearing(0.1), GaussianSwitching(1.0), inertial(minkowski))
    w = build_weight(det, "covariant", FLAT)
    p0 = excitation_probability(w, FieldSpec(0.0), KGridSpec(rel_tol=1e-6)).probability
    p1 = excitation_probability(w, FieldSpec(1.0), KGridSpec(rel_tol=1e-6)).probability
    assert 0 < p1 < p0


def test_accelerated_dipole_difference(minkowski):
    a, d = 0.1, 0.01
    det = DetectorSpec(1.0, 1.0, GaussianSmearing(d, (d, 0, 0)), GaussianSwitching(1.0),
                       uniform_acceleration(minkowski, a))
    cmp = compare_prescriptions(det, FieldSpec(), KGridSpec(rel_tol=1e-8))
    assert not cmp.inconclusive
    assert np.isclose(cmp.relative, 2 * a * d, rtol=2e-3)
    assert np.isclose(cmp.p_cov, cmp.p_noncov + cmp.delta_p)
    rec = cmp.to_record()
    assert set(rec) >= {"P_cov", "P_noncov", "dP", "dP_over_P", "err_dP"}


def test_tiny_acceleration_negligible(minkowski):
    # a * sigma = 1e-13, an LHC-like ratio of scales
    sigma = 0.1
    det = DetectorSpec(1.0, 1.0, GaussianSmearing(sigma, (sigma, 0, 0)), GaussianSwitching(1.0),
                       uniform_acceleration(minkowski, 1e-13 / sigma))
    cmp = compare_prescriptions(det, FieldSpec(), KGridSpec(rel_tol=1e-6))
    assert abs(cmp.relative) <= 1e-12


def test_flat_chart_map_is_exact(minkowski):
    a = 0.2
    w = uniform_acceleration(minkowski, a)
    det = DetectorSpec(1.0, 1.0, GaussianSmearing(0.1), GaussianSwitching(0.5), w)
    frame = detector_frame(det)
    for tau in (-1.0, 0.0, 1.5):
        T = frame(tau)
        x = np.array([0.7, -0.3, 0.4])
        assert np.allclose(exponential_map(minkowski, T, x, np.inf), T.base_point + x @ T.spatial, atol=1e-12)
        g = numeric_fermi_metric(minkowski, w, frame, FermiPoint(tau, x), validity_radius=np.inf)
        assert np.isclose(g[0, 0], -(1 + a * x[0]) ** 2, rtol=1e-10)
        assert np.allclose(g[1:, 1:], np.eye(3), atol=1e-12)


def test_response_needs_flat_inertial_chart(schwarzschild):
    from fermi_detector.worldline import static_observer

    w = static_observer(schwarzschild, (10.0, np.pi / 2, 0.0))
    det = DetectorSpec(1.0, 1.0, GaussianSmearing(0.01), GaussianSwitching(1.0), w)
    with pytest.raises(ValidationError):
        compare_prescriptions(det, FieldSpec())


def test_kgrid_validation():
    with pytest.raises(ValidationError):
        KGridSpec(n_theta=4)
    with pytest.raises(ValidationError):
        KGridSpec(rel_tol=0)
    with pytest.raises(ValidationError):
        FieldSpec(-1.0)
    assert KGridSpec().refined().n_theta == 17

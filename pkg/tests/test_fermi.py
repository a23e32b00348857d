import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_rotation
from fermi_detector.errors import FermiChartError, ValidationError
from fermi_detector.fermi import (
    COMPONENTS,
    FermiExpansion,
    FermiPoint,
    convergence_table,
    expansion_coefficients,
    exponential_map,
    fit_slopes,
    geodesic_length,
    geodesic_solution,
    metric_second_order,
    numeric_fermi_metric,
    sqrt_det_full,
    sqrt_det_ratio,
    sqrt_det_spatial,
    write_oracle_csv,
)
from fermi_detector.worldline import (
    fw_span,
    inertial,
    initial_tetrad,
    rotate_triad,
    static_observer,
    uniform_acceleration,
)

ETA = np.diag([-1.0, 1, 1, 1])


@pytest.fixture(scope="module")
def schw_setup(schwarzschild):
    w = static_observer(schwarzschild, (10.0, np.pi / 2, 0.0))
    T = initial_tetrad(w)
    return w, T, fw_span(T, w, -0.5, 0.5), expansion_coefficients(schwarzschild, w, T)


def test_schwarzschild_coefficients(schw_setup):
    _, _, _, exp = schw_setup
    assert np.isclose(exp.tidal[0, 0], -2 / 1000, rtol=1e-10)
    assert np.isclose(exp.accel[0], 0.01 / np.sqrt(0.8), rtol=1e-10)
    assert np.allclose(exp.accel[1:], 0, atol=1e-14)
    assert np.max(np.abs(exp.tau_kij)) < 1e-14


def test_on_curve_limit(schw_setup):
    exp = schw_setup[3]
    assert np.array_equal(metric_second_order(exp, np.zeros(3)), ETA)
    assert sqrt_det_full(exp, np.zeros(3)) == 1.0
    assert sqrt_det_spatial(exp, np.zeros(3)) == 1.0


def test_rindler_series_is_exact():
    a = 0.5
    exp = FermiExpansion.synthetic(accel=(a, 0, 0))
    x = np.array([0.04, 0.01, -0.02])
    g = metric_second_order(exp, x, np.inf)
    assert np.isclose(g[0, 0], -(1 + a * x[0]) ** 2)
    assert np.isclose(sqrt_det_full(exp, x, np.inf), 1 + a * x[0])
    assert np.isclose(sqrt_det_ratio(exp, x, np.inf), 1 + a * x[0])


def test_validity_radius_guard(schw_setup):
    exp = schw_setup[3]
    r = exp.validity_radius()
    assert np.isclose(r, 0.1 * np.sqrt(500), rtol=1e-10)
    with pytest.raises(FermiChartError):
        sqrt_det_full(exp, [1.1 * r, 0, 0])
    assert np.isfinite(sqrt_det_full(exp, [1.1 * r, 0, 0], np.inf))


def test_vectorized_series(schw_setup):
    exp = schw_setup[3]
    pts = np.random.default_rng(0).uniform(-0.5, 0.5, (7, 3))
    vec = sqrt_det_full(exp, pts)
    assert vec.shape == (7,)
    assert np.allclose(vec, [sqrt_det_full(exp, p) for p in pts], rtol=0, atol=1e-15)


def test_flat_inertial_numeric_metric(minkowski):
    w = inertial(minkowski, (0.3, 0, 0.1))
    T = initial_tetrad(w)
    g = numeric_fermi_metric(minkowski, w, T, FermiPoint(0.0, np.array([2.0, -1.0, 0.5])), validity_radius=np.inf)
    assert np.allclose(g, ETA, atol=1e-13)


def test_accelerated_numeric_metric_exact(minkowski):
    a = 0.3
    w = uniform_acceleration(minkowski, a, (0, 1, 0))
    T = initial_tetrad(w, hint_axes=[(0, 1, 0)])
    span = fw_span(T, w, -1.0, 1.0)
    for s in (-1.0, 0.5, 1.5):
        g = numeric_fermi_metric(minkowski, w, span, FermiPoint(0.0, np.array([s, 0.2, 0.0])), validity_radius=np.inf)
        assert np.isclose(g[0, 0], -(1 + a * s) ** 2, rtol=1e-10)
        gfd = numeric_fermi_metric(minkowski, w, span, FermiPoint(0.0, np.array([s, 0.2, 0.0])),
                                   method="fd", validity_radius=np.inf)
        assert np.max(np.abs(g - gfd)) < 1e-7


def test_jacobi_and_fd_agree_in_curved_space(schwarzschild, schw_setup):
    w, _, span, _ = schw_setup
    p = FermiPoint(0.2, np.array([0.05, 0.02, 0.01]))
    a = numeric_fermi_metric(schwarzschild, w, span, p, validity_radius=np.inf)
    b = numeric_fermi_metric(schwarzschild, w, span, p, method="fd", validity_radius=np.inf)
    assert np.max(np.abs(a - b)) < 1e-8


def test_exponential_map_geodesic_length(schwarzschild, schw_setup):
    T = schw_setup[1]
    x = np.array([0.3, -0.4, 0.2])
    sol = geodesic_solution(schwarzschild, T, x)
    assert np.isclose(geodesic_length(schwarzschild, sol), np.linalg.norm(x), rtol=1e-10)
    end = exponential_map(schwarzschild, T, x)
    assert np.allclose(end, sol.final[:4])


def test_single_tetrad_only_at_its_time(schwarzschild, schw_setup):
    w, T, _, _ = schw_setup
    with pytest.raises(ValidationError):
        numeric_fermi_metric(schwarzschild, w, T, FermiPoint(0.3, np.zeros(3)))
    with pytest.raises(ValidationError):
        numeric_fermi_metric(schwarzschild, w, T, FermiPoint(0.0, np.zeros(3)), method="spline")


def test_convergence_table_and_csv(schwarzschild, schw_setup, tmp_path):
    w, _, span, exp = schw_setup
    rows = convergence_table(schwarzschild, w, span, (1, 1, 1), np.geomspace(1e-2, 2e-1, 5), exp=exp)
    assert len(rows) == 5 * len(COMPONENTS)
    slopes = fit_slopes(rows)
    assert slopes["g_tautau"] > 2.7 and slopes["sqrt_det_full"] > 2.7
    write_oracle_csv(tmp_path / "o.csv", rows)
    header = (tmp_path / "o.csv").read_text().splitlines()[0]
    assert "[" in header and "residual" in header


@given(st.integers(0, 10_000))
def test_rotation_covariance(seed):
    rng = np.random.default_rng(seed)
    O = random_rotation(rng)
    tidal = rng.normal(size=(3, 3)) * 1e-3
    tidal = tidal + tidal.T
    spatial = np.zeros((3, 3, 3, 3))
    S = rng.normal(size=(3, 3)) * 1e-3
    S = S + S.T
    # a curvature-like block with the Riemann symmetries: R_ikjl = S_ij d_kl + d_ij S_kl - S_il d_kj - d_il S_kj
    d = np.eye(3)
    spatial = (np.einsum("ij,kl->ikjl", S, d) + np.einsum("ij,kl->ikjl", d, S)
               - np.einsum("il,kj->ikjl", S, d) - np.einsum("il,kj->ikjl", d, S))
    exp = FermiExpansion.synthetic(rng.normal(size=3) * 1e-2, tidal, None, spatial)
    rot = exp.rotated(O)
    x = rng.uniform(-0.3, 0.3, 3)
    for fn in (sqrt_det_full, sqrt_det_spatial, sqrt_det_ratio):
        assert np.isclose(fn(exp, x, np.inf), fn(rot, O @ x, np.inf), rtol=1e-12)


def test_rotated_triad_gives_rotated_coefficients(schwarzschild, schw_setup):
    w, T, _, exp = schw_setup
    O = random_rotation(np.random.default_rng(5))
    exp2 = expansion_coefficients(schwarzschild, w, rotate_triad(T, O))
    ref = exp.rotated(O)
    assert np.allclose(exp2.accel, ref.accel, atol=1e-13)
    assert np.allclose(exp2.tidal, ref.tidal, atol=1e-13)
    assert np.allclose(exp2.spatial, ref.spatial, atol=1e-13)


def test_curvature_radius_is_triad_independent(schwarzschild, schw_setup):
    w, T, _, exp = schw_setup
    O = random_rotation(np.random.default_rng(11))
    rotated = expansion_coefficients(schwarzschild, w, rotate_triad(T, O))
    # static frame at r = 10: largest tidal eigenvalue 2M/r^3
    assert np.isclose(exp.curvature_radius(), np.sqrt(500), rtol=1e-10)
    assert np.isclose(rotated.curvature_radius(), exp.curvature_radius(), rtol=1e-12)

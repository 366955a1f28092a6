import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from cuspflow import (
    DomainError,
    PhaseState,
    ProfileSurface,
    SingularityError,
    angular_data,
    cusp_distance,
    cusp_volume,
    gaussian_curvature,
    geodesic_rhs,
    integrate_geodesic,
    inverse_cusp_distance,
    level_length,
    metric_coefficients,
)

from conftest import sqrt_e


def delta_by_quadrature(r, x):
    value, _ = integrate.quad(lambda u: sqrt_e(r, u), 0.0, x, epsabs=0.0, epsrel=1e-13, limit=200)
    return value


def curvature_by_differences(r, x, h_rel=1e-5):
    """Brioschi formula for an orthogonal metric without tau dependence, by central differences."""
    def flux(u):
        e = 1.0 + r * r * u ** (2 * r - 2)
        g = u ** (2 * r)
        g_x = 2 * r * u ** (2 * r - 1)
        return g_x / math.sqrt(e * g)
    h = h_rel * x
    e = 1.0 + r * r * x ** (2 * r - 2)
    g = x ** (2 * r)
    return -(flux(x + h) - flux(x - h)) / (2 * h) / (2 * math.sqrt(e * g))


def test_rejects_r_at_most_two():
    with pytest.raises(DomainError, match="r > 2"):
        ProfileSurface(2.0)
    with pytest.raises(DomainError, match="r > 2"):
        ProfileSurface(1.5)


@pytest.mark.parametrize("x", [1e-6, 1e-3, 0.05, 0.3, 0.7, 1.0])
def test_cusp_distance_matches_quadrature(surface, x):
    assert cusp_distance(surface, x) == pytest.approx(delta_by_quadrature(surface.r, x), rel=1e-11)


def test_cusp_distance_at_zero_and_domain(surface3):
    assert cusp_distance(surface3, 0.0) == 0.0
    with pytest.raises(DomainError):
        cusp_distance(surface3, 1.5)
    with pytest.raises(DomainError):
        cusp_distance(surface3, -0.1)


@given(st.floats(min_value=1e-8, max_value=1.0))
def test_inverse_cusp_distance_round_trip(x):
    surface = ProfileSurface(3.0)
    assert inverse_cusp_distance(surface, cusp_distance(surface, x)) == pytest.approx(x, rel=1e-12)


@given(st.floats(min_value=1e-7, max_value=0.999), st.floats(min_value=1e-7, max_value=0.999))
def test_cusp_distance_monotone(x1, x2):
    surface = ProfileSurface(2.5)
    if x1 < x2:
        assert cusp_distance(surface, x1) < cusp_distance(surface, x2)


@pytest.mark.parametrize("x", [1e-4, 1e-2, 0.2, 0.6, 1.0])
def test_curvature_matches_brioschi_differences(surface, x):
    assert gaussian_curvature(surface, x) == pytest.approx(curvature_by_differences(surface.r, x), rel=1e-7)


def test_curvature_expansion_near_cusp(surface):
    r = surface.r
    delta = np.logspace(-4, -2, 50)
    x = inverse_cusp_distance(surface, delta)
    ratio = gaussian_curvature(surface, x) * delta ** 2 / (r * (r - 1))
    assert np.max(np.abs(ratio + 1)) <= 0.05
    # the deviation shrinks toward the cusp
    assert abs(ratio[0] + 1) < abs(ratio[-1] + 1)


def test_curvature_negative_everywhere(surface):
    x = np.linspace(1e-3, surface.x_max, 200)
    assert np.all(gaussian_curvature(surface, x) < 0)


def test_metric_coefficients(surface3):
    e, g = metric_coefficients(surface3, 0.5)
    assert e == pytest.approx(1 + 9 * 0.5 ** 4)
    assert g == pytest.approx(0.5 ** 6)


def test_level_length_definition(surface):
    for B in (1e-3, 0.1, surface.delta0):
        x = inverse_cusp_distance(surface, B)
        assert level_length(surface, B) == pytest.approx(2 * math.pi * x ** surface.r, rel=1e-14)
    with pytest.raises(DomainError):
        level_length(surface, 0.0)


@pytest.mark.parametrize("B", [1e-3, 1e-2, 0.2])
def test_volume_is_integral_of_level_lengths(surface, B):
    # |grad delta| = 1, so the area of {delta <= B} is the integral of level lengths over [0, B]
    coarea, _ = integrate.quad(lambda s: level_length(surface, s), 0.0, B, epsabs=0.0, epsrel=1e-10)
    assert cusp_volume(surface, B) == pytest.approx(coarea, rel=1e-8)


def test_volume_and_length_leading_terms(surface):
    r = surface.r
    B = np.logspace(-4, -2, 7)
    vol = cusp_volume(surface, B) / (2 * math.pi * B ** (r + 1) / (r + 1))
    ell = level_length(surface, B) / (2 * math.pi * B ** r)
    assert np.max(np.abs(vol - 1)) <= 0.01
    assert np.max(np.abs(ell - 1)) <= 0.01


def test_phase_state_wraps_tau(surface3):
    state = PhaseState(0.5, 7.0, 0.0, 0.0)
    assert state.tau == pytest.approx(7.0 - 2 * math.pi)


@given(st.floats(min_value=1e-3, max_value=1.0), st.floats(min_value=-1.0, max_value=1.0))
def test_from_angles_is_unit_speed(x, a):
    surface = ProfileSurface(3.0)
    b = math.sqrt(max(0.0, 1 - a * a))
    state = PhaseState.from_angles(surface, x, a, b)
    assert state.speed(surface) == pytest.approx(1.0, abs=1e-12)
    ang = angular_data(surface, state)
    assert ang.a == pytest.approx(a, abs=1e-12)
    assert ang.b == pytest.approx(b, abs=1e-12)
    assert ang.clairaut == pytest.approx(x ** 3 * b, rel=1e-12, abs=1e-300)


def test_angular_data_rejects_non_unit_speed(surface3):
    with pytest.raises(DomainError):
        angular_data(surface3, PhaseState(0.5, 0.0, 2.0, 0.0))


def test_geodesic_rhs_rotation_only_pushes_outward(surface3):
    state = PhaseState.from_angles(surface3, 0.3, 0.0, 1.0)
    _, _, x_ddot, tau_ddot = geodesic_rhs(surface3, state)
    assert x_ddot > 0
    assert tau_ddot == 0.0


def test_integrate_geodesic_conserves_clairaut_and_speed(surface):
    start = PhaseState.from_angles(surface, 0.5, -0.8, 0.6)
    traj = integrate_geodesic(surface, start, t_end=0.5, tol=1e-10)
    assert traj.status in ("completed", "left_chart")
    assert traj.clairaut_drift <= 1e-8
    assert traj.speed_drift <= 1e-8


def test_integrate_geodesic_reaches_end_time(surface3):
    start = PhaseState.from_angles(surface3, 0.5, 0.0, 1.0)
    traj = integrate_geodesic(surface3, start, t_end=0.1)
    assert traj.status == "completed"
    assert traj.t[-1] == pytest.approx(0.1, rel=1e-9)


def test_radial_geodesic_reaches_the_floor(surface3):
    start = PhaseState.from_angles(surface3, 0.5, -1.0, 0.0)
    traj = integrate_geodesic(surface3, start, t_end=10.0)
    assert traj.status == "singular"
    # a radial path runs straight down: elapsed time is the distance travelled
    dist = cusp_distance(surface3, 0.5) - cusp_distance(surface3, traj.x[-1])
    assert traj.t[-1] == pytest.approx(dist, rel=1e-8)


def test_start_below_floor_is_singular(surface3):
    start = PhaseState.from_angles(surface3, 1e-12, 0.0, 1.0)
    with pytest.raises(SingularityError):
        integrate_geodesic(surface3, start, t_end=1.0)


def test_integrate_geodesic_rejects_bad_tolerance(surface3):
    start = PhaseState.from_angles(surface3, 0.5, 0.0, 1.0)
    with pytest.raises(DomainError):
        integrate_geodesic(surface3, start, 1.0, tol=1e-3)


def test_trajectory_csv(tmp_path, surface3):
    start = PhaseState.from_angles(surface3, 0.5, -0.6, 0.8)
    traj = integrate_geodesic(surface3, start, t_end=0.2)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,tau_lift,x_dot,tau_dot,a,b,clairaut,delta"
    assert len(lines) == len(traj) + 1
    assert sum(1 for _ in traj.samples) == len(traj)

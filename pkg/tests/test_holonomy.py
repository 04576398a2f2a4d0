from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from squidhqc.dark import analytic_dark_single, analytic_dark_two_cphase, numeric_frame_field
from squidhqc.errors import DomainError
from squidhqc.hilbert import build_basis
from squidhqc.holonomy import (
    ControlPath,
    check_ad_clearance,
    connection_line_integral,
    cphase_holonomy,
    cphase_loop_angles,
    loop_angle_ry,
    loop_angle_rz,
    path_ordered_holonomy,
    rectangle,
    ry_gate,
    rz_holonomy,
    wz_connection_analytic,
    wz_connection_fd,
)
from squidhqc.model import ControlPoint, DeviceParams, reference_device

B1, B2 = build_basis(1), build_basis(2)
DEV1 = DeviceParams((1.0,), (0.0,))
FRAME1 = numeric_frame_field(DEV1, B1)
FRAME2 = numeric_frame_field(reference_device(), B2)


def analytic1(p):
    return analytic_dark_single(p, B1)


def analytic2(p):
    return analytic_dark_two_cphase(p, B2)


def cphase_loop(xi1: float, xi2: float, sweep: float) -> ControlPath:
    v = [
        ControlPoint.origin(2),
        ControlPoint.two(xi=(0.0, xi2)),
        ControlPoint.two(xi=(xi1, xi2)),
        ControlPoint.two(xi=(xi1, xi2), phi0=(0.0, sweep)),
        ControlPoint.two(xi=(0.0, xi2), phi0=(0.0, sweep)),
        ControlPoint.two(xi=(0.0, 0.0), phi0=(0.0, sweep)),
    ]
    return ControlPath.from_waypoints(v)


def ry_loop(xi: float, theta: float) -> ControlPath:
    return rectangle(1, ("xi", xi), ("theta", theta))


def rz_loop(theta: float, sweep: float) -> ControlPath:
    return rectangle(1, ("theta", theta), ("phi1", sweep))


# -- connections ---------------------------------------------------------------


def test_analytic_connection_examples():
    m = wz_connection_analytic(ControlPoint.single(0.0, math.pi / 4), "rz", "phi1").matrix
    assert np.allclose(m, np.diag([0.0, 0.5j]))
    m = wz_connection_analytic(ControlPoint.two(xi=(math.pi / 4, math.pi / 4)), "cphase", "phi0_2").matrix
    assert m[0, 0] == pytest.approx(3j / 7)
    assert m[2, 2] == pytest.approx(0.5j)
    m = wz_connection_analytic(ControlPoint.origin(2), "cphase", "phi0_2").matrix
    assert np.array_equal(m, np.zeros((4, 4)))
    m = wz_connection_analytic(ControlPoint.single(0.3, math.pi / 2 - 0.5), "ry", "xi").matrix
    assert np.allclose(m, [[0, -math.sin(math.pi / 2 - 0.5)], [math.sin(math.pi / 2 - 0.5), 0]])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1.4), st.floats(0.05, 1.4), st.sampled_from(["xi", "theta"]))
def test_fd_matches_analytic_ry(xi, th, mu):
    p = ControlPoint.single(xi, th)
    fd = wz_connection_fd(analytic1, p, mu)
    assert fd.antihermiticity_error() < 1e-12
    assert np.abs(fd.matrix - wz_connection_analytic(p, "ry", mu).matrix).max() <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.4), st.floats(0.0, 1.4), st.floats(0, 2 * math.pi),
       st.sampled_from(["xi_1", "xi_2", "phi0_2"]))
def test_fd_matches_analytic_cphase(x1, x2, f, mu):
    p = ControlPoint.two(xi=(x1, x2), phi0=(0.0, f))
    fd = wz_connection_fd(analytic2, p, mu)
    assert np.abs(fd.matrix - wz_connection_analytic(p, "cphase", mu).matrix).max() <= 1e-6


def test_fd_is_second_order():
    p = ControlPoint.single(0.7, 0.9)
    exact = wz_connection_analytic(p, "ry", "xi").matrix
    e1 = np.abs(wz_connection_fd(analytic1, p, "xi", h=2e-2).matrix - exact).max()
    e2 = np.abs(wz_connection_fd(analytic1, p, "xi", h=1e-2).matrix - exact).max()
    assert 3.5 <= e1 / e2 <= 4.5


def test_analytic_connection_rejects_wrong_configuration():
    with pytest.raises(DomainError):
        wz_connection_analytic(ControlPoint.single(0.2, 0.1, 0.3), "ry", "xi")
    with pytest.raises(DomainError):
        wz_connection_analytic(ControlPoint.two(theta=(0.2, 0.0)), "cphase", "xi_1")


# -- closed-form angles and holonomies ---------------------------------------


def test_ry_rectangle_gives_rotation():
    xi = 0.5 / math.sin(1.2)
    path = ry_loop(xi, 1.2)
    assert loop_angle_ry(path) == pytest.approx(0.5)
    u = path_ordered_holonomy(FRAME1, path).unitary
    assert np.abs(u - ry_gate(0.5)).max() < 1e-6
    sy = np.array([[0, -1j], [1j, 0]])
    assert np.abs(ry_gate(0.5) - (math.cos(0.5) * np.eye(2) + 1j * math.sin(0.5) * sy)).max() < 1e-15


def test_rz_example_quarter_turn():
    path = rz_loop(math.pi / 4, 2 * math.pi)
    chi = loop_angle_rz(path)
    assert chi == pytest.approx(-math.pi / 2)
    u = path_ordered_holonomy(FRAME1, path).unitary
    assert np.abs(u - rz_holonomy(chi)).max() < 1e-6
    assert np.allclose(rz_holonomy(chi), np.diag([1, -1]))


def test_cphase_example_angles():
    path = cphase_loop(math.pi / 4, math.pi / 4, 2 * math.pi)
    eta, phi = cphase_loop_angles(path)
    assert eta == pytest.approx(math.pi)
    assert phi == pytest.approx(-math.pi / 7)
    u = path_ordered_holonomy(FRAME2, path).unitary
    assert np.abs(u - cphase_holonomy(eta, phi)).max() < 1e-6


def test_cphase_phi_against_quadrature():
    def f(x1, x2):
        s1, s2 = math.sin(x1) ** 2, math.sin(x2) ** 2
        lam2 = 2 - s1 * s2
        return (2 - s1 - lam2) / lam2 * s2

    x1, x2, sweep = 0.9, 0.6, 1.7
    ref = quad(lambda _: f(x1, x2), 0.0, sweep)[0]
    assert cphase_loop_angles(cphase_loop(x1, x2, sweep))[1] == pytest.approx(ref, rel=1e-12)


def test_trivial_and_reversed_and_doubled():
    assert np.array_equal(path_ordered_holonomy(FRAME1, ControlPath.trivial(1)).unitary, np.eye(2))
    path = ry_loop(0.6, 0.8)
    u = path_ordered_holonomy(FRAME1, path).unitary
    ur = path_ordered_holonomy(FRAME1, path.reversed()).unitary
    assert np.abs(ur - u.conj().T).max() < 1e-6
    u2 = path_ordered_holonomy(FRAME1, path.repeated(2), steps=4000).unitary
    assert np.abs(u2 - u @ u).max() < 1e-6


def test_composition_order_in_both_conventions():
    a, b = ry_loop(0.6, 0.8), rz_loop(0.9, 1.3)
    for conv in ("geometric", "schrodinger"):
        ua = path_ordered_holonomy(FRAME1, a, convention=conv).unitary
        ub = path_ordered_holonomy(FRAME1, b, convention=conv).unitary
        uab = path_ordered_holonomy(FRAME1, a.then(b), steps=4000, convention=conv).unitary
        expected = ua @ ub if conv == "geometric" else ub @ ua
        assert np.abs(uab - expected).max() < 1e-6
        assert np.abs(ua @ ub - ub @ ua).max() > 1e-2  # the order is actually tested


def test_holonomy_is_gauge_independent():
    path = ry_loop(0.6, 0.8)
    u_num = path_ordered_holonomy(FRAME1, path).unitary
    u_an = path_ordered_holonomy(analytic1, path).unitary
    assert np.abs(u_num - u_an).max() < 1e-6


def test_line_integral_of_ry_loop():
    path = ry_loop(0.6, 0.8)
    a = connection_line_integral(FRAME1, path)
    phi = loop_angle_ry(path)
    # oint A = i phi sigma_y, whose exponential is the geometric holonomy
    assert np.abs(a - phi * np.array([[0, 1], [-1, 0]])).max() < 1e-6


# -- paths -------------------------------------------------------------------


def test_path_csv_round_trip(tmp_path):
    path = cphase_loop(0.8, 0.5, 2 * math.pi)
    back = ControlPath.from_csv(path.to_csv(tmp_path / "p.csv"))
    assert np.array_equal(back.nodes, path.nodes)
    assert back.num_squids == 2


def test_path_validation():
    with pytest.raises(DomainError):
        ControlPath.from_waypoints([ControlPoint.origin(1), ControlPoint.single(0.3)]).validate()
    with pytest.raises(DomainError):
        ry_loop(math.pi / 2, 0.3).validate()
    ry_loop(0.4, 0.3).validate()
    assert rz_loop(0.5, 2 * math.pi).closed


def test_ad_clearance():
    path = cphase_loop(0.8, 0.5, 1.0)
    with pytest.raises(DomainError):
        check_ad_clearance(path, [ControlPoint.origin(2)])
    far = [ControlPoint.two(xi=(1.4, 1.4), phi0=(3.0, 3.0))]
    assert check_ad_clearance(path, far) > 0.05
    assert check_ad_clearance(path, []) == math.inf
